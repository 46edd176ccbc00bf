#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dressed;
pub mod error;
pub mod hamiltonians;
pub mod hilbert;
pub mod linalg;
pub mod metrics;
pub mod num;
pub mod optimizer;
pub mod propagator;
pub mod protocols;
pub mod quadrature;
pub mod register;

pub use error::{Error, Result};
pub use num::Real;

pub type State = hilbert::StateVector<f64>;
pub type Operator = hilbert::LinearOp<f64>;
pub type Sweep = hamiltonians::SweepProfile<f64>;
pub type Drive = hamiltonians::DriveSpec<f64>;
pub type Options = protocols::ProtocolOptions<f64>;
pub type Step = protocols::ProtocolStep<f64>;
pub type Report = protocols::GateReport<f64>;
pub type Machine = protocols::Device<f64>;
pub type Register = register::RegisterConfig<f64>;
pub type Conditions = optimizer::PhaseConditions<f64>;
pub type Feasibility = metrics::FeasibilityInput<f64>;
