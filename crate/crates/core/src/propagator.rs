//! Time evolution under time-dependent Hamiltonians.
//!
//! The integrator is the exponential midpoint rule (first-order Magnus):
//! `U = prod_k exp(-i H(t_k + dt/2) dt)`, each factor computed from a
//! Hermitian eigendecomposition. Every factor is unitary, so norm is kept to
//! rounding; the global error is second order in `dt`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::hamiltonians::SweptHamiltonian;
use crate::hilbert::{CompositeSpace, LinearOp, StateVector};
use crate::linalg::unitary_exp;
use crate::num::{Real, C};

/// Default number of midpoint steps per sweep.
pub const DEFAULT_STEPS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepControl<T: Real> {
    FixedSteps(usize),
    /// Doubles the step count, starting at `initial_steps`, until two
    /// successive resolutions agree to `tolerance` per amplitude.
    Tolerance {
        tolerance: T,
        initial_steps: usize,
        max_steps: usize,
    },
}

impl<T: Real> StepControl<T> {
    pub fn tolerance(tolerance: T) -> Self {
        StepControl::Tolerance {
            tolerance,
            initial_steps: DEFAULT_STEPS,
            max_steps: 1 << 18,
        }
    }
}

impl<T: Real> Default for StepControl<T> {
    fn default() -> Self {
        StepControl::FixedSteps(DEFAULT_STEPS)
    }
}

pub struct EvolutionSpec<T: Real, F> {
    space: CompositeSpace,
    provider: F,
    t0: T,
    t1: T,
    control: StepControl<T>,
}

impl<T: Real, F: Fn(T) -> Array2<C<T>>> EvolutionSpec<T, F> {
    pub fn new(
        space: &CompositeSpace,
        provider: F,
        t0: T,
        t1: T,
        control: StepControl<T>,
    ) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::InvalidParameter(format!(
                "evolution window needs t1 > t0, got [{t0}, {t1}]"
            )));
        }
        if let StepControl::FixedSteps(0) = control {
            return Err(Error::InvalidParameter("at least one step required".into()));
        }
        let h = provider(t0);
        if h.dim() != (space.dim(), space.dim()) {
            return Err(Error::Dimension {
                expected: space.dim(),
                got: h.nrows(),
            });
        }
        Ok(Self {
            space: space.clone(),
            provider,
            t0,
            t1,
            control,
        })
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    fn step_unitaries(&self, steps: usize) -> impl Iterator<Item = Array2<C<T>>> + '_ {
        let dt = (self.t1 - self.t0) / T::from_usize_lossy(steps);
        let half = T::lit(0.5);
        (0..steps).map(move |k| {
            let mid = self.t0 + (T::from_usize_lossy(k) + half) * dt;
            unitary_exp(&(self.provider)(mid), dt)
        })
    }

    fn run_vector(&self, psi: &Array1<C<T>>, steps: usize) -> Array1<C<T>> {
        self.step_unitaries(steps)
            .fold(psi.clone(), |v, u| u.dot(&v))
    }

    fn run_matrix(&self, steps: usize) -> Array2<C<T>> {
        self.step_unitaries(steps)
            .fold(Array2::eye(self.space.dim()), |acc, u| u.dot(&acc))
    }

    /// Runs `f` at increasing resolution until successive results agree.
    fn controlled<A>(&self, f: impl Fn(usize) -> A, diff: impl Fn(&A, &A) -> T) -> Result<A> {
        match self.control {
            StepControl::FixedSteps(n) => Ok(f(n)),
            StepControl::Tolerance {
                tolerance,
                initial_steps,
                max_steps,
            } => {
                let mut n = initial_steps.max(1);
                let mut coarse = f(n);
                loop {
                    let fine = f(2 * n);
                    let err = diff(&coarse, &fine);
                    if err <= tolerance {
                        return Ok(fine);
                    }
                    if 4 * n > max_steps {
                        return Err(Error::StepControl {
                            tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
                            estimate: err.to_f64().unwrap_or(f64::NAN),
                            steps: 2 * n,
                        });
                    }
                    n *= 2;
                    coarse = fine;
                }
            }
        }
    }
}

impl<T: Real> EvolutionSpec<T, Box<dyn Fn(T) -> Array2<C<T>> + Send + Sync>> {
    /// Time-independent Hamiltonian applied for `duration`.
    pub fn constant(h: &LinearOp<T>, duration: T, control: StepControl<T>) -> Result<Self> {
        let entries = h.entries().clone();
        EvolutionSpec::new(
            h.space(),
            Box::new(move |_| entries.clone()),
            T::zero(),
            duration,
            control,
        )
    }

    /// Swept Hamiltonian over its profile window.
    pub fn swept(
        space: &CompositeSpace,
        h: SweptHamiltonian<T>,
        control: StepControl<T>,
    ) -> Result<Self> {
        let duration = h.profile().duration();
        EvolutionSpec::new(
            space,
            Box::new(move |t| h.at(t)),
            T::zero(),
            duration,
            control,
        )
    }
}

/// Solves `i d psi/dt = H(t) psi` over the spec window.
pub fn evolve<T: Real, F: Fn(T) -> Array2<C<T>>>(
    state: &StateVector<T>,
    spec: &EvolutionSpec<T, F>,
) -> Result<StateVector<T>> {
    if state.space() != spec.space() {
        return Err(Error::SpaceMismatch);
    }
    let out = spec.controlled(
        |n| spec.run_vector(state.amplitudes(), n),
        |a, b| {
            a.iter()
                .zip(b.iter())
                .fold(T::zero(), |m, (x, y)| m.max((*x - *y).norm()))
        },
    )?;
    StateVector::from_amplitudes(spec.space(), out)
}

/// Full propagator; column `k` is the evolution of basis state `k`.
pub fn propagator_matrix<T: Real, F: Fn(T) -> Array2<C<T>>>(
    spec: &EvolutionSpec<T, F>,
) -> Result<LinearOp<T>> {
    let u = spec.controlled(|n| spec.run_matrix(n), crate::hilbert::max_abs_diff)?;
    LinearOp::from_entries(spec.space(), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{h_cpb, SweepProfile};
    use crate::hilbert::{basis_state, make_space, ModeSpec};
    use crate::linalg::{determinant, unitarity_defect};
    use num_complex::Complex;

    fn cav_cpb() -> CompositeSpace {
        make_space(vec![ModeSpec::bosonic(4, "c"), ModeSpec::two_level("cpb")]).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let s = cav_cpb();
        let spec = EvolutionSpec::constant(&LinearOp::zeros(&s), 3.0, StepControl::FixedSteps(10))
            .unwrap();
        let psi = basis_state::<f64>(&s, &[1, 1]).unwrap();
        assert_eq!(evolve(&psi, &spec).unwrap(), psi);
        let u = propagator_matrix(&spec).unwrap();
        assert_eq!(u, LinearOp::identity(&s));
    }

    #[test]
    fn vacuum_rabi_transfer() {
        let s = cav_cpb();
        let h = h_cpb(&s, 0, 1, 1.0, 0.0).unwrap();
        let spec =
            EvolutionSpec::constant(&h, std::f64::consts::FRAC_PI_2, StepControl::FixedSteps(50))
                .unwrap();
        let psi = basis_state(&s, &[0, 1]).unwrap();
        let out = evolve(&psi, &spec).unwrap();
        let a = out.amplitude(&[1, 0]).unwrap();
        assert!((a - Complex::new(0.0, -1.0)).norm() < 1e-8);
        assert!((1.0 - a.norm_sqr()).abs() < 1e-8);
    }

    #[test]
    fn bad_specs() {
        let s = cav_cpb();
        let h = LinearOp::<f64>::zeros(&s);
        assert!(EvolutionSpec::constant(&h, 0.0, StepControl::FixedSteps(1)).is_err());
        assert!(EvolutionSpec::constant(&h, 1.0, StepControl::FixedSteps(0)).is_err());
        let t = make_space(vec![ModeSpec::two_level("q")]).unwrap();
        let spec = EvolutionSpec::constant(&h, 1.0, StepControl::FixedSteps(1)).unwrap();
        assert_eq!(
            evolve(&basis_state(&t, &[0]).unwrap(), &spec),
            Err(Error::SpaceMismatch)
        );
    }

    #[test]
    fn step_control_failure_is_reported() {
        let s = cav_cpb();
        let prof = SweepProfile::<f64>::cubic_odd(19.24, 20.77).unwrap();
        let h = SweptHamiltonian::cpb(&s, 0, 1, 1.0, prof).unwrap();
        let control = StepControl::Tolerance {
            tolerance: 1e-15,
            initial_steps: 8,
            max_steps: 64,
        };
        let spec = EvolutionSpec::swept(&s, h, control).unwrap();
        assert!(matches!(
            propagator_matrix(&spec),
            Err(Error::StepControl { .. })
        ));
    }

    #[test]
    fn swept_propagator_is_unitary() {
        let s = cav_cpb();
        let prof = SweepProfile::<f64>::cubic_odd(19.24, 20.77).unwrap();
        let h = SweptHamiltonian::cpb(&s, 0, 1, 1.0, prof).unwrap();
        let spec = EvolutionSpec::swept(&s, h, StepControl::FixedSteps(500)).unwrap();
        let u = propagator_matrix(&spec).unwrap();
        assert!(unitarity_defect(u.entries()) < 1e-8);
        assert!((determinant(u.entries()).norm() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn detuned_two_level_matches_closed_form() {
        // Single-excitation block [[d, g], [g, 0]]: closed-form Rabi amplitudes.
        let s = cav_cpb();
        let (g, d, t): (f64, f64, f64) = (0.7, 1.3, 2.9);
        let h = h_cpb(&s, 0, 1, g, d).unwrap();
        let spec = EvolutionSpec::constant(&h, t, StepControl::FixedSteps(3)).unwrap();
        let out = evolve(&basis_state(&s, &[0, 1]).unwrap(), &spec).unwrap();
        let w = (d * d + 4.0 * g * g).sqrt() / 2.0;
        let global = Complex::new(0.0, -d * t / 2.0).exp();
        let stay = global * Complex::new((w * t).cos(), -d / (2.0 * w) * (w * t).sin());
        let moved = global * Complex::new(0.0, -g / w * (w * t).sin());
        assert!((out.amplitude(&[0, 1]).unwrap() - stay).norm() < 1e-8);
        assert!((out.amplitude(&[1, 0]).unwrap() - moved).norm() < 1e-8);
    }

    #[test]
    fn norm_is_conserved_over_long_sweep() {
        let s = cav_cpb();
        let prof = SweepProfile::<f64>::quadratic_offset(33.05, 0.6664, 58.07).unwrap();
        let h = SweptHamiltonian::cpb(&s, 0, 1, 1.0, prof).unwrap();
        let spec = EvolutionSpec::swept(&s, h, StepControl::default()).unwrap();
        let psi = StateVector::superposition(
            &s,
            &[
                (Complex::new(1.0, 0.0), &[0, 1][..]),
                (Complex::new(0.0, 1.0), &[2, 0][..]),
            ],
        )
        .unwrap();
        let out = evolve(&psi, &spec).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn consecutive_windows_compose() {
        let s = cav_cpb();
        let prof = SweepProfile::<f64>::cubic_odd(5.0, 4.0).unwrap();
        let h = SweptHamiltonian::cpb(&s, 0, 1, 1.0, prof).unwrap();
        let whole =
            EvolutionSpec::new(&s, |t| h.at(t), 0.0, 4.0, StepControl::FixedSteps(400)).unwrap();
        let first =
            EvolutionSpec::new(&s, |t| h.at(t), 0.0, 1.5, StepControl::FixedSteps(150)).unwrap();
        let second =
            EvolutionSpec::new(&s, |t| h.at(t), 1.5, 4.0, StepControl::FixedSteps(250)).unwrap();
        let u = propagator_matrix(&whole).unwrap();
        let split = propagator_matrix(&second)
            .unwrap()
            .compose(&propagator_matrix(&first).unwrap())
            .unwrap();
        assert!(u.max_abs_diff(&split).unwrap() < 1e-12);
    }

    #[test]
    fn second_order_convergence() {
        let s = cav_cpb();
        let prof = SweepProfile::<f64>::cubic_odd(4.0, 6.0).unwrap();
        let h = SweptHamiltonian::cpb(&s, 0, 1, 1.0, prof).unwrap();
        let at = |n| {
            let spec =
                EvolutionSpec::new(&s, |t| h.at(t), 0.0, 6.0, StepControl::FixedSteps(n)).unwrap();
            propagator_matrix(&spec).unwrap()
        };
        let (u1, u2, u4) = (at(100), at(200), at(400));
        let e1 = u1.max_abs_diff(&u2).unwrap();
        let e2 = u2.max_abs_diff(&u4).unwrap();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn tolerance_control_converges() {
        let s = cav_cpb();
        let prof = SweepProfile::<f64>::cubic_odd(4.0, 6.0).unwrap();
        let h = SweptHamiltonian::cpb(&s, 0, 1, 1.0, prof).unwrap();
        let control = StepControl::Tolerance {
            tolerance: 1e-7,
            initial_steps: 50,
            max_steps: 1 << 16,
        };
        let spec = EvolutionSpec::swept(&s, h.clone(), control).unwrap();
        let u = propagator_matrix(&spec).unwrap();
        let reference = EvolutionSpec::swept(&s, h, StepControl::FixedSteps(1 << 15)).unwrap();
        assert!(
            u.max_abs_diff(&propagator_matrix(&reference).unwrap())
                .unwrap()
                < 1e-6
        );
    }

    #[test]
    fn single_precision_rabi() {
        let s = cav_cpb();
        let h = h_cpb::<f32>(&s, 0, 1, 1.0, 0.0).unwrap();
        let spec =
            EvolutionSpec::constant(&h, std::f32::consts::FRAC_PI_2, StepControl::FixedSteps(20))
                .unwrap();
        let out = evolve(&basis_state(&s, &[0, 1]).unwrap(), &spec).unwrap();
        assert!((out.amplitude(&[1, 0]).unwrap().norm_sqr() - 1.0).abs() < 1e-4);
    }
}
