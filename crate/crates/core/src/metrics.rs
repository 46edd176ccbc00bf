//! Gate quality measures and the decoherence-budget calculator.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Real, C};

/// `|tr(target^dagger achieved) / d|^2`, clamped to `[0, 1]`.
///
/// Invariant under a global phase of either argument.
pub fn process_fidelity<T: Real>(achieved: &Array2<C<T>>, target: &Array2<C<T>>) -> Result<T> {
    let d = target.nrows();
    if target.dim() != (d, d) || achieved.dim() != (d, d) {
        return Err(Error::Dimension {
            expected: d,
            got: achieved.nrows(),
        });
    }
    if d == 0 {
        return Err(Error::Dimension {
            expected: 1,
            got: 0,
        });
    }
    let tr = achieved
        .iter()
        .zip(target.iter())
        .fold(C::new(T::zero(), T::zero()), |acc, (a, t)| {
            acc + t.conj() * *a
        });
    let f = (tr / T::from_usize_lossy(d)).norm_sqr();
    Ok(f.max(T::zero()).min(T::one()))
}

/// Rows `basis` of `columns`: the computational block of a map whose
/// columns are the images of the basis inputs.
pub fn restrict<T: Real>(columns: &Array2<C<T>>, basis: &[usize]) -> Result<Array2<C<T>>> {
    if let Some(&bad) = basis.iter().find(|&&i| i >= columns.nrows()) {
        return Err(Error::Dimension {
            expected: columns.nrows(),
            got: bad,
        });
    }
    Ok(Array2::from_shape_fn(
        (basis.len(), columns.ncols()),
        |(r, c)| columns[[basis[r], c]],
    ))
}

/// Population left inside `basis` for each column.
pub fn retained_population<T: Real>(columns: &Array2<C<T>>, basis: &[usize]) -> Result<Vec<T>> {
    let block = restrict(columns, basis)?;
    Ok(block
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
        .collect())
}

/// Average population outside `basis`, over inputs uniformly drawn from the
/// basis. Column `k` of `columns` is the image of the `k`-th basis input.
pub fn leakage<T: Real>(columns: &Array2<C<T>>, basis: &[usize]) -> Result<T> {
    if columns.ncols() != basis.len() {
        return Err(Error::Dimension {
            expected: basis.len(),
            got: columns.ncols(),
        });
    }
    if basis.is_empty() {
        return Ok(T::zero());
    }
    let kept = retained_population(columns, basis)?;
    let total: T = columns
        .columns()
        .into_iter()
        .zip(kept)
        .map(|(c, k)| c.iter().map(|z| z.norm_sqr()).sum::<T>() - k)
        .sum();
    Ok((total / T::from_usize_lossy(basis.len()))
        .max(T::zero())
        .min(T::one()))
}

/// Physical inputs in SI units; angular rates in rad/s, times in s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct FeasibilityInput<T: Real> {
    pub g_c: T,
    pub g_i_max: T,
    pub t2_cpb: T,
    pub t1_transmon: T,
    pub photon_loss_rate: T,
    pub molecular_scatter_rate: T,
    pub gate_duration_in_gc: T,
}

impl<T: Real> Default for FeasibilityInput<T> {
    fn default() -> Self {
        let two_pi = T::lit(2.0) * T::PI();
        Self {
            g_c: two_pi * T::lit(50e6),
            g_i_max: two_pi * T::lit(10e6),
            t2_cpb: T::lit(1e-6),
            t1_transmon: T::lit(16e-6),
            photon_loss_rate: two_pi * T::lit(10e3),
            molecular_scatter_rate: two_pi * T::lit(700.0),
            gate_duration_in_gc: T::lit(58.07),
        }
    }
}

impl<T: Real> FeasibilityInput<T> {
    /// Same inputs with the transmon lifetime as the qubit coherence time.
    pub fn transmon(&self) -> Self {
        Self {
            t2_cpb: self.t1_transmon,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g_c", self.g_c),
            ("g_i_max", self.g_i_max),
            ("t2_cpb", self.t2_cpb),
            ("t1_transmon", self.t1_transmon),
            ("photon_loss_rate", self.photon_loss_rate),
            ("molecular_scatter_rate", self.molecular_scatter_rate),
            ("gate_duration_in_gc", self.gate_duration_in_gc),
        ];
        for (name, v) in fields {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeasibilityReport<T: Real> {
    /// `g_c T2`.
    pub swap_ops_before_decoherence: T,
    /// `(gate_duration_in_gc / g_c) / T2`.
    pub gate_to_t2_ratio: T,
    /// `g_i_max / photon_loss_rate`, a proxy for the number of gates.
    pub photon_gates: T,
    pub notes: String,
}

pub fn feasibility<T: Real>(input: &FeasibilityInput<T>) -> Result<FeasibilityReport<T>> {
    input.validate()?;
    let scatter_swaps = input.g_i_max / input.molecular_scatter_rate;
    Ok(FeasibilityReport {
        swap_ops_before_decoherence: input.g_c * input.t2_cpb,
        gate_to_t2_ratio: input.gate_duration_in_gc / input.g_c / input.t2_cpb,
        photon_gates: input.g_i_max / input.photon_loss_rate,
        notes: format!(
            "photon_gates is g_i_max over the cavity loss rate; molecular scattering allows about {:.0} molecule-cavity swaps",
            scatter_swaps.to_f64().unwrap_or(f64::NAN)
        ),
    })
}
