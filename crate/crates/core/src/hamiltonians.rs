//! Hamiltonian builders for the cavity / Cooper-pair-box / molecular-mode
//! system, and the detuning sweep families that drive them.
//!
//! Units: hbar = 1, frequencies in units of a reference coupling, times in
//! inverse reference-coupling units.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{lowering_op, number_op, CompositeSpace, LinearOp, ModeKind};
use crate::num::{Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    /// Evaluates the forward curve at `T - t`.
    Reversed,
}

/// Closed-form detuning curves, written in terms of `x = 2t/T - 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepFamily<T: Real> {
    Constant {
        delta: T,
    },
    /// `delta0 * x`
    LinearOdd {
        delta0: T,
    },
    /// `delta0 * x^3`
    CubicOdd {
        delta0: T,
    },
    /// `a * x^2 + b`
    QuadraticOffset {
        a: T,
        b: T,
    },
    /// Piecewise-linear interpolation of `(t, delta)` samples.
    Sampled {
        points: Vec<(T, T)>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Constant,
    LinearOdd,
    CubicOdd,
    QuadraticOffset,
    Sampled,
}

impl<T: Real> SweepFamily<T> {
    pub fn kind(&self) -> FamilyKind {
        match self {
            SweepFamily::Constant { .. } => FamilyKind::Constant,
            SweepFamily::LinearOdd { .. } => FamilyKind::LinearOdd,
            SweepFamily::CubicOdd { .. } => FamilyKind::CubicOdd,
            SweepFamily::QuadraticOffset { .. } => FamilyKind::QuadraticOffset,
            SweepFamily::Sampled { .. } => FamilyKind::Sampled,
        }
    }
}

/// A detuning-versus-time curve over `[0, duration]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SweepRecord<T>", into = "SweepRecord<T>", bound = "")]
pub struct SweepProfile<T: Real> {
    family: SweepFamily<T>,
    duration: T,
    direction: Direction,
}

/// Serialized form of [`SweepProfile`].
///
/// ```json
/// {"family": "cubic_odd", "params": {"delta0": 19.24}, "duration": 20.77, "direction": "forward"}
/// ```
///
/// Parameter names: `constant` uses `delta`; `linear_odd` and `cubic_odd`
/// use `delta0`; `quadratic_offset` uses `a` and `b`; `sampled` takes a
/// `samples` list of `[t, delta]` pairs starting at `t = 0` and ending at
/// `t = duration`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "")]
pub struct SweepRecord<T: Real> {
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<(T, T)>>,
    pub duration: T,
    #[serde(default = "forward")]
    pub direction: Direction,
}

fn forward() -> Direction {
    Direction::Forward
}

impl<T: Real> TryFrom<SweepRecord<T>> for SweepProfile<T> {
    type Error = Error;

    fn try_from(rec: SweepRecord<T>) -> Result<Self> {
        let allowed: &[&str] = match rec.family {
            FamilyKind::Constant => &["delta"],
            FamilyKind::LinearOdd | FamilyKind::CubicOdd => &["delta0"],
            FamilyKind::QuadraticOffset => &["a", "b"],
            FamilyKind::Sampled => &[],
        };
        if let Some(k) = rec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidProfile(format!("unknown parameter `{k}`")));
        }
        let get = |name: &str| {
            rec.params
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidProfile(format!("missing parameter `{name}`")))
        };
        if rec.family != FamilyKind::Sampled && rec.samples.is_some() {
            return Err(Error::InvalidProfile(
                "samples only allowed for the sampled family".into(),
            ));
        }
        let family = match rec.family {
            FamilyKind::Constant => SweepFamily::Constant {
                delta: get("delta")?,
            },
            FamilyKind::LinearOdd => SweepFamily::LinearOdd {
                delta0: get("delta0")?,
            },
            FamilyKind::CubicOdd => SweepFamily::CubicOdd {
                delta0: get("delta0")?,
            },
            FamilyKind::QuadraticOffset => SweepFamily::QuadraticOffset {
                a: get("a")?,
                b: get("b")?,
            },
            FamilyKind::Sampled => SweepFamily::Sampled {
                points: rec.samples.ok_or_else(|| {
                    Error::InvalidProfile("sampled family needs `samples`".into())
                })?,
            },
        };
        SweepProfile::new(family, rec.duration, rec.direction)
    }
}

impl<T: Real> From<SweepProfile<T>> for SweepRecord<T> {
    fn from(p: SweepProfile<T>) -> Self {
        let mut params = BTreeMap::new();
        let mut samples = None;
        match p.family {
            SweepFamily::Constant { delta } => {
                params.insert("delta".to_string(), delta);
            }
            SweepFamily::LinearOdd { delta0 } | SweepFamily::CubicOdd { delta0 } => {
                params.insert("delta0".to_string(), delta0);
            }
            SweepFamily::QuadraticOffset { a, b } => {
                params.insert("a".to_string(), a);
                params.insert("b".to_string(), b);
            }
            SweepFamily::Sampled { ref points } => samples = Some(points.clone()),
        }
        SweepRecord {
            family: p.family.kind(),
            params,
            samples,
            duration: p.duration,
            direction: p.direction,
        }
    }
}

impl<T: Real> SweepProfile<T> {
    pub fn new(family: SweepFamily<T>, duration: T, direction: Direction) -> Result<Self> {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(Error::InvalidProfile(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let finite = |x: T| x.is_finite();
        let ok = match &family {
            SweepFamily::Constant { delta } => finite(*delta),
            SweepFamily::LinearOdd { delta0 } | SweepFamily::CubicOdd { delta0 } => finite(*delta0),
            SweepFamily::QuadraticOffset { a, b } => finite(*a) && finite(*b),
            SweepFamily::Sampled { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidProfile(
                        "sampled profile needs >= 2 points".into(),
                    ));
                }
                if points[0].0 != T::zero() || points[points.len() - 1].0 != duration {
                    return Err(Error::InvalidProfile(
                        "samples must start at t = 0 and end at t = duration".into(),
                    ));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidProfile(
                        "sample times must increase strictly".into(),
                    ));
                }
                points.iter().all(|&(t, d)| finite(t) && finite(d))
            }
        };
        if !ok {
            return Err(Error::InvalidProfile("non-finite parameter".into()));
        }
        Ok(Self {
            family,
            duration,
            direction,
        })
    }

    pub fn constant(delta: T, duration: T) -> Result<Self> {
        Self::new(
            SweepFamily::Constant { delta },
            duration,
            Direction::Forward,
        )
    }

    pub fn linear_odd(delta0: T, duration: T) -> Result<Self> {
        Self::new(
            SweepFamily::LinearOdd { delta0 },
            duration,
            Direction::Forward,
        )
    }

    /// `delta0 (2t/T - 1)^3`: from `-delta0` to `+delta0` when run forward.
    pub fn cubic_odd(delta0: T, duration: T) -> Result<Self> {
        Self::new(
            SweepFamily::CubicOdd { delta0 },
            duration,
            Direction::Forward,
        )
    }

    /// `a (2t/T - 1)^2 + b`: starts and ends at `a + b`, turns at `b`.
    pub fn quadratic_offset(a: T, b: T, duration: T) -> Result<Self> {
        Self::new(
            SweepFamily::QuadraticOffset { a, b },
            duration,
            Direction::Forward,
        )
    }

    pub fn sampled(points: Vec<(T, T)>) -> Result<Self> {
        let duration = points.last().map(|p| p.0).unwrap_or_else(T::zero);
        Self::new(
            SweepFamily::Sampled { points },
            duration,
            Direction::Forward,
        )
    }

    pub fn family(&self) -> &SweepFamily<T> {
        &self.family
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn reversed(&self) -> Self {
        let direction = match self.direction {
            Direction::Forward => Direction::Reversed,
            Direction::Reversed => Direction::Forward,
        };
        Self {
            direction,
            ..self.clone()
        }
    }

    pub fn with_duration(&self, duration: T) -> Result<Self> {
        match &self.family {
            SweepFamily::Sampled { points } => {
                let s = duration / self.duration;
                let pts = points.iter().map(|&(t, d)| (t * s, d)).collect();
                let mut p = Self::new(
                    SweepFamily::Sampled { points: pts },
                    duration,
                    self.direction,
                )?;
                // keep the end point bit-exact
                if let SweepFamily::Sampled { points } = &mut p.family {
                    let last = points.len() - 1;
                    points[last].0 = duration;
                }
                Ok(p)
            }
            f => Self::new(f.clone(), duration, self.direction),
        }
    }

    /// Whether the family is antisymmetric about `T/2`.
    pub fn is_odd(&self) -> bool {
        matches!(
            self.family,
            SweepFamily::LinearOdd { .. } | SweepFamily::CubicOdd { .. }
        )
    }

    /// Detuning at time `t`, `0 <= t <= T`.
    pub fn value(&self, t: T) -> Result<T> {
        if !(t >= T::zero() && t <= self.duration) {
            return Err(Error::TimeOutOfRange {
                t: t.to_f64().unwrap_or(f64::NAN),
                duration: self.duration.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.value_unchecked(t))
    }

    /// Detuning without the range check; `t` is clamped into the window.
    pub fn value_unchecked(&self, t: T) -> T {
        let t = t.max(T::zero()).min(self.duration);
        match self.direction {
            Direction::Forward => self.forward_value(t),
            Direction::Reversed => self.forward_value(self.duration - t),
        }
    }

    /// `d delta / dt`.
    pub fn rate(&self, t: T) -> T {
        let t = t.max(T::zero()).min(self.duration);
        match self.direction {
            Direction::Forward => self.forward_rate(t),
            Direction::Reversed => -self.forward_rate(self.duration - t),
        }
    }

    fn scaled(&self, t: T) -> T {
        let two = T::lit(2.0);
        two * t / self.duration - T::one()
    }

    fn forward_value(&self, t: T) -> T {
        let x = self.scaled(t);
        match &self.family {
            SweepFamily::Constant { delta } => *delta,
            SweepFamily::LinearOdd { delta0 } => *delta0 * x,
            SweepFamily::CubicOdd { delta0 } => *delta0 * x * x * x,
            SweepFamily::QuadraticOffset { a, b } => *a * x * x + *b,
            SweepFamily::Sampled { points } => {
                let k = segment(points, t);
                let (t0, d0) = points[k];
                let (t1, d1) = points[k + 1];
                d0 + (d1 - d0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn forward_rate(&self, t: T) -> T {
        let x = self.scaled(t);
        let dx = T::lit(2.0) / self.duration;
        match &self.family {
            SweepFamily::Constant { .. } => T::zero(),
            SweepFamily::LinearOdd { delta0 } => *delta0 * dx,
            SweepFamily::CubicOdd { delta0 } => T::lit(3.0) * *delta0 * x * x * dx,
            SweepFamily::QuadraticOffset { a, .. } => T::lit(2.0) * *a * x * dx,
            SweepFamily::Sampled { points } => {
                let k = segment(points, t);
                let (t0, d0) = points[k];
                let (t1, d1) = points[k + 1];
                (d1 - d0) / (t1 - t0)
            }
        }
    }

    /// Interior break points where the curve is not smooth (sampled profiles).
    pub fn breakpoints(&self) -> Vec<T> {
        match &self.family {
            SweepFamily::Sampled { points } => {
                let inner = points[1..points.len() - 1].iter().map(|p| p.0);
                match self.direction {
                    Direction::Forward => inner.collect(),
                    Direction::Reversed => {
                        let mut v: Vec<T> = inner.map(|t| self.duration - t).collect();
                        v.reverse();
                        v
                    }
                }
            }
            _ => Vec::new(),
        }
    }
}

fn segment<T: Real>(points: &[(T, T)], t: T) -> usize {
    let k = points.partition_point(|p| p.0 <= t);
    k.saturating_sub(1).min(points.len() - 2)
}

/// Checked sweep evaluation.
pub fn sweep_value<T: Real>(profile: &SweepProfile<T>, t: T) -> Result<T> {
    profile.value(t)
}

/// Resonant microwave drive on the Cooper-pair box, in the rotating frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "")]
pub struct DriveSpec<T: Real> {
    pub rabi_frequency: T,
    #[serde(default)]
    pub phase: T,
    pub duration: T,
}

impl<T: Real> DriveSpec<T> {
    pub fn new(rabi_frequency: T, phase: T, duration: T) -> Result<Self> {
        let d = Self {
            rabi_frequency,
            phase,
            duration,
        };
        d.validate()?;
        Ok(d)
    }

    /// Drive producing a rotation by `angle` with unit Rabi frequency.
    pub fn rotation(angle: T, phase: T) -> Result<Self> {
        Self::new(T::one(), phase, angle)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_frequency >= T::zero()) || !(self.duration >= T::zero()) {
            return Err(Error::InvalidParameter(
                "drive needs a non-negative Rabi frequency and duration".into(),
            ));
        }
        Ok(())
    }

    /// Rotation angle `Omega * duration`.
    pub fn angle(&self) -> T {
        self.rabi_frequency * self.duration
    }
}

fn require_kind(
    space: &CompositeSpace,
    index: usize,
    kind: ModeKind,
    name: &'static str,
) -> Result<()> {
    if space.mode(index)?.kind == kind {
        Ok(())
    } else {
        Err(Error::ModeKind {
            index,
            expected: name,
        })
    }
}

/// Exchange term `g (a b^dagger + a^dagger b)`.
fn exchange<T: Real>(space: &CompositeSpace, a: usize, b: usize, g: T) -> Result<LinearOp<T>> {
    let la = lowering_op::<T>(space, a)?;
    let lb = lowering_op::<T>(space, b)?;
    let hop = la.compose(&lb.adjoint())?;
    Ok(hop.add(&hop.adjoint())?.scale_real(g))
}

/// `g_c (sigma^- c^dagger + sigma^+ c) + delta sigma^+ sigma^-`.
pub fn h_cpb<T: Real>(
    space: &CompositeSpace,
    cavity_index: usize,
    cpb_index: usize,
    g_c: T,
    delta: T,
) -> Result<LinearOp<T>> {
    require_kind(space, cavity_index, ModeKind::Bosonic, "bosonic")?;
    require_kind(space, cpb_index, ModeKind::TwoLevel, "two_level")?;
    exchange(space, cpb_index, cavity_index, g_c)?
        .add(&number_op(space, cpb_index)?.scale_real(delta))
}

/// `g_i (m_i c^dagger + m_i^dagger c) + delta_i m_i^dagger m_i`.
pub fn h_molecule<T: Real>(
    space: &CompositeSpace,
    mol_index: usize,
    cavity_index: usize,
    g_i: T,
    delta_i: T,
) -> Result<LinearOp<T>> {
    require_kind(space, mol_index, ModeKind::Bosonic, "bosonic")?;
    require_kind(space, cavity_index, ModeKind::Bosonic, "bosonic")?;
    exchange(space, mol_index, cavity_index, g_i)?
        .add(&number_op(space, mol_index)?.scale_real(delta_i))
}

/// Collective Raman coupling `Omega g sqrt(N0) / (2 Delta)`.
pub fn effective_coupling<T: Real>(omega: T, g: T, n0: usize, delta_raman: T) -> Result<T> {
    if delta_raman == T::zero() {
        return Err(Error::InvalidParameter(
            "Raman detuning must be non-zero".into(),
        ));
    }
    Ok(omega * g * T::from_usize_lossy(n0).sqrt() / (T::lit(2.0) * delta_raman))
}

/// `(Omega/2)(e^{-i phi} sigma^+ + e^{i phi} sigma^-)`.
pub fn h_drive<T: Real>(
    space: &CompositeSpace,
    cpb_index: usize,
    drive: &DriveSpec<T>,
) -> Result<LinearOp<T>> {
    require_kind(space, cpb_index, ModeKind::TwoLevel, "two_level")?;
    drive.validate()?;
    let sm = lowering_op::<T>(space, cpb_index)?;
    let (s, c) = drive.phase.sin_cos();
    let e_minus = Complex::new(c, -s);
    let half = T::lit(0.5) * drive.rabi_frequency;
    sm.adjoint()
        .scale(e_minus)
        .add(&sm.scale(e_minus.conj()))
        .map(|h| h.scale_real(half))
}

/// Coupling part plus a detuning operator scaled by a swept profile:
/// `H(t) = coupling + delta(t) * detuned`.
#[derive(Clone, Debug)]
pub struct SweptHamiltonian<T: Real> {
    coupling: Array2<C<T>>,
    detuned: Array2<C<T>>,
    profile: SweepProfile<T>,
}

impl<T: Real> SweptHamiltonian<T> {
    /// Eq.-(1)-type Jaynes-Cummings coupling on the given space.
    pub fn cpb(
        space: &CompositeSpace,
        cavity: usize,
        cpb: usize,
        g_c: T,
        profile: SweepProfile<T>,
    ) -> Result<Self> {
        Ok(Self {
            coupling: h_cpb(space, cavity, cpb, g_c, T::zero())?.into_entries(),
            detuned: number_op(space, cpb)?.into_entries(),
            profile,
        })
    }

    pub fn molecule(
        space: &CompositeSpace,
        mol: usize,
        cavity: usize,
        g_i: T,
        profile: SweepProfile<T>,
    ) -> Result<Self> {
        Ok(Self {
            coupling: h_molecule(space, mol, cavity, g_i, T::zero())?.into_entries(),
            detuned: number_op(space, mol)?.into_entries(),
            profile,
        })
    }

    /// Arbitrary coupling and detuning operators.
    pub fn from_parts(
        coupling: Array2<C<T>>,
        detuned: Array2<C<T>>,
        profile: SweepProfile<T>,
    ) -> Self {
        Self {
            coupling,
            detuned,
            profile,
        }
    }

    pub fn profile(&self) -> &SweepProfile<T> {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn at(&self, t: T) -> Array2<C<T>> {
        let d = self.profile.value_unchecked(t);
        &self.coupling + &self.detuned.mapv(|z| z * d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{basis_state, make_space, total_number_op, ModeSpec};
    use crate::linalg::{eigh, unitary_exp};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cav_cpb() -> CompositeSpace {
        make_space(vec![ModeSpec::bosonic(4, "c"), ModeSpec::two_level("cpb")]).unwrap()
    }

    #[test]
    fn cubic_values() {
        let p = SweepProfile::cubic_odd(19.24, 20.77).unwrap();
        assert_eq!(sweep_value(&p, 0.0).unwrap(), -19.24);
        assert_eq!(sweep_value(&p, 20.77 / 2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(sweep_value(&p, 20.77).unwrap(), 19.24, epsilon = 1e-12);
        assert!(matches!(
            sweep_value(&p, 21.0),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(sweep_value(&p, -1e-9).is_err());
    }

    #[test]
    fn quadratic_turning_point() {
        let p = SweepProfile::quadratic_offset(33.05, 0.6664, 58.07).unwrap();
        assert_eq!(sweep_value(&p, 58.07 / 2.0).unwrap(), 0.6664);
        assert_abs_diff_eq!(sweep_value(&p, 0.0).unwrap(), 33.7164, epsilon = 1e-12);
    }

    #[test]
    fn sampled_interpolates_linearly() {
        let p = SweepProfile::sampled(vec![(0.0, -2.0), (1.0, 0.0), (3.0, 4.0)]).unwrap();
        assert_abs_diff_eq!(p.value(0.5).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.value(2.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.value(3.0).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.rate(2.0), 2.0, epsilon = 1e-15);
        assert_eq!(p.reversed().breakpoints(), vec![2.0]);
        assert!(SweepProfile::sampled(vec![(0.0, 1.0)]).is_err());
        assert!(SweepProfile::sampled(vec![(0.1, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn invalid_duration() {
        assert!(SweepProfile::cubic_odd(1.0, 0.0).is_err());
        assert!(SweepProfile::cubic_odd(1.0, -3.0).is_err());
        assert!(SweepProfile::cubic_odd(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn rate_matches_finite_difference() {
        for p in [
            SweepProfile::cubic_odd(19.24, 20.77).unwrap(),
            SweepProfile::quadratic_offset(33.05, 0.6664, 58.07)
                .unwrap()
                .reversed(),
            SweepProfile::linear_odd(5.0, 3.0).unwrap(),
        ] {
            let t = 0.3 * p.duration();
            let h = 1e-6;
            let fd: f64 = (p.value(t + h).unwrap() - p.value(t - h).unwrap()) / (2.0 * h);
            assert!((fd - p.rate(t)).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn record_round_trip_and_schema() {
        let json = r#"{"family":"quadratic_offset","params":{"a":33.05,"b":0.6664},"duration":58.07,"direction":"reversed"}"#;
        let p: SweepProfile<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(p.direction(), Direction::Reversed);
        assert_eq!(serde_json::to_string(&p).unwrap(), json);
        let bad = r#"{"family":"cubic_odd","params":{"a":1.0},"duration":1.0}"#;
        assert!(serde_json::from_str::<SweepProfile<f64>>(bad).is_err());
        let extra = r#"{"family":"cubic_odd","params":{"delta0":1.0},"duration":1.0,"speed":2}"#;
        assert!(serde_json::from_str::<SweepProfile<f64>>(extra).is_err());
        let sampled = r#"{"family":"sampled","samples":[[0.0,1.0],[2.0,3.0]],"duration":2.0}"#;
        let s: SweepProfile<f64> = serde_json::from_str(sampled).unwrap();
        assert_eq!(s.value(1.0).unwrap(), 2.0);
    }

    #[test]
    fn resonant_jc_splitting() {
        let s = cav_cpb();
        let h = h_cpb(&s, 0, 1, 1.0, 0.0).unwrap();
        // single-excitation block: |0,e> (index 1) and |1,g> (index 2)
        let block = ndarray::array![
            [h.entries()[[1, 1]], h.entries()[[1, 2]]],
            [h.entries()[[2, 1]], h.entries()[[2, 2]]]
        ];
        let e = eigh(&block);
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        // n = 1 block: |1,e> (3) and |2,g> (4)
        let block = ndarray::array![
            [h.entries()[[3, 3]], h.entries()[[3, 4]]],
            [h.entries()[[4, 3]], h.entries()[[4, 4]]]
        ];
        let e = eigh(&block);
        assert_abs_diff_eq!(e.values[1], 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[0], -(2f64.sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn uncoupled_cpb_is_diagonal() {
        let s = cav_cpb();
        let h = h_cpb(&s, 0, 1, 0.0, 2.5).unwrap();
        for ((i, j), z) in h.entries().indexed_iter() {
            let want = if i == j && s.occupations(i)[1] == 1 {
                2.5
            } else {
                0.0
            };
            assert_eq!(z.re, want);
            assert_eq!(z.im, 0.0);
        }
        assert!(matches!(
            h_cpb(&s, 1, 0, 1.0, 0.0),
            Err(Error::ModeKind { .. })
        ));
    }

    #[test]
    fn molecule_hamiltonian_properties() {
        let s = make_space(vec![ModeSpec::bosonic(3, "m"), ModeSpec::bosonic(4, "c")]).unwrap();
        let h = h_molecule(&s, 0, 1, 0.7, 1.3).unwrap();
        assert!(h.hermiticity_defect() < 1e-14);
        let n = total_number_op(&s, &[0, 1]).unwrap();
        assert!(h.commutator(&n).unwrap().max_abs() < 1e-13);
        let i11 = s.index_of(&[1, 1]).unwrap();
        let i02 = s.index_of(&[0, 2]).unwrap();
        assert_abs_diff_eq!(
            h.entries()[[i02, i11]].re,
            0.7 * 2f64.sqrt(),
            epsilon = 1e-15
        );

        let h0 = h_molecule(&s, 0, 1, 1.0, 0.0).unwrap();
        let i10 = s.index_of(&[1, 0]).unwrap();
        let i01 = s.index_of(&[0, 1]).unwrap();
        let block = ndarray::array![
            [h0.entries()[[i10, i10]], h0.entries()[[i10, i01]]],
            [h0.entries()[[i01, i10]], h0.entries()[[i01, i01]]]
        ];
        let e = eigh(&block);
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let cpb = make_space(vec![ModeSpec::two_level("q"), ModeSpec::bosonic(3, "c")]).unwrap();
        assert!(h_molecule(&cpb, 0, 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn effective_coupling_scaling() {
        assert_eq!(effective_coupling(2.0, 1.0, 4, 2.0).unwrap(), 1.0);
        assert_eq!(effective_coupling(2.0, 1.0, 0, 2.0).unwrap(), 0.0);
        let r = effective_coupling(1.0, 1.0, 100, 1.0).unwrap()
            / effective_coupling(1.0, 1.0, 99, 1.0).unwrap();
        assert_abs_diff_eq!(r, (100.0f64 / 99.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r, 1.00504, epsilon = 1e-5);
        assert!(effective_coupling(1.0, 1.0, 4, 0.0).is_err());
    }

    #[test]
    fn drive_rotations() {
        let s = make_space(vec![ModeSpec::two_level("q")]).unwrap();
        let g: crate::hilbert::StateVector<f64> = basis_state(&s, &[0]).unwrap();
        let pulse = |angle: f64| {
            let d = DriveSpec::rotation(angle, 0.0).unwrap();
            let h = h_drive(&s, 0, &d).unwrap();
            assert!(h.hermiticity_defect() < 1e-14);
            unitary_exp(h.entries(), d.duration)
        };
        let u = pulse(std::f64::consts::PI);
        let out = g.apply(&LinearOp::from_entries(&s, u).unwrap()).unwrap();
        assert!((out.amplitude(&[1]).unwrap() - Complex::new(0.0, -1.0)).norm() < 1e-14);

        let u = pulse(2.0 * std::f64::consts::PI);
        assert!((u[[0, 0]] + 1.0).norm() < 1e-14 && (u[[1, 1]] + 1.0).norm() < 1e-14);

        let u = pulse(std::f64::consts::FRAC_PI_2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u[[0, 0]] - r).norm() < 1e-14);
        assert!((u[[1, 0]] - Complex::new(0.0, -r)).norm() < 1e-14);
        assert!(DriveSpec::new(-1.0, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn odd_families_are_antisymmetric(d0 in -50.0f64..50.0, dur in 0.1f64..100.0, frac in 0.0f64..1.0) {
            let t = frac * dur;
            for p in [SweepProfile::cubic_odd(d0, dur).unwrap(), SweepProfile::linear_odd(d0, dur).unwrap()] {
                prop_assert!((p.value(t).unwrap() + p.value(dur - t).unwrap()).abs() < 1e-12 * (1.0 + d0.abs()));
            }
        }

        #[test]
        fn quadratic_is_even(a in -50.0f64..50.0, b in -5.0f64..5.0, dur in 0.1f64..100.0, frac in 0.0f64..1.0) {
            let p = SweepProfile::quadratic_offset(a, b, dur).unwrap();
            let t = frac * dur;
            prop_assert!((p.value(t).unwrap() - p.value(dur - t).unwrap()).abs() < 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn reversed_is_time_mirror(d0 in -50.0f64..50.0, dur in 0.1f64..100.0, frac in 0.0f64..1.0) {
            let p = SweepProfile::cubic_odd(d0, dur).unwrap();
            let t = frac * dur;
            prop_assert_eq!(p.reversed().value(t).unwrap(), p.value(dur - t).unwrap());
        }

        #[test]
        fn builders_are_hermitian_and_conserve_excitations(g in 0.0f64..5.0, d in -40.0f64..40.0) {
            let s = cav_cpb();
            let h = h_cpb(&s, 0, 1, g, d).unwrap();
            prop_assert!(h.hermiticity_defect() < 1e-14);
            let n = total_number_op(&s, &[0, 1]).unwrap();
            prop_assert!(h.commutator(&n).unwrap().max_abs() < 1e-13 * (1.0 + g + d.abs()));
            let drive = DriveSpec::new(g, d, 1.0).unwrap();
            prop_assert!(h_drive(&s, 1, &drive).unwrap().hermiticity_defect() < 1e-14);
        }
    }
}
