//! Closed-form dressed-state analytics for a two-level exchange block
//!
//! ```text
//! [[delta, g sqrt(n+1)],
//!  [g sqrt(n+1),     0]]
//! ```
//!
//! in the basis (upper, lower), where "upper" is the detuned excitation
//! (CPB excited or molecular quantum, `n` photons) and "lower" its partner
//! with `n + 1` photons. The dressed states are
//! `|+,n> = cos(theta)|upper> + sin(theta)|lower>` and
//! `|-,n> = -sin(theta)|upper> + cos(theta)|lower>` with
//! `theta = atan2(2 g sqrt(n+1), delta) / 2`, which is continuous through
//! resonance and runs from 0 (delta -> +inf) to pi/2 (delta -> -inf).
//!
//! Phases are measured relative to the uncoupled ground state, whose energy
//! is zero, and reports wrap them to (-pi, pi].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{SweepFamily, SweepProfile};
use crate::num::{wrap_phase, Real};
use crate::quadrature::adaptive_simpson_piecewise;

/// Absolute tolerance of [`phase_integral`], radians.
pub const PHASE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }
}

/// Bare level of the exchange block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BareLevel {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedPoint<T: Real> {
    pub theta: T,
    pub e_plus: T,
    pub e_minus: T,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PhaseReport<T: Real> {
    pub dynamical: T,
    pub geometric: T,
    pub total_mod_2pi: T,
}

impl<T: Real> PhaseReport<T> {
    pub fn new(dynamical: T, geometric: T) -> Self {
        Self {
            dynamical,
            geometric,
            total_mod_2pi: wrap_phase(dynamical + geometric),
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Phases of consecutive legs add.
    pub fn then(&self, next: &PhaseReport<T>) -> Self {
        Self::new(
            self.dynamical + next.dynamical,
            self.geometric + next.geometric,
        )
    }
}

fn coupling_n<T: Real>(g: T, n: usize) -> T {
    g * T::from_usize_lossy(n + 1).sqrt()
}

/// Mixing angle `theta` in (0, pi/2).
pub fn mixing_angle<T: Real>(g: T, delta: T, n: usize) -> Result<T> {
    if !(g > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "coupling must be positive, got {g}"
        )));
    }
    Ok(mixing_angle_unchecked(g, delta, n))
}

fn mixing_angle_unchecked<T: Real>(g: T, delta: T, n: usize) -> T {
    let two = T::lit(2.0);
    (two * coupling_n(g, n)).atan2(delta) / two
}

/// `E_{+-,n} = delta/2 +- sqrt(delta^2 + 4 g^2 (n+1)) / 2`.
pub fn dressed_energies<T: Real>(g: T, delta: T, n: usize) -> (T, T) {
    let half = T::lit(0.5);
    let root = half * generalized_rabi(g, delta, n);
    (half * delta + root, half * delta - root)
}

/// `sqrt(delta^2 + 4 g^2 (n+1))`, the dressed splitting.
pub fn generalized_rabi<T: Real>(g: T, delta: T, n: usize) -> T {
    let gn = coupling_n(g, n);
    (delta * delta + T::lit(4.0) * gn * gn).sqrt()
}

pub fn dressed_point<T: Real>(g: T, delta: T, n: usize) -> Result<DressedPoint<T>> {
    let theta = mixing_angle(g, delta, n)?;
    let (e_plus, e_minus) = dressed_energies(g, delta, n);
    Ok(DressedPoint {
        theta,
        e_plus,
        e_minus,
        n,
    })
}

/// Dressed eigenvector `(upper, lower)` components for the branch.
pub fn dressed_vector<T: Real>(theta: T, branch: Branch) -> (T, T) {
    let (s, c) = theta.sin_cos();
    match branch {
        Branch::Plus => (c, s),
        Branch::Minus => (-s, c),
    }
}

fn integral_of_detuning<T: Real>(profile: &SweepProfile<T>) -> T {
    let dur = profile.duration();
    match profile.family() {
        SweepFamily::Constant { delta } => *delta * dur,
        SweepFamily::LinearOdd { .. } | SweepFamily::CubicOdd { .. } => T::zero(),
        SweepFamily::QuadraticOffset { a, b } => *a * dur / T::lit(3.0) + *b * dur,
        SweepFamily::Sampled { points } => points
            .windows(2)
            .map(|w| T::lit(0.5) * (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
            .sum(),
    }
}

/// Dynamical phase `phi_{+-,n} = 1/2 int_0^T [-delta(t) -+ sqrt(delta^2 + 4 g^2 (n+1))] dt`
/// accumulated along one dressed branch.
///
/// The detuning term is integrated in closed form (it vanishes for odd
/// families); the square-root term by adaptive Simpson to [`PHASE_TOLERANCE`].
pub fn phase_integral<T: Real>(
    profile: &SweepProfile<T>,
    g: T,
    n: usize,
    branch: Branch,
) -> Result<T> {
    phase_integral_with_tolerance(profile, g, n, branch, T::lit(PHASE_TOLERANCE))
}

pub fn phase_integral_with_tolerance<T: Real>(
    profile: &SweepProfile<T>,
    g: T,
    n: usize,
    branch: Branch,
    tol: T,
) -> Result<T> {
    if !(g > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "coupling must be positive, got {g}"
        )));
    }
    let half = T::lit(0.5);
    // the 1/2 prefactor halves the error, so integrate to 2 tol
    let root = adaptive_simpson_piecewise(
        |t| generalized_rabi(g, profile.value_unchecked(t), n),
        T::zero(),
        profile.duration(),
        &profile.breakpoints(),
        tol + tol,
    )?;
    Ok(-half * integral_of_detuning(profile) - branch.sign::<T>() * half * root)
}

/// Fictitious field `B = -(g, 0, delta/2)` of the equivalent spin-1/2.
pub fn fictitious_field<T: Real>(g: T, delta: T) -> [T; 3] {
    [-g, T::zero(), -T::lit(0.5) * delta]
}

/// Signed angle swept by `B` in the x-z plane during one sweep.
///
/// With `g > 0`, `B` stays in the `x < 0` half plane, so the angle is the
/// difference of endpoint azimuths; it equals `2 (theta(T) - theta(0))`.
pub fn field_rotation<T: Real>(profile: &SweepProfile<T>, g: T) -> Result<T> {
    let azimuth = |delta: T| {
        let b = fictitious_field(g, delta);
        b[0].atan2(b[2])
    };
    if !(g > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "coupling must be positive, got {g}"
        )));
    }
    Ok(azimuth(profile.value_unchecked(profile.duration()))
        - azimuth(profile.value_unchecked(T::zero())))
}

/// Geometric phase of a spin-1/2 following a field that returns to its
/// starting direction after turning through `rotations` (summed).
///
/// A planar loop turning through a total angle `alpha` encloses the solid
/// angle `|alpha|` (a hemisphere per full turn); the phase is `-Omega/2`.
pub fn loop_geometric_phase<T: Real>(rotations: &[T]) -> T {
    let total: T = rotations.iter().copied().sum();
    -T::lit(0.5) * total.abs()
}

/// Prediction for one adiabatic leg of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticLeg<T: Real> {
    pub branch: Branch,
    pub output: BareLevel,
    /// Overlap sign `<out|v(T)><v(0)|in>`; -1 means a geometric phase of -pi.
    pub sign: T,
    pub phase: PhaseReport<T>,
}

/// Follows the bare level `input` through `profile` on the dressed branch it
/// connects to at `t = 0`.
pub fn follow_adiabatically<T: Real>(
    profile: &SweepProfile<T>,
    g: T,
    n: usize,
    input: BareLevel,
) -> Result<AdiabaticLeg<T>> {
    let d0 = profile.value_unchecked(T::zero());
    let d1 = profile.value_unchecked(profile.duration());
    if d0 == T::zero() || d1 == T::zero() {
        return Err(Error::InvalidProfile(
            "sweep must start and end away from resonance".into(),
        ));
    }
    let branch = match (input, d0 > T::zero()) {
        (BareLevel::Upper, true) | (BareLevel::Lower, false) => Branch::Plus,
        _ => Branch::Minus,
    };
    let output = match (branch, d1 > T::zero()) {
        (Branch::Plus, true) | (Branch::Minus, false) => BareLevel::Upper,
        _ => BareLevel::Lower,
    };
    let pick = |v: (T, T), level: BareLevel| match level {
        BareLevel::Upper => v.0,
        BareLevel::Lower => v.1,
    };
    let v0 = dressed_vector(mixing_angle(g, d0, n)?, branch);
    let v1 = dressed_vector(mixing_angle(g, d1, n)?, branch);
    let overlap = pick(v1, output) * pick(v0, input);
    let sign = if overlap < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    let geometric = if sign < T::zero() {
        -T::PI()
    } else {
        T::zero()
    };
    let dynamical = phase_integral(profile, g, n, branch)?;
    Ok(AdiabaticLeg {
        branch,
        output,
        sign,
        phase: PhaseReport::new(dynamical, geometric),
    })
}

/// Number of grid intervals used by [`adiabaticity_margin`].
const MARGIN_GRID: usize = 20_000;

/// `max_t |d theta / dt| / (E_+ - E_-)`; values well below one indicate the
/// sweep is adiabatic.
pub fn adiabaticity_margin<T: Real>(profile: &SweepProfile<T>, g: T, n: usize) -> T {
    let gn = coupling_n(g, n);
    let dur = profile.duration();
    let ratio = |t: T| {
        let d = profile.value_unchecked(t);
        let gap2 = d * d + T::lit(4.0) * gn * gn;
        // d theta / d delta = -gn / gap^2
        (gn * profile.rate(t)).abs() / (gap2 * gap2.sqrt())
    };
    let steps = T::from_usize_lossy(MARGIN_GRID);
    let mut best = T::zero();
    let mut best_k = 0;
    for k in 0..=MARGIN_GRID {
        let v = ratio(dur * T::from_usize_lossy(k) / steps);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // golden-section refinement inside the bracketing cells
    let h = dur / steps;
    let mut lo = (T::from_usize_lossy(best_k) - T::one()).max(T::zero()) * h;
    let mut hi = (T::from_usize_lossy(best_k + 1) * h).min(dur);
    let phi = T::lit(0.618_033_988_749_894_8);
    for _ in 0..60 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if ratio(x1) > ratio(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    best.max(ratio(T::lit(0.5) * (lo + hi)))
}
