//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};
use crate::num::Real;

const MAX_DEPTH: u32 = 48;

struct Panel<T> {
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Panels are bisected until the Richardson difference between one and two
/// Simpson panels is below `15 * tol_local`. Reaching the depth limit
/// without meeting the tolerance is an error, not a silent truncation.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let half = T::lit(0.5);
    let six = T::lit(6.0);
    let fifteen = T::lit(15.0);
    let (fa, fb) = (f(a), f(b));
    let fm = f(half * (a + b));
    let whole = (b - a) * (fa + T::lit(4.0) * fm + fb) / six;
    // below a few ulps of the integral the Richardson estimate is noise
    let tol = tol.max(T::epsilon() * T::lit(64.0) * whole.abs());

    let mut stack = vec![Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth: 0,
    }];
    let mut total = T::zero();
    let mut carry = T::zero();
    let mut add = |x: T| {
        let y = x - carry;
        let t = total + y;
        carry = (t - total) - y;
        total = t;
    };
    let mut unresolved = T::zero();
    while let Some(p) = stack.pop() {
        let m = half * (p.a + p.b);
        let lm = half * (p.a + m);
        let rm = half * (m + p.b);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - p.a) * (p.fa + T::lit(4.0) * flm + p.fm) / six;
        let right = (p.b - m) * (p.fm + T::lit(4.0) * frm + p.fb) / six;
        let delta = left + right - p.whole;
        if delta.abs() <= fifteen * p.tol {
            add(left + right + delta / fifteen);
        } else if p.depth >= MAX_DEPTH {
            add(left + right + delta / fifteen);
            unresolved += delta.abs() / fifteen;
        } else {
            let tol = half * p.tol;
            let depth = p.depth + 1;
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol,
                depth,
            });
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol,
                depth,
            });
        }
    }
    if unresolved > tol || !total.is_finite() {
        return Err(Error::Quadrature {
            tolerance: tol.to_f64().unwrap_or(f64::NAN),
            estimate: unresolved.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(total)
}

/// Integrates over consecutive intervals split at `breaks`, sharing the
/// tolerance evenly.
pub fn adaptive_simpson_piecewise<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    breaks: &[T],
    tol: T,
) -> Result<T> {
    let mut nodes = vec![a];
    nodes.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    nodes.push(b);
    let share = tol / T::from_usize_lossy(nodes.len() - 1);
    nodes
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], share))
        .sum()
}
