//! Dense complex linear algebra for the small matrices used here: cyclic
//! Jacobi diagonalization of Hermitian matrices, unitary exponentials and
//! determinants.

use ndarray::{Array1, Array2};
use num_traits::{One, Zero};

use crate::num::{c_real, Real, C};

/// Eigen-decomposition `A = V diag(values) V^dagger` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    /// Ascending eigenvalues.
    pub values: Array1<T>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: Array2<C<T>>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi diagonalization. Only the Hermitian part of `a` is used.
pub fn eigh<T: Real>(a: &Array2<C<T>>) -> HermitianEigen<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh needs a square matrix");
    let half = T::lit(0.5);
    let mut m = Array2::from_shape_fn((n, n), |(i, j)| (a[[i, j]] + a[[j, i]].conj()) * half);
    let mut v: Array2<C<T>> = Array2::eye(n);

    let scale = m.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt();
    let tiny = T::epsilon() * T::epsilon() * scale.max(T::min_positive_value());

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&m);
        if off <= T::epsilon() * scale * T::lit(1e-2) || off <= T::min_positive_value() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let z = m[[p, q]];
                let r = z.norm();
                if r <= tiny {
                    continue;
                }
                rotate(&mut m, &mut v, p, q, r, z);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].re.partial_cmp(&m[[j, j]].re).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]].re));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    HermitianEigen { values, vectors }
}

fn off_diagonal_norm<T: Real>(m: &Array2<C<T>>) -> T {
    let mut s = T::zero();
    for ((i, j), z) in m.indexed_iter() {
        if i != j {
            s += z.norm_sqr();
        }
    }
    s.sqrt()
}

/// Annihilates `m[p, q]` with the closed-form 2x2 eigenbasis
/// `G = [[c, -s], [s e^{-i phi}, c e^{-i phi}]]`, where `m[p, q] = r e^{i phi}`
/// and `tan 2 beta = 2 r / (m_pp - m_qq)` with `beta` in `[-pi/4, pi/4]`.
fn rotate<T: Real>(m: &mut Array2<C<T>>, v: &mut Array2<C<T>>, p: usize, q: usize, r: T, z: C<T>) {
    let two = T::lit(2.0);
    let diff = m[[p, p]].re - m[[q, q]].re;
    let beta = if diff == T::zero() {
        T::FRAC_PI_4()
    } else {
        (two * r / diff).atan() / two
    };
    let (s, c) = beta.sin_cos();
    let phase = z.conj() / r; // e^{-i phi}
    let g00 = c_real(c);
    let g01 = c_real(-s);
    let g10 = phase * s;
    let g11 = phase * c;

    let n = m.nrows();
    // columns: M <- M G
    for k in 0..n {
        let mp = m[[k, p]];
        let mq = m[[k, q]];
        m[[k, p]] = mp * g00 + mq * g10;
        m[[k, q]] = mp * g01 + mq * g11;
    }
    // rows: M <- G^dagger M
    for k in 0..n {
        let mp = m[[p, k]];
        let mq = m[[q, k]];
        m[[p, k]] = g00.conj() * mp + g10.conj() * mq;
        m[[q, k]] = g01.conj() * mp + g11.conj() * mq;
    }
    m[[p, q]] = C::zero();
    m[[q, p]] = C::zero();
    m[[p, p]] = c_real(m[[p, p]].re);
    m[[q, q]] = c_real(m[[q, q]].re);
    for k in 0..n {
        let vp = v[[k, p]];
        let vq = v[[k, q]];
        v[[k, p]] = vp * g00 + vq * g10;
        v[[k, q]] = vp * g01 + vq * g11;
    }
}

impl<T: Real> HermitianEigen<T> {
    /// `V diag(f(lambda)) V^dagger`.
    pub fn map(&self, f: impl Fn(T) -> C<T>) -> Array2<C<T>> {
        let n = self.values.len();
        let fv: Vec<C<T>> = self.values.iter().map(|&x| f(x)).collect();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] = fv.iter().enumerate().fold(C::zero(), |acc, (k, &w)| {
                    acc + self.vectors[[i, k]] * w * self.vectors[[j, k]].conj()
                });
            }
        }
        out
    }
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn unitary_exp<T: Real>(h: &Array2<C<T>>, t: T) -> Array2<C<T>> {
    eigh(h).map(|lambda| {
        let (s, c) = (-lambda * t).sin_cos();
        C::new(c, s)
    })
}

/// Determinant by LU decomposition with partial pivoting.
pub fn determinant<T: Real>(a: &Array2<C<T>>) -> C<T> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = C::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].norm().partial_cmp(&m[[j, col]].norm()).unwrap())
            .unwrap();
        if m[[pivot, col]].norm() == T::zero() {
            return C::zero();
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[[col, k]];
                m[[col, k]] = m[[pivot, k]];
                m[[pivot, k]] = tmp;
            }
            det = -det;
        }
        let d = m[[col, col]];
        det *= d;
        for row in (col + 1)..n {
            let f = m[[row, col]] / d;
            for k in col..n {
                let sub = f * m[[col, k]];
                m[[row, k]] -= sub;
            }
        }
    }
    det
}

/// Largest element of `|U^dagger U - I|`.
pub fn unitarity_defect<T: Real>(u: &Array2<C<T>>) -> T {
    let udu = u.t().mapv(|z| z.conj()).dot(u);
    let eye: Array2<C<T>> = Array2::eye(u.nrows());
    crate::hilbert::max_abs_diff(&udu, &eye)
}

pub fn adjoint<T: Real>(a: &Array2<C<T>>) -> Array2<C<T>> {
    a.t().mapv(|z| z.conj())
}
