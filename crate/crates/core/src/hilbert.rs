//! Composite Hilbert spaces built from truncated bosonic modes and two-level
//! systems, with dense state vectors and operators.
//!
//! Basis ordering is row-major with the **last** mode varying fastest: for
//! modes with cutoffs `d_0, d_1, ..., d_{m-1}` the occupation tuple
//! `(n_0, ..., n_{m-1})` sits at index `sum_k n_k * prod_{j>k} d_j`.

use ndarray::{Array1, Array2};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{c_real, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// Truncated harmonic oscillator (cavity field, collective molecular mode).
    Bosonic,
    /// Two-level system (the Cooper-pair box), cutoff fixed at 2.
    TwoLevel,
    /// Finite-dimensional block without ladder structure, used for the exact
    /// symmetric-subspace ensemble model.
    Collective,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub kind: ModeKind,
    pub cutoff: usize,
    #[serde(default)]
    pub label: String,
}

impl ModeSpec {
    pub fn bosonic(cutoff: usize, label: impl Into<String>) -> Self {
        Self {
            kind: ModeKind::Bosonic,
            cutoff,
            label: label.into(),
        }
    }

    pub fn two_level(label: impl Into<String>) -> Self {
        Self {
            kind: ModeKind::TwoLevel,
            cutoff: 2,
            label: label.into(),
        }
    }

    pub fn collective(dim: usize, label: impl Into<String>) -> Self {
        Self {
            kind: ModeKind::Collective,
            cutoff: dim,
            label: label.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ModeKind::TwoLevel => self.cutoff == 2,
            _ => self.cutoff >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCutoff {
                label: self.label.clone(),
                cutoff: self.cutoff,
            })
        }
    }
}

/// Ordered product of modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompositeSpace {
    modes: Vec<ModeSpec>,
    strides: Vec<usize>,
    dim: usize,
}

/// Builds a composite space; mode order is preserved.
pub fn make_space(modes: Vec<ModeSpec>) -> Result<CompositeSpace> {
    if modes.is_empty() {
        return Err(Error::EmptySpace);
    }
    for m in &modes {
        m.validate()?;
    }
    let mut strides = vec![1; modes.len()];
    for k in (0..modes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * modes[k + 1].cutoff;
    }
    let dim = strides[0] * modes[0].cutoff;
    Ok(CompositeSpace {
        modes,
        strides,
        dim,
    })
}

impl CompositeSpace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn mode(&self, index: usize) -> Result<&ModeSpec> {
        self.modes.get(index).ok_or(Error::ModeIndex {
            index,
            modes: self.modes.len(),
        })
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(Error::OccupationLength {
                expected: self.modes.len(),
                got: occupations.len(),
            });
        }
        let mut idx = 0;
        for (k, (&n, m)) in occupations.iter().zip(&self.modes).enumerate() {
            if n >= m.cutoff {
                return Err(Error::OccupationOutOfRange {
                    mode: k,
                    occupation: n,
                    cutoff: m.cutoff,
                });
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        self.modes
            .iter()
            .zip(&self.strides)
            .map(|(m, s)| (index / s) % m.cutoff)
            .collect()
    }

    /// Sub-space made of the listed modes, in the listed order.
    pub fn subspace(&self, modes: &[usize]) -> Result<CompositeSpace> {
        let specs = modes
            .iter()
            .map(|&i| self.mode(i).cloned())
            .collect::<Result<Vec<_>>>()?;
        make_space(specs)
    }

    fn check_distinct(&self, modes: &[usize]) -> Result<()> {
        for (a, &i) in modes.iter().enumerate() {
            self.mode(i)?;
            if modes[..a].contains(&i) {
                return Err(Error::InvalidParameter(format!("mode {i} listed twice")));
            }
        }
        Ok(())
    }
}

/// Index tables splitting the full space into (selected modes) x (rest).
pub(crate) struct Embedding {
    pub local_dim: usize,
    /// `full[env * local_dim + local]` is the full-space index.
    full: Vec<usize>,
    env_dim: usize,
}

impl Embedding {
    pub fn new(space: &CompositeSpace, selected: &[usize]) -> Result<Self> {
        space.check_distinct(selected)?;
        let local_dim: usize = selected.iter().map(|&i| space.modes[i].cutoff).product();
        let env_dim = space.dim / local_dim;
        let mut full = vec![0; space.dim];
        for idx in 0..space.dim {
            let occ = space.occupations(idx);
            let mut local = 0;
            for &i in selected {
                local = local * space.modes[i].cutoff + occ[i];
            }
            let mut env = 0;
            for (k, m) in space.modes.iter().enumerate() {
                if !selected.contains(&k) {
                    env = env * m.cutoff + occ[k];
                }
            }
            full[env * local_dim + local] = idx;
        }
        Ok(Self {
            local_dim,
            full,
            env_dim,
        })
    }

    fn block(&self, env: usize) -> &[usize] {
        &self.full[env * self.local_dim..(env + 1) * self.local_dim]
    }
}

/// Amplitude vector on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    space: CompositeSpace,
    amplitudes: Array1<C<T>>,
}

/// Unit vector for the given occupation tuple.
pub fn basis_state<T: Real>(
    space: &CompositeSpace,
    occupations: &[usize],
) -> Result<StateVector<T>> {
    let idx = space.index_of(occupations)?;
    let mut amplitudes = Array1::zeros(space.dim);
    amplitudes[idx] = C::one();
    Ok(StateVector {
        space: space.clone(),
        amplitudes,
    })
}

impl<T: Real> StateVector<T> {
    /// Wraps raw amplitudes; the vector is not renormalized.
    pub fn from_amplitudes(space: &CompositeSpace, amplitudes: Array1<C<T>>) -> Result<Self> {
        if amplitudes.len() != space.dim {
            return Err(Error::Dimension {
                expected: space.dim,
                got: amplitudes.len(),
            });
        }
        Ok(Self {
            space: space.clone(),
            amplitudes,
        })
    }

    /// Normalized superposition `sum_k w_k |occ_k>`.
    pub fn superposition(space: &CompositeSpace, terms: &[(C<T>, &[usize])]) -> Result<Self> {
        let mut amplitudes = Array1::zeros(space.dim);
        for (w, occ) in terms {
            amplitudes[space.index_of(occ)?] += *w;
        }
        Self::from_amplitudes(space, amplitudes)?.normalized()
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &Array1<C<T>> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Result<C<T>> {
        Ok(self.amplitudes[self.space.index_of(occupations)?])
    }

    pub fn norm(&self) -> T {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == T::zero() {
            return Err(Error::InvalidParameter(
                "zero vector cannot be normalized".into(),
            ));
        }
        self.amplitudes.mapv_inplace(|a| a / n);
        Ok(self)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector<T>) -> Result<C<T>> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .fold(C::zero(), |acc, (a, b)| acc + a.conj() * b))
    }

    pub fn apply(&self, op: &LinearOp<T>) -> Result<StateVector<T>> {
        if self.space != op.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(StateVector {
            space: self.space.clone(),
            amplitudes: op.entries.dot(&self.amplitudes),
        })
    }

    /// Applies `local`, an operator on the product of `modes` (in that
    /// order), leaving every other mode untouched.
    pub fn apply_local(&self, modes: &[usize], local: &Array2<C<T>>) -> Result<StateVector<T>> {
        let emb = Embedding::new(&self.space, modes)?;
        if local.dim() != (emb.local_dim, emb.local_dim) {
            return Err(Error::Dimension {
                expected: emb.local_dim,
                got: local.nrows(),
            });
        }
        let mut out = Array1::zeros(self.space.dim);
        let mut buf = Array1::zeros(emb.local_dim);
        for env in 0..emb.env_dim {
            let block = emb.block(env);
            for (b, &i) in buf.iter_mut().zip(block) {
                *b = self.amplitudes[i];
            }
            let y = local.dot(&buf);
            for (v, &i) in y.iter().zip(block) {
                out[i] = *v;
            }
        }
        Ok(StateVector {
            space: self.space.clone(),
            amplitudes: out,
        })
    }

    /// Reduced density matrix of a single mode.
    pub fn reduced_density(&self, mode: usize) -> Result<Array2<C<T>>> {
        let emb = Embedding::new(&self.space, &[mode])?;
        let d = emb.local_dim;
        let mut rho = Array2::zeros((d, d));
        for env in 0..emb.env_dim {
            let block = emb.block(env);
            for a in 0..d {
                for b in 0..d {
                    rho[[a, b]] += self.amplitudes[block[a]] * self.amplitudes[block[b]].conj();
                }
            }
        }
        Ok(rho)
    }

    /// Probability of finding mode `mode` with occupation `n`.
    pub fn occupation_probability(&self, mode: usize, n: usize) -> Result<T> {
        let rho = self.reduced_density(mode)?;
        if n >= rho.nrows() {
            return Err(Error::OccupationOutOfRange {
                mode,
                occupation: n,
                cutoff: rho.nrows(),
            });
        }
        Ok(rho[[n, n]].re)
    }
}

/// Dense operator on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOp<T: Real> {
    space: CompositeSpace,
    entries: Array2<C<T>>,
}

impl<T: Real> LinearOp<T> {
    pub fn from_entries(space: &CompositeSpace, entries: Array2<C<T>>) -> Result<Self> {
        if entries.dim() != (space.dim, space.dim) {
            return Err(Error::Dimension {
                expected: space.dim,
                got: entries.nrows(),
            });
        }
        Ok(Self {
            space: space.clone(),
            entries,
        })
    }

    pub fn zeros(space: &CompositeSpace) -> Self {
        Self {
            space: space.clone(),
            entries: Array2::zeros((space.dim, space.dim)),
        }
    }

    pub fn identity(space: &CompositeSpace) -> Self {
        Self {
            space: space.clone(),
            entries: Array2::eye(space.dim),
        }
    }

    /// Tensor-lifts `local`, acting on the product of `modes`, to the full space.
    pub fn lift(space: &CompositeSpace, modes: &[usize], local: &Array2<C<T>>) -> Result<Self> {
        let emb = Embedding::new(space, modes)?;
        if local.dim() != (emb.local_dim, emb.local_dim) {
            return Err(Error::Dimension {
                expected: emb.local_dim,
                got: local.nrows(),
            });
        }
        let mut entries = Array2::zeros((space.dim, space.dim));
        for env in 0..emb.env_dim {
            let block = emb.block(env);
            for (a, &i) in block.iter().enumerate() {
                for (b, &j) in block.iter().enumerate() {
                    entries[[i, j]] = local[[a, b]];
                }
            }
        }
        Ok(Self {
            space: space.clone(),
            entries,
        })
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn entries(&self) -> &Array2<C<T>> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C<T>> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn compose(&self, rhs: &LinearOp<T>) -> Result<Self> {
        self.same_space(rhs)?;
        Ok(Self {
            space: self.space.clone(),
            entries: self.entries.dot(&rhs.entries),
        })
    }

    pub fn add(&self, rhs: &LinearOp<T>) -> Result<Self> {
        self.same_space(rhs)?;
        Ok(Self {
            space: self.space.clone(),
            entries: &self.entries + &rhs.entries,
        })
    }

    pub fn scale(&self, factor: C<T>) -> Self {
        Self {
            space: self.space.clone(),
            entries: self.entries.mapv(|z| z * factor),
        }
    }

    pub fn scale_real(&self, factor: T) -> Self {
        self.scale(c_real(factor))
    }

    /// `[self, rhs] = self*rhs - rhs*self`.
    pub fn commutator(&self, rhs: &LinearOp<T>) -> Result<Self> {
        self.same_space(rhs)?;
        Ok(Self {
            space: self.space.clone(),
            entries: self.entries.dot(&rhs.entries) - rhs.entries.dot(&self.entries),
        })
    }

    /// Largest element of `|A - B|`.
    pub fn max_abs_diff(&self, rhs: &LinearOp<T>) -> Result<T> {
        self.same_space(rhs)?;
        Ok(max_abs_diff(&self.entries, &rhs.entries))
    }

    /// Largest element of `|A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> T {
        max_abs_diff(&self.entries, &self.adjoint().entries)
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    fn same_space(&self, rhs: &LinearOp<T>) -> Result<()> {
        if self.space == rhs.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }
}

pub(crate) fn max_abs_diff<T: Real>(a: &Array2<C<T>>, b: &Array2<C<T>>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |m, (x, y)| m.max((*x - *y).norm()))
}

/// Single-mode annihilation matrix: `sqrt(n)` on the superdiagonal, so that
/// `a|n> = sqrt(n)|n-1>`. For a two-level mode this is sigma-minus.
pub(crate) fn ladder_matrix<T: Real>(cutoff: usize) -> Array2<C<T>> {
    let mut a = Array2::zeros((cutoff, cutoff));
    for n in 1..cutoff {
        a[[n - 1, n]] = c_real(T::from_usize_lossy(n).sqrt());
    }
    a
}

fn ladder_mode(space: &CompositeSpace, mode_index: usize) -> Result<usize> {
    let m = space.mode(mode_index)?;
    if m.kind == ModeKind::Collective {
        return Err(Error::ModeKind {
            index: mode_index,
            expected: "bosonic or two_level",
        });
    }
    Ok(m.cutoff)
}

/// Annihilation operator (or sigma-minus) of one mode, lifted to the full space.
pub fn lowering_op<T: Real>(space: &CompositeSpace, mode_index: usize) -> Result<LinearOp<T>> {
    let cutoff = ladder_mode(space, mode_index)?;
    LinearOp::lift(space, &[mode_index], &ladder_matrix(cutoff))
}

pub fn raising_op<T: Real>(space: &CompositeSpace, mode_index: usize) -> Result<LinearOp<T>> {
    Ok(lowering_op(space, mode_index)?.adjoint())
}

/// `a^dagger a` for one mode (diagonal occupation count).
pub fn number_op<T: Real>(space: &CompositeSpace, mode_index: usize) -> Result<LinearOp<T>> {
    let cutoff = space.mode(mode_index)?.cutoff;
    let local = Array2::from_diag(&Array1::from_iter(
        (0..cutoff).map(|n| c_real(T::from_usize_lossy(n))),
    ));
    LinearOp::lift(space, &[mode_index], &local)
}

/// Sum of occupation numbers over the listed modes.
pub fn total_number_op<T: Real>(space: &CompositeSpace, modes: &[usize]) -> Result<LinearOp<T>> {
    let mut acc = LinearOp::zeros(space);
    for &m in modes {
        acc = acc.add(&number_op(space, m)?)?;
    }
    Ok(acc)
}

/// `<psi|A|psi>`.
pub fn expect<T: Real>(state: &StateVector<T>, op: &LinearOp<T>) -> Result<C<T>> {
    let applied = state.apply(op)?;
    state.inner(&applied)
}

#[cfg(test)]
pub(crate) fn complex<T: Real>(re: T, im: T) -> C<T> {
    C::new(re, im)
}
