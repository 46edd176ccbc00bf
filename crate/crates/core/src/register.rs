//! Ensemble encoding of K qubits in one molecular cloud, and an exact
//! symmetric-subspace model of small ensembles to check the bosonic
//! approximation against.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{effective_coupling, SweepProfile, SweptHamiltonian};
use crate::hilbert::{basis_state, make_space, CompositeSpace, LinearOp, ModeSpec, StateVector};
use crate::metrics::process_fidelity;
use crate::num::{wrap_phase, Real, C};
use crate::protocols::{sweep_propagator, Device, Layout, ProtocolOptions, SwapDirection};

/// Largest ensemble handled by [`DickeModel`].
pub const MAX_DICKE_MOLECULES: usize = 8;
/// Largest number of excited levels handled by [`DickeModel`].
pub const MAX_DICKE_LEVELS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct RegisterConfig<T: Real> {
    pub n_molecules: usize,
    pub n_qubits: usize,
    pub vacuum_rabi: T,
    pub raman_detuning: T,
    /// Classical Raman amplitude for each qubit's excited level.
    pub classical_amplitudes: Vec<T>,
}

impl<T: Real> RegisterConfig<T> {
    /// Equal amplitudes chosen so that every qubit has unit collective
    /// coupling with all `n_molecules` in the ground state.
    pub fn normalized(n_molecules: usize, n_qubits: usize) -> Result<Self> {
        let omega = T::lit(2.0) / T::from_usize_lossy(n_molecules).sqrt();
        let c = Self {
            n_molecules,
            n_qubits,
            vacuum_rabi: T::one(),
            raman_detuning: T::one(),
            classical_amplitudes: vec![omega; n_qubits],
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 1 || self.n_molecules <= self.n_qubits {
            return Err(Error::InvalidParameter(format!(
                "need N > K >= 1, got N = {}, K = {}",
                self.n_molecules, self.n_qubits
            )));
        }
        if self.classical_amplitudes.len() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                got: self.classical_amplitudes.len(),
            });
        }
        if !(self.vacuum_rabi > T::zero())
            || self.raman_detuning == T::zero()
            || !self.raman_detuning.is_finite()
        {
            return Err(Error::InvalidParameter(
                "vacuum Rabi must be positive and Raman detuning non-zero".into(),
            ));
        }
        if self
            .classical_amplitudes
            .iter()
            .any(|&o| !(o > T::zero() && o.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "classical amplitudes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Collective coupling of `qubit` with `n0` ground-state molecules.
    pub fn coupling(&self, qubit: usize, n0: usize) -> Result<T> {
        let omega = *self
            .classical_amplitudes
            .get(qubit)
            .ok_or(Error::ModeIndex {
                index: qubit,
                modes: self.n_qubits,
            })?;
        effective_coupling(omega, self.vacuum_rabi, n0, self.raman_detuning)
    }

    /// Per-molecule Raman coupling `Omega g / (2 Delta)` of `qubit`.
    pub fn single_molecule_coupling(&self, qubit: usize) -> Result<T> {
        self.coupling(qubit, 1)
    }

    /// Ratio of the largest to the smallest collective coupling over all
    /// logical states, for equal amplitudes: `sqrt(N / (N - K))`.
    pub fn coupling_spread(&self) -> Result<T> {
        let k = self.n_qubits;
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for b in 0..(1usize << k) {
            let bits = LogicalState::from_index(b, k);
            let n0 = ground_count(&bits, self.n_molecules)?;
            for q in 0..k {
                let g = self.coupling(q, n0)?;
                lo = lo.min(g);
                hi = hi.max(g);
            }
        }
        Ok(hi / lo)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicalState {
    bits: Vec<u8>,
}

impl LogicalState {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidParameter(format!(
                "logical bits are 0 or 1, got {b}"
            )));
        }
        Ok(Self { bits })
    }

    /// Bits of `index`, most significant first.
    pub fn from_index(index: usize, k: usize) -> Self {
        Self {
            bits: crate::protocols::bits_of(index, k),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn excitations(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Occupation `a_i` in collective mode `i`.
pub fn encode(bits: &LogicalState) -> Vec<usize> {
    bits.bits.iter().map(|&b| b as usize).collect()
}

/// Molecules left in the ground state, `N - sum a_i`.
pub fn ground_count(bits: &LogicalState, n_molecules: usize) -> Result<usize> {
    n_molecules.checked_sub(bits.excitations()).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "{} excitations do not fit in {n_molecules} molecules",
            bits.excitations()
        ))
    })
}

/// Exact model of `n` identical `(k+1)`-level molecules restricted to the
/// permutation-symmetric subspace, coupled to one cavity mode.
///
/// Symmetric states are labelled by the occupations `(n_1, .., n_k)` of the
/// excited levels (ground occupation `n - sum n_i`), ordered by total
/// excitation and then lexicographically. Only states with at most
/// `max_excitations` molecular excitations are kept; the couplings conserve
/// total excitation, so the model is exact for inputs below that cap.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeModel {
    n: usize,
    k: usize,
    labels: Vec<Vec<usize>>,
    space: CompositeSpace,
}

impl DickeModel {
    pub fn new(n: usize, k: usize, max_excitations: usize, cavity_cutoff: usize) -> Result<Self> {
        if n == 0 || n > MAX_DICKE_MOLECULES || k == 0 || k > MAX_DICKE_LEVELS {
            return Err(Error::InvalidParameter(format!(
                "exact ensemble model supports 1 <= N <= {MAX_DICKE_MOLECULES}, 1 <= K <= {MAX_DICKE_LEVELS}; got N = {n}, K = {k}"
            )));
        }
        let cap = max_excitations.min(n);
        let mut labels = Vec::new();
        let mut occ = vec![0; k];
        loop {
            if occ.iter().sum::<usize>() <= cap {
                labels.push(occ.clone());
            }
            // odometer over 0..=cap per level
            let mut pos = k;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                if occ[pos] < cap {
                    occ[pos] += 1;
                    for o in occ.iter_mut().skip(pos + 1) {
                        *o = 0;
                    }
                    break;
                }
                if pos == 0 {
                    occ.clear();
                }
            }
            if occ.is_empty() {
                break;
            }
        }
        labels.sort_by(|a, b| (a.iter().sum::<usize>(), a).cmp(&(b.iter().sum::<usize>(), b)));
        let space = make_space(vec![
            ModeSpec::collective(labels.len(), "ensemble"),
            ModeSpec::bosonic(cavity_cutoff, "c"),
        ])?;
        Ok(Self {
            n,
            k,
            labels,
            space,
        })
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn molecules(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> usize {
        self.k
    }

    /// Symmetric-state labels in basis order.
    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    /// Full-space index of symmetric state `occ` with `photons` in the cavity.
    pub fn index_of(&self, occ: &[usize], photons: usize) -> Result<usize> {
        let s = self.label_index(occ)?;
        self.space.index_of(&[s, photons])
    }

    /// Basis state: symmetric state `occ` with `photons` in the cavity.
    pub fn state<T: Real>(&self, occ: &[usize], photons: usize) -> Result<StateVector<T>> {
        let s = self.label_index(occ)?;
        basis_state(&self.space, &[s, photons])
    }

    fn label_index(&self, occ: &[usize]) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l.as_slice() == occ)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "symmetric state {occ:?} not in the truncated basis"
                ))
            })
    }

    /// `S_i^+ = sum_j |i>_j <0|` on the symmetric block.
    pub fn raising_block<T: Real>(&self, level: usize) -> Result<Array2<C<T>>> {
        if level == 0 || level > self.k {
            return Err(Error::ModeIndex {
                index: level,
                modes: self.k,
            });
        }
        let d = self.labels.len();
        let mut m = Array2::zeros((d, d));
        for (c, from) in self.labels.iter().enumerate() {
            let ground = self.n - from.iter().sum::<usize>();
            if ground == 0 {
                continue;
            }
            let mut to = from.clone();
            to[level - 1] += 1;
            if let Some(r) = self.labels.iter().position(|l| *l == to) {
                let amp = T::from_usize_lossy(ground * to[level - 1]).sqrt();
                m[[r, c]] = C::new(amp, T::zero());
            }
        }
        Ok(m)
    }

    /// `S_i^+` on the ensemble-cavity space.
    pub fn raising<T: Real>(&self, level: usize) -> Result<LinearOp<T>> {
        LinearOp::lift(&self.space, &[0], &self.raising_block(level)?)
    }

    /// Bosonic-normalized collective lowering `m_i = S_i^- / sqrt(N)`.
    pub fn collective_lowering<T: Real>(&self, level: usize) -> Result<LinearOp<T>> {
        Ok(self
            .raising::<T>(level)?
            .adjoint()
            .scale_real(T::one() / T::from_usize_lossy(self.n).sqrt()))
    }

    /// Occupation of excited level `i`.
    pub fn level_number<T: Real>(&self, level: usize) -> Result<LinearOp<T>> {
        if level == 0 || level > self.k {
            return Err(Error::ModeIndex {
                index: level,
                modes: self.k,
            });
        }
        let d = self.labels.len();
        let block = Array2::from_shape_fn((d, d), |(r, c)| {
            if r == c {
                C::new(T::from_usize_lossy(self.labels[r][level - 1]), T::zero())
            } else {
                C::new(T::zero(), T::zero())
            }
        });
        LinearOp::lift(&self.space, &[0], &block)
    }

    /// `g (S_i^- c^dagger + S_i^+ c) + delta n_i` with single-molecule
    /// coupling `g`; the ensemble counterpart of `h_molecule`.
    pub fn h_molecule<T: Real>(&self, level: usize, g: T, delta: T) -> Result<LinearOp<T>> {
        let (coupling, number) = self.parts(level, g)?;
        coupling.add(&number.scale_real(delta))
    }

    pub fn swept<T: Real>(
        &self,
        level: usize,
        g: T,
        profile: SweepProfile<T>,
    ) -> Result<SweptHamiltonian<T>> {
        let (coupling, number) = self.parts(level, g)?;
        Ok(SweptHamiltonian::from_parts(
            coupling.into_entries(),
            number.into_entries(),
            profile,
        ))
    }

    fn parts<T: Real>(&self, level: usize, g: T) -> Result<(LinearOp<T>, LinearOp<T>)> {
        let sp = self.raising::<T>(level)?;
        let c = crate::hilbert::lowering_op::<T>(&self.space, 1)?;
        let hop = sp.compose(&c)?;
        let coupling = hop.add(&hop.adjoint())?.scale_real(g);
        Ok((coupling, self.level_number(level)?))
    }

    /// Conserved excitation count (molecular plus photons) per basis state.
    pub fn charge(&self) -> Vec<usize> {
        (0..self.space.dim())
            .map(|i| {
                let o = self.space.occupations(i);
                self.labels[o[0]].iter().sum::<usize>() + o[1]
            })
            .collect()
    }
}

/// `<[m, m^dagger]>` in the single-excitation symmetric state of `n`
/// two-level molecules, from the exact model.
pub fn commutator_expectation<T: Real>(n: usize) -> Result<T> {
    let model = DickeModel::new(n, 1, 2, 2)?;
    let m = model.collective_lowering::<T>(1)?;
    let c = m.commutator(&m.adjoint())?;
    Ok(crate::hilbert::expect(&model.state::<T>(&[1], 0)?, &c)?.re)
}

/// `1 - F` between the logical maps of a single store sweep of qubit 0 on a
/// two-qubit register, computed in the exact `n`-molecule model and in the
/// bosonic model with fixed collective coupling `g_i`.
///
/// Both models use the same collective coupling `g_i = g sqrt(n)`; the exact
/// model sees `g sqrt(n - 1)` when qubit 1 is excited.
pub fn exact_vs_bosonic_gap<T: Real>(
    n: usize,
    sweep: &SweepProfile<T>,
    g_i: T,
    options: &ProtocolOptions<T>,
) -> Result<T> {
    let (exact, bosonic) = rayon::join(
        || exact_store_map(n, sweep, g_i, options),
        || bosonic_store_map(sweep, g_i, options),
    );
    Ok(T::one() - process_fidelity(&exact?, &bosonic?)?)
}

/// Logical map `|b1 b2> -> |b1 b2>` of a store of qubit 0 (qubit 0 ends in
/// the cavity), exact ensemble model.
fn exact_store_map<T: Real>(
    n: usize,
    sweep: &SweepProfile<T>,
    g_i: T,
    options: &ProtocolOptions<T>,
) -> Result<Array2<C<T>>> {
    let model = DickeModel::new(n, 2, 2, 2)?;
    let g = g_i / T::from_usize_lossy(n).sqrt();
    let h = model.swept(1, g, sweep.clone())?;
    let u = sweep_propagator(
        model.space(),
        &h,
        &model.charge(),
        options.frame,
        options.control(),
    )?;
    let inputs = (0..4)
        .map(|b| {
            let bits = crate::protocols::bits_of(b, 2);
            model.index_of(&[bits[0] as usize, bits[1] as usize], 0)
        })
        .collect::<Result<Vec<_>>>()?;
    let outputs = (0..4)
        .map(|b| {
            let bits = crate::protocols::bits_of(b, 2);
            model.index_of(&[0, bits[1] as usize], bits[0] as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Array2::from_shape_fn((4, 4), |(r, c)| {
        u[[outputs[r], inputs[c]]]
    }))
}

fn bosonic_store_map<T: Real>(
    sweep: &SweepProfile<T>,
    g_i: T,
    options: &ProtocolOptions<T>,
) -> Result<Array2<C<T>>> {
    let layout = Layout::with_cutoffs(2, 2, 2)?;
    let device = Device::new(layout.clone(), *options);
    let mut out = Array2::zeros((4, 4));
    for b in 0..4 {
        let bits = crate::protocols::bits_of(b, 2);
        let (state, _) = device.swap_molecule_cavity(
            &layout.encode::<T>(&bits)?,
            0,
            SwapDirection::Store,
            sweep,
            g_i,
        )?;
        for r in 0..4 {
            let o = crate::protocols::bits_of(r, 2);
            out[[r, b]] = state.amplitude(&[0, o[1] as usize, o[0] as usize, 0])?;
        }
    }
    Ok(out)
}

/// Wrapped difference of the store-plus-retrieve phase on qubit `qubit`
/// between two register branches.
///
/// Each branch fixes the ground count `N0 = N - sum_{j != qubit} a_j`
/// seen by the qubit, and hence its collective coupling; the pair is then
/// propagated in full with that coupling on both legs.
pub fn fluctuation_phase_error<T: Real>(
    config: &RegisterConfig<T>,
    qubit: usize,
    store: &SweepProfile<T>,
    retrieve: &SweepProfile<T>,
    branches: (&LogicalState, &LogicalState),
    options: &ProtocolOptions<T>,
) -> Result<T> {
    config.validate()?;
    let phase = |bits: &LogicalState| -> Result<T> {
        if bits.bits().len() != config.n_qubits {
            return Err(Error::OccupationLength {
                expected: config.n_qubits,
                got: bits.bits().len(),
            });
        }
        let others = bits.excitations() - bits.bits().get(qubit).map_or(0, |&b| b as usize);
        let n0 = config
            .n_molecules
            .checked_sub(others)
            .ok_or_else(|| Error::InvalidParameter("more excitations than molecules".into()))?;
        let g = config.coupling(qubit, n0)?;
        pair_phase(store, retrieve, g, options)
    };
    let (a, b) = rayon::join(|| phase(branches.0), || phase(branches.1));
    Ok(wrap_phase(a? - b?))
}

/// Phase of `|1>` after a store and a retrieve with coupling `g`.
pub fn pair_phase<T: Real>(
    store: &SweepProfile<T>,
    retrieve: &SweepProfile<T>,
    g: T,
    options: &ProtocolOptions<T>,
) -> Result<T> {
    let layout = Layout::with_cutoffs(1, 2, 2)?;
    let device = Device::new(layout.clone(), *options);
    let one = basis_state(layout.space(), &[1, 0, 0])?;
    let (mid, _) = device.swap_molecule_cavity(&one, 0, SwapDirection::Store, store, g)?;
    let (end, _) = device.swap_molecule_cavity(&mid, 0, SwapDirection::Retrieve, retrieve, g)?;
    Ok(end.amplitude(&[1, 0, 0])?.arg())
}
