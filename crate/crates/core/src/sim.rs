//! Statevector simulation, exact propagation and observables.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{singlet_pair_path, triplet_reference_path, CsfBasis};
use crate::circuits::{sz_trotter_step, Circuit, CsfCompiler, Gate, GateKind};
use crate::encode::{PauliSum, QubitLayout};
use crate::linalg::{expm_multiply, Spectral, DENSE_LIMIT};
use crate::oracle::{apply_sz_hamiltonian, apply_transposition, total_spin_squared, total_sz};
use crate::sga::{bond_operator, build_hamiltonian, SparseOperator, TruncationMode};
use crate::{Error, Result, C64};

/// Largest chain for exact propagation in the product basis.
pub const MAX_SZ_EXACT_SITES: usize = 14;

const PARALLEL_QUBITS: usize = 14;

/// Amplitudes over `2^n` computational-basis states, qubit 0 most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1 << n_qubits {
            return Err(Error::Unsupported(format!(
                "{} amplitudes for {} qubits",
                amps.len(),
                n_qubits
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amps)
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        crate::linalg::dot(&self.amps, &other.amps)
    }

    /// Calls `f(lo_index, lo, hi)` on every amplitude pair differing in qubit `q`.
    fn for_each_pair<F>(&mut self, q: usize, f: F)
    where
        F: Fn(usize, &mut C64, &mut C64) + Sync,
    {
        let stride = 1usize << (self.n_qubits - 1 - q);
        let block = 2 * stride;
        let chunk_body = |base: usize, chunk: &mut [C64]| {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                f(base + k, a, b);
            }
        };
        if self.n_qubits < PARALLEL_QUBITS {
            for (c, chunk) in self.amps.chunks_mut(block).enumerate() {
                chunk_body(c * block, chunk);
            }
        } else if self.amps.len() / block >= 64 {
            self.amps
                .par_chunks_mut(block)
                .enumerate()
                .for_each(|(c, chunk)| chunk_body(c * block, chunk));
        } else {
            for (c, chunk) in self.amps.chunks_mut(block).enumerate() {
                let (lo, hi) = chunk.split_at_mut(stride);
                lo.par_iter_mut()
                    .zip(hi.par_iter_mut())
                    .enumerate()
                    .for_each(|(k, (a, b))| f(c * block + k, a, b));
            }
        }
    }

    pub fn apply_gate(&mut self, g: &Gate) {
        match g.kind {
            GateKind::PHASE => {
                let p = C64::from_polar(1.0, g.angle.unwrap());
                self.amps.iter_mut().for_each(|a| *a *= p);
            }
            GateKind::X => self.for_each_pair(g.target, |_, a, b| std::mem::swap(a, b)),
            GateKind::CX => {
                let n = self.n_qubits;
                let cbit = 1usize << (n - 1 - g.control.unwrap());
                self.for_each_pair(g.target, move |idx, a, b| {
                    if idx & cbit != 0 {
                        std::mem::swap(a, b)
                    }
                })
            }
            GateKind::RZ => {
                let t = g.angle.unwrap();
                let (p0, p1) = (C64::from_polar(1.0, -t / 2.0), C64::from_polar(1.0, t / 2.0));
                self.for_each_pair(g.target, move |_, a, b| {
                    *a *= p0;
                    *b *= p1;
                })
            }
            GateKind::RY => {
                let (s, c) = (g.angle.unwrap() / 2.0).sin_cos();
                self.for_each_pair(g.target, move |_, a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                })
            }
            GateKind::RX => {
                let (s, c) = (g.angle.unwrap() / 2.0).sin_cos();
                let mis = C64::new(0.0, -s);
                self.for_each_pair(g.target, move |_, a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c + y * mis;
                    *b = x * mis + y * c;
                })
            }
        }
    }

    pub fn apply_circuit(&mut self, c: &Circuit) {
        assert_eq!(c.n_qubits, self.n_qubits, "circuit and state registers differ");
        for g in &c.gates {
            self.apply_gate(g);
        }
    }
}

/// Applies a circuit to a copy of the initial state.
pub fn simulate(circuit: &Circuit, initial: &StateVector) -> StateVector {
    let mut s = initial.clone();
    s.apply_circuit(circuit);
    s
}

/// `|<a|b>|`, clamped to `[0, 1]` against rounding.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    crate::linalg::dot(a, b).norm().min(1.0)
}

/// Dense unitary of a circuit on at most 12 qubits.
pub fn circuit_unitary(c: &Circuit) -> Result<DMatrix<C64>> {
    if c.n_qubits > 12 {
        return Err(Error::ResourceLimit(format!("dense unitary of {} qubits", c.n_qubits)));
    }
    let dim = 1usize << c.n_qubits;
    let mut u = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let s = simulate(c, &StateVector::basis_state(c.n_qubits, col));
        for (r, a) in s.amps.iter().enumerate() {
            u[(r, col)] = *a;
        }
    }
    Ok(u)
}

/// `exp(-i t H) v` for an operator over a spin-path basis.
pub fn exact_evolve_csf(h: &SparseOperator, v: &[C64], t: f64) -> Vec<C64> {
    if h.dim() <= DENSE_LIMIT {
        Spectral::new(&h.to_dense())
            .expect("dimension below the dense limit")
            .propagate(v, t)
    } else {
        expm_multiply(|x, y| h.matrix().mul_vec(x, y), h.matrix().gershgorin_bound(), v, t)
    }
}

/// `exp(-i t H) v` for a Pauli sum.
pub fn exact_evolve_pauli(h: &PauliSum, v: &[C64], t: f64) -> Vec<C64> {
    let bound: f64 = h.terms().iter().map(|p| p.coefficient.norm()).sum();
    expm_multiply(|x, y| y.copy_from_slice(&h.apply(x)), bound, v, t)
}

/// `exp(-i t H) v` for the chain Hamiltonian in the product basis.
pub fn exact_evolve_sz(n_sites: usize, coupling: f64, v: &[C64], t: f64) -> Result<Vec<C64>> {
    if n_sites > MAX_SZ_EXACT_SITES {
        return Err(Error::ResourceLimit(format!(
            "exact product-basis propagation of {} sites exceeds {}",
            n_sites, MAX_SZ_EXACT_SITES
        )));
    }
    let bound = coupling.abs() * 0.75 * (n_sites as f64 - 1.0) * 2.0;
    Ok(expm_multiply(
        |x, y| y.copy_from_slice(&apply_sz_hamiltonian(n_sites, coupling, x)),
        bound,
        v,
        t,
    ))
}

/// Product-basis reference state: nearest-neighbour singlets, with the last
/// pair in the `M = 1` triplet for the triplet sector.
pub fn sz_reference_state(n_sites: usize, total_spin_x2: u32) -> Result<StateVector> {
    if n_sites % 2 != 0 || total_spin_x2 > 2 || total_spin_x2 % 2 != 0 {
        return Err(Error::InvalidQuantumNumbers(format!(
            "reference states need even N and S in {{0, 1}}, got N = {}, 2S = {}",
            n_sites, total_spin_x2
        )));
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![C64::new(1.0, 0.0)];
    for pair in 0..n_sites / 2 {
        let factor: [f64; 4] = if total_spin_x2 == 2 && pair == n_sites / 2 - 1 {
            [1.0, 0.0, 0.0, 0.0]
        } else {
            [0.0, r, -r, 0.0]
        };
        let mut next = vec![C64::new(0.0, 0.0); amps.len() * 4];
        for (i, a) in amps.iter().enumerate() {
            for (k, f) in factor.iter().enumerate() {
                next[i * 4 + k] = a * f;
            }
        }
        amps = next;
    }
    StateVector::from_amplitudes(n_sites, amps)
}

/// Energies and symmetry expectations at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub total_energy: f64,
    pub bond_energies: Vec<f64>,
    pub spin_squared: Option<f64>,
    pub sz: Option<f64>,
}

/// Bond energies `J <s_i · s_{i+1}>` in the product basis.
pub fn sz_observables(state: &StateVector, coupling: f64, with_symmetries: bool) -> Observables {
    let n = state.n_qubits;
    let x = state.amplitudes();
    let bond_energies: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| {
            let swapped = apply_transposition(n, i, i + 1, x);
            coupling * (0.5 * crate::linalg::dot(x, &swapped).re - 0.25)
        })
        .collect();
    Observables {
        total_energy: bond_energies.iter().sum(),
        bond_energies,
        spin_squared: with_symmetries.then(|| total_spin_squared(n, x)),
        sz: with_symmetries.then(|| total_sz(n, x)),
    }
}

/// Maps qubit states of an encoding back to spin-path coefficients.
#[derive(Debug, Clone)]
pub struct CsfContext {
    basis: CsfBasis,
    layout: QubitLayout,
    path_bits: Vec<usize>,
    bond_ops: Vec<SparseOperator>,
    coupling: f64,
}

impl CsfContext {
    pub fn new(basis: CsfBasis, layout: QubitLayout, coupling: f64) -> Result<Self> {
        let path_bits = basis
            .paths()
            .iter()
            .map(|p| {
                layout
                    .encode(p)
                    .map(|b| b as usize)
                    .ok_or_else(|| Error::UnphysicalPath(format!("{} has no encoding", p)))
            })
            .collect::<Result<Vec<_>>>()?;
        let bond_ops = (1..basis.n_sites())
            .map(|i| bond_operator(&basis, i, TruncationMode::Band))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basis,
            layout,
            path_bits,
            bond_ops,
            coupling,
        })
    }

    pub fn basis(&self) -> &CsfBasis {
        &self.basis
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    /// Index of every basis path in the qubit register.
    pub fn path_bits(&self) -> &[usize] {
        &self.path_bits
    }

    pub fn to_csf(&self, state: &StateVector) -> Vec<C64> {
        self.path_bits.iter().map(|&b| state.amps[b]).collect()
    }

    pub fn from_csf(&self, v: &[C64]) -> StateVector {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << self.layout.n_qubits()];
        for (&b, a) in self.path_bits.iter().zip(v) {
            amps[b] = *a;
        }
        StateVector {
            n_qubits: self.layout.n_qubits(),
            amps,
        }
    }

    /// Probability outside the encoded basis.
    pub fn leakage(&self, state: &StateVector) -> f64 {
        let inside: f64 = self.path_bits.iter().map(|&b| state.amps[b].norm_sqr()).sum();
        (state.norm().powi(2) - inside).max(0.0)
    }

    /// Bond energies `(J/2)(<Γ[π_{i,i+1}]> - 1/2)` with band-truncated permutations.
    pub fn observables_csf(&self, v: &[C64]) -> Observables {
        let bond_energies: Vec<f64> = self
            .bond_ops
            .iter()
            .map(|op| 0.5 * self.coupling * (op.expectation(v) - 0.5))
            .collect();
        Observables {
            total_energy: bond_energies.iter().sum(),
            bond_energies,
            spin_squared: None,
            sz: None,
        }
    }

    pub fn observables(&self, state: &StateVector) -> Observables {
        self.observables_csf(&self.to_csf(state))
    }
}

/// Observables recorded at every layer boundary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub total_energy: Vec<f64>,
    pub bond_energies: Vec<Vec<f64>>,
    pub avg_abs_bond_error: Vec<Option<f64>>,
    pub fidelity: Vec<Option<f64>>,
    pub spin_squared: Vec<Option<f64>>,
    pub sz: Vec<Option<f64>>,
    pub leakage: Vec<f64>,
}

impl EvolutionRecord {
    fn push(&mut self, t: f64, obs: Observables, fidelity: Option<f64>, leakage: f64) {
        self.times.push(t);
        self.total_energy.push(obs.total_energy);
        self.bond_energies.push(obs.bond_energies);
        self.avg_abs_bond_error.push(None);
        self.fidelity.push(fidelity);
        self.spin_squared.push(obs.spin_squared);
        self.sz.push(obs.sz);
        self.leakage.push(leakage);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Fills the mean absolute bond-energy deviation from a reference run
    /// recorded at the same times.
    pub fn compare_bonds(&mut self, reference: &EvolutionRecord) -> Result<()> {
        if reference.times.len() != self.times.len()
            || reference.times.iter().zip(&self.times).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::Unsupported("records sampled at different times".into()));
        }
        for (k, out) in self.avg_abs_bond_error.iter_mut().enumerate() {
            let (a, b) = (&self.bond_energies[k], &reference.bond_energies[k]);
            let n = a.len().max(1) as f64;
            *out = Some(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n);
        }
        Ok(())
    }

    /// Mean of the bond-error column over all recorded times.
    pub fn time_averaged_bond_error(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.avg_abs_bond_error.iter().copied().collect();
        v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// CSV with `t,total_energy,avg_abs_bond_error,fidelity,bond_<i>...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n_bonds = self.bond_energies.first().map_or(0, |b| b.len());
        let mut header = String::from("t,total_energy,avg_abs_bond_error,fidelity");
        for i in 1..=n_bonds {
            header += &format!(",bond_{}", i);
        }
        writeln!(out, "{}", header)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{:.16e}", x));
        for k in 0..self.times.len() {
            let mut line = format!(
                "{:.16e},{:.16e},{},{}",
                self.times[k],
                self.total_energy[k],
                opt(self.avg_abs_bond_error[k]),
                opt(self.fidelity[k])
            );
            for b in &self.bond_energies[k] {
                line += &format!(",{:.16e}", b);
            }
            writeln!(out, "{}", line)?;
        }
        Ok(())
    }
}

/// Which simulator a Trotter run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// One qubit per spin.
    Sz { total_spin_x2: u32 },
    /// Encoded truncated spin-adapted basis.
    Csf { total_spin_x2: u32, trunc_x2: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterConfig {
    pub n_sites: usize,
    pub representation: Representation,
    pub duration: f64,
    pub n_layers: usize,
    pub order: u8,
    pub coupling: f64,
    /// Record `<S²>` and `<S_z>` in product-basis runs.
    pub track_symmetries: bool,
}

/// Trotterized evolution of the reference state, recording observables at
/// every layer boundary. Fidelities are against exact propagation where the
/// size guards allow it.
pub fn trotter_evolve(cfg: &TrotterConfig) -> Result<EvolutionRecord> {
    let n = cfg.n_sites;
    let n_layers = cfg.n_layers.max(1);
    let dt = cfg.duration / n_layers as f64;
    let steps = if cfg.duration == 0.0 { 0 } else { cfg.n_layers };
    let mut rec = EvolutionRecord::default();
    match cfg.representation {
        Representation::Sz { total_spin_x2 } => {
            let initial = sz_reference_state(n, total_spin_x2)?;
            let step = sz_trotter_step(n, dt, cfg.order, cfg.coupling)?;
            let exact_ok = n <= MAX_SZ_EXACT_SITES;
            let mut state = initial.clone();
            let mut exact = initial.amps.clone();
            for k in 0..=steps {
                if k > 0 {
                    state.apply_circuit(&step);
                    if exact_ok {
                        exact = exact_evolve_sz(n, cfg.coupling, &exact, dt)?;
                    }
                }
                let obs = sz_observables(&state, cfg.coupling, cfg.track_symmetries);
                let f = exact_ok.then(|| fidelity(&exact, &state.amps));
                rec.push(k as f64 * dt, obs, f, 0.0);
            }
        }
        Representation::Csf {
            total_spin_x2,
            trunc_x2,
        } => {
            let compiler = CsfCompiler::new(n, total_spin_x2, trunc_x2, cfg.coupling)?;
            let enc = compiler.encoding();
            let ctx = CsfContext::new(enc.basis().clone(), enc.layout().clone(), cfg.coupling)?;
            let h = build_hamiltonian(ctx.basis(), TruncationMode::Band, cfg.coupling);
            let start = reference_path_index(ctx.basis())?;
            let mut state = StateVector::basis_state(ctx.layout().n_qubits(), ctx.path_bits()[start]);
            let step = compiler.step(dt, &|_| 1.0, cfg.order)?;
            let mut exact = ctx.to_csf(&state);
            for k in 0..=steps {
                if k > 0 {
                    state.apply_circuit(&step);
                    exact = exact_evolve_csf(&h, &exact, dt);
                }
                let v = ctx.to_csf(&state);
                let obs = ctx.observables_csf(&v);
                rec.push(k as f64 * dt, obs, Some(fidelity(&exact, &v)), ctx.leakage(&state));
            }
        }
    }
    Ok(rec)
}

/// Position of the singlet-pair (or triplet reference) path in a basis.
pub fn reference_path_index(basis: &CsfBasis) -> Result<usize> {
    let path = match basis.total_spin_x2() {
        0 => singlet_pair_path(basis.n_sites())?,
        2 => triplet_reference_path(basis.n_sites())?,
        s => {
            return Err(Error::Unsupported(format!(
                "no reference state for 2S = {}",
                s
            )))
        }
    };
    basis
        .index_of(&path)
        .ok_or_else(|| Error::Unsupported("reference path outside the truncated basis".into()))
}
