//! Adiabatic ground-state preparation with band-weighted Trotter schedules.
//!
//! The schedule starts from the band-0 Hamiltonian, whose ground state in the
//! singlet sector is the singlet-pair product, and ramps every higher band up
//! to full weight.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::basis::CsfBasis;
use crate::circuits::CsfCompiler;
use crate::linalg::expm_multiply;
use crate::sga::{band_hamiltonian, ground_energy, weighted_hamiltonian, SparseOperator, TruncationMode};
use crate::sim::{fidelity, reference_path_index, CsfContext, StateVector};
use crate::{Error, Result, C64};

/// First refinement of the exact reference, in sub-steps per layer.
pub const REFERENCE_SUBSTEPS: usize = 16;
/// Refinement stops once fidelities move less than this.
pub const REFERENCE_TOL: f64 = 1e-8;
const MAX_REFERENCE_SUBSTEPS: usize = 1024;

/// Interpolation `λ(t)` with `λ(0) = 0` and `λ(T) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Ramp {
    /// `t / T`.
    #[default]
    Linear,
    /// `(t / T)^p` for `p > 0`.
    Power(f64),
}

impl Ramp {
    pub fn value(self, t: f64, duration: f64) -> f64 {
        if duration <= 0.0 {
            return if t > 0.0 { 1.0 } else { 0.0 };
        }
        let u = (t / duration).clamp(0.0, 1.0);
        match self {
            Ramp::Linear => u,
            Ramp::Power(p) => u.powf(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub n_sites: usize,
    pub total_spin_x2: u32,
    pub trunc_x2: u32,
    pub duration: f64,
    pub n_layers: usize,
    pub order: u8,
    pub coupling: f64,
    /// Ramp shared by every band above 0.
    pub ramp: Ramp,
    /// Per-band overrides, keyed by doubled band label.
    pub band_ramps: BTreeMap<u32, Ramp>,
}

impl Schedule {
    pub fn new(n_sites: usize, total_spin_x2: u32, trunc_x2: u32, duration: f64, n_layers: usize, order: u8) -> Self {
        Self {
            n_sites,
            total_spin_x2,
            trunc_x2,
            duration,
            n_layers,
            order,
            coupling: 1.0,
            ramp: Ramp::Linear,
            band_ramps: BTreeMap::new(),
        }
    }

    /// `λ_s(t)`; band 0 stays at weight 1.
    pub fn weight(&self, band_x2: u32, t: f64) -> f64 {
        if band_x2 == 0 {
            return 1.0;
        }
        self.band_ramps
            .get(&band_x2)
            .copied()
            .unwrap_or(self.ramp)
            .value(t, self.duration)
    }

    pub fn layer_dt(&self) -> f64 {
        if self.n_layers == 0 {
            0.0
        } else {
            self.duration / self.n_layers as f64
        }
    }
}

/// Per-layer record of a schedule run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Expectation of the instantaneous Hamiltonian `H(λ(t))`.
    pub energy: Vec<f64>,
    /// Expectation of the full-weight band-truncated Hamiltonian.
    pub target_energy: Vec<f64>,
    /// Overlap with the exact schedule state.
    pub fidelity: Vec<f64>,
    /// Overlap with the ground state of the target Hamiltonian.
    pub ground_overlap: Vec<f64>,
    /// Sub-steps per layer the exact reference settled at.
    pub reference_substeps: usize,
}

impl Trajectory {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity.last().unwrap()
    }

    pub fn final_energy(&self) -> f64 {
        *self.target_energy.last().unwrap()
    }

    /// CSV with `t,energy,target_energy,fidelity,ground_overlap`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,energy,target_energy,fidelity,ground_overlap")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k], self.energy[k], self.target_energy[k], self.fidelity[k], self.ground_overlap[k]
            )?;
        }
        Ok(())
    }
}

/// Reference energies of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    /// Ground energy of the band-0 Hamiltonian in the truncated basis.
    pub initial: f64,
    /// Ground energy of the full-weight band-truncated Hamiltonian.
    pub target: f64,
    /// Untruncated ground energy.
    pub exact_full: f64,
}

pub fn target_ground_truth(schedule: &Schedule) -> Result<GroundTruth> {
    let basis = CsfBasis::new(schedule.n_sites, schedule.total_spin_x2, schedule.trunc_x2)?;
    let j = schedule.coupling;
    let initial = weighted_hamiltonian(&basis, TruncationMode::Band, j, |b| if b == 0 { 1.0 } else { 0.0 })
        .ground_state()?
        .0;
    let target = ground_energy(&basis, TruncationMode::Band, j)?.0;
    let full = CsfBasis::untruncated(schedule.n_sites, schedule.total_spin_x2)?;
    let exact_full = ground_energy(&full, TruncationMode::Band, j)?.0;
    Ok(GroundTruth {
        initial,
        target,
        exact_full,
    })
}

/// Band-resolved pieces of `H(λ) = c + Σ_s λ_s H_s`.
struct BandParts {
    constant: f64,
    parts: Vec<(u32, SparseOperator)>,
}

impl BandParts {
    fn new(basis: &CsfBasis, bands: &[u32], coupling: f64) -> Self {
        let parts = bands
            .iter()
            .map(|&b| {
                let h = band_hamiltonian(basis, b);
                (b, h.scaled_sum(0.5 * coupling, &h, 0.0))
            })
            .collect();
        Self {
            constant: -0.5 * coupling * (basis.n_sites() as f64 - 1.0) / 2.0,
            parts,
        }
    }

    fn apply(&self, weights: &[f64], x: &[C64], y: &mut [C64]) {
        y.iter_mut().zip(x).for_each(|(o, v)| *o = v * self.constant);
        let mut tmp = vec![C64::new(0.0, 0.0); x.len()];
        for ((_, h), &w) in self.parts.iter().zip(weights) {
            if w != 0.0 {
                h.matrix().mul_vec(x, &mut tmp);
                y.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t * w);
            }
        }
    }

    fn bound(&self, weights: &[f64]) -> f64 {
        self.constant.abs()
            + self
                .parts
                .iter()
                .zip(weights)
                .map(|((_, h), w)| w.abs() * h.matrix().gershgorin_bound())
                .sum::<f64>()
    }

    fn weights(&self, schedule: &Schedule, t: f64) -> Vec<f64> {
        self.parts.iter().map(|(b, _)| schedule.weight(*b, t)).collect()
    }

    fn expectation(&self, weights: &[f64], x: &[C64]) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply(weights, x, &mut y);
        crate::linalg::dot(x, &y).re
    }
}

/// Exact schedule states at every layer boundary, with `substeps`
/// piecewise-constant sub-steps per layer sampled at their midpoints.
fn exact_schedule(schedule: &Schedule, parts: &BandParts, start: &[C64], substeps: usize) -> Vec<Vec<C64>> {
    let dt = schedule.layer_dt();
    let h = dt / substeps as f64;
    let mut cur = start.to_vec();
    let mut out = vec![cur.clone()];
    for k in 0..schedule.n_layers {
        for r in 0..substeps {
            let t = k as f64 * dt + (r as f64 + 0.5) * h;
            let w = parts.weights(schedule, t);
            cur = expm_multiply(|x, y| parts.apply(&w, x, y), parts.bound(&w), &cur, h);
        }
        out.push(cur.clone());
    }
    out
}

/// Runs the Trotterized schedule from the reference state and tracks it
/// against the exact schedule.
pub fn run_schedule(schedule: &Schedule) -> Result<Trajectory> {
    if schedule.order != 1 && schedule.order != 2 {
        return Err(Error::Unsupported(format!("Trotter order {}", schedule.order)));
    }
    let compiler = CsfCompiler::new(
        schedule.n_sites,
        schedule.total_spin_x2,
        schedule.trunc_x2,
        schedule.coupling,
    )?;
    let enc = compiler.encoding();
    let ctx = CsfContext::new(enc.basis().clone(), enc.layout().clone(), schedule.coupling)?;
    let basis = ctx.basis();
    let parts = BandParts::new(basis, enc.bands(), schedule.coupling);
    let full = vec![1.0; parts.parts.len()];
    let (_, ground) = ground_energy(basis, TruncationMode::Band, schedule.coupling)?;
    let ground: Vec<C64> = ground.iter().map(|&g| C64::new(g, 0.0)).collect();

    let start = reference_path_index(basis)?;
    let mut state = StateVector::basis_state(ctx.layout().n_qubits(), ctx.path_bits()[start]);
    let dt = schedule.layer_dt();
    let mut trotter = vec![ctx.to_csf(&state)];
    for k in 0..schedule.n_layers {
        let tm = (k as f64 + 0.5) * dt;
        let step = compiler.step(dt, &|b| schedule.weight(b, tm), schedule.order)?;
        state.apply_circuit(&step);
        trotter.push(ctx.to_csf(&state));
    }

    let fidelities = |reference: &[Vec<C64>]| -> Vec<f64> {
        trotter.iter().zip(reference).map(|(a, b)| fidelity(a, b)).collect()
    };
    let mut substeps = REFERENCE_SUBSTEPS;
    let mut current = fidelities(&exact_schedule(schedule, &parts, &trotter[0], substeps));
    if schedule.n_layers > 0 {
        loop {
            let next = fidelities(&exact_schedule(schedule, &parts, &trotter[0], 2 * substeps));
            let change = current.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            substeps *= 2;
            current = next;
            if change < REFERENCE_TOL || substeps >= MAX_REFERENCE_SUBSTEPS {
                break;
            }
        }
    }

    let mut traj = Trajectory {
        reference_substeps: substeps,
        fidelity: current,
        ..Default::default()
    };
    for (k, v) in trotter.iter().enumerate() {
        let t = k as f64 * dt;
        traj.times.push(t);
        traj.energy.push(parts.expectation(&parts.weights(schedule, t), v));
        traj.target_energy.push(parts.expectation(&full, v));
        traj.ground_overlap.push(fidelity(&ground, v));
    }
    Ok(traj)
}

/// One row of a schedule sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub trunc_x2: u32,
    pub duration: f64,
    pub n_layers: usize,
    pub order: u8,
    pub final_energy: f64,
    pub final_fidelity: f64,
}

/// Runs every combination of truncation, duration and layer count in
/// parallel; rows come back in input order.
pub fn sweep(
    n_sites: usize,
    total_spin_x2: u32,
    truncs: &[u32],
    durations: &[f64],
    layers: &[usize],
    order: u8,
) -> Result<Vec<SweepRow>> {
    let mut jobs = Vec::new();
    for &t in truncs {
        for &d in durations {
            for &l in layers {
                jobs.push(Schedule::new(n_sites, total_spin_x2, t, d, l, order));
            }
        }
    }
    jobs.par_iter()
        .map(|s| {
            let traj = run_schedule(s)?;
            Ok(SweepRow {
                trunc_x2: s.trunc_x2,
                duration: s.duration,
                n_layers: s.n_layers,
                order: s.order,
                final_energy: traj.final_energy(),
                final_fidelity: traj.final_fidelity(),
            })
        })
        .collect()
}

/// CSV with `trunc,T,n_layers,order,final_energy,final_fidelity`; the
/// truncation is written as a spin value.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "trunc,T,n_layers,order,final_energy,final_fidelity")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e}",
            r.trunc_x2 as f64 / 2.0,
            r.duration,
            r.n_layers,
            r.order,
            r.final_energy,
            r.final_fidelity
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(Ramp::Linear.value(0.0, 4.0), 0.0);
        assert_eq!(Ramp::Linear.value(4.0, 4.0), 1.0);
        assert_eq!(Ramp::Linear.value(2.0, 4.0), 0.5);
        let mut s = Schedule::new(8, 0, 2, 4.0, 4, 2);
        s.band_ramps.insert(1, Ramp::Power(2.0));
        assert_eq!(s.weight(0, 0.0), 1.0);
        assert_eq!(s.weight(1, 2.0), 0.25);
        assert_eq!(s.weight(2, 2.0), 0.5);
    }

    #[test]
    fn zero_layers_keep_initial_state() {
        let s = Schedule::new(8, 0, 2, 0.0, 0, 2);
        let traj = run_schedule(&s).unwrap();
        assert_eq!(traj.times.len(), 1);
        assert!((traj.fidelity[0] - 1.0).abs() < 1e-14);
        let truth = target_ground_truth(&s).unwrap();
        assert!((traj.energy[0] - truth.initial).abs() < 1e-12);
    }

    #[test]
    fn two_sites_all_coincide() {
        let s = Schedule::new(2, 0, 1, 1.0, 2, 1);
        let g = target_ground_truth(&s).unwrap();
        for e in [g.initial, g.target, g.exact_full] {
            assert!((e + 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_starts_exact_and_prepares_ground_state() {
        let s = Schedule::new(8, 0, 3, 10.0, 40, 2);
        let traj = run_schedule(&s).unwrap();
        let truth = target_ground_truth(&s).unwrap();
        assert!((traj.energy[0] - truth.initial).abs() < 1e-12);
        assert!((traj.fidelity[0] - 1.0).abs() < 1e-12);
        assert!(traj.final_fidelity() > 0.98);
        assert!(traj.ground_overlap.last().unwrap() > &0.9);
        assert!(traj.final_energy() < truth.initial.max(traj.target_energy[0]));
        assert!((traj.energy.last().unwrap() - traj.final_energy()).abs() < 1e-12);
    }

    #[test]
    fn exact_reference_converged() {
        // a second, much finer reference agrees with the refined one
        let s = Schedule::new(6, 0, 2, 3.0, 6, 1);
        let traj = run_schedule(&s).unwrap();
        let basis = CsfBasis::new(6, 0, 2).unwrap();
        let compiler = CsfCompiler::new(6, 0, 2, 1.0).unwrap();
        let parts = BandParts::new(&basis, compiler.encoding().bands(), 1.0);
        let mut start = vec![C64::new(0.0, 0.0); basis.len()];
        start[reference_path_index(&basis).unwrap()] = C64::new(1.0, 0.0);
        let fine = exact_schedule(&s, &parts, &start, 2048);
        let coarse = exact_schedule(&s, &parts, &start, traj.reference_substeps);
        let f = fidelity(fine.last().unwrap(), coarse.last().unwrap());
        assert!((f - 1.0).abs() < 1e-7);
    }

    #[test]
    fn sweep_csv_shape() {
        let rows = sweep(4, 0, &[1, 2], &[1.0], &[2, 4], 1).unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "trunc,T,n_layers,order,final_energy,final_fidelity");
        assert!(text.lines().nth(1).unwrap().starts_with("0.5,1,2,1,"));
    }
}
