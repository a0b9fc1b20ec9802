//! Permutation representations and Heisenberg Hamiltonians on spin paths.
//!
//! The transposition of neighbouring sites `(i, i+1)` (1-based) only touches
//! the height triple `(h[i-1], h[i], h[i+1])`. Monotone triples pass through
//! unchanged; a peak `(s, s+1/2, s)` maps to `-a_s peak + b_s valley` and a
//! valley `(s, s-1/2, s)` to `a_s valley + b_s peak`, with `a_s = 1/(2s+1)`.
//!
//! Every rule term carries a band label, twice the mean of the two outer
//! heights. Peaks and valleys are labelled by their common outer height;
//! monotone triples by their middle height. Grouping the chain Hamiltonian by
//! this label gives the band Hamiltonians `H_s`.

use std::io::Write;

use rayon::prelude::*;

use crate::basis::{CsfBasis, SpinPath};
use crate::linalg::CsrMatrix;
use crate::{Error, Result, C64};

/// Mixing coefficients of band `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandCoefficients {
    pub s_x2: u32,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

pub fn band_coefficients(s_x2: u32) -> BandCoefficients {
    let a = 1.0 / (s_x2 as f64 + 1.0);
    let b = (1.0 - a * a).sqrt();
    BandCoefficients {
        s_x2,
        a,
        b,
        theta: a.acos(),
    }
}

/// How a truncated basis treats rule terms leading outside of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TruncationMode {
    /// Keep only bands strictly below the truncation height.
    Band,
    /// Exact compression of the full operator onto the truncated basis.
    Height,
}

/// Action of one elementary transposition on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Rule {
    Pass {
        band_x2: u32,
    },
    Mix {
        band_x2: u32,
        diag: f64,
        off: f64,
        partner: Option<u16>,
    },
}

impl Rule {
    pub(crate) fn band_x2(&self) -> u32 {
        match *self {
            Rule::Pass { band_x2 } | Rule::Mix { band_x2, .. } => band_x2,
        }
    }
}

fn check_bond(n_sites: usize, i: usize) -> Result<()> {
    if i == 0 || i >= n_sites {
        return Err(Error::IndexOutOfRange(format!(
            "transposition ({}, {}) on a chain of {} sites",
            i,
            i + 1,
            n_sites
        )));
    }
    Ok(())
}

pub(crate) fn rule(heights: &[u16], i: usize) -> Rule {
    let (l, c, r) = (heights[i - 1], heights[i], heights[i + 1]);
    if l != r {
        return Rule::Pass { band_x2: c as u32 };
    }
    let co = band_coefficients(l as u32);
    if c > l {
        Rule::Mix {
            band_x2: l as u32,
            diag: -co.a,
            off: co.b,
            partner: l.checked_sub(1),
        }
    } else {
        Rule::Mix {
            band_x2: l as u32,
            diag: co.a,
            off: co.b,
            partner: Some(l + 1),
        }
    }
}

/// Image of a path under `π_{i,i+1}` (1-based `i`) as a linear combination of
/// paths, optionally keeping only the terms of one band.
pub fn apply_elementary_permutation(
    path: &SpinPath,
    i: usize,
    band_filter: Option<u32>,
) -> Result<Vec<(SpinPath, f64)>> {
    check_bond(path.n_sites(), i)?;
    let r = rule(path.heights(), i);
    if band_filter.is_some_and(|b| b != r.band_x2()) {
        return Ok(Vec::new());
    }
    Ok(match r {
        Rule::Pass { .. } => vec![(path.clone(), 1.0)],
        Rule::Mix {
            diag, off, partner, ..
        } => {
            let mut out = vec![(path.clone(), diag)];
            if let Some(p) = partner {
                if off != 0.0 {
                    out.push((path.with_height(i, p), off));
                }
            }
            out
        }
    })
}

/// Step-variable form of the same rules. The projector on the intermediate
/// spin to the right of the pair is evaluated as an explicit cumulative sum,
/// and the band label of a term is that right-hand spin.
pub fn step_permutation_apply(
    steps: &[i8],
    i: usize,
    band_filter: Option<u32>,
) -> Result<Vec<(Vec<i8>, f64)>> {
    check_bond(steps.len(), i)?;
    let right: i32 = steps[..=i].iter().map(|&d| d as i32).sum();
    if right < 0 {
        return Err(Error::UnphysicalPath("negative cumulative spin".into()));
    }
    let label = right as u32;
    if band_filter.is_some_and(|b| b != label) {
        return Ok(Vec::new());
    }
    let (d1, d2) = (steps[i - 1], steps[i]);
    if d1 == d2 {
        return Ok(vec![(steps.to_vec(), 1.0)]);
    }
    let co = band_coefficients(label);
    let mut swapped = steps.to_vec();
    swapped.swap(i - 1, i);
    // (u, d) is a peak, (d, u) a valley
    let diag = if d1 > 0 { -co.a } else { co.a };
    let mut out = vec![(steps.to_vec(), diag)];
    if co.b != 0.0 {
        out.push((swapped, co.b));
    }
    Ok(out)
}

/// Real symmetric operator over a spin-path basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    matrix: CsrMatrix,
}

impl SparseOperator {
    pub fn from_matrix(matrix: CsrMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.matrix.get(r, c)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.matrix.mul_vec(x, &mut y);
        y
    }

    pub fn expectation(&self, x: &[C64]) -> f64 {
        crate::linalg::dot(x, &self.apply(x)).re
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        self.matrix.to_dense()
    }

    pub fn scaled_sum(&self, a: f64, other: &SparseOperator, b: f64) -> SparseOperator {
        Self::from_matrix(self.matrix.linear_combination(a, &other.matrix, b))
    }

    pub fn ground_state(&self) -> Result<(f64, Vec<f64>)> {
        crate::linalg::lanczos_ground_state(self.dim(), |x, y| self.matrix.mul_vec_real(x, y), 1e-10)
    }

    /// Two lowest eigenvalues; the second is found by shifting the ground
    /// state out of the way. `None` for one-dimensional operators.
    pub fn lowest_two(&self) -> Result<(f64, Option<f64>)> {
        let (e0, g) = self.ground_state()?;
        if self.dim() < 2 {
            return Ok((e0, None));
        }
        let shift = 2.0 * self.matrix.gershgorin_bound() + 1.0;
        let (e1, _) = crate::linalg::lanczos_ground_state(
            self.dim(),
            |x, y| {
                self.matrix.mul_vec_real(x, y);
                let overlap: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
                y.iter_mut().zip(&g).for_each(|(o, gi)| *o += shift * overlap * gi);
            },
            1e-10,
        )?;
        Ok((e0, Some(e1)))
    }

    /// Coordinate text: `dim <n>` then `row col value` per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "dim {}", self.dim())?;
        for (r, c, v) in self.matrix.entries() {
            writeln!(out, "{} {} {:.16e}", r, c, v)?;
        }
        Ok(())
    }
}

/// Builds an operator column by column from a per-path generator of
/// `(path, coefficient)` images. Images outside the basis are dropped.
fn build_operator<F>(basis: &CsfBasis, image: F) -> SparseOperator
where
    F: Fn(&SpinPath, &mut Vec<u16>, &mut Vec<(usize, f64)>) + Sync,
{
    let columns: Vec<Vec<(usize, f64)>> = basis
        .paths()
        .par_iter()
        .map(|p| {
            let mut scratch = Vec::with_capacity(p.heights().len());
            let mut col = Vec::new();
            image(p, &mut scratch, &mut col);
            col
        })
        .collect();
    // columns become rows of the transpose; the operators built here are
    // symmetric so this is the matrix itself
    SparseOperator::from_matrix(CsrMatrix::from_rows(basis.len(), columns))
}

fn push_rule_images(
    basis: &CsfBasis,
    p: &SpinPath,
    k: usize,
    i: usize,
    weight: f64,
    keep: impl Fn(u32) -> bool,
    scratch: &mut Vec<u16>,
    col: &mut Vec<(usize, f64)>,
) {
    let r = rule(p.heights(), i);
    if !keep(r.band_x2()) {
        return;
    }
    match r {
        Rule::Pass { .. } => col.push((k, weight)),
        Rule::Mix {
            diag, off, partner, ..
        } => {
            col.push((k, weight * diag));
            if let Some(h) = partner {
                scratch.clear();
                scratch.extend_from_slice(p.heights());
                scratch[i] = h;
                if let Some(idx) = basis.index_of_heights(scratch) {
                    col.push((idx, weight * off));
                }
            }
        }
    }
}

/// `Γ[π_{i,i+1}]` on the basis, images outside it dropped.
pub fn elementary_matrix(basis: &CsfBasis, i: usize, band_filter: Option<u32>) -> Result<SparseOperator> {
    check_bond(basis.n_sites(), i)?;
    Ok(build_operator(basis, |p, scratch, col| {
        let k = basis.index_of(p).unwrap();
        push_rule_images(basis, p, k, i, 1.0, |b| band_filter.is_none_or(|f| f == b), scratch, col)
    }))
}

/// `Γ[π_{i,i+1}]` restricted to the bands kept by `mode`.
pub fn bond_operator(basis: &CsfBasis, i: usize, mode: TruncationMode) -> Result<SparseOperator> {
    check_bond(basis.n_sites(), i)?;
    let keep = band_predicate(basis, mode);
    Ok(build_operator(basis, |p, scratch, col| {
        let k = basis.index_of(p).unwrap();
        push_rule_images(basis, p, k, i, 1.0, &keep, scratch, col)
    }))
}

/// Applies `Γ[π_{i,i+1}]` to a coefficient vector.
pub fn apply_elementary_vec(basis: &CsfBasis, i: usize, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    let mut scratch = Vec::new();
    let mut col = Vec::new();
    for (k, p) in basis.paths().iter().enumerate() {
        if x[k] == C64::new(0.0, 0.0) {
            continue;
        }
        col.clear();
        push_rule_images(basis, p, k, i, 1.0, |_| true, &mut scratch, &mut col);
        for &(r, v) in &col {
            y[r] += x[k] * v;
        }
    }
    y
}

/// `Γ[π_{i,j}]` (1-based, `i < j`) by conjugating `π_{i,j-1}` with
/// `π_{j-1,j}`, applied to basis vectors one at a time.
pub fn permutation_matrix(basis: &CsfBasis, i: usize, j: usize) -> Result<SparseOperator> {
    let n = basis.n_sites();
    if i == 0 || i >= j || j > n {
        return Err(Error::IndexOutOfRange(format!(
            "transposition ({}, {}) on a chain of {} sites",
            i, j, n
        )));
    }
    // π_{i,j} = π_{j-1,j} ... π_{i+1,i+2} π_{i,i+1} π_{i+1,i+2} ... π_{j-1,j}
    let mut sequence: Vec<usize> = (i + 1..j).rev().collect();
    sequence.push(i);
    sequence.extend(i + 1..j);
    let dim = basis.len();
    let columns: Vec<Vec<(usize, f64)>> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[k] = C64::new(1.0, 0.0);
            for &b in sequence.iter().rev() {
                v = apply_elementary_vec(basis, b, &v);
            }
            v.iter()
                .enumerate()
                .filter(|(_, x)| x.re != 0.0)
                .map(|(r, x)| (r, x.re))
                .collect()
        })
        .collect();
    // columns of a symmetric operator on the untruncated basis; on truncated
    // bases the product of compressions need not be symmetric, so transpose
    let mut triplets = Vec::new();
    for (c, col) in columns.into_iter().enumerate() {
        for (r, v) in col {
            triplets.push((r, c, v));
        }
    }
    Ok(SparseOperator::from_matrix(CsrMatrix::from_triplets(dim, triplets)))
}

/// `Γ[H_s] = Σ_i Γ[(π_{i,i+1})_s]`.
pub fn band_hamiltonian(basis: &CsfBasis, s_x2: u32) -> SparseOperator {
    let n = basis.n_sites();
    build_operator(basis, |p, scratch, col| {
        let k = basis.index_of(p).unwrap();
        for i in 1..n {
            push_rule_images(basis, p, k, i, 1.0, |b| b == s_x2, scratch, col);
        }
    })
}

/// Band labels with at least one rule term on the basis, ascending.
pub fn bands_present(basis: &CsfBasis) -> Vec<u32> {
    let mut bands = std::collections::BTreeSet::new();
    for p in basis.paths() {
        for i in 1..basis.n_sites() {
            bands.insert(rule(p.heights(), i).band_x2());
        }
    }
    bands.into_iter().collect()
}

/// Bands whose terms stay inside the basis under `mode`.
pub fn included_bands(basis: &CsfBasis, mode: TruncationMode) -> Vec<u32> {
    let keep = band_predicate(basis, mode);
    bands_present(basis).into_iter().filter(|&b| keep(b)).collect()
}

fn band_predicate(basis: &CsfBasis, mode: TruncationMode) -> impl Fn(u32) -> bool + Sync + use<> {
    let trunc = basis.trunc_x2();
    let complete = basis.is_complete();
    move |b: u32| match mode {
        TruncationMode::Height => true,
        TruncationMode::Band => complete || b < trunc,
    }
}

/// `(J/2) (Σ_s λ_s Γ[H_s] - (N-1)/2)` with per-band weights.
pub fn weighted_hamiltonian(
    basis: &CsfBasis,
    mode: TruncationMode,
    coupling: f64,
    weight: impl Fn(u32) -> f64 + Sync,
) -> SparseOperator {
    let n = basis.n_sites();
    let keep = band_predicate(basis, mode);
    let shift = -0.5 * coupling * (n as f64 - 1.0) / 2.0;
    build_operator(basis, |p, scratch, col| {
        let k = basis.index_of(p).unwrap();
        col.push((k, shift));
        for i in 1..n {
            let b = rule(p.heights(), i).band_x2();
            if keep(b) {
                let w = 0.5 * coupling * weight(b);
                push_rule_images(basis, p, k, i, w, |_| true, scratch, col);
            }
        }
    })
}

/// Heisenberg chain Hamiltonian on the (possibly truncated) basis.
pub fn build_hamiltonian(basis: &CsfBasis, mode: TruncationMode, coupling: f64) -> SparseOperator {
    weighted_hamiltonian(basis, mode, coupling, |_| 1.0)
}

/// Matrix-free action of [`build_hamiltonian`].
pub fn apply_hamiltonian(basis: &CsfBasis, mode: TruncationMode, coupling: f64, x: &[f64]) -> Vec<f64> {
    let n = basis.n_sites();
    let keep = band_predicate(basis, mode);
    let shift = -0.5 * coupling * (n as f64 - 1.0) / 2.0;
    let mut y: Vec<f64> = x.iter().map(|v| v * shift).collect();
    let mut scratch = Vec::new();
    let mut col = Vec::new();
    for (k, p) in basis.paths().iter().enumerate() {
        if x[k] == 0.0 {
            continue;
        }
        col.clear();
        for i in 1..n {
            push_rule_images(basis, p, k, i, 0.5 * coupling, &keep, &mut scratch, &mut col);
        }
        for &(r, v) in &col {
            y[r] += v * x[k];
        }
    }
    y
}

/// Lowest eigenvalue of the chain Hamiltonian, matrix-free Lanczos.
pub fn ground_energy(basis: &CsfBasis, mode: TruncationMode, coupling: f64) -> Result<(f64, Vec<f64>)> {
    crate::linalg::lanczos_ground_state(
        basis.len(),
        |x, y| y.copy_from_slice(&apply_hamiltonian(basis, mode, coupling, x)),
        1e-10,
    )
}
