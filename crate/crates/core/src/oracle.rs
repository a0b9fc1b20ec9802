//! Brute-force reference in the tensor-product s_z basis.
//!
//! Spin `i` is qubit `i`, qubit 0 being the most significant bit of the
//! amplitude index; `α` (spin up) is bit 0 and `β` is bit 1. Everything here
//! is exponential in `N` and exists only to check the spin-adapted machinery.

use nalgebra::DMatrix;

use crate::basis::SpinPath;
use crate::{Error, Result, C64};

/// Largest chain accepted by [`expand_csf`].
pub const MAX_EXPAND_SITES: usize = 14;

/// Largest chain for two-CSF matrix elements.
pub const MAX_ELEMENT_SITES: usize = 12;

/// Sign convention of the Clebsch–Gordan coefficients for down-coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CgConvention {
    /// Minus sign on the `|j, M-1/2> ⊗ |α>` branch (Condon–Shortley).
    #[default]
    AlphaNegative,
    /// Minus sign on the `|j, M+1/2> ⊗ |β>` branch.
    BetaNegative,
}

/// Amplitudes of an `N`-spin state over the `2^N` product states.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStateSz {
    n_sites: usize,
    amplitudes: Vec<C64>,
}

impl DenseStateSz {
    pub fn new(n_sites: usize, amplitudes: Vec<C64>) -> Self {
        assert_eq!(amplitudes.len(), 1 << n_sites);
        Self {
            n_sites,
            amplitudes,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amplitudes)
    }

    pub fn inner(&self, other: &DenseStateSz) -> C64 {
        crate::linalg::dot(&self.amplitudes, &other.amplitudes)
    }
}

/// Expansion of a spin path into product states at magnetization `M`.
pub fn expand_csf(path: &SpinPath, magnetization_x2: i32) -> Result<DenseStateSz> {
    expand_csf_with(path, magnetization_x2, CgConvention::default())
}

pub fn expand_csf_with(
    path: &SpinPath,
    magnetization_x2: i32,
    convention: CgConvention,
) -> Result<DenseStateSz> {
    let n = path.n_sites();
    if n > MAX_EXPAND_SITES {
        return Err(Error::ResourceLimit(format!(
            "expanding {} sites exceeds the oracle limit of {}",
            n, MAX_EXPAND_SITES
        )));
    }
    let s2 = path.total_spin_x2() as i32;
    if magnetization_x2.abs() > s2 || (magnetization_x2 - s2) % 2 != 0 {
        return Err(Error::InvalidQuantumNumbers(format!(
            "2M = {} incompatible with 2S = {}",
            magnetization_x2, s2
        )));
    }

    // states[m_index] holds |S̄_k, M> for 2M = -h, -h+2, ..., h
    let mut states: Vec<Vec<f64>> = vec![vec![1.0]];
    for k in 1..=n {
        let h_prev = path.height(k - 1) as i32;
        let h = path.height(k) as i32;
        let up = h > h_prev;
        let dim = 1usize << k;
        let denom = 2.0 * (h_prev as f64 + 1.0);
        let mut next = Vec::with_capacity(h as usize + 1);
        for mi in 0..=h {
            let m = -h + 2 * mi;
            let mut v = vec![0.0; dim];
            // |α> branch couples |h_prev, m - 1>, |β> branch |h_prev, m + 1>
            let c_plus = ((h_prev + m + 1) as f64 / denom).max(0.0).sqrt();
            let c_minus = ((h_prev - m + 1) as f64 / denom).max(0.0).sqrt();
            let (ca, cb) = if up {
                (c_plus, c_minus)
            } else {
                match convention {
                    CgConvention::AlphaNegative => (-c_minus, c_plus),
                    CgConvention::BetaNegative => (c_minus, -c_plus),
                }
            };
            for (branch, bit, coeff) in [(m - 1, 0usize, ca), (m + 1, 1usize, cb)] {
                if branch.abs() > h_prev || coeff == 0.0 {
                    continue;
                }
                let src = &states[((branch + h_prev) / 2) as usize];
                for (idx, amp) in src.iter().enumerate() {
                    v[idx * 2 + bit] += coeff * amp;
                }
            }
            next.push(v);
        }
        states = next;
    }
    let amps = states[((magnetization_x2 + s2) / 2) as usize]
        .iter()
        .map(|&x| C64::new(x, 0.0))
        .collect();
    Ok(DenseStateSz::new(n, amps))
}

/// Swaps the spins on two sites (0-based) of a product-basis vector.
pub fn apply_transposition(n_sites: usize, a: usize, b: usize, x: &[C64]) -> Vec<C64> {
    let ba = n_sites - 1 - a;
    let bb = n_sites - 1 - b;
    (0..x.len())
        .map(|idx| {
            let ia = idx >> ba & 1;
            let ib = idx >> bb & 1;
            if ia == ib {
                x[idx]
            } else {
                x[idx ^ (1 << ba) ^ (1 << bb)]
            }
        })
        .collect()
}

/// `J Σ_i s_i · s_{i+1}` applied without building a matrix.
pub fn apply_sz_hamiltonian(n_sites: usize, coupling: f64, x: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = x.iter().map(|v| v * (-0.25 * coupling * (n_sites as f64 - 1.0))).collect();
    for i in 0..n_sites.saturating_sub(1) {
        let swapped = apply_transposition(n_sites, i, i + 1, x);
        out.iter_mut()
            .zip(swapped)
            .for_each(|(o, s)| *o += s * (0.5 * coupling));
    }
    out
}

/// Dense `J Σ_i (XX + YY + ZZ)_{i,i+1} / 4`.
pub fn sz_hamiltonian_matrix(n_sites: usize, coupling: f64) -> Result<DMatrix<f64>> {
    if n_sites > MAX_ELEMENT_SITES {
        return Err(Error::ResourceLimit(format!(
            "dense s_z Hamiltonian for {} sites exceeds the limit of {}",
            n_sites, MAX_ELEMENT_SITES
        )));
    }
    let dim = 1usize << n_sites;
    let mut m = DMatrix::zeros(dim, dim);
    for idx in 0..dim {
        for i in 0..n_sites.saturating_sub(1) {
            let bi = n_sites - 1 - i;
            let bj = bi - 1;
            let same = (idx >> bi & 1) == (idx >> bj & 1);
            if same {
                m[(idx, idx)] += 0.25 * coupling;
            } else {
                m[(idx, idx)] -= 0.25 * coupling;
                let flipped = idx ^ (1 << bi) ^ (1 << bj);
                m[(flipped, idx)] += 0.5 * coupling;
            }
        }
    }
    Ok(m)
}

/// `<S²>` of a product-basis vector, via `S² = 3N/4 + Σ_{i<j} (π_ij - 1/2)`.
pub fn total_spin_squared(n_sites: usize, x: &[C64]) -> f64 {
    let norm2: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let mut acc = 0.75 * n_sites as f64 * norm2;
    for i in 0..n_sites {
        for j in i + 1..n_sites {
            let y = apply_transposition(n_sites, i, j, x);
            acc += crate::linalg::dot(x, &y).re - 0.5 * norm2;
        }
    }
    acc
}

/// `<S_z>` of a product-basis vector.
pub fn total_sz(n_sites: usize, x: &[C64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(idx, v)| {
            let down = idx.count_ones() as f64;
            (0.5 * n_sites as f64 - down) * v.norm_sqr()
        })
        .sum()
}

/// Operator accepted by [`oracle_matrix_element`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleOp {
    /// Transposition of two sites, 1-based labels.
    Transposition(usize, usize),
    /// Heisenberg chain Hamiltonian with the given coupling.
    Hamiltonian(f64),
}

/// `<bra| op |ket>` computed in the product basis.
pub fn oracle_matrix_element(op: OracleOp, bra: &SpinPath, ket: &SpinPath) -> Result<f64> {
    let n = ket.n_sites();
    if n > MAX_ELEMENT_SITES || bra.n_sites() != n {
        return Err(Error::ResourceLimit(format!(
            "oracle matrix elements need matching chains of at most {} sites",
            MAX_ELEMENT_SITES
        )));
    }
    if bra.total_spin_x2() != ket.total_spin_x2() {
        return Ok(0.0);
    }
    let m = ket.total_spin_x2() as i32;
    let b = expand_csf(bra, m)?;
    let k = expand_csf(ket, m)?;
    let applied = apply_oracle_op(op, n, k.amplitudes())?;
    Ok(crate::linalg::dot(b.amplitudes(), &applied).re)
}

fn apply_oracle_op(op: OracleOp, n: usize, x: &[C64]) -> Result<Vec<C64>> {
    match op {
        OracleOp::Transposition(i, j) => {
            if i == 0 || j == 0 || i > n || j > n || i == j {
                return Err(Error::IndexOutOfRange(format!(
                    "transposition ({}, {}) on {} sites",
                    i, j, n
                )));
            }
            Ok(apply_transposition(n, i - 1, j - 1, x))
        }
        OracleOp::Hamiltonian(coupling) => Ok(apply_sz_hamiltonian(n, coupling, x)),
    }
}

/// Dense matrix of `op` over a list of paths of equal length.
pub fn oracle_matrix(op: OracleOp, paths: &[SpinPath]) -> Result<DMatrix<f64>> {
    let dim = paths.len();
    let mut out = DMatrix::zeros(dim, dim);
    if dim == 0 {
        return Ok(out);
    }
    let n = paths[0].n_sites();
    if n > MAX_ELEMENT_SITES {
        return Err(Error::ResourceLimit(format!(
            "oracle matrices need at most {} sites",
            MAX_ELEMENT_SITES
        )));
    }
    let expanded = paths
        .iter()
        .map(|p| expand_csf(p, p.total_spin_x2() as i32))
        .collect::<Result<Vec<_>>>()?;
    for (c, ket) in expanded.iter().enumerate() {
        let applied = apply_oracle_op(op, n, ket.amplitudes())?;
        for (r, bra) in expanded.iter().enumerate() {
            if paths[r].total_spin_x2() == paths[c].total_spin_x2() {
                out[(r, c)] = crate::linalg::dot(bra.amplitudes(), &applied).re;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{singlet_pair_path, CsfBasis};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn two_site_singlet_and_triplet() {
        let s = expand_csf(&singlet_pair_path(2).unwrap(), 0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let a = s.amplitudes();
        assert!(close(a[0].re, 0.0, 1e-15) && close(a[3].re, 0.0, 1e-15));
        assert!(close(a[1].re.abs(), r, 1e-15));
        assert!(close(a[1].re, -a[2].re, 1e-15));

        let t = expand_csf(&SpinPath::new(vec![0, 1, 2]).unwrap(), 2).unwrap();
        assert!(close(t.amplitudes()[0].re, 1.0, 1e-15));
        assert!(close(t.norm(), 1.0, 1e-15));
    }

    #[test]
    fn transposition_elements_two_sites() {
        let sp = singlet_pair_path(2).unwrap();
        let trip = SpinPath::new(vec![0, 1, 2]).unwrap();
        let e = oracle_matrix_element(OracleOp::Transposition(1, 2), &sp, &sp).unwrap();
        assert!(close(e, -1.0, 1e-14));
        let e = oracle_matrix_element(OracleOp::Transposition(1, 2), &trip, &trip).unwrap();
        assert!(close(e, 1.0, 1e-14));
    }

    #[test]
    fn expansions_orthonormal() {
        let basis = CsfBasis::untruncated(8, 0).unwrap();
        let states: Vec<_> = basis
            .paths()
            .iter()
            .map(|p| expand_csf(p, 0).unwrap())
            .collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(close(a.inner(b).re, expect, 1e-12));
            }
        }
    }

    #[test]
    fn expansions_are_spin_eigenstates() {
        for s2 in [0u32, 2] {
            let basis = CsfBasis::untruncated(6, s2).unwrap();
            for p in basis.paths() {
                for m in (-(s2 as i32)..=s2 as i32).step_by(2) {
                    let st = expand_csf(p, m).unwrap();
                    let s = s2 as f64 / 2.0;
                    assert!(close(total_spin_squared(6, st.amplitudes()), s * (s + 1.0), 1e-10));
                    assert!(close(total_sz(6, st.amplitudes()), m as f64 / 2.0, 1e-10));
                }
            }
        }
    }

    #[test]
    fn conventions_differ_by_global_sign() {
        let p = SpinPath::new(vec![0, 1, 2, 1, 0]).unwrap();
        let a = expand_csf_with(&p, 0, CgConvention::AlphaNegative).unwrap();
        let b = expand_csf_with(&p, 0, CgConvention::BetaNegative).unwrap();
        assert!(close(a.inner(&b).re.abs(), 1.0, 1e-14));
    }

    #[test]
    fn two_site_spectrum() {
        let m = sz_hamiltonian_matrix(2, 1.0).unwrap();
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expect = [-0.75, 0.25, 0.25, 0.25];
        for (a, b) in ev.iter().zip(expect) {
            assert!(close(*a, b, 1e-14));
        }
    }

    #[test]
    fn four_site_ground_energy() {
        let m = sz_hamiltonian_matrix(4, 1.0).unwrap();
        let e0 = nalgebra::SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        // open four-site chain: -(3 + 2 sqrt 3) / 4
        assert!(close(e0, -(3.0 + 2.0 * 3f64.sqrt()) / 4.0, 1e-12));
    }

    #[test]
    fn matrix_free_matches_dense() {
        let n = 6;
        let m = sz_hamiltonian_matrix(n, 1.3).unwrap();
        let x: Vec<C64> = (0..1 << n).map(|i| C64::new((i as f64 * 0.37).cos(), (i as f64).sin())).collect();
        let y = apply_sz_hamiltonian(n, 1.3, &x);
        for r in 0..1 << n {
            let expect: C64 = (0..1 << n).map(|c| x[c] * m[(r, c)]).sum();
            assert!((expect - y[r]).norm() < 1e-12);
        }
    }

    #[test]
    fn singlet_pairs_energy() {
        let sp = expand_csf(&singlet_pair_path(12).unwrap(), 0).unwrap();
        let h = apply_sz_hamiltonian(12, 1.0, sp.amplitudes());
        let e = crate::linalg::dot(sp.amplitudes(), &h).re;
        // six singlet bonds at -3/4 and five uncorrelated bonds at 0
        assert!(close(e, -4.5, 1e-12));
    }

    #[test]
    fn transpositions_are_symmetric_involutions() {
        let n = 5;
        let x: Vec<C64> = (0..1 << n).map(|i| C64::new(i as f64, 1.0)).collect();
        for a in 0..n {
            for b in a + 1..n {
                let y = apply_transposition(n, a, b, &x);
                assert_eq!(apply_transposition(n, a, b, &y), x);
                assert_eq!(apply_transposition(n, b, a, &x), y);
            }
        }
    }

    #[test]
    fn size_guard() {
        let p = singlet_pair_path(16).unwrap();
        assert!(matches!(expand_csf(&p, 0), Err(Error::ResourceLimit(_))));
    }
}
