//! Sparse storage, Lanczos ground states and Krylov propagation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, C64};

/// Entries with magnitude at or below this are not stored.
pub const PRUNE_TOL: f64 = 1e-14;

/// Dimensions up to this use dense eigendecomposition.
pub const DENSE_LIMIT: usize = 512;

/// Hard cap on dense eigendecomposition.
pub const DENSE_GUARD: usize = 4096;

const LANCZOS_SEED: u64 = 0x5157_a11e;

/// Real square matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists; duplicate columns are summed and
    /// negligible values dropped.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v.abs() > PRUNE_TOL {
                    assert!(c < n, "column {} out of range {}", c, n);
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(n, rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_rows(n, vec![Vec::new(); n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec_real(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                acc += x[c] * v;
            }
            *out = acc;
        }
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let rows = (0..self.n)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (c, a * v))
                    .chain(other.row(r).map(|(c, v)| (c, b * v)))
                    .collect()
            })
            .collect();
        Self::from_rows(self.n, rows)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.entries()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Upper bound on the spectral radius from Gershgorin discs.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn dot_real(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_real(a: &[f64]) -> f64 {
    dot_real(a, a).sqrt()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpair of a dense real symmetric matrix.
pub fn dense_ground_state(m: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    if m.nrows() > DENSE_GUARD {
        return Err(Error::ResourceLimit(format!(
            "dense eigendecomposition of dimension {} exceeds {}",
            m.nrows(),
            DENSE_GUARD
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::Unsupported("empty matrix has no ground state".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let (k, e) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok((e, eig.eigenvectors.column(k).iter().copied().collect()))
}

/// Lowest eigenpair of a real symmetric operator given only its action.
///
/// Thick-restarted Lanczos with full reorthogonalization; the start vector is
/// drawn from a fixed-seed generator so results are reproducible.
pub fn lanczos_ground_state<F>(dim: usize, apply: F, tol: f64) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(Error::Unsupported("empty operator has no ground state".into()));
    }
    if dim <= DENSE_LIMIT {
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            apply(&e, &mut col);
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
        }
        let m = (&m + m.transpose()) * 0.5;
        return dense_ground_state(&m);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let krylov = 120.min(dim);
    let mut best = (f64::INFINITY, start.clone());
    for _restart in 0..50 {
        let nrm = norm_real(&start);
        start.iter_mut().for_each(|x| *x /= nrm);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        for k in 0..krylov {
            apply(&basis[k], &mut w);
            let a = dot_real(&w, &basis[k]);
            alpha.push(a);
            for _pass in 0..2 {
                for q in &basis {
                    let c = dot_real(&w, q);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm_real(&w);
            if k + 1 == krylov || b < 1e-12 {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (theta, y) = dense_ground_state(&t)?;
        let mut ritz = vec![0.0; dim];
        for (q, c) in basis.iter().zip(&y) {
            ritz.iter_mut().zip(q).for_each(|(x, v)| *x += c * v);
        }
        let nrm = norm_real(&ritz);
        ritz.iter_mut().for_each(|x| *x /= nrm);
        apply(&ritz, &mut w);
        let residual = w
            .iter()
            .zip(&ritz)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        best = (theta, ritz.clone());
        if residual < tol || m < krylov {
            return Ok(best);
        }
        start = ritz;
    }
    Ok(best)
}

/// `exp(-i t H) v` for a real symmetric `H` given by its action.
///
/// Lanczos projection with time sub-stepping so that each step satisfies
/// `|dt| * norm_bound <= 6`; the small tridiagonal exponential is done densely.
pub fn expm_multiply<F>(apply: F, norm_bound: f64, v: &[C64], t: f64) -> Vec<C64>
where
    F: Fn(&[C64], &mut [C64]),
{
    let dim = v.len();
    if t == 0.0 || dim == 0 {
        return v.to_vec();
    }
    let n_sub = ((t.abs() * norm_bound.max(1e-300)) / 6.0).ceil().max(1.0) as usize;
    let dt = t / n_sub as f64;
    let krylov = 40.min(dim);
    let mut cur = v.to_vec();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    for _ in 0..n_sub {
        let nrm = norm(&cur);
        if nrm == 0.0 {
            return cur;
        }
        let mut basis: Vec<Vec<C64>> = vec![cur.iter().map(|x| x / nrm).collect()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut coeffs = Vec::new();
        for k in 0..krylov {
            apply(&basis[k], &mut w);
            alpha.push(dot(&basis[k], &w).re);
            for _pass in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm(&w);
            if k + 1 == krylov || b < 1e-13 {
                coeffs = tridiagonal_exp_e1(&alpha, &beta, dt);
                break;
            }
            // a posteriori check: the residual weight on the next Krylov vector
            if (k + 1) % 4 == 0 {
                coeffs = tridiagonal_exp_e1(&alpha, &beta, dt);
                if b * coeffs[k].norm() < 1e-14 {
                    break;
                }
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let coeffs: Vec<C64> = coeffs.iter().map(|c| c * nrm).collect();
        cur.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (q, c) in basis.iter().zip(&coeffs) {
            cur.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
        }
    }
    cur
}

/// `exp(-i dt T) e_1` for the tridiagonal matrix with the given diagonal and
/// off-diagonal.
fn tridiagonal_exp_e1(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut tri = DMatrix::zeros(m, m);
    for i in 0..m {
        tri[(i, i)] = alpha[i];
        if i + 1 < m {
            tri[(i, i + 1)] = beta[i];
            tri[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(tri);
    (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let phase = C64::from_polar(1.0, -dt * eig.eigenvalues[k]);
                    phase * eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)]
                })
                .sum::<C64>()
        })
        .collect()
}

/// Spectral decomposition of a real symmetric matrix for repeated propagation.
#[derive(Debug, Clone)]
pub struct Spectral {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Spectral {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() > DENSE_GUARD {
            return Err(Error::ResourceLimit(format!(
                "dense eigendecomposition of dimension {} exceeds {}",
                m.nrows(),
                DENSE_GUARD
            )));
        }
        let eig = SymmetricEigen::new(m.clone());
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// `exp(-i t H) v`.
    pub fn propagate(&self, v: &[C64], t: f64) -> Vec<C64> {
        let n = v.len();
        let mut proj = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += v[i] * self.vectors[(i, k)];
            }
            proj[k] = acc * C64::from_polar(1.0, -t * self.values[k]);
        }
        (0..n)
            .map(|i| (0..n).map(|k| proj[k] * self.vectors[(i, k)]).sum())
            .collect()
    }
}

/// `exp(-i t H)` for a dense Hermitian matrix.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut d = DMatrix::zeros(n, n);
    for k in 0..n {
        d[(k, k)] = C64::from_polar(1.0, -t * eig.eigenvalues[k]);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}
