//! Spin paths and truncated spin-adapted bases.
//!
//! A configuration state function of `N` spin-1/2 sites in the successive
//! coupling scheme is identified by the intermediate total spins
//! `S̄_0 = 0, S̄_1, ..., S̄_N = S`. Heights are stored doubled, so a path is a
//! sequence of non-negative integers starting at 0 where consecutive entries
//! differ by exactly one.

use std::fmt;
use std::io::Write;

use crate::{Error, Result};

/// One total-spin eigenstate as its sequence of doubled intermediate spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinPath {
    heights: Vec<u16>,
}

impl SpinPath {
    /// Validates the height sequence: starts at 0, unit steps, never negative.
    pub fn new(heights: Vec<u16>) -> Result<Self> {
        if heights.len() < 2 {
            return Err(Error::UnphysicalPath(format!(
                "a path needs at least one site, got {} heights",
                heights.len()
            )));
        }
        if heights[0] != 0 {
            return Err(Error::UnphysicalPath(format!(
                "path must start at height 0, got {}",
                heights[0]
            )));
        }
        for (i, w) in heights.windows(2).enumerate() {
            if w[0].abs_diff(w[1]) != 1 {
                return Err(Error::UnphysicalPath(format!(
                    "heights {} -> {} at index {} violate angular momentum addition",
                    w[0],
                    w[1],
                    i
                )));
            }
        }
        Ok(Self { heights })
    }

    /// Builds a path from step variables (`+1` up-coupling, `-1` down-coupling).
    pub fn from_steps(steps: &[i8]) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::UnphysicalPath("empty step sequence".into()));
        }
        let mut heights = Vec::with_capacity(steps.len() + 1);
        heights.push(0u16);
        let mut h: i32 = 0;
        for (i, &s) in steps.iter().enumerate() {
            if s != 1 && s != -1 {
                return Err(Error::UnphysicalPath(format!(
                    "step {} at position {} is not +1 or -1",
                    s, i
                )));
            }
            h += s as i32;
            if h < 0 {
                return Err(Error::UnphysicalPath(format!(
                    "negative intermediate total spin after step {}",
                    i + 1
                )));
            }
            heights.push(h as u16);
        }
        Ok(Self { heights })
    }

    /// Step variables, `heights[i+1] - heights[i]` for every site.
    pub fn steps(&self) -> Vec<i8> {
        self.heights
            .windows(2)
            .map(|w| if w[1] > w[0] { 1 } else { -1 })
            .collect()
    }

    pub fn heights(&self) -> &[u16] {
        &self.heights
    }

    pub fn height(&self, index: usize) -> u16 {
        self.heights[index]
    }

    pub fn n_sites(&self) -> usize {
        self.heights.len() - 1
    }

    /// Doubled global spin, the last height.
    pub fn total_spin_x2(&self) -> u16 {
        *self.heights.last().unwrap()
    }

    pub fn max_height(&self) -> u16 {
        self.heights.iter().copied().max().unwrap_or(0)
    }

    /// Copy of the path with one height replaced; the caller guarantees the
    /// result is still a valid path.
    pub(crate) fn with_height(&self, index: usize, value: u16) -> Self {
        let mut heights = self.heights.clone();
        heights[index] = value;
        Self { heights }
    }

    /// Slash-separated doubled heights, e.g. `0/1/0/1/0`.
    pub fn to_slash_string(&self) -> String {
        self.heights
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn parse_slash(s: &str) -> Result<Self> {
        let heights = s
            .split('/')
            .map(|t| {
                t.trim()
                    .parse::<u16>()
                    .map_err(|e| Error::Parse(format!("bad height '{}': {}", t, e)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(heights)
    }
}

impl fmt::Display for SpinPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_slash_string())
    }
}

/// Largest basis that will be enumerated.
pub const MAX_BASIS_PATHS: usize = 1_000_000;

fn check_quantum_numbers(n_sites: usize, total_spin_x2: u32) -> Result<()> {
    if n_sites == 0 {
        return Err(Error::InvalidQuantumNumbers("N must be at least 1".into()));
    }
    if total_spin_x2 as usize > n_sites {
        return Err(Error::InvalidQuantumNumbers(format!(
            "2S = {} exceeds N = {}",
            total_spin_x2, n_sites
        )));
    }
    if (n_sites + total_spin_x2 as usize) % 2 != 0 {
        return Err(Error::InvalidQuantumNumbers(format!(
            "N = {} and 2S = {} have different parity",
            n_sites, total_spin_x2
        )));
    }
    Ok(())
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of spin eigenfunctions `(2S+1)/(N+1) * binom(N+1, N/2 - S)`.
pub fn cardinality(n_sites: usize, total_spin_x2: u32) -> Result<u128> {
    check_quantum_numbers(n_sites, total_spin_x2)?;
    let n = n_sites as u64;
    let k = (n - total_spin_x2 as u64) / 2;
    let numer = (total_spin_x2 as u128 + 1) * binomial(n + 1, k);
    Ok(numer / (n as u128 + 1))
}

/// Path of `N/2` singlet pairs: heights `0,1,0,1,...,0`.
pub fn singlet_pair_path(n_sites: usize) -> Result<SpinPath> {
    if n_sites == 0 || n_sites % 2 != 0 {
        return Err(Error::InvalidQuantumNumbers(format!(
            "singlet-pair product needs an even number of sites, got {}",
            n_sites
        )));
    }
    Ok(SpinPath {
        heights: (0..=n_sites).map(|i| (i % 2) as u16).collect(),
    })
}

/// Triplet reference: singlet pairs up to site `N-1`, last step coupled up.
pub fn triplet_reference_path(n_sites: usize) -> Result<SpinPath> {
    let mut p = singlet_pair_path(n_sites)?;
    p.heights[n_sites] = 2;
    Ok(p)
}

/// Ordered, optionally truncated set of spin paths for fixed `(N, S)`.
#[derive(Debug, Clone)]
pub struct CsfBasis {
    n_sites: usize,
    total_spin_x2: u32,
    magnetization_x2: i32,
    trunc_x2: u32,
    paths: Vec<SpinPath>,
}

impl CsfBasis {
    /// All paths ending at `2S` whose heights never exceed `trunc_x2`, in
    /// lexicographic order of their heights.
    pub fn new(n_sites: usize, total_spin_x2: u32, trunc_x2: u32) -> Result<Self> {
        check_quantum_numbers(n_sites, total_spin_x2)?;
        if n_sites <= 120 && trunc_x2 as usize >= n_sites && cardinality(n_sites, total_spin_x2)? > MAX_BASIS_PATHS as u128 {
            return Err(Error::ResourceLimit(format!(
                "more than {} paths for N = {}, 2S = {}",
                MAX_BASIS_PATHS, n_sites, total_spin_x2
            )));
        }
        let mut paths = Vec::new();
        let mut heights = Vec::with_capacity(n_sites + 1);
        heights.push(0u16);
        enumerate_rec(
            n_sites,
            total_spin_x2 as i32,
            trunc_x2 as i32,
            &mut heights,
            &mut paths,
        );
        if paths.len() > MAX_BASIS_PATHS {
            return Err(Error::ResourceLimit(format!(
                "more than {} paths for N = {}, 2S = {}, truncation {}",
                MAX_BASIS_PATHS, n_sites, total_spin_x2, trunc_x2
            )));
        }
        Ok(Self {
            n_sites,
            total_spin_x2,
            magnetization_x2: total_spin_x2 as i32,
            trunc_x2,
            paths,
        })
    }

    /// The full spin-adapted sector; truncation sentinel `trunc_x2 = N`.
    pub fn untruncated(n_sites: usize, total_spin_x2: u32) -> Result<Self> {
        Self::new(n_sites, total_spin_x2, n_sites as u32)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn total_spin_x2(&self) -> u32 {
        self.total_spin_x2
    }

    pub fn magnetization_x2(&self) -> i32 {
        self.magnetization_x2
    }

    pub fn trunc_x2(&self) -> u32 {
        self.trunc_x2
    }

    pub fn paths(&self) -> &[SpinPath] {
        &self.paths
    }

    pub fn path(&self, index: usize) -> &SpinPath {
        &self.paths[index]
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Ordinal of a path, `None` if it is outside the basis.
    pub fn index_of(&self, path: &SpinPath) -> Option<usize> {
        self.index_of_heights(path.heights())
    }

    pub fn index_of_heights(&self, heights: &[u16]) -> Option<usize> {
        self.paths
            .binary_search_by(|p| p.heights.as_slice().cmp(heights))
            .ok()
    }

    /// Whether every path of the sector is present.
    pub fn is_complete(&self) -> bool {
        // the highest reachable height is min over i of i and N - i + 2S
        let n = self.n_sites as u32;
        let s = self.total_spin_x2;
        let max_reach = (0..=n).map(|i| i.min(n - i + s)).max().unwrap_or(0);
        self.trunc_x2 >= max_reach
    }

    /// CSV with header `index,heights`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,heights")?;
        for (k, p) in self.paths.iter().enumerate() {
            writeln!(out, "{},{}", k, p.to_slash_string())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

fn enumerate_rec(
    n_sites: usize,
    target: i32,
    trunc: i32,
    heights: &mut Vec<u16>,
    out: &mut Vec<SpinPath>,
) {
    if out.len() > MAX_BASIS_PATHS {
        return;
    }
    let placed = heights.len() - 1;
    let h = *heights.last().unwrap() as i32;
    if placed == n_sites {
        if h == target {
            out.push(SpinPath {
                heights: heights.clone(),
            });
        }
        return;
    }
    let remaining = (n_sites - placed - 1) as i32;
    // down before up keeps the output lexicographically sorted
    for next in [h - 1, h + 1] {
        if next < 0 || next > trunc || (next - target).abs() > remaining {
            continue;
        }
        heights.push(next as u16);
        enumerate_rec(n_sites, target, trunc, heights, out);
        heights.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_count(n: usize, s2: u32, trunc: u32) -> usize {
        (0u32..1 << n)
            .filter(|bits| {
                let mut h = 0i32;
                let mut max = 0;
                for i in 0..n {
                    h += if bits >> i & 1 == 1 { 1 } else { -1 };
                    if h < 0 {
                        return false;
                    }
                    max = max.max(h);
                }
                h == s2 as i32 && max <= trunc as i32
            })
            .count()
    }

    #[test]
    fn cardinality_values() {
        assert_eq!(cardinality(8, 0).unwrap(), 14);
        assert_eq!(cardinality(2, 0).unwrap(), 1);
        assert_eq!(cardinality(8, 2).unwrap(), 28);
        assert_eq!(brute_force_count(8, 0, 8), 14);
        assert_eq!(brute_force_count(8, 2, 8), 28);
    }

    #[test]
    fn cardinality_rejects_bad_numbers() {
        assert!(matches!(
            cardinality(8, 1),
            Err(Error::InvalidQuantumNumbers(_))
        ));
        assert!(matches!(
            cardinality(4, 6),
            Err(Error::InvalidQuantumNumbers(_))
        ));
        assert!(cardinality(0, 0).is_err());
    }

    #[test]
    fn truncated_counts_n8() {
        assert_eq!(CsfBasis::new(8, 0, 2).unwrap().len(), 8);
        assert_eq!(CsfBasis::new(8, 0, 3).unwrap().len(), 13);
        assert_eq!(CsfBasis::new(8, 0, 4).unwrap().len(), 14);
        let one = CsfBasis::new(8, 0, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.path(0), &singlet_pair_path(8).unwrap());
        for t in 0..=8 {
            assert_eq!(
                CsfBasis::new(8, 0, t).unwrap().len(),
                brute_force_count(8, 0, t)
            );
        }
    }

    #[test]
    fn truncation_below_total_spin_is_empty() {
        let b = CsfBasis::new(6, 2, 1).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn reference_paths() {
        assert_eq!(
            singlet_pair_path(8).unwrap().heights(),
            &[0, 1, 0, 1, 0, 1, 0, 1, 0]
        );
        assert_eq!(singlet_pair_path(2).unwrap().heights(), &[0, 1, 0]);
        let sp16 = singlet_pair_path(16).unwrap();
        assert_eq!(sp16.heights().len(), 17);
        assert!(sp16
            .heights()
            .iter()
            .enumerate()
            .all(|(i, &h)| h as usize == i % 2));
        assert_eq!(
            triplet_reference_path(8).unwrap().heights(),
            &[0, 1, 0, 1, 0, 1, 0, 1, 2]
        );
        assert_eq!(triplet_reference_path(2).unwrap().heights(), &[0, 1, 2]);
        let t16 = triplet_reference_path(16).unwrap();
        assert_eq!(t16.heights()[16], 2);
        assert_eq!(t16.heights()[15], 1);
        assert!(singlet_pair_path(7).is_err());
    }

    #[test]
    fn step_encoding() {
        let sp = SpinPath::from_steps(&[1, -1, 1, -1, 1, -1, 1, -1]).unwrap();
        assert_eq!(sp, singlet_pair_path(8).unwrap());
        assert!(matches!(
            SpinPath::from_steps(&[1, -1, -1, 1, 1, -1, 1, -1]),
            Err(Error::UnphysicalPath(_))
        ));
        for p in CsfBasis::new(8, 0, 4).unwrap().paths() {
            assert_eq!(&SpinPath::from_steps(&p.steps()).unwrap(), p);
        }
    }

    #[test]
    fn invalid_heights_rejected() {
        assert!(SpinPath::new(vec![0, 3, 1]).is_err());
        assert!(SpinPath::new(vec![1, 0]).is_err());
        assert!(SpinPath::new(vec![0]).is_err());
    }

    #[test]
    fn csv_export() {
        let b = CsfBasis::new(4, 0, 4).unwrap();
        assert_eq!(b.to_csv(), "index,heights\n0,0/1/0/1/0\n1,0/1/2/1/0\n");
    }

    #[test]
    fn index_lookup() {
        let b = CsfBasis::untruncated(10, 2).unwrap();
        for (k, p) in b.paths().iter().enumerate() {
            assert_eq!(b.index_of(p), Some(k));
        }
        let outside = SpinPath::new(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0]).unwrap();
        assert_eq!(b.index_of(&outside), None);
    }

    #[test]
    fn completeness_flag() {
        assert!(CsfBasis::new(8, 0, 4).unwrap().is_complete());
        assert!(!CsfBasis::new(8, 0, 3).unwrap().is_complete());
        assert!(CsfBasis::untruncated(16, 2).unwrap().is_complete());
    }
}
