//! Qubit encodings of band-truncated Hamiltonians.
//!
//! Chain index `j` stores the value `v_j = (h_j - (j mod 2)) / 2` of its
//! doubled height. Values 0 and 1 need one "main" bit; truncation 2 lets even
//! sites reach `v = 2`, which adds an "extension" bit with the Gray code
//! `(ext, main)`: `00 -> 0`, `01 -> 1`, `11 -> 2`, `10` unphysical.
//!
//! Bits that never change across the truncated basis are boundary constants
//! and are substituted away; the remaining ones become qubits, main bits in
//! chain order followed by extension bits in chain order. Qubit 0 is the most
//! significant bit of a computational-basis index and the leftmost Pauli
//! letter.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::basis::{CsfBasis, SpinPath};
use crate::sga::{band_coefficients, included_bands, TruncationMode};
use crate::{Error, Result, C64};

/// A bit of the encoding register: a qubit or a boundary constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotState {
    Qubit(usize),
    Fixed(bool),
}

/// Map from chain indices to qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitLayout {
    n_sites: usize,
    total_spin_x2: u32,
    trunc_x2: u32,
    main: Vec<SlotState>,
    ext: Vec<SlotState>,
    n_qubits: usize,
}

impl QubitLayout {
    pub fn new(basis: &CsfBasis) -> Result<Self> {
        let n = basis.n_sites();
        if basis.is_empty() {
            return Err(Error::Unsupported(format!(
                "empty basis for N = {}, 2S = {}, truncation {}",
                n,
                basis.total_spin_x2(),
                basis.trunc_x2()
            )));
        }
        if basis.paths().iter().any(|p| p.max_height() > 4) {
            return Err(Error::Unsupported(
                "qubit encodings cover heights up to S = 2 only".into(),
            ));
        }
        if 2 * n + 2 > 64 {
            return Err(Error::Unsupported(format!("{} sites is too long to encode", n)));
        }
        let value = |p: &SpinPath, j: usize| (p.height(j) as usize - j % 2) / 2;
        let mut main = Vec::with_capacity(n + 1);
        let mut ext = Vec::with_capacity(n + 1);
        let mut main_dyn = Vec::new();
        let mut ext_dyn = Vec::new();
        for j in 0..=n {
            let first = value(basis.path(0), j);
            let m0 = first >= 1;
            let e0 = first >= 2;
            let main_varies = basis.paths().iter().any(|p| (value(p, j) >= 1) != m0);
            let ext_varies = basis.paths().iter().any(|p| (value(p, j) >= 2) != e0);
            main.push(SlotState::Fixed(m0));
            ext.push(SlotState::Fixed(e0));
            if main_varies {
                main_dyn.push(j);
            }
            if ext_varies {
                ext_dyn.push(j);
            }
        }
        let mut q = 0;
        for &j in &main_dyn {
            main[j] = SlotState::Qubit(q);
            q += 1;
        }
        for &j in &ext_dyn {
            ext[j] = SlotState::Qubit(q);
            q += 1;
        }
        Ok(Self {
            n_sites: n,
            total_spin_x2: basis.total_spin_x2(),
            trunc_x2: basis.trunc_x2(),
            main,
            ext,
            n_qubits: q,
        })
    }

    /// Register with one qubit per height bit and no boundary elimination;
    /// extension bits exist on even sites at truncation 2 only.
    pub fn unfolded(basis: &CsfBasis) -> Result<Self> {
        let folded = Self::new(basis)?;
        let n = folded.n_sites;
        let main = (0..=n).map(SlotState::Qubit).collect();
        let mut q = n + 1;
        let ext = (0..=n)
            .map(|j| {
                if basis.trunc_x2() >= 4 && j % 2 == 0 {
                    q += 1;
                    SlotState::Qubit(q - 1)
                } else {
                    SlotState::Fixed(false)
                }
            })
            .collect();
        Ok(Self {
            main,
            ext,
            n_qubits: q,
            ..folded
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn main(&self, j: usize) -> SlotState {
        self.main[j]
    }

    pub fn ext(&self, j: usize) -> SlotState {
        self.ext[j]
    }

    /// Slot id of the main bit of chain index `j`.
    pub fn main_slot(&self, j: usize) -> usize {
        j
    }

    /// Slot id of the extension bit of chain index `j`.
    pub fn ext_slot(&self, j: usize) -> usize {
        self.n_sites + 1 + j
    }

    pub fn n_slots(&self) -> usize {
        2 * (self.n_sites + 1)
    }

    pub fn slot(&self, slot: usize) -> SlotState {
        if slot <= self.n_sites {
            self.main[slot]
        } else {
            self.ext[slot - self.n_sites - 1]
        }
    }

    /// Slot id carried by each qubit.
    pub fn qubit_slots(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_qubits];
        for s in 0..self.n_slots() {
            if let SlotState::Qubit(q) = self.slot(s) {
                out[q] = s;
            }
        }
        out
    }

    fn bit(&self, state: SlotState, bits: u64) -> bool {
        match state {
            SlotState::Fixed(b) => b,
            SlotState::Qubit(q) => bits >> (self.n_qubits - 1 - q) & 1 == 1,
        }
    }

    /// Path encoded by a computational-basis index, `None` when unphysical.
    pub fn decode(&self, bits: u64) -> Option<SpinPath> {
        let mut heights = Vec::with_capacity(self.n_sites + 1);
        for j in 0..=self.n_sites {
            let m = self.bit(self.main[j], bits);
            let e = self.bit(self.ext[j], bits);
            if e && !m {
                return None;
            }
            let v = m as u16 + e as u16;
            heights.push(2 * v + (j % 2) as u16);
        }
        let path = SpinPath::new(heights).ok()?;
        (path.total_spin_x2() as u32 == self.total_spin_x2 && path.max_height() as u32 <= self.trunc_x2)
            .then_some(path)
    }

    /// Computational-basis index of a path, `None` if a boundary constant
    /// disagrees with it.
    pub fn encode(&self, path: &SpinPath) -> Option<u64> {
        if path.n_sites() != self.n_sites {
            return None;
        }
        let mut bits = 0u64;
        for j in 0..=self.n_sites {
            let v = (path.height(j) as usize - j % 2) / 2;
            for (state, b) in [(self.main[j], v >= 1), (self.ext[j], v >= 2)] {
                match state {
                    SlotState::Fixed(f) if f != b => return None,
                    SlotState::Fixed(_) => {}
                    SlotState::Qubit(q) => {
                        if b {
                            bits |= 1 << (self.n_qubits - 1 - q);
                        }
                    }
                }
            }
        }
        Some(bits)
    }
}

/// Polynomial in commuting `Z` operators, keyed by bitmasks of slot ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZPoly {
    terms: BTreeMap<u64, f64>,
}

impl ZPoly {
    pub fn constant(c: f64) -> Self {
        let mut p = Self::default();
        if c != 0.0 {
            p.terms.insert(0, c);
        }
        p
    }

    /// `Z` on a slot, replaced by `±1` when the slot is fixed.
    fn z(layout: &QubitLayout, slot: usize) -> Self {
        match layout.slot(slot) {
            SlotState::Fixed(b) => Self::constant(if b { -1.0 } else { 1.0 }),
            SlotState::Qubit(_) => {
                let mut p = Self::default();
                p.terms.insert(1 << slot, 1.0);
                p
            }
        }
    }

    /// `|0><0|` (`bit = false`) or `|1><1|` on a slot.
    fn projector(layout: &QubitLayout, slot: usize, bit: bool) -> Self {
        let sign = if bit { -0.5 } else { 0.5 };
        Self::constant(0.5).add(&Self::z(layout, slot).scale(sign))
    }

    /// Projector on two slots holding different bits, `(II - ZZ)/2`.
    fn differ(layout: &QubitLayout, a: usize, b: usize) -> Self {
        Self::constant(0.5).add(&Self::z(layout, a).mul(&Self::z(layout, b)).scale(-0.5))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&m, &c) in &other.terms {
            *out.terms.entry(m).or_insert(0.0) += c;
        }
        out.prune()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::default();
        for (&m1, &c1) in &self.terms {
            for (&m2, &c2) in &other.terms {
                *out.terms.entry(m1 ^ m2).or_insert(0.0) += c1 * c2;
            }
        }
        out.prune()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(&m, &c)| (m, c * s)).collect(),
        }
        .prune()
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| c.abs() > 1e-14);
        self
    }

    /// Every monomial multiplied by the `Z` string of `mask`.
    pub fn times_z(&self, mask: u64) -> Self {
        Self {
            terms: self.terms.iter().map(|(&m, &c)| (m ^ mask, c)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    /// Value on a register configuration given as a slot bitmask.
    pub fn evaluate(&self, slot_bits: u64) -> f64 {
        self.terms
            .iter()
            .map(|(&m, &c)| if (m & slot_bits).count_ones() % 2 == 0 { c } else { -c })
            .sum()
    }

    /// Largest number of slots in one monomial.
    pub fn max_weight(&self) -> usize {
        self.terms.keys().map(|m| m.count_ones() as usize).max().unwrap_or(0)
    }
}

/// Tilted field `a Z + b X` on a target slot, controlled by a diagonal polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct MixTerm {
    pub target: usize,
    pub control: ZPoly,
    pub a: f64,
    pub b: f64,
}

/// One band contribution of one bond, before the `J/2` prefactor.
#[derive(Debug, Clone, PartialEq)]
pub enum BandTerm {
    Diagonal {
        bond: usize,
        band_x2: u32,
        poly: ZPoly,
    },
    Mix {
        bond: usize,
        band_x2: u32,
        mix: MixTerm,
    },
}

impl BandTerm {
    pub fn bond(&self) -> usize {
        match self {
            BandTerm::Diagonal { bond, .. } | BandTerm::Mix { bond, .. } => *bond,
        }
    }

    pub fn band_x2(&self) -> u32 {
        match self {
            BandTerm::Diagonal { band_x2, .. } | BandTerm::Mix { band_x2, .. } => *band_x2,
        }
    }

    /// Slots the term acts on nontrivially.
    pub fn support(&self) -> u64 {
        match self {
            BandTerm::Diagonal { poly, .. } => poly.terms().fold(0, |acc, (m, _)| acc | m),
            BandTerm::Mix { mix, .. } => mix.control.terms().fold(1 << mix.target, |acc, (m, _)| acc | m),
        }
    }
}

/// Which projector expansion to emit on the even sites of truncation 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodingStyle {
    /// Shortest forms that agree with the exact operator on physical states.
    #[default]
    Simplified,
    /// Full Gray-code projectors on every value.
    Exact,
}

/// Band-truncated Hamiltonian as structured qubit terms.
#[derive(Debug, Clone)]
pub struct Encoding {
    basis: CsfBasis,
    layout: QubitLayout,
    bands: Vec<u32>,
    terms: Vec<BandTerm>,
    style: EncodingStyle,
}

fn check_supported(n_sites: usize, total_spin_x2: u32, trunc_x2: u32) -> Result<()> {
    if n_sites % 2 != 0 {
        return Err(Error::Unsupported(format!("odd chain length {}", n_sites)));
    }
    if total_spin_x2 > 2 {
        return Err(Error::Unsupported(format!("total spin 2S = {} above 1", total_spin_x2)));
    }
    if !(1..=4).contains(&trunc_x2) {
        return Err(Error::Unsupported(format!(
            "truncation 2S̄ = {} outside {{1, 2, 3, 4}}",
            trunc_x2
        )));
    }
    Ok(())
}

impl Encoding {
    pub fn new(n_sites: usize, total_spin_x2: u32, trunc_x2: u32, style: EncodingStyle) -> Result<Self> {
        Self::build(n_sites, total_spin_x2, trunc_x2, style, false)
    }

    /// Same terms on the unfolded register, boundary bits kept as qubits.
    pub fn new_unfolded(n_sites: usize, total_spin_x2: u32, trunc_x2: u32, style: EncodingStyle) -> Result<Self> {
        Self::build(n_sites, total_spin_x2, trunc_x2, style, true)
    }

    fn build(n_sites: usize, total_spin_x2: u32, trunc_x2: u32, style: EncodingStyle, unfolded: bool) -> Result<Self> {
        check_supported(n_sites, total_spin_x2, trunc_x2)?;
        let basis = CsfBasis::new(n_sites, total_spin_x2, trunc_x2)?;
        let folded = QubitLayout::new(&basis)?;
        let layout = if unfolded {
            QubitLayout::unfolded(&basis)?
        } else {
            folded.clone()
        };
        let frozen = |slot: usize| matches!(folded.slot(slot), SlotState::Fixed(_));
        let bands = included_bands(&basis, TruncationMode::Band);
        let mut terms = Vec::new();
        for i in 1..n_sites {
            for &s in &bands {
                if let Some(t) = band_term(&layout, i, s, style, &frozen) {
                    terms.push(t);
                }
            }
        }
        Ok(Self {
            basis,
            layout,
            bands,
            terms,
            style,
        })
    }

    pub fn basis(&self) -> &CsfBasis {
        &self.basis
    }

    pub fn layout(&self) -> &QubitLayout {
        &self.layout
    }

    pub fn bands(&self) -> &[u32] {
        &self.bands
    }

    pub fn terms(&self) -> &[BandTerm] {
        &self.terms
    }

    pub fn style(&self) -> EncodingStyle {
        self.style
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    /// Identity coefficient of the Hamiltonian, `-(J/2)(N-1)/2`.
    pub fn constant(&self, coupling: f64) -> f64 {
        -0.5 * coupling * (self.n_sites() as f64 - 1.0) / 2.0
    }

    /// `(J/2)(Σ_s λ_s H_s - (N-1)/2)` as a Pauli sum.
    pub fn pauli_sum_weighted(&self, coupling: f64, weight: impl Fn(u32) -> f64) -> PauliSum {
        let mut acc: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        let nq = self.layout.n_qubits;
        let identity = vec![b'I'; nq];
        *acc.entry(identity).or_default() += C64::new(self.constant(coupling), 0.0);
        for t in &self.terms {
            let w = 0.5 * coupling * weight(t.band_x2());
            for (letters, c) in self.term_strings(t) {
                *acc.entry(letters).or_default() += c * w;
            }
        }
        PauliSum::from_map(nq, acc).with_layout(self.layout.clone(), self.bands.clone())
    }

    pub fn pauli_sum(&self, coupling: f64) -> PauliSum {
        self.pauli_sum_weighted(coupling, |_| 1.0)
    }

    /// Pauli strings of a single term, without prefactor.
    pub fn term_strings(&self, term: &BandTerm) -> Vec<(Vec<u8>, C64)> {
        let nq = self.layout.n_qubits;
        let letters_of = |mask: u64, extra: Option<(usize, u8)>| {
            let mut l = vec![b'I'; nq];
            for s in 0..self.layout.n_slots() {
                if mask >> s & 1 == 1 {
                    if let SlotState::Qubit(q) = self.layout.slot(s) {
                        l[q] = b'Z';
                    }
                }
            }
            if let Some((s, ch)) = extra {
                if let SlotState::Qubit(q) = self.layout.slot(s) {
                    l[q] = ch;
                }
            }
            l
        };
        let mut out = Vec::new();
        match term {
            BandTerm::Diagonal { poly, .. } => {
                for (m, c) in poly.terms() {
                    out.push((letters_of(m, None), C64::new(c, 0.0)));
                }
            }
            BandTerm::Mix { mix, .. } => {
                for (m, c) in mix.control.terms() {
                    out.push((letters_of(m, Some((mix.target, b'Z'))), C64::new(c * mix.a, 0.0)));
                    out.push((letters_of(m, Some((mix.target, b'X'))), C64::new(c * mix.b, 0.0)));
                }
            }
        }
        out
    }

    /// Pauli sum of one term with the `J/2` prefactor, on the qubit register.
    pub fn term_pauli_sum(&self, term: &BandTerm, coupling: f64) -> PauliSum {
        let mut acc: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (l, c) in self.term_strings(term) {
            *acc.entry(l).or_default() += c * (0.5 * coupling);
        }
        PauliSum::from_map(self.layout.n_qubits, acc)
    }
}

/// Number of qubits of the encoding after boundary elimination.
pub fn qubit_count(n_sites: usize, total_spin_x2: u32, trunc_x2: u32) -> Result<usize> {
    check_supported(n_sites, total_spin_x2, trunc_x2)?;
    let basis = CsfBasis::new(n_sites, total_spin_x2, trunc_x2)?;
    Ok(QubitLayout::new(&basis)?.n_qubits())
}

/// Band-truncated Hamiltonian (unit coupling) as a Pauli sum.
pub fn encode_hamiltonian(n_sites: usize, total_spin_x2: u32, trunc_x2: u32) -> Result<PauliSum> {
    Ok(Encoding::new(n_sites, total_spin_x2, trunc_x2, EncodingStyle::Simplified)?.pauli_sum(1.0))
}

/// Projector on chain index `j` holding value `v`.
fn value_projector(layout: &QubitLayout, j: usize, v: usize, style: EncodingStyle) -> ZPoly {
    let m = layout.main_slot(j);
    let e = layout.ext_slot(j);
    match (style, v) {
        (EncodingStyle::Simplified, 0) => ZPoly::projector(layout, m, false),
        (EncodingStyle::Simplified, 1) => ZPoly::differ(layout, e, m),
        (EncodingStyle::Simplified, _) => ZPoly::projector(layout, e, true),
        (EncodingStyle::Exact, v) => {
            ZPoly::projector(layout, m, v >= 1).mul(&ZPoly::projector(layout, e, v >= 2))
        }
    }
}

fn band_term(
    layout: &QubitLayout,
    i: usize,
    s_x2: u32,
    style: EncodingStyle,
    frozen: &dyn Fn(usize) -> bool,
) -> Option<BandTerm> {
    let (l, c, r) = (i - 1, i, i + 1);
    let value = |h: u32, j: usize| ((h as usize) - j % 2) / 2;
    let monotone = s_x2 as usize % 2 == i % 2;
    if monotone && s_x2 == 0 {
        return None;
    }
    let term = if monotone {
        // monotone triples: outer heights s - 1/2 and s + 1/2 in either order
        let lo = value(s_x2 - 1, l);
        let poly = match style {
            EncodingStyle::Simplified => {
                let slot = |j| if lo == 0 { layout.main_slot(j) } else { layout.ext_slot(j) };
                ZPoly::differ(layout, slot(l), slot(r))
            }
            EncodingStyle::Exact => {
                let p = |j, v| value_projector(layout, j, v, style);
                p(l, lo).mul(&p(r, lo + 1)).add(&p(l, lo + 1).mul(&p(r, lo)))
            }
        };
        BandTerm::Diagonal {
            bond: i,
            band_x2: s_x2,
            poly,
        }
    } else {
        let vs = value(s_x2, l);
        let control = value_projector(layout, l, vs, style).mul(&value_projector(layout, r, vs, style));
        let co = band_coefficients(s_x2);
        if s_x2 == 0 {
            // only the peak (0, 1/2, 0) exists; it sits on the zero value of the centre
            let centre = match style {
                EncodingStyle::Simplified => ZPoly::z(layout, layout.main_slot(c)),
                EncodingStyle::Exact => value_projector(layout, c, 0, style),
            };
            BandTerm::Diagonal {
                bond: i,
                band_x2: 0,
                poly: control.mul(&centre).scale(-co.a),
            }
        } else {
            let lo = value(s_x2 - 1, c);
            let (target, other) = if lo == 0 {
                (layout.main_slot(c), ZPoly::projector(layout, layout.ext_slot(c), false))
            } else {
                (layout.ext_slot(c), ZPoly::projector(layout, layout.main_slot(c), true))
            };
            let control = match style {
                EncodingStyle::Simplified => control,
                EncodingStyle::Exact => control.mul(&other),
            };
            if frozen(target) {
                // a target frozen over the whole basis cannot be flipped
                // inside the physical sector, so only the Z part survives
                BandTerm::Diagonal {
                    bond: i,
                    band_x2: s_x2,
                    poly: control.mul(&ZPoly::z(layout, target)).scale(co.a),
                }
            } else {
                BandTerm::Mix {
                    bond: i,
                    band_x2: s_x2,
                    mix: MixTerm {
                        target,
                        control,
                        a: co.a,
                        b: co.b,
                    },
                }
            }
        }
    };
    let zero = match &term {
        BandTerm::Diagonal { poly, .. } => poly.is_zero(),
        BandTerm::Mix { mix, .. } => mix.control.is_zero(),
    };
    (!zero).then_some(term)
}

/// A weighted product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    pub coefficient: C64,
    pub letters: Vec<u8>,
}

impl PauliString {
    /// `(x_mask, z_mask, number of Y)` in computational-index bit positions.
    fn masks(&self) -> (u64, u64, u32) {
        let n = self.letters.len();
        let mut x = 0u64;
        let mut z = 0u64;
        let mut ny = 0;
        for (q, &l) in self.letters.iter().enumerate() {
            let bit = 1u64 << (n - 1 - q);
            match l {
                b'X' => x |= bit,
                b'Z' => z |= bit,
                b'Y' => {
                    x |= bit;
                    z |= bit;
                    ny += 1;
                }
                _ => {}
            }
        }
        (x, z, ny)
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&l| l != b'I').count()
    }

    pub fn letters_str(&self) -> &str {
        std::str::from_utf8(&self.letters).expect("pauli letters are ascii")
    }
}

/// Sum of Pauli strings over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliString>,
    layout: Option<QubitLayout>,
    bands: Vec<u32>,
}

impl PauliSum {
    fn from_map(n_qubits: usize, map: BTreeMap<Vec<u8>, C64>) -> Self {
        let terms = map
            .into_iter()
            .filter(|(_, c)| c.norm() > 1e-14)
            .map(|(letters, coefficient)| PauliString {
                coefficient,
                letters,
            })
            .collect();
        Self {
            n_qubits,
            terms,
            layout: None,
            bands: Vec::new(),
        }
    }

    /// Combines duplicate strings and sorts lexicographically.
    pub fn new(n_qubits: usize, terms: Vec<PauliString>) -> Result<Self> {
        let mut map: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for t in terms {
            if t.letters.len() != n_qubits || t.letters.iter().any(|l| !b"IXYZ".contains(l)) {
                return Err(Error::Parse(format!(
                    "bad Pauli string '{}' for {} qubits",
                    String::from_utf8_lossy(&t.letters),
                    n_qubits
                )));
            }
            *map.entry(t.letters).or_default() += t.coefficient;
        }
        Ok(Self::from_map(n_qubits, map))
    }

    fn with_layout(mut self, layout: QubitLayout, bands: Vec<u32>) -> Self {
        self.layout = Some(layout);
        self.bands = bands;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn layout(&self) -> Option<&QubitLayout> {
        self.layout.as_ref()
    }

    pub fn bands(&self) -> &[u32] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_weight(&self) -> usize {
        self.terms.iter().map(|t| t.weight()).max().unwrap_or(0)
    }

    /// Largest imaginary part of a coefficient; every string is Hermitian so
    /// this measures the anti-Hermitian part of the sum.
    pub fn max_imaginary(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.im.abs()).fold(0.0, f64::max)
    }

    /// Image of a computational-basis state as `(index, amplitude)` pairs.
    pub fn apply_to_basis_state(&self, bits: u64) -> Vec<(u64, C64)> {
        let mut acc: BTreeMap<u64, C64> = BTreeMap::new();
        for t in &self.terms {
            let (x, z, ny) = t.masks();
            let sign = if (bits & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let phase = C64::i().powu(ny) * sign;
            *acc.entry(bits ^ x).or_default() += t.coefficient * phase;
        }
        acc.into_iter().filter(|(_, c)| c.norm() > 1e-14).collect()
    }

    pub fn apply(&self, state: &[C64]) -> Vec<C64> {
        assert_eq!(state.len(), 1 << self.n_qubits);
        let mut out = vec![C64::new(0.0, 0.0); state.len()];
        for t in &self.terms {
            let (x, z, ny) = t.masks();
            let phase = C64::i().powu(ny) * t.coefficient;
            for (idx, amp) in state.iter().enumerate() {
                let sign = if (idx as u64 & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                out[idx ^ x as usize] += amp * phase * sign;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<nalgebra::DMatrix<C64>> {
        if self.n_qubits > 12 {
            return Err(Error::ResourceLimit(format!(
                "dense matrix of {} qubits",
                self.n_qubits
            )));
        }
        let dim = 1usize << self.n_qubits;
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for c in 0..dim {
            for (r, v) in self.apply_to_basis_state(c as u64) {
                m[(r as usize, c)] += v;
            }
        }
        Ok(m)
    }

    /// Text form: `qubits <n>` then `<re> <im> <letters>` per term.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "qubits {}", self.n_qubits)?;
        for t in &self.terms {
            if t.letters.is_empty() {
                writeln!(out, "{:.16e} {:.16e}", t.coefficient.re, t.coefficient.im)?;
            } else {
                writeln!(
                    out,
                    "{:.16e} {:.16e} {}",
                    t.coefficient.re,
                    t.coefficient.im,
                    t.letters_str()
                )?;
            }
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty Pauli file".into()))?;
        let n_qubits = header
            .strip_prefix("qubits ")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad header '{}'", header)))?;
        let mut terms = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let mut num = |what: &str| -> Result<f64> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("missing {} in '{}'", what, line)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad {} in '{}': {}", what, line, e)))
            };
            let re = num("real part")?;
            let im = num("imaginary part")?;
            let letters = parts.next().unwrap_or("").as_bytes().to_vec();
            terms.push(PauliString {
                coefficient: C64::new(re, im),
                letters,
            });
        }
        Self::new(n_qubits, terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_text(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}
