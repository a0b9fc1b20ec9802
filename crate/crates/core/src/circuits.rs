//! Gate-level Trotter steps.
//!
//! Gate conventions: `RX(t) = exp(-i t X/2)`, `RY(t) = exp(-i t Y/2)`,
//! `RZ(t) = exp(-i t Z/2)`, `CX` flips the target when the control is 1, and
//! `PHASE q t` multiplies the whole state by `exp(i t)` (the qubit label is
//! kept only for the text format). Qubit 0 is the most significant bit.
//!
//! Spin-adapted steps are compiled on the unfolded register, one qubit per
//! height bit, and the bits that are constant over the truncated basis are
//! then folded away gate by gate.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::io::Write;

use crate::encode::{BandTerm, Encoding, EncodingStyle, QubitLayout, SlotState, ZPoly};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    X,
    CX,
    PHASE,
}

impl GateKind {
    fn name(self) -> &'static str {
        match self {
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::X => "X",
            GateKind::CX => "CX",
            GateKind::PHASE => "PHASE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<f64>,
}

impl Gate {
    pub fn rx(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RX, q, angle)
    }

    pub fn ry(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RY, q, angle)
    }

    pub fn rz(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::RZ, q, angle)
    }

    pub fn phase(angle: f64) -> Self {
        Self::rotation(GateKind::PHASE, 0, angle)
    }

    pub fn x(q: usize) -> Self {
        Self {
            kind: GateKind::X,
            target: q,
            control: None,
            angle: None,
        }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        assert_ne!(control, target);
        Self {
            kind: GateKind::CX,
            target,
            control: Some(control),
            angle: None,
        }
    }

    fn rotation(kind: GateKind, q: usize, angle: f64) -> Self {
        Self {
            kind,
            target: q,
            control: None,
            angle: Some(angle),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GateKind::CX => write!(f, "CX {} {}", self.control.unwrap(), self.target),
            GateKind::X => write!(f, "X {}", self.target),
            k => write!(f, "{} {} {:.16e}", k.name(), self.target, self.angle.unwrap()),
        }
    }
}

/// Ordered gate list on a fixed register.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn extend(&mut self, other: &Circuit) {
        assert_eq!(self.n_qubits, other.n_qubits);
        self.gates.extend_from_slice(&other.gates);
    }

    pub fn cx_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::CX).count()
    }

    /// Checks qubit indices and angles.
    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            let bad_target = g.kind != GateKind::PHASE && g.target >= self.n_qubits;
            let bad_control = g.control.is_some_and(|c| c >= self.n_qubits || c == g.target);
            let bad_angle = g.angle.is_some_and(|a| !a.is_finite());
            if bad_target || bad_control || bad_angle {
                return Err(Error::Unsupported(format!(
                    "invalid gate '{}' on {} qubits",
                    g, self.n_qubits
                )));
            }
        }
        Ok(())
    }

    /// Text dump: `qubits <n>` then one gate per line.
    pub fn write_gatelist<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "qubits {}", self.n_qubits)?;
        for g in &self.gates {
            writeln!(out, "{}", g)?;
        }
        Ok(())
    }

    pub fn to_gatelist(&self) -> String {
        let mut buf = Vec::new();
        self.write_gatelist(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("gate lists are ascii")
    }

    pub fn parse_gatelist(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty gate list".into()))?;
        let n_qubits = header
            .strip_prefix("qubits ")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad header '{}'", header)))?;
        let mut c = Circuit::new(n_qubits);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let int = |k: usize| -> Result<usize> {
                parts
                    .get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad qubit in '{}'", line)))
            };
            let ang = || -> Result<f64> {
                parts
                    .get(2)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad angle in '{}'", line)))
            };
            let g = match parts.first().copied() {
                Some("RX") => Gate::rx(int(1)?, ang()?),
                Some("RY") => Gate::ry(int(1)?, ang()?),
                Some("RZ") => Gate::rz(int(1)?, ang()?),
                Some("PHASE") => Gate::rotation(GateKind::PHASE, int(1)?, ang()?),
                Some("X") => Gate::x(int(1)?),
                Some("CX") => {
                    let (a, b) = (int(1)?, int(2)?);
                    if a == b {
                        return Err(Error::Parse(format!("CX with equal qubits in '{}'", line)));
                    }
                    Gate::cx(a, b)
                }
                _ => return Err(Error::Parse(format!("unknown gate line '{}'", line))),
            };
            c.push(g);
        }
        c.validate()?;
        Ok(c)
    }

    /// OpenQASM 3 text using the standard gate library.
    pub fn to_qasm(&self) -> String {
        let mut s = String::from("OPENQASM 3.0;\ninclude \"stdgates.inc\";\n");
        s += &format!("qubit[{}] q;\n", self.n_qubits);
        for g in &self.gates {
            let line = match g.kind {
                GateKind::CX => format!("cx q[{}], q[{}];", g.control.unwrap(), g.target),
                GateKind::X => format!("x q[{}];", g.target),
                GateKind::PHASE => format!("gphase({:.16e});", g.angle.unwrap()),
                k => format!(
                    "{}({:.16e}) q[{}];",
                    k.name().to_lowercase(),
                    g.angle.unwrap(),
                    g.target
                ),
            };
            s += &line;
            s.push('\n');
        }
        s
    }
}

/// Bonds (1-based) of the two parity layers: bonds between sites `2k+1` and
/// `2k+2` first, the remaining ones second.
pub fn layer_bonds(n_sites: usize) -> [Vec<usize>; 2] {
    let first = (1..n_sites).filter(|i| i % 2 == 1).collect();
    let second = (1..n_sites).filter(|i| i % 2 == 0).collect();
    [first, second]
}

/// Sequence of `(layer, time fraction)` of one Trotter step.
pub fn layer_schedule(order: u8) -> Result<Vec<(usize, f64)>> {
    match order {
        1 => Ok(vec![(0, 1.0), (1, 1.0)]),
        2 => Ok(vec![(0, 0.5), (1, 1.0), (0, 0.5)]),
        o => Err(Error::Unsupported(format!("Trotter order {}", o))),
    }
}

/// `exp(-i θ (XX + YY + ZZ))` on qubits `(a, b)` with three CX gates.
pub fn heisenberg_block(c: &mut Circuit, a: usize, b: usize, theta: f64) {
    c.push(Gate::rz(b, FRAC_PI_2));
    c.push(Gate::cx(b, a));
    c.push(Gate::rz(a, 2.0 * theta + FRAC_PI_2));
    c.push(Gate::ry(b, FRAC_PI_2 + 2.0 * theta));
    c.push(Gate::cx(a, b));
    c.push(Gate::ry(b, -2.0 * theta - FRAC_PI_2));
    c.push(Gate::cx(b, a));
    c.push(Gate::rz(a, -FRAC_PI_2));
    c.push(Gate::phase(std::f64::consts::FRAC_PI_4));
}

/// One Trotter step of `J Σ s_i · s_{i+1}` on `N` qubits.
pub fn sz_trotter_step(n_sites: usize, dt: f64, order: u8, coupling: f64) -> Result<Circuit> {
    let mut c = Circuit::new(n_sites);
    let layers = layer_bonds(n_sites);
    for (layer, frac) in layer_schedule(order)? {
        for &i in &layers[layer] {
            heisenberg_block(&mut c, i - 1, i, coupling * dt * frac / 4.0);
        }
    }
    Ok(c)
}

/// Emits `exp(-i φ P)` for a diagonal polynomial over register qubits,
/// given as `(mask over qubits, coefficient)` pairs.
fn emit_diagonal(c: &mut Circuit, terms: &[(u64, f64)], phi: f64, prefer: &dyn Fn(usize) -> bool) {
    let mut rest: Vec<(u64, f64)> = terms.iter().copied().filter(|t| t.1 != 0.0).collect();
    loop {
        let constant: f64 = rest.iter().filter(|t| t.0 == 0).map(|t| t.1).sum();
        if constant != 0.0 {
            c.push(Gate::phase(-phi * constant));
        }
        rest.retain(|t| t.0 != 0);
        if rest.is_empty() {
            return;
        }
        let support = rest.iter().fold(0u64, |acc, t| acc | t.0);
        let qubits: Vec<usize> = (0..64).filter(|q| support >> q & 1 == 1).collect();
        let target = qubits
            .iter()
            .rev()
            .copied()
            .find(|&q| prefer(q))
            .unwrap_or(*qubits.last().unwrap());
        let (with, without): (Vec<_>, Vec<_>) = rest.into_iter().partition(|t| t.0 >> target & 1 == 1);
        let controls_mask = with.iter().fold(0u64, |acc, t| acc | t.0) & !(1 << target);
        let controls: Vec<usize> = (0..64).filter(|q| controls_mask >> q & 1 == 1).collect();
        let coefficient = |subset: usize| -> f64 {
            let mut mask = 1u64 << target;
            for (k, &q) in controls.iter().enumerate() {
                if subset >> k & 1 == 1 {
                    mask |= 1 << q;
                }
            }
            with.iter().filter(|t| t.0 == mask).map(|t| t.1).sum()
        };
        // walk all control subsets in Gray-code order, the parity of the
        // current subset accumulating on the target
        let k = controls.len();
        for step in 0..1usize << k {
            if step > 0 {
                let flip = step.trailing_zeros() as usize;
                c.push(Gate::cx(controls[flip], target));
            }
            let gray = step ^ (step >> 1);
            let v = coefficient(gray);
            if v != 0.0 {
                c.push(Gate::rz(target, 2.0 * phi * v));
            }
        }
        if k > 0 {
            c.push(Gate::cx(controls[k - 1], target));
        }
        rest = without;
    }
}

fn slot_poly_to_qubits(poly: &ZPoly, layout: &QubitLayout) -> Vec<(u64, f64)> {
    poly.terms()
        .map(|(mask, coeff)| {
            let mut qmask = 0u64;
            for s in 0..layout.n_slots() {
                if mask >> s & 1 == 1 {
                    match layout.slot(s) {
                        SlotState::Qubit(q) => qmask |= 1 << q,
                        SlotState::Fixed(_) => unreachable!("fixed slots are substituted"),
                    }
                }
            }
            (qmask, coeff)
        })
        .collect()
}

/// Emits `exp(-i φ T)` for one band term on the layout's register.
pub fn emit_band_term(
    c: &mut Circuit,
    layout: &QubitLayout,
    term: &BandTerm,
    phi: f64,
    prefer: &dyn Fn(usize) -> bool,
) {
    match term {
        BandTerm::Diagonal { poly, .. } => {
            emit_diagonal(c, &slot_poly_to_qubits(poly, layout), phi, prefer);
        }
        BandTerm::Mix { mix, .. } => {
            let SlotState::Qubit(t) = layout.slot(mix.target) else {
                unreachable!("mix targets are always qubits")
            };
            let theta = mix.b.atan2(mix.a);
            let zt = mix.control.times_z(1 << mix.target);
            c.push(Gate::ry(t, -theta));
            emit_diagonal(c, &slot_poly_to_qubits(&zt, layout), phi, &|q| q == t);
            c.push(Gate::ry(t, theta));
        }
    }
}

/// Drops the boundary qubits of an unfolded circuit by tracking their
/// classical values; `relabel` maps surviving qubits to the folded register.
fn fold(unfolded: &Circuit, pinned: &[Option<bool>], relabel: &[Option<usize>], n_out: usize) -> Result<Circuit> {
    let mut known = pinned.to_vec();
    let mut out = Circuit::new(n_out);
    let mut phase = 0.0;
    let lost = |g: &Gate| Error::Unsupported(format!("gate '{}' would disturb a boundary constant", g));
    for g in &unfolded.gates {
        match g.kind {
            GateKind::PHASE => phase += g.angle.unwrap(),
            GateKind::X => match known[g.target] {
                Some(b) => known[g.target] = Some(!b),
                None => out.push(Gate::x(relabel[g.target].unwrap())),
            },
            GateKind::CX => {
                let ctl = g.control.unwrap();
                match (known[ctl], known[g.target]) {
                    (Some(false), _) => {}
                    (Some(true), Some(b)) => known[g.target] = Some(!b),
                    (Some(true), None) => out.push(Gate::x(relabel[g.target].unwrap())),
                    (None, None) => out.push(Gate::cx(relabel[ctl].unwrap(), relabel[g.target].unwrap())),
                    (None, Some(_)) => return Err(lost(g)),
                }
            }
            GateKind::RZ => match known[g.target] {
                Some(b) => {
                    let a = g.angle.unwrap();
                    phase += if b { a / 2.0 } else { -a / 2.0 };
                }
                None => out.push(Gate::rz(relabel[g.target].unwrap(), g.angle.unwrap())),
            },
            GateKind::RX | GateKind::RY => match known[g.target] {
                Some(_) => return Err(lost(g)),
                None => out.push(Gate::rotation(g.kind, relabel[g.target].unwrap(), g.angle.unwrap())),
            },
        }
    }
    if known != pinned {
        return Err(Error::Unsupported("boundary constants not restored after folding".into()));
    }
    if phase != 0.0 {
        out.push(Gate::phase(phase));
    }
    Ok(out)
}

/// Compiles Trotter steps of a band-truncated spin-adapted Hamiltonian.
#[derive(Debug, Clone)]
pub struct CsfCompiler {
    unfolded: Encoding,
    folded: Encoding,
    pinned: Vec<Option<bool>>,
    relabel: Vec<Option<usize>>,
    coupling: f64,
}

impl CsfCompiler {
    pub fn new(n_sites: usize, total_spin_x2: u32, trunc_x2: u32, coupling: f64) -> Result<Self> {
        let folded = Encoding::new(n_sites, total_spin_x2, trunc_x2, EncodingStyle::Simplified)?;
        let unfolded = Encoding::new_unfolded(n_sites, total_spin_x2, trunc_x2, EncodingStyle::Simplified)?;
        let ul = unfolded.layout();
        let fl = folded.layout();
        let mut pinned = vec![None; ul.n_qubits()];
        let mut relabel = vec![None; ul.n_qubits()];
        for (q, &slot) in ul.qubit_slots().iter().enumerate() {
            match fl.slot(slot) {
                SlotState::Fixed(b) => pinned[q] = Some(b),
                SlotState::Qubit(fq) => relabel[q] = Some(fq),
            }
        }
        Ok(Self {
            unfolded,
            folded,
            pinned,
            relabel,
            coupling,
        })
    }

    /// Encoding on the folded register, the one the circuits act on.
    pub fn encoding(&self) -> &Encoding {
        &self.folded
    }

    pub fn unfolded_encoding(&self) -> &Encoding {
        &self.unfolded
    }

    pub fn n_qubits(&self) -> usize {
        self.folded.layout().n_qubits()
    }

    /// Boundary constants of the unfolded register, `None` for live qubits.
    pub fn pinned(&self) -> &[Option<bool>] {
        &self.pinned
    }

    /// One step on the unfolded register, before constant folding.
    pub fn unfolded_step(&self, dt: f64, weight: &dyn Fn(u32) -> f64, order: u8) -> Result<Circuit> {
        let layout = self.unfolded.layout();
        let mut c = Circuit::new(layout.n_qubits());
        let prefer = |q: usize| self.pinned[q].is_none();
        let layers = layer_bonds(self.unfolded.n_sites());
        for (layer, frac) in layer_schedule(order)? {
            for &band in self.unfolded.bands() {
                let w = weight(band);
                let phi = 0.5 * self.coupling * w * dt * frac;
                if phi == 0.0 {
                    continue;
                }
                for t in self.unfolded.terms() {
                    if t.band_x2() == band && layers[layer].contains(&t.bond()) {
                        emit_band_term(&mut c, layout, t, phi, &prefer);
                    }
                }
            }
        }
        let constant = self.unfolded.constant(self.coupling);
        if constant != 0.0 && dt != 0.0 {
            c.push(Gate::phase(-constant * dt));
        }
        Ok(c)
    }

    /// One folded step with per-band time scaling `dt * weight(s)`.
    pub fn step(&self, dt: f64, weight: &dyn Fn(u32) -> f64, order: u8) -> Result<Circuit> {
        let unfolded = self.unfolded_step(dt, weight, order)?;
        fold(&unfolded, &self.pinned, &self.relabel, self.n_qubits())
    }
}

/// One Trotter step in a truncated spin-adapted basis, all bands at weight 1.
pub fn csf_trotter_step(
    n_sites: usize,
    total_spin_x2: u32,
    trunc_x2: u32,
    dt: f64,
    order: u8,
    coupling: f64,
) -> Result<Circuit> {
    CsfCompiler::new(n_sites, total_spin_x2, trunc_x2, coupling)?.step(dt, &|_| 1.0, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{circuit_unitary, StateVector};
    use crate::C64;
    use nalgebra::DMatrix;

    fn phase_free_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn two_site_block_is_exact() {
        let h = crate::oracle::sz_hamiltonian_matrix(2, 1.0).unwrap().map(|x| C64::new(x, 0.0));
        for dt in [0.0, 0.3, 1.7] {
            for order in [1, 2] {
                let c = sz_trotter_step(2, dt, order, 1.0).unwrap();
                let u = circuit_unitary(&c).unwrap();
                let exact = crate::linalg::expm_hermitian(&h, dt);
                assert!(phase_free_distance(&u, &exact) < 1e-12, "dt {} order {}", dt, order);
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let c = sz_trotter_step(4, 0.0, 2, 1.0).unwrap();
        let u = circuit_unitary(&c).unwrap();
        assert!((u - DMatrix::identity(16, 16)).norm() < 1e-12);
        let c = csf_trotter_step(8, 0, 3, 0.0, 1, 1.0).unwrap();
        assert!(c.gates.is_empty());
        assert_eq!(c.n_qubits, 5);
    }

    #[test]
    fn gatelist_round_trip() {
        let c = csf_trotter_step(8, 0, 3, 0.1, 2, 1.0).unwrap();
        let text = c.to_gatelist();
        let back = Circuit::parse_gatelist(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(Circuit::new(3).to_gatelist(), "qubits 3\n");
        assert!(c.to_qasm().contains("qubit[5] q;"));
    }

    #[test]
    fn register_sizes() {
        assert_eq!(csf_trotter_step(8, 0, 2, 0.1, 1, 1.0).unwrap().n_qubits, 3);
        assert_eq!(csf_trotter_step(8, 0, 3, 0.1, 1, 1.0).unwrap().n_qubits, 5);
        assert_eq!(csf_trotter_step(8, 0, 4, 0.1, 1, 1.0).unwrap().n_qubits, 6);
        assert_eq!(CsfCompiler::new(8, 0, 3, 1.0).unwrap().unfolded_encoding().layout().n_qubits(), 9);
    }

    #[test]
    fn folding_preserves_action() {
        for (n, s2, t) in [(8, 0, 3), (8, 2, 4), (6, 0, 4)] {
            let comp = CsfCompiler::new(n, s2, t, 1.0).unwrap();
            let unfolded = comp.unfolded_step(0.37, &|_| 1.0, 2).unwrap();
            let folded = comp.step(0.37, &|_| 1.0, 2).unwrap();
            let ul = comp.unfolded_encoding().layout();
            let fl = comp.encoding().layout();
            for p in comp.encoding().basis().paths() {
                let fb = fl.encode(p).unwrap();
                let ub = ul.encode(p).unwrap();
                let mut a = StateVector::basis_state(fl.n_qubits(), fb as usize);
                a.apply_circuit(&folded);
                let mut b = StateVector::basis_state(ul.n_qubits(), ub as usize);
                b.apply_circuit(&unfolded);
                for (idx, amp) in b.amplitudes().iter().enumerate() {
                    if amp.norm() < 1e-13 {
                        continue;
                    }
                    let q = ul.decode(idx as u64).expect("unfolded step left the physical sector");
                    let fidx = fl.encode(&q).unwrap() as usize;
                    assert!((a.amplitudes()[fidx] - amp).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn band_terms_compile_to_exponentials() {
        let phi = 0.41;
        for (n, t) in [(4, 4), (6, 3), (6, 2)] {
            let enc = Encoding::new_unfolded(n, 0, t, EncodingStyle::Simplified).unwrap();
            let layout = enc.layout();
            for term in enc.terms() {
                let mut c = Circuit::new(layout.n_qubits());
                emit_band_term(&mut c, layout, term, phi, &|_| true);
                let u = circuit_unitary(&c).unwrap();
                let h = enc.term_pauli_sum(term, 2.0).to_dense().unwrap();
                let expect = crate::linalg::expm_hermitian(&h, phi);
                assert!(phase_free_distance(&u, &expect) < 1e-10, "{:?}", term);
            }
        }
    }
}
