//! Two-party protocols with pre-shared maximally entangled states: reflection
//! about `Φ_p` through a quantum expander, interaction-picture LCU evolution,
//! distributed ground-state measurement and the compression construction.
//!
//! Two engines are provided. The literal engine keeps every register of a
//! [`PartyState`] and applies each protocol step as written; it is limited to
//! small EPR dimensions. The reduced engine never materialises the EPR
//! registers: with exact reflections the state stays in the span of
//! `|ℓ⟩|ℓ⟩ ⊗ system`, so one segment acts on `|Φ⟩ ⊗ ψ` as
//! `|Φ⟩ ⊗ Xψ + junk` with `X = 3W − 4WW†W` and `W = ⟨Φ|SEL|Φ⟩`. The junk norm
//! and the expander error enter certified error bounds.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agsp_qpe::{QpeConfig, QpeKernel};
use crate::artifact::{AgspArtifact, Provenance};
use crate::error::{Error, Result};
use crate::hamlib::{Bipartition, Caps, SplitHamiltonian, UnitaryDecomposition};
use crate::linalg::{self, CMat, CVec};
use crate::scalar::{cis, cplx, creal, Real};
use crate::spectra::{fix_phase, Eigensystem};

// ---------------------------------------------------------------------------
// registers and ledger

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Owner {
    Alice,
    Bob,
}

impl Owner {
    pub fn other(self) -> Owner {
        match self {
            Owner::Alice => Owner::Bob,
            Owner::Bob => Owner::Alice,
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Owner::Alice => "alice",
            Owner::Bob => "bob",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    pub name: String,
    pub dim: usize,
    pub owner: Owner,
    /// Half of a pre-shared maximally entangled pair.
    pub epr: bool,
}

impl Register {
    pub fn new(name: impl Into<String>, dim: usize, owner: Owner) -> Self {
        Register { name: name.into(), dim, owner, epr: false }
    }
}

/// Joint pure state of both parties, one tensor factor per register
/// (first register most significant).
#[derive(Clone, Debug)]
pub struct PartyState<T: Real> {
    pub registers: Vec<Register>,
    pub amplitudes: CVec<T>,
    /// Squared norm removed by discarding registers onto a reference state.
    pub discarded_weight: f64,
}

/// Squared-norm tolerance for [`PartyState`] normalisation.
pub const NORM_TOL: f64 = 1e-10;

impl<T: Real> PartyState<T> {
    pub fn new(registers: Vec<Register>, amplitudes: CVec<T>) -> Result<Self> {
        let dim: usize = registers.iter().map(|r| r.dim).product();
        if dim != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!("registers span {dim} but state has {}", amplitudes.len())));
        }
        for (i, r) in registers.iter().enumerate() {
            if registers[..i].iter().any(|q| q.name == r.name) {
                return Err(Error::InvalidParameter(format!("duplicate register `{}`", r.name)));
            }
        }
        let ps = PartyState { registers, amplitudes, discarded_weight: 0.0 };
        ps.check_norm()?;
        Ok(ps)
    }

    /// Product of one Alice and one Bob system register.
    pub fn bipartite(da: usize, db: usize, state: CVec<T>) -> Result<Self> {
        Self::new(vec![Register::new(SYS_A, da, Owner::Alice), Register::new(SYS_B, db, Owner::Bob)], state)
    }

    pub fn check_norm(&self) -> Result<()> {
        let n2 = self.amplitudes.norm_squared().as_f64() + self.discarded_weight;
        if (n2 - 1.0).abs() > NORM_TOL.max(1e-6 * self.discarded_weight) {
            return Err(Error::NotNormalized { norm: n2.sqrt() });
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|r| r.dim).collect()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.registers.iter().position(|r| r.name == name).ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        Ok(&self.registers[self.position(name)?])
    }

    /// Appends a register prepared in `state`.
    pub fn add_register(&mut self, reg: Register, state: &CVec<T>) -> Result<()> {
        if state.len() != reg.dim {
            return Err(Error::DimensionMismatch(format!("register `{}` has dimension {}", reg.name, reg.dim)));
        }
        if self.position(&reg.name).is_ok() {
            return Err(Error::InvalidParameter(format!("duplicate register `{}`", reg.name)));
        }
        self.amplitudes = linalg::kron_vec(&self.amplitudes, state);
        self.registers.push(reg);
        Ok(())
    }

    /// Appends a pre-shared `Φ_p` pair: `name_a` for Alice, `name_b` for Bob.
    pub fn add_epr_pair(&mut self, name_a: &str, name_b: &str, p: usize) -> Result<()> {
        let phi = linalg::max_entangled::<T>(p);
        self.amplitudes = linalg::kron_vec(&self.amplitudes, &phi);
        self.registers.push(Register { name: name_a.into(), dim: p, owner: Owner::Alice, epr: true });
        self.registers.push(Register { name: name_b.into(), dim: p, owner: Owner::Bob, epr: true });
        Ok(())
    }

    /// Local operation by `party` on the named registers (tensor order as listed).
    pub fn apply(&mut self, party: Owner, names: &[&str], op: &CMat<T>) -> Result<()> {
        let pos = names.iter().map(|n| self.position(n)).collect::<Result<Vec<_>>>()?;
        for &p in &pos {
            if self.registers[p].owner != party {
                return Err(Error::Ownership(format!(
                    "{party} cannot act on `{}` held by {}",
                    self.registers[p].name, self.registers[p].owner
                )));
            }
        }
        self.apply_at(&pos, op)
    }

    /// Applies `op` regardless of ownership. Used for reference computations,
    /// never by a protocol step.
    pub fn apply_unchecked(&mut self, names: &[&str], op: &CMat<T>) -> Result<()> {
        let pos = names.iter().map(|n| self.position(n)).collect::<Result<Vec<_>>>()?;
        self.apply_at(&pos, op)
    }

    fn apply_at(&mut self, pos: &[usize], op: &CMat<T>) -> Result<()> {
        let d: usize = pos.iter().map(|&p| self.registers[p].dim).product();
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch(format!("operator of size {} on registers of dimension {d}", op.nrows())));
        }
        self.amplitudes = linalg::apply_local_vec(op, pos, &self.dims(), &self.amplitudes);
        Ok(())
    }

    /// Moves a register to the other party and records it in `ledger`.
    pub fn send(&mut self, name: &str, from: Owner, label: &str, ledger: &mut ProtocolTranscript) -> Result<()> {
        let p = self.position(name)?;
        let reg = &mut self.registers[p];
        if reg.owner != from {
            return Err(Error::Ownership(format!("{from} cannot send `{name}` held by {}", reg.owner)));
        }
        reg.owner = from.other();
        ledger.record_send(label, from, name, linalg::ceil_log2(reg.dim as u128) as u64);
        Ok(())
    }

    /// Removes a register by projecting it onto `reference`; the lost squared
    /// norm is added to `discarded_weight`.
    pub fn discard(&mut self, party: Owner, name: &str, reference: &CVec<T>) -> Result<f64> {
        let p = self.position(name)?;
        if self.registers[p].owner != party {
            return Err(Error::Ownership(format!("{party} cannot discard `{name}`")));
        }
        let d = self.registers[p].dim;
        let stride = linalg::strides(&self.dims())[p];
        let n_new = self.amplitudes.len() / d;
        let before = self.amplitudes.norm_squared().as_f64();
        let out = CVec::<T>::from_fn(n_new, |i, _| {
            let base = (i / stride) * stride * d + i % stride;
            (0..d).fold(cplx(T::zero(), T::zero()), |acc, x| acc + reference[x].conj() * self.amplitudes[base + x * stride])
        });
        self.amplitudes = out;
        self.registers.remove(p);
        let lost = (before - self.amplitudes.norm_squared().as_f64()).max(0.0);
        self.discarded_weight += lost;
        Ok(lost)
    }

    /// Amplitudes of the listed registers when every other register has been
    /// removed.
    pub fn reduced_vector(&self, names: &[&str]) -> Result<CVec<T>> {
        if names.len() != self.registers.len() {
            return Err(Error::InvalidParameter("reduced_vector needs every remaining register".into()));
        }
        let pos = names.iter().map(|n| self.position(n)).collect::<Result<Vec<_>>>()?;
        let dims = self.dims();
        let offs = linalg::config_offsets(&pos, &dims);
        Ok(CVec::<T>::from_fn(offs.len(), |i, _| self.amplitudes[offs[i]]))
    }
}

pub const SYS_A: &str = "sys_a";
pub const SYS_B: &str = "sys_b";
pub const EPR_A: &str = "epr_a";
pub const EPR_B: &str = "epr_b";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
    Local,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AliceToBob => "alice->bob",
            Direction::BobToAlice => "bob->alice",
            Direction::Local => "local",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub label: String,
    pub direction: Direction,
    pub qubits: u64,
    /// Moved registers with their size in qubits (`⌈log2 dim⌉`).
    pub registers: Vec<(String, u64)>,
}

/// Ordered communication ledger. Only ownership changes cost qubits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProtocolTranscript {
    pub steps: Vec<Step>,
    pub total_cost: u64,
    /// `log2 p` of the pre-shared entanglement used; never part of the cost.
    pub epr_consumed: u64,
}

impl ProtocolTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_local(&mut self, label: impl Into<String>) {
        self.steps.push(Step { label: label.into(), direction: Direction::Local, qubits: 0, registers: vec![] });
    }

    pub fn record_send(&mut self, label: impl Into<String>, from: Owner, register: &str, qubits: u64) {
        let direction = match from {
            Owner::Alice => Direction::AliceToBob,
            Owner::Bob => Direction::BobToAlice,
        };
        self.total_cost += qubits;
        self.steps.push(Step { label: label.into(), direction, qubits, registers: vec![(register.to_string(), qubits)] });
    }

    pub fn note_epr(&mut self, ebits: u64) {
        self.epr_consumed = self.epr_consumed.max(ebits);
    }

    pub fn append(&mut self, other: ProtocolTranscript) {
        self.total_cost += other.total_cost;
        self.epr_consumed = self.epr_consumed.max(other.epr_consumed);
        self.steps.extend(other.steps);
    }

    /// Recomputes the cost from the moved registers alone.
    pub fn replay_cost(&self) -> u64 {
        self.steps.iter().filter(|s| s.direction != Direction::Local).flat_map(|s| s.registers.iter().map(|r| r.1)).sum()
    }

    pub fn communication_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.direction != Direction::Local).count()
    }

    /// `step_index<TAB>label<TAB>direction<TAB>qubits<TAB>cumulative`, one line
    /// per step.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let mut cum = 0u64;
        for (i, s) in self.steps.iter().enumerate() {
            cum += s.qubits;
            out.push_str(&format!("{i}\t{}\t{}\t{}\t{cum}\n", s.label.replace(['\t', '\n'], " "), s.direction, s.qubits));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// quantum expander and reflection about Φ_p

#[derive(Clone, Debug)]
pub struct QuantumExpander<T: Real> {
    pub dimension: usize,
    pub degree: usize,
    pub unitaries: Vec<CMat<T>>,
    /// `‖(1/d) Σ_j U_j ⊗ U_j* − Φ_p‖`.
    pub measured_epsilon: f64,
    pub seed: u64,
}

/// `(1/d) Σ_j U_j ⊗ U_j*` on `C^p ⊗ C^p`.
pub fn twirl<T: Real>(unitaries: &[CMat<T>]) -> CMat<T> {
    let p = unitaries[0].nrows();
    let mut t = linalg::zeros::<T>(p * p, p * p);
    for u in unitaries {
        t += linalg::kron(u, &u.map(|z| z.conj()));
    }
    t / creal(T::from_usize_lossy(unitaries.len()))
}

pub fn expander_epsilon<T: Real>(unitaries: &[CMat<T>]) -> f64 {
    let p = unitaries[0].nrows();
    let phi = linalg::max_entangled::<T>(p);
    linalg::op_norm(&(twirl(unitaries) - linalg::outer(&phi, &phi))).as_f64()
}

/// `d` Haar-random unitaries on `C^p` from a seeded generator.
pub fn build_expander<T: Real>(p: usize, d: usize, seed: u64, caps: &Caps) -> Result<QuantumExpander<T>> {
    if p == 0 || d == 0 {
        return Err(Error::InvalidParameter("expander needs p, d ≥ 1".into()));
    }
    caps.check_operator("expander superoperator", p * p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unitaries: Vec<CMat<T>> = (0..d).map(|_| linalg::haar_unitary::<T, _>(p, &mut rng)).collect();
    let measured_epsilon = if p == 1 { 0.0 } else { expander_epsilon(&unitaries) };
    Ok(QuantumExpander { dimension: p, degree: d, unitaries, measured_epsilon, seed })
}

impl<T: Real> QuantumExpander<T> {
    /// The `d^m` products `U_{j_1} ⋯ U_{j_m}`; their twirl is the `m`-th power
    /// of the original, so the error is at most `ε^m`.
    pub fn powered(&self, m: u32, caps: &Caps) -> Result<QuantumExpander<T>> {
        let count = (self.degree as u128).checked_pow(m).unwrap_or(u128::MAX);
        caps.check_operator("powered expander ancilla", count.min(usize::MAX as u128) as usize)?;
        let mut list = vec![linalg::eye::<T>(self.dimension)];
        for _ in 0..m {
            list = list.iter().flat_map(|a| self.unitaries.iter().map(move |u| u * a)).collect();
        }
        let measured_epsilon = if self.dimension == 1 { 0.0 } else { expander_epsilon(&list) };
        Ok(QuantumExpander { dimension: self.dimension, degree: list.len(), unitaries: list, measured_epsilon, seed: self.seed })
    }

    /// Qubits in the exchanged ancilla register, `⌈log2 d⌉`.
    pub fn register_qubits(&self) -> u64 {
        linalg::ceil_log2(self.degree as u128) as u64
    }

    /// `Σ_j |j⟩⟨j| ⊗ f(U_j)`.
    fn controlled(&self, f: impl Fn(&CMat<T>) -> CMat<T>) -> CMat<T> {
        let (d, p) = (self.degree, self.dimension);
        let mut m = linalg::zeros::<T>(d * p, d * p);
        for (j, u) in self.unitaries.iter().enumerate() {
            m.view_mut((j * p, j * p), (p, p)).copy_from(&f(u));
        }
        m
    }
}

/// Smallest power `m` with `ε^m ≤ target`.
pub fn expander_power_for(epsilon: f64, target: f64) -> Result<u32> {
    if target <= 0.0 {
        return Err(Error::BudgetInfeasible(format!("expander target {target:e} must be positive")));
    }
    if epsilon <= target {
        return Ok(1);
    }
    if epsilon >= 1.0 {
        return Err(Error::BudgetInfeasible(format!("expander error {epsilon} is not below 1")));
    }
    let m = (target.ln() / epsilon.ln()).ceil().max(1.0);
    if m > MAX_EXPANDER_POWER as f64 {
        return Err(Error::BudgetInfeasible(format!("expander would need power {m} > {MAX_EXPANDER_POWER}")));
    }
    Ok(m as u32)
}

pub const MAX_EXPANDER_POWER: u32 = 256;

/// Qubits of an ancilla of dimension `d^m`.
pub fn powered_register_qubits(d: usize, m: u32) -> u64 {
    if d <= 1 || m == 0 {
        return 0;
    }
    if d.is_power_of_two() {
        return m as u64 * d.trailing_zeros() as u64;
    }
    match (d as u128).checked_pow(m) {
        Some(v) => linalg::ceil_log2(v) as u64,
        None => (m as f64 * (d as f64).log2()).ceil() as u64,
    }
}

const EXPANDER_ANCILLA: &str = "expander_ancilla";

/// Approximate `2Φ_p − 𝟙` on the pair (`reg_a`, `reg_b`) by the expander
/// protocol: `V`, send, `V*`, reflect about `|s⟩`, uncompute, send back,
/// discard. Costs `2⌈log2 d⌉` qubits.
pub fn reflect_mes<T: Real>(ps: &mut PartyState<T>, reg_a: &str, reg_b: &str, exp: &QuantumExpander<T>) -> Result<ProtocolTranscript> {
    let (ra, rb) = (ps.register(reg_a)?.clone(), ps.register(reg_b)?.clone());
    if ra.owner != Owner::Alice || rb.owner != Owner::Bob {
        return Err(Error::Ownership(format!("reflection needs `{reg_a}` at alice and `{reg_b}` at bob")));
    }
    if ra.dim != exp.dimension || rb.dim != exp.dimension {
        return Err(Error::DimensionMismatch(format!(
            "expander acts on dimension {} but registers have {} and {}",
            exp.dimension, ra.dim, rb.dim
        )));
    }
    let mut ledger = ProtocolTranscript::new();
    let d = exp.degree;
    let s = CVec::<T>::from_element(d, creal(T::one() / T::from_usize_lossy(d).sqrt()));
    ps.add_register(Register::new(EXPANDER_ANCILLA, d, Owner::Alice), &s)?;
    ledger.record_local("alice prepares |s>");
    ps.apply(Owner::Alice, &[EXPANDER_ANCILLA, reg_a], &exp.controlled(|u| u.clone()))?;
    ledger.record_local("alice applies V");
    ps.send(EXPANDER_ANCILLA, Owner::Alice, "send expander ancilla", &mut ledger)?;
    ps.apply(Owner::Bob, &[EXPANDER_ANCILLA, reg_b], &exp.controlled(|u| u.map(|z| z.conj())))?;
    ledger.record_local("bob applies V*");
    let refl = linalg::outer(&s, &s) * creal(T::lit(2.0)) - linalg::eye::<T>(d);
    ps.apply(Owner::Bob, &[EXPANDER_ANCILLA], &refl)?;
    ledger.record_local("bob reflects about |s>");
    ps.apply(Owner::Bob, &[EXPANDER_ANCILLA, reg_b], &exp.controlled(|u| u.transpose()))?;
    ledger.record_local("bob uncomputes V*");
    ps.send(EXPANDER_ANCILLA, Owner::Bob, "return expander ancilla", &mut ledger)?;
    ps.apply(Owner::Alice, &[EXPANDER_ANCILLA, reg_a], &exp.controlled(|u| u.adjoint()))?;
    ledger.record_local("alice uncomputes V");
    ps.discard(Owner::Alice, EXPANDER_ANCILLA, &s)?;
    ledger.record_local("alice discards ancilla");
    Ok(ledger)
}

/// Exact `2Φ_p − 𝟙` on `C^p ⊗ C^p`.
pub fn exact_mes_reflection<T: Real>(p: usize) -> CMat<T> {
    let phi = linalg::max_entangled::<T>(p);
    linalg::outer(&phi, &phi) * creal(T::lit(2.0)) - linalg::eye::<T>(p * p)
}

/// Ledger entries of one expander reflection with an ancilla of `qubits`.
fn record_reflection(ledger: &mut ProtocolTranscript, label: &str, qubits: u64) {
    ledger.record_local(format!("{label}: alice applies V"));
    ledger.record_send(format!("{label}: send expander ancilla"), Owner::Alice, EXPANDER_ANCILLA, qubits);
    ledger.record_local(format!("{label}: bob applies V*, reflects, uncomputes"));
    ledger.record_send(format!("{label}: return expander ancilla"), Owner::Bob, EXPANDER_ANCILLA, qubits);
    ledger.record_local(format!("{label}: alice uncomputes and discards"));
}

// ---------------------------------------------------------------------------
// interaction picture

/// Index maps between the site ordering of a Hamiltonian and the `A ⊗ B`
/// ordering used by the two parties.
#[derive(Clone, Debug)]
pub struct BipartiteFrame {
    pub index_a: Vec<usize>,
    pub index_b: Vec<usize>,
}

impl BipartiteFrame {
    pub fn new(cut: &Bipartition, dims: &[usize]) -> Self {
        let (index_a, index_b) = linalg::bipartite_index(&cut.side_a, &cut.side_b, dims);
        BipartiteFrame { index_a, index_b }
    }

    pub fn da(&self) -> usize {
        self.index_a.len()
    }

    pub fn db(&self) -> usize {
        self.index_b.len()
    }

    fn full(&self, x: usize) -> usize {
        self.index_a[x / self.db()] + self.index_b[x % self.db()]
    }

    pub fn state_to_ab<T: Real>(&self, v: &CVec<T>) -> CVec<T> {
        CVec::<T>::from_fn(self.da() * self.db(), |x, _| v[self.full(x)])
    }

    pub fn state_from_ab<T: Real>(&self, v: &CVec<T>) -> CVec<T> {
        let mut out = CVec::<T>::zeros(v.len());
        for x in 0..v.len() {
            out[self.full(x)] = v[x];
        }
        out
    }

    pub fn op_to_ab<T: Real>(&self, m: &CMat<T>) -> CMat<T> {
        let n = self.da() * self.db();
        CMat::<T>::from_fn(n, n, |x, y| m[(self.full(x), self.full(y))])
    }

    pub fn op_from_ab<T: Real>(&self, m: &CMat<T>) -> CMat<T> {
        let n = m.nrows();
        let mut out = linalg::zeros::<T>(n, n);
        for x in 0..n {
            for y in 0..n {
                out[(self.full(x), self.full(y))] = m[(x, y)];
            }
        }
        out
    }
}

/// Boundary terms with equal `β`; their interaction-picture sums share one
/// Dyson coefficient.
#[derive(Clone, Debug)]
pub struct BetaGroup<T: Real> {
    pub beta: f64,
    pub members: Vec<usize>,
    /// `Σ_{j∈g} u_j^A ⊗ u_j^B` in the `H_0` eigenbasis.
    pub summed: CMat<T>,
}

/// `H = H_A + H_B + Σ_j β_j u_j^A ⊗ u_j^B` in `A ⊗ B` order, with the data
/// needed for `H_I(s) = e^{isH_0} H_∂ e^{−isH_0}`.
#[derive(Clone, Debug)]
pub struct InteractionPicture<T: Real> {
    pub frame: BipartiteFrame,
    pub h_a: CMat<T>,
    pub h_b: CMat<T>,
    /// Full Hamiltonian in `A ⊗ B` order.
    pub h: CMat<T>,
    pub dec: UnitaryDecomposition<T>,
    /// Boundary factors embedded into the whole side spaces.
    pub u_a: Vec<CMat<T>>,
    pub u_b: Vec<CMat<T>>,
    pub beta: Vec<f64>,
    /// Eigenvalues of `H_0 = H_A + H_B` in product order.
    pub energies: Vec<f64>,
    /// Product eigenbasis of `H_0` (columns).
    pub basis: CMat<T>,
    pub groups: Vec<BetaGroup<T>>,
}

impl<T: Real> InteractionPicture<T> {
    pub fn new(sh: &SplitHamiltonian<T>, dec: UnitaryDecomposition<T>, caps: &Caps) -> Result<Self> {
        let dims = sh.full.dims();
        let frame = BipartiteFrame::new(&sh.cut, &dims);
        let (da, db) = (frame.da(), frame.db());
        caps.check_operator("two-party system", da * db)?;
        let mut h_a = sh.h_a().dense();
        let h_b = sh.h_b().dense();
        // constant parts of the boundary are local: fold them into H_A
        let mut dec = dec;
        let mut kept = Vec::with_capacity(dec.len());
        for (j, (fa, fb)) in dec.factors.iter().enumerate() {
            let (ca, cb) = (fa[(0, 0)], fb[(0, 0)]);
            let is_id = |m: &CMat<T>, c: crate::scalar::C<T>| (m - linalg::eye::<T>(m.nrows()) * c).norm().as_f64() < 1e-12;
            if is_id(fa, ca) && is_id(fb, cb) {
                let shift = (ca * cb * creal(dec.coefficients[j])).re;
                h_a += linalg::eye::<T>(h_a.nrows()) * creal(shift);
            } else {
                kept.push(j);
            }
        }
        if kept.len() != dec.len() {
            dec = UnitaryDecomposition {
                coefficients: kept.iter().map(|&j| dec.coefficients[j]).collect(),
                factors: kept.iter().map(|&j| dec.factors[j].clone()).collect(),
                sites_a: dec.sites_a.clone(),
                sites_b: dec.sites_b.clone(),
                labels: kept.iter().map(|&j| dec.labels[j].clone()).collect(),
            };
        }
        let h = frame.op_to_ab(&sh.full.dense());
        let dims_a: Vec<usize> = sh.cut.side_a.iter().map(|&s| dims[s]).collect();
        let dims_b: Vec<usize> = sh.cut.side_b.iter().map(|&s| dims[s]).collect();
        let pos_a: Vec<usize> = dec.sites_a.iter().map(|s| sh.cut.side_a.iter().position(|x| x == s).unwrap()).collect();
        let pos_b: Vec<usize> = dec.sites_b.iter().map(|s| sh.cut.side_b.iter().position(|x| x == s).unwrap()).collect();
        let u_a: Vec<CMat<T>> = dec.factors.iter().map(|f| linalg::embed(&f.0, &pos_a, &dims_a)).collect();
        let u_b: Vec<CMat<T>> = dec.factors.iter().map(|f| linalg::embed(&f.1, &pos_b, &dims_b)).collect();
        let beta: Vec<f64> = dec.coefficients.iter().map(|b| b.as_f64()).collect();

        let mut rebuilt = linalg::kron(&h_a, &linalg::eye(db)) + linalg::kron(&linalg::eye(da), &h_b);
        for j in 0..beta.len() {
            rebuilt += linalg::kron(&u_a[j], &u_b[j]) * creal(dec.coefficients[j]);
        }
        let resid = linalg::op_norm(&(&rebuilt - &h)).as_f64();
        if resid > 1e-9 {
            return Err(Error::Internal(format!("H_A + H_B + H_∂ differs from H by {resid:e}")));
        }

        let (ea, va) = linalg::eigh(&h_a);
        let (eb, vb) = linalg::eigh(&h_b);
        let energies: Vec<f64> = ea.iter().flat_map(|a| eb.iter().map(move |b| (*a + *b).as_f64())).collect();
        let basis = linalg::kron(&va, &vb);

        let mut groups: Vec<BetaGroup<T>> = Vec::new();
        for (j, &b) in beta.iter().enumerate() {
            let term = basis.adjoint() * linalg::kron(&u_a[j], &u_b[j]) * &basis;
            match groups.iter_mut().find(|g| (g.beta - b).abs() <= 1e-12 * b.max(1.0)) {
                Some(g) => {
                    g.members.push(j);
                    g.summed += term;
                }
                None => groups.push(BetaGroup { beta: b, members: vec![j], summed: term }),
            }
        }
        Ok(InteractionPicture { frame, h_a, h_b, h, dec, u_a, u_b, beta, energies, basis, groups })
    }

    /// Uses [`crate::hamlib::decompose_boundary`] for the boundary terms.
    pub fn of(sh: &SplitHamiltonian<T>, caps: &Caps) -> Result<Self> {
        Self::new(sh, crate::hamlib::decompose_boundary(sh)?, caps)
    }

    pub fn dim(&self) -> usize {
        self.frame.da() * self.frame.db()
    }

    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    /// `e^{−iτH_A} ⊗ e^{−iτH_B}`.
    pub fn local_evolution(&self, tau: f64) -> CMat<T> {
        linalg::kron(&linalg::expm_herm(&self.h_a, T::lit(tau)), &linalg::expm_herm(&self.h_b, T::lit(tau)))
    }

    /// `e^{−itH}` in `A ⊗ B` order.
    pub fn exact_evolution(&self, t: f64) -> CMat<T> {
        linalg::expm_herm(&self.h, T::lit(t))
    }

    /// `U_I(τ) = e^{iτH_0} e^{−iτH}`.
    pub fn exact_interaction(&self, tau: f64) -> CMat<T> {
        self.local_evolution(tau).adjoint() * self.exact_evolution(tau)
    }

    /// `v ↦ e^{isH} v e^{−isH}` on one side.
    fn conjugate(h: &CMat<T>, u: &CMat<T>, s: f64) -> CMat<T> {
        let e = linalg::expm_herm(h, T::lit(s));
        e.adjoint() * u * e
    }

    /// `G_g(s)` in the `H_0` eigenbasis: entries of `G_g` times
    /// `e^{is(E_x − E_y)}`.
    fn group_at(&self, g: usize, s: f64) -> CMat<T> {
        let e = &self.energies;
        let m = &self.groups[g].summed;
        CMat::<T>::from_fn(m.nrows(), m.ncols(), |x, y| m[(x, y)] * cis(T::lit(s * (e[x] - e[y]))))
    }

    fn from_eigenbasis(&self, m: &CMat<T>) -> CMat<T> {
        &self.basis * m * self.basis.adjoint()
    }
}

// ---------------------------------------------------------------------------
// truncated Dyson series

/// Time grid used inside one segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Grid {
    /// `s_m = mτ/M`.
    Left,
    /// `s_m = (m + 1/2)τ/M`.
    #[default]
    Midpoint,
}

impl Grid {
    pub fn point(self, m: usize, tau: f64, big_m: usize) -> f64 {
        match self {
            Grid::Left => m as f64 * tau / big_m as f64,
            Grid::Midpoint => (m as f64 + 0.5) * tau / big_m as f64,
        }
    }
}

/// Terms of equal order and equal `β`-group multiset share one coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct DysonClass {
    pub order: usize,
    /// Number of factors drawn from each `β` group.
    pub exponents: Vec<usize>,
    /// Number of index tuples in the class.
    pub count: u128,
    /// `α = (τ/M)^k Π_g β_g^{e_g}`.
    pub alpha: f64,
    /// `c` with `α̃ = c·k_δ`.
    pub units: u128,
}

#[derive(Clone, Debug)]
pub struct DysonTerm<T: Real> {
    pub order: usize,
    /// Grid indices `m_1 < … < m_k`.
    pub times: Vec<usize>,
    /// Boundary term of each factor, in time order.
    pub indices: Vec<usize>,
    pub alpha: f64,
    pub units: u128,
    /// Side-space unitaries; the `(−i)^k` phase sits in `v_a`.
    pub v_a: CMat<T>,
    pub v_b: CMat<T>,
}

/// Rounded coefficients with the normalisation padding: `c_ℓ` copies of every
/// term plus `pad/2` pairs of `(+𝟙, −𝟙)` fill `p = 2^{r+1}` slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Rounding {
    pub bits: u32,
    /// `k_δ = 2^{−r}`.
    pub unit: f64,
    pub term_count_p: u128,
    pub pad_slots: u128,
    /// `Σ_ℓ |α_ℓ − α̃_ℓ|`.
    pub residual: f64,
}

/// Smallest `r ≥ min_bits` with `Σ c ≤ 2^{r+1}` and an even padding.
fn round_coefficients(alpha_counts: &[(f64, u128)], min_bits: u32) -> Result<(Rounding, Vec<u128>)> {
    let mut r = min_bits;
    loop {
        if r > 125 {
            return Err(Error::BudgetInfeasible("no rounding resolution gives an even padding".into()));
        }
        let scale = 2f64.powi(r as i32);
        let units: Vec<u128> = alpha_counts.iter().map(|&(a, _)| (a * scale).round() as u128).collect();
        let mut used: u128 = 0;
        for (u, &(_, c)) in units.iter().zip(alpha_counts) {
            used = u.checked_mul(c).and_then(|x| used.checked_add(x)).ok_or_else(|| {
                Error::BudgetInfeasible("Dyson term count overflows".into())
            })?;
        }
        let p = 1u128 << (r + 1);
        if used > p {
            return Err(Error::BudgetInfeasible(format!(
                "rounded coefficients sum to {} > 2; use more segments",
                used as f64 / scale
            )));
        }
        let pad = p - used;
        if pad % 2 == 1 {
            r += 1;
            continue;
        }
        let unit = 1.0 / scale;
        let residual =
            alpha_counts.iter().zip(&units).map(|(&(a, c), &u)| c as f64 * (a - u as f64 * unit).abs()).sum();
        return Ok((Rounding { bits: r, unit, term_count_p: p, pad_slots: pad, residual }, units));
    }
}

/// `⌈log2(1/δ)⌉`.
pub fn rounding_bits_for(delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("rounding δ = {delta} must lie in (0, 1)")));
    }
    Ok((1.0 / delta).log2().ceil().max(0.0) as u32)
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

/// All exponent vectors over `g` groups with total degree `≤ k`, grouped by
/// degree.
fn exponent_vectors(g: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; g]];
    let mut frontier = vec![vec![0; g]];
    for _ in 0..k {
        let mut next = Vec::new();
        for e in &frontier {
            // extend only at or after the last nonzero slot to avoid repeats
            let start = e.iter().rposition(|&x| x > 0).unwrap_or(0);
            for i in start..g {
                let mut f = e.clone();
                f[i] += 1;
                next.push(f);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn class_data<T: Real>(ip: &InteractionPicture<T>, tau: f64, big_m: usize, e: &[usize]) -> Result<(f64, u128)> {
    let k: usize = e.iter().sum();
    let mut alpha = (tau / big_m as f64).powi(k as i32);
    let mut count = binomial(big_m, k).ok_or_else(|| Error::BudgetInfeasible("Dyson term count overflows".into()))?;
    let mut fact = 1u128;
    for i in 1..=k {
        fact *= i as u128;
    }
    let mut multinom = fact;
    for (g, &eg) in e.iter().enumerate() {
        alpha *= ip.groups[g].beta.powi(eg as i32);
        for i in 1..=eg {
            multinom /= i as u128;
        }
        let size = (ip.groups[g].members.len() as u128).checked_pow(eg as u32);
        count = size.and_then(|s| count.checked_mul(s)).ok_or_else(|| Error::BudgetInfeasible("Dyson term count overflows".into()))?;
    }
    count = count.checked_mul(multinom).ok_or_else(|| Error::BudgetInfeasible("Dyson term count overflows".into()))?;
    Ok((alpha, count))
}

/// Enumerated LCU terms of one segment.
#[derive(Clone, Debug)]
pub struct DysonTermSet<T: Real> {
    pub cutoff_order: usize,
    pub grid_points: usize,
    pub grid: Grid,
    pub segment_time: f64,
    pub segments: usize,
    pub terms: Vec<DysonTerm<T>>,
    pub rounding: Rounding,
    /// `Σ_ℓ α_ℓ`.
    pub raw_sum: f64,
    /// `Σ_ℓ α̃_ℓ` over the non-padding terms.
    pub rounded_sum: f64,
    /// `e^{τ Σ_j β_j}`.
    pub norm_bound: f64,
    pub da: usize,
    pub db: usize,
}

/// Largest number of explicitly enumerated Dyson terms.
pub const MAX_ENUMERATED_TERMS: usize = 1 << 14;

/// Enumerates `{(k, m_1 < … < m_k, j_1 … j_k)}` for one segment of length
/// `τ = t/L` and rounds the coefficients to multiples of
/// `k_δ = 2^{−⌈log2(1/δ)⌉}`.
pub fn build_dyson_terms<T: Real>(
    ip: &InteractionPicture<T>,
    t: f64,
    segments: usize,
    big_m: usize,
    big_k: usize,
    delta: f64,
    grid: Grid,
) -> Result<DysonTermSet<T>> {
    if segments == 0 || big_m == 0 {
        return Err(Error::InvalidParameter("need L ≥ 1 and M ≥ 1".into()));
    }
    let tau = t / segments as f64;
    let (da, db) = (ip.frame.da(), ip.frame.db());
    let j = ip.beta.len();
    let mut terms = Vec::new();
    // conjugated factors at every grid point
    let ca: Vec<Vec<CMat<T>>> = (0..big_m)
        .map(|m| ip.u_a.iter().map(|u| InteractionPicture::conjugate(&ip.h_a, u, grid.point(m, tau, big_m))).collect())
        .collect();
    let cb: Vec<Vec<CMat<T>>> = (0..big_m)
        .map(|m| ip.u_b.iter().map(|u| InteractionPicture::conjugate(&ip.h_b, u, grid.point(m, tau, big_m))).collect())
        .collect();
    let dt = tau / big_m as f64;
    terms.push(DysonTerm { order: 0, times: vec![], indices: vec![], alpha: 1.0, units: 0, v_a: linalg::eye(da), v_b: linalg::eye(db) });
    if j > 0 {
        let mut frontier: Vec<DysonTerm<T>> = vec![terms[0].clone()];
        for k in 1..=big_k {
            let mut next = Vec::new();
            for base in &frontier {
                let first = base.times.last().map_or(0, |&m| m + 1);
                for m in first..big_m {
                    for jj in 0..j {
                        if terms.len() + next.len() >= MAX_ENUMERATED_TERMS {
                            return Err(Error::CapExceeded {
                                what: "enumerated Dyson terms",
                                dim: (terms.len() + next.len() + 1) as u128,
                                cap: MAX_ENUMERATED_TERMS as u128,
                            });
                        }
                        let mut times = base.times.clone();
                        times.push(m);
                        let mut indices = base.indices.clone();
                        indices.push(jj);
                        // later factors multiply from the left; −i per order
                        let v_a = &ca[m][jj] * &base.v_a * cplx(T::zero(), -T::one());
                        let v_b = &cb[m][jj] * &base.v_b;
                        next.push(DysonTerm { order: k, times, indices, alpha: base.alpha * dt * ip.beta[jj], units: 0, v_a, v_b });
                    }
                }
            }
            terms.extend(next.iter().cloned());
            frontier = next;
        }
    }
    let ac: Vec<(f64, u128)> = terms.iter().map(|t| (t.alpha, 1)).collect();
    let (rounding, units) = round_coefficients(&ac, rounding_bits_for(delta)?)?;
    for (t, u) in terms.iter_mut().zip(units) {
        t.units = u;
    }
    let raw_sum = terms.iter().map(|t| t.alpha).sum();
    let rounded_sum = terms.iter().map(|t| t.units as f64 * rounding.unit).sum();
    Ok(DysonTermSet {
        cutoff_order: big_k,
        grid_points: big_m,
        grid,
        segment_time: tau,
        segments,
        terms,
        rounding,
        raw_sum,
        rounded_sum,
        norm_bound: (tau * ip.beta_sum()).exp(),
        da,
        db,
    })
}

impl<T: Real> DysonTermSet<T> {
    /// `Σ_ℓ α_ℓ v_ℓ^A ⊗ v_ℓ^B`, the truncated interaction propagator.
    pub fn raw_operator(&self) -> CMat<T> {
        let n = self.da * self.db;
        self.terms.iter().fold(linalg::zeros::<T>(n, n), |acc, t| acc + linalg::kron(&t.v_a, &t.v_b) * creal(T::lit(t.alpha)))
    }

    /// `W = ⟨Φ_p| SEL |Φ_p⟩ = ½ Σ_ℓ α̃_ℓ v_ℓ^A ⊗ v_ℓ^B` (the padding cancels).
    pub fn block(&self) -> CMat<T> {
        let n = self.da * self.db;
        let half = 0.5 * self.rounding.unit;
        self.terms
            .iter()
            .fold(linalg::zeros::<T>(n, n), |acc, t| acc + linalg::kron(&t.v_a, &t.v_b) * creal(T::lit(half * t.units as f64)))
    }

    /// Term (or padding sign) held in each EPR slot.
    fn slots(&self) -> Vec<Slot> {
        let mut s = Vec::with_capacity(self.rounding.term_count_p as usize);
        for (i, t) in self.terms.iter().enumerate() {
            s.extend(std::iter::repeat(Slot::Term(i)).take(t.units as usize));
        }
        for k in 0..self.rounding.pad_slots {
            s.push(if k % 2 == 0 { Slot::Plus } else { Slot::Minus });
        }
        s
    }

    /// `Σ_ℓ |ℓ⟩⟨ℓ| ⊗ f(v_ℓ)` for one party.
    fn select(&self, party: Owner, adjoint: bool) -> CMat<T> {
        let slots = self.slots();
        let d = if party == Owner::Alice { self.da } else { self.db };
        let p = slots.len();
        let mut m = linalg::zeros::<T>(p * d, p * d);
        for (l, s) in slots.iter().enumerate() {
            let v = match (s, party) {
                (Slot::Term(i), Owner::Alice) => self.terms[*i].v_a.clone(),
                (Slot::Term(i), Owner::Bob) => self.terms[*i].v_b.clone(),
                (Slot::Minus, Owner::Alice) => -linalg::eye::<T>(d),
                _ => linalg::eye::<T>(d),
            };
            let v = if adjoint { v.adjoint() } else { v };
            m.view_mut((l * d, l * d), (d, d)).copy_from(&v);
        }
        m
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Term(usize),
    Plus,
    Minus,
}

// ---------------------------------------------------------------------------
// one segment

/// How the two reflections about `Φ_p` are carried out.
#[derive(Clone, Copy, Debug)]
pub enum Reflector<'a, T: Real> {
    /// Expander protocol on the EPR pair.
    Expander(&'a QuantumExpander<T>),
    /// Exact `2Φ_p − 𝟙` as a reference; costs nothing in the ledger.
    Exact,
}

fn reflect<T: Real>(ps: &mut PartyState<T>, r: Reflector<'_, T>, label: &str, ledger: &mut ProtocolTranscript) -> Result<()> {
    match r {
        Reflector::Expander(exp) => {
            let mut t = reflect_mes(ps, EPR_A, EPR_B, exp)?;
            for s in &mut t.steps {
                s.label = format!("{label}: {}", s.label);
            }
            ledger.append(t);
        }
        Reflector::Exact => {
            let p = ps.register(EPR_A)?.dim;
            ps.apply_unchecked(&[EPR_A, EPR_B], &exact_mes_reflection(p))?;
            ledger.record_local(format!("{label}: exact reflection (reference)"));
        }
    }
    Ok(())
}

/// One segment of the interaction-picture protocol on a literal state with
/// registers `sys_a`, `sys_b`, `epr_a`, `epr_b`: `SEL`, `−SEL(2Φ−𝟙)SEL†(2Φ−𝟙)`,
/// then `e^{−iτH_A}` and `e^{−iτH_B}`.
pub fn simulate_segment<T: Real>(
    ps: &mut PartyState<T>,
    ip: &InteractionPicture<T>,
    terms: &DysonTermSet<T>,
    reflector: Reflector<'_, T>,
    caps: &Caps,
) -> Result<ProtocolTranscript> {
    let mut ledger = ProtocolTranscript::new();
    let tau = terms.segment_time;
    if !ip.beta.is_empty() {
        let p = terms.rounding.term_count_p;
        let have = ps.register(EPR_A)?.dim as u128;
        if have < p {
            return Err(Error::EprTooSmall { have, need: p });
        }
        if have != p || ps.register(EPR_B)?.dim as u128 != p {
            return Err(Error::DimensionMismatch(format!("EPR registers must have dimension {p}")));
        }
        caps.check_operator("controlled select", p as usize * terms.da.max(terms.db))?;
        if let Reflector::Expander(e) = reflector {
            ledger.note_epr(linalg::ceil_log2(e.dimension as u128) as u64);
        }
        let (sa, sb) = (terms.select(Owner::Alice, false), terms.select(Owner::Bob, false));
        let (sa_d, sb_d) = (terms.select(Owner::Alice, true), terms.select(Owner::Bob, true));
        let sel = |ps: &mut PartyState<T>, a: &CMat<T>, b: &CMat<T>, l: &mut ProtocolTranscript, name: &str| -> Result<()> {
            ps.apply(Owner::Alice, &[EPR_A, SYS_A], a)?;
            ps.apply(Owner::Bob, &[EPR_B, SYS_B], b)?;
            l.record_local(name);
            Ok(())
        };
        sel(ps, &sa, &sb, &mut ledger, "SEL")?;
        reflect(ps, reflector, "first reflection", &mut ledger)?;
        sel(ps, &sa_d, &sb_d, &mut ledger, "SEL†")?;
        reflect(ps, reflector, "second reflection", &mut ledger)?;
        sel(ps, &sa, &sb, &mut ledger, "SEL")?;
        ps.apply(Owner::Alice, &[SYS_A], &(-linalg::eye::<T>(terms.da)))?;
        ledger.record_local("global sign");
    }
    ps.apply(Owner::Alice, &[SYS_A], &linalg::expm_herm(&ip.h_a, T::lit(tau)))?;
    ps.apply(Owner::Bob, &[SYS_B], &linalg::expm_herm(&ip.h_b, T::lit(tau)))?;
    ledger.record_local("local evolutions");
    Ok(ledger)
}

/// Literal `L`-segment evolution.
pub fn simulate_evolution_literal<T: Real>(
    ps: &mut PartyState<T>,
    ip: &InteractionPicture<T>,
    terms: &DysonTermSet<T>,
    reflector: Reflector<'_, T>,
    caps: &Caps,
) -> Result<ProtocolTranscript> {
    let mut ledger = ProtocolTranscript::new();
    for l in 0..terms.segments {
        let mut t = simulate_segment(ps, ip, terms, reflector, caps)?;
        for s in &mut t.steps {
            s.label = format!("segment {l}: {}", s.label);
        }
        ledger.append(t);
    }
    Ok(ledger)
}

/// Fresh literal state `ψ_AB ⊗ Φ_p`.
pub fn literal_state<T: Real>(ip: &InteractionPicture<T>, psi_ab: CVec<T>, p: usize) -> Result<PartyState<T>> {
    let mut ps = PartyState::bipartite(ip.frame.da(), ip.frame.db(), psi_ab)?;
    ps.add_epr_pair(EPR_A, EPR_B, p)?;
    Ok(ps)
}

/// `⟨Φ_p|` component of a literal state, as a system vector in `A ⊗ B` order.
pub fn phi_component<T: Real>(ps: &PartyState<T>) -> Result<CVec<T>> {
    let p = ps.register(EPR_A)?.dim;
    let pa = ps.position(EPR_A)?;
    let pb = ps.position(EPR_B)?;
    let sa = ps.position(SYS_A)?;
    let sb = ps.position(SYS_B)?;
    let dims = ps.dims();
    let st = linalg::strides(&dims);
    let (da, db) = (dims[sa], dims[sb]);
    let w = T::one() / T::from_usize_lossy(p).sqrt();
    let mut out = CVec::<T>::zeros(da * db);
    for a in 0..da {
        for b in 0..db {
            let mut acc = cplx(T::zero(), T::zero());
            for l in 0..p {
                acc += ps.amplitudes[a * st[sa] + b * st[sb] + l * st[pa] + l * st[pb]];
            }
            out[a * db + b] = acc * creal(w);
        }
    }
    Ok(out)
}

/// Reduced description of one segment with exact reflections.
#[derive(Clone, Debug)]
pub struct SegmentModel<T: Real> {
    pub segment_time: f64,
    pub cutoff_order: usize,
    pub grid_points: usize,
    pub grid: Grid,
    pub classes: Vec<DysonClass>,
    pub rounding: Rounding,
    pub raw_sum: f64,
    pub norm_bound: f64,
    /// `Σ_ℓ α_ℓ v_ℓ` (`A ⊗ B` order).
    pub truncated: CMat<T>,
    /// `W = ½ Σ_ℓ α̃_ℓ v_ℓ`.
    pub block: CMat<T>,
    /// `X = 3W − 4WW†W`, the `Φ`-block after amplification.
    pub amplified: CMat<T>,
    /// `‖X − U_I(τ)‖`.
    pub deviation: f64,
    /// `√λ_max(𝟙 − X†X)`: largest norm leaving the `Φ` sector.
    pub junk: f64,
}

/// Class-resolved Dyson sums by dynamic programming over the grid, in the
/// `H_0` eigenbasis: `S_e = Σ_{m_1<…<m_k} G_{g_k}(s_{m_k}) ⋯ G_{g_1}(s_{m_1})`.
fn class_sums<T: Real>(ip: &InteractionPicture<T>, tau: f64, big_m: usize, big_k: usize, grid: Grid) -> (Vec<Vec<usize>>, Vec<CMat<T>>) {
    let g = ip.groups.len();
    let exps = exponent_vectors(g, big_k);
    let index: HashMap<Vec<usize>, usize> = exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
    let n = ip.dim();
    let mut sums: Vec<CMat<T>> = exps.iter().map(|_| linalg::zeros::<T>(n, n)).collect();
    sums[0] = linalg::eye(n);
    // descending degree so each grid point enters a product at most once
    let mut order: Vec<usize> = (1..exps.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(exps[i].iter().sum::<usize>()));
    for m in 0..big_m {
        let s = grid.point(m, tau, big_m);
        let gs: Vec<CMat<T>> = (0..g).map(|q| ip.group_at(q, s)).collect();
        for &i in &order {
            let mut add = linalg::zeros::<T>(n, n);
            for q in 0..g {
                if exps[i][q] == 0 {
                    continue;
                }
                let mut prev = exps[i].clone();
                prev[q] -= 1;
                add += &gs[q] * &sums[index[&prev]];
            }
            sums[i] += add;
        }
    }
    (exps, sums)
}

/// Default rounding resolution of the reduced engine: fine enough that the
/// rounding residual sits far below every other error.
fn reduced_rounding_bits(total_terms: u128) -> u32 {
    (linalg::ceil_log2(total_terms) + 48).min(120)
}

/// Builds the reduced model of one segment of length `τ`.
pub fn segment_model<T: Real>(
    ip: &InteractionPicture<T>,
    tau: f64,
    big_m: usize,
    big_k: usize,
    grid: Grid,
    rounding_bits: Option<u32>,
) -> Result<SegmentModel<T>> {
    let n = ip.dim();
    let exact = ip.exact_interaction(tau);
    if ip.groups.is_empty() {
        let eye = linalg::eye::<T>(n);
        return Ok(SegmentModel {
            segment_time: tau,
            cutoff_order: big_k,
            grid_points: big_m,
            grid,
            classes: vec![DysonClass { order: 0, exponents: vec![], count: 1, alpha: 1.0, units: 1 }],
            rounding: Rounding { bits: 0, unit: 1.0, term_count_p: 1, pad_slots: 0, residual: 0.0 },
            raw_sum: 1.0,
            norm_bound: 1.0,
            truncated: eye.clone(),
            block: eye.clone(),
            amplified: eye,
            deviation: linalg::op_norm(&(linalg::eye::<T>(n) - exact)).as_f64(),
            junk: 0.0,
        });
    }
    let (exps, sums) = class_sums(ip, tau, big_m, big_k, grid);
    let mut classes = Vec::with_capacity(exps.len());
    let mut ac = Vec::with_capacity(exps.len());
    for e in &exps {
        let (alpha, count) = class_data(ip, tau, big_m, e)?;
        ac.push((alpha, count));
        classes.push(DysonClass { order: e.iter().sum(), exponents: e.clone(), count, alpha, units: 0 });
    }
    let total: u128 = ac.iter().fold(0u128, |a, &(_, c)| a.saturating_add(c));
    let (rounding, units) = round_coefficients(&ac, rounding_bits.unwrap_or_else(|| reduced_rounding_bits(total)))?;
    let mut truncated = linalg::zeros::<T>(n, n);
    let mut block = linalg::zeros::<T>(n, n);
    let mut raw_sum = 0.0;
    for (i, c) in classes.iter_mut().enumerate() {
        c.units = units[i];
        raw_sum += c.alpha * c.count as f64;
        if c.count == 0 {
            continue;
        }
        // α_e Σ_class v = (−iτ/M)^k Π β^e S_e; the rounded version rescales by α̃/α
        let phase = match c.order % 4 {
            0 => cplx(T::one(), T::zero()),
            1 => cplx(T::zero(), -T::one()),
            2 => cplx(-T::one(), T::zero()),
            _ => cplx(T::zero(), T::one()),
        };
        truncated += &sums[i] * (phase * creal(T::lit(c.alpha)));
        block += &sums[i] * (phase * creal(T::lit(0.5 * c.units as f64 * rounding.unit)));
    }
    let truncated = ip.from_eigenbasis(&truncated);
    let block = ip.from_eigenbasis(&block);
    let amplified = &block * creal(T::lit(3.0)) - &block * block.adjoint() * &block * creal(T::lit(4.0));
    let deviation = linalg::op_norm(&(&amplified - &exact)).as_f64();
    let junk = junk_norm(&amplified);
    Ok(SegmentModel {
        segment_time: tau,
        cutoff_order: big_k,
        grid_points: big_m,
        grid,
        classes,
        rounding,
        raw_sum,
        norm_bound: (tau * ip.beta_sum()).exp(),
        truncated,
        block,
        amplified,
        deviation,
        junk,
    })
}

/// `√λ_max(𝟙 − X†X)`, clamped at zero.
pub fn junk_norm<T: Real>(x: &CMat<T>) -> f64 {
    let g = linalg::eye::<T>(x.ncols()) - x.adjoint() * x;
    linalg::eigvalsh(&linalg::symmetrize(&g)).last().map_or(0.0, |v| v.as_f64()).max(0.0).sqrt()
}

/// Worst-case `‖W|Φ⟩|ψ⟩ − |Φ⟩U|ψ⟩‖` over unit `ψ` when the full operation
/// is an isometry with `Φ`-block `R`: `√λ_max(2 − U†R − R†U)`.
pub fn isometry_error<T: Real>(r: &CMat<T>, u: &CMat<T>) -> f64 {
    let x = u.adjoint() * r;
    let g = linalg::eye::<T>(r.ncols()) * creal(T::lit(2.0)) - &x - x.adjoint();
    linalg::eigvalsh(&linalg::symmetrize(&g)).last().map_or(0.0, |v| v.as_f64()).max(0.0).sqrt()
}

/// Smallest `K` with `Σ_{k>K} x^k/k! ≤ target` (bounded by `x^{K+1}e^x/(K+1)!`).
pub fn dyson_cutoff(x: f64, target: f64) -> usize {
    let mut k = 0usize;
    let mut term = x; // x^{K+1}/(K+1)!
    while term * x.exp() > target && k < 64 {
        k += 1;
        term *= x / (k + 1) as f64;
    }
    k
}

/// Segments required by the norm condition `τ Σ_j β_j ≤ ln 2`.
pub fn segments_for(t: f64, beta_sum: f64) -> usize {
    if t <= 0.0 || beta_sum <= 0.0 {
        return 0;
    }
    ((t * beta_sum / LN_2) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Largest grid tried by the adaptive search.
pub const MAX_GRID_POINTS: usize = 1 << 14;

#[derive(Clone, Debug)]
pub struct EvolutionOptions {
    pub grid: Grid,
    /// Rounding resolution `r`; `None` picks one far below other errors.
    pub rounding_bits: Option<u32>,
    /// Initial grid size of the doubling search.
    pub initial_grid_points: usize,
    /// Forces the number of segments (at least the norm condition).
    pub segments: Option<usize>,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions { grid: Grid::Midpoint, rounding_bits: None, initial_grid_points: 8, segments: None }
    }
}

/// Outcome of [`simulate_evolution`].
#[derive(Clone, Debug)]
pub struct EvolutionReport<T: Real> {
    pub time: f64,
    pub segments: usize,
    pub segment: SegmentModel<T>,
    pub expander_power: u32,
    /// `ε^m` bound for the powered expander.
    pub expander_epsilon: f64,
    pub ancilla_qubits: u64,
    /// `Φ`-block of the whole protocol (`A ⊗ B` order).
    pub realized: CMat<T>,
    pub exact: CMat<T>,
    /// Worst-case state error with exact reflections.
    pub measured_error: f64,
    /// `measured_error + L·2·2ε_m`.
    pub certified_error: f64,
    pub target_error: f64,
    pub transcript: ProtocolTranscript,
}

/// `L` segments of the interaction-picture protocol, each: the two expander
/// reflections of the amplification step and the local evolutions.
pub fn evolution_transcript(segments: usize, ancilla_qubits: u64, active: bool) -> ProtocolTranscript {
    let mut t = ProtocolTranscript::new();
    for l in 0..segments {
        if active {
            t.record_local(format!("segment {l}: SEL"));
            record_reflection(&mut t, &format!("segment {l}: first reflection"), ancilla_qubits);
            t.record_local(format!("segment {l}: SEL†"));
            record_reflection(&mut t, &format!("segment {l}: second reflection"), ancilla_qubits);
            t.record_local(format!("segment {l}: SEL and sign"));
        }
        t.record_local(format!("segment {l}: local evolutions"));
    }
    t
}

/// Doubles `M` until every segment time passes `accept`; the longest segment
/// is tried first since it fails first.
fn grid_search<T: Real>(
    ip: &InteractionPicture<T>,
    taus: &[f64],
    big_k: usize,
    opts: &EvolutionOptions,
    accept: impl Fn(usize, &SegmentModel<T>) -> bool,
) -> Result<Vec<SegmentModel<T>>> {
    let mut m = opts.initial_grid_points.max(big_k).max(1);
    'grid: loop {
        let mut models: Vec<Option<SegmentModel<T>>> = vec![None; taus.len()];
        for i in (0..taus.len()).rev() {
            let model = segment_model(ip, taus[i], m, big_k, opts.grid, opts.rounding_bits)?;
            if !accept(i, &model) {
                if m >= MAX_GRID_POINTS {
                    return Err(Error::BudgetInfeasible(format!("grid of {m} points does not reach the error target")));
                }
                m *= 2;
                continue 'grid;
            }
            models[i] = Some(model);
        }
        return Ok(models.into_iter().map(|x| x.unwrap()).collect());
    }
}

/// Simulates `e^{−itH}` between the parties to error `target_error`.
///
/// `L = ⌈tΣβ/ln 2⌉`; `K` from the Dyson tail and `M` by doubling until the
/// exact-reflection error is at most `3/4` of the target; the expander is
/// powered until `L·2·2ε^m ≤ target/4`. The system registers of `ps` receive
/// the realized `Φ`-block; the norm leaving the `Φ` sector is booked as
/// discarded weight.
pub fn simulate_evolution<T: Real>(
    ps: &mut PartyState<T>,
    ip: &InteractionPicture<T>,
    t: f64,
    target_error: f64,
    exp: &QuantumExpander<T>,
    opts: &EvolutionOptions,
) -> Result<EvolutionReport<T>> {
    if !(target_error > 0.0) {
        return Err(Error::InvalidParameter("target error must be positive".into()));
    }
    let n = ip.dim();
    let exact = ip.exact_evolution(t);
    let bsum = ip.beta_sum();
    let active = bsum > 0.0 && t > 0.0;
    let segments = if t <= 0.0 { 0 } else { segments_for(t, bsum).max(opts.segments.unwrap_or(0)).max(if active { 0 } else { 1 }) };
    let tau = if segments == 0 { 0.0 } else { t / segments as f64 };
    let big_k = if active { dyson_cutoff(tau * bsum, target_error / (8.0 * segments as f64)) } else { 0 };
    let evolve = |seg: &SegmentModel<T>| -> CMat<T> {
        let s = ip.local_evolution(tau) * &seg.amplified;
        let mut r = linalg::eye::<T>(n);
        for _ in 0..segments {
            r = &s * r;
        }
        r
    };
    let models = grid_search(ip, &[tau], big_k, opts, |_, m| !active || isometry_error(&evolve(m), &exact) <= 0.75 * target_error)?;
    let segment = models.into_iter().next().unwrap();
    let realized = evolve(&segment);
    let measured_error = isometry_error(&realized, &exact);
    let (expander_power, expander_epsilon, ancilla_qubits) = if active {
        let m = expander_power_for(exp.measured_epsilon, target_error / (16.0 * segments as f64))?;
        (m, exp.measured_epsilon.powi(m as i32), powered_register_qubits(exp.degree, m))
    } else {
        (0, 0.0, 0)
    };
    let certified_error = measured_error + segments as f64 * 4.0 * expander_epsilon;
    let mut transcript = evolution_transcript(segments, ancilla_qubits, active);
    if active {
        transcript.note_epr(linalg::ceil_log2(segment.rounding.term_count_p) as u64);
    }
    apply_block(ps, &realized)?;
    Ok(EvolutionReport {
        time: t,
        segments,
        segment,
        expander_power,
        expander_epsilon,
        ancilla_qubits,
        realized,
        exact,
        measured_error,
        certified_error,
        target_error,
        transcript,
    })
}

/// Replaces the system state by `block·ψ`, booking the lost norm.
fn apply_block<T: Real>(ps: &mut PartyState<T>, block: &CMat<T>) -> Result<()> {
    let before = ps.amplitudes.norm_squared().as_f64();
    let names: Vec<&str> = ps.registers.iter().map(|r| r.name.as_str()).collect();
    if names != [SYS_A, SYS_B] {
        return Err(Error::InvalidParameter("reduced engine expects exactly the registers sys_a, sys_b".into()));
    }
    ps.amplitudes = block * &ps.amplitudes;
    let after = ps.amplitudes.norm_squared().as_f64();
    ps.discarded_weight += (before - after).max(0.0);
    Ok(())
}

// ---------------------------------------------------------------------------
// distributed ground-state measurement

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ground,
    NotGround,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Ground => "ground",
            Outcome::NotGround => "not_ground",
        })
    }
}

#[derive(Clone, Debug)]
pub struct GroundMeasurementConfig {
    /// Phase-register qubits `f`.
    pub ancilla_bits: u32,
    /// Target defining error `Δ`.
    pub target_delta: f64,
    /// Forces the number of repetitions `k`; otherwise the smallest `k` with
    /// ideal error `≤ Δ/2`.
    pub repetitions: Option<u32>,
    /// Seed of the Born-rule sample.
    pub seed: u64,
    pub evolution: EvolutionOptions,
}

impl GroundMeasurementConfig {
    pub fn new(ancilla_bits: u32, target_delta: f64, seed: u64) -> Self {
        GroundMeasurementConfig { ancilla_bits, target_delta, repetitions: None, seed, evolution: EvolutionOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct GroundMeasurement<T: Real> {
    pub outcome: Outcome,
    /// Certified interval for the probability of `ground` on the input.
    pub accept_interval: (f64, f64),
    /// `‖B^k ψ‖²` from the realized `Φ`-blocks.
    pub accept_estimate: f64,
    pub qpe: QpeConfig,
    pub repetitions: u32,
    /// Defining error of the exact phase-estimation POVM.
    pub ideal_delta: f64,
    /// Error budget handed to each controlled evolution.
    pub evolution_budget: f64,
    /// Certified state error of one phase-estimation block.
    pub block_error: f64,
    /// `ideal_delta + 2k·block_error`.
    pub certified_delta: f64,
    /// `‖B_real^k − B_ideal^k‖`.
    pub block_deviation: f64,
    pub segments: usize,
    pub grid_points: usize,
    pub cutoff_order: usize,
    pub expander_degree: usize,
    pub expander_power: u32,
    pub expander_epsilon: f64,
    pub ancilla_qubits: u64,
    /// Realized accept amplitude `B = N^{-1} Σ_j e^{it_jE_0} R_j` (`A ⊗ B` order).
    pub accept_block: CMat<T>,
    pub transcript: ProtocolTranscript,
    pub artifact: AgspArtifact<T>,
}

/// `2k(2f + L·2·2q)`: phase-register copies out and back plus two expander
/// reflections per segment, for `k` forward and `k` uncomputing blocks.
pub fn ground_measurement_cost(k: u32, f: u32, segments: usize, ancilla_qubits: u64) -> u64 {
    2 * k as u64 * (2 * f as u64 + segments as u64 * 4 * ancilla_qubits)
}

const PHASE_COPY: &str = "phase_copy";

/// Distributed phase estimation: Alice prepares the phase register, sends a
/// copy to Bob, both run the controlled evolutions `e^{−it_jH}` with a common
/// number of segments, the register is returned, and after `k` blocks the
/// all-zero outcome means `ground`. The uncomputation repeats the blocks.
pub fn measure_ground_state<T: Real>(
    ps: &mut PartyState<T>,
    ip: &InteractionPicture<T>,
    cfg: &GroundMeasurementConfig,
    exp: &QuantumExpander<T>,
    sh: &SplitHamiltonian<T>,
) -> Result<GroundMeasurement<T>> {
    let delta = cfg.target_delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("target Δ = {delta} must lie in (0, 1)")));
    }
    let eig = Eigensystem::of(&ip.h);
    eig.summary()?;
    let range = eig.values[eig.values.len() - 1] - eig.values[0];
    let e0 = eig.values[0].as_f64();
    let probe = QpeKernel::new(eig.clone(), QpeConfig::calibrated(cfg.ancilla_bits, 1, range.as_f64()))?;
    let k = match cfg.repetitions {
        Some(k) => k,
        None => (1..=256).find(|&k| probe.defining_error(k) <= 0.5 * delta).ok_or_else(|| {
            Error::BudgetInfeasible(format!("phase estimation with f = {} does not reach Δ/2", cfg.ancilla_bits))
        })?,
    };
    let qpe = QpeConfig::calibrated(cfg.ancilla_bits, k, range.as_f64());
    let kernel = QpeKernel::new(eig, qpe)?;
    let ideal_delta = kernel.defining_error(k);
    if ideal_delta >= delta {
        return Err(Error::BudgetInfeasible(format!("ideal error {ideal_delta} is not below Δ = {delta}")));
    }
    let kf = k as f64;
    let evolution_budget = ((delta - ideal_delta) / (2.0 * kf)).min(delta * delta / (2.0 * kf));

    let n_out = qpe.n_outcomes();
    let times: Vec<f64> = (0..n_out).map(|j| j as f64 * qpe.time_unit).collect();
    let t_max = times[n_out - 1];
    let bsum = ip.beta_sum();
    let active = bsum > 0.0;
    let segments = segments_for(t_max, bsum).max(cfg.evolution.segments.unwrap_or(0)).max(1);
    let taus: Vec<f64> = times.iter().skip(1).map(|t| t / segments as f64).collect();
    let big_k = if active { dyson_cutoff(taus[taus.len() - 1] * bsum, evolution_budget / (8.0 * segments as f64)) } else { 0 };
    let n = ip.dim();
    let targets: Vec<CMat<T>> = times.iter().map(|&t| ip.exact_evolution(t) * cis(T::lit(t * e0))).collect();
    let realize = |j: usize, seg: &SegmentModel<T>| -> CMat<T> {
        let s = ip.local_evolution(times[j] / segments as f64) * &seg.amplified;
        let mut r = linalg::eye::<T>(n);
        for _ in 0..segments {
            r = &s * r;
        }
        r * cis(T::lit(times[j] * e0))
    };
    let models = grid_search(ip, &taus, big_k, &cfg.evolution, |i, m| {
        !active || isometry_error(&realize(i + 1, m), &targets[i + 1]) <= 0.75 * evolution_budget
    })?;
    let mut blocks = vec![linalg::eye::<T>(n)];
    blocks.extend(models.iter().enumerate().map(|(i, m)| realize(i + 1, m)));
    let worst = blocks.iter().zip(&targets).map(|(r, u)| isometry_error(r, u)).fold(0.0, f64::max);
    let (expander_power, expander_epsilon, ancilla_qubits) = if active {
        let m = expander_power_for(exp.measured_epsilon, evolution_budget / (16.0 * segments as f64))?;
        (m, exp.measured_epsilon.powi(m as i32), powered_register_qubits(exp.degree, m))
    } else {
        (0, 0.0, 0)
    };
    let block_error = worst + segments as f64 * 4.0 * expander_epsilon;
    let certified_delta = ideal_delta + 2.0 * kf * block_error;

    let inv_n = creal(T::one() / T::from_usize_lossy(n_out));
    let accept_block = blocks.iter().fold(linalg::zeros::<T>(n, n), |a, b| a + b) * inv_n;
    let ideal_block = kernel.accept_amplitude();
    let pow = |b: &CMat<T>| (0..k).fold(linalg::eye::<T>(n), |acc, _| b * acc);
    let bk = pow(&accept_block);
    let bk_ideal = pow(&ideal_block);
    let block_deviation = linalg::op_norm(&(&bk - &bk_ideal)).as_f64();

    // ledger
    let mut transcript = ProtocolTranscript::new();
    let f = cfg.ancilla_bits as u64;
    for b in 0..2 * k {
        let stage = if b < k { "forward" } else { "uncompute" };
        let tag = format!("{stage} block {}", b % k);
        transcript.record_local(format!("{tag}: alice prepares and copies the phase register"));
        transcript.record_send(format!("{tag}: send phase register copy"), Owner::Alice, PHASE_COPY, f);
        let mut ev = evolution_transcript(segments, ancilla_qubits, active);
        for s in &mut ev.steps {
            s.label = format!("{tag}: {}", s.label);
        }
        transcript.append(ev);
        transcript.record_local(format!("{tag}: alice applies the phase correction and inverse Fourier transform"));
        transcript.record_send(format!("{tag}: return phase register copy"), Owner::Bob, PHASE_COPY, f);
        if b + 1 == k {
            transcript.record_local("alice measures the phase registers");
        }
    }
    if active {
        transcript.note_epr(linalg::ceil_log2(models.iter().map(|m| m.rounding.term_count_p).max().unwrap_or(1)) as u64);
    }
    let c = transcript.total_cost;

    // Born rule on the current input
    let psi = ps.amplitudes.clone();
    let weight = psi.norm_squared().as_f64();
    if weight <= 0.0 {
        return Err(Error::NotNormalized { norm: 0.0 });
    }
    let psi_n = &psi / creal(T::lit(weight.sqrt()));
    let a = (&bk_ideal * &psi_n).norm().as_f64();
    let slack = kf * block_error;
    let accept_interval = ((a - slack).max(0.0).powi(2), (a + slack).min(1.0).powi(2));
    let post = &bk * &psi_n;
    let accept_estimate = post.norm_squared().as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u: f64 = rng.random();
    let outcome = if u < accept_estimate { Outcome::Ground } else { Outcome::NotGround };
    // post-measurement system state on the accept branch, before uncomputation
    if outcome == Outcome::Ground {
        let nrm = post.norm();
        ps.amplitudes = &post / creal(nrm) * creal(T::lit(weight.sqrt()));
    }

    let frame = &ip.frame;
    let k_op = frame.op_from_ab(&(bk.adjoint() * &bk));
    let artifact = AgspArtifact {
        operator: Some(k_op),
        error_delta: certified_delta,
        schmidt_rank: if c < 64 { 1u64 << c } else { u64::MAX },
        log2_rank: c as f64,
        comm_cost: Some(c),
        provenance: Provenance::Protocol { f: cfg.ancilla_bits, k },
        target_state: fix_phase(frame.state_from_ab(&kernel.eigen.state(0))),
        cut: sh.cut.clone(),
        dims: sh.full.dims(),
        label: format!("protocol(f={},k={}) on {}", cfg.ancilla_bits, k, sh.full.label),
    };
    Ok(GroundMeasurement {
        outcome,
        accept_interval,
        accept_estimate,
        qpe,
        repetitions: k,
        ideal_delta,
        evolution_budget,
        block_error,
        certified_delta,
        block_deviation,
        segments,
        grid_points: models.first().map_or(0, |m| m.grid_points),
        cutoff_order: big_k,
        expander_degree: exp.degree,
        expander_power,
        expander_epsilon,
        ancilla_qubits,
        accept_block,
        transcript,
        artifact,
    })
}

// ---------------------------------------------------------------------------
// compression of an operator with few terms

/// `α_i ≈ w_i / N` with `N` a power of two.
#[derive(Clone, Debug, PartialEq)]
pub struct Rationalized {
    pub denominator: u64,
    pub weights: Vec<u64>,
    /// `max_i |α_i − w_i/N|`.
    pub residual: f64,
}

impl Rationalized {
    /// `M = Σ_i w_i`.
    pub fn total(&self) -> u128 {
        self.weights.iter().map(|&w| w as u128).sum()
    }
}

pub const RATIONAL_TOL: f64 = 1e-9;

pub fn rationalize(alphas: &[f64], tol: f64) -> Result<Rationalized> {
    if alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter("coefficients must be positive".into()));
    }
    let mut worst = f64::INFINITY;
    for bits in 0..=52u32 {
        let n = (1u64 << bits) as f64;
        let weights: Vec<u64> = alphas.iter().map(|&a| (a * n).round() as u64).collect();
        worst = alphas.iter().zip(&weights).map(|(&a, &w)| (a - w as f64 / n).abs()).fold(0.0, f64::max);
        if worst <= tol {
            return Ok(Rationalized { denominator: 1u64 << bits, weights, residual: worst });
        }
    }
    Err(Error::Rationalization(worst))
}

/// Operator-basis expansion `K = Σ_i α_i U_i ⊗ V_i` across the cut of an
/// artifact, with `α_i > 0`.
pub fn decompose_agsp<T: Real>(agsp: &AgspArtifact<T>) -> Result<UnitaryDecomposition<T>> {
    let k = agsp.operator.as_ref().ok_or_else(|| Error::InvalidParameter("artifact carries no dense operator".into()))?;
    let frame = BipartiteFrame::new(&agsp.cut, &agsp.dims);
    crate::hamlib::decompose_operator(&frame.op_to_ab(k), &agsp.cut.side_a, &agsp.cut.side_b, &agsp.dims)
}

#[derive(Clone, Debug)]
pub struct CompressedAgsp<T: Real> {
    pub artifact: AgspArtifact<T>,
    pub rational: Rationalized,
    pub alpha_sum: f64,
    pub delta: f64,
    /// `‖K_rat − |Ω⟩⟨Ω|‖` with `K_rat = N^{-1} Σ w_i U_i ⊗ V_i`.
    pub rational_error: f64,
    /// `NΔ/M`.
    pub required_epsilon: f64,
    pub expander_degree: usize,
    pub expander_power: u32,
    pub expander_epsilon: f64,
    /// `log2 d^m`, the Schmidt rank added by the twirl.
    pub assist_log2_rank: f64,
    /// `rational_error + (M/N) ε^m`.
    pub certified_bound: f64,
}

/// `K′ = (M/N) T_m (SEL_A ⊗ SEL_B)` on `|Φ_M⟩`, where `T_m` is the twirl of the
/// `m`-th power expander standing in for the projector on `Φ_M`. Only `T_m`
/// correlates the two sides, so the Schmidt rank of `K′` is at most `d^m`.
pub fn compress_agsp<T: Real>(
    source: &AgspArtifact<T>,
    dec: &UnitaryDecomposition<T>,
    delta: f64,
    exp: &QuantumExpander<T>,
) -> Result<CompressedAgsp<T>> {
    if dec.is_empty() {
        return Err(Error::InvalidParameter("empty decomposition".into()));
    }
    let alphas: Vec<f64> = dec.coefficients.iter().map(|a| a.as_f64()).collect();
    let rational = rationalize(&alphas, RATIONAL_TOL)?;
    let nd = rational.denominator as f64;
    let big_m = rational.total() as f64;
    let alpha_sum: f64 = alphas.iter().sum();

    let frame = BipartiteFrame::new(&source.cut, &source.dims);
    let k_rat = rational_operator(dec, &rational);
    let omega = frame.state_to_ab(&source.target_state);
    let p = linalg::outer(&omega, &omega);
    let rational_error = linalg::op_norm(&(&k_rat - p)).as_f64();

    let required_epsilon = nd * delta / big_m;
    let (expander_power, expander_epsilon) = if rational.total() <= 1 {
        (0, 0.0)
    } else {
        let m = expander_power_for(exp.measured_epsilon, required_epsilon)?;
        (m, exp.measured_epsilon.powi(m as i32))
    };
    let assist_log2_rank = expander_power as f64 * (exp.degree as f64).log2();
    let certified_bound = rational_error + big_m / nd * expander_epsilon;
    let artifact = AgspArtifact {
        operator: Some(frame.op_from_ab(&k_rat)),
        error_delta: certified_bound,
        schmidt_rank: if assist_log2_rank < 63.0 { 2f64.powf(assist_log2_rank).round() as u64 } else { u64::MAX },
        log2_rank: assist_log2_rank,
        comm_cost: None,
        provenance: Provenance::Compressed,
        target_state: source.target_state.clone(),
        cut: source.cut.clone(),
        dims: source.dims.clone(),
        label: format!("compressed({})", source.label),
    };
    Ok(CompressedAgsp {
        artifact,
        rational,
        alpha_sum,
        delta,
        rational_error,
        required_epsilon,
        expander_degree: exp.degree,
        expander_power,
        expander_epsilon,
        assist_log2_rank,
        certified_bound,
    })
}

/// `N^{-1} Σ_i w_i U_i ⊗ V_i` in `A ⊗ B` order.
pub fn rational_operator<T: Real>(dec: &UnitaryDecomposition<T>, rational: &Rationalized) -> CMat<T> {
    let (da, db) = (dec.factors[0].0.nrows(), dec.factors[0].1.nrows());
    let nd = rational.denominator as f64;
    dec.factors
        .iter()
        .zip(&rational.weights)
        .fold(linalg::zeros::<T>(da * db, da * db), |acc, ((u, v), &w)| acc + linalg::kron(u, v) * creal(T::lit(w as f64 / nd)))
}

/// Largest `M` for which [`compressed_operator_literal`] builds the registers.
pub const MAX_LITERAL_SLOTS: u128 = 16;

/// Dense `K′(𝟙 ⊗ |Φ_M⟩)` as a map from `A ⊗ B` into `A ⊗ B ⊗ a ⊗ b`, with the
/// twirl of the `power`-th power of `exp` in place of the projector
/// (`exp.dimension` must be `M`).
pub fn compressed_operator_literal<T: Real>(
    dec: &UnitaryDecomposition<T>,
    rational: &Rationalized,
    exp: &QuantumExpander<T>,
    power: u32,
) -> Result<CMat<T>> {
    let big_m = rational.total();
    if big_m > MAX_LITERAL_SLOTS {
        return Err(Error::CapExceeded { what: "literal compression slots", dim: big_m, cap: MAX_LITERAL_SLOTS });
    }
    let mm = big_m as usize;
    if exp.dimension != mm {
        return Err(Error::DimensionMismatch(format!("expander acts on {} but M = {mm}", exp.dimension)));
    }
    let (da, db) = (dec.factors[0].0.nrows(), dec.factors[0].1.nrows());
    let slots: Vec<usize> = rational.weights.iter().enumerate().flat_map(|(i, &w)| std::iter::repeat(i).take(w as usize)).collect();
    let ctrl = |d: usize, f: &dyn Fn(usize) -> CMat<T>| {
        let mut m = linalg::zeros::<T>(mm * d, mm * d);
        for (l, &i) in slots.iter().enumerate() {
            m.view_mut((l * d, l * d), (d, d)).copy_from(&f(i));
        }
        m
    };
    let sel_a = ctrl(da, &|i| dec.factors[i].0.clone());
    let sel_b = ctrl(db, &|i| dec.factors[i].1.clone());
    let tw = if mm == 1 {
        linalg::eye::<T>(1)
    } else {
        let t = twirl(&exp.unitaries);
        (0..power).fold(linalg::eye::<T>(mm * mm), |acc, _| &t * acc)
    };
    let dims = [da, db, mm, mm];
    let phi = linalg::max_entangled::<T>(mm);
    let scale = creal(T::lit(big_m as f64 / rational.denominator as f64));
    let n = da * db;
    let mut out = linalg::zeros::<T>(n * mm * mm, n);
    for c in 0..n {
        let v = linalg::kron_vec(&linalg::basis_vec::<T>(n, c), &phi);
        let v = linalg::apply_local_vec(&sel_a, &[2, 0], &dims, &v);
        let v = linalg::apply_local_vec(&sel_b, &[3, 1], &dims, &v);
        let v = linalg::apply_local_vec(&tw, &[2, 3], &dims, &v) * scale;
        out.set_column(c, &v);
    }
    Ok(out)
}

/// Assist rank as `Σα` is inflated by cancelling `±𝟙` pairs: for each factor
/// `s`, `M_s = sM`, `ε_s = NΔ/M_s` and `log2 rank = m_s log2 d`. Returns
/// `(Σα, log2 rank)` rows and the log-log slope.
pub fn assist_rank_sweep<T: Real>(comp: &CompressedAgsp<T>, exp: &QuantumExpander<T>, factors: &[f64]) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut rows = Vec::with_capacity(factors.len());
    for &s in factors {
        let sum = comp.alpha_sum * s;
        let eps = comp.delta / sum;
        let m = expander_power_for(exp.measured_epsilon, eps)?;
        rows.push((sum, m as f64 * (exp.degree as f64).log2()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1 * LN_2).collect();
    Ok((rows, linalg::fit_line(&xs, &ys).0))
}
