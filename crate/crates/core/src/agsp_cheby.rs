//! Detectability-lemma operator, Hamiltonian truncations and the
//! Chebyshev filter AGSP.

use crate::artifact::{operator_schmidt_rank, AgspArtifact, Provenance, DEFAULT_RANK_THRESHOLD};
use crate::error::{Error, Result};
use crate::hamlib::{Caps, LocalHamiltonian, SplitHamiltonian};
use crate::linalg::{self, CMat, CVec};
use crate::scalar::{creal, Real};
use crate::spectra::{fix_phase, Eigensystem};

const COMMUTE_TOL: f64 = 1e-12;
const PROJECTOR_TOL: f64 = 1e-10;
const FF_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommutingLayers {
    pub layers: Vec<Vec<usize>>,
    pub layer_count: usize,
    /// `g`: largest number of other terms failing to commute with one term.
    pub max_noncommuting: usize,
    /// Symmetric non-commutation relation between terms.
    pub conflicts: Vec<Vec<usize>>,
}

impl CommutingLayers {
    pub fn layer_of(&self, k: usize) -> usize {
        self.layers.iter().position(|l| l.contains(&k)).expect("every term is layered")
    }
}

/// Whether two terms commute, checked on the union of their supports.
pub fn terms_commute<T: Real>(h: &LocalHamiltonian<T>, i: usize, j: usize) -> bool {
    let (a, b) = (&h.terms[i], &h.terms[j]);
    if a.support.iter().all(|s| !b.support.contains(s)) {
        return true;
    }
    let mut union = a.support.clone();
    for &s in &b.support {
        if !union.contains(&s) {
            union.push(s);
        }
    }
    let dims: Vec<usize> = union.iter().map(|&s| h.sites[s].local_dimension).collect();
    let pos = |sup: &[usize]| sup.iter().map(|s| union.iter().position(|u| u == s).unwrap()).collect::<Vec<_>>();
    let ea = linalg::embed(&a.operator, &pos(&a.support), &dims);
    let eb = linalg::embed(&b.operator, &pos(&b.support), &dims);
    linalg::commutator(&ea, &eb).norm().as_f64() <= COMMUTE_TOL
}

/// Greedy colouring of the non-commutation graph in term order, followed by
/// a bounded exact search for fewer colours.
pub fn color_terms<T: Real>(h: &LocalHamiltonian<T>) -> CommutingLayers {
    let n = h.terms.len();
    let mut conflicts = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if !terms_commute(h, i, j) {
                conflicts[i].push(j);
                conflicts[j].push(i);
            }
        }
    }
    let mut colour = vec![usize::MAX; n];
    for i in 0..n {
        let used: Vec<usize> = conflicts[i].iter().map(|&j| colour[j]).collect();
        colour[i] = (0..).find(|c| !used.contains(c)).unwrap();
    }
    let mut k = colour.iter().map(|&c| c + 1).max().unwrap_or(0);
    while k > 1 {
        match exact_colouring(&conflicts, k - 1, 200_000) {
            Some(c) => {
                colour = c;
                k -= 1;
            }
            None => break,
        }
    }
    let mut layers = vec![Vec::new(); k];
    for (i, &c) in colour.iter().enumerate() {
        layers[c].push(i);
    }
    let g = conflicts.iter().map(|c| c.len()).max().unwrap_or(0);
    CommutingLayers { layer_count: layers.len(), layers, max_noncommuting: g, conflicts }
}

fn exact_colouring(conflicts: &[Vec<usize>], k: usize, budget: usize) -> Option<Vec<usize>> {
    fn go(i: usize, conflicts: &[Vec<usize>], k: usize, colour: &mut [usize], steps: &mut usize, budget: usize) -> bool {
        if i == colour.len() {
            return true;
        }
        *steps += 1;
        if *steps > budget {
            return false;
        }
        // symmetry breaking: never open more than one new colour at a time
        let max_used = colour[..i].iter().map(|&c| c + 1).max().unwrap_or(0);
        for c in 0..k.min(max_used + 1) {
            if conflicts[i].iter().all(|&j| j >= i || colour[j] != c) {
                colour[i] = c;
                if go(i + 1, conflicts, k, colour, steps, budget) {
                    return true;
                }
            }
        }
        colour[i] = usize::MAX;
        false
    }
    let mut colour = vec![usize::MAX; conflicts.len()];
    let mut steps = 0;
    go(0, conflicts, k, &mut colour, &mut steps, budget).then_some(colour)
}

fn require_ff_projectors<T: Real>(h: &LocalHamiltonian<T>) -> Result<()> {
    for t in &h.terms {
        if !t.is_projector(T::lit(PROJECTOR_TOL)) {
            return Err(Error::NotProjector(t.label.clone()));
        }
    }
    Ok(())
}

/// `Π_α Π_{k∈T_α ∩ keep} (𝟙 − h_k)`, leftmost layer first.
pub fn layered_product<T: Real>(h: &LocalHamiltonian<T>, layers: &CommutingLayers, keep: impl Fn(usize) -> bool) -> CMat<T> {
    let dims = h.dims();
    let d = h.dim();
    let mut m = linalg::eye::<T>(d);
    for layer in layers.layers.iter().rev() {
        for &k in layer.iter().filter(|&&k| keep(k)) {
            let t = &h.terms[k];
            let f = linalg::eye::<T>(t.operator.nrows()) - &t.operator;
            linalg::apply_local(&f, &t.support, &dims, &mut m);
        }
    }
    m
}

/// Ground-space projector of a block Hamiltonian on its own sites.
fn block_ground_projector<T: Real>(h: &LocalHamiltonian<T>) -> (CMat<T>, T) {
    if h.terms.is_empty() {
        return (linalg::eye(h.dim()), T::zero());
    }
    let (vals, vecs) = linalg::eigh(&h.dense());
    let e0 = vals[0];
    (linalg::spectral_projector(&vals, &vecs, |l| l <= e0 + T::lit(FF_TOL)), e0)
}

/// Embeds an operator on side A (or B) of the cut into the full space.
fn embed_side<T: Real>(op: &CMat<T>, sites: &[usize], dims: &[usize]) -> CMat<T> {
    linalg::embed(op, sites, dims)
}

pub struct DetectabilityResult<T: Real> {
    pub artifact: AgspArtifact<T>,
    /// `1/(1 + γ/g²)`.
    pub bound: f64,
    pub gap: f64,
    pub g: usize,
}

/// `DL = Π_α Π_{k∈T_α}(𝟙 − h_k)` with its measured contraction.
pub fn detectability_operator<T: Real>(sh: &SplitHamiltonian<T>, layers: &CommutingLayers, caps: &Caps) -> Result<DetectabilityResult<T>> {
    let h = &sh.full;
    require_ff_projectors(h)?;
    let es = Eigensystem::of(&h.dense_checked(caps)?);
    let s = es.summary()?;
    if s.ground_energy.abs().as_f64() > FF_TOL {
        return Err(Error::Frustrated(s.ground_energy.as_f64()));
    }
    let dl = layered_product(h, layers, |_| true);
    let omega = s.ground_state.clone();
    let delta = linalg::op_norm(&(&dl - linalg::outer(&omega, &omega))).as_f64();
    let g = layers.max_noncommuting;
    let gap = s.gap.as_f64();
    let bound = if g == 0 { 0.0 } else { 1.0 / (1.0 + gap / (g * g) as f64) };
    let artifact = rank_artifact(dl, delta, Provenance::Detectability, omega, sh, caps, "DL".into())?;
    Ok(DetectabilityResult { artifact, bound, gap, g })
}

/// Terms that cannot be absorbed into `Π_A Π_B` from the left: boundary
/// terms, plus any term that fails to commute with a kept term of an
/// earlier layer.
pub fn absorption_set<T: Real>(sh: &SplitHamiltonian<T>, layers: &CommutingLayers) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for layer in &layers.layers {
        let earlier = kept.clone();
        for &k in layer {
            let hindered = sh.boundary_terms.contains(&k) || earlier.iter().any(|j| layers.conflicts[k].contains(j));
            if hindered {
                kept.push(k);
            }
        }
    }
    kept.sort_unstable();
    kept
}

pub struct AbsorbedDl<T: Real> {
    pub operator: CMat<T>,
    pub absorbed_set: Vec<usize>,
    /// `‖Π_AΠ_B·DL − Π_AΠ_B·Π_α Π_{k∈T_α∩C}(𝟙 − h_k)‖`.
    pub identity_residual: f64,
    pub pi_ab: CMat<T>,
}

pub fn absorbed_detectability<T: Real>(sh: &SplitHamiltonian<T>, layers: &CommutingLayers) -> AbsorbedDl<T> {
    let h = &sh.full;
    let dims = h.dims();
    let (pa, _) = block_ground_projector(&sh.h_a());
    let (pb, _) = block_ground_projector(&sh.h_b());
    let mut pi_ab = embed_side(&pa, &sh.cut.side_a, &dims);
    linalg::apply_local(&pb, &sh.cut.side_b, &dims, &mut pi_ab);
    let c = absorption_set(sh, layers);
    let full = &pi_ab * layered_product(h, layers, |_| true);
    let reduced = &pi_ab * layered_product(h, layers, |k| c.contains(&k));
    let identity_residual = linalg::op_norm(&(&full - &reduced)).as_f64();
    AbsorbedDl { operator: reduced, absorbed_set: c, identity_residual, pi_ab }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TruncationKind {
    FrustrationFree,
    Frustrated { xi: f64 },
}

/// Verified conclusions of a truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationChecks {
    pub frustration_free: Option<bool>,
    pub norm: f64,
    pub norm_bound: f64,
    pub gap: f64,
    pub gap_bound: f64,
    pub overlap: f64,
    pub overlap_bound: f64,
}

impl TruncationChecks {
    pub fn all_hold(&self) -> bool {
        self.frustration_free.unwrap_or(true)
            && self.norm <= self.norm_bound + 1e-9
            && self.gap >= self.gap_bound - 1e-9
            && self.overlap >= self.overlap_bound - 1e-9
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedHamiltonian<T: Real> {
    pub operator: CMat<T>,
    pub kind: TruncationKind,
    pub ground_energy: T,
    pub first_excited: T,
    pub max_energy: T,
    pub ground_state: CVec<T>,
    pub eigen: Eigensystem<T>,
    pub checks: TruncationChecks,
    /// Number of untouched boundary terms and their largest support (`b`).
    pub boundary_terms: usize,
    pub boundary_support: usize,
    pub local_dim: usize,
    pub split: SplitHamiltonian<T>,
}

impl<T: Real> TruncatedHamiltonian<T> {
    fn from_operator(op: CMat<T>, kind: TruncationKind, split: &SplitHamiltonian<T>, boundary: &[usize]) -> Result<(Self, Eigensystem<T>)> {
        let eigen = Eigensystem::of(&op);
        let s = eigen.summary()?;
        let h = &split.full;
        let th = TruncatedHamiltonian {
            operator: op,
            kind,
            ground_energy: s.ground_energy,
            first_excited: s.first_excited,
            max_energy: s.max_energy,
            ground_state: s.ground_state,
            eigen: eigen.clone(),
            checks: TruncationChecks { frustration_free: None, norm: 0.0, norm_bound: 0.0, gap: 0.0, gap_bound: 0.0, overlap: 0.0, overlap_bound: 0.0 },
            boundary_terms: boundary.len(),
            boundary_support: boundary.iter().map(|&k| h.terms[k].support.len()).max().unwrap_or(0),
            local_dim: h.sites.iter().map(|s| s.local_dimension).max().unwrap_or(2),
            split: split.clone(),
        };
        Ok((th, eigen))
    }

    pub fn gap(&self) -> T {
        self.first_excited - self.ground_energy
    }
}

/// `H̃ = Σ_{k∈C} h_k + (𝟙 − Π_A) + (𝟙 − Π_B)` for a frustration-free
/// projector Hamiltonian.
pub fn ff_truncate<T: Real>(sh: &SplitHamiltonian<T>, layers: &CommutingLayers, caps: &Caps) -> Result<TruncatedHamiltonian<T>> {
    let h = &sh.full;
    require_ff_projectors(h)?;
    let orig = Eigensystem::of(&h.dense_checked(caps)?).summary()?;
    if orig.ground_energy.abs().as_f64() > FF_TOL {
        return Err(Error::Frustrated(orig.ground_energy.as_f64()));
    }
    let dims = h.dims();
    let d = h.dim();
    let c = absorption_set(sh, layers);
    let (pa, _) = block_ground_projector(&sh.h_a());
    let (pb, _) = block_ground_projector(&sh.h_b());
    let mut op = h.dense_terms(&c);
    op += linalg::eye::<T>(d) - embed_side(&pa, &sh.cut.side_a, &dims);
    op += linalg::eye::<T>(d) - embed_side(&pb, &sh.cut.side_b, &dims);
    let op = linalg::symmetrize(&op);
    let (mut th, _) = TruncatedHamiltonian::from_operator(op, TruncationKind::FrustrationFree, sh, &c)?;
    let w = layers.layer_count as f64;
    let g = layers.max_noncommuting.max(1) as f64;
    let resid = (&th.operator * &orig.ground_state).norm().as_f64();
    th.checks = TruncationChecks {
        frustration_free: Some(th.ground_energy.abs().as_f64() <= FF_TOL && resid <= FF_TOL),
        norm: linalg::herm_norm(&th.operator).as_f64(),
        norm_bound: 2.0 + w * w * sh.boundary_size as f64,
        gap: th.gap().as_f64(),
        gap_bound: orig.gap.as_f64() / (4.0 * g * g),
        overlap: orig.ground_state.dotc(&th.ground_state).modulus_f64(),
        overlap_bound: 1.0 - 1e-9,
    };
    Ok(th)
}

trait ModF64 {
    fn modulus_f64(self) -> f64;
}

impl<T: Real> ModF64 for crate::scalar::C<T> {
    fn modulus_f64(self) -> f64 {
        crate::scalar::cabs(self).as_f64()
    }
}

/// How the truncation energy `ξ` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XiMode {
    /// `ξ = 99(w²|∂_w A| + ln(1/(εγ)))`.
    Formula,
    Fixed(f64),
    /// Smallest `ξ` (to `tol`) keeping gap `≥ γ/2` and overlap `≥ 1 − ε`.
    Bisection { tol: f64 },
}

pub fn xi_formula(width: usize, extended_boundary: usize, epsilon: f64, gap: f64) -> f64 {
    let w = width as f64;
    99.0 * (w * w * extended_boundary as f64 + (1.0 / (epsilon * gap)).ln())
}

struct FrustratedParts<T: Real> {
    a_vals: Vec<T>,
    a_vecs: CMat<T>,
    b_vals: Vec<T>,
    b_vecs: CMat<T>,
    boundary: CMat<T>,
}

fn frustrated_parts<T: Real>(sh: &SplitHamiltonian<T>) -> FrustratedParts<T> {
    let inner_a: Vec<usize> = sh.a_terms.iter().copied().filter(|k| !sh.extended_terms.contains(k)).collect();
    let inner_b: Vec<usize> = sh.b_terms.iter().copied().filter(|k| !sh.extended_terms.contains(k)).collect();
    let (a_vals, a_vecs) = linalg::eigh(&sh.block_a(&inner_a).dense());
    let (b_vals, b_vecs) = linalg::eigh(&sh.block_b(&inner_b).dense());
    let boundary = sh.full.dense_terms(&sh.extended_terms);
    FrustratedParts { a_vals, a_vecs, b_vals, b_vecs, boundary }
}

fn truncated_operator<T: Real>(sh: &SplitHamiltonian<T>, p: &FrustratedParts<T>, xi: T) -> CMat<T> {
    let dims = sh.full.dims();
    let clip = |l: T| creal(if l < xi { l } else { xi });
    let ta = linalg::herm_fn(&p.a_vals, &p.a_vecs, clip);
    let tb = linalg::herm_fn(&p.b_vals, &p.b_vecs, clip);
    let mut op = p.boundary.clone();
    op += embed_side(&ta, &sh.cut.side_a, &dims);
    op += embed_side(&tb, &sh.cut.side_b, &dims);
    linalg::symmetrize(&op)
}

/// `H̃ = H̃_A + H̃_B + H_{∂_w A}` with `H̃_X = H_X Π^{<ξ} + ξ Π^{≥ξ}`.
pub fn frustrated_truncate<T: Real>(sh: &SplitHamiltonian<T>, epsilon: f64, mode: XiMode, caps: &Caps) -> Result<TruncatedHamiltonian<T>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let orig = Eigensystem::of(&sh.full.dense_checked(caps)?).summary()?;
    let gamma = orig.gap.as_f64();
    let parts = frustrated_parts(sh);
    let floor = p_floor(&parts);
    let evaluate = |xi: f64| -> Result<TruncatedHamiltonian<T>> {
        if xi <= floor {
            return Err(Error::TruncationBelowGround { xi, floor });
        }
        let op = truncated_operator(sh, &parts, T::lit(xi));
        let (mut th, _) = TruncatedHamiltonian::from_operator(op, TruncationKind::Frustrated { xi }, sh, &sh.extended_terms)?;
        let w = sh.cut.width_w as f64;
        let e0 = th.ground_energy;
        let shifted_norm = th.eigen.values.iter().map(|&v| (v - e0).abs().as_f64()).fold(0.0, f64::max);
        th.checks = TruncationChecks {
            frustration_free: None,
            norm: shifted_norm,
            norm_bound: 100.0 * w * w * sh.extended_boundary_size as f64,
            gap: th.gap().as_f64(),
            gap_bound: gamma / 2.0,
            overlap: orig.ground_state.dotc(&th.ground_state).modulus_f64(),
            overlap_bound: 1.0 - epsilon,
        };
        Ok(th)
    };
    match mode {
        XiMode::Formula => evaluate(xi_formula(sh.cut.width_w, sh.extended_boundary_size, epsilon, gamma)),
        XiMode::Fixed(xi) => evaluate(xi),
        XiMode::Bisection { tol } => {
            let top = p_ceiling(&parts);
            let mut hi = top.max(floor) + 1e-6;
            let ok = |xi: f64| evaluate(xi).map(|t| t.checks.gap >= t.checks.gap_bound && t.checks.overlap >= t.checks.overlap_bound).unwrap_or(false);
            if !ok(hi) {
                return evaluate(hi);
            }
            let mut lo = floor;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            evaluate(hi)
        }
    }
}

fn p_floor<T: Real>(p: &FrustratedParts<T>) -> f64 {
    let fa = p.a_vals.first().map_or(0.0, |v| v.as_f64());
    let fb = p.b_vals.first().map_or(0.0, |v| v.as_f64());
    fa.max(fb)
}

fn p_ceiling<T: Real>(p: &FrustratedParts<T>) -> f64 {
    let fa = p.a_vals.last().map_or(0.0, |v| v.as_f64());
    let fb = p.b_vals.last().map_or(0.0, |v| v.as_f64());
    fa.max(fb)
}

/// `x(λ) = 1 + 2(E′_1 − λ)/(E′_max − E′_1)` and `x_0 = x(E′_0)`.
#[derive(Clone, Copy, Debug)]
pub struct ChebyshevMap {
    pub e0: f64,
    pub e1: f64,
    pub emax: f64,
}

impl ChebyshevMap {
    pub fn of<T: Real>(th: &TruncatedHamiltonian<T>) -> Result<Self> {
        let m = ChebyshevMap { e0: th.ground_energy.as_f64(), e1: th.first_excited.as_f64(), emax: th.max_energy.as_f64() };
        if !(m.emax > m.e1) {
            return Err(Error::ChebyshevDegenerate(format!("E'_1 = {} is not below E'_max = {}", m.e1, m.emax)));
        }
        if !(m.e1 > m.e0) {
            return Err(Error::ChebyshevDegenerate("zero truncated gap".into()));
        }
        Ok(m)
    }

    pub fn x(&self, lambda: f64) -> f64 {
        1.0 + 2.0 * (self.e1 - lambda) / (self.emax - self.e1)
    }

    pub fn x0(&self) -> f64 {
        self.x(self.e0)
    }

    /// `(E′_1 − E′_0)/(E′_max − E′_1)`.
    pub fn ratio(&self) -> f64 {
        (self.e1 - self.e0) / (self.emax - self.e1)
    }

    /// `2 e^{−2q√ratio}`.
    pub fn shrink_bound(&self, q: usize) -> f64 {
        2.0 * (-2.0 * q as f64 * self.ratio().sqrt()).exp()
    }

    /// `2 e^{−q·arccosh x_0}`, the exact envelope of `1/T_q(x_0)`.
    pub fn exact_envelope(&self, q: usize) -> f64 {
        2.0 * (-(q as f64) * self.x0().acosh()).exp()
    }

    /// `T_q(x(λ)) / T_q(x_0)` evaluated with the same ratio recurrence.
    pub fn filter(&self, q: usize, lambda: f64) -> f64 {
        let x = self.x(lambda);
        let x0 = self.x0();
        if q == 0 {
            return 1.0;
        }
        let (mut prev, mut cur) = (1.0, x / x0);
        let mut s = x0;
        for _ in 1..q {
            let s_next = 2.0 * x0 - 1.0 / s;
            let next = (2.0 / s_next) * x * cur - prev / (s_next * s);
            prev = cur;
            cur = next;
            s = s_next;
        }
        cur
    }
}

/// Schmidt-rank count `e^{q ln(q² s^b |∂_w A|)}` in bits.
pub fn sr_bound_log2(q: usize, local_dim: usize, support: usize, boundary_terms: usize) -> f64 {
    if q == 0 {
        return 0.0;
    }
    let base = (q * q) as f64 * (local_dim as f64).powi(support as i32) * boundary_terms.max(1) as f64;
    q as f64 * base.log2()
}

#[derive(Clone, Debug)]
pub struct ChebyshevStep<T: Real> {
    pub q: usize,
    pub artifact: AgspArtifact<T>,
    /// `max_{i≥1} |Q_q(λ_i)|` from the scalar map.
    pub scalar_delta: f64,
    pub shrink_bound: f64,
    pub exact_envelope: f64,
    pub sr_bound_log2: f64,
    /// `‖K|Ω′⟩ − |Ω′⟩‖`.
    pub fixed_point_residual: f64,
}

/// `Q_q(H̃)` for `q = 0..=q_max` through the normalised three-term
/// recurrence `Q_{j+1} = (2/s_{j+1}) X Q_j − Q_{j−1}/(s_{j+1} s_j)`, where
/// `s_j = T_j(x_0)/T_{j−1}(x_0)`.
pub fn chebyshev_sequence<T: Real>(th: &TruncatedHamiltonian<T>, q_max: usize, caps: &Caps) -> Result<Vec<ChebyshevStep<T>>> {
    let map = ChebyshevMap::of(th)?;
    let d = th.operator.nrows();
    let id = linalg::eye::<T>(d);
    // X = 1 + 2(E′_1 − H̃)/(E′_max − E′_1)
    let scale = T::lit(2.0 / (map.emax - map.e1));
    let x = &id * creal(T::one() + T::lit(map.e1) * scale) - &th.operator * creal(scale);
    let x0 = map.x0();
    let omega = &th.ground_state;
    let proj = linalg::outer(omega, omega);
    let mut steps = Vec::with_capacity(q_max + 1);
    let mut push = |q: usize, k: &CMat<T>| -> Result<()> {
        steps.push(chebyshev_step(th, &map, q, k.clone(), &proj, caps)?);
        Ok(())
    };
    let mut prev = id.clone();
    push(0, &prev)?;
    if q_max == 0 {
        return Ok(steps);
    }
    let mut cur = &x * creal(T::lit(1.0 / x0));
    push(1, &cur)?;
    let mut s = x0;
    for q in 2..=q_max {
        let s_next = 2.0 * x0 - 1.0 / s;
        if !s_next.is_finite() || s_next <= 0.0 {
            return Err(Error::ChebyshevDegenerate(format!("normaliser ratio broke down at q={q}")));
        }
        let next = &x * &cur * creal(T::lit(2.0 / s_next)) - &prev * creal(T::lit(1.0 / (s_next * s)));
        prev = cur;
        cur = next;
        s = s_next;
        push(q, &cur)?;
    }
    Ok(steps)
}

pub fn chebyshev_agsp<T: Real>(th: &TruncatedHamiltonian<T>, q: usize, caps: &Caps) -> Result<ChebyshevStep<T>> {
    Ok(chebyshev_sequence(th, q, caps)?.pop().expect("q+1 steps"))
}

fn chebyshev_step<T: Real>(th: &TruncatedHamiltonian<T>, map: &ChebyshevMap, q: usize, k: CMat<T>, proj: &CMat<T>, caps: &Caps) -> Result<ChebyshevStep<T>> {
    let omega = &th.ground_state;
    let delta = linalg::herm_norm(&linalg::symmetrize(&(&k - proj))).as_f64();
    let fixed_point_residual = (&k * omega - omega).norm().as_f64();
    let scalar_delta = th.eigen.values[1..].iter().map(|&l| map.filter(q, l.as_f64()).abs()).fold(0.0, f64::max);
    let artifact = rank_artifact(k, delta, Provenance::Chebyshev { q }, omega.clone(), &th.split, caps, format!("Q_{q}"))?;
    Ok(ChebyshevStep {
        q,
        artifact,
        scalar_delta,
        shrink_bound: map.shrink_bound(q),
        exact_envelope: map.exact_envelope(q),
        sr_bound_log2: sr_bound_log2(q, th.local_dim, th.boundary_support, th.boundary_terms),
        fixed_point_residual,
    })
}

/// Wraps a dense operator as an artifact with its measured operator Schmidt rank.
pub fn rank_artifact<T: Real>(
    k: CMat<T>,
    delta: f64,
    provenance: Provenance,
    target: CVec<T>,
    sh: &SplitHamiltonian<T>,
    caps: &Caps,
    label: String,
) -> Result<AgspArtifact<T>> {
    let dims = sh.full.dims();
    let da = sh.full.dim_of(&sh.cut.side_a);
    let db = sh.full.dim_of(&sh.cut.side_b);
    let cap = 1usize << caps.osvd_qubits;
    if da * da > cap || db * db > cap {
        return Err(Error::CapExceeded { what: "operator-space SVD", dim: (da * da).max(db * db) as u128, cap: cap as u128 });
    }
    let (rank, _) = operator_schmidt_rank(&k, &sh.cut, &dims, DEFAULT_RANK_THRESHOLD);
    Ok(AgspArtifact {
        operator: Some(k),
        error_delta: delta,
        schmidt_rank: rank,
        log2_rank: (rank as f64).log2(),
        comm_cost: None,
        provenance,
        target_state: fix_phase(target),
        cut: sh.cut.clone(),
        dims,
        label: format!("{label} on {}", sh.full.label),
    })
}
