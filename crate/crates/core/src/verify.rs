//! Checks of the AGSP spread bound on concrete instances, the heavy/light
//! chain behind it, and boundary-scaling sweeps.

use std::fmt;

use crate::agsp_cheby::{chebyshev_sequence, frustrated_truncate, XiMode};
use crate::agsp_qpe::{qpe_agsp, QpeConfig};
use crate::artifact::AgspArtifact;
use crate::error::{Error, Result};
use crate::hamlib::{build_model, split, Bipartition, Caps, ModelSpec};
use crate::linalg;
use crate::scalar::Real;
use crate::spectra::{self, entanglement_spread, heavy_light_split, schmidt, Level, SchmidtSpectrum};

/// Comparison slack for `lhs ≤ rhs`.
pub const SPREAD_TOL: f64 = 1e-9;

/// `1/(4√2)`: above this the smoothing parameter reaches one.
pub fn delta_limit() -> f64 {
    1.0 / (4.0 * std::f64::consts::SQRT_2)
}

/// `2(2Δ)^{2/3}`.
pub fn smoothing_for(delta: f64) -> f64 {
    2.0 * (2.0 * delta).powf(2.0 / 3.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpreadBoundReport {
    pub label: String,
    pub delta: f64,
    pub smoothing: f64,
    pub smooth_max_bits: f64,
    pub smooth_min_bits: f64,
    pub lhs_spread_bits: f64,
    /// `log2 D` used on the right (communication cost for protocols).
    pub log_d: f64,
    /// Measured `log2` operator Schmidt rank, when it differs from `log_d`.
    pub log2_rank: f64,
    pub rhs_logd_plus_1: f64,
    /// `None` when `Δ ≥ 1/(4√2)`.
    pub satisfied: Option<bool>,
}

impl SpreadBoundReport {
    pub fn applicable(&self) -> bool {
        self.satisfied.is_some()
    }

    /// Passes unless the bound applies and fails.
    pub fn ok(&self) -> bool {
        self.satisfied != Some(false)
    }
}

impl fmt::Display for SpreadBoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match self.satisfied {
            Some(true) => "satisfied",
            Some(false) => "VIOLATED",
            None => "not applicable",
        };
        write!(
            f,
            "{}: Δ={:.3e} smoothing={:.4} ES={:.6} ≤ logD+1={:.6}: {verdict}",
            self.label, self.delta, self.smoothing, self.lhs_spread_bits, self.rhs_logd_plus_1
        )
    }
}

/// `S_max^s − S_min^s ≤ log2 D + 1` with `s = 2(2Δ)^{2/3}`.
pub fn spread_bound<T: Real>(agsp: &AgspArtifact<T>, spectrum: &SchmidtSpectrum<T>) -> SpreadBoundReport {
    let delta = agsp.error_delta;
    let smoothing = smoothing_for(delta);
    let applicable = delta < delta_limit() && smoothing < 1.0;
    let s = T::lit(smoothing.min(1.0 - 1e-15));
    let smax = spectra::smooth_max_entropy(spectrum, s).as_f64();
    let smin = spectra::smooth_min_entropy(spectrum, s).as_f64();
    let lhs = smax - smin;
    let log_d = agsp.log_d();
    let rhs = log_d + 1.0;
    SpreadBoundReport {
        label: agsp.label.clone(),
        delta,
        smoothing,
        smooth_max_bits: smax,
        smooth_min_bits: smin,
        lhs_spread_bits: lhs,
        log_d,
        log2_rank: agsp.log2_rank,
        rhs_logd_plus_1: rhs,
        satisfied: applicable.then_some(lhs <= rhs + SPREAD_TOL),
    }
}

/// [`spread_bound`] on the Schmidt spectrum of the artifact's target state.
pub fn spread_bound_for<T: Real>(agsp: &AgspArtifact<T>) -> Result<SpreadBoundReport> {
    let spec = schmidt(&agsp.target_state, &agsp.cut, &agsp.dims)?;
    Ok(spread_bound(agsp, &spec))
}

/// The counting argument behind the spread bound, replayed on one instance:
/// the heavy part of `Ω` (first `b − 1` Schmidt vectors, mass `≥ ε′`) is
/// mapped by the AGSP to a state of Schmidt rank `≤ (b−1)D` whose overlap
/// with `Ω` is at least `1 − 2Δ/√ε′`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeavyLightReport {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub cutoff_index: usize,
    pub heavy_rank: u64,
    /// `⟨Ω|Ω_heavy⟩` measured.
    pub overlap: f64,
    /// `√(heavy mass)`, which the overlap must equal.
    pub overlap_identity: f64,
    pub rank_bound: u64,
    /// Mass of the `(b−1)D` largest Schmidt values of `Ω`.
    pub top_mass: f64,
    /// `(1 − 2Δ/√ε′)²`, clamped at zero.
    pub lower_bound: f64,
    /// `|⟨Ω|K Ω_heavy⟩|² / ‖K Ω_heavy‖²` when the operator is available.
    pub image_overlap: Option<f64>,
    pub holds: bool,
}

pub const CHAIN_TOL: f64 = 1e-8;

pub fn heavy_light_chain<T: Real>(agsp: &AgspArtifact<T>, epsilon: f64) -> Result<HeavyLightReport> {
    let omega = &agsp.target_state;
    let split = heavy_light_split(omega, &agsp.cut, &agsp.dims, T::lit(epsilon))?;
    let epsilon_prime = split.heavy_mass.as_f64();
    let b = split.cutoff_index;
    let heavy_rank = schmidt(&split.heavy_state, &agsp.cut, &agsp.dims)?.rank();
    let overlap = crate::scalar::cabs(omega.dotc(&split.heavy_state)).as_f64();
    let overlap_identity = split.heavy_mass.as_f64().sqrt();
    let spec = schmidt(omega, &agsp.cut, &agsp.dims)?;
    let rank_bound = if agsp.log_d() >= 63.0 { u64::MAX } else { ((b - 1) as u64).saturating_mul(agsp.schmidt_rank.max(1)) };
    let top_mass = spec.top_mass(rank_bound).as_f64();
    let lower_bound = (1.0 - 2.0 * agsp.error_delta / epsilon_prime.sqrt()).max(0.0).powi(2);
    let image_overlap = agsp.operator.as_ref().map(|k| {
        let img = k * &split.heavy_state;
        let nrm = img.norm_squared().as_f64();
        if nrm == 0.0 {
            0.0
        } else {
            crate::scalar::cabs(omega.dotc(&img)).as_f64().powi(2) / nrm
        }
    });
    let holds = heavy_rank == (b - 1) as u64
        && (overlap - overlap_identity).abs() <= CHAIN_TOL
        && top_mass >= lower_bound - CHAIN_TOL
        && image_overlap.map_or(true, |o| o >= lower_bound - CHAIN_TOL && o <= top_mass + CHAIN_TOL);
    Ok(HeavyLightReport {
        epsilon,
        epsilon_prime,
        cutoff_index: b,
        heavy_rank,
        overlap,
        overlap_identity,
        rank_bound,
        top_mass,
        lower_bound,
        image_overlap,
        holds,
    })
}

// ---------------------------------------------------------------------------
// scaling sweeps

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub family: String,
    pub instance_id: String,
    pub n: usize,
    pub boundary_size: usize,
    pub gap: Option<f64>,
    /// Smoothing `δ` of the measured spread.
    pub delta: f64,
    pub es_bits: f64,
    /// Closed-form spread where one exists.
    pub closed_form: Option<f64>,
    pub cheby: Option<SpreadBoundReport>,
    pub qpe: Option<SpreadBoundReport>,
    /// Set when the row stands for an instance that could not be built.
    pub marker: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln ES` against `ln |∂A|` (rows with `ES > 0`).
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

fn fit_rows(rows: &[ScalingRow]) -> (f64, f64, f64) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.marker.is_none() && r.es_bits > 0.0 && r.boundary_size > 0)
        .map(|r| ((r.boundary_size as f64).ln(), r.es_bits.ln()))
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    linalg::fit_line(&xs, &ys)
}

/// Schmidt spectrum of `a_0|00⟩ + a_1|11⟩` across the pair.
pub fn pair_spectrum(amplitudes: (f64, f64)) -> Result<SchmidtSpectrum<f64>> {
    let (a, b) = amplitudes;
    SchmidtSpectrum::from_values(&[a * a, b * b])
}

/// `ES_0` of `k` two-level pairs: `k(1 + log2 p_max)`, which is `k·log2(4/3)`
/// for weights `(2/3, 1/3)`.
pub fn paired_product_closed_form(k: usize, amplitudes: (f64, f64)) -> f64 {
    let (a, b) = (amplitudes.0 * amplitudes.0, amplitudes.1 * amplitudes.1);
    k as f64 * (1.0 + a.max(b).log2())
}

/// `ES_δ` of `k` boundary pairs for each `k`, from the tensor-power spectrum.
pub fn paired_product_sweep(ks: &[usize], amplitudes: (f64, f64), delta: f64) -> Result<ScalingTable> {
    let single = pair_spectrum(amplitudes)?;
    let rows: Vec<ScalingRow> = ks
        .iter()
        .map(|&k| {
            let spec = single.tensor_power(k);
            ScalingRow {
                family: "paired_product".into(),
                instance_id: format!("paired_product_k{k}_d{delta}"),
                n: 2 * k,
                boundary_size: k,
                gap: Some(1.0),
                delta,
                es_bits: entanglement_spread(&spec, delta),
                closed_form: (delta == 0.0).then(|| paired_product_closed_form(k, amplitudes)),
                cheby: None,
                qpe: None,
                marker: None,
            }
        })
        .collect();
    let (slope, intercept, residual) = fit_rows(&rows);
    Ok(ScalingTable { rows, slope, intercept, residual })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderSweep {
    pub rungs: Vec<usize>,
    pub g: f64,
    /// Smoothing of the reported `ES_δ`.
    pub delta: f64,
    /// AGSP error targets.
    pub cheby_delta: f64,
    pub qpe_delta: f64,
    pub max_q: usize,
    pub qpe_bits: Vec<u32>,
}

impl Default for LadderSweep {
    fn default() -> Self {
        LadderSweep { rungs: vec![1, 2, 3, 4], g: 2.0, delta: 0.01, cheby_delta: 0.05, qpe_delta: 0.05, max_q: 60, qpe_bits: vec![4, 5, 6, 7, 8] }
    }
}

/// Smallest Chebyshev degree with defining error `≤ target`.
pub fn cheby_artifact_for(sh: &crate::hamlib::SplitHamiltonian<f64>, target: f64, max_q: usize, caps: &Caps) -> Result<AgspArtifact<f64>> {
    let th = frustrated_truncate(sh, 0.01, XiMode::Formula, caps)?;
    let seq = chebyshev_sequence(&th, max_q, caps)?;
    seq.into_iter()
        .skip(1)
        .find(|s| s.artifact.error_delta <= target)
        .map(|s| s.artifact)
        .ok_or_else(|| Error::BudgetInfeasible(format!("Chebyshev degree {max_q} does not reach Δ = {target}")))
}

/// Smallest `(f, k)` phase-estimation AGSP with defining error `≤ target`.
pub fn qpe_artifact_for(sh: &crate::hamlib::SplitHamiltonian<f64>, target: f64, bits: &[u32], caps: &Caps) -> Result<AgspArtifact<f64>> {
    let ev = linalg::eigvalsh(&sh.full.dense_checked(caps)?);
    let range = ev[ev.len() - 1] - ev[0];
    let mut last = Err(Error::BudgetInfeasible("no phase-register size given".into()));
    for &f in bits {
        let probe = match qpe_agsp(sh, QpeConfig::calibrated(f, 1, range), caps) {
            Ok(p) => p,
            Err(e @ Error::UnresolvableGap { .. }) => {
                last = Err(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(k) = (1..=32).find(|&k| probe.kernel.defining_error(k) <= target) {
            return Ok(qpe_agsp(sh, QpeConfig::calibrated(f, k, range), caps)?.artifact);
        }
        last = Err(Error::BudgetInfeasible(format!("f = {f} does not reach Δ = {target}")));
    }
    last
}

/// Two-leg transverse-field ladders `[2, r]` cut between the legs, so the
/// boundary grows with the number of rungs.
pub fn tfim_ladder_sweep(cfg: &LadderSweep, caps: &Caps) -> ScalingTable {
    let mut rows = Vec::new();
    for &r in &cfg.rungs {
        let id = format!("tfim_ladder_2x{r}_g{}", cfg.g);
        match ladder_row(cfg, r, caps) {
            Ok(row) => rows.push(row),
            Err(e) => {
                rows.push(ScalingRow {
                    family: "tfim_ladder".into(),
                    instance_id: id,
                    n: 2 * r,
                    boundary_size: r,
                    gap: None,
                    delta: cfg.delta,
                    es_bits: f64::NAN,
                    closed_form: None,
                    cheby: None,
                    qpe: None,
                    marker: Some(e.to_string()),
                });
                break;
            }
        }
    }
    let (slope, intercept, residual) = fit_rows(&rows);
    ScalingTable { rows, slope, intercept, residual }
}

fn ladder_row(cfg: &LadderSweep, r: usize, caps: &Caps) -> Result<ScalingRow> {
    let spec = ModelSpec::Tfim { dims: vec![2, r], j: 1.0, g: cfg.g, periodic: false };
    let h = build_model::<f64>(&spec, caps)?;
    let sh = split(&h, &Bipartition::prefix(r, 2 * r))?;
    let summary = spectra::diagonalize(&h, caps)?;
    let spec_omega = schmidt(&summary.ground_state, &sh.cut, &h.dims())?;
    let cheby = cheby_artifact_for(&sh, cfg.cheby_delta, cfg.max_q, caps)?;
    let qpe = qpe_artifact_for(&sh, cfg.qpe_delta, &cfg.qpe_bits, caps)?;
    Ok(ScalingRow {
        family: "tfim_ladder".into(),
        instance_id: format!("tfim_ladder_2x{r}_g{}", cfg.g),
        n: 2 * r,
        boundary_size: sh.boundary_size,
        gap: Some(summary.gap),
        delta: cfg.delta,
        es_bits: entanglement_spread(&spec_omega, cfg.delta),
        closed_form: None,
        cheby: Some(spread_bound_for(&cheby)?),
        qpe: Some(spread_bound_for(&qpe)?),
        marker: None,
    })
}

/// Spectrum of `ψ ⊗ Φ_p` from that of `ψ`.
pub fn with_epr(spec: &SchmidtSpectrum<f64>, p: u64) -> SchmidtSpectrum<f64> {
    spec.tensor(&SchmidtSpectrum::from_levels(vec![Level { value: 1.0 / p as f64, multiplicity: p }]))
}
