//! One function per table. Everything is computed in memory; nothing touches
//! the file system here.

use std::cell::OnceCell;

use agsp_core::agsp_cheby::{chebyshev_sequence, color_terms, ff_truncate, frustrated_truncate, XiMode};
use agsp_core::agsp_qpe::{qpe_agsp, QpeConfig};
use agsp_core::hamlib::{build_model, split, Caps};
use agsp_core::linalg;
use agsp_core::protocol::{
    assist_rank_sweep, build_expander, compress_agsp, decompose_agsp, ground_measurement_cost, measure_ground_state, GroundMeasurementConfig,
    InteractionPicture, PartyState,
};
use agsp_core::spectra::{diagonalize, entanglement_spread, schmidt, smooth_max_entropy, smooth_min_entropy, Eigensystem, SchmidtSpectrum};
use agsp_core::verify::{cheby_artifact_for, heavy_light_chain, pair_spectrum, paired_product_sweep, spread_bound_for, tfim_ladder_sweep, LadderSweep, ScalingTable};
use agsp_core::{AgspArtifact, LocalHamiltonian, SpectrumSummary, SplitHamiltonian};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, StateKind, TableKind, Truncation};
use crate::table::{num, Row, Series, Table};
use crate::CliError;

/// Heavy-mass threshold used when replaying the heavy/light chain.
const CHAIN_EPSILON: f64 = 0.5;

#[derive(Debug, Default)]
pub struct Outputs {
    pub tables: Vec<Table>,
    pub series: Vec<Series>,
    /// Extra files (name, bytes), e.g. protocol transcripts.
    pub files: Vec<(String, Vec<u8>)>,
    /// Lines for standard output.
    pub messages: Vec<String>,
}

impl Outputs {
    pub fn violations(&self) -> usize {
        self.tables.iter().map(Table::violations).sum()
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

struct Instance {
    h: LocalHamiltonian,
    sh: SplitHamiltonian,
    summary: SpectrumSummary,
    id: String,
}

struct Ctx<'a> {
    cfg: &'a Config,
    caps: Caps,
    seed: u64,
    inst: OnceCell<Instance>,
    artifacts: Vec<AgspArtifact>,
}

impl<'a> Ctx<'a> {
    fn instance(&self) -> Result<&Instance, CliError> {
        if let Some(i) = self.inst.get() {
            return Ok(i);
        }
        let spec = self.cfg.model_spec()?;
        let cut = self.cfg.cut()?;
        let h = build_model::<f64>(&spec, &self.caps)?;
        let sh = split(&h, &cut)?;
        let summary = diagonalize(&h, &self.caps)?;
        let m = self.cfg.model()?;
        let dims: Vec<String> = h.dims_lattice().iter().map(|d| d.to_string()).collect();
        let id = format!("{}_{}", m.name, dims.join("x"));
        Ok(self.inst.get_or_init(|| Instance { h, sh, summary, id }))
    }

    fn base_row(&self, suffix: &str) -> Result<Row, CliError> {
        let i = self.instance()?;
        Ok(Row {
            instance_id: if suffix.is_empty() { i.id.clone() } else { format!("{}_{suffix}", i.id) },
            n: Some(i.h.n()),
            cut: i.sh.cut.to_string(),
            boundary_size: Some(i.sh.boundary_size),
            gap: Some(i.summary.gap),
            ..Row::default()
        })
    }
}

trait LatticeDims {
    fn dims_lattice(&self) -> Vec<usize>;
}

impl LatticeDims for LocalHamiltonian {
    fn dims_lattice(&self) -> Vec<usize> {
        match &self.geometry {
            agsp_core::hamlib::Geometry::Lattice(d) => d.clone(),
            _ => vec![self.n()],
        }
    }
}

/// Computes the requested tables in a fixed order.
pub fn compute(cfg: &Config, tables: &[TableKind], caps: Caps, seed: u64) -> Result<Outputs, CliError> {
    let mut ctx = Ctx { cfg, caps, seed, inst: OnceCell::new(), artifacts: Vec::new() };
    let mut out = Outputs::default();
    let mut sorted = tables.to_vec();
    sorted.sort();
    sorted.dedup();
    for t in sorted {
        match t {
            TableKind::Spectrum => spectrum(&ctx, &mut out)?,
            TableKind::Spread => spread(&ctx, &mut out)?,
            TableKind::Chebyshev => {
                let t = cheby(&mut ctx)?;
                out.tables.push(t);
            }
            TableKind::Qpe => {
                let t = qpe(&mut ctx)?;
                out.tables.push(t);
            }
            TableKind::Protocol => protocol(&mut ctx, &mut out)?,
            TableKind::Compress => compress(&mut ctx, &mut out)?,
            TableKind::VerifyBounds => verify_bounds(&mut ctx, &mut out)?,
            TableKind::Scaling => scaling(&ctx, &mut out)?,
        }
    }
    let plots = cfg.output.formats.iter().any(|f| f == "plot");
    if !plots {
        out.series.clear();
    }
    Ok(out)
}

fn spectrum(ctx: &Ctx, out: &mut Outputs) -> Result<(), CliError> {
    let i = ctx.instance()?;
    let s = &i.summary;
    let spec = schmidt(&s.ground_state, &i.sh.cut, &i.h.dims())?;
    let mut row = ctx.base_row("")?;
    row.delta = Some(0.0);
    row.es_bits = Some(entanglement_spread(&spec, 0.0));
    row.extra = vec![
        num(s.ground_energy),
        num(s.first_excited),
        num(s.max_energy),
        num(i.h.rescaling.raw_gap(s.gap)),
        num(i.h.rescaling.scale),
        spec.rank().to_string(),
    ];
    let mut t = Table::new("spectrum", &["e0", "e1", "emax", "raw_gap", "scale", "schmidt_rank"]);
    t.rows.push(row);
    out.tables.push(t);
    Ok(())
}

fn spread(ctx: &Ctx, out: &mut Outputs) -> Result<(), CliError> {
    let kind = ctx.cfg.state_kind()?;
    let (spec, base, label) = match &kind {
        StateKind::Ground => {
            let i = ctx.instance()?;
            (schmidt(&i.summary.ground_state, &i.sh.cut, &i.h.dims())?, ctx.base_row("ground")?, "ground".to_string())
        }
        StateKind::MaxEntangled(p) => {
            let row = Row { instance_id: format!("max_entangled_p{p}"), ..Row::default() };
            (SchmidtSpectrum::maximally_entangled(*p), row, format!("max_entangled(p={p})"))
        }
        StateKind::Paired { k, amplitudes } => {
            let row = Row { instance_id: format!("paired_k{k}"), n: Some(2 * k), boundary_size: Some(*k), ..Row::default() };
            (pair_spectrum(*amplitudes)?.tensor_power(*k), row, format!("paired(k={k})"))
        }
    };
    let mut t = Table::new("spread", &["state", "smooth_max_bits", "smooth_min_bits", "schmidt_rank"]);
    for d in ctx.cfg.spread_deltas()? {
        let es = entanglement_spread(&spec, d);
        out.messages.push(format!("ES_{d} = {es}"));
        let mut row = base.clone();
        row.delta = Some(d);
        row.smoothing = Some(d);
        row.es_bits = Some(es);
        row.extra = vec![label.clone(), num(smooth_max_entropy(&spec, d)), num(smooth_min_entropy(&spec, d)), spec.rank().to_string()];
        t.rows.push(row);
    }
    out.tables.push(t);
    Ok(())
}

fn cheby(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (qs, mode) = ctx.cfg.chebyshev()?;
    let i = ctx.instance()?;
    let (th, trunc) = match mode {
        Truncation::FrustrationFree => (ff_truncate(&i.sh, &color_terms(&i.h), &ctx.caps)?, "ff".to_string()),
        Truncation::Frustrated(m) => (frustrated_truncate(&i.sh, ctx.cfg.chebyshev_epsilon(), m, &ctx.caps)?, xi_mode_name(m).to_string()),
    };
    let q_max = *qs.iter().max().expect("validated non-empty");
    let seq = chebyshev_sequence(&th, q_max, &ctx.caps)?;
    let mut t = Table::new(
        "agsp_cheby",
        &["q", "truncation", "schmidt_rank", "sr_bound_log2", "shrink_bound", "exact_envelope", "truncated_gap"],
    );
    let mut found = Vec::new();
    for &q in &qs {
        let step = &seq[q];
        let r = spread_bound_for(&step.artifact)?;
        let mut row = ctx.base_row(&format!("cheby_q{q}"))?.with_report(&r);
        row.extra = vec![
            q.to_string(),
            trunc.clone(),
            step.artifact.schmidt_rank.to_string(),
            num(step.sr_bound_log2),
            num(step.shrink_bound),
            num(step.exact_envelope),
            num(th.gap()),
        ];
        t.rows.push(row);
        found.push(step.artifact.clone());
    }
    ctx.artifacts.extend(found);
    Ok(t)
}

fn xi_mode_name(m: XiMode) -> &'static str {
    match m {
        XiMode::Formula => "formula",
        XiMode::Bisection { .. } => "bisection",
        XiMode::Fixed(_) => "fixed",
    }
}

fn qpe(ctx: &mut Ctx) -> Result<Table, CliError> {
    let (f, ks) = ctx.cfg.qpe()?;
    let i = ctx.instance()?;
    let range = i.summary.max_energy - i.summary.ground_energy;
    let mut t = Table::new("agsp_qpe", &["f", "k", "sigma", "time_unit", "energy_window", "schmidt_rank"]);
    let mut found = Vec::new();
    for &k in &ks {
        let cfg = QpeConfig::calibrated(f, k, range);
        let a = qpe_agsp(&i.sh, cfg, &ctx.caps)?;
        let r = spread_bound_for(&a.artifact)?;
        let mut row = ctx.base_row(&format!("qpe_f{f}_k{k}"))?.with_report(&r);
        row.extra = vec![
            f.to_string(),
            k.to_string(),
            num(a.sigma),
            num(cfg.time_unit),
            num(cfg.energy_window),
            a.artifact.schmidt_rank.to_string(),
        ];
        t.rows.push(row);
        found.push(a.artifact);
    }
    ctx.artifacts.extend(found);
    Ok(t)
}

fn protocol(ctx: &mut Ctx, out: &mut Outputs) -> Result<(), CliError> {
    let (sec, inputs) = ctx.cfg.protocol()?;
    let sec = sec.clone();
    let i = ctx.instance()?;
    let ip = InteractionPicture::of(&i.sh, &ctx.caps)?;
    let exp = build_expander::<f64>(sec.p.unwrap_or(4), sec.d, ctx.seed, &ctx.caps)?;
    if let Some(eps) = sec.epsilon {
        if exp.measured_epsilon > eps {
            return Err(CliError::Run(format!(
                "measured expander error {} exceeds construction.protocol.epsilon = {eps}; raise `d` or change the seed",
                exp.measured_epsilon
            )));
        }
    }
    let eig = Eigensystem::of(&ip.h);
    let mut t = Table::new(
        "protocol",
        &[
            "input",
            "outcome",
            "accept_lo",
            "accept_hi",
            "accept_estimate",
            "k",
            "f",
            "segments",
            "ancilla_qubits",
            "ideal_delta",
            "closed_form_cost",
            "replay_cost",
            "expander_epsilon",
        ],
    );
    let mut found = Vec::new();
    for input in &inputs {
        let v = match input.as_str() {
            "ground" => eig.state(0),
            "first_excited" => eig.state(1),
            _ => linalg::random_state::<f64, _>(ip.dim(), &mut ChaCha8Rng::seed_from_u64(ctx.seed)),
        };
        let mut ps = PartyState::bipartite(ip.frame.da(), ip.frame.db(), v)?;
        let m = measure_ground_state(&mut ps, &ip, &GroundMeasurementConfig::new(sec.f, sec.delta, ctx.seed), &exp, &i.sh)?;
        let r = spread_bound_for(&m.artifact)?;
        let mut row = ctx.base_row(&format!("protocol_{input}"))?.with_report(&r);
        row.cost_qubits = Some(m.transcript.total_cost);
        row.extra = vec![
            input.clone(),
            m.outcome.to_string(),
            num(m.accept_interval.0),
            num(m.accept_interval.1),
            num(m.accept_estimate),
            m.repetitions.to_string(),
            sec.f.to_string(),
            m.segments.to_string(),
            m.ancilla_qubits.to_string(),
            num(m.ideal_delta),
            ground_measurement_cost(m.repetitions, sec.f, m.segments, m.ancilla_qubits).to_string(),
            m.transcript.replay_cost().to_string(),
            num(m.expander_epsilon),
        ];
        t.rows.push(row);
        if found.is_empty() {
            out.files.push(("protocol_transcript.tsv".into(), m.transcript.to_tsv().into_bytes()));
            found.push(m.artifact);
        }
    }
    ctx.artifacts.extend(found);
    out.tables.push(t);
    Ok(())
}

fn compress(ctx: &mut Ctx, out: &mut Outputs) -> Result<(), CliError> {
    let sec = ctx.cfg.compression()?.clone();
    let i = ctx.instance()?;
    let exp = build_expander::<f64>(sec.p.unwrap_or(4), sec.d.unwrap_or(16), ctx.seed, &ctx.caps)?;
    let factors = sec.factors.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]);
    let mut t = Table::new(
        "compress",
        &[
            "target_delta",
            "source",
            "source_delta",
            "alpha_sum",
            "denominator",
            "slots",
            "expander_power",
            "rational_error",
            "within_2delta",
            "assist_slope",
        ],
    );
    let mut series = Series { name: "assist_rank".into(), x_label: "alpha_sum", y_label: "log2_rank", points: Vec::new() };
    let mut found = Vec::new();
    for (idx, delta) in sec.delta.to_vec().into_iter().enumerate() {
        let source = cheby_artifact_for(&i.sh, delta, sec.max_q.unwrap_or(60), &ctx.caps)?;
        let dec = decompose_agsp(&source)?;
        let comp = compress_agsp(&source, &dec, delta, &exp)?;
        let (rows, slope) = assist_rank_sweep(&comp, &exp, &factors)?;
        let r = spread_bound_for(&comp.artifact)?;
        let mut row = ctx.base_row(&format!("compress_{idx}"))?.with_report(&r);
        row.extra = vec![
            num(delta),
            source.label.clone(),
            num(source.error_delta),
            num(comp.alpha_sum),
            comp.rational.denominator.to_string(),
            comp.rational.total().to_string(),
            comp.expander_power.to_string(),
            num(comp.rational_error),
            (comp.certified_bound <= 2.0 * delta).to_string(),
            num(slope),
        ];
        t.rows.push(row);
        series.points.extend(rows.into_iter().map(|(x, y)| (format!("delta={delta}"), x, y)));
        found.push(source);
        found.push(comp.artifact);
    }
    ctx.artifacts.extend(found);
    out.tables.push(t);
    out.series.push(series);
    Ok(())
}

fn verify_bounds(ctx: &mut Ctx, out: &mut Outputs) -> Result<(), CliError> {
    // build whatever constructions are configured; their own tables are not emitted
    let c = &ctx.cfg.construction;
    let mut scratch = Outputs::default();
    if c.chebyshev.is_some() && !out.tables.iter().any(|t| t.name == "agsp_cheby") {
        cheby(ctx)?;
    }
    if c.qpe.is_some() && !out.tables.iter().any(|t| t.name == "agsp_qpe") {
        qpe(ctx)?;
    }
    if c.protocol.is_some() && !out.tables.iter().any(|t| t.name == "protocol") {
        protocol(ctx, &mut scratch)?;
    }
    if c.compression.is_some() && !out.tables.iter().any(|t| t.name == "compress") {
        compress(ctx, &mut scratch)?;
    }
    let mut t = Table::new("verify_bounds", &["provenance", "label", "applicable", "heavy_light_holds", "heavy_light_lower", "heavy_light_overlap"]);
    for (idx, a) in ctx.artifacts.iter().enumerate() {
        let r = spread_bound_for(a)?;
        let hl = heavy_light_chain(a, CHAIN_EPSILON)?;
        let mut row = ctx.base_row(&format!("artifact{idx}"))?.with_report(&r);
        row.cost_qubits = a.comm_cost;
        if !hl.holds {
            row.satisfied = Some(Some(false));
        }
        row.extra = vec![
            a.provenance.to_string(),
            a.label.clone(),
            r.applicable().to_string(),
            hl.holds.to_string(),
            num(hl.lower_bound),
            hl.image_overlap.map(num).unwrap_or_default(),
        ];
        t.rows.push(row);
    }
    for r in &t.rows {
        let verdict = match r.satisfied {
            Some(Some(true)) => "satisfied",
            Some(Some(false)) => "VIOLATED",
            _ => "not applicable",
        };
        out.messages.push(format!("{}: {}", r.instance_id, verdict));
    }
    out.tables.push(t);
    Ok(())
}

fn scaling(ctx: &Ctx, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let sweep = cfg.sweep()?;
    let family = cfg.sweep_family()?;
    let mut t = Table::new(
        "scaling",
        &["family", "closed_form", "cheby_rhs", "qpe_rhs", "cheby_satisfied", "qpe_satisfied", "marker"],
    );
    let mut fit = Table::new("scaling_fit", &["family", "slope", "intercept", "residual", "points"]);
    let mut series = Series { name: "scaling".into(), x_label: "boundary_size", y_label: "es_bits", points: Vec::new() };
    let tables: Vec<ScalingTable> = match family {
        "paired_product" => {
            let deltas = sweep.deltas.clone().unwrap_or_else(|| vec![0.0, 0.1]);
            deltas.iter().map(|&d| paired_product_sweep(&sweep.boundary, cfg.amplitudes(), d)).collect::<agsp_core::Result<_>>()?
        }
        _ => {
            let def = LadderSweep::default();
            let deltas = sweep.deltas.clone().unwrap_or_else(|| vec![def.delta]);
            deltas
                .iter()
                .map(|&d| {
                    let lc = LadderSweep {
                        rungs: sweep.boundary.clone(),
                        g: cfg.model().map(|m| m.g.unwrap_or(def.g)).unwrap_or(def.g),
                        delta: d,
                        cheby_delta: sweep.cheby_delta.unwrap_or(def.cheby_delta),
                        qpe_delta: sweep.qpe_delta.unwrap_or(def.qpe_delta),
                        max_q: sweep.max_q.unwrap_or(def.max_q),
                        qpe_bits: sweep.qpe_bits.clone().unwrap_or(def.qpe_bits.clone()),
                    };
                    tfim_ladder_sweep(&lc, &ctx.caps)
                })
                .collect()
        }
    };
    for st in &tables {
        let delta = st.rows.first().map(|r| r.delta).unwrap_or(0.0);
        for r in &st.rows {
            let sat = |rep: &Option<agsp_core::verify::SpreadBoundReport>| rep.as_ref().map(|x| x.satisfied);
            let (cs, qs) = (sat(&r.cheby), sat(&r.qpe));
            let satisfied = match (cs, qs) {
                (None, None) => None,
                (Some(Some(false)), _) | (_, Some(Some(false))) => Some(Some(false)),
                (Some(Some(true)), Some(Some(true))) => Some(Some(true)),
                _ => Some(None),
            };
            let rhs = [&r.cheby, &r.qpe].iter().filter_map(|x| x.as_ref().map(|y| y.rhs_logd_plus_1)).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
            let fmt_sat = |s: Option<Option<bool>>| match s {
                None => String::new(),
                Some(None) => "n/a".into(),
                Some(Some(b)) => b.to_string(),
            };
            t.rows.push(Row {
                instance_id: r.instance_id.clone(),
                n: Some(r.n),
                cut: String::new(),
                boundary_size: Some(r.boundary_size),
                gap: r.gap,
                delta: Some(r.delta),
                smoothing: Some(r.delta),
                es_bits: (r.marker.is_none()).then_some(r.es_bits),
                log_d: r.cheby.as_ref().map(|c| c.log_d),
                cost_qubits: None,
                bound_rhs: rhs,
                satisfied,
                extra: vec![
                    r.family.clone(),
                    r.closed_form.map(num).unwrap_or_default(),
                    r.cheby.as_ref().map(|c| num(c.rhs_logd_plus_1)).unwrap_or_default(),
                    r.qpe.as_ref().map(|c| num(c.rhs_logd_plus_1)).unwrap_or_default(),
                    fmt_sat(cs),
                    fmt_sat(qs),
                    r.marker.clone().unwrap_or_default(),
                ],
            });
            if r.marker.is_none() {
                series.points.push((format!("{family} delta={delta}"), r.boundary_size as f64, r.es_bits));
            }
        }
        let points = st.rows.iter().filter(|r| r.marker.is_none() && r.es_bits > 0.0).count();
        fit.rows.push(Row {
            instance_id: format!("{family}_fit_d{delta}"),
            delta: Some(delta),
            smoothing: Some(delta),
            extra: vec![family.to_string(), num(st.slope), num(st.intercept), num(st.residual), points.to_string()],
            ..Row::default()
        });
        out.messages.push(format!("{family} δ={delta}: slope {}", num(st.slope)));
    }
    out.tables.push(t);
    out.tables.push(fit);
    out.series.push(series);
    Ok(())
}
