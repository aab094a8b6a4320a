//! Acceptance suite: one line per criterion on stderr (written past the test
//! harness capture so it shows up in plain `cargo test` output).
//!
//! Criteria 2 and 6 are known to fail as literally stated; the suite prints
//! FAIL for them, checks that they fail only where expected, and asserts the
//! rest. `literal_*` tests below assert them verbatim and are ignored.

use std::io::Write;
use std::time::Instant;

use agsp_cli::{execute, Options};
use agsp_core::agsp_cheby::{absorbed_detectability, chebyshev_sequence, color_terms, detectability_operator, ff_truncate, frustrated_truncate, rank_artifact, XiMode};
use agsp_core::agsp_qpe::{qpe_agsp, QpeConfig};
use agsp_core::artifact::Provenance;
use agsp_core::hamlib::{build_model, split, Bipartition, Caps, ModelSpec};
use agsp_core::linalg::{self, CVec};
use agsp_core::protocol::*;
use agsp_core::spectra::{diagonalize, entanglement_spread, schmidt, smooth_max_entropy, smooth_min_entropy, Eigensystem, SchmidtSpectrum, MASS_TOL};
use agsp_core::verify::{cheby_artifact_for, delta_limit, paired_product_sweep, spread_bound_for, tfim_ladder_sweep, LadderSweep};
use agsp_core::AgspArtifact;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(s: &str) {
    let _ = writeln!(std::io::stderr(), "{s}");
}

fn caps() -> Caps {
    Caps::default()
}

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

impl Verdict {
    fn print(&self) {
        line(&format!("criterion {:>2}: {} {}", self.id, if self.pass { "PASS" } else { "FAIL" }, self.detail));
    }
}

fn pair_amps() -> (f64, f64) {
    ((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt())
}

/// Exhaustive `(S_max^δ, S_min^δ)` over subsets of mass `≥ 1 − δ`.
fn brute_entropies(lambda: &[f64], delta: f64) -> (f64, f64) {
    let n = lambda.len();
    let (mut count, mut top) = (usize::MAX, f64::INFINITY);
    for mask in 1u32..(1 << n) {
        let (mut mass, mut c, mut m) = (0.0, 0usize, 0.0f64);
        for (i, &l) in lambda.iter().enumerate() {
            if mask >> i & 1 == 1 {
                mass += l;
                c += 1;
                m = m.max(l);
            }
        }
        if mass >= 1.0 - delta - MASS_TOL {
            count = count.min(c);
            top = top.min(m);
        }
    }
    ((count as f64).log2(), -top.log2())
}

fn random_spectrum(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max_len);
    let mut v: Vec<f64> = if rng.random_bool(0.3) {
        (0..n).map(|_| [1.0, 2.0, 4.0][rng.random_range(0..3)]).collect()
    } else {
        (0..n).map(|_| rng.random_range(0.01..1.0)).collect()
    };
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn delta_grid() -> Vec<f64> {
    (0..=10).map(|i| 0.05 * i as f64).collect()
}

fn c1() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..200 {
        let v = random_spectrum(&mut rng, 12);
        let s = SchmidtSpectrum::from_values(&v).unwrap();
        for d in delta_grid() {
            let (bmax, bmin) = brute_entropies(&v, d);
            if smooth_max_entropy(&s, d) != bmax || smooth_min_entropy(&s, d) != bmin {
                mismatches += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Verdict { id: 1, pass: mismatches == 0 && secs < 10.0, detail: format!("200 spectra × 11 δ, {mismatches} mismatches, {secs:.2} s") }
}

/// Largest `|ES_δ(ψ⊗Φ_p) − ES_δ(ψ)|` per δ over the test states.
fn c2_deviations() -> Vec<(f64, f64, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut spectra: Vec<SchmidtSpectrum<f64>> = (0..30).map(|_| SchmidtSpectrum::from_values(&random_spectrum(&mut rng, 12)).unwrap()).collect();
    let h = build_model::<f64>(&ModelSpec::Tfim { dims: vec![8], j: 1.0, g: 2.0, periodic: false }, &caps()).unwrap();
    let omega = diagonalize(&h, &caps()).unwrap().ground_state;
    spectra.push(schmidt(&omega, &Bipartition::half(8), &h.dims()).unwrap());
    spectra.push(SchmidtSpectrum::from_values(&[2.0 / 3.0, 1.0 / 3.0]).unwrap().tensor_power(4));
    let mut out = Vec::new();
    for d in [0.0, 0.1, 0.3] {
        let (mut worst, mut bad, mut total) = (0.0f64, 0, 0);
        for p in [2u64, 4, 8] {
            let phi = SchmidtSpectrum::maximally_entangled(p);
            for s in &spectra {
                let dev = (entanglement_spread(&s.tensor(&phi), d) - entanglement_spread(s, d)).abs();
                worst = worst.max(dev);
                bad += usize::from(dev > 1e-12);
                total += 1;
            }
            // the same on explicit state vectors ψ ⊗ Φ_p
            for seed in 0..3 {
                let psi = linalg::random_state::<f64, _>(16, &mut ChaCha8Rng::seed_from_u64(100 + seed));
                let v = linalg::kron_vec(&psi, &linalg::max_entangled::<f64>(p as usize));
                let dims = [2, 2, 2, 2, p as usize, p as usize];
                let joint = schmidt(&v, &Bipartition::new(&[0, 1, 4], 6, 1).unwrap(), &dims).unwrap();
                let alone = schmidt(&psi, &Bipartition::prefix(2, 4), &[2; 4]).unwrap();
                let dev = (entanglement_spread(&joint, d) - entanglement_spread(&alone, d)).abs();
                worst = worst.max(dev);
                bad += usize::from(dev > 1e-12);
                total += 1;
            }
        }
        out.push((d, worst, bad, total));
    }
    out
}

fn c2() -> (Verdict, bool) {
    let devs = c2_deviations();
    let pass = devs.iter().all(|d| d.2 == 0);
    let detail: Vec<String> = devs.iter().map(|(d, w, b, t)| format!("δ={d}: {b}/{t} off, max {w:.3}")).collect();
    // expected: exact at δ = 0, broken for δ > 0 (mass removal does not commute with tensoring)
    let as_expected = devs[0].2 == 0 && devs[1].2 > 0 && devs[2].2 > 0;
    let note = if pass { "" } else { "; holds only at δ=0 for the literal smoothed entropies (ledgered)" };
    (Verdict { id: 2, pass, detail: format!("{}{note}", detail.join(", ")) }, as_expected)
}

fn c3() -> Verdict {
    let t = Instant::now();
    let ks: Vec<usize> = (2..=8).collect();
    let t0 = paired_product_sweep(&ks, pair_amps(), 0.0).unwrap();
    let worst = t0.rows.iter().map(|r| (r.es_bits - r.boundary_size as f64 * (4.0f64 / 3.0).log2()).abs()).fold(0.0, f64::max);
    // model ground states for the smallest sizes, pairs straddling the cut
    let mut model_dev = 0.0f64;
    for k in 2..=3 {
        let h = build_model::<f64>(&ModelSpec::PairedProduct { dims: vec![2 * k], amplitudes: pair_amps(), pair_offset: 0 }, &caps()).unwrap();
        let omega = diagonalize(&h, &caps()).unwrap().ground_state;
        let side: Vec<usize> = (0..k).map(|i| 2 * i).collect();
        let s = schmidt(&omega, &Bipartition::new(&side, 2 * k, 1).unwrap(), &h.dims()).unwrap();
        model_dev = model_dev.max((entanglement_spread(&s, 0.0) - k as f64 * (4.0f64 / 3.0).log2()).abs());
    }
    let t1 = paired_product_sweep(&ks, pair_amps(), 0.1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && model_dev <= 1e-9 && t1.slope < 0.8 && secs < 30.0;
    Verdict {
        id: 3,
        pass,
        detail: format!("max |ES_0 − k·log2(4/3)| = {worst:.1e} (model {model_dev:.1e}); slope δ=0: {:.4}, δ=0.1: {:.4}; {secs:.2} s", t0.slope, t1.slope),
    }
}

fn ff_instances() -> Vec<agsp_core::SplitHamiltonian> {
    (0..20u64)
        .map(|seed| {
            let n = 4 + (seed as usize % 7);
            let h = build_model::<f64>(&ModelSpec::FfChain { n, rank: 2, seed: 500 + seed }, &caps()).unwrap();
            split(&h, &Bipartition::half(n)).unwrap()
        })
        .collect()
}

fn c4(chains: &[agsp_core::SplitHamiltonian], sink: &mut Vec<AgspArtifact>) -> Verdict {
    let (mut violations, mut worst_res, mut worst_ratio) = (0, 0.0f64, 0.0f64);
    for sh in chains {
        let layers = color_terms(&sh.full);
        let dl = detectability_operator(sh, &layers, &caps()).unwrap();
        if dl.artifact.error_delta > dl.bound + 1e-12 {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(dl.artifact.error_delta / dl.bound);
        worst_res = worst_res.max(absorbed_detectability(sh, &layers).identity_residual);
        sink.push(dl.artifact);
    }
    Verdict {
        id: 4,
        pass: violations == 0 && worst_res < 1e-10,
        detail: format!("{} chains (n=4..10): {violations} violations, max Δ/bound {worst_ratio:.3}, max absorption residual {worst_res:.1e}", chains.len()),
    }
}

fn c5(chains: &[agsp_core::SplitHamiltonian]) -> Verdict {
    let t = Instant::now();
    let mut all: Vec<agsp_core::SplitHamiltonian> = chains.to_vec();
    for (spec, n) in [
        (ModelSpec::AllZeros { n: 6 }, 6),
        (ModelSpec::PairedProduct { dims: vec![6], amplitudes: pair_amps(), pair_offset: 1 }, 6),
        (ModelSpec::PairedProduct { dims: vec![8], amplitudes: pair_amps(), pair_offset: 0 }, 8),
    ] {
        let h = build_model::<f64>(&spec, &caps()).unwrap();
        all.push(split(&h, &Bipartition::half(n)).unwrap());
    }
    let mut failed = Vec::new();
    for (i, sh) in all.iter().enumerate() {
        let th = ff_truncate(sh, &color_terms(&sh.full), &caps()).unwrap();
        let c = &th.checks;
        let ok = c.frustration_free == Some(true) && c.norm <= c.norm_bound + 1e-9 && c.gap >= c.gap_bound - 1e-9;
        if !ok {
            failed.push(i);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Verdict { id: 5, pass: failed.is_empty() && secs < 120.0, detail: format!("{} FF instances, failures {failed:?}, {secs:.1} s", all.len()) }
}

struct C6 {
    shrink_violations: Vec<usize>,
    envelope_violations: usize,
    rank_violations: usize,
}

fn c6_measure(sink: &mut Vec<AgspArtifact>) -> C6 {
    let h = build_model::<f64>(&ModelSpec::Tfim { dims: vec![8], j: 1.0, g: 2.0, periodic: false }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::half(8)).unwrap();
    let th = frustrated_truncate(&sh, 0.01, XiMode::Formula, &caps()).unwrap();
    let seq = chebyshev_sequence(&th, 40, &caps()).unwrap();
    let mut r = C6 { shrink_violations: Vec::new(), envelope_violations: 0, rank_violations: 0 };
    for s in seq.into_iter().skip(1) {
        let d = s.artifact.error_delta;
        if d > s.shrink_bound + 1e-12 {
            r.shrink_violations.push(s.q);
        }
        r.envelope_violations += usize::from(d > s.exact_envelope + 1e-12);
        r.rank_violations += usize::from((s.artifact.schmidt_rank as f64).log2() > s.sr_bound_log2 + 1e-9);
        sink.push(s.artifact);
    }
    r
}

fn c6(sink: &mut Vec<AgspArtifact>) -> (Verdict, bool) {
    let r = c6_measure(sink);
    let pass = r.shrink_violations.is_empty() && r.rank_violations == 0;
    let first = r.shrink_violations.first().map(|q| format!(" (first at q={q})")).unwrap_or_default();
    let detail = format!(
        "q=1..40 on truncated tfim n=8: {} violations of 2e^(-2q√u){first}; 2e^(-q·acosh x0) violations {}; rank-count violations {}{}",
        r.shrink_violations.len(),
        r.envelope_violations,
        r.rank_violations,
        if pass { "" } else { "; stated bound uses asinh√u ≥ √u, which is false (ledgered)" }
    );
    // expected: only the stated exponent fails, and from some q on
    let as_expected = r.envelope_violations == 0 && r.rank_violations == 0 && r.shrink_violations.windows(2).all(|w| w[1] == w[0] + 1);
    (Verdict { id: 6, pass, detail }, as_expected)
}

fn c7(sink: &mut Vec<AgspArtifact>) -> Verdict {
    let h = build_model::<f64>(&ModelSpec::Tfim { dims: vec![6], j: 1.0, g: 2.0, periodic: false }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::half(6)).unwrap();
    let ev = linalg::eigvalsh(&sh.full.dense());
    let range = ev[ev.len() - 1] - ev[0];
    let kmax = 6;
    let q = qpe_agsp(&sh, QpeConfig::calibrated(6, kmax, range), &caps()).unwrap();
    let d = &q.delta_by_k;
    let geometric = d.windows(2).all(|w| w[1] <= q.sigma * w[0] + 1e-12);
    let (mut psd, mut leak, mut dense_gap) = (true, true, 0.0f64);
    for k in 1..=kmax {
        let kop = q.kernel.effective_operator(k);
        let e = linalg::eigvalsh(&kop);
        psd &= e[0] >= -1e-10 && *e.last().unwrap() <= 1.0 + 1e-10;
        let delta = d[k as usize - 1];
        dense_gap = dense_gap.max((q.kernel.defining_error(k) - delta).abs());
        leak &= (1..q.kernel.dim()).all(|i| q.kernel.leakage(i, k) <= delta + 1e-12);
        if k < kmax {
            sink.push(qpe_agsp(&sh, QpeConfig::calibrated(6, k, range), &caps()).unwrap().artifact);
        }
    }
    sink.push(q.artifact.clone());
    Verdict {
        id: 7,
        pass: geometric && psd && leak && q.sigma < 1.0 && dense_gap < 1e-7,
        detail: format!("σ = {:.4}, Δ(k=1..{kmax}) = {:?}; geometric {geometric}, 0⪯K⪯1 {psd}, leakage≤Δ {leak}, dense evaluation within {dense_gap:.1e}", q.sigma, d.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()),
    }
}

fn c8() -> Verdict {
    let p = 4;
    let exp = build_expander::<f64>(p, 64, 8, &caps()).unwrap();
    let eps = exp.measured_epsilon;
    let exact = exact_mes_reflection::<f64>(p);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let (mut worst, mut costs_ok) = (0.0f64, true);
    for _ in 0..50 {
        let psi = linalg::random_state::<f64, _>(p * p, &mut rng);
        let regs = vec![Register { name: EPR_A.into(), dim: p, owner: Owner::Alice, epr: true }, Register { name: EPR_B.into(), dim: p, owner: Owner::Bob, epr: true }];
        let mut ps = PartyState::new(regs, psi.clone()).unwrap();
        let t = reflect_mes(&mut ps, EPR_A, EPR_B, &exp).unwrap();
        costs_ok &= t.total_cost == 12 && t.replay_cost() == 12;
        worst = worst.max((&ps.amplitudes - &exact * &psi).norm() / (2.0 * eps));
    }
    Verdict { id: 8, pass: worst <= 1.0 + 1e-9 && costs_ok, detail: format!("ε = {eps:.4}; max ‖out − (2Φ−𝟙)ψ‖/(2ε) = {worst:.3} over 50 inputs; cost 12 on every run: {costs_ok}") }
}

fn c9(sink: &mut Vec<AgspArtifact>) -> Verdict {
    let t = Instant::now();
    let n = 6;
    let h = build_model::<f64>(&ModelSpec::Tfim { dims: vec![n], j: 1.0, g: 10.0, periodic: false }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::half(n)).unwrap();
    let ip = InteractionPicture::of(&sh, &caps()).unwrap();
    let exp = build_expander::<f64>(4, 16, 1, &caps()).unwrap();
    let eig = Eigensystem::of(&ip.h);
    let f = 4;
    let run = |v: CVec<f64>| {
        let mut ps = PartyState::bipartite(ip.frame.da(), ip.frame.db(), v).unwrap();
        measure_ground_state(&mut ps, &ip, &GroundMeasurementConfig::new(f, 0.1, 3), &exp, &sh).unwrap()
    };
    let g = run(eig.state(0));
    let e = run(eig.state(1));
    let (k, l, q) = (g.repetitions as u64, g.segments as u64, g.ancilla_qubits);
    // recount: per block the phase copy goes out and back, plus two reflections
    // of a q-qubit ancilla (each out and back) per segment; k forward + k uncompute
    let recount = 2 * k * (2 * f as u64 + l * 2 * 2 * q);
    let total = g.transcript.total_cost;
    let ledger_ok = total == recount && total == g.transcript.replay_cost() && total == ground_measurement_cost(g.repetitions, f, g.segments, q);
    let report = spread_bound_for(&g.artifact).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = g.accept_interval.0 >= 0.99 && e.accept_interval.1 <= 0.01 && ledger_ok && report.satisfied == Some(true) && secs < 600.0;
    sink.push(g.artifact.clone());
    Verdict {
        id: 9,
        pass,
        detail: format!(
            "tfim n=6 g=10, Δ=0.1 (certified {:.4}): P(ground|Ω) ≥ {:.5}, P(ground|E1) ≤ {:.2e}; c = {total} = recount {recount} (k={k}, L={l}, q={q}); spread {:.3} ≤ c+1: {:?}; {secs:.1} s",
            g.certified_delta, g.accept_interval.0, e.accept_interval.1, report.lhs_spread_bits, report.satisfied
        ),
    }
}

fn c10(artifacts: &[AgspArtifact]) -> Verdict {
    let (mut applicable, mut violations) = (0, Vec::new());
    for a in artifacts {
        let r = spread_bound_for(a).unwrap();
        if a.error_delta < delta_limit() {
            applicable += 1;
            if r.satisfied != Some(true) {
                violations.push(format!("{} ({})", a.label, a.provenance));
            }
        }
    }
    Verdict {
        id: 10,
        pass: violations.is_empty() && applicable > 0,
        detail: format!("{} artifacts, {applicable} with Δ < 1/(4√2), violations: {violations:?}", artifacts.len()),
    }
}

fn c11(sink: &mut Vec<AgspArtifact>) -> Verdict {
    let h = build_model::<f64>(&ModelSpec::Tfim { dims: vec![6], j: 1.0, g: 2.0, periodic: false }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::half(6)).unwrap();
    let exp = build_expander::<f64>(4, 16, 1, &caps()).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    let mut slopes = Vec::new();
    for delta in [0.1, 0.05] {
        let source = cheby_artifact_for(&sh, delta, 60, &caps()).unwrap();
        let dec = decompose_agsp(&source).unwrap();
        let comp = compress_agsp(&source, &dec, delta, &exp).unwrap();
        let (_, slope) = assist_rank_sweep(&comp, &exp, &[1.0, 2.0, 4.0, 8.0, 16.0]).unwrap();
        pass &= comp.certified_bound <= 2.0 * delta && slope.is_finite();
        slopes.push(slope);
        parts.push(format!(
            "Δ={delta}: {} terms, Σα={:.2}, M={}, m={}, bound {:.4} ≤ {:.2}",
            dec.len(),
            comp.alpha_sum,
            comp.rational.total(),
            comp.expander_power,
            comp.certified_bound,
            2.0 * delta
        ));
        sink.push(source);
        sink.push(comp.artifact);
    }
    // dense check of the certificate where the registers fit: |00⟩⟨00| on two qubits
    let h2 = build_model::<f64>(&ModelSpec::AllZeros { n: 2 }, &caps()).unwrap();
    let sh2 = split(&h2, &Bipartition::prefix(1, 2)).unwrap();
    let omega = diagonalize(&h2, &caps()).unwrap().ground_state;
    let k = linalg::outer(&omega, &omega);
    let src = rank_artifact(k.clone(), 0.0, Provenance::Detectability, omega.clone(), &sh2, &caps(), "projector".into()).unwrap();
    let dec = decompose_agsp(&src).unwrap();
    let exp4 = build_expander::<f64>(4, 16, 1, &caps()).unwrap();
    let comp = compress_agsp(&src, &dec, 0.1, &exp4).unwrap();
    let literal = compressed_operator_literal(&dec, &comp.rational, &exp4, comp.expander_power).unwrap();
    let phi = linalg::max_entangled::<f64>(comp.rational.total() as usize);
    let mut target = linalg::zeros::<f64>(literal.nrows(), 4);
    for c in 0..4 {
        target.set_column(c, &linalg::kron_vec(&(&k * linalg::basis_vec::<f64>(4, c)), &phi));
    }
    let dense = linalg::op_norm(&(&literal - &target));
    pass &= dense <= comp.certified_bound + 1e-12 && comp.certified_bound <= 0.2;
    parts.push(format!("dense check (M={}, m={}): {dense:.4} ≤ certificate {:.4}", comp.rational.total(), comp.expander_power, comp.certified_bound));
    Verdict { id: 11, pass, detail: format!("{}; assist-rank slopes {:?}", parts.join("; "), slopes.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()) }
}

const DETERMINISM_CONFIG: &str = r#"
schema_version = 1
seed = 41

[run]
tables = ["spectrum", "spread", "agsp_cheby", "agsp_qpe", "protocol", "verify_bounds"]

[model]
name = "tfim"
n = 4
g = 10.0

[construction.chebyshev]
q = [2, 6]

[construction.qpe]
f = 5
k = [1, 3]

[construction.protocol]
d = 16
delta = 0.2
f = 4
input = ["ground", "random"]
"#;

const SWEEP_CONFIG: &str = r#"
schema_version = 1
seed = 9

[model]
name = "paired_product"

[sweep]
boundary = [2, 3, 4, 5, 6, 7, 8]
deltas = [0.0, 0.1]

[output]
formats = ["csv", "plot"]
"#;

fn c12() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut compared = 0;
    let mut violations = 0;
    for (name, text) in [("det", DETERMINISM_CONFIG), ("sweep", SWEEP_CONFIG)] {
        let cfg = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let mut outs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{name}_{rep}"));
            let r = execute(&Options { config: cfg.clone(), out: Some(out.clone()), ..Options::default() }).unwrap();
            violations += r.violations;
            outs.push(r.files.iter().filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "tsv")).cloned().collect::<Vec<_>>());
        }
        for (a, b) in outs[0].iter().zip(&outs[1]) {
            identical &= std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
            compared += 1;
        }
        identical &= outs[0].len() == outs[1].len();
    }
    Verdict { id: 12, pass: identical && compared > 0 && violations == 0, detail: format!("{compared} CSV/TSV files from two repeated runs, byte-identical: {identical}") }
}

#[test]
fn acceptance_suite() {
    let mut artifacts = Vec::new();
    let chains = ff_instances();
    let mut verdicts = vec![c1()];
    verdicts.last().unwrap().print();
    let (v2, c2_expected) = c2();
    v2.print();
    verdicts.push(v2);
    for v in [c3(), c4(&chains, &mut artifacts), c5(&chains)] {
        v.print();
        verdicts.push(v);
    }
    let (v6, c6_expected) = c6(&mut artifacts);
    v6.print();
    verdicts.push(v6);
    for v in [c7(&mut artifacts), c8(), c9(&mut artifacts)] {
        v.print();
        verdicts.push(v);
    }
    let v11 = c11(&mut artifacts);
    // ladder sweep artifacts feed the universal check as well
    let ladder = tfim_ladder_sweep(&LadderSweep { rungs: vec![1, 2, 3], ..LadderSweep::default() }, &caps());
    let ladder_ok = ladder.rows.iter().all(|r| r.cheby.as_ref().is_some_and(|x| x.ok()) && r.qpe.as_ref().is_some_and(|x| x.ok()));
    let mut v10 = c10(&artifacts);
    v10.pass &= ladder_ok;
    v10.detail.push_str(&format!("; ladder sweep reports ok: {ladder_ok}"));
    v10.print();
    v11.print();
    let v12 = c12();
    v12.print();
    verdicts.extend([v10, v11, v12]);

    let passed = verdicts.iter().filter(|v| v.pass).count();
    line(&format!("acceptance: {passed}/{} criteria pass; 2 and 6 fail as stated (see notes)", verdicts.len()));
    for v in &verdicts {
        match v.id {
            2 => assert!(c2_expected, "criterion 2 changed behaviour: {}", v.detail),
            6 => assert!(c6_expected, "criterion 6 changed behaviour: {}", v.detail),
            _ => assert!(v.pass, "criterion {} failed: {}", v.id, v.detail),
        }
    }
}

#[test]
#[ignore = "fails as stated for δ > 0; the suite prints it as FAIL"]
fn literal_criterion_2() {
    for (d, worst, _, _) in c2_deviations() {
        assert!(worst <= 1e-12, "δ = {d}: deviation {worst}");
    }
}

#[test]
#[ignore = "fails as stated from q = 4; the suite prints it as FAIL"]
fn literal_criterion_6() {
    let r = c6_measure(&mut Vec::new());
    assert!(r.shrink_violations.is_empty(), "violations at q = {:?}", r.shrink_violations);
}
