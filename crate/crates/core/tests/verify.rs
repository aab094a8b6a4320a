mod common;

use agsp_core::agsp_cheby::{chebyshev_agsp, chebyshev_sequence, frustrated_truncate, rank_artifact, XiMode};
use agsp_core::artifact::{AgspArtifact, Provenance};
use agsp_core::hamlib::{build_model, split, Bipartition, Caps, ModelSpec};
use agsp_core::linalg;
use agsp_core::spectra::{diagonalize, entanglement_spread, smooth_max_entropy, smooth_min_entropy, SchmidtSpectrum};
use agsp_core::verify::*;
use proptest::prelude::*;

fn caps() -> Caps {
    Caps::default()
}

fn pair_amps() -> (f64, f64) {
    ((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt())
}

fn tfim8_cheby(q: usize) -> AgspArtifact<f64> {
    let h = build_model::<f64>(&ModelSpec::Tfim { dims: vec![8], j: 1.0, g: 2.0, periodic: false }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::half(8)).unwrap();
    let th = frustrated_truncate(&sh, 0.01, XiMode::Formula, &caps()).unwrap();
    chebyshev_agsp(&th, q, &caps()).unwrap().artifact
}

#[test]
fn smoothing_parameter_and_limit() {
    assert!((smoothing_for(delta_limit()) - 1.0).abs() < 1e-12);
    assert!((smoothing_for(0.1) - 2.0 * 0.2f64.powf(2.0 / 3.0)).abs() < 1e-15);
}

#[test]
fn near_exact_projector_on_product_state() {
    let h = build_model::<f64>(&ModelSpec::AllZeros { n: 4 }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::half(4)).unwrap();
    let omega = diagonalize(&h, &caps()).unwrap().ground_state;
    let k = linalg::outer(&omega, &omega);
    let a = rank_artifact(k, 1e-6, Provenance::Detectability, omega, &sh, &caps(), "projector".into()).unwrap();
    assert_eq!(a.schmidt_rank, 1);
    let r = spread_bound_for(&a).unwrap();
    assert_eq!(r.lhs_spread_bits, 0.0);
    assert_eq!(r.rhs_logd_plus_1, 1.0);
    assert_eq!(r.satisfied, Some(true));
}

#[test]
fn chebyshev_q10_satisfies_bound() {
    let a = tfim8_cheby(10);
    let r = spread_bound_for(&a).unwrap();
    assert_eq!(r.satisfied, Some(true), "{r}");
    assert!((r.rhs_logd_plus_1 - (a.schmidt_rank as f64).log2() - 1.0).abs() < 1e-12);
}

#[test]
fn large_delta_is_not_applicable() {
    let a = tfim8_cheby(1);
    assert!(a.error_delta >= delta_limit());
    let r = spread_bound_for(&a).unwrap();
    assert_eq!(r.satisfied, None);
    assert!(r.ok() && !r.applicable());
}

#[test]
fn protocol_artifacts_use_communication_cost() {
    let mut a = tfim8_cheby(10);
    a.comm_cost = Some(3);
    let r = spread_bound_for(&a).unwrap();
    assert_eq!(r.rhs_logd_plus_1, 4.0);
    assert_eq!(r.log2_rank, a.log2_rank);
}

#[test]
fn report_matches_direct_entropies() {
    let a = tfim8_cheby(12);
    let spec = agsp_core::spectra::schmidt(&a.target_state, &a.cut, &a.dims).unwrap();
    let r = spread_bound(&a, &spec);
    let s = smoothing_for(a.error_delta);
    assert_eq!(r.smooth_max_bits, smooth_max_entropy(&spec, s));
    assert_eq!(r.smooth_min_bits, smooth_min_entropy(&spec, s));
    assert_eq!(r.lhs_spread_bits, entanglement_spread(&spec, s));
}

#[test]
fn heavy_light_chain_on_chebyshev_family() {
    let h = build_model::<f64>(&ModelSpec::Tfim { dims: vec![8], j: 1.0, g: 1.2, periodic: false }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::half(8)).unwrap();
    let th = frustrated_truncate(&sh, 0.01, XiMode::Formula, &caps()).unwrap();
    for step in chebyshev_sequence(&th, 24, &caps()).unwrap().iter().step_by(4) {
        for eps in [0.2, 0.6, 0.95, 0.999] {
            let r = heavy_light_chain(&step.artifact, eps).unwrap();
            assert!(r.holds, "q={} ε={eps}: {r:?}", step.q);
            assert!(r.epsilon_prime >= eps - 1e-12);
        }
    }
}

#[test]
fn paired_product_sweep_closed_form_and_slopes() {
    let ks: Vec<usize> = (2..=8).collect();
    let t0 = paired_product_sweep(&ks, pair_amps(), 0.0).unwrap();
    for r in &t0.rows {
        let oracle = r.boundary_size as f64 * (4.0f64 / 3.0).log2();
        assert!((r.es_bits - oracle).abs() < 1e-9);
        assert!((r.closed_form.unwrap() - oracle).abs() < 1e-12);
    }
    assert!((t0.slope - 1.0).abs() < 0.01);
    let t1 = paired_product_sweep(&ks, pair_amps(), 0.1).unwrap();
    assert!(t1.slope < 1.0 && t1.slope.is_finite());
}

#[test]
fn paired_product_sweep_matches_model_ground_states() {
    // small k from the actual Hamiltonian, cut between the pair members
    for k in 1..=3 {
        let n = 2 * k;
        let h = build_model::<f64>(&ModelSpec::PairedProduct { dims: vec![n], amplitudes: pair_amps(), pair_offset: 0 }, &caps()).unwrap();
        let omega = diagonalize(&h, &caps()).unwrap().ground_state;
        let side_a: Vec<usize> = (0..k).map(|i| 2 * i).collect();
        let cut = Bipartition::new(&side_a, n, 1).unwrap();
        let spec = agsp_core::spectra::schmidt(&omega, &cut, &h.dims()).unwrap();
        let closed = paired_product_closed_form(k, pair_amps());
        assert!((entanglement_spread(&spec, 0.0) - closed).abs() < 1e-9);
    }
}

#[test]
fn ladder_sweep_rows_satisfy_both_bounds() {
    let cfg = LadderSweep { rungs: vec![1, 2, 3], ..LadderSweep::default() };
    let t = tfim_ladder_sweep(&cfg, &caps());
    assert_eq!(t.rows.len(), 3);
    for r in &t.rows {
        assert!(r.marker.is_none(), "{:?}", r.marker);
        assert_eq!(r.boundary_size, r.n / 2);
        for rep in [r.cheby.as_ref().unwrap(), r.qpe.as_ref().unwrap()] {
            assert_eq!(rep.satisfied, Some(true), "{rep}");
            assert!(rep.delta <= 0.05);
        }
    }
}

#[test]
fn ladder_sweep_marks_capped_instances() {
    let cfg = LadderSweep { rungs: vec![1, 8], ..LadderSweep::default() };
    let t = tfim_ladder_sweep(&cfg, &caps());
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows[0].marker.is_none());
    assert!(t.rows[1].marker.as_deref().unwrap().contains("cap"));
}

#[test]
fn epr_spectrum_helper() {
    let s = SchmidtSpectrum::from_values(&[0.7, 0.3]).unwrap();
    let t = with_epr(&s, 4);
    assert_eq!(t.rank(), 8);
    assert!((t.largest() - 0.175).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn satisfied_iff_lhs_within_rhs(seed in 0u64..10_000, delta in 0.0f64..0.3, log_d in 0u64..5) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = common::random_spectrum(&mut rng, 12);
        let spec = SchmidtSpectrum::from_values(&v).unwrap();
        let mut a = tfim8_cheby_cached();
        a.error_delta = delta;
        a.comm_cost = Some(log_d);
        let r = spread_bound(&a, &spec);
        match r.satisfied {
            None => prop_assert!(delta >= delta_limit()),
            Some(s) => prop_assert_eq!(s, r.lhs_spread_bits <= r.rhs_logd_plus_1 + SPREAD_TOL),
        }
    }
}

fn tfim8_cheby_cached() -> AgspArtifact<f64> {
    use std::sync::OnceLock;
    static A: OnceLock<AgspArtifact<f64>> = OnceLock::new();
    A.get_or_init(|| tfim8_cheby(2)).clone()
}
