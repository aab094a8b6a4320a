use agsp_core::hamlib::*;
use agsp_core::linalg::{self, CMat};
use agsp_core::scalar::creal;
use agsp_core::spectra::{diagonalize, schmidt};
use proptest::prelude::*;

fn caps() -> Caps {
    Caps::default()
}

fn tfim(n: usize, g: f64) -> LocalHamiltonian<f64> {
    build_model(&ModelSpec::Tfim { dims: vec![n], j: 1.0, g, periodic: false }, &caps()).unwrap()
}

fn paired(n: usize, offset: usize) -> LocalHamiltonian<f64> {
    let amps = ((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt());
    build_model(&ModelSpec::PairedProduct { dims: vec![n], amplitudes: amps, pair_offset: offset }, &caps()).unwrap()
}

fn models() -> Vec<LocalHamiltonian<f64>> {
    vec![
        build_model(&ModelSpec::AllZeros { n: 3 }, &caps()).unwrap(),
        tfim(8, 2.0),
        tfim(6, 0.7),
        build_model(&ModelSpec::Heisenberg { dims: vec![2, 3], j: 1.0, periodic: false }, &caps()).unwrap(),
        build_model(&ModelSpec::FfChain { n: 7, rank: 2, seed: 3 }, &caps()).unwrap(),
        paired(6, 1),
    ]
}

#[test]
fn all_zeros_has_three_terms_and_unit_gap() {
    let h = build_model::<f64>(&ModelSpec::AllZeros { n: 3 }, &caps()).unwrap();
    assert_eq!(h.terms.len(), 3);
    let s = diagonalize(&h, &caps()).unwrap();
    assert!(s.ground_energy.abs() < 1e-12);
    assert!((s.gap - 1.0).abs() < 1e-12);
    assert!((s.ground_state[0].norm() - 1.0).abs() < 1e-12);
}

#[test]
fn every_term_is_a_contraction_after_rescaling() {
    for h in models() {
        assert!(h.is_normalized(), "{}", h.label);
        for t in &h.terms {
            let ev = linalg::eigvalsh(&t.operator);
            assert!(ev[0] > -1e-10 && *ev.last().unwrap() < 1.0 + 1e-10, "{} {}", h.label, t.label);
        }
    }
}

#[test]
fn tfim_chain_counts() {
    let h = tfim(8, 2.0);
    assert_eq!(h.terms.len(), 15);
    let sh = split(&h, &Bipartition::half(8)).unwrap();
    assert_eq!(sh.boundary_size, 1);
    assert_eq!(h.terms[sh.boundary_terms[0]].support, vec![3, 4]);
}

/// Open chain `−Σ Z_iZ_{i+1} − g Σ X_i`: single-particle energies are twice
/// the singular values of the bidiagonal matrix with `g` on the diagonal and
/// `1` above it.
fn free_fermion_gap(n: usize, g: f64) -> f64 {
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = g;
        if i + 1 < n {
            m[(i, i + 1)] = 1.0;
        }
    }
    let sv = m.singular_values();
    2.0 * sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn tfim_gap_matches_free_fermions() {
    for &(n, g) in &[(8, 2.0), (6, 1.5), (7, 3.0)] {
        let h = tfim(n, g);
        let s = diagonalize(&h, &caps()).unwrap();
        let raw = h.rescaling.raw_gap(s.gap);
        assert!((raw - free_fermion_gap(n, g)).abs() < 1e-8, "n={n} g={g}: {raw}");
    }
}

#[test]
fn paired_product_ground_state_is_the_pair_product() {
    let h = paired(4, 0);
    let s = diagonalize(&h, &caps()).unwrap();
    assert!(s.ground_energy.abs() < 1e-10);
    assert!((s.gap - 1.0).abs() < 1e-10);
    let psi = linalg::from_real::<f64>(4, 1, &[(2.0f64 / 3.0).sqrt(), 0.0, 0.0, (1.0f64 / 3.0).sqrt()]).column(0).into_owned();
    let expect = linalg::kron_vec(&psi, &psi);
    assert!((expect.dotc(&s.ground_state).norm() - 1.0).abs() < 1e-10);
    let spec = schmidt(&s.ground_state, &Bipartition::prefix(1, 4), &h.dims()).unwrap();
    assert_eq!(spec.rank(), 2);
}

#[test]
fn paired_product_boundary_depends_on_pairing() {
    let cut = Bipartition::prefix(2, 4);
    assert_eq!(split(&paired(4, 0), &cut).unwrap().boundary_size, 0);
    assert_eq!(split(&paired(4, 1), &cut).unwrap().boundary_size, 1);
}

#[test]
fn single_site_terms_never_cross() {
    let h = build_model::<f64>(&ModelSpec::AllZeros { n: 3 }, &caps()).unwrap();
    let sh = split(&h, &Bipartition::new(&[0], 3, 1).unwrap()).unwrap();
    assert_eq!(sh.boundary_size, 0);
    assert!(decompose_boundary(&sh).unwrap().is_empty());
}

#[test]
fn split_reassembles_and_sides_commute() {
    for h in models() {
        let n = h.n();
        let sh = split(&h, &Bipartition::half(n)).unwrap();
        assert_eq!(sh.a_terms.len() + sh.b_terms.len() + sh.boundary_terms.len(), h.terms.len());
        let total = sh.dense_a() + sh.dense_b() + sh.dense_boundary();
        assert!(linalg::op_norm(&(total - h.dense())) < 1e-10, "{}", h.label);
        let c = linalg::commutator(&sh.dense_a(), &sh.dense_b());
        assert!(linalg::frob(&c) < 1e-12, "{}", h.label);
    }
}

#[test]
fn extended_boundary_is_monotone_in_width() {
    for h in models() {
        let n = h.n();
        let mut last = 0;
        for w in 1..=n {
            let sh = split(&h, &Bipartition::half(n).with_width(w)).unwrap();
            assert!(sh.extended_boundary_size >= sh.boundary_size);
            assert!(sh.extended_boundary_size >= last);
            last = sh.extended_boundary_size;
        }
    }
}

#[test]
fn decompositions_reconstruct_and_dominate_the_norm() {
    for h in models() {
        let sh = split(&h, &Bipartition::half(h.n())).unwrap();
        let dec = decompose_boundary(&sh).unwrap();
        assert!(decomposition_residual(&sh, &dec) < 1e-10, "{}", h.label);
        for (b, (ua, ub)) in dec.coefficients.iter().zip(&dec.factors) {
            assert!(*b > 0.0);
            assert!(linalg::is_unitary(ua, 1e-10) && linalg::is_unitary(ub, 1e-10));
        }
        assert!(dec.beta_sum() >= linalg::op_norm(&sh.dense_boundary()) - 1e-10);
    }
}

#[test]
fn zz_boundary_is_one_unitary_product() {
    let zz: Vec<(f64, f64)> = [1.0, -1.0, -1.0, 1.0]
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| (0..4).map(move |j| if i == j { (v, 0.0) } else { (0.0, 0.0) }))
        .collect();
    let spec = ModelSpec::Explicit { local_dims: vec![2, 2], terms: vec![ExplicitTerm { support: vec![0, 1], entries: zz, label: "ZZ".into() }] };
    let h = build_model::<f64>(&spec, &caps()).unwrap();
    let sh = split(&h, &Bipartition::prefix(1, 2)).unwrap();
    let dec = decompose_boundary(&sh).unwrap();
    assert!(decomposition_residual(&sh, &dec) < 1e-10);
    // one non-identity product plus whatever constant normalisation left
    let non_identity = dec.labels.iter().filter(|l| l.as_str() != "[0.0|0.0]").count();
    assert_eq!(non_identity, 1);
}

#[test]
fn pair_projector_pauli_weights_match_trace_oracle() {
    let h = paired(2, 0);
    let sh = split(&h, &Bipartition::prefix(1, 2)).unwrap();
    let dec = decompose_boundary(&sh).unwrap();
    let m = sh.dense_boundary();
    // oracle: |Tr(σ_a ⊗ σ_b M)| / 4 over the sixteen Pauli products
    let mut weights = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            let p: CMat<f64> = linalg::kron(&linalg::pauli(a), &linalg::pauli(b));
            let c = (p * &m).trace() / creal(4.0);
            if c.norm() > 1e-13 {
                weights.push(c.norm());
            }
        }
    }
    assert_eq!(dec.len(), weights.len());
    let oracle: f64 = weights.iter().sum();
    assert!((dec.beta_sum() - oracle).abs() < 1e-12, "{} vs {oracle}", dec.beta_sum());
}

#[test]
fn rejects_bad_inputs() {
    assert!(matches!(
        build_model::<f64>(&ModelSpec::Tfim { dims: vec![15], j: 1.0, g: 1.0, periodic: false }, &caps()),
        Err(agsp_core::Error::CapExceeded { .. })
    ));
    let bad = ModelSpec::Explicit {
        local_dims: vec![2],
        terms: vec![ExplicitTerm { support: vec![0], entries: vec![(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)], label: "raise".into() }],
    };
    assert!(matches!(build_model::<f64>(&bad, &caps()), Err(agsp_core::Error::NonHermitian(_))));
    assert!(Bipartition::new(&[0, 0], 3, 1).is_err());
}

#[test]
fn f32_build_agrees_with_f64() {
    let h64 = tfim(6, 2.0);
    let h32 = build_model::<f32>(&ModelSpec::Tfim { dims: vec![6], j: 1.0, g: 2.0, periodic: false }, &caps()).unwrap();
    let g64 = diagonalize(&h64, &caps()).unwrap().gap;
    let g32 = diagonalize(&h32, &caps()).unwrap().gap as f64;
    assert!((g64 - g32).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_cuts_reassemble(n in 3usize..8, mask in 1u32..127, g in 0.2f64..3.0) {
        let side_a: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        prop_assume!(!side_a.is_empty() && side_a.len() < n);
        let h = tfim(n, g);
        let cut = Bipartition::new(&side_a, n, 1).unwrap();
        let sh = split(&h, &cut).unwrap();
        let total = sh.dense_a() + sh.dense_b() + sh.dense_boundary();
        prop_assert!(linalg::op_norm(&(total - h.dense())) < 1e-10);
        let dec = decompose_boundary(&sh).unwrap();
        prop_assert!(decomposition_residual(&sh, &dec) < 1e-10);
        prop_assert!(dec.beta_sum() >= linalg::op_norm(&sh.dense_boundary()) - 1e-10);
        let crossing = h.terms.iter().filter(|t| t.support.iter().any(|&s| cut.in_a(s)) && t.support.iter().any(|&s| !cut.in_a(s))).count();
        prop_assert_eq!(sh.boundary_size, crossing);
    }
}
