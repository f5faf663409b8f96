use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signsieve::mvn::normal::cdf;
use signsieve::recovery::{
    phi_integral, phi_lambda, phi_lambda_pm, phi_max, prob_i, prob_s, support_recovery_prob, CriterionValue,
    IntegralConfig, MaxConfig, PhiCriterion, Scenario, SignVectorSet, SupportModel, SupportSet,
};
use signsieve::{Design, QmcConfig, StandardizedDesign};

fn sylvester(order: usize) -> Vec<Vec<i8>> {
    let mut h = vec![vec![1i8]];
    while h.len() < order {
        let m = h.len();
        let mut next = vec![vec![0i8; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                next[i][j] = h[i][j];
                next[i][j + m] = h[i][j];
                next[i + m][j] = h[i][j];
                next[i + m][j + m] = -h[i][j];
            }
        }
        h = next;
    }
    h
}

/// Hadamard-derived orthogonal design with `n = order`, `p = order - 1`.
fn hadamard_design(order: usize) -> Design {
    let h = sylvester(order);
    Design::from_rows(&h.iter().map(|r| r[1..].to_vec()).collect::<Vec<_>>()).unwrap()
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Design {
    loop {
        let x = (0..n * p).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let d = Design::new(n, p, x).unwrap();
        if d.standardize().degenerate_columns.is_empty() {
            return d;
        }
    }
}

/// A random support whose active block is invertible.
fn random_support(rng: &mut ChaCha8Rng, std: &StandardizedDesign, k: usize) -> Vec<usize> {
    loop {
        let mut s: Vec<usize> = Vec::new();
        while s.len() < k {
            let j = rng.random_range(0..std.p);
            if !s.contains(&j) {
                s.push(j);
            }
        }
        s.sort_unstable();
        if SupportModel::new(std, &s).is_ok() {
            return s;
        }
    }
}

fn close(a: &CriterionValue, b: &CriterionValue) -> bool {
    (a.value - b.value).abs() <= 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt() + 1e-12
}

#[test]
fn orthogonal_sign_event_is_a_product() {
    let std = hadamard_design(8).standardize();
    let sn = 8f64.sqrt();
    let sc = Scenario::new(vec![0, 3, 5], vec![1.0, 0.6, 1.4], vec![1, -1, 1], 0.4).unwrap();
    let est = prob_s(&std, &sc, &QmcConfig::default()).unwrap();
    let exact: f64 = sc.magnitudes.iter().map(|b| cdf(sn * (b - 0.4))).product();
    assert!((est.value - exact).abs() <= 3.0 * est.std_error + 1e-12);
}

#[test]
fn large_effects_recover_signs_surely() {
    let std = hadamard_design(8).standardize();
    let sc = Scenario::uniform(vec![1, 2], 100.0, 0.9).unwrap();
    assert!(prob_s(&std, &sc, &QmcConfig::default()).unwrap().value > 1.0 - 1e-12);
}

#[test]
fn orthogonal_inactive_event_closed_form() {
    let std = hadamard_design(8).standardize();
    for lambda in [0.1, 0.5, 1.5] {
        let est = prob_i(&std, &[0, 4], &[1, -1], lambda, &QmcConfig::default()).unwrap();
        let exact = (2.0 * cdf(lambda * 8f64.sqrt()) - 1.0).powi(5);
        assert!((est.value - exact).abs() <= 3.0 * est.std_error + 1e-12, "{lambda}");
    }
    let far = prob_i(&std, &[0, 4], &[1, 1], 50.0, &QmcConfig::default()).unwrap();
    assert!(far.value > 1.0 - 1e-12);
}

#[test]
fn hadamard_phi_closed_form() {
    let std = hadamard_design(8).standardize();
    let sc = Scenario::uniform(vec![0, 1], 1.0, 0.5).unwrap();
    let phi = phi_lambda(&std, &sc, &QmcConfig::default()).unwrap();
    let r = 0.5 * 8f64.sqrt();
    let exact = cdf(r).powi(2) * (2.0 * cdf(r) - 1.0).powi(5);
    assert!((phi.value - exact).abs() <= 3.0 * phi.std_error + 1e-12);
    assert!((phi.value - phi.p_s.unwrap() * phi.p_i.unwrap()).abs() < 1e-15);
}

#[test]
fn constant_inactive_columns_make_inactive_event_certain() {
    let h = hadamard_design(8);
    let mut cols: Vec<Vec<i8>> = (0..3).map(|j| h.column(j)).collect();
    cols.extend((0..4).map(|_| vec![1i8; 8]));
    let std = Design::from_columns(&cols).unwrap().standardize();
    let sc = Scenario::uniform(vec![0, 1, 2], 1.0, 0.7).unwrap();
    let phi = phi_lambda(&std, &sc, &QmcConfig::default()).unwrap();
    assert_eq!(phi.p_i, Some(1.0));
    let ps = prob_s(&std, &sc, &QmcConfig::default()).unwrap();
    assert_eq!(phi.value, ps.value);
}

#[test]
fn orthogonal_pm_equals_known() {
    let std = hadamard_design(8).standardize();
    let cfg = QmcConfig::default();
    let known = phi_lambda(&std, &Scenario::uniform(vec![2, 5, 6], 1.2, 0.6).unwrap(), &cfg).unwrap();
    let pm = phi_lambda_pm(&std, &[2, 5, 6], &[1.2; 3], 0.6, &SignVectorSet::AllHalf, &cfg).unwrap();
    assert!(close(&known, &pm));
}

#[test]
fn reflection_classes_average_like_all_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = random_design(&mut rng, 10, 12);
    let std = d.standardize();
    let support = random_support(&mut rng, &std, 3);
    let cfg = QmcConfig::default();
    let half = phi_lambda_pm(&std, &support, &[1.0; 3], 0.5, &SignVectorSet::AllHalf, &cfg).unwrap();
    let mut total = 0.0;
    let mut var = 0.0;
    for bits in 0..8u32 {
        let signs: Vec<i8> = (0..3).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect();
        let sc = Scenario::new(support.clone(), vec![1.0; 3], signs, 0.5).unwrap();
        let v = phi_lambda(&std, &sc, &cfg.with_seed(100 + bits as u64)).unwrap();
        total += v.value / 8.0;
        var += (v.std_error / 8.0).powi(2);
    }
    assert!((half.value - total).abs() <= 3.0 * (var + half.std_error.powi(2)).sqrt() + 1e-12);
    let k1 = phi_lambda_pm(&std, &support[..1], &[1.0], 0.5, &SignVectorSet::AllHalf, &cfg).unwrap();
    let k1_known = phi_lambda(&std, &Scenario::uniform(support[..1].to_vec(), 1.0, 0.5).unwrap(), &cfg.with_seed(0)).unwrap();
    assert!(close(&k1, &k1_known));
}

#[test]
fn reflection_and_column_flip_symmetries() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let d = random_design(&mut rng, 10, 14);
        let std = d.standardize();
        let support = random_support(&mut rng, &std, 3);
        let signs: Vec<i8> = (0..3).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let mags: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0)).collect();
        let lambda = rng.random_range(0.2..1.2);
        let cfg = QmcConfig::default();
        let sc = Scenario::new(support.clone(), mags.clone(), signs.clone(), lambda).unwrap();
        let base = phi_lambda(&std, &sc, &cfg).unwrap();
        let neg: Vec<i8> = signs.iter().map(|s| -s).collect();
        let reflected = phi_lambda(
            &std,
            &Scenario::new(support.clone(), mags.clone(), neg, lambda).unwrap(),
            &cfg.with_seed(77),
        )
        .unwrap();
        assert!(close(&base, &reflected), "{base:?} {reflected:?}");

        // flipping the active columns with negative signs maps the scenario to z = 1
        let mut flips = vec![1i8; d.p()];
        for (&j, &s) in support.iter().zip(&signs) {
            flips[j] = s;
        }
        let flipped = d.with_column_signs(&flips).unwrap().standardize();
        let positive = Scenario::new(support.clone(), mags, vec![1; 3], lambda).unwrap();
        let on_flipped = phi_lambda(&flipped, &positive, &cfg.with_seed(78)).unwrap();
        assert!(close(&base, &on_flipped), "{base:?} {on_flipped:?}");
    }
}

#[test]
fn larger_effects_never_hurt_sign_event() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = random_design(&mut rng, 12, 16);
    let std = d.standardize();
    let support = random_support(&mut rng, &std, 3);
    let cfg = QmcConfig::default();
    let small = Scenario::new(support.clone(), vec![0.8; 3], vec![1, -1, 1], 0.4).unwrap();
    let big = Scenario::new(support.clone(), vec![1.3; 3], vec![1, -1, 1], 0.4).unwrap();
    let ps = prob_s(&std, &small, &cfg).unwrap();
    let pb = prob_s(&std, &big, &cfg).unwrap();
    assert!(pb.value >= ps.value - 3.0 * (ps.std_error.powi(2) + pb.std_error.powi(2)).sqrt());
    let i1 = phi_lambda(&std, &small, &cfg).unwrap().p_i.unwrap();
    let i2 = phi_lambda(&std, &big, &cfg).unwrap().p_i.unwrap();
    assert_eq!(i1, i2);
}

#[test]
fn support_recovery_dominates_sign_recovery() {
    let std = hadamard_design(8).standardize();
    let cfg = QmcConfig::default();
    let sc = Scenario::uniform(vec![3], 0.5, 0.3).unwrap();
    let supp = support_recovery_prob(&std, &sc, &cfg).unwrap();
    let sign = phi_lambda(&std, &sc, &cfg).unwrap();
    assert!(supp.value >= sign.value - 3.0 * (supp.std_error + sign.std_error));
    let big = Scenario::uniform(vec![1, 6], 50.0, 0.8).unwrap();
    let diff = support_recovery_prob(&std, &big, &cfg).unwrap().value - phi_lambda(&std, &big, &cfg).unwrap().value;
    assert!(diff.abs() < 1e-3);
}

#[test]
fn support_average_basics() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = random_design(&mut rng, 9, 10);
    let std = d.standardize();
    let support = random_support(&mut rng, &std, 3);
    let cfg = QmcConfig::default();
    let single = SupportSet::explicit(10, 3, vec![support.clone()]).unwrap();
    let crit = PhiCriterion::new(&std, &single, &SignVectorSet::Known, 2.0, cfg).unwrap();
    let avg = crit.at(0.6).unwrap();
    let direct = phi_lambda(&std, &Scenario::uniform(support, 2.0, 0.6).unwrap(), &cfg).unwrap();
    assert!(close(&avg, &direct));

    // column permutation with exhaustive supports
    let perm = [3, 1, 4, 0, 9, 2, 6, 5, 8, 7];
    let permuted = d.permute_columns(&perm).unwrap().standardize();
    let all = SupportSet::exhaustive(10, 3).unwrap();
    let cheap = QmcConfig::default().with_budget(1024);
    let a = PhiCriterion::new(&std, &all, &SignVectorSet::AllHalf, 2.0, cheap).unwrap().at(0.7).unwrap();
    let b = PhiCriterion::new(&permuted, &all, &SignVectorSet::AllHalf, 2.0, cheap).unwrap().at(0.7).unwrap();
    assert!(close(&a, &b), "{a:?} {b:?}");
    assert_eq!(a.singular_supports, b.singular_supports);
}

#[test]
fn singular_supports_score_zero() {
    let h = hadamard_design(8);
    let cols = vec![h.column(0), h.column(0), h.column(1), h.column(2)];
    let std = Design::from_columns(&cols).unwrap().standardize();
    let set = SupportSet::explicit(4, 2, vec![vec![0, 1], vec![1, 2]]).unwrap();
    let crit = PhiCriterion::new(&std, &set, &SignVectorSet::Known, 1.0, QmcConfig::default()).unwrap();
    assert_eq!(crit.singular_supports(), 1);
    let v = crit.at(0.5).unwrap();
    assert_eq!(v.singular_supports, 1);
    let good = phi_lambda(&std, &Scenario::uniform(vec![1, 2], 1.0, 0.5).unwrap(), &QmcConfig::default()).unwrap();
    assert!((v.value - good.value / 2.0).abs() < 0.01);
}

fn closed_form(lambda: f64) -> f64 {
    let r = lambda * 8f64.sqrt();
    cdf(8f64.sqrt() * (1.0 - lambda)).powi(2) * (2.0 * cdf(r) - 1.0).powi(5)
}

#[test]
fn max_matches_dense_grid() {
    let f = |l: f64| {
        Ok(CriterionValue {
            value: closed_form(l),
            ..CriterionValue::zero()
        })
    };
    let out = phi_max(f, &MaxConfig { tolerance: 1e-8, ..Default::default() }).unwrap();
    let dense = (0..10_001)
        .map(|i| closed_form((-5.0 + 7.0 * i as f64 / 10_000.0).exp()))
        .fold(0.0, f64::max);
    assert!((out.result.value - dense).abs() < 1e-4);
    assert!(out.result.value >= dense - 1e-12);
}

#[test]
fn integral_converges_as_step_halves() {
    let f = |l: f64| {
        Ok(CriterionValue {
            value: closed_form(l),
            ..CriterionValue::zero()
        })
    };
    let coarse = phi_integral(f, &IntegralConfig { step: 0.02, epsilon: 0.0, ..Default::default() }).unwrap();
    let fine = phi_integral(f, &IntegralConfig { step: 0.01, epsilon: 0.0, ..Default::default() }).unwrap();
    assert!((coarse.result.value - fine.result.value).abs() / fine.result.value < 0.02);
}

#[test]
fn engine_curve_matches_closed_form_curve() {
    let std = hadamard_design(8).standardize();
    let set = SupportSet::explicit(7, 2, vec![vec![0, 1]]).unwrap();
    let crit = PhiCriterion::new(&std, &set, &SignVectorSet::Known, 1.0, QmcConfig::default()).unwrap();
    let cfg = IntegralConfig { step: 0.05, ..Default::default() };
    let engine = phi_integral(|l| crit.at(l), &cfg).unwrap();
    let exact = phi_integral(
        |l| Ok(CriterionValue { value: closed_form(l), ..CriterionValue::zero() }),
        &cfg,
    )
    .unwrap();
    assert!((engine.result.value - exact.result.value).abs() <= 3.0 * engine.result.std_error + 1e-9);
}
