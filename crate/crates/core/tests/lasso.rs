use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signsieve::construct::{block_construction, proposition1_pad};
use signsieve::lasso::{kkt_check, lasso_solve, simulate_sign_recovery, SimConfig};
use signsieve::mvn::normal::{cdf, interval};
use signsieve::recovery::phi_lambda;
use signsieve::{Design, QmcConfig, Scenario};

fn hadamard8() -> Design {
    let mut h = vec![vec![1i8]];
    while h.len() < 8 {
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
    Design::from_rows(&h.iter().map(|r| r[1..].to_vec()).collect::<Vec<_>>()).unwrap()
}

fn random_design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Design {
    loop {
        let x: Vec<i8> = (0..n * p).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let d = Design::new(n, p, x).unwrap();
        if d.standardize().degenerate_columns.is_empty() {
            return d;
        }
    }
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()
}

#[test]
fn large_penalty_kills_everything() {
    let d = hadamard8();
    let std = d.standardize();
    let y = noise(8, 1);
    let kill = (0..7)
        .map(|j| {
            let mean = y.iter().sum::<f64>() / 8.0;
            (0..8).map(|r| std.f[(r, j)] * (y[r] - mean)).sum::<f64>().abs() / 8.0
        })
        .fold(0.0, f64::max);
    let fit = lasso_solve(&std, &y, kill * 1.0001).unwrap();
    assert!(fit.support.is_empty());
    let kkt = kkt_check(&std, &y, kill * 1.0001, &fit, 1e-8).unwrap();
    assert!(kkt.passes && kkt.stationarity == 0.0);
    let zero = lasso_solve(&std, &[0.0; 8], 0.1).unwrap();
    assert!(zero.support.is_empty() && zero.objective == 0.0);
}

#[test]
fn orthogonal_fit_is_soft_threshold() {
    let d = hadamard8();
    let std = d.standardize();
    let y = noise(8, 7);
    let mean = y.iter().sum::<f64>() / 8.0;
    let lambda = 0.3;
    let fit = lasso_solve(&std, &y, lambda).unwrap();
    for j in 0..7 {
        let rho: f64 = (0..8).map(|r| std.f[(r, j)] * (y[r] - mean)).sum::<f64>() / 8.0;
        let want = rho.signum() * (rho.abs() - lambda).max(0.0);
        assert!((fit.coefficients[j] - want).abs() < 1e-12);
    }
}

#[test]
fn converged_fits_pass_kkt_and_objective_descends() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..30 {
        let d = random_design(10, 14, &mut rng);
        let std = d.standardize();
        let y = noise(10, case);
        let lambda = 0.05 + 0.4 * rng.random::<f64>();
        let fit = lasso_solve(&std, &y, lambda).unwrap();
        assert!(fit.converged);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let kkt = kkt_check(&std, &y, lambda, &fit, 1e-6).unwrap();
        assert!(kkt.passes, "case {case}: {kkt:?}");
        if let Some(&j) = fit.support.first() {
            let mut broken = fit.clone();
            broken.coefficients[j] += 0.1;
            assert!(kkt_check(&std, &y, lambda, &broken, 1e-6).unwrap().stationarity > 1e-3);
        }
    }
}

#[test]
fn mirrored_noise_gives_mirrored_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = random_design(9, 12, &mut rng);
    let std = d.standardize();
    let e = noise(9, 2);
    let mean: Vec<f64> = (0..9).map(|r| 1.5 * d.get(r, 2) as f64 - 2.0 * d.get(r, 5) as f64).collect();
    let plus: Vec<f64> = mean.iter().zip(&e).map(|(m, e)| m + e).collect();
    let minus: Vec<f64> = plus.iter().map(|v| -v).collect();
    let a = lasso_solve(&std, &plus, 0.2).unwrap();
    let b = lasso_solve(&std, &minus, 0.2).unwrap();
    for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
        assert!((x + y).abs() < 1e-9);
    }
}

#[test]
fn empty_model_recovered_at_large_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = random_design(10, 12, &mut rng);
    let sim = SimConfig {
        replications: 2000,
        seed: 1,
    };
    let r = simulate_sign_recovery(&d, &[], &[], 3.0, &sim).unwrap();
    assert!(r.empirical >= 0.99, "{r:?}");
}

#[test]
fn simulation_matches_orthogonal_closed_form() {
    let d = hadamard8();
    let (beta, lambda) = (1.0, 0.5);
    let sim = SimConfig {
        replications: 10_000,
        seed: 11,
    };
    let r = simulate_sign_recovery(&d, &[1, 4], &[beta, -beta], lambda, &sim).unwrap();
    let sn = 8f64.sqrt();
    let exact = cdf(sn * (beta - lambda)).powi(2) * interval(-lambda * sn, lambda * sn).powi(5);
    assert!((r.empirical - exact).abs() <= 3.0 * r.std_error, "{r:?} vs {exact}");
}

#[test]
fn simulation_matches_engine_on_padded_design() {
    let padded = proposition1_pad(&block_construction(8, 3, 2).unwrap(), 6).unwrap();
    let s = Scenario::uniform(vec![0, 1, 2], 1.0, 0.15).unwrap();
    let analytic = phi_lambda(&padded.standardize(), &s, &QmcConfig::default()).unwrap();
    let sim = SimConfig {
        replications: 10_000,
        seed: 4,
    };
    let r = simulate_sign_recovery(&padded, &[0, 1, 2], &[1.0, 1.0, 1.0], 0.15, &sim).unwrap();
    let err = (r.std_error.powi(2) + analytic.std_error.powi(2)).sqrt();
    assert!((r.empirical - analytic.value).abs() <= 3.0 * err, "{r:?} vs {analytic:?}");
}

#[test]
fn simulation_matches_engine_on_random_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut agree = 0;
    let cases = 5;
    for case in 0..cases {
        let n = rng.random_range(8..=12);
        let p = rng.random_range(n..=n + 4);
        let d = random_design(n, p, &mut rng);
        let k = rng.random_range(1..=3);
        let mut support: Vec<usize> = Vec::new();
        while support.len() < k {
            let j = rng.random_range(0..p);
            if !support.contains(&j) {
                support.push(j);
            }
        }
        let signs: Vec<i8> = (0..k).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let beta = 2.0;
        let lambda = 0.25 + 0.4 * rng.random::<f64>();
        let s = Scenario::new(support.clone(), vec![beta; k], signs.clone(), lambda).unwrap();
        let analytic = match phi_lambda(&d.standardize(), &s, &QmcConfig::default()) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let signed: Vec<f64> = signs.iter().map(|&z| beta * z as f64).collect();
        let sim = SimConfig {
            replications: 4000,
            seed: case,
        };
        let r = simulate_sign_recovery(&d, &support, &signed, lambda, &sim).unwrap();
        let err = (r.std_error.powi(2) + analytic.std_error.powi(2)).sqrt().max(1e-4);
        if (r.empirical - analytic.value).abs() <= 3.0 * err {
            agree += 1;
        } else {
            eprintln!("case {case}: {r:?} vs {analytic:?}");
        }
    }
    assert!(agree >= cases - 1);
}

