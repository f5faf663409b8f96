use proptest::prelude::*;
use signsieve::construct::{
    block_construction, bound_constants, exchange_ue2, exchange_ue2_runs, exchange_vars_plus, hils, nbibd_supports,
    proposition1_pad, support_balance, xi_direct, xi_values, ExchangeConfig, HilsConfig, SupportSpec,
};
use signsieve::recovery::{phi_lambda, IntegralConfig, Summary};
use signsieve::{Design, Error, QmcConfig, Scenario, SignVectorSet, SupportSet};

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

fn orthogonal_columns(n: usize, k: usize) -> Design {
    let h = sylvester(n);
    Design::from_rows(&h.iter().map(|r| r[1..=k].to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn xi_for_the_sixteen_run_blocks() {
    let (x1, x2) = xi_values(16, 4, 4).unwrap();
    assert!((x1 - 0.1575).abs() < 5e-4 && (x1 - x2).abs() < 1e-15, "{x1}");
    let direct = xi_direct(&block_construction(16, 8, 4).unwrap()).unwrap();
    for x in &direct {
        assert!((x - x1).abs() < 1e-10);
    }
    let one_sided = xi_direct(&block_construction(16, 8, 8).unwrap()).unwrap();
    for x in &one_sided {
        assert!((x - 0.1607).abs() < 5e-4, "{x}");
    }
}

#[test]
fn xi_formula_matches_linear_solve_off_balance() {
    for (n, k1, k2) in [(16, 3, 5), (12, 2, 6), (10, 4, 1), (20, 7, 9)] {
        let (x1, x2) = xi_values(n, k1, k2).unwrap();
        let direct = xi_direct(&block_construction(n, k1 + k2, k1).unwrap()).unwrap();
        for (j, x) in direct.iter().enumerate() {
            let want = if j < k1 { x1 } else { x2 };
            assert!((x - want).abs() < 1e-10, "n {n} k1 {k1} k2 {k2}: {x} vs {want}");
        }
    }
    assert_eq!(xi_values(12, 2, 6).unwrap().0, 0.0);
}

#[test]
fn sign_bound_constants() {
    for (k1, want) in [(4, 53.92), (8, 53.72)] {
        let d = block_construction(16, 8, k1).unwrap();
        let c = bound_constants(&d, &xi_direct(&d).unwrap()).unwrap();
        for v in c {
            assert!((v - want).abs() < 0.05, "k1 {k1}: {v}");
        }
    }
    let ortho = orthogonal_columns(16, 8);
    for x in xi_direct(&ortho).unwrap() {
        assert_eq!(x, 1.0);
    }
}

#[test]
fn one_sided_block_is_completely_symmetric() {
    let d = block_construction(6, 2, 0).unwrap();
    let c = d.standardize().c;
    assert!((c[(0, 1)] - 0.25).abs() < 1e-12);
    let d = block_construction(16, 8, 8).unwrap();
    let c = d.standardize().c;
    let want = 1.0 - 64.0 / 252.0;
    for i in 0..8 {
        for j in 0..8 {
            if i != j {
                assert!((c[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn padding_makes_inactive_event_certain() {
    let active = block_construction(8, 3, 2).unwrap();
    let padded = proposition1_pad(&active, 7).unwrap();
    assert_eq!(padded.p(), 7);
    let same = proposition1_pad(&active, 3).unwrap();
    assert_eq!(same, active);
    let s = Scenario::uniform(vec![0, 1, 2], 1.0, 0.2).unwrap();
    let v = phi_lambda(&padded.standardize(), &s, &QmcConfig::default()).unwrap();
    assert_eq!(v.p_i, Some(1.0));
    assert_eq!(v.value, v.p_s.unwrap());
    let (xtx, _) = padded.inner_products();
    assert_eq!(xtx[3 * 7 + 4], 8);
}

#[test]
fn nbibd_complete_and_pair_designs() {
    let all = nbibd_supports(6, 3, 20, 1).unwrap();
    assert_eq!(all, SupportSet::exhaustive(6, 3).unwrap());
    let pairs = nbibd_supports(4, 2, 6, 9).unwrap();
    let b = support_balance(4, &pairs);
    assert_eq!((b.factor_spread, b.pair_spread), (0, 0));
    assert!(matches!(nbibd_supports(5, 2, 11, 0), Err(Error::TooManyBlocks { .. })));
}

#[test]
fn nbibd_balance_guarantees() {
    let s = nbibd_supports(20, 5, 96, 4).unwrap();
    assert_eq!(s.len(), 96);
    let mut counts = [0usize; 20];
    for sup in &s.supports {
        for &j in sup {
            counts[j] += 1;
        }
    }
    assert!(counts.iter().all(|&c| c == 24), "{counts:?}");
    assert!(support_balance(20, &s).pair_spread <= 2);
    for (p, k, blocks) in [(12, 4, 64), (30, 6, 64), (30, 6, 128), (17, 3, 70), (25, 5, 100)] {
        let s = nbibd_supports(p, k, blocks, 2).unwrap();
        let b = support_balance(p, &s);
        let limit = if (k * blocks) % p == 0 { 1 } else { 2 };
        assert!(b.factor_spread <= limit, "({p},{k},{blocks}): {b:?}");
        assert!(b.pair_spread <= 2, "({p},{k},{blocks}): {b:?}");
    }
    assert_eq!(nbibd_supports(12, 4, 64, 7).unwrap(), nbibd_supports(12, 4, 64, 7).unwrap());
}

#[test]
fn ue2_exchange_small_cases() {
    let cfg = ExchangeConfig {
        starts: 20,
        ..Default::default()
    };
    let run = exchange_ue2(4, 3, &cfg).unwrap();
    assert_eq!(run.heuristics.ue_s2, 0.0);
    for r in exchange_ue2_runs(9, 10, &cfg).unwrap() {
        assert!(r.trace.windows(2).all(|w| w[1] < w[0]));
        assert!((r.trace.last().unwrap() - r.heuristics.ue_s2).abs() < 1e-12);
    }
}

#[test]
fn ue2_exchange_is_stable_across_budgets() {
    let small = exchange_ue2(9, 10, &ExchangeConfig { starts: 50, seed: 3, ..Default::default() }).unwrap();
    let large = exchange_ue2(9, 10, &ExchangeConfig { starts: 200, seed: 17, ..Default::default() }).unwrap();
    let (a, b) = (small.heuristics.ue_s2, large.heuristics.ue_s2);
    assert!((a - b).abs() <= 0.02 * b, "{a} vs {b}");
}

#[test]
fn vars_plus_respects_floors() {
    let reference = exchange_ue2(9, 10, &ExchangeConfig::default()).unwrap().heuristics.ue_s2;
    for (eff, ues) in [(0.5, 0.0), (0.7, 0.0), (0.6, 0.1)] {
        let cfg = ExchangeConfig {
            starts: 10,
            seed: 5,
            ue2_efficiency_floor: Some(eff),
            ue_s_floor: Some(ues),
            ue2_reference: Some(reference),
            ..Default::default()
        };
        let run = exchange_vars_plus(9, 10, &cfg).unwrap();
        let h = run.heuristics;
        assert!(reference / h.ue_s2 >= eff && h.ue_s > ues, "{h:?}");
        assert!(h.var_s > 2.0 && h.var_s < 3.0, "{h:?}");
        assert!(run.trace.windows(2).all(|w| w[1] < w[0]));
    }
    let free = exchange_vars_plus(6, 5, &ExchangeConfig { starts: 3, ..Default::default() }).unwrap();
    assert!(free.trace.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn vars_plus_reports_infeasibility() {
    let cfg = ExchangeConfig {
        starts: 3,
        max_passes: 1,
        ue2_efficiency_floor: Some(1.0),
        ue2_reference: Some(1e-3),
        ..Default::default()
    };
    assert!(matches!(exchange_vars_plus(9, 10, &cfg), Err(Error::InfeasibleConstraints)));
}

#[test]
fn hils_singleton_pool_and_argmax() {
    let extra = orthogonal_columns(8, 7);
    let mut cfg = HilsConfig::new(8, 7, 2, 2.0);
    cfg.m_u = 0;
    cfg.m_v = 0;
    cfg.m_u_star = 0;
    cfg.m_v_star = 0;
    cfg.ue2_reference = Some(1.0);
    cfg.summary = Summary::Fixed { lambda: 0.4 };
    cfg.extra_designs = vec![("extra".into(), extra.clone())];
    cfg.qmc = QmcConfig::default().with_budget(256);
    let r = hils(&cfg).unwrap();
    assert_eq!(r.winner, extra);
    assert_eq!(r.candidates.len(), 1);

    let mut cfg = HilsConfig::new(6, 7, 2, 2.0);
    cfg.m_u = 4;
    cfg.m_v = 4;
    cfg.m_u_star = 2;
    cfg.m_v_star = 2;
    cfg.signs = SignVectorSet::Known;
    cfg.supports = SupportSpec::Nbibd { blocks: 8 };
    cfg.summary = Summary::Integral(IntegralConfig { step: 0.2, ..Default::default() });
    cfg.qmc = QmcConfig::default().with_budget(256);
    let r = hils(&cfg).unwrap();
    assert!(r.candidates.len() <= 4 && !r.candidates.is_empty());
    assert!(r.candidates.iter().all(|c| c.score.value.value <= r.winner_value.value));
    assert_eq!(hils(&cfg).unwrap().winner, r.winner);
    cfg.m_u = 0;
    cfg.m_v = 0;
    cfg.m_u_star = 0;
    cfg.m_v_star = 0;
    assert!(matches!(hils(&cfg), Err(Error::EmptyPool)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exchange_traces_are_monotone(n in 4usize..10, p in 3usize..12, seed in any::<u64>()) {
        let cfg = ExchangeConfig { starts: 2, seed, ..Default::default() };
        for r in exchange_ue2_runs(n, p, &cfg).unwrap() {
            prop_assert!(r.trace.windows(2).all(|w| w[1] < w[0]));
            let fresh = r.design.heuristics().ue_s2;
            prop_assert!((fresh - r.heuristics.ue_s2).abs() < 1e-9);
            prop_assert!((r.trace.last().unwrap() - fresh).abs() < 1e-9);
        }
        let v = exchange_vars_plus(n, p, &ExchangeConfig { starts: 1, ..cfg }).unwrap();
        prop_assert!(v.trace.windows(2).all(|w| w[1] < w[0]));
        prop_assert!((v.trace.last().unwrap() - v.design.heuristics().var_s).abs() < 1e-9);
    }

    #[test]
    fn nbibd_balance_holds_broadly(p in 8usize..=30, k in 2usize..=6, blocks in 64usize..=128, seed in any::<u64>()) {
        let total = (0..k).fold(1u64, |acc, i| acc * (p - i) as u64 / (i + 1) as u64);
        prop_assume!(k < p && (blocks as u64) < total);
        let s = nbibd_supports(p, k, blocks, seed).unwrap();
        let b = support_balance(p, &s);
        prop_assert!(b.factor_spread <= 1);
        prop_assert!(b.pair_spread <= 2, "({}, {}, {}): {:?}", p, k, blocks, b);
    }
}
