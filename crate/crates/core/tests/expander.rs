use conc_lab_core::core_bounds::check_gb_without_repetition;
use conc_lab_core::exact::{q, Q};
use conc_lab_core::expander::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn eps_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

/// Largest |eigenvalue| of a symmetric matrix by power iteration on its square.
fn power_norm(m: &DMatrix<f64>) -> f64 {
    let sq = m * m;
    let mut v = DVector::from_fn(m.nrows(), |i, _| 1.0 + 0.1 * i as f64);
    let mut est = 0.0;
    for _ in 0..5000 {
        let w = &sq * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm / v.norm();
        v = w / norm;
    }
    est.sqrt()
}

#[test]
fn stay_probability_obeys_gap_product() {
    let mut rng = conc_lab_core::seed::rng(17);
    for trial in 0..40u64 {
        let n = 6 + (trial % 3) as usize * 2;
        let a = if trial % 2 == 0 {
            random_doubly_stochastic(n, trial)
        } else {
            build_jn_construction(0.3 + 0.1 * (trial % 5) as f64, n).unwrap()
        };
        let lambda = spectral_lambda(&a);
        let spec = WalkSpec::with_density(a, 0.5, 12).unwrap();
        let mu = spec.mu();
        for _ in 0..20 {
            let k = rng.random_range(1..=5usize);
            let mut xs: Vec<u64> = rand::seq::index::sample(&mut rng, 12, k)
                .into_iter()
                .map(|x| x as u64 + 1)
                .collect();
            xs.sort_unstable();
            let mut prev = 0;
            let bound: f64 = xs
                .iter()
                .map(|&x| {
                    let d = x - prev;
                    prev = x;
                    mu + lambda.powi(d as i32)
                })
                .product();
            let p = stay_prob_exact(&spec, &xs).unwrap();
            assert!(p <= bound + 1e-9, "{xs:?}: {p} > {bound}");
        }
    }
}

#[test]
fn norm_claim_on_random_matrices() {
    let mut rng = conc_lab_core::seed::rng(99);
    for i in 0..100u64 {
        let n = rng.random_range(6..=10usize);
        let a = random_doubly_stochastic(n, 1000 + i);
        let size = rng.random_range(1..n);
        let w: Vec<usize> = rand::seq::index::sample(&mut rng, n, size).into_vec();
        for k in 1..=8u32 {
            let c = norm_claim_check(&a, &w, k).unwrap();
            assert!(c.holds, "matrix {i} k={k}: {c:?}");
            let ak = a.matrix().pow(k);
            let mut ws = w.clone();
            ws.sort_unstable();
            let sub = DMatrix::from_fn(ws.len(), ws.len(), |r, s| ak[(ws[r], ws[s])]);
            let oracle = power_norm(&sub);
            assert!(
                (oracle - c.lhs).abs() < 1e-6,
                "oracle {oracle} vs {}",
                c.lhs
            );
        }
    }
}

#[test]
fn hitting_bound_dominates_average_stay() {
    let mut checked = 0;
    for lambda in [0.0, 0.25, 0.5] {
        for n in [4usize, 6, 8] {
            for mu in [0.25, 0.5] {
                if (n as f64 * mu).fract() != 0.0 {
                    continue;
                }
                for ell in 1..=12u64 {
                    let spec =
                        WalkSpec::with_density(build_jn_construction(lambda, n).unwrap(), mu, ell)
                            .unwrap();
                    for m in 1..=ell {
                        let admissible: Vec<f64> = (1..=40)
                            .map(|i| i as f64 * 0.05)
                            .filter(|&e| hitting_precondition(lambda, mu, e, m, ell).holds)
                            .collect();
                        if admissible.is_empty() {
                            continue;
                        }
                        let avg = avg_stay_prob(&spec, m, Mode::Exact).unwrap().value;
                        for eps in admissible {
                            let b = hitting_bound(mu, eps, m as f64).unwrap();
                            assert!(
                                avg <= b + 1e-9,
                                "lambda={lambda} n={n} mu={mu} l={ell} m={m} eps={eps}"
                            );
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 1000, "{checked}");
}

#[test]
fn two_state_dp_matches_full_walk() {
    for lambda in [0.25, 0.5] {
        for (n, mu) in [(4usize, 0.25), (4, 0.5), (8, 0.25)] {
            for ell in [1u64, 5, 12, 20] {
                let spec =
                    WalkSpec::with_density(build_jn_construction(lambda, n).unwrap(), mu, ell)
                        .unwrap();
                for t in 0..=ell {
                    let full = walk_tail_count(&spec, t).unwrap();
                    let two = walk_tail_two_state(lambda, mu, ell, t).unwrap();
                    assert!((full - two).abs() < 1e-12, "l={ell} t={t}: {full} vs {two}");
                }
            }
        }
    }
}

#[test]
fn two_state_float_matches_exact() {
    for (l, m) in [(q(1, 4), q(1, 2)), (q(1, 2), q(1, 4))] {
        let (lf, mf) = (
            conc_lab_core::exact::to_f64(&l),
            conc_lab_core::exact::to_f64(&m),
        );
        for ell in [8u64, 30, 64] {
            for t in [0, ell / 3, ell / 2, ell] {
                let e = conc_lab_core::exact::to_f64(&walk_tail_two_state_exact(&l, &m, ell, t));
                let f = walk_tail_two_state(lf, mf, ell, t).unwrap();
                assert!((e - f).abs() <= 1e-12 * e.max(1e-300), "{e} vs {f}");
            }
        }
    }
}

#[test]
fn tail_bounds_dominate_two_state_tails() {
    let mut tight_checked = 0;
    for lambda in [0.25, 0.5] {
        for mu in [0.25, 0.5] {
            for ell in 1..=64u64 {
                for eps in eps_grid() {
                    let t = tail_threshold(mu, ell, eps);
                    let tail = walk_tail_two_state(lambda, mu, ell, t).unwrap();
                    let main = main_tail_bound(mu, lambda, eps, ell).unwrap();
                    assert!(
                        tail <= main.value + 1e-9,
                        "main: lambda={lambda} mu={mu} l={ell} eps={eps}"
                    );
                    let tight = tight_tail_bound(mu, lambda, eps, ell).unwrap();
                    assert!(
                        tail <= tight.bound.value + 1e-9,
                        "tight: lambda={lambda} mu={mu} l={ell} eps={eps}"
                    );
                    tight_checked += usize::from(tight.remark_valid);
                }
            }
        }
    }
    assert!(tight_checked > 0);
}

#[test]
fn lower_bound_is_below_tail() {
    let mut checked = 0;
    for lambda in [0.25, 0.5] {
        for mu in [0.25, 0.5] {
            for ell in 2..=64u64 {
                for eps in eps_grid() {
                    let Ok(lb) = optimality_lower_bound(lambda, mu, eps, ell) else {
                        continue;
                    };
                    let tail = walk_tail_two_state(lambda, mu, ell, lb.visits).unwrap();
                    assert!(
                        lb.value <= tail + 1e-9,
                        "lambda={lambda} mu={mu} l={ell} eps={eps}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100, "{checked}");
}

#[test]
fn lower_bound_log_and_exact_agree() {
    for (lq, mq) in [(q(1, 4), q(1, 4)), (q(1, 2), q(1, 2)), (q(1, 4), q(1, 2))] {
        for ell in 2..=20u64 {
            for i in 1..=10 {
                let eq = q(i, 20);
                let (lf, mf, ef) = (
                    conc_lab_core::exact::to_f64(&lq),
                    conc_lab_core::exact::to_f64(&mq),
                    conc_lab_core::exact::to_f64(&eq),
                );
                let (Ok(f), Ok((e, s, r))) = (
                    optimality_lower_bound(lf, mf, ef, ell),
                    optimality_lower_bound_exact(&lq, &mq, &eq, ell),
                ) else {
                    continue;
                };
                assert_eq!((f.visits, f.runs), (s, r));
                let ev = conc_lab_core::exact::to_f64(&e);
                assert!(
                    (f.value - ev).abs() <= 1e-9 * ev.abs().max(f64::MIN_POSITIVE),
                    "{} vs {}",
                    f.value,
                    ev
                );
                // exact product never exceeds the exact tail
                let tail = walk_tail_two_state_exact(&lq, &mq, ell, s);
                assert!(e <= tail);
            }
        }
    }
}

#[test]
fn walk_indicators_are_gb_without_repetition() {
    let mut checked = 0;
    for (lq, lf) in [(q(1, 4), 0.25), (q(1, 2), 0.5)] {
        for (n, target) in [(4usize, vec![0usize, 1]), (4, vec![0])] {
            let mu = target.len() as f64 / n as f64;
            for ell in 2..=10u64 {
                let spec =
                    WalkSpec::new(build_jn_exact(&lq, n).unwrap(), target.clone(), ell).unwrap();
                let dist = walk_indicator_distribution(&spec).unwrap();
                for i in 1..=8 {
                    let eps = i as f64 * 0.1;
                    let m = expander_gb_order(lf, mu, eps, ell);
                    if m == 0 {
                        continue;
                    }
                    let eq = q(i, 10);
                    let c = check_gb_without_repetition(&dist, &eq, m as u32).unwrap();
                    assert!(
                        c.holds,
                        "lambda={lf} n={n} |W|={} l={ell} eps={eps} m={m}: {c:?}",
                        target.len()
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 20, "{checked}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_matrices_are_doubly_stochastic(n in 2usize..10, seed in any::<u64>()) {
        let a = random_doubly_stochastic(n, seed);
        let m = a.matrix();
        for i in 0..n {
            prop_assert!((m.row(i).sum() - 1.0).abs() < 1e-12);
            prop_assert!((m.column(i).sum() - 1.0).abs() < 1e-12);
            for j in 0..n {
                prop_assert!((m[(i, j)] - m[(j, i)]).abs() < 1e-15);
            }
        }
        let l = spectral_lambda(&a);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&l));
    }

    #[test]
    fn jn_construction_has_requested_lambda(l in 0.0f64..1.0, n in 2usize..12) {
        let a = build_jn_construction(l, n).unwrap();
        prop_assert!((spectral_lambda(&a) - l).abs() < 1e-9);
    }

    #[test]
    fn claim_holds_for_random_targets(seed in any::<u64>(), n in 3usize..9, k in 1u32..9, mask in 1u32..256) {
        let a = random_doubly_stochastic(n, seed);
        let w: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        prop_assert!(norm_claim_check(&a, &w, k).unwrap().holds);
    }

    #[test]
    fn main_bound_monotone(mu in 0.05f64..1.0, lambda in 0.0f64..1.0, eps in 0.0f64..0.79, ell in 1u64..1000) {
        let a = main_tail_bound(mu, lambda, eps, ell).unwrap().value;
        let b = main_tail_bound(mu, lambda, eps + 0.01, ell).unwrap().value;
        let c = main_tail_bound(mu, lambda, eps, ell + 1).unwrap().value;
        prop_assert!(b <= a && c <= a);
    }
}

#[test]
fn exact_rational_walk_law_marginals() {
    let spec = WalkSpec::new(build_jn_exact(&q(1, 2), 4).unwrap(), vec![0, 1], 6).unwrap();
    let d = walk_indicator_distribution(&spec).unwrap();
    for j in 0..6 {
        assert_eq!(d.marginal_moment(j, 1), q(1, 2));
    }
    let total: Q = d.support().iter().map(|a| a.prob.clone()).sum();
    assert_eq!(total, q(1, 1));
}
