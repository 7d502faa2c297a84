use conc_lab_core::dist::ExactDistribution;
use conc_lab_core::exact::{binom_q, binomial_tail, exp_neg_bounds, pow_q, q, qi, qu, Q};
use conc_lab_core::polybound::*;
use conc_lab_core::subgraph::{copy_polynomial, Pattern, RandomGraphModel};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn triangles(n: usize) -> PositivePolynomial {
    copy_polynomial(&Pattern::builtin("k3").unwrap(), n).unwrap()
}

fn certified_delta(dist: &ExactDistribution, order: usize) -> Option<Q> {
    [Q::zero(), q(1, 2), qi(1), qi(2), qi(4)]
        .into_iter()
        .find(|d| check_almost_independent(dist, d, order).unwrap().holds)
}

fn check_kv_dominance(p: &PositivePolynomial, dist: &ExactDistribution) -> usize {
    let k = p.degree() as u64;
    let stats = poly_stats_for(p, dist).unwrap();
    let mut checked = 0;
    for m in 1..=(dist.n() as u64 / k) {
        let Some(delta) = certified_delta(dist, (k * m) as usize) else {
            continue;
        };
        for eps in [q(1, 4), q(1, 2), qi(1), qi(2), qi(3)] {
            let t = &stats.mu0_star * (Q::one() + &eps);
            let tail = poly_tail_exact(p, dist, &t).unwrap();
            let bound = kv_bound_exact(&stats, &delta, &eps, m, k).unwrap();
            assert!(
                tail <= bound,
                "m={m} delta={delta} eps={eps}: {tail} > {bound}"
            );
            checked += 1;
        }
    }
    checked
}

#[test]
fn kv_bound_dominates_triangles_in_gnp() {
    let t = triangles(5);
    for p in [q(3, 10), q(1, 2)] {
        let dist = RandomGraphModel::gnp(5, p).unwrap().distribution().unwrap();
        assert!(check_kv_dominance(&t, &dist) >= 10);
    }
}

#[test]
fn kv_bound_dominates_permutation_fixed_pairs() {
    let dist = permutation_indicator_distribution(4).unwrap();
    let p = fixed_point_pairs_polynomial(4).unwrap();
    assert!(p.is_multilinear() && p.degree() == 2);
    assert!(check_kv_dominance(&p, &dist) >= 5);
    assert!(check_almost_independent(&dist, &qi(1), 2).unwrap().holds);
}

#[test]
fn monomials_of_independent_inputs_are_growth_bounded() {
    let t = triangles(4);
    for p in [q(1, 3), q(1, 2)] {
        let dist = ExactDistribution::iid_bernoulli(6, &p).unwrap();
        for m in 1..=2u32 {
            let (check, _) = check_monomial_growth(&t, &dist, m).unwrap();
            assert!(check.holds, "p={p} m={m}: {check:?}");
        }
    }
}

#[test]
fn es_tail_matches_enumeration() {
    for ell in 2..=10usize {
        for k in 1..=ell.min(3) {
            let e = elementary_symmetric(ell, k).unwrap();
            for p in [q(1, 3), q(1, 2)] {
                let dist = ExactDistribution::iid_bernoulli(ell, &p).unwrap();
                let values: Vec<(Q, Q)> = dist
                    .support()
                    .iter()
                    .map(|a| (e.evaluate_q(&a.x).unwrap(), a.prob.clone()))
                    .collect();
                let top: i64 = binom_q(ell as u64, k as u64)
                    .to_integer()
                    .try_into()
                    .unwrap();
                for t in 0..=top + 1 {
                    let oracle: Q = values
                        .iter()
                        .filter(|(v, _)| *v >= qi(t))
                        .map(|(_, pr)| pr.clone())
                        .sum();
                    assert_eq!(
                        es_tail_exact(ell as u64, &p, k as u64, &qi(t)).unwrap(),
                        oracle,
                        "l={ell} k={k} t={t}"
                    );
                }
            }
        }
    }
}

#[test]
fn es_chain_equality_up_to_64() {
    for ell in [8u64, 20, 40, 64] {
        for k in 1..=4u64 {
            for p in [q(1, 4), q(1, 2)] {
                for s in k..=ell {
                    assert_eq!(
                        es_tail_exact(ell, &p, k, &binom_q(s, k)).unwrap(),
                        binomial_tail(ell, &p, s),
                        "l={ell} k={k} s={s}"
                    );
                }
            }
        }
    }
}

#[test]
fn reverse_chernoff_floor_below_tail() {
    let mut checked = 0;
    for ell in (10..=200u64).step_by(10) {
        for p in [q(1, 10), q(1, 4), q(1, 2)] {
            for i in 1..=10 {
                let eps = q(i, 20);
                let Ok(floor) = reverse_chernoff_floor_upper(&p, ell, &eps) else {
                    continue;
                };
                assert!(
                    binomial_upper_tail(ell, &p, &eps) >= floor,
                    "l={ell} p={p} eps={eps}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 50, "{checked}");
}

#[test]
fn es_lower_floor_below_tail() {
    let mut checked = 0;
    for ell in (20..=120u64).step_by(20) {
        for k in 1..=3u64 {
            for p in [q(1, 4), q(1, 2)] {
                for i in 1..=5 {
                    let eps = q(i, 20);
                    let (pf, ef) = (
                        conc_lab_core::exact::to_f64(&p),
                        conc_lab_core::exact::to_f64(&eps),
                    );
                    if es_lower_floor(pf, ell, ef, k).is_err() {
                        continue;
                    }
                    let floor_hi = exp_neg_bounds(&(qu(36) * &eps * &eps * &p * qu(ell))).1;
                    let t = es_mean_threshold(ell, &p, k, &eps);
                    assert!(
                        es_tail_exact(ell, &p, k, &t).unwrap() >= floor_hi,
                        "l={ell} k={k} p={p} eps={eps}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn independent_bound_matches_mc_on_small_graphs() {
    // triangle counts in G(12, 1/3): the bound should sit above the MC tail
    use conc_lab_core::subgraph::{subgraph_tail, TailMode};
    let k3 = Pattern::builtin("k3").unwrap();
    let n = 12;
    let p = q(1, 3);
    let t = triangles(n);
    let s = poly_stats(&t, &MarginalProfile::iid_bernoulli(t.variable_count(), &p)).unwrap();
    let (mu, mu_p) = (
        conc_lab_core::exact::to_f64(&s.mu0_star),
        conc_lab_core::exact::to_f64(&s.mu_prime),
    );
    let model = RandomGraphModel::gnp(n, p).unwrap();
    for eps in [0.25, 0.5] {
        let b = independent_poly_bound(mu, mu_p, eps, 3).unwrap();
        let thr = conc_lab_core::exact::q_from_f64(mu * (1.0 + eps)).unwrap();
        let est = subgraph_tail(
            &model,
            &k3,
            &thr,
            TailMode::MonteCarlo {
                trials: 4000,
                seed: 9,
            },
        )
        .unwrap();
        assert!(est.value() - 0.05 <= b.value, "eps={eps}");
    }
}

fn small_poly() -> impl Strategy<Value = PositivePolynomial> {
    let mono = (1i64..5, prop::collection::vec(0usize..5, 1..4));
    prop::collection::vec(mono, 1..6).prop_map(|ms| {
        PositivePolynomial::new(5, ms.into_iter().map(|(w, v)| (q(w, 2), v)).collect()).unwrap()
    })
}

fn multilinear_poly() -> impl Strategy<Value = PositivePolynomial> {
    let mono = (1i64..5, prop::collection::btree_set(0usize..5, 1..4));
    prop::collection::vec(mono, 1..6).prop_map(|ms| {
        PositivePolynomial::new(
            5,
            ms.into_iter()
                .map(|(w, v)| (q(w, 2), v.into_iter().collect()))
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_equals_partials_when_multilinear(p in multilinear_poly(), k in prop::collection::btree_set(0usize..5, 0..3)) {
        let k: Vec<usize> = k.into_iter().collect();
        let mut d = p.clone();
        for &j in &k {
            d = d.formal_partial(j);
        }
        prop_assert_eq!(p.delta_k(&k).canonical(), d.canonical());
    }

    #[test]
    fn delta_of_empty_set_is_identity(p in small_poly()) {
        prop_assert_eq!(p.delta_k(&[]), p);
    }

    #[test]
    fn delta_dominates_on_ones(p in small_poly(), k in prop::collection::btree_set(0usize..5, 0..3), x in prop::collection::vec(0i64..=4, 5)) {
        // with K's variables at 1 the monomials kept by Delta_K p agree with p's and the rest are >= 0
        let k: Vec<usize> = k.into_iter().collect();
        let mut v: Vec<Q> = x.into_iter().map(|a| q(a, 4)).collect();
        for &j in &k {
            v[j] = Q::one();
        }
        prop_assert!(p.delta_k(&k).evaluate_q(&v).unwrap() <= p.evaluate_q(&v).unwrap());
    }

    #[test]
    fn evaluation_matches_float(p in small_poly(), x in prop::collection::vec(0i64..=4, 5)) {
        let v: Vec<Q> = x.iter().map(|&a| q(a, 4)).collect();
        let f: Vec<f64> = x.iter().map(|&a| a as f64 / 4.0).collect();
        let e = conc_lab_core::exact::to_f64(&p.evaluate_q(&v).unwrap());
        prop_assert!((p.evaluate(&f).unwrap() - e).abs() < 1e-12);
    }

    #[test]
    fn independent_expectation_matches_enumeration(p in multilinear_poly(), ps in prop::collection::vec(0i64..=4, 5)) {
        let ps: Vec<Q> = ps.into_iter().map(|a| q(a, 4)).collect();
        let dist = ExactDistribution::product_bernoulli(&ps).unwrap();
        let a = p.expect_independent(&MarginalProfile::Bernoulli(ps)).unwrap();
        prop_assert_eq!(a, poly_mean_exact(&p, &dist).unwrap());
    }

    #[test]
    fn mu_star_is_max_over_sets(p in multilinear_poly(), i in 0usize..3) {
        let marg = MarginalProfile::iid_bernoulli(5, &q(1, 3));
        let (best, arg) = mu_star(&p, &marg, i).unwrap();
        if i > 0 && !arg.is_empty() {
            prop_assert_eq!(p.delta_k(&arg).expect_independent(&marg).unwrap(), best.clone());
        }
        for j in 0..5usize {
            if i == 1 {
                prop_assert!(p.delta_k(&[j]).expect_independent(&marg).unwrap() <= best);
            }
        }
    }

    #[test]
    fn kv_simple_relaxes_kv(mu0 in 1u32..50, mus in prop::collection::vec(0u32..20, 3), m in 1u64..6, e in 1u32..30) {
        let stats = PolyStats {
            mu0_star: qu(mu0 as u64),
            mu_star: mus.iter().map(|&x| q(x as i64, 4)).collect(),
            mu_prime: mus.iter().map(|&x| q(x as i64, 4)).max().unwrap(),
            mu: qu(mu0 as u64),
        };
        let eps = e as f64 / 4.0;
        let a = kv_bound(&stats, 0.0, eps, m, 3).unwrap();
        let b = kv_simple_bound(mu0 as f64, conc_lab_core::exact::to_f64(&stats.mu_prime), 0.0, eps, m as f64, 3).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn es_chain_identity(ell in 1u64..64, k in 1u64..5, s in 0u64..64, num in 1i64..8) {
        prop_assume!(k <= ell && s >= k && s <= ell);
        let p = q(num, 8);
        prop_assert_eq!(es_tail_exact(ell, &p, k, &binom_q(s, k)).unwrap(), binomial_tail(ell, &p, s));
    }
}

#[test]
fn mu_star_scaling_example() {
    // mu*_i for e_k under iid p is C(l-i, k-i) p^{k-i}
    for ell in 4..=7usize {
        let e = elementary_symmetric(ell, 2).unwrap();
        let s = poly_stats(&e, &MarginalProfile::iid_bernoulli(ell, &q(1, 4))).unwrap();
        assert_eq!(s.mu_star_at(1), qu(ell as u64 - 1) * q(1, 4));
        assert_eq!(s.mu_star_at(2), Q::one());
        assert_eq!(s.mu0_star, binom_q(ell as u64, 2) * pow_q(&q(1, 4), 2));
    }
}
