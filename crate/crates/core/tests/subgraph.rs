use conc_lab_core::exact::{pow_q, q, qi, qu, Q};
use conc_lab_core::polybound::check_almost_independent;
use conc_lab_core::subgraph::*;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn corpus() -> Vec<Pattern> {
    let mut v: Vec<Pattern> = ["k2", "p3", "k3", "c4", "k4"]
        .iter()
        .map(|s| Pattern::builtin(s).unwrap())
        .collect();
    v.push(Pattern::path(4).unwrap());
    v.push(Pattern::new(4, vec![(0, 1), (0, 2), (0, 3)]).unwrap());
    v.push(Pattern::new(5, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]).unwrap());
    v
}

/// Injective maps V_G -> [n] sending every edge onto a host edge.
fn embeddings(g: &Pattern, host: &EdgeAssignment) -> u64 {
    fn rec(g: &Pattern, host: &EdgeAssignment, img: &mut Vec<usize>) -> u64 {
        let i = img.len();
        if i == g.vertex_count() {
            return 1;
        }
        let mut total = 0;
        for x in 0..host.n() {
            if img.contains(&x) {
                continue;
            }
            let ok = g.edges().iter().all(|&(u, v)| {
                let (a, b) = if u == i {
                    (v, x)
                } else if v == i {
                    (u, x)
                } else {
                    return true;
                };
                a >= i || host.has(img[a], b)
            });
            if ok {
                img.push(x);
                total += rec(g, host, img);
                img.pop();
            }
        }
        total
    }
    rec(g, host, &mut Vec::new())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn copies_equal_embeddings_over_automorphisms(pi in 0usize..8, n in 5usize..8, bits in prop::collection::vec(any::<bool>(), 21)) {
        let g = &corpus()[pi];
        let host = EdgeAssignment::from_indicators(n, bits[..pair_count(n)].to_vec()).unwrap();
        let d = g.automorphism_count().unwrap();
        let c = count_copies(g, &host).unwrap();
        prop_assert_eq!(c * d, embeddings(g, &host));
        let poly = copy_polynomial(g, n).unwrap();
        let v: Vec<Q> = host.indicators().iter().map(|&b| if b { Q::one() } else { Q::zero() }).collect();
        prop_assert_eq!(poly.evaluate_q(&v).unwrap(), qu(c));
    }

    #[test]
    fn m_star_is_consistent(n in 4usize..6, num in 1i64..=20, pi in 0usize..3) {
        let g = &corpus()[pi];
        let p = q(num, 20);
        let ms = m_star(n, &p, g).unwrap().value as usize;
        let subs = g.subpatterns().unwrap();
        let holds = |m: usize| subs.iter().all(|h| qu(packing_number(n, m, h).unwrap()) <= packing_cap(h, n, &p));
        for m in 1..=ms {
            prop_assert!(holds(m), "m={m} <= M*={ms}");
        }
        if ms < pair_count(n) {
            prop_assert!(!holds(ms + 1));
        }
    }

    #[test]
    fn gnm_correction_within_quarter_eps(eg in 1u64..7, num in 1i64..=20, extra in 0u64..50) {
        let eps = q(num, 20);
        let need = (qu(9 * eg * eg) / &eps).ceil().to_integer();
        let m: u64 = need.try_into().unwrap();
        let c = gnm_correction(eg, m + extra);
        prop_assert!(c <= Q::one() + &eps / qi(4));
    }
}

#[test]
fn copies_in_complete_graph_formula() {
    for g in corpus() {
        for n in g.vertex_count()..=7 {
            let d = g.automorphism_count().unwrap() as u128;
            let falling: u128 = (0..g.vertex_count() as u128)
                .map(|i| n as u128 - i)
                .product();
            assert_eq!(
                count_copies(&g, &EdgeAssignment::complete(n)).unwrap() as u128,
                falling / d
            );
            assert_eq!(copies_in_complete_count(&g, n).unwrap(), falling / d);
        }
    }
}

#[test]
fn packing_is_monotone() {
    for g in corpus().into_iter().filter(|g| g.vertex_count() <= 4) {
        let mut prev: Option<Vec<u64>> = None;
        for n in g.vertex_count()..=6 {
            let prof = packing_profile(n, &g).unwrap();
            assert!(prof.windows(2).all(|w| w[0] <= w[1]), "{g:?} n={n}");
            if let Some(pp) = &prev {
                for (m, v) in pp.iter().enumerate() {
                    assert!(prof[m] >= *v, "{g:?} n={n} m={m}");
                }
            }
            prev = Some(prof);
        }
    }
}

#[test]
fn packing_constants_are_finite() {
    for g in corpus().into_iter().filter(|g| g.vertex_count() <= 4) {
        for n in g.vertex_count()..=6 {
            let (c, m1, m2) = packing_constant_witness(&g, n).unwrap();
            assert!(c >= Q::one(), "{g:?} n={n}");
            let r = check_packing_inequality(&g, n, m1, m2).unwrap();
            assert_eq!(r.ratio, Some(c));
        }
    }
}

#[test]
fn gnm_is_almost_independent() {
    for n in 2..=5usize {
        for m in 0..=pair_count(n) {
            let d = RandomGraphModel::gnm(n, m).unwrap().distribution().unwrap();
            let ai = check_almost_independent(&d, &Q::zero(), pair_count(n)).unwrap();
            assert!(ai.holds, "n={n} m={m}");
        }
    }
}

#[test]
fn gnm_mean_ratio_below_correction() {
    let k3 = Pattern::builtin("k3").unwrap();
    for n in 14..=20usize {
        for m in 81..=pair_count(n) as u64 {
            let r = gnm_mean_ratio(n, m, 3).unwrap();
            assert!(r >= Q::one() && r <= gnm_correction(3, m));
        }
    }
    let b = gnm_tail_bound(&k3, 14, 81, &qi(1), 0.01).unwrap();
    assert!(b.correction <= b.correction_limit);
    assert_eq!(b.m_star, 91);
}

#[test]
fn graph_jor_mechanism_dominates_exact_tail() {
    let k3 = Pattern::builtin("k3").unwrap();
    let half = q(1, 2);
    let mut certified = 0;
    for n in [4usize, 5] {
        let model = RandomGraphModel::gnp(n, half.clone()).unwrap();
        for m in 1..=3u32 {
            let delta = minimal_premise_delta(&k3, n, &half, m as usize).unwrap();
            for scale in [qi(1), qi(2)] {
                let c =
                    graph_gb_check(&k3, &model, &half, &(&delta * &scale), &Q::zero(), m).unwrap();
                assert!(c.premise && c.almost_independent.holds);
                assert_eq!(c.mu, c.mu_star);
                if !c.certified() {
                    continue;
                }
                certified += 1;
                for eps in [q(1, 2), qi(1), qi(2), qi(4)] {
                    let t = &c.mu * (Q::one() + &eps);
                    let TailValue::Exact(tail) =
                        subgraph_tail(&model, &k3, &t, TailMode::Exact).unwrap()
                    else {
                        unreachable!()
                    };
                    let bound = graph_markov_bound(&c, &eps, m).unwrap();
                    assert!(tail <= bound, "n={n} m={m} eps={eps}");
                }
            }
        }
    }
    assert!(certified >= 4, "{certified}");
}

#[test]
fn triangle_packing_values() {
    let k3 = Pattern::builtin("k3").unwrap();
    let prof = packing_profile(5, &k3).unwrap();
    assert_eq!(&prof[..], &[0, 0, 0, 1, 1, 2, 4, 4, 5, 7, 10]);
    assert_eq!(pow_q(&qi(5), 3) * pow_q(&q(3, 10), 3), q(27, 8));
}
