//! The gap law `D_{m,l}` and its monotone coupling with i.i.d. variables.
//!
//! `D_{m,l}`: pick a uniform `m`-subset `x_1 < ... < x_m` of `[l]`, output
//! `d_1 = x_1, d_i = x_i - x_{i-1}`. The coupling builds `(d, e)` with
//! `d ~ D_{m,l}`, `e_1..e_{m*}` i.i.d. with `Pr[e = k] = beta` for `k <= alpha`
//! (remaining mass on `floor(alpha) + 1`) and `e_i <= d_i` surely.
//!
//! Each inductive step draws `d_1` and `e_1` from one shared uniform through
//! their inverse CDFs. The step is a finite list of cells `(prob, d_1, e_1)`,
//! so the same code drives both the sampler and the exhaustive joint law.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::error::{precondition, Error, Result};
use crate::exact::{binom, binom_q, floor_nonneg_u64, format_q, qu, to_f64, Q};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GapTuple {
    pub gaps: Vec<u64>,
    pub horizon: u64,
}

impl GapTuple {
    /// The subset `{x_1 < ... < x_m}` these gaps encode.
    pub fn positions(&self) -> Vec<u64> {
        self.gaps
            .iter()
            .scan(0u64, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }

    pub fn from_positions(positions: &[u64], horizon: u64) -> Self {
        let mut prev = 0;
        let gaps = positions
            .iter()
            .map(|&x| {
                let d = x - prev;
                prev = x;
                d
            })
            .collect();
        GapTuple { gaps, horizon }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledGaps {
    pub d: GapTuple,
    pub e: Vec<u64>,
    pub alpha: Q,
    pub beta: Q,
}

/// Gap tuples and their exact probabilities.
pub type GapLaw = BTreeMap<Vec<u64>, Q>;

/// Joint law of `(d, e)`.
pub type JointLaw = BTreeMap<(Vec<u64>, Vec<u64>), Q>;

pub fn sample_subset_gaps(m: u64, ell: u64, seed: u64) -> Result<GapTuple> {
    precondition(m >= 1 && m <= ell, || {
        format!("need 1 <= m <= l, got m={m}, l={ell}")
    })?;
    let mut rng = seed::rng(seed);
    Ok(sample_gaps_with(&mut rng, m, ell))
}

fn sample_gaps_with<R: Rng>(rng: &mut R, m: u64, ell: u64) -> GapTuple {
    let mut xs: Vec<u64> = rand::seq::index::sample(rng, ell as usize, m as usize)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    xs.sort_unstable();
    GapTuple::from_positions(&xs, ell)
}

fn check_enumerable(what: &str, m: u64, ell: u64) -> Result<()> {
    let count = binom(ell, m).to_u128().unwrap_or(u128::MAX);
    Budget::current().check_enumeration(what, count)
}

/// Exact `D_{m,l}`; `m = 0` gives the point mass on the empty tuple.
pub fn gap_distribution_exact(m: u64, ell: u64) -> Result<GapLaw> {
    precondition(m <= ell, || format!("need m <= l, got m={m}, l={ell}"))?;
    check_enumerable("gap tuples C(l, m)", m, ell)?;
    let p = binom_q(ell, m).recip();
    let mut law = GapLaw::new();
    for_each_subset(ell, m, |xs| {
        law.insert(GapTuple::from_positions(xs, ell).gaps, p.clone());
    });
    Ok(law)
}

fn for_each_subset(ell: u64, m: u64, mut f: impl FnMut(&[u64])) {
    let m = m as usize;
    let mut xs: Vec<u64> = (1..=m as u64).collect();
    loop {
        f(&xs);
        let mut i = m;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if xs[i] < ell - (m - 1 - i) as u64 {
                break;
            }
            if i == 0 {
                return;
            }
        }
        xs[i] += 1;
        for j in i + 1..m {
            xs[j] = xs[j - 1] + 1;
        }
    }
}

/// `Pr[d_1 = k] = C(l-k, m-1)/C(l, m)` for `k = 1..=l-m+1`.
pub fn first_gap_pmf(m: u64, ell: u64) -> Vec<Q> {
    let total = binom_q(ell, m);
    (1..=ell + 1 - m)
        .map(|k| binom_q(ell - k, m - 1) / &total)
        .collect()
}

/// The common law of the `e_i`: `beta` on `1..=floor(alpha)`, the rest on `floor(alpha)+1`.
pub fn e_pmf(alpha: &Q, beta: &Q) -> Vec<Q> {
    let fa = floor_nonneg_u64(alpha);
    let mut v = vec![beta.clone(); fa as usize];
    v.push(Q::one() - qu(fa) * beta);
    v
}

/// Parameters of the coupling at the top level.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingParams {
    pub m: u64,
    pub m_star: u64,
    pub ell: u64,
    pub alpha: Q,
    pub beta: Q,
}

impl CouplingParams {
    /// Validates `1 <= m* <= m <= l`, `1 <= alpha <= l/(m+m*)` and sets
    /// `beta := m/(l - alpha m*)`, which must be `<= 1/alpha`.
    pub fn new(m: u64, m_star: u64, ell: u64, alpha: &Q) -> Result<Self> {
        precondition(m_star >= 1, || "m* must be >= 1".into())?;
        precondition(m_star <= m, || format!("m* <= m fails: m*={m_star}, m={m}"))?;
        precondition(m <= ell, || format!("m <= l fails: m={m}, l={ell}"))?;
        precondition(alpha >= &Q::one(), || {
            format!("alpha >= 1 fails: alpha={}", format_q(alpha))
        })?;
        precondition(alpha * qu(m + m_star) <= qu(ell), || {
            format!(
                "alpha <= l/(m+m*) fails: alpha={}, l/(m+m*)={}",
                format_q(alpha),
                format_q(&(qu(ell) / qu(m + m_star)))
            )
        })?;
        let beta = qu(m) / (qu(ell) - alpha * qu(m_star));
        precondition(&beta * alpha <= Q::one(), || {
            format!("beta <= 1/alpha fails: beta={}", format_q(&beta))
        })?;
        Ok(CouplingParams {
            m,
            m_star,
            ell,
            alpha: alpha.clone(),
            beta,
        })
    }

    fn floor_alpha(&self) -> u64 {
        floor_nonneg_u64(&self.alpha)
    }
}

/// One inductive step at level `(m, l)`: cells of the shared uniform.
fn step_cells(m: u64, ell: u64, e_law: &[Q]) -> Result<Vec<(Q, u64, u64)>> {
    let d_law = first_gap_pmf(m, ell);
    let mut cells = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut rd = d_law[0].clone();
    let mut re = e_law[0].clone();
    while i < d_law.len() && j < e_law.len() {
        if rd.is_zero() {
            i += 1;
            if i < d_law.len() {
                rd = d_law[i].clone();
            }
            continue;
        }
        if re.is_zero() {
            j += 1;
            if j < e_law.len() {
                re = e_law[j].clone();
            }
            continue;
        }
        let t = if rd < re { rd.clone() } else { re.clone() };
        let (d1, e1) = (i as u64 + 1, j as u64 + 1);
        if e1 > d1 {
            return Err(Error::Validation(format!(
                "comonotone step would give e_1={e1} > d_1={d1} at (m={m}, l={ell})"
            )));
        }
        cells.push((t.clone(), d1, e1));
        rd -= &t;
        re -= &t;
    }
    Ok(cells)
}

/// Exact joint law of the coupling, exhausting its internal randomness.
pub fn coupled_joint_law(m: u64, m_star: u64, ell: u64, alpha: &Q) -> Result<JointLaw> {
    let params = CouplingParams::new(m, m_star, ell, alpha)?;
    let fa = params.floor_alpha();
    let atoms = binom(ell, m)
        .to_u128()
        .unwrap_or(u128::MAX)
        .saturating_mul(((fa + 2) as u128).saturating_pow(m_star as u32));
    Budget::current().check_enumeration("coupled joint support", atoms)?;
    let e_law = e_pmf(&params.alpha, &params.beta);
    let mut memo = HashMap::new();
    joint_rec(m, m_star, ell, fa, &e_law, &mut memo)
}

fn joint_rec(
    m: u64,
    m_star: u64,
    ell: u64,
    fa: u64,
    e_law: &[Q],
    memo: &mut HashMap<(u64, u64, u64), JointLaw>,
) -> Result<JointLaw> {
    if let Some(v) = memo.get(&(m, m_star, ell)) {
        return Ok(v.clone());
    }
    let mut out = JointLaw::new();
    if m_star == 0 {
        for (d, p) in gap_distribution_exact(m, ell)? {
            out.insert((d, Vec::new()), p);
        }
    } else {
        for (p, d1, e1) in step_cells(m, ell, e_law)? {
            if d1 <= fa {
                let sub = joint_rec(m - 1, m_star - 1, ell - d1, fa, e_law, memo)?;
                for ((d, e), q) in sub {
                    let mut dd = Vec::with_capacity(d.len() + 1);
                    dd.push(d1);
                    dd.extend(d);
                    let mut ee = Vec::with_capacity(e.len() + 1);
                    ee.push(e1);
                    ee.extend(e);
                    *out.entry((dd, ee)).or_insert_with(Q::zero) += &p * q;
                }
            } else {
                let sub = joint_rec(m, m_star - 1, ell - fa, fa, e_law, memo)?;
                for ((d, e), q) in sub {
                    let mut dd = Vec::with_capacity(d.len());
                    dd.push(d[d.len() - 1] + fa);
                    dd.extend_from_slice(&d[..d.len() - 1]);
                    let mut ee = Vec::with_capacity(e.len() + 1);
                    ee.push(e1);
                    ee.extend(e);
                    *out.entry((dd, ee)).or_insert_with(Q::zero) += &p * q;
                }
            }
        }
    }
    memo.insert((m, m_star, ell), out.clone());
    Ok(out)
}

pub fn sample_coupled_gaps(
    m: u64,
    m_star: u64,
    ell: u64,
    alpha: &Q,
    seed: u64,
) -> Result<CoupledGaps> {
    let params = CouplingParams::new(m, m_star, ell, alpha)?;
    let fa = params.floor_alpha();
    let e_law = e_pmf(&params.alpha, &params.beta);
    let mut rng = seed::rng(seed);
    let (d, e) = sample_rec(&mut rng, m, m_star, ell, fa, &e_law)?;
    Ok(CoupledGaps {
        d: GapTuple {
            gaps: d,
            horizon: ell,
        },
        e,
        alpha: params.alpha,
        beta: params.beta,
    })
}

fn sample_rec<R: Rng>(
    rng: &mut R,
    m: u64,
    m_star: u64,
    ell: u64,
    fa: u64,
    e_law: &[Q],
) -> Result<(Vec<u64>, Vec<u64>)> {
    if m_star == 0 {
        if m == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        return Ok((sample_gaps_with(rng, m, ell).gaps, Vec::new()));
    }
    let cells = step_cells(m, ell, e_law)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = cells[cells.len() - 1].clone();
    for c in &cells {
        acc += to_f64(&c.0);
        if u < acc {
            pick = c.clone();
            break;
        }
    }
    let (_, d1, e1) = pick;
    if d1 <= fa {
        let (d, e) = sample_rec(rng, m - 1, m_star - 1, ell - d1, fa, e_law)?;
        Ok(([vec![d1], d].concat(), [vec![e1], e].concat()))
    } else {
        let (d, e) = sample_rec(rng, m, m_star - 1, ell - fa, fa, e_law)?;
        let mut dd = vec![d[d.len() - 1] + fa];
        dd.extend_from_slice(&d[..d.len() - 1]);
        Ok((dd, [vec![e1], e].concat()))
    }
}

/// Exhaustive verification of one coupling instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCheck {
    pub params: CouplingParams,
    /// Max |Pr_joint[d] - Pr_{D_{m,l}}[d]|.
    pub d_marginal_discrepancy: Q,
    /// `e_i <= d_i` on every atom of positive mass.
    pub dominated: bool,
    /// Max |Pr_joint[e] - prod_i pmf(e_i)|.
    pub e_product_discrepancy: Q,
    /// Max over coordinates and `k` of the per-coordinate e-marginal mass.
    pub max_e_mass: Q,
}

impl CouplingCheck {
    pub fn exact(&self) -> bool {
        self.d_marginal_discrepancy.is_zero()
            && self.dominated
            && self.e_product_discrepancy.is_zero()
    }
}

fn max_abs_diff<K: Ord + Clone>(a: &BTreeMap<K, Q>, b: &BTreeMap<K, Q>) -> Q {
    let zero = Q::zero();
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).unwrap_or(&zero) - b.get(k).unwrap_or(&zero)).abs())
        .max()
        .unwrap_or_else(Q::zero)
}

pub fn verify_coupling(m: u64, m_star: u64, ell: u64, alpha: &Q) -> Result<CouplingCheck> {
    let params = CouplingParams::new(m, m_star, ell, alpha)?;
    let joint = coupled_joint_law(m, m_star, ell, alpha)?;
    let mut d_marg = GapLaw::new();
    let mut e_marg: BTreeMap<Vec<u64>, Q> = BTreeMap::new();
    let mut dominated = true;
    for ((d, e), p) in &joint {
        if p.is_zero() {
            continue;
        }
        dominated &= e.iter().zip(d).all(|(ei, di)| ei <= di);
        *d_marg.entry(d.clone()).or_insert_with(Q::zero) += p;
        *e_marg.entry(e.clone()).or_insert_with(Q::zero) += p;
    }
    let target = gap_distribution_exact(m, ell)?;

    let pmf = e_pmf(&params.alpha, &params.beta);
    let mut product: BTreeMap<Vec<u64>, Q> = BTreeMap::new();
    product.insert(Vec::new(), Q::one());
    for _ in 0..m_star {
        let mut next = BTreeMap::new();
        for (t, p) in &product {
            for (k, pk) in pmf.iter().enumerate() {
                if pk.is_zero() {
                    continue;
                }
                let mut tt = t.clone();
                tt.push(k as u64 + 1);
                next.insert(tt, p * pk);
            }
        }
        product = next;
    }
    let mut max_e_mass = Q::zero();
    for i in 0..m_star as usize {
        let mut coord: BTreeMap<u64, Q> = BTreeMap::new();
        for (e, p) in &e_marg {
            *coord.entry(e[i]).or_insert_with(Q::zero) += p;
        }
        for v in coord.into_values() {
            if v > max_e_mass {
                max_e_mass = v;
            }
        }
    }
    Ok(CouplingCheck {
        params,
        d_marginal_discrepancy: max_abs_diff(&d_marg, &target),
        dominated,
        e_product_discrepancy: max_abs_diff(&e_marg, &product),
        max_e_mass,
    })
}

/// Admissible `alpha` values for `m* = m`: integers and half-integers in
/// `[1, l/2m]` together with `l/2m` itself.
pub fn alpha_grid(m: u64, ell: u64) -> Vec<Q> {
    let top = qu(ell) / qu(2 * m);
    if top < Q::one() {
        return Vec::new();
    }
    let mut v = Vec::new();
    let mut a = Q::one();
    let half = Q::new(1.into(), 2.into());
    while a <= top {
        v.push(a.clone());
        a += &half;
    }
    if !v.contains(&top) {
        v.push(top);
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimReport {
    pub claim: &'static str,
    pub m: u64,
    pub ell: u64,
    pub k: u64,
    pub max_discrepancy: Q,
}

impl ClaimReport {
    pub fn to_json(&self) -> Value {
        json!({
            "claim": self.claim,
            "params": {"m": self.m, "l": self.ell, "k": self.k},
            "max_discrepancy": format_q(&self.max_discrepancy),
        })
    }
}

fn normalize(law: GapLaw) -> GapLaw {
    let total: Q = law.values().sum();
    law.into_iter().map(|(k, v)| (k, v / &total)).collect()
}

/// Checks both conditioning claims for `D_{m,l}` at `k`, each where its
/// precondition holds (`k+m-1 <= l` for `d_1 = k`, `k+m <= l` for `d_1 > k`).
pub fn verify_conditional_claims(m: u64, ell: u64, k: u64) -> Result<Vec<ClaimReport>> {
    precondition(m >= 1 && k >= 1, || "need m >= 1 and k >= 1".into())?;
    precondition(k + m - 1 <= ell, || {
        format!("k+m-1 <= l fails: k={k}, m={m}, l={ell}")
    })?;
    let law = gap_distribution_exact(m, ell)?;
    let mut out = Vec::new();

    let eq: GapLaw = law
        .iter()
        .filter(|(d, _)| d[0] == k)
        .map(|(d, p)| (d[1..].to_vec(), p.clone()))
        .collect();
    let target = gap_distribution_exact(m - 1, ell - k)?;
    out.push(ClaimReport {
        claim: "d1-eq-k",
        m,
        ell,
        k,
        max_discrepancy: max_abs_diff(&normalize(eq), &target),
    });

    if k + m <= ell {
        let mut gt = GapLaw::new();
        for (d, p) in law.iter().filter(|(d, _)| d[0] > k) {
            let mut t = d[1..].to_vec();
            t.push(d[0] - k);
            *gt.entry(t).or_insert_with(Q::zero) += p;
        }
        let target = gap_distribution_exact(m, ell - k)?;
        out.push(ClaimReport {
            claim: "d1-gt-k",
            m,
            ell,
            k,
            max_discrepancy: max_abs_diff(&normalize(gt), &target),
        });
    }
    Ok(out)
}

/// `E[prod_i f(d_i)]` under `D_{m,l}`, exact.
pub fn expect_over_gaps(m: u64, ell: u64, f: impl Fn(u64) -> Q) -> Result<Q> {
    Ok(gap_distribution_exact(m, ell)?
        .into_iter()
        .map(|(d, p)| p * d.iter().map(|&x| f(x)).product::<Q>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{q, qi};

    #[test]
    fn gap_law_examples() {
        let one = gap_distribution_exact(1, 5).unwrap();
        assert_eq!(one.len(), 5);
        assert!(one.values().all(|p| *p == q(1, 5)));
        let full = gap_distribution_exact(4, 4).unwrap();
        assert_eq!(
            full.into_iter().collect::<Vec<_>>(),
            vec![(vec![1, 1, 1, 1], Q::one())]
        );
        let two = gap_distribution_exact(2, 3).unwrap();
        let keys: Vec<_> = two.keys().cloned().collect();
        assert_eq!(keys, vec![vec![1, 1], vec![1, 2], vec![2, 1]]);
        assert!(two.values().all(|p| *p == q(1, 3)));
        assert_eq!(gap_distribution_exact(3, 8).unwrap().len(), 56);
    }

    #[test]
    fn subset_sampler() {
        assert_eq!(sample_subset_gaps(4, 4, 9).unwrap().gaps, vec![1, 1, 1, 1]);
        for s in 0..200 {
            let g = sample_subset_gaps(3, 10, s).unwrap();
            assert!(g.gaps.iter().all(|&d| d >= 1));
            assert!(g.gaps.iter().sum::<u64>() <= 10);
            assert_eq!(GapTuple::from_positions(&g.positions(), 10), g);
        }
        assert!(sample_subset_gaps(5, 4, 0).is_err());
    }

    #[test]
    fn coupling_single_step() {
        let law = coupled_joint_law(1, 1, 4, &qi(2)).unwrap();
        let mut e1: BTreeMap<u64, Q> = BTreeMap::new();
        for ((_, e), p) in &law {
            *e1.entry(e[0]).or_insert_with(Q::zero) += p;
        }
        assert_eq!(
            e1.into_iter().collect::<Vec<_>>(),
            vec![(1, q(1, 2)), (2, q(1, 2))]
        );
    }

    #[test]
    fn coupling_marginal_example() {
        let c = verify_coupling(2, 2, 8, &qi(1)).unwrap();
        assert!(c.exact(), "{c:?}");
        assert_eq!(c.params.beta, q(1, 3));
    }

    #[test]
    fn coupling_preconditions_name_inequality() {
        let err = CouplingParams::new(2, 2, 8, &qi(3)).unwrap_err();
        assert!(err.to_string().contains("alpha <= l/(m+m*)"));
        assert!(CouplingParams::new(2, 3, 8, &qi(1)).is_err());
    }

    #[test]
    fn sampler_respects_domination() {
        for s in 0..300 {
            let c = sample_coupled_gaps(3, 3, 12, &q(3, 2), s).unwrap();
            assert!(c.e.iter().zip(&c.d.gaps).all(|(e, d)| e <= d));
            assert!(c.e.iter().all(|&e| e <= 2));
            assert!(c.d.gaps.iter().sum::<u64>() <= 12);
        }
    }

    #[test]
    fn conditional_claims() {
        let r = verify_conditional_claims(3, 8, 2).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|c| c.max_discrepancy.is_zero()));
        let r = verify_conditional_claims(2, 3, 1).unwrap();
        assert!(r[0].max_discrepancy.is_zero());
        // k + m - 1 = l: only the equality claim applies
        let r = verify_conditional_claims(3, 6, 4).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].max_discrepancy.is_zero());
        assert!(verify_conditional_claims(3, 6, 5).is_err());
    }

    #[test]
    fn alpha_grid_bounds() {
        assert_eq!(alpha_grid(2, 8), vec![qi(1), q(3, 2), qi(2)]);
        assert_eq!(alpha_grid(2, 5), vec![qi(1), q(5, 4)]);
        assert!(alpha_grid(4, 6).is_empty());
    }
}
