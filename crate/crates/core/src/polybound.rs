//! Upper tails of positive polynomials over `[0,1]`-valued variables.
//!
//! `p(v) = sum_i w_i prod_{j in e_i} v_j` with `w_i >= 0` and multiset supports
//! `e_i`. The bounds are stated through
//! `mu*_i = max_{|K| = i} E_{P*}[Delta_K p]`, where `P*` has the marginals of
//! `P` but independent coordinates.

use std::collections::BTreeMap;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::core_bounds::{check_growth_bounded, GrowthCheck};
use crate::dist::{json_to_q, ExactDistribution};
use crate::error::{precondition, Error, Result};
use crate::exact::{
    binom, binom_f64, binom_q, binomial_tail, ceil_nonneg_u64, exp_neg_bounds, format_q, pow_q, qu,
    to_f64, Q,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Monomial {
    pub weight: Q,
    /// Sorted multiset of variable indices.
    pub vars: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivePolynomial {
    ell: usize,
    monomials: Vec<Monomial>,
}

impl PositivePolynomial {
    pub fn new(ell: usize, monomials: Vec<(Q, Vec<usize>)>) -> Result<Self> {
        if monomials.is_empty() {
            return Err(Error::Malformed(
                "polynomial needs at least one monomial".into(),
            ));
        }
        for (w, vars) in &monomials {
            if w.is_negative() {
                return Err(Error::Malformed(format!("negative weight {}", format_q(w))));
            }
            if vars.is_empty() {
                return Err(Error::Malformed("monomial support must be nonempty".into()));
            }
            if let Some(j) = vars.iter().find(|&&j| j >= ell) {
                return Err(Error::Malformed(format!(
                    "variable {j} out of range 0..{ell}"
                )));
            }
        }
        Ok(Self::raw(ell, monomials))
    }

    fn raw(ell: usize, monomials: Vec<(Q, Vec<usize>)>) -> Self {
        PositivePolynomial {
            ell,
            monomials: monomials
                .into_iter()
                .map(|(weight, mut vars)| {
                    vars.sort_unstable();
                    Monomial { weight, vars }
                })
                .collect(),
        }
    }

    pub fn zero(ell: usize) -> Self {
        PositivePolynomial {
            ell,
            monomials: Vec::new(),
        }
    }

    pub fn variable_count(&self) -> usize {
        self.ell
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// Maximum total multiset cardinality.
    pub fn degree(&self) -> usize {
        self.monomials
            .iter()
            .map(|m| m.vars.len())
            .max()
            .unwrap_or(0)
    }

    pub fn is_multilinear(&self) -> bool {
        self.monomials
            .iter()
            .all(|m| m.vars.windows(2).all(|w| w[0] != w[1]))
    }

    /// Variables occurring in some monomial, ascending.
    pub fn occurring_variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .monomials
            .iter()
            .flat_map(|m| m.vars.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Like terms merged, zero terms dropped, monomials sorted.
    pub fn canonical(&self) -> Self {
        let mut acc: BTreeMap<Vec<usize>, Q> = BTreeMap::new();
        for m in &self.monomials {
            *acc.entry(m.vars.clone()).or_insert_with(Q::zero) += &m.weight;
        }
        PositivePolynomial {
            ell: self.ell,
            monomials: acc
                .into_iter()
                .filter(|(_, w)| !w.is_zero())
                .map(|(vars, weight)| Monomial { weight, vars })
                .collect(),
        }
    }

    fn check_point_len(&self, len: usize) -> Result<()> {
        precondition(len == self.ell, || {
            format!("point has {len} coordinates, expected {}", self.ell)
        })
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<f64> {
        self.check_point_len(v.len())?;
        precondition(v.iter().all(|x| (0.0..=1.0).contains(x)), || {
            "point must lie in [0,1]^l".into()
        })?;
        Ok(self
            .monomials
            .iter()
            .map(|m| to_f64(&m.weight) * m.vars.iter().map(|&j| v[j]).product::<f64>())
            .sum())
    }

    pub fn evaluate_q(&self, v: &[Q]) -> Result<Q> {
        self.check_point_len(v.len())?;
        precondition(v.iter().all(|x| !x.is_negative() && x <= &Q::one()), || {
            "point must lie in [0,1]^l".into()
        })?;
        Ok(self.eval_unchecked(v))
    }

    fn eval_unchecked(&self, v: &[Q]) -> Q {
        self.monomials
            .iter()
            .map(|m| m.vars.iter().fold(m.weight.clone(), |acc, &j| acc * &v[j]))
            .sum()
    }

    /// Monomials containing every variable of `K`, with `K`'s variables set to 1.
    pub fn delta_k(&self, k: &[usize]) -> Self {
        let monomials = self
            .monomials
            .iter()
            .filter(|m| k.iter().all(|j| m.vars.binary_search(j).is_ok()))
            .map(|m| Monomial {
                weight: m.weight.clone(),
                vars: m.vars.iter().copied().filter(|j| !k.contains(j)).collect(),
            })
            .collect();
        PositivePolynomial {
            ell: self.ell,
            monomials,
        }
    }

    /// Formal partial derivative in variable `j`.
    pub fn formal_partial(&self, j: usize) -> Self {
        let monomials = self
            .monomials
            .iter()
            .filter_map(|m| {
                let c = m.vars.iter().filter(|&&x| x == j).count();
                if c == 0 {
                    return None;
                }
                let mut vars = m.vars.clone();
                let pos = vars.iter().position(|&x| x == j).expect("present");
                vars.remove(pos);
                Some(Monomial {
                    weight: &m.weight * qu(c as u64),
                    vars,
                })
            })
            .collect();
        PositivePolynomial {
            ell: self.ell,
            monomials,
        }
    }

    /// `E_{P*}[p]` for independent coordinates with the given marginals.
    pub fn expect_independent(&self, marginals: &MarginalProfile) -> Result<Q> {
        let mut total = Q::zero();
        for m in &self.monomials {
            let mut term = m.weight.clone();
            let mut i = 0;
            while i < m.vars.len() {
                let j = m.vars[i];
                let c = m.vars[i..].iter().take_while(|&&x| x == j).count();
                term *= marginals.moment(j, c as u32)?;
                i += c;
            }
            total += term;
        }
        Ok(total)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "l": self.ell,
            "monomials": self.monomials.iter().map(|m| json!({
                "w": format_q(&m.weight),
                "vars": m.vars,
            })).collect::<Vec<_>>(),
        })
    }

    /// `{l, monomials: [{w, vars}]}`; `w` as a number or `"num/den"` string.
    pub fn from_json(v: &Value) -> Result<Self> {
        let ell = v
            .get("l")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Malformed("polynomial JSON needs integer field l".into()))?
            as usize;
        let monos = v
            .get("monomials")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Malformed("polynomial JSON needs a monomials array".into()))?;
        let mut out = Vec::with_capacity(monos.len());
        for m in monos {
            let w = json_to_q(
                m.get("w")
                    .ok_or_else(|| Error::Malformed("monomial without w".into()))?,
            )?;
            let vars = m
                .get("vars")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Malformed("monomial without vars".into()))?
                .iter()
                .map(|x| {
                    x.as_u64()
                        .map(|u| u as usize)
                        .ok_or_else(|| Error::Malformed(format!("bad variable index {x}")))
                })
                .collect::<Result<Vec<_>>>()?;
            out.push((w, vars));
        }
        Self::new(ell, out)
    }
}

/// Per-variable moments `E[v_j^c]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalProfile {
    /// `{0,1}`-valued variables with the given means.
    Bernoulli(Vec<Q>),
    /// `table[j][c]` for `c = 0..=c_max`.
    Table(Vec<Vec<Q>>),
}

impl MarginalProfile {
    pub fn iid_bernoulli(ell: usize, p: &Q) -> Self {
        MarginalProfile::Bernoulli(vec![p.clone(); ell])
    }

    /// Moments of `dist` up to order `c_max`.
    pub fn from_distribution(dist: &ExactDistribution, c_max: u32) -> Self {
        if dist.is_binary() {
            return MarginalProfile::Bernoulli(
                (0..dist.n()).map(|j| dist.marginal_moment(j, 1)).collect(),
            );
        }
        MarginalProfile::Table(
            (0..dist.n())
                .map(|j| (0..=c_max).map(|c| dist.marginal_moment(j, c)).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        match self {
            MarginalProfile::Bernoulli(p) => p.len(),
            MarginalProfile::Table(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn moment(&self, j: usize, c: u32) -> Result<Q> {
        if c == 0 {
            return Ok(Q::one());
        }
        match self {
            MarginalProfile::Bernoulli(p) => p
                .get(j)
                .cloned()
                .ok_or_else(|| Error::Malformed(format!("no marginal for variable {j}"))),
            MarginalProfile::Table(t) => t
                .get(j)
                .and_then(|row| row.get(c as usize))
                .cloned()
                .ok_or_else(|| {
                    Error::Malformed(format!("no moment of order {c} for variable {j}"))
                }),
        }
    }
}

fn for_each_k_subset(items: &[usize], k: usize, mut f: impl FnMut(&[usize])) {
    fn rec(
        items: &[usize],
        start: usize,
        k: usize,
        cur: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if cur.len() == k {
            f(cur);
            return;
        }
        let need = k - cur.len();
        for i in start..=items.len() - need {
            cur.push(items[i]);
            rec(items, i + 1, k, cur, f);
            cur.pop();
        }
    }
    if k > items.len() {
        return;
    }
    let mut cur = Vec::with_capacity(k);
    rec(items, 0, k, &mut cur, &mut f);
}

/// `mu*_i` and a maximising `K` (first found in lexicographic order).
///
/// Only sets `K` inside some monomial's support contribute, so the sum is
/// accumulated monomial by monomial.
pub fn mu_star(
    p: &PositivePolynomial,
    marginals: &MarginalProfile,
    i: usize,
) -> Result<(Q, Vec<usize>)> {
    let vars = p.occurring_variables();
    if i > vars.len() {
        return Ok((Q::zero(), Vec::new()));
    }
    let supports: Vec<Vec<(usize, u32)>> = p
        .monomials
        .iter()
        .map(|m| {
            let mut d: Vec<(usize, u32)> = Vec::new();
            for &j in &m.vars {
                match d.last_mut() {
                    Some((x, c)) if *x == j => *c += 1,
                    _ => d.push((j, 1)),
                }
            }
            d
        })
        .collect();
    let count: u128 = supports
        .iter()
        .map(|d| {
            binom(d.len() as u64, i as u64)
                .to_u128()
                .unwrap_or(u128::MAX)
        })
        .fold(0u128, |a, b| a.saturating_add(b));
    Budget::current().check_enumeration("variable subsets for mu*", count)?;
    let mut acc: BTreeMap<Vec<usize>, Q> = BTreeMap::new();
    for (m, d) in p.monomials.iter().zip(&supports) {
        let moments: Vec<Q> = d
            .iter()
            .map(|&(j, c)| marginals.moment(j, c))
            .collect::<Result<_>>()?;
        let idx: Vec<usize> = (0..d.len()).collect();
        for_each_k_subset(&idx, i, |ks| {
            let mut term = m.weight.clone();
            for (t, mo) in moments.iter().enumerate() {
                if !ks.contains(&t) {
                    term *= mo;
                }
            }
            let key: Vec<usize> = ks.iter().map(|&t| d[t].0).collect();
            *acc.entry(key).or_insert_with(Q::zero) += term;
        });
    }
    let mut best: Option<(Q, Vec<usize>)> = None;
    for (k, v) in acc {
        if best.as_ref().is_none_or(|(b, _)| &v > b) {
            best = Some((v, k));
        }
    }
    Ok(match best {
        Some((v, k)) if v.is_positive() => (v, k),
        _ => (Q::zero(), vars[..i].to_vec()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyStats {
    pub mu0_star: Q,
    /// `mu*_1..mu*_k`.
    pub mu_star: Vec<Q>,
    /// `max_i mu*_i` over `i >= 1`.
    pub mu_prime: Q,
    /// `E_P[p]`; equals `mu0_star` under independence.
    pub mu: Q,
}

impl PolyStats {
    pub fn mu_star_at(&self, i: usize) -> Q {
        if i == 0 {
            return self.mu0_star.clone();
        }
        self.mu_star.get(i - 1).cloned().unwrap_or_else(Q::zero)
    }
}

/// Statistics under independent marginals; `mu` is set to `mu*_0`.
pub fn poly_stats(p: &PositivePolynomial, marginals: &MarginalProfile) -> Result<PolyStats> {
    let k = p.degree();
    let mu0_star = p.expect_independent(marginals)?;
    let mut mu_star_v = Vec::with_capacity(k);
    for i in 1..=k {
        mu_star_v.push(mu_star(p, marginals, i)?.0);
    }
    let mu_prime = mu_star_v.iter().max().cloned().unwrap_or_else(Q::zero);
    Ok(PolyStats {
        mu: mu0_star.clone(),
        mu0_star,
        mu_star: mu_star_v,
        mu_prime,
    })
}

/// Statistics for `p` under `dist`: `mu*` from the marginals of `dist`, `mu = E_dist[p]`.
pub fn poly_stats_for(p: &PositivePolynomial, dist: &ExactDistribution) -> Result<PolyStats> {
    let marginals = MarginalProfile::from_distribution(dist, p.degree() as u32);
    let mut s = poly_stats(p, &marginals)?;
    s.mu = poly_mean_exact(p, dist)?;
    Ok(s)
}

pub fn poly_mean_exact(p: &PositivePolynomial, dist: &ExactDistribution) -> Result<Q> {
    precondition(dist.n() == p.variable_count(), || {
        "distribution and polynomial dimensions differ".into()
    })?;
    Ok(dist
        .support()
        .iter()
        .map(|a| &a.prob * p.eval_unchecked(&a.x))
        .sum())
}

/// `Pr_dist[p(v) >= t]`.
pub fn poly_tail_exact(p: &PositivePolynomial, dist: &ExactDistribution, t: &Q) -> Result<Q> {
    precondition(dist.n() == p.variable_count(), || {
        "distribution and polynomial dimensions differ".into()
    })?;
    Ok(dist
        .support()
        .iter()
        .filter(|a| &p.eval_unchecked(&a.x) >= t)
        .map(|a| a.prob.clone())
        .sum())
}

/// Result of an almost-independence check.
#[derive(Debug, Clone, PartialEq)]
pub struct AiCheck {
    pub holds: bool,
    /// The index multiset with the largest `E[prod v] / prod E[v^c]`.
    pub worst: Vec<usize>,
    /// That ratio; `None` when the product side is 0 but the moment is not.
    pub worst_ratio: Option<Q>,
}

/// `E[prod_j v_{i_j}] <= (1+delta)^m prod_j E[v_j^{c_j}]` for all index tuples of length `<= m`.
///
/// Only multisets are enumerated; for binary outcomes only sets.
pub fn check_almost_independent(dist: &ExactDistribution, delta: &Q, m: usize) -> Result<AiCheck> {
    precondition(!delta.is_negative(), || "delta must be >= 0".into())?;
    let ell = dist.n();
    precondition(m >= 1 && m <= ell, || {
        format!("need 1 <= m <= l, got m={m}, l={ell}")
    })?;
    let factor = pow_q(&(Q::one() + delta), m as u32);
    let mut worst: (Vec<usize>, Option<Q>) = (Vec::new(), Some(Q::zero()));
    let mut note = |idx: &[usize], lhs: Q, prod: Q| {
        let ratio = if prod.is_zero() {
            if lhs.is_zero() {
                return;
            }
            None
        } else {
            Some(lhs / prod)
        };
        let better = match (&worst.1, &ratio) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(w), Some(r)) => r > w,
        };
        if better {
            worst = (idx.to_vec(), ratio);
        }
    };

    if let Some(masks) = dist.binary_masks() {
        let count: u128 = (1..=m)
            .map(|s| binom(ell as u64, s as u64).to_u128().unwrap_or(u128::MAX))
            .sum();
        Budget::current().check_enumeration("index sets for almost independence", count)?;
        let means: Vec<Q> = (0..ell).map(|j| dist.marginal_moment(j, 1)).collect();
        let all: Vec<usize> = (0..ell).collect();
        for s in 1..=m {
            for_each_k_subset(&all, s, |set| {
                let bits = set.iter().fold(0u64, |b, &j| b | (1 << j));
                let lhs: Q = masks
                    .iter()
                    .filter(|(_, mask)| mask & bits == bits)
                    .map(|(p, _)| p.clone())
                    .sum();
                let prod: Q = set.iter().map(|&j| means[j].clone()).product();
                note(set, lhs, prod);
            });
        }
    } else {
        let count: u128 = (1..=m)
            .map(|s| {
                binom((ell + s - 1) as u64, s as u64)
                    .to_u128()
                    .unwrap_or(u128::MAX)
            })
            .sum();
        Budget::current().check_enumeration("index multisets for almost independence", count)?;
        let moments: Vec<Vec<Q>> = (0..ell)
            .map(|j| (0..=m as u32).map(|c| dist.marginal_moment(j, c)).collect())
            .collect();
        let mut cur = Vec::with_capacity(m);
        multisets(ell, m, 0, &mut cur, &mut |idx| {
            let lhs = dist.expect_product(idx);
            let mut prod = Q::one();
            let mut i = 0;
            while i < idx.len() {
                let c = idx[i..].iter().take_while(|&&x| x == idx[i]).count();
                prod *= &moments[idx[i]][c];
                i += c;
            }
            note(idx, lhs, prod);
        });
    }
    let holds = match &worst.1 {
        None => false,
        Some(r) => r <= &factor,
    };
    Ok(AiCheck {
        holds,
        worst: worst.0,
        worst_ratio: worst.1,
    })
}

fn multisets(
    ell: usize,
    m: usize,
    start: usize,
    cur: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if !cur.is_empty() {
        f(cur);
    }
    if cur.len() == m {
        return;
    }
    for j in start..ell {
        cur.push(j);
        multisets(ell, m, j, cur, f);
        cur.pop();
    }
}

/// `sum_{i=1}^k C(km, i) mu*_i / mu*_0`, so that `1 + delta'' = 1 + this`.
pub fn kv_slack(stats: &PolyStats, m: u64, k: u64) -> Result<Q> {
    precondition(stats.mu0_star.is_positive(), || "mu*_0 must be > 0".into())?;
    let km = k * m;
    let s: Q = (1..=k)
        .map(|i| binom_q(km, i) * stats.mu_star_at(i as usize))
        .sum();
    Ok(s / &stats.mu0_star)
}

/// `((1+delta)^k (1 + sum_{i=1}^k C(km,i) mu*_i/mu*_0) / (1+eps))^m`, exact.
pub fn kv_bound_exact(stats: &PolyStats, delta: &Q, eps: &Q, m: u64, k: u64) -> Result<Q> {
    precondition(eps.is_positive(), || "eps must be > 0".into())?;
    precondition(m >= 1 && k >= 1, || "m and k must be >= 1".into())?;
    precondition(!delta.is_negative(), || "delta must be >= 0".into())?;
    let slack = kv_slack(stats, m, k)?;
    let base = pow_q(&(Q::one() + delta), k as u32) * (Q::one() + slack) / (Q::one() + eps);
    Ok(pow_q(&base, m as u32))
}

pub fn kv_bound(stats: &PolyStats, delta: f64, eps: f64, m: u64, k: u64) -> Result<f64> {
    precondition(eps > 0.0, || format!("eps must be > 0, got {eps}"))?;
    precondition(m >= 1 && k >= 1, || "m and k must be >= 1".into())?;
    precondition(delta >= 0.0, || format!("delta must be >= 0, got {delta}"))?;
    let slack = to_f64(&kv_slack(stats, m, k)?);
    Ok(((1.0 + delta).powi(k as i32) * (1.0 + slack) / (1.0 + eps)).powi(m as i32))
}

/// `((1+delta)^k (1 + (km)^k mu'/mu*_0) / (1+eps))^m`.
pub fn kv_simple_bound(
    mu0_star: f64,
    mu_prime: f64,
    delta: f64,
    eps: f64,
    m: f64,
    k: u32,
) -> Result<f64> {
    precondition(mu0_star > 0.0, || "mu*_0 must be > 0".into())?;
    precondition(eps > 0.0, || format!("eps must be > 0, got {eps}"))?;
    precondition(m >= 1.0 && k >= 1, || "m and k must be >= 1".into())?;
    let km = k as f64 * m;
    Ok(
        ((1.0 + delta).powi(k as i32) * (1.0 + km.powi(k as i32) * mu_prime / mu0_star)
            / (1.0 + eps))
            .powf(m),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentPolyBound {
    /// The bound in force: `formula` when `m >= 1`, else the trivial 2.
    pub value: f64,
    /// `2 exp(-eps/(6k) (eps mu/mu')^{1/k})`.
    pub formula: f64,
    /// `floor((1/k)(eps mu/(3 mu'))^{1/k})`.
    pub m: u64,
    pub vacuous: bool,
}

/// `2 exp(-eps/(6k) (eps mu/mu')^{1/k})` for independent inputs, `eps in (0, 1/2]`.
pub fn independent_poly_bound(
    mu: f64,
    mu_prime: f64,
    eps: f64,
    k: u32,
) -> Result<IndependentPolyBound> {
    precondition(eps > 0.0 && eps <= 0.5, || {
        format!("eps must lie in (0, 1/2], got {eps}")
    })?;
    independent_poly_formula(mu, mu_prime, eps, k)
}

/// [`independent_poly_bound`] without the range check on `eps`.
pub fn independent_poly_formula(
    mu: f64,
    mu_prime: f64,
    eps: f64,
    k: u32,
) -> Result<IndependentPolyBound> {
    precondition(mu > 0.0 && mu_prime > 0.0, || {
        "mu and mu' must be > 0".into()
    })?;
    precondition(k >= 1, || "k must be >= 1".into())?;
    precondition(eps > 0.0, || format!("eps must be > 0, got {eps}"))?;
    let kf = k as f64;
    let formula = 2.0 * (-eps / (6.0 * kf) * (eps * mu / mu_prime).powf(1.0 / kf)).exp();
    let m = ((eps * mu / (3.0 * mu_prime)).powf(1.0 / kf) / kf + 1e-12)
        .floor()
        .max(0.0) as u64;
    Ok(IndependentPolyBound {
        value: if m == 0 { 2.0 } else { formula },
        formula,
        m,
        vacuous: m == 0,
    })
}

/// `e_k(v) = sum_{|S| = k} prod_{i in S} v_i`.
pub fn elementary_symmetric(ell: usize, k: usize) -> Result<PositivePolynomial> {
    precondition(k >= 1 && k <= ell, || {
        format!("need 1 <= k <= l, got k={k}, l={ell}")
    })?;
    let count = binom(ell as u64, k as u64).to_u128().unwrap_or(u128::MAX);
    Budget::current().check_enumeration("monomials of e_k", count)?;
    let all: Vec<usize> = (0..ell).collect();
    let mut monos = Vec::new();
    for_each_k_subset(&all, k, |s| monos.push((Q::one(), s.to_vec())));
    PositivePolynomial::new(ell, monos)
}

/// Least `s` with `C(s, k) >= t`, or `None` if no `s <= l` qualifies.
pub fn es_threshold_count(ell: u64, k: u64, t: &Q) -> Option<u64> {
    (0..=ell).find(|&s| &binom_q(s, k) >= t)
}

/// `Pr[e_k(v) >= t]` for i.i.d. Bernoulli(`p`) inputs, using `e_k(v) = C(sum v, k)`.
pub fn es_tail_exact(ell: u64, p: &Q, k: u64, t: &Q) -> Result<Q> {
    precondition(p.is_positive() && p < &Q::one(), || {
        "p must lie in (0,1)".into()
    })?;
    precondition(k >= 1 && k <= ell, || {
        format!("need 1 <= k <= l, got k={k}, l={ell}")
    })?;
    Ok(match es_threshold_count(ell, k, t) {
        Some(s) => binomial_tail(ell, p, s),
        None => Q::zero(),
    })
}

/// `exp(-9 eps^2 p l)`, a lower bound on `Pr[Bin(l,p) >= p l (1+eps)]`.
pub fn reverse_chernoff_floor(p: f64, ell: u64, eps: f64) -> Result<f64> {
    precondition(eps > 0.0 && eps <= 0.5, || {
        format!("eps must lie in (0, 1/2], got {eps}")
    })?;
    precondition(p > 0.0 && p <= 0.5, || {
        format!("p must lie in (0, 1/2], got {p}")
    })?;
    let x = eps * eps * p * ell as f64;
    precondition(x >= 3.0 - 1e-12, || {
        format!("eps^2 p l >= 3 fails: eps^2 p l = {x}")
    })?;
    Ok((-9.0 * x).exp())
}

/// Rational upper enclosure of `exp(-9 eps^2 p l)`, for zero-tolerance
/// comparisons of the form `tail >= floor`.
pub fn reverse_chernoff_floor_upper(p: &Q, ell: u64, eps: &Q) -> Result<Q> {
    precondition(
        eps.is_positive() && eps <= &Q::new(1.into(), 2.into()),
        || "eps must lie in (0, 1/2]".into(),
    )?;
    precondition(p.is_positive() && p <= &Q::new(1.into(), 2.into()), || {
        "p must lie in (0, 1/2]".into()
    })?;
    let x = eps * eps * p * qu(ell);
    precondition(x >= qu(3), || {
        format!("eps^2 p l >= 3 fails: eps^2 p l = {}", format_q(&x))
    })?;
    Ok(exp_neg_bounds(&(qu(9) * x)).1)
}

/// `Pr[Bin(l,p) >= p l (1+eps)]` with the threshold rounded up exactly.
pub fn binomial_upper_tail(ell: u64, p: &Q, eps: &Q) -> Q {
    let s = ceil_nonneg_u64(&(p * qu(ell) * (Q::one() + eps)));
    binomial_tail(ell, p, s)
}

/// `exp(-36 eps^2 p l)`, a lower bound on `Pr[e_k >= p^k C(l,k)(1+eps)]`.
pub fn es_lower_floor(p: f64, ell: u64, eps: f64, k: u64) -> Result<f64> {
    precondition(eps > 0.0 && eps <= 0.25, || {
        format!("eps must lie in (0, 1/4], got {eps}")
    })?;
    precondition(p > 0.0 && p <= 0.5, || {
        format!("p must lie in (0, 1/2], got {p}")
    })?;
    let l = ell as f64;
    precondition(eps * p * l >= k as f64 - 1e-12, || {
        format!("eps p l >= k fails: eps p l = {}, k = {k}", eps * p * l)
    })?;
    let x = eps * eps * p * l;
    precondition(x >= 0.75 - 1e-12, || {
        format!("eps^2 p l >= 3/4 fails: eps^2 p l = {x}")
    })?;
    Ok((-36.0 * x).exp())
}

/// `p^k C(l,k) (1+eps)`, the upper-tail threshold for `e_k`.
pub fn es_mean_threshold(ell: u64, p: &Q, k: u64, eps: &Q) -> Q {
    pow_q(p, k as u32) * binom_q(ell, k) * (Q::one() + eps)
}

/// Index of `g_{x,y}` in the permutation-indicator layout.
pub fn perm_index(n: usize, x: usize, y: usize) -> usize {
    x * n + y
}

/// Uniform law of the `N x N` indicator matrix of a random permutation.
pub fn permutation_indicator_distribution(n: usize) -> Result<ExactDistribution> {
    precondition((1..=6).contains(&n), || {
        format!("N must lie in [1, 6], got {n}")
    })?;
    let mut perms = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    permute(&mut cur, 0, &mut perms);
    let p = Q::one() / qu(perms.len() as u64);
    let support = perms
        .into_iter()
        .map(|f| {
            let mut x = vec![Q::zero(); n * n];
            for (a, &b) in f.iter().enumerate() {
                x[perm_index(n, a, b)] = Q::one();
            }
            (p.clone(), x)
        })
        .collect();
    ExactDistribution::new(n * n, support)
}

fn permute(cur: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
    if i == cur.len() {
        out.push(cur.clone());
        return;
    }
    for j in i..cur.len() {
        cur.swap(i, j);
        permute(cur, i + 1, out);
        cur.swap(i, j);
    }
}

/// `sum_{x < x'} g_{x,x} g_{x',x'}`: pairs of fixed points.
pub fn fixed_point_pairs_polynomial(n: usize) -> Result<PositivePolynomial> {
    precondition(n >= 2, || "N must be >= 2".into())?;
    let mut monos = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            monos.push((Q::one(), vec![perm_index(n, a, a), perm_index(n, b, b)]));
        }
    }
    PositivePolynomial::new(n * n, monos)
}

/// Law of the monomial values `x_i = w_i prod_{j in e_i} v_j` under `dist`.
pub fn monomial_indicator_distribution(
    p: &PositivePolynomial,
    dist: &ExactDistribution,
) -> Result<ExactDistribution> {
    precondition(dist.n() == p.variable_count(), || {
        "distribution and polynomial dimensions differ".into()
    })?;
    let monos = p.monomials().to_vec();
    dist.map(monos.len(), |v| {
        monos
            .iter()
            .map(|m| m.vars.iter().fold(m.weight.clone(), |acc, &j| acc * &v[j]))
            .collect()
    })
}

/// Growth boundedness of the monomial values at order `m` with
/// `1 + delta'' = 1 + sum_{i=1}^k C(km,i) mu*_i/mu*_0`, where `dist` should have
/// independent coordinates.
pub fn check_monomial_growth(
    p: &PositivePolynomial,
    dist: &ExactDistribution,
    m: u32,
) -> Result<(GrowthCheck, Q)> {
    let stats = poly_stats_for(p, dist)?;
    let delta = kv_slack(&stats, m as u64, p.degree() as u64)?;
    let mono = monomial_indicator_distribution(p, dist)?;
    Ok((check_growth_bounded(&mono, &delta, m)?, delta))
}

/// `C(l, k)` as a float, for reporting.
pub fn es_monomial_count(ell: u64, k: u64) -> f64 {
    binom_f64(ell, k)
}
