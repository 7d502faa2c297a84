//! Finite distributions over nonnegative outcome tuples.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact::{format_q, parse_q, pow_q, to_f64, Q};
use crate::seed;

/// One atom of an [`ExactDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub prob: Q,
    pub x: Vec<Q>,
}

/// A finitely supported distribution over `R_{>=0}^n` with exact probabilities.
///
/// Probabilities that were supplied as floats are stored as their exact
/// dyadic values; `exact` records whether the input was rational throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    n: usize,
    support: Vec<Atom>,
    exact: bool,
}

const FLOAT_SUM_TOL: f64 = 1e-12;

impl ExactDistribution {
    pub fn new(n: usize, support: Vec<(Q, Vec<Q>)>) -> Result<Self> {
        Self::build(n, support, true)
    }

    /// Like [`new`](Self::new) but accepts probabilities that sum to one only
    /// within `1e-12`, as happens for float-valued input.
    pub fn new_approx(n: usize, support: Vec<(Q, Vec<Q>)>) -> Result<Self> {
        Self::build(n, support, false)
    }

    fn build(n: usize, support: Vec<(Q, Vec<Q>)>, exact: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Malformed("coordinate count n must be >= 1".into()));
        }
        if support.is_empty() {
            return Err(Error::Malformed("empty support".into()));
        }
        let mut total = Q::zero();
        let mut atoms = Vec::with_capacity(support.len());
        for (i, (prob, x)) in support.into_iter().enumerate() {
            if x.len() != n {
                return Err(Error::Malformed(format!(
                    "outcome {i} has {} coordinates, expected {n}",
                    x.len()
                )));
            }
            if prob.is_negative() {
                return Err(Error::Malformed(format!(
                    "outcome {i} has negative probability"
                )));
            }
            if x.iter().any(|v| v.is_negative()) {
                return Err(Error::Malformed(format!(
                    "outcome {i} has a negative entry"
                )));
            }
            total += &prob;
            atoms.push(Atom { prob, x });
        }
        if exact {
            if !total.is_one() {
                return Err(Error::Malformed(format!(
                    "probabilities sum to {} instead of 1",
                    format_q(&total)
                )));
            }
        } else if (to_f64(&total) - 1.0).abs() > FLOAT_SUM_TOL {
            return Err(Error::Malformed(format!(
                "probabilities sum to {} (tolerance {FLOAT_SUM_TOL})",
                to_f64(&total)
            )));
        }
        Ok(ExactDistribution {
            n,
            support: atoms,
            exact,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &[Atom] {
        &self.support
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn is_binary(&self) -> bool {
        self.support
            .iter()
            .all(|a| a.x.iter().all(|v| v.is_zero() || v.is_one()))
    }

    /// Binary outcomes as bitmasks (bit `i` is coordinate `i`). `None` unless
    /// the distribution is binary with `n <= 64`.
    pub fn binary_masks(&self) -> Option<Vec<(Q, u64)>> {
        if self.n > 64 || !self.is_binary() {
            return None;
        }
        Some(
            self.support
                .iter()
                .map(|a| {
                    let mask =
                        a.x.iter()
                            .enumerate()
                            .filter(|(_, v)| v.is_one())
                            .fold(0u64, |m, (i, _)| m | (1 << i));
                    (a.prob.clone(), mask)
                })
                .collect(),
        )
    }

    /// `E[x_j^c]`.
    pub fn marginal_moment(&self, j: usize, c: u32) -> Q {
        self.support
            .iter()
            .map(|a| &a.prob * pow_q(&a.x[j], c))
            .sum()
    }

    /// `E[prod_k x_{idx_k}]` for an index multiset.
    pub fn expect_product(&self, idx: &[usize]) -> Q {
        self.support
            .iter()
            .map(|a| idx.iter().fold(a.prob.clone(), |acc, &i| acc * &a.x[i]))
            .sum()
    }

    /// Image distribution under `f`, merging equal outcomes.
    pub fn map<F>(&self, out_n: usize, f: F) -> Result<ExactDistribution>
    where
        F: Fn(&[Q]) -> Vec<Q>,
    {
        let mut merged: BTreeMap<Vec<Q>, Q> = BTreeMap::new();
        for a in &self.support {
            *merged.entry(f(&a.x)).or_insert_with(Q::zero) += &a.prob;
        }
        Self::build(
            out_n,
            merged.into_iter().map(|(x, p)| (p, x)).collect(),
            self.exact,
        )
    }

    /// Merges duplicate outcomes and drops zero-probability atoms.
    pub fn normalized(&self) -> ExactDistribution {
        let mut merged: BTreeMap<Vec<Q>, Q> = BTreeMap::new();
        for a in &self.support {
            *merged.entry(a.x.clone()).or_insert_with(Q::zero) += &a.prob;
        }
        let support: Vec<Atom> = merged
            .into_iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(x, prob)| Atom { prob, x })
            .collect();
        ExactDistribution {
            n: self.n,
            support,
            exact: self.exact,
        }
    }

    pub fn constant(n: usize, value: Q) -> Result<Self> {
        Self::new(n, vec![(Q::one(), vec![value; n])])
    }

    pub fn point_mass(x: Vec<Q>) -> Result<Self> {
        Self::new(x.len(), vec![(Q::one(), x)])
    }

    /// Independent coordinates with `Pr[x_i = 1] = ps[i]`.
    pub fn product_bernoulli(ps: &[Q]) -> Result<Self> {
        let n = ps.len();
        if n > 24 {
            return Err(Error::Resource {
                what: "product distribution outcomes".into(),
                needed: 1u128 << n,
                budget: 1 << 24,
                partial: None,
            });
        }
        if ps.iter().any(|p| p.is_negative() || p > &Q::one()) {
            return Err(Error::Malformed("Bernoulli parameter outside [0,1]".into()));
        }
        let mut support = Vec::with_capacity(1 << n);
        for mask in 0u64..(1u64 << n) {
            let mut prob = Q::one();
            let mut x = Vec::with_capacity(n);
            for (i, p) in ps.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    prob *= p;
                    x.push(Q::one());
                } else {
                    prob *= Q::one() - p;
                    x.push(Q::zero());
                }
            }
            if !prob.is_zero() {
                support.push((prob, x));
            }
        }
        Self::new(n, support)
    }

    pub fn iid_bernoulli(n: usize, p: &Q) -> Result<Self> {
        Self::product_bernoulli(&vec![p.clone(); n])
    }

    /// All `n` coordinates equal a single Bernoulli(`p`) coin.
    pub fn correlated_coins(n: usize, p: &Q) -> Result<Self> {
        let mut support = Vec::new();
        if !p.is_zero() {
            support.push((p.clone(), vec![Q::one(); n]));
        }
        if !p.is_one() {
            support.push((Q::one() - p, vec![Q::zero(); n]));
        }
        Self::new(n, support)
    }

    /// Convex combination of distributions over the same coordinate count.
    pub fn mixture(parts: &[(Q, ExactDistribution)]) -> Result<Self> {
        let n = parts
            .first()
            .map(|(_, d)| d.n)
            .ok_or_else(|| Error::Malformed("empty mixture".into()))?;
        let mut support = Vec::new();
        for (w, d) in parts {
            if d.n != n {
                return Err(Error::Malformed("mixture components differ in n".into()));
            }
            for a in &d.support {
                support.push((w * &a.prob, a.x.clone()));
            }
        }
        Ok(Self::new(n, support)?.normalized())
    }

    /// JSON form `{"n": .., "entries": [{"p": "num/den", "x": [..]}]}`.
    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .support
            .iter()
            .map(|a| {
                let x: Vec<Value> = a.x.iter().map(q_to_json).collect();
                json!({ "p": format_q(&a.prob), "x": x })
            })
            .collect();
        json!({ "n": self.n, "entries": entries })
    }

    /// Parses the JSON form. String probabilities are exact rationals; numeric
    /// probabilities are read as decimals and checked with float tolerance.
    pub fn from_json(v: &Value) -> Result<Self> {
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Malformed("missing integer field n".into()))?
            as usize;
        let entries = v
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Malformed("missing array field entries".into()))?;
        let mut all_exact = true;
        let mut support = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let p = e
                .get("p")
                .ok_or_else(|| Error::Malformed(format!("entry {i} lacks p")))?;
            if !p.is_string() {
                all_exact = false;
            }
            let prob = json_to_q(p)?;
            let xs = e
                .get("x")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Malformed(format!("entry {i} lacks array x")))?;
            let x = xs.iter().map(json_to_q).collect::<Result<Vec<_>>>()?;
            support.push((prob, x));
        }
        Self::build(n, support, all_exact)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&v)
    }
}

pub(crate) fn q_to_json(v: &Q) -> Value {
    match v.is_integer().then(|| v.numer().to_i64()).flatten() {
        Some(i) => json!(i),
        None => json!(format_q(v)),
    }
}

/// Reads a JSON number or `"num/den"` string as an exact rational.
pub fn json_to_q(v: &Value) -> Result<Q> {
    match v {
        Value::String(s) => parse_q(s),
        Value::Number(n) => parse_q(&n.to_string()),
        other => Err(Error::Malformed(format!(
            "expected a number, found {other}"
        ))),
    }
}

type Sampler = dyn Fn(u64) -> Vec<f64> + Send + Sync;

/// A distribution known only through a seeded sampler.
#[derive(Clone)]
pub struct SampledDistribution {
    n: usize,
    sampler: Arc<Sampler>,
}

impl fmt::Debug for SampledDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledDistribution")
            .field("n", &self.n)
            .finish()
    }
}

impl SampledDistribution {
    pub fn new<F>(n: usize, sampler: F) -> Self
    where
        F: Fn(u64) -> Vec<f64> + Send + Sync + 'static,
    {
        SampledDistribution {
            n,
            sampler: Arc::new(sampler),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        (self.sampler)(seed)
    }

    pub fn iid_bernoulli(n: usize, p: f64) -> Self {
        Self::new(n, move |s| {
            let mut rng = seed::rng(s);
            (0..n)
                .map(|_| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                .collect()
        })
    }

    /// Inverse-CDF sampling from an exact distribution (float CDF).
    pub fn from_exact(dist: &ExactDistribution) -> Self {
        let mut acc = 0.0;
        let cdf: Vec<f64> = dist
            .support()
            .iter()
            .map(|a| {
                acc += to_f64(&a.prob);
                acc
            })
            .collect();
        let outcomes: Vec<Vec<f64>> = dist
            .support()
            .iter()
            .map(|a| a.x.iter().map(to_f64).collect())
            .collect();
        let n = dist.n();
        Self::new(n, move |s| {
            let u = seed::rng(s).random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(outcomes.len() - 1);
            outcomes[idx].clone()
        })
    }
}
