//! Random walks on expanders at the transition-matrix level.
//!
//! A walk `v_1..v_l` starts at a uniform vertex and moves by a symmetric doubly
//! stochastic matrix `A`; `x_i = 1` iff `v_i` lies in the target set `W`.
//! Steps and subsets of steps are 1-based throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::core_bounds::McEstimate;
use crate::dist::{json_to_q, ExactDistribution};
use crate::error::{precondition, Error, Result};
use crate::exact::{
    binom, binom_q, ceil_nonneg_u64, floor_nonneg_u64, format_q, ln_binom, pow_q, qu, to_f64, Q,
};
use crate::seed;

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    n: usize,
    a: DMatrix<f64>,
    exact: Option<Vec<Vec<Q>>>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Malformed(
                "transition matrix must be square and nonempty".into(),
            ));
        }
        let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                let v = a[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) = {v} is not a probability"
                    )));
                }
                if (v - a[(j, i)]).abs() > STOCHASTIC_TOL {
                    return Err(Error::Validation(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
                s += v;
            }
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Validation(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(TransitionMatrix { n, a, exact: None })
    }

    pub fn from_exact(rows: Vec<Vec<Q>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Malformed(
                "transition matrix must be square and nonempty".into(),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                if rows[i][j].is_negative() {
                    return Err(Error::Validation(format!("entry ({i},{j}) is negative")));
                }
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Validation(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
            if rows[i].iter().sum::<Q>() != Q::one() {
                return Err(Error::Validation(format!("row {i} does not sum to 1")));
            }
        }
        let a = DMatrix::from_fn(n, n, |i, j| to_f64(&rows[i][j]));
        Ok(TransitionMatrix {
            n,
            a,
            exact: Some(rows),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn exact(&self) -> Option<&Vec<Vec<Q>>> {
        self.exact.as_ref()
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = match &self.exact {
            Some(r) => r
                .iter()
                .map(|row| row.iter().map(|v| json!(format_q(v))).collect())
                .collect(),
            None => (0..self.n)
                .map(|i| (0..self.n).map(|j| json!(self.a[(i, j)])).collect())
                .collect(),
        };
        json!({"n": self.n, "rows": rows})
    }

    /// `{n, rows}`; exact when every entry is a `"num/den"` string or an integer.
    pub fn from_json(v: &Value) -> Result<Self> {
        let rows = v
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Malformed("matrix JSON needs a rows array".into()))?;
        if let Some(n) = v.get("n").and_then(Value::as_u64) {
            if n as usize != rows.len() {
                return Err(Error::Malformed(format!("n = {n} but {} rows", rows.len())));
            }
        }
        let mut all_strings = true;
        let mut parsed = Vec::new();
        for r in rows {
            let r = r
                .as_array()
                .ok_or_else(|| Error::Malformed("matrix row is not an array".into()))?;
            let mut row = Vec::new();
            for e in r {
                all_strings &= e.is_string() || e.is_u64();
                row.push(json_to_q(e)?);
            }
            parsed.push(row);
        }
        if all_strings {
            Self::from_exact(parsed)
        } else {
            Self::new(
                parsed
                    .iter()
                    .map(|r| r.iter().map(to_f64).collect())
                    .collect(),
            )
        }
    }
}

/// Second-largest absolute eigenvalue.
pub fn spectral_lambda(a: &TransitionMatrix) -> f64 {
    if a.n < 2 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(a.a.clone());
    let mut abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    abs.sort_by(|x, y| y.total_cmp(x));
    abs[1].min(1.0)
}

/// `A = lambda I + (1-lambda)/n J`.
pub fn build_jn_construction(lambda: f64, n: usize) -> Result<TransitionMatrix> {
    precondition((0.0..1.0).contains(&lambda), || {
        format!("lambda must lie in [0,1), got {lambda}")
    })?;
    precondition(n >= 1, || "n must be >= 1".into())?;
    let off = (1.0 - lambda) / n as f64;
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { lambda + off } else { off });
    Ok(TransitionMatrix { n, a, exact: None })
}

pub fn build_jn_exact(lambda: &Q, n: usize) -> Result<TransitionMatrix> {
    precondition(!lambda.is_negative() && lambda < &Q::one(), || {
        "lambda must lie in [0,1)".into()
    })?;
    precondition(n >= 1, || "n must be >= 1".into())?;
    let off = (Q::one() - lambda) / qu(n as u64);
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { lambda + &off } else { off.clone() })
                .collect()
        })
        .collect();
    TransitionMatrix::from_exact(rows)
}

/// Random symmetric doubly stochastic matrix: a rational mixture of
/// `(P + P^T)/2` over random permutation matrices `P`.
pub fn random_doubly_stochastic(n: usize, seed: u64) -> TransitionMatrix {
    let mut rng = seed::rng(seed);
    let k = rng.random_range(1..=4usize);
    let weights: Vec<u64> = (0..k).map(|_| rng.random_range(1..=9u64)).collect();
    let total: u64 = weights.iter().sum();
    let mut rows = vec![vec![Q::zero(); n]; n];
    for w in weights {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let half = Q::new(w.into(), (2 * total).into());
        for (i, &j) in perm.iter().enumerate() {
            rows[i][j] += &half;
            rows[j][i] += &half;
        }
    }
    TransitionMatrix::from_exact(rows)
        .expect("mixture of symmetrised permutations is doubly stochastic")
}

#[derive(Debug, Clone)]
pub struct WalkSpec {
    pub matrix: TransitionMatrix,
    target: Vec<usize>,
    in_target: Vec<bool>,
    pub steps: u64,
}

impl WalkSpec {
    pub fn new(matrix: TransitionMatrix, target: Vec<usize>, steps: u64) -> Result<Self> {
        precondition(steps >= 1, || "walk length must be >= 1".into())?;
        let n = matrix.n();
        let mut in_target = vec![false; n];
        for &w in &target {
            if w >= n {
                return Err(Error::Malformed(format!(
                    "target vertex {w} out of range 0..{n}"
                )));
            }
            in_target[w] = true;
        }
        let target = (0..n).filter(|&i| in_target[i]).collect();
        Ok(WalkSpec {
            matrix,
            target,
            in_target,
            steps,
        })
    }

    /// Target `W = {0, .., round(mu n) - 1}`; `mu n` must be integral.
    pub fn with_density(matrix: TransitionMatrix, mu: f64, steps: u64) -> Result<Self> {
        let n = matrix.n();
        let w = mu * n as f64;
        precondition((w - w.round()).abs() < 1e-9, || {
            format!("mu n = {w} is not an integer (mu = {mu}, n = {n})")
        })?;
        let w = w.round() as usize;
        Self::new(matrix, (0..w).collect(), steps)
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn in_target(&self, v: usize) -> bool {
        self.in_target[v]
    }

    pub fn mu(&self) -> f64 {
        self.target.len() as f64 / self.matrix.n() as f64
    }

    pub fn mu_exact(&self) -> Q {
        qu(self.target.len() as u64) / qu(self.matrix.n() as u64)
    }

    fn project(&self, v: &mut DVector<f64>) {
        for i in 0..v.len() {
            if !self.in_target[i] {
                v[i] = 0.0;
            }
        }
    }
}

/// `Pr[v_i in W for all i in M]` via `|u P_W prod A^{d_i} P_W|_1`.
pub fn stay_prob_exact(spec: &WalkSpec, subset: &[u64]) -> Result<f64> {
    precondition(!subset.is_empty(), || "M must be nonempty".into())?;
    precondition(subset.windows(2).all(|w| w[0] < w[1]), || {
        "M must be strictly increasing".into()
    })?;
    precondition(
        subset[0] >= 1 && subset[subset.len() - 1] <= spec.steps,
        || format!("M must lie in [1, {}]", spec.steps),
    )?;
    let n = spec.matrix.n();
    let a = spec.matrix.matrix();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    spec.project(&mut v);
    for w in subset.windows(2) {
        for _ in 0..(w[1] - w[0]) {
            v = a.tr_mul(&v);
        }
        spec.project(&mut v);
    }
    Ok(v.sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

/// Mean with a 99% half-width; the half-width is 0 for exact values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            half_width: 0.0,
        }
    }
}

/// Average of [`stay_prob_exact`] over uniform `M` of size `m`.
pub fn avg_stay_prob(spec: &WalkSpec, m: u64, mode: Mode) -> Result<Estimate> {
    let ell = spec.steps;
    precondition(m >= 1 && m <= ell, || {
        format!("need 1 <= m <= l, got m={m}, l={ell}")
    })?;
    match mode {
        Mode::Exact => {
            let count = binom(ell, m).to_u128().unwrap_or(u128::MAX);
            Budget::current().check_enumeration("subsets C(l, m)", count)?;
            let subsets = all_subsets(ell, m);
            let probs: Vec<f64> = subsets
                .par_iter()
                .map(|s| stay_prob_exact(spec, s).expect("valid subset"))
                .collect();
            // sequential sum keeps the result independent of the thread count
            let total: f64 = probs.iter().sum();
            Ok(Estimate::exact(total / subsets.len() as f64))
        }
        Mode::MonteCarlo { trials, seed } => {
            precondition(trials >= 2, || "need at least 2 trials".into())?;
            let stream = seed::stream_id("avg_stay_prob");
            let vals: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = seed::trial_rng(seed, stream, i);
                    let mut xs: Vec<u64> =
                        rand::seq::index::sample(&mut rng, ell as usize, m as usize)
                            .into_iter()
                            .map(|x| x as u64 + 1)
                            .collect();
                    xs.sort_unstable();
                    stay_prob_exact(spec, &xs).expect("valid subset")
                })
                .collect();
            let t = trials as f64;
            let mean = vals.iter().sum::<f64>() / t;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
            Ok(Estimate {
                value: mean,
                half_width: crate::core_bounds::Z_99 * (var / t).sqrt(),
            })
        }
    }
}

fn all_subsets(ell: u64, m: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m as usize);
    fn rec(start: u64, ell: u64, m: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() as u64 == m {
            out.push(cur.clone());
            return;
        }
        let need = m - cur.len() as u64;
        for x in start..=ell + 1 - need {
            cur.push(x);
            rec(x + 1, ell, m, cur, out);
            cur.pop();
        }
    }
    rec(1, ell, m, &mut cur, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `||P_W A^k P_W||` against `mu + (1-mu) lambda^k`.
pub fn norm_claim_check(a: &TransitionMatrix, target: &[usize], k: u32) -> Result<NormCheck> {
    precondition(k >= 1, || "k must be >= 1".into())?;
    let n = a.n();
    let mut w: Vec<usize> = target.to_vec();
    w.sort_unstable();
    w.dedup();
    if w.iter().any(|&i| i >= n) {
        return Err(Error::Malformed("target vertex out of range".into()));
    }
    let mu = w.len() as f64 / n as f64;
    let lambda = spectral_lambda(a);
    let rhs = mu + (1.0 - mu) * lambda.powi(k as i32);
    let lhs = if w.is_empty() {
        0.0
    } else {
        let ak = a.matrix().pow(k);
        let sub = DMatrix::from_fn(w.len(), w.len(), |i, j| ak[(w[i], w[j])]);
        SymmetricEigen::new(sub)
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    };
    Ok(NormCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

/// `(mu (1+eps))^m`.
pub fn hitting_bound(mu: f64, eps: f64, m: f64) -> Result<f64> {
    precondition(eps >= 0.0, || format!("eps must be >= 0, got {eps}"))?;
    precondition((0.0..=1.0).contains(&mu), || {
        format!("mu must lie in [0,1], got {mu}")
    })?;
    Ok((mu * (1.0 + eps)).powf(m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingPrecondition {
    pub holds: bool,
    /// `min(1/2, (1-lambda)/lambda * eps mu / 2) * l`.
    pub limit: f64,
}

/// Whether `m <= min(1/2, (1-lambda)/lambda * eps mu/2) l`; `lambda = 0` reads as `+inf`.
pub fn hitting_precondition(
    lambda: f64,
    mu: f64,
    eps: f64,
    m: u64,
    ell: u64,
) -> HittingPrecondition {
    let ratio = if lambda == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - lambda) / lambda * eps * mu / 2.0
    };
    let limit = ratio.min(0.5) * ell as f64;
    HittingPrecondition {
        holds: m as f64 <= limit + 1e-12,
        limit,
    }
}

/// `(mu + (1-mu)(m/(l - alpha m) * lambda/(1-lambda) + lambda^alpha))^m`.
pub fn hitting_bound_tight(mu: f64, lambda: f64, m: u64, ell: u64, alpha: f64) -> Result<f64> {
    precondition(m >= 1 && m <= ell, || {
        format!("need 1 <= m <= l, got m={m}, l={ell}")
    })?;
    precondition((0.0..1.0).contains(&lambda), || {
        format!("lambda must lie in [0,1), got {lambda}")
    })?;
    precondition(
        alpha >= 1.0 && alpha * 2.0 * m as f64 <= ell as f64 + 1e-12,
        || format!("need 1 <= alpha <= l/2m, got alpha={alpha}"),
    )?;
    let (mf, lf) = (m as f64, ell as f64);
    let inner = mf / (lf - alpha * mf) * lambda / (1.0 - lambda) + lambda.powf(alpha);
    Ok((mu + (1.0 - mu) * inner).powf(mf))
}

/// Least integer `>= mu l (1+eps)`, with slack for float round-off.
pub fn tail_threshold(mu: f64, ell: u64, eps: f64) -> u64 {
    (mu * ell as f64 * (1.0 + eps) - 1e-9).ceil().max(0.0) as u64
}

/// `Pr[sum x_i >= threshold]` by DP over (vertex, visits so far).
pub fn walk_tail_count(spec: &WalkSpec, threshold: u64) -> Result<f64> {
    let n = spec.matrix.n();
    let ell = spec.steps;
    if threshold == 0 {
        return Ok(1.0);
    }
    if threshold > ell {
        return Ok(0.0);
    }
    let s = threshold as usize;
    Budget::current().check_dp(
        "walk DP cells n*l^2",
        (n as u128) * (ell as u128) * (ell as u128),
    )?;
    let a = spec.matrix.matrix();
    // dp[c][v]: mass at v with min(visits, s) = c
    let mut dp = vec![vec![0.0f64; n]; s + 1];
    for v in 0..n {
        let c = spec.in_target(v) as usize;
        dp[c.min(s)][v] += 1.0 / n as f64;
    }
    for _ in 1..ell {
        let mut next = vec![vec![0.0f64; n]; s + 1];
        for (c, row) in dp.iter().enumerate() {
            for (u, &pu) in row.iter().enumerate() {
                if pu == 0.0 {
                    continue;
                }
                for v in 0..n {
                    let p = a[(u, v)];
                    if p == 0.0 {
                        continue;
                    }
                    let c2 = (c + spec.in_target(v) as usize).min(s);
                    next[c2][v] += pu * p;
                }
            }
        }
        dp = next;
    }
    Ok(dp[s].iter().sum())
}

/// `Pr[sum x_i >= ceil(mu l (1+eps))]`.
pub fn walk_tail_exact(spec: &WalkSpec, eps: f64) -> Result<f64> {
    walk_tail_count(spec, tail_threshold(spec.mu(), spec.steps, eps))
}

/// Tail of the two-state chain obtained by lumping `W` and its complement in
/// `lambda I + (1-lambda) J/n`: stay in `W` w.p. `a = lambda + mu - lambda mu`,
/// stay outside w.p. `b = 1 - mu + lambda mu`.
pub fn walk_tail_two_state(lambda: f64, mu: f64, ell: u64, threshold: u64) -> Result<f64> {
    precondition(ell >= 1, || "l must be >= 1".into())?;
    if threshold == 0 {
        return Ok(1.0);
    }
    if threshold > ell {
        return Ok(0.0);
    }
    let s = threshold as usize;
    let a = lambda + mu - lambda * mu;
    let b = 1.0 - mu + lambda * mu;
    // (in, out) masses per capped count
    let mut inn = vec![0.0f64; s + 1];
    let mut out = vec![0.0f64; s + 1];
    inn[1.min(s)] = mu;
    out[0] = 1.0 - mu;
    for _ in 1..ell {
        let mut ni = vec![0.0f64; s + 1];
        let mut no = vec![0.0f64; s + 1];
        for c in 0..=s {
            let up = (c + 1).min(s);
            ni[up] += inn[c] * a + out[c] * (1.0 - b);
            no[c] += inn[c] * (1.0 - a) + out[c] * b;
        }
        inn = ni;
        out = no;
    }
    Ok(inn[s] + out[s])
}

/// Exact rational form of [`walk_tail_two_state`].
pub fn walk_tail_two_state_exact(lambda: &Q, mu: &Q, ell: u64, threshold: u64) -> Q {
    if threshold == 0 {
        return Q::one();
    }
    if threshold > ell {
        return Q::zero();
    }
    let s = threshold as usize;
    let one = Q::one();
    let a = lambda + mu - lambda * mu;
    let b = &one - mu + lambda * mu;
    let (na, nb) = (&one - &a, &one - &b);
    let mut inn = vec![Q::zero(); s + 1];
    let mut out = vec![Q::zero(); s + 1];
    inn[1.min(s)] = mu.clone();
    out[0] = &one - mu;
    for _ in 1..ell {
        let mut ni = vec![Q::zero(); s + 1];
        let mut no = vec![Q::zero(); s + 1];
        for c in 0..=s {
            let up = (c + 1).min(s);
            ni[up] += &inn[c] * &a + &out[c] * &nb;
            no[c] += &inn[c] * &na + &out[c] * &b;
        }
        inn = ni;
        out = no;
    }
    &inn[s] + &out[s]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub value: f64,
    /// Natural log of `value`; finite even when `value` underflows.
    pub ln_value: f64,
    /// `value >= 1`.
    pub vacuous: bool,
}

impl TailBound {
    fn from_ln(ln_value: f64) -> Self {
        TailBound {
            value: ln_value.exp(),
            ln_value,
            vacuous: ln_value >= 0.0,
        }
    }
}

/// `2 exp(-(1-lambda) eps^2 mu l / 18)` for `eps in [0, 4/5]`.
pub fn main_tail_bound(mu: f64, lambda: f64, eps: f64, ell: u64) -> Result<TailBound> {
    precondition((0.0..=0.8).contains(&eps), || {
        format!("eps must lie in [0, 4/5], got {eps}")
    })?;
    precondition(mu > 0.0 && mu <= 1.0, || {
        format!("mu must lie in (0,1], got {mu}")
    })?;
    precondition((0.0..=1.0).contains(&lambda), || {
        format!("lambda must lie in [0,1], got {lambda}")
    })?;
    Ok(TailBound::from_ln(
        std::f64::consts::LN_2 - (1.0 - lambda) * eps * eps * mu * ell as f64 / 18.0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightBound {
    pub bound: TailBound,
    /// `eps <= min(1/3, mu, -(1-mu)/(3 ln eps))`, where `c_mu = 4/(1-mu)^2` is proven.
    pub remark_valid: bool,
    pub c_mu: f64,
}

/// `2 exp(-(1-lambda)/(1+lambda) * mu/(1-mu) * eps^2 l / 2 + c_mu eps^3 ln(1/eps) l)`
/// with `c_mu = 4/(1-mu)^2`.
pub fn tight_tail_bound(mu: f64, lambda: f64, eps: f64, ell: u64) -> Result<TightBound> {
    precondition(eps > 0.0 && eps <= 0.5, || {
        format!("eps must lie in (0, 1/2], got {eps}")
    })?;
    precondition(mu > 0.0 && mu < 1.0, || {
        format!("mu must lie in (0,1), got {mu}")
    })?;
    precondition((0.0..1.0).contains(&lambda), || {
        format!("lambda must lie in [0,1), got {lambda}")
    })?;
    let l = ell as f64;
    let c_mu = 4.0 / ((1.0 - mu) * (1.0 - mu));
    let lead = (1.0 - lambda) / (1.0 + lambda) * mu / (1.0 - mu) * eps * eps * l / 2.0;
    let corr = c_mu * eps.powi(3) * (1.0 / eps).ln() * l;
    let remark_valid = eps <= (1.0f64 / 3.0).min(mu).min(-(1.0 - mu) / (3.0 * eps.ln()));
    Ok(TightBound {
        bound: TailBound::from_ln(std::f64::consts::LN_2 - lead + corr),
        remark_valid,
        c_mu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    pub ln_value: f64,
    /// Visits in `W`: `ceil(mu l (1+eps))`.
    pub visits: u64,
    /// Number of runs in `W`: `floor(x l)`.
    pub runs: u64,
    /// Set when rounding changed either count.
    pub rounded: bool,
}

fn run_fraction(lambda: f64, mu: f64, eps: f64) -> f64 {
    (1.0 - lambda) * mu * (1.0 - mu) + (1.0 - lambda) * mu * (1.0 - 2.0 * mu) / (1.0 + lambda) * eps
}

fn lower_counts(visits: u64, runs: u64, ell: u64) -> Result<()> {
    precondition(runs >= 1, || format!("floor(x l) = {runs} must be >= 1"))?;
    precondition(visits >= 1 && visits < ell, || {
        format!("visit count {visits} must lie in [1, l-1] for l = {ell}")
    })?;
    Ok(())
}

/// Probability-weighted count of walks alternating `runs` runs in `W` and
/// `runs` runs outside, with `visits` steps in `W` in total:
/// `C(s-1, r-1) C(l-s-1, r-1) a^{s-r} b^{l-s-r} (1-a)^r (1-b)^r`.
/// Evaluated in log space.
pub fn optimality_lower_bound(lambda: f64, mu: f64, eps: f64, ell: u64) -> Result<LowerBound> {
    precondition(lambda > 0.0 && lambda < 1.0, || {
        format!("lambda must lie in (0,1), got {lambda}")
    })?;
    precondition(mu > 0.0 && mu < 1.0, || {
        format!("mu must lie in (0,1), got {mu}")
    })?;
    precondition(eps > 0.0, || format!("eps must be > 0, got {eps}"))?;
    let l = ell as f64;
    let s_real = mu * l * (1.0 + eps);
    let x_real = run_fraction(lambda, mu, eps) * l;
    let s = tail_threshold(mu, ell, eps);
    let r = (x_real + 1e-9).floor().max(0.0) as u64;
    lower_counts(s, r, ell)?;
    let rounded = (s_real - s as f64).abs() > 1e-9 || (x_real - r as f64).abs() > 1e-9;
    let a = lambda + mu - lambda * mu;
    let b = 1.0 - mu + lambda * mu;
    let ln_value = if ell - s < r {
        f64::NEG_INFINITY
    } else {
        ln_binom(s - 1, r - 1)
            + ln_binom(ell - s - 1, r - 1)
            + (s - r) as f64 * a.ln()
            + (ell - s - r) as f64 * b.ln()
            + r as f64 * ((1.0 - a).ln() + (1.0 - b).ln())
    };
    Ok(LowerBound {
        value: ln_value.exp(),
        ln_value,
        visits: s,
        runs: r,
        rounded,
    })
}

/// The same product over exact rationals. Returns `(value, visits, runs)`.
pub fn optimality_lower_bound_exact(
    lambda: &Q,
    mu: &Q,
    eps: &Q,
    ell: u64,
) -> Result<(Q, u64, u64)> {
    let one = Q::one();
    precondition(lambda.is_positive() && lambda < &one, || {
        "lambda must lie in (0,1)".into()
    })?;
    precondition(mu.is_positive() && mu < &one, || {
        "mu must lie in (0,1)".into()
    })?;
    precondition(eps.is_positive(), || "eps must be > 0".into())?;
    let l = qu(ell);
    let s = ceil_nonneg_u64(&(mu * &l * (&one + eps)));
    let two = qu(2);
    let x = (&one - lambda) * mu * (&one - mu)
        + (&one - lambda) * mu * (&one - &two * mu) / (&one + lambda) * eps;
    let r = floor_nonneg_u64(&(x * &l));
    lower_counts(s, r, ell)?;
    if ell - s < r {
        return Ok((Q::zero(), s, r));
    }
    let a = lambda + mu - lambda * mu;
    let b = &one - mu + lambda * mu;
    let p32 = |v: &Q, e: u64| pow_q(v, e as u32);
    let value = binom_q(s - 1, r - 1)
        * binom_q(ell - s - 1, r - 1)
        * p32(&a, s - r)
        * p32(&b, ell - s - r)
        * p32(&(&one - &a), r)
        * p32(&(&one - &b), r);
    Ok((value, s, r))
}

/// Natural log of a positive rational, accurate for values far outside `f64` range.
pub fn ln_q(v: &Q) -> f64 {
    if !v.is_positive() {
        return f64::NEG_INFINITY;
    }
    let nb = v.numer().bits() as i64;
    let db = v.denom().bits() as i64;
    let shift = nb - db;
    let scaled = if shift >= 0 {
        v / Q::from_integer(num_bigint::BigInt::one() << shift as usize)
    } else {
        v * Q::from_integer(num_bigint::BigInt::one() << (-shift) as usize)
    };
    to_f64(&scaled).ln() + shift as f64 * std::f64::consts::LN_2
}

/// One walk's visit indicators `x_1..x_l`.
pub fn walk_sample(spec: &WalkSpec, seed: u64) -> Vec<u8> {
    let mut rng = seed::rng(seed);
    walk_sample_with(spec, &mut rng)
}

fn walk_sample_with<R: Rng>(spec: &WalkSpec, rng: &mut R) -> Vec<u8> {
    let n = spec.matrix.n();
    let a = spec.matrix.matrix();
    let mut v = rng.random_range(0..n);
    let mut out = Vec::with_capacity(spec.steps as usize);
    out.push(spec.in_target(v) as u8);
    for _ in 1..spec.steps {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = n - 1;
        for j in 0..n {
            acc += a[(v, j)];
            if u < acc {
                next = j;
                break;
            }
        }
        v = next;
        out.push(spec.in_target(v) as u8);
    }
    out
}

/// Monte Carlo `Pr[sum x_i >= threshold]` over walks; trial `i` uses
/// `derive(seed, stream_id("walk_tail"), i)`.
pub fn walk_tail_mc(spec: &WalkSpec, threshold: u64, trials: u64, seed: u64) -> Result<McEstimate> {
    precondition(trials >= 1, || "trials must be >= 1".into())?;
    let stream = seed::stream_id("walk_tail");
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let x = walk_sample(spec, seed::derive(seed, stream, i));
            x.iter().map(|&b| b as u64).sum::<u64>() >= threshold
        })
        .count() as u64;
    Ok(McEstimate::from_counts(hits, trials))
}

/// Exact law of `(x_1..x_l)` for a matrix with rational entries.
pub fn walk_indicator_distribution(spec: &WalkSpec) -> Result<ExactDistribution> {
    let rows = spec.matrix.exact().ok_or_else(|| {
        Error::Precondition("exact walk enumeration needs rational matrix entries".into())
    })?;
    let n = spec.matrix.n();
    let ell = spec.steps;
    let states = (n as u128).saturating_mul(1u128.checked_shl(ell as u32).unwrap_or(u128::MAX));
    Budget::current().check_enumeration("walk states n*2^l", states)?;
    // (vertex, indicator bits) -> prob
    let mut cur: std::collections::BTreeMap<(usize, u64), Q> = Default::default();
    let start = Q::one() / qu(n as u64);
    for v in 0..n {
        cur.insert((v, spec.in_target(v) as u64), start.clone());
    }
    for step in 1..ell {
        let mut next: std::collections::BTreeMap<(usize, u64), Q> = Default::default();
        for ((u, bits), p) in &cur {
            for (v, a) in rows[*u].iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                let b = bits | ((spec.in_target(v) as u64) << step);
                *next.entry((v, b)).or_insert_with(Q::zero) += p * a;
            }
        }
        cur = next;
    }
    let mut by_bits: std::collections::BTreeMap<u64, Q> = Default::default();
    for ((_, bits), p) in cur {
        *by_bits.entry(bits).or_insert_with(Q::zero) += p;
    }
    let support = by_bits
        .into_iter()
        .map(|(bits, prob)| (prob, (0..ell).map(|i| qu((bits >> i) & 1)).collect()))
        .collect();
    ExactDistribution::new(ell as usize, support)
}

/// `floor(min(l/2, (1-lambda)/lambda * eps mu l/2))`, the order at which walk
/// indicators are `eps`-growth bounded without repetition.
pub fn expander_gb_order(lambda: f64, mu: f64, eps: f64, ell: u64) -> u64 {
    let l = ell as f64;
    let r = if lambda == 0.0 {
        f64::INFINITY
    } else {
        (1.0 - lambda) / lambda * eps * mu * l / 2.0
    };
    ((l / 2.0).min(r) + 1e-9).floor().max(0.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    fn spec(lambda: f64, n: usize, mu: f64, ell: u64) -> WalkSpec {
        WalkSpec::with_density(build_jn_construction(lambda, n).unwrap(), mu, ell).unwrap()
    }

    #[test]
    fn spectral_examples() {
        assert!(spectral_lambda(&build_jn_construction(0.0, 5).unwrap()) < 1e-10);
        let id = TransitionMatrix::new(
            (0..4)
                .map(|i| (0..4).map(|j| (i == j) as u8 as f64).collect())
                .collect(),
        )
        .unwrap();
        assert!((spectral_lambda(&id) - 1.0).abs() < 1e-10);
        let k4 = TransitionMatrix::new(
            (0..4)
                .map(|i| {
                    (0..4)
                        .map(|j| if i == j { 0.0 } else { 1.0 / 3.0 })
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        assert!((spectral_lambda(&k4) - 1.0 / 3.0).abs() < 1e-10);
        assert!((spectral_lambda(&build_jn_construction(0.5, 6).unwrap()) - 0.5).abs() < 1e-10);
        assert!(build_jn_construction(1.0, 3).is_err());
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(TransitionMatrix::new(vec![vec![0.5, 0.5], vec![0.4, 0.6]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![0.7, 0.2], vec![0.2, 0.7]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = build_jn_exact(&q(1, 4), 3).unwrap();
        let b = TransitionMatrix::from_json(&a.to_json()).unwrap();
        assert_eq!(a.exact(), b.exact());
        let f = TransitionMatrix::from_json(&json!({"n": 2, "rows": [[0.5, 0.5], [0.5, 0.5]]}))
            .unwrap();
        assert!(f.exact().is_none());
    }

    #[test]
    fn stay_prob_examples() {
        let s = spec(0.5, 4, 0.5, 6);
        assert!((stay_prob_exact(&s, &[1]).unwrap() - 0.5).abs() < 1e-12);
        assert!((stay_prob_exact(&s, &[1, 2]).unwrap() - 0.375).abs() < 1e-12);
        let iid = spec(0.0, 4, 0.5, 6);
        assert!((stay_prob_exact(&iid, &[1, 3, 6]).unwrap() - 0.125).abs() < 1e-12);
        assert!(stay_prob_exact(&s, &[]).is_err());
        assert!(stay_prob_exact(&s, &[7]).is_err());
    }

    #[test]
    fn avg_stay_examples() {
        let s = spec(0.25, 8, 0.5, 12);
        let one = avg_stay_prob(&s, 1, Mode::Exact).unwrap();
        assert!((one.value - 0.5).abs() < 1e-12);
        let two = avg_stay_prob(&s, 2, Mode::Exact).unwrap();
        assert!(hitting_precondition(0.25, 0.5, 0.25, 2, 12).holds);
        assert!(two.value <= hitting_bound(0.5, 0.25, 2.0).unwrap());
        assert_eq!(hitting_bound(0.5, 0.25, 2.0).unwrap(), 0.390625);
        let iid = spec(0.0, 4, 0.5, 8);
        assert!((avg_stay_prob(&iid, 3, Mode::Exact).unwrap().value - 0.125).abs() < 1e-12);
        let mc = avg_stay_prob(
            &s,
            2,
            Mode::MonteCarlo {
                trials: 4000,
                seed: 3,
            },
        )
        .unwrap();
        assert!((mc.value - two.value).abs() <= mc.half_width + 1e-3);
    }

    #[test]
    fn norm_claim_examples() {
        let j = build_jn_construction(0.0, 6).unwrap();
        let c = norm_claim_check(&j, &[0, 1, 2], 1).unwrap();
        assert!((c.lhs - 0.5).abs() < 1e-10 && (c.rhs - 0.5).abs() < 1e-10 && c.holds);
        let id = build_jn_construction(0.0, 1).unwrap();
        assert!(norm_claim_check(&id, &[0], 3).unwrap().holds);
        for seed in 0..20 {
            let a = random_doubly_stochastic(8, seed);
            assert!(norm_claim_check(&a, &[1, 4, 6], 2).unwrap().holds);
        }
    }

    #[test]
    fn hitting_examples() {
        assert_eq!(hitting_bound(0.3, 0.0, 4.0).unwrap(), 0.3f64.powi(4));
        let p = hitting_precondition(0.0, 0.5, 0.0, 6, 12);
        assert!(p.holds && p.limit == 6.0);
        assert!(!hitting_precondition(0.0, 0.5, 0.0, 7, 12).holds);
        assert!((hitting_bound_tight(0.5, 0.5, 1, 4, 2.0).unwrap() - 0.875).abs() < 1e-15);
        assert!((hitting_bound_tight(0.5, 0.0, 3, 12, 2.0).unwrap() - 0.125).abs() < 1e-15);
        assert!(hitting_bound_tight(0.5, 0.5, 3, 12, 3.0).is_err());
    }

    #[test]
    fn walk_tail_examples() {
        let s = spec(0.0, 4, 0.5, 5);
        assert!((walk_tail_count(&s, 4).unwrap() - 6.0 / 32.0).abs() < 1e-12);
        assert_eq!(walk_tail_count(&s, 0).unwrap(), 1.0);
        for &(lambda, n, mu) in &[(0.25, 8, 0.5), (0.5, 4, 0.25), (0.5, 6, 0.5)] {
            let s = spec(lambda, n, mu, 14);
            for t in 0..=15 {
                let full = walk_tail_count(&s, t).unwrap();
                let lumped = walk_tail_two_state(lambda, mu, 14, t).unwrap();
                assert!((full - lumped).abs() < 1e-12, "{lambda} {n} {mu} {t}");
            }
        }
        let exact = walk_tail_two_state_exact(&q(1, 4), &q(1, 2), 14, 11);
        assert!((to_f64(&exact) - walk_tail_two_state(0.25, 0.5, 14, 11).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn main_bound_examples() {
        let z = main_tail_bound(0.5, 0.3, 0.0, 100).unwrap();
        assert!(z.vacuous && (z.value - 2.0).abs() < 1e-15);
        let v = main_tail_bound(0.5, 0.0, 0.5, 240).unwrap();
        assert!((v.value - 2.0 * (-5.0f64 / 3.0).exp()).abs() < 1e-12);
        let s = spec(0.25, 8, 0.5, 14);
        assert!(
            walk_tail_exact(&s, 0.5).unwrap() <= main_tail_bound(0.5, 0.25, 0.5, 14).unwrap().value
        );
        assert!(main_tail_bound(0.5, 0.0, 0.9, 10).is_err());
    }

    #[test]
    fn tight_bound_examples() {
        let t = tight_tail_bound(0.5, 0.5, 0.001, 1_000_000_000).unwrap();
        let expo = t.bound.ln_value - std::f64::consts::LN_2;
        assert!((expo + 56.14).abs() < 0.01, "{expo}");
        assert!(t.remark_valid);
        let v = tight_tail_bound(0.5, 0.999_999, 0.1, 1000).unwrap();
        assert!(v.bound.vacuous);
        assert!(tight_tail_bound(0.5, 0.5, 0.0, 10).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let lb = optimality_lower_bound(0.5, 0.5, 0.2, 20).unwrap();
        let s = spec(0.5, 4, 0.5, 20);
        assert!(lb.value <= walk_tail_exact(&s, 0.2).unwrap());
        let (ex, vs, rs) = optimality_lower_bound_exact(&q(1, 2), &q(1, 2), &q(1, 5), 20).unwrap();
        assert_eq!((vs, rs), (lb.visits, lb.runs));
        assert!(((ln_q(&ex) - lb.ln_value) / lb.ln_value).abs() < 1e-9);
        assert!(optimality_lower_bound(0.5, 0.5, 0.2, 2).is_err());
    }

    #[test]
    fn ln_q_handles_tiny_values() {
        let v = pow_q(&q(1, 3), 2000);
        assert!((ln_q(&v) + 2000.0 * 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn walk_sample_determinism() {
        let s = spec(0.5, 6, 0.5, 10);
        assert_eq!(walk_sample(&s, 4), walk_sample(&s, 4));
        assert_eq!(walk_sample(&s, 4).len(), 10);
    }

    #[test]
    fn walk_indicator_law() {
        let a = build_jn_exact(&q(1, 2), 4).unwrap();
        let s = WalkSpec::new(a, vec![0, 1], 4).unwrap();
        let d = walk_indicator_distribution(&s).unwrap();
        assert_eq!(d.support().len(), 16);
        let t = crate::core_bounds::exact_tail(&d, &qu(3));
        assert_eq!(t, walk_tail_two_state_exact(&q(1, 2), &q(1, 2), 4, 3));
        let f = spec(0.5, 4, 0.5, 4);
        assert!(walk_indicator_distribution(&f).is_err());
    }
}
