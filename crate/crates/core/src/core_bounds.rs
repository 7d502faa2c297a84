//! Growth boundedness and the Markov-style tail bounds it implies.
//!
//! A distribution over `x in R_{>=0}^n` with per-coordinate mean `mu` is
//! `(delta, m)`-growth bounded when `E[(sum x_i)^m] <= (mu n)^m (1+delta)^m`;
//! Markov's inequality on the `m`-th power then gives
//! `Pr[sum x_i >= mu n (1+eps)] <= ((1+delta)/(1+eps))^m`.
//! The "without repetition" variant replaces the i.i.d. index tuple by a
//! uniform `m`-subset of coordinates and applies to binary distributions.
//!
//! Checks and oracles here are exact; closed-form bounds are `f64` and are
//! returned raw (they may exceed 1).

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dist::{ExactDistribution, SampledDistribution};
use crate::error::{precondition, Error, Result};
use crate::exact::{binom_q, floor_nonneg_u64, format_q, pow_q, qu, Q};
use crate::seed;

/// `mu := E_{x, i <- [n]}[x_i]`.
pub fn coordinate_mean(dist: &ExactDistribution) -> Result<Q> {
    if dist.support().is_empty() {
        return Err(Error::Malformed("empty support".into()));
    }
    let total: Q = dist
        .support()
        .iter()
        .map(|a| &a.prob * a.x.iter().sum::<Q>())
        .sum();
    Ok(total / qu(dist.n() as u64))
}

/// Bits allowed in a single exact moment term before we refuse.
const MOMENT_BIT_LIMIT: u64 = 1 << 22;

/// `E[(sum x_i)^m]`, exact.
pub fn moment_power_sum(dist: &ExactDistribution, m: u32) -> Result<Q> {
    precondition(m >= 1, || "moment order m must be >= 1".into())?;
    let mut total = Q::zero();
    for a in dist.support() {
        let s: Q = a.x.iter().sum();
        let bits = s.numer().bits().max(s.denom().bits()) * m as u64;
        if bits > MOMENT_BIT_LIMIT {
            return Err(Error::Resource {
                what: format!("exact moment of order {m} (sum ~2^{})", s.numer().bits()),
                needed: bits as u128,
                budget: MOMENT_BIT_LIMIT as u128,
                partial: None,
            });
        }
        total += &a.prob * pow_q(&s, m);
    }
    Ok(total)
}

/// Outcome of a growth-boundedness check: the normalised moment `ratio`
/// (compared against `threshold = (1+delta)^m`) is reported either way.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    pub holds: bool,
    pub ratio: Q,
    pub threshold: Q,
}

impl GrowthCheck {
    fn new(ratio: Q, delta: &Q, m: u32) -> Self {
        let threshold = pow_q(&(Q::one() + delta), m);
        GrowthCheck {
            holds: ratio <= threshold,
            ratio,
            threshold,
        }
    }
}

fn positive_mean(dist: &ExactDistribution) -> Result<Q> {
    let mu = coordinate_mean(dist)?;
    precondition(mu.is_positive(), || "mean mu must be > 0".into())?;
    Ok(mu)
}

/// Checks `E[(sum x)^m] <= (mu n)^m (1+delta)^m`; ratio is `E[(sum x)^m]/(mu n)^m`.
pub fn check_growth_bounded(dist: &ExactDistribution, delta: &Q, m: u32) -> Result<GrowthCheck> {
    precondition(m >= 1, || "m must be a positive integer".into())?;
    precondition(delta >= &-Q::one(), || "delta must be >= -1".into())?;
    let mu = positive_mean(dist)?;
    let scale = pow_q(&(mu * qu(dist.n() as u64)), m);
    let moment = moment_power_sum(dist, m)?;
    Ok(GrowthCheck::new(moment / scale, delta, m))
}

/// `E_{x, (i_1..i_m) <- [n]^m}[prod_j x_{i_j}]`, summed over index multisets
/// with multinomial weights. For binary `x` this is the probability that a
/// uniform index tuple lands on ones only.
pub fn random_tuple_product_moment(dist: &ExactDistribution, m: u32) -> Result<Q> {
    precondition(m >= 1, || "m must be >= 1".into())?;
    let n = dist.n();
    let count = binom_q((n + m as usize - 1) as u64, m as u64);
    crate::budget::Budget::current().check_enumeration(
        "index multisets",
        count.to_integer().to_u128().unwrap_or(u128::MAX),
    )?;
    let fact = |k: usize| (1..=k as u64).fold(BigInt::one(), |a, i| a * i);
    let mut weights: Vec<(Vec<usize>, BigInt)> = Vec::new();
    let mut cur = Vec::with_capacity(m as usize);
    for_each_multiset(n, m as usize, 0, &mut cur, &mut |idx| {
        let mut w = fact(idx.len());
        let mut i = 0;
        while i < idx.len() {
            let c = idx[i..].iter().take_while(|&&x| x == idx[i]).count();
            w /= fact(c);
            i += c;
        }
        weights.push((idx.to_vec(), w));
    });
    let total: Q = match dist.binary_masks() {
        Some(masks) => {
            // common denominator keeps the inner sums in integers
            let den = masks.iter().fold(BigInt::one(), |d, (p, _)| {
                num_integer::Integer::lcm(&d, p.denom())
            });
            let nums: Vec<(BigInt, u64)> = masks
                .iter()
                .map(|(p, mask)| (p.numer() * (&den / p.denom()), *mask))
                .collect();
            let s: BigInt = weights
                .par_iter()
                .map(|(idx, w)| {
                    let bits = idx.iter().fold(0u64, |b, &j| b | 1 << j);
                    let hit: BigInt = nums
                        .iter()
                        .filter(|(_, x)| x & bits == bits)
                        .map(|(a, _)| a)
                        .sum();
                    hit * w
                })
                .sum();
            Q::new(s, den)
        }
        None => weights
            .par_iter()
            .map(|(idx, w)| dist.expect_product(idx) * Q::from_integer(w.clone()))
            .sum(),
    };
    Ok(total / pow_q(&qu(n as u64), m))
}

fn for_each_multiset(
    n: usize,
    m: usize,
    start: usize,
    cur: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if cur.len() == m {
        f(cur);
        return;
    }
    for j in start..n {
        cur.push(j);
        for_each_multiset(n, m, j, cur, f);
        cur.pop();
    }
}

/// `Pr_{x, M <- C([n], m)}[x_i = 1 for all i in M]`, exact.
///
/// Each outcome with `s` ones contains `C(s, m)` all-ones subsets out of `C(n, m)`.
pub fn prob_all_ones_on_random_subset(dist: &ExactDistribution, m: u32) -> Result<Q> {
    precondition(dist.is_binary(), || "outcomes must be binary".into())?;
    let n = dist.n() as u64;
    precondition(m >= 1 && (m as u64) <= n, || {
        format!("need 1 <= m <= n, got m={m}, n={n}")
    })?;
    let total = binom_q(n, m as u64);
    let mut acc = Q::zero();
    for a in dist.support() {
        let ones = a.x.iter().filter(|v| v.is_one()).count() as u64;
        acc += &a.prob * binom_q(ones, m as u64);
    }
    Ok(acc / total)
}

/// Growth boundedness without repetition:
/// `Pr_{x, M}[all ones on M] <= mu^m (1+delta)^m`; ratio is the probability over `mu^m`.
pub fn check_gb_without_repetition(
    dist: &ExactDistribution,
    delta: &Q,
    m: u32,
) -> Result<GrowthCheck> {
    precondition(dist.is_binary(), || "outcomes must be binary".into())?;
    precondition(delta >= &-Q::one(), || "delta must be >= -1".into())?;
    let mu = positive_mean(dist)?;
    let pr = prob_all_ones_on_random_subset(dist, m)?;
    Ok(GrowthCheck::new(pr / pow_q(&mu, m), delta, m))
}

/// `((1+delta)/(1+eps))^m`, not clamped.
pub fn markov_tail_bound(delta: f64, eps: f64, m: f64) -> Result<f64> {
    precondition(eps >= 0.0, || format!("eps must be >= 0, got {eps}"))?;
    precondition(delta >= -1.0, || {
        format!("delta must be >= -1, got {delta}")
    })?;
    precondition(m > 0.0, || format!("m must be > 0, got {m}"))?;
    Ok(((1.0 + delta) / (1.0 + eps)).powf(m))
}

/// Exact form of [`markov_tail_bound`] for integer `m`.
pub fn markov_tail_bound_exact(delta: &Q, eps: &Q, m: u32) -> Result<Q> {
    precondition(!eps.is_negative(), || "eps must be >= 0".into())?;
    precondition(delta >= &-Q::one(), || "delta must be >= -1".into())?;
    precondition(m >= 1, || "m must be >= 1".into())?;
    Ok(pow_q(&((Q::one() + delta) / (Q::one() + eps)), m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorollaryCase {
    /// `eps <= 1/2`: `exp(-eps m / 2)`.
    SmallEps,
    /// `eps >= 1/2`: `(4/5)^m`.
    MidEps,
    /// `eps >= 3`: `2^-m`.
    LargeEps,
    /// Without repetition, `eps <= 4/5`: `exp(-eps m / 3)`.
    WithoutRepetition,
}

impl CorollaryCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "small-eps" => Ok(Self::SmallEps),
            "mid-eps" => Ok(Self::MidEps),
            "large-eps" => Ok(Self::LargeEps),
            "wor" => Ok(Self::WithoutRepetition),
            other => Err(Error::Parse(format!(
                "unknown corollary case {other:?} (small-eps | mid-eps | large-eps | wor)"
            ))),
        }
    }

    pub fn valid_range(self) -> &'static str {
        match self {
            Self::SmallEps => "eps in [0, 1/2]",
            Self::MidEps => "eps >= 1/2",
            Self::LargeEps => "eps >= 3",
            Self::WithoutRepetition => "eps in [0, 4/5]",
        }
    }

    fn admits(self, eps: f64) -> bool {
        eps >= 0.0
            && match self {
                Self::SmallEps => eps <= 0.5,
                Self::MidEps => eps >= 0.5,
                Self::LargeEps => eps >= 3.0,
                Self::WithoutRepetition => eps <= 0.8,
            }
    }
}

/// Simplified forms of the master bound for `(eps/3, m)`-growth bounded input.
pub fn corollary_bound(eps: f64, m: f64, case: CorollaryCase) -> Result<f64> {
    precondition(case.admits(eps), || {
        format!("{case:?} requires {}, got eps = {eps}", case.valid_range())
    })?;
    precondition(m > 0.0, || format!("m must be > 0, got {m}"))?;
    Ok(match case {
        CorollaryCase::SmallEps => (-eps * m / 2.0).exp(),
        CorollaryCase::MidEps => 0.8f64.powf(m),
        CorollaryCase::LargeEps => 0.5f64.powf(m),
        CorollaryCase::WithoutRepetition => (-eps * m / 3.0).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorBound {
    pub value: f64,
    /// `floor(c eps mu n)`.
    pub m: u64,
    /// Set when `m = 0`; the bound is then the trivial 1.
    pub vacuous: bool,
}

/// Guards floors of products that should be integral from float round-off.
const FLOOR_SLACK: f64 = 1e-9;

/// `((1+delta)/(1+(1-c)eps))^m` with `m := floor(c eps mu n)`.
pub fn wor_tail_bound(delta: f64, eps: f64, c: f64, mu: f64, n: u64) -> Result<WorBound> {
    precondition((0.0..=1.0).contains(&c), || {
        format!("c must lie in [0,1], got {c}")
    })?;
    precondition(eps >= 0.0, || format!("eps must be >= 0, got {eps}"))?;
    precondition(mu > 0.0, || format!("mu must be > 0, got {mu}"))?;
    precondition(delta >= -1.0, || {
        format!("delta must be >= -1, got {delta}")
    })?;
    let m = (c * eps * mu * n as f64 + FLOOR_SLACK).floor().max(0.0) as u64;
    if m == 0 {
        return Ok(WorBound {
            value: 1.0,
            m,
            vacuous: true,
        });
    }
    let value = ((1.0 + delta) / (1.0 + (1.0 - c) * eps)).powi(m as i32);
    Ok(WorBound {
        value,
        m,
        vacuous: false,
    })
}

/// Exact form of [`wor_tail_bound`]: returns the bound and `m`.
pub fn wor_tail_bound_exact(delta: &Q, eps: &Q, c: &Q, mu: &Q, n: u64) -> Result<(Q, u64)> {
    precondition(!c.is_negative() && c <= &Q::one(), || {
        "c must lie in [0,1]".into()
    })?;
    precondition(!eps.is_negative(), || "eps must be >= 0".into())?;
    precondition(mu.is_positive(), || "mu must be > 0".into())?;
    let m = floor_nonneg_u64(&(c * eps * mu * qu(n)));
    if m == 0 {
        return Ok((Q::one(), 0));
    }
    let ratio = (Q::one() + delta) / (Q::one() + (Q::one() - c) * eps);
    let m32 = u32::try_from(m).map_err(|_| Error::Precondition("m too large".into()))?;
    Ok((pow_q(&ratio, m32), m))
}

/// `Pr[sum x_i >= t]`, exact.
pub fn exact_tail(dist: &ExactDistribution, t: &Q) -> Q {
    dist.support()
        .iter()
        .filter(|a| &a.x.iter().sum::<Q>() >= t)
        .map(|a| a.prob.clone())
        .sum()
}

/// `exp(-eps^2 n / 6)` for fair coins, `eps in [0, 1/2]`.
pub fn toy_chernoff_bound(n: u64, eps: f64) -> Result<f64> {
    precondition((0.0..=0.5).contains(&eps), || {
        format!("eps must lie in [0, 1/2], got {eps}")
    })?;
    Ok((-eps * eps * n as f64 / 6.0).exp())
}

/// `exp(-eps^2 mu n / 6)` for independent Bernoulli(`mu`) coins.
pub fn bernoulli_chernoff_bound(mu: f64, n: u64, eps: f64) -> Result<f64> {
    precondition((0.0..=0.5).contains(&eps), || {
        format!("eps must lie in [0, 1/2], got {eps}")
    })?;
    precondition(mu > 0.0 && mu <= 1.0, || {
        format!("mu must lie in (0,1], got {mu}")
    })?;
    Ok((-eps * eps * mu * n as f64 / 6.0).exp())
}

/// Exact rational threshold `mu n (1+eps)`.
pub fn tail_threshold(mu: &Q, n: u64, eps: &Q) -> Q {
    mu * qu(n) * (Q::one() + eps)
}

/// Monte Carlo tail estimate with a 99% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub half_width: f64,
    pub hits: u64,
    pub trials: u64,
}

pub const Z_99: f64 = 2.575_829_303_548_901;

impl McEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        McEstimate {
            estimate: p,
            half_width: Z_99 * (p * (1.0 - p) / trials as f64).sqrt(),
            hits,
            trials,
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// `Pr[sum x_i >= threshold]` by sampling; trial `i` uses
/// [`seed::derive`]`(seed, stream_id("monte_carlo_tail"), i)`.
pub fn monte_carlo_tail(
    dist: &SampledDistribution,
    threshold: f64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    precondition(trials >= 1, || "trials must be >= 1".into())?;
    let stream = seed::stream_id("monte_carlo_tail");
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let x = dist.sample(seed::derive(seed, stream, i));
            x.iter().sum::<f64>() >= threshold
        })
        .count() as u64;
    Ok(McEstimate::from_counts(hits, trials))
}

/// Smallest integer `m` with `m >= eps mu n / 3`, the order at which
/// independent Bernoulli(`mu`) coins are `(eps/3, m)`-growth bounded.
pub fn bernoulli_gb_order(eps: &Q, mu: &Q, n: u64) -> u32 {
    let v = eps * mu * qu(n) / qu(3);
    let c: BigInt = v.ceil().to_integer();
    c.to_u32().unwrap_or(u32::MAX).max(1)
}

pub fn describe(check: &GrowthCheck) -> String {
    format!(
        "ratio {} vs threshold {} -> {}",
        format_q(&check.ratio),
        format_q(&check.threshold),
        if check.holds { "holds" } else { "fails" }
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{binomial_tail, q, qi, to_f64};

    fn fair(n: usize) -> ExactDistribution {
        ExactDistribution::iid_bernoulli(n, &q(1, 2)).unwrap()
    }

    #[test]
    fn coordinate_mean_examples() {
        let ones = ExactDistribution::constant(3, qi(1)).unwrap();
        assert_eq!(coordinate_mean(&ones).unwrap(), qi(1));
        assert_eq!(coordinate_mean(&fair(4)).unwrap(), q(1, 2));
        let pm = ExactDistribution::point_mass(vec![qi(0), qi(2)]).unwrap();
        assert_eq!(coordinate_mean(&pm).unwrap(), qi(1));
    }

    #[test]
    fn moment_examples() {
        let ones = ExactDistribution::constant(3, qi(1)).unwrap();
        assert_eq!(moment_power_sum(&ones, 2).unwrap(), qi(9));
        assert_eq!(moment_power_sum(&fair(4), 2).unwrap(), qi(5));
        let dup = ExactDistribution::correlated_coins(2, &q(1, 2)).unwrap();
        assert_eq!(moment_power_sum(&dup, 2).unwrap(), qi(2));
        assert!(moment_power_sum(&dup, 0).is_err());
    }

    #[test]
    fn growth_bounded_threshold() {
        // threshold sqrt(5/4) - 1 ~ 0.1180
        assert!(
            check_growth_bounded(&fair(4), &q(12, 100), 2)
                .unwrap()
                .holds
        );
        let fail = check_growth_bounded(&fair(4), &q(10, 100), 2).unwrap();
        assert!(!fail.holds);
        assert_eq!(fail.ratio, q(5, 4));
        let ones = ExactDistribution::constant(3, qi(1)).unwrap();
        for m in 1..6 {
            assert!(check_growth_bounded(&ones, &Q::zero(), m).unwrap().holds);
        }
        let zeros = ExactDistribution::constant(2, qi(0)).unwrap();
        assert!(matches!(
            check_growth_bounded(&zeros, &Q::zero(), 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn without_repetition_examples() {
        for m in 1..=5 {
            let c = check_gb_without_repetition(&fair(5), &Q::zero(), m).unwrap();
            assert!(c.holds);
            assert_eq!(c.ratio, Q::one());
        }
        let corr = ExactDistribution::correlated_coins(4, &q(1, 2)).unwrap();
        assert!(
            check_gb_without_repetition(&corr, &q(42, 100), 2)
                .unwrap()
                .holds
        );
        assert!(
            !check_gb_without_repetition(&corr, &q(41, 100), 2)
                .unwrap()
                .holds
        );
        let nb = ExactDistribution::point_mass(vec![qi(2), qi(0)]).unwrap();
        assert!(check_gb_without_repetition(&nb, &Q::zero(), 1).is_err());
        let mixed = ExactDistribution::mixture(&[
            (q(1, 3), fair(3)),
            (
                q(2, 3),
                ExactDistribution::correlated_coins(3, &q(1, 4)).unwrap(),
            ),
        ])
        .unwrap();
        assert!(
            check_gb_without_repetition(&mixed, &Q::zero(), 1)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn markov_examples() {
        assert_eq!(markov_tail_bound(0.3, 0.3, 7.0).unwrap(), 1.0);
        assert!((markov_tail_bound(1.0, 3.0, 4.0).unwrap() - 0.0625).abs() < 1e-15);
        assert!((markov_tail_bound(0.2, 0.5, 10.0).unwrap() - 0.107_374_182_4).abs() < 1e-9);
        assert!(markov_tail_bound(0.0, -0.1, 1.0).is_err());
        assert!(markov_tail_bound(-1.5, 0.1, 1.0).is_err());
        assert!(markov_tail_bound(0.0, 0.1, 0.0).is_err());
        assert_eq!(
            markov_tail_bound_exact(&qi(1), &qi(3), 4).unwrap(),
            q(1, 16)
        );
    }

    #[test]
    fn corollary_examples() {
        let v = corollary_bound(0.5, 10.0, CorollaryCase::SmallEps).unwrap();
        assert!((v - (-2.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.082_085).abs() < 1e-6);
        assert_eq!(
            corollary_bound(3.0, 4.0, CorollaryCase::LargeEps).unwrap(),
            1.0 / 16.0
        );
        let w = corollary_bound(0.6, 10.0, CorollaryCase::WithoutRepetition).unwrap();
        assert!((w - 0.135_335).abs() < 1e-6);
        let err = corollary_bound(0.6, 1.0, CorollaryCase::SmallEps).unwrap_err();
        assert!(err.to_string().contains("[0, 1/2]"));
        assert!(corollary_bound(2.0, 1.0, CorollaryCase::LargeEps).is_err());
        assert!(corollary_bound(0.4, 1.0, CorollaryCase::MidEps).is_err());
        assert!(corollary_bound(0.9, 1.0, CorollaryCase::WithoutRepetition).is_err());
        assert_eq!(
            CorollaryCase::parse("wor").unwrap(),
            CorollaryCase::WithoutRepetition
        );
    }

    #[test]
    fn wor_examples() {
        let b = wor_tail_bound(0.0, 0.7, 1.0, 0.5, 40).unwrap();
        assert_eq!(b.value, 1.0);
        let z = wor_tail_bound(0.3, 0.0, 0.5, 0.5, 40).unwrap();
        assert!(z.vacuous && z.m == 0 && z.value == 1.0);
        let w = wor_tail_bound(0.1, 0.5, 0.3, 0.5, 40).unwrap();
        assert_eq!(w.m, 3);
        assert!((w.value - (1.1f64 / 1.35).powi(3)).abs() < 1e-15);
        assert!((w.value - 0.5410).abs() < 1e-4);
        let (e, m) = wor_tail_bound_exact(&q(1, 10), &q(1, 2), &q(3, 10), &q(1, 2), 40).unwrap();
        assert_eq!(m, 3);
        assert!((to_f64(&e) - w.value).abs() < 1e-15);
        assert!(wor_tail_bound(0.1, 0.5, 1.5, 0.5, 40).is_err());
    }

    #[test]
    fn exact_tail_examples() {
        assert_eq!(exact_tail(&fair(4), &qi(3)), q(5, 16));
        assert_eq!(exact_tail(&fair(4), &qi(0)), Q::one());
        let ones = ExactDistribution::constant(3, qi(1)).unwrap();
        assert_eq!(exact_tail(&ones, &qi(4)), Q::zero());
    }

    #[test]
    fn chernoff_examples() {
        assert!((toy_chernoff_bound(60, 0.5).unwrap() - (-2.5f64).exp()).abs() < 1e-15);
        assert_eq!(toy_chernoff_bound(60, 0.0).unwrap(), 1.0);
        assert!(toy_chernoff_bound(60, 0.6).is_err());
        let tail = binomial_tail(20, &q(1, 2), 15);
        assert_eq!(tail, q(21700, 1 << 20));
        assert!(to_f64(&tail) <= toy_chernoff_bound(20, 0.5).unwrap());
        assert!((toy_chernoff_bound(20, 0.5).unwrap() - 0.4346).abs() < 1e-4);

        assert!((bernoulli_chernoff_bound(0.5, 60, 0.5).unwrap() - (-1.25f64).exp()).abs() < 1e-15);
        assert_eq!(bernoulli_chernoff_bound(0.3, 60, 0.0).unwrap(), 1.0);
        assert!(bernoulli_chernoff_bound(0.0, 60, 0.1).is_err());
        // Bernoulli(0.3), n = 20, eps = 1/2: threshold 9
        let t = binomial_tail(20, &q(3, 10), 9);
        assert!(to_f64(&t) <= (-0.25f64).exp());
        assert!((bernoulli_chernoff_bound(0.3, 20, 0.5).unwrap() - (-0.25f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_examples() {
        let d = SampledDistribution::iid_bernoulli(20, 0.5);
        let zero = monte_carlo_tail(&d, 0.0, 1000, 1).unwrap();
        assert_eq!((zero.estimate, zero.half_width), (1.0, 0.0));
        let a = monte_carlo_tail(&d, 15.0, 20_000, 11).unwrap();
        let b = monte_carlo_tail(&d, 15.0, 20_000, 11).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo_tail(&d, 1.0, 0, 1).is_err());
    }

    #[test]
    fn bernoulli_order() {
        assert_eq!(bernoulli_gb_order(&q(1, 2), &q(1, 2), 12), 1);
        assert_eq!(bernoulli_gb_order(&q(1, 2), &q(1, 2), 13), 2);
    }
}
