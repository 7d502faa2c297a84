//! The experiment registry: each id pairs one bound with one oracle.

use std::any::Any;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use conc_lab_core::core_bounds::{
    check_gb_without_repetition, check_growth_bounded, coordinate_mean, exact_tail,
    markov_tail_bound_exact, tail_threshold, toy_chernoff_bound, wor_tail_bound_exact, Z_99,
};
use conc_lab_core::corpus::{self, Entry};
use conc_lab_core::coupling::{alpha_grid, verify_conditional_claims, verify_coupling};
use conc_lab_core::dist::ExactDistribution;
use conc_lab_core::exact::{
    binom_q, binomial_tail, ceil_nonneg_u64, exp_neg_bounds, format_q, q, qu, to_f64,
};
use conc_lab_core::expander::{
    self, avg_stay_prob, build_jn_construction, hitting_bound, hitting_precondition,
    main_tail_bound, optimality_lower_bound, tight_tail_bound, walk_tail_count,
    walk_tail_two_state, Mode, WalkSpec,
};
use conc_lab_core::polybound::{
    check_almost_independent, es_tail_exact, fixed_point_pairs_polynomial,
    independent_poly_formula, kv_bound_exact, permutation_indicator_distribution, poly_stats,
    poly_stats_for, poly_tail_exact, reverse_chernoff_floor, reverse_chernoff_floor_upper,
    MarginalProfile, PositivePolynomial,
};
use conc_lab_core::seed;
use conc_lab_core::subgraph::{
    copy_polynomial, graph_gb_check, graph_markov_bound, m_star, minimal_premise_delta,
    packing_cap, packing_number, pair_count, subgraph_tail, GraphGbCheck, Pattern,
    RandomGraphModel, TailMode, TailValue,
};
use conc_lab_core::{Error, Q};
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::config::{Kind, ParamSpec, Point, Range, RunConfig};
use crate::report::{sort_rows, Provenance, ReportRow, Verdict};

/// Absolute slack for float comparisons.
pub const FLOAT_TOL: f64 = 1e-9;

pub struct Experiment {
    pub id: &'static str,
    /// The bound and the oracle it is checked against.
    pub pairing: &'static str,
    pub params: &'static [ParamSpec],
    run: fn(&Context, &Point) -> Vec<ReportRow>,
}

/// Shared state for one run.
pub struct Context {
    pub seed: u64,
    pub trials: u64,
    memo: Mutex<HashMap<String, Arc<dyn Any + Send + Sync>>>,
}

impl Context {
    pub fn new(seed: u64, trials: u64) -> Self {
        Context {
            seed,
            trials,
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// Caches a value by key; concurrent misses may compute it twice.
    fn memo<T: Clone + Send + Sync + 'static>(
        &self,
        key: String,
        f: impl FnOnce() -> Result<T, Error>,
    ) -> Result<T, Error> {
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return Ok(v.downcast_ref::<T>().expect("memo keys are typed").clone());
        }
        let v = f()?;
        self.memo.lock().unwrap().insert(key, Arc::new(v.clone()));
        Ok(v)
    }

    /// Seed for the point with parameter snapshot `params`:
    /// `derive(seed, stream_id(experiment), stream_id(params))`.
    pub fn point_seed(&self, experiment: &str, params: &Map<String, Value>) -> u64 {
        let snapshot = serde_json::to_string(params).expect("maps serialize");
        seed::derive(
            self.seed,
            seed::stream_id(experiment),
            seed::stream_id(&snapshot),
        )
    }
}

const fn param(
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    help: &'static str,
) -> ParamSpec {
    ParamSpec {
        name,
        kind,
        default,
        help,
        range: None,
        list: true,
    }
}

const fn ranged(mut p: ParamSpec, range: Range) -> ParamSpec {
    p.range = Some(range);
    p
}

const fn single(mut p: ParamSpec) -> ParamSpec {
    p.list = false;
    p
}

const NONNEG: Range = Range {
    hint: "value >= 0",
    check: |v| !v.is_negative(),
};
const POSITIVE: Range = Range {
    hint: "value > 0",
    check: |v| v.is_positive(),
};
const AT_LEAST_ONE: Range = Range {
    hint: "value >= 1",
    check: |v| v >= &Q::one(),
};
const EPS_MAIN: Range = Range {
    hint: "ε ∈ [0, 4/5]",
    check: |v| !v.is_negative() && v <= &q(4, 5),
};
const EPS_HALF: Range = Range {
    hint: "ε ∈ (0, 1/2]",
    check: |v| v.is_positive() && v <= &q(1, 2),
};
const EPS_TOY: Range = Range {
    hint: "ε ∈ [0, 1/2]",
    check: |v| !v.is_negative() && v <= &q(1, 2),
};
const LAMBDA: Range = Range {
    hint: "λ ∈ [0, 1)",
    check: |v| !v.is_negative() && v < &Q::one(),
};
const LAMBDA_OPEN: Range = Range {
    hint: "λ ∈ (0, 1)",
    check: |v| v.is_positive() && v < &Q::one(),
};
const OPEN_UNIT: Range = Range {
    hint: "value ∈ (0, 1)",
    check: |v| v.is_positive() && v < &Q::one(),
};
const UNIT: Range = Range {
    hint: "value ∈ [0, 1]",
    check: |v| !v.is_negative() && v <= &Q::one(),
};
const HALF_UNIT: Range = Range {
    hint: "p ∈ (0, 1/2]",
    check: |v| v.is_positive() && v <= &q(1, 2),
};

const MODES: &[&str] = &["exact", "mc"];

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment {
        id: "gb-check",
        pairing: "growth-bounded Markov bound ((1+δ)/(1+ε))^m vs exact tail Pr[Σx ≥ μn(1+ε)] on the standard corpus",
        params: &[
            single(param("dist", Kind::Text, Some("all"), "corpus entry name, index, or `all`")),
            ranged(param("delta", Kind::Rational, Some("0,1/2,1"), "growth slack δ"), NONNEG),
            ranged(param("m", Kind::Integer, Some("1,2,3,4"), "moment order"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/5,2/5,3/5,4/5,1"), "deviation ε"), NONNEG),
        ],
        run: gb_check,
    },
    Experiment {
        id: "toy-chernoff",
        pairing: "exp(-ε²n/6) vs exact Pr[Bin(n,1/2) ≥ n(1+ε)/2]",
        params: &[
            ranged(param("n", Kind::Integer, Some("20"), "number of fair coins"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/2"), "deviation ε"), EPS_TOY),
        ],
        run: toy_chernoff,
    },
    Experiment {
        id: "wor-bound",
        pairing: "((1+δ)/(1+(1-c)ε))^m, m = ⌊cεμn⌋, vs exact tail on binary corpus entries growth bounded without repetition",
        params: &[
            single(param("dist", Kind::Text, Some("all"), "corpus entry name, index, or `all`")),
            ranged(param("delta", Kind::Rational, Some("0,1/2,1"), "growth slack δ"), NONNEG),
            ranged(param("c", Kind::Rational, Some("1/2"), "split constant c"), UNIT),
            ranged(param("eps", Kind::Rational, Some("1/2,4/5,1"), "deviation ε"), NONNEG),
        ],
        run: wor_bound,
    },
    Experiment {
        id: "coupling-verify",
        pairing: "zero discrepancy vs exhaustive gap laws: conditional claims of D_{m,l} and the dominating i.i.d. coupling",
        params: &[
            ranged(param("m", Kind::Integer, Some("3"), "number of sampled positions"), AT_LEAST_ONE),
            ranged(param("l", Kind::Integer, Some("8"), "horizon"), AT_LEAST_ONE),
        ],
        run: coupling_verify,
    },
    Experiment {
        id: "expander-hitting",
        pairing: "(μ(1+ε))^m vs average stay probability over uniform m-subsets of steps (exact or Monte Carlo)",
        params: &[
            ranged(param("lambda", Kind::Rational, Some("0,1/4,1/2"), "second eigenvalue λ"), LAMBDA),
            ranged(param("n", Kind::Integer, Some("4"), "vertices of the expander"), AT_LEAST_ONE),
            ranged(param("mu", Kind::Rational, Some("1/2"), "target density μ"), OPEN_UNIT),
            ranged(param("l", Kind::Integer, Some("8"), "walk length"), AT_LEAST_ONE),
            ranged(param("m", Kind::Integer, Some("1,2,3,4"), "subset size"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/2"), "deviation ε"), NONNEG),
            param("mode", Kind::Choice(MODES), Some("exact"), "exact enumeration or Monte Carlo"),
        ],
        run: expander_hitting,
    },
    Experiment {
        id: "expander-tail",
        pairing: "2exp(-(1-λ)ε²μl/18) vs exact walk tail by two-state DP",
        params: &[
            ranged(param("lambda", Kind::Rational, Some("1/4,1/2"), "second eigenvalue λ"), LAMBDA),
            ranged(param("mu", Kind::Rational, Some("1/4,1/2"), "target density μ"), OPEN_UNIT),
            ranged(param("steps", Kind::Integer, Some("16,32,64"), "walk length l"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/10,1/4,1/2,4/5"), "deviation ε"), EPS_MAIN),
        ],
        run: expander_tail,
    },
    Experiment {
        id: "expander-tight",
        pairing: "2exp(-(1-λ)/(1+λ)·μ/(1-μ)·ε²l/2 + c_μ ε³ln(1/ε) l) vs exact walk tail by two-state DP",
        params: &[
            ranged(param("lambda", Kind::Rational, Some("1/4,1/2"), "second eigenvalue λ"), LAMBDA),
            ranged(param("mu", Kind::Rational, Some("1/4,1/2"), "target density μ"), OPEN_UNIT),
            ranged(param("steps", Kind::Integer, Some("16,32,64"), "walk length l"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/10,1/4,1/2"), "deviation ε"), EPS_HALF),
        ],
        run: expander_tight,
    },
    Experiment {
        id: "expander-lower",
        pairing: "alternating-runs lower bound vs exact walk tail by full DP on the J_n construction",
        params: &[
            ranged(param("lambda", Kind::Rational, Some("1/2"), "second eigenvalue λ"), LAMBDA_OPEN),
            ranged(param("n", Kind::Integer, Some("4"), "vertices of the expander"), AT_LEAST_ONE),
            ranged(param("mu", Kind::Rational, Some("1/2"), "target density μ"), OPEN_UNIT),
            ranged(param("steps", Kind::Integer, Some("20"), "walk length l"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/5"), "deviation ε"), POSITIVE),
        ],
        run: expander_lower,
    },
    Experiment {
        id: "poly-bound",
        pairing: "exact: KV bound with certified (δ, km) vs exact tail of copy counts in G(n,p); mc: independent-input bound 2exp(-ε/6k·(εμ/μ')^(1/k)) vs Monte Carlo tail",
        params: &[
            single(param("pattern", Kind::Text, Some("k3"), "builtin pattern or inline JSON")),
            ranged(param("n", Kind::Integer, Some("5"), "graph vertices"), AT_LEAST_ONE),
            ranged(param("p", Kind::Rational, Some("3/10,1/2"), "edge probability"), OPEN_UNIT),
            ranged(param("eps", Kind::Rational, Some("1/4,1/2,1,2"), "deviation ε"), POSITIVE),
            ranged(param("m_max", Kind::Integer, Some("3"), "largest moment order (exact mode)"), AT_LEAST_ONE),
            param("mode", Kind::Choice(MODES), Some("exact"), "exact enumeration or Monte Carlo"),
        ],
        run: poly_bound,
    },
    Experiment {
        id: "es-tightness",
        pairing: "reverse Chernoff floor exp(-9ε²pl) vs exact Pr[e_k ≥ C(s,k)], checked equal to Pr[Bin(l,p) ≥ s]",
        params: &[
            ranged(param("l", Kind::Integer, Some("40,80,120,160,200"), "number of variables"), AT_LEAST_ONE),
            ranged(param("p", Kind::Rational, Some("1/4,1/2"), "variable bias"), HALF_UNIT),
            ranged(param("eps", Kind::Rational, Some("1/4,1/2"), "deviation ε"), EPS_HALF),
            ranged(param("k", Kind::Integer, Some("1,2,3"), "degree of e_k"), AT_LEAST_ONE),
        ],
        run: es_tightness,
    },
    Experiment {
        id: "perm-ai",
        pairing: "KV bound with (δ, km)-almost independence of permutation indicators vs exact tail of the fixed-pairs polynomial",
        params: &[
            ranged(param("n", Kind::Integer, Some("4"), "permutation size N (at most 6)"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/4,1/2,1,2"), "deviation ε"), POSITIVE),
            ranged(param("m_max", Kind::Integer, Some("2"), "largest moment order"), AT_LEAST_ONE),
        ],
        run: perm_ai,
    },
    Experiment {
        id: "graph-mstar",
        pairing: "packing cap n^{v_H} p^{e_H} vs brute-force N(n, M*, H) for every sub-pattern H",
        params: &[
            single(param("pattern", Kind::Text, Some("k3"), "builtin pattern or inline JSON")),
            ranged(param("n", Kind::Integer, Some("5"), "host vertices"), AT_LEAST_ONE),
            ranged(param("p", Kind::Rational, Some("3/10"), "edge density p"), POSITIVE),
        ],
        run: graph_mstar,
    },
    Experiment {
        id: "graph-tail",
        pairing: "((1+δ'')/(1+ε))^m from the packing and almost-independence premises vs exact copy-count tail in G(n,p)",
        params: &[
            single(param("pattern", Kind::Text, Some("k3"), "builtin pattern or inline JSON")),
            ranged(param("n", Kind::Integer, Some("4,5"), "graph vertices (at most 5)"), AT_LEAST_ONE),
            ranged(param("p", Kind::Rational, Some("1/2"), "edge probability"), OPEN_UNIT),
            ranged(param("m", Kind::Integer, Some("1,2,3"), "moment order"), AT_LEAST_ONE),
            ranged(param("eps", Kind::Rational, Some("1/2,1,2,4"), "deviation ε"), POSITIVE),
            ranged(param("delta_scale", Kind::Rational, Some("1"), "multiple of the least premise δ"), AT_LEAST_ONE),
            ranged(param("delta_prime", Kind::Rational, Some("0"), "almost-independence slack δ'"), NONNEG),
        ],
        run: graph_tail,
    },
];

pub fn find(id: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.id == id)
}

/// Runs every grid point on a pool of `config.jobs` threads; rows come back
/// sorted by (experiment, parameter snapshot).
pub fn run_experiment(config: &RunConfig) -> Result<Vec<ReportRow>, String> {
    let exp =
        find(&config.command).ok_or_else(|| format!("unknown experiment {:?}", config.command))?;
    let ctx = Context::new(config.seed, config.trials);
    let grid = config.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| format!("cannot start thread pool: {e}"))?;
    let mut rows: Vec<ReportRow> = pool.install(|| {
        grid.par_iter()
            .flat_map_iter(|pt| {
                let start = Instant::now();
                let mut rows = (exp.run)(&ctx, pt);
                let ms = if config.timing {
                    start.elapsed().as_millis() as u64
                } else {
                    0
                };
                for r in &mut rows {
                    r.ms = ms;
                }
                rows
            })
            .collect()
    });
    sort_rows(&mut rows);
    Ok(rows)
}

fn labeled(
    mut params: Map<String, Value>,
    bound: Provenance,
    oracle: Provenance,
) -> Map<String, Value> {
    params.insert("bound_kind".into(), Value::from(bound.as_str()));
    params.insert("oracle_kind".into(), Value::from(oracle.as_str()));
    params
}

fn row(
    exp: &str,
    params: Map<String, Value>,
    bound: f64,
    oracle: f64,
    oracle_ci: Option<f64>,
    verdict: Verdict,
) -> ReportRow {
    ReportRow {
        bound: Some(bound),
        oracle: Some(oracle),
        oracle_ci,
        verdict,
        ..ReportRow::new(exp, params)
    }
}

fn premise_fails(
    exp: &str,
    mut params: Map<String, Value>,
    reason: impl Into<String>,
) -> ReportRow {
    params.insert("reason".into(), Value::from(reason.into()));
    ReportRow::new(exp, params)
}

fn failure(exp: &str, mut params: Map<String, Value>, e: Error) -> ReportRow {
    match e {
        Error::Precondition(msg) => premise_fails(exp, params, msg),
        other => {
            params.insert("error".into(), Value::from(other.to_string()));
            ReportRow {
                verdict: Verdict::Error,
                ..ReportRow::new(exp, params)
            }
        }
    }
}

/// Runs `f`, turning an error into a single failure row.
fn guarded(
    exp: &str,
    pt: &Point,
    f: impl FnOnce() -> Result<Vec<ReportRow>, Error>,
) -> Vec<ReportRow> {
    f().unwrap_or_else(|e| vec![failure(exp, pt.to_json(), e)])
}

fn upper(bound: f64, oracle: f64) -> Verdict {
    if oracle <= bound + FLOAT_TOL {
        Verdict::Dominates
    } else {
        Verdict::Violated
    }
}

fn upper_exact(bound: &Q, oracle: &Q) -> Verdict {
    if oracle <= bound {
        Verdict::Dominates
    } else {
        Verdict::Violated
    }
}

fn qjson(v: &Q) -> Value {
    Value::from(format_q(v))
}

fn standard_corpus() -> Result<&'static [Entry], Error> {
    static CORPUS: OnceLock<Result<Vec<Entry>, Error>> = OnceLock::new();
    CORPUS
        .get_or_init(corpus::standard)
        .as_deref()
        .map_err(Clone::clone)
}

fn select_corpus(sel: &str) -> Result<Vec<&'static Entry>, Error> {
    let all = standard_corpus()?;
    if sel == "all" {
        return Ok(all.iter().collect());
    }
    if let Ok(i) = sel.parse::<usize>() {
        return all.get(i).map(|e| vec![e]).ok_or_else(|| {
            Error::Validation(format!("corpus index {i} out of range 0..{}", all.len()))
        });
    }
    all.iter()
        .find(|e| e.name == sel)
        .map(|e| vec![e])
        .ok_or_else(|| Error::Validation(format!("no corpus entry named {sel:?}")))
}

fn gb_check(ctx: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "gb-check";
    guarded(ID, pt, || {
        let (delta, eps) = (pt.q("delta"), pt.q("eps"));
        let m =
            u32::try_from(pt.int("m")).map_err(|_| Error::Precondition("m too large".into()))?;
        let mut rows = Vec::new();
        for e in select_corpus(pt.text("dist"))? {
            let mut params = labeled(
                pt.to_json(),
                Provenance::ExactRational,
                Provenance::ExactRational,
            );
            params.insert("dist".into(), Value::from(e.name.clone()));
            let key = format!("gb|{}|{}|{m}", e.name, format_q(&delta));
            let check = match ctx.memo(key, || check_growth_bounded(&e.dist, &delta, m)) {
                Ok(c) => c,
                Err(err) => {
                    rows.push(failure(ID, params, err));
                    continue;
                }
            };
            params.insert("ratio".into(), qjson(&check.ratio));
            if !check.holds {
                rows.push(premise_fails(ID, params, "not (δ, m)-growth bounded"));
                continue;
            }
            let mu = coordinate_mean(&e.dist)?;
            let t = tail_threshold(&mu, e.dist.n() as u64, &eps);
            let tail = exact_tail(&e.dist, &t);
            let bound = markov_tail_bound_exact(&delta, &eps, m)?;
            let verdict = upper_exact(&bound, &tail);
            rows.push(row(
                ID,
                params,
                to_f64(&bound),
                to_f64(&tail),
                None,
                verdict,
            ));
        }
        Ok(rows)
    })
}

fn toy_chernoff(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "toy-chernoff";
    guarded(ID, pt, || {
        let n = pt.int("n");
        let eps = pt.q("eps");
        let half = q(1, 2);
        let s = ceil_nonneg_u64(&(qu(n) * (Q::one() + &eps) * &half));
        let tail = binomial_tail(n, &half, s);
        let bound = toy_chernoff_bound(n, pt.f("eps"))?;
        // certified enclosure of exp(-eps^2 n / 6)
        let (lo, hi) = exp_neg_bounds(&(&eps * &eps * qu(n) / qu(6)));
        let verdict = if tail <= lo {
            Verdict::Dominates
        } else if tail > hi {
            Verdict::Violated
        } else {
            upper(bound, to_f64(&tail))
        };
        let mut params = labeled(pt.to_json(), Provenance::Float, Provenance::ExactRational);
        params.insert("threshold".into(), Value::from(s));
        params.insert("tail".into(), qjson(&tail));
        Ok(vec![row(ID, params, bound, to_f64(&tail), None, verdict)])
    })
}

fn wor_bound(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "wor-bound";
    guarded(ID, pt, || {
        let (delta, eps, c) = (pt.q("delta"), pt.q("eps"), pt.q("c"));
        let mut rows = Vec::new();
        for e in select_corpus(pt.text("dist"))? {
            let mut params = labeled(
                pt.to_json(),
                Provenance::ExactRational,
                Provenance::ExactRational,
            );
            params.insert("dist".into(), Value::from(e.name.clone()));
            if !e.dist.is_binary() {
                rows.push(premise_fails(ID, params, "outcomes are not binary"));
                continue;
            }
            let n = e.dist.n() as u64;
            let mu = coordinate_mean(&e.dist)?;
            if !mu.is_positive() {
                rows.push(premise_fails(ID, params, "mean is zero"));
                continue;
            }
            let (bound, m) = wor_tail_bound_exact(&delta, &eps, &c, &mu, n)?;
            params.insert("m".into(), Value::from(m));
            if m > n {
                rows.push(premise_fails(
                    ID,
                    params,
                    format!("m = {m} exceeds n = {n}"),
                ));
                continue;
            }
            if m >= 1 {
                let check = check_gb_without_repetition(&e.dist, &delta, m as u32)?;
                params.insert("ratio".into(), qjson(&check.ratio));
                if !check.holds {
                    rows.push(premise_fails(
                        ID,
                        params,
                        "not (δ, m)-growth bounded without repetition",
                    ));
                    continue;
                }
            } else {
                params.insert("vacuous".into(), Value::from(true));
            }
            let tail = exact_tail(&e.dist, &tail_threshold(&mu, n, &eps));
            let verdict = upper_exact(&bound, &tail);
            rows.push(row(
                ID,
                params,
                to_f64(&bound),
                to_f64(&tail),
                None,
                verdict,
            ));
        }
        Ok(rows)
    })
}

fn coupling_verify(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "coupling-verify";
    guarded(ID, pt, || {
        let (m, ell) = (pt.int("m"), pt.int("l"));
        if m > ell {
            return Err(Error::Precondition(format!(
                "need m <= l, got m={m}, l={ell}"
            )));
        }
        let mut worst: Vec<(&'static str, Q, u64)> = Vec::new();
        for k in 1..=ell + 1 - m {
            for c in verify_conditional_claims(m, ell, k)? {
                match worst.iter_mut().find(|(name, _, _)| *name == c.claim) {
                    Some(w) => {
                        w.2 += 1;
                        if c.max_discrepancy > w.1 {
                            w.1 = c.max_discrepancy;
                        }
                    }
                    None => worst.push((c.claim, c.max_discrepancy, 1)),
                }
            }
        }
        let mut rows = Vec::new();
        for (claim, disc, ks) in worst {
            let mut params = labeled(
                pt.to_json(),
                Provenance::ExactRational,
                Provenance::ExactRational,
            );
            params.insert("claim".into(), Value::from(claim));
            params.insert("k_values".into(), Value::from(ks));
            params.insert("max_discrepancy".into(), qjson(&disc));
            let verdict = if disc.is_zero() {
                Verdict::Exact
            } else {
                Verdict::Violated
            };
            rows.push(row(ID, params, 0.0, to_f64(&disc), None, verdict));
        }
        for alpha in alpha_grid(m, ell) {
            let mut params = labeled(
                pt.to_json(),
                Provenance::ExactRational,
                Provenance::ExactRational,
            );
            params.insert("claim".into(), Value::from("coupling"));
            params.insert("alpha".into(), qjson(&alpha));
            let check = match verify_coupling(m, m, ell, &alpha) {
                Ok(c) => c,
                Err(e) => {
                    rows.push(failure(ID, params, e));
                    continue;
                }
            };
            let disc = (&check.d_marginal_discrepancy)
                .max(&check.e_product_discrepancy)
                .clone();
            params.insert("beta".into(), qjson(&check.params.beta));
            params.insert("dominated".into(), Value::from(check.dominated));
            params.insert("max_e_mass".into(), qjson(&check.max_e_mass));
            params.insert("max_discrepancy".into(), qjson(&disc));
            let verdict = if check.exact() {
                Verdict::Exact
            } else {
                Verdict::Violated
            };
            rows.push(row(ID, params, 0.0, to_f64(&disc), None, verdict));
        }
        Ok(rows)
    })
}

fn expander_hitting(ctx: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "expander-hitting";
    guarded(ID, pt, || {
        let (lambda, mu, eps) = (pt.f("lambda"), pt.f("mu"), pt.f("eps"));
        let (n, ell, m) = (pt.int("n") as usize, pt.int("l"), pt.int("m"));
        let mc = pt.text("mode") == "mc";
        let oracle_kind = if mc {
            Provenance::McEstimate
        } else {
            Provenance::Float
        };
        let mut params = labeled(pt.to_json(), Provenance::Float, oracle_kind);
        let pre = hitting_precondition(lambda, mu, eps, m, ell);
        params.insert("m_limit".into(), Value::from(pre.limit));
        if !pre.holds || m > ell {
            return Ok(vec![premise_fails(
                ID,
                params,
                "m <= min(1/2, (1-λ)/λ·εμ/2)·l fails",
            )]);
        }
        let spec = WalkSpec::with_density(build_jn_construction(lambda, n)?, mu, ell)?;
        let bound = hitting_bound(mu, eps, m as f64)?;
        if mc {
            let mode = Mode::MonteCarlo {
                trials: ctx.trials,
                seed: ctx.point_seed(ID, &params),
            };
            let est = avg_stay_prob(&spec, m, mode)?;
            let sigma = est.half_width / Z_99;
            let verdict = upper(bound, est.value - 3.0 * sigma);
            params.insert("trials".into(), Value::from(ctx.trials));
            return Ok(vec![row(
                ID,
                params,
                bound,
                est.value,
                Some(est.half_width),
                verdict,
            )]);
        }
        let key = format!("hit|{lambda}|{n}|{mu}|{ell}|{m}");
        let avg = ctx.memo(key, || Ok(avg_stay_prob(&spec, m, Mode::Exact)?.value))?;
        Ok(vec![row(ID, params, bound, avg, None, upper(bound, avg))])
    })
}

fn expander_tail(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "expander-tail";
    guarded(ID, pt, || {
        let (lambda, mu, eps, ell) = (pt.f("lambda"), pt.f("mu"), pt.f("eps"), pt.int("steps"));
        let t = expander::tail_threshold(mu, ell, eps);
        let tail = walk_tail_two_state(lambda, mu, ell, t)?;
        let b = main_tail_bound(mu, lambda, eps, ell)?;
        let mut params = labeled(pt.to_json(), Provenance::Float, Provenance::Float);
        params.insert("threshold".into(), Value::from(t));
        params.insert("ln_bound".into(), Value::from(b.ln_value));
        Ok(vec![row(
            ID,
            params,
            b.value,
            tail,
            None,
            upper(b.value, tail),
        )])
    })
}

fn expander_tight(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "expander-tight";
    guarded(ID, pt, || {
        let (lambda, mu, eps, ell) = (pt.f("lambda"), pt.f("mu"), pt.f("eps"), pt.int("steps"));
        let t = expander::tail_threshold(mu, ell, eps);
        let tail = walk_tail_two_state(lambda, mu, ell, t)?;
        let b = tight_tail_bound(mu, lambda, eps, ell)?;
        let mut params = labeled(pt.to_json(), Provenance::Float, Provenance::Float);
        params.insert("threshold".into(), Value::from(t));
        params.insert("ln_bound".into(), Value::from(b.bound.ln_value));
        params.insert("c_mu".into(), Value::from(b.c_mu));
        params.insert("remark_range".into(), Value::from(b.remark_valid));
        Ok(vec![row(
            ID,
            params,
            b.bound.value,
            tail,
            None,
            upper(b.bound.value, tail),
        )])
    })
}

fn expander_lower(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "expander-lower";
    guarded(ID, pt, || {
        let (lambda, mu, eps, ell) = (pt.f("lambda"), pt.f("mu"), pt.f("eps"), pt.int("steps"));
        let lb = optimality_lower_bound(lambda, mu, eps, ell)?;
        let spec = WalkSpec::with_density(
            build_jn_construction(lambda, pt.int("n") as usize)?,
            mu,
            ell,
        )?;
        let tail = walk_tail_count(&spec, lb.visits)?;
        let mut params = labeled(pt.to_json(), Provenance::Float, Provenance::Float);
        params.insert("visits".into(), Value::from(lb.visits));
        params.insert("runs".into(), Value::from(lb.runs));
        params.insert("rounded".into(), Value::from(lb.rounded));
        params.insert("ln_bound".into(), Value::from(lb.ln_value));
        let verdict = if lb.value <= tail + FLOAT_TOL {
            Verdict::LowerBounds
        } else {
            Verdict::Violated
        };
        Ok(vec![row(ID, params, lb.value, tail, None, verdict)])
    })
}

/// Candidate slacks tried, in order, when certifying almost independence.
const DELTA_LADDER: [(i64, i64); 5] = [(0, 1), (1, 2), (1, 1), (2, 1), (4, 1)];

/// KV bound at every order `m <= m_max` with a certified `δ`, against the exact tail.
fn kv_rows(
    ctx: &Context,
    id: &str,
    key: &str,
    pt: &Point,
    poly: &PositivePolynomial,
    dist: &ExactDistribution,
) -> Result<Vec<ReportRow>, Error> {
    let eps = pt.q("eps");
    let k = poly.degree() as u64;
    let stats = ctx.memo(format!("stats|{key}"), || poly_stats_for(poly, dist))?;
    let t = &stats.mu0_star * (Q::one() + &eps);
    let tail = poly_tail_exact(poly, dist, &t)?;
    let mut rows = Vec::new();
    for m in 1..=pt.int("m_max") {
        let mut params = labeled(
            pt.to_json(),
            Provenance::ExactRational,
            Provenance::ExactRational,
        );
        params.insert("m".into(), Value::from(m));
        params.insert("k".into(), Value::from(k));
        let order = (k * m) as usize;
        let delta = ctx.memo(format!("ai|{key}|{order}"), || {
            for (a, b) in DELTA_LADDER {
                let d = q(a, b);
                if check_almost_independent(dist, &d, order)?.holds {
                    return Ok(Some(d));
                }
            }
            Ok(None)
        });
        let delta = match delta {
            Ok(Some(d)) => d,
            Ok(None) => {
                rows.push(premise_fails(
                    id,
                    params,
                    "no δ <= 4 certifies (δ, km)-almost independence",
                ));
                continue;
            }
            Err(e) => {
                rows.push(failure(id, params, e));
                continue;
            }
        };
        params.insert("delta".into(), qjson(&delta));
        let bound = kv_bound_exact(&stats, &delta, &eps, m, k)?;
        let verdict = upper_exact(&bound, &tail);
        rows.push(row(
            id,
            params,
            to_f64(&bound),
            to_f64(&tail),
            None,
            verdict,
        ));
    }
    Ok(rows)
}

fn poly_bound(ctx: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "poly-bound";
    guarded(ID, pt, || {
        let g = Pattern::parse(pt.text("pattern"))?;
        let n = pt.int("n") as usize;
        let p = pt.q("p");
        let poly = ctx.memo(format!("copies|{}|{n}", pt.text("pattern")), || {
            copy_polynomial(&g, n)
        })?;
        let model = RandomGraphModel::gnp(n, p.clone())?;
        if pt.text("mode") == "exact" {
            let key = format!("{}|{n}|{}", pt.text("pattern"), format_q(&p));
            let dist = ctx.memo(format!("gnp|{key}"), || model.distribution())?;
            return kv_rows(ctx, ID, &key, pt, &poly, &dist);
        }
        let k = poly.degree() as u32;
        let stats = ctx.memo(
            format!("iid-stats|{}|{n}|{}", pt.text("pattern"), format_q(&p)),
            || {
                poly_stats(
                    &poly,
                    &MarginalProfile::iid_bernoulli(poly.variable_count(), &p),
                )
            },
        )?;
        let (mu, mu_prime) = (to_f64(&stats.mu0_star), to_f64(&stats.mu_prime));
        let eps = pt.f("eps");
        let b = independent_poly_formula(mu, mu_prime, eps, k)?;
        let mut params = labeled(pt.to_json(), Provenance::Float, Provenance::McEstimate);
        params.insert("mu".into(), Value::from(mu));
        params.insert("mu_prime".into(), Value::from(mu_prime));
        params.insert("proven_range".into(), Value::from(eps <= 0.5));
        params.insert("trials".into(), Value::from(ctx.trials));
        let t = &stats.mu0_star * (Q::one() + pt.q("eps"));
        let mode = TailMode::MonteCarlo {
            trials: ctx.trials,
            seed: ctx.point_seed(ID, &params),
        };
        let TailValue::Estimate(est) = subgraph_tail(&model, &g, &t, mode)? else {
            unreachable!("Monte Carlo mode returns an estimate")
        };
        let verdict = upper(b.formula, est.estimate - 3.0 * est.std_error());
        params.insert("sigma".into(), Value::from(est.std_error()));
        Ok(vec![row(
            ID,
            params,
            b.formula,
            est.estimate,
            Some(est.half_width),
            verdict,
        )])
    })
}

fn es_tightness(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "es-tightness";
    guarded(ID, pt, || {
        let (ell, k) = (pt.int("l"), pt.int("k"));
        let (p, eps) = (pt.q("p"), pt.q("eps"));
        let floor = reverse_chernoff_floor(pt.f("p"), ell, pt.f("eps"))?;
        let floor_hi = reverse_chernoff_floor_upper(&p, ell, &eps)?;
        let s = ceil_nonneg_u64(&(&p * qu(ell) * (Q::one() + &eps)));
        let oracle = es_tail_exact(ell, &p, k, &binom_q(s, k))?;
        let chain = oracle == binomial_tail(ell, &p, s);
        let mut params = labeled(pt.to_json(), Provenance::Float, Provenance::ExactRational);
        params.insert("s".into(), Value::from(s));
        params.insert("chain_equal".into(), Value::from(chain));
        let verdict = if chain && oracle >= floor_hi {
            Verdict::LowerBounds
        } else {
            Verdict::Violated
        };
        Ok(vec![row(ID, params, floor, to_f64(&oracle), None, verdict)])
    })
}

fn perm_ai(ctx: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "perm-ai";
    guarded(ID, pt, || {
        let n = pt.int("n") as usize;
        let dist = ctx.memo(format!("perm|{n}"), || {
            permutation_indicator_distribution(n)
        })?;
        let poly = fixed_point_pairs_polynomial(n)?;
        kv_rows(ctx, ID, &format!("perm|{n}"), pt, &poly, &dist)
    })
}

fn graph_mstar(_: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "graph-mstar";
    guarded(ID, pt, || {
        let g = Pattern::parse(pt.text("pattern"))?;
        let n = pt.int("n") as usize;
        let p = pt.q("p");
        let ms = m_star(n, &p, &g)?;
        let subs = g.subpatterns()?;
        let maximal = ms.value as usize >= pair_count(n)
            || subs.iter().try_fold(false, |acc, h| {
                Ok::<_, Error>(
                    acc || qu(packing_number(n, ms.value as usize + 1, h)?) > packing_cap(h, n, &p),
                )
            })?;
        let mut rows = Vec::new();
        for h in subs {
            let cap = packing_cap(&h, n, &p);
            let packed = qu(packing_number(n, ms.value as usize, &h)?);
            let mut params = labeled(
                pt.to_json(),
                Provenance::ExactRational,
                Provenance::ExactRational,
            );
            params.insert("m_star".into(), Value::from(ms.value));
            params.insert("subpattern".into(), h.to_json());
            params.insert("maximal".into(), Value::from(maximal));
            let verdict = if maximal {
                upper_exact(&cap, &packed)
            } else {
                Verdict::Violated
            };
            rows.push(row(
                ID,
                params,
                to_f64(&cap),
                to_f64(&packed),
                None,
                verdict,
            ));
        }
        Ok(rows)
    })
}

fn graph_tail(ctx: &Context, pt: &Point) -> Vec<ReportRow> {
    const ID: &str = "graph-tail";
    guarded(ID, pt, || {
        let g = Pattern::parse(pt.text("pattern"))?;
        let n = pt.int("n") as usize;
        let (p, eps, scale, dp) = (
            pt.q("p"),
            pt.q("eps"),
            pt.q("delta_scale"),
            pt.q("delta_prime"),
        );
        let m =
            u32::try_from(pt.int("m")).map_err(|_| Error::Precondition("m too large".into()))?;
        let model = RandomGraphModel::gnp(n, p.clone())?;
        let key = format!(
            "graph|{}|{n}|{}|{m}|{}|{}",
            pt.text("pattern"),
            format_q(&p),
            format_q(&scale),
            format_q(&dp)
        );
        let check: GraphGbCheck = ctx.memo(key, || {
            let delta = minimal_premise_delta(&g, n, &p, m as usize)? * &scale;
            graph_gb_check(&g, &model, &p, &delta, &dp, m)
        })?;
        let mut params = labeled(
            pt.to_json(),
            Provenance::ExactRational,
            Provenance::ExactRational,
        );
        params.insert(
            "delta_double_prime".into(),
            qjson(&check.delta_double_prime),
        );
        if !check.certified() {
            let reason = if !check.premise {
                "packing premise fails"
            } else if !check.almost_independent.holds {
                "edge law is not (δ', e_G m)-almost independent"
            } else {
                "copy indicators are not (δ'', m)-growth bounded"
            };
            return Ok(vec![premise_fails(ID, params, reason)]);
        }
        let bound = graph_markov_bound(&check, &eps, m)?;
        let t = &check.mu * (Q::one() + &eps);
        let TailValue::Exact(tail) = subgraph_tail(&model, &g, &t, TailMode::Exact)? else {
            unreachable!("exact mode returns an exact value")
        };
        Ok(vec![row(
            ID,
            params,
            to_f64(&bound),
            to_f64(&tail),
            None,
            upper_exact(&bound, &tail),
        )])
    })
}
