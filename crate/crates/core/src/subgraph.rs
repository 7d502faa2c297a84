//! Subgraph counts in random graphs: the copy-count polynomial, packing
//! numbers `N(n, m, H)`, `M*_G(n, p)` and the resulting upper-tail bounds.
//!
//! Edges of an `n`-vertex host are indexed lexicographically by [`pair_index`].

use std::collections::BTreeSet;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::core_bounds::{check_growth_bounded, markov_tail_bound_exact, GrowthCheck, McEstimate};
use crate::dist::ExactDistribution;
use crate::error::{precondition, Error, Result};
use crate::exact::{binom, format_q, pow_q, qu, to_f64, Q};
use crate::polybound::{
    check_almost_independent, monomial_indicator_distribution, AiCheck, PositivePolynomial,
};
use crate::seed;

/// Position of the unordered pair `{u, v}` among the `C(n, 2)` host edges.
pub fn pair_index(n: usize, u: usize, v: usize) -> usize {
    let (a, b) = (u.min(v), u.max(v));
    debug_assert!(a != b && b < n);
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// The pair at position `i`, inverse of [`pair_index`].
pub fn pair_at(n: usize, i: usize) -> (usize, usize) {
    let mut rest = i;
    for a in 0..n {
        let row = n - a - 1;
        if rest < row {
            return (a, a + 1 + rest);
        }
        rest -= row;
    }
    panic!("pair index {i} out of range for n = {n}");
}

/// A small graph identified with its edge set; vertices `0..v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl Pattern {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        precondition(!edges.is_empty(), || {
            "pattern needs at least one edge".into()
        })?;
        let mut norm = BTreeSet::new();
        for &(u, v) in &edges {
            if u == v {
                return Err(Error::Malformed(format!("self-loop at vertex {u}")));
            }
            if u >= vertices || v >= vertices {
                return Err(Error::Malformed(format!(
                    "edge ({u},{v}) outside 0..{vertices}"
                )));
            }
            if !norm.insert((u.min(v), u.max(v))) {
                return Err(Error::Malformed(format!("duplicate edge ({u},{v})")));
            }
        }
        let p = Pattern {
            vertices,
            edges: norm.into_iter().collect(),
        };
        if let Some(iso) = (0..vertices).find(|&x| p.degree(x) == 0) {
            return Err(Error::Malformed(format!("isolated vertex {iso}")));
        }
        Ok(p)
    }

    pub fn complete(k: usize) -> Result<Self> {
        let edges = (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .collect();
        Self::new(k, edges)
    }

    pub fn path(k: usize) -> Result<Self> {
        Self::new(k, (1..k).map(|i| (i - 1, i)).collect())
    }

    pub fn cycle(k: usize) -> Result<Self> {
        precondition(k >= 3, || "cycles need at least 3 vertices".into())?;
        Self::new(k, (0..k).map(|i| (i, (i + 1) % k)).collect())
    }

    /// `k2`, `k3`, `k4`, `p3` (3-vertex path), `c4`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "k2" => Self::complete(2),
            "k3" => Self::complete(3),
            "k4" => Self::complete(4),
            "p3" => Self::path(3),
            "c4" => Self::cycle(4),
            _ => Err(Error::Malformed(format!(
                "unknown pattern '{name}' (built-ins: k2, k3, k4, p3, c4)"
            ))),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn degree(&self, x: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| u == x || v == x)
            .count()
    }

    /// Number of vertex permutations preserving the edge set.
    pub fn automorphism_count(&self) -> Result<u64> {
        precondition(self.vertices <= 8, || {
            format!("automorphism search needs v <= 8, got {}", self.vertices)
        })?;
        let set: BTreeSet<(usize, usize)> = self.edges.iter().copied().collect();
        let mut count = 0u64;
        for_each_permutation(self.vertices, |perm| {
            if self.edges.iter().all(|&(u, v)| {
                let (a, b) = (perm[u], perm[v]);
                set.contains(&(a.min(b), a.max(b)))
            }) {
                count += 1;
            }
        });
        Ok(count)
    }

    /// Lexicographically least relabelled edge list; equal iff isomorphic.
    pub fn canonical_form(&self) -> Vec<(usize, usize)> {
        let mut best: Option<Vec<(usize, usize)>> = None;
        for_each_permutation(self.vertices, |perm| {
            let mut e: Vec<(usize, usize)> = self
                .edges
                .iter()
                .map(|&(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v])))
                .collect();
            e.sort_unstable();
            if best.as_ref().is_none_or(|b| &e < b) {
                best = Some(e);
            }
        });
        best.unwrap_or_default()
    }

    pub fn is_isomorphic(&self, other: &Pattern) -> bool {
        self.vertices == other.vertices
            && self.edges.len() == other.edges.len()
            && self.canonical_form() == other.canonical_form()
    }

    /// Nonempty edge subsets with isolated vertices dropped, one per isomorphism class.
    pub fn subpatterns(&self) -> Result<Vec<Pattern>> {
        precondition(self.edges.len() <= 16, || {
            "too many pattern edges for subset enumeration".into()
        })?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for mask in 1u32..(1 << self.edges.len()) {
            let chosen: Vec<(usize, usize)> = (0..self.edges.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| self.edges[i])
                .collect();
            let mut used: Vec<usize> = chosen.iter().flat_map(|&(u, v)| [u, v]).collect();
            used.sort_unstable();
            used.dedup();
            let relabel = |x: usize| used.binary_search(&x).expect("used vertex");
            let h = Pattern::new(
                used.len(),
                chosen
                    .iter()
                    .map(|&(u, v)| (relabel(u), relabel(v)))
                    .collect(),
            )?;
            if seen.insert((h.vertices, h.canonical_form())) {
                out.push(h);
            }
        }
        out.sort_by_key(|h| (h.edge_count(), h.vertices, h.canonical_form()));
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "vertices": self.vertices,
            "edges": self.edges.iter().map(|&(u, v)| json!([u, v])).collect::<Vec<_>>(),
        })
    }

    /// `{vertices, edges: [[u, v]]}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let vertices =
            v.get("vertices").and_then(Value::as_u64).ok_or_else(|| {
                Error::Malformed("pattern JSON needs integer field vertices".into())
            })? as usize;
        let edges = v
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Malformed("pattern JSON needs an edges array".into()))?
            .iter()
            .map(|e| match e.as_array().map(|a| a.as_slice()) {
                Some([a, b]) => match (a.as_u64(), b.as_u64()) {
                    (Some(a), Some(b)) => Ok((a as usize, b as usize)),
                    _ => Err(Error::Malformed(format!("bad edge {e}"))),
                },
                _ => Err(Error::Malformed(format!("bad edge {e}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vertices, edges)
    }

    /// A built-in name or inline JSON.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.starts_with('{') {
            let v: Value =
                serde_json::from_str(t).map_err(|e| Error::Parse(format!("pattern JSON: {e}")))?;
            Self::from_json(&v)
        } else {
            Self::builtin(&t.to_ascii_lowercase())
        }
    }
}

fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(p: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
        if i == p.len() {
            f(p);
            return;
        }
        for j in i..p.len() {
            p.swap(i, j);
            rec(p, i + 1, f);
            p.swap(i, j);
        }
    }
    let mut p: Vec<usize> = (0..n).collect();
    rec(&mut p, 0, &mut f);
}

fn falling(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul(n.saturating_sub(i) as u128)
    })
}

/// All copies of `g` in `K_n`, each as a sorted list of host edge indices.
pub fn copies_in_complete(g: &Pattern, n: usize) -> Result<Vec<Vec<usize>>> {
    precondition(n >= g.vertices, || {
        format!("host needs n >= v_G = {}, got {n}", g.vertices)
    })?;
    let injections = falling(n as u64, g.vertices as u64);
    Budget::current().check_enumeration("pattern embeddings", injections)?;
    let mut seen = BTreeSet::new();
    let mut img = vec![usize::MAX; g.vertices];
    let mut used = vec![false; n];
    embed(g, n, 0, &mut img, &mut used, &mut seen);
    Ok(seen.into_iter().collect())
}

fn embed(
    g: &Pattern,
    n: usize,
    i: usize,
    img: &mut Vec<usize>,
    used: &mut Vec<bool>,
    out: &mut BTreeSet<Vec<usize>>,
) {
    if i == g.vertices {
        let mut e: Vec<usize> = g
            .edges
            .iter()
            .map(|&(u, v)| pair_index(n, img[u], img[v]))
            .collect();
        e.sort_unstable();
        out.insert(e);
        return;
    }
    for x in 0..n {
        if !used[x] {
            used[x] = true;
            img[i] = x;
            embed(g, n, i + 1, img, used, out);
            used[x] = false;
        }
    }
}

/// `q(e) = sum over copies E' of G in K_n of prod_{uv in E'} e_uv`.
pub fn copy_polynomial(g: &Pattern, n: usize) -> Result<PositivePolynomial> {
    let copies = copies_in_complete(g, n)?;
    PositivePolynomial::new(
        pair_count(n),
        copies.into_iter().map(|c| (Q::one(), c)).collect(),
    )
}

/// `prod_{i < v_G} (n - i) / d`.
pub fn copies_in_complete_count(g: &Pattern, n: usize) -> Result<u128> {
    Ok(falling(n as u64, g.vertices as u64) / g.automorphism_count()? as u128)
}

/// Indicator of each host pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeAssignment {
    n: usize,
    present: Vec<bool>,
}

impl EdgeAssignment {
    pub fn empty(n: usize) -> Self {
        EdgeAssignment {
            n,
            present: vec![false; pair_count(n)],
        }
    }

    pub fn complete(n: usize) -> Self {
        EdgeAssignment {
            n,
            present: vec![true; pair_count(n)],
        }
    }

    pub fn from_indicators(n: usize, present: Vec<bool>) -> Result<Self> {
        precondition(present.len() == pair_count(n), || {
            format!(
                "expected {} pair indicators, got {}",
                pair_count(n),
                present.len()
            )
        })?;
        Ok(EdgeAssignment { n, present })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut e = Self::empty(n);
        for &(u, v) in edges {
            precondition(u != v && u < n && v < n, || {
                format!("edge ({u},{v}) invalid for n = {n}")
            })?;
            e.present[pair_index(n, u, v)] = true;
        }
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has(&self, u: usize, v: usize) -> bool {
        self.present[pair_index(self.n, u, v)]
    }

    pub fn indicators(&self) -> &[bool] {
        &self.present
    }

    pub fn edge_count(&self) -> usize {
        self.present.iter().filter(|&&b| b).count()
    }
}

/// Edge subsets of the host isomorphic to `g` with every edge present.
pub fn count_copies(g: &Pattern, host: &EdgeAssignment) -> Result<u64> {
    let copies = copies_in_complete(g, host.n)?;
    Ok(copies
        .iter()
        .filter(|c| c.iter().all(|&i| host.present[i]))
        .count() as u64)
}

fn to_masks(copies: &[Vec<usize>]) -> Vec<u64> {
    copies
        .iter()
        .map(|c| c.iter().fold(0u64, |m, &i| m | 1 << i))
        .collect()
}

fn count_in_mask(masks: &[u64], host: u64) -> u64 {
    masks.iter().filter(|&&m| m & host == m).count() as u64
}

fn next_combination(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

/// Colex-first `m` edges: packs edges into as few vertices as possible.
fn colex_mask(n: usize, m: usize) -> u64 {
    let mut order: Vec<usize> = (0..pair_count(n)).collect();
    order.sort_by_key(|&i| {
        let (a, b) = pair_at(n, i);
        (b, a)
    });
    order.iter().take(m).fold(0u64, |acc, &i| acc | 1 << i)
}

/// `N(n, m, H)`: the most copies of `H` in any host with `n` vertices and `m` edges.
///
/// Exhaustive over edge subsets. When that exceeds the enumeration budget the
/// error carries the copy count of a dense colex host as a lower bound.
pub fn packing_number(n: usize, m: usize, h: &Pattern) -> Result<u64> {
    let pairs = pair_count(n);
    precondition(m <= pairs, || format!("m = {m} exceeds C(n,2) = {pairs}"))?;
    precondition(n >= h.vertices, || {
        format!("need n >= v_H = {}, got {n}", h.vertices)
    })?;
    precondition(pairs <= 63, || {
        format!("host with {pairs} pairs is too large for packing search")
    })?;
    if m < h.edge_count() {
        return Ok(0);
    }
    let masks = to_masks(&copies_in_complete(h, n)?);
    let subsets = binom(pairs as u64, m as u64).to_u128().unwrap_or(u128::MAX);
    let budget = Budget::current();
    if subsets > budget.enumeration {
        return Err(Error::Resource {
            what: format!("edge subsets for N({n}, {m}, H)"),
            needed: subsets,
            budget: budget.enumeration,
            partial: Some(count_in_mask(&masks, colex_mask(n, m))),
        });
    }
    if m == pairs {
        return Ok(masks.len() as u64);
    }
    let end = 1u64 << pairs;
    let mut x = (1u64 << m) - 1;
    let mut best = 0;
    while x < end {
        best = best.max(count_in_mask(&masks, x));
        x = next_combination(x);
    }
    Ok(best)
}

/// `N(n, m, H)` for every `m` in `0..=C(n,2)`, from one pass over all hosts.
pub fn packing_profile(n: usize, h: &Pattern) -> Result<Vec<u64>> {
    let pairs = pair_count(n);
    precondition(n >= h.vertices, || {
        format!("need n >= v_H = {}, got {n}", h.vertices)
    })?;
    precondition(pairs <= 40, || {
        format!("host with {pairs} pairs is too large for a packing profile")
    })?;
    Budget::current().check_enumeration("host graphs for packing profile", 1u128 << pairs)?;
    let masks = to_masks(&copies_in_complete(h, n)?);
    let best = (0u64..1 << pairs)
        .into_par_iter()
        .fold(
            || vec![0u64; pairs + 1],
            |mut acc, x| {
                let k = x.count_ones() as usize;
                acc[k] = acc[k].max(count_in_mask(&masks, x));
                acc
            },
        )
        .reduce(
            || vec![0u64; pairs + 1],
            |a, b| a.iter().zip(&b).map(|(x, y)| *x.max(y)).collect(),
        );
    Ok(best)
}

/// `n^{v_H} p^{e_H}`.
pub fn packing_cap(h: &Pattern, n: usize, p: &Q) -> Q {
    pow_q(&qu(n as u64), h.vertices as u32) * pow_q(p, h.edge_count() as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MStar {
    pub value: u64,
    /// The subpattern whose constraint fails at `value + 1`, if any.
    pub binding: Option<Pattern>,
}

/// `M*_G(n, p)`: the largest `m <= C(n,2)` with `N(n, m, H) <= n^{v_H} p^{e_H}`
/// for every nonempty `H` in `E_G`; 0 if no positive `m` qualifies.
pub fn m_star(n: usize, p: &Q, g: &Pattern) -> Result<MStar> {
    precondition(!p.is_negative() && p <= &Q::one(), || {
        "p must lie in [0,1]".into()
    })?;
    m_star_unchecked(n, p, g)
}

/// [`m_star`] without the `p <= 1` check, for `p := m/n` in the `G(n,m)` bound.
fn m_star_unchecked(n: usize, p: &Q, g: &Pattern) -> Result<MStar> {
    precondition(n >= g.vertices, || {
        format!("need n >= v_G = {}, got {n}", g.vertices)
    })?;
    let subs = g.subpatterns()?;
    let pairs = pair_count(n);
    let caps: Vec<Q> = subs.iter().map(|h| packing_cap(h, n, p)).collect();
    let totals: Vec<Q> = subs
        .iter()
        .map(|h| copies_in_complete_count(h, n).map(|c| Q::from_integer(c.into())))
        .collect::<Result<_>>()?;
    for m in 1..=pairs {
        for (i, h) in subs.iter().enumerate() {
            if caps[i] >= totals[i] {
                continue;
            }
            let nm = packing_number(n, m, h)?;
            if Q::from_integer(nm.into()) > caps[i] {
                return Ok(MStar {
                    value: m as u64 - 1,
                    binding: Some(h.clone()),
                });
            }
        }
    }
    Ok(MStar {
        value: pairs as u64,
        binding: None,
    })
}

/// `N(n, m1, H) m2 / (m1 N(n, m2, H))`, the least `C_H` this instance needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingRatio {
    pub n1: u64,
    pub n2: u64,
    /// `None` when `m1 N(n, m2, H) = 0` (no constraint).
    pub ratio: Option<Q>,
}

pub fn check_packing_inequality(
    h: &Pattern,
    n: usize,
    m1: usize,
    m2: usize,
) -> Result<PackingRatio> {
    precondition(m1 <= m2 && m2 <= pair_count(n), || {
        format!("need 0 <= m1 <= m2 <= C(n,2), got m1={m1}, m2={m2}")
    })?;
    let n1 = packing_number(n, m1, h)?;
    let n2 = packing_number(n, m2, h)?;
    Ok(PackingRatio {
        n1,
        n2,
        ratio: packing_ratio(n1, n2, m1, m2),
    })
}

fn packing_ratio(n1: u64, n2: u64, m1: usize, m2: usize) -> Option<Q> {
    if m1 == 0 || n2 == 0 {
        return None;
    }
    Some(Q::new(
        (n1 as u128 * m2 as u128).into(),
        (m1 as u128 * n2 as u128).into(),
    ))
}

/// Largest [`PackingRatio`] over all `m1 <= m2` for fixed `n`: a finite `C_H` for this host size.
pub fn packing_constant_witness(h: &Pattern, n: usize) -> Result<(Q, usize, usize)> {
    let prof = packing_profile(n, h)?;
    let mut best = (Q::zero(), 0, 0);
    for m2 in 0..prof.len() {
        for m1 in 0..=m2 {
            if let Some(r) = packing_ratio(prof[m1], prof[m2], m1, m2) {
                if r > best.0 {
                    best = (r, m1, m2);
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RandomGraphModel {
    Gnp {
        n: usize,
        p: Q,
    },
    Gnm {
        n: usize,
        m: usize,
    },
    /// Any law on the `C(n,2)` edge indicators.
    Exact {
        n: usize,
        dist: ExactDistribution,
    },
}

impl RandomGraphModel {
    pub fn gnp(n: usize, p: Q) -> Result<Self> {
        precondition(!p.is_negative() && p <= Q::one(), || {
            "p must lie in [0,1]".into()
        })?;
        Ok(RandomGraphModel::Gnp { n, p })
    }

    pub fn gnm(n: usize, m: usize) -> Result<Self> {
        precondition(m <= pair_count(n), || {
            format!("m = {m} exceeds C(n,2) = {}", pair_count(n))
        })?;
        Ok(RandomGraphModel::Gnm { n, m })
    }

    pub fn exact(n: usize, dist: ExactDistribution) -> Result<Self> {
        precondition(dist.is_binary() && dist.n() == pair_count(n), || {
            format!("need a binary law on {} edge indicators", pair_count(n))
        })?;
        Ok(RandomGraphModel::Exact { n, dist })
    }

    pub fn n(&self) -> usize {
        match self {
            RandomGraphModel::Gnp { n, .. }
            | RandomGraphModel::Gnm { n, .. }
            | RandomGraphModel::Exact { n, .. } => *n,
        }
    }

    /// Exact law of the edge indicators.
    pub fn distribution(&self) -> Result<ExactDistribution> {
        let pairs = pair_count(self.n());
        match self {
            RandomGraphModel::Gnp { p, .. } => {
                Budget::current().check_enumeration("G(n,p) outcomes", 1u128 << pairs.min(127))?;
                ExactDistribution::iid_bernoulli(pairs, p)
            }
            RandomGraphModel::Gnm { m, .. } => {
                let total = binom(pairs as u64, *m as u64);
                Budget::current()
                    .check_enumeration("G(n,m) outcomes", total.to_u128().unwrap_or(u128::MAX))?;
                precondition(pairs <= 63, || {
                    "too many pairs for G(n,m) enumeration".into()
                })?;
                let pr = Q::new(1.into(), total.into());
                let mut support = Vec::new();
                let end = 1u64 << pairs;
                let mut x: u64 = if *m == 0 { 0 } else { (1u64 << m) - 1 };
                loop {
                    let v = (0..pairs)
                        .map(|i| if x >> i & 1 == 1 { Q::one() } else { Q::zero() })
                        .collect();
                    support.push((pr.clone(), v));
                    if *m == 0 || *m == pairs {
                        break;
                    }
                    x = next_combination(x);
                    if x >= end {
                        break;
                    }
                }
                ExactDistribution::new(pairs, support)
            }
            RandomGraphModel::Exact { dist, .. } => Ok(dist.clone()),
        }
    }

    /// Per-edge marginal `Pr[e_uv = 1]` averaged over pairs.
    pub fn edge_marginal(&self) -> Q {
        match self {
            RandomGraphModel::Gnp { p, .. } => p.clone(),
            RandomGraphModel::Gnm { n, m } => {
                Q::new((*m as u64).into(), (pair_count(*n) as u64).into())
            }
            RandomGraphModel::Exact { dist, .. } => {
                let s: Q = (0..dist.n()).map(|j| dist.marginal_moment(j, 1)).sum();
                s / qu(dist.n() as u64)
            }
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> Result<Vec<bool>> {
        let pairs = pair_count(self.n());
        match self {
            RandomGraphModel::Gnp { p, .. } => {
                let pf = to_f64(p);
                Ok((0..pairs).map(|_| rng.random::<f64>() < pf).collect())
            }
            RandomGraphModel::Gnm { m, .. } => {
                let mut present = vec![false; pairs];
                for i in rand::seq::index::sample(rng, pairs, *m) {
                    present[i] = true;
                }
                Ok(present)
            }
            RandomGraphModel::Exact { .. } => Err(Error::Precondition(
                "Monte Carlo sampling needs a G(n,p) or G(n,m) model".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TailValue {
    Exact(Q),
    Estimate(McEstimate),
}

impl TailValue {
    pub fn value(&self) -> f64 {
        match self {
            TailValue::Exact(q) => to_f64(q),
            TailValue::Estimate(e) => e.estimate,
        }
    }
}

/// `Pr[q(e) >= threshold]`. Monte Carlo trial `i` uses
/// [`seed::derive`]`(seed, stream_id("subgraph_tail"), i)`.
pub fn subgraph_tail(
    model: &RandomGraphModel,
    g: &Pattern,
    threshold: &Q,
    mode: TailMode,
) -> Result<TailValue> {
    let n = model.n();
    let copies = copies_in_complete(g, n)?;
    match mode {
        TailMode::Exact => {
            if !threshold.is_positive() {
                return Ok(TailValue::Exact(Q::one()));
            }
            let dist = model.distribution()?;
            let tail = dist
                .support()
                .iter()
                .filter(|a| {
                    let c = copies
                        .iter()
                        .filter(|cp| cp.iter().all(|&i| a.x[i].is_one()))
                        .count();
                    &qu(c as u64) >= threshold
                })
                .map(|a| a.prob.clone())
                .sum();
            Ok(TailValue::Exact(tail))
        }
        TailMode::MonteCarlo { trials, seed } => {
            precondition(trials >= 1, || "trials must be >= 1".into())?;
            let stream = seed::stream_id("subgraph_tail");
            let hits = (0..trials)
                .into_par_iter()
                .map(|i| -> Result<u64> {
                    let mut rng = seed::trial_rng(seed, stream, i);
                    let present = model.sample(&mut rng)?;
                    let c = copies
                        .iter()
                        .filter(|cp| cp.iter().all(|&j| present[j]))
                        .count();
                    Ok(u64::from(&qu(c as u64) >= threshold))
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            Ok(TailValue::Estimate(McEstimate::from_counts(hits, trials)))
        }
    }
}

/// Law of the copy indicators `x_{E'}` under the model.
pub fn copy_indicator_distribution(
    g: &Pattern,
    model: &RandomGraphModel,
) -> Result<ExactDistribution> {
    let q = copy_polynomial(g, model.n())?;
    monomial_indicator_distribution(&q, &model.distribution()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphGbCheck {
    /// `N(n, m, H) <= delta n^{v_H} p^{e_H} / (2^{e_G} v_G^{v_G})` for every `H`.
    pub premise: bool,
    /// `(delta', e_G m)`-almost independence of the edge law.
    pub almost_independent: AiCheck,
    pub mu: Q,
    /// `(1/d) p^{e_G} prod (n - i)`.
    pub mu_star: Q,
    /// `(1+delta')^{e_G} (1+delta) mu*/mu - 1`.
    pub delta_double_prime: Q,
    /// Growth check of the copy indicators at `(delta'', m)`; `None` if a premise failed.
    pub growth: Option<GrowthCheck>,
}

impl GraphGbCheck {
    pub fn certified(&self) -> bool {
        self.premise
            && self.almost_independent.holds
            && self.growth.as_ref().is_some_and(|g| g.holds)
    }
}

/// Checks the packing premise, almost independence of the edge law, and then
/// whether the copy indicators are `(delta'', m)`-growth bounded.
pub fn graph_gb_check(
    g: &Pattern,
    model: &RandomGraphModel,
    p: &Q,
    delta: &Q,
    delta_prime: &Q,
    m: u32,
) -> Result<GraphGbCheck> {
    precondition(delta.is_positive(), || "delta must be > 0".into())?;
    precondition(!delta_prime.is_negative(), || "delta' must be >= 0".into())?;
    precondition(m >= 1, || "m must be >= 1".into())?;
    let n = model.n();
    precondition(n <= 5, || {
        format!("exact copy-indicator law needs n <= 5, got {n}")
    })?;
    let pairs = pair_count(n);
    let eg = g.edge_count();
    let vg = g.vertex_count();
    let scale = qu(1u64 << eg) * pow_q(&qu(vg as u64), vg as u32);
    let mut premise = (m as usize) <= pairs;
    if premise {
        for h in g.subpatterns()? {
            let cap = delta * packing_cap(&h, n, p) / &scale;
            if Q::from_integer(packing_number(n, m as usize, &h)?.into()) > cap {
                premise = false;
                break;
            }
        }
    }
    let dist = model.distribution()?;
    let order = (eg * m as usize).min(pairs);
    let ai = check_almost_independent(&dist, delta_prime, order)?;
    let q = copy_polynomial(g, n)?;
    let mu = crate::polybound::poly_mean_exact(&q, &dist)?;
    let mu_star = pow_q(p, eg as u32) * qu(copies_in_complete_count(g, n)? as u64);
    precondition(mu.is_positive(), || "E[q] must be > 0".into())?;
    let delta_double_prime =
        pow_q(&(Q::one() + delta_prime), eg as u32) * (Q::one() + delta) * &mu_star / &mu
            - Q::one();
    let growth = if premise && ai.holds {
        let x = monomial_indicator_distribution(&q, &dist)?;
        Some(check_growth_bounded(&x, &delta_double_prime, m)?)
    } else {
        None
    };
    Ok(GraphGbCheck {
        premise,
        almost_independent: ai,
        mu,
        mu_star,
        delta_double_prime,
        growth,
    })
}

/// Smallest `delta` satisfying the packing premise of [`graph_gb_check`] at order `m`.
pub fn minimal_premise_delta(g: &Pattern, n: usize, p: &Q, m: usize) -> Result<Q> {
    precondition(p.is_positive(), || "p must be > 0".into())?;
    let eg = g.edge_count();
    let vg = g.vertex_count();
    let scale = qu(1u64 << eg) * pow_q(&qu(vg as u64), vg as u32);
    let mut best = Q::zero();
    for h in g.subpatterns()? {
        let need =
            Q::from_integer(packing_number(n, m, &h)?.into()) * &scale / packing_cap(&h, n, p);
        best = best.max(need);
    }
    Ok(best)
}

/// The Markov bound `((1+delta'')/(1+eps))^m` attached to a certified check.
pub fn graph_markov_bound(check: &GraphGbCheck, eps: &Q, m: u32) -> Result<Q> {
    markov_tail_bound_exact(&check.delta_double_prime, eps, m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JorBound {
    pub value: f64,
    pub m_star: u64,
}

/// `exp(-c_G eps^2 M*_G(n, p))` with caller-supplied `c_G`.
pub fn jor_tail_bound(g: &Pattern, n: usize, p: &Q, eps: f64, c_g: f64) -> Result<JorBound> {
    precondition((0.0..=0.5).contains(&eps), || {
        format!("eps must lie in [0, 1/2], got {eps}")
    })?;
    precondition(p.is_positive(), || "p must be > 0".into())?;
    precondition(c_g > 0.0, || format!("c_G must be > 0, got {c_g}"))?;
    let ms = m_star(n, p, g)?.value;
    Ok(JorBound {
        value: (-c_g * eps * eps * ms as f64).exp(),
        m_star: ms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnmBound {
    pub value: f64,
    pub m_star: u64,
    /// `p := m_edges / n`, as used for `M*`.
    pub p: Q,
    /// `m_edges / C(n,2)`, the actual edge marginal.
    pub edge_marginal: Q,
    /// `(1 + e_G/(m_edges - e_G))^{e_G}`.
    pub correction: Q,
    /// `1 + eps/4`.
    pub correction_limit: Q,
}

/// `exp(-c_G eps^2 M*_G(n, m_edges/n))` for `G(n, m_edges)`, `eps in (0,1]`,
/// `m_edges >= 9 e_G^2 / eps`.
pub fn gnm_tail_bound(
    g: &Pattern,
    n: usize,
    m_edges: usize,
    eps: &Q,
    c_g: f64,
) -> Result<GnmBound> {
    precondition(eps.is_positive() && eps <= &Q::one(), || {
        format!("eps must lie in (0, 1], got {}", format_q(eps))
    })?;
    precondition(c_g > 0.0, || format!("c_G must be > 0, got {c_g}"))?;
    precondition(n >= g.vertex_count(), || {
        format!("need n >= v_G = {}", g.vertex_count())
    })?;
    let eg = g.edge_count() as u64;
    let need = qu(9 * eg * eg) / eps;
    precondition(qu(m_edges as u64) >= need, || {
        format!(
            "m >= 9 e_G^2/eps fails: m = {m_edges}, 9 e_G^2/eps = {}",
            format_q(&need)
        )
    })?;
    precondition(m_edges <= pair_count(n), || {
        format!("m = {m_edges} exceeds C(n,2) = {}", pair_count(n))
    })?;
    let correction = gnm_correction(eg, m_edges as u64);
    let correction_limit = Q::one() + eps / qu(4);
    if correction > correction_limit {
        return Err(Error::Validation(format!(
            "correction {} exceeds 1 + eps/4 = {}",
            format_q(&correction),
            format_q(&correction_limit)
        )));
    }
    let p = Q::new((m_edges as u64).into(), (n as u64).into());
    let ms = m_star_unchecked(n, &p, g)?.value;
    let e = to_f64(eps);
    Ok(GnmBound {
        value: (-c_g * e * e * ms as f64).exp(),
        m_star: ms,
        p,
        edge_marginal: Q::new((m_edges as u64).into(), (pair_count(n) as u64).into()),
        correction,
        correction_limit,
    })
}

/// `(1 + e_G/(m - e_G))^{e_G}`.
pub fn gnm_correction(e_g: u64, m: u64) -> Q {
    pow_q(
        &(Q::one() + Q::new(e_g.into(), (m - e_g).into())),
        e_g as u32,
    )
}

/// `mu*/mu` for `G(n, m)` with `p = m/C(n,2)`: `(m/N)^e (N)_e / (m)_e`.
pub fn gnm_mean_ratio(n: usize, m: u64, e_g: u64) -> Result<Q> {
    let big_n = pair_count(n) as u64;
    precondition(m >= e_g && m <= big_n, || "need e_G <= m <= C(n,2)".into())?;
    let mut r = Q::one();
    for i in 0..e_g {
        r *= Q::new(m.into(), big_n.into()) * Q::new((big_n - i).into(), (m - i).into());
    }
    Ok(r)
}
