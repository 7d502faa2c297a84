//! A fixed corpus of small exact distributions (n <= 12) used by the
//! dominance and identity checks.

use num_traits::{One, Zero};

use crate::dist::ExactDistribution;
use crate::error::Result;
use crate::exact::{q, Q};
use crate::expander::{build_jn_exact, walk_indicator_distribution, WalkSpec};
use crate::polybound::{perm_index, permutation_indicator_distribution};
use crate::subgraph::{copy_indicator_distribution, Pattern, RandomGraphModel};

pub struct Entry {
    pub name: String,
    pub dist: ExactDistribution,
}

fn entry(name: impl Into<String>, dist: ExactDistribution) -> Entry {
    Entry {
        name: name.into(),
        dist,
    }
}

pub fn standard() -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (n, p) in [
        (4, q(1, 2)),
        (6, q(1, 4)),
        (8, q(1, 2)),
        (10, q(1, 3)),
        (12, q(1, 10)),
    ] {
        out.push(entry(
            format!("iid-bernoulli n={n} p={p}"),
            ExactDistribution::iid_bernoulli(n, &p)?,
        ));
    }
    out.push(entry(
        "product n=5 p=1/5..1",
        ExactDistribution::product_bernoulli(&[q(1, 5), q(2, 5), q(3, 5), q(4, 5), Q::one()])?,
    ));
    out.push(entry(
        "product n=7 p=1/8..7/8",
        ExactDistribution::product_bernoulli(&(1..=7).map(|i| q(i, 8)).collect::<Vec<_>>())?,
    ));
    for (n, p) in [(4, q(1, 2)), (8, q(1, 3)), (12, q(1, 6))] {
        out.push(entry(
            format!("correlated-coins n={n} p={p}"),
            ExactDistribution::correlated_coins(n, &p)?,
        ));
    }
    out.push(entry(
        "mixture iid(6,1/4)+iid(6,3/4)",
        ExactDistribution::mixture(&[
            (q(1, 2), ExactDistribution::iid_bernoulli(6, &q(1, 4))?),
            (q(1, 2), ExactDistribution::iid_bernoulli(6, &q(3, 4))?),
        ])?,
    ));
    out.push(entry(
        "mixture correlated(8,1/2)+iid(8,1/2)",
        ExactDistribution::mixture(&[
            (q(1, 3), ExactDistribution::correlated_coins(8, &q(1, 2))?),
            (q(2, 3), ExactDistribution::iid_bernoulli(8, &q(1, 2))?),
        ])?,
    ));
    out.push(entry(
        "permutation-indicator N=3",
        permutation_indicator_distribution(3)?,
    ));
    let perm4 = permutation_indicator_distribution(4)?;
    // diagonal and one off-diagonal row of the N=4 permutation matrix
    let picks: Vec<usize> = (0..4)
        .map(|x| perm_index(4, x, x))
        .chain((0..4).map(|y| perm_index(4, 0, y)))
        .collect();
    out.push(entry(
        "permutation-indicator N=4 diagonal+row",
        perm4.map(picks.len(), |v| {
            picks.iter().map(|&i| v[i].clone()).collect()
        })?,
    ));
    let walk = WalkSpec::new(build_jn_exact(&q(1, 2), 4)?, vec![0, 1], 8)?;
    out.push(entry(
        "walk-indicators J4 lambda=1/2 mu=1/2 l=8",
        walk_indicator_distribution(&walk)?,
    ));
    let walk0 = WalkSpec::new(build_jn_exact(&q(1, 4), 4)?, vec![0], 10)?;
    out.push(entry(
        "walk-indicators J4 lambda=1/4 mu=1/4 l=10",
        walk_indicator_distribution(&walk0)?,
    ));
    out.push(entry(
        "triangle-copies G(4,1/2)",
        copy_indicator_distribution(
            &Pattern::builtin("k3")?,
            &RandomGraphModel::gnp(4, q(1, 2))?,
        )?,
    ));
    out.push(entry(
        "path-copies G(4,1/3)",
        copy_indicator_distribution(
            &Pattern::builtin("p3")?,
            &RandomGraphModel::gnp(4, q(1, 3))?,
        )?,
    ));
    out.push(entry(
        "edges G(4,m=3)",
        RandomGraphModel::gnm(4, 3)?.distribution()?,
    ));
    out.push(entry(
        "edges G(5,m=4)",
        RandomGraphModel::gnm(5, 4)?.distribution()?,
    ));
    let half = q(1, 2);
    out.push(entry(
        "pair-averages of iid(8,1/2)",
        ExactDistribution::iid_bernoulli(8, &half)?.map(4, |v| {
            (0..4)
                .map(|i| (&v[2 * i] + &v[2 * i + 1]) * &half)
                .collect()
        })?,
    ));
    out.push(entry(
        "scaled-uniform three-point n=3",
        ExactDistribution::new(
            3,
            vec![
                (q(1, 3), vec![Q::zero(), q(1, 2), Q::one()]),
                (q(1, 3), vec![q(1, 2), Q::one(), Q::zero()]),
                (q(1, 3), vec![Q::one(), Q::zero(), q(1, 2)]),
            ],
        )?,
    ));
    out.push(entry(
        "constant 1/2 n=5",
        ExactDistribution::constant(5, half.clone())?,
    ));
    Ok(out)
}
