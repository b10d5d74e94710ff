//! Pigeonhole scale selection and partition into well-separated clusters.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub tau: f64,
    /// Index lists into `E`, each sorted, ordered by their lowest index.
    pub clusters: Vec<Vec<usize>>,
    pub epsilon: f64,
    /// Ladder rung `m` at which `tau` was accepted.
    pub rung: usize,
    /// `C_k = 5 k(k-1)/2 + 1`, so that `tau >= exp(-C_k/ε) diam(E)`.
    pub c_k: f64,
}

impl Clustering {
    /// Cluster diameter bound `exp(-5/ε) τ`.
    pub fn link_scale(&self) -> f64 {
        (-5.0 / self.epsilon).exp() * self.tau
    }

    pub fn configs(&self, e: &PointConfig) -> Result<Vec<PointConfig>> {
        self.clusters.iter().map(|c| e.subset(c)).collect()
    }
}

pub(crate) fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} outside (0, 1)"
        )));
    }
    Ok(())
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut j = i;
    while parent[j] != r {
        let next = parent[j];
        parent[j] = r;
        j = next;
    }
    r
}

/// Scans `τ_m = exp(-(5m+1)/ε) diam(E)` and accepts the first rung with no
/// pairwise distance in `(exp(-5/ε) τ_m, τ_m)`.
pub fn cluster(e: &PointConfig, epsilon: f64) -> Result<Clustering> {
    validate_epsilon(epsilon)?;
    let k = e.len();
    if k < 2 {
        return Err(Error::InvalidInput(
            "clustering needs at least two points".into(),
        ));
    }
    let diam = e.diam();
    let pairs: Vec<(usize, usize, f64)> = (0..k)
        .tuple_combinations()
        .map(|(i, j)| (i, j, (e.point(i) - e.point(j)).norm()))
        .collect();
    let n_pairs = pairs.len();
    let c_k = 5.0 * n_pairs as f64 + 1.0;
    for m in 0..=n_pairs {
        let tau = (-(5.0 * m as f64 + 1.0) / epsilon).exp() * diam;
        let link = (-(5.0 * m as f64 + 6.0) / epsilon).exp() * diam;
        if !(tau > 0.0) || !tau.is_normal() {
            return Err(Error::InvalidInput(format!(
                "clustering scale underflowed at rung {m}"
            )));
        }
        if pairs.iter().any(|&(_, _, d)| d > link && d < tau) {
            continue;
        }
        let mut parent: Vec<usize> = (0..k).collect();
        for &(i, j, d) in &pairs {
            if d <= link {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; k];
        for i in 0..k {
            let r = find(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = clusters.len();
                clusters.push(Vec::new());
            }
            clusters[slot[r]].push(i);
        }
        let result = Clustering {
            tau,
            clusters,
            epsilon,
            rung: m,
            c_k,
        };
        check_invariants(e, &result)?;
        return Ok(result);
    }
    Err(Error::InternalConsistency(
        "no clustering rung accepted within the pigeonhole bound".into(),
    ))
}

/// Checks the five clustering invariants by brute force.
pub fn check_invariants(e: &PointConfig, c: &Clustering) -> Result<()> {
    let fail = |msg: String| Err(Error::InternalConsistency(msg));
    let k = e.len();
    let mut owner = vec![usize::MAX; k];
    for (ci, members) in c.clusters.iter().enumerate() {
        for &i in members {
            if i >= k || owner[i] != usize::MAX {
                return fail(format!("index {i} missing or repeated in the partition"));
            }
            owner[i] = ci;
        }
    }
    if owner.contains(&usize::MAX) {
        return fail("clusters do not cover E".into());
    }
    let link = c.link_scale();
    for (i, j) in (0..k).tuple_combinations() {
        let d = (e.point(i) - e.point(j)).norm();
        if owner[i] == owner[j] && d > link {
            return fail(format!("cluster diameter {d:e} exceeds {link:e}"));
        }
        if owner[i] != owner[j] && d < c.tau {
            return fail(format!("clusters closer ({d:e}) than tau {:e}", c.tau));
        }
    }
    let diam = e.diam();
    let lo = (-c.c_k / c.epsilon).exp() * diam;
    let hi = (-1.0 / c.epsilon).exp() * diam;
    if !(c.tau >= lo * (1.0 - 1e-12) && c.tau <= hi * (1.0 + 1e-12)) {
        return fail(format!("tau {:e} outside [{lo:e}, {hi:e}]", c.tau));
    }
    if c.clusters.iter().any(|m| m.len() + 1 > k) {
        return fail("a cluster contains all of E".into());
    }
    Ok(())
}
