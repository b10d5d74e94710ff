//! Extendability verdicts from the η-block scan.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::alignment::{certify_distortion, detect_blocks, Block, Correspondence};
use crate::clustering::validate_epsilon;
use crate::error::Result;

use super::ExtensionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendabilityStatus {
    ExtendableProper,
    ExtendableImproper,
    Obstructed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendabilityVerdict {
    pub status: ExtendabilityStatus,
    pub witness_positive: Option<Block>,
    pub witness_negative: Option<Block>,
    pub eta: f64,
    pub delta: f64,
    pub delta_limit: f64,
    /// Indices of the subset that produced the witnesses, for subset scans.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subset: Option<Vec<usize>>,
}

pub fn check_extendability(c: &Correspondence, epsilon: f64) -> Result<ExtendabilityVerdict> {
    check_extendability_with(c, epsilon, &ExtensionConfig::default())
}

fn status_of(pos: &Option<Block>, neg: &Option<Block>) -> ExtendabilityStatus {
    match (pos.is_some(), neg.is_some()) {
        (true, true) => ExtendabilityStatus::Obstructed,
        (false, true) => ExtendabilityStatus::ExtendableImproper,
        _ => ExtendabilityStatus::ExtendableProper,
    }
}

/// Shared prefix of both scans: `Err(verdict)` short-circuits.
fn prelude(
    c: &Correspondence,
    epsilon: f64,
    cfg: &ExtensionConfig,
) -> Result<std::result::Result<ExtendabilityVerdict, ExtendabilityVerdict>> {
    validate_epsilon(epsilon)?;
    let eta = cfg.eta(epsilon);
    let delta_limit = cfg.delta_limit(epsilon);
    let delta = if c.len() < 2 {
        0.0
    } else {
        certify_distortion(c)?.delta
    };
    let v = ExtendabilityVerdict {
        status: ExtendabilityStatus::ExtendableProper,
        witness_positive: None,
        witness_negative: None,
        eta,
        delta,
        delta_limit,
        subset: None,
    };
    if !(delta <= delta_limit) {
        return Ok(Err(ExtendabilityVerdict {
            status: ExtendabilityStatus::Inconclusive,
            ..v
        }));
    }
    Ok(Ok(v))
}

pub fn check_extendability_with(
    c: &Correspondence,
    epsilon: f64,
    cfg: &ExtensionConfig,
) -> Result<ExtendabilityVerdict> {
    let v = match prelude(c, epsilon, cfg)? {
        Ok(v) => v,
        Err(v) => return Ok(v),
    };
    let scan = detect_blocks(c, v.eta)?;
    let witness_positive = scan.positives.into_iter().next();
    let witness_negative = scan.negatives.into_iter().next();
    Ok(ExtendabilityVerdict {
        status: status_of(&witness_positive, &witness_negative),
        witness_positive,
        witness_negative,
        ..v
    })
}

/// Same verdict computed by scanning every subset of size
/// `min(card E, 2D + 2)`; an obstruction names the subset it lives in.
pub fn check_extendability_by_subsets(
    c: &Correspondence,
    epsilon: f64,
    cfg: &ExtensionConfig,
) -> Result<ExtendabilityVerdict> {
    let v = match prelude(c, epsilon, cfg)? {
        Ok(v) => v,
        Err(v) => return Ok(v),
    };
    let size = c.len().min(2 * c.dim() + 2);
    let mut pos: Option<Block> = None;
    let mut neg: Option<Block> = None;
    let lift = |b: Block, idx: &[usize]| Block {
        indices: b.indices.iter().map(|&i| idx[i]).collect(),
        ..b
    };
    for idx in (0..c.len()).combinations(size) {
        let scan = detect_blocks(&c.subset(&idx)?, v.eta)?;
        let p = scan.positives.into_iter().next().map(|b| lift(b, &idx));
        let n = scan.negatives.into_iter().next().map(|b| lift(b, &idx));
        if p.is_some() && n.is_some() {
            return Ok(ExtendabilityVerdict {
                status: ExtendabilityStatus::Obstructed,
                witness_positive: p,
                witness_negative: n,
                subset: Some(idx),
                ..v
            });
        }
        pos = pos.or(p);
        neg = neg.or(n);
    }
    Ok(ExtendabilityVerdict {
        status: status_of(&pos, &neg),
        witness_positive: pos,
        witness_negative: neg,
        ..v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra_pair(flip_second: bool) -> Correspondence {
        let mut src = vec![
            vec![0., 0., 0.],
            vec![1., 0., 0.],
            vec![0., 1., 0.],
            vec![0., 0., 1.],
        ];
        let mut dst = src.clone();
        for p in &src.clone() {
            let q = vec![p[0] + 100., p[1], p[2]];
            src.push(q.clone());
            dst.push(if flip_second {
                vec![q[0], q[1], -q[2]]
            } else {
                q
            });
        }
        Correspondence::from_rows(&src, &dst).unwrap()
    }

    #[test]
    fn proper_set() {
        let c = tetra_pair(false);
        let v = check_extendability(&c, 0.5).unwrap();
        assert_eq!(v.status, ExtendabilityStatus::ExtendableProper);
        assert!(v.witness_positive.is_some());
    }

    #[test]
    fn obstruction_is_found_by_both_scans() {
        let c = tetra_pair(true);
        let cfg = ExtensionConfig::default();
        let full = check_extendability_with(&c, 0.5, &cfg).unwrap();
        let sub = check_extendability_by_subsets(&c, 0.5, &cfg).unwrap();
        assert_eq!(full.status, ExtendabilityStatus::Obstructed);
        assert_eq!(sub.status, ExtendabilityStatus::Obstructed);
        let idx = sub.subset.unwrap();
        assert!(idx.len() <= 8);
        for b in [sub.witness_positive.unwrap(), sub.witness_negative.unwrap()] {
            assert!(b.indices.iter().all(|i| idx.contains(i)));
        }
    }

    #[test]
    fn large_delta_is_inconclusive() {
        let c = Correspondence::from_rows(&[vec![0., 0.], vec![1., 0.]], &[vec![0., 0.], vec![2., 0.]])
            .unwrap();
        let v = check_extendability(&c, 0.5).unwrap();
        assert_eq!(v.status, ExtendabilityStatus::Inconclusive);
    }
}
