//! Partition selection policies driven by partition relevancy scores.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Uniform over all partitions.
    Naive,
    /// Lowest score; exact ties broken uniformly at random.
    GreedyAvoidance,
    /// Uniform over all partitions except the highest-scoring one.
    InformedAvoidance,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Naive,
        PolicyKind::InformedAvoidance,
        PolicyKind::GreedyAvoidance,
    ];

    /// Short name used on the command line and in output files.
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Naive => "naive",
            PolicyKind::GreedyAvoidance => "greedy",
            PolicyKind::InformedAvoidance => "informed",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "naive" => Ok(PolicyKind::Naive),
            "greedy" | "greedy_avoidance" => Ok(PolicyKind::GreedyAvoidance),
            "informed" | "informed_avoidance" => Ok(PolicyKind::InformedAvoidance),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected naive, greedy or informed)"
            ))),
        }
    }
}

/// Highest-scoring partition, lowest id among equal maxima.
pub fn argmax_partition(scores: &BTreeMap<u32, f64>) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for (&id, &s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    best.map(|(id, _)| id)
}

/// All partitions sharing the minimum score, in id order.
pub fn argmin_partitions(scores: &BTreeMap<u32, f64>) -> Vec<u32> {
    let min = scores.values().copied().fold(f64::INFINITY, f64::min);
    scores.iter().filter(|(_, &s)| s == min).map(|(&id, _)| id).collect()
}

/// Picks the robot's next partition.
pub fn select_next_partition<R: Rng + ?Sized>(
    kind: PolicyKind,
    scores: &BTreeMap<u32, f64>,
    rng: &mut R,
) -> Result<u32> {
    if scores.is_empty() {
        return Err(Error::Policy("no partitions to choose from".into()));
    }
    if let Some((id, s)) = scores.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::Policy(format!("partition {id} has score {s}")));
    }
    if kind != PolicyKind::Naive && scores.len() < 2 {
        return Err(Error::Policy(format!("{kind} needs at least two partitions")));
    }
    let ids: Vec<u32> = scores.keys().copied().collect();
    let pick = |c: &[u32], rng: &mut R| c[rng.random_range(0..c.len())];
    Ok(match kind {
        PolicyKind::Naive => pick(&ids, rng),
        PolicyKind::GreedyAvoidance => {
            let mins = argmin_partitions(scores);
            if mins.len() == 1 {
                mins[0]
            } else {
                pick(&mins, rng)
            }
        }
        PolicyKind::InformedAvoidance => {
            let excluded = argmax_partition(scores).expect("non-empty");
            let rest: Vec<u32> = ids.into_iter().filter(|&i| i != excluded).collect();
            pick(&rest, rng)
        }
    })
}
