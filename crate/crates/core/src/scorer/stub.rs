//! Table-driven stub backend.
//!
//! A table maps `(prompt suffix, completion)` to a probability. For a given
//! prompt the longest matching suffix that lists the completion wins; when
//! nothing matches the default probability applies. A completion probability
//! is assigned to its first token and every further token gets probability 1,
//! unless the entry spells out per-token probabilities.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::Backend;
use crate::activity::OccupancyTrace;
use crate::error::{Error, Result};
use crate::map::SemanticMap;
use crate::narrator::{narrate, ObservationHistory, TemplateRegistry};

/// Lower bound applied to every stub probability.
pub const PROB_FLOOR: f64 = 1e-6;

pub const ORACLE_HIT: f64 = 0.9;
pub const ORACLE_MISS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubEntry {
    #[serde(default)]
    pub suffix: String,
    pub completion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubTable {
    #[serde(default = "default_prob")]
    pub default: f64,
    #[serde(default)]
    pub entries: Vec<StubEntry>,
}

fn default_prob() -> f64 {
    PROB_FLOOR
}

#[derive(Debug, Clone)]
enum Probs {
    Whole(f64),
    PerToken(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct StubBackend {
    name: String,
    default: f64,
    // longest suffix first
    groups: Vec<(String, HashMap<String, Probs>)>,
}

impl StubBackend {
    pub fn from_table(name: &str, table: StubTable) -> Result<Self> {
        let check = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("stub probability {p} outside [0, 1]")))
            }
        };
        check(table.default)?;
        let mut by_suffix: BTreeMap<String, HashMap<String, Probs>> = BTreeMap::new();
        for e in table.entries {
            let probs = match (e.prob, e.token_probs) {
                (Some(p), None) => {
                    check(p)?;
                    Probs::Whole(p)
                }
                (None, Some(ps)) if !ps.is_empty() => {
                    ps.iter().try_for_each(|&p| check(p))?;
                    Probs::PerToken(ps)
                }
                _ => {
                    return Err(Error::Config(format!(
                        "stub entry for `{}` needs exactly one of `prob` or a non-empty `token_probs`",
                        e.completion
                    )))
                }
            };
            by_suffix.entry(e.suffix).or_default().insert(e.completion, probs);
        }
        let mut groups: Vec<_> = by_suffix.into_iter().collect();
        groups.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(StubBackend {
            name: name.to_string(),
            default: table.default,
            groups,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: StubTable =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_table(&path.display().to_string(), table)
    }

    /// Every completion scores `prob` on its first token.
    pub fn constant(prob: f64) -> Self {
        StubBackend {
            name: format!("constant({prob})"),
            default: prob,
            groups: Vec::new(),
        }
    }

    /// Scores labels with an instance in the room the human occupies right
    /// after the narrated history at [`ORACLE_HIT`], everything else at
    /// [`ORACLE_MISS`].
    ///
    /// One table entry group is generated per distinct prompt the simulator
    /// can produce for this trace, keyed on the full prompt text.
    pub fn oracle_next_room(ctx: &OracleStubContext<'_>) -> Result<Self> {
        let item_rooms = ctx.map.item_rooms();
        let mut labels_in_room: Vec<Vec<String>> = vec![Vec::new(); ctx.map.n_rooms()];
        for item in ctx.map.items() {
            let room = item_rooms[&item.id];
            if !labels_in_room[room].contains(&item.label) {
                labels_in_room[room].push(item.label.clone());
            }
        }
        let mut groups: BTreeMap<String, HashMap<String, Probs>> = BTreeMap::new();
        let log = &ctx.trace.log;
        for n_done in 0..=log.len() {
            let history = ObservationHistory::from_log(&log[..n_done], ctx.window, Some(ctx.map));
            let text = narrate(&history, ctx.template, ctx.templates)?.text + ctx.binding;
            let t = if n_done == 0 { 0 } else { log[n_done - 1].time };
            let next_room = ctx.trace.room_at(t.min(ctx.trace.horizon()));
            groups.entry(text).or_insert_with(|| {
                labels_in_room[next_room]
                    .iter()
                    .map(|l| (l.clone(), Probs::Whole(ORACLE_HIT)))
                    .collect()
            });
        }
        let mut groups: Vec<_> = groups.into_iter().collect();
        groups.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(StubBackend {
            name: "oracle-next-room".into(),
            default: ORACLE_MISS,
            groups,
        })
    }

    fn lookup(&self, prompt: &str, completion: &str) -> Option<&Probs> {
        self.groups
            .iter()
            .filter(|(suffix, _)| prompt.ends_with(suffix.as_str()))
            .find_map(|(_, entries)| entries.get(completion))
    }
}

/// Inputs needed to build the next-room oracle table.
pub struct OracleStubContext<'a> {
    pub map: &'a SemanticMap,
    pub trace: &'a OccupancyTrace,
    pub templates: &'a TemplateRegistry,
    pub template: &'a str,
    pub binding: &'a str,
    pub window: usize,
}

impl Backend for StubBackend {
    fn describe(&self) -> String {
        format!("stub({})", self.name)
    }

    fn token_logprobs(&self, prompt: &str, completion: &str) -> Result<Vec<f64>> {
        let n = tokenize(completion).len();
        if n == 0 {
            return Err(Error::Tokenization("completion has no tokens".into()));
        }
        let probs: Vec<f64> = match self.lookup(prompt, completion) {
            Some(Probs::PerToken(ps)) => {
                if ps.len() != n {
                    return Err(Error::Tokenization(format!(
                        "stub lists {} token probabilities for `{completion}`, which has {n} tokens",
                        ps.len()
                    )));
                }
                ps.clone()
            }
            Some(Probs::Whole(p)) => whole(*p, n),
            None => whole(self.default, n),
        };
        Ok(probs.into_iter().map(|p| p.max(PROB_FLOOR).ln()).collect())
    }
}

fn whole(p: f64, n: usize) -> Vec<f64> {
    let mut v = vec![1.0; n];
    v[0] = p;
    v
}
