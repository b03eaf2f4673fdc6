//! Activity programs: parsing, binding program-local item references to map
//! items, and rolling the program out into a per-step room-occupancy trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::SemanticMap;

/// Program-local item reference, e.g. `<mug> (1)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemRef {
    pub label: String,
    pub id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicAction {
    pub verb: String,
    pub item_refs: Vec<ItemRef>,
    /// Time steps; always at least one.
    pub duration: u32,
}

impl fmt::Display for AtomicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.verb)?;
        for r in &self.item_refs {
            write!(f, " <{}> ({})", r.label, r.id)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityProgram {
    pub name: String,
    pub actions: Vec<AtomicAction>,
}

impl ActivityProgram {
    /// Length of one pass through the program, in steps.
    pub fn cycle_length(&self) -> u64 {
        self.actions.iter().map(|a| a.duration as u64).sum()
    }

    /// Distinct references in first-appearance order.
    pub fn references(&self) -> Vec<ItemRef> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in self.actions.iter().flat_map(|a| &a.item_refs) {
            if seen.insert(r.clone()) {
                out.push(r.clone());
            }
        }
        out
    }
}

/// Verb → duration (steps) lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationTable {
    pub verbs: BTreeMap<String, u32>,
    /// Used for verbs not in `verbs`; `None` makes unknown verbs an error.
    pub default: Option<u32>,
}

impl Default for DurationTable {
    fn default() -> Self {
        let mut verbs = BTreeMap::new();
        verbs.insert("Walk".to_string(), 3);
        for v in ["Grab", "Put", "Open", "Close", "SwitchOn", "SwitchOff"] {
            verbs.insert(v.to_string(), 1);
        }
        for v in ["Sit", "Watch", "Work"] {
            verbs.insert(v.to_string(), 5);
        }
        DurationTable {
            verbs,
            default: Some(2),
        }
    }
}

impl DurationTable {
    pub fn lookup(&self, verb: &str) -> Option<u32> {
        self.verbs.get(verb).copied().or(self.default)
    }
}

/// Parses a program, one atomic action per non-blank line.
///
/// Grammar per line: `"[" VERB "]" { "<" LABEL ">" "(" INT ")" }`. Lines
/// starting with `#` are comments.
pub fn parse_program(name: &str, text: &str, durations: &DurationTable) -> Result<ActivityProgram> {
    let mut actions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let (verb, item_refs) = parse_line(line).map_err(|message| Error::ProgramSyntax { line: lineno, message })?;
        let duration = durations.lookup(&verb).ok_or_else(|| Error::UnknownVerb {
            line: lineno,
            verb: verb.clone(),
        })?;
        if duration == 0 {
            return Err(Error::ProgramSyntax {
                line: lineno,
                message: format!("verb `{verb}` has zero duration"),
            });
        }
        actions.push(AtomicAction {
            verb,
            item_refs,
            duration,
        });
    }
    if actions.is_empty() {
        return Err(Error::ProgramSyntax {
            line: 0,
            message: "empty program".into(),
        });
    }
    Ok(ActivityProgram {
        name: name.to_string(),
        actions,
    })
}

fn parse_line(line: &str) -> std::result::Result<(String, Vec<ItemRef>), String> {
    let rest = line.strip_prefix('[').ok_or("expected `[` before the verb")?;
    let close = rest.find(']').ok_or("missing `]` after the verb")?;
    let verb = rest[..close].trim();
    if verb.is_empty() || verb.chars().any(char::is_whitespace) {
        return Err(format!("invalid verb `{verb}`"));
    }
    let mut rest = rest[close + 1..].trim_start();
    let mut refs = Vec::new();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('<')
            .ok_or_else(|| format!("expected `<label>` at `{rest}`"))?;
        let end = body.find('>').ok_or("missing `>` after label")?;
        let label = body[..end].trim();
        if label.is_empty() {
            return Err("empty item label".into());
        }
        let after = body[end + 1..].trim_start();
        let num = after
            .strip_prefix('(')
            .ok_or_else(|| format!("expected `(id)` after <{label}>"))?;
        let end = num.find(')').ok_or("missing `)` after item id")?;
        let id: u32 = num[..end]
            .trim()
            .parse()
            .map_err(|_| format!("invalid item id `{}`", num[..end].trim()))?;
        refs.push(ItemRef {
            label: label.to_string(),
            id,
        });
        rest = num[end + 1..].trim_start();
    }
    if refs.len() > 2 {
        return Err(format!("at most two item references per action, found {}", refs.len()));
    }
    Ok((verb.to_string(), refs))
}

/// Concrete map item chosen for each program-local reference.
pub type Binding = BTreeMap<ItemRef, u32>;

/// Binds every `(label, id)` reference to a concrete item of that label.
///
/// Distinct ids of one label get distinct items. The choice among candidates
/// is a seeded shuffle, so a given seed always yields the same binding.
pub fn bind_items(program: &ActivityProgram, map: &SemanticMap, seed: u64) -> Result<Binding> {
    let mut by_label: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for r in program.actions.iter().flat_map(|a| &a.item_refs) {
        by_label.entry(r.label.as_str()).or_default().insert(r.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut binding = Binding::new();
    for (label, ids) in by_label {
        let mut candidates: Vec<u32> = map.items_with_label(label).map(|i| i.id).collect();
        candidates.sort_unstable();
        if candidates.is_empty() {
            let id = *ids.iter().next().expect("non-empty id set");
            return Err(Error::Unbindable {
                label: label.to_string(),
                id,
                reason: "no item with this label in the map".into(),
            });
        }
        if ids.len() > candidates.len() {
            let id = *ids.iter().nth(candidates.len()).expect("id beyond candidates");
            return Err(Error::Unbindable {
                label: label.to_string(),
                id,
                reason: format!("{} distinct ids but only {} instances", ids.len(), candidates.len()),
            });
        }
        candidates.shuffle(&mut rng);
        for (id, item) in ids.into_iter().zip(candidates) {
            binding.insert(
                ItemRef {
                    label: label.to_string(),
                    id,
                },
                item,
            );
        }
    }
    Ok(binding)
}

/// An action observed at its completion time.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedAction {
    /// First step at which the action is complete (observable).
    pub time: u32,
    /// Position of the action in the program.
    pub index: usize,
    pub action: AtomicAction,
    /// Room the human was in while performing it.
    pub room: usize,
}

/// Human room index per step and the completed-action log.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTrace {
    /// Room index for t = 0..=horizon.
    pub rooms: Vec<usize>,
    /// Chronological; one entry per completion no later than the horizon.
    pub log: Vec<CompletedAction>,
    pub n_rooms: usize,
}

impl OccupancyTrace {
    pub fn horizon(&self) -> u32 {
        (self.rooms.len() - 1) as u32
    }

    pub fn room_at(&self, t: u32) -> usize {
        self.rooms[t as usize]
    }

    /// One-hot occupancy vector `x_h(t)`.
    pub fn one_hot(&self, t: u32) -> Vec<u8> {
        let mut v = vec![0; self.n_rooms];
        v[self.room_at(t)] = 1;
        v
    }

    /// Actions already completed at time `t`.
    pub fn completed_by(&self, t: u32) -> &[CompletedAction] {
        let n = self.log.partition_point(|c| c.time <= t);
        &self.log[..n]
    }

    /// Builds a trace from explicit per-step rooms, with an empty action log.
    pub fn from_rooms(rooms: Vec<usize>, n_rooms: usize) -> Self {
        assert!(!rooms.is_empty(), "trace needs at least one step");
        assert!(rooms.iter().all(|&r| r < n_rooms), "room index out of range");
        OccupancyTrace {
            rooms,
            log: Vec::new(),
            n_rooms,
        }
    }
}

/// Room occupied while performing each action of the program.
///
/// An action is located at the room of its first bound item; actions without
/// items stay wherever the previous action was (cyclically).
pub fn action_rooms(program: &ActivityProgram, binding: &Binding, map: &SemanticMap) -> Result<Vec<usize>> {
    let item_rooms = map.item_rooms();
    let mut located: Vec<Option<usize>> = Vec::with_capacity(program.actions.len());
    for a in &program.actions {
        match a.item_refs.first() {
            Some(r) => {
                let item = binding.get(r).ok_or_else(|| Error::Unbindable {
                    label: r.label.clone(),
                    id: r.id,
                    reason: "reference missing from binding".into(),
                })?;
                let room = item_rooms.get(item).copied().ok_or_else(|| Error::Unbindable {
                    label: r.label.clone(),
                    id: r.id,
                    reason: format!("item {item} is not in the map"),
                })?;
                located.push(Some(room));
            }
            None => located.push(None),
        }
    }
    let fallback = located.iter().rev().flatten().next().copied().unwrap_or(0);
    let mut prev = fallback;
    Ok(located
        .into_iter()
        .map(|r| {
            prev = r.unwrap_or(prev);
            prev
        })
        .collect())
}

/// Rolls the program out over `horizon` steps, restarting it from the first
/// action whenever it finishes.
pub fn simulate_human(
    program: &ActivityProgram,
    binding: &Binding,
    map: &SemanticMap,
    horizon: u32,
) -> Result<OccupancyTrace> {
    let rooms_of = action_rooms(program, binding, map)?;
    let steps = horizon as usize + 1;
    let mut rooms = Vec::with_capacity(steps);
    let mut log = Vec::new();
    let mut t: u64 = 0;
    'outer: loop {
        for (index, (action, &room)) in program.actions.iter().zip(&rooms_of).enumerate() {
            let end = t + action.duration as u64;
            while (rooms.len() as u64) < end.min(steps as u64) {
                rooms.push(room);
            }
            if end <= horizon as u64 {
                log.push(CompletedAction {
                    time: end as u32,
                    index,
                    action: action.clone(),
                    room,
                });
            }
            t = end;
            if rooms.len() == steps {
                break 'outer;
            }
        }
    }
    Ok(OccupancyTrace {
        rooms,
        log,
        n_rooms: map.n_rooms(),
    })
}
