//! Template-based narration of the observation history.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::activity::{AtomicAction, CompletedAction};
use crate::error::{Error, Result};
use crate::map::SemanticMap;

pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedAction {
    pub time: u32,
    pub action: AtomicAction,
    pub room: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceState {
    pub label: String,
    pub state: String,
    pub minutes: u32,
}

/// The last `window_size` completed actions, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationHistory {
    window: Vec<ObservedAction>,
    window_size: usize,
    pub appliance_states: Vec<ApplianceState>,
}

impl ObservationHistory {
    pub fn new(window_size: usize) -> Self {
        ObservationHistory {
            window: Vec::new(),
            window_size,
            appliance_states: Vec::new(),
        }
    }

    /// Appends an observation, evicting the oldest once the window is full.
    pub fn push(&mut self, obs: ObservedAction) {
        if let Some(last) = self.window.last() {
            assert!(obs.time >= last.time, "observations must arrive in time order");
        }
        self.window.push(obs);
        if self.window.len() > self.window_size {
            self.window.remove(0);
        }
    }

    /// Keeps the tail of a completed-action log.
    pub fn from_log(log: &[CompletedAction], window_size: usize, map: Option<&SemanticMap>) -> Self {
        let start = log.len().saturating_sub(window_size);
        let window = log[start..]
            .iter()
            .map(|c| ObservedAction {
                time: c.time,
                action: c.action.clone(),
                room: map.and_then(|m| m.rooms().get(c.room)).map(|r| r.name.clone()),
            })
            .collect();
        ObservationHistory {
            window,
            window_size,
            appliance_states: Vec::new(),
        }
    }

    pub fn window(&self) -> &[ObservedAction] {
        &self.window
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }
}

/// Sentence patterns. Placeholders: `{verb}`, `{label}`, `{label2}`,
/// `{prep}`, `{room}`; appliance sentences use `{appliance}`, `{state}`,
/// `{minutes}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    #[serde(default)]
    pub header: String,
    #[serde(default)]
    pub action: String,
    #[serde(default)]
    pub action_no_item: String,
    #[serde(default)]
    pub action_two_items: String,
    #[serde(default)]
    pub appliance: String,
}

impl Template {
    pub fn activity_history() -> Self {
        Template {
            header: "A human is in the apartment. ".into(),
            action: "They {verb} the {label}. ".into(),
            action_no_item: "They {verb}. ".into(),
            action_two_items: "They {verb} the {label} {prep} the {label2}. ".into(),
            appliance: "The {appliance} switched {state} {minutes} minutes ago. ".into(),
        }
    }

    pub fn none() -> Self {
        Template {
            header: String::new(),
            action: String::new(),
            action_no_item: String::new(),
            action_two_items: String::new(),
            appliance: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Narration {
    pub text: String,
    pub style: String,
}

/// Template id → template. Always contains `default` and `none`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Template>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert("default".to_string(), Template::activity_history());
        templates.insert("none".to_string(), Template::none());
        TemplateRegistry { templates }
    }
}

impl TemplateRegistry {
    pub fn insert(&mut self, id: impl Into<String>, template: Template) {
        self.templates.insert(id.into(), template);
    }

    pub fn get(&self, id: &str) -> Result<&Template> {
        self.templates
            .get(id)
            .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

/// Past-tense phrase and the preposition used for a second item.
fn verb_phrase(verb: &str) -> (String, &'static str) {
    let (phrase, prep) = match verb {
        "Walk" => ("walked to", "with"),
        "Run" => ("ran to", "with"),
        "Grab" => ("grabbed", "with"),
        "Put" => ("put", "on"),
        "PutBack" => ("put back", "on"),
        "PutIn" => ("put", "in"),
        "PutOn" => ("put on", "with"),
        "PutOff" => ("took off", "with"),
        "Open" => ("opened", "with"),
        "Close" => ("closed", "with"),
        "SwitchOn" => ("switched on", "with"),
        "SwitchOff" => ("switched off", "with"),
        "Sit" => ("sat on", "with"),
        "StandUp" => ("stood up", "with"),
        "Lie" => ("lay on", "with"),
        "Sleep" => ("slept", "with"),
        "WakeUp" => ("woke up", "with"),
        "Watch" => ("watched", "with"),
        "LookAt" => ("looked at", "with"),
        "TurnTo" => ("turned to", "with"),
        "Eat" => ("ate from", "with"),
        "Drink" => ("drank from", "with"),
        "Cook" => ("cooked with", "on"),
        "Read" => ("read", "with"),
        "Wash" => ("washed", "with"),
        "Rinse" => ("rinsed", "with"),
        "Scrub" => ("scrubbed", "with"),
        "Wipe" => ("wiped", "with"),
        "Pour" => ("poured", "into"),
        "Type" => ("typed on", "with"),
        "Touch" => ("touched", "with"),
        "Drop" => ("dropped", "on"),
        "Release" => ("released", "on"),
        "Push" => ("pushed", "with"),
        "Pull" => ("pulled", "with"),
        "Work" => ("worked at", "with"),
        _ => return (verb.to_lowercase(), "with"),
    };
    (phrase.to_string(), prep)
}

fn fill(pattern: &str, vars: &[(&str, &str)]) -> String {
    let mut out = pattern.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn sentence(template: &Template, obs: &ObservedAction) -> String {
    let (verb, prep) = verb_phrase(&obs.action.verb);
    let room = obs.room.as_deref().unwrap_or("");
    let refs = &obs.action.item_refs;
    match refs.len() {
        0 => fill(&template.action_no_item, &[("verb", &verb), ("room", room)]),
        1 => fill(
            &template.action,
            &[("verb", &verb), ("label", &refs[0].label), ("room", room)],
        ),
        _ => fill(
            &template.action_two_items,
            &[
                ("verb", &verb),
                ("label", &refs[0].label),
                ("label2", &refs[1].label),
                ("prep", prep),
                ("room", room),
            ],
        ),
    }
}

/// Renders the history with the given template.
pub fn narrate(history: &ObservationHistory, template_id: &str, registry: &TemplateRegistry) -> Result<Narration> {
    let template = registry.get(template_id)?;
    let mut text = template.header.clone();
    for obs in &history.window {
        text.push_str(&sentence(template, obs));
    }
    for a in &history.appliance_states {
        let minutes = a.minutes.to_string();
        text.push_str(&fill(
            &template.appliance,
            &[("appliance", &a.label), ("state", &a.state), ("minutes", &minutes)],
        ));
    }
    Ok(Narration {
        text,
        style: template_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::ItemRef;

    fn obs(time: u32, verb: &str, labels: &[&str]) -> ObservedAction {
        ObservedAction {
            time,
            action: AtomicAction {
                verb: verb.into(),
                item_refs: labels
                    .iter()
                    .map(|l| ItemRef {
                        label: l.to_string(),
                        id: 1,
                    })
                    .collect(),
                duration: 1,
            },
            room: None,
        }
    }

    #[test]
    fn golden_default_narration() {
        let mut h = ObservationHistory::new(DEFAULT_WINDOW);
        h.push(obs(3, "Walk", &["mug"]));
        h.push(obs(4, "Grab", &["mug"]));
        let n = narrate(&h, "default", &TemplateRegistry::default()).unwrap();
        assert_eq!(
            n.text,
            "A human is in the apartment. They walked to the mug. They grabbed the mug. "
        );
        assert_eq!(n.style, "default");
    }

    #[test]
    fn empty_history() {
        let h = ObservationHistory::new(DEFAULT_WINDOW);
        let n = narrate(&h, "default", &TemplateRegistry::default()).unwrap();
        assert_eq!(n.text, "A human is in the apartment. ");
    }

    #[test]
    fn none_template_is_empty() {
        let mut h = ObservationHistory::new(DEFAULT_WINDOW);
        h.push(obs(1, "Walk", &["sink"]));
        h.appliance_states.push(ApplianceState {
            label: "dishwasher".into(),
            state: "off".into(),
            minutes: 5,
        });
        assert_eq!(narrate(&h, "none", &TemplateRegistry::default()).unwrap().text, "");
    }

    #[test]
    fn unknown_template() {
        let h = ObservationHistory::new(3);
        assert!(matches!(
            narrate(&h, "pirate", &TemplateRegistry::default()),
            Err(Error::UnknownTemplate(_))
        ));
    }

    #[test]
    fn zero_and_two_item_sentences() {
        let mut h = ObservationHistory::new(5);
        h.push(obs(1, "PutBack", &["juice", "coffeetable"]));
        h.push(obs(2, "Sleep", &[]));
        h.push(obs(3, "Juggle", &["ball"]));
        let n = narrate(&h, "default", &TemplateRegistry::default()).unwrap();
        assert_eq!(
            n.text,
            "A human is in the apartment. They put back the juice on the coffeetable. They slept. They juggle the ball. "
        );
    }

    #[test]
    fn appliance_sentences() {
        let mut h = ObservationHistory::new(5);
        h.appliance_states.push(ApplianceState {
            label: "washingmachine".into(),
            state: "off".into(),
            minutes: 12,
        });
        let n = narrate(&h, "default", &TemplateRegistry::default()).unwrap();
        assert!(n.text.ends_with("The washingmachine switched off 12 minutes ago. "));
    }

    #[test]
    fn room_placeholder_and_custom_template() {
        let mut reg = TemplateRegistry::default();
        reg.insert(
            "rooms",
            Template {
                action: "In the {room} they {verb} the {label}. ".into(),
                ..Template::none()
            },
        );
        let mut h = ObservationHistory::new(5);
        let mut o = obs(1, "Grab", &["mug"]);
        o.room = Some("kitchen".into());
        h.push(o);
        assert_eq!(
            narrate(&h, "rooms", &reg).unwrap().text,
            "In the kitchen they grabbed the mug. "
        );
    }

    #[test]
    fn window_keeps_latest_actions_in_order() {
        let labels = ["a", "b", "c", "d", "e", "f"];
        let mut h = ObservationHistory::new(4);
        for (t, l) in labels.iter().enumerate() {
            h.push(obs(t as u32, "Grab", &[l]));
        }
        assert_eq!(h.window().len(), 4);
        let text = narrate(&h, "default", &TemplateRegistry::default()).unwrap().text;
        let mut last = 0;
        for l in &labels[2..] {
            let needle = format!("grabbed the {l}.");
            assert_eq!(text.matches(&needle).count(), 1);
            let pos = text.find(&needle).unwrap();
            assert!(pos >= last);
            last = pos;
        }
        assert!(!text.contains("the a."));
    }
}
