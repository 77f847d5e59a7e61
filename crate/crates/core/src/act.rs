//! Dialog acts, user goals and dialogue status.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{is_pseudo_slot, DomainSchema, TASKCOMPLETE, UNK};

pub type SlotValues = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

impl Speaker {
    pub fn other(self) -> Self {
        match self {
            Speaker::User => Speaker::Agent,
            Speaker::Agent => Speaker::User,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::User => "user",
            Speaker::Agent => "agent",
        }
    }
}

/// One turn's semantic frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogAct {
    pub speaker: Speaker,
    #[serde(alias = "diaact")]
    pub intent: String,
    #[serde(default)]
    pub inform_slots: SlotValues,
    #[serde(default)]
    pub request_slots: SlotValues,
    #[serde(default)]
    pub turn: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nl: Option<String>,
}

impl DialogAct {
    pub fn new(speaker: Speaker, intent: impl Into<String>) -> Self {
        Self {
            speaker,
            intent: intent.into(),
            inform_slots: SlotValues::new(),
            request_slots: SlotValues::new(),
            turn: 0,
            nl: None,
        }
    }

    pub fn user(intent: impl Into<String>) -> Self {
        Self::new(Speaker::User, intent)
    }

    pub fn agent(intent: impl Into<String>) -> Self {
        Self::new(Speaker::Agent, intent)
    }

    pub fn inform(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.inform_slots.insert(slot.into(), value.into());
        self
    }

    pub fn request(mut self, slot: impl Into<String>) -> Self {
        self.request_slots.insert(slot.into(), UNK.to_string());
        self
    }

    pub fn at_turn(mut self, turn: u32) -> Self {
        self.turn = turn;
        self
    }

    pub fn with_nl(mut self, nl: impl Into<String>) -> Self {
        self.nl = Some(nl.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.inform_slots.is_empty() && self.request_slots.is_empty()
    }

    /// Structural equality ignoring turn and surface text.
    pub fn same_frame(&self, other: &DialogAct) -> bool {
        self.speaker == other.speaker
            && self.intent == other.intent
            && self.inform_slots == other.inform_slots
            && self.request_slots == other.request_slots
    }

    /// Render in the compact `intent(slot=value;slot)` notation.
    pub fn to_act_string(&self) -> String {
        self.to_string()
    }
}

/// `request(moviename;starttime)`, `inform(theater=carmike summit 16)`,
/// `thanks()`. Informs print before requests.
impl fmt::Display for DialogAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.intent)?;
        let mut first = true;
        for (slot, value) in &self.inform_slots {
            if !first {
                f.write_str(";")?;
            }
            first = false;
            write!(f, "{slot}={value}")?;
        }
        for slot in self.request_slots.keys() {
            if !first {
                f.write_str(";")?;
            }
            first = false;
            f.write_str(slot)?;
        }
        f.write_str(")")
    }
}

/// Parses the compact notation into an agent act with turn 0; callers fix
/// speaker and turn. A bare slot (no `=`) is a request.
impl FromStr for DialogAct {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| Error::InvalidAct(format!("missing `(` in `{s}`")))?;
        if !s.ends_with(')') {
            return Err(Error::InvalidAct(format!("missing `)` in `{s}`")));
        }
        let intent = s[..open].trim().to_lowercase();
        if intent.is_empty() {
            return Err(Error::InvalidAct(format!("missing intent in `{s}`")));
        }
        let mut act = DialogAct::agent(intent);
        let body = &s[open + 1..s.len() - 1];
        for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((slot, value)) => {
                    let slot = slot.trim().to_lowercase();
                    let value = value.trim();
                    if slot.is_empty() {
                        return Err(Error::InvalidAct(format!("empty slot in `{s}`")));
                    }
                    act.inform_slots.insert(slot, value.to_string());
                }
                // `inform(taskcomplete)` books whatever the tracker holds.
                None if act.intent == "inform" && part.eq_ignore_ascii_case(TASKCOMPLETE) => {
                    act.inform_slots.insert(TASKCOMPLETE.to_string(), crate::dst::PLACEHOLDER.to_string());
                }
                None => {
                    act.request_slots.insert(part.to_lowercase(), UNK.to_string());
                }
            }
        }
        Ok(act)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownIntent(String),
    UnknownSlot(String),
    Disjointness(String),
    TurnParity { speaker: Speaker, turn: u32 },
    EmptyValue(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownIntent(i) => write!(f, "unknown intent `{i}`"),
            Violation::UnknownSlot(s) => write!(f, "unknown slot `{s}`"),
            Violation::Disjointness(s) => {
                write!(f, "disjointness: `{s}` is both informed and requested")
            }
            Violation::TurnParity { speaker, turn } => {
                write!(f, "turn parity: {} act at turn {turn}", speaker.as_str())
            }
            Violation::EmptyValue(s) => write!(f, "empty value for slot `{s}`"),
        }
    }
}

/// Checks every act invariant against the schema; violations are collected,
/// not short-circuited.
pub fn validate_act(schema: &DomainSchema, act: &DialogAct) -> Vec<Violation> {
    let mut out = Vec::new();
    if !schema.has_intent(&act.intent) {
        out.push(Violation::UnknownIntent(act.intent.clone()));
    }
    for (slot, value) in &act.inform_slots {
        if schema.slot(slot).is_none() {
            out.push(Violation::UnknownSlot(slot.clone()));
        }
        if value.trim().is_empty() {
            out.push(Violation::EmptyValue(slot.clone()));
        }
    }
    for slot in act.request_slots.keys() {
        if schema.slot(slot).is_none() {
            out.push(Violation::UnknownSlot(slot.clone()));
        }
        if act.inform_slots.contains_key(slot) {
            out.push(Violation::Disjointness(slot.clone()));
        }
    }
    let even = act.turn % 2 == 0;
    if (act.speaker == Speaker::User) != even {
        out.push(Violation::TurnParity {
            speaker: act.speaker,
            turn: act.turn,
        });
    }
    out
}

pub fn ensure_valid(schema: &DomainSchema, act: &DialogAct) -> Result<()> {
    let violations = validate_act(schema, act);
    if violations.is_empty() {
        Ok(())
    } else {
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidAct(format!("{act}: {msg}")))
    }
}

/// What the simulated user wants: constraints plus requests.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserGoal {
    #[serde(default)]
    pub inform_slots: SlotValues,
    #[serde(default)]
    pub request_slots: SlotValues,
}

impl UserGoal {
    pub fn new() -> Self {
        Self {
            inform_slots: SlotValues::new(),
            request_slots: SlotValues::new(),
        }
    }

    pub fn constrain(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.inform_slots.insert(slot.into(), value.into());
        self
    }

    pub fn want(mut self, slot: impl Into<String>) -> Self {
        self.request_slots.insert(slot.into(), UNK.to_string());
        self
    }

    pub fn validate(&self, schema: &DomainSchema) -> Result<()> {
        for (slot, value) in &self.inform_slots {
            if !schema.is_informable(slot) || is_pseudo_slot(slot) {
                return Err(Error::InvalidGoal(format!(
                    "`{slot}` cannot be a goal constraint"
                )));
            }
            if value.trim().is_empty() {
                return Err(Error::InvalidGoal(format!("empty value for `{slot}`")));
            }
        }
        for slot in self.request_slots.keys() {
            if !schema.is_requestable(slot) {
                return Err(Error::InvalidGoal(format!("`{slot}` is not requestable")));
            }
            if self.inform_slots.contains_key(slot) {
                return Err(Error::InvalidGoal(format!(
                    "`{slot}` is both a constraint and a request"
                )));
            }
        }
        for req in schema.required_slots() {
            if !self.inform_slots.contains_key(req) && !self.request_slots.contains_key(req) {
                return Err(Error::InvalidGoal(format!("required slot `{req}` missing")));
            }
        }
        if !self
            .request_slots
            .contains_key(schema.default_request_slot())
        {
            return Err(Error::InvalidGoal(format!(
                "default request slot `{}` missing",
                schema.default_request_slot()
            )));
        }
        Ok(())
    }

    /// Canonical serialization used for deduplication.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("goal serializes")
    }

    /// The goal block as printed at the start of an episode.
    pub fn to_display_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert(
            "request_slots".into(),
            serde_json::to_value(&self.request_slots).unwrap(),
        );
        map.insert("diaact".into(), "request".into());
        map.insert(
            "inform_slots".into(),
            serde_json::to_value(&self.inform_slots).unwrap(),
        );
        serde_json::Value::Object(map)
    }
}

impl Default for UserGoal {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueStatus {
    NoOutcomeYet,
    Success,
    Failure,
}

impl DialogueStatus {
    pub fn is_terminal(self) -> bool {
        self != DialogueStatus::NoOutcomeYet
    }
}

impl fmt::Display for DialogueStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DialogueStatus::NoOutcomeYet => "no_outcome_yet",
            DialogueStatus::Success => "success",
            DialogueStatus::Failure => "failure",
        })
    }
}
