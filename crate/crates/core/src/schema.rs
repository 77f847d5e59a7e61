//! Domain schema: the intent and slot registries every other module indexes into.
//!
//! Registry order is significant. The state featurizer and the agent action
//! space are both laid out in registry order, so a schema must not change
//! between training a policy and loading it again.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placeholder value carried by every requested slot.
pub const UNK: &str = "UNK";
/// Value a user gives for a slot it has no preference on.
pub const ANYTHING: &str = "anything";
/// Reserved pseudo-slot the agent informs when it is ready to book.
pub const TASKCOMPLETE: &str = "taskcomplete";
/// Value of `taskcomplete` when the booking can go ahead.
pub const TASKCOMPLETE_OK: &str = "taskcomplete";
/// Value of `taskcomplete` when no record matches the user's constraints.
pub const NO_TICKET_AVAILABLE: &str = "no ticket available";
/// Value an agent informs when the KB has nothing for a slot.
pub const NO_MATCH: &str = "no match available";

const DEFAULT_SCHEMA: &str = include_str!("../../../data/schema.json");
const TINY_SCHEMA: &str = include_str!("../../../data/tiny/schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub informable: bool,
    pub requestable: bool,
    /// Whether the slot is a KB attribute. Slots such as `numberofpeople` or
    /// `ticket` constrain the booking but never the record lookup.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub kb_lookup: bool,
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    intents: Vec<String>,
    slots: Vec<SlotSpec>,
    required_slots: Vec<String>,
    default_request_slot: String,
    max_turn: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSchema {
    intents: Vec<String>,
    slots: Vec<SlotSpec>,
    required_slots: Vec<String>,
    default_request_slot: String,
    max_turn: u32,
    intent_index: HashMap<String, usize>,
    slot_index: HashMap<String, usize>,
}

impl DomainSchema {
    /// The shipped movie-booking schema (11 intents, 29 slots).
    pub fn movie_default() -> Self {
        Self::from_json(DEFAULT_SCHEMA).expect("bundled schema is valid")
    }

    /// Reduced schema for fast learning experiments (5 intents, 8 slots).
    pub fn tiny() -> Self {
        Self::from_json(TINY_SCHEMA).expect("bundled schema is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile =
            serde_json::from_str(text).map_err(|e| Error::parse("schema", e))?;
        Self::new(
            file.intents,
            file.slots,
            file.required_slots,
            file.default_request_slot,
            file.max_turn,
        )
    }

    pub fn new(
        intents: Vec<String>,
        slots: Vec<SlotSpec>,
        required_slots: Vec<String>,
        default_request_slot: String,
        max_turn: u32,
    ) -> Result<Self> {
        let mut intent_index = HashMap::new();
        for (i, name) in intents.iter().enumerate() {
            check_name("intent", name)?;
            if intent_index.insert(name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate intent `{name}`")));
            }
        }
        let mut slot_index = HashMap::new();
        for (i, slot) in slots.iter().enumerate() {
            check_name("slot", &slot.name)?;
            if slot_index.insert(slot.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate slot `{}`", slot.name)));
            }
        }
        let mut seen = HashSet::new();
        for name in &required_slots {
            let Some(&i) = slot_index.get(name) else {
                return Err(Error::Schema(format!("required slot `{name}` is not a slot")));
            };
            if !slots[i].informable {
                return Err(Error::Schema(format!(
                    "required slot `{name}` must be informable"
                )));
            }
            if !seen.insert(name) {
                return Err(Error::Schema(format!("required slot `{name}` listed twice")));
            }
        }
        match slot_index.get(&default_request_slot) {
            Some(&i) if slots[i].requestable => {}
            Some(_) => {
                return Err(Error::Schema(format!(
                    "default request slot `{default_request_slot}` must be requestable"
                )))
            }
            None => {
                return Err(Error::Schema(format!(
                    "default request slot `{default_request_slot}` is not a slot"
                )))
            }
        }
        if max_turn == 0 || max_turn % 2 != 0 {
            return Err(Error::Schema(format!(
                "max_turn must be a positive even integer, got {max_turn}"
            )));
        }
        Ok(Self {
            intents,
            slots,
            required_slots,
            default_request_slot,
            max_turn,
            intent_index,
            slot_index,
        })
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            intents: self.intents.clone(),
            slots: self.slots.clone(),
            required_slots: self.required_slots.clone(),
            default_request_slot: self.default_request_slot.clone(),
            max_turn: self.max_turn,
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn slots(&self) -> &[SlotSpec] {
        &self.slots
    }

    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn required_slots(&self) -> &[String] {
        &self.required_slots
    }

    pub fn default_request_slot(&self) -> &str {
        &self.default_request_slot
    }

    pub fn max_turn(&self) -> u32 {
        self.max_turn
    }

    /// Copy of this schema with a different turn limit.
    pub fn with_max_turn(&self, max_turn: u32) -> Result<Self> {
        Self::new(
            self.intents.clone(),
            self.slots.clone(),
            self.required_slots.clone(),
            self.default_request_slot.clone(),
            max_turn,
        )
    }

    pub fn num_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn intent_index(&self, name: &str) -> Option<usize> {
        self.intent_index.get(name).copied()
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slot_index.get(name).copied()
    }

    pub fn has_intent(&self, name: &str) -> bool {
        self.intent_index.contains_key(name)
    }

    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slot_index(name).map(|i| &self.slots[i])
    }

    pub fn is_informable(&self, name: &str) -> bool {
        self.slot(name).is_some_and(|s| s.informable)
    }

    pub fn is_requestable(&self, name: &str) -> bool {
        self.slot(name).is_some_and(|s| s.requestable)
    }

    /// Informable slots that take part in KB lookups.
    pub fn is_lookup(&self, name: &str) -> bool {
        self.slot(name)
            .is_some_and(|s| s.informable && s.kb_lookup && !is_pseudo_slot(name))
    }

    pub fn is_required(&self, name: &str) -> bool {
        self.required_slots.iter().any(|s| s == name)
    }

    pub fn requestable_slots(&self) -> impl Iterator<Item = &str> {
        self.slots
            .iter()
            .filter(|s| s.requestable)
            .map(|s| s.name.as_str())
    }

    /// Informable slots excluding reserved pseudo-slots.
    pub fn informable_slots(&self) -> impl Iterator<Item = &str> {
        self.slots
            .iter()
            .filter(|s| s.informable && !is_pseudo_slot(&s.name))
            .map(|s| s.name.as_str())
    }
}

impl Default for DomainSchema {
    fn default() -> Self {
        Self::movie_default()
    }
}

pub fn is_pseudo_slot(name: &str) -> bool {
    name == TASKCOMPLETE
}

fn check_name(kind: &str, name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::Schema(format!("empty {kind} name")));
    }
    if name.chars().any(|c| c.is_uppercase() || c.is_whitespace()) {
        return Err(Error::Schema(format!(
            "{kind} name `{name}` must be lowercase without whitespace"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "intents": ["request", "inform"],
            "slots": [
                {"name": "moviename", "informable": true, "requestable": true},
                {"name": "ticket", "informable": false, "requestable": true, "kb_lookup": false},
                {"name": "taskcomplete", "informable": true, "requestable": false, "kb_lookup": false}
            ],
            "required_slots": ["moviename"],
            "default_request_slot": "ticket",
            "max_turn": 20
        }"#
    }

    #[test]
    fn default_schema_counts() {
        let schema = DomainSchema::movie_default();
        assert_eq!(schema.num_intents(), 11);
        assert_eq!(schema.num_slots(), 29);
        assert_eq!(schema.default_request_slot(), "ticket");
        assert_eq!(schema.max_turn(), 40);
        for s in ["moviename", "theater", "starttime", "date", "numberofpeople"] {
            assert!(schema.is_required(s), "{s}");
        }
        assert!(!schema.is_lookup("numberofpeople"));
        assert!(schema.is_lookup("theater"));
    }

    #[test]
    fn minimal_schema_loads() {
        let schema = DomainSchema::from_json(minimal()).unwrap();
        assert_eq!(schema.num_intents(), 2);
        assert_eq!(schema.num_slots(), 3);
        assert_eq!(schema.informable_slots().collect::<Vec<_>>(), ["moviename"]);
    }

    #[test]
    fn required_slot_must_be_informable() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_SCHEMA).unwrap();
        let slot = v["slots"]
            .as_array_mut()
            .unwrap()
            .iter_mut()
            .find(|s| s["name"] == "numberofpeople")
            .unwrap();
        slot["informable"] = false.into();
        let text = v.to_string();
        let err = DomainSchema::from_json(&text).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("numberofpeople")), "{err}");
    }

    #[test]
    fn rejects_duplicates_and_bad_names() {
        let dup = minimal().replace(r#"["request", "inform"]"#, r#"["inform", "inform"]"#);
        assert!(DomainSchema::from_json(&dup).is_err());
        let upper = minimal().replace(r#"["request", "inform"]"#, r#"["Request", "inform"]"#);
        assert!(DomainSchema::from_json(&upper).is_err());
        let odd = minimal().replace(r#""max_turn": 20"#, r#""max_turn": 21"#);
        assert!(DomainSchema::from_json(&odd).is_err());
        let not_req = minimal().replace(
            r#""default_request_slot": "ticket""#,
            r#""default_request_slot": "taskcomplete""#,
        );
        assert!(DomainSchema::from_json(&not_req).is_err());
    }

    #[test]
    fn json_round_trip() {
        let schema = DomainSchema::movie_default();
        let again = DomainSchema::from_json(&schema.to_json()).unwrap();
        assert_eq!(schema, again);
    }
}
