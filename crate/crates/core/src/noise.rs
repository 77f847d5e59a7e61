//! Act-level error model standing in for NLU noise.
//!
//! Two independent channels act on an outgoing user act: the intent channel
//! swaps the intent for a different one, and the slot channel corrupts each
//! informed slot on its own coin flip by deleting it, changing its value, or
//! replacing both slot and value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::act::DialogAct;
use crate::error::{Error, Result};
use crate::corpus::GoalDatabase;
use crate::kb::{values_equal, KnowledgeBase};
use crate::schema::{is_pseudo_slot, DomainSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotErrorMode {
    /// Keep the slot, draw a different value from its vocabulary.
    Value,
    /// Replace the slot with another informable slot and a random value.
    Slot,
    /// Drop the slot.
    Delete,
    /// One of the three above, uniformly, per corruption event.
    #[default]
    Mixed,
}

impl fmt::Display for SlotErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlotErrorMode::Value => "value",
            SlotErrorMode::Slot => "slot",
            SlotErrorMode::Delete => "delete",
            SlotErrorMode::Mixed => "mixed",
        })
    }
}

impl FromStr for SlotErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "value" => Ok(SlotErrorMode::Value),
            "slot" => Ok(SlotErrorMode::Slot),
            "delete" => Ok(SlotErrorMode::Delete),
            "mixed" => Ok(SlotErrorMode::Mixed),
            other => Err(Error::Config(format!("unknown slot error mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelConfig {
    pub intent_err_prob: f64,
    pub slot_err_prob: f64,
    #[serde(default)]
    pub slot_err_mode: SlotErrorMode,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

impl ErrorModelConfig {
    pub fn off() -> Self {
        Self {
            intent_err_prob: 0.0,
            slot_err_prob: 0.0,
            slot_err_mode: SlotErrorMode::Mixed,
            enabled: false,
        }
    }

    pub fn new(intent_err_prob: f64, slot_err_prob: f64, mode: SlotErrorMode) -> Result<Self> {
        let cfg = Self {
            intent_err_prob,
            slot_err_prob,
            slot_err_mode: mode,
            enabled: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("intent_err_prob", self.intent_err_prob),
            ("slot_err_prob", self.slot_err_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.enabled && (self.intent_err_prob > 0.0 || self.slot_err_prob > 0.0)
    }
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        Self::off()
    }
}

/// Values each slot can take, used to draw substitute values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    values: BTreeMap<String, Vec<String>>,
}

impl Vocabulary {
    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let mut vocab = Self::default();
        for slot in kb.schema().informable_slots() {
            for v in kb.vocabulary(slot) {
                vocab.add(slot, v);
            }
        }
        vocab
    }

    /// KB values plus the constraint values of every goal, so slots that are
    /// not KB attributes (`numberofpeople`) still have a vocabulary.
    pub fn from_kb_and_goals(kb: &KnowledgeBase, goals: &GoalDatabase) -> Self {
        let mut vocab = Self::from_kb(kb);
        for goal in goals.goals() {
            for (slot, value) in &goal.inform_slots {
                vocab.add(slot, value.clone());
            }
        }
        vocab
    }

    pub fn add(&mut self, slot: &str, value: String) {
        let entry = self.values.entry(slot.to_string()).or_default();
        if !entry.iter().any(|v| values_equal(v, &value)) {
            entry.push(value);
        }
    }

    pub fn values(&self, slot: &str) -> &[String] {
        self.values.get(slot).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, slot: &str, value: &str) -> bool {
        self.values(slot).iter().any(|v| values_equal(v, value))
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.values
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, _)| k.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.values.values().all(Vec::is_empty)
    }
}

/// Returns a corrupted copy of `act`; the input is never modified. Draw order
/// is fixed (intent first, then slots in key order), so replaying the same
/// rng stream reproduces the output exactly.
pub fn corrupt<R: Rng + ?Sized>(
    act: &DialogAct,
    cfg: &ErrorModelConfig,
    schema: &DomainSchema,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<DialogAct> {
    if !cfg.is_active() {
        return Ok(act.clone());
    }
    if vocab.is_empty()
        && cfg.slot_err_prob > 0.0
        && matches!(cfg.slot_err_mode, SlotErrorMode::Value | SlotErrorMode::Mixed)
    {
        return Err(Error::Noise(
            "value corruption needs a non-empty KB vocabulary".into(),
        ));
    }
    let mut out = act.clone();

    if rng.gen::<f64>() < cfg.intent_err_prob {
        let others: Vec<&String> = schema
            .intents()
            .iter()
            .filter(|i| **i != act.intent)
            .collect();
        if let Some(intent) = others.choose(rng) {
            out.intent = (*intent).clone();
        }
    }

    for (slot, value) in &act.inform_slots {
        if is_pseudo_slot(slot) || rng.gen::<f64>() >= cfg.slot_err_prob {
            continue;
        }
        let mode = match cfg.slot_err_mode {
            SlotErrorMode::Mixed => *[SlotErrorMode::Value, SlotErrorMode::Slot, SlotErrorMode::Delete]
                .choose(rng)
                .unwrap(),
            m => m,
        };
        match mode {
            SlotErrorMode::Delete => {
                out.inform_slots.remove(slot);
            }
            SlotErrorMode::Value => {
                let alternatives: Vec<&String> = vocab
                    .values(slot)
                    .iter()
                    .filter(|v| !values_equal(v, value))
                    .collect();
                if let Some(v) = alternatives.choose(rng) {
                    out.inform_slots.insert(slot.clone(), (*v).clone());
                }
            }
            SlotErrorMode::Slot => {
                let candidates: Vec<&str> = schema
                    .informable_slots()
                    .filter(|s| {
                        *s != slot
                            && !out.inform_slots.contains_key(*s)
                            && !out.request_slots.contains_key(*s)
                            && !vocab.values(s).is_empty()
                    })
                    .collect();
                if let Some(&new_slot) = candidates.choose(rng) {
                    let new_value = vocab.values(new_slot).choose(rng).unwrap().clone();
                    out.inform_slots.remove(slot);
                    out.inform_slots.insert(new_slot.to_string(), new_value);
                }
            }
            SlotErrorMode::Mixed => unreachable!(),
        }
    }
    Ok(out)
}
