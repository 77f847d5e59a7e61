//! Agent-side dialogue state tracking.
//!
//! The tracker accumulates both parties' acts, keeps the KB query for the
//! user's constraints current, forces agent informs onto KB-suggested values,
//! and lays the state out as a fixed-length vector for the Q-network.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::act::{ensure_valid, DialogAct, SlotValues, Speaker};
use crate::error::{Error, Result};
use crate::kb::{values_equal, KnowledgeBase, QueryResult};
use crate::schema::{is_pseudo_slot, DomainSchema, NO_MATCH, NO_TICKET_AVAILABLE, TASKCOMPLETE, TASKCOMPLETE_OK};

/// Value carried by agent informs before the tracker fills them in.
pub const PLACEHOLDER: &str = "PLACEHOLDER";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogState {
    pub turn: u32,
    pub last_user_act: Option<DialogAct>,
    pub last_agent_act: Option<DialogAct>,
    pub user_constraints: SlotValues,
    pub user_requests_seen: BTreeSet<String>,
    pub agent_informed: SlotValues,
    pub kb_result: QueryResult,
    /// Per schema slot: whether some matching record defines it.
    pub kb_available: Vec<bool>,
    pub history: Vec<DialogAct>,
}

impl DialogState {
    fn fresh(kb: &KnowledgeBase) -> Self {
        let kb_result = kb.query(&SlotValues::new()).expect("empty query is valid");
        let kb_available = availability(kb, &kb_result);
        Self {
            turn: 0,
            last_user_act: None,
            last_agent_act: None,
            user_constraints: SlotValues::new(),
            user_requests_seen: BTreeSet::new(),
            agent_informed: SlotValues::new(),
            kb_result,
            kb_available,
            history: Vec::new(),
        }
    }

    fn expected_turn(&self) -> u32 {
        self.history.last().map_or(0, |a| a.turn + 1)
    }
}

fn availability(kb: &KnowledgeBase, result: &QueryResult) -> Vec<bool> {
    let schema = kb.schema();
    let mut out = kb.slots_defined(&result.matches);
    for (flag, spec) in out.iter_mut().zip(schema.slots()) {
        *flag &= spec.informable && !is_pseudo_slot(&spec.name);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "slot", rename_all = "snake_case")]
pub enum AgentAction {
    Request(String),
    Inform(String),
    TaskComplete,
    Thanks,
    Closing,
}

/// The agent's discrete action space, in schema-registry order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    actions: Vec<AgentAction>,
}

impl ActionSpace {
    pub fn new(schema: &DomainSchema) -> Self {
        let mut actions: Vec<AgentAction> = schema
            .requestable_slots()
            .map(|s| AgentAction::Request(s.to_string()))
            .collect();
        actions.extend(schema.informable_slots().map(|s| AgentAction::Inform(s.to_string())));
        actions.push(AgentAction::TaskComplete);
        actions.push(AgentAction::Thanks);
        actions.push(AgentAction::Closing);
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[AgentAction] {
        &self.actions
    }

    pub fn get(&self, index: usize) -> Result<&AgentAction> {
        self.actions.get(index).ok_or(Error::ActionOutOfRange {
            index,
            size: self.actions.len(),
        })
    }

    /// The abstract act for `index`, informs carrying [`PLACEHOLDER`].
    pub fn act(&self, index: usize) -> Result<DialogAct> {
        Ok(match self.get(index)? {
            AgentAction::Request(s) => DialogAct::agent("request").request(s.clone()),
            AgentAction::Inform(s) => DialogAct::agent("inform").inform(s.clone(), PLACEHOLDER),
            AgentAction::TaskComplete => DialogAct::agent("inform").inform(TASKCOMPLETE, PLACEHOLDER),
            AgentAction::Thanks => DialogAct::agent("thanks"),
            AgentAction::Closing => DialogAct::agent("closing"),
        })
    }

    /// Index of the action whose frame shape matches `act`, ignoring values.
    pub fn index_of(&self, act: &DialogAct) -> Option<usize> {
        let wanted = match (act.intent.as_str(), act.inform_slots.len(), act.request_slots.len()) {
            ("request", 0, 1) => AgentAction::Request(act.request_slots.keys().next()?.clone()),
            ("inform", 1, 0) => {
                let slot = act.inform_slots.keys().next()?;
                if slot == TASKCOMPLETE {
                    AgentAction::TaskComplete
                } else {
                    AgentAction::Inform(slot.clone())
                }
            }
            ("thanks", 0, 0) => AgentAction::Thanks,
            ("closing", 0, 0) => AgentAction::Closing,
            _ => return None,
        };
        self.actions.iter().position(|a| *a == wanted)
    }
}

/// Length of the state vector for a schema.
pub fn state_dim(schema: &DomainSchema) -> usize {
    2 * schema.num_intents() + 7 * schema.num_slots() + 3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub intents: Vec<String>,
    pub slots: Vec<String>,
    pub sections: Vec<(String, usize)>,
}

impl FeatureLayout {
    pub fn new(schema: &DomainSchema) -> Self {
        let i = schema.num_intents();
        let s = schema.num_slots();
        let sections = [
            ("user_intent", i),
            ("user_inform_slots", s),
            ("user_request_slots", s),
            ("agent_intent", i),
            ("agent_inform_slots", s),
            ("agent_request_slots", s),
            ("user_constraints", s),
            ("user_requests_seen", s),
            ("kb_available", s),
            ("scalars", 3),
        ]
        .into_iter()
        .map(|(n, l)| (n.to_string(), l))
        .collect();
        Self {
            intents: schema.intents().to_vec(),
            slots: schema.slot_names().map(str::to_string).collect(),
            sections,
        }
    }

    pub fn dim(&self) -> usize {
        self.sections.iter().map(|(_, l)| l).sum()
    }
}

/// Builds state vectors: intent one-hots, slot bitmaps for both last acts and
/// the accumulated state, KB availability, then turn progress, match
/// fraction and a non-empty-match flag.
pub fn featurize(state: &DialogState, schema: &DomainSchema, max_turn: u32, kb_len: usize) -> Vec<f64> {
    let ni = schema.num_intents();
    let ns = schema.num_slots();
    let mut v = vec![0.0; state_dim(schema)];
    let mut off = 0;

    let put_act = |v: &mut Vec<f64>, off: &mut usize, act: Option<&DialogAct>| {
        if let Some(act) = act {
            if let Some(i) = schema.intent_index(&act.intent) {
                v[*off + i] = 1.0;
            }
            for slot in act.inform_slots.keys() {
                if let Some(i) = schema.slot_index(slot) {
                    v[*off + ni + i] = 1.0;
                }
            }
            for slot in act.request_slots.keys() {
                if let Some(i) = schema.slot_index(slot) {
                    v[*off + ni + ns + i] = 1.0;
                }
            }
        }
        *off += ni + 2 * ns;
    };
    put_act(&mut v, &mut off, state.last_user_act.as_ref());
    put_act(&mut v, &mut off, state.last_agent_act.as_ref());

    for slot in state.user_constraints.keys() {
        if let Some(i) = schema.slot_index(slot) {
            v[off + i] = 1.0;
        }
    }
    off += ns;
    for slot in &state.user_requests_seen {
        if let Some(i) = schema.slot_index(slot) {
            v[off + i] = 1.0;
        }
    }
    off += ns;
    for (i, &a) in state.kb_available.iter().enumerate().take(ns) {
        if a {
            v[off + i] = 1.0;
        }
    }
    off += ns;

    v[off] = (state.turn as f64 / max_turn.max(1) as f64).min(1.0);
    v[off + 1] = if kb_len == 0 {
        0.0
    } else {
        (state.kb_result.len() as f64 / kb_len as f64).min(1.0)
    };
    v[off + 2] = if state.kb_result.is_empty() { 0.0 } else { 1.0 };
    v
}

#[derive(Debug, Clone)]
pub struct StateTracker {
    kb: Arc<KnowledgeBase>,
    max_turn: u32,
    state: DialogState,
}

impl StateTracker {
    pub fn new(kb: Arc<KnowledgeBase>, max_turn: u32) -> Self {
        let state = DialogState::fresh(&kb);
        Self { kb, max_turn, state }
    }

    pub fn reset(&mut self) {
        self.state = DialogState::fresh(&self.kb);
    }

    pub fn state(&self) -> &DialogState {
        &self.state
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn schema(&self) -> &Arc<DomainSchema> {
        self.kb.schema()
    }

    pub fn max_turn(&self) -> u32 {
        self.max_turn
    }

    pub fn featurize(&self) -> Vec<f64> {
        featurize(&self.state, self.kb.schema(), self.max_turn, self.kb.len())
    }

    pub fn update_user(&mut self, act: &DialogAct) -> Result<()> {
        self.check_turn(act, Speaker::User)?;
        ensure_valid(self.kb.schema(), act)?;
        for (slot, value) in &act.inform_slots {
            self.state.user_constraints.insert(slot.clone(), value.clone());
        }
        for slot in act.request_slots.keys() {
            self.state.user_requests_seen.insert(slot.clone());
        }
        self.state.kb_result = self.kb.query(&self.state.user_constraints)?;
        self.state.kb_available = availability(&self.kb, &self.state.kb_result);
        self.state.turn = act.turn;
        self.state.last_user_act = Some(act.clone());
        self.state.history.push(act.clone());
        Ok(())
    }

    /// Records an agent act after correcting its values; returns the act the
    /// user will actually receive.
    pub fn update_agent(&mut self, act: &DialogAct) -> Result<DialogAct> {
        self.check_turn(act, Speaker::Agent)?;
        let corrected = self.correct(act)?;
        ensure_valid(self.kb.schema(), &corrected)?;
        for (slot, value) in &corrected.inform_slots {
            self.state.agent_informed.insert(slot.clone(), value.clone());
        }
        self.state.turn = corrected.turn;
        self.state.last_agent_act = Some(corrected.clone());
        self.state.history.push(corrected.clone());
        Ok(corrected)
    }

    /// The concrete act for an abstract action index in the current state.
    pub fn materialize(&self, actions: &ActionSpace, index: usize) -> Result<DialogAct> {
        let act = actions.act(index)?.at_turn(self.state.expected_turn());
        self.correct(&act)
    }

    /// KB-admissible values for `slot` under the user's constraints so far.
    pub fn suggestions(&self, slot: &str) -> Result<Vec<String>> {
        self.kb.suggest_values(slot, &self.state.user_constraints)
    }

    /// Forces every agent inform onto the suggested list; `taskcomplete`
    /// reports whether any record matches.
    pub fn correct(&self, act: &DialogAct) -> Result<DialogAct> {
        let mut out = act.clone();
        for (slot, value) in act.inform_slots.iter() {
            let fixed = if slot == TASKCOMPLETE {
                if self.state.kb_result.is_empty() {
                    NO_TICKET_AVAILABLE.to_string()
                } else {
                    TASKCOMPLETE_OK.to_string()
                }
            } else {
                if self.kb.schema().slot(slot).is_none() {
                    return Err(Error::UnknownSlot(slot.clone()));
                }
                if !self.kb.schema().is_informable(slot) {
                    return Err(Error::NotInformable(slot.clone()));
                }
                let suggested = self.suggestions(slot)?;
                let pick = |v: &str| suggested.iter().find(|s| values_equal(s, v)).cloned();
                let chosen = if act.intent == "multiple_choice" {
                    let kept: Vec<String> = value.split('#').filter_map(|v| pick(v.trim())).collect();
                    (!kept.is_empty()).then(|| kept.join("#"))
                } else {
                    pick(value)
                };
                chosen
                    .or_else(|| suggested.first().cloned())
                    .unwrap_or_else(|| NO_MATCH.to_string())
            };
            out.inform_slots.insert(slot.clone(), fixed);
        }
        Ok(out)
    }

    fn check_turn(&self, act: &DialogAct, speaker: Speaker) -> Result<()> {
        let expected = self.state.expected_turn();
        if act.speaker != speaker || act.turn != expected {
            return Err(Error::Parity {
                expected,
                got: act.turn,
            });
        }
        Ok(())
    }
}
