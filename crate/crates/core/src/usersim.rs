//! Agenda-based user simulator.
//!
//! The user state is a goal (constraints `C`, requests `R`), an agenda stack
//! of the slots still to be conveyed or asked, and the history of what has
//! been said. Each call to [`UserSimulator::next`] dispatches on the agent's
//! intent, emits a clean frame, and then passes the frame through the error
//! model on its way out.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::act::{DialogAct, DialogueStatus, SlotValues, Speaker, UserGoal};
use crate::corpus::GoalDatabase;
use crate::error::{Error, Result};
use crate::kb::{values_equal, KnowledgeBase};
use crate::noise::{corrupt, ErrorModelConfig, Vocabulary};
use crate::schema::{is_pseudo_slot, DomainSchema, ANYTHING, NO_MATCH, NO_TICKET_AVAILABLE, TASKCOMPLETE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "slot", rename_all = "lowercase")]
pub enum AgendaItem {
    Inform(String),
    Request(String),
}

impl AgendaItem {
    pub fn slot(&self) -> &str {
        match self {
            AgendaItem::Inform(s) | AgendaItem::Request(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub goal: UserGoal,
    /// Top of the stack is the last element.
    pub agenda: Vec<AgendaItem>,
    pub history_slots: SlotValues,
    /// The clean frame emitted on the previous turn.
    pub frame: DialogAct,
    pub agent_offered: SlotValues,
    /// Requests in `R` the agent has not answered yet.
    pub open_requests: BTreeSet<String>,
    /// Outcome of the most recent `taskcomplete` check, if any.
    pub constraint_check: Option<bool>,
    pub turn: u32,
    pub episode_over: bool,
    pub status: DialogueStatus,
}

impl UserState {
    fn remove_from_agenda(&mut self, slot: &str) {
        self.agenda.retain(|item| item.slot() != slot);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserStep {
    pub act: DialogAct,
    pub episode_over: bool,
    pub status: DialogueStatus,
}

/// Per-turn reward seen by the agent: −1 for every agent action, plus a
/// terminal bonus or penalty scaled by the turn limit.
pub fn turn_reward(status: DialogueStatus, max_turn: u32) -> f64 {
    match status {
        DialogueStatus::NoOutcomeYet => -1.0,
        DialogueStatus::Success => -1.0 + 2.0 * max_turn as f64,
        DialogueStatus::Failure => -1.0 - max_turn as f64,
    }
}

#[derive(Debug, Clone)]
pub struct UserSimulator {
    schema: Arc<DomainSchema>,
    kb: Arc<KnowledgeBase>,
    goals: Arc<GoalDatabase>,
    vocab: Arc<Vocabulary>,
    noise: ErrorModelConfig,
    max_turn: u32,
}

impl UserSimulator {
    pub fn new(kb: Arc<KnowledgeBase>, goals: Arc<GoalDatabase>) -> Self {
        let schema = kb.schema().clone();
        let vocab = Arc::new(Vocabulary::from_kb_and_goals(&kb, &goals));
        let max_turn = schema.max_turn();
        Self {
            schema,
            kb,
            goals,
            vocab,
            noise: ErrorModelConfig::off(),
            max_turn,
        }
    }

    pub fn with_noise(mut self, noise: ErrorModelConfig) -> Result<Self> {
        noise.validate()?;
        self.noise = noise;
        Ok(self)
    }

    pub fn with_max_turn(mut self, max_turn: u32) -> Result<Self> {
        if max_turn == 0 || max_turn % 2 != 0 {
            return Err(Error::Config(format!(
                "max_turn must be a positive even integer, got {max_turn}"
            )));
        }
        self.max_turn = max_turn;
        Ok(self)
    }

    pub fn schema(&self) -> &Arc<DomainSchema> {
        &self.schema
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn goals(&self) -> &Arc<GoalDatabase> {
        &self.goals
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn noise(&self) -> &ErrorModelConfig {
        &self.noise
    }

    pub fn set_noise(&mut self, noise: ErrorModelConfig) -> Result<()> {
        noise.validate()?;
        self.noise = noise;
        Ok(())
    }

    pub fn max_turn(&self) -> u32 {
        self.max_turn
    }

    /// Samples a goal uniformly and produces the opening user act.
    pub fn initialize_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(UserState, DialogAct)> {
        let goal = self.sample_goal(rng)?;
        self.initialize_with_goal(goal, rng)
    }

    /// The draw `initialize_episode` makes; sampling here and then calling
    /// `initialize_with_goal` consumes the stream identically.
    pub fn sample_goal<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UserGoal> {
        if self.goals.is_empty() {
            return Err(Error::EmptyGoalDatabase);
        }
        Ok(self.goals.goals()[rng.gen_range(0..self.goals.len())].clone())
    }

    pub fn initialize_with_goal<R: Rng + ?Sized>(
        &self,
        goal: UserGoal,
        rng: &mut R,
    ) -> Result<(UserState, DialogAct)> {
        goal.validate(&self.schema)?;
        let ticket = self.schema.default_request_slot().to_string();

        let mut first = DialogAct::user("request");
        for (slot, value) in &goal.inform_slots {
            if slot == "moviename" || rng.gen_bool(0.5) {
                first.inform_slots.insert(slot.clone(), value.clone());
            }
        }
        if first.inform_slots.is_empty() {
            if let Some((slot, value)) = goal.inform_slots.iter().choose(rng) {
                first.inform_slots.insert(slot.clone(), value.clone());
            }
        }
        let others: Vec<&String> = goal.request_slots.keys().filter(|s| **s != ticket).collect();
        let asked = others.choose(rng).map(|s| (*s).clone()).unwrap_or(ticket.clone());
        first = first.request(asked.clone());

        let mut agenda = vec![AgendaItem::Request(ticket.clone())];
        for slot in goal.request_slots.keys() {
            if *slot != ticket && *slot != asked {
                agenda.push(AgendaItem::Request(slot.clone()));
            }
        }
        for slot in goal.inform_slots.keys() {
            if !first.inform_slots.contains_key(slot) {
                agenda.push(AgendaItem::Inform(slot.clone()));
            }
        }
        if asked == ticket {
            agenda.retain(|i| *i != AgendaItem::Request(ticket.clone()));
        }

        let state = UserState {
            open_requests: goal.request_slots.keys().cloned().collect(),
            goal,
            agenda,
            history_slots: SlotValues::new(),
            frame: first.clone(),
            agent_offered: SlotValues::new(),
            constraint_check: None,
            turn: 0,
            episode_over: false,
            status: DialogueStatus::NoOutcomeYet,
        };
        let out = corrupt(&first, &self.noise, &self.schema, &self.vocab, rng)?;
        Ok((state, out))
    }

    /// Responds to the agent's last act.
    pub fn next<R: Rng + ?Sized>(
        &self,
        state: &mut UserState,
        agent_act: &DialogAct,
        rng: &mut R,
    ) -> Result<UserStep> {
        if state.episode_over {
            return Err(Error::EpisodeOver);
        }
        if agent_act.speaker != Speaker::Agent {
            return Err(Error::InvalidAct(format!("{agent_act} is not an agent act")));
        }
        if !self.schema.has_intent(&agent_act.intent) {
            return Err(Error::UnknownIntent(agent_act.intent.clone()));
        }
        state.turn += 2;

        let frame = if state.turn > self.max_turn {
            state.episode_over = true;
            state.status = DialogueStatus::Failure;
            DialogAct::user("closing")
        } else {
            let previous = std::mem::replace(&mut state.frame, DialogAct::user("inform"));
            for (slot, value) in previous.inform_slots {
                state.history_slots.insert(slot, value);
            }
            match agent_act.intent.as_str() {
                "inform" => self.response_inform(state, agent_act),
                "multiple_choice" => self.response_multiple_choice(state, agent_act, rng),
                "request" => self.response_request(state, agent_act),
                "thanks" => {
                    state.episode_over = true;
                    state.status = self.evaluate_final_status(state)?;
                    DialogAct::user("thanks")
                }
                "closing" => {
                    state.episode_over = true;
                    state.status = self.evaluate_final_status(state)?;
                    DialogAct::user("thanks")
                }
                _ => self.advance(state),
            }
        };
        let frame = frame.at_turn(state.turn);
        state.frame = frame.clone();
        let act = corrupt(&frame, &self.noise, &self.schema, &self.vocab, rng)?;
        Ok(UserStep {
            act,
            episode_over: state.episode_over,
            status: state.status,
        })
    }

    /// Success needs every request answered (the ticket through a passed
    /// `taskcomplete` check), that check to have passed, and the turn limit
    /// respected.
    pub fn evaluate_final_status(&self, state: &UserState) -> Result<DialogueStatus> {
        if !state.episode_over {
            return Err(Error::EpisodeNotOver);
        }
        let ok = state.open_requests.is_empty()
            && state.constraint_check == Some(true)
            && state.turn <= self.max_turn;
        Ok(if ok {
            DialogueStatus::Success
        } else {
            DialogueStatus::Failure
        })
    }

    /// Next item off the agenda, or a closing move once it is empty.
    fn advance(&self, state: &mut UserState) -> DialogAct {
        while let Some(item) = state.agenda.pop() {
            match item {
                AgendaItem::Inform(slot) => {
                    if state.history_slots.contains_key(&slot) {
                        continue;
                    }
                    let value = state.goal.inform_slots[&slot].clone();
                    return DialogAct::user("inform").inform(slot, value);
                }
                AgendaItem::Request(slot) => {
                    if state.open_requests.contains(&slot) {
                        return DialogAct::user("request").request(slot);
                    }
                }
            }
        }
        let ticket = self.schema.default_request_slot();
        if let Some(slot) = state.open_requests.iter().find(|s| *s != ticket) {
            return DialogAct::user("request").request(slot.clone());
        }
        if state.open_requests.contains(ticket) {
            return DialogAct::user("request").request(ticket);
        }
        DialogAct::user("thanks")
    }

    fn response_request(&self, state: &mut UserState, agent_act: &DialogAct) -> DialogAct {
        let mut out = DialogAct::user("inform");
        for slot in agent_act.request_slots.keys() {
            if let Some(value) = state.goal.inform_slots.get(slot) {
                out.inform_slots.insert(slot.clone(), value.clone());
                state.remove_from_agenda(slot);
            } else if let Some(value) = state.history_slots.get(slot) {
                if self.schema.is_informable(slot) {
                    out.inform_slots.insert(slot.clone(), value.clone());
                }
            } else if state.open_requests.contains(slot) {
                out.request_slots.insert(slot.clone(), crate::schema::UNK.to_string());
            } else if self.schema.is_informable(slot) && !is_pseudo_slot(slot) {
                out.inform_slots.insert(slot.clone(), ANYTHING.to_string());
            }
        }
        if out.is_empty() {
            return self.advance(state);
        }
        if !out.request_slots.is_empty() {
            out.intent = "request".into();
        }
        out
    }

    fn response_inform(&self, state: &mut UserState, agent_act: &DialogAct) -> DialogAct {
        let mut contradicted = Vec::new();
        for (slot, value) in &agent_act.inform_slots {
            if slot == TASKCOMPLETE {
                continue;
            }
            state.agent_offered.insert(slot.clone(), value.clone());
            if let Some(wanted) = state.goal.inform_slots.get(slot).cloned() {
                if values_equal(&wanted, value) {
                    state.remove_from_agenda(slot);
                    state.history_slots.insert(slot.clone(), wanted);
                } else {
                    contradicted.push(slot.clone());
                }
            } else if state.open_requests.contains(slot)
                && !values_equal(value, NO_MATCH)
                && !values_equal(value, NO_TICKET_AVAILABLE)
            {
                state.open_requests.remove(slot);
                state.remove_from_agenda(slot);
                state.history_slots.insert(slot.clone(), value.clone());
            }
        }
        if let Some(value) = agent_act.inform_slots.get(TASKCOMPLETE) {
            return self.response_taskcomplete(state, value);
        }
        if !contradicted.is_empty() {
            let mut out = DialogAct::user("inform");
            for slot in contradicted {
                let value = state.goal.inform_slots[&slot].clone();
                out.inform_slots.insert(slot, value);
            }
            return out;
        }
        self.advance(state)
    }

    fn response_taskcomplete(&self, state: &mut UserState, value: &str) -> DialogAct {
        if values_equal(value, NO_TICKET_AVAILABLE) {
            state.constraint_check = Some(false);
            state.episode_over = true;
            state.status = DialogueStatus::Failure;
            return DialogAct::user("deny");
        }
        let passed = self.constraint_check(state);
        state.constraint_check = Some(passed);
        if !passed {
            let ticket = self.schema.default_request_slot();
            return DialogAct::user("deny").request(ticket);
        }
        let ticket = self.schema.default_request_slot().to_string();
        state.open_requests.remove(&ticket);
        state.remove_from_agenda(&ticket);
        match state.open_requests.iter().next() {
            Some(slot) => DialogAct::user("request").request(slot.clone()),
            None => DialogAct::user("thanks"),
        }
    }

    /// Every constraint has been conveyed, nothing the agent committed to
    /// contradicts it, and the KB has a record for the booking.
    fn constraint_check(&self, state: &UserState) -> bool {
        let goal = &state.goal;
        for (slot, wanted) in &goal.inform_slots {
            match state.history_slots.get(slot) {
                Some(v) if values_equal(v, wanted) => {}
                _ => return false,
            }
            if let Some(offered) = state.agent_offered.get(slot) {
                if !values_equal(offered, wanted) {
                    return false;
                }
            }
        }
        let ticket = self.schema.default_request_slot();
        let mut booking = goal.inform_slots.clone();
        for slot in goal.request_slots.keys() {
            if slot == ticket || is_pseudo_slot(slot) || !self.schema.is_informable(slot) {
                continue;
            }
            if let Some(v) = state.agent_offered.get(slot) {
                booking.insert(slot.clone(), v.clone());
            }
        }
        self.kb.query(&booking).is_ok_and(|r| !r.is_empty())
    }

    fn response_multiple_choice<R: Rng + ?Sized>(
        &self,
        state: &mut UserState,
        agent_act: &DialogAct,
        rng: &mut R,
    ) -> DialogAct {
        let mut out = DialogAct::user("inform");
        for (slot, options) in &agent_act.inform_slots {
            if is_pseudo_slot(slot) {
                continue;
            }
            let options: Vec<&str> = options.split('#').map(str::trim).filter(|o| !o.is_empty()).collect();
            let wanted = state.goal.inform_slots.get(slot);
            let pick = wanted
                .and_then(|w| options.iter().find(|o| values_equal(o, w)))
                .or_else(|| options.choose(rng));
            if let Some(v) = pick {
                out.inform_slots.insert(slot.clone(), v.to_string());
                state.remove_from_agenda(slot);
            }
        }
        if out.is_empty() {
            return self.advance(state);
        }
        out
    }
}
