//! The agent interface and the rule-based baselines.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::act::DialogAct;
use crate::dst::{DialogState, PLACEHOLDER};
use crate::error::{Error, Result};
use crate::schema::{DomainSchema, TASKCOMPLETE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub act_slot_response: DialogAct,
    pub act_slot_value_response: Option<DialogAct>,
}

impl AgentResponse {
    pub fn new(act: DialogAct) -> Self {
        Self {
            act_slot_response: act,
            act_slot_value_response: None,
        }
    }

    /// The act to send: the value-bearing one when present.
    pub fn act(&self) -> &DialogAct {
        self.act_slot_value_response
            .as_ref()
            .unwrap_or(&self.act_slot_response)
    }
}

/// A dialogue policy. `initialize_episode` is called once before the first
/// `state_to_action` of every episode.
pub trait Agent: Send {
    fn initialize_episode(&mut self);

    fn state_to_action(&mut self, state: &DialogState) -> Result<AgentResponse>;

    /// Whether the environment should feed transitions back through
    /// [`Agent::register_experience`].
    fn wants_experience(&self) -> bool {
        false
    }

    /// Transition for the action returned by the last `state_to_action`.
    fn register_experience(&mut self, _s: &[f64], _reward: f64, _s_next: &[f64], _done: bool) {}

    /// Evaluation mode records nothing; `greedy` additionally turns off
    /// exploration.
    fn set_evaluation(&mut self, _on: bool, _greedy: bool) {}

    fn name(&self) -> &str;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn initialize_episode(&mut self) {
        (**self).initialize_episode()
    }

    fn state_to_action(&mut self, state: &DialogState) -> Result<AgentResponse> {
        (**self).state_to_action(state)
    }

    fn wants_experience(&self) -> bool {
        (**self).wants_experience()
    }

    fn register_experience(&mut self, s: &[f64], reward: f64, s_next: &[f64], done: bool) {
        (**self).register_experience(s, reward, s_next, done)
    }

    fn set_evaluation(&mut self, on: bool, greedy: bool) {
        (**self).set_evaluation(on, greedy)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleAgentKind {
    InformAll,
    RequestAll,
    RandomRequest,
    Echo,
    RequestBasics,
}

impl RuleAgentKind {
    pub const ALL: [RuleAgentKind; 5] = [
        RuleAgentKind::InformAll,
        RuleAgentKind::RequestAll,
        RuleAgentKind::RandomRequest,
        RuleAgentKind::Echo,
        RuleAgentKind::RequestBasics,
    ];

    /// Command-line selector (`--agt 1..5`).
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(RuleAgentKind::InformAll),
            2 => Some(RuleAgentKind::RequestAll),
            3 => Some(RuleAgentKind::RandomRequest),
            4 => Some(RuleAgentKind::Echo),
            5 => Some(RuleAgentKind::RequestBasics),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleAgentKind::InformAll => "inform_all",
            RuleAgentKind::RequestAll => "request_all",
            RuleAgentKind::RandomRequest => "random_request",
            RuleAgentKind::Echo => "echo",
            RuleAgentKind::RequestBasics => "request_basics",
        }
    }

    pub fn build(self, schema: &DomainSchema, seed: u64) -> RuleAgent {
        RuleAgent::new(self, schema, seed)
    }
}

impl fmt::Display for RuleAgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleAgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleAgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown rule agent `{s}`")))
    }
}

pub const REQUEST_BASICS_SET: [&str; 6] = [
    "moviename",
    "starttime",
    "city",
    "date",
    "theater",
    "numberofpeople",
];

#[derive(Debug, Clone)]
pub struct RuleAgent {
    kind: RuleAgentKind,
    informable: Vec<String>,
    requestable: Vec<String>,
    request_set: Vec<String>,
    rng: ChaCha8Rng,
    initialized: bool,
    cursor: usize,
    phase: u8,
}

impl RuleAgent {
    pub fn new(kind: RuleAgentKind, schema: &DomainSchema, seed: u64) -> Self {
        Self {
            kind,
            informable: schema.informable_slots().map(str::to_string).collect(),
            requestable: schema.requestable_slots().map(str::to_string).collect(),
            request_set: REQUEST_BASICS_SET
                .iter()
                .filter(|s| schema.is_requestable(s))
                .map(|s| s.to_string())
                .collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            initialized: false,
            cursor: 0,
            phase: 0,
        }
    }

    pub fn kind(&self) -> RuleAgentKind {
        self.kind
    }

    fn next_act(&mut self, state: &DialogState) -> Result<DialogAct> {
        Ok(match self.kind {
            RuleAgentKind::InformAll => {
                let slot = &self.informable[self.cursor % self.informable.len()];
                self.cursor += 1;
                DialogAct::agent("inform").inform(slot.clone(), PLACEHOLDER)
            }
            RuleAgentKind::RequestAll => {
                let slot = &self.requestable[self.cursor % self.requestable.len()];
                self.cursor += 1;
                DialogAct::agent("request").request(slot.clone())
            }
            RuleAgentKind::RandomRequest => {
                let slot = self.requestable.choose(&mut self.rng).expect("schema has requestable slots");
                DialogAct::agent("request").request(slot.clone())
            }
            RuleAgentKind::Echo => {
                let mut act = DialogAct::agent("inform");
                if let Some(user) = &state.last_user_act {
                    for slot in user.request_slots.keys() {
                        if self.informable.contains(slot) {
                            act.inform_slots.insert(slot.clone(), PLACEHOLDER.into());
                        }
                    }
                }
                if act.inform_slots.is_empty() {
                    DialogAct::agent("thanks")
                } else {
                    act
                }
            }
            RuleAgentKind::RequestBasics => {
                if self.cursor < self.request_set.len() {
                    let slot = self.request_set[self.cursor].clone();
                    self.cursor += 1;
                    DialogAct::agent("request").request(slot)
                } else if self.phase == 0 {
                    self.phase = 1;
                    DialogAct::agent("inform").inform(TASKCOMPLETE, PLACEHOLDER)
                } else if self.phase == 1 {
                    self.phase = 2;
                    DialogAct::agent("thanks")
                } else {
                    return Err(Error::AgentExhausted(
                        "request_basics has nothing left to say after thanks".into(),
                    ));
                }
            }
        })
    }
}

impl Agent for RuleAgent {
    fn initialize_episode(&mut self) {
        self.initialized = true;
        self.cursor = 0;
        self.phase = 0;
    }

    fn state_to_action(&mut self, state: &DialogState) -> Result<AgentResponse> {
        if !self.initialized {
            return Err(Error::AgentNotInitialized);
        }
        let act = self.next_act(state)?.at_turn(state.turn + 1);
        Ok(AgentResponse::new(act))
    }

    fn name(&self) -> &str {
        self.kind.as_str()
    }
}

/// Replays a fixed list of acts, one per turn.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    script: Vec<DialogAct>,
    cursor: usize,
    initialized: bool,
}

impl ScriptedAgent {
    pub fn new(script: Vec<DialogAct>) -> Self {
        Self {
            script,
            cursor: 0,
            initialized: false,
        }
    }
}

impl Agent for ScriptedAgent {
    fn initialize_episode(&mut self) {
        self.cursor = 0;
        self.initialized = true;
    }

    fn state_to_action(&mut self, state: &DialogState) -> Result<AgentResponse> {
        if !self.initialized {
            return Err(Error::AgentNotInitialized);
        }
        let act = self
            .script
            .get(self.cursor)
            .ok_or_else(|| Error::AgentExhausted("script finished".into()))?;
        self.cursor += 1;
        Ok(AgentResponse::new(act.clone().at_turn(state.turn + 1)))
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::QueryResult;

    fn state_after(user: DialogAct) -> DialogState {
        DialogState {
            turn: user.turn,
            last_user_act: Some(user.clone()),
            last_agent_act: None,
            user_constraints: Default::default(),
            user_requests_seen: Default::default(),
            agent_informed: Default::default(),
            kb_result: QueryResult::default(),
            kb_available: vec![],
            history: vec![user],
        }
    }

    #[test]
    fn request_basics_sequence() {
        let schema = DomainSchema::movie_default();
        let mut agent = RuleAgentKind::RequestBasics.build(&schema, 0);
        let state = state_after(DialogAct::user("request").request("ticket"));
        assert!(matches!(agent.state_to_action(&state), Err(Error::AgentNotInitialized)));
        for _ in 0..2 {
            agent.initialize_episode();
            let acts: Vec<String> = (0..8)
                .map(|_| agent.state_to_action(&state).unwrap().act().to_string())
                .collect();
            assert_eq!(
                acts,
                [
                    "request(moviename)",
                    "request(starttime)",
                    "request(city)",
                    "request(date)",
                    "request(theater)",
                    "request(numberofpeople)",
                    "inform(taskcomplete=PLACEHOLDER)",
                    "thanks()",
                ]
            );
            assert!(matches!(agent.state_to_action(&state), Err(Error::AgentExhausted(_))));
        }
    }

    #[test]
    fn echo_informs_requested_slots() {
        let schema = DomainSchema::movie_default();
        let mut agent = RuleAgentKind::Echo.build(&schema, 0);
        agent.initialize_episode();
        let state = state_after(DialogAct::user("request").request("starttime"));
        let act = agent.state_to_action(&state).unwrap().act().clone();
        assert_eq!(act.intent, "inform");
        assert!(act.inform_slots.contains_key("starttime"));
        let state = state_after(DialogAct::user("request").request("ticket"));
        assert_eq!(agent.state_to_action(&state).unwrap().act().intent, "thanks");
    }

    #[test]
    fn inform_all_wraps() {
        let schema = DomainSchema::movie_default();
        let mut agent = RuleAgentKind::InformAll.build(&schema, 0);
        agent.initialize_episode();
        let state = state_after(DialogAct::user("request").request("ticket"));
        let n = schema.informable_slots().count();
        let first = agent.state_to_action(&state).unwrap();
        for _ in 1..n {
            agent.state_to_action(&state).unwrap();
        }
        assert_eq!(agent.state_to_action(&state).unwrap(), first);
    }

    #[test]
    fn kinds_parse() {
        for k in RuleAgentKind::ALL {
            assert_eq!(k.as_str().parse::<RuleAgentKind>().unwrap(), k);
        }
        assert_eq!(RuleAgentKind::from_code(5), Some(RuleAgentKind::RequestBasics));
        assert_eq!(RuleAgentKind::from_code(9), None);
    }
}
