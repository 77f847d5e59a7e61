//! Interactive sessions where an outside party plays the agent against the
//! simulator one turn at a time.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::act::{validate_act, DialogAct, DialogueStatus, Speaker, UserGoal};
use crate::dst::StateTracker;
use crate::env::{ActLevel, Environment};
use crate::error::{Error, Result};
use crate::nlg::TemplateSet;
use crate::noise::{ErrorModelConfig, SlotErrorMode};
use crate::rng::SimRng;
use crate::usersim::{UserSimulator, UserState};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Nl,
    #[default]
    Act,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub slot_err_prob: f64,
    pub intent_err_prob: f64,
    pub slot_err_mode: SlotErrorMode,
    pub input_mode: InputMode,
    pub act_level: ActLevel,
    pub reveal_goal: bool,
    /// Random when absent; echoed back so a session can be replayed.
    pub seed: Option<u64>,
    /// Plays this goal instead of sampling one.
    pub goal: Option<UserGoal>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            slot_err_prob: 0.0,
            intent_err_prob: 0.0,
            slot_err_mode: SlotErrorMode::default(),
            input_mode: InputMode::Act,
            act_level: ActLevel::Act,
            reveal_goal: true,
            seed: None,
            goal: None,
        }
    }
}

/// A client's agent turn: an act in `intent(slot=value;slot)` notation or
/// free text, depending on `mode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    #[serde(default)]
    pub mode: Option<InputMode>,
    pub payload: String,
    /// When present, must equal the agent turn the session expects.
    #[serde(default)]
    pub turn: Option<u32>,
}

pub type Suggestions = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal: Option<serde_json::Value>,
    pub user_act: DialogAct,
    pub suggested_values: Suggestions,
    pub config: SessionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResponse {
    pub corrected_agent_act: DialogAct,
    /// Whether the tracker replaced any informed value.
    pub corrected: bool,
    pub user_act: DialogAct,
    pub suggested_values: Suggestions,
    pub episode_over: bool,
    pub status: DialogueStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub seed: u64,
    pub config: SessionConfig,
    /// Present when revealed or once the episode is over.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal: Option<serde_json::Value>,
    pub transcript: Vec<DialogAct>,
    pub suggested_values: Suggestions,
    pub episode_over: bool,
    pub status: DialogueStatus,
    pub next_agent_turn: u32,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    seed: u64,
    config: SessionConfig,
    env: Environment,
    user: UserState,
    tracker: StateTracker,
    rng: SimRng,
    transcript: Vec<DialogAct>,
    status: DialogueStatus,
    episode_over: bool,
    last_active: Instant,
}

impl Session {
    fn start(id: String, base: &UserSimulator, templates: &Arc<TemplateSet>, config: SessionConfig) -> Result<Self> {
        let noise = if config.slot_err_prob == 0.0 && config.intent_err_prob == 0.0 {
            ErrorModelConfig::off()
        } else {
            ErrorModelConfig::new(config.intent_err_prob, config.slot_err_prob, config.slot_err_mode)?
        };
        let sim = base.clone().with_noise(noise)?;
        let env = Environment::new(sim)
            .with_templates(templates.clone())
            .with_act_level(config.act_level)?;
        let seed = config.seed.unwrap_or_else(rand::random);
        let mut rng = SimRng::seed_from_u64(seed);
        let (user, first) = match &config.goal {
            Some(goal) => {
                goal.validate(env.simulator().schema())?;
                env.simulator().initialize_with_goal(goal.clone(), &mut rng)?
            }
            None => env.simulator().initialize_episode(&mut rng)?,
        };
        let first = env.dress(first);
        let mut tracker = env.tracker();
        tracker.update_user(&env.perceive(&first))?;
        Ok(Self {
            id,
            seed,
            config,
            env,
            user,
            tracker,
            rng,
            transcript: vec![first],
            status: DialogueStatus::NoOutcomeYet,
            episode_over: false,
            last_active: Instant::now(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_over(&self) -> bool {
        self.episode_over
    }

    pub fn transcript(&self) -> &[DialogAct] {
        &self.transcript
    }

    fn goal_block(&self, force: bool) -> Option<serde_json::Value> {
        (self.config.reveal_goal || force).then(|| self.user.goal.to_display_json())
    }

    /// KB values for each slot the user's latest act asks about.
    pub fn suggestions(&self) -> Suggestions {
        let mut out = Suggestions::new();
        if self.episode_over {
            return out;
        }
        let ticket = self.env.simulator().schema().default_request_slot();
        if let Some(act) = self.tracker.state().last_user_act.as_ref() {
            for slot in act.request_slots.keys() {
                if slot == ticket {
                    continue;
                }
                if let Ok(values) = self.tracker.suggestions(slot) {
                    out.insert(slot.clone(), values);
                }
            }
        }
        out
    }

    fn created(&self) -> SessionCreated {
        SessionCreated {
            id: self.id.clone(),
            seed: self.seed,
            goal: self.goal_block(false),
            user_act: self.transcript[0].clone(),
            suggested_values: self.suggestions(),
            config: self.config.clone(),
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            seed: self.seed,
            config: self.config.clone(),
            goal: self.goal_block(self.episode_over),
            transcript: self.transcript.clone(),
            suggested_values: self.suggestions(),
            episode_over: self.episode_over,
            status: self.status,
            next_agent_turn: self.tracker.state().turn + 1,
        }
    }

    fn parse_action(&self, request: &ActionRequest) -> Result<DialogAct> {
        let text = request.payload.trim();
        if text.is_empty() {
            return Err(Error::Unparsed(String::new()));
        }
        match request.mode.unwrap_or(self.config.input_mode) {
            InputMode::Act => {
                let mut act: DialogAct = text.parse()?;
                act.speaker = Speaker::Agent;
                Ok(act)
            }
            InputMode::Nl => {
                let templates = self.env.templates().expect("sessions always carry templates");
                let mut act = templates
                    .parse_nl(text, Some(Speaker::Agent))
                    .ok_or_else(|| Error::Unparsed(text.to_string()))?;
                act.nl = Some(text.to_string());
                Ok(act)
            }
        }
    }

    /// One agent turn and the user's reply.
    pub fn act(&mut self, request: &ActionRequest) -> Result<ActionResponse> {
        if self.episode_over {
            return Err(Error::SessionClosed(self.id.clone()));
        }
        let expected = self.tracker.state().turn + 1;
        if let Some(turn) = request.turn {
            if turn != expected {
                return Err(Error::Parity { expected, got: turn });
            }
        }
        let nl = (request.mode.unwrap_or(self.config.input_mode) == InputMode::Nl).then(|| request.payload.trim().to_string());
        let act = self.parse_action(request)?.at_turn(expected);
        let violations = validate_act(self.env.simulator().schema(), &act);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidAct(list.join("; ")));
        }
        let corrected = self.tracker.update_agent(&act)?;
        let was_corrected = corrected.inform_slots != act.inform_slots;
        let mut sent = self.env.dress(corrected);
        if let (Some(text), false) = (nl, was_corrected) {
            sent.nl = Some(text);
        }
        let step = self.env.simulator().next(&mut self.user, &sent, &mut self.rng)?;
        let reply = self.env.dress(step.act);
        self.tracker.update_user(&self.env.perceive(&reply))?;
        self.transcript.push(sent.clone());
        self.transcript.push(reply.clone());
        self.episode_over = step.episode_over;
        self.status = step.status;
        self.last_active = Instant::now();
        Ok(ActionResponse {
            corrected_agent_act: sent,
            corrected: was_corrected,
            user_act: reply,
            suggested_values: self.suggestions(),
            episode_over: self.episode_over,
            status: self.status,
        })
    }
}

/// Concurrent map of live sessions. Actions on one session are serialized;
/// a second action arriving while one is in progress is rejected.
#[derive(Debug)]
pub struct SessionRegistry {
    base: UserSimulator,
    templates: Arc<TemplateSet>,
    idle_timeout: Duration,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionRegistry {
    pub fn new(base: UserSimulator, templates: Arc<TemplateSet>) -> Self {
        Self {
            base,
            templates,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_idle_timeout(mut self, timeout: Duration) -> Self {
        self.idle_timeout = timeout;
        self
    }

    pub fn simulator(&self) -> &UserSimulator {
        &self.base
    }

    pub fn templates(&self) -> &Arc<TemplateSet> {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, config: SessionConfig) -> Result<SessionCreated> {
        self.purge_expired();
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::start(id.clone(), &self.base, &self.templates, config)?;
        let created = session.created();
        self.sessions.write().insert(id, Arc::new(Mutex::new(session)));
        Ok(created)
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::SessionNotFound(id.to_string()))
    }

    pub fn post_action(&self, id: &str, request: &ActionRequest) -> Result<ActionResponse> {
        let session = self.lookup(id)?;
        let mut guard = session
            .try_lock()
            .ok_or_else(|| Error::SessionBusy(id.to_string()))?;
        guard.act(request)
    }

    pub fn get(&self, id: &str) -> Result<SessionSnapshot> {
        let session = self.lookup(id)?;
        let guard = session.lock();
        Ok(guard.snapshot())
    }

    /// Runs `f` with the session locked, for callers that need more than a
    /// snapshot.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> T) -> Result<T> {
        let session = self.lookup(id)?;
        let mut guard = session
            .try_lock()
            .ok_or_else(|| Error::SessionBusy(id.to_string()))?;
        Ok(f(&mut guard))
    }

    pub fn purge_expired(&self) -> usize {
        self.purge_idle_since(Instant::now())
    }

    /// Drops sessions idle for longer than the timeout as of `now`. Sessions
    /// currently locked are in use and kept.
    pub fn purge_idle_since(&self, now: Instant) -> usize {
        let mut map = self.sessions.write();
        let before = map.len();
        map.retain(|_, s| match s.try_lock() {
            Some(s) => now.saturating_duration_since(s.last_active) <= self.idle_timeout,
            None => true,
        });
        before - map.len()
    }
}
