//! Movie-booking dialogue simulation: an agenda-based user simulator with an
//! act-level error model, a KB-backed state tracker, rule and DQN agents, and
//! the training harness that ties them together.

pub mod act;
pub mod agents;
pub mod corpus;
pub mod dst;
pub mod env;
pub mod error;
pub mod kb;
pub mod nlg;
pub mod noise;
pub mod rl;
pub mod rng;
pub mod schema;
pub mod session;
pub mod synth;
pub mod usersim;

pub use act::{validate_act, DialogAct, DialogueStatus, SlotValues, Speaker, UserGoal, Violation};
pub use agents::{Agent, AgentResponse, RuleAgent, RuleAgentKind, ScriptedAgent};
pub use corpus::{Corpus, GoalDatabase, GoalSource};
pub use dst::{featurize, state_dim, ActionSpace, AgentAction, DialogState, FeatureLayout, StateTracker};
pub use env::{ActLevel, EpisodeOutcome, Environment, Metrics};
pub use error::{Error, Result};
pub use kb::{KbRecord, KnowledgeBase, QueryResult};
pub use nlg::{TemplateEntry, TemplateSet};
pub use noise::{corrupt, ErrorModelConfig, SlotErrorMode, Vocabulary};
pub use rl::{Checkpoint, DqnAgent, EpochMetrics, QNetwork, Trainer, TrainerConfig, WarmStart};
pub use schema::DomainSchema;
pub use session::{ActionRequest, ActionResponse, InputMode, SessionConfig, SessionCreated, SessionRegistry, SessionSnapshot};
pub use usersim::{turn_reward, AgendaItem, UserSimulator, UserState, UserStep};
