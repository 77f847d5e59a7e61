//! Episode runner: alternates agent and user acts through the state tracker.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::act::{DialogAct, DialogueStatus, Speaker, UserGoal};
use crate::agents::Agent;
use crate::dst::StateTracker;
use crate::error::{Error, Result};
use crate::nlg::{fallback_intent, TemplateSet};
use crate::noise::ErrorModelConfig;
use crate::rng::episode_rng;
use crate::usersim::{turn_reward, UserSimulator, UserState};

/// Whether acts cross between the parties directly or as text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActLevel {
    #[default]
    Act,
    /// User acts are rendered to text and parsed back before the agent sees
    /// them; the act-level error model is bypassed.
    Utterance,
}

impl ActLevel {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ActLevel::Act),
            1 => Some(ActLevel::Utterance),
            _ => None,
        }
    }
}

impl fmt::Display for ActLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActLevel::Act => "act",
            ActLevel::Utterance => "utterance",
        })
    }
}

impl FromStr for ActLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "act" | "0" => Ok(ActLevel::Act),
            "utterance" | "1" => Ok(ActLevel::Utterance),
            other => Err(Error::Config(format!("unknown act level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub goal: UserGoal,
    pub status: DialogueStatus,
    pub total_turns: u32,
    pub reward: f64,
    /// Every act as sent, the user's terminal act included.
    pub transcript: Vec<DialogAct>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub success_rate: f64,
    pub avg_reward: f64,
    pub avg_turns: f64,
}

impl Metrics {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a EpisodeOutcome>) -> Self {
        let mut m = Metrics::default();
        let (mut wins, mut reward, mut turns) = (0usize, 0.0, 0.0);
        for o in outcomes {
            m.episodes += 1;
            wins += usize::from(o.status == DialogueStatus::Success);
            reward += o.reward;
            turns += o.total_turns as f64;
        }
        if m.episodes > 0 {
            let n = m.episodes as f64;
            m.success_rate = wins as f64 / n;
            m.avg_reward = reward / n;
            m.avg_turns = turns / n;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    sim: UserSimulator,
    templates: Option<Arc<TemplateSet>>,
    act_level: ActLevel,
}

impl Environment {
    pub fn new(sim: UserSimulator) -> Self {
        Self {
            sim,
            templates: None,
            act_level: ActLevel::Act,
        }
    }

    /// Attaches surface text to every transcript act.
    pub fn with_templates(mut self, templates: Arc<TemplateSet>) -> Self {
        self.templates = Some(templates);
        self
    }

    pub fn with_act_level(mut self, level: ActLevel) -> Result<Self> {
        if level == ActLevel::Utterance && self.templates.is_none() {
            return Err(Error::Config("utterance level needs a template set".into()));
        }
        if level == ActLevel::Utterance {
            self.sim.set_noise(ErrorModelConfig::off())?;
        }
        self.act_level = level;
        Ok(self)
    }

    pub fn simulator(&self) -> &UserSimulator {
        &self.sim
    }

    pub fn templates(&self) -> Option<&Arc<TemplateSet>> {
        self.templates.as_ref()
    }

    pub fn act_level(&self) -> ActLevel {
        self.act_level
    }

    pub fn max_turn(&self) -> u32 {
        self.sim.max_turn()
    }

    pub fn tracker(&self) -> StateTracker {
        StateTracker::new(self.sim.kb().clone(), self.sim.max_turn())
    }

    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(UserState, DialogAct)> {
        let (state, act) = self.sim.initialize_episode(rng)?;
        Ok((state, self.dress(act)))
    }

    /// Adds surface text to an act when templates are loaded.
    pub fn dress(&self, mut act: DialogAct) -> DialogAct {
        if let Some(t) = &self.templates {
            if let Ok(nl) = t.render(&act, self.sim.schema()) {
                act.nl = Some(nl);
            }
        }
        act
    }

    /// What the agent side observes of a user act. At utterance level the
    /// text is parsed back; text no template explains keeps only the intent.
    pub fn perceive(&self, act: &DialogAct) -> DialogAct {
        if self.act_level == ActLevel::Act {
            return act.clone();
        }
        let templates = self.templates.as_ref().expect("checked in with_act_level");
        let schema = self.sim.schema();
        let nl = act
            .nl
            .clone()
            .unwrap_or_else(|| templates.render(act, schema).unwrap_or_default());
        let mut parsed = templates.parse_nl(&nl, Some(Speaker::User)).unwrap_or_else(|| {
            let intent = fallback_intent(&nl, schema).unwrap_or_else(|| act.intent.clone());
            DialogAct::user(intent)
        });
        parsed.turn = act.turn;
        parsed.nl = Some(nl);
        parsed
    }

    /// Runs one episode to termination.
    pub fn run_episode<A, R>(&self, agent: &mut A, rng: &mut R) -> Result<EpisodeOutcome>
    where
        A: Agent + ?Sized,
        R: Rng + ?Sized,
    {
        let (state, first) = self.start(rng)?;
        self.run_from(agent, state, first, rng)
    }

    pub fn run_with_goal<A, R>(&self, agent: &mut A, goal: UserGoal, rng: &mut R) -> Result<EpisodeOutcome>
    where
        A: Agent + ?Sized,
        R: Rng + ?Sized,
    {
        let (state, first) = self.sim.initialize_with_goal(goal, rng)?;
        let first = self.dress(first);
        self.run_from(agent, state, first, rng)
    }

    fn run_from<A, R>(
        &self,
        agent: &mut A,
        mut user: UserState,
        first: DialogAct,
        rng: &mut R,
    ) -> Result<EpisodeOutcome>
    where
        A: Agent + ?Sized,
        R: Rng + ?Sized,
    {
        let max_turn = self.sim.max_turn();
        let learn = agent.wants_experience();
        agent.initialize_episode();
        let mut tracker = self.tracker();
        tracker.update_user(&self.perceive(&first))?;
        let mut transcript = vec![first];
        let mut reward = 0.0;
        loop {
            let s = learn.then(|| tracker.featurize());
            let response = agent.state_to_action(tracker.state())?;
            let act = response.act().clone().at_turn(tracker.state().turn + 1);
            let sent = self.dress(tracker.update_agent(&act)?);
            transcript.push(sent.clone());

            let step = self.sim.next(&mut user, &sent, rng)?;
            let r = turn_reward(step.status, max_turn);
            reward += r;
            let reply = self.dress(step.act);
            tracker.update_user(&self.perceive(&reply))?;
            transcript.push(reply);
            if let Some(s) = s {
                agent.register_experience(&s, r, &tracker.featurize(), step.episode_over);
            }
            if step.episode_over {
                return Ok(EpisodeOutcome {
                    goal: user.goal,
                    status: step.status,
                    total_turns: user.turn,
                    reward,
                    transcript,
                });
            }
        }
    }

    /// Runs `episodes` episodes on the streams `root`/`first_index + i`.
    pub fn run_many<A: Agent + ?Sized>(
        &self,
        agent: &mut A,
        episodes: usize,
        root: u64,
        first_index: u64,
    ) -> Result<Vec<EpisodeOutcome>> {
        (0..episodes)
            .map(|i| {
                let mut rng = episode_rng(root, first_index + i as u64);
                self.run_episode(agent, &mut rng)
            })
            .collect()
    }
}
