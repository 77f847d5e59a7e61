//! Epoch loop: simulate, train on replayed experience, evaluate, maybe flush,
//! then swap the target network.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dqn::DqnAgent;
use super::replay::FlushPolicy;
use super::{TrainerConfig, WarmStart};
use crate::agents::Agent;
use crate::corpus::GoalDatabase;
use crate::env::{Environment, Metrics};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

pub const CURVE_HEADER: &str = "epoch,success_rate,avg_reward,avg_turns,buffer_size,flushed";

/// Evaluation episodes come from their own stream family so they never
/// overlap the training dialogues.
const EVAL_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub success_rate: f64,
    pub avg_reward: f64,
    pub avg_turns: f64,
    pub buffer_size: usize,
    pub flushed: bool,
    /// Success rate of the exploring simulation dialogues.
    pub train_success_rate: f64,
    pub loss: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.success_rate, self.avg_reward, self.avg_turns, self.buffer_size, self.flushed
        )
    }
}

pub fn write_curve_csv<W: Write>(mut out: W, rows: &[EpochMetrics]) -> std::io::Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    out.flush()
}

/// Runs `episodes` dialogues without recording. With `greedy` exploration is
/// off as well.
pub fn evaluate<A: Agent + ?Sized>(
    agent: &mut A,
    env: &Environment,
    episodes: usize,
    greedy: bool,
    root: u64,
) -> Result<Metrics> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    agent.set_evaluation(true, greedy);
    let outcomes = env.run_many(agent, episodes, root, 0);
    agent.set_evaluation(false, false);
    Ok(Metrics::from_outcomes(&outcomes?))
}

/// Fraction of goals the KB can satisfy.
pub fn compute_upper_bound(goals: &GoalDatabase, kb: &KnowledgeBase) -> f64 {
    goals.upper_bound(kb)
}

#[derive(Debug)]
pub struct Trainer {
    config: TrainerConfig,
    env: Environment,
    agent: DqnAgent,
    flush: FlushPolicy,
    cursor: u64,
    epoch: usize,
}

impl Trainer {
    pub fn new(config: TrainerConfig, env: Environment) -> Result<Self> {
        config.validate()?;
        let sim = env.simulator();
        let agent = DqnAgent::new(&config, sim.schema().clone(), sim.max_turn(), sim.kb().len());
        Self::with_agent(config, env, agent)
    }

    pub fn with_agent(config: TrainerConfig, env: Environment, agent: DqnAgent) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            flush: FlushPolicy::new(config.success_rate_threshold),
            config,
            env,
            agent,
            cursor: 0,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn agent(&self) -> &DqnAgent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut DqnAgent {
        &mut self.agent
    }

    pub fn into_agent(self) -> DqnAgent {
        self.agent
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    /// Root of the evaluation streams; episode `i` of every evaluation uses
    /// stream `i` under it.
    pub fn eval_root(&self) -> u64 {
        self.config.seed ^ EVAL_SALT
    }

    pub fn flush_policy(&self) -> &FlushPolicy {
        &self.flush
    }

    /// Fills the pool with rule-policy episodes until it reaches capacity or
    /// the episode limit. Returns the number of episodes run.
    pub fn warm_start(&mut self) -> Result<usize> {
        if self.config.warm_start == WarmStart::Off {
            return Ok(0);
        }
        self.agent.set_warm_start(true);
        self.agent.set_recording(true);
        let mut episodes = 0;
        while episodes < self.config.warm_start_episodes && !self.agent.pool().is_full() {
            self.run_simulation_episode()?;
            episodes += 1;
        }
        self.agent.set_warm_start(false);
        Ok(episodes)
    }

    fn run_simulation_episode(&mut self) -> Result<crate::env::EpisodeOutcome> {
        let mut rng = crate::rng::episode_rng(self.config.seed, self.cursor);
        self.cursor += 1;
        self.env.run_episode(&mut self.agent, &mut rng)
    }

    /// N exploring dialogues, all recorded.
    pub fn simulate(&mut self, n: usize) -> Result<Metrics> {
        self.agent.set_recording(true);
        let outcomes = (0..n)
            .map(|_| self.run_simulation_episode())
            .collect::<Result<Vec<_>>>()?;
        Ok(Metrics::from_outcomes(&outcomes))
    }

    /// Greedy evaluation on the fixed evaluation streams.
    pub fn evaluate(&mut self) -> Result<Metrics> {
        let root = self.eval_root();
        evaluate(&mut self.agent, &self.env, self.config.eval_episodes, true, root)
    }

    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        let n = self.config.simulation_epoch_size;
        let sim = self.simulate(n)?;
        if self.agent.pool().is_empty() {
            return Err(Error::EmptyPool);
        }
        let loss = self.agent.train(self.config.batch_size, self.config.num_batches)?;
        let eval = self.evaluate()?;
        let mut flushed = false;
        if n > 0 && self.flush.observe(eval.success_rate) {
            self.agent.pool_mut().flush();
            self.simulate(n)?;
            flushed = true;
        }
        self.agent.sync_target();
        self.epoch += 1;
        Ok(EpochMetrics {
            epoch: self.epoch,
            success_rate: eval.success_rate,
            avg_reward: eval.avg_reward,
            avg_turns: eval.avg_turns,
            buffer_size: self.agent.pool().len(),
            flushed,
            train_success_rate: sim.success_rate,
            loss,
        })
    }

    /// Warm start followed by `config.epochs` epochs. `on_epoch` sees each
    /// row as it is produced.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochMetrics)) -> Result<Vec<EpochMetrics>> {
        self.warm_start()?;
        let mut rows = Vec::with_capacity(self.config.epochs);
        for _ in 0..self.config.epochs {
            let row = self.run_epoch()?;
            on_epoch(&row);
            rows.push(row);
        }
        Ok(rows)
    }
}
