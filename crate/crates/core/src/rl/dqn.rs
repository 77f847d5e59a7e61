//! ε-greedy DQN agent with a rule-policy warm start.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{Experience, QNetwork};
use super::replay::ReplayBuffer;
use super::TrainerConfig;
use crate::agents::{Agent, AgentResponse, RuleAgent, RuleAgentKind};
use crate::dst::{featurize, state_dim, ActionSpace, AgentAction, DialogState};
use crate::error::{Error, Result};
use crate::schema::DomainSchema;

#[derive(Debug, Clone)]
pub struct DqnAgent {
    schema: Arc<DomainSchema>,
    max_turn: u32,
    kb_len: usize,
    actions: ActionSpace,
    net: QNetwork,
    target: QNetwork,
    pool: ReplayBuffer,
    gamma: f64,
    learning_rate: f64,
    grad_clip: Option<f64>,
    epsilon: f64,
    greedy: bool,
    evaluating: bool,
    eval_greedy: bool,
    recording: bool,
    warm_start: bool,
    rule: RuleAgent,
    rng: ChaCha8Rng,
    last_action: Option<usize>,
    initialized: bool,
}

impl DqnAgent {
    pub fn new(config: &TrainerConfig, schema: Arc<DomainSchema>, max_turn: u32, kb_len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let actions = ActionSpace::new(&schema);
        let net = QNetwork::new(state_dim(&schema), config.hidden_width, actions.len(), &mut rng);
        Self::with_network(config, schema, max_turn, kb_len, net)
            .expect("fresh network matches the schema")
    }

    pub fn with_network(
        config: &TrainerConfig,
        schema: Arc<DomainSchema>,
        max_turn: u32,
        kb_len: usize,
        net: QNetwork,
    ) -> Result<Self> {
        let actions = ActionSpace::new(&schema);
        if net.input_dim() != state_dim(&schema) {
            return Err(Error::Dimension {
                expected: state_dim(&schema),
                got: net.input_dim(),
            });
        }
        if net.output_dim() != actions.len() {
            return Err(Error::Dimension {
                expected: actions.len(),
                got: net.output_dim(),
            });
        }
        let rule = RuleAgentKind::RequestBasics.build(&schema, config.seed);
        Ok(Self {
            target: net.clone(),
            net,
            pool: ReplayBuffer::new(config.buffer_capacity),
            gamma: config.gamma,
            learning_rate: config.learning_rate,
            grad_clip: (config.grad_clip > 0.0).then_some(config.grad_clip),
            epsilon: config.epsilon,
            greedy: false,
            evaluating: false,
            eval_greedy: false,
            recording: false,
            warm_start: false,
            rule,
            rng: ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1)),
            last_action: None,
            initialized: false,
            schema,
            max_turn,
            kb_len,
            actions,
        })
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn target_network(&self) -> &QNetwork {
        &self.target
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn pool(&self) -> &ReplayBuffer {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.pool
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    /// Greedy mode forces ε to zero.
    pub fn set_greedy(&mut self, greedy: bool) {
        self.greedy = greedy;
    }

    /// Whether transitions are stored in the pool.
    pub fn set_recording(&mut self, recording: bool) {
        self.recording = recording;
    }

    pub fn set_warm_start(&mut self, on: bool) {
        self.warm_start = on;
    }

    pub fn in_warm_start(&self) -> bool {
        self.warm_start
    }

    pub fn featurize(&self, state: &DialogState) -> Vec<f64> {
        featurize(state, &self.schema, self.max_turn, self.kb_len)
    }

    /// ε-greedy choice. During warm start the non-random branch defers to
    /// the rule policy, and the phase ends once the pool is full.
    pub fn run_policy(&mut self, x: &[f64], state: &DialogState) -> Result<usize> {
        let greedy = self.greedy || (self.evaluating && self.eval_greedy);
        if !greedy && self.epsilon > 0.0 && self.rng.gen::<f64>() < self.epsilon {
            return Ok(self.rng.gen_range(0..self.actions.len()));
        }
        if self.warm_start && !self.evaluating {
            if self.pool.is_full() {
                self.warm_start = false;
            }
            return Ok(self.rule_policy(state));
        }
        self.net.argmax(x)
    }

    fn rule_policy(&mut self, state: &DialogState) -> usize {
        let thanks = self
            .actions
            .actions()
            .iter()
            .position(|a| *a == AgentAction::Thanks)
            .expect("action space has thanks");
        match self.rule.state_to_action(state) {
            Ok(r) => self.actions.index_of(r.act()).unwrap_or(thanks),
            Err(_) => thanks,
        }
    }

    /// `num_batches` passes of `⌊pool / batch_size⌋` sampled mini-batches.
    /// Returns the mean loss.
    pub fn train(&mut self, batch_size: usize, num_batches: usize) -> Result<f64> {
        if self.pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        let per_pass = (self.pool.len() / batch_size).max(1);
        let mut total = 0.0;
        let mut count = 0;
        for _ in 0..num_batches {
            for _ in 0..per_pass {
                let batch = self.pool.sample(batch_size, &mut self.rng);
                total += self.net.batch_update(
                    &self.target,
                    &batch,
                    self.gamma,
                    self.learning_rate,
                    self.grad_clip,
                )?;
                count += 1;
            }
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    pub fn sync_target(&mut self) {
        self.target = self.net.clone();
    }
}

impl Agent for DqnAgent {
    fn initialize_episode(&mut self) {
        self.rule.initialize_episode();
        self.last_action = None;
        self.initialized = true;
    }

    fn state_to_action(&mut self, state: &DialogState) -> Result<AgentResponse> {
        if !self.initialized {
            return Err(Error::AgentNotInitialized);
        }
        let x = self.featurize(state);
        let index = self.run_policy(&x, state)?;
        self.last_action = Some(index);
        let act = self.actions.act(index)?.at_turn(state.turn + 1);
        Ok(AgentResponse::new(act))
    }

    fn wants_experience(&self) -> bool {
        self.recording && !self.evaluating
    }

    fn register_experience(&mut self, s: &[f64], reward: f64, s_next: &[f64], done: bool) {
        if !self.wants_experience() {
            return;
        }
        if let Some(a) = self.last_action {
            self.pool.push(Experience {
                s: s.to_vec(),
                a,
                r: reward,
                s_next: s_next.to_vec(),
                done,
            });
        }
    }

    fn set_evaluation(&mut self, on: bool, greedy: bool) {
        self.evaluating = on;
        self.eval_greedy = on && greedy;
    }

    fn name(&self) -> &str {
        "dqn"
    }
}
