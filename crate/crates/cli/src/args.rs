use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "dialsim", version, about = "Movie-booking dialogue simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run dialogues between an agent and the simulated user.
    #[command(args_override_self = true)]
    Run(RunConfig),
    /// Generate the synthetic KB, corpus, goal database and templates.
    Synth(SynthArgs),
    /// Extract a goal database from an annotated corpus.
    Goals(GoalsArgs),
}

/// Flag names follow the original runner so its command lines work as is.
/// A repeated flag keeps its last value.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// 0 command line, 1 inform-all, 2 request-all, 3 random-request,
    /// 4 echo, 5 request-basics, 9 DQN.
    #[arg(long = "agt", default_value_t = 9)]
    pub agt: u8,
    /// User simulator; only the rule simulator (1) exists.
    #[arg(long = "usr", default_value_t = 1)]
    pub usr: u8,
    #[arg(long = "max_turn")]
    pub max_turn: Option<u32>,
    /// Dialogues to run; for the DQN agent, training epochs unless
    /// --epochs is given.
    #[arg(long = "episodes", default_value_t = 100)]
    pub episodes: usize,
    #[arg(long = "epochs")]
    pub epochs: Option<usize>,
    #[arg(long = "schema_path")]
    pub schema_path: Option<PathBuf>,
    #[arg(long = "movie_kb_path", default_value = "data/movie_kb.json")]
    pub movie_kb_path: PathBuf,
    #[arg(long = "goal_file_path", default_value = "data/goals.json")]
    pub goal_file_path: PathBuf,
    /// Templates file; the built-in set when absent.
    #[arg(long = "template_path")]
    pub template_path: Option<PathBuf>,
    #[arg(long = "slot_err_prob", default_value_t = 0.0)]
    pub slot_err_prob: f64,
    #[arg(long = "intent_err_prob", default_value_t = 0.0)]
    pub intent_err_prob: f64,
    /// value, slot, delete or mixed.
    #[arg(long = "slot_err_mode", default_value = "mixed")]
    pub slot_err_mode: String,
    /// 0 act level, 1 utterance level.
    #[arg(long = "act_level", default_value_t = 0)]
    pub act_level: u8,
    /// 0 print NL, 1 print acts, 2 quiet.
    #[arg(long = "run_mode", default_value_t = 0)]
    pub run_mode: u8,
    /// Input for the command line agent: 0 NL, 1 dialog act.
    #[arg(long = "cmd_input_mode")]
    pub cmd_input_mode: Option<u8>,

    #[arg(long = "gamma", default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long = "epsilon", default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long = "batch_size", default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long = "num_batches", default_value_t = 100)]
    pub num_batches: usize,
    /// Dialogues simulated per epoch (N).
    #[arg(long = "simulation_epoch_size", default_value_t = 100)]
    pub simulation_epoch_size: usize,
    #[arg(long = "success_rate_threshold", default_value_t = 0.30)]
    pub success_rate_threshold: f64,
    #[arg(long = "experience_replay_pool_size", default_value_t = 1000)]
    pub experience_replay_pool_size: usize,
    #[arg(long = "learning_rate", default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long = "dqn_hidden_size", default_value_t = 80)]
    pub dqn_hidden_size: usize,
    /// 1 fills the pool with rule-policy dialogues before training.
    #[arg(long = "warm_start", default_value_t = 1)]
    pub warm_start: u8,
    #[arg(long = "warm_start_epochs", default_value_t = 120)]
    pub warm_start_epochs: usize,
    #[arg(long = "eval_episodes", default_value_t = 50)]
    pub eval_episodes: usize,
    #[arg(long = "seed", default_value_t = 0)]
    pub seed: u64,

    /// Learning curve CSV.
    #[arg(long = "curve_path")]
    pub curve_path: Option<PathBuf>,
    /// Line-delimited JSON of every act.
    #[arg(long = "transcript_path")]
    pub transcript_path: Option<PathBuf>,
    /// Final metrics as JSON.
    #[arg(long = "metrics_path")]
    pub metrics_path: Option<PathBuf>,
    /// Directory for DQN checkpoints.
    #[arg(long = "write_model_dir")]
    pub write_model_dir: Option<PathBuf>,
    /// Run a saved DQN policy greedily instead of training.
    #[arg(long = "trained_model_path")]
    pub trained_model_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.usr != 1 {
            bail!("--usr {}: only the rule simulator (1) is available", self.usr);
        }
        if !matches!(self.agt, 0..=5 | 9) {
            bail!("--agt {}: expected 0-5 or 9", self.agt);
        }
        if self.act_level > 1 {
            bail!("--act_level must be 0 or 1");
        }
        if self.run_mode > 2 {
            bail!("--run_mode must be 0, 1 or 2");
        }
        if let Some(mode) = self.cmd_input_mode {
            if self.agt != 0 {
                bail!("--cmd_input_mode only applies to the command line agent (--agt 0)");
            }
            if mode > 1 {
                bail!("--cmd_input_mode must be 0 or 1");
            }
        }
        if self.trained_model_path.is_some() && self.agt != 9 {
            bail!("--trained_model_path requires --agt 9");
        }
        if self.warm_start > 1 {
            bail!("--warm_start must be 0 or 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long = "out", default_value = "data")]
    pub out: PathBuf,
    #[arg(long = "seed", default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "kb_records", default_value_t = 1000)]
    pub kb_records: usize,
    #[arg(long = "dialogues", default_value_t = 280)]
    pub dialogues: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GoalsArgs {
    #[arg(long = "corpus_path", default_value = "data/corpus.json")]
    pub corpus_path: PathBuf,
    #[arg(long = "schema_path")]
    pub schema_path: Option<PathBuf>,
    #[arg(long = "movie_kb_path", default_value = "data/movie_kb.json")]
    pub movie_kb_path: PathBuf,
    /// first_turn, aggregate or both.
    #[arg(long = "mode", default_value = "both")]
    pub mode: String,
    #[arg(long = "filter_satisfiable")]
    pub filter_satisfiable: bool,
    #[arg(long = "out", default_value = "goals.json")]
    pub out: PathBuf,
}
