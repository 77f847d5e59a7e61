//! The `run` subcommand.

use std::fs::File;
use std::io::{BufRead, BufWriter, IsTerminal, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use dialsim::rl::{write_curve_csv, Checkpoint, EpochMetrics, Trainer, TrainerConfig, WarmStart};
use dialsim::rng::episode_rng;
use dialsim::session::InputMode;
use dialsim::{
    ActLevel, Agent, DialogAct, DialogueStatus, DomainSchema, Environment, EpisodeOutcome, Error, ErrorModelConfig,
    GoalDatabase, KnowledgeBase, Metrics, RuleAgentKind, SlotErrorMode, Speaker, TemplateSet, UserSimulator,
    Vocabulary,
};
use serde::Serialize;

use crate::args::RunConfig;
use crate::command_agent::{emit, user_line, CommandAgent, SharedOut};

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub agent: String,
    pub metrics: Metrics,
    pub curve: Vec<EpochMetrics>,
    /// True when the command line agent ran out of input before the last
    /// episode ended.
    pub interrupted: bool,
}

struct Loaded {
    env: Environment,
    kb: Arc<KnowledgeBase>,
    templates: Arc<TemplateSet>,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let mut schema = match &cfg.schema_path {
        Some(p) => DomainSchema::load(p).with_context(|| format!("loading schema {}", p.display()))?,
        None => DomainSchema::movie_default(),
    };
    if let Some(max_turn) = cfg.max_turn {
        schema = schema.with_max_turn(max_turn)?;
    }
    let schema = Arc::new(schema);
    let kb = Arc::new(
        KnowledgeBase::load(&cfg.movie_kb_path, schema.clone())
            .with_context(|| format!("loading KB {}", cfg.movie_kb_path.display()))?,
    );
    let goals = Arc::new(
        GoalDatabase::load(&cfg.goal_file_path, &schema)
            .with_context(|| format!("loading goals {}", cfg.goal_file_path.display()))?,
    );
    let templates = match &cfg.template_path {
        Some(p) => TemplateSet::load(p, &schema).with_context(|| format!("loading templates {}", p.display()))?,
        None => TemplateSet::builtin(&schema),
    };
    let lexicon = Arc::new(Vocabulary::from_kb_and_goals(&kb, &goals));
    let templates = Arc::new(templates.with_lexicon(lexicon));

    let mode: SlotErrorMode = cfg.slot_err_mode.parse()?;
    let noise = ErrorModelConfig::new(cfg.intent_err_prob, cfg.slot_err_prob, mode)?;
    let sim = UserSimulator::new(kb.clone(), goals).with_noise(noise)?;
    let level = ActLevel::from_code(cfg.act_level).context("bad --act_level")?;
    let env = Environment::new(sim)
        .with_templates(templates.clone())
        .with_act_level(level)?;
    Ok(Loaded { env, kb, templates })
}

fn trainer_config(cfg: &RunConfig) -> TrainerConfig {
    TrainerConfig {
        gamma: cfg.gamma,
        epsilon: cfg.epsilon,
        batch_size: cfg.batch_size,
        num_batches: cfg.num_batches,
        simulation_epoch_size: cfg.simulation_epoch_size,
        epochs: cfg.epochs.unwrap_or(cfg.episodes),
        success_rate_threshold: cfg.success_rate_threshold,
        buffer_capacity: cfg.experience_replay_pool_size,
        learning_rate: cfg.learning_rate,
        hidden_width: cfg.dqn_hidden_size,
        warm_start: if cfg.warm_start == 1 { WarmStart::RuleFill } else { WarmStart::Off },
        warm_start_episodes: cfg.warm_start_epochs,
        eval_episodes: cfg.eval_episodes,
        seed: cfg.seed,
        ..TrainerConfig::default()
    }
}

/// One printed line per act: text for run mode 0, the act for run mode 1.
fn act_line(act: &DialogAct, loaded: &Loaded, show_nl: bool) -> String {
    match act.speaker {
        Speaker::User => user_line(act, &loaded.templates, loaded.kb.schema(), show_nl),
        Speaker::Agent => {
            let body = if show_nl {
                act.nl
                    .clone()
                    .or_else(|| loaded.templates.render(act, loaded.kb.schema()).ok())
                    .unwrap_or_else(|| act.to_string())
            } else {
                act.to_string()
            };
            format!("Turn {} sys: {body}", act.turn)
        }
    }
}

fn goal_header(out: &SharedOut, goal: &dialsim::UserGoal) {
    emit(out, "New episode, user goal:");
    emit(out, &serde_json::to_string_pretty(&goal.to_display_json()).expect("goal serializes"));
}

fn status_line(status: DialogueStatus) -> &'static str {
    if status == DialogueStatus::Success {
        "Successful Dialog!"
    } else {
        "Failed Dialog!"
    }
}

fn print_episode(out: &SharedOut, outcome: &EpisodeOutcome, loaded: &Loaded, run_mode: u8) {
    if run_mode >= 2 {
        return;
    }
    goal_header(out, &outcome.goal);
    for act in &outcome.transcript {
        emit(out, &act_line(act, loaded, run_mode == 0));
    }
    emit(out, status_line(outcome.status));
}

struct TranscriptLog(Option<BufWriter<File>>);

impl TranscriptLog {
    fn open(path: Option<&Path>) -> Result<Self> {
        Ok(Self(match path {
            Some(p) => Some(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => None,
        }))
    }

    fn write(&mut self, episode: usize, outcome: &EpisodeOutcome) -> Result<()> {
        let Some(w) = &mut self.0 else { return Ok(()) };
        for act in &outcome.transcript {
            let mut v = serde_json::to_value(act)?;
            if let Some(obj) = v.as_object_mut() {
                obj.insert("episode".into(), episode.into());
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some(mut w) = self.0 {
            w.flush()?;
        }
        Ok(())
    }
}

fn curve_row(epoch: usize, m: &Metrics) -> EpochMetrics {
    EpochMetrics {
        epoch,
        success_rate: m.success_rate,
        avg_reward: m.avg_reward,
        avg_turns: m.avg_turns,
        buffer_size: 0,
        flushed: false,
        train_success_rate: m.success_rate,
        loss: 0.0,
    }
}

/// Plays `cfg.episodes` dialogues with a fixed policy. Curve rows cover
/// consecutive chunks of `simulation_epoch_size` episodes.
fn run_fixed<A: Agent + ?Sized>(
    cfg: &RunConfig,
    loaded: &Loaded,
    agent: &mut A,
    out: &SharedOut,
    log: &mut TranscriptLog,
) -> Result<(Metrics, Vec<EpochMetrics>)> {
    let chunk = if cfg.simulation_epoch_size == 0 { cfg.episodes.max(1) } else { cfg.simulation_epoch_size };
    let mut all = Vec::with_capacity(cfg.episodes);
    let mut curve = Vec::new();
    let mut start = 0;
    for i in 0..cfg.episodes {
        let mut rng = episode_rng(cfg.seed, i as u64);
        let outcome = loaded.env.run_episode(agent, &mut rng)?;
        print_episode(out, &outcome, loaded, cfg.run_mode);
        log.write(i, &outcome)?;
        all.push(outcome);
        if all.len() - start == chunk || i + 1 == cfg.episodes {
            curve.push(curve_row(curve.len() + 1, &Metrics::from_outcomes(&all[start..])));
            start = all.len();
        }
    }
    Ok((Metrics::from_outcomes(&all), curve))
}

fn run_command(
    cfg: &RunConfig,
    loaded: &Loaded,
    input: Box<dyn BufRead + Send>,
    out: &SharedOut,
    log: &mut TranscriptLog,
    echo: bool,
) -> Result<(Metrics, bool)> {
    let mode = if cfg.cmd_input_mode == Some(1) { InputMode::Act } else { InputMode::Nl };
    let show_nl = cfg.run_mode != 1;
    let mut agent = CommandAgent::new(
        input,
        out.clone(),
        mode,
        loaded.kb.clone(),
        loaded.templates.clone(),
        show_nl,
        echo,
    );
    let mut all = Vec::new();
    let mut interrupted = false;
    for i in 0..cfg.episodes {
        let mut rng = episode_rng(cfg.seed, i as u64);
        let goal = loaded.env.simulator().sample_goal(&mut rng)?;
        goal_header(out, &goal);
        let outcome = match loaded.env.run_with_goal(&mut agent, goal, &mut rng) {
            Ok(o) => o,
            Err(Error::AgentExhausted(_)) => {
                interrupted = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(last) = outcome.transcript.last() {
            emit(out, &act_line(last, loaded, show_nl));
        }
        emit(out, status_line(outcome.status));
        log.write(i, &outcome)?;
        all.push(outcome);
    }
    Ok((Metrics::from_outcomes(&all), interrupted))
}

fn run_training(cfg: &RunConfig, loaded: &Loaded, out: &SharedOut, log: &mut TranscriptLog) -> Result<(Metrics, Vec<EpochMetrics>)> {
    let tc = trainer_config(cfg);
    let mut trainer = Trainer::new(tc.clone(), loaded.env.clone())?;
    if let Some(dir) = &cfg.write_model_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let schema = loaded.kb.schema().clone();
    let max_turn = loaded.env.max_turn();
    let kb_len = loaded.kb.len();

    let warm = trainer.warm_start()?;
    if cfg.run_mode < 2 && warm > 0 {
        emit(
            out,
            &format!("Warm start: {warm} episodes, pool size {}", trainer.agent().pool().len()),
        );
    }
    let mut curve = Vec::with_capacity(tc.epochs);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..tc.epochs {
        let row = trainer.run_epoch()?;
        if cfg.run_mode < 2 {
            emit(
                out,
                &format!(
                    "Epoch {}: success rate {:.4}, avg reward {:.2}, avg turns {:.2}, pool {}{}",
                    row.epoch,
                    row.success_rate,
                    row.avg_reward,
                    row.avg_turns,
                    row.buffer_size,
                    if row.flushed { ", flushed" } else { "" }
                ),
            );
        }
        if row.success_rate > best {
            best = row.success_rate;
            if let Some(dir) = &cfg.write_model_dir {
                Checkpoint::from_agent(trainer.agent(), &schema, max_turn, kb_len, &tc).save(dir.join("best.json"))?;
            }
        }
        curve.push(row);
    }
    if let Some(dir) = &cfg.write_model_dir {
        Checkpoint::from_agent(trainer.agent(), &schema, max_turn, kb_len, &tc).save(dir.join("final.json"))?;
    }

    let metrics = match curve.last() {
        Some(row) => Metrics {
            episodes: tc.eval_episodes,
            success_rate: row.success_rate,
            avg_reward: row.avg_reward,
            avg_turns: row.avg_turns,
        },
        None => Metrics::default(),
    };
    if log.0.is_some() {
        // The dialogues behind the last evaluation, replayed greedily.
        let root = trainer.eval_root();
        let agent = trainer.agent_mut();
        agent.set_evaluation(true, true);
        let outcomes = loaded.env.run_many(agent, tc.eval_episodes, root, 0)?;
        agent.set_evaluation(false, false);
        for (i, o) in outcomes.iter().enumerate() {
            log.write(i, o)?;
        }
    }
    Ok((metrics, curve))
}

/// Runs the configured dialogues. `input` feeds the command line agent;
/// everything printed goes to `out`.
pub fn run(cfg: &RunConfig, input: Box<dyn BufRead + Send>, out: SharedOut) -> Result<RunSummary> {
    cfg.validate()?;
    let loaded = load(cfg)?;
    let mut log = TranscriptLog::open(cfg.transcript_path.as_deref())?;
    let mut interrupted = false;

    let (agent_name, metrics, curve) = match cfg.agt {
        0 => {
            let echo = !std::io::stdin().is_terminal();
            let (m, stopped) = run_command(cfg, &loaded, input, &out, &mut log, echo)?;
            interrupted = stopped;
            ("command".to_string(), m, Vec::new())
        }
        9 => match &cfg.trained_model_path {
            Some(path) => {
                let ckpt = Checkpoint::load(path).with_context(|| format!("loading model {}", path.display()))?;
                let mut agent = ckpt.into_agent(loaded.kb.schema().clone(), loaded.kb.len())?;
                agent.set_evaluation(true, true);
                let (m, c) = run_fixed(cfg, &loaded, &mut agent, &out, &mut log)?;
                ("dqn".to_string(), m, c)
            }
            None => {
                let (m, c) = run_training(cfg, &loaded, &out, &mut log)?;
                ("dqn".to_string(), m, c)
            }
        },
        code => {
            let kind = RuleAgentKind::from_code(code).context("unknown agent")?;
            let mut agent = kind.build(loaded.kb.schema(), cfg.seed);
            let (m, c) = run_fixed(cfg, &loaded, &mut agent, &out, &mut log)?;
            (kind.as_str().to_string(), m, c)
        }
    };
    log.finish()?;

    emit(
        &out,
        &format!(
            "Success rate: {:.4}, Avg reward: {:.2}, Avg turns: {:.2} ({} episodes)",
            metrics.success_rate, metrics.avg_reward, metrics.avg_turns, metrics.episodes
        ),
    );

    if let Some(p) = &cfg.curve_path {
        let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_curve_csv(BufWriter::new(f), &curve)?;
    }
    let summary = RunSummary {
        agent: agent_name,
        metrics,
        curve,
        interrupted,
    };
    if let Some(p) = &cfg.metrics_path {
        std::fs::write(p, serde_json::to_string_pretty(&summary)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(summary)
}
