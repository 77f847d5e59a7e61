pub mod args;
pub mod command_agent;
pub mod run;

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dialsim::corpus::{extract_goals_aggregate, extract_goals_first_turn, finalize_goal_db};
use dialsim::{Corpus, DomainSchema, GoalSource, KnowledgeBase};

pub use args::{Cli, Command, GoalsArgs, RunConfig, SynthArgs};
pub use run::{run, RunSummary};

pub fn synth(args: &SynthArgs) -> Result<()> {
    let opts = dialsim::synth::SynthOptions {
        seed: args.seed,
        kb_records: args.kb_records,
        dialogues: args.dialogues,
    };
    dialsim::synth::write_data_dir(&args.out, opts)
        .with_context(|| format!("writing data to {}", args.out.display()))?;
    Ok(())
}

fn load_schema(path: Option<&Path>) -> Result<DomainSchema> {
    Ok(match path {
        Some(p) => DomainSchema::load(p).with_context(|| format!("loading schema {}", p.display()))?,
        None => DomainSchema::movie_default(),
    })
}

/// Extracts goals from a corpus and writes the goal database. Returns a one
/// line report.
pub fn goals(args: &GoalsArgs) -> Result<String> {
    let schema = Arc::new(load_schema(args.schema_path.as_deref())?);
    let corpus = Corpus::load(&args.corpus_path, &schema)
        .with_context(|| format!("loading corpus {}", args.corpus_path.display()))?;
    let kb = KnowledgeBase::load(&args.movie_kb_path, schema.clone())
        .with_context(|| format!("loading KB {}", args.movie_kb_path.display()))?;
    let mut tagged = Vec::new();
    let (first, agg) = match args.mode.as_str() {
        "first_turn" => (true, false),
        "aggregate" => (false, true),
        "both" => (true, true),
        other => bail!("--mode {other}: expected first_turn, aggregate or both"),
    };
    if first {
        let (goals, _) = extract_goals_first_turn(&corpus, &schema)?;
        tagged.extend(goals.into_iter().map(|g| (g, GoalSource::FirstTurn)));
    }
    if agg {
        let (goals, _) = extract_goals_aggregate(&corpus, &schema)?;
        tagged.extend(goals.into_iter().map(|g| (g, GoalSource::Aggregate)));
    }
    let (db, report) = finalize_goal_db(tagged, &kb, args.filter_satisfiable, &schema)?;
    db.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(format!(
        "{} candidates, {} duplicates, {} unsatisfiable dropped, {} kept; upper bound {:.4}",
        report.input,
        report.duplicates,
        report.unsatisfiable,
        report.kept,
        db.upper_bound(&kb)
    ))
}
