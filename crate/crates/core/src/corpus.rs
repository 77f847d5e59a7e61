//! Annotated dialogues and the user-goal database built from them.
//!
//! Goals come from two extraction passes over the corpus: the first
//! non-greeting user turn of each dialogue, and the aggregate of every slot
//! the user mentions anywhere in the dialogue. Both passes share one repair
//! rule (the default request slot is added when missing) and one discard rule
//! (a goal without every required slot is dropped).

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::act::{validate_act, DialogAct, SlotValues, Speaker, UserGoal};
use crate::error::{Error, Result};
use crate::kb::{values_equal, KnowledgeBase};
use crate::schema::{is_pseudo_slot, DomainSchema, ANYTHING, UNK};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    pub speaker: Speaker,
    pub intent: String,
    #[serde(default)]
    pub inform_slots: SlotValues,
    #[serde(default)]
    pub request_slots: SlotValues,
    #[serde(default)]
    pub utterance: String,
}

impl AnnotatedTurn {
    pub fn act(&self, turn: u32) -> DialogAct {
        DialogAct {
            speaker: self.speaker,
            intent: self.intent.clone(),
            inform_slots: self.inform_slots.clone(),
            request_slots: self.request_slots.clone(),
            turn,
            nl: (!self.utterance.is_empty()).then(|| self.utterance.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotatedDialogue {
    pub turns: Vec<AnnotatedTurn>,
}

impl AnnotatedDialogue {
    pub fn validate(&self, schema: &DomainSchema) -> Result<()> {
        let mut expected = Speaker::User;
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.speaker != expected {
                return Err(Error::Corpus(format!(
                    "turn {i}: expected a {} turn",
                    expected.as_str()
                )));
            }
            let violations = validate_act(schema, &turn.act(i as u32));
            if let Some(v) = violations.first() {
                return Err(Error::Corpus(format!("turn {i}: {v}")));
            }
            expected = expected.other();
        }
        Ok(())
    }

    fn user_turns(&self) -> impl Iterator<Item = &AnnotatedTurn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::User)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Corpus {
    pub dialogues: Vec<AnnotatedDialogue>,
}

impl Corpus {
    pub fn load(path: impl AsRef<Path>, schema: &DomainSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, schema)
    }

    pub fn from_json(text: &str, schema: &DomainSchema) -> Result<Self> {
        let corpus: Corpus =
            serde_json::from_str(text).map_err(|e| Error::parse("corpus", e))?;
        for (i, d) in corpus.dialogues.iter().enumerate() {
            d.validate(schema)
                .map_err(|e| Error::Corpus(format!("dialogue {i}: {e}")))?;
        }
        Ok(corpus)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    FirstTurn,
    Aggregate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionReport {
    pub candidates: usize,
    pub repaired: usize,
    pub discarded: usize,
}

/// Accumulates slots for one candidate goal. Wildcard constraints carry no
/// preference and are dropped; pseudo-slots and slots the schema does not
/// allow on that side are ignored.
struct GoalBuilder<'a> {
    schema: &'a DomainSchema,
    goal: UserGoal,
}

impl<'a> GoalBuilder<'a> {
    fn new(schema: &'a DomainSchema) -> Self {
        Self {
            schema,
            goal: UserGoal::new(),
        }
    }

    fn seen(&self, slot: &str) -> bool {
        self.goal.inform_slots.contains_key(slot) || self.goal.request_slots.contains_key(slot)
    }

    fn absorb(&mut self, turn: &AnnotatedTurn) {
        for (slot, value) in &turn.inform_slots {
            if self.seen(slot)
                || is_pseudo_slot(slot)
                || !self.schema.is_informable(slot)
                || values_equal(value, ANYTHING)
            {
                continue;
            }
            self.goal.inform_slots.insert(slot.clone(), value.trim().to_string());
        }
        for slot in turn.request_slots.keys() {
            if self.seen(slot) || !self.schema.is_requestable(slot) {
                continue;
            }
            self.goal.request_slots.insert(slot.clone(), UNK.to_string());
        }
    }

    fn finish(mut self, report: &mut ExtractionReport) -> Option<UserGoal> {
        report.candidates += 1;
        let ticket = self.schema.default_request_slot().to_string();
        if !self.goal.request_slots.contains_key(&ticket) {
            self.goal.request_slots.insert(ticket, UNK.to_string());
            report.repaired += 1;
        }
        match self.goal.validate(self.schema) {
            Ok(()) => Some(self.goal),
            Err(_) => {
                report.discarded += 1;
                None
            }
        }
    }
}

/// One candidate per dialogue from its first non-greeting user turn.
pub fn extract_goals_first_turn(
    corpus: &Corpus,
    schema: &DomainSchema,
) -> Result<(Vec<UserGoal>, ExtractionReport)> {
    if corpus.is_empty() {
        return Err(Error::Corpus("corpus is empty".into()));
    }
    let mut report = ExtractionReport::default();
    let mut goals = Vec::new();
    for (i, dialogue) in corpus.dialogues.iter().enumerate() {
        let turn = dialogue
            .user_turns()
            .find(|t| t.intent != "greeting")
            .ok_or_else(|| Error::Corpus(format!("dialogue {i} has no user turn")))?;
        let mut builder = GoalBuilder::new(schema);
        builder.absorb(turn);
        goals.extend(builder.finish(&mut report));
    }
    Ok((goals, report))
}

/// One candidate per dialogue from every user turn; the first mention of a
/// slot decides its side and value.
pub fn extract_goals_aggregate(
    corpus: &Corpus,
    schema: &DomainSchema,
) -> Result<(Vec<UserGoal>, ExtractionReport)> {
    if corpus.is_empty() {
        return Err(Error::Corpus("corpus is empty".into()));
    }
    let mut report = ExtractionReport::default();
    let mut goals = Vec::new();
    for (i, dialogue) in corpus.dialogues.iter().enumerate() {
        if dialogue.user_turns().next().is_none() {
            return Err(Error::Corpus(format!("dialogue {i} has no user turn")));
        }
        let mut builder = GoalBuilder::new(schema);
        for turn in dialogue.user_turns() {
            builder.absorb(turn);
        }
        goals.extend(builder.finish(&mut report));
    }
    Ok((goals, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct GoalRecord {
    #[serde(flatten)]
    goal: UserGoal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<GoalSource>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalDatabase {
    goals: Vec<UserGoal>,
    sources: Vec<Option<GoalSource>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FinalizeReport {
    pub input: usize,
    pub duplicates: usize,
    pub unsatisfiable: usize,
    pub kept: usize,
}

impl GoalDatabase {
    pub fn new(goals: Vec<UserGoal>, schema: &DomainSchema) -> Result<Self> {
        let sources = vec![None; goals.len()];
        Self::with_sources(goals, sources, schema)
    }

    pub fn with_sources(
        goals: Vec<UserGoal>,
        sources: Vec<Option<GoalSource>>,
        schema: &DomainSchema,
    ) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::EmptyGoalDatabase);
        }
        assert_eq!(goals.len(), sources.len());
        for (i, g) in goals.iter().enumerate() {
            g.validate(schema)
                .map_err(|e| Error::InvalidGoal(format!("goal {i}: {e}")))?;
        }
        Ok(Self { goals, sources })
    }

    pub fn load(path: impl AsRef<Path>, schema: &DomainSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, schema)
    }

    pub fn from_json(text: &str, schema: &DomainSchema) -> Result<Self> {
        let records: Vec<GoalRecord> =
            serde_json::from_str(text).map_err(|e| Error::parse("goal file", e))?;
        let (goals, sources) = records.into_iter().map(|r| (r.goal, r.source)).unzip();
        Self::with_sources(goals, sources, schema)
    }

    pub fn to_json(&self) -> String {
        let records: Vec<GoalRecord> = self
            .goals
            .iter()
            .zip(&self.sources)
            .map(|(g, s)| GoalRecord {
                goal: g.clone(),
                source: *s,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("goals serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn goals(&self) -> &[UserGoal] {
        &self.goals
    }

    pub fn source(&self, i: usize) -> Option<GoalSource> {
        self.sources.get(i).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    /// Fraction of goals the KB can satisfy: the ceiling on any agent's
    /// success rate against this database.
    pub fn upper_bound(&self, kb: &KnowledgeBase) -> f64 {
        let reachable = self.goals.iter().filter(|g| kb.satisfiable(g)).count();
        reachable as f64 / self.goals.len() as f64
    }
}

/// Deduplicates (first occurrence wins) and optionally keeps only goals the
/// KB can satisfy.
pub fn finalize_goal_db(
    goals: Vec<(UserGoal, GoalSource)>,
    kb: &KnowledgeBase,
    filter_satisfiable: bool,
    schema: &DomainSchema,
) -> Result<(GoalDatabase, FinalizeReport)> {
    let mut report = FinalizeReport {
        input: goals.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut sources = Vec::new();
    for (goal, source) in goals {
        goal.validate(schema)?;
        if !seen.insert(goal.canonical()) {
            report.duplicates += 1;
            continue;
        }
        if filter_satisfiable && !kb.satisfiable(&goal) {
            report.unsatisfiable += 1;
            continue;
        }
        kept.push(goal);
        sources.push(Some(source));
    }
    report.kept = kept.len();
    let db = GoalDatabase::with_sources(kept, sources, schema)?;
    Ok((db, report))
}

/// Convenience: both extraction passes, tagged, deduplicated and filtered.
pub fn build_goal_db(
    corpus: &Corpus,
    kb: &Arc<KnowledgeBase>,
    filter_satisfiable: bool,
) -> Result<(GoalDatabase, ExtractionReport, ExtractionReport, FinalizeReport)> {
    let schema = kb.schema().clone();
    let (first, first_report) = extract_goals_first_turn(corpus, &schema)?;
    let (agg, agg_report) = extract_goals_aggregate(corpus, &schema)?;
    let tagged = first
        .into_iter()
        .map(|g| (g, GoalSource::FirstTurn))
        .chain(agg.into_iter().map(|g| (g, GoalSource::Aggregate)))
        .collect();
    let (db, report) = finalize_goal_db(tagged, kb, filter_satisfiable, &schema)?;
    Ok((db, first_report, agg_report, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(speaker: Speaker, intent: &str, informs: &[(&str, &str)], requests: &[&str]) -> AnnotatedTurn {
        AnnotatedTurn {
            speaker,
            intent: intent.into(),
            inform_slots: informs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            request_slots: requests.iter().map(|k| (k.to_string(), UNK.to_string())).collect(),
            utterance: String::new(),
        }
    }

    fn schema() -> DomainSchema {
        DomainSchema::movie_default()
    }

    #[test]
    fn greeting_is_skipped() {
        let d = AnnotatedDialogue {
            turns: vec![
                turn(Speaker::User, "greeting", &[], &[]),
                turn(Speaker::Agent, "greeting", &[], &[]),
                turn(
                    Speaker::User,
                    "request",
                    &[
                        ("moviename", "deadpool"),
                        ("theater", "regal meridian 16"),
                        ("starttime", "9:25 pm"),
                        ("date", "tomorrow"),
                        ("numberofpeople", "2"),
                    ],
                    &["ticket"],
                ),
            ],
        };
        let corpus = Corpus { dialogues: vec![d] };
        let (goals, report) = extract_goals_first_turn(&corpus, &schema()).unwrap();
        assert_eq!(goals.len(), 1);
        assert_eq!(goals[0].inform_slots["moviename"], "deadpool");
        assert_eq!(report.repaired, 0);
    }

    #[test]
    fn missing_required_is_discarded_and_ticket_repaired() {
        let d = AnnotatedDialogue {
            turns: vec![
                turn(Speaker::User, "inform", &[("moviename", "deadpool"), ("city", "seattle")], &[]),
                turn(Speaker::Agent, "request", &[], &["date"]),
                turn(
                    Speaker::User,
                    "inform",
                    &[("date", "today"), ("starttime", "4 pm"), ("numberofpeople", "3")],
                    &["theater"],
                ),
            ],
        };
        let corpus = Corpus { dialogues: vec![d] };
        let (first, r1) = extract_goals_first_turn(&corpus, &schema()).unwrap();
        assert!(first.is_empty());
        assert_eq!((r1.candidates, r1.repaired, r1.discarded), (1, 1, 1));
        let (agg, r2) = extract_goals_aggregate(&corpus, &schema()).unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(r2.repaired, 1);
        assert_eq!(agg[0].inform_slots["date"], "today");
        assert!(agg[0].request_slots.contains_key("theater"));
        assert!(agg[0].request_slots.contains_key("ticket"));
    }

    #[test]
    fn no_user_turn_errors() {
        let d = AnnotatedDialogue {
            turns: vec![turn(Speaker::User, "greeting", &[], &[])],
        };
        let corpus = Corpus { dialogues: vec![d] };
        assert!(extract_goals_first_turn(&corpus, &schema()).is_err());
        assert!(extract_goals_first_turn(&Corpus::default(), &schema()).is_err());
    }

    #[test]
    fn corpus_alternation_is_checked() {
        let d = AnnotatedDialogue {
            turns: vec![
                turn(Speaker::User, "request", &[], &["ticket"]),
                turn(Speaker::User, "request", &[], &["ticket"]),
            ],
        };
        assert!(d.validate(&schema()).is_err());
        let d = AnnotatedDialogue {
            turns: vec![turn(Speaker::Agent, "request", &[], &["city"])],
        };
        assert!(d.validate(&schema()).is_err());
    }

    #[test]
    fn empty_finalize_errors() {
        let s = Arc::new(schema());
        let kb = KnowledgeBase::new(s.clone(), vec![]).unwrap();
        assert!(matches!(
            finalize_goal_db(vec![], &kb, false, &s),
            Err(Error::EmptyGoalDatabase)
        ));
    }
}
