//! Deterministic synthetic data: a movie KB, an annotated corpus whose user
//! side comes from the simulator itself, the goal database extracted from
//! that corpus, and a reduced domain for quick learning runs.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::act::{DialogAct, SlotValues, Speaker, UserGoal};
use crate::agents::{Agent, AgentResponse};
use crate::corpus::{build_goal_db, AnnotatedDialogue, AnnotatedTurn, Corpus, FinalizeReport, GoalDatabase};
use crate::dst::{DialogState, PLACEHOLDER};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::kb::{KbRecord, KnowledgeBase};
use crate::nlg::TemplateSet;
use crate::rng::SimRng;
use crate::schema::{DomainSchema, TASKCOMPLETE};
use crate::usersim::UserSimulator;

struct Movie {
    name: &'static str,
    genre: &'static str,
    mpaa: &'static str,
    critic: &'static str,
    actor: &'static str,
    actress: &'static str,
    director: &'static str,
    year: &'static str,
    duration: &'static str,
    series: Option<&'static str>,
}

const fn movie(
    name: &'static str,
    genre: &'static str,
    mpaa: &'static str,
    critic: &'static str,
    actor: &'static str,
    actress: &'static str,
    director: &'static str,
    year: &'static str,
    duration: &'static str,
    series: Option<&'static str>,
) -> Movie {
    Movie {
        name,
        genre,
        mpaa,
        critic,
        actor,
        actress,
        director,
        year,
        duration,
        series,
    }
}

const MOVIES: &[Movie] = &[
    movie("deadpool", "comedy", "r", "8", "ryan reynolds", "morena baccarin", "tim miller", "2016", "108 min", Some("x-men")),
    movie("zootopia", "animated", "pg", "8.1", "jason bateman", "ginnifer goodwin", "byron howard", "2016", "108 min", None),
    movie("the witch", "horror", "r", "6.9", "ralph ineson", "anya taylor-joy", "robert eggers", "2015", "92 min", None),
    movie("london has fallen", "action", "r", "5.9", "gerard butler", "angela bassett", "babak najafi", "2016", "99 min", Some("has fallen")),
    movie("whiskey tango foxtrot", "comedy", "r", "6.6", "martin freeman", "tina fey", "glenn ficarra", "2016", "112 min", None),
    movie("10 cloverfield lane", "thriller", "pg-13", "7.2", "john goodman", "mary elizabeth winstead", "dan trachtenberg", "2016", "103 min", Some("cloverfield")),
    movie("kung fu panda 3", "animated", "pg", "7.1", "jack black", "angelina jolie", "jennifer yuh nelson", "2016", "95 min", Some("kung fu panda")),
    movie("the revenant", "drama", "r", "8", "leonardo dicaprio", "grace dove", "alejandro inarritu", "2015", "156 min", None),
    movie("risen", "drama", "pg-13", "6.3", "joseph fiennes", "maria botto", "kevin reynolds", "2016", "107 min", None),
    movie("gods of egypt", "fantasy", "pg-13", "5.4", "brenton thwaites", "courtney eaton", "alex proyas", "2016", "127 min", None),
    movie("allegiant", "sci-fi", "pg-13", "5.7", "theo james", "shailene woodley", "robert schwentke", "2016", "120 min", Some("divergent")),
    movie("hail caesar", "comedy", "pg-13", "6.3", "josh brolin", "scarlett johansson", "joel coen", "2016", "106 min", None),
];

struct Theater {
    name: &'static str,
    city: &'static str,
    state: &'static str,
    zip: &'static str,
    chain: &'static str,
    distance: Option<&'static str>,
}

const fn theater(
    name: &'static str,
    city: &'static str,
    state: &'static str,
    zip: &'static str,
    chain: &'static str,
    distance: Option<&'static str>,
) -> Theater {
    Theater {
        name,
        city,
        state,
        zip,
        chain,
        distance,
    }
}

// Birmingham has a single theater so the showing used in the interactive
// walkthrough resolves to one suggestion.
const THEATERS: &[Theater] = &[
    theater("amc pacific place 11 theater", "seattle", "wa", "98101", "amc", Some("downtown")),
    theater("regal meridian 16", "seattle", "wa", "98101", "regal", Some("downtown")),
    theater("cinerama", "seattle", "wa", "98121", "cinerama", None),
    theater("lincoln square cinemas", "bellevue", "wa", "98004", "cinemark", Some("near bellevue square")),
    theater("regal crossroads", "bellevue", "wa", "98008", "regal", None),
    theater("carmike summit 16", "birmingham", "al", "35243", "carmike", Some("near the summit")),
    theater("regal fox tower", "portland", "or", "97205", "regal", Some("downtown")),
    theater("cinema 21", "portland", "or", "97209", "independent", None),
    theater("amc century city 15", "los angeles", "ca", "90067", "amc", None),
    theater("arclight hollywood", "los angeles", "ca", "90028", "arclight", Some("hollywood")),
    theater("amc metreon 16", "san francisco", "ca", "94103", "amc", Some("soma")),
    theater("century san francisco centre", "san francisco", "ca", "94103", "cinemark", None),
    theater("amc river east 21", "chicago", "il", "60611", "amc", None),
    theater("music box theatre", "chicago", "il", "60657", "independent", Some("lakeview")),
    theater("amc studio 30", "houston", "tx", "77077", "amc", None),
    theater("edwards marq e", "houston", "tx", "77024", "regal", None),
];

const DATES: &[&str] = &["today", "tomorrow", "friday", "saturday", "sunday", "this weekend", "next monday"];
const TIMES: &[&str] = &["9:00 pm", "4 pm", "7:30 pm", "10:15 pm", "1:30 pm", "6 pm", "11:00 am", "8:45 pm"];
/// Times no record uses; goals carrying them cannot be booked.
const ODD_TIMES: &[&str] = &["11:55 pm", "2:10 am", "5:05 am"];
const FORMATS: &[&str] = &["standard", "3d", "imax"];
const PRICES: &[&str] = &["$9.50", "$12", "$15"];
const SEATING: &[&str] = &["reserved", "general admission"];
const SUBTITLES: &[&str] = &["english", "spanish"];
const REQUESTABLE_EXTRAS: &[&str] = &["genre", "critic_rating", "mpaa_rating", "price"];

fn put(row: &mut SlotValues, schema: &DomainSchema, slot: &str, value: &str) {
    if schema.is_informable(slot) && schema.is_lookup(slot) {
        row.insert(slot.to_string(), value.to_string());
    }
}

fn showing<R: Rng + ?Sized>(
    schema: &DomainSchema,
    m: &Movie,
    t: &Theater,
    date: &str,
    time: &str,
    rng: &mut R,
) -> SlotValues {
    let mut row = SlotValues::new();
    put(&mut row, schema, "moviename", m.name);
    put(&mut row, schema, "theater", t.name);
    put(&mut row, schema, "city", t.city);
    put(&mut row, schema, "state", t.state);
    put(&mut row, schema, "date", date);
    put(&mut row, schema, "starttime", time);
    put(&mut row, schema, "genre", m.genre);
    put(&mut row, schema, "mpaa_rating", m.mpaa);
    put(&mut row, schema, "critic_rating", m.critic);
    put(&mut row, schema, "actor", m.actor);
    put(&mut row, schema, "actress", m.actress);
    put(&mut row, schema, "director", m.director);
    put(&mut row, schema, "release_year", m.year);
    put(&mut row, schema, "duration", m.duration);
    put(&mut row, schema, "language", "english");
    put(&mut row, schema, "description", &format!("a {} film directed by {}", m.genre, m.director));
    if let Some(series) = m.series {
        put(&mut row, schema, "movie_series", series);
    }
    put(&mut row, schema, "zip", t.zip);
    put(&mut row, schema, "theater_chain", t.chain);
    if let Some(d) = t.distance {
        put(&mut row, schema, "distanceconstraints", d);
    }
    put(&mut row, schema, "video_format", FORMATS.choose(rng).unwrap());
    put(&mut row, schema, "price", PRICES.choose(rng).unwrap());
    if rng.gen_bool(0.5) {
        put(&mut row, schema, "seating", SEATING.choose(rng).unwrap());
    }
    if rng.gen_bool(0.3) {
        put(&mut row, schema, "subtitles", SUBTITLES.choose(rng).unwrap());
    }
    row
}

fn theater_named(name: &str) -> &'static Theater {
    THEATERS.iter().find(|t| t.name == name).expect("known theater")
}

/// `records` distinct showings. The first two are fixed: the showings the
/// interactive walkthroughs book. Deadpool plays at 4 pm only in birmingham,
/// so asking for its theater at that time has a single answer.
pub fn movie_kb<R: Rng + ?Sized>(schema: Arc<DomainSchema>, records: usize, rng: &mut R) -> Result<KnowledgeBase> {
    let deadpool = &MOVIES[0];
    let mut rows = vec![
        showing(&schema, deadpool, theater_named("amc pacific place 11 theater"), "tomorrow", "9:00 pm", rng),
        showing(&schema, deadpool, theater_named("carmike summit 16"), "today", "4 pm", rng),
    ];
    let mut seen: BTreeSet<(usize, usize, usize, usize)> = BTreeSet::new();
    let capacity = MOVIES.len() * THEATERS.len() * DATES.len() * TIMES.len() - THEATERS.len() * DATES.len() + 1;
    if records > capacity {
        return Err(Error::Config(format!("at most {capacity} distinct showings")));
    }
    while rows.len() < records {
        let key = (
            rng.gen_range(0..MOVIES.len()),
            rng.gen_range(0..THEATERS.len()),
            rng.gen_range(0..DATES.len()),
            rng.gen_range(0..TIMES.len()),
        );
        let anchor_key = matches!(
            (key.0, key.1, DATES[key.2], TIMES[key.3]),
            (0, 0, "tomorrow", "9:00 pm") | (0, _, _, "4 pm")
        );
        if anchor_key || !seen.insert(key) {
            continue;
        }
        rows.push(showing(
            &schema,
            &MOVIES[key.0],
            &THEATERS[key.1],
            DATES[key.2],
            TIMES[key.3],
            rng,
        ));
    }
    KnowledgeBase::new(schema, rows)
}

/// Builds a goal from a record: `constrain` slots take the record's values
/// (`numberofpeople` gets `people`), `request` slots are asked for, and the
/// default request slot is always added.
pub fn goal_from_record(
    schema: &DomainSchema,
    record: &KbRecord,
    constrain: &[&str],
    request: &[&str],
    people: u32,
) -> Result<UserGoal> {
    let mut goal = UserGoal::new();
    for &slot in constrain {
        let value = if slot == "numberofpeople" {
            people.to_string()
        } else {
            record
                .get(slot)
                .ok_or_else(|| Error::InvalidGoal(format!("record {} has no `{slot}`", record.id)))?
                .to_string()
        };
        goal = goal.constrain(slot, value);
    }
    for &slot in request {
        goal = goal.want(slot);
    }
    goal = goal.want(schema.default_request_slot());
    goal.validate(schema)?;
    Ok(goal)
}

/// `n` bookable goals that request only the ticket and constrain only slots
/// the request-basics agent asks about.
pub fn curated_goals<R: Rng + ?Sized>(kb: &KnowledgeBase, n: usize, rng: &mut R) -> Result<GoalDatabase> {
    let schema = kb.schema().clone();
    let mut goals = Vec::with_capacity(n);
    while goals.len() < n {
        let record = kb.records().choose(rng).ok_or(Error::EmptyGoalDatabase)?;
        let mut constrain = vec!["moviename", "theater", "starttime", "date", "numberofpeople"];
        if rng.gen_bool(0.5) && record.get("city").is_some() {
            constrain.push("city");
        }
        let goal = goal_from_record(&schema, record, &constrain, &[], rng.gen_range(1..=6))?;
        if kb.satisfiable(&goal) {
            goals.push(goal);
        }
    }
    GoalDatabase::new(goals, &schema)
}

/// Plays the agent side of corpus dialogues: answers the user's questions,
/// asks for missing basics in a shuffled order, then books and thanks.
#[derive(Debug)]
struct CorpusAgent {
    order: Vec<&'static str>,
    rng: SimRng,
    booked: bool,
}

impl CorpusAgent {
    fn new(seed: u64) -> Self {
        Self {
            order: Vec::new(),
            rng: SimRng::seed_from_u64(seed),
            booked: false,
        }
    }
}

impl Agent for CorpusAgent {
    fn initialize_episode(&mut self) {
        self.order = vec!["moviename", "starttime", "city", "date", "theater", "numberofpeople"];
        self.order.shuffle(&mut self.rng);
        self.booked = false;
    }

    fn state_to_action(&mut self, state: &DialogState) -> Result<AgentResponse> {
        let turn = state.turn + 1;
        if self.booked {
            return Ok(AgentResponse::new(DialogAct::agent("thanks").at_turn(turn)));
        }
        if let Some(user) = &state.last_user_act {
            let asked: Vec<&String> = user
                .request_slots
                .keys()
                .filter(|s| s.as_str() != "ticket" && !state.agent_informed.contains_key(*s))
                .collect();
            if let Some(slot) = asked.first() {
                let act = DialogAct::agent("inform").inform(slot.as_str(), PLACEHOLDER);
                return Ok(AgentResponse::new(act.at_turn(turn)));
            }
        }
        let asked_before = |slot: &str| {
            state
                .history
                .iter()
                .any(|a| a.speaker == Speaker::Agent && a.request_slots.contains_key(slot))
        };
        let missing = self.order.iter().find(|s| {
            !state.user_constraints.contains_key(**s)
                && !state.user_requests_seen.contains(**s)
                && !asked_before(s)
        });
        let act = match missing {
            Some(slot) => DialogAct::agent("request").request(*slot),
            None => {
                self.booked = true;
                DialogAct::agent("inform").inform(TASKCOMPLETE, PLACEHOLDER)
            }
        };
        Ok(AgentResponse::new(act.at_turn(turn)))
    }

    fn name(&self) -> &str {
        "corpus"
    }
}

fn annotate(act: &DialogAct) -> AnnotatedTurn {
    AnnotatedTurn {
        speaker: act.speaker,
        intent: act.intent.clone(),
        inform_slots: act.inform_slots.clone(),
        request_slots: act.request_slots.clone(),
        utterance: act.nl.clone().unwrap_or_default(),
    }
}

fn corpus_goal<R: Rng + ?Sized>(kb: &KnowledgeBase, rng: &mut R) -> Result<UserGoal> {
    let schema = kb.schema();
    let record = kb.records().choose(rng).ok_or(Error::EmptyGoalDatabase)?;
    let mut constrain = vec!["moviename", "starttime", "date", "numberofpeople"];
    let mut request = Vec::new();
    if rng.gen_bool(0.7) {
        constrain.push("theater");
    } else {
        request.push("theater");
    }
    if rng.gen_bool(0.8) {
        constrain.push("city");
        if rng.gen_bool(0.3) {
            constrain.push("state");
        }
    }
    if rng.gen_bool(0.2) {
        let extra = REQUESTABLE_EXTRAS.choose(rng).unwrap();
        if record.get(extra).is_some() {
            request.push(*extra);
        }
    }
    let mut goal = goal_from_record(schema, record, &constrain, &request, rng.gen_range(1..=6))?;
    if rng.gen_bool(0.12) {
        goal.inform_slots
            .insert("starttime".into(), ODD_TIMES.choose(rng).unwrap().to_string());
    }
    Ok(goal)
}

/// Annotated dialogues: the simulator plays the user against a scripted
/// booking agent. Some open with a greeting exchange, and some never mention
/// one required slot, so extraction has repairs and discards to make.
pub fn synth_corpus<R: Rng + ?Sized>(
    kb: &Arc<KnowledgeBase>,
    templates: &Arc<TemplateSet>,
    dialogues: usize,
    rng: &mut R,
) -> Result<Corpus> {
    let schema = kb.schema().clone();
    let mut out = Vec::with_capacity(dialogues);
    let mut agent = CorpusAgent::new(rng.gen());
    while out.len() < dialogues {
        let goal = corpus_goal(kb, rng)?;
        let goals = Arc::new(GoalDatabase::new(vec![goal.clone()], &schema)?);
        let env = Environment::new(UserSimulator::new(kb.clone(), goals)).with_templates(templates.clone());
        let mut episode_rng = SimRng::seed_from_u64(rng.gen());
        let outcome = env.run_with_goal(&mut agent, goal, &mut episode_rng)?;
        let mut turns: Vec<AnnotatedTurn> = outcome.transcript.iter().map(annotate).collect();
        if rng.gen_bool(0.08) {
            let slot = *["date", "numberofpeople"].choose(rng).unwrap();
            for (i, t) in turns.iter_mut().enumerate() {
                let dropped = t.inform_slots.remove(slot).is_some() | t.request_slots.remove(slot).is_some();
                if dropped {
                    t.utterance = templates.render(&t.act(i as u32), &schema)?;
                }
            }
        }
        if rng.gen_bool(0.3) {
            let hello = DialogAct::user("greeting").with_nl("Hi");
            let welcome = DialogAct::agent("greeting");
            let welcome = match templates.render(&welcome, &schema) {
                Ok(nl) => welcome.with_nl(nl),
                Err(_) => welcome,
            };
            turns.splice(0..0, [annotate(&hello), annotate(&welcome)]);
        }
        let dialogue = AnnotatedDialogue { turns };
        if dialogue.validate(&schema).is_ok() {
            out.push(dialogue);
        }
    }
    Ok(Corpus { dialogues: out })
}

#[derive(Debug, Clone)]
pub struct MovieDomain {
    pub schema: Arc<DomainSchema>,
    pub kb: Arc<KnowledgeBase>,
    pub corpus: Corpus,
    pub goals: GoalDatabase,
    pub templates: Arc<TemplateSet>,
    pub report: FinalizeReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthOptions {
    pub seed: u64,
    pub kb_records: usize,
    pub dialogues: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            kb_records: 1000,
            dialogues: 280,
        }
    }
}

/// KB, corpus and the goal database extracted from the corpus (unfiltered,
/// so some goals are unreachable).
pub fn movie_domain(options: SynthOptions) -> Result<MovieDomain> {
    let schema = Arc::new(DomainSchema::movie_default());
    let mut rng = SimRng::seed_from_u64(options.seed);
    let kb = Arc::new(movie_kb(schema.clone(), options.kb_records, &mut rng)?);
    let templates = Arc::new(TemplateSet::builtin(&schema));
    let corpus = synth_corpus(&kb, &templates, options.dialogues, &mut rng)?;
    let (goals, _, _, report) = build_goal_db(&corpus, &kb, false)?;
    Ok(MovieDomain {
        schema,
        kb,
        corpus,
        goals,
        templates,
        report,
    })
}

pub const TINY_MOVIES: &[&str] = &["deadpool", "zootopia", "the witch", "risen", "kung fu panda 3"];
const TINY_THEATERS: &[(&str, &str)] = &[
    ("amc pacific place 11 theater", "seattle"),
    ("regal meridian 16", "seattle"),
    ("lincoln square cinemas", "bellevue"),
    ("regal crossroads", "bellevue"),
    ("carmike summit 16", "birmingham"),
    ("carmike 10", "birmingham"),
];
const TINY_DATES: &[&str] = &["today", "tomorrow", "friday"];
const TINY_TIMES: &[&str] = &["4 pm", "7:30 pm", "9:00 pm", "10:15 pm", "1:30 pm"];

#[derive(Debug, Clone)]
pub struct TinyDomain {
    pub schema: Arc<DomainSchema>,
    pub kb: Arc<KnowledgeBase>,
    pub goals: GoalDatabase,
    pub templates: Arc<TemplateSet>,
}

/// 100 showings and 64 goals: 24 ask only for a ticket, 16 also ask which
/// theater, 16 ask for the start time, and 8 cannot be booked.
pub fn tiny_domain(seed: u64) -> Result<TinyDomain> {
    let schema = Arc::new(DomainSchema::tiny());
    let mut rng = SimRng::seed_from_u64(seed);
    let mut keys = Vec::new();
    for m in 0..TINY_MOVIES.len() {
        for t in 0..TINY_THEATERS.len() {
            for d in 0..TINY_DATES.len() {
                for s in 0..TINY_TIMES.len() {
                    keys.push((m, t, d, s));
                }
            }
        }
    }
    keys.shuffle(&mut rng);
    keys.truncate(100);
    keys.sort_unstable();
    let rows = keys
        .iter()
        .map(|&(m, t, d, s)| {
            let mut row = SlotValues::new();
            row.insert("moviename".into(), TINY_MOVIES[m].into());
            row.insert("theater".into(), TINY_THEATERS[t].0.into());
            row.insert("city".into(), TINY_THEATERS[t].1.into());
            row.insert("date".into(), TINY_DATES[d].into());
            row.insert("starttime".into(), TINY_TIMES[s].into());
            row
        })
        .collect();
    let kb = Arc::new(KnowledgeBase::new(schema.clone(), rows)?);

    let mut goals = Vec::with_capacity(64);
    let mut seen = BTreeSet::new();
    let mut push = |goal: UserGoal, goals: &mut Vec<UserGoal>| {
        if seen.insert(goal.canonical()) {
            goals.push(goal);
            true
        } else {
            false
        }
    };
    let plans: [(&[&str], &[&str], usize); 3] = [
        (&["moviename", "theater", "starttime", "date", "numberofpeople"], &[], 24),
        (&["moviename", "starttime", "date", "numberofpeople", "city"], &["theater"], 16),
        (&["moviename", "theater", "date", "numberofpeople"], &["starttime"], 16),
    ];
    for (constrain, request, count) in plans {
        let mut made = 0;
        while made < count {
            let record = kb.records().choose(&mut rng).unwrap();
            let goal = goal_from_record(&schema, record, constrain, request, rng.gen_range(1..=4))?;
            if push(goal, &mut goals) {
                made += 1;
            }
        }
    }
    let mut made = 0;
    while made < 8 {
        let goal = UserGoal::new()
            .constrain("moviename", *TINY_MOVIES.choose(&mut rng).unwrap())
            .constrain("theater", TINY_THEATERS.choose(&mut rng).unwrap().0)
            .constrain("starttime", *TINY_TIMES.choose(&mut rng).unwrap())
            .constrain("date", *TINY_DATES.choose(&mut rng).unwrap())
            .constrain("numberofpeople", rng.gen_range(1..=4).to_string())
            .want(schema.default_request_slot());
        if !kb.satisfiable(&goal) && push(goal, &mut goals) {
            made += 1;
        }
    }
    goals.shuffle(&mut rng);
    let goals = GoalDatabase::new(goals, &schema)?;
    let templates = Arc::new(TemplateSet::builtin(&schema));
    Ok(TinyDomain {
        schema,
        kb,
        goals,
        templates,
    })
}

/// Writes `schema.json`, `movie_kb.json`, `corpus.json`, `goals.json` and
/// `templates.json` for the movie domain, and the tiny domain under `tiny/`.
pub fn write_data_dir(dir: &Path, options: SynthOptions) -> Result<()> {
    let write = |path: &Path, text: String| -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    };
    let movie = movie_domain(options)?;
    write(&dir.join("schema.json"), movie.schema.to_json())?;
    write(&dir.join("movie_kb.json"), movie.kb.to_json())?;
    write(&dir.join("corpus.json"), movie.corpus.to_json())?;
    write(&dir.join("goals.json"), movie.goals.to_json())?;
    write(&dir.join("templates.json"), movie.templates.to_json())?;
    let tiny = tiny_domain(options.seed)?;
    write(&dir.join("tiny/schema.json"), tiny.schema.to_json())?;
    write(&dir.join("tiny/kb.json"), tiny.kb.to_json())?;
    write(&dir.join("tiny/goals.json"), tiny.goals.to_json())?;
    write(&dir.join("tiny/templates.json"), tiny.templates.to_json())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::act::validate_act;

    #[test]
    fn anchors_resolve() {
        let schema = Arc::new(DomainSchema::movie_default());
        let mut rng = SimRng::seed_from_u64(3);
        let kb = movie_kb(schema, 400, &mut rng).unwrap();
        assert_eq!(kb.len(), 400);
        let c: SlotValues = [
            ("moviename", "deadpool"),
            ("city", "birmingham"),
            ("date", "today"),
            ("starttime", "4 pm"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        assert_eq!(kb.suggest_values("theater", &c).unwrap(), ["carmike summit 16"]);
    }

    #[test]
    fn tiny_domain_shape() {
        let tiny = tiny_domain(0).unwrap();
        assert_eq!(tiny.schema.num_intents(), 5);
        assert_eq!(tiny.schema.num_slots(), 8);
        assert_eq!(tiny.kb.len(), 100);
        assert_eq!(tiny.goals.len(), 64);
        let reachable = tiny.goals.goals().iter().filter(|g| tiny.kb.satisfiable(g)).count();
        assert_eq!(reachable, 56);
        let ticket_only = tiny.goals.goals().iter().filter(|g| g.request_slots.len() == 1).count();
        assert_eq!(ticket_only, 32);
    }

    #[test]
    fn small_movie_domain_is_consistent() {
        let d = movie_domain(SynthOptions {
            seed: 1,
            kb_records: 200,
            dialogues: 40,
        })
        .unwrap();
        assert_eq!(d.corpus.len(), 40);
        for dialogue in &d.corpus.dialogues {
            for (i, t) in dialogue.turns.iter().enumerate() {
                assert!(validate_act(&d.schema, &t.act(i as u32)).is_empty());
            }
        }
        assert!(!d.goals.is_empty());
        let bound = d.goals.upper_bound(&d.kb);
        assert!(bound > 0.0 && bound <= 1.0);
    }

    #[test]
    fn curated_goals_are_bookable() {
        let schema = Arc::new(DomainSchema::movie_default());
        let mut rng = SimRng::seed_from_u64(5);
        let kb = movie_kb(schema, 200, &mut rng).unwrap();
        let goals = curated_goals(&kb, 30, &mut rng).unwrap();
        assert_eq!(goals.upper_bound(&kb), 1.0);
        for g in goals.goals() {
            assert_eq!(g.request_slots.len(), 1);
        }
    }
}
