//! Template-based surface realization and its inverse.
//!
//! A template is keyed by speaker, intent and the sorted inform and request
//! slot names; `$slot$` placeholders are filled from the act's values. A
//! template may pin values through `when`, which both restricts when it is
//! used for rendering and supplies those values when parsing. Acts without a
//! template get a deterministic fallback composition.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::act::{DialogAct, SlotValues, Speaker};
use crate::error::{Error, Result};
use crate::kb::values_equal;
use crate::noise::Vocabulary;
use crate::schema::{is_pseudo_slot, DomainSchema, ANYTHING, NO_MATCH, NO_TICKET_AVAILABLE, TASKCOMPLETE, TASKCOMPLETE_OK, UNK};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub speaker: Speaker,
    pub intent: String,
    #[serde(default)]
    pub inform_slots: Vec<String>,
    #[serde(default)]
    pub request_slots: Vec<String>,
    pub template: String,
    #[serde(default, skip_serializing_if = "SlotValues::is_empty")]
    pub when: SlotValues,
}

type Key = (Speaker, String, Vec<String>, Vec<String>);

fn key_of(act: &DialogAct) -> Key {
    (
        act.speaker,
        act.intent.clone(),
        act.inform_slots.keys().cloned().collect(),
        act.request_slots.keys().cloned().collect(),
    )
}

fn placeholder_re() -> &'static Regex {
    use std::sync::OnceLock;
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$([a-z0-9_]+)\$").unwrap())
}

fn strip_end(s: &str) -> &str {
    s.trim().trim_end_matches(['.', '?', '!']).trim_end()
}

#[derive(Debug, Clone)]
struct Compiled {
    pattern: Regex,
    captures: Vec<String>,
    literal_len: usize,
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    entries: Vec<TemplateEntry>,
    by_key: HashMap<Key, Vec<usize>>,
    compiled: Vec<Compiled>,
    parse_order: Vec<usize>,
    lexicon: Option<Arc<Vocabulary>>,
}

impl TemplateSet {
    pub fn new(mut entries: Vec<TemplateEntry>, schema: &DomainSchema) -> Result<Self> {
        let mut compiled = Vec::with_capacity(entries.len());
        for (n, e) in entries.iter_mut().enumerate() {
            e.inform_slots.sort();
            e.request_slots.sort();
            validate_entry(e, schema).map_err(|m| Error::Template(format!("entry {n}: {m}")))?;
            compiled.push(compile(&e.template));
        }
        let mut by_key: HashMap<Key, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            let key = (e.speaker, e.intent.clone(), e.inform_slots.clone(), e.request_slots.clone());
            by_key.entry(key).or_default().push(i);
        }
        // pinned templates are tried first when rendering
        for ids in by_key.values_mut() {
            ids.sort_by_key(|&i| std::cmp::Reverse(entries[i].when.len()));
        }
        let mut parse_order: Vec<usize> = (0..entries.len()).collect();
        parse_order.sort_by_key(|&i| std::cmp::Reverse(compiled[i].literal_len));
        Ok(Self {
            entries,
            by_key,
            compiled,
            parse_order,
            lexicon: None,
        })
    }

    /// Known slot values used to pick among templates that match equally.
    pub fn with_lexicon(mut self, lexicon: Arc<Vocabulary>) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn load(path: impl AsRef<Path>, schema: &DomainSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, schema)
    }

    pub fn from_json(text: &str, schema: &DomainSchema) -> Result<Self> {
        let entries: Vec<TemplateEntry> =
            serde_json::from_str(text).map_err(|e| Error::parse("template file", e))?;
        Self::new(entries, schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("templates serialize")
    }

    /// The shipped inventory restricted to what `schema` defines.
    pub fn builtin(schema: &DomainSchema) -> Self {
        Self::new(builtin_entries(schema), schema).expect("builtin templates are valid")
    }

    pub fn entries(&self) -> &[TemplateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether some template would be used to render `act`.
    pub fn has_template(&self, act: &DialogAct) -> bool {
        self.template_for(act).is_some()
    }

    fn template_for(&self, act: &DialogAct) -> Option<&TemplateEntry> {
        let ids = self.by_key.get(&key_of(act))?;
        ids.iter().map(|&i| &self.entries[i]).find(|e| {
            e.when
                .iter()
                .all(|(s, v)| act.inform_slots.get(s).is_some_and(|a| values_equal(a, v)))
        })
    }

    pub fn render(&self, act: &DialogAct, schema: &DomainSchema) -> Result<String> {
        match self.template_for(act) {
            Some(entry) => fill(&entry.template, &act.inform_slots),
            None => Ok(fallback(act, schema)),
        }
    }

    /// Inverse of template rendering. Returns `None` when no template
    /// matches; the caller decides how to degrade.
    pub fn parse_nl(&self, utterance: &str, speaker: Option<Speaker>) -> Option<DialogAct> {
        let text = strip_end(utterance);
        if text.is_empty() {
            return None;
        }
        let mut best: Option<(usize, DialogAct)> = None;
        for &i in &self.parse_order {
            let entry = &self.entries[i];
            if speaker.is_some_and(|s| s != entry.speaker) {
                continue;
            }
            let compiled = &self.compiled[i];
            let Some(caps) = compiled.pattern.captures(text) else {
                continue;
            };
            let mut act = DialogAct::new(entry.speaker, entry.intent.clone());
            let mut consistent = true;
            for (n, slot) in compiled.captures.iter().enumerate() {
                let value = caps.get(n + 1).unwrap().as_str().trim().to_string();
                match act.inform_slots.get(slot) {
                    Some(prev) if !values_equal(prev, &value) => consistent = false,
                    _ => {
                        act.inform_slots.insert(slot.clone(), value);
                    }
                }
            }
            if !consistent {
                continue;
            }
            for (slot, value) in &entry.when {
                act.inform_slots.insert(slot.clone(), value.clone());
            }
            for slot in &entry.request_slots {
                act.request_slots.insert(slot.clone(), UNK.to_string());
            }
            let score = self.lexicon_score(&compiled.captures, &act);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, act));
            }
        }
        best.map(|(_, act)| act)
    }

    fn lexicon_score(&self, slots: &[String], act: &DialogAct) -> usize {
        let Some(lexicon) = &self.lexicon else {
            return 0;
        };
        slots
            .iter()
            .filter(|s| lexicon.contains(s, &act.inform_slots[*s]))
            .count()
    }
}

fn validate_entry(e: &TemplateEntry, schema: &DomainSchema) -> std::result::Result<(), String> {
    if !schema.has_intent(&e.intent) {
        return Err(format!("unknown intent `{}`", e.intent));
    }
    let informs: BTreeSet<&String> = e.inform_slots.iter().collect();
    for slot in e.inform_slots.iter().chain(&e.request_slots) {
        if schema.slot(slot).is_none() {
            return Err(format!("unknown slot `{slot}`"));
        }
    }
    if e.request_slots.iter().any(|s| informs.contains(s)) {
        return Err("inform and request slots overlap".into());
    }
    let mut covered: BTreeSet<&String> = BTreeSet::new();
    for cap in placeholder_re().captures_iter(&e.template) {
        let name = cap.get(1).unwrap().as_str();
        let Some(slot) = e.inform_slots.iter().find(|s| *s == name) else {
            return Err(format!("placeholder `${name}$` is not an inform slot of the key"));
        };
        covered.insert(slot);
    }
    for slot in e.when.keys() {
        if !informs.contains(slot) {
            return Err(format!("pinned slot `{slot}` is not an inform slot of the key"));
        }
        covered.insert(slot);
    }
    if let Some(missing) = e.inform_slots.iter().find(|s| !covered.contains(s)) {
        return Err(format!("inform slot `{missing}` has neither a placeholder nor a pinned value"));
    }
    let stripped = placeholder_re().replace_all(&e.template, "");
    if stripped.contains('$') {
        return Err("stray `$` in template".into());
    }
    Ok(())
}

fn compile(template: &str) -> Compiled {
    let body = strip_end(template);
    let mut pattern = String::from("(?i)^");
    let mut captures = Vec::new();
    let mut literal_len = 0;
    let mut last = 0;
    for cap in placeholder_re().captures_iter(body) {
        let m = cap.get(0).unwrap();
        let lit = &body[last..m.start()];
        literal_len += lit.len();
        pattern.push_str(&regex::escape(lit));
        pattern.push_str("(.+?)");
        captures.push(cap[1].to_string());
        last = m.end();
    }
    literal_len += body.len() - last;
    pattern.push_str(&regex::escape(&body[last..]));
    pattern.push('$');
    Compiled {
        pattern: Regex::new(&pattern).expect("escaped template compiles"),
        captures,
        literal_len,
    }
}

fn fill(template: &str, values: &SlotValues) -> Result<String> {
    let mut missing = None;
    let out = placeholder_re().replace_all(template, |cap: &regex::Captures| {
        match values.get(&cap[1]) {
            Some(v) => v.replace('$', ""),
            None => {
                missing = Some(cap[1].to_string());
                String::new()
            }
        }
    });
    match missing {
        Some(slot) => Err(Error::Template(format!("no value for placeholder `${slot}$`"))),
        None => Ok(out.into_owned()),
    }
}

/// `"{intent phrase}: slot is value; ...; which slot."` with slots in
/// registry order.
pub fn fallback(act: &DialogAct, schema: &DomainSchema) -> String {
    let phrase = act.intent.replace('_', " ");
    let mut clauses = Vec::new();
    for slot in schema.slot_names() {
        if let Some(v) = act.inform_slots.get(slot) {
            clauses.push(format!("{slot} is {}", v.replace('$', "")));
        }
    }
    for slot in schema.slot_names() {
        if act.request_slots.contains_key(slot) {
            clauses.push(format!("which {slot}"));
        }
    }
    if clauses.is_empty() {
        format!("{phrase}.")
    } else {
        format!("{phrase}: {}.", clauses.join("; "))
    }
}

/// The intent named by a fallback composition's leading phrase, if any.
pub fn fallback_intent(utterance: &str, schema: &DomainSchema) -> Option<String> {
    let text = strip_end(utterance);
    let head = text.split(':').next()?.trim().replace(' ', "_");
    schema.has_intent(&head).then_some(head)
}

fn phrase(slot: &str) -> String {
    match slot {
        "moviename" => "movie".into(),
        "starttime" => "start time".into(),
        "numberofpeople" => "number of people".into(),
        "numberofkids" => "number of kids".into(),
        "distanceconstraints" => "distance".into(),
        "theater_chain" => "theater chain".into(),
        "movie_series" => "movie series".into(),
        other => other.replace('_', " "),
    }
}

fn entry(speaker: Speaker, intent: &str, informs: &[&str], requests: &[&str], template: &str) -> TemplateEntry {
    TemplateEntry {
        speaker,
        intent: intent.into(),
        inform_slots: informs.iter().map(|s| s.to_string()).collect(),
        request_slots: requests.iter().map(|s| s.to_string()).collect(),
        template: template.into(),
        when: SlotValues::new(),
    }
}

fn pinned(mut e: TemplateEntry, slot: &str, value: &str) -> TemplateEntry {
    e.when.insert(slot.into(), value.into());
    e
}

fn builtin_entries(schema: &DomainSchema) -> Vec<TemplateEntry> {
    use Speaker::{Agent, User};
    let mut out = vec![
        entry(User, "request", &["city", "moviename"], &["ticket"], "Can I buy tickets for $moviename$ at $city$?"),
        entry(User, "request", &["moviename", "starttime"], &["theater"], "Which theater will play the $moviename$ at $starttime$?"),
        entry(User, "request", &["moviename"], &["ticket"], "Can I get some tickets for $moviename$?"),
        entry(User, "request", &["moviename"], &["starttime"], "What is the start time for $moviename$?"),
        entry(User, "request", &["moviename"], &["theater"], "Which theater is playing $moviename$?"),
        entry(User, "request", &["date", "moviename"], &["ticket"], "Can I get tickets for $moviename$ $date$?"),
        entry(User, "request", &["moviename", "numberofpeople"], &["theater"], "Which theater can I book $numberofpeople$ tickets for $moviename$?"),
        entry(User, "request", &[], &["ticket"], "Could you help me to book the tickets?"),
        entry(User, "thanks", &[], &[], "Thank you"),
        entry(User, "closing", &[], &[], "Bye."),
        entry(User, "deny", &[], &[], "Sorry, that does not work for me."),
        entry(User, "deny", &[], &["ticket"], "That is not what I asked for, can you book the right tickets?"),
        entry(User, "inform", &["moviename"], &[], "I want to watch $moviename$."),
        entry(User, "inform", &["starttime"], &[], "I want to watch at $starttime$."),
        entry(User, "inform", &["city"], &[], "I want to watch at $city$."),
        entry(User, "inform", &["theater"], &[], "I want to watch at $theater$."),
        entry(User, "inform", &["state"], &[], "I need tickets at $state$."),
        entry(User, "inform", &["date"], &[], "I want to set it up $date$"),
        entry(User, "inform", &["numberofpeople"], &[], "I want $numberofpeople$ tickets please!"),
        entry(Agent, "request", &[], &["city"], "Which city do you want to buy the ticket?"),
        entry(Agent, "request", &[], &["theater"], "Which theater do you want?"),
        entry(Agent, "request", &[], &["date"], "What date would you like?"),
        entry(Agent, "request", &[], &["starttime"], "And what start time do you like?"),
        entry(Agent, "request", &[], &["numberofpeople"], "How many tickets do you need?"),
        entry(Agent, "request", &[], &["moviename"], "What movie are you interested in?"),
        pinned(entry(Agent, "inform", &[TASKCOMPLETE], &[], "Okay, your tickets were booked."), TASKCOMPLETE, TASKCOMPLETE_OK),
        pinned(entry(Agent, "inform", &[TASKCOMPLETE], &[], "Sorry, no ticket is available."), TASKCOMPLETE, NO_TICKET_AVAILABLE),
        entry(Agent, "thanks", &[], &[], "thanks"),
        entry(Agent, "closing", &[], &[], "Goodbye."),
        entry(Agent, "greeting", &[], &[], "Hello, how can I help you?"),
    ];
    for slot in schema.slot_names() {
        let p = phrase(slot);
        let informable = schema.is_informable(slot) && !is_pseudo_slot(slot);
        if informable {
            if !out.iter().any(|e| e.speaker == User && e.intent == "inform" && e.inform_slots == [slot]) {
                out.push(entry(User, "inform", &[slot], &[], &format!("I want the {p} to be ${slot}$.")));
            }
            out.push(pinned(
                entry(User, "inform", &[slot], &[], &format!("I do not care about the {p}.")),
                slot,
                ANYTHING,
            ));
            out.push(pinned(
                entry(Agent, "inform", &[slot], &[], &format!("Sorry, no {p} is available.")),
                slot,
                NO_MATCH,
            ));
            out.push(entry(Agent, "inform", &[slot], &[], &format!("${slot}$ is available.")));
            out.push(entry(Agent, "multiple_choice", &[slot], &[], &format!("Which {p} do you prefer: ${slot}$?")));
        }
        if schema.is_requestable(slot) {
            if !out.iter().any(|e| e.speaker == Agent && e.intent == "request" && e.request_slots == [slot]) {
                out.push(entry(Agent, "request", &[], &[slot], &format!("What {p} would you like?")));
            }
            if slot != schema.default_request_slot()
                && !out.iter().any(|e| e.speaker == User && e.intent == "request" && e.inform_slots.is_empty() && e.request_slots == [slot])
            {
                out.push(entry(User, "request", &[], &[slot], &format!("Which {p} is available?")));
            }
        }
    }
    out.retain(|e| validate_entry(e, schema).is_ok());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> (TemplateSet, DomainSchema) {
        let schema = DomainSchema::movie_default();
        (TemplateSet::builtin(&schema), schema)
    }

    #[test]
    fn renders_transcript_lines() {
        let (t, schema) = set();
        let act = DialogAct::user("inform").inform("starttime", "9:00 pm");
        assert_eq!(t.render(&act, &schema).unwrap(), "I want to watch at 9:00 pm.");
        assert_eq!(t.render(&DialogAct::agent("thanks"), &schema).unwrap(), "thanks");
        let done = DialogAct::agent("inform").inform(TASKCOMPLETE, TASKCOMPLETE_OK);
        assert_eq!(t.render(&done, &schema).unwrap(), "Okay, your tickets were booked.");
        let none = DialogAct::agent("inform").inform(TASKCOMPLETE, NO_TICKET_AVAILABLE);
        assert_eq!(t.render(&none, &schema).unwrap(), "Sorry, no ticket is available.");
    }

    #[test]
    fn parses_agent_request() {
        let (t, _) = set();
        let act = t
            .parse_nl("Which city do you want to buy the ticket?", None)
            .unwrap();
        assert_eq!(act, DialogAct::agent("request").request("city"));
        assert!(t.parse_nl("", None).is_none());
        assert!(t.parse_nl("   ", Some(Speaker::Agent)).is_none());
        assert!(t.parse_nl("colorless green ideas", None).is_none());
    }

    #[test]
    fn lexicon_breaks_ties() {
        let (t, schema) = set();
        let mut vocab = Vocabulary::default();
        vocab.add("city", "seattle".into());
        vocab.add("theater", "regal meridian 16".into());
        let t = t.with_lexicon(Arc::new(vocab));
        let act = t.parse_nl("I want to watch at seattle.", Some(Speaker::User)).unwrap();
        assert_eq!(act.inform_slots["city"], "seattle");
        let act = t
            .parse_nl("I want to watch at regal meridian 16.", Some(Speaker::User))
            .unwrap();
        assert_eq!(act.inform_slots["theater"], "regal meridian 16");
        let _ = schema;
    }

    #[test]
    fn fallback_shape() {
        let (t, schema) = set();
        let act = DialogAct::user("inform")
            .inform("city", "seattle")
            .inform("date", "today")
            .request("theater");
        let s = t.render(&act, &schema).unwrap();
        assert_eq!(s, "inform: city is seattle; date is today; which theater.");
        assert_eq!(fallback_intent(&s, &schema).as_deref(), Some("inform"));
        assert_eq!(fallback(&DialogAct::user("not_sure"), &schema), "not sure.");
        assert_eq!(fallback_intent("not sure.", &schema).as_deref(), Some("not_sure"));
    }

    #[test]
    fn rejects_bad_entries() {
        let schema = DomainSchema::movie_default();
        let bad = r#"[{"speaker":"user","intent":"inform","inform_slots":["city"],"template":"at $town$"}]"#;
        assert!(TemplateSet::from_json(bad, &schema).is_err());
        let uncovered = r#"[{"speaker":"user","intent":"inform","inform_slots":["city"],"template":"somewhere"}]"#;
        assert!(TemplateSet::from_json(uncovered, &schema).is_err());
        let ok = r#"[{"speaker":"user","intent":"inform","inform_slots":["city"],"template":"at $city$"}]"#;
        assert_eq!(TemplateSet::from_json(ok, &schema).unwrap().len(), 1);
    }

    #[test]
    fn missing_value_errors() {
        let schema = DomainSchema::movie_default();
        let t = TemplateSet::from_json(
            r#"[{"speaker":"user","intent":"inform","inform_slots":["city"],"template":"at $city$"}]"#,
            &schema,
        )
        .unwrap();
        assert!(fill("at $city$", &SlotValues::new()).is_err());
        assert!(t.render(&DialogAct::user("inform").inform("city", "x"), &schema).is_ok());
    }
}
