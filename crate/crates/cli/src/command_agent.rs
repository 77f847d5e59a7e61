//! The command line agent: a person types each agent turn.

use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

use dialsim::dst::DialogState;
use dialsim::session::InputMode;
use dialsim::{Agent, AgentResponse, DialogAct, DomainSchema, Error, KnowledgeBase, Result, Speaker, TemplateSet};

pub type SharedOut = Arc<Mutex<Box<dyn Write + Send>>>;

pub fn emit(out: &SharedOut, line: &str) {
    let mut w = out.lock().expect("output lock");
    let _ = writeln!(w, "{line}");
    let _ = w.flush();
}

/// `(Suggested Values: {'theater': ['carmike summit 16']})`
pub fn format_suggestions(pairs: &[(String, Vec<String>)]) -> String {
    let body: Vec<String> = pairs
        .iter()
        .map(|(slot, values)| {
            let vs: Vec<String> = values.iter().map(|v| format!("'{v}'")).collect();
            format!("'{slot}': [{}]", vs.join(", "))
        })
        .collect();
    format!("(Suggested Values: {{{}}})", body.join(", "))
}

pub fn suggestions_for(kb: &KnowledgeBase, state: &DialogState, act: &DialogAct) -> Vec<(String, Vec<String>)> {
    let schema = kb.schema();
    act.request_slots
        .keys()
        .filter(|s| s.as_str() != schema.default_request_slot())
        .filter_map(|s| {
            kb.suggest_values(s, &state.user_constraints)
                .ok()
                .map(|v| (s.clone(), v))
        })
        .collect()
}

pub struct CommandAgent {
    input: Box<dyn BufRead + Send>,
    out: SharedOut,
    mode: InputMode,
    kb: Arc<KnowledgeBase>,
    templates: Arc<TemplateSet>,
    /// Print user turns as text (true) or acts.
    show_nl: bool,
    /// Repeat the typed line, for piped input.
    echo: bool,
    initialized: bool,
}

impl CommandAgent {
    pub fn new(
        input: Box<dyn BufRead + Send>,
        out: SharedOut,
        mode: InputMode,
        kb: Arc<KnowledgeBase>,
        templates: Arc<TemplateSet>,
        show_nl: bool,
        echo: bool,
    ) -> Self {
        Self {
            input,
            out,
            mode,
            kb,
            templates,
            show_nl,
            echo,
            initialized: false,
        }
    }

    fn schema(&self) -> &DomainSchema {
        self.kb.schema()
    }

    fn parse(&self, line: &str) -> Result<DialogAct> {
        match self.mode {
            InputMode::Act => {
                let mut act: DialogAct = line.parse()?;
                act.speaker = Speaker::Agent;
                Ok(act)
            }
            InputMode::Nl => {
                let mut act = self
                    .templates
                    .parse_nl(line, Some(Speaker::Agent))
                    .ok_or_else(|| Error::Unparsed(line.to_string()))?;
                act.nl = Some(line.to_string());
                Ok(act)
            }
        }
    }
}

pub fn user_line(act: &DialogAct, templates: &TemplateSet, schema: &DomainSchema, show_nl: bool) -> String {
    let body = if show_nl {
        act.nl
            .clone()
            .or_else(|| templates.render(act, schema).ok())
            .unwrap_or_else(|| act.to_string())
    } else {
        act.to_string()
    };
    format!("Turn {} usr: {body}", act.turn)
}

impl Agent for CommandAgent {
    fn initialize_episode(&mut self) {
        self.initialized = true;
    }

    fn state_to_action(&mut self, state: &DialogState) -> Result<AgentResponse> {
        if !self.initialized {
            return Err(Error::AgentNotInitialized);
        }
        if let Some(user) = &state.last_user_act {
            emit(&self.out, &user_line(user, &self.templates, self.schema(), self.show_nl));
            let pairs = suggestions_for(&self.kb, state, user);
            if !pairs.is_empty() {
                emit(&self.out, &format_suggestions(&pairs));
            }
        }
        let turn = state.turn + 1;
        loop {
            {
                let mut w = self.out.lock().expect("output lock");
                let _ = write!(w, "Turn {turn} sys: ");
                let _ = w.flush();
            }
            let mut line = String::new();
            let n = self
                .input
                .read_line(&mut line)
                .map_err(|e| Error::AgentExhausted(format!("reading input: {e}")))?;
            if n == 0 {
                emit(&self.out, "");
                return Err(Error::AgentExhausted("input closed".into()));
            }
            let line = line.trim();
            if self.echo {
                emit(&self.out, line);
            }
            if line.is_empty() {
                continue;
            }
            match self.parse(line) {
                Ok(act) => {
                    let act = act.at_turn(turn);
                    let errors = dialsim::validate_act(self.schema(), &act);
                    if errors.is_empty() {
                        return Ok(AgentResponse::new(act));
                    }
                    emit(&self.out, &format!("invalid act: {errors:?}"));
                }
                Err(e) => {
                    let hint = match self.mode {
                        InputMode::Nl => "rephrase, or use dialog act input (--cmd_input_mode 1)",
                        InputMode::Act => "expected intent(slot=value;slot), e.g. request(date)",
                    };
                    emit(&self.out, &format!("{e}; {hint}"));
                }
            }
        }
    }

    fn name(&self) -> &str {
        "command"
    }
}
