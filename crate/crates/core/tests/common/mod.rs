#![allow(dead_code)]

use std::sync::Arc;

use dialsim::synth::{movie_domain, tiny_domain, MovieDomain, SynthOptions, TinyDomain};
use dialsim::{ActLevel, Environment, ErrorModelConfig, GoalDatabase, KnowledgeBase, TemplateSet, UserSimulator, Vocabulary};

pub fn movie() -> MovieDomain {
    movie_domain(SynthOptions {
        seed: 0,
        kb_records: 1000,
        dialogues: 280,
    })
    .unwrap()
}

pub fn tiny() -> TinyDomain {
    tiny_domain(0).unwrap()
}

pub fn templates_for(kb: &KnowledgeBase, goals: &GoalDatabase, base: &TemplateSet) -> Arc<TemplateSet> {
    let lexicon = Arc::new(Vocabulary::from_kb_and_goals(kb, goals));
    Arc::new(base.clone().with_lexicon(lexicon))
}

pub fn env_with(kb: &Arc<KnowledgeBase>, goals: GoalDatabase, level: ActLevel, noise: ErrorModelConfig) -> Environment {
    let base = TemplateSet::builtin(kb.schema());
    let templates = templates_for(kb, &goals, &base);
    let sim = UserSimulator::new(kb.clone(), Arc::new(goals)).with_noise(noise).unwrap();
    Environment::new(sim)
        .with_templates(templates)
        .with_act_level(level)
        .unwrap()
}

pub fn tiny_env(level: ActLevel) -> (TinyDomain, Environment) {
    let t = tiny();
    let env = env_with(&t.kb, t.goals.clone(), level, ErrorModelConfig::off());
    (t, env)
}
