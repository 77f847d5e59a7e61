//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use dialsim::rl::Experience;
use dialsim::rng::episode_rng;
use dialsim::synth::{movie_domain, MovieDomain, SynthOptions};
use dialsim::{DialogState, Environment, RuleAgentKind, TemplateSet, UserSimulator, Vocabulary};

pub struct Fixture {
    pub domain: MovieDomain,
    pub env: Environment,
    /// States visited by the request-basics agent over a few dialogues.
    pub states: Vec<DialogState>,
}

pub fn fixture() -> Fixture {
    let domain = movie_domain(SynthOptions::default()).expect("synthetic domain");
    let goals = Arc::new(domain.goals.clone());
    let lexicon = Arc::new(Vocabulary::from_kb_and_goals(&domain.kb, &goals));
    let templates = Arc::new(TemplateSet::builtin(&domain.schema).with_lexicon(lexicon));
    let env = Environment::new(UserSimulator::new(domain.kb.clone(), goals)).with_templates(templates);

    let mut states = Vec::new();
    let mut agent = RuleAgentKind::RequestBasics.build(&domain.schema, 0);
    for i in 0..8 {
        let mut rng = episode_rng(0, i);
        let outcome = env.run_episode(&mut agent, &mut rng).expect("episode");
        let mut tracker = env.tracker();
        for act in &outcome.transcript {
            let done = match act.speaker {
                dialsim::Speaker::User => tracker.update_user(act).is_err(),
                dialsim::Speaker::Agent => tracker.update_agent(act).is_err(),
            };
            if done {
                break;
            }
            states.push(tracker.state().clone());
        }
    }
    Fixture { domain, env, states }
}

/// A replay batch drawn from featurized fixture states.
pub fn batch(fx: &Fixture, size: usize, actions: usize) -> Vec<Experience> {
    let max_turn = fx.env.max_turn();
    let kb_len = fx.domain.kb.len();
    let xs: Vec<Vec<f64>> = fx
        .states
        .iter()
        .map(|s| dialsim::featurize(s, &fx.domain.schema, max_turn, kb_len))
        .collect();
    (0..size)
        .map(|i| Experience {
            s: xs[i % xs.len()].clone(),
            a: i % actions,
            r: -1.0,
            s_next: xs[(i + 1) % xs.len()].clone(),
            done: i % 7 == 0,
        })
        .collect()
}
