//! Grid-world simulators with scripted stand-in policies.
//!
//! Three families share one engine: search-and-rescue (`sr3`, `sr4`, `sr5`),
//! a warehouse-lite delivery task (`rware2`, `rware4`, `rware19`) and a
//! foraging-lite task (`lbf2`, `lbf4`, `lbf9`). Every task is completed by a
//! designated team; all team members gain the completion flag at the same step.

mod grid;
mod lbf;
mod rware;
mod sr;
mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::file::{ActionDef, AgentDef, PredicateDef, RelevanceDef};
use crate::domain::Domain;
use crate::error::{Error, Result};

pub use lbf::lbf_domain;
pub use rware::rware_domain;
pub use sr::sr_domain;
pub use trace::{read_trace, write_trace, TraceHeader, TraceReader, TraceSample, TraceWriter};

pub const DOMAIN_IDS: [&str; 9] = [
    "sr3", "sr4", "sr5", "rware2", "rware4", "rware19", "lbf2", "lbf4", "lbf9",
];

pub fn domain_by_id(id: &str) -> Result<Domain> {
    let (family, n) = split_id(id)?;
    match family {
        "sr" => sr_domain(n),
        "rware" => rware_domain(n),
        "lbf" => lbf_domain(n),
        _ => unreachable!(),
    }
}

/// Splits `sr3` into `("sr", 3)`. Any agent count the family supports is
/// accepted, not only the ones listed in [`DOMAIN_IDS`].
fn split_id(id: &str) -> Result<(&str, usize)> {
    let unknown = || Error::UnknownDomain(id.to_string());
    let at = id.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
    let n = id[at..].parse().map_err(|_| unknown())?;
    match &id[..at] {
        family @ ("sr" | "rware" | "lbf") => Ok((family, n)),
        _ => Err(unknown()),
    }
}

fn action_def(id: &str, base: &str, third_person: &str) -> ActionDef {
    ActionDef {
        id: id.into(),
        base: base.into(),
        third_person: third_person.into(),
    }
}

enum Test {
    Observes,
    Holds,
    Completed,
}

fn predicate_def(id: &str, positive: &str, negative: &str, test: Test, tag: &str, label: Option<&str>) -> PredicateDef {
    let tag = Some(tag.to_string());
    let (observes, holds, completed) = match test {
        Test::Observes => (tag, None, None),
        Test::Holds => (None, tag, None),
        Test::Completed => (None, None, tag),
    };
    PredicateDef {
        id: id.into(),
        positive: positive.into(),
        negative: negative.into(),
        observes,
        holds,
        completed,
        label: label.map(str::to_string),
    }
}

fn agent_def(name: &str, kind: &str, actions: &[&str]) -> AgentDef {
    AgentDef {
        name: name.into(),
        kind: (name != kind).then(|| kind.to_string()),
        actions: actions.iter().map(|a| a.to_string()).collect(),
    }
}

fn relevance_def(agent: &str, action: &str, features: &[&str], action_sets: Vec<Vec<String>>) -> RelevanceDef {
    RelevanceDef {
        agent: agent.into(),
        action: action.into(),
        features: features.iter().map(|f| f.to_string()).collect(),
        action_sets,
        agents: None,
    }
}

/// Relevance entries for a task that every member of `team` must perform together.
fn team_relevance(team: &[String], action: &str, features: &[&str]) -> Vec<RelevanceDef> {
    let set: Vec<String> = team.iter().map(|m| format!("{m}:{action}")).collect();
    team.iter()
        .map(|m| relevance_def(m, action, features, vec![set.clone()]))
        .collect()
}

/// Tuning knobs of the scripted agents.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedPolicy {
    pub seed: u64,
    /// Chance of waiting instead of stepping toward the current target.
    pub hesitation: f64,
    /// While waiting next to a target for teammates: chance of trying the task
    /// action alone.
    pub eager: f64,
    /// While waiting next to a target: chance of stepping to a random neighbour.
    pub restless: f64,
    /// Chance of trying the task action one step short of the target when
    /// every teammate is already in place.
    pub premature: f64,
    /// SR only: chance that the last UGV, rather than a random other one, is
    /// the rescue partner.
    pub partner_bias: f64,
}

impl ScriptedPolicy {
    pub fn new(seed: u64) -> Self {
        ScriptedPolicy {
            seed,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<()> {
        let probs = [self.hesitation, self.eager, self.restless, self.premature, self.partner_bias];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || self.eager + self.restless > 1.0 {
            return Err(Error::Precondition("scripted policy probabilities out of range".into()));
        }
        Ok(())
    }
}

impl Default for ScriptedPolicy {
    fn default() -> Self {
        ScriptedPolicy {
            seed: 42,
            hesitation: 0.1,
            eager: 0.5,
            restless: 0.3,
            premature: 0.3,
            partner_bias: 0.7,
        }
    }
}

/// Lazily simulates episodes one after another.
pub struct Simulation {
    domain: Domain,
    policy: ScriptedPolicy,
    max_steps: u64,
    episodes: u64,
    next_episode: u64,
    buffer: std::vec::IntoIter<TraceSample>,
}

impl Simulation {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

impl Iterator for Simulation {
    type Item = TraceSample;

    fn next(&mut self) -> Option<TraceSample> {
        loop {
            if let Some(s) = self.buffer.next() {
                return Some(s);
            }
            if self.next_episode >= self.episodes {
                return None;
            }
            let episode = self.next_episode;
            self.next_episode += 1;
            self.buffer = run_episode(&self.domain, &self.policy, self.max_steps, episode)
                .expect("domain checked when the simulation was created")
                .into_iter();
        }
    }
}

/// Simulates `episodes` episodes of at most `max_steps` steps each.
///
/// Episode `e` draws from a ChaCha8 stream seeded with `policy.seed` on stream
/// `e`, so episodes are independent of each other and of evaluation order.
pub fn simulate(domain_id: &str, policy: &ScriptedPolicy, max_steps: u64, episodes: u64) -> Result<Simulation> {
    let domain = domain_by_id(domain_id)?;
    if max_steps == 0 {
        return Err(Error::Precondition("max_steps must be at least 1".into()));
    }
    if episodes == 0 {
        return Err(Error::Precondition("episodes must be at least 1".into()));
    }
    policy.check()?;
    Ok(Simulation {
        domain,
        policy: policy.clone(),
        max_steps,
        episodes,
        next_episode: 0,
        buffer: Vec::new().into_iter(),
    })
}

/// Runs a single episode of a builtin domain.
pub fn run_episode(domain: &Domain, policy: &ScriptedPolicy, max_steps: u64, episode: u64) -> Result<Vec<TraceSample>> {
    let (family, n) = split_id(&domain.id)?;
    if *domain != domain_by_id(&domain.id)? {
        return Err(Error::Precondition(format!(
            "domain `{}` differs from the builtin definition; only builtin domains can be simulated",
            domain.id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    rng.set_stream(episode);
    let mut world = match family {
        "sr" => sr::world(domain, n, policy, &mut rng),
        "rware" => rware::world(domain, n),
        "lbf" => lbf::world(domain, n),
        _ => unreachable!(),
    };
    Ok(world.run(domain, policy, max_steps, episode, &mut rng))
}
