#![allow(dead_code)]

use marlx_core::abstraction::{build_abstraction, BuildOptions, Normalization};
use marlx_core::domain::file::DomainFile;
use marlx_core::domain::{AbstractJointState, Domain, JointAction};
use marlx_core::envs::{domain_by_id, simulate, ScriptedPolicy, TraceSample};
use marlx_core::PolicyAbstraction;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SR3_EPISODES: u64 = 300;
pub const MAX_STEPS: u64 = 200;

pub fn samples(id: &str, episodes: u64) -> Vec<TraceSample> {
    simulate(id, &ScriptedPolicy::default(), MAX_STEPS, episodes).unwrap().collect()
}

pub fn abstraction(id: &str, episodes: u64) -> (Domain, PolicyAbstraction) {
    let d = domain_by_id(id).unwrap();
    let m = build_abstraction(samples(id, episodes), d.schema(), BuildOptions::default()).unwrap();
    (d, m)
}

/// Two agents, three features, the first of which completes the only task.
pub const TOY_DOMAIN: &str = r#"
id = "toy"
description = "random abstractions"
objects = ["t", "x", "y"]
task_completion = ["done"]

[[agents]]
name = "P"
actions = ["a", "b"]

[[agents]]
name = "Q"
actions = ["a", "b"]

[[actions]]
id = "a"
base = "do a"
third_person = "does a"

[[actions]]
id = "b"
base = "do b"
third_person = "does b"

[[predicates]]
id = "done"
positive = "is done"
negative = "is not done"
completed = "t"
label = "task"

[[predicates]]
id = "x"
positive = "sees x"
negative = "does not see x"
observes = "x"

[[predicates]]
id = "y"
positive = "sees y"
negative = "does not see y"
observes = "y"
"#;

pub fn toy_domain() -> Domain {
    DomainFile::parse(TOY_DOMAIN).unwrap().into_domain().unwrap()
}

pub fn split(bits: u32) -> AbstractJointState {
    AbstractJointState::from_bits(&[bits & 7, bits >> 3])
}

pub fn is_goal_bits(bits: u32) -> bool {
    bits & 1 == 1 || bits >> 3 & 1 == 1
}

pub type Row = (u32, usize, u32, u64);

/// Random transition rows over at most `max_states` of the 64 toy states,
/// starting from a non-goal state. Each state gets 1-4 joint actions with
/// 1-3 successors each; goal states are sinks half of the time.
pub fn random_rows(seed: u64, max_states: usize) -> (u32, Vec<Row>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<u32> = (0..64).collect();
    let n = rng.random_range(2..=max_states.min(64));
    let mut chosen: Vec<u32> = all.choose_multiple(&mut rng, n).copied().collect();
    if chosen.iter().all(|&b| is_goal_bits(b)) {
        chosen.push(0);
    }
    let init = *chosen.iter().find(|&&b| !is_goal_bits(b)).unwrap();
    let mut rows = Vec::new();
    for &s in &chosen {
        if is_goal_bits(s) && rng.random_bool(0.5) {
            continue;
        }
        let mut actions: Vec<usize> = (0..4).collect();
        let k = rng.random_range(1..=4);
        actions.truncate(k);
        for a in actions {
            for _ in 0..rng.random_range(1..=3) {
                let t = *chosen.choose(&mut rng).unwrap();
                rows.push((s, a, t, rng.random_range(1..=9)));
            }
        }
    }
    (init, rows)
}

pub fn toy_joint(d: &Domain, a: usize) -> JointAction {
    let names = ["a", "b"];
    d.joint_action(&[names[a & 1], names[a >> 1]]).unwrap()
}

pub fn toy_abstraction(d: &Domain, init: u32, rows: &[Row]) -> PolicyAbstraction {
    PolicyAbstraction::from_counts(
        d.schema(),
        rows.iter().map(|&(s, a, t, c)| (split(s), toy_joint(d, a), split(t), c)),
        split(init),
        Normalization::StateVisits,
    )
    .unwrap()
}
