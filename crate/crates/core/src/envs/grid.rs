//! Shared grid engine for the scripted simulators.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ScriptedPolicy, TraceSample};
use crate::domain::{ActionId, ConcreteAgentState, Domain, JointAction};

pub(super) type Cell = (i32, i32);

const STEPS: [(i32, i32); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

pub(super) fn manhattan(a: Cell, b: Cell) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

/// A map item. Objects block their cell while alive and are sensed from the
/// four neighbouring cells.
pub(super) struct Object {
    pub pos: Cell,
    pub alive: bool,
    /// `(tag, level)`: the tag is observed by agents whose level is below
    /// `level`, or by everyone when `level` is `None`.
    pub observe: Vec<(String, Option<u32>)>,
}

#[derive(Default)]
pub(super) struct Effect {
    pub remove: bool,
    pub hold: Option<String>,
    pub release: Option<String>,
    pub complete: Option<String>,
}

pub(super) struct Job {
    pub object: usize,
    pub action: ActionId,
    pub team: Vec<usize>,
    pub effect: Effect,
    pub premature: bool,
}

pub(super) struct AgentState {
    pub pos: Cell,
    pub level: u32,
    pub queue: VecDeque<usize>,
    pub holds: BTreeSet<String>,
    pub completed: BTreeSet<String>,
}

impl AgentState {
    pub fn new(pos: Cell, queue: impl IntoIterator<Item = usize>) -> Self {
        AgentState {
            pos,
            level: 1,
            queue: queue.into_iter().collect(),
            holds: BTreeSet::new(),
            completed: BTreeSet::new(),
        }
    }
}

pub(super) struct World {
    pub rows: i32,
    pub cols: i32,
    pub walls: HashSet<Cell>,
    pub objects: Vec<Object>,
    pub jobs: Vec<Job>,
    pub agents: Vec<AgentState>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Decision {
    Move(Cell),
    Wait,
    Act(usize),
}

impl World {
    fn passable(&self, c: Cell) -> bool {
        c.0 >= 0
            && c.1 >= 0
            && c.0 < self.rows
            && c.1 < self.cols
            && !self.walls.contains(&c)
            && !self.objects.iter().any(|o| o.alive && o.pos == c)
    }

    fn neighbours(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        STEPS
            .iter()
            .map(move |d| (c.0 + d.0, c.1 + d.1))
            .filter(|&n| self.passable(n))
    }

    /// Distance from every reachable cell to the nearest cell next to `object`.
    fn distances(&self, object: usize) -> HashMap<Cell, u32> {
        let mut dist = HashMap::new();
        let mut queue = VecDeque::new();
        for c in self.neighbours(self.objects[object].pos) {
            dist.insert(c, 0);
            queue.push_back(c);
        }
        while let Some(c) = queue.pop_front() {
            let d = dist[&c];
            for n in self.neighbours(c) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(n) {
                    e.insert(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    fn observe(&self) -> Vec<ConcreteAgentState> {
        self.agents
            .iter()
            .map(|a| {
                let observes = self
                    .objects
                    .iter()
                    .filter(|o| o.alive && manhattan(o.pos, a.pos) == 1)
                    .flat_map(|o| o.observe.iter())
                    .filter(|(_, level)| level.is_none_or(|l| l > a.level))
                    .map(|(tag, _)| tag.clone())
                    .collect();
                ConcreteAgentState {
                    pos: [a.pos.0, a.pos.1],
                    observes,
                    holds: a.holds.clone(),
                    completed: a.completed.clone(),
                }
            })
            .collect()
    }

    fn done(&self) -> bool {
        self.agents.iter().all(|a| a.queue.is_empty())
    }

    fn decide(&self, policy: &ScriptedPolicy, rng: &mut ChaCha8Rng) -> Vec<Decision> {
        let mut cache: HashMap<usize, HashMap<Cell, u32>> = HashMap::new();
        for a in &self.agents {
            if let Some(&j) = a.queue.front() {
                cache.entry(self.jobs[j].object).or_insert_with(|| self.distances(self.jobs[j].object));
            }
        }
        let in_place = |m: usize, j: usize| {
            self.agents[m].queue.front() == Some(&j)
                && cache[&self.jobs[j].object].get(&self.agents[m].pos) == Some(&0)
        };

        let mut out = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.iter().enumerate() {
            let Some(&j) = a.queue.front() else {
                out.push(Decision::Wait);
                continue;
            };
            let job = &self.jobs[j];
            let dist = &cache[&job.object];
            let decision = match dist.get(&a.pos).copied() {
                None => Decision::Wait,
                Some(0) => {
                    if job.team.iter().all(|&m| in_place(m, j)) {
                        Decision::Act(j)
                    } else {
                        let r: f64 = rng.random();
                        if r < policy.eager {
                            Decision::Act(j)
                        } else if r < policy.eager + policy.restless {
                            let options: Vec<Cell> = self.neighbours(a.pos).collect();
                            if options.is_empty() {
                                Decision::Wait
                            } else {
                                Decision::Move(options[rng.random_range(0..options.len())])
                            }
                        } else {
                            Decision::Wait
                        }
                    }
                }
                Some(d) => {
                    let others_ready = job.team.iter().filter(|&&m| m != i).all(|&m| in_place(m, j));
                    if d == 1 && job.premature && others_ready && rng.random::<f64>() < policy.premature {
                        Decision::Act(j)
                    } else if rng.random::<f64>() < policy.hesitation {
                        Decision::Wait
                    } else {
                        let options: Vec<Cell> =
                            self.neighbours(a.pos).filter(|n| dist.get(n) == Some(&(d - 1))).collect();
                        Decision::Move(options[rng.random_range(0..options.len())])
                    }
                }
            };
            out.push(decision);
        }
        out
    }

    fn apply(&mut self, decisions: &[Decision]) {
        let mut finished = Vec::new();
        for (j, job) in self.jobs.iter().enumerate() {
            let dist = self.distances(job.object);
            let all = job.team.iter().all(|&m| {
                decisions[m] == Decision::Act(j)
                    && self.agents[m].queue.front() == Some(&j)
                    && dist.get(&self.agents[m].pos) == Some(&0)
            });
            if all {
                finished.push(j);
            }
        }
        for (agent, d) in self.agents.iter_mut().zip(decisions) {
            if let Decision::Move(c) = d {
                agent.pos = *c;
            }
        }
        for j in finished {
            let job = &self.jobs[j];
            if job.effect.remove {
                self.objects[job.object].alive = false;
            }
            for &m in &job.team {
                let a = &mut self.agents[m];
                a.queue.pop_front();
                if let Some(t) = &job.effect.release {
                    a.holds.remove(t);
                }
                if let Some(t) = &job.effect.hold {
                    a.holds.insert(t.clone());
                }
                if let Some(t) = &job.effect.complete {
                    a.completed.insert(t.clone());
                }
            }
        }
    }

    pub fn run(
        &mut self,
        domain: &Domain,
        policy: &ScriptedPolicy,
        max_steps: u64,
        episode: u64,
        rng: &mut ChaCha8Rng,
    ) -> Vec<TraceSample> {
        let move_id = domain.action_by_name("move").expect("grid domains define move");
        let wait_id = domain.action_by_name("wait").expect("grid domains define wait");
        let mut samples = Vec::new();
        let mut state = self.observe();
        for step in 0..max_steps {
            if self.done() {
                break;
            }
            let decisions = self.decide(policy, rng);
            let action = JointAction::new(
                decisions
                    .iter()
                    .map(|d| match d {
                        Decision::Move(_) => move_id,
                        Decision::Wait => wait_id,
                        Decision::Act(j) => self.jobs[*j].action,
                    })
                    .collect(),
            );
            self.apply(&decisions);
            let next = self.observe();
            samples.push(TraceSample {
                episode,
                step,
                state,
                action,
                next: next.clone(),
            });
            state = next;
        }
        samples
    }
}
