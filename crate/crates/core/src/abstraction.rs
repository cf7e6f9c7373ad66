//! Policy abstraction: an MMDP over bit-encoded joint states whose transition
//! probabilities come from frequency counting over trace samples.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::domain::{encode_joint_state, AbstractJointState, ActionId, FeatureSchema, JointAction};
use crate::envs::TraceSample;
use crate::error::{Error, Result};
use crate::scalar::Probability;

const FILE_MAGIC: &str = "marlx-mmdp";
const FILE_VERSION: u32 = 1;

/// Denominator used when turning counts into probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    /// `count(s,a,s') / visits(s)`: path products are trajectory probabilities.
    #[default]
    StateVisits,
    /// `count(s,a,s') / count(s,a)`.
    StateAction,
}

impl Normalization {
    fn as_str(self) -> &'static str {
        match self {
            Normalization::StateVisits => "state",
            Normalization::StateAction => "state-action",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "state" => Some(Normalization::StateVisits),
            "state-action" => Some(Normalization::StateAction),
            _ => None,
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Normalization::parse(s)
            .ok_or_else(|| Error::format("normalization", format!("`{s}` (expected state or state-action)")))
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    pub normalization: Normalization,
    /// Accept episodes that start in different abstract states by adding a
    /// virtual source with the empirical start distribution.
    pub virtual_init: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<T> {
    pub from: usize,
    pub action: JointAction,
    pub to: usize,
    pub count: u64,
    pub probability: T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Initial {
    State(usize),
    /// Virtual source: `(state index, number of episodes starting there)`.
    Distribution(Vec<(usize, u64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Abstraction<T> {
    schema_fingerprint: String,
    n_agents: usize,
    n_predicates: usize,
    task_completion: Vec<usize>,
    normalization: Normalization,
    states: Vec<AbstractJointState>,
    index: HashMap<AbstractJointState, usize>,
    transitions: Vec<Transition<T>>,
    outgoing: Vec<Range<usize>>,
    visits: Vec<u64>,
    initial: Initial,
}

type Key = (AbstractJointState, JointAction, AbstractJointState);

/// Accumulates transition counts; shards built per episode can be merged.
#[derive(Clone, Debug)]
pub struct AbstractionBuilder<'a> {
    schema: &'a FeatureSchema,
    n_agents: Option<usize>,
    counts: HashMap<Key, u64>,
    starts: BTreeMap<u64, AbstractJointState>,
}

impl<'a> AbstractionBuilder<'a> {
    pub fn new(schema: &'a FeatureSchema) -> Self {
        AbstractionBuilder {
            schema,
            n_agents: None,
            counts: HashMap::new(),
            starts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, sample: &TraceSample) -> Result<()> {
        let s = encode_joint_state(&sample.state, self.schema)?;
        let next = encode_joint_state(&sample.next, self.schema)?;
        let n = *self.n_agents.get_or_insert(s.len());
        if s.len() != n || next.len() != n || sample.action.len() != n {
            return Err(Error::SchemaMismatch(format!(
                "sample at episode {} step {} has inconsistent agent count",
                sample.episode, sample.step
            )));
        }
        if sample.step == 0 {
            self.starts.insert(sample.episode, s.clone());
        }
        *self.counts.entry((s, sample.action.clone(), next)).or_default() += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: AbstractionBuilder<'_>) -> Result<()> {
        if let (Some(a), Some(b)) = (self.n_agents, other.n_agents) {
            if a != b {
                return Err(Error::SchemaMismatch("merging shards with different agent counts".into()));
            }
        }
        self.n_agents = self.n_agents.or(other.n_agents);
        for (k, c) in other.counts {
            *self.counts.entry(k).or_default() += c;
        }
        self.starts.extend(other.starts);
        Ok(())
    }

    pub fn finish<T: Probability>(self, options: BuildOptions) -> Result<Abstraction<T>> {
        if self.counts.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let distinct: BTreeSet<&AbstractJointState> = self.starts.values().collect();
        let initial = match distinct.len() {
            0 => return Err(Error::Precondition("no episode contains a step-0 sample".into())),
            1 => InitialSpec::State(self.starts.values().next().cloned().expect("non-empty")),
            count if !options.virtual_init => return Err(Error::MultipleInitialStates { count }),
            _ => {
                let mut dist: BTreeMap<AbstractJointState, u64> = BTreeMap::new();
                for s in self.starts.into_values() {
                    *dist.entry(s).or_default() += 1;
                }
                InitialSpec::Distribution(dist.into_iter().collect())
            }
        };
        Abstraction::assemble(
            self.schema.fingerprint(),
            self.schema.len(),
            self.schema.task_completion().to_vec(),
            self.counts,
            initial,
            options.normalization,
        )
    }
}

enum InitialSpec {
    State(AbstractJointState),
    Distribution(Vec<(AbstractJointState, u64)>),
}

pub fn build_abstraction<T: Probability>(
    samples: impl IntoIterator<Item = TraceSample>,
    schema: &FeatureSchema,
    options: BuildOptions,
) -> Result<Abstraction<T>> {
    let mut builder = AbstractionBuilder::new(schema);
    for s in samples {
        builder.add(&s)?;
    }
    builder.finish(options)
}

impl<T: Probability> Abstraction<T> {
    /// Builds an abstraction directly from transition counts.
    pub fn from_counts(
        schema: &FeatureSchema,
        counts: impl IntoIterator<Item = (AbstractJointState, JointAction, AbstractJointState, u64)>,
        initial: AbstractJointState,
        normalization: Normalization,
    ) -> Result<Self> {
        let mut map: HashMap<Key, u64> = HashMap::new();
        for (s, a, t, c) in counts {
            if c == 0 {
                return Err(Error::Precondition("transition counts must be positive".into()));
            }
            *map.entry((s, a, t)).or_default() += c;
        }
        Self::assemble(
            schema.fingerprint(),
            schema.len(),
            schema.task_completion().to_vec(),
            map,
            InitialSpec::State(initial),
            normalization,
        )
    }

    fn assemble(
        schema_fingerprint: String,
        n_predicates: usize,
        task_completion: Vec<usize>,
        counts: HashMap<Key, u64>,
        initial: InitialSpec,
        normalization: Normalization,
    ) -> Result<Self> {
        let mut state_set: BTreeSet<AbstractJointState> = BTreeSet::new();
        for (s, _, t) in counts.keys() {
            state_set.insert(s.clone());
            state_set.insert(t.clone());
        }
        match &initial {
            InitialSpec::State(s) => {
                state_set.insert(s.clone());
            }
            InitialSpec::Distribution(d) => state_set.extend(d.iter().map(|(s, _)| s.clone())),
        }
        let states: Vec<AbstractJointState> = state_set.into_iter().collect();
        let n_agents = states[0].len();
        if let Some(bad) = states.iter().find(|s| s.len() != n_agents) {
            return Err(Error::SchemaMismatch(format!("state {bad} has the wrong agent count")));
        }
        let limit = if n_predicates >= 32 { u64::MAX } else { 1u64 << n_predicates };
        if let Some(bad) = states
            .iter()
            .find(|s| s.agents().iter().any(|a| u64::from(a.0) >= limit))
        {
            return Err(Error::SchemaMismatch(format!(
                "state {bad} has bits beyond {n_predicates} predicates"
            )));
        }
        let index: HashMap<AbstractJointState, usize> =
            states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();

        let mut raw: Vec<(usize, JointAction, usize, u64)> = counts
            .into_iter()
            .map(|((s, a, t), c)| (index[&s], a, index[&t], c))
            .collect();
        if let Some((_, a, _, _)) = raw.iter().find(|(_, a, _, _)| a.len() != n_agents) {
            return Err(Error::SchemaMismatch(format!(
                "joint action with {} components in a {n_agents}-agent abstraction",
                a.len()
            )));
        }
        raw.sort_unstable_by(|x, y| (x.0, &x.1, x.2).cmp(&(y.0, &y.1, y.2)));

        let mut visits = vec![0u64; states.len()];
        let mut action_visits: HashMap<(usize, &JointAction), u64> = HashMap::new();
        for (s, a, _, c) in &raw {
            visits[*s] += c;
            *action_visits.entry((*s, a)).or_default() += c;
        }
        let denominators: Vec<u64> = raw
            .iter()
            .map(|(s, a, _, _)| match normalization {
                Normalization::StateVisits => visits[*s],
                Normalization::StateAction => action_visits[&(*s, a)],
            })
            .collect();
        let transitions: Vec<Transition<T>> = raw
            .into_iter()
            .zip(denominators)
            .map(|((from, action, to, count), d)| Transition {
                from,
                action,
                to,
                count,
                probability: T::ratio(count, d),
            })
            .collect();

        let mut outgoing = vec![0..0; states.len()];
        let mut start = 0;
        while start < transitions.len() {
            let from = transitions[start].from;
            let end = start + transitions[start..].iter().take_while(|t| t.from == from).count();
            outgoing[from] = start..end;
            start = end;
        }

        let initial = match initial {
            InitialSpec::State(s) => Initial::State(index[&s]),
            InitialSpec::Distribution(d) => Initial::Distribution(d.into_iter().map(|(s, c)| (index[&s], c)).collect()),
        };

        let abstraction = Abstraction {
            schema_fingerprint,
            n_agents,
            n_predicates,
            task_completion,
            normalization,
            states,
            index,
            transitions,
            outgoing,
            visits,
            initial,
        };
        debug_assert!(abstraction.check_invariants().is_ok());
        Ok(abstraction)
    }

    /// Verifies the structural invariants: positive counts, normalized
    /// outgoing mass, state-space bound, initial state membership.
    pub fn check_invariants(&self) -> Result<()> {
        if self.transitions.iter().any(|t| t.count == 0) {
            return Err(Error::Precondition("zero-count transition stored".into()));
        }
        let tol = T::from_f64(1e-9).expect("tolerance representable");
        let tol = if T::epsilon() * T::from_f64(64.0).unwrap() > tol {
            T::epsilon() * T::from_f64(64.0).unwrap()
        } else {
            tol
        };
        for (s, range) in self.outgoing.iter().enumerate() {
            if range.is_empty() {
                continue;
            }
            let out = &self.transitions[range.clone()];
            match self.normalization {
                Normalization::StateVisits => {
                    let total = out.iter().fold(T::zero(), |acc, t| acc + t.probability);
                    if (total - T::one()).abs() > tol {
                        return Err(Error::Precondition(format!(
                            "outgoing probability of state {s} sums to {total}"
                        )));
                    }
                }
                Normalization::StateAction => {
                    let mut per_action: BTreeMap<&JointAction, T> = BTreeMap::new();
                    for t in out {
                        *per_action.entry(&t.action).or_insert_with(T::zero) =
                            per_action.get(&t.action).copied().unwrap_or_else(T::zero) + t.probability;
                    }
                    if per_action.values().any(|&p| (p - T::one()).abs() > tol) {
                        return Err(Error::Precondition(format!(
                            "per-action probability of state {s} is not normalized"
                        )));
                    }
                }
            }
        }
        let bits = self.n_predicates * self.n_agents;
        if bits < 64 && self.states.len() as u128 > 1u128 << bits {
            return Err(Error::Precondition("state count exceeds (2^|F|)^N".into()));
        }
        match &self.initial {
            Initial::State(i) if *i < self.states.len() => {}
            Initial::Distribution(d) if !d.is_empty() && d.iter().all(|(i, _)| *i < self.states.len()) => {}
            _ => return Err(Error::Precondition("initial state not in the state set".into())),
        }
        Ok(())
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    /// Fails unless the abstraction was built with `schema`.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if schema.fingerprint() != self.schema_fingerprint || schema.task_completion() != self.task_completion {
            return Err(Error::SchemaMismatch(format!(
                "abstraction was built with schema {}, domain schema is {}",
                self.schema_fingerprint,
                schema.fingerprint()
            )));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_predicates(&self) -> usize {
        self.n_predicates
    }

    pub fn task_completion(&self) -> &[usize] {
        &self.task_completion
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn states(&self) -> &[AbstractJointState] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &AbstractJointState {
        &self.states[idx]
    }

    pub fn index_of(&self, state: &AbstractJointState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn transitions(&self) -> &[Transition<T>] {
        &self.transitions
    }

    /// Transitions leaving `state`, ordered by (action, target).
    pub fn outgoing(&self, state: usize) -> &[Transition<T>] {
        &self.transitions[self.outgoing[state].clone()]
    }

    /// Distinct joint actions with non-zero probability in `state`.
    pub fn enabled_actions(&self, state: usize) -> Vec<&JointAction> {
        let mut out: Vec<&JointAction> = self.outgoing(state).iter().map(|t| &t.action).collect();
        out.dedup();
        out
    }

    pub fn visits(&self, state: usize) -> u64 {
        self.visits[state]
    }

    pub fn total_samples(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn initial(&self) -> &Initial {
        &self.initial
    }

    /// Every task-completion predicate holds for at least one agent.
    pub fn is_goal(&self, state: usize) -> bool {
        let s = &self.states[state];
        self.task_completion
            .iter()
            .all(|&f| s.agents().iter().any(|a| a.holds(f)))
    }

    pub fn goal_states(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&s| self.is_goal(s)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form; identical abstractions give identical bytes.
    pub fn to_text(&self) -> Result<String> {
        if self.states.is_empty() || self.transitions.is_empty() {
            return Err(Error::Precondition("refusing to save an empty abstraction".into()));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{FILE_MAGIC} {FILE_VERSION}");
        let _ = writeln!(out, "schema {}", self.schema_fingerprint);
        let _ = writeln!(out, "agents {}", self.n_agents);
        let _ = writeln!(out, "features {}", self.n_predicates);
        let tasks: Vec<String> = self.task_completion.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "tasks {}", if tasks.is_empty() { "-".into() } else { tasks.join(",") });
        let _ = writeln!(out, "normalization {}", self.normalization.as_str());
        match &self.initial {
            Initial::State(i) => {
                let _ = writeln!(out, "initial state {i}");
            }
            Initial::Distribution(d) => {
                let parts: Vec<String> = d.iter().map(|(i, c)| format!("{i}:{c}")).collect();
                let _ = writeln!(out, "initial virtual {}", parts.join(","));
            }
        }
        let _ = writeln!(out, "states {}", self.states.len());
        for (i, s) in self.states.iter().enumerate() {
            let bits: Vec<String> = s.agents().iter().map(|a| a.0.to_string()).collect();
            let _ = writeln!(out, "{i} {}", bits.join(" "));
        }
        let _ = writeln!(out, "transitions {}", self.transitions.len());
        for t in &self.transitions {
            let action: Vec<String> = t.action.actions().iter().map(|a| a.0.to_string()).collect();
            let p = t.probability.to_f64().expect("probability is finite");
            let _ = writeln!(out, "{} {} {} {} {p}", t.from, action.join(","), t.to, t.count);
        }
        let digest = hex::encode(Sha256::digest(out.as_bytes()));
        let _ = writeln!(out, "checksum {digest}");
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let body_end = text
            .rfind("checksum ")
            .filter(|&i| i == 0 || text.as_bytes()[i - 1] == b'\n')
            .ok_or_else(|| Error::Checksum("missing checksum line (file truncated?)".into()))?;
        let (body, tail) = text.split_at(body_end);
        let expected = tail["checksum ".len()..].trim_end();
        let actual = hex::encode(Sha256::digest(body.as_bytes()));
        if expected != actual {
            return Err(Error::Checksum(format!("expected {expected}, computed {actual}")));
        }

        let mut lines = body.lines();
        let mut next = |what: &'static str| lines.next().ok_or_else(|| Error::format("MMDP file", format!("missing {what}")));
        let header = next("header")?;
        let version = header
            .strip_prefix(FILE_MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::format("MMDP file", "not an MMDP file"))?;
        if version != FILE_VERSION.to_string() {
            return Err(Error::VersionMismatch(format!(
                "MMDP file version {version}, expected {FILE_VERSION}"
            )));
        }
        let field = |line: &str, key: &'static str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::format("MMDP file", format!("expected `{key}`, found `{line}`")))
        };
        let num = |s: &str| -> Result<u64> { s.trim().parse().map_err(|e| Error::format("MMDP file", format!("`{s}`: {e}"))) };

        let schema_fingerprint = field(next("schema")?, "schema")?;
        let n_agents = num(&field(next("agents")?, "agents")?)? as usize;
        let n_predicates = num(&field(next("features")?, "features")?)? as usize;
        let tasks = field(next("tasks")?, "tasks")?;
        let task_completion = if tasks == "-" {
            Vec::new()
        } else {
            tasks.split(',').map(|t| num(t).map(|v| v as usize)).collect::<Result<Vec<_>>>()?
        };
        let normalization = Normalization::parse(&field(next("normalization")?, "normalization")?)
            .ok_or_else(|| Error::format("MMDP file", "unknown normalization"))?;
        let init_line = field(next("initial")?, "initial")?;
        let (init_kind, init_rest) = init_line
            .split_once(' ')
            .ok_or_else(|| Error::format("MMDP file", "bad initial line"))?;
        let n_states = num(&field(next("states")?, "states")?)? as usize;
        let mut states = Vec::with_capacity(n_states);
        for i in 0..n_states {
            let line = next("state row")?;
            let mut parts = line.split_whitespace();
            if num(parts.next().unwrap_or(""))? as usize != i {
                return Err(Error::format("MMDP file", format!("state rows out of order at {i}")));
            }
            let bits = parts.map(|p| num(p).map(|b| b as u32)).collect::<Result<Vec<_>>>()?;
            if bits.len() != n_agents {
                return Err(Error::format("MMDP file", format!("state {i} has {} agents", bits.len())));
            }
            states.push(AbstractJointState::from_bits(&bits));
        }
        let n_transitions = num(&field(next("transitions")?, "transitions")?)? as usize;
        let mut counts = HashMap::with_capacity(n_transitions);
        let mut probabilities = Vec::with_capacity(n_transitions);
        for _ in 0..n_transitions {
            let line = next("transition row")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(Error::format("MMDP file", format!("bad transition row `{line}`")));
            }
            let state_at = |s: &str| -> Result<AbstractJointState> {
                states
                    .get(num(s)? as usize)
                    .cloned()
                    .ok_or_else(|| Error::format("MMDP file", format!("state index {s} out of range")))
            };
            let action = parts[1]
                .split(',')
                .map(|a| num(a).map(|v| ActionId(v as u16)))
                .collect::<Result<Vec<_>>>()?;
            let key = (state_at(parts[0])?, JointAction::new(action), state_at(parts[2])?);
            let p: f64 = parts[4]
                .parse()
                .map_err(|e| Error::format("MMDP file", format!("probability `{}`: {e}", parts[4])))?;
            probabilities.push(p);
            if counts.insert(key, num(parts[3])?).is_some() {
                return Err(Error::format("MMDP file", "duplicate transition row"));
            }
        }
        if lines.next().is_some() {
            return Err(Error::format("MMDP file", "trailing content before checksum"));
        }
        let state_ref = |s: &str| -> Result<AbstractJointState> {
            states
                .get(num(s)? as usize)
                .cloned()
                .ok_or_else(|| Error::format("MMDP file", format!("initial state {s} out of range")))
        };
        let initial = match init_kind {
            "state" => InitialSpec::State(state_ref(init_rest)?),
            "virtual" => InitialSpec::Distribution(
                init_rest
                    .split(',')
                    .map(|p| {
                        let (i, c) = p
                            .split_once(':')
                            .ok_or_else(|| Error::format("MMDP file", "bad virtual initial entry"))?;
                        Ok((state_ref(i)?, num(c)?))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            other => return Err(Error::format("MMDP file", format!("unknown initial kind `{other}`"))),
        };
        let mut m = Self::assemble(schema_fingerprint, n_predicates, task_completion, counts, initial, normalization)?;
        if m.states.len() != n_states {
            return Err(Error::format("MMDP file", "unreferenced states in state table"));
        }
        for (t, p) in m.transitions.iter_mut().zip(probabilities) {
            t.probability = T::from_f64(p).expect("probability representable");
        }
        Ok(m)
    }
}
