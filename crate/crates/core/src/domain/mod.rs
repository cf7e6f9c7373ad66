//! Shared vocabulary: agents, actions, feature predicates, abstract states and
//! relevance knowledge.
//!
//! Feature predicates only look at a single agent's concrete state. Bit `i` of
//! every [`AbstractAgentState`] is the valuation of `schema.predicates()[i]`,
//! and that declared order is used everywhere, including Boolean variable
//! numbering in [`variable_index`].

pub mod file;
mod relevance;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use file::DomainFile;
pub use relevance::{ActionRef, RelevanceEntry, RelevanceKnowledge};

/// Maximum number of predicates an abstract agent state can encode.
pub const MAX_PREDICATES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into the domain's action vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub u16);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agent {
    pub id: AgentId,
    pub name: String,
    /// Role used by built-in simulators (e.g. "UAV", "UGV").
    pub kind: String,
    pub actions: Vec<ActionId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSpec {
    pub id: String,
    /// Verb phrase in base form ("rescue the victim").
    pub base: String,
    /// Third-person singular form ("rescues the victim").
    pub third_person: String,
}

/// What a predicate inspects in a concrete agent state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PredicateTest {
    Observes(String),
    Holds(String),
    Completed(String),
}

impl PredicateTest {
    pub fn tag(&self) -> &str {
        match self {
            PredicateTest::Observes(t) | PredicateTest::Holds(t) | PredicateTest::Completed(t) => t,
        }
    }

    fn eval(&self, state: &ConcreteAgentState) -> bool {
        match self {
            PredicateTest::Observes(t) => state.observes.contains(t),
            PredicateTest::Holds(t) => state.holds.contains(t),
            PredicateTest::Completed(t) => state.completed.contains(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predicate {
    pub id: String,
    pub positive: String,
    pub negative: String,
    pub test: PredicateTest,
    /// Short task name shown in summary charts.
    pub label: Option<String>,
}

/// Ordered feature predicates plus the task-completion subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSchema {
    predicates: Vec<Predicate>,
    task_completion: Vec<usize>,
    objects: BTreeSet<String>,
}

impl FeatureSchema {
    pub fn new(
        predicates: Vec<Predicate>,
        task_completion_ids: &[String],
        objects: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let objects: BTreeSet<String> = objects.into_iter().collect();
        if predicates.is_empty() {
            return Err(Error::InvalidDomain("no feature predicates".into()));
        }
        if predicates.len() > MAX_PREDICATES {
            return Err(Error::InvalidDomain(format!(
                "{} predicates exceed the limit of {MAX_PREDICATES}",
                predicates.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for p in &predicates {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::InvalidDomain(format!("duplicate predicate `{}`", p.id)));
            }
            if !objects.contains(p.test.tag()) {
                return Err(Error::InvalidDomain(format!(
                    "predicate `{}` refers to undeclared object `{}`",
                    p.id,
                    p.test.tag()
                )));
            }
        }
        let mut schema = FeatureSchema {
            predicates,
            task_completion: Vec::new(),
            objects,
        };
        let mut tasks = Vec::with_capacity(task_completion_ids.len());
        for id in task_completion_ids {
            let idx = schema.index_of(id)?;
            if tasks.contains(&idx) {
                return Err(Error::InvalidDomain(format!("task predicate `{id}` listed twice")));
            }
            tasks.push(idx);
        }
        tasks.sort_unstable();
        schema.task_completion = tasks;
        Ok(schema)
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn predicate(&self, idx: usize) -> &Predicate {
        &self.predicates[idx]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.predicates
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| Error::UnknownPredicate(id.to_string()))
    }

    /// Indices of task-completion predicates, ascending.
    pub fn task_completion(&self) -> &[usize] {
        &self.task_completion
    }

    pub fn objects(&self) -> &BTreeSet<String> {
        &self.objects
    }

    /// Chart label of a predicate: its `label` or, failing that, its id.
    pub fn label(&self, idx: usize) -> &str {
        let p = &self.predicates[idx];
        p.label.as_deref().unwrap_or(&p.id)
    }

    /// Short stable hash of predicate ids, tests and task subset.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.predicates {
            let kind = match p.test {
                PredicateTest::Observes(_) => "observes",
                PredicateTest::Holds(_) => "holds",
                PredicateTest::Completed(_) => "completed",
            };
            h.update(format!("{}|{}|{};", p.id, kind, p.test.tag()).as_bytes());
        }
        for t in &self.task_completion {
            h.update(format!("task {t};").as_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Bit-encoded predicate valuation of one agent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractAgentState(pub u32);

impl AbstractAgentState {
    pub fn holds(self, predicate: usize) -> bool {
        self.0 >> predicate & 1 == 1
    }

    pub fn from_valuation(valuation: &[bool]) -> Self {
        let bits = valuation
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &v)| acc | (u32::from(v) << i));
        AbstractAgentState(bits)
    }

    pub fn valuation(self, n_predicates: usize) -> Vec<bool> {
        (0..n_predicates).map(|i| self.holds(i)).collect()
    }
}

/// Per-agent abstract states; ordering is agent-major on the bit values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractJointState(Box<[AbstractAgentState]>);

impl AbstractJointState {
    pub fn new(agents: Vec<AbstractAgentState>) -> Self {
        AbstractJointState(agents.into_boxed_slice())
    }

    pub fn from_bits(bits: &[u32]) -> Self {
        Self::new(bits.iter().map(|&b| AbstractAgentState(b)).collect())
    }

    pub fn agents(&self) -> &[AbstractAgentState] {
        &self.0
    }

    pub fn agent(&self, agent: AgentId) -> AbstractAgentState {
        self.0[agent.0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for AbstractJointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", s.0)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction(Box<[ActionId]>);

impl JointAction {
    pub fn new(actions: Vec<ActionId>) -> Self {
        JointAction(actions.into_boxed_slice())
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.0
    }

    pub fn action(&self, agent: AgentId) -> ActionId {
        self.0[agent.0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Concrete state of one agent as recorded in trace files.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcreteAgentState {
    pub pos: [i32; 2],
    #[serde(default)]
    pub observes: BTreeSet<String>,
    #[serde(default)]
    pub holds: BTreeSet<String>,
    #[serde(default)]
    pub completed: BTreeSet<String>,
}

pub fn encode_agent_state(
    state: &ConcreteAgentState,
    schema: &FeatureSchema,
) -> Result<AbstractAgentState> {
    if let Some(unknown) = state
        .observes
        .iter()
        .chain(&state.holds)
        .chain(&state.completed)
        .find(|t| !schema.objects.contains(*t))
    {
        return Err(Error::SchemaMismatch(format!(
            "concrete state mentions `{unknown}`, which the schema does not declare"
        )));
    }
    let bits = schema
        .predicates
        .iter()
        .enumerate()
        .filter(|(_, p)| p.test.eval(state))
        .fold(0u32, |acc, (i, _)| acc | 1 << i);
    Ok(AbstractAgentState(bits))
}

pub fn encode_joint_state(
    states: &[ConcreteAgentState],
    schema: &FeatureSchema,
) -> Result<AbstractJointState> {
    states
        .iter()
        .map(|s| encode_agent_state(s, schema))
        .collect::<Result<Vec<_>>>()
        .map(AbstractJointState::new)
}

/// Boolean variable number of `(agent, predicate)`: agent-major, predicate-minor.
pub fn variable_index(
    agent: AgentId,
    predicate: usize,
    agent_order: &[AgentId],
    feature_order: &[usize],
) -> Result<usize> {
    let a = agent_order
        .iter()
        .position(|&x| x == agent)
        .ok_or_else(|| Error::UnknownAgent(agent.to_string()))?;
    let f = feature_order
        .iter()
        .position(|&x| x == predicate)
        .ok_or_else(|| Error::UnknownPredicate(format!("#{predicate}")))?;
    Ok(a * feature_order.len() + f)
}

/// A complete domain definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub id: String,
    pub description: String,
    agents: Vec<Agent>,
    actions: Vec<ActionSpec>,
    schema: FeatureSchema,
    relevance: RelevanceKnowledge,
    agent_index: HashMap<String, AgentId>,
    action_index: HashMap<String, ActionId>,
}

impl Domain {
    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, id: AgentId) -> &Agent {
        &self.agents[id.0]
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.iter().map(|a| a.id)
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &ActionSpec {
        &self.actions[usize::from(id.0)]
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn relevance(&self) -> &RelevanceKnowledge {
        &self.relevance
    }

    pub fn agent_by_name(&self, name: &str) -> Result<AgentId> {
        self.agent_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAgent(name.to_string()))
    }

    pub fn action_by_name(&self, name: &str) -> Result<ActionId> {
        self.action_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAction(name.to_string()))
    }

    /// Resolves `AGENT:action`, checking the action is in the agent's alphabet.
    pub fn action_ref(&self, spec: &str) -> Result<ActionRef> {
        let (agent, action) = spec
            .split_once(':')
            .ok_or_else(|| Error::format("action reference", format!("`{spec}` is not AGENT:action")))?;
        let agent = self.agent_by_name(agent.trim())?;
        let action = self.action_by_name(action.trim())?;
        if !self.agents[agent.0].actions.contains(&action) {
            return Err(Error::UnknownAction(spec.to_string()));
        }
        Ok(ActionRef { agent, action })
    }

    pub fn format_action_ref(&self, r: ActionRef) -> String {
        format!("{}:{}", self.agents[r.agent.0].name, self.action(r.action).id)
    }

    pub fn joint_action(&self, names: &[impl AsRef<str>]) -> Result<JointAction> {
        if names.len() != self.agents.len() {
            return Err(Error::SchemaMismatch(format!(
                "joint action has {} components, domain has {} agents",
                names.len(),
                self.agents.len()
            )));
        }
        let mut ids = Vec::with_capacity(names.len());
        for (agent, name) in self.agents.iter().zip(names) {
            let id = self.action_by_name(name.as_ref())?;
            if !agent.actions.contains(&id) {
                return Err(Error::UnknownAction(format!("{}:{}", agent.name, name.as_ref())));
            }
            ids.push(id);
        }
        Ok(JointAction::new(ids))
    }

    pub fn action_names(&self, a: &JointAction) -> Vec<&str> {
        a.actions().iter().map(|&id| self.action(id).id.as_str()).collect()
    }

    pub fn check_joint_action(&self, a: &JointAction) -> Result<()> {
        if a.len() != self.agents.len() {
            return Err(Error::SchemaMismatch(format!(
                "joint action has {} components, domain has {} agents",
                a.len(),
                self.agents.len()
            )));
        }
        for (agent, id) in self.agents.iter().zip(a.actions()) {
            if !agent.actions.contains(id) {
                return Err(Error::UnknownAction(format!("{}:#{}", agent.name, id.0)));
            }
        }
        Ok(())
    }

    /// Parses inline per-agent bit values `b1,b2,...`.
    pub fn parse_joint_state(&self, text: &str) -> Result<AbstractJointState> {
        let bits = text
            .split(',')
            .map(|t| t.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format("joint state", format!("`{text}`: {e}")))?;
        if bits.len() != self.agents.len() {
            return Err(Error::SchemaMismatch(format!(
                "joint state has {} components, domain has {} agents",
                bits.len(),
                self.agents.len()
            )));
        }
        let limit = 1u64 << self.schema.len();
        if let Some(b) = bits.iter().find(|&&b| u64::from(b) >= limit) {
            return Err(Error::SchemaMismatch(format!(
                "agent state {b} does not fit in {} predicate bits",
                self.schema.len()
            )));
        }
        Ok(AbstractJointState::from_bits(&bits))
    }
}
