//! When / why-not / what queries, each answered without (`NoRF`) or with
//! (`WithRF`) relevancy filtering.
//!
//! Boolean variables are numbered agent-major over an agent list and a
//! feature list (see [`crate::domain::variable_index`]). NoRF uses every agent
//! and every predicate; WithRF uses the relevant agents `G` and features `F`,
//! both ascending.

mod what;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::abstraction::Abstraction;
use crate::boolmin::{self, Budget, Minterm, Progress};
use crate::domain::{variable_index, AbstractJointState, ActionRef, AgentId, Domain, JointAction};
use crate::error::{Error, Result};
use crate::scalar::Probability;

pub use what::{answer_what, AgentActions, WhatAnswer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Method {
    NoRF,
    #[default]
    WithRF,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "norf" => Ok(Method::NoRF),
            "withrf" => Ok(Method::WithRF),
            _ => Err(Error::format("method", format!("`{s}` (expected norf or withrf)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::NoRF => "NoRF",
            Method::WithRF => "WithRF",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QueryKind {
    When,
    WhyNot,
    What,
}

impl FromStr for QueryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "when" => Ok(QueryKind::When),
            "whynot" => Ok(QueryKind::WhyNot),
            "what" => Ok(QueryKind::What),
            _ => Err(Error::format("query type", format!("`{s}` (expected when, whynot or what)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub kind: QueryKind,
    pub agents: BTreeSet<AgentId>,
    pub actions: BTreeSet<ActionRef>,
    pub state: Option<AbstractJointState>,
    pub predicates: BTreeSet<usize>,
    pub method: Method,
}

impl Query {
    /// "When do the agents of `actions` take `actions`?"
    pub fn when(actions: impl IntoIterator<Item = ActionRef>, method: Method) -> Self {
        let actions: BTreeSet<ActionRef> = actions.into_iter().collect();
        Query {
            kind: QueryKind::When,
            agents: actions.iter().map(|r| r.agent).collect(),
            actions,
            state: None,
            predicates: BTreeSet::new(),
            method,
        }
    }

    /// "Why don't the agents of `actions` take `actions` in `state`?"
    pub fn whynot(actions: impl IntoIterator<Item = ActionRef>, state: AbstractJointState, method: Method) -> Self {
        Query {
            kind: QueryKind::WhyNot,
            state: Some(state),
            ..Query::when(actions, method)
        }
    }

    /// "What do `agents` do when they satisfy `predicates`?"
    pub fn what(
        agents: impl IntoIterator<Item = AgentId>,
        predicates: impl IntoIterator<Item = usize>,
        method: Method,
    ) -> Self {
        Query {
            kind: QueryKind::What,
            agents: agents.into_iter().collect(),
            actions: BTreeSet::new(),
            state: None,
            predicates: predicates.into_iter().collect(),
            method,
        }
    }

    fn check(&self, kind: QueryKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Precondition(format!("expected a {kind:?} query, got {:?}", self.kind)));
        }
        if self.actions.iter().any(|r| !self.agents.contains(&r.agent)) {
            return Err(Error::Precondition("query actions belong to agents outside the query".into()));
        }
        Ok(())
    }
}

/// `(agent, predicate, polarity)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub agent: AgentId,
    pub predicate: usize,
    pub positive: bool,
}

/// Disjunction of conjunctions. A single empty clause is the constant true.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LiteralDnf {
    pub clauses: Vec<Vec<Literal>>,
}

impl LiteralDnf {
    pub fn is_tautology(&self) -> bool {
        self.clauses.iter().any(|c| c.is_empty())
    }

    pub fn eval(&self, state: &AbstractJointState) -> bool {
        self.clauses.iter().any(|c| {
            c.iter()
                .all(|l| state.agent(l.agent).holds(l.predicate) == l.positive)
        })
    }

    pub fn literal_count(&self) -> usize {
        self.clauses.iter().map(Vec::len).sum()
    }

    /// Compact form such as `UAV.victim_detect & !UGV_1.fire_detect | ...`.
    pub fn display(&self, domain: &Domain) -> String {
        if self.clauses.is_empty() {
            return "0".into();
        }
        self.clauses
            .iter()
            .map(|c| {
                if c.is_empty() {
                    return "1".to_string();
                }
                c.iter()
                    .map(|l| {
                        format!(
                            "{}{}.{}",
                            if l.positive { "" } else { "!" },
                            domain.agent(l.agent).name,
                            domain.schema().predicate(l.predicate).id
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(" & ")
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// Relevant agents `G`, features `F` and cooperation sets `A` of a query.
///
/// Every set in `A` is extended with the query actions themselves, so each
/// one is a superset of `A_q`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelevanceFilter {
    pub agents: BTreeSet<AgentId>,
    pub features: BTreeSet<usize>,
    pub action_sets: Vec<BTreeSet<ActionRef>>,
}

pub fn relevancy_filter(actions: &BTreeSet<ActionRef>, domain: &Domain) -> Result<RelevanceFilter> {
    let mut out = RelevanceFilter::default();
    for &a in actions {
        let entry = domain.relevance().entry(a).ok_or_else(|| Error::KnowledgeGap {
            agent: domain.agent(a.agent).name.clone(),
            action: domain.action(a.action).id.clone(),
        })?;
        out.agents.extend(&entry.agents);
        out.features.extend(&entry.features);
        for set in &entry.action_sets {
            if !set.contains(&a) {
                return Err(Error::InvalidDomain(format!(
                    "an action set of {} does not contain the action",
                    domain.format_action_ref(a)
                )));
            }
            let mut set = set.clone();
            set.extend(actions);
            if !out.action_sets.contains(&set) {
                out.action_sets.push(set);
            }
        }
    }
    Ok(out)
}

/// What a compatible joint action must contain.
#[derive(Clone, Copy, Debug)]
pub enum Criterion<'a> {
    /// Every listed action (NoRF).
    All(&'a BTreeSet<ActionRef>),
    /// Every action of at least one listed set (WithRF).
    AnyOf(&'a [BTreeSet<ActionRef>]),
}

fn contains_all(a: &JointAction, set: &BTreeSet<ActionRef>) -> bool {
    set.iter().all(|r| r.agent.0 < a.len() && a.action(r.agent) == r.action)
}

pub fn compatible(a: &JointAction, criterion: Criterion<'_>) -> bool {
    match criterion {
        Criterion::All(set) => contains_all(a, set),
        Criterion::AnyOf(sets) => sets.iter().any(|s| contains_all(a, s)),
    }
}

/// Target states `V` and non-target states `V̄`, disjoint, as state indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    pub targets: BTreeSet<usize>,
    pub non_targets: BTreeSet<usize>,
}

/// States with a compatible enabled action are targets; states with an
/// incompatible one are non-targets unless they are also targets.
pub fn when_partition<T: Probability>(m: &Abstraction<T>, criterion: Criterion<'_>) -> Partition {
    let mut p = Partition::default();
    for s in 0..m.states().len() {
        let mut hit = false;
        let mut miss = false;
        for a in m.enabled_actions(s) {
            if compatible(a, criterion) {
                hit = true;
            } else {
                miss = true;
            }
        }
        if hit {
            p.targets.insert(s);
        } else if miss {
            p.non_targets.insert(s);
        }
    }
    p
}

/// The query state is the only target; states with a compatible enabled
/// action are non-targets.
pub fn whynot_partition<T: Probability>(m: &Abstraction<T>, query_state: usize, criterion: Criterion<'_>) -> Partition {
    let non_targets = (0..m.states().len())
        .filter(|&s| s != query_state && m.enabled_actions(s).into_iter().any(|a| compatible(a, criterion)))
        .collect();
    Partition {
        targets: [query_state].into(),
        non_targets,
    }
}

/// Agent and feature order that numbers the Boolean variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableMap {
    pub agents: Vec<AgentId>,
    pub features: Vec<usize>,
}

impl VariableMap {
    pub fn all(domain: &Domain) -> Self {
        VariableMap {
            agents: domain.agent_ids().collect(),
            features: (0..domain.schema().len()).collect(),
        }
    }

    pub fn filtered(filter: &RelevanceFilter) -> Self {
        VariableMap {
            agents: filter.agents.iter().copied().collect(),
            features: filter.features.iter().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len() * self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Projects a joint state onto the variables. Only valid when
    /// `len() <= 32`; larger problems are rejected before projection.
    pub fn minterm(&self, state: &AbstractJointState) -> Minterm {
        let mut bits = 0u32;
        for &a in &self.agents {
            for &f in &self.features {
                if state.agent(a).holds(f) {
                    let v = variable_index(a, f, &self.agents, &self.features).expect("variable in map");
                    bits |= 1 << v;
                }
            }
        }
        Minterm(bits)
    }

    /// `(agent, predicate)` of variable `v`.
    pub fn variable(&self, v: usize) -> (AgentId, usize) {
        (self.agents[v / self.features.len()], self.features[v % self.features.len()])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Dnf(LiteralDnf),
    /// No state has a compatible enabled action.
    NoOccurrence,
    /// Why-not: the action is never taken anywhere.
    Never,
    /// Why-not: the agents do take the action in the query state.
    Contradiction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanAnswer {
    pub outcome: Outcome,
    pub partition: Partition,
    pub variables: VariableMap,
    /// Distinct projected target minterms.
    pub ones: usize,
    /// Distinct projected non-target minterms after conflict removal.
    pub zeros: usize,
    /// Non-target minterms dropped because a target projects onto them too.
    pub conflicts: usize,
    pub exact: bool,
    pub progress: Progress,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct QueryOptions {
    pub budget: Budget,
}

struct Setup {
    variables: VariableMap,
    action_sets: Vec<BTreeSet<ActionRef>>,
}

fn setup(q: &Query, domain: &Domain) -> Result<Setup> {
    for r in &q.actions {
        if r.agent.0 >= domain.n_agents() || !domain.agent(r.agent).actions.contains(&r.action) {
            return Err(Error::UnknownAction(format!("agent #{} action #{}", r.agent.0, r.action.0)));
        }
    }
    Ok(match q.method {
        Method::NoRF => Setup {
            variables: VariableMap::all(domain),
            action_sets: Vec::new(),
        },
        Method::WithRF => {
            let filter = relevancy_filter(&q.actions, domain)?;
            Setup {
                variables: VariableMap::filtered(&filter),
                action_sets: filter.action_sets,
            }
        }
    })
}

fn criterion<'a>(q: &'a Query, setup: &'a Setup) -> Criterion<'a> {
    match q.method {
        Method::NoRF => Criterion::All(&q.actions),
        Method::WithRF => Criterion::AnyOf(&setup.action_sets),
    }
}

fn minimize_partition<T: Probability>(
    m: &Abstraction<T>,
    partition: Partition,
    variables: VariableMap,
    options: &QueryOptions,
) -> Result<BooleanAnswer> {
    if variables.len() > boolmin::MAX_VARIABLES {
        return Err(boolmin::MinimizeError::TooManyVariables {
            variables: variables.len(),
            limit: boolmin::MAX_VARIABLES,
        }
        .into());
    }
    let ones: BTreeSet<u32> = partition.targets.iter().map(|&s| variables.minterm(m.state(s)).0).collect();
    let all_zeros: BTreeSet<u32> = partition
        .non_targets
        .iter()
        .map(|&s| variables.minterm(m.state(s)).0)
        .collect();
    let zeros: Vec<Minterm> = all_zeros.difference(&ones).map(|&b| Minterm(b)).collect();
    let conflicts = all_zeros.len() - zeros.len();
    let ones: Vec<Minterm> = ones.into_iter().map(Minterm).collect();
    let result = boolmin::minimize_with(&ones, &zeros, variables.len(), &options.budget)?;
    let clauses = result
        .implicants
        .iter()
        .map(|imp| {
            imp.literals()
                .map(|(v, positive)| {
                    let (agent, predicate) = variables.variable(v);
                    Literal {
                        agent,
                        predicate,
                        positive,
                    }
                })
                .collect()
        })
        .collect();
    Ok(BooleanAnswer {
        outcome: Outcome::Dnf(LiteralDnf { clauses }),
        partition,
        ones: ones.len(),
        zeros: zeros.len(),
        conflicts,
        variables,
        exact: result.exact,
        progress: result.progress,
    })
}

fn trivial(outcome: Outcome, partition: Partition, variables: VariableMap) -> BooleanAnswer {
    BooleanAnswer {
        outcome,
        partition,
        variables,
        ones: 0,
        zeros: 0,
        conflicts: 0,
        exact: true,
        progress: Progress::default(),
    }
}

/// "When do the query agents take the query actions?"
pub fn answer_when<T: Probability>(
    q: &Query,
    m: &Abstraction<T>,
    domain: &Domain,
    options: &QueryOptions,
) -> Result<BooleanAnswer> {
    q.check(QueryKind::When)?;
    m.check_schema(domain.schema())?;
    let setup = setup(q, domain)?;
    if q.actions.is_empty() {
        return Ok(trivial(Outcome::NoOccurrence, Partition::default(), setup.variables));
    }
    let partition = when_partition(m, criterion(q, &setup));
    if partition.targets.is_empty() {
        return Ok(trivial(Outcome::NoOccurrence, partition, setup.variables));
    }
    minimize_partition(m, partition, setup.variables, options)
}

/// "Why don't the query agents take the query actions in the query state?"
pub fn answer_whynot<T: Probability>(
    q: &Query,
    m: &Abstraction<T>,
    domain: &Domain,
    options: &QueryOptions,
) -> Result<BooleanAnswer> {
    q.check(QueryKind::WhyNot)?;
    m.check_schema(domain.schema())?;
    let state = q
        .state
        .as_ref()
        .ok_or_else(|| Error::Precondition("why-not query without a state".into()))?;
    let s_q = m
        .index_of(state)
        .ok_or_else(|| Error::UnknownState(state.to_string()))?;
    let setup = setup(q, domain)?;
    if q.actions.is_empty() {
        return Ok(trivial(Outcome::NoOccurrence, Partition::default(), setup.variables));
    }
    let crit = criterion(q, &setup);
    if m.enabled_actions(s_q).into_iter().any(|a| compatible(a, crit)) {
        return Ok(trivial(Outcome::Contradiction, Partition::default(), setup.variables));
    }
    let partition = whynot_partition(m, s_q, crit);
    if partition.non_targets.is_empty() {
        return Ok(trivial(Outcome::Never, partition, setup.variables));
    }
    minimize_partition(m, partition, setup.variables, options)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Boolean(BooleanAnswer),
    What(WhatAnswer),
}

/// Dispatches on the query kind.
pub fn answer<T: Probability>(q: &Query, m: &Abstraction<T>, domain: &Domain, options: &QueryOptions) -> Result<Answer> {
    match q.kind {
        QueryKind::When => answer_when(q, m, domain, options).map(Answer::Boolean),
        QueryKind::WhyNot => answer_whynot(q, m, domain, options).map(Answer::Boolean),
        QueryKind::What => answer_what(q, m, domain).map(Answer::What),
    }
}
