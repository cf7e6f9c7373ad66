use std::collections::BTreeMap;

use super::{Method, Query, QueryKind};
use crate::abstraction::Abstraction;
use crate::domain::{ActionId, AgentId, Domain};
use crate::error::{Error, Result};
use crate::scalar::Probability;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentActions {
    pub agent: AgentId,
    /// `(action, transition-count weight)`, heaviest first, ties by action name.
    /// WithRF keeps at most one entry.
    pub actions: Vec<(ActionId, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WhatAnswer {
    /// Number of abstract states where every query agent satisfies the
    /// query predicates; zero means the situation never occurs.
    pub matching_states: usize,
    pub per_agent: Vec<AgentActions>,
}

/// "What do the query agents do when they satisfy the query predicates?"
pub fn answer_what<T: Probability>(q: &Query, m: &Abstraction<T>, domain: &Domain) -> Result<WhatAnswer> {
    q.check(QueryKind::What)?;
    m.check_schema(domain.schema())?;
    if q.agents.is_empty() {
        return Err(Error::Precondition("what query without agents".into()));
    }
    if let Some(a) = q.agents.iter().find(|a| a.0 >= domain.n_agents()) {
        return Err(Error::UnknownAgent(format!("#{}", a.0)));
    }
    if let Some(f) = q.predicates.iter().find(|&&f| f >= domain.schema().len()) {
        return Err(Error::UnknownPredicate(format!("#{f}")));
    }

    let mut weights: BTreeMap<AgentId, BTreeMap<ActionId, u64>> = q.agents.iter().map(|&a| (a, BTreeMap::new())).collect();
    let mut matching_states = 0;
    for (s, state) in m.states().iter().enumerate() {
        let satisfied = q
            .agents
            .iter()
            .all(|&a| q.predicates.iter().all(|&f| state.agent(a).holds(f)));
        if !satisfied {
            continue;
        }
        matching_states += 1;
        for t in m.outgoing(s) {
            for (&agent, w) in weights.iter_mut() {
                *w.entry(t.action.action(agent)).or_default() += t.count;
            }
        }
    }

    let per_agent = weights
        .into_iter()
        .map(|(agent, w)| {
            let mut actions: Vec<(ActionId, u64)> = match q.method {
                Method::NoRF => w.into_iter().collect(),
                Method::WithRF => {
                    let relevant = domain.relevance().actions_relevant_to(agent, &q.predicates);
                    w.into_iter().filter(|(a, _)| relevant.contains(a)).collect()
                }
            };
            actions.sort_by(|x, y| {
                y.1.cmp(&x.1)
                    .then_with(|| domain.action(x.0).id.cmp(&domain.action(y.0).id))
            });
            if q.method == Method::WithRF {
                actions.truncate(1);
            }
            AgentActions { agent, actions }
        })
        .collect();
    Ok(WhatAnswer {
        matching_states,
        per_agent,
    })
}
