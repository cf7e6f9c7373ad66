use std::collections::{BTreeMap, BTreeSet};

use super::{ActionId, AgentId};
use crate::error::{Error, Result};

/// One agent's action, e.g. `UAV:rescue`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionRef {
    pub agent: AgentId,
    pub action: ActionId,
}

/// Relevance of one agent action: cooperating agents, features and the
/// admissible cooperation combinations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelevanceEntry {
    pub agents: BTreeSet<AgentId>,
    pub features: BTreeSet<usize>,
    pub action_sets: Vec<BTreeSet<ActionRef>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelevanceKnowledge {
    entries: BTreeMap<ActionRef, RelevanceEntry>,
}

impl RelevanceKnowledge {
    /// Builds the registry, checking that every action set contains its own
    /// key and that the relevant agents are exactly those in the action sets.
    pub fn new(entries: impl IntoIterator<Item = (ActionRef, RelevanceEntry)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (key, entry) in entries {
            if entry.action_sets.is_empty() {
                return Err(Error::InvalidDomain(format!(
                    "relevance entry for agent {} action #{} has no action sets",
                    key.agent, key.action.0
                )));
            }
            for set in &entry.action_sets {
                if !set.contains(&key) {
                    return Err(Error::InvalidDomain(format!(
                        "an action set for agent {} action #{} does not contain the action itself",
                        key.agent, key.action.0
                    )));
                }
            }
            let union: BTreeSet<AgentId> = entry
                .action_sets
                .iter()
                .flat_map(|s| s.iter().map(|r| r.agent))
                .collect();
            if union != entry.agents {
                return Err(Error::InvalidDomain(format!(
                    "relevant agents of agent {} action #{} differ from the agents in its action sets",
                    key.agent, key.action.0
                )));
            }
            if map.insert(key, entry).is_some() {
                return Err(Error::InvalidDomain(format!(
                    "duplicate relevance entry for agent {} action #{}",
                    key.agent, key.action.0
                )));
            }
        }
        Ok(RelevanceKnowledge { entries: map })
    }

    pub fn entry(&self, action: ActionRef) -> Option<&RelevanceEntry> {
        self.entries.get(&action)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ActionRef, &RelevanceEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Actions of `agent` whose relevant features intersect `features`.
    pub fn actions_relevant_to(&self, agent: AgentId, features: &BTreeSet<usize>) -> BTreeSet<ActionId> {
        self.entries
            .iter()
            .filter(|(k, e)| k.agent == agent && !e.features.is_disjoint(features))
            .map(|(k, _)| k.action)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(agent: usize, action: u16) -> ActionRef {
        ActionRef {
            agent: AgentId(agent),
            action: ActionId(action),
        }
    }

    #[test]
    fn rejects_set_without_key() {
        let entry = RelevanceEntry {
            agents: [AgentId(1)].into(),
            features: [0].into(),
            action_sets: vec![[r(1, 2)].into()],
        };
        assert!(RelevanceKnowledge::new([(r(0, 2), entry)]).is_err());
    }

    #[test]
    fn rejects_agent_mismatch() {
        let entry = RelevanceEntry {
            agents: [AgentId(0)].into(),
            features: [0].into(),
            action_sets: vec![[r(0, 2), r(1, 2)].into()],
        };
        assert!(RelevanceKnowledge::new([(r(0, 2), entry)]).is_err());
    }

    #[test]
    fn relevant_actions_by_feature() {
        let k = RelevanceKnowledge::new([
            (
                r(0, 2),
                RelevanceEntry {
                    agents: [AgentId(0)].into(),
                    features: [0, 1].into(),
                    action_sets: vec![[r(0, 2)].into()],
                },
            ),
            (
                r(0, 3),
                RelevanceEntry {
                    agents: [AgentId(0)].into(),
                    features: [2].into(),
                    action_sets: vec![[r(0, 3)].into()],
                },
            ),
        ])
        .unwrap();
        assert_eq!(k.actions_relevant_to(AgentId(0), &[1].into()), [ActionId(2)].into());
        assert_eq!(k.actions_relevant_to(AgentId(0), &[2, 0].into()), [ActionId(2), ActionId(3)].into());
        assert!(k.actions_relevant_to(AgentId(1), &[0].into()).is_empty());
    }
}
