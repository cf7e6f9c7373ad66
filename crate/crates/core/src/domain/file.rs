//! TOML domain definition files.
//!
//! ```toml
//! id = "sr3"
//! description = "..."
//! objects = ["victim", "fire", "obstacle"]
//! task_completion = ["victim_complete", "fire_complete", "obstacle_complete"]
//!
//! [[agents]]
//! name = "UAV"
//! kind = "UAV"                  # optional, defaults to the name
//! actions = ["move", "wait", "rescue", "fight_fire"]
//!
//! [[actions]]
//! id = "rescue"
//! base = "rescue the victim"
//! third_person = "rescues the victim"
//!
//! [[predicates]]
//! id = "victim_detect"
//! positive = "detects the victim"
//! negative = "does not detect the victim"
//! observes = "victim"           # exactly one of observes / holds / completed
//! label = "victim"              # optional chart label
//!
//! [[relevance]]
//! agent = "UAV"
//! action = "rescue"
//! features = ["victim_detect", "victim_complete"]
//! action_sets = [["UAV:rescue", "UGV_1:rescue"], ["UAV:rescue", "UGV_2:rescue"]]
//! agents = ["UAV", "UGV_1", "UGV_2"]   # optional; checked if present
//! ```
//!
//! Unknown keys are rejected.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ActionId, ActionSpec, Agent, AgentId, Domain, FeatureSchema, Predicate, PredicateTest,
    RelevanceEntry, RelevanceKnowledge,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub objects: Vec<String>,
    pub task_completion: Vec<String>,
    pub agents: Vec<AgentDef>,
    pub actions: Vec<ActionDef>,
    pub predicates: Vec<PredicateDef>,
    #[serde(default)]
    pub relevance: Vec<RelevanceDef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDef {
    pub id: String,
    pub base: String,
    pub third_person: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateDef {
    pub id: String,
    pub positive: String,
    pub negative: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holds: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevanceDef {
    pub agent: String,
    pub action: String,
    pub features: Vec<String>,
    pub action_sets: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<String>>,
}

impl DomainFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("domain file", e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("domain file serializes")
    }

    pub fn into_domain(self) -> Result<Domain> {
        Domain::try_from(self)
    }
}

fn phrase_ok(what: &str, phrase: &str) -> Result<()> {
    if phrase.trim().is_empty() || phrase.contains(", or ") || phrase.contains('\n') {
        return Err(Error::InvalidDomain(format!("bad phrase for {what}: `{phrase}`")));
    }
    Ok(())
}

impl TryFrom<DomainFile> for Domain {
    type Error = Error;

    fn try_from(file: DomainFile) -> Result<Domain> {
        if file.agents.is_empty() {
            return Err(Error::InvalidDomain("no agents".into()));
        }
        let mut action_index = HashMap::new();
        let mut actions = Vec::with_capacity(file.actions.len());
        for (i, a) in file.actions.into_iter().enumerate() {
            phrase_ok(&a.id, &a.base)?;
            phrase_ok(&a.id, &a.third_person)?;
            let id = ActionId(u16::try_from(i).map_err(|_| Error::InvalidDomain("too many actions".into()))?);
            if action_index.insert(a.id.clone(), id).is_some() {
                return Err(Error::InvalidDomain(format!("duplicate action `{}`", a.id)));
            }
            actions.push(ActionSpec {
                id: a.id,
                base: a.base,
                third_person: a.third_person,
            });
        }

        let mut agent_index = HashMap::new();
        let mut agents = Vec::with_capacity(file.agents.len());
        for (i, a) in file.agents.into_iter().enumerate() {
            phrase_ok("agent name", &a.name)?;
            if agent_index.insert(a.name.clone(), AgentId(i)).is_some() {
                return Err(Error::InvalidDomain(format!("duplicate agent `{}`", a.name)));
            }
            let mut alphabet = Vec::with_capacity(a.actions.len());
            for name in &a.actions {
                let id = *action_index
                    .get(name)
                    .ok_or_else(|| Error::UnknownAction(format!("{}:{name}", a.name)))?;
                if alphabet.contains(&id) {
                    return Err(Error::InvalidDomain(format!("agent `{}` lists `{name}` twice", a.name)));
                }
                alphabet.push(id);
            }
            agents.push(Agent {
                id: AgentId(i),
                kind: a.kind.unwrap_or_else(|| a.name.clone()),
                name: a.name,
                actions: alphabet,
            });
        }

        let mut predicates = Vec::with_capacity(file.predicates.len());
        for p in file.predicates {
            phrase_ok(&p.id, &p.positive)?;
            phrase_ok(&p.id, &p.negative)?;
            let test = match (p.observes, p.holds, p.completed) {
                (Some(t), None, None) => PredicateTest::Observes(t),
                (None, Some(t), None) => PredicateTest::Holds(t),
                (None, None, Some(t)) => PredicateTest::Completed(t),
                _ => {
                    return Err(Error::InvalidDomain(format!(
                        "predicate `{}` needs exactly one of observes/holds/completed",
                        p.id
                    )))
                }
            };
            predicates.push(Predicate {
                id: p.id,
                positive: p.positive,
                negative: p.negative,
                test,
                label: p.label,
            });
        }
        let schema = FeatureSchema::new(predicates, &file.task_completion, file.objects)?;

        let mut domain = Domain {
            id: file.id,
            description: file.description,
            agents,
            actions,
            schema,
            relevance: RelevanceKnowledge::default(),
            agent_index,
            action_index,
        };

        let mut entries = Vec::with_capacity(file.relevance.len());
        for r in &file.relevance {
            let key = domain.action_ref(&format!("{}:{}", r.agent, r.action))?;
            let features = r
                .features
                .iter()
                .map(|f| domain.schema.index_of(f))
                .collect::<Result<BTreeSet<_>>>()?;
            let action_sets = r
                .action_sets
                .iter()
                .map(|set| set.iter().map(|s| domain.action_ref(s)).collect::<Result<BTreeSet<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let union: BTreeSet<AgentId> = action_sets.iter().flat_map(|s| s.iter().map(|a| a.agent)).collect();
            if let Some(listed) = &r.agents {
                let listed = listed
                    .iter()
                    .map(|n| domain.agent_by_name(n))
                    .collect::<Result<BTreeSet<_>>>()?;
                if listed != union {
                    return Err(Error::InvalidDomain(format!(
                        "relevant agents of {}:{} differ from the agents in its action sets",
                        r.agent, r.action
                    )));
                }
            }
            entries.push((
                key,
                RelevanceEntry {
                    agents: union,
                    features,
                    action_sets,
                },
            ));
        }
        domain.relevance = RelevanceKnowledge::new(entries)?;
        Ok(domain)
    }
}

impl From<&Domain> for DomainFile {
    fn from(d: &Domain) -> Self {
        let schema = d.schema();
        DomainFile {
            id: d.id.clone(),
            description: d.description.clone(),
            objects: schema.objects().iter().cloned().collect(),
            task_completion: schema
                .task_completion()
                .iter()
                .map(|&i| schema.predicate(i).id.clone())
                .collect(),
            agents: d
                .agents()
                .iter()
                .map(|a| AgentDef {
                    name: a.name.clone(),
                    kind: (a.kind != a.name).then(|| a.kind.clone()),
                    actions: a.actions.iter().map(|&id| d.action(id).id.clone()).collect(),
                })
                .collect(),
            actions: d
                .actions()
                .iter()
                .map(|a| ActionDef {
                    id: a.id.clone(),
                    base: a.base.clone(),
                    third_person: a.third_person.clone(),
                })
                .collect(),
            predicates: schema
                .predicates()
                .iter()
                .map(|p| {
                    let (mut observes, mut holds, mut completed) = (None, None, None);
                    match &p.test {
                        PredicateTest::Observes(t) => observes = Some(t.clone()),
                        PredicateTest::Holds(t) => holds = Some(t.clone()),
                        PredicateTest::Completed(t) => completed = Some(t.clone()),
                    }
                    PredicateDef {
                        id: p.id.clone(),
                        positive: p.positive.clone(),
                        negative: p.negative.clone(),
                        observes,
                        holds,
                        completed,
                        label: p.label.clone(),
                    }
                })
                .collect(),
            relevance: d
                .relevance()
                .iter()
                .map(|(k, e)| RelevanceDef {
                    agent: d.agent(k.agent).name.clone(),
                    action: d.action(k.action).id.clone(),
                    features: e.features.iter().map(|&f| schema.predicate(f).id.clone()).collect(),
                    action_sets: e
                        .action_sets
                        .iter()
                        .map(|s| s.iter().map(|&r| d.format_action_ref(r)).collect())
                        .collect(),
                    agents: None,
                })
                .collect(),
        }
    }
}
