//! Template-based English rendering of query answers.
//!
//! ```text
//! when:    <Agents> <verb> when <clause>, or <clause>.
//! whynot:  <Agents> don't <verb> in this state because <clause>, or <clause>.
//! what:    <Agent> can <verb>, <verb>, or <verb> when <condition>.
//!          <Agent> is most likely to <verb> when <condition>.
//! ```
//!
//! Literals inside a clause are joined with "and". A single agent takes the
//! third-person verb form and "doesn't"; several agents take the base form.

use std::collections::BTreeMap;

use crate::domain::{ActionId, AgentId, Domain};
use crate::error::{Error, Result};
use crate::query::{Answer, BooleanAnswer, Literal, LiteralDnf, Method, Outcome, Query, QueryKind, WhatAnswer};

/// Display names and verb/predicate phrases.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhraseMap {
    agents: BTreeMap<AgentId, String>,
    /// `(positive, negative)`.
    predicates: BTreeMap<usize, (String, String)>,
    /// `(base, third person)`.
    actions: BTreeMap<ActionId, (String, String)>,
}

impl PhraseMap {
    pub fn from_domain(domain: &Domain) -> Self {
        PhraseMap {
            agents: domain.agents().iter().map(|a| (a.id, a.name.clone())).collect(),
            predicates: domain
                .schema()
                .predicates()
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p.positive.clone(), p.negative.clone())))
                .collect(),
            actions: domain
                .actions()
                .iter()
                .enumerate()
                .map(|(i, a)| (ActionId(i as u16), (a.base.clone(), a.third_person.clone())))
                .collect(),
        }
    }

    pub fn set_agent(&mut self, agent: AgentId, name: impl Into<String>) {
        self.agents.insert(agent, name.into());
    }

    pub fn set_predicate(&mut self, predicate: usize, positive: impl Into<String>, negative: impl Into<String>) {
        self.predicates.insert(predicate, (positive.into(), negative.into()));
    }

    pub fn set_action(&mut self, action: ActionId, base: impl Into<String>, third_person: impl Into<String>) {
        self.actions.insert(action, (base.into(), third_person.into()));
    }

    pub fn remove_predicate(&mut self, predicate: usize) {
        self.predicates.remove(&predicate);
    }

    fn agent(&self, a: AgentId) -> Result<&str> {
        self.agents
            .get(&a)
            .map(String::as_str)
            .ok_or_else(|| Error::MissingPhrase(format!("agent #{}", a.0)))
    }

    fn predicate(&self, p: usize, positive: bool) -> Result<&str> {
        let (pos, neg) = self
            .predicates
            .get(&p)
            .ok_or_else(|| Error::MissingPhrase(format!("predicate #{p}")))?;
        Ok(if positive { pos } else { neg })
    }

    fn action(&self, a: ActionId, third_person: bool) -> Result<&str> {
        let (base, third) = self
            .actions
            .get(&a)
            .ok_or_else(|| Error::MissingPhrase(format!("action #{}", a.0)))?;
        Ok(if third_person { third } else { base })
    }
}

/// "a", "a or b", "a, b, or c".
fn list(items: &[String], conjunction: &str) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} {conjunction} {b}"),
        [rest @ .., last] => format!("{}, {conjunction} {last}", rest.join(", ")),
    }
}

fn literal(l: &Literal, phrases: &PhraseMap) -> Result<String> {
    Ok(format!("{} {}", phrases.agent(l.agent)?, phrases.predicate(l.predicate, l.positive)?))
}

fn clauses(dnf: &LiteralDnf, phrases: &PhraseMap) -> Result<String> {
    let rendered = dnf
        .clauses
        .iter()
        .map(|c| {
            c.iter()
                .map(|l| literal(l, phrases))
                .collect::<Result<Vec<_>>>()
                .map(|ls| ls.join(" and "))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rendered.join(", or "))
}

struct Subject {
    names: String,
    singular: bool,
}

fn subject(agents: impl IntoIterator<Item = AgentId>, phrases: &PhraseMap) -> Result<Subject> {
    let names = agents
        .into_iter()
        .map(|a| phrases.agent(a).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    Ok(Subject {
        singular: names.len() == 1,
        names: list(&names, "and"),
    })
}

/// Verb phrase for the distinct query actions, third person or base form.
fn verb(q: &Query, phrases: &PhraseMap, third_person: bool) -> Result<String> {
    let mut ids: Vec<ActionId> = q.actions.iter().map(|r| r.action).collect();
    ids.sort_unstable();
    ids.dedup();
    let verbs = ids
        .iter()
        .map(|&a| phrases.action(a, third_person).map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    Ok(list(&verbs, "and"))
}

pub fn render(q: &Query, answer: &Answer, phrases: &PhraseMap) -> Result<String> {
    match answer {
        Answer::Boolean(b) => render_boolean(q, b, phrases),
        Answer::What(w) => render_what(q, w, phrases),
    }
}

/// Number of clauses in the explanation.
pub fn clause_count(answer: &BooleanAnswer) -> usize {
    match &answer.outcome {
        Outcome::Dnf(d) => d.clauses.len(),
        _ => 0,
    }
}

pub fn render_boolean(q: &Query, answer: &BooleanAnswer, phrases: &PhraseMap) -> Result<String> {
    let subj = subject(q.agents.iter().copied(), phrases)?;
    let s = &subj.names;
    let agreeing = verb(q, phrases, subj.singular)?;
    let base = verb(q, phrases, false)?;
    if q.actions.is_empty() {
        return Ok("The query names no actions.".into());
    }
    let text = match (q.kind, &answer.outcome) {
        (QueryKind::When, Outcome::Dnf(d)) if d.is_tautology() => format!("{s} always {agreeing}."),
        (QueryKind::When, Outcome::Dnf(d)) => format!("{s} {agreeing} when {}.", clauses(d, phrases)?),
        (QueryKind::WhyNot, Outcome::Dnf(d)) => {
            let dont = if subj.singular { "doesn't" } else { "don't" };
            if d.is_tautology() {
                let pronoun = if subj.singular { "it does" } else { "they do" };
                format!("{s} {dont} {base} in this state, but no feature separates it from states where {pronoun}.")
            } else {
                format!("{s} {dont} {base} in this state because {}.", clauses(d, phrases)?)
            }
        }
        (_, Outcome::NoOccurrence) | (_, Outcome::Never) => format!("{s} never {agreeing} under the policy."),
        (_, Outcome::Contradiction) => {
            let does = if subj.singular { "does" } else { "do" };
            format!("{s} {does} {base} in this state.")
        }
        (QueryKind::What, _) => return Err(Error::Precondition("what queries render with render_what".into())),
    };
    Ok(text)
}

pub fn render_what(q: &Query, answer: &WhatAnswer, phrases: &PhraseMap) -> Result<String> {
    let single = q.agents.len() == 1;
    let mut condition = Vec::new();
    for &a in &q.agents {
        let who = if single { "it".to_string() } else { phrases.agent(a)?.to_string() };
        for &f in &q.predicates {
            condition.push(format!("{who} {}", phrases.predicate(f, true)?));
        }
    }
    let condition = condition.join(" and ");
    let when = if condition.is_empty() {
        String::new()
    } else {
        format!(" when {condition}")
    };

    if answer.matching_states == 0 {
        let subj = subject(q.agents.iter().copied(), phrases)?;
        let (act, reach) = if subj.singular { ("acts", "reaches") } else { ("act", "reach") };
        return Ok(if condition.is_empty() {
            format!("{} never {act} under the policy.", subj.names)
        } else {
            format!("{} never {reach} a state{when} under the policy.", subj.names)
        });
    }

    let mut sentences = Vec::new();
    for entry in &answer.per_agent {
        let name = phrases.agent(entry.agent)?;
        let verbs = entry
            .actions
            .iter()
            .map(|&(a, _)| phrases.action(a, false).map(str::to_string))
            .collect::<Result<Vec<_>>>()?;
        let sentence = match (q.method, verbs.as_slice()) {
            (Method::NoRF, []) => format!("{name} takes no recorded action{when}."),
            (Method::WithRF, []) => format!("{name} takes no relevant action{when}."),
            (Method::NoRF, _) => format!("{name} can {}{when}.", list(&verbs, "or")),
            (Method::WithRF, [v, ..]) => format!("{name} is most likely to {v}{when}."),
        };
        sentences.push(sentence);
    }
    Ok(sentences.join(" "))
}
