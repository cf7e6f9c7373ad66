//! Foraging-lite. Every agent has level 1. Pairs `(2k, 2k+1)` share a level-2
//! food item that only both together can collect; with an odd count the last
//! agent collects a level-1 item on its own. Agents sense `heavy_food` next to
//! food whose level exceeds their own.
//!
//! Each team owns a 5x3 strip: food `F` in the second row, members starting
//! in the third.

use super::grid::{AgentState, Effect, Job, Object, World};
use super::{action_def, agent_def, predicate_def, team_relevance, Test};
use crate::domain::file::DomainFile;
use crate::domain::Domain;
use crate::error::{Error, Result};

fn teams(n: usize) -> Vec<Vec<usize>> {
    let mut teams: Vec<Vec<usize>> = (0..n / 2).map(|k| vec![2 * k, 2 * k + 1]).collect();
    if n % 2 == 1 {
        teams.push(vec![n - 1]);
    }
    teams
}

const FEATURES: [&str; 3] = ["food_detect", "heavy_food_detect", "food_complete"];

pub fn lbf_domain(n_agents: usize) -> Result<Domain> {
    if n_agents < 2 {
        return Err(Error::UnknownDomain(format!("lbf{n_agents} (foraging needs at least 2 agents)")));
    }
    let names: Vec<String> = (0..n_agents).map(|i| format!("F{}", i + 1)).collect();
    let mut relevance = Vec::new();
    for team in teams(n_agents) {
        let team: Vec<String> = team.iter().map(|&i| names[i].clone()).collect();
        relevance.extend(team_relevance(&team, "collect", &FEATURES));
    }
    let file = DomainFile {
        id: format!("lbf{n_agents}"),
        description: format!("foraging-lite with {n_agents} agents"),
        objects: vec!["food".into(), "heavy_food".into()],
        task_completion: vec!["food_complete".into()],
        agents: names
            .iter()
            .map(|n| agent_def(n, "forager", &["move", "wait", "collect"]))
            .collect(),
        actions: vec![
            action_def("move", "move", "moves"),
            action_def("wait", "wait", "waits"),
            action_def("collect", "collect the food", "collects the food"),
        ],
        predicates: vec![
            predicate_def(FEATURES[0], "detects food", "does not detect food", Test::Observes, "food", None),
            predicate_def(
                FEATURES[1],
                "detects food above its level",
                "does not detect food above its level",
                Test::Observes,
                "heavy_food",
                None,
            ),
            predicate_def(
                FEATURES[2],
                "has collected food",
                "has not collected food",
                Test::Completed,
                "food",
                Some("food"),
            ),
        ],
        relevance,
    };
    file.into_domain()
}

pub(super) fn world(domain: &Domain, n: usize) -> World {
    let teams = teams(n);
    let collect = domain.action_by_name("collect").expect("lbf actions");
    let mut objects = Vec::new();
    let mut jobs = Vec::new();
    let mut agents: Vec<Option<AgentState>> = (0..n).map(|_| None).collect();
    for (g, team) in teams.iter().enumerate() {
        let x = 3 * g as i32;
        let level = team.len() as u32;
        objects.push(Object {
            pos: (1, x + 1),
            alive: true,
            observe: vec![("food".into(), None), ("heavy_food".into(), Some(level))],
        });
        jobs.push(Job {
            object: g,
            action: collect,
            team: team.clone(),
            effect: Effect {
                remove: true,
                complete: Some("food".into()),
                ..Default::default()
            },
            premature: true,
        });
        for (&member, &start) in team.iter().zip(&[(3, x), (3, x + 2)]) {
            agents[member] = Some(AgentState::new(start, [g]));
        }
    }
    World {
        rows: 5,
        cols: 3 * teams.len() as i32,
        walls: Default::default(),
        objects,
        jobs,
        agents: agents.into_iter().map(|a| a.expect("every agent has a team")).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_agent_is_solo() {
        assert_eq!(teams(9).last().unwrap(), &vec![8]);
        let d = lbf_domain(9).unwrap();
        let r = d.action_ref("F9:collect").unwrap();
        assert_eq!(d.relevance().entry(r).unwrap().action_sets, vec![[r].into()]);
        let r = d.action_ref("F3:collect").unwrap();
        assert_eq!(d.relevance().entry(r).unwrap().agents.len(), 2);
    }
}
