//! Warehouse-lite. Agents work in designated pairs `(2k, 2k+1)`; with an odd
//! count the last agent joins the last pair. A team loads its shelf together,
//! carries it to the team's delivery zone and delivers it together.
//!
//! Each team owns a 5x3 strip of the map (shelf `S`, delivery zone `D`,
//! starting cells `a`, `b`, and `c` for a third member):
//!
//! ```text
//! . . .
//! . S .
//! a . b
//! c . .
//! . D .
//! ```

use super::grid::{AgentState, Effect, Job, Object, World};
use super::{action_def, agent_def, predicate_def, team_relevance, Test};
use crate::domain::file::DomainFile;
use crate::domain::Domain;
use crate::error::{Error, Result};

pub(super) fn teams(n: usize) -> Vec<Vec<usize>> {
    let mut teams: Vec<Vec<usize>> = (0..n / 2).map(|k| vec![2 * k, 2 * k + 1]).collect();
    if n % 2 == 1 {
        teams.last_mut().expect("at least one pair").push(n - 1);
    }
    teams
}

fn agent_name(i: usize) -> String {
    format!("R{}", i + 1)
}

pub fn rware_domain(n_agents: usize) -> Result<Domain> {
    if n_agents < 2 {
        return Err(Error::UnknownDomain(format!("rware{n_agents} (warehouse needs at least 2 agents)")));
    }
    let names: Vec<String> = (0..n_agents).map(agent_name).collect();
    let mut relevance = Vec::new();
    for team in teams(n_agents) {
        let team: Vec<String> = team.iter().map(|&i| names[i].clone()).collect();
        relevance.extend(team_relevance(&team, "load", &["shelf_detect", "shelf_loaded"]));
        relevance.extend(team_relevance(&team, "deliver", &["shelf_loaded", "delivery_complete"]));
    }
    let file = DomainFile {
        id: format!("rware{n_agents}"),
        description: format!("warehouse-lite with {n_agents} agents"),
        objects: vec!["shelf".into(), "delivery".into()],
        task_completion: vec!["delivery_complete".into()],
        agents: names
            .iter()
            .map(|n| agent_def(n, "robot", &["move", "wait", "load", "deliver"]))
            .collect(),
        actions: vec![
            action_def("move", "move", "moves"),
            action_def("wait", "wait", "waits"),
            action_def("load", "load the shelf", "loads the shelf"),
            action_def("deliver", "deliver the shelf", "delivers the shelf"),
        ],
        predicates: vec![
            predicate_def("shelf_detect", "detects a shelf", "does not detect a shelf", Test::Observes, "shelf", None),
            predicate_def("shelf_loaded", "carries a shelf", "does not carry a shelf", Test::Holds, "shelf", None),
            predicate_def(
                "delivery_complete",
                "has delivered a shelf",
                "has not delivered a shelf",
                Test::Completed,
                "delivery",
                Some("delivery"),
            ),
        ],
        relevance,
    };
    file.into_domain()
}

pub(super) fn world(domain: &Domain, n: usize) -> World {
    let teams = teams(n);
    let load = domain.action_by_name("load").expect("rware actions");
    let deliver = domain.action_by_name("deliver").expect("rware actions");
    let mut objects = Vec::new();
    let mut jobs = Vec::new();
    let mut agents: Vec<Option<AgentState>> = (0..n).map(|_| None).collect();
    for (g, team) in teams.iter().enumerate() {
        let x = 3 * g as i32;
        let shelf = objects.len();
        objects.push(Object {
            pos: (1, x + 1),
            alive: true,
            observe: vec![("shelf".into(), None)],
        });
        objects.push(Object {
            pos: (4, x + 1),
            alive: true,
            observe: Vec::new(),
        });
        let load_job = jobs.len();
        jobs.push(Job {
            object: shelf,
            action: load,
            team: team.clone(),
            effect: Effect {
                remove: true,
                hold: Some("shelf".into()),
                ..Default::default()
            },
            premature: true,
        });
        jobs.push(Job {
            object: shelf + 1,
            action: deliver,
            team: team.clone(),
            effect: Effect {
                release: Some("shelf".into()),
                complete: Some("delivery".into()),
                ..Default::default()
            },
            premature: true,
        });
        let starts = [(2, x), (2, x + 2), (3, x)];
        for (&member, &start) in team.iter().zip(&starts) {
            agents[member] = Some(AgentState::new(start, [load_job, load_job + 1]));
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
    fn team_assignment() {
        assert_eq!(teams(2), vec![vec![0, 1]]);
        assert_eq!(teams(4), vec![vec![0, 1], vec![2, 3]]);
        let t = teams(19);
        assert_eq!(t.len(), 9);
        assert_eq!(t[8], vec![16, 17, 18]);
    }

    #[test]
    fn relevance_uses_teams() {
        let d = rware_domain(19).unwrap();
        let r = d.action_ref("R19:load").unwrap();
        let e = d.relevance().entry(r).unwrap();
        assert_eq!(e.agents.len(), 3);
        assert_eq!(e.action_sets.len(), 1);
        assert_eq!(d.schema().len(), 3);
    }
}
