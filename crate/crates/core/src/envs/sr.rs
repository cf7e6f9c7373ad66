//! Search and rescue. A UAV and a UGV rescue the victim together, two UGVs
//! remove the obstacle, and any single agent can fight the fire, which is
//! walled off until the obstacle is gone.
//!
//! `sr3` uses a 3x6 map (S start, V victim, O obstacle, F fire, # wall):
//!
//! ```text
//! . . V . # F
//! . . . . O .
//! S . . . # .
//! ```
//!
//! `sr4` and `sr5` use a 6x6 map:
//!
//! ```text
//! S . . . . .
//! . . . . . .
//! . . . V . .
//! . . . . . .
//! # # # O # #
//! . . . . . F
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::grid::{AgentState, Cell, Effect, Job, Object, World};
use super::{action_def, agent_def, predicate_def, relevance_def, ScriptedPolicy, Test};
use crate::domain::file::DomainFile;
use crate::domain::Domain;
use crate::error::{Error, Result};

const PREDICATES: [&str; 6] = [
    "victim_detect",
    "victim_complete",
    "fire_detect",
    "fire_complete",
    "obstacle_detect",
    "obstacle_complete",
];

fn names(n: usize) -> (Vec<String>, Vec<String>) {
    match n {
        3 => (vec!["UAV".into()], vec!["UGV_1".into(), "UGV_2".into()]),
        4 => (vec!["UAV".into()], (1..=3).map(|k| format!("UGV_{k}")).collect()),
        _ => (
            vec!["UAV_1".into(), "UAV_2".into()],
            (1..=3).map(|k| format!("UGV_{k}")).collect(),
        ),
    }
}

pub fn sr_domain(n_agents: usize) -> Result<Domain> {
    if !(3..=5).contains(&n_agents) {
        return Err(Error::UnknownDomain(format!(
            "sr{n_agents} (search and rescue supports 3 to 5 agents)"
        )));
    }
    let (uavs, ugvs) = names(n_agents);
    let mut agents = Vec::new();
    for u in &uavs {
        agents.push(agent_def(u, "UAV", &["move", "wait", "rescue", "fight_fire"]));
    }
    for g in &ugvs {
        agents.push(agent_def(g, "UGV", &["move", "wait", "rescue", "remove", "fight_fire"]));
    }

    let victim = &PREDICATES[0..2];
    let fire = &PREDICATES[2..4];
    let obstacle = &PREDICATES[4..6];
    let mut relevance = Vec::new();
    for u in &uavs {
        let sets = ugvs.iter().map(|g| vec![format!("{u}:rescue"), format!("{g}:rescue")]).collect();
        relevance.push(relevance_def(u, "rescue", victim, sets));
    }
    for g in &ugvs {
        let sets = uavs.iter().map(|u| vec![format!("{u}:rescue"), format!("{g}:rescue")]).collect();
        relevance.push(relevance_def(g, "rescue", victim, sets));
        let sets = ugvs
            .iter()
            .filter(|o| *o != g)
            .map(|o| vec![format!("{g}:remove"), format!("{o}:remove")])
            .collect();
        relevance.push(relevance_def(g, "remove", obstacle, sets));
    }
    for a in uavs.iter().chain(&ugvs) {
        relevance.push(relevance_def(a, "fight_fire", fire, vec![vec![format!("{a}:fight_fire")]]));
    }

    let file = DomainFile {
        id: format!("sr{n_agents}"),
        description: format!("search and rescue with {n_agents} agents"),
        objects: vec!["victim".into(), "fire".into(), "obstacle".into()],
        task_completion: vec!["victim_complete".into(), "fire_complete".into(), "obstacle_complete".into()],
        agents,
        actions: vec![
            action_def("move", "move", "moves"),
            action_def("wait", "wait", "waits"),
            action_def("rescue", "rescue the victim", "rescues the victim"),
            action_def("remove", "remove the obstacle", "removes the obstacle"),
            action_def("fight_fire", "fight the fire", "fights the fire"),
        ],
        predicates: vec![
            predicate_def(PREDICATES[0], "detects the victim", "does not detect the victim", Test::Observes, "victim", None),
            predicate_def(
                PREDICATES[1],
                "has rescued the victim",
                "has not rescued the victim",
                Test::Completed,
                "victim",
                Some("victim"),
            ),
            predicate_def(PREDICATES[2], "detects the fire", "does not detect the fire", Test::Observes, "fire", None),
            predicate_def(
                PREDICATES[3],
                "has fought the fire",
                "has not fought the fire",
                Test::Completed,
                "fire",
                Some("fire"),
            ),
            predicate_def(
                PREDICATES[4],
                "detects the obstacle",
                "does not detect the obstacle",
                Test::Observes,
                "obstacle",
                None,
            ),
            predicate_def(
                PREDICATES[5],
                "has removed the obstacle",
                "has not removed the obstacle",
                Test::Completed,
                "obstacle",
                Some("obstacle"),
            ),
        ],
        relevance,
    };
    file.into_domain()
}

struct Layout {
    rows: i32,
    cols: i32,
    start: Cell,
    victim: Cell,
    obstacle: Cell,
    fire: Cell,
    walls: Vec<Cell>,
}

fn layout(n: usize) -> Layout {
    if n == 3 {
        Layout {
            rows: 3,
            cols: 6,
            start: (2, 0),
            victim: (0, 2),
            obstacle: (1, 4),
            fire: (0, 5),
            walls: vec![(0, 4), (2, 4)],
        }
    } else {
        Layout {
            rows: 6,
            cols: 6,
            start: (0, 0),
            victim: (2, 3),
            obstacle: (4, 3),
            fire: (5, 5),
            walls: vec![(4, 0), (4, 1), (4, 2), (4, 4), (4, 5)],
        }
    }
}

/// Per-episode roles: the rescue partner is drawn first, the two remaining
/// UGVs (or both UGVs for `sr3`) remove the obstacle, and the fire goes to the
/// last UAV.
pub(super) fn world(domain: &Domain, n: usize, policy: &ScriptedPolicy, rng: &mut ChaCha8Rng) -> World {
    let l = layout(n);
    let (uavs, ugvs) = names(n);
    let n_uav = uavs.len();
    let ugv_count = ugvs.len();

    let partner = if rng.random::<f64>() < policy.partner_bias {
        ugv_count - 1
    } else {
        rng.random_range(0..ugv_count - 1)
    };
    let removers: Vec<usize> = if ugv_count == 2 {
        vec![0, 1]
    } else {
        (0..ugv_count).filter(|&k| k != partner).collect()
    };

    let id = |name: &str| domain.action_by_name(name).expect("sr actions");
    let obstacle_object = |pos| Object {
        pos,
        alive: true,
        observe: vec![("obstacle".into(), None)],
    };
    let objects = vec![
        Object {
            pos: l.victim,
            alive: true,
            observe: vec![("victim".into(), None)],
        },
        obstacle_object(l.obstacle),
        Object {
            pos: l.fire,
            alive: true,
            observe: vec![("fire".into(), None)],
        },
    ];
    let complete = |tag: &str| Effect {
        remove: true,
        complete: Some(tag.into()),
        ..Default::default()
    };
    let firefighter = n_uav - 1;
    let jobs = vec![
        Job {
            object: 0,
            action: id("rescue"),
            team: vec![0, n_uav + partner],
            effect: complete("victim"),
            premature: false,
        },
        Job {
            object: 1,
            action: id("remove"),
            team: removers.iter().map(|k| n_uav + k).collect(),
            effect: complete("obstacle"),
            premature: true,
        },
        Job {
            object: 2,
            action: id("fight_fire"),
            team: vec![firefighter],
            effect: complete("fire"),
            premature: false,
        },
    ];

    let mut agents = Vec::with_capacity(n);
    for u in 0..n_uav {
        let mut queue = Vec::new();
        if u == 0 {
            queue.push(0);
        }
        if u == firefighter {
            queue.push(2);
        }
        agents.push(AgentState::new(l.start, queue));
    }
    for k in 0..ugv_count {
        let mut queue = Vec::new();
        if k == partner {
            queue.push(0);
        }
        if removers.contains(&k) {
            queue.push(1);
        }
        agents.push(AgentState::new(l.start, queue));
    }

    World {
        rows: l.rows,
        cols: l.cols,
        walls: l.walls.into_iter().collect(),
        objects,
        jobs,
        agents,
    }
}
