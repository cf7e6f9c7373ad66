//! Most probable path and the task/cooperation summary chart.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::abstraction::{Abstraction, Initial};
use crate::domain::{Domain, JointAction};
use crate::error::{Error, Result};
use crate::scalar::Probability;

/// `states[0] -actions[0]-> states[1] ... states[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MostProbablePath<T> {
    pub states: Vec<usize>,
    pub actions: Vec<JointAction>,
    /// Sum of `ln p` over the edges (and the virtual start edge, if any).
    pub log_probability: T,
}

impl<T: Probability> MostProbablePath<T> {
    pub fn probability(&self) -> T {
        self.log_probability.exp()
    }

    /// Number of states on the path.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry<T> {
    dist: T,
    state: usize,
}

impl<T: PartialOrd> Eq for Entry<T> {}

impl<T: PartialOrd> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Entry<T> {
    // Reversed so that `BinaryHeap` pops the smallest distance, then the
    // smallest state index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .expect("distances are never NaN")
            .then_with(|| other.state.cmp(&self.state))
    }
}

/// Dijkstra on `-ln p` from the initial state to the nearest goal state.
///
/// Among equally short routes the predecessor with the smaller
/// `(state index, joint action)` wins; among equally distant goals the one
/// with the smallest index.
pub fn most_probable_path<T: Probability>(m: &Abstraction<T>) -> Result<MostProbablePath<T>> {
    let n = m.states().len();
    let mut dist: Vec<Option<T>> = vec![None; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    match m.initial() {
        Initial::State(s) => {
            dist[*s] = Some(T::zero());
            heap.push(Entry { dist: T::zero(), state: *s });
        }
        Initial::Distribution(d) => {
            let total: u64 = d.iter().map(|(_, c)| c).sum();
            for &(s, c) in d {
                let w = T::ratio(c, total).neg_ln();
                dist[s] = Some(w);
                heap.push(Entry { dist: w, state: s });
            }
        }
    }
    let mut done = vec![false; n];
    let mut explored = 0;
    let mut goal: Option<usize> = None;
    while let Some(Entry { dist: d, state: s }) = heap.pop() {
        if done[s] {
            continue;
        }
        if let Some(g) = goal {
            if d > dist[g].expect("goal was reached") {
                break;
            }
        }
        done[s] = true;
        explored += 1;
        if m.is_goal(s) {
            if goal.is_none() {
                goal = Some(s);
            }
            continue;
        }
        for (k, t) in m.outgoing(s).iter().enumerate() {
            if done[t.to] {
                continue;
            }
            let nd = d + t.probability.neg_ln();
            let better = match dist[t.to] {
                None => true,
                Some(old) if nd < old => true,
                Some(old) if nd == old => {
                    let (ps, pk) = pred[t.to].expect("reached states have a predecessor");
                    let (old_state, old_action) = (ps, &m.outgoing(ps)[pk].action);
                    (s, &t.action) < (old_state, old_action)
                }
                _ => false,
            };
            if better {
                dist[t.to] = Some(nd);
                pred[t.to] = Some((s, k));
                heap.push(Entry { dist: nd, state: t.to });
            }
        }
    }
    let goal = goal.ok_or(Error::UnreachableGoal { explored })?;

    let mut states = vec![goal];
    let mut actions = Vec::new();
    let mut cur = goal;
    while let Some((p, k)) = pred[cur] {
        actions.push(m.outgoing(p)[k].action.clone());
        states.push(p);
        cur = p;
    }
    states.reverse();
    actions.reverse();
    Ok(MostProbablePath {
        states,
        actions,
        log_probability: -dist[goal].expect("goal was reached"),
    })
}

/// Columns of completed tasks; `columns[c][i]` holds the task predicates
/// agent `i` completed at step `steps[c]` of the path.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SummaryChart {
    pub n_agents: usize,
    pub steps: Vec<usize>,
    pub columns: Vec<Vec<BTreeSet<usize>>>,
}

impl SummaryChart {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Agents that share task `task` in column `column`.
    pub fn cooperating(&self, column: usize, task: usize) -> BTreeSet<usize> {
        self.columns[column]
            .iter()
            .enumerate()
            .filter(|(_, y)| y.contains(&task))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Rising edges of `tasks` along `path`; at `t = 0` every satisfied task counts.
pub fn chart_from_path<T: Probability>(m: &Abstraction<T>, path: &MostProbablePath<T>, tasks: &[usize]) -> SummaryChart {
    let n = m.n_agents();
    let mut chart = SummaryChart {
        n_agents: n,
        ..Default::default()
    };
    for (t, &s) in path.states.iter().enumerate() {
        let cur = m.state(s);
        let prev = (t > 0).then(|| m.state(path.states[t - 1]));
        let y: Vec<BTreeSet<usize>> = (0..n)
            .map(|i| {
                tasks
                    .iter()
                    .copied()
                    .filter(|&f| cur.agents()[i].holds(f) && prev.is_none_or(|p| !p.agents()[i].holds(f)))
                    .collect()
            })
            .collect();
        if y.iter().any(|c| !c.is_empty()) {
            chart.steps.push(t);
            chart.columns.push(y);
        }
    }
    chart
}

pub fn summarize<T: Probability>(m: &Abstraction<T>, tasks: &[usize]) -> Result<SummaryChart> {
    let path = most_probable_path(m)?;
    Ok(chart_from_path(m, &path, tasks))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChartFormat {
    #[default]
    Chart,
    Csv,
}

impl FromStr for ChartFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chart" => Ok(ChartFormat::Chart),
            "csv" => Ok(ChartFormat::Csv),
            other => Err(Error::format("chart format", format!("`{other}` (expected chart or csv)"))),
        }
    }
}

/// Rows are agents, columns `T1..Tk`; a cell lists the task labels completed
/// there, joined by `+`.
pub fn render_chart(z: &SummaryChart, domain: &Domain, format: ChartFormat) -> String {
    let mut header = vec!["agent".to_string()];
    header.extend((1..=z.columns.len()).map(|c| format!("T{c}")));
    let mut rows = vec![header];
    if !z.columns.is_empty() {
        for i in 0..z.n_agents {
            let mut row = vec![domain.agents()[i].name.clone()];
            for col in &z.columns {
                let labels: Vec<&str> = col[i].iter().map(|&f| domain.schema().label(f)).collect();
                row.push(labels.join("+"));
            }
            rows.push(row);
        }
    }
    let mut out = String::new();
    match format {
        ChartFormat::Csv => {
            for row in rows {
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        ChartFormat::Chart => {
            let widths: Vec<usize> = (0..rows[0].len())
                .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
                .collect();
            for row in rows {
                let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            }
        }
    }
    out
}
