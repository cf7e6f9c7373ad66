//! `bench`: per-domain abstraction size, summary size and query timings for
//! NoRF and WithRF, printed as an aligned table and optionally as CSV.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use marlx_core::abstraction::{build_abstraction, BuildOptions, Initial};
use marlx_core::boolmin::MinimizeError;
use marlx_core::domain::{ActionRef, AgentId, Domain};
use marlx_core::envs::{simulate, ScriptedPolicy};
use marlx_core::nlg::clause_count;
use marlx_core::query::{answer, Answer, Method, Query, QueryOptions};
use marlx_core::summarize::{chart_from_path, most_probable_path};
use marlx_core::PolicyAbstraction;

use crate::{deadline, load_domain, parse_predicates, parse_state, timeout_report};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Built-in domain ids, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "sr3", env = "MARLX_DOMAIN")]
    domain: Vec<String>,
    #[arg(long, default_value_t = 300, env = "MARLX_EPISODES")]
    episodes: u64,
    #[arg(long, default_value_t = 200, env = "MARLX_MAX_STEPS")]
    max_steps: u64,
    /// Seconds per query before minimization gives up.
    #[arg(long, default_value_t = 3600.0, env = "MARLX_TIMEOUT")]
    timeout: f64,
    /// Also write the table as CSV.
    #[arg(long, env = "MARLX_CSV")]
    csv: Option<PathBuf>,
    /// `agent:action` pairs of the when query.
    #[arg(long, value_delimiter = ',', env = "MARLX_WHEN_ACTIONS")]
    when_actions: Vec<String>,
    /// `agent:action` pairs of the whynot query.
    #[arg(long, value_delimiter = ',', env = "MARLX_WHYNOT_ACTIONS")]
    whynot_actions: Vec<String>,
    /// Query state of the whynot query; the initial state by default.
    #[arg(long, env = "MARLX_WHYNOT_STATE")]
    whynot_state: Option<String>,
    #[arg(long, value_delimiter = ',', env = "MARLX_WHAT_AGENTS")]
    what_agents: Vec<String>,
    #[arg(long, value_delimiter = ',', env = "MARLX_WHAT_PREDICATES")]
    what_predicates: Vec<String>,
}

/// Default queries per family: the first agent's task and the two-agent
/// task of the first team.
fn defaults(domain: &Domain) -> (Vec<String>, Vec<String>, Option<String>, String, String) {
    let family: String = domain.id.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    let first = domain.agents()[0].name.clone();
    let v = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match family.as_str() {
        "sr" => (
            vec![format!("{first}:rescue")],
            v(&["UGV_1:remove", "UGV_2:remove"]),
            (domain.n_agents() == 3).then(|| "1,0,0".to_string()),
            first,
            "victim_detect".into(),
        ),
        "rware" => (v(&["R1:load"]), v(&["R1:deliver", "R2:deliver"]), None, first, "shelf_detect".into()),
        _ => (v(&["F1:collect"]), v(&["F1:collect", "F2:collect"]), None, first, "food_detect".into()),
    }
}

struct Queries {
    when: Vec<ActionRef>,
    whynot: Vec<ActionRef>,
    whynot_state: Option<String>,
    what_agents: Vec<AgentId>,
    what_predicates: Vec<usize>,
}

fn queries(a: &BenchArgs, domain: &Domain) -> Result<Queries> {
    let (when, whynot, state, agent, predicate) = defaults(domain);
    let pick = |given: &[String], fallback: Vec<String>| -> Vec<String> {
        if given.is_empty() {
            fallback
        } else {
            given.to_vec()
        }
    };
    let refs = |specs: Vec<String>| -> Result<Vec<ActionRef>> {
        Ok(specs
            .iter()
            .map(|s| domain.action_ref(s.trim()))
            .collect::<marlx_core::Result<_>>()?)
    };
    Ok(Queries {
        when: refs(pick(&a.when_actions, when))?,
        whynot: refs(pick(&a.whynot_actions, whynot))?,
        whynot_state: a.whynot_state.clone().or(state),
        what_agents: pick(&a.what_agents, vec![agent])
            .iter()
            .map(|n| domain.agent_by_name(n.trim()))
            .collect::<marlx_core::Result<_>>()?,
        what_predicates: parse_predicates(domain, &pick(&a.what_predicates, vec![predicate]))?,
    })
}

/// `|E|` and time of one query, or the reason it produced none.
enum Cell {
    Done { clauses: usize, ms: f64 },
    Timeout,
    /// Too many Boolean variables to attempt minimization.
    Guardrail,
}

impl Cell {
    fn texts(&self) -> [String; 2] {
        match self {
            Cell::Done { clauses, ms } => [clauses.to_string(), format!("{ms:.1}")],
            Cell::Timeout => ["-".into(), "timeout".into()],
            Cell::Guardrail => ["-".into(), "guardrail".into()],
        }
    }
}

fn run_query(q: &Query, m: &PolicyAbstraction, domain: &Domain, timeout: f64) -> Result<Cell> {
    let options = QueryOptions {
        budget: deadline(timeout)?,
    };
    let start = Instant::now();
    let result = answer(q, m, domain, &options);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(Answer::Boolean(b)) => Ok(Cell::Done {
            clauses: clause_count(&b),
            ms,
        }),
        Ok(Answer::What(w)) => Ok(Cell::Done {
            clauses: w.per_agent.iter().map(|p| p.actions.len()).sum(),
            ms,
        }),
        Err(e) => match timeout_report(&e) {
            Some(report) => {
                info!("{}: {report}", domain.id);
                match e {
                    marlx_core::Error::Minimize(MinimizeError::TooManyVariables { .. }) => Ok(Cell::Guardrail),
                    _ => Ok(Cell::Timeout),
                }
            }
            None => Err(e.into()),
        },
    }
}

const HEADER: [&str; 18] = [
    "domain",
    "N",
    "|S|",
    "|T|",
    "|rho|",
    "|Z|",
    "when_norf_E",
    "when_norf_ms",
    "when_withrf_E",
    "when_withrf_ms",
    "whynot_norf_E",
    "whynot_norf_ms",
    "whynot_withrf_E",
    "whynot_withrf_ms",
    "what_norf_E",
    "what_norf_ms",
    "what_withrf_E",
    "what_withrf_ms",
];

fn bench_domain(a: &BenchArgs, id: &str, seed: u64) -> Result<Vec<String>> {
    let domain = load_domain(id)?;
    let samples: Vec<_> = simulate(id, &ScriptedPolicy::new(seed), a.max_steps, a.episodes)?.collect();
    let m: PolicyAbstraction = build_abstraction(samples, domain.schema(), BuildOptions::default())?;
    let start = Instant::now();
    let path = most_probable_path(&m)?;
    let chart = chart_from_path(&m, &path, domain.schema().task_completion());
    info!("{id}: summarized in {:.1} ms", start.elapsed().as_secs_f64() * 1e3);

    let qs = queries(a, &domain)?;
    let state = match &qs.whynot_state {
        Some(s) => parse_state(&domain, &m, s)?,
        None => match m.initial() {
            Initial::State(s) => m.state(*s).clone(),
            Initial::Distribution(d) => m.state(d[0].0).clone(),
        },
    };
    let mut all = Vec::new();
    for method in [Method::NoRF, Method::WithRF] {
        all.push(Query::when(qs.when.clone(), method));
    }
    for method in [Method::NoRF, Method::WithRF] {
        all.push(Query::whynot(qs.whynot.clone(), state.clone(), method));
    }
    for method in [Method::NoRF, Method::WithRF] {
        all.push(Query::what(qs.what_agents.clone(), qs.what_predicates.clone(), method));
    }
    let cells: Vec<Result<Cell>> = std::thread::scope(|scope| {
        let handles: Vec<_> = all
            .iter()
            .map(|q| {
                let (m, domain) = (&m, &domain);
                scope.spawn(move || run_query(q, m, domain, a.timeout))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("query thread panicked")).collect()
    });

    let mut row = vec![
        id.to_string(),
        domain.n_agents().to_string(),
        m.states().len().to_string(),
        m.transitions().len().to_string(),
        path.len().to_string(),
        format!("{}x{}", domain.n_agents(), chart.len()),
    ];
    for c in cells {
        row.extend(c.with_context(|| format!("benchmarking {id}"))?.texts());
    }
    Ok(row)
}

fn aligned(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..HEADER.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([HEADER[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(HEADER.to_vec());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn csv(rows: &[Vec<String>]) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn run(a: &BenchArgs, seed: u64) -> Result<ExitCode> {
    let mut rows = Vec::new();
    for id in &a.domain {
        rows.push(bench_domain(a, id.trim(), seed)?);
    }
    print!("{}", aligned(&rows));
    if let Some(path) = &a.csv {
        std::fs::write(path, csv(&rows)).with_context(|| format!("writing `{}`", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}
