//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use common::*;
use marlx_core::abstraction::{build_abstraction, BuildOptions};
use marlx_core::boolmin::{eval_dnf, minimize, Budget, MinimizeError, Minterm};
use marlx_core::domain::{encode_joint_state, AbstractJointState, ActionRef, Domain, JointAction};
use marlx_core::envs::{domain_by_id, read_trace, write_trace, DOMAIN_IDS};
use marlx_core::nlg::{render, PhraseMap};
use marlx_core::query::{
    answer, answer_what, answer_when, answer_whynot, relevancy_filter, when_partition, Criterion, Method,
    Query, QueryOptions, VariableMap,
};
use marlx_core::summarize::{most_probable_path, summarize};
use marlx_core::{Error, PolicyAbstraction};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn refs(d: &Domain, specs: &[&str]) -> BTreeSet<ActionRef> {
    specs.iter().map(|s| d.action_ref(s).unwrap()).collect()
}

const SR3_WHEN: &str = "UAV rescues the victim when UAV detects the victim and UGV_1 detects the victim, \
                           or UAV detects the victim and UGV_2 detects the victim.";
const SR3_WHYNOT: &str = "UGV_1 and UGV_2 don't remove the obstacle in this state because UGV_1 does not \
                             detect the obstacle and UGV_2 does not detect the obstacle.";
const SR3_WHAT: &str = "UAV is most likely to rescue the victim when it detects the victim.";

fn reference_sentences() -> Outcome {
    let start = Instant::now();
    let (d, m) = abstraction("sr3", SR3_EPISODES);
    let phrases = PhraseMap::from_domain(&d);
    let uav = d.agent_by_name("UAV").unwrap();
    let victim = d.schema().index_of("victim_detect").unwrap();
    let opts = QueryOptions::default();
    let queries = [
        (Query::when(refs(&d, &["UAV:rescue"]), Method::WithRF), SR3_WHEN),
        (
            Query::whynot(
                refs(&d, &["UGV_1:remove", "UGV_2:remove"]),
                d.parse_joint_state("1,0,0").unwrap(),
                Method::WithRF,
            ),
            SR3_WHYNOT,
        ),
        (Query::what([uav], [victim], Method::WithRF), SR3_WHAT),
    ];
    for (q, expected) in &queries {
        let a = answer(q, &m, &d, &opts).map_err(|e| e.to_string())?;
        let text = render(q, &a, &phrases).map_err(|e| e.to_string())?;
        check(&text == expected, || format!("got {text:?}, expected {expected:?}"))?;
    }
    let norf = answer_what(&Query::what([uav], [victim], Method::NoRF), &m, &d).map_err(|e| e.to_string())?;
    let listed: BTreeSet<&str> = norf.per_agent[0]
        .actions
        .iter()
        .map(|&(a, _)| d.action(a).id.as_str())
        .collect();
    check(listed == BTreeSet::from(["rescue", "move", "wait"]), || {
        format!("NoRF what lists {listed:?}")
    })?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("3 WithRF sentences exact, NoRF what = {listed:?}, {elapsed:.2?}"))
}

/// Recounts the trace with the feature encoder and compares against the
/// stored transitions.
fn replay_matches(d: &Domain, m: &PolicyAbstraction, trace: &[marlx_core::envs::TraceSample]) -> Result<(), String> {
    let mut counts: HashMap<(AbstractJointState, JointAction, AbstractJointState), u64> = HashMap::new();
    let mut visits: HashMap<AbstractJointState, u64> = HashMap::new();
    for s in trace {
        let x = encode_joint_state(&s.state, d.schema()).map_err(|e| e.to_string())?;
        let y = encode_joint_state(&s.next, d.schema()).map_err(|e| e.to_string())?;
        *visits.entry(x.clone()).or_default() += 1;
        *counts.entry((x, s.action.clone(), y)).or_default() += 1;
    }
    check(counts.len() == m.transitions().len(), || {
        format!("{} replayed transitions, {} stored", counts.len(), m.transitions().len())
    })?;
    for t in m.transitions() {
        let key = (m.state(t.from).clone(), t.action.clone(), m.state(t.to).clone());
        let witnessed = counts.get(&key).copied().unwrap_or(0);
        check(witnessed >= 1, || format!("transition {} -> {} never observed", key.0, key.2))?;
        check(witnessed == t.count, || format!("count {} vs replay {witnessed}", t.count))?;
        let p = witnessed as f64 / visits[&key.0] as f64;
        check(t.probability == p, || format!("probability {} vs replay {p}", t.probability))?;
    }
    Ok(())
}

fn soundness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut worst = Duration::ZERO;
    let mut total_samples = 0;
    for id in DOMAIN_IDS {
        let d = domain_by_id(id).unwrap();
        let mut episodes = 50;
        let trace = loop {
            let t = samples(id, episodes);
            if t.len() >= 10_000 {
                break t;
            }
            episodes *= 2;
        };
        let path = dir.path().join(format!("{id}.jsonl"));
        write_trace(&path, &d, trace.clone()).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let loaded = read_trace(&path, &d).map_err(|e| e.to_string())?;
        let m: PolicyAbstraction =
            build_abstraction(loaded.iter().cloned(), d.schema(), BuildOptions::default()).map_err(|e| e.to_string())?;
        replay_matches(&d, &m, &loaded).map_err(|e| format!("{id}: {e}"))?;
        let elapsed = start.elapsed();
        check(elapsed < Duration::from_secs(10), || format!("{id}: {elapsed:?} on {} steps", loaded.len()))?;
        worst = worst.max(elapsed);
        total_samples += loaded.len();
    }
    Ok(format!(
        "{} domains, {total_samples} trace lines, slowest build+replay {worst:.2?}",
        DOMAIN_IDS.len()
    ))
}

/// Best probability product over simple paths from `init` that stop at the
/// first goal state, by exhaustive depth-first enumeration.
fn brute_force_best(init: u32, rows: &[Row]) -> Option<f64> {
    let mut visits: BTreeMap<u32, u64> = BTreeMap::new();
    let mut edge: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut per_key: BTreeMap<(u32, usize, u32), u64> = BTreeMap::new();
    for &(s, a, t, c) in rows {
        *visits.entry(s).or_default() += c;
        *per_key.entry((s, a, t)).or_default() += c;
    }
    for (&(s, _, t), &c) in &per_key {
        let p = c as f64 / visits[&s] as f64;
        let e = edge.entry((s, t)).or_insert(0.0);
        *e = e.max(p);
    }
    let mut succ: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    for (&(s, t), &p) in &edge {
        succ.entry(s).or_default().push((t, p));
    }
    fn dfs(
        s: u32,
        p: f64,
        on_path: &mut BTreeSet<u32>,
        succ: &BTreeMap<u32, Vec<(u32, f64)>>,
        best: &mut Option<f64>,
    ) {
        if is_goal_bits(s) {
            *best = Some(best.map_or(p, |b| b.max(p)));
            return;
        }
        for &(t, q) in succ.get(&s).map(Vec::as_slice).unwrap_or(&[]) {
            if on_path.insert(t) {
                dfs(t, p * q, on_path, succ, best);
                on_path.remove(&t);
            }
        }
    }
    let mut best = None;
    dfs(init, 1.0, &mut BTreeSet::from([init]), &succ, &mut best);
    best
}

fn most_probable_path_oracle() -> Outcome {
    let start = Instant::now();
    let d = toy_domain();
    let mut reachable = 0;
    let mut max_err: f64 = 0.0;
    for seed in 0..50 {
        let (init, rows) = random_rows(seed, 40);
        let m = toy_abstraction(&d, init, &rows);
        check(m.states().len() <= 40 + 1, || format!("seed {seed}: {} states", m.states().len()))?;
        let oracle = brute_force_best(init, &rows);
        match (most_probable_path(&m), oracle) {
            (Ok(path), Some(best)) => {
                let err = (path.probability() - best).abs();
                check(err <= 1e-12, || format!("seed {seed}: dijkstra {} vs brute force {best}", path.probability()))?;
                check(m.is_goal(*path.states.last().unwrap()), || format!("seed {seed}: path ends off goal"))?;
                max_err = max_err.max(err);
                reachable += 1;
            }
            (Err(Error::UnreachableGoal { .. }), None) => {}
            (got, want) => return Err(format!("seed {seed}: dijkstra {got:?}, brute force {want:?}")),
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("50 MMDPs ({reachable} with a reachable goal), max error {max_err:e}, {elapsed:.2?}"))
}

/// Smallest cover of `ones` by cubes that avoid `zeros`, minimizing the cube
/// count and then the literal count, by exhaustive search over all cubes.
fn exhaustive_min_dnf(ones: &[u32], zeros: &[u32], n: usize) -> (usize, u32) {
    if ones.is_empty() {
        return (0, 0);
    }
    let mut cubes = Vec::new();
    for code in 0..3u32.pow(n as u32) {
        let (mut care, mut values, mut c) = (0u32, 0u32, code);
        for v in 0..n {
            match c % 3 {
                0 => care |= 1 << v,
                1 => {
                    care |= 1 << v;
                    values |= 1 << v;
                }
                _ => {}
            }
            c /= 3;
        }
        let covers = |m: u32| (m ^ values) & care == 0;
        if zeros.iter().all(|&z| !covers(z)) {
            let mask: u32 = ones.iter().enumerate().filter(|(_, &o)| covers(o)).fold(0, |acc, (i, _)| acc | 1 << i);
            if mask != 0 {
                cubes.push((mask, care.count_ones()));
            }
        }
    }
    let full = (1u32 << ones.len()) - 1;
    for k in 1..=ones.len() {
        let mut best: Option<u32> = None;
        let mut pick = vec![0usize; k];
        fn search(
            cubes: &[(u32, u32)],
            from: usize,
            depth: usize,
            pick: &mut Vec<usize>,
            full: u32,
            best: &mut Option<u32>,
        ) {
            if depth == pick.len() {
                let mask = pick.iter().fold(0, |acc, &i| acc | cubes[i].0);
                if mask == full {
                    let lits = pick.iter().map(|&i| cubes[i].1).sum();
                    *best = Some(best.map_or(lits, |b: u32| b.min(lits)));
                }
                return;
            }
            for i in from..cubes.len() {
                pick[depth] = i;
                search(cubes, i + 1, depth + 1, pick, full, best);
            }
        }
        search(&cubes, 0, 0, &mut pick, full, &mut best);
        if let Some(lits) = best {
            return (k, lits);
        }
    }
    unreachable!("the minterms themselves always cover")
}

fn minimizer_oracle() -> Outcome {
    let start = Instant::now();
    let mut cases = [0usize; 4];
    for n in [2usize, 3] {
        let size = 1u32 << n;
        for code in 0..3u32.pow(size) {
            let (mut ones, mut zeros, mut c) = (Vec::new(), Vec::new(), code);
            for m in 0..size {
                match c % 3 {
                    0 => ones.push(m),
                    1 => zeros.push(m),
                    _ => {}
                }
                c /= 3;
            }
            let to_minterms = |v: &[u32]| v.iter().map(|&m| Minterm(m)).collect::<Vec<_>>();
            let dnf = minimize(&to_minterms(&ones), &to_minterms(&zeros), n).map_err(|e| e.to_string())?;
            for &o in &ones {
                check(eval_dnf(&dnf, Minterm(o)), || format!("V={n} case {code}: one {o} uncovered"))?;
            }
            for &z in &zeros {
                check(!eval_dnf(&dnf, Minterm(z)), || format!("V={n} case {code}: zero {z} covered"))?;
            }
            let (k, lits) = exhaustive_min_dnf(&ones, &zeros, n);
            let got_lits: u32 = dnf.iter().map(|i| i.literal_count()).sum();
            check(dnf.len() == k && got_lits == lits, || {
                format!("V={n} case {code}: {} cubes/{got_lits} literals, minimum {k}/{lits}", dnf.len())
            })?;
            cases[n] += 1;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(20), || format!("took {elapsed:?}"))?;
    Ok(format!("{} V=2 and {} V=3 partitions exact, {elapsed:.2?}", cases[2], cases[3]))
}

/// Single-action queries for the first agent and cooperation-set queries.
fn when_fixtures(d: &Domain) -> Vec<BTreeSet<ActionRef>> {
    let mut out = Vec::new();
    for set in d.relevance().iter().flat_map(|(_, e)| e.action_sets.iter()) {
        for &a in set {
            let single = BTreeSet::from([a]);
            if !out.contains(&single) {
                out.push(single);
            }
        }
        if !out.contains(set) {
            out.push(set.clone());
        }
    }
    out
}

fn withrf_subset() -> Outcome {
    let mut fixtures = 0;
    for id in DOMAIN_IDS {
        let (d, m) = abstraction(id, 100);
        for q in when_fixtures(&d) {
            let filter = relevancy_filter(&q, &d).map_err(|e| e.to_string())?;
            let with = when_partition(&m, Criterion::AnyOf(&filter.action_sets));
            let without = when_partition(&m, Criterion::All(&q));
            check(with.targets.is_subset(&without.targets), || {
                format!("{id} {q:?}: WithRF targets not within NoRF targets")
            })?;
            let (vw, vn) = (VariableMap::filtered(&filter).len(), VariableMap::all(&d).len());
            check(vw <= vn, || format!("{id}: {vw} WithRF variables > {vn} NoRF variables"))?;
            fixtures += 1;
        }
    }
    Ok(format!("{fixtures} when fixtures over {} domains", DOMAIN_IDS.len()))
}

fn team_queries(d: &Domain, m: &PolicyAbstraction) -> Vec<Query> {
    let set = d
        .relevance()
        .iter()
        .flat_map(|(_, e)| e.action_sets.iter())
        .max_by_key(|s| s.len())
        .expect("domain has relevance")
        .clone();
    let first = *set.iter().next().unwrap();
    let s0 = match m.initial() {
        marlx_core::abstraction::Initial::State(s) => m.state(*s).clone(),
        other => panic!("unexpected initial {other:?}"),
    };
    let mut out = Vec::new();
    for method in [Method::WithRF, Method::NoRF] {
        out.push(Query::when([first], method));
        out.push(Query::whynot(set.clone(), s0.clone(), method));
    }
    out
}

fn scalability() -> Outcome {
    let mut report = Vec::new();
    for id in ["sr4", "rware4", "lbf4", "rware9", "lbf9", "rware19", "lbf19"] {
        let (d, m) = abstraction(id, 100);
        let n = d.n_agents();
        let mut withrf_max = Duration::ZERO;
        let mut norf_note = String::new();
        for q in team_queries(&d, &m) {
            let timeout = match (q.method, n >= 9) {
                (Method::WithRF, _) => 10,
                (Method::NoRF, true) => 60,
                (Method::NoRF, false) => 5,
            };
            let opts = QueryOptions {
                budget: Budget::with_deadline(Instant::now() + Duration::from_secs(timeout)),
            };
            let start = Instant::now();
            let result = match q.kind {
                marlx_core::query::QueryKind::When => answer_when(&q, &m, &d, &opts),
                _ => answer_whynot(&q, &m, &d, &opts),
            };
            let elapsed = start.elapsed();
            match (q.method, result) {
                (Method::WithRF, Ok(_)) => {
                    check(elapsed < Duration::from_secs(10), || format!("{id}: WithRF took {elapsed:?}"))?;
                    withrf_max = withrf_max.max(elapsed);
                }
                (Method::WithRF, Err(e)) => return Err(format!("{id}: WithRF failed: {e}")),
                (Method::NoRF, Err(Error::Minimize(e))) if n >= 9 => match e {
                    MinimizeError::TooManyVariables { variables, .. } => norf_note = format!("guardrail({variables})"),
                    MinimizeError::Aborted { .. } => norf_note = "timeout".into(),
                    other => return Err(format!("{id}: NoRF {other}")),
                },
                (Method::NoRF, Ok(_)) if n >= 9 => return Err(format!("{id}: NoRF answered within {elapsed:?}")),
                (Method::NoRF, Ok(_)) => norf_note = format!("{elapsed:.1?}"),
                (Method::NoRF, Err(_)) => norf_note = "timeout(5s)".into(),
            }
        }
        report.push(format!("{id}: WithRF {withrf_max:.1?}, NoRF {norf_note}"));
    }
    Ok(report.join("; "))
}

fn summarization_latency() -> Outcome {
    let mut worst = (Duration::ZERO, 0);
    let mut checked = 0;
    let mut run = |m: &PolicyAbstraction| -> Result<(), String> {
        if m.states().len() > 1000 {
            return Ok(());
        }
        let start = Instant::now();
        let chart = summarize(m, m.task_completion());
        let elapsed = start.elapsed();
        match chart {
            Ok(_) | Err(Error::UnreachableGoal { .. }) => {}
            Err(e) => return Err(e.to_string()),
        }
        check(elapsed < Duration::from_secs(1), || format!("{} states took {elapsed:?}", m.states().len()))?;
        if elapsed > worst.0 {
            worst = (elapsed, m.states().len());
        }
        checked += 1;
        Ok(())
    };
    for id in DOMAIN_IDS {
        run(&abstraction(id, 300).1)?;
    }
    let d = toy_domain();
    for seed in 0..50 {
        let (init, rows) = random_rows(seed, 64);
        run(&toy_abstraction(&d, init, &rows))?;
    }
    Ok(format!("{checked} abstractions, slowest {:.2?} at |S|={}", worst.0, worst.1))
}

fn cooperation_chart() -> Outcome {
    let (d, m) = abstraction("sr3", SR3_EPISODES);
    let z = summarize(&m, d.schema().task_completion()).map_err(|e| e.to_string())?;
    let task = |id: &str| d.schema().index_of(id).unwrap();
    let agents = |names: &[&str]| -> BTreeSet<usize> { names.iter().map(|n| d.agent_by_name(n).unwrap().0).collect() };
    let expected = [
        (task("victim_complete"), agents(&["UAV", "UGV_2"])),
        (task("obstacle_complete"), agents(&["UGV_1", "UGV_2"])),
        (task("fire_complete"), agents(&["UAV"])),
    ];
    check(z.len() == expected.len(), || format!("{} columns", z.len()))?;
    for (col, (t, who)) in expected.iter().enumerate() {
        for &other in d.schema().task_completion() {
            let got: BTreeSet<usize> = z.cooperating(col, other);
            let want = if other == *t { who.clone() } else { BTreeSet::new() };
            check(got == want, || format!("column {col}, task {other}: {got:?} vs {want:?}"))?;
        }
    }
    Ok("victim {UAV, UGV_2}; obstacle {UGV_1, UGV_2}; fire {UAV}".into())
}

fn main() {
    let criteria: [Check; 8] = [
        ("reference sentences", reference_sentences),
        ("abstraction soundness", soundness),
        ("most probable path", most_probable_path_oracle),
        ("minimizer exactness", minimizer_oracle),
        ("withrf within norf", withrf_subset),
        ("scalability separation", scalability),
        ("summarization latency", summarization_latency),
        ("cooperation chart", cooperation_chart),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name}: {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
