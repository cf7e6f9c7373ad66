mod common;

use common::*;
use marlx_core::abstraction::{build_abstraction, AbstractionBuilder, BuildOptions, Initial, Normalization};
use marlx_core::envs::{read_trace, simulate, write_trace, ScriptedPolicy};
use marlx_core::summarize::{most_probable_path, render_chart, summarize, ChartFormat};
use marlx_core::{Error, PolicyAbstraction};
use proptest::prelude::*;

#[test]
fn files_reproduce_in_process_results() {
    let (d, m) = abstraction("sr3", 120);
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    write_trace(&trace, &d, samples("sr3", 120)).unwrap();
    let from_file: PolicyAbstraction =
        build_abstraction(read_trace(&trace, &d).unwrap(), d.schema(), BuildOptions::default()).unwrap();
    assert_eq!(from_file, m);

    let saved = dir.path().join("m.mmdp");
    m.save(&saved).unwrap();
    let loaded = PolicyAbstraction::load(&saved).unwrap();
    assert_eq!(loaded, m);
    let tasks = d.schema().task_completion();
    assert_eq!(
        render_chart(&summarize(&loaded, tasks).unwrap(), &d, ChartFormat::Csv),
        render_chart(&summarize(&m, tasks).unwrap(), &d, ChartFormat::Csv)
    );
}

#[test]
fn truncated_save_is_rejected() {
    let (_, m) = abstraction("lbf2", 20);
    let text = m.to_text().unwrap();
    let cut = &text[..text.len() / 2];
    assert!(PolicyAbstraction::from_text(cut).is_err());
    let tampered = text.replacen("transitions", "transitions ", 1);
    assert!(matches!(PolicyAbstraction::from_text(&tampered), Err(Error::Checksum(_)) | Err(Error::Format { .. })));
}

#[test]
fn merged_builders_equal_one_pass() {
    let d = marlx_core::envs::domain_by_id("rware4").unwrap();
    let all = samples("rware4", 40);
    let (a, b) = all.split_at(all.len() / 3);
    let mut left = AbstractionBuilder::new(d.schema());
    a.iter().for_each(|s| left.add(s).unwrap());
    let mut right = AbstractionBuilder::new(d.schema());
    b.iter().for_each(|s| right.add(s).unwrap());
    left.merge(right).unwrap();
    let merged: PolicyAbstraction = left.finish(BuildOptions::default()).unwrap();
    let direct: PolicyAbstraction = build_abstraction(all, d.schema(), BuildOptions::default()).unwrap();
    assert_eq!(merged, direct);
}

#[test]
fn empty_trace_is_an_error() {
    let d = marlx_core::envs::domain_by_id("sr3").unwrap();
    let r: marlx_core::Result<PolicyAbstraction> = build_abstraction(Vec::new(), d.schema(), BuildOptions::default());
    assert!(matches!(r, Err(Error::EmptyTrace)));
}

#[test]
fn schema_of_another_domain_is_rejected() {
    let sr3 = marlx_core::envs::domain_by_id("sr3").unwrap();
    let r: marlx_core::Result<PolicyAbstraction> =
        build_abstraction(samples("rware2", 2), sr3.schema(), BuildOptions::default());
    assert!(matches!(r, Err(Error::SchemaMismatch(_))));
}

#[test]
fn state_action_normalization_sums_per_action() {
    let d = marlx_core::envs::domain_by_id("sr3").unwrap();
    let opts = BuildOptions {
        normalization: Normalization::StateAction,
        ..Default::default()
    };
    let m: PolicyAbstraction = build_abstraction(samples("sr3", 50), d.schema(), opts).unwrap();
    for s in 0..m.states().len() {
        for a in m.enabled_actions(s) {
            let total: f64 = m.outgoing(s).iter().filter(|t| &t.action == a).map(|t| t.probability).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn f32_abstractions_agree_with_f64() {
    let d = marlx_core::envs::domain_by_id("sr3").unwrap();
    let s = samples("sr3", 100);
    let wide: PolicyAbstraction = build_abstraction(s.clone(), d.schema(), BuildOptions::default()).unwrap();
    let narrow: marlx_core::abstraction::Abstraction<f32> =
        build_abstraction(s, d.schema(), BuildOptions::default()).unwrap();
    assert_eq!(most_probable_path(&wide).unwrap().states, most_probable_path(&narrow).unwrap().states);
}

#[test]
fn differing_starts_need_a_virtual_initial_state() {
    let d = marlx_core::envs::domain_by_id("sr3").unwrap();
    let all = samples("sr3", 5);
    let encode = |x: &[marlx_core::domain::ConcreteAgentState]| marlx_core::domain::encode_joint_state(x, d.schema()).unwrap();
    let start = encode(&all[0].state);
    // Start episode 1 at its first step whose abstract state differs.
    let cut = all
        .iter()
        .position(|s| s.episode == 1 && encode(&s.state) != start)
        .unwrap();
    let first = all.iter().position(|s| s.episode == 1).unwrap();
    let mut shifted: Vec<_> = all[..first].to_vec();
    for s in all[cut..].iter().filter(|s| s.episode == 1) {
        let mut s = s.clone();
        s.step -= (cut - first) as u64;
        shifted.push(s);
    }
    let strict: marlx_core::Result<PolicyAbstraction> =
        build_abstraction(shifted.clone(), d.schema(), BuildOptions::default());
    assert!(matches!(strict, Err(Error::MultipleInitialStates { count: 2 })));
    let opts = BuildOptions {
        virtual_init: true,
        ..Default::default()
    };
    let m: PolicyAbstraction = build_abstraction(shifted, d.schema(), opts).unwrap();
    assert!(matches!(m.initial(), Initial::Distribution(v) if v.len() == 2));
    most_probable_path(&m).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn probabilities_are_normalized(seed in 0u64..1000, id in prop::sample::select(vec!["sr3", "rware2", "lbf4"])) {
        let d = marlx_core::envs::domain_by_id(id).unwrap();
        let s: Vec<_> = simulate(id, &ScriptedPolicy::new(seed), 60, 3).unwrap().collect();
        let m: PolicyAbstraction = build_abstraction(s.clone(), d.schema(), BuildOptions::default()).unwrap();
        m.check_invariants().unwrap();
        let mut total = 0;
        for st in 0..m.states().len() {
            let out = m.outgoing(st);
            let counted: u64 = out.iter().map(|t| t.count).sum();
            prop_assert_eq!(counted, m.visits(st));
            total += counted;
            if !out.is_empty() {
                let p: f64 = out.iter().map(|t| t.probability).sum();
                prop_assert!((p - 1.0).abs() < 1e-12);
            }
        }
        prop_assert_eq!(total, s.len() as u64);
        prop_assert_eq!(PolicyAbstraction::from_text(&m.to_text().unwrap()).unwrap(), m);
    }

    #[test]
    fn chart_columns_follow_rising_edges(seed in 0u64..500) {
        let d = toy_domain();
        let (init, rows) = random_rows(seed, 30);
        let m = toy_abstraction(&d, init, &rows);
        if let Ok(path) = most_probable_path(&m) {
            let chart = marlx_core::summarize::chart_from_path(&m, &path, m.task_completion());
            let mut rising = 0;
            for w in path.states.windows(2) {
                let (a, b) = (m.state(w[0]), m.state(w[1]));
                if (0..2).any(|i| !a.agents()[i].holds(0) && b.agents()[i].holds(0)) {
                    rising += 1;
                }
            }
            let first = m.state(path.states[0]);
            if (0..2).any(|i| first.agents()[i].holds(0)) {
                rising += 1;
            }
            prop_assert_eq!(chart.len(), rising);
        }
    }
}
