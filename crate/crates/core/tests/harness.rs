use ce2nd::harness::{self, compare, parse_config, run_replication, write_comparison, write_experiment, MeanSpec, Theta0Source};
use ce2nd::{load_config, run_experiment, Error, RunConfig, Schedule, ScheduleIndex};
use std::fs;
use std::path::{Path, PathBuf};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small_ce2nd(reps: usize, budget: u64) -> RunConfig {
    let text = format!(
        r#"{{
            "name": "small",
            "algorithm": "ce2nd",
            "objective": {{"name": "griewank", "m": 3}},
            "schedules": {{"rho": 0.1, "eps1": 0.9, "r": 0.5,
                           "beta": {{"constant": 0.1}}, "c": {{"constant": 0.2}},
                           "lambda": {{"constant": 0.01}}}},
            "theta0": {{"mu0": 5.0, "q": 4.0}},
            "replications": {reps},
            "base_seed": 11,
            "budget": {{"max_evals": {budget}}},
            "stride": 25
        }}"#
    );
    parse_config(&text, Path::new("inline.json")).unwrap()
}

fn small_gmcce(reps: usize, budget: u64) -> RunConfig {
    let text = format!(
        r#"{{
            "algorithm": "gmcce",
            "objective": {{"name": "griewank", "m": 3}},
            "monte_carlo": {{"n0": 50, "eta": 1.01, "rho": 0.1, "r": 0.1, "alpha": {{"constant": 0.5}}}},
            "theta0": {{"mu0": 5.0, "q": 4.0}},
            "replications": {reps},
            "budget": {{"max_evals": {budget}}}
        }}"#
    );
    parse_config(&text, Path::new("inline.json")).unwrap()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn shipped_griewank_config_has_the_reference_settings() {
    let loaded = load_config(&configs_dir().join("griewank_ce2nd.json")).unwrap();
    let c = loaded.config;
    let s = c.schedules.as_ref().unwrap();
    assert_eq!(s.r, 1.0);
    assert_eq!(s.eps1, 0.9);
    assert_eq!(s.rho, 0.001);
    assert_eq!(s.c, Schedule::Constant(0.06));
    assert_eq!(s.beta, Schedule::power(0.52));
    assert_eq!(s.lambda, Schedule::power_indexed(3.0, ScheduleIndex::UpdateTime));
    let t0 = c.theta0_spec().unwrap();
    assert_eq!(t0.mu0, MeanSpec::Broadcast(50.0));
    assert_eq!(t0.q, 100.0);
    assert_eq!(c.objective.m, Some(200));
}

#[test]
fn theta0_fragment_parses_alone() {
    let spec = harness::load_theta0_fragment(&configs_dir().join("griewank_theta0.json")).unwrap();
    assert_eq!(spec.mu0, MeanSpec::Broadcast(50.0));
    assert_eq!(spec.q, 100.0);
    let theta = spec.build(4).unwrap();
    assert_eq!(theta.mu(), &[50.0; 4]);
    assert_eq!(theta.sigma()[(2, 2)], 100.0);
    assert_eq!(theta.sigma()[(0, 1)], 0.0);
}

#[test]
fn every_shipped_config_loads() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with("_theta0.json") || !name.ends_with(".json") {
            continue;
        }
        let c = load_config(&path).unwrap_or_else(|e| panic!("{name}: {e}")).config;
        assert!(matches!(c.theta0, Theta0Source::Inline(_)), "{name}");
        n += 1;
    }
    assert!(n >= 20, "only {n} configs found");
}

#[test]
fn missing_rho_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = read(&configs_dir().join("levy_ce2nd-desk.json")).replace("\"rho\": 0.1,", "");
    assert!(!text.contains("\"rho\""));
    let path = dir.path().join("no_rho.json");
    fs::write(&path, text).unwrap();
    match load_config(&path) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "rho"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn unknown_key_and_bad_value_are_named() {
    let base = read(&configs_dir().join("levy_ce2nd-desk.json"));
    let typo = base.replacen("\"eps1\"", "\"epsilon1\"", 1);
    match parse_config(&typo, Path::new("typo.json")) {
        Err(Error::Config { key, .. }) => assert_eq!(key, "epsilon1"),
        other => panic!("expected a config error, got {other:?}"),
    }
    let bad = base.replacen("\"eps1\": 0.9", "\"eps1\": 1.5", 1);
    let c = parse_config(&bad, Path::new("bad.json")).unwrap();
    match c.validate() {
        Err(Error::Config { key, .. }) => assert_eq!(key, "eps1"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn malformed_json_is_a_parse_error() {
    match parse_config("{\"algorithm\": ", Path::new("broken.json")) {
        Err(Error::Parse(msg)) => assert!(msg.contains("broken.json")),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn zero_budget_gives_one_summary_row() {
    let cfg = small_ce2nd(1, 0);
    let result = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_experiment(&result, dir.path()).unwrap();
    let summary = read(&dir.path().join("summary.csv"));
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let fields: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(fields[5], "0", "n_evals column");
    assert_eq!(result.replications[0].n_evals, 0);
    let trace = read(&dir.path().join("rep_000.csv"));
    assert_eq!(trace.lines().count(), 2, "header plus the initial record");
}

fn deterministic_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.csv")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    for cfg in [small_ce2nd(3, 4000), small_gmcce(3, 4000)] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_experiment(&run_experiment(&cfg).unwrap(), a.path()).unwrap();
        let mut single = cfg.clone();
        single.workers = Some(1);
        write_experiment(&run_experiment(&single).unwrap(), b.path()).unwrap();
        let fa = deterministic_files(a.path());
        let fb = deterministic_files(b.path());
        assert_eq!(fa.len(), 5);
        assert_eq!(fa, fb);
        assert!(fa.iter().all(|(_, bytes)| !bytes.contains(&b'\r')));
    }
}

#[test]
fn replication_trace_ignores_other_replications() {
    let many = run_experiment(&small_ce2nd(4, 3000)).unwrap();
    for k in 0..4 {
        let alone = run_replication(&small_ce2nd(1, 3000), k).unwrap();
        assert_eq!(alone.trace, many.replications[k].trace);
        assert_eq!(alone.seed, 11 + k as u64);
    }
}

#[test]
fn summary_is_recomputable_from_traces() {
    let cfg = small_ce2nd(3, 5000);
    let result = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_experiment(&result, dir.path()).unwrap();
    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let target: f64 = result.target.unwrap();
    let mut finals = Vec::new();
    for row in summary.records() {
        let row = row.unwrap();
        let k: usize = row[0].parse().unwrap();
        let trace = ce2nd::trace::read_trace(fs::File::open(dir.path().join(format!("rep_{k:03}.csv"))).unwrap()).unwrap();
        let last = trace.last().unwrap();
        let final_h: f64 = row[3].parse().unwrap();
        let best_h: f64 = row[4].parse().unwrap();
        assert_eq!(final_h, last.h_of_mu);
        assert_eq!(best_h, trace.iter().map(|r| r.h_of_mu).fold(f64::NEG_INFINITY, f64::max));
        assert_eq!(row[5].parse::<u64>().unwrap(), last.n_evals);
        assert_eq!(row[6].parse::<u64>().unwrap(), last.n_updates);
        assert_eq!(row[7] == *"true", final_h >= target && row[9].is_empty());
        let hit = trace.iter().find(|r| r.h_of_mu >= target).map(|r| r.n_evals.to_string());
        assert_eq!(row[8].to_string(), hit.unwrap_or_default());
        finals.push(final_h);
    }
    let mut agg = csv::Reader::from_path(dir.path().join("aggregate.csv")).unwrap();
    let a = agg.records().next().unwrap().unwrap();
    assert_eq!(a[5].parse::<f64>().unwrap(), harness::median(&finals));
}

#[test]
fn comparing_a_config_with_itself_gives_identical_groups() {
    let cfg = small_ce2nd(2, 2000);
    let mut twin = cfg.clone();
    twin.name = Some("twin".into());
    let report = compare(&[cfg, twin], 2000, Some(-0.5)).unwrap();
    assert_eq!(report.entries.len(), 2);
    let (a, b) = (&report.entries[0], &report.entries[1]);
    for (ra, rb) in a.result.replications.iter().zip(&b.result.replications) {
        assert_eq!(ra.trace, rb.trace);
    }
    assert_eq!(a.evals_to_target, b.evals_to_target);
    let dir = tempfile::tempdir().unwrap();
    write_comparison(&report, dir.path()).unwrap();
    let traces = read(&dir.path().join("traces.csv"));
    assert!(traces.starts_with("config,algorithm,replication,n_evals,H_of_mu\n"));
    let small = traces.lines().filter(|l| l.starts_with("small,")).count();
    let twin = traces.lines().filter(|l| l.starts_with("twin,")).count();
    assert_eq!(small, twin);
    assert!(dir.path().join("cumulative_samples.csv").exists());
    assert!(dir.path().join("ranking.csv").exists());
}

#[test]
fn compare_overrides_budget_and_rejects_other_objectives() {
    let report = compare(&[small_ce2nd(1, 10), small_gmcce(1, 10)], 1500, Some(0.0)).unwrap();
    for e in &report.entries {
        assert!(e.result.replications[0].n_evals >= 1500);
        assert!(e.result.replications[0].n_evals <= 1500 + 60);
    }
    let mut other = small_gmcce(1, 10);
    other.objective.m = Some(4);
    match compare(&[small_ce2nd(1, 10), other], 100, Some(0.0)) {
        Err(Error::MismatchedObjectives(_)) => {}
        r => panic!("expected mismatched objectives, got {:?}", r.map(|r| r.target)),
    }
}

#[test]
fn divergence_is_recorded_not_fatal() {
    let text = r#"{
        "algorithm": "ce2nd",
        "objective": {"name": "griewank", "m": 3},
        "schedules": {"rho": 0.1, "eps1": 0.9, "r": 0.5, "beta": {"constant": 0.1},
                      "c": {"constant": 0.2}, "lambda": {"constant": 0.01}},
        "theta0": {"mu0": 0.0, "q": 1e308},
        "budget": {"max_evals": 2000}
    }"#;
    let cfg = parse_config(text, Path::new("huge.json")).unwrap();
    let result = run_experiment(&cfg).unwrap();
    let rep = &result.replications[0];
    assert!(rep.error.as_deref().unwrap().contains("non-finite"), "{:?}", rep.error);
    assert_eq!(rep.stop, ce2nd::StopReason::Diverged);
    assert_eq!(result.is_success(rep), Some(false));
}
