use wimax_sim::config::load_config;
use wimax_sim::stats::{compare, emit_csv, load_csv, summarize};
use wimax_sim::{build_scenario, run, ScenarioId, ScenarioSummary, SimConfig, Simulation};

fn short(id: ScenarioId, seconds: f64) -> SimConfig {
    let mut cfg = build_scenario(id);
    cfg.duration_s = seconds;
    cfg.warmup_s = 1.0;
    cfg
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let records = run(&short(ScenarioId::AmcAHarq, 4.0)).unwrap();
    emit_csv(&records, &path).unwrap();
    assert_eq!(load_csv(&path).unwrap(), records);
}

#[test]
fn emit_csv_reports_path() {
    let records = run(&short(ScenarioId::Qpsk12, 1.0)).unwrap();
    let err = emit_csv(&records, std::path::Path::new("/nonexistent/dir/x.csv")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/x.csv"), "{err}");
}

#[test]
fn config_text_matches_preset() {
    let cfg = load_config("scenario = amc-a-harq\n").unwrap();
    assert_eq!(cfg, build_scenario(ScenarioId::AmcAHarq));
    assert_eq!(cfg.digest(), build_scenario(ScenarioId::AmcAHarq).digest());
    assert_ne!(cfg.digest(), build_scenario(ScenarioId::AmcA).digest());
}

#[test]
fn summary_skips_warmup() {
    let cfg = short(ScenarioId::AmcB, 3.0);
    let records = run(&cfg).unwrap();
    let s = summarize(&records, 1.0).unwrap();
    assert_eq!(s.frames, 400);
    assert!(summarize(&records, 10.0).is_err());
}

#[test]
fn summary_text_is_reproducible() {
    let cfg = short(ScenarioId::AmcA, 3.0);
    let a = ScenarioSummary::from_records(&cfg, &run(&cfg).unwrap()).unwrap();
    let b = ScenarioSummary::from_records(&cfg, &run(&cfg).unwrap()).unwrap();
    assert_eq!(a.to_text(), b.to_text());
}

#[test]
fn segments_are_conserved() {
    for id in ScenarioId::ALL {
        let mut cfg = short(id, 20.0);
        cfg.channel.bler_override = Some(0.2);
        let mut sim = Simulation::new(cfg).unwrap();
        while !sim.is_finished() {
            sim.step().unwrap();
        }
        let t = sim.totals();
        assert!(t.sink_segments <= t.segments_delivered);
        assert!(t.segments_delivered <= t.segments_generated);
        assert!(t.blocks_lost <= t.blocks_sent);
    }
}

#[test]
fn comparison_of_short_runs_flags_someone() {
    let summaries: Vec<ScenarioSummary> = ScenarioId::ALL
        .iter()
        .map(|&id| {
            let cfg = short(id, 5.0);
            ScenarioSummary::from_records(&cfg, &run(&cfg).unwrap()).unwrap()
        })
        .collect();
    let report = compare(&summaries);
    assert_eq!(report.rows.len(), 4);
    assert!(!report.pareto_optimal().is_empty());
    assert_eq!(report.rows[0].rank, 1);
}
