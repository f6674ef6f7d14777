use std::path::Path;
use std::process::{Command, Output};

use ridepool::events::parse_event_log;
use ridepool::{MetricsLedger, PipelineConfig};

fn ridepool(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridepool"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_learn_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&ridepool(&["generate", "--preset", "hotspots", "--seed", "4", "--days", "2", "--out-dir", "sc"], d));
    ok(&ridepool(
        &[
            "learn",
            "--map",
            "sc/map.csv",
            "--trips",
            "sc/history_0.csv",
            "sc/history_1.csv",
            "--values",
            "sc/values.csv",
        ],
        d,
    ));
    std::fs::write(d.join("run.conf"), "fleet_size = 60\ntheta_ctr = 45 # wider buckets\n").unwrap();
    for out_dir in ["a", "b"] {
        ok(&ridepool(
            &[
                "simulate",
                "--config",
                "run.conf",
                "--pipeline",
                "ARDL+CP+GIM",
                "--map",
                "sc/map.csv",
                "--trips",
                "sc/trips.csv",
                "--values",
                "sc/values.csv",
                "--seed",
                "3",
                "--out-dir",
                out_dir,
            ],
            d,
        ));
    }
    for f in ["events.log", "metrics.csv", "effective_config.txt"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }

    let echo = std::fs::read_to_string(d.join("a/effective_config.txt")).unwrap();
    let cfg = PipelineConfig::parse_str(&echo).unwrap();
    assert_eq!(cfg.scenario.fleet_size, 60);
    assert_eq!(cfg.scenario.theta_ctr, 45);
    assert_eq!(cfg.scenario.seed, 3);

    // metrics recomputed from the saved log match the saved summary
    let log = std::fs::read_to_string(d.join("a/events.log")).unwrap();
    let events = parse_event_log(&log).unwrap();
    let ledger = MetricsLedger::from_events(cfg.scenario.cycle_secs(), &events).unwrap();
    let mut buf = Vec::new();
    ledger.summarize(&cfg.scenario).unwrap().write_to(&mut buf).unwrap();
    assert_eq!(buf, std::fs::read(d.join("a/metrics.csv")).unwrap());
}

#[test]
fn sweep_and_timebench_on_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&ridepool(
        &[
            "sweep",
            "--synthetic",
            "hotspots",
            "--history-days",
            "1",
            "--vary",
            "fleet_size",
            "--points",
            "40,20",
            "--pipelines",
            "SMW,ARDL+CP",
            "--seeds",
            "2,1",
            "--workers",
            "2",
            "--out-dir",
            "sw",
        ],
        d,
    ));
    let csv = std::fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("fleet_size,pipeline,seed,status,requests,served"));
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1].starts_with("20,SMW,1,ok,"));
    assert!(lines[8].starts_with("40,ARDL+CP,2,ok,"));

    ok(&ridepool(
        &["timebench", "--synthetic", "common-direction", "--history-days", "1", "--set", "fleet_size=300", "--out-dir", "tb"],
        d,
    ));
    let timing = std::fs::read_to_string(d.join("tb/timing.csv")).unwrap();
    assert!(timing.starts_with("algorithm,mean_seconds_per_cycle\nCP,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.conf"), "fleet_size = 10\nwarp_speed = 9\n").unwrap();
    let out = ridepool(&["simulate", "--config", "bad.conf", "--synthetic", "hotspots"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp_speed"));

    let out = ridepool(&["simulate", "--synthetic", "hotspots", "--set", "theta_ctr=7"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta_ctr"));

    let out = ridepool(&["simulate", "--pipeline", "FASTEST", "--synthetic", "hotspots"], d);
    assert_eq!(out.status.code(), Some(1));

    let out = ridepool(&["simulate", "--map", "missing.csv", "--trips", "missing.csv"], d);
    assert_eq!(out.status.code(), Some(2));

    let out = ridepool(&["frobnicate"], d);
    assert_eq!(out.status.code(), Some(1));

    let out = ridepool(&["--help"], d);
    assert_eq!(out.status.code(), Some(0));
}
