use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use musiclab_cli::config::ScenarioFile;
use musiclab_core::scenarios::{pearson, ScenarioKind};

fn musiclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_musiclab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, scenario: &str, policy: &str, extra: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(
        &path,
        format!(
            "{scenario}\n[simulation]\nn_iterations = 300\nn_worlds = 3\nmaster_seed = 5\nrecord_stride = 50\n{extra}\n[policy]\n{policy}\n"
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn objective_of(out: &str) -> f64 {
    out.lines()
        .next()
        .unwrap()
        .strip_prefix("objective ")
        .unwrap()
        .parse()
        .unwrap()
}

const GAUSSIAN: &str = "[scenario.songs]\nkind = \"gaussian-independent\"\nn = 10\nseed = 2\n";

fn vectors(file: &ScenarioFile) -> (Vec<f64>, Vec<f64>) {
    match &file.scenario.songs {
        ScenarioKind::Explicit { appeal, quality, .. } => (appeal.clone(), quality.clone()),
        other => panic!("not explicit: {other:?}"),
    }
}

#[test]
fn gen_scenario_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.toml");
    let out_s = out.to_str().unwrap();
    let o = musiclab(&[
        "gen-scenario",
        "--kind",
        "gaussian",
        "--n",
        "50",
        "--seed",
        "7",
        "--out",
        out_s,
    ]);
    assert!(o.status.success(), "{o:?}");
    let file = ScenarioFile::load(&out).unwrap();
    let (a, q) = vectors(&file);
    assert_eq!((a.len(), q.len()), (50, 50));
    assert!(a.iter().chain(&q).all(|x| (0.0..=1.0).contains(x)));
    assert_eq!(file.metadata.as_ref().unwrap().seed, 7);

    let first = fs::read(&out).unwrap();
    let refused = musiclab(&[
        "gen-scenario",
        "--kind",
        "gaussian",
        "--n",
        "50",
        "--seed",
        "7",
        "--out",
        out_s,
    ]);
    assert_eq!(refused.status.code(), Some(1));
    let o = musiclab(&[
        "gen-scenario",
        "--kind",
        "gaussian",
        "--n",
        "50",
        "--seed",
        "7",
        "--out",
        out_s,
        "--force",
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(&out).unwrap(), first);

    let o = musiclab(&[
        "gen-scenario",
        "--kind",
        "negative-correlation",
        "--n",
        "50",
        "--seed",
        "7",
    ]);
    assert!(o.status.success());
    let file: ScenarioFile = toml::from_str(&stdout(&o)).unwrap();
    let (a, q) = vectors(&file);
    assert!(pearson(&a, &q).unwrap() <= -0.9);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(
        musiclab(&["gen-scenario", "--kind", "nope", "--n", "5"]).status.code(),
        Some(1)
    );
    assert_eq!(
        musiclab(&["gen-scenario", "--kind", "gaussian", "--n", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(musiclab(&["frobnicate"]).status.code(), Some(1));
    assert!(musiclab(&["--help"]).status.success());
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSSIAN, "kind = \"p-rank\"\ncondition = \"si\"", "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = musiclab(&[
            "simulate",
            "--config",
            &cfg,
            "--worlds",
            "1",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
    }
    for file in ["summary.json", "scenario.toml", "traces/world_000000.csv"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let summary = musiclab_cli::io::load_run(&a).unwrap();
    assert_eq!(summary.traces.len(), 1);
    assert_eq!(summary.summary.snapshot_steps, vec![0, 50, 100, 150, 200, 250, 300]);
}

#[test]
fn threads_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSSIAN, "kind = \"rand-rank\"\ncondition = \"si\"", "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(musiclab(&[
        "simulate",
        "--config",
        &cfg,
        "--threads",
        "1",
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(musiclab(&[
        "simulate",
        "--config",
        &cfg,
        "--threads",
        "3",
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    for w in 0..3 {
        let f = format!("traces/world_{w:06}.csv");
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap());
    }
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );
}

#[test]
fn worthless_songs_report_zero_downloads() {
    let dir = tempfile::tempdir().unwrap();
    let scenario =
        "[scenario.songs]\nkind = \"explicit\"\nappeal = [0.5, 0.5]\nquality = [0.0, 0.0]\nvisibility = [1.0, 0.5]\n";
    let cfg = write_config(dir.path(), scenario, "kind = \"d-rank\"\ncondition = \"si\"", "");
    let out = dir.path().join("run");
    assert!(
        musiclab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let run = musiclab_cli::io::load_run(&out).unwrap();
    assert_eq!(run.summary.final_downloads.mean, 0.0);
    assert!(run.summary.worlds.iter().all(|w| w.final_downloads == vec![0, 0]));
    // Unpredictability is undefined without downloads.
    let m = musiclab(&[
        "metrics",
        "--traces",
        out.to_str().unwrap(),
        "--out",
        dir.path().join("m").to_str().unwrap(),
    ]);
    assert_eq!(m.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_one_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        GAUSSIAN,
        "kind = \"p-rank\"\ncondition = \"si\"",
        "bogus = 1\n",
    );
    let out = dir.path().join("run");
    let o = musiclab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let cfg = write_config(
        dir.path(),
        GAUSSIAN,
        "kind = \"p-rank\"\ncondition = \"si\"",
        "refresh_rate = 0\n",
    );
    assert_eq!(
        musiclab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert!(!out.exists());
}

#[test]
fn overrides_reach_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSSIAN, "kind = \"d-rank\"\ncondition = \"si\"", "");
    let out = dir.path().join("run");
    let o = musiclab(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--policy",
        "p-rank",
        "--condition",
        "in",
        "--quality",
        "true",
        "--iterations",
        "120",
        "--refresh-rate",
        "7",
        "--worlds",
        "2",
        "--seed",
        "99",
    ]);
    assert!(o.status.success(), "{o:?}");
    let s = musiclab_cli::io::load_run(&out).unwrap().summary;
    assert_eq!(s.policy, "P-rank(IN)[true-q]");
    assert_eq!(
        (
            s.simulation.n_iterations,
            s.simulation.refresh_rate,
            s.simulation.n_worlds,
            s.simulation.master_seed
        ),
        (120, 7, 2, 99)
    );
}

#[test]
fn rank_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.toml");
    fs::write(
        &input,
        "appeal = [0.1, 0.9]\nquality = [0.9, 0.6]\nvisibility = [2.0, 1.0]\n",
    )
    .unwrap();
    let p = input.to_str().unwrap();
    let lfap = stdout(&musiclab(&["rank", "--input", p]));
    let fast = stdout(&musiclab(&["rank", "--input", p, "--solver", "parametric"]));
    assert_eq!(lfap, fast);
    assert!((objective_of(&lfap) - 0.72 / 1.1).abs() < 1e-15);
    assert!(lfap.ends_with("position,song\n1,1\n2,2\n"));

    fs::write(&input, "appeal = [0.4]\nquality = [0.35]\nvisibility = [1.0]\n").unwrap();
    let out = stdout(&musiclab(&["rank", "--input", p]));
    assert!((objective_of(&out) - 0.35).abs() < 1e-15);
    assert!(out.ends_with("position,song\n1,1\n"));

    fs::write(&input, "appeal = [0.4]\n").unwrap();
    assert_eq!(musiclab(&["rank", "--input", p]).status.code(), Some(2));
    fs::write(
        &input,
        "appeal = [0.4, 0.2]\nquality = [0.35]\nvisibility = [1.0, 0.5]\n",
    )
    .unwrap();
    assert_eq!(musiclab(&["rank", "--input", p]).status.code(), Some(2));
}

#[test]
fn rank_uses_downloads_under_social_influence() {
    // A mediocre song with many downloads is pushed to the bottom under
    // social influence, where its pull on the others is weakest.
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.toml");
    let base =
        "appeal = [1.0, 1.0, 1.0]\nquality = [0.2, 0.5, 0.8]\nvisibility = [1.0, 0.5, 0.25]\ndownloads = [0, 100, 0]\n";
    fs::write(&input, base).unwrap();
    let social = stdout(&musiclab(&["rank", "--input", input.to_str().unwrap()]));
    assert!(social.ends_with("1,3\n2,1\n3,2\n"), "{social}");
    assert!((objective_of(&social) - 13.525 / 26.75).abs() < 1e-15);
    fs::write(&input, format!("{base}condition = \"in\"\n")).unwrap();
    let independent = stdout(&musiclab(&["rank", "--input", input.to_str().unwrap()]));
    assert!(independent.ends_with("1,3\n2,2\n3,1\n"), "{independent}");
}

#[test]
fn metrics_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), GAUSSIAN, "kind = \"p-rank\"\ncondition = \"si\"", "");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = musiclab(&[
            "simulate",
            "--config",
            &cfg,
            "--worlds",
            "1",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let m = dir.path().join("m");
    let o = musiclab(&[
        "metrics",
        "--traces",
        a.to_str().unwrap(),
        "--traces",
        b.to_str().unwrap(),
        "--out",
        m.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let report: musiclab_cli::io::MetricsReport =
        serde_json::from_str(&fs::read_to_string(m.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report.n_worlds, 2);
    assert_eq!(report.unpredictability, 0.0);
    let headers = [
        ("unpredictability.csv", "song,quality,u"),
        ("market_shares.csv", "world,song,share"),
        ("quality_downloads.csv", "quality_rank,song,quality,world,downloads"),
        (
            "quality_download_summary.csv",
            "quality_rank,song,quality,p5,median,p95",
        ),
        ("estimation_error.csv", "step,mse"),
        ("download_trajectory.csv", "step,mean,ci_low,ci_high"),
    ];
    for (file, header) in headers {
        let text = fs::read_to_string(m.join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header, "{file}");
    }
    assert_eq!(
        fs::read_to_string(m.join("estimation_error.csv"))
            .unwrap()
            .lines()
            .count(),
        8
    );

    // A partial trace is named in the error.
    let trace = b.join("traces/world_000000.csv");
    let text = fs::read_to_string(&trace).unwrap();
    let cut: Vec<&str> = text.lines().take(25).collect();
    fs::write(&trace, cut.join("\n") + "\n").unwrap();
    let o = musiclab(&[
        "metrics",
        "--traces",
        a.to_str().unwrap(),
        "--traces",
        b.to_str().unwrap(),
        "--out",
        dir.path().join("m2").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("world_000000.csv"), "{err}");

    fs::remove_file(&trace).unwrap();
    let o = musiclab(&[
        "metrics",
        "--traces",
        b.to_str().unwrap(),
        "--out",
        dir.path().join("m3").to_str().unwrap(),
    ]);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("trace of world 0 is missing"), "{err}");
}

#[test]
fn hand_built_two_world_fixture() {
    // Shares (0.75, 0.25) and (0.25, 0.75): u = (0.5, 0.5), U = 0.5.
    use musiclab_core::metrics::{market_shares, unpredictability};
    use musiclab_core::quality::QualityEstimate;
    use musiclab_core::{MarketState, WorldTrace};
    let world = |id: u64, d: Vec<u64>| WorldTrace {
        world_id: id,
        snapshots: vec![],
        final_state: MarketState::from_counts(d.clone(), d, 4).unwrap(),
        estimate: QualityEstimate::from_successes(vec![0, 0], 1).unwrap(),
    };
    let r = unpredictability(&market_shares(&[world(0, vec![3, 1]), world(1, vec![1, 3])]).unwrap()).unwrap();
    assert_eq!(r.per_song, vec![0.5, 0.5]);
    assert_eq!(r.overall, 0.5);
}
