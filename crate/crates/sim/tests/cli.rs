use std::fs;
use std::process::{Command, Output};

fn ristrain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ristrain")).args(args).output().expect("binary runs")
}

const SMALL: &[&str] = &["--trials", "3", "--snr-db", "-5,5", "--seed", "4"];

fn with(cmd: &str, extra: &[&str]) -> Vec<String> {
    let mut v = vec![cmd.to_string()];
    v.extend(SMALL.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ristrain(&refs)
}

#[test]
fn sweep_is_reproducible() {
    let a = run(&with("sweep", &[]));
    let b = run(&with("sweep", &[]));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,estimator,snr_db,trial,analytic_nmse,empirical_nmse,iterations,wall_ms"
    );
    // 5 schemes x 2 SNRs x 3 trials
    assert_eq!(lines.count(), 30);
}

#[test]
fn seed_changes_the_output() {
    let a = run(&with("sweep", &[]));
    let b = run(&with("sweep", &["--seed", "5"]));
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn output_file_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let plot = dir.path().join("plot.dat");
    let out = run(&with(
        "sweep",
        &["--scheme", "proposed,naive", "--output", csv.to_str().unwrap(), "--plot-data", plot.to_str().unwrap()],
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);

    let plot = fs::read_to_string(&plot).unwrap();
    let blocks: Vec<&str> = plot.split("\n\n\n").collect();
    assert_eq!(blocks.len(), 2);
    assert!(blocks[0].starts_with("# index 0: scheme=proposed"));
    assert!(blocks[1].starts_with("# index 1: scheme=naive"));
    for b in blocks {
        let data: Vec<&str> = b.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2);
        assert!(data.iter().all(|l| l.split(' ').count() == 3));
    }
}

#[test]
fn bad_config_file_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "# desk run\nk = 2\nalpha = fast\n").unwrap();
    let out = ristrain(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("alpha"), "{err}");
}

#[test]
fn bad_flag_value_exits_with_config_code() {
    let out = ristrain(&["sweep", "--k", "two"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ristrain(&["sweep", "--b", "3", "--m", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_passes_on_defaults() {
    let out = ristrain(&["validate", "--snr-db", "0,10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 7);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn converge_reports_both_variants() {
    let out = run(&with("converge", &["--estimator", "lmmse"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("estimator,snr_db,variant,iteration,objective,mm_calls,wall_ms\n"));
    let variants: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert!(variants.contains(&"plain") && variants.contains(&"accelerated"), "{variants:?}");
}

#[test]
fn design_dumps_training_and_pattern() {
    let out = ristrain(&["design", "--snr-db", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 1);
}
