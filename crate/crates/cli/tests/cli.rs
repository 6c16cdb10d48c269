use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vaxnet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vaxnet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn with_villages() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, n, seed) in [("alpha.txt", "180", "1"), ("beta.txt", "200", "2"), ("gamma.txt", "160", "3")] {
        ok(vaxnet(&["synth", "--n-nodes", n, "--seed", seed, "-o", name], dir.path()));
    }
    dir
}

#[test]
fn metrics_prints_header_and_one_row() {
    let dir = with_villages();
    let out = ok(vaxnet(&["metrics", "alpha.txt"], dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("village_id,Number of network members"));
    assert!(lines[1].starts_with("alpha,180,"));
}

#[test]
fn truncating_at_zero_leaves_only_isolates() {
    let dir = with_villages();
    let out = ok(vaxnet(&["truncate", "alpha.txt", "--k", "0", "--seed", "5"], dir.path()));
    assert_eq!(out.lines().count(), 180);
    assert!(out.lines().all(|l| l.starts_with("#@node ")));
}

#[test]
fn simulate_is_reproducible_and_respects_vaccination() {
    let dir = with_villages();
    let args = ["simulate", "beta.txt", "--runs", "5", "--seed", "9"];
    let a = ok(vaxnet(&args, dir.path()));
    assert_eq!(a, ok(vaxnet(&args, dir.path())));
    assert_eq!(a.lines().count(), 6);
    assert!(a.starts_with("village_id,run,cumulative_incidence,n_seeds,seed_caused_infections,duration_steps"));

    let edges = fs::read_to_string(dir.path().join("beta.txt")).unwrap();
    let mut ids: Vec<&str> = edges
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split_whitespace())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    // vaccinate everyone except two nodes; only seeds can be infected
    fs::write(dir.path().join("vax.txt"), ids[2..].join("\n")).unwrap();
    let out = ok(vaxnet(
        &["simulate", "beta.txt", "--runs", "3", "--seed-fraction", "0.005", "--vaccinated", "vax.txt"],
        dir.path(),
    ));
    for line in out.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2], (1.0 / 200.0).to_string());
        assert_eq!(f[4], "0");
    }
}

#[test]
fn vaccinate_lists_the_quota_and_rejects_bad_flags() {
    let dir = with_villages();
    let out = ok(vaxnet(
        &["vaccinate", "alpha.txt", "--strategy", "high-degree", "--cutoff", "6", "--seed", "1"],
        dir.path(),
    ));
    assert!(out.starts_with("# strategy=high-degree"));
    assert_eq!(out.lines().count(), 2 + 18);
    for (args, why) in [
        (vec!["--strategy", "random", "--cutoff", "3"], "cutoff on random"),
        (vec!["--strategy", "nomination", "--fcd-k", "3"], "fcd-k on nomination"),
        (vec!["--strategy", "high-degree"], "missing cutoff"),
        (vec!["--strategy", "bogus"], "unknown strategy"),
        (vec!["--strategy", "random", "--coverage", "1.5"], "coverage"),
    ] {
        let mut full = vec!["vaccinate", "alpha.txt"];
        full.extend(args);
        assert!(!vaxnet(&full, dir.path()).status.success(), "{why}");
    }
}

#[test]
fn missing_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = vaxnet(&["metrics", "nope.txt"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
}

const CAMPAIGN: &str = r#"
villages = ["gamma.txt", "alpha.txt", "beta.txt"]
runs_per_cell = 8
master_seed = 11
output_dir = "OUT"

[[strategies]]
strategy = "none"

[[strategies]]
strategy = "random"

[[strategies]]
strategy = "top-degree"
fcd_k = 2

[[strategies]]
strategy = "top-betweenness"
"#;

fn run_campaign_into(dir: &Path, out: &str, threads: &str) -> Output {
    fs::write(dir.join(format!("{out}.toml")), CAMPAIGN.replace("OUT", out)).unwrap();
    Command::new(env!("CARGO_BIN_EXE_vaxnet"))
        .args(["campaign", "--config", &format!("{out}.toml")])
        .env("VAXNET_THREADS", threads)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn campaign_output_is_byte_identical_across_reruns_and_worker_counts() {
    let dir = with_villages();
    ok(run_campaign_into(dir.path(), "a", "1"));
    ok(run_campaign_into(dir.path(), "b", "3"));
    for file in ["runs.csv", "summary.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let runs = fs::read_to_string(dir.path().join("a/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 4 * 8);
    // villages are ordered by file name
    let first_ids: Vec<&str> = runs.lines().skip(1).step_by(32).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(first_ids, ["alpha", "beta", "gamma"]);
}

#[test]
fn campaign_summary_matches_an_independent_recomputation() {
    let dir = with_villages();
    ok(run_campaign_into(dir.path(), "s", "2"));
    let runs = fs::read_to_string(dir.path().join("s/runs.csv")).unwrap();
    let mut per_village: BTreeMap<(String, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for line in runs.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        per_village
            .entry((f[1].into(), f[2].into()))
            .or_default()
            .entry(f[0].into())
            .or_default()
            .push(f[4].parse().unwrap());
    }
    let summary = fs::read_to_string(dir.path().join("s/summary.csv")).unwrap();
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let villages = &per_village[&(f[0].to_string(), f[1].to_string())];
        let means: Vec<f64> = villages
            .values()
            .map(|xs| 100.0 * xs.iter().sum::<f64>() / xs.len() as f64)
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0)).sqrt();
        let half = 1.96 * sd / (means.len() as f64).sqrt();
        let reported: Vec<f64> = f[4..7].iter().map(|x| x.parse().unwrap()).collect();
        assert!((reported[0] - m).abs() < 1e-4, "{line}");
        assert!((reported[1] - (m - half)).abs() < 1e-4, "{line}");
        assert!((reported[2] - (m + half)).abs() < 1e-4, "{line}");
    }
}

#[test]
fn campaign_with_a_bad_config_exits_nonzero() {
    let dir = with_villages();
    fs::write(dir.path().join("bad.toml"), "villages = [\"alpha.txt\"]\nruns_per_cell = 0\nmaster_seed = 1\nstrategies = []\n").unwrap();
    assert!(!vaxnet(&["campaign", "--config", "bad.toml"], dir.path()).status.success());
    fs::write(
        dir.path().join("missing.toml"),
        "villages = [\"nowhere.txt\"]\nruns_per_cell = 2\nmaster_seed = 1\n[[strategies]]\nstrategy = \"none\"\n",
    )
    .unwrap();
    assert!(!vaxnet(&["campaign", "--config", "missing.toml"], dir.path()).status.success());
}

#[test]
fn netgen_writes_samples_and_a_trace() {
    let dir = with_villages();
    ok(vaxnet(
        &[
            "netgen", "--target", "gamma.txt", "--n-samples", "2", "--burn-in", "20000", "--thinning", "500",
            "--seed", "4", "--output-dir", "ens",
        ],
        dir.path(),
    ));
    let ens = dir.path().join("ens");
    assert!(ens.join("gamma_0000.txt").exists() && ens.join("gamma_0001.txt").exists());
    let trace = fs::read_to_string(ens.join("convergence.csv")).unwrap();
    assert!(trace.starts_with("step,mean_degree,dmm_distance,accepted\n"));
    assert_eq!(trace.lines().count(), 1 + 1 + (20_000 + 2 * 500) / 500);
}

#[test]
fn regress_writes_a_subset_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from(
        "incidence,density,size,mean_degree,sd_degree,assortativity,lcc_fraction,mean_betweenness,network_id,village_id\n",
    );
    for i in 0..40u32 {
        let x = f64::from(i);
        let chars = [
            0.01 + 0.001 * (x * 1.3).sin(),
            100.0 + (x * 7.0) % 13.0,
            8.0 + (x * 0.7).cos(),
            5.0 + (x * 1.9).sin(),
            0.2 + 0.05 * (x * 2.3).cos(),
            0.9 + 0.05 * (x * 0.3).sin(),
            0.004 + 0.001 * (x * 1.1).cos(),
        ];
        let y = 40.0 + 5.0 * chars[2] + (x * 3.7).sin();
        let fields: Vec<String> = chars.iter().map(|c| c.to_string()).collect();
        csv.push_str(&format!("{y},{},n{:02},v{}\n", fields.join(","), i, i % 4));
    }
    fs::write(dir.path().join("data.csv"), csv).unwrap();
    let out = ok(vaxnet(&["regress", "data.csv", "--folds", "5", "--max-subset", "1"], dir.path()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1 + 1 + 7 + 1);
    // mean degree drives incidence, so it is the best model
    assert!(lines[1].starts_with("1,,,X,,,,,"), "{}", lines[1]);
}
