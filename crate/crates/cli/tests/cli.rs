use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn chainstress(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chainstress"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn fig1_config(dir: &Path) -> PathBuf {
    write_config(dir, &format!("[economy]\ndir = {:?}\n", fixture("fig1")))
}

fn small_synthetic(dir: &Path, count: usize) -> PathBuf {
    write_config(
        dir,
        &format!("seed = 5\n[economy.synthetic]\nfirms = 300\n[scenarios]\nkind = \"covid\"\ncount = {count}\n"),
    )
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn fsri_sweep_on_the_toy_economy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = chainstress(&["fsri", "--out", out.to_str().unwrap()], Some(&fig1_config(tmp.path())));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let profile = std::fs::read_to_string(out.join("fsri_profile.csv")).unwrap();
    let lines: Vec<&str> = profile.lines().collect();
    assert_eq!(lines[0], "rank,firm_id,fsri,fsri_plus,amplification,converged");
    assert_eq!(lines.len(), 7);
    assert!(lines.iter().any(|l| l.contains(",f,0.14,")));
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["convergence"]["scenarios"], 6);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 5);
}

#[test]
fn validate_reports_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let o = chainstress(&["validate"], Some(&fig1_config(tmp.path())));
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("6 firms") && stdout.contains("no violations"), "{stdout}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn invalid_economy_exits_with_validation_status() {
    let tmp = tempfile::tempdir().unwrap();
    let econ = tmp.path().join("econ");
    std::fs::create_dir(&econ).unwrap();
    for f in ["firms.csv", "supply.csv", "interbank.csv", "loans.csv"] {
        std::fs::copy(fixture("fig1").join(f), econ.join(f)).unwrap();
    }
    std::fs::write(econ.join("banks.csv"), "id,tier1_equity\n1,100\n2,0\n3,200\n4,100\n").unwrap();
    let cfg = write_config(tmp.path(), "[economy]\ndir = \"econ\"\n");
    let o = chainstress(&["validate"], Some(&cfg));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("bank 2"));

    let out = tmp.path().join("out");
    let o = chainstress(&["stress", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 1);
    let m = manifest(&out);
    assert_eq!(m["status"], "invalid");
    assert_eq!(m["partial"], true);
}

#[test]
fn missing_inputs_exit_with_io_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[economy]\ndir = \"nowhere\"\n");
    let out = tmp.path().join("out");
    assert_eq!(code(&chainstress(&["fsri", "--out", out.to_str().unwrap()], Some(&cfg))), 3);
    assert_eq!(manifest(&out)["status"], "failed");
    assert_eq!(code(&chainstress(&["fsri"], Some(&tmp.path().join("absent.toml")))), 3);
}

#[test]
fn bad_arguments_are_validation_errors() {
    assert_eq!(code(&chainstress(&["stress", "--regime", "sideways"], None)), 1);
    assert_eq!(code(&chainstress(&["frobnicate"], None)), 1);
    assert_eq!(code(&chainstress(&["--help"], None)), 0);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[propagation]\nepsilon = -1.0\n");
    assert_eq!(code(&chainstress(&["fsri"], Some(&cfg))), 1);
}

#[test]
fn iteration_cap_exits_with_convergence_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("[economy]\ndir = {:?}\n[propagation]\nmax_iter = 1\n", fixture("fig1")),
    );
    let out = tmp.path().join("out");
    let o = chainstress(&["stress", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 2);
    assert!(out.join("risk_summary.csv").exists());
    let m = manifest(&out);
    assert_eq!(m["status"], "not-converged");
    assert!(!m["convergence"]["not_converged"].as_array().unwrap().is_empty());
}

#[test]
fn covid_batch_report_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("seed = 1\n[economy]\ndir = {:?}\n[scenarios]\nkind = \"covid\"\ncount = 1000\n", fixture("standin")),
    );
    let out = tmp.path().join("out");
    let o = chainstress(&["stress", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("risk_summary.csv")).unwrap();
    // 19 banks plus the system row, 4 channels, 2 regimes.
    assert_eq!(summary.lines().count(), 1 + 20 * 4 * 2);
    let ledgers = std::fs::read_to_string(out.join("ledgers.csv")).unwrap();
    assert_eq!(ledgers.lines().count(), 1 + 19 * 1000);
    for f in ["amplification.csv", "fits.json", "ccdf.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(tmp.path(), 30);
    let out = tmp.path().join("out");
    let args = ["stress", "--trace", "--out", out.to_str().unwrap()];
    assert_eq!(code(&chainstress(&args, Some(&cfg))), 0);
    let first = read_dir(&out);
    assert!(first.contains_key("trajectory.csv") && first.contains_key("defaults.csv"));
    assert_eq!(code(&chainstress(&args, Some(&cfg))), 0);
    assert_eq!(read_dir(&out), first);

    // Worker count changes nothing but the manifest's echo of it.
    let out2 = tmp.path().join("out2");
    let o = chainstress(&["stress", "--trace", "--workers", "1", "--out", out2.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 0);
    let second = read_dir(&out2);
    for (name, bytes) in &first {
        if name != "manifest.json" {
            assert_eq!(&second[name], bytes, "{name}");
        }
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(tmp.path(), 5);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    chainstress(&["stress", "--out", a.to_str().unwrap()], Some(&cfg));
    chainstress(&["stress", "--seed", "6", "--out", b.to_str().unwrap()], Some(&cfg));
    assert_eq!(manifest(&b)["seeds"]["scenarios"], 6);
    assert_ne!(
        std::fs::read(a.join("ledgers.csv")).unwrap(),
        std::fs::read(b.join("ledgers.csv")).unwrap()
    );
}

#[test]
fn single_regime_runs_skip_amplification() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = chainstress(&["stress", "--regime", "wo", "--out", out.to_str().unwrap()], Some(&fig1_config(tmp.path())));
    assert_eq!(code(&o), 0);
    let summary = std::fs::read_to_string(out.join("risk_summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",wo")));
    assert!(!out.join("amplification.csv").exists());
}

#[test]
fn report_recomputes_stress_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(tmp.path(), 20);
    let out = tmp.path().join("out");
    assert_eq!(code(&chainstress(&["stress", "--out", out.to_str().unwrap()], Some(&cfg))), 0);
    let again = tmp.path().join("again");
    let o = chainstress(
        &["report", out.join("ledgers.csv").to_str().unwrap(), "--out", again.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["risk_summary.csv", "ledgers.csv", "amplification.csv", "ccdf.csv"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
    assert_eq!(manifest(&again)["command"], "report");
}

#[test]
fn generated_economies_feed_later_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = write_config(
        tmp.path(),
        "seed = 3\nout = \"econ\"\n[economy.synthetic]\nfirms = 150\nbanks = 5\n[scenarios]\nkind = \"covid\"\ncount = 4\n",
    );
    assert_eq!(code(&chainstress(&["generate"], Some(&gen))), 0);
    let econ = tmp.path().join("econ");
    for f in ["firms.csv", "supply.csv", "interbank.csv", "loans.csv", "banks.csv", "empirical_shocks.csv", "scenarios.csv"] {
        assert!(econ.join(f).exists(), "{f}");
    }
    let run = tmp.path().join("run.toml");
    std::fs::write(&run, "[economy]\ndir = \"econ\"\n[scenarios]\nkind = \"file\"\npath = \"econ/scenarios.csv\"\n").unwrap();
    let out = tmp.path().join("out");
    let o = chainstress(&["stress", "--out", out.to_str().unwrap()], Some(&run));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ledgers = std::fs::read_to_string(out.join("ledgers.csv")).unwrap();
    assert_eq!(ledgers.lines().count(), 1 + 5 * 4);
}

#[test]
fn debtrank_profile_and_gaussian_study() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(tmp.path(), 40);
    let out = tmp.path().join("out");
    assert_eq!(code(&chainstress(&["stress", "--out", out.to_str().unwrap()], Some(&cfg))), 0);

    let study = tmp.path().join("study.toml");
    std::fs::write(
        &study,
        "seed = 5\n[economy.synthetic]\nfirms = 300\n[debtrank.gaussian]\nreference = \"out/ledgers.csv\"\ncount = 200\n",
    )
    .unwrap();
    let dr = tmp.path().join("dr");
    let o = chainstress(&["debtrank", "--trace", "--out", dr.to_str().unwrap()], Some(&study));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let profile = std::fs::read_to_string(dr.join("debtrank_profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1 + 19);
    let amp = std::fs::read_to_string(dr.join("amplification.csv")).unwrap();
    assert_eq!(amp.lines().count(), 1 + 19 * 200);
    assert!(dr.join("fits.json").exists() && dr.join("debtrank_trace_1.csv").exists());
    assert_eq!(manifest(&dr)["convergence"]["scenarios"], 19 + 200);
}
