use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nearfield");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let text = r#"
master_seed = 7

[geometry]
n_h = 8
n_v = 8
wavelength = 0.1

[scene]
clusters = 2
scatterers_per_cluster = 1
concentration = 50.0
distance = 2.0

[channel]
snapshots = 20
snr_db = 25.0

[estimation]
methods = ["AD-OMP", "TPD-OMP"]
oversampling = [2, 2]

[sweep]
variable = "concentration"
values = [20.0, 80.0]
trials = 3
"#;
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn info_reports_boundaries() {
    let o = run(&["info", "--n-h", "32", "--n-v", "32", "--wavelength", "0.1"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("rayleigh_m        96.10"), "{s}");
    assert!(s.contains("fresnel_m         6.363"), "{s}");
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn bad_arguments_are_config_errors() {
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["info"])), 1);
    assert_eq!(code(&run(&["info", "--n-h", "0", "--n-v", "4", "--wavelength", "0.1"])), 1);
    assert_eq!(code(&run(&["sweep", "--config", "/nonexistent/cfg.toml"])), 1);
}

#[test]
fn runtime_failures_exit_two() {
    let g = ["--n-h", "4", "--n-v", "4", "--wavelength", "0.1", "--paths", "1"];
    let mut args = vec!["estimate", "--snapshots", "/nonexistent/snapshots.csv"];
    args.extend(g);
    assert_eq!(code(&run(&args)), 2);
}

#[test]
fn unknown_method_in_config_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_config(dir.path());
    let text = fs::read_to_string(&p).unwrap().replace("\"TPD-OMP\"", "\"FOO\"");
    fs::write(&p, text).unwrap();
    let o = run(&["sweep", "--config", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
}

#[test]
fn complexity_asserts_accounting() {
    let o = run(&["complexity", "--n-h", "16", "--n-v", "16", "--wavelength", "0.1", "--levels", "8", "--tpd-points", "16"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("    16     16          256           2304         48"), "{s}");
    assert!(s.contains("   256    256        65536         589824        640      2.500"), "{s}");
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("scene");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snaps = out.join("snapshots.csv");
    let truth = out.join("truth.txt");
    let seq = dir.path().join("seq.csv");
    let o = run(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--snapshots",
        snaps.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--methods",
        "TPD-OMP,ad-omp",
        "--dump-sequences",
        seq.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("TPD-OMP  search_space="), "{s}");
    assert!(s.contains("AD-OMP  search_space=256"), "{s}");
    assert!(s.contains("nmse_u="), "{s}");
    assert!(fs::read_to_string(&seq).unwrap().lines().count() > 64);

    let o = run(&["estimate", "--config", cfg.to_str().unwrap(), "--snapshots", snaps.to_str().unwrap(), "--paths", "2", "--methods", "XYZ"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let svg = dir.path().join("svg");
    for (csv, extra) in [(&a, Some(&svg)), (&b, None)] {
        let mut args = vec!["sweep", "--config", cfg.to_str().unwrap(), "--csv", csv.to_str().unwrap()];
        if let Some(s) = extra {
            args.extend(["--svg-dir", s.to_str().unwrap()]);
        }
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = fs::read(&a).unwrap();
    assert_eq!(ta, fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("sweep_var,value,method,metric,mean,stderr,trials\n"));
    assert!(svg.join("channel_nmse.svg").exists());
}

#[test]
fn sweep_without_csv_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--trials", "1"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.lines().any(|l| l.starts_with("concentration,20,TPD-OMP,nmse_u,")), "{s}");
}

#[test]
fn dict_info_and_leakage() {
    let g = ["--n-h", "8", "--n-v", "8", "--wavelength", "0.1"];
    let mut args = vec!["dict-info", "--flavor", "ad", "--oversampling", "1,1"];
    args.extend(g);
    let o = run(&args);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("atoms_G           64"));

    let mut args = vec!["dict-info", "--flavor", "xx"];
    args.extend(g);
    assert_eq!(code(&run(&args)), 1);

    let mut args = vec!["leakage", "--u", "-0.2", "--v", "0.1", "--r", "1.0"];
    args.extend(g);
    let o = run(&args);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("PD:"));
}
