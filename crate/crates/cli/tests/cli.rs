use std::path::Path;
use std::process::{Command, Output};

use cvcompile_cli::config::{CompileConfig, CostConfig, InitKind, TargetConfig};
use cvcompile_cli::run::{COMPILE_COLUMNS, LANDSCAPE_COLUMNS, NFL_COLUMNS, VERIFY_COLUMNS};
use cvcompile_cli::*;
use cvcompile::costs::CostKind;
use cvcompile::optim::{Method, OptimizerConfig};
use cvcompile::trainer::{AnsatzSpec, MultiStart};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvcompile")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(path: &str) -> (Header, Vec<Vec<String>>) {
    read_record(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap()
}

const SMALL_NFL: &str = r#"
command = "nfl"
seed = 5

[nfl]
kind = "orthogonal"
modes = [1, 2]
ranks = [1, 3]
samples = 200
"#;

const SMALL_COMPILE: &str = r#"
command = "compile"
seed = 2
cutoff = 8

[compile]
target = { kind = "random-gaussian" }
ansatz = { kind = "gaussian" }
optimizer = { method = "simplex", max_evals = 300 }
runs = 2

[[compile.costs]]
kind = "le-tmss"
r_schedule = [0.1, 0.5]
"#;

#[test]
fn every_preset_loads_and_round_trips() {
    let names: Vec<_> = preset_names().collect();
    for expected in [
        "fig3-gaussian", "fig3-kerr", "fig4-gaussian", "fig4-kerr", "fig4-beamsplitter", "fig5-acs-k1", "fig5-acs-k2",
        "fig5-ecfs", "fig6-kerr-0.1", "fig6-kerr-0.5", "nfl-thm1", "nfl-thm2", "nfl-cor1", "nfl-appD",
    ] {
        assert!(names.contains(&expected), "missing preset {expected}");
    }
    for name in names {
        let config = preset(name).unwrap();
        config.check_runnable(false).unwrap_or_else(|e| panic!("{name}: {e}"));
        let text = config.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), config, "{name}");
    }
    assert!(matches!(preset("fig9"), Err(CliError::Config(_))));
}

#[test]
fn record_header_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "nfl.toml", SMALL_NFL);
    let out = dir.path().join("out.csv");
    let o = bin(&["nfl", "--config", &cfg, "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read(out.to_str().unwrap());
    let echoed = ExperimentConfig::from_toml(&header.config_toml).unwrap();
    assert_eq!(echoed, header.config);
    assert_eq!(echoed.seed, Some(9));
    assert_eq!(header.seed, 9);
    assert_eq!(header.command, "nfl");
    assert_eq!(header.columns, NFL_COLUMNS);
    assert!(!header.build.is_empty());
    assert!(header.finished_unix_s >= header.started_unix_s);
    assert_eq!(rows.len(), 3 + 5 + 3 + 5);
}

#[test]
fn nfl_cells() {
    let config = ExperimentConfig::from_toml(SMALL_NFL).unwrap();
    let rec = run(&config).unwrap();
    let find = |m: f64, s: f64, rank: f64| {
        (0..rec.rows.len())
            .find(|&i| rec.f64(i, "m") == m && rec.f64(i, "set_size") == s && rec.f64(i, "rank") == rank)
            .unwrap()
    };
    assert_eq!(rec.f64(find(1.0, 2.0, 1.0), "theory"), 0.0);
    assert_eq!(rec.f64(find(2.0, 0.0, 1.0), "theory"), 0.5);
    for (m, s) in [(1.0, 1.0), (1.0, 2.0), (2.0, 2.0)] {
        let i = find(m, s, 3.0);
        assert_eq!(rec.text(i, "status"), "skipped");
        assert_eq!(*rec.get(i, "mean"), Cell::Empty);
    }
    assert_eq!(rec.text(find(2.0, 1.0, 3.0), "status"), "pass");
}

#[test]
fn results_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text, cmd) in [("nfl.toml", SMALL_NFL, "nfl"), ("compile.toml", SMALL_COMPILE, "compile")] {
        let cfg = write(dir.path(), name, text);
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = dir.path().join(format!("{name}.{threads}.csv"));
            let o = bin(&[cmd, "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            outputs.push(read(out.to_str().unwrap()).1);
        }
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "{cmd}");
    }
}

#[test]
fn compile_rows_and_shots() {
    let mut config = ExperimentConfig::from_toml(SMALL_COMPILE).unwrap();
    config.shots = Some(1000);
    let rec = run(&config).unwrap();
    assert_eq!(rec.header.columns, COMPILE_COLUMNS);
    let finals: Vec<usize> = rec.rows_where("row", "final").collect();
    assert_eq!(finals.len(), 2);
    for &i in &finals {
        assert!(rec.text(i, "target").contains("gaussian"));
        assert_eq!(rec.text(i, "params").split(';').count(), 5);
        let noisy = rec.f64(i, "cost_shots");
        assert!((0.0..=1.0).contains(&noisy));
        assert_eq!(noisy * 1000.0, (noisy * 1000.0).round());
    }
    assert_eq!(rec.f64(finals[0], "seed"), 2.0);
    assert_eq!(rec.f64(finals[1], "seed"), 3.0);
    let iters: Vec<usize> = rec.rows_where("row", "iter").collect();
    assert!(rec.text(iters[0], "param_errors").starts_with("alpha="));
    assert!(iters.iter().all(|&i| matches!(rec.get(i, "r"), Cell::Float(_))));
}

#[test]
fn identity_target_converges_at_iteration_zero() {
    let config = ExperimentConfig {
        command: CommandKind::Compile,
        seed: Some(0),
        cutoff: Some(10),
        shots: None,
        out: None,
        compile: Some(CompileConfig {
            target: TargetConfig::Identity { modes: 1 },
            ansatz: AnsatzSpec::gaussian(),
            costs: vec![CostConfig { kind: CostKind::LeTmss, r_schedule: Some(vec![0.5]), truncation: None, training: None }],
            optimizer: OptimizerConfig::new(Method::Simplex),
            multi_start: MultiStart::default(),
            init: InitKind::Zero,
            runs: 1,
            target_seed_offset: 0,
        }),
        nfl: None,
        landscape: None,
        verify: None,
    };
    config.check_runnable(false).unwrap();
    let rec = run(&config).unwrap();
    assert_eq!(rec.text(0, "row"), "iter");
    assert_eq!(rec.f64(0, "iteration"), 0.0);
    assert!(rec.f64(0, "cost").abs() <= 1e-12);
    let last = rec.rows.len() - 1;
    assert!(rec.f64(last, "cost").abs() <= 1e-12);
    assert!(rec.f64(last, "hst50").abs() <= 1e-12);
}

#[test]
fn landscape_small_run() {
    let text = r#"
command = "landscape"
seed = 1
cutoff = 20

[landscape.gradients]
r = 0.5
modes = [1, 2]
samples = 500

[landscape.scan]
target = { kind = "kerr", chi = 0.4 }
ansatz = { kind = "layered", layers = 2 }
eps = [0.0, 0.1, 0.2]
samples = 4
r_values = [0.3]
"#;
    let rec = run(&ExperimentConfig::from_toml(text).unwrap()).unwrap();
    assert_eq!(rec.header.columns, LANDSCAPE_COLUMNS);
    let zero: Vec<usize> = rec.rows_where("table", "scan").filter(|&i| rec.f64(i, "eps") == 0.0).collect();
    assert_eq!(zero.len(), 4);
    assert!(zero.iter().all(|&i| rec.f64(i, "value") <= 1e-6));
    let means: Vec<f64> = rec.rows_where("table", "scan-mean").map(|i| rec.f64(i, "value")).collect();
    assert_eq!(means.len(), 3);
    assert!(means[1] < means[2]);
    assert_eq!(rec.rows_where("table", "grad-global").count(), 2);
    assert_eq!(rec.rows_where("table", "grad-global-slope").count(), 1);
}

#[test]
fn verify_defaults_need_a_seed() {
    let o = bin(&["verify"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = bin(&["verify", "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let (header, rows) = read_record(text.as_bytes()).unwrap();
    assert_eq!(header.columns, VERIFY_COLUMNS);
    let status = header.columns.iter().position(|c| c == "status").unwrap();
    let check = header.columns.iter().position(|c| c == "check").unwrap();
    for row in &rows {
        if row[check] != "lemma1-ij" {
            assert_eq!(row[status], "pass", "{row:?}");
        }
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "command = \"nfl\"\nseed = 1\n\n[nfl]\nkind = \"orthogonal\"\nmodes = [1]\nsamples = 10\nbogus = 3\n");
    let o = bin(&["nfl", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("line"), "{err}");

    let o = bin(&["compile", "--preset", "nfl-thm1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["nfl", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["nfl", "--preset", "nfl-thm1", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["compile"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["compile", "--preset", "fig4-gaussian", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let no_seed = write(dir.path(), "noseed.toml", "command = \"nfl\"\n[nfl]\nkind = \"orthogonal\"\nmodes = [1]\nsamples = 10\n");
    let o = bin(&["nfl", "--config", &no_seed]);
    assert_eq!(o.status.code(), Some(2));
    let wrong = write(dir.path(), "wrong.toml", "command = \"nfl\"\nseed = 1\n[compile]\ntarget = { kind = \"kerr\", chi = 1.0 }\n");
    assert_eq!(bin(&["nfl", "--config", &wrong]).status.code(), Some(2));
}

#[test]
fn oversized_runs_are_refused() {
    let o = bin(&["compile", "--preset", "fig4-beamsplitter", "--cutoff", "100"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--cutoff 64"));
    let mut config = preset("fig4-beamsplitter").unwrap();
    config.cutoff = Some(64);
    config.check_runnable(false).unwrap();
    config.cutoff = Some(65);
    assert!(matches!(config.check_runnable(false), Err(CliError::Resource { suggested: 64, .. })));
    config.check_runnable(true).unwrap();
}

#[test]
fn list_presets() {
    let o = bin(&["nfl", "--list-presets"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l == "nfl-appD"));
}

#[test]
fn schema_documents_every_column() {
    let schema = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/columns.md")).unwrap();
    for col in COMPILE_COLUMNS.iter().chain(NFL_COLUMNS).chain(LANDSCAPE_COLUMNS).chain(VERIFY_COLUMNS) {
        assert!(schema.contains(&format!("`{col}`")), "schema lacks {col}");
    }
}
