use std::path::Path;
use std::process::{Command, Output};

use agsp_cli::config::{parse, TableKind};
use agsp_cli::{execute, CliError, Options};

fn agsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agsp")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn spectrum_of_all_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\nseed = 1\n[model]\nname = \"all_zeros\"\nn = 4\n");
    let out = dir.path().join("out");
    let o = agsp(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&out.join("spectrum.csv"));
    assert_eq!(&h[..12], &agsp_cli::table::COLUMNS.map(String::from));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][col(&h, "gap")], "1");
    assert_eq!(rows[0][col(&h, "e0")], "0");
    assert_eq!(rows[0][col(&h, "es_bits")], "0");
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 1"));
    assert!(manifest.contains("config_sha256 = "));
}

#[test]
fn spread_of_max_entangled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\nseed = 1\n[model]\nname = \"all_zeros\"\nn = 4\n[state]\nkind = \"max_entangled\"\np = 4\n",
    );
    let o = agsp(&["spread", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ES_0 = 0"));
}

#[test]
fn paired_sweep_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\nseed = 1\n[model]\nname = \"paired_product\"\n[sweep]\nboundary = [2, 4, 6]\ndeltas = [0.0]\n",
    );
    let out = dir.path().join("out");
    let o = agsp(&["scaling", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&out.join("scaling.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let k: f64 = r[col(&h, "boundary_size")].parse().unwrap();
        let es: f64 = r[col(&h, "es_bits")].parse().unwrap();
        assert!((es - k * (4.0f64 / 3.0).log2()).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn missing_model_name_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\nseed = 1\n[model]\nn = 4\n");
    let out = dir.path().join("out");
    let o = agsp(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("name"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\nseed = 1\ncolour = 3\n[model]\nname = \"all_zeros\"\nn = 2\n");
    let o = agsp(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cap_exceeded_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\nseed = 1\n[model]\nname = \"tfim\"\nn = 8\ng = 2.0\n");
    let out = dir.path().join("out");
    let o = agsp(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap(), "--cap-qubits", "6"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn verify_bounds_on_chebyshev() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\nseed = 1\n[model]\nname = \"tfim\"\nn = 8\ng = 2.0\n[construction.chebyshev]\nq = 10\n",
    );
    let out = dir.path().join("out");
    let o = agsp(&["verify-bounds", "--config", &cfg, "--out", out.to_str().unwrap(), "--strict"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&out.join("verify_bounds.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[col(&h, "satisfied")] == "true"), "{rows:?}");
}

#[test]
fn protocol_transcript_and_costs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema_version = 1\nseed = 5\n[model]\nname = \"tfim\"\nn = 4\ng = 10.0\n\
         [construction.protocol]\nd = 16\ndelta = 0.2\nf = 4\ninput = [\"ground\", \"first_excited\"]\n",
    );
    let out = dir.path().join("out");
    let o = agsp(&["protocol-run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = read_csv(&out.join("protocol.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[col(&h, "cost_qubits")], r[col(&h, "closed_form_cost")]);
        assert_eq!(r[col(&h, "cost_qubits")], r[col(&h, "replay_cost")]);
    }
    let lo: f64 = rows[0][col(&h, "accept_lo")].parse().unwrap();
    let hi: f64 = rows[1][col(&h, "accept_hi")].parse().unwrap();
    assert!(lo > 0.9 && hi < 0.1, "{lo} {hi}");

    let tsv = std::fs::read_to_string(out.join("protocol_transcript.tsv")).unwrap();
    let mut cum = 0u64;
    for (i, l) in tsv.lines().enumerate() {
        let f: Vec<&str> = l.split('\t').collect();
        assert_eq!(f.len(), 5, "{l}");
        assert_eq!(f[0].parse::<usize>().unwrap(), i);
        assert!(["alice->bob", "bob->alice", "local"].contains(&f[2]), "{l}");
        cum += f[3].parse::<u64>().unwrap();
        assert_eq!(f[4].parse::<u64>().unwrap(), cum);
    }
    assert!(cum > 0);
}

#[test]
fn table_names_round_trip() {
    for t in TableKind::ALL {
        assert_eq!(TableKind::parse(t.name()), Some(t));
        assert_eq!(TableKind::parse(&t.name().replace('_', "-")), Some(t));
    }
}

#[test]
fn schema_requires_seed() {
    let e = parse("schema_version = 1\n[model]\nname = \"all_zeros\"\nn = 2\n").unwrap_err();
    assert!(e.0.contains("seed"), "{}", e.0);
}

#[test]
fn strict_violations_exit_nonzero() {
    assert_eq!(CliError::Strict(2).exit_code(), 1);
    assert_eq!(CliError::Cap("x".into()).exit_code(), 3);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema_version = 1\nseed = 3\n[model]\nname = \"all_zeros\"\nn = 2\n");
    let r = execute(&Options { config: cfg.into(), out: Some(dir.path().join("o")), strict: true, ..Options::default() }).unwrap();
    assert_eq!(r.violations, 0);
}
