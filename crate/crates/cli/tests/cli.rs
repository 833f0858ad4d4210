mod support;

use support::{drivevol, files, fixture_dir, scratch, FIXTURE_TABLES};

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = drivevol(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["volatility", "describe", "fit", "profile", "synth", "pipeline"] {
        assert!(text.contains(cmd), "help lacks {cmd}");
    }
}

#[test]
fn unknown_flag_and_subcommand_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(drivevol(dir.path(), &["fit", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(drivevol(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(drivevol(dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[fit]\nsed = 1\n").unwrap();
    let out = drivevol(dir.path(), &["fit", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sed"));
}

#[test]
fn data_error_exits_one_and_writes_nothing() {
    let dir = scratch();
    std::fs::write(dir.path().join("trips.csv"), "trip_id,household_id\nT1,H1\n").unwrap();
    let out = drivevol(dir.path(), &["pipeline", "--config", "pipeline.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vehicle_id"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = drivevol(dir.path(), &["volatility"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--cycles"));
}

#[test]
fn input_is_never_overwritten() {
    let dir = scratch();
    let p = dir.path();
    let out = drivevol(p, &["volatility", "--cycles", "cycles.csv", "--out", "."]);
    assert_eq!(out.status.code(), Some(0));
    let before = std::fs::read_to_string(p.join("volatility.csv")).unwrap();
    // pipeline writes volatility.csv into the directory the config reads it from
    let args = ["pipeline", "--config", "pipeline.toml", "--volatility", "volatility.csv", "--out", ".", "--reps", "5"];
    let out = drivevol(p, &args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overwritten"));
    assert_eq!(std::fs::read_to_string(p.join("volatility.csv")).unwrap(), before);
}

#[test]
fn volatility_file_feeds_later_stages() {
    let dir = scratch();
    let p = dir.path();
    assert!(drivevol(p, &["volatility", "--cycles", "cycles.csv", "--out", "v"]).status.success());
    let args = ["fit", "--config", "pipeline.toml", "--reps", "20", "--format", "csv"];
    let direct = drivevol(p, &[&args[..], &["--out", "a"]].concat());
    assert!(direct.status.success());
    let reread = drivevol(p, &[&args[..], &["--volatility", "v/volatility.csv", "--out", "b"]].concat());
    assert!(reread.status.success(), "{}", String::from_utf8_lossy(&reread.stderr));
    let strip = drivevol::report::strip_metadata;
    for f in ["fits.json", "coefficients.csv"] {
        let a = std::fs::read_to_string(p.join("a").join(f)).unwrap();
        let b = std::fs::read_to_string(p.join("b").join(f)).unwrap();
        assert_eq!(strip(&a), strip(&b), "{f}");
    }
}

#[test]
fn every_output_carries_metadata_and_manifest_lists_digests() {
    let dir = scratch();
    let out = drivevol(dir.path(), &["pipeline", "--config", "pipeline.toml", "--reps", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for (name, text) in files(&dir.path().join("out")) {
        let first = text.lines().next().unwrap_or("");
        let second = text.lines().nth(1).unwrap_or("");
        assert!(
            first.starts_with("# drivevol ") || second.starts_with("  \"metadata\": "),
            "{name} lacks metadata"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/run_manifest.json")).unwrap()).unwrap();
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 4);
    for i in inputs {
        let path = dir.path().join(i["path"].as_str().unwrap());
        let want = sha2_hex(&std::fs::read(path).unwrap());
        assert_eq!(i["sha256"].as_str().unwrap(), want);
    }
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

fn sha2_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(bytes))
}

#[test]
fn bundled_fixture_regenerates_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture_dir().join("synth.toml"), dir.path().join("synth.toml")).unwrap();
    let out = drivevol(dir.path(), &["synth", "--config", "synth.toml", "--out", "gen", "--threads", "3"]);
    assert!(out.status.success());
    for f in FIXTURE_TABLES.iter().chain(&["manifest.json"]) {
        let want = std::fs::read_to_string(fixture_dir().join(f)).unwrap();
        let got = std::fs::read_to_string(dir.path().join("gen").join(f)).unwrap();
        assert!(want == got, "{f} differs from the bundled fixture");
    }
}

#[test]
fn config_subcommand_prints_effective_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = drivevol(dir.path(), &["config", "--seed", "5", "--format", "json"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let back = drivevol_cli::config::RunConfig::from_toml(&text).unwrap();
    assert_eq!(back.fit.seed, 5);
    assert_eq!(back.output.format, drivevol::report::Format::Json);
}
