//! `pipeline` on the bundled fixture against checked-in outputs. Set
//! `UPDATE_GOLDEN=1` to rewrite them after an intended change.

mod support;

use drivevol::report::strip_metadata;
use support::{drivevol, files, golden_dir, scratch};

fn run_pipeline(threads: &str) -> Vec<(String, String)> {
    let dir = scratch();
    let out = drivevol(dir.path(), &["pipeline", "--config", "pipeline.toml", "--threads", threads]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    files(&dir.path().join("out"))
        .into_iter()
        .map(|(name, text)| (name, strip_metadata(&text)))
        .collect()
}

#[test]
fn pipeline_matches_goldens_across_thread_counts() {
    let first = run_pipeline("1");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let dir = golden_dir();
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        for (name, text) in &first {
            std::fs::write(dir.join(name), text).unwrap();
        }
    }
    let golden = files(&golden_dir());
    let names = |v: &[(String, String)]| v.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    assert_eq!(names(&first), names(&golden));
    for threads in ["1", "4"] {
        let run = if threads == "1" { first.clone() } else { run_pipeline(threads) };
        for ((name, got), (_, want)) in run.iter().zip(&golden) {
            assert!(got == want, "{name} differs from golden with {threads} threads");
        }
    }
}
