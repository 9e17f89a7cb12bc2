use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ursa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ursa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn ursa")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ursa(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn pipeline(dir: &Path, seed: &str) {
    let o = |rest: &[&str]| {
        let mut a = vec!["--seed", seed, "--out", "o"];
        a.extend_from_slice(rest);
        a.into_iter().map(String::from).collect::<Vec<_>>()
    };
    for args in [
        o(&["gen"]),
        o(&["train"]),
        o(&["calibrate"]),
        o(&[
            "estimate",
            "--workloads",
            "o/workloads.json",
            "--tracks",
            "o/reference_tracks.json",
        ]),
        o(&["schedule", "--profiles", "o/profiles.json"]),
        o(&[
            "simulate",
            "--placements",
            "o/placements.jsonl",
            "--profiles",
            "o/profiles.json",
        ]),
        o(&["scenario1", "--model", "o/model.json"]),
        o(&["scenario2", "--model", "o/model.json"]),
        o(&["colocate", "--model", "o/model.json"]),
    ] {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(dir, &args);
    }
}

#[test]
fn same_seed_gives_byte_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "7");
    pipeline(b.path(), "7");
    let fa = artifacts(&a.path().join("o"));
    let fb = artifacts(&b.path().join("o"));
    assert!(
        fa.len() >= 15,
        "{:?}",
        fa.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between runs");
    }

    let c = tempfile::tempdir().unwrap();
    ok(c.path(), &["--seed", "8", "--out", "o", "gen"]);
    assert_ne!(
        fs::read(c.path().join("o/workloads.json")).unwrap(),
        fs::read(a.path().join("o/workloads.json")).unwrap()
    );
}

#[test]
fn schedule_emits_one_json_line_per_workload() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--out", "o", "gen"]);
    ok(
        p,
        &[
            "--out",
            "o",
            "estimate",
            "--workloads",
            "o/workloads.json",
            "--ground-truth",
        ],
    );
    for policy in ["ursa", "lrp"] {
        let out = ok(
            p,
            &[
                "--out",
                "o",
                "schedule",
                "--profiles",
                "o/profiles.json",
                "--policy",
                policy,
            ],
        );
        let text = String::from_utf8(out.stdout).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 55);
        for l in &lines {
            let o = l.as_object().unwrap();
            assert_eq!(o.len(), 3);
            assert!(o["workload_id"].is_u64() && o["node_id"].is_u64() && o["score"].is_f64());
        }
        assert_eq!(fs::read_to_string(p.join("o/placements.jsonl")).unwrap(), text);
    }
    ok(
        p,
        &[
            "--out",
            "o",
            "simulate",
            "--placements",
            "o/placements.jsonl",
            "--profiles",
            "o/profiles.json",
        ],
    );
    let csv = fs::read_to_string(p.join("o/slowdown.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("workload_id,node_id,sd"));
    assert_eq!(csv.lines().count(), 56);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("o/slowdown.json")).unwrap()).unwrap();
    assert!(report["schema_version"].is_u64());
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["--out", "o", "gen"]);
    ok(p, &["--out", "o", "train"]);
    let plan = |target: &str| {
        ursa(
            p,
            &[
                "--out",
                "o",
                "plan",
                "--model",
                "o/model.json",
                "--workloads",
                "o/workloads.json",
                "--workload",
                "0",
                "--current",
                "1,2",
                "--target",
                target,
            ],
        )
    };
    let good = plan("1.5");
    assert_eq!(good.status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_slice(&good.stdout).unwrap();
    assert!(rec["recommended"]["cores"].is_u64());
    assert_eq!(plan("1000").status.code(), Some(2));

    ok(
        p,
        &[
            "--out",
            "o",
            "estimate",
            "--workloads",
            "o/workloads.json",
            "--ground-truth",
        ],
    );
    fs::write(
        p.join("tiny.json"),
        r#"{"schema_version":1,"nodes":[{"node_id":0,"cores":4,"memory_gb":8}]}"#,
    )
    .unwrap();
    let full = ursa(
        p,
        &[
            "--out",
            "o",
            "schedule",
            "--profiles",
            "o/profiles.json",
            "--nodes",
            "tiny.json",
        ],
    );
    assert_eq!(full.status.code(), Some(2));

    assert_eq!(
        ursa(
            p,
            &[
                "--out",
                "o",
                "simulate",
                "--placements",
                "missing",
                "--profiles",
                "x"
            ]
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(ursa(p, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        ursa(p, &["--config", "missing.json", "gen"]).status.code(),
        Some(1)
    );
}

#[test]
fn config_file_is_honored() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("c.json"), r#"{"seed": 3, "synth": {"seed": 3}}"#).unwrap();
    ok(p, &["--config", "c.json", "--out", "a", "gen"]);
    ok(p, &["--seed", "3", "--out", "b", "gen"]);
    assert_eq!(
        fs::read(p.join("a/workloads.json")).unwrap(),
        fs::read(p.join("b/workloads.json")).unwrap()
    );
}
