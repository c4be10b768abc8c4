use std::path::Path;
use std::process::{Command, Output};

use kvred::games::build_kv_tensor;
use kvred::pipeline::{evaluate_report, run_reduction, ReductionConfig, ReductionReport, CSV_HEADER};
use kvred::values::{classical_value_bruteforce, classical_value_heuristic, kv_me_strategy, me_state_value};
use kvred::BellTensor;
use serde_json::Value;

fn kvred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvred"))
        .args(args)
        .env_remove("KVRED_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn build_kv_writes_library_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kv4.json");
    let o = kvred(&["build-kv", "--n", "4", "--eps", "0.25", "-o", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let written = BellTensor::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let lib = build_kv_tensor(4, 0.25).unwrap().tensor;
    assert_eq!(written, lib);
}

#[test]
fn values_match_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let kv = dir.path().join("kv4.json");
    assert_eq!(
        code(&kvred(&["build-kv", "--n", "4", "--eps", "0.25", "-o", path_str(&kv)])),
        0
    );
    let rep = dir.path().join("values.json");
    let o = kvred(&[
        "values",
        "--in",
        path_str(&kv),
        "--classical",
        "brute",
        "--quantum",
        "me",
        "-o",
        path_str(&rep),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&rep);
    let lib = build_kv_tensor(4, 0.25f64).unwrap();
    let omega = classical_value_bruteforce(&lib.tensor, u64::MAX).unwrap().value;
    let q = me_state_value(&lib.tensor, &kv_me_strategy(&lib.cosets)).unwrap();
    assert_eq!(v["classical"]["value"].as_f64().unwrap().to_bits(), omega.to_bits());
    assert_eq!(v["classical"]["rigor"], "exact");
    assert_eq!(v["quantum_me"].as_f64().unwrap().to_bits(), q.to_bits());
    assert_eq!(v["seed"], 0);
    assert!(v["wall_ms"].is_null());

    let o = kvred(&[
        "values",
        "--in",
        path_str(&kv),
        "--classical",
        "heuristic",
        "--restarts",
        "5",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let h = classical_value_heuristic(&lib.tensor, 5, 3).value;
    assert_eq!(v["classical"]["value"].as_f64().unwrap().to_bits(), h.to_bits());
    assert_eq!(v["classical"]["method"], "heuristic");
    assert_eq!(v["seed"], 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let kv = dir.path().join("kv4.json");
    assert_eq!(code(&kvred(&["build-kv", "--n", "4", "-o", path_str(&kv)])), 0);

    let o = kvred(&["build-kv", "--n", "4", "--bogus"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&kvred(&["build-kv", "--n", "3"])), 2);
    assert_eq!(code(&kvred(&["reduce", "--n", "4", "--target-eps", "0.7"])), 2);
    assert_eq!(code(&kvred(&["build-kv", "--n", "4", "--threads", "0"])), 2);
    assert_eq!(code(&kvred(&["values", "--in", path_str(&kv), "--budget", "10"])), 3);
    let missing = dir.path().join("no/such/dir/out.json");
    assert_eq!(code(&kvred(&["build-kv", "--n", "4", "-o", path_str(&missing)])), 5);
    assert_eq!(
        code(&kvred(&["values", "--in", path_str(&dir.path().join("absent.json"))])),
        5
    );
    let o = kvred(&["reduce", "--n", "8", "--c0", "1e-9", "--target-eps", "0.01"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reduce_is_deterministic_and_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = kvred(&[
            "reduce",
            "--n",
            "8",
            "--target-eps",
            "0.5",
            "--seed",
            "7",
            "-o",
            path_str(p),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let c = dir.path().join("c.json");
    assert_eq!(
        code(&kvred(&["reduce", "--n", "4", "--seed", "3", "-o", path_str(&c)])),
        0
    );
    let from_cli: ReductionReport = serde_json::from_str(&std::fs::read_to_string(&c).unwrap()).unwrap();
    let mut config = ReductionConfig::new(4);
    config.seed = 3;
    let model = run_reduction(&config).unwrap();
    let lib = evaluate_report(&model, &config.budgets, 3).unwrap();
    assert_eq!(from_cli, lib);
    assert_eq!(serde_json::to_value(&from_cli).unwrap(), read_json(&c));
}

#[test]
fn thread_count_does_not_change_results() {
    let one = Command::new(env!("CARGO_BIN_EXE_kvred"))
        .args(["reduce", "--n", "4", "--seed", "1"])
        .env("KVRED_THREADS", "1")
        .output()
        .unwrap();
    let many = kvred(&["reduce", "--n", "4", "--seed", "1", "--threads", "4"]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn csv_outputs_have_fixed_headers_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.csv");
    assert_eq!(
        code(&kvred(&["reduce", "--n", "4", "--format", "csv", "-o", path_str(&r)])),
        0
    );
    let text = std::fs::read_to_string(&r).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER.join(","));
    assert_eq!(lines[1].split(',').count(), CSV_HEADER.len());
    assert_eq!(code(&kvred(&["verify", "--in", path_str(&r)])), 0);

    let kv = dir.path().join("kv.json");
    assert_eq!(code(&kvred(&["build-kv", "--n", "2", "-o", path_str(&kv)])), 0);
    let o = kvred(&["values", "--in", path_str(&kv), "--quantum", "me", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "N_A,K_A,N_B,K_B,classical.value,classical.rigor,classical.method,quantum_me,seed,wall_ms"
    );
    assert_eq!(lines[1].split(',').count(), 10);
}

#[test]
fn verify_accepts_every_output_kind() {
    let dir = tempfile::tempdir().unwrap();
    let kv = dir.path().join("kv.json");
    let vals = dir.path().join("v.json");
    let red = dir.path().join("r.json");
    assert_eq!(code(&kvred(&["build-kv", "--n", "4", "-o", path_str(&kv)])), 0);
    assert_eq!(
        code(&kvred(&[
            "values",
            "--in",
            path_str(&kv),
            "--quantum",
            "me",
            "-o",
            path_str(&vals)
        ])),
        0
    );
    assert_eq!(code(&kvred(&["reduce", "--n", "2", "-o", path_str(&red)])), 0);
    for (p, kind) in [(&kv, "tensor"), (&vals, "values_report"), (&red, "reduction_report")] {
        let o = kvred(&["verify", "--in", path_str(p)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["kind"], kind);
        assert_eq!(v["pass"], true);
    }
    for n in ["2", "4"] {
        assert_eq!(code(&kvred(&["verify", "--n", n])), 0);
    }
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"hello\":1}").unwrap();
    assert_eq!(code(&kvred(&["verify", "--in", path_str(&junk)])), 2);
}

#[test]
fn bench_fwht_reports() {
    let o = kvred(&["bench-fwht", "--n", "12", "--reps", "2"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n"], 12);
    assert!(v["round_trip_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn parallel_writers_never_interleave() {
    let dir = tempfile::tempdir().unwrap();
    let expected = build_kv_tensor(8, 0.3).unwrap().tensor;
    let shared = dir.path().join("shared.json");
    let children: Vec<_> = (0..16)
        .map(|i| {
            let own = dir.path().join(format!("kv{i}.json"));
            let target = if i % 2 == 0 { own } else { shared.clone() };
            Command::new(env!("CARGO_BIN_EXE_kvred"))
                .args(["build-kv", "--n", "8", "--eps", "0.3", "-o", path_str(&target)])
                .spawn()
                .unwrap()
        })
        .collect();
    for mut c in children {
        assert!(c.wait().unwrap().success());
    }
    for i in (0..16).step_by(2) {
        let text = std::fs::read_to_string(dir.path().join(format!("kv{i}.json"))).unwrap();
        assert_eq!(BellTensor::from_json(&text).unwrap(), expected);
    }
    let text = std::fs::read_to_string(&shared).unwrap();
    assert_eq!(BellTensor::from_json(&text).unwrap(), expected);
    let leftovers = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".tmp"))
        .count();
    assert_eq!(leftovers, 0);
}
