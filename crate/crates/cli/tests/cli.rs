use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use balanced_aes::cipher::TraceSet;
use balanced_aes::tablegen::TableSet;
use serde_json::Value;
use tempfile::TempDir;

const KEY: &str = "000102030405060708090a0b0c0d0e0f";
const FIPS_PT: &str = "00112233445566778899aabbccddeeff";
const FIPS_CT: &str = "69c4e0d86a7b0430d8cdb78070b4c55a";

fn baes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_baes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&o.stdout)
        )
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One generated table directory shared by the tests.
fn tables() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().join("tables");
        let o = baes(&["gen", "--key", KEY, "--seed", "7", "--out", s(&dir)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (tmp, dir)
    })
    .1
}

#[test]
fn gen_reports_sizes_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let oa = baes(&["gen", "--key", KEY, "--seed", "11", "--out", s(&a)]);
    let ob = baes(&["gen", "--key", KEY, "--seed", "11", "--out", s(&b)]);
    assert_eq!(code(&oa), 0);
    assert_eq!(code(&ob), 0);
    let rep = json(&oa);
    assert_eq!(rep["sizes"]["total_lookups"], 1024);
    assert_eq!(rep["sizes"]["total_bytes"], 262_144);
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["seed"], 11);
    for f in ["q0.tbl", "q1.tbl", "spec.bin"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn encrypt_matches_known_answer_under_every_policy() {
    let t = s(tables());
    for policy in ["q0", "q1", "random:0.5", "pt-derived:16"] {
        let o = baes(&[
            "encrypt", "--tables", t, "--pt", FIPS_PT, "--policy", policy,
        ]);
        assert_eq!(code(&o), 0);
        assert_eq!(
            String::from_utf8_lossy(&o.stdout).trim(),
            FIPS_CT,
            "{policy}"
        );
    }
}

#[test]
fn usage_errors_exit_2() {
    let t = s(tables());
    assert_eq!(code(&baes(&["encrypt", "--tables", t, "--pt", "0011"])), 2);
    assert_eq!(
        code(&baes(&[
            "encrypt", "--tables", t, "--pt", FIPS_PT, "--policy", "bogus"
        ])),
        2
    );
    assert_eq!(code(&baes(&["frobnicate"])), 2);
    assert_eq!(
        code(&baes(&["gen", "--key", "xyz", "--out", "/tmp/never"])),
        2
    );
}

#[test]
fn trace_shapes_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let t = s(tables());
    let a = tmp.path().join("a.btr");
    let b = tmp.path().join("b.btr");
    for p in [&a, &b] {
        let o = baes(&[
            "trace",
            "--tables",
            t,
            "--count",
            "300",
            "--seed",
            "5",
            "--out",
            s(p),
        ]);
        assert_eq!(code(&o), 0);
        assert_eq!(json(&o)["traces"], 300);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let set = TraceSet::from_bytes(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!((set.len(), set.sample_count()), (300, 1456));

    let g = tmp.path().join("grid.btr");
    let o = baes(&[
        "trace",
        "--tables",
        t,
        "--source",
        "grid",
        "--policy",
        "q0",
        "--out",
        s(&g),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["traces"], 65_536);

    let o = baes(&["analyze", "walsh-ro", "--traces", s(&g), "--tables", t]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["nonzero"], 0);
    let o = baes(&[
        "analyze",
        "collision",
        "--traces",
        s(&g),
        "--tables",
        t,
        "--expect",
        "leak",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn verify_passes_then_catches_perturbation_and_truncation() {
    let t = tables();
    assert_eq!(code(&baes(&["verify", "--tables", s(t)])), 0);

    let tmp = TempDir::new().unwrap();
    let copy = tmp.path().join("t");
    std::fs::create_dir(&copy).unwrap();
    for f in ["q0.tbl", "q1.tbl", "spec.bin"] {
        std::fs::copy(t.join(f), copy.join(f)).unwrap();
    }
    // A flipped table bit with a valid checksum: the checks must fail.
    let mut q0 = TableSet::from_bytes(&std::fs::read(copy.join("q0.tbl")).unwrap()).unwrap();
    q0.ut_mut(0, 0, 0)[17][2] ^= 0x10;
    std::fs::write(copy.join("q0.tbl"), q0.to_bytes()).unwrap();
    let o = baes(&["verify", "--tables", s(&copy)]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["pass"], false);

    // A flipped byte on disk or a truncated file is a format error.
    let mut raw = std::fs::read(t.join("q0.tbl")).unwrap();
    raw[1000] ^= 1;
    std::fs::write(copy.join("q0.tbl"), &raw).unwrap();
    assert_eq!(code(&baes(&["verify", "--tables", s(&copy)])), 3);
    raw[1000] ^= 1;
    std::fs::write(copy.join("q0.tbl"), &raw[..raw.len() / 2]).unwrap();
    assert_eq!(code(&baes(&["verify", "--tables", s(&copy)])), 3);
    assert_eq!(code(&baes(&["verify", "--tables", "/nonexistent/dir"])), 3);
}

#[test]
fn analyses_write_csv_and_json() {
    let tmp = TempDir::new().unwrap();
    let t = s(tables());
    let out = tmp.path().join("reports");
    let o = baes(&["analyze", "walsh-ut", "--tables", t, "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let rep = json(&o);
    assert_eq!(rep["nonzero"], 0);
    assert_eq!(rep["entries"], 16 * 32 * 8 * 3);
    let csv = std::fs::read_to_string(out.join("walsh-ut.csv")).unwrap();
    assert!(csv.starts_with("i,j,out_byte,out_bit,hyp_bit,ell,walsh\n"));
    assert_eq!(csv.lines().count(), 1 + 16 * 32 * 8 * 3);
    assert!(out.join("walsh-ut.json").exists());

    let q0 = tmp.path().join("q0.btr");
    assert_eq!(
        code(&baes(&[
            "trace",
            "--tables",
            t,
            "--policy",
            "q0",
            "--count",
            "3000",
            "--out",
            s(&q0)
        ])),
        0
    );
    let o = baes(&[
        "analyze",
        "dca",
        "--traces",
        s(&q0),
        "--key",
        KEY,
        "--window",
        "ut:1",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("target,guess,score,rank,best_sample,best_bit\n"));
    assert_eq!(text.lines().count(), 1 + 128 * 256);
    let o = baes(&[
        "analyze",
        "dca",
        "--traces",
        s(&q0),
        "--key",
        KEY,
        "--window",
        "ut:1",
        "--expect",
        "protected",
    ]);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["min_rank"].as_u64().unwrap() > 200);

    let fixed = tmp.path().join("fixed.btr");
    let random = tmp.path().join("random.btr");
    let src = format!("fixed:{FIPS_PT}");
    assert_eq!(
        code(&baes(&[
            "trace",
            "--tables",
            t,
            "--source",
            &src,
            "--count",
            "2000",
            "--seed",
            "1",
            "--out",
            s(&fixed)
        ])),
        0
    );
    assert_eq!(
        code(&baes(&[
            "trace",
            "--tables",
            t,
            "--count",
            "2000",
            "--seed",
            "2",
            "--out",
            s(&random)
        ])),
        0
    );
    let o = baes(&[
        "analyze",
        "tvla",
        "--fixed",
        s(&fixed),
        "--random",
        s(&random),
        "--window",
        "round:1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    // Ciphertext bytes of a fixed plaintext are constant: the full trace fails.
    let o = baes(&[
        "analyze",
        "tvla",
        "--fixed",
        s(&fixed),
        "--random",
        s(&random),
    ]);
    assert_eq!(code(&o), 1);

    let o = baes(&["analyze", "baseline", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["predicted"].as_i64().unwrap().abs(), 256);

    let o = baes(&["analyze", "dca", "--traces", s(&q0)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_is_strict_and_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("tables = {:?}\npolicy = \"q1\"\nseed = 9\n", s(tables())),
    )
    .unwrap();
    let o = baes(&["encrypt", "--config", s(&cfg), "--pt", FIPS_PT]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), FIPS_CT);
    let o = baes(&["analyze", "baseline", "--config", s(&cfg), "--seed", "4"]);
    assert_eq!(json(&o)["seed"], 4);

    std::fs::write(&cfg, "tabels = \"x\"\n").unwrap();
    assert_eq!(code(&baes(&["verify", "--config", s(&cfg)])), 2);
}

#[test]
fn bench_reports_latency() {
    let o = baes(&["bench", "--tables", s(tables()), "--iterations", "2000"]);
    assert_eq!(code(&o), 0);
    let rep = json(&o);
    assert!(rep["mean_us"]["q0"].as_f64().unwrap() > 0.0);
    assert_eq!(rep["reference_point_us"], 19.0);
    assert_eq!(rep["lookups_per_block"], 1024.0);
}
