use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_hea-dvae");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        ok(&["synth", "--out", s(&f.dataset())]);
        f
    }

    fn dataset(&self) -> PathBuf {
        self.dir.path().join("hea.csv")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// A quick two-epoch model on the default split.
    fn train(&self, out: &str, epochs: &str) -> PathBuf {
        let out = self.path(out);
        ok(&[
            "train",
            "--dataset",
            s(&self.dataset()),
            "--seed-list",
            "0",
            "--max-epochs",
            epochs,
            "--hidden",
            "16,16",
            "--out",
            s(&out),
        ]);
        out.join("seed_0").join("checkpoint.json")
    }
}

#[test]
fn synth_writes_the_full_dataset() {
    let f = Fixture::new();
    let text = std::fs::read_to_string(f.dataset()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("formula,label"));
    assert_eq!(lines.count(), 1373);
}

#[test]
fn untrained_checkpoint_evaluates_near_chance() {
    let f = Fixture::new();
    let out = f.path("untrained");
    let stdout = ok(&[
        "train",
        "--dataset",
        s(&f.dataset()),
        "--seed-list",
        "0",
        "--max-epochs",
        "0",
        "--out",
        s(&out),
    ]);
    assert!(
        stdout.contains("split sizes: labelled 864 / unlabelled 296 / validation 75 / test 138"),
        "{stdout}"
    );
    for file in [
        "checkpoint.json",
        "training_log.csv",
        "metrics.json",
        "roc_train.csv",
        "roc_val.csv",
        "roc_test.csv",
    ] {
        assert!(out.join("seed_0").join(file).exists(), "{file}");
    }
    assert!(out.join("metrics_summary.json").exists());
    let ckpt = out.join("seed_0/checkpoint.json");
    let roc = f.path("roc.csv");
    let stdout = ok(&[
        "eval",
        "--checkpoint",
        s(&ckpt),
        "--dataset",
        s(&f.dataset()),
        "--roc-out",
        s(&roc),
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    let auc = v["auc"].as_f64().unwrap();
    assert!((0.3..=0.7).contains(&auc), "auc {auc}");
    assert_eq!(v["n"], 138);
    assert!(std::fs::read_to_string(roc)
        .unwrap()
        .starts_with("threshold,fpr,tpr\n"));
}

#[test]
fn same_seed_gives_identical_files() {
    let f = Fixture::new();
    let a = f.train("a", "2");
    let b = f.train("b", "2");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let log = |p: &Path| std::fs::read(p.parent().unwrap().join("training_log.csv")).unwrap();
    assert_eq!(log(&a), log(&b));

    let grid = |name: &str| {
        let p = f.path(name);
        ok(&[
            "grid",
            "--checkpoint",
            s(&a),
            "--z1=-0.1:0.1:5",
            "--z2=-0.5:-0.3:5",
            "--targets",
            "0,1",
            "--out",
            s(&p),
        ]);
        std::fs::read(p).unwrap()
    };
    assert_eq!(grid("g1.csv"), grid("g2.csv"));
    let map = |name: &str| {
        let p = f.path(name);
        ok(&[
            "latent-map",
            "--checkpoint",
            s(&a),
            "--dataset",
            s(&f.dataset()),
            "--out",
            s(&p),
        ]);
        std::fs::read(p).unwrap()
    };
    assert_eq!(map("m1.json"), map("m2.json"));
}

#[test]
fn design_commands() {
    let f = Fixture::new();
    let ckpt = f.train("t", "2");
    let c = s(&ckpt);

    let grid = f.path("grid.csv");
    let out = ok(&[
        "grid",
        "--checkpoint",
        c,
        "--z1=-0.1:0.1:5",
        "--z2=-0.5:-0.3:5",
        "--targets",
        "0,1",
        "--out",
        s(&grid),
    ]);
    assert_eq!(out.trim(), "50 rows");
    let text = std::fs::read_to_string(&grid).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("z1,z2,target_p,alloy_formula,recheck_p")
    );
    assert_eq!(text.lines().count(), 51);

    let out = ok(&[
        "invert",
        "--checkpoint",
        c,
        "--formula",
        "Fe14Ni16Cr22Co14Al22Cu8",
        "--max-iters",
        "3",
        "--json-out",
        s(&f.path("inv.json")),
    ]);
    assert!(out.starts_with("Fe14Ni16Cr22Co14Al22Cu8 (y="), "{out}");
    let trace: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.path("inv.json")).unwrap()).unwrap();
    let n = trace["steps"].as_array().unwrap().len();
    assert!((1..=4).contains(&n));
    assert_eq!(out.matches(" -> ").count(), n - 1);

    let out = ok(&[
        "generate",
        "--checkpoint",
        c,
        "--z=0.0,-0.8",
        "--target-p",
        "0.9",
    ]);
    let g: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert!(g["formula"].is_string() && g["recheck_p"].is_number());

    let cands = f.path("cands.txt");
    std::fs::write(&cands, "NbMoTaW\nCoCrFeMnNi\n# comment\nAlCoCrFeNi\n").unwrap();
    let out = ok(&[
        "screen",
        "--checkpoint",
        c,
        "--candidates",
        s(&cands),
        "--cutoff",
        "0",
    ]);
    let probs: Vec<f64> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 3);
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn analysis_commands() {
    let f = Fixture::new();
    let ckpt = f.train("t", "2");
    let (c, d) = (s(&ckpt), f.dataset());

    let rec = f.path("rec.csv");
    let hist = f.path("hist.csv");
    let out = ok(&[
        "reconstruct",
        "--checkpoint",
        c,
        "--dataset",
        s(&d),
        "--out",
        s(&rec),
        "--hist-out",
        s(&hist),
    ]);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["n"], 138);
    assert!(v["mean_mae"].as_f64().unwrap() <= v["max_mae"].as_f64().unwrap());
    let total: usize = std::fs::read_to_string(hist)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 138);

    let csv = f.path("shap.csv");
    let json = f.path("bees.json");
    ok(&[
        "shap",
        "--checkpoint",
        c,
        "--dataset",
        s(&d),
        "--split",
        "validation",
        "--max-background",
        "16",
        "--csv-out",
        s(&csv),
        "--json-out",
        s(&json),
    ]);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 76);
    let bees: serde_json::Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(bees.as_array().unwrap().len(), 8);

    let map = f.path("map.json");
    let svg = f.path("map.svg");
    let groups = f.path("groups.json");
    ok(&[
        "latent-map",
        "--checkpoint",
        c,
        "--dataset",
        s(&d),
        "--out",
        s(&map),
        "--svg",
        s(&svg),
        "--groups-out",
        s(&groups),
    ]);
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
    let g: serde_json::Value = serde_json::from_slice(&std::fs::read(groups).unwrap()).unwrap();
    assert_eq!(g.as_array().unwrap().len(), 3);
}

#[test]
fn baseline_comparison_rows() {
    let f = Fixture::new();
    let out = f.path("table.csv");
    let stdout = ok(&[
        "baseline",
        "--dataset",
        s(&f.dataset()),
        "--labelled",
        "60,120",
        "--unlabelled",
        "40,20",
        "--validation",
        "30",
        "--test",
        "40",
        "--seeds",
        "2",
        "--max-epochs",
        "2",
        "--hidden",
        "8,8",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("60 labelled / 40 unlabelled"), "{stdout}");
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 5);
}

#[test]
fn failures_exit_with_their_class() {
    let f = Fixture::new();
    let missing = run(&[
        "eval",
        "--checkpoint",
        "/nonexistent/ckpt.json",
        "--dataset",
        s(&f.dataset()),
    ]);
    assert_eq!(missing.status.code(), Some(3));
    let line = String::from_utf8(missing.stderr).unwrap();
    assert_eq!(line.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["error"], "data");

    assert_eq!(
        run(&["train", "--out", "/tmp/x", "--bogus"]).status.code(),
        Some(2)
    );
    let no_data = run(&[
        "train",
        "--dataset",
        "/nonexistent.csv",
        "--out",
        s(&f.path("x")),
    ]);
    assert_eq!(no_data.status.code(), Some(3));
    let bad_cfg = run(&[
        "train",
        "--dataset",
        s(&f.dataset()),
        "--batch-size",
        "0",
        "--out",
        s(&f.path("x")),
    ]);
    assert_eq!(bad_cfg.status.code(), Some(2));
    let bad_axis = run(&[
        "grid",
        "--checkpoint",
        "x.json",
        "--z1",
        "1:2",
        "--z2",
        "0:1:3",
        "--out",
        "g.csv",
    ]);
    assert_eq!(bad_axis.status.code(), Some(2));
}

#[test]
fn serve_answers_http() {
    let f = Fixture::new();
    let ckpt = f.train("t", "0");
    let port = 38_000 + (std::process::id() % 2000) as u16;
    let mut child = Command::new(BIN)
        .args([
            "serve",
            "--port",
            &port.to_string(),
            "--dataset",
            s(&f.dataset()),
        ])
        .env("DVAE_CHECKPOINT", &ckpt)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    let mut stream = loop {
        match TcpStream::connect(("127.0.0.1", port)) {
            Ok(s) => break s,
            Err(_) if start.elapsed() < Duration::from_secs(20) => {
                std::thread::sleep(Duration::from_millis(50))
            }
            Err(e) => {
                child.kill().ok();
                panic!("server did not start: {e}");
            }
        }
    };
    let body = r#"{"formula":"Fe20Ni20Co20Ti20Cu20"}"#;
    write!(
        stream,
        "POST /api/classify HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().ok();
    child.wait().ok();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"probability\""));
}
