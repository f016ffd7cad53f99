use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = include_str!("tiny.toml");

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        Self { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn nic(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_nic"))
            .current_dir(self.path())
            .args(["--config", "tiny.toml"])
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs a command that must succeed and returns its run directory.
    fn ok(&self, args: &[&str]) -> PathBuf {
        let out = self.nic(args);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        let line = stdout.lines().find(|l| l.contains("outputs in ")).unwrap();
        self.path().join(line.split("outputs in ").nth(1).unwrap())
    }

    fn code(&self, args: &[&str]) -> i32 {
        self.nic(args).status.code().unwrap()
    }

    fn data(&self) -> PathBuf {
        self.ok(&["gen-data"])
    }

    fn compressed(&self, data: &Path) -> PathBuf {
        let enc = self.ok(&["train-encoder", "--patches", s(&data.join("patches"))]);
        self.ok(&["compress", "--checkpoint", s(&enc.join("encoder.nicp")), "--images", s(&data.join("wsi"))])
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn single_task_encoder_trains_one_head() {
    let ws = Workspace::new();
    let data = ws.data();
    let enc = ws.ok(&["train-encoder", "--tasks", "colorectal", "--patches", s(&data.join("patches"))]);
    let header = read(&enc.join("history.csv")).lines().next().unwrap().to_string();
    assert_eq!(header, "epoch,lr,train_loss,val_acc_colorectal,val_acc_mean");
    assert!(read(&enc.join("config.toml")).contains("tasks = \"colorectal\""));
}

#[test]
fn code_size_flag_reaches_the_checkpoint() {
    let ws = Workspace::new();
    let data = ws.data();
    let enc = ws.ok(&["train-encoder", "--code-size", "6", "--patches", s(&data.join("patches"))]);
    let params = nic_autodiff::ParamStore::load(enc.join("encoder.nicp")).unwrap();
    assert_eq!(params.get("encoder.dense.weight").unwrap().shape()[1], 6);
}

#[test]
fn missing_inputs_fail_before_any_run_dir_exists() {
    let ws = Workspace::new();
    assert_eq!(ws.code(&["train-encoder", "--patches", "no/such/dir"]), 2);
    assert_eq!(ws.code(&["train-encoder"]), 2);
    assert!(!ws.path().join("runs").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let ws = Workspace::new();
    std::fs::write(ws.path().join("tiny.toml"), format!("{TINY}\n[ablation]\nrepeat = 2\n")).unwrap();
    assert_eq!(ws.code(&["gen-data"]), 2);
    std::fs::write(ws.path().join("tiny.toml"), TINY.replace("code_size = 4\n\n[multitask]", "code_size = 5\n\n[multitask]")).unwrap();
    assert_eq!(ws.code(&["gen-data"]), 2);
}

#[test]
fn corrupt_image_is_a_data_error() {
    let ws = Workspace::new();
    let data = ws.data();
    let enc = ws.ok(&["train-encoder", "--patches", s(&data.join("patches"))]);
    let img = data.join("wsi/wsi_0000.ppm");
    let bytes = std::fs::read(&img).unwrap();
    std::fs::write(&img, &bytes[..bytes.len() / 2]).unwrap();
    let code = ws.code(&["compress", "--checkpoint", s(&enc.join("encoder.nicp")), "--images", s(&data.join("wsi"))]);
    assert_eq!(code, 3);
}

#[test]
fn compress_writes_manifest_and_is_idempotent() {
    let ws = Workspace::new();
    let data = ws.data();
    let enc = ws.ok(&["train-encoder", "--patches", s(&data.join("patches"))]);
    let (ckpt, images) = (enc.join("encoder.nicp"), data.join("wsi"));
    let args = ["compress", "--checkpoint", s(&ckpt), "--images", s(&images)];
    let first = ws.ok(&args);
    let manifest = read(&first.join("manifest.csv"));
    assert_eq!(manifest.lines().count(), 1 + 12);
    assert!(manifest.lines().skip(1).all(|l| l.ends_with(',')), "no warnings expected");
    let snapshot: Vec<Vec<u8>> = (0..12)
        .map(|i| std::fs::read(first.join(format!("wsi_{i:04}.nicw"))).unwrap())
        .collect();

    let second = ws.ok(&args);
    assert_eq!(first, second);
    for (i, bytes) in snapshot.iter().enumerate() {
        assert_eq!(&std::fs::read(second.join(format!("wsi_{i:04}.nicw"))).unwrap(), bytes);
    }

    std::fs::write(enc.join("encoder.sha256"), "00").unwrap();
    let third = ws.ok(&args);
    assert!(read(&third.join("manifest.csv")).contains("checkpoint digest mismatch"));
}

#[test]
fn train_wsi_and_evaluate_regression() {
    let ws = Workspace::new();
    let data = ws.data();
    let comp = ws.compressed(&data);
    let labels = data.join("wsi/labels.csv");
    let args = ["train-wsi", "--compressed", s(&comp), "--labels", s(&labels)];
    let run = ws.ok(&args);
    let preds = read(&run.join("predictions.csv"));
    let mut ids: Vec<&str> = preds.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 12, "one out-of-fold prediction per image");
    assert_eq!(preds.lines().count(), 13);
    for r in 0..3 {
        assert!(run.join(format!("fold{r}.nicp")).exists());
    }

    // Same config and seed: same run directory, same bytes.
    std::fs::remove_file(run.join("predictions.csv")).unwrap();
    ws.ok(&args);
    assert_eq!(read(&run.join("predictions.csv")), preds);

    let eval = ws.ok(&["evaluate", "--predictions", s(&run.join("predictions.csv"))]);
    let report = read(&eval.join("report.csv"));
    for key in ["rho,", "ci_fisher_lo,", "ci_fisher_hi,", "ci_bootstrap_lo,"] {
        assert!(report.contains(key), "{key} missing from {report}");
    }
}

#[test]
fn survival_needs_a_cohort_and_reports_log_rank() {
    let ws = Workspace::new();
    let data = ws.data();
    let comp = ws.compressed(&data);
    assert_eq!(ws.code(&["train-wsi", "--compressed", s(&comp), "--objective", "cox"]), 2);
    let cohort = data.join("wsi/cohort.csv");
    let run = ws.ok(&["train-wsi", "--compressed", s(&comp), "--objective", "cox", "--cohort", s(&cohort)]);
    let eval = ws.ok(&[
        "evaluate",
        "--objective",
        "cox",
        "--predictions",
        s(&run.join("predictions.csv")),
        "--cohort",
        s(&cohort),
    ]);
    let report = read(&eval.join("report.csv"));
    assert!(report.contains("chi_square,") && report.contains("p_value,"));
    assert!(eval.join("km_low.csv").exists() && eval.join("km_high.csv").exists());
}

#[test]
fn evaluate_reference_ablation_table() {
    let ws = Workspace::new();
    let csv = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/reference_ablation.csv");
    let eval = ws.ok(&["evaluate", "--ablation", s(&csv)]);
    let report = read(&eval.join("report.csv"));
    let value = |task: &str| -> f64 {
        let line = report.lines().find(|l| l.starts_with(&format!("{task},"))).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    for (task, want) in [("lymph", 0.319), ("mitosis", 0.033), ("prostate", 0.077), ("colorectal", 0.824)] {
        assert!((value(task) - want).abs() <= 5e-4, "{task}: {}", value(task));
    }
}

#[test]
fn ablation_sweep_shape() {
    let ws = Workspace::new();
    let data = ws.data();
    let run = ws.ok(&[
        "ablate",
        "--repeat-full",
        "3",
        "--patches",
        s(&data.join("patches")),
        "--images",
        s(&data.join("wsi")),
        "--labels",
        s(&data.join("wsi/labels.csv")),
    ]);
    let table = read(&run.join("ablation.csv"));
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 18);
    assert_eq!(rows.iter().filter(|r| r.starts_with("Yes,Yes,Yes,Yes,")).count(), 4);
}
