//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails. Dataset-dependent criteria run only when their data is
//! configured:
//!
//! * `HBDR_DATA`: a directory of class subdirectories `0`..`9` of 32×32
//!   grayscale images (CMATERdb layout).
//! * `HBDR_MNIST`: `images,labels` paths of an IDX pair.

#[path = "../../core/tests/support/fd.rs"]
mod fd;
#[path = "../../core/tests/support/rbm_oracle.rs"]
mod rbm_oracle;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use hbdr::dataio::export_dir;
use hbdr::synthetic::synthetic_digits;
use hbdr::training::{self, build_cnn, NetworkConfig, Variant};
use hbdr::Rng;
use tempfile::TempDir;

const FD_TOL: f64 = 1e-4;
const RBM_SUM_TOL: f64 = 1e-12;
const RBM_GRAD_TOL: f64 = 1e-6;
const CURVE_TOL: f64 = 0.03;
/// Epoch-30 accuracy below this means the curve comparison says nothing.
const CURVE_FLOOR: f64 = 0.5;
const SMOKE: [&str; 4] = ["--epochs", "1", "--train-per-class", "50"];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Suite {
    failed: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let mut outcome = f();
        let took = start.elapsed();
        if let (Some(b), Outcome::Pass(detail)) = (budget, &outcome) {
            if took > b {
                outcome = Outcome::Fail(format!("{detail}; over the {}s budget", b.as_secs()));
            }
        }
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {id}. {name}: {detail} ({:.1}s)", took.as_secs_f64());
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn hbdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbdr"))
        .args(args)
        .env_remove("HBDR_DATA")
        .output()
        .expect("spawn hbdr")
}

fn checked(args: &[&str]) -> Result<Output, String> {
    let o = hbdr(args);
    if o.status.success() {
        Ok(o)
    } else {
        Err(format!(
            "`hbdr {}` exited {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr).trim()
        ))
    }
}

/// Value after `prefix` on the first stdout line that starts with it.
fn reported(o: &Output, prefix: &str) -> Option<f64> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse().ok())
}

/// `(epoch, test_accuracy)` rows of a report.csv.
fn report_rows(dir: &Path) -> Result<Vec<(usize, f64)>, String> {
    let text = fs::read_to_string(dir.join("report.csv")).map_err(|e| e.to_string())?;
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            match (f.first().map(|s| s.parse()), f.get(2).map(|s| s.parse())) {
                (Some(Ok(e)), Some(Ok(a))) => Ok((e, a)),
                _ => Err(format!("bad report row {l:?}")),
            }
        })
        .collect()
}

/// All files under `dir` with their contents, keyed by relative path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn parameter_accounting() -> Outcome {
    let net = build_cnn(&NetworkConfig::default(), &mut Rng::new(0)).unwrap();
    let counts: Vec<usize> = training::layer_param_counts(&net).iter().map(|l| l.count).collect();
    let total = training::param_count(&net);
    verdict(
        counts == [832, 0, 53_248, 0, 519_168, 3_130] && total == 576_378,
        format!("per layer {counts:?}, total {total}"),
    )
}

fn shape_ladder() -> Outcome {
    let net = build_cnn(&NetworkConfig::default(), &mut Rng::new(0)).unwrap();
    let shapes = net.trace_shapes(&vec![0.5; 1024]).unwrap();
    let expect: Vec<Vec<usize>> = vec![vec![32, 28, 28], vec![32, 14, 14], vec![64, 10, 10], vec![64, 5, 5], vec![312], vec![10]];
    verdict(shapes == expect, format!("{shapes:?}"))
}

fn gradient_suite() -> Outcome {
    let checks: [(&str, fn() -> f64); 7] = [
        ("conv", fd::conv_layer),
        ("maxpool", fd::maxpool),
        ("fc", fd::fc_layer),
        ("loss", fd::loss_heads),
        ("dropout", fd::dropout),
        ("cnn", fd::shrunken_cnn),
        ("dbn", fd::unrolled_dbn),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, check) in checks {
        let worst = check();
        ok &= worst <= FD_TOL;
        parts.push(format!("{name} {worst:.1e}"));
    }
    verdict(
        ok,
        format!("worst relative error over {} instances each: {} (tol {FD_TOL:e})", fd::INSTANCES, parts.join(", ")),
    )
}

fn rbm_suite() -> Outcome {
    let (sum_err, marginal_err) = rbm_oracle::normalization_worst(40, 21);
    let grad = rbm_oracle::gradient_fd_worst(30, 22);
    let (before, after) = rbm_oracle::bars_and_stripes_cd1(0);
    verdict(
        sum_err <= RBM_SUM_TOL && marginal_err <= RBM_SUM_TOL && grad <= RBM_GRAD_TOL && after > before,
        format!(
            "|sum p - 1| {sum_err:.1e}, gradient rel err {grad:.1e}, bars-and-stripes mean log p {before:.5} -> {after:.5}"
        ),
    )
}

fn final_accuracy(args: &[&str]) -> Result<(f64, f64), String> {
    let o = checked(args)?;
    let last = reported(&o, "final test accuracy ").ok_or("no final accuracy reported")?;
    let best = reported(&o, "best test accuracy ").ok_or("no best accuracy reported")?;
    Ok((last, best))
}

fn table_two(root: &str) -> Outcome {
    let tmp = TempDir::new().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (variant, floor) in [
        ("cnn-gabor-dropout", 0.975),
        ("cnn-gaussian-dropout", 0.973),
        ("cnn-gaussian", 0.965),
        ("dbn", 0.955),
    ] {
        let out = tmp.path().join(variant);
        let args = [
            "train", "--variant", variant, "--data", root, "--train-per-class", "500", "--test-per-class", "100",
            "--epochs", "30", "--out", out.to_str().unwrap(),
        ];
        match final_accuracy(&args) {
            Ok((acc, _)) => {
                ok &= acc >= floor;
                parts.push(format!("{variant} {acc:.4} (>= {floor})"));
            }
            Err(e) => return Outcome::Fail(e),
        }
    }
    verdict(ok, parts.join(", "))
}

fn table_three(root: &str) -> Outcome {
    let tmp = TempDir::new().unwrap();
    let args = [
        "train", "--variant", "cnn-gabor-dropout", "--data", root, "--train-per-class", "400", "--test-per-class",
        "200", "--epochs", "30", "--out", tmp.path().to_str().unwrap(),
    ];
    match final_accuracy(&args) {
        Ok((last, best)) => verdict(best >= 0.973, format!("best epoch {best:.4} (>= 0.973), final {last:.4}")),
        Err(e) => Outcome::Fail(e),
    }
}

fn mnist_fallback(pair: &str) -> Outcome {
    let tmp = TempDir::new().unwrap();
    let data = format!("idx:{pair}");
    let args = [
        "train", "--variant", "cnn-gaussian-dropout", "--data", &data, "--train-per-class", "500",
        "--test-per-class", "100", "--epochs", "30", "--out", tmp.path().to_str().unwrap(),
    ];
    match final_accuracy(&args) {
        Ok((acc, _)) => verdict(acc >= 0.97, format!("test accuracy {acc:.4} (>= 0.97)")),
        Err(e) => Outcome::Fail(e),
    }
}

/// A class-directory tree of synthetic digits.
fn smoke_tree(per_class: usize) -> TempDir {
    let dir = TempDir::new().unwrap();
    let ds = synthetic_digits(per_class, 7).unwrap();
    let all: Vec<usize> = (0..ds.len()).collect();
    export_dir(&ds, &all, dir.path()).unwrap();
    dir
}

fn determinism(tree: &Path) -> Outcome {
    let data = tree.to_str().unwrap();
    let run = |threads: &str| -> Result<(Vec<(PathBuf, Vec<u8>)>, Vec<u8>), String> {
        let tmp = TempDir::new().unwrap();
        let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_owned();
        let (cnn, dbn, stack, filters, weights, wrong) =
            (p("cnn"), p("dbn"), p("stack"), p("filters"), p("weights"), p("wrong"));
        let base = ["--threads", threads];
        let mut stdout = Vec::new();
        for extra in [
            vec!["train", "--variant", "cnn-gabor-dropout", "--out", &cnn],
            vec!["train", "--variant", "dbn", "--out", &dbn],
            vec!["pretrain", "--out", &stack],
        ] {
            let mut args: Vec<&str> = base.to_vec();
            args.extend(extra);
            args.extend(["--data", data]);
            args.extend(SMOKE);
            checked(&args)?;
        }
        let cnn_model = format!("{cnn}/model.hbdr");
        let dbn_model = format!("{dbn}/model.hbdr");
        for model in [&cnn_model, &dbn_model] {
            let mut args: Vec<&str> = base.to_vec();
            args.extend(["eval", "--model", model, "--data", data]);
            stdout.extend(checked(&args)?.stdout);
        }
        // Export prints the paths it wrote, which differ between runs.
        for extra in [
            vec!["export", "--model", &cnn_model, "--what", "filters", "--out", &filters],
            vec!["export", "--model", &dbn_model, "--what", "weights", "--out", &weights],
            vec!["export", "--model", &cnn_model, "--what", "misclassified", "--data", data, "--out", &wrong],
        ] {
            let mut args: Vec<&str> = base.to_vec();
            args.extend(extra);
            checked(&args)?;
        }
        Ok((snapshot(tmp.path()), stdout))
    };
    let (one, four, again) = match (run("1"), run("4"), run("1")) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return Outcome::Fail(e),
    };
    let files = one.0.len();
    let mut problems: Vec<String> = one
        .0
        .iter()
        .zip(&four.0)
        .chain(one.0.iter().zip(&again.0))
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    if four.0.len() != files || again.0.len() != files {
        problems.push(format!("file counts {files}/{}/{}", four.0.len(), again.0.len()));
    }
    if one.1 != four.1 || one.1 != again.1 {
        problems.push("eval stdout".into());
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{files} output files and eval stdout byte-identical across --threads 1, 4 and a rerun")
        } else {
            format!("differing outputs: {}", problems.join(", "))
        },
    )
}

fn epoch_curves(tree: &Path) -> Outcome {
    let tmp = TempDir::new().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for v in Variant::ALL.into_iter().filter(|v| v.is_cnn()) {
        let out = tmp.path().join(v.name());
        let args = [
            "train", "--variant", v.name(), "--data", tree.to_str().unwrap(), "--train-per-class", "50", "--epochs",
            "30", "--out", out.to_str().unwrap(),
        ];
        if let Err(e) = checked(&args) {
            return Outcome::Fail(e);
        }
        let rows = match report_rows(&out) {
            Ok(r) => r,
            Err(e) => return Outcome::Fail(e),
        };
        let at = |epoch: usize| rows.iter().find(|r| r.0 == epoch).map(|r| r.1);
        let (Some(a15), Some(a30)) = (at(15), at(30)) else {
            return Outcome::Fail(format!("{v}: report lacks epoch 15 or 30"));
        };
        ok &= (a15 - a30).abs() <= CURVE_TOL && a30 >= CURVE_FLOOR;
        parts.push(format!("{v} {a15:.3}/{a30:.3}"));
    }
    verdict(
        ok,
        format!(
            "accuracy at epoch 15/30: {} (|diff| <= {CURVE_TOL}, epoch 30 >= {CURVE_FLOOR})",
            parts.join(", ")
        ),
    )
}

fn gated(var: &str, f: impl FnOnce(&str) -> Outcome) -> Outcome {
    match std::env::var(var) {
        Ok(v) if !v.is_empty() => f(&v),
        _ => Outcome::Skip(format!("{var} not set")),
    }
}

fn main() -> ExitCode {
    let mut suite = Suite { failed: 0 };
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    suite.run(1, "parameter accounting", None, parameter_accounting);
    suite.run(2, "shape ladder", None, shape_ladder);
    suite.run(3, "gradient suite", mins(2), gradient_suite);
    suite.run(4, "RBM exactness", mins(2), rbm_suite);
    suite.run(5, "table 2 on HBDR_DATA", mins(120), || gated("HBDR_DATA", table_two));
    suite.run(6, "table 3 protocol on HBDR_DATA", mins(90), || gated("HBDR_DATA", table_three));
    suite.run(7, "MNIST fallback", mins(60), || gated("HBDR_MNIST", mnist_fallback));
    let tree = smoke_tree(100);
    suite.run(8, "determinism", mins(10), || determinism(tree.path()));
    suite.run(9, "epoch curves", None, || epoch_curves(tree.path()));
    if suite.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", suite.failed);
        ExitCode::FAILURE
    }
}
