//! `train`, `pretrain`, and `eval`.

use std::path::Path;

use hbdr::config::RunConfig;
use hbdr::dataio::{export_grid, LabeledDataset};
use hbdr::model_file::{ModelFile, ModelKind};
use hbdr::rbm::RbmParams;
use hbdr::training::{build_cnn, evaluate, EpochStats, TrainReport};
use hbdr::{dbn, Exec, Rng};

use crate::args::{EvalArgs, PretrainArgs, TrainArgs};
use crate::common::*;

fn progress(stats: &EpochStats, total: usize) {
    eprintln!(
        "epoch {:>3}/{total}  loss {:.4}  test accuracy {:.4}  ({:.1}s)",
        stats.epoch, stats.train_loss, stats.test_accuracy, stats.seconds
    );
}

/// Tracks the model after the best epoch; ties keep the earlier epoch.
struct Best<M> {
    accuracy: f64,
    model: Option<M>,
}

impl<M: Clone> Best<M> {
    fn new() -> Self {
        Best {
            accuracy: f64::NEG_INFINITY,
            model: None,
        }
    }

    fn offer(&mut self, enabled: bool, model: &M, stats: &EpochStats) {
        if enabled && stats.test_accuracy > self.accuracy {
            self.accuracy = stats.test_accuracy;
            self.model = Some(model.clone());
        }
    }
}

fn pretrain_stack(cfg: &RunConfig, ds: &LabeledDataset, exec: Exec) -> CmdResult<Vec<RbmParams<f32>>> {
    let train = ds.train_indices()?;
    let rows: Vec<&[f32]> = train.iter().map(|&i| ds.image(i)).collect();
    let layers = cfg.network.dbn.layer_sizes.len() - 1;
    let stack = dbn::greedy_pretrain_observed(&rows, &cfg.network.dbn, cfg.network.seed, exec, |layer, _, _| {
        eprintln!(
            "pretraining RBM {}/{layers} for {} epochs",
            layer + 1,
            cfg.network.dbn.pretrain_epochs
        );
    })
    .input("invalid pretraining setup")?;
    Ok(stack)
}

fn write_reports(out: &Path, report: &TrainReport, ds: &LabeledDataset) -> CmdResult {
    write(out, "report.csv", &report.report_csv())?;
    write(out, "confusion.csv", &report.confusion_csv())?;
    write(out, "misclassified.csv", &report.misclassified_csv())?;
    let [_, h, w] = ds.image_shape();
    let mut tiles: Vec<Vec<f32>> = report.misclassified.iter().map(|&(i, _, _)| ds.image(i).to_vec()).collect();
    if tiles.is_empty() {
        tiles.push(vec![1.0; h * w]);
    }
    export_grid(&tiles, w, h, 10, &out.join("misclassified.pgm"))?;
    Ok(())
}

pub fn train(args: &TrainArgs, exec: Exec) -> CmdResult {
    let mut cfg = resolve_config(&args.run)?;
    cfg.save_best |= args.save_best;
    let ds = load_split(&cfg, exec)?;
    create_dir(&args.out)?;
    let echo = cfg.to_text();
    let net_cfg = &cfg.network;
    let tc = net_cfg.train_config();
    let n_train = ds.train_indices()?.len();
    let n_test = ds.test_indices()?.len();
    eprintln!(
        "training {} on {n_train} images, testing on {n_test}, {} epochs",
        net_cfg.variant, tc.epochs
    );
    let report = if net_cfg.variant.is_cnn() {
        let mut net = build_cnn(net_cfg, &mut Rng::substream(net_cfg.seed, "init")).input("invalid network configuration")?;
        let mut best = Best::new();
        let report = hbdr::training::train_observed(&mut net, &ds, &tc, exec, |m, s| {
            progress(s, tc.epochs);
            best.offer(cfg.save_best, m, s);
        })
        .input("training failed")?;
        ModelFile::from_cnn(&net, &echo).save(&args.out.join("model.hbdr"))?;
        if let Some(b) = best.model {
            ModelFile::from_cnn(&b, &echo).save(&args.out.join("best.hbdr"))?;
        }
        report
    } else {
        let stack = match &args.stack {
            Some(path) => {
                let file = load_model(path)?;
                if file.kind != ModelKind::RbmStack {
                    return Err(input_error(format!("{} is a {} model, not an rbm-stack", path.display(), file.kind.name())));
                }
                file.to_stack().input("invalid rbm-stack")?
            }
            None => pretrain_stack(&cfg, &ds, exec)?,
        };
        ModelFile::from_stack(&stack, &echo).save(&args.out.join("stack.hbdr"))?;
        let mut best = Best::new();
        let (net, report) = dbn::finetune_observed(&stack, &ds, &tc, net_cfg.dbn.classes, false, exec, |m, s| {
            progress(s, tc.epochs);
            best.offer(cfg.save_best, m, s);
        })
        .input("fine-tuning failed")?;
        ModelFile::from_dbn(&net, &echo).save(&args.out.join("model.hbdr"))?;
        if let Some(b) = best.model {
            ModelFile::from_dbn(&b, &echo).save(&args.out.join("best.hbdr"))?;
        }
        report
    };
    write_reports(&args.out, &report, &ds)?;
    if let Some(acc) = report.final_accuracy() {
        println!("final test accuracy {acc:.6}");
    }
    if let Some(b) = report.best_epoch() {
        println!("best test accuracy {:.6} at epoch {}", b.test_accuracy, b.epoch);
    }
    Ok(())
}

pub fn pretrain(args: &PretrainArgs, exec: Exec) -> CmdResult {
    let mut cfg = resolve_config(&args.run)?;
    cfg.network.variant = hbdr::training::Variant::Dbn;
    let ds = load_split(&cfg, exec)?;
    create_dir(&args.out)?;
    let stack = pretrain_stack(&cfg, &ds, exec)?;
    let path = args.out.join("stack.hbdr");
    ModelFile::from_stack(&stack, &cfg.to_text()).save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn eval(args: &EvalArgs, exec: Exec) -> CmdResult {
    let file = load_model(&args.model)?;
    let mut cfg = model_config(&file)?;
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    } else if cfg.data.is_none() {
        cfg.data = std::env::var("HBDR_DATA").ok().filter(|s| !s.is_empty());
    }
    let model = classifier(&file, &cfg)?;
    let ds = load_split(&cfg, exec)?;
    let test = ds.test_indices()?;
    let e = evaluate(model.as_ref(), &ds, test, exec).input("model does not fit the dataset")?;
    println!("model {} ({})", cfg.network.variant, file.kind.name());
    println!("test samples {}", test.len());
    println!("accuracy {:.6}", e.accuracy);
    for (c, (recall, row)) in e.per_class_recall().iter().zip(&e.confusion).enumerate() {
        let total: u32 = row.iter().sum();
        match recall {
            Some(r) => println!("class {c} recall {r:.6} ({}/{total})", row[c]),
            None => println!("class {c} recall n/a (0 samples)"),
        }
    }
    Ok(())
}
