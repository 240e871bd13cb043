//! PGM exports of filters, weights, and misclassified digits.

use std::path::Path;

use hbdr::dataio::{export_grid, export_pgm, min_max_scale};
use hbdr::filters::{gabor_bank, gaussian_bank, GaborSpec};
use hbdr::model_file::{ModelFile, ModelKind};
use hbdr::training::evaluate;
use hbdr::{Exec, Rng, Tensor};

use crate::args::{BankKind, ExportArgs, ExportWhat, FilterArgs};
use crate::common::*;

/// Writes `<prefix>_NNN.pgm` per tile (min-max scaled) and `<prefix>.pgm` as
/// a mosaic.
fn write_tiles(out: &Path, prefix: &str, tiles: &[Vec<f32>], w: usize, h: usize, columns: usize) -> CmdResult {
    let scaled: Vec<Vec<f32>> = tiles.iter().map(|t| min_max_scale(t)).collect();
    for (i, t) in scaled.iter().enumerate() {
        export_pgm(t, w, h, &out.join(format!("{prefix}_{i:03}.pgm")))?;
    }
    export_grid(&scaled, w, h, columns, &out.join(format!("{prefix}.pgm")))?;
    println!("wrote {} {prefix} tiles of {w}x{h} to {}", tiles.len(), out.display());
    Ok(())
}

/// Splits `[count, 1, k, k]` kernels into tiles.
fn kernel_tiles(kernels: &Tensor<f32>) -> CmdResult<(Vec<Vec<f32>>, usize, usize)> {
    let s = kernels.shape();
    if s.len() != 4 || s[1] != 1 {
        return Err(input_error(format!("expected single-channel kernels, got shape {s:?}")));
    }
    let n = s[2] * s[3];
    Ok((kernels.data().chunks(n).map(<[f32]>::to_vec).collect(), s[3], s[2]))
}

/// Incoming weight vectors per hidden unit, from `[out, in]` dense weights.
fn unit_rows(weights: &Tensor<f32>) -> Vec<Vec<f32>> {
    let inputs = weights.shape()[1];
    weights.data().chunks(inputs).map(<[f32]>::to_vec).collect()
}

fn square_side(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

fn export_weights(file: &ModelFile, out: &Path) -> CmdResult {
    let layers: Vec<Tensor<f32>> = match file.kind {
        ModelKind::RbmStack => file
            .to_stack()
            .input("invalid rbm-stack")?
            .iter()
            .map(|r| r.w.transpose())
            .collect::<Result<_, _>>()?,
        ModelKind::Dbn => {
            let net = file.to_dbn().input("invalid DBN model")?;
            net.layers[..net.layers.len() - 1].iter().map(|l| l.weights.clone()).collect()
        }
        ModelKind::Cnn => {
            let (tiles, w, h) = kernel_tiles(file.tensor("c1.kernels").input("invalid CNN model")?)?;
            return write_tiles(out, "c1", &tiles, w, h, 8);
        }
    };
    for (l, weights) in layers.iter().enumerate() {
        let rows = unit_rows(weights);
        let Some(side) = square_side(weights.shape()[1]) else {
            eprintln!("skipping layer {}: {} inputs do not form a square tile", l + 1, weights.shape()[1]);
            continue;
        };
        write_tiles(out, &format!("layer{}", l + 1), &rows, side, side, 10)?;
    }
    Ok(())
}

fn export_misclassified(file: &ModelFile, data: Option<&String>, out: &Path, exec: Exec) -> CmdResult {
    let mut cfg = model_config(file)?;
    if let Some(d) = data {
        cfg.data = Some(d.clone());
    } else if cfg.data.is_none() {
        cfg.data = std::env::var("HBDR_DATA").ok().filter(|s| !s.is_empty());
    }
    let model = classifier(file, &cfg)?;
    let ds = load_split(&cfg, exec)?;
    let e = evaluate(model.as_ref(), &ds, ds.test_indices()?, exec).input("model does not fit the dataset")?;
    let [_, h, w] = ds.image_shape();
    let mut csv = String::from("index,true,predicted\n");
    for &(i, t, p) in &e.misclassified {
        export_pgm(ds.image(i), w, h, &out.join(format!("{i:06}_true{t}_pred{p}.pgm")))?;
        csv.push_str(&format!("{i},{t},{p}\n"));
    }
    write(out, "misclassified.csv", &csv)?;
    let mut tiles: Vec<Vec<f32>> = e.misclassified.iter().map(|&(i, _, _)| ds.image(i).to_vec()).collect();
    if tiles.is_empty() {
        tiles.push(vec![1.0; h * w]);
    }
    export_grid(&tiles, w, h, 10, &out.join("misclassified.pgm"))?;
    println!("wrote {} misclassified digits to {}", e.misclassified.len(), out.display());
    Ok(())
}

pub fn export(args: &ExportArgs, exec: Exec) -> CmdResult {
    let file = load_model(&args.model)?;
    create_dir(&args.out)?;
    match args.what {
        ExportWhat::Filters => {
            if file.kind != ModelKind::Cnn {
                return Err(input_error(format!(
                    "a {} model has no convolution filters; use --what weights",
                    file.kind.name()
                )));
            }
            let (tiles, w, h) = kernel_tiles(file.tensor("c1.kernels").input("invalid CNN model")?)?;
            write_tiles(&args.out, "filter", &tiles, w, h, 8)
        }
        ExportWhat::Weights => export_weights(&file, &args.out),
        ExportWhat::Misclassified => export_misclassified(&file, args.data.as_ref(), &args.out, exec),
    }
}

pub fn export_filters(args: &FilterArgs) -> CmdResult {
    let bank: Tensor<f32> = match args.kind {
        BankKind::Gabor => gabor_bank(args.count, args.size, &GaborSpec::default(), true),
        BankKind::Gaussian => gaussian_bank(args.count, args.size, args.std, &mut Rng::substream(args.seed, "init")),
    }
    .input("invalid filter bank")?;
    create_dir(&args.out)?;
    let (tiles, w, h) = kernel_tiles(&bank)?;
    write_tiles(&args.out, "filter", &tiles, w, h, 8)
}
