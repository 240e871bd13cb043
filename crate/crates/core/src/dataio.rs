//! Dataset ingestion, stratified splitting, and PGM export.
//!
//! Canonical layout is a class-directory tree `root/<digit>/<name>.(pgm|png)`
//! of 32x32 grayscale images. IDX files (the MNIST container format) are
//! accepted as a fallback; their 28x28 images are zero-padded to 32x32.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 32;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const CLASSES: usize = 10;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceFormat {
    ClassDirectories,
    Idx,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub path: PathBuf,
    pub format: SourceFormat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Images `[N, 1, 32, 32]` in `[0, 1]` with labels `0..=9`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub images: Tensor<f32>,
    pub labels: Vec<u8>,
    pub provenance: Provenance,
    pub split: Option<Split>,
}

impl LabeledDataset {
    pub fn new(images: Tensor<f32>, labels: Vec<u8>, provenance: Provenance) -> Result<Self> {
        let &[n, 1, _, _] = images.shape() else {
            return Err(Error::ShapeMismatch(format!(
                "dataset images must be [N, 1, H, W], got {:?}",
                images.shape()
            )));
        };
        if n != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{n} images but {} labels",
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= CLASSES) {
            return Err(Error::InvalidArgument(format!("label {l} outside 0..=9")));
        }
        if images.data().iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidArgument("pixel values must lie in [0, 1]".into()));
        }
        Ok(LabeledDataset {
            images,
            labels,
            provenance,
            split: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn pixels(&self) -> usize {
        self.image_shape().iter().product()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let p = self.pixels();
        &self.images.data()[i * p..(i + 1) * p]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut c = [0; CLASSES];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    pub fn train_indices(&self) -> Result<&[usize]> {
        Ok(&self.require_split()?.train)
    }

    pub fn test_indices(&self) -> Result<&[usize]> {
        Ok(&self.require_split()?.test)
    }

    fn require_split(&self) -> Result<&Split> {
        self.split
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("dataset has no train/test split".into()))
    }

    /// Thresholds every pixel: `1` where `x >= threshold`, else `0`.
    pub fn binarized(&self, threshold: f32) -> Self {
        LabeledDataset {
            images: self.images.map(|x| if x >= threshold { 1.0 } else { 0.0 }),
            ..self.clone()
        }
    }
}

fn luma(r: u8, g: u8, b: u8) -> f32 {
    (0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32) / 255.0
}

/// Reads one grayscale image as `[0, 1]` values, converting RGB by luma
/// weights `0.299 / 0.587 / 0.114`.
pub fn read_gray_image(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let img = image::open(path).map_err(|e| Error::data(path, format!("unreadable image: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = match img {
        image::DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
    };
    Ok((w, h, px))
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("pgm" | "png")
    )
}

/// Loads `root/<digit>/*.(pgm|png)`. Samples are ordered by class, then by
/// file name. Every image must already be 32x32.
pub fn load_dir(root: &Path, exec: Exec) -> Result<LabeledDataset> {
    let entries = fs::read_dir(root).map_err(|e| Error::data(root, format!("cannot read dataset root: {e}")))?;
    let mut classes = Vec::new();
    for entry in entries {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        match name.parse::<u8>() {
            Ok(d) if (d as usize) < CLASSES && name.len() == 1 => classes.push((d, entry.path())),
            _ => return Err(Error::data(entry.path(), "unknown class directory (expected 0..9)")),
        }
    }
    if classes.is_empty() {
        return Err(Error::data(root, "no classes found"));
    }
    classes.sort();

    let mut files = Vec::new();
    for (digit, dir) in &classes {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.is_file() && is_image_file(p));
        paths.sort();
        files.extend(paths.into_iter().map(|p| (*digit, p)));
    }
    if files.is_empty() {
        return Err(Error::data(root, "no images found"));
    }

    let decoded = exec.map_range(files.len(), |i| {
        let path = &files[i].1;
        let (w, h, px) = read_gray_image(path)?;
        if (w, h) != (IMAGE_SIDE, IMAGE_SIDE) {
            return Err(Error::data(
                path,
                format!("image is {w}x{h}, expected {IMAGE_SIDE}x{IMAGE_SIDE}"),
            ));
        }
        Ok(px)
    });
    let mut data = Vec::with_capacity(files.len() * IMAGE_PIXELS);
    for px in decoded {
        data.extend(px?);
    }
    let labels = files.iter().map(|(d, _)| *d).collect();
    LabeledDataset::new(
        Tensor::from_vec(&[files.len(), 1, IMAGE_SIDE, IMAGE_SIDE], data)?,
        labels,
        Provenance {
            path: root.to_path_buf(),
            format: SourceFormat::ClassDirectories,
        },
    )
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::data(path, "truncated IDX header"))
}

/// Loads an IDX image/label file pair, zero-padding images up to 32x32.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let ib = fs::read(images_path).map_err(|e| Error::data(images_path, e.to_string()))?;
    let lb = fs::read(labels_path).map_err(|e| Error::data(labels_path, e.to_string()))?;

    if be_u32(&ib, 0, images_path)? != IDX_IMAGES_MAGIC {
        return Err(Error::data(images_path, "bad IDX image magic (expected 0x00000803)"));
    }
    if be_u32(&lb, 0, labels_path)? != IDX_LABELS_MAGIC {
        return Err(Error::data(labels_path, "bad IDX label magic (expected 0x00000801)"));
    }
    let n = be_u32(&ib, 4, images_path)? as usize;
    let rows = be_u32(&ib, 8, images_path)? as usize;
    let cols = be_u32(&ib, 12, images_path)? as usize;
    let nl = be_u32(&lb, 4, labels_path)? as usize;
    if n != nl {
        return Err(Error::data(images_path, format!("{n} images but {nl} labels")));
    }
    if n == 0 {
        return Err(Error::data(images_path, "empty IDX file"));
    }
    if rows > IMAGE_SIDE || cols > IMAGE_SIDE || (IMAGE_SIDE - rows) % 2 != 0 || (IMAGE_SIDE - cols) % 2 != 0 {
        return Err(Error::data(
            images_path,
            format!("{rows}x{cols} images cannot be centered in {IMAGE_SIDE}x{IMAGE_SIDE}"),
        ));
    }
    let pixels = &ib[16..];
    if pixels.len() != n * rows * cols {
        return Err(Error::data(
            images_path,
            format!("expected {} pixel bytes, found {}", n * rows * cols, pixels.len()),
        ));
    }
    let labels = &lb[8..];
    if labels.len() != n {
        return Err(Error::data(
            labels_path,
            format!("expected {n} label bytes, found {}", labels.len()),
        ));
    }
    let (top, left) = ((IMAGE_SIDE - rows) / 2, (IMAGE_SIDE - cols) / 2);
    let mut data = vec![0.0f32; n * IMAGE_PIXELS];
    for (k, img) in pixels.chunks_exact(rows * cols).enumerate() {
        let dst = &mut data[k * IMAGE_PIXELS..(k + 1) * IMAGE_PIXELS];
        for r in 0..rows {
            for c in 0..cols {
                dst[(r + top) * IMAGE_SIDE + c + left] = img[r * cols + c] as f32 / 255.0;
            }
        }
    }
    LabeledDataset::new(
        Tensor::from_vec(&[n, 1, IMAGE_SIDE, IMAGE_SIDE], data)?,
        labels.to_vec(),
        Provenance {
            path: images_path.to_path_buf(),
            format: SourceFormat::Idx,
        },
    )
}

/// Per-class random split: exactly `per_class_train` training samples of
/// each class present, the remainder (or at most `per_class_test` of it) for
/// testing. Index lists are returned sorted.
pub fn stratified_split(ds: &LabeledDataset, per_class_train: usize, per_class_test: Option<usize>, seed: u64) -> Result<LabeledDataset> {
    let mut rng = Rng::substream(seed, "split");
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); CLASSES];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let need = per_class_train + per_class_test.unwrap_or(0);
        if idx.len() < need.max(per_class_train) {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} samples, split needs {need}",
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        let rest = &idx[per_class_train..];
        let rest = match per_class_test {
            Some(t) => &rest[..t],
            None => rest,
        };
        train.extend_from_slice(&idx[..per_class_train]);
        test.extend_from_slice(rest);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(LabeledDataset {
        split: Some(Split { train, test }),
        ..ds.clone()
    })
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes a binary (P5) 8-bit PGM. Values are clamped to `[0, 1]` and
/// quantized with round-half-up.
pub fn export_pgm(pixels: &[f32], width: usize, height: usize, path: &Path) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = pixels.iter().map(|&v| to_byte(v)).collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

/// Min-max scales to `[0, 1]` (constant input maps to 0.5).
pub fn min_max_scale(values: &[f32]) -> Vec<f32> {
    let lo = values.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}

/// Lays equally sized tiles out row by row, `columns` per row, with 1-pixel
/// white separators between tiles.
pub fn export_grid(tiles: &[Vec<f32>], tile_w: usize, tile_h: usize, columns: usize, path: &Path) -> Result<()> {
    if tiles.is_empty() || columns == 0 {
        return Err(Error::InvalidArgument("grid needs at least one tile and column".into()));
    }
    if let Some(t) = tiles.iter().find(|t| t.len() != tile_w * tile_h) {
        return Err(Error::ShapeMismatch(format!(
            "tile with {} pixels in a grid of {tile_w}x{tile_h} tiles",
            t.len()
        )));
    }
    let cols = columns.min(tiles.len());
    let rows = tiles.len().div_ceil(cols);
    let width = cols * tile_w + (cols - 1);
    let height = rows * tile_h + (rows - 1);
    let mut canvas = vec![1.0f32; width * height];
    for (k, tile) in tiles.iter().enumerate() {
        let (r, c) = (k / cols, k % cols);
        let (y0, x0) = (r * (tile_h + 1), c * (tile_w + 1));
        for y in 0..tile_h {
            canvas[(y0 + y) * width + x0..][..tile_w].copy_from_slice(&tile[y * tile_w..(y + 1) * tile_w]);
        }
    }
    export_pgm(&canvas, width, height, path)
}

/// Writes a dataset as a class-directory tree of PGM files.
pub fn export_dir(ds: &LabeledDataset, indices: &[usize], root: &Path) -> Result<()> {
    let [_, h, w] = ds.image_shape();
    for d in 0..CLASSES {
        fs::create_dir_all(root.join(d.to_string()))?;
    }
    for &i in indices {
        let path = root.join(ds.label(i).to_string()).join(format!("{i:06}.pgm"));
        export_pgm(ds.image(i), w, h, &path)?;
    }
    Ok(())
}
