//! MNIST-style datasets: IDX ingestion, maxpool downsampling, the seeded
//! class subsets used in the experiments, and a synthetic fallback.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binio::{read_file, write_atomic, ByteReader};
use crate::error::{Error, Result};
use crate::nn::{maxpool_forward, Tensor};
use crate::rng::substream;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

pub const FASHION_CLASSES: [&str; 10] = [
    "t-shirt/top",
    "trouser",
    "pullover",
    "dress",
    "coat",
    "sandal",
    "shirt",
    "sneaker",
    "bag",
    "ankle boot",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Full,
    Train,
    Validation,
}

/// Images with pixel values in `[0, 1]` and integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub height: usize,
    pub width: usize,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub split: SplitKind,
}

impl DatasetSplit {
    pub fn new(height: usize, width: usize, images: Vec<Vec<f64>>, labels: Vec<usize>, split: SplitKind) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = images.iter().position(|im| im.len() != height * width) {
            return Err(Error::shape(format!("image {bad} is not {height}x{width}")));
        }
        Ok(Self {
            height,
            width,
            images,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn image(&self, i: usize) -> Tensor {
        Tensor::new(vec![self.height, self.width], self.images[i].clone()).expect("validated shape")
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// SHA-256 over dimensions, pixels and labels.
    pub fn fingerprint(&self) -> String {
        fingerprint(&[self.height, self.width], &self.images, &self.labels)
    }

    pub fn with_split(mut self, split: SplitKind) -> Self {
        self.split = split;
        self
    }
}

/// Hex SHA-256 of a labelled sample set: sample shape, count, then every
/// row's values (f64 LE) followed by its label (u64 LE).
pub fn fingerprint(shape: &[usize], rows: &[Vec<f64>], labels: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update((shape.len() as u64).to_le_bytes());
    for &d in shape {
        h.update((d as u64).to_le_bytes());
    }
    h.update((rows.len() as u64).to_le_bytes());
    for (row, &l) in rows.iter().zip(labels) {
        for v in row {
            h.update(v.to_le_bytes());
        }
        h.update((l as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn maybe_gunzip(bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&bytes[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::format(0, format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

/// Parses an IDX3 image file (already decompressed) into `(n, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut r = ByteReader::new(bytes);
    let magic = r.u32_be()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(0, format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let n = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    let pixels = r.read_vec(n * rows * cols)?;
    r.expect_end()?;
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = ByteReader::new(bytes);
    let magic = r.u32_be()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(0, format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let n = r.u32_be()? as usize;
    let labels = r.read_vec(n)?;
    r.expect_end()?;
    Ok(labels)
}

/// Loads an IDX image/label pair (optionally gzip-compressed), scaling pixels by 1/255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DatasetSplit> {
    let with_path = |p: &Path, e: Error| match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", p.display()),
        },
        other => other,
    };
    let img_bytes = maybe_gunzip(read_file(images_path)?).map_err(|e| with_path(images_path, e))?;
    let lbl_bytes = maybe_gunzip(read_file(labels_path)?).map_err(|e| with_path(labels_path, e))?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes).map_err(|e| with_path(images_path, e))?;
    let labels = parse_idx_labels(&lbl_bytes).map_err(|e| with_path(labels_path, e))?;
    if labels.len() != n {
        return Err(Error::format(
            4,
            format!("{} holds {} labels for {n} images", labels_path.display(), labels.len()),
        ));
    }
    let images = pixels
        .chunks_exact(rows * cols)
        .map(|px| px.iter().map(|&p| p as f64 / 255.0).collect())
        .collect();
    DatasetSplit::new(rows, cols, images, labels.into_iter().map(usize::from).collect(), SplitKind::Full)
}

/// Writes `split` as an uncompressed IDX pair, quantising pixels to `round(255·v)`.
pub fn write_idx(split: &DatasetSplit, images_path: &Path, labels_path: &Path) -> Result<()> {
    if let Some(&l) = split.labels.iter().find(|&&l| l > 255) {
        return Err(Error::config(format!("label {l} does not fit in an IDX byte")));
    }
    let mut img = Vec::with_capacity(16 + split.len() * split.height * split.width);
    for v in [IDX_IMAGES_MAGIC, split.len() as u32, split.height as u32, split.width as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    for px in split.images.iter().flatten() {
        img.push((px.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    let mut lbl = Vec::with_capacity(8 + split.len());
    for v in [IDX_LABELS_MAGIC, split.len() as u32] {
        lbl.extend_from_slice(&v.to_be_bytes());
    }
    lbl.extend(split.labels.iter().map(|&l| l as u8));
    write_atomic(images_path, &img)?;
    write_atomic(labels_path, &lbl)
}

/// Non-overlapping `k×k` max pooling of every image.
pub fn downsample_maxpool(split: &DatasetSplit, k: usize) -> Result<DatasetSplit> {
    if k == 0 || !split.height.is_multiple_of(k) || !split.width.is_multiple_of(k) {
        return Err(Error::shape(format!(
            "{}x{} images are not divisible by pool size {k}",
            split.height, split.width
        )));
    }
    let images = split
        .images
        .iter()
        .map(|im| {
            let t = Tensor::new(vec![split.height, split.width], im.clone())?;
            Ok(maxpool_forward(&t, k)?.0.into_data())
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetSplit::new(split.height / k, split.width / k, images, split.labels.clone(), split.split)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Mnist,
    Fashion,
    Synth,
}

impl Source {
    pub fn dir_name(self) -> &'static str {
        match self {
            Source::Mnist => "mnist",
            Source::Fashion => "fashion",
            Source::Synth => "synth",
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(Source::Mnist),
            "fashion" | "fashion-mnist" | "fashionmnist" => Ok(Source::Fashion),
            "synth" | "synthetic" => Ok(Source::Synth),
            other => Err(Error::config(format!("unknown dataset '{other}'"))),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Mnist => "MNIST",
            Source::Fashion => "Fashion",
            Source::Synth => "Synth",
        })
    }
}

/// A balanced class subset drawn from a larger pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub source: Source,
    pub classes: Vec<usize>,
    pub per_class: usize,
    pub seed: u64,
}

impl SubsetSpec {
    pub fn new(source: Source, classes: Vec<usize>, per_class: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            source,
            classes,
            per_class,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `MNIST_179`, `Fashion_345`, … with 400 samples per class.
    pub fn named(name: &str, seed: u64) -> Result<Self> {
        let (src, digits) = name
            .split_once('_')
            .ok_or_else(|| Error::config(format!("subset name '{name}' is not SOURCE_CLASSES")))?;
        let classes = digits
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::config(format!("bad class list in '{name}'")))?;
        Self::new(src.parse()?, classes, 400, seed)
    }

    /// Ten classes, 400 each.
    pub fn all_classes(source: Source, seed: u64) -> Self {
        Self {
            source,
            classes: (0..10).collect(),
            per_class: 400,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::config("a subset needs at least two classes"));
        }
        let mut sorted = self.classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.classes.len() {
            return Err(Error::config(format!("duplicate classes in {:?}", self.classes)));
        }
        if self.per_class < 2 {
            return Err(Error::config("need at least two samples per class to split"));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        let digits: String = self.classes.iter().map(|c| c.to_string()).collect();
        format!("{}_{digits}", self.source)
    }
}

/// Draws `per_class` samples of every requested class under a seeded shuffle,
/// remaps labels to `0..C` in ascending original-class order, and splits each
/// class half into training, half into validation.
pub fn make_subset(pool: &DatasetSplit, spec: &SubsetSpec) -> Result<(DatasetSplit, DatasetSplit)> {
    spec.validate()?;
    let mut classes = spec.classes.clone();
    classes.sort_unstable();
    let mut rng = substream(spec.seed, "subset");
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (new_label, &class) in classes.iter().enumerate() {
        let mut idx: Vec<usize> = (0..pool.len()).filter(|&i| pool.labels[i] == class).collect();
        if idx.len() < spec.per_class {
            return Err(Error::config(format!(
                "class {class} has {} samples, {} requested",
                idx.len(),
                spec.per_class
            )));
        }
        idx.shuffle(&mut rng);
        idx.truncate(spec.per_class);
        let half = spec.per_class.div_ceil(2);
        train.extend(idx[..half].iter().map(|&i| (i, new_label)));
        val.extend(idx[half..].iter().map(|&i| (i, new_label)));
    }
    let mut order_rng = substream(spec.seed, "subset-order");
    train.shuffle(&mut order_rng);
    val.shuffle(&mut order_rng);
    let build = |picked: &[(usize, usize)], kind| {
        DatasetSplit::new(
            pool.height,
            pool.width,
            picked.iter().map(|&(i, _)| pool.images[i].clone()).collect(),
            picked.iter().map(|&(_, l)| l).collect(),
            kind,
        )
    };
    Ok((build(&train, SplitKind::Train)?, build(&val, SplitKind::Validation)?))
}

/// Deterministic 14×14 class-conditional blobs: class `c` is a bright Gaussian
/// spot at a fixed position on a ring plus seeded uniform noise. Labels cycle
/// `0, 1, …, C−1`.
pub fn synth_dataset(num_classes: usize, n: usize, seed: u64) -> DatasetSplit {
    const SIDE: usize = 14;
    let prototypes: Vec<Vec<f64>> = (0..num_classes.max(1))
        .map(|c| {
            let angle = std::f64::consts::TAU * c as f64 / num_classes.max(1) as f64;
            let (cy, cx) = (6.0 + 4.0 * angle.sin(), 6.0 + 4.0 * angle.cos());
            (0..SIDE * SIDE)
                .map(|i| {
                    let (y, x) = ((i / SIDE) as f64, (i % SIDE) as f64);
                    (-((y - cy).powi(2) + (x - cx).powi(2)) / 8.0).exp()
                })
                .collect()
        })
        .collect();
    let mut rng = substream(seed, "synth");
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % num_classes.max(1);
        let img = prototypes[label]
            .iter()
            .map(|&p| (p + rng.gen_range(0.0..0.2)).clamp(0.0, 1.0))
            .collect();
        images.push(img);
        labels.push(label);
    }
    DatasetSplit::new(SIDE, SIDE, images, labels, SplitKind::Full).expect("consistent synthetic shapes")
}

/// Locates `<prefix>-images-idx3-ubyte[.gz]` and `<prefix>-labels-idx1-ubyte[.gz]` in `dir`.
pub fn find_idx_pair(dir: &Path, prefix: &str) -> Result<(PathBuf, PathBuf)> {
    let find = |stem: &str| {
        let plain = dir.join(format!("{prefix}-{stem}"));
        let gz = dir.join(format!("{prefix}-{stem}.gz"));
        if plain.is_file() {
            Ok(plain)
        } else if gz.is_file() {
            Ok(gz)
        } else {
            Err(Error::file(plain, std::io::Error::new(std::io::ErrorKind::NotFound, "IDX file not found")))
        }
    };
    Ok((find("images-idx3-ubyte")?, find("labels-idx1-ubyte")?))
}

/// Loads the training pool of `source` from `data_dir/<source>/`, falling
/// back to `data_dir` itself.
pub fn load_pool(data_dir: &Path, source: Source) -> Result<DatasetSplit> {
    if source == Source::Synth {
        return Err(Error::config("the synthetic dataset has no files; use synth_dataset"));
    }
    let (i, l) = find_idx_pair(&data_dir.join(source.dir_name()), "train")
        .or_else(|_| find_idx_pair(data_dir, "train"))?;
    load_idx(&i, &l)
}

/// Writes a train/validation pair as `train-*` and `validation-*` IDX files in `dir`.
pub fn save_split_dir(dir: &Path, train: &DatasetSplit, val: &DatasetSplit) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    for (prefix, split) in [("train", train), ("validation", val)] {
        write_idx(
            split,
            &dir.join(format!("{prefix}-images-idx3-ubyte")),
            &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        )?;
    }
    Ok(())
}

/// Reads the pair written by [`save_split_dir`].
pub fn load_split_dir(dir: &Path) -> Result<(DatasetSplit, DatasetSplit)> {
    let (i, l) = find_idx_pair(dir, "train")?;
    let train = load_idx(&i, &l)?.with_split(SplitKind::Train);
    let (i, l) = find_idx_pair(dir, "validation")?;
    let val = load_idx(&i, &l)?.with_split(SplitKind::Validation);
    Ok((train, val))
}
