//! Classical dimension reducers: a convolutional autoencoder and PCA, plus
//! the binary formats for extracted features and fitted reducers.
//!
//! Feature file:
//!
//! ```text
//! count  u64 LE
//! dim    u64 LE
//! rows   count × (dim × f64 LE, label u8)
//! ```
//!
//! Reducer file: magic `b"QNNRDCR1"`, version u32 LE, kind u8 (1 = CAE,
//! 2 = PCA), then either the latent width (u64) followed by encoder and
//! decoder checkpoints, or `dim`, `k` (u64 each) followed by the mean,
//! the `k` components and the `k` explained variances as f64 LE.

mod cae;
mod pca;

use std::path::Path;

use rayon::prelude::*;

pub use cae::{train_cae, train_cae_with, Cae, CaeSpec, CaeTrainConfig, CAE_SIDE};
pub use pca::{fit_pca, PcaModel};

use crate::binio::{put_f64s, put_u32, put_u64, read_file, write_atomic, ByteReader};
use crate::error::{Error, Result};
use crate::nn::Sequential;

pub const REDUCER_MAGIC: &[u8; 8] = b"QNNRDCR1";
pub const REDUCER_VERSION: u32 = 1;
const MAX_FEATURE_DIM: u64 = 1 << 20;

/// Labelled feature vectors of a common width.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::shape(format!("row {bad} has {} features, expected {dim}", rows[bad].len())));
        }
        Ok(Self { dim, rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn fingerprint(&self) -> String {
        crate::datasets::fingerprint(&[self.dim], &self.rows, &self.labels)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(16 + self.len() * (8 * self.dim + 1));
        put_u64(&mut out, self.len() as u64);
        put_u64(&mut out, self.dim as u64);
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            let label = u8::try_from(label).map_err(|_| Error::config(format!("label {label} does not fit in a byte")))?;
            put_f64s(&mut out, row);
            out.push(label);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let count = r.len_le(u32::MAX as u64, "sample count")?;
        let dim = r.len_le(MAX_FEATURE_DIM, "feature dimension")?;
        let expected = 16 + count as u64 * (8 * dim as u64 + 1);
        if expected != bytes.len() as u64 {
            return Err(Error::format(
                bytes.len().min(expected as usize) as u64,
                format!("{count} rows of {dim} features need {expected} bytes, file has {}", bytes.len()),
            ));
        }
        let mut rows = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            rows.push(r.f64s_le(dim)?);
            labels.push(r.u8()? as usize);
        }
        r.expect_end()?;
        Self::new(dim, rows, labels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// A fitted dimension reducer.
#[derive(Debug, Clone, PartialEq)]
pub enum Reducer {
    Cae(Cae),
    Pca(PcaModel),
}

impl Reducer {
    pub fn output_dim(&self) -> usize {
        match self {
            Reducer::Cae(c) => c.spec.latent_dim,
            Reducer::Pca(p) => p.num_components(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Reducer::Cae(_) => "cae",
            Reducer::Pca(_) => "pca",
        }
    }

    pub fn transform(&self, image: &[f64]) -> Result<Vec<f64>> {
        match self {
            Reducer::Cae(c) => c.encode(image),
            Reducer::Pca(p) => p.transform(image),
        }
    }

    /// Reduces every image, keeping labels.
    pub fn extract(&self, images: &[Vec<f64>], labels: &[usize]) -> Result<FeatureSet> {
        let rows = images.par_iter().map(|im| self.transform(im)).collect::<Result<Vec<_>>>()?;
        FeatureSet::new(self.output_dim(), rows, labels.to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(REDUCER_MAGIC);
        put_u32(&mut out, REDUCER_VERSION);
        match self {
            Reducer::Cae(c) => {
                out.push(1);
                put_u64(&mut out, c.spec.latent_dim as u64);
                out.extend(c.encoder.to_checkpoint_bytes());
                out.extend(c.decoder.to_checkpoint_bytes());
            }
            Reducer::Pca(p) => {
                out.push(2);
                put_u64(&mut out, p.dim() as u64);
                put_u64(&mut out, p.num_components() as u64);
                put_f64s(&mut out, &p.mean);
                for c in &p.components {
                    put_f64s(&mut out, c);
                }
                put_f64s(&mut out, &p.explained_variance);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(REDUCER_MAGIC)?;
        let at = r.offset();
        let version = r.u32_le()?;
        if version != REDUCER_VERSION {
            return Err(Error::format(at, format!("unsupported reducer version {version}")));
        }
        let at = r.offset();
        let reducer = match r.u8()? {
            1 => {
                let spec = CaeSpec::new(r.len_le(MAX_FEATURE_DIM, "latent dimension")?)?;
                let encoder = Sequential::read_checkpoint(&mut r)?;
                let decoder = Sequential::read_checkpoint(&mut r)?;
                let template = Cae::new(spec, 0);
                let same_layout = |a: &Sequential, b: &Sequential| {
                    a.layers.len() == b.layers.len()
                        && a.params().iter().map(|g| g.len()).eq(b.params().iter().map(|g| g.len()))
                };
                if !same_layout(&encoder, &template.encoder) || !same_layout(&decoder, &template.decoder) {
                    return Err(Error::format(at, "autoencoder layout does not match its latent width"));
                }
                Reducer::Cae(Cae { spec, encoder, decoder })
            }
            2 => {
                let dim = r.len_le(MAX_FEATURE_DIM, "input dimension")?;
                let k = r.len_le(dim as u64, "component count")?;
                let mean = r.f64s_le(dim)?;
                let components = (0..k).map(|_| r.f64s_le(dim)).collect::<Result<Vec<_>>>()?;
                let explained_variance = r.f64s_le(k)?;
                Reducer::Pca(PcaModel {
                    mean,
                    components,
                    explained_variance,
                })
            }
            other => return Err(Error::format(at, format!("unknown reducer kind {other}"))),
        };
        r.expect_end()?;
        Ok(reducer)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_file_layout() {
        let fs = FeatureSet::new(2, vec![vec![1.0, -2.0], vec![0.5, 3.0]], vec![0, 2]).unwrap();
        let bytes = fs.to_bytes().unwrap();
        assert_eq!(bytes.len(), 16 + 2 * 17);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(bytes[32], 0);
        assert_eq!(bytes[49], 2);
        assert_eq!(FeatureSet::from_bytes(&bytes).unwrap(), fs);
        assert!(matches!(FeatureSet::from_bytes(&bytes[..40]), Err(Error::Format { .. })));
        assert!(FeatureSet::new(2, vec![vec![0.0]], vec![0]).is_err());
    }

    #[test]
    fn reducer_files_round_trip() {
        let cae = Reducer::Cae(Cae::new(CaeSpec::new(3).unwrap(), 9));
        assert_eq!(Reducer::from_bytes(&cae.to_bytes()).unwrap(), cae);

        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 * 0.1, 1.0 - i as f64]).collect();
        let pca = Reducer::Pca(fit_pca(&rows, 2).unwrap());
        let bytes = pca.to_bytes();
        assert_eq!(Reducer::from_bytes(&bytes).unwrap(), pca);
        assert!(matches!(Reducer::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[12] = 7;
        assert!(matches!(Reducer::from_bytes(&bad), Err(Error::Format { offset: 12, .. })));
    }
}
