use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal axes of a dataset, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` unit vectors of length `dim`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// `componentsᵀ·(x − mean)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!("PCA expects {} inputs, got {}", self.dim(), x.len())));
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    /// `mean + components·z`.
    pub fn inverse_transform(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.num_components() {
            return Err(Error::shape(format!(
                "PCA has {} components, got {} scores",
                self.num_components(),
                z.len()
            )));
        }
        let mut out = self.mean.clone();
        for (c, &s) in self.components.iter().zip(z) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += s * v;
            }
        }
        Ok(out)
    }
}

/// Fits `k` components from the sample covariance of `rows`.
///
/// Each component is oriented so that its largest-magnitude entry is positive.
pub fn fit_pca(rows: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
        return Err(Error::shape(format!("row {bad} has {} values, expected {dim}", rows[bad].len())));
    }
    if k == 0 || k >= n.min(dim) {
        return Err(Error::config(format!(
            "cannot fit {k} components to {n} samples of dimension {dim}"
        )));
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // upper triangle of XᵀX for centered X
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for r in rows {
        for ((c, v), m) in centered.iter_mut().zip(r).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dim {
            let xi = centered[i];
            if xi == 0.0 {
                continue;
            }
            let row = &mut cov[i * dim..(i + 1) * dim];
            for j in i..dim {
                row[j] += xi * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / denom;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }

    let (values, vectors) = jacobi_eigen(cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v = vectors[i * dim..(i + 1) * dim].to_vec();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(values[i].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric row-major `dim × dim`
/// matrix. Returns eigenvalues and eigenvectors stored as rows.
fn jacobi_eigen(mut a: Vec<f64>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut vt = vec![0.0; dim * dim];
    for i in 0..dim {
        vt[i * dim + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return ((0..dim).map(|i| a[i * dim + i]).collect(), vt);
    }
    let mut row_p = vec![0.0; dim];
    let mut row_q = vec![0.0; dim];
    for _sweep in 0..100 {
        let off: f64 = (0..dim)
            .flat_map(|i| ((i + 1)..dim).map(move |j| (i, j)))
            .map(|(i, j)| a[i * dim + j] * a[i * dim + j])
            .sum();
        if off <= 1e-30 * total {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                let (app, aqq) = (a[p * dim + p], a[q * dim + q]);
                if apq.abs() <= 1e-300 || apq.abs() < 1e-18 * (app.abs() + aqq.abs()) {
                    a[p * dim + q] = 0.0;
                    a[q * dim + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                row_p.copy_from_slice(&a[p * dim..(p + 1) * dim]);
                row_q.copy_from_slice(&a[q * dim..(q + 1) * dim]);
                for r in 0..dim {
                    let (xp, xq) = (row_p[r], row_q[r]);
                    row_p[r] = c * xp - s * xq;
                    row_q[r] = s * xp + c * xq;
                }
                row_p[p] = app - t * apq;
                row_q[q] = aqq + t * apq;
                row_p[q] = 0.0;
                row_q[p] = 0.0;
                a[p * dim..(p + 1) * dim].copy_from_slice(&row_p);
                a[q * dim..(q + 1) * dim].copy_from_slice(&row_q);
                for r in 0..dim {
                    a[r * dim + p] = row_p[r];
                    a[r * dim + q] = row_q[r];
                }

                let (lo, hi) = vt.split_at_mut(q * dim);
                let vp = &mut lo[p * dim..(p + 1) * dim];
                let vq = &mut hi[..dim];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
    }
    ((0..dim).map(|i| a[i * dim + i]).collect(), vt)
}
