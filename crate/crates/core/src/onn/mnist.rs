//! IDX ingestion and PCA reduction of digit images to a handful of features.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::linalg::symmetric_eigen;

use super::dataset::Dataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// One flattened image per entry, pixel values scaled to [0, 1].
    pub images: Vec<Vec<f64>>,
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| MeshError::Idx {
            offset,
            reason: format!("header truncated, file has {} bytes", bytes.len()),
        })
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(MeshError::Idx {
            offset: 0,
            reason: format!("image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let px = rows * cols;
    let need = 16 + count * px;
    if bytes.len() < need {
        return Err(MeshError::Idx {
            offset: bytes.len(),
            reason: format!("{count} images of {rows}x{cols} need {need} bytes"),
        });
    }
    let images = bytes[16..need]
        .chunks_exact(px.max(1))
        .take(count)
        .map(|c| c.iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    Ok(IdxImages { rows, cols, images })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(MeshError::Idx {
            offset: 0,
            reason: format!("label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    if bytes.len() < 8 + count {
        return Err(MeshError::Idx {
            offset: bytes.len(),
            reason: format!("{count} labels need {} bytes", 8 + count),
        });
    }
    Ok(bytes[8..8 + count].iter().map(|&b| b as usize).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| MeshError::io(path, e))
}

/// Centred projection onto the leading principal axes, followed by min-max
/// scaling learned on the fitting data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaReducer {
    pub mean: Vec<f64>,
    /// Row `k` is the k-th principal axis.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

fn covariance(samples: &[Vec<f64>], mean: &[f64]) -> Vec<f64> {
    let d = mean.len();
    let n = samples.len().max(2) as f64 - 1.0;
    let rows: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; d];
            for s in samples {
                let a = s[i] - mean[i];
                if a != 0.0 {
                    for (j, r) in row.iter_mut().enumerate().skip(i) {
                        *r += a * (s[j] - mean[j]);
                    }
                }
            }
            row
        })
        .collect();
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = rows[i][j] / n;
            c[i * d + j] = v;
            c[j * d + i] = v;
        }
    }
    c
}

fn orthonormalize(q: &mut [Vec<f64>]) {
    for k in 0..q.len() {
        for j in 0..k {
            let dot: f64 = q[k].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = q.split_at_mut(k);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= dot * y;
            }
        }
        let norm = q[k].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            q[k].iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Leading `k` eigenpairs of a symmetric positive semidefinite matrix by
/// orthogonal iteration with a Rayleigh-Ritz finish.
pub fn top_eigen(c: &[f64], d: usize, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = k.min(d);
    let mut q: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..d).map(|i| (((i * 7919 + j * 104729) % 1000) as f64 / 1000.0) - 0.5 + if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    orthonormalize(&mut q);
    let apply = |v: &[f64]| -> Vec<f64> { (0..d).map(|i| c[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum()).collect() };
    let scale = (0..d).map(|i| c[i * d + i]).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..20_000 {
        let z: Vec<Vec<f64>> = q.iter().map(|v| apply(v)).collect();
        // Residual of the invariant-subspace equation C Q = Q (QᵀCQ).
        let mut res = 0.0;
        for zj in &z {
            let proj: Vec<f64> = q.iter().map(|u| u.iter().zip(zj).map(|(a, b)| a * b).sum()).collect();
            let mut r = zj.clone();
            for (u, p) in q.iter().zip(&proj) {
                for (x, y) in r.iter_mut().zip(u) {
                    *x -= p * y;
                }
            }
            res += r.iter().map(|x| x * x).sum::<f64>();
        }
        q = z;
        orthonormalize(&mut q);
        if res.sqrt() < 1e-13 * scale {
            break;
        }
    }
    let cq: Vec<Vec<f64>> = q.iter().map(|v| apply(v)).collect();
    let mut h = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            h[a * k + b] = q[a].iter().zip(&cq[b]).map(|(x, y)| x * y).sum();
        }
    }
    for a in 0..k {
        for b in a + 1..k {
            let m = 0.5 * (h[a * k + b] + h[b * k + a]);
            h[a * k + b] = m;
            h[b * k + a] = m;
        }
    }
    let (vals, vecs) = symmetric_eigen(&h, k);
    let axes = (0..k)
        .map(|col| {
            let mut v = vec![0.0; d];
            for (r, qr) in q.iter().enumerate() {
                let w = vecs[r * k + col];
                for (x, y) in v.iter_mut().zip(qr) {
                    *x += w * y;
                }
            }
            v
        })
        .collect();
    (vals, axes)
}

impl PcaReducer {
    pub fn fit(samples: &[Vec<f64>], k: usize) -> Result<Self> {
        let d = samples.first().map(|s| s.len()).ok_or_else(|| MeshError::InvalidArgument("no samples to fit".into()))?;
        if k == 0 || k > d {
            return Err(MeshError::InvalidArgument(format!("cannot keep {k} of {d} components")));
        }
        let mut mean = vec![0.0; d];
        for s in samples {
            for (m, x) in mean.iter_mut().zip(s) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= samples.len() as f64);
        let c = covariance(samples, &mean);
        let (variances, components) = top_eigen(&c, d, k);
        let mut r = Self {
            mean,
            components,
            variances,
            min: vec![0.0; k],
            max: vec![1.0; k],
        };
        let raw: Vec<Vec<f64>> = samples.iter().map(|s| r.project_raw(s)).collect();
        for j in 0..k {
            r.min[j] = raw.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            r.max[j] = raw.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
        }
        Ok(r)
    }

    pub fn project_raw(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|a| a.iter().zip(x).zip(&self.mean).map(|((a, x), m)| a * (x - m)).sum())
            .collect()
    }

    /// Projection scaled so the fitting data spans [0, 1] per feature.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.project_raw(x)
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    (p - self.min[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn dataset(&self, images: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Dataset> {
        let features = images.par_iter().map(|x| self.transform(x)).collect();
        Dataset::new(features, labels.to_vec(), self.components.len(), n_classes)
    }
}

/// Loads an IDX image/label pair, fits PCA with `n_features` components and
/// returns the reduced dataset together with the fitted reducer (to apply
/// to the validation split).
pub fn mnist_reduced(image_file: &Path, label_file: &Path, n_features: usize) -> Result<(Dataset, PcaReducer)> {
    let images = parse_idx_images(&read(image_file)?)?;
    let labels = parse_idx_labels(&read(label_file)?)?;
    if images.images.len() != labels.len() {
        return Err(MeshError::Dimension(format!(
            "{} images but {} labels",
            images.images.len(),
            labels.len()
        )));
    }
    let reducer = PcaReducer::fit(&images.images, n_features)?;
    let data = reducer.dataset(&images.images, &labels, 10)?;
    Ok((data, reducer))
}

/// Applies an already fitted reducer to another IDX pair.
pub fn mnist_apply(image_file: &Path, label_file: &Path, reducer: &PcaReducer) -> Result<Dataset> {
    let images = parse_idx_images(&read(image_file)?)?;
    let labels = parse_idx_labels(&read(label_file)?)?;
    if images.images.len() != labels.len() {
        return Err(MeshError::Dimension(format!(
            "{} images but {} labels",
            images.images.len(),
            labels.len()
        )));
    }
    reducer.dataset(&images.images, &labels, 10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn image_bytes(count: usize, rows: usize, cols: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Vec::new();
        for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        // Structured images: a few latent strokes plus pixel noise.
        let strokes: Vec<Vec<f64>> = (0..4).map(|_| (0..rows * cols).map(|_| rng.random::<f64>()).collect()).collect();
        for _ in 0..count {
            let w: Vec<f64> = (0..4).map(|k| rng.random::<f64>() * (4 - k) as f64).collect();
            for p in 0..rows * cols {
                let v: f64 = (0..4).map(|k| w[k] * strokes[k][p]).sum::<f64>() * 20.0 + rng.random::<f64>() * 30.0;
                b.push(v.min(255.0) as u8);
            }
        }
        b
    }

    fn label_bytes(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn parses_headers() {
        let img = parse_idx_images(&image_bytes(3, 2, 5, 1)).unwrap();
        assert_eq!((img.rows, img.cols, img.images.len()), (2, 5, 3));
        assert!(img.images.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(parse_idx_labels(&label_bytes(&[3, 1, 4])).unwrap(), vec![3, 1, 4]);
    }

    #[test]
    fn malformed_headers_report_offsets() {
        let mut bad = image_bytes(2, 2, 2, 1);
        bad[3] = 0x01;
        assert!(matches!(parse_idx_images(&bad), Err(MeshError::Idx { offset: 0, .. })));
        let good = image_bytes(2, 2, 2, 1);
        assert!(matches!(parse_idx_images(&good[..6]), Err(MeshError::Idx { offset: 4, .. })));
        assert!(matches!(parse_idx_images(&good[..good.len() - 1]), Err(MeshError::Idx { .. })));
        assert!(parse_idx_labels(&image_bytes(1, 1, 1, 1)).is_err());
        let l = label_bytes(&[1, 2, 3]);
        assert!(matches!(parse_idx_labels(&l[..9]), Err(MeshError::Idx { offset: 9, .. })));
    }

    #[test]
    fn pca_matches_dense_eigendecomposition() {
        let img = parse_idx_images(&image_bytes(1000, 6, 8, 2)).unwrap();
        let r = PcaReducer::fit(&img.images, 10).unwrap();
        let c = covariance(&img.images, &r.mean);
        let (vals, _) = symmetric_eigen(&c, 48);
        for k in 0..10 {
            assert!(((r.variances[k] - vals[k]) / vals[k]).abs() < 1e-8, "{k}: {} vs {}", r.variances[k], vals[k]);
        }
        for a in 0..10 {
            for b in 0..10 {
                let dot: f64 = r.components[a].iter().zip(&r.components[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reduced_dataset_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        std::fs::write(&ip, image_bytes(50, 4, 4, 3)).unwrap();
        let labels: Vec<u8> = (0..50).map(|i| (i % 10) as u8).collect();
        std::fs::write(&lp, label_bytes(&labels)).unwrap();
        let (d, r) = mnist_reduced(&ip, &lp, 10).unwrap();
        assert_eq!((d.len(), d.n_features), (50, 10));
        assert!(d.class_histogram().iter().all(|&c| c == 5));
        assert!(d.features.iter().flatten().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        let again = mnist_apply(&ip, &lp, &r).unwrap();
        assert_eq!(again, d);
        assert!(mnist_reduced(&ip, &dir.path().join("missing"), 10).is_err());
    }
}
