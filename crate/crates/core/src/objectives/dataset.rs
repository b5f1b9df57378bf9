use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LocalObjective;
use crate::error::{Error, Result};

/// Binary classification data with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Scales every row with norm above one back onto the unit sphere.
    pub fn normalize_rows(&mut self) {
        for mut row in self.features.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 1.0 {
                row /= norm;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    LibSvm,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DatasetFormat::Csv),
            "libsvm" | "svmlight" => Ok(DatasetFormat::LibSvm),
            other => Err(Error::InvalidParameter(format!("unknown dataset format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    Contiguous,
    RoundRobin,
    /// Contiguous blocks after a stable sort by label: shards see skewed class mixes.
    ByLabel,
}

impl FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "contiguous" => Ok(PartitionScheme::Contiguous),
            "round-robin" | "roundrobin" => Ok(PartitionScheme::RoundRobin),
            "by-label" | "bylabel" => Ok(PartitionScheme::ByLabel),
            other => Err(Error::InvalidParameter(format!("unknown partition scheme `{other}`"))),
        }
    }
}

fn parse_label(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("line {line}: bad label `{tok}`")))?;
    match v {
        v if v == 1.0 => Ok(1.0),
        v if v == -1.0 || v == 0.0 => Ok(-1.0),
        _ => Err(Error::Dataset(format!("line {line}: non-binary label `{tok}`"))),
    }
}

fn finish(rows: Vec<Vec<f64>>, labels: Vec<f64>, d: usize) -> Result<Dataset> {
    if labels.is_empty() {
        return Err(Error::Dataset("no samples".into()));
    }
    let features = Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i].get(j).copied().unwrap_or(0.0));
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dataset("non-finite feature value".into()));
    }
    let mut ds = Dataset { features, labels };
    ds.normalize_rows();
    Ok(ds)
}

/// CSV with an optional header; the last column is the label.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let numeric: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match numeric {
            Ok(v) => v,
            Err(_) if width.is_none() && rows.is_empty() => continue, // header
            Err(_) => return Err(Error::Dataset(format!("line {}: non-numeric field", idx + 1))),
        };
        if values.len() < 2 {
            return Err(Error::Dataset(format!("line {}: need features and a label", idx + 1)));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Dataset(format!(
                    "line {}: expected {w} columns, got {}",
                    idx + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        let label = parse_label(fields[fields.len() - 1], idx + 1)?;
        labels.push(label);
        rows.push(values[..values.len() - 1].to_vec());
    }
    let d = width.map_or(0, |w| w - 1);
    finish(rows, labels, d)
}

/// LibSVM lines: `label idx:val ...` with 1-indexed features.
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label = parse_label(toks.next().unwrap_or(""), idx + 1)?;
        let mut row = Vec::new();
        for tok in toks {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::Dataset(format!("line {}: bad pair `{tok}`", idx + 1)))?;
            let i: usize = i
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| Error::Dataset(format!("line {}: bad index `{i}`", idx + 1)))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Dataset(format!("line {}: bad value `{v}`", idx + 1)))?;
            if row.len() < i {
                row.resize(i, 0.0);
            }
            row[i - 1] = v;
            d = d.max(i);
        }
        labels.push(label);
        rows.push(row);
    }
    finish(rows, labels, d)
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        DatasetFormat::Csv => parse_csv(&text),
        DatasetFormat::LibSvm => parse_libsvm(&text),
    }
}

/// Two Gaussian classes shifted by `±separation` along a random unit direction,
/// rows clipped to unit norm.
pub fn synthesize_dataset(seed: u64, m: usize, d: usize, separation: f64) -> Result<Dataset> {
    if m == 0 || d == 0 {
        return Err(Error::Dataset("synthetic dataset needs m, d > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v /= norm);

    let scale = 1.0 / (d as f64).sqrt();
    let mut features = Array2::zeros((m, d));
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[[i, j]] = scale * z + y * separation * dir[j];
        }
        labels.push(y);
    }
    let mut ds = Dataset { features, labels };
    ds.normalize_rows();
    Ok(ds)
}

/// Splits samples across `n` agents, each shard becoming an l2-regularized
/// logistic loss with parameter `mu`.
pub fn partition(
    data: &Dataset,
    n: usize,
    scheme: PartitionScheme,
    mu: f64,
) -> Result<Vec<LocalObjective>> {
    let m = data.len();
    if n == 0 || m < n {
        return Err(Error::Dataset(format!("{m} samples cannot fill {n} non-empty shards")));
    }
    let blocks = |order: Vec<usize>| -> Vec<Vec<usize>> {
        let (base, extra) = (m / n, m % n);
        let mut start = 0;
        (0..n)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let idx = order[start..start + len].to_vec();
                start += len;
                idx
            })
            .collect()
    };
    let shards: Vec<Vec<usize>> = match scheme {
        PartitionScheme::Contiguous => blocks((0..m).collect()),
        PartitionScheme::RoundRobin => (0..n).map(|i| (i..m).step_by(n).collect()).collect(),
        PartitionScheme::ByLabel => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| data.labels[a].total_cmp(&data.labels[b]));
            blocks(order)
        }
    };
    shards
        .into_iter()
        .map(|idx| {
            let feats = data.features.select(ndarray::Axis(0), &idx);
            let labels: Array1<f64> = idx.iter().map(|&j| data.labels[j]).collect();
            LocalObjective::logistic(feats, labels, mu)
        })
        .collect()
}

/// Random strongly convex quadratics whose Hessian spectra lie in `[mu, l]`,
/// with `mu` attained by agent 0 and `l` by the last agent.
pub fn random_quadratics(seed: u64, n: usize, d: usize, mu: f64, l: f64) -> Result<Vec<LocalObjective>> {
    if !(mu > 0.0 && l >= mu) {
        return Err(Error::InvalidParameter(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let g = nalgebra::DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
            let q = g.qr().q();
            let mut eig: Vec<f64> = (0..d).map(|_| rng.random_range(mu..=l)).collect();
            if i == 0 {
                eig[0] = mu;
            }
            if i == n - 1 {
                eig[d - 1] = l;
            }
            let mut h = Array2::zeros((d, d));
            for r in 0..d {
                for c in 0..=r {
                    let v: f64 = (0..d).map(|k| q[(r, k)] * eig[k] * q[(c, k)]).sum();
                    h[[r, c]] = v;
                    h[[c, r]] = v;
                }
            }
            let b: Array1<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            LocalObjective::quadratic(h, b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic_and_normalized() {
        let a = synthesize_dataset(7, 200, 10, 0.5).unwrap();
        let b = synthesize_dataset(7, 200, 10, 0.5).unwrap();
        assert_eq!(a, b);
        let bits = |d: &Dataset| d.features.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(a.features.rows().into_iter().all(|r| r.dot(&r) <= 1.0 + 1e-15));
        assert!(a.labels.iter().all(|&y| y == 1.0 || y == -1.0));
        assert_ne!(a, synthesize_dataset(8, 200, 10, 0.5).unwrap());
    }

    #[test]
    fn contiguous_partition_sizes() {
        let ds = synthesize_dataset(1, 10, 3, 1.0).unwrap();
        let shards = partition(&ds, 3, PartitionScheme::Contiguous, 1e-3).unwrap();
        let sizes: Vec<_> = shards.iter().map(LocalObjective::num_samples).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let rr = partition(&ds, 3, PartitionScheme::RoundRobin, 1e-3).unwrap();
        let sizes: Vec<_> = rr.iter().map(LocalObjective::num_samples).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert!(partition(&ds, 11, PartitionScheme::Contiguous, 1e-3).is_err());
    }

    #[test]
    fn by_label_partition_separates_classes() {
        let ds = synthesize_dataset(3, 40, 2, 1.0).unwrap();
        let negatives = ds.labels.iter().filter(|&&y| y < 0.0).count();
        let shards = partition(&ds, 4, PartitionScheme::ByLabel, 1e-3).unwrap();
        let labels: Vec<f64> = shards
            .iter()
            .flat_map(|s| {
                let LocalObjective::LogisticL2(l) = s else { unreachable!() };
                l.labels().to_vec()
            })
            .collect();
        assert_eq!(labels.len(), 40);
        assert!(labels[..negatives].iter().all(|&y| y < 0.0));
        assert!(labels[negatives..].iter().all(|&y| y > 0.0));
        assert_eq!("by-label".parse::<PartitionScheme>().unwrap(), PartitionScheme::ByLabel);
    }

    #[test]
    fn round_robin_covers_every_sample_once() {
        let ds = synthesize_dataset(2, 13, 2, 1.0).unwrap();
        let shards = partition(&ds, 4, PartitionScheme::RoundRobin, 1e-3).unwrap();
        let mut seen: Vec<Vec<u64>> = Vec::new();
        for s in &shards {
            let LocalObjective::LogisticL2(l) = s else { unreachable!() };
            for r in l.features().rows() {
                seen.push(r.iter().map(|v| v.to_bits()).collect());
            }
        }
        let mut all: Vec<Vec<u64>> = ds
            .features
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        seen.sort();
        all.sort();
        assert_eq!(seen, all);
    }

    #[test]
    fn libsvm_sparse_row_is_densified() {
        let ds = parse_libsvm("1 3:0.5 7:-0.25\n-1 1:0.1\n").unwrap();
        assert_eq!(ds.dim(), 7);
        assert_eq!(ds.labels, vec![1.0, -1.0]);
        assert_eq!(ds.features[[0, 2]], 0.5);
        assert_eq!(ds.features[[0, 6]], -0.25);
        assert_eq!(ds.features[[0, 0]], 0.0);
        assert_eq!(ds.features[[1, 0]], 0.1);
        assert!(parse_libsvm("2 1:0.5\n").is_err());
        assert!(parse_libsvm("1 0:0.5\n").is_err());
        assert!(parse_libsvm("1 a\n").is_err());
    }

    #[test]
    fn csv_header_and_label_mapping() {
        let ds = parse_csv("x1,x2,label\n3.0,4.0,1\n0.1,0.2,0\n").unwrap();
        assert_eq!(ds.labels, vec![1.0, -1.0]);
        // (3, 4) has norm 5 and is clipped to the unit sphere.
        assert!((ds.features[[0, 0]] - 0.6).abs() < 1e-15);
        assert_eq!(ds.features[[1, 1]], 0.2);
        let no_header = parse_csv("0.1,-1\n0.2,1\n").unwrap();
        assert_eq!(no_header.len(), 2);
        assert!(parse_csv("0.1,0.3,5\n").is_err());
        assert!(parse_csv("0.1,1\n0.1,0.2,1\n").is_err());
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn quadratic_generator_pins_extreme_curvatures() {
        let q = random_quadratics(3, 4, 3, 0.05, 1.0).unwrap();
        let mu = q.iter().map(LocalObjective::strong_convexity).fold(f64::INFINITY, f64::min);
        let l = q.iter().map(LocalObjective::smoothness).fold(0.0, f64::max);
        assert!((mu - 0.05).abs() < 1e-12);
        assert!((l - 1.0).abs() < 1e-12);
    }
}
