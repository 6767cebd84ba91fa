use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Train/validation/test fractions. Must be non-negative and sum to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(*p >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions must be non-negative and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

/// Disjoint index sets covering every row exactly once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Labelled examples stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    cols: usize,
    labels: Vec<usize>,
    split: Split,
}

impl Dataset {
    /// Builds a dataset and assigns a shuffled split.
    pub fn new(
        features: Vec<f64>,
        cols: usize,
        labels: Vec<usize>,
        fractions: SplitFractions,
        seed: u64,
    ) -> Result<Self> {
        if cols == 0 || features.len() != cols * labels.len() {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} rows of width {cols}",
                features.len(),
                labels.len()
            )));
        }
        let mut ds = Self {
            features,
            cols,
            labels,
            split: Split::default(),
        };
        ds.resplit(fractions, seed)?;
        Ok(ds)
    }

    pub fn resplit(&mut self, fractions: SplitFractions, seed: u64) -> Result<()> {
        fractions.validate()?;
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x5eed_5b17);
        order.shuffle(&mut rng);
        let n_train = ((n as f64) * fractions.train).round() as usize;
        let n_val = (((n as f64) * fractions.val).round() as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        self.split = Split {
            train: order[..n_train].to_vec(),
            val: order[n_train..n_train + n_val].to_vec(),
            test: order[n_train + n_val..].to_vec(),
        };
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.cols..(i + 1) * self.cols]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Writes `f0,...,fk,label` CSV (all rows, split not persisted).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header: Vec<String> = (0..self.cols).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, fractions: SplitFractions, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
        let cols = header.len().saturating_sub(1);
        let expected: Vec<String> = (0..cols).map(|i| format!("f{i}")).chain(["label".to_string()]).collect();
        if cols == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Format {
                path: path.into(),
                detail: "expected header f0,...,fk,label".into(),
            });
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let bad = |what: &str| Error::Format {
                path: path.into(),
                detail: format!("row {}: bad {what}", line + 2),
            };
            for field in rec.iter().take(cols) {
                features.push(field.trim().parse::<f64>().map_err(|_| bad("feature"))?);
            }
            labels.push(rec[cols].trim().parse::<usize>().map_err(|_| bad("label"))?);
        }
        Self::new(features, cols, labels, fractions, seed)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.into(),
        detail: e.to_string(),
    }
}

fn linspace(start: f64, stop: f64, n: usize, endpoint: bool) -> impl Iterator<Item = f64> {
    let denom = if endpoint { n.saturating_sub(1).max(1) } else { n.max(1) } as f64;
    (0..n).map(move |i| start + (stop - start) * i as f64 / denom)
}

fn assemble(
    points: Vec<[f64; 2]>,
    labels: Vec<usize>,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng);
    let mut features = Vec::with_capacity(points.len() * 2);
    let mut shuffled = Vec::with_capacity(points.len());
    for &i in &order {
        for c in points[i] {
            let eps = if noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            features.push(c + eps);
        }
        shuffled.push(labels[i]);
    }
    Dataset::new(features, 2, shuffled, SplitFractions::default(), seed)
}

/// Two interleaving half circles with Gaussian noise. Label 0 is the upper
/// arc centred at the origin, label 1 the lower arc centred at (1, 0.5).
pub fn make_moons(count: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if count < 2 {
        return Err(Error::invalid(format!("make_moons needs count >= 2, got {count}")));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::invalid(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let n_outer = count / 2;
    let n_inner = count - n_outer;
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for a in linspace(0.0, PI, n_outer, true) {
        points.push([a.cos(), a.sin()]);
        labels.push(0);
    }
    for a in linspace(0.0, PI, n_inner, true) {
        points.push([1.0 - a.cos(), 1.0 - a.sin() - 0.5]);
        labels.push(1);
    }
    assemble(points, labels, noise_std, seed)
}

/// Two concentric circles: label 0 on radius 1, label 1 on radius `factor`.
pub fn make_circles(count: usize, noise_std: f64, factor: f64, seed: u64) -> Result<Dataset> {
    if count < 2 {
        return Err(Error::invalid(format!("make_circles needs count >= 2, got {count}")));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::invalid(format!("factor must lie in (0, 1), got {factor}")));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::invalid(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let n_outer = count / 2;
    let n_inner = count - n_outer;
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for a in linspace(0.0, 2.0 * PI, n_outer, false) {
        points.push([a.cos(), a.sin()]);
        labels.push(0);
    }
    for a in linspace(0.0, 2.0 * PI, n_inner, false) {
        points.push([factor * a.cos(), factor * a.sin()]);
        labels.push(1);
    }
    assemble(points, labels, noise_std, seed)
}
