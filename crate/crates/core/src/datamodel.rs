//! Multi-modal datasets, CSV ingestion, stratified folds and synthetic data.
//!
//! Feature matrices are stored column-major with one column per sample, so a
//! modality with `D` features and `N` samples is a `D x N` matrix. CSV files
//! hold the transpose: one row per sample.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class tag. `Target` is the class a one-class model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Target,
    NonTarget,
}

impl Label {
    pub fn from_bool(is_target: bool) -> Self {
        if is_target {
            Label::Target
        } else {
            Label::NonTarget
        }
    }

    pub fn is_target(self) -> bool {
        self == Label::Target
    }

    /// File encoding: 1 for target, 0 for non-target.
    pub fn code(self) -> u8 {
        match self {
            Label::Target => 1,
            Label::NonTarget => 0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Target => Label::NonTarget,
            Label::NonTarget => Label::Target,
        }
    }
}

/// A `D x N` matrix of finite reals, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "feature matrix must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("feature value {bad}")));
        }
        Ok(FeatureMatrix(values))
    }

    /// Builds a matrix from per-sample rows, as read from a CSV file.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(d, n, |i, j| rows[j][i]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn select_columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.0.select_columns(indices)
    }
}

/// Row-aligned modalities sharing one sample axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalDataset {
    modalities: Vec<FeatureMatrix>,
    labels: Option<Vec<Label>>,
    sample_ids: Vec<String>,
}

impl MultiModalDataset {
    pub fn new(modalities: Vec<FeatureMatrix>, labels: Option<Vec<Label>>) -> Result<Self> {
        let n = modalities
            .first()
            .ok_or_else(|| Error::InvalidData("dataset needs at least one modality".into()))?
            .n_samples();
        let ids = (0..n).map(|i| i.to_string()).collect();
        Self::with_ids(modalities, labels, ids)
    }

    pub fn with_ids(
        modalities: Vec<FeatureMatrix>,
        labels: Option<Vec<Label>>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let n = modalities
            .first()
            .ok_or_else(|| Error::InvalidData("dataset needs at least one modality".into()))?
            .n_samples();
        for (v, m) in modalities.iter().enumerate() {
            if m.n_samples() != n {
                return Err(Error::InvalidData(format!(
                    "modality {} has {} samples, modality 1 has {}",
                    v + 1,
                    m.n_samples(),
                    n
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidData(format!(
                    "{} labels for {} samples",
                    l.len(),
                    n
                )));
            }
        }
        if sample_ids.len() != n {
            return Err(Error::InvalidData(format!(
                "{} sample ids for {} samples",
                sample_ids.len(),
                n
            )));
        }
        Ok(MultiModalDataset {
            modalities,
            labels,
            sample_ids,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.modalities[0].n_samples()
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn modalities(&self) -> &[FeatureMatrix] {
        &self.modalities
    }

    pub fn modality(&self, v: usize) -> &FeatureMatrix {
        &self.modalities[v]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modalities.iter().map(FeatureMatrix::dim).collect()
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn require_labels(&self) -> Result<&[Label]> {
        self.labels()
            .ok_or_else(|| Error::InvalidData("dataset has no labels".into()))
    }

    /// Subset of samples, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidData("empty sample selection".into()));
        }
        let modalities = self
            .modalities
            .iter()
            .map(|m| FeatureMatrix::new(m.select_columns(indices)))
            .collect::<Result<Vec<_>>>()?;
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        let ids = indices
            .iter()
            .map(|&i| self.sample_ids[i].clone())
            .collect();
        Self::with_ids(modalities, labels, ids)
    }

    /// Indices of target-class samples among `indices`.
    pub fn target_indices(&self, indices: &[usize]) -> Result<Vec<usize>> {
        let labels = self.require_labels()?;
        Ok(indices
            .iter()
            .copied()
            .filter(|&i| labels[i].is_target())
            .collect())
    }

    /// Stacks all modalities into a single modality (early fusion).
    pub fn concatenated(&self) -> Result<Self> {
        if self.n_modalities() == 1 {
            return Ok(self.clone());
        }
        let total: usize = self.dims().iter().sum();
        let n = self.n_samples();
        let mut out = DMatrix::zeros(total, n);
        let mut row = 0;
        for m in &self.modalities {
            out.rows_mut(row, m.dim()).copy_from(m.values());
            row += m.dim();
        }
        Self::with_ids(
            vec![FeatureMatrix::new(out)?],
            self.labels.clone(),
            self.sample_ids.clone(),
        )
    }

    /// Same features with target and non-target swapped.
    pub fn with_flipped_labels(&self) -> Self {
        let mut out = self.clone();
        if let Some(l) = out.labels.as_mut() {
            l.iter_mut().for_each(|x| *x = x.flipped());
        }
        out
    }

    pub fn with_labels(&self, labels: Option<Vec<Label>>) -> Result<Self> {
        Self::with_ids(self.modalities.clone(), labels, self.sample_ids.clone())
    }
}

/// Assignment of each sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// One sample per fold, in sample order. Not stratified: leave-one-out
    /// cannot give every fold a member of both classes.
    pub fn leave_one_out(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "leave-one-out needs 2 samples, got {n}"
            )));
        }
        Ok(FoldPlan {
            k: n,
            assignment: (0..n).collect(),
            seed: 0,
        })
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Single-column CSV of fold indices, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold\n");
        for f in &self.assignment {
            s.push_str(&f.to_string());
            s.push('\n');
        }
        s
    }
}

/// Seeded stratified fold assignment.
///
/// Each class is shuffled independently and dealt round-robin into the folds.
/// The dealing position carries over from one class to the next, so fold
/// sizes stay balanced as well as per-class counts.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count {k} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [Label::Target, Label::NonTarget] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class: class.code(),
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan {
        k,
        assignment,
        seed,
    })
}

/// Two-cluster synthetic dataset.
///
/// Per modality, targets come from a unit-covariance Gaussian at the origin
/// and outliers from the same Gaussian shifted by `separation` along a random
/// unit direction. Targets occupy the first `n_target` samples.
pub fn synth_multimodal(
    n_target: usize,
    n_outlier: usize,
    dims: &[usize],
    separation: f64,
    seed: u64,
) -> Result<MultiModalDataset> {
    if n_target == 0 || n_outlier == 0 {
        return Err(Error::InvalidParameter(
            "sample counts must be positive".into(),
        ));
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidParameter(
            "need at least one modality with positive dimension".into(),
        ));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_target + n_outlier;
    let mut modalities = Vec::with_capacity(dims.len());
    for &d in dims {
        let direction = loop {
            let u = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let norm = u.norm();
            if norm > 1e-12 {
                break u / norm;
            }
        };
        let mut values = DMatrix::<f64>::from_fn(d, n, |_, _| StandardNormal.sample(&mut rng));
        for j in n_target..n {
            let mut col = values.column_mut(j);
            col.axpy(separation, &direction, 1.0);
        }
        modalities.push(FeatureMatrix::new(values)?);
    }
    let labels = (0..n).map(|i| Label::from_bool(i < n_target)).collect();
    MultiModalDataset::new(modalities, Some(labels))
}

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = idx + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, &str>> = record
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| c))
            .collect();
        // a first row with a non-numeric cell is a header
        if idx == 0 && parsed.iter().any(std::result::Result::is_err) {
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for cell in parsed {
            match cell {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(v) => {
                    return Err(Error::NonFinite {
                        path: path.to_path_buf(),
                        line,
                        cell: v.to_string(),
                    })
                }
                Err(c) => {
                    return Err(Error::NonNumeric {
                        path: path.to_path_buf(),
                        line,
                        cell: c.to_string(),
                    })
                }
            }
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::RaggedRow {
                    path: path.to_path_buf(),
                    line,
                    expected: w,
                    found: row.len(),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidData(format!("{}: {:?}", path.display(), other)),
    }
}

/// Reads one modality. Returns `Ok(None)` for a file without data rows.
pub fn read_feature_csv(path: &Path) -> Result<Option<FeatureMatrix>> {
    let rows = parse_rows(path)?;
    if rows.is_empty() {
        return Ok(None);
    }
    FeatureMatrix::from_rows(&rows).map(Some)
}

pub fn read_label_csv(path: &Path) -> Result<Vec<Label>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let cell = raw.trim();
        if cell.is_empty() {
            continue;
        }
        let label = match cell.parse::<f64>() {
            Ok(1.0) => Label::Target,
            Ok(0.0) => Label::NonTarget,
            Err(_) if idx == 0 => continue,
            _ => {
                return Err(Error::UnknownLabel {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    value: cell.to_string(),
                })
            }
        };
        labels.push(label);
    }
    Ok(labels)
}

/// Loads a dataset from one CSV per modality plus an optional label file.
pub fn load_dataset<P: AsRef<Path>>(
    paths: &[P],
    label_path: Option<&Path>,
) -> Result<MultiModalDataset> {
    if paths.is_empty() {
        return Err(Error::InvalidData("no modality files given".into()));
    }
    let mut modalities = Vec::with_capacity(paths.len());
    let mut expected: Option<(PathBuf, usize)> = None;
    for p in paths {
        let p = p.as_ref();
        let m = read_feature_csv(p)?.ok_or_else(|| Error::EmptyFile {
            path: p.to_path_buf(),
        })?;
        match &expected {
            None => expected = Some((p.to_path_buf(), m.n_samples())),
            Some((_, n)) if *n != m.n_samples() => {
                return Err(Error::RowCountMismatch {
                    path: p.to_path_buf(),
                    expected: *n,
                    found: m.n_samples(),
                })
            }
            _ => {}
        }
        modalities.push(m);
    }
    let n = modalities[0].n_samples();
    let labels = match label_path {
        Some(lp) => {
            let l = read_label_csv(lp)?;
            if l.len() != n {
                return Err(Error::RowCountMismatch {
                    path: lp.to_path_buf(),
                    expected: n,
                    found: l.len(),
                });
            }
            Some(l)
        }
        None => None,
    };
    MultiModalDataset::new(modalities, labels)
}

/// Renders one modality as CSV, one sample per row. Values use the shortest
/// representation that parses back to the same bits.
pub fn feature_csv_string(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    for j in 0..m.n_samples() {
        let row: Vec<String> = m
            .values()
            .column(j)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn label_csv_string(labels: &[Label]) -> String {
    labels.iter().map(|l| format!("{}\n", l.code())).collect()
}

pub fn write_feature_csv(path: &Path, m: &FeatureMatrix) -> Result<()> {
    write_file(path, feature_csv_string(m).as_bytes())
}

pub fn write_label_csv(path: &Path, labels: &[Label]) -> Result<()> {
    write_file(path, label_csv_string(labels).as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_from(codes: &[u8]) -> Vec<Label> {
        codes.iter().map(|&c| Label::from_bool(c == 1)).collect()
    }

    #[test]
    fn unbalanced_classes_fold_evenly() {
        let mut codes = vec![1u8; 88];
        codes.extend(vec![0u8; 42]);
        let labels = labels_from(&codes);
        let plan = stratified_folds(&labels, 5, 3).unwrap();
        for f in 0..5 {
            let test = plan.test_indices(f);
            assert_eq!(test.len(), 26);
            let t = test.iter().filter(|&&i| labels[i].is_target()).count();
            assert!(t == 17 || t == 18, "fold {f} has {t} targets");
            let nt = test.len() - t;
            assert!(nt == 8 || nt == 9, "fold {f} has {nt} non-targets");
        }
    }

    #[test]
    fn minimal_stratification() {
        let labels = labels_from(&[1, 1, 0, 0]);
        let plan = stratified_folds(&labels, 2, 11).unwrap();
        for f in 0..2 {
            let test = plan.test_indices(f);
            assert_eq!(test.len(), 2);
            assert_eq!(test.iter().filter(|&&i| labels[i].is_target()).count(), 1);
        }
    }

    #[test]
    fn folds_are_deterministic() {
        let labels = labels_from(&[1, 0, 1, 1, 0, 0, 1, 0, 1, 1]);
        assert_eq!(
            stratified_folds(&labels, 3, 99).unwrap(),
            stratified_folds(&labels, 3, 99).unwrap()
        );
    }

    #[test]
    fn small_class_rejected() {
        let labels = labels_from(&[1, 1, 1, 0]);
        assert!(matches!(
            stratified_folds(&labels, 2, 0),
            Err(Error::ClassTooSmall {
                class: 0,
                count: 1,
                k: 2
            })
        ));
    }

    #[test]
    fn zero_separation_clusters_coincide() {
        let ds = synth_multimodal(4, 4, &[3, 2], 0.0, 5).unwrap();
        assert_eq!(ds.n_modalities(), 2);
        assert_eq!(ds.dims(), vec![3, 2]);
        assert_eq!(ds.n_samples(), 8);
        // with no shift both classes are plain standard-normal draws
        let far = ds
            .modality(0)
            .values()
            .column_iter()
            .all(|c| c.norm() < 10.0);
        assert!(far);
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_multimodal(10, 5, &[4, 4], 6.0, 7).unwrap();
        let b = synth_multimodal(10, 5, &[4, 4], 6.0, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_multimodal(10, 5, &[4, 4], 6.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_shift_has_requested_length() {
        // outlier mean minus target mean tends to separation * u
        let ds = synth_multimodal(4000, 4000, &[3], 6.0, 1).unwrap();
        let m = ds.modality(0).values();
        let t = m.columns(0, 4000).column_mean();
        let o = m.columns(4000, 4000).column_mean();
        assert!(((o - t).norm() - 6.0).abs() < 0.15);
    }

    #[test]
    fn single_modality_synth() {
        let ds = synth_multimodal(5, 5, &[3], 1.0, 0).unwrap();
        assert_eq!(ds.n_modalities(), 1);
        assert_eq!(ds.dims(), vec![3]);
    }

    #[test]
    fn feature_matrix_rejects_nan() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(FeatureMatrix::new(m).is_err());
    }

    #[test]
    fn concatenation_stacks_rows() {
        let ds = synth_multimodal(3, 2, &[2, 3], 1.0, 4).unwrap();
        let c = ds.concatenated().unwrap();
        assert_eq!(c.dims(), vec![5]);
        assert_eq!(
            c.modality(0).values().rows(2, 3),
            ds.modality(1).values().rows(0, 3)
        );
    }
}
