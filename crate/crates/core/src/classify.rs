//! Source classification on the plane (ln median energy, ln distance).
//!
//! Two classifiers: quadratic discriminant analysis with Gaussian
//! class-conditional densities, and the k-nearest-neighbour rule on raw
//! (unstandardized) features. Cross-validation folds are stratified by class
//! and drawn from a seeded stream.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SourceFeatures;
use crate::metrics::Metric;
use crate::rng::{derive_key, stream_rng};

/// Source classes in their fixed tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceClass {
    /// Extragalactic (non-member)
    #[serde(rename = "NM")]
    Extragalactic,
    #[serde(rename = "HO")]
    HeavilyObscured,
    #[serde(rename = "LO")]
    LightlyObscured,
}

impl SourceClass {
    pub const ALL: [SourceClass; 3] = [
        SourceClass::Extragalactic,
        SourceClass::HeavilyObscured,
        SourceClass::LightlyObscured,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            SourceClass::Extragalactic => "NM",
            SourceClass::HeavilyObscured => "HO",
            SourceClass::LightlyObscured => "LO",
        }
    }
}

impl fmt::Display for SourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SourceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nm" | "extragalactic" => Ok(SourceClass::Extragalactic),
            "ho" | "heavily-obscured" | "heavilyobscured" => Ok(SourceClass::HeavilyObscured),
            "lo" | "lightly-obscured" | "lightlyobscured" => Ok(SourceClass::LightlyObscured),
            _ => Err(Error::InvalidParameter(format!("unknown source class {s:?}"))),
        }
    }
}

pub type Point = [f64; 2];

/// Classification features: `x1 = ln(median energy)`, `x2 = ln(distance)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub points: Vec<Point>,
    pub labels: Vec<Option<SourceClass>>,
}

impl FeatureMatrix {
    /// Builds the feature plane for one distance. `metric` must be one of the
    /// three per-source distances (kappa, nw, nz2).
    pub fn from_features(features: &[SourceFeatures], metric: Metric) -> Result<Self> {
        let mut out = Self::default();
        for f in features {
            let d = match metric {
                Metric::Kolmogorov => f.dist_kolmogorov,
                Metric::NormWasserstein => f.dist_norm_wasserstein,
                Metric::NormZolotarev2 => f.dist_norm_zolotarev2,
                other => return Err(Error::UnsupportedMetric(other.to_string())),
            };
            if !(d > 0.0 && f.med_energy_kev > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "source {}: features must be positive before taking logs",
                    f.source_id
                )));
            }
            let p = [f.med_energy_kev.ln(), d.ln()];
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "source {}: non-finite feature",
                    f.source_id
                )));
            }
            out.ids.push(f.source_id.clone());
            out.points.push(p);
            out.labels.push(f.class_label);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rows that carry a label.
    pub fn labeled(&self) -> (Vec<Point>, Vec<SourceClass>) {
        self.points
            .iter()
            .zip(&self.labels)
            .filter_map(|(p, l)| l.map(|c| (*p, c)))
            .unzip()
    }
}

fn check_finite(p: &Point) -> Result<()> {
    if p.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("non-finite point {p:?}")))
    }
}

fn check_aligned(points: &[Point], labels: &[SourceClass]) -> Result<()> {
    if points.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    points.iter().try_for_each(check_finite)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class: SourceClass,
    pub prior: f64,
    pub mean: Point,
    /// Row-major `[[sxx, sxy], [sxy, syy]]`.
    pub covariance: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub classes: Vec<ClassModel>,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaPrediction {
    pub class: SourceClass,
    /// Aligned with the model's classes; sums to 1.
    pub posteriors: Vec<(SourceClass, f64)>,
}

impl QdaPrediction {
    pub fn posterior(&self, class: SourceClass) -> f64 {
        self.posteriors
            .iter()
            .find(|(c, _)| *c == class)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn percent(&self) -> Vec<(SourceClass, f64)> {
        self.posteriors.iter().map(|&(c, p)| (c, 100.0 * p)).collect()
    }
}

pub const MIN_QDA_CLASS_ROWS: usize = 3;

/// Cholesky factor check for a 2x2 covariance.
fn is_positive_definite(c: &[[f64; 2]; 2]) -> bool {
    let a = c[0][0];
    if !(a > 0.0) {
        return false;
    }
    let l21 = c[1][0] / a.sqrt();
    let d = c[1][1] - l21 * l21;
    d > 1e-12 * c[1][1].abs() && d > 0.0
}

/// Fits a QDA model. Priors are class proportions and covariances use the
/// `n - 1` denominator; `ridge` adds `ridge * I` to every covariance.
pub fn fit_qda(points: &[Point], labels: &[SourceClass], ridge: f64) -> Result<QdaModel> {
    check_aligned(points, labels)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {ridge}")));
    }
    let n = points.len() as f64;
    let mut classes = Vec::new();
    for class in SourceClass::ALL {
        let rows: Vec<&Point> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(p, _)| p)
            .collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < MIN_QDA_CLASS_ROWS {
            return Err(Error::InvalidParameter(format!(
                "class {class} has {} rows, QDA needs at least {MIN_QDA_CLASS_ROWS}",
                rows.len()
            )));
        }
        let m = rows.len() as f64;
        let mean = [
            rows.iter().map(|p| p[0]).sum::<f64>() / m,
            rows.iter().map(|p| p[1]).sum::<f64>() / m,
        ];
        let mut cov = [[0.0; 2]; 2];
        for p in &rows {
            let d = [p[0] - mean[0], p[1] - mean[1]];
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += d[i] * d[j];
                }
            }
        }
        for (i, row) in cov.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v /= m - 1.0;
            }
            row[i] += ridge;
        }
        if !is_positive_definite(&cov) {
            return Err(Error::SingularCovariance {
                class: class.to_string(),
            });
        }
        classes.push(ClassModel {
            class,
            prior: m / n,
            mean,
            covariance: cov,
        });
    }
    if classes.len() < 2 {
        return Err(Error::InvalidParameter(
            "QDA needs labeled rows from at least two classes".into(),
        ));
    }
    Ok(QdaModel { classes, ridge })
}

impl QdaModel {
    fn log_joint(&self, p: &Point) -> Vec<f64> {
        self.classes
            .iter()
            .map(|c| {
                let [[a, b], [_, d]] = c.covariance;
                let det = a * d - b * b;
                let x = p[0] - c.mean[0];
                let y = p[1] - c.mean[1];
                let q = (d * x * x - 2.0 * b * x * y + a * y * y) / det;
                c.prior.ln() - 0.5 * det.ln() - 0.5 * q - (2.0 * std::f64::consts::PI).ln()
            })
            .collect()
    }

    pub fn predict(&self, point: &Point) -> Result<QdaPrediction> {
        check_finite(point)?;
        let logs = self.log_joint(point);
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let posteriors: Vec<(SourceClass, f64)> = self
            .classes
            .iter()
            .zip(&weights)
            .map(|(c, w)| (c.class, w / total))
            .collect();
        // first maximum wins, which follows the class order
        let class = posteriors
            .iter()
            .fold(None::<(SourceClass, f64)>, |best, &(c, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((c, p)),
            })
            .map(|(c, _)| c)
            .expect("model has classes");
        Ok(QdaPrediction { class, posteriors })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: QdaModel = serde_json::from_str(text)?;
        let total: f64 = model.classes.iter().map(|c| c.prior).sum();
        if model.classes.len() < 2 || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("QDA model priors must sum to 1".into()));
        }
        if let Some(c) = model.classes.iter().find(|c| !is_positive_definite(&c.covariance)) {
            return Err(Error::SingularCovariance {
                class: c.class.to_string(),
            });
        }
        Ok(model)
    }
}

pub fn predict_qda(model: &QdaModel, point: &Point) -> Result<QdaPrediction> {
    model.predict(point)
}

fn squared_distance(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Training rows ordered by distance to `point` (ties by row index).
fn neighbours(train: &[Point], point: &Point) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, p)| (squared_distance(p, point).sqrt(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

/// Majority vote among the first `k` neighbours. Ties go to the class with the
/// smaller mean distance, then to the earlier class.
fn vote(sorted: &[(f64, usize)], labels: &[SourceClass], k: usize) -> SourceClass {
    let mut count = [0usize; 3];
    let mut dist = [0.0f64; 3];
    for &(d, i) in &sorted[..k] {
        let c = labels[i].index();
        count[c] += 1;
        dist[c] += d;
    }
    let mut best = None::<(usize, f64, SourceClass)>;
    for class in SourceClass::ALL {
        let c = class.index();
        if count[c] == 0 {
            continue;
        }
        let mean = dist[c] / count[c] as f64;
        best = match best {
            Some((bc, bm, _)) if bc > count[c] || (bc == count[c] && bm <= mean) => best,
            _ => Some((count[c], mean, class)),
        };
    }
    best.expect("k >= 1").2
}

pub fn knn_predict(train: &[Point], labels: &[SourceClass], k: usize, point: &Point) -> Result<SourceClass> {
    check_aligned(train, labels)?;
    check_finite(point)?;
    if train.is_empty() {
        return Err(Error::EmptySample);
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in 1..={}",
            train.len()
        )));
    }
    Ok(vote(&neighbours(train, point), labels, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvScheme {
    Cv10,
    Cv5,
    Loo,
}

impl CvScheme {
    pub fn folds(self, n: usize) -> usize {
        match self {
            CvScheme::Cv10 => 10,
            CvScheme::Cv5 => 5,
            CvScheme::Loo => n,
        }
    }
}

impl fmt::Display for CvScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvScheme::Cv10 => "cv10",
            CvScheme::Cv5 => "cv5",
            CvScheme::Loo => "loo",
        })
    }
}

impl FromStr for CvScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cv10" | "10" => Ok(CvScheme::Cv10),
            "cv5" | "5" => Ok(CvScheme::Cv5),
            "loo" => Ok(CvScheme::Loo),
            _ => Err(Error::InvalidParameter(format!("unknown CV scheme {s:?}"))),
        }
    }
}

/// Odd `k` from 5 to 63.
pub fn default_k_grid() -> Vec<usize> {
    (5..=63).step_by(2).collect()
}

const FOLD_STREAM: u64 = 0xF01D;

/// Fold index per row. Rows are shuffled within each class and dealt out in
/// turn, so every fold sees each class in proportion.
pub fn stratified_folds(labels: &[SourceClass], scheme: CvScheme, seed: u64) -> Result<Vec<usize>> {
    let n = labels.len();
    let folds = scheme.folds(n);
    if folds < 2 {
        return Err(Error::InvalidParameter("cross-validation needs at least two rows".into()));
    }
    if scheme == CvScheme::Loo {
        return Ok((0..n).collect());
    }
    let mut assignment = vec![0; n];
    let mut next = 0;
    for class in SourceClass::ALL {
        let mut rows: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < folds {
            return Err(Error::InvalidParameter(format!(
                "class {class} has {} rows, fewer than the {folds} folds",
                rows.len()
            )));
        }
        let mut rng = stream_rng(derive_key(seed, &[FOLD_STREAM]), class.index() as u64);
        rows.shuffle(&mut rng);
        for i in rows {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

fn split(points: &[Point], labels: &[SourceClass], folds: &[usize], fold: usize) -> (Vec<Point>, Vec<SourceClass>, Vec<usize>) {
    let mut tp = Vec::new();
    let mut tl = Vec::new();
    let mut test = Vec::new();
    for i in 0..points.len() {
        if folds[i] == fold {
            test.push(i);
        } else {
            tp.push(points[i]);
            tl.push(labels[i]);
        }
    }
    (tp, tl, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub scheme: CvScheme,
    pub seed: u64,
    /// `(k, accuracy)` for every candidate.
    pub accuracy: Vec<(usize, f64)>,
}

/// Cross-validated accuracy of k-NN over `k_grid`; ties go to the smallest k.
pub fn select_k(
    points: &[Point],
    labels: &[SourceClass],
    k_grid: &[usize],
    scheme: CvScheme,
    seed: u64,
) -> Result<KSelection> {
    check_aligned(points, labels)?;
    if k_grid.is_empty() || k_grid.contains(&0) {
        return Err(Error::InvalidParameter("k grid must be nonempty and positive".into()));
    }
    let folds = stratified_folds(labels, scheme, seed)?;
    let n_folds = scheme.folds(points.len());
    let k_max = *k_grid.iter().max().expect("nonempty");
    let hits: Vec<Vec<usize>> = (0..n_folds)
        .into_par_iter()
        .map(|fold| {
            let (tp, tl, test) = split(points, labels, &folds, fold);
            if k_max > tp.len() {
                return Err(Error::InvalidParameter(format!(
                    "k = {k_max} exceeds the {} training rows of a fold",
                    tp.len()
                )));
            }
            let mut hits = vec![0; k_grid.len()];
            for &i in &test {
                let sorted = neighbours(&tp, &points[i]);
                for (h, &k) in hits.iter_mut().zip(k_grid) {
                    if vote(&sorted, &tl, k) == labels[i] {
                        *h += 1;
                    }
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let n = points.len() as f64;
    let accuracy: Vec<(usize, f64)> = k_grid
        .iter()
        .enumerate()
        .map(|(j, &k)| (k, hits.iter().map(|h| h[j]).sum::<usize>() as f64 / n))
        .collect();
    let mut best = accuracy[0];
    for &(k, a) in &accuracy[1..] {
        if a > best.1 || (a == best.1 && k < best.0) {
            best = (k, a);
        }
    }
    Ok(KSelection {
        k: best.0,
        scheme,
        seed,
        accuracy,
    })
}

/// Counts indexed `[predicted][actual]` in class order NM, HO, LO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[SourceClass], actual: &[SourceClass]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::Dimension(format!(
                "{} predictions for {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let mut m = Self::default();
        for (p, a) in predicted.iter().zip(actual) {
            m.counts[p.index()][a.index()] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..3).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }

    /// Share of correct predictions among those assigned to `class`; `None`
    /// when the class is never predicted.
    pub fn ppv(&self, class: SourceClass) -> Option<f64> {
        let i = class.index();
        let row: usize = self.counts[i].iter().sum();
        (row > 0).then(|| self.counts[i][i] as f64 / row as f64)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["predicted", "NM", "HO", "LO"]).map_err(io)?;
        for class in SourceClass::ALL {
            let row = self.counts[class.index()];
            w.write_record([
                class.code().to_string(),
                row[0].to_string(),
                row[1].to_string(),
                row[2].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Qda { ridge: f64 },
    Knn { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EvalMode {
    Resubstitution,
    Cv { scheme: CvScheme, seed: u64 },
}

fn fit_predict(
    classifier: Classifier,
    train: &[Point],
    labels: &[SourceClass],
    test: &[Point],
) -> Result<Vec<SourceClass>> {
    match classifier {
        Classifier::Qda { ridge } => {
            let model = fit_qda(train, labels, ridge)?;
            test.iter().map(|p| model.predict(p).map(|r| r.class)).collect()
        }
        Classifier::Knn { k } => test
            .iter()
            .map(|p| knn_predict(train, labels, k, p))
            .collect(),
    }
}

/// Confusion matrix of `classifier` on labeled data, either refitting on all
/// rows (resubstitution) or predicting each fold from the others.
pub fn evaluate(
    classifier: Classifier,
    points: &[Point],
    labels: &[SourceClass],
    mode: EvalMode,
) -> Result<ConfusionMatrix> {
    check_aligned(points, labels)?;
    let predicted = match mode {
        EvalMode::Resubstitution => fit_predict(classifier, points, labels, points)?,
        EvalMode::Cv { scheme, seed } => {
            let folds = stratified_folds(labels, scheme, seed)?;
            let parts: Vec<(Vec<usize>, Vec<SourceClass>)> = (0..scheme.folds(points.len()))
                .into_par_iter()
                .map(|fold| {
                    let (tp, tl, test) = split(points, labels, &folds, fold);
                    let queries: Vec<Point> = test.iter().map(|&i| points[i]).collect();
                    Ok((test, fit_predict(classifier, &tp, &tl, &queries)?))
                })
                .collect::<Result<_>>()?;
            let mut predicted = vec![SourceClass::Extragalactic; points.len()];
            for (rows, preds) in parts {
                for (i, p) in rows.into_iter().zip(preds) {
                    predicted[i] = p;
                }
            }
            predicted
        }
    };
    ConfusionMatrix::from_predictions(&predicted, labels)
}

/// Three Gaussian clusters laid out like the usual picture of the classes:
/// extragalactic sources hard and close to exponential, obscured young stars
/// hard and far from it, lightly obscured ones soft and far from it.
pub fn synthetic_clusters(per_class: usize, seed: u64) -> (Vec<Point>, Vec<SourceClass>) {
    use rand_distr::{Distribution, Normal};
    let centers = [
        (SourceClass::Extragalactic, [1.2, -4.5]),
        (SourceClass::HeavilyObscured, [1.3, -1.5]),
        (SourceClass::LightlyObscured, [0.1, -1.8]),
    ];
    let noise = Normal::new(0.0, 0.25).expect("valid sd");
    let mut points = Vec::with_capacity(3 * per_class);
    let mut labels = Vec::with_capacity(3 * per_class);
    for (class, c) in centers {
        let mut rng = stream_rng(derive_key(seed, &[0xC1A55]), class.index() as u64);
        for _ in 0..per_class {
            points.push([c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
            labels.push(class);
        }
    }
    (points, labels)
}
