//! Gesture evaluation metrics: SRGR, L1 diversity, FGD and BeatAlign.
//!
//! Batch metrics evaluate clips in parallel but always reduce in clip order,
//! so results do not depend on the thread count.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::annotation::ScoreTrack;
use crate::beatsig::BeatSequence;
use crate::motion::PositionTrack;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("all semantic weights are zero")]
    AllWeightsZero,
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("empty beat sequence: {0}")]
    EmptyBeats(&'static str),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// PCK threshold used when none is given, in centimeters.
pub const DEFAULT_PCK_DELTA: f64 = 2.0;
/// BeatAlign kernel width in seconds.
pub const DEFAULT_BEAT_SIGMA: f64 = 0.1;
/// Negative trace values above this are rounding noise and become 0.
pub const TRACE_CLAMP: f64 = -1e-6;
/// Symmetry / eigenvalue tolerance.
pub const SYMMETRY_TOL: f64 = 1e-8;

fn check_same_shape(truth: &PositionTrack, pred: &PositionTrack) -> Result<()> {
    if truth.num_frames() != pred.num_frames() || truth.num_joints() != pred.num_joints() {
        return Err(MetricError::ShapeMismatch(format!(
            "truth {}×{} vs prediction {}×{}",
            truth.num_frames(),
            truth.num_joints(),
            pred.num_frames(),
            pred.num_joints()
        )));
    }
    Ok(())
}

/// Per-frame fraction of joints within `delta` (strictly) of the truth.
pub fn pck(truth: &PositionTrack, pred: &PositionTrack, delta: f64) -> Result<Vec<f64>> {
    check_same_shape(truth, pred)?;
    if !(delta > 0.0) {
        return Err(MetricError::Invalid(format!("delta must be positive, got {delta}")));
    }
    let joints = truth.num_joints();
    if joints == 0 {
        return Err(MetricError::ShapeMismatch("tracks have no joints".into()));
    }
    Ok((0..truth.num_frames())
        .map(|t| {
            let hits = truth
                .frame(t)
                .iter()
                .zip(pred.frame(t))
                .filter(|(a, b)| {
                    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
                    d2.sqrt() < delta
                })
                .count();
            hits as f64 / joints as f64
        })
        .collect())
}

/// Ground truth, prediction and per-frame semantic weights of one clip.
#[derive(Debug, Clone)]
pub struct ClipPair {
    truth: PositionTrack,
    pred: PositionTrack,
    weights: ScoreTrack,
}

impl ClipPair {
    pub fn new(truth: PositionTrack, pred: PositionTrack, weights: ScoreTrack) -> Result<ClipPair> {
        check_same_shape(&truth, &pred)?;
        if weights.len() != truth.num_frames() {
            return Err(MetricError::ShapeMismatch(format!(
                "{} weights for {} frames",
                weights.len(),
                truth.num_frames()
            )));
        }
        if truth.fps() != pred.fps() || truth.fps() != weights.fps {
            return Err(MetricError::ShapeMismatch(format!(
                "frame rates differ: truth {}, prediction {}, weights {}",
                truth.fps(),
                pred.fps(),
                weights.fps
            )));
        }
        Ok(ClipPair { truth, pred, weights })
    }

    pub fn truth(&self) -> &PositionTrack {
        &self.truth
    }

    pub fn pred(&self) -> &PositionTrack {
        &self.pred
    }

    pub fn weights(&self) -> &ScoreTrack {
        &self.weights
    }
}

/// Semantic-relevance gesture recall: PCK weighted per frame by λ and
/// normalized by the total weight of the evaluation set.
pub fn srgr(clips: &[ClipPair], delta: f64) -> Result<f64> {
    if clips.is_empty() {
        return Err(MetricError::TooFew { needed: 1, got: 0 });
    }
    let partial: Vec<(f64, f64)> = clips
        .par_iter()
        .map(|c| {
            let recall = pck(&c.truth, &c.pred, delta)?;
            let lam = c.weights.scores();
            let num = recall.iter().zip(lam).map(|(r, l)| r * l).sum::<f64>();
            Ok((num, lam.iter().sum::<f64>()))
        })
        .collect::<Result<_>>()?;
    let (num, den) = partial
        .iter()
        .fold((0.0, 0.0), |(n, d), (pn, pd)| (n + pn, d + pd));
    if den <= 0.0 {
        return Err(MetricError::AllWeightsZero);
    }
    Ok(num / den)
}

/// Mean L1 distance over ordered pairs, halved:
/// `Σ_i Σ_j ‖x_i − x_j‖₁ / (2N(N−1))`.
pub fn l1_diversity(clips: &[Vec<f64>]) -> Result<f64> {
    let n = clips.len();
    if n < 2 {
        return Err(MetricError::TooFew { needed: 2, got: n });
    }
    let dim = clips[0].len();
    if clips.iter().any(|c| c.len() != dim) {
        return Err(MetricError::ShapeMismatch("clip vectors differ in length".into()));
    }
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            clips
                .iter()
                .map(|other| clips[i].iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>())
                .sum::<f64>()
        })
        .collect();
    Ok(rows.iter().sum::<f64>() / (2.0 * n as f64 * (n - 1) as f64))
}

/// Crops every track to the shortest length, centered, and flattens it.
pub fn center_crop_flatten(tracks: &[PositionTrack]) -> Result<Vec<Vec<f64>>> {
    let joints = tracks.first().map_or(0, PositionTrack::num_joints);
    if tracks.iter().any(|t| t.num_joints() != joints) {
        return Err(MetricError::ShapeMismatch("tracks differ in joint count".into()));
    }
    let shortest = tracks.iter().map(PositionTrack::num_frames).min().unwrap_or(0);
    Ok(tracks
        .iter()
        .map(|t| {
            let start = (t.num_frames() - shortest) / 2;
            t.flatten_range(start, start + shortest)
        })
        .collect())
}

/// Mean and covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and `1/(N−1)` covariance of an `N × d` feature matrix.
pub fn gaussian_stats(features: &DMatrix<f64>) -> Result<GaussianStats> {
    let n = features.nrows();
    if n < 2 {
        return Err(MetricError::TooFew { needed: 2, got: n });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let mean = features.row_mean().transpose();
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov })
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

/// Principal square root of a symmetric positive semi-definite matrix via its
/// eigendecomposition. Small negative eigenvalues are treated as zero.
pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(MetricError::ShapeMismatch(format!("{}×{} is not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let asym = asymmetry(m);
    let scale = 1.0 + m.abs().max();
    if asym > 1e-6 * scale {
        return Err(MetricError::NotSymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if min < -SYMMETRY_TOL * scale {
        log::warn!("clamping eigenvalue {min:e} to zero in matrix square root");
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `‖μr − μg‖² + Tr(Σr + Σg − 2(Σr^½ Σg Σr^½)^½)`.
pub fn frechet_distance(r: &GaussianStats, g: &GaussianStats) -> Result<f64> {
    if r.dim() != g.dim() || r.cov.nrows() != r.dim() || g.cov.nrows() != g.dim() {
        return Err(MetricError::ShapeMismatch(format!("dimensions {} and {}", r.dim(), g.dim())));
    }
    if r.mean == g.mean && r.cov == g.cov {
        // Exact zero instead of the rounding left by the two square roots.
        return Ok(0.0);
    }
    let diff = (&r.mean - &g.mean).norm_squared();
    let root_r = sqrtm_spd(&r.cov)?;
    let inner = &root_r * &g.cov * &root_r;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = sqrtm_spd(&inner)?.trace();
    let trace = r.cov.trace() + g.cov.trace() - 2.0 * cross;
    let trace = if trace < 0.0 {
        if trace < TRACE_CLAMP {
            log::warn!("trace term {trace:e} is below the clamp threshold");
        }
        0.0
    } else {
        trace
    };
    Ok(diff + trace)
}

/// Fréchet distance between the Gaussian fits of two feature sets.
pub fn fgd(real: &DMatrix<f64>, generated: &DMatrix<f64>) -> Result<f64> {
    if real.ncols() != generated.ncols() {
        return Err(MetricError::ShapeMismatch(format!(
            "feature dimensions {} and {}",
            real.ncols(),
            generated.ncols()
        )));
    }
    let d = real.ncols();
    if real.nrows() <= d || generated.nrows() <= d {
        log::warn!(
            "fewer samples ({} / {}) than dimensions + 1 ({}); covariance is rank deficient",
            real.nrows(),
            generated.nrows(),
            d + 1
        );
    }
    frechet_distance(&gaussian_stats(real)?, &gaussian_stats(generated)?)
}

/// Mean over gesture beats of `exp(−min_a (g − a)² / 2σ²)`.
pub fn beat_align(gesture: &BeatSequence, audio: &BeatSequence, sigma: f64) -> Result<f64> {
    if gesture.is_empty() {
        return Err(MetricError::EmptyBeats("gesture"));
    }
    if audio.is_empty() {
        return Err(MetricError::EmptyBeats("audio"));
    }
    if !(sigma > 0.0) {
        return Err(MetricError::Invalid(format!("sigma must be positive, got {sigma}")));
    }
    let a = audio.times();
    let total: f64 = gesture
        .times()
        .iter()
        .map(|&g| {
            // Nearest audio beat via binary search on the sorted sequence.
            let i = a.partition_point(|&x| x < g);
            let mut best = f64::INFINITY;
            for k in [i.wrapping_sub(1), i] {
                if let Some(&x) = a.get(k) {
                    best = best.min((g - x).abs());
                }
            }
            (-best * best / (2.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok(total / gesture.len() as f64)
}

/// Parses a headerless or single-header CSV of feature rows.
pub fn read_feature_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(MetricError::Invalid(format!("line {}: non-numeric feature", i + 1))),
        }
    }
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(MetricError::ShapeMismatch("ragged feature rows".into()));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), d, rows.into_iter().flatten()))
}

/// Deterministic FGD feature extractor: flattened fixed-length windows of
/// joint positions projected onto the leading principal components of a
/// reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFeatureMap {
    pub window: usize,
    pub stride: usize,
    mean: DVector<f64>,
    /// `k × D`, one component per row.
    components: DMatrix<f64>,
}

/// Flattened `window`-frame slices of every track, `stride` frames apart.
pub fn motion_windows(tracks: &[PositionTrack], window: usize, stride: usize) -> Result<DMatrix<f64>> {
    if window == 0 || stride == 0 {
        return Err(MetricError::Invalid("window and stride must be positive".into()));
    }
    let joints = tracks.first().map_or(0, PositionTrack::num_joints);
    if tracks.iter().any(|t| t.num_joints() != joints) {
        return Err(MetricError::ShapeMismatch("tracks differ in joint count".into()));
    }
    let dim = window * joints * 3;
    let mut data = Vec::new();
    let mut n = 0;
    for t in tracks {
        let mut start = 0;
        while start + window <= t.num_frames() {
            data.extend(t.flatten_range(start, start + window));
            n += 1;
            start += stride;
        }
    }
    Ok(DMatrix::from_row_slice(n, dim, &data))
}

impl PcaFeatureMap {
    /// Fits `k` components on the rows of `reference`.
    pub fn fit(reference: &DMatrix<f64>, k: usize, window: usize, stride: usize) -> Result<PcaFeatureMap> {
        let n = reference.nrows();
        if n < 2 {
            return Err(MetricError::TooFew { needed: 2, got: n });
        }
        if k == 0 {
            return Err(MetricError::Invalid("need at least one component".into()));
        }
        let mean = reference.row_mean().transpose();
        let mut x = reference.clone();
        for mut row in x.row_iter_mut() {
            row -= mean.transpose();
        }
        // Eigenvectors of the N×N Gram matrix map to those of XᵀX, which is
        // cheaper whenever windows outnumber samples.
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > 1e-10 * top.max(1e-300))
            .take(k)
            .collect();
        if kept.is_empty() {
            return Err(MetricError::Invalid("reference set has no variance".into()));
        }
        let d = reference.ncols();
        let mut components = DMatrix::zeros(kept.len(), d);
        for (row, &i) in kept.iter().enumerate() {
            let mut v = x.transpose() * eig.eigenvectors.column(i);
            v /= v.norm();
            let pivot = v.iamax();
            if v[pivot] < 0.0 {
                v = -v;
            }
            components.set_row(row, &v.transpose());
        }
        Ok(PcaFeatureMap {
            window,
            stride,
            mean,
            components,
        })
    }

    pub fn num_components(&self) -> usize {
        self.components.nrows()
    }

    /// Projects rows onto the fitted components, giving `N × k` features.
    pub fn transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rows.ncols() != self.mean.len() {
            return Err(MetricError::ShapeMismatch(format!(
                "expected {} columns, got {}",
                self.mean.len(),
                rows.ncols()
            )));
        }
        let mut x = rows.clone();
        for mut row in x.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(x * self.components.transpose())
    }

    pub fn features(&self, tracks: &[PositionTrack]) -> Result<DMatrix<f64>> {
        self.transform(&motion_windows(tracks, self.window, self.stride)?)
    }
}

/// FGD with the built-in feature map fitted on the real tracks.
pub fn fgd_tracks(real: &[PositionTrack], generated: &[PositionTrack], window: usize, components: usize) -> Result<f64> {
    let stride = (window / 2).max(1);
    let real_rows = motion_windows(real, window, stride)?;
    let map = PcaFeatureMap::fit(&real_rows, components, window, stride)?;
    fgd(&map.transform(&real_rows)?, &map.features(generated)?)
}
