//! Trajectory accuracy metrics: aligned absolute RMSE, per-second relative pose
//! error, track-loss rate and the success/failure rule for a single run.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::traj_io::{associate, AssociatedPairs, PosePair, Trajectory, DEFAULT_MAX_DIFF};

/// A run losing track for more than this fraction of the ground-truth span fails.
pub const FAILURE_LOSS_RATE: f64 = 1.0 / 3.0;

/// Default RPE interval in seconds; errors are reported in m/s.
pub const DEFAULT_RPE_DELTA: f64 = 1.0;

/// Matched ground-truth samples further apart than this, and not adjacent in
/// the ground-truth stream, count as a tracking gap.
pub const DEFAULT_MAX_GAP: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("need at least 3 point pairs, got {0}")]
    TooFewPoints(usize),
    #[error("point configuration does not determine a unique alignment")]
    DegenerateConfiguration,
    #[error("source and target point sets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no pose pairs")]
    EmptyInput,
    #[error("no pose pair interval matches the requested delta")]
    NoValidIntervals,
    #[error("RPE delta must be positive")]
    InvalidDelta,
    #[error("no successful run to average")]
    AllFailed,
}

/// `p ↦ scale · rotation · p + translation`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Closed-form least-squares alignment mapping `src` onto `dst` (Umeyama).
///
/// Minimizes `Σ‖dst_i − (s·R·src_i + t)‖²`; `with_scale = false` fixes `s = 1`.
pub fn umeyama_align(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
) -> Result<SimilarityTransform, MetricError> {
    solve_alignment(src, dst, with_scale, true)
}

// With `strict = false` a rank-deficient configuration still yields one of the
// minimizers; the minimum residual itself is unique either way.
fn solve_alignment(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
    strict: bool,
) -> Result<SimilarityTransform, MetricError> {
    if src.len() != dst.len() {
        return Err(MetricError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(MetricError::TooFewPoints(src.len()));
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() / n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_s;
        cov += (d - mu_d) * sc.transpose();
        var_s += sc.norm_squared();
    }
    cov /= n;
    var_s /= n;

    let svd = SVD::new(cov, true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // Rank < 2 leaves a rotational degree of freedom unconstrained.
    if strict && (!(sv[0] > 0.0) || sv[1] <= sv[0] * 1e-10 || var_s <= 0.0) {
        return Err(MetricError::DegenerateConfiguration);
    }

    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut correction = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        // Flip the axis belonging to the smallest singular value.
        let (min_idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        correction[(min_idx, min_idx)] = -1.0;
    }
    let r = u * correction * v_t;
    let scale = if with_scale && var_s > 0.0 {
        let trace: f64 = (0..3)
            .map(|i| svd.singular_values[i] * correction[(i, i)])
            .sum();
        trace / var_s
    } else {
        1.0
    };
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = mu_d - scale * (r * mu_s);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Alignment {
    None,
    #[default]
    Se3,
    Sim3,
}

impl std::str::FromStr for Alignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "se3" => Ok(Self::Se3),
            "sim3" => Ok(Self::Sim3),
            other => Err(format!("unknown alignment '{other}'")),
        }
    }
}

/// Root mean squared translational error after optional alignment of the
/// estimate onto ground truth. Degenerate (e.g. straight-line) motion is
/// accepted since the minimal residual is still well defined.
pub fn ate_rmse(pairs: &AssociatedPairs, align: Alignment) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let est: Vec<Vector3<f64>> = pairs.pairs.iter().map(|p| p.est.position).collect();
    let gt: Vec<Vector3<f64>> = pairs.pairs.iter().map(|p| p.gt.position).collect();
    let transform = match align {
        Alignment::None => SimilarityTransform::identity(),
        Alignment::Se3 => solve_alignment(&est, &gt, false, false)?,
        Alignment::Sim3 => solve_alignment(&est, &gt, true, false)?,
    };
    let sum_sq: f64 = est
        .iter()
        .zip(&gt)
        .map(|(e, g)| (g - transform.apply(e)).norm_squared())
        .sum();
    Ok((sum_sq / est.len() as f64).sqrt())
}

fn isometry(p: &crate::traj_io::StampedPose) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::from(p.position), p.orientation)
}

/// Translational relative pose error per second over intervals of `delta` seconds.
///
/// For each pair `i` the partner `j` is the pair whose timestamp is closest to
/// `t_i + delta` (and within the association tolerance). The error is the
/// translation of `(G_i⁻¹G_j)⁻¹(E_i⁻¹E_j)` divided by `t_j − t_i`.
pub fn rpe_rmse(pairs: &AssociatedPairs, delta: f64) -> Result<f64, MetricError> {
    if !(delta > 0.0) {
        return Err(MetricError::InvalidDelta);
    }
    let p: &[PosePair] = &pairs.pairs;
    let times: Vec<f64> = p.iter().map(|x| x.est.t).collect();
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for i in 0..p.len() {
        let target = times[i] + delta;
        let k = times.partition_point(|&t| t < target);
        let j = [k.wrapping_sub(1), k]
            .into_iter()
            .filter(|&j| j < p.len() && j > i)
            .min_by(|&a, &b| (times[a] - target).abs().total_cmp(&(times[b] - target).abs()));
        let Some(j) = j else { continue };
        if (times[j] - target).abs() > pairs.max_diff {
            continue;
        }
        let rel_gt = isometry(&p[i].gt).inverse() * isometry(&p[j].gt);
        let rel_est = isometry(&p[i].est).inverse() * isometry(&p[j].est);
        let err = rel_gt.inverse() * rel_est;
        let rate = err.translation.vector.norm() / (times[j] - times[i]);
        sum_sq += rate * rate;
        count += 1;
    }
    if count == 0 {
        return Err(MetricError::NoValidIntervals);
    }
    Ok((sum_sq / count as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RunStatus {
    Success,
    Failure,
}

impl RunStatus {
    pub fn from_loss_rate(loss_rate: f64) -> Self {
        if loss_rate > FAILURE_LOSS_RATE {
            Self::Failure
        } else {
            Self::Success
        }
    }
}

/// Outcome of evaluating one run against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub rmse_m: Option<f64>,
    pub rpe_mps: Option<f64>,
    pub loss_rate: f64,
    pub status: RunStatus,
    pub n_matched: usize,
}

impl RunResult {
    /// A result carrying only a loss rate and optional metric values; the status
    /// follows from the loss rate.
    pub fn from_parts(rmse_m: Option<f64>, rpe_mps: Option<f64>, loss_rate: f64) -> Self {
        let loss_rate = loss_rate.clamp(0.0, 1.0);
        Self {
            rmse_m,
            rpe_mps,
            loss_rate,
            status: RunStatus::from_loss_rate(loss_rate),
            n_matched: 0,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == RunStatus::Success
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Rmse => self.rmse_m,
            Metric::Rpe => self.rpe_mps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse,
    Rpe,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rmse" | "ate" => Ok(Self::Rmse),
            "rpe" => Ok(Self::Rpe),
            other => Err(format!("unknown metric '{other}'")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Rmse => "rmse",
            Metric::Rpe => "rpe",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub max_diff: f64,
    pub align: Alignment,
    pub rpe_delta: f64,
    pub max_gap: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_diff: DEFAULT_MAX_DIFF,
            align: Alignment::Se3,
            rpe_delta: DEFAULT_RPE_DELTA,
            max_gap: DEFAULT_MAX_GAP,
        }
    }
}

/// Fraction of the ground-truth time span not covered by matched poses.
///
/// Consecutive matched ground-truth samples cover the time between them when
/// they are neighbours in the ground-truth stream or at most `max_gap` apart.
pub fn loss_rate(pairs: &AssociatedPairs, gt: &Trajectory, max_gap: f64) -> f64 {
    if pairs.is_empty() {
        return 1.0;
    }
    let total = gt.span();
    if total <= 0.0 {
        return 0.0;
    }
    let mut matched: Vec<(usize, f64)> = pairs.pairs.iter().map(|p| (p.gt_index, p.gt.t)).collect();
    matched.sort_by_key(|m| m.0);
    let covered: f64 = matched
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1 || w[1].1 - w[0].1 <= max_gap)
        .map(|w| w[1].1 - w[0].1)
        .sum();
    (1.0 - covered / total).clamp(0.0, 1.0)
}

/// Evaluates one run. Metric failures leave the corresponding field empty.
pub fn run_result(est: Option<&Trajectory>, gt: &Trajectory, config: &EvalConfig) -> RunResult {
    let Some(est) = est else {
        return RunResult::from_parts(None, None, 1.0);
    };
    let pairs = associate(est, gt, config.max_diff);
    let loss = loss_rate(&pairs, gt, config.max_gap);
    let rmse = ate_rmse(&pairs, config.align)
        .map_err(|e| log::debug!("rmse unavailable: {e}"))
        .ok();
    let rpe = rpe_rmse(&pairs, config.rpe_delta)
        .map_err(|e| log::debug!("rpe unavailable: {e}"))
        .ok();
    RunResult {
        n_matched: pairs.len(),
        ..RunResult::from_parts(rmse, rpe, loss)
    }
}

/// Mean of `metric` over successful runs that report it.
pub fn average_over_successes(results: &[RunResult], metric: Metric) -> Result<f64, MetricError> {
    let values: Vec<f64> = results
        .iter()
        .filter(|r| r.is_success())
        .filter_map(|r| r.metric(metric))
        .collect();
    if values.is_empty() {
        return Err(MetricError::AllFailed);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
