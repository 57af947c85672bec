//! Trajectory parsing for the TUM, KITTI and EuRoC ground-truth formats, plus
//! timestamp association between an estimate and its ground truth.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default association tolerance in seconds.
pub const DEFAULT_MAX_DIFF: f64 = 0.02;

/// Default frame rate used to synthesize KITTI timestamps when no times file is given.
pub const DEFAULT_KITTI_RATE_HZ: f64 = 10.0;

const ROTATION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed line {0}")]
    MalformedLine(usize),
    #[error("trajectory contains no poses")]
    EmptyTrajectory,
    #[error("timestamps not strictly increasing at line {0}")]
    NonMonotonicTimestamps(usize),
    #[error("line {0} does not hold a rotation matrix")]
    NonRotationMatrix(usize),
    #[error("{poses} poses but {times} timestamps")]
    LengthMismatch { poses: usize, times: usize },
    #[error("missing '#' header line")]
    MissingHeader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryFormat {
    Tum,
    Kitti,
    EurocGt,
}

impl std::str::FromStr for TrajectoryFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tum" => Ok(Self::Tum),
            "kitti" => Ok(Self::Kitti),
            "euroc" | "euroc_gt" | "euroc-gt" => Ok(Self::EurocGt),
            other => Err(format!("unknown trajectory format '{other}'")),
        }
    }
}

/// A 6-DoF pose with a timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub t: f64,
    pub position: Vector3<f64>,
    /// Unit quaternion, canonicalized so that `w >= 0`.
    pub orientation: UnitQuaternion<f64>,
}

impl StampedPose {
    pub fn new(t: f64, position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            t,
            position,
            orientation: canonical(orientation),
        }
    }

    /// Pose at `t` with identity orientation.
    pub fn at(t: f64, position: Vector3<f64>) -> Self {
        Self::new(t, position, UnitQuaternion::identity())
    }

    /// Orientation as `[x, y, z, w]`.
    pub fn quat_xyzw(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.i, q.j, q.k, q.w]
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Builds a unit quaternion from raw components, rejecting zero or non-finite input.
fn quat_from_xyzw(x: f64, y: f64, z: f64, w: f64) -> Option<UnitQuaternion<f64>> {
    let q = Quaternion::new(w, x, y, z);
    let n = q.norm();
    if !n.is_finite() || n < 1e-12 {
        return None;
    }
    Some(canonical(UnitQuaternion::new_normalize(q)))
}

/// Time-ordered poses from a single source file.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<StampedPose>,
    source_format: TrajectoryFormat,
}

impl Trajectory {
    /// Wraps poses after checking they are non-empty and strictly increasing in time.
    pub fn new(poses: Vec<StampedPose>, source_format: TrajectoryFormat) -> Result<Self, ParseError> {
        if poses.is_empty() {
            return Err(ParseError::EmptyTrajectory);
        }
        for (i, w) in poses.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(ParseError::NonMonotonicTimestamps(i + 2));
            }
        }
        Ok(Self {
            poses,
            source_format,
        })
    }

    pub fn poses(&self) -> &[StampedPose] {
        &self.poses
    }

    pub fn source_format(&self) -> TrajectoryFormat {
        self.source_format
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Time between the first and last pose.
    pub fn span(&self) -> f64 {
        self.poses.last().unwrap().t - self.poses[0].t
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_fields(line: &str, line_no: usize, sep: Option<char>) -> Result<Vec<f64>, ParseError> {
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(ParseError::MalformedLine(line_no))
    };
    match sep {
        Some(c) => line.split(c).map(parse).collect(),
        None => line.split_whitespace().map(parse).collect(),
    }
}

fn check_monotonic(prev: Option<f64>, t: f64, line_no: usize) -> Result<(), ParseError> {
    match prev {
        Some(p) if !(t > p) => Err(ParseError::NonMonotonicTimestamps(line_no)),
        _ => Ok(()),
    }
}

/// Parses a TUM trajectory: `t tx ty tz qx qy qz qw` per line, `#` comments.
pub fn parse_tum(text: &str) -> Result<Trajectory, ParseError> {
    let mut poses: Vec<StampedPose> = Vec::new();
    for (line_no, line) in data_lines(text) {
        let f = parse_fields(line, line_no, None)?;
        if f.len() != 8 {
            return Err(ParseError::MalformedLine(line_no));
        }
        check_monotonic(poses.last().map(|p| p.t), f[0], line_no)?;
        let q = quat_from_xyzw(f[4], f[5], f[6], f[7]).ok_or(ParseError::MalformedLine(line_no))?;
        poses.push(StampedPose::new(f[0], Vector3::new(f[1], f[2], f[3]), q));
    }
    if poses.is_empty() {
        return Err(ParseError::EmptyTrajectory);
    }
    Ok(Trajectory {
        poses,
        source_format: TrajectoryFormat::Tum,
    })
}

/// Serializes a trajectory in TUM format with round-trip exact numbers.
pub fn write_tum(traj: &Trajectory) -> String {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for p in traj.poses() {
        let [qx, qy, qz, qw] = p.quat_xyzw();
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            p.t, p.position.x, p.position.y, p.position.z, qx, qy, qz, qw
        );
    }
    out
}

/// Nearest rotation in the Frobenius sense, with the reflection removed.
pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    u * s * v_t
}

/// Parses a KITTI pose file (12 row-major values of `[R | t]` per line).
///
/// Timestamps come from `times` when given, otherwise `i / default_rate_hz`.
pub fn parse_kitti(
    pose_text: &str,
    times: Option<&str>,
    default_rate_hz: f64,
) -> Result<Trajectory, ParseError> {
    let mut rows = Vec::new();
    for (line_no, line) in data_lines(pose_text) {
        let f = parse_fields(line, line_no, None)?;
        if f.len() != 12 {
            return Err(ParseError::MalformedLine(line_no));
        }
        let m = Matrix3::new(f[0], f[1], f[2], f[4], f[5], f[6], f[8], f[9], f[10]);
        let r = nearest_rotation(&m);
        if (m - r).norm() > ROTATION_TOLERANCE {
            return Err(ParseError::NonRotationMatrix(line_no));
        }
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
        rows.push((line_no, Vector3::new(f[3], f[7], f[11]), q));
    }
    if rows.is_empty() {
        return Err(ParseError::EmptyTrajectory);
    }

    let stamps: Vec<(usize, f64)> = match times {
        Some(text) => {
            let mut ts = Vec::new();
            for (line_no, line) in data_lines(text) {
                let f = parse_fields(line, line_no, None)?;
                if f.len() != 1 {
                    return Err(ParseError::MalformedLine(line_no));
                }
                ts.push((line_no, f[0]));
            }
            if ts.len() != rows.len() {
                return Err(ParseError::LengthMismatch {
                    poses: rows.len(),
                    times: ts.len(),
                });
            }
            ts
        }
        None => {
            if !(default_rate_hz > 0.0) {
                return Err(ParseError::MalformedLine(0));
            }
            rows.iter()
                .enumerate()
                .map(|(i, (line_no, _, _))| (*line_no, i as f64 / default_rate_hz))
                .collect()
        }
    };

    let mut poses: Vec<StampedPose> = Vec::with_capacity(rows.len());
    for ((line_no, t), (_, pos, q)) in stamps.into_iter().zip(rows) {
        check_monotonic(poses.last().map(|p| p.t), t, line_no)?;
        poses.push(StampedPose::new(t, pos, q));
    }
    Ok(Trajectory {
        poses,
        source_format: TrajectoryFormat::Kitti,
    })
}

/// Parses an EuRoC ground-truth state CSV.
///
/// Layout: `#` header, then `t_ns, px, py, pz, qw, qx, qy, qz[, ...]`.
pub fn parse_euroc_gt(csv_text: &str) -> Result<Trajectory, ParseError> {
    let mut lines = csv_text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l.starts_with('#') => {}
        _ => return Err(ParseError::MissingHeader),
    }

    let mut poses: Vec<StampedPose> = Vec::new();
    for (line_no, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let t_ns: i64 = fields
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or(ParseError::MalformedLine(line_no))?;
        let rest = fields
            .take(7)
            .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or(ParseError::MalformedLine(line_no))?;
        if rest.len() != 7 {
            return Err(ParseError::MalformedLine(line_no));
        }
        let t = ns_to_seconds(t_ns);
        check_monotonic(poses.last().map(|p| p.t), t, line_no)?;
        let q = quat_from_xyzw(rest[4], rest[5], rest[6], rest[3])
            .ok_or(ParseError::MalformedLine(line_no))?;
        poses.push(StampedPose::new(t, Vector3::new(rest[0], rest[1], rest[2]), q));
    }
    if poses.is_empty() {
        return Err(ParseError::EmptyTrajectory);
    }
    Ok(Trajectory {
        poses,
        source_format: TrajectoryFormat::EurocGt,
    })
}

// Splitting keeps the fractional part exact; f64 cannot hold all 19 digits anyway.
fn ns_to_seconds(t_ns: i64) -> f64 {
    let secs = t_ns.div_euclid(1_000_000_000);
    let frac = t_ns.rem_euclid(1_000_000_000);
    secs as f64 + frac as f64 * 1e-9
}

/// An estimate pose matched to a ground-truth pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePair {
    pub est: StampedPose,
    pub gt: StampedPose,
    /// Index of `gt` within its source trajectory.
    pub gt_index: usize,
}

impl PosePair {
    pub fn dt(&self) -> f64 {
        (self.est.t - self.gt.t).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociatedPairs {
    /// Ordered by estimate timestamp.
    pub pairs: Vec<PosePair>,
    pub max_diff: f64,
}

impl AssociatedPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One-to-one association by greedy ascending `|Δt|`.
///
/// Every candidate with `|Δt| <= max_diff` is sorted by `(|Δt|, est index, gt index)`
/// and accepted unless either side is already taken.
pub fn associate(est: &Trajectory, gt: &Trajectory, max_diff: f64) -> AssociatedPairs {
    let gt_poses = gt.poses();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in est.poses().iter().enumerate() {
        let lo = gt_poses.partition_point(|g| g.t < e.t - max_diff);
        for (j, g) in gt_poses.iter().enumerate().skip(lo) {
            if g.t > e.t + max_diff {
                break;
            }
            let dt = (e.t - g.t).abs();
            if dt <= max_diff {
                candidates.push((dt, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut est_used = vec![false; est.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut matched: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in candidates {
        if est_used[i] || gt_used[j] {
            continue;
        }
        est_used[i] = true;
        gt_used[j] = true;
        matched.push((i, j));
    }
    matched.sort_unstable();

    AssociatedPairs {
        pairs: matched
            .into_iter()
            .map(|(i, j)| PosePair {
                est: est.poses()[i],
                gt: gt_poses[j],
                gt_index: j,
            })
            .collect(),
        max_diff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_traj(ts: &[f64]) -> Trajectory {
        let poses = ts.iter().map(|&t| StampedPose::at(t, Vector3::zeros())).collect();
        Trajectory::new(poses, TrajectoryFormat::Tum).unwrap()
    }

    #[test]
    fn tum_comment_and_identity() {
        let t = parse_tum("# comment\n0.0 0 0 0 0 0 0 1").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.poses()[0].t, 0.0);
        assert_eq!(t.poses()[0].quat_xyzw(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn tum_two_poses() {
        let t = parse_tum("0.0 0 0 0 0 0 0 1\n1.0 1 0 0 0 0 0 1").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.span(), 1.0);
        assert_eq!(t.poses()[1].position, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn tum_errors() {
        assert_eq!(parse_tum("0.0 0 0 0 0 0 0"), Err(ParseError::MalformedLine(1)));
        assert_eq!(
            parse_tum("0.0 0 0 0 0 0 0 1\n0.0 a 0 0 0 0 0 1"),
            Err(ParseError::MalformedLine(2))
        );
        assert_eq!(parse_tum("# nothing\n\n"), Err(ParseError::EmptyTrajectory));
        assert_eq!(
            parse_tum("1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1"),
            Err(ParseError::NonMonotonicTimestamps(2))
        );
        assert_eq!(parse_tum("0 0 0 0 0 0 0 0"), Err(ParseError::MalformedLine(1)));
    }

    #[test]
    fn tum_normalizes_and_canonicalizes() {
        let t = parse_tum("0 0 0 0 0 0 0 -2").unwrap();
        assert_eq!(t.poses()[0].quat_xyzw(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn negative_timestamps_are_kept() {
        let t = parse_tum("-1.5 0 0 0 0 0 0 1\n-0.5 0 0 0 0 0 0 1").unwrap();
        assert_eq!(t.poses()[0].t, -1.5);
    }

    #[test]
    fn kitti_identity_and_rate() {
        let t = parse_kitti("1 0 0 0 0 1 0 0 0 0 1 0", None, 10.0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.poses()[0].t, 0.0);
        assert!(t.poses()[0].orientation.angle() < 1e-12);

        let two = "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1 0\n";
        let t = parse_kitti(two, None, 10.0).unwrap();
        assert_eq!(t.poses()[1].t, 0.1);
    }

    #[test]
    fn kitti_times_and_translation() {
        let poses = "1 0 0 1 0 1 0 2 0 0 1 3\n0 -1 0 4 1 0 0 5 0 0 1 6\n";
        let t = parse_kitti(poses, Some("0.0\n0.5\n"), 10.0).unwrap();
        assert_eq!(t.poses()[1].t, 0.5);
        assert_eq!(t.poses()[0].position, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.poses()[1].position, Vector3::new(4.0, 5.0, 6.0));
        let yaw = t.poses()[1].orientation.euler_angles().2;
        assert!((yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn kitti_errors() {
        assert_eq!(
            parse_kitti("1 0 0 0 0 1 0 0 0 0 1", None, 10.0),
            Err(ParseError::MalformedLine(1))
        );
        assert_eq!(
            parse_kitti("2 0 0 0 0 1 0 0 0 0 1 0", None, 10.0),
            Err(ParseError::NonRotationMatrix(1))
        );
        assert_eq!(
            parse_kitti("1 0 0 0 0 1 0 0 0 0 1 0", Some("0\n1\n"), 10.0),
            Err(ParseError::LengthMismatch { poses: 1, times: 2 })
        );
    }

    #[test]
    fn kitti_projects_slightly_noisy_rotation() {
        let t = parse_kitti("1.0002 0 0 0 0 0.9999 0 0 0 0 1 0", None, 10.0).unwrap();
        let q = t.poses()[0].orientation;
        assert!((q.norm() - 1.0).abs() < 1e-12);
        assert!(q.angle() < 1e-9);
    }

    #[test]
    fn euroc_row() {
        let text = "#timestamp,p_x,p_y,p_z,q_w,q_x,q_y,q_z\n1403636579763555584,0,0,0,1,0,0,0\n";
        let t = parse_euroc_gt(text).unwrap();
        let p = t.poses()[0];
        assert!((p.t - 1_403_636_579.763_555_6).abs() < 1e-6);
        assert_eq!(p.quat_xyzw(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn euroc_reorders_quaternion_and_ignores_extra_fields() {
        let text = "# header\n0,1,2,3,0.7071068,0.7071068,0,0,9,9,9\n";
        let t = parse_euroc_gt(text).unwrap();
        let [x, y, z, w] = t.poses()[0].quat_xyzw();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x - half).abs() < 1e-6 && (w - half).abs() < 1e-6);
        assert_eq!((y, z), (0.0, 0.0));
        assert_eq!(t.poses()[0].position, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn euroc_errors() {
        assert_eq!(parse_euroc_gt("0,0,0,0,1,0,0,0\n"), Err(ParseError::MissingHeader));
        assert_eq!(parse_euroc_gt("#h\n0,0,0,0,1,0,0\n"), Err(ParseError::MalformedLine(2)));
        assert_eq!(
            parse_euroc_gt("#h\n5,0,0,0,1,0,0,0\n5,0,0,0,1,0,0,0\n"),
            Err(ParseError::NonMonotonicTimestamps(3))
        );
    }

    #[test]
    fn ns_conversion_is_exact_in_fraction() {
        assert_eq!(ns_to_seconds(1_500_000_000), 1.5);
        assert_eq!(ns_to_seconds(-500_000_000), -0.5);
    }

    #[test]
    fn associate_rejects_outside_tolerance() {
        let pairs = associate(&line_traj(&[0.0, 1.0]), &line_traj(&[0.01, 1.03]), 0.02);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs.pairs[0].est.t, 0.0);
        assert_eq!(pairs.pairs[0].gt.t, 0.01);
    }

    #[test]
    fn associate_exact_and_disjoint() {
        let a = line_traj(&[0.0, 0.5, 1.0]);
        let pairs = associate(&a, &a, 0.02);
        assert_eq!(pairs.len(), 3);
        assert!(pairs.pairs.iter().all(|p| p.dt() == 0.0));

        let b = line_traj(&[10.0, 11.0]);
        assert!(associate(&a, &b, 0.02).is_empty());
    }

    #[test]
    fn associate_is_one_to_one() {
        // Two estimates compete for one ground-truth pose.
        let pairs = associate(&line_traj(&[0.0, 0.015]), &line_traj(&[0.01]), 0.02);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs.pairs[0].est.t, 0.015);
    }
}
