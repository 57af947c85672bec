//! Independent reference implementations used by the property and acceptance
//! tests. Nothing here calls into the code under test except for the plain
//! data types needed to build inputs.
#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector3, Vector4};
use rand::Rng;
use slomo_core::traj_io::{StampedPose, Trajectory, TrajectoryFormat};

pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let v = Vector4::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            let q = nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]);
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

pub fn random_vector<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

/// A wandering 3-D path sampled every `dt` seconds with random orientations.
pub fn random_trajectory<R: Rng>(rng: &mut R, n: usize, dt: f64) -> Trajectory {
    let mut p = Vector3::zeros();
    let poses = (0..n)
        .map(|i| {
            p += random_vector(rng, 1.0);
            StampedPose::new(i as f64 * dt, p, random_rotation(rng))
        })
        .collect();
    Trajectory::new(poses, TrajectoryFormat::Tum).unwrap()
}

/// The same timestamps with positions perturbed by uniform noise.
pub fn noisy_copy<R: Rng>(rng: &mut R, traj: &Trajectory, noise: f64) -> Trajectory {
    let poses = traj
        .poses()
        .iter()
        .map(|p| {
            let q = p.orientation * UnitQuaternion::from_scaled_axis(random_vector(rng, noise));
            StampedPose::new(p.t, p.position + random_vector(rng, noise), q)
        })
        .collect();
    Trajectory::new(poses, TrajectoryFormat::Tum).unwrap()
}

/// Applies `x ↦ s·R·x + t` to positions and `R` to orientations.
pub fn transform(traj: &Trajectory, s: f64, r: &UnitQuaternion<f64>, t: &Vector3<f64>) -> Trajectory {
    let poses = traj
        .poses()
        .iter()
        .map(|p| StampedPose::new(p.t, s * (r * p.position) + t, r * p.orientation))
        .collect();
    Trajectory::new(poses, TrajectoryFormat::Tum).unwrap()
}

/// All one-to-one matchings between index sets whose pairs are within
/// `max_diff`, as lists of (est, gt) pairs.
pub fn all_matchings(est: &[f64], gt: &[f64], max_diff: f64) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        i: usize,
        est: &[f64],
        gt: &[f64],
        max_diff: f64,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == est.len() {
            out.push(cur.clone());
            return;
        }
        rec(i + 1, est, gt, max_diff, used, cur, out);
        for j in 0..gt.len() {
            if !used[j] && (est[i] - gt[j]).abs() <= max_diff {
                used[j] = true;
                cur.push((i, j));
                rec(i + 1, est, gt, max_diff, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, est, gt, max_diff, &mut vec![false; gt.len()], &mut Vec::new(), &mut out);
    out
}

/// Exact fraction with a positive denominator.
#[derive(Debug, Clone, Copy)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

impl Frac {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den > 0);
        Self { num, den }
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn cmp(self, o: Frac) -> std::cmp::Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `Σ_k c_k² / n` for one side of a split; larger means purer.
fn purity(counts: &[i128]) -> Frac {
    let n: i128 = counts.iter().sum();
    Frac::new(counts.iter().map(|c| c * c).sum(), n.max(1))
}

/// Brute-force best equality split: `(predictor, value, gain)` maximizing the
/// Gini decrease, first in (predictor, value) order on exact ties, or `None`
/// when no split strictly reduces impurity. `rows` are (features, label).
pub fn best_split_oracle(
    rows: &[(Vec<usize>, usize)],
    values_per_predictor: &[usize],
    n_labels: usize,
) -> Option<(usize, usize, f64)> {
    let n = rows.len() as i128;
    let mut parent = vec![0i128; n_labels];
    for (_, l) in rows {
        parent[*l] += 1;
    }
    let base = purity(&parent);
    let mut best: Option<(usize, usize, Frac)> = None;
    for (p, &nv) in values_per_predictor.iter().enumerate() {
        for v in 0..nv {
            let mut yes = vec![0i128; n_labels];
            let mut no = vec![0i128; n_labels];
            for (f, l) in rows {
                if f[p] == v {
                    yes[*l] += 1;
                } else {
                    no[*l] += 1;
                }
            }
            if yes.iter().sum::<i128>() == 0 || no.iter().sum::<i128>() == 0 {
                continue;
            }
            let score = purity(&yes).add(purity(&no));
            if score.cmp(base) != std::cmp::Ordering::Greater {
                continue;
            }
            if best.is_none_or(|(_, _, b)| score.cmp(b) == std::cmp::Ordering::Greater) {
                best = Some((p, v, score));
            }
        }
    }
    // gain = (score − base) / n
    best.map(|(p, v, s)| {
        let diff = Frac::new(s.num * base.den - base.num * s.den, s.den * base.den);
        (p, v, diff.to_f64() / n as f64)
    })
}

/// Every dataset over `n_pred` binary predictors whose rows are distinct
/// feature vectors, labelled from `n_labels` labels. Distinct rows make each
/// dataset consistent by construction.
pub fn consistent_binary_datasets(n_pred: usize, n_labels: usize) -> Vec<Vec<(Vec<usize>, usize)>> {
    let vectors: Vec<Vec<usize>> = (0..1usize << n_pred)
        .map(|m| (0..n_pred).map(|b| (m >> b) & 1).collect())
        .collect();
    let mut out = Vec::new();
    for subset in 1..(1usize << vectors.len()) {
        let members: Vec<&Vec<usize>> = vectors
            .iter()
            .enumerate()
            .filter(|(i, _)| subset >> i & 1 == 1)
            .map(|(_, v)| v)
            .collect();
        let combos = n_labels.pow(members.len() as u32);
        for code in 0..combos {
            let mut c = code;
            let rows = members
                .iter()
                .map(|f| {
                    let l = c % n_labels;
                    c /= n_labels;
                    ((*f).clone(), l)
                })
                .collect();
            out.push(rows);
        }
    }
    out
}

/// Minimum within-cluster SSE over every assignment of points to `k` labels.
pub fn optimal_partition_sse(points: &[[f64; 2]], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        let sse: f64 = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| {
                let c = counts[l] as f64;
                (p[0] - sums[l][0] / c).powi(2) + (p[1] - sums[l][1] / c).powi(2)
            })
            .sum();
        best = best.min(sse);
        // Next assignment in base-k counting order.
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}
