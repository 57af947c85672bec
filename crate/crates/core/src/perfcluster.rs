//! Run outcomes as 2-D observations (loss rate, saturated error), k-means++
//! clustering and the mapping from clusters to performance categories.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{self, Property, SequenceRecord};
use crate::dtree::{DataSet, Predictor, Row, Schema, TreeError};

/// Errors above this value are clipped before normalization (m or m/s).
pub const DEFAULT_ERROR_CAP: f64 = 2.0;

pub const MAX_LLOYD_ITERATIONS: usize = 100;

pub const OBSERVATION_COLUMNS: [&str; 5] = ["sequence", "algorithm", "run_id", "loss_rate", "raw_err"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("error value must be non-negative, got {0}")]
    NegativeError(f64),
    #[error("loss rate {0} outside [0, 1]")]
    InvalidLossRate(f64),
    #[error("duplicate run ({sequence}, {algorithm}, {run_id})")]
    DuplicateRunKey {
        sequence: String,
        algorithm: String,
        run_id: u32,
    },
    #[error("k = {k} exceeds the {distinct} distinct points")]
    KTooLarge { k: usize, distinct: usize },
    #[error("k must be 3 or 4 for category labelling, got {0}")]
    UnsupportedK(usize),
    #[error("k must be positive")]
    ZeroK,
    #[error("two centroids coincide")]
    AmbiguousCentroids,
    #[error("sequence '{0}' is not in the catalog")]
    UnknownSequence(String),
    #[error("observation CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Clips `raw_err` at `cap` and maps to `[0, 1]`. A missing error counts as
/// fully saturated.
pub fn preprocess(raw_err: Option<f64>, cap: f64) -> Result<f64, ClusterError> {
    match raw_err {
        None => Ok(1.0),
        Some(e) if e.is_nan() || e < 0.0 => Err(ClusterError::NegativeError(e)),
        Some(e) => Ok(e.min(cap) / cap),
    }
}

/// One row of the observation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub sequence: String,
    pub algorithm: String,
    pub run_id: u32,
    pub loss_rate: f64,
    /// Raw RMSE (m) or RPE (m/s); empty for a run with no usable estimate.
    pub raw_err: Option<f64>,
}

pub fn parse_runs(csv_text: &str) -> Result<Vec<RunRow>, ClusterError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(|e: csv::Error| ClusterError::Csv(e.to_string())))
        .collect()
}

pub fn write_runs(rows: &[RunRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// A run as a point in the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunObservation {
    pub sequence: String,
    pub algorithm: String,
    pub run_id: u32,
    pub loss_rate: f64,
    pub err_norm: f64,
}

impl RunObservation {
    pub fn point(&self) -> [f64; 2] {
        [self.loss_rate, self.err_norm]
    }
}

/// One observation per run, keyed uniquely by (sequence, algorithm, run).
pub fn build_observations(rows: &[RunRow], cap: f64) -> Result<Vec<RunObservation>, ClusterError> {
    let mut seen = HashSet::new();
    rows.iter()
        .map(|r| {
            if !seen.insert((r.sequence.clone(), r.algorithm.clone(), r.run_id)) {
                return Err(ClusterError::DuplicateRunKey {
                    sequence: r.sequence.clone(),
                    algorithm: r.algorithm.clone(),
                    run_id: r.run_id,
                });
            }
            if !(0.0..=1.0).contains(&r.loss_rate) {
                return Err(ClusterError::InvalidLossRate(r.loss_rate));
            }
            Ok(RunObservation {
                sequence: r.sequence.clone(),
                algorithm: r.algorithm.clone(),
                run_id: r.run_id,
                loss_rate: r.loss_rate,
                err_norm: preprocess(r.raw_err, cap)?,
            })
        })
        .collect()
}

pub type Point = [f64; 2];

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Nearest centroid per point (lowest index on ties) and the resulting SSE.
pub fn assign(points: &[Point], centroids: &[Point]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, q)| (c, dist2(p, q)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            sse += d;
            best
        })
        .collect();
    (labels, sse)
}

/// Within-cluster sum of squared distances to each cluster's mean.
pub fn partition_sse(points: &[Point], labels: &[usize], k: usize) -> f64 {
    let centroids = means(points, labels, k);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| centroids[l].map_or(0.0, |c| dist2(p, &c)))
        .sum()
}

fn means(points: &[Point], labels: &[usize], k: usize) -> Vec<Option<Point>> {
    let mut sums = vec![[0.0; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sums[l][0] += p[0];
        sums[l][1] += p[1];
        counts[l] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| [s[0] / n as f64, s[1] / n as f64]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Point>,
    pub assignment: Vec<usize>,
    pub sse: f64,
    /// SSE after every assignment step, starting with the seeded centroids.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

fn seed_centroids(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let c = points[pick.expect("a point away from every centroid exists")];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iteration until the assignment stops
/// changing or [`MAX_LLOYD_ITERATIONS`] is reached.
pub fn kmeanspp(points: &[Point], k: usize, seed: u64) -> Result<Clustering, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    let distinct: HashSet<[u64; 2]> = points.iter().map(|p| [p[0].to_bits(), p[1].to_bits()]).collect();
    if k > distinct.len() {
        return Err(ClusterError::KTooLarge {
            k,
            distinct: distinct.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let (mut labels, mut sse) = assign(points, &centroids);
    let mut history = vec![sse];
    let mut iterations = 0;

    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let updated = means(points, &labels, k);
        for (c, m) in centroids.iter_mut().zip(&updated) {
            if let Some(m) = m {
                *c = *m;
            }
        }
        // An empty cluster takes over the point farthest from its nearest centroid.
        for empty in updated.iter().enumerate().filter(|(_, m)| m.is_none()).map(|(i, _)| i) {
            let (_, far) = points
                .iter()
                .enumerate()
                .map(|(i, p)| (centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min), i))
                .fold((-1.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
            centroids[empty] = points[far];
        }
        let (next, next_sse) = assign(points, &centroids);
        debug_assert!(next_sse <= sse + 1e-12, "Lloyd step increased SSE");
        history.push(next_sse);
        sse = next_sse;
        if next == labels {
            break;
        }
        labels = next;
    }

    Ok(Clustering {
        k,
        centroids,
        assignment: labels,
        sse,
        sse_history: history,
        iterations,
    })
}

/// Performance categories, best first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    High,
    Medium,
    Low,
    Fail,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::High, Category::Medium, Category::Low, Category::Fail];

    pub fn name(self) -> &'static str {
        match self {
            Category::High => "High",
            Category::Medium => "Medium",
            Category::Low => "Low",
            Category::Fail => "Fail",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown category '{s}'"))
    }
}

/// Maps each centroid (`[loss, err]`) to a category.
///
/// k = 4: the highest-loss centroid is `Fail`, the next `Low`; of the remaining
/// two the lower error is `High`, the other `Medium`. k = 3: the highest-loss
/// centroid is `Low` and the remaining two split into `High`/`Medium` by error.
pub fn label_clusters(centroids: &[Point], k: usize) -> Result<Vec<Category>, ClusterError> {
    if k != 3 && k != 4 {
        return Err(ClusterError::UnsupportedK(k));
    }
    if centroids.len() != k {
        return Err(ClusterError::UnsupportedK(centroids.len()));
    }
    for i in 0..k {
        for j in i + 1..k {
            if dist2(&centroids[i], &centroids[j]) <= 1e-24 {
                return Err(ClusterError::AmbiguousCentroids);
            }
        }
    }
    // Descending loss, then descending error, then index.
    let mut by_loss: Vec<usize> = (0..k).collect();
    by_loss.sort_by(|&a, &b| {
        centroids[b][0]
            .total_cmp(&centroids[a][0])
            .then(centroids[b][1].total_cmp(&centroids[a][1]))
            .then(a.cmp(&b))
    });
    let mut out = vec![Category::High; k];
    let lossy = if k == 4 {
        out[by_loss[0]] = Category::Fail;
        out[by_loss[1]] = Category::Low;
        2
    } else {
        out[by_loss[0]] = Category::Low;
        1
    };
    let mut rest = by_loss[lossy..].to_vec();
    rest.sort_by(|&a, &b| {
        centroids[a][1]
            .total_cmp(&centroids[b][1])
            .then(centroids[a][0].total_cmp(&centroids[b][0]))
            .then(a.cmp(&b))
    });
    out[rest[0]] = Category::High;
    out[rest[1]] = Category::Medium;
    Ok(out)
}

/// An observation with its cluster and category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredRun {
    pub sequence: String,
    pub algorithm: String,
    pub run_id: u32,
    pub loss_rate: f64,
    pub raw_err: Option<f64>,
    pub cluster: usize,
    pub category: Category,
}

pub fn write_clustered(rows: &[ClusteredRun]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn parse_clustered(csv_text: &str) -> Result<Vec<ClusteredRun>, ClusterError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(|e: csv::Error| ClusterError::Csv(e.to_string())))
        .collect()
}

/// Full pipeline: observations, clustering and category labels, one output
/// row per input row.
pub fn cluster_runs(
    rows: &[RunRow],
    k: usize,
    seed: u64,
    cap: f64,
) -> Result<(Clustering, Vec<Category>, Vec<ClusteredRun>), ClusterError> {
    let obs = build_observations(rows, cap)?;
    let points: Vec<Point> = obs.iter().map(RunObservation::point).collect();
    let clustering = kmeanspp(&points, k, seed)?;
    let categories = label_clusters(&clustering.centroids, k)?;
    let out = rows
        .iter()
        .zip(&clustering.assignment)
        .map(|(r, &c)| ClusteredRun {
            sequence: r.sequence.clone(),
            algorithm: r.algorithm.clone(),
            run_id: r.run_id,
            loss_rate: r.loss_rate,
            raw_err: r.raw_err,
            cluster: c,
            category: categories[c],
        })
        .collect();
    Ok((clustering, categories, out))
}

/// Joins clustered runs with catalog properties to form a category data set.
/// Label enumeration lists only the categories reachable for `k`.
pub fn category_dataset(
    records: &[SequenceRecord],
    runs: &[ClusteredRun],
    properties: &[Property],
    k: usize,
) -> Result<DataSet, ClusterError> {
    let labels: Vec<&str> = match k {
        3 => vec!["High", "Medium", "Low"],
        _ => Category::ALL.iter().map(|c| c.name()).collect(),
    };
    let schema = Schema::new(
        properties
            .iter()
            .map(|p| Predictor::new(p.column(), p.values()))
            .collect(),
        labels,
    );
    let mut data = DataSet::new(schema);
    for run in runs {
        let rec = catalog::resolve(records, &run.sequence)
            .ok_or_else(|| ClusterError::UnknownSequence(run.sequence.clone()))?;
        let row: Row = properties
            .iter()
            .map(|p| (p.column().to_string(), p.value_of(rec).to_string()))
            .collect();
        data.push(&row, run.category.name())?;
    }
    Ok(data)
}
