//! CART-style classification trees over categorical predictors.
//!
//! Splits are binary equality tests (`predictor == value` goes left) scored by
//! Gini impurity decrease. Model selection follows a k-fold protocol: rows are
//! shuffled by seed and dealt round-robin into folds, one model is fit per
//! held-out fold, and the model with the best validation accuracy is kept and
//! re-scored on the whole pool.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Property, SequenceRecord};

// Gains closer than this are treated as ties.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("label set is empty")]
    EmptyLabelSet,
    #[error("data set is empty")]
    EmptyDataSet,
    #[error("{rows} rows cannot fill {folds} folds")]
    TooFewRows { rows: usize, folds: usize },
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("row is missing predictor '{0}'")]
    MissingPredictor(String),
    #[error("value '{value}' is not allowed for '{column}'")]
    UnknownValue { column: String, value: String },
    #[error("invalid fit parameters: {0}")]
    InvalidParams(String),
}

/// Gini impurity `1 − Σ p_c²` of a label multiset.
pub fn gini<T: Eq + Hash>(labels: &[T]) -> Result<f64, TreeError> {
    if labels.is_empty() {
        return Err(TreeError::EmptyLabelSet);
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    Ok(gini_counts(&c))
}

fn gini_counts(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictor {
    pub name: String,
    pub values: Vec<String>,
}

impl Predictor {
    pub fn new(name: impl Into<String>, values: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

/// Ordered predictors and the label enumeration. Order drives tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub predictors: Vec<Predictor>,
    pub labels: Vec<String>,
}

impl Schema {
    pub fn new(predictors: Vec<Predictor>, labels: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            predictors,
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }
}

/// Encoded observation: value indices per predictor (schema order) and a label index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<usize>,
    pub label: usize,
}

/// Predictor name → value.
pub type Row = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSet {
    schema: Schema,
    rows: Vec<Example>,
}

impl DataSet {
    pub fn new(schema: Schema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    /// Adds a row given by name; every predictor must be present.
    pub fn push(&mut self, row: &Row, label: &str) -> Result<(), TreeError> {
        let features = self
            .schema
            .predictors
            .iter()
            .map(|p| {
                let v = row
                    .get(&p.name)
                    .ok_or_else(|| TreeError::MissingPredictor(p.name.clone()))?;
                p.values
                    .iter()
                    .position(|x| x == v)
                    .ok_or_else(|| TreeError::UnknownValue {
                        column: p.name.clone(),
                        value: v.clone(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let label = self
            .schema
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| TreeError::UnknownValue {
                column: "label".into(),
                value: label.to_string(),
            })?;
        self.rows.push(Example { features, label });
        Ok(())
    }

    /// Adds an already encoded row after range-checking its indices.
    pub fn push_encoded(&mut self, example: Example) -> Result<(), TreeError> {
        if let Some(missing) = self.schema.predictors.get(example.features.len()) {
            return Err(TreeError::MissingPredictor(missing.name.clone()));
        }
        if example.features.len() > self.schema.predictors.len() {
            return Err(TreeError::UnknownValue {
                column: "features".into(),
                value: format!("{} values", example.features.len()),
            });
        }
        for (p, &v) in self.schema.predictors.iter().zip(&example.features) {
            if v >= p.values.len() {
                return Err(TreeError::UnknownValue {
                    column: p.name.clone(),
                    value: v.to_string(),
                });
            }
        }
        if example.label >= self.schema.labels.len() {
            return Err(TreeError::UnknownValue {
                column: "label".into(),
                value: example.label.to_string(),
            });
        }
        self.rows.push(example);
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Example] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Decodes row `i` back to names.
    pub fn row(&self, i: usize) -> Row {
        self.schema
            .predictors
            .iter()
            .zip(&self.rows[i].features)
            .map(|(p, &v)| (p.name.clone(), p.values[v].clone()))
            .collect()
    }

    fn subset(&self, idx: &[usize]) -> DataSet {
        DataSet {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Builds a difficulty data set from labeled catalog rows over `properties`.
/// Rows without a difficulty label are skipped.
pub fn catalog_dataset(records: &[SequenceRecord], properties: &[Property]) -> DataSet {
    catalog_dataset_labelled(records, properties, None)
}

/// Like [`catalog_dataset`], but labels rows with the value of `label` when
/// given. The label property is never used as a predictor.
pub fn catalog_dataset_labelled(
    records: &[SequenceRecord],
    properties: &[Property],
    label: Option<Property>,
) -> DataSet {
    use crate::catalog::{Categorical, Difficulty};
    let predictors: Vec<Property> = properties.iter().copied().filter(|p| Some(*p) != label).collect();
    let labels = match label {
        Some(p) => p.values(),
        None => Difficulty::ALL.iter().map(|d| d.name()).collect(),
    };
    let schema = Schema::new(
        predictors
            .iter()
            .map(|p| Predictor::new(p.column(), p.values()))
            .collect(),
        labels,
    );
    let mut data = DataSet::new(schema);
    for r in records {
        let target = match label {
            Some(p) => p.value_of(r),
            None => match r.difficulty {
                Some(d) => d.name(),
                None => continue,
            },
        };
        let row: Row = predictors
            .iter()
            .map(|p| (p.column().to_string(), p.value_of(r).to_string()))
            .collect();
        data.push(&row, target).expect("catalog values come from the schema");
    }
    data
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub predictor: usize,
    pub value: usize,
    /// Weighted Gini decrease.
    pub gain: f64,
}

fn label_counts(rows: &[Example], idx: &[usize], n_labels: usize) -> Vec<usize> {
    let mut c = vec![0; n_labels];
    for &i in idx {
        c[rows[i].label] += 1;
    }
    c
}

/// Every equality split in schema order, paired with its gain. Splits leaving a
/// side smaller than `min_leaf` are omitted.
fn candidate_splits(data: &DataSet, idx: &[usize], min_leaf: usize) -> Vec<Split> {
    let n_labels = data.schema.labels.len();
    let parent = gini_counts(&label_counts(&data.rows, idx, n_labels));
    let n = idx.len() as f64;
    let mut out = Vec::new();
    for (p, pred) in data.schema.predictors.iter().enumerate() {
        for v in 0..pred.values.len() {
            let mut yes = vec![0; n_labels];
            let mut no = vec![0; n_labels];
            for &i in idx {
                let row = &data.rows[i];
                if row.features[p] == v {
                    yes[row.label] += 1;
                } else {
                    no[row.label] += 1;
                }
            }
            let (ny, nn): (usize, usize) = (yes.iter().sum(), no.iter().sum());
            if ny < min_leaf || nn < min_leaf {
                continue;
            }
            let child = (ny as f64 * gini_counts(&yes) + nn as f64 * gini_counts(&no)) / n;
            out.push(Split {
                predictor: p,
                value: v,
                gain: parent - child,
            });
        }
    }
    out
}

fn best_of(candidates: &[Split]) -> Option<Split> {
    let mut best: Option<Split> = None;
    for s in candidates {
        if s.gain <= GAIN_EPS {
            continue;
        }
        match best {
            Some(b) if s.gain <= b.gain + GAIN_EPS => {}
            _ => best = Some(*s),
        }
    }
    best
}

/// The equality split with the largest Gini decrease over all rows of `data`,
/// or `None` when no split strictly decreases impurity.
pub fn best_split(data: &DataSet) -> Option<Split> {
    let idx: Vec<usize> = (0..data.len()).collect();
    best_of(&candidate_splits(data, &idx, 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub rng_seed: u64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_leaf: 1,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: usize,
        /// Training rows per label, in schema label order.
        counts: Vec<usize>,
    },
    Split {
        predictor: usize,
        value: usize,
        yes: Box<TreeNode>,
        no: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { yes, no, .. } => 1 + yes.node_count() + no.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { yes, no, .. } => 1 + yes.depth().max(no.depth()),
        }
    }
}

/// A fitted tree together with the schema it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub schema: Schema,
    pub root: TreeNode,
}

fn majority(counts: &[usize]) -> usize {
    // max_by_key returns the last maximum; iterate in reverse to keep the first.
    counts
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|(_, &c)| c)
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn grow(data: &DataSet, idx: &[usize], depth: usize, params: &FitParams) -> TreeNode {
    let counts = label_counts(&data.rows, idx, data.schema.labels.len());
    let leaf = |counts: Vec<usize>| TreeNode::Leaf {
        label: majority(&counts),
        counts,
    };
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= params.max_depth || idx.len() < 2 * params.min_leaf {
        return leaf(counts);
    }
    let candidates = candidate_splits(data, idx, params.min_leaf);
    // A zero-gain split can still separate rows (XOR-like labelings), so an
    // impure node falls back to the first split that partitions it.
    let Some(split) = best_of(&candidates).or_else(|| candidates.first().copied()) else {
        return leaf(counts);
    };
    let (yes, no): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| data.rows[i].features[split.predictor] == split.value);
    TreeNode::Split {
        predictor: split.predictor,
        value: split.value,
        yes: Box::new(grow(data, &yes, depth + 1, params)),
        no: Box::new(grow(data, &no, depth + 1, params)),
    }
}

/// Recursive partitioning until purity, `max_depth`, `min_leaf`, or no split
/// separates the rows.
pub fn fit(data: &DataSet, params: &FitParams) -> Result<DecisionTree, TreeError> {
    if params.max_depth < 1 || params.min_leaf < 1 {
        return Err(TreeError::InvalidParams(format!(
            "max_depth {} and min_leaf {} must both be >= 1",
            params.max_depth, params.min_leaf
        )));
    }
    if data.is_empty() {
        return Err(TreeError::EmptyDataSet);
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    Ok(DecisionTree {
        schema: data.schema.clone(),
        root: grow(data, &idx, 0, params),
    })
}

impl DecisionTree {
    /// Routes an encoded row to its leaf label index.
    pub fn predict_encoded(&self, features: &[usize]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Split {
                    predictor,
                    value,
                    yes,
                    no,
                } => node = if features[*predictor] == *value { yes } else { no },
            }
        }
    }

    /// Routes a named row to its leaf label. Only predictors tested on the path
    /// are required.
    pub fn predict(&self, row: &Row) -> Result<&str, TreeError> {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return Ok(&self.schema.labels[*label]),
                TreeNode::Split {
                    predictor,
                    value,
                    yes,
                    no,
                } => {
                    let p = &self.schema.predictors[*predictor];
                    let v = row
                        .get(&p.name)
                        .ok_or_else(|| TreeError::MissingPredictor(p.name.clone()))?;
                    node = if *v == p.values[*value] { yes } else { no };
                }
            }
        }
    }

    /// Fraction of rows whose label the tree reproduces. Rows must share this tree's schema layout.
    pub fn accuracy(&self, data: &DataSet) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .rows
            .iter()
            .filter(|r| self.predict_encoded(&r.features) == r.label)
            .count();
        hits as f64 / data.len() as f64
    }

    /// Graphviz rendering with nodes numbered in pre-order.
    pub fn export_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        let mut next = 0usize;
        self.write_dot(&self.root, &mut next, &mut out);
        out.push_str("}\n");
        out
    }

    fn write_dot(&self, node: &TreeNode, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        match node {
            TreeNode::Leaf { label, counts } => {
                let total: usize = counts.iter().sum();
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"{} ({total})\", style=rounded];",
                    escape(&self.schema.labels[*label])
                );
            }
            TreeNode::Split {
                predictor,
                value,
                yes,
                no,
            } => {
                let p = &self.schema.predictors[*predictor];
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"{} = {}\"];",
                    escape(&p.name),
                    escape(&p.values[*value])
                );
                let y = self.write_dot(yes, next, out);
                let _ = writeln!(out, "  n{id} -> n{y} [label=\"yes\"];");
                let n = self.write_dot(no, next, out);
                let _ = writeln!(out, "  n{id} -> n{n} [label=\"no\"];");
            }
        }
        id
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Result of k-fold model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub tree: DecisionTree,
    /// Accuracy of the selected model on the whole pool.
    pub accuracy: f64,
    pub best_fold: usize,
    pub fold_accuracies: Vec<f64>,
}

/// Deals shuffled row indices round-robin into `folds` disjoint subsets.
pub fn fold_assignment(n_rows: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, i) in order.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    out
}

/// Fits one model per held-out fold and keeps the one with the best validation
/// accuracy (lowest fold index on ties), re-scored on the full pool.
pub fn cross_validate_fit(
    data: &DataSet,
    folds: usize,
    params: &FitParams,
) -> Result<CrossValidation, TreeError> {
    if folds < 2 {
        return Err(TreeError::InvalidFolds(folds));
    }
    if data.len() < folds {
        return Err(TreeError::TooFewRows {
            rows: data.len(),
            folds,
        });
    }
    let assignment = fold_assignment(data.len(), folds, params.rng_seed);
    let mut best: Option<(usize, f64, DecisionTree)> = None;
    let mut fold_accuracies = Vec::with_capacity(folds);
    for (f, held_out) in assignment.iter().enumerate() {
        let train: Vec<usize> = assignment
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let tree = fit(&data.subset(&train), params)?;
        let acc = tree.accuracy(&data.subset(held_out));
        fold_accuracies.push(acc);
        if best.as_ref().is_none_or(|(_, b, _)| acc > *b) {
            best = Some((f, acc, tree));
        }
    }
    let (best_fold, _, tree) = best.expect("at least two folds");
    Ok(CrossValidation {
        accuracy: tree.accuracy(data),
        tree,
        best_fold,
        fold_accuracies,
    })
}
