//! Conditional-probability oracles `x -> P[Y = 1 | X = x]`.
//!
//! Experiments need the true conditional to simulate the performative label
//! shift on held-out data. Synthetic generators know it exactly; for ingested
//! data it is estimated with a small bagged random forest (Gini splits,
//! axis-aligned thresholds, leaf positive fractions averaged over trees).

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::risk::sigmoid;
use crate::seeded::{salt, stream};
use crate::Label;

#[derive(Clone, Debug, PartialEq)]
pub enum OracleError {
    DimensionMismatch { expected: usize, got: usize },
    EmptyDataset,
    SingleClassDataset,
    BadConfig(String),
    FormatError(String),
    Io(String),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::DimensionMismatch { expected, got } => {
                write!(f, "input has {got} features, oracle expects {expected}")
            }
            OracleError::EmptyDataset => write!(f, "empty dataset"),
            OracleError::SingleClassDataset => write!(f, "dataset contains a single class"),
            OracleError::BadConfig(msg) => write!(f, "bad forest config: {msg}"),
            OracleError::FormatError(msg) => write!(f, "bad forest file: {msg}"),
            OracleError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for OracleError {}

/// A conditional-probability oracle with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbOracle {
    /// The exact synthetic conditional `sigmoid(0.5 x2 - 0.2 x1^2)` on 2-d
    /// inputs.
    Synthetic,
    /// A fixed probability, any input dimension.
    Constant(f64),
    /// A fitted random forest.
    Forest(Forest),
}

impl ProbOracle {
    /// Evaluates the oracle; always in `[0, 1]`.
    pub fn prob(&self, x: &[f64]) -> Result<f64, OracleError> {
        match self {
            ProbOracle::Synthetic => {
                if x.len() != 2 {
                    return Err(OracleError::DimensionMismatch {
                        expected: 2,
                        got: x.len(),
                    });
                }
                Ok(sigmoid(0.5 * x[1] - 0.2 * x[0] * x[0]))
            }
            ProbOracle::Constant(p) => Ok(*p),
            ProbOracle::Forest(forest) => {
                if x.len() != forest.inputs {
                    return Err(OracleError::DimensionMismatch {
                        expected: forest.inputs,
                        got: x.len(),
                    });
                }
                Ok(forest.prob(x))
            }
        }
    }

    pub fn probs(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, OracleError> {
        xs.iter().map(|x| self.prob(x)).collect()
    }
}

/// The exact synthetic-data oracle.
pub fn synthetic_oracle() -> ProbOracle {
    ProbOracle::Synthetic
}

/// Forest hyperparameters. The defaults (18 trees, depth 8, bootstrap,
/// `ceil(sqrt(d))` candidate features per node, leaves down to one sample)
/// match the experiment protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 18,
            max_depth: 8,
            bootstrap: true,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf {
        p: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn prob(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { p } => return *p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// A bagged forest of axis-aligned Gini trees predicting the positive-class
/// probability as the mean leaf fraction over trees.
#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    inputs: usize,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn prob(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.prob(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [Label],
    max_depth: usize,
    min_samples_leaf: usize,
    features_per_split: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    /// Candidate features for a node: `features_per_split` distinct indices
    /// drawn from the tree's stream, scanned in ascending order so that ties
    /// in Gini gain resolve to the lowest feature, then lowest threshold.
    fn feature_subset(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let d = self.xs[0].len();
        let k = self.features_per_split.min(d);
        let mut pool: Vec<usize> = (0..d).collect();
        for i in 0..k {
            let j = rng.gen_range(i..d);
            pool.swap(i, j);
        }
        let mut chosen = pool[..k].to_vec();
        chosen.sort_unstable();
        chosen
    }

    /// Best candidate split by Gini gain. Any positive-or-zero gain is
    /// accepted, so a node with distinct feature values always splits; ties
    /// resolve to the first candidate in (feature, threshold) scan order.
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64, f64)> {
        let total = idx.len();
        let pos = idx.iter().filter(|&&i| self.ys[i] == Label::Pos).count();
        let parent = gini(pos, total);
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
        for &f in &self.feature_subset(rng) {
            let mut vals: Vec<(f64, bool)> = idx
                .iter()
                .map(|&i| (self.xs[i][f], self.ys[i] == Label::Pos))
                .collect();
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left_n = 0usize;
            let mut left_pos = 0usize;
            let mut k = 0;
            while k < vals.len() {
                // advance over a block of equal values
                let v = vals[k].0;
                while k < vals.len() && vals[k].0 == v {
                    left_n += 1;
                    if vals[k].1 {
                        left_pos += 1;
                    }
                    k += 1;
                }
                if k == vals.len() {
                    break;
                }
                if left_n < self.min_samples_leaf || total - left_n < self.min_samples_leaf {
                    continue;
                }
                let threshold = 0.5 * (v + vals[k].0);
                let right_n = total - left_n;
                let right_pos = pos - left_pos;
                let weighted = (left_n as f64 * gini(left_pos, left_n)
                    + right_n as f64 * gini(right_pos, right_n))
                    / total as f64;
                let gain = parent - weighted;
                if best.is_none_or(|b| gain > b.2) {
                    best = Some((f, threshold, gain));
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let total = idx.len();
        let pos = idx.iter().filter(|&&i| self.ys[i] == Label::Pos).count();
        let make_leaf = depth >= self.max_depth
            || total < 2 * self.min_samples_leaf.max(1)
            || pos == 0
            || pos == total;
        if !make_leaf {
            if let Some((feature, threshold, _)) = self.best_split(idx, rng) {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
                let slot = self.nodes.len();
                self.nodes.push(Node::Leaf { p: 0.0 }); // placeholder
                let left = self.build(&left_idx, depth + 1, rng);
                let right = self.build(&right_idx, depth + 1, rng);
                self.nodes[slot] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                return slot;
            }
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            p: pos as f64 / total as f64,
        });
        slot
    }
}

/// Fits a bagged forest. Per-tree randomness (bootstrap indices, feature
/// subsets) comes from a stream keyed by the tree index, so trees can be fit
/// in any order with identical results.
pub fn fit_forest(ds: &Dataset, cfg: &ForestConfig) -> Result<ProbOracle, OracleError> {
    if ds.is_empty() {
        return Err(OracleError::EmptyDataset);
    }
    let pos = ds.positives();
    if pos == 0 || pos == ds.len() {
        return Err(OracleError::SingleClassDataset);
    }
    if cfg.n_trees == 0 || cfg.max_depth == 0 {
        return Err(OracleError::BadConfig(
            "n_trees and max_depth must be >= 1".into(),
        ));
    }
    let d = ds.dim();
    let features_per_split = (d as f64).sqrt().ceil() as usize;
    let n = ds.len();
    let trees: Vec<Tree> = (0..cfg.n_trees)
        .map(|t| {
            let mut rng = stream(cfg.seed, salt::FOREST | ((t as u64) << 8));
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                xs: &ds.features,
                ys: &ds.labels,
                max_depth: cfg.max_depth,
                min_samples_leaf: cfg.min_samples_leaf.max(1),
                features_per_split,
                nodes: Vec::new(),
            };
            builder.build(&idx, 0, &mut rng);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();
    Ok(ProbOracle::Forest(Forest { inputs: d, trees }))
}

/// Serializes a forest in a nested text format:
///
/// ```text
/// performative-forest v1 inputs=<d> trees=<k>
/// tree
/// split <feature> <threshold>
/// leaf <p>
/// ...
/// ```
///
/// Nodes appear in pre-order (left subtree first).
pub fn forest_string(forest: &Forest) -> String {
    fn write_node(tree: &Tree, at: usize, out: &mut String) {
        match &tree.nodes[at] {
            Node::Leaf { p } => out.push_str(&format!("leaf {p}\n")),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push_str(&format!("split {feature} {threshold}\n"));
                write_node(tree, *left, out);
                write_node(tree, *right, out);
            }
        }
    }
    let mut out = format!(
        "performative-forest v1 inputs={} trees={}\n",
        forest.inputs,
        forest.trees.len()
    );
    for tree in &forest.trees {
        out.push_str("tree\n");
        write_node(tree, 0, &mut out);
    }
    out
}

pub fn save_forest(forest: &Forest, path: &Path) -> Result<(), OracleError> {
    std::fs::write(path, forest_string(forest)).map_err(|e| OracleError::Io(e.to_string()))
}

pub fn parse_forest(text: &str) -> Result<Forest, OracleError> {
    let mut lines = text.lines().peekable();
    let header = lines
        .next()
        .ok_or_else(|| OracleError::FormatError("empty file".into()))?;
    let mut inputs = None;
    let mut trees_decl = None;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("performative-forest") || parts.next() != Some("v1") {
        return Err(OracleError::FormatError("bad header".into()));
    }
    for tok in parts {
        if let Some(v) = tok.strip_prefix("inputs=") {
            inputs = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("trees=") {
            trees_decl = v.parse::<usize>().ok();
        }
    }
    let inputs = inputs.ok_or_else(|| OracleError::FormatError("missing inputs".into()))?;
    let trees_decl = trees_decl.ok_or_else(|| OracleError::FormatError("missing trees".into()))?;

    fn read_node<'a, I: Iterator<Item = &'a str>>(
        lines: &mut std::iter::Peekable<I>,
        nodes: &mut Vec<Node>,
    ) -> Result<usize, OracleError> {
        let line = lines
            .next()
            .ok_or_else(|| OracleError::FormatError("unexpected end of tree".into()))?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("leaf") => {
                let p: f64 = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| OracleError::FormatError("bad leaf".into()))?;
                let slot = nodes.len();
                nodes.push(Node::Leaf { p });
                Ok(slot)
            }
            Some("split") => {
                let feature: usize = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| OracleError::FormatError("bad split feature".into()))?;
                let threshold: f64 = tok
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| OracleError::FormatError("bad split threshold".into()))?;
                let slot = nodes.len();
                nodes.push(Node::Leaf { p: 0.0 });
                let left = read_node(lines, nodes)?;
                let right = read_node(lines, nodes)?;
                nodes[slot] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                Ok(slot)
            }
            other => Err(OracleError::FormatError(format!(
                "unexpected node tag {other:?}"
            ))),
        }
    }

    let mut trees = Vec::with_capacity(trees_decl);
    while let Some(&line) = lines.peek() {
        if line.trim().is_empty() {
            lines.next();
            continue;
        }
        if line.trim() != "tree" {
            return Err(OracleError::FormatError(format!(
                "expected 'tree', got '{line}'"
            )));
        }
        lines.next();
        let mut nodes = Vec::new();
        read_node(&mut lines, &mut nodes)?;
        trees.push(Tree { nodes });
    }
    if trees.len() != trees_decl {
        return Err(OracleError::FormatError(format!(
            "header declares {trees_decl} trees, found {}",
            trees.len()
        )));
    }
    Ok(Forest { inputs, trees })
}

pub fn load_forest(path: &Path) -> Result<Forest, OracleError> {
    let text = std::fs::read_to_string(path).map_err(|e| OracleError::Io(e.to_string()))?;
    parse_forest(&text)
}
