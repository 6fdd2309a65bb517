//! Random-forest binary classifier.
//!
//! Each tree is grown on a class-balanced bootstrap: `min(samp, P)`
//! positives and `min(samp, N)` negatives drawn with replacement. Splits
//! maximise the Gini impurity reduction over `mtry` randomly chosen
//! features; numeric features split on `x <= theta` with `theta` a midpoint
//! between consecutive distinct values, categorical features on `x == c`.
//! Tree `i` draws from ChaCha stream `i` of `seed`, so a forest does not
//! depend on how trees are scheduled across threads.
//!
//! The score of a row is the mean over trees of the positive fraction of the
//! leaf it reaches.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::windowing::{FeatureKind, FeatureSchema, WindowedDataset};
use crate::{Error, Result};

/// Version written into `model.json`.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Smallest impurity reduction accepted as a split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Per-class bootstrap of `samp` rows each (capped by class size).
    #[default]
    Stratified,
    /// Ordinary bootstrap of the full dataset size, ignoring classes.
    Plain,
}

fn default_min_leaf() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub ntree: usize,
    pub mtry: usize,
    pub samp: usize,
    pub seed: u64,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    #[serde(default)]
    pub sampling: Sampling,
}

impl ForestParams {
    pub fn new(ntree: usize, mtry: usize, samp: usize, seed: u64) -> Self {
        ForestParams {
            ntree,
            mtry,
            samp,
            seed,
            max_depth: None,
            min_leaf: default_min_leaf(),
            sampling: Sampling::Stratified,
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.ntree == 0 {
            return Err(Error::Config("ntree must be >= 1".into()));
        }
        if self.mtry == 0 || self.mtry > n_features {
            return Err(Error::Config(format!(
                "mtry must lie in [1, {n_features}], got {}",
                self.mtry
            )));
        }
        if self.samp == 0 {
            return Err(Error::Config("samp must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum Predicate {
    LessEq(f64),
    Equals(f64),
}

impl Predicate {
    /// Rows matching the predicate go to the left child.
    #[inline]
    pub fn matches(&self, x: f64) -> bool {
        match *self {
            Predicate::LessEq(theta) => x <= theta,
            Predicate::Equals(c) => x == c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        fraction: f64,
    },
    Split {
        feature: usize,
        predicate: Predicate,
        left: usize,
        right: usize,
    },
}

/// Nodes in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { fraction } => return *fraction,
                Node::Split {
                    feature,
                    predicate,
                    left,
                    right,
                } => {
                    at = if predicate.matches(row[*feature]) {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub params: ForestParams,
    pub schema: FeatureSchema,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Split {
    pub feature: usize,
    pub predicate: Predicate,
    pub reduction: f64,
}

/// Gini impurity times node size: `n - (pos^2 + neg^2) / n`.
#[inline]
pub(crate) fn impurity_mass(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (p, q, n) = (pos as f64, (n - pos) as f64, n as f64);
    n - (p * p + q * q) / n
}

/// Best split of the rows `idx` over `features` (ascending). Exact ties go
/// to the lowest feature id, then the lowest threshold.
pub(crate) fn best_split(
    columns: &[Vec<f64>],
    kinds: &[FeatureKind],
    labels: &[u8],
    idx: &[u32],
    features: &[usize],
    min_leaf: usize,
    buf: &mut Vec<(f64, u8)>,
) -> Option<Split> {
    let n = idx.len();
    let total_pos: usize = idx.iter().map(|&i| labels[i as usize] as usize).sum();
    let parent = impurity_mass(total_pos, n);
    let mut best: Option<Split> = None;
    let mut best_red = MIN_GAIN;

    for &f in features {
        let col = &columns[f];
        buf.clear();
        buf.extend(idx.iter().map(|&i| (col[i as usize], labels[i as usize])));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        match kinds[f] {
            FeatureKind::Numeric => {
                let (mut left_n, mut left_pos) = (0usize, 0usize);
                for i in 0..n - 1 {
                    left_n += 1;
                    left_pos += buf[i].1 as usize;
                    if n - left_n < min_leaf {
                        break;
                    }
                    if buf[i].0 == buf[i + 1].0 || left_n < min_leaf {
                        continue;
                    }
                    let red = parent
                        - impurity_mass(left_pos, left_n)
                        - impurity_mass(total_pos - left_pos, n - left_n);
                    if red > best_red {
                        let (lo, hi) = (buf[i].0, buf[i + 1].0);
                        let mut theta = lo + (hi - lo) / 2.0;
                        if theta >= hi {
                            theta = lo;
                        }
                        best_red = red;
                        best = Some(Split {
                            feature: f,
                            predicate: Predicate::LessEq(theta),
                            reduction: red,
                        });
                    }
                }
            }
            FeatureKind::Categorical => {
                let mut start = 0;
                while start < n {
                    let value = buf[start].0;
                    let mut end = start;
                    let mut cat_pos = 0usize;
                    while end < n && buf[end].0 == value {
                        cat_pos += buf[end].1 as usize;
                        end += 1;
                    }
                    let cat_n = end - start;
                    if cat_n >= min_leaf && n - cat_n >= min_leaf {
                        let red = parent
                            - impurity_mass(cat_pos, cat_n)
                            - impurity_mass(total_pos - cat_pos, n - cat_n);
                        if red > best_red {
                            best_red = red;
                            best = Some(Split {
                                feature: f,
                                predicate: Predicate::Equals(value),
                                reduction: red,
                            });
                        }
                    }
                    start = end;
                }
            }
        }
    }
    best
}

pub(crate) struct TreeBuilder<'a> {
    pub columns: &'a [Vec<f64>],
    pub kinds: &'a [FeatureKind],
    pub labels: &'a [u8],
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl TreeBuilder<'_> {
    pub fn grow(&self, mut sample: Vec<u32>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        let mut buf = Vec::with_capacity(sample.len());
        self.node(&mut sample, 0, rng, &mut nodes, &mut buf);
        Tree { nodes }
    }

    fn node(
        &self,
        idx: &mut [u32],
        depth: usize,
        rng: &mut ChaCha8Rng,
        nodes: &mut Vec<Node>,
        buf: &mut Vec<(f64, u8)>,
    ) -> usize {
        let id = nodes.len();
        let n = idx.len();
        let pos: usize = idx.iter().map(|&i| self.labels[i as usize] as usize).sum();
        let fraction = if n == 0 { 0.0 } else { pos as f64 / n as f64 };
        nodes.push(Node::Leaf { fraction });

        let terminal = pos == 0
            || pos == n
            || n < 2 * self.min_leaf
            || self.max_depth.is_some_and(|d| depth >= d);
        if terminal {
            return id;
        }

        let mut features = index::sample(rng, self.columns.len(), self.mtry).into_vec();
        features.sort_unstable();
        let Some(split) = best_split(
            self.columns,
            self.kinds,
            self.labels,
            idx,
            &features,
            self.min_leaf,
            buf,
        ) else {
            return id;
        };

        let col = &self.columns[split.feature];
        let mut boundary = 0;
        for i in 0..n {
            if split.predicate.matches(col[idx[i] as usize]) {
                idx.swap(i, boundary);
                boundary += 1;
            }
        }
        let (left_idx, right_idx) = idx.split_at_mut(boundary);
        let left = self.node(left_idx, depth + 1, rng, nodes, buf);
        let right = self.node(right_idx, depth + 1, rng, nodes, buf);
        nodes[id] = Node::Split {
            feature: split.feature,
            predicate: split.predicate,
            left,
            right,
        };
        id
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

fn bootstrap(
    rng: &mut ChaCha8Rng,
    params: &ForestParams,
    positives: &[u32],
    negatives: &[u32],
    n_rows: usize,
) -> Vec<u32> {
    match params.sampling {
        Sampling::Stratified => {
            let mut sample = Vec::with_capacity(2 * params.samp);
            for class in [positives, negatives] {
                let draws = params.samp.min(class.len());
                sample.extend((0..draws).map(|_| class[rng.random_range(0..class.len())]));
            }
            sample
        }
        Sampling::Plain => (0..n_rows)
            .map(|_| rng.random_range(0..n_rows) as u32)
            .collect(),
    }
}

/// Column-major copy of the feature matrix.
pub(crate) fn columns_of(dataset: &WindowedDataset) -> Vec<Vec<f64>> {
    (0..dataset.schema.len())
        .map(|f| dataset.rows.iter().map(|r| r.features[f]).collect())
        .collect()
}

pub fn train(dataset: &WindowedDataset, params: &ForestParams) -> Result<ForestModel> {
    grow_forest(dataset, params, false).map(|(model, _)| model)
}

/// Trains like [`train`] and also returns out-of-bag scores: for each row,
/// the mean leaf fraction over the trees whose bootstrap did not contain it.
/// Rows that were in every bootstrap fall back to their in-sample score.
pub fn train_with_oob(dataset: &WindowedDataset, params: &ForestParams) -> Result<(ForestModel, Vec<f64>)> {
    let (model, in_bag) = grow_forest(dataset, params, true)?;
    let n = dataset.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (tree, bag) in model.trees.iter().zip(&in_bag) {
        for (i, row) in dataset.rows.iter().enumerate() {
            if !bag[i] {
                sum[i] += tree.predict(&row.features);
                count[i] += 1;
            }
        }
    }
    let in_sample = model.vote_scores(&dataset.feature_rows())?;
    let scores = (0..n)
        .map(|i| if count[i] > 0 { sum[i] / count[i] as f64 } else { in_sample[i] })
        .collect();
    Ok((model, scores))
}

fn grow_forest(
    dataset: &WindowedDataset,
    params: &ForestParams,
    track_bags: bool,
) -> Result<(ForestModel, Vec<Vec<bool>>)> {
    let n_features = dataset.schema.len();
    params.validate(n_features)?;
    if let Some(row) = dataset.rows.iter().find(|r| r.features.len() != n_features) {
        return Err(Error::Schema(format!(
            "row for device {} has {} features, schema has {n_features}",
            row.device_id,
            row.features.len()
        )));
    }
    let labels = dataset.labels();
    let positives: Vec<u32> = (0..labels.len() as u32).filter(|&i| labels[i as usize] == 1).collect();
    let negatives: Vec<u32> = (0..labels.len() as u32).filter(|&i| labels[i as usize] == 0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass {
            positives: positives.len(),
            negatives: negatives.len(),
        });
    }

    let columns = columns_of(dataset);
    let kinds = dataset.schema.kinds();
    let builder = TreeBuilder {
        columns: &columns,
        kinds: &kinds,
        labels: &labels,
        mtry: params.mtry,
        min_leaf: params.min_leaf,
        max_depth: params.max_depth,
    };
    let (trees, bags): (Vec<Tree>, Vec<Vec<bool>>) = (0..params.ntree)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let sample = bootstrap(&mut rng, params, &positives, &negatives, labels.len());
            let mut bag = Vec::new();
            if track_bags {
                bag = vec![false; labels.len()];
                for &i in &sample {
                    bag[i as usize] = true;
                }
            }
            (builder.grow(sample, &mut rng), bag)
        })
        .unzip();

    Ok((
        ForestModel {
            format_version: MODEL_FORMAT_VERSION,
            params: *params,
            schema: dataset.schema.clone(),
            trees,
        },
        bags,
    ))
}

impl ForestModel {
    /// Mean leaf fraction over trees for each row.
    pub fn vote_scores<R: AsRef<[f64]> + Sync>(&self, rows: &[R]) -> Result<Vec<f64>> {
        let width = self.schema.len();
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != width) {
            return Err(Error::Schema(format!(
                "row {bad} has {} features, model expects {width}",
                rows[bad].as_ref().len()
            )));
        }
        let ntree = self.trees.len() as f64;
        Ok(rows
            .par_iter()
            .map(|r| {
                let row = r.as_ref();
                self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / ntree
            })
            .collect())
    }

    /// Scores every row of `dataset` after checking its schema matches.
    pub fn score_dataset(&self, dataset: &WindowedDataset) -> Result<Vec<f64>> {
        if dataset.schema != self.schema {
            return Err(Error::Schema(
                "dataset columns differ from the model's feature schema".into(),
            ));
        }
        self.vote_scores(&dataset.feature_rows())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(s)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        let width = model.schema.len();
        for tree in &model.trees {
            for node in &tree.nodes {
                if let Node::Split {
                    feature, left, right, ..
                } = node
                {
                    if *feature >= width || *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                        return Err(Error::Format("tree node out of range".into()));
                    }
                }
            }
        }
        Ok(model)
    }
}

/// Label 1 iff `score >= cutoff`.
pub fn classify(scores: &[f64], cutoff: f64) -> Result<Vec<u8>> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::Invalid(format!("cutoff must lie in (0, 1), got {cutoff}")));
    }
    Ok(scores.iter().map(|&s| (s >= cutoff) as u8).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::{DatasetRow, Feature};

    fn dataset(features: &[Vec<f64>], labels: &[u8], kinds: &[FeatureKind]) -> WindowedDataset {
        WindowedDataset {
            schema: FeatureSchema {
                features: kinds
                    .iter()
                    .enumerate()
                    .map(|(i, &kind)| Feature {
                        name: format!("f{i}"),
                        kind,
                    })
                    .collect(),
            },
            rows: features
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (f, &label))| DatasetRow {
                    device_id: i as u32,
                    window_start: 0,
                    features: f.clone(),
                    label,
                })
                .collect(),
        }
    }

    fn toy(n: usize, seed: u64) -> WindowedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.random();
            let c = rng.random_range(0..4) as f64;
            let noise: f64 = rng.random();
            labels.push(((x + 0.3 * (c == 2.0) as u8 as f64 + 0.3 * noise) > 0.8) as u8);
            feats.push(vec![x, c, noise]);
        }
        dataset(
            &feats,
            &labels,
            &[FeatureKind::Numeric, FeatureKind::Categorical, FeatureKind::Numeric],
        )
    }

    #[test]
    fn pure_sample_grows_single_leaf() {
        let columns = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let kinds = [FeatureKind::Numeric];
        let labels = [1u8, 1, 1, 1];
        let builder = TreeBuilder {
            columns: &columns,
            kinds: &kinds,
            labels: &labels,
            mtry: 1,
            min_leaf: 1,
            max_depth: None,
        };
        for t in 0..5 {
            let tree = builder.grow(vec![0, 1, 2, 3, 3, 1], &mut tree_rng(9, t));
            assert_eq!(tree.nodes, vec![Node::Leaf { fraction: 1.0 }]);
        }
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let ds = dataset(&[vec![1.0], vec![2.0]], &[1, 1], &[FeatureKind::Numeric]);
        assert!(matches!(
            train(&ds, &ForestParams::new(3, 1, 2, 0)),
            Err(Error::SingleClass { positives: 2, negatives: 0 })
        ));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let ds = toy(50, 1);
        for p in [
            ForestParams::new(0, 1, 5, 0),
            ForestParams::new(3, 0, 5, 0),
            ForestParams::new(3, 4, 5, 0),
            ForestParams::new(3, 1, 0, 0),
        ] {
            assert!(matches!(train(&ds, &p), Err(Error::Config(_))), "{p:?}");
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let ds = toy(120, 3);
        let p = ForestParams::new(15, 2, 40, 77);
        let a = train(&ds, &p).unwrap();
        let b = train(&ds, &p).unwrap();
        assert_eq!(a, b);
        let rows = ds.feature_rows();
        assert_eq!(a.vote_scores(&rows).unwrap(), b.vote_scores(&rows).unwrap());
    }

    #[test]
    fn two_tree_average() {
        let model = ForestModel {
            format_version: MODEL_FORMAT_VERSION,
            params: ForestParams::new(2, 1, 1, 0),
            schema: FeatureSchema {
                features: vec![Feature {
                    name: "x".into(),
                    kind: FeatureKind::Numeric,
                }],
            },
            trees: vec![
                Tree {
                    nodes: vec![Node::Leaf { fraction: 0.0 }],
                },
                Tree {
                    nodes: vec![Node::Leaf { fraction: 1.0 }],
                },
            ],
        };
        assert_eq!(model.vote_scores(&[vec![3.0], vec![-1.0]]).unwrap(), vec![0.5, 0.5]);
        let one = ForestModel {
            trees: vec![model.trees[1].clone()],
            ..model.clone()
        };
        assert_eq!(one.vote_scores(&[vec![3.0]]).unwrap(), vec![1.0]);
        assert!(matches!(
            model.vote_scores(&[vec![1.0, 2.0]]),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[0.2, 0.9], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(classify(&[0.05, 0.5, 1.0], 0.05).unwrap(), vec![1, 1, 1]);
        assert!(classify(&[0.5], 0.0).is_err());
        assert!(classify(&[0.5], 1.0).is_err());
    }

    #[test]
    fn model_json_round_trip_preserves_scores() {
        let ds = toy(150, 5);
        let model = train(&ds, &ForestParams::new(10, 2, 30, 1)).unwrap();
        let back = ForestModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let rows = ds.feature_rows();
        let a = model.vote_scores(&rows).unwrap();
        let b = back.vote_scores(&rows).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_unknown_model_version() {
        let ds = toy(60, 5);
        let mut model = train(&ds, &ForestParams::new(2, 1, 10, 1)).unwrap();
        model.format_version = 99;
        let json = serde_json::to_string(&model).unwrap();
        assert!(matches!(ForestModel::from_json(&json), Err(Error::Format(_))));
    }

    #[test]
    fn max_depth_is_respected() {
        let ds = toy(200, 8);
        let mut p = ForestParams::new(5, 3, 80, 2);
        p.max_depth = Some(2);
        let model = train(&ds, &p).unwrap();
        assert!(model.trees.iter().all(|t| t.depth() <= 2));
    }

    /// Exhaustive split enumeration, using textbook Gini proportions.
    fn exhaustive_best(
        columns: &[Vec<f64>],
        kinds: &[FeatureKind],
        labels: &[u8],
        idx: &[u32],
        features: &[usize],
        min_leaf: usize,
    ) -> f64 {
        let gini = |rows: &[u32]| {
            if rows.is_empty() {
                return 0.0;
            }
            let p = rows.iter().filter(|&&i| labels[i as usize] == 1).count() as f64 / rows.len() as f64;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let n = idx.len() as f64;
        let parent = gini(idx);
        let mut best = 0.0f64;
        for &f in features {
            let mut values: Vec<f64> = idx.iter().map(|&i| columns[f][i as usize]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for &v in &values {
                let (left, right): (Vec<u32>, Vec<u32>) = idx.iter().partition(|&&i| match kinds[f] {
                    FeatureKind::Numeric => columns[f][i as usize] <= v,
                    FeatureKind::Categorical => columns[f][i as usize] == v,
                });
                if left.len() < min_leaf || right.len() < min_leaf {
                    continue;
                }
                let red = n * parent - left.len() as f64 * gini(&left) - right.len() as f64 * gini(&right);
                best = best.max(red);
            }
        }
        best
    }

    #[test]
    fn split_search_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut buf = Vec::new();
        for case in 0..400 {
            let n = rng.random_range(2..=20);
            let n_feat = rng.random_range(1..=3);
            let kinds: Vec<FeatureKind> = (0..n_feat)
                .map(|_| {
                    if rng.random::<bool>() {
                        FeatureKind::Numeric
                    } else {
                        FeatureKind::Categorical
                    }
                })
                .collect();
            let columns: Vec<Vec<f64>> = kinds
                .iter()
                .map(|k| {
                    (0..n)
                        .map(|_| match k {
                            FeatureKind::Numeric => rng.random_range(0..8) as f64 * 0.5,
                            FeatureKind::Categorical => rng.random_range(0..3) as f64,
                        })
                        .collect()
                })
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let idx: Vec<u32> = (0..n as u32).collect();
            let mtry = rng.random_range(1..=n_feat);
            let mut features = index::sample(&mut rng, n_feat, mtry).into_vec();
            features.sort_unstable();
            let min_leaf = rng.random_range(1..=3);

            let oracle = exhaustive_best(&columns, &kinds, &labels, &idx, &features, min_leaf);
            match best_split(&columns, &kinds, &labels, &idx, &features, min_leaf, &mut buf) {
                Some(s) => {
                    assert!((s.reduction - oracle).abs() < 1e-9, "case {case}: {} vs {oracle}", s.reduction);
                    // the stored predicate reproduces the reported reduction
                    let (l, r): (Vec<u32>, Vec<u32>) =
                        idx.iter().partition(|&&i| s.predicate.matches(columns[s.feature][i as usize]));
                    assert!(l.len() >= min_leaf && r.len() >= min_leaf);
                }
                None => assert!(oracle <= 1e-9, "case {case}: missed split with gain {oracle}"),
            }
        }
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // two identical columns: the first must win
        let columns = vec![vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]];
        let kinds = [FeatureKind::Numeric, FeatureKind::Numeric];
        let labels = [0u8, 0, 1, 1];
        let s = best_split(&columns, &kinds, &labels, &[0, 1, 2, 3], &[0, 1], 1, &mut Vec::new()).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.predicate, Predicate::LessEq(0.5));
    }
}
