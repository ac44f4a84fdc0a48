use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_query, check_training};
use crate::cube_io::FeatureMatrix;
use crate::error::{IapError, Result};
use crate::par;

/// Defaults: 200 trees, `ceil(sqrt(F))` features per split, leaves of one
/// sample, bootstrap on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// Candidate features per split; `ceil(sqrt(F))` when unset.
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    /// Set from the run's `forest` substream, not from the config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 200,
            max_features: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(u32),
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
    fn predict(&self, x: &[f64]) -> u32 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Bagged CART ensemble with Gini splits and majority voting.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    width: usize,
    classes: usize,
}

/// Most frequent class; lowest id on ties. `counts[c]` counts class `c + 1`.
fn majority(counts: &[usize]) -> u32 {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best as u32 + 1
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u32],
    classes: usize,
    mtry: usize,
    min_leaf: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.y[i] as usize - 1] += 1;
        }
        c
    }

    /// Best threshold on one feature: (weighted child impurity, threshold).
    fn best_threshold(&self, idx: &mut [usize], feature: usize) -> Option<(f64, f64)> {
        idx.sort_by(|&a, &b| {
            self.x
                .get(a, feature)
                .total_cmp(&self.x.get(b, feature))
                .then(a.cmp(&b))
        });
        let n = idx.len();
        let mut left = vec![0usize; self.classes];
        let mut right = self.counts(idx);
        let mut best: Option<(f64, f64)> = None;
        for s in 1..n {
            let c = self.y[idx[s - 1]] as usize - 1;
            left[c] += 1;
            right[c] -= 1;
            let (a, b) = (self.x.get(idx[s - 1], feature), self.x.get(idx[s], feature));
            if a == b || s < self.min_leaf || n - s < self.min_leaf {
                continue;
            }
            let score = s as f64 * gini(&left, s) + (n - s) as f64 * gini(&right, n - s);
            if best.is_none_or(|(bs, _)| score < bs) {
                let mut t = a + (b - a) / 2.0;
                if t >= b {
                    t = a;
                }
                best = Some((score, t));
            }
        }
        best
    }

    fn grow(&mut self, mut idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0));
        let counts = self.counts(&idx);
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < 2 * self.min_leaf {
            self.nodes[id] = Node::Leaf(label);
            return id;
        }
        let parent = idx.len() as f64 * gini(&counts, idx.len());
        let mut features: Vec<usize> = (0..self.x.cols()).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<(f64, usize, f64)> = None;
        // Keep drawing past `mtry` only while no valid split has been found.
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some((score, t)) = self.best_threshold(&mut idx, f) {
                if score < parent - 1e-12 && best.is_none_or(|(bs, _, _)| score < bs) {
                    best = Some((score, f, t));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            self.nodes[id] = Node::Leaf(label);
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl RandomForest {
    /// Trains on rows of `x` labelled `y` (class ids from 1). A training set
    /// with a single class yields a constant predictor.
    pub fn fit(x: &FeatureMatrix, y: &[u32], params: &ForestParams) -> Result<Self> {
        check_training(x, y)?;
        if params.trees == 0 {
            return Err(IapError::invalid("forest needs at least one tree"));
        }
        if params.min_leaf == 0 {
            return Err(IapError::invalid("min_leaf must be >= 1"));
        }
        if y.contains(&0) {
            return Err(IapError::invalid("class ids start at 1; found 0"));
        }
        let classes = *y.iter().max().expect("non-empty") as usize;
        let f = x.cols();
        let mtry = params
            .max_features
            .unwrap_or_else(|| (f as f64).sqrt().ceil() as usize)
            .clamp(1, f.max(1));
        let distinct = {
            let mut c: Vec<u32> = y.to_vec();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        if distinct < 2 {
            log::warn!("training set has a single class; the forest predicts it everywhere");
        }
        let trees = par::map_range(params.trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let idx: Vec<usize> = if params.bootstrap {
                (0..x.rows()).map(|_| rng.random_range(0..x.rows())).collect()
            } else {
                (0..x.rows()).collect()
            };
            let mut b = Builder {
                x,
                y,
                classes,
                mtry,
                min_leaf: params.min_leaf,
                rng,
                nodes: Vec::new(),
            };
            b.grow(idx);
            Tree { nodes: b.nodes }
        });
        Ok(Self {
            trees,
            width: f,
            classes,
        })
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Majority vote over trees, lowest class id on ties.
    pub fn predict(&self, query: &FeatureMatrix) -> Result<Vec<u32>> {
        if query.cols() != self.width {
            return Err(IapError::dims(format!(
                "forest trained on width {}, query has {}",
                self.width,
                query.cols()
            )));
        }
        let rows: Vec<usize> = (0..query.rows()).collect();
        Ok(par::map_collect(&rows, |&i| {
            let mut votes = vec![0usize; self.classes];
            for t in &self.trees {
                votes[t.predict(query.row(i)) as usize - 1] += 1;
            }
            majority(&votes)
        }))
    }
}

pub fn rf_classify(
    train: &FeatureMatrix,
    labels: &[u32],
    query: &FeatureMatrix,
    params: &ForestParams,
) -> Result<Vec<u32>> {
    check_query(train, query)?;
    RandomForest::fit(train, labels, params)?.predict(query)
}
