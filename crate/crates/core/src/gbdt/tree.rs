use serde::{Deserialize, Serialize};

use super::binning::{BinnedData, MISSING_BIN};
use super::split::{best_split, leaf_value, GradPair, Histogram, SplitCandidate, SplitConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: u32,
        /// Training bin: rows with bin `<= bin` went left.
        bin: u8,
        /// Raw-value form of `bin`: `x <= threshold` goes left.
        threshold: f64,
        default_left: bool,
        gain: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Leaf value reached by a row whose feature `f` is `value(f)`; NaN is missing.
    #[inline]
    pub fn predict_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                    ..
                } => {
                    let x = value(*feature as usize);
                    let go_left = if x.is_nan() {
                        *default_left
                    } else {
                        x <= *threshold
                    };
                    i = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, u8, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split {
                feature, bin, gain, ..
            } => Some((*feature as usize, *bin, *gain)),
            Node::Leaf { .. } => None,
        })
    }
}

struct OpenLeaf {
    node: usize,
    rows: Vec<u32>,
    hist: Histogram,
    total: GradPair,
    best: Option<SplitCandidate>,
}

pub(crate) struct GrownTree {
    pub tree: Tree,
    /// Rows of each final leaf with the leaf's value.
    pub leaves: Vec<(Vec<u32>, f64)>,
}

/// Best-first growth: repeatedly split the open leaf with the largest gain
/// until `max_leaves` leaves exist or no split has positive gain.
pub(crate) fn grow(
    data: &BinnedData,
    features: &[usize],
    grad: &[f64],
    hess: &[f64],
    max_leaves: usize,
    cfg: SplitConfig,
) -> GrownTree {
    let rows: Vec<u32> = (0..data.n_rows as u32).collect();
    let hist = Histogram::build(data, features, &rows, grad, hess);
    let total = rows.iter().fold(GradPair::default(), |mut acc, &r| {
        acc += GradPair {
            g: grad[r as usize],
            h: hess[r as usize],
        };
        acc
    });
    let best = best_split(data, features, &hist, total, cfg);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open = vec![OpenLeaf {
        node: 0,
        rows,
        hist,
        total,
        best,
    }];

    while open.len() < max_leaves.max(1) {
        let mut pick: Option<usize> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(c) = leaf.best {
                if pick.is_none_or(|p| c.gain > open[p].best.unwrap().gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(idx) = pick else { break };
        let leaf = open.remove(idx);
        let split = leaf.best.unwrap();

        let col = &data.bins[split.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| {
            let b = col[r as usize];
            if b == MISSING_BIN {
                split.default_left
            } else {
                b <= split.bin
            }
        });
        let left_is_small = left_rows.len() <= right_rows.len();
        let small_rows = if left_is_small {
            &left_rows
        } else {
            &right_rows
        };
        let small_hist = Histogram::build(data, features, small_rows, grad, hess);
        let large_hist = leaf.hist.subtract(&small_hist);
        let (left_hist, right_hist) = if left_is_small {
            (small_hist, large_hist)
        } else {
            (large_hist, small_hist)
        };
        drop(leaf.hist);

        let left_node = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let right_node = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature as u32,
            bin: split.bin,
            threshold: data.mappers[split.feature].threshold(split.bin),
            default_left: split.default_left,
            gain: split.gain,
            left: left_node as u32,
            right: right_node as u32,
        };

        let left_best = best_split(data, features, &left_hist, split.left, cfg);
        let right_best = best_split(data, features, &right_hist, split.right, cfg);
        open.push(OpenLeaf {
            node: left_node,
            rows: left_rows,
            hist: left_hist,
            total: split.left,
            best: left_best,
        });
        open.push(OpenLeaf {
            node: right_node,
            rows: right_rows,
            hist: right_hist,
            total: split.right,
            best: right_best,
        });
    }

    let mut leaves = Vec::with_capacity(open.len());
    for leaf in open {
        let value = leaf_value(leaf.total.g, leaf.total.h, cfg.lambda);
        nodes[leaf.node] = Node::Leaf { value };
        leaves.push((leaf.rows, value));
    }
    GrownTree {
        tree: Tree { nodes },
        leaves,
    }
}
