use super::stump::{best_stump, weighted_majority};
use crate::types::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Shallow classification tree grown greedily from weighted stumps.
/// Node 0 is the root; children always come after their parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] >= threshold { right } else { left },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks child indices point forward and stay in range.
    pub(crate) fn is_well_formed(&self) -> bool {
        !self.nodes.is_empty()
            && self.nodes.iter().enumerate().all(|(i, n)| match *n {
                Node::Leaf { .. } => true,
                Node::Split { left, right, .. } => {
                    left > i && right > i && left < self.nodes.len() && right < self.nodes.len()
                }
            })
    }
}

pub(crate) fn grow(data: &Dataset, weights: &[f64], max_depth: usize) -> Tree {
    let all: Vec<usize> = (0..data.len()).collect();
    let mut nodes = Vec::new();
    split(data, weights, &all, max_depth, &mut nodes);
    Tree { nodes }
}

fn split(data: &Dataset, weights: &[f64], subset: &[usize], depth_left: usize, nodes: &mut Vec<Node>) -> usize {
    let at = nodes.len();
    let (majority, leaf_loss) = weighted_majority(data, weights, subset);
    nodes.push(Node::Leaf { class: majority });
    if depth_left == 0 || leaf_loss <= 0.0 {
        return at;
    }
    let (stump, loss) = best_stump(data, weights, subset);
    if !stump.threshold.is_finite() || loss >= leaf_loss - 1e-15 {
        return at;
    }
    let (lhs, rhs): (Vec<usize>, Vec<usize>) = subset
        .iter()
        .partition(|&&i| data.feature(i, stump.feature) < stump.threshold);
    let left = split(data, weights, &lhs, depth_left - 1, nodes);
    let right = split(data, weights, &rhs, depth_left - 1, nodes);
    nodes[at] = Node::Split {
        feature: stump.feature,
        threshold: stump.threshold,
        left,
        right,
    };
    at
}
