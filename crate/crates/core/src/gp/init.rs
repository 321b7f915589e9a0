//! Random tree generation (full, grow, ramped half-and-half).

use rand::Rng;

use super::tree::{BinaryOp, GpTree, Node, UnaryOp};
use crate::{Error, Result};

pub const FUNCTIONS: [Node; 7] = [
    Node::Binary(BinaryOp::Add),
    Node::Binary(BinaryOp::Sub),
    Node::Binary(BinaryOp::Mul),
    Node::Binary(BinaryOp::Div),
    Node::Unary(UnaryOp::Ln),
    Node::Unary(UnaryOp::Sqrt),
    Node::Unary(UnaryOp::Feature),
];

/// Terminal and function sets bound to a table width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveSet {
    pub n_attrs: usize,
    /// Chance that a drawn terminal is an ephemeral constant.
    pub const_prob: f64,
    /// Ephemeral constants are drawn from `U[-const_range, const_range]`.
    pub const_range: f64,
}

impl PrimitiveSet {
    pub fn new(n_attrs: usize) -> Self {
        PrimitiveSet {
            n_attrs,
            const_prob: 0.1,
            const_range: 1.0,
        }
    }

    pub fn random_terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        if self.n_attrs == 0 || rng.random::<f64>() < self.const_prob {
            Node::Const(rng.random_range(-self.const_range..=self.const_range))
        } else {
            Node::Terminal(rng.random_range(0..self.n_attrs))
        }
    }

    pub fn random_function<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        FUNCTIONS[rng.random_range(0..FUNCTIONS.len())]
    }

    /// Fraction of primitive kinds that are terminals (attributes plus the
    /// ephemeral constant), used by the grow method.
    fn terminal_ratio(&self) -> f64 {
        let terms = (self.n_attrs + 1) as f64;
        terms / (terms + FUNCTIONS.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    /// Every leaf at the drawn height.
    Full,
    /// Leaves anywhere between the minimum and the drawn height.
    Grow,
    /// Full or grow with equal probability.
    HalfAndHalf,
}

/// Generates a node sequence whose height is drawn uniformly from
/// `min_depth..=max_depth`. No lower bound on `min_depth`.
pub(crate) fn generate<R: Rng + ?Sized>(
    ps: &PrimitiveSet,
    min_depth: usize,
    max_depth: usize,
    method: InitMethod,
    rng: &mut R,
) -> Vec<Node> {
    let height = rng.random_range(min_depth..=max_depth);
    let full = match method {
        InitMethod::Full => true,
        InitMethod::Grow => false,
        InitMethod::HalfAndHalf => rng.random::<bool>(),
    };
    let ratio = ps.terminal_ratio();
    let mut nodes = Vec::new();
    // Depths of the slots still to fill, processed depth-first.
    let mut pending = vec![0usize];
    while let Some(depth) = pending.pop() {
        let leaf = depth == height || (!full && depth >= min_depth && rng.random::<f64>() < ratio);
        let node = if leaf { ps.random_terminal(rng) } else { ps.random_function(rng) };
        for _ in 0..node.arity() {
            pending.push(depth + 1);
        }
        nodes.push(node);
    }
    nodes
}

/// Random tree with height in `min_depth..=max_depth`, `2 <= min_depth`.
pub fn random_tree<R: Rng + ?Sized>(
    ps: &PrimitiveSet,
    min_depth: usize,
    max_depth: usize,
    method: InitMethod,
    rng: &mut R,
) -> Result<GpTree> {
    if min_depth < 2 || min_depth > max_depth {
        return Err(Error::config(format!(
            "initial depth range ({min_depth}, {max_depth}) must satisfy 2 <= min <= max"
        )));
    }
    Ok(GpTree::from_nodes_unchecked(generate(ps, min_depth, max_depth, method, rng)))
}
