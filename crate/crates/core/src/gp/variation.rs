//! One-point subtree crossover and uniform subtree mutation.

use rand::Rng;

use super::init::{generate, InitMethod, PrimitiveSet};
use super::tree::GpTree;

/// Swaps uniformly chosen subtrees. A child deeper than `max_depth` is
/// replaced by its corresponding parent.
pub fn crossover_one_point<R: Rng + ?Sized>(a: &GpTree, b: &GpTree, max_depth: usize, rng: &mut R) -> (GpTree, GpTree) {
    let i = rng.random_range(0..a.len());
    let j = rng.random_range(0..b.len());
    let c1 = a.replace_subtree(i, b.subtree(j));
    let c2 = b.replace_subtree(j, a.subtree(i));
    let c1 = if c1.depth() > max_depth { a.clone() } else { c1 };
    let c2 = if c2.depth() > max_depth { b.clone() } else { c2 };
    (c1, c2)
}

/// Replaces a uniformly chosen node's subtree with a fresh random one whose
/// height fits within `max_depth` at that position.
pub fn mutate_uniform<R: Rng + ?Sized>(
    t: &GpTree,
    ps: &PrimitiveSet,
    init_depth: (usize, usize),
    max_depth: usize,
    rng: &mut R,
) -> GpTree {
    let i = rng.random_range(0..t.len());
    let node_depth = t.node_depths()[i];
    let budget = max_depth.saturating_sub(node_depth);
    let hi = init_depth.1.min(budget);
    let lo = init_depth.0.min(hi);
    let sub = generate(ps, lo, hi, InitMethod::HalfAndHalf, rng);
    t.replace_subtree(i, &sub)
}
