//! Genetic programming over the attribute table: trees, their protected
//! evaluation, variation operators and the generational loop.

mod evolve;
mod fitness;
mod init;
mod tree;
mod variation;

pub use evolve::{evolve, EvolutionConfig, EvolutionResult, GenerationStats, Individual};
pub use fitness::{fitness, stratified_folds};
pub use init::{random_tree, InitMethod, PrimitiveSet, FUNCTIONS};
pub use tree::{
    extract_features, protected_div, protected_ln, protected_sqrt, BinaryOp, GpTree, Node, UnaryOp, SATURATION,
};
pub use variation::{crossover_one_point, mutate_uniform};
