//! Generational loop with elitism, tournament selection and a fitness cache.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fitness::fitness;
use super::init::{random_tree, InitMethod, PrimitiveSet};
use super::tree::GpTree;
use super::variation::{crossover_one_point, mutate_uniform};
use crate::classifiers::ClassifierSpec;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub generations: usize,
    pub pop_size: usize,
    pub tournament_size: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub max_depth: usize,
    pub init_depth: (usize, usize),
    pub const_prob: f64,
    pub cv_folds: usize,
    pub classifier_spec: ClassifierSpec,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            generations: 300,
            pop_size: 100,
            tournament_size: 3,
            p_crossover: 0.9,
            p_mutation: 0.1,
            max_depth: 17,
            init_depth: (2, 6),
            const_prob: 0.1,
            cv_folds: 3,
            classifier_spec: ClassifierSpec::default(),
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 || self.pop_size == 0 || self.tournament_size == 0 {
            return Err(Error::config("generations, pop_size and tournament_size must be positive"));
        }
        let probs_ok = (0.0..=1.0).contains(&self.p_crossover) && (0.0..=1.0).contains(&self.p_mutation);
        if !probs_ok || self.p_crossover + self.p_mutation > 1.0 + 1e-12 {
            return Err(Error::config("p_crossover and p_mutation must be probabilities summing to at most 1"));
        }
        let (lo, hi) = self.init_depth;
        if lo < 2 || lo > hi || hi > self.max_depth {
            return Err(Error::config(format!(
                "init_depth ({lo}, {hi}) must satisfy 2 <= min <= max <= max_depth ({})",
                self.max_depth
            )));
        }
        if !(0.0..=1.0).contains(&self.const_prob) {
            return Err(Error::config("const_prob must lie in [0, 1]"));
        }
        if self.cv_folds < 2 {
            return Err(Error::config("cv_folds must be at least 2"));
        }
        self.classifier_spec.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub tree: GpTree,
    pub fitness: Option<f64>,
    pub n_features: usize,
}

impl Individual {
    fn scored(tree: GpTree, fitness: f64) -> Self {
        let n_features = tree.n_features();
        Individual {
            tree,
            fitness: Some(fitness),
            n_features,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub best: Individual,
    pub history: Vec<GenerationStats>,
    /// Distinct trees whose fitness was computed.
    pub evaluations: usize,
}

fn tournament<R: Rng + ?Sized>(fit: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..fit.len());
    for _ in 1..size {
        let c = rng.random_range(0..fit.len());
        if fit[c] > fit[best] || (fit[c] == fit[best] && c < best) {
            best = c;
        }
    }
    best
}

fn argmax(fit: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in fit.iter().enumerate() {
        if f > fit[best] {
            best = i;
        }
    }
    best
}

/// Runs the generational loop for `cfg.generations` generations and returns
/// the fittest tree seen. Every stochastic choice is drawn from a stream keyed
/// by generation and slot, so the result does not depend on thread count.
pub fn evolve(cfg: &EvolutionConfig, train: &LabeledDataset) -> Result<EvolutionResult> {
    cfg.validate()?;
    let (neg, pos) = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::invalid("evolution needs both classes in the training set"));
    }
    let ps = PrimitiveSet {
        const_prob: cfg.const_prob,
        ..PrimitiveSet::new(train.features.n_cols())
    };
    let fitness_seed = derive_seed(cfg.seed, &[stream::FITNESS]);
    let mut cache: HashMap<String, f64> = HashMap::new();
    let mut history = Vec::with_capacity(cfg.generations);
    let mut best: Option<Individual> = None;

    let mut pop: Vec<GpTree> = (0..cfg.pop_size)
        .map(|i| {
            let mut rng = rng_for(cfg.seed, &[stream::INIT, i as u64]);
            random_tree(&ps, cfg.init_depth.0, cfg.init_depth.1, InitMethod::HalfAndHalf, &mut rng)
        })
        .collect::<Result<_>>()?;

    for g in 0..cfg.generations {
        let keys: Vec<String> = pop.iter().map(GpTree::to_string).collect();
        let mut todo: Vec<(String, &GpTree)> = Vec::new();
        for (k, t) in keys.iter().zip(&pop) {
            if !cache.contains_key(k) && !todo.iter().any(|(s, _)| s == k) {
                todo.push((k.clone(), t));
            }
        }
        let fresh: Vec<(String, f64)> = todo
            .into_par_iter()
            .map(|(k, t)| fitness(t, train, &cfg.classifier_spec, cfg.cv_folds, fitness_seed).map(|f| (k, f)))
            .collect::<Result<_>>()?;
        cache.extend(fresh);
        let fit: Vec<f64> = keys.iter().map(|k| cache[k]).collect();

        let top = argmax(&fit);
        if best.as_ref().is_none_or(|b| fit[top] > b.fitness.unwrap_or(f64::NEG_INFINITY)) {
            best = Some(Individual::scored(pop[top].clone(), fit[top]));
        }
        let best_so_far = best.as_ref().and_then(|b| b.fitness).unwrap_or(fit[top]);
        let stats = GenerationStats {
            generation: g,
            best: fit[top],
            mean: fit.iter().sum::<f64>() / fit.len() as f64,
            best_so_far,
        };
        log::debug!(
            "generation {g}: best {:.4} mean {:.4} best so far {:.4}",
            stats.best,
            stats.mean,
            stats.best_so_far
        );
        history.push(stats);

        if g + 1 == cfg.generations {
            break;
        }
        let mut next = Vec::with_capacity(cfg.pop_size);
        next.push(pop[top].clone());
        let mut slot = 0u64;
        while next.len() < cfg.pop_size {
            let mut rng = rng_for(cfg.seed, &[stream::BREED, g as u64, slot]);
            slot += 1;
            let r: f64 = rng.random();
            let a = &pop[tournament(&fit, cfg.tournament_size, &mut rng)];
            if r < cfg.p_crossover {
                let b = &pop[tournament(&fit, cfg.tournament_size, &mut rng)];
                let (c1, c2) = crossover_one_point(a, b, cfg.max_depth, &mut rng);
                next.push(c1);
                if next.len() < cfg.pop_size {
                    next.push(c2);
                }
            } else if r < cfg.p_crossover + cfg.p_mutation {
                next.push(mutate_uniform(a, &ps, cfg.init_depth, cfg.max_depth, &mut rng));
            } else {
                next.push(a.clone());
            }
        }
        pop = next;
    }

    Ok(EvolutionResult {
        best: best.expect("at least one generation"),
        history,
        evaluations: cache.len(),
    })
}
