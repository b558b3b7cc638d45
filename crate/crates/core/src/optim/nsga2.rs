//! Genetic feature-subset search: elitist single-objective evolution over
//! boolean genomes (binary tournament, uniform crossover, bit-flip
//! mutation), with a fixed budget of evaluated candidates.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

use super::ledger::{genome_to_string, TrialKind, TrialLedger, TrialRecord};
use super::subset::SubsetObjective;

const SALT_EVOLVE: u64 = 0xe701;
const SALT_EVAL: u64 = 0xe7a1;

#[derive(Debug, Clone)]
pub struct Nsga2Config {
    pub population: usize,
    /// Total number of evaluated candidate genomes.
    pub budget: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; defaults to 1/genome-length.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Nsga2Config {
            population: 50,
            budget: 1000,
            crossover_rate: 0.9,
            mutation_rate: None,
            seed: 0,
        }
    }
}

/// Search result: the lowest-loss genome ever evaluated plus the full
/// trial ledger.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_genome: Vec<bool>,
    pub best_loss: f64,
    pub ledger: TrialLedger,
}

struct Individual {
    genome: Vec<bool>,
    loss: f64,
}

/// Runs the evolutionary search. Exactly `budget` genomes are evaluated;
/// evaluations within a generation run in parallel on per-trial RNG
/// streams, so the outcome does not depend on worker count.
pub fn nsga2_feature_search(
    objective: &dyn SubsetObjective,
    config: &Nsga2Config,
) -> Result<SearchOutcome> {
    if config.budget < config.population {
        return Err(Error::Search(format!(
            "budget {} is smaller than the population {}",
            config.budget, config.population
        )));
    }
    if config.population < 2 {
        return Err(Error::Search("population must be at least 2".into()));
    }
    let genome_len = objective.genome_length();
    if genome_len == 0 {
        return Err(Error::Search("empty feature space".into()));
    }
    let mutation_rate = config.mutation_rate.unwrap_or(1.0 / genome_len as f64);

    let mut evolve_rng = rng::stream(config.seed, SALT_EVOLVE, 0);
    let mut ledger = TrialLedger::new();
    let mut trial_counter = 0usize;

    // Evaluates one batch of genomes in parallel, appending in order.
    let evaluate_batch = |genomes: Vec<Vec<bool>>,
                          counter: &mut usize,
                          ledger: &mut TrialLedger|
     -> Vec<Individual> {
        let base = *counter;
        let evaluated: Vec<(Vec<bool>, super::subset::SubsetLoss, f64)> = genomes
            .into_par_iter()
            .enumerate()
            .map(|(offset, genome)| {
                let start = std::time::Instant::now();
                let trial_seed = rng::derive_seed(config.seed, SALT_EVAL, (base + offset) as u64);
                let loss = objective.evaluate(&genome, trial_seed);
                let ms = start.elapsed().as_secs_f64() * 1e3;
                (genome, loss, ms)
            })
            .collect();
        let mut out = Vec::with_capacity(evaluated.len());
        for (genome, loss, ms) in evaluated {
            ledger.push(TrialRecord {
                index: 0,
                kind: TrialKind::Genome,
                genome: Some(genome_to_string(&genome)),
                hp: None,
                fold_scores: loss.fold_scores.clone(),
                penalty: loss.penalty,
                total_loss: loss.total,
                failed: false,
                wall_time_ms: ms,
            });
            *counter += 1;
            out.push(Individual {
                genome,
                loss: loss.total,
            });
        }
        out
    };

    // Initial population: each bit Bernoulli(0.5).
    let init: Vec<Vec<bool>> = (0..config.population)
        .map(|_| (0..genome_len).map(|_| evolve_rng.gen::<bool>()).collect())
        .collect();
    let mut population = evaluate_batch(init, &mut trial_counter, &mut ledger);
    let mut best = population
        .iter()
        .min_by(|a, b| a.loss.partial_cmp(&b.loss).unwrap())
        .map(|ind| (ind.genome.clone(), ind.loss))
        .unwrap();

    while trial_counter < config.budget {
        let batch = (config.budget - trial_counter).min(config.population);
        let mut offspring_genomes = Vec::with_capacity(batch);
        for _ in 0..batch {
            let a = tournament(&population, &mut evolve_rng);
            let b = tournament(&population, &mut evolve_rng);
            let mut child: Vec<bool> = if evolve_rng.gen::<f64>() < config.crossover_rate {
                population[a]
                    .genome
                    .iter()
                    .zip(&population[b].genome)
                    .map(|(&ga, &gb)| if evolve_rng.gen::<bool>() { ga } else { gb })
                    .collect()
            } else {
                population[a].genome.clone()
            };
            for bit in child.iter_mut() {
                if evolve_rng.gen::<f64>() < mutation_rate {
                    *bit = !*bit;
                }
            }
            offspring_genomes.push(child);
        }
        let offspring = evaluate_batch(offspring_genomes, &mut trial_counter, &mut ledger);
        // Elitist environmental selection: best `population` of parents plus
        // offspring (single-objective degenerate nondominated sorting).
        population.extend(offspring);
        population.sort_by(|a, b| a.loss.partial_cmp(&b.loss).unwrap());
        population.truncate(config.population);
        if population[0].loss < best.1 {
            best = (population[0].genome.clone(), population[0].loss);
        }
    }

    Ok(SearchOutcome {
        best_genome: best.0,
        best_loss: best.1,
        ledger,
    })
}

/// Binary tournament on total loss.
fn tournament<R: Rng>(population: &[Individual], rng: &mut R) -> usize {
    let a = rng.gen_range(0..population.len());
    let b = rng.gen_range(0..population.len());
    if population[a].loss <= population[b].loss {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::subset::{empty_genome_loss, SubsetLoss};

    /// Deterministic toy objective: loss = fraction of wrong bits against a
    /// hidden target plus the usual feature-count penalty.
    struct TargetObjective {
        target: Vec<bool>,
    }

    impl SubsetObjective for TargetObjective {
        fn genome_length(&self) -> usize {
            self.target.len()
        }

        fn evaluate(&self, genome: &[bool], _seed: u64) -> SubsetLoss {
            if genome.iter().all(|&b| !b) {
                return empty_genome_loss();
            }
            let wrong = genome
                .iter()
                .zip(&self.target)
                .filter(|(a, b)| a != b)
                .count();
            let total = wrong as f64 / self.target.len() as f64;
            SubsetLoss {
                fold_scores: vec![],
                penalty: 0.0,
                total,
            }
        }
    }

    #[test]
    fn budget_below_population_is_an_error() {
        let obj = TargetObjective {
            target: vec![true; 8],
        };
        let config = Nsga2Config {
            population: 50,
            budget: 10,
            ..Nsga2Config::default()
        };
        assert!(nsga2_feature_search(&obj, &config).is_err());
    }

    #[test]
    fn budget_equal_population_returns_best_of_initials() {
        let obj = TargetObjective {
            target: vec![true; 10],
        };
        let config = Nsga2Config {
            population: 20,
            budget: 20,
            seed: 5,
            ..Nsga2Config::default()
        };
        let out = nsga2_feature_search(&obj, &config).unwrap();
        assert_eq!(out.ledger.len(), 20);
        // The returned genome is the ledger's minimum.
        let lmin = out.ledger.best().unwrap().total_loss;
        assert!((out.best_loss - lmin).abs() < 1e-15);
    }

    #[test]
    fn exact_budget_accounting() {
        let obj = TargetObjective {
            target: vec![true; 12],
        };
        for budget in [24usize, 30, 55] {
            let config = Nsga2Config {
                population: 12,
                budget,
                seed: 2,
                ..Nsga2Config::default()
            };
            let out = nsga2_feature_search(&obj, &config).unwrap();
            assert_eq!(out.ledger.len(), budget);
        }
    }

    #[test]
    fn identical_seeds_identical_outcome() {
        let obj = TargetObjective {
            target: vec![true, false, true, true, false, true, false, true],
        };
        let config = Nsga2Config {
            population: 10,
            budget: 60,
            seed: 11,
            ..Nsga2Config::default()
        };
        let a = nsga2_feature_search(&obj, &config).unwrap();
        let b = nsga2_feature_search(&obj, &config).unwrap();
        assert_eq!(a.best_genome, b.best_genome);
        assert_eq!(a.best_loss, b.best_loss);
        let losses_a: Vec<f64> = a.ledger.records.iter().map(|r| r.total_loss).collect();
        let losses_b: Vec<f64> = b.ledger.records.iter().map(|r| r.total_loss).collect();
        assert_eq!(losses_a, losses_b);
    }

    #[test]
    fn ledger_identical_across_worker_counts() {
        let target: Vec<bool> = (0..16).map(|i| i % 2 == 0).collect();
        let config = Nsga2Config {
            population: 8,
            budget: 40,
            seed: 77,
            ..Nsga2Config::default()
        };
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let obj = TargetObjective {
                target: target.clone(),
            };
            pool.install(|| nsga2_feature_search(&obj, &config).unwrap())
        };
        let a = run_with(1);
        let b = run_with(2);
        assert_eq!(a.best_genome, b.best_genome);
        let ga: Vec<Option<String>> = a.ledger.records.iter().map(|r| r.genome.clone()).collect();
        let gb: Vec<Option<String>> = b.ledger.records.iter().map(|r| r.genome.clone()).collect();
        assert_eq!(ga, gb);
        let la: Vec<f64> = a.ledger.records.iter().map(|r| r.total_loss).collect();
        let lb: Vec<f64> = b.ledger.records.iter().map(|r| r.total_loss).collect();
        assert_eq!(la, lb);
    }

    #[test]
    fn evolution_homes_in_on_the_target() {
        let target: Vec<bool> = (0..24).map(|i| i % 3 != 0).collect();
        let obj = TargetObjective {
            target: target.clone(),
        };
        let config = Nsga2Config {
            population: 20,
            budget: 400,
            seed: 3,
            ..Nsga2Config::default()
        };
        let out = nsga2_feature_search(&obj, &config).unwrap();
        let wrong = out
            .best_genome
            .iter()
            .zip(&target)
            .filter(|(a, b)| a != b)
            .count();
        assert!(wrong <= 1, "best genome still {wrong} bits away");
        // Running minimum is non-increasing by construction.
        let mins = out.ledger.running_minimum();
        for w in mins.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
