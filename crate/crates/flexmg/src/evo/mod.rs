//! Grammar-guided genetic programming over cycle programs:
//! ramped half-and-half initialization, NSGA-II selection, subtree
//! crossover and mutation, (μ+λ) survivor truncation, and a global
//! Pareto archive.
//!
//! Evaluation is the only concurrent phase; ranking, selection, and
//! variation run sequentially on dedicated named RNG streams, so a fixed
//! master seed reproduces a run bit-for-bit in deterministic fitness
//! mode regardless of the worker count.

mod archive;
mod eval;
mod nsga2;
mod variation;

pub use archive::{stats_csv, ArchiveEntry, GenStats, ParetoFront};
pub use eval::{evaluate_population, FitnessEnv, SolveMode};
pub use nsga2::{crowding_distance, nsga2_rank, tournament_pick, tournament_winner, truncate};
pub use variation::{crossover, mutate};

use crate::cycle::{
    grammar::MAX_TREE_DEPTH, CycleProgram, GenLimits, Grammar, SampleMethod, SeqNode,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::solver::{FitnessMode, FitnessPair};
use std::collections::HashMap;

/// Parameters of the evolutionary run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvoConfig {
    pub mu: usize,
    pub lambda: usize,
    pub generations: usize,
    pub initial_pop: usize,
    pub batch_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub master_seed: u64,
    pub fitness_mode: FitnessMode,
    pub worker_count: usize,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            mu: 256,
            lambda: 256,
            generations: 100,
            initial_pop: 2048,
            batch_size: 32,
            crossover_prob: 0.7,
            mutation_prob: 0.3,
            master_seed: 42,
            fitness_mode: FitnessMode::WorkUnits,
            worker_count: 1,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu < 2 || self.lambda < 2 {
            return Err(Error::Config("mu and lambda must be at least 2".into()));
        }
        if self.initial_pop < 1 || self.generations == usize::MAX {
            return Err(Error::Config("invalid population sizing".into()));
        }
        let (cx, mt) = (self.crossover_prob, self.mutation_prob);
        if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&mt) || cx + mt > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "crossover/mutation probabilities must lie in [0,1] and sum to at most 1, got {cx}/{mt}"
            )));
        }
        if self.worker_count == 0 {
            return Err(Error::Config("worker_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// One member of the population: the derivation tree, its decoded
/// program, the canonical DSL (memo key), and the NSGA-II bookkeeping.
#[derive(Debug, Clone)]
pub struct Individual {
    pub tree: SeqNode,
    pub program: CycleProgram,
    pub dsl: String,
    pub fitness: Option<FitnessPair>,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn from_tree(tree: SeqNode, grammar: &Grammar) -> Individual {
        let program = CycleProgram::new(
            tree.decode(),
            grammar.flex_levels,
            grammar.hierarchy_depth,
        )
        .expect("grammar trees decode to valid programs");
        let dsl = program.dsl();
        Individual {
            tree,
            program,
            dsl,
            fitness: None,
            rank: 0,
            crowding: 0.0,
        }
    }

    pub fn from_program(program: CycleProgram) -> Individual {
        let tree = SeqNode::from_steps(program.steps()).expect("valid programs are balanced");
        let dsl = program.dsl();
        Individual {
            tree,
            program,
            dsl,
            fitness: None,
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// Ramped half-and-half initialization: tree-depth ramp cycling 2..=17,
/// alternating grow and full. Duplicate programs are permitted; the
/// count of duplicated DSL texts is returned with the population.
pub fn init_population(grammar: &Grammar, n: usize, seed: u64) -> (Vec<Individual>, usize) {
    let mut rng = rng::stream(seed, "init");
    let mut population = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::new();
    let mut duplicates = 0usize;
    let mut i = 0usize;
    while population.len() < n {
        let ramp = 2 + (i % (MAX_TREE_DEPTH - 1));
        let method = if i % 2 == 0 {
            SampleMethod::Grow
        } else {
            SampleMethod::Full
        };
        i += 1;
        let tree = grammar.sample_tree(&mut rng, ramp, method, GenLimits::default());
        if tree.steps.is_empty() {
            continue;
        }
        let ind = Individual::from_tree(tree, grammar);
        if !seen.insert(ind.dsl.clone()) {
            duplicates += 1;
        }
        population.push(ind);
    }
    (population, duplicates)
}

fn assign_rank_and_crowding(population: &mut [Individual]) {
    let fits: Vec<FitnessPair> = population
        .iter()
        .map(|i| i.fitness.expect("ranked individuals carry fitness"))
        .collect();
    let (ranks, fronts) = nsga2_rank(&fits);
    for (ind, rank) in population.iter_mut().zip(&ranks) {
        ind.rank = *rank;
    }
    for front in fronts {
        let pairs: Vec<FitnessPair> = front.iter().map(|&i| fits[i]).collect();
        let crowd = crowding_distance(&pairs);
        for (&i, c) in front.iter().zip(crowd) {
            population[i].crowding = c;
        }
    }
}

fn population_minima(population: &[Individual]) -> (f64, f64) {
    let min_cost = population
        .iter()
        .filter_map(|i| i.fitness.map(|f| f.cost_per_iter))
        .fold(f64::INFINITY, f64::min);
    let min_conv = population
        .iter()
        .filter_map(|i| i.fitness.map(|f| f.conv_factor))
        .fold(f64::INFINITY, f64::min);
    (min_cost, min_conv)
}

/// Everything an optimization run produces.
#[derive(Debug)]
pub struct EvoReport {
    pub front: ParetoFront,
    pub stats: Vec<GenStats>,
    pub initial_duplicates: usize,
    pub evaluations: usize,
}

/// The (μ+λ) loop. Generation 0 evaluates the initial population and
/// truncates to μ; every later generation breeds λ offspring by binary
/// tournament plus either-or crossover/mutation, evaluates them, pools
/// parents and offspring, and truncates back to μ. The archive keeps
/// every non-dominated evaluated program across all generations.
pub fn evolve(grammar: &Grammar, env: &FitnessEnv<'_>, config: &EvoConfig) -> Result<EvoReport> {
    config.validate()?;
    let pool = if config.worker_count > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.worker_count)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };
    let mut memo: HashMap<String, FitnessPair> = HashMap::new();
    let mut archive = ParetoFront::default();
    let mut stats = Vec::with_capacity(config.generations + 1);
    let mut evaluations = 0usize;

    let (mut population, initial_duplicates) =
        init_population(grammar, config.initial_pop, config.master_seed);
    evaluations += evaluate_population(
        &mut population,
        env,
        config.batch_size,
        pool.as_ref(),
        &mut memo,
    );
    for ind in &population {
        archive.insert(&ind.dsl, ind.fitness.unwrap(), 0);
    }
    let survivors = truncate(
        &population
            .iter()
            .map(|i| i.fitness.unwrap())
            .collect::<Vec<_>>(),
        config.mu,
    );
    population = survivors.into_iter().map(|i| population[i].clone()).collect();
    assign_rank_and_crowding(&mut population);
    let (min_cost, min_conv) = population_minima(&population);
    stats.push(GenStats {
        generation: 0,
        min_cost_per_iter: min_cost,
        min_conv_factor: min_conv,
        archive_size: archive.len(),
    });

    let mut sel_rng = rng::stream(config.master_seed, "selection");
    let mut var_rng = rng::stream(config.master_seed, "variation");
    use rand::Rng;

    for generation in 1..=config.generations {
        let ranks: Vec<usize> = population.iter().map(|i| i.rank).collect();
        let crowding: Vec<f64> = population.iter().map(|i| i.crowding).collect();
        let mut offspring: Vec<Individual> = Vec::with_capacity(config.lambda);
        while offspring.len() < config.lambda {
            let u: f64 = var_rng.gen();
            if u < config.crossover_prob {
                let p1 = tournament_pick(&mut sel_rng, &ranks, &crowding);
                let p2 = tournament_pick(&mut sel_rng, &ranks, &crowding);
                let (child, _) =
                    crossover(&population[p1].tree, &population[p2].tree, &mut var_rng);
                offspring.push(Individual::from_tree(child, grammar));
            } else if u < config.crossover_prob + config.mutation_prob {
                let p = tournament_pick(&mut sel_rng, &ranks, &crowding);
                let child = mutate(&population[p].tree, grammar, &mut var_rng);
                offspring.push(Individual::from_tree(child, grammar));
            } else {
                let p = tournament_pick(&mut sel_rng, &ranks, &crowding);
                offspring.push(Individual::from_tree(population[p].tree.clone(), grammar));
            }
        }
        evaluations += evaluate_population(
            &mut offspring,
            env,
            config.batch_size,
            pool.as_ref(),
            &mut memo,
        );
        for ind in &offspring {
            archive.insert(&ind.dsl, ind.fitness.unwrap(), generation);
        }
        let mut pooled = population;
        pooled.extend(offspring);
        let fits: Vec<FitnessPair> = pooled.iter().map(|i| i.fitness.unwrap()).collect();
        let survivors = truncate(&fits, config.mu);
        population = survivors.into_iter().map(|i| pooled[i].clone()).collect();
        assign_rank_and_crowding(&mut population);
        let (min_cost, min_conv) = population_minima(&population);
        stats.push(GenStats {
            generation,
            min_cost_per_iter: min_cost,
            min_conv_factor: min_conv,
            archive_size: archive.len(),
        });
    }

    Ok(EvoReport {
        front: archive,
        stats,
        initial_duplicates,
        evaluations,
    })
}
