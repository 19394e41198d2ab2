//! Batched, memoized fitness evaluation.
//!
//! Evaluations are grouped into batches and dispatched to a worker pool;
//! the shared hierarchy is read-only and every worker owns its context,
//! so results are independent of the worker count. A panic or divergence
//! inside one evaluation yields the penalty pair and never aborts the
//! generation.

use super::Individual;
use crate::cycle::CycleProgram;
use crate::setup::AmgHierarchy;
use crate::solver::{
    fitness_from, pcg, solve, work_units, FitnessMode, FitnessPair, Preconditioner,
};
use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Whether programs run standalone or inside CG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Solver,
    Preconditioner,
}

/// Everything one fitness evaluation needs, fixed for a whole run.
pub struct FitnessEnv<'a> {
    pub hierarchy: &'a AmgHierarchy,
    pub rhs: Vec<f64>,
    pub x0: Vec<f64>,
    pub mode: SolveMode,
    pub fitness_mode: FitnessMode,
    pub max_iters: usize,
    pub tol: f64,
    pub flexible_pcg: bool,
}

impl FitnessEnv<'_> {
    /// Cost of one iteration in fine-grid operator applications,
    /// including the CG overhead in preconditioner mode.
    pub fn work_per_iter(&self, program: &CycleProgram) -> f64 {
        let base = work_units(program, self.hierarchy);
        match self.mode {
            SolveMode::Solver => base,
            SolveMode::Preconditioner => {
                let a = self.hierarchy.fine_matrix();
                base + 1.0 + 5.0 * a.nrows() as f64 / a.nnz() as f64
            }
        }
    }

    /// Run the fitness budget for one program.
    pub fn evaluate(&self, program: &CycleProgram) -> FitnessPair {
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let result = match self.mode {
                SolveMode::Solver => solve(
                    self.hierarchy,
                    program,
                    &self.rhs,
                    &self.x0,
                    self.tol,
                    self.max_iters,
                ),
                SolveMode::Preconditioner => pcg(
                    self.hierarchy.fine_matrix(),
                    Preconditioner::Cycle(self.hierarchy, program),
                    &self.rhs,
                    self.tol,
                    self.max_iters,
                    self.flexible_pcg,
                ),
            };
            match result {
                Ok(r) => fitness_from(&r, self.work_per_iter(program), self.fitness_mode),
                Err(_) => FitnessPair::penalty(),
            }
        }));
        outcome.unwrap_or_else(|_| FitnessPair::penalty())
    }
}

/// Assign a fitness to every unevaluated individual, reusing the memo of
/// canonical-DSL → fitness. Returns the number of fresh evaluations.
pub fn evaluate_population(
    individuals: &mut [Individual],
    env: &FitnessEnv<'_>,
    batch_size: usize,
    pool: Option<&rayon::ThreadPool>,
    memo: &mut HashMap<String, FitnessPair>,
) -> usize {
    // memo hits first, collecting distinct programs still in need
    let mut pending: Vec<(String, CycleProgram)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for ind in individuals.iter_mut() {
        if ind.fitness.is_some() {
            continue;
        }
        if let Some(fit) = memo.get(&ind.dsl) {
            ind.fitness = Some(*fit);
            continue;
        }
        if !seen.contains_key(&ind.dsl) {
            seen.insert(ind.dsl.clone(), pending.len());
            pending.push((ind.dsl.clone(), ind.program.clone()));
        }
    }

    let batch = batch_size.max(1);
    let mut results: Vec<FitnessPair> = Vec::with_capacity(pending.len());
    for chunk in pending.chunks(batch) {
        let chunk_results: Vec<FitnessPair> = match pool {
            Some(pool) => pool.install(|| {
                use rayon::prelude::*;
                chunk.par_iter().map(|(_, p)| env.evaluate(p)).collect()
            }),
            None => chunk.iter().map(|(_, p)| env.evaluate(p)).collect(),
        };
        results.extend(chunk_results);
    }

    let fresh = pending.len();
    for ((dsl, _), fit) in pending.into_iter().zip(results) {
        memo.insert(dsl, fit);
    }
    for ind in individuals.iter_mut() {
        if ind.fitness.is_none() {
            ind.fitness = Some(*memo.get(&ind.dsl).expect("evaluated above"));
        }
    }
    fresh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{parse_dsl, reference_v};
    use crate::setup::{build_hierarchy, SetupParams};
    use crate::sparse::{assemble_anisotropic_7pt, random_unit_vector, ProblemSpec};

    fn env(h: &AmgHierarchy) -> FitnessEnv<'_> {
        let n = h.fine_matrix().nrows();
        FitnessEnv {
            hierarchy: h,
            rhs: vec![0.0; n],
            x0: random_unit_vector(n, 99),
            mode: SolveMode::Solver,
            fitness_mode: FitnessMode::WorkUnits,
            max_iters: 15,
            tol: 1e-8,
            flexible_pcg: false,
        }
    }

    #[test]
    fn noop_program_earns_penalty() {
        let spec = ProblemSpec::anisotropic_cube(6, 1.0);
        let h = build_hierarchy(assemble_anisotropic_7pt(&spec).unwrap(), SetupParams::default())
            .unwrap();
        let env = env(&h);
        let p = parse_dsl("n", 5, h.depth()).unwrap();
        assert!(env.evaluate(&p).penalty);
    }

    #[test]
    fn v11_earns_finite_fitness() {
        let spec = ProblemSpec::anisotropic_cube(8, 1.0);
        let h = build_hierarchy(assemble_anisotropic_7pt(&spec).unwrap(), SetupParams::default())
            .unwrap();
        let env = env(&h);
        let p = reference_v(1, 1, 5, h.depth()).unwrap();
        let fit = env.evaluate(&p);
        assert!(!fit.penalty);
        assert!(fit.conv_factor < 1.0);
        assert!(fit.cost_per_iter > 0.0);
    }

    #[test]
    fn identical_programs_share_one_evaluation() {
        let spec = ProblemSpec::anisotropic_cube(6, 1.0);
        let h = build_hierarchy(assemble_anisotropic_7pt(&spec).unwrap(), SetupParams::default())
            .unwrap();
        let fitness_env = env(&h);
        let p = reference_v(1, 1, 5, h.depth()).unwrap();
        let mut pop: Vec<Individual> = (0..4)
            .map(|_| Individual::from_program(p.clone()))
            .collect();
        let mut memo = HashMap::new();
        let fresh = evaluate_population(&mut pop, &fitness_env, 8, None, &mut memo);
        assert_eq!(fresh, 1);
        let f0 = pop[0].fitness.unwrap();
        assert!(pop.iter().all(|i| i.fitness.unwrap() == f0));
    }
}
