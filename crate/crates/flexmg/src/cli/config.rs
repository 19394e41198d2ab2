//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! Example:
//! ```text
//! # anisotropic solver run
//! problem.grid = 32
//! problem.a = 0.001
//! problem.rhs = zero
//! setup.theta = 0.25
//! evo.mu = 32
//! mode = solver
//! ```

use crate::cycle::DEFAULT_FLEX_LEVELS;
use crate::error::{Error, Result};
use crate::evo::{EvoConfig, SolveMode};
use crate::setup::SetupParams;
use crate::solver::FitnessMode;
use crate::sparse::{ProblemSpec, RhsKind};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Parsed key/value pairs, retaining which keys were consumed so unknown
/// keys can be rejected.
#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<ConfigMap> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
                "line {}: expected `key = value`, got {line:?}",
                lineno + 1
            )))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigMap {
            values,
            consumed: Default::default(),
        })
    }

    pub fn load(path: &Path) -> Result<ConfigMap> {
        ConfigMap::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let v = self.values.get(key).map(String::as_str);
        if v.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("key {key}: {e}"))),
        }
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn unknown_keys(&self) -> Vec<String> {
        let consumed = self.consumed.borrow();
        self.values
            .keys()
            .filter(|k| !consumed.contains(*k))
            .cloned()
            .collect()
    }
}

/// Coefficient drift for the time-stepped preconditioner suite: the y/z
/// coefficients of the base problem are scaled by (1 + 0.05·t).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TimeStepSuite {
    pub steps: usize,
    pub drift: f64,
}

impl Default for TimeStepSuite {
    fn default() -> Self {
        Self {
            steps: 10,
            drift: 0.05,
        }
    }
}

impl TimeStepSuite {
    /// The problem at time step t (t = 1 is the optimization matrix).
    pub fn problem_at(&self, base: &ProblemSpec, t: usize) -> ProblemSpec {
        let scale = 1.0 + self.drift * t as f64;
        ProblemSpec {
            b: base.b * scale,
            c: base.c * scale,
            ..*base
        }
    }
}

/// Fully-resolved run configuration shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub matrix_path: Option<PathBuf>,
    pub setup: SetupParams,
    pub evo: EvoConfig,
    pub mode: SolveMode,
    pub flex_levels: usize,
    pub suite: TimeStepSuite,
    pub tol: f64,
    pub max_iter: usize,
    pub flexible_pcg: bool,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    /// Resolve a config map plus command-line overrides. Seed priority:
    /// explicit flag, config key, FLEXMG_SEED, default 42.
    pub fn resolve(
        map: &ConfigMap,
        seed_flag: Option<u64>,
        workers_flag: Option<usize>,
        fitness_flag: Option<FitnessMode>,
        out_flag: Option<PathBuf>,
    ) -> Result<RunConfig> {
        let grid: usize = map.get_or("problem.grid", 64)?;
        let nx = map.get_or("problem.nx", grid)?;
        let ny = map.get_or("problem.ny", grid)?;
        let nz = map.get_or("problem.nz", grid)?;
        let a = map.get_or("problem.a", 0.001)?;
        let b = map.get_or("problem.b", 1.0)?;
        let c = map.get_or("problem.c", 1.0)?;
        let seed = match seed_flag {
            Some(s) => s,
            None => match map.get::<u64>("seed")? {
                Some(s) => s,
                None => std::env::var("FLEXMG_SEED")
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(42),
            },
        };
        let rhs_seed = map.get_or("problem.rhs_seed", seed)?;
        let rhs_kind = match map.raw("problem.rhs").unwrap_or("zero") {
            "zero" => RhsKind::Zero,
            "ones" => RhsKind::Ones,
            "rand" | "random" => RhsKind::Random { seed: rhs_seed },
            other => {
                return Err(Error::Config(format!(
                    "problem.rhs must be zero|ones|rand, got {other:?}"
                )))
            }
        };
        let problem = ProblemSpec {
            nx,
            ny,
            nz,
            a,
            b,
            c,
            rhs_kind,
        };
        let matrix_path = map.raw("problem.matrix").map(PathBuf::from);

        let setup = SetupParams {
            strength_threshold: map.get_or("setup.theta", 0.25)?,
            max_levels: map.get_or("setup.max_levels", 10)?,
            coarse_max_size: map.get_or("setup.coarse_max_size", 50)?,
            coarsen_seed: map.get_or("setup.seed", seed)?,
        };

        let defaults = EvoConfig::default();
        let fitness_mode = match fitness_flag {
            Some(m) => m,
            None => match map.raw("evo.fitness").unwrap_or("work") {
                "work" | "work_units" => FitnessMode::WorkUnits,
                "time" | "wall_time" => FitnessMode::WallTime,
                other => {
                    return Err(Error::Config(format!(
                        "evo.fitness must be work|time, got {other:?}"
                    )))
                }
            },
        };
        let evo = EvoConfig {
            mu: map.get_or("evo.mu", defaults.mu)?,
            lambda: map.get_or("evo.lambda", defaults.lambda)?,
            generations: map.get_or("evo.generations", defaults.generations)?,
            initial_pop: map.get_or("evo.initial_pop", defaults.initial_pop)?,
            batch_size: map.get_or("evo.batch", defaults.batch_size)?,
            crossover_prob: map.get_or("evo.crossover", defaults.crossover_prob)?,
            mutation_prob: map.get_or("evo.mutation", defaults.mutation_prob)?,
            master_seed: seed,
            fitness_mode,
            worker_count: workers_flag.unwrap_or(map.get_or("evo.workers", 1)?),
        };

        let mode = match map.raw("mode").unwrap_or("solver") {
            "solver" => SolveMode::Solver,
            "preconditioner" | "precond" => SolveMode::Preconditioner,
            other => {
                return Err(Error::Config(format!(
                    "mode must be solver|preconditioner, got {other:?}"
                )))
            }
        };

        let suite = TimeStepSuite {
            steps: map.get_or("suite.steps", 10)?,
            drift: map.get_or("suite.drift", 0.05)?,
        };

        let config = RunConfig {
            problem,
            matrix_path,
            setup,
            evo,
            mode,
            flex_levels: map.get_or("flex_levels", DEFAULT_FLEX_LEVELS)?,
            suite,
            tol: map.get_or("tol", 1e-8)?,
            max_iter: map.get_or("max_iter", 100)?,
            flexible_pcg: map.get_or("flexible_pcg", false)?,
            out_dir: out_flag
                .or_else(|| map.raw("out").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("flexmg-out")),
            seed,
        };
        let unknown = map.unknown_keys();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )));
        }
        config.problem.validate()?;
        config.setup.validate()?;
        config.evo.validate()?;
        Ok(config)
    }

    /// Echo in the same `key = value` format `resolve` accepts, with all
    /// defaults materialized.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem.nx = {}", self.problem.nx);
        let _ = writeln!(s, "problem.ny = {}", self.problem.ny);
        let _ = writeln!(s, "problem.nz = {}", self.problem.nz);
        let _ = writeln!(s, "problem.a = {}", self.problem.a);
        let _ = writeln!(s, "problem.b = {}", self.problem.b);
        let _ = writeln!(s, "problem.c = {}", self.problem.c);
        match self.problem.rhs_kind {
            RhsKind::Zero => {
                let _ = writeln!(s, "problem.rhs = zero");
            }
            RhsKind::Ones => {
                let _ = writeln!(s, "problem.rhs = ones");
            }
            RhsKind::Random { seed } => {
                let _ = writeln!(s, "problem.rhs = rand");
                let _ = writeln!(s, "problem.rhs_seed = {seed}");
            }
        }
        if let Some(p) = &self.matrix_path {
            let _ = writeln!(s, "problem.matrix = {}", p.display());
        }
        let _ = writeln!(s, "setup.theta = {}", self.setup.strength_threshold);
        let _ = writeln!(s, "setup.max_levels = {}", self.setup.max_levels);
        let _ = writeln!(s, "setup.coarse_max_size = {}", self.setup.coarse_max_size);
        let _ = writeln!(s, "setup.seed = {}", self.setup.coarsen_seed);
        let _ = writeln!(s, "evo.mu = {}", self.evo.mu);
        let _ = writeln!(s, "evo.lambda = {}", self.evo.lambda);
        let _ = writeln!(s, "evo.generations = {}", self.evo.generations);
        let _ = writeln!(s, "evo.initial_pop = {}", self.evo.initial_pop);
        let _ = writeln!(s, "evo.batch = {}", self.evo.batch_size);
        let _ = writeln!(s, "evo.crossover = {}", self.evo.crossover_prob);
        let _ = writeln!(s, "evo.mutation = {}", self.evo.mutation_prob);
        let _ = writeln!(
            s,
            "evo.fitness = {}",
            match self.evo.fitness_mode {
                FitnessMode::WorkUnits => "work",
                FitnessMode::WallTime => "time",
            }
        );
        let _ = writeln!(s, "evo.workers = {}", self.evo.worker_count);
        let _ = writeln!(
            s,
            "mode = {}",
            match self.mode {
                SolveMode::Solver => "solver",
                SolveMode::Preconditioner => "preconditioner",
            }
        );
        let _ = writeln!(s, "flex_levels = {}", self.flex_levels);
        let _ = writeln!(s, "suite.steps = {}", self.suite.steps);
        let _ = writeln!(s, "suite.drift = {}", self.suite.drift);
        let _ = writeln!(s, "tol = {}", self.tol);
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "flexible_pcg = {}", self.flexible_pcg);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_defaults_from_empty_config() {
        let map = ConfigMap::parse("").unwrap();
        let cfg = RunConfig::resolve(&map, Some(7), None, None, None).unwrap();
        assert_eq!(cfg.problem.nx, 64);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.flex_levels, 5);
        assert_eq!(cfg.evo.mu, 256);
    }

    #[test]
    fn dotted_keys_and_comments() {
        let text = "# run\nproblem.grid = 16  # cube\nevo.mu = 8\nevo.lambda = 8\nmode = preconditioner\n";
        let map = ConfigMap::parse(text).unwrap();
        let cfg = RunConfig::resolve(&map, Some(1), None, None, None).unwrap();
        assert_eq!(cfg.problem.nx, 16);
        assert_eq!(cfg.evo.mu, 8);
        assert_eq!(cfg.mode, SolveMode::Preconditioner);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let map = ConfigMap::parse("problem.gird = 16\n").unwrap();
        assert!(RunConfig::resolve(&map, Some(1), None, None, None).is_err());
    }

    #[test]
    fn echo_roundtrips() {
        let text = "problem.grid = 8\nproblem.rhs = rand\nevo.mu = 4\nevo.lambda = 4\n";
        let map = ConfigMap::parse(text).unwrap();
        let cfg = RunConfig::resolve(&map, Some(3), None, None, None);
        // mu/lambda of 4 pass validation
        let cfg = cfg.unwrap();
        let echoed = ConfigMap::parse(&cfg.echo()).unwrap();
        let cfg2 = RunConfig::resolve(&echoed, None, None, None, None).unwrap();
        assert_eq!(cfg.problem, cfg2.problem);
        assert_eq!(cfg.setup, cfg2.setup);
        assert_eq!(cfg.evo.mu, cfg2.evo.mu);
        assert_eq!(cfg.seed, cfg2.seed);
        assert_eq!(cfg.out_dir, cfg2.out_dir);
    }

    #[test]
    fn suite_drift_scales_yz_coefficients() {
        let suite = TimeStepSuite::default();
        let base = ProblemSpec::anisotropic_cube(8, 0.001);
        let p3 = suite.problem_at(&base, 3);
        assert!((p3.b - 1.15).abs() < 1e-12);
        assert!((p3.c - 1.15).abs() < 1e-12);
        assert_eq!(p3.a, base.a);
        let p0 = suite.problem_at(&base, 0);
        assert_eq!(p0, base);
    }
}
