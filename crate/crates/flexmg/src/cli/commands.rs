//! Command implementations behind the `flexmg` binary. The binary stays
//! a thin wrapper; everything here is callable from tests and examples.

use super::config::{ConfigMap, RunConfig};
use crate::cycle::{
    emit_dsl, level_trace, parse_programs, reference_v, to_dot, CycleProgram, Step,
};
use crate::error::{Error, Result};
use crate::evo::{evolve, stats_csv, FitnessEnv, SolveMode};
use crate::setup::{build_hierarchy, AmgHierarchy};
use crate::solver::{pcg, solve, Preconditioner, SolveResult, FITNESS_MAX_ITERS};
use crate::sparse::{
    assemble_anisotropic_7pt, build_rhs, random_unit_vector, read_matrix_market_file,
    write_matrix_market_file, CsrMatrix, ProblemSpec, RhsKind,
};
use std::path::{Path, PathBuf};

/// Load the system matrix: an explicit Matrix Market file wins over the
/// assembled model problem.
pub fn load_matrix(cfg: &RunConfig) -> Result<CsrMatrix> {
    match &cfg.matrix_path {
        Some(path) => read_matrix_market_file(path),
        None => assemble_anisotropic_7pt(&cfg.problem),
    }
}

fn build(cfg: &RunConfig, problem: &ProblemSpec) -> Result<AmgHierarchy> {
    let a = match &cfg.matrix_path {
        Some(path) => read_matrix_market_file(path)?,
        None => assemble_anisotropic_7pt(problem)?,
    };
    build_hierarchy(a, cfg.setup)
}

/// Initial guess convention: a zero right-hand side needs a nonzero
/// start, so it gets a seeded random unit vector; anything else starts
/// from zero.
pub fn initial_guess(rhs: &[f64], n: usize, seed: u64) -> Vec<f64> {
    if rhs.iter().all(|v| *v == 0.0) {
        random_unit_vector(n, crate::rng::stream_seed(seed, "x0"))
    } else {
        vec![0.0; n]
    }
}

/// Fitness environment for optimization runs (15-cycle budget).
pub fn fitness_env<'h>(cfg: &RunConfig, hierarchy: &'h AmgHierarchy) -> FitnessEnv<'h> {
    let n = hierarchy.fine_matrix().nrows();
    let rhs = match cfg.mode {
        SolveMode::Solver => build_rhs(&cfg.problem),
        // CG needs a nonzero right-hand side; fall back to the seeded
        // random vector when the configured one vanishes
        SolveMode::Preconditioner => {
            let rhs = build_rhs(&cfg.problem);
            if rhs.iter().all(|v| *v == 0.0) {
                random_unit_vector(n, crate::rng::stream_seed(cfg.seed, "pcg-rhs"))
            } else {
                rhs
            }
        }
    };
    let x0 = initial_guess(&rhs, n, cfg.seed);
    FitnessEnv {
        hierarchy,
        rhs,
        x0,
        mode: cfg.mode,
        fitness_mode: cfg.evo.fitness_mode,
        max_iters: FITNESS_MAX_ITERS,
        tol: 1e-8,
        flexible_pcg: cfg.flexible_pcg,
    }
}

/// Full-budget run of one program in the configured mode.
pub fn run_program(
    cfg: &RunConfig,
    hierarchy: &AmgHierarchy,
    program: &CycleProgram,
    rhs: &[f64],
) -> Result<SolveResult> {
    match cfg.mode {
        SolveMode::Solver => {
            let x0 = initial_guess(rhs, rhs.len(), cfg.seed);
            solve(hierarchy, program, rhs, &x0, cfg.tol, cfg.max_iter)
        }
        SolveMode::Preconditioner => pcg(
            hierarchy.fine_matrix(),
            Preconditioner::Cycle(hierarchy, program),
            rhs,
            cfg.tol,
            cfg.max_iter,
            cfg.flexible_pcg,
        ),
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("resolved.cfg"), cfg.echo())?;
    print!("{}", cfg.echo());
    Ok(())
}

/// Simple table shared by CSV and aligned-text output; both views carry
/// identical cell strings.
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Self {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn text(&self) -> String {
        let ncols = self.headers.len();
        let mut widths = vec![0usize; ncols];
        for (i, h) in self.headers.iter().enumerate() {
            widths[i] = h.len();
        }
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let fmt_row = |cells: &[String]| -> String {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = fmt_row(&self.headers);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (ncols - 1)));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&fmt_row(row));
            out.push('\n');
        }
        out
    }
}

fn write_table(cfg: &RunConfig, name: &str, table: &Table) -> Result<()> {
    std::fs::write(cfg.out_dir.join(format!("{name}.csv")), table.csv())?;
    std::fs::write(cfg.out_dir.join(format!("{name}.txt")), table.text())?;
    println!("{}", table.text());
    Ok(())
}

/// `flexmg problem`: assemble and export the configured matrix.
pub fn cmd_problem(cfg: &RunConfig) -> Result<()> {
    prepare_out(cfg)?;
    let a = load_matrix(cfg)?;
    write_matrix_market_file(cfg.out_dir.join("problem.mtx"), &a)?;
    std::fs::write(
        cfg.out_dir.join("problem.json"),
        serde_json::to_string_pretty(&cfg.problem).expect("spec serializes"),
    )?;
    println!(
        "wrote problem.mtx ({} unknowns, {} nonzeros)",
        a.nrows(),
        a.nnz()
    );
    Ok(())
}

/// `flexmg optimize`: evolutionary search, archive and stats export.
pub fn cmd_optimize(cfg: &RunConfig) -> Result<()> {
    prepare_out(cfg)?;
    let hierarchy = build(cfg, &cfg.problem)?;
    std::fs::write(cfg.out_dir.join("hierarchy.json"), hierarchy.summary_json())?;
    let grammar = crate::cycle::Grammar::full(cfg.flex_levels, hierarchy.depth());
    let env = fitness_env(cfg, &hierarchy);
    let mut evo = cfg.evo.clone();
    evo.master_seed = cfg.seed;
    let report = evolve(&grammar, &env, &evo)?;
    report.front.export(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("stats.csv"), stats_csv(&report.stats))?;
    println!(
        "archive size {} after {} generations ({} evaluations, {} duplicate initials)",
        report.front.len(),
        evo.generations,
        report.evaluations,
        report.initial_duplicates
    );
    Ok(())
}

fn load_cycle_file(path: &Path, flex_levels: usize, depth: usize) -> Result<CycleProgram> {
    let text = std::fs::read_to_string(path)?;
    let mut programs = parse_programs(&text, flex_levels, depth)?;
    match programs.len() {
        1 => Ok(programs.pop().unwrap()),
        0 => Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("{}: no program found", path.display()),
        }),
        n => Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("{}: expected one program, found {n}", path.display()),
        }),
    }
}

fn program_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// `flexmg eval`: run one stored program and report the result record.
pub fn cmd_eval(cfg: &RunConfig, cycle_path: &Path) -> Result<()> {
    prepare_out(cfg)?;
    let hierarchy = build(cfg, &cfg.problem)?;
    let program = load_cycle_file(cycle_path, cfg.flex_levels, hierarchy.depth())?;
    let rhs = build_rhs(&cfg.problem);
    let result = run_program(cfg, &hierarchy, &program, &rhs)?;
    std::fs::write(cfg.out_dir.join("result.json"), result.to_json())?;
    println!(
        "{}: iterations={} converged={} conv_factor={:.6} work_units={:.3} wall_time_s={:.6}",
        program_name(cycle_path),
        result.iterations,
        result.converged,
        result.conv_factor,
        result.work_units,
        result.wall_time_s,
    );
    if result.diverged || result.breakdown {
        return Err(Error::Numerical(format!(
            "{} {} on the configured problem",
            program_name(cycle_path),
            if result.diverged { "diverged" } else { "broke down" },
        )));
    }
    Ok(())
}

fn named_programs(
    cycle_paths: &[PathBuf],
    references: &[(&str, usize, usize)],
    flex_levels: usize,
    depth: usize,
) -> Result<Vec<(String, CycleProgram)>> {
    let mut out = Vec::new();
    for (name, nu1, nu2) in references {
        out.push((name.to_string(), reference_v(*nu1, *nu2, flex_levels, depth)?));
    }
    for path in cycle_paths {
        out.push((
            program_name(path),
            load_cycle_file(path, flex_levels, depth)?,
        ));
    }
    Ok(out)
}

/// `flexmg compare`: reference and evolved solvers across right-hand
/// sides f ∈ {0, 1, rand} and x-anisotropy a ∈ {0.01, 0.001, 0.0001}.
pub fn cmd_compare(cfg: &RunConfig, cycle_paths: &[PathBuf]) -> Result<()> {
    prepare_out(cfg)?;
    let variants: [(&str, RhsKind, f64); 5] = [
        ("f=0,a=0.01", RhsKind::Zero, 0.01),
        ("f=0,a=0.001", RhsKind::Zero, 0.001),
        ("f=0,a=0.0001", RhsKind::Zero, 0.0001),
        ("f=1,a=0.001", RhsKind::Ones, 0.001),
        ("f=rand,a=0.001", RhsKind::Random { seed: cfg.seed }, 0.001),
    ];
    let mut headers = vec!["program".to_string()];
    headers.extend(variants.iter().map(|(n, _, _)| n.to_string()));
    let mut time_table = Table::new(headers.clone());
    let mut work_table = Table::new(headers);

    // rows come from one program list validated against the first
    // hierarchy; each variant rebuilds the matrix and setup
    let refs = [("V(2,1)", 2usize, 1usize), ("V(3,2)", 3, 2), ("V(3,3)", 3, 3)];
    let mut rows: Option<Vec<(String, CycleProgram)>> = None;

    let mut time_cells: Vec<Vec<String>> = Vec::new();
    let mut work_cells: Vec<Vec<String>> = Vec::new();
    for (_, rhs_kind, a_coeff) in &variants {
        let problem = ProblemSpec {
            a: *a_coeff,
            rhs_kind: *rhs_kind,
            ..cfg.problem
        };
        let hierarchy = build(cfg, &problem)?;
        let programs = match &rows {
            Some(r) => r.clone(),
            None => {
                let r = named_programs(cycle_paths, &refs, cfg.flex_levels, hierarchy.depth())?;
                rows = Some(r.clone());
                r
            }
        };
        let rhs = build_rhs(&problem);
        for (i, (name, program)) in programs.iter().enumerate() {
            let program = program.rebind(hierarchy.depth()).map_err(|e| {
                Error::InvalidProgram(format!("{name}: {e}"))
            })?;
            let result = run_program(cfg, &hierarchy, &program, &rhs)?;
            if time_cells.len() <= i {
                time_cells.push(vec![name.clone()]);
                work_cells.push(vec![name.clone()]);
            }
            time_cells[i].push(format!("({:.4}, {})", result.wall_time_s, result.iterations));
            work_cells[i].push(format!("({:.3}, {})", result.work_units, result.iterations));
        }
    }
    for row in time_cells {
        time_table.push_row(row);
    }
    for row in work_cells {
        work_table.push_row(row);
    }
    write_table(cfg, "compare_time", &time_table)?;
    write_table(cfg, "compare_work", &work_table)?;
    Ok(())
}

/// `flexmg precond-suite`: PCG robustness across the drifting
/// time-step matrices, references V(1,1) / V(1,2) / V(2,2).
pub fn cmd_precond_suite(cfg: &RunConfig, cycle_paths: &[PathBuf]) -> Result<()> {
    let mut cfg = cfg.clone();
    cfg.mode = SolveMode::Preconditioner;
    prepare_out(&cfg)?;
    let refs = [("V(1,1)", 1usize, 1usize), ("V(1,2)", 1, 2), ("V(2,2)", 2, 2)];
    let mut headers = vec!["t".to_string()];
    let mut rows: Option<Vec<(String, CycleProgram)>> = None;
    let mut table: Option<Table> = None;

    for t in 1..=cfg.suite.steps {
        let problem = cfg.suite.problem_at(&cfg.problem, t);
        let hierarchy = build(&cfg, &problem)?;
        let programs = match &rows {
            Some(r) => r.clone(),
            None => {
                // programs validate against the t=1 hierarchy and stay
                // fixed afterwards
                let r = named_programs(cycle_paths, &refs, cfg.flex_levels, hierarchy.depth())?;
                headers.extend(r.iter().map(|(n, _)| n.clone()));
                table = Some(Table::new(headers.clone()));
                rows = Some(r.clone());
                r
            }
        };
        let rhs = {
            let rhs = build_rhs(&problem);
            if rhs.iter().all(|v| *v == 0.0) {
                random_unit_vector(
                    hierarchy.fine_matrix().nrows(),
                    crate::rng::stream_seed(cfg.seed, "pcg-rhs"),
                )
            } else {
                rhs
            }
        };
        let mut row = vec![t.to_string()];
        for (name, program) in &programs {
            let program = program.rebind(hierarchy.depth()).map_err(|e| {
                Error::InvalidProgram(format!("{name} at t={t}: {e}"))
            })?;
            let result = run_program(&cfg, &hierarchy, &program, &rhs)?;
            if !result.converged {
                return Err(Error::Numerical(format!(
                    "{name} failed to converge at t={t}"
                )));
            }
            row.push(format!(
                "({:.1}, {})",
                result.wall_time_s * 1e3,
                result.iterations
            ));
        }
        table.as_mut().unwrap().push_row(row);
    }
    write_table(&cfg, "precond_suite", table.as_ref().unwrap())?;
    Ok(())
}

/// `flexmg sizes`: iterations and work units across grid sizes, with the
/// same program text re-anchored to each hierarchy.
pub fn cmd_sizes(cfg: &RunConfig, grids: &[usize], cycle_paths: &[PathBuf]) -> Result<()> {
    prepare_out(cfg)?;
    let grids: Vec<usize> = if grids.is_empty() {
        vec![16, 32, 48, 64]
    } else {
        grids.to_vec()
    };
    let refs = [("V(1,1)", 1usize, 1usize), ("V(2,1)", 2, 1)];
    let mut table = Table::new(
        ["program", "grid", "unknowns", "iterations", "work_units", "conv_factor"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for &g in &grids {
        let problem = ProblemSpec {
            nx: g,
            ny: g,
            nz: g,
            ..cfg.problem
        };
        let hierarchy = build(cfg, &problem)?;
        let programs = named_programs(cycle_paths, &refs, cfg.flex_levels, hierarchy.depth())?;
        let rhs = build_rhs(&problem);
        for (name, program) in &programs {
            let result = run_program(cfg, &hierarchy, program, &rhs)?;
            table.push_row(vec![
                name.clone(),
                format!("{g}^3"),
                problem.unknowns().to_string(),
                result.iterations.to_string(),
                format!("{:.3}", result.work_units),
                format!("{:.6}", result.conv_factor),
            ]);
        }
    }
    write_table(cfg, "sizes", &table)?;
    Ok(())
}

/// Infer a rendering context for a bare program text: the base cycle
/// pins the flexible boundary, a coarse solve pins the hierarchy depth,
/// otherwise the deepest level touched decides.
pub fn infer_context(steps: &[Step], default_flex: usize) -> (usize, usize) {
    let trace = level_trace(steps);
    let max_level = trace.iter().copied().max().unwrap_or(0).max(0) as usize;
    let base_level = steps
        .iter()
        .zip(&trace)
        .find(|(s, _)| matches!(s, Step::BaseV { .. }))
        .map(|(_, l)| *l as usize);
    let coarse_level = steps
        .iter()
        .zip(&trace)
        .find(|(s, _)| matches!(s, Step::CoarseSolve))
        .map(|(_, l)| *l as usize);
    if let Some(l) = base_level {
        let flex = l + 1;
        (flex, flex + 1)
    } else if let Some(l) = coarse_level {
        let depth = l + 1;
        (default_flex.max(depth), depth)
    } else {
        (default_flex.max(max_level + 1), max_level + 1)
    }
}

/// `flexmg render`: Graphviz DOT for a stored program.
pub fn cmd_render(cycle_path: &Path, out: Option<&Path>, flex_levels: usize) -> Result<()> {
    let text = std::fs::read_to_string(cycle_path)?;
    // tokenize first with a permissive context, then re-anchor
    let tokens: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect();
    let joined = tokens.join(" ");
    let steps = parse_loose(&joined)?;
    let (flex, depth) = infer_context(&steps, flex_levels);
    let mut programs = parse_programs(&emit_dsl(&steps), flex, depth)?;
    let program = programs.pop().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: "no program found".into(),
    })?;
    let dot = to_dot(&program);
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.dot", program_name(cycle_path)));
            std::fs::write(&path, &dot)?;
            println!("wrote {}", path.display());
        }
        None => print!("{dot}"),
    }
    Ok(())
}

/// Token-level parse without structural validation, for context
/// inference.
fn parse_loose(text: &str) -> Result<Vec<Step>> {
    // reuse the strict parser with the most permissive context by
    // trying the deepest flexible region first
    for depth in [1usize, 2, 3, 4, 5, 6, 7, 8, 9, 10] {
        for flex in [5usize, depth] {
            if let Ok(programs) = parse_programs(text, flex, depth) {
                if let Some(p) = programs.into_iter().next() {
                    return Ok(p.steps().to_vec());
                }
            }
        }
    }
    // fall back to the strict parser's error at the default context
    parse_programs(text, 5, 6).map(|mut v| v.pop().map(|p| p.steps().to_vec()).unwrap_or_default())
}

// ---------------------------------------------------------------------
// argument parsing and dispatch

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "flexmg",
    about = "Algebraic multigrid with grammar-generated flexible cycles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (`key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides config and FLEXMG_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation worker count (1 = bitwise reproducible)
    #[arg(long)]
    workers: Option<usize>,
    /// Cost objective: `work` (deterministic) or `time`
    #[arg(long)]
    fitness: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let map = match &self.config {
            Some(path) => ConfigMap::load(path)?,
            None => ConfigMap::default(),
        };
        let fitness = match self.fitness.as_deref() {
            None => None,
            Some("work") => Some(crate::solver::FitnessMode::WorkUnits),
            Some("time") => Some(crate::solver::FitnessMode::WallTime),
            Some(other) => {
                return Err(Error::Config(format!(
                    "--fitness must be work|time, got {other:?}"
                )))
            }
        };
        RunConfig::resolve(&map, self.seed, self.workers, fitness, self.out.clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the model problem and export it
    Problem {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evolve flexible cycles and export the Pareto archive
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate one stored cycle program
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Program file (.cycle)
        cycle: PathBuf,
    },
    /// Compare stored programs against reference cycles across problem variants
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Program files (.cycle)
        cycles: Vec<PathBuf>,
    },
    /// PCG robustness across drifting time-step matrices
    PrecondSuite {
        #[command(flatten)]
        common: CommonArgs,
        /// Program files (.cycle), fixed from the t=1 optimization
        cycles: Vec<PathBuf>,
    },
    /// Render a program as Graphviz DOT
    Render {
        /// Program file (.cycle)
        cycle: PathBuf,
        /// Output directory (prints to stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flexible levels used to anchor the program
        #[arg(long, default_value_t = crate::cycle::DEFAULT_FLEX_LEVELS)]
        flex_levels: usize,
    },
    /// Evaluate programs across grid sizes
    Sizes {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated cubic grid extents
        #[arg(long, value_delimiter = ',')]
        grids: Vec<usize>,
        /// Program files (.cycle)
        cycles: Vec<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Problem { common } => cmd_problem(&common.resolve()?),
        Command::Optimize { common } => cmd_optimize(&common.resolve()?),
        Command::Eval { common, cycle } => cmd_eval(&common.resolve()?, &cycle),
        Command::Compare { common, cycles } => cmd_compare(&common.resolve()?, &cycles),
        Command::PrecondSuite { common, cycles } => {
            cmd_precond_suite(&common.resolve()?, &cycles)
        }
        Command::Render {
            cycle,
            out,
            flex_levels,
        } => cmd_render(&cycle, out.as_deref(), flex_levels),
        Command::Sizes {
            common,
            grids,
            cycles,
        } => cmd_sizes(&common.resolve()?, &grids, &cycles),
    }
}

/// Binary entry point: 0 on success, 2 for config/parse errors, 3 for
/// numerical failures.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
