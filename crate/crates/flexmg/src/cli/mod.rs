//! File-based front end used by the `flexmg` binary.

mod commands;
mod config;

pub use commands::{
    cmd_compare, cmd_eval, cmd_optimize, cmd_precond_suite, cmd_problem, cmd_render, cmd_sizes,
    fitness_env, infer_context, initial_guess, load_matrix, run, run_program, Table,
};
pub use config::{ConfigMap, RunConfig, TimeStepSuite};
