//! Flexible multigrid cycle programs.
//!
//! A cycle is a flat list of typed steps: smoothing with a chosen method
//! and weight, descending to the next level (restrict the residual, zero
//! the coarse guess), ascending with a scaled correction, handing off to
//! the fixed V(1,1) below the flexible region, a direct solve on a
//! shallow hierarchy's coarsest level, or doing nothing. The level trace
//! of a valid program is a balanced Dyck-style walk that starts and ends
//! on the finest level and never leaves the flexible region.

mod dot;
mod dsl;
mod enumerate;
pub mod grammar;

pub use dot::to_dot;
pub use dsl::{emit_dsl, parse_dsl, parse_programs};
pub use enumerate::enumerate_programs;
pub use grammar::{generate, GenLimits, Grammar, SampleMethod, SeqNode, StepNode};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of flexible levels used throughout the reference experiments.
pub const DEFAULT_FLEX_LEVELS: usize = 5;

/// Hard cap on program length, counting every step in the flexible region.
pub const MAX_PROGRAM_STEPS: usize = 40;

/// Smoother selection for one smoothing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SmootherKind {
    GsForward,
    GsBackward,
    Jacobi,
}

impl SmootherKind {
    pub const ALL: [SmootherKind; 3] = [
        SmootherKind::GsForward,
        SmootherKind::GsBackward,
        SmootherKind::Jacobi,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            SmootherKind::GsForward => "gsf",
            SmootherKind::GsBackward => "gsb",
            SmootherKind::Jacobi => "jac",
        }
    }
}

/// Shared grid of relaxation weights and CGC scaling factors:
/// 0.10, 0.15, …, 1.90 (37 values, step 0.05).
pub const WEIGHT_GRID_LEN: usize = 37;

/// A weight drawn from the shared grid, stored by index so every value
/// is on-grid by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Weight(u8);

impl Weight {
    pub const ONE: Weight = Weight(18); // 0.10 + 18·0.05 = 1.00

    pub fn from_index(idx: usize) -> Option<Weight> {
        (idx < WEIGHT_GRID_LEN).then_some(Weight(idx as u8))
    }

    /// Map a real to the grid; values farther than 1e-9 from any grid
    /// point are rejected.
    pub fn from_value(v: f64) -> Option<Weight> {
        let k = ((v - 0.10) / 0.05).round();
        if !(0.0..WEIGHT_GRID_LEN as f64).contains(&k) {
            return None;
        }
        let idx = k as usize;
        ((v - Weight(idx as u8).value()).abs() <= 1e-9).then_some(Weight(idx as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn value(self) -> f64 {
        (10 + 5 * self.0 as u32) as f64 / 100.0
    }

    /// One grid step up or down, clamped at the endpoints.
    pub fn step(self, up: bool) -> Weight {
        if up {
            Weight((self.0 + 1).min(WEIGHT_GRID_LEN as u8 - 1))
        } else {
            Weight(self.0.saturating_sub(1))
        }
    }

    pub fn grid() -> impl Iterator<Item = Weight> {
        (0..WEIGHT_GRID_LEN).map(|i| Weight(i as u8))
    }
}

impl std::fmt::Display for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2}", self.value())
    }
}

/// One step of a flexible cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    Smooth { kind: SmootherKind, omega: Weight },
    Descend,
    Ascend { omega: Weight },
    /// Hand off to the fixed V(1,1) below the flexible region and apply
    /// the returned correction scaled by omega.
    BaseV { omega: Weight },
    /// Direct solve on the coarsest level of a shallow hierarchy.
    CoarseSolve,
    NoOp,
}

/// A structural violation found by `validate`, tied to a step index where
/// one applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step_index: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.step_index {
            Some(i) => write!(f, "step {}: {}", i, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn violations_to_error(violations: &[Violation]) -> Error {
    Error::InvalidProgram(
        violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; "),
    )
}

/// The level the trace occupies before each step, plus the final level.
pub fn level_trace(steps: &[Step]) -> Vec<i64> {
    let mut trace = Vec::with_capacity(steps.len() + 1);
    let mut level = 0i64;
    trace.push(level);
    for step in steps {
        match step {
            Step::Descend => level += 1,
            Step::Ascend { .. } => level -= 1,
            _ => {}
        }
        trace.push(level);
    }
    trace
}

/// Check every structural invariant of a cycle program against a
/// hierarchy of `hierarchy_depth` levels with `flex_levels` flexible top
/// levels. Returns all violations, each with the offending step index.
pub fn validate(
    steps: &[Step],
    hierarchy_depth: usize,
    flex_levels: usize,
) -> std::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if flex_levels == 0 || hierarchy_depth == 0 {
        violations.push(Violation {
            step_index: None,
            message: "flex_levels and hierarchy_depth must be positive".into(),
        });
        return Err(violations);
    }
    if steps.is_empty() {
        violations.push(Violation {
            step_index: None,
            message: "program is empty".into(),
        });
        return Err(violations);
    }
    let max_level = flex_levels.min(hierarchy_depth) as i64 - 1;
    let mut level = 0i64;
    for (i, step) in steps.iter().enumerate() {
        match step {
            Step::Descend => {
                level += 1;
                if level > max_level {
                    violations.push(Violation {
                        step_index: Some(i),
                        message: format!(
                            "level {level} exceeds flexible region (max {max_level})"
                        ),
                    });
                }
                if i + 1 == steps.len() {
                    violations.push(Violation {
                        step_index: Some(i),
                        message: "descend must not be the last step".into(),
                    });
                }
            }
            Step::Ascend { .. } => {
                level -= 1;
                if level < 0 {
                    violations.push(Violation {
                        step_index: Some(i),
                        message: "level underflow: ascend on the finest level".into(),
                    });
                }
            }
            Step::BaseV { .. } => {
                if hierarchy_depth <= flex_levels {
                    violations.push(Violation {
                        step_index: Some(i),
                        message: "base cycle requires levels below the flexible region".into(),
                    });
                } else if level != flex_levels as i64 - 1 {
                    violations.push(Violation {
                        step_index: Some(i),
                        message: format!(
                            "base cycle only at level {}, found at {level}",
                            flex_levels - 1
                        ),
                    });
                }
            }
            Step::CoarseSolve => {
                if hierarchy_depth > flex_levels {
                    violations.push(Violation {
                        step_index: Some(i),
                        message: "coarse solve unreachable: hierarchy deeper than flexible region"
                            .into(),
                    });
                } else if level != hierarchy_depth as i64 - 1 {
                    violations.push(Violation {
                        step_index: Some(i),
                        message: format!(
                            "coarse solve only on the coarsest level {}, found at {level}",
                            hierarchy_depth - 1
                        ),
                    });
                }
            }
            Step::Smooth { .. } | Step::NoOp => {}
        }
    }
    if level != 0 {
        violations.push(Violation {
            step_index: None,
            message: format!("final level != 0 (ends at {level})"),
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// A validated cycle program bound to a (flex_levels, hierarchy_depth)
/// context.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleProgram {
    steps: Vec<Step>,
    flex_levels: usize,
    hierarchy_depth: usize,
}

impl CycleProgram {
    pub fn new(steps: Vec<Step>, flex_levels: usize, hierarchy_depth: usize) -> Result<Self> {
        validate(&steps, hierarchy_depth, flex_levels)
            .map_err(|v| violations_to_error(&v))?;
        Ok(Self {
            steps,
            flex_levels,
            hierarchy_depth,
        })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn flex_levels(&self) -> usize {
        self.flex_levels
    }

    pub fn hierarchy_depth(&self) -> usize {
        self.hierarchy_depth
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Canonical DSL text.
    pub fn dsl(&self) -> String {
        emit_dsl(self.steps())
    }

    /// Rebind the same step list to another hierarchy depth, revalidating.
    pub fn rebind(&self, hierarchy_depth: usize) -> Result<Self> {
        Self::new(self.steps.clone(), self.flex_levels, hierarchy_depth)
    }
}

/// Standard V(ν₁,ν₂) cycle over the flexible region: ν₁ pre-smooths with
/// `pre` and ν₂ post-smooths with `post` around each coarse-grid
/// correction, unit CGC scaling, and the boundary handled by the fixed
/// base cycle (deep hierarchy) or a direct solve (shallow hierarchy).
pub fn standard_cycle(
    nu1: usize,
    nu2: usize,
    pre: SmootherKind,
    post: SmootherKind,
    omega: Weight,
    flex_levels: usize,
    hierarchy_depth: usize,
) -> Result<CycleProgram> {
    if hierarchy_depth == 0 || flex_levels == 0 {
        return Err(Error::InvalidProgram(
            "hierarchy depth and flex levels must be positive".into(),
        ));
    }
    let mut steps = Vec::new();
    let bottom = if hierarchy_depth <= flex_levels {
        hierarchy_depth - 1
    } else {
        flex_levels - 1
    };
    emit_v(
        &mut steps,
        0,
        bottom,
        nu1,
        nu2,
        pre,
        post,
        omega,
        hierarchy_depth <= flex_levels,
    );
    CycleProgram::new(steps, flex_levels, hierarchy_depth)
}

#[allow(clippy::too_many_arguments)]
fn emit_v(
    steps: &mut Vec<Step>,
    level: usize,
    bottom: usize,
    nu1: usize,
    nu2: usize,
    pre: SmootherKind,
    post: SmootherKind,
    omega: Weight,
    shallow: bool,
) {
    if level == bottom {
        if shallow {
            steps.push(Step::CoarseSolve);
        } else {
            for _ in 0..nu1 {
                steps.push(Step::Smooth { kind: pre, omega });
            }
            steps.push(Step::BaseV { omega: Weight::ONE });
            for _ in 0..nu2 {
                steps.push(Step::Smooth { kind: post, omega });
            }
        }
        return;
    }
    for _ in 0..nu1 {
        steps.push(Step::Smooth { kind: pre, omega });
    }
    steps.push(Step::Descend);
    emit_v(steps, level + 1, bottom, nu1, nu2, pre, post, omega, shallow);
    steps.push(Step::Ascend { omega: Weight::ONE });
    for _ in 0..nu2 {
        steps.push(Step::Smooth { kind: post, omega });
    }
}

/// Reference V(ν₁,ν₂): Gauss-Seidel forward on the way down, backward on
/// the way up, unit weights.
pub fn reference_v(nu1: usize, nu2: usize, flex_levels: usize, depth: usize) -> Result<CycleProgram> {
    standard_cycle(
        nu1,
        nu2,
        SmootherKind::GsForward,
        SmootherKind::GsBackward,
        Weight::ONE,
        flex_levels,
        depth,
    )
}
