//! Graphviz rendering of cycle programs.
//!
//! One node per step, pinned at (step index, −level) so neato-style
//! layouts show the level trace. Node colors follow the operation:
//! yellow GS-forward, red GS-backward, purple Jacobi, black direct
//! solve, white no-op. Relaxation weights sit inside smoothing nodes;
//! correction scalings label ascend edges. The base cycle below the
//! flexible region appears as a dotted triangle.

use super::{CycleProgram, SmootherKind, Step};
use std::fmt::Write;

pub fn to_dot(program: &CycleProgram) -> String {
    let mut out = String::new();
    out.push_str("digraph cycle {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=circle, style=filled, fontsize=10];\n");
    let mut level = 0i64;
    let mut prev: Option<usize> = None;
    for (i, step) in program.steps().iter().enumerate() {
        let (attrs, edge_label, dotted_edge) = match step {
            Step::Smooth { kind, omega } => {
                let color = match kind {
                    SmootherKind::GsForward => "yellow",
                    SmootherKind::GsBackward => "red",
                    SmootherKind::Jacobi => "purple",
                };
                let font = if *kind == SmootherKind::Jacobi {
                    ", fontcolor=white"
                } else {
                    ""
                };
                (
                    format!("label=\"{omega}\", fillcolor={color}{font}"),
                    None,
                    false,
                )
            }
            Step::Descend => {
                level += 1;
                ("shape=point, width=0.05, fillcolor=gray".to_string(), None, false)
            }
            Step::Ascend { omega } => {
                level -= 1;
                (
                    "shape=point, width=0.05, fillcolor=gray".to_string(),
                    Some(omega.to_string()),
                    false,
                )
            }
            Step::BaseV { omega } => (
                format!(
                    "label=\"{omega}\", shape=triangle, orientation=180, \
                     style=\"filled,dotted\", fillcolor=lightgray"
                ),
                None,
                true,
            ),
            Step::CoarseSolve => (
                "label=\"\", fillcolor=black, fontcolor=white".to_string(),
                None,
                false,
            ),
            Step::NoOp => ("label=\"\", fillcolor=white".to_string(), None, false),
        };
        let y = match step {
            // the base cycle dips below its level
            Step::BaseV { .. } => -(level + 1),
            _ => -level,
        };
        writeln!(out, "  n{i} [{attrs}, pos=\"{i},{y}!\"];").unwrap();
        if let Some(p) = prev {
            match (edge_label, dotted_edge) {
                (Some(lbl), _) => writeln!(out, "  n{p} -> n{i} [label=\"{lbl}\"];").unwrap(),
                (None, true) => writeln!(out, "  n{p} -> n{i} [style=dotted];").unwrap(),
                (None, false) => writeln!(out, "  n{p} -> n{i};").unwrap(),
            }
        }
        prev = Some(i);
    }
    out.push_str("}\n");
    out
}
