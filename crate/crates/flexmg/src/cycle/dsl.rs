//! Textual cycle DSL: one program per line, whitespace-separated tokens.
//!
//! Tokens: `s:<gsf|gsb|jac>:<ω>` smoothing, `d` descend, `u:<ω>` ascend,
//! `bv:<ω>` base cycle, `cs` coarse solve, `n` no-op. Weights print with
//! exactly two decimals; `#` starts a comment.

use super::{validate, CycleProgram, SmootherKind, Step, Weight};
use crate::error::{Error, Result};

/// Canonical text for a step list.
pub fn emit_dsl(steps: &[Step]) -> String {
    steps
        .iter()
        .map(|s| match s {
            Step::Smooth { kind, omega } => format!("s:{}:{omega}", kind.mnemonic()),
            Step::Descend => "d".to_string(),
            Step::Ascend { omega } => format!("u:{omega}"),
            Step::BaseV { omega } => format!("bv:{omega}"),
            Step::CoarseSolve => "cs".to_string(),
            Step::NoOp => "n".to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_weight(text: &str, line: usize, column: usize) -> Result<Weight> {
    let v: f64 = text.parse().map_err(|_| Error::Parse {
        line,
        column,
        message: format!("expected a weight, got {text:?}"),
    })?;
    Weight::from_value(v).ok_or(Error::Parse {
        line,
        column,
        message: format!("weight {text} is off the 0.10..1.90 grid (step 0.05)"),
    })
}

fn parse_token(token: &str, line: usize, column: usize) -> Result<Step> {
    let lower = token.to_ascii_lowercase();
    let mut parts = lower.split(':');
    let head = parts.next().unwrap_or("");
    let step = match head {
        "s" => {
            let kind = match parts.next() {
                Some("gsf") => SmootherKind::GsForward,
                Some("gsb") => SmootherKind::GsBackward,
                Some("jac") => SmootherKind::Jacobi,
                other => {
                    return Err(Error::Parse {
                        line,
                        column,
                        message: format!("unknown smoother {:?}", other.unwrap_or("")),
                    })
                }
            };
            let omega = parse_weight(
                parts.next().ok_or(Error::Parse {
                    line,
                    column,
                    message: "smoothing step is missing its weight".into(),
                })?,
                line,
                column,
            )?;
            Step::Smooth { kind, omega }
        }
        "d" => Step::Descend,
        "u" => Step::Ascend {
            omega: parse_weight(
                parts.next().ok_or(Error::Parse {
                    line,
                    column,
                    message: "ascend is missing its scaling factor".into(),
                })?,
                line,
                column,
            )?,
        },
        "bv" => Step::BaseV {
            omega: parse_weight(
                parts.next().ok_or(Error::Parse {
                    line,
                    column,
                    message: "base cycle is missing its scaling factor".into(),
                })?,
                line,
                column,
            )?,
        },
        "cs" => Step::CoarseSolve,
        "n" => Step::NoOp,
        _ => {
            return Err(Error::Parse {
                line,
                column,
                message: format!("unknown token {token:?}"),
            })
        }
    };
    if parts.next().is_some() {
        return Err(Error::Parse {
            line,
            column,
            message: format!("trailing fields in token {token:?}"),
        });
    }
    Ok(step)
}

/// Parse every program in `text` (one per non-empty, non-comment line)
/// and validate each against the given hierarchy context. Violations are
/// reported at the line/column of the offending step.
pub fn parse_programs(
    text: &str,
    flex_levels: usize,
    hierarchy_depth: usize,
) -> Result<Vec<CycleProgram>> {
    let mut programs = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut steps = Vec::new();
        let mut spans = Vec::new();
        let mut column = 1usize;
        for token in line.split_whitespace() {
            let start = line[column - 1..]
                .find(token)
                .map(|off| column + off)
                .unwrap_or(column);
            steps.push(parse_token(token, line_no, start)?);
            spans.push(start);
            column = start + token.len();
        }
        if let Err(violations) = validate(&steps, hierarchy_depth, flex_levels) {
            let v = &violations[0];
            let col = v.step_index.map(|i| spans[i]).unwrap_or(1);
            return Err(Error::Parse {
                line: line_no,
                column: col,
                message: v.message.clone(),
            });
        }
        programs.push(
            CycleProgram::new(steps, flex_levels, hierarchy_depth)
                .expect("validated above"),
        );
    }
    Ok(programs)
}

/// Parse exactly one program.
pub fn parse_dsl(text: &str, flex_levels: usize, hierarchy_depth: usize) -> Result<CycleProgram> {
    let mut programs = parse_programs(text, flex_levels, hierarchy_depth)?;
    match programs.len() {
        1 => Ok(programs.pop().unwrap()),
        0 => Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no program found".into(),
        }),
        n => Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("expected one program, found {n}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_reference_example() {
        let p = parse_dsl("s:gsf:0.80 d s:jac:0.50 u:1.15", 5, 3).unwrap();
        assert_eq!(
            p.steps(),
            &[
                Step::Smooth {
                    kind: SmootherKind::GsForward,
                    omega: Weight::from_value(0.80).unwrap()
                },
                Step::Descend,
                Step::Smooth {
                    kind: SmootherKind::Jacobi,
                    omega: Weight::from_value(0.50).unwrap()
                },
                Step::Ascend {
                    omega: Weight::from_value(1.15).unwrap()
                },
            ]
        );
    }

    #[test]
    fn underflow_is_a_parse_error_with_position() {
        match parse_dsl("u:1.00", 5, 3) {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!(line, 1);
                assert_eq!(column, 1);
                assert!(message.contains("underflow"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_token_reports_column() {
        match parse_dsl("s:gsf:1.00 zz", 5, 3) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(column, 12);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn off_grid_weight_rejected() {
        assert!(parse_dsl("s:gsf:0.37", 5, 3).is_err());
        assert!(parse_dsl("s:gsf:2.00", 5, 3).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# reference cycle\n\ns:gsf:1.00 # trailing comment\n";
        let programs = parse_programs(text, 5, 3).unwrap();
        assert_eq!(programs.len(), 1);
        assert_eq!(programs[0].len(), 1);
    }

    #[test]
    fn emit_parse_roundtrip_is_identity() {
        let text = "s:gsb:1.90 n d s:jac:0.10 u:0.55";
        let p = parse_dsl(text, 5, 4).unwrap();
        assert_eq!(p.dsl(), text);
        let q = parse_dsl(&p.dsl(), 5, 4).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn canonicalization_normalizes_case_and_spacing() {
        let p = parse_dsl("  S:GSF:1.0   D  CS   U:1.00 ", 5, 2).unwrap();
        assert_eq!(p.dsl(), "s:gsf:1.00 d cs u:1.00");
    }
}
