//! Brute-force program enumeration, used to cross-check the grammar's
//! support and the validator's consistency at small bounds.

use super::{validate, CycleProgram, SmootherKind, Step, Weight};
use crate::error::{Error, Result};

/// Enumerate every valid program of 1..=`max_steps` steps over the given
/// terminal sets, by filtering all step strings through the validator.
/// Refuses bounds whose search space explodes.
pub fn enumerate_programs(
    max_steps: usize,
    hierarchy_depth: usize,
    flex_levels: usize,
    kinds: &[SmootherKind],
    weights: &[Weight],
) -> Result<Vec<CycleProgram>> {
    let mut alphabet: Vec<Step> = Vec::new();
    for kind in kinds {
        for w in weights {
            alphabet.push(Step::Smooth {
                kind: *kind,
                omega: *w,
            });
        }
    }
    alphabet.push(Step::NoOp);
    alphabet.push(Step::Descend);
    for w in weights {
        alphabet.push(Step::Ascend { omega: *w });
    }
    if hierarchy_depth > flex_levels {
        for w in weights {
            alphabet.push(Step::BaseV { omega: *w });
        }
    } else {
        alphabet.push(Step::CoarseSolve);
    }

    let space: f64 = (alphabet.len() as f64).powi(max_steps as i32);
    if space > 5e6 {
        return Err(Error::InvalidProgram(format!(
            "enumeration bound too large: {} tokens ^ {} steps",
            alphabet.len(),
            max_steps
        )));
    }

    let mut out = Vec::new();
    let mut current: Vec<Step> = Vec::new();
    enumerate_rec(
        &alphabet,
        max_steps,
        hierarchy_depth,
        flex_levels,
        &mut current,
        &mut out,
    );
    Ok(out)
}

fn enumerate_rec(
    alphabet: &[Step],
    max_steps: usize,
    depth: usize,
    flex: usize,
    current: &mut Vec<Step>,
    out: &mut Vec<CycleProgram>,
) {
    if !current.is_empty() && validate(current, depth, flex).is_ok() {
        out.push(CycleProgram::new(current.clone(), flex, depth).expect("validated"));
    }
    if current.len() == max_steps {
        return;
    }
    for step in alphabet {
        current.push(*step);
        enumerate_rec(alphabet, max_steps, depth, flex, current, out);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_one_level_has_three_programs() {
        let programs = enumerate_programs(
            1,
            1,
            5,
            &[SmootherKind::GsForward],
            &[Weight::ONE],
        )
        .unwrap();
        assert_eq!(programs.len(), 3);
        let has = |pred: fn(&Step) -> bool| {
            programs
                .iter()
                .any(|p| p.len() == 1 && pred(&p.steps()[0]))
        };
        assert!(has(|s| matches!(s, Step::Smooth { .. })));
        assert!(has(|s| matches!(s, Step::NoOp)));
        assert!(has(|s| matches!(s, Step::CoarseSolve)));
    }

    #[test]
    fn two_steps_two_levels_includes_bare_cgc() {
        let programs =
            enumerate_programs(2, 2, 5, &[SmootherKind::GsForward], &[Weight::ONE]).unwrap();
        let bare = vec![Step::Descend, Step::Ascend { omega: Weight::ONE }];
        assert!(programs.iter().any(|p| p.steps() == bare));
    }

    #[test]
    fn explosion_guard_refuses_large_bounds() {
        let weights: Vec<Weight> = Weight::grid().collect();
        let r = enumerate_programs(8, 2, 5, &SmootherKind::ALL, &weights);
        assert!(r.is_err());
    }

    #[test]
    fn count_matches_dyck_walk_dp() {
        // independent count: a DP over (remaining steps, level) with the
        // same per-level token multiplicities
        let kinds = [SmootherKind::GsForward];
        let weights = [Weight::ONE];
        let max_steps = 4;
        let depth = 2;
        let programs = enumerate_programs(max_steps, depth, 5, &kinds, &weights).unwrap();

        let k = kinds.len() as u64 * weights.len() as u64; // smooth variants
        let w = weights.len() as u64; // ascend variants
        // paths[len][lvl] = number of valid suffixes of `len` steps that
        // start at `lvl` and end at level 0 without leaving [0, depth-1]
        let lmax = depth - 1; // flex (5) does not bind here
        let mut paths = vec![vec![0u64; lmax + 1]; max_steps + 1];
        paths[0][0] = 1;
        for len in 1..=max_steps {
            for lvl in 0..=lmax {
                let mut total = 0u64;
                // smooth or noop at this level
                total += (k + 1) * paths[len - 1][lvl];
                // coarse solve allowed only on the coarsest level (shallow)
                if lvl == depth - 1 {
                    total += paths[len - 1][lvl];
                }
                // descend
                if lvl < lmax {
                    total += paths[len - 1][lvl + 1];
                }
                // ascend
                if lvl > 0 {
                    total += w * paths[len - 1][lvl - 1];
                }
                paths[len][lvl] = total;
            }
        }
        let expected: u64 = (1..=max_steps).map(|len| paths[len][0]).sum();
        assert_eq!(programs.len() as u64, expected);
    }
}
