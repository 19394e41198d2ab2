//! Write flexible cycles in the textual DSL, validate them against a
//! hierarchy, and race them against a standard V-cycle.
//!
//! Tokens: `s:<gsf|gsb|jac>:<w>` smooth, `d` descend, `u:<w>` ascend
//! with scaled correction, `bv:<w>` fixed V(1,1) below the flexible
//! region, `cs` coarse solve, `n` no-op.
//!
//! Run with: cargo run --release --example flexible_cycle_dsl

use flexmg::cycle::{parse_dsl, reference_v, validate, Weight};
use flexmg::setup::{build_hierarchy, SetupParams};
use flexmg::solver::{solve, work_units};
use flexmg::sparse::{assemble_anisotropic_7pt, random_unit_vector, ProblemSpec};

fn main() -> flexmg::Result<()> {
    let spec = ProblemSpec::anisotropic_cube(24, 0.001);
    let a = assemble_anisotropic_7pt(&spec)?;
    let hierarchy = build_hierarchy(a, SetupParams::default())?;
    let depth = hierarchy.depth();
    println!("hierarchy: {:?}", hierarchy.level_sizes());

    // an asymmetric hand-written cycle: cheap pre-smooth, two nested
    // corrections with over-relaxed coarse sweeps, scaled ascents
    let text = "s:gsf:1.05 d s:jac:0.70 d s:gsf:1.30 s:gsf:1.30 u:1.10 s:gsb:0.95 u:1.05 s:gsb:1.00";
    let program = parse_dsl(text, 5, depth)?;
    println!("parsed:    {}", program.dsl());

    // the validator reports every violation with its step index
    let bad = [
        flexmg::cycle::Step::Descend,
        flexmg::cycle::Step::Smooth {
            kind: flexmg::cycle::SmootherKind::Jacobi,
            omega: Weight::ONE,
        },
    ];
    match validate(&bad, depth, 5) {
        Err(violations) => {
            println!("rejected [d s:jac:1.00]:");
            for v in &violations {
                println!("  {v}");
            }
        }
        Ok(()) => unreachable!("unbalanced program must not validate"),
    }

    let n = hierarchy.fine_matrix().nrows();
    let f = vec![0.0; n];
    let x0 = random_unit_vector(n, 11);
    let reference = reference_v(1, 1, 5, depth)?;
    for (name, p) in [("hand-written", &program), ("V(1,1)", &reference)] {
        let r = solve(&hierarchy, p, &f, &x0, 1e-8, 100)?;
        println!(
            "{name}: iters={} rho={:.4} work/cycle={:.2} total work={:.1}",
            r.iterations,
            r.conv_factor,
            work_units(p, &hierarchy),
            r.work_units
        );
    }
    Ok(())
}
