//! Subtree crossover and mutation over cycle-grammar derivation trees.

use crate::cycle::{
    grammar::{
        body_at, collect_refs, depth_above, level_of, replace_body, replace_step, step_at,
        NodeRef, NodeSym, MAX_TREE_DEPTH,
    },
    Grammar, SampleMethod, SeqNode, StepNode, Weight, MAX_PROGRAM_STEPS,
};
use rand::Rng;

fn offspring_ok(tree: &SeqNode) -> bool {
    !tree.steps.is_empty()
        && tree.depth() <= MAX_TREE_DEPTH
        && tree.step_count() <= MAX_PROGRAM_STEPS
}

/// Swap random subtrees rooted at a common level-indexed nonterminal.
/// Without a shared nonterminal below the roots the parents are returned
/// verbatim; offspring that exceed the depth or length bounds are also
/// replaced by parent copies.
pub fn crossover<R: Rng>(
    g1: &SeqNode,
    g2: &SeqNode,
    rng: &mut R,
) -> (SeqNode, SeqNode) {
    if g1 == g2 {
        // identical genetic material; exchanging it is a no-op
        return (g1.clone(), g2.clone());
    }
    let refs1 = collect_refs(g1);
    let refs2 = collect_refs(g2);
    // candidate swap points exclude the root sequence
    let syms = |refs: &[(NodeRef, NodeSym)]| -> Vec<NodeSym> {
        let mut s: Vec<NodeSym> = refs
            .iter()
            .filter(|(r, _)| !matches!(r, NodeRef::Body(p) if p.is_empty()))
            .map(|(_, s)| *s)
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let s1 = syms(&refs1);
    let s2 = syms(&refs2);
    let common: Vec<NodeSym> = s1.into_iter().filter(|s| s2.contains(s)).collect();
    if common.is_empty() {
        return (g1.clone(), g2.clone());
    }
    let sym = common[rng.gen_range(0..common.len())];
    let pick = |refs: &[(NodeRef, NodeSym)], rng: &mut R| -> NodeRef {
        let matching: Vec<&NodeRef> = refs
            .iter()
            .filter(|(r, s)| *s == sym && !matches!(r, NodeRef::Body(p) if p.is_empty()))
            .map(|(r, _)| r)
            .collect();
        matching[rng.gen_range(0..matching.len())].clone()
    };
    let r1 = pick(&refs1, rng);
    let r2 = pick(&refs2, rng);
    let mut c1 = g1.clone();
    let mut c2 = g2.clone();
    match (&r1, &r2) {
        (NodeRef::Step(p1), NodeRef::Step(p2)) => {
            let s1 = step_at(g1, p1).clone();
            let s2 = step_at(g2, p2).clone();
            replace_step(&mut c1, p1, s2);
            replace_step(&mut c2, p2, s1);
        }
        (NodeRef::Body(p1), NodeRef::Body(p2)) => {
            let b1 = body_at(g1, p1).clone();
            let b2 = body_at(g2, p2).clone();
            replace_body(&mut c1, p1, b2);
            replace_body(&mut c2, p2, b1);
        }
        _ => unreachable!("matching symbols imply matching ref kinds"),
    }
    let c1 = if offspring_ok(&c1) { c1 } else { g1.clone() };
    let c2 = if offspring_ok(&c2) { c2 } else { g2.clone() };
    (c1, c2)
}

/// Terminal slots a point mutation can touch.
enum TerminalSlot {
    Kind(Vec<usize>),
    SmoothOmega(Vec<usize>),
    AscendOmega(Vec<usize>),
    BaseOmega(Vec<usize>),
}

fn terminal_slots(tree: &SeqNode) -> Vec<TerminalSlot> {
    let mut out = Vec::new();
    for (r, _) in collect_refs(tree) {
        if let NodeRef::Step(p) = r {
            match step_at(tree, &p) {
                StepNode::Smooth(_, _) => {
                    out.push(TerminalSlot::Kind(p.clone()));
                    out.push(TerminalSlot::SmoothOmega(p));
                }
                StepNode::Cgc { .. } => out.push(TerminalSlot::AscendOmega(p)),
                StepNode::BaseV(_) => out.push(TerminalSlot::BaseOmega(p)),
                StepNode::NoOp | StepNode::CoarseSolve => {}
            }
        }
    }
    out
}

fn step_weight(w: Weight, rng: &mut impl Rng) -> Weight {
    w.step(rng.gen_bool(0.5))
}

/// Mutate a genotype: with even odds either regrow a random subtree from
/// its nonterminal (within the remaining depth budget) or perturb one
/// terminal (resample a smoother kind, or move a weight one grid step,
/// clamped at the ends).
pub fn mutate<R: Rng>(g: &SeqNode, grammar: &Grammar, rng: &mut R) -> SeqNode {
    let regrow = rng.gen_bool(0.5);
    if !regrow {
        if let Some(mutated) = point_mutation(g, grammar, rng) {
            return mutated;
        }
        // no terminals to perturb; fall through to regrow
    }
    regrow_mutation(g, grammar, rng)
}

fn point_mutation<R: Rng>(g: &SeqNode, grammar: &Grammar, rng: &mut R) -> Option<SeqNode> {
    let slots = terminal_slots(g);
    if slots.is_empty() {
        return None;
    }
    let slot = &slots[rng.gen_range(0..slots.len())];
    let mut out = g.clone();
    match slot {
        TerminalSlot::Kind(p) => {
            let kind = grammar.kinds[rng.gen_range(0..grammar.kinds.len())];
            if let StepNode::Smooth(_, w) = step_at(g, p) {
                replace_step(&mut out, p, StepNode::Smooth(kind, *w));
            }
        }
        TerminalSlot::SmoothOmega(p) => {
            if let StepNode::Smooth(k, w) = step_at(g, p) {
                replace_step(&mut out, p, StepNode::Smooth(*k, step_weight(*w, rng)));
            }
        }
        TerminalSlot::AscendOmega(p) => {
            if let StepNode::Cgc { omega, body } = step_at(g, p) {
                replace_step(
                    &mut out,
                    p,
                    StepNode::Cgc {
                        omega: step_weight(*omega, rng),
                        body: body.clone(),
                    },
                );
            }
        }
        TerminalSlot::BaseOmega(p) => {
            if let StepNode::BaseV(w) = step_at(g, p) {
                replace_step(&mut out, p, StepNode::BaseV(step_weight(*w, rng)));
            }
        }
    }
    Some(out)
}

fn regrow_mutation<R: Rng>(g: &SeqNode, grammar: &Grammar, rng: &mut R) -> SeqNode {
    let refs = collect_refs(g);
    let level_cap = grammar.max_level();
    for _attempt in 0..8 {
        let (r, _) = &refs[rng.gen_range(0..refs.len())];
        let budget = MAX_TREE_DEPTH.saturating_sub(depth_above(r)).max(1);
        let level = level_of(r);
        let outside = g.step_count()
            - match r {
                NodeRef::Step(p) => step_at(g, p).step_count(),
                NodeRef::Body(p) => body_at(g, p).step_count(),
            };
        let allowance = MAX_PROGRAM_STEPS.saturating_sub(outside);
        if allowance == 0 {
            continue;
        }
        let mut out = g.clone();
        match r {
            NodeRef::Step(p) => {
                let mut steps_left = allowance;
                let node = grammar.sample_step(
                    rng,
                    level,
                    budget.max(1),
                    SampleMethod::Grow,
                    &mut steps_left,
                    level_cap,
                );
                replace_step(&mut out, p, node);
            }
            NodeRef::Body(p) => {
                let mut steps_left = allowance;
                let root = p.is_empty();
                let body = grammar.sample_seq(
                    rng,
                    level,
                    budget.max(2),
                    SampleMethod::Grow,
                    &mut steps_left,
                    level_cap,
                    root,
                );
                if root && body.steps.is_empty() {
                    continue;
                }
                replace_body(&mut out, p, body);
            }
        }
        if offspring_ok(&out) {
            return out;
        }
    }
    g.clone()
}
