//! The cycle grammar and its derivation trees.
//!
//! Nonterminals are level-indexed: a sequence at level l expands to zero
//! or more level-l steps, and a coarse-grid-correction step wraps a
//! sequence one level deeper between its descend/ascend pair. Placement
//! rules for the base cycle and the coarse solve are baked into the
//! per-level choice sets, so every complete derivation decodes to a
//! program that passes validation.

use super::{validate, CycleProgram, SmootherKind, Step, Weight, MAX_PROGRAM_STEPS};
use rand::Rng;

/// Maximum derivation-tree depth for genotypes.
pub const MAX_TREE_DEPTH: usize = 17;

/// One derivation subtree for a single step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepNode {
    Smooth(SmootherKind, Weight),
    NoOp,
    Cgc { omega: Weight, body: SeqNode },
    BaseV(Weight),
    CoarseSolve,
}

/// A sequence nonterminal: the steps derived at one level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeqNode {
    pub steps: Vec<StepNode>,
}

impl SeqNode {
    /// Decoded step count of the whole subtree.
    pub fn step_count(&self) -> usize {
        self.steps.iter().map(StepNode::step_count).sum()
    }

    /// Derivation-tree depth (an empty sequence has depth 1).
    pub fn depth(&self) -> usize {
        1 + self.steps.iter().map(StepNode::depth).max().unwrap_or(0)
    }

    /// Flatten into the linear step list.
    pub fn decode(&self) -> Vec<Step> {
        let mut out = Vec::with_capacity(self.step_count());
        self.decode_into(&mut out);
        out
    }

    fn decode_into(&self, out: &mut Vec<Step>) {
        for s in &self.steps {
            match s {
                StepNode::Smooth(kind, omega) => out.push(Step::Smooth {
                    kind: *kind,
                    omega: *omega,
                }),
                StepNode::NoOp => out.push(Step::NoOp),
                StepNode::Cgc { omega, body } => {
                    out.push(Step::Descend);
                    body.decode_into(out);
                    out.push(Step::Ascend { omega: *omega });
                }
                StepNode::BaseV(omega) => out.push(Step::BaseV { omega: *omega }),
                StepNode::CoarseSolve => out.push(Step::CoarseSolve),
            }
        }
    }
}

impl SeqNode {
    /// Rebuild the (unique) derivation tree of a balanced step list.
    pub fn from_steps(steps: &[Step]) -> Option<SeqNode> {
        let mut stack: Vec<(Vec<StepNode>, ())> = vec![(Vec::new(), ())];
        for step in steps {
            match step {
                Step::Smooth { kind, omega } => stack
                    .last_mut()?
                    .0
                    .push(StepNode::Smooth(*kind, *omega)),
                Step::NoOp => stack.last_mut()?.0.push(StepNode::NoOp),
                Step::BaseV { omega } => stack.last_mut()?.0.push(StepNode::BaseV(*omega)),
                Step::CoarseSolve => stack.last_mut()?.0.push(StepNode::CoarseSolve),
                Step::Descend => stack.push((Vec::new(), ())),
                Step::Ascend { omega } => {
                    let (body, _) = stack.pop()?;
                    if stack.is_empty() {
                        return None;
                    }
                    stack.last_mut()?.0.push(StepNode::Cgc {
                        omega: *omega,
                        body: SeqNode { steps: body },
                    });
                }
            }
        }
        if stack.len() != 1 {
            return None;
        }
        Some(SeqNode {
            steps: stack.pop().unwrap().0,
        })
    }
}

impl StepNode {
    pub fn step_count(&self) -> usize {
        match self {
            StepNode::Cgc { body, .. } => 2 + body.step_count(),
            _ => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            StepNode::Cgc { body, .. } => 1 + body.depth(),
            _ => 1,
        }
    }
}

/// Generation method for one tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Grow,
    Full,
}

/// Step-count and level-depth limits for generation.
#[derive(Debug, Clone, Copy)]
pub struct GenLimits {
    pub max_steps: usize,
    /// Maximum number of levels the program may touch (≤ flex_levels).
    pub max_depth: usize,
}

impl Default for GenLimits {
    fn default() -> Self {
        Self {
            max_steps: MAX_PROGRAM_STEPS,
            max_depth: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Choice {
    Smooth,
    NoOp,
    Cgc,
    BaseV,
    CoarseSolve,
}

/// The cycle grammar for one hierarchy, with optionally restricted
/// terminal sets (used by the enumeration cross-checks).
#[derive(Debug, Clone)]
pub struct Grammar {
    pub flex_levels: usize,
    pub hierarchy_depth: usize,
    pub kinds: Vec<SmootherKind>,
    pub weights: Vec<Weight>,
}

impl Grammar {
    /// Full terminal sets: all smoothers, the whole weight grid.
    pub fn full(flex_levels: usize, hierarchy_depth: usize) -> Self {
        Self {
            flex_levels,
            hierarchy_depth,
            kinds: SmootherKind::ALL.to_vec(),
            weights: Weight::grid().collect(),
        }
    }

    /// Deepest level the flexible region may reach (0-indexed).
    pub fn max_level(&self) -> usize {
        self.flex_levels.min(self.hierarchy_depth) - 1
    }

    fn base_v_legal(&self, level: usize) -> bool {
        self.hierarchy_depth > self.flex_levels && level + 1 == self.flex_levels
    }

    fn coarse_solve_legal(&self, level: usize) -> bool {
        self.hierarchy_depth <= self.flex_levels && level + 1 == self.hierarchy_depth
    }

    fn choices(&self, level: usize, level_cap: usize, steps_left: usize, budget: usize) -> Vec<Choice> {
        let mut opts = vec![Choice::Smooth, Choice::NoOp];
        if level < level_cap && steps_left >= 2 && budget >= 2 {
            opts.push(Choice::Cgc);
        }
        if self.base_v_legal(level) {
            opts.push(Choice::BaseV);
        }
        if self.coarse_solve_legal(level) {
            opts.push(Choice::CoarseSolve);
        }
        opts
    }

    fn random_kind<R: Rng>(&self, rng: &mut R) -> SmootherKind {
        self.kinds[rng.gen_range(0..self.kinds.len())]
    }

    fn random_weight<R: Rng>(&self, rng: &mut R) -> Weight {
        self.weights[rng.gen_range(0..self.weights.len())]
    }

    /// Sample a sequence at `level` with derivation depth ≤ `budget`,
    /// spending from the shared step budget.
    pub fn sample_seq<R: Rng>(
        &self,
        rng: &mut R,
        level: usize,
        budget: usize,
        method: SampleMethod,
        steps_left: &mut usize,
        level_cap: usize,
        force_nonempty: bool,
    ) -> SeqNode {
        let mut steps = Vec::new();
        loop {
            if *steps_left == 0 || budget < 2 {
                break;
            }
            if !(force_nonempty && steps.is_empty()) {
                let p_continue = match method {
                    SampleMethod::Full => 0.7,
                    SampleMethod::Grow => 0.45,
                };
                if !rng.gen_bool(p_continue) {
                    break;
                }
            }
            steps.push(self.sample_step(rng, level, budget - 1, method, steps_left, level_cap));
        }
        SeqNode { steps }
    }

    /// Sample one step at `level` with derivation depth ≤ `budget`.
    pub fn sample_step<R: Rng>(
        &self,
        rng: &mut R,
        level: usize,
        budget: usize,
        method: SampleMethod,
        steps_left: &mut usize,
        level_cap: usize,
    ) -> StepNode {
        debug_assert!(*steps_left >= 1 && budget >= 1);
        let opts = self.choices(level, level_cap, *steps_left, budget);
        let pick = if method == SampleMethod::Full
            && opts.contains(&Choice::Cgc)
            && rng.gen_bool(0.5)
        {
            Choice::Cgc
        } else {
            opts[rng.gen_range(0..opts.len())]
        };
        match pick {
            Choice::Smooth => {
                *steps_left -= 1;
                StepNode::Smooth(self.random_kind(rng), self.random_weight(rng))
            }
            Choice::NoOp => {
                *steps_left -= 1;
                StepNode::NoOp
            }
            Choice::BaseV => {
                *steps_left -= 1;
                StepNode::BaseV(self.random_weight(rng))
            }
            Choice::CoarseSolve => {
                *steps_left -= 1;
                StepNode::CoarseSolve
            }
            Choice::Cgc => {
                *steps_left -= 2;
                let body =
                    self.sample_seq(rng, level + 1, budget - 1, method, steps_left, level_cap, false);
                StepNode::Cgc {
                    omega: self.random_weight(rng),
                    body,
                }
            }
        }
    }

    /// Sample a whole genotype with one ramp depth and method.
    pub fn sample_tree<R: Rng>(
        &self,
        rng: &mut R,
        ramp_depth: usize,
        method: SampleMethod,
        limits: GenLimits,
    ) -> SeqNode {
        let level_cap = self.max_level().min(limits.max_depth.saturating_sub(1));
        let mut steps_left = limits.max_steps.min(MAX_PROGRAM_STEPS).max(1);
        self.sample_seq(
            rng,
            0,
            ramp_depth.max(2),
            method,
            &mut steps_left,
            level_cap,
            true,
        )
    }

    /// Exhaustively enumerate every derivable program of at most
    /// `max_steps` decoded steps, walking all derivation choices. Meant
    /// for small bounds; the decoded programs are returned in a
    /// deterministic order without duplicates (the grammar is
    /// unambiguous).
    pub fn reachable_programs(&self, max_steps: usize) -> Vec<Vec<Step>> {
        let level_cap = self.max_level();
        let mut out = Vec::new();
        for seq in self.enum_seqs(0, max_steps, level_cap) {
            if !seq.steps.is_empty() {
                out.push(seq.decode());
            }
        }
        out
    }

    fn enum_seqs(&self, level: usize, budget: usize, level_cap: usize) -> Vec<SeqNode> {
        let mut results = vec![SeqNode::default()];
        for (first, cost) in self.enum_steps(level, budget, level_cap) {
            for rest in self.enum_seqs(level, budget - cost, level_cap) {
                let mut steps = vec![first.clone()];
                steps.extend(rest.steps);
                results.push(SeqNode { steps });
            }
        }
        results
    }

    fn enum_steps(&self, level: usize, budget: usize, level_cap: usize) -> Vec<(StepNode, usize)> {
        let mut out = Vec::new();
        if budget == 0 {
            return out;
        }
        for kind in &self.kinds {
            for w in &self.weights {
                out.push((StepNode::Smooth(*kind, *w), 1));
            }
        }
        out.push((StepNode::NoOp, 1));
        if self.base_v_legal(level) {
            for w in &self.weights {
                out.push((StepNode::BaseV(*w), 1));
            }
        }
        if self.coarse_solve_legal(level) {
            out.push((StepNode::CoarseSolve, 1));
        }
        if level < level_cap && budget >= 2 {
            for body in self.enum_seqs(level + 1, budget - 2, level_cap) {
                let cost = 2 + body.step_count();
                for w in &self.weights {
                    out.push((
                        StepNode::Cgc {
                            omega: *w,
                            body: body.clone(),
                        },
                        cost,
                    ));
                }
            }
        }
        out
    }
}

/// Generate one random valid program: ramped half-and-half over tree
/// depths 2–17, uniform terminal choices from the grammar's sets.
pub fn generate<R: Rng>(grammar: &Grammar, rng: &mut R, limits: GenLimits) -> CycleProgram {
    loop {
        let ramp_depth = rng.gen_range(2..=MAX_TREE_DEPTH);
        let method = if rng.gen_bool(0.5) {
            SampleMethod::Full
        } else {
            SampleMethod::Grow
        };
        let tree = grammar.sample_tree(rng, ramp_depth, method, limits);
        if tree.steps.is_empty() {
            continue;
        }
        let steps = tree.decode();
        debug_assert!(validate(&steps, grammar.hierarchy_depth, grammar.flex_levels).is_ok());
        return CycleProgram::new(steps, grammar.flex_levels, grammar.hierarchy_depth)
            .expect("grammar output validates");
    }
}

/// Address of a node inside a derivation tree. Path elements index into
/// successive sequence nodes; each hop after the first passes through a
/// Cgc body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeRef {
    /// The step node at the path (path must be non-empty).
    Step(Vec<usize>),
    /// The body sequence of the Cgc step at the path; the empty path is
    /// the root sequence.
    Body(Vec<usize>),
}

/// Level-indexed nonterminal identity, the unit of crossover
/// compatibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeSym {
    Seq(usize),
    Step(usize),
}

fn walk<'a>(root: &'a SeqNode, path: &[usize]) -> (&'a SeqNode, Option<&'a StepNode>) {
    let mut seq: &'a SeqNode = root;
    let mut step: Option<&'a StepNode> = None;
    for (hop, &idx) in path.iter().enumerate() {
        if hop > 0 {
            match step.expect("path passes through steps") {
                StepNode::Cgc { body, .. } => seq = body,
                _ => panic!("path descends into a leaf step"),
            }
        }
        step = Some(&seq.steps[idx]);
    }
    (seq, step)
}

/// The step node a `NodeRef::Step` path points at.
pub fn step_at<'a>(root: &'a SeqNode, path: &[usize]) -> &'a StepNode {
    walk(root, path).1.expect("step path is non-empty")
}

/// The sequence node a `NodeRef::Body` path points at.
pub fn body_at<'a>(root: &'a SeqNode, path: &[usize]) -> &'a SeqNode {
    if path.is_empty() {
        return root;
    }
    match step_at(root, path) {
        StepNode::Cgc { body, .. } => body,
        _ => panic!("body path must end at a Cgc step"),
    }
}

fn step_at_mut<'a>(root: &'a mut SeqNode, path: &[usize]) -> &'a mut StepNode {
    let (last, prefix) = path.split_last().expect("step path is non-empty");
    let mut seq = root;
    for &idx in prefix {
        match &mut seq.steps[idx] {
            StepNode::Cgc { body, .. } => seq = body,
            _ => panic!("path descends into a leaf step"),
        }
    }
    &mut seq.steps[*last]
}

/// Replace the subtree a ref points at. Step refs take step nodes, body
/// refs take sequence nodes.
pub fn replace_step(root: &mut SeqNode, path: &[usize], node: StepNode) {
    *step_at_mut(root, path) = node;
}

pub fn replace_body(root: &mut SeqNode, path: &[usize], seq: SeqNode) {
    if path.is_empty() {
        *root = seq;
        return;
    }
    match step_at_mut(root, path) {
        StepNode::Cgc { body, .. } => *body = seq,
        _ => panic!("body path must end at a Cgc step"),
    }
}

/// All nodes of a tree with their nonterminal symbols, root included.
/// A step at path length k sits at level k−1; a body at path length k
/// sits at level k.
pub fn collect_refs(root: &SeqNode) -> Vec<(NodeRef, NodeSym)> {
    let mut out = vec![(NodeRef::Body(Vec::new()), NodeSym::Seq(0))];
    collect_refs_rec(root, &mut Vec::new(), 0, &mut out);
    out
}

fn collect_refs_rec(
    seq: &SeqNode,
    path: &mut Vec<usize>,
    level: usize,
    out: &mut Vec<(NodeRef, NodeSym)>,
) {
    for (i, step) in seq.steps.iter().enumerate() {
        path.push(i);
        out.push((NodeRef::Step(path.clone()), NodeSym::Step(level)));
        if let StepNode::Cgc { body, .. } = step {
            out.push((NodeRef::Body(path.clone()), NodeSym::Seq(level + 1)));
            collect_refs_rec(body, path, level + 1, out);
        }
        path.pop();
    }
}

/// Derivation-tree depth consumed by the ancestors of a node, so that
/// `MAX_TREE_DEPTH − depth_above` is the budget left for a regrown
/// subtree.
pub fn depth_above(node: &NodeRef) -> usize {
    match node {
        NodeRef::Step(p) => 2 * p.len() - 1,
        NodeRef::Body(p) => 2 * p.len(),
    }
}

/// Level a node lives at.
pub fn level_of(node: &NodeRef) -> usize {
    match node {
        NodeRef::Step(p) => p.len() - 1,
        NodeRef::Body(p) => p.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn generated_programs_validate() {
        let grammar = Grammar::full(5, 7);
        let mut rng = stream(1, "gen-test");
        for _ in 0..500 {
            let p = generate(&grammar, &mut rng, GenLimits::default());
            assert!(validate(p.steps(), 7, 5).is_ok());
            assert!(p.len() <= MAX_PROGRAM_STEPS);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let grammar = Grammar::full(5, 6);
        let a = generate(&grammar, &mut stream(9, "s"), GenLimits::default());
        let b = generate(&grammar, &mut stream(9, "s"), GenLimits::default());
        assert_eq!(a, b);
    }

    #[test]
    fn single_step_limit_yields_unit_programs() {
        // one-level hierarchy: the only unit productions are a smoothing
        // step, a no-op, or the direct solve
        let grammar = Grammar::full(5, 1);
        let mut rng = stream(3, "unit");
        let limits = GenLimits {
            max_steps: 1,
            max_depth: usize::MAX,
        };
        for _ in 0..200 {
            let p = generate(&grammar, &mut rng, limits);
            assert_eq!(p.len(), 1);
            assert!(matches!(
                p.steps()[0],
                Step::Smooth { .. } | Step::NoOp | Step::CoarseSolve
            ));
        }
    }

    #[test]
    fn reachable_includes_bare_cgc() {
        let mut grammar = Grammar::full(5, 2);
        grammar.kinds = vec![SmootherKind::GsForward];
        grammar.weights = vec![Weight::ONE];
        let programs = grammar.reachable_programs(2);
        let bare = vec![Step::Descend, Step::Ascend { omega: Weight::ONE }];
        assert!(programs.contains(&bare));
    }

    #[test]
    fn reachable_one_step_set() {
        let mut grammar = Grammar::full(5, 1);
        grammar.kinds = vec![SmootherKind::Jacobi];
        grammar.weights = vec![Weight::ONE];
        let mut programs = grammar.reachable_programs(1);
        programs.sort_by_key(|p| format!("{p:?}"));
        assert_eq!(programs.len(), 3);
    }

    #[test]
    fn tree_surgery_roundtrip() {
        let grammar = Grammar::full(5, 7);
        let mut rng = stream(11, "surgery");
        for _ in 0..50 {
            let tree = grammar.sample_tree(&mut rng, 9, SampleMethod::Grow, GenLimits::default());
            if tree.steps.is_empty() {
                continue;
            }
            let refs = collect_refs(&tree);
            for (r, sym) in &refs {
                match r {
                    NodeRef::Step(p) => {
                        let node = step_at(&tree, p).clone();
                        assert_eq!(*sym, NodeSym::Step(level_of(r)));
                        let mut copy = tree.clone();
                        replace_step(&mut copy, p, node);
                        assert_eq!(copy, tree);
                    }
                    NodeRef::Body(p) => {
                        let body = body_at(&tree, p).clone();
                        assert_eq!(*sym, NodeSym::Seq(level_of(r)));
                        let mut copy = tree.clone();
                        replace_body(&mut copy, p, body);
                        assert_eq!(copy, tree);
                    }
                }
            }
        }
    }

    #[test]
    fn from_steps_inverts_decode() {
        let grammar = Grammar::full(5, 7);
        let mut rng = stream(13, "from-steps");
        for _ in 0..200 {
            let tree = grammar.sample_tree(&mut rng, 10, SampleMethod::Grow, GenLimits::default());
            let steps = tree.decode();
            if steps.is_empty() {
                continue;
            }
            let rebuilt = SeqNode::from_steps(&steps).unwrap();
            assert_eq!(rebuilt, tree);
        }
    }

    #[test]
    fn depth_accounting_matches_collect() {
        let body = SeqNode {
            steps: vec![StepNode::NoOp],
        };
        let tree = SeqNode {
            steps: vec![StepNode::Cgc {
                omega: Weight::ONE,
                body,
            }],
        };
        // root seq (1) + cgc (2) + body seq (3) + noop (4)
        assert_eq!(tree.depth(), 4);
        assert_eq!(tree.step_count(), 3);
        let refs = collect_refs(&tree);
        assert_eq!(refs.len(), 4);
    }
}
