//! Fixed AMG setup phase: strength of connection, PMIS coarse/fine
//! splitting, direct interpolation, and Galerkin coarse operators.
//!
//! The hierarchy built here stays fixed for the lifetime of a problem;
//! cycle programs only vary the solve phase. Setup is deterministic for
//! a given matrix and parameter set (including the coarsening seed), so
//! hierarchies are reproducible across runs and platforms.

use crate::error::{Error, Result};
use crate::rng;
use crate::sparse::{dense_lu_factor, CsrMatrix, DenseFactor};
use serde::Serialize;

/// Knobs for the setup phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetupParams {
    /// Strength-of-connection threshold θ ∈ (0, 1).
    pub strength_threshold: f64,
    pub max_levels: usize,
    /// Stop coarsening once a level has at most this many unknowns.
    pub coarse_max_size: usize,
    /// Seed for the PMIS tie-breaking weights.
    pub coarsen_seed: u64,
}

impl Default for SetupParams {
    fn default() -> Self {
        Self {
            strength_threshold: 0.25,
            max_levels: 10,
            coarse_max_size: 50,
            coarsen_seed: 0,
        }
    }
}

impl SetupParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.strength_threshold > 0.0 && self.strength_threshold < 1.0) {
            return Err(Error::Setup(format!(
                "strength threshold must lie in (0,1), got {}",
                self.strength_threshold
            )));
        }
        if self.coarse_max_size < 1 {
            return Err(Error::Setup("coarse_max_size must be at least 1".into()));
        }
        if self.max_levels < 1 {
            return Err(Error::Setup("max_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Directed strong-influence graph: edge i→j iff j ≠ i and
/// −a_ij ≥ θ · max_{k≠i}(−a_ik). Rows whose off-diagonal maximum of −a_ik
/// is not positive have no strong edges.
#[derive(Debug, Clone)]
pub struct StrengthGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl StrengthGraph {
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }
}

pub fn strength_graph(a: &CsrMatrix, theta: f64) -> StrengthGraph {
    let n = a.nrows();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut targets = Vec::new();
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut row_max = 0.0f64;
        for (c, v) in cols.iter().zip(vals) {
            if *c != i {
                row_max = row_max.max(-v);
            }
        }
        if row_max > 0.0 {
            let cut = theta * row_max;
            for (c, v) in cols.iter().zip(vals) {
                if *c != i && -v >= cut {
                    targets.push(*c);
                }
            }
        }
        offsets.push(targets.len());
    }
    StrengthGraph { offsets, targets }
}

/// Per-point coarse/fine label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfLabel {
    Coarse,
    Fine,
}

/// Result of the coarse/fine splitting.
#[derive(Debug, Clone)]
pub struct CfSplitting {
    pub labels: Vec<CfLabel>,
}

impl CfSplitting {
    pub fn num_coarse(&self) -> usize {
        self.labels.iter().filter(|l| **l == CfLabel::Coarse).count()
    }

    /// Coarse index for each point (usize::MAX for F points), numbering
    /// C points in ascending fine order.
    pub fn coarse_index_map(&self) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.labels.len()];
        let mut next = 0;
        for (i, l) in self.labels.iter().enumerate() {
            if *l == CfLabel::Coarse {
                map[i] = next;
                next += 1;
            }
        }
        map
    }
}

/// PMIS splitting. The first pass selects C as a maximal independent
/// set in the symmetrized strength graph, greedily under deterministic
/// weights w_i = deg(i) + hash(seed, i) ∈ [0,1). Points with no strong
/// connections in either direction become F and take no part in the
/// selection. The second pass repairs interpolability: any F point that
/// strongly depends on at least one point but on no C point joins the
/// coarse set itself (this can locally relax strict independence on the
/// unsymmetric strength graphs of Galerkin levels; without it such rows
/// would receive no coarse correction at all).
pub fn pmis_coarsen(s: &StrengthGraph, seed: u64) -> CfSplitting {
    let n = s.n();
    // symmetrize
    let mut sym: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in s.neighbors(i) {
            sym[i].push(j);
            sym[j].push(i);
        }
    }
    for adj in &mut sym {
        adj.sort_unstable();
        adj.dedup();
    }

    let weights: Vec<f64> = (0..n)
        .map(|i| sym[i].len() as f64 + rng::hash_unit(seed, i))
        .collect();

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Undecided,
        C,
        F,
    }
    let mut state = vec![State::Undecided; n];
    for i in 0..n {
        if sym[i].is_empty() {
            state[i] = State::F;
        }
    }

    // greedy by decreasing weight == fixpoint of the local-max iteration
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
    for &i in &order {
        if state[i] != State::Undecided {
            continue;
        }
        state[i] = State::C;
        for &j in &sym[i] {
            if state[j] == State::Undecided {
                state[j] = State::F;
            }
        }
    }

    // second pass: an F point that strongly depends on some point but on
    // no C point becomes C, in ascending order so later points already
    // see earlier promotions
    for i in 0..n {
        if state[i] == State::F && s.neighbors(i).iter().next().is_some() {
            let covered = s.neighbors(i).iter().any(|&j| state[j] == State::C);
            if !covered {
                state[i] = State::C;
            }
        }
    }

    CfSplitting {
        labels: state
            .into_iter()
            .map(|s| match s {
                State::C => CfLabel::Coarse,
                _ => CfLabel::Fine,
            })
            .collect(),
    }
}

/// Classical direct interpolation. C rows select their coarse unknown;
/// an F row i distributes over its strong coarse neighborhood C_i with
/// w_ij = −(a_ij / a_ii) · (Σ_{k≠i} a_ik / Σ_{k∈C_i} a_ik).
/// F rows with no strong C neighbor (or a vanishing C-sum) degenerate to
/// zero rows; their count is returned alongside P.
pub fn direct_interpolation(
    a: &CsrMatrix,
    s: &StrengthGraph,
    splitting: &CfSplitting,
) -> Result<(CsrMatrix, usize)> {
    let n = a.nrows();
    let coarse_map = splitting.coarse_index_map();
    let ncoarse = splitting.num_coarse();
    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0usize);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    let mut degenerate_rows = 0usize;

    for i in 0..n {
        match splitting.labels[i] {
            CfLabel::Coarse => {
                col_indices.push(coarse_map[i]);
                values.push(1.0);
            }
            CfLabel::Fine => {
                let (cols, vals) = a.row(i);
                let strong = s.neighbors(i);
                let mut a_ii = 0.0;
                let mut offdiag_sum = 0.0;
                let mut coarse_sum = 0.0;
                let mut row_entries: Vec<(usize, f64)> = Vec::new();
                for (c, v) in cols.iter().zip(vals) {
                    if *c == i {
                        a_ii = *v;
                        continue;
                    }
                    offdiag_sum += *v;
                    if splitting.labels[*c] == CfLabel::Coarse && strong.binary_search(c).is_ok() {
                        coarse_sum += *v;
                        row_entries.push((coarse_map[*c], *v));
                    }
                }
                if a_ii == 0.0 {
                    return Err(Error::Setup(format!("zero diagonal in row {i}")));
                }
                if row_entries.is_empty() || coarse_sum == 0.0 {
                    degenerate_rows += 1;
                } else {
                    let alpha = offdiag_sum / coarse_sum;
                    row_entries.sort_unstable_by_key(|(c, _)| *c);
                    for (c, a_ij) in row_entries {
                        col_indices.push(c);
                        values.push(-(a_ij / a_ii) * alpha);
                    }
                }
            }
        }
        row_offsets.push(col_indices.len());
    }
    let p = CsrMatrix::from_parts(n, ncoarse, row_offsets, col_indices, values)?;
    Ok((p, degenerate_rows))
}

/// Galerkin coarse operator A_c = Pᵀ·A·P.
pub fn galerkin(a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    let ap = a.spgemm(p)?;
    p.transpose().spgemm(&ap)
}

/// One level of the hierarchy. `p`/`r` are absent on the coarsest level.
#[derive(Debug)]
pub struct Level {
    pub a: CsrMatrix,
    pub p: Option<CsrMatrix>,
    pub r: Option<CsrMatrix>,
}

/// Immutable multilevel hierarchy with a dense factorization of the
/// coarsest operator. Shared read-only by concurrent cycle evaluations;
/// work vectors live in per-evaluation contexts, not here.
#[derive(Debug)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse_factor: DenseFactor,
    params: SetupParams,
    degenerate_rows: usize,
}

/// Per-level record in the JSON summary.
#[derive(Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub unknowns: usize,
    pub nnz: usize,
}

#[derive(Debug, Serialize)]
pub struct HierarchySummary {
    pub levels: Vec<LevelSummary>,
    pub operator_complexity: f64,
    pub degenerate_interpolation_rows: usize,
}

impl AmgHierarchy {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn matrix(&self, l: usize) -> &CsrMatrix {
        &self.levels[l].a
    }

    pub fn fine_matrix(&self) -> &CsrMatrix {
        &self.levels[0].a
    }

    pub fn coarse_factor(&self) -> &DenseFactor {
        &self.coarse_factor
    }

    pub fn params(&self) -> &SetupParams {
        &self.params
    }

    /// Count of F rows that fell back to zero interpolation, summed over
    /// all levels.
    pub fn degenerate_rows(&self) -> usize {
        self.degenerate_rows
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.nrows()).collect()
    }

    pub fn summary(&self) -> HierarchySummary {
        let nnz0 = self.levels[0].a.nnz() as f64;
        let levels: Vec<LevelSummary> = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| LevelSummary {
                level: i,
                unknowns: l.a.nrows(),
                nnz: l.a.nnz(),
            })
            .collect();
        let operator_complexity = levels.iter().map(|l| l.nnz as f64).sum::<f64>() / nnz0;
        HierarchySummary {
            levels,
            operator_complexity,
            degenerate_interpolation_rows: self.degenerate_rows,
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

/// Build the fixed hierarchy: repeat strength → PMIS → interpolation →
/// Galerkin until the level is small enough or `max_levels` is reached,
/// then factorize the coarsest operator densely.
pub fn build_hierarchy(a: CsrMatrix, params: SetupParams) -> Result<AmgHierarchy> {
    params.validate()?;
    if a.nrows() != a.ncols() {
        return Err(Error::Setup(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut levels: Vec<Level> = Vec::new();
    let mut current = a;
    let mut degenerate_rows = 0usize;
    loop {
        let n = current.nrows();
        let at_capacity = levels.len() + 1 >= params.max_levels;
        if n <= params.coarse_max_size || at_capacity {
            levels.push(Level {
                a: current,
                p: None,
                r: None,
            });
            break;
        }
        let s = strength_graph(&current, params.strength_threshold);
        let level_seed = rng::splitmix64(params.coarsen_seed ^ (levels.len() as u64 + 1));
        let splitting = pmis_coarsen(&s, level_seed);
        let ncoarse = splitting.num_coarse();
        if ncoarse == 0 || ncoarse >= n {
            return Err(Error::Setup(format!(
                "coarsening stalled on level {} ({} of {} points selected)",
                levels.len(),
                ncoarse,
                n
            )));
        }
        let (p, degenerate) = direct_interpolation(&current, &s, &splitting)?;
        degenerate_rows += degenerate;
        let r = p.transpose();
        let coarse = galerkin(&current, &p)?;
        levels.push(Level {
            a: current,
            p: Some(p),
            r: Some(r),
        });
        current = coarse;
    }
    let coarsest = levels.last().unwrap().a.to_dense();
    let coarse_factor = dense_lu_factor(&coarsest)?;
    Ok(AmgHierarchy {
        levels,
        coarse_factor,
        params,
        degenerate_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{assemble_anisotropic_7pt, ProblemSpec};

    fn poisson1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn strength_1d_poisson_both_neighbors() {
        let a = poisson1d(5);
        let s = strength_graph(&a, 0.25);
        assert_eq!(s.neighbors(2), &[1, 3]);
        assert_eq!(s.neighbors(0), &[1]);
    }

    #[test]
    fn strength_anisotropic_drops_weak_direction() {
        let spec = ProblemSpec::new(3, 3, 3, 0.001, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let s = strength_graph(&a, 0.25);
        let center = 1 + 3 * (1 + 3 * 1);
        let neigh = s.neighbors(center);
        // x-neighbors are center±1; y/z neighbors are ±3 and ±9
        assert!(!neigh.contains(&(center - 1)));
        assert!(!neigh.contains(&(center + 1)));
        assert_eq!(neigh.len(), 4);
    }

    #[test]
    fn strength_diagonal_matrix_is_empty() {
        let a = CsrMatrix::identity(4);
        let s = strength_graph(&a, 0.25);
        assert_eq!(s.edge_count(), 0);
    }

    #[test]
    fn pmis_all_fine_for_diagonal() {
        let a = CsrMatrix::identity(6);
        let s = strength_graph(&a, 0.25);
        let split = pmis_coarsen(&s, 1);
        assert_eq!(split.num_coarse(), 0);
        assert!(split.labels.iter().all(|l| *l == CfLabel::Fine));
    }

    fn assert_mis(sym_edges: &[(usize, usize)], labels: &[CfLabel]) {
        // independence
        for &(u, v) in sym_edges {
            assert!(
                !(labels[u] == CfLabel::Coarse && labels[v] == CfLabel::Coarse),
                "C points {u},{v} are adjacent"
            );
        }
        // maximality: every non-isolated F point has a C neighbor
        let n = labels.len();
        for i in 0..n {
            if labels[i] == CfLabel::Fine {
                let neigh: Vec<usize> = sym_edges
                    .iter()
                    .filter_map(|&(u, v)| {
                        if u == i {
                            Some(v)
                        } else if v == i {
                            Some(u)
                        } else {
                            None
                        }
                    })
                    .collect();
                if !neigh.is_empty() {
                    assert!(
                        neigh.iter().any(|&j| labels[j] == CfLabel::Coarse),
                        "F point {i} has no C neighbor"
                    );
                }
            }
        }
    }

    #[test]
    fn pmis_path_graph_middle_wins_when_weighted_highest() {
        // path 0-1-2: the middle node has degree 2 and always the top weight
        let a = poisson1d(3);
        let s = strength_graph(&a, 0.25);
        for seed in 0..20 {
            let split = pmis_coarsen(&s, seed);
            assert_eq!(
                split.labels,
                vec![CfLabel::Fine, CfLabel::Coarse, CfLabel::Fine]
            );
        }
    }

    #[test]
    fn pmis_1d_poisson_is_maximal_independent_set() {
        let a = poisson1d(7);
        let s = strength_graph(&a, 0.25);
        let edges: Vec<(usize, usize)> = (0..6).map(|i| (i, i + 1)).collect();
        for seed in [0u64, 1, 42, 9999] {
            let split = pmis_coarsen(&s, seed);
            assert_mis(&edges, &split.labels);
        }
    }

    #[test]
    fn interpolation_all_coarse_is_identity() {
        let a = poisson1d(4);
        let s = strength_graph(&a, 0.25);
        let split = CfSplitting {
            labels: vec![CfLabel::Coarse; 4],
        };
        let (p, warn) = direct_interpolation(&a, &s, &split).unwrap();
        assert_eq!(warn, 0);
        assert_eq!(p, CsrMatrix::identity(4));
    }

    #[test]
    fn interpolation_1d_poisson_n3_weights() {
        // stated formula with a_ii = 2, a_ij = −1, Σ_{k≠i} a_ik = −1 at the
        // boundary-adjacent rows gives w = −(−1/2)·(−1/−1) = 1/2
        let a = poisson1d(3);
        let s = strength_graph(&a, 0.25);
        let split = CfSplitting {
            labels: vec![CfLabel::Fine, CfLabel::Coarse, CfLabel::Fine],
        };
        let (p, warn) = direct_interpolation(&a, &s, &split).unwrap();
        assert_eq!(warn, 0);
        assert_eq!(p.nrows(), 3);
        assert_eq!(p.ncols(), 1);
        assert!((p.get(0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(p.get(1, 0), 1.0);
        assert!((p.get(2, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interpolation_preserves_constants_on_zero_sum_rows() {
        let spec = ProblemSpec::new(6, 6, 6, 0.001, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let s = strength_graph(&a, 0.25);
        let split = pmis_coarsen(&s, 3);
        let (p, _) = direct_interpolation(&a, &s, &split).unwrap();
        for i in 0..a.nrows() {
            if split.labels[i] == CfLabel::Fine {
                let (row_cols, row_vals) = a.row(i);
                let sum: f64 = row_cols
                    .iter()
                    .zip(row_vals)
                    .map(|(_, v)| *v)
                    .sum();
                if sum.abs() < 1e-14 {
                    let (_, wvals) = p.row(i);
                    if !wvals.is_empty() {
                        let wsum: f64 = wvals.iter().sum();
                        assert!((wsum - 1.0).abs() <= 1e-12, "row {i}: {wsum}");
                    }
                }
            }
        }
    }

    #[test]
    fn galerkin_with_identity_is_a() {
        let a = poisson1d(5);
        let ac = galerkin(&a, &CsrMatrix::identity(5)).unwrap();
        assert_eq!(ac, a);
    }

    #[test]
    fn galerkin_with_ones_column_sums_entries() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -0.5), (1, 1, 3.0)])
            .unwrap();
        let p = CsrMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let ac = galerkin(&a, &p).unwrap();
        assert_eq!(ac.nrows(), 1);
        assert!((ac.get(0, 0) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn small_matrix_yields_single_level() {
        let a = poisson1d(10);
        let h = build_hierarchy(a, SetupParams::default()).unwrap();
        assert_eq!(h.depth(), 1);
        assert!(h.level(0).p.is_none());
    }

    #[test]
    fn hierarchy_sizes_strictly_decrease() {
        let spec = ProblemSpec::new(16, 16, 16, 1.0, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let h = build_hierarchy(a, SetupParams::default()).unwrap();
        let sizes = h.level_sizes();
        assert!(sizes.windows(2).all(|w| w[1] < w[0]), "{sizes:?}");
        assert!(*sizes.last().unwrap() <= 50);
    }

    #[test]
    fn hierarchy_is_deterministic() {
        let spec = ProblemSpec::new(8, 8, 8, 0.001, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let h1 = build_hierarchy(a.clone(), SetupParams::default()).unwrap();
        let h2 = build_hierarchy(a, SetupParams::default()).unwrap();
        assert_eq!(h1.level_sizes(), h2.level_sizes());
        for l in 0..h1.depth() {
            assert_eq!(h1.matrix(l), h2.matrix(l));
        }
    }

    #[test]
    fn coarse_operators_stay_symmetric() {
        let spec = ProblemSpec::new(8, 8, 8, 0.001, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let h = build_hierarchy(a, SetupParams::default()).unwrap();
        for l in 0..h.depth() {
            assert!(h.matrix(l).is_symmetric(1e-12), "level {l} not symmetric");
        }
    }

    #[test]
    fn galerkin_chain_matches_dense_triple_product() {
        let spec = ProblemSpec::new(5, 5, 5, 0.001, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let h = build_hierarchy(a, SetupParams::default()).unwrap();
        for l in 0..h.depth() - 1 {
            let al = h.matrix(l);
            if al.nrows() > 200 {
                continue;
            }
            let p = h.level(l).p.as_ref().unwrap().to_dense();
            let da = al.to_dense();
            let expected = p.transpose().matmul(&da.matmul(&p));
            let got = h.matrix(l + 1).to_dense();
            let scale = da.norm_inf().max(1.0);
            assert!(got.max_abs_diff(&expected) <= 1e-12 * scale);
        }
    }

    #[test]
    fn c_rows_of_p_are_unit_selections() {
        let spec = ProblemSpec::new(6, 6, 1, 1.0, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let s = strength_graph(&a, 0.25);
        let split = pmis_coarsen(&s, 7);
        let (p, _) = direct_interpolation(&a, &s, &split).unwrap();
        let mut seen = vec![false; p.ncols()];
        for i in 0..p.nrows() {
            if split.labels[i] == CfLabel::Coarse {
                let (cols, vals) = p.row(i);
                assert_eq!(cols.len(), 1);
                assert_eq!(vals[0], 1.0);
                assert!(!seen[cols[0]]);
                seen[cols[0]] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }
}
