//! NSGA-II machinery: fast non-dominated sorting, crowding distance,
//! binary tournament selection, and (μ+λ) truncation.

use crate::solver::FitnessPair;
use rand::Rng;

/// Fast non-dominated sort. Returns 1-based ranks and the fronts as
/// index lists (front 0 holds the rank-1 individuals).
pub fn nsga2_rank(fitnesses: &[FitnessPair]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = fitnesses.len();
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut first = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if fitnesses[i].dominates(&fitnesses[j]) {
                dominated[i].push(j);
            } else if fitnesses[j].dominates(&fitnesses[i]) {
                dom_count[i] += 1;
            }
        }
        if dom_count[i] == 0 {
            first.push(i);
        }
    }
    let mut ranks = vec![0usize; n];
    let mut current = first;
    while !current.is_empty() {
        for &i in &current {
            ranks[i] = fronts.len() + 1;
        }
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated[i] {
                dom_count[j] -= 1;
                if dom_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    (ranks, fronts)
}

/// NSGA-II crowding distance within one front: the boundary individual
/// per objective gets +∞, interior individuals the normalized gap sum.
pub fn crowding_distance(front: &[FitnessPair]) -> Vec<f64> {
    let n = front.len();
    let mut crowd = vec![0.0f64; n];
    if n == 0 {
        return crowd;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for objective in 0..2 {
        let value = |i: usize| match objective {
            0 => front[i].cost_per_iter,
            _ => front[i].conv_factor,
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| value(a).partial_cmp(&value(b)).unwrap().then(a.cmp(&b)));
        crowd[order[0]] = f64::INFINITY;
        crowd[order[n - 1]] = f64::INFINITY;
        let span = value(order[n - 1]) - value(order[0]);
        if span > 0.0 {
            for k in 1..n - 1 {
                let gap = value(order[k + 1]) - value(order[k - 1]);
                crowd[order[k]] += gap / span;
            }
        }
    }
    crowd
}

/// Tournament comparison: lower rank wins; rank ties go to larger
/// crowding; full ties are decided by a coin flip.
pub fn tournament_winner<R: Rng>(
    rng: &mut R,
    a: usize,
    b: usize,
    ranks: &[usize],
    crowding: &[f64],
) -> usize {
    if ranks[a] != ranks[b] {
        return if ranks[a] < ranks[b] { a } else { b };
    }
    if crowding[a] != crowding[b] {
        return if crowding[a] > crowding[b] { a } else { b };
    }
    if rng.gen_bool(0.5) {
        a
    } else {
        b
    }
}

/// Binary tournament over two uniform draws from the population.
pub fn tournament_pick<R: Rng>(rng: &mut R, ranks: &[usize], crowding: &[f64]) -> usize {
    let n = ranks.len();
    let a = rng.gen_range(0..n);
    let b = rng.gen_range(0..n);
    tournament_winner(rng, a, b, ranks, crowding)
}

/// NSGA-II survivor selection: admit whole fronts while they fit, then
/// fill the remainder from the cut front by decreasing crowding
/// distance. Returns the selected indices.
pub fn truncate(fitnesses: &[FitnessPair], target: usize) -> Vec<usize> {
    let (_, fronts) = nsga2_rank(fitnesses);
    let mut selected = Vec::with_capacity(target.min(fitnesses.len()));
    for front in fronts {
        if selected.len() == target {
            break;
        }
        let remaining = target - selected.len();
        if front.len() <= remaining {
            selected.extend(front);
            continue;
        }
        let pairs: Vec<FitnessPair> = front.iter().map(|&i| fitnesses[i]).collect();
        let crowd = crowding_distance(&pairs);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            crowd[b]
                .partial_cmp(&crowd[a])
                .unwrap()
                .then(front[a].cmp(&front[b]))
        });
        selected.extend(order.into_iter().take(remaining).map(|k| front[k]));
    }
    selected
}
