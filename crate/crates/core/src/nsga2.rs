//! Elitist nondominated sorting GA with constrained dominance.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::evaluation::Solution;
use crate::genotype::{decode, random_genotype_with, repair_flat, Genotype};
use crate::metrics::{hypervolume_2d, nadir, nondominated, reference_from_nadir};
use crate::operators::{polynomial_mutation, sbx};
use crate::problem::Problem;
use crate::rng;

/// Objective vector plus total constraint violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub obj: [f64; 2],
    pub violation: f64,
}

impl Point {
    pub fn feasible(obj: [f64; 2]) -> Self {
        Point { obj, violation: 0.0 }
    }
}

/// Feasible beats infeasible, lower violation beats higher, and Pareto
/// dominance decides between feasible points.
pub fn constrained_dominates(a: &Point, b: &Point) -> bool {
    match (a.violation == 0.0, b.violation == 0.0) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => crate::metrics::dominates(&a.obj, &b.obj),
    }
}

/// Partition into fronts; each front lists indices in increasing order.
pub fn fast_nondominated_sort(points: &[Point]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for a in 0..n {
        for b in a + 1..n {
            if constrained_dominates(&points[a], &points[b]) {
                dominated_by[a].push(b);
                count[b] += 1;
            } else if constrained_dominates(&points[b], &points[a]) {
                dominated_by[b].push(a);
                count[a] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &a in &current {
            for &b in &dominated_by[a] {
                count[b] -= 1;
                if count[b] == 0 {
                    next.push(b);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

pub fn crowding_distance(front: &[[f64; 2]]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a][m].total_cmp(&front[b][m]).then(a.cmp(&b)));
        let lo = front[order[0]][m];
        let hi = front[order[n - 1]][m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi <= lo {
            continue;
        }
        for k in 1..n - 1 {
            dist[order[k]] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / (hi - lo);
        }
    }
    dist
}

#[derive(Debug, Clone)]
pub struct Member {
    pub genotype: Genotype,
    pub genes: Vec<f64>,
    pub solution: Solution,
}

impl Member {
    pub fn from_genes(prob: &Problem, genes: Vec<f64>) -> Self {
        let genotype = Genotype::from_flat(prob, &genes);
        let solution = decode(prob, &genotype);
        Member { genotype, genes, solution }
    }

    pub fn point(&self) -> Point {
        Point { obj: self.solution.objectives(), violation: self.solution.report.total_violation }
    }
}

/// Decodes in parallel; output order follows input order.
pub fn evaluate_all(prob: &Problem, genes: Vec<Vec<f64>>) -> Vec<Member> {
    genes.into_par_iter().map(|g| Member::from_genes(prob, g)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProgressRow {
    pub generation: usize,
    pub front1_size: usize,
    pub best_f1: f64,
    pub best_f2: f64,
    pub hv: f64,
}

/// Progress over the distinct feasible nondominated points of `members`.
/// HV uses `reference` when given, otherwise the front's own nadir pushed
/// out by 10%. Empty fronts report NaN bests and zero HV.
pub fn progress_row(generation: usize, members: &[Member], reference: Option<[f64; 2]>) -> ProgressRow {
    let front = feasible_front(members);
    let pts: Vec<[f64; 2]> = front.iter().map(|&i| members[i].solution.objectives()).collect();
    let pts = nondominated(&pts);
    if pts.is_empty() {
        return ProgressRow { generation, front1_size: 0, best_f1: f64::NAN, best_f2: f64::NAN, hv: 0.0 };
    }
    let r = reference.unwrap_or_else(|| reference_from_nadir(nadir(&pts)));
    let inside: Vec<[f64; 2]> = pts.iter().copied().filter(|p| p[0] < r[0] && p[1] < r[1]).collect();
    ProgressRow {
        generation,
        front1_size: pts.len(),
        best_f1: pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        best_f2: pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
        hv: hypervolume_2d(&inside, r).unwrap_or(0.0),
    }
}

/// Indices of feasible members not dominated by another feasible member.
pub fn feasible_front(members: &[Member]) -> Vec<usize> {
    let feasible: Vec<usize> = (0..members.len()).filter(|&i| members[i].solution.is_feasible()).collect();
    feasible
        .iter()
        .copied()
        .filter(|&i| {
            let a = members[i].solution.objectives();
            !feasible
                .iter()
                .any(|&j| crate::metrics::dominates(&members[j].solution.objectives(), &a))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Nsga2Params {
    pub pop_size: usize,
    pub generations: usize,
    /// Per-gene mutation probability; `None` means one over the gene count.
    pub p_mut: Option<f64>,
    pub eta_mut: f64,
    pub cr: f64,
    pub eta_cx: f64,
    pub seed: u64,
    pub hv_reference: Option<[f64; 2]>,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Nsga2Params {
            pop_size: 100,
            generations: 500,
            p_mut: None,
            eta_mut: 100.0,
            cr: 0.5,
            eta_cx: 20.0,
            seed: 0,
            hv_reference: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankedPopulation {
    pub members: Vec<Member>,
    pub fronts: Vec<Vec<usize>>,
    pub rank: Vec<usize>,
    pub crowding: Vec<f64>,
}

impl RankedPopulation {
    pub fn new(members: Vec<Member>) -> Self {
        let points: Vec<Point> = members.iter().map(Member::point).collect();
        let fronts = fast_nondominated_sort(&points);
        let mut rank = vec![0; members.len()];
        let mut crowding = vec![0.0; members.len()];
        for (k, front) in fronts.iter().enumerate() {
            let objs: Vec<[f64; 2]> = front.iter().map(|&i| points[i].obj).collect();
            for (&i, d) in front.iter().zip(crowding_distance(&objs)) {
                rank[i] = k;
                crowding[i] = d;
            }
        }
        RankedPopulation { members, fronts, rank, crowding }
    }

    fn better(&self, a: usize, b: usize) -> usize {
        let key = |i: usize| (self.rank[i], std::cmp::Reverse(ordered(self.crowding[i])), i);
        if key(a) <= key(b) {
            a
        } else {
            b
        }
    }
}

fn ordered(x: f64) -> u64 {
    // monotone map of nonnegative floats (including +inf) onto integers
    x.to_bits()
}

/// Keeps the best `n` of `members` by rank, then crowding, then index.
fn survive(members: Vec<Member>, n: usize) -> Vec<Member> {
    let ranked = RankedPopulation::new(members);
    let mut keep = Vec::with_capacity(n);
    for front in &ranked.fronts {
        if keep.len() + front.len() <= n {
            keep.extend(front.iter().copied());
            continue;
        }
        let objs: Vec<[f64; 2]> = front.iter().map(|&i| ranked.members[i].solution.objectives()).collect();
        let dist = crowding_distance(&objs);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        keep.extend(order.into_iter().take(n - keep.len()).map(|k| front[k]));
        break;
    }
    let mut slots: Vec<Option<Member>> = ranked.members.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("kept once")).collect()
}

pub fn evolve(prob: &Problem, params: &Nsga2Params) -> (RankedPopulation, Vec<ProgressRow>) {
    evolve_with(prob, params, |_, _| {})
}

/// Runs the GA, calling `observer(generation, population)` after the
/// initial population and after every generation.
pub fn evolve_with(
    prob: &Problem,
    params: &Nsga2Params,
    mut observer: impl FnMut(usize, &RankedPopulation),
) -> (RankedPopulation, Vec<ProgressRow>) {
    let bounds = prob.bounds();
    let integer = prob.integer_mask();
    let m = prob.num_genes();
    let p_mut = params.p_mut.unwrap_or(1.0 / m as f64);
    let mut init_rng = rng::stream(params.seed, "nsga2/init");
    let mut var_rng = rng::stream(params.seed, "nsga2/variation");

    let initial: Vec<Vec<f64>> = (0..params.pop_size)
        .map(|_| random_genotype_with(prob, &mut init_rng).to_flat())
        .collect();
    let mut pop = RankedPopulation::new(evaluate_all(prob, initial));
    let mut progress = vec![progress_row(0, &pop.members, params.hv_reference)];
    observer(0, &pop);

    for gen in 1..=params.generations {
        let n = pop.members.len();
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let mut pick = || {
                let a = var_rng.gen_range(0..n);
                let b = var_rng.gen_range(0..n);
                pop.better(a, b)
            };
            let p1 = pick();
            let p2 = pick();
            let (mut c1, mut c2) = sbx(
                &pop.members[p1].genes,
                &pop.members[p2].genes,
                &bounds,
                &integer,
                params.cr,
                params.eta_cx,
                &mut var_rng,
            );
            for c in [&mut c1, &mut c2] {
                polynomial_mutation(c, &bounds, &integer, p_mut, params.eta_mut, &mut var_rng);
                repair_flat(prob, c, &bounds, &integer);
            }
            children.push(c1);
            if children.len() < n {
                children.push(c2);
            }
        }
        let mut combined = std::mem::take(&mut pop.members);
        combined.extend(evaluate_all(prob, children));
        pop = RankedPopulation::new(survive(combined, n));
        progress.push(progress_row(gen, &pop.members, params.hv_reference));
        observer(gen, &pop);
    }
    (pop, progress)
}
