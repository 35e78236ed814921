//! Online clustering-based evolutionary algorithm.
//!
//! A fixed-size archive is updated one child at a time. Children come from
//! a DE step plus polynomial mutation on parents drawn either from the
//! parent's own cluster or from a global pool with one member per cluster.
//! Pruning removes the most-dominated member of the worst front, or the
//! smallest hypervolume contributor when everything is mutually
//! nondominated. Clusters live in box-normalized gene space.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::genotype::{random_genotype_with, repair_flat};
use crate::metrics::{hv_contributions, hypervolume_2d, nadir, reference_from_nadir};
use crate::nsga2::{
    constrained_dominates, evaluate_all, fast_nondominated_sort, progress_row, Member, Point, ProgressRow,
};
use crate::operators::{clamp_to_box, de_step, polynomial_mutation};
use crate::problem::Problem;
use crate::rng::{self, Rng};

#[derive(Debug, Clone)]
pub struct OceaParams {
    /// Archive size K.
    pub archive_size: usize,
    /// Probability of mating inside the parent's own cluster.
    pub alpha: f64,
    pub n_max: usize,
    /// DE scaling factor.
    pub c: f64,
    /// DE crossover rate.
    pub cr: f64,
    /// Per-gene mutation probability; `None` means one over the gene count.
    pub p_mut: Option<f64>,
    /// Mutation distribution index.
    pub rho: f64,
    pub generations: usize,
    pub seed: u64,
    pub hv_reference: Option<[f64; 2]>,
}

impl Default for OceaParams {
    fn default() -> Self {
        OceaParams {
            archive_size: 100,
            alpha: 0.6,
            n_max: 3,
            c: 1.0,
            cr: 0.5,
            p_mut: None,
            rho: 20.0,
            generations: 500,
            seed: 0,
            hv_reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub centroid: Vec<f64>,
    pub h: usize,
    pub members: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Archive {
    pub members: Vec<Member>,
    /// Stable id per archive slot, used for cluster membership.
    pub ids: Vec<u64>,
    pub clusters: Vec<Cluster>,
    next_id: u64,
    lo: Vec<f64>,
    span: Vec<f64>,
}

/// What one archive update did.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEvent {
    pub archive_size: usize,
    pub clusters: usize,
    pub single_front: bool,
    /// True when the new child itself was discarded.
    pub rejected_child: bool,
    /// HV of the archive before and after, at the reference frozen for this
    /// update; only set when the combined set was a single front.
    pub hv_before_after: Option<(f64, f64)>,
}

impl Archive {
    fn new(prob: &Problem, members: Vec<Member>, n_max: usize) -> Self {
        let bounds = prob.bounds();
        let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let span: Vec<f64> = bounds.iter().map(|b| b.1 - b.0).collect();
        let n = members.len() as u64;
        let mut archive = Archive { members, ids: (0..n).collect(), clusters: Vec::new(), next_id: n, lo, span };
        archive.clusters = (0..archive.members.len())
            .map(|k| Cluster { centroid: archive.coords(&archive.members[k].genes), h: 1, members: vec![k as u64] })
            .collect();
        while archive.clusters.len() > n_max.max(1) {
            archive.merge_nearest();
        }
        archive
    }

    /// Gene vector mapped to the unit box.
    pub fn coords(&self, genes: &[f64]) -> Vec<f64> {
        genes
            .iter()
            .zip(self.lo.iter().zip(&self.span))
            .map(|(g, (lo, span))| if *span > 0.0 { (g - lo) / span } else { 0.0 })
            .collect()
    }

    fn slot_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    fn cluster_of(&self, id: u64) -> Option<usize> {
        self.clusters.iter().position(|c| c.members.contains(&id))
    }

    fn merge_nearest(&mut self) {
        let mut best = (f64::INFINITY, 0, 1);
        for a in 0..self.clusters.len() {
            for b in a + 1..self.clusters.len() {
                let d: f64 = self.clusters[a]
                    .centroid
                    .iter()
                    .zip(&self.clusters[b].centroid)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let gone = self.clusters.remove(b);
        let keep = &mut self.clusters[a];
        let (ha, hb) = (keep.h as f64, gone.h as f64);
        for (c, g) in keep.centroid.iter_mut().zip(&gone.centroid) {
            *c = (*c * ha + g * hb) / (ha + hb);
        }
        keep.h += gone.h;
        keep.members.extend(gone.members);
    }

    pub fn points(&self) -> Vec<Point> {
        self.members.iter().map(Member::point).collect()
    }

    /// Inserts `child` and removes the worst member of archive ∪ {child}.
    pub fn update(&mut self, child: Member, n_max: usize) -> UpdateEvent {
        let mut points = self.points();
        points.push(child.point());
        let t = points.len() - 1;
        let fronts = fast_nondominated_sort(&points);
        let single = fronts.len() == 1;
        let mut hv_pair = None;
        let s_star = if !single {
            let worst = fronts.last().expect("nonempty");
            let dominators = |s: usize| points.iter().filter(|p| constrained_dominates(p, &points[s])).count();
            // ties go to the later index, so the child loses ties
            *worst
                .iter()
                .max_by(|&&a, &&b| dominators(a).cmp(&dominators(b)).then(a.cmp(&b)))
                .expect("nonempty")
        } else {
            let objs: Vec<[f64; 2]> = points.iter().map(|p| p.obj).collect();
            let reference = reference_from_nadir(nadir(&objs));
            let contrib = hv_contributions(&objs, reference).expect("inside reference");
            let s = (0..objs.len())
                .min_by(|&a, &b| contrib[a].total_cmp(&contrib[b]).then(b.cmp(&a)))
                .expect("nonempty");
            let before = hypervolume_2d(&objs[..t], reference).expect("inside reference");
            let after: Vec<[f64; 2]> =
                objs.iter().enumerate().filter(|(k, _)| *k != s).map(|(_, p)| *p).collect();
            hv_pair = Some((before, hypervolume_2d(&after, reference).expect("inside reference")));
            s
        };
        let rejected = s_star == t;
        if !rejected {
            let removed_id = self.ids[s_star];
            let removed = self.coords(&self.members[s_star].genes);
            if let Some(k) = self.cluster_of(removed_id) {
                let cl = &mut self.clusters[k];
                cl.members.retain(|&m| m != removed_id);
                if cl.members.is_empty() {
                    self.clusters.remove(k);
                } else {
                    cl.h -= 1;
                    let h = cl.h as f64;
                    for (c, s) in cl.centroid.iter_mut().zip(&removed) {
                        *c -= (s - *c) / h;
                    }
                }
            }
            let id = self.next_id;
            self.next_id += 1;
            let centroid = self.coords(&child.genes);
            self.members[s_star] = child;
            self.ids[s_star] = id;
            self.clusters.push(Cluster { centroid, h: 1, members: vec![id] });
            if self.clusters.len() > n_max {
                self.merge_nearest();
            }
        }
        UpdateEvent {
            archive_size: self.members.len(),
            clusters: self.clusters.len(),
            single_front: single,
            rejected_child: rejected,
            hv_before_after: hv_pair,
        }
    }
}

/// DE step, box clamp, polynomial mutation and a final repair.
#[allow(clippy::too_many_arguments)]
pub fn solgen(
    prob: &Problem,
    s: &[f64],
    a: &[f64],
    b: &[f64],
    params: &OceaParams,
    bounds: &[(f64, f64)],
    integer: &[bool],
    rng: &mut Rng,
) -> Vec<f64> {
    let p_mut = params.p_mut.unwrap_or(1.0 / s.len() as f64);
    let mut t = de_step(s, a, b, params.c, params.cr, rng);
    clamp_to_box(&mut t, bounds);
    polynomial_mutation(&mut t, bounds, integer, p_mut, params.rho, rng);
    repair_flat(prob, &mut t, bounds, integer);
    t
}

fn pick_two(pool: &[usize], rng: &mut Rng) -> (usize, usize) {
    let mut two = pool.choose_multiple(rng, 2);
    (*two.next().expect("pool >= 2"), *two.next().expect("pool >= 2"))
}

pub fn run_ocea(prob: &Problem, params: &OceaParams) -> (Archive, Vec<ProgressRow>) {
    run_ocea_with(prob, params, |_| {})
}

/// Runs the algorithm, reporting every archive update to `observer`.
pub fn run_ocea_with(
    prob: &Problem,
    params: &OceaParams,
    mut observer: impl FnMut(&UpdateEvent),
) -> (Archive, Vec<ProgressRow>) {
    let bounds = prob.bounds();
    let integer = prob.integer_mask();
    let mut init_rng = rng::stream(params.seed, "ocea/init");
    let mut rng = rng::stream(params.seed, "ocea/variation");
    let initial: Vec<Vec<f64>> = (0..params.archive_size)
        .map(|_| random_genotype_with(prob, &mut init_rng).to_flat())
        .collect();
    let mut archive = Archive::new(prob, evaluate_all(prob, initial), params.n_max);
    let mut progress = vec![progress_row(0, &archive.members, params.hv_reference)];

    for gen in 1..=params.generations {
        let parents: Vec<(u64, Vec<f64>)> =
            archive.ids.iter().copied().zip(archive.members.iter().map(|m| m.genes.clone())).collect();
        let global: Vec<usize> = archive
            .clusters
            .iter()
            .map(|c| {
                let id = *c.members.choose(&mut rng).expect("clusters are nonempty");
                archive.slot_of(id).expect("cluster member in archive")
            })
            .collect();
        for (id, s) in &parents {
            let own: Option<Vec<usize>> = if rng.gen::<f64>() < params.alpha {
                archive.cluster_of(*id).map(|k| {
                    archive.clusters[k]
                        .members
                        .iter()
                        .filter(|m| *m != id)
                        .filter_map(|m| archive.slot_of(*m))
                        .collect()
                })
            } else {
                None
            };
            let everyone: Vec<usize>;
            let pool: &[usize] = match &own {
                Some(p) if p.len() >= 2 => p,
                _ if global.len() >= 2 => &global,
                _ => {
                    everyone = (0..archive.members.len()).collect();
                    &everyone
                }
            };
            let (a, b) = pick_two(pool, &mut rng);
            let genes = solgen(
                prob,
                s,
                &archive.members[a].genes,
                &archive.members[b].genes,
                params,
                &bounds,
                &integer,
                &mut rng,
            );
            let child = Member::from_genes(prob, genes);
            let event = archive.update(child, params.n_max);
            observer(&event);
        }
        progress.push(progress_row(gen, &archive.members, params.hv_reference));
    }
    (archive, progress)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::decode;
    use crate::instance::generate_instance;
    use crate::metrics::hv_contribution;

    fn small_problem() -> Problem {
        Problem::new(generate_instance(4, 1, 2, 11, 30.0).unwrap())
    }

    fn member_with(prob: &Problem, seed: u64) -> Member {
        let g = crate::genotype::random_genotype(prob, seed);
        Member::from_genes(prob, g.to_flat())
    }

    fn check_clusters(archive: &Archive) {
        let total: usize = archive.clusters.iter().map(|c| c.h).sum();
        assert_eq!(total, archive.members.len());
        let mut ids: Vec<u64> = archive.clusters.iter().flat_map(|c| c.members.clone()).collect();
        ids.sort_unstable();
        let mut want = archive.ids.clone();
        want.sort_unstable();
        assert_eq!(ids, want);
        for c in &archive.clusters {
            assert_eq!(c.h, c.members.len());
            let dim = c.centroid.len();
            let mut mean = vec![0.0; dim];
            for id in &c.members {
                let x = archive.coords(&archive.members[archive.slot_of(*id).unwrap()].genes);
                for j in 0..dim {
                    mean[j] += x[j] / c.h as f64;
                }
            }
            for j in 0..dim {
                assert!((mean[j] - c.centroid[j]).abs() < 1e-9, "centroid drift {}", (mean[j] - c.centroid[j]).abs());
            }
        }
    }

    #[test]
    fn zero_generations_keeps_initial_population() {
        let prob = small_problem();
        let params = OceaParams { archive_size: 12, generations: 0, seed: 4, ..Default::default() };
        let (archive, _) = run_ocea(&prob, &params);
        let mut init = rng::stream(4, "ocea/init");
        for m in &archive.members {
            assert_eq!(m.genotype, random_genotype_with(&prob, &mut init));
        }
        assert!(archive.clusters.len() <= 3);
        check_clusters(&archive);
    }

    #[test]
    fn dominated_child_is_rejected() {
        let prob = small_problem();
        let members: Vec<Member> = (0..6).map(|s| member_with(&prob, s)).collect();
        let mut archive = Archive::new(&prob, members, 3);
        let before_ids = archive.ids.clone();
        let before_clusters = archive.clusters.clone();
        let mut child = member_with(&prob, 99);
        child.solution.report.total_violation = 1e12;
        let ev = archive.update(child, 3);
        assert!(ev.rejected_child);
        assert_eq!(archive.ids, before_ids);
        assert_eq!(archive.clusters, before_clusters);
    }

    fn with_objectives(prob: &Problem, objs: &[[f64; 2]]) -> Vec<Member> {
        objs.iter()
            .enumerate()
            .map(|(k, o)| {
                let mut m = member_with(prob, k as u64);
                m.solution.report.total_violation = 0.0;
                m.solution.f1 = o[0];
                m.solution.f2 = o[1];
                m
            })
            .collect()
    }

    #[test]
    fn duplicate_is_removed_on_single_front() {
        let prob = small_problem();
        let mut members = with_objectives(&prob, &[[1.0, 3.0], [2.0, 2.0], [2.0, 2.0], [3.0, 1.0]]);
        let child = members.pop().unwrap();
        let mut archive = Archive::new(&prob, members, 3);
        let ev = archive.update(child, 3);
        assert!(ev.single_front);
        let objs: Vec<[f64; 2]> = archive.members.iter().map(|m| m.solution.objectives()).collect();
        assert_eq!(objs.iter().filter(|o| **o == [2.0, 2.0]).count(), 1);
        assert!(objs.contains(&[3.0, 1.0]));
        let (b, a) = ev.hv_before_after.unwrap();
        assert!(a >= b);
    }

    #[test]
    fn min_contributor_matches_brute_force() {
        let prob = small_problem();
        let all = [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [0.5, 3.5]];
        let mut members = with_objectives(&prob, &all);
        let child = members.pop().unwrap();
        let mut archive = Archive::new(&prob, members, 3);
        archive.update(child, 3);
        let reference = reference_from_nadir(nadir(&all));
        let contrib: Vec<f64> = (0..4).map(|k| hv_contribution(&all, k, reference).unwrap()).collect();
        let min = contrib.iter().copied().fold(f64::INFINITY, f64::min);
        let loser = (0..4).rev().find(|&k| contrib[k] == min).unwrap();
        let objs: Vec<[f64; 2]> = archive.members.iter().map(|m| m.solution.objectives()).collect();
        assert!(!objs.contains(&all[loser]));
        assert_eq!(objs.len(), 3);
    }

    #[test]
    fn invariants_hold_over_a_run() {
        let prob = small_problem();
        let params = OceaParams { archive_size: 20, generations: 15, seed: 2, ..Default::default() };
        let mut events = 0;
        let (archive, progress) = run_ocea_with(&prob, &params, |ev| {
            events += 1;
            assert_eq!(ev.archive_size, 20);
            assert!(ev.clusters <= 3);
            if let Some((b, a)) = ev.hv_before_after {
                assert!(a >= b * (1.0 - 1e-12));
            }
        });
        assert_eq!(events, 20 * 15);
        assert_eq!(progress.len(), 16);
        check_clusters(&archive);
        for m in &archive.members {
            assert_eq!(decode(&prob, &m.genotype), m.solution);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let prob = small_problem();
        let params = OceaParams { archive_size: 10, generations: 5, seed: 7, ..Default::default() };
        let a = run_ocea(&prob, &params).0;
        let b = run_ocea(&prob, &params).0;
        let objs = |x: &Archive| x.members.iter().map(|m| m.solution.objectives()).collect::<Vec<_>>();
        assert_eq!(objs(&a), objs(&b));
    }

    #[test]
    fn solgen_identity_path() {
        let prob = small_problem();
        let bounds = prob.bounds();
        let integer = prob.integer_mask();
        let s = member_with(&prob, 1).genes;
        let a = member_with(&prob, 2).genes;
        let b = member_with(&prob, 3).genes;
        let params = OceaParams { cr: -1.0, p_mut: Some(-1.0), ..Default::default() };
        let mut r = rng::stream(0, "t");
        assert_eq!(solgen(&prob, &s, &a, &b, &params, &bounds, &integer, &mut r), s);
        let params = OceaParams { cr: 1.0, p_mut: Some(-1.0), ..Default::default() };
        assert_eq!(solgen(&prob, &s, &a, &a, &params, &bounds, &integer, &mut r), s);
    }
}
