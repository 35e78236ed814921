//! The evolvable encoding, its decoder, random initialization and repair.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::evaluation::{evaluate, Solution};
use crate::instance::DEMAND_QUANTUM;
use crate::paths::{add_path_flow, FlowAssignment};
use crate::problem::Problem;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genotype {
    /// Knots per `(route, call)`.
    pub speeds: Vec<Vec<f64>>,
    /// Vessel class index per route.
    pub class_choice: Vec<usize>,
    /// First arrival per route, hours.
    pub start_offsets: Vec<f64>,
    /// One weight per candidate path, per demanded OD pair.
    pub path_weights: Vec<Vec<f64>>,
}

impl Genotype {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.speeds.iter().flatten().copied().collect();
        out.extend(self.class_choice.iter().map(|&c| c as f64));
        out.extend(&self.start_offsets);
        out.extend(self.path_weights.iter().flatten());
        out
    }

    /// Inverse of [`Genotype::to_flat`]; class genes are rounded and clamped.
    pub fn from_flat(prob: &Problem, genes: &[f64]) -> Self {
        assert_eq!(genes.len(), prob.num_genes(), "gene vector length");
        let top = prob.inst.vessels.len() - 1;
        Genotype {
            speeds: prob
                .inst
                .routes
                .iter()
                .enumerate()
                .map(|(r, route)| (0..route.num_calls()).map(|i| genes[prob.speed_gene(r, i)]).collect())
                .collect(),
            class_choice: (0..prob.num_routes())
                .map(|r| (genes[prob.class_gene(r)].round().max(0.0) as usize).min(top))
                .collect(),
            start_offsets: (0..prob.num_routes()).map(|r| genes[prob.offset_gene(r)]).collect(),
            path_weights: (0..prob.ods.len()).map(|k| genes[prob.weight_genes(k)].to_vec()).collect(),
        }
    }

    /// Whether the shape matches the problem's layout.
    pub fn fits(&self, prob: &Problem) -> bool {
        self.speeds.len() == prob.num_routes()
            && self.speeds.iter().zip(&prob.inst.routes).all(|(s, r)| s.len() == r.num_calls())
            && self.class_choice.len() == prob.num_routes()
            && self.start_offsets.len() == prob.num_routes()
            && self.path_weights.len() == prob.ods.len()
            && self.path_weights.iter().zip(&prob.ods).all(|(w, od)| w.len() == od.paths.len())
    }
}

/// Box clamp, rounding of integer genes, and reset of all-zero weight
/// groups to uniform weights.
pub fn repair_flat(prob: &Problem, genes: &mut [f64], bounds: &[(f64, f64)], integer: &[bool]) {
    for (j, g) in genes.iter_mut().enumerate() {
        let (lo, hi) = bounds[j];
        let x = if g.is_nan() { lo } else { *g };
        let x = if integer[j] { x.round() } else { x };
        *g = x.clamp(lo, hi);
    }
    for k in 0..prob.ods.len() {
        let range = prob.weight_genes(k);
        if genes[range.clone()].iter().all(|w| *w == 0.0) {
            let uniform = 1.0 / range.len() as f64;
            genes[range].fill(uniform);
        }
    }
}

pub fn repair(prob: &Problem, g: &Genotype) -> Genotype {
    let mut flat = g.to_flat();
    repair_flat(prob, &mut flat, &prob.bounds(), &prob.integer_mask());
    Genotype::from_flat(prob, &flat)
}

/// Splits `teu` in proportion to `weights` on the demand quantum grid.
/// Cumulative floors keep every share a whole number of quanta and make the
/// shares sum to `teu` exactly.
pub fn split_demand(teu: f64, weights: &[f64]) -> Vec<f64> {
    let units = (teu / DEMAND_QUANTUM).round();
    let total: f64 = weights.iter().sum();
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        let cum = if k + 1 == n { units } else { (units * (acc / total)).floor().min(units) };
        out.push((cum - prev) * DEMAND_QUANTUM);
        prev = cum;
    }
    out
}

/// Per-path TEU quantities for every demanded OD pair.
pub fn path_quantities(prob: &Problem, g: &Genotype) -> Vec<Vec<f64>> {
    prob.ods
        .iter()
        .zip(&g.path_weights)
        .map(|(od, w)| split_demand(od.teu, w))
        .collect()
}

pub fn decode(prob: &Problem, g: &Genotype) -> Solution {
    let mut flow = FlowAssignment::zeros(&prob.inst);
    for (od, qty) in prob.ods.iter().zip(path_quantities(prob, g)) {
        for (path, q) in od.paths.iter().zip(qty) {
            add_path_flow(&prob.inst, &mut flow, path, q);
        }
    }
    evaluate(prob, g.class_choice.clone(), None, g.speeds.clone(), &g.start_offsets, flow)
}

/// Uniform draw inside every gene box.
pub fn random_genotype(prob: &Problem, seed: u64) -> Genotype {
    let mut r = rng::stream(seed, "genotype/random");
    random_genotype_with(prob, &mut r)
}

pub fn random_genotype_with(prob: &Problem, r: &mut rng::Rng) -> Genotype {
    let bounds = prob.bounds();
    let integer = prob.integer_mask();
    let mut genes: Vec<f64> = bounds
        .iter()
        .zip(&integer)
        .map(|(&(lo, hi), &int)| {
            if int {
                r.gen_range(lo as i64..=hi as i64) as f64
            } else if hi > lo {
                r.gen_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect();
    repair_flat(prob, &mut genes, &bounds, &integer);
    Genotype::from_flat(prob, &genes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_instance, Instance};

    fn two_path_problem(teu: f64) -> Problem {
        let text = format!(
            r#"{{"ports": ["A", "X", "B", "Y"],
  "routes": [{{"id": 1, "port_calls": ["A", "X", "B"], "leg_lengths_nm": [100, 100, 100], "n_min": 1, "n_max": 5}},
             {{"id": 2, "port_calls": ["X", "B", "Y"], "leg_lengths_nm": [100, 100, 100], "n_min": 1, "n_max": 5}}],
  "vessels": [{{"id": 1, "capacity_teu": 1000, "c_opr": 1, "c_berth": 1, "c_fix": [1, 1],
               "handling_time_h_per_teu": 0.01, "empty_weight_t": 1000}}],
  "demand": [{{"o": "A", "d": "B", "teu": {teu}}}],
  "rates": {{"c_load": 1, "c_disc": 1, "c_trans": 1, "c_hold": 1, "c_fuel": 1, "c_emis": 1, "e_sea": 1, "e_port": 1}},
  "speed_min_kn": 14, "speed_max_kn": 24}}"#
        );
        Problem::new(Instance::from_json_str(&text).unwrap())
    }

    #[test]
    fn even_split() {
        let prob = two_path_problem(100.0);
        let mut g = random_genotype(&prob, 1);
        g.path_weights = vec![vec![0.5, 0.5]];
        assert_eq!(path_quantities(&prob, &g), vec![vec![50.0, 50.0]]);
    }

    #[test]
    fn zero_weight_path_gets_nothing() {
        let prob = two_path_problem(100.0);
        let mut g = random_genotype(&prob, 1);
        g.path_weights = vec![vec![0.2, 0.0]];
        assert_eq!(path_quantities(&prob, &g), vec![vec![100.0, 0.0]]);
    }

    #[test]
    fn split_sums_exactly() {
        let parts = split_demand(77.0, &[0.1, 0.7, 0.2, 1e-9]);
        assert_eq!(parts.iter().sum::<f64>(), 77.0);
        assert!(parts.iter().all(|p| *p >= 0.0 && (p / DEMAND_QUANTUM).fract() == 0.0));
    }

    #[test]
    fn repair_clamps_speeds() {
        let prob = two_path_problem(100.0);
        let mut g = random_genotype(&prob, 2);
        g.speeds[0][0] = 27.0;
        g.speeds[0][1] = 3.1;
        let fixed = repair(&prob, &g);
        assert_eq!(fixed.speeds[0][0], 24.0);
        assert_eq!(fixed.speeds[0][1], 14.0);
    }

    #[test]
    fn repair_resets_zero_weights() {
        let prob = two_path_problem(100.0);
        let mut g = random_genotype(&prob, 2);
        g.path_weights = vec![vec![0.0, 0.0]];
        assert_eq!(repair(&prob, &g).path_weights, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn repair_leaves_valid_genotype_alone() {
        let prob = Problem::new(generate_instance(10, 2, 3, 42, 200.0).unwrap());
        for s in 0..20 {
            let g = random_genotype(&prob, s);
            assert_eq!(repair(&prob, &g), g);
        }
    }

    #[test]
    fn random_is_deterministic_and_in_box() {
        let prob = Problem::new(generate_instance(10, 2, 3, 42, 200.0).unwrap());
        assert_eq!(random_genotype(&prob, 9), random_genotype(&prob, 9));
        let mut r = rng::stream(5, "t");
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let g = random_genotype_with(&prob, &mut r);
            lo = lo.min(g.speeds[0][0]);
            hi = hi.max(g.speeds[0][0]);
        }
        assert!(lo >= 14.0 && hi <= 24.0);
        assert!(lo < 14.1 && hi > 23.9);
    }

    #[test]
    fn zero_demand_decode_uses_only_fixed_terms() {
        let prob = Problem::new(generate_instance(4, 1, 2, 3, 0.0).unwrap());
        let sol = decode(&prob, &random_genotype(&prob, 0));
        let c = sol.cost;
        assert_eq!((c.berth, c.transshipment, c.holding, c.handling, c.port_emission), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(c.fixed > 0.0);
        let sailing: f64 = prob.inst.routes[0]
            .leg_lengths_nm
            .iter()
            .zip(&sol.speeds[0])
            .map(|(l, u)| l / u)
            .sum();
        assert_eq!(sol.n[0], ((sailing / 168.0).ceil() as u32).max(1));
    }

    #[test]
    fn flat_round_trip() {
        let prob = Problem::new(generate_instance(13, 2, 3, 1, 50.0).unwrap());
        let g = random_genotype(&prob, 4);
        assert!(g.fits(&prob));
        assert_eq!(Genotype::from_flat(&prob, &g.to_flat()), g);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn problem() -> Problem {
            Problem::new(generate_instance(13, 2, 3, 7, 120.0).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn repair_is_idempotent(genes in proptest::collection::vec(-50.0f64..200.0, 1..2)) {
                let prob = problem();
                let bounds = prob.bounds();
                let integer = prob.integer_mask();
                let mut flat: Vec<f64> = (0..prob.num_genes()).map(|j| genes[0] * (j as f64 + 1.0).sin()).collect();
                repair_flat(&prob, &mut flat, &bounds, &integer);
                let once = flat.clone();
                repair_flat(&prob, &mut flat, &bounds, &integer);
                prop_assert_eq!(once, flat);
            }

            #[test]
            fn decoded_flows_are_exact(seed in 0u64..10_000) {
                let prob = problem();
                let g = random_genotype(&prob, seed);
                let sol = decode(&prob, &g);
                let r = sol.report;
                prop_assert_eq!(r.demand, 0.0);
                prop_assert_eq!(r.conservation, 0.0);
                prop_assert_eq!(r.no_return, 0.0);
                prop_assert_eq!(r.no_origin_discharge, 0.0);
                prop_assert_eq!(r.nonnegativity, 0.0);
                prop_assert_eq!(r.bounds, 0.0);
                prop_assert_eq!(decode(&prob, &g), sol);
            }
        }
    }
}
