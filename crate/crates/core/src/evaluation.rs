//! Objectives, schedule recursion, fuel model and constraint residuals.

use serde::Serialize;

use crate::instance::{CostRates, Instance, TransshipmentQuad, VesselClass};
use crate::paths::{transshipped_teu_at_port, FlowAssignment};
use crate::problem::{Problem, MAX_START_OFFSET_H};

pub const HOURS_PER_WEEK: f64 = 168.0;
/// Largest allowed transshipment lag, hours.
pub const MAX_LAG_H: f64 = 144.0;
/// Continuous residuals at or below this are treated as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Tons of fuel per day at speed `u` (knots) with `payload_teu` on board.
pub fn fuel_tons_per_day(v: &VesselClass, u: f64, payload_teu: f64, rates: &CostRates) -> f64 {
    let displacement = v.empty_weight_t + payload_teu * rates.teu_weight_t;
    v.fuel_coeff_k * u.powi(3) * displacement.powf(2.0 / 3.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    /// Vessel operating plus voyage fixed cost.
    pub fixed: f64,
    pub berth: f64,
    pub transshipment: f64,
    pub holding: f64,
    /// Origin loading plus destination discharge.
    pub handling: f64,
    pub fuel: f64,
    pub sea_emission: f64,
    pub port_emission: f64,
}

impl CostBreakdown {
    pub const LABELS: [&'static str; 8] = [
        "fixed_operating",
        "berth_occupancy",
        "transshipment_handling",
        "transshipment_holding",
        "load_discharge",
        "fuel",
        "sea_emission",
        "port_emission",
    ];

    pub fn terms(&self) -> [f64; 8] {
        [
            self.fixed,
            self.berth,
            self.transshipment,
            self.holding,
            self.handling,
            self.fuel,
            self.sea_emission,
            self.port_emission,
        ]
    }

    pub fn total(&self) -> f64 {
        self.terms().iter().sum()
    }
}

/// Largest violation per constraint family. Families satisfied by
/// construction are still measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub capacity: f64,
    pub weekly_fleet: f64,
    pub lag_bound: f64,
    pub week_wrap: f64,
    pub bounds: f64,
    pub demand: f64,
    pub conservation: f64,
    pub no_return: f64,
    pub no_origin_discharge: f64,
    pub nonnegativity: f64,
    /// Sum of all individual positive residuals.
    pub total_violation: f64,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.total_violation == 0.0
    }

    fn add(&mut self, family: fn(&mut Self) -> &mut f64, residual: f64, exact: bool) {
        let r = if exact { residual } else { snap(residual) };
        if r > 0.0 {
            let slot = family(self);
            *slot = slot.max(r);
            self.total_violation += r;
        }
    }
}

fn snap(r: f64) -> f64 {
    if r <= FEASIBILITY_TOL {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Arrival hour at every call plus the return to call 0 (`len = calls + 1`).
    pub t: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub gamma: Vec<i64>,
}

impl Schedule {
    pub fn roundtrip_hours(&self, r: usize) -> f64 {
        self.t[r][self.t[r].len() - 1] - self.t[r][0]
    }
}

/// Arrival times per call for given speeds and handling.
pub fn arrival_times(
    inst: &Instance,
    class: &[usize],
    speeds: &[Vec<f64>],
    flow: &FlowAssignment,
    start: &[f64],
) -> Vec<Vec<f64>> {
    inst.routes
        .iter()
        .enumerate()
        .map(|(r, route)| {
            let v = &inst.vessels[class[r]];
            let mut t = Vec::with_capacity(route.num_calls() + 1);
            t.push(start[r]);
            for i in 0..route.num_calls() {
                let prev = t[i];
                t.push(
                    prev + v.handling_time_h_per_teu * flow.handled(r, i)
                        + route.leg_lengths_nm[i] / speeds[r][i]
                        + inst.fixed_port_hours,
                );
            }
            t
        })
        .collect()
}

/// `θ = t' − t + 168γ` with `γ` the unique integer putting `θ` in `[0, 168)`.
pub fn transshipment_lag(t: f64, t_prime: f64) -> (f64, i64) {
    let diff = t_prime - t;
    let wraps = (diff / HOURS_PER_WEEK).floor();
    let mut theta = diff - HOURS_PER_WEEK * wraps;
    let mut gamma = -wraps as i64;
    if theta >= HOURS_PER_WEEK {
        theta -= HOURS_PER_WEEK;
        gamma -= 1;
    }
    (theta.max(0.0), gamma)
}

pub fn propagate_schedule(
    inst: &Instance,
    quads: &[TransshipmentQuad],
    class: &[usize],
    speeds: &[Vec<f64>],
    flow: &FlowAssignment,
    start: &[f64],
) -> Schedule {
    let t = arrival_times(inst, class, speeds, flow, start);
    let (theta, gamma) = quads
        .iter()
        .map(|q| transshipment_lag(t[q.r][q.i], t[q.r_prime][q.i_prime]))
        .unzip();
    Schedule { t, theta, gamma }
}

/// Fewest vessels covering the round trip within the route's bounds.
pub fn minimal_fleet(roundtrip_h: f64, n_min: u32, n_max: u32) -> u32 {
    let need = (roundtrip_h / HOURS_PER_WEEK).ceil().max(0.0);
    (need as u32).clamp(n_min, n_max)
}

/// A fully decoded decision together with its objectives and residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Vessel class index per route.
    pub class: Vec<usize>,
    pub n: Vec<u32>,
    pub speeds: Vec<Vec<f64>>,
    pub schedule: Schedule,
    pub flow: FlowAssignment,
    pub cost: CostBreakdown,
    pub f1: f64,
    pub f2: f64,
    pub report: ConstraintReport,
}

impl Solution {
    pub fn objectives(&self) -> [f64; 2] {
        [self.f1, self.f2]
    }

    pub fn is_feasible(&self) -> bool {
        self.report.is_feasible()
    }

    /// One-hot class indicator `x[r][v]`.
    pub fn x(&self, num_classes: usize) -> Vec<Vec<u8>> {
        self.class
            .iter()
            .map(|&c| (0..num_classes).map(|v| u8::from(v == c)).collect())
            .collect()
    }

    pub fn mean_speed(&self) -> f64 {
        let all: Vec<f64> = self.speeds.iter().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len() as f64
    }
}

/// Evaluates a full decision. With `fleet = None` each route gets the
/// smallest fleet sustaining a weekly service.
pub fn evaluate(
    prob: &Problem,
    class: Vec<usize>,
    fleet: Option<Vec<u32>>,
    speeds: Vec<Vec<f64>>,
    start: &[f64],
    flow: FlowAssignment,
) -> Solution {
    let inst = &prob.inst;
    let schedule = propagate_schedule(inst, &prob.quads, &class, &speeds, &flow, start);
    let n = fleet.unwrap_or_else(|| {
        inst.routes
            .iter()
            .enumerate()
            .map(|(r, route)| minimal_fleet(schedule.roundtrip_hours(r), route.n_min, route.n_max))
            .collect()
    });
    let cost = objective_cost(prob, &class, &n, &speeds, &schedule, &flow);
    let f2 = objective_time(inst, &class, &speeds, &flow);
    let report = constraint_report(prob, &class, &n, &speeds, start, &schedule, &flow);
    Solution { class, n, speeds, schedule, flow, f1: cost.total(), f2, cost, report }
}

pub fn objective_cost(
    prob: &Problem,
    class: &[usize],
    n: &[u32],
    speeds: &[Vec<f64>],
    schedule: &Schedule,
    flow: &FlowAssignment,
) -> CostBreakdown {
    let inst = &prob.inst;
    let rates = &inst.rates;
    let mut c = CostBreakdown::default();
    let mut handled_total = 0.0;
    let mut sailing_fuel = 0.0;
    for (r, route) in inst.routes.iter().enumerate() {
        let v = &inst.vessels[class[r]];
        c.fixed += f64::from(n[r]) * v.c_opr + v.c_fix[r];
        for i in 0..route.num_calls() {
            let handled = flow.handled(r, i);
            handled_total += handled;
            c.berth += v.c_berth * v.handling_time_h_per_teu * handled;
            let u = speeds[r][i];
            let burn = fuel_tons_per_day(v, u, flow.onboard(r, i), rates);
            sailing_fuel += route.leg_lengths_nm[i] / (24.0 * u) * burn;
        }
    }
    for p in 0..inst.num_ports() {
        let trans = transshipped_teu_at_port(flow, inst, p);
        c.transshipment += rates.c_trans * trans;
        let lag_sum: f64 = prob.quads_at_port[p].iter().map(|&q| schedule.theta[q]).sum();
        // half of the port's handling excluding local origin/destination cargo
        c.holding += 0.5 * rates.c_hold * lag_sum * (2.0 * trans);
    }
    c.handling = (rates.c_load + rates.c_disc) * inst.total_demand();
    c.fuel = rates.c_fuel * sailing_fuel;
    c.sea_emission = rates.c_emis * rates.e_sea * sailing_fuel;
    c.port_emission = rates.c_emis * rates.e_port * handled_total;
    c
}

/// Total sailing plus handling hours over all routes.
pub fn objective_time(inst: &Instance, class: &[usize], speeds: &[Vec<f64>], flow: &FlowAssignment) -> f64 {
    let mut total = 0.0;
    for (r, route) in inst.routes.iter().enumerate() {
        let v = &inst.vessels[class[r]];
        for i in 0..route.num_calls() {
            total += route.leg_lengths_nm[i] / speeds[r][i] + v.handling_time_h_per_teu * flow.handled(r, i);
        }
    }
    total
}

fn bound_excess(x: f64, lo: f64, hi: f64) -> f64 {
    (lo - x).max(x - hi).max(0.0)
}

#[allow(clippy::too_many_arguments)]
pub fn constraint_report(
    prob: &Problem,
    class: &[usize],
    n: &[u32],
    speeds: &[Vec<f64>],
    start: &[f64],
    schedule: &Schedule,
    flow: &FlowAssignment,
) -> ConstraintReport {
    let inst = &prob.inst;
    let np = inst.num_ports();
    let mut rep = ConstraintReport::default();
    for (r, route) in inst.routes.iter().enumerate() {
        let calls = route.num_calls();
        let v = &inst.vessels[class[r]];
        rep.add(|s| &mut s.bounds, if class[r] < inst.vessels.len() { 0.0 } else { 1.0 }, true);
        let nr = f64::from(n[r]);
        rep.add(|s| &mut s.bounds, bound_excess(nr, f64::from(route.n_min), f64::from(route.n_max)), true);
        rep.add(|s| &mut s.bounds, bound_excess(start[r], 0.0, MAX_START_OFFSET_H), false);
        for i in 0..calls {
            rep.add(|s| &mut s.bounds, bound_excess(speeds[r][i], inst.speed_min_kn, inst.speed_max_kn), false);
            rep.add(|s| &mut s.capacity, flow.onboard(r, i) - v.capacity_teu, false);
            let prev = (i + calls - 1) % calls;
            let here = route.port_calls[i];
            let next = route.port_calls[(i + 1) % calls];
            for o in 0..np {
                let bal = flow.f[r][prev][o] + flow.z_load[r][i][o] - flow.f[r][i][o] - flow.z_disc[r][i][o];
                rep.add(|s| &mut s.conservation, bal.abs(), true);
                for x in [flow.f[r][i][o], flow.z_load[r][i][o], flow.z_disc[r][i][o]] {
                    rep.add(|s| &mut s.nonnegativity, -x, true);
                }
            }
            rep.add(|s| &mut s.no_return, flow.f[r][i][next].abs(), true);
            rep.add(|s| &mut s.no_origin_discharge, flow.z_disc[r][i][here].abs(), true);
        }
        rep.add(|s| &mut s.weekly_fleet, schedule.roundtrip_hours(r) - HOURS_PER_WEEK * nr, false);
    }
    for d in 0..np {
        let calls = inst.calls_at(d);
        for o in 0..np {
            if o == d {
                continue;
            }
            let net: f64 = calls
                .iter()
                .map(|&(r, i)| flow.z_disc[r][i][o] - flow.z_load[r][i][o])
                .sum();
            rep.add(|s| &mut s.demand, (net - inst.demand(o, d)).abs(), true);
        }
    }
    for (k, q) in prob.quads.iter().enumerate() {
        rep.add(|s| &mut s.lag_bound, schedule.theta[k] - MAX_LAG_H, false);
        let g = schedule.gamma[k] as f64;
        let excess = bound_excess(g, -f64::from(n[q.r_prime]), f64::from(n[q.r]));
        rep.add(|s| &mut s.week_wrap, excess, true);
    }
    rep
}
