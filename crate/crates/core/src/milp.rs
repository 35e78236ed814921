//! Linearized mixed-integer formulation over discretized speeds and
//! transshipment hours, an LP-format writer and reader, and a checker that
//! maps an assignment back onto the nonlinear evaluator.
//!
//! Variable names use 1-based indices: `x_r_v`, `n_r_v`, `u_r_i`, `t_r_i`
//! (`i = 1..=calls+1`, the last being the return to the first call),
//! `zl_r_i_o`, `zd_r_i_o`, `f_r_i_o`, `z_r_i_v`, `psi_r_i_a`,
//! `phi_r_i_v_a`, `w_r_i_v_a`, `theta_q`, `gamma_q`, `lam_q_h` and
//! `del_p_q_h`. Hours `h` are literal (`0..=168`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::evaluation::{evaluate, Solution, HOURS_PER_WEEK, MAX_LAG_H};
use crate::instance::{derive_transshipments, Instance, TransshipmentQuad};
use crate::paths::FlowAssignment;
use crate::problem::{Problem, MAX_START_OFFSET_H};

const FIT_SAMPLES: usize = 101;
const ROW_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("bad speed grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("LP parse error: {0}")]
    Parse(String),
    #[error("assignment has {got} values, model has {want} variables")]
    Shape { got: usize, want: usize },
    #[error("value off the model grid: {0}")]
    OffGrid(String),
    #[error("variable {name} = {value} violates its bounds or integrality")]
    Variable { name: String, value: f64 },
    #[error("row {row} violated: lhs {lhs} {sense} rhs {rhs}")]
    Row { row: String, lhs: f64, sense: Sense, rhs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl std::fmt::Display for Sense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    fn violation(&self, values: &[f64]) -> Option<f64> {
        let lhs = self.lhs(values);
        let scale = 1.0 + self.rhs.abs() + self.terms.iter().map(|&(j, a)| (a * values[j]).abs()).sum::<f64>();
        let excess = match self.sense {
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        };
        (excess > ROW_TOL * scale).then_some(lhs)
    }
}

/// Least-squares line `a + b·W` through `(empty + W)^(2/3)` for payload
/// weight `W` in tons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuelFit {
    pub a: f64,
    pub b: f64,
    /// Largest absolute fit error over the whole payload range.
    pub max_residual: f64,
}

pub fn fit_displacement(empty_t: f64, max_payload_t: f64) -> FuelFit {
    let g = |w: f64| (empty_t + w).powf(2.0 / 3.0);
    let ws: Vec<f64> = (0..FIT_SAMPLES).map(|j| max_payload_t * j as f64 / (FIT_SAMPLES - 1) as f64).collect();
    let n = ws.len() as f64;
    let mw = ws.iter().sum::<f64>() / n;
    let mg = ws.iter().map(|&w| g(w)).sum::<f64>() / n;
    let sww: f64 = ws.iter().map(|&w| (w - mw) * (w - mw)).sum();
    let swg: f64 = ws.iter().map(|&w| (w - mw) * (g(w) - mg)).sum();
    let b = if sww > 0.0 { swg / sww } else { 0.0 };
    let a = mg - b * mw;
    let r = |w: f64| (g(w) - a - b * w).abs();
    // the residual is concave, so its extremes sit at the ends or where g' = b
    let mut max_residual = r(0.0).max(r(max_payload_t));
    if b > 0.0 {
        let w_star = (2.0 / (3.0 * b)).powi(3) - empty_t;
        if (0.0..=max_payload_t).contains(&w_star) {
            max_residual = max_residual.max(r(w_star));
        }
    }
    FuelFit { a, b, max_residual }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BigM {
    /// Per route.
    pub m1: Vec<f64>,
    pub m2: f64,
    pub m3: f64,
    /// Per route.
    pub m4: Vec<f64>,
    pub m5: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Cost,
    Time,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub cost: Vec<(usize, f64)>,
    pub time: Vec<(usize, f64)>,
    pub big_m: BigM,
    /// Per vessel class.
    pub fits: Vec<FuelFit>,
    /// Speed levels shared by every leg.
    pub speeds: Vec<f64>,
    pub hours: Vec<u32>,
    pub quads: Vec<TransshipmentQuad>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSize {
    pub variables: usize,
    pub binaries: usize,
    pub integers: usize,
    pub rows: usize,
}

impl MilpModel {
    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn row(&self, name: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn size(&self) -> ModelSize {
        let count = |k| self.vars.iter().filter(|v| v.kind == k).count();
        ModelSize {
            variables: self.vars.len(),
            binaries: count(VarKind::Binary),
            integers: count(VarKind::Integer),
            rows: self.rows.len(),
        }
    }

    pub fn objective(&self, which: Objective) -> &[(usize, f64)] {
        match which {
            Objective::Cost => &self.cost,
            Objective::Time => &self.time,
        }
    }

    pub fn objective_value(&self, which: Objective, values: &[f64]) -> f64 {
        self.objective(which).iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Adds `F2 ≤ epsilon` as the row `eps_time`.
    pub fn with_time_cap(mut self, epsilon: f64) -> Self {
        let terms = self.time.clone();
        self.rows.push(Row { name: "eps_time".into(), terms, sense: Sense::Le, rhs: epsilon });
        self
    }
}

fn x_name(r: usize, v: usize) -> String {
    format!("x_{}_{}", r + 1, v + 1)
}
fn n_name(r: usize, v: usize) -> String {
    format!("n_{}_{}", r + 1, v + 1)
}
fn u_name(r: usize, i: usize) -> String {
    format!("u_{}_{}", r + 1, i + 1)
}
fn t_name(r: usize, i: usize) -> String {
    format!("t_{}_{}", r + 1, i + 1)
}
fn zl_name(r: usize, i: usize, o: usize) -> String {
    format!("zl_{}_{}_{}", r + 1, i + 1, o + 1)
}
fn zd_name(r: usize, i: usize, o: usize) -> String {
    format!("zd_{}_{}_{}", r + 1, i + 1, o + 1)
}
fn f_name(r: usize, i: usize, o: usize) -> String {
    format!("f_{}_{}_{}", r + 1, i + 1, o + 1)
}
fn z_name(r: usize, i: usize, v: usize) -> String {
    format!("z_{}_{}_{}", r + 1, i + 1, v + 1)
}
fn psi_name(r: usize, i: usize, a: usize) -> String {
    format!("psi_{}_{}_{}", r + 1, i + 1, a + 1)
}
fn phi_name(r: usize, i: usize, v: usize, a: usize) -> String {
    format!("phi_{}_{}_{}_{}", r + 1, i + 1, v + 1, a + 1)
}
fn w_name(r: usize, i: usize, v: usize, a: usize) -> String {
    format!("w_{}_{}_{}_{}", r + 1, i + 1, v + 1, a + 1)
}
fn theta_name(q: usize) -> String {
    format!("theta_{}", q + 1)
}
fn gamma_name(q: usize) -> String {
    format!("gamma_{}", q + 1)
}
fn lam_name(q: usize, h: u32) -> String {
    format!("lam_{}_{}", q + 1, h)
}
fn del_name(p: usize, q: usize, h: u32) -> String {
    format!("del_{}_{}_{}", p + 1, q + 1, h)
}
const ONE: &str = "const_one";

#[derive(Default)]
struct Builder {
    vars: Vec<Variable>,
    index: HashMap<String, usize>,
    rows: Vec<Row>,
}

fn merge(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, a) in terms {
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some(t) => t.1 += a,
            None => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lo: f64, hi: f64) -> usize {
        let j = self.vars.len();
        self.index.insert(name.clone(), j);
        self.vars.push(Variable { name, kind, lo, hi });
        j
    }

    fn id(&self, name: &str) -> usize {
        self.index[name]
    }

    fn row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let terms = merge(terms);
        if terms.is_empty() {
            return;
        }
        self.rows.push(Row { name, terms, sense, rhs: rhs + 0.0 });
    }
}

fn speed_levels(inst: &Instance, step: f64) -> Result<Vec<f64>, MilpError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(MilpError::BadGrid(format!("step must be positive, got {step}")));
    }
    let span = inst.speed_max_kn - inst.speed_min_kn;
    let k = (span / step).round();
    if (k * step - span).abs() > 1e-9 * span.max(1.0) {
        return Err(MilpError::BadGrid(format!("step {step} does not divide [{}, {}]", inst.speed_min_kn, inst.speed_max_kn)));
    }
    let k = k as usize;
    Ok((0..=k)
        .map(|j| if j == k { inst.speed_max_kn } else { inst.speed_min_kn + j as f64 * step })
        .collect())
}

pub fn build_milp(inst: &Instance, speed_grid_step: f64) -> Result<MilpModel, MilpError> {
    let speeds = speed_levels(inst, speed_grid_step)?;
    let quads = derive_transshipments(inst);
    let np = inst.num_ports();
    let nv = inst.vessels.len();
    let rates = &inst.rates;
    let total_d = inst.total_demand();
    let exports: Vec<f64> = (0..np).map(|o| inst.demand_teu_per_week[o].iter().sum()).collect();
    let imports: Vec<f64> = (0..np).map(|d| inst.demand_teu_per_week.iter().map(|row| row[d]).sum()).collect();
    let hours: Vec<u32> = (0..=HOURS_PER_WEEK as u32).collect();
    let fits: Vec<FuelFit> = inst
        .vessels
        .iter()
        .map(|v| fit_displacement(v.empty_weight_t, v.capacity_teu * rates.teu_weight_t))
        .collect();
    let max_calls_at_port = (0..np).map(|p| inst.calls_at(p).len()).max().unwrap_or(0) as f64;
    let t_max = inst.vessels.iter().map(|v| v.handling_time_h_per_teu).fold(0.0, f64::max);
    let big_m = BigM {
        m1: inst.routes.iter().map(|r| f64::from(r.n_max)).collect(),
        m2: 2.0 * total_d + 1.0,
        m3: 2.0 * total_d + 1.0,
        m4: inst
            .routes
            .iter()
            .map(|r| {
                r.leg_lengths_nm.iter().map(|l| l / inst.speed_min_kn).sum::<f64>()
                    + r.num_calls() as f64 * inst.fixed_port_hours
                    + t_max * 2.0 * total_d
                    + 1.0
            })
            .collect(),
        m5: 0.5 * HOURS_PER_WEEK * 2.0 * total_d * max_calls_at_port + 1.0,
    };

    let mut b = Builder::default();
    let one = b.var(ONE.into(), VarKind::Continuous, 1.0, 1.0);
    for (r, route) in inst.routes.iter().enumerate() {
        for v in 0..nv {
            b.var(x_name(r, v), VarKind::Binary, 0.0, 1.0);
        }
        for v in 0..nv {
            b.var(n_name(r, v), VarKind::Integer, 0.0, f64::from(route.n_max));
        }
        for i in 0..route.num_calls() {
            b.var(u_name(r, i), VarKind::Continuous, inst.speed_min_kn, inst.speed_max_kn);
        }
        for i in 0..=route.num_calls() {
            let hi = if i == 0 { MAX_START_OFFSET_H } else { f64::INFINITY };
            b.var(t_name(r, i), VarKind::Continuous, 0.0, hi);
        }
        for i in 0..route.num_calls() {
            for o in 0..np {
                b.var(zl_name(r, i, o), VarKind::Continuous, 0.0, exports[o]);
                b.var(zd_name(r, i, o), VarKind::Continuous, 0.0, exports[o]);
                b.var(f_name(r, i, o), VarKind::Continuous, 0.0, f64::INFINITY);
            }
            for v in 0..nv {
                b.var(z_name(r, i, v), VarKind::Continuous, 0.0, f64::INFINITY);
            }
            for a in 0..speeds.len() {
                b.var(psi_name(r, i, a), VarKind::Binary, 0.0, 1.0);
            }
            for v in 0..nv {
                for a in 0..speeds.len() {
                    b.var(phi_name(r, i, v, a), VarKind::Binary, 0.0, 1.0);
                }
            }
            for v in 0..nv {
                for a in 0..speeds.len() {
                    b.var(w_name(r, i, v, a), VarKind::Continuous, 0.0, f64::INFINITY);
                }
            }
        }
    }
    for (q, quad) in quads.iter().enumerate() {
        b.var(theta_name(q), VarKind::Integer, 0.0, MAX_LAG_H);
        b.var(gamma_name(q), VarKind::Integer, f64::NEG_INFINITY, f64::INFINITY);
        for &h in &hours {
            b.var(lam_name(q, h), VarKind::Binary, 0.0, 1.0);
        }
        for &h in &hours {
            b.var(del_name(quad.port, q, h), VarKind::Continuous, 0.0, f64::INFINITY);
        }
    }

    // handled TEU at every call of port p, all origins
    let handled_at = |b: &Builder, p: usize, scale: f64| -> Vec<(usize, f64)> {
        let mut t = Vec::new();
        for (r, i) in inst.calls_at(p) {
            for o in 0..np {
                t.push((b.id(&zl_name(r, i, o)), scale));
                t.push((b.id(&zd_name(r, i, o)), scale));
            }
        }
        t
    };

    for (r, route) in inst.routes.iter().enumerate() {
        let calls = route.num_calls();
        let xs: Vec<usize> = (0..nv).map(|v| b.id(&x_name(r, v))).collect();
        let ns: Vec<usize> = (0..nv).map(|v| b.id(&n_name(r, v))).collect();
        b.row(format!("class_{}", r + 1), xs.iter().map(|&j| (j, 1.0)).collect(), Sense::Eq, 1.0);
        b.row(format!("fleet_lo_{}", r + 1), ns.iter().map(|&j| (j, 1.0)).collect(), Sense::Ge, f64::from(route.n_min));
        b.row(format!("fleet_hi_{}", r + 1), ns.iter().map(|&j| (j, 1.0)).collect(), Sense::Le, f64::from(route.n_max));
        for v in 0..nv {
            b.row(format!("nguard_{}_{}", r + 1, v + 1), vec![(ns[v], 1.0), (xs[v], -big_m.m1[r])], Sense::Le, 0.0);
        }
        for i in 0..calls {
            let prev = (i + calls - 1) % calls;
            let here = route.port_calls[i];
            let next = route.port_calls[(i + 1) % calls];
            let leg = route.leg_lengths_nm[i];

            let mut cap: Vec<(usize, f64)> = (0..np).map(|o| (b.id(&f_name(r, i, o)), 1.0)).collect();
            cap.extend((0..nv).map(|v| (xs[v], -inst.vessels[v].capacity_teu)));
            b.row(format!("cap_{}_{}", r + 1, i + 1), cap, Sense::Le, 0.0);

            for o in 0..np {
                let terms = vec![
                    (b.id(&f_name(r, prev, o)), 1.0),
                    (b.id(&zl_name(r, i, o)), 1.0),
                    (b.id(&f_name(r, i, o)), -1.0),
                    (b.id(&zd_name(r, i, o)), -1.0),
                ];
                b.row(format!("conserve_{}_{}_{}", r + 1, i + 1, o + 1), terms, Sense::Eq, 0.0);
            }

            let mut sched = vec![(b.id(&t_name(r, i + 1)), 1.0), (b.id(&t_name(r, i)), -1.0)];
            for v in 0..nv {
                sched.push((b.id(&z_name(r, i, v)), -inst.vessels[v].handling_time_h_per_teu));
                for (a, &alpha) in speeds.iter().enumerate() {
                    sched.push((b.id(&phi_name(r, i, v, a)), -leg / alpha));
                }
            }
            b.row(format!("sched_{}_{}", r + 1, i + 1), sched, Sense::Eq, inst.fixed_port_hours);

            let psis: Vec<usize> = (0..speeds.len()).map(|a| b.id(&psi_name(r, i, a))).collect();
            b.row(format!("speed_pick_{}_{}", r + 1, i + 1), psis.iter().map(|&j| (j, 1.0)).collect(), Sense::Eq, 1.0);
            let mut sp: Vec<(usize, f64)> = psis.iter().zip(&speeds).map(|(&j, &s)| (j, s)).collect();
            sp.push((b.id(&u_name(r, i)), -1.0));
            b.row(format!("speed_{}_{}", r + 1, i + 1), sp, Sense::Eq, 0.0);

            let mut wlink: Vec<(usize, f64)> = Vec::new();
            for v in 0..nv {
                for a in 0..speeds.len() {
                    let phi = b.id(&phi_name(r, i, v, a));
                    let w = b.id(&w_name(r, i, v, a));
                    let tag = format!("{}_{}_{}_{}", r + 1, i + 1, v + 1, a + 1);
                    b.row(format!("phipsi_{tag}"), vec![(phi, 1.0), (psis[a], -1.0)], Sense::Le, 0.0);
                    b.row(format!("phix_{tag}"), vec![(phi, 1.0), (xs[v], -1.0)], Sense::Le, 0.0);
                    b.row(format!("phiand_{tag}"), vec![(phi, 1.0), (psis[a], -1.0), (xs[v], -1.0)], Sense::Ge, -1.0);
                    b.row(format!("wcap_{tag}"), vec![(w, 1.0), (phi, -inst.vessels[v].capacity_teu)], Sense::Le, 0.0);
                    wlink.push((w, 1.0));
                }
            }
            wlink.extend((0..np).map(|o| (b.id(&f_name(r, i, o)), -1.0)));
            b.row(format!("wlink_{}_{}", r + 1, i + 1), wlink, Sense::Eq, 0.0);

            for v in 0..nv {
                let z = b.id(&z_name(r, i, v));
                b.row(format!("zcap_{}_{}_{}", r + 1, i + 1, v + 1), vec![(z, 1.0), (xs[v], -big_m.m2)], Sense::Le, 0.0);
                let mut link = vec![(z, 1.0), (xs[v], -big_m.m3)];
                for o in 0..np {
                    link.push((b.id(&zl_name(r, i, o)), -1.0));
                    link.push((b.id(&zd_name(r, i, o)), -1.0));
                }
                b.row(format!("zlink_{}_{}_{}", r + 1, i + 1, v + 1), link, Sense::Ge, -big_m.m3);
            }

            b.row(format!("noreturn_{}_{}", r + 1, i + 1), vec![(b.id(&f_name(r, i, next)), 1.0)], Sense::Eq, 0.0);
            b.row(format!("nodisc_{}_{}", r + 1, i + 1), vec![(b.id(&zd_name(r, i, here)), 1.0)], Sense::Eq, 0.0);
        }
        for v in 0..nv {
            let vessel = &inst.vessels[v];
            let mut week = vec![(ns[v], HOURS_PER_WEEK), (xs[v], -big_m.m4[r])];
            for i in 0..calls {
                week.push((b.id(&z_name(r, i, v)), -vessel.handling_time_h_per_teu));
                for (a, &alpha) in speeds.iter().enumerate() {
                    week.push((b.id(&psi_name(r, i, a)), -route.leg_lengths_nm[i] / alpha));
                }
            }
            let rhs = calls as f64 * inst.fixed_port_hours - big_m.m4[r];
            b.row(format!("weekly_{}_{}", r + 1, v + 1), week, Sense::Ge, rhs);
        }
    }

    for d in 0..np {
        for o in 0..np {
            if o == d {
                continue;
            }
            let mut terms = Vec::new();
            for (r, i) in inst.calls_at(d) {
                terms.push((b.id(&zd_name(r, i, o)), 1.0));
                terms.push((b.id(&zl_name(r, i, o)), -1.0));
            }
            b.row(format!("demand_{}_{}", o + 1, d + 1), terms, Sense::Eq, inst.demand(o, d));
        }
    }

    for (q, quad) in quads.iter().enumerate() {
        let theta = b.id(&theta_name(q));
        let gamma = b.id(&gamma_name(q));
        let lag = vec![
            (b.id(&t_name(quad.r_prime, quad.i_prime)), 1.0),
            (b.id(&t_name(quad.r, quad.i)), -1.0),
            (gamma, HOURS_PER_WEEK),
            (theta, -1.0),
        ];
        b.row(format!("lag_{}", q + 1), lag, Sense::Eq, 0.0);
        let mut hi = vec![(gamma, 1.0)];
        hi.extend((0..nv).map(|v| (b.id(&n_name(quad.r, v)), -1.0)));
        b.row(format!("wrap_hi_{}", q + 1), hi, Sense::Le, 0.0);
        let mut lo = vec![(gamma, 1.0)];
        lo.extend((0..nv).map(|v| (b.id(&n_name(quad.r_prime, v)), 1.0)));
        b.row(format!("wrap_lo_{}", q + 1), lo, Sense::Ge, 0.0);

        let lams: Vec<usize> = hours.iter().map(|&h| b.id(&lam_name(q, h))).collect();
        b.row(format!("hour_pick_{}", q + 1), lams.iter().map(|&j| (j, 1.0)).collect(), Sense::Eq, 1.0);
        let mut hour: Vec<(usize, f64)> = lams.iter().zip(&hours).map(|(&j, &h)| (j, f64::from(h))).collect();
        hour.push((theta, -1.0));
        b.row(format!("hour_{}", q + 1), hour, Sense::Eq, 0.0);

        let p = quad.port;
        let local = exports[p] + imports[p];
        for (k, &h) in hours.iter().enumerate() {
            let half_h = 0.5 * f64::from(h);
            let mut terms = vec![(b.id(&del_name(p, q, h)), 1.0)];
            terms.extend(handled_at(&b, p, -half_h));
            terms.push((lams[k], -big_m.m5));
            b.row(format!("hold_{}_{}", q + 1, h), terms, Sense::Ge, -half_h * local - big_m.m5);
        }
    }

    let mut cost: Vec<(usize, f64)> = Vec::new();
    let mut time: Vec<(usize, f64)> = Vec::new();
    let sea = rates.c_fuel + rates.c_emis * rates.e_sea;
    for (r, route) in inst.routes.iter().enumerate() {
        for (v, vessel) in inst.vessels.iter().enumerate() {
            cost.push((b.id(&n_name(r, v)), vessel.c_opr));
            cost.push((b.id(&x_name(r, v)), vessel.c_fix[r]));
        }
        for i in 0..route.num_calls() {
            let leg = route.leg_lengths_nm[i];
            for (v, vessel) in inst.vessels.iter().enumerate() {
                let z = b.id(&z_name(r, i, v));
                cost.push((z, vessel.c_berth * vessel.handling_time_h_per_teu + rates.c_emis * rates.e_port));
                time.push((z, vessel.handling_time_h_per_teu));
                let fit = fits[v];
                for (a, &alpha) in speeds.iter().enumerate() {
                    let base = sea * leg * vessel.fuel_coeff_k * alpha * alpha / 24.0;
                    let phi = b.id(&phi_name(r, i, v, a));
                    cost.push((phi, base * fit.a));
                    cost.push((b.id(&w_name(r, i, v, a)), base * fit.b * rates.teu_weight_t));
                    time.push((phi, leg / alpha));
                }
            }
        }
    }
    for p in 0..np {
        cost.extend(handled_at(&b, p, 0.5 * rates.c_trans));
    }
    for (q, quad) in quads.iter().enumerate() {
        for &h in &hours {
            cost.push((b.id(&del_name(quad.port, q, h)), rates.c_hold));
        }
    }
    let constant = (rates.c_load + rates.c_disc) * total_d - 0.5 * rates.c_trans * (2.0 * total_d);
    cost.push((one, constant));

    Ok(MilpModel {
        vars: b.vars,
        rows: b.rows,
        cost: merge(cost),
        time: merge(time),
        big_m,
        fits,
        speeds,
        hours,
        quads,
        index: b.index,
    })
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], vars: &[Variable]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(ONE);
    }
    for (k, &(j, a)) in terms.iter().enumerate() {
        if k > 0 && k % 6 == 0 {
            out.push_str("\n  ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        if k == 0 && sign == '+' {
            let _ = write!(out, " {} {}", a, vars[j].name);
        } else {
            let _ = write!(out, " {sign} {} {}", a.abs(), vars[j].name);
        }
    }
}

/// CPLEX LP text for the model minimizing `which`.
pub fn lp_string(model: &MilpModel, which: Objective) -> String {
    let mut out = String::new();
    out.push_str(match which {
        Objective::Cost => "\\ objective: weekly cost\n",
        Objective::Time => "\\ objective: total time\n",
    });
    out.push_str("Minimize\n obj:");
    push_terms(&mut out, model.objective(which), &model.vars);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}:", row.name);
        push_terms(&mut out, &row.terms, &model.vars);
        let _ = writeln!(out, " {} {}", row.sense, row.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.kind == VarKind::Binary || (v.lo == 0.0 && v.hi == f64::INFINITY) {
            continue;
        }
        let _ = match (v.lo.is_finite(), v.hi.is_finite()) {
            _ if v.lo == v.hi => writeln!(out, " {} = {}", v.name, v.lo),
            (false, false) => writeln!(out, " {} free", v.name),
            (true, false) => writeln!(out, " {} >= {}", v.name, v.lo),
            (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, v.hi),
            (true, true) => writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi),
        };
    }
    for (label, kind) in [("General", VarKind::Integer), ("Binary", VarKind::Binary)] {
        let names: Vec<&str> = model.vars.iter().filter(|v| v.kind == kind).map(|v| v.name.as_str()).collect();
        if names.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{label}");
        for chunk in names.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(model: &MilpModel, which: Objective, path: &Path) -> Result<(), MilpError> {
    std::fs::write(path, lp_string(model, which))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Contents of an LP file in the subset this module writes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpFile {
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<LpRow>,
    /// Explicit bounds; unlisted continuous and integer variables are
    /// `[0, inf)`.
    pub bounds: HashMap<String, (f64, f64)>,
    pub general: Vec<String>,
    pub binary: Vec<String>,
}

fn number(tok: &str) -> Result<f64, MilpError> {
    match tok {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| MilpError::Parse(format!("expected a number, got {tok:?}"))),
    }
}

fn sense_of(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

/// Parses `[sign] [coef] name` terms until a sense token or the end.
fn parse_terms<'a>(toks: &mut std::iter::Peekable<impl Iterator<Item = &'a str>>) -> Result<Vec<(String, f64)>, MilpError> {
    let mut terms = Vec::new();
    while let Some(&tok) = toks.peek() {
        if sense_of(tok).is_some() {
            break;
        }
        toks.next();
        let mut sign = 1.0;
        let mut tok = tok;
        if tok == "+" || tok == "-" {
            if tok == "-" {
                sign = -1.0;
            }
            tok = toks.next().ok_or_else(|| MilpError::Parse("dangling sign".into()))?;
        }
        let (coef, name) = match tok.parse::<f64>() {
            Ok(c) => (c, toks.next().ok_or_else(|| MilpError::Parse("coefficient without variable".into()))?),
            Err(_) => (1.0, tok),
        };
        terms.push((name.to_string(), sign * coef));
    }
    Ok(terms)
}

pub fn read_lp(text: &str) -> Result<LpFile, MilpError> {
    #[derive(PartialEq)]
    enum Section {
        Head,
        Objective,
        Rows,
        Bounds,
        General,
        Binary,
        End,
    }
    let mut section = Section::Head;
    let mut objective_text = String::new();
    let mut rows_text = String::new();
    let mut lp = LpFile::default();
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let next = match line.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" | "min" => Some(Section::Objective),
            "subject to" | "st" | "s.t." => Some(Section::Rows),
            "bounds" => Some(Section::Bounds),
            "general" | "generals" | "gen" => Some(Section::General),
            "binary" | "binaries" | "bin" => Some(Section::Binary),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        match section {
            Section::Head | Section::End => return Err(MilpError::Parse(format!("unexpected line {line:?}"))),
            Section::Objective => {
                objective_text.push(' ');
                objective_text.push_str(line);
            }
            Section::Rows => {
                rows_text.push(' ');
                rows_text.push_str(line);
            }
            Section::Bounds => {
                let t: Vec<&str> = line.split_whitespace().collect();
                let (name, lo, hi) = match t.as_slice() {
                    [n, "free"] => (*n, f64::NEG_INFINITY, f64::INFINITY),
                    [n, "=", x] => (*n, number(x)?, number(x)?),
                    [n, ">=", x] => (*n, number(x)?, f64::INFINITY),
                    [n, "<=", x] => (*n, 0.0, number(x)?),
                    [lo, "<=", n, "<=", hi] => (*n, number(lo)?, number(hi)?),
                    _ => return Err(MilpError::Parse(format!("bad bound {line:?}"))),
                };
                lp.bounds.insert(name.to_string(), (lo, hi));
            }
            Section::General => lp.general.extend(line.split_whitespace().map(String::from)),
            Section::Binary => lp.binary.extend(line.split_whitespace().map(String::from)),
        }
    }
    if section != Section::End {
        return Err(MilpError::Parse("missing End".into()));
    }

    let mut toks = objective_text.split_whitespace().peekable();
    if toks.peek().is_some_and(|t| t.ends_with(':')) {
        toks.next();
    }
    lp.objective = parse_terms(&mut toks)?;

    let mut toks = rows_text.split_whitespace().peekable();
    while let Some(tok) = toks.next() {
        let name = tok
            .strip_suffix(':')
            .ok_or_else(|| MilpError::Parse(format!("expected a row name, got {tok:?}")))?;
        let terms = parse_terms(&mut toks)?;
        let sense = toks.next().and_then(sense_of).ok_or_else(|| MilpError::Parse(format!("row {name} has no sense")))?;
        let rhs = number(toks.next().ok_or_else(|| MilpError::Parse(format!("row {name} has no rhs")))?)?;
        lp.rows.push(LpRow { name: name.to_string(), terms, sense, rhs });
    }
    Ok(lp)
}

/// Encodes a decoded solution as model values. Speeds must sit on the grid
/// and transshipment lags on whole hours.
pub fn assignment_from_solution(model: &MilpModel, inst: &Instance, sol: &Solution) -> Result<Vec<f64>, MilpError> {
    let mut vals = vec![0.0; model.vars.len()];
    let mut set = |name: String, value: f64| -> Result<(), MilpError> {
        let j = model.var(&name).ok_or_else(|| MilpError::OffGrid(format!("no variable {name}")))?;
        vals[j] = value;
        Ok(())
    };
    set(ONE.into(), 1.0)?;
    let np = inst.num_ports();
    let flow = &sol.flow;
    for (r, route) in inst.routes.iter().enumerate() {
        let v = sol.class[r];
        set(x_name(r, v), 1.0)?;
        set(n_name(r, v), f64::from(sol.n[r]))?;
        for i in 0..=route.num_calls() {
            set(t_name(r, i), sol.schedule.t[r][i])?;
        }
        for i in 0..route.num_calls() {
            let u = sol.speeds[r][i];
            let a = model
                .speeds
                .iter()
                .position(|&s| (s - u).abs() <= 1e-9)
                .ok_or_else(|| MilpError::OffGrid(format!("speed {u} on leg {} of route {}", i + 1, r + 1)))?;
            set(u_name(r, i), model.speeds[a])?;
            set(psi_name(r, i, a), 1.0)?;
            set(phi_name(r, i, v, a), 1.0)?;
            set(w_name(r, i, v, a), flow.onboard(r, i))?;
            set(z_name(r, i, v), flow.handled(r, i))?;
            for o in 0..np {
                set(zl_name(r, i, o), flow.z_load[r][i][o])?;
                set(zd_name(r, i, o), flow.z_disc[r][i][o])?;
                set(f_name(r, i, o), flow.f[r][i][o])?;
            }
        }
    }
    for (q, quad) in model.quads.iter().enumerate() {
        let theta = sol.schedule.theta[q];
        let h = theta.round();
        if (theta - h).abs() > 1e-6 {
            return Err(MilpError::OffGrid(format!("lag {theta} of transshipment {}", q + 1)));
        }
        set(theta_name(q), h)?;
        set(gamma_name(q), sol.schedule.gamma[q] as f64)?;
        set(lam_name(q, h as u32), 1.0)?;
        let p = quad.port;
        let handled: f64 = inst.calls_at(p).into_iter().map(|(r, i)| flow.handled(r, i)).sum();
        let local = inst.demand_teu_per_week[p].iter().sum::<f64>() + inst.demand_teu_per_week.iter().map(|row| row[p]).sum::<f64>();
        set(del_name(p, q, h as u32), (0.5 * h * (handled - local)).max(0.0))?;
    }
    Ok(vals)
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub linear_f1: f64,
    pub linear_f2: f64,
    pub solution: Solution,
    pub f1_gap: f64,
    pub f2_gap: f64,
    /// Largest F1 error the displacement fit can cause at these speeds.
    pub fit_bound: f64,
}

/// Checks every bound, integrality marker and row, then rebuilds the
/// decision and evaluates it with the nonlinear model.
pub fn verify_assignment(model: &MilpModel, inst: &Instance, values: &[f64]) -> Result<VerifyReport, MilpError> {
    if values.len() != model.vars.len() {
        return Err(MilpError::Shape { got: values.len(), want: model.vars.len() });
    }
    for (v, &x) in model.vars.iter().zip(values) {
        let tol = 1e-9 * (1.0 + x.abs());
        let off_int = v.kind != VarKind::Continuous && (x - x.round()).abs() > 1e-9;
        if !x.is_finite() || x < v.lo - tol || x > v.hi + tol || off_int {
            return Err(MilpError::Variable { name: v.name.clone(), value: x });
        }
    }
    for row in &model.rows {
        if let Some(lhs) = row.violation(values) {
            return Err(MilpError::Row { row: row.name.clone(), lhs, sense: row.sense, rhs: row.rhs });
        }
    }
    let val = |name: String| values[model.index[&name]];
    let np = inst.num_ports();
    let nv = inst.vessels.len();
    let mut class = Vec::new();
    let mut n = Vec::new();
    let mut speeds = Vec::new();
    let mut start = Vec::new();
    let mut flow = FlowAssignment::zeros(inst);
    for (r, route) in inst.routes.iter().enumerate() {
        let v = (0..nv).find(|&v| val(x_name(r, v)) > 0.5).expect("class row holds");
        class.push(v);
        n.push((0..nv).map(|v| val(n_name(r, v))).sum::<f64>().round() as u32);
        start.push(val(t_name(r, 0)));
        let mut row_speeds = Vec::new();
        for i in 0..route.num_calls() {
            let a = (0..model.speeds.len()).find(|&a| val(psi_name(r, i, a)) > 0.5).expect("speed pick row holds");
            row_speeds.push(model.speeds[a]);
            for o in 0..np {
                flow.z_load[r][i][o] = val(zl_name(r, i, o));
                flow.z_disc[r][i][o] = val(zd_name(r, i, o));
                flow.f[r][i][o] = val(f_name(r, i, o));
            }
        }
        speeds.push(row_speeds);
    }
    let mut fit_bound = 0.0;
    let rates = &inst.rates;
    for (r, route) in inst.routes.iter().enumerate() {
        let vessel = &inst.vessels[class[r]];
        for i in 0..route.num_calls() {
            let u = speeds[r][i];
            fit_bound += (rates.c_fuel + rates.c_emis * rates.e_sea) * route.leg_lengths_nm[i] / 24.0
                * vessel.fuel_coeff_k
                * u
                * u
                * model.fits[class[r]].max_residual;
        }
    }
    let prob = Problem::new(inst.clone());
    let solution = evaluate(&prob, class, Some(n), speeds, &start, flow);
    let linear_f1 = model.objective_value(Objective::Cost, values);
    let linear_f2 = model.objective_value(Objective::Time, values);
    Ok(VerifyReport {
        linear_f1,
        linear_f2,
        f1_gap: (linear_f1 - solution.f1).abs(),
        f2_gap: (linear_f2 - solution.f2).abs(),
        fit_bound,
        solution,
    })
}
