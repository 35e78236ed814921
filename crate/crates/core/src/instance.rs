//! Problem data: ports, service rotations, vessel classes, rates and the
//! weekly origin-destination demand.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog;
use crate::paths;
use crate::rng;

/// Demand is stored on a dyadic grid so that flow sums are exact in `f64`.
pub const DEMAND_QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

/// Sum of all demand must stay below this for exact flow arithmetic.
const MAX_TOTAL_DEMAND: f64 = (1u64 << 31) as f64;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Validation(String),
    #[error("infeasible size combination: {0}")]
    Size(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, InstanceError> {
    Err(InstanceError::Validation(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub id: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: u32,
    /// Port index of each call, in rotation order.
    pub port_calls: Vec<usize>,
    /// Leg `i` sails from call `i` to call `i + 1`, wrapping to call 0.
    pub leg_lengths_nm: Vec<f64>,
    pub n_min: u32,
    pub n_max: u32,
}

impl Route {
    pub fn num_calls(&self) -> usize {
        self.port_calls.len()
    }

    pub fn next_call(&self, i: usize) -> usize {
        (i + 1) % self.port_calls.len()
    }

    pub fn prev_call(&self, i: usize) -> usize {
        (i + self.port_calls.len() - 1) % self.port_calls.len()
    }

    pub fn call_of_port(&self, port: usize) -> Option<usize> {
        self.port_calls.iter().position(|&p| p == port)
    }

    pub fn total_length_nm(&self) -> f64 {
        self.leg_lengths_nm.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselClass {
    pub id: u32,
    pub capacity_teu: f64,
    /// Operating cost per vessel, USD/week.
    pub c_opr: f64,
    /// Berth occupancy charge, USD/hour.
    pub c_berth: f64,
    /// Voyage fixed cost per route, USD/week, indexed like `Instance::routes`.
    pub c_fix: Vec<f64>,
    pub handling_time_h_per_teu: f64,
    /// Lightweight plus stores, fuel, water and crew, tons.
    pub empty_weight_t: f64,
    #[serde(default = "default_fuel_coeff")]
    pub fuel_coeff_k: f64,
}

fn default_fuel_coeff() -> f64 {
    catalog::DEFAULT_FUEL_COEFF
}

fn default_teu_weight() -> f64 {
    catalog::DEFAULT_TEU_WEIGHT_T
}

/// Port charges are uniform across ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRates {
    pub c_load: f64,
    pub c_disc: f64,
    pub c_trans: f64,
    /// USD per TEU per hour.
    pub c_hold: f64,
    /// USD per ton of fuel.
    pub c_fuel: f64,
    /// USD per ton of CO2.
    pub c_emis: f64,
    /// Tons CO2 per ton of fuel burnt at sea.
    pub e_sea: f64,
    /// Tons CO2 per TEU handled in port.
    pub e_port: f64,
    #[serde(default = "default_teu_weight")]
    pub teu_weight_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransshipmentQuad {
    pub r: usize,
    pub i: usize,
    pub r_prime: usize,
    pub i_prime: usize,
    pub port: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub ports: Vec<Port>,
    pub routes: Vec<Route>,
    pub vessels: Vec<VesselClass>,
    /// `demand_teu_per_week[o][d]`.
    pub demand_teu_per_week: Vec<Vec<f64>>,
    pub rates: CostRates,
    pub speed_min_kn: f64,
    pub speed_max_kn: f64,
    pub fixed_port_hours: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PortRef {
    Index(usize),
    Id(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteFile {
    id: u32,
    port_calls: Vec<PortRef>,
    leg_lengths_nm: Vec<f64>,
    n_min: u32,
    n_max: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandFile {
    o: PortRef,
    d: PortRef,
    teu: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    ports: Vec<String>,
    routes: Vec<RouteFile>,
    vessels: Vec<VesselClass>,
    demand: Vec<DemandFile>,
    rates: CostRates,
    speed_min_kn: f64,
    speed_max_kn: f64,
    #[serde(default)]
    fixed_port_hours: f64,
}

fn resolve(port: &PortRef, ids: &HashMap<&str, usize>, n: usize) -> Result<usize, InstanceError> {
    match port {
        PortRef::Index(i) if *i < n => Ok(*i),
        PortRef::Index(i) => invalid(format!("port index {i} out of range")),
        PortRef::Id(s) => ids
            .get(s.as_str())
            .copied()
            .map_or_else(|| invalid(format!("unknown port '{s}'")), Ok),
    }
}

impl Instance {
    pub fn num_ports(&self) -> usize {
        self.ports.len()
    }

    pub fn demand(&self, o: usize, d: usize) -> f64 {
        self.demand_teu_per_week[o][d]
    }

    pub fn total_demand(&self) -> f64 {
        self.demand_teu_per_week.iter().flatten().sum()
    }

    pub fn port_index(&self, id: &str) -> Option<usize> {
        self.ports.iter().position(|p| p.id == id)
    }

    /// All `(route, call)` pairs visiting `port`.
    pub fn calls_at(&self, port: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, route) in self.routes.iter().enumerate() {
            for (i, &p) in route.port_calls.iter().enumerate() {
                if p == port {
                    out.push((r, i));
                }
            }
        }
        out
    }

    /// Total number of legs (equivalently port calls) across all routes.
    pub fn num_legs(&self) -> usize {
        self.routes.iter().map(Route::num_calls).sum()
    }

    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        let n = file.ports.len();
        let mut ids = HashMap::new();
        for (i, id) in file.ports.iter().enumerate() {
            if ids.insert(id.as_str(), i).is_some() {
                return invalid(format!("duplicate port id '{id}'"));
            }
        }
        let mut routes = Vec::with_capacity(file.routes.len());
        for r in &file.routes {
            let calls = r
                .port_calls
                .iter()
                .map(|p| resolve(p, &ids, n))
                .collect::<Result<Vec<_>, _>>()?;
            routes.push(Route {
                id: r.id,
                port_calls: calls,
                leg_lengths_nm: r.leg_lengths_nm.clone(),
                n_min: r.n_min,
                n_max: r.n_max,
            });
        }
        let mut demand = vec![vec![0.0; n]; n];
        for entry in &file.demand {
            let o = resolve(&entry.o, &ids, n)?;
            let d = resolve(&entry.d, &ids, n)?;
            demand[o][d] += entry.teu;
        }
        let inst = Instance {
            ports: file
                .ports
                .iter()
                .enumerate()
                .map(|(index, id)| Port { id: id.clone(), index })
                .collect(),
            routes,
            vessels: file.vessels,
            demand_teu_per_week: demand,
            rates: file.rates,
            speed_min_kn: file.speed_min_kn,
            speed_max_kn: file.speed_max_kn,
            fixed_port_hours: file.fixed_port_hours,
        };
        inst.validated()
    }

    /// Serializes with port ids; demand entries with zero TEU are omitted.
    pub fn to_json_string(&self) -> String {
        let id = |p: usize| PortRef::Id(self.ports[p].id.clone());
        let mut demand = Vec::new();
        for (o, row) in self.demand_teu_per_week.iter().enumerate() {
            for (d, &teu) in row.iter().enumerate() {
                if teu > 0.0 {
                    demand.push(DemandFile { o: id(o), d: id(d), teu });
                }
            }
        }
        let file = InstanceFile {
            ports: self.ports.iter().map(|p| p.id.clone()).collect(),
            routes: self
                .routes
                .iter()
                .map(|r| RouteFile {
                    id: r.id,
                    port_calls: r.port_calls.iter().map(|&p| id(p)).collect(),
                    leg_lengths_nm: r.leg_lengths_nm.clone(),
                    n_min: r.n_min,
                    n_max: r.n_max,
                })
                .collect(),
            vessels: self.vessels.clone(),
            demand,
            rates: self.rates.clone(),
            speed_min_kn: self.speed_min_kn,
            speed_max_kn: self.speed_max_kn,
            fixed_port_hours: self.fixed_port_hours,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    /// Snaps demand onto [`DEMAND_QUANTUM`] and checks every invariant,
    /// returning the first violation.
    pub fn validated(mut self) -> Result<Self, InstanceError> {
        for row in &mut self.demand_teu_per_week {
            for v in row.iter_mut() {
                *v = (*v / DEMAND_QUANTUM).round() * DEMAND_QUANTUM;
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let n = self.ports.len();
        if n == 0 {
            return invalid("no ports");
        }
        let mut seen = BTreeSet::new();
        for (i, p) in self.ports.iter().enumerate() {
            if p.index != i {
                return invalid(format!("port '{}' has index {} at position {i}", p.id, p.index));
            }
            if !seen.insert(p.id.as_str()) {
                return invalid(format!("duplicate port id '{}'", p.id));
            }
        }
        if self.routes.is_empty() {
            return invalid("no routes");
        }
        for route in &self.routes {
            let calls = route.port_calls.len();
            if calls < 2 {
                return invalid(format!("route {} has fewer than 2 port calls", route.id));
            }
            if route.leg_lengths_nm.len() != calls {
                return invalid(format!(
                    "route {} has {} legs for {} port calls",
                    route.id,
                    route.leg_lengths_nm.len(),
                    calls
                ));
            }
            if let Some(l) = route.leg_lengths_nm.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
                return invalid(format!("nonpositive leg length {l} on route {}", route.id));
            }
            if route.port_calls.iter().any(|&p| p >= n) {
                return invalid(format!("route {} calls an unknown port", route.id));
            }
            let distinct: BTreeSet<usize> = route.port_calls.iter().copied().collect();
            if distinct.len() != calls {
                return invalid(format!("route {} calls the same port twice", route.id));
            }
            if route.n_min < 1 || route.n_min > route.n_max {
                return invalid(format!(
                    "route {} needs 1 <= n_min <= n_max (got {}..{})",
                    route.id, route.n_min, route.n_max
                ));
            }
        }
        if self.vessels.is_empty() {
            return invalid("no vessel classes");
        }
        for v in &self.vessels {
            let rates = [v.c_opr, v.c_berth, v.handling_time_h_per_teu];
            if rates.iter().any(|x| !(*x >= 0.0)) || v.c_fix.iter().any(|x| !(*x >= 0.0)) {
                return invalid(format!("vessel class {} has a negative rate", v.id));
            }
            if v.c_fix.len() != self.routes.len() {
                return invalid(format!(
                    "vessel class {} lists {} route fixed costs for {} routes",
                    v.id,
                    v.c_fix.len(),
                    self.routes.len()
                ));
            }
            if !(v.capacity_teu > 0.0) || !(v.fuel_coeff_k > 0.0) || !(v.empty_weight_t > 0.0) {
                return invalid(format!(
                    "vessel class {} needs positive capacity, fuel coefficient and empty weight",
                    v.id
                ));
            }
        }
        let r = &self.rates;
        let all = [r.c_load, r.c_disc, r.c_trans, r.c_hold, r.c_fuel, r.c_emis, r.e_sea, r.e_port];
        if all.iter().any(|x| !(*x >= 0.0)) {
            return invalid("negative cost or emission rate");
        }
        if !(r.teu_weight_t > 0.0) {
            return invalid("teu_weight_t must be positive");
        }
        if !(self.speed_min_kn > 0.0) || !(self.speed_min_kn <= self.speed_max_kn) {
            return invalid("speed bounds must satisfy 0 < speed_min_kn <= speed_max_kn");
        }
        if !(self.fixed_port_hours >= 0.0) {
            return invalid("fixed_port_hours must be nonnegative");
        }
        if self.demand_teu_per_week.len() != n || self.demand_teu_per_week.iter().any(|row| row.len() != n) {
            return invalid("demand matrix shape does not match ports");
        }
        for o in 0..n {
            if self.demand_teu_per_week[o][o] != 0.0 {
                return invalid(format!("self-demand at port '{}'", self.ports[o].id));
            }
            for d in 0..n {
                let v = self.demand_teu_per_week[o][d];
                if !(v >= 0.0) || !v.is_finite() {
                    return invalid(format!(
                        "negative demand {} -> {}",
                        self.ports[o].id, self.ports[d].id
                    ));
                }
            }
        }
        if self.total_demand() >= MAX_TOTAL_DEMAND {
            return invalid("total demand too large");
        }
        for o in 0..n {
            for d in 0..n {
                if self.demand_teu_per_week[o][d] > 0.0 && !paths::is_connected(self, o, d) {
                    return invalid(format!(
                        "disconnected OD pair {} -> {}",
                        self.ports[o].id, self.ports[d].id
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Instance::from_json_str(&text)
}

/// Every ordered pair of distinct calls at the same port, sorted by
/// `(r, i, r', i')`.
pub fn derive_transshipments(inst: &Instance) -> Vec<TransshipmentQuad> {
    let mut out = Vec::new();
    for (r, route) in inst.routes.iter().enumerate() {
        for (i, &p) in route.port_calls.iter().enumerate() {
            for (r2, route2) in inst.routes.iter().enumerate() {
                for (i2, &p2) in route2.port_calls.iter().enumerate() {
                    if p == p2 && (r, i) != (r2, i2) {
                        out.push(TransshipmentQuad { r, i, r_prime: r2, i_prime: i2, port: p });
                    }
                }
            }
        }
    }
    out
}

/// The full six-rotation reference network with seeded demand.
pub fn reference_network(seed: u64, demand_scale: f64) -> Result<Instance, InstanceError> {
    let routes: Vec<Vec<(String, f64)>> = catalog::ROTATIONS
        .iter()
        .map(|rot| rot.iter().map(|(p, l)| (p.to_string(), *l)).collect())
        .collect();
    let ids: Vec<u32> = (1..=6).collect();
    let fix_rows: Vec<usize> = (0..6).collect();
    assemble(&routes, &ids, &fix_rows, catalog::NUM_CLASSES, seed, demand_scale)
}

/// Builds an instance with the requested size.
///
/// Routes are taken from the reference rotations when some combination of
/// them covers exactly `n_ports` ports, possibly after dropping unshared
/// calls (sub-rotations). Otherwise a chain of synthetic rotations joined at
/// hub ports is generated. Demand for every connected ordered pair is drawn
/// uniformly from `[0, demand_scale]` and rounded to whole TEU.
pub fn generate_instance(
    n_ports: usize,
    n_routes: usize,
    n_vessels: usize,
    seed: u64,
    demand_scale: f64,
) -> Result<Instance, InstanceError> {
    if n_ports < 2 {
        return Err(InstanceError::Size("need at least 2 ports".into()));
    }
    if n_routes < 1 {
        return Err(InstanceError::Size("need at least 1 route".into()));
    }
    if !(1..=catalog::NUM_CLASSES).contains(&n_vessels) {
        return Err(InstanceError::Size(format!(
            "vessel classes must be between 1 and {}",
            catalog::NUM_CLASSES
        )));
    }
    if !(demand_scale >= 0.0) || !demand_scale.is_finite() {
        return Err(InstanceError::Size("demand scale must be finite and nonnegative".into()));
    }
    let mut net_rng = rng::stream(seed, "instance/network");
    if let Some((routes, ids, rows)) = catalog_subnetwork(n_ports, n_routes, &mut net_rng) {
        return assemble(&routes, &ids, &rows, n_vessels, seed, demand_scale);
    }
    if n_ports < n_routes + 1 {
        return Err(InstanceError::Size(format!(
            "{n_routes} routes of at least two calls cannot be chained over {n_ports} ports"
        )));
    }
    let (routes, ids, rows) = synthetic_network(n_ports, n_routes, &mut net_rng);
    assemble(&routes, &ids, &rows, n_vessels, seed, demand_scale)
}

type Network = (Vec<Vec<(String, f64)>>, Vec<u32>, Vec<usize>);

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn port_union(routes: &[Vec<(String, f64)>]) -> BTreeSet<String> {
    routes.iter().flat_map(|r| r.iter().map(|(p, _)| p.clone())).collect()
}

fn is_linked(routes: &[Vec<(String, f64)>]) -> bool {
    let sets: Vec<BTreeSet<&str>> = routes
        .iter()
        .map(|r| r.iter().map(|(p, _)| p.as_str()).collect())
        .collect();
    let mut reached = vec![false; sets.len()];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(a) = stack.pop() {
        for b in 0..sets.len() {
            if !reached[b] && !sets[a].is_disjoint(&sets[b]) {
                reached[b] = true;
                stack.push(b);
            }
        }
    }
    reached.into_iter().all(|x| x)
}

fn catalog_subnetwork(n_ports: usize, n_routes: usize, rng: &mut rng::Rng) -> Option<Network> {
    let pool = catalog::ROTATIONS.len();
    if n_routes > pool {
        return None;
    }
    let owned = |idx: usize| -> Vec<(String, f64)> {
        catalog::ROTATIONS[idx].iter().map(|(p, l)| (p.to_string(), *l)).collect()
    };
    // (disconnected, excess ports, combination)
    let mut candidates: Vec<(bool, usize, Vec<usize>)> = combinations(pool, n_routes)
        .into_iter()
        .filter_map(|combo| {
            let routes: Vec<_> = combo.iter().map(|&i| owned(i)).collect();
            let union = port_union(&routes).len();
            (union >= n_ports).then(|| (!is_linked(&routes), union - n_ports, combo))
        })
        .collect();
    candidates.sort();
    while !candidates.is_empty() {
        let key = (candidates[0].0, candidates[0].1);
        let tied = candidates.iter().take_while(|c| (c.0, c.1) == key).count();
        let pick = rng.gen_range(0..tied);
        let (_, _, combo) = candidates.remove(pick);
        let mut routes: Vec<_> = combo.iter().map(|&i| owned(i)).collect();
        if shrink_to(&mut routes, n_ports, rng) {
            let ids = combo.iter().map(|&i| i as u32 + 1).collect();
            return Some((routes, ids, combo));
        }
    }
    None
}

/// Drops calls at ports served by a single route until the union has
/// `n_ports` ports. The dropped call's outgoing leg is merged into the
/// incoming one.
fn shrink_to(routes: &mut [Vec<(String, f64)>], n_ports: usize, rng: &mut rng::Rng) -> bool {
    loop {
        let union = port_union(routes);
        if union.len() == n_ports {
            return true;
        }
        let mut usage: BTreeMap<&str, usize> = BTreeMap::new();
        for r in routes.iter() {
            for (p, _) in r {
                *usage.entry(p.as_str()).or_default() += 1;
            }
        }
        let removable: Vec<(usize, usize)> = routes
            .iter()
            .enumerate()
            .filter(|(_, r)| r.len() > 2)
            .flat_map(|(k, r)| {
                r.iter()
                    .enumerate()
                    .filter(|(_, (p, _))| usage[p.as_str()] == 1)
                    .map(move |(j, _)| (k, j))
            })
            .collect();
        let Some(&(k, j)) = removable.choose(rng) else {
            return false;
        };
        let route = &mut routes[k];
        let len = route.len();
        let dropped = route[j].1;
        let prev = (j + len - 1) % len;
        route[prev].1 += dropped;
        route.remove(j);
    }
}

fn synthetic_network(n_ports: usize, n_routes: usize, rng: &mut rng::Rng) -> Network {
    let names: Vec<String> = (1..=n_ports).map(|i| format!("S{i:02}")).collect();
    let total_calls = n_ports + n_routes - 1;
    let base = total_calls / n_routes;
    let extra = total_calls % n_routes;
    let mut routes = Vec::with_capacity(n_routes);
    let mut next_port = 0;
    for k in 0..n_routes {
        let len = base + usize::from(k < extra);
        let mut calls = Vec::with_capacity(len);
        if k > 0 {
            // hub shared with the previous route
            calls.push(next_port - 1);
        }
        while calls.len() < len {
            calls.push(next_port);
            next_port += 1;
        }
        routes.push(
            calls
                .into_iter()
                .map(|p| (names[p].clone(), rng.gen_range(200..=1500) as f64))
                .collect::<Vec<_>>(),
        );
    }
    let ids = (1..=n_routes as u32).collect();
    let rows = (0..n_routes).map(|k| k % catalog::ROTATIONS.len()).collect();
    (routes, ids, rows)
}

fn assemble(
    routes: &[Vec<(String, f64)>],
    route_ids: &[u32],
    fix_rows: &[usize],
    n_vessels: usize,
    seed: u64,
    demand_scale: f64,
) -> Result<Instance, InstanceError> {
    // ports in first-visit order
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for r in routes {
        for (p, _) in r {
            if !index.contains_key(p) {
                index.insert(p.clone(), ids.len());
                ids.push(p.clone());
            }
        }
    }
    let n = ids.len();
    let mut inst = Instance {
        ports: ids
            .into_iter()
            .enumerate()
            .map(|(index, id)| Port { id, index })
            .collect(),
        routes: routes
            .iter()
            .zip(route_ids)
            .map(|(r, &id)| Route {
                id,
                port_calls: r.iter().map(|(p, _)| index[p]).collect(),
                leg_lengths_nm: r.iter().map(|(_, l)| *l).collect(),
                n_min: 1,
                n_max: catalog::MAX_SHIPS_PER_ROUTE,
            })
            .collect(),
        vessels: (0..n_vessels).map(|v| catalog::vessel_class(v, fix_rows)).collect(),
        demand_teu_per_week: vec![vec![0.0; n]; n],
        rates: catalog::default_rates(),
        speed_min_kn: catalog::SPEED_MIN_KN,
        speed_max_kn: catalog::SPEED_MAX_KN,
        fixed_port_hours: 0.0,
    };
    let mut demand_rng = rng::stream(seed, "instance/demand");
    for o in 0..n {
        for d in 0..n {
            if o != d && paths::is_connected(&inst, o, d) {
                let x: f64 = demand_rng.gen::<f64>() * demand_scale;
                inst.demand_teu_per_week[o][d] = x.round();
            }
        }
    }
    inst.validated()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_port_json(extra_demand: &str, legs: &str) -> String {
        format!(
            r#"{{
  "ports": ["A", "B"],
  "routes": [{{"id": 1, "port_calls": ["A", "B"], "leg_lengths_nm": {legs}, "n_min": 1, "n_max": 15}}],
  "vessels": [{{"id": 1, "capacity_teu": 2400, "c_opr": 37485, "c_berth": 500, "c_fix": [154791],
               "handling_time_h_per_teu": 0.025, "empty_weight_t": 21832}}],
  "demand": [{{"o": "A", "d": "B", "teu": 100}}{extra_demand}],
  "rates": {{"c_load": 150, "c_disc": 150, "c_trans": 150, "c_hold": 1.25, "c_fuel": 500,
            "c_emis": 32, "e_sea": 3.082, "e_port": 0.01729}},
  "speed_min_kn": 14, "speed_max_kn": 24
}}"#
        )
    }

    #[test]
    fn parses_minimal_file_with_defaults() {
        let inst = Instance::from_json_str(&two_port_json("", "[300, 300]")).unwrap();
        assert_eq!(inst.ports.len(), 2);
        assert_eq!(inst.vessels[0].fuel_coeff_k, 7.0e-6);
        assert_eq!(inst.rates.teu_weight_t, 10.0);
        assert_eq!(inst.fixed_port_hours, 0.0);
        assert_eq!(inst.demand(0, 1), 100.0);
    }

    #[test]
    fn rejects_self_demand() {
        let err = Instance::from_json_str(&two_port_json(r#", {"o": "A", "d": "A", "teu": 5}"#, "[300, 300]"))
            .unwrap_err();
        assert!(err.to_string().contains("self-demand"), "{err}");
    }

    #[test]
    fn rejects_zero_leg() {
        let err = Instance::from_json_str(&two_port_json("", "[300, 0]")).unwrap_err();
        assert!(err.to_string().contains("nonpositive leg"), "{err}");
    }

    #[test]
    fn rejects_malformed_json() {
        let err = Instance::from_json_str("{ not json").unwrap_err();
        assert!(matches!(err, InstanceError::Parse(_)));
    }

    #[test]
    fn rejects_disconnected_demand() {
        let text = r#"{
  "ports": ["A", "B", "C", "D"],
  "routes": [{"id": 1, "port_calls": [0, 1], "leg_lengths_nm": [100, 100], "n_min": 1, "n_max": 3},
             {"id": 2, "port_calls": [2, 3], "leg_lengths_nm": [100, 100], "n_min": 1, "n_max": 3}],
  "vessels": [{"id": 1, "capacity_teu": 100, "c_opr": 1, "c_berth": 1, "c_fix": [1, 1],
               "handling_time_h_per_teu": 0.01, "empty_weight_t": 1000}],
  "demand": [{"o": 0, "d": 3, "teu": 10}],
  "rates": {"c_load": 0, "c_disc": 0, "c_trans": 0, "c_hold": 0, "c_fuel": 0,
            "c_emis": 0, "e_sea": 0, "e_port": 0},
  "speed_min_kn": 14, "speed_max_kn": 24
}"#;
        let err = Instance::from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn json_round_trip_is_stable() {
        let inst = generate_instance(10, 2, 3, 42, 200.0).unwrap();
        let text = inst.to_json_string();
        let back = Instance::from_json_str(&text).unwrap();
        assert_eq!(inst, back);
        assert_eq!(text, back.to_json_string());
    }

    #[test]
    fn two_routes_sharing_one_port_give_two_quads() {
        let text = r#"{
  "ports": ["A", "SIN", "C"],
  "routes": [{"id": 1, "port_calls": ["A", "SIN"], "leg_lengths_nm": [100, 100], "n_min": 1, "n_max": 3},
             {"id": 2, "port_calls": ["SIN", "C"], "leg_lengths_nm": [100, 100], "n_min": 1, "n_max": 3}],
  "vessels": [{"id": 1, "capacity_teu": 100, "c_opr": 1, "c_berth": 1, "c_fix": [1, 1],
               "handling_time_h_per_teu": 0.01, "empty_weight_t": 1000}],
  "demand": [],
  "rates": {"c_load": 0, "c_disc": 0, "c_trans": 0, "c_hold": 0, "c_fuel": 0,
            "c_emis": 0, "e_sea": 0, "e_port": 0},
  "speed_min_kn": 14, "speed_max_kn": 24
}"#;
        let inst = Instance::from_json_str(text).unwrap();
        let quads = derive_transshipments(&inst);
        assert_eq!(
            quads,
            vec![
                TransshipmentQuad { r: 0, i: 1, r_prime: 1, i_prime: 0, port: 1 },
                TransshipmentQuad { r: 1, i: 0, r_prime: 0, i_prime: 1, port: 1 },
            ]
        );
    }

    #[test]
    fn single_route_has_no_quads() {
        let inst = generate_instance(4, 1, 1, 3, 10.0).unwrap();
        assert!(derive_transshipments(&inst).is_empty());
    }

    #[test]
    fn rotations_one_and_five_share_four_ports() {
        let net = reference_network(1, 0.0).unwrap();
        let quads = derive_transshipments(&net);
        let between: Vec<_> = quads
            .iter()
            .filter(|q| (q.r == 0 && q.r_prime == 4) || (q.r == 4 && q.r_prime == 0))
            .collect();
        // brute-force scan over the two rotations
        let mut expected = 0;
        for (a, _) in catalog::ROTATIONS[0] {
            for (b, _) in catalog::ROTATIONS[4] {
                if a == b {
                    expected += 2;
                }
            }
        }
        assert_eq!(expected, 8);
        assert_eq!(between.len(), expected);
    }

    #[test]
    fn reference_network_shape() {
        let net = reference_network(1, 100.0).unwrap();
        assert_eq!(net.ports.len(), 24);
        assert_eq!(net.routes.len(), 6);
        assert_eq!(net.vessels.len(), 5);
        for r in &net.routes {
            assert_eq!(r.port_calls.len(), r.leg_lengths_nm.len());
        }
    }

    #[test]
    fn transshipments_are_symmetric() {
        let net = reference_network(1, 0.0).unwrap();
        let quads = derive_transshipments(&net);
        let set: BTreeSet<_> = quads.iter().map(|q| (q.r, q.i, q.r_prime, q.i_prime)).collect();
        for q in &quads {
            assert!(set.contains(&(q.r_prime, q.i_prime, q.r, q.i)));
            assert_eq!(net.routes[q.r].port_calls[q.i], net.routes[q.r_prime].port_calls[q.i_prime]);
        }
        let mut sorted = quads.clone();
        sorted.sort();
        assert_eq!(sorted, quads);
    }

    #[test]
    fn generator_matches_requested_sizes() {
        for &(p, r, v) in &[(10, 2, 3), (13, 2, 3), (16, 3, 4), (18, 3, 4), (24, 4, 5), (27, 4, 5)] {
            let inst = generate_instance(p, r, v, 42, 200.0).unwrap();
            assert_eq!((inst.ports.len(), inst.routes.len(), inst.vessels.len()), (p, r, v));
        }
    }

    #[test]
    fn generator_zero_demand_toy() {
        let inst = generate_instance(2, 1, 1, 0, 0.0).unwrap();
        assert_eq!(inst.ports.len(), 2);
        assert_eq!(inst.total_demand(), 0.0);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_instance(13, 2, 3, 9, 150.0).unwrap().to_json_string();
        let b = generate_instance(13, 2, 3, 9, 150.0).unwrap().to_json_string();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_rejects_bad_sizes() {
        assert!(matches!(generate_instance(1, 1, 1, 0, 1.0), Err(InstanceError::Size(_))));
        assert!(matches!(generate_instance(5, 0, 1, 0, 1.0), Err(InstanceError::Size(_))));
        assert!(matches!(generate_instance(5, 1, 6, 0, 1.0), Err(InstanceError::Size(_))));
        assert!(matches!(generate_instance(3, 7, 1, 0, 1.0), Err(InstanceError::Size(_))));
    }
}
