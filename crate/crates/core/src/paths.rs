//! Candidate container paths and the flow variables they induce.
//!
//! A path is a chain of route segments. Flows derived from any nonnegative
//! path allocation satisfy demand fulfilment, per-call conservation and the
//! no-return / no-origin-discharge rules by construction; only vessel
//! capacity is left to the evaluator.

use crate::instance::{Instance, TransshipmentQuad};

pub const MAX_TRANSSHIPMENTS: usize = 2;

/// Ride on route `r` from call `on` to call `off`, sailing legs
/// `on, on+1, .., off-1` (indices modulo the rotation length).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    pub r: usize,
    pub on: usize,
    pub off: usize,
}

impl Segment {
    pub fn legs(&self, calls: usize) -> impl Iterator<Item = usize> {
        let len = (self.off + calls - self.on) % calls;
        let on = self.on;
        (0..len).map(move |k| (on + k) % calls)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CargoPath {
    pub origin: usize,
    pub destination: usize,
    pub segments: Vec<Segment>,
    pub transshipment_calls: Vec<TransshipmentQuad>,
}

impl CargoPath {
    pub fn num_transshipments(&self) -> usize {
        self.transshipment_calls.len()
    }

    /// How many times the path changes vessel at `port`.
    pub fn transshipments_at(&self, port: usize) -> usize {
        self.transshipment_calls.iter().filter(|q| q.port == port).count()
    }
}

/// `z_load[r][i][o]`, `z_disc[r][i][o]` at call `i`, `f[r][i][o]` onboard on
/// leg `i`; `o` is the cargo's original origin port.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    pub z_load: Vec<Vec<Vec<f64>>>,
    pub z_disc: Vec<Vec<Vec<f64>>>,
    pub f: Vec<Vec<Vec<f64>>>,
}

impl FlowAssignment {
    pub fn zeros(inst: &Instance) -> Self {
        let n = inst.num_ports();
        let shape: Vec<Vec<Vec<f64>>> = inst
            .routes
            .iter()
            .map(|r| vec![vec![0.0; n]; r.num_calls()])
            .collect();
        FlowAssignment { z_load: shape.clone(), z_disc: shape.clone(), f: shape }
    }

    /// Σ_o (z_load + z_disc) at call `(r, i)`.
    pub fn handled(&self, r: usize, i: usize) -> f64 {
        self.z_load[r][i].iter().sum::<f64>() + self.z_disc[r][i].iter().sum::<f64>()
    }

    /// Σ_o f on leg `(r, i)`.
    pub fn onboard(&self, r: usize, i: usize) -> f64 {
        self.f[r][i].iter().sum()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let s = |t: &Vec<Vec<Vec<f64>>>| {
            t.iter()
                .map(|a| a.iter().map(|b| b.iter().map(|x| x * lambda).collect()).collect())
                .collect()
        };
        FlowAssignment { z_load: s(&self.z_load), z_disc: s(&self.z_disc), f: s(&self.f) }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("allocation for {o} -> {d} sums to {got} TEU, demand is {want}")]
    DemandMismatch { o: usize, d: usize, got: f64, want: f64 },
    #[error("negative or non-finite path quantity for {o} -> {d}")]
    BadQuantity { o: usize, d: usize },
    #[error("path quantities for {o} -> {d} do not match its {paths} candidate paths")]
    Shape { o: usize, d: usize, paths: usize },
}

pub fn enumerate_paths(inst: &Instance, o: usize, d: usize) -> Vec<CargoPath> {
    enumerate_paths_capped(inst, o, d, MAX_TRANSSHIPMENTS)
}

/// Depth-first search over route segments. A path never visits a physical
/// port twice (including ports passed while on board), so it cannot run
/// through its origin or reach the destination before alighting there.
/// Consecutive segments use different routes.
pub fn enumerate_paths_capped(
    inst: &Instance,
    o: usize,
    d: usize,
    max_transshipments: usize,
) -> Vec<CargoPath> {
    let mut out = Vec::new();
    if o == d {
        return out;
    }
    let mut visited = vec![false; inst.num_ports()];
    visited[o] = true;
    let mut segs = Vec::new();
    extend(inst, o, d, None, max_transshipments, &mut visited, &mut segs, &mut out);
    out.sort_by(|a: &CargoPath, b: &CargoPath| {
        a.segments.len().cmp(&b.segments.len()).then_with(|| a.segments.cmp(&b.segments))
    });
    out
}

#[allow(clippy::too_many_arguments)]
fn extend(
    inst: &Instance,
    at: usize,
    d: usize,
    last_route: Option<usize>,
    transfers_left: usize,
    visited: &mut [bool],
    segs: &mut Vec<Segment>,
    out: &mut Vec<CargoPath>,
) {
    for (r, route) in inst.routes.iter().enumerate() {
        if Some(r) == last_route {
            continue;
        }
        let Some(on) = route.call_of_port(at) else { continue };
        let calls = route.num_calls();
        let mut marked = Vec::new();
        for step in 1..calls {
            let off = (on + step) % calls;
            let port = route.port_calls[off];
            if visited[port] {
                break;
            }
            segs.push(Segment { r, on, off });
            if port == d {
                out.push(build_path(inst, segs));
                segs.pop();
                break;
            }
            visited[port] = true;
            marked.push(port);
            if transfers_left > 0 {
                extend(inst, port, d, Some(r), transfers_left - 1, visited, segs, out);
            }
            segs.pop();
        }
        for p in marked {
            visited[p] = false;
        }
    }
}

fn build_path(inst: &Instance, segs: &[Segment]) -> CargoPath {
    let first = segs[0];
    let last = segs[segs.len() - 1];
    let quads = segs
        .windows(2)
        .map(|w| TransshipmentQuad {
            r: w[0].r,
            i: w[0].off,
            r_prime: w[1].r,
            i_prime: w[1].on,
            port: inst.routes[w[0].r].port_calls[w[0].off],
        })
        .collect();
    CargoPath {
        origin: inst.routes[first.r].port_calls[first.on],
        destination: inst.routes[last.r].port_calls[last.off],
        segments: segs.to_vec(),
        transshipment_calls: quads,
    }
}

/// Whether some path with at most [`MAX_TRANSSHIPMENTS`] transfers joins
/// `o` to `d`.
pub fn is_connected(inst: &Instance, o: usize, d: usize) -> bool {
    o != d && !enumerate_paths(inst, o, d).is_empty()
}

/// Adds `qty` TEU along `path` into `flow`.
pub fn add_path_flow(inst: &Instance, flow: &mut FlowAssignment, path: &CargoPath, qty: f64) {
    if qty == 0.0 {
        return;
    }
    let o = path.origin;
    for s in &path.segments {
        flow.z_load[s.r][s.on][o] += qty;
        flow.z_disc[s.r][s.off][o] += qty;
        for leg in s.legs(inst.routes[s.r].num_calls()) {
            flow.f[s.r][leg][o] += qty;
        }
    }
}

/// Builds flows from per-path quantities. `alloc` holds `(o, d, paths,
/// quantities)` for each OD pair with positive demand; pairs not listed must
/// have zero demand.
pub fn flows_from_paths(
    inst: &Instance,
    alloc: &[(usize, usize, &[CargoPath], &[f64])],
) -> Result<FlowAssignment, FlowError> {
    let n = inst.num_ports();
    let mut covered = vec![vec![false; n]; n];
    let mut flow = FlowAssignment::zeros(inst);
    for &(o, d, paths, qty) in alloc {
        if paths.len() != qty.len() {
            return Err(FlowError::Shape { o, d, paths: paths.len() });
        }
        if qty.iter().any(|q| !(*q >= 0.0) || !q.is_finite()) {
            return Err(FlowError::BadQuantity { o, d });
        }
        let got: f64 = qty.iter().sum();
        let want = inst.demand(o, d);
        if (got - want).abs() > 1e-9 {
            return Err(FlowError::DemandMismatch { o, d, got, want });
        }
        covered[o][d] = true;
        for (p, &q) in paths.iter().zip(qty) {
            add_path_flow(inst, &mut flow, p, q);
        }
    }
    for o in 0..n {
        for d in 0..n {
            let want = inst.demand(o, d);
            if want > 0.0 && !covered[o][d] {
                return Err(FlowError::DemandMismatch { o, d, got: 0.0, want });
            }
        }
    }
    Ok(flow)
}

/// TEU transshipped at port `p`: half of all handling at `p` after removing
/// cargo that starts or ends there.
pub fn transshipped_teu_at_port(flow: &FlowAssignment, inst: &Instance, p: usize) -> f64 {
    let handled: f64 = inst.calls_at(p).into_iter().map(|(r, i)| flow.handled(r, i)).sum();
    let exports: f64 = inst.demand_teu_per_week[p].iter().sum();
    let imports: f64 = inst.demand_teu_per_week.iter().map(|row| row[p]).sum();
    (0.5 * (handled - exports - imports)).max(0.0)
}
