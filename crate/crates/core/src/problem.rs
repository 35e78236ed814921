//! An instance together with everything derived from it once: transshipment
//! quadruples, candidate paths per demanded OD pair and the flat gene layout.

use crate::instance::{derive_transshipments, Instance, TransshipmentQuad};
use crate::paths::{enumerate_paths, CargoPath};

/// Latest allowed first arrival on a route, hours.
pub const MAX_START_OFFSET_H: f64 = 144.0;

#[derive(Debug, Clone)]
pub struct OdDemand {
    pub o: usize,
    pub d: usize,
    pub teu: f64,
    pub paths: Vec<CargoPath>,
}

/// Flat genes are laid out as: speeds by `(r, i)`, one class gene per
/// route, one start offset per route, then path weights by OD pair.
#[derive(Debug, Clone)]
pub struct Problem {
    pub inst: Instance,
    pub quads: Vec<TransshipmentQuad>,
    /// Quadruple indices grouped by port.
    pub quads_at_port: Vec<Vec<usize>>,
    /// Demanded OD pairs in `(o, d)` order.
    pub ods: Vec<OdDemand>,
    speed_start: Vec<usize>,
    class_start: usize,
    offset_start: usize,
    weight_start: Vec<usize>,
    num_genes: usize,
}

impl Problem {
    pub fn new(inst: Instance) -> Self {
        let quads = derive_transshipments(&inst);
        let mut quads_at_port = vec![Vec::new(); inst.num_ports()];
        for (k, q) in quads.iter().enumerate() {
            quads_at_port[q.port].push(k);
        }
        let mut ods = Vec::new();
        for o in 0..inst.num_ports() {
            for d in 0..inst.num_ports() {
                let teu = inst.demand(o, d);
                if teu > 0.0 {
                    ods.push(OdDemand { o, d, teu, paths: enumerate_paths(&inst, o, d) });
                }
            }
        }
        let mut next = 0;
        let speed_start = inst
            .routes
            .iter()
            .map(|r| {
                let s = next;
                next += r.num_calls();
                s
            })
            .collect();
        let class_start = next;
        next += inst.routes.len();
        let offset_start = next;
        next += inst.routes.len();
        let weight_start = ods
            .iter()
            .map(|od| {
                let s = next;
                next += od.paths.len();
                s
            })
            .collect();
        Problem {
            inst,
            quads,
            quads_at_port,
            ods,
            speed_start,
            class_start,
            offset_start,
            weight_start,
            num_genes: next,
        }
    }

    pub fn num_routes(&self) -> usize {
        self.inst.routes.len()
    }

    pub fn num_genes(&self) -> usize {
        self.num_genes
    }

    pub fn speed_gene(&self, r: usize, i: usize) -> usize {
        self.speed_start[r] + i
    }

    pub fn class_gene(&self, r: usize) -> usize {
        self.class_start + r
    }

    pub fn offset_gene(&self, r: usize) -> usize {
        self.offset_start + r
    }

    pub fn weight_genes(&self, od: usize) -> std::ops::Range<usize> {
        self.weight_start[od]..self.weight_start[od] + self.ods[od].paths.len()
    }

    /// Lower and upper bound of every flat gene.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = Vec::with_capacity(self.num_genes);
        let speed = (self.inst.speed_min_kn, self.inst.speed_max_kn);
        for r in &self.inst.routes {
            b.extend(std::iter::repeat(speed).take(r.num_calls()));
        }
        let top_class = (self.inst.vessels.len() - 1) as f64;
        b.extend(std::iter::repeat((0.0, top_class)).take(self.num_routes()));
        b.extend(std::iter::repeat((0.0, MAX_START_OFFSET_H)).take(self.num_routes()));
        for od in &self.ods {
            b.extend(std::iter::repeat((0.0, 1.0)).take(od.paths.len()));
        }
        b
    }

    pub fn integer_mask(&self) -> Vec<bool> {
        (0..self.num_genes)
            .map(|j| (self.class_start..self.offset_start).contains(&j))
            .collect()
    }
}
