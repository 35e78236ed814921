//! Exhaustive grid enumeration for small instances.
//!
//! Every combination of vessel class, gridded leg speed, gridded start
//! offset and gridded path-weight split is decoded; the feasible
//! nondominated points form the reference front.

use rayon::prelude::*;
use thiserror::Error;

use crate::evaluation::Solution;
use crate::genotype::{decode, Genotype};
use crate::metrics::dominates;
use crate::problem::{Problem, MAX_START_OFFSET_H};

pub const DEFAULT_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct OracleGrid {
    pub speed_step_kn: f64,
    /// Each path weight takes values `0, 1/levels, .., 1` before
    /// normalization.
    pub weight_levels: u32,
    pub offset_step_h: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid { speed_step_kn: 1.0, weight_levels: 4, offset_step_h: 24.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("grid has {count} combinations, above the limit of {limit}")]
    TooLarge { count: u128, limit: u64 },
    #[error("grid steps must be positive")]
    BadGrid,
}

#[derive(Debug, Clone)]
pub struct OracleFront {
    /// Distinct feasible nondominated points, sorted by the first objective.
    pub members: Vec<(Genotype, Solution)>,
    pub evaluated: u64,
}

impl OracleFront {
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.members.iter().map(|(_, s)| s.objectives()).collect()
    }
}

fn levels(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let x = lo + f64::from(k) * step;
        if x > hi + 1e-9 {
            break;
        }
        out.push(x.min(hi));
        k += 1;
    }
    if out.last().map_or(true, |&x| x < hi) {
        out.push(hi);
    }
    out
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Distinct weight directions over `k` paths with integer entries up to
/// `levels`, in lexicographic order of their reduced form.
fn weight_splits(k: usize, levels: u32) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<u32>> = Vec::new();
    let mut cur = vec![0u32; k];
    loop {
        let g = cur.iter().fold(0, |g, &x| gcd(g, x));
        if g == 1 {
            out.push(cur.clone());
        }
        let mut j = k;
        loop {
            if j == 0 {
                let l = f64::from(levels);
                return out
                    .into_iter()
                    .map(|v| v.into_iter().map(|x| f64::from(x) / l).collect())
                    .collect();
            }
            j -= 1;
            if cur[j] < levels {
                cur[j] += 1;
                break;
            }
            cur[j] = 0;
        }
    }
}

/// Number of vectors in `{0..=levels}^k` whose entries have gcd 1, via
/// Möbius inversion; saturates on overflow.
fn split_count(k: usize, levels: u32) -> u128 {
    let mu = |mut n: u32| -> i128 {
        let mut m = 1;
        let mut p = 2;
        while p * p <= n {
            if n % p == 0 {
                n /= p;
                if n % p == 0 {
                    return 0;
                }
                m = -m;
            }
            p += 1;
        }
        if n > 1 {
            m = -m;
        }
        m
    };
    let mut total: i128 = 0;
    for d in 1..=levels {
        let m = mu(d);
        if m == 0 {
            continue;
        }
        let base = i128::from(levels / d + 1);
        let Some(pow) = (0..k).try_fold(1i128, |acc, _| acc.checked_mul(base)) else {
            return u128::MAX;
        };
        total += m * (pow - 1);
    }
    total as u128
}

struct Space {
    radices: Vec<u128>,
    speeds: Vec<f64>,
    offsets: Vec<f64>,
    splits: Vec<Vec<Vec<f64>>>,
}

impl Space {
    fn new(prob: &Problem, grid: &OracleGrid) -> Self {
        let inst = &prob.inst;
        let speeds = levels(inst.speed_min_kn, inst.speed_max_kn, grid.speed_step_kn);
        let offsets = if prob.quads.is_empty() {
            vec![0.0]
        } else {
            levels(0.0, MAX_START_OFFSET_H, grid.offset_step_h)
        };
        let mut radices: Vec<u128> = Vec::new();
        for route in &inst.routes {
            radices.push(inst.vessels.len() as u128);
            radices.push(offsets.len() as u128);
            radices.extend(std::iter::repeat(speeds.len() as u128).take(route.num_calls()));
        }
        radices.extend(prob.ods.iter().map(|od| split_count(od.paths.len(), grid.weight_levels)));
        Space { radices, speeds, offsets, splits: Vec::new() }
    }

    fn count(&self) -> u128 {
        self.radices.iter().fold(1u128, |acc, &r| acc.saturating_mul(r))
    }

    fn fill_splits(&mut self, prob: &Problem, grid: &OracleGrid) {
        self.splits = prob.ods.iter().map(|od| weight_splits(od.paths.len(), grid.weight_levels)).collect();
    }

    fn genotype(&self, prob: &Problem, mut idx: u64) -> Genotype {
        let mut digits = Vec::with_capacity(self.radices.len());
        for &r in self.radices.iter().rev() {
            let r = r as u64;
            digits.push((idx % r) as usize);
            idx /= r;
        }
        digits.reverse();
        let mut it = digits.into_iter();
        let mut g = Genotype {
            speeds: Vec::new(),
            class_choice: Vec::new(),
            start_offsets: Vec::new(),
            path_weights: Vec::new(),
        };
        for route in &prob.inst.routes {
            g.class_choice.push(it.next().expect("digit"));
            g.start_offsets.push(self.offsets[it.next().expect("digit")]);
            g.speeds.push((0..route.num_calls()).map(|_| self.speeds[it.next().expect("digit")]).collect());
        }
        for s in &self.splits {
            g.path_weights.push(s[it.next().expect("digit")].clone());
        }
        g
    }
}

/// Number of grid points the oracle would decode.
pub fn grid_size(prob: &Problem, grid: &OracleGrid) -> u128 {
    Space::new(prob, grid).count()
}

/// Nondominated insert keeping the lowest index among equal points.
fn insert(front: &mut Vec<(u64, [f64; 2])>, idx: u64, p: [f64; 2]) {
    if front.iter().any(|(j, q)| dominates(q, &p) || (*q == p && *j <= idx)) {
        return;
    }
    front.retain(|(_, q)| !(dominates(&p, q) || *q == p));
    front.push((idx, p));
}

pub fn oracle_front(prob: &Problem, grid: &OracleGrid, limit: u64) -> Result<OracleFront, OracleError> {
    if !(grid.speed_step_kn > 0.0 && grid.offset_step_h > 0.0 && grid.weight_levels > 0) {
        return Err(OracleError::BadGrid);
    }
    let mut space = Space::new(prob, grid);
    let count = space.count();
    if count > u128::from(limit) {
        return Err(OracleError::TooLarge { count, limit });
    }
    space.fill_splits(prob, grid);
    let total = count as u64;
    const CHUNK: u64 = 4096;
    let chunks = total.div_ceil(CHUNK);
    let partial: Vec<Vec<(u64, [f64; 2])>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut local = Vec::new();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let sol = decode(prob, &space.genotype(prob, idx));
                if sol.is_feasible() {
                    insert(&mut local, idx, sol.objectives());
                }
            }
            local
        })
        .collect();
    let mut front = Vec::new();
    for local in partial {
        for (idx, p) in local {
            insert(&mut front, idx, p);
        }
    }
    front.sort_by(|a, b| a.1[0].total_cmp(&b.1[0]).then(a.1[1].total_cmp(&b.1[1])));
    let members = front
        .into_iter()
        .map(|(idx, _)| {
            let g = space.genotype(prob, idx);
            let s = decode(prob, &g);
            (g, s)
        })
        .collect();
    Ok(OracleFront { members, evaluated: total })
}
