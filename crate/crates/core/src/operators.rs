//! Variation operators on flat gene vectors with per-gene boxes.
//!
//! Integer genes (the vessel class choice) take part in the real-valued
//! arithmetic and are rounded by the repair step, except where noted.

use rand::Rng as _;

use crate::rng::Rng;

const SBX_EPS: f64 = 1e-14;

/// Simulated binary crossover on real genes, each exchanged with
/// probability `cr`; integer genes are swapped with probability 1/2.
pub fn sbx(
    p1: &[f64],
    p2: &[f64],
    bounds: &[(f64, f64)],
    integer: &[bool],
    cr: f64,
    eta: f64,
    rng: &mut Rng,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for j in 0..p1.len() {
        if integer[j] {
            if rng.gen::<f64>() < 0.5 {
                std::mem::swap(&mut c1[j], &mut c2[j]);
            }
            continue;
        }
        if rng.gen::<f64>() > cr || (p1[j] - p2[j]).abs() <= SBX_EPS {
            continue;
        }
        let (lo, hi) = bounds[j];
        let y1 = p1[j].min(p2[j]);
        let y2 = p1[j].max(p2[j]);
        let u: f64 = rng.gen();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
        let a = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo, hi);
        let b = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo, hi);
        if rng.gen::<f64>() < 0.5 {
            c1[j] = b;
            c2[j] = a;
        } else {
            c1[j] = a;
            c2[j] = b;
        }
    }
    (c1, c2)
}

/// Bounded polynomial perturbation of `x` inside `[lo, hi]` for a uniform
/// draw `d`.
pub fn polynomial_step(x: f64, lo: f64, hi: f64, d: f64, rho: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return x;
    }
    let e = rho + 1.0;
    let delta = if d < 0.5 {
        (2.0 * d + (1.0 - 2.0 * d) * ((hi - x) / span).powf(e)).powf(1.0 / e) - 1.0
    } else {
        1.0 - (2.0 - 2.0 * d + (2.0 * d - 1.0) * ((x - lo) / span).powf(e)).powf(1.0 / e)
    };
    x + delta * span
}

/// Polynomial mutation with per-gene probability `p`. Integer genes that
/// fire are redrawn uniformly over their range instead.
pub fn polynomial_mutation(
    x: &mut [f64],
    bounds: &[(f64, f64)],
    integer: &[bool],
    p: f64,
    rho: f64,
    rng: &mut Rng,
) {
    for j in 0..x.len() {
        if rng.gen::<f64>() > p {
            continue;
        }
        let (lo, hi) = bounds[j];
        if integer[j] {
            x[j] = rng.gen_range(lo as i64..=hi as i64) as f64;
        } else {
            let d: f64 = rng.gen();
            x[j] = polynomial_step(x[j], lo, hi, d, rho);
        }
    }
}

/// `t_j = s_j + c·(a_j − b_j)` where a uniform draw is at most `cr`.
pub fn de_step(s: &[f64], a: &[f64], b: &[f64], c: f64, cr: f64, rng: &mut Rng) -> Vec<f64> {
    s.iter()
        .enumerate()
        .map(|(j, &sj)| if rng.gen::<f64>() <= cr { sj + c * (a[j] - b[j]) } else { sj })
        .collect()
}

pub fn clamp_to_box(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}
