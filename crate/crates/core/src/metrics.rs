//! Two-objective front indicators (minimization).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("point ({0}, {1}) does not strictly dominate the reference point ({2}, {3})")]
    OutsideReference(f64, f64, f64, f64),
    #[error("front index {0} out of range")]
    Index(usize),
}

/// Pareto dominance: no worse in both objectives and better in one.
pub fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Distinct nondominated points, sorted by the first objective.
pub fn nondominated(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for p in sorted {
        if out.last().map_or(true, |q| p[1] < q[1]) {
            out.push(p);
        }
    }
    out
}

pub fn nadir(points: &[[f64; 2]]) -> [f64; 2] {
    points.iter().fold([f64::NEG_INFINITY; 2], |m, p| [m[0].max(p[0]), m[1].max(p[1])])
}

pub fn ideal(points: &[[f64; 2]]) -> [f64; 2] {
    points.iter().fold([f64::INFINITY; 2], |m, p| [m[0].min(p[0]), m[1].min(p[1])])
}

/// The nadir pushed out by 10% of its magnitude in each objective.
pub fn reference_from_nadir(nadir: [f64; 2]) -> [f64; 2] {
    nadir.map(|x| x + 0.1 * x.abs().max(1e-9))
}

fn check(points: &[[f64; 2]], reference: [f64; 2]) -> Result<(), MetricsError> {
    match points.iter().find(|p| !(p[0] < reference[0] && p[1] < reference[1])) {
        Some(p) => Err(MetricsError::OutsideReference(p[0], p[1], reference[0], reference[1])),
        None => Ok(()),
    }
}

/// Area dominated by `points` and bounded by `reference`. Dominated and
/// duplicate points are allowed and add nothing.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> Result<f64, MetricsError> {
    check(points, reference)?;
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in sorted {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    Ok(area)
}

/// `H(F) − H(F \ {F[idx]})`.
pub fn hv_contribution(points: &[[f64; 2]], idx: usize, reference: [f64; 2]) -> Result<f64, MetricsError> {
    if idx >= points.len() {
        return Err(MetricsError::Index(idx));
    }
    let full = hypervolume_2d(points, reference)?;
    let mut rest = points.to_vec();
    rest.remove(idx);
    Ok(full - hypervolume_2d(&rest, reference)?)
}

/// Exclusive contribution of every point at once. For a point with no
/// other point strictly inside its box, the exclusive region is bounded
/// above by the lowest other point to its left and on the right by the
/// leftmost other point below it. Otherwise the box minus the clipped
/// volume of the others is used. Duplicated and dominated points
/// contribute 0.
pub fn hv_contributions(points: &[[f64; 2]], reference: [f64; 2]) -> Result<Vec<f64>, MetricsError> {
    check(points, reference)?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut right = reference[0];
            let mut above = reference[1];
            let mut inside = false;
            for (j, q) in points.iter().enumerate() {
                if j == k {
                    continue;
                }
                if q[0] <= p[0] {
                    above = above.min(q[1]);
                }
                if q[1] <= p[1] {
                    right = right.min(q[0]);
                }
                inside |= q[0] > p[0] && q[1] > p[1];
            }
            if above <= p[1] || right <= p[0] {
                0.0
            } else if !inside {
                (right - p[0]) * (above - p[1])
            } else {
                let clipped: Vec<[f64; 2]> = points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, q)| [q[0].max(p[0]), q[1].max(p[1])])
                    .collect();
                let boxed = (reference[0] - p[0]) * (reference[1] - p[1]);
                boxed - hypervolume_2d(&clipped, reference).unwrap_or(0.0)
            }
        })
        .collect())
}

/// Additive epsilon: the smallest `ε` such that every point of `b` is weakly
/// dominated by some point of `a` shifted by `−ε`.
pub fn epsilon_indicator(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    b.iter()
        .map(|q| {
            a.iter()
                .map(|p| (p[0] - q[0]).max(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
