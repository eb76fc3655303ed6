//! Derivative-free minimizers over axis-aligned boxes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::Bounds;

/// Smallest step of the coordinate pattern search (m/s²).
pub const REFINE_MIN_STEP: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct CemSettings {
    pub population: usize,
    pub elite_count: usize,
    pub iterations: usize,
    pub init_stddev: f64,
    pub seed: u64,
}

/// Result of a box-constrained minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Cross-entropy method: Gaussian samples clipped to the box, refit to the elites,
/// repeated. The incumbent is re-injected each generation so the best value never
/// regresses.
pub fn cross_entropy<F>(bounds: &[Bounds], settings: &CemSettings, mut f: F) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut mean: Vec<f64> = bounds.iter().map(|b| 0.5 * (b.lo + b.hi)).collect();
    let mut stddev = vec![settings.init_stddev; dim];
    let pop = settings.population.max(2);
    let elites = settings.elite_count.clamp(1, pop);

    let mut best_point = mean.clone();
    let mut best_value = f(&best_point);
    let mut evaluations = 1;

    let mut samples = vec![0.0; pop * dim];
    let mut scores: Vec<(f64, usize)> = Vec::with_capacity(pop);
    for _ in 0..settings.iterations {
        scores.clear();
        for k in 0..pop {
            let row = &mut samples[k * dim..(k + 1) * dim];
            if k == pop - 1 {
                row.copy_from_slice(&best_point);
            } else {
                for d in 0..dim {
                    // a zero deviation is valid and still draws from the stream
                    let z = Normal::new(mean[d], stddev[d]).map_or(mean[d], |n| n.sample(&mut rng));
                    row[d] = bounds[d].clamp(z);
                }
            }
            let v = f(row);
            evaluations += 1;
            scores.push((if v.is_nan() { f64::INFINITY } else { v }, k));
        }
        scores.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (v0, k0) = scores[0];
        if v0 < best_value {
            best_value = v0;
            best_point.copy_from_slice(&samples[k0 * dim..(k0 + 1) * dim]);
        }
        for d in 0..dim {
            let m = scores[..elites].iter().map(|&(_, k)| samples[k * dim + d]).sum::<f64>() / elites as f64;
            let var = scores[..elites]
                .iter()
                .map(|&(_, k)| (samples[k * dim + d] - m).powi(2))
                .sum::<f64>()
                / elites as f64;
            mean[d] = m;
            stddev[d] = var.sqrt();
        }
    }
    Minimum {
        point: best_point,
        value: best_value,
        evaluations,
    }
}

/// Coordinate pattern search with a halving step, accepting strict improvements only.
pub fn refine<F>(bounds: &[Bounds], start: Minimum, initial_step: f64, mut f: F) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let Minimum {
        mut point,
        mut value,
        mut evaluations,
    } = start;
    let mut step = initial_step;
    let mut trial = point.clone();
    while step >= REFINE_MIN_STEP {
        let mut improved = false;
        for d in 0..point.len() {
            for dir in [1.0, -1.0] {
                let candidate = bounds[d].clamp(point[d] + dir * step);
                if candidate == point[d] {
                    continue;
                }
                trial.copy_from_slice(&point);
                trial[d] = candidate;
                let v = f(&trial);
                evaluations += 1;
                if v < value {
                    value = v;
                    point[d] = candidate;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Minimum {
        point,
        value,
        evaluations,
    }
}

/// Visits the tensor grid of `resolution` points per axis in lexicographic order
/// (first axis outermost) and returns the lowest value; ties keep the earliest point.
pub fn grid_minimum<F>(bounds: &[Bounds], resolution: usize, mut f: F) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let axes: Vec<Vec<f64>> = bounds.iter().map(|b| b.grid(resolution).collect()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluations = 0;
    for_each_grid_point(&axes, |p| {
        let v = f(p);
        evaluations += 1;
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, p.to_vec()));
        }
    });
    let (value, point) = best.unwrap_or((f64::INFINITY, Vec::new()));
    Minimum {
        point,
        value,
        evaluations,
    }
}

pub fn for_each_grid_point(axes: &[Vec<f64>], mut visit: impl FnMut(&[f64])) {
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; axes.len()];
    let mut p: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&p);
        let mut d = axes.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                p[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            p[d] = axes[d][0];
        }
    }
}
