use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng;
use crate::special::normal_quantile;

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        order[i..j].iter().for_each(|&k| ranks[k] = r);
        i = j;
    }
    ranks
}

/// Pearson correlation; errors when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("correlation needs two equally long inputs of length >= 2"));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(invalid("correlation undefined: zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 3 {
        return Err(invalid("spearman needs at least 3 samples"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Fisher z interval around an observed correlation `rho` from `n` samples.
pub fn spearman_ci_fisher(rho: f64, n: usize, level: f64) -> Result<Interval> {
    if n < 4 {
        return Err(invalid("Fisher z interval needs at least 4 samples"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level must be in (0, 1), got {level}")));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid(format!("correlation out of range: {rho}")));
    }
    let z = rho.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh();
    let half = normal_quantile(0.5 + level / 2.0) / ((n - 3) as f64).sqrt();
    Ok(Interval {
        lo: (z - half).tanh(),
        hi: (z + half).tanh(),
    })
}

/// Percentile bootstrap interval of Spearman's rho. Resamples whose ranks
/// are constant are redrawn.
pub fn spearman_ci_bootstrap(x: &[f64], y: &[f64], level: f64, resamples: usize, seed: u64) -> Result<Interval> {
    spearman(x, y)?;
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(invalid("bootstrap needs a level in (0, 1) and at least one resample"));
    }
    let mut rng = rng::stream(seed, rng::ids::BOOTSTRAP);
    let n = x.len();
    let mut stats = Vec::with_capacity(resamples);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    let mut attempts = 0usize;
    while stats.len() < resamples {
        attempts += 1;
        if attempts > resamples * 100 {
            return Err(invalid("bootstrap resamples are degenerate"));
        }
        for k in 0..n {
            let i = rng.random_range(0..n);
            bx[k] = x[i];
            by[k] = y[i];
        }
        if let Ok(r) = spearman(&bx, &by) {
            stats.push(r);
        }
    }
    stats.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (resamples - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        stats[i] + f * (stats[(i + 1).min(resamples - 1)] - stats[i])
    };
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        lo: q(alpha),
        hi: q(1.0 - alpha),
    })
}
