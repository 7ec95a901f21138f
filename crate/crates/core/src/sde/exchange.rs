use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sde::particles::ParticleTrajectory;
use crate::seed::{rng, stream_seed, Stream};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExchangeabilityReport {
    pub statistic: f64,
    pub p_value: f64,
    pub level: f64,
    pub passed: bool,
    pub replicates: usize,
    pub permutations: usize,
}

/// Label-symmetry statistic over replicates; `cloud[r][i]` holds particle `i`
/// of replicate `r` (flattened `d` coordinates).
///
/// Each particle is centred by its replicate's cloud mean. For every label
/// the mean centred location and the mean distance to the centre are
/// standardised by scales pooled over all labels and replicates (these are
/// invariant under relabelling). The statistic is the largest absolute
/// standardised deviation.
fn statistic(cloud: &[Vec<f64>], n: usize, d: usize) -> f64 {
    let reps = cloud.len() as f64;
    let mut loc = vec![0.0; n * d];
    let mut spread = vec![0.0; n];
    let (mut sum_c2, mut sum_a, mut sum_a2) = (0.0, 0.0, 0.0);
    for x in cloud {
        let mut centre = vec![0.0; d];
        for p in x.chunks(d) {
            for a in 0..d {
                centre[a] += p[a] / n as f64;
            }
        }
        for (i, p) in x.chunks(d).enumerate() {
            let mut r2 = 0.0;
            for a in 0..d {
                let c = p[a] - centre[a];
                loc[i * d + a] += c / reps;
                r2 += c * c;
            }
            let r = r2.sqrt();
            spread[i] += r / reps;
            sum_c2 += r2;
            sum_a += r;
            sum_a2 += r2;
        }
    }
    let cells = reps * n as f64;
    let mean_a = sum_a / cells;
    let sd_loc = (sum_c2 / (cells * d as f64) / reps).sqrt();
    let sd_spread = ((sum_a2 / cells - mean_a * mean_a).max(0.0) / reps).sqrt();
    let mut t = 0.0_f64;
    if sd_loc > 0.0 {
        t = loc.iter().fold(t, |m, l| m.max(l.abs() / sd_loc));
    }
    if sd_spread > 0.0 {
        t = spread.iter().fold(t, |m, s| m.max((s - mean_a).abs() / sd_spread));
    }
    t
}

/// Permutation test of exchangeability at step `step` (default: final step).
///
/// The null distribution relabels particles independently within every
/// replicate; `p = (1 + #{T_perm ≥ T_obs}) / (1 + permutations)`.
pub fn exchangeability_test(
    replicates: &[ParticleTrajectory],
    step: Option<usize>,
    permutations: usize,
    level: f64,
    seed: u64,
) -> Result<ExchangeabilityReport> {
    let first = replicates.first().ok_or_else(|| Error::invalid("exchangeability test needs replicates"))?;
    let (n, d) = (first.n, first.d);
    if n < 2 {
        return Err(Error::invalid("exchangeability test needs N ≥ 2"));
    }
    if replicates.len() < 2 {
        return Err(Error::invalid("exchangeability test needs at least two replicates"));
    }
    if permutations == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("need permutations ≥ 1 and level in (0, 1)"));
    }
    let j = step.unwrap_or(first.steps());
    let mut cloud = Vec::with_capacity(replicates.len());
    for r in replicates {
        if r.n != n || r.d != d || j > r.steps() {
            return Err(Error::invalid("replicates differ in N, d or length"));
        }
        cloud.push(r.at(j).to_vec());
    }
    let observed = statistic(&cloud, n, d);
    let mut exceed = 0usize;
    let mut labels: Vec<usize> = (0..n).collect();
    let mut shuffled = cloud.clone();
    for p in 0..permutations {
        let mut g = rng(stream_seed(seed, Stream::Permutation, p as u64));
        for (x, out) in cloud.iter().zip(shuffled.iter_mut()) {
            labels.shuffle(&mut g);
            for (i, &src) in labels.iter().enumerate() {
                out[i * d..(i + 1) * d].copy_from_slice(&x[src * d..(src + 1) * d]);
            }
        }
        if statistic(&shuffled, n, d) >= observed {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (1 + permutations) as f64;
    Ok(ExchangeabilityReport {
        statistic: observed,
        p_value,
        level,
        passed: p_value >= level,
        replicates: replicates.len(),
        permutations,
    })
}
