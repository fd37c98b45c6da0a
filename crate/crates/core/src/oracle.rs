//! Self checks against brute-force enumeration on tiny synthetic problems.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::{enumerate_paths, gap_penalty, AlignmentPath, GapParams, ENUMERATION_LIMIT};
use crate::dpengine::{forward, forward_max, map_traceback, sample_traceback, DpWeights};
use crate::error::{AlignError, Result};
use crate::logsumexp;
use crate::posterior::{Hyperparams, Problem};
use crate::sampler::{run_chain, ChainConfig, FragmentLibrary};
use crate::Coord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Largest chain lengths used by the random instances.
    pub max_n: usize,
    pub max_m: usize,
    pub seed: u64,
    /// Test hook: build DP gap weights with the wrong sign.
    pub flip_gap_sign: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { max_n: 5, max_m: 5, seed: 2024, flip_gap_sign: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_coords(rng: &mut ChaCha8Rng, k: usize) -> Vec<Coord> {
    (0..k).map(|_| [rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0]).collect()
}

fn weights(table: &[f64], n: usize, m: usize, gp: &GapParams, sim: bool, flip: bool) -> Result<DpWeights> {
    let sign = if flip { -1.0 } else { 1.0 };
    DpWeights::from_parts(n, m, table.to_vec(), vec![0.0; n], vec![0.0; m], -sign * (gp.open + gp.ext), -sign * gp.ext, sim)
}

fn path_weight(table: &[f64], m: usize, gp: &GapParams, p: &AlignmentPath) -> f64 {
    p.matched_pairs().iter().map(|&(i, j)| table[i * m + j]).sum::<f64>() - gap_penalty(p, gp)
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

/// Runs every check and returns one result per property.
pub fn run_checks(opts: &OracleOptions) -> Result<Vec<CheckResult>> {
    let (max_n, max_m) = (opts.max_n, opts.max_m);
    if max_n == 0 || max_m == 0 {
        return Err(AlignError::contract("oracle instance sizes must be positive"));
    }
    if max_n * max_m > ENUMERATION_LIMIT {
        return Err(AlignError::Refused(format!(
            "oracle instance {max_n}x{max_m} exceeds the n*m <= {ENUMERATION_LIMIT} guard"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    let dims = |rng: &mut ChaCha8Rng| (rng.random_range(1..=max_n), rng.random_range(1..=max_m));

    // Forward totals against summed path weights.
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n, m) = dims(&mut rng);
        let sim = rng.random::<bool>();
        let table: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let gp = GapParams::new(rng.random::<f64>() * 4.0, rng.random::<f64>() * 2.0)?;
        let total = forward(weights(&table, n, m, &gp, sim, opts.flip_gap_sign)?)?.total();
        let lw: Vec<f64> = enumerate_paths(n, m, sim)?.iter().map(|p| path_weight(&table, m, &gp, p)).collect();
        worst = worst.max(((total - logsumexp(&lw)).exp() - 1.0).abs());
    }
    out.push(CheckResult { name: "forward total equals enumerated sum", passed: worst < 1e-10, detail: format!("max rel. err {worst:.3e}") });

    // Gap prior normalisation.
    let mut worst: f64 = 0.0;
    for n in 1..=max_n {
        for m in 1..=max_m {
            let gp = GapParams::new(rng.random::<f64>() * 4.0, rng.random::<f64>() * 2.0)?;
            let log_z = forward(weights(&vec![0.0; n * m], n, m, &gp, true, opts.flip_gap_sign)?)?.total();
            let mass: f64 = enumerate_paths(n, m, true)?.iter().map(|p| (-gap_penalty(p, &gp) - log_z).exp()).sum();
            worst = worst.max((mass - 1.0).abs());
        }
    }
    out.push(CheckResult { name: "gap prior sums to one", passed: worst < 1e-10, detail: format!("max abs. err {worst:.3e}") });

    // MAP traceback against the enumerated maximum.
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let (n, m) = dims(&mut rng);
        let table: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let gp = GapParams::new(rng.random::<f64>() * 4.0, rng.random::<f64>() * 2.0)?;
        let path = map_traceback(&forward_max(weights(&table, n, m, &gp, true, opts.flip_gap_sign)?)?);
        let best = enumerate_paths(n, m, true)?.iter().map(|p| path_weight(&table, m, &gp, p)).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(best - path_weight(&table, m, &gp, &path));
    }
    out.push(CheckResult { name: "MAP traceback attains the enumerated maximum", passed: worst < 1e-10, detail: format!("max shortfall {worst:.3e}") });

    // Stochastic traceback frequencies.
    let (n, m) = (max_n.min(3), max_m.min(3));
    let table: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let gp = GapParams::new(0.8, 0.3)?;
    let paths = enumerate_paths(n, m, true)?;
    let lw: Vec<f64> = paths.iter().map(|p| path_weight(&table, m, &gp, p)).collect();
    let z = logsumexp(&lw);
    let exact: Vec<f64> = lw.iter().map(|w| (w - z).exp()).collect();
    let fwd = forward(weights(&table, n, m, &gp, true, opts.flip_gap_sign)?)?;
    let draws = 100_000;
    let mut freq = vec![0.0; paths.len()];
    for _ in 0..draws {
        let (p, _) = sample_traceback(&fwd, &mut rng);
        if let Some(k) = paths.iter().position(|q| *q == p) {
            freq[k] += 1.0 / draws as f64;
        }
    }
    let tv = total_variation(&freq, &exact);
    out.push(CheckResult { name: "stochastic traceback matches exact path law", passed: tv < 0.02, detail: format!("TV {tv:.4} over {draws} draws") });

    // Sampler with fixed parameters against the enumerated posterior.
    let (n, m) = (max_n.min(4), max_m.min(4));
    if n >= 3 && m >= 3 {
        // A noisy copy keeps the posterior on well-defined superpositions.
        let x = random_coords(&mut rng, n);
        let y: Vec<Coord> = (0..m)
            .map(|j| {
                let p = x[j.min(n - 1)];
                [p[0] + rng.random::<f64>() - 0.5, p[1] + rng.random::<f64>() - 0.5, p[2] + rng.random::<f64>() - 0.5]
            })
            .collect();
        let problem = Problem::structure_only(x, y, Hyperparams::default())?;
        let gp = GapParams::new(1.5, 0.3)?;
        let (sigma2, lambda) = (0.7, 7.6);
        let states: Vec<_> = enumerate_paths(n, m, true)?
            .into_iter()
            .filter(|p| p.num_matches() >= 3)
            .filter_map(|p| problem.state(Arc::new(p), sigma2, gp, lambda, None).ok())
            .collect();
        let lp: Vec<f64> = states.iter().map(|s| problem.path_log_target(s)).collect::<Result<_>>()?;
        let z = logsumexp(&lp);
        let exact: Vec<f64> = lp.iter().map(|w| (w - z).exp()).collect();
        let cfg = ChainConfig {
            iterations: 110_000,
            burn_in: 10_000,
            seed: opts.seed,
            lambda,
            update_sigma2: false,
            update_gaps: false,
            init_sigma2: Some(sigma2),
            init_gaps: Some(gp),
            ..ChainConfig::default()
        };
        let set = run_chain(&problem, &FragmentLibrary::empty(1.0), &cfg, Some(states[0].clone()))?;
        let mut freq = vec![0.0; states.len()];
        for r in &set.records {
            if let Some(k) = states.iter().position(|s| *s.path == *r.path) {
                freq[k] += 1.0 / set.len() as f64;
            }
        }
        let tv = total_variation(&freq, &exact);
        out.push(CheckResult { name: "local MH chain matches enumerated posterior", passed: tv < 0.03, detail: format!("TV {tv:.4} over {} sweeps", set.len()) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_checks_pass() {
        let results = run_checks(&OracleOptions::default()).unwrap();
        assert!(results.len() >= 5);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn sign_flip_is_detected() {
        let results = run_checks(&OracleOptions { flip_gap_sign: true, ..OracleOptions::default() }).unwrap();
        assert!(results.iter().any(|r| !r.passed));
    }

    #[test]
    fn size_guard() {
        let opts = OracleOptions { max_n: 6, max_m: 7, ..OracleOptions::default() };
        assert!(matches!(run_checks(&opts), Err(AlignError::Refused(_))));
    }
}
