//! Posterior summaries and convergence diagnostics.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::alignment::AlignmentPath;
use crate::dpengine::{forward_max, map_traceback};
use crate::error::{AlignError, Result};
use crate::posterior::{ModelState, Problem};

/// Monitored values of one retained sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub path: Arc<AlignmentPath>,
    pub num_matches: usize,
    pub sigma2: f64,
    pub open: f64,
    pub ext: f64,
    pub rmsd: f64,
    /// Roll, pitch and yaw of the profile rotation, radians.
    pub angles: [f64; 3],
    pub translation: [f64; 3],
    pub k_index: Option<usize>,
    pub eta_index: Option<usize>,
    pub log_posterior: f64,
}

/// Accepted and proposed counts of each Metropolis-Hastings kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Acceptance {
    pub local: (u64, u64),
    pub global: (u64, u64),
    pub gap: (u64, u64),
}

impl Acceptance {
    pub fn add(&mut self, other: &Acceptance) {
        for (a, b) in [(&mut self.local, other.local), (&mut self.global, other.global), (&mut self.gap, other.gap)] {
            a.0 += b.0;
            a.1 += b.1;
        }
    }
}

/// Retained records of one chain (or several pooled chains).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub records: Vec<Record>,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// PAM distances and tempering exponents indexed by the records.
    pub ks: Vec<u32>,
    pub etas: Vec<f64>,
    pub acceptance: Acceptance,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Concatenates chains that share dimensions and grids.
    pub fn pooled(sets: &[SampleSet]) -> Result<SampleSet> {
        let first = sets.first().ok_or_else(|| AlignError::contract("no chains to pool"))?;
        let mut out = SampleSet { records: Vec::new(), acceptance: Acceptance::default(), ..first.clone() };
        for s in sets {
            if (s.n, s.m) != (first.n, first.m) || s.ks != first.ks || s.etas != first.etas {
                return Err(AlignError::contract("chains disagree on dimensions or grids"));
            }
            out.records.extend(s.records.iter().cloned());
            out.acceptance.add(&s.acceptance);
        }
        Ok(out)
    }
}

/// Names accepted by [`scalar_series`].
pub const SCALAR_NAMES: [&str; 13] = [
    "num_matches",
    "sigma2",
    "open",
    "ext",
    "rmsd",
    "roll",
    "pitch",
    "yaw",
    "tx",
    "ty",
    "tz",
    "log_posterior",
    "k",
];

pub fn scalar_series(samples: &SampleSet, name: &str) -> Result<Vec<f64>> {
    let get: Box<dyn Fn(&Record) -> Option<f64>> = match name {
        "num_matches" => Box::new(|r| Some(r.num_matches as f64)),
        "sigma2" => Box::new(|r| Some(r.sigma2)),
        "open" => Box::new(|r| Some(r.open)),
        "ext" => Box::new(|r| Some(r.ext)),
        "rmsd" => Box::new(|r| Some(r.rmsd)),
        "roll" => Box::new(|r| Some(r.angles[0])),
        "pitch" => Box::new(|r| Some(r.angles[1])),
        "yaw" => Box::new(|r| Some(r.angles[2])),
        "tx" => Box::new(|r| Some(r.translation[0])),
        "ty" => Box::new(|r| Some(r.translation[1])),
        "tz" => Box::new(|r| Some(r.translation[2])),
        "log_posterior" => Box::new(|r| Some(r.log_posterior)),
        "k" => Box::new(|r| r.k_index.map(|i| samples.ks[i] as f64)),
        "eta" => Box::new(|r| r.eta_index.map(|i| samples.etas[i])),
        _ => return Err(AlignError::contract(format!("unknown monitored quantity '{name}'"))),
    };
    samples
        .records
        .iter()
        .map(|r| get(r).ok_or_else(|| AlignError::contract(format!("'{name}' was not monitored in this run"))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub median: f64,
    pub hpd90: (f64, f64),
}

/// Mean, median and the narrowest interval holding 90% of the values.
pub fn summarize_values(values: &[f64]) -> Result<ScalarSummary> {
    if values.is_empty() {
        return Err(AlignError::contract("cannot summarise an empty series"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let w = ((0.9 * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0;
    for i in 1..=n - w {
        if sorted[i + w - 1] - sorted[i] < sorted[best + w - 1] - sorted[best] {
            best = i;
        }
    }
    Ok(ScalarSummary { mean, median, hpd90: (sorted[best], sorted[best + w - 1]) })
}

pub fn scalar_summary(samples: &SampleSet, name: &str) -> Result<ScalarSummary> {
    summarize_values(&scalar_series(samples, name)?)
}

/// Gelman-Rubin potential scale reduction factor over equal-length series.
pub fn psrf_values(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(AlignError::contract("PSRF needs at least two chains"));
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(AlignError::contract("PSRF needs chains of equal length of at least 2"));
    }
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / chains.len() as f64;
    if !(w > 0.0) {
        return Err(AlignError::contract("PSRF undefined: zero within-chain variance"));
    }
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let b = nf * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0);
    let var_hat = (nf - 1.0) / nf * w + b / nf;
    Ok((var_hat / w).sqrt())
}

pub fn psrf(chains: &[SampleSet], name: &str) -> Result<f64> {
    let series: Vec<Vec<f64>> = chains.iter().map(|c| scalar_series(c, name)).collect::<Result<_>>()?;
    psrf_values(&series)
}

/// The retained record with the largest log posterior (first among ties).
pub fn map_alignment(samples: &SampleSet) -> Result<&Record> {
    let mut best: Option<&Record> = None;
    for r in &samples.records {
        if best.is_none_or(|b| r.log_posterior > b.log_posterior) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| AlignError::contract("no samples"))
}

/// Re-runs a max-product pass at the MAP record's registration and parameters
/// and returns whichever path scores higher, with its log posterior.
pub fn refine_map(problem: &Problem, record: &Record, lambda: f64) -> Result<(Arc<AlignmentPath>, f64)> {
    let gp = crate::alignment::GapParams::new(record.open, record.ext)?;
    let seq = record.k_index.zip(record.eta_index);
    let state = problem.state(record.path.clone(), record.sigma2, gp, lambda, seq)?;
    let log_z = problem.log_gap_z(&gp)?;
    let current = problem.log_posterior_with_z(&state, log_z)?;
    let candidate = map_traceback(&forward_max(problem.dp_weights(&state, &state.registration)?)?);
    if candidate.num_matches() < 3 || candidate == *record.path {
        return Ok((record.path.clone(), current));
    }
    let alt = match ModelState::new(&problem.x, &problem.y, Arc::new(candidate), state.sigma2, gp, lambda, seq) {
        Ok(s) => s,
        Err(_) => return Ok((record.path.clone(), current)),
    };
    let value = problem.log_posterior_with_z(&alt, log_z)?;
    Ok(if value > current { (alt.path, value) } else { (record.path.clone(), current) })
}

/// Fraction of samples matching each residue pair.
pub fn marginal_matrix(samples: &SampleSet) -> Result<DMatrix<f64>> {
    if samples.is_empty() {
        return Err(AlignError::contract("no samples"));
    }
    let mut counts = DMatrix::<f64>::zeros(samples.n, samples.m);
    let mut last: Option<&Arc<AlignmentPath>> = None;
    let mut pairs = Vec::new();
    for r in &samples.records {
        // Consecutive records often share one path allocation.
        if !last.is_some_and(|p| Arc::ptr_eq(p, &r.path)) {
            pairs = r.path.matched_pairs();
            last = Some(&r.path);
        }
        for &(i, j) in &pairs {
            counts[(i, j)] += 1.0;
        }
    }
    Ok(counts / samples.len() as f64)
}

fn grid_indices(samples: &SampleSet) -> Result<Vec<(usize, usize)>> {
    if samples.is_empty() {
        return Err(AlignError::contract("no samples"));
    }
    samples
        .records
        .iter()
        .map(|r| r.k_index.zip(r.eta_index).ok_or_else(|| AlignError::contract("samples carry no sequence-model indices")))
        .collect()
}

/// Empirical joint frequencies over the (k, η) grid, k along rows.
pub fn k_eta_joint(samples: &SampleSet) -> Result<DMatrix<f64>> {
    let idx = grid_indices(samples)?;
    let mut table = DMatrix::<f64>::zeros(samples.ks.len(), samples.etas.len());
    for &(k, e) in &idx {
        table[(k, e)] += 1.0;
    }
    Ok(table / idx.len() as f64)
}

pub fn pam_posterior(samples: &SampleSet) -> Result<Vec<f64>> {
    let joint = k_eta_joint(samples)?;
    Ok(joint.row_iter().map(|r| r.sum()).collect())
}

pub fn eta_posterior(samples: &SampleSet) -> Result<Vec<f64>> {
    let joint = k_eta_joint(samples)?;
    Ok(joint.column_iter().map(|c| c.sum()).collect())
}

/// Per-row entropy (nats) of the marginal matrix, with the unmatched
/// probability `1 - Σ_j p_ij` as an extra outcome.
pub fn row_entropies(marginal: &DMatrix<f64>) -> Vec<f64> {
    marginal
        .row_iter()
        .map(|row| {
            let rest = (1.0 - row.sum()).max(0.0);
            row.iter().chain(std::iter::once(&rest)).filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
        })
        .collect()
}

/// Scalar summaries, PSRF values and grid posteriors in one serialisable value.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub records: usize,
    pub scalars: BTreeMap<String, ScalarSummary>,
    /// `None` when undefined (fewer than two chains or zero variance).
    pub psrf: BTreeMap<String, Option<f64>>,
    pub map_log_posterior: f64,
    pub map_num_matches: usize,
    pub map_rmsd: f64,
    pub acceptance: Acceptance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pam_posterior: Option<Vec<(u32, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_posterior: Option<Vec<(f64, f64)>>,
}

pub fn posterior_summary(chains: &[SampleSet], map_log_posterior: f64, map_num_matches: usize, map_rmsd: f64) -> Result<PosteriorSummary> {
    let pooled = SampleSet::pooled(chains)?;
    let seq = pooled.records.first().is_some_and(|r| r.k_index.is_some());
    let mut names: Vec<&str> = SCALAR_NAMES.iter().copied().filter(|n| *n != "k").collect();
    if seq {
        names.extend(["k", "eta"]);
    }
    let mut scalars = BTreeMap::new();
    let mut psrfs = BTreeMap::new();
    for name in names {
        scalars.insert(name.to_string(), scalar_summary(&pooled, name)?);
        psrfs.insert(name.to_string(), psrf(chains, name).ok());
    }
    let (pam, eta) = if seq {
        let p = pam_posterior(&pooled)?;
        let e = eta_posterior(&pooled)?;
        (
            Some(pooled.ks.iter().copied().zip(p).collect()),
            Some(pooled.etas.iter().copied().zip(e).collect()),
        )
    } else {
        (None, None)
    };
    Ok(PosteriorSummary {
        records: pooled.len(),
        scalars,
        psrf: psrfs,
        map_log_posterior,
        map_num_matches,
        map_rmsd,
        acceptance: pooled.acceptance,
        pam_posterior: pam,
        eta_posterior: eta,
    })
}
