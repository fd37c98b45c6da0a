//! Log-density components of the alignment posterior.
//!
//! The structural factor attaches `λ (2πσ²)^{-3/2} exp(-d²/2σ²)` to every
//! matched pair, with distances taken under the profile (least-squares)
//! registration of the matched residues. The gap prior is
//! `exp(-u(M)) / Z(open, ext)`; gap penalties have gamma priors (shape,
//! rate) and σ² an inverse-gamma prior (shape, scale).

use std::f64::consts::TAU;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::alignment::{gap_penalty, AlignmentPath, GapParams, Step};
use crate::dpengine::{gap_prior_log_z, DpWeights};
use crate::error::{AlignError, Result};
use crate::geometry::{registered_distance2, superpose, Registration};
use crate::structio::AminoAcid;
use crate::submodel::{TemperedGrid, TemperedModel, NUM_AA};
use crate::Coord;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    Gaussian,
    /// Match log-weight `ln λ + c / (1 + (d/d0)²)`; σ² then only enters
    /// through its prior.
    ExpCauchy { c: f64, d0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Hyperparams {
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub a_open: f64,
    pub b_open: f64,
    pub a_ext: f64,
    pub b_ext: f64,
    pub error_model: ErrorModel,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            a_sigma: 2.25,
            b_sigma: 1.5,
            a_open: 2.0,
            b_open: 0.5,
            a_ext: 2.0,
            b_ext: 20.0,
            error_model: ErrorModel::Gaussian,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.a_sigma, self.b_sigma, self.a_open, self.b_open, self.a_ext, self.b_ext];
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(AlignError::contract("hyperparameters must be positive and finite"));
        }
        if let ErrorModel::ExpCauchy { c, d0 } = self.error_model {
            if !(c > 0.0 && d0 > 0.0 && c.is_finite() && d0.is_finite()) {
                return Err(AlignError::contract("exp-Cauchy constants must be positive"));
            }
        }
        Ok(())
    }
}

/// `c / (1 + (d/d0)²)`, the exp-Cauchy match score.
pub fn match_logweight_exp_cauchy(d: f64, c: f64, d0: f64) -> f64 {
    c / (1.0 + (d / d0).powi(2))
}

/// Log density of a gamma distribution with shape `a` and rate `b`.
pub fn ln_gamma_pdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) + (a - 1.0) * x.ln() - b * x
}

/// Log density of an inverse-gamma distribution with shape `a` and scale `b`.
pub fn ln_inv_gamma_pdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

/// One sampler state. The registration is the profile optimum for `path`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub path: Arc<AlignmentPath>,
    pub sigma2: f64,
    pub gp: GapParams,
    pub lambda: f64,
    /// `(k_index, eta_index)` into the tempered grid, in sequence mode.
    pub seq_index: Option<(usize, usize)>,
    pub registration: Registration,
    /// Squared partial Procrustes distance of the matched residues.
    pub dp2: f64,
}

impl ModelState {
    pub fn new(
        x: &[Coord],
        y: &[Coord],
        path: Arc<AlignmentPath>,
        sigma2: f64,
        gp: GapParams,
        lambda: f64,
        seq_index: Option<(usize, usize)>,
    ) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite() && lambda > 0.0 && lambda.is_finite()) {
            return Err(AlignError::contract(format!("sigma2 ({sigma2}) and lambda ({lambda}) must be positive")));
        }
        let (registration, dp2) = profile_registration(x, y, &path)?;
        Ok(ModelState { path, sigma2, gp, lambda, seq_index, registration, dp2 })
    }

    pub fn num_matches(&self) -> usize {
        self.path.num_matches()
    }

    /// Root mean squared deviation of the matched residues.
    pub fn rmsd(&self) -> f64 {
        (self.dp2 / self.num_matches() as f64).sqrt()
    }
}

/// Least-squares registration of the residues matched by `path`.
pub fn profile_registration(x: &[Coord], y: &[Coord], path: &AlignmentPath) -> Result<(Registration, f64)> {
    if path.n() != x.len() || path.m() != y.len() {
        return Err(AlignError::contract(format!(
            "path is {}x{} but chains have {} and {} residues",
            path.n(),
            path.m(),
            x.len(),
            y.len()
        )));
    }
    let pairs = path.matched_pairs();
    if pairs.len() < 3 {
        return Err(AlignError::contract(format!("{} matches; the model needs at least 3", pairs.len())));
    }
    let xm: Vec<Coord> = pairs.iter().map(|&(i, _)| x[i]).collect();
    let ym: Vec<Coord> = pairs.iter().map(|&(_, j)| y[j]).collect();
    superpose(&xm, &ym)
}

/// Gaussian structural log-likelihood from its sufficient statistics.
pub fn gaussian_loglik(num_matches: usize, dp2: f64, sigma2: f64, lambda: f64) -> f64 {
    let k = num_matches as f64;
    k * lambda.ln() - 1.5 * k * (TAU * sigma2).ln() - dp2 / (2.0 * sigma2)
}

/// Match-pair and skip counts used by the sequence likelihood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqStats {
    pub pairs: [[u32; NUM_AA]; NUM_AA],
    pub skips: [u32; NUM_AA],
}

impl SeqStats {
    pub fn from_path(ax: &[Option<usize>], ay: &[Option<usize>], path: &AlignmentPath) -> Result<Self> {
        if ax.len() != path.n() || ay.len() != path.m() {
            return Err(AlignError::contract("sequence lengths differ from the alignment dimensions"));
        }
        let mut stats = SeqStats { pairs: [[0; NUM_AA]; NUM_AA], skips: [0; NUM_AA] };
        let (mut i, mut j) = (0, 0);
        for step in path.steps() {
            match step {
                Step::Match => {
                    if let (Some(a), Some(b)) = (ax[i], ay[j]) {
                        stats.pairs[a][b] += 1;
                    }
                    i += 1;
                    j += 1;
                }
                Step::SkipX => {
                    if let Some(a) = ax[i] {
                        stats.skips[a] += 1;
                    }
                    i += 1;
                }
                Step::SkipY => {
                    if let Some(b) = ay[j] {
                        stats.skips[b] += 1;
                    }
                    j += 1;
                }
            }
        }
        Ok(stats)
    }

    pub fn loglik(&self, model: &TemperedModel) -> f64 {
        let mut total = 0.0;
        for a in 0..NUM_AA {
            if self.skips[a] > 0 {
                total += self.skips[a] as f64 * model.skip_logprob[a];
            }
            for b in 0..NUM_AA {
                if self.pairs[a][b] > 0 {
                    total += self.pairs[a][b] as f64 * model.match_logprob[a][b];
                }
            }
        }
        total
    }
}

pub fn sequence_indices(seq: &[AminoAcid]) -> Vec<Option<usize>> {
    seq.iter().map(|a| a.index()).collect()
}

/// Tempered sequence log-likelihood; residues of unknown type contribute 0.
pub fn seq_loglik(ax: &[AminoAcid], ay: &[AminoAcid], path: &AlignmentPath, tempered: &TemperedModel) -> Result<f64> {
    Ok(SeqStats::from_path(&sequence_indices(ax), &sequence_indices(ay), path)?.loglik(tempered))
}

/// Classical penalties under which minimising `Σ d² + g* s + h* Σl` picks the
/// same alignment as maximising the Gaussian target at fixed registration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EffectivePenalties {
    /// `2σ² open`.
    pub open: f64,
    /// `2σ² ext + σ² (ln λ - 1.5 ln(2πσ²))`.
    pub ext: f64,
    /// The textbook formula `σ² (open + 1.5 ln(2πσ) + ln λ)`.
    pub printed_open: f64,
    /// The textbook formula `σ² ext`.
    pub printed_ext: f64,
}

pub fn effective_gap_penalties(sigma2: f64, gp: &GapParams, lambda: f64) -> EffectivePenalties {
    EffectivePenalties {
        open: 2.0 * sigma2 * gp.open,
        ext: 2.0 * sigma2 * gp.ext + sigma2 * (lambda.ln() - 1.5 * (TAU * sigma2).ln()),
        printed_open: sigma2 * (gp.open + 1.5 * (TAU * sigma2.sqrt()).ln() + lambda.ln()),
        printed_ext: sigma2 * gp.ext,
    }
}

/// Structural match log-weight with its constants hoisted.
#[derive(Debug, Clone, Copy)]
struct MatchScore {
    base: f64,
    scale: f64,
    cauchy: Option<f64>,
}

impl MatchScore {
    fn new(model: ErrorModel, sigma2: f64, lambda: f64) -> Self {
        match model {
            ErrorModel::Gaussian => MatchScore {
                base: lambda.ln() - 1.5 * (TAU * sigma2).ln(),
                scale: 1.0 / (2.0 * sigma2),
                cauchy: None,
            },
            ErrorModel::ExpCauchy { c, d0 } => MatchScore { base: lambda.ln(), scale: 1.0 / (d0 * d0), cauchy: Some(c) },
        }
    }

    #[inline]
    fn lw(&self, d2: f64) -> f64 {
        match self.cauchy {
            None => self.base - d2 * self.scale,
            Some(c) => self.base + c / (1.0 + d2 * self.scale),
        }
    }
}

/// Data and fixed settings of one alignment problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub x: Vec<Coord>,
    pub y: Vec<Coord>,
    pub ax: Vec<Option<usize>>,
    pub ay: Vec<Option<usize>>,
    pub hp: Hyperparams,
    /// Whether one gap may skip residues of both proteins.
    pub simultaneous: bool,
    /// Tempered sequence models; `None` for structure-only inference.
    pub grid: Option<Arc<TemperedGrid>>,
}

impl Problem {
    /// Structure-only problem with unknown residue types.
    pub fn structure_only(x: Vec<Coord>, y: Vec<Coord>, hp: Hyperparams) -> Result<Self> {
        let (n, m) = (x.len(), y.len());
        Problem::new(x, y, vec![None; n], vec![None; m], hp, true, None)
    }

    pub fn new(
        x: Vec<Coord>,
        y: Vec<Coord>,
        ax: Vec<Option<usize>>,
        ay: Vec<Option<usize>>,
        hp: Hyperparams,
        simultaneous: bool,
        grid: Option<Arc<TemperedGrid>>,
    ) -> Result<Self> {
        hp.validate()?;
        if x.is_empty() || y.is_empty() {
            return Err(AlignError::contract("both chains must be nonempty"));
        }
        if ax.len() != x.len() || ay.len() != y.len() {
            return Err(AlignError::contract("sequence and structure lengths differ"));
        }
        if x.iter().chain(&y).any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(AlignError::contract("non-finite coordinate"));
        }
        Ok(Problem { x, y, ax, ay, hp, simultaneous, grid })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn sequence_mode(&self) -> bool {
        self.grid.is_some()
    }

    pub fn tempered(&self, state: &ModelState) -> Option<&TemperedModel> {
        match (&self.grid, state.seq_index) {
            (Some(grid), Some((k, e))) => Some(grid.get(k, e)),
            _ => None,
        }
    }

    pub fn state(
        &self,
        path: Arc<AlignmentPath>,
        sigma2: f64,
        gp: GapParams,
        lambda: f64,
        seq_index: Option<(usize, usize)>,
    ) -> Result<ModelState> {
        if self.sequence_mode() != seq_index.is_some() {
            return Err(AlignError::contract("sequence indices must be given exactly in sequence mode"));
        }
        ModelState::new(&self.x, &self.y, path, sigma2, gp, lambda, seq_index)
    }

    /// Structural match log-weight for a squared distance.
    pub fn structural_lw(&self, d2: f64, sigma2: f64, lambda: f64) -> f64 {
        MatchScore::new(self.hp.error_model, sigma2, lambda).lw(d2)
    }

    /// Structural log-likelihood of the state at its profile registration.
    pub fn struct_loglik(&self, state: &ModelState) -> Result<f64> {
        let k = state.num_matches();
        if k < 3 {
            return Err(AlignError::contract("structural likelihood needs at least 3 matches"));
        }
        Ok(match self.hp.error_model {
            ErrorModel::Gaussian => gaussian_loglik(k, state.dp2, state.sigma2, state.lambda),
            ErrorModel::ExpCauchy { .. } => self.struct_loglik_at(&state.path, state.sigma2, state.lambda, &state.registration),
        })
    }

    /// Structural log-likelihood of `path` with distances under `reg`.
    pub fn struct_loglik_at(&self, path: &AlignmentPath, sigma2: f64, lambda: f64, reg: &Registration) -> f64 {
        let score = MatchScore::new(self.hp.error_model, sigma2, lambda);
        path.matched_pairs()
            .iter()
            .map(|&(i, j)| score.lw(registered_distance2(reg, &self.x[i], &self.y[j])))
            .sum()
    }

    pub fn seq_stats(&self, path: &AlignmentPath) -> Result<SeqStats> {
        SeqStats::from_path(&self.ax, &self.ay, path)
    }

    pub fn seq_loglik(&self, state: &ModelState) -> Result<f64> {
        match self.tempered(state) {
            Some(t) => Ok(self.seq_stats(&state.path)?.loglik(t)),
            None => Ok(0.0),
        }
    }

    pub fn log_gap_z(&self, gp: &GapParams) -> Result<f64> {
        gap_prior_log_z(self.n(), self.m(), gp, self.simultaneous)
    }

    /// Log prior given a precomputed `log Z(open, ext)`.
    pub fn log_prior_with_z(&self, state: &ModelState, log_z: f64) -> Result<f64> {
        let hp = &self.hp;
        let (o, e) = (state.gp.open, state.gp.ext);
        if !(state.sigma2 > 0.0 && o > 0.0 && e > 0.0) {
            return Err(AlignError::contract("sigma2 and gap penalties must be positive"));
        }
        Ok(-gap_penalty(&state.path, &state.gp) - log_z
            + ln_gamma_pdf(o, hp.a_open, hp.b_open)
            + ln_gamma_pdf(e, hp.a_ext, hp.b_ext)
            + ln_inv_gamma_pdf(state.sigma2, hp.a_sigma, hp.b_sigma))
    }

    pub fn log_prior(&self, state: &ModelState) -> Result<f64> {
        self.log_prior_with_z(state, self.log_gap_z(&state.gp)?)
    }

    pub fn log_posterior_with_z(&self, state: &ModelState, log_z: f64) -> Result<f64> {
        Ok(self.struct_loglik(state)? + self.seq_loglik(state)? + self.log_prior_with_z(state, log_z)?)
    }

    /// Unnormalised joint log posterior (uniform grid priors on `(k, η)` dropped).
    pub fn log_posterior(&self, state: &ModelState) -> Result<f64> {
        self.log_posterior_with_z(state, self.log_gap_z(&state.gp)?)
    }

    /// Alignment part of the target: structure plus sequence minus `u(M)`,
    /// i.e. everything in the posterior that changes with the path alone.
    pub fn path_log_target(&self, state: &ModelState) -> Result<f64> {
        Ok(self.struct_loglik(state)? + self.seq_loglik(state)? - gap_penalty(&state.path, &state.gp))
    }

    /// DP weights at registration `reg` for the parameters of `state`.
    pub fn dp_weights(&self, state: &ModelState, reg: &Registration) -> Result<DpWeights> {
        let score = MatchScore::new(self.hp.error_model, state.sigma2, state.lambda);
        let moved = reg.apply(&self.x);
        let tempered = self.tempered(state);
        let seq_match = |i: usize, j: usize| match (tempered, self.ax[i], self.ay[j]) {
            (Some(t), Some(a), Some(b)) => t.match_logprob[a][b],
            _ => 0.0,
        };
        let mut table = Vec::with_capacity(self.n() * self.m());
        for (i, p) in moved.iter().enumerate() {
            for (j, q) in self.y.iter().enumerate() {
                let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                if !d2.is_finite() {
                    return Err(AlignError::contract("non-finite inter-residue distance"));
                }
                table.push(score.lw(d2) + seq_match(i, j));
            }
        }
        let skip = |seq: &[Option<usize>]| -> Vec<f64> {
            seq.iter()
                .map(|a| match (tempered, a) {
                    (Some(t), Some(a)) => t.skip_logprob[*a],
                    _ => 0.0,
                })
                .collect()
        };
        DpWeights::from_parts(
            self.n(),
            self.m(),
            table,
            skip(&self.ax),
            skip(&self.ay),
            -(state.gp.open + state.gp.ext),
            -state.gp.ext,
            self.simultaneous,
        )
    }
}
