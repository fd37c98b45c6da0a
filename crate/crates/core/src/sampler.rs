//! Markov chain Monte Carlo over alignments and model parameters.
//!
//! One sweep runs a local alignment move, an optional global move drawn from
//! the fragment library, a Gibbs update of σ², a random-walk update of the
//! gap penalties and, in sequence mode, a Gibbs update of `(k, η)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::alignment::{AlignmentPath, GapParams};
use crate::dpengine::{forward, forward_max, map_traceback, proposal_log_density, sample_traceback};
use crate::error::{AlignError, Result};
use crate::geometry::{superpose, Registration};
use crate::posterior::{ln_gamma_pdf, ErrorModel, Hyperparams, ModelState, Problem, SeqStats};
use crate::sample_log_categorical;
use crate::submodel::TemperedGrid;
use crate::summaries::{Acceptance, Record, SampleSet};
use crate::Coord;

/// Residues per fragment window.
pub const WINDOW: usize = 6;

/// Registrations of well-superposing window pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentLibrary {
    pub entries: Vec<Registration>,
    pub delta: f64,
}

impl FragmentLibrary {
    pub fn empty(delta: f64) -> Self {
        FragmentLibrary { entries: Vec::new(), delta }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Superposes every pair of 6-residue windows and keeps the registrations
/// with RMSD below `delta`. The second value is a warning when a chain is
/// too short to form a window.
pub fn build_fragment_library(x: &[Coord], y: &[Coord], delta: f64) -> (FragmentLibrary, Option<String>) {
    if x.len() < WINDOW || y.len() < WINDOW {
        let warning = format!(
            "chains of {} and {} residues are too short for {WINDOW}-residue fragments; global moves disabled",
            x.len(),
            y.len()
        );
        return (FragmentLibrary::empty(delta), Some(warning));
    }
    let limit = delta * delta * WINDOW as f64;
    let mut entries = Vec::new();
    for i in 0..=x.len() - WINDOW {
        for j in 0..=y.len() - WINDOW {
            if let Ok((reg, dp2)) = superpose(&x[i..i + WINDOW], &y[j..j + WINDOW]) {
                if dp2 < limit {
                    entries.push(reg);
                }
            }
        }
    }
    (FragmentLibrary { entries, delta }, None)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChainConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub lambda: f64,
    pub global_move_prob: f64,
    pub rw_step_open: f64,
    pub rw_step_ext: f64,
    /// Tune the random-walk scales during burn-in.
    pub adapt_steps: bool,
    /// Set false to hold σ² at its initial value.
    pub update_sigma2: bool,
    /// Set false to hold the gap penalties at their initial values.
    pub update_gaps: bool,
    /// Initial values; prior means when `None`.
    pub init_sigma2: Option<f64>,
    pub init_gaps: Option<GapParams>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 120_000,
            burn_in: 20_000,
            thin: 1,
            seed: 1,
            lambda: 7.6,
            global_move_prob: 0.1,
            rw_step_open: 0.1,
            rw_step_ext: 0.1,
            adapt_steps: false,
            update_sigma2: true,
            update_gaps: true,
            init_sigma2: None,
            init_gaps: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(AlignError::contract("iterations must exceed burn-in"));
        }
        if self.thin == 0 {
            return Err(AlignError::contract("thinning interval must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.global_move_prob) {
            return Err(AlignError::contract("global move probability must lie in [0, 1]"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(AlignError::contract("lambda must be positive"));
        }
        if !(self.rw_step_open > 0.0 && self.rw_step_ext > 0.0) {
            return Err(AlignError::contract("random-walk scales must be positive"));
        }
        Ok(())
    }

    pub fn num_records(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Draw from an inverse gamma with the given shape and scale.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    scale / g
}

/// Conjugate draw of σ² given the alignment. Under the exp-Cauchy error
/// model the likelihood does not involve σ², so this draws from the prior.
pub fn gibbs_sigma2<R: Rng + ?Sized>(hp: &Hyperparams, num_matches: usize, dp2: f64, rng: &mut R) -> f64 {
    match hp.error_model {
        ErrorModel::Gaussian => sample_inv_gamma(hp.a_sigma + 1.5 * num_matches as f64, hp.b_sigma + 0.5 * dp2, rng),
        ErrorModel::ExpCauchy { .. } => sample_inv_gamma(hp.a_sigma, hp.b_sigma, rng),
    }
}

/// Log acceptance ratio of a move of the gap penalties from `gp` to `prop`
/// under a log-scale random walk, given `u` for both and their `log Z`.
pub fn gap_log_ratio(hp: &Hyperparams, gp: &GapParams, prop: &GapParams, u: f64, u_prop: f64, log_z: f64, log_z_prop: f64) -> f64 {
    (-u_prop - log_z_prop) - (-u - log_z)
        + (prop.open * prop.ext / (gp.open * gp.ext)).ln()
        + ln_gamma_pdf(prop.open, hp.a_open, hp.b_open)
        - ln_gamma_pdf(gp.open, hp.a_open, hp.b_open)
        + ln_gamma_pdf(prop.ext, hp.a_ext, hp.b_ext)
        - ln_gamma_pdf(gp.ext, hp.a_ext, hp.b_ext)
}

/// Metropolis-Hastings update of `(open, ext)`. Returns the new penalties,
/// their `log Z`, and whether the proposal was accepted.
pub fn mh_gap_update<R: Rng + ?Sized>(
    problem: &Problem,
    path: &AlignmentPath,
    gp: &GapParams,
    log_z: f64,
    steps: (f64, f64),
    rng: &mut R,
) -> Result<(GapParams, f64, bool)> {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let prop = GapParams { open: gp.open * (steps.0 * z1).exp(), ext: gp.ext * (steps.1 * z2).exp() };
    if !(prop.open > 0.0 && prop.ext > 0.0 && prop.open.is_finite() && prop.ext.is_finite()) {
        return Ok((*gp, log_z, false));
    }
    let stats = path.gap_stats();
    let (s, l) = (stats.count as f64, stats.total_length() as f64);
    let log_z_prop = problem.log_gap_z(&prop)?;
    let ratio = gap_log_ratio(&problem.hp, gp, &prop, gp.open * s + gp.ext * l, prop.open * s + prop.ext * l, log_z, log_z_prop);
    if accept(ratio, rng) {
        Ok((prop, log_z_prop, true))
    } else {
        Ok((*gp, log_z, false))
    }
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Builds the state for a proposed path, or `None` if the path cannot carry
/// a profile registration (fewer than 3 matches or degenerate geometry).
fn proposed_state(problem: &Problem, current: &ModelState, path: AlignmentPath) -> Option<ModelState> {
    if path.num_matches() < 3 {
        return None;
    }
    problem
        .state(Arc::new(path), current.sigma2, current.gp, current.lambda, current.seq_index)
        .ok()
}

/// Local move: propose from the forward pass at the current registration,
/// evaluate the reverse proposal at the proposed path's own registration.
pub fn mh_alignment_local<R: Rng + ?Sized>(problem: &Problem, state: &ModelState, rng: &mut R) -> Result<(ModelState, bool)> {
    let fwd = forward(problem.dp_weights(state, &state.registration)?)?;
    let (path, log_q_fwd) = sample_traceback(&fwd, rng);
    if path == *state.path {
        return Ok((state.clone(), true));
    }
    let Some(prop) = proposed_state(problem, state, path) else {
        return Ok((state.clone(), false));
    };
    let rev = forward(problem.dp_weights(&prop, &prop.registration)?)?;
    let log_q_rev = proposal_log_density(&state.path, &rev);
    let ratio = problem.path_log_target(&prop)? - problem.path_log_target(state)? + log_q_rev - log_q_fwd;
    Ok(if accept(ratio, rng) { (prop, true) } else { (state.clone(), false) })
}

/// Global move: an independence proposal from the forward pass at a
/// registration drawn uniformly from the library. Returns `None` when the
/// library is empty.
pub fn mh_alignment_global<R: Rng + ?Sized>(
    problem: &Problem,
    state: &ModelState,
    lib: &FragmentLibrary,
    rng: &mut R,
) -> Result<Option<(ModelState, bool)>> {
    if lib.is_empty() {
        return Ok(None);
    }
    let reg = lib.entries[rng.random_range(0..lib.len())];
    let fwd = forward(problem.dp_weights(state, &reg)?)?;
    let (path, log_q_fwd) = sample_traceback(&fwd, rng);
    if path == *state.path {
        return Ok(Some((state.clone(), true)));
    }
    let Some(prop) = proposed_state(problem, state, path) else {
        return Ok(Some((state.clone(), false)));
    };
    let log_q_rev = proposal_log_density(&state.path, &fwd);
    let ratio = problem.path_log_target(&prop)? - problem.path_log_target(state)? + log_q_rev - log_q_fwd;
    Ok(Some(if accept(ratio, rng) { (prop, true) } else { (state.clone(), false) }))
}

/// Exact Gibbs draw of `(k_index, eta_index)` under uniform grid priors.
pub fn gibbs_k_eta<R: Rng + ?Sized>(grid: &TemperedGrid, stats: &SeqStats, rng: &mut R) -> (usize, usize) {
    let logw = k_eta_log_weights(grid, stats);
    let cell = sample_log_categorical(&logw, rng);
    (cell / grid.etas().len(), cell % grid.etas().len())
}

/// Unnormalised log conditional of every grid cell, k-major.
pub fn k_eta_log_weights(grid: &TemperedGrid, stats: &SeqStats) -> Vec<f64> {
    let mut logw = Vec::with_capacity(grid.ks().len() * grid.etas().len());
    for k in 0..grid.ks().len() {
        for e in 0..grid.etas().len() {
            logw.push(stats.loglik(grid.get(k, e)));
        }
    }
    logw
}

/// Conditional mode of σ² given the current alignment fit.
fn sigma2_mode(hp: &Hyperparams, state: &ModelState) -> f64 {
    match hp.error_model {
        ErrorModel::Gaussian => (hp.b_sigma + 0.5 * state.dp2) / (hp.a_sigma + 1.5 * state.num_matches() as f64 + 1.0),
        ErrorModel::ExpCauchy { .. } => state.sigma2,
    }
}

/// Alternates max-product alignment at `reg`, superposition and (with
/// `adapt`) the conditional mode of σ², until the path stops changing.
fn refine_path(problem: &Problem, start: &ModelState, reg: &Registration, adapt: bool) -> Option<ModelState> {
    let mut state: Option<ModelState> = None;
    let mut reg = *reg;
    for _ in 0..30 {
        let current = state.as_ref().unwrap_or(start);
        let Ok(next) = problem.dp_weights(current, &reg).and_then(forward_max).map(|f| map_traceback(&f)) else {
            break;
        };
        if state.is_some() && next == *current.path {
            break;
        }
        let Some(mut s) = proposed_state(problem, current, next) else {
            break;
        };
        if adapt {
            s.sigma2 = sigma2_mode(&problem.hp, &s);
        }
        reg = s.registration;
        state = Some(s);
    }
    state
}

/// Starting state: the best (by log posterior) of a diagonal start and up to
/// 50 library registrations, each refined by alternating DP, superposition
/// and (unless σ² is fixed) the conditional mode of σ².
pub fn initial_state(problem: &Problem, lib: &FragmentLibrary, cfg: &ChainConfig) -> Result<ModelState> {
    let hp = &problem.hp;
    let adapt = cfg.init_sigma2.is_none();
    // The prior mode keeps exact matches favourable in the first DP pass.
    let sigma2 = cfg.init_sigma2.unwrap_or(hp.b_sigma / (hp.a_sigma + 1.0));
    let gp = match cfg.init_gaps {
        Some(g) => g,
        None => GapParams::new(hp.a_open / hp.b_open, hp.a_ext / hp.b_ext)?,
    };
    let seq_index = problem.grid.as_ref().map(|g| (g.ks().len() / 2, g.etas().len() - 1));
    let (n, m) = (problem.n(), problem.m());
    let k = n.min(m);
    if k < 3 {
        return Err(AlignError::Degenerate(format!("chains of {n} and {m} residues; at least 3 each required")));
    }
    let diag: Vec<(usize, usize)> = (0..k).map(|i| (i, i)).collect();
    let mut start = problem.state(Arc::new(AlignmentPath::from_pairs(&diag, n, m)?), sigma2, gp, cfg.lambda, seq_index)?;
    if adapt {
        start.sigma2 = sigma2_mode(hp, &start);
    }

    let mut candidates = vec![start.clone()];
    candidates.extend(refine_path(problem, &start, &start.registration, adapt));
    let stride = lib.len().div_ceil(50).max(1);
    let lib_start = ModelState { sigma2, ..start.clone() };
    for reg in lib.entries.iter().step_by(stride) {
        candidates.extend(refine_path(problem, &lib_start, reg, adapt));
    }
    let log_z = problem.log_gap_z(&gp)?;
    let mut best = None;
    let mut best_lp = f64::NEG_INFINITY;
    for c in candidates {
        let lp = problem.log_posterior_with_z(&c, log_z)?;
        if lp > best_lp {
            best_lp = lp;
            best = Some(c);
        }
    }
    Ok(best.unwrap_or(start))
}

/// Runs one chain from `init` (or [`initial_state`]) and returns the
/// retained records.
pub fn run_chain(problem: &Problem, lib: &FragmentLibrary, cfg: &ChainConfig, init: Option<ModelState>) -> Result<SampleSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = match init {
        Some(s) => s,
        None => initial_state(problem, lib, cfg)?,
    };
    let mut log_z = problem.log_gap_z(&state.gp)?;
    let mut acc = Acceptance::default();
    let mut steps = (cfg.rw_step_open, cfg.rw_step_ext);
    let mut window_accepts = 0u64;
    let mut records = Vec::with_capacity(cfg.num_records());

    for t in 0..cfg.iterations {
        let (next, ok) = mh_alignment_local(problem, &state, &mut rng)?;
        acc.local.1 += 1;
        acc.local.0 += ok as u64;
        state = next;

        if cfg.global_move_prob > 0.0 && !lib.is_empty() && rng.random::<f64>() < cfg.global_move_prob {
            if let Some((next, ok)) = mh_alignment_global(problem, &state, lib, &mut rng)? {
                acc.global.1 += 1;
                acc.global.0 += ok as u64;
                state = next;
            }
        }
        debug_assert!(state.num_matches() >= 3);

        if cfg.update_sigma2 {
            state.sigma2 = gibbs_sigma2(&problem.hp, state.num_matches(), state.dp2, &mut rng);
        }
        if cfg.update_gaps {
            let (gp, z, ok) = mh_gap_update(problem, &state.path, &state.gp, log_z, steps, &mut rng)?;
            state.gp = gp;
            log_z = z;
            acc.gap.1 += 1;
            acc.gap.0 += ok as u64;
            window_accepts += ok as u64;
            if cfg.adapt_steps && t < cfg.burn_in && (t + 1) % 100 == 0 {
                let rate = window_accepts as f64 / 100.0;
                let factor = if rate > 0.3 { 1.1 } else { 1.0 / 1.1 };
                steps = (steps.0 * factor, steps.1 * factor);
                window_accepts = 0;
            }
        }
        if let Some(grid) = &problem.grid {
            let stats = problem.seq_stats(&state.path)?;
            state.seq_index = Some(gibbs_k_eta(grid, &stats, &mut rng));
        }

        if t >= cfg.burn_in && (t - cfg.burn_in + 1) % cfg.thin == 0 {
            records.push(make_record(problem, &state, log_z, records.last())?);
        }
    }

    let (ks, etas) = match &problem.grid {
        Some(g) => (g.ks().to_vec(), g.etas().to_vec()),
        None => (Vec::new(), Vec::new()),
    };
    Ok(SampleSet { records, n: problem.n(), m: problem.m(), seed: cfg.seed, ks, etas, acceptance: acc })
}

fn make_record(problem: &Problem, state: &ModelState, log_z: f64, prev: Option<&Record>) -> Result<Record> {
    // Share the path allocation with the previous record when unchanged.
    let path = match prev {
        Some(r) if Arc::ptr_eq(&r.path, &state.path) || *r.path == *state.path => r.path.clone(),
        _ => state.path.clone(),
    };
    let t = state.registration.translation();
    Ok(Record {
        path,
        num_matches: state.num_matches(),
        sigma2: state.sigma2,
        open: state.gp.open,
        ext: state.gp.ext,
        rmsd: state.rmsd(),
        angles: state.registration.euler_angles(),
        translation: [t[0], t[1], t[2]],
        k_index: state.seq_index.map(|s| s.0),
        eta_index: state.seq_index.map(|s| s.1),
        log_posterior: problem.log_posterior_with_z(state, log_z)?,
    })
}

/// Runs `chains` independent chains concurrently with seeds `seed, seed+1, …`.
pub fn run_chains(problem: &Problem, lib: &FragmentLibrary, cfg: &ChainConfig, chains: usize) -> Result<Vec<SampleSet>> {
    if chains == 0 {
        return Err(AlignError::contract("at least one chain is required"));
    }
    cfg.validate()?;
    let init = initial_state(problem, lib, cfg)?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                let cfg = ChainConfig { seed: cfg.seed.wrapping_add(c as u64), ..cfg.clone() };
                let init = init.clone();
                scope.spawn(move || run_chain(problem, lib, &cfg, Some(init)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{enumerate_paths, Step};
    use crate::posterior::sequence_indices;
    use crate::structio::AminoAcid;
    use nalgebra::{Rotation3, Vector3};
    use rand::Rng;

    fn helix(k: usize) -> Vec<Coord> {
        (0..k)
            .map(|i| {
                let t = i as f64 * 100f64.to_radians();
                [2.3 * t.cos(), 2.3 * t.sin(), 1.5 * i as f64]
            })
            .collect()
    }

    fn moved(x: &[Coord]) -> Vec<Coord> {
        let r = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let reg = Registration::new(*r.matrix(), Vector3::new(4.0, -2.0, 9.0)).unwrap();
        reg.apply(x)
    }

    #[test]
    fn sigma2_draws() {
        let hp = Hyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| gibbs_sigma2(&hp, 3, 0.0, &mut rng)).collect();
        assert!(draws.iter().all(|&v| v > 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let expected = hp.b_sigma / (hp.a_sigma + 4.5 - 1.0);
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
        let prior: Vec<f64> = (0..n).map(|_| gibbs_sigma2(&hp, 0, 0.0, &mut rng)).collect();
        let pm = prior.iter().sum::<f64>() / n as f64;
        assert!((pm / (1.5 / 1.25) - 1.0).abs() < 0.03);
    }

    #[test]
    fn identical_gap_proposal_is_always_accepted() {
        let hp = Hyperparams::default();
        let gp = GapParams::new(3.0, 0.2).unwrap();
        assert_eq!(gap_log_ratio(&hp, &gp, &gp, 1.7, 1.7, 2.0, 2.0), 0.0);
        let prop = GapParams::new(3.5, 0.15).unwrap();
        let a = gap_log_ratio(&hp, &gp, &prop, 1.0, 2.0, 0.3, 0.4);
        let b = gap_log_ratio(&hp, &gp, &prop, 11.0, 12.0, 0.3, 0.4);
        assert!((a - b).abs() < 1e-12);
        let back = gap_log_ratio(&hp, &prop, &gp, 2.0, 1.0, 0.4, 0.3);
        assert!((a + back).abs() < 1e-12);
    }

    #[test]
    fn library_examples() {
        let x = helix(12);
        let y = moved(&x);
        let (lib, warn) = build_fragment_library(&x, &y, 1.0);
        assert!(warn.is_none());
        for i in 0..=x.len() - WINDOW {
            let (_, dp2) = superpose(&x[i..i + WINDOW], &y[i..i + WINDOW]).unwrap();
            assert!((dp2 / WINDOW as f64).sqrt() < 1e-8);
        }
        // A helix is self-similar, so off-diagonal windows also qualify.
        assert!(lib.len() >= x.len() - WINDOW + 1);
        assert!(build_fragment_library(&x, &y, 0.0).0.is_empty());
        let (short, warn) = build_fragment_library(&x[..5], &y, 1.0);
        assert!(short.is_empty() && warn.is_some());
    }

    #[test]
    fn local_move_reversibility_identity() {
        // For any pair of states, the log ratios of the two directions cancel.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Coord> = (0..5).map(|_| [rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0]).collect();
        let y: Vec<Coord> = (0..5).map(|_| [rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0]).collect();
        let prob = Problem::structure_only(x, y, Hyperparams::default()).unwrap();
        let gp = GapParams::new(2.0, 0.3).unwrap();
        let paths: Vec<_> = enumerate_paths(5, 5, true).unwrap().into_iter().filter(|p| p.num_matches() >= 3).collect();
        for _ in 0..20 {
            let a = prob.state(Arc::new(paths[rng.random_range(0..paths.len())].clone()), 1.1, gp, 7.6, None).unwrap();
            let b = prob.state(Arc::new(paths[rng.random_range(0..paths.len())].clone()), 1.1, gp, 7.6, None).unwrap();
            let fa = forward(prob.dp_weights(&a, &a.registration).unwrap()).unwrap();
            let fb = forward(prob.dp_weights(&b, &b.registration).unwrap()).unwrap();
            let ta = prob.path_log_target(&a).unwrap();
            let tb = prob.path_log_target(&b).unwrap();
            let ab = tb - ta + proposal_log_density(&a.path, &fb) - proposal_log_density(&b.path, &fa);
            let ba = ta - tb + proposal_log_density(&b.path, &fa) - proposal_log_density(&a.path, &fb);
            assert!((ab + ba).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_proteins_stay_aligned() {
        let x = helix(15);
        let y = moved(&x);
        let prob = Problem::structure_only(x.clone(), y, Hyperparams::default()).unwrap();
        let (lib, _) = build_fragment_library(&prob.x, &prob.y, 1.0);
        let cfg = ChainConfig { iterations: 3000, burn_in: 500, seed: 3, ..ChainConfig::default() };
        let set = run_chain(&prob, &lib, &cfg, None).unwrap();
        assert_eq!(set.len(), 2500);
        let map = crate::summaries::map_alignment(&set).unwrap();
        assert_eq!(map.path.steps(), &[Step::Match; 15]);
        let mean_s2 = set.records.iter().map(|r| r.sigma2).sum::<f64>() / set.len() as f64;
        assert!(mean_s2 < 1.5 / 1.25);
        let diag = set.records.iter().filter(|r| r.num_matches == 15).count();
        assert!(diag as f64 > 0.99 * set.len() as f64);
    }

    #[test]
    fn global_move_at_the_profile_registration() {
        let x = helix(12);
        let y = moved(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let prob = Problem::structure_only(x, y, Hyperparams::default()).unwrap();
        let diag = AlignmentPath::new(vec![Step::Match; 12], 12, 12).unwrap();
        let start = prob.state(Arc::new(diag), 0.5, GapParams::new(2.0, 0.3).unwrap(), 7.6, None).unwrap();

        let empty = FragmentLibrary { entries: Vec::new(), delta: 1.0 };
        assert!(mh_alignment_global(&prob, &start, &empty, &mut rng).unwrap().is_none());

        let lib = FragmentLibrary { entries: vec![start.registration], delta: 1.0 };
        let steps = 20_000;
        let (mut local, mut global) = (start.clone(), start.clone());
        let (mut acc_local, mut acc_global) = (0, 0);
        for _ in 0..steps {
            let (s, a) = mh_alignment_local(&prob, &local, &mut rng).unwrap();
            local = s;
            acc_local += a as usize;
            let (s, a) = mh_alignment_global(&prob, &global, &lib, &mut rng).unwrap().unwrap();
            global = s;
            acc_global += a as usize;
        }
        assert!(acc_global >= acc_local, "global {acc_global} vs local {acc_local}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let x = helix(10);
        let mut y = moved(&x);
        y[4][0] += 1.5;
        let prob = Problem::structure_only(x, y, Hyperparams::default()).unwrap();
        let (lib, _) = build_fragment_library(&prob.x, &prob.y, 1.0);
        let cfg = ChainConfig { iterations: 400, burn_in: 100, thin: 3, seed: 17, ..ChainConfig::default() };
        let a = run_chain(&prob, &lib, &cfg, None).unwrap();
        let b = run_chain(&prob, &lib, &cfg, None).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        let both = run_chains(&prob, &lib, &cfg, 2).unwrap();
        assert_eq!(both[0].records, a.records);
        assert_ne!(both[1].records, a.records);
    }

    #[test]
    fn k_eta_gibbs_favours_identity_for_identical_sequences() {
        let grid = TemperedGrid::default_grid();
        let seq: Vec<AminoAcid> = b"ACDEFGHIKLMNPQRSTVWY".iter().map(|&c| AminoAcid::from_letter(c)).collect();
        let idx = sequence_indices(&seq);
        let path = AlignmentPath::new(vec![Step::Match; 20], 20, 20).unwrap();
        let stats = SeqStats::from_path(&idx, &idx, &path).unwrap();
        let logw = k_eta_log_weights(&grid, &stats);
        let best = (0..logw.len()).max_by(|&a, &b| logw[a].total_cmp(&logw[b])).unwrap();
        assert_eq!(best, grid.etas().len() - 1);

        let empty = SeqStats { pairs: [[0; 20]; 20], skips: [0; 20] };
        assert!(k_eta_log_weights(&grid, &empty).iter().all(|&w| w == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig { iterations: 10, burn_in: 10, ..ChainConfig::default() }.validate().is_err());
        assert!(ChainConfig { thin: 0, ..ChainConfig::default() }.validate().is_err());
        assert!(ChainConfig { global_move_prob: 1.5, ..ChainConfig::default() }.validate().is_err());
        assert_eq!(ChainConfig { iterations: 100, burn_in: 10, thin: 4, ..ChainConfig::default() }.num_records(), 22);
    }
}
