//! Bayesian pairwise protein structure alignment.
//!
//! The posterior over alignments, affine gap penalties, the isotropic error
//! scale and (optionally) the evolutionary distance of a PAM substitution
//! model is explored by Markov chain Monte Carlo. Alignment moves are
//! proposed by forward-backward dynamic programming conditional on a rigid
//! registration and corrected by Metropolis-Hastings.
//!
//! Module map:
//!
//! - [`structio`]: PDB C-alpha parsing and output formats.
//! - [`geometry`]: least-squares superposition and Procrustes distances.
//! - [`alignment`]: alignment paths, gap bookkeeping, brute-force enumeration.
//! - [`dpengine`]: log-domain forward, stochastic and MAP traceback, prior normaliser.
//! - [`submodel`]: PAM substitution family, tempering and entropies.
//! - [`posterior`]: likelihood, prior and posterior evaluation.
//! - [`sampler`]: MCMC kernels and chain orchestration.
//! - [`summaries`]: MAP, marginal matrix, scalar summaries, PSRF.
//! - [`oracle`]: enumeration-based self checks on tiny synthetic instances.

pub mod alignment;
pub mod dpengine;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod posterior;
pub mod sampler;
pub mod structio;
pub mod submodel;
pub mod summaries;

pub use error::{AlignError, Result};

/// Cartesian coordinate of one C-alpha atom, in Ångströms.
pub type Coord = [f64; 3];

/// `log(exp(a) + exp(b) + exp(c))` without overflow.
#[inline]
pub(crate) fn logsumexp3(v: [f64; 3]) -> f64 {
    let max = v[0].max(v[1]).max(v[2]);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + ((v[0] - max).exp() + (v[1] - max).exp() + (v[2] - max).exp()).ln()
}

/// Stable log-sum-exp over a slice; `-inf` for an empty or all `-inf` slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Draw an index with probability proportional to `exp(logw[i])`.
pub(crate) fn sample_log_categorical<R: rand::Rng + ?Sized>(logw: &[f64], rng: &mut R) -> usize {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite());
    let total: f64 = logw.iter().map(|w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in logw.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = i;
            if u < p {
                return i;
            }
            u -= p;
        }
    }
    last
}
