//! Log-domain dynamic programming over alignment paths.
//!
//! States are indexed `0 = match`, `1 = x-skip`, `2 = y-skip`. The cell
//! `(i, j)` holds the log total weight of all prefixes consuming `i` residues
//! of X and `j` of Y that end in each state. The empty prefix behaves like a
//! match, so a leading skip pays the opening weight.

use rand::Rng;

use crate::alignment::{AlignmentPath, GapParams, Step};
use crate::error::{AlignError, Result};
use crate::{logsumexp3, sample_log_categorical};

const NEG_INF: f64 = f64::NEG_INFINITY;

const M: usize = 0;
const X: usize = 1;
const Y: usize = 2;

/// Step log-weights for one alignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DpWeights {
    n: usize,
    m: usize,
    match_lw: Vec<f64>,
    skip_x_lw: Vec<f64>,
    skip_y_lw: Vec<f64>,
    /// Log weight of the first skip of a gap: `-(open + ext)`.
    pub open_lw: f64,
    /// Log weight of each further skip: `-ext`.
    pub ext_lw: f64,
    /// Whether a y-skip may directly follow an x-skip inside one gap.
    pub simultaneous: bool,
}

impl DpWeights {
    /// Match weights from `match_lw(i, j)` (0-based) and gap weights from `gp`;
    /// skips carry no emission term.
    pub fn new(
        n: usize,
        m: usize,
        match_lw: impl Fn(usize, usize) -> f64,
        gp: &GapParams,
        simultaneous: bool,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                table.push(match_lw(i, j));
            }
        }
        DpWeights::from_parts(n, m, table, vec![0.0; n], vec![0.0; m], -(gp.open + gp.ext), -gp.ext, simultaneous)
    }

    /// Uniform emissions; the forward total is then the gap-prior normaliser.
    pub fn prior(n: usize, m: usize, gp: &GapParams, simultaneous: bool) -> Result<Self> {
        DpWeights::new(n, m, |_, _| 0.0, gp, simultaneous)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n: usize,
        m: usize,
        match_lw: Vec<f64>,
        skip_x_lw: Vec<f64>,
        skip_y_lw: Vec<f64>,
        open_lw: f64,
        ext_lw: f64,
        simultaneous: bool,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(AlignError::contract("alignment problems need nonempty chains"));
        }
        if match_lw.len() != n * m || skip_x_lw.len() != n || skip_y_lw.len() != m {
            return Err(AlignError::contract("weight table dimensions do not match n and m"));
        }
        let bad = |v: &f64| v.is_nan() || *v == f64::INFINITY;
        if match_lw.iter().chain(&skip_x_lw).chain(&skip_y_lw).any(bad) || bad(&open_lw) || bad(&ext_lw) {
            return Err(AlignError::contract("log-weights must be finite or -inf"));
        }
        Ok(DpWeights { n, m, match_lw, skip_x_lw, skip_y_lw, open_lw, ext_lw, simultaneous })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn match_lw(&self, i: usize, j: usize) -> f64 {
        self.match_lw[i * self.m + j]
    }

    /// Adds per-residue skip emissions (for example a sequence model).
    pub fn add_skip_emissions(&mut self, skip_x: &[f64], skip_y: &[f64]) -> Result<()> {
        if skip_x.len() != self.n || skip_y.len() != self.m {
            return Err(AlignError::contract("skip emission length mismatch"));
        }
        self.skip_x_lw.iter_mut().zip(skip_x).for_each(|(a, b)| *a += b);
        self.skip_y_lw.iter_mut().zip(skip_y).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Log weight of moving from state `from` into state `to`, emission excluded.
    #[inline]
    fn transition(&self, from: usize, to: usize) -> f64 {
        match (from, to) {
            (_, M) => 0.0,
            (M, _) => self.open_lw,
            (X, X) | (Y, Y) => self.ext_lw,
            (X, Y) if self.simultaneous => self.ext_lw,
            _ => NEG_INF,
        }
    }

    #[inline]
    fn emission(&self, state: usize, i: usize, j: usize) -> f64 {
        match state {
            M => self.match_lw(i - 1, j - 1),
            X => self.skip_x_lw[i - 1],
            _ => self.skip_y_lw[j - 1],
        }
    }

    /// Log weight of a complete path: emissions plus gap transitions.
    pub fn path_log_weight(&self, path: &AlignmentPath) -> f64 {
        let (mut i, mut j, mut prev) = (0, 0, M);
        let mut lw = 0.0;
        for step in path.steps() {
            let state = state_of(*step);
            let (di, dj) = advance(state);
            i += di;
            j += dj;
            lw += self.transition(prev, state) + self.emission(state, i, j);
            prev = state;
        }
        lw
    }
}

#[inline]
fn state_of(step: Step) -> usize {
    match step {
        Step::Match => M,
        Step::SkipX => X,
        Step::SkipY => Y,
    }
}

const STEPS: [Step; 3] = [Step::Match, Step::SkipX, Step::SkipY];

#[inline]
fn advance(state: usize) -> (usize, usize) {
    match state {
        M => (1, 1),
        X => (1, 0),
        _ => (0, 1),
    }
}

/// Forward values under sum-product (`logsumexp`) or max-product reduction.
#[derive(Debug, Clone)]
pub struct ForwardTable {
    weights: DpWeights,
    v: Vec<[f64; 3]>,
    total: f64,
}

fn fill(w: &DpWeights, reduce: impl Fn([f64; 3]) -> f64) -> Vec<[f64; 3]> {
    let (n, m) = (w.n, w.m);
    let cols = m + 1;
    let mut v = vec![[NEG_INF; 3]; (n + 1) * cols];
    v[0] = [0.0, NEG_INF, NEG_INF];
    let y_from_x = if w.simultaneous { w.ext_lw } else { NEG_INF };
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut cell = [NEG_INF; 3];
            if i > 0 && j > 0 {
                let d = v[(i - 1) * cols + j - 1];
                cell[M] = w.match_lw[(i - 1) * m + j - 1] + reduce(d);
            }
            if i > 0 {
                let u = v[(i - 1) * cols + j];
                cell[X] = w.skip_x_lw[i - 1] + reduce([u[M] + w.open_lw, u[X] + w.ext_lw, NEG_INF]);
            }
            if j > 0 {
                let l = v[i * cols + j - 1];
                cell[Y] = w.skip_y_lw[j - 1] + reduce([l[M] + w.open_lw, l[X] + y_from_x, l[Y] + w.ext_lw]);
            }
            v[i * cols + j] = cell;
        }
    }
    v
}

fn max3(v: [f64; 3]) -> f64 {
    v[0].max(v[1]).max(v[2])
}

/// Index of the largest entry, preferring the lowest index among ties.
fn argmax3(v: [f64; 3]) -> usize {
    let mut best = 0;
    for k in 1..3 {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

impl ForwardTable {
    fn build(weights: DpWeights, reduce: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let v = fill(&weights, &reduce);
        let total = reduce(v[v.len() - 1]);
        if !total.is_finite() {
            return Err(AlignError::contract(format!("forward total is not finite ({total})")));
        }
        Ok(ForwardTable { weights, v, total })
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> [f64; 3] {
        self.v[i * (self.weights.m + 1) + j]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn weights(&self) -> &DpWeights {
        &self.weights
    }

    /// Forward value for prefix lengths `(i, j)` ending in `step`.
    pub fn value(&self, i: usize, j: usize, step: Step) -> f64 {
        self.cell(i, j)[state_of(step)]
    }

    fn traceback(&self, mut choose: impl FnMut([f64; 3]) -> usize) -> AlignmentPath {
        let w = &self.weights;
        let (mut i, mut j) = (w.n, w.m);
        let mut state = choose(self.cell(i, j));
        let mut steps = Vec::with_capacity(w.n + w.m);
        while i > 0 || j > 0 {
            steps.push(STEPS[state]);
            let (di, dj) = advance(state);
            i -= di;
            j -= dj;
            let prev = self.cell(i, j);
            let scores = [
                prev[M] + w.transition(M, state),
                prev[X] + w.transition(X, state),
                prev[Y] + w.transition(Y, state),
            ];
            state = if i == 0 && j == 0 { M } else { choose(scores) };
        }
        steps.reverse();
        AlignmentPath::from_steps_unchecked(steps, w.n, w.m)
    }
}

/// Sum-product forward pass.
pub fn forward(weights: DpWeights) -> Result<ForwardTable> {
    ForwardTable::build(weights, logsumexp3)
}

/// Max-product forward pass, for [`map_traceback`].
pub fn forward_max(weights: DpWeights) -> Result<ForwardTable> {
    ForwardTable::build(weights, max3)
}

/// Draws a path with probability proportional to its weight and returns it
/// with its log sampling density.
pub fn sample_traceback<R: Rng + ?Sized>(fwd: &ForwardTable, rng: &mut R) -> (AlignmentPath, f64) {
    let path = fwd.traceback(|scores| sample_log_categorical(&scores, rng));
    let density = proposal_log_density(&path, fwd);
    (path, density)
}

/// Highest-weight path from a max-product table. Ties prefer match, then
/// x-skip, then y-skip at each backward decision.
pub fn map_traceback(fwd: &ForwardTable) -> AlignmentPath {
    fwd.traceback(argmax3)
}

/// `log q(path)`: the path's log weight minus the forward total.
pub fn proposal_log_density(path: &AlignmentPath, fwd: &ForwardTable) -> f64 {
    fwd.weights.path_log_weight(path) - fwd.total
}

/// `log Z`, the log of the summed `exp(-u)` over all paths.
pub fn gap_prior_log_z(n: usize, m: usize, gp: &GapParams, simultaneous: bool) -> Result<f64> {
    Ok(forward(DpWeights::prior(n, m, gp, simultaneous)?)?.total)
}
