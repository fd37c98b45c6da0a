//! Alignment paths and affine gap accounting.
//!
//! A path is a sequence of steps consuming residues of X and Y. Inside a run
//! of skips the x-consuming skips always come first: `SkipX` never follows
//! `SkipY`, which makes paths and match matrices one-to-one. A run of
//! consecutive skips, whichever protein they consume, is a single gap.

use nalgebra::DMatrix;

use crate::error::{AlignError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Match,
    /// Consumes one residue of X, left unmatched.
    SkipX,
    /// Consumes one residue of Y, left unmatched.
    SkipY,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignmentPath {
    steps: Vec<Step>,
    n: usize,
    m: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapStats {
    /// Number of maximal skip runs.
    pub count: usize,
    /// Total skips per run, in path order.
    pub lengths: Vec<usize>,
}

impl GapStats {
    pub fn total_length(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// Affine gap penalties: a gap of length `l` costs `open + ext * l`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GapParams {
    pub open: f64,
    pub ext: f64,
}

impl GapParams {
    pub fn new(open: f64, ext: f64) -> Result<Self> {
        if !(open.is_finite() && ext.is_finite() && open >= 0.0 && ext >= 0.0) {
            return Err(AlignError::contract(format!(
                "gap penalties must be finite and nonnegative (open={open}, ext={ext})"
            )));
        }
        Ok(GapParams { open, ext })
    }
}

impl AlignmentPath {
    pub fn new(steps: Vec<Step>, n: usize, m: usize) -> Result<Self> {
        let matches = steps.iter().filter(|s| **s == Step::Match).count();
        let skip_x = steps.iter().filter(|s| **s == Step::SkipX).count();
        let skip_y = steps.len() - matches - skip_x;
        if matches + skip_x != n || matches + skip_y != m {
            return Err(AlignError::contract(format!(
                "path consumes {}x{} residues, expected {n}x{m}",
                matches + skip_x,
                matches + skip_y
            )));
        }
        if steps.windows(2).any(|w| w[0] == Step::SkipY && w[1] == Step::SkipX) {
            return Err(AlignError::contract("SKIP_X may not follow SKIP_Y"));
        }
        Ok(AlignmentPath { steps, n, m })
    }

    pub(crate) fn from_steps_unchecked(steps: Vec<Step>, n: usize, m: usize) -> Self {
        debug_assert!(AlignmentPath::new(steps.clone(), n, m).is_ok());
        AlignmentPath { steps, n, m }
    }

    /// Canonical path for a strictly increasing list of 0-based matched pairs.
    pub fn from_pairs(pairs: &[(usize, usize)], n: usize, m: usize) -> Result<Self> {
        let mut steps = Vec::with_capacity(n + m);
        let (mut i, mut j) = (0, 0);
        for &(pi, pj) in pairs.iter().chain(std::iter::once(&(n, m))) {
            if pi < i || pj < j || pi > n || pj > m {
                return Err(AlignError::contract(format!("pair ({pi}, {pj}) is not increasing or out of range")));
            }
            steps.extend(std::iter::repeat_n(Step::SkipX, pi - i));
            steps.extend(std::iter::repeat_n(Step::SkipY, pj - j));
            if (pi, pj) != (n, m) {
                steps.push(Step::Match);
                i = pi + 1;
                j = pj + 1;
            }
        }
        AlignmentPath::new(steps, n, m)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_matches(&self) -> usize {
        self.steps.iter().filter(|s| **s == Step::Match).count()
    }

    /// True when some gap run consumes residues of both proteins.
    pub fn has_simultaneous_gap(&self) -> bool {
        self.steps.windows(2).any(|w| w[0] == Step::SkipX && w[1] == Step::SkipY)
    }

    /// 0-based matched index pairs, strictly increasing in both coordinates.
    pub fn matched_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let (mut i, mut j) = (0, 0);
        for s in &self.steps {
            match s {
                Step::Match => {
                    pairs.push((i, j));
                    i += 1;
                    j += 1;
                }
                Step::SkipX => i += 1,
                Step::SkipY => j += 1,
            }
        }
        pairs
    }

    /// Unmatched residues of X and of Y, 0-based.
    pub fn unmatched(&self) -> (Vec<usize>, Vec<usize>) {
        let (mut ux, mut uy) = (Vec::new(), Vec::new());
        let (mut i, mut j) = (0, 0);
        for s in &self.steps {
            match s {
                Step::Match => {
                    i += 1;
                    j += 1;
                }
                Step::SkipX => {
                    ux.push(i);
                    i += 1;
                }
                Step::SkipY => {
                    uy.push(j);
                    j += 1;
                }
            }
        }
        (ux, uy)
    }

    pub fn to_match_matrix(&self) -> DMatrix<u8> {
        let mut mat = DMatrix::zeros(self.n, self.m);
        for (i, j) in self.matched_pairs() {
            mat[(i, j)] = 1;
        }
        mat
    }

    /// The same matching seen from Y's side, in canonical skip order.
    pub fn transpose(&self) -> AlignmentPath {
        let pairs: Vec<_> = self.matched_pairs().into_iter().map(|(i, j)| (j, i)).collect();
        AlignmentPath::from_pairs(&pairs, self.m, self.n).expect("transposed pairs stay increasing")
    }

    pub fn gap_stats(&self) -> GapStats {
        let mut lengths = Vec::new();
        let mut run = 0;
        for s in &self.steps {
            if *s == Step::Match {
                if run > 0 {
                    lengths.push(run);
                }
                run = 0;
            } else {
                run += 1;
            }
        }
        if run > 0 {
            lengths.push(run);
        }
        GapStats { count: lengths.len(), lengths }
    }
}

pub fn gap_stats(path: &AlignmentPath) -> GapStats {
    path.gap_stats()
}

/// `open * (number of gaps) + ext * (total gap length)`.
pub fn gap_penalty(path: &AlignmentPath, gp: &GapParams) -> f64 {
    let stats = path.gap_stats();
    gp.open * stats.count as f64 + gp.ext * stats.total_length() as f64
}

/// Upper bound on `n * m` accepted by [`enumerate_paths`].
pub const ENUMERATION_LIMIT: usize = 36;

/// Every valid path for an `n` by `m` problem. With `allow_simultaneous`
/// false, a gap run may not consume residues of both proteins.
pub fn enumerate_paths(n: usize, m: usize, allow_simultaneous: bool) -> Result<Vec<AlignmentPath>> {
    if n * m > ENUMERATION_LIMIT {
        return Err(AlignError::Refused(format!(
            "enumeration of {n}x{m} paths exceeds the n*m <= {ENUMERATION_LIMIT} guard"
        )));
    }
    let mut out = Vec::new();
    let mut steps = Vec::with_capacity(n + m);
    extend(n, m, 0, 0, allow_simultaneous, &mut steps, &mut out);
    Ok(out)
}

fn extend(
    n: usize,
    m: usize,
    i: usize,
    j: usize,
    simultaneous: bool,
    steps: &mut Vec<Step>,
    out: &mut Vec<AlignmentPath>,
) {
    if i == n && j == m {
        out.push(AlignmentPath { steps: steps.clone(), n, m });
        return;
    }
    let last = steps.last().copied();
    let mut push = |s: Step, ni: usize, nj: usize, steps: &mut Vec<Step>| {
        steps.push(s);
        extend(n, m, ni, nj, simultaneous, steps, out);
        steps.pop();
    };
    if i < n && j < m {
        push(Step::Match, i + 1, j + 1, steps);
    }
    if i < n && last != Some(Step::SkipY) {
        push(Step::SkipX, i + 1, j, steps);
    }
    if j < m && (simultaneous || last != Some(Step::SkipX)) {
        push(Step::SkipY, i, j + 1, steps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Step::*;

    fn path(steps: &[Step], n: usize, m: usize) -> AlignmentPath {
        AlignmentPath::new(steps.to_vec(), n, m).unwrap()
    }

    #[test]
    fn validation() {
        assert!(AlignmentPath::new(vec![Match], 2, 1).is_err());
        assert!(AlignmentPath::new(vec![SkipY, SkipX], 1, 1).is_err());
        assert!(AlignmentPath::new(vec![SkipX, SkipY], 1, 1).is_ok());
    }

    #[test]
    fn gap_stats_examples() {
        assert_eq!(path(&[Match, Match], 2, 2).gap_stats(), GapStats { count: 0, lengths: vec![] });
        assert_eq!(path(&[Match, SkipX, SkipY], 2, 2).gap_stats(), GapStats { count: 1, lengths: vec![2] });
        assert_eq!(path(&[SkipX, Match, SkipX], 3, 1).gap_stats(), GapStats { count: 2, lengths: vec![1, 1] });
    }

    #[test]
    fn gap_penalty_examples() {
        let gp = GapParams::new(4.0, 0.1).unwrap();
        assert_eq!(gap_penalty(&path(&[Match, Match], 2, 2), &gp), 0.0);
        assert!((gap_penalty(&path(&[Match, SkipX, SkipY], 2, 2), &gp) - 4.2).abs() < 1e-12);
        let unit = GapParams::new(0.0, 1.0).unwrap();
        let p = path(&[SkipX, Match, SkipX, SkipY, SkipY], 3, 3);
        assert_eq!(gap_penalty(&p, &unit), (3 + 3 - 2 * p.num_matches()) as f64);
        assert!(GapParams::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let p = enumerate_paths(1, 1, true).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.contains(&path(&[Match], 1, 1)));
        assert!(p.contains(&path(&[SkipX, SkipY], 1, 1)));
        assert_eq!(enumerate_paths(1, 1, false).unwrap(), vec![path(&[Match], 1, 1)]);
        let p = enumerate_paths(2, 1, true).unwrap();
        assert_eq!(p.len(), 3);
        for expected in [
            path(&[Match, SkipX], 2, 1),
            path(&[SkipX, Match], 2, 1),
            path(&[SkipX, SkipX, SkipY], 2, 1),
        ] {
            assert!(p.contains(&expected));
        }
        assert!(matches!(enumerate_paths(6, 7, true), Err(AlignError::Refused(_))));
    }

    #[test]
    fn enumeration_counts_match_binomial() {
        // With simultaneous gaps allowed, paths correspond to monotone
        // matchings, of which there are C(n+m, n).
        fn binom(a: usize, b: usize) -> usize {
            (0..b).fold(1, |acc, k| acc * (a - k) / (k + 1))
        }
        for n in 1..=6 {
            for m in 1..=6 {
                assert_eq!(enumerate_paths(n, m, true).unwrap().len(), binom(n + m, n));
            }
        }
    }

    #[test]
    fn match_matrix_and_pairs() {
        assert_eq!(path(&[Match], 1, 1).to_match_matrix(), DMatrix::from_element(1, 1, 1u8));
        assert_eq!(path(&[SkipX, SkipY], 1, 1).to_match_matrix(), DMatrix::from_element(1, 1, 0u8));
        assert_eq!(path(&[Match, SkipX, Match], 3, 2).matched_pairs(), vec![(0, 0), (2, 1)]);
    }

    #[test]
    fn from_pairs_round_trip() {
        for p in enumerate_paths(3, 4, true).unwrap() {
            assert_eq!(AlignmentPath::from_pairs(&p.matched_pairs(), 3, 4).unwrap(), p);
        }
    }

    proptest! {
        #[test]
        fn enumerated_paths_are_matchings(n in 1usize..=5, m in 1usize..=5, sim in any::<bool>()) {
            for p in enumerate_paths(n, m, sim).unwrap() {
                let mat = p.to_match_matrix();
                for i in 0..n {
                    prop_assert!(mat.row(i).iter().map(|&v| v as usize).sum::<usize>() <= 1);
                }
                for j in 0..m {
                    prop_assert!(mat.column(j).iter().map(|&v| v as usize).sum::<usize>() <= 1);
                }
                let pairs = p.matched_pairs();
                prop_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
                prop_assert_eq!(p.gap_stats().total_length(), n + m - 2 * p.num_matches());
                if !sim {
                    prop_assert!(!p.has_simultaneous_gap());
                }
            }
        }

        #[test]
        fn penalty_is_additive_and_transpose_invariant(n in 1usize..=5, m in 1usize..=5, open in 0.0f64..10.0, ext in 0.0f64..2.0) {
            let gp = GapParams::new(open, ext).unwrap();
            for p in enumerate_paths(n, m, true).unwrap() {
                let stats = p.gap_stats();
                let by_run: f64 = stats.lengths.iter().map(|&l| open + ext * l as f64).sum();
                prop_assert!((gap_penalty(&p, &gp) - by_run).abs() < 1e-9);
                prop_assert!((gap_penalty(&p, &gp) - gap_penalty(&p.transpose(), &gp)).abs() < 1e-9);
            }
        }
    }
}
