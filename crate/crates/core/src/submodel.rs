//! PAM substitution models, tempering and entropy.
//!
//! The PAM-k joint distribution is `Θ_k(a, b) = π_a (P^k)_{ab}` where `P` is
//! the PAM1 mutation matrix and `π` its equilibrium frequencies. Tempering
//! raises every cell to the power `η` and renormalises.

use std::sync::OnceLock;

use nalgebra::SMatrix;

use crate::error::{AlignError, Result};
use crate::structio::ALPHABET;

pub const NUM_AA: usize = 20;

pub type Table = [[f64; NUM_AA]; NUM_AA];
type Mat20 = SMatrix<f64, NUM_AA, NUM_AA>;

const DAYHOFF_PAM1: &str = include_str!("../data/dayhoff_pam1.txt");

/// Largest PAM distance accepted by [`pam_model`].
pub const MAX_PAM: u32 = 500;

/// PAM1 mutation probabilities and equilibrium frequencies in [`ALPHABET`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationData {
    pub transition: Table,
    pub frequencies: [f64; NUM_AA],
}

/// Parses the substitution-data format: comment lines start with `#`; a line
/// of 20 one-letter codes; 20 rows of a row-stochastic matrix, either full or
/// lower triangular (diagonal included); a line of 20 frequencies.
pub fn parse_mutation_data(text: &str) -> Result<MutationData> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let parse_err = |line: usize, message: String| AlignError::Parse { line, message };

    let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "missing header line".into()))?;
    let mut order = Vec::with_capacity(NUM_AA);
    for tok in header.split_whitespace() {
        let pos = match tok.as_bytes() {
            [c] => ALPHABET.iter().position(|a| a == c),
            _ => None,
        };
        let pos = pos.ok_or_else(|| parse_err(hline, format!("unknown amino-acid code '{tok}'")))?;
        if order.contains(&pos) {
            return Err(parse_err(hline, format!("duplicate amino-acid code '{tok}'")));
        }
        order.push(pos);
    }
    if order.len() != NUM_AA {
        return Err(parse_err(hline, format!("expected {NUM_AA} codes, found {}", order.len())));
    }

    let numbers = |line: usize, s: &str| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| parse_err(line, format!("invalid probability '{t}'")))
            })
            .collect()
    };

    let mut rows = Vec::with_capacity(NUM_AA);
    for r in 0..NUM_AA {
        let (line, s) = lines.next().ok_or_else(|| parse_err(0, format!("missing matrix row {}", r + 1)))?;
        rows.push((line, numbers(line, s)?));
    }
    let lower = rows.iter().enumerate().all(|(r, (_, v))| v.len() == r + 1);
    if !lower {
        if let Some((line, v)) = rows.iter().find(|(_, v)| v.len() != NUM_AA) {
            return Err(parse_err(*line, format!("expected {NUM_AA} entries, found {}", v.len())));
        }
    }
    let (fline, fs) = lines.next().ok_or_else(|| parse_err(0, "missing frequency line".into()))?;
    let freqs_in = numbers(fline, fs)?;
    if freqs_in.len() != NUM_AA {
        return Err(parse_err(fline, format!("expected {NUM_AA} frequencies, found {}", freqs_in.len())));
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "unexpected trailing content".into()));
    }

    let fsum: f64 = freqs_in.iter().sum();
    if (fsum - 1.0).abs() > 1e-4 {
        return Err(parse_err(fline, format!("frequencies sum to {fsum}, expected 1")));
    }
    let mut frequencies = [0.0; NUM_AA];
    for (r, f) in freqs_in.iter().enumerate() {
        frequencies[order[r]] = f / fsum;
    }
    if frequencies.iter().any(|&f| f <= 0.0) {
        return Err(parse_err(fline, "frequencies must be positive".into()));
    }

    let mut transition = [[0.0; NUM_AA]; NUM_AA];
    for (r, (_, vals)) in rows.iter().enumerate() {
        for (c, &v) in vals.iter().enumerate() {
            transition[order[r]][order[c]] = v;
        }
    }
    if lower {
        // Detailed balance: π_a P(a, b) = π_b P(b, a).
        for r in 0..NUM_AA {
            for c in r + 1..NUM_AA {
                let (a, b) = (order[r], order[c]);
                transition[a][b] = frequencies[b] * transition[b][a] / frequencies[a];
            }
        }
    }
    for (a, row) in transition.iter_mut().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            let line = rows[order.iter().position(|&o| o == a).unwrap()].0;
            return Err(parse_err(line, format!("row for '{}' sums to {s}, expected 1", ALPHABET[a] as char)));
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(MutationData { transition, frequencies })
}

/// The embedded Dayhoff PAM1 data.
pub fn dayhoff_pam1() -> &'static MutationData {
    static DATA: OnceLock<MutationData> = OnceLock::new();
    DATA.get_or_init(|| parse_mutation_data(DAYHOFF_PAM1).expect("embedded PAM1 data is valid"))
}

/// Joint amino-acid distribution at PAM distance `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionModel {
    pub k: u32,
    pub joint: Table,
    pub marginal: [f64; NUM_AA],
}

impl SubstitutionModel {
    /// Wraps an arbitrary joint table, normalising it to sum to one.
    pub fn from_joint(k: u32, joint: Table) -> Result<Self> {
        let total: f64 = joint.iter().flatten().sum();
        if !(total > 0.0 && total.is_finite()) || joint.iter().flatten().any(|&v| !(v >= 0.0)) {
            return Err(AlignError::contract("joint table must be nonnegative with positive sum"));
        }
        let mut joint = joint;
        joint.iter_mut().flatten().for_each(|v| *v /= total);
        let mut marginal = [0.0; NUM_AA];
        for (a, row) in joint.iter().enumerate() {
            marginal[a] = row.iter().sum();
        }
        Ok(SubstitutionModel { k, joint, marginal })
    }
}

/// PAM-k model for `1 <= k <= 500`.
pub fn pam_model(k: u32) -> Result<SubstitutionModel> {
    if !(1..=MAX_PAM).contains(&k) {
        return Err(AlignError::contract(format!("PAM distance {k} outside 1..={MAX_PAM}")));
    }
    pam_model_unbounded(k)
}

/// PAM-k model without the range check (for large-k diagnostics).
pub fn pam_model_unbounded(k: u32) -> Result<SubstitutionModel> {
    if k == 0 {
        return Err(AlignError::contract("PAM distance must be positive"));
    }
    let data = dayhoff_pam1();
    let p = Mat20::from_fn(|a, b| data.transition[a][b]);
    let pk = matrix_power(p, k);
    let mut joint = [[0.0; NUM_AA]; NUM_AA];
    for (a, row) in joint.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = data.frequencies[a] * pk[(a, b)];
        }
    }
    SubstitutionModel::from_joint(k, joint)
}

/// `p^k` by repeated squaring, renormalising rows after every product so
/// rounding cannot push the result off the stochastic simplex.
fn matrix_power(p: Mat20, mut k: u32) -> Mat20 {
    fn renorm(mut m: Mat20) -> Mat20 {
        for mut row in m.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        m
    }
    let mut result = Mat20::identity();
    let mut base = p;
    while k > 0 {
        if k & 1 == 1 {
            result = renorm(result * base);
        }
        k >>= 1;
        if k > 0 {
            base = renorm(base * base);
        }
    }
    result
}

/// `10 log10(Θ(a,b) / (Θ(a,·) Θ(·,b)))`.
pub fn log_odds(model: &SubstitutionModel) -> Result<Table> {
    let mut col = [0.0; NUM_AA];
    for row in &model.joint {
        for (b, v) in row.iter().enumerate() {
            col[b] += v;
        }
    }
    if model.marginal.iter().chain(&col).any(|&v| v <= 0.0) {
        return Err(AlignError::contract("log-odds undefined for a zero marginal"));
    }
    let mut out = [[0.0; NUM_AA]; NUM_AA];
    for a in 0..NUM_AA {
        for b in 0..NUM_AA {
            out[a][b] = 10.0 * (model.joint[a][b] / (model.marginal[a] * col[b])).log10();
        }
    }
    Ok(out)
}

/// `v^eta / Σ v^eta`.
pub fn power_normalize(values: &[f64], eta: f64) -> Vec<f64> {
    let powered: Vec<f64> = values.iter().map(|v| v.powf(eta)).collect();
    let total: f64 = powered.iter().sum();
    powered.into_iter().map(|v| v / total).collect()
}

/// Sequence log-probabilities after tempering with exponent `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperedModel {
    pub k: u32,
    pub eta: f64,
    pub match_logprob: Table,
    pub skip_logprob: [f64; NUM_AA],
}

pub fn temper(model: &SubstitutionModel, eta: f64) -> Result<TemperedModel> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(AlignError::contract(format!("tempering exponent {eta} outside [0, 1]")));
    }
    let flat: Vec<f64> = model.joint.iter().flatten().copied().collect();
    let joint = power_normalize(&flat, eta);
    let skip = power_normalize(&model.marginal, eta);
    let mut match_logprob = [[0.0; NUM_AA]; NUM_AA];
    for (idx, p) in joint.iter().enumerate() {
        match_logprob[idx / NUM_AA][idx % NUM_AA] = p.ln();
    }
    let mut skip_logprob = [0.0; NUM_AA];
    for (a, p) in skip.iter().enumerate() {
        skip_logprob[a] = p.ln();
    }
    Ok(TemperedModel { k: model.k, eta, match_logprob, skip_logprob })
}

/// Shannon entropy of the tempered match table, in nats.
pub fn joint_entropy(tempered: &TemperedModel) -> f64 {
    -tempered
        .match_logprob
        .iter()
        .flatten()
        .map(|&lp| if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() * lp })
        .sum::<f64>()
}

/// Evenly spaced grid `lo, lo + step, …` up to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(AlignError::contract(format!("invalid grid {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

/// Tempered models for every `(k, eta)` pair, stored k-major.
#[derive(Debug, Clone)]
pub struct TemperedGrid {
    ks: Vec<u32>,
    etas: Vec<f64>,
    models: Vec<TemperedModel>,
}

impl TemperedGrid {
    pub fn new(ks: &[u32], etas: &[f64]) -> Result<Self> {
        if ks.is_empty() || etas.is_empty() {
            return Err(AlignError::contract("empty PAM or tempering grid"));
        }
        let mut models = Vec::with_capacity(ks.len() * etas.len());
        for &k in ks {
            let base = pam_model(k)?;
            for &eta in etas {
                models.push(temper(&base, eta)?);
            }
        }
        Ok(TemperedGrid { ks: ks.to_vec(), etas: etas.to_vec(), models })
    }

    /// PAM100..=PAM300 in steps of 10 and η in 0, 0.1, …, 1.
    pub fn default_grid() -> Self {
        let ks: Vec<u32> = (100..=300).step_by(10).collect();
        let etas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        TemperedGrid::new(&ks, &etas).expect("default grid is valid")
    }

    pub fn ks(&self) -> &[u32] {
        &self.ks
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn get(&self, k_index: usize, eta_index: usize) -> &TemperedModel {
        &self.models[k_index * self.etas.len() + eta_index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structio::AminoAcid;

    fn idx(c: u8) -> usize {
        AminoAcid::from_letter(c).index().unwrap()
    }

    #[test]
    fn embedded_data_is_stochastic() {
        let d = dayhoff_pam1();
        for row in &d.transition {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((d.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_invariants() {
        for k in [1, 100, 250, 500] {
            let model = pam_model(k).unwrap();
            assert!((model.joint.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-12);
            for a in 0..NUM_AA {
                assert!((model.marginal[a] - model.joint[a].iter().sum::<f64>()).abs() < 1e-12);
                for b in 0..NUM_AA {
                    assert!((model.joint[a][b] - model.joint[b][a]).abs() < 1e-6);
                }
            }
        }
        let pi = dayhoff_pam1().frequencies;
        for k in [100, 250] {
            let model = pam_model(k).unwrap();
            for a in 0..NUM_AA {
                assert!((model.marginal[a] - pi[a]).abs() < 1e-12);
            }
        }
        assert!(pam_model(0).is_err());
        assert!(pam_model(501).is_err());
    }

    #[test]
    fn long_distance_limit_is_independence() {
        let model = pam_model_unbounded(5000).unwrap();
        let pi = dayhoff_pam1().frequencies;
        let dev = (0..NUM_AA)
            .flat_map(|a| (0..NUM_AA).map(move |b| (a, b)))
            .map(|(a, b)| (model.joint[a][b] - pi[a] * pi[b]).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-3, "max deviation {dev}");
    }

    #[test]
    fn pam250_scores_agree_with_published_table() {
        let psi = log_odds(&pam_model(250).unwrap()).unwrap();
        let cases = [(b'R', b'G', -3), (b'T', b'V', 0), (b'L', b'K', -3), (b'P', b'S', 1), (b'Q', b'V', -2), (b'A', b'K', -1), (b'E', b'A', 0), (b'A', b'I', -1)];
        for (a, b, want) in cases {
            let got = psi[idx(a)][idx(b)].round() as i32;
            assert!((got - want).abs() <= 1, "{}{}: {got} vs {want}", a as char, b as char);
        }
    }

    #[test]
    fn log_odds_properties() {
        let psi = log_odds(&pam_model(250).unwrap()).unwrap();
        for a in 0..NUM_AA {
            assert!(psi[a][a] > 0.0);
            for b in 0..NUM_AA {
                assert!((psi[a][b] - psi[b][a]).abs() < 1e-6);
            }
        }
        let pi = dayhoff_pam1().frequencies;
        let mut indep = [[0.0; NUM_AA]; NUM_AA];
        for a in 0..NUM_AA {
            for b in 0..NUM_AA {
                indep[a][b] = pi[a] * pi[b];
            }
        }
        let flat = log_odds(&SubstitutionModel::from_joint(0, indep).unwrap()).unwrap();
        assert!(flat.iter().flatten().all(|v| v.abs() < 1e-9));

        // Doubling one cell without renormalising the joint or marginals.
        let mut model = pam_model(100).unwrap();
        let before = log_odds(&model).unwrap()[3][7];
        let m = model.clone();
        model.joint[3][7] *= 2.0;
        model.marginal = m.marginal;
        let mut bumped = 10.0 * (model.joint[3][7] / (m.marginal[3] * m.joint.iter().map(|r| r[7]).sum::<f64>())).log10();
        bumped -= before;
        assert!((bumped - 10.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn tempering_limits() {
        let model = pam_model(200).unwrap();
        let flat = temper(&model, 0.0).unwrap();
        assert!(flat.match_logprob.iter().flatten().all(|&v| (v.exp() - 1.0 / 400.0).abs() < 1e-15));
        assert!(flat.skip_logprob.iter().all(|&v| (v.exp() - 0.05).abs() < 1e-15));
        assert!((joint_entropy(&flat) - 400f64.ln()).abs() < 1e-12);

        let same = temper(&model, 1.0).unwrap();
        for a in 0..NUM_AA {
            assert!((same.skip_logprob[a].exp() - model.marginal[a]).abs() < 1e-12);
            for b in 0..NUM_AA {
                assert!((same.match_logprob[a][b].exp() - model.joint[a][b]).abs() < 1e-12);
            }
        }
        assert!(temper(&model, 1.5).is_err());
        assert!(temper(&model, -0.1).is_err());
    }

    #[test]
    fn two_letter_power_normalisation() {
        let p = power_normalize(&[0.4, 0.1, 0.1, 0.4], 0.5);
        let (a, b) = (0.4f64.sqrt(), 0.1f64.sqrt());
        let z = 2.0 * (a + b);
        assert!((p[0] - a / z).abs() < 1e-15 && (p[1] - b / z).abs() < 1e-15);
        // sqrt(0.4) = 2 sqrt(0.1), so the diagonal cells get exactly 1/3.
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_has_zero_entropy() {
        let mut joint = [[0.0; NUM_AA]; NUM_AA];
        joint[0][0] = 1.0;
        let t = temper(&SubstitutionModel::from_joint(0, joint).unwrap(), 1.0).unwrap();
        assert_eq!(joint_entropy(&t), 0.0);
    }

    #[test]
    fn entropy_monotonicity_and_equivalence() {
        let grid = TemperedGrid::default_grid();
        let eta_one = grid.etas().len() - 1;
        for ki in 1..grid.ks().len() {
            assert!(joint_entropy(grid.get(ki, eta_one)) >= joint_entropy(grid.get(ki - 1, eta_one)));
        }
        for ki in 0..grid.ks().len() {
            for ei in 1..grid.etas().len() {
                assert!(joint_entropy(grid.get(ki, ei)) < joint_entropy(grid.get(ki, ei - 1)));
            }
        }
        let h100 = joint_entropy(&temper(&pam_model(100).unwrap(), 0.8).unwrap());
        let h200 = joint_entropy(&temper(&pam_model(200).unwrap(), 1.0).unwrap());
        assert!(((h100 - h200) / h200).abs() < 0.1);
    }

    #[test]
    fn parser_accepts_lower_triangle() {
        let d = dayhoff_pam1();
        let letters: Vec<String> = ALPHABET.iter().map(|&c| (c as char).to_string()).collect();
        let mut text = letters.join(" ") + "\n";
        for a in 0..NUM_AA {
            let row: Vec<String> = (0..=a).map(|b| format!("{:e}", d.transition[a][b])).collect();
            text += &(row.join(" ") + "\n");
        }
        let freqs: Vec<String> = d.frequencies.iter().map(|f| format!("{f:e}")).collect();
        text += &freqs.join(" ");
        let parsed = parse_mutation_data(&text).unwrap();
        for a in 0..NUM_AA {
            for b in 0..NUM_AA {
                assert!((parsed.transition[a][b] - d.transition[a][b]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn parser_rejects_malformed_input() {
        assert!(parse_mutation_data("").is_err());
        assert!(matches!(parse_mutation_data("A R N\n"), Err(AlignError::Parse { line: 1, .. })));
        let mut bad = DAYHOFF_PAM1.replacen("1.801876886842052e-03", "x", 1);
        assert!(parse_mutation_data(&bad).is_err());
        bad = DAYHOFF_PAM1.to_string() + "\n0.5\n";
        assert!(parse_mutation_data(&bad).is_err());
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(linear_grid(100.0, 300.0, 10.0).unwrap().len(), 21);
        assert_eq!(linear_grid(0.0, 1.0, 0.1).unwrap().len(), 11);
        assert!(linear_grid(1.0, 0.0, 0.1).is_err());
    }
}
