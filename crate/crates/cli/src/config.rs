use std::path::PathBuf;

use bsalign::posterior::{ErrorModel, Hyperparams};
use bsalign::sampler::ChainConfig;
use bsalign::submodel::{linear_grid, MAX_PAM};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Coordinates only.
    Structure,
    /// Coordinates plus amino-acid sequences under a PAM model.
    Seqstruct,
}

/// `lo:hi:step`, inclusive of `hi` when it lies on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        linear_grid(self.lo, self.hi, self.step).map_err(|e| CliError::Usage(e.to_string()))
    }
}

pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:step, got '{s}'"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number in grid '{s}'"));
    let spec = GridSpec { lo: num(parts[0])?, hi: num(parts[1])?, step: num(parts[2])? };
    linear_grid(spec.lo, spec.hi, spec.step).map_err(|e| e.to_string())?;
    Ok(spec)
}

pub fn parse_error_model(s: &str) -> Result<ErrorModel, String> {
    if s.eq_ignore_ascii_case("gaussian") {
        return Ok(ErrorModel::Gaussian);
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 && parts[0].eq_ignore_ascii_case("expcauchy") {
        let c: f64 = parts[1].parse().map_err(|_| format!("bad c in '{s}'"))?;
        let d0: f64 = parts[2].parse().map_err(|_| format!("bad d0 in '{s}'"))?;
        if !(c.is_finite() && d0.is_finite() && d0 > 0.0) {
            return Err(format!("expcauchy needs finite c and positive d0, got '{s}'"));
        }
        return Ok(ErrorModel::ExpCauchy { c, d0 });
    }
    Err(format!("expected 'gaussian' or 'expcauchy:c:d0', got '{s}'"))
}

fn parse_chain_id(s: &str) -> Result<char, String> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(format!("chain identifier must be one character, got '{s}'")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    /// PDB file of the first structure.
    #[arg(long)]
    pub pdb_x: PathBuf,
    #[arg(long, default_value = "A", value_parser = parse_chain_id)]
    pub chain_x: char,
    /// PDB file of the second structure.
    #[arg(long)]
    pub pdb_y: PathBuf,
    #[arg(long, default_value = "A", value_parser = parse_chain_id)]
    pub chain_y: char,
    /// Sequence overriding the residue names of the first structure.
    #[arg(long)]
    pub fasta_x: Option<PathBuf>,
    #[arg(long)]
    pub fasta_y: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Structure)]
    pub mode: Mode,
    /// Prior weight on each match.
    #[arg(long, default_value_t = 7.6)]
    pub lambda: f64,
    /// Total sweeps per chain, burn-in included [default: 120000, or 160000 in seqstruct mode].
    #[arg(long)]
    pub iters: Option<usize>,
    /// [default: 20000, or 30000 in seqstruct mode]
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 2)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-residue fit threshold (Å) of the fragment library.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub global_move_prob: f64,
    #[arg(long, value_parser = parse_grid, default_value = "100:300:10")]
    pub pam_grid: GridSpec,
    #[arg(long, value_parser = parse_grid, default_value = "0:1:0.1")]
    pub eta_grid: GridSpec,
    /// Hold the PAM distance at K instead of sampling it.
    #[arg(long, value_name = "K")]
    pub fixed_pam: Option<u32>,
    /// Hold the tempering exponent at E instead of sampling it.
    #[arg(long, value_name = "E")]
    pub fixed_eta: Option<f64>,
    #[arg(long, value_parser = parse_error_model, default_value = "gaussian")]
    pub error_model: ErrorModel,
    /// Forbid a gap in one structure from directly following a gap in the other.
    #[arg(long)]
    pub no_simultaneous_gaps: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct Inputs {
    pub pdb_x: PathBuf,
    pub chain_x: char,
    pub pdb_y: PathBuf,
    pub chain_y: char,
    pub fasta_x: Option<PathBuf>,
    pub fasta_y: Option<PathBuf>,
}

/// Fully defaulted configuration of one `align` run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub mode: Mode,
    pub lambda: f64,
    pub hyperparams: Hyperparams,
    pub chain: ChainConfig,
    pub chains: usize,
    pub delta: f64,
    pub simultaneous_gaps: bool,
    /// Grid values actually used, after any fixed overrides.
    pub pam_grid: Vec<u32>,
    pub eta_grid: Vec<f64>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_args(a: &AlignArgs) -> Result<Self, CliError> {
        let seqstruct = a.mode == Mode::Seqstruct;
        let (iters, burnin) = if seqstruct { (160_000, 30_000) } else { (120_000, 20_000) };
        let pam_grid = match a.fixed_pam {
            Some(k) => vec![k],
            None => pam_values(&a.pam_grid)?,
        };
        if let Some(&bad) = pam_grid.iter().find(|&&k| k == 0 || k > MAX_PAM) {
            return Err(CliError::Usage(format!("PAM distance {bad} outside 1..={MAX_PAM}")));
        }
        let eta_grid = match a.fixed_eta {
            Some(e) => vec![e],
            None => a.eta_grid.values()?,
        };
        if let Some(&bad) = eta_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(CliError::Usage(format!("tempering exponent {bad} outside [0, 1]")));
        }
        if a.chains == 0 {
            return Err(CliError::Usage("--chains must be at least 1".into()));
        }
        if !(a.delta > 0.0 && a.delta.is_finite()) {
            return Err(CliError::Usage("--delta must be positive".into()));
        }
        let chain = ChainConfig {
            iterations: a.iters.unwrap_or(iters),
            burn_in: a.burnin.unwrap_or(burnin),
            thin: a.thin,
            seed: a.seed,
            lambda: a.lambda,
            global_move_prob: a.global_move_prob,
            ..ChainConfig::default()
        };
        chain.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let hyperparams = Hyperparams { error_model: a.error_model, ..Hyperparams::default() };
        Ok(RunConfig {
            inputs: Inputs {
                pdb_x: a.pdb_x.clone(),
                chain_x: a.chain_x,
                pdb_y: a.pdb_y.clone(),
                chain_y: a.chain_y,
                fasta_x: a.fasta_x.clone(),
                fasta_y: a.fasta_y.clone(),
            },
            mode: a.mode,
            lambda: a.lambda,
            hyperparams,
            chain,
            chains: a.chains,
            delta: a.delta,
            simultaneous_gaps: !a.no_simultaneous_gaps,
            pam_grid,
            eta_grid,
            out: a.out.clone(),
        })
    }
}

/// PAM grid values, which must be whole numbers.
pub fn pam_values(spec: &GridSpec) -> Result<Vec<u32>, CliError> {
    spec.values()?
        .into_iter()
        .map(|k| {
            let r = k.round();
            if (k - r).abs() > 1e-6 || r < 1.0 {
                Err(CliError::Usage(format!("PAM grid value {k} is not a positive integer")))
            } else {
                Ok(r as u32)
            }
        })
        .collect()
}
