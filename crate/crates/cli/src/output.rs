use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use bsalign::summaries::SampleSet;
use nalgebra::DMatrix;

use crate::CliError;

/// Writes `contents` to `dir/name` via a sibling temporary file and a rename,
/// so readers never observe a partially written artifact.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let io = |e: std::io::Error| CliError::Run(format!("cannot write {}: {e}", target.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, &target).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// One row per retained record of every chain.
pub fn traces_csv(chains: &[SampleSet]) -> String {
    let seq = chains.first().and_then(|c| c.records.first()).is_some_and(|r| r.k_index.is_some());
    let mut out =
        String::from("chain,record,num_matches,sigma2,open,ext,rmsd,roll,pitch,yaw,tx,ty,tz,log_posterior");
    if seq {
        out.push_str(",k,eta");
    }
    out.push('\n');
    for (c, set) in chains.iter().enumerate() {
        for (i, r) in set.records.iter().enumerate() {
            let [roll, pitch, yaw] = r.angles;
            let [tx, ty, tz] = r.translation;
            let _ = write!(
                out,
                "{c},{i},{},{},{},{},{},{roll},{pitch},{yaw},{tx},{ty},{tz},{}",
                r.num_matches, r.sigma2, r.open, r.ext, r.rmsd, r.log_posterior
            );
            if let (Some(k), Some(e)) = (r.k_index, r.eta_index) {
                let _ = write!(out, ",{},{}", set.ks[k], set.etas[e]);
            }
            out.push('\n');
        }
    }
    out
}

/// Two-column `label,probability` table.
pub fn distribution_csv<T: std::fmt::Display>(header: &str, values: &[(T, f64)]) -> String {
    let mut out = format!("{header},probability\n");
    for (v, p) in values {
        let _ = writeln!(out, "{v},{p}");
    }
    out
}

/// Table with one row per k and one column per η.
pub fn k_eta_csv(ks: &[u32], etas: &[f64], table: &DMatrix<f64>) -> String {
    let mut out = String::from("k");
    for e in etas {
        let _ = write!(out, ",{e}");
    }
    out.push('\n');
    for (r, k) in ks.iter().enumerate() {
        let _ = write!(out, "{k}");
        for c in 0..etas.len() {
            let _ = write!(out, ",{}", table[(r, c)]);
        }
        out.push('\n');
    }
    out
}
