//! Structure and sequence input, and the tabular/graphical output formats.
//!
//! Only C-alpha `ATOM` records of the first model are read. Alternate
//! locations other than blank or `A` are dropped, `HETATM` records are
//! ignored, and no attempt is made to fill chain breaks: the chain is exactly
//! the observed C-alpha list in file order.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::alignment::{AlignmentPath, Step};
use crate::error::{AlignError, Result};
use crate::geometry::Registration;
use crate::Coord;

/// One-letter codes of the 20 standard amino acids, in the order used by
/// every 20-letter table of this crate.
pub const ALPHABET: [u8; 20] = *b"ARNDCQEGHILKMFPSTWYV";

const THREE_LETTER: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AminoAcid {
    /// Index into [`ALPHABET`].
    Standard(u8),
    Unknown,
}

impl AminoAcid {
    pub fn from_three_letter(code: &str) -> Self {
        let code = code.trim().to_ascii_uppercase();
        THREE_LETTER
            .iter()
            .position(|c| *c == code)
            .map_or(AminoAcid::Unknown, |i| AminoAcid::Standard(i as u8))
    }

    pub fn from_letter(letter: u8) -> Self {
        let upper = letter.to_ascii_uppercase();
        ALPHABET
            .iter()
            .position(|&c| c == upper)
            .map_or(AminoAcid::Unknown, |i| AminoAcid::Standard(i as u8))
    }

    #[inline]
    pub fn index(self) -> Option<usize> {
        match self {
            AminoAcid::Standard(i) => Some(i as usize),
            AminoAcid::Unknown => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            AminoAcid::Standard(i) => ALPHABET[i as usize] as char,
            AminoAcid::Unknown => 'X',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueId {
    pub chain: char,
    pub seq: i32,
    pub insertion: Option<char>,
}

impl fmt::Display for ResidueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain, self.seq)?;
        if let Some(c) = self.insertion {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    pub aa: AminoAcid,
    pub coord: Coord,
    pub id: ResidueId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub residues: Vec<Residue>,
    pub label: String,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn coords(&self) -> Vec<Coord> {
        self.residues.iter().map(|r| r.coord).collect()
    }

    pub fn sequence(&self) -> Vec<AminoAcid> {
        self.residues.iter().map(|r| r.aa).collect()
    }

    /// Replaces the residue identities with an externally supplied sequence,
    /// which must index the same residues.
    pub fn with_sequence(mut self, seq: &[AminoAcid]) -> Result<Self> {
        if seq.len() != self.residues.len() {
            return Err(AlignError::contract(format!(
                "sequence length {} does not match {} structure residues in {}",
                seq.len(),
                self.residues.len(),
                self.label
            )));
        }
        for (r, &aa) in self.residues.iter_mut().zip(seq) {
            r.aa = aa;
        }
        Ok(self)
    }
}

fn column(line: &str, start: usize, end: usize) -> &str {
    // PDB columns are 1-based and inclusive.
    let bytes = line.as_bytes();
    if start > bytes.len() {
        return "";
    }
    let end = end.min(bytes.len());
    line.get(start - 1..end).unwrap_or("")
}

fn parse_float(line: &str, lineno: usize, start: usize, end: usize, what: &str) -> Result<f64> {
    let field = column(line, start, end).trim();
    let value: f64 = field.parse().map_err(|_| AlignError::Parse {
        line: lineno,
        message: format!("malformed {what} field '{field}' (columns {start}-{end})"),
    })?;
    if !value.is_finite() {
        return Err(AlignError::Parse { line: lineno, message: format!("non-finite {what}") });
    }
    Ok(value)
}

/// Extracts the C-alpha trace of chain `chain_id` from a PDB-format document.
pub fn parse_pdb_ca(text: &str, chain_id: char) -> Result<Chain> {
    let mut residues = Vec::new();
    let mut seen_model = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let record = column(line, 1, 6);
        if record.starts_with("MODEL") {
            seen_model = true;
            continue;
        }
        if record.starts_with("ENDMDL") {
            if seen_model {
                break;
            }
            continue;
        }
        if record != "ATOM  " && record.trim_end() != "ATOM" {
            continue;
        }
        if column(line, 13, 16).trim() != "CA" {
            continue;
        }
        let chain = column(line, 22, 22).chars().next().unwrap_or(' ');
        if chain != chain_id {
            continue;
        }
        let alt = column(line, 17, 17).chars().next().unwrap_or(' ');
        if alt != ' ' && alt != 'A' {
            continue;
        }
        if line.len() < 54 {
            return Err(AlignError::Parse {
                line: lineno,
                message: "ATOM record shorter than 54 columns".into(),
            });
        }
        let seq_field = column(line, 23, 26).trim();
        let seq: i32 = seq_field.parse().map_err(|_| AlignError::Parse {
            line: lineno,
            message: format!("malformed residue number '{seq_field}'"),
        })?;
        let insertion = column(line, 27, 27).chars().next().filter(|c| *c != ' ');
        let coord = [
            parse_float(line, lineno, 31, 38, "x")?,
            parse_float(line, lineno, 39, 46, "y")?,
            parse_float(line, lineno, 47, 54, "z")?,
        ];
        residues.push(Residue {
            aa: AminoAcid::from_three_letter(column(line, 18, 20)),
            coord,
            id: ResidueId { chain, seq, insertion },
        });
    }
    if residues.is_empty() {
        return Err(AlignError::EmptyChain(chain_id));
    }
    Ok(Chain { residues, label: chain_id.to_string() })
}

/// Parses a single-record FASTA document into amino-acid codes.
/// Letters outside the 20-letter alphabet become [`AminoAcid::Unknown`].
pub fn parse_fasta(text: &str) -> Result<Vec<AminoAcid>> {
    let mut seq = Vec::new();
    let mut headers = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('>') {
            headers += 1;
            if headers > 1 {
                return Err(AlignError::Parse {
                    line: idx + 1,
                    message: "more than one FASTA record".into(),
                });
            }
            continue;
        }
        for b in line.bytes() {
            if b.is_ascii_alphabetic() {
                seq.push(AminoAcid::from_letter(b));
            } else if b != b'*' && !b.is_ascii_whitespace() {
                return Err(AlignError::Parse {
                    line: idx + 1,
                    message: format!("unexpected character '{}' in sequence", b as char),
                });
            }
        }
    }
    if seq.is_empty() {
        return Err(AlignError::Parse { line: 1, message: "empty FASTA sequence".into() });
    }
    Ok(seq)
}

/// Renders a fixed-column PDB document holding one C-alpha per residue.
pub fn format_pdb_ca(chain: &Chain) -> String {
    let mut out = String::new();
    for (i, r) in chain.residues.iter().enumerate() {
        let name = match r.aa.index() {
            Some(k) => THREE_LETTER[k],
            None => "UNK",
        };
        let _ = writeln!(
            out,
            "ATOM  {:>5}  CA  {:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}  1.00  0.00           C",
            i + 1,
            name,
            r.id.chain,
            r.id.seq,
            r.id.insertion.unwrap_or(' '),
            r.coord[0],
            r.coord[1],
            r.coord[2]
        );
    }
    out.push_str("END\n");
    out
}

/// One line per alignment step: step type, x residue or `-`, y residue or
/// `-`, and for matches the inter-residue distance under `reg` (x moved onto
/// y's frame).
pub fn write_alignment_tsv(
    path: &AlignmentPath,
    x: &Chain,
    y: &Chain,
    reg: &Registration,
) -> Result<String> {
    if path.n() != x.len() || path.m() != y.len() {
        return Err(AlignError::contract(format!(
            "path is {}x{} but chains have {} and {} residues",
            path.n(),
            path.m(),
            x.len(),
            y.len()
        )));
    }
    let mut out = String::new();
    let (mut i, mut j) = (0, 0);
    for step in path.steps() {
        match step {
            Step::Match => {
                let xi = reg.apply_point(&x.residues[i].coord);
                let yj = y.residues[j].coord;
                let d = ((xi[0] - yj[0]).powi(2) + (xi[1] - yj[1]).powi(2) + (xi[2] - yj[2]).powi(2))
                    .sqrt();
                let _ = writeln!(out, "MATCH\t{}\t{}\t{:.3}", x.residues[i].id, y.residues[j].id, d);
                i += 1;
                j += 1;
            }
            Step::SkipX => {
                let _ = writeln!(out, "SKIP_X\t{}\t-\t-", x.residues[i].id);
                i += 1;
            }
            Step::SkipY => {
                let _ = writeln!(out, "SKIP_Y\t-\t{}\t-", y.residues[j].id);
                j += 1;
            }
        }
    }
    Ok(out)
}

fn check_unit_interval(matrix: &DMatrix<f64>) -> Result<()> {
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            let v = matrix[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                return Err(AlignError::contract(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
            }
        }
    }
    Ok(())
}

/// CSV with a header of 1-based y indices; each row starts with its 1-based
/// x index. Values use the shortest round-trip decimal representation.
pub fn write_marginal_csv(matrix: &DMatrix<f64>) -> Result<String> {
    check_unit_interval(matrix)?;
    let mut out = String::from("i");
    for j in 0..matrix.ncols() {
        let _ = write!(out, ",{}", j + 1);
    }
    out.push('\n');
    for i in 0..matrix.nrows() {
        let _ = write!(out, "{}", i + 1);
        for j in 0..matrix.ncols() {
            let _ = write!(out, ",{}", matrix[(i, j)]);
        }
        out.push('\n');
    }
    Ok(out)
}

const CELL: usize = 6;
const MARGIN: usize = 40;

/// Grayscale heatmap (0 white, 1 black); x residues run down the rows and y
/// residues across the columns, with tick labels every ten residues.
pub fn write_heatmap_svg(matrix: &DMatrix<f64>) -> Result<String> {
    check_unit_interval(matrix)?;
    let (n, m) = matrix.shape();
    let width = MARGIN + m * CELL + 10;
    let height = MARGIN + n * CELL + 10;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    for i in 0..n {
        for j in 0..m {
            let v = matrix[(i, j)];
            if v == 0.0 {
                continue;
            }
            let level = (255.0 * (1.0 - v)).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({level},{level},{level})"/>"#,
                MARGIN + j * CELL,
                MARGIN + i * CELL
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black" stroke-width="0.5"/>"#,
        m * CELL,
        n * CELL
    );
    let tick = |k: usize| k == 0 || (k + 1) % 10 == 0;
    for j in (0..m).filter(|&j| tick(j)) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="8" text-anchor="middle">{}</text>"#,
            MARGIN + j * CELL + CELL / 2,
            MARGIN - 4,
            j + 1
        );
    }
    for i in (0..n).filter(|&i| tick(i)) {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="8" text-anchor="end">{}</text>"#,
            MARGIN - 4,
            MARGIN + i * CELL + CELL,
            i + 1
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="12" font-size="10" text-anchor="middle">residue of Y</text>"#,
        MARGIN + m * CELL / 2
    );
    let _ = writeln!(
        out,
        r#"<text x="10" y="{}" font-size="10" text-anchor="middle" transform="rotate(-90 10 {})">residue of X</text>"#,
        MARGIN + n * CELL / 2,
        MARGIN + n * CELL / 2
    );
    out.push_str("</svg>\n");
    Ok(out)
}
