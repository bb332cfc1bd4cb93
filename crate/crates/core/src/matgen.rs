//! Generation and storage of the shared key `(Q, A)`.
//!
//! In the orthogonal regime `(Q | Aᵀ)` is the eigenvector basis of `MᵀM`
//! for a random square `M`, so `AQ = 0` up to rounding. In the impossible
//! regime `Q` is Gaussian with fewer spare dimensions than `A` has rows,
//! and each row of `A` is the solution of an LP that keeps it orthogonal
//! to the columns of `Q` while pushing it to a random vertex of the box.

use std::fmt::Write as _;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, DEFAULT_RANK_TOL};
use crate::lp::{self, LpError, LpStatus, SolverOptions};
use crate::seeds::{self, tag};

pub const KEY_MAGIC: [u8; 4] = *b"SLKY";
pub const KEY_FORMAT_VERSION: u32 = 1;
/// Bumped whenever a generator would produce different keys for the same seed.
pub const GENERATOR_VERSION: u32 = 1;

pub const ORTHOGONAL_TOL: f64 = 1e-9;
pub const IMPOSSIBLE_TOL: f64 = 1e-8;
const MAX_ATTEMPTS: u64 = 3;
const ZERO_ROW: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatgenError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate sample after {attempts} attempts: {reason}")]
    DegenerateSample { attempts: u64, reason: String },
    #[error("row {row}: LP ended with status {status}")]
    LpFailed { row: usize, status: LpStatus },
    #[error("corrupt key file: {0}")]
    CorruptKey(String),
    #[error("key invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MatgenError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Orthogonal,
    Impossible,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Orthogonal => "orthogonal",
            Regime::Impossible => "impossible",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = MatgenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(Regime::Orthogonal),
            "impossible" => Ok(Regime::Impossible),
            other => Err(MatgenError::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Encoder `Q` (`n×d`) and decoder `A` (rows of length `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct CodeKey {
    q: Matrix,
    a: Matrix,
    regime: Regime,
    ortho_residual: f64,
    seed: u64,
    rank_warning: bool,
    zero_rows: Vec<usize>,
    generator_version: u32,
}

impl CodeKey {
    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Number of message bits `d`.
    pub fn message_bits(&self) -> usize {
        self.q.cols()
    }

    /// Length `n` of a codeword.
    pub fn code_length(&self) -> usize {
        self.q.rows()
    }

    /// Rows of the decoder.
    pub fn decoder_rows(&self) -> usize {
        self.a.rows()
    }

    /// `max |AQ|`.
    pub fn ortho_residual(&self) -> f64 {
        self.ortho_residual
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Set when `A` has numerical rank below its row count.
    pub fn rank_warning(&self) -> bool {
        self.rank_warning
    }

    /// Rows of `A` that stayed zero after a re-solve.
    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }

    pub fn generator_version(&self) -> u32 {
        self.generator_version
    }

    /// Re-checks the shape and orthogonality contracts of the regime.
    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.q.shape();
        if self.a.cols() != n {
            return Err(MatgenError::InvariantViolation(format!(
                "A has {} columns but Q has {n} rows",
                self.a.cols()
            )));
        }
        let residual = self.a.matmul(&self.q)?.max_abs();
        match self.regime {
            Regime::Orthogonal => {
                if self.a.rows() + d != n {
                    return Err(MatgenError::InvariantViolation(format!(
                        "{} + {d} rows do not add up to n = {n}",
                        self.a.rows()
                    )));
                }
                check(residual, ORTHOGONAL_TOL, "max|AQ|")?;
                let qtq = self.q.transpose().matmul(&self.q)?;
                check(qtq.max_abs_deviation_from_identity(), ORTHOGONAL_TOL, "max|QᵀQ - I|")?;
                let aat = self.a.matmul(&self.a.transpose())?;
                check(aat.max_abs_deviation_from_identity(), ORTHOGONAL_TOL, "max|AAᵀ - I|")?;
            }
            Regime::Impossible => {
                check(residual, IMPOSSIBLE_TOL, "max|AQ|")?;
                let rank = linalg::numerical_rank(&self.q, DEFAULT_RANK_TOL);
                if rank < d {
                    return Err(MatgenError::InvariantViolation(format!(
                        "Q has rank {rank} < {d} columns"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check(value: f64, tol: f64, what: &str) -> Result<()> {
    if value <= tol {
        Ok(())
    } else {
        Err(MatgenError::InvariantViolation(format!("{what} = {value:e} exceeds {tol:e}")))
    }
}

/// `n = round(R·d)`, `Q` the first `d` eigenvectors of `MᵀM`, `A` the rest.
pub fn generate_orthogonal_key(d: usize, redundancy: f64, seed: u64) -> Result<CodeKey> {
    if d < 8 {
        return Err(MatgenError::InvalidParameter(format!("d must be at least 8, got {d}")));
    }
    if !(redundancy > 1.0 && redundancy.is_finite()) {
        return Err(MatgenError::InvalidParameter(format!(
            "redundancy must exceed 1, got {redundancy}"
        )));
    }
    let n = (redundancy * d as f64).round() as usize;
    if n <= d {
        return Err(MatgenError::InvalidParameter(format!(
            "redundancy {redundancy} leaves no decoder rows at d = {d}"
        )));
    }
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seeds::derived_rng(seed, &[tag::KEY, attempt]);
        let m = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0))?;
        let gram = m.transpose().matmul(&m)?;
        let gram = Matrix::from_fn(n, n, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]))?;
        let (vals, vecs) = match linalg::sym_eigendecomposition(&gram) {
            Ok(r) => r,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        // singular values of M are the square roots of these eigenvalues
        let top = vals[n - 1].max(0.0).sqrt();
        let rank = vals.iter().filter(|l| l.max(0.0).sqrt() > DEFAULT_RANK_TOL * top).count();
        if rank < n {
            last = format!("M has rank {rank} < {n}");
            continue;
        }
        let q = vecs.select_columns(&(0..d).collect::<Vec<_>>())?;
        let a = vecs.select_columns(&(d..n).collect::<Vec<_>>())?.transpose();
        let ortho_residual = a.matmul(&q)?.max_abs();
        let key = CodeKey {
            q,
            a,
            regime: Regime::Orthogonal,
            ortho_residual,
            seed,
            rank_warning: false,
            zero_rows: Vec::new(),
            generator_version: GENERATOR_VERSION,
        };
        match key.validate() {
            Ok(()) => return Ok(key),
            Err(e) => last = e.to_string(),
        }
    }
    Err(MatgenError::DegenerateSample {
        attempts: MAX_ATTEMPTS,
        reason: last,
    })
}

/// `n = round((1+Δ′)·m)`, Gaussian `Q` (`n×m`), and `m` rows of `A` from
/// independent near-orthogonality LPs with constraints `Qᵀa = 0`.
pub fn generate_impossible_key(m: usize, delta_prime: f64, seed: u64) -> Result<CodeKey> {
    generate_impossible_key_with(m, delta_prime, seed, &SolverOptions::default())
}

pub fn generate_impossible_key_with(m: usize, delta_prime: f64, seed: u64, solver: &SolverOptions) -> Result<CodeKey> {
    if m < 8 || m % 8 != 0 {
        return Err(MatgenError::InvalidParameter(format!(
            "m must be a positive multiple of 8, got {m}"
        )));
    }
    if !(delta_prime > 0.0 && delta_prime.is_finite()) {
        return Err(MatgenError::InvalidParameter(format!(
            "delta' must be positive, got {delta_prime}"
        )));
    }
    let n = ((1.0 + delta_prime) * m as f64).round() as usize;
    if n <= m {
        return Err(MatgenError::InvalidParameter(format!(
            "delta' = {delta_prime} gives n = {n}, not larger than m = {m}"
        )));
    }

    let q = sample_full_rank_gaussian(n, m, seed)?;
    let qt = q.transpose();

    let rows: Vec<(Vec<f64>, bool)> = (0..m)
        .into_par_iter()
        .map(|row| solve_row(&qt, seed, row, solver))
        .collect::<Result<_>>()?;

    let zero_rows = rows.iter().enumerate().filter(|(_, r)| r.1).map(|(i, _)| i).collect();
    let a = Matrix::new(m, n, rows.into_iter().flat_map(|r| r.0).collect())?;
    let ortho_residual = a.matmul(&q)?.max_abs();
    check(ortho_residual, IMPOSSIBLE_TOL, "max|AQ|")?;
    let rank_warning = linalg::numerical_rank(&a, DEFAULT_RANK_TOL) < m;
    Ok(CodeKey {
        q,
        a,
        regime: Regime::Impossible,
        ortho_residual,
        seed,
        rank_warning,
        zero_rows,
        generator_version: GENERATOR_VERSION,
    })
}

fn sample_full_rank_gaussian(n: usize, m: usize, seed: u64) -> Result<Matrix> {
    let mut rank = 0;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seeds::derived_rng(seed, &[tag::KEY, attempt]);
        let q = Matrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng))?;
        rank = linalg::numerical_rank(&q, DEFAULT_RANK_TOL);
        if rank == m {
            return Ok(q);
        }
    }
    Err(MatgenError::DegenerateSample {
        attempts: MAX_ATTEMPTS,
        reason: format!("Q has rank {rank} < {m}"),
    })
}

/// One row of `A`; the flag is set when it came out zero twice.
fn solve_row(qt: &Matrix, seed: u64, row: usize, solver: &SolverOptions) -> Result<(Vec<f64>, bool)> {
    let row_tag = row as u64;
    for cost_seed in [
        seeds::derive_seed(seed, &[tag::ROW_LP, row_tag]),
        seeds::derive_seed(seed, &[tag::ROW_LP, row_tag, tag::RESAMPLE]),
    ] {
        let lp = lp::build_near_orthogonality_lp(qt, cost_seed)?;
        let sol = lp::solve_lp(&lp, solver)?;
        if !sol.is_optimal() {
            return Err(MatgenError::LpFailed { row, status: sol.status });
        }
        if sol.x.norm_inf() > ZERO_ROW {
            return Ok((sol.x.into_inner(), false));
        }
    }
    Ok((vec![0.0; qt.cols()], true))
}

fn header_text(key: &CodeKey) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "regime={}", key.regime);
    let _ = writeln!(h, "d={}", key.message_bits());
    let _ = writeln!(h, "n={}", key.code_length());
    let _ = writeln!(h, "decoder_rows={}", key.decoder_rows());
    let _ = writeln!(h, "seed={}", key.seed);
    let _ = writeln!(h, "ortho_residual={:e}", key.ortho_residual);
    let _ = writeln!(h, "rank_warning={}", key.rank_warning);
    let zero: Vec<String> = key.zero_rows.iter().map(|r| r.to_string()).collect();
    let _ = writeln!(h, "zero_rows={}", zero.join(","));
    let _ = writeln!(h, "generator_version={}", key.generator_version);
    h
}

pub fn write_key<W: Write>(mut w: W, key: &CodeKey) -> Result<()> {
    let header = header_text(key);
    let mut buf = Vec::new();
    buf.extend_from_slice(&KEY_MAGIC);
    buf.extend_from_slice(&KEY_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(header.as_bytes());
    linalg::write_slmx(&mut buf, &key.q)?;
    linalg::write_slmx(&mut buf, &key.a)?;
    let digest = Sha256::digest(&buf);
    w.write_all(&buf)?;
    w.write_all(&digest)?;
    Ok(())
}

/// Parses and checksums a key, then re-validates its invariants.
pub fn read_key<R: Read>(mut r: R) -> Result<CodeKey> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let corrupt = |msg: &str| MatgenError::CorruptKey(msg.to_string());
    if bytes.len() < 12 + 32 {
        return Err(corrupt("file too short"));
    }
    if bytes[..4] != KEY_MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let (payload, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let version = u32::from_le_bytes(payload[4..8].try_into().unwrap());
    if version != KEY_FORMAT_VERSION {
        return Err(MatgenError::CorruptKey(format!("unsupported format version {version}")));
    }
    let header_len = u32::from_le_bytes(payload[8..12].try_into().unwrap()) as usize;
    let header = payload
        .get(12..12 + header_len)
        .and_then(|h| std::str::from_utf8(h).ok())
        .ok_or_else(|| corrupt("unreadable header"))?;
    let mut cursor = Cursor::new(&payload[12 + header_len..]);
    let q = linalg::read_slmx(&mut cursor).map_err(|e| MatgenError::CorruptKey(format!("Q block: {e}")))?;
    let a = linalg::read_slmx(&mut cursor).map_err(|e| MatgenError::CorruptKey(format!("A block: {e}")))?;
    if cursor.position() as usize != payload.len() - 12 - header_len {
        return Err(corrupt("trailing bytes after matrix blocks"));
    }

    let mut regime = None;
    let mut seed = None;
    let mut rank_warning = false;
    let mut zero_rows = Vec::new();
    let mut generator_version = None;
    for line in header.lines() {
        let Some((k, v)) = line.split_once('=') else {
            return Err(MatgenError::CorruptKey(format!("bad header line {line:?}")));
        };
        let bad = || MatgenError::CorruptKey(format!("bad header value {line:?}"));
        match k {
            "regime" => regime = Some(v.parse::<Regime>().map_err(|_| bad())?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
            "rank_warning" => rank_warning = v.parse::<bool>().map_err(|_| bad())?,
            "zero_rows" if !v.is_empty() => {
                zero_rows = v
                    .split(',')
                    .map(|s| s.parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }
            "generator_version" => generator_version = Some(v.parse::<u32>().map_err(|_| bad())?),
            _ => {}
        }
    }
    let ortho_residual = a.matmul(&q).map_err(|e| MatgenError::InvariantViolation(e.to_string()))?.max_abs();
    let key = CodeKey {
        q,
        a,
        regime: regime.ok_or_else(|| corrupt("header lacks regime"))?,
        ortho_residual,
        seed: seed.ok_or_else(|| corrupt("header lacks seed"))?,
        rank_warning,
        zero_rows,
        generator_version: generator_version.ok_or_else(|| corrupt("header lacks generator_version"))?,
    };
    key.validate()?;
    Ok(key)
}

pub fn save_key(path: impl AsRef<Path>, key: &CodeKey) -> Result<()> {
    let mut buf = Vec::new();
    write_key(&mut buf, key)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_key(path: impl AsRef<Path>) -> Result<CodeKey> {
    read_key(std::fs::File::open(path)?)
}
