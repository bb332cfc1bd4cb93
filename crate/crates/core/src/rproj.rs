//! Sparse sub-Gaussian random projectors and their use on LP data.
//!
//! Entries are `+s` or `-s` with probability `α/2` each and `0` otherwise,
//! with `s = 1/√(kα)` so that every entry has variance `1/k` and
//! `E‖Tx‖² = ‖x‖²`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix, Vector};
use crate::seeds;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no pair of distinct points to measure")]
    NoDistinctPairs,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ProjectionError>;

/// Defaults used throughout the experiments.
pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 0.02;
pub const DEFAULT_JLL_CONSTANT: f64 = 1.0;

/// Target distortion, density and dimension constant for a projector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JllParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub jll_constant: f64,
}

impl Default for JllParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            alpha: DEFAULT_ALPHA,
            jll_constant: DEFAULT_JLL_CONSTANT,
        }
    }
}

/// `⌈(C/ε²)·ln(num_points)⌉`.
pub fn jll_dimension(num_points: usize, epsilon: f64, jll_constant: f64) -> Result<usize> {
    if num_points < 2 {
        return Err(ProjectionError::InvalidParameter(format!(
            "need at least 2 points, got {num_points}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ProjectionError::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(jll_constant > 0.0 && jll_constant.is_finite()) {
        return Err(ProjectionError::InvalidParameter(format!(
            "constant must be positive, got {jll_constant}"
        )));
    }
    let k = (jll_constant / (epsilon * epsilon) * (num_points as f64).ln()).ceil();
    Ok(k as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorMeta {
    pub k: usize,
    pub epsilon: Option<f64>,
    pub alpha: f64,
    pub jll_constant: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Projector {
    t: Matrix,
    alpha: f64,
    epsilon: Option<f64>,
    jll_constant: Option<f64>,
    seed: u64,
}

impl Projector {
    pub fn matrix(&self) -> &Matrix {
        &self.t
    }

    /// Output dimension `k`.
    pub fn k(&self) -> usize {
        self.t.rows()
    }

    /// Input dimension.
    pub fn input_dim(&self) -> usize {
        self.t.cols()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn jll_constant(&self) -> Option<f64> {
        self.jll_constant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Magnitude of the nonzero entries, `1/√(kα)`.
    pub fn entry_scale(&self) -> f64 {
        1.0 / (self.k() as f64 * self.alpha).sqrt()
    }

    pub fn meta(&self) -> ProjectorMeta {
        ProjectorMeta {
            k: self.k(),
            epsilon: self.epsilon,
            alpha: self.alpha,
            jll_constant: self.jll_constant,
            seed: self.seed,
        }
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.dim() != self.input_dim() {
            return Err(ProjectionError::DimensionMismatch(format!(
                "projector takes dim {}, got {}",
                self.input_dim(),
                x.dim()
            )));
        }
        Ok(linalg::matvec(&self.t, x)?)
    }

    /// Writes the matrix as SLMX to `path` and the parameters to
    /// `path` + `.meta` as `key=value` lines.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        linalg::save_matrix(path, &self.t)?;
        let mut meta = String::new();
        let _ = writeln!(meta, "k={}", self.k());
        let _ = writeln!(meta, "alpha={}", self.alpha);
        if let Some(e) = self.epsilon {
            let _ = writeln!(meta, "epsilon={e}");
        }
        if let Some(c) = self.jll_constant {
            let _ = writeln!(meta, "jll_constant={c}");
        }
        let _ = writeln!(meta, "seed={}", self.seed);
        std::fs::write(sidecar_path(path), meta)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let t = linalg::load_matrix(path)?;
        let text = std::fs::read_to_string(sidecar_path(path))?;
        let mut alpha = None;
        let mut epsilon = None;
        let mut jll_constant = None;
        let mut seed = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ProjectionError::InvalidParameter(format!("bad metadata line {line:?}")))?;
            let bad = || ProjectionError::InvalidParameter(format!("bad value for {key}: {value:?}"));
            match key.trim() {
                "alpha" => alpha = Some(value.trim().parse::<f64>().map_err(|_| bad())?),
                "epsilon" => epsilon = Some(value.trim().parse::<f64>().map_err(|_| bad())?),
                "jll_constant" => jll_constant = Some(value.trim().parse::<f64>().map_err(|_| bad())?),
                "seed" => seed = Some(value.trim().parse::<u64>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let alpha = alpha.ok_or_else(|| ProjectionError::InvalidParameter("metadata lacks alpha".into()))?;
        Ok(Self {
            t,
            alpha,
            epsilon,
            jll_constant,
            seed: seed.unwrap_or(0),
        })
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    s.into()
}

/// Samples a `k×m` projector with density `alpha`.
pub fn sample_projector(k: usize, m: usize, alpha: f64, seed: u64) -> Result<Projector> {
    if k == 0 || m == 0 {
        return Err(ProjectionError::InvalidParameter(format!(
            "projector shape must be positive, got {k}x{m}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ProjectionError::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let s = 1.0 / (k as f64 * alpha).sqrt();
    let half = alpha / 2.0;
    let mut rng = seeds::rng_from_seed(seed);
    let t = Matrix::from_fn(k, m, |_, _| {
        let u: f64 = rng.gen();
        if u < half {
            s
        } else if u < alpha {
            -s
        } else {
            0.0
        }
    })?;
    Ok(Projector {
        t,
        alpha,
        epsilon: None,
        jll_constant: None,
        seed,
    })
}

/// Samples a projector for `num_points` points in `R^m`, with `k` from
/// [`jll_dimension`] capped at `m` (a projection never grows the data).
pub fn sample_for_points(num_points: usize, m: usize, params: &JllParams, seed: u64) -> Result<Projector> {
    let k = jll_dimension(num_points, params.epsilon, params.jll_constant)?.min(m);
    let mut p = sample_projector(k, m, params.alpha, seed)?;
    p.epsilon = Some(params.epsilon);
    p.jll_constant = Some(params.jll_constant);
    Ok(p)
}

/// `(T A, T b)`.
pub fn project_lp_data(t: &Projector, a: &Matrix, b: &Vector) -> Result<(Matrix, Vector)> {
    if a.rows() != t.input_dim() || b.dim() != t.input_dim() {
        return Err(ProjectionError::DimensionMismatch(format!(
            "projector takes dim {}, got {}x{} matrix and rhs of dim {}",
            t.input_dim(),
            a.rows(),
            a.cols(),
            b.dim()
        )));
    }
    Ok((t.t.matmul(a)?, linalg::matvec(&t.t, b)?))
}

/// Ratios `‖Tx − Ty‖ / ‖x − y‖` over distinct pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionStats {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Fraction of pairs with ratio in `[1 − ε, 1 + ε]`.
    pub in_band_fraction: f64,
}

pub fn distortion_report(t: &Projector, points: &[Vector], epsilon: f64) -> Result<DistortionStats> {
    if let Some(p) = points.iter().find(|p| p.dim() != t.input_dim()) {
        return Err(ProjectionError::DimensionMismatch(format!(
            "projector takes dim {}, got a point of dim {}",
            t.input_dim(),
            p.dim()
        )));
    }
    let projected: Vec<Vector> = points.iter().map(|p| t.apply(p)).collect::<Result<_>>()?;
    let (mut min, mut max, mut sum, mut inside, mut pairs) = (f64::INFINITY, 0.0f64, 0.0, 0usize, 0usize);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let orig = points[i].sub(&points[j])?.norm2();
            if orig == 0.0 {
                continue;
            }
            let ratio = projected[i].sub(&projected[j])?.norm2() / orig;
            min = min.min(ratio);
            max = max.max(ratio);
            sum += ratio;
            if (1.0 - epsilon..=1.0 + epsilon).contains(&ratio) {
                inside += 1;
            }
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(ProjectionError::NoDistinctPairs);
    }
    Ok(DistortionStats {
        pairs,
        min_ratio: min,
        max_ratio: max,
        mean_ratio: sum / pairs as f64,
        in_band_fraction: inside as f64 / pairs as f64,
    })
}

/// Fraction of column pairs `i < j` of `T` with `|⟨Teᵢ, Teⱼ⟩| ≤ ε`.
pub fn near_orthogonality_fraction(t: &Projector, epsilon: f64) -> Result<f64> {
    let n = t.input_dim();
    if n < 2 {
        return Err(ProjectionError::NoDistinctPairs);
    }
    let gram = t.t.transpose().matmul(&t.t)?;
    let mut inside = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if gram[(i, j)].abs() <= epsilon {
                inside += 1;
            }
        }
    }
    Ok(inside as f64 / (n * (n - 1) / 2) as f64)
}
