use rand::Rng as _;

use super::{LinearProgram, LpError, LpSolution, Result};
use crate::linalg::{Matrix, Vector};
use crate::seeds;

/// ℓ1 minimization `min ‖x‖₁ s.t. A x = b` as a linear program.
///
/// The program has `2n` nonnegative variables `(p, q)` with `x = p − q`
/// and `s = p + q`; at any optimum `s = |x|` componentwise, so it is
/// equivalent to the `(x, s)` form with `−s <= x <= s`.
#[derive(Debug, Clone)]
pub struct BasisPursuit {
    lp: LinearProgram,
    n: usize,
}

impl BasisPursuit {
    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn into_lp(self) -> LinearProgram {
        self.lp
    }

    pub fn signal_dim(&self) -> usize {
        self.n
    }

    /// The `x` part of a solution.
    pub fn signal(&self, sol: &LpSolution) -> Vector {
        Vector::from_vec_unchecked((0..self.n).map(|j| sol.x[j] - sol.x[self.n + j]).collect())
    }

    /// The `s` part of a solution.
    pub fn magnitudes(&self, sol: &LpSolution) -> Vector {
        Vector::from_vec_unchecked((0..self.n).map(|j| sol.x[j] + sol.x[self.n + j]).collect())
    }
}

pub fn build_basis_pursuit(a: &Matrix, b: &Vector) -> Result<BasisPursuit> {
    if a.rows() != b.dim() {
        return Err(LpError::DimensionMismatch(format!(
            "{}x{} matrix with right-hand side of dim {}",
            a.rows(),
            a.cols(),
            b.dim()
        )));
    }
    let (m, n) = a.shape();
    let mut data = Vec::with_capacity(m * 2 * n);
    for i in 0..m {
        let row = a.row(i);
        data.extend_from_slice(row);
        data.extend(row.iter().map(|v| -v));
    }
    let eq_lhs = Matrix::new(m, 2 * n, data)?;
    let lp = LinearProgram::new(
        Vector::from_vec_unchecked(vec![1.0; 2 * n]),
        eq_lhs,
        b.clone(),
        vec![0.0; 2 * n],
        vec![f64::INFINITY; 2 * n],
    )?;
    Ok(BasisPursuit { lp, n })
}

/// `max Σ c_j q_j  s.t.  A q = 0,  q ∈ [−1, 1]ⁿ` with `c_j ~ Uniform(−1, 1)`
/// drawn from `rng_seed`. Returned in minimization form (objective `−c`).
pub fn build_near_orthogonality_lp(a: &Matrix, rng_seed: u64) -> Result<LinearProgram> {
    let (m, n) = a.shape();
    if m >= n {
        return Err(LpError::DimensionMismatch(format!(
            "need fewer rows than columns, got {m}x{n}"
        )));
    }
    let mut rng = seeds::rng_from_seed(rng_seed);
    let costs: Vec<f64> = (0..n).map(|_| -rng.gen_range(-1.0..1.0)).collect();
    LinearProgram::new(
        Vector::from_vec_unchecked(costs),
        a.clone(),
        Vector::zeros(m),
        vec![-1.0; n],
        vec![1.0; n],
    )
}
