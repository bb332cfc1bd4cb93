use super::{LpError, Result};
use crate::linalg::{Matrix, Vector};

/// Column limit for the exhaustive search.
pub const BRUTEFORCE_MAX_COLS: usize = 20;
const FIT_TOL: f64 = 1e-8;

/// Sparsest `x` with `A x = b`, by trying every support of size
/// 0, 1, …, `max_support` in lexicographic order and solving least squares
/// on it. The first support whose residual is within `1e-8` (relative to
/// `max(1, ‖b‖₂)`) wins.
pub fn l0_min_bruteforce(a: &Matrix, b: &Vector, max_support: usize) -> Result<Vector> {
    let (m, n) = a.shape();
    if b.dim() != m {
        return Err(LpError::DimensionMismatch(format!(
            "{m}x{n} matrix with right-hand side of dim {}",
            b.dim()
        )));
    }
    if n > BRUTEFORCE_MAX_COLS {
        return Err(LpError::InvalidParameter(format!(
            "{n} columns exceeds the exhaustive-search limit of {BRUTEFORCE_MAX_COLS}"
        )));
    }
    if max_support > m {
        return Err(LpError::InvalidParameter(format!(
            "max_support {max_support} exceeds row count {m}"
        )));
    }
    let tol = FIT_TOL * b.norm2().max(1.0);
    if b.norm2() <= tol {
        return Ok(Vector::zeros(n));
    }
    let full = a.to_na();
    let rhs = b.to_na();
    for size in 1..=max_support.min(n) {
        let mut support: Vec<usize> = (0..size).collect();
        loop {
            let sub = full.select_columns(&support);
            let svd = sub.clone().svd(true, true);
            if let Ok(coef) = svd.solve(&rhs, 1e-12) {
                let resid = (&sub * &coef - &rhs).norm();
                if resid <= tol {
                    let mut x = vec![0.0; n];
                    for (k, &j) in support.iter().enumerate() {
                        x[j] = coef[k];
                    }
                    return Ok(Vector::from_vec_unchecked(x));
                }
            }
            if !next_combination(&mut support, n) {
                break;
            }
        }
    }
    Err(LpError::NoSparseSolution { max_support })
}

/// Advances to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand_distr::{Distribution, StandardNormal};

    fn residual(a: &Matrix, x: &Vector, b: &Vector) -> f64 {
        crate::linalg::matvec(a, x).unwrap().sub(b).unwrap().norm2()
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn identity_single_support() {
        let b = Vector::new(vec![0.0, 5.0, 0.0]).unwrap();
        let x = l0_min_bruteforce(&Matrix::identity(3), &b, 2).unwrap();
        let expected = Vector::new(vec![0.0, 5.0, 0.0]).unwrap();
        assert!(x.sub(&expected).unwrap().norm_inf() < 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let x = l0_min_bruteforce(&Matrix::identity(3), &Vector::zeros(3), 1).unwrap();
        assert_eq!(x, Vector::zeros(3));
    }

    #[test]
    fn planted_support_recovered() {
        let mut rng = seeds::rng_from_seed(42);
        let a = Matrix::from_fn(3, 5, |_, _| StandardNormal.sample(&mut rng)).unwrap();
        let planted = Vector::new(vec![0.0, 0.0, -1.7, 0.0, 0.0]).unwrap();
        let b = crate::linalg::matvec(&a, &planted).unwrap();
        let x = l0_min_bruteforce(&a, &b, 3).unwrap();
        assert!(x.sub(&planted).unwrap().norm_inf() < 1e-10);
        assert!(residual(&a, &x, &b) < 1e-10);
    }

    #[test]
    fn errors() {
        let a = Matrix::identity(2);
        let b = Vector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            l0_min_bruteforce(&a, &b, 1),
            Err(LpError::NoSparseSolution { max_support: 1 })
        ));
        assert!(l0_min_bruteforce(&a, &b, 3).is_err());
        assert!(l0_min_bruteforce(&Matrix::zeros(2, 21), &b, 1).is_err());
    }
}
