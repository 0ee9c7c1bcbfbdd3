//! Small dense real linear systems: LU with partial pivoting after row and
//! column equilibration, plus a 1-norm condition number.

use crate::error::{Error, Result};

/// Systems whose 1-norm condition estimate exceeds this are rejected.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Row-major square matrix.
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "row {i} has wrong length");
            m.data[i * dim..(i + 1) * dim].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

struct Lu {
    factors: SquareMatrix,
    pivots: Vec<usize>,
}

impl Lu {
    fn factor(mut a: SquareMatrix) -> Option<Self> {
        let n = a.dim;
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a.get(x, k).abs().total_cmp(&a.get(y, k).abs()))
                .unwrap();
            if a.get(p, k) == 0.0 || !a.get(p, k).is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
            }
            pivots.push(p);
            let pivot = a.get(k, k);
            for i in (k + 1)..n {
                let l = a.get(i, k) / pivot;
                a.set(i, k, l);
                for j in (k + 1)..n {
                    let v = a.get(i, j) - l * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        Some(Self { factors: a, pivots })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = self.factors.dim;
        for (k, &p) in self.pivots.iter().enumerate() {
            rhs.swap(k, p);
        }
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.factors.get(i, j) * rhs[j]).sum();
            rhs[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.factors.get(i, j) * rhs[j]).sum();
            rhs[i] = (rhs[i] - s) / self.factors.get(i, i);
        }
    }
}

/// Solution of `A x = b` together with the condition estimate of the
/// equilibrated system.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub condition: f64,
}

/// Solves `A x = b`.
///
/// Rows and then columns are scaled to unit max-norm before factoring; the
/// reported condition number is `‖Â‖₁ ‖Â⁻¹‖₁` of the scaled matrix, with the
/// inverse formed column by column from the factors.
pub fn solve(a: &SquareMatrix, b: &[f64]) -> Result<Solution> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok(Solution {
            x: Vec::new(),
            condition: 1.0,
        });
    }
    let singular = |condition| Err(Error::SingularSystem { condition });

    let mut scaled = a.clone();
    let mut rhs = b.to_vec();
    for i in 0..n {
        let m = (0..n).map(|j| scaled.get(i, j).abs()).fold(0.0, f64::max);
        if m == 0.0 || !m.is_finite() {
            return singular(f64::INFINITY);
        }
        for j in 0..n {
            scaled.set(i, j, scaled.get(i, j) / m);
        }
        rhs[i] /= m;
    }
    let mut col_scale = vec![1.0; n];
    for (j, cs) in col_scale.iter_mut().enumerate() {
        let m = (0..n).map(|i| scaled.get(i, j).abs()).fold(0.0, f64::max);
        if m == 0.0 {
            return singular(f64::INFINITY);
        }
        for i in 0..n {
            scaled.set(i, j, scaled.get(i, j) / m);
        }
        *cs = m;
    }

    let norm = scaled.norm1();
    let Some(lu) = Lu::factor(scaled) else {
        return singular(f64::INFINITY);
    };
    let mut inv_norm = 0.0_f64;
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        lu.solve(&mut e);
        inv_norm = inv_norm.max(e.iter().map(|v| v.abs()).sum());
    }
    let condition = norm * inv_norm;
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return singular(condition);
    }

    lu.solve(&mut rhs);
    let x = rhs.iter().zip(&col_scale).map(|(y, s)| y / s).collect();
    Ok(Solution { x, condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let sol = solve(&a, &[3.0, 5.0]).unwrap();
        assert!((sol.x[0] - 0.8).abs() < 1e-14);
        assert!((sol.x[1] - 1.4).abs() < 1e-14);
        assert!(sol.condition >= 1.0);
    }

    #[test]
    fn needs_pivoting() {
        let a = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let sol = solve(&a, &[2.0, 3.0]).unwrap();
        assert_eq!(sol.x, vec![3.0, 2.0]);
    }

    #[test]
    fn badly_scaled_but_regular() {
        let a = SquareMatrix::from_rows(&[vec![1e20, 0.0], vec![0.0, 1e-20]]);
        let sol = solve(&a, &[1e20, 1e-20]).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_singular() {
        let a = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(solve(&a, &[1.0, 1.0]), Err(Error::SingularSystem { .. })));
        let a = SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-15]]);
        assert!(matches!(solve(&a, &[1.0, 1.0]), Err(Error::SingularSystem { .. })));
    }
}
