use super::{C64, CMatrix, CVector, LinalgError, ZERO};

/// Pivots smaller than this fraction of the largest matrix entry count as
/// zero.
const PIVOT_RELATIVE_THRESHOLD: f64 = 1e-13;

/// LU factorization with partial pivoting, `P A = L U`, stored in place.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: CMatrix,
    pivots: Vec<usize>,
}

impl LuFactors {
    /// Factors `a`, failing when a pivot falls below the singularity threshold.
    pub fn factor(a: &CMatrix) -> Result<Self, LinalgError> {
        let scale = a.max_abs();
        let threshold = PIVOT_RELATIVE_THRESHOLD * scale.max(f64::MIN_POSITIVE);
        let (lu, pivots, smallest) = decompose(a, None);
        if let Some((pivot_index, magnitude)) = smallest {
            if magnitude <= threshold || scale == 0.0 {
                return Err(LinalgError::SingularMatrix {
                    pivot_index,
                    magnitude,
                });
            }
        }
        Ok(Self { lu, pivots })
    }

    /// Factors `a` while replacing vanishing pivots by `floor`. Used by inverse
    /// iteration, where the shifted matrix is singular on purpose.
    pub(crate) fn factor_regularized(a: &CMatrix, floor: f64) -> Self {
        let (lu, pivots, _) = decompose(a, Some(floor));
        Self { lu, pivots }
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, rhs: &CVector) -> Result<CVector, LinalgError> {
        let n = self.dim();
        if rhs.dim() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                actual: rhs.dim(),
            });
        }
        let mut x: Vec<C64> = self.pivots.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        let x = CVector::from_vec(x);
        if !x.is_finite() {
            return Err(LinalgError::NonFinite { context: "LU solve" });
        }
        Ok(x)
    }

    /// A⁻¹, column by column.
    pub fn inverse(&self) -> Result<CMatrix, LinalgError> {
        let n = self.dim();
        let mut inv = CMatrix::zeros(n);
        for j in 0..n {
            let col = self.solve(&CVector::basis(n, j))?;
            inv.set_column(j, &col);
        }
        Ok(inv)
    }
}

/// Returns the packed factors, the row permutation and the smallest pivot seen.
fn decompose(a: &CMatrix, floor: Option<f64>) -> (CMatrix, Vec<usize>, Option<(usize, f64)>) {
    let n = a.dim();
    let mut lu = a.clone();
    let mut pivots: Vec<usize> = (0..n).collect();
    let mut smallest: Option<(usize, f64)> = None;

    for k in 0..n {
        let (p, mag) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            pivots.swap(k, p);
        }
        if smallest.is_none_or(|(_, m)| mag < m) {
            smallest = Some((k, mag));
        }
        if let Some(floor) = floor {
            if mag < floor {
                lu[(k, k)] = C64::new(floor, 0.0);
            }
        }
        let pivot = lu[(k, k)];
        if pivot == ZERO {
            continue;
        }
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor == ZERO {
                continue;
            }
            for j in k + 1..n {
                let u = lu[(k, j)];
                lu[(i, j)] -= factor * u;
            }
        }
    }
    (lu, pivots, smallest)
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_linear(a: &CMatrix, b: &CVector) -> Result<CVector, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    LuFactors::factor(a)?.solve(b)
}
