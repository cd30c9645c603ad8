use std::cmp::Ordering;

use super::lu::LuFactors;
use super::{C64, CMatrix, CVector, LinalgError, ONE, ZERO};

/// Thresholds for the eigensolver and biorthonormalization.
#[derive(Debug, Clone, Copy)]
pub struct EigenTolerances {
    /// Minimum pairwise eigenvalue gap, relative to ‖H‖_F.
    pub degeneracy: f64,
    /// Minimum |⟨φ*|φ⟩| for unit-normalized left and right vectors.
    pub defective_overlap: f64,
    /// QR sweeps allowed per eigenvalue before giving up.
    pub max_sweeps_per_eigenvalue: usize,
}

impl Default for EigenTolerances {
    fn default() -> Self {
        Self {
            degeneracy: 1e-8,
            defective_overlap: 1e-8,
            max_sweeps_per_eigenvalue: 60,
        }
    }
}

/// Biorthogonal eigensystem of a diagonalizable matrix.
///
/// `right[b]` solves `H φ_b = λ_b φ_b`, `left[b]` solves `H† φ*_b = conj(λ_b) φ*_b`.
/// After [`biorthonormalize`] the pairs satisfy ⟨φ*_a|φ_b⟩ = δ_ab with unit
/// right vectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<C64>,
    pub right: Vec<CVector>,
    pub left: Vec<CVector>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest ‖Hφ_b − λ_bφ_b‖/‖φ_b‖ and ‖H†φ*_b − conj(λ_b)φ*_b‖/‖φ*_b‖.
    pub fn residuals(&self, h: &CMatrix) -> (f64, f64) {
        let hd = h.adjoint();
        let mut right: f64 = 0.0;
        let mut left: f64 = 0.0;
        for b in 0..self.dim() {
            let lam = self.eigenvalues[b];
            let r = &h.mul_vec(&self.right[b]) - &self.right[b].scale(lam);
            right = right.max(r.norm() / self.right[b].norm());
            let l = &hd.mul_vec(&self.left[b]) - &self.left[b].scale(lam.conj());
            left = left.max(l.norm() / self.left[b].norm());
        }
        (right, left)
    }

    /// max_ab |⟨φ*_a|φ_b⟩ − δ_ab|
    pub fn biorthogonality_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { ONE } else { ZERO };
                worst = worst.max((self.left[a].inner(&self.right[b]) - target).norm());
            }
        }
        worst
    }

    /// |φ_b⟩⟨φ*_b|
    pub fn spectral_projector(&self, b: usize) -> CMatrix {
        CMatrix::outer(&self.right[b], &self.left[b])
    }

    pub fn min_gap(&self) -> f64 {
        min_pairwise_gap(&self.eigenvalues).map_or(f64::INFINITY, |(_, _, g)| g)
    }
}

/// Eigenvalues of `h` in canonical order, without eigenvectors or a
/// degeneracy check.
pub fn eigenvalues(h: &CMatrix) -> Result<Vec<C64>, LinalgError> {
    if !h.is_finite() {
        return Err(LinalgError::NonFinite { context: "eigenvalue input" });
    }
    let mut ev = hessenberg_qr(h, EigenTolerances::default().max_sweeps_per_eigenvalue)?;
    sort_canonical(&mut ev, h.frobenius_norm());
    Ok(ev)
}

/// Full biorthonormal eigensystem with default tolerances.
pub fn eigensystem(h: &CMatrix) -> Result<EigenSystem, LinalgError> {
    eigensystem_with(h, &EigenTolerances::default())
}

pub fn eigensystem_with(h: &CMatrix, tol: &EigenTolerances) -> Result<EigenSystem, LinalgError> {
    if !h.is_finite() {
        return Err(LinalgError::NonFinite { context: "eigensystem input" });
    }
    let n = h.dim();
    let scale = h.frobenius_norm();
    let mut values = hessenberg_qr(h, tol.max_sweeps_per_eigenvalue)?;
    sort_canonical(&mut values, scale);
    if let Some((first, second, gap)) = min_pairwise_gap(&values) {
        let threshold = tol.degeneracy * scale;
        if gap < threshold || scale == 0.0 {
            return Err(LinalgError::NearDegenerate {
                first,
                second,
                gap,
                threshold,
            });
        }
    }

    let hd = h.adjoint();
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    for (b, lam) in values.iter_mut().enumerate() {
        let r = inverse_iteration(h, *lam, b);
        let l = inverse_iteration(&hd, lam.conj(), b);
        // two-sided Rayleigh quotient; error is quadratic in the vector errors
        let overlap = l.inner(&r);
        if overlap.norm() > tol.defective_overlap * l.norm() * r.norm() {
            *lam = l.inner(&h.mul_vec(&r)) / overlap;
        }
        right.push(r);
        left.push(l);
    }
    biorthonormalize_with(
        EigenSystem {
            eigenvalues: values,
            right,
            left,
        },
        tol,
    )
}

/// Rescales a raw eigensystem so that ‖φ_b‖ = 1 and ⟨φ*_b|φ_b⟩ = 1.
pub fn biorthonormalize(raw: EigenSystem) -> Result<EigenSystem, LinalgError> {
    biorthonormalize_with(raw, &EigenTolerances::default())
}

fn biorthonormalize_with(raw: EigenSystem, tol: &EigenTolerances) -> Result<EigenSystem, LinalgError> {
    let EigenSystem {
        eigenvalues,
        mut right,
        mut left,
    } = raw;
    for (b, (r, l)) in right.iter_mut().zip(left.iter_mut()).enumerate() {
        let rn = r.norm();
        let ln = l.norm();
        if rn == 0.0 || ln == 0.0 || !rn.is_finite() || !ln.is_finite() {
            return Err(LinalgError::DefectivePair { index: b, overlap: 0.0 });
        }
        *r = r.scale(C64::new(1.0 / rn, 0.0));
        let overlap = l.inner(r);
        if overlap.norm() < tol.defective_overlap * ln {
            return Err(LinalgError::DefectivePair {
                index: b,
                overlap: overlap.norm() / ln,
            });
        }
        // ⟨l/conj(z)|r⟩ = ⟨l|r⟩/z = 1
        *l = l.scale(ONE / overlap.conj());
    }
    Ok(EigenSystem {
        eigenvalues,
        right,
        left,
    })
}

/// Lexicographic order by (re, im); real parts closer than a tiny fraction of
/// the matrix scale count as ties.
fn sort_canonical(values: &mut [C64], scale: f64) {
    let tie = 1e-9 * scale.max(f64::MIN_POSITIVE);
    values.sort_by(|a, b| {
        if (a.re - b.re).abs() <= tie {
            a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal)
        } else {
            a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal)
        }
    });
}

fn min_pairwise_gap(values: &[C64]) -> Option<(C64, C64, f64)> {
    let mut best: Option<(C64, C64, f64)> = None;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let gap = (values[i] - values[j]).norm();
            if best.is_none_or(|(_, _, g)| gap < g) {
                best = Some((values[i], values[j], gap));
            }
        }
    }
    best
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg(h: &CMatrix) -> CMatrix {
    let n = h.dim();
    let mut a = h.clone();
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vn;
        }
        // A ← (I − 2vv†) A
        for j in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| vt.conj() * a[(k + 1 + t, j)])
                .sum();
            for (t, vt) in v.iter().enumerate() {
                a[(k + 1 + t, j)] -= 2.0 * vt * dot;
            }
        }
        // A ← A (I − 2vv†)
        for i in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| a[(i, k + 1 + t)] * vt)
                .sum();
            for (t, vt) in v.iter().enumerate() {
                a[(i, k + 1 + t)] -= 2.0 * dot * vt.conj();
            }
        }
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
    a
}

/// Complex Givens rotation G = [[c, s], [−s̄, c]] with G·(a, b)ᵀ = (r, 0)ᵀ.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    (an / r, (a / an) * b.conj() / r)
}

/// Eigenvalues via Hessenberg reduction and explicitly shifted complex QR
/// sweeps with Wilkinson shifts and deflation.
fn hessenberg_qr(h: &CMatrix, max_sweeps: usize) -> Result<Vec<C64>, LinalgError> {
    let n = h.dim();
    let mut a = hessenberg(h);
    let mut values = vec![ZERO; n];
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut total = 0usize;
    let mut hi = n;
    let mut sweeps = 0usize;

    while hi > 0 {
        let last = hi - 1;
        // locate the start of the active unreduced block
        let mut lo = last;
        while lo > 0 {
            let sub = a[(lo, lo - 1)].norm();
            let diag = a[(lo - 1, lo - 1)].norm() + a[(lo, lo)].norm();
            let reference = if diag > 0.0 { diag } else { scale };
            if sub <= eps * reference {
                a[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == last {
            values[last] = a[(last, last)];
            hi -= 1;
            sweeps = 0;
            continue;
        }
        sweeps += 1;
        total += 1;
        if sweeps > max_sweeps {
            return Err(LinalgError::NoConvergence { iterations: total });
        }

        let shift = if sweeps.is_multiple_of(11) {
            // exceptional shift to break cycles
            a[(last, last)] + C64::new(0.75 * a[(last, last - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                a[(last - 1, last - 1)],
                a[(last - 1, last)],
                a[(last, last - 1)],
                a[(last, last)],
            )
        };

        for i in lo..=last {
            a[(i, i)] -= shift;
        }
        let mut rotations = Vec::with_capacity(last - lo);
        for k in lo..last {
            let (c, s) = givens(a[(k, k)], a[(k + 1, k)]);
            for j in k..=last {
                let x = a[(k, j)];
                let y = a[(k + 1, j)];
                a[(k, j)] = c * x + s * y;
                a[(k + 1, j)] = -s.conj() * x + c * y;
            }
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + offset;
            for i in lo..=(k + 1).min(last) {
                let x = a[(i, k)];
                let y = a[(i, k + 1)];
                a[(i, k)] = x * c + y * s.conj();
                a[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=last {
            a[(i, i)] += shift;
        }
    }
    if values.iter().any(|z| !z.is_finite()) {
        return Err(LinalgError::NonFinite { context: "QR iteration" });
    }
    Ok(values)
}

/// Eigenvalue of [[a, b], [c, d]] closest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Inverse iteration for the eigenvector of `h` belonging to `lambda`.
fn inverse_iteration(h: &CMatrix, lambda: C64, seed: usize) -> CVector {
    let n = h.dim();
    let scale = h.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut shifted = h.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let lu = LuFactors::factor_regularized(&shifted, f64::EPSILON * scale);
    // deterministic start vector, varied per eigenvalue to avoid accidental
    // orthogonality to the target
    let mut v: CVector = (0..n)
        .map(|i| {
            let t = (i + 1) as f64;
            C64::new(1.0 + 0.37 * t + 0.11 * seed as f64, 0.23 * t - 0.05 * seed as f64)
        })
        .collect();
    v = v.normalized();
    let mut best = v.clone();
    let mut best_residual = f64::INFINITY;
    for _ in 0..8 {
        let w = match lu.solve(&v) {
            Ok(w) if w.norm() > 0.0 && w.is_finite() => w,
            _ => break,
        };
        v = w.normalized();
        let residual = (&h.mul_vec(&v) - &v.scale(lambda)).norm();
        if residual < best_residual {
            best_residual = residual;
            best = v.clone();
        }
        if residual <= 1e-14 * scale {
            break;
        }
    }
    best
}
