//! Continuation of the biorthogonal eigensystem along s, projector families
//! and their s-derivatives.

mod projector;

use crate::linalg::{eigensystem, CMatrix, CVector, EigenSystem, C64, ONE};
use crate::models::HamiltonianModel;
use crate::quadrature::fd_weights;
use crate::{Error, Result};

pub use projector::{
    chi_projector, orthogonal_projector, riesz_projector_contour, spectral_projector, Contour,
    Projector, ProjectorKind, CHI_OVERLAP_THRESHOLD, DEFAULT_CONTOUR_NODES,
};

/// Overlap below which a branch is considered lost.
pub const TRACKING_THRESHOLD: f64 = 0.5;

pub const DEFAULT_STEPS: usize = 2000;

/// Uniform grid s_k = k/n on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 steps, got {n_steps}"
            )));
        }
        Ok(Self { n_steps })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of points, n_steps + 1.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.n_steps {
            1.0
        } else {
            k as f64 / self.n_steps as f64
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Grid index nearest to `s`.
    pub fn index_of(&self, s: f64) -> usize {
        ((s.clamp(0.0, 1.0) * self.n_steps as f64).round() as usize).min(self.n_steps)
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_STEPS,
        }
    }
}

/// How φ̇, φ̇* and Ṗ are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    /// Second-order finite differences of the gauge-smoothed sequences.
    FiniteDifference,
    /// Sum-over-states formula from the analytic Ḣ.
    Perturbative,
}

impl DerivativeMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DerivativeMethod::FiniteDifference => "finite_difference",
            DerivativeMethod::Perturbative => "perturbative",
        }
    }
}

/// Index-tracked, gauge-smoothed eigensystems of H(s_k) for all levels.
#[derive(Debug, Clone)]
pub struct EigenTrajectory {
    grid: TimeGrid,
    systems: Vec<EigenSystem>,
    hamiltonians: Vec<CMatrix>,
    hamiltonian_derivatives: Option<Vec<CMatrix>>,
    level: usize,
    method: DerivativeMethod,
    right_dot: Vec<Vec<CVector>>,
    left_dot: Vec<Vec<CVector>>,
}

/// Tracks every level of `model` over `grid`; `level` selects the followed
/// branch by its canonical index at s = 0. Uses the perturbative derivative
/// when the model supplies Ḣ.
pub fn track_eigensystem(
    model: &HamiltonianModel,
    grid: TimeGrid,
    level: usize,
) -> Result<EigenTrajectory> {
    let method = if model.has_analytic_derivative() {
        DerivativeMethod::Perturbative
    } else {
        DerivativeMethod::FiniteDifference
    };
    track_eigensystem_with(model, grid, level, method)
}

pub fn track_eigensystem_with(
    model: &HamiltonianModel,
    grid: TimeGrid,
    level: usize,
    method: DerivativeMethod,
) -> Result<EigenTrajectory> {
    if level >= model.dim() {
        return Err(Error::LevelOutOfRange {
            level,
            dim: model.dim(),
        });
    }
    let hamiltonians: Vec<CMatrix> = grid.points().map(|s| model.evaluate(s)).collect();
    let hamiltonian_derivatives = if model.has_analytic_derivative() {
        grid.points().map(|s| model.derivative(s)).collect::<Option<Vec<_>>>()
    } else {
        None
    };
    EigenTrajectory::from_matrices(grid, hamiltonians, hamiltonian_derivatives, level, method)
}

fn lost(level: usize, s: f64, overlap: f64) -> Error {
    Error::TrackingLost { level, s, overlap }
}

/// Reorders `next` to continue `prev` and applies the continuity gauge.
fn continue_branches(prev: &EigenSystem, mut next: EigenSystem, s: f64) -> Result<EigenSystem> {
    let n = prev.dim();
    let mut overlaps: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for b in 0..n {
        for c in 0..n {
            let o = prev.right[b].inner(&next.right[c]).norm()
                / (prev.right[b].norm() * next.right[c].norm());
            overlaps.push((o, b, c));
        }
    }
    overlaps.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut assignment: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut taken = vec![false; n];
    for (o, b, c) in overlaps {
        if assignment[b].is_none() && !taken[c] {
            assignment[b] = Some((c, o));
            taken[c] = true;
        }
    }
    let mut eigenvalues = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    for (b, slot) in assignment.into_iter().enumerate() {
        let (c, o) = slot.expect("assignment is a permutation");
        if o < TRACKING_THRESHOLD {
            return Err(lost(b, s, o));
        }
        let g = prev.right[b].inner(&next.right[c]);
        let phase = g.conj() / g.norm();
        eigenvalues.push(next.eigenvalues[c]);
        right.push(next.right[c].scale(phase));
        left.push(next.left[c].scale(phase));
    }
    next.eigenvalues = eigenvalues;
    next.right = right;
    next.left = left;
    Ok(next)
}

fn fd_sequence<'a>(seq: impl Fn(usize) -> &'a CVector, len: usize, h: f64, k: usize) -> CVector {
    let mut out = CVector::zeros(seq(k).dim());
    for (j, w) in fd_weights(len, k) {
        if w != 0.0 {
            out = out.axpy(C64::new(w / h, 0.0), seq(j));
        }
    }
    out
}

/// φ̇*_b = −Σ_c conj(⟨φ*_b|φ̇_c⟩) φ*_c, which keeps ⟨φ*_b|φ_c⟩ = δ_bc to
/// first order.
fn dual_left_derivatives(sys: &EigenSystem, right_dot: &[CVector]) -> Vec<CVector> {
    let dim = sys.dim();
    (0..dim)
        .map(|b| {
            (0..dim).fold(CVector::zeros(dim), |w, c| {
                w.axpy(-sys.left[b].inner(&right_dot[c]).conj(), &sys.left[c])
            })
        })
        .collect()
}

impl EigenTrajectory {
    /// Tracks precomputed H(s_k) samples (and optional Ḣ(s_k)).
    pub fn from_matrices(
        grid: TimeGrid,
        hamiltonians: Vec<CMatrix>,
        hamiltonian_derivatives: Option<Vec<CMatrix>>,
        level: usize,
        method: DerivativeMethod,
    ) -> Result<Self> {
        assert_eq!(hamiltonians.len(), grid.len());
        let dim = hamiltonians[0].dim();
        if level >= dim {
            return Err(Error::LevelOutOfRange { level, dim });
        }
        if method == DerivativeMethod::Perturbative && hamiltonian_derivatives.is_none() {
            return Err(Error::InvalidArgument(
                "perturbative derivatives need an analytic dH/ds".into(),
            ));
        }
        let mut systems: Vec<EigenSystem> = Vec::with_capacity(grid.len());
        for (k, h) in hamiltonians.iter().enumerate() {
            let s = grid.point(k);
            let sys = eigensystem(h).map_err(|source| Error::Eigen { s, source })?;
            let sys = match systems.last() {
                None => sys,
                Some(prev) => continue_branches(prev, sys, s)?,
            };
            systems.push(sys);
        }
        let mut traj = Self {
            grid,
            systems,
            hamiltonians,
            hamiltonian_derivatives,
            level,
            method,
            right_dot: Vec::new(),
            left_dot: Vec::new(),
        };
        traj.compute_derivatives()?;
        Ok(traj)
    }

    fn compute_derivatives(&mut self) -> Result<()> {
        let n = self.grid.len();
        let dim = self.dim();
        let h = self.grid.h();
        self.right_dot = Vec::with_capacity(n);
        self.left_dot = Vec::with_capacity(n);
        for k in 0..n {
            let (r, l) = match self.method {
                DerivativeMethod::FiniteDifference => {
                    let right: Vec<CVector> = (0..dim)
                        .map(|b| fd_sequence(|j| &self.systems[j].right[b], n, h, k))
                        .collect();
                    let left = dual_left_derivatives(&self.systems[k], &right);
                    (right, left)
                }
                DerivativeMethod::Perturbative => self.perturbative_derivatives(k)?,
            };
            self.right_dot.push(r);
            self.left_dot.push(l);
        }
        Ok(())
    }

    /// φ̇_b = Σ_{c≠b} φ_c⟨φ*_c|Ḣ|φ_b⟩/(λ_b − λ_c) + κφ_b with κ fixing ⟨φ_b|φ̇_b⟩ = 0.
    fn perturbative_derivatives(&self, k: usize) -> Result<(Vec<CVector>, Vec<CVector>)> {
        let sys = &self.systems[k];
        let hdot = &self.hamiltonian_derivatives.as_ref().expect("checked at construction")[k];
        let dim = sys.dim();
        let mut right = Vec::with_capacity(dim);
        for b in 0..dim {
            let hb = hdot.mul_vec(&sys.right[b]);
            let mut v = CVector::zeros(dim);
            for c in (0..dim).filter(|&c| c != b) {
                let gap = sys.eigenvalues[b] - sys.eigenvalues[c];
                if gap.norm() == 0.0 {
                    return Err(Error::Eigen {
                        s: self.grid.point(k),
                        source: crate::linalg::LinalgError::NearDegenerate {
                            first: sys.eigenvalues[b],
                            second: sys.eigenvalues[c],
                            gap: 0.0,
                            threshold: 0.0,
                        },
                    });
                }
                v = v.axpy(sys.left[c].inner(&hb) / gap, &sys.right[c]);
            }
            let kappa = -sys.right[b].inner(&v) / sys.right[b].norm_sqr();
            right.push(v.axpy(kappa, &sys.right[b]));
        }
        let left = dual_left_derivatives(sys, &right);
        Ok((right, left))
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.systems[0].dim()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn method(&self) -> DerivativeMethod {
        self.method
    }

    pub fn s(&self, k: usize) -> f64 {
        self.grid.point(k)
    }

    pub fn system(&self, k: usize) -> &EigenSystem {
        &self.systems[k]
    }

    pub fn hamiltonian(&self, k: usize) -> &CMatrix {
        &self.hamiltonians[k]
    }

    pub fn hamiltonian_derivative(&self, k: usize) -> Option<&CMatrix> {
        self.hamiltonian_derivatives.as_ref().map(|d| &d[k])
    }

    /// λ_a(s_k) of the followed level.
    pub fn eigenvalue(&self, k: usize) -> C64 {
        self.systems[k].eigenvalues[self.level]
    }

    pub fn eigenvalue_of(&self, b: usize, k: usize) -> C64 {
        self.systems[k].eigenvalues[b]
    }

    /// φ_a(s_k)
    pub fn right(&self, k: usize) -> &CVector {
        &self.systems[k].right[self.level]
    }

    /// φ*_a(s_k)
    pub fn left(&self, k: usize) -> &CVector {
        &self.systems[k].left[self.level]
    }

    pub fn right_of(&self, b: usize, k: usize) -> &CVector {
        &self.systems[k].right[b]
    }

    pub fn left_of(&self, b: usize, k: usize) -> &CVector {
        &self.systems[k].left[b]
    }

    /// dφ_a/ds at s_k.
    pub fn right_dot(&self, k: usize) -> &CVector {
        &self.right_dot[k][self.level]
    }

    /// dφ*_a/ds at s_k.
    pub fn left_dot(&self, k: usize) -> &CVector {
        &self.left_dot[k][self.level]
    }

    pub fn right_dot_of(&self, b: usize, k: usize) -> &CVector {
        &self.right_dot[k][b]
    }

    pub fn left_dot_of(&self, b: usize, k: usize) -> &CVector {
        &self.left_dot[k][b]
    }

    /// Same tracked data, following level `b` instead.
    pub fn for_level(&self, b: usize) -> Result<Self> {
        if b >= self.dim() {
            return Err(Error::LevelOutOfRange {
                level: b,
                dim: self.dim(),
            });
        }
        Ok(Self {
            level: b,
            ..self.clone()
        })
    }

    /// Same eigensystems with derivatives recomputed by `method`.
    pub fn with_method(&self, method: DerivativeMethod) -> Result<Self> {
        if method == DerivativeMethod::Perturbative && self.hamiltonian_derivatives.is_none() {
            return Err(Error::InvalidArgument(
                "perturbative derivatives need an analytic dH/ds".into(),
            ));
        }
        let mut out = Self {
            method,
            ..self.clone()
        };
        out.compute_derivatives()?;
        Ok(out)
    }

    /// Every `stride`-th point, with derivatives recomputed on the coarse grid.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let n = self.grid.n_steps();
        if stride == 0 || !n.is_multiple_of(stride) {
            return Err(Error::InvalidArgument(format!(
                "stride {stride} does not divide {n} steps"
            )));
        }
        let grid = TimeGrid::new(n / stride)?;
        let pick = |k: usize| k * stride;
        let mut out = Self {
            grid,
            systems: (0..grid.len()).map(|k| self.systems[pick(k)].clone()).collect(),
            hamiltonians: (0..grid.len()).map(|k| self.hamiltonians[pick(k)].clone()).collect(),
            hamiltonian_derivatives: self
                .hamiltonian_derivatives
                .as_ref()
                .map(|d| (0..grid.len()).map(|k| d[pick(k)].clone()).collect()),
            level: self.level,
            method: self.method,
            right_dot: Vec::new(),
            left_dot: Vec::new(),
        };
        out.compute_derivatives()?;
        Ok(out)
    }

    /// Applies φ_a → gφ_a, φ*_a → φ*_a/conj(g) on the followed level. In
    /// perturbative mode `g_dot` supplies ġ; in finite-difference mode the
    /// derivatives are re-estimated from the regauged sequence.
    pub fn regauge(&self, g: &[C64], g_dot: &[C64]) -> Result<Self> {
        let n = self.len();
        if g.len() != n || g_dot.len() != n {
            return Err(Error::InvalidArgument("gauge samples must match the grid".into()));
        }
        let a = self.level;
        let mut out = self.clone();
        for k in 0..n {
            let inv = ONE / g[k].conj();
            out.systems[k].right[a] = self.systems[k].right[a].scale(g[k]);
            out.systems[k].left[a] = self.systems[k].left[a].scale(inv);
            if self.method == DerivativeMethod::Perturbative {
                let r = &self.systems[k].right[a];
                let l = &self.systems[k].left[a];
                out.right_dot[k][a] = self.right_dot[k][a].scale(g[k]).axpy(g_dot[k], r);
                out.left_dot[k][a] = self.left_dot[k][a]
                    .scale(inv)
                    .axpy(-g_dot[k].conj() * inv * inv, l);
            }
        }
        if self.method == DerivativeMethod::FiniteDifference {
            out.compute_derivatives()?;
        }
        Ok(out)
    }

    /// min over k, b of |⟨φ_b(s_{k−1})|φ_b(s_k)⟩|/(‖φ_b(s_{k−1})‖‖φ_b(s_k)‖).
    pub fn min_continuity_overlap(&self) -> f64 {
        let mut worst: f64 = 1.0;
        for k in 1..self.len() {
            for b in 0..self.dim() {
                let p = &self.systems[k - 1].right[b];
                let q = &self.systems[k].right[b];
                worst = worst.min(p.inner(q).norm() / (p.norm() * q.norm()));
            }
        }
        worst
    }

    /// max over k, b of the angle of ⟨φ_b(s_{k−1})|φ_b(s_k)⟩.
    pub fn max_gauge_angle(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.len() {
            for b in 0..self.dim() {
                let o = self.systems[k - 1].right[b].inner(&self.systems[k].right[b]);
                worst = worst.max(o.arg().abs());
            }
        }
        worst
    }

    /// min over the grid of the smallest pairwise eigenvalue distance.
    pub fn min_gap(&self) -> f64 {
        self.systems.iter().map(|s| s.min_gap()).fold(f64::INFINITY, f64::min)
    }

    /// Pₒ(s_k) of the followed level.
    pub fn orthogonal_projector(&self, k: usize) -> Projector {
        orthogonal_projector(self, k)
    }

    /// Pₛ(s_k) of the followed level.
    pub fn spectral_projector(&self, k: usize) -> Projector {
        spectral_projector(self, k)
    }

    /// Spectral projector Q_b = |φ_b⟩⟨φ*_b| of any level.
    pub fn spectral_projector_of(&self, b: usize, k: usize) -> CMatrix {
        self.systems[k].spectral_projector(b)
    }

    /// dQ_b/ds, by central differences of the projector sequence or by the
    /// product rule on φ̇_b, φ̇*_b depending on the trajectory's method.
    pub fn spectral_projector_dot_of(&self, b: usize, k: usize) -> CMatrix {
        match self.method {
            DerivativeMethod::FiniteDifference => {
                self.fd_matrix(|j| self.systems[j].spectral_projector(b), k)
            }
            DerivativeMethod::Perturbative => {
                let r = &self.systems[k].right[b];
                let l = &self.systems[k].left[b];
                &CMatrix::outer(&self.right_dot[k][b], l) + &CMatrix::outer(r, &self.left_dot[k][b])
            }
        }
    }

    fn orthogonal_matrix(&self, k: usize) -> CMatrix {
        let r = self.right(k);
        CMatrix::outer(r, r).scale(C64::new(1.0 / r.norm_sqr(), 0.0))
    }

    fn orthogonal_projector_dot(&self, k: usize) -> CMatrix {
        match self.method {
            DerivativeMethod::FiniteDifference => self.fd_matrix(|j| self.orthogonal_matrix(j), k),
            DerivativeMethod::Perturbative => {
                let r = self.right(k);
                let rd = self.right_dot(k);
                let n = r.norm_sqr();
                let dn = 2.0 * r.inner(rd).re;
                let sym = &CMatrix::outer(rd, r) + &CMatrix::outer(r, rd);
                &sym.scale(C64::new(1.0 / n, 0.0))
                    - &CMatrix::outer(r, r).scale(C64::new(dn / (n * n), 0.0))
            }
        }
    }

    fn fd_matrix(&self, f: impl Fn(usize) -> CMatrix, k: usize) -> CMatrix {
        let h = self.grid.h();
        let mut out = CMatrix::zeros(self.dim());
        for (j, w) in fd_weights(self.len(), k) {
            if w != 0.0 {
                out = &out + &f(j).scale(C64::new(w / h, 0.0));
            }
        }
        out
    }
}

/// Derivatives of the followed level at one grid point.
#[derive(Debug, Clone)]
pub struct LocalDerivatives {
    pub right_dot: CVector,
    pub left_dot: CVector,
    pub orthogonal_dot: CMatrix,
    pub spectral_dot: CMatrix,
}

/// Second-order stencil on the sub-grid of spacing `stride`·h through `k`.
fn strided_weights(len: usize, k: usize, stride: usize) -> Vec<(usize, f64)> {
    let last = len - 1;
    if k >= stride && k + stride <= last {
        vec![(k - stride, -0.5), (k + stride, 0.5)]
    } else if k + 2 * stride <= last {
        vec![(k, -1.5), (k + stride, 2.0), (k + 2 * stride, -0.5)]
    } else {
        vec![(k, 1.5), (k - stride, -2.0), (k - 2 * stride, 0.5)]
    }
}

impl EigenTrajectory {
    /// Derivatives at s_k according to the trajectory's method.
    pub fn local_derivatives(&self, k: usize) -> LocalDerivatives {
        LocalDerivatives {
            right_dot: self.right_dot(k).clone(),
            left_dot: self.left_dot(k).clone(),
            orthogonal_dot: self.orthogonal_projector_dot(k),
            spectral_dot: self.spectral_projector_dot_of(self.level, k),
        }
    }

    /// Finite-difference derivatives at s_k with spacing `stride`·h,
    /// regardless of the trajectory's method.
    pub fn finite_difference_derivatives(&self, k: usize, stride: usize) -> Result<LocalDerivatives> {
        if stride == 0 || 2 * stride >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "stride {stride} too large for {} points",
                self.len()
            )));
        }
        let a = self.level;
        let hs = self.grid.h() * stride as f64;
        let weights = strided_weights(self.len(), k, stride);
        let dim = self.dim();
        let mut out = LocalDerivatives {
            right_dot: CVector::zeros(dim),
            left_dot: CVector::zeros(dim),
            orthogonal_dot: CMatrix::zeros(dim),
            spectral_dot: CMatrix::zeros(dim),
        };
        for (j, w) in weights {
            let c = C64::new(w / hs, 0.0);
            out.right_dot = out.right_dot.axpy(c, &self.systems[j].right[a]);
            out.left_dot = out.left_dot.axpy(c, &self.systems[j].left[a]);
            out.orthogonal_dot = &out.orthogonal_dot + &self.orthogonal_matrix(j).scale(c);
            out.spectral_dot = &out.spectral_dot + &self.systems[j].spectral_projector(a).scale(c);
        }
        Ok(out)
    }
}

/// dφ_a/ds at s_k.
pub fn derivative_eigvec(traj: &EigenTrajectory, k: usize) -> CVector {
    traj.right_dot(k).clone()
}

/// dφ*_a/ds at s_k.
pub fn derivative_left_eigvec(traj: &EigenTrajectory, k: usize) -> CVector {
    traj.left_dot(k).clone()
}

/// dP/ds for the orthogonal or spectral projector of the followed level.
pub fn derivative_projector(traj: &EigenTrajectory, k: usize, kind: ProjectorKind) -> Result<CMatrix> {
    match kind {
        ProjectorKind::Orthogonal => Ok(traj.orthogonal_projector_dot(k)),
        ProjectorKind::Spectral => Ok(traj.spectral_projector_dot_of(traj.level(), k)),
        ProjectorKind::Chi => Err(Error::InvalidArgument(
            "the chi projector derivative needs a chi path; see phases::ChiFamily".into(),
        )),
    }
}
