use super::effective_eigenvalue;
use crate::linalg::{eigenvalues, CMatrix, CVector, C64, I};
use crate::quadrature::fd_weights;
use crate::spectral::{EigenTrajectory, TimeGrid};
use crate::{Error, Result};

/// First superadiabatic renormalization of the followed level.
#[derive(Debug, Clone)]
pub struct SuperadiabaticSystem {
    pub t_total: f64,
    pub grid: TimeGrid,
    pub level: usize,
    pub h1: Vec<CMatrix>,
    pub phi1: Vec<CVector>,
    pub phi1_star: Vec<CVector>,
    pub lambda_a: Vec<C64>,
    pub lambda_eff: Vec<C64>,
    /// Eigenvalue of H⁽¹⁾ nearest λ_a.
    pub lambda1: Vec<C64>,
    h: Vec<CMatrix>,
    phi: Vec<CVector>,
    phi_star: Vec<CVector>,
}

pub fn superadiabatic_system(eig: &EigenTrajectory, t_total: f64) -> Result<SuperadiabaticSystem> {
    if !(t_total.is_finite() && t_total > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be > 0, got {t_total}")));
    }
    let a = eig.level();
    let dim = eig.dim();
    let eps = -I / t_total;
    let n = eig.len();
    let mut sys = SuperadiabaticSystem {
        t_total,
        grid: eig.grid(),
        level: a,
        h1: Vec::with_capacity(n),
        phi1: Vec::with_capacity(n),
        phi1_star: Vec::with_capacity(n),
        lambda_a: Vec::with_capacity(n),
        lambda_eff: Vec::with_capacity(n),
        lambda1: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        phi_star: Vec::with_capacity(n),
    };
    for k in 0..n {
        let ps_dot = eig.spectral_projector_dot_of(a, k);
        let ps = eig.spectral_projector_of(a, k);
        let mut generator = &ps_dot * &ps;
        let lam_a = eig.eigenvalue(k);
        let mut phi1 = eig.right(k).clone();
        let mut phi1_star = eig.left(k).clone();
        for b in (0..dim).filter(|&b| b != a) {
            let qb = eig.spectral_projector_of(b, k);
            generator = &generator + &(&eig.spectral_projector_dot_of(b, k) * &qb);
            let lam_b = eig.eigenvalue_of(b, k);
            let cr = ps_dot.sandwich(eig.left_of(b, k), eig.right(k)) / (lam_a - lam_b);
            phi1 = phi1.axpy(eps * cr, eig.right_of(b, k));
            let cl = ps_dot.sandwich(eig.left(k), eig.right_of(b, k)).conj() / (lam_a.conj() - lam_b.conj());
            phi1_star = phi1_star.axpy(eps * cl, eig.left_of(b, k));
        }
        let h1 = eig.hamiltonian(k) + &generator.scale(eps);
        let lambda1 = eigenvalues(&h1)
            .map_err(|source| Error::Eigen { s: eig.s(k), source })?
            .into_iter()
            .min_by(|x, y| (x - lam_a).norm().total_cmp(&(y - lam_a).norm()))
            .expect("nonempty spectrum");
        sys.h1.push(h1);
        sys.phi1.push(phi1);
        sys.phi1_star.push(phi1_star);
        sys.lambda_a.push(lam_a);
        sys.lambda_eff.push(effective_eigenvalue(eig, t_total, k));
        sys.lambda1.push(lambda1);
        sys.h.push(eig.hamiltonian(k).clone());
        sys.phi.push(eig.right(k).clone());
        sys.phi_star.push(eig.left(k).clone());
    }
    Ok(sys)
}

impl SuperadiabaticSystem {
    pub fn len(&self) -> usize {
        self.h1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h1.is_empty()
    }

    /// ⟨φ*⁽¹⁾|H|φ⁽¹⁾⟩ − λ_a
    pub fn spectral_expectation_gap(&self, k: usize) -> C64 {
        self.h[k].sandwich(&self.phi1_star[k], &self.phi1[k]) - self.lambda_a[k]
    }

    /// ⟨φ⁽¹⁾|H|φ⁽¹⁾⟩/⟨φ⁽¹⁾|φ⁽¹⁾⟩ − λ_eff
    pub fn orthogonal_expectation_gap(&self, k: usize) -> C64 {
        let p = &self.phi1[k];
        self.h[k].sandwich(p, p) / p.norm_sqr() - self.lambda_eff[k]
    }

    /// ‖(H⁽¹⁾ − λ⁽¹⁾)φ⁽¹⁾‖/‖φ⁽¹⁾‖
    pub fn eigen_residual(&self, k: usize) -> f64 {
        let p = &self.phi1[k];
        let hp = self.h1[k].mul_vec(p);
        hp.axpy(-self.lambda1[k], p).norm() / p.norm()
    }

    fn fd(&self, seq: &[CVector], k: usize) -> CVector {
        let h = self.grid.h();
        let mut out = CVector::zeros(seq[k].dim());
        for (j, w) in fd_weights(seq.len(), k) {
            if w != 0.0 {
                out = out.axpy(C64::new(w / h, 0.0), &seq[j]);
            }
        }
        out
    }

    /// ⟨φ*⁽¹⁾|φ̇⁽¹⁾⟩/⟨φ*⁽¹⁾|φ⁽¹⁾⟩ − ⟨φ*|φ̇⟩, both by differences of the
    /// stored sequences.
    pub fn spectral_connection_correction(&self, k: usize) -> C64 {
        let d1 = self.fd(&self.phi1, k);
        let d0 = self.fd(&self.phi, k);
        self.phi1_star[k].inner(&d1) / self.phi1_star[k].inner(&self.phi1[k])
            - self.phi_star[k].inner(&d0) / self.phi_star[k].inner(&self.phi[k])
    }

    /// ⟨φ⁽¹⁾|φ̇⁽¹⁾⟩/⟨φ⁽¹⁾|φ⁽¹⁾⟩ − ⟨φ|φ̇⟩/⟨φ|φ⟩, by differences.
    pub fn orthogonal_connection_correction(&self, k: usize) -> C64 {
        let d1 = self.fd(&self.phi1, k);
        let d0 = self.fd(&self.phi, k);
        self.phi1[k].inner(&d1) / self.phi1[k].norm_sqr() - self.phi[k].inner(&d0) / self.phi[k].norm_sqr()
    }

    /// Largest |·| over the grid of `f`.
    pub fn sup(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(f).fold(0.0, f64::max)
    }
}
