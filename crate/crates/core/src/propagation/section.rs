use super::WavefunctionTrajectory;
use crate::linalg::{CVector, C64};
use crate::models::CYCLICITY_THRESHOLD;
use crate::quadrature::fd_weights;
use crate::spectral::{EigenTrajectory, TimeGrid};
use crate::{Error, Result};

/// Relative |⟨φ*_a|ψ⟩| below which the section is singular.
pub const SECTION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionOptions {
    /// Relative bound on ‖H(1) − H(0)‖_F/‖H(0)‖_F.
    pub cyclicity_threshold: f64,
    /// Accept models whose endpoints differ beyond the threshold.
    pub allow_noncyclic: bool,
}

impl Default for SectionOptions {
    fn default() -> Self {
        Self {
            cyclicity_threshold: CYCLICITY_THRESHOLD,
            allow_noncyclic: false,
        }
    }
}

/// Local section ψ̲(s) = c₀ψ(s)/⟨φ*_a(s)|ψ(s)⟩ with c₀ = ⟨φ*_a(0)|ψ(0)⟩.
#[derive(Debug, Clone)]
pub struct CyclicSectionData {
    grid: TimeGrid,
    t_total: f64,
    level: usize,
    section: Vec<CVector>,
    section_dot: Vec<CVector>,
    log_f: Vec<C64>,
    log_mu: C64,
    cyclicity_residual: f64,
    closure: f64,
    hamiltonian_residual: f64,
}

impl CyclicSectionData {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.section.len()
    }

    pub fn is_empty(&self) -> bool {
        self.section.is_empty()
    }

    /// ψ̲(s_k)
    pub fn section(&self, k: usize) -> &CVector {
        &self.section[k]
    }

    /// dψ̲/ds at s_k from the equation of motion.
    pub fn section_dot(&self, k: usize) -> &CVector {
        &self.section_dot[k]
    }

    /// dψ̲/ds at s_k by second-order differences of the section samples.
    pub fn section_dot_fd(&self, k: usize) -> CVector {
        let h = self.grid.h();
        let mut out = CVector::zeros(self.section[k].dim());
        for (j, w) in fd_weights(self.len(), k) {
            if w != 0.0 {
                out = out.axpy(C64::new(w / h, 0.0), &self.section[j]);
            }
        }
        out
    }

    /// ln f(s_k) with ψ̲ = fψ, phase unwrapped along the grid; ln f(0) = 0.
    pub fn log_f(&self, k: usize) -> C64 {
        self.log_f[k]
    }

    pub fn f(&self, k: usize) -> C64 {
        self.log_f[k].exp()
    }

    /// ln μ with μ = ⟨φ*_a(0)|ψ(1)⟩/⟨φ*_a(0)|ψ(0)⟩.
    pub fn log_mu(&self) -> C64 {
        self.log_mu
    }

    pub fn mu(&self) -> C64 {
        self.log_mu.exp()
    }

    /// ‖ψ(1)/μ − ψ(0)‖/‖ψ(0)‖
    pub fn cyclicity_residual(&self) -> f64 {
        self.cyclicity_residual
    }

    /// ‖ψ̲(1) − ψ̲(0)‖
    pub fn closure(&self) -> f64 {
        self.closure
    }

    /// ‖H(1) − H(0)‖_F/‖H(0)‖_F of the underlying model.
    pub fn hamiltonian_residual(&self) -> f64 {
        self.hamiltonian_residual
    }
}

fn unwrap_phase(prev: f64, next: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    next - two_pi * ((next - prev) / two_pi).round()
}

pub fn build_local_section(
    traj: &WavefunctionTrajectory,
    eig: &EigenTrajectory,
) -> Result<CyclicSectionData> {
    build_local_section_with(traj, eig, &SectionOptions::default())
}

pub fn build_local_section_with(
    traj: &WavefunctionTrajectory,
    eig: &EigenTrajectory,
    opts: &SectionOptions,
) -> Result<CyclicSectionData> {
    if traj.grid() != eig.grid() {
        return Err(Error::InvalidArgument(
            "wavefunction and eigen trajectories use different grids".into(),
        ));
    }
    let n = traj.len();
    let h0 = eig.hamiltonian(0);
    let hamiltonian_residual =
        (eig.hamiltonian(n - 1) - h0).frobenius_norm() / h0.frobenius_norm().max(f64::MIN_POSITIVE);
    if hamiltonian_residual > opts.cyclicity_threshold && !opts.allow_noncyclic {
        return Err(Error::NotCyclic {
            residual: hamiltonian_residual,
            threshold: opts.cyclicity_threshold,
        });
    }

    let t = traj.t_total();
    let overlap = |k: usize, psi: &CVector| -> Result<C64> {
        let left = eig.left(k);
        let ov = left.inner(psi);
        if ov.norm() < SECTION_THRESHOLD * left.norm() * psi.norm() {
            return Err(Error::SectionSingular {
                s: eig.s(k),
                overlap: ov.norm() / (left.norm() * psi.norm()),
            });
        }
        Ok(ov)
    };

    let psi0 = traj.scaled_state(0);
    let c0 = overlap(0, psi0)?;
    let mut section = Vec::with_capacity(n);
    let mut section_dot = Vec::with_capacity(n);
    let mut log_f = Vec::with_capacity(n);
    for k in 0..n {
        let psi = traj.scaled_state(k);
        let ov = overlap(k, psi)?;
        let sec = if k == 0 { psi0.clone() } else { psi.scale(c0 / ov) };
        // d/ds ln⟨φ*|ψ⟩ = (⟨φ̇*|ψ̲⟩ − iT⟨φ*|Hψ̲⟩)/⟨φ*|ψ̲⟩, and ⟨φ*|ψ̲⟩ = c₀
        let hpsi = eig.hamiltonian(k).mul_vec(&sec);
        let minus_it = C64::new(0.0, -t);
        let rate = (eig.left_dot(k).inner(&sec) + minus_it * eig.left(k).inner(&hpsi)) / c0;
        section_dot.push(hpsi.scale(minus_it).axpy(-rate, &sec));
        let lf = if k == 0 {
            C64::new(0.0, 0.0)
        } else {
            let raw = (c0 / ov).ln() - traj.log_scale(k);
            let prev: &C64 = log_f.last().expect("k > 0");
            C64::new(raw.re, unwrap_phase(prev.im, raw.im))
        };
        log_f.push(lf);
        section.push(sec);
    }

    let psi1 = traj.scaled_state(n - 1);
    let end_overlap = eig.left(0).inner(psi1);
    if end_overlap.norm() < SECTION_THRESHOLD * eig.left(0).norm() * psi1.norm() {
        return Err(Error::SectionSingular {
            s: 1.0,
            overlap: end_overlap.norm(),
        });
    }
    let raw_log_mu = (end_overlap / c0).ln() + traj.log_scale(n - 1);
    // branch of ln μ continuous with the accumulated phase of ψ
    let log_mu = C64::new(raw_log_mu.re, unwrap_phase(-log_f[n - 1].im, raw_log_mu.im));
    let returned = psi1.scale(c0 / end_overlap);
    let cyclicity_residual = (&returned - psi0).norm() / psi0.norm();
    let closure = (&section[n - 1] - &section[0]).norm();

    Ok(CyclicSectionData {
        grid: traj.grid(),
        t_total: t,
        level: eig.level(),
        section,
        section_dot,
        log_f,
        log_mu,
        cyclicity_residual,
        closure,
        hamiltonian_residual,
    })
}
