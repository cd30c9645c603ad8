//! Consistency checks and T-scan measurements shared by the CLI and the
//! test suites.

use crate::linalg::{CMatrix, C64};
use crate::models::HamiltonianModel;
use crate::phases::{
    aa_connection, aa_phase_decomposition, adiabatic_wavefunctions, chi_generator_invariance, chi_triple,
    compensation_sample_with, connection_chi, connection_orthogonal, connection_spectral,
    deviation_curve, effective_eigenvalue, norm_law_residuals, phase_decomposition, relative_distance,
    superadiabatic_system, wave_operator_check, ChiFamily, Convention, SectionDerivative, SuperadiabaticSystem,
};
use crate::propagation::{
    build_local_section_with, evolution_operator, propagate, CyclicSectionData, SectionOptions, WavefunctionTrajectory,
};
use crate::quadrature::cumulative_integral;
use crate::spectral::{derivative_projector, DerivativeMethod, EigenTrajectory, ProjectorKind};
use crate::Result;

/// Window for ratios of O(1/T) quantities between T and 2T.
pub const FIRST_ORDER_WINDOW: (f64, f64) = (0.3, 0.7);
/// Window for ratios of O(1/T²) quantities between T and 2T.
pub const SECOND_ORDER_WINDOW: (f64, f64) = (0.15, 0.35);

/// Max over the grid of ‖H − H†‖ below which a model counts as Hermitian.
pub const HERMITIAN_THRESHOLD: f64 = 1e-14;

/// One audited relation with its measured residual.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub note: Option<String>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            threshold,
            passed: residual <= threshold,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

pub fn is_hermitian(eig: &EigenTrajectory) -> bool {
    (0..eig.len()).all(|k| {
        let h = eig.hamiltonian(k);
        (h - &h.adjoint()).max_abs() <= HERMITIAN_THRESHOLD
    })
}

/// max_k |(iTλ_a + A_s) − (iTλ_eff + A_o)|/(|Tλ_a| + 1), against 1e-12.
/// `corruption` is added to λ_eff, as a negative control.
pub fn check_compensation(eig: &EigenTrajectory, t_total: f64, corruption: C64) -> CheckResult {
    let worst = sup((0..eig.len()).map(|k| {
        let lam_eff = effective_eigenvalue(eig, t_total, k) + corruption;
        let sample = compensation_sample_with(eig, t_total, k, lam_eff);
        sample.residual() / (t_total * eig.eigenvalue(k).norm() + 1.0)
    }));
    CheckResult::new(format!("compensation_T{t_total}"), worst, 1e-12)
}

/// Worst ratio of the deviation triple discrepancy to its budget; for
/// Hermitian models also the largest |deviation| against 1e-12.
pub fn check_deviation(eig: &EigenTrajectory) -> Result<Vec<CheckResult>> {
    let curve = deviation_curve(eig)?;
    let worst = sup(curve.checks.iter().map(|c| c.discrepancy / c.budget));
    let mut out = vec![CheckResult::new("deviation_triple", worst, 1.0).with_note(format!(
        "discrepancy/budget, {} derivatives",
        eig.method().name()
    ))];
    if is_hermitian(eig) {
        let value = sup(curve.checks.iter().map(|c| c.value().norm()));
        out.push(CheckResult::new("deviation_selfadjoint", value, 1e-12).with_note("selfadjoint reduction"));
    }
    Ok(out)
}

/// Projector relations over the grid.
pub fn check_projectors(eig: &EigenTrajectory) -> Result<Vec<CheckResult>> {
    let n = eig.len();
    let mut idem: f64 = 0.0;
    let mut so: f64 = 0.0;
    let mut os: f64 = 0.0;
    let mut herm: f64 = 0.0;
    for k in 0..n {
        let ps = eig.spectral_projector(k);
        let po = eig.orthogonal_projector(k);
        idem = idem.max(ps.idempotency_defect()).max(po.idempotency_defect());
        so = so.max((&(&ps.matrix * &po.matrix) - &po.matrix).max_abs());
        os = os.max((&(&po.matrix * &ps.matrix) - &ps.matrix).max_abs());
        herm = herm.max((&ps.matrix - &po.matrix).max_abs());
    }
    let mut out = vec![
        CheckResult::new("projector_idempotent", idem, 1e-12),
        CheckResult::new("projector_PsPo_eq_Po", so, 1e-12),
        CheckResult::new("projector_PoPs_eq_Ps", os, 1e-12),
        check_psdps(eig)?,
    ];
    if is_hermitian(eig) {
        out.push(CheckResult::new("projector_hermitian_Ps_eq_Po", herm, 1e-12).with_note("selfadjoint reduction"));
    }
    Ok(out)
}

fn psdps_sup(eig: &EigenTrajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..eig.len() {
        let ps = eig.spectral_projector(k).matrix;
        let d = derivative_projector(eig, k, ProjectorKind::Spectral)?;
        worst = worst.max((&(&ps * &d) * &ps).max_abs());
    }
    Ok(worst)
}

/// sup ‖PₛṖₛPₛ‖: with differenced projectors the budget is ten times the
/// h² truncation estimate from the 2h grid.
pub fn check_psdps(eig: &EigenTrajectory) -> Result<CheckResult> {
    let fine = psdps_sup(eig)?;
    let threshold = match eig.method() {
        DerivativeMethod::Perturbative => 1e-10,
        DerivativeMethod::FiniteDifference => 10.0 * psdps_sup(&eig.subsample(2)?)? / 4.0 + 1e-12,
    };
    Ok(CheckResult::new("projector_PsdPsPs", fine, threshold))
}

/// χ = φ_a and χ = φ*_a reduce to the two natural connections.
pub fn check_chi_reduction(eig: &EigenTrajectory) -> Result<CheckResult> {
    let left = ChiFamily::left_eigvecs();
    let right = ChiFamily::right_eigvecs();
    let mut worst: f64 = 0.0;
    for k in 0..eig.len() {
        let a_s = connection_spectral(eig, k);
        let a_o = connection_orthogonal(eig, k);
        worst = worst
            .max((connection_chi(eig, &left, k)? - a_s).norm() / (1.0 + a_s.norm()))
            .max((connection_chi(eig, &right, k)? - a_o).norm() / (1.0 + a_o.norm()));
    }
    Ok(CheckResult::new("chi_reduction", worst, 1e-12))
}

/// Seeded random χ paths used by the χ checks.
pub fn random_chi_paths(dim: usize, seed: u64, count: usize) -> Vec<ChiFamily> {
    (0..count as u64).map(|j| ChiFamily::random(dim, seed.wrapping_add(j))).collect()
}

/// Triple identity for A_s − A_χ and the wave-operator relations; masked
/// points (⟨χ|φ⟩ too small) are skipped and counted.
pub fn check_chi_identities(eig: &EigenTrajectory, chis: &[ChiFamily]) -> Result<Vec<CheckResult>> {
    let mut triple: f64 = 0.0;
    let mut wave: f64 = 0.0;
    let mut masked = 0usize;
    let h2 = eig.grid().h().powi(2);
    for chi in chis {
        for k in 0..eig.len() {
            match (chi_triple(eig, chi, k), wave_operator_check(eig, chi, k)) {
                (Ok(t), Ok(w)) => {
                    let scale = 1.0 + t.connection_difference.norm();
                    triple = triple.max(t.discrepancy() / scale);
                    wave = wave.max(w.worst() / scale);
                }
                (Err(e), _) | (_, Err(e)) if matches!(e, crate::Error::SectionSingular { .. }) => masked += 1,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
    }
    let threshold = match eig.method() {
        DerivativeMethod::Perturbative => 1e-10,
        DerivativeMethod::FiniteDifference => 1e3 * h2,
    };
    let note = format!("{} paths, {masked} masked points", chis.len());
    Ok(vec![
        CheckResult::new("chi_triple", triple, threshold).with_note(note.clone()),
        CheckResult::new("wave_operator", wave, threshold).with_note(note),
    ])
}

/// max |G_χ − G_ψ̲| over random χ paths and unmasked points, against
/// (1 + |G_ψ̲|)h² + 10·tol.
pub fn check_chi_invariance(
    section: &CyclicSectionData,
    eig: &EigenTrajectory,
    model: &HamiltonianModel,
    chis: &[ChiFamily],
    tol: f64,
) -> Result<CheckResult> {
    let h2 = section.grid().h().powi(2);
    let mut worst: f64 = 0.0;
    let mut masked = 0usize;
    for k in 0..section.len() {
        let reference = chi_generator_invariance(section, section.section(k), model, k, SectionDerivative::Analytic)?;
        let budget = (1.0 + reference.norm()) * h2 + 10.0 * tol;
        for chi in chis {
            let (x, _) = chi.at(eig, k);
            match chi_generator_invariance(section, &x, model, k, SectionDerivative::Analytic) {
                Ok(g) => worst = worst.max((g - reference).norm() / budget),
                Err(crate::Error::SectionSingular { .. }) => masked += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(CheckResult::new(format!("chi_invariance_T{}", section.t_total()), worst, 1.0)
        .with_note(format!("{} paths, {masked} masked points, residual/budget", chis.len())))
}

/// Norm laws of the three geometric factors at one T.
#[derive(Debug, Clone, PartialEq)]
pub struct NormLaws {
    /// sup |‖ψ‖²/‖ψ(0)‖² − e^{2Re dynamical_log}|/‖ψ‖² for the AA split.
    pub aa_norm: f64,
    /// sup ||e^{−∫A_o}|²⟨φ|φ⟩/⟨φ(0)|φ(0)⟩ − 1|
    pub orthogonal_neutrality: f64,
    /// sup of the relative mismatch between the dissipative part of
    /// |e^{−∫A_s}|² and |e^{−∫⟨φ*|Ṗₒ|φ⟩}|².
    pub spectral_dissipation: f64,
    /// |e^{−∫A_s}|² at s = 1.
    pub spectral_factor_end: f64,
}

pub fn norm_laws(eig: &EigenTrajectory, section: &CyclicSectionData, traj: &WavefunctionTrajectory, model: &HamiltonianModel) -> Result<NormLaws> {
    let t = section.t_total();
    let aa = aa_phase_decomposition(section, model, t)?;
    let aa_norm = sup(norm_law_residuals(&aa, traj));
    let spectral = phase_decomposition(eig, t, Convention::Spectral, None)?;
    let orthogonal = phase_decomposition(eig, t, Convention::Orthogonal, None)?;
    let n0 = eig.right(0).norm_sqr().ln();
    let orthogonal_neutrality = sup((0..eig.len()).map(|k| {
        (2.0 * orthogonal.geometric_log[k].re + eig.right(k).norm_sqr().ln() - n0).exp_m1().abs()
    }));
    let devs: Vec<C64> = (0..eig.len())
        .map(|k| {
            let d = eig.local_derivatives(k);
            d.orthogonal_dot.sandwich(eig.left(k), eig.right(k))
        })
        .collect();
    let dev_log = cumulative_integral(&devs, eig.grid().h());
    let spectral_dissipation = sup((0..eig.len()).map(|k| {
        let dissipative = 2.0 * spectral.geometric_log[k].re + eig.right(k).norm_sqr().ln() - n0;
        (dissipative + 2.0 * dev_log[k].re).exp_m1().abs()
    }));
    let last = eig.len() - 1;
    Ok(NormLaws {
        aa_norm,
        orthogonal_neutrality,
        spectral_dissipation,
        spectral_factor_end: (2.0 * spectral.geometric_log[last].re).exp(),
    })
}

/// Relative distances between ψ and the adiabatic approximations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticErrors {
    pub spectral_end: f64,
    pub orthogonal_end: f64,
    pub orthogonal_eff_end: f64,
    pub spectral_sup: f64,
    pub orthogonal_sup: f64,
    pub orthogonal_eff_sup: f64,
}

/// Errors of ψₛ, ψₒ (with λ_a) and ψₒ (with λ_eff) for ψ launched from φ_a(0).
pub fn adiabatic_errors(eig: &EigenTrajectory, traj: &WavefunctionTrajectory) -> Result<AdiabaticErrors> {
    let wf = adiabatic_wavefunctions(eig, traj.t_total())?;
    let dist = |logs: &[C64], k: usize| relative_distance(traj.scaled_state(k), traj.log_scale(k), logs[k], eig.right(k));
    let n = eig.len() - 1;
    let curve = |logs: &[C64]| sup((0..=n).map(|k| dist(logs, k)));
    Ok(AdiabaticErrors {
        spectral_end: dist(&wf.spectral.total_log, n),
        orthogonal_end: dist(&wf.orthogonal_bare.total_log, n),
        orthogonal_eff_end: dist(&wf.orthogonal_eff.total_log, n),
        spectral_sup: curve(&wf.spectral.total_log),
        orthogonal_sup: curve(&wf.orthogonal_bare.total_log),
        orthogonal_eff_sup: curve(&wf.orthogonal_eff.total_log),
    })
}

/// ‖U_T Pₛ(0) − Pₛ(s_k)U_T‖/‖U_T‖ at every grid point.
pub fn intertwining_defects(model: &HamiltonianModel, eig: &EigenTrajectory, t_total: f64, tol: f64) -> Result<Vec<f64>> {
    let u = evolution_operator(model, t_total, eig.grid(), tol)?;
    let p0 = eig.spectral_projector(0).matrix;
    Ok((0..u.len())
        .map(|k| {
            let uk: &CMatrix = u.scaled_matrix(k);
            let ps = eig.spectral_projector(k).matrix;
            (&(uk * &p0) - &(&ps * uk)).operator_norm() / uk.operator_norm()
        })
        .collect())
}

/// Sup-over-s superadiabatic diagnostics at one T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperadiabaticSummary {
    pub spectral_gap: f64,
    pub orthogonal_gap: f64,
    pub eigen_residual: f64,
    pub spectral_correction: f64,
    pub orthogonal_correction: f64,
}

impl SuperadiabaticSummary {
    pub fn of(sys: &SuperadiabaticSystem) -> Self {
        Self {
            spectral_gap: sys.sup(|k| sys.spectral_expectation_gap(k).norm()),
            orthogonal_gap: sys.sup(|k| sys.orthogonal_expectation_gap(k).norm()),
            eigen_residual: sys.sup(|k| sys.eigen_residual(k)),
            spectral_correction: sys.sup(|k| sys.spectral_connection_correction(k).norm()),
            orthogonal_correction: sys.sup(|k| sys.orthogonal_connection_correction(k).norm()),
        }
    }
}

/// All T-dependent measurements of one scan point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub t_total: f64,
    pub adiabatic: AdiabaticErrors,
    /// ‖U_TPₛ(0) − Pₛ(1)U_T‖/‖U_T‖
    pub intertwining_end: f64,
    /// sup_s |⟨ψ̲|ψ̲̇⟩/⟨ψ̲|ψ̲⟩ − ⟨φ|φ̇⟩/⟨φ|φ⟩|, ψ launched from φ⁽¹⁾(0).
    pub aa_orthogonal_gap: f64,
    pub superadiabatic: SuperadiabaticSummary,
    pub cyclicity_residual: f64,
    pub log_mu: C64,
}

/// AA section for ψ launched from the superadiabatic vector φ⁽¹⁾(0).
pub fn superadiabatic_section(
    model: &HamiltonianModel,
    eig: &EigenTrajectory,
    sys: &SuperadiabaticSystem,
    tol: f64,
    section_opts: &SectionOptions,
) -> Result<(WavefunctionTrajectory, CyclicSectionData)> {
    let traj = propagate(model, sys.t_total, &sys.phi1[0], eig.grid(), tol)?;
    let section = build_local_section_with(&traj, eig, section_opts)?;
    Ok((traj, section))
}

pub fn scan_point(model: &HamiltonianModel, eig: &EigenTrajectory, t_total: f64, tol: f64) -> Result<ScanPoint> {
    scan_point_with(model, eig, t_total, tol, &SectionOptions::default())
}

pub fn scan_point_with(
    model: &HamiltonianModel,
    eig: &EigenTrajectory,
    t_total: f64,
    tol: f64,
    section_opts: &SectionOptions,
) -> Result<ScanPoint> {
    let traj = propagate(model, t_total, eig.right(0), eig.grid(), tol)?;
    let adiabatic = adiabatic_errors(eig, &traj)?;
    let intertwining_end = *intertwining_defects(model, eig, t_total, tol)?.last().expect("nonempty grid");
    let sys = superadiabatic_system(eig, t_total)?;
    let (_, section) = superadiabatic_section(model, eig, &sys, tol, section_opts)?;
    let aa_orthogonal_gap = sup((0..eig.len()).map(|k| (aa_connection(&section, k) - connection_orthogonal(eig, k)).norm()));
    Ok(ScanPoint {
        t_total,
        adiabatic,
        intertwining_end,
        aa_orthogonal_gap,
        superadiabatic: SuperadiabaticSummary::of(&sys),
        cyclicity_residual: section.cyclicity_residual(),
        log_mu: section.log_mu(),
    })
}

/// Measured ratio of a quantity between T and 2T.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioVerdict {
    pub quantity: String,
    pub t: f64,
    pub t_doubled: f64,
    pub ratio: f64,
    pub window: (f64, f64),
    pub passed: bool,
}

impl RatioVerdict {
    pub fn new(quantity: impl Into<String>, t: f64, t_doubled: f64, ratio: f64, window: (f64, f64)) -> Self {
        Self {
            quantity: quantity.into(),
            t,
            t_doubled,
            ratio,
            window,
            passed: ratio >= window.0 && ratio <= window.1,
        }
    }
}

/// Quantities of a [`ScanPoint`] with their expected order in 1/T.
/// Name, expected ratio window and accessor of one scanned quantity.
pub type ScanQuantity = (&'static str, (f64, f64), fn(&ScanPoint) -> f64);

pub fn scan_quantities() -> Vec<ScanQuantity> {
    vec![
        ("psi_s_error_end", FIRST_ORDER_WINDOW, |p| p.adiabatic.spectral_end),
        ("psi_s_error_sup", FIRST_ORDER_WINDOW, |p| p.adiabatic.spectral_sup),
        ("intertwining_end", FIRST_ORDER_WINDOW, |p| p.intertwining_end),
        ("aa_orthogonal_gap", FIRST_ORDER_WINDOW, |p| p.aa_orthogonal_gap),
        ("superadiabatic_spectral_gap", SECOND_ORDER_WINDOW, |p| p.superadiabatic.spectral_gap),
        ("superadiabatic_orthogonal_gap", SECOND_ORDER_WINDOW, |p| p.superadiabatic.orthogonal_gap),
        ("superadiabatic_spectral_correction", FIRST_ORDER_WINDOW, |p| p.superadiabatic.spectral_correction),
        ("superadiabatic_orthogonal_correction", FIRST_ORDER_WINDOW, |p| p.superadiabatic.orthogonal_correction),
    ]
}

/// Ratio verdicts for every pair (T, 2T) present in `points`.
pub fn ratio_verdicts(points: &[ScanPoint]) -> Vec<RatioVerdict> {
    let mut out = Vec::new();
    for (name, window, f) in scan_quantities() {
        for p in points {
            if let Some(q) = points.iter().find(|q| (q.t_total - 2.0 * p.t_total).abs() <= 1e-9 * p.t_total) {
                out.push(RatioVerdict::new(name, p.t_total, q.t_total, f(q) / f(p), window));
            }
        }
    }
    out
}

/// Options of [`consistency_checks`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOptions {
    pub t_list: Vec<f64>,
    pub seed: u64,
    pub chi_paths: usize,
    pub tol: f64,
    /// Added to λ_eff before the compensation check.
    pub lambda_eff_corruption: C64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            t_list: vec![100.0, 400.0],
            seed: 0,
            chi_paths: 5,
            tol: crate::propagation::DEFAULT_TOL,
            lambda_eff_corruption: C64::new(0.0, 0.0),
        }
    }
}

/// Every consistency relation, in a fixed order.
pub fn consistency_checks(model: &HamiltonianModel, eig: &EigenTrajectory, opts: &ConsistencyOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for &t in &opts.t_list {
        out.push(check_compensation(eig, t, opts.lambda_eff_corruption));
    }
    out.extend(check_deviation(eig)?);
    out.extend(check_projectors(eig)?);
    out.push(check_chi_reduction(eig)?);
    let chis = random_chi_paths(eig.dim(), opts.seed, opts.chi_paths);
    out.extend(check_chi_identities(eig, &chis)?);
    // the invariance and the norm laws do not need a closed path
    let section_opts = SectionOptions {
        allow_noncyclic: true,
        ..Default::default()
    };
    // differenced connections carry an O(h²) error into the accumulated logs
    let norm_threshold = match eig.method() {
        DerivativeMethod::Perturbative => 1e-8,
        DerivativeMethod::FiniteDifference => 1e-8 + 10.0 * eig.grid().h().powi(2),
    };
    for &t in &opts.t_list {
        let sys = superadiabatic_system(eig, t)?;
        let (traj, section) = superadiabatic_section(model, eig, &sys, opts.tol, &section_opts)?;
        let open = section.hamiltonian_residual() > section_opts.cyclicity_threshold;
        let mark = |c: CheckResult| if open { c.with_note("open path") } else { c };
        out.push(mark(check_chi_invariance(&section, eig, model, &chis, opts.tol)?));
        let laws = norm_laws(eig, &section, &traj, model)?;
        out.push(mark(CheckResult::new(format!("norm_law_aa_T{t}"), laws.aa_norm, 1e-6)));
        out.push(CheckResult::new(format!("norm_law_orthogonal_T{t}"), laws.orthogonal_neutrality, norm_threshold));
        out.push(CheckResult::new(format!("norm_law_spectral_T{t}"), laws.spectral_dissipation, norm_threshold));
    }
    Ok(out)
}
