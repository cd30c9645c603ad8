//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use adiaphase::audit::{
    adiabatic_errors, check_chi_invariance, check_compensation, check_projectors, intertwining_defects, norm_laws,
    random_chi_paths, superadiabatic_section, SuperadiabaticSummary, FIRST_ORDER_WINDOW, SECOND_ORDER_WINDOW,
};
use adiaphase::linalg::eigensystem;
use adiaphase::models::{min_eigenvalue_distance, parse_model};
use adiaphase::phases::{aa_connection, connection_orthogonal, deviation_curve, deviation_sample, superadiabatic_system};
use adiaphase::propagation::{propagate, SectionOptions, DEFAULT_TOL};
use adiaphase::spectral::{riesz_projector_contour, track_eigensystem, track_eigensystem_with, Contour, DEFAULT_CONTOUR_NODES};
use adiaphase::{DerivativeMethod, EigenTrajectory, HamiltonianModel, Result, TimeGrid, TwoLevelPulseParams};
use adiaphase_cli::{simulate, ExperimentSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEPS: usize = 2000;

/// Peak |A_s − A_o| on the 2000-step grid, from the first verified run.
const PEAK_BASELINES: [(f64, f64); 5] = [
    (0.5, 6.945_711_675_742_226e3),
    (1.0, 6.638_252_272_048_621e-1),
    (2.0, 1.258_545_141_158_985e-1),
    (4.0, 2.967_118_716_396_842e-2),
    (8.0, 7.313_634_762_565_374e-3),
];
const BASELINE_RTOL: f64 = 1e-6;

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn pulse(w0: f64) -> HamiltonianModel {
    HamiltonianModel::two_level_pulse(TwoLevelPulseParams::default().with_w0(w0)).expect("valid parameters")
}

fn grid() -> TimeGrid {
    TimeGrid::new(STEPS).expect("grid")
}

fn tracked(w0: f64) -> Result<(HamiltonianModel, EigenTrajectory)> {
    let model = pulse(w0);
    let eig = track_eigensystem(&model, grid(), 1)?;
    Ok((model, eig))
}

/// Real symmetric pulse with a fixed splitting.
fn hermitian_control() -> HamiltonianModel {
    parse_model(
        "kind = matrix_table\ndim = 2\n\
         entry.0.1 = 1 0 * gaussian(0.5, 0.16)\n\
         entry.1.0 = 1 0 * gaussian(0.5, 0.16)\n\
         entry.1.1 = 1 0\n",
    )
    .expect("control model parses")
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn in_window(r: f64, w: (f64, f64)) -> bool {
    r >= w.0 && r <= w.1
}

fn ratios(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0]).collect()
}

fn fmt_ratios(r: &[f64]) -> String {
    r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn compensation() -> Result<Outcome> {
    let (_, eig) = tracked(1.0)?;
    let checks: Vec<_> = [100.0, 400.0].iter().map(|&t| check_compensation(&eig, t, 0.0.into())).collect();
    let worst = sup(checks.iter().map(|c| c.residual));
    outcome(
        checks.iter().all(|c| c.passed),
        format!("max residual/(|Tλ|+1) = {worst:.2e} (≤ 1e-12), T ∈ {{100, 400}}"),
    )
}

fn triple_sup(eig: &EigenTrajectory) -> f64 {
    sup((0..eig.len()).map(|k| deviation_sample(eig, k).discrepancy()))
}

fn deviation_triple() -> Result<Outcome> {
    let model = pulse(1.0);
    let fd = track_eigensystem_with(&model, grid(), 1, DerivativeMethod::FiniteDifference)?;
    let fine = triple_sup(&fd);
    let coarse = triple_sup(&fd.subsample(2)?);
    let ratio = fine / coarse;
    let pert = tracked(1.0)?.1;
    let pert_ok = deviation_curve(&pert)?.masked_count() == 0;
    let control = hermitian_control();
    let herm = track_eigensystem(&control, grid(), 1)?;
    let herm_worst = sup((0..herm.len()).map(|k| deviation_sample(&herm, k).magnitude()));
    outcome(
        ratio <= 0.35 && pert_ok && herm_worst <= 1e-12,
        format!(
            "differenced D(h)/D(2h) = {ratio:.3} (≤ 0.35), perturbative within round-off: {pert_ok}, \
             Hermitian control max = {herm_worst:.1e} (≤ 1e-12)"
        ),
    )
}

fn peak_ordering() -> Result<Outcome> {
    let mut rows = Vec::new();
    for (w0, baseline) in PEAK_BASELINES {
        let (model, eig) = tracked(w0)?;
        let gap = min_eigenvalue_distance(&model, &eig.grid())?;
        let (peak, _) = deviation_curve(&eig)?.peak().unwrap_or((f64::NAN, f64::NAN));
        rows.push((gap, w0, peak, baseline));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ordered = rows.windows(2).all(|w| w[0].2 > w[1].2);
    let baselines = rows.iter().all(|r| ((r.2 - r.3) / r.3).abs() <= BASELINE_RTOL);
    let listing = rows
        .iter()
        .map(|r| format!("w0={} gap={:.3} peak={:.4e}", r.1, r.0, r.2))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(
        ordered && baselines,
        format!("strictly ordered: {ordered}, baselines within {BASELINE_RTOL:e}: {baselines} [{listing}]"),
    )
}

fn adiabatic_scaling() -> Result<Outcome> {
    let (model, eig) = tracked(0.5)?;
    let ts = [200.0, 400.0, 800.0, 1600.0];
    let mut psi = Vec::new();
    let mut inter = Vec::new();
    for &t in &ts {
        let traj = propagate(&model, t, eig.right(0), eig.grid(), DEFAULT_TOL)?;
        psi.push(adiabatic_errors(&eig, &traj)?.spectral_end);
        inter.push(*intertwining_defects(&model, &eig, t, DEFAULT_TOL)?.last().expect("grid"));
    }
    let (rp, ri) = (ratios(&psi), ratios(&inter));
    let ok = rp.iter().chain(&ri).all(|&r| in_window(r, FIRST_ORDER_WINDOW));
    outcome(
        ok,
        format!(
            "w0 = 0.5, T = 200..1600: ψₛ error ratios [{}], intertwining ratios [{}] (want [0.3, 0.7])",
            fmt_ratios(&rp),
            fmt_ratios(&ri)
        ),
    )
}

fn superadiabatic_orders() -> Result<Outcome> {
    let (_, eig) = tracked(1.0)?;
    let summaries = [200.0, 400.0, 800.0]
        .iter()
        .map(|&t| Ok(SuperadiabaticSummary::of(&superadiabatic_system(&eig, t)?)))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&SuperadiabaticSummary) -> f64| ratios(&summaries.iter().map(f).collect::<Vec<_>>());
    let gaps = [col(|s| s.spectral_gap), col(|s| s.orthogonal_gap)];
    let corr = [col(|s| s.spectral_correction), col(|s| s.orthogonal_correction)];
    let ok = gaps.iter().flatten().all(|&r| in_window(r, SECOND_ORDER_WINDOW))
        && corr.iter().flatten().all(|&r| in_window(r, FIRST_ORDER_WINDOW));
    outcome(
        ok,
        format!(
            "gap ratios [{}] / [{}], correction ratios [{}] / [{}]",
            fmt_ratios(&gaps[0]),
            fmt_ratios(&gaps[1]),
            fmt_ratios(&corr[0]),
            fmt_ratios(&corr[1])
        ),
    )
}

fn norm_law_suite() -> Result<Outcome> {
    let (model, eig) = tracked(1.0)?;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for t in [100.0, 400.0] {
        let sys = superadiabatic_system(&eig, t)?;
        let (traj, section) = superadiabatic_section(&model, &eig, &sys, DEFAULT_TOL, &SectionOptions::default())?;
        let laws = norm_laws(&eig, &section, &traj, &model)?;
        worst = (
            worst.0.max(laws.aa_norm),
            worst.1.max(laws.orthogonal_neutrality),
            worst.2.max(laws.spectral_dissipation),
        );
    }
    outcome(
        worst.0 <= 1e-6 && worst.1 <= 1e-8 && worst.2 <= 1e-8,
        format!(
            "AA norm {:.1e} (≤ 1e-6), orthogonal neutrality {:.1e} (≤ 1e-8), spectral dissipation {:.1e} (≤ 1e-8)",
            worst.0, worst.1, worst.2
        ),
    )
}

fn chi_invariance() -> Result<Outcome> {
    let (model, eig) = tracked(1.0)?;
    let chis = random_chi_paths(eig.dim(), 0, 5);
    let mut worst: f64 = 0.0;
    for t in [100.0, 400.0] {
        let sys = superadiabatic_system(&eig, t)?;
        let (_, section) = superadiabatic_section(&model, &eig, &sys, DEFAULT_TOL, &SectionOptions::default())?;
        worst = worst.max(check_chi_invariance(&section, &eig, &model, &chis, DEFAULT_TOL)?.residual);
    }
    outcome(worst <= 1.0, format!("5 seeded paths, max residual/budget = {worst:.2e} (≤ 1)"))
}

fn aa_limit() -> Result<Outcome> {
    let (model, eig) = tracked(1.0)?;
    let mut gaps = Vec::new();
    for t in [200.0, 400.0, 800.0] {
        let sys = superadiabatic_system(&eig, t)?;
        let (_, section) = superadiabatic_section(&model, &eig, &sys, DEFAULT_TOL, &SectionOptions::default())?;
        gaps.push(sup((0..eig.len()).map(|k| (aa_connection(&section, k) - connection_orthogonal(&eig, k)).norm())));
    }
    let r = ratios(&gaps);
    outcome(
        r.iter().all(|&x| in_window(x, FIRST_ORDER_WINDOW)),
        format!("sup gap {:.3e} → {:.3e}, ratios [{}]", gaps[0], gaps[2], fmt_ratios(&r)),
    )
}

fn riesz_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s: f64 = rng.random_range(0.0..1.0);
        let w0: f64 = rng.random_range(1.0..8.0);
        let level = rng.random_range(0..2usize);
        let model = pulse(w0);
        let h = model.evaluate(s);
        let contour = Contour::around(&h, level)?;
        let p = riesz_projector_contour(&model, s, &contour)?;
        let outer = eigensystem(&h)?.spectral_projector(level);
        worst = worst.max((&p.matrix - &outer).max_abs());
    }
    outcome(worst <= 1e-10, format!("20 samples, {DEFAULT_CONTOUR_NODES} nodes, max deviation {worst:.1e} (≤ 1e-10)"))
}

fn projector_algebra() -> Result<Outcome> {
    let fd = track_eigensystem_with(&pulse(1.0), grid(), 1, DerivativeMethod::FiniteDifference)?;
    let herm = track_eigensystem(&hermitian_control(), grid(), 1)?;
    let mut checks = check_projectors(&fd)?;
    checks.extend(check_projectors(&herm)?.into_iter().filter(|c| c.name.contains("hermitian")));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let listing = checks
        .iter()
        .map(|c| format!("{} {:.1e}/{:.1e}", c.name, c.residual, c.threshold))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(failed.is_empty() && checks.len() == 5, format!("differenced derivatives: {listing}"))
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let p = e.expect("entry").path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).expect("artifact"))
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Result<Outcome> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let run = |name: &str| {
        let mut spec = ExperimentSpec::builtin(TwoLevelPulseParams::default(), vec![100.0, 400.0], tmp.path().join(name));
        spec.seed = 11;
        simulate(&spec).map(|_| read_tree(&spec.out))
    };
    let (a, b) = match (run("a"), run("b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("simulate failed: {e}")),
    };
    let bytes: usize = a.iter().map(|f| f.1.len()).sum();
    outcome(a == b && a.len() == 5, format!("{} files, {bytes} bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("compensation identity", compensation),
        ("deviation triple equality", deviation_triple),
        ("deviation peak ordering", peak_ordering),
        ("adiabatic theorem scaling", adiabatic_scaling),
        ("superadiabatic orders", superadiabatic_orders),
        ("norm laws", norm_law_suite),
        ("chi invariance", chi_invariance),
        ("AA adiabatic limit", aa_limit),
        ("Riesz contour oracle", riesz_oracle),
        ("projector algebra", projector_algebra),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name} ({:.2}s): {detail}", i + 1, t0.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failures,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
