use std::path::Path;

use adiaphase::audit::{
    adiabatic_errors, check_compensation, consistency_checks, scan_point_with, scan_quantities, AdiabaticErrors,
    ConsistencyOptions, ScanPoint,
};
use adiaphase::models::min_eigenvalue_distance;
use adiaphase::phases::{
    aa_phase_decomposition, connection_orthogonal, connection_spectral, deviation_curve, effective_eigenvalue,
    phase_decomposition, ChiFamily, DeviationCurve,
};
use adiaphase::propagation::{build_local_section_with, propagate, SectionOptions, WavefunctionTrajectory};
use adiaphase::spectral::{track_eigensystem, TimeGrid};
use adiaphase::{Convention, EigenTrajectory, PhaseDecomposition, C64};
use rayon::prelude::*;

use crate::output::{ArtifactWriter, Row, Table};
use crate::report::*;
use crate::spec::{ExperimentSpec, ModelCase, ModelSource};
use crate::CliError;

pub const THREADS_ENV: &str = "ADIAPHASE_THREADS";

/// Shift added to λ_eff by the `--corrupt-lambda-eff` hook.
pub const LAMBDA_EFF_CORRUPTION: f64 = 1e-6;

pub const REPORT_FILE: &str = "report.json";

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV}={v} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

/// Runs `f` over `items` in the pool; results keep input order and the
/// first error in that order wins.
fn par_map<T: Sync, R: Send>(
    pool: &rayon::ThreadPool,
    items: &[T],
    f: impl Fn(&T) -> Result<R, CliError> + Sync,
) -> Result<Vec<R>, CliError> {
    pool.install(|| items.par_iter().map(&f).collect::<Vec<_>>()).into_iter().collect()
}

fn context(w0: Option<f64>, t: Option<f64>) -> String {
    match (w0, t) {
        (Some(w), Some(t)) => format!(" (w0 = {w}, T = {t})"),
        (Some(w), None) => format!(" (w0 = {w})"),
        (None, Some(t)) => format!(" (T = {t})"),
        (None, None) => String::new(),
    }
}

fn spec_record(spec: &ExperimentSpec, cases: &[ModelCase]) -> SpecRecord {
    SpecRecord {
        model: match &spec.model {
            ModelSource::Builtin(_) => cases[0].model.name().to_string(),
            ModelSource::File(p) => p.display().to_string(),
        },
        n_steps: spec.n_steps,
        t_list: spec.durations().into_iter().map(Num).collect(),
        w0_list: spec.w0_list.as_ref().map(|_| cases.iter().filter_map(|c| c.w0).map(Num).collect()),
        level: spec.level,
        seed: spec.seed,
        tol: Num(spec.tol),
    }
}

struct Tracked {
    case: ModelCase,
    eig: EigenTrajectory,
}

fn track(spec: &ExperimentSpec, case: &ModelCase) -> Result<Tracked, CliError> {
    let grid = TimeGrid::new(spec.n_steps).map_err(CliError::stage("grid"))?;
    let eig = track_eigensystem(&case.model, grid, spec.level)
        .map_err(CliError::stage(format!("eigenvector tracking{}", context(case.w0, None))))?;
    Ok(Tracked { case: case.clone(), eig })
}

fn prepare(spec: &ExperimentSpec) -> Result<(Vec<ModelCase>, rayon::ThreadPool), CliError> {
    spec.validate()?;
    let cases = spec.model_cases()?;
    Ok((cases, thread_pool()?))
}

/// Writes `report` under its command key, keeping other commands' sections.
fn write_report(writer: &mut ArtifactWriter, report: &mut RunReport) -> Result<(), CliError> {
    let path = writer.root().join(REPORT_FILE);
    let mut files = writer.written().to_vec();
    files.push(REPORT_FILE.into());
    report.files = files;
    let mut root = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .filter(|v| v.is_object())
        .unwrap_or_else(|| serde_json::json!({}));
    let section = serde_json::to_value(&*report).expect("report serializes");
    root.as_object_mut().expect("object").insert(report.command.clone(), section);
    let mut text = serde_json::to_string_pretty(&root).expect("report serializes");
    text.push('\n');
    writer.text(&path, &text)
}

fn adiabatic_record(e: &AdiabaticErrors) -> AdiabaticRecord {
    AdiabaticRecord {
        psi_s_error_end: Num(e.spectral_end),
        psi_o_error_end: Num(e.orthogonal_end),
        psi_o_eff_error_end: Num(e.orthogonal_eff_end),
        psi_s_error_sup: Num(e.spectral_sup),
        psi_o_error_sup: Num(e.orthogonal_sup),
        psi_o_eff_error_sup: Num(e.orthogonal_eff_sup),
    }
}

fn model_record(t: &Tracked, curve: &DeviationCurve) -> Result<ModelRecord, CliError> {
    let model = &t.case.model;
    let grid = t.eig.grid();
    let gap = min_eigenvalue_distance(model, &grid)
        .map_err(CliError::stage(format!("eigenvalue distance{}", context(t.case.w0, None))))?;
    let peak = curve.peak();
    Ok(ModelRecord {
        w0: t.case.w0.map(Num),
        name: model.name().to_string(),
        parameters: model.parameters().iter().map(|(k, v)| (k.clone(), Num(*v))).collect(),
        derivative_method: t.eig.method().name().to_string(),
        min_eigenvalue_distance: Num(gap),
        model_cyclicity_residual: Num(model.cyclicity_residual()),
        deviation: DeviationSummary {
            peak: peak.map(|p| Num(p.0)),
            peak_s: peak.map(|p| Num(p.1)),
            masked_points: curve.masked_count(),
        },
    })
}

fn open_section() -> SectionOptions {
    SectionOptions {
        allow_noncyclic: true,
        ..Default::default()
    }
}

fn trajectory_table(traj: &WavefunctionTrajectory) -> Table {
    let dim = traj.scaled_state(0).dim();
    let mut header = vec!["s".to_string()];
    for j in 0..dim {
        header.push(format!("psi{j}_re"));
        header.push(format!("psi{j}_im"));
    }
    header.push("norm".into());
    header.push("log_norm".into());
    let mut table = Table::new(header);
    let grid = traj.grid();
    for k in 0..traj.len() {
        let psi = traj.state(k);
        let mut row = Row::new().num(grid.point(k));
        for z in psi.iter() {
            row = row.complex(*z);
        }
        table.push(row.num(traj.norm(k)).num(traj.log_norm(k)));
    }
    table
}

fn phases_table(eig: &EigenTrajectory, curve: &DeviationCurve, t_total: f64) -> Table {
    let mut table = Table::with_complex_columns(&["s"], &["A_s", "A_o", "deviation", "lambda_a", "lambda_eff"]);
    for k in 0..eig.len() {
        table.push(
            Row::new()
                .num(eig.s(k))
                .complex(connection_spectral(eig, k))
                .complex(connection_orthogonal(eig, k))
                .maybe_complex(curve.value(k))
                .complex(eig.eigenvalue(k))
                .complex(effective_eigenvalue(eig, t_total, k)),
        );
    }
    table
}

fn convention_record(d: &PhaseDecomposition) -> ConventionRecord {
    let n = d.len() - 1;
    ConventionRecord {
        convention: d.convention.name().to_string(),
        geometric_log_end: d.geometric_log[n].into(),
        dynamical_log_end: d.dynamical_log[n].into(),
        total_log_end: d.total_log[n].into(),
    }
}

struct SimulationOutput {
    record: SimulationRecord,
    trajectory: Table,
    phases: Table,
}

fn file_name(stem: &str, t: f64) -> String {
    format!("{stem}_{t}.csv")
}

fn simulate_point(
    spec: &ExperimentSpec,
    t: &Tracked,
    curve: &DeviationCurve,
    t_total: f64,
) -> Result<SimulationOutput, CliError> {
    let (eig, model, w0) = (&t.eig, &t.case.model, t.case.w0);
    let ctx = context(w0, Some(t_total));
    let traj = propagate(model, t_total, eig.right(0), eig.grid(), spec.tol)
        .map_err(CliError::stage(format!("propagation{ctx}")))?;
    let adiabatic = adiabatic_errors(eig, &traj).map_err(CliError::stage(format!("adiabatic comparison{ctx}")))?;
    let chi = ChiFamily::random(eig.dim(), spec.seed);
    let mut conventions = Vec::new();
    for (conv, chi) in [
        (Convention::Spectral, None),
        (Convention::Orthogonal, None),
        (Convention::Chi, Some(&chi)),
    ] {
        let d = phase_decomposition(eig, t_total, conv, chi)
            .map_err(CliError::stage(format!("{} phases{ctx}", conv.name())))?;
        conventions.push(convention_record(&d));
    }
    let section = build_local_section_with(&traj, eig, &open_section())
        .map_err(CliError::stage(format!("local section{ctx}")))?;
    let aa = aa_phase_decomposition(&section, model, t_total)
        .map_err(CliError::stage(format!("nonadiabatic phases{ctx}")))?;
    conventions.push(convention_record(&aa));
    let shift = (0..eig.len())
        .map(|k| (effective_eigenvalue(eig, t_total, k) - eig.eigenvalue(k)).norm())
        .fold(0.0, f64::max);
    let compensation = check_compensation(eig, t_total, C64::new(0.0, 0.0));
    let dir = spec.case_dir(w0);
    let rel = |name: String| {
        let p = dir.join(&name);
        p.strip_prefix(&spec.out).unwrap_or(&p).to_string_lossy().replace('\\', "/")
    };
    Ok(SimulationOutput {
        record: SimulationRecord {
            w0: w0.map(Num),
            t_total: Num(t_total),
            conventions,
            adiabatic: adiabatic_record(&adiabatic),
            lambda_eff_max_shift: Num(shift),
            compensation_residual: Num(compensation.residual),
            section_cyclicity_residual: Num(section.cyclicity_residual()),
            log_mu: section.log_mu().into(),
            final_norm: Num(traj.norm(traj.len() - 1)),
            trajectory_file: rel(file_name("trajectory", t_total)),
            phases_file: rel(file_name("phases", t_total)),
        },
        trajectory: trajectory_table(&traj),
        phases: phases_table(eig, curve, t_total),
    })
}

fn ordering(models: &[ModelRecord]) -> Option<OrderingRecord> {
    let mut pts: Vec<(f64, f64, f64)> = models
        .iter()
        .map(|m| (m.min_eigenvalue_distance.0, m.w0.map_or(f64::NAN, |n| n.0), m.deviation.peak.map_or(f64::NAN, |n| n.0)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ordered = pts.windows(2).all(|w| w[0].2 > w[1].2);
    Some(OrderingRecord {
        w0_by_distance: pts.iter().map(|p| Num(p.1)).collect(),
        peaks: pts.iter().map(|p| Num(p.2)).collect(),
        status: if ordered { Status::Pass } else { Status::Fail },
    })
}

/// Propagates every (w0, T) point and writes trajectories, phase curves
/// and the report.
pub fn simulate(spec: &ExperimentSpec) -> Result<RunReport, CliError> {
    let (cases, pool) = prepare(spec)?;
    let tracked = par_map(&pool, &cases, |c| track(spec, c))?;
    let curves = par_map(&pool, &tracked, |t| {
        deviation_curve(&t.eig).map_err(CliError::stage(format!("deviation{}", context(t.case.w0, None))))
    })?;
    let models = tracked.iter().zip(&curves).map(|(t, c)| model_record(t, c)).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, f64)> = (0..tracked.len()).flat_map(|i| spec.durations().into_iter().map(move |t| (i, t))).collect();
    let outputs = par_map(&pool, &jobs, |&(i, t)| simulate_point(spec, &tracked[i], &curves[i], t))?;

    let mut writer = ArtifactWriter::new(&spec.out)?;
    let mut report = RunReport::new("simulate", spec_record(spec, &cases));
    for (&(i, t), out) in jobs.iter().zip(outputs) {
        let dir = spec.case_dir(tracked[i].case.w0);
        writer.csv(&dir.join(file_name("trajectory", t)), &out.trajectory)?;
        writer.csv(&dir.join(file_name("phases", t)), &out.phases)?;
        report.records.push(out.record);
    }
    if spec.w0_list.is_some() {
        let mut header = vec!["s".to_string()];
        header.extend(cases.iter().map(|c| format!("deviation_abs_w0_{}", c.w0.unwrap_or(f64::NAN))));
        let mut table = Table::new(header);
        let grid = tracked[0].eig.grid();
        for k in 0..grid.len() {
            let row = curves.iter().fold(Row::new().num(grid.point(k)), |row, c| {
                row.num(c.value(k).map_or(f64::NAN, |v| v.norm()))
            });
            table.push(row);
        }
        writer.csv(&spec.out.join("deviation_scan.csv"), &table)?;
    }
    report.ordering = ordering(&models);
    report.models = models;
    write_report(&mut writer, &mut report)?;
    Ok(report)
}

fn scan_table(points: &[ScanPoint]) -> Table {
    let mut table = Table::new([
        "T",
        "psi_s_error_rel",
        "psi_o_error_rel_lambda_a",
        "psi_o_error_rel_lambda_eff",
        "psi_s_error_rel_sup",
        "psi_o_error_rel_lambda_a_sup",
        "psi_o_error_rel_lambda_eff_sup",
        "intertwining_end",
        "aa_orthogonal_gap",
        "superadiabatic_spectral_gap",
        "superadiabatic_orthogonal_gap",
        "superadiabatic_eigen_residual",
        "superadiabatic_spectral_correction",
        "superadiabatic_orthogonal_correction",
        "section_cyclicity_residual",
    ]);
    for p in points {
        let (a, s) = (&p.adiabatic, &p.superadiabatic);
        table.push(
            Row::new()
                .num(p.t_total)
                .num(a.spectral_end)
                .num(a.orthogonal_end)
                .num(a.orthogonal_eff_end)
                .num(a.spectral_sup)
                .num(a.orthogonal_sup)
                .num(a.orthogonal_eff_sup)
                .num(p.intertwining_end)
                .num(p.aa_orthogonal_gap)
                .num(s.spectral_gap)
                .num(s.orthogonal_gap)
                .num(s.eigen_residual)
                .num(s.spectral_correction)
                .num(s.orthogonal_correction)
                .num(p.cyclicity_residual),
        );
    }
    table
}

fn scan_record(w0: Option<f64>, p: &ScanPoint) -> ScanRecord {
    let s = &p.superadiabatic;
    ScanRecord {
        w0: w0.map(Num),
        t_total: Num(p.t_total),
        adiabatic: adiabatic_record(&p.adiabatic),
        intertwining_end: Num(p.intertwining_end),
        aa_orthogonal_gap: Num(p.aa_orthogonal_gap),
        superadiabatic_spectral_gap: Num(s.spectral_gap),
        superadiabatic_orthogonal_gap: Num(s.orthogonal_gap),
        superadiabatic_eigen_residual: Num(s.eigen_residual),
        superadiabatic_spectral_correction: Num(s.spectral_correction),
        superadiabatic_orthogonal_correction: Num(s.orthogonal_correction),
        section_cyclicity_residual: Num(p.cyclicity_residual),
    }
}

/// Ratio verdicts for every (T, 2T) pair; pairs where both values sit
/// below `floor` are reported as such instead of judged.
pub fn scan_verdicts(w0: Option<f64>, points: &[ScanPoint], floor: f64) -> Vec<RatioRecord> {
    let mut out = Vec::new();
    for (name, window, f) in scan_quantities() {
        for p in points {
            let Some(q) = points.iter().find(|q| (q.t_total - 2.0 * p.t_total).abs() <= 1e-9 * p.t_total) else {
                continue;
            };
            let (a, b) = (f(p), f(q));
            let ratio = b / a;
            let status = if a <= floor && b <= floor {
                Status::Floor
            } else if ratio >= window.0 && ratio <= window.1 {
                Status::Pass
            } else {
                Status::Fail
            };
            out.push(RatioRecord {
                quantity: name.to_string(),
                w0: w0.map(Num),
                t: Num(p.t_total),
                t_doubled: Num(q.t_total),
                value: Num(a),
                value_doubled: Num(b),
                ratio: Num(ratio),
                window: [Num(window.0), Num(window.1)],
                status,
            });
        }
    }
    out
}

/// Multiple of the integrator tolerance below which scan values are noise.
pub const FLOOR_FACTOR: f64 = 1e3;

/// Measures the T-dependence of the adiabatic errors and superadiabatic
/// residuals; writes `tscan.csv` per model and the ratio verdicts.
pub fn tscan(spec: &ExperimentSpec) -> Result<RunReport, CliError> {
    let (cases, pool) = prepare(spec)?;
    let durations = spec.durations();
    if !durations.iter().any(|t| durations.iter().any(|u| (u - 2.0 * t).abs() <= 1e-9 * t)) {
        return Err(CliError::Usage("T list needs at least one pair (T, 2T)".into()));
    }
    let tracked = par_map(&pool, &cases, |c| track(spec, c))?;
    let jobs: Vec<(usize, f64)> = (0..tracked.len()).flat_map(|i| durations.iter().map(move |&t| (i, t))).collect();
    let points = par_map(&pool, &jobs, |&(i, t)| {
        let tr = &tracked[i];
        scan_point_with(&tr.case.model, &tr.eig, t, spec.tol, &open_section())
            .map_err(CliError::stage(format!("scan point{}", context(tr.case.w0, Some(t)))))
    })?;

    let mut writer = ArtifactWriter::new(&spec.out)?;
    let mut report = RunReport::new("tscan", spec_record(spec, &cases));
    for (i, tr) in tracked.iter().enumerate() {
        let pts: Vec<ScanPoint> = jobs.iter().zip(&points).filter(|(j, _)| j.0 == i).map(|(_, p)| p.clone()).collect();
        writer.csv(&spec.case_dir(tr.case.w0).join("tscan.csv"), &scan_table(&pts))?;
        report.scan.extend(pts.iter().map(|p| scan_record(tr.case.w0, p)));
        report.ratio_tests.extend(scan_verdicts(tr.case.w0, &pts, FLOOR_FACTOR * spec.tol));
    }
    write_report(&mut writer, &mut report)?;
    Ok(report)
}

/// Evaluates every consistency relation and lists each with its residual.
pub fn consistency(spec: &ExperimentSpec) -> Result<RunReport, CliError> {
    let (cases, pool) = prepare(spec)?;
    let tracked = par_map(&pool, &cases, |c| track(spec, c))?;
    let opts = ConsistencyOptions {
        t_list: spec.durations(),
        seed: spec.seed,
        tol: spec.tol,
        lambda_eff_corruption: C64::new(if spec.corrupt_lambda_eff { LAMBDA_EFF_CORRUPTION } else { 0.0 }, 0.0),
        ..Default::default()
    };
    let results = par_map(&pool, &tracked, |t| {
        consistency_checks(&t.case.model, &t.eig, &opts)
            .map_err(CliError::stage(format!("consistency checks{}", context(t.case.w0, None))))
    })?;
    let mut writer = ArtifactWriter::new(&spec.out)?;
    let mut report = RunReport::new("consistency", spec_record(spec, &cases));
    for (t, checks) in tracked.iter().zip(&results) {
        report.checks.extend(checks.iter().map(|c| CheckRecord::new(t.case.w0, c)));
    }
    write_report(&mut writer, &mut report)?;
    Ok(report)
}

/// Path of the report inside an output directory.
pub fn report_path(out: &Path) -> std::path::PathBuf {
    out.join(REPORT_FILE)
}
