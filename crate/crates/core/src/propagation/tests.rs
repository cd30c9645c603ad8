use super::*;
use crate::linalg::{ONE, ZERO};
use crate::models::TwoLevelPulseParams;
use crate::spectral::track_eigensystem;

fn pulse(w0: f64) -> HamiltonianModel {
    HamiltonianModel::two_level_pulse(TwoLevelPulseParams::default().with_w0(w0)).unwrap()
}

fn diag_model(entries: &[C64]) -> HamiltonianModel {
    HamiltonianModel::constant(CMatrix::diagonal(entries))
}

#[test]
fn constant_diagonal_gives_exact_exponential() {
    let lam = C64::new(0.7, -0.05);
    let model = diag_model(&[lam, C64::new(-1.0, 0.0)]);
    let grid = TimeGrid::new(100).unwrap();
    let t = 50.0;
    let traj = propagate(&model, t, &CVector::basis(2, 0), grid, 1e-10).unwrap();
    assert_eq!(traj.state(0), CVector::basis(2, 0));
    for (k, s) in grid.points().enumerate() {
        let exact = (C64::new(0.0, -t) * lam * s).exp();
        let psi = traj.state(k);
        assert!((psi[0] - exact).norm() < 1e-8, "s = {s}");
        assert!(psi[1].norm() < 1e-14);
    }
}

#[test]
fn decoupled_resonance_decays_at_half_width() {
    let grid = TimeGrid::new(200).unwrap();
    let t = 400.0;
    let traj = propagate(&pulse(0.0), t, &CVector::basis(2, 1), grid, 1e-10).unwrap();
    for (k, s) in grid.points().enumerate() {
        // ‖ψ(s)‖ = e^{−TΓs/2}, far below f64 range at s = 1 on the linear scale
        let expected = -t * 0.5 * s;
        assert!((traj.log_norm(k) - expected).abs() < 1e-8 * (1.0 + expected.abs()), "s = {s}");
    }
}

#[test]
fn norm_never_grows_for_dissipative_generator() {
    let tol = 1e-9;
    let traj = propagate(&pulse(1.0), 200.0, &CVector::from_vec(vec![ONE, ONE]), TimeGrid::new(500).unwrap(), tol).unwrap();
    let n0 = traj.norm(0);
    for k in 0..traj.len() {
        assert!(traj.norm(k) <= n0 * (1.0 + 10.0 * tol));
    }
}

#[test]
fn invalid_inputs() {
    let m = pulse(1.0);
    let g = TimeGrid::new(10).unwrap();
    assert!(propagate(&m, -1.0, &CVector::basis(2, 0), g, 1e-8).is_err());
    assert!(propagate(&m, 1.0, &CVector::zeros(2), g, 1e-8).is_err());
    assert!(propagate(&m, 1.0, &CVector::basis(3, 0), g, 1e-8).is_err());
}

#[test]
fn evolution_operator_of_constant_diagonal() {
    let lams = [C64::new(1.0, -0.1), C64::new(-0.5, 0.0)];
    let model = diag_model(&lams);
    let grid = TimeGrid::new(20).unwrap();
    let t = 30.0;
    let u = evolution_operator(&model, t, grid, 1e-10).unwrap();
    assert_eq!(u.matrix(0), CMatrix::identity(2));
    for (k, s) in grid.points().enumerate() {
        let exact = CMatrix::diagonal(&[
            (C64::new(0.0, -t) * lams[0] * s).exp(),
            (C64::new(0.0, -t) * lams[1] * s).exp(),
        ]);
        assert!((&u.matrix(k) - &exact).max_abs() < 1e-8);
    }
}

#[test]
fn evolution_operator_columns_match_propagation() {
    let model = pulse(1.0);
    let grid = TimeGrid::new(100).unwrap();
    let tol = 1e-10;
    let t = 100.0;
    let u = evolution_operator(&model, t, grid, tol).unwrap();
    let psi0 = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
    let traj = propagate(&model, t, &psi0, grid, tol).unwrap();
    for k in 0..grid.len() {
        let a = u.matrix(k).mul_vec(&psi0);
        let b = traj.state(k);
        assert!((&a - &b).norm() <= 10.0 * tol * (1.0 + b.norm()) + 1e-9 * b.norm(), "k {k}");
        assert!(u.matrix(k).operator_norm() <= 1.0 + 10.0 * tol);
    }
}

#[test]
fn refined_grid_agrees_with_coarse_grid() {
    let model = pulse(2.0);
    let tol = 1e-10;
    let coarse = evolution_operator(&model, 80.0, TimeGrid::new(10).unwrap(), tol).unwrap();
    let fine = evolution_operator(&model, 80.0, TimeGrid::new(40).unwrap(), tol).unwrap();
    for k in 0..coarse.len() {
        let d = &coarse.matrix(k) - &fine.matrix(4 * k);
        assert!(d.max_abs() < 10.0 * tol * 100.0, "k {k}: {}", d.max_abs());
    }
}

#[test]
fn stationary_eigenray_section() {
    let lam = C64::new(0.3, -0.2);
    let model = diag_model(&[lam, C64::new(2.0, 0.0)]);
    let grid = TimeGrid::new(50).unwrap();
    let t = 10.0;
    let eig = track_eigensystem(&model, grid, 0).unwrap();
    let traj = propagate(&model, t, &CVector::basis(2, 0), grid, 1e-10).unwrap();
    let sec = build_local_section(&traj, &eig).unwrap();
    assert_eq!(sec.f(0), ONE);
    for k in 0..sec.len() {
        assert!((sec.section(k) - &CVector::basis(2, 0)).norm() < 1e-12);
        assert!(sec.section_dot(k).norm() < 1e-12);
    }
    assert!(sec.cyclicity_residual() < 1e-10);
    assert!((sec.mu() - (C64::new(0.0, -t) * lam).exp()).norm() < 1e-8);
    // f(s) undoes the dynamical factor: f = e^{iTλs}
    let k = 25;
    let expected = C64::new(0.0, t) * lam * grid.point(k);
    assert!((sec.log_f(k) - expected).norm() < 1e-8);
}

#[test]
fn decoupled_bound_state_section_is_constant() {
    let model = pulse(0.0);
    let grid = TimeGrid::new(100).unwrap();
    let eig = track_eigensystem(&model, grid, 1).unwrap();
    assert!(eig.eigenvalue(0).norm() < 1e-15);
    let traj = propagate(&model, 300.0, &CVector::basis(2, 0), grid, 1e-10).unwrap();
    let sec = build_local_section(&traj, &eig).unwrap();
    for k in 0..sec.len() {
        assert!((sec.section(k) - &CVector::basis(2, 0)).norm() < 1e-12);
    }
    assert!((sec.mu() - ONE).norm() < 1e-10);
    assert!(sec.closure() < 1e-12);
}

#[test]
fn analytic_section_derivative_matches_differences() {
    let model = pulse(1.0);
    let err = |n: usize| {
        let grid = TimeGrid::new(n).unwrap();
        let eig = track_eigensystem(&model, grid, 1).unwrap();
        let traj = propagate(&model, 50.0, eig.right(0), grid, 1e-12).unwrap();
        let sec = build_local_section(&traj, &eig).unwrap();
        (0..sec.len())
            .map(|k| (sec.section_dot_fd(k) - sec.section_dot(k).clone()).norm())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(1000), err(2000));
    assert!(fine < 1e-2, "{fine}");
    assert!((0.2..0.3).contains(&(fine / coarse)), "{coarse} {fine}");
}

#[test]
fn non_cyclic_model_needs_override() {
    let params = TwoLevelPulseParams {
        s0: 0.3,
        ..Default::default()
    };
    let model = HamiltonianModel::two_level_pulse(params).unwrap();
    let grid = TimeGrid::new(100).unwrap();
    let eig = track_eigensystem(&model, grid, 1).unwrap();
    let traj = propagate(&model, 10.0, eig.right(0), grid, 1e-9).unwrap();
    assert!(matches!(build_local_section(&traj, &eig), Err(Error::NotCyclic { .. })));
    let opts = SectionOptions {
        allow_noncyclic: true,
        ..Default::default()
    };
    let sec = build_local_section_with(&traj, &eig, &opts).unwrap();
    assert!(sec.hamiltonian_residual() > 0.1);
}

#[test]
fn orthogonal_launch_makes_section_singular() {
    let model = diag_model(&[ZERO, C64::new(1.0, 0.0)]);
    let grid = TimeGrid::new(10).unwrap();
    let eig = track_eigensystem(&model, grid, 0).unwrap();
    let traj = propagate(&model, 1.0, &CVector::basis(2, 1), grid, 1e-9).unwrap();
    assert!(matches!(build_local_section(&traj, &eig), Err(Error::SectionSingular { .. })));
}
