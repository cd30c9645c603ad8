//! Randomised invariants over models, matrices and parameters.

use adiaphase::linalg::{eigensystem, solve_linear, CMatrix, CVector, C64};
use adiaphase::models::parse_model;
use adiaphase::phases::{
    chi_triple, compensation_bound, compensation_sample, connection_chi, connection_orthogonal, connection_spectral,
    deviation, phase_decomposition, ChiFamily, Convention,
};
use adiaphase::quadrature::cumulative_integral;
use adiaphase::spectral::{
    orthogonal_projector, riesz_projector_contour, spectral_projector, track_eigensystem, Contour, TimeGrid,
};
use adiaphase::{HamiltonianModel, TwoLevelPulseParams};
use proptest::prelude::*;

fn pulse(w0: f64) -> HamiltonianModel {
    HamiltonianModel::two_level_pulse(TwoLevelPulseParams::default().with_w0(w0)).unwrap()
}

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

/// Random 3×3 matrix shifted so that (H − H†)/2i ≤ 0.
fn dissipative_matrix() -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(complex(), 9).prop_map(|entries| {
        let a = CMatrix::from_row_major(entries);
        let shift = a.anti_hermitian_part().operator_norm();
        &a - &CMatrix::identity(3).scale(C64::new(0.0, shift))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigensystem_is_biorthonormal(h in dissipative_matrix()) {
        let sys = eigensystem(&h).unwrap();
        prop_assert!(sys.biorthogonality_defect() < 1e-10);
        let (right, left) = sys.residuals(&h);
        prop_assert!(right < 1e-10 && left < 1e-10);
        for b in 0..3 {
            prop_assert!((sys.right[b].norm() - 1.0).abs() < 1e-12);
        }
        for pair in sys.eigenvalues.windows(2) {
            prop_assert!((pair[0].re, pair[0].im) <= (pair[1].re, pair[1].im));
        }
    }

    #[test]
    fn spectral_projectors_resolve_identity(h in dissipative_matrix()) {
        let sys = eigensystem(&h).unwrap();
        let mut sum = CMatrix::zeros(3);
        for b in 0..3 {
            let p = sys.spectral_projector(b);
            prop_assert!((&(&p * &p) - &p).max_abs() < 1e-9);
            sum = &sum + &p;
        }
        prop_assert!((&sum - &CMatrix::identity(3)).max_abs() < 1e-9);
    }

    #[test]
    fn lu_solve_inverts(entries in prop::collection::vec(complex(), 9), rhs in prop::collection::vec(complex(), 3)) {
        let a = &CMatrix::from_row_major(entries) + &CMatrix::identity(3).scale(C64::new(3.0, 0.0));
        let b = CVector::from_vec(rhs);
        let x = solve_linear(&a, &b).unwrap();
        prop_assert!((&a.mul_vec(&x) - &b).norm() < 1e-12 * (1.0 + b.norm()));
    }

    #[test]
    fn riesz_contour_matches_outer_product(s in 0.0..1.0f64, w0 in 1.0..8.0f64, level in 0usize..2) {
        let model = pulse(w0);
        let h = model.evaluate(s);
        let contour = Contour::around(&h, level).unwrap();
        let p = riesz_projector_contour(&model, s, &contour).unwrap();
        let sys = eigensystem(&h).unwrap();
        prop_assert!((&p.matrix - &sys.spectral_projector(level)).max_abs() < 1e-10);
    }

    #[test]
    fn compensation_holds_for_any_duration(w0 in 1.0..8.0f64, t in 1.0..5000.0f64) {
        let eig = track_eigensystem(&pulse(w0), TimeGrid::new(200).unwrap(), 1).unwrap();
        for k in (0..eig.len()).step_by(13) {
            prop_assert!(compensation_sample(&eig, t, k).residual() <= compensation_bound(&eig, t, k));
        }
    }

    #[test]
    fn projector_relations_on_pulse(w0 in 1.0..8.0f64, level in 0usize..2) {
        let eig = track_eigensystem(&pulse(w0), TimeGrid::new(100).unwrap(), level).unwrap();
        for k in 0..eig.len() {
            let ps = spectral_projector(&eig, k).matrix;
            let po = orthogonal_projector(&eig, k).matrix;
            prop_assert!((&(&ps * &po) - &po).max_abs() < 1e-12);
            prop_assert!((&(&po * &ps) - &ps).max_abs() < 1e-12);
            prop_assert!((&(&po * &po) - &po).max_abs() < 1e-12);
        }
    }

    #[test]
    fn chi_paths_reduce_and_satisfy_triple(w0 in 1.0..8.0f64, seed in any::<u64>()) {
        let eig = track_eigensystem(&pulse(w0), TimeGrid::new(200).unwrap(), 1).unwrap();
        let chi = ChiFamily::random(2, seed);
        for k in (0..eig.len()).step_by(7) {
            let a_s = connection_spectral(&eig, k);
            let a_o = connection_orthogonal(&eig, k);
            let left = connection_chi(&eig, &ChiFamily::left_eigvecs(), k).unwrap();
            let right = connection_chi(&eig, &ChiFamily::right_eigvecs(), k).unwrap();
            prop_assert!((left - a_s).norm() < 1e-12 && (right - a_o).norm() < 1e-12);
            if let Ok(t) = chi_triple(&eig, &chi, k) {
                prop_assert!(t.discrepancy() < 1e-10 * (1.0 + t.connection_difference.norm()));
            }
        }
    }

    #[test]
    fn deviation_survives_regauging(a in -3.0..3.0f64, b in 0.5..2.0f64) {
        let eig = track_eigensystem(&pulse(2.0), TimeGrid::new(150).unwrap(), 1).unwrap();
        let g: Vec<C64> = eig.grid().points().map(|s| C64::from_polar(b + s, a * s)).collect();
        let gd: Vec<C64> = eig
            .grid()
            .points()
            .map(|s| C64::from_polar(1.0, a * s) * C64::new(1.0, a * (b + s)))
            .collect();
        let r = eig.regauge(&g, &gd).unwrap();
        for k in 0..eig.len() {
            prop_assert!((deviation(&eig, k).unwrap() - deviation(&r, k).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn decomposition_bookkeeping(w0 in 1.0..8.0f64, t in 1.0..2000.0f64) {
        let eig = track_eigensystem(&pulse(w0), TimeGrid::new(100).unwrap(), 1).unwrap();
        for conv in [Convention::Spectral, Convention::Orthogonal] {
            let d = phase_decomposition(&eig, t, conv, None).unwrap();
            for k in 0..d.len() {
                prop_assert_eq!(d.total_log[k], d.geometric_log[k] + d.dynamical_log[k]);
            }
        }
    }

    #[test]
    fn quadrature_exact_on_quadratics(c0 in complex(), c1 in complex(), c2 in complex(), n in 4usize..200) {
        let h = 1.0 / n as f64;
        let f: Vec<C64> = (0..=n).map(|k| { let s = k as f64 * h; c0 + c1 * s + c2 * s * s }).collect();
        let integral = cumulative_integral(&f, h);
        for (k, v) in integral.iter().enumerate() {
            let s = k as f64 * h;
            let exact = c0 * s + c1 * s * s / 2.0 + c2 * s * s * s / 3.0;
            prop_assert!((v - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn config_round_trip(gamma in 0.1..3.0f64, w0 in 0.0..10.0f64, s0 in 0.2..0.8f64, sigma in 0.05..0.5f64) {
        let text = format!("kind = two_level_pulse\ndim = 2\ngamma = {gamma:e}\nw0 = {w0:e}\ns0 = {s0:e}\nsigma = {sigma:e}\n");
        let parsed = parse_model(&text).unwrap();
        let direct = HamiltonianModel::two_level_pulse(TwoLevelPulseParams { gamma, w0, s0, sigma }).unwrap();
        for s in [0.0, 0.3, 0.7, 1.0] {
            prop_assert_eq!(parsed.evaluate(s), direct.evaluate(s));
        }
    }
}
