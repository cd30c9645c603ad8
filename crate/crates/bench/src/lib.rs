//! Fixtures shared by the benchmarks.

use adiaphase::{CMatrix, HamiltonianModel, TwoLevelPulseParams, C64};

pub fn pulse(w0: f64) -> HamiltonianModel {
    HamiltonianModel::two_level_pulse(TwoLevelPulseParams::default().with_w0(w0)).expect("valid parameters")
}

/// Deterministic dissipative n×n matrix: a dense coupling pattern with a
/// graded decay on the diagonal.
pub fn dissipative_matrix(n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let x = (i * j + i + j) as f64;
            out[(i, j)] = C64::new((0.3 * x).sin(), 0.0);
        }
        out[(i, i)] += C64::new(i as f64, -0.1 * (i + 1) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_dissipative() {
        let h = dissipative_matrix(6);
        let anti = h.anti_hermitian_part();
        for i in 0..6 {
            assert!(anti[(i, i)].re <= 0.0);
        }
        adiaphase::linalg::eigensystem(&h).unwrap();
    }
}
