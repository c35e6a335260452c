//! Closed-form behaviour of the variance-reduced estimator on the linear system.
//!
//! With `Ã = Aδt/ε` and `B̃ = (1 − (1 − Ã)^M)/(MÃ)` each coupled step multiplies
//! the estimate by `r = 1 + Δt(λ + (pq/A)(1 − B̃))`.

use serde::{Deserialize, Serialize};

use crate::models::LinearParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TildeConstants {
    pub a_tilde: f64,
    pub b_tilde: f64,
}

/// Rounding slack when deciding that `Ã` sits on the no-bias value 2.
const NOBIAS_SLACK: f64 = 1e-12;

pub fn tilde_constants(a: f64, delta_t_micro: f64, epsilon: f64, samples: usize) -> TildeConstants {
    let a_tilde = a * delta_t_micro / epsilon;
    let m = samples as f64;
    let b_tilde = if (a_tilde - 2.0).abs() <= NOBIAS_SLACK && samples % 2 == 0 {
        0.0
    } else {
        (1.0 - (1.0 - a_tilde).powi(samples as i32)) / (m * a_tilde)
    };
    TildeConstants { a_tilde, b_tilde }
}

/// Micro step that makes `B̃` vanish for even `M`: `δt = 2ε/A`.
pub fn nobias_micro_step(a: f64, epsilon: f64) -> f64 {
    2.0 * epsilon / a
}

/// Per-step growth factor `r` of the variance-reduced estimate.
pub fn vr_growth_factor(params: &LinearParams, delta_t: f64, tc: &TildeConstants) -> f64 {
    1.0 + delta_t * effective_rate(params, tc)
}

fn effective_rate(params: &LinearParams, tc: &TildeConstants) -> f64 {
    params.lambda + params.p * params.q / params.a * (1.0 - tc.b_tilde)
}

/// `Var[F̄ᴺ] = r^{2N} Var[F̄⁰]`
pub fn vr_variance_prediction(params: &LinearParams, delta_t: f64, tc: &TildeConstants, steps: u32, var0: f64) -> f64 {
    vr_growth_factor(params, delta_t, tc).powi(2 * steps as i32) * var0
}

/// `F̄ᴺ = rᴺ F̄⁰`
pub fn vr_estimator_path_linear(params: &LinearParams, delta_t: f64, tc: &TildeConstants, steps: u32, f_bar_0: f64) -> f64 {
    vr_growth_factor(params, delta_t, tc).powi(steps as i32) * f_bar_0
}

/// Limit of the variance-reduced macro path, `X̄∞ = X⁰ − F̄⁰/(λ + (pq/A)(1 − B̃))`.
pub fn asymptotic_bias_linear(params: &LinearParams, tc: &TildeConstants, x0: f64, f_bar_0: f64) -> f64 {
    x0 - f_bar_0 / effective_rate(params, tc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: LinearParams = LinearParams::REFERENCE;

    #[test]
    fn tilde_constants_reference() {
        let tc = tilde_constants(1.2, 1e-3, 1e-3, 50);
        assert!((tc.a_tilde - 1.2).abs() < 1e-15);
        let expected = (1.0 - (-0.2_f64).powi(50)) / 60.0;
        assert!((tc.b_tilde - expected).abs() < 1e-16);
        assert!((tc.b_tilde - 0.016_666_666_666_666_67).abs() < 1e-12);
    }

    #[test]
    fn tilde_constants_nobias() {
        let dt = nobias_micro_step(1.2, 1e-3);
        for m in [2, 10, 50, 500] {
            assert_eq!(tilde_constants(1.2, dt, 1e-3, m).b_tilde, 0.0);
        }
        // odd M does not cancel
        assert!((tilde_constants(1.2, dt, 1e-3, 51).b_tilde - 2.0 / (51.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn tilde_constants_single_sample() {
        for (a, dt) in [(1.2, 1e-3), (0.7, 2e-3), (2.0, 5e-4)] {
            assert!((tilde_constants(a, dt, 1e-3, 1).b_tilde - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nobias_steps() {
        assert!((nobias_micro_step(1.2, 1e-3) - 1.666_666_666_666_666_7e-3).abs() < 1e-18);
        assert_eq!(nobias_micro_step(2.0, 1e-3), 1e-3);
        assert_eq!(nobias_micro_step(1.0, 1e-3), 2e-3);
    }

    #[test]
    fn variance_prediction() {
        let tc = TildeConstants { a_tilde: 2.0, b_tilde: 0.0 };
        assert_eq!(vr_variance_prediction(&P, 0.02, &tc, 0, 0.3), 0.3);
        assert_eq!(vr_variance_prediction(&P, 0.02, &tc, 7, 0.0), 0.0);
        let v = vr_variance_prediction(&P, 0.02, &tc, 1, 1.0);
        assert!((v - 0.694_444_444_444_444_4).abs() < 1e-12);
    }

    #[test]
    fn estimator_path() {
        let tc = TildeConstants { a_tilde: 2.0, b_tilde: 0.0 };
        let f0 = -8.333_333_333_333_334;
        assert_eq!(vr_estimator_path_linear(&P, 0.02, &tc, 0, f0), f0);
        let f1 = vr_estimator_path_linear(&P, 0.02, &tc, 1, f0);
        assert!((f1 + 6.944_444_444_444_445).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_bias() {
        let f0 = P.averaged_rate();
        let zero = TildeConstants { a_tilde: 2.0, b_tilde: 0.0 };
        assert!(asymptotic_bias_linear(&P, &zero, 1.0, f0).abs() < 1e-15);
        let tc = tilde_constants(1.2, 1e-3, 1e-3, 50);
        let limit = asymptotic_bias_linear(&P, &tc, 1.0, f0);
        // closed form −(pq/A) B̃ X⁰ / (λ + (pq/A)(1 − B̃))
        let alt = -(2.0 / 1.2) * tc.b_tilde / (-10.0 + 2.0 / 1.2 * (1.0 - tc.b_tilde));
        assert!((limit - alt).abs() < 1e-15);
        assert!((limit - 0.003_322_259_136_212_6).abs() < 1e-9, "{limit}");
        assert_eq!(asymptotic_bias_linear(&P, &tc, 0.7, 0.0), 0.7);
    }

    #[test]
    fn path_decays_geometrically() {
        let tc = tilde_constants(1.2, 1e-3, 1e-3, 50);
        let r = vr_growth_factor(&P, 0.05, &tc);
        let v = |n| vr_variance_prediction(&P, 0.05, &tc, n, 2.0).ln();
        for n in [1, 10, 40] {
            let slope = v(n + 1) - v(n);
            assert!((slope - 2.0 * r.ln()).abs() <= 0.05 * (2.0 * r.ln()).abs());
        }
        assert!(vr_estimator_path_linear(&P, 0.05, &tc, 400, 1.0).abs() < 1e-80);
    }
}
