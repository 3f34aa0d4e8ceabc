//! Smoothly-clamped C2 log barrier and the slack-variable closed form.
//!
//! b(d, dhat) = -(d - dhat)^2 log(d / dhat) for 0 < d < dhat, else 0.
//! The clamp gives b = b' = b'' = 0 at d = dhat and b -> inf as d -> 0+.

use crate::error::SimError;
use crate::Result;

fn check_d(d: f64) -> Result<()> {
    if d <= 0.0 {
        return Err(SimError::InteriorViolation { d });
    }
    Ok(())
}

pub fn barrier(d: f64, d_hat: f64) -> Result<f64> {
    check_d(d)?;
    if d >= d_hat {
        return Ok(0.0);
    }
    let t = d - d_hat;
    Ok(-t * t * (d / d_hat).ln())
}

/// db/dd
pub fn barrier_d(d: f64, d_hat: f64) -> Result<f64> {
    check_d(d)?;
    if d >= d_hat {
        return Ok(0.0);
    }
    let t = d - d_hat;
    Ok(-2.0 * t * (d / d_hat).ln() - t * t / d)
}

/// d2b/dd2
pub fn barrier_dd(d: f64, d_hat: f64) -> Result<f64> {
    check_d(d)?;
    if d >= d_hat {
        return Ok(0.0);
    }
    let t = d - d_hat;
    Ok(-2.0 * (d / d_hat).ln() - 4.0 * t / d + t * t / (d * d))
}

/// Minimizer of the per-pair augmentation term over s >= 0:
/// s_i = max(-mu_i / sigma - dhat + d_i, 0)
pub fn slack_closed_form(mu: f64, sigma: f64, d_hat: f64, d: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    (-mu / sigma - d_hat + d).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_at_and_beyond_offset() {
        assert_eq!(barrier(1e-3, 1e-3).unwrap(), 0.0);
        assert_eq!(barrier(2e-3, 1e-3).unwrap(), 0.0);
        assert_eq!(barrier_d(1e-3, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn direct_evaluation_at_half_offset() {
        // d = 5e-4, dhat = 1e-3: -(d - dhat)^2 ln(0.5)
        let b = barrier(5e-4, 1e-3).unwrap();
        let expected = -(0.5f64.ln()) * (5e-4f64).powi(2);
        assert!((b - expected).abs() < 1e-18, "{b} vs {expected}");
        assert!((b - 1.7329e-7).abs() < 1e-11);
    }

    #[test]
    fn divergence_toward_zero() {
        assert!(barrier(1e-12, 1e-3).unwrap() > barrier(1e-6, 1e-3).unwrap());
        assert!(matches!(barrier(0.0, 1e-3), Err(SimError::InteriorViolation { .. })));
        assert!(matches!(barrier(-1.0, 1e-3), Err(SimError::InteriorViolation { .. })));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d_hat = 1e-3;
        let d = 0.3 * d_hat;
        let eps = 1e-9;
        let fd1 = (barrier(d + eps, d_hat).unwrap() - barrier(d - eps, d_hat).unwrap()) / (2.0 * eps);
        let an1 = barrier_d(d, d_hat).unwrap();
        assert!((fd1 - an1).abs() / an1.abs() < 1e-6, "{fd1} vs {an1}");
        let fd2 =
            (barrier_d(d + eps, d_hat).unwrap() - barrier_d(d - eps, d_hat).unwrap()) / (2.0 * eps);
        let an2 = barrier_dd(d, d_hat).unwrap();
        assert!((fd2 - an2).abs() / an2.abs() < 1e-5, "{fd2} vs {an2}");
    }

    #[test]
    fn c2_clamp_continuity() {
        let d_hat = 1e-3;
        let just_below = d_hat * (1.0 - 1e-7);
        assert!(barrier(just_below, d_hat).unwrap().abs() < 1e-16);
        assert!(barrier_d(just_below, d_hat).unwrap().abs() < 1e-9);
        assert!(barrier_dd(just_below, d_hat).unwrap().abs() < 1e-3);
    }

    #[test]
    fn monotone_decreasing_on_interior() {
        let d_hat = 1e-3;
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let d = d_hat * k as f64 / 200.0;
            let b = barrier(d, d_hat).unwrap();
            assert!(b < prev, "barrier not strictly decreasing at d={d}");
            prev = b;
        }
    }

    #[test]
    fn slack_boundary_cases() {
        assert_eq!(slack_closed_form(0.0, 1.0, 1e-3, 1e-3), 0.0);
        assert!((slack_closed_form(0.0, 1.0, 1e-3, 2e-3) - 1e-3).abs() < 1e-18);
    }

    /// Per-pair augmentation term of the slack subproblem as a function of s.
    fn aug_term(mu: f64, sigma: f64, c: f64) -> f64 {
        // c = dhat + s - d; linearized multiplier plus quadratic penalty.
        mu * c + 0.5 * sigma * c * c
    }

    #[test]
    fn slack_matches_grid_minimization() {
        // Oracle: brute-force grid over s with 1e-6 spacing.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let d_hat = 1e-3;
        for _ in 0..100 {
            let mu = (rng.gen::<f64>() - 0.5) * 2e-3;
            let sigma = 0.5 + rng.gen::<f64>() * 10.0;
            let d = rng.gen::<f64>() * 3e-3 + 1e-6;
            let s_star = slack_closed_form(mu, sigma, d_hat, d);
            let spacing = 1e-6;
            let mut best_s = 0.0;
            let mut best = f64::INFINITY;
            let mut s = 0.0;
            while s < 5e-3 {
                let val = aug_term(mu, sigma, d_hat + s - d);
                if val < best {
                    best = val;
                    best_s = s;
                }
                s += spacing;
            }
            assert!(
                (s_star - best_s).abs() <= spacing,
                "closed form {s_star} vs grid {best_s} (mu={mu}, sigma={sigma}, d={d})"
            );
        }
    }

    #[test]
    fn slack_zeroes_subgradient_when_positive() {
        // If s > 0 the unconstrained stationarity mu + sigma (dhat + s - d) = 0 holds.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let mu = (rng.gen::<f64>() - 0.5) * 2e-3;
            let sigma = 0.5 + rng.gen::<f64>() * 10.0;
            let d_hat = 1e-3;
            let d = rng.gen::<f64>() * 3e-3 + 1e-6;
            let s = slack_closed_form(mu, sigma, d_hat, d);
            if s > 0.0 {
                let grad = mu + sigma * (d_hat + s - d);
                assert!(grad.abs() < 1e-12, "subgradient {grad} at s={s}");
            }
        }
    }
}
