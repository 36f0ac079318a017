use serde::{Deserialize, Serialize};

use super::{response_loss, sigmoid, Ability, IrtError, ItemParams};

const MAX_NEWTON_STEPS: usize = 100;
const STEP_TOLERANCE: f64 = 1e-10;

/// MAP ability estimate; `no_data` marks the prior-mean fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub ability: Ability,
    pub no_data: bool,
}

fn neg_log_posterior(responses: &[(ItemParams, bool)], theta: f64) -> f64 {
    responses
        .iter()
        .map(|(p, y)| response_loss(p.discrimination * (theta - p.difficulty), *y))
        .sum::<f64>()
        + 0.5 * theta * theta
}

/// Maximum a posteriori theta under a standard-normal prior, with item
/// parameters held fixed.
///
/// The log-posterior is strictly concave, so Newton's method with step
/// halving converges from the prior mean.
pub fn estimate_theta(responses: &[(ItemParams, bool)]) -> Result<ThetaEstimate, IrtError> {
    for (p, _) in responses {
        p.validate()?;
    }
    if responses.is_empty() {
        return Ok(ThetaEstimate {
            ability: Ability {
                theta: 0.0,
                standard_error: Some(1.0),
            },
            no_data: true,
        });
    }

    let mut theta = 0.0;
    let mut info = 1.0;
    for _ in 0..MAX_NEWTON_STEPS {
        let mut grad = theta;
        info = 1.0;
        for (p, y) in responses {
            let a = p.discrimination;
            let prob = sigmoid(a * (theta - p.difficulty));
            grad += (prob - f64::from(u8::from(*y))) * a;
            info += prob * (1.0 - prob) * a * a;
        }
        let step = grad / info;
        let f0 = neg_log_posterior(responses, theta);
        let mut t = 1.0;
        let mut next = theta - step;
        while neg_log_posterior(responses, next) > f0 && t > 1e-12 {
            t *= 0.5;
            next = theta - t * step;
        }
        let moved = (next - theta).abs();
        theta = next;
        if moved < STEP_TOLERANCE {
            break;
        }
    }
    Ok(ThetaEstimate {
        ability: Ability {
            theta,
            standard_error: Some(1.0 / info.sqrt()),
        },
        no_data: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(a: f64, d: f64) -> ItemParams {
        ItemParams::new(format!("i{a}_{d}"), a, d)
    }

    /// Grid maximization of the same posterior, used as an oracle.
    fn grid_map(responses: &[(ItemParams, bool)], step: f64) -> f64 {
        let n = (12.0 / step) as usize;
        (0..=n)
            .map(|k| -6.0 + k as f64 * step)
            .min_by(|x, y| {
                neg_log_posterior(responses, *x)
                    .partial_cmp(&neg_log_posterior(responses, *y))
                    .unwrap()
            })
            .unwrap()
    }

    #[test]
    fn no_responses_returns_prior_mean() {
        let est = estimate_theta(&[]).unwrap();
        assert_eq!(est.ability.theta, 0.0);
        assert!(est.no_data);
    }

    #[test]
    fn symmetric_pair_peaks_at_zero() {
        let est = estimate_theta(&[(item(1.0, -1.0), true), (item(1.0, 1.0), false)]).unwrap();
        assert!(est.ability.theta.abs() < 1e-4, "{}", est.ability.theta);
        assert!(!est.no_data);
    }

    #[test]
    fn five_correct_on_centred_items() {
        let responses: Vec<_> = (0..5).map(|_| (item(1.0, 0.0), true)).collect();
        let est = estimate_theta(&responses).unwrap();
        // Root of 5(1 - σ(θ)) = θ; mpmath gives 1.17750526..., grid at 1e-4 gives 1.1775.
        assert!((est.ability.theta - 1.177_505_264).abs() < 1e-6);
        assert!((est.ability.theta - grid_map(&responses, 1e-4)).abs() < 1e-4);
    }

    #[test]
    fn all_wrong_stays_finite() {
        let responses: Vec<_> = (0..15).map(|k| (item(2.0, k as f64 / 5.0 - 1.5), false)).collect();
        let est = estimate_theta(&responses).unwrap();
        assert!(est.ability.theta.is_finite() && est.ability.theta < 0.0);
        assert!(est.ability.theta > -6.0);
    }

    #[test]
    fn deterministic() {
        let responses = vec![(item(1.3, 0.2), true), (item(0.7, -0.4), false), (item(2.1, 1.0), true)];
        assert_eq!(estimate_theta(&responses).unwrap(), estimate_theta(&responses).unwrap());
    }

    #[test]
    fn agrees_with_grid_on_mixed_pattern() {
        let responses = vec![
            (item(0.8, -1.2), true),
            (item(1.9, 0.3), false),
            (item(1.1, 0.9), true),
            (item(2.4, -0.2), true),
        ];
        let est = estimate_theta(&responses).unwrap();
        assert!((est.ability.theta - grid_map(&responses, 1e-4)).abs() < 1e-4);
    }

    #[test]
    fn invalid_item_is_rejected() {
        assert!(estimate_theta(&[(item(-1.0, 0.0), true)]).is_err());
    }
}
