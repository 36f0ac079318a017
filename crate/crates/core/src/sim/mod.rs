//! Simulated students and transcript analytics.
//!
//! Simulated abilities are static: a student answers every item by a
//! Bernoulli draw on the 2PL curve, which is all the selection-mechanism
//! and recovery checks need.

mod cohort;
mod transcripts;
mod walk;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use thiserror::Error;

pub use cohort::{run_cohort, CohortReport, SelectionPolicy, SimStudent, SimTrajectory};
pub use transcripts::{count_words, transcript_stats, transcript_stats_from_paths, TranscriptError, TranscriptStats};
pub use walk::{random_walk, WalkReport};

use crate::irt::{
    calibrate, compute_auc, prob_correct, Ability, CalibrationConfig, InteractionRecord, IrtError, ItemParams,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Irt(#[from] IrtError),
    #[error(transparent)]
    Bank(#[from] crate::item_bank::BankError),
}

/// Reproducible per-seed generator; `stream` separates independent
/// students drawn from the same seed.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn standard_normal() -> Normal<f64> {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// One Bernoulli response on the 2PL curve.
pub fn simulate_response(params: &ItemParams, theta: f64, rng: &mut impl Rng) -> Result<bool, IrtError> {
    let p = prob_correct(params, &Ability::new(theta))?;
    Ok(rng.random::<f64>() < p)
}

/// A complete-design response log with the generating parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLog {
    pub records: Vec<InteractionRecord>,
    pub items: Vec<ItemParams>,
    pub thetas: BTreeMap<String, f64>,
}

pub fn student_id(k: usize) -> String {
    format!("s{k:04}")
}

pub fn item_id(k: usize) -> String {
    format!("i{k:03}")
}

/// Every student answers every item. theta and d are standard normal,
/// a is uniform on [0.5, 2.5].
pub fn synthetic_log(n_students: usize, n_items: usize, seed: u64) -> Result<SyntheticLog, SimError> {
    if n_students == 0 || n_items == 0 {
        return Err(SimError::EmptyInput("need at least one student and one item"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = standard_normal();
    let slope = Uniform::new_inclusive(0.5, 2.5).expect("valid range");
    let items: Vec<ItemParams> = (0..n_items)
        .map(|k| {
            let a = slope.sample(&mut rng);
            let d = normal.sample(&mut rng);
            ItemParams::new(item_id(k), a, d)
        })
        .collect();
    let thetas: Vec<(String, f64)> = (0..n_students)
        .map(|k| (student_id(k), normal.sample(&mut rng)))
        .collect();
    let mut records = Vec::with_capacity(n_students * n_items);
    for (sid, theta) in &thetas {
        for item in &items {
            records.push(InteractionRecord {
                student_id: sid.clone(),
                item_id: item.item_id.clone(),
                correct: simulate_response(item, *theta, &mut rng)?,
            });
        }
    }
    Ok(SyntheticLog {
        records,
        items,
        thetas: thetas.into_iter().collect(),
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub pearson_difficulty: f64,
    pub pearson_discrimination: f64,
    pub pearson_theta: f64,
    pub held_out_auc: f64,
    pub n_train: usize,
    pub n_held_out: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits on a random share of the log and scores the rest.
pub fn recovery_check(
    log: &SyntheticLog,
    held_out_fraction: f64,
    seed: u64,
    config: &CalibrationConfig,
) -> Result<RecoveryReport, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for r in &log.records {
        if rng.random::<f64>() < held_out_fraction {
            held.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    let fit = calibrate(&train, config)?;

    let (mut true_d, mut fit_d, mut true_a, mut fit_a) = (vec![], vec![], vec![], vec![]);
    for item in &log.items {
        if let Some(p) = fit.item_params.get(&item.item_id) {
            true_d.push(item.difficulty);
            fit_d.push(p.difficulty);
            true_a.push(item.discrimination);
            fit_a.push(p.discrimination);
        }
    }
    let (mut true_t, mut fit_t) = (vec![], vec![]);
    for (sid, theta) in &log.thetas {
        if let Some(a) = fit.student_abilities.get(sid) {
            true_t.push(*theta);
            fit_t.push(a.theta);
        }
    }

    let (mut scores, mut outcomes) = (vec![], vec![]);
    for r in &held {
        if let (Some(p), Some(a)) = (
            fit.item_params.get(&r.item_id),
            fit.student_abilities.get(&r.student_id),
        ) {
            scores.push(prob_correct(p, a)?);
            outcomes.push(r.correct);
        }
    }
    Ok(RecoveryReport {
        pearson_difficulty: pearson(&true_d, &fit_d),
        pearson_discrimination: pearson(&true_a, &fit_a),
        pearson_theta: pearson(&true_t, &fit_t),
        held_out_auc: compute_auc(&scores, &outcomes)?,
        n_train: train.len(),
        n_held_out: scores.len(),
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_log_is_reproducible_and_complete() {
        let a = synthetic_log(20, 7, 3).unwrap();
        let b = synthetic_log(20, 7, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 140);
        assert_ne!(a, synthetic_log(20, 7, 4).unwrap());
        assert!(a.items.iter().all(|p| (0.5..=2.5).contains(&p.discrimination)));
        assert!(synthetic_log(0, 3, 1).is_err());
    }

    #[test]
    fn responses_follow_the_curve() {
        // For each item, the empirical rate over many draws stays within
        // three standard errors of the model probability.
        let n = 20_000;
        for (k, (a, d, theta)) in [(1.0, 0.0, 0.0), (2.0, 1.0, 0.0), (0.7, -1.5, 0.8), (2.4, 0.3, 0.5)]
            .into_iter()
            .enumerate()
        {
            let item = ItemParams::new("i", a, d);
            let p = prob_correct(&item, &Ability::new(theta)).unwrap();
            let mut rng = rng_for(1000 + k as u64, 0);
            let hits = (0..n)
                .filter(|_| simulate_response(&item, theta, &mut rng).unwrap())
                .count();
            let rate = hits as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((rate - p).abs() < 3.0 * se, "{a} {d} {theta}: {rate} vs {p}");
        }
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_recovery_run() {
        let log = synthetic_log(150, 20, 11).unwrap();
        let r = recovery_check(&log, 0.2, 5, &CalibrationConfig::default()).unwrap();
        assert!(r.pearson_difficulty > 0.85, "{r:?}");
        assert!(r.held_out_auc > 0.65, "{r:?}");
        assert_eq!(r.n_train + r.n_held_out, 3000);
    }
}
