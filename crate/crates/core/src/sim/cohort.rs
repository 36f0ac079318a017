use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{rng_for, simulate_response, standard_normal, SimError};
use crate::irt::{estimate_theta, learning_gain, Ability, ItemParams};
use crate::item_bank::{assemble_posttest, assemble_pretest, select_exercises, Concept, Exercise, ItemBank, ItemRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPolicy {
    /// Nearest difficulty to the pre-test estimate (the tutor's rule).
    Adaptive,
    /// Nearest difficulty to the true ability.
    Oracle,
    /// Uniform draw from the concept's tutoring items.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudent {
    pub index: usize,
    pub seed: u64,
    pub true_theta: BTreeMap<Concept, f64>,
}

/// One simulated student's pass through one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrajectory {
    pub student: usize,
    pub concept: Concept,
    pub true_theta: f64,
    pub theta_pre: f64,
    pub theta_post: f64,
    pub exercises: Vec<String>,
    pub first_responses: Vec<bool>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub n_students: usize,
    pub seed: u64,
    pub policy: SelectionPolicy,
    pub first_attempts: usize,
    pub first_correct: usize,
    pub correctness_ratio_first_response: f64,
    pub mean_gain_per_concept: BTreeMap<Concept, f64>,
    pub theta_rmse: f64,
    pub trajectories: Vec<SimTrajectory>,
}

impl CohortReport {
    /// Aggregates per-concept trajectories. The result does not depend on
    /// their order beyond float rounding in the means.
    pub fn aggregate(
        n_students: usize,
        seed: u64,
        policy: SelectionPolicy,
        mut trajectories: Vec<SimTrajectory>,
    ) -> Self {
        trajectories.sort_by_key(|t| (t.student, t.concept));
        let first_attempts = trajectories.iter().map(|t| t.first_responses.len()).sum();
        let first_correct = trajectories
            .iter()
            .map(|t| t.first_responses.iter().filter(|c| **c).count())
            .sum();
        let mut gains: BTreeMap<Concept, (f64, usize)> = BTreeMap::new();
        let mut sq = 0.0;
        for t in &trajectories {
            let g = gains.entry(t.concept).or_default();
            g.0 += t.gain;
            g.1 += 1;
            sq += (t.theta_pre - t.true_theta).powi(2);
        }
        let ratio = if first_attempts == 0 {
            0.0
        } else {
            first_correct as f64 / first_attempts as f64
        };
        Self {
            n_students,
            seed,
            policy,
            first_attempts,
            first_correct,
            correctness_ratio_first_response: ratio,
            mean_gain_per_concept: gains.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect(),
            theta_rmse: if trajectories.is_empty() {
                0.0
            } else {
                (sq / trajectories.len() as f64).sqrt()
            },
            trajectories,
        }
    }
}

fn params_of(e: &Exercise) -> Result<&ItemParams, SimError> {
    e.params
        .as_ref()
        .ok_or(SimError::EmptyInput("bank item without calibrated parameters"))
}

/// Pre-test, estimate, choose exercises, answer each once, post-test; for
/// every student and every concept in the bank.
pub fn run_cohort(n: usize, bank: &ItemBank, seed: u64, policy: SelectionPolicy) -> Result<CohortReport, SimError> {
    if n == 0 {
        return Err(SimError::EmptyInput("cohort size is zero"));
    }
    let pretest = assemble_pretest(bank)?;
    let concepts: Vec<Concept> = bank.concepts().into_iter().collect();
    let normal = standard_normal();
    let mut trajectories = Vec::with_capacity(n * concepts.len());

    for index in 0..n {
        let mut rng = rng_for(seed, index as u64);
        let student = SimStudent {
            index,
            seed,
            true_theta: concepts.iter().map(|c| (*c, normal.sample(&mut rng))).collect(),
        };
        for &concept in &concepts {
            let theta = student.true_theta[&concept];
            let mut responses = Vec::new();
            for id in &pretest.item_ids {
                let e = bank.get(id).expect("form items come from the bank");
                if e.concept == concept {
                    let p = params_of(e)?;
                    responses.push((p.clone(), simulate_response(p, theta, &mut rng)?));
                }
            }
            let pre = estimate_theta(&responses)?.ability;

            let exercises: Vec<&Exercise> = match policy {
                SelectionPolicy::Adaptive => select_exercises(&pre, concept, bank, 3, &BTreeSet::new())?,
                SelectionPolicy::Oracle => select_exercises(&Ability::new(theta), concept, bank, 3, &BTreeSet::new())?,
                SelectionPolicy::Random => {
                    let pool: Vec<&Exercise> = bank
                        .concept_items(concept)
                        .filter(|e| e.has_role(ItemRole::Tutoring) && e.params.is_some())
                        .collect();
                    pool.choose_multiple(&mut rng, 3).copied().collect()
                }
            };
            let mut first_responses = Vec::with_capacity(exercises.len());
            for e in &exercises {
                first_responses.push(simulate_response(params_of(e)?, theta, &mut rng)?);
            }

            let form = assemble_posttest(bank, concept, &pre, &BTreeSet::new())?;
            let mut post_responses = Vec::new();
            for id in &form.item_ids {
                let p = params_of(bank.get(id).expect("form items come from the bank"))?;
                post_responses.push((p.clone(), simulate_response(p, theta, &mut rng)?));
            }
            let post = estimate_theta(&post_responses)?.ability;
            let gain = learning_gain(&pre, &post, &bank.concept_params(concept))?;

            trajectories.push(SimTrajectory {
                student: index,
                concept,
                true_theta: theta,
                theta_pre: pre.theta,
                theta_post: post.theta,
                exercises: exercises.iter().map(|e| e.item_id.clone()).collect(),
                first_responses,
                gain,
            });
        }
    }
    Ok(CohortReport::aggregate(n, seed, policy, trajectories))
}
