//! Joint calibration of item and person parameters.
//!
//! Penalized joint maximum likelihood, solved by alternating block updates:
//! every student's `theta` with items fixed, then every item's
//! `(ln a, d)` with students fixed. Each block takes one damped Newton step
//! (Fisher scoring when the observed Hessian is indefinite), backtracking
//! until the block objective does not increase, so the full objective is
//! monotone across iterations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{response_loss, sigmoid, Ability, InteractionRecord, IrtError, ItemParams, LOGIT_BOUND};

const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub max_iterations: usize,
    /// Stop once no parameter moves by more than this in one sweep.
    pub tolerance: f64,
    pub priors: bool,
    pub theta_prior_sd: f64,
    pub difficulty_prior_sd: f64,
    /// Standard deviation of the normal prior on `ln a`.
    pub log_discrimination_prior_sd: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-5,
            priors: true,
            theta_prior_sd: 1.0,
            difficulty_prior_sd: 1.0,
            log_discrimination_prior_sd: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub item_params: BTreeMap<String, ItemParams>,
    pub student_abilities: BTreeMap<String, Ability>,
    pub final_neg_log_posterior: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the starting point followed by one entry per sweep.
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct PriorPrecision {
    theta: f64,
    log_a: f64,
    difficulty: f64,
}

/// Penalized joint negative log-posterior over a flat parameter vector laid
/// out as `[theta_0..theta_S, ln_a_0..ln_a_I, d_0..d_I]`.
#[derive(Debug, Clone)]
pub struct CalibrationObjective {
    students: Vec<String>,
    items: Vec<String>,
    by_student: Vec<Vec<(usize, bool)>>,
    by_item: Vec<Vec<(usize, bool)>>,
    priors: Option<PriorPrecision>,
}

impl CalibrationObjective {
    pub fn new(records: &[InteractionRecord], config: &CalibrationConfig) -> Result<Self, IrtError> {
        if records.is_empty() {
            return Err(IrtError::EmptyInput("interaction log has no records"));
        }
        let mut student_idx = BTreeMap::new();
        let mut item_idx = BTreeMap::new();
        for r in records {
            student_idx.entry(r.student_id.clone()).or_insert(0usize);
            item_idx.entry(r.item_id.clone()).or_insert(0usize);
        }
        for (i, v) in student_idx.values_mut().enumerate() {
            *v = i;
        }
        for (i, v) in item_idx.values_mut().enumerate() {
            *v = i;
        }
        let mut by_student = vec![Vec::new(); student_idx.len()];
        let mut by_item = vec![Vec::new(); item_idx.len()];
        for r in records {
            let s = student_idx[&r.student_id];
            let i = item_idx[&r.item_id];
            by_student[s].push((i, r.correct));
            by_item[i].push((s, r.correct));
        }
        let priors = config.priors.then(|| PriorPrecision {
            theta: config.theta_prior_sd.powi(-2),
            log_a: config.log_discrimination_prior_sd.powi(-2),
            difficulty: config.difficulty_prior_sd.powi(-2),
        });
        Ok(Self {
            students: student_idx.into_keys().collect(),
            items: item_idx.into_keys().collect(),
            by_student,
            by_item,
            priors,
        })
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn dimension(&self) -> usize {
        self.students.len() + 2 * self.items.len()
    }

    pub fn student_ids(&self) -> &[String] {
        &self.students
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    /// Warm start: theta = 0, a = 1, d = logit of the item's error rate
    /// clamped to [-3, 3].
    pub fn initial_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dimension()];
        let d_offset = self.students.len() + self.items.len();
        for (i, responses) in self.by_item.iter().enumerate() {
            let wrong = responses.iter().filter(|(_, y)| !y).count() as f64;
            let rate = wrong / responses.len() as f64;
            let logit = (rate / (1.0 - rate)).ln();
            x[d_offset + i] = if logit.is_nan() { 0.0 } else { logit.clamp(-3.0, 3.0) };
        }
        x
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let s = self.students.len();
        let i = self.items.len();
        (&x[..s], &x[s..s + i], &x[s + i..])
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dimension(), "parameter vector has wrong length");
        let (theta, log_a, d) = self.split(x);
        let mut total = 0.0;
        for (i, responses) in self.by_item.iter().enumerate() {
            let a = log_a[i].exp();
            for &(s, y) in responses {
                total += response_loss(a * (theta[s] - d[i]), y);
            }
        }
        if let Some(p) = self.priors {
            total += 0.5 * p.theta * theta.iter().map(|t| t * t).sum::<f64>();
            total += 0.5 * p.log_a * log_a.iter().map(|u| u * u).sum::<f64>();
            total += 0.5 * p.difficulty * d.iter().map(|v| v * v).sum::<f64>();
        }
        total
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dimension(), "parameter vector has wrong length");
        let (theta, log_a, d) = self.split(x);
        let n_s = self.students.len();
        let n_i = self.items.len();
        let mut g = vec![0.0; self.dimension()];
        for (i, responses) in self.by_item.iter().enumerate() {
            let a = log_a[i].exp();
            for &(s, y) in responses {
                let z = a * (theta[s] - d[i]);
                let resid = sigmoid(z) - f64::from(u8::from(y));
                g[s] += resid * a;
                g[n_s + i] += resid * z;
                g[n_s + n_i + i] -= resid * a;
            }
        }
        if let Some(p) = self.priors {
            for (k, t) in theta.iter().enumerate() {
                g[k] += p.theta * t;
            }
            for i in 0..n_i {
                g[n_s + i] += p.log_a * log_a[i];
                g[n_s + n_i + i] += p.difficulty * d[i];
            }
        }
        g
    }

    fn student_block_value(&self, s: usize, theta: f64, log_a: &[f64], d: &[f64]) -> f64 {
        let mut v: f64 = self.by_student[s]
            .iter()
            .map(|&(i, y)| response_loss(log_a[i].exp() * (theta - d[i]), y))
            .sum();
        if let Some(p) = self.priors {
            v += 0.5 * p.theta * theta * theta;
        }
        v
    }

    fn item_block_value(&self, i: usize, log_a: f64, d: f64, theta: &[f64]) -> f64 {
        let a = log_a.exp();
        let mut v: f64 = self.by_item[i]
            .iter()
            .map(|&(s, y)| response_loss(a * (theta[s] - d), y))
            .sum();
        if let Some(p) = self.priors {
            v += 0.5 * p.log_a * log_a * log_a + 0.5 * p.difficulty * d * d;
        }
        v
    }

    fn bound(&self) -> f64 {
        if self.priors.is_some() {
            LOGIT_BOUND
        } else {
            f64::INFINITY
        }
    }

    /// One damped Newton step on a student's theta. Returns the new value.
    fn update_student(&self, s: usize, theta: f64, log_a: &[f64], d: &[f64]) -> f64 {
        let mut grad = 0.0;
        let mut hess = 0.0;
        for &(i, y) in &self.by_student[s] {
            let a = log_a[i].exp();
            let p = sigmoid(a * (theta - d[i]));
            grad += (p - f64::from(u8::from(y))) * a;
            hess += p * (1.0 - p) * a * a;
        }
        if let Some(prior) = self.priors {
            grad += prior.theta * theta;
            hess += prior.theta;
        }
        let step = grad / hess.max(1e-10);
        let bound = self.bound();
        let f0 = self.student_block_value(s, theta, log_a, d);
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let candidate = (theta - t * step).clamp(-bound, bound);
            if self.student_block_value(s, candidate, log_a, d) <= f0 {
                return candidate;
            }
            t *= 0.5;
        }
        theta
    }

    /// One damped Newton (or Fisher scoring) step on an item's `(ln a, d)`.
    fn update_item(&self, i: usize, log_a: f64, d: f64, theta: &[f64]) -> (f64, f64) {
        let a = log_a.exp();
        let (mut g_u, mut g_d) = (0.0, 0.0);
        // Expected information and the observed-Hessian correction terms.
        let (mut f_uu, mut f_ud, mut f_dd) = (0.0, 0.0, 0.0);
        let (mut c_uu, mut c_ud) = (0.0, 0.0);
        for &(s, y) in &self.by_item[i] {
            let z = a * (theta[s] - d);
            let p = sigmoid(z);
            let resid = p - f64::from(u8::from(y));
            let w = p * (1.0 - p);
            g_u += resid * z;
            g_d -= resid * a;
            f_uu += w * z * z;
            f_ud -= w * a * z;
            f_dd += w * a * a;
            c_uu += resid * z;
            c_ud -= resid * a;
        }
        if let Some(prior) = self.priors {
            g_u += prior.log_a * log_a;
            g_d += prior.difficulty * d;
            f_uu += prior.log_a;
            f_dd += prior.difficulty;
        }
        let newton = (f_uu + c_uu, f_ud + c_ud, f_dd);
        let fisher = (f_uu + 1e-10, f_ud, f_dd + 1e-10);
        let (h_uu, h_ud, h_dd) = if newton.0 > 0.0 && newton.0 * newton.2 - newton.1 * newton.1 > 0.0 {
            newton
        } else {
            fisher
        };
        let det = h_uu * h_dd - h_ud * h_ud;
        if !(det.is_finite() && det > 0.0) {
            return (log_a, d);
        }
        let step_u = (h_dd * g_u - h_ud * g_d) / det;
        let step_d = (h_uu * g_d - h_ud * g_u) / det;
        let bound = self.bound();
        let f0 = self.item_block_value(i, log_a, d, theta);
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let cu = log_a - t * step_u;
            let cd = (d - t * step_d).clamp(-bound, bound);
            if self.item_block_value(i, cu, cd, theta) <= f0 {
                return (cu, cd);
            }
            t *= 0.5;
        }
        (log_a, d)
    }

    fn theta_standard_error(&self, s: usize, theta: f64, log_a: &[f64], d: &[f64]) -> f64 {
        let mut info: f64 = self.by_student[s]
            .iter()
            .map(|&(i, _)| {
                let a = log_a[i].exp();
                let p = sigmoid(a * (theta - d[i]));
                p * (1.0 - p) * a * a
            })
            .sum();
        if let Some(p) = self.priors {
            info += p.theta;
        }
        1.0 / info.sqrt()
    }
}

/// Fits item discriminations/difficulties and student abilities to a
/// response log.
///
/// Non-convergence is not an error: the result carries `converged = false`.
pub fn calibrate(records: &[InteractionRecord], config: &CalibrationConfig) -> Result<CalibrationResult, IrtError> {
    let objective = CalibrationObjective::new(records, config)?;
    let n_s = objective.n_students();
    let n_i = objective.n_items();
    let x = objective.initial_point();
    let mut theta = x[..n_s].to_vec();
    let mut log_a = x[n_s..n_s + n_i].to_vec();
    let mut d = x[n_s + n_i..].to_vec();

    let mut history = vec![objective.value(&x)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for (s, t) in theta.iter_mut().enumerate() {
            let next = objective.update_student(s, *t, &log_a, &d);
            max_change = max_change.max((next - *t).abs());
            *t = next;
        }
        for i in 0..n_i {
            let (u, v) = objective.update_item(i, log_a[i], d[i], &theta);
            max_change = max_change.max((u - log_a[i]).abs()).max((v - d[i]).abs());
            log_a[i] = u;
            d[i] = v;
        }
        let flat: Vec<f64> = theta.iter().chain(&log_a).chain(&d).copied().collect();
        history.push(objective.value(&flat));
        if max_change < config.tolerance {
            converged = true;
            break;
        }
    }

    let item_params = objective
        .item_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), ItemParams::new(id.clone(), log_a[i].exp(), d[i])))
        .collect();
    let student_abilities = objective
        .student_ids()
        .iter()
        .enumerate()
        .map(|(s, id)| {
            let se = objective.theta_standard_error(s, theta[s], &log_a, &d);
            (
                id.clone(),
                Ability {
                    theta: theta[s],
                    standard_error: se.is_finite().then_some(se),
                },
            )
        })
        .collect();
    Ok(CalibrationResult {
        item_params,
        student_abilities,
        final_neg_log_posterior: *history.last().expect("history starts non-empty"),
        iterations,
        converged,
        objective_history: history,
    })
}
