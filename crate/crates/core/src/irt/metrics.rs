use super::{prob_correct, Ability, IrtError, ItemParams};

/// Area under the ROC curve via the Mann–Whitney rank statistic. Tied
/// predictions share their average rank, which counts a tied
/// positive/negative pair as one half.
pub fn compute_auc(predictions: &[f64], outcomes: &[bool]) -> Result<f64, IrtError> {
    if predictions.len() != outcomes.len() {
        return Err(IrtError::LengthMismatch {
            predictions: predictions.len(),
            outcomes: outcomes.len(),
        });
    }
    let n_pos = outcomes.iter().filter(|&&y| y).count();
    let n_neg = outcomes.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(IrtError::UndefinedAuc("outcomes must contain both classes"));
    }
    if predictions.iter().any(|p| p.is_nan()) {
        return Err(IrtError::UndefinedAuc("predictions contain NaN"));
    }

    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&i, &j| predictions[i].total_cmp(&predictions[j]));

    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && predictions[order[end]] == predictions[order[start]] {
            end += 1;
        }
        // ranks are 1-based: start+1 ..= end
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&k| outcomes[k]).count();
        positive_rank_sum += avg_rank * positives as f64;
        start = end;
    }
    let n_pos = n_pos as f64;
    let u = positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

/// Mean predicted correctness over an item set.
pub fn mean_prob_correct(ability: &Ability, items: &[ItemParams]) -> Result<f64, IrtError> {
    if items.is_empty() {
        return Err(IrtError::EmptyInput("item set is empty"));
    }
    let mut total = 0.0;
    for item in items {
        total += prob_correct(item, ability)?;
    }
    Ok(total / items.len() as f64)
}

/// `p_post - p_pre`, the change in mean predicted correctness over `items`.
pub fn learning_gain(theta_pre: &Ability, theta_post: &Ability, items: &[ItemParams]) -> Result<f64, IrtError> {
    Ok(mean_prob_correct(theta_post, items)? - mean_prob_correct(theta_pre, items)?)
}
