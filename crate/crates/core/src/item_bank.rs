//! Exercise storage, test-form assembly and adaptive exercise selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::irt::io::ParamsDocument;
use crate::irt::{Ability, ItemParams};

pub const PRETEST_ITEMS_PER_CONCEPT: usize = 5;
pub const POSTTEST_ITEMS: usize = 5;
pub const DEFAULT_SELECTION_SIZE: usize = 3;

const BUNDLED_BANK: &str = include_str!("../data/bank.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Concept {
    Pronouns,
    Punctuation,
    Transitions,
}

impl Concept {
    /// Fixed presentation order.
    pub const ALL: [Concept; 3] = [Concept::Pronouns, Concept::Punctuation, Concept::Transitions];

    pub fn as_str(self) -> &'static str {
        match self {
            Concept::Pronouns => "Pronouns",
            Concept::Punctuation => "Punctuation",
            Concept::Transitions => "Transitions",
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Concept {
    type Err = BankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Concept::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BankError::UnknownConcept(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemRole {
    Pretest,
    Posttest,
    Tutoring,
}

#[derive(Debug, Error, PartialEq)]
pub enum BankError {
    #[error("bank document is not valid: {0}")]
    Schema(String),
    #[error("duplicate item_id {0}")]
    DuplicateItem(String),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("item {item_id}: {reason}")]
    InvalidItem { item_id: String, reason: String },
    #[error("concept {concept} has {available} eligible {role:?} items, need {needed}")]
    InsufficientItems {
        concept: Concept,
        role: ItemRole,
        needed: usize,
        available: usize,
    },
    #[error("no unseen tutoring exercises left for {0}")]
    Exhausted(Concept),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExercise", into = "RawExercise")]
pub struct Exercise {
    pub item_id: String,
    pub concept: Concept,
    pub stem: String,
    pub choices: Vec<Choice>,
    pub answer: String,
    pub explanation: String,
    pub params: Option<ItemParams>,
    pub role_tags: BTreeSet<ItemRole>,
}

impl Exercise {
    pub fn has_role(&self, role: ItemRole) -> bool {
        self.role_tags.contains(&role)
    }

    pub fn difficulty(&self) -> Option<f64> {
        self.params.as_ref().map(|p| p.difficulty)
    }

    pub fn is_correct(&self, label: &str) -> bool {
        label.trim().eq_ignore_ascii_case(&self.answer)
    }
}

/// Wire shape of one exercise in the bank document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawExercise {
    item_id: String,
    concept: String,
    stem: String,
    choices: Vec<Choice>,
    answer: String,
    explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    #[serde(default)]
    roles: BTreeSet<ItemRole>,
}

impl TryFrom<RawExercise> for Exercise {
    type Error = BankError;

    fn try_from(raw: RawExercise) -> Result<Self, Self::Error> {
        let invalid = |reason: String| BankError::InvalidItem {
            item_id: raw.item_id.clone(),
            reason,
        };
        let concept: Concept = raw.concept.parse()?;
        let mut labels = BTreeSet::new();
        for choice in &raw.choices {
            let valid = choice.label.len() == 1 && ("A"..="E").contains(&choice.label.as_str());
            if !valid {
                return Err(invalid(format!("choice label {:?} is not a letter A-E", choice.label)));
            }
            if !labels.insert(choice.label.as_str()) {
                return Err(invalid(format!("choice label {} repeated", choice.label)));
            }
        }
        if !labels.contains(raw.answer.as_str()) {
            return Err(invalid(format!(
                "answer {:?} is not one of the choice labels",
                raw.answer
            )));
        }
        let params = match (raw.a, raw.d) {
            (Some(a), Some(d)) => {
                let p = ItemParams::new(raw.item_id.clone(), a, d);
                p.validate().map_err(|e| invalid(e.to_string()))?;
                Some(p)
            }
            (None, None) => None,
            _ => return Err(invalid("a and d must be given together".into())),
        };
        Ok(Exercise {
            concept,
            params,
            item_id: raw.item_id,
            stem: raw.stem,
            choices: raw.choices,
            answer: raw.answer,
            explanation: raw.explanation,
            role_tags: raw.roles,
        })
    }
}

impl From<Exercise> for RawExercise {
    fn from(e: Exercise) -> Self {
        RawExercise {
            item_id: e.item_id,
            concept: e.concept.as_str().to_string(),
            stem: e.stem,
            choices: e.choices,
            answer: e.answer,
            explanation: e.explanation,
            a: e.params.as_ref().map(|p| p.discrimination),
            d: e.params.as_ref().map(|p| p.difficulty),
            roles: e.role_tags,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Pretest,
    Posttest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestForm {
    pub kind: FormKind,
    pub concepts: Vec<Concept>,
    pub item_ids: Vec<String>,
}

/// Immutable after load; share it behind an `Arc`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemBank {
    items: BTreeMap<String, Exercise>,
}

impl ItemBank {
    /// Parses a bank document: a JSON array of exercise objects.
    pub fn load(document: &str) -> Result<Self, BankError> {
        let raw: Vec<serde_json::Value> = if document.trim().is_empty() {
            Vec::new()
        } else {
            serde_json::from_str(document).map_err(|e| BankError::Schema(e.to_string()))?
        };
        let mut exercises = Vec::with_capacity(raw.len());
        for value in raw {
            let raw: RawExercise = serde_json::from_value(value).map_err(|e| BankError::Schema(e.to_string()))?;
            exercises.push(Exercise::try_from(raw)?);
        }
        Self::from_exercises(exercises)
    }

    pub fn from_exercises(exercises: Vec<Exercise>) -> Result<Self, BankError> {
        let mut items = BTreeMap::new();
        for e in exercises {
            if items.contains_key(&e.item_id) {
                return Err(BankError::DuplicateItem(e.item_id));
            }
            items.insert(e.item_id.clone(), e);
        }
        Ok(Self { items })
    }

    /// The synthetic 3 x 20 bank shipped with the crate.
    pub fn bundled() -> Self {
        Self::load(BUNDLED_BANK).expect("bundled bank is valid")
    }

    pub fn bundled_document() -> &'static str {
        BUNDLED_BANK
    }

    pub fn to_document(&self) -> String {
        let items: Vec<&Exercise> = self.items.values().collect();
        serde_json::to_string_pretty(&items).expect("exercises serialize")
    }

    /// Replaces `a`/`d` of every bank item named in the document. Returns
    /// how many items were updated.
    pub fn apply_params(&mut self, params: &ParamsDocument) -> usize {
        let mut updated = 0;
        for p in &params.items {
            if let Some(e) = self.items.get_mut(&p.item_id) {
                e.params = Some(p.clone());
                updated += 1;
            }
        }
        updated
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&Exercise> {
        self.items.get(item_id)
    }

    /// Items in ascending item_id order.
    pub fn iter(&self) -> impl Iterator<Item = &Exercise> {
        self.items.values()
    }

    pub fn concept_items(&self, concept: Concept) -> impl Iterator<Item = &Exercise> {
        self.items.values().filter(move |e| e.concept == concept)
    }

    pub fn concepts(&self) -> BTreeSet<Concept> {
        self.items.values().map(|e| e.concept).collect()
    }

    /// Calibrated parameters of every item of a concept.
    pub fn concept_params(&self, concept: Concept) -> Vec<ItemParams> {
        self.concept_items(concept).filter_map(|e| e.params.clone()).collect()
    }

    pub fn median_difficulty(&self) -> Option<f64> {
        let mut ds: Vec<f64> = self.items.values().filter_map(Exercise::difficulty).collect();
        if ds.is_empty() {
            return None;
        }
        ds.sort_by(f64::total_cmp);
        let mid = ds.len() / 2;
        Some(if ds.len().is_multiple_of(2) {
            (ds[mid - 1] + ds[mid]) / 2.0
        } else {
            ds[mid]
        })
    }

    /// Up to `n` items of `role` for `concept`, nearest `target` difficulty
    /// first, ties broken by item_id.
    fn nearest<'a>(
        &'a self,
        concept: Concept,
        role: ItemRole,
        target: f64,
        exclude: &BTreeSet<String>,
    ) -> Vec<&'a Exercise> {
        let mut eligible: Vec<&Exercise> = self
            .concept_items(concept)
            .filter(|e| e.has_role(role) && e.params.is_some() && !exclude.contains(&e.item_id))
            .collect();
        eligible.sort_by(|x, y| {
            let dx = (x.difficulty().unwrap_or_default() - target).abs();
            let dy = (y.difficulty().unwrap_or_default() - target).abs();
            dx.total_cmp(&dy).then_with(|| x.item_id.cmp(&y.item_id))
        });
        eligible
    }
}

/// Fifteen-item diagnostic form: per concept, the five pretest items whose
/// difficulty is nearest the bank median, listed by item_id.
pub fn assemble_pretest(bank: &ItemBank) -> Result<TestForm, BankError> {
    let median = bank.median_difficulty().unwrap_or(0.0);
    let mut item_ids = Vec::with_capacity(PRETEST_ITEMS_PER_CONCEPT * Concept::ALL.len());
    for concept in Concept::ALL {
        let ranked = bank.nearest(concept, ItemRole::Pretest, median, &BTreeSet::new());
        if ranked.len() < PRETEST_ITEMS_PER_CONCEPT {
            return Err(BankError::InsufficientItems {
                concept,
                role: ItemRole::Pretest,
                needed: PRETEST_ITEMS_PER_CONCEPT,
                available: ranked.len(),
            });
        }
        let mut chosen: Vec<String> = ranked[..PRETEST_ITEMS_PER_CONCEPT]
            .iter()
            .map(|e| e.item_id.clone())
            .collect();
        chosen.sort();
        item_ids.extend(chosen);
    }
    Ok(TestForm {
        kind: FormKind::Pretest,
        concepts: Concept::ALL.to_vec(),
        item_ids,
    })
}

/// Unseen tutoring exercises whose difficulty is closest to `theta`, so the
/// predicted chance of success sits near one half.
pub fn select_exercises<'a>(
    theta: &Ability,
    concept: Concept,
    bank: &'a ItemBank,
    n: usize,
    seen: &BTreeSet<String>,
) -> Result<Vec<&'a Exercise>, BankError> {
    let mut ranked = bank.nearest(concept, ItemRole::Tutoring, theta.theta, seen);
    if ranked.is_empty() {
        return Err(BankError::Exhausted(concept));
    }
    ranked.truncate(n);
    Ok(ranked)
}

/// Five posttest items nearest the student's current theta, none of them in
/// `exclude`, listed by item_id.
pub fn assemble_posttest(
    bank: &ItemBank,
    concept: Concept,
    theta: &Ability,
    exclude: &BTreeSet<String>,
) -> Result<TestForm, BankError> {
    let ranked = bank.nearest(concept, ItemRole::Posttest, theta.theta, exclude);
    if ranked.len() < POSTTEST_ITEMS {
        return Err(BankError::InsufficientItems {
            concept,
            role: ItemRole::Posttest,
            needed: POSTTEST_ITEMS,
            available: ranked.len(),
        });
    }
    let mut item_ids: Vec<String> = ranked[..POSTTEST_ITEMS].iter().map(|e| e.item_id.clone()).collect();
    item_ids.sort();
    Ok(TestForm {
        kind: FormKind::Posttest,
        concepts: vec![concept],
        item_ids,
    })
}
