//! WHO guideline scoring and the daily macro-nutrient targets.

use serde::{Deserialize, Serialize};

use crate::corpus::{Nutrient, NutrientVector};

/// Reference daily energy intake the guidelines and targets are expressed against.
pub const REFERENCE_KCAL: f64 = 2000.0;

/// Energy per gram; sodium and fiber contribute none.
pub fn kcal_per_gram(nutrient: Nutrient) -> f64 {
    match nutrient {
        Nutrient::Protein | Nutrient::Carbohydrates | Nutrient::Sugars => 4.0,
        Nutrient::Fat | Nutrient::SaturatedFat => 9.0,
        Nutrient::Sodium | Nutrient::Fiber => 0.0,
    }
}

/// Daily macro-nutrient targets on a 2000 kcal basis: midpoints of the
/// guideline ranges, and bounds moved by a factor of 1.5 into the safe side.
pub fn default_targets() -> NutrientVector {
    NutrientVector {
        protein: 62.5,
        carbohydrates: 325.0,
        sugars: 33.3,
        fat: 50.0,
        saturated_fat: 14.8,
        sodium: 1.33,
        fiber: 37.5,
        energy: REFERENCE_KCAL,
    }
}

/// Share of total energy contributed by each energy-bearing macro-nutrient, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPercentages {
    pub protein: f64,
    pub carbohydrates: f64,
    pub sugars: f64,
    pub fat: f64,
    pub saturated_fat: f64,
}

impl EnergyPercentages {
    pub fn get(&self, nutrient: Nutrient) -> Option<f64> {
        match nutrient {
            Nutrient::Protein => Some(self.protein),
            Nutrient::Carbohydrates => Some(self.carbohydrates),
            Nutrient::Sugars => Some(self.sugars),
            Nutrient::Fat => Some(self.fat),
            Nutrient::SaturatedFat => Some(self.saturated_fat),
            Nutrient::Sodium | Nutrient::Fiber => None,
        }
    }
}

/// `None` when the vector carries no energy.
pub fn energy_percentages(nv: &NutrientVector) -> Option<EnergyPercentages> {
    if !(nv.energy > 0.0) {
        return None;
    }
    let pct = |n: Nutrient| 100.0 * nv.get(n) * kcal_per_gram(n) / nv.energy;
    Some(EnergyPercentages {
        protein: pct(Nutrient::Protein),
        carbohydrates: pct(Nutrient::Carbohydrates),
        sugars: pct(Nutrient::Sugars),
        fat: pct(Nutrient::Fat),
        saturated_fat: pct(Nutrient::SaturatedFat),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GuidelineRule {
    /// Energy share within `[lo, hi]` percent, both ends inclusive.
    EnergyRange { lo: f64, hi: f64 },
    /// Energy share strictly below the bound, in percent.
    EnergyBelow(f64),
    /// Grams per 2000 kcal strictly below the bound.
    GramsBelow(f64),
    /// Grams per 2000 kcal strictly above the bound.
    GramsAbove(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhoGuideline {
    pub rules: [(Nutrient, GuidelineRule); 7],
}

impl Default for WhoGuideline {
    fn default() -> Self {
        use GuidelineRule::*;
        WhoGuideline {
            rules: [
                (Nutrient::Protein, EnergyRange { lo: 10.0, hi: 15.0 }),
                (Nutrient::Carbohydrates, EnergyRange { lo: 55.0, hi: 75.0 }),
                (Nutrient::Sugars, EnergyBelow(10.0)),
                (Nutrient::Fat, EnergyRange { lo: 15.0, hi: 30.0 }),
                (Nutrient::SaturatedFat, EnergyBelow(10.0)),
                (Nutrient::Sodium, GramsBelow(2.0)),
                (Nutrient::Fiber, GramsAbove(25.0)),
            ],
        }
    }
}

impl WhoGuideline {
    /// Whether `nv` satisfies the rule for `nutrient`. Every rule fails on
    /// zero energy: percentages are undefined and the gram bounds cannot be
    /// rescaled to the reference intake.
    pub fn satisfies(&self, rule: GuidelineRule, nutrient: Nutrient, nv: &NutrientVector) -> bool {
        if !(nv.energy > 0.0) {
            return false;
        }
        let percent = || 100.0 * nv.get(nutrient) * kcal_per_gram(nutrient) / nv.energy;
        let per_reference = || nv.get(nutrient) * REFERENCE_KCAL / nv.energy;
        match rule {
            GuidelineRule::EnergyRange { lo, hi } => {
                let p = percent();
                lo <= p && p <= hi
            }
            GuidelineRule::EnergyBelow(bound) => percent() < bound,
            GuidelineRule::GramsBelow(bound) => per_reference() < bound,
            GuidelineRule::GramsAbove(bound) => per_reference() > bound,
        }
    }

    pub fn score(&self, nv: &NutrientVector) -> WhoScore {
        let met = self
            .rules
            .iter()
            .filter(|(n, rule)| self.satisfies(*rule, *n, nv))
            .count();
        WhoScore(met as u8)
    }
}

/// Number of guideline rules met, 0 (poor) to 7 (all met).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WhoScore(u8);

impl WhoScore {
    pub const MAX: u8 = 7;

    pub fn value(self) -> u8 {
        self.0
    }
}

impl From<WhoScore> for f64 {
    fn from(s: WhoScore) -> f64 {
        s.0 as f64
    }
}

pub fn who_score(nv: &NutrientVector) -> WhoScore {
    WhoGuideline::default().score(nv)
}
