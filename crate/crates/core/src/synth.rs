//! Seeded synthetic corpus with two cuisines and a healthy minority.
//!
//! Each cuisine owns a handful of dish templates over its regular
//! ingredients (meat, dairy, sweet, sauce, vegetable). A regular recipe takes
//! most of one template. A healthy recipe keeps two ingredients of a template
//! in small amounts and fills the plate with that template's healthy
//! companions (whole grains, legumes, greens), so healthy ingredients
//! co-occur with the frequent regular pairs.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_recipes, Corpus, IngredientId, NutrientTable, NutrientVector, Recipe};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub recipes: usize,
    /// Share of recipes built from healthy companions.
    pub healthy_fraction: f64,
    pub regular_per_cuisine: usize,
    pub healthy_per_cuisine: usize,
    pub templates_per_cuisine: usize,
    pub template_size: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            recipes: 500,
            healthy_fraction: 0.2,
            regular_per_cuisine: 30,
            healthy_per_cuisine: 12,
            templates_per_cuisine: 6,
            template_size: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub table: NutrientTable,
    pub corpus: Corpus,
    /// Ground truth per recipe.
    pub healthy: Vec<bool>,
    pub cuisine: Vec<usize>,
}

impl SyntheticCorpus {
    /// Writes `nutrients.csv` and `recipes.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("nutrients.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.table.write_csv(BufWriter::new(file))?;
        let path = dir.join("recipes.jsonl");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_recipes(BufWriter::new(file), self.corpus.recipes(), &self.table)
    }
}

#[derive(Debug, Clone, Copy)]
struct Profile {
    name: &'static str,
    protein: f64,
    carbohydrates: f64,
    sugars: f64,
    fat: f64,
    saturated_fat: f64,
    sodium: f64,
    fiber: f64,
    /// Typical grams in a regular dish.
    portion: f64,
}

const REGULAR: [Profile; 5] = [
    Profile { name: "meat", protein: 22.0, carbohydrates: 0.0, sugars: 0.0, fat: 14.0, saturated_fat: 5.5, sodium: 0.08, fiber: 0.0, portion: 150.0 },
    Profile { name: "dairy", protein: 6.0, carbohydrates: 4.0, sugars: 3.5, fat: 28.0, saturated_fat: 17.0, sodium: 0.45, fiber: 0.0, portion: 60.0 },
    Profile { name: "sweet", protein: 2.0, carbohydrates: 70.0, sugars: 55.0, fat: 8.0, saturated_fat: 4.0, sodium: 0.05, fiber: 1.0, portion: 50.0 },
    Profile { name: "sauce", protein: 3.0, carbohydrates: 12.0, sugars: 8.0, fat: 10.0, saturated_fat: 2.0, sodium: 2.2, fiber: 0.5, portion: 40.0 },
    Profile { name: "veg", protein: 2.0, carbohydrates: 7.0, sugars: 3.5, fat: 0.3, saturated_fat: 0.05, sodium: 0.02, fiber: 2.5, portion: 100.0 },
];

const HEALTHY: [Profile; 3] = [
    Profile { name: "grain", protein: 12.0, carbohydrates: 66.0, sugars: 1.5, fat: 3.0, saturated_fat: 0.5, sodium: 0.005, fiber: 11.0, portion: 160.0 },
    Profile { name: "legume", protein: 20.0, carbohydrates: 55.0, sugars: 2.5, fat: 2.0, saturated_fat: 0.3, sodium: 0.01, fiber: 16.0, portion: 140.0 },
    Profile { name: "greens", protein: 3.0, carbohydrates: 8.0, sugars: 1.5, fat: 0.5, saturated_fat: 0.1, sodium: 0.04, fiber: 4.0, portion: 150.0 },
];

fn jittered(p: &Profile, rng: &mut ChaCha8Rng) -> NutrientVector {
    let mut j = |v: f64| v * rng.random_range(0.8..1.2);
    let protein = j(p.protein);
    let carbohydrates = j(p.carbohydrates);
    let sugars = j(p.sugars).min(carbohydrates);
    let fat = j(p.fat);
    let saturated_fat = j(p.saturated_fat).min(fat);
    let sodium = j(p.sodium);
    let fiber = j(p.fiber);
    NutrientVector {
        protein,
        carbohydrates,
        sugars,
        fat,
        saturated_fat,
        sodium,
        fiber,
        energy: 4.0 * (protein + carbohydrates) + 9.0 * fat,
    }
}

struct Pool {
    regular: Vec<(IngredientId, f64)>,
    healthy: Vec<(IngredientId, f64)>,
    templates: Vec<Vec<usize>>,
    /// Healthy companions per template, as indices into `healthy`.
    companions: Vec<Vec<usize>>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    if cfg.recipes < 1 || !(0.0..=1.0).contains(&cfg.healthy_fraction) {
        return Err(Error::Config("synthetic corpus needs recipes and a healthy fraction in [0, 1]".into()));
    }
    if cfg.template_size < 4 || cfg.template_size > cfg.regular_per_cuisine || cfg.healthy_per_cuisine < 4 {
        return Err(Error::Config("template size must be in [4, regular ingredients], with at least 4 healthy".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cuisines = ["east", "west"];
    let mut rows: Vec<(String, NutrientVector)> = Vec::new();
    let mut pools = Vec::new();
    for cuisine in cuisines {
        let mut pool = Pool { regular: Vec::new(), healthy: Vec::new(), templates: Vec::new(), companions: Vec::new() };
        for k in 0..cfg.regular_per_cuisine {
            let p = &REGULAR[k % REGULAR.len()];
            pool.regular.push((IngredientId(rows.len()), p.portion));
            rows.push((format!("{cuisine}-{}-{k}", p.name), jittered(p, &mut rng)));
        }
        for k in 0..cfg.healthy_per_cuisine {
            let p = &HEALTHY[k % HEALTHY.len()];
            pool.healthy.push((IngredientId(rows.len()), p.portion));
            rows.push((format!("{cuisine}-{}-{k}", p.name), jittered(p, &mut rng)));
        }
        let mut idx: Vec<usize> = (0..cfg.regular_per_cuisine).collect();
        let healthy_idx: Vec<usize> = (0..cfg.healthy_per_cuisine).collect();
        for _ in 0..cfg.templates_per_cuisine {
            idx.shuffle(&mut rng);
            pool.templates.push(idx[..cfg.template_size].to_vec());
            pool.companions.push(healthy_idx.choose_multiple(&mut rng, 4).copied().collect());
        }
        pools.push(pool);
    }
    let table = NutrientTable::from_rows(rows)?;

    let mut recipes = Vec::with_capacity(cfg.recipes);
    let mut healthy = Vec::with_capacity(cfg.recipes);
    let mut cuisine = Vec::with_capacity(cfg.recipes);
    for n in 0..cfg.recipes {
        let c = rng.random_range(0..cuisines.len());
        let pool = &pools[c];
        let t = rng.random_range(0..pool.templates.len());
        let is_healthy = rng.random_bool(cfg.healthy_fraction);
        let mut entries: Vec<(IngredientId, f64)> = Vec::new();
        let amount = |base: f64, rng: &mut ChaCha8Rng| (base * rng.random_range(0.7..1.3)).round().max(1.0);
        if is_healthy {
            let core: Vec<usize> = pool.templates[t].choose_multiple(&mut rng, 2).copied().collect();
            for i in core {
                let (id, portion) = pool.regular[i];
                entries.push((id, amount(0.3 * portion, &mut rng)));
            }
            let take = rng.random_range(3..=4);
            let picked: Vec<usize> = pool.companions[t].choose_multiple(&mut rng, take).copied().collect();
            for i in picked {
                let (id, portion) = pool.healthy[i];
                entries.push((id, amount(portion, &mut rng)));
            }
        } else {
            let take = rng.random_range(4..=cfg.template_size);
            let picked: Vec<usize> = pool.templates[t].choose_multiple(&mut rng, take).copied().collect();
            for i in picked {
                let (id, portion) = pool.regular[i];
                entries.push((id, amount(portion, &mut rng)));
            }
            if rng.random_bool(0.3) {
                let &(id, portion) = pool.regular.choose(&mut rng).expect("non-empty pool");
                entries.push((id, amount(portion, &mut rng)));
            }
        }
        recipes.push(Recipe::new(format!("syn-{n:04}"), entries)?);
        healthy.push(is_healthy);
        cuisine.push(c);
    }
    let corpus = Corpus::new(recipes, &table)?;
    Ok(SyntheticCorpus { table, corpus, healthy, cuisine })
}
