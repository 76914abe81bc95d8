//! Recipe corpus and per-ingredient nutrient table.
//!
//! The nutrient table fixes the vocabulary: ingredient ids are assigned
//! densely in file order, and recipes reference ingredients by exact
//! canonical name. Both structures are immutable once loaded.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense ingredient index in `[0, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IngredientId(pub usize);

impl IngredientId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for IngredientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The seven macro-nutrients scored against dietary guidelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nutrient {
    Protein,
    Carbohydrates,
    Sugars,
    Fat,
    SaturatedFat,
    Sodium,
    Fiber,
}

impl Nutrient {
    pub const ALL: [Nutrient; 7] = [
        Nutrient::Protein,
        Nutrient::Carbohydrates,
        Nutrient::Sugars,
        Nutrient::Fat,
        Nutrient::SaturatedFat,
        Nutrient::Sodium,
        Nutrient::Fiber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Nutrient::Protein => "protein",
            Nutrient::Carbohydrates => "carbohydrates",
            Nutrient::Sugars => "sugars",
            Nutrient::Fat => "fat",
            Nutrient::SaturatedFat => "saturated_fat",
            Nutrient::Sodium => "sodium",
            Nutrient::Fiber => "fiber",
        }
    }
}

/// Macro-nutrients in grams plus energy in kcal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NutrientVector {
    pub protein: f64,
    pub carbohydrates: f64,
    pub sugars: f64,
    pub fat: f64,
    pub saturated_fat: f64,
    pub sodium: f64,
    pub fiber: f64,
    pub energy: f64,
}

impl NutrientVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn get(&self, nutrient: Nutrient) -> f64 {
        match nutrient {
            Nutrient::Protein => self.protein,
            Nutrient::Carbohydrates => self.carbohydrates,
            Nutrient::Sugars => self.sugars,
            Nutrient::Fat => self.fat,
            Nutrient::SaturatedFat => self.saturated_fat,
            Nutrient::Sodium => self.sodium,
            Nutrient::Fiber => self.fiber,
        }
    }

    /// The seven macro-nutrients in [`Nutrient::ALL`] order; energy excluded.
    pub fn macros(&self) -> [f64; 7] {
        Nutrient::ALL.map(|n| self.get(n))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            protein: self.protein * factor,
            carbohydrates: self.carbohydrates * factor,
            sugars: self.sugars * factor,
            fat: self.fat * factor,
            saturated_fat: self.saturated_fat * factor,
            sodium: self.sodium * factor,
            fiber: self.fiber * factor,
            energy: self.energy * factor,
        }
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, other: &NutrientVector, factor: f64) {
        self.protein += other.protein * factor;
        self.carbohydrates += other.carbohydrates * factor;
        self.sugars += other.sugars * factor;
        self.fat += other.fat * factor;
        self.saturated_fat += other.saturated_fat * factor;
        self.sodium += other.sodium * factor;
        self.fiber += other.fiber * factor;
        self.energy += other.energy * factor;
    }

    fn fields(&self) -> [f64; 8] {
        [
            self.protein,
            self.carbohydrates,
            self.sugars,
            self.fat,
            self.saturated_fat,
            self.sodium,
            self.fiber,
            self.energy,
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.fields().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// CSV header names, in the order the fields of [`NutrientVector`] are declared.
const TABLE_COLUMNS: [&str; 8] = [
    "protein", "carbs", "sugars", "fat", "satfat", "sodium", "fiber", "energy",
];

/// Per-100 g nutrient profile for every ingredient in the vocabulary.
#[derive(Debug, Clone)]
pub struct NutrientTable {
    names: Vec<String>,
    per_100g: Vec<NutrientVector>,
    index: HashMap<String, IngredientId>,
}

impl NutrientTable {
    /// Build a table from `(name, per-100 g profile)` rows in id order.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, NutrientVector)>,
        S: Into<String>,
    {
        let mut table = NutrientTable {
            names: Vec::new(),
            per_100g: Vec::new(),
            index: HashMap::new(),
        };
        for (row, (name, nv)) in rows.into_iter().enumerate() {
            table.push(name.into(), nv, row + 1)?;
        }
        Ok(table)
    }

    fn push(&mut self, name: String, nv: NutrientVector, row: usize) -> Result<()> {
        let location = || format!("row {row}");
        if name.is_empty() {
            return Err(Error::load(location(), "empty ingredient name"));
        }
        let fields = nv.fields();
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::load(location(), "non-finite nutrient value"));
        }
        if fields.iter().any(|v| *v < 0.0) {
            return Err(Error::load(location(), "negative nutrient"));
        }
        if self.index.contains_key(&name) {
            return Err(Error::load(location(), format!("duplicate ingredient name `{name}`")));
        }
        let id = IngredientId(self.names.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.per_100g.push(nv);
        Ok(())
    }

    /// Parse the CSV nutrient table. Row numbers in errors are file line
    /// numbers, so the first data row is row 2.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::load("header", format!("missing column `{name}`")))
        };
        let name_col = column("name")?;
        let mut value_cols = [0usize; 8];
        for (slot, name) in value_cols.iter_mut().zip(TABLE_COLUMNS) {
            *slot = column(name)?;
        }

        let mut table = NutrientTable {
            names: Vec::new(),
            per_100g: Vec::new(),
            index: HashMap::new(),
        };
        for record in csv.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::load(format!("row {line}"), e.to_string())
            })?;
            let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let mut values = [0.0f64; 8];
            for (value, (&col, name)) in values.iter_mut().zip(value_cols.iter().zip(TABLE_COLUMNS)) {
                let raw = record.get(col).unwrap_or("");
                *value = raw.parse::<f64>().map_err(|_| {
                    Error::load(format!("row {row}"), format!("invalid {name} value `{raw}`"))
                })?;
            }
            let [protein, carbohydrates, sugars, fat, saturated_fat, sodium, fiber, energy] = values;
            let nv = NutrientVector {
                protein,
                carbohydrates,
                sugars,
                fat,
                saturated_fat,
                sodium,
                fiber,
                energy,
            };
            let name = record.get(name_col).unwrap_or("").to_string();
            table.push(name, nv, row)?;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: IngredientId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<IngredientId> {
        self.index.get(name).copied()
    }

    pub fn per_100g(&self, id: IngredientId) -> Option<&NutrientVector> {
        self.per_100g.get(id.index())
    }

    /// Hex digest of the ordered vocabulary. Models record it so that a
    /// model trained against one table is rejected against another.
    pub fn vocab_hash(&self) -> String {
        vocab_hash(&self.names)
    }

    /// Write the table back out in the CSV layout it is loaded from.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let mut header = vec!["name"];
        header.extend(TABLE_COLUMNS);
        csv.write_record(&header)?;
        for (name, nv) in self.names.iter().zip(&self.per_100g) {
            let mut row = vec![name.clone()];
            row.extend(nv.fields().iter().map(|v| v.to_string()));
            csv.write_record(&row)?;
        }
        csv.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn vocab_hash(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(&hasher.finalize()[..16])
}

pub fn load_nutrient_table(path: impl AsRef<Path>) -> Result<NutrientTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    NutrientTable::from_reader(BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecipeEntry {
    pub ingredient: IngredientId,
    pub grams: f64,
}

/// A parsed recipe: at least two distinct ingredients, each with a positive amount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: String,
    entries: Vec<RecipeEntry>,
}

impl Recipe {
    /// Build a recipe, merging repeated ingredients by summing their amounts.
    /// Entries keep the order in which each ingredient first appears.
    pub fn new(id: impl Into<String>, entries: impl IntoIterator<Item = (IngredientId, f64)>) -> Result<Self> {
        let id = id.into();
        let mut merged: Vec<RecipeEntry> = Vec::new();
        for (ingredient, grams) in entries {
            if !(grams.is_finite() && grams > 0.0) {
                return Err(Error::load(
                    format!("recipe `{id}`"),
                    format!("amount {grams} for ingredient {ingredient} is not positive"),
                ));
            }
            match merged.iter_mut().find(|e| e.ingredient == ingredient) {
                Some(entry) => entry.grams += grams,
                None => merged.push(RecipeEntry { ingredient, grams }),
            }
        }
        if merged.len() < 2 {
            return Err(Error::load(
                format!("recipe `{id}`"),
                "fewer than two distinct ingredients",
            ));
        }
        Ok(Recipe { id, entries: merged })
    }

    pub fn entries(&self) -> &[RecipeEntry] {
        &self.entries
    }

    pub fn ingredients(&self) -> impl Iterator<Item = IngredientId> + '_ {
        self.entries.iter().map(|e| e.ingredient)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: IngredientId) -> bool {
        self.entries.iter().any(|e| e.ingredient == id)
    }

    pub fn grams(&self, id: IngredientId) -> f64 {
        self.entries
            .iter()
            .find(|e| e.ingredient == id)
            .map_or(0.0, |e| e.grams)
    }

    pub fn total_grams(&self) -> f64 {
        self.entries.iter().map(|e| e.grams).sum()
    }

    /// Same recipe with every amount multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Recipe {
        Recipe {
            id: self.id.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| RecipeEntry {
                    ingredient: e.ingredient,
                    grams: e.grams * factor,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Recipes over a fixed vocabulary, optionally assigned to train/validation/test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    recipes: Vec<Recipe>,
    vocab_size: usize,
    vocab_hash: String,
    /// Parallel to `recipes`; empty until [`split_corpus`] runs.
    splits: Vec<Split>,
}

impl Corpus {
    /// Assemble a corpus from already-built recipes, checking every
    /// ingredient against the table and rejecting duplicate recipe ids.
    pub fn new(recipes: Vec<Recipe>, table: &NutrientTable) -> Result<Self> {
        let mut seen = HashSet::new();
        for recipe in &recipes {
            if !seen.insert(recipe.id.as_str()) {
                return Err(Error::load(
                    format!("recipe `{}`", recipe.id),
                    "duplicate recipe id",
                ));
            }
            for id in recipe.ingredients() {
                if id.index() >= table.len() {
                    return Err(Error::IngredientOutOfRange {
                        id: id.index(),
                        vocab_size: table.len(),
                    });
                }
            }
        }
        Ok(Corpus {
            recipes,
            vocab_size: table.len(),
            vocab_hash: table.vocab_hash(),
            splits: Vec::new(),
        })
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    pub fn is_split(&self) -> bool {
        !self.splits.is_empty()
    }

    pub fn split_of(&self, index: usize) -> Option<Split> {
        self.splits.get(index).copied()
    }

    pub fn split_of_id(&self, id: &str) -> Option<Split> {
        let index = self.recipes.iter().position(|r| r.id == id)?;
        self.split_of(index)
    }

    /// The recipes assigned to `split`, as a corpus over the same vocabulary.
    /// An unsplit corpus has no parts.
    pub fn part(&self, split: Split) -> Corpus {
        let recipes = self
            .recipes
            .iter()
            .zip(&self.splits)
            .filter(|(_, s)| **s == split)
            .map(|(r, _)| r.clone())
            .collect();
        Corpus {
            recipes,
            vocab_size: self.vocab_size,
            vocab_hash: self.vocab_hash.clone(),
            splits: Vec::new(),
        }
    }

    pub fn split_sizes(&self) -> [usize; 3] {
        let mut sizes = [0usize; 3];
        for s in &self.splits {
            sizes[*s as usize] += 1;
        }
        sizes
    }

    /// Sorted ingredient lists, one per recipe; rows of the binary
    /// recipe-ingredient matrix.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        self.recipes
            .iter()
            .map(|r| {
                let mut row: Vec<usize> = r.ingredients().map(IngredientId::index).collect();
                row.sort_unstable();
                row
            })
            .collect()
    }

    /// Re-check the invariants of a corpus read back from a cache file.
    pub fn validate(&self) -> Result<()> {
        if !self.splits.is_empty() && self.splits.len() != self.recipes.len() {
            return Err(Error::load("corpus", "split assignment does not cover every recipe"));
        }
        let mut seen = HashSet::new();
        for r in &self.recipes {
            let location = || format!("recipe `{}`", r.id);
            if !seen.insert(r.id.as_str()) {
                return Err(Error::load(location(), "duplicate recipe id"));
            }
            let distinct: HashSet<_> = r.ingredients().collect();
            if distinct.len() < 2 || distinct.len() != r.len() {
                return Err(Error::load(location(), "needs at least two distinct ingredients"));
            }
            for e in r.entries() {
                if e.ingredient.index() >= self.vocab_size {
                    return Err(Error::IngredientOutOfRange { id: e.ingredient.index(), vocab_size: self.vocab_size });
                }
                if !(e.grams.is_finite() && e.grams > 0.0) {
                    return Err(Error::load(location(), "amounts must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn check_compatible(&self, table: &NutrientTable) -> Result<()> {
        if self.vocab_hash != table.vocab_hash() {
            return Err(Error::Incompatible(format!(
                "corpus vocabulary {} does not match nutrient table {}",
                self.vocab_hash,
                table.vocab_hash()
            )));
        }
        Ok(())
    }
}

/// Counts gathered while reading a recipe file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub lines: usize,
    pub kept: usize,
    /// Recipes left with fewer than two distinct ingredients.
    pub dropped_recipes: usize,
    /// Entries naming an ingredient absent from the nutrient table.
    pub skipped_unknown: usize,
    /// Entries with a zero, negative or non-finite amount.
    pub skipped_bad_amount: usize,
    pub unknown_names: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
struct RawEntry {
    name: String,
    grams: f64,
}

#[derive(Deserialize)]
struct RawRecipe {
    id: String,
    ingredients: Vec<RawEntry>,
}

/// Parse the JSON-lines recipe file against `table`.
pub fn read_recipes<R: BufRead>(reader: R, table: &NutrientTable) -> Result<(Corpus, LoadReport)> {
    let mut report = LoadReport::default();
    let mut recipes = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::load(format!("line {line_no}"), e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let raw: RawRecipe = serde_json::from_str(&line)
            .map_err(|e| Error::load(format!("line {line_no}"), e.to_string()))?;
        if !ids.insert(raw.id.clone()) {
            return Err(Error::load(
                format!("line {line_no}"),
                format!("duplicate recipe id `{}`", raw.id),
            ));
        }
        let mut entries = Vec::with_capacity(raw.ingredients.len());
        for entry in raw.ingredients {
            let Some(id) = table.id(&entry.name) else {
                report.skipped_unknown += 1;
                *report.unknown_names.entry(entry.name).or_default() += 1;
                continue;
            };
            if !(entry.grams.is_finite() && entry.grams > 0.0) {
                report.skipped_bad_amount += 1;
                continue;
            }
            entries.push((id, entry.grams));
        }
        let distinct: HashSet<_> = entries.iter().map(|(id, _)| *id).collect();
        if distinct.len() < 2 {
            report.dropped_recipes += 1;
            continue;
        }
        recipes.push(Recipe::new(raw.id, entries)?);
    }
    report.kept = recipes.len();
    if report.skipped_unknown > 0 {
        log::warn!(
            "skipped {} entries naming {} unknown ingredients",
            report.skipped_unknown,
            report.unknown_names.len()
        );
    }
    Ok((Corpus::new(recipes, table)?, report))
}

/// Write recipes in the JSON-lines input format, names taken from `table`.
pub fn write_recipes<W: std::io::Write>(mut writer: W, recipes: &[Recipe], table: &NutrientTable) -> Result<()> {
    #[derive(Serialize)]
    struct OutEntry<'a> {
        name: &'a str,
        grams: f64,
    }
    #[derive(Serialize)]
    struct OutRecipe<'a> {
        id: &'a str,
        ingredients: Vec<OutEntry<'a>>,
    }
    for r in recipes {
        let mut ingredients = Vec::with_capacity(r.len());
        for e in r.entries() {
            let name = table.name(e.ingredient).ok_or(Error::IngredientOutOfRange {
                id: e.ingredient.index(),
                vocab_size: table.len(),
            })?;
            ingredients.push(OutEntry { name, grams: e.grams });
        }
        serde_json::to_writer(&mut writer, &OutRecipe { id: &r.id, ingredients })?;
        writer.write_all(b"\n").map_err(|e| Error::io("<recipes>", e))?;
    }
    Ok(())
}

pub fn load_recipes(path: impl AsRef<Path>, table: &NutrientTable) -> Result<(Corpus, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_recipes(BufReader::new(file), table)
}

/// Seeded 8:1:1 train/validation/test assignment.
///
/// Train gets `round(0.8 n)`, validation `round(0.1 n)`, test the rest.
pub fn split_corpus(mut corpus: Corpus, seed: u64) -> Result<Corpus> {
    let n = corpus.len();
    if n < 10 {
        return Err(Error::Degenerate(format!(
            "cannot split a corpus of {n} recipes (need at least 10)"
        )));
    }
    let n_train = (0.8 * n as f64).round() as usize;
    let n_val = (0.1 * n as f64).round() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut splits = vec![Split::Test; n];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    corpus.splits = splits;
    Ok(corpus)
}

/// Sum of `(grams / 100) * per-100 g profile` over the recipe's entries.
pub fn recipe_nutrients(recipe: &Recipe, table: &NutrientTable) -> Result<NutrientVector> {
    entries_nutrients(
        recipe.entries().iter().map(|e| (e.ingredient, e.grams)),
        table,
    )
}

/// Nutrient totals for arbitrary `(ingredient, grams)` pairs.
pub fn entries_nutrients(
    entries: impl IntoIterator<Item = (IngredientId, f64)>,
    table: &NutrientTable,
) -> Result<NutrientVector> {
    let mut total = NutrientVector::zero();
    for (id, grams) in entries {
        let per_100g = table.per_100g(id).ok_or(Error::IngredientOutOfRange {
            id: id.index(),
            vocab_size: table.len(),
        })?;
        total.add_scaled(per_100g, grams / 100.0);
    }
    Ok(total)
}
