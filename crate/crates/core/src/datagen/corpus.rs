//! Synthetic two-database record-linkage corpus.
//!
//! Masters are complete records drawn from seeded name/street pools. A
//! `match_fraction` of update records are corrupted copies of distinct master
//! records; the rest are fresh people. Two fields are held sacred on true
//! matches: the last name (so blocking by last name never loses a true match)
//! and the graduation year (so year equality is a 100%-recall surrogate).
//! Distinct people draw years i.i.d., making the surrogate independent of the
//! other fields on non-matching pairs.

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::linkage::{LinkageCorpus, LinkageRecord, TruthPair};

const SYLLABLES: &[&str] = &[
    "an", "bar", "bel", "ber", "bro", "car", "dan", "der", "dor", "el", "fen", "fer", "gar",
    "gol", "gran", "hal", "han", "har", "jen", "kar", "kel", "lan", "lar", "lin", "lor", "mar",
    "mel", "mor", "nan", "nel", "nor", "par", "pel", "per", "quin", "ran", "rel", "rob", "ros",
    "sal", "san", "sel", "ser", "tan", "tel", "ter", "tor", "van", "vel", "ver", "wal", "wel",
    "wil", "win", "yor", "zan",
];

const STREET_SUFFIXES: &[&str] = &["St", "Ave", "Rd", "Blvd", "Ln", "Dr"];

const SPECIALTIES: &[&str] = &[
    "allergy",
    "anesthesiology",
    "cardiology",
    "dermatology",
    "emergency medicine",
    "endocrinology",
    "family practice",
    "gastroenterology",
    "geriatrics",
    "hematology",
    "immunology",
    "internal medicine",
    "nephrology",
    "neurology",
    "obstetrics",
    "oncology",
    "ophthalmology",
    "orthopedics",
    "pathology",
    "pediatrics",
    "psychiatry",
    "radiology",
    "surgery",
    "urology",
];

/// Per-field corruption probabilities applied to true-match update records.
/// Graduation year and last name are never corrupted on matches;
/// `fresh_year_missing` applies only to non-match records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldNoise {
    pub first_typo: f64,
    pub first_missing: f64,
    pub middle_missing: f64,
    pub street_typo: f64,
    pub street_replace: f64,
    pub street_missing: f64,
    pub phone_replace: f64,
    pub phone_missing: f64,
    pub specialty_replace: f64,
    pub specialty_missing: f64,
    pub fresh_year_missing: f64,
}

impl Default for FieldNoise {
    fn default() -> Self {
        Self {
            first_typo: 0.25,
            first_missing: 0.08,
            middle_missing: 0.15,
            street_typo: 0.30,
            street_replace: 0.12,
            street_missing: 0.08,
            phone_replace: 0.20,
            phone_missing: 0.12,
            specialty_replace: 0.15,
            specialty_missing: 0.10,
            fresh_year_missing: 0.15,
        }
    }
}

impl FieldNoise {
    pub fn zero() -> Self {
        Self {
            first_typo: 0.0,
            first_missing: 0.0,
            middle_missing: 0.0,
            street_typo: 0.0,
            street_replace: 0.0,
            street_missing: 0.0,
            phone_replace: 0.0,
            phone_missing: 0.0,
            specialty_replace: 0.0,
            specialty_missing: 0.0,
            fresh_year_missing: 0.0,
        }
    }

    fn probabilities(&self) -> [f64; 11] {
        [
            self.first_typo,
            self.first_missing,
            self.middle_missing,
            self.street_typo,
            self.street_replace,
            self.street_missing,
            self.phone_replace,
            self.phone_missing,
            self.specialty_replace,
            self.specialty_missing,
            self.fresh_year_missing,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkageCorpusSpec {
    pub n_master: usize,
    pub n_update: usize,
    pub match_fraction: f64,
    /// Inclusive graduation-year range.
    pub year_range: (u16, u16),
    pub name_pool_size: usize,
    pub field_noise: FieldNoise,
    pub seed: u64,
}

impl Default for LinkageCorpusSpec {
    fn default() -> Self {
        Self {
            n_master: 10_000,
            n_update: 500,
            match_fraction: 0.9,
            year_range: (1950, 2005),
            name_pool_size: 500,
            field_noise: FieldNoise::default(),
            seed: 7,
        }
    }
}

impl LinkageCorpusSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.n_master == 0 || self.n_update == 0 || self.name_pool_size == 0 {
            return Err(DatagenError::InvalidSpec(
                "record and pool counts must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.match_fraction) {
            return Err(DatagenError::InvalidSpec(format!(
                "match_fraction {} outside [0, 1]",
                self.match_fraction
            )));
        }
        if self.year_range.0 > self.year_range.1 {
            return Err(DatagenError::InvalidSpec(format!(
                "empty year range {:?}",
                self.year_range
            )));
        }
        if self
            .field_noise
            .probabilities()
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(DatagenError::InvalidSpec(
                "field noise probabilities must lie in [0, 1]".into(),
            ));
        }
        let matches = (self.match_fraction * self.n_update as f64).round() as usize;
        if matches > self.n_master {
            return Err(DatagenError::InvalidSpec(format!(
                "{matches} matched updates need at least as many master records"
            )));
        }
        Ok(())
    }
}

struct Pools {
    first: Vec<String>,
    last: Vec<String>,
    street_names: Vec<String>,
}

fn synth_name(rng: &mut ChaCha8Rng) -> String {
    let count = rng.random_range(2..=3);
    let mut name = String::new();
    for _ in 0..count {
        name.push_str(SYLLABLES.choose(rng).expect("nonempty syllable list"));
    }
    let mut chars = name.chars();
    let head = chars.next().expect("synthesized names are nonempty");
    head.to_uppercase().collect::<String>() + chars.as_str()
}

fn build_pool(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut pool = Vec::with_capacity(size);
    let mut seen = std::collections::HashSet::new();
    while pool.len() < size {
        let name = synth_name(rng);
        if seen.insert(name.clone()) {
            pool.push(name);
        }
    }
    pool
}

fn synth_phone(rng: &mut ChaCha8Rng) -> String {
    (0..10).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
}

fn synth_street(rng: &mut ChaCha8Rng, pools: &Pools) -> String {
    format!(
        "{} {} {}",
        rng.random_range(1..1000),
        pools.street_names.choose(rng).expect("nonempty pool"),
        STREET_SUFFIXES.choose(rng).expect("nonempty suffix list"),
    )
}

fn synth_year(rng: &mut ChaCha8Rng, range: (u16, u16)) -> u16 {
    let span = (range.1 - range.0) as u64;
    if span == 0 {
        return range.0;
    }
    // A single-mode hump over the range, more year collisions than uniform.
    let binomial = Binomial::new(span, 0.62).expect("valid binomial parameters");
    range.0 + binomial.sample(rng) as u16
}

/// One random character-level edit: substitute, insert or delete.
fn typo(rng: &mut ChaCha8Rng, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let letter = char::from(b'a' + rng.random_range(0..26u8));
    if chars.is_empty() {
        return letter.to_string();
    }
    match rng.random_range(0..3u8) {
        0 => {
            let i = rng.random_range(0..chars.len());
            chars[i] = letter;
        }
        1 => {
            let i = rng.random_range(0..=chars.len());
            chars.insert(i, letter);
        }
        _ => {
            let i = rng.random_range(0..chars.len());
            chars.remove(i);
        }
    }
    chars.into_iter().collect()
}

fn synth_master(rng: &mut ChaCha8Rng, id: u32, pools: &Pools, spec: &LinkageCorpusSpec) -> LinkageRecord {
    LinkageRecord {
        id,
        first: Some(pools.first.choose(rng).expect("nonempty pool").clone()),
        last: pools.last.choose(rng).expect("nonempty pool").clone(),
        middle_initial: Some(char::from(b'A' + rng.random_range(0..26u8))),
        street: Some(synth_street(rng, pools)),
        phone: Some(synth_phone(rng)),
        specialty: Some(SPECIALTIES.choose(rng).expect("nonempty list").to_string()),
        grad_year: Some(synth_year(rng, spec.year_range)),
    }
}

fn roll(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Corrupt a copied master record. Last name and graduation year are left
/// untouched: consistent-when-present is the premise the surrogate rests on.
fn corrupt(
    rng: &mut ChaCha8Rng,
    original: &LinkageRecord,
    pools: &Pools,
    noise: &FieldNoise,
) -> LinkageRecord {
    let mut record = original.clone();

    if roll(rng, noise.first_missing) {
        record.first = None;
    } else if roll(rng, noise.first_typo) {
        record.first = record.first.map(|name| typo(rng, &name));
    }

    if roll(rng, noise.middle_missing) {
        record.middle_initial = None;
    }

    if roll(rng, noise.street_missing) {
        record.street = None;
    } else if roll(rng, noise.street_replace) {
        record.street = Some(synth_street(rng, pools));
    } else if roll(rng, noise.street_typo) {
        record.street = record.street.map(|street| typo(rng, &street));
    }

    if roll(rng, noise.phone_missing) {
        record.phone = None;
    } else if roll(rng, noise.phone_replace) {
        record.phone = Some(synth_phone(rng));
    }

    if roll(rng, noise.specialty_missing) {
        record.specialty = None;
    } else if roll(rng, noise.specialty_replace) {
        record.specialty = Some(SPECIALTIES.choose(rng).expect("nonempty list").to_string());
    }

    record
}

/// Generate the corpus. Ground truth is returned for evaluation only; the
/// matcher itself never sees more of it than its threshold holdout.
pub fn gen_linkage_corpus(spec: &LinkageCorpusSpec) -> Result<LinkageCorpus, DatagenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pools = Pools {
        first: build_pool(&mut rng, spec.name_pool_size),
        last: build_pool(&mut rng, spec.name_pool_size),
        street_names: build_pool(&mut rng, spec.name_pool_size),
    };

    let master: Vec<LinkageRecord> = (0..spec.n_master)
        .map(|i| synth_master(&mut rng, i as u32 + 1, &pools, spec))
        .collect();

    let match_count = (spec.match_fraction * spec.n_update as f64).round() as usize;
    let matched_masters = index::sample(&mut rng, spec.n_master, match_count).into_vec();

    // Matches first, fresh records after, then one shuffle fixes the order.
    let mut sources: Vec<Option<usize>> = matched_masters.iter().copied().map(Some).collect();
    sources.resize(spec.n_update, None);
    sources.shuffle(&mut rng);

    let mut update = Vec::with_capacity(spec.n_update);
    let mut truth = Vec::with_capacity(spec.n_update);
    for (i, source) in sources.iter().enumerate() {
        let update_id = i as u32 + 1;
        let record = match source {
            Some(master_idx) => {
                let mut copied = corrupt(&mut rng, &master[*master_idx], &pools, &spec.field_noise);
                copied.id = update_id;
                truth.push(TruthPair {
                    update_id,
                    master_id: Some(master[*master_idx].id),
                });
                copied
            }
            None => {
                let mut fresh = synth_master(&mut rng, update_id, &pools, spec);
                if roll(&mut rng, spec.field_noise.fresh_year_missing) {
                    fresh.grad_year = None;
                }
                truth.push(TruthPair {
                    update_id,
                    master_id: None,
                });
                fresh
            }
        };
        update.push(record);
    }

    Ok(LinkageCorpus {
        master,
        update,
        truth,
    })
}
