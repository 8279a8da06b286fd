//! Synthetic linked cohorts and data-quality degradations.

use rand::Rng;
use rayon::prelude::*;

use crate::countermeasures::flip_calls;
use crate::error::{Error, Result};
use crate::genome::{
    Genotype, GenotypeDatabase, GenotypeRecord, PhenotypeDatabase, PhenotypeProfile,
    PhenotypeRecord,
};
use crate::model::TraitModel;
use crate::rng::substream;

#[derive(Debug, Clone)]
pub struct PopulationConfig {
    /// Generating model; its panel supplies allele frequencies and its traits the phenotypes.
    pub model: TraitModel,
    pub size: usize,
    pub seed: u64,
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("population size must be positive".into()));
        }
        if self.model.evaluated_traits() != self.model.traits().len() {
            return Err(Error::Config(
                "every trait of a generating model needs at least one association".into(),
            ));
        }
        Ok(())
    }
}

/// Individual ids `ind0`, `ind1`, ... zero-padded so lexical and numeric order agree.
pub fn individual_id(ordinal: usize, size: usize) -> String {
    let width = size.saturating_sub(1).to_string().len();
    format!("ind{ordinal:0width$}")
}

fn sample_categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Hardy–Weinberg genotype call for minor allele frequency `maf`.
fn sample_call(maf: f64, rng: &mut impl Rng) -> u8 {
    let q = 1.0 - maf;
    sample_categorical(&[q * q, 2.0 * maf * q, maf * maf], rng) as u8
}

/// Draws a cohort whose genotype and phenotype databases share ids.
///
/// Individual `k` uses its own random substream, so the result does not
/// depend on how the work is split across threads.
pub fn generate_population(
    cfg: &PopulationConfig,
) -> Result<(GenotypeDatabase, PhenotypeDatabase)> {
    cfg.validate()?;
    let model = &cfg.model;
    let panel = model.panel();
    let people: Vec<(GenotypeRecord, PhenotypeRecord)> = (0..cfg.size)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(cfg.seed, k as u64);
            let calls: Vec<Option<u8>> = panel
                .snps()
                .iter()
                .map(|s| Some(sample_call(s.maf, &mut rng)))
                .collect();
            let genotype = Genotype::new(calls).expect("sampled calls are valid");
            let mut values = vec![None; model.traits().len()];
            for entry in model.entries() {
                let dist = model.trait_distribution(entry, &genotype);
                values[entry.trait_index] = Some(sample_categorical(&dist, &mut rng));
            }
            let id = individual_id(k, cfg.size);
            (
                GenotypeRecord {
                    id: id.clone(),
                    genotype,
                },
                PhenotypeRecord {
                    id,
                    profile: PhenotypeProfile::new(values),
                },
            )
        })
        .collect();
    let (grecs, precs): (Vec<_>, Vec<_>) = people.into_iter().unzip();
    Ok((
        GenotypeDatabase::new(panel.clone(), grecs)?,
        PhenotypeDatabase::new(model.traits().to_vec(), precs)?,
    ))
}

/// Replaces each present trait value, with probability `rate`, by a different
/// value of the same domain chosen uniformly.
pub fn inject_phenotype_errors(
    pdb: &PhenotypeDatabase,
    rate: f64,
    seed: u64,
) -> Result<PhenotypeDatabase> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::domain(format!("rate {rate} outside [0, 1]")));
    }
    let traits = pdb.traits();
    let profiles = pdb
        .records()
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let mut rng = substream(seed, k as u64);
            let values = r
                .profile
                .values()
                .iter()
                .zip(traits)
                .map(|(v, t)| {
                    v.map(|v| {
                        if rng.gen::<f64>() < rate {
                            let m = t.arity();
                            (v + 1 + rng.gen_range(0..m - 1)) % m
                        } else {
                            v
                        }
                    })
                })
                .collect();
            PhenotypeProfile::new(values)
        })
        .collect();
    Ok(pdb.with_profiles(profiles))
}

/// Sequencing errors in a genotype database; same mechanics as genotype noise.
pub fn inject_sequencing_errors(
    gdb: &GenotypeDatabase,
    rate: f64,
    seed: u64,
) -> Result<GenotypeDatabase> {
    flip_calls(gdb, rate, seed)
}
