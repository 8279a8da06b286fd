//! SNP-to-trait knowledge: conditional probability tables `P(trait value | call)`
//! per (trait, SNP) association, loaded from a curated file or trained from
//! linked data, and the log-likelihood kernel shared by both attacks.
//!
//! Traits and SNPs are treated as conditionally independent, so the score of
//! a (phenotype, genotype) pair is a plain sum of log CPT entries.
//!
//! # Model file
//!
//! ```json
//! {
//!   "provenance": "curated",
//!   "panel": [{ "rsid": "rs12913832", "maf": 0.3 }],
//!   "traits": [
//!     {
//!       "trait": "eye_colour",
//!       "domain": ["blue", "brown"],
//!       "associations": [
//!         { "rsid": "rs12913832", "cpt": [0.2, 0.8, 0.5, 0.5, 0.12, 0.88] }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! `cpt` is row-major: three rows (call 0, 1, 2) of `|domain|` probabilities.
//! `provenance` defaults to `curated`; `panel` is optional when the caller
//! already has one.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{
    validate_traits, Genotype, GenotypeDatabase, PhenotypeDatabase, PhenotypeProfile, SnpDef,
    SnpPanel, TraitDef,
};

/// Smallest probability any CPT cell may hold.
pub const PROBABILITY_FLOOR: f64 = 1e-6;
/// Additive smoothing for supervised counts.
pub const LAPLACE_ALPHA: f64 = 1.0;
/// Maximum deviation of a raw CPT row sum from 1 before it is rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

pub const CALL_STATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Curated,
    Supervised,
}

/// Three rows (calls 0/1/2) of a categorical distribution over a trait domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    arity: usize,
    probs: Vec<f64>,
    logs: Vec<f64>,
}

/// Clips cells below the floor and rescales the rest so the row sums to 1.
/// Repeats until no rescaled cell drops under the floor.
fn floor_row(row: &mut [f64]) {
    let mut pinned = vec![false; row.len()];
    loop {
        for (p, pin) in row.iter_mut().zip(pinned.iter_mut()) {
            if *p <= PROBABILITY_FLOOR {
                *p = PROBABILITY_FLOOR;
                *pin = true;
            }
        }
        let pinned_count = pinned.iter().filter(|&&p| p).count();
        if pinned_count == 0 {
            return;
        }
        let fixed = pinned_count as f64 * PROBABILITY_FLOOR;
        let free: f64 = row
            .iter()
            .zip(&pinned)
            .filter(|(_, &pin)| !pin)
            .map(|(p, _)| p)
            .sum();
        if free <= 0.0 {
            let u = 1.0 / row.len() as f64;
            row.iter_mut().for_each(|p| *p = u);
            return;
        }
        let scale = (1.0 - fixed) / free;
        let mut again = false;
        for (p, &pin) in row.iter_mut().zip(&pinned) {
            if !pin {
                *p *= scale;
                again |= *p < PROBABILITY_FLOOR;
            }
        }
        if !again {
            return;
        }
    }
}

impl Cpt {
    /// Validates a raw row-major table and applies the probability floor.
    pub fn new(arity: usize, raw: Vec<f64>) -> Result<Self> {
        if arity < 2 {
            return Err(Error::ModelFormat(format!("CPT arity {arity} < 2")));
        }
        if raw.len() != CALL_STATES * arity {
            return Err(Error::ModelFormat(format!(
                "CPT has {} entries, expected {}",
                raw.len(),
                CALL_STATES * arity
            )));
        }
        if let Some(p) = raw.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::ModelFormat(format!(
                "CPT entry {p} is not a probability"
            )));
        }
        let mut probs = raw;
        for (g, row) in probs.chunks_mut(arity).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::ModelFormat(format!(
                    "CPT row for call {g} sums to {sum}"
                )));
            }
            floor_row(row);
        }
        Ok(Cpt::from_floored(arity, probs))
    }

    /// Skips the row-sum check; rows are renormalized after flooring.
    fn from_weights(arity: usize, mut weights: Vec<f64>) -> Self {
        for row in weights.chunks_mut(arity) {
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            floor_row(row);
        }
        Cpt::from_floored(arity, weights)
    }

    fn from_floored(arity: usize, probs: Vec<f64>) -> Self {
        let logs = probs.iter().map(|p| p.ln()).collect();
        Cpt { arity, probs, logs }
    }

    pub fn uniform(arity: usize) -> Self {
        Cpt::from_weights(arity, vec![1.0; CALL_STATES * arity])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn prob(&self, call: u8, value: usize) -> f64 {
        self.probs[call as usize * self.arity + value]
    }

    pub fn log_prob(&self, call: u8, value: usize) -> f64 {
        self.logs[call as usize * self.arity + value]
    }

    pub fn row(&self, call: u8) -> &[f64] {
        let start = call as usize * self.arity;
        &self.probs[start..start + self.arity]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub rsid: String,
    /// Position of `rsid` in the model's panel.
    pub snp: usize,
    pub cpt: Cpt,
}

/// All associations informing one trait.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitEntry {
    /// Position of the trait in the model's trait list.
    pub trait_index: usize,
    pub associations: Vec<Association>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraitModel {
    panel: SnpPanel,
    traits: Vec<TraitDef>,
    entries: Vec<TraitEntry>,
    provenance: Provenance,
}

/// One `(trait, rsid, raw row-major CPT)` triple used to assemble a model.
pub type AssociationSpec = (String, String, Vec<f64>);

impl TraitModel {
    /// Assembles a model over `panel` and `traits` from raw association tables.
    pub fn from_associations(
        panel: SnpPanel,
        traits: Vec<TraitDef>,
        associations: Vec<AssociationSpec>,
        provenance: Provenance,
    ) -> Result<Self> {
        validate_traits(&traits).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let mut entries: Vec<TraitEntry> = Vec::new();
        for (trait_name, rsid, raw) in associations {
            let t = traits
                .iter()
                .position(|t| t.name == trait_name)
                .ok_or_else(|| Error::ModelFormat(format!("unknown trait {trait_name}")))?;
            let snp = panel
                .position(&rsid)
                .ok_or_else(|| Error::ModelFormat(format!("unknown rsid {rsid}")))?;
            let cpt = Cpt::new(traits[t].arity(), raw)
                .map_err(|e| Error::ModelFormat(format!("{trait_name}/{rsid}: {e}")))?;
            let entry = match entries.iter_mut().find(|e| e.trait_index == t) {
                Some(e) => e,
                None => {
                    entries.push(TraitEntry {
                        trait_index: t,
                        associations: Vec::new(),
                    });
                    entries.last_mut().unwrap()
                }
            };
            if entry.associations.iter().any(|a| a.snp == snp) {
                return Err(Error::ModelFormat(format!(
                    "duplicate association {trait_name}/{rsid}"
                )));
            }
            entry.associations.push(Association { rsid, snp, cpt });
        }
        entries.sort_by_key(|e| e.trait_index);
        Ok(TraitModel {
            panel,
            traits,
            entries,
            provenance,
        })
    }

    /// Same associations with every CPT replaced by the uniform table.
    pub fn uniform_like(&self) -> Self {
        let mut m = self.clone();
        for e in &mut m.entries {
            let arity = self.traits[e.trait_index].arity();
            for a in &mut e.associations {
                a.cpt = Cpt::uniform(arity);
            }
        }
        m
    }

    pub fn panel(&self) -> &SnpPanel {
        &self.panel
    }

    pub fn traits(&self) -> &[TraitDef] {
        &self.traits
    }

    pub fn entries(&self) -> &[TraitEntry] {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Number of traits that contribute evidence.
    pub fn evaluated_traits(&self) -> usize {
        self.entries.len()
    }

    pub fn association_count(&self) -> usize {
        self.entries.iter().map(|e| e.associations.len()).sum()
    }

    /// `(trait, rsid)` pairs in model order.
    pub fn association_list(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .flat_map(|e| {
                e.associations
                    .iter()
                    .map(move |a| (self.traits[e.trait_index].name.clone(), a.rsid.clone()))
            })
            .collect()
    }

    /// Rebinds the model to a smaller panel; associations on absent SNPs are
    /// discarded and traits left without evidence stop being evaluated.
    pub fn restrict_to_panel(&self, panel: &SnpPanel) -> TraitModel {
        let entries = self
            .entries
            .iter()
            .filter_map(|e| {
                let associations: Vec<Association> = e
                    .associations
                    .iter()
                    .filter_map(|a| {
                        panel.position(&a.rsid).map(|snp| Association {
                            rsid: a.rsid.clone(),
                            snp,
                            cpt: a.cpt.clone(),
                        })
                    })
                    .collect();
                (!associations.is_empty()).then_some(TraitEntry {
                    trait_index: e.trait_index,
                    associations,
                })
            })
            .collect();
        TraitModel {
            panel: panel.clone(),
            traits: self.traits.clone(),
            entries,
            provenance: self.provenance,
        }
    }

    /// Mis-specifies every cell by `±delta` (random sign), then floors and
    /// renormalizes each row.
    pub fn perturbed(&self, delta: f64, seed: u64) -> Result<TraitModel> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::domain(format!(
                "perturbation {delta} outside [0, 1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = self.clone();
        for e in &mut m.entries {
            for a in &mut e.associations {
                let weights = a
                    .cpt
                    .as_slice()
                    .iter()
                    .map(|p| {
                        let shifted = if rng.gen::<bool>() {
                            p + delta
                        } else {
                            p - delta
                        };
                        shifted.max(0.0)
                    })
                    .collect::<Vec<_>>();
                let weights = fix_empty_rows(weights, a.cpt.arity());
                a.cpt = Cpt::from_weights(a.cpt.arity(), weights);
            }
        }
        Ok(m)
    }

    /// Distribution over the domain of `entry`'s trait given a genotype: the
    /// normalized product of the associated CPT rows. Missing calls are skipped.
    pub fn trait_distribution(&self, entry: &TraitEntry, g: &Genotype) -> Vec<f64> {
        let arity = self.traits[entry.trait_index].arity();
        let mut logw = vec![0.0; arity];
        for a in &entry.associations {
            if let Some(call) = g.call(a.snp) {
                for (v, w) in logw.iter_mut().enumerate() {
                    *w += a.cpt.log_prob(call, v);
                }
            }
        }
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= sum);
        w
    }

    /// Checks that a phenotype database uses exactly this model's trait list.
    pub fn check_phenotypes(&self, pdb: &PhenotypeDatabase) -> Result<()> {
        if pdb.traits() != self.traits.as_slice() {
            return Err(Error::domain(
                "phenotype database traits do not match the model's traits",
            ));
        }
        Ok(())
    }

    /// Checks that a genotype database uses this model's panel layout.
    pub fn check_genotypes(&self, gdb: &GenotypeDatabase) -> Result<()> {
        if !gdb.panel().rsids().eq(self.panel.rsids()) {
            return Err(Error::domain(
                "genotype database panel does not match the model's panel",
            ));
        }
        Ok(())
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            provenance: self.provenance,
            panel: Some(self.panel.snps().to_vec()),
            traits: self
                .entries
                .iter()
                .map(|e| {
                    let t = &self.traits[e.trait_index];
                    TraitSection {
                        name: t.name.clone(),
                        domain: t.domain.clone(),
                        associations: e
                            .associations
                            .iter()
                            .map(|a| AssociationSection {
                                rsid: a.rsid.clone(),
                                cpt: a.cpt.as_slice().to_vec(),
                            })
                            .collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

fn fix_empty_rows(mut weights: Vec<f64>, arity: usize) -> Vec<f64> {
    for row in weights.chunks_mut(arity) {
        if row.iter().sum::<f64>() <= 0.0 {
            row.iter_mut().for_each(|p| *p = 1.0);
        }
    }
    weights
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationSection {
    pub rsid: String,
    /// May be omitted in training templates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cpt: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitSection {
    #[serde(rename = "trait")]
    pub name: String,
    pub domain: Vec<String>,
    pub associations: Vec<AssociationSection>,
}

/// On-disk model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<Vec<SnpDef>>,
    pub traits: Vec<TraitSection>,
}

fn default_provenance() -> Provenance {
    Provenance::Curated
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelFile::parse(&text)
    }

    /// The panel embedded in the file.
    pub fn panel(&self) -> Result<SnpPanel> {
        let snps = self
            .panel
            .clone()
            .ok_or_else(|| Error::ModelFormat("model file has no panel".into()))?;
        SnpPanel::new(snps).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    /// Trait definitions declared by the file, in file order.
    pub fn traits(&self) -> Result<Vec<TraitDef>> {
        let traits: Vec<TraitDef> = self
            .traits
            .iter()
            .map(|t| TraitDef {
                name: t.name.clone(),
                domain: t.domain.clone(),
            })
            .collect();
        validate_traits(&traits).map_err(|e| Error::ModelFormat(e.to_string()))?;
        Ok(traits)
    }

    /// Binds the file to an existing panel and trait list.
    pub fn bind(&self, panel: &SnpPanel, traits: &[TraitDef]) -> Result<TraitModel> {
        let mut specs = Vec::new();
        for section in &self.traits {
            let known = traits
                .iter()
                .find(|t| t.name == section.name)
                .ok_or_else(|| Error::ModelFormat(format!("unknown trait {}", section.name)))?;
            if known.domain != section.domain {
                return Err(Error::ModelFormat(format!(
                    "domain of {} differs from the trait definition",
                    section.name
                )));
            }
            if section.associations.is_empty() {
                return Err(Error::ModelFormat(format!(
                    "trait {} has no associations",
                    section.name
                )));
            }
            for a in &section.associations {
                specs.push((section.name.clone(), a.rsid.clone(), a.cpt.clone()));
            }
        }
        TraitModel::from_associations(panel.clone(), traits.to_vec(), specs, self.provenance)
    }

    /// `(trait, rsid)` pairs in file order; CPT values are not consulted.
    pub fn association_list(&self) -> Vec<(String, String)> {
        self.traits
            .iter()
            .flat_map(|t| {
                t.associations
                    .iter()
                    .map(move |a| (t.name.clone(), a.rsid.clone()))
            })
            .collect()
    }

    /// Binds the file to its own embedded panel and trait list.
    pub fn into_model(&self) -> Result<TraitModel> {
        self.bind(&self.panel()?, &self.traits()?)
    }
}

/// Loads a curated (expert-knowledge) model and binds it to `panel` and `traits`.
pub fn load_curated_model(
    path: impl AsRef<Path>,
    panel: &SnpPanel,
    traits: &[TraitDef],
) -> Result<TraitModel> {
    let mut file = ModelFile::read(path)?;
    file.provenance = Provenance::Curated;
    file.bind(panel, traits)
}

/// Learns one CPT per `(trait, rsid)` association from individuals present in
/// both databases, with Laplace smoothing.
pub fn train_supervised(
    gdb: &GenotypeDatabase,
    pdb: &PhenotypeDatabase,
    associations: &[(String, String)],
) -> Result<TraitModel> {
    let pairs: Vec<(&Genotype, &PhenotypeProfile)> = pdb
        .records()
        .iter()
        .filter_map(|p| gdb.get(&p.id).map(|g| (g, &p.profile)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::domain(
            "genotype and phenotype databases share no ids",
        ));
    }
    let traits = pdb.traits();
    let mut specs = Vec::with_capacity(associations.len());
    for (trait_name, rsid) in associations {
        let t = traits
            .iter()
            .position(|t| &t.name == trait_name)
            .ok_or_else(|| {
                Error::domain(format!("association references unknown trait {trait_name}"))
            })?;
        let snp = gdb
            .panel()
            .position(rsid)
            .ok_or_else(|| Error::domain(format!("association references unknown rsid {rsid}")))?;
        let arity = traits[t].arity();
        let mut counts = vec![0.0; CALL_STATES * arity];
        for (g, p) in &pairs {
            if let (Some(call), Some(v)) = (g.call(snp), p.value(t)) {
                counts[call as usize * arity + v] += 1.0;
            }
        }
        let mut cpt = Vec::with_capacity(counts.len());
        for row in counts.chunks(arity) {
            let n: f64 = row.iter().sum();
            cpt.extend(
                row.iter()
                    .map(|c| (c + LAPLACE_ALPHA) / (n + LAPLACE_ALPHA * arity as f64)),
            );
        }
        specs.push((trait_name.clone(), rsid.clone(), cpt));
    }
    TraitModel::from_associations(
        gdb.panel().clone(),
        traits.to_vec(),
        specs,
        Provenance::Supervised,
    )
}

/// Sum of `ln P(value | call)` over every association whose trait value and
/// SNP call are both present. Zero when nothing applies.
pub fn log_likelihood(model: &TraitModel, p: &PhenotypeProfile, g: &Genotype) -> f64 {
    let mut total = 0.0;
    for e in &model.entries {
        let Some(v) = p.value(e.trait_index) else {
            continue;
        };
        for a in &e.associations {
            if let Some(call) = g.call(a.snp) {
                total += a.cpt.log_prob(call, v);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{GenotypeRecord, PhenotypeRecord};
    use proptest::prelude::*;
    use rand::Rng;

    fn eye_world() -> (SnpPanel, Vec<TraitDef>) {
        (
            SnpPanel::new(vec![SnpDef::new("rs12913832", 0.3)]).unwrap(),
            vec![TraitDef::new("eye_colour", &["blue", "brown"]).unwrap()],
        )
    }

    fn eye_model(cpt: Vec<f64>) -> TraitModel {
        let (panel, traits) = eye_world();
        TraitModel::from_associations(
            panel,
            traits,
            vec![("eye_colour".into(), "rs12913832".into(), cpt)],
            Provenance::Curated,
        )
        .unwrap()
    }

    fn g(calls: &[Option<u8>]) -> Genotype {
        Genotype::new(calls.to_vec()).unwrap()
    }

    #[test]
    fn herc2_entry_gives_log_088() {
        let m = eye_model(vec![0.7, 0.3, 0.5, 0.5, 0.12, 0.88]);
        let p = PhenotypeProfile::new(vec![Some(1)]);
        assert!((log_likelihood(&m, &p, &g(&[Some(2)])) - 0.88f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn all_missing_scores_zero() {
        let m = eye_model(vec![0.7, 0.3, 0.5, 0.5, 0.12, 0.88]);
        assert_eq!(
            log_likelihood(&m, &PhenotypeProfile::new(vec![None]), &g(&[Some(2)])),
            0.0
        );
        assert_eq!(
            log_likelihood(&m, &PhenotypeProfile::new(vec![Some(0)]), &g(&[None])),
            0.0
        );
    }

    #[test]
    fn independent_traits_multiply() {
        let panel = SnpPanel::new(vec![SnpDef::new("rs1", 0.2), SnpDef::new("rs2", 0.2)]).unwrap();
        let traits = vec![
            TraitDef::new("a", &["x", "y"]).unwrap(),
            TraitDef::new("b", &["p", "q", "r", "s"]).unwrap(),
        ];
        let m = TraitModel::from_associations(
            panel,
            traits,
            vec![
                ("a".into(), "rs1".into(), vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5]),
                ("b".into(), "rs2".into(), vec![0.25; 12]),
            ],
            Provenance::Curated,
        )
        .unwrap();
        let p = PhenotypeProfile::new(vec![Some(0), Some(3)]);
        // 0.5 * 0.25 = 0.125
        assert!((log_likelihood(&m, &p, &g(&[Some(1), Some(0)])) - 0.125f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_cpt_loads() {
        let m = eye_model(vec![0.5; 6]);
        let p = PhenotypeProfile::new(vec![Some(0)]);
        let a = log_likelihood(&m, &p, &g(&[Some(0)]));
        let b = log_likelihood(&m, &p, &g(&[Some(2)]));
        assert_eq!(a, b);
    }

    #[test]
    fn bad_row_sum_rejected() {
        let (panel, traits) = eye_world();
        let err = TraitModel::from_associations(
            panel,
            traits,
            vec![(
                "eye_colour".into(),
                "rs12913832".into(),
                vec![0.25, 0.25, 0.5, 0.5, 0.5, 0.5],
            )],
            Provenance::Curated,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ModelFormat(_)));
    }

    #[test]
    fn unknown_names_rejected() {
        let (panel, traits) = eye_world();
        for (t, r) in [("hair", "rs12913832"), ("eye_colour", "rs1")] {
            let err = TraitModel::from_associations(
                panel.clone(),
                traits.clone(),
                vec![(t.into(), r.into(), vec![0.5; 6])],
                Provenance::Curated,
            )
            .unwrap_err();
            assert!(matches!(err, Error::ModelFormat(_)));
        }
    }

    #[test]
    fn floor_applied_and_rows_normalized() {
        let m = eye_model(vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
        let cpt = &m.entries()[0].associations[0].cpt;
        for call in 0..3u8 {
            let row = cpt.row(call);
            assert!(row.iter().all(|&p| p >= PROBABILITY_FLOOR));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(cpt.prob(0, 1), PROBABILITY_FLOOR);
        assert!(
            log_likelihood(&m, &PhenotypeProfile::new(vec![Some(1)]), &g(&[Some(0)])).is_finite()
        );
    }

    #[test]
    fn curated_file_round_trip() {
        let m = eye_model(vec![0.7, 0.3, 0.5, 0.5, 0.12, 0.88]);
        let file = ModelFile::parse(&m.to_json()).unwrap();
        assert_eq!(file.into_model().unwrap(), m);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let (panel, traits) = eye_world();
        assert_eq!(load_curated_model(&path, &panel, &traits).unwrap(), m);
    }

    #[test]
    fn curated_file_errors() {
        let (panel, traits) = eye_world();
        let bad = [
            r#"{"traits":[{"trait":"eye_colour","domain":["blue","brown"],"associations":[{"rsid":"rs12913832","cpt":[0.25,0.25,0.5,0.5,0.5,0.5]}]}]}"#,
            r#"{"traits":[{"trait":"eye_colour","domain":["blue","green"],"associations":[{"rsid":"rs12913832","cpt":[0.5,0.5,0.5,0.5,0.5,0.5]}]}]}"#,
            r#"{"traits":[{"trait":"eye_colour","domain":["blue","brown"],"associations":[]}]}"#,
            r#"{"traits":[{"trait":"eye_colour","domain":["blue","brown"],"associations":[{"rsid":"rs12913832","cpt":[0.5,0.5]}]}]}"#,
            r#"{"traits":[], "extra": 1}"#,
            "not json",
        ];
        for text in bad {
            let r = ModelFile::parse(text).and_then(|f| f.bind(&panel, &traits));
            assert!(matches!(r, Err(Error::ModelFormat(_))), "{text}");
        }
    }

    fn linked(rows: &[(u8, Option<usize>)]) -> (GenotypeDatabase, PhenotypeDatabase) {
        let (panel, traits) = eye_world();
        let gdb = GenotypeDatabase::new(
            panel,
            rows.iter()
                .enumerate()
                .map(|(i, (c, _))| GenotypeRecord {
                    id: format!("i{i:03}"),
                    genotype: g(&[Some(*c)]),
                })
                .collect(),
        )
        .unwrap();
        let pdb = PhenotypeDatabase::new(
            traits,
            rows.iter()
                .enumerate()
                .map(|(i, (_, v))| PhenotypeRecord {
                    id: format!("i{i:03}"),
                    profile: PhenotypeProfile::new(vec![*v]),
                })
                .collect(),
        )
        .unwrap();
        (gdb, pdb)
    }

    #[test]
    fn supervised_hand_count() {
        // 100 individuals with call 2, all brown; nobody with call 1
        let mut rows = vec![(2u8, Some(1)); 100];
        rows.push((0, Some(0)));
        rows.push((0, None));
        let (gdb, pdb) = linked(&rows);
        let m =
            train_supervised(&gdb, &pdb, &[("eye_colour".into(), "rs12913832".into())]).unwrap();
        assert_eq!(m.provenance(), Provenance::Supervised);
        let cpt = &m.entries()[0].associations[0].cpt;
        assert!((cpt.prob(2, 1) - 101.0 / 102.0).abs() < 1e-12);
        assert!((cpt.prob(1, 0) - 0.5).abs() < 1e-12);
        assert!((cpt.prob(0, 0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn supervised_errors() {
        let (gdb, pdb) = linked(&[(1, Some(0))]);
        assert!(matches!(
            train_supervised(&gdb, &pdb, &[("hair".into(), "rs12913832".into())]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            train_supervised(&gdb, &pdb, &[("eye_colour".into(), "rs9".into())]),
            Err(Error::Domain(_))
        ));
        let (_, other) = linked(&[(1, Some(0)), (1, Some(0))]);
        let renamed = PhenotypeDatabase::new(
            other.traits().to_vec(),
            vec![PhenotypeRecord {
                id: "zzz".into(),
                profile: PhenotypeProfile::new(vec![Some(0)]),
            }],
        )
        .unwrap();
        assert!(matches!(
            train_supervised(
                &gdb,
                &renamed,
                &[("eye_colour".into(), "rs12913832".into())]
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn supervised_converges_on_known_cpt() {
        let truth = [0.7, 0.2, 0.1, 0.3, 0.4, 0.3, 0.05, 0.15, 0.8];
        let panel = SnpPanel::new(vec![SnpDef::new("rs1", 0.5)]).unwrap();
        let traits = vec![TraitDef::new("hair", &["a", "b", "c"]).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut grecs = Vec::new();
        let mut precs = Vec::new();
        for i in 0..10_000 {
            let call: u8 = rng.gen_range(0..3);
            let u: f64 = rng.gen();
            let row = &truth[call as usize * 3..call as usize * 3 + 3];
            let v = if u < row[0] {
                0
            } else if u < row[0] + row[1] {
                1
            } else {
                2
            };
            grecs.push(GenotypeRecord {
                id: format!("{i}"),
                genotype: g(&[Some(call)]),
            });
            precs.push(PhenotypeRecord {
                id: format!("{i}"),
                profile: PhenotypeProfile::new(vec![Some(v)]),
            });
        }
        let gdb = GenotypeDatabase::new(panel, grecs).unwrap();
        let pdb = PhenotypeDatabase::new(traits, precs).unwrap();
        let m = train_supervised(&gdb, &pdb, &[("hair".into(), "rs1".into())]).unwrap();
        let learned = m.entries()[0].associations[0].cpt.as_slice();
        let err = learned
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.05, "max cell error {err}");
    }

    #[test]
    fn restrict_drops_traits_without_evidence() {
        let panel = SnpPanel::new(vec![SnpDef::new("rs1", 0.2), SnpDef::new("rs2", 0.2)]).unwrap();
        let traits = vec![
            TraitDef::new("a", &["x", "y"]).unwrap(),
            TraitDef::new("b", &["x", "y"]).unwrap(),
        ];
        let m = TraitModel::from_associations(
            panel,
            traits,
            vec![
                ("a".into(), "rs1".into(), vec![0.5; 6]),
                ("b".into(), "rs2".into(), vec![0.5; 6]),
            ],
            Provenance::Curated,
        )
        .unwrap();
        let smaller = SnpPanel::new(vec![SnpDef::new("rs2", 0.2)]).unwrap();
        let r = m.restrict_to_panel(&smaller);
        assert_eq!(r.evaluated_traits(), 1);
        assert_eq!(r.entries()[0].trait_index, 1);
        assert_eq!(r.entries()[0].associations[0].snp, 0);
    }

    #[test]
    fn perturbation_keeps_valid_rows() {
        let m = eye_model(vec![0.95, 0.05, 0.5, 0.5, 0.12, 0.88]);
        let p = m.perturbed(0.1, 3).unwrap();
        let cpt = &p.entries()[0].associations[0].cpt;
        for call in 0..3u8 {
            assert!((cpt.row(call).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(cpt.row(call).iter().all(|&x| x >= PROBABILITY_FLOOR));
        }
        assert_ne!(&p, &m);
        assert_eq!(m.perturbed(0.0, 3).unwrap(), m);
    }

    fn row_strategy(arity: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, CALL_STATES * arity).prop_map(move |mut w| {
            for row in w.chunks_mut(arity) {
                let s: f64 = row.iter().sum::<f64>() + 1e-12;
                row.iter_mut().for_each(|x| *x /= s);
                let fix: f64 = 1.0 - row.iter().sum::<f64>();
                row[0] += fix;
            }
            w
        })
    }

    proptest! {
        #[test]
        fn floor_invariant(raw in row_strategy(4)) {
            let cpt = Cpt::new(4, raw).unwrap();
            for call in 0..3u8 {
                prop_assert!(cpt.row(call).iter().all(|&p| p >= PROBABILITY_FLOOR));
                prop_assert!((cpt.row(call).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn score_is_additive_and_bounded(
            a in row_strategy(2), b in row_strategy(3),
            va in prop::option::of(0usize..2), vb in prop::option::of(0usize..3),
            ca in prop::option::of(0u8..3), cb in prop::option::of(0u8..3),
        ) {
            let panel = SnpPanel::new(vec![SnpDef::new("rs1", 0.2), SnpDef::new("rs2", 0.2)]).unwrap();
            let traits = vec![
                TraitDef::new("a", &["x", "y"]).unwrap(),
                TraitDef::new("b", &["p", "q", "r"]).unwrap(),
            ];
            let m = TraitModel::from_associations(
                panel, traits,
                vec![("a".into(), "rs1".into(), a), ("b".into(), "rs2".into(), b)],
                Provenance::Curated,
            ).unwrap();
            let geno = g(&[ca, cb]);
            let both = log_likelihood(&m, &PhenotypeProfile::new(vec![va, vb]), &geno);
            let only_a = log_likelihood(&m, &PhenotypeProfile::new(vec![va, None]), &geno);
            let only_b = log_likelihood(&m, &PhenotypeProfile::new(vec![None, vb]), &geno);
            prop_assert!((both - (only_a + only_b)).abs() < 1e-12);
            prop_assert!(both <= only_a + 1e-15 && both <= only_b + 1e-15);
            prop_assert!(both <= 0.0);
            prop_assert!(both >= 2.0 * PROBABILITY_FLOOR.ln() - 1e-9);
        }
    }
}
