//! Replicated attack experiments over a grid of cohort size × model source ×
//! attack, with optional defenses and data errors, aggregated into
//! accuracy tables.
//!
//! # Config file (TOML)
//!
//! ```toml
//! master_seed = 7
//! replications = 200
//! db_sizes = [80, 10]
//! model_sources = ["curated", "supervised"]
//! attacks = ["identification", "matching"]
//! training = "contaminated"      # or "holdout"
//! curated_perturbation = 0.0     # ±delta mis-specification of curated CPTs
//! top_k = 5
//!
//! [population]
//! size = 200
//! model = "eight_traits.json"    # relative to the config file
//!
//! [defenses]
//! genotype_noise = 0.0
//! sequencing_errors = 0.0
//! phenotype_errors = 0.0
//! salt = false                   # salt phenotypes with an unknown key
//! # salt_key = 42                # fixed key; default is a fresh key per replication
//! dropped_rsids = []
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{
    build_likelihood_matrix, identification_attack, matching_attack, rank_row, LikelihoodMatrix,
};
use crate::countermeasures::{add_genotype_noise, apply_salt, SaltKey};
use crate::error::{Error, Result};
use crate::genome::{drop_snp, GenotypeDatabase, PhenotypeDatabase};
use crate::model::{train_supervised, ModelFile, Provenance, TraitModel};
use crate::rng::{derive_labeled, derive_seed, substream};
use crate::synth::{
    generate_population, inject_phenotype_errors, inject_sequencing_errors, PopulationConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Identification,
    Matching,
}

impl AttackKind {
    pub fn label(self) -> &'static str {
        match self {
            AttackKind::Identification => "identification",
            AttackKind::Matching => "matching",
        }
    }
}

fn source_label(p: Provenance) -> &'static str {
    match p {
        Provenance::Curated => "curated",
        Provenance::Supervised => "supervised",
    }
}

/// What a supervised attacker trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    /// The evaluated cohort itself.
    #[default]
    Contaminated,
    /// A disjoint cohort of the same size from the same population.
    Holdout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defenses {
    #[serde(default)]
    pub genotype_noise: f64,
    #[serde(default)]
    pub sequencing_errors: f64,
    #[serde(default)]
    pub phenotype_errors: f64,
    #[serde(default)]
    pub salt: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salt_key: Option<u64>,
    #[serde(default)]
    pub dropped_rsids: Vec<String>,
}

impl Defenses {
    /// Short label for the defense column of reports, `none` when nothing applies.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.sequencing_errors > 0.0 {
            parts.push(format!("seq_err={}", self.sequencing_errors));
        }
        if self.genotype_noise > 0.0 {
            parts.push(format!("noise={}", self.genotype_noise));
        }
        if self.phenotype_errors > 0.0 {
            parts.push(format!("pheno_err={}", self.phenotype_errors));
        }
        if self.salt {
            parts.push("salt".to_string());
        }
        if !self.dropped_rsids.is_empty() {
            parts.push(format!("drop={}", self.dropped_rsids.join(";")));
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    pub size: usize,
    /// Generating model file (panel, traits, CPTs).
    pub model: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub replications: usize,
    pub db_sizes: Vec<usize>,
    pub model_sources: Vec<Provenance>,
    pub attacks: Vec<AttackKind>,
    #[serde(default)]
    pub training: TrainingMode,
    #[serde(default)]
    pub curated_perturbation: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    pub population: PopulationSection,
    #[serde(default)]
    pub defenses: Defenses,
}

fn default_top_k() -> usize {
    5
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file and loads the generating model it points to.
    pub fn load(path: impl AsRef<Path>) -> Result<Experiment> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = ExperimentConfig::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let model_path = base.join(&config.population.model);
        let truth = ModelFile::read(&model_path)?.into_model()?;
        Experiment::new(config, truth)
    }
}

/// A config bound to its generating model.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub truth: TraitModel,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, truth: TraitModel) -> Result<Self> {
        let c = &config;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if c.replications == 0 {
            return bad("replications must be at least 1");
        }
        if c.db_sizes.is_empty() || c.model_sources.is_empty() || c.attacks.is_empty() {
            return bad("db_sizes, model_sources and attacks must be non-empty");
        }
        if c.db_sizes.contains(&0) {
            return bad("database sizes must be positive");
        }
        let needed = match c.training {
            TrainingMode::Contaminated => 1,
            TrainingMode::Holdout => 2,
        };
        if c.db_sizes.iter().any(|&n| n * needed > c.population.size) {
            return bad(
                "every database size (doubled for holdout training) must fit in the population",
            );
        }
        let d = &c.defenses;
        for (name, rate) in [
            ("genotype_noise", d.genotype_noise),
            ("sequencing_errors", d.sequencing_errors),
            ("phenotype_errors", d.phenotype_errors),
            ("curated_perturbation", c.curated_perturbation),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} = {rate} outside [0, 1]")));
            }
        }
        if d.salt_key.is_some() && !d.salt {
            return bad("salt_key given but salt is disabled");
        }
        for rsid in &d.dropped_rsids {
            if truth.panel().position(rsid).is_none() {
                return Err(Error::Config(format!("dropped rsid {rsid} not in panel")));
            }
        }
        PopulationConfig {
            model: truth.clone(),
            size: c.population.size,
            seed: 0,
        }
        .validate()?;
        Ok(Experiment { config, truth })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub db_size: usize,
    pub source: Provenance,
    pub attack: AttackKind,
    pub defense: String,
    pub mean: f64,
    pub std: f64,
    pub replications: usize,
    /// Identification only: share of phenotypes whose true genotype ranks in the top `k`.
    pub top_k: Option<(usize, f64)>,
}

fn check_linked(pdb: &PhenotypeDatabase, gdb: &GenotypeDatabase) -> Result<()> {
    let mut a: Vec<&str> = pdb.ids().collect();
    let mut b: Vec<&str> = gdb.ids().collect();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::domain(
            "phenotype and genotype databases are not linked by id",
        ));
    }
    Ok(())
}

/// Share of phenotypes whose top-ranked genotype is their own.
pub fn identification_accuracy(
    model: &TraitModel,
    pdb: &PhenotypeDatabase,
    gdb: &GenotypeDatabase,
) -> Result<f64> {
    check_linked(pdb, gdb)?;
    if pdb.is_empty() {
        return Err(Error::domain("empty databases"));
    }
    model.check_phenotypes(pdb)?;
    let hits = pdb
        .records()
        .iter()
        .map(|p| identification_attack(model, &p.profile, gdb).map(|r| r.best().id == p.id))
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / pdb.len() as f64)
}

/// Share of individuals the optimal matching pairs with their own genotype.
pub fn matching_accuracy(
    model: &TraitModel,
    pdb: &PhenotypeDatabase,
    gdb: &GenotypeDatabase,
) -> Result<f64> {
    if pdb.len() != gdb.len() {
        return Err(Error::domain(format!(
            "matching needs equal sizes, got {} phenotypes and {} genotypes",
            pdb.len(),
            gdb.len()
        )));
    }
    check_linked(pdb, gdb)?;
    let matrix = build_likelihood_matrix(model, pdb, gdb)?;
    matrix_matching_accuracy(&matrix)
}

fn matrix_identification_accuracy(matrix: &LikelihoodMatrix, k: usize) -> (f64, f64) {
    let n = matrix.rows();
    let (mut top1, mut topk) = (0usize, 0usize);
    for row in 0..n {
        let ranked = rank_row(matrix, row);
        match ranked.position(&matrix.row_ids()[row]) {
            Some(0) => {
                top1 += 1;
                topk += 1;
            }
            Some(p) if p < k => topk += 1,
            _ => {}
        }
    }
    (top1 as f64 / n as f64, topk as f64 / n as f64)
}

fn matrix_matching_accuracy(matrix: &LikelihoodMatrix) -> Result<f64> {
    let assignment = matching_attack(matrix)?;
    let hits = assignment
        .mapping
        .iter()
        .enumerate()
        .filter(|&(i, &j)| matrix.row_ids()[i] == matrix.col_ids()[j])
        .count();
    Ok(hits as f64 / matrix.rows() as f64)
}

/// Accuracies of one replication, one entry per grid cell in report order.
type CellScores = Vec<(f64, Option<f64>)>;

/// Cohorts as the attacker sees them after errors and defenses.
fn degrade(
    exp: &Experiment,
    gdb: GenotypeDatabase,
    pdb: PhenotypeDatabase,
    seed: u64,
) -> Result<(GenotypeDatabase, PhenotypeDatabase)> {
    let d = &exp.config.defenses;
    let mut gdb = gdb;
    for rsid in &d.dropped_rsids {
        gdb = drop_snp(&gdb, rsid)?;
    }
    if d.sequencing_errors > 0.0 {
        gdb = inject_sequencing_errors(
            &gdb,
            d.sequencing_errors,
            derive_labeled(seed, "sequencing"),
        )?;
    }
    if d.genotype_noise > 0.0 {
        gdb = add_genotype_noise(&gdb, d.genotype_noise, derive_labeled(seed, "noise"))?;
    }
    let mut pdb = pdb;
    if d.phenotype_errors > 0.0 {
        pdb = inject_phenotype_errors(&pdb, d.phenotype_errors, derive_labeled(seed, "phenotype"))?;
    }
    Ok((gdb, pdb))
}

fn salt_key(exp: &Experiment, rep_seed: u64) -> Option<SaltKey> {
    let d = &exp.config.defenses;
    d.salt.then(|| {
        SaltKey(
            d.salt_key
                .unwrap_or_else(|| derive_labeled(rep_seed, "salt")),
        )
    })
}

fn run_replication(exp: &Experiment, rep: usize) -> Result<CellScores> {
    let cfg = &exp.config;
    let rep_seed = derive_seed(cfg.master_seed, rep as u64);
    let (pop_g, pop_p) = generate_population(&PopulationConfig {
        model: exp.truth.clone(),
        size: cfg.population.size,
        seed: derive_labeled(rep_seed, "population"),
    })?;
    let key = salt_key(exp, rep_seed);

    let mut curated = exp.truth.clone();
    if cfg.curated_perturbation > 0.0 {
        curated = curated.perturbed(
            cfg.curated_perturbation,
            derive_labeled(rep_seed, "perturb"),
        )?;
    }

    let mut scores = Vec::new();
    for (s, &n) in cfg.db_sizes.iter().enumerate() {
        let cell_seed = derive_seed(derive_labeled(rep_seed, "cell"), s as u64);
        let mut rng = substream(cell_seed, 0);
        let take = match cfg.training {
            TrainingMode::Contaminated => n,
            TrainingMode::Holdout => 2 * n,
        };
        let picked = index::sample(&mut rng, pop_g.len(), take).into_vec();
        let (eval_idx, train_idx) = picked.split_at(n);

        // genotype columns in an order unrelated to phenotype rows
        let mut shuffled = eval_idx.to_vec();
        shuffled.shuffle(&mut rng);
        let (gdb, pdb) = degrade(
            exp,
            pop_g.select(&shuffled)?,
            pop_p.select(eval_idx)?,
            cell_seed,
        )?;
        let pdb = match key {
            Some(k) => apply_salt(&pdb, k)?.as_breached().clone(),
            None => pdb,
        };

        let (train_g, train_p) = match cfg.training {
            TrainingMode::Contaminated => (gdb.clone(), pdb.clone()),
            TrainingMode::Holdout => {
                let (g, p) = degrade(
                    exp,
                    pop_g.select(train_idx)?,
                    pop_p.select(train_idx)?,
                    derive_labeled(cell_seed, "holdout"),
                )?;
                let p = match key {
                    Some(k) => apply_salt(&p, k)?.as_breached().clone(),
                    None => p,
                };
                (g, p)
            }
        };

        for &source in &cfg.model_sources {
            let model = match source {
                Provenance::Curated => curated.restrict_to_panel(gdb.panel()),
                Provenance::Supervised => {
                    let assoc = exp.truth.restrict_to_panel(gdb.panel()).association_list();
                    train_supervised(&train_g, &train_p, &assoc)?
                }
            };
            let matrix = build_likelihood_matrix(&model, &pdb, &gdb)?;
            for &attack in &cfg.attacks {
                scores.push(match attack {
                    AttackKind::Identification => {
                        let (top1, topk) = matrix_identification_accuracy(&matrix, cfg.top_k);
                        (top1, Some(topk))
                    }
                    AttackKind::Matching => (matrix_matching_accuracy(&matrix)?, None),
                });
            }
        }
    }
    Ok(scores)
}

fn cells(cfg: &ExperimentConfig) -> Vec<(usize, Provenance, AttackKind)> {
    let mut out = Vec::new();
    for &n in &cfg.db_sizes {
        for &s in &cfg.model_sources {
            for &a in &cfg.attacks {
                out.push((n, s, a));
            }
        }
    }
    out
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-replication accuracies for every grid cell, in report order.
pub fn run_replications(exp: &Experiment) -> Result<Vec<CellScores>> {
    (0..exp.config.replications)
        .into_par_iter()
        .map(|r| {
            run_replication(exp, r).map_err(|e| Error::Cell {
                cell: format!("replication {r}"),
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn run_experiment(exp: &Experiment) -> Result<Vec<MetricsRow>> {
    let reps = run_replications(exp)?;
    let defense = exp.config.defenses.label();
    Ok(cells(&exp.config)
        .into_iter()
        .enumerate()
        .map(|(c, (db_size, source, attack))| {
            let acc: Vec<f64> = reps.iter().map(|r| r[c].0).collect();
            let (mean, std) = mean_std(&acc);
            let top_k = (attack == AttackKind::Identification).then(|| {
                let tk: Vec<f64> = reps.iter().map(|r| r[c].1.unwrap_or(0.0)).collect();
                (exp.config.top_k, mean_std(&tk).0)
            });
            MetricsRow {
                db_size,
                source,
                attack,
                defense: defense.clone(),
                mean,
                std,
                replications: reps.len(),
                top_k,
            }
        })
        .collect())
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(
        "db_size,model_source,attack,defense,mean_accuracy,std_accuracy,replications,top_k,top_k_accuracy\n",
    );
    for r in rows {
        let (k, tk) = match r.top_k {
            Some((k, v)) => (k.to_string(), format!("{v:.6}")),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{},{},{}",
            r.db_size,
            source_label(r.source),
            r.attack.label(),
            r.defense,
            r.mean,
            r.std,
            r.replications,
            k,
            tk
        )
        .unwrap();
    }
    out
}

/// Human-readable grid: attacks as rows, (size, source) as columns.
pub fn grid_report(cfg: &ExperimentConfig, rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    writeln!(out, "master_seed: {}", cfg.master_seed).unwrap();
    writeln!(out, "replications: {}", cfg.replications).unwrap();
    writeln!(out, "defense: {}", cfg.defenses.label()).unwrap();
    writeln!(out, "training: {:?}", cfg.training).unwrap();
    out.push('\n');

    let columns: Vec<(usize, Provenance)> = cfg
        .db_sizes
        .iter()
        .flat_map(|&n| cfg.model_sources.iter().map(move |&s| (n, s)))
        .collect();
    let label_width = 18;
    let cell_width = 26;
    write!(out, "{:label_width$}", "").unwrap();
    for (n, s) in &columns {
        let head = format!("n={} {}", n, source_label(*s));
        write!(out, "| {head:<cell_width$}").unwrap();
    }
    out.push('\n');
    for &attack in &cfg.attacks {
        let name = match attack {
            AttackKind::Identification => "Identification",
            AttackKind::Matching => "Perfect Matching",
        };
        write!(out, "{name:label_width$}").unwrap();
        for (n, s) in &columns {
            let row = rows
                .iter()
                .find(|r| r.db_size == *n && r.source == *s && r.attack == attack)
                .expect("every grid cell has a row");
            let cell = format!("{:5.1}% ± {:4.1}", row.mean * 100.0, row.std * 100.0);
            write!(out, "| {cell:<cell_width$}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `metrics.csv`, `report.txt` and `config.toml` (the resolved config)
/// into `dir`.
pub fn write_reports(
    dir: impl AsRef<Path>,
    cfg: &ExperimentConfig,
    rows: &[MetricsRow],
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    write("metrics.csv", metrics_csv(rows))?;
    let mut report = grid_report(cfg, rows);
    report.push_str("\n# resolved config\n");
    report.push_str(&cfg.to_toml());
    write("report.txt", report)?;
    write("config.toml", cfg.to_toml())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::eight_trait_model;
    use crate::genome::{
        Genotype, GenotypeRecord, PhenotypeProfile, PhenotypeRecord, SnpDef, SnpPanel, TraitDef,
    };

    pub(crate) fn config(reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 11,
            replications: reps,
            db_sizes: vec![10],
            model_sources: vec![Provenance::Curated],
            attacks: vec![AttackKind::Identification, AttackKind::Matching],
            training: TrainingMode::Contaminated,
            curated_perturbation: 0.0,
            top_k: 5,
            population: PopulationSection {
                size: 40,
                model: "eight_traits.json".into(),
            },
            defenses: Defenses::default(),
        }
    }

    /// One trait per SNP, each call fully determining a distinct value.
    fn deterministic_world(n: usize) -> (TraitModel, GenotypeDatabase, PhenotypeDatabase) {
        let panel = SnpPanel::new(vec![SnpDef::new("rs1", 0.5), SnpDef::new("rs2", 0.5)]).unwrap();
        let traits = vec![
            TraitDef::new("a", &["x", "y", "z"]).unwrap(),
            TraitDef::new("b", &["x", "y", "z"]).unwrap(),
        ];
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let model = TraitModel::from_associations(
            panel.clone(),
            traits.clone(),
            vec![
                ("a".into(), "rs1".into(), eye.clone()),
                ("b".into(), "rs2".into(), eye),
            ],
            Provenance::Curated,
        )
        .unwrap();
        let mut g = Vec::new();
        let mut p = Vec::new();
        for i in 0..n {
            let (c1, c2) = ((i % 3) as u8, (i / 3) as u8);
            g.push(GenotypeRecord {
                id: format!("i{i}"),
                genotype: Genotype::new(vec![Some(c1), Some(c2)]).unwrap(),
            });
            p.push(PhenotypeRecord {
                id: format!("i{i}"),
                profile: PhenotypeProfile::new(vec![Some(c1 as usize), Some(c2 as usize)]),
            });
        }
        g.reverse();
        (
            model,
            GenotypeDatabase::new(panel, g).unwrap(),
            PhenotypeDatabase::new(traits, p).unwrap(),
        )
    }

    #[test]
    fn deterministic_world_is_fully_identified() {
        let (m, g, p) = deterministic_world(9);
        assert_eq!(identification_accuracy(&m, &p, &g).unwrap(), 1.0);
        assert_eq!(matching_accuracy(&m, &p, &g).unwrap(), 1.0);
    }

    #[test]
    fn single_individual_always_matched() {
        let (m, g, p) = deterministic_world(1);
        assert_eq!(matching_accuracy(&m, &p, &g).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_errors() {
        let (m, g, p) = deterministic_world(4);
        let small = g.select(&[0, 1, 2]).unwrap();
        assert!(matches!(
            matching_accuracy(&m, &p, &small),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            identification_accuracy(&m, &p, &small),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn uniform_model_scores_chance_exactly() {
        // all scores tie, so rank 1 is always the smallest id: exactly one hit per cohort
        let (m, g, p) = deterministic_world(9);
        let u = m.uniform_like();
        assert!((identification_accuracy(&u, &p, &g).unwrap() - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_path_agrees_with_per_phenotype_attack() {
        let truth = eight_trait_model();
        let (g, p) = generate_population(&PopulationConfig {
            model: truth.clone(),
            size: 30,
            seed: 5,
        })
        .unwrap();
        let matrix = build_likelihood_matrix(&truth, &p, &g).unwrap();
        let (top1, _) = matrix_identification_accuracy(&matrix, 5);
        assert_eq!(top1, identification_accuracy(&truth, &p, &g).unwrap());
        assert_eq!(
            matrix_matching_accuracy(&matrix).unwrap(),
            matching_accuracy(&truth, &p, &g).unwrap()
        );
    }

    #[test]
    fn single_replication_has_zero_std() {
        let exp = Experiment::new(config(1), eight_trait_model()).unwrap();
        let rows = run_experiment(&exp).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.std == 0.0 && r.replications == 1));
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.mean)));
    }

    #[test]
    fn same_seed_same_report() {
        let exp = Experiment::new(config(5), eight_trait_model()).unwrap();
        let a = metrics_csv(&run_experiment(&exp).unwrap());
        let b = metrics_csv(&run_experiment(&exp).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn table_shaped_grid() {
        let mut cfg = config(2);
        cfg.db_sizes = vec![80, 10];
        cfg.population.size = 100;
        cfg.model_sources = vec![Provenance::Curated, Provenance::Supervised];
        let exp = Experiment::new(cfg.clone(), eight_trait_model()).unwrap();
        let rows = run_experiment(&exp).unwrap();
        assert_eq!(rows.len(), 8);
        let report = grid_report(&cfg, &rows);
        assert!(report.contains("Perfect Matching"));
        assert!(report.contains("n=80 supervised"));
    }

    #[test]
    fn invalid_configs_rejected() {
        let truth = eight_trait_model();
        let mut c = config(1);
        c.replications = 0;
        assert!(Experiment::new(c, truth.clone()).is_err());
        let mut c = config(1);
        c.db_sizes = vec![100];
        assert!(Experiment::new(c, truth.clone()).is_err());
        let mut c = config(1);
        c.training = TrainingMode::Holdout;
        c.db_sizes = vec![30];
        assert!(Experiment::new(c, truth.clone()).is_err());
        let mut c = config(1);
        c.defenses.genotype_noise = 2.0;
        assert!(Experiment::new(c, truth.clone()).is_err());
        let mut c = config(1);
        c.defenses.dropped_rsids = vec!["rs0".into()];
        assert!(Experiment::new(c, truth).is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let mut c = config(3);
        c.defenses.salt = true;
        c.defenses.salt_key = Some(9);
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert!(ExperimentConfig::parse("master_seed = 1\nbogus = 2").is_err());
    }

    #[test]
    fn holdout_mode_runs() {
        let mut c = config(3);
        c.training = TrainingMode::Holdout;
        c.model_sources = vec![Provenance::Supervised];
        let rows = run_experiment(&Experiment::new(c, eight_trait_model()).unwrap()).unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn dropping_every_snp_errors_with_coordinates() {
        let mut c = config(1);
        c.defenses.dropped_rsids = eight_trait_model()
            .panel()
            .rsids()
            .map(String::from)
            .collect();
        let err = run_experiment(&Experiment::new(c, eight_trait_model()).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Cell { .. }));
        assert!(err.to_string().contains("replication 0"));
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert!((s - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
