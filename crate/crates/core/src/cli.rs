//! Command-line surface. Each subcommand loads its inputs, calls one or two
//! library operations and writes the result; [`run`] returns whatever belongs
//! on standard output so the binary only has to print it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attack::{build_likelihood_matrix, identification_attack, matching_attack};
use crate::countermeasures::{add_genotype_noise, PhenotypeStore, SaltKey};
use crate::error::{Error, Result};
use crate::eval::{grid_report, run_experiment, write_reports, ExperimentConfig};
use crate::genome::{load_genotype_db, PhenotypeDatabase, SnpPanel, TraitDef};
use crate::model::{train_supervised, ModelFile, TraitModel};
use crate::synth::{generate_population, PopulationConfig};

pub const KEY_ENV: &str = "GENOLINK_SALT_KEY";

#[derive(Debug, Parser)]
#[command(
    name = "genolink",
    version,
    about = "Phenotype-to-genotype linkage attacks and defenses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a linked synthetic cohort (genotypes.csv, phenotypes.csv).
    Generate(GenerateArgs),
    /// Learn CPTs from a linked cohort for the associations of a template model.
    Train(TrainArgs),
    /// Rank every genotype for one phenotype record.
    Identify(IdentifyArgs),
    /// Globally optimal one-to-one pairing of phenotypes and genotypes.
    Match(MatchArgs),
    /// Salt a phenotype file with a secret key.
    Salt(SaltArgs),
    /// Remove the salt from a phenotype file.
    Unsalt(SaltArgs),
    /// Add random call flips to a genotype file.
    Noise(NoiseArgs),
    /// Run a replicated experiment and write metrics.csv, report.txt, config.toml.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Experiment config; supplies the model, the size and (as master_seed) the seed.
    #[arg(long, required_unless_present = "model")]
    pub config: Option<PathBuf>,
    /// Generating model file with an embedded panel.
    #[arg(long, conflicts_with = "config")]
    pub model: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub genotypes: PathBuf,
    #[arg(long)]
    pub phenotypes: PathBuf,
    /// Template listing panel, traits and (trait, rsid) associations.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    /// Phenotype file; must hold one record unless --id is given.
    #[arg(long)]
    pub phenotype: PathBuf,
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub genotypes: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Number of candidates to print (all by default).
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub phenotypes: PathBuf,
    #[arg(long)]
    pub genotypes: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct SaltArgs {
    #[arg(long)]
    pub phenotypes: PathBuf,
    /// Model file declaring the traits.
    #[arg(long)]
    pub model: PathBuf,
    /// Decimal or 0x-prefixed hex; falls back to GENOLINK_SALT_KEY.
    #[arg(long, env = KEY_ENV, hide_env_values = true)]
    pub key: SaltKey,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub genotypes: PathBuf,
    /// Model file with the embedded panel.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_model(path: &Path) -> Result<TraitModel> {
    ModelFile::read(path)?.into_model()
}

fn load_phenotypes(path: &Path, traits: &[TraitDef]) -> Result<PhenotypeDatabase> {
    Ok(PhenotypeStore::load(path, traits)?.data().clone())
}

fn generate(a: &GenerateArgs) -> Result<String> {
    let (model, size, seed) = match (&a.config, &a.model) {
        (Some(cfg), _) => {
            let exp = ExperimentConfig::load(cfg)?;
            let size = a.size.unwrap_or(exp.config.population.size);
            (exp.truth, size, a.seed.unwrap_or(exp.config.master_seed))
        }
        (None, Some(m)) => {
            let size = a.size.expect("clap requires --size without --config");
            (load_model(m)?, size, a.seed.unwrap_or(0))
        }
        (None, None) => unreachable!("clap requires --config or --model"),
    };
    let (g, p) = generate_population(&PopulationConfig { model, size, seed })?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    g.save(a.out.join("genotypes.csv"))?;
    p.save(a.out.join("phenotypes.csv"))?;
    Ok(String::new())
}

fn train(a: &TrainArgs) -> Result<String> {
    let template = ModelFile::read(&a.model)?;
    let panel: SnpPanel = template.panel()?;
    let traits = template.traits()?;
    let g = load_genotype_db(&a.genotypes, &panel)?;
    let p = load_phenotypes(&a.phenotypes, &traits)?;
    let learned = train_supervised(&g, &p, &template.association_list())?;
    learned.save(&a.out)?;
    Ok(String::new())
}

fn identify(a: &IdentifyArgs) -> Result<String> {
    let model = load_model(&a.model)?;
    let pdb = load_phenotypes(&a.phenotype, model.traits())?;
    let profile = match &a.id {
        Some(id) => pdb
            .get(id)
            .ok_or_else(|| Error::domain(format!("no phenotype record {id}")))?,
        None if pdb.len() == 1 => &pdb.records()[0].profile,
        None => {
            return Err(Error::domain(format!(
                "phenotype file holds {} records; pick one with --id",
                pdb.len()
            )))
        }
    };
    let gdb = load_genotype_db(&a.genotypes, model.panel())?;
    let ranked = identification_attack(&model, profile, &gdb)?;
    let k = a.top.unwrap_or(ranked.len());
    let mut out = String::new();
    for (i, c) in ranked.top(k).iter().enumerate() {
        writeln!(out, "{},{},{:.6}", i + 1, c.id, c.score).unwrap();
    }
    Ok(out)
}

fn match_cmd(a: &MatchArgs) -> Result<String> {
    let model = load_model(&a.model)?;
    let pdb = load_phenotypes(&a.phenotypes, model.traits())?;
    let gdb = load_genotype_db(&a.genotypes, model.panel())?;
    let matrix = build_likelihood_matrix(&model, &pdb, &gdb)?;
    let assignment = matching_attack(&matrix)?;
    let mut out = String::from("phenotype_id,genotype_id,log_likelihood\n");
    for (i, &j) in assignment.mapping.iter().enumerate() {
        writeln!(
            out,
            "{},{},{:.6}",
            matrix.row_ids()[i],
            matrix.col_ids()[j],
            matrix.get(i, j)
        )
        .unwrap();
    }
    Ok(out)
}

fn salt(a: &SaltArgs) -> Result<String> {
    let traits = ModelFile::read(&a.model)?.traits()?;
    let salted = PhenotypeStore::load(&a.phenotypes, &traits)?.salt(a.key)?;
    salted.save(&a.out)?;
    Ok(String::new())
}

fn unsalt(a: &SaltArgs) -> Result<String> {
    let traits = ModelFile::read(&a.model)?.traits()?;
    let plain = PhenotypeStore::load(&a.phenotypes, &traits)?.unsalt(a.key)?;
    plain.save(&a.out)?;
    Ok(String::new())
}

fn noise(a: &NoiseArgs) -> Result<String> {
    let panel = ModelFile::read(&a.model)?.panel()?;
    let gdb = load_genotype_db(&a.genotypes, &panel)?;
    add_genotype_noise(&gdb, a.rate, a.seed)?.save(&a.out)?;
    Ok(String::new())
}

fn evaluate(a: &EvaluateArgs) -> Result<String> {
    let exp = ExperimentConfig::load(&a.config)?;
    let rows = run_experiment(&exp)?;
    write_reports(&a.out, &exp.config, &rows)?;
    Ok(grid_report(&exp.config, &rows))
}

/// Executes one parsed invocation and returns its standard output.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Identify(a) => identify(a),
        Command::Match(a) => match_cmd(a),
        Command::Salt(a) => salt(a),
        Command::Unsalt(a) => unsalt(a),
        Command::Noise(a) => noise(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

/// Process exit status for a failed run: 2 for filesystem failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        2
    } else {
        1
    }
}
