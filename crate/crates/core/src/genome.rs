//! SNP panels, genotype and phenotype databases, and their delimited-text
//! file formats.
//!
//! Genotype files look like
//!
//! ```text
//! id,rs12913832,rs1805007
//! alice,2,0
//! bob,NA,1
//! ```
//!
//! and phenotype files use trait names as columns and domain values (or `NA`)
//! as cells. Lines are LF-terminated; no quoting or whitespace trimming is
//! performed. Phenotype files may start with `#` comment lines (used by the
//! salted-file header), which the plain loader skips.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token used for a missing genotype call or trait value.
pub const MISSING_TOKEN: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnpDef {
    pub rsid: String,
    /// Minor allele frequency, in `[0, 0.5]`.
    pub maf: f64,
}

impl SnpDef {
    pub fn new(rsid: impl Into<String>, maf: f64) -> Self {
        SnpDef {
            rsid: rsid.into(),
            maf,
        }
    }
}

/// Ordered SNP list; the order fixes the layout of every genotype vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpPanel {
    snps: Vec<SnpDef>,
    index: HashMap<String, usize>,
}

impl SnpPanel {
    pub fn new(snps: Vec<SnpDef>) -> Result<Self> {
        let mut index = HashMap::with_capacity(snps.len());
        for (i, snp) in snps.iter().enumerate() {
            if snp.rsid.is_empty() || snp.rsid.contains([',', '\n', '\r']) {
                return Err(Error::domain(format!("invalid rsid {:?}", snp.rsid)));
            }
            if !(0.0..=0.5).contains(&snp.maf) {
                return Err(Error::domain(format!(
                    "minor allele frequency {} of {} outside [0, 0.5]",
                    snp.maf, snp.rsid
                )));
            }
            if index.insert(snp.rsid.clone(), i).is_some() {
                return Err(Error::domain(format!("duplicate rsid {}", snp.rsid)));
            }
        }
        Ok(SnpPanel { snps, index })
    }

    pub fn len(&self) -> usize {
        self.snps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snps.is_empty()
    }

    pub fn snps(&self) -> &[SnpDef] {
        &self.snps
    }

    pub fn position(&self, rsid: &str) -> Option<usize> {
        self.index.get(rsid).copied()
    }

    pub fn rsids(&self) -> impl Iterator<Item = &str> {
        self.snps.iter().map(|s| s.rsid.as_str())
    }
}

/// Diploid minor-allele counts over a panel; `None` is a missing call.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genotype {
    calls: Vec<Option<u8>>,
}

impl Genotype {
    pub fn new(calls: Vec<Option<u8>>) -> Result<Self> {
        if let Some(c) = calls.iter().flatten().find(|&&c| c > 2) {
            return Err(Error::domain(format!(
                "genotype call {c} outside {{0,1,2}}"
            )));
        }
        Ok(Genotype { calls })
    }

    pub fn calls(&self) -> &[Option<u8>] {
        &self.calls
    }

    pub fn call(&self, position: usize) -> Option<u8> {
        self.calls[position]
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeRecord {
    pub id: String,
    pub genotype: Genotype,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeDatabase {
    panel: SnpPanel,
    records: Vec<GenotypeRecord>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.starts_with('#') || id.contains([',', '\n', '\r']) {
        return Err(Error::domain(format!("invalid individual id {id:?}")));
    }
    Ok(())
}

fn check_unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        check_id(id)?;
        if !seen.insert(id) {
            return Err(Error::domain(format!("duplicate individual id {id}")));
        }
    }
    Ok(())
}

impl GenotypeDatabase {
    pub fn new(panel: SnpPanel, records: Vec<GenotypeRecord>) -> Result<Self> {
        check_unique_ids(records.iter().map(|r| r.id.as_str()))?;
        if let Some(r) = records.iter().find(|r| r.genotype.len() != panel.len()) {
            return Err(Error::domain(format!(
                "genotype of {} has {} calls, panel has {}",
                r.id,
                r.genotype.len(),
                panel.len()
            )));
        }
        Ok(GenotypeDatabase { panel, records })
    }

    pub fn panel(&self) -> &SnpPanel {
        &self.panel
    }

    pub fn records(&self) -> &[GenotypeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&Genotype> {
        self.records
            .iter()
            .find(|r| r.id == id)
            .map(|r| &r.genotype)
    }

    /// New database holding the records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::domain(format!("record index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        GenotypeDatabase::new(self.panel.clone(), records)
    }

    /// Same panel, genotypes replaced record by record (ids and order kept).
    pub(crate) fn with_genotypes(&self, genotypes: Vec<Genotype>) -> Self {
        debug_assert_eq!(genotypes.len(), self.records.len());
        let records = self
            .records
            .iter()
            .zip(genotypes)
            .map(|(r, genotype)| GenotypeRecord {
                id: r.id.clone(),
                genotype,
            })
            .collect();
        GenotypeDatabase {
            panel: self.panel.clone(),
            records,
        }
    }

    /// Canonical file text: header, one row per record, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for rsid in self.panel.rsids() {
            out.push(',');
            out.push_str(rsid);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.id);
            for call in r.genotype.calls() {
                match call {
                    Some(c) => write!(out, ",{c}").unwrap(),
                    None => write!(out, ",{MISSING_TOKEN}").unwrap(),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Parses genotype file text whose header must list `panel`'s rsids in panel order.
pub fn parse_genotype_db(text: &str, panel: &SnpPanel) -> Result<GenotypeDatabase> {
    let mut lines = text.split('\n').enumerate();
    let (_, header) = lines
        .next()
        .filter(|(_, h)| !h.is_empty())
        .ok_or_else(|| Error::InputFormat("genotype file is empty".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let header_err = |column: &str, message: String| Error::Ingestion {
        row: 1,
        id: "header".into(),
        column: column.to_string(),
        message,
    };
    if columns[0] != "id" {
        return Err(header_err(columns[0], "first column must be \"id\"".into()));
    }
    for (k, col) in columns[1..].iter().enumerate() {
        match panel.position(col) {
            None => return Err(header_err(col, "unknown rsid".into())),
            Some(p) if p != k => {
                return Err(header_err(
                    col,
                    format!("expected panel position {}, found {}", p, k),
                ))
            }
            Some(_) => {}
        }
    }
    if columns.len() - 1 != panel.len() {
        return Err(header_err(
            "id",
            format!(
                "header lists {} SNPs, panel has {}",
                columns.len() - 1,
                panel.len()
            ),
        ));
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            if lineno + 1 == text.split('\n').count() {
                break;
            }
            return Err(Error::InputFormat(format!(
                "blank line at row {}",
                lineno + 1
            )));
        }
        let row = lineno + 1;
        let cells: Vec<&str> = line.split(',').collect();
        let id = cells[0];
        let err = |column: &str, message: String| Error::Ingestion {
            row,
            id: id.to_string(),
            column: column.to_string(),
            message,
        };
        if check_id(id).is_err() {
            return Err(err("id", "invalid id".into()));
        }
        if !seen.insert(id) {
            return Err(err("id", "duplicate id".into()));
        }
        if cells.len() != columns.len() {
            return Err(err(
                "id",
                format!("expected {} cells, found {}", columns.len(), cells.len()),
            ));
        }
        let calls = cells[1..]
            .iter()
            .zip(&columns[1..])
            .map(|(cell, col)| match *cell {
                "0" => Ok(Some(0)),
                "1" => Ok(Some(1)),
                "2" => Ok(Some(2)),
                MISSING_TOKEN => Ok(None),
                other => Err(err(col, format!("call {other:?} not in {{0,1,2,NA}}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(GenotypeRecord {
            id: id.to_string(),
            genotype: Genotype { calls },
        });
    }
    GenotypeDatabase::new(panel.clone(), records)
}

pub fn load_genotype_db(path: impl AsRef<Path>, panel: &SnpPanel) -> Result<GenotypeDatabase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_genotype_db(&text, panel)
}

/// Removes one SNP column from the panel and from every genotype.
pub fn drop_snp(db: &GenotypeDatabase, rsid: &str) -> Result<GenotypeDatabase> {
    let pos = db
        .panel
        .position(rsid)
        .ok_or_else(|| Error::domain(format!("unknown rsid {rsid}")))?;
    let mut snps = db.panel.snps.clone();
    snps.remove(pos);
    let panel = SnpPanel::new(snps)?;
    let records = db
        .records
        .iter()
        .map(|r| {
            let mut calls = r.genotype.calls.clone();
            calls.remove(pos);
            GenotypeRecord {
                id: r.id.clone(),
                genotype: Genotype { calls },
            }
        })
        .collect();
    Ok(GenotypeDatabase { panel, records })
}

/// A categorical trait with an ordered value domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitDef {
    pub name: String,
    pub domain: Vec<String>,
}

impl TraitDef {
    pub fn new(name: impl Into<String>, domain: &[&str]) -> Result<Self> {
        let def = TraitDef {
            name: name.into(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
        };
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| s.is_empty() || s == MISSING_TOKEN || s.contains([',', '\n', '\r']);
        if bad(&self.name) || self.name == "id" {
            return Err(Error::domain(format!("invalid trait name {:?}", self.name)));
        }
        if self.domain.len() < 2 {
            return Err(Error::domain(format!(
                "trait {} needs at least 2 domain values",
                self.name
            )));
        }
        let mut seen = HashSet::new();
        for v in &self.domain {
            if bad(v) {
                return Err(Error::domain(format!(
                    "invalid value {v:?} in trait {}",
                    self.name
                )));
            }
            if !seen.insert(v.as_str()) {
                return Err(Error::domain(format!(
                    "duplicate value {v} in trait {}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }

    pub fn arity(&self) -> usize {
        self.domain.len()
    }
}

pub fn validate_traits(traits: &[TraitDef]) -> Result<()> {
    let mut seen = HashSet::new();
    for t in traits {
        t.validate()?;
        if !seen.insert(t.name.as_str()) {
            return Err(Error::domain(format!("duplicate trait {}", t.name)));
        }
    }
    Ok(())
}

/// Trait values as domain indices, aligned with the owning database's trait list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhenotypeProfile {
    values: Vec<Option<usize>>,
}

impl PhenotypeProfile {
    pub fn new(values: Vec<Option<usize>>) -> Self {
        PhenotypeProfile { values }
    }

    /// Builds a profile from `(trait name, value)` pairs; unnamed traits are missing.
    pub fn from_pairs(traits: &[TraitDef], pairs: &[(&str, &str)]) -> Result<Self> {
        let mut values = vec![None; traits.len()];
        for (name, value) in pairs {
            let t = traits
                .iter()
                .position(|t| t.name == *name)
                .ok_or_else(|| Error::domain(format!("unknown trait {name}")))?;
            let v = traits[t]
                .value_index(value)
                .ok_or_else(|| Error::domain(format!("value {value} not in domain of {name}")))?;
            values[t] = Some(v);
        }
        Ok(PhenotypeProfile { values })
    }

    pub fn value(&self, trait_index: usize) -> Option<usize> {
        self.values[trait_index]
    }

    pub fn values(&self) -> &[Option<usize>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn observed(&self) -> usize {
        self.values.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeRecord {
    pub id: String,
    pub profile: PhenotypeProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeDatabase {
    traits: Vec<TraitDef>,
    records: Vec<PhenotypeRecord>,
}

impl PhenotypeDatabase {
    pub fn new(traits: Vec<TraitDef>, records: Vec<PhenotypeRecord>) -> Result<Self> {
        validate_traits(&traits)?;
        check_unique_ids(records.iter().map(|r| r.id.as_str()))?;
        for r in &records {
            if r.profile.len() != traits.len() {
                return Err(Error::domain(format!(
                    "profile of {} has {} traits, expected {}",
                    r.id,
                    r.profile.len(),
                    traits.len()
                )));
            }
            for (t, v) in traits.iter().zip(r.profile.values()) {
                if let Some(v) = v {
                    if *v >= t.arity() {
                        return Err(Error::domain(format!(
                            "value index {v} outside domain of {} for {}",
                            t.name, r.id
                        )));
                    }
                }
            }
        }
        Ok(PhenotypeDatabase { traits, records })
    }

    pub fn traits(&self) -> &[TraitDef] {
        &self.traits
    }

    pub fn records(&self) -> &[PhenotypeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&PhenotypeProfile> {
        self.records.iter().find(|r| r.id == id).map(|r| &r.profile)
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::domain(format!("record index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        PhenotypeDatabase::new(self.traits.clone(), records)
    }

    pub(crate) fn with_profiles(&self, profiles: Vec<PhenotypeProfile>) -> Self {
        debug_assert_eq!(profiles.len(), self.records.len());
        let records = self
            .records
            .iter()
            .zip(profiles)
            .map(|(r, profile)| PhenotypeRecord {
                id: r.id.clone(),
                profile,
            })
            .collect();
        PhenotypeDatabase {
            traits: self.traits.clone(),
            records,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for t in &self.traits {
            out.push(',');
            out.push_str(&t.name);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.id);
            for (t, v) in self.traits.iter().zip(r.profile.values()) {
                out.push(',');
                match v {
                    Some(v) => out.push_str(&t.domain[*v]),
                    None => out.push_str(MISSING_TOKEN),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Parses phenotype file text.
///
/// Columns may be any subset of `traits` in any order; traits without a
/// column are missing for every record. Leading `#` lines are skipped.
pub fn parse_phenotype_db(text: &str, traits: &[TraitDef]) -> Result<PhenotypeDatabase> {
    validate_traits(traits)?;
    let all: Vec<&str> = text.split('\n').collect();
    let mut lines = all
        .iter()
        .enumerate()
        .skip_while(|(_, l)| l.starts_with('#'));
    let (_, header) = lines
        .next()
        .filter(|(_, h)| !h.is_empty())
        .ok_or_else(|| Error::InputFormat("phenotype file is empty".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let header_err = |column: &str, message: &str| Error::Ingestion {
        row: 1,
        id: "header".into(),
        column: column.to_string(),
        message: message.to_string(),
    };
    if columns[0] != "id" {
        return Err(header_err(columns[0], "first column must be \"id\""));
    }
    let mut trait_of_column = Vec::with_capacity(columns.len() - 1);
    for col in &columns[1..] {
        let t = traits
            .iter()
            .position(|t| t.name == *col)
            .ok_or_else(|| header_err(col, "unknown trait"))?;
        if trait_of_column.contains(&t) {
            return Err(header_err(col, "duplicate column"));
        }
        trait_of_column.push(t);
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in lines {
        let row = lineno + 1;
        if line.is_empty() {
            if lineno + 1 == all.len() {
                break;
            }
            return Err(Error::InputFormat(format!("blank line at row {row}")));
        }
        let cells: Vec<&str> = line.split(',').collect();
        let id = cells[0];
        let err = |column: &str, message: String| Error::Ingestion {
            row,
            id: id.to_string(),
            column: column.to_string(),
            message,
        };
        if check_id(id).is_err() {
            return Err(err("id", "invalid id".into()));
        }
        if !seen.insert(id) {
            return Err(err("id", "duplicate id".into()));
        }
        if cells.len() != columns.len() {
            return Err(err(
                "id",
                format!("expected {} cells, found {}", columns.len(), cells.len()),
            ));
        }
        let mut values = vec![None; traits.len()];
        for (cell, &t) in cells[1..].iter().zip(&trait_of_column) {
            if *cell == MISSING_TOKEN {
                continue;
            }
            let v = traits[t].value_index(cell).ok_or_else(|| {
                err(
                    &traits[t].name,
                    format!("value {cell:?} not in trait domain"),
                )
            })?;
            values[t] = Some(v);
        }
        records.push(PhenotypeRecord {
            id: id.to_string(),
            profile: PhenotypeProfile { values },
        });
    }
    PhenotypeDatabase::new(traits.to_vec(), records)
}

pub fn load_phenotype_db(path: impl AsRef<Path>, traits: &[TraitDef]) -> Result<PhenotypeDatabase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_phenotype_db(&text, traits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn herc2_panel() -> SnpPanel {
        SnpPanel::new(vec![SnpDef::new("rs12913832", 0.3)]).unwrap()
    }

    fn eye() -> Vec<TraitDef> {
        vec![TraitDef::new("eye_colour", &["blue", "brown"]).unwrap()]
    }

    fn panel_n(n: usize) -> SnpPanel {
        SnpPanel::new(
            (0..n)
                .map(|i| SnpDef::new(format!("rs{}", 100 + i), 0.25))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn minimal_genotype_file() {
        let db = parse_genotype_db("id,rs12913832\nalice,2\n", &herc2_panel()).unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db.records()[0].id, "alice");
        assert_eq!(db.records()[0].genotype.call(0), Some(2));
    }

    #[test]
    fn out_of_range_call_names_cell() {
        let err = parse_genotype_db("id,rs12913832\nalice,2\nbob,3\n", &herc2_panel()).unwrap_err();
        match err {
            Error::Ingestion {
                row, id, column, ..
            } => {
                assert_eq!(row, 3);
                assert_eq!(id, "bob");
                assert_eq!(column, "rs12913832");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn genotype_file_errors() {
        let p = herc2_panel();
        assert!(parse_genotype_db("id,rs1\nalice,2\n", &p).is_err());
        assert!(parse_genotype_db("id,rs12913832\nalice,2\nalice,1\n", &p).is_err());
        assert!(parse_genotype_db("id,rs12913832\nalice,2,1\n", &p).is_err());
        assert!(parse_genotype_db("id,rs12913832\nalice,2\r\n", &p).is_err());
        assert!(parse_genotype_db("id,rs12913832\n\nalice,2\n", &p).is_err());
        assert!(parse_genotype_db("", &p).is_err());
        assert!(parse_genotype_db("name,rs12913832\nalice,2\n", &p).is_err());
        let two = panel_n(2);
        assert!(parse_genotype_db("id,rs101,rs100\na,1,1\n", &two).is_err());
        assert!(parse_genotype_db("id,rs100\na,1\n", &two).is_err());
    }

    #[test]
    fn missing_call_token() {
        let db = parse_genotype_db("id,rs12913832\nalice,NA\n", &herc2_panel()).unwrap();
        assert_eq!(db.records()[0].genotype.call(0), None);
    }

    #[test]
    fn eighty_row_file() {
        let panel = panel_n(8);
        let mut text = String::from("id");
        for r in panel.rsids() {
            text.push(',');
            text.push_str(r);
        }
        text.push('\n');
        for i in 0..80 {
            text.push_str(&format!("p{i:02}"));
            for k in 0..8 {
                text.push_str(&format!(",{}", (i + k) % 3));
            }
            text.push('\n');
        }
        let db = parse_genotype_db(&text, &panel).unwrap();
        assert_eq!(db.len(), 80);
        assert_eq!(db.to_csv(), text);
    }

    #[test]
    fn minimal_phenotype_file() {
        let db = parse_phenotype_db("id,eye_colour\nalice,blue\n", &eye()).unwrap();
        assert_eq!(db.len(), 1);
        assert_eq!(db.records()[0].profile.value(0), Some(0));
    }

    #[test]
    fn out_of_domain_value() {
        let err = parse_phenotype_db("id,eye_colour\nbob,purple\n", &eye()).unwrap_err();
        assert!(matches!(err, Error::Ingestion { ref column, .. } if column == "eye_colour"));
    }

    #[test]
    fn missing_phenotype_value() {
        let db = parse_phenotype_db("id,eye_colour\ncarol,NA\n", &eye()).unwrap();
        assert_eq!(db.records()[0].profile.value(0), None);
    }

    #[test]
    fn phenotype_column_subset_and_comments() {
        let traits = vec![
            TraitDef::new("eye_colour", &["blue", "brown"]).unwrap(),
            TraitDef::new("freckles", &["no", "yes"]).unwrap(),
        ];
        let db = parse_phenotype_db("#salted:abc\nid,freckles\nx,yes\n", &traits).unwrap();
        assert_eq!(db.records()[0].profile.values(), &[None, Some(1)]);
        assert!(parse_phenotype_db("id,hair\nx,red\n", &traits).is_err());
        assert!(parse_phenotype_db("id,freckles,freckles\nx,yes,no\n", &traits).is_err());
    }

    #[test]
    fn drop_snp_eight_to_seven() {
        let panel = panel_n(8);
        let records = (0..10)
            .map(|i| GenotypeRecord {
                id: format!("i{i}"),
                genotype: Genotype::new((0..8).map(|k| Some(((i + k) % 3) as u8)).collect())
                    .unwrap(),
            })
            .collect();
        let db = GenotypeDatabase::new(panel, records).unwrap();
        let dropped = drop_snp(&db, "rs103").unwrap();
        assert_eq!(dropped.panel().len(), 7);
        assert_eq!(dropped.len(), 10);
        assert!(dropped.ids().eq(db.ids()));
        assert_eq!(dropped.panel().position("rs103"), None);
        assert_eq!(
            dropped.records()[1].genotype.call(3),
            db.records()[1].genotype.call(4)
        );
        assert!(matches!(drop_snp(&db, "rs999"), Err(Error::Domain(_))));
    }

    #[test]
    fn drop_last_snp_leaves_empty_panel() {
        let db = parse_genotype_db("id,rs12913832\nalice,2\n", &herc2_panel()).unwrap();
        let empty = drop_snp(&db, "rs12913832").unwrap();
        assert!(empty.panel().is_empty());
        assert_eq!(empty.len(), 1);
    }

    #[test]
    fn panel_and_trait_invariants() {
        assert!(SnpPanel::new(vec![SnpDef::new("rs1", 0.6)]).is_err());
        assert!(SnpPanel::new(vec![SnpDef::new("rs1", 0.1), SnpDef::new("rs1", 0.2)]).is_err());
        assert!(SnpPanel::new(vec![SnpDef::new("", 0.1)]).is_err());
        assert!(TraitDef::new("eye", &["blue"]).is_err());
        assert!(TraitDef::new("eye", &["blue", "blue"]).is_err());
        assert!(TraitDef::new("eye", &["blue", ""]).is_err());
        assert!(Genotype::new(vec![Some(3)]).is_err());
    }

    fn genotype_db_strategy() -> impl Strategy<Value = GenotypeDatabase> {
        (1usize..6, 0usize..12).prop_flat_map(|(snps, rows)| {
            proptest::collection::vec(
                proptest::collection::vec(prop::option::weighted(0.9, 0u8..3), snps),
                rows,
            )
            .prop_map(move |rows| {
                let records = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, calls)| GenotypeRecord {
                        id: format!("id{i}"),
                        genotype: Genotype::new(calls).unwrap(),
                    })
                    .collect();
                GenotypeDatabase::new(panel_n(snps), records).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn genotype_round_trip(db in genotype_db_strategy()) {
            let text = db.to_csv();
            let back = parse_genotype_db(&text, db.panel()).unwrap();
            prop_assert_eq!(&back, &db);
            prop_assert_eq!(back.to_csv(), text);
        }

        #[test]
        fn phenotype_round_trip(rows in proptest::collection::vec(
            (prop::option::of(0usize..3), prop::option::of(0usize..2)), 0..12)) {
            let traits = vec![
                TraitDef::new("hair", &["blonde", "brown", "black"]).unwrap(),
                TraitDef::new("freckles", &["no", "yes"]).unwrap(),
            ];
            let records = rows.into_iter().enumerate().map(|(i, (a, b))| PhenotypeRecord {
                id: format!("p{i}"),
                profile: PhenotypeProfile::new(vec![a, b]),
            }).collect();
            let db = PhenotypeDatabase::new(traits.clone(), records).unwrap();
            let text = db.to_csv();
            let back = parse_phenotype_db(&text, &traits).unwrap();
            prop_assert_eq!(&back, &db);
            prop_assert_eq!(back.to_csv(), text);
        }

        #[test]
        fn mutated_genotype_files_never_load_invalid(
            db in genotype_db_strategy(),
            pos in any::<prop::sample::Index>(),
            byte in prop::sample::select(vec![b'3', b'x', b',', b'\n', b'\r', b' ', b'N', b'-']),
        ) {
            let mut bytes = db.to_csv().into_bytes();
            let i = pos.index(bytes.len());
            bytes[i] = byte;
            let text = String::from_utf8(bytes).unwrap();
            if let Ok(parsed) = parse_genotype_db(&text, db.panel()) {
                // whatever survives must still satisfy every invariant
                prop_assert!(parsed.records().iter().all(|r| r.genotype.len() == parsed.panel().len()));
                prop_assert!(parsed.records().iter().flat_map(|r| r.genotype.calls()).flatten().all(|&c| c <= 2));
                prop_assert_eq!(parse_genotype_db(&parsed.to_csv(), parsed.panel()).unwrap(), parsed);
            }
        }
    }
}
