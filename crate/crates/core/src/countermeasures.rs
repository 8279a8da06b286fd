//! Defenses: one-way statistical noise on published genotypes, and
//! phenotypic salt, a keyed per-trait permutation of stored trait values that
//! key holders can undo.
//!
//! The salt permutation for a trait is bit-exact across implementations:
//!
//! 1. `state = key XOR fnv1a64(trait name as UTF-8)`
//! 2. start from the identity `perm = [0, 1, .., m-1]` over domain indices
//! 3. for `i` from `m-1` down to `1`: `j = splitmix64_next(state) % (i + 1)`,
//!    swap `perm[i]` and `perm[j]`
//!
//! A stored value with domain index `v` becomes `perm[v]`.
//!
//! Salted phenotype files are ordinary phenotype files preceded by a line
//! `#salted:<hex>` carrying the SHA-256 fingerprint of the key's
//! little-endian bytes.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::genome::{
    parse_phenotype_db, Genotype, GenotypeDatabase, PhenotypeDatabase, PhenotypeProfile, TraitDef,
};
use crate::rng::{fnv1a64, substream, SplitMix64};

pub const SALT_HEADER_PREFIX: &str = "#salted:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SaltKey(pub u64);

impl SaltKey {
    /// Hex SHA-256 of the key bytes; stored next to salted data instead of the key.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.0.to_le_bytes()))
    }
}

impl std::str::FromStr for SaltKey {
    type Err = Error;

    /// Decimal, or hexadecimal with a `0x` prefix.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => s.parse(),
        };
        parsed
            .map(SaltKey)
            .map_err(|_| Error::InputFormat(format!("invalid salt key {s:?}")))
    }
}

/// Keyed permutation of `trait`'s domain indices.
pub fn salt_permutation(key: SaltKey, trait_def: &TraitDef) -> Result<Vec<usize>> {
    let m = trait_def.arity();
    if m < 2 {
        return Err(Error::domain(format!(
            "trait {} has a single value; salt cannot hide it",
            trait_def.name
        )));
    }
    let mut stream = SplitMix64::new(key.0 ^ fnv1a64(trait_def.name.as_bytes()));
    let mut perm: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let j = (stream.next_u64() % (i as u64 + 1)) as usize;
        perm.swap(i, j);
    }
    Ok(perm)
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

fn permute(pdb: &PhenotypeDatabase, perms: &[Vec<usize>]) -> PhenotypeDatabase {
    let profiles = pdb
        .records()
        .iter()
        .map(|r| {
            PhenotypeProfile::new(
                r.profile
                    .values()
                    .iter()
                    .zip(perms)
                    .map(|(v, perm)| v.map(|v| perm[v]))
                    .collect(),
            )
        })
        .collect();
    pdb.with_profiles(profiles)
}

/// Phenotype database whose stored values have been passed through the salt.
#[derive(Debug, Clone, PartialEq)]
pub struct SaltedPhenotypeDatabase {
    db: PhenotypeDatabase,
    fingerprint: String,
}

impl SaltedPhenotypeDatabase {
    /// The salted values exactly as an attacker holding the file would see them.
    pub fn as_breached(&self) -> &PhenotypeDatabase {
        &self.db
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn to_file_text(&self) -> String {
        format!(
            "{SALT_HEADER_PREFIX}{}\n{}",
            self.fingerprint,
            self.db.to_csv()
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_file_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn apply_salt(pdb: &PhenotypeDatabase, key: SaltKey) -> Result<SaltedPhenotypeDatabase> {
    let perms = pdb
        .traits()
        .iter()
        .map(|t| salt_permutation(key, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SaltedPhenotypeDatabase {
        db: permute(pdb, &perms),
        fingerprint: key.fingerprint(),
    })
}

/// Undoes [`apply_salt`]; fails without output when `key` is not the salting key.
pub fn remove_salt(sdb: &SaltedPhenotypeDatabase, key: SaltKey) -> Result<PhenotypeDatabase> {
    if key.fingerprint() != sdb.fingerprint {
        return Err(Error::KeyMismatch);
    }
    let inverses = sdb
        .db
        .traits()
        .iter()
        .map(|t| salt_permutation(key, t).map(|p| inverse(&p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(permute(&sdb.db, &inverses))
}

/// A phenotype file as stored: plain, or salted with a key fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub enum PhenotypeStore {
    Plain(PhenotypeDatabase),
    Salted(SaltedPhenotypeDatabase),
}

impl PhenotypeStore {
    pub fn parse(text: &str, traits: &[TraitDef]) -> Result<Self> {
        let db = parse_phenotype_db(text, traits)?;
        let first = text.split('\n').next().unwrap_or("");
        Ok(match first.strip_prefix(SALT_HEADER_PREFIX) {
            Some(fp) => {
                if fp.len() != 64 || !fp.bytes().all(|b| b.is_ascii_hexdigit()) {
                    return Err(Error::InputFormat(format!(
                        "malformed salt fingerprint {fp:?}"
                    )));
                }
                PhenotypeStore::Salted(SaltedPhenotypeDatabase {
                    db,
                    fingerprint: fp.to_ascii_lowercase(),
                })
            }
            None => PhenotypeStore::Plain(db),
        })
    }

    pub fn load(path: impl AsRef<Path>, traits: &[TraitDef]) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PhenotypeStore::parse(&text, traits)
    }

    /// Values as stored, whether salted or not.
    pub fn data(&self) -> &PhenotypeDatabase {
        match self {
            PhenotypeStore::Plain(db) => db,
            PhenotypeStore::Salted(s) => &s.db,
        }
    }

    pub fn salt(&self, key: SaltKey) -> Result<SaltedPhenotypeDatabase> {
        match self {
            PhenotypeStore::Plain(db) => apply_salt(db, key),
            PhenotypeStore::Salted(_) => {
                Err(Error::State("phenotype data is already salted".into()))
            }
        }
    }

    pub fn unsalt(&self, key: SaltKey) -> Result<PhenotypeDatabase> {
        match self {
            PhenotypeStore::Salted(s) => remove_salt(s, key),
            PhenotypeStore::Plain(_) => Err(Error::State("phenotype data is not salted".into())),
        }
    }
}

/// Replaces each present call, with probability `rate`, by one of the two
/// other calls chosen uniformly. Record `k` draws from its own substream of
/// `seed`, visiting panel positions in order.
pub(crate) fn flip_calls(gdb: &GenotypeDatabase, rate: f64, seed: u64) -> Result<GenotypeDatabase> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::domain(format!("rate {rate} outside [0, 1]")));
    }
    let genotypes: Vec<Genotype> = gdb
        .records()
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let mut rng = substream(seed, k as u64);
            let calls = r
                .genotype
                .calls()
                .iter()
                .map(|c| {
                    c.map(|c| {
                        if rng.gen::<f64>() < rate {
                            (c + 1 + rng.gen_range(0..2u8)) % 3
                        } else {
                            c
                        }
                    })
                })
                .collect();
            Genotype::new(calls).expect("calls stay in 0..=2")
        })
        .collect();
    Ok(gdb.with_genotypes(genotypes))
}

/// Statistical noise applied to a genotype database before release.
pub fn add_genotype_noise(
    gdb: &GenotypeDatabase,
    rate: f64,
    seed: u64,
) -> Result<GenotypeDatabase> {
    flip_calls(gdb, rate, seed)
}
