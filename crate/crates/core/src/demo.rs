//! Built-in eight-trait synthetic world, one SNP per trait.
//!
//! Only the eye-colour table carries a real-world anchor (a single HERC2 SNP
//! calling brown eyes with 0.88 probability for two minor alleles). The other
//! rsids are real identifiers but their tables and frequencies are invented:
//! near-deterministic tables at allele frequency 0.5.

use crate::genome::{SnpDef, SnpPanel, TraitDef};
use crate::model::{Provenance, TraitModel};

struct DemoTrait {
    name: &'static str,
    domain: &'static [&'static str],
    rsid: &'static str,
    maf: f64,
    cpt: &'static [f64],
}

const TRAITS: &[DemoTrait] = &[
    DemoTrait {
        name: "eye_colour",
        domain: &["blue", "green", "brown"],
        rsid: "rs12913832",
        maf: 0.45,
        cpt: &[0.70, 0.20, 0.10, 0.25, 0.30, 0.45, 0.04, 0.08, 0.88],
    },
    DemoTrait {
        name: "hair_colour",
        domain: &["blonde", "brown", "black", "red"],
        rsid: "rs1805007",
        maf: 0.50,
        cpt: &[
            0.493, 0.495, 0.010, 0.002, 0.063, 0.596, 0.020, 0.321, 0.002, 0.002, 0.002, 0.994,
        ],
    },
    DemoTrait {
        name: "freckles",
        domain: &["no", "yes"],
        rsid: "rs1805008",
        maf: 0.50,
        cpt: &[0.998, 0.002, 0.50, 0.50, 0.002, 0.998],
    },
    DemoTrait {
        name: "skin_tone",
        domain: &["light", "medium", "dark"],
        rsid: "rs1426654",
        maf: 0.50,
        cpt: &[
            0.002, 0.007, 0.991, 0.040, 0.944, 0.016, 0.993, 0.005, 0.002,
        ],
    },
    DemoTrait {
        name: "earwax",
        domain: &["wet", "dry"],
        rsid: "rs17822931",
        maf: 0.50,
        cpt: &[0.998, 0.002, 0.996, 0.004, 0.002, 0.998],
    },
    DemoTrait {
        name: "lactose",
        domain: &["tolerant", "intolerant"],
        rsid: "rs4988235",
        maf: 0.50,
        cpt: &[0.002, 0.998, 0.835, 0.165, 0.998, 0.002],
    },
    DemoTrait {
        name: "hair_texture",
        domain: &["straight", "wavy", "curly"],
        rsid: "rs17646946",
        maf: 0.50,
        cpt: &[
            0.991, 0.007, 0.002, 0.112, 0.866, 0.022, 0.002, 0.021, 0.977,
        ],
    },
    DemoTrait {
        name: "tanning",
        domain: &["burns", "tans"],
        rsid: "rs12203592",
        maf: 0.50,
        cpt: &[0.012, 0.988, 0.835, 0.165, 0.998, 0.002],
    },
];

/// Generating model of the demo world (curated provenance).
pub fn eight_trait_model() -> TraitModel {
    let panel = SnpPanel::new(TRAITS.iter().map(|t| SnpDef::new(t.rsid, t.maf)).collect())
        .expect("demo panel is valid");
    let traits = TRAITS
        .iter()
        .map(|t| TraitDef::new(t.name, t.domain).expect("demo trait is valid"))
        .collect();
    let associations = TRAITS
        .iter()
        .map(|t| (t.name.to_string(), t.rsid.to_string(), t.cpt.to_vec()))
        .collect();
    TraitModel::from_associations(panel, traits, associations, Provenance::Curated)
        .expect("demo model is valid")
}
