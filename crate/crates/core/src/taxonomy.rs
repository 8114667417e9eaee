//! DEXPI class hierarchy used for package inference and graph labels.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::model::Package;

const DEXPI_TAXONOMY: &str = include_str!("../data/taxonomy.json");

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("invalid taxonomy table: {0}")]
    Json(#[from] serde_json::Error),
    #[error("class {class} has an empty ancestor chain")]
    EmptyChain { class: String },
    #[error("class {class} is rooted at unknown package {root}")]
    UnknownRoot { class: String, root: String },
}

/// Maps a class name to its ancestor chain `[package, tier, ...]`,
/// excluding the class itself.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    chains: HashMap<String, Vec<String>>,
}

impl Taxonomy {
    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let chains: HashMap<String, Vec<String>> = serde_json::from_str(text)?;
        for (class, chain) in &chains {
            let root = chain.first().ok_or_else(|| TaxonomyError::EmptyChain {
                class: class.clone(),
            })?;
            if Package::parse(root).is_none() {
                return Err(TaxonomyError::UnknownRoot {
                    class: class.clone(),
                    root: root.clone(),
                });
            }
        }
        Ok(Taxonomy { chains })
    }

    /// The table shipped with the crate.
    pub fn dexpi() -> &'static Taxonomy {
        static TABLE: OnceLock<Taxonomy> = OnceLock::new();
        TABLE.get_or_init(|| Taxonomy::from_json(DEXPI_TAXONOMY).expect("bundled taxonomy is valid"))
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.chains.keys().map(String::as_str)
    }

    pub fn contains(&self, class_name: &str) -> bool {
        self.chains.contains_key(class_name)
    }

    pub fn ancestors(&self, class_name: &str) -> Option<&[String]> {
        self.chains.get(class_name).map(Vec::as_slice)
    }

    pub fn package_of(&self, class_name: &str) -> Option<Package> {
        self.ancestors(class_name)
            .and_then(|c| c.first())
            .and_then(|root| Package::parse(root))
    }

    /// Labels for a class: package, intermediate tiers, then the class in lowerCamelCase.
    /// `fallback` supplies the package for classes missing from the table.
    pub fn labels(&self, class_name: &str, fallback: Package) -> Vec<String> {
        let mut labels: Vec<String> = match self.ancestors(class_name) {
            Some(chain) => chain.to_vec(),
            None => vec![fallback.as_str().to_string()],
        };
        let own = lower_camel(class_name);
        if labels.last() != Some(&own) {
            labels.push(own);
        }
        labels
    }

    /// True if `label` appears as a tier in the chain of any class.
    pub fn is_tier(&self, label: &str) -> bool {
        self.chains.values().any(|c| c.iter().any(|t| t == label))
    }
}

/// `ReciprocatingPump` -> `reciprocatingPump`. Characters that are not
/// alphanumeric are dropped and the following letter is upper-cased, so
/// `NominalCapacity(Volume)` becomes `nominalCapacityVolume`.
pub fn lower_camel(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut upper_next = false;
    for c in name.chars() {
        if !c.is_alphanumeric() {
            upper_next = !out.is_empty();
            continue;
        }
        if out.is_empty() {
            out.extend(c.to_lowercase());
        } else if upper_next {
            out.extend(c.to_uppercase());
        } else {
            out.push(c);
        }
        upper_next = false;
    }
    out
}
