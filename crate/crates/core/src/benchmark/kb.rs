use std::collections::BTreeSet;

use serde::Deserialize;

use crate::agents::Action;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Product {
    pub product_id: String,
    pub name: String,
    pub warranty_months: u32,
    pub warranty_terms: String,
    #[serde(default)]
    pub exclusions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TroubleshootingEntry {
    pub entry_id: String,
    pub symptom: String,
    pub resolution: Action,
    #[serde(default)]
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeBase {
    pub schema_version: u32,
    pub products: Vec<Product>,
    pub troubleshooting: Vec<TroubleshootingEntry>,
}

impl KnowledgeBase {
    pub const REFERENCE_PRODUCTS: usize = 15;
    pub const REFERENCE_TROUBLESHOOTING: usize = 10;

    pub fn product(&self, id: &str) -> Option<&Product> {
        self.products.iter().find(|p| p.product_id == id)
    }

    /// Structural problems; `reference` also pins the entry counts.
    pub fn violations(&self, reference: bool) -> Vec<String> {
        let mut v = Vec::new();
        if self.schema_version != 1 {
            v.push(format!("kb: unsupported schema_version {}", self.schema_version));
        }
        if reference && self.products.len() != Self::REFERENCE_PRODUCTS {
            v.push(format!("kb: {} products, expected {}", self.products.len(), Self::REFERENCE_PRODUCTS));
        }
        if reference && self.troubleshooting.len() != Self::REFERENCE_TROUBLESHOOTING {
            v.push(format!("kb: {} troubleshooting entries, expected {}", self.troubleshooting.len(), Self::REFERENCE_TROUBLESHOOTING));
        }
        let mut seen = BTreeSet::new();
        for p in &self.products {
            if !seen.insert(&p.product_id) {
                v.push(format!("kb: duplicate product_id {}", p.product_id));
            }
        }
        let mut seen = BTreeSet::new();
        for t in &self.troubleshooting {
            if !seen.insert(&t.entry_id) {
                v.push(format!("kb: duplicate troubleshooting entry {}", t.entry_id));
            }
        }
        v
    }

    /// Text handed to the decision step: the product's terms plus every
    /// troubleshooting entry.
    pub fn context_for(&self, product_id: &str) -> String {
        let mut s = String::new();
        match self.product(product_id) {
            Some(p) => {
                s.push_str(&format!("Product {} ({}): {}-month warranty. {}\n", p.product_id, p.name, p.warranty_months, p.warranty_terms));
                if !p.exclusions.is_empty() {
                    s.push_str(&format!("Exclusions: {}.\n", p.exclusions.join("; ")));
                }
            }
            None => s.push_str(&format!("Product {product_id}: not in the knowledge base.\n")),
        }
        s.push_str("Troubleshooting:\n");
        for t in &self.troubleshooting {
            s.push_str(&format!("- {}: {} -> {}\n", t.entry_id, t.symptom, t.resolution));
        }
        s
    }
}
