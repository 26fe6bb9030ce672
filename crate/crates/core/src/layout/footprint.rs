use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{normalize_label, Warning};

/// Top-down furniture size: `width_m` runs along the wall it is anchored to,
/// `depth_m` points into the room.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub width_m: f64,
    pub depth_m: f64,
}

impl Footprint {
    pub const fn new(width_m: f64, depth_m: f64) -> Self {
        Self { width_m, depth_m }
    }

    pub fn area(&self) -> f64 {
        self.width_m * self.depth_m
    }
}

pub const FALLBACK_FOOTPRINT: Footprint = Footprint::new(1.0, 1.0);

const DEFAULTS: &[(&str, f64, f64)] = &[
    ("armchair", 0.8, 0.8),
    ("bed", 1.6, 2.0),
    ("bookshelf", 0.8, 0.3),
    ("cabinet", 0.8, 0.45),
    ("chair", 0.5, 0.5),
    ("coffee_table", 1.0, 0.6),
    ("desk", 1.2, 0.6),
    ("dining_table", 1.6, 0.9),
    ("dresser", 1.2, 0.5),
    ("nightstand", 0.5, 0.4),
    ("shelf", 0.8, 0.3),
    ("sideboard", 1.6, 0.45),
    ("sofa", 2.0, 0.9),
    ("table", 1.2, 0.8),
    ("tv_stand", 1.5, 0.4),
    ("wardrobe", 1.5, 0.6),
];

/// Category -> footprint lookup, overridable per store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintTable {
    entries: BTreeMap<String, Footprint>,
}

impl Default for FootprintTable {
    fn default() -> Self {
        Self { entries: DEFAULTS.iter().map(|(c, w, d)| (c.to_string(), Footprint::new(*w, *d))).collect() }
    }
}

impl FootprintTable {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Entries from `overrides` replace or extend the table.
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = (&'a String, &'a Footprint)>) -> Self {
        for (cat, fp) in overrides {
            self.entries.insert(normalize_label(cat), *fp);
        }
        self
    }

    pub fn insert(&mut self, category: &str, footprint: Footprint) {
        self.entries.insert(normalize_label(category), footprint);
    }

    pub fn get(&self, category: &str) -> Option<Footprint> {
        self.entries.get(&normalize_label(category)).copied()
    }

    /// Footprint for a category, falling back to 1 x 1 m with a warning.
    pub fn default_footprint(&self, category: &str) -> (Footprint, Option<Warning>) {
        match self.get(category) {
            Some(fp) => (fp, None),
            None => (
                FALLBACK_FOOTPRINT,
                Some(Warning::new(
                    "unknown_footprint",
                    category,
                    format!("no footprint configured for {category:?}; using 1.0 x 1.0 m"),
                )),
            ),
        }
    }
}
