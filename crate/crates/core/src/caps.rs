//! Resource caps shared by all modules.
//!
//! Defaults can be overridden through the `QMETRIC_CAP` environment variable,
//! a comma separated list of `key=value` pairs, e.g.
//! `QMETRIC_CAP=matrix_dim=8192,lattice_card=200000000`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const ENV_VAR: &str = "QMETRIC_CAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Largest row or column count of a dense matrix.
    pub matrix_dim: usize,
    /// Largest group enumerated by exhaustive Lip-norm suprema.
    pub group_enum: u64,
    /// Largest lattice set produced by a Minkowski sum.
    pub lattice_card: u64,
    /// Largest number of tuples enumerated by a product set.
    pub product_set: u64,
    /// Largest common denominator accepted by the clock/shift representation.
    pub rational_den: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            matrix_dim: 4096,
            group_enum: 1 << 20,
            lattice_card: 100_000_000,
            product_set: 1 << 20,
            rational_den: 64,
        }
    }
}

static GLOBAL: OnceLock<Caps> = OnceLock::new();

impl Caps {
    /// Caps in effect for this process (defaults merged with `QMETRIC_CAP`).
    ///
    /// A malformed environment value is reported once on stderr and ignored.
    pub fn global() -> Caps {
        *GLOBAL.get_or_init(|| match std::env::var(ENV_VAR) {
            Ok(spec) => Caps::default().with_overrides(&spec).unwrap_or_else(|e| {
                eprintln!("qmetric: ignoring {ENV_VAR}: {e}");
                Caps::default()
            }),
            Err(_) => Caps::default(),
        })
    }

    /// Apply a `key=value,...` override string.
    pub fn with_overrides(mut self, spec: &str) -> Result<Caps> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::pre(format!("cap override `{item}` is not key=value")))?;
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| Error::pre(format!("cap override `{item}` has a non-integer value")))?;
            match key.trim() {
                "matrix_dim" => self.matrix_dim = value as usize,
                "group_enum" => self.group_enum = value,
                "lattice_card" => self.lattice_card = value,
                "product_set" => self.product_set = value,
                "rational_den" => self.rational_den = value,
                other => return Err(Error::pre(format!("unknown cap `{other}`"))),
            }
        }
        Ok(self)
    }
}
