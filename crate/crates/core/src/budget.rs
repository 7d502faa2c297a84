//! Desk-scale resource budgets for exhaustive oracles.
//!
//! Defaults: 10^6 enumerated states/subsets and 10^7 dynamic-programming cells.
//! `CONC_LAB_BUDGET` overrides them, either as a single integer `N` (enumeration
//! `N`, DP `10 N`) or as `enum=N,dp=M`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub enumeration: u128,
    pub dp_cells: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            enumeration: 1_000_000,
            dp_cells: 10_000_000,
        }
    }
}

static INSTALLED: OnceLock<Budget> = OnceLock::new();

pub const ENV_VAR: &str = "CONC_LAB_BUDGET";

impl Budget {
    pub fn parse(spec: &str) -> Result<Budget> {
        let spec = spec.trim();
        if let Ok(n) = spec.parse::<u128>() {
            return Ok(Budget {
                enumeration: n,
                dp_cells: n.saturating_mul(10),
            });
        }
        let mut b = Budget::default();
        for part in spec.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("budget entry {part:?} is not key=value")))?;
            let v: u128 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("budget value {v:?} is not an integer")))?;
            match k.trim() {
                "enum" => b.enumeration = v,
                "dp" => b.dp_cells = v,
                other => {
                    return Err(Error::Parse(format!(
                        "unknown budget key {other:?} (expected enum or dp)"
                    )))
                }
            }
        }
        Ok(b)
    }

    /// Budget in force for this process: the installed one, else the
    /// environment override, else the defaults.
    pub fn current() -> Budget {
        *INSTALLED.get_or_init(|| {
            std::env::var(ENV_VAR)
                .ok()
                .and_then(|s| Budget::parse(&s).ok())
                .unwrap_or_default()
        })
    }

    /// Fixes the process-wide budget. Returns false if one was already fixed.
    pub fn install(self) -> bool {
        INSTALLED.set(self).is_ok()
    }

    pub fn check_enumeration(&self, what: &str, needed: u128) -> Result<()> {
        if needed > self.enumeration {
            return Err(Error::Resource {
                what: what.to_string(),
                needed,
                budget: self.enumeration,
                partial: None,
            });
        }
        Ok(())
    }

    pub fn check_dp(&self, what: &str, needed: u128) -> Result<()> {
        if needed > self.dp_cells {
            return Err(Error::Resource {
                what: what.to_string(),
                needed,
                budget: self.dp_cells,
                partial: None,
            });
        }
        Ok(())
    }
}
