//! Opaque constants of the a priori estimates.
//!
//! The analytic bounds only fix these up to structure; every report carries
//! the ledger it was computed with so absolute numbers can be reproduced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ledger {
    /// Cohomological bound on the reference form.
    pub a: f64,
    /// Luxemburg-norm bound of the density.
    pub k: f64,
    /// Growth-condition constant.
    pub l: f64,
    /// Constant inside the volume bound `v(r) = 1/(Ψ*∘Ψ̃*)(C/r²)`.
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// `Φ*(1)`, recorded (never folded into other constants) when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_star_at_one: Option<f64>,
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::seeded(1.0)
    }
}

impl Ledger {
    /// Every constant set to `v`.
    pub fn seeded(v: f64) -> Self {
        Ledger { a: v, k: v, l: v, c: v, c1: v, c2: v, c3: v, c4: v, c5: v, phi_star_at_one: None }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.a, self.k, self.l, self.c, self.c1, self.c2, self.c3, self.c4, self.c5];
        if vals.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::config("ledger constants must be positive and finite"))
        }
    }

    /// Applies `name=value` overrides, e.g. `k=2`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name.to_ascii_lowercase().as_str() {
            "a" => &mut self.a,
            "k" => &mut self.k,
            "l" => &mut self.l,
            "c" => &mut self.c,
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "c3" => &mut self.c3,
            "c4" => &mut self.c4,
            "c5" => &mut self.c5,
            other => return Err(Error::config(format!("unknown ledger constant '{other}'"))),
        };
        *slot = value;
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_one_and_overrides_validate() {
        let mut l = Ledger::default();
        assert_eq!(l.c5, 1.0);
        l.set("K", 4.0).unwrap();
        assert_eq!(l.k, 4.0);
        assert!(l.set("c1", -1.0).is_err());
        assert!(l.set("zeta", 1.0).is_err());
        assert_eq!(Ledger::seeded(3.0).c, 3.0);
    }
}
