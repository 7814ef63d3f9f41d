use super::spec::parse_pairs;
use crate::error::{Error, Result};

/// Radially symmetric positive coefficient `h` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Weight {
    /// `h(r) = c`.
    Constant(f64),
    /// `h(r) = a + b r^2`.
    Quadratic { a: f64, b: f64 },
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Constant(1.0)
    }
}

impl Weight {
    pub fn constant(c: f64) -> Result<Self> {
        Weight::Constant(c).validated()
    }

    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        Weight::Quadratic { a, b }.validated()
    }

    fn validated(self) -> Result<Self> {
        // h is monotone in r^2, so positivity at both ends suffices
        let ok = self.h(0.0) > 0.0 && self.h(1.0) > 0.0 && self.h(0.0).is_finite() && self.h(1.0).is_finite();
        if ok {
            Ok(self)
        } else {
            Err(Error::domain(format!("weight {self:?} is not positive on [0, 1]")))
        }
    }

    /// Parses `const`, `const:c=2` or `quad:a=1,b=0.5`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let (ident, pairs) = parse_pairs(spec.trim())?;
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            pairs
                .iter()
                .find(|(k, _, _)| k == key)
                .map(|p| p.1)
                .or(default)
                .ok_or_else(|| Error::Spec {
                    position: spec.len() + 1,
                    fragment: spec.to_string(),
                    message: format!("missing key {key:?}"),
                })
        };
        let allowed: &[&str] = match ident.as_str() {
            "const" => &["c"],
            "quad" => &["a", "b"],
            other => {
                return Err(Error::Spec {
                    position: 1,
                    fragment: other.to_string(),
                    message: "unknown weight (expected const or quad)".into(),
                })
            }
        };
        if let Some((k, v, col)) = pairs.iter().find(|(k, _, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Spec {
                position: *col,
                fragment: format!("{k}={v}"),
                message: format!("unknown key {k:?}"),
            });
        }
        match ident.as_str() {
            "const" => Weight::constant(get("c", Some(1.0))?),
            _ => Weight::quadratic(get("a", None)?, get("b", None)?),
        }
    }

    pub fn h(&self, r: f64) -> f64 {
        match *self {
            Weight::Constant(c) => c,
            Weight::Quadratic { a, b } => a + b * r * r,
        }
    }

    pub fn h_prime(&self, r: f64) -> f64 {
        match *self {
            Weight::Constant(_) => 0.0,
            Weight::Quadratic { b, .. } => 2.0 * b * r,
        }
    }

    pub fn h_second(&self, _r: f64) -> f64 {
        match *self {
            Weight::Constant(_) => 0.0,
            Weight::Quadratic { b, .. } => 2.0 * b,
        }
    }

    pub fn log_h(&self, r: f64) -> f64 {
        self.h(r).ln()
    }

    /// `r h'(r) / h(r)`.
    pub fn log_slope(&self, r: f64) -> f64 {
        r * self.h_prime(r) / self.h(r)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Weight::Constant(_))
    }

    pub fn spec(&self) -> String {
        match *self {
            Weight::Constant(c) => format!("const:c={c}"),
            Weight::Quadratic { a, b } => format!("quad:a={a},b={b}"),
        }
    }
}
