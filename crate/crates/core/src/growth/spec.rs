//! The `family:key=value,key=value` mini-grammar.

use super::Family;
use crate::error::{Error, Result};

fn spec_error(position: usize, fragment: &str, message: impl Into<String>) -> Error {
    Error::Spec {
        position,
        fragment: fragment.to_string(),
        message: message.into(),
    }
}

/// Splits `ident[:k=v,...]` into the identifier and `(key, value, column)`
/// triples. Columns are 1-based character offsets of each pair.
pub fn parse_pairs(spec: &str) -> Result<(String, Vec<(String, f64, usize)>)> {
    let (ident, rest) = match spec.split_once(':') {
        Some((i, r)) => (i, Some(r)),
        None => (spec, None),
    };
    let valid_ident = !ident.is_empty()
        && ident.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && ident.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if !valid_ident {
        return Err(spec_error(1, ident, "expected an identifier"));
    }
    let mut pairs: Vec<(String, f64, usize)> = Vec::new();
    if let Some(rest) = rest {
        let mut col = ident.chars().count() + 2;
        for frag in rest.split(',') {
            let Some((key, value)) = frag.split_once('=') else {
                return Err(spec_error(col, frag, "expected key=value"));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(spec_error(col, frag, "empty key"));
            }
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| spec_error(col, frag, format!("{value:?} is not a decimal number")))?;
            if !v.is_finite() {
                return Err(spec_error(col, frag, "value must be finite"));
            }
            if pairs.iter().any(|(k, _, _)| k == key) {
                return Err(spec_error(col, frag, format!("duplicate key {key:?}")));
            }
            pairs.push((key.to_string(), v, col));
            col += frag.chars().count() + 1;
        }
    }
    Ok((ident.to_string(), pairs))
}

struct Params {
    pairs: Vec<(String, f64, usize)>,
    used: Vec<bool>,
}

impl Params {
    fn take(&mut self, key: &str) -> Option<(f64, usize)> {
        let i = self.pairs.iter().position(|(k, _, _)| k == key)?;
        self.used[i] = true;
        Some((self.pairs[i].1, self.pairs[i].2))
    }

    fn require(&mut self, key: &str, spec: &str) -> Result<f64> {
        self.take(key)
            .map(|(v, _)| v)
            .ok_or_else(|| spec_error(spec.chars().count() + 1, spec, format!("missing key {key:?}")))
    }

    fn finish(self) -> Result<()> {
        for ((k, v, col), used) in self.pairs.iter().zip(&self.used) {
            if !used {
                return Err(spec_error(*col, &format!("{k}={v}"), format!("unknown key {k:?}")));
            }
        }
        Ok(())
    }
}

/// Parses a growth model spec such as `power-exp:p=3` or
/// `multi-exp:k=2,m=1,l=0`.
pub fn parse_family(spec: &str) -> Result<Family> {
    let (ident, pairs) = parse_pairs(spec.trim())?;
    let n = pairs.len();
    let mut params = Params { pairs, used: vec![false; n] };
    let family = match ident.as_str() {
        "power-exp" => Family::PowerExp { p: params.require("p", spec)? },
        "power-exp-log" => Family::PowerExpLog {
            p: params.require("p", spec)?,
            l: params.require("l", spec)?,
        },
        "multi-exp" => {
            let k = params.require("k", spec)?;
            if k.fract() != 0.0 || !(2.0..=16.0).contains(&k) {
                return Err(spec_error(1, spec, format!("k must be an integer in [2, 16], got {k}")));
            }
            Family::MultiExp {
                k: k as u32,
                m: params.take("m").map_or(1.0, |(v, _)| v),
                l: params.take("l").map_or(0.0, |(v, _)| v),
            }
        }
        "pure-exp" => Family::PureExp,
        other => return Err(spec_error(1, other, "unknown family")),
    };
    params.finish()?;
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_families() {
        assert_eq!(parse_family("power-exp:p=3").unwrap(), Family::PowerExp { p: 3.0 });
        assert_eq!(
            parse_family("power-exp-log:p=2,l=1").unwrap(),
            Family::PowerExpLog { p: 2.0, l: 1.0 }
        );
        assert_eq!(
            parse_family("multi-exp:k=2,m=1,l=0").unwrap(),
            Family::MultiExp { k: 2, m: 1.0, l: 0.0 }
        );
        assert_eq!(parse_family("pure-exp").unwrap(), Family::PureExp);
    }

    #[test]
    fn malformed_value_reports_fragment() {
        match parse_family("power-exp:p=two").unwrap_err() {
            Error::Spec { position, fragment, .. } => {
                assert_eq!(position, 11);
                assert_eq!(fragment, "p=two");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_key_and_family_rejected() {
        assert!(matches!(parse_family("power-exp:p=3,q=2"), Err(Error::Spec { position: 15, .. })));
        assert!(parse_family("cosh:p=3").is_err());
        assert!(parse_family("power-exp").is_err());
        assert!(parse_family("power-exp:p=3,p=4").is_err());
        assert!(parse_family("multi-exp:k=2.5").is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["power-exp:p=3", "power-exp-log:p=2,l=1", "multi-exp:k=2,m=1,l=0", "pure-exp"] {
            assert_eq!(parse_family(s).unwrap().to_string(), s);
        }
    }
}
