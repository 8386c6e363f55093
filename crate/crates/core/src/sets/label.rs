use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qstate::Bipartition;

use super::{candidate_max_set, one_param_set, separability_unitary_appb, warmup_set, StateSet};

/// A named built-in set.
///
/// Grammar: `one-param:<d1>x<d2>[:<c>]`, `set2`, `warmup`, `appb[:<c21>]`.
/// The amplitude may be omitted when the set is the subject of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetSpec {
    OneParam { bp: Bipartition, c: Option<f64> },
    Set2,
    Warmup,
    AppB { c21: Option<f64> },
}

impl SetSpec {
    /// Builds the set; fails if a required amplitude is missing or out of range.
    pub fn build(&self) -> Result<StateSet> {
        match *self {
            SetSpec::OneParam { bp, c } => one_param_set(bp, require(c, "one-param")?),
            SetSpec::Set2 => Ok(candidate_max_set()),
            SetSpec::Warmup => Ok(warmup_set().0),
            SetSpec::AppB { c21 } => Ok(separability_unitary_appb(require(c21, "appb")?)?.0),
        }
    }

    pub fn with_param(self, value: f64) -> Self {
        match self {
            SetSpec::OneParam { bp, .. } => SetSpec::OneParam { bp, c: Some(value) },
            SetSpec::AppB { .. } => SetSpec::AppB { c21: Some(value) },
            other => other,
        }
    }
}

fn require(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::OutOfRange(format!("{what} needs an amplitude parameter")))
}

fn parse_amp(s: &str, label: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::UnknownLabel(label.to_string()))?;
    if !v.is_finite() {
        return Err(Error::UnknownLabel(label.to_string()));
    }
    Ok(v)
}

impl FromStr for SetSpec {
    type Err = Error;

    fn from_str(label: &str) -> Result<Self> {
        let unknown = || Error::UnknownLabel(label.to_string());
        let mut parts = label.split(':');
        let head = parts.next().ok_or_else(unknown)?;
        let spec = match head {
            "set2" => SetSpec::Set2,
            "warmup" => SetSpec::Warmup,
            "appb" => SetSpec::AppB {
                c21: parts.next().map(|s| parse_amp(s, label)).transpose()?,
            },
            "one-param" => {
                let dims = parts.next().ok_or_else(unknown)?;
                let (a, b) = dims.split_once('x').ok_or_else(unknown)?;
                let d1: usize = a.parse().map_err(|_| unknown())?;
                let d2: usize = b.parse().map_err(|_| unknown())?;
                if d1 > 64 || d2 > 64 {
                    return Err(unknown());
                }
                let bp = Bipartition::new(d1, d2)?;
                let c = parts.next().map(|s| parse_amp(s, label)).transpose()?;
                SetSpec::OneParam { bp, c }
            }
            _ => return Err(unknown()),
        };
        if parts.next().is_some() {
            return Err(unknown());
        }
        Ok(spec)
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::OneParam { bp, c } => {
                write!(f, "one-param:{}x{}", bp.d1(), bp.d2())?;
                if let Some(c) = c {
                    write!(f, ":{c}")?;
                }
                Ok(())
            }
            SetSpec::Set2 => write!(f, "set2"),
            SetSpec::Warmup => write!(f, "warmup"),
            SetSpec::AppB { c21 } => match c21 {
                Some(c) => write!(f, "appb:{c}"),
                None => write!(f, "appb"),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtins() {
        assert_eq!("set2".parse::<SetSpec>().unwrap(), SetSpec::Set2);
        assert_eq!("warmup".parse::<SetSpec>().unwrap(), SetSpec::Warmup);
        let s: SetSpec = "one-param:2x3:0.7".parse().unwrap();
        assert_eq!(
            s,
            SetSpec::OneParam {
                bp: Bipartition::new(2, 3).unwrap(),
                c: Some(0.7)
            }
        );
        assert_eq!(s.to_string(), "one-param:2x3:0.7");
        let set = s.build().unwrap();
        assert_eq!(set.len(), 5);
        assert!(matches!(
            "one-param:2x2".parse::<SetSpec>().unwrap(),
            SetSpec::OneParam { c: None, .. }
        ));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "set3", "one-param", "one-param:2y2", "one-param:1x2:0.5", "set2:1", "appb:x"] {
            assert!(bad.parse::<SetSpec>().is_err(), "{bad}");
        }
        assert!("one-param:2x2".parse::<SetSpec>().unwrap().build().is_err());
    }
}
