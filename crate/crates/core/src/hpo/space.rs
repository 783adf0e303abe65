use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Value domain of one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Domain {
    Continuous { lo: f64, hi: f64 },
    LogContinuous { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    LogInteger { lo: i64, hi: i64 },
    Categorical { options: Vec<String> },
    Boolean,
}

/// A concrete hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.as_f64().is_some()
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{}", crate::eval::format_number(*x)),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Continuous { lo, hi } => lo < hi,
            Domain::LogContinuous { lo, hi } => *lo > 0.0 && lo < hi,
            Domain::Integer { lo, hi } => lo < hi,
            Domain::LogInteger { lo, hi } => *lo > 0 && lo < hi,
            Domain::Categorical { options } => !options.is_empty(),
            Domain::Boolean => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid domain {self:?}")))
        }
    }

    /// Whether the domain has an order (numeric) rather than a finite label set.
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Domain::Categorical { .. } | Domain::Boolean)
    }

    /// Number of discrete choices for categorical and boolean domains.
    pub fn n_choices(&self) -> Option<usize> {
        match self {
            Domain::Categorical { options } => Some(options.len()),
            Domain::Boolean => Some(2),
            _ => None,
        }
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        match (self, v) {
            (Domain::Continuous { lo, hi } | Domain::LogContinuous { lo, hi }, _) => {
                v.as_f64().is_some_and(|x| x >= *lo && x <= *hi)
            }
            (Domain::Integer { lo, hi } | Domain::LogInteger { lo, hi }, ParamValue::Int(i)) => i >= lo && i <= hi,
            (Domain::Categorical { options }, ParamValue::Str(s)) => options.contains(s),
            (Domain::Boolean, ParamValue::Bool(_)) => true,
            _ => false,
        }
    }

    /// Maps a numeric value to [0, 1] (log scale for log domains).
    pub fn to_unit(&self, v: &ParamValue) -> Option<f64> {
        let x = v.as_f64()?;
        let u = match self {
            Domain::Continuous { lo, hi } => (x - lo) / (hi - lo),
            Domain::LogContinuous { lo, hi } => (x.ln() - lo.ln()) / (hi.ln() - lo.ln()),
            Domain::Integer { lo, hi } => (x - *lo as f64) / (*hi - *lo) as f64,
            Domain::LogInteger { lo, hi } => (x.ln() - (*lo as f64).ln()) / ((*hi as f64).ln() - (*lo as f64).ln()),
            _ => return None,
        };
        Some(u.clamp(0.0, 1.0))
    }

    /// Inverse of [`Domain::to_unit`]; integers are rounded to the nearest
    /// admissible value.
    pub fn from_unit(&self, u: f64) -> Option<ParamValue> {
        let u = u.clamp(0.0, 1.0);
        Some(match self {
            Domain::Continuous { lo, hi } => ParamValue::Float((lo + u * (hi - lo)).clamp(*lo, *hi)),
            Domain::LogContinuous { lo, hi } => {
                ParamValue::Float((lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi))
            }
            Domain::Integer { lo, hi } => {
                ParamValue::Int(((*lo as f64 + u * (*hi - *lo) as f64).round() as i64).clamp(*lo, *hi))
            }
            Domain::LogInteger { lo, hi } => {
                let (a, b) = ((*lo as f64).ln(), (*hi as f64).ln());
                ParamValue::Int(((a + u * (b - a)).exp().round() as i64).clamp(*lo, *hi))
            }
            _ => return None,
        })
    }

    /// Value for a discrete choice index.
    pub fn choice(&self, i: usize) -> Option<ParamValue> {
        match self {
            Domain::Categorical { options } => options.get(i).map(|s| ParamValue::Str(s.clone())),
            Domain::Boolean => Some(ParamValue::Bool(i == 1)),
            _ => None,
        }
    }

    /// Index of a discrete value.
    pub fn choice_index(&self, v: &ParamValue) -> Option<usize> {
        match (self, v) {
            (Domain::Categorical { options }, ParamValue::Str(s)) => options.iter().position(|o| o == s),
            (Domain::Boolean, ParamValue::Bool(b)) => Some(usize::from(*b)),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> ParamValue {
        match self.n_choices() {
            Some(k) => self.choice(rng.random_range(0..k)).expect("index in range"),
            None => self.from_unit(rng.random::<f64>()).expect("numeric domain"),
        }
    }

    /// Centre of the domain: arithmetic for linear domains, geometric for log
    /// domains, the first option for categoricals and `false` for booleans.
    pub fn midpoint(&self) -> ParamValue {
        match self {
            Domain::Categorical { .. } | Domain::Boolean => self.choice(0).expect("non-empty"),
            _ => self.from_unit(0.5).expect("numeric domain"),
        }
    }
}

/// One named, labelled hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    /// Human-readable labels under which the parameter is reported.
    pub labels: Vec<String>,
    pub domain: Domain,
}

/// Ordered set of tunable hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<Param>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style insertion; panics on an invalid domain or duplicate
    /// name, which are programming errors in static spaces.
    pub fn with(mut self, name: &str, labels: &[&str], domain: Domain) -> Self {
        self.push(name, labels, domain).expect("valid static search space");
        self
    }

    pub fn push(&mut self, name: &str, labels: &[&str], domain: Domain) -> Result<()> {
        domain.validate()?;
        if self.get(name).is_some() {
            return Err(Error::config(format!("duplicate hyperparameter `{name}`")));
        }
        self.params.push(Param {
            name: name.to_string(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            domain,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Finds a parameter by any of its labels.
    pub fn by_label(&self, label: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.labels.iter().any(|l| l == label))
    }

    pub fn sample(&self, rng: &mut Rng) -> Assignment {
        Assignment(self.params.iter().map(|p| (p.name.clone(), p.domain.sample(rng))).collect())
    }

    pub fn midpoint(&self) -> Assignment {
        Assignment(self.params.iter().map(|p| (p.name.clone(), p.domain.midpoint())).collect())
    }

    /// True when every parameter is present and inside its domain, and no
    /// unknown names appear.
    pub fn contains(&self, a: &Assignment) -> bool {
        a.0.len() == self.params.len()
            && self.params.iter().all(|p| a.0.get(&p.name).is_some_and(|v| p.domain.contains(v)))
    }

    /// Checks that a (possibly partial) assignment only names known
    /// parameters with in-domain values.
    pub fn validate_partial(&self, a: &Assignment) -> Result<()> {
        for (k, v) in &a.0 {
            let p = self.get(k).ok_or_else(|| Error::config(format!("unknown hyperparameter `{k}`")))?;
            if !p.domain.contains(v) {
                return Err(Error::config(format!("hyperparameter `{k}` = {v} outside its domain")));
            }
        }
        Ok(())
    }
}

/// A hyperparameter assignment keyed by parameter name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub BTreeMap<String, ParamValue>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, name: &str, v: ParamValue) -> Self {
        self.0.insert(name.to_string(), v);
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn f64_or(&self, name: &str, default: f64) -> f64 {
        self.0.get(name).and_then(ParamValue::as_f64).unwrap_or(default)
    }

    pub fn usize_or(&self, name: &str, default: usize) -> usize {
        self.0
            .get(name)
            .and_then(ParamValue::as_f64)
            .map(|x| x.max(0.0).round() as usize)
            .unwrap_or(default)
    }

    pub fn bool_or(&self, name: &str, default: bool) -> bool {
        match self.0.get(name) {
            Some(ParamValue::Bool(b)) => *b,
            _ => default,
        }
    }

    pub fn str_or<'a>(&'a self, name: &str, default: &'a str) -> &'a str {
        match self.0.get(name) {
            Some(ParamValue::Str(s)) => s,
            _ => default,
        }
    }

    /// `self` with entries of `other` layered on top.
    pub fn merged(&self, other: &Assignment) -> Assignment {
        let mut m = self.0.clone();
        m.extend(other.0.iter().map(|(k, v)| (k.clone(), v.clone())));
        Assignment(m)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use proptest::prelude::*;

    #[test]
    fn midpoints() {
        assert_eq!(Domain::Continuous { lo: 0.0, hi: 10.0 }.midpoint(), ParamValue::Float(5.0));
        match (Domain::LogContinuous { lo: 1e-3, hi: 1e1 }).midpoint() {
            ParamValue::Float(x) => assert!((x - 0.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(Domain::LogInteger { lo: 1, hi: 2400 }.midpoint(), ParamValue::Int(49));
        assert_eq!(Domain::Boolean.midpoint(), ParamValue::Bool(false));
        let cat = Domain::Categorical { options: vec!["a".into(), "b".into()] };
        assert_eq!(cat.midpoint(), ParamValue::Str("a".into()));
    }

    #[test]
    fn invalid_domains() {
        assert!(Domain::Continuous { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(Domain::LogContinuous { lo: 0.0, hi: 1.0 }.validate().is_err());
        assert!(Domain::Categorical { options: vec![] }.validate().is_err());
    }

    #[test]
    fn assignment_json_round_trip() {
        let a = Assignment::new()
            .set("n", ParamValue::Int(3))
            .set("lr", ParamValue::Float(0.5))
            .set("kind", ParamValue::Str("rbf".into()))
            .set("oob", ParamValue::Bool(true));
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<Assignment>(&s).unwrap(), a);
    }

    fn arb_domain() -> impl Strategy<Value = Domain> {
        prop_oneof![
            (-100.0f64..100.0, 0.001f64..50.0).prop_map(|(lo, w)| Domain::Continuous { lo, hi: lo + w }),
            (1e-6f64..10.0, 1.01f64..1e4).prop_map(|(lo, m)| Domain::LogContinuous { lo, hi: lo * m }),
            (-50i64..50, 1i64..100).prop_map(|(lo, w)| Domain::Integer { lo, hi: lo + w }),
            (1i64..50, 1i64..3000).prop_map(|(lo, w)| Domain::LogInteger { lo, hi: lo + w }),
            (1usize..6).prop_map(|k| Domain::Categorical { options: (0..k).map(|i| format!("o{i}")).collect() }),
            Just(Domain::Boolean),
        ]
    }

    proptest! {
        #[test]
        fn samples_and_unit_round_trips_stay_in_domain(d in arb_domain(), seed in 0u64..1000, u in 0.0f64..=1.0) {
            let mut r = rng(seed);
            prop_assert!(d.contains(&d.sample(&mut r)));
            prop_assert!(d.contains(&d.midpoint()));
            if let Some(v) = d.from_unit(u) {
                prop_assert!(d.contains(&v));
            }
        }
    }
}
