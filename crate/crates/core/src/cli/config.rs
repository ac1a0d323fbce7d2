//! Flat dotted-key configuration. Sources are layered as file, then flags, then
//! per-experiment defaults for anything still unset.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::drift::{DriftSpec, Exponent};
use crate::dyadic::DyadicTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    UInt,
    Float,
    Text,
    Flag,
    FloatList,
    /// A number or `"inf"`.
    Exp,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::UInt => "non-negative integer",
            Kind::Float => "number",
            Kind::Text => "string",
            Kind::Flag => "boolean",
            Kind::FloatList => "list of numbers",
            Kind::Exp => "exponent (number or \"inf\")",
        }
    }
}

/// Every accepted key with its type.
pub const KEYS: &[(&str, Kind)] = &[
    ("experiment", Kind::Text),
    ("horizon", Kind::Float),
    ("seeds.count", Kind::UInt),
    ("seeds.base", Kind::UInt),
    ("output.dir", Kind::Text),
    ("check", Kind::Flag),
    ("drift.id", Kind::Text),
    ("drift.dim", Kind::UInt),
    ("drift.truncation", Kind::Float),
    ("drift.q1", Kind::Exp),
    ("drift.q2", Kind::Exp),
    ("exponents.a", Kind::Float),
    ("exponents.alpha", Kind::FloatList),
    ("exponents.eta", Kind::Float),
    ("exponents.delta", Kind::Float),
    ("levels.m", Kind::UInt),
    ("levels.n", Kind::UInt),
    ("levels.n_min", Kind::UInt),
    ("levels.n_max", Kind::UInt),
    ("levels.k_min", Kind::UInt),
    ("levels.k_max", Kind::UInt),
    ("levels.offset", Kind::UInt),
    ("levels.reference", Kind::UInt),
    ("start.x", Kind::FloatList),
    ("kolmogorov.oracle", Kind::Text),
    ("kolmogorov.half_width", Kind::Float),
    ("defect.mode", Kind::Text),
    ("defect.t", Kind::Float),
    ("oscillation.r", Kind::Float),
    ("oscillation.l_min", Kind::UInt),
    ("oscillation.l_max", Kind::UInt),
    ("oscillation.pairs", Kind::UInt),
    ("oscillation.extra", Kind::UInt),
    ("oscillation.bound", Kind::Float),
    ("gap.m_min", Kind::UInt),
    ("gap.m_max", Kind::UInt),
    ("gap.m_fine", Kind::UInt),
    ("flow.half_width", Kind::UInt),
    ("flow.eta", Kind::Float),
    ("moments.sep_min", Kind::UInt),
    ("moments.sep_max", Kind::UInt),
];

/// Keys that do not change results and stay out of the hash.
const UNHASHED: &[&str] = &["output.dir", "check"];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, t)| *t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    GenPath,
    RunFlow,
    VerifyKolmogorov,
    VerifyMoments,
    VerifyDefect,
    VerifyOscillation,
    VerifyUniqueness,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::GenPath,
        Experiment::RunFlow,
        Experiment::VerifyKolmogorov,
        Experiment::VerifyMoments,
        Experiment::VerifyDefect,
        Experiment::VerifyOscillation,
        Experiment::VerifyUniqueness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GenPath => "gen-path",
            Experiment::RunFlow => "run-flow",
            Experiment::VerifyKolmogorov => "verify-kolmogorov",
            Experiment::VerifyMoments => "verify-moments",
            Experiment::VerifyDefect => "verify-defect",
            Experiment::VerifyOscillation => "verify-oscillation",
            Experiment::VerifyUniqueness => "verify-uniqueness",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

fn bad(key: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_owned(),
        message: msg.into(),
    }
}

/// Normalizes `value` to the canonical JSON form of `key`'s type.
fn coerce(key: &str, value: Value) -> Result<Value, CliError> {
    let kind = kind_of(key).ok_or_else(|| bad(key, "unknown configuration key"))?;
    let wrong = || bad(key, format!("expected {}, got {value}", kind.describe()));
    let out = match kind {
        Kind::UInt => match &value {
            Value::Number(n) if n.as_u64().is_some() => value.clone(),
            Value::Number(n) => match n.as_f64() {
                Some(f) if f >= 0.0 && f.fract() == 0.0 && f < 2f64.powi(53) => json!(f as u64),
                _ => return Err(wrong()),
            },
            _ => return Err(wrong()),
        },
        Kind::Float => match value.as_f64() {
            Some(f) if f.is_finite() => json!(f),
            _ => return Err(wrong()),
        },
        Kind::Text => match &value {
            Value::String(_) => value.clone(),
            _ => return Err(wrong()),
        },
        Kind::Flag => match &value {
            Value::Bool(_) => value.clone(),
            _ => return Err(wrong()),
        },
        Kind::FloatList => match &value {
            Value::Number(n) => json!([n.as_f64().ok_or_else(wrong)?]),
            Value::Array(items) => {
                let v: Option<Vec<f64>> = items.iter().map(Value::as_f64).collect();
                json!(v.filter(|v| !v.is_empty() && v.iter().all(|x| x.is_finite())).ok_or_else(wrong)?)
            }
            _ => return Err(wrong()),
        },
        Kind::Exp => {
            let parsed = match &value {
                Value::Number(n) => n.as_f64().map(Exponent::new),
                Value::String(s) => Some(s.parse::<Exponent>()),
                _ => None,
            };
            match parsed {
                Some(Ok(Exponent::Infinite)) => json!("inf"),
                Some(Ok(Exponent::Finite(q))) => json!(q),
                _ => return Err(wrong()),
            }
        }
    };
    Ok(out)
}

/// Parses a flag or `--set` value into JSON according to the key's type.
pub fn parse_flag(key: &str, raw: &str) -> Result<Value, CliError> {
    let kind = kind_of(key).ok_or_else(|| bad(key, "unknown configuration key"))?;
    let value = match kind {
        Kind::Text => Value::String(raw.to_owned()),
        Kind::Exp => Value::String(raw.to_owned()),
        Kind::FloatList if !raw.trim_start().starts_with('[') => {
            let v: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
            json!(v.map_err(|_| bad(key, format!("expected a comma-separated list of numbers, got {raw:?}")))?)
        }
        _ => serde_json::from_str(raw).map_err(|_| bad(key, format!("cannot parse {raw:?} as {}", kind.describe())))?,
    };
    coerce(key, value)
}

/// Unresolved key/value layer.
#[derive(Clone, Debug, Default)]
pub struct Layer {
    values: BTreeMap<String, Value>,
}

impl Layer {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| bad("config", format!("invalid JSON: {e}")))?;
        let Value::Object(map) = doc else {
            return Err(bad("config", "top level must be an object of dotted keys"));
        };
        let mut layer = Layer::default();
        for (k, v) in map {
            layer.set(&k, v)?;
        }
        Ok(layer)
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<(), CliError> {
        let v = coerce(key, value)?;
        self.values.insert(key.to_owned(), v);
        Ok(())
    }

    pub fn set_raw(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let v = parse_flag(key, raw)?;
        self.values.insert(key.to_owned(), v);
        Ok(())
    }

    /// Later layers win.
    pub fn merge(mut self, over: Layer) -> Layer {
        self.values.extend(over.values);
        self
    }

    pub fn resolve(self) -> Result<Config, CliError> {
        let exp: Experiment = match self.values.get("experiment") {
            Some(Value::String(s)) => s.parse().map_err(|e: String| bad("experiment", e))?,
            _ => return Err(bad("experiment", "no experiment given")),
        };
        let mut values = self.values;
        for (k, v) in defaults(exp, &values) {
            values.entry(k.to_owned()).or_insert(v);
        }
        // depends on the resolved k_max
        if exp == Experiment::VerifyDefect && !values.contains_key("levels.reference") {
            let k_max = values.get("levels.k_max").and_then(Value::as_u64).unwrap_or(0);
            values.insert("levels.reference".into(), json!(k_max + 12));
        }
        Ok(Config { experiment: exp, values })
    }
}

fn defaults(exp: Experiment, set: &BTreeMap<String, Value>) -> Vec<(&'static str, Value)> {
    let mut d: Vec<(&'static str, Value)> = vec![
        ("horizon", json!(1.0)),
        ("seeds.base", json!(0)),
        ("drift.dim", json!(1)),
        ("output.dir", json!("out")),
        ("check", json!(false)),
    ];
    let text = |k: &str| set.get(k).and_then(Value::as_str).map(str::to_owned);
    match exp {
        Experiment::GenPath => {
            d.extend([("seeds.count", json!(10)), ("levels.m", json!(12))]);
        }
        Experiment::RunFlow => {
            d.extend([
                ("drift.id", json!("sign")),
                ("seeds.count", json!(4)),
                ("levels.m", json!(10)),
                ("levels.n", json!(4)),
                ("flow.half_width", json!(16)),
                ("flow.eta", json!(1.0)),
            ]);
        }
        Experiment::VerifyKolmogorov => {
            if text("kolmogorov.oracle").as_deref() == Some("flow") {
                d.extend([
                    ("drift.id", json!("sign")),
                    ("seeds.count", json!(100)),
                    ("levels.n_min", json!(4)),
                    ("levels.n_max", json!(8)),
                    ("levels.m", json!(10)),
                    ("exponents.alpha", json!([0.8])),
                    ("exponents.a", json!(20.0)),
                    ("kolmogorov.half_width", json!(0.25)),
                ]);
            } else {
                d.extend([
                    ("kolmogorov.oracle", json!("brownian")),
                    ("seeds.count", json!(200)),
                    ("levels.n_min", json!(4)),
                    ("levels.n_max", json!(10)),
                    ("exponents.a", json!(8.0)),
                    ("exponents.alpha", json!([0.3, 0.5])),
                    ("exponents.eta", json!(1.0)),
                ]);
            }
        }
        Experiment::VerifyMoments => {
            d.extend([
                ("drift.id", json!("sign")),
                ("seeds.count", json!(1000)),
                ("exponents.a", json!(4.0)),
                ("start.x", json!([0.0])),
                ("moments.sep_min", json!(2)),
                ("moments.sep_max", json!(8)),
                ("levels.n", json!(2)),
                ("levels.m", json!(10)),
            ]);
        }
        Experiment::VerifyDefect => {
            let mode = text("defect.mode").unwrap_or_else(|| "one-step".into());
            d.push(("defect.mode", json!("one-step")));
            d.push(("levels.offset", json!(6)));
            if mode == "borel" {
                d.extend([("drift.id", json!("sign")), ("start.x", json!([0.0]))]);
            } else {
                d.extend([
                    ("drift.id", json!("holder:0.5,0.1,1")),
                    ("drift.truncation", json!(4.0)),
                    ("drift.q1", json!(6.0)),
                    ("drift.q2", json!(3.0)),
                    ("start.x", json!([0.5])),
                ]);
            }
            if mode == "one-step" {
                d.extend([
                    ("seeds.count", json!(200)),
                    ("levels.k_min", json!(4)),
                    ("levels.k_max", json!(10)),
                ]);
            } else {
                d.extend([
                    ("seeds.count", json!(100)),
                    ("levels.k_min", json!(5)),
                    ("levels.k_max", json!(9)),
                    ("defect.t", json!(0.5)),
                ]);
            }
        }
        Experiment::VerifyOscillation => {
            d.extend([
                ("drift.id", json!("sign")),
                ("seeds.count", json!(1000)),
                ("oscillation.r", json!(0.5)),
                ("oscillation.l_min", json!(4)),
                ("oscillation.l_max", json!(10)),
                ("oscillation.pairs", json!(100)),
                ("oscillation.extra", json!(10)),
                ("oscillation.bound", json!(8.0)),
            ]);
        }
        Experiment::VerifyUniqueness => {
            d.extend([
                ("drift.id", json!("sign")),
                ("seeds.count", json!(200)),
                ("start.x", json!([0.0])),
                ("gap.m_min", json!(6)),
                ("gap.m_max", json!(12)),
                ("gap.m_fine", json!(16)),
            ]);
        }
    }
    d
}

/// Fully resolved configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub experiment: Experiment,
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    /// The keys that determine results, as canonical JSON.
    pub fn hashed(&self) -> BTreeMap<&str, &Value> {
        self.values
            .iter()
            .filter(|(k, _)| !UNHASHED.contains(&k.as_str()))
            .map(|(k, v)| (k.as_str(), v))
            .collect()
    }

    /// Hex SHA-256 of the canonical hashed keys, truncated to 16 digits.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.hashed()).expect("json map");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn get(&self, key: &str) -> Result<&Value, CliError> {
        self.values
            .get(key)
            .ok_or_else(|| bad(key, format!("required by experiment {}", self.experiment)))
    }

    pub fn uint(&self, key: &str) -> Result<u64, CliError> {
        self.get(key)?.as_u64().ok_or_else(|| bad(key, "expected an integer"))
    }

    pub fn level(&self, key: &str) -> Result<u32, CliError> {
        let v = self.uint(key)?;
        u32::try_from(v)
            .ok()
            .filter(|v| *v <= 62)
            .ok_or_else(|| bad(key, format!("level {v} out of range")))
    }

    pub fn count(&self, key: &str) -> Result<usize, CliError> {
        Ok(self.uint(key)? as usize)
    }

    pub fn float(&self, key: &str) -> Result<f64, CliError> {
        self.get(key)?.as_f64().ok_or_else(|| bad(key, "expected a number"))
    }

    pub fn opt_float(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_f64)
    }

    pub fn text(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)?.as_str().ok_or_else(|| bad(key, "expected a string"))
    }

    pub fn flag(&self, key: &str) -> bool {
        self.values.get(key).and_then(Value::as_bool).unwrap_or(false)
    }

    pub fn floats(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.get(key)?.as_array().ok_or_else(|| bad(key, "expected a list"))?;
        Ok(v.iter().filter_map(Value::as_f64).collect())
    }

    pub fn exponent(&self, key: &str) -> Result<Exponent, CliError> {
        match self.values.get(key) {
            None => Ok(Exponent::Infinite),
            Some(Value::String(s)) => s.parse().map_err(|e| bad(key, format!("{e}"))),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| bad(key, "expected an exponent"))
                .and_then(|q| Exponent::new(q).map_err(|e| bad(key, format!("{e}")))),
        }
    }

    pub fn dyadic(&self, key: &str) -> Result<DyadicTime, CliError> {
        let v = self.float(key)?;
        DyadicTime::from_f64(v).map_err(|e| bad(key, format!("{e}")))
    }

    pub fn seeds(&self) -> Result<Vec<u64>, CliError> {
        let n = self.count("seeds.count")?;
        if n == 0 {
            return Err(bad("seeds.count", "at least one seed is required"));
        }
        Ok(crate::experiments::seed_list(self.uint("seeds.base")?, n))
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        match self.count("drift.dim")? {
            0 => Err(bad("drift.dim", "dimension must be at least 1")),
            d => Ok(d),
        }
    }

    /// Start point, a single value being repeated in every coordinate.
    pub fn point(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let d = self.dim()?;
        match self.floats(key)?.as_slice() {
            [v] => Ok(vec![*v; d]),
            v if v.len() == d => Ok(v.to_vec()),
            v => Err(bad(key, format!("has {} coordinates, dimension is {d}", v.len()))),
        }
    }

    /// Parsed drift; exponent hypotheses are checked separately.
    pub fn drift(&self) -> Result<DriftSpec, CliError> {
        let id = self.text("drift.id")?;
        DriftSpec::parse(
            id,
            self.dim()?,
            self.opt_float("drift.truncation"),
            self.exponent("drift.q1")?,
            self.exponent("drift.q2")?,
        )
        .map_err(|e| match e {
            crate::Error::HypothesisViolation { .. } => CliError::Run(e),
            other => bad("drift.id", other.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        let mut l = Layer::default();
        for (k, v) in pairs {
            l.set_raw(k, v).unwrap();
        }
        l
    }

    #[test]
    fn coercion_and_errors() {
        assert_eq!(parse_flag("seeds.count", "5").unwrap(), json!(5));
        assert_eq!(parse_flag("exponents.alpha", "0.3,0.5").unwrap(), json!([0.3, 0.5]));
        assert_eq!(parse_flag("drift.q1", "inf").unwrap(), json!("inf"));
        assert_eq!(parse_flag("drift.q1", "6").unwrap(), json!(6.0));
        assert_eq!(coerce("seeds.count", json!(3.0)).unwrap(), json!(3));
        let e = parse_flag("seeds.count", "-1").unwrap_err();
        assert!(e.to_string().contains("seeds.count"));
        let e = Layer::from_json(r#"{"levels.bogus": 1}"#).unwrap_err();
        assert!(e.to_string().contains("levels.bogus"));
        let e = Layer::from_json(r#"{"horizon": "one"}"#).unwrap_err();
        assert!(e.to_string().contains("horizon"));
        assert!(Layer::default().resolve().is_err());
    }

    #[test]
    fn defaults_and_hash() {
        let a = layer(&[("experiment", "verify-defect"), ("defect.mode", "holder")]).resolve().unwrap();
        assert_eq!(a.uint("levels.k_max").unwrap(), 9);
        assert_eq!(a.uint("levels.reference").unwrap(), 21);
        assert_eq!(a.text("drift.id").unwrap(), "holder:0.5,0.1,1");
        let b = layer(&[("experiment", "verify-defect"), ("defect.mode", "holder"), ("output.dir", "/tmp/x")])
            .resolve()
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = layer(&[("experiment", "verify-defect"), ("defect.mode", "holder"), ("seeds.base", "1")])
            .resolve()
            .unwrap();
        assert_ne!(a.hash(), c.hash());
        // flags override the file layer
        let file = Layer::from_json(r#"{"experiment": "gen-path", "seeds.count": 3}"#).unwrap();
        let cfg = file.merge(layer(&[("seeds.count", "7")])).resolve().unwrap();
        assert_eq!(cfg.seeds().unwrap().len(), 7);
    }

    #[test]
    fn point_broadcast() {
        let cfg = layer(&[("experiment", "verify-moments"), ("drift.dim", "2")]).resolve().unwrap();
        assert_eq!(cfg.point("start.x").unwrap(), vec![0.0, 0.0]);
    }
}
