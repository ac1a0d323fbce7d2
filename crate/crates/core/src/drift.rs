//! Drift families `b(t, x)` and the exponent bookkeeping that decides whether a
//! Hölder drift is admissible.
//!
//! Every family is truncated to the ball `{|x| < N}` when a radius is set. The
//! Hölder family uses a tent profile in `|x|` so that truncation does not break
//! the Hölder bound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An integrability exponent in `[1, ∞]`, with infinity tagged explicitly so that
/// conjugates are exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn new(v: f64) -> Result<Self> {
        if v == f64::INFINITY {
            Ok(Exponent::Infinite)
        } else if v.is_finite() && v >= 1.0 {
            Ok(Exponent::Finite(v))
        } else {
            Err(Error::invalid(format!("exponent {v} must lie in [1, inf]")))
        }
    }

    /// Conjugate exponent `p` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> Self {
        match self {
            Exponent::Infinite => Exponent::Finite(1.0),
            Exponent::Finite(q) if q == 1.0 => Exponent::Infinite,
            Exponent::Finite(q) => Exponent::Finite(q / (q - 1.0)),
        }
    }

    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Infinite => 0.0,
            Exponent::Finite(q) => 1.0 / q,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Infinite => f64::INFINITY,
            Exponent::Finite(q) => q,
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" | "∞" => Ok(Exponent::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("cannot parse exponent {s:?}")))
                .and_then(Exponent::new),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Infinite => f.write_str("inf"),
            Exponent::Finite(q) => write!(f, "{q}"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Infinite => s.serialize_str("inf"),
            Exponent::Finite(q) => s.serialize_f64(*q),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Exponent::new(v),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum EnvelopeForm {
    Constant { value: f64 },
    /// `scale * t^(-rho)`
    Power { scale: f64, rho: f64 },
}

/// A time envelope `M(t)` together with the exponent `q` for which `M ∈ L^q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeEnvelope {
    pub form: EnvelopeForm,
    pub integrability: Exponent,
}

impl TimeEnvelope {
    pub fn constant(value: f64) -> Self {
        TimeEnvelope {
            form: EnvelopeForm::Constant { value },
            integrability: Exponent::Infinite,
        }
    }

    pub fn power(scale: f64, rho: f64, q: Exponent) -> Self {
        TimeEnvelope {
            form: EnvelopeForm::Power { scale, rho },
            integrability: q,
        }
    }

    pub fn check(&self) -> Result<()> {
        match self.form {
            EnvelopeForm::Constant { value } if value >= 0.0 && value.is_finite() => Ok(()),
            EnvelopeForm::Constant { value } => {
                Err(Error::invalid(format!("envelope constant {value} must be finite and >= 0")))
            }
            EnvelopeForm::Power { scale, rho } => {
                if !(scale >= 0.0 && scale.is_finite() && rho >= 0.0 && rho < 1.0) {
                    return Err(Error::invalid(format!(
                        "power envelope needs scale >= 0 and rho in [0, 1), got ({scale}, {rho})"
                    )));
                }
                let ok = match self.integrability {
                    Exponent::Infinite => rho == 0.0,
                    Exponent::Finite(q) => rho * q < 1.0,
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::HypothesisViolation {
                        inequality: "rho * q < 1",
                        detail: format!(
                            "envelope t^(-{rho}) is not in L^{}",
                            self.integrability
                        ),
                    })
                }
            }
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self.form, EnvelopeForm::Power { rho, scale } if rho > 0.0 && scale > 0.0)
    }

    /// `M(t)`; infinite at `t = 0` for singular power envelopes.
    pub fn value(&self, t: f64) -> f64 {
        match self.form {
            EnvelopeForm::Constant { value } => value,
            EnvelopeForm::Power { scale, rho } if rho == 0.0 => scale,
            EnvelopeForm::Power { scale, rho } => scale * t.powf(-rho),
        }
    }

    /// `∫_a^b M(t) dt` in closed form.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self.form {
            EnvelopeForm::Constant { value } => value * (b - a),
            EnvelopeForm::Power { scale, rho } => {
                let e = 1.0 - rho;
                scale * (b.powf(e) - a.powf(e)) / e
            }
        }
    }

    /// `‖M‖_{L^q[0, T]}` for the declared `q`.
    pub fn lq_norm(&self, horizon: f64) -> f64 {
        match (self.form, self.integrability) {
            (EnvelopeForm::Constant { value }, Exponent::Infinite) => value,
            (EnvelopeForm::Constant { value }, Exponent::Finite(q)) => value * horizon.powf(1.0 / q),
            (EnvelopeForm::Power { scale, rho }, Exponent::Infinite) => {
                if rho == 0.0 {
                    scale
                } else {
                    f64::INFINITY
                }
            }
            (EnvelopeForm::Power { scale, rho }, Exponent::Finite(q)) => {
                let e = 1.0 - rho * q;
                scale * (horizon.powf(e) / e).powf(1.0 / q)
            }
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        let form = match self.form {
            EnvelopeForm::Constant { value } => EnvelopeForm::Constant { value: value * factor },
            EnvelopeForm::Power { scale, rho } => EnvelopeForm::Power {
                scale: scale * factor,
                rho,
            },
        };
        TimeEnvelope { form, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    Constant { value: Vec<f64> },
    /// `b_i(x) = rate * clamp(x_i, -1, 1)`; Lipschitz constant `|rate|`.
    Lipschitz { rate: f64 },
    /// `b(t, x) = scale t^(-rho) g(|x|)^beta e` with the tent `g(r) = min(r, N - r)^+`
    /// and `e = (1, ..., 1)/sqrt(d)`.
    Holder { beta: f64, rho: f64, scale: f64 },
    /// `b_i(x) = -sign(x_i)`, with `sign(0) = 0`.
    Sign,
    /// Every coordinate equals `(-1)^(sum_i floor(x_i 2^j))`.
    Checkerboard { level: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftSpec {
    pub id: String,
    pub kind: DriftKind,
    pub dim: usize,
    pub truncation: Option<f64>,
    pub beta: Option<f64>,
    pub envelope1: TimeEnvelope,
    pub envelope2: TimeEnvelope,
}

/// Integrability exponents of a Hölder drift together with the derived `γ, α, δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentBundle {
    pub p1: Exponent,
    pub q1: Exponent,
    pub p2: Exponent,
    pub q2: Exponent,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl ExponentBundle {
    /// Checks `q₁ ≥ q₂ > 2`, `β > 0`, `β/p₁ + 1/p₂ > 1` and picks
    /// `α = (1 + δ)/(1 + γ)`, with `δ = γ/2` unless overridden.
    pub fn derive(beta: f64, q1: Exponent, q2: Exponent, delta: Option<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::HypothesisViolation {
                inequality: "β > 0",
                detail: format!("β = {beta} must lie in (0, 1]"),
            });
        }
        if q1.as_f64() < q2.as_f64() || q2.as_f64() <= 2.0 {
            return Err(Error::HypothesisViolation {
                inequality: "q₁ ≥ q₂ > 2",
                detail: format!("q₁ = {q1}, q₂ = {q2}"),
            });
        }
        let p1 = q1.conjugate();
        let p2 = q2.conjugate();
        let lhs = beta * p1.reciprocal() + p2.reciprocal();
        if lhs <= 1.0 {
            return Err(Error::HypothesisViolation {
                inequality: "β/p₁ + 1/p₂ > 1",
                detail: format!("β/p₁ + 1/p₂ = {lhs}"),
            });
        }
        let gamma = lhs - 1.0;
        let delta = delta.unwrap_or(gamma / 2.0);
        if !(delta > 0.0 && delta < gamma) {
            return Err(Error::invalid(format!(
                "δ = {delta} must lie in (0, γ) = (0, {gamma})"
            )));
        }
        Ok(ExponentBundle {
            p1,
            q1,
            p2,
            q2,
            beta,
            gamma,
            alpha: (1.0 + delta) / (1.0 + gamma),
            delta,
        })
    }
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl DriftSpec {
    fn base(id: String, kind: DriftKind, dim: usize, env1: TimeEnvelope) -> Self {
        DriftSpec {
            id,
            kind,
            dim,
            truncation: None,
            beta: None,
            envelope1: env1,
            envelope2: TimeEnvelope::constant(0.0),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::base("zero".into(), DriftKind::Zero, dim, TimeEnvelope::constant(0.0))
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let norm = euclid(&value);
        let dim = value.len();
        Self::base("constant".into(), DriftKind::Constant { value }, dim, TimeEnvelope::constant(norm))
    }

    pub fn lipschitz(dim: usize, rate: f64) -> Self {
        let mut s = Self::base(
            format!("lipschitz:{rate}"),
            DriftKind::Lipschitz { rate },
            dim,
            TimeEnvelope::constant(rate.abs() * (dim as f64).sqrt()),
        );
        s.beta = Some(1.0);
        s.envelope2 = TimeEnvelope::constant(rate.abs());
        s
    }

    /// Hölder family; `q1`, `q2` are the declared integrability exponents of the
    /// two envelopes.
    pub fn holder(
        dim: usize,
        beta: f64,
        rho: f64,
        scale: f64,
        truncation: f64,
        q1: Exponent,
        q2: Exponent,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid(format!("β = {beta} must lie in (0, 1]")));
        }
        if !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::invalid("the Hölder family needs a finite truncation radius"));
        }
        let env2 = TimeEnvelope::power(scale, rho, q2);
        let env1 = TimeEnvelope {
            integrability: q1,
            ..env2.scaled((truncation / 2.0).powf(beta))
        };
        let spec = DriftSpec {
            id: format!("holder:{beta},{rho},{scale}"),
            kind: DriftKind::Holder { beta, rho, scale },
            dim,
            truncation: Some(truncation),
            beta: Some(beta),
            envelope1: env1,
            envelope2: env2,
        };
        spec.envelope1.check()?;
        spec.envelope2.check()?;
        Ok(spec)
    }

    pub fn sign(dim: usize, truncation: Option<f64>) -> Self {
        let mut s = Self::base("sign".into(), DriftKind::Sign, dim, TimeEnvelope::constant((dim as f64).sqrt()));
        s.truncation = truncation;
        s
    }

    pub fn checkerboard(dim: usize, level: u32, truncation: Option<f64>) -> Self {
        let mut s = Self::base(
            format!("checkerboard:{level}"),
            DriftKind::Checkerboard { level },
            dim,
            TimeEnvelope::constant((dim as f64).sqrt()),
        );
        s.truncation = truncation;
        s
    }

    pub fn with_truncation(mut self, radius: Option<f64>) -> Result<Self> {
        if let Some(r) = radius {
            if !(r > 0.0) {
                return Err(Error::invalid(format!("truncation radius {r} must be positive")));
            }
        }
        if matches!(self.kind, DriftKind::Holder { .. }) && radius.is_none() {
            return Err(Error::invalid("the Hölder family needs a finite truncation radius"));
        }
        self.truncation = radius;
        Ok(self)
    }

    /// Parses a family identifier: `zero`, `constant:c1,..`, `lipschitz:L`, `sign`,
    /// `checkerboard:j`, `holder:beta,rho,c`.
    pub fn parse(id: &str, dim: usize, truncation: Option<f64>, q1: Exponent, q2: Exponent) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let (name, params) = match id.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p)),
            None => (id.trim(), None),
        };
        let nums = |p: Option<&str>| -> Result<Vec<f64>> {
            p.map(|s| {
                s.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::invalid(format!("bad drift parameter {v:?} in {id:?}")))
                    })
                    .collect()
            })
            .unwrap_or(Ok(Vec::new()))
        };
        let spec = match name {
            "zero" => Self::zero(dim),
            "constant" => {
                let mut c = nums(params)?;
                if c.is_empty() {
                    return Err(Error::invalid("constant drift needs a value, e.g. constant:0.5"));
                }
                if c.len() == 1 && dim > 1 {
                    c = vec![c[0]; dim];
                }
                if c.len() != dim {
                    return Err(Error::invalid(format!("constant drift has {} components, dimension is {dim}", c.len())));
                }
                Self::constant(c)
            }
            "lipschitz" => match nums(params)?.as_slice() {
                [l] => Self::lipschitz(dim, *l),
                _ => return Err(Error::invalid("lipschitz drift needs one rate, e.g. lipschitz:1")),
            },
            "sign" => Self::sign(dim, None),
            "checkerboard" => {
                let j = params
                    .unwrap_or("0")
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::invalid(format!("bad checkerboard level in {id:?}")))?;
                Self::checkerboard(dim, j, None)
            }
            "holder" => match nums(params)?.as_slice() {
                [beta, rho, c] => {
                    let n = truncation.ok_or_else(|| Error::invalid("holder drift needs a truncation radius"))?;
                    return Self::holder(dim, *beta, *rho, *c, n, q1, q2);
                }
                _ => return Err(Error::invalid("holder drift needs beta,rho,c, e.g. holder:0.5,0.15,1")),
            },
            other => return Err(Error::invalid(format!("unknown drift family {other:?}"))),
        };
        spec.with_truncation(truncation)
    }

    /// Exponent bundle of a Hölder drift. Lipschitz drifts count as
    /// `β = 1` with time-constant envelopes.
    pub fn validate(&self) -> Result<ExponentBundle> {
        self.validate_with(None)
    }

    pub fn validate_with(&self, delta: Option<f64>) -> Result<ExponentBundle> {
        let beta = match self.kind {
            DriftKind::Holder { beta, .. } => beta,
            DriftKind::Lipschitz { .. } => 1.0,
            _ => {
                return Err(Error::invalid(format!(
                    "drift {:?} carries no Hölder exponent to validate",
                    self.id
                )))
            }
        };
        self.envelope1.check()?;
        self.envelope2.check()?;
        ExponentBundle::derive(beta, self.envelope1.integrability, self.envelope2.integrability, delta)
    }

    /// `b(t, x)` written into `out`. `t` is absolute time in `[0, T]`.
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        if let Some(n) = self.truncation {
            if euclid(x) >= n {
                out.fill(0.0);
                return;
            }
        }
        match &self.kind {
            DriftKind::Zero => out.fill(0.0),
            DriftKind::Constant { value } => out.copy_from_slice(value),
            DriftKind::Lipschitz { rate } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = rate * xi.clamp(-1.0, 1.0);
                }
            }
            DriftKind::Holder { .. } => {
                let p = self.holder_profile(x);
                if p == 0.0 {
                    out.fill(0.0);
                } else {
                    out.fill(p * self.envelope2.value(t));
                }
            }
            DriftKind::Sign => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = if *xi > 0.0 {
                        -1.0
                    } else if *xi < 0.0 {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
            DriftKind::Checkerboard { level } => {
                let scale = (*level as f64).exp2();
                let parity = x.iter().map(|xi| (xi * scale).floor() as i64).sum::<i64>().rem_euclid(2);
                out.fill(if parity == 0 { 1.0 } else { -1.0 });
            }
        }
    }

    /// Spatial factor of the Hölder family, already divided by `sqrt(d)`.
    fn holder_profile(&self, x: &[f64]) -> f64 {
        let DriftKind::Holder { beta, .. } = self.kind else {
            return 0.0;
        };
        let n = self.truncation.unwrap_or(f64::INFINITY);
        let r = euclid(x);
        let g = r.min(n - r).max(0.0);
        if g == 0.0 {
            0.0
        } else {
            g.powf(beta) / (self.dim as f64).sqrt()
        }
    }

    /// Drift contribution `b(t, x) dt` over the cell `[t, t + dt]`.
    ///
    /// The space variable is frozen at the left endpoint. A singular time
    /// envelope is integrated exactly over every cell, so the cell holding the
    /// singularity stays finite and the remaining cells carry no time error.
    #[inline]
    pub fn increment(&self, t: f64, dt: f64, x: &[f64], out: &mut [f64]) {
        if self.envelope2.is_singular() {
            if let DriftKind::Holder { .. } = self.kind {
                let inside = self.truncation.map_or(true, |n| euclid(x) < n);
                let p = if inside { self.holder_profile(x) } else { 0.0 };
                out.fill(p * self.envelope2.integral(t, t + dt));
                return;
            }
        }
        self.eval(t, x, out);
        for o in out.iter_mut() {
            *o *= dt;
        }
    }

    /// Bound `M₁(t)` on `|b(t, ·)|`.
    pub fn bound(&self, t: f64) -> f64 {
        self.envelope1.value(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn inf() -> Exponent {
        Exponent::Infinite
    }

    #[test]
    fn lipschitz_time_constant_bundle() {
        let b = ExponentBundle::derive(1.0, inf(), inf(), None).unwrap();
        assert_eq!(b.p1, Exponent::Finite(1.0));
        assert_eq!(b.gamma, 1.0);
        assert_eq!(b.delta, 0.5);
        assert_eq!(b.alpha, 0.75);
        assert_eq!(DriftSpec::lipschitz(1, 2.0).validate().unwrap(), b);
    }

    #[test]
    fn holder_bundle_arithmetic() {
        let b = ExponentBundle::derive(0.5, Exponent::Finite(6.0), Exponent::Finite(3.0), None).unwrap();
        // oracle: 0.5/1.2 + 1/1.5 - 1
        let gamma = 0.5 / 1.2 + 1.0 / 1.5 - 1.0;
        assert!((b.gamma - gamma).abs() < 1e-15);
        assert!((b.gamma - 1.0 / 12.0).abs() < 1e-15);
        let lhs = b.alpha * b.beta * b.p1.reciprocal() + b.alpha * b.p2.reciprocal();
        assert!((lhs - (1.0 + b.delta)).abs() < 1e-14);
        assert!(b.alpha > 0.0 && b.alpha < 1.0);
    }

    #[test]
    fn hypothesis_violations() {
        let e = ExponentBundle::derive(0.2, Exponent::Finite(3.0), Exponent::Finite(3.0), None).unwrap_err();
        assert!(e.to_string().contains("β/p₁ + 1/p₂ > 1"), "{e}");
        let e = ExponentBundle::derive(0.5, Exponent::Finite(3.0), Exponent::Finite(6.0), None).unwrap_err();
        assert!(e.to_string().contains("q₁ ≥ q₂ > 2"), "{e}");
        let e = ExponentBundle::derive(0.5, Exponent::Finite(6.0), Exponent::Finite(2.0), None).unwrap_err();
        assert!(e.to_string().contains("q₁ ≥ q₂ > 2"), "{e}");
    }

    #[test]
    fn infinity_encodings_agree() {
        let forms = ["inf", "Infinity", "∞"];
        let reference = ExponentBundle::derive(1.0, inf(), inf(), None).unwrap();
        for f in forms {
            let q: Exponent = f.parse().unwrap();
            assert_eq!(ExponentBundle::derive(1.0, q, q, None).unwrap(), reference);
        }
        let q = Exponent::new(f64::INFINITY).unwrap();
        assert_eq!(ExponentBundle::derive(1.0, q, q, None).unwrap(), reference);
        let json: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(json, Exponent::Infinite);
    }

    #[test]
    fn sign_drift_values() {
        let b = DriftSpec::sign(1, Some(10.0));
        let mut out = [0.0];
        b.eval(0.3, &[-0.5], &mut out);
        assert_eq!(out[0], 1.0);
        b.eval(0.3, &[0.5], &mut out);
        assert_eq!(out[0], -1.0);
        b.eval(0.3, &[11.0], &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn checkerboard_values() {
        let b = DriftSpec::checkerboard(1, 2, Some(4.0));
        let mut out = [0.0];
        b.eval(0.0, &[0.1], &mut out);
        assert_eq!(out[0], 1.0);
        b.eval(0.0, &[0.3], &mut out);
        assert_eq!(out[0], -1.0);
        b.eval(0.0, &[-0.1], &mut out);
        assert_eq!(out[0], -1.0);
    }

    #[test]
    fn zero_and_constant() {
        let mut out = [9.0, 9.0];
        DriftSpec::zero(2).eval(0.5, &[1.0, 2.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
        DriftSpec::constant(vec![0.5, -1.0]).eval(0.5, &[1.0, 2.0], &mut out);
        assert_eq!(out, [0.5, -1.0]);
    }

    #[test]
    fn parse_ids() {
        let q = Exponent::Finite(6.0);
        let h = DriftSpec::parse("holder:0.5,0.15,1", 1, Some(10.0), q, Exponent::Finite(3.0)).unwrap();
        assert!(matches!(h.kind, DriftKind::Holder { .. }));
        assert!((h.validate().unwrap().gamma - 1.0 / 12.0).abs() < 1e-15);
        assert!(DriftSpec::parse("checkerboard:3", 2, None, inf(), inf()).is_ok());
        assert!(DriftSpec::parse("constant:0.5", 3, None, inf(), inf()).is_ok());
        assert!(DriftSpec::parse("wiggle", 1, None, inf(), inf()).is_err());
        assert!(DriftSpec::parse("holder:0.5,0.15,1", 1, None, q, q).is_err());
        // rho = 0.2 is not in L^6
        let e = DriftSpec::parse("holder:0.5,0.2,1", 1, Some(10.0), q, Exponent::Finite(3.0)).unwrap_err();
        assert!(matches!(e, Error::HypothesisViolation { .. }));
    }

    #[test]
    fn holder_ratio_random_pairs() {
        let d = 2;
        let spec = DriftSpec::holder(d, 0.5, 0.15, 1.0, 10.0, Exponent::Finite(6.0), Exponent::Finite(3.0)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..10_000 {
            let t: f64 = rng.gen_range(1e-6..1.0);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-12.0..12.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-12.0..12.0)).collect();
            spec.eval(t, &x, &mut bx);
            spec.eval(t, &y, &mut by);
            let num = euclid(&bx.iter().zip(&by).map(|(a, b)| a - b).collect::<Vec<_>>());
            let sep: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            assert!(num <= spec.envelope2.value(t) * euclid(&sep).powf(0.5) + 1e-12);
            assert!(euclid(&bx) <= spec.bound(t) + 1e-12);
        }
    }

    #[test]
    fn singular_envelope_uses_cell_integral() {
        let spec = DriftSpec::holder(1, 1.0, 0.25, 1.0, 10.0, Exponent::Finite(3.0), Exponent::Finite(3.0)).unwrap();
        let mut out = [0.0];
        spec.increment(0.0, 0.0625, &[1.0], &mut out);
        // ∫_0^h t^{-1/4} dt = h^{3/4} / (3/4)
        assert!((out[0] - 0.0625f64.powf(0.75) / 0.75).abs() < 1e-15);
        spec.increment(0.0625, 0.0625, &[1.0], &mut out);
        let cell = (0.125f64.powf(0.75) - 0.0625f64.powf(0.75)) / 0.75;
        assert!((out[0] - cell).abs() < 1e-15);
        // between the endpoint values
        assert!(out[0] < 0.0625 * 0.0625f64.powf(-0.25) && out[0] > 0.0625 * 0.125f64.powf(-0.25));
    }

    #[test]
    fn envelope_norms() {
        let e = TimeEnvelope::power(2.0, 0.25, Exponent::Finite(2.0));
        // (∫_0^1 4 t^{-1/2} dt)^{1/2} = sqrt(8)
        assert!((e.lq_norm(1.0) - 8f64.sqrt()).abs() < 1e-14);
        assert_eq!(TimeEnvelope::constant(3.0).lq_norm(1.0), 3.0);
    }
}
