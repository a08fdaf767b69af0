//! Non-random elliptic cookie environments and their transience diagnostics.
//!
//! A cookie environment is the sequence `p_1, p_2, ...` where `p_k` is the
//! probability of a right step on the k-th departure from any site. Two
//! shapes are supported: finitely many cookies followed by fair (1/2)
//! cookies, and a finite block repeated forever.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cookies must lie in `[ELLIPTIC_EPS, 1 - ELLIPTIC_EPS]`.
pub const ELLIPTIC_EPS: f64 = 1e-12;

/// Diagnostics closer than this to a threshold are treated as sitting on it.
pub const THRESHOLD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    #[serde(rename = "finite")]
    FiniteExcitation,
    Periodic,
}

/// Deterministic cookie sequence, identical at every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvSpec", into = "EnvSpec")]
pub struct CookieEnvironment {
    form: Form,
    probs: Vec<f64>,
}

/// Wire form of an environment: `{ "form": "finite" | "periodic", "probs": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub form: Form,
    pub probs: Vec<f64>,
}

impl TryFrom<EnvSpec> for CookieEnvironment {
    type Error = Error;

    fn try_from(spec: EnvSpec) -> Result<Self> {
        CookieEnvironment::new(spec.form, spec.probs)
    }
}

impl From<CookieEnvironment> for EnvSpec {
    fn from(env: CookieEnvironment) -> Self {
        EnvSpec {
            form: env.form,
            probs: env.probs,
        }
    }
}

impl CookieEnvironment {
    pub fn new(form: Form, probs: Vec<f64>) -> Result<Self> {
        for (idx, &p) in probs.iter().enumerate() {
            if !(ELLIPTIC_EPS..=1.0 - ELLIPTIC_EPS).contains(&p) {
                return Err(Error::InvalidEnvironment(format!(
                    "cookie p_{} = {p} is not strictly inside (0, 1)",
                    idx + 1
                )));
            }
        }
        if form == Form::Periodic && probs.is_empty() {
            return Err(Error::InvalidEnvironment(
                "periodic environment needs at least one cookie".into(),
            ));
        }
        Ok(Self { form, probs })
    }

    /// `p_1..p_M` followed by fair cookies.
    pub fn finite(probs: impl Into<Vec<f64>>) -> Result<Self> {
        Self::new(Form::FiniteExcitation, probs.into())
    }

    /// `p_1..p_M` repeated indefinitely.
    pub fn periodic(probs: impl Into<Vec<f64>>) -> Result<Self> {
        Self::new(Form::Periodic, probs.into())
    }

    /// The simple symmetric random walk.
    pub fn fair() -> Self {
        Self {
            form: Form::FiniteExcitation,
            probs: Vec::new(),
        }
    }

    pub fn form(&self) -> Form {
        self.form
    }

    /// The stored block `p_1..p_M`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of stored cookies (the period for periodic environments).
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of a right step on the k-th departure from a site (`k >= 1`).
    #[inline]
    pub fn cookie_prob(&self, k: usize) -> f64 {
        assert!(k >= 1, "cookie indices start at 1");
        match self.form {
            Form::FiniteExcitation => self.probs.get(k - 1).copied().unwrap_or(0.5),
            Form::Periodic => self.probs[(k - 1) % self.probs.len()],
        }
    }

    /// Index after which every cookie is fair, if any.
    pub fn fair_after(&self) -> Option<usize> {
        match self.form {
            Form::FiniteExcitation => Some(self.probs.len()),
            Form::Periodic => None,
        }
    }

    /// `sum_k (2 p_k - 1)`; finite-excitation environments only.
    pub fn delta(&self) -> Result<f64> {
        match self.form {
            Form::FiniteExcitation => Ok(self.probs.iter().map(|p| 2.0 * p - 1.0).sum()),
            Form::Periodic => Err(Error::DeltaUndefined),
        }
    }

    /// Mean cookie strength over one period.
    pub fn pbar(&self) -> Option<f64> {
        match self.form {
            Form::Periodic => Some(self.probs.iter().sum::<f64>() / self.probs.len() as f64),
            Form::FiniteExcitation => None,
        }
    }

    /// Drift functional of a periodic block; decides transience when `pbar == 1/2`.
    pub fn theta(&self) -> Option<f64> {
        if self.form != Form::Periodic {
            return None;
        }
        let mut partial = 0.0;
        let mut numerator = 0.0;
        for &p in &self.probs {
            partial += 2.0 * p - 1.0;
            numerator += (1.0 - p) * partial;
        }
        let denominator: f64 = 4.0 * self.probs.iter().map(|p| p * (1.0 - p)).sum::<f64>();
        Some(numerator / denominator)
    }

    pub fn classify(&self) -> EnvDiagnostics {
        match self.form {
            Form::FiniteExcitation => {
                let delta = self.delta().expect("finite form");
                let near = |t: f64| (delta - t).abs() <= THRESHOLD_TOL;
                let classification = if delta > 2.0 && !near(2.0) {
                    Classification::TransientPositiveSpeed
                } else if delta > 1.0 && !near(1.0) {
                    Classification::TransientZeroSpeed
                } else {
                    Classification::RecurrentOrLeft
                };
                // |delta| <= 1: recurrent, between the two transient regimes.
                let boundary = delta.abs() <= 1.0 + THRESHOLD_TOL;
                EnvDiagnostics {
                    form: self.form,
                    delta: Delta::Finite(delta),
                    pbar: None,
                    theta: None,
                    classification,
                    boundary,
                }
            }
            Form::Periodic => {
                let pbar = self.pbar().expect("periodic form");
                let theta = self.theta().expect("periodic form");
                let fair_mean = (pbar - 0.5).abs() <= THRESHOLD_TOL;
                let (delta, classification, boundary) = if fair_mean {
                    if theta > 1.0 && (theta - 1.0).abs() > THRESHOLD_TOL {
                        (
                            Delta::Undefined,
                            Classification::TransientRightUnknownSpeed,
                            false,
                        )
                    } else {
                        // Only a sufficient condition for right transience is known.
                        (Delta::Undefined, Classification::RecurrentOrLeft, true)
                    }
                } else if pbar > 0.5 {
                    (
                        Delta::PlusInfinity,
                        Classification::TransientPositiveSpeed,
                        false,
                    )
                } else {
                    (Delta::MinusInfinity, Classification::RecurrentOrLeft, false)
                };
                EnvDiagnostics {
                    form: self.form,
                    delta,
                    pbar: Some(pbar),
                    theta: Some(theta),
                    classification,
                    boundary,
                }
            }
        }
    }
}

impl fmt::Display for CookieEnvironment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.form {
            Form::FiniteExcitation => "finite",
            Form::Periodic => "periodic",
        };
        write!(f, "{kind}(")?;
        for (i, p) in self.probs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    RecurrentOrLeft,
    TransientZeroSpeed,
    TransientPositiveSpeed,
    TransientRightUnknownSpeed,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::RecurrentOrLeft => "RecurrentOrLeft",
            Classification::TransientZeroSpeed => "TransientZeroSpeed",
            Classification::TransientPositiveSpeed => "TransientPositiveSpeed",
            Classification::TransientRightUnknownSpeed => "TransientRightUnknownSpeed",
        }
    }

    pub fn is_right_transient(self) -> bool {
        !matches!(self, Classification::RecurrentOrLeft)
    }
}

/// The cookie sum: finite for finite-excitation environments, divergent or
/// oscillating for periodic ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
    Undefined,
}

impl Serialize for Delta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Delta::Finite(v) => s.serialize_f64(v),
            Delta::PlusInfinity => s.serialize_str("+inf"),
            Delta::MinusInfinity => s.serialize_str("-inf"),
            Delta::Undefined => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvDiagnostics {
    pub form: Form,
    pub delta: Delta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub classification: Classification,
    /// Set when the walk is recurrent for finite-excitation environments, or
    /// when a periodic environment falls outside the known transience criterion.
    pub boundary: bool,
}

impl EnvDiagnostics {
    /// Classification with a `-boundary` suffix when flagged.
    pub fn label(&self) -> String {
        if self.boundary {
            format!("{}-boundary", self.classification.as_str())
        } else {
            self.classification.as_str().to_string()
        }
    }

    /// Speed positivity is established by the diagnostics alone.
    pub fn positive_speed(&self) -> bool {
        self.classification == Classification::TransientPositiveSpeed
    }
}
