//! Vertical scaling of grade-level p-values.
//!
//! Under the 1PL model `P(correct) = sigmoid(theta + b)`, an item answered
//! correctly by a fraction `p` of grade-`g` students with mean ability
//! `theta_g` has easiness `b = logit(p) - theta_g`. Published grade norms are
//! on reporting scales (RIT, STAAR scale scores), so each [`AbilityScale`]
//! carries an affine map `(theta - center) / spread` onto logits.

pub mod builtin;
mod simulate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simulate::{recover_easiness, simulate_pvalue, GradeRecovery, Recovery, RecoveryConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("p = {0} is outside the open interval (0, 1)")]
    Domain(f64),
    #[error("scale `{scale}` has no mean for grade {grade}")]
    UnknownGrade { scale: String, grade: u8 },
    #[error("degenerate anchors: {0}")]
    DegenerateAnchors(&'static str),
    #[error("scale `{scale}` is not strictly increasing from grade {lower} to grade {upper}")]
    NotMonotone { scale: String, lower: u8, upper: u8 },
    #[error("spread must be positive and finite, got {0}")]
    Spread(f64),
    #[error("unknown scale `{0}`")]
    UnknownScale(String),
    #[error("no part of composite scale `{scale}` covers year {year}")]
    UncoveredYear { scale: String, year: i32 },
    #[error("invalid scale definition: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ScaleError>;

/// `log(p / (1 - p))` for `p` strictly inside (0, 1).
pub fn logit(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok((p / (1.0 - p)).ln())
    } else {
        Err(ScaleError::Domain(p))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Item easiness in logits; larger is easier.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Easiness(pub f64);

impl Easiness {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub center: f64,
    pub spread: f64,
}

impl Affine {
    pub fn identity() -> Self {
        Self {
            center: 0.0,
            spread: 1.0,
        }
    }
}

/// Two reference points pinning the affine map: an item with p-value `p` in
/// `grade_a` must land at easiness `b_a`, and in `grade_b` at `b_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub grade_a: u8,
    pub b_a: f64,
    pub grade_b: u8,
    pub b_b: f64,
    pub p: f64,
}

impl Default for Anchors {
    /// p = 0.6 maps to 0.3 in grade 3 and to -1.69 in grade 8.
    fn default() -> Self {
        Self {
            grade_a: 3,
            b_a: 0.3,
            grade_b: 8,
            b_b: -1.69,
            p: 0.6,
        }
    }
}

/// Solves for `{center, spread}` such that
/// `logit(p) - (theta_a - center) / spread = b_a` and likewise for `b`.
pub fn fit_affine_from_anchors(
    theta_a: f64,
    b_a: f64,
    theta_b: f64,
    b_b: f64,
    p: f64,
) -> Result<Affine> {
    if theta_a == theta_b {
        return Err(ScaleError::DegenerateAnchors("anchor abilities are equal"));
    }
    if b_a == b_b {
        return Err(ScaleError::DegenerateAnchors("anchor easiness values are equal"));
    }
    let l = logit(p)?;
    let spread = (theta_b - theta_a) / (b_a - b_b);
    if !(spread.is_finite() && spread > 0.0) {
        return Err(ScaleError::Spread(spread));
    }
    let center = theta_a - spread * (l - b_a);
    Ok(Affine { center, spread })
}

/// Grade-mean ability norms plus the affine map onto the logit metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityScale {
    pub name: String,
    pub grade_means: BTreeMap<u8, f64>,
    pub affine: Affine,
}

impl AbilityScale {
    pub fn new(
        name: impl Into<String>,
        grade_means: BTreeMap<u8, f64>,
        affine: Affine,
    ) -> Result<Self> {
        let scale = Self {
            name: name.into(),
            grade_means,
            affine,
        };
        scale.validate()?;
        Ok(scale)
    }

    /// Builds a scale whose affine map is fitted to the given anchors.
    pub fn with_anchors(
        name: impl Into<String>,
        grade_means: BTreeMap<u8, f64>,
        anchors: Anchors,
    ) -> Result<Self> {
        let name = name.into();
        let lookup = |g: u8| {
            grade_means
                .get(&g)
                .copied()
                .ok_or_else(|| ScaleError::UnknownGrade {
                    scale: name.clone(),
                    grade: g,
                })
        };
        let affine = fit_affine_from_anchors(
            lookup(anchors.grade_a)?,
            anchors.b_a,
            lookup(anchors.grade_b)?,
            anchors.b_b,
            anchors.p,
        )?;
        Self::new(name, grade_means, affine)
    }

    fn validate(&self) -> Result<()> {
        if !(self.affine.spread.is_finite() && self.affine.spread > 0.0) {
            return Err(ScaleError::Spread(self.affine.spread));
        }
        if !self.affine.center.is_finite() || self.grade_means.values().any(|v| !v.is_finite()) {
            return Err(ScaleError::Invalid(format!("`{}` has non-finite values", self.name)));
        }
        if self.grade_means.is_empty() {
            return Err(ScaleError::Invalid(format!("`{}` has no grades", self.name)));
        }
        for ((&g0, &t0), (&g1, &t1)) in self.grade_means.iter().zip(self.grade_means.iter().skip(1)) {
            if t1 <= t0 {
                return Err(ScaleError::NotMonotone {
                    scale: self.name.clone(),
                    lower: g0,
                    upper: g1,
                });
            }
        }
        Ok(())
    }

    pub fn grades(&self) -> impl Iterator<Item = u8> + '_ {
        self.grade_means.keys().copied()
    }

    pub fn raw_mean(&self, grade: u8) -> Result<f64> {
        self.grade_means
            .get(&grade)
            .copied()
            .ok_or_else(|| ScaleError::UnknownGrade {
                scale: self.name.clone(),
                grade,
            })
    }

    /// `(theta_g - center) / spread`.
    pub fn normalized_theta(&self, grade: u8) -> Result<f64> {
        Ok((self.raw_mean(grade)? - self.affine.center) / self.affine.spread)
    }

    /// `b = logit(p) - normalized_theta(grade)`.
    pub fn rescale_pvalue(&self, p: f64, grade: u8) -> Result<Easiness> {
        let theta = self.normalized_theta(grade)?;
        Ok(Easiness(logit(p)? - theta))
    }

    /// `p = sigmoid(normalized_theta(grade) + b)`.
    pub fn invert_easiness(&self, b: Easiness, grade: u8) -> Result<f64> {
        Ok(sigmoid(self.normalized_theta(grade)? + b.0))
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: ScaleFile =
            serde_json::from_slice(bytes).map_err(|e| ScaleError::Invalid(e.to_string()))?;
        file.into_scale()
    }

    pub fn to_json(&self) -> String {
        let file = ScaleFile {
            name: self.name.clone(),
            grade_means: self
                .grade_means
                .iter()
                .map(|(g, v)| (g.to_string(), *v))
                .collect(),
            affine: Some(self.affine),
            anchors: None,
        };
        serde_json::to_string_pretty(&file).expect("scale serializes")
    }
}

/// On-disk scale definition. Grade keys are strings in JSON; exactly one of
/// `affine` or `anchors` may be given, and a missing one means the default
/// anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleFile {
    pub name: String,
    pub grade_means: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<Affine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Anchors>,
}

impl ScaleFile {
    pub fn into_scale(self) -> Result<AbilityScale> {
        let mut means = BTreeMap::new();
        for (k, v) in self.grade_means {
            let g: u8 = k
                .trim()
                .parse()
                .map_err(|_| ScaleError::Invalid(format!("grade key `{k}` is not an integer")))?;
            means.insert(g, v);
        }
        match (self.affine, self.anchors) {
            (Some(_), Some(_)) => Err(ScaleError::Invalid(
                "give either `affine` or `anchors`, not both".into(),
            )),
            (Some(affine), None) => AbilityScale::new(self.name, means, affine),
            (None, anchors) => {
                AbilityScale::with_anchors(self.name, means, anchors.unwrap_or_default())
            }
        }
    }
}

/// Year-keyed combination of scales, e.g. one norm table before 2020 and
/// another after. Results from such a scale are not comparable with
/// single-scale runs and are flagged as mixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeScale {
    pub name: String,
    pub parts: Vec<YearPart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearPart {
    /// Inclusive bounds; `None` is open-ended.
    pub from_year: Option<i32>,
    pub to_year: Option<i32>,
    pub scale: AbilityScale,
}

impl CompositeScale {
    pub fn scale_for_year(&self, year: i32) -> Result<&AbilityScale> {
        self.parts
            .iter()
            .find(|p| p.from_year.is_none_or(|y| year >= y) && p.to_year.is_none_or(|y| year <= y))
            .map(|p| &p.scale)
            .ok_or_else(|| ScaleError::UncoveredYear {
                scale: self.name.clone(),
                year,
            })
    }
}

/// The scale used to derive an outcome: a single norm table, or a
/// year-keyed composite.
#[derive(Debug, Clone, PartialEq)]
pub enum VerticalScale {
    Single(AbilityScale),
    Composite(CompositeScale),
}

impl VerticalScale {
    pub fn name(&self) -> &str {
        match self {
            VerticalScale::Single(s) => &s.name,
            VerticalScale::Composite(c) => &c.name,
        }
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self, VerticalScale::Composite(_))
    }

    pub fn scale_for_year(&self, year: i32) -> Result<&AbilityScale> {
        match self {
            VerticalScale::Single(s) => Ok(s),
            VerticalScale::Composite(c) => c.scale_for_year(year),
        }
    }

    pub fn rescale(&self, p: f64, grade: u8, year: i32) -> Result<Easiness> {
        self.scale_for_year(year)?.rescale_pvalue(p, grade)
    }

    /// Resolves a built-in scale or composite by name.
    pub fn builtin(name: &str) -> Result<Self> {
        if let Some(c) = builtin::composite(name) {
            return Ok(VerticalScale::Composite(c?));
        }
        builtin::scale(name).map(VerticalScale::Single)
    }
}

pub fn normalized_theta(scale: &AbilityScale, grade: u8) -> Result<f64> {
    scale.normalized_theta(grade)
}

pub fn rescale_pvalue(p: f64, grade: u8, scale: &AbilityScale) -> Result<Easiness> {
    scale.rescale_pvalue(p, grade)
}

pub fn invert_easiness(b: Easiness, grade: u8, scale: &AbilityScale) -> Result<f64> {
    scale.invert_easiness(b, grade)
}
