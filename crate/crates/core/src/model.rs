//! The R-QP model family.
//!
//! QP is modelled as a polynomial in `u = ln(R)`:
//!
//! | form      | free                  | fastened on `(qp0, r0)`                          |
//! |-----------|-----------------------|--------------------------------------------------|
//! | linear    | `a u + b`             | `a (u - u0) + qp0`                               |
//! | quadratic | `alpha u^2 + beta u + mu` | `alpha (u^2 - u0^2) + beta (u - u0) + qp0`   |
//!
//! with `u0 = ln(r0)`. Fastening pins the curve to the operational point
//! observed in the single coding pass and removes one parameter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq;

/// One measured `(QP, bits)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RqpSample {
    pub qp: f64,
    #[serde(rename = "bits")]
    pub rate: f64,
}

/// Measured samples of one frame, strictly increasing in QP.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RqpCurve {
    samples: Vec<RqpSample>,
}

impl RqpCurve {
    pub fn new(samples: Vec<RqpSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("an R-QP curve needs at least one sample".into()));
        }
        for s in &samples {
            if !(s.rate > 0.0 && s.rate.is_finite()) || !s.qp.is_finite() {
                return Err(Error::Domain(format!(
                    "sample (qp {}, rate {}) must have finite qp and positive finite rate",
                    s.qp, s.rate
                )));
            }
        }
        if samples.windows(2).any(|w| w[1].qp <= w[0].qp) {
            return Err(Error::Domain("curve samples must be strictly increasing in qp".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[RqpSample] {
        &self.samples
    }

    pub fn rate_at(&self, qp: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.qp == qp).map(|s| s.rate)
    }
}

impl<'de> Deserialize<'de> for RqpCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let samples = Vec::<RqpSample>::deserialize(d)?;
        RqpCurve::new(samples).map_err(serde::de::Error::custom)
    }
}

/// The `(qp0, r0)` point produced by the one-pass coding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationalPoint {
    pub qp0: f64,
    #[serde(rename = "r0_bits")]
    pub r0: f64,
}

impl OperationalPoint {
    pub fn new(qp0: f64, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) || !qp0.is_finite() {
            return Err(Error::Domain(format!("operational point needs r0 > 0, got {r0}")));
        }
        Ok(Self { qp0, r0 })
    }

    pub fn log_rate(&self) -> f64 {
        self.r0.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelForm {
    Linear,
    Quadratic,
}

impl fmt::Display for ModelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelForm::Linear => "linear",
            ModelForm::Quadratic => "quadratic",
        })
    }
}

impl FromStr for ModelForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelForm::Linear),
            "quadratic" => Ok(ModelForm::Quadratic),
            other => Err(Error::Config(format!("unknown model form '{other}'"))),
        }
    }
}

/// Which model form, and whether it is fastened on an operational point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelKind {
    pub form: ModelForm,
    pub fastened: bool,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::new(ModelForm::Linear, false),
        ModelKind::new(ModelForm::Linear, true),
        ModelKind::new(ModelForm::Quadratic, false),
        ModelKind::new(ModelForm::Quadratic, true),
    ];

    pub const fn new(form: ModelForm, fastened: bool) -> Self {
        Self { form, fastened }
    }

    pub fn param_count(&self) -> usize {
        match (self.form, self.fastened) {
            (ModelForm::Linear, true) => 1,
            (ModelForm::Linear, false) | (ModelForm::Quadratic, true) => 2,
            (ModelForm::Quadratic, false) => 3,
        }
    }

    pub fn with_anchor(self, anchor: Option<OperationalPoint>) -> Result<ModelSpec> {
        ModelSpec::new(self.form, self.fastened, anchor)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.form, if self.fastened { "fastened" } else { "free" })
    }
}

/// A model kind plus the operational point it is fastened on, when fastened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub form: ModelForm,
    pub fastened: bool,
    pub anchor: Option<OperationalPoint>,
}

impl ModelSpec {
    pub fn new(form: ModelForm, fastened: bool, anchor: Option<OperationalPoint>) -> Result<Self> {
        match (fastened, anchor) {
            (true, None) => Err(Error::Config("a fastened model requires an operational point".into())),
            (false, Some(_)) => Err(Error::Config("a free model takes no operational point".into())),
            _ => Ok(Self {
                form,
                fastened,
                anchor,
            }),
        }
    }

    pub fn free(form: ModelForm) -> Self {
        Self {
            form,
            fastened: false,
            anchor: None,
        }
    }

    pub fn fastened(form: ModelForm, anchor: OperationalPoint) -> Self {
        Self {
            form,
            fastened: true,
            anchor: Some(anchor),
        }
    }

    pub fn kind(&self) -> ModelKind {
        ModelKind::new(self.form, self.fastened)
    }

    pub fn param_count(&self) -> usize {
        self.kind().param_count()
    }

    /// Regressors of one sample and the target they explain.
    fn design_row(&self, qp: f64, log_rate: f64) -> (Vec<f64>, f64) {
        let u = log_rate;
        match (self.form, self.anchor) {
            (ModelForm::Linear, None) => (vec![u, 1.0], qp),
            (ModelForm::Quadratic, None) => (vec![u * u, u, 1.0], qp),
            (ModelForm::Linear, Some(p)) => (vec![u - p.log_rate()], qp - p.qp0),
            (ModelForm::Quadratic, Some(p)) => {
                let (u0, v) = (p.log_rate(), u - p.log_rate());
                // u^2 - u0^2 = v (u + u0) keeps precision near the anchor
                (vec![v * (u + u0), v], qp - p.qp0)
            }
        }
    }
}

/// Fitted or predicted coefficients of a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub coeffs: Vec<f64>,
}

impl ModelParams {
    pub fn new(spec: ModelSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != spec.param_count() {
            return Err(Error::Shape(format!(
                "{} needs {} coefficients, got {}",
                spec.kind(),
                spec.param_count(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("model coefficients must be finite".into()));
        }
        Ok(Self { spec, coeffs })
    }

    /// QP the model assigns to a frame coded with `rate` bits.
    pub fn model_qp(&self, rate: f64) -> Result<f64> {
        if !(rate > 0.0) {
            return Err(Error::Domain(format!("rate must be positive, got {rate}")));
        }
        let u = rate.ln();
        let c = &self.coeffs;
        Ok(match (self.spec.form, self.spec.anchor) {
            (ModelForm::Linear, None) => c[0] * u + c[1],
            (ModelForm::Quadratic, None) => c[0] * u * u + c[1] * u + c[2],
            (ModelForm::Linear, Some(p)) => c[0] * (u - p.log_rate()) + p.qp0,
            (ModelForm::Quadratic, Some(p)) => {
                let (u0, v) = (p.log_rate(), u - p.log_rate());
                c[0] * v * (u + u0) + c[1] * v + p.qp0
            }
        })
    }

    /// Inverts the model: the rate at which it reaches `qp`.
    ///
    /// Quadratic forms keep the root on the branch whose slope `dQP/du` has the
    /// sign observed at the operational point (fastened) or is negative (free),
    /// i.e. the branch on which rate falls as QP rises.
    pub fn predict_rate(&self, qp: f64) -> Result<f64> {
        if !qp.is_finite() {
            return Err(Error::Domain(format!("qp must be finite, got {qp}")));
        }
        let c = &self.coeffs;
        let rate = match (self.spec.form, self.spec.anchor) {
            (ModelForm::Linear, None) => {
                let a = nonzero_slope(c[0])?;
                ((qp - c[1]) / a).exp()
            }
            (ModelForm::Linear, Some(p)) => {
                let a = nonzero_slope(c[0])?;
                p.r0 * ((qp - p.qp0) / a).exp()
            }
            (ModelForm::Quadratic, None) => {
                let u = solve_branch(c[0], c[1], c[2] - qp, -1.0).map_err(|v| self.no_root(qp, v))?;
                u.exp()
            }
            (ModelForm::Quadratic, Some(p)) => {
                // In v = u - u0: alpha v^2 + (2 alpha u0 + beta) v + (qp0 - qp) = 0
                let u0 = p.log_rate();
                let slope = 2.0 * c[0] * u0 + c[1];
                let branch = if slope > 0.0 { 1.0 } else { -1.0 };
                let v = solve_branch(c[0], slope, p.qp0 - qp, branch).map_err(|v| self.no_root(qp, v + u0))?;
                p.r0 * v.exp()
            }
        };
        if rate > 0.0 && rate.is_finite() {
            Ok(rate)
        } else {
            Err(Error::Range(format!("predicted rate {rate} at qp {qp} is not representable")))
        }
    }

    fn no_root(&self, qp: f64, vertex_log_rate: f64) -> Error {
        let vertex_qp = self
            .model_qp(vertex_log_rate.exp())
            .unwrap_or(f64::NAN);
        Error::NoRealRoot {
            qp,
            vertex_log_rate,
            vertex_qp,
        }
    }
}

fn nonzero_slope(a: f64) -> Result<f64> {
    if a == 0.0 {
        Err(Error::DegenerateFit("linear model with zero slope cannot be inverted".into()))
    } else {
        Ok(a)
    }
}

/// Root of `a x^2 + b x + c = 0` at which the derivative `2 a x + b` has the
/// sign `branch`. On a negative discriminant, returns the vertex `-b / 2a`.
fn solve_branch(a: f64, b: f64, c: f64, branch: f64) -> std::result::Result<f64, f64> {
    if a == 0.0 {
        return if b == 0.0 { Err(f64::NAN) } else { Ok(-c / b) };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(-b / (2.0 * a));
    }
    // At the chosen root the derivative equals branch * sqrt(disc).
    let s = branch * disc.sqrt();
    if (-b) * s > 0.0 || b == 0.0 {
        Ok((-b + s) / (2.0 * a))
    } else {
        // -b and s have opposite signs: use the cancellation-free form.
        let denom = -b - s;
        if denom == 0.0 {
            Ok(-b / (2.0 * a))
        } else {
            Ok(2.0 * c / denom)
        }
    }
}

/// Least-squares fit of `spec` to a measured curve, minimizing the squared QP
/// residuals.
pub fn fit(spec: ModelSpec, curve: &RqpCurve) -> Result<ModelParams> {
    let k = spec.param_count();
    if spec.fastened && spec.anchor.is_none() {
        return Err(Error::Config("a fastened model requires an operational point".into()));
    }
    let mut rows = Vec::with_capacity(curve.samples().len());
    let mut targets = Vec::with_capacity(curve.samples().len());
    let mut distinct: Vec<f64> = Vec::new();
    for s in curve.samples() {
        let u = s.rate.ln();
        let (row, t) = spec.design_row(s.qp, u);
        rows.push(row);
        targets.push(t);
        let informative = spec.anchor.map_or(true, |p| u != p.log_rate());
        if informative && !distinct.contains(&u) {
            distinct.push(u);
        }
    }
    if distinct.len() < k {
        return Err(Error::UnderDetermined {
            samples: distinct.len(),
            params: k,
        });
    }
    let sol = lsq::solve(&rows, &targets)?;
    ModelParams::new(spec, sol.coeffs)
}

/// Sum of squared QP residuals of `params` over `curve`.
pub fn residual_sum_squares(params: &ModelParams, curve: &RqpCurve) -> Result<f64> {
    curve.samples().iter().try_fold(0.0, |acc, s| {
        let r = params.model_qp(s.rate)? - s.qp;
        Ok(acc + r * r)
    })
}

/// Signed relative estimation error in percent, `(R - R_hat) / R * 100`.
pub fn relative_error(actual: f64, predicted: f64) -> Result<f64> {
    if !(actual > 0.0) {
        return Err(Error::Domain(format!("actual rate must be positive, got {actual}")));
    }
    Ok((actual - predicted) / actual * 100.0)
}
