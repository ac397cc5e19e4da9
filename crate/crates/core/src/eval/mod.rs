//! Ground-truth labels, error-proportion evaluation, curve dumps and the
//! train/evaluate experiment pipeline.

mod experiment;
mod report;

use std::fmt::Write as _;
use std::path::Path;

pub use experiment::{labelled, train_regressor, AblationConfig, AblationRun, Dataset, DEFAULT_TEST_FRACTION};
pub use experiment::run_ablation;
pub use report::{validate_thresholds, ErrorReport, ReportRow, DEFAULT_THRESHOLDS};

use crate::error::{Error, Result};
use crate::features::{extract, ChannelSet};
use crate::ingest::{CodingMetadata, CorpusItem};
use crate::model::{fit, relative_error, ModelKind, ModelParams, ModelSpec};
use crate::nn::{Checkpoint, Regressor};

/// Spec of `kind` for one frame, fastened on the frame's operational point
/// when the kind is fastened.
pub fn label_spec(meta: &CodingMetadata, kind: ModelKind) -> Result<ModelSpec> {
    kind.with_anchor(kind.fastened.then_some(meta.anchor))
}

/// Least-squares parameters of the frame's measured R-QP curve.
pub fn make_labels(meta: &CodingMetadata, kind: ModelKind) -> Result<ModelParams> {
    let curve = meta
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config(format!("frame '{}' has no R-QP labels", meta.frame_id)))?;
    fit(label_spec(meta, kind)?, curve)
}

/// Rate at a given QP for one frame. Errors are inversion failures.
pub type RateFn<'a> = Box<dyn Fn(f64) -> Result<f64> + 'a>;

/// Anything that yields a per-frame rate model.
pub trait RatePredictor {
    /// Errors returned here abort an evaluation.
    fn rates_for<'a>(&'a self, item: &CorpusItem) -> Result<RateFn<'a>>;
}

pub fn params_rate_fn(params: ModelParams) -> RateFn<'static> {
    Box::new(move |qp| params.predict_rate(qp))
}

/// Uses each frame's own fitted labels as the "prediction". Isolates model
/// form error from regression error.
#[derive(Debug, Clone, Copy)]
pub struct OraclePredictor {
    pub kind: ModelKind,
}

impl RatePredictor for OraclePredictor {
    fn rates_for<'a>(&'a self, item: &CorpusItem) -> Result<RateFn<'a>> {
        Ok(params_rate_fn(make_labels(&item.metadata, self.kind)?))
    }
}

/// A trained regressor with the feature channels it was trained on.
#[derive(Debug, Clone)]
pub struct NetPredictor {
    pub regressor: Regressor,
    pub channels: ChannelSet,
}

impl NetPredictor {
    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let (regressor, channels) = ck.into_regressor()?;
        Ok(Self { regressor, channels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        Checkpoint::from_regressor(&self.regressor, self.channels)
    }

    pub fn kind(&self) -> ModelKind {
        self.regressor.kind
    }

    pub fn params(&self, item: &CorpusItem) -> Result<ModelParams> {
        let m = &item.metadata;
        let stack = extract(&item.frame, &m.cus, &m.pus, self.channels)?;
        self.regressor
            .predict_params(&stack, label_spec(m, self.regressor.kind)?)
    }
}

impl RatePredictor for NetPredictor {
    fn rates_for<'a>(&'a self, item: &CorpusItem) -> Result<RateFn<'a>> {
        Ok(params_rate_fn(self.params(item)?))
    }
}

/// Scores `predictor` over every labelled (frame, QP) pair of `items`, leaving
/// out each frame's operational point. Inversion failures count as misses at
/// every threshold.
pub fn evaluate(
    items: &[CorpusItem],
    predictor: &dyn RatePredictor,
    thresholds: &[f64],
    model: &str,
    p0: bool,
    features: &str,
) -> Result<ReportRow> {
    validate_thresholds(thresholds)?;
    let mut hits = vec![0usize; thresholds.len()];
    let (mut pairs, mut failures) = (0usize, 0usize);
    let (mut abs_sum, mut signed_sum, mut scored) = (0.0, 0.0, 0usize);
    for item in items {
        let m = &item.metadata;
        let curve = m
            .labels
            .as_ref()
            .ok_or_else(|| Error::Config(format!("frame '{}' has no R-QP labels", m.frame_id)))?;
        let rate_at = predictor.rates_for(item)?;
        for s in curve.samples().iter().filter(|s| s.qp != m.anchor.qp0) {
            pairs += 1;
            match rate_at(s.qp) {
                Ok(pred) => {
                    let delta = relative_error(s.rate, pred)?;
                    abs_sum += delta.abs();
                    signed_sum += delta;
                    scored += 1;
                    for (h, &t) in hits.iter_mut().zip(thresholds) {
                        if delta.abs() <= t {
                            *h += 1;
                        }
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Config("no labelled (frame, qp) pairs to evaluate".into()));
    }
    Ok(ReportRow {
        model: model.to_string(),
        p0,
        features: features.to_string(),
        pairs,
        inversion_failures: failures,
        proportions: hits.iter().map(|&h| h as f64 / pairs as f64).collect(),
        mean_abs_delta: abs_sum / scored as f64,
        mean_signed_delta: signed_sum / scored as f64,
    })
}

/// CSV of `qp, actual_bits` and one predicted column per configuration.
/// Defaults to the frame's labelled QPs. Cells stay empty where there is no
/// label or the model cannot be inverted.
pub fn curve_dump(item: &CorpusItem, configs: &[(String, &dyn RatePredictor)], qps: Option<&[f64]>) -> Result<String> {
    if configs.is_empty() {
        return Err(Error::Config("curve dump needs at least one configuration".into()));
    }
    let labels = item.metadata.labels.as_ref();
    let grid: Vec<f64> = match qps {
        Some(q) => q.to_vec(),
        None => labels
            .ok_or_else(|| Error::Config(format!("frame '{}' has no labels and no qp grid was given", item.metadata.frame_id)))?
            .samples()
            .iter()
            .map(|s| s.qp)
            .collect(),
    };
    let fns = configs
        .iter()
        .map(|(_, p)| p.rates_for(item))
        .collect::<Result<Vec<_>>>()?;

    let mut out = String::from("qp,actual_bits");
    for (name, _) in configs {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for qp in grid {
        write!(out, "{qp},").unwrap();
        if let Some(r) = labels.and_then(|c| c.rate_at(qp)) {
            write!(out, "{r}").unwrap();
        }
        for f in &fns {
            out.push(',');
            if let Ok(r) = f(qp) {
                write!(out, "{r}").unwrap();
            }
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_corpus, LABEL_QPS};
    use crate::model::{ModelForm, RqpCurve, RqpSample};

    const QF: ModelKind = ModelKind::new(ModelForm::Quadratic, true);

    fn items(n: usize) -> Vec<CorpusItem> {
        synth_corpus(n, 3, (32, 32)).unwrap().into_iter().map(CorpusItem::from).collect()
    }

    /// Replaces the labels with points lying exactly on a fastened quadratic
    /// with curvature `alpha` and slope `dQP/dlnR` at the operational point.
    fn on_model(mut item: CorpusItem, alpha: f64, slope: f64) -> (CorpusItem, ModelParams) {
        let beta = slope - 2.0 * alpha * item.metadata.anchor.log_rate();
        let params = ModelParams::new(label_spec(&item.metadata, QF).unwrap(), vec![alpha, beta]).unwrap();
        let samples = LABEL_QPS
            .iter()
            .map(|&qp| RqpSample {
                qp,
                rate: params.predict_rate(qp).unwrap(),
            })
            .collect();
        item.metadata.labels = Some(RqpCurve::new(samples).unwrap());
        (item, params)
    }

    struct Scaled(f64);

    impl RatePredictor for Scaled {
        fn rates_for<'a>(&'a self, item: &CorpusItem) -> Result<RateFn<'a>> {
            let curve = item.metadata.labels.clone().unwrap();
            Ok(Box::new(move |qp| Ok(curve.rate_at(qp).unwrap() * self.0)))
        }
    }

    struct Failing;

    impl RatePredictor for Failing {
        fn rates_for<'a>(&'a self, _: &CorpusItem) -> Result<RateFn<'a>> {
            Ok(Box::new(|qp| Err(Error::Domain(format!("no rate at {qp}")))))
        }
    }

    #[test]
    fn labels_recover_generating_params() {
        let (item, truth) = on_model(items(1).remove(0), 0.1, -6.0);
        let fitted = make_labels(&item.metadata, QF).unwrap();
        for (a, b) in fitted.coeffs.iter().zip(&truth.coeffs) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn label_preconditions() {
        let mut item = items(1).remove(0);
        let m = &mut item.metadata;
        let a = m.anchor;
        m.labels = Some(RqpCurve::new(vec![RqpSample { qp: a.qp0, rate: a.r0 }]).unwrap());
        assert!(matches!(
            make_labels(m, ModelKind::new(ModelForm::Quadratic, false)),
            Err(Error::UnderDetermined { samples: 1, params: 3 })
        ));
        m.labels = None;
        assert!(matches!(make_labels(m, QF), Err(Error::Config(_))));
        assert!(QF.with_anchor(None).is_err());
    }

    #[test]
    fn exact_parameters_score_everything() {
        let set: Vec<CorpusItem> = items(4).into_iter().map(|i| on_model(i, -0.05, -5.0).0).collect();
        let row = evaluate(&set, &OraclePredictor { kind: QF }, &DEFAULT_THRESHOLDS, "quadratic", true, "oracle").unwrap();
        assert_eq!(row.proportions, vec![1.0; 3]);
        // qp0 excluded: 7 of 8 labelled QPs per frame
        assert_eq!(row.pairs, 4 * 7);
        assert_eq!(row.inversion_failures, 0);
        assert!(row.mean_abs_delta < 1e-6);
    }

    #[test]
    fn uniform_underestimate_by_fifteen_percent() {
        let set = items(3);
        let row = evaluate(&set, &Scaled(0.85), &[10.0, 20.0, 30.0], "x", false, "x").unwrap();
        assert_eq!(row.proportions, vec![0.0, 1.0, 1.0]);
        assert!((row.mean_abs_delta - 15.0).abs() < 1e-9);
        assert!((row.mean_signed_delta - 15.0).abs() < 1e-9);
    }

    #[test]
    fn inversion_failures_are_misses() {
        let set = items(2);
        let row = evaluate(&set, &Failing, &DEFAULT_THRESHOLDS, "x", false, "x").unwrap();
        assert_eq!(row.inversion_failures, row.pairs);
        assert_eq!(row.proportions, vec![0.0; 3]);
        assert!(row.mean_abs_delta.is_nan());
    }

    #[test]
    fn oracle_quadratic_nests_linear() {
        let set = items(12);
        let lin = ModelKind::new(ModelForm::Linear, true);
        let thresholds = [30.0, 20.0, 10.0, 5.0, 2.0, 1.0];
        let q = evaluate(&set, &OraclePredictor { kind: QF }, &thresholds, "q", true, "-").unwrap();
        let l = evaluate(&set, &OraclePredictor { kind: lin }, &thresholds, "l", true, "-").unwrap();
        for (a, b) in q.proportions.iter().zip(&l.proportions) {
            assert!(a >= b, "{:?} vs {:?}", q.proportions, l.proportions);
        }
        for row in [&q, &l] {
            assert!(row.proportions.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn curve_dump_columns() {
        let item = items(1).remove(0);
        let oracle = OraclePredictor { kind: QF };
        assert!(curve_dump(&item, &[], None).is_err());
        let csv = curve_dump(&item, &[("qf".into(), &oracle as &dyn RatePredictor)], None).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("qp,actual_bits,qf"));
        let labels = item.metadata.labels.as_ref().unwrap().samples();
        for (line, s) in lines.zip(labels) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[0].parse::<f64>().unwrap(), s.qp);
            assert_eq!(cells[1].parse::<f64>().unwrap(), s.rate);
            if s.qp == item.metadata.anchor.qp0 {
                let pred: f64 = cells[2].parse().unwrap();
                assert!((pred / item.metadata.anchor.r0 - 1.0).abs() < 1e-6);
            }
        }
        let grid = curve_dump(&item, &[("qf".into(), &oracle as &dyn RatePredictor)], Some(&[11.0])).unwrap();
        assert!(grid.lines().nth(1).unwrap().starts_with("11,,"));
    }
}
