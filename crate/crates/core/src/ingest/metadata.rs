//! Per-frame coding-metadata sidecar (`<frame>.rqp.json`).
//!
//! ```json
//! {
//!   "frame_id": "img_0001",
//!   "width": 64, "height": 64,
//!   "anchor": { "qp0": 10, "r0_bits": 21873.5 },
//!   "cus": [ { "x": 0, "y": 0, "w": 64, "h": 64 } ],
//!   "pus": [ { "x": 0, "y": 0, "mode": 26 }, ... ],
//!   "labels": [ { "qp": 10, "bits": 21873.5 }, ... ]
//! }
//! ```
//!
//! `labels` is optional; every other key is required.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{validate_pus, validate_tiling, CuRect, PuMode, MAX_INTRA_MODE};
use crate::model::{OperationalPoint, RqpCurve, RqpSample};

/// Relative tolerance between the anchor rate and the label at `qp0`.
pub const ANCHOR_LABEL_TOLERANCE: f64 = 1e-6;

/// Decisions and measurements of one coded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingMetadata {
    pub frame_id: String,
    pub width: u32,
    pub height: u32,
    pub cus: Vec<CuRect>,
    pub pus: Vec<PuMode>,
    pub anchor: OperationalPoint,
    pub labels: Option<RqpCurve>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPu {
    x: u32,
    y: u32,
    mode: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSidecar {
    frame_id: String,
    width: u32,
    height: u32,
    anchor: OperationalPoint,
    cus: Vec<CuRect>,
    pus: Vec<RawPu>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<RqpSample>>,
}

impl CodingMetadata {
    /// Checks every structural invariant of the sidecar.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Schema(format!("frame {}: width/height must be positive", self.frame_id)));
        }
        if !(self.anchor.r0 > 0.0 && self.anchor.r0.is_finite()) {
            return Err(Error::Schema(format!("frame {}: anchor.r0_bits must be positive", self.frame_id)));
        }
        validate_tiling(self.width, self.height, &self.cus)
            .map_err(|e| Error::Tiling(format!("frame {}: cus: {}", self.frame_id, strip(e))))?;
        validate_pus(self.width, self.height, &self.pus).map_err(|e| match e {
            Error::Range(m) => Error::Range(format!("frame {}: pus: {m}", self.frame_id)),
            other => Error::Tiling(format!("frame {}: pus: {}", self.frame_id, strip(other))),
        })?;
        if let Some(labels) = &self.labels {
            let at_anchor = labels.rate_at(self.anchor.qp0).ok_or_else(|| {
                Error::Schema(format!(
                    "frame {}: labels do not include the anchor qp {}",
                    self.frame_id, self.anchor.qp0
                ))
            })?;
            let rel = ((at_anchor - self.anchor.r0) / self.anchor.r0).abs();
            if rel >= ANCHOR_LABEL_TOLERANCE {
                return Err(Error::Schema(format!(
                    "frame {}: label at qp {} is {at_anchor} bits but anchor says {}",
                    self.frame_id, self.anchor.qp0, self.anchor.r0
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = RawSidecar {
            frame_id: self.frame_id.clone(),
            width: self.width,
            height: self.height,
            anchor: self.anchor,
            cus: self.cus.clone(),
            pus: self
                .pus
                .iter()
                .map(|p| RawPu {
                    x: p.x,
                    y: p.y,
                    mode: p.mode as i64,
                })
                .collect(),
            labels: self.labels.as_ref().map(|l| l.samples().to_vec()),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Tiling(m) | Error::Range(m) | Error::Schema(m) => m,
        other => other.to_string(),
    }
}

/// Parses and validates a sidecar document.
pub fn parse_metadata(document: &str) -> Result<CodingMetadata> {
    let raw: RawSidecar =
        serde_json::from_str(document).map_err(|e| Error::Schema(format!("sidecar: {e}")))?;
    let pus = raw
        .pus
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if !(0..=MAX_INTRA_MODE as i64).contains(&p.mode) {
                return Err(Error::Range(format!(
                    "frame {}: pus[{i}].mode = {} outside [0, {MAX_INTRA_MODE}]",
                    raw.frame_id, p.mode
                )));
            }
            Ok(PuMode {
                x: p.x,
                y: p.y,
                mode: p.mode as u8,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = match raw.labels {
        Some(samples) => Some(
            RqpCurve::new(samples)
                .map_err(|e| Error::Schema(format!("frame {}: labels: {}", raw.frame_id, strip(e))))?,
        ),
        None => None,
    };
    let meta = CodingMetadata {
        frame_id: raw.frame_id,
        width: raw.width,
        height: raw.height,
        cus: raw.cus,
        pus,
        anchor: raw.anchor,
        labels,
    };
    meta.validate()?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "frame_id": "f0",
        "width": 16, "height": 16,
        "anchor": { "qp0": 10, "r0_bits": 1200 },
        "cus": [ { "x": 0, "y": 0, "w": 16, "h": 16 } ],
        "pus": [ { "x": 0, "y": 0, "mode": 26 } ]
    }"#;

    #[test]
    fn minimal_document() {
        let m = parse_metadata(MINIMAL).unwrap();
        assert_eq!(m.frame_id, "f0");
        assert_eq!(m.cus, vec![CuRect { x: 0, y: 0, w: 16, h: 16 }]);
        assert_eq!(m.pus, vec![PuMode { x: 0, y: 0, mode: 26 }]);
        assert_eq!(m.anchor, OperationalPoint { qp0: 10.0, r0: 1200.0 });
        assert!(m.labels.is_none());
        assert_eq!(parse_metadata(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn overlapping_cus_named() {
        let doc = MINIMAL.replace(
            r#"[ { "x": 0, "y": 0, "w": 16, "h": 16 } ]"#,
            r#"[ { "x": 0, "y": 0, "w": 16, "h": 16 }, { "x": 8, "y": 8, "w": 8, "h": 8 } ]"#,
        );
        let err = parse_metadata(&doc).unwrap_err();
        assert!(matches!(err, Error::Tiling(_)));
        let msg = err.to_string();
        assert!(msg.contains("CU(0, 0, 16x16)") && msg.contains("CU(8, 8, 8x8)"), "{msg}");
    }

    #[test]
    fn mode_out_of_range() {
        let doc = MINIMAL.replace(r#""mode": 26"#, r#""mode": 35"#);
        let err = parse_metadata(&doc).unwrap_err();
        assert!(matches!(err, Error::Range(_)), "{err}");
        assert!(err.to_string().contains("pus[0].mode"));
    }

    #[test]
    fn schema_violations() {
        let missing = MINIMAL.replace(r#""frame_id": "f0","#, "");
        let err = parse_metadata(&missing).unwrap_err().to_string();
        assert!(err.contains("frame_id") && err.contains("line"), "{err}");
        let bad_type = MINIMAL.replace(r#""width": 16"#, r#""width": "sixteen""#);
        assert!(matches!(parse_metadata(&bad_type), Err(Error::Schema(_))));
    }

    #[test]
    fn labels_must_agree_with_anchor() {
        let with = |bits: f64| {
            MINIMAL.replace(
                r#""pus": [ { "x": 0, "y": 0, "mode": 26 } ]"#,
                &format!(r#""pus": [ {{ "x": 0, "y": 0, "mode": 26 }} ], "labels": [ {{ "qp": 10, "bits": {bits} }}, {{ "qp": 20, "bits": 300 }} ]"#),
            )
        };
        assert!(parse_metadata(&with(1200.0)).is_ok());
        assert!(parse_metadata(&with(1300.0)).is_err());
        let no_anchor = MINIMAL.replace(
            r#""pus": [ { "x": 0, "y": 0, "mode": 26 } ]"#,
            r#""pus": [ { "x": 0, "y": 0, "mode": 26 } ], "labels": [ { "qp": 20, "bits": 300 } ]"#,
        );
        assert!(parse_metadata(&no_anchor).is_err());
    }
}
