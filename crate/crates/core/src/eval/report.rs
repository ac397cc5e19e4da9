use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [30.0, 20.0, 10.0];

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Config("at least one threshold is required".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::Config(format!("thresholds must be positive percentages, got {t}")));
    }
    for (i, a) in thresholds.iter().enumerate() {
        if thresholds[..i].contains(a) {
            return Err(Error::Config(format!("duplicate threshold {a}")));
        }
    }
    Ok(())
}

/// One configuration's accuracy over (frame, qp) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub p0: bool,
    pub features: String,
    pub pairs: usize,
    pub inversion_failures: usize,
    /// Share of pairs with `|delta|` within each threshold, in threshold order.
    pub proportions: Vec<f64>,
    /// Over pairs that could be scored; NaN when none could.
    pub mean_abs_delta: f64,
    pub mean_signed_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub thresholds: Vec<f64>,
    pub rows: Vec<ReportRow>,
}

impl ErrorReport {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        validate_thresholds(&thresholds)?;
        Ok(Self {
            thresholds,
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        if row.proportions.len() != self.thresholds.len() {
            return Err(Error::Shape("report row does not match the report thresholds".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn proportion(&self, row: usize, threshold: f64) -> Option<f64> {
        let j = self.thresholds.iter().position(|&t| t == threshold)?;
        self.rows.get(row)?.proportions.get(j).copied()
    }

    pub fn find(&self, model: &str, p0: bool, features: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.p0 == p0 && r.features == features)
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["model", "p0", "features", "pairs", "inversion_failures"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.thresholds.iter().map(|t| format!("within_{t}")));
        h.push("mean_abs_delta".into());
        h.push("mean_signed_delta".into());
        h
    }

    fn cells(row: &ReportRow) -> Vec<String> {
        let mut c = vec![
            row.model.clone(),
            if row.p0 { "yes" } else { "no" }.to_string(),
            row.features.clone(),
            row.pairs.to_string(),
            row.inversion_failures.to_string(),
        ];
        c.extend(row.proportions.iter().map(|p| format!("{:.2}", p * 100.0)));
        c.push(format!("{:.2}", row.mean_abs_delta));
        c.push(format!("{:.2}", row.mean_signed_delta));
        c
    }

    /// Percentages with two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let quote = |s: &str| {
            if s.contains(',') {
                format!("\"{s}\"")
            } else {
                s.to_string()
            }
        };
        writeln!(out, "{}", self.header().join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = Self::cells(row).iter().map(|c| quote(c)).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = self.header();
        let rows: Vec<Vec<String>> = self.rows.iter().map(Self::cells).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap())
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| if j < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = String::from("proportions (%) over (frame, qp) pairs, operational point excluded\n");
        writeln!(out, "{}", line(&header)).unwrap();
        for r in &rows {
            writeln!(out, "{}", line(r)).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(props: Vec<f64>) -> ReportRow {
        ReportRow {
            model: "quadratic".into(),
            p0: true,
            features: "rec,seg,intra".into(),
            pairs: 7,
            inversion_failures: 0,
            proportions: props,
            mean_abs_delta: 12.345,
            mean_signed_delta: -1.0,
        }
    }

    #[test]
    fn csv_layout() {
        let mut r = ErrorReport::new(DEFAULT_THRESHOLDS.to_vec()).unwrap();
        r.push(row(vec![0.8792, 0.7911, 0.6055])).unwrap();
        assert_eq!(
            r.to_csv(),
            "model,p0,features,pairs,inversion_failures,within_30,within_20,within_10,mean_abs_delta,mean_signed_delta\n\
             quadratic,yes,\"rec,seg,intra\",7,0,87.92,79.11,60.55,12.35,-1.00\n"
        );
        assert!(r.push(row(vec![1.0])).is_err());
        assert_eq!(r.proportion(0, 20.0), Some(0.7911));
        assert!(r.to_table().lines().count() == 3);
    }

    #[test]
    fn thresholds_validated() {
        assert!(ErrorReport::new(vec![]).is_err());
        assert!(ErrorReport::new(vec![10.0, 10.0]).is_err());
        assert!(ErrorReport::new(vec![-5.0]).is_err());
    }
}
