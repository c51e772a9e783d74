use serde::{Deserialize, Serialize};

use super::{Metric, MetricReport};
use crate::error::{invalid, Result};

/// One evaluated (paradigm, language, split) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub paradigm: String,
    pub language: String,
    pub split: usize,
    pub report: MetricReport,
}

/// One CSV line. `split` reads `<language>:<split id>` or `<language>:Mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub split: String,
    pub paradigm: String,
    #[serde(rename = "UR")]
    pub ur: f64,
    #[serde(rename = "UR_lo")]
    pub ur_lo: f64,
    #[serde(rename = "UR_hi")]
    pub ur_hi: f64,
    #[serde(rename = "WR")]
    pub wr: f64,
    #[serde(rename = "WR_lo")]
    pub wr_lo: f64,
    #[serde(rename = "WR_hi")]
    pub wr_hi: f64,
    #[serde(rename = "UA")]
    pub ua: f64,
    #[serde(rename = "WA")]
    pub wa: f64,
}

impl CsvRow {
    fn from_report(split: String, paradigm: &str, r: &MetricReport) -> Self {
        let ci = |m: Metric| r.ci.get(&m).copied().unwrap_or((f64::NAN, f64::NAN));
        let (ur_lo, ur_hi) = ci(Metric::UR);
        let (wr_lo, wr_hi) = ci(Metric::WR);
        Self {
            split,
            paradigm: paradigm.to_string(),
            ur: r.ur,
            ur_lo,
            ur_hi,
            wr: r.wr,
            wr_lo,
            wr_hi,
            ua: r.ua,
            wa: r.wa,
        }
    }

    fn values(&self) -> [f64; 8] {
        [self.ur, self.ur_lo, self.ur_hi, self.wr, self.wr_lo, self.wr_hi, self.ua, self.wa]
    }

    fn mean_of(split: String, paradigm: &str, rows: &[CsvRow]) -> Self {
        let n = rows.len() as f64;
        let mut acc = [0.0; 8];
        for r in rows {
            acc.iter_mut().zip(r.values()).for_each(|(a, v)| *a += v);
        }
        let [ur, ur_lo, ur_hi, wr, wr_lo, wr_hi, ua, wa] = acc.map(|v| v / n);
        Self {
            split,
            paradigm: paradigm.to_string(),
            ur,
            ur_lo,
            ur_hi,
            wr,
            wr_lo,
            wr_hi,
            ua,
            wa,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub rows: Vec<CsvRow>,
    pub csv: String,
    pub text: String,
}

/// Lays out per-split reports grouped by paradigm and language, each group
/// followed by a Mean row (arithmetic mean of the group's split rows,
/// bounds included).
pub fn render_report(rows: &[ReportRow]) -> Result<RenderedReport> {
    if rows.is_empty() {
        return Err(invalid("nothing to report"));
    }
    let mut groups: Vec<((&str, &str), Vec<&ReportRow>)> = Vec::new();
    for r in rows {
        let key = (r.paradigm.as_str(), r.language.as_str());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }

    let mut out = Vec::new();
    for ((paradigm, language), members) in groups {
        let split_rows: Vec<CsvRow> = members
            .iter()
            .map(|r| CsvRow::from_report(format!("{language}:{}", r.split), paradigm, &r.report))
            .collect();
        let mean = CsvRow::mean_of(format!("{language}:Mean"), paradigm, &split_rows);
        out.extend(split_rows);
        out.push(mean);
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["split", "paradigm", "UR", "UR_lo", "UR_hi", "WR", "WR_lo", "WR_hi", "UA", "WA"])?;
    for r in &out {
        let mut rec = vec![r.split.clone(), r.paradigm.clone()];
        rec.extend(r.values().iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| invalid(e.to_string()))?)
        .expect("csv output is UTF-8");

    Ok(RenderedReport {
        text: text_table(&out),
        csv,
        rows: out,
    })
}

fn text_table(rows: &[CsvRow]) -> String {
    let header = ["paradigm", "split", "UR [lo, hi]", "WR [lo, hi]", "UA", "WA"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.paradigm.clone(),
                r.split.clone(),
                format!("{:.1} [{:.1}, {:.1}]", r.ur, r.ur_lo, r.ur_hi),
                format!("{:.1} [{:.1}, {:.1}]", r.wr, r.wr_lo, r.wr_hi),
                format!("{:.1}", r.ua),
                format!("{:.1}", r.wa),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |fields: &[&str]| -> String {
        let parts: Vec<String> = fields
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (f, &w))| if i < 2 { format!("{f:<w$}") } else { format!("{f:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut text = line(&header);
    text.push_str(&line(&widths.map(|w| "-".repeat(w)).each_ref().map(String::as_str)));
    for row in &cells {
        text.push_str(&line(&row.each_ref().map(String::as_str)));
    }
    text
}

/// Reads back a CSV produced by [`render_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, confusion};

    fn row(paradigm: &str, split: usize, preds: &[usize], labels: &[usize]) -> ReportRow {
        let report = compute_metrics(&confusion(preds, labels, 2).unwrap())
            .unwrap()
            .with_confidence_intervals(preds, labels, 200, 3)
            .unwrap();
        ReportRow {
            paradigm: paradigm.into(),
            language: "en".into(),
            split,
            report,
        }
    }

    #[test]
    fn single_report_mean_equals_row() {
        let r = render_report(&[row("ft-mono", 0, &[0, 1, 1, 0], &[0, 1, 0, 0])]).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[1].split, "en:Mean");
        assert_eq!(r.rows[0].values(), r.rows[1].values());
    }

    #[test]
    fn mean_row_and_csv_round_trip() {
        let rows = vec![
            row("mtkd-multi", 0, &[0, 1, 1, 0, 1], &[0, 1, 0, 0, 1]),
            row("mtkd-multi", 1, &[0, 0, 1, 1, 1], &[0, 1, 1, 1, 0]),
            row("ft-multi", 0, &[1, 1, 1, 0], &[0, 1, 1, 0]),
        ];
        let r = render_report(&rows).unwrap();
        assert_eq!(r.rows.len(), 5);
        let mean = &r.rows[2];
        assert_eq!(mean.split, "en:Mean");
        let expect = (r.rows[0].ur + r.rows[1].ur) / 2.0;
        assert!((mean.ur - expect).abs() < 1e-9);

        let parsed = parse_report_csv(&r.csv).unwrap();
        assert_eq!(parsed.len(), r.rows.len());
        for (a, b) in parsed.iter().zip(&r.rows) {
            assert_eq!(a.split, b.split);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 5e-7);
            }
        }
        assert!(r.text.lines().count() == 2 + r.rows.len());
        assert!(r.csv.starts_with("split,paradigm,UR,UR_lo,UR_hi,WR,WR_lo,WR_hi,UA,WA\n"));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(render_report(&[]).is_err());
    }
}
