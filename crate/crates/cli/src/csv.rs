//! Deterministic CSV metrics: fixed column order, '.' decimal point, '\n'
//! line endings, six fractional digits. Identical rows serialize to
//! identical bytes on every platform.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario_id: String,
    pub d_ms: u64,
    pub completion_time_s: f64,
    pub normalized_t: f64,
    pub throughput_pre_bps: Option<f64>,
    pub throughput_post_bps: Option<f64>,
    pub handover_duration_s: Option<f64>,
    pub wan_bytes: Option<u64>,
    pub energy_j: Option<f64>,
}

pub const HEADER: &str = "scenario_id,d_ms,completion_time_s,normalized_t,throughput_pre_bps,throughput_post_bps,handover_duration_s,wan_bytes,energy_j";

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn opt_u(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn emit_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{},{},{},{},{}",
            r.scenario_id,
            r.d_ms,
            r.completion_time_s,
            r.normalized_t,
            opt_f(r.throughput_pre_bps),
            opt_f(r.throughput_post_bps),
            opt_f(r.handover_duration_s),
            opt_u(r.wan_bytes),
            opt_f(r.energy_j),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvParseError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for CsvParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "csv line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for CsvParseError {}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>, CsvParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        other => {
            return Err(CsvParseError {
                line: 1,
                message: format!("bad header: {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let err = |message: String| CsvParseError { line: line_no, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", fields.len())));
        }
        let f = |s: &str| -> Result<f64, CsvParseError> {
            s.parse().map_err(|_| err(format!("bad number {s:?}")))
        };
        let of = |s: &str| -> Result<Option<f64>, CsvParseError> {
            if s.is_empty() { Ok(None) } else { f(s).map(Some) }
        };
        let ou = |s: &str| -> Result<Option<u64>, CsvParseError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| err(format!("bad integer {s:?}")))
            }
        };
        rows.push(MetricsRow {
            scenario_id: fields[0].to_string(),
            d_ms: fields[1]
                .parse()
                .map_err(|_| err(format!("bad integer {:?}", fields[1])))?,
            completion_time_s: f(fields[2])?,
            normalized_t: f(fields[3])?,
            throughput_pre_bps: of(fields[4])?,
            throughput_post_bps: of(fields[5])?,
            handover_duration_s: of(fields[6])?,
            wan_bytes: ou(fields[7])?,
            energy_j: of(fields[8])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            scenario_id: "t".into(),
            d_ms: 500,
            completion_time_s: 88.125,
            normalized_t: 0.110156,
            throughput_pre_bps: Some(1_048_576.0),
            throughput_post_bps: None,
            handover_duration_s: Some(2.25),
            wan_bytes: Some(10_741_804),
            energy_j: None,
        }
    }

    #[test]
    fn zero_rows_is_a_header_only_file() {
        assert_eq!(emit_csv(&[]), format!("{HEADER}\n"));
    }

    #[test]
    fn four_rows_make_five_lines() {
        let rows = vec![row(); 4];
        let text = emit_csv(&rows);
        assert_eq!(text.lines().count(), 5);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn roundtrip_preserves_rows() {
        let rows = vec![row(); 3];
        let parsed = parse_csv(&emit_csv(&rows)).unwrap();
        for (a, b) in rows.iter().zip(&parsed) {
            assert_eq!(a.scenario_id, b.scenario_id);
            assert_eq!(a.d_ms, b.d_ms);
            assert!((a.completion_time_s - b.completion_time_s).abs() < 1e-6);
            assert_eq!(a.wan_bytes, b.wan_bytes);
            assert_eq!(a.throughput_post_bps, b.throughput_post_bps);
        }
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text = format!("{HEADER}\nx,1,2,3,,,,,\nx,notanumber,2,3,,,,,\n");
        let e = parse_csv(&text).unwrap_err();
        assert_eq!(e.line, 3);
    }
}
