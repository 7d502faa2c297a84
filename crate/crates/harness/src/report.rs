//! Report rows and their CSV/JSON serializations.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::Format;

pub const CSV_HEADER: [&str; 7] = [
    "experiment",
    "param_json",
    "bound",
    "oracle",
    "oracle_ci",
    "verdict",
    "ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    /// Upper bound at or above the oracle.
    Dominates,
    /// Lower bound at or below the oracle.
    LowerBounds,
    /// Identity or zero-discrepancy check passed.
    Exact,
    /// The bound's hypotheses do not hold at this point; nothing is compared.
    PremiseFails,
    Violated,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Dominates => "dominates",
            Verdict::LowerBounds => "lower-bounds oracle",
            Verdict::Exact => "exact",
            Verdict::PremiseFails => "premise-fails",
            Verdict::Violated => "violated",
            Verdict::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Verdict::Dominates,
            Verdict::LowerBounds,
            Verdict::Exact,
            Verdict::PremiseFails,
            Verdict::Violated,
            Verdict::Error,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Violated | Verdict::Error)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a number came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ExactRational,
    Float,
    McEstimate,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ExactRational => "exact-rational",
            Provenance::Float => "float",
            Provenance::McEstimate => "mc-estimate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    /// Parameter snapshot; also carries `bound_kind`/`oracle_kind` labels and notes.
    pub params: Map<String, Value>,
    pub bound: Option<f64>,
    pub oracle: Option<f64>,
    pub oracle_ci: Option<f64>,
    pub verdict: Verdict,
    pub ms: u64,
}

impl ReportRow {
    pub fn new(experiment: &str, params: Map<String, Value>) -> Self {
        ReportRow {
            experiment: experiment.to_string(),
            params,
            bound: None,
            oracle: None,
            oracle_ci: None,
            verdict: Verdict::PremiseFails,
            ms: 0,
        }
    }

    pub fn param_json(&self) -> String {
        serde_json::to_string(&self.params).expect("maps of JSON values serialize")
    }

    pub fn param(&self, key: &str) -> Option<&Value> {
        self.params.get(key)
    }

    pub fn sort_key(&self) -> (String, String) {
        (self.experiment.clone(), self.param_json())
    }

    pub fn from_json(v: &Value) -> Result<Self, String> {
        let obj = v.as_object().ok_or("row must be an object")?;
        let num = |k: &str| -> Result<Option<f64>, String> {
            match obj.get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::Number(n)) => Ok(n.as_f64()),
                Some(Value::String(s)) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| format!("bad number in {k}")),
                Some(_) => Err(format!("bad number in {k}")),
            }
        };
        let params = match obj.get("param_json") {
            Some(Value::String(s)) => serde_json::from_str(s).map_err(|e| e.to_string())?,
            Some(Value::Object(m)) => m.clone(),
            _ => return Err("missing param_json".into()),
        };
        let verdict = obj
            .get("verdict")
            .and_then(Value::as_str)
            .ok_or("missing verdict")?;
        Ok(ReportRow {
            experiment: obj
                .get("experiment")
                .and_then(Value::as_str)
                .ok_or("missing experiment")?
                .to_string(),
            params,
            bound: num("bound")?,
            oracle: num("oracle")?,
            oracle_ci: num("oracle_ci")?,
            verdict: Verdict::parse(verdict)
                .ok_or_else(|| format!("unknown verdict {verdict:?}"))?,
            ms: obj.get("ms").and_then(Value::as_u64).unwrap_or(0),
        })
    }
}

/// 17 significant digits; empty for missing or non-finite values.
pub fn format_number(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        _ => String::new(),
    }
}

pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by_cached_key(ReportRow::sort_key);
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.param_json(),
            format_number(r.bound),
            format_number(r.oracle),
            format_number(r.oracle_ci),
            r.verdict.as_str().to_string(),
            r.ms.to_string(),
        ])?;
    }
    w.flush()
}

fn json_number(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        _ => "null".into(),
    }
}

pub fn write_json<W: Write>(rows: &[ReportRow], mut out: W) -> std::io::Result<()> {
    let s = |v: &str| serde_json::to_string(v).expect("strings serialize");
    writeln!(out, "[")?;
    for (i, r) in rows.iter().enumerate() {
        write!(
            out,
            "  {{\"experiment\": {}, \"param_json\": {}, \"bound\": {}, \"oracle\": {}, \"oracle_ci\": {}, \"verdict\": {}, \"ms\": {}}}",
            s(&r.experiment),
            s(&r.param_json()),
            json_number(r.bound),
            json_number(r.oracle),
            json_number(r.oracle_ci),
            s(r.verdict.as_str()),
            r.ms
        )?;
        writeln!(out, "{}", if i + 1 < rows.len() { "," } else { "" })?;
    }
    writeln!(out, "]")?;
    out.flush()
}

pub fn render(rows: &[ReportRow], format: Format) -> Vec<u8> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(rows, &mut buf),
        Format::Json => write_json(rows, &mut buf),
    }
    .expect("writing to memory cannot fail");
    buf
}

/// Writes the report to `path`, or stdout when `path` is `None`.
pub fn emit_report(rows: &[ReportRow], format: Format, path: Option<&Path>) -> Result<(), String> {
    let bytes = render(rows, format);
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| format!("cannot write report to {}: {e}", p.display())),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| format!("cannot write report to stdout: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ReportRow {
        let mut params = Map::new();
        params.insert("n".into(), Value::from(20));
        params.insert("note".into(), Value::from("a, \"quoted\" value"));
        ReportRow {
            experiment: "toy-chernoff".into(),
            params,
            bound: Some((-0.8333333333333334f64).exp()),
            oracle: Some(21700.0 / 1048576.0),
            oracle_ci: None,
            verdict: Verdict::Dominates,
            ms: 0,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let s = String::from_utf8(render(&[], Format::Csv)).unwrap();
        assert_eq!(
            s,
            "experiment,param_json,bound,oracle,oracle_ci,verdict,ms\n"
        );
    }

    #[test]
    fn csv_rows_have_seven_fields() {
        let bytes = render(&[row(), row()], Format::Csv);
        let mut rd = csv::Reader::from_reader(&bytes[..]);
        assert_eq!(rd.headers().unwrap().len(), 7);
        let mut count = 0;
        for rec in rd.records() {
            let rec = rec.unwrap();
            assert_eq!(rec.len(), 7);
            assert_eq!(&rec[3], "2.0694732666015625e-2");
            count += 1;
        }
        assert_eq!(count, 2);
    }

    #[test]
    fn json_round_trips() {
        let r = row();
        let bytes = render(std::slice::from_ref(&r), Format::Json);
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        let back = ReportRow::from_json(&v.as_array().unwrap()[0]).unwrap();
        assert_eq!(back, r);
        let empty: Value = serde_json::from_slice(&render(&[], Format::Json)).unwrap();
        assert_eq!(empty, Value::Array(vec![]));
    }

    #[test]
    fn numbers_carry_17_digits() {
        assert_eq!(format_number(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(format_number(None), "");
        assert_eq!(format_number(Some(f64::INFINITY)), "");
    }
}
