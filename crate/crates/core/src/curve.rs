//! CSV and JSON serialization of probability curves.
//!
//! CSV layout: `t,p,std_err,method`, one row per grid point, times in units
//! of the inverse decay rate. Floats use the shortest round-trip formatting,
//! so identical runs produce byte-identical files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Method, ProbabilityCurve};

pub fn to_csv(curve: &ProbabilityCurve) -> String {
    let mut out = String::from("t,p,std_err,method\n");
    for i in 0..curve.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            curve.times[i], curve.values[i], curve.std_errors[i], curve.method
        ));
    }
    out
}

pub fn from_csv(text: &str) -> Result<ProbabilityCurve> {
    let mut lines = text.lines();
    match lines.next() {
        Some("t,p,std_err,method") => {}
        _ => return Err(Error::InvalidInput("bad curve CSV header".into())),
    }
    let (mut times, mut values, mut errs) = (Vec::new(), Vec::new(), Vec::new());
    let mut method = None;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::InvalidInput(format!("bad curve CSV row: {line}")));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad float: {s}")))
        };
        times.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
        errs.push(parse(cols[2])?);
        let m = match cols[3] {
            "closed" => Method::ClosedForm,
            "quadrature" => Method::Quadrature,
            "mc" => Method::MonteCarlo,
            "oracle" => Method::Oracle,
            "asymptotic" => Method::Asymptotic,
            "coherent" => Method::CoherentAverage,
            other => return Err(Error::InvalidInput(format!("unknown method: {other}"))),
        };
        if *method.get_or_insert(m) != m {
            return Err(Error::InvalidInput("mixed methods in curve CSV".into()));
        }
    }
    let method = method.ok_or_else(|| Error::InvalidInput("empty curve CSV".into()))?;
    Ok(ProbabilityCurve::new(times, values, errs, method))
}

/// Curve plus arbitrary run metadata, for the JSON sidecar format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveDocument {
    pub curve: ProbabilityCurve,
    pub metadata: serde_json::Value,
}

pub fn to_json(doc: &CurveDocument) -> Result<String> {
    serde_json::to_string_pretty(doc).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn from_json(text: &str) -> Result<CurveDocument> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let c = ProbabilityCurve::new(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.1234567890123, 0.25],
            vec![0.0, 1e-4, 2e-4],
            Method::MonteCarlo,
        );
        let text = to_csv(&c);
        let back = from_csv(&text).unwrap();
        assert_eq!(c, back);
        // byte-identical on re-serialization
        assert_eq!(text, to_csv(&back));
    }

    #[test]
    fn json_round_trip() {
        let c = ProbabilityCurve::new(vec![0.0, 1.0], vec![0.0, 0.5], vec![0.0, 0.0], Method::Oracle);
        let doc = CurveDocument {
            curve: c,
            metadata: serde_json::json!({"seed": 7, "samples": 100}),
        };
        let text = to_json(&doc).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(doc.curve, back.curve);
        assert_eq!(doc.metadata, back.metadata);
    }
}
