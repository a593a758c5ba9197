//! CSV and JSON formats shared by the library and the command line.
//!
//! CSV numbers are written with 17 significant digits, which round-trips
//! every `f64` exactly.

use crate::error::{Error, Result};
use crate::tradeoff::TradeoffCurve;
use std::io::{Read, Write};

/// Scientific notation with 17 significant digits.
pub fn fmt_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `alpha,f` rows.
pub fn write_curve_csv<W: Write>(curve: &TradeoffCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "f"])?;
    for (a, v) in curve.points() {
        w.write_record([fmt_sig17(a), fmt_sig17(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `alpha,f,ci` rows for an estimated curve with a uniform band.
pub fn write_empirical_csv<W: Write>(curve: &TradeoffCurve, ci: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "f", "ci"])?;
    let ci = fmt_sig17(ci);
    for (a, v) in curve.points() {
        w.write_record([fmt_sig17(a), fmt_sig17(v), ci.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve written by [`write_curve_csv`] (extra columns are ignored)
/// and validates it.
pub fn read_curve_csv<R: Read>(input: R) -> Result<TradeoffCurve> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Domain(format!("curve CSV lacks a `{name}` column")))
    };
    let (ia, iv) = (col("alpha")?, col("f")?);
    let mut alphas = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("").trim();
            field
                .parse()
                .map_err(|_| Error::Domain(format!("bad number `{field}` in curve CSV")))
        };
        alphas.push(parse(ia)?);
        values.push(parse(iv)?);
    }
    TradeoffCurve::new(alphas, values)
}

/// One row of a privacy-curve table.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DeltaRow {
    pub eps: f64,
    pub delta: f64,
    pub uncertainty: f64,
}

/// One point of an ε(δ) curve.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpsRow {
    pub delta: f64,
    pub eps: f64,
}

/// Writes `eps,delta,uncertainty` rows.
pub fn write_delta_csv<W: Write>(rows: &[DeltaRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps", "delta", "uncertainty"])?;
    for r in rows {
        w.write_record([
            fmt_sig17(r.eps),
            fmt_sig17(r.delta),
            fmt_sig17(r.uncertainty),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tradeoff::{curve_of_gdp, GdpParam};

    #[test]
    fn curve_csv_round_trip_is_bit_exact() {
        let g = curve_of_gdp(GdpParam::new(0.961).unwrap(), 1001).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&g, &mut buf).unwrap();
        let back = read_curve_csv(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        assert!(String::from_utf8(buf).unwrap().starts_with("alpha,f\n"));
    }

    #[test]
    fn curve_json_round_trip_validates() {
        let g = curve_of_gdp(GdpParam::new(1.0).unwrap(), 101).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.starts_with("{\"alphas\":["));
        let back: TradeoffCurve = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"alphas":[0.0,0.5,1.0],"values":[0.5,0.5,0.0]}"#;
        assert!(serde_json::from_str::<TradeoffCurve>(bad).is_err());
    }

    #[test]
    fn read_rejects_garbage() {
        assert!(read_curve_csv("alpha,g\n0,1\n1,0\n".as_bytes()).is_err());
        assert!(read_curve_csv("alpha,f\n0,x\n1,0\n".as_bytes()).is_err());
        assert!(read_curve_csv("alpha,f\n0,1\n1,0\n".as_bytes()).is_ok());
    }

    #[test]
    fn sig17_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, 5e-324, -2.5] {
            assert_eq!(fmt_sig17(x).parse::<f64>().unwrap(), x);
        }
    }
}
