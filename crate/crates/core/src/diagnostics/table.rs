//! The diagnostics CSV: fixed header, one row per sample, empty cells for
//! quantities not computed at that row.

use std::io::{Read, Write};

use super::DiagnosticsRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 17] = [
    "t",
    "sup_phi",
    "inf_phi",
    "sup_phidot",
    "inf_phidot",
    "sup_trgH_hH",
    "inf_trhH_gH",
    "sup_trg_h",
    "min_ratio_H",
    "min_ratio_C",
    "osc_trace",
    "collapse_w",
    "collapse_z",
    "flow_residual",
    "psi_min",
    "psi_max",
    "R_weighted_min",
];

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn format_row(r: &DiagnosticsRow) -> Vec<String> {
    [
        Some(r.t),
        Some(r.sup_phi),
        Some(r.inf_phi),
        Some(r.sup_phidot),
        Some(r.inf_phidot),
        Some(r.sup_tr_gh_hh),
        Some(r.inf_tr_hh_gh),
        Some(r.sup_tr_g_h),
        Some(r.min_ratio_h),
        Some(r.min_ratio_c),
        Some(r.osc_trace),
        Some(r.collapse_w),
        Some(r.collapse_z),
        r.flow_residual,
        Some(r.psi_min),
        Some(r.psi_max),
        r.r_weighted_min,
    ]
    .into_iter()
    .map(cell)
    .collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[DiagnosticsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(format_row(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<DiagnosticsRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Config("unexpected diagnostics CSV header".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let opt = |k: usize| -> Result<Option<f64>> {
            let s = rec.get(k).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("row {}: bad number {s:?} in {}", line + 1, CSV_HEADER[k])))
        };
        let req = |k: usize| -> Result<f64> {
            opt(k)?.ok_or_else(|| Error::Config(format!("row {}: missing {}", line + 1, CSV_HEADER[k])))
        };
        rows.push(DiagnosticsRow {
            t: req(0)?,
            sup_phi: req(1)?,
            inf_phi: req(2)?,
            sup_phidot: req(3)?,
            inf_phidot: req(4)?,
            sup_tr_gh_hh: req(5)?,
            inf_tr_hh_gh: req(6)?,
            sup_tr_g_h: req(7)?,
            min_ratio_h: req(8)?,
            min_ratio_c: req(9)?,
            osc_trace: req(10)?,
            collapse_w: req(11)?,
            collapse_z: req(12)?,
            flow_residual: opt(13)?,
            psi_min: req(14)?,
            psi_max: req(15)?,
            r_weighted_min: opt(16)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, fr: Option<f64>) -> DiagnosticsRow {
        DiagnosticsRow {
            t,
            sup_phi: 0.1 + 0.2,
            inf_phi: -1e-300,
            sup_phidot: 1.0 / 3.0,
            inf_phidot: -0.0,
            sup_tr_gh_hh: 1.0,
            inf_tr_hh_gh: 1.0,
            sup_tr_g_h: 2.0,
            min_ratio_h: 1.0,
            min_ratio_c: 1.0,
            osc_trace: 0.0,
            collapse_w: 0.25,
            collapse_z: 1.5,
            flow_residual: fr,
            psi_min: 0.0,
            psi_max: 0.0,
            r_weighted_min: None,
        }
    }

    #[test]
    fn round_trip() {
        let rows = vec![row(0.0, None), row(0.5, Some(1e-9))];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,sup_phi,inf_phi,"));
        assert!(text.lines().nth(1).unwrap().ends_with(",0,0,"));
        assert_eq!(parse_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(parse_csv(&b"t,foo\n1,2\n"[..]).is_err());
    }
}
