//! CSV and JSON emission. Output depends only on its inputs, so reruns are
//! byte-identical on one platform.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::characteristics::{CharPath, RiccatiState};
use crate::error::{Error, Result};
use crate::field::TimeSeries;
use crate::lifespan::{ScalingFit, SweepRow};

/// `v` with `digits` significant digits in scientific notation.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let d = digits.clamp(1, 17);
    format!("{:.*e}", d - 1, v)
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |v| format_sig(v, digits))
}

struct Csv {
    out: String,
    digits: usize,
}

impl Csv {
    fn new(header: &[&str], digits: usize) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Csv { out, digits }
    }

    fn row(&mut self, cells: &[String]) {
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    fn num(&self, v: f64) -> String {
        format_sig(v, self.digits)
    }
}

pub fn timeseries_csv(series: &TimeSeries, digits: usize) -> String {
    let mut csv = Csv::new(&TimeSeries::COLUMNS, digits);
    for r in &series.rows {
        let cells = vec![
            csv.num(r.t),
            csv.num(r.min_u),
            csv.num(r.max_u),
            csv.num(r.max_abs_rx),
            csv.num(r.max_abs_sx),
            csv.num(r.max_abs_ux),
            csv.num(r.max_abs_vx),
            opt(r.phi_region, digits),
        ];
        csv.row(&cells);
    }
    csv.out
}

pub const PATH_COLUMNS: [&str; 9] = ["t", "x", "u", "c", "r", "s", "a", "A", "Q_or_Y"];

/// One row per path sample; `Q_or_Y` is empty where the Riccati integration
/// did not reach the sample.
pub fn path_csv(path: &CharPath, riccati: Option<&RiccatiState>, digits: usize) -> String {
    let mut csv = Csv::new(&PATH_COLUMNS, digits);
    for (k, p) in path.samples.iter().enumerate() {
        let q = riccati.and_then(|st| st.history.get(k)).map(|&(_, v)| v);
        let cells = vec![
            csv.num(p.t),
            csv.num(p.x),
            csv.num(p.u),
            csv.num(p.c),
            csv.num(p.r),
            csv.num(p.s),
            csv.num(p.a),
            csv.num(p.big_a),
            opt(q, digits),
        ];
        csv.row(&cells);
    }
    csv.out
}

pub const SWEEP_COLUMNS: [&str; 4] = ["epsilon", "t_stop", "t_star", "stopped_cause"];

pub fn sweep_csv(rows: &[SweepRow], digits: usize) -> String {
    let mut csv = Csv::new(&SWEEP_COLUMNS, digits);
    for r in rows {
        let cells = vec![
            csv.num(r.epsilon),
            csv.num(r.t_stop),
            opt(r.t_star, digits),
            r.stopped_cause.as_str().to_string(),
        ];
        csv.row(&cells);
    }
    csv.out
}

/// The public summary of a scaling fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub model: &'static str,
    pub exponent_or_rate: f64,
    pub r_squared: f64,
    pub rows_used: usize,
}

impl From<&ScalingFit> for FitSummary {
    fn from(f: &ScalingFit) -> Self {
        FitSummary {
            model: match f.model {
                crate::lifespan::ScalingModel::Power => "power",
                crate::lifespan::ScalingModel::Exponential => "exponential",
            },
            exponent_or_rate: f.exponent_or_rate,
            r_squared: f.r_squared,
            rows_used: f.rows_used,
        }
    }
}

/// Pretty JSON with keys in declaration order and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParameter(format!("cannot serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io)?;
        }
    }
    fs::write(path, contents).map_err(io)
}

/// Header line plus one `key,value` line per entry, for small tables.
pub fn key_value_csv(pairs: &[(&str, f64)], digits: usize) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        let _ = writeln!(out, "{k},{}", format_sig(*v, digits));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{StopCause, TimeSeriesRow};

    fn series() -> TimeSeries {
        let row = |t: f64| TimeSeriesRow {
            t,
            min_u: 0.987654321012345,
            max_u: 1.0123,
            max_abs_rx: 0.0,
            max_abs_sx: 0.1 + t,
            max_abs_ux: 1e-20,
            max_abs_vx: 3.0,
            phi_region: if t > 0.0 { Some(0.25) } else { None },
        };
        TimeSeries {
            rows: vec![row(0.0), row(0.5)],
        }
    }

    #[test]
    fn sig_digits() {
        assert_eq!(format_sig(0.1, 12), "1.00000000000e-1");
        assert_eq!(format_sig(-1234.5678, 6), "-1.23457e3");
        assert_eq!(format_sig(0.0, 3), "0.00e0");
        assert_eq!(format_sig(f64::NAN, 3), "nan");
    }

    #[test]
    fn timeseries_header_and_precision() {
        let a = timeseries_csv(&series(), 12);
        let b = timeseries_csv(&series(), 6);
        let header = a.lines().next().unwrap();
        assert_eq!(
            header,
            "t,min_u,max_u,max_abs_rx,max_abs_sx,max_abs_ux,max_abs_vx,phi_region"
        );
        assert_eq!(b.lines().next().unwrap(), header);
        assert!(a.contains("9.87654321012e-1"));
        assert!(b.contains("9.87654e-1"));
        // missing phi is an empty trailing cell
        assert!(a.lines().nth(1).unwrap().ends_with(','));
        assert_eq!(a, timeseries_csv(&series(), 12));
    }

    #[test]
    fn empty_sweep_is_header_only() {
        assert_eq!(sweep_csv(&[], 12), "epsilon,t_stop,t_star,stopped_cause\n");
        let row = SweepRow {
            epsilon: 0.1,
            t_stop: 5.0,
            t_star: None,
            stopped_cause: StopCause::Horizon,
            phi_max_ratio: None,
            phi_max: 0.0,
            inside_region: None,
            nx: 3,
            steps: 1,
        };
        let s = sweep_csv(&[row], 4);
        assert_eq!(s.lines().nth(1).unwrap(), "1.000e-1,5.000e0,,horizon");
    }

    #[test]
    fn write_reports_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/c.csv");
        write_file(&p, "x\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "x\n");
        let blocked = p.join("d.csv");
        let err = write_file(&blocked, "x").unwrap_err();
        assert!(matches!(err, Error::Io { ref path, .. } if path.ends_with("d.csv")));
    }
}
