//! Per-iteration trace records and the CSV trace format.

use std::io::{Read, Write};

use thiserror::Error;

/// Exact header of every trace CSV.
pub const CSV_HEADER: [&str; 11] = [
    "k", "f_x", "f_w", "f_y", "grad_sq", "m_sq", "phi", "varphi", "bound", "resid_w", "resid_v",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected trace header: {0}")]
    Header(String),
    #[error("row {row}: bad value {value:?} in column {column}")]
    Value {
        row: usize,
        column: &'static str,
        value: String,
    },
}

/// State of one iteration `k`, recorded after step `k` has been taken.
///
/// Function values are evaluated exactly (never stochastic estimates).
/// `m_sq` is `‖m_k‖²` of the momentum produced at step `k`. `resid_w` and
/// `resid_v` are the auxiliary-sequence residuals of step `k`, already scaled
/// by `1 / (1 + ‖w_k‖)` (resp. `‖v_k‖`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub f_x: f64,
    pub f_w: Option<f64>,
    pub f_y: Option<f64>,
    pub grad_sq: f64,
    pub m_sq: f64,
    pub phi: Option<f64>,
    pub varphi: Option<f64>,
    pub bound: Option<f64>,
    pub resid_w: Option<f64>,
    pub resid_v: Option<f64>,
}

/// A run's trace plus the ergodic-average series `f(x̄_t)`, which has no CSV
/// column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub f_avg: Option<Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

impl TraceRow {
    fn to_record(&self) -> [String; 11] {
        [
            self.k.to_string(),
            format_value(self.f_x),
            format_opt(self.f_w),
            format_opt(self.f_y),
            format_value(self.grad_sq),
            format_value(self.m_sq),
            format_opt(self.phi),
            format_opt(self.varphi),
            format_opt(self.bound),
            format_opt(self.resid_w),
            format_opt(self.resid_v),
        ]
    }
}

/// Append-only CSV writer; the header is written on construction.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> Result<Self, TraceError> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(CSV_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write_row(&mut self, row: &TraceRow) -> Result<(), TraceError> {
        self.inner.write_record(row.to_record())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), TraceError> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, TraceError> {
        self.inner
            .into_inner()
            .map_err(|e| TraceError::Io(e.into_error()))
    }
}

pub fn write_csv<W: Write>(sink: W, rows: &[TraceRow]) -> Result<(), TraceError> {
    let mut w = TraceWriter::new(sink)?;
    for row in rows {
        w.write_row(row)?;
    }
    w.flush()
}

/// Parse a trace CSV, rejecting any header other than [`CSV_HEADER`].
pub fn read_csv<R: Read>(source: R) -> Result<Vec<TraceRow>, TraceError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(TraceError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let req = |col: usize| -> Result<f64, TraceError> {
            field(col).parse().map_err(|_| TraceError::Value {
                row: i + 1,
                column: CSV_HEADER[col],
                value: field(col).to_string(),
            })
        };
        let opt = |col: usize| -> Result<Option<f64>, TraceError> {
            if field(col).is_empty() {
                Ok(None)
            } else {
                req(col).map(Some)
            }
        };
        let k = field(0).parse().map_err(|_| TraceError::Value {
            row: i + 1,
            column: "k",
            value: field(0).to_string(),
        })?;
        rows.push(TraceRow {
            k,
            f_x: req(1)?,
            f_w: opt(2)?,
            f_y: opt(3)?,
            grad_sq: req(4)?,
            m_sq: req(5)?,
            phi: opt(6)?,
            varphi: opt(7)?,
            bound: opt(8)?,
            resid_w: opt(9)?,
            resid_v: opt(10)?,
        });
    }
    Ok(rows)
}

/// Column-wise arithmetic mean over several traces, truncated to the shortest.
/// An optional column is averaged only where every trace has it.
pub fn mean_rows(traces: &[&[TraceRow]]) -> Vec<TraceRow> {
    let Some(len) = traces.iter().map(|t| t.len()).min() else {
        return Vec::new();
    };
    let n = traces.len() as f64;
    let mean = |vals: &mut dyn Iterator<Item = f64>| vals.sum::<f64>() / n;
    let mean_opt = |pick: &dyn Fn(&TraceRow) -> Option<f64>, i: usize| -> Option<f64> {
        let vals: Option<Vec<f64>> = traces.iter().map(|t| pick(&t[i])).collect();
        vals.map(|v| v.iter().sum::<f64>() / n)
    };
    (0..len)
        .map(|i| TraceRow {
            k: traces[0][i].k,
            f_x: mean(&mut traces.iter().map(|t| t[i].f_x)),
            f_w: mean_opt(&|r| r.f_w, i),
            f_y: mean_opt(&|r| r.f_y, i),
            grad_sq: mean(&mut traces.iter().map(|t| t[i].grad_sq)),
            m_sq: mean(&mut traces.iter().map(|t| t[i].m_sq)),
            phi: mean_opt(&|r| r.phi, i),
            varphi: mean_opt(&|r| r.varphi, i),
            bound: mean_opt(&|r| r.bound, i),
            resid_w: mean_opt(&|r| r.resid_w, i),
            resid_v: mean_opt(&|r| r.resid_v, i),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_row(k: usize) -> TraceRow {
        TraceRow {
            k,
            f_x: 0.1 + k as f64,
            f_w: Some(1.0 / 3.0),
            f_y: None,
            grad_sq: 2.5,
            m_sq: 1e-300,
            phi: None,
            varphi: Some(-0.0),
            bound: Some(7.0),
            resid_w: None,
            resid_v: Some(1e-17),
        }
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[sample_row(1)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "k,f_x,f_w,f_y,grad_sq,m_sq,phi,varphi,bound,resid_w,resid_v");
    }

    #[test]
    fn absent_optionals_are_empty_fields() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[sample_row(3)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[3], "");
        assert_eq!(fields[6], "");
        assert_eq!(fields[9], "");
        assert_eq!(fields[1], "3.1000000000000001e0");
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "k,f_x\n1,2\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(TraceError::Header(_))));
    }

    #[test]
    fn mean_of_rows() {
        let a = vec![sample_row(1), sample_row(2)];
        let mut b = vec![sample_row(1)];
        b[0].f_x = 3.0;
        b[0].f_y = Some(1.0);
        let m = mean_rows(&[&a, &b]);
        assert_eq!(m.len(), 1);
        assert!((m[0].f_x - 0.5 * (1.1 + 3.0)).abs() < 1e-15);
        assert_eq!(m[0].f_y, None);
        assert_eq!(m[0].f_w, Some(1.0 / 3.0));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(
            vals in proptest::collection::vec(-1e300f64..1e300, 4),
            k in 1usize..1_000_000,
            present in any::<bool>(),
        ) {
            let row = TraceRow {
                k,
                f_x: vals[0],
                f_w: present.then_some(vals[1]),
                f_y: Some(vals[2]),
                grad_sq: vals[3].abs(),
                m_sq: vals[1].abs(),
                phi: None,
                varphi: present.then_some(vals[3]),
                bound: None,
                resid_w: Some(vals[0] * 1e-10),
                resid_v: None,
            };
            let mut buf = Vec::new();
            write_csv(&mut buf, std::slice::from_ref(&row)).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, vec![row]);
        }
    }
}
