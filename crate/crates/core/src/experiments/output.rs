//! Long-format CSV rows and the per-run output directory.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 11] =
    ["scenario", "N", "xi", "t", "site", "sz", "abs_sx", "purity", "quality", "fidelity", "extra"];

/// One `(t, site)` record; absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRow {
    pub scenario: String,
    pub n: usize,
    pub xi: Option<f64>,
    pub t: Option<f64>,
    /// 1-based site index.
    pub site: Option<usize>,
    pub sz: Option<f64>,
    pub abs_sx: Option<f64>,
    pub purity: Option<f64>,
    pub quality: Option<f64>,
    pub fidelity: Option<f64>,
    pub extra: String,
}

/// 15 significant digits in scientific notation; `inf`/`-inf`/`nan` verbatim.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.14e}")
    } else {
        x.to_string()
    }
}

fn opt_real(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

impl ResultRow {
    pub fn new(scenario: &str, n: usize) -> Self {
        Self { scenario: scenario.to_string(), n, ..Self::default() }
    }

    fn fields(&self) -> [String; 11] {
        [
            self.scenario.clone(),
            self.n.to_string(),
            opt_real(self.xi),
            opt_real(self.t),
            self.site.map(|s| s.to_string()).unwrap_or_default(),
            opt_real(self.sz),
            opt_real(self.abs_sx),
            opt_real(self.purity),
            opt_real(self.quality),
            opt_real(self.fidelity),
            self.extra.clone(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Io(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len())));
        }
        let real = |i: usize| -> Result<Option<f64>> {
            let s = &rec[i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Io(format!("column {}: cannot parse '{s}'", CSV_HEADER[i])))
        };
        let int = |i: usize| -> Result<Option<usize>> {
            let s = &rec[i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Io(format!("column {}: cannot parse '{s}'", CSV_HEADER[i])))
        };
        Ok(Self {
            scenario: rec[0].to_string(),
            n: int(1)?.ok_or_else(|| Error::Io("column N is empty".into()))?,
            xi: real(2)?,
            t: real(3)?,
            site: int(4)?,
            sz: real(5)?,
            abs_sx: real(6)?,
            purity: real(7)?,
            quality: real(8)?,
            fidelity: real(9)?,
            extra: rec[10].to_string(),
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.fields()).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Io(format!("unexpected CSV header: {header:?}")));
    }
    r.records()
        .map(|rec| rec.map_err(csv_error).and_then(|rec| ResultRow::from_record(&rec)))
        .collect()
}

/// Writes `data.csv` and `summary.json` into `dir`, creating it.
pub fn write_run(dir: &Path, rows: &[ResultRow], summary: &serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(fs::File::create(dir.join("data.csv"))?, rows)?;
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opt_real_strategy() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![
            Just(None),
            Just(Some(f64::INFINITY)),
            (-1e6f64..1e6).prop_map(Some),
            (1e-300f64..1e-10).prop_map(Some),
        ]
    }

    prop_compose! {
        fn row_strategy()(
            scenario in "[a-z-]{1,10}",
            n in 1usize..40,
            xi in opt_real_strategy(),
            t in opt_real_strategy(),
            site in prop::option::of(1usize..40),
            sz in opt_real_strategy(),
            abs_sx in opt_real_strategy(),
            purity in opt_real_strategy(),
            quality in opt_real_strategy(),
            fidelity in opt_real_strategy(),
            extra in "[a-z=0-9., ]{0,12}",
        ) -> ResultRow {
            ResultRow { scenario, n, xi, t, site, sz, abs_sx, purity, quality, fidelity, extra }
        }
    }

    fn close(a: Option<f64>, b: Option<f64>) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) if x.is_infinite() => x == y,
            (Some(x), Some(y)) => (x - y).abs() <= 1e-14 * x.abs(),
            _ => false,
        }
    }

    proptest! {
        #[test]
        fn rows_round_trip(rows in prop::collection::vec(row_strategy(), 0..20)) {
            let mut buf = Vec::new();
            write_csv(&mut buf, &rows).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                prop_assert_eq!(&a.scenario, &b.scenario);
                prop_assert_eq!(a.n, b.n);
                prop_assert_eq!(a.site, b.site);
                prop_assert_eq!(&a.extra, &b.extra);
                for (x, y) in [(a.xi, b.xi), (a.t, b.t), (a.sz, b.sz), (a.abs_sx, b.abs_sx),
                               (a.purity, b.purity), (a.quality, b.quality), (a.fidelity, b.fidelity)] {
                    prop_assert!(close(x, y), "{:?} vs {:?}", x, y);
                }
            }
        }
    }

    #[test]
    fn header_and_precision() {
        let mut row = ResultRow::new("evolve", 3);
        row.sz = Some(0.5);
        row.t = Some(1.0 / 3.0);
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "scenario,N,xi,t,site,sz,abs_sx,purity,quality,fidelity,extra");
        let data = lines.next().unwrap();
        assert!(data.contains("3.33333333333333e-1"), "{data}");
        assert!(data.starts_with("evolve,3,,"));
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
