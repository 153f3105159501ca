//! CSV tables and SVG convergence plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ConvergenceTable, Norm, Row};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    domain: String,
    eps: f64,
    sigma: f64,
    p: usize,
    #[serde(rename = "N")]
    n: usize,
    error: f64,
    iters: usize,
    seconds: f64,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::Input(format!("csv: {k:?}")),
    }
}

/// CSV text with header `domain,eps,sigma,p,N,error,iters,seconds`.
pub fn table_csv(tables: &[ConvergenceTable]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["domain", "eps", "sigma", "p", "N", "error", "iters", "seconds"]).map_err(csv_err)?;
    for t in tables {
        for r in &t.rows {
            w.serialize(Record {
                domain: t.domain.clone(),
                eps: t.eps,
                sigma: t.sigma,
                p: r.p,
                n: r.n,
                error: r.error,
                iters: r.iterations,
                seconds: r.seconds,
            })
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(tables: &[ConvergenceTable], path: &Path) -> Result<()> {
    std::fs::write(path, table_csv(tables)?)?;
    Ok(())
}

/// Groups CSV rows into tables by `(domain, eps, sigma)` in order of first
/// appearance. Columns not stored in the CSV get neutral values.
pub fn read_csv(text: &str) -> Result<Vec<ConvergenceTable>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut tables: Vec<ConvergenceTable> = Vec::new();
    for rec in rdr.deserialize() {
        let r: Record = rec.map_err(csv_err)?;
        let row = Row {
            p: r.p,
            layers: r.p,
            elements: 0,
            n: r.n,
            error: r.error,
            interp_error: None,
            iterations: r.iters,
            seconds: r.seconds,
        };
        match tables
            .iter_mut()
            .find(|t| t.domain == r.domain && t.eps == r.eps && t.sigma == r.sigma)
        {
            Some(t) => t.rows.push(row),
            None => tables.push(ConvergenceTable {
                domain: r.domain,
                eps: r.eps,
                sigma: r.sigma,
                norm: Norm::Energy,
                rows: vec![row],
            }),
        }
    }
    Ok(tables)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// `log₁₀ error` against `p`, one polyline per table.
pub fn convergence_svg(tables: &[ConvergenceTable]) -> String {
    let (w, h, m) = (640.0, 420.0, 50.0);
    let pts = tables.iter().flat_map(|t| t.rows.iter().filter(|r| r.error > 0.0));
    let (mut pmin, mut pmax, mut lmin, mut lmax) = (usize::MAX, 0, f64::INFINITY, f64::NEG_INFINITY);
    for r in pts {
        pmin = pmin.min(r.p);
        pmax = pmax.max(r.p);
        lmin = lmin.min(r.error.log10());
        lmax = lmax.max(r.error.log10());
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    if pmin > pmax {
        s.push_str("</svg>\n");
        return s;
    }
    let (lmin, lmax) = (lmin.floor(), lmax.ceil().max(lmin.floor() + 1.0));
    let span_p = (pmax - pmin).max(1) as f64;
    let tx = |p: usize| m + (p - pmin) as f64 / span_p * (w - 2.0 * m);
    let ty = |l: f64| h - m - (l - lmin) / (lmax - lmin) * (h - 2.0 * m);
    let _ = writeln!(
        s,
        "<path d=\"M{m} {m} V{:.1} H{:.1}\" fill=\"none\" stroke=\"black\"/>",
        h - m,
        w - m
    );
    for p in pmin..=pmax {
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{p}</text>", tx(p), h - m + 18.0);
    }
    for k in lmin as i32..=lmax as i32 {
        let y = ty(k as f64);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">1e{k}</text>", m - 6.0, y + 4.0);
        let _ = writeln!(s, "<line x1=\"{m}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>", w - m);
    }
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">p</text>", w / 2.0, h - 10.0);
    for (i, t) in tables.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> = t
            .rows
            .iter()
            .filter(|r| r.error > 0.0)
            .map(|r| format!("{:.1},{:.1}", tx(r.p), ty(r.error.log10())))
            .collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\"/>", pts.join(" "));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{c}\">{} eps={:e}</text>",
            w - m - 150.0,
            m + 16.0 * (i as f64 + 1.0),
            t.domain,
            t.eps
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<out>/<domain>.csv` and `<out>/<domain>_convergence.svg`.
pub fn write_outputs(tables: &[ConvergenceTable], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let name = tables.first().map_or("study".to_string(), |t| t.domain.clone());
    let csv = out.join(format!("{name}.csv"));
    let svg = out.join(format!("{name}_convergence.svg"));
    write_csv(tables, &csv)?;
    std::fs::write(&svg, convergence_svg(tables))?;
    Ok(vec![csv, svg])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize) -> ConvergenceTable {
        ConvergenceTable {
            domain: "square".into(),
            eps: 0.01,
            sigma: 0.25,
            norm: Norm::Energy,
            rows: (1..=n)
                .map(|p| Row {
                    p,
                    layers: p,
                    elements: 4 * p,
                    n: 10 * p,
                    error: 0.5f64.powi(p as i32),
                    interp_error: None,
                    iterations: p,
                    seconds: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let s = table_csv(&[]).unwrap();
        assert_eq!(s, "domain,eps,sigma,p,N,error,iters,seconds\n");
    }

    #[test]
    fn three_rows_four_lines_round_trip() {
        let t = table(3);
        let s = table_csv(std::slice::from_ref(&t)).unwrap();
        assert_eq!(s.lines().count(), 4);
        assert_eq!(s.lines().nth(1).unwrap(), "square,0.01,0.25,1,10,0.5,1,0.0");
        let back = read_csv(&s).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].rows.iter().map(|r| r.error).collect::<Vec<_>>(), vec![0.5, 0.25, 0.125]);
        assert_eq!(table_csv(&back).unwrap(), s);
    }

    #[test]
    fn plot_has_one_polyline_per_table() {
        let mut b = table(4);
        b.eps = 1e-4;
        let svg = convergence_svg(&[table(4), b]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(convergence_svg(&[table(4)]), convergence_svg(&[table(4)]));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("x.csv");
        assert!(matches!(write_csv(&[table(2)], &bad), Err(Error::Io(_))));
    }
}
