//! Deterministic CSV and SVG emission.
//!
//! Every CSV starts with a comment line recording the run parameters and a
//! header row naming the columns. Floats are written with 17 significant
//! digits so that re-reading them reproduces the exact binary values.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::assembly::GalerkinPair;
use crate::error::{Error, Result};

/// Version string recorded in every output file.
pub fn version() -> String {
    format!("fucik-lab-v{}", env!("CARGO_PKG_VERSION"))
}

/// 17-significant-digit decimal rendering (round-trips f64 exactly).
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// The standard metadata comment line for a run.
pub fn metadata_comment(gp: &GalerkinPair<f64>) -> String {
    let domain = gp
        .mesh()
        .domain()
        .intervals()
        .iter()
        .map(|&(a, b)| format!("[{a},{b}]"))
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "# s={} lambda={} N={} domain={} version={}",
        fmt_f(gp.kernel().s()),
        fmt_f(gp.kernel().lambda()),
        gp.mesh().elements().len(),
        domain,
        version()
    )
}

/// Write a CSV file: one comment line, a header row, then data rows.
pub fn write_csv(
    path: &Path,
    comment: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    out.push_str(comment);
    out.push('\n');
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read back a curve CSV and return `(p, alpha, beta)` rows. Used to feed a
/// previously traced curve point into the nonresonance solver.
pub fn read_curve_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut cols: Option<(usize, usize, usize)> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match cols {
            None => {
                let find = |name: &str| {
                    fields
                        .iter()
                        .position(|&f| f == name)
                        .ok_or_else(|| Error::Config {
                            key: "f.curve_csv".into(),
                            msg: format!("{}: missing column `{name}`", path.display()),
                        })
                };
                cols = Some((find("p")?, find("alpha")?, find("beta")?));
            }
            Some((ip, ia, ib)) => {
                let get = |i: usize| -> Result<f64> {
                    fields
                        .get(i)
                        .and_then(|f| f.parse::<f64>().ok())
                        .ok_or_else(|| Error::Config {
                            key: "f.curve_csv".into(),
                            msg: format!("{}: malformed data row", path.display()),
                        })
                };
                rows.push((get(ip)?, get(ia)?, get(ib)?));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Config {
            key: "f.curve_csv".into(),
            msg: format!("{}: no data rows", path.display()),
        });
    }
    Ok(rows)
}

fn svg_path(points: &[(f64, f64)], map: impl Fn(f64, f64) -> (f64, f64)) -> String {
    let mut d = String::new();
    for (k, &(x, y)) in points.iter().enumerate() {
        let (px, py) = map(x, y);
        d.push_str(if k == 0 { "M" } else { " L" });
        d.push_str(&format!("{px:.2},{py:.2}"));
    }
    d
}

/// Render the traced curve in the `(alpha, beta)` plane as a self-contained
/// static SVG: both branches, the trivial lines `alpha = lambda_1` and
/// `beta = lambda_1` dashed, the diagonal dotted, and markers at
/// `(lambda_1, lambda_1)` and `(lambda_2, lambda_2)`.
pub fn curve_svg(
    main: &[(f64, f64)],
    mirror: &[(f64, f64)],
    lambda1: f64,
    lambda2: f64,
) -> String {
    let (w, h) = (640.0f64, 640.0f64);
    let margin = 60.0f64;
    let mut hi = lambda2 * 1.1;
    for &(a, b) in main.iter().chain(mirror) {
        hi = hi.max(a).max(b);
    }
    hi *= 1.05;
    let lo = 0.0f64;
    let map = |x: f64, y: f64| {
        let px = margin + (x - lo) / (hi - lo) * (w - 2.0 * margin);
        let py = h - margin - (y - lo) / (hi - lo) * (h - 2.0 * margin);
        (px, py)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes.
    let (ox, oy) = map(lo, lo);
    let (xe, _) = map(hi, lo);
    let (_, ye) = map(lo, hi);
    svg.push_str(&format!(
        "<line x1=\"{ox:.2}\" y1=\"{oy:.2}\" x2=\"{xe:.2}\" y2=\"{oy:.2}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{ox:.2}\" y1=\"{oy:.2}\" x2=\"{ox:.2}\" y2=\"{ye:.2}\" stroke=\"black\"/>\n"
    ));
    // Ticks every ~hi/5, rounded to 2 significant figures.
    let step = {
        let raw = hi / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        (raw / mag).round() * mag
    };
    let mut t = step;
    while t < hi {
        let (px, py) = map(t, lo);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{py:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            py + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{t:.3}</text>\n",
            py + 18.0
        ));
        let (qx, qy) = map(lo, t);
        svg.push_str(&format!(
            "<line x1=\"{qx:.2}\" y1=\"{qy:.2}\" x2=\"{:.2}\" y2=\"{qy:.2}\" stroke=\"black\"/>\n",
            qx - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{t:.3}</text>\n",
            qx - 8.0,
            qy + 4.0
        ));
        t += step;
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">alpha</text>\n",
        (ox + xe) / 2.0,
        h - 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">beta</text>\n",
        (oy + ye) / 2.0,
        (oy + ye) / 2.0
    ));

    // Diagonal, dotted.
    let (dx0, dy0) = map(lo, lo);
    let (dx1, dy1) = map(hi, hi);
    svg.push_str(&format!(
        "<line x1=\"{dx0:.2}\" y1=\"{dy0:.2}\" x2=\"{dx1:.2}\" y2=\"{dy1:.2}\" stroke=\"gray\" stroke-dasharray=\"2,4\"/>\n"
    ));
    // Trivial lines, dashed.
    let (tx, _) = map(lambda1, lo);
    svg.push_str(&format!(
        "<line x1=\"{tx:.2}\" y1=\"{oy:.2}\" x2=\"{tx:.2}\" y2=\"{ye:.2}\" stroke=\"steelblue\" stroke-dasharray=\"6,4\"/>\n"
    ));
    let (_, ty) = map(lo, lambda1);
    svg.push_str(&format!(
        "<line x1=\"{ox:.2}\" y1=\"{ty:.2}\" x2=\"{xe:.2}\" y2=\"{ty:.2}\" stroke=\"steelblue\" stroke-dasharray=\"6,4\"/>\n"
    ));

    // Branches.
    if main.len() >= 2 {
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"crimson\" stroke-width=\"1.6\"/>\n",
            svg_path(main, map)
        ));
    }
    if mirror.len() >= 2 {
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"darkorange\" stroke-width=\"1.6\"/>\n",
            svg_path(mirror, map)
        ));
    }

    // Eigenvalue markers on the diagonal.
    for (lam, label) in [(lambda1, "lambda_1"), (lambda2, "lambda_2")] {
        let (px, py) = map(lam, lam);
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3.5\" fill=\"black\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{label}</text>\n",
            px + 6.0,
            py - 6.0
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips() {
        for x in [1.0, -0.1, 9.734572150568e0, 1e-300, std::f64::consts::PI] {
            assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_write_and_curve_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let rows = vec![
            vec![fmt_f(0.0), fmt_f(16.0), fmt_f(16.0)],
            vec![fmt_f(1.0), fmt_f(17.2), fmt_f(16.2)],
        ];
        write_csv(&path, "# test", &["p", "alpha", "beta"], &rows).unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back, vec![(0.0, 16.0, 16.0), (1.0, 17.2, 16.2)]);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let main = vec![(16.0, 16.0), (17.0, 15.5), (18.0, 15.2)];
        let mirror: Vec<(f64, f64)> = main.iter().map(|&(a, b)| (b, a)).collect();
        let svg = curve_svg(&main, &mirror, 9.73, 16.0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
    }
}
