//! Tables and SVG figures from saved run results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::{PairFile, RunResult};

/// `eps_lo,eps_hi,entropy_lb,symbols`, sorted by interval.
pub fn csv_table(results: &[RunResult]) -> String {
    let mut rows: Vec<&RunResult> = results.iter().collect();
    rows.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal));
    let mut s = String::from("eps_lo,eps_hi,entropy_lb,symbols\n");
    for r in rows {
        let sym = if r.ok { r.symbols_after } else { 0 };
        let lb = if r.ok { r.entropy_lb_str.as_str() } else { "0.000000000000" };
        let _ = writeln!(s, "{},{},{},{}", r.eps_lo, r.eps_hi, lb, sym);
    }
    s
}

fn key(r: &RunResult) -> (f64, f64) {
    (r.eps_lo.parse().unwrap_or(f64::NAN), r.eps_hi.parse().unwrap_or(f64::NAN))
}

/// Step plot of the bounds against ε.
pub fn entropy_svg(results: &[RunResult]) -> String {
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let pts: Vec<(f64, f64, f64)> = results
        .iter()
        .filter(|r| r.ok)
        .map(|r| {
            let (a, b) = key(r);
            (a, b, r.entropy_lb)
        })
        .collect();
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let ymax = pts.iter().map(|p| p.2).fold(0.0, f64::max).max(1e-3);
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let sx = |x: f64| pad + (x - xmin) / span * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - y / ymax * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(
        s,
        r#"<path d="M {pad} {:.3} L {:.3} {:.3}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad,
        h - pad
    );
    let _ = writeln!(s, r#"<path d="M {pad} {:.3} L {pad} {pad}" stroke="black" fill="none"/>"#, h - pad);
    for &(a, b, v) in &pts {
        let (x0, x1) = if b > a { (sx(a), sx(b)) } else { (sx(a) - 1.0, sx(a) + 1.0) };
        let _ = writeln!(
            s,
            r#"<path d="M {x0:.3} {y:.3} L {x1:.3} {y:.3}" stroke="steelblue" stroke-width="2" fill="none"/>"#,
            y = sy(v)
        );
    }
    let _ = writeln!(s, r#"<text x="{pad}" y="{:.0}" font-size="12">eps</text>"#, h - 10.0);
    let _ = writeln!(s, r#"<text x="4" y="{pad}" font-size="12">{ymax:.4}</text>"#);
    s.push_str("</svg>\n");
    s
}

/// One rectangle per box of `P1`; exit boxes and core boxes get different fills.
pub fn pair_svg(p: &PairFile) -> String {
    let side = p.side.max(1) as f64;
    let px = (800.0 / side).max(1.0);
    let total = side * px;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#);
    let mut exit = p.p0.clone();
    exit.sort_unstable();
    for &(i, j) in &p.p1 {
        let fill = if exit.binary_search(&(i, j)).is_ok() { "#ee6677" } else { "#4477aa" };
        let (x, y) = (i as f64 * px, (side - 1.0 - j as f64) * px);
        let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{px}" height="{px}" fill="{fill}"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

fn find_named(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_named(&p, name, out)?;
        } else if p.file_name().is_some_and(|n| n == name) {
            out.push(p);
        }
    }
    Ok(())
}

/// Files written by [`cmd_report`].
#[derive(Debug)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub plot: PathBuf,
    pub pairs: Vec<PathBuf>,
}

/// Collects every `result.json` below `dir` and writes `entropy.csv`,
/// `entropy.svg` and a `pair.svg` beside each saved pair.
pub fn cmd_report(dir: &Path) -> Result<ReportFiles> {
    let mut found = Vec::new();
    find_named(dir, "result.json", &mut found)?;
    if found.is_empty() {
        return Err(Error::Config(format!("no results under {}", dir.display())));
    }
    let results: Vec<RunResult> =
        found.iter().map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?)).collect::<Result<_>>()?;
    let csv = dir.join("entropy.csv");
    std::fs::write(&csv, csv_table(&results))?;
    let plot = dir.join("entropy.svg");
    std::fs::write(&plot, entropy_svg(&results))?;
    let mut pair_files = Vec::new();
    find_named(dir, "pair.json", &mut pair_files)?;
    let mut pairs = Vec::new();
    for p in pair_files {
        let pf: PairFile = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
        let out = p.with_file_name("pair.svg");
        std::fs::write(&out, pair_svg(&pf))?;
        pairs.push(out);
    }
    Ok(ReportFiles { csv, plot, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(lo: &str, hi: &str, lb: &str, sym: usize) -> RunResult {
        RunResult {
            eps_lo: lo.into(),
            eps_hi: hi.into(),
            entropy_lb: lb.parse().unwrap(),
            entropy_lb_str: lb.into(),
            symbols_after: sym,
            ok: true,
            ..Default::default()
        }
    }

    #[test]
    fn csv_is_sorted_and_fixed() {
        let r = vec![res("1.995", "2.000", "0.400000000000", 25), res("1.990", "1.995", "0.390000000000", 20)];
        assert_eq!(
            csv_table(&r),
            "eps_lo,eps_hi,entropy_lb,symbols\n1.990,1.995,0.390000000000,20\n1.995,2.000,0.400000000000,25\n"
        );
    }

    #[test]
    fn pair_plot_has_one_rect_per_box() {
        let p = PairFile { depth: 2, side: 4, torus: false, root: [0.0, 1.0, 0.0, 1.0], p1: vec![(0, 0), (1, 0), (2, 3)], p0: vec![(2, 3)] };
        let s = pair_svg(&p);
        assert_eq!(s.matches("<rect").count(), 3);
        assert_eq!(s.matches("#ee6677").count(), 1);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        assert!(cmd_report(d.path()).is_err());
    }
}
