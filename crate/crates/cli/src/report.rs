//! Summary table and RMSE charts built from `simulate` output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ssalt_core::Error;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "empty file".into(),
            })?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    msg: format!("expected {} fields, found {}", header.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str, path: &Path) -> Result<usize, Error> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("missing column '{name}'"),
        })
    }
}

fn num(s: &str, path: &Path, line: usize) -> Result<f64, Error> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("not a number: '{s}'"),
    })
}

/// Key of one study cell: (epsilon, target, beta), ordered numerically.
#[derive(Debug, Clone, PartialEq)]
struct Cell(f64, String, f64);

impl Eq for Cell {}

impl Ord for Cell {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0
            .total_cmp(&o.0)
            .then(self.1.cmp(&o.1))
            .then(self.2.total_cmp(&o.2))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

pub fn cmd_report(dir: &Path) -> Result<(), Error> {
    let rmse_path = dir.join("rmse.csv");
    let cov_path = dir.join("coverage.csv");
    let rmse = Table::read(&rmse_path)?;
    let cov = Table::read(&cov_path)?;

    // quantity -> cell -> rmse
    let mut by_quantity: BTreeMap<String, BTreeMap<Cell, f64>> = BTreeMap::new();
    let mut quantities: Vec<String> = Vec::new();
    {
        let [e, t, b, q, r] = ["epsilon", "target", "beta", "quantity", "rmse"].map(|c| rmse.col(c, &rmse_path));
        let (e, t, b, q, r) = (e?, t?, b?, q?, r?);
        for (i, row) in rmse.rows.iter().enumerate() {
            let line = i + 2;
            let cell = Cell(
                num(&row[e], &rmse_path, line)?,
                row[t].clone(),
                num(&row[b], &rmse_path, line)?,
            );
            if !quantities.contains(&row[q]) {
                quantities.push(row[q].clone());
            }
            by_quantity
                .entry(row[q].clone())
                .or_default()
                .insert(cell, num(&row[r], &rmse_path, line)?);
        }
    }

    // (cell, quantity) -> direct coverage
    let mut coverage: BTreeMap<(Cell, String), f64> = BTreeMap::new();
    {
        let [e, t, b, q, f, c] =
            ["epsilon", "target", "beta", "quantity", "form", "coverage"].map(|c| cov.col(c, &cov_path));
        let (e, t, b, q, f, c) = (e?, t?, b?, q?, f?, c?);
        for (i, row) in cov.rows.iter().enumerate() {
            if row[f] != "direct" {
                continue;
            }
            let line = i + 2;
            let cell = Cell(
                num(&row[e], &cov_path, line)?,
                row[t].clone(),
                num(&row[b], &cov_path, line)?,
            );
            coverage.insert((cell, row[q].clone()), num(&row[c], &cov_path, line)?);
        }
    }

    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, summary(&by_quantity, &coverage)).map_err(|e| Error::Io {
        path: summary_path.clone(),
        source: e,
    })?;
    for q in &quantities {
        let path = dir.join(format!("rmse_{q}.svg"));
        fs::write(&path, chart(q, &by_quantity[q])).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    eprintln!("wrote {} and {} charts", summary_path.display(), quantities.len());
    Ok(())
}

fn summary(by_quantity: &BTreeMap<String, BTreeMap<Cell, f64>>, coverage: &BTreeMap<(Cell, String), f64>) -> String {
    let params = ["a0", "a1", "eta"];
    let mut cells: Vec<&Cell> = by_quantity.values().flat_map(|m| m.keys()).collect();
    cells.sort();
    cells.dedup();

    let mut out = format!("{:>8} {:>6} {:>6}", "epsilon", "target", "beta");
    for p in params {
        let _ = write!(out, " {:>10}", format!("rmse_{p}"));
    }
    for p in params {
        let _ = write!(out, " {:>8}", format!("cov_{p}"));
    }
    out.push('\n');
    for cell in cells {
        let _ = write!(out, "{:>8.3} {:>6} {:>6.2}", cell.0, cell.1, cell.2);
        for p in params {
            match by_quantity.get(p).and_then(|m| m.get(cell)) {
                Some(v) => {
                    let _ = write!(out, " {v:>10.5}");
                }
                None => {
                    let _ = write!(out, " {:>10}", "-");
                }
            }
        }
        for p in params {
            match coverage.get(&(cell.clone(), p.to_string())) {
                Some(v) => {
                    let _ = write!(out, " {:>8.3}", v);
                }
                None => {
                    let _ = write!(out, " {:>8}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn chart(quantity: &str, points: &BTreeMap<Cell, f64>) -> String {
    // one series per (target, beta)
    let mut series: BTreeMap<(String, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for (c, v) in points {
        if v.is_finite() {
            series.entry((c.1.clone(), c.2.to_bits())).or_default().push((c.0, *v));
        }
    }
    let xs = points.keys().map(|c| c.0);
    let ys = points.values().copied().filter(|v| v.is_finite());
    let (x_lo, x_hi) = padded(
        xs.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
    );
    let (_, y_hi) = padded(0.0, ys.fold(0.0, f64::max));
    let y_lo = 0.0;

    let px = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">RMSE of {}</text>",
        WIDTH / 2.0,
        escape(quantity)
    );
    let (x0, y0, x1, y1) = (px(x_lo), py(y_lo), px(x_hi), py(y_hi));
    let _ = writeln!(
        s,
        "<path d=\"M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}\" stroke=\"black\" fill=\"none\"/>"
    );
    for k in 0..=4 {
        let xv = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
        let yv = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.3}</text>",
            px(xv),
            y0 + 18.0,
            xv
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.3}</text>",
            x0 - 6.0,
            py(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">epsilon</text>",
        WIDTH / 2.0,
        HEIGHT - 16.0
    );

    for (i, ((target, beta_bits), pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(j, (x, y))| format!("{}{:.1},{:.1}", if j == 0 { "M" } else { "L" }, px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            s,
            "<path d=\"{}\" stroke=\"{color}\" stroke-width=\"2\" fill=\"none\"/>",
            path.join(" ")
        );
        for (x, y) in pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                px(*x),
                py(*y)
            );
        }
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{ly:.1}\" fill=\"{color}\">{}, beta={}</text>",
            WIDTH - MARGIN - 110.0,
            escape(target),
            f64::from_bits(*beta_bits)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let w = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 0.5 };
        return (lo - w, hi + w);
    }
    (lo, hi + 0.05 * (hi - lo))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
