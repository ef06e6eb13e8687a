//! CSV loaders and the scaling, survival and profile analyses.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use mipt_core::fss::{
    fit_profile, fit_scaling, fit_survival, landscape, DataPoint, DecaySeries, FitOptions, LandscapeCell, Method,
    ProfileFit, ProfileModel, ScalingFitResult, SurvivalFit, SurvivalOptions,
};
use serde::Serialize;

use crate::error::{CliError, Result};

/// A CSV file read as header-indexed string rows.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let input = |message: String| CliError::Input {
            path: path.to_path_buf(),
            message,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| input(e.to_string()))?;
        let header = rdr
            .headers()
            .map_err(|e| input(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| input(e.to_string()))?;
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| CliError::Input {
            path: self.path.clone(),
            message: format!("missing column `{name}`"),
        })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn get<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T> {
        let raw = self.rows[row].get(col).unwrap_or("");
        raw.trim().parse().map_err(|_| CliError::Input {
            path: self.path.clone(),
            message: format!("column `{}`, data row {}: cannot parse {raw:?}", self.header[col], row + 1),
        })
    }

    fn text(&self, row: usize, col: usize) -> &str {
        self.rows[row].get(col).unwrap_or("")
    }
}

/// Row filter on the `diagnostic` and `geometry` columns.
#[derive(Debug, Clone, Default)]
pub struct RowFilter {
    pub diagnostic: Option<String>,
    pub geometry: Option<String>,
}

impl RowFilter {
    fn keep(&self, t: &Table, row: usize) -> bool {
        let check = |want: &Option<String>, col: &str| match (want, t.optional(col)) {
            (Some(w), Some(c)) => t.text(row, c) == w,
            _ => true,
        };
        check(&self.diagnostic, "diagnostic") && check(&self.geometry, "geometry")
    }
}

pub fn load_points(paths: &[PathBuf], filter: &RowFilter) -> Result<Vec<DataPoint<f64>>> {
    let mut out = Vec::new();
    for path in paths {
        let t = Table::read(path)?;
        let cols = ["L", "p", "delta", "sigma", "count"].map(|c| t.column(c));
        let [l, p, delta, sigma, count] = cols;
        let (l, p, delta, sigma, count) = (l?, p?, delta?, sigma?, count?);
        for r in 0..t.rows.len() {
            if !filter.keep(&t, r) {
                continue;
            }
            out.push(DataPoint {
                l: t.get(r, l)?,
                p: t.get(r, p)?,
                delta: t.get(r, delta)?,
                sigma: t.get(r, sigma)?,
                count: t.get(r, count)?,
            });
        }
    }
    Ok(out)
}

/// Requires at least two sizes with five `p` values each.
pub fn check_coverage(points: &[DataPoint<f64>]) -> Result<()> {
    let mut by_l: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
    for d in points {
        by_l.entry(d.l).or_default().insert(d.p.to_bits());
    }
    let enough = by_l.values().filter(|ps| ps.len() >= 5).count();
    if enough < 2 {
        return Err(CliError::Fit(format!(
            "need at least two sizes with five p values each, got {:?}",
            by_l.iter().map(|(l, ps)| (*l, ps.len())).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub methods: Vec<Method>,
    pub p_c: f64,
    pub nu: f64,
    pub gamma: f64,
    pub fit_gamma: bool,
    /// Start from the best cell of a coarse grid instead of the guess.
    pub scan: bool,
    /// `(p_c lo, p_c hi, nu lo, nu hi, n)`; defaults to the data's `p` span
    /// and `nu` in `[0.2, 2]`.
    pub landscape: Option<(f64, f64, f64, f64, usize)>,
}

impl AnalyzeOptions {
    pub fn new(methods: Vec<Method>, p_c: f64, nu: f64) -> Self {
        Self {
            methods,
            p_c,
            nu,
            gamma: 0.0,
            fit_gamma: false,
            scan: true,
            landscape: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub points: usize,
    #[serde(rename = "L")]
    pub sizes: Vec<usize>,
    pub fits: Vec<ScalingFitResult<f64>>,
    /// Every pair of fits agrees within the sum of their widths; `None` for a
    /// single method.
    pub agreement: Option<bool>,
    #[serde(skip)]
    pub landscapes: Vec<(Method, Vec<LandscapeCell<f64>>)>,
}

fn grid_bounds(points: &[DataPoint<f64>], opts: &AnalyzeOptions) -> (f64, f64, f64, f64, usize) {
    opts.landscape.unwrap_or_else(|| {
        let lo = points.iter().map(|d| d.p).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|d| d.p).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi, 0.2, 2.0, 41)
    })
}

pub fn fits_agree(fits: &[ScalingFitResult<f64>]) -> Option<bool> {
    if fits.len() < 2 {
        return None;
    }
    let tol = |w: &mipt_core::fss::Width<f64>| if w.unbounded { f64::INFINITY } else { w.half_width };
    let ok = fits.iter().enumerate().all(|(i, a)| {
        fits[i + 1..].iter().all(|b| {
            (a.p_c - b.p_c).abs() <= tol(&a.p_c_width) + tol(&b.p_c_width)
                && (a.nu - b.nu).abs() <= tol(&a.nu_width) + tol(&b.nu_width)
        })
    });
    Some(ok)
}

pub fn analyze(points: &[DataPoint<f64>], opts: &AnalyzeOptions) -> Result<AnalyzeReport> {
    check_coverage(points)?;
    let (plo, phi, nlo, nhi, n) = grid_bounds(points, opts);
    let mut fits = Vec::new();
    let mut landscapes = Vec::new();
    for &method in &opts.methods {
        let mut fo = FitOptions::new(method, opts.p_c, opts.nu);
        fo.gamma = opts.gamma;
        fo.fit_gamma = opts.fit_gamma;
        if opts.scan {
            fo.scan = Some((plo, phi, nlo, nhi, 17));
        }
        let fit = fit_scaling(points, &fo).map_err(|e| CliError::Fit(format!("{}: {e}", method.name())))?;
        landscapes.push((method, landscape(points, method, fit.gamma, (plo, phi), (nlo, nhi), n)));
        fits.push(fit);
    }
    let sizes: BTreeSet<usize> = points.iter().map(|d| d.l).collect();
    Ok(AnalyzeReport {
        points: points.len(),
        sizes: sizes.into_iter().collect(),
        agreement: fits_agree(&fits),
        fits,
        landscapes,
    })
}

/// Two-column table of critical points and exponents.
pub fn summary_table(report: &AnalyzeReport) -> String {
    let fmt = |v: f64, w: &mipt_core::fss::Width<f64>| {
        if w.unbounded {
            format!("{v:.4} (unbounded)")
        } else {
            format!("{v:.4} ± {:.4}", w.half_width)
        }
    };
    let mut s = format!("{:<12} {:<24} {:<24}\n", "method", "p_c", "nu");
    for f in &report.fits {
        s.push_str(&format!(
            "{:<12} {:<24} {:<24}\n",
            f.method.name(),
            fmt(f.p_c, &f.p_c_width),
            fmt(f.nu, &f.nu_width)
        ));
    }
    if let Some(a) = report.agreement {
        s.push_str(&format!("agreement: {}\n", if a { "yes" } else { "no" }));
    }
    s
}

pub fn write_analysis(report: &AnalyzeReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for (fit, (method, cells)) in report.fits.iter().zip(&report.landscapes) {
        let path = dir.join(format!("fit_{}.json", method.name()));
        write_json(&path, fit)?;
        written.push(path);
        let path = dir.join(format!("landscape_{}.csv", method.name()));
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
        w.write_record(["p_c", "nu", "epsilon"])
            .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
        for c in cells {
            let eps = c.epsilon.map(|e| e.to_string()).unwrap_or_default();
            w.write_record([c.p_c.to_string(), c.nu.to_string(), eps])
                .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("report.json");
    write_json(&path, report)?;
    written.push(path);
    let path = dir.join("summary.txt");
    std::fs::write(&path, summary_table(report)).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Decay tables grouped by `(L, p)` in file order.
pub fn load_decay(paths: &[PathBuf]) -> Result<Vec<DecaySeries<f64>>> {
    let mut series: Vec<DecaySeries<f64>> = Vec::new();
    for path in paths {
        let t = Table::read(path)?;
        let (l, p, time, delta) = (t.column("L")?, t.column("p")?, t.column("time")?, t.column("delta")?);
        for r in 0..t.rows.len() {
            let (lv, pv): (usize, f64) = (t.get(r, l)?, t.get(r, p)?);
            let idx = match series.iter().position(|s| s.l == lv && s.p == pv) {
                Some(i) => i,
                None => {
                    series.push(DecaySeries {
                        l: lv,
                        p: pv,
                        times: Vec::new(),
                        values: Vec::new(),
                    });
                    series.len() - 1
                }
            };
            series[idx].times.push(t.get(r, time)?);
            series[idx].values.push(t.get(r, delta)?);
        }
    }
    Ok(series)
}

pub fn survival(series: &[DecaySeries<f64>], opts: &SurvivalOptions<f64>) -> Result<SurvivalFit<f64>> {
    fit_survival(series, opts).map_err(|e| CliError::Fit(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub linear: ProfileFit<f64>,
    pub quadratic: ProfileFit<f64>,
    pub quadratic_better: bool,
}

/// Reads one critical profile (`width = 1..L-1`) from a profile CSV.
pub fn load_profile(path: &Path, l: usize, p: Option<f64>) -> Result<(f64, Vec<f64>)> {
    let t = Table::read(path)?;
    let (lc, pc, wc, dc) = (t.column("L")?, t.column("p")?, t.column("width")?, t.column("delta")?);
    let mut ps = BTreeSet::new();
    let mut rows = Vec::new();
    for r in 0..t.rows.len() {
        if t.get::<usize>(r, lc)? != l {
            continue;
        }
        let pv: f64 = t.get(r, pc)?;
        if p.is_some_and(|want| (want - pv).abs() > 1e-12) {
            continue;
        }
        ps.insert(pv.to_bits());
        rows.push((t.get::<usize>(r, wc)?, pv, t.get::<f64>(r, dc)?));
    }
    let input = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    if ps.len() != 1 {
        return Err(input(format!("expected one p value for L = {l}, found {}; pass --p", ps.len())));
    }
    rows.sort_by_key(|r| r.0);
    let widths: Vec<usize> = rows.iter().map(|r| r.0).collect();
    if widths != (1..l).collect::<Vec<_>>() {
        return Err(input(format!("profile for L = {l} must list widths 1..{}", l - 1)));
    }
    Ok((rows[0].1, rows.into_iter().map(|r| r.2).collect()))
}

pub fn profile_report(l: usize, p: f64, profile: &[f64]) -> Result<ProfileReport> {
    let fit = |m| fit_profile(profile, l, m).map_err(|e| CliError::Fit(e.to_string()));
    let linear = fit(ProfileModel::LinearLog)?;
    let quadratic = fit(ProfileModel::QuadraticLog)?;
    Ok(ProfileReport {
        l,
        p,
        quadratic_better: quadratic.residual < linear.residual,
        linear,
        quadratic,
    })
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    s.split(',')
        .map(|m| Method::parse(m.trim()).ok_or_else(|| CliError::Config(format!("unknown method {m:?}"))))
        .collect()
}
