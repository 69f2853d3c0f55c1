//! Grid sweeps over `(a, b, c, alpha, beta, rho, p)` with deterministic CSV
//! output, resume from a partial table, and PGM heatmaps.
//!
//! Grid indices are lexicographic in the axis order above, `p` fastest.
//! Rows are always emitted sorted by index, so the output does not depend on
//! how cells were scheduled.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::model::as_integer;
use crate::model::{conjugate_exponent, GaborTriple};
use crate::verdict::{
    format_f64, scale_study, verdict_at_size, Classification, ScaleParams, Tolerances, TrendThresholds,
};

pub const SCHEMA_VERSION: &str = "v1";
pub const DEFAULT_MAX_POINTS: usize = 1_000_000;
pub const STATUS_OK: &str = "OK";
pub const STATUS_SKIPPED: &str = "SKIPPED-INCOMMENSURATE";
/// Synthesis and analysis families of different sizes cannot be paired.
pub const STATUS_UNPAIRED: &str = "SKIPPED-UNPAIRED";
pub const CSV_COLUMNS: [&str; 16] = [
    "idx",
    "a",
    "b",
    "c",
    "alpha",
    "beta",
    "rho",
    "p",
    "L",
    "status",
    "classification",
    "lower",
    "upper",
    "condition",
    "bessel_bound",
    "ms",
];

/// Axis names in lexicographic order.
pub const AXES: [&str; 7] = ["a", "b", "c", "alpha", "beta", "rho", "p"];

/// One axis in a config file: a scalar, an explicit list, or a linear range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Scalar(f64),
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AxisSpec::Scalar(v) => vec![*v],
            AxisSpec::List(v) => v.clone(),
            AxisSpec::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxesConfig {
    pub a: Option<AxisSpec>,
    pub b: Option<AxisSpec>,
    pub c: Option<AxisSpec>,
    pub alpha: Option<AxisSpec>,
    pub beta: Option<AxisSpec>,
    pub rho: Option<AxisSpec>,
    pub p: Option<AxisSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub eps_sing: Option<f64>,
    pub kappa_max: Option<f64>,
    pub pivot_rel: Option<f64>,
    pub dense_cap: Option<usize>,
    pub restarts: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub stable_spread: Option<f64>,
    pub degenerate_factor: Option<f64>,
}

/// Sweep configuration as read from TOML or JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: AxesConfig,
    pub period: f64,
    pub grid_res: Option<f64>,
    pub size: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_timing: bool,
    pub max_points: Option<usize>,
}

impl SweepConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| LabError::Spec(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LabError::Spec(e.to_string()))
    }

    /// Reads a config, choosing the format by extension (`.json` or TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }
}

/// How each grid point is realized on a finite model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    GridRes(f64),
    Size(usize),
    /// One scale study per grid point.
    Sizes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axes {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// `None` means "equal to the synthesis value at each point".
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub p: Vec<f64>,
}

impl Axes {
    fn lens(&self) -> [usize; 7] {
        let opt = |v: &Option<Vec<f64>>| v.as_ref().map_or(1, |v| v.len());
        [
            self.a.len(),
            self.b.len(),
            self.c.len(),
            opt(&self.alpha),
            opt(&self.beta),
            opt(&self.rho),
            self.p.len(),
        ]
    }
}

/// Validated, canonical sweep specification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub version: &'static str,
    pub axes: Axes,
    pub period: f64,
    pub resolution: Resolution,
    pub tolerances: Tolerances,
    pub thresholds: TrendThresholds,
    pub seed: u64,
    pub record_timing: bool,
}

/// The seven parameters of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub p: f64,
}

impl GridPoint {
    pub fn get(&self, axis: &str) -> Option<f64> {
        Some(match axis {
            "a" => self.a,
            "b" => self.b,
            "c" => self.c,
            "alpha" => self.alpha,
            "beta" => self.beta,
            "rho" => self.rho,
            "p" => self.p,
            _ => return None,
        })
    }

    fn values(&self) -> [f64; 7] {
        [self.a, self.b, self.c, self.alpha, self.beta, self.rho, self.p]
    }
}

fn check_axis(name: &str, values: &[f64], period: f64) -> Result<()> {
    if values.is_empty() {
        return Err(LabError::Spec(format!("axis {name} is empty")));
    }
    for &v in values {
        let ok = match name {
            "p" => conjugate_exponent(v).is_ok(),
            "c" | "rho" => v.is_finite() && v > 0.0 && v <= period,
            _ => v.is_finite() && v > 0.0,
        };
        if !ok {
            return Err(LabError::Spec(format!("axis {name} has invalid value {v}")));
        }
    }
    Ok(())
}

impl SweepSpec {
    pub fn from_config(cfg: &SweepConfig) -> Result<Self> {
        if !cfg.period.is_finite() || cfg.period <= 0.0 {
            return Err(LabError::Spec(format!("period {} must be > 0", cfg.period)));
        }
        let required = |name: &str, a: &Option<AxisSpec>| {
            a.as_ref()
                .map(AxisSpec::values)
                .ok_or_else(|| LabError::Spec(format!("axis {name} is required")))
        };
        let axes = Axes {
            a: required("a", &cfg.axes.a)?,
            b: required("b", &cfg.axes.b)?,
            c: required("c", &cfg.axes.c)?,
            alpha: cfg.axes.alpha.as_ref().map(AxisSpec::values),
            beta: cfg.axes.beta.as_ref().map(AxisSpec::values),
            rho: cfg.axes.rho.as_ref().map(AxisSpec::values),
            p: required("p", &cfg.axes.p)?,
        };
        for (name, vals) in [("a", &axes.a), ("b", &axes.b), ("c", &axes.c), ("p", &axes.p)] {
            check_axis(name, vals, cfg.period)?;
        }
        for (name, vals) in [("alpha", &axes.alpha), ("beta", &axes.beta), ("rho", &axes.rho)] {
            if let Some(v) = vals {
                check_axis(name, v, cfg.period)?;
            }
        }
        let resolution = match (cfg.grid_res, cfg.size, &cfg.sizes) {
            (Some(h), None, None) if h.is_finite() && h > 0.0 => Resolution::GridRes(h),
            (None, Some(l), None) if l > 0 => Resolution::Size(l),
            (None, None, Some(ls)) if !ls.is_empty() && ls[0] > 0 && ls.windows(2).all(|w| w[0] < w[1]) => {
                Resolution::Sizes(ls.clone())
            }
            _ => {
                return Err(LabError::Spec(
                    "give exactly one of grid_res > 0, size > 0, or strictly increasing sizes".into(),
                ))
            }
        };
        let o = &cfg.tolerances;
        let mut tolerances = Tolerances::default();
        tolerances.eps_sing = o.eps_sing.unwrap_or(tolerances.eps_sing);
        tolerances.kappa_max = o.kappa_max.unwrap_or(tolerances.kappa_max);
        tolerances.pivot_rel = o.pivot_rel.unwrap_or(tolerances.pivot_rel);
        tolerances.dense_cap = o.dense_cap.unwrap_or(tolerances.dense_cap);
        tolerances.estimator.restarts = o.restarts.unwrap_or(tolerances.estimator.restarts);
        tolerances.estimator.tol = o.tol.unwrap_or(tolerances.estimator.tol);
        tolerances.estimator.max_iter = o.max_iter.unwrap_or(tolerances.estimator.max_iter);
        tolerances.estimator.seed = cfg.seed;
        let mut thresholds = TrendThresholds::default();
        thresholds.stable_spread = o.stable_spread.unwrap_or(thresholds.stable_spread);
        thresholds.degenerate_factor = o.degenerate_factor.unwrap_or(thresholds.degenerate_factor);

        let spec = Self {
            version: SCHEMA_VERSION,
            axes,
            period: cfg.period,
            resolution,
            tolerances,
            thresholds,
            seed: cfg.seed,
            record_timing: cfg.record_timing,
        };
        let size = spec.lens().iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        let cap = cfg.max_points.unwrap_or(DEFAULT_MAX_POINTS);
        match size {
            Some(n) if n <= cap => Ok(spec),
            _ => Err(LabError::Spec(format!("grid size exceeds the cap of {cap} points"))),
        }
    }

    fn lens(&self) -> [usize; 7] {
        self.axes.lens()
    }

    pub fn grid_size(&self) -> usize {
        self.lens().iter().product()
    }

    /// Stable digest of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }

    /// Parameters at lexicographic index `idx`.
    pub fn point(&self, idx: usize) -> GridPoint {
        let lens = self.lens();
        let mut digits = [0usize; 7];
        let mut rest = idx;
        for k in (0..7).rev() {
            digits[k] = rest % lens[k];
            rest /= lens[k];
        }
        let a = self.axes.a[digits[0]];
        let b = self.axes.b[digits[1]];
        let c = self.axes.c[digits[2]];
        let pick = |axis: &Option<Vec<f64>>, d: usize, default: f64| axis.as_ref().map_or(default, |v| v[d]);
        GridPoint {
            a,
            b,
            c,
            alpha: pick(&self.axes.alpha, digits[3], a),
            beta: pick(&self.axes.beta, digits[4], b),
            rho: pick(&self.axes.rho, digits[5], c),
            p: self.axes.p[digits[6]],
        }
    }
}

/// Verdict columns of a computed row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowVerdict {
    pub classification: Classification,
    pub lower: f64,
    pub upper: f64,
    pub condition: f64,
    pub bessel_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub idx: usize,
    pub point: GridPoint,
    pub len: Option<usize>,
    pub status: String,
    pub verdict: Option<RowVerdict>,
    pub ms: Option<u64>,
}

impl ResultRow {
    pub fn is_skipped(&self) -> bool {
        self.status == STATUS_SKIPPED || self.status == STATUS_UNPAIRED
    }

    fn to_csv_line(&self) -> String {
        let mut fields: Vec<String> = vec![self.idx.to_string()];
        fields.extend(self.point.values().iter().map(|v| format_f64(*v)));
        fields.push(self.len.map(|l| l.to_string()).unwrap_or_default());
        fields.push(self.status.clone());
        match &self.verdict {
            Some(v) => {
                fields.push(v.classification.as_str().to_string());
                for x in [v.lower, v.upper, v.condition, v.bessel_bound] {
                    fields.push(format_f64(x));
                }
            }
            None => fields.extend(std::iter::repeat_n(String::new(), 5)),
        }
        fields.push(self.ms.map(|m| m.to_string()).unwrap_or_default());
        fields.join(",")
    }

    fn from_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(LabError::Table(format!(
                "expected {} fields: {line}",
                CSV_COLUMNS.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            match s {
                "inf" => Ok(f64::INFINITY),
                _ => s.parse().map_err(|_| LabError::Table(format!("bad number {s:?}"))),
            }
        };
        let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| LabError::Table(format!("bad integer {s:?}"))) };
        let p: Vec<f64> = f[1..8].iter().map(|s| num(s)).collect::<Result<_>>()?;
        let verdict = if f[10].is_empty() {
            None
        } else {
            Some(RowVerdict {
                classification: Classification::parse(f[10])
                    .ok_or_else(|| LabError::Table(format!("bad classification {:?}", f[10])))?,
                lower: num(f[11])?,
                upper: num(f[12])?,
                condition: num(f[13])?,
                bessel_bound: num(f[14])?,
            })
        };
        Ok(Self {
            idx: int(f[0])?,
            point: GridPoint {
                a: p[0],
                b: p[1],
                c: p[2],
                alpha: p[3],
                beta: p[4],
                rho: p[5],
                p: p[6],
            },
            len: if f[8].is_empty() { None } else { Some(int(f[8])?) },
            status: f[9].to_string(),
            verdict,
            ms: if f[15].is_empty() {
                None
            } else {
                Some(int(f[15])? as u64)
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub spec_hash: String,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn empty(spec: &SweepSpec) -> Self {
        Self {
            spec_hash: spec.hash(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# asf-lab {SCHEMA_VERSION} spec={}", self.spec_hash)?;
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.to_csv_line())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| LabError::Table("empty table".into()))??;
        let prefix = format!("# asf-lab {SCHEMA_VERSION} spec=");
        let spec_hash = first
            .strip_prefix(&prefix)
            .ok_or_else(|| LabError::Table(format!("missing header comment, got {first:?}")))?
            .trim()
            .to_string();
        let header = lines
            .next()
            .ok_or_else(|| LabError::Table("missing column header".into()))??;
        if header.trim_end() != CSV_COLUMNS.join(",") {
            return Err(LabError::Table(format!("unexpected columns {header:?}")));
        }
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(ResultRow::from_csv_line(line.trim_end())?);
        }
        Ok(Self { spec_hash, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(fs::File::open(path)?))
    }
}

fn evaluate(spec: &SweepSpec, idx: usize) -> Result<ResultRow> {
    let point = spec.point(idx);
    let start = Instant::now();
    let params = ScaleParams {
        synth: GaborTriple::new(point.a, point.b, point.c)?,
        anal: GaborTriple::new(point.alpha, point.beta, point.rho)?,
        period: spec.period,
    };
    let tol = &spec.tolerances;
    let outcome: Result<(usize, String, crate::verdict::Verdict)> = match &spec.resolution {
        Resolution::GridRes(h) => match as_integer(spec.period / h) {
            Some(l) if l > 0 => {
                verdict_at_size(&params, l as usize, point.p, tol).map(|v| (l as usize, STATUS_OK.to_string(), v))
            }
            _ => Err(LabError::Incommensurate(format!(
                "period {} is not a multiple of grid spacing {h}",
                spec.period
            ))),
        },
        Resolution::Size(l) => verdict_at_size(&params, *l, point.p, tol).map(|v| (*l, STATUS_OK.to_string(), v)),
        Resolution::Sizes(ls) => {
            scale_study(&params, point.p, ls, tol, &spec.thresholds).and_then(|study| match study.last {
                Some(v) => Ok((v.model.len(), study.trend.as_str().to_string(), v)),
                None => Err(LabError::Incommensurate("no commensurate size".into())),
            })
        }
    };
    let ms = spec.record_timing.then(|| start.elapsed().as_millis() as u64);
    match outcome {
        Ok((len, status, v)) => Ok(ResultRow {
            idx,
            point,
            len: Some(len),
            status,
            verdict: Some(RowVerdict {
                classification: v.classification,
                lower: v.lower,
                upper: v.upper,
                condition: v.condition,
                bessel_bound: v.bessel_bound,
            }),
            ms,
        }),
        Err(e @ (LabError::Incommensurate(_) | LabError::Unpaired { .. })) => Ok(ResultRow {
            idx,
            point,
            len: None,
            status: if e.is_incommensurate() {
                STATUS_SKIPPED
            } else {
                STATUS_UNPAIRED
            }
            .to_string(),
            verdict: None,
            ms,
        }),
        Err(e) => Err(e),
    }
}

fn evaluate_all(spec: &SweepSpec, indices: Vec<usize>, workers: usize) -> Result<Vec<ResultRow>> {
    if workers == 0 {
        return Err(LabError::Spec("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::Spec(format!("thread pool: {e}")))?;
    pool.install(|| indices.into_par_iter().map(|i| evaluate(spec, i)).collect())
}

/// Evaluates every grid point with `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<ResultTable> {
    resume_sweep(spec, &ResultTable::empty(spec), workers)
}

/// Evaluates only the grid points missing from `partial` and merges.
pub fn resume_sweep(spec: &SweepSpec, partial: &ResultTable, workers: usize) -> Result<ResultTable> {
    let hash = spec.hash();
    if partial.spec_hash != hash {
        return Err(LabError::SpecHashMismatch {
            expected: hash,
            found: partial.spec_hash.clone(),
        });
    }
    let n = spec.grid_size();
    let mut done: BTreeMap<usize, ResultRow> = BTreeMap::new();
    for row in &partial.rows {
        if row.idx >= n {
            return Err(LabError::Table(format!("row index {} outside grid of {n}", row.idx)));
        }
        let expected = spec.point(row.idx);
        if row.point.values().map(format_f64) != expected.values().map(format_f64) {
            return Err(LabError::Table(format!(
                "row {} parameters do not match the spec",
                row.idx
            )));
        }
        done.insert(row.idx, row.clone());
    }
    let missing: Vec<usize> = (0..n).filter(|i| !done.contains_key(i)).collect();
    for row in evaluate_all(spec, missing, workers)? {
        done.insert(row.idx, row);
    }
    Ok(ResultTable {
        spec_hash: hash,
        rows: done.into_values().collect(),
    })
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| LabError::Io(std::io::Error::other("output path has no file name")))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapMetric {
    Classification,
    Condition,
}

impl std::str::FromStr for HeatmapMetric {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Self::Classification),
            "condition" => Ok(Self::Condition),
            _ => Err(LabError::Spec(format!("unknown metric {s:?}"))),
        }
    }
}

/// Grey level of one cell. Condition numbers map to `log10(cond)/log10(cap)·255`.
pub fn pixel_value(row: &ResultRow, metric: HeatmapMetric, kappa_cap: f64) -> u8 {
    match (metric, &row.verdict) {
        (HeatmapMetric::Classification, None) => 64,
        (HeatmapMetric::Classification, Some(v)) => match v.classification {
            Classification::Asf => 255,
            Classification::Undecided => 128,
            Classification::NotAsf => 0,
        },
        (HeatmapMetric::Condition, None) => 0,
        (HeatmapMetric::Condition, Some(v)) => {
            if v.condition.is_nan() {
                0
            } else {
                let s = v.condition.max(1.0).log10() / kappa_cap.log10();
                (s.clamp(0.0, 1.0) * 255.0).round() as u8
            }
        }
    }
}

/// Renders a binary P5 PGM of `metric` over the `(x_axis, y_axis)` plane.
///
/// Other axes are held at the values in `fixed`, or at their smallest value
/// in the table when not given. Row 0 of the image is the smallest `y`.
pub fn emit_heatmap(
    table: &ResultTable,
    x_axis: &str,
    y_axis: &str,
    metric: HeatmapMetric,
    fixed: &BTreeMap<String, f64>,
    kappa_cap: f64,
) -> Result<Vec<u8>> {
    for axis in [x_axis, y_axis].into_iter().chain(fixed.keys().map(String::as_str)) {
        if !AXES.contains(&axis) {
            return Err(LabError::Spec(format!("unknown axis {axis:?}")));
        }
    }
    if x_axis == y_axis {
        return Err(LabError::Spec("x and y axes must differ".into()));
    }
    if table.rows.is_empty() {
        return Err(LabError::Spec("table is empty".into()));
    }
    let key = |v: f64| format_f64(v);
    let plane_key = |r: &ResultRow| {
        (
            r.point.get(x_axis).unwrap().to_bits(),
            r.point.get(y_axis).unwrap().to_bits(),
        )
    };
    let mut slice_at: BTreeMap<&str, String> = BTreeMap::new();
    for axis in AXES.iter().filter(|a| **a != x_axis && **a != y_axis) {
        let value = match fixed.get(*axis) {
            Some(v) => *v,
            None => {
                // Axes that follow the plane (e.g. alpha tracking a) need no slicing.
                let mut seen: BTreeMap<(u64, u64), u64> = BTreeMap::new();
                let follows_plane = table.rows.iter().all(|r| {
                    let v = r.point.get(axis).unwrap().to_bits();
                    *seen.entry(plane_key(r)).or_insert(v) == v
                });
                if follows_plane {
                    continue;
                }
                table
                    .rows
                    .iter()
                    .filter_map(|r| r.point.get(axis))
                    .fold(f64::INFINITY, f64::min)
            }
        };
        slice_at.insert(axis, key(value));
    }
    let slice: Vec<&ResultRow> = table
        .rows
        .iter()
        .filter(|r| slice_at.iter().all(|(axis, v)| key(r.point.get(axis).unwrap()) == *v))
        .collect();
    if slice.is_empty() {
        return Err(LabError::Spec("fixed-value slice is empty".into()));
    }
    let distinct = |axis: &str| -> Vec<f64> {
        let set: BTreeSet<u64> = slice.iter().map(|r| r.point.get(axis).unwrap().to_bits()).collect();
        let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let xs = distinct(x_axis);
    let ys = distinct(y_axis);
    let mut cells: BTreeMap<(u64, u64), &ResultRow> = BTreeMap::new();
    for r in &slice {
        if cells.insert(plane_key(r), r).is_some() {
            return Err(LabError::Spec("several rows per cell; fix the remaining axes".into()));
        }
    }
    let mut out = format!("P5\n{} {}\n255\n", xs.len(), ys.len()).into_bytes();
    for y in &ys {
        for x in &xs {
            let row = cells
                .get(&(x.to_bits(), y.to_bits()))
                .ok_or_else(|| LabError::Spec(format!("no row at {x_axis} = {x}, {y_axis} = {y} in the slice")))?;
            out.push(pixel_value(row, metric, kappa_cap));
        }
    }
    Ok(out)
}
