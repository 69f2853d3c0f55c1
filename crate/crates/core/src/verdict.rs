//! ASF classification on a finite model, scale studies across refinements,
//! and the exact covering-count oracle for painless windows.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::frameop::{assemble_frame_matrix, AnalysisMap, FrameOperator, FramePair, DEFAULT_DENSE_CAP};
use crate::linalg::{GmresOptions, IterativeInverse};
use crate::model::{as_integer, build_cyclic_model, conjugate_exponent, CyclicModel, FrameBounds, GaborTriple};
use crate::pnorms::{inverse_opnorm_estimate, opnorm_estimate, EstimatorOptions, NormEstimate};

/// Writes non-finite floats as `"inf"` / `"-inf"` / `"nan"` strings.
pub fn serialize_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format_f64(*v))
    }
}

/// Shortest round-trip decimal, with `inf` for `+∞`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Classification {
    #[serde(rename = "ASF")]
    Asf,
    #[serde(rename = "NOT_ASF")]
    NotAsf,
    #[serde(rename = "UNDECIDED")]
    Undecided,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Asf => "ASF",
            Classification::NotAsf => "NOT_ASF",
            Classification::Undecided => "UNDECIDED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ASF" => Some(Classification::Asf),
            "NOT_ASF" => Some(Classification::NotAsf),
            "UNDECIDED" => Some(Classification::Undecided),
            _ => None,
        }
    }
}

/// Thresholds and numerical settings for [`asf_verdict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// NOT_ASF when `lower ≤ eps_sing · upper`.
    pub eps_sing: f64,
    /// ASF requires `condition ≤ kappa_max`.
    pub kappa_max: f64,
    /// LU pivots below `pivot_rel · max|S_ij|` mean singular.
    pub pivot_rel: f64,
    pub dense_cap: usize,
    #[serde(flatten)]
    pub estimator: EstimatorOptions,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_sing: 1e-8,
            kappa_max: 1e8,
            pivot_rel: 1e-13,
            dense_cap: DEFAULT_DENSE_CAP,
            estimator: EstimatorOptions::default(),
        }
    }
}

const BESSEL_NOTE: &str =
    "bessel_bound is the p->p norm of the analysis map on this finite model, not a certified p-approximate Bessel constant";

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub classification: Classification,
    pub p: f64,
    /// Estimate of `‖S‖_{p→p}`.
    #[serde(serialize_with = "serialize_f64")]
    pub upper: f64,
    /// `1/‖S^{-1}‖_{p→p}`, zero when `S` is singular.
    #[serde(serialize_with = "serialize_f64")]
    pub lower: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub condition: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub bessel_bound: f64,
    pub upper_converged: bool,
    pub lower_converged: bool,
    pub singular: bool,
    pub model: CyclicModel,
    pub tolerances: Tolerances,
    pub notes: &'static str,
}

/// Classifies the pair by estimating `‖S‖` and `‖S^{-1}‖` in `p → p`.
pub fn asf_verdict(pair: &FramePair, model: &CyclicModel, p: f64, tol: &Tolerances) -> Result<Verdict> {
    conjugate_exponent(p)?;
    if pair.grid_len() != model.len() {
        return Err(LabError::ModelMismatch(format!(
            "pair has L = {}, model has L = {}",
            pair.grid_len(),
            model.len()
        )));
    }
    let opts = &tol.estimator;
    let (upper_est, inverse_est) = if pair.grid_len() <= tol.dense_cap {
        let s = assemble_frame_matrix(pair, tol.dense_cap)?;
        let upper = opnorm_estimate(&s, p, opts)?;
        let inverse = inverse_opnorm_estimate(&s, p, tol.pivot_rel, opts)?;
        (upper, inverse)
    } else {
        let op = FrameOperator(pair);
        let upper = opnorm_estimate(&op, p, opts)?;
        let inv = IterativeInverse::new(&op, GmresOptions::default())?;
        let inverse = if upper.value == 0.0 {
            NormEstimate::unbounded()
        } else {
            opnorm_estimate(&inv, p, opts)?
        };
        (upper, inverse)
    };
    let bessel = opnorm_estimate(&AnalysisMap(pair), p, opts)?;
    let bessel_bound = bessel.value * pair.h().powf(-1.0 / p);

    let upper = upper_est.value;
    let singular = inverse_est.value.is_infinite() || upper == 0.0;
    // ‖S‖·‖S^{-1}‖ ≥ 1; clamp rounding-level crossings of the two estimates.
    let lower = if singular {
        0.0
    } else {
        (1.0 / inverse_est.value).min(upper)
    };
    let condition = if lower == 0.0 { f64::INFINITY } else { upper / lower };
    let converged = upper_est.converged && inverse_est.converged;
    let classification = if singular || lower <= tol.eps_sing * upper {
        Classification::NotAsf
    } else if condition <= tol.kappa_max && converged {
        Classification::Asf
    } else {
        Classification::Undecided
    };
    Ok(Verdict {
        classification,
        p,
        upper,
        lower,
        condition,
        bessel_bound,
        upper_converged: upper_est.converged,
        lower_converged: inverse_est.converged,
        singular,
        model: *model,
        tolerances: *tol,
        notes: BESSEL_NOTE,
    })
}

/// Covering counts `G` and the frame bounds `(min G / b, max G / b)`.
#[derive(Debug, Clone, Serialize)]
pub struct PainlessOracle {
    pub counts: Vec<usize>,
    pub min: usize,
    pub max: usize,
    pub bounds: FrameBounds,
}

/// Exact oracle for `χ_{[0,c)}` windows with `c ≤ 1/b`: there `S` is the
/// multiplication operator by `G/b`, where `G[j]` counts the lattice
/// translates `[n·a, n·a + c)` containing `j·h`.
pub fn painless_oracle(a: f64, b: f64, c: f64, model: &CyclicModel) -> Result<PainlessOracle> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(LabError::Domain(format!("{name} = {v} must be > 0")));
        }
    }
    let inv_b = 1.0 / b;
    if c > inv_b * (1.0 + 1e-12) {
        return Err(LabError::NotPainless { c, inv_b });
    }
    let h = model.h();
    let len = model.len();
    let dt = as_integer(a / h)
        .filter(|&d| d > 0 && len.is_multiple_of(d as usize))
        .ok_or_else(|| LabError::Incommensurate(format!("shift {a} does not fit the grid")))? as usize;
    let cells = as_integer(c / h)
        .filter(|&d| d > 0 && d as usize <= len)
        .ok_or_else(|| LabError::Incommensurate(format!("window {c} does not fit the grid")))? as usize;
    let counts: Vec<usize> = (0..len)
        .map(|j| (0..len / dt).filter(|&n| (j + len - n * dt) % len < cells).count())
        .collect();
    let min = *counts.iter().min().unwrap_or(&0);
    let max = *counts.iter().max().unwrap_or(&0);
    Ok(PainlessOracle {
        bounds: FrameBounds::new(min as f64 / b, max as f64 / b)?,
        counts,
        min,
        max,
    })
}

/// Continuous parameters of an (abc, αβρ) tuple on a fixed period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleParams {
    pub synth: GaborTriple,
    pub anal: GaborTriple,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trend {
    #[serde(rename = "STABLE")]
    Stable,
    #[serde(rename = "DEGENERATING")]
    Degenerating,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl Trend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Stable => "STABLE",
            Trend::Degenerating => "DEGENERATING",
            Trend::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Heuristic thresholds for labelling a trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendThresholds {
    /// STABLE needs `(max - min)/max` of the lower bounds over the last half below this.
    pub stable_spread: f64,
    /// DEGENERATING when the lower bound shrinks by at least this factor.
    pub degenerate_factor: f64,
}

impl Default for TrendThresholds {
    fn default() -> Self {
        Self {
            stable_spread: 0.1,
            degenerate_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleRow {
    #[serde(rename = "l")]
    pub len: usize,
    #[serde(serialize_with = "serialize_f64")]
    pub lower: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub upper: f64,
    #[serde(serialize_with = "serialize_f64")]
    pub condition: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleStudy {
    pub rows: Vec<ScaleRow>,
    /// Sizes rejected as incommensurate.
    pub gaps: Vec<usize>,
    pub trend: Trend,
    pub thresholds: TrendThresholds,
    /// Verdict at the largest commensurate size.
    pub last: Option<Verdict>,
}

/// Builds the model with `h = period / len` and returns the verdict there.
pub fn verdict_at_size(params: &ScaleParams, len: usize, p: f64, tol: &Tolerances) -> Result<Verdict> {
    if len == 0 {
        return Err(LabError::Domain("grid size must be positive".into()));
    }
    let h = params.period / len as f64;
    let model = build_cyclic_model(&params.synth, &params.anal, h, params.period)?;
    let pair = FramePair::indicator(&model, &params.synth, &params.anal)?;
    asf_verdict(&pair, &model, p, tol)
}

/// Labels the sequence of rows (assumed sorted by size).
pub fn classify_trend(rows: &[ScaleRow], th: &TrendThresholds) -> Trend {
    if rows.len() < 2 {
        return Trend::Inconclusive;
    }
    let first = rows[0].lower;
    let last = rows[rows.len() - 1].lower;
    if first > 0.0 && last <= first / th.degenerate_factor {
        return Trend::Degenerating;
    }
    let tail = &rows[rows.len() / 2..];
    let max = tail.iter().map(|r| r.lower).fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().map(|r| r.lower).fold(f64::INFINITY, f64::min);
    let spread = if max > 0.0 { (max - min) / max } else { 0.0 };
    let agree = rows.iter().all(|r| r.classification == rows[0].classification);
    if agree && spread < th.stable_spread {
        Trend::Stable
    } else {
        Trend::Inconclusive
    }
}

/// Runs [`asf_verdict`] at each size concurrently and labels the trend.
pub fn scale_study(
    params: &ScaleParams,
    p: f64,
    sizes: &[usize],
    tol: &Tolerances,
    thresholds: &TrendThresholds,
) -> Result<ScaleStudy> {
    conjugate_exponent(p)?;
    if sizes.is_empty() {
        return Err(LabError::Domain("no grid sizes given".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Domain("grid sizes must be strictly increasing".into()));
    }
    let results: Vec<(usize, Result<Verdict>)> = sizes
        .par_iter()
        .map(|&len| (len, verdict_at_size(params, len, p, tol)))
        .collect();
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    let mut last = None;
    for (len, res) in results {
        match res {
            Ok(v) => {
                rows.push(ScaleRow {
                    len,
                    lower: v.lower,
                    upper: v.upper,
                    condition: v.condition,
                    classification: v.classification,
                });
                last = Some(v);
            }
            Err(e) if e.is_incommensurate() => gaps.push(len),
            Err(e) => return Err(e),
        }
    }
    Ok(ScaleStudy {
        trend: classify_trend(&rows, thresholds),
        rows,
        gaps,
        thresholds: *thresholds,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridVector;

    fn triple(a: f64, b: f64, c: f64) -> GaborTriple {
        GaborTriple::new(a, b, c).unwrap()
    }

    fn model(t: GaborTriple, h: f64, period: f64) -> CyclicModel {
        build_cyclic_model(&t, &t, h, period).unwrap()
    }

    #[test]
    fn critical_onb_is_asf() {
        let m = CyclicModel::from_steps(2, 1.0, (1, 2), (1, 2)).unwrap();
        let w = GridVector::from_real(&[1.0, 0.0], 1.0);
        let pair = FramePair::from_windows(&m, w.clone(), w).unwrap();
        let v = asf_verdict(&pair, &m, 1.5, &Tolerances::default()).unwrap();
        assert_eq!(v.classification, Classification::Asf);
        assert!((v.upper - 1.0).abs() < 1e-12);
        assert!((v.lower - 1.0).abs() < 1e-12);
        assert!((v.condition - 1.0).abs() < 1e-12);
        assert!((v.bessel_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_redundancy_is_not_asf() {
        let m = CyclicModel::from_steps(4, 1.0, (2, 4), (2, 4)).unwrap();
        let w = GridVector::from_real(&[1.0, 1.0, 0.0, 0.0], 1.0);
        let pair = FramePair::from_windows(&m, w.clone(), w).unwrap();
        let v = asf_verdict(&pair, &m, 2.0, &Tolerances::default()).unwrap();
        assert_eq!(v.classification, Classification::NotAsf);
        assert_eq!(v.lower, 0.0);
        assert!(v.condition.is_infinite());
    }

    #[test]
    fn oracle_examples() {
        let t = triple(1.0, 1.0, 1.0);
        let o = painless_oracle(1.0, 1.0, 1.0, &model(t, 0.25, 4.0)).unwrap();
        assert!(o.counts.iter().all(|&g| g == 1));
        assert_eq!((o.bounds.lower, o.bounds.upper), (1.0, 1.0));

        let t = triple(0.5, 1.0, 0.75);
        let o = painless_oracle(0.5, 1.0, 0.75, &model(t, 0.25, 4.0)).unwrap();
        let expected: Vec<usize> = (0..16).map(|j| if j % 2 == 0 { 2 } else { 1 }).collect();
        assert_eq!(o.counts, expected);
        assert_eq!((o.bounds.lower, o.bounds.upper), (1.0, 2.0));

        let t = triple(1.5, 0.5, 1.0);
        let o = painless_oracle(1.5, 0.5, 1.0, &model(t, 0.5, 6.0)).unwrap();
        assert_eq!(o.min, 0);
        assert_eq!(o.bounds.lower, 0.0);

        let t = triple(0.5, 2.0, 0.75);
        assert!(matches!(
            painless_oracle(0.5, 2.0, 0.75, &model(t, 0.25, 4.0)),
            Err(LabError::NotPainless { .. })
        ));
    }

    #[test]
    fn trend_rules() {
        let row = |len, lower, cl| ScaleRow {
            len,
            lower,
            upper: 2.0,
            condition: 2.0 / lower,
            classification: cl,
        };
        let th = TrendThresholds::default();
        let asf = Classification::Asf;
        assert_eq!(classify_trend(&[row(16, 1.0, asf)], &th), Trend::Inconclusive);
        assert_eq!(
            classify_trend(&[row(16, 1.0, asf), row(32, 1.0, asf), row(64, 0.98, asf)], &th),
            Trend::Stable
        );
        assert_eq!(
            classify_trend(&[row(16, 1.0, asf), row(32, 0.7, asf), row(64, 0.4, asf)], &th),
            Trend::Degenerating
        );
        assert_eq!(
            classify_trend(&[row(16, 1.0, asf), row(32, 0.9, asf), row(64, 0.6, asf)], &th),
            Trend::Inconclusive
        );
        let n = Classification::NotAsf;
        assert_eq!(classify_trend(&[row(16, 0.0, n), row(32, 0.0, n)], &th), Trend::Stable);
    }

    #[test]
    fn scale_study_records_gaps() {
        let params = ScaleParams {
            synth: triple(0.5, 1.0, 0.75),
            anal: triple(0.5, 1.0, 0.75),
            period: 4.0,
        };
        let s = scale_study(
            &params,
            2.0,
            &[12, 16],
            &Tolerances::default(),
            &TrendThresholds::default(),
        )
        .unwrap();
        assert_eq!(s.gaps, vec![12]);
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.trend, Trend::Inconclusive);
        assert!(scale_study(
            &params,
            2.0,
            &[32, 16],
            &Tolerances::default(),
            &TrendThresholds::default()
        )
        .is_err());
    }

    #[test]
    fn formatting() {
        assert_eq!(format_f64(f64::INFINITY), "inf");
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(2.0), "2");
    }
}
