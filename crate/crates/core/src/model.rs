//! Domain parameters and the exact finite cyclic model.
//!
//! A continuous lattice `(a, b)` with window length `c` is realized on a grid
//! of `L` points with spacing `h` and period `Λ = L·h`. Translation by `a`
//! becomes a shift by `a/h` grid cells and modulation by `b` becomes a DFT
//! frequency step of `b·Λ`. Both must be integers dividing `L`; nothing is
//! ever rounded to make a lattice fit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Tolerance used when deciding whether a decimal input is an integer.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// Returns `x` as an integer when it lies within [`INTEGRALITY_TOL`] of one.
pub fn as_integer(x: f64) -> Option<i64> {
    if !x.is_finite() {
        return None;
    }
    let r = x.round();
    if (x - r).abs() <= INTEGRALITY_TOL * r.abs().max(1.0) {
        Some(r as i64)
    } else {
        None
    }
}

/// `q = p/(p-1)`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 1.0 {
        return Err(LabError::Domain(format!("exponent p = {p} must satisfy 1 < p < inf")));
    }
    Ok(p / (p - 1.0))
}

/// A Lebesgue exponent `1 < p < ∞` together with its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LebesgueExponent {
    p: f64,
    q: f64,
}

impl LebesgueExponent {
    pub fn new(p: f64) -> Result<Self> {
        let q = conjugate_exponent(p)?;
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn conjugate(&self) -> Self {
        Self { p: self.q, q: self.p }
    }
}

/// Translation step, modulation step and window length of one Gabor system.
///
/// The synthesis side carries `(a, b, c)`; the analysis side carries
/// `(alpha, beta, rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborTriple {
    pub shift: f64,
    pub mod_step: f64,
    pub win_len: f64,
}

impl GaborTriple {
    pub fn new(shift: f64, mod_step: f64, win_len: f64) -> Result<Self> {
        for (name, v) in [("shift", shift), ("mod_step", mod_step), ("win_len", win_len)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(LabError::Domain(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(Self {
            shift,
            mod_step,
            win_len,
        })
    }
}

/// Finite periodized grid with integer lattice steps for both families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CyclicModel {
    #[serde(rename = "l")]
    len: usize,
    h: f64,
    period: f64,
    dt_synth: usize,
    df_synth: usize,
    dt_anal: usize,
    df_anal: usize,
}

impl CyclicModel {
    /// Builds a model directly from grid-unit lattice steps.
    pub fn from_steps(
        len: usize,
        h: f64,
        (dt_synth, df_synth): (usize, usize),
        (dt_anal, df_anal): (usize, usize),
    ) -> Result<Self> {
        if len == 0 {
            return Err(LabError::Domain("grid size L must be positive".into()));
        }
        if !h.is_finite() || h <= 0.0 {
            return Err(LabError::Domain(format!("grid spacing h = {h} must be > 0")));
        }
        for (name, step) in [
            ("synthesis translation step", dt_synth),
            ("synthesis modulation step", df_synth),
            ("analysis translation step", dt_anal),
            ("analysis modulation step", df_anal),
        ] {
            if step == 0 || !len.is_multiple_of(step) {
                return Err(LabError::Incommensurate(format!(
                    "{name} {step} does not divide L = {len}"
                )));
            }
        }
        Ok(Self {
            len,
            h,
            period: len as f64 * h,
            dt_synth,
            df_synth,
            dt_anal,
            df_anal,
        })
    }

    /// Model for the discrete lattice problem on `ℓ^p(Z)`: unit spacing,
    /// translations by `n_shift` and modulations `e^{2πi jm/m_count}`.
    pub fn discrete(len: usize, (n_synth, m_synth): (usize, usize), (n_anal, m_anal): (usize, usize)) -> Result<Self> {
        for m in [m_synth, m_anal] {
            if m == 0 || !len.is_multiple_of(m) {
                return Err(LabError::Incommensurate(format!(
                    "modulation count {m} does not divide L = {len}"
                )));
            }
        }
        Self::from_steps(len, 1.0, (n_synth, len / m_synth), (n_anal, len / m_anal))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn synth_steps(&self) -> (usize, usize) {
        (self.dt_synth, self.df_synth)
    }

    pub fn anal_steps(&self) -> (usize, usize) {
        (self.dt_anal, self.df_anal)
    }

    /// Number of modulations `L/df` of the synthesis family.
    pub fn synth_mod_count(&self) -> usize {
        self.len / self.df_synth
    }

    pub fn synth_shift_count(&self) -> usize {
        self.len / self.dt_synth
    }

    pub fn anal_mod_count(&self) -> usize {
        self.len / self.df_anal
    }

    pub fn anal_shift_count(&self) -> usize {
        self.len / self.dt_anal
    }
}

/// Realizes a pair of continuous Gabor triples on a grid of spacing `h` and
/// period `period`.
pub fn build_cyclic_model(synth: &GaborTriple, anal: &GaborTriple, h: f64, period: f64) -> Result<CyclicModel> {
    if !h.is_finite() || h <= 0.0 {
        return Err(LabError::Domain(format!("grid spacing h = {h} must be > 0")));
    }
    if !period.is_finite() || period <= 0.0 {
        return Err(LabError::Domain(format!("period = {period} must be > 0")));
    }
    let len = positive_integer(period / h, || {
        format!("period {period} is not a multiple of grid spacing {h}")
    })?;
    let dt_synth = positive_integer(synth.shift / h, || {
        format!("synthesis shift {} is not a multiple of grid spacing {h}", synth.shift)
    })?;
    let df_synth = positive_integer(synth.mod_step * period, || {
        format!(
            "synthesis modulation step {} times period {period} is not an integer",
            synth.mod_step
        )
    })?;
    let dt_anal = positive_integer(anal.shift / h, || {
        format!("analysis shift {} is not a multiple of grid spacing {h}", anal.shift)
    })?;
    let df_anal = positive_integer(anal.mod_step * period, || {
        format!(
            "analysis modulation step {} times period {period} is not an integer",
            anal.mod_step
        )
    })?;
    let mut model = CyclicModel::from_steps(len, h, (dt_synth, df_synth), (dt_anal, df_anal))?;
    model.period = period;
    Ok(model)
}

fn positive_integer(x: f64, msg: impl FnOnce() -> String) -> Result<usize> {
    match as_integer(x) {
        Some(n) if n > 0 => Ok(n as usize),
        _ => Err(LabError::Incommensurate(msg())),
    }
}

/// A complex function sampled on a model grid. Norms carry the weight `h^{1/p}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridVector {
    values: Vec<Complex64>,
    h: f64,
}

impl GridVector {
    pub fn new(values: Vec<Complex64>, h: f64) -> Self {
        Self { values, h }
    }

    pub fn on(model: &CyclicModel, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != model.len() {
            return Err(LabError::Dimension(format!(
                "vector length {} does not match model L = {}",
                values.len(),
                model.len()
            )));
        }
        Ok(Self::new(values, model.h()))
    }

    pub fn from_real(values: &[f64], h: f64) -> Self {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), h)
    }

    pub fn zeros(len: usize, h: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], h)
    }

    /// Unit vector `e_j`.
    pub fn unit(len: usize, j: usize, h: f64) -> Self {
        let mut v = Self::zeros(len, h);
        v.values[j] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn conj(&self) -> Self {
        Self::new(self.values.iter().map(|z| z.conj()).collect(), self.h)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.values.iter().map(|z| z * s).collect(), self.h)
    }

    /// Checks that both vectors live on the same grid.
    pub fn check_same_model(&self, other: &GridVector) -> Result<()> {
        if self.len() != other.len() || self.h != other.h {
            return Err(LabError::ModelMismatch(format!(
                "(L = {}, h = {}) vs (L = {}, h = {})",
                self.len(),
                self.h,
                other.len(),
                other.h
            )));
        }
        Ok(())
    }
}

/// Frame bounds `lower ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
}

impl FrameBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(0.0 <= lower && lower <= upper) {
            return Err(LabError::Domain(format!(
                "frame bounds must satisfy 0 <= {lower} <= {upper}"
            )));
        }
        Ok(Self { lower, upper })
    }
}

/// Samples `χ_{[0,c)}` on the model grid: index `j` is 1 iff `j·h < c`.
pub fn sample_indicator_window(c: f64, model: &CyclicModel) -> Result<GridVector> {
    if !c.is_finite() || c <= 0.0 {
        return Err(LabError::Domain(format!("window length c = {c} must be > 0")));
    }
    let cells = positive_integer(c / model.h(), || {
        format!("window length {c} is not a multiple of grid spacing {}", model.h())
    })?;
    if cells > model.len() {
        return Err(LabError::Domain(format!(
            "window length {c} exceeds the period {}",
            model.period()
        )));
    }
    let values = (0..model.len())
        .map(|j| Complex64::new(if j < cells { 1.0 } else { 0.0 }, 0.0))
        .collect();
    Ok(GridVector::new(values, model.h()))
}
