//! Cyclic translation and modulation, and enumeration of Gabor families.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::model::GridVector;

/// `e^{2πi k/L}` for an integer numerator reduced mod `L`.
///
/// Reducing first keeps the phase exact for the quarter turns and avoids
/// losing accuracy for large `k`.
pub fn root_of_unity(k: i64, len: usize) -> Complex64 {
    let l = len as i64;
    let r = k.rem_euclid(l);
    match (4 * r).checked_rem(l) {
        Some(0) => match 4 * r / l {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        },
        _ => Complex64::from_polar(1.0, TAU * r as f64 / len as f64),
    }
}

/// `(T f)[j] = f[(j - n_steps) mod L]`.
pub fn translate(f: &GridVector, n_steps: i64) -> GridVector {
    let len = f.len();
    if len == 0 {
        return f.clone();
    }
    let shift = n_steps.rem_euclid(len as i64) as usize;
    let src = f.values();
    let values = (0..len).map(|j| src[(j + len - shift) % len]).collect();
    GridVector::new(values, f.h())
}

/// `(E f)[j] = e^{2πi·m_index·df·j/L} f[j]`.
pub fn modulate(f: &GridVector, m_index: i64, df: usize) -> GridVector {
    let len = f.len();
    let step = m_index * df as i64;
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(j, z)| z * root_of_unity(step * j as i64, len))
        .collect();
    GridVector::new(values, f.h())
}

/// Phase `c` with `modulate(translate(f, n), m, df) = c · translate(modulate(f, m, df), n)`.
pub fn commutation_phase(m_index: i64, df: usize, n_steps: i64, len: usize) -> Complex64 {
    root_of_unity(m_index * df as i64 * n_steps, len)
}

/// Sign of the modulation phase used to enumerate a family.
///
/// Both orientations enumerate the same set of vectors, since the modulation
/// index runs over a full aliasing period; they differ only in which index
/// each vector sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Element `(m, n)` carries `e^{+2πi m·df·j/L}`.
    Synthesis,
    /// Element `(m, n)` carries `e^{-2πi m·df·j/L}`, so that under the
    /// bilinear pairing it is the partner of synthesis element `(m, n)`.
    Analysis,
}

/// The time-frequency shifts `{E_{m·df} T_{n·dt} g}` of a window on the cyclic
/// grid, indexed row-major with `n` outer and `m` inner.
#[derive(Debug, Clone)]
pub struct GaborFamily {
    window: GridVector,
    dt: usize,
    df: usize,
    orientation: Orientation,
}

/// Synthesis-oriented family of `window` on the lattice `(dt, df)`.
pub fn gabor_family(window: GridVector, dt: usize, df: usize) -> Result<GaborFamily> {
    GaborFamily::new(window, dt, df, Orientation::Synthesis)
}

impl GaborFamily {
    pub fn new(window: GridVector, dt: usize, df: usize, orientation: Orientation) -> Result<Self> {
        let len = window.len();
        if len == 0 {
            return Err(LabError::Dimension("window is empty".into()));
        }
        if dt == 0 || !len.is_multiple_of(dt) {
            return Err(LabError::Incommensurate(format!(
                "translation step {dt} does not divide L = {len}"
            )));
        }
        if df == 0 || !len.is_multiple_of(df) {
            return Err(LabError::Incommensurate(format!(
                "modulation step {df} does not divide L = {len}"
            )));
        }
        Ok(Self {
            window,
            dt,
            df,
            orientation,
        })
    }

    pub fn window(&self) -> &GridVector {
        &self.window
    }

    pub fn dt(&self) -> usize {
        self.dt
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn grid_len(&self) -> usize {
        self.window.len()
    }

    pub fn h(&self) -> f64 {
        self.window.h()
    }

    /// Number of modulations `L/df`.
    pub fn mod_count(&self) -> usize {
        self.grid_len() / self.df
    }

    /// Number of translations `L/dt`.
    pub fn shift_count(&self) -> usize {
        self.grid_len() / self.dt
    }

    pub fn len(&self) -> usize {
        self.mod_count() * self.shift_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Family size over space dimension, `L/(dt·df)`.
    pub fn redundancy(&self) -> f64 {
        self.len() as f64 / self.grid_len() as f64
    }

    /// `(m, n)` of the `k`-th element.
    pub fn index(&self, k: usize) -> (usize, usize) {
        (k % self.mod_count(), k / self.mod_count())
    }

    /// Phase numerator of element `(m, ·)` at grid point `j`.
    fn phase_step(&self, m: usize) -> i64 {
        let s = (m * self.df) as i64;
        match self.orientation {
            Orientation::Synthesis => s,
            Orientation::Analysis => -s,
        }
    }

    /// Writes element `k` into `out` (length `L`).
    pub fn element_into(&self, k: usize, out: &mut [Complex64]) {
        let (m, n) = self.index(k);
        let len = self.grid_len();
        let step = self.phase_step(m);
        let offset = n * self.dt;
        let w = self.window.values();
        for (j, o) in out.iter_mut().enumerate() {
            *o = w[(j + len - offset) % len] * root_of_unity(step * j as i64, len);
        }
    }

    pub fn element(&self, k: usize) -> GridVector {
        let mut v = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        self.element_into(k, &mut v);
        GridVector::new(v, self.h())
    }

    pub fn iter(&self) -> impl Iterator<Item = GridVector> + '_ {
        (0..self.len()).map(move |k| self.element(k))
    }
}
