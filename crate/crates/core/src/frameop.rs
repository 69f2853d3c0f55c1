//! The bilinear duality pairing and the series operator
//! `S x = Σ_k [x, ω_k] τ_k` built from an analysis and a synthesis family.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::linalg::{LinearMap, Matrix};
use crate::model::{sample_indicator_window, CyclicModel, GaborTriple, GridVector};
use crate::operators::{GaborFamily, Orientation};

/// Default largest grid for which `S` is assembled densely.
pub const DEFAULT_DENSE_CAP: usize = 4096;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `[u, ω] = h Σ_j u_j ω_j`. No complex conjugation.
pub fn pairing(u: &GridVector, omega: &GridVector) -> Result<Complex64> {
    u.check_same_model(omega)?;
    let s: Complex64 = u.values().iter().zip(omega.values()).map(|(a, b)| a * b).sum();
    Ok(s * u.h())
}

/// Analysis coefficients `[x, ω_k]` in family order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeq(pub Vec<Complex64>);

impl CoefficientSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn one_hot(len: usize, k: usize) -> Self {
        let mut v = vec![ZERO; len];
        v[k] = Complex64::new(1.0, 0.0);
        Self(v)
    }
}

/// Synthesis family `{τ_k}` paired term-by-term with analysis family `{ω_k}`.
#[derive(Debug, Clone)]
pub struct FramePair {
    synth: GaborFamily,
    anal: GaborFamily,
}

impl FramePair {
    pub fn new(synth: GaborFamily, anal: GaborFamily) -> Result<Self> {
        synth.window().check_same_model(anal.window())?;
        if synth.len() != anal.len() {
            return Err(LabError::Unpaired {
                synth: synth.len(),
                anal: anal.len(),
            });
        }
        Ok(Self { synth, anal })
    }

    /// Pair on the model lattices with arbitrary sampled windows.
    ///
    /// The analysis family is enumerated with [`Orientation::Analysis`], so
    /// with `anal_window = conj(synth_window)` the operator is the usual
    /// (self-adjoint, positive) frame operator scaled by `h`.
    pub fn from_windows(model: &CyclicModel, synth_window: GridVector, anal_window: GridVector) -> Result<Self> {
        if synth_window.len() != model.len() || anal_window.len() != model.len() {
            return Err(LabError::Dimension("window length does not match model".into()));
        }
        let (dt_s, df_s) = model.synth_steps();
        let (dt_a, df_a) = model.anal_steps();
        Self::new(
            GaborFamily::new(synth_window, dt_s, df_s, Orientation::Synthesis)?,
            GaborFamily::new(anal_window, dt_a, df_a, Orientation::Analysis)?,
        )
    }

    /// Indicator windows `χ_{[0,c)}` and `χ_{[0,ρ)}`.
    pub fn indicator(model: &CyclicModel, synth: &GaborTriple, anal: &GaborTriple) -> Result<Self> {
        let g = sample_indicator_window(synth.win_len, model)?;
        let w = sample_indicator_window(anal.win_len, model)?;
        Self::from_windows(model, g, w)
    }

    pub fn synth(&self) -> &GaborFamily {
        &self.synth
    }

    pub fn anal(&self) -> &GaborFamily {
        &self.anal
    }

    pub fn grid_len(&self) -> usize {
        self.synth.grid_len()
    }

    pub fn family_len(&self) -> usize {
        self.synth.len()
    }

    pub fn h(&self) -> f64 {
        self.synth.h()
    }

    fn check_vector(&self, x: &GridVector) -> Result<()> {
        self.synth.window().check_same_model(x)
    }

    fn coefficients(&self, x: &[Complex64]) -> Vec<Complex64> {
        let h = self.h();
        let mut buf = vec![ZERO; self.grid_len()];
        (0..self.family_len())
            .map(|k| {
                self.anal.element_into(k, &mut buf);
                buf.iter().zip(x).map(|(w, xi)| w * xi).sum::<Complex64>() * h
            })
            .collect()
    }

    fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.grid_len()];
        let mut buf = vec![ZERO; self.grid_len()];
        for (k, ck) in coeffs.iter().enumerate() {
            if *ck == ZERO {
                continue;
            }
            self.synth.element_into(k, &mut buf);
            for (o, t) in out.iter_mut().zip(&buf) {
                *o += ck * t;
            }
        }
        out
    }

    /// Matrix `W^T` (family × grid) of the analysis map without the weight `h`.
    pub fn analysis_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.family_len(), self.grid_len());
        let mut buf = vec![ZERO; self.grid_len()];
        for k in 0..self.family_len() {
            self.anal.element_into(k, &mut buf);
            for (j, w) in buf.iter().enumerate() {
                m[(k, j)] = *w;
            }
        }
        m
    }

    /// Matrix `T` (grid × family) whose columns are the synthesis elements.
    pub fn synthesis_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.grid_len(), self.family_len());
        let mut buf = vec![ZERO; self.grid_len()];
        for k in 0..self.family_len() {
            self.synth.element_into(k, &mut buf);
            m.column_mut(k).iter_mut().zip(&buf).for_each(|(d, s)| *d = *s);
        }
        m
    }
}

pub fn analysis_apply(pair: &FramePair, x: &GridVector) -> Result<CoefficientSeq> {
    pair.check_vector(x)?;
    Ok(CoefficientSeq(pair.coefficients(x.values())))
}

pub fn synthesis_apply(pair: &FramePair, coeffs: &CoefficientSeq) -> Result<GridVector> {
    if coeffs.len() != pair.family_len() {
        return Err(LabError::Dimension(format!(
            "{} coefficients for a family of {}",
            coeffs.len(),
            pair.family_len()
        )));
    }
    Ok(GridVector::new(pair.synthesize(&coeffs.0), pair.h()))
}

/// `S x` evaluated matrix-free.
pub fn frame_operator_apply(pair: &FramePair, x: &GridVector) -> Result<GridVector> {
    pair.check_vector(x)?;
    Ok(GridVector::new(FrameOperator(pair).apply(x.values()), pair.h()))
}

/// Dense `S = h · T · W^T`, for `L` up to `cap`.
pub fn assemble_frame_matrix(pair: &FramePair, cap: usize) -> Result<Matrix> {
    let len = pair.grid_len();
    if len > cap {
        return Err(LabError::CapExceeded { len, cap });
    }
    let synth = pair.synthesis_matrix();
    let anal = pair.analysis_matrix();
    let h = Complex64::new(pair.h(), 0.0);
    // Columns are independent; compute them in parallel and place them in order.
    let cols: Vec<Vec<Complex64>> = (0..len)
        .into_par_iter()
        .map(|j| {
            let weights: Vec<Complex64> = anal.column(j).iter().map(|w| w * h).collect();
            synth.apply(&weights)
        })
        .collect();
    let mut s = Matrix::zeros(len, len);
    for (j, col) in cols.into_iter().enumerate() {
        s.column_mut(j).iter_mut().zip(col).for_each(|(d, v)| *d = v);
    }
    Ok(s)
}

/// Matrix-free view of `S` as a [`LinearMap`].
pub struct FrameOperator<'a>(pub &'a FramePair);

impl LinearMap for FrameOperator<'_> {
    fn dim_in(&self) -> usize {
        self.0.grid_len()
    }

    fn dim_out(&self) -> usize {
        self.0.grid_len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.0.synthesize(&self.0.coefficients(x))
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        // S^H = h · conj(W) · T^H
        let pair = self.0;
        let h = pair.h();
        let mut buf = vec![ZERO; pair.grid_len()];
        let mut out = vec![ZERO; pair.grid_len()];
        for k in 0..pair.family_len() {
            pair.synth.element_into(k, &mut buf);
            let c: Complex64 = buf.iter().zip(y).map(|(t, yi)| t.conj() * yi).sum::<Complex64>() * h;
            if c == ZERO {
                continue;
            }
            pair.anal.element_into(k, &mut buf);
            for (o, w) in out.iter_mut().zip(&buf) {
                *o += w.conj() * c;
            }
        }
        out
    }
}

/// Analysis map `x ↦ ([x, ω_k])_k` from the grid into coefficient space.
pub struct AnalysisMap<'a>(pub &'a FramePair);

impl LinearMap for AnalysisMap<'_> {
    fn dim_in(&self) -> usize {
        self.0.grid_len()
    }

    fn dim_out(&self) -> usize {
        self.0.family_len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.0.coefficients(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let pair = self.0;
        let h = pair.h();
        let mut buf = vec![ZERO; pair.grid_len()];
        let mut out = vec![ZERO; pair.grid_len()];
        for (k, yk) in y.iter().enumerate() {
            if *yk == ZERO {
                continue;
            }
            pair.anal.element_into(k, &mut buf);
            for (o, w) in out.iter_mut().zip(&buf) {
                *o += w.conj() * yk * h;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::operators::gabor_family;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn onb_pair() -> FramePair {
        let model = CyclicModel::from_steps(2, 1.0, (1, 2), (1, 2)).unwrap();
        let w = GridVector::from_real(&[1.0, 0.0], 1.0);
        FramePair::from_windows(&model, w.clone(), w).unwrap()
    }

    fn redundant_pair() -> FramePair {
        let model = CyclicModel::from_steps(2, 1.0, (1, 1), (1, 1)).unwrap();
        let w = GridVector::from_real(&[1.0, 0.0], 1.0);
        FramePair::from_windows(&model, w.clone(), w).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let t = GaborTriple::new(1.0, 0.25, 1.0).unwrap();
        let m = crate::model::build_cyclic_model(&t, &t, 0.25, 4.0).unwrap();
        let chi = sample_indicator_window(1.0, &m).unwrap();
        assert!((pairing(&chi, &chi).unwrap() - c(1.0, 0.0)).norm() < 1e-15);

        let u = GridVector::from_real(&[1.0, 1.0, 0.0, 0.0], 1.0);
        assert_eq!(pairing(&u, &u).unwrap(), c(2.0, 0.0));

        let i = GridVector::new(vec![c(0.0, 1.0), c(0.0, 0.0)], 1.0);
        assert_eq!(pairing(&i, &i).unwrap(), c(-1.0, 0.0));

        let other = GridVector::from_real(&[1.0, 1.0], 0.5);
        assert!(matches!(pairing(&i, &other), Err(LabError::ModelMismatch(_))));
    }

    #[test]
    fn critical_onb_is_identity() {
        let pair = onb_pair();
        let x = GridVector::new(vec![c(3.0, 0.0), c(0.0, 5.0)], 1.0);
        assert_eq!(frame_operator_apply(&pair, &x).unwrap(), x);
        let s = assemble_frame_matrix(&pair, DEFAULT_DENSE_CAP).unwrap();
        assert!(max_abs(&(s - Matrix::identity(2, 2))) < 1e-15);

        let coeffs = analysis_apply(&pair, pair.anal().window()).unwrap();
        assert_eq!(coeffs.0, vec![c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn redundancy_two_doubles() {
        let pair = redundant_pair();
        let x = GridVector::from_real(&[1.0, 1.0], 1.0);
        assert_eq!(
            frame_operator_apply(&pair, &x).unwrap(),
            GridVector::from_real(&[2.0, 2.0], 1.0)
        );
        let s = assemble_frame_matrix(&pair, DEFAULT_DENSE_CAP).unwrap();
        assert!(max_abs(&(s - Matrix::identity(2, 2).scale(2.0))) < 1e-15);
    }

    #[test]
    fn linearity_edge_cases() {
        let pair = redundant_pair();
        let zero = GridVector::zeros(2, 1.0);
        assert!(analysis_apply(&pair, &zero).unwrap().0.iter().all(|z| *z == ZERO));
        assert_eq!(frame_operator_apply(&pair, &zero).unwrap(), zero);
        let x = GridVector::new(vec![c(0.3, -1.0), c(2.0, 0.5)], 1.0);
        let lambda = c(-1.5, 0.25);
        let lhs = analysis_apply(&pair, &x.scale(lambda)).unwrap();
        let rhs = analysis_apply(&pair, &x).unwrap();
        for (a, b) in lhs.0.iter().zip(&rhs.0) {
            assert!((a - lambda * b).norm() < 1e-14);
        }
    }

    #[test]
    fn synthesis_basis_action() {
        let pair = redundant_pair();
        for k in 0..pair.family_len() {
            let v = synthesis_apply(&pair, &CoefficientSeq::one_hot(4, k)).unwrap();
            assert_eq!(v, pair.synth().element(k));
        }
        let z = synthesis_apply(&pair, &CoefficientSeq(vec![ZERO; 4])).unwrap();
        assert_eq!(z, GridVector::zeros(2, 1.0));
        assert!(synthesis_apply(&pair, &CoefficientSeq(vec![ZERO; 3])).is_err());
    }

    #[test]
    fn mismatched_pairs_are_rejected() {
        let w = GridVector::from_real(&[1.0, 0.0, 0.0, 0.0], 1.0);
        let a = gabor_family(w.clone(), 2, 2).unwrap();
        let b = gabor_family(w.clone(), 2, 4).unwrap();
        assert!(matches!(FramePair::new(a.clone(), b), Err(LabError::Unpaired { .. })));
        let other = gabor_family(GridVector::from_real(&[1.0, 0.0, 0.0, 0.0], 0.5), 2, 2).unwrap();
        assert!(matches!(FramePair::new(a, other), Err(LabError::ModelMismatch(_))));
    }

    #[test]
    fn dense_cap_is_enforced() {
        let pair = redundant_pair();
        assert!(matches!(
            assemble_frame_matrix(&pair, 1),
            Err(LabError::CapExceeded { len: 2, cap: 1 })
        ));
    }
}
