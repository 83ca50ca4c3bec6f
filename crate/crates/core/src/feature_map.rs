//! Quadratic basis expansion and the kernels built on it.
//!
//! The expansion of `x ∈ R^D` is laid out as
//! `[1, x_1, …, x_D, x_1², x_1 x_2, …, x_1 x_D, x_2², x_2 x_3, …, x_D²]`:
//! bias, then the linear block, then the upper triangle of `x xᵀ` in
//! row-major order. Weight vectors of the original form are indexed by this
//! layout, so it is part of the model file format.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdgmError};

/// Identifier written into model files for the layout above.
pub const FEATURE_ORDERING: &str = "bias,linear,upper-quadratic-row-major/v1";

/// Kernel used by the dual form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Exact inner product of two quadratic expansions.
    #[default]
    Phi,
    /// `(xᵀy + 1)²`.
    Poly,
}

impl Kernel {
    pub fn eval(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            Kernel::Phi => phi_kernel(x, y),
            Kernel::Poly => poly_kernel(x, y),
        }
    }

    /// Explicit feature map whose inner product reproduces this kernel.
    pub fn feature_map(self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Kernel::Phi => expand(x),
            Kernel::Poly => expand_scaled(x),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Phi => f.write_str("phi"),
            Kernel::Poly => f.write_str("poly"),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = SdgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(Kernel::Phi),
            "poly" => Ok(Kernel::Poly),
            other => Err(SdgmError::Config(format!(
                "unknown kernel `{other}` (expected phi|poly)"
            ))),
        }
    }
}

/// A quadratic expansion; element 0 is always the bias `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Kernel evaluations `k(x_n, x)` against a stored reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct GramRow(pub Vec<f64>);

/// `H = 1 + D(D+3)/2`.
pub fn expanded_dim(dim: usize) -> Result<usize> {
    if dim == 0 {
        return Err(SdgmError::InvalidDimension(
            "input dimension must be at least 1".into(),
        ));
    }
    Ok(1 + dim * (dim + 3) / 2)
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(SdgmError::InvalidDimension(
            "input dimension must be at least 1".into(),
        ));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(SdgmError::InvalidInput(format!(
            "entry {i} is not finite ({})",
            x[i]
        )));
    }
    Ok(())
}

fn expand_with(x: &[f64], off_diag: f64) -> Result<Vec<f64>> {
    check_finite(x)?;
    let d = x.len();
    let mut out = Vec::with_capacity(expanded_dim(d)?);
    out.push(1.0);
    out.extend(x.iter().map(|v| off_diag * v));
    for i in 0..d {
        out.push(x[i] * x[i]);
        for j in (i + 1)..d {
            out.push(off_diag * x[i] * x[j]);
        }
    }
    Ok(out)
}

/// Quadratic expansion `φ(x)`.
pub fn expand(x: &[f64]) -> Result<Vec<f64>> {
    expand_with(x, 1.0)
}

/// Like [`expand`] but with `√2` on the linear and cross terms, so that
/// `expand_scaled(x)ᵀ expand_scaled(y) = (xᵀy + 1)²` exactly.
pub fn expand_scaled(x: &[f64]) -> Result<Vec<f64>> {
    expand_with(x, std::f64::consts::SQRT_2)
}

fn check_same_dim(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(SdgmError::Shape(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// `(xᵀy + 1)²`.
pub fn poly_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_dim(x, y)?;
    let s = dot(x, y) + 1.0;
    Ok(s * s)
}

/// `φ(x)ᵀφ(y)` evaluated in closed form:
/// `1 + xᵀy + Σ_{i≤j} x_i x_j y_i y_j`.
pub fn phi_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_dim(x, y)?;
    // pairwise products first, so swapping the arguments is bit-exact
    let p: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mut quad = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        for &pj in &p[i..] {
            quad += pi * pj;
        }
    }
    Ok(1.0 + dot(x, y) + quad)
}

/// Kernel evaluations of `x` against every row of a row-major reference set.
pub fn gram_row(kernel: Kernel, reference: &[Vec<f64>], x: &[f64]) -> Result<GramRow> {
    reference
        .iter()
        .map(|r| kernel.eval(r, x))
        .collect::<Result<Vec<_>>>()
        .map(GramRow)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn expanded_dim_examples() {
        assert_eq!(expanded_dim(2).unwrap(), 6);
        assert_eq!(expanded_dim(1).unwrap(), 3);
        assert_eq!(expanded_dim(10).unwrap(), 66);
        assert!(matches!(
            expanded_dim(0),
            Err(SdgmError::InvalidDimension(_))
        ));
    }

    #[test]
    fn expand_layout() {
        let (a, b) = (1.5, -2.0);
        assert_eq!(
            expand(&[a, b]).unwrap(),
            vec![1.0, a, b, a * a, a * b, b * b]
        );
        assert_eq!(
            expand(&[0.0, 0.0]).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(expand(&[2.0]).unwrap(), vec![1.0, 2.0, 4.0]);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(
            expand(&x).unwrap(),
            vec![1.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
        );
    }

    #[test]
    fn expand_rejects_non_finite() {
        assert!(matches!(
            expand(&[1.0, f64::NAN]),
            Err(SdgmError::InvalidInput(_))
        ));
        assert!(matches!(
            expand(&[f64::INFINITY]),
            Err(SdgmError::InvalidInput(_))
        ));
        assert!(expand(&[]).is_err());
    }

    #[test]
    fn poly_kernel_examples() {
        assert_eq!(poly_kernel(&[0.0, 0.0], &[3.0, -7.0]).unwrap(), 1.0);
        assert_eq!(poly_kernel(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 144.0);
        assert_eq!(poly_kernel(&[1.0], &[1.0]).unwrap(), 4.0);
        assert!(matches!(
            poly_kernel(&[1.0], &[1.0, 2.0]),
            Err(SdgmError::Shape(_))
        ));
    }

    #[test]
    fn phi_kernel_examples() {
        assert_eq!(phi_kernel(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(phi_kernel(&[1.0], &[1.0]).unwrap(), 3.0);
        // brute-force dot product of [1,1,2,1,2,4] and [1,3,4,9,12,16]
        let brute: f64 = [1.0, 1.0, 2.0, 1.0, 2.0, 4.0]
            .iter()
            .zip([1.0, 3.0, 4.0, 9.0, 12.0, 16.0])
            .map(|(a, b)| a * b)
            .sum();
        assert_eq!(brute, 109.0);
        assert_eq!(phi_kernel(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 109.0);
        assert!(phi_kernel(&[1.0, 2.0], &[3.0]).is_err());
    }

    #[test]
    fn gram_row_length() {
        let reference = vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![-1.0, 0.5]];
        let row = gram_row(Kernel::Poly, &reference, &[3.0, 4.0]).unwrap();
        assert_eq!(row.0.len(), 3);
        assert_eq!(row.0[0], 1.0);
        assert_eq!(row.0[1], 144.0);
    }

    fn eigenvalues_symmetric(m: Vec<Vec<f64>>) -> Vec<f64> {
        let n = m.len();
        let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
        nalgebra::SymmetricEigen::new(mat)
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, d)
    }

    proptest! {
        #[test]
        fn expand_shape_and_bias(x in (1usize..7).prop_flat_map(vec_strategy)) {
            let phi = expand(&x).unwrap();
            prop_assert_eq!(phi[0], 1.0);
            prop_assert_eq!(phi.len(), expanded_dim(x.len()).unwrap());
        }

        #[test]
        fn phi_kernel_is_expansion_dot(
            (x, y) in (1usize..6).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d)))
        ) {
            let direct = dot(&expand(&x).unwrap(), &expand(&y).unwrap());
            let k = phi_kernel(&x, &y).unwrap();
            prop_assert!((k - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            let scaled = dot(&expand_scaled(&x).unwrap(), &expand_scaled(&y).unwrap());
            let p = poly_kernel(&x, &y).unwrap();
            prop_assert!((p - scaled).abs() <= 1e-12 * p.abs().max(1.0));
        }

        #[test]
        fn kernels_are_symmetric(
            (x, y) in (1usize..6).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d)))
        ) {
            prop_assert_eq!(poly_kernel(&x, &y).unwrap(), poly_kernel(&y, &x).unwrap());
            prop_assert_eq!(phi_kernel(&x, &y).unwrap(), phi_kernel(&y, &x).unwrap());
        }

        #[test]
        fn gram_matrices_are_psd(
            pts in (1usize..4).prop_flat_map(|d| prop::collection::vec(vec_strategy(d), 2..12))
        ) {
            for kernel in [Kernel::Poly, Kernel::Phi] {
                let gram: Vec<Vec<f64>> = pts
                    .iter()
                    .map(|a| pts.iter().map(|b| kernel.eval(a, b).unwrap()).collect())
                    .collect();
                for (i, row) in gram.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        prop_assert_eq!(*v, gram[j][i]);
                    }
                }
                let eig = eigenvalues_symmetric(gram);
                let max = eig.iter().cloned().fold(0.0, f64::max);
                prop_assert!(eig.iter().all(|&e| e >= -1e-8 * max));
            }
        }
    }
}
