//! Factorisation of the negative penalised Hessian `A + B Q Bᵀ`.
//!
//! `Q = Σ_n (diag p_n − p_n p_nᵀ) ⊗ φ̃_n φ̃_nᵀ` lives in the `K·H` space of
//! effective weights and `B` is block-diagonal with blocks `R_{S_k}`. The
//! Woodbury identity in push-through form gives
//! `(A + B Q Bᵀ)⁻¹ = A⁻¹ − A⁻¹ B (I + Q G)⁻¹ Q Bᵀ A⁻¹`, `G = Bᵀ A⁻¹ B`,
//! which holds for singular `Q`; nothing of size `W × W` is ever formed.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::problem::{Posteriors, TrainingProblem};
use super::state::TrainState;
use crate::error::{Result, SdgmError};

pub(crate) struct Curvature {
    comps: Vec<usize>,
    feats: Vec<Vec<usize>>,
    /// Inverse precisions per active weight, component-major.
    alpha_inv: Vec<f64>,
    h: usize,
    q: DMatrix<f64>,
    capacitance: LU<f64, Dyn, Dyn>,
}

impl Curvature {
    pub(crate) fn new(
        problem: &TrainingProblem,
        state: &TrainState,
        post: &Posteriors,
    ) -> Result<Self> {
        let comps: Vec<usize> = state.active_components().collect();
        let feats: Vec<Vec<usize>> = comps.iter().map(|&k| state.active_features(k)).collect();
        let alpha_inv: Vec<f64> = comps
            .iter()
            .zip(&feats)
            .flat_map(|(&k, fs)| {
                fs.iter()
                    .map(move |&f| 1.0 / state.alpha[state.index(k, f)])
            })
            .collect();
        let h = problem.basis_dim();
        let ka = comps.len();
        let n = problem.len();
        let basis = &problem.basis;

        // Q = blockdiag(Φᵀ diag(p_k) Φ) − Vᵀ V with V[n, (k, j)] = p_nk φ_nj
        let mut v = DMatrix::zeros(n, ka * h);
        for (a, &k) in comps.iter().enumerate() {
            for j in 0..h {
                for i in 0..n {
                    v[(i, a * h + j)] = post.joint[(i, k)] * basis[(i, j)];
                }
            }
        }
        let vt = v.transpose();
        let mut q = -(&vt * &v);
        for a in 0..ka {
            let block = vt.rows(a * h, h) * basis;
            let mut view = q.view_mut((a * h, a * h), (h, h));
            view += block;
        }

        // G_k = R_{S_k}ᵀ A_k⁻¹ R_{S_k}, then I + Q G block column by block column
        let mut capacitance = DMatrix::identity(ka * h, ka * h);
        let mut offset = 0;
        for (a, fs) in feats.iter().enumerate() {
            let mut g = DMatrix::zeros(h, h);
            for (j, &f) in fs.iter().enumerate() {
                let s = alpha_inv[offset + j];
                for p in 0..h {
                    let rp = problem.rows[(f, p)] * s;
                    if rp != 0.0 {
                        for r in 0..h {
                            g[(p, r)] += rp * problem.rows[(f, r)];
                        }
                    }
                }
            }
            offset += fs.len();
            let qg = q.columns(a * h, h) * g;
            let mut cols = capacitance.columns_mut(a * h, h);
            cols += qg;
        }
        let capacitance = capacitance.lu();
        if !capacitance.is_invertible() {
            return Err(SdgmError::Training("capacitance matrix is singular".into()));
        }
        Ok(Self {
            comps,
            feats,
            alpha_inv,
            h,
            q,
            capacitance,
        })
    }

    /// `Bᵀ v` for a vector over active weights; returns a `K·H` vector.
    fn bt(&self, problem: &TrainingProblem, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.comps.len() * self.h);
        let mut offset = 0;
        for (a, fs) in self.feats.iter().enumerate() {
            for (j, &f) in fs.iter().enumerate() {
                let x = v[offset + j];
                if x != 0.0 {
                    for p in 0..self.h {
                        out[a * self.h + p] += problem.rows[(f, p)] * x;
                    }
                }
            }
            offset += fs.len();
        }
        out
    }

    /// `(A + B Q Bᵀ)⁻¹ g`.
    pub(crate) fn solve(&self, problem: &TrainingProblem, g: &[f64]) -> Vec<f64> {
        let a_inv_g: Vec<f64> = g.iter().zip(&self.alpha_inv).map(|(x, s)| x * s).collect();
        let b = self.bt(problem, &a_inv_g);
        let e = self
            .capacitance
            .solve(&(&self.q * b))
            .expect("invertibility checked at construction");
        let mut out = a_inv_g;
        let mut offset = 0;
        for (a, fs) in self.feats.iter().enumerate() {
            for (j, &f) in fs.iter().enumerate() {
                let proj: f64 = (0..self.h)
                    .map(|p| problem.rows[(f, p)] * e[a * self.h + p])
                    .sum();
                out[offset + j] -= self.alpha_inv[offset + j] * proj;
            }
            offset += fs.len();
        }
        out
    }

    /// Diagonal of `Λ = (A + B Q Bᵀ)⁻¹`.
    pub(crate) fn covariance_diagonal(&self, problem: &TrainingProblem) -> Vec<f64> {
        // T = (I + Q G)⁻¹ Q, only its diagonal blocks are needed
        let t_full = self
            .capacitance
            .solve(&self.q)
            .expect("invertibility checked at construction");
        let mut out = Vec::with_capacity(self.alpha_inv.len());
        let mut offset = 0;
        for (a, fs) in self.feats.iter().enumerate() {
            let t = t_full.view((a * self.h, a * self.h), (self.h, self.h));
            for (j, &f) in fs.iter().enumerate() {
                let row = problem.rows.row(f).transpose();
                let quad = (row.transpose() * t * &row)[(0, 0)];
                let s = self.alpha_inv[offset + j];
                out.push(s - s * s * quad);
            }
            offset += fs.len();
        }
        out
    }
}
