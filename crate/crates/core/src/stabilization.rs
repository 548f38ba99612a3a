//! Scaling function `γ`, the projection `Π_HP` and the algebraic
//! stabilization blocks.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::integration::{point_terms, Target};
use crate::kernels::{AdjointDoubleLayer, HypersingularWeak, Material};
use crate::legendre::legendre_all;
use crate::mesh::{BoundaryMesh, Point};
use crate::operators::{assemble_pairing, LegendreDerivatives, OperatorSet, PrimalDerivatives, Values};
use crate::quadrature::gl;
use crate::spaces::{assemble_mass, LegendreSpace, PrimalSpace, ScalarBasis};

/// `γ|_T = γ̄ h_T / p_T²` on contact elements, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaWeights {
    pub gamma_bar: f64,
    values: Vec<f64>,
}

impl GammaWeights {
    pub fn new(mesh: &BoundaryMesh, gamma_bar: f64) -> Result<Self> {
        if !(gamma_bar >= 0.0) || !gamma_bar.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid gamma_bar {gamma_bar}")));
        }
        let values = mesh
            .elements()
            .iter()
            .map(|e| match e.part {
                crate::mesh::Part::Contact => gamma_bar * e.h() / (e.degree * e.degree) as f64,
                _ => 0.0,
            })
            .collect();
        Ok(GammaWeights { gamma_bar, values })
    }

    pub fn value(&self, e: usize) -> f64 {
        self.values[e]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest value over the contact elements.
    pub fn min_contact(&self, mesh: &BoundaryMesh) -> f64 {
        mesh.contact_elements().iter().map(|&e| self.values[e]).fold(f64::INFINITY, f64::min)
    }
}

/// Elementwise L² projection of `f(e, t)` onto the Legendre space `z`.
pub fn project_pihp(z: &LegendreSpace, f: impl Fn(usize, f64) -> Point, quad_extra: usize) -> Vec<f64> {
    let mut c = vec![0.0; z.dim()];
    let mut leg = vec![0.0; 64];
    for &e in z.support() {
        let p = z.degree(e);
        let rule = gl(p + 1 + quad_extra);
        let ids = z.local_ids(e);
        for (t, w) in rule.iter() {
            let v = f(e, t);
            legendre_all(p, t, &mut leg);
            for (k, id) in ids.iter().enumerate() {
                let s = id.unwrap();
                let scale = w * leg[k] * (2 * k + 1) as f64 / 2.0;
                c[2 * s] += scale * v.x;
                c[2 * s + 1] += scale * v.y;
            }
        }
    }
    c
}

/// Stabilization matrices on one mesh.
#[derive(Clone, Debug)]
pub struct StabilizationAssembly {
    pub z: LegendreSpace,
    pub gamma: GammaWeights,
    /// Mass of the projection space.
    pub m: Mat<f64>,
    pub m_gamma: Mat<f64>,
    /// `<W u_j, ξ_i>`.
    pub w_hat: Mat<f64>,
    /// `<K' ψ_j, ξ_i>`.
    pub k_hat: Mat<f64>,
    /// `<ψ_j / 2, ξ_i>`.
    pub half: Mat<f64>,
    /// Coefficients of `W̃ u_j` in the projection space.
    pub a_u: Mat<f64>,
    /// Coefficients of `(K̃ + 1/2)' ψ_j` in the projection space.
    pub a_phi: Mat<f64>,
}

fn diag_inverse(m: &Mat<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].abs() > 1e-12 * scale {
                return Err(Error::SingularSystem("projection mass is not diagonal".into()));
            }
        }
        if !(m[(i, i)] > 0.0) {
            return Err(Error::SingularSystem("projection mass is singular".into()));
        }
    }
    Ok((0..n).map(|i| 1.0 / m[(i, i)]).collect())
}

fn scale_rows(m: &Mat<f64>, d: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)])
}

/// `Ŵ` through elementwise integration by parts: the weak hypersingular
/// kernel against tangential derivatives of the projection basis plus
/// vertex terms.
pub fn assemble_w_hat(
    mesh: &BoundaryMesh,
    z: &LegendreSpace,
    primal: &PrimalSpace,
    material: &Material,
    tol: f64,
) -> Result<Mat<f64>> {
    let q = HypersingularWeak(material.constants());
    let zd = LegendreDerivatives::new(z, mesh);
    let pd = PrimalDerivatives(primal);
    let mut w = assemble_pairing(mesh, &zd, &pd, &q, tol)?;
    let mut terms = Vec::new();
    let mut der = vec![0.0; 64];
    for &ex in z.support() {
        let el = mesh.element(ex)?;
        let ids = z.local_ids(ex);
        for (t_end, sign) in [(-1.0, 1.0), (1.0, -1.0)] {
            let x = Target { point: el.point(t_end), normal: el.normal() };
            for ey in 0..mesh.len() {
                let jy = primal.local_ids(ey);
                if jy.iter().all(Option::is_none) {
                    continue;
                }
                point_terms(mesh, x, ey, &q, primal.degree(ey).saturating_sub(1), tol, &mut terms)?;
                for &(ty, wq, m) in &terms {
                    primal.derivatives(ey, ty, &mut der);
                    for (j, sj) in jy.iter().enumerate() {
                        let Some(sj) = sj else { continue };
                        let f = sign * wq * der[j];
                        if f == 0.0 {
                            continue;
                        }
                        for (k, si) in ids.iter().enumerate() {
                            let si = si.unwrap();
                            // P_k(±1) = (±1)^k
                            let xi = if t_end < 0.0 && k % 2 == 1 { -f } else { f };
                            for ci in 0..2 {
                                for cj in 0..2 {
                                    w[(2 * si + ci, 2 * sj + cj)] += xi * m[(ci, cj)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(w)
}

impl StabilizationAssembly {
    pub fn assemble(
        mesh: &BoundaryMesh,
        primal: &PrimalSpace,
        dual: &LegendreSpace,
        z: LegendreSpace,
        material: &Material,
        gamma: GammaWeights,
        tol: f64,
    ) -> Result<Self> {
        let m = assemble_mass(mesh, &z, &z, |_, _| 1.0)?;
        let m_gamma = assemble_mass(mesh, &z, &z, |e, _| gamma.value(e))?;
        let w_hat = assemble_w_hat(mesh, &z, primal, material, tol)?;
        let k_hat =
            assemble_pairing(mesh, &Values(&z), &Values(dual), &AdjointDoubleLayer(material.constants()), tol)?;
        let half = assemble_mass(mesh, &z, dual, |_, _| 0.5)?;
        let minv = diag_inverse(&m)?;
        let a_u = scale_rows(&w_hat, &minv);
        let a_phi = scale_rows(&(&k_hat + &half), &minv);
        Ok(StabilizationAssembly { z, gamma, m, m_gamma, w_hat, k_hat, half, a_u, a_phi })
    }

    /// Same matrices with a different `γ̄` (only `M^(γ)` changes).
    pub fn with_gamma(&self, mesh: &BoundaryMesh, gamma: GammaWeights) -> Result<Self> {
        let m_gamma = assemble_mass(mesh, &self.z, &self.z, |e, _| gamma.value(e))?;
        Ok(StabilizationAssembly { gamma, m_gamma, ..self.clone() })
    }

    pub fn n_u(&self) -> usize {
        self.a_u.ncols()
    }

    pub fn n_phi(&self) -> usize {
        self.a_phi.ncols()
    }

    /// `A_z = [M⁻¹Ŵ | M⁻¹(K̂' + E/2)]`.
    pub fn a_z(&self) -> Mat<f64> {
        let (nu, np) = (self.n_u(), self.n_phi());
        Mat::from_fn(self.a_u.nrows(), nu + np, |i, j| {
            if j < nu {
                self.a_u[(i, j)]
            } else {
                self.a_phi[(i, j - nu)]
            }
        })
    }

    /// `ŴᵀM⁻¹M^(γ)M⁻¹Ŵ`.
    pub fn composed_ww(&self) -> Mat<f64> {
        self.a_u.transpose() * &self.m_gamma * &self.a_u
    }

    /// `(K̂')ᵀM⁻¹M^(γ)M⁻¹Ŵ`.
    pub fn composed_kw(&self) -> Result<Mat<f64>> {
        let minv = diag_inverse(&self.m)?;
        Ok(scale_rows(&self.k_hat, &minv).transpose() * &self.m_gamma * &self.a_u)
    }

    /// `(K̂')ᵀM⁻¹M^(γ)M⁻¹K̂'`.
    pub fn composed_kk(&self) -> Result<Mat<f64>> {
        let minv = diag_inverse(&self.m)?;
        let a = scale_rows(&self.k_hat, &minv);
        Ok(a.transpose() * &self.m_gamma * &a)
    }

    /// Matrix of `<γ(W̃u + (K̃+1/2)'φ), W̃v + (K̃+1/2)'ψ>` on `X × Y`.
    pub fn stabilization_form(&self) -> Mat<f64> {
        let a = self.a_z();
        a.transpose() * &self.m_gamma * &a
    }
}

/// Smallest eigenvalue of `diag(W, V)` minus the stabilization form, i.e. of
/// the symmetric part of the stabilized bilinear form.
pub fn coercivity_margin(ops: &OperatorSet, stab: &StabilizationAssembly) -> Result<f64> {
    let (nu, np) = (ops.w.nrows(), ops.v.nrows());
    if stab.n_u() != nu || stab.n_phi() != np {
        return Err(Error::Mismatch("operator and stabilization dimensions differ".into()));
    }
    let s = stab.stabilization_form();
    let a = Mat::from_fn(nu + np, nu + np, |i, j| {
        let b = match (i < nu, j < nu) {
            (true, true) => ops.w[(i, j)],
            (false, false) => ops.v[(i - nu, j - nu)],
            _ => 0.0,
        };
        b - 0.5 * (s[(i, j)] + s[(j, i)])
    });
    let ev = a.selfadjoint_eigenvalues(Side::Lower);
    Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
}
