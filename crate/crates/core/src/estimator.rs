//! Residual a posteriori error indicators for the stabilized mixed contact
//! discretization.

use crate::error::Result;
use crate::legendre::{lagrange_derivative, legendre_all};
use crate::mesh::{Part, Point};
use crate::operators::{adjoint_double_layer_at, evaluate_potential, hypersingular_at, ElementField, PotentialKind};
use crate::problem::{Friction, ProblemData};
use crate::quadrature::gl;
use crate::solver::{Discretization, SolverState};
use crate::spaces::{evaluate, ScalarBasis};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorOptions {
    /// Divide the squared Neumann and Calderón indicators by 100.
    pub scaled_weighting: bool,
    pub tol: f64,
    /// Quadrature points per element beyond `p_T`.
    pub extra_points: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { scaled_weighting: true, tol: 1e-10, extra_points: 6 }
    }
}

/// Local contributions of one element. All entries are nonnegative; the
/// first five are squared residual norms, the rest are contact terms
/// restricted to the element.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementIndicators {
    /// `(h/p) ‖f - W u - (K+1/2)' φ‖²` on Neumann elements.
    pub neumann: f64,
    /// `(h/p) ‖λ + W u + (K+1/2)' φ‖²` on contact elements.
    pub contact: f64,
    /// `h ‖∂_s (V φ - (K+1/2) u)‖²`.
    pub calderon: f64,
    /// `(h/p²) ‖(I - Π) W u‖²` on contact elements.
    pub w_approx: f64,
    /// `(h/p²) ‖(I - Π) K' φ‖²` on contact elements.
    pub k_approx: f64,
    /// `(h/p) ‖(λ_n)⁻‖²`.
    pub normal_sign: f64,
    /// `(h/p) ‖(|λ_t| - b)⁺‖²`.
    pub slip_excess: f64,
    /// `<(λ_n)⁺, (g - u_n)⁺>`.
    pub complementarity: f64,
    /// `(‖(g - u_n)⁻‖_{L²} ‖(g - u_n)⁻‖_{H¹})` on the element.
    pub penetration: f64,
    /// `-<(|λ_t| - b)⁻, |u_t|>`.
    pub stick: f64,
    /// `<|λ_t|, |u_t|> - <λ_t, u_t>`.
    pub alignment: f64,
}

impl ElementIndicators {
    fn weighted_total(&self, scaled_weighting: bool) -> f64 {
        let s = if scaled_weighting { 0.01 } else { 1.0 };
        s * (self.neumann + self.calderon)
            + self.contact
            + self.w_approx
            + self.k_approx
            + self.normal_sign
            + self.slip_excess
            + self.complementarity
            + self.penetration
            + self.stick
            + self.alignment
    }
}

/// Sums of the squared contributions over the mesh.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Contributions {
    pub neumann: f64,
    pub contact: f64,
    pub calderon: f64,
    pub w_approx: f64,
    pub k_approx: f64,
    pub normal_sign: f64,
    pub slip_excess: f64,
    pub complementarity: f64,
    pub penetration: f64,
    pub stick: f64,
    pub alignment: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorReport {
    pub elements: Vec<ElementIndicators>,
    pub scaled_weighting: bool,
}

impl IndicatorReport {
    /// `η_T²` used for marking.
    pub fn local(&self, e: usize) -> f64 {
        self.elements[e].weighted_total(self.scaled_weighting)
    }

    pub fn locals(&self) -> Vec<f64> {
        (0..self.elements.len()).map(|e| self.local(e)).collect()
    }

    /// `η²`, the sum of the local contributions.
    pub fn total_squared(&self) -> f64 {
        self.locals().iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.total_squared().sqrt()
    }

    pub fn contributions(&self) -> Contributions {
        let mut c = Contributions::default();
        for e in &self.elements {
            c.neumann += e.neumann;
            c.contact += e.contact;
            c.calderon += e.calderon;
            c.w_approx += e.w_approx;
            c.k_approx += e.k_approx;
            c.normal_sign += e.normal_sign;
            c.slip_excess += e.slip_excess;
            c.complementarity += e.complementarity;
            c.penetration += e.penetration;
            c.stick += e.stick;
            c.alignment += e.alignment;
        }
        c
    }
}

/// Pointwise access to the discrete solution and its boundary operators.
pub struct SolutionFields<'a> {
    disc: &'a Discretization,
    data: &'a ProblemData,
    state: &'a SolverState,
    u: ElementField,
    du: ElementField,
    phi: ElementField,
    tol: f64,
}

impl<'a> SolutionFields<'a> {
    pub fn new(disc: &'a Discretization, data: &'a ProblemData, state: &'a SolverState, tol: f64) -> Self {
        let (m, sp) = (&disc.mesh, &disc.spaces);
        SolutionFields {
            disc,
            data,
            state,
            u: ElementField::trace(&sp.primal, m, &state.u),
            du: ElementField::trace_derivative(&sp.primal, m, &state.u),
            phi: ElementField::density(&sp.dual, m, &state.phi),
            tol,
        }
    }

    pub fn u(&self, e: usize, t: f64) -> Point {
        self.u.eval(e, t)
    }

    pub fn phi(&self, e: usize, t: f64) -> Point {
        self.phi.eval(e, t)
    }

    /// Multiplier in Cartesian components (zero off the contact part).
    pub fn lambda(&self, e: usize, t: f64) -> Point {
        let sp = &self.disc.spaces.multiplier;
        if sp.local_ids(e).is_empty() {
            return Point::zeros();
        }
        evaluate(sp, &self.disc.mesh, &self.state.lambda, e, t)
    }

    pub fn w_u(&self, e: usize, t: f64) -> Result<Point> {
        hypersingular_at(&self.disc.mesh, &self.du, &self.disc.material, e, t, self.tol)
    }

    /// `K' φ` without the `1/2` term.
    pub fn k_adj_phi(&self, e: usize, t: f64) -> Result<Point> {
        adjoint_double_layer_at(&self.disc.mesh, &self.phi, &self.disc.material, e, t, self.tol)
    }

    /// `V φ - (K + 1/2) u` at an interior point.
    pub fn calderon(&self, e: usize, t: f64) -> Result<Point> {
        let (m, mat) = (&self.disc.mesh, &self.disc.material);
        let v = evaluate_potential(PotentialKind::SingleLayer, m, &self.phi, mat, e, t, self.tol)?;
        let k = evaluate_potential(PotentialKind::DoubleLayer, m, &self.u, mat, e, t, self.tol)?;
        Ok(v - k - self.u(e, t) * 0.5)
    }

    /// `f - W u - (K + 1/2)' φ - λ`.
    pub fn traction_residual(&self, e: usize, t: f64) -> Result<Point> {
        Ok(self.traction_residual_from(e, t, self.w_u(e, t)?, self.k_adj_phi(e, t)?))
    }

    fn traction_residual_from(&self, e: usize, t: f64, wu: Point, kp: Point) -> Point {
        let el = &self.disc.mesh.elements()[e];
        let f = if el.part == Part::Neumann {
            let (sa, sb) = self.disc.mesh.geometry().side_endpoints(el.side);
            let x = el.point(t);
            let s = (x - sa).dot(&(sb - sa)) / (sb - sa).norm_squared();
            self.data.traction(el.side, s, x)
        } else {
            Point::zeros()
        };
        f - wu - kp - self.phi(e, t) * 0.5 - self.lambda(e, t)
    }
}

fn l2_projection_defect(values: &[Point], rule: &crate::quadrature::QuadratureRule, degree: usize) -> f64 {
    let mut leg = vec![0.0; degree + 1];
    let mut coef = vec![Point::zeros(); degree + 1];
    for ((t, w), v) in rule.iter().zip(values) {
        legendre_all(degree, t, &mut leg);
        for k in 0..=degree {
            coef[k] += v * (w * leg[k] * (2 * k + 1) as f64 / 2.0);
        }
    }
    let mut s = 0.0;
    for ((t, w), v) in rule.iter().zip(values) {
        legendre_all(degree, t, &mut leg);
        let p = (0..=degree).fold(Point::zeros(), |a, k| a + coef[k] * leg[k]);
        s += w * (v - p).norm_squared();
    }
    s
}

/// Evaluate every local contribution for a converged state.
pub fn compute_indicators(
    disc: &Discretization,
    data: &ProblemData,
    state: &SolverState,
    opts: EstimatorOptions,
) -> Result<IndicatorReport> {
    let fields = SolutionFields::new(disc, data, state, opts.tol);
    let mesh = &disc.mesh;
    let mut out = Vec::with_capacity(mesh.len());
    for (e, el) in mesh.elements().iter().enumerate() {
        let mut ind = ElementIndicators::default();
        let (h, p) = (el.h(), el.degree as f64);
        let jac = el.jacobian();

        // Calderón residual through its interpolant at p + 2 interior points
        let nodes = &gl(el.degree + 2).nodes;
        let samples: Vec<Point> = nodes.iter().map(|&t| fields.calderon(e, t)).collect::<Result<_>>()?;
        let mut dl = vec![0.0; nodes.len()];
        for (t, w) in gl(el.degree + 2).iter() {
            lagrange_derivative(nodes, t, &mut dl);
            let d = samples.iter().zip(&dl).fold(Point::zeros(), |a, (s, c)| a + s * *c) / jac;
            ind.calderon += w * jac * d.norm_squared();
        }
        ind.calderon *= h;

        if el.part == Part::Dirichlet {
            out.push(ind);
            continue;
        }
        let rule = gl(el.degree + opts.extra_points);
        let mut wu = Vec::with_capacity(rule.len());
        let mut kp = Vec::with_capacity(rule.len());
        for (t, _) in rule.iter() {
            wu.push(fields.w_u(e, t)?);
            kp.push(fields.k_adj_phi(e, t)?);
        }
        let mut res = 0.0;
        for (i, (t, w)) in rule.iter().enumerate() {
            let r = fields.traction_residual_from(e, t, wu[i], kp[i]);
            res += w * jac * r.norm_squared();
        }
        if el.part == Part::Neumann {
            ind.neumann = h / p * res;
            out.push(ind);
            continue;
        }
        ind.contact = h / p * res;
        let zdeg = disc.stab.z.degree(e);
        ind.w_approx = h / (p * p) * jac * l2_projection_defect(&wu, rule, zdeg);
        ind.k_approx = h / (p * p) * jac * l2_projection_defect(&kp, rule, zdeg);

        let (n, tg) = (el.normal(), el.tangent());
        let coulomb = match &data.friction {
            Friction::Tresca { threshold } => Err(threshold),
            Friction::Coulomb { coefficient } => Ok(coefficient),
        };
        let dx = 1e-6 * h;
        let mut pen_l2 = 0.0;
        let mut pen_h1 = 0.0;
        for (t, w) in rule.iter() {
            let x = el.point(t);
            let (u, l) = (fields.u(e, t), fields.lambda(e, t));
            let (un, ut) = (u.dot(&n), u.dot(&tg));
            let (ln, lt) = (l.dot(&n), l.dot(&tg));
            let g = data.gap.eval(x);
            let b = match coulomb {
                Err(f) => f.eval(x),
                Ok(f) => f.eval(x) * ln,
            };
            let wj = w * jac;
            ind.normal_sign += wj * ln.min(0.0).powi(2);
            ind.slip_excess += wj * (lt.abs() - b).max(0.0).powi(2);
            ind.complementarity += wj * ln.max(0.0) * (g - un).max(0.0);
            ind.stick -= wj * (lt.abs() - b).min(0.0) * ut.abs();
            ind.alignment += wj * (lt.abs() * ut.abs() - lt * ut).max(0.0);
            let d = g - un;
            if d < 0.0 {
                let dg = (data.gap.eval(x + tg * dx) - data.gap.eval(x - tg * dx)) / (2.0 * dx);
                let dun = fields.du.eval(e, t).dot(&n);
                pen_l2 += wj * d * d;
                pen_h1 += wj * (d * d + (dg - dun).powi(2));
            }
        }
        ind.normal_sign *= h / p;
        ind.slip_excess *= h / p;
        ind.penetration = (pen_l2 * pen_h1).sqrt();
        out.push(ind);
    }
    Ok(IndicatorReport { elements: out, scaled_weighting: opts.scaled_weighting })
}
