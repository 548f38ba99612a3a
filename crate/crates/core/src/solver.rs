//! Stabilized mixed system and its semi-smooth Newton solution for Tresca
//! and Coulomb friction.
//!
//! The linear unknowns `z = (u, φ)` are eliminated with one dense LU
//! factorization per mesh; Newton then runs on the multipliers (plus the
//! amplitudes of rigid motions not removed by pins).

use faer::solvers::{PartialPivLu, SpSolver};
use faer::Mat;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::Material;
use crate::legendre::legendre_all;
use crate::mesh::{BoundaryMesh, Part, Point};
use crate::operators::OperatorSet;
use crate::problem::{Friction, ProblemData};
use crate::spaces::{assemble_mass, ScalarBasis, Spaces};
use crate::stabilization::{GammaWeights, StabilizationAssembly};

/// Mesh, spaces and operator matrices needed for one solve.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: BoundaryMesh,
    pub spaces: Spaces,
    pub ops: OperatorSet,
    pub stab: StabilizationAssembly,
    pub material: Material,
}

impl Discretization {
    pub fn new(mesh: BoundaryMesh, material: Material, gamma_bar: f64, z_extra: usize, tol: f64) -> Result<Self> {
        let spaces = Spaces::new(&mesh, z_extra);
        let ops = OperatorSet::assemble(&mesh, &spaces.primal, &spaces.dual, &material, tol)?;
        let gamma = GammaWeights::new(&mesh, gamma_bar)?;
        let stab = StabilizationAssembly::assemble(
            &mesh,
            &spaces.primal,
            &spaces.dual,
            spaces.projection.clone(),
            &material,
            gamma,
            tol,
        )?;
        Ok(Discretization { mesh, spaces, ops, stab, material })
    }

    /// Same discretization with another `γ̄`.
    pub fn with_gamma(&self, gamma_bar: f64) -> Result<Self> {
        let stab = self.stab.with_gamma(&self.mesh, GammaWeights::new(&self.mesh, gamma_bar)?)?;
        Ok(Discretization { stab, ..self.clone() })
    }

    pub fn n_u(&self) -> usize {
        self.spaces.primal.dim()
    }

    pub fn n_phi(&self) -> usize {
        self.spaces.dual.dim()
    }

    pub fn n_lambda(&self) -> usize {
        self.spaces.multiplier.dim()
    }
}

/// Point pins and the rigid motions they leave free.
#[derive(Clone, Debug)]
pub struct RigidConstraints {
    /// Dimension of the rigid-motion kernel before pinning.
    pub kernel_dim: usize,
    /// Rows `u(p) = 0` over `z = (u, φ)`.
    pub pins: Mat<f64>,
    /// Orthonormal basis (over `z`) of the rigid motions left after pinning.
    pub kernel: Mat<f64>,
}

/// Pin rows and the remaining kernel for the given pins.
pub fn rigid_body_constraints(
    mesh: &BoundaryMesh,
    spaces: &Spaces,
    pins: &[Point],
) -> Result<RigidConstraints> {
    let primal = &spaces.primal;
    let n_z = primal.dim() + spaces.dual.dim();
    let has_dirichlet = mesh.elements().iter().any(|e| e.part == Part::Dirichlet);
    let kernel_dim = if has_dirichlet { 0 } else { 3 };
    let mut rows = Mat::<f64>::zeros(2 * pins.len(), n_z);
    let mut vals = vec![0.0; 64];
    for (k, p) in pins.iter().enumerate() {
        let (e, t) = locate_point(mesh, *p)?;
        primal.values(e, t, &mut vals);
        for (j, id) in primal.local_ids(e).iter().enumerate() {
            if let Some(s) = id {
                rows[(2 * k, 2 * s)] = vals[j];
                rows[(2 * k + 1, 2 * s + 1)] = vals[j];
            }
        }
    }
    let mut kernel = Mat::<f64>::zeros(n_z, 0);
    if kernel_dim > 0 {
        let motions: [fn(Point) -> Point; 3] =
            [|_| Point::new(1.0, 0.0), |_| Point::new(0.0, 1.0), |x| Point::new(x.y, -x.x)];
        let r: Vec<Vec<f64>> = motions.iter().map(|f| primal.interpolate_affine(mesh, f)).collect();
        let null = if pins.is_empty() {
            DMatrix::<f64>::identity(3, 3)
        } else {
            // padded to at least 3 rows so that V^T is square
            let pr = DMatrix::from_fn(rows.nrows().max(3), 3, |i, j| {
                if i >= rows.nrows() {
                    return 0.0;
                }
                (0..primal.dim()).map(|c| rows[(i, c)] * r[j][c]).sum::<f64>()
            });
            let svd = pr.svd(false, true);
            let vt = svd.v_t.unwrap();
            let smax = svd.singular_values.max().max(1.0);
            let mut cols = Vec::new();
            for i in 0..3 {
                if svd.singular_values[i] <= 1e-10 * smax {
                    cols.push(vt.row(i).transpose());
                }
            }
            DMatrix::from_fn(3, cols.len(), |i, j| cols[j][i])
        };
        let k = null.ncols();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for j in 0..k {
            let mut v = vec![0.0; n_z];
            for (m, rm) in r.iter().enumerate() {
                for c in 0..primal.dim() {
                    v[c] += null[(m, j)] * rm[c];
                }
            }
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        kernel = Mat::from_fn(n_z, k, |i, j| basis[j][i]);
        if k > 0 && mesh.contact_elements().is_empty() {
            return Err(Error::InvalidArgument(format!(
                "insufficient pins: {k} rigid motion(s) remain and there is no contact part"
            )));
        }
    }
    Ok(RigidConstraints { kernel_dim, pins: rows, kernel })
}

fn locate_point(mesh: &BoundaryMesh, p: Point) -> Result<(usize, f64)> {
    for (e, el) in mesh.elements().iter().enumerate() {
        let h = el.h();
        let s = (p - el.a).dot(&el.tangent());
        let off = (p - el.a - el.tangent() * s).norm();
        if off <= 1e-12 * h && s >= -1e-12 * h && s <= h * (1.0 + 1e-12) {
            return Ok((e, (2.0 * s / h - 1.0).clamp(-1.0, 1.0)));
        }
    }
    Err(Error::InvalidArgument(format!("pin {p:?} is not on the boundary")))
}

/// Tangential bound data per constraint node.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    /// Fixed threshold `b_i`.
    Tresca(Vec<f64>),
    /// Coefficient `F_i`; the threshold is `F_i max(0, λ_n)`.
    Coulomb(Vec<f64>),
}

/// The discrete stabilized mixed system.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub n_u: usize,
    pub n_phi: usize,
    pub n_lambda: usize,
    /// `B` minus the stabilization form, over `z = (u, φ)`.
    pub a: Mat<f64>,
    /// Multiplier coupling `<λ, v> - <γλ, W̃v + (K̃+1/2)'ψ>`.
    pub c: Mat<f64>,
    pub rhs: Vec<f64>,
    /// `u` at the constraint nodes, normal/tangent components.
    pub pu: Mat<f64>,
    /// `W̃u + (K̃+1/2)'φ` at the constraint nodes, normal/tangent components.
    pub pz: Mat<f64>,
    /// `γ` per multiplier dof.
    pub gamma: Vec<f64>,
    /// `g` per multiplier dof (zero on tangential components).
    pub gap: Vec<f64>,
    pub bound: Bound,
    pub constraints: RigidConstraints,
}

impl LinearSystem {
    pub fn n_z(&self) -> usize {
        self.n_u + self.n_phi
    }
}

/// Assemble the block system for the given data.
pub fn assemble_system(disc: &Discretization, data: &ProblemData) -> Result<LinearSystem> {
    data.validate(&disc.mesh)?;
    let mesh = &disc.mesh;
    let sp = &disc.spaces;
    let stab = &disc.stab;
    let (n_u, n_phi, n_lambda) = (disc.n_u(), disc.n_phi(), disc.n_lambda());
    let n_z = n_u + n_phi;
    let ops = &disc.ops;
    if ops.w.nrows() != n_u || ops.v.nrows() != n_phi {
        return Err(Error::Mismatch("operator matrices do not match the spaces".into()));
    }
    let s = stab.stabilization_form();
    let a = Mat::from_fn(n_z, n_z, |i, j| {
        let b = match (i < n_u, j < n_u) {
            (true, true) => ops.w[(i, j)],
            (true, false) => ops.k[(j - n_u, i)],
            (false, true) => -ops.k[(i - n_u, j)],
            (false, false) => ops.v[(i - n_u, j - n_u)],
        };
        b - s[(i, j)]
    });
    let coupling = assemble_mass(mesh, &sp.primal, &sp.multiplier, |_, _| 1.0)?;
    let gamma_coupling = assemble_mass(mesh, &stab.z, &sp.multiplier, |e, _| stab.gamma.value(e))?;
    let az = stab.a_z();
    let stab_c = az.transpose() * &gamma_coupling;
    let c = Mat::from_fn(n_z, n_lambda, |i, j| {
        let m = if i < n_u { coupling[(i, j)] } else { 0.0 };
        m - stab_c[(i, j)]
    });
    let mut rhs = data.load_vector(mesh, &sp.primal);
    rhs.resize(n_z, 0.0);

    let nodes = sp.multiplier.nodes();
    let mut pu = Mat::<f64>::zeros(n_lambda, n_u);
    let mut ez = Mat::<f64>::zeros(n_lambda, stab.z.dim());
    let mut gamma = vec![0.0; n_lambda];
    let mut gap = vec![0.0; n_lambda];
    let mut fvals = vec![0.0; nodes.len()];
    let mut vals = vec![0.0; 64];
    for (i, node) in nodes.iter().enumerate() {
        let e = node.element;
        let dirs = [node.normal, node.tangent];
        sp.primal.values(e, node.t, &mut vals);
        for (j, id) in sp.primal.local_ids(e).iter().enumerate() {
            if let Some(sj) = id {
                for (c, d) in dirs.iter().enumerate() {
                    pu[(2 * i + c, 2 * sj)] += vals[j] * d.x;
                    pu[(2 * i + c, 2 * sj + 1)] += vals[j] * d.y;
                }
            }
        }
        legendre_all(stab.z.degree(e), node.t, &mut vals);
        for (j, id) in stab.z.local_ids(e).iter().enumerate() {
            let sj = id.unwrap();
            for (c, d) in dirs.iter().enumerate() {
                ez[(2 * i + c, 2 * sj)] += vals[j] * d.x;
                ez[(2 * i + c, 2 * sj + 1)] += vals[j] * d.y;
            }
        }
        gamma[2 * i] = stab.gamma.value(e);
        gamma[2 * i + 1] = stab.gamma.value(e);
        gap[2 * i] = data.gap.eval(node.point);
        fvals[i] = match &data.friction {
            Friction::Tresca { threshold } => threshold.eval(node.point),
            Friction::Coulomb { coefficient } => coefficient.eval(node.point),
        };
    }
    let pz = &ez * &az;
    let bound = match data.friction {
        Friction::Tresca { .. } => Bound::Tresca(fvals),
        Friction::Coulomb { .. } => Bound::Coulomb(fvals),
    };
    let constraints = rigid_body_constraints(mesh, sp, &data.pins)?;
    Ok(LinearSystem { n_u, n_phi, n_lambda, a, c, rhs, pu, pz, gamma, gap, bound, constraints })
}

/// Nodal projection onto the admissible multiplier set: `λ_n ← max(0, λ_n)`,
/// `λ_t ← clamp(λ_t, -b, b)`. Pairs are `(normal, tangent)` per node.
pub fn project_multiplier(lambda: &[f64], bounds: &[f64]) -> Vec<f64> {
    let mut out = lambda.to_vec();
    for (i, b) in bounds.iter().enumerate() {
        out[2 * i] = out[2 * i].max(0.0);
        out[2 * i + 1] = out[2 * i + 1].clamp(-b, *b);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Parameter of the projection reformulation, in units of the inverse
    /// mean diagonal of the reduced contact operator (see `Reduced::scale`).
    pub r: f64,
    /// Stopping threshold on the square root of the merit function.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { r: 1.0, tol: 1e-12, max_iter: 50 }
    }
}

/// Converged (or last) iterate.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// Nodal multiplier, `(normal, tangent)` per constraint node.
    pub lambda: Vec<f64>,
    /// Amplitudes of the rigid motions left free by the pins.
    pub rigid: Vec<f64>,
    /// Pin reactions.
    pub pin_forces: Vec<f64>,
    /// Number of residual evaluations of the Newton loop (a problem solved
    /// by the initial guess counts one).
    pub iterations: usize,
    /// Squared Euclidean norm of the full residual.
    pub merit: f64,
    /// Normal clamp inactive (node in contact).
    pub in_contact: Vec<bool>,
    /// Tangential clamp binding (node slipping).
    pub slipping: Vec<bool>,
    pub active_sets_stable: bool,
}

/// The linear unknowns eliminated in terms of the multiplier.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub z0: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub beta0: Vec<f64>,
    /// `z = z0 - zc λ + N c`.
    pub zc: Mat<f64>,
    pub alphac: Mat<f64>,
    pub betac: Mat<f64>,
    /// Contact residual `ν = nu0 + h_lambda λ + h_c c`.
    pub nu0: Vec<f64>,
    pub h_lambda: Mat<f64>,
    pub h_c: Mat<f64>,
    /// `1 / mean |diag h_lambda|`; the user parameter `r` is multiplied by it.
    pub scale: f64,
}

fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn finite(m: &Mat<f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

/// Factorize the bordered linear block and express `z` through `λ`.
pub fn reduce(sys: &LinearSystem) -> Result<Reduced> {
    let n_z = sys.n_z();
    let np = sys.constraints.pins.nrows();
    let k = sys.constraints.kernel.ncols();
    let n = n_z + np + k;
    let rp = &sys.constraints.pins;
    let nk = &sys.constraints.kernel;
    let big = Mat::from_fn(n, n, |i, j| {
        if i < n_z && j < n_z {
            sys.a[(i, j)]
        } else if i < n_z && j < n_z + np {
            rp[(j - n_z, i)]
        } else if i < n_z {
            nk[(i, j - n_z - np)]
        } else if i < n_z + np && j < n_z {
            rp[(i - n_z, j)]
        } else if i >= n_z + np && j < n_z {
            nk[(j, i - n_z - np)]
        } else {
            0.0
        }
    });
    let lu: PartialPivLu<f64> = big.partial_piv_lu();
    let nl = sys.n_lambda;
    let rhs = Mat::from_fn(n, 1 + nl, |i, j| {
        if i >= n_z {
            0.0
        } else if j == 0 {
            sys.rhs[i]
        } else {
            sys.c[(i, j - 1)]
        }
    });
    let sol = lu.solve(&rhs);
    if !finite(&sol) {
        return Err(Error::SingularSystem("linear block is singular (gamma_bar too large or broken mesh)".into()));
    }
    let res = &big * &sol - &rhs;
    let rel = res.norm_max() / (big.norm_max() * sol.norm_max() + rhs.norm_max()).max(f64::MIN_POSITIVE);
    if rel > 1e-8 {
        return Err(Error::SingularSystem(format!("linear block solve is inaccurate (relative residual {rel:e})")));
    }
    let z0: Vec<f64> = (0..n_z).map(|i| sol[(i, 0)]).collect();
    let alpha0: Vec<f64> = (0..np).map(|i| sol[(n_z + i, 0)]).collect();
    let beta0: Vec<f64> = (0..k).map(|i| sol[(n_z + np + i, 0)]).collect();
    let zc = Mat::from_fn(n_z, nl, |i, j| sol[(i, j + 1)]);
    let alphac = Mat::from_fn(np, nl, |i, j| sol[(n_z + i, j + 1)]);
    let betac = Mat::from_fn(k, nl, |i, j| sol[(n_z + np + i, j + 1)]);

    // ν = P_u u - g - Γ(P_z z + λ)
    let pu_z0 = &sys.pu * col(&z0[..sys.n_u]);
    let pz_z0 = &sys.pz * col(&z0);
    let nu0: Vec<f64> = (0..nl).map(|i| pu_z0[(i, 0)] - sys.gap[i] - sys.gamma[i] * pz_z0[(i, 0)]).collect();
    let pu_zc = &sys.pu * zc.subrows(0, sys.n_u);
    let pz_zc = &sys.pz * &zc;
    let h_lambda = Mat::from_fn(nl, nl, |i, j| {
        let d = if i == j { sys.gamma[i] } else { 0.0 };
        -pu_zc[(i, j)] + sys.gamma[i] * pz_zc[(i, j)] - d
    });
    let pu_n = &sys.pu * nk.subrows(0, sys.n_u);
    let pz_n = &sys.pz * nk;
    let h_c = Mat::from_fn(nl, k, |i, j| pu_n[(i, j)] - sys.gamma[i] * pz_n[(i, j)]);
    let mean = (0..nl).map(|i| h_lambda[(i, i)].abs()).sum::<f64>() / nl.max(1) as f64;
    let scale = if mean > 0.0 && mean.is_finite() { 1.0 / mean } else { 1.0 };
    Ok(Reduced { z0, alpha0, beta0, zc, alphac, betac, nu0, h_lambda, h_c, scale })
}

struct Eval {
    /// `λ - P(a)` followed by the rigid defects.
    residual: Vec<f64>,
    arg: Vec<f64>,
    bounds: Vec<f64>,
}

fn bounds_for(sys: &LinearSystem, lambda: &[f64]) -> Vec<f64> {
    match &sys.bound {
        Bound::Tresca(b) => b.clone(),
        Bound::Coulomb(f) => f.iter().enumerate().map(|(i, fi)| fi * lambda[2 * i].max(0.0)).collect(),
    }
}

fn evaluate(sys: &LinearSystem, red: &Reduced, y: &[f64], r: f64) -> Eval {
    let nl = sys.n_lambda;
    let k = red.beta0.len();
    let (lambda, c) = y.split_at(nl);
    let mut arg = red.nu0.clone();
    for i in 0..nl {
        let mut s = 0.0;
        for j in 0..nl {
            s += red.h_lambda[(i, j)] * lambda[j];
        }
        for j in 0..k {
            s += red.h_c[(i, j)] * c[j];
        }
        arg[i] = lambda[i] + r * (arg[i] + s);
    }
    let bounds = bounds_for(sys, lambda);
    let p = project_multiplier(&arg, &bounds);
    let mut residual: Vec<f64> = (0..nl).map(|i| lambda[i] - p[i]).collect();
    for m in 0..k {
        let mut b = red.beta0[m];
        for j in 0..nl {
            b -= red.betac[(m, j)] * lambda[j];
        }
        residual.push(b);
    }
    Eval { residual, arg, bounds }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn active_sets(sys: &LinearSystem, ev: &Eval) -> (Vec<bool>, Vec<bool>) {
    let nn = sys.n_lambda / 2;
    let contact = (0..nn).map(|i| ev.arg[2 * i] >= 0.0).collect();
    let slip = (0..nn).map(|i| ev.arg[2 * i + 1].abs() > ev.bounds[i]).collect();
    (contact, slip)
}

fn jacobian(sys: &LinearSystem, red: &Reduced, y: &[f64], ev: &Eval, r: f64) -> Mat<f64> {
    let nl = sys.n_lambda;
    let k = red.beta0.len();
    let n = nl + k;
    let lambda = &y[..nl];
    let mut d = vec![0.0; nl];
    let mut db = vec![0.0; nl];
    for i in 0..nl / 2 {
        d[2 * i] = if ev.arg[2 * i] >= 0.0 { 1.0 } else { 0.0 };
        let at = ev.arg[2 * i + 1];
        if at.abs() <= ev.bounds[i] {
            d[2 * i + 1] = 1.0;
        } else if let Bound::Coulomb(f) = &sys.bound {
            if lambda[2 * i] > 0.0 {
                db[2 * i + 1] = at.signum() * f[i];
            }
        }
    }
    Mat::from_fn(n, n, |i, j| {
        if i < nl {
            let id = if i == j { 1.0 } else { 0.0 };
            if j < nl {
                let dp = d[i] * (id + r * red.h_lambda[(i, j)]);
                let b = if i % 2 == 1 && j == i - 1 { db[i] } else { 0.0 };
                id - dp - b
            } else {
                -d[i] * r * red.h_c[(i, j - nl)]
            }
        } else if j < nl {
            -red.betac[(i - nl, j)]
        } else {
            0.0
        }
    })
}

/// Recover the full state from the multiplier iterate.
fn recover(sys: &LinearSystem, red: &Reduced, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nl = sys.n_lambda;
    let (lambda, c) = y.split_at(nl);
    let n_z = sys.n_z();
    let mut z = red.z0.clone();
    for i in 0..n_z {
        let mut s = 0.0;
        for j in 0..nl {
            s += red.zc[(i, j)] * lambda[j];
        }
        for (m, cm) in c.iter().enumerate() {
            s -= sys.constraints.kernel[(i, m)] * cm;
        }
        z[i] -= s;
    }
    let alpha: Vec<f64> = (0..red.alpha0.len())
        .map(|i| red.alpha0[i] - (0..nl).map(|j| red.alphac[(i, j)] * lambda[j]).sum::<f64>())
        .collect();
    (z, alpha)
}

/// Residual of the linear equations `A z + C λ + R_pᵀ α = F`, `R_p z = 0`.
pub fn linear_residual(sys: &LinearSystem, z: &[f64], lambda: &[f64], alpha: &[f64]) -> Vec<f64> {
    let n_z = sys.n_z();
    let mut r = &sys.a * col(z) + &sys.c * col(lambda);
    let rp = &sys.constraints.pins;
    for i in 0..n_z {
        let mut s = r[(i, 0)] - sys.rhs[i];
        for (m, am) in alpha.iter().enumerate() {
            s += rp[(m, i)] * am;
        }
        r[(i, 0)] = s;
    }
    let pz = rp * col(z);
    let mut out: Vec<f64> = (0..n_z).map(|i| r[(i, 0)]).collect();
    out.extend((0..rp.nrows()).map(|i| pz[(i, 0)]));
    out
}

fn finish(sys: &LinearSystem, red: &Reduced, y: &[f64], r: f64, iterations: usize, stable: bool) -> SolverState {
    let nl = sys.n_lambda;
    let ev = evaluate(sys, red, y, r);
    let (z, alpha) = recover(sys, red, y);
    let lambda = y[..nl].to_vec();
    let lin = linear_residual(sys, &z, &lambda, &alpha);
    let contact_res: f64 = norm2(&ev.residual[..nl]);
    let (in_contact, slipping) = active_sets(sys, &ev);
    SolverState {
        u: z[..sys.n_u].to_vec(),
        phi: z[sys.n_u..].to_vec(),
        lambda,
        rigid: y[nl..].to_vec(),
        pin_forces: alpha,
        iterations,
        merit: contact_res + norm2(&lin),
        in_contact,
        slipping,
        active_sets_stable: stable,
    }
}

/// Semi-smooth Newton method on the projection reformulation.
pub fn solve_newton(sys: &LinearSystem, red: &Reduced, opts: NewtonOptions, start: Option<&[f64]>) -> Result<SolverState> {
    if !(opts.r > 0.0) {
        return Err(Error::InvalidArgument(format!("r must be positive, got {}", opts.r)));
    }
    let nl = sys.n_lambda;
    let k = red.beta0.len();
    let mut y = vec![0.0; nl + k];
    if let Some(s) = start {
        if s.len() == nl {
            y[..nl].copy_from_slice(s);
        }
    }
    let r = opts.r * red.scale;
    let mut prev_sets: Option<(Vec<bool>, Vec<bool>)> = None;
    for it in 1..=opts.max_iter {
        let ev = evaluate(sys, red, &y, r);
        let sets = active_sets(sys, &ev);
        let stable = prev_sets.as_ref() == Some(&sets);
        let m = norm2(&ev.residual);
        let mut state = finish(sys, red, &y, r, it, stable);
        let tol = opts.tol;
        if state.merit.sqrt() < tol {
            // make the clamps exact and recompute, first from the projected
            // argument, else from the iterate itself
            for from in [&ev.arg[..], &y[..nl]] {
                let mut yp = y.clone();
                yp[..nl].copy_from_slice(&project_multiplier(from, &ev.bounds));
                let bounds = bounds_for(sys, &yp[..nl]);
                for i in 0..nl / 2 {
                    yp[2 * i + 1] = yp[2 * i + 1].clamp(-bounds[i], bounds[i]);
                }
                let exact = finish(sys, red, &yp, r, it, stable || it == 1);
                if exact.merit.sqrt() < tol {
                    state = exact;
                    break;
                }
            }
            state.active_sets_stable = stable || it == 1;
            return Ok(state);
        }
        let jac = jacobian(sys, red, &y, &ev, r);
        let lu = jac.partial_piv_lu();
        let rhs = Mat::from_fn(nl + k, 1, |i, _| -ev.residual[i]);
        let dy = lu.solve(&rhs);
        if !finite(&dy) {
            return Err(Error::SingularSystem(format!("singular Newton matrix at iteration {it}")));
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..y.len()).map(|i| y[i] + t * dy[(i, 0)]).collect();
            let mt = norm2(&evaluate(sys, red, &trial, r).residual);
            if mt <= (1.0 - 1e-4 * t) * m {
                y = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            for i in 0..y.len() {
                y[i] += dy[(i, 0)];
            }
        }
        prev_sets = Some(sets);
        state.iterations = it;
    }
    let last = finish(sys, red, &y, r, opts.max_iter, false);
    Err(Error::NotConverged { iterations: opts.max_iter, residual: last.merit.sqrt() })
}

/// Reduce and solve; dispatches on the friction law through the bound
/// stored in the system.
pub fn solve(sys: &LinearSystem, opts: NewtonOptions) -> Result<SolverState> {
    let red = reduce(sys)?;
    solve_newton(sys, &red, opts, None)
}

/// Projection fixed-point iteration `λ ← P(λ + r ν(λ))` (no Newton). Only
/// for systems without free rigid motions.
pub fn solve_fixed_point(sys: &LinearSystem, red: &Reduced, r: f64, tol: f64, max_iter: usize) -> Result<SolverState> {
    if !red.beta0.is_empty() {
        return Err(Error::InvalidArgument("fixed-point iteration needs a system without free rigid motions".into()));
    }
    let nl = sys.n_lambda;
    let r = r * red.scale;
    let mut y = vec![0.0; nl];
    for it in 1..=max_iter {
        let ev = evaluate(sys, red, &y, r);
        let next = project_multiplier(&ev.arg, &ev.bounds);
        let step = norm2(&ev.residual).sqrt();
        y = next;
        if step < tol {
            return Ok(finish(sys, red, &y, r, it, true));
        }
    }
    let ev = evaluate(sys, red, &y, r);
    Err(Error::NotConverged { iterations: max_iter, residual: norm2(&ev.residual).sqrt() })
}

/// Coulomb friction by fixed-point iteration in the threshold: each outer
/// step solves a Tresca problem with threshold `F max(0, λ_n)` from the
/// previous step.
pub fn solve_coulomb_two_loop(
    sys: &LinearSystem,
    opts: NewtonOptions,
    outer_tol: f64,
    max_outer: usize,
) -> Result<(SolverState, usize)> {
    let Bound::Coulomb(f) = &sys.bound else {
        return Err(Error::InvalidArgument("two-loop solver needs a Coulomb system".into()));
    };
    let red = reduce(sys)?;
    let nn = sys.n_lambda / 2;
    let mut lambda = vec![0.0f64; sys.n_lambda];
    let mut inner = sys.clone();
    let mut last_change = f64::INFINITY;
    for outer in 1..=max_outer {
        inner.bound = Bound::Tresca((0..nn).map(|i| f[i] * lambda[2 * i].max(0.0)).collect());
        let state = solve_newton(&inner, &red, opts, Some(&lambda))?;
        let change = state.lambda.iter().zip(&lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = state.lambda.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        lambda = state.lambda.clone();
        if change <= outer_tol * scale {
            return Ok((state, outer));
        }
        if outer > 10 && change > last_change {
            log::warn!("Coulomb outer loop not contracting at step {outer}: change {change:e}");
        }
        last_change = change;
    }
    Err(Error::NotConverged { iterations: max_outer, residual: last_change })
}
