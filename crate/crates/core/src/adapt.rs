//! Dörfler marking, the h/p decision and the solve-estimate-mark-refine
//! loop.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::config::Mode;
use crate::error::{Error, Result};
use crate::estimator::{compute_indicators, EstimatorOptions, IndicatorReport};
use crate::kernels::Material;
use crate::legendre::legendre_coefficients;
use crate::mesh::BoundaryMesh;
use crate::problem::ProblemData;
use crate::quadrature::gl;
use crate::solver::{assemble_system, solve, Discretization, NewtonOptions, SolverState};
use crate::spaces::{evaluate, ScalarBasis, Spaces};

/// Elements above this degree are always bisected.
pub const MAX_DEGREE: usize = 12;

/// Smallest set of elements whose indicators sum to at least `θ` times the
/// total: greedy by descending `η_T²`, ties by ascending id. Returned sorted.
pub fn dorfler_mark(eta2: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {theta}")));
    }
    if eta2.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("indicators must be finite and nonnegative".into()));
    }
    let total: f64 = eta2.iter().sum();
    if total <= 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..eta2.len()).collect();
    order.sort_by(|&a, &b| eta2[b].total_cmp(&eta2[a]).then(a.cmp(&b)));
    let goal = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if acc >= goal || eta2[i] == 0.0 {
            break;
        }
        acc += eta2[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Legendre coefficients of each component of `u` on element `e`.
pub fn local_legendre_coefficients(
    disc: &Discretization,
    u: &[f64],
    e: usize,
) -> Result<[Vec<f64>; 2]> {
    let p = disc.mesh.elements()[e].degree;
    let nodes = &gl(p + 1).nodes;
    let vals: Vec<_> = nodes.iter().map(|&t| evaluate(&disc.spaces.primal, &disc.mesh, u, e, t)).collect();
    let x: Vec<f64> = vals.iter().map(|v| v.x).collect();
    let y: Vec<f64> = vals.iter().map(|v| v.y).collect();
    Ok([legendre_coefficients(nodes, &x, p)?, legendre_coefficients(nodes, &y, p)?])
}

/// Decay ratio `exp(slope)` of the least-squares fit of `log b_i` against
/// `i`, where `b_i = max_{j >= i} |a_j|` so vanishing odd or even modes do not
/// fake decay; `None` for an all-zero sequence.
pub fn decay_ratio(coeffs: &[f64]) -> Option<f64> {
    let amax = coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if amax == 0.0 || coeffs.len() < 2 {
        return None;
    }
    let floor = amax * 1e-16;
    let n = coeffs.len() as f64;
    let mut ys = vec![0.0; coeffs.len()];
    let mut env = 0.0f64;
    for (i, a) in coeffs.iter().enumerate().rev() {
        env = env.max(a.abs());
        ys[i] = env.max(floor).ln();
    }
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    Some((sxy / sxx).exp())
}

/// Split marked elements into h- and p-refinement by the decay of the
/// Legendre coefficients of `u`; the component with the larger coefficients
/// decides.
pub fn hp_decide(
    disc: &Discretization,
    u: &[f64],
    marked: &[usize],
    delta: f64,
) -> Result<(BTreeSet<usize>, BTreeSet<usize>)> {
    let mut h = BTreeSet::new();
    let mut p = BTreeSet::new();
    for &e in marked {
        let c = local_legendre_coefficients(disc, u, e)?;
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        let governing = if norm(&c[0]) >= norm(&c[1]) { &c[0] } else { &c[1] };
        let smooth = match decay_ratio(governing) {
            None => true,
            Some(rho) => rho <= delta,
        };
        if smooth && disc.mesh.elements()[e].degree < MAX_DEGREE {
            p.insert(e);
        } else {
            h.insert(e);
        }
    }
    Ok((h, p))
}

#[derive(Clone, Debug)]
pub struct LoopOptions {
    pub mode: Mode,
    pub theta: f64,
    pub delta: f64,
    pub max_steps: usize,
    pub max_dof: usize,
    pub gamma_bar: f64,
    pub z_extra: usize,
    pub quadrature_tol: f64,
    pub newton: NewtonOptions,
    pub estimator: EstimatorOptions,
}

/// Everything produced by one step of the loop.
#[derive(Clone, Debug)]
pub struct Step {
    pub mesh: BoundaryMesh,
    pub state: SolverState,
    pub report: IndicatorReport,
    pub dof: [usize; 3],
    pub seconds: f64,
}

/// Outcome of the loop. `error` holds the failure that ended it early.
#[derive(Debug)]
pub struct LoopResult {
    pub steps: Vec<Step>,
    pub last: Option<Discretization>,
    pub error: Option<Error>,
}

/// Solve, estimate, mark and refine until `max_steps` steps are done or the
/// next mesh exceeds the DOF budget. `on_step` sees every finished step.
pub fn adaptive_loop(
    data: &ProblemData,
    material: Material,
    initial: BoundaryMesh,
    opts: &LoopOptions,
    mut on_step: impl FnMut(&Step),
) -> LoopResult {
    let mut steps = Vec::new();
    let mut mesh = initial;
    let mut last = None;
    for k in 0..opts.max_steps {
        let start = Instant::now();
        let step = (|| -> Result<(Step, Discretization)> {
            let disc = Discretization::new(mesh.clone(), material, opts.gamma_bar, opts.z_extra, opts.quadrature_tol)?;
            let sys = assemble_system(&disc, data)?;
            let state = solve(&sys, opts.newton)?;
            let report = compute_indicators(&disc, data, &state, opts.estimator)?;
            let dof = [disc.n_u(), disc.n_phi(), disc.n_lambda()];
            let seconds = start.elapsed().as_secs_f64();
            Ok((Step { mesh: mesh.clone(), state, report, dof, seconds }, disc))
        })();
        let (step, disc) = match step {
            Ok(s) => s,
            Err(e) => return LoopResult { steps, last, error: Some(e) },
        };
        on_step(&step);
        if k + 1 == opts.max_steps {
            steps.push(step);
            last = Some(disc);
            break;
        }
        let next = (|| -> Result<BoundaryMesh> {
            let all: Vec<usize> = (0..mesh.len()).collect();
            let (h, p) = match opts.mode {
                Mode::Uniform => (all.into_iter().collect(), BTreeSet::new()),
                Mode::HAdaptive => (dorfler_mark(&step.report.locals(), opts.theta)?.into_iter().collect(), BTreeSet::new()),
                Mode::HpAdaptive => {
                    let marked = dorfler_mark(&step.report.locals(), opts.theta)?;
                    hp_decide(&disc, &step.state.u, &marked, opts.delta)?
                }
            };
            mesh.refine(&h, &p)
        })();
        steps.push(step);
        last = Some(disc);
        match next {
            Ok(m) => {
                if estimate_dof(&m) > opts.max_dof {
                    break;
                }
                mesh = m;
            }
            Err(e) => return LoopResult { steps, last, error: Some(e) },
        }
    }
    LoopResult { steps, last, error: None }
}

/// Unknowns of the mixed system on `mesh`.
pub fn estimate_dof(mesh: &BoundaryMesh) -> usize {
    let sp = Spaces::new(mesh, 0);
    sp.primal.dim() + sp.dual.dim() + sp.multiplier.dim()
}
