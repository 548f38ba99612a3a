//! Run orchestration, CSV records, approximate errors and rate fits.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adapt::{adaptive_loop, LoopOptions, Step};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::estimator::{compute_indicators, EstimatorOptions, IndicatorReport};
use crate::legendre::{h1_shape, legendre_coefficients};
use crate::mesh::{BoundaryMesh, Point};
use crate::operators::{dump_matrix, ElementField};
use crate::quadrature::gl;
use crate::solver::{assemble_system, solve, Discretization, SolverState};
use crate::spaces::{evaluate, ScalarBasis, Spaces};

/// First line of every run CSV.
pub const CSV_VERSION_LINE: &str = "# frictionbem run v1";

/// One row of the run CSV. Contribution columns are square roots of the
/// (unweighted) sums over the mesh; `eta_total` includes the weighting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: usize,
    pub dof_u: usize,
    pub dof_phi: usize,
    pub dof_lambda: usize,
    pub eta_total: f64,
    pub eta_n: f64,
    pub eta_c: f64,
    pub eta_v: f64,
    pub eta_w: f64,
    pub eta_k: f64,
    pub eta_lambda_n: f64,
    pub eta_slip: f64,
    pub eta_compl: f64,
    pub eta_pen: f64,
    pub eta_stick: f64,
    pub eta_align: f64,
    pub newton_iters: usize,
    pub merit: f64,
    pub seconds: f64,
    pub approx_error: Option<f64>,
}

impl RunRecord {
    pub fn new(step: usize, dof: [usize; 3], report: &IndicatorReport, state: &SolverState, seconds: f64) -> Self {
        let c = report.contributions();
        RunRecord {
            step,
            dof_u: dof[0],
            dof_phi: dof[1],
            dof_lambda: dof[2],
            eta_total: report.total(),
            eta_n: c.neumann.sqrt(),
            eta_c: c.contact.sqrt(),
            eta_v: c.calderon.sqrt(),
            eta_w: c.w_approx.sqrt(),
            eta_k: c.k_approx.sqrt(),
            eta_lambda_n: c.normal_sign.sqrt(),
            eta_slip: c.slip_excess.sqrt(),
            eta_compl: c.complementarity.sqrt(),
            eta_pen: c.penetration.sqrt(),
            eta_stick: c.stick.sqrt(),
            eta_align: c.alignment.sqrt(),
            newton_iters: state.iterations,
            merit: state.merit,
            seconds,
            approx_error: None,
        }
    }

    pub fn dof(&self) -> usize {
        self.dof_u + self.dof_phi + self.dof_lambda
    }
}

/// Incremental CSV writer; every row is flushed.
pub struct RecordWriter {
    inner: csv::Writer<File>,
}

impl RecordWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut f = File::create(path)?;
        writeln!(f, "{CSV_VERSION_LINE}")?;
        Ok(RecordWriter { inner: csv::Writer::from_writer(f) })
    }

    pub fn write(&mut self, r: &RunRecord) -> Result<()> {
        self.inner.serialize(r)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = RecordWriter::create(path)?;
    records.iter().try_for_each(|r| w.write(r))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path)?;
    if text.lines().next() != Some(CSV_VERSION_LINE) {
        return Err(Error::Config(format!("{} is not a v1 run CSV", path.display())));
    }
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Least-squares slope of `log q` against `log dof`, negated.
pub fn rate_fit(dof: &[f64], q: &[f64]) -> Result<f64> {
    if dof.len() != q.len() {
        return Err(Error::InvalidArgument("length mismatch".into()));
    }
    if dof.len() < 3 {
        return Err(Error::InvalidArgument(format!("rate fit needs at least 3 points, got {}", dof.len())));
    }
    if dof.iter().chain(q).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("rate fit needs positive values".into()));
    }
    let xs: Vec<f64> = dof.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (xm, ym) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct DOF counts".into()));
    }
    Ok(-sxy / sxx)
}

/// Rate of a record column over the last `last` records (all if `None`).
pub fn record_rate(records: &[RunRecord], column: impl Fn(&RunRecord) -> Option<f64>, last: Option<usize>) -> Result<f64> {
    let pts: Vec<(f64, f64)> = records.iter().filter_map(|r| column(r).map(|q| (r.dof() as f64, q))).collect();
    let k = last.unwrap_or(pts.len()).min(pts.len());
    let pts = &pts[pts.len() - k..];
    let (d, q): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    rate_fit(&d, &q)
}

/// Coefficients of coarse `(u, φ, λ)` in the spaces of `fine`. The fine mesh
/// must arise from `coarse` by bisection and degree increase.
pub fn prolong(
    coarse: &BoundaryMesh,
    state: &SolverState,
    fine: &Discretization,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let csp = Spaces::new(coarse, 0);
    let fm = &fine.mesh;
    let fsp = &fine.spaces;
    let cu = ElementField::trace(&csp.primal, coarse, &state.u);
    let cphi = ElementField::density(&csp.dual, coarse, &state.phi);
    let eps = 1e-12 * fm.geometry().perimeter();
    let mut parent = Vec::with_capacity(fm.len());
    for f in fm.elements() {
        let c = coarse.locate(0.5 * (f.s0 + f.s1));
        let ce = &coarse.elements()[c];
        if f.s0 < ce.s0 - eps || f.s1 > ce.s1 + eps || f.degree < ce.degree {
            return Err(Error::Mismatch("meshes are not nested".into()));
        }
        let map = move |t: f64| {
            let s = f.s0 + 0.5 * (t + 1.0) * (f.s1 - f.s0);
            2.0 * (s - ce.s0) / (ce.s1 - ce.s0) - 1.0
        };
        parent.push((c, map));
    }

    let mut u = vec![0.0; fsp.primal.dim()];
    let mut shape = vec![0.0; 64];
    let mut der = vec![0.0; 64];
    for (e, el) in fm.elements().iter().enumerate() {
        let (c, map) = parent[e];
        let p = el.degree;
        let nodes = &gl(p + 1).nodes;
        let a = DMatrix::from_fn(p + 1, p + 1, |i, j| {
            h1_shape(p, nodes[i], &mut shape, &mut der);
            shape[j]
        });
        let lu = a.lu();
        for comp in 0..2 {
            let b = DVector::from_fn(p + 1, |i, _| {
                let v = cu.eval(c, map(nodes[i]));
                if comp == 0 { v.x } else { v.y }
            });
            let x = lu.solve(&b).ok_or_else(|| Error::SingularSystem("local interpolation".into()))?;
            for (k, id) in fsp.primal.local_ids(e).iter().enumerate() {
                if let Some(s) = id {
                    u[2 * s + comp] = x[k];
                }
            }
        }
    }

    let mut phi = vec![0.0; fsp.dual.dim()];
    for (e, el) in fm.elements().iter().enumerate() {
        let (c, map) = parent[e];
        let q = el.degree - 1;
        let nodes = &gl(q + 1).nodes;
        let vals: Vec<Point> = nodes.iter().map(|&t| cphi.eval(c, map(t))).collect();
        let cx = legendre_coefficients(nodes, &vals.iter().map(|v| v.x).collect::<Vec<_>>(), q)?;
        let cy = legendre_coefficients(nodes, &vals.iter().map(|v| v.y).collect::<Vec<_>>(), q)?;
        for (k, id) in fsp.dual.local_ids(e).iter().enumerate() {
            let s = id.unwrap();
            phi[2 * s] = cx[k];
            phi[2 * s + 1] = cy[k];
        }
    }

    let mut lambda = vec![0.0; fsp.multiplier.dim()];
    for (i, node) in fsp.multiplier.nodes().iter().enumerate() {
        let (c, map) = parent[node.element];
        let l = if csp.multiplier.local_ids(c).is_empty() {
            Point::zeros()
        } else {
            evaluate(&csp.multiplier, coarse, &state.lambda, c, map(node.t))
        };
        lambda[2 * i] = l.dot(&node.normal);
        lambda[2 * i + 1] = l.dot(&node.tangent);
    }
    Ok((u, phi, lambda))
}

fn quad_form(m: &Mat<f64>, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..v.len() {
        if v[j] == 0.0 {
            continue;
        }
        let mut r = 0.0;
        for i in 0..v.len() {
            r += m[(i, j)] * v[i];
        }
        s += r * v[j];
    }
    s
}

/// `‖u_ref - u‖_W² + ‖φ_ref - φ‖_V² + Σ (h/p²) ‖λ_ref - λ‖²` with `u, φ, λ`
/// given in the spaces of `reference`.
pub fn energy_error_squared(reference: &Discretization, r: &SolverState, u: &[f64], phi: &[f64], lambda: &[f64]) -> f64 {
    let du: Vec<f64> = r.u.iter().zip(u).map(|(a, b)| a - b).collect();
    let dp: Vec<f64> = r.phi.iter().zip(phi).map(|(a, b)| a - b).collect();
    let mut l = 0.0;
    for (i, node) in reference.spaces.multiplier.nodes().iter().enumerate() {
        let el = &reference.mesh.elements()[node.element];
        let w = el.h() / (el.degree * el.degree) as f64;
        let d2 = (r.lambda[2 * i] - lambda[2 * i]).powi(2) + (r.lambda[2 * i + 1] - lambda[2 * i + 1]).powi(2);
        l += node.weight * w * d2;
    }
    (quad_form(&reference.ops.w, &du) + quad_form(&reference.ops.v, &dp) + l).max(0.0)
}

/// Approximate energy error of every step against the last one.
pub fn approximate_error(steps: &[Step], reference: &Discretization) -> Result<Vec<f64>> {
    let Some(last) = steps.last() else { return Ok(Vec::new()) };
    steps
        .iter()
        .map(|s| {
            let (u, phi, lambda) = prolong(&s.mesh, &s.state, reference)?;
            Ok(energy_error_squared(reference, &last.state, &u, &phi, &lambda).sqrt())
        })
        .collect()
}

/// Overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub mode: Option<Mode>,
    pub gamma_bar: Option<f64>,
    pub max_steps: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunOverrides {
    pub fn apply(&self, c: &mut RunConfig) {
        if let Some(m) = self.mode {
            c.adaptivity.mode = m;
        }
        if let Some(g) = self.gamma_bar {
            c.discretization.gamma_bar = g;
        }
        if let Some(n) = self.max_steps {
            c.adaptivity.max_steps = n;
        }
        if let Some(o) = &self.out {
            c.output.dir = Some(o.to_string_lossy().into_owned());
        }
    }
}

pub fn loop_options(c: &RunConfig) -> LoopOptions {
    LoopOptions {
        mode: c.adaptivity.mode,
        theta: c.adaptivity.theta,
        delta: c.adaptivity.delta,
        max_steps: c.adaptivity.max_steps,
        max_dof: c.adaptivity.max_dof,
        gamma_bar: c.discretization.gamma_bar,
        z_extra: c.discretization.z_extra,
        quadrature_tol: c.discretization.quadrature_tol,
        newton: c.newton_options(),
        estimator: EstimatorOptions {
            scaled_weighting: c.adaptivity.scaled_weighting,
            tol: c.discretization.quadrature_tol,
            ..EstimatorOptions::default()
        },
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub steps: Vec<Step>,
    pub csv: Option<PathBuf>,
    /// Failure that ended the run early; the records up to it are kept.
    pub error: Option<Error>,
}

/// Execute the configured loop, writing `<dir>/<name>-<mode>.csv` when an
/// output directory is set. Approximate errors use the last successful step
/// as reference, also when the loop stopped early.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let data = config.problem();
    let opts = loop_options(config);
    let csv = match &config.output.dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            Some(Path::new(d).join(format!("{}-{}.csv", config.name, config.adaptivity.mode)))
        }
        None => None,
    };
    let mut writer = csv.as_deref().map(RecordWriter::create).transpose()?;
    let mut records = Vec::new();
    let mut write_err = None;
    let result = adaptive_loop(&data, config.material, config.initial_mesh()?, &opts, |s| {
        let r = RunRecord::new(records.len(), s.dof, &s.report, &s.state, s.seconds);
        log::info!("step {} dof {} eta {:.4e} newton {}", r.step, r.dof(), r.eta_total, r.newton_iters);
        if let Some(w) = writer.as_mut() {
            if let Err(e) = w.write(&r) {
                write_err.get_or_insert(e);
            }
        }
        records.push(r);
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    if config.output.approx_error {
        if let Some(reference) = &result.last {
            let errs = approximate_error(&result.steps, reference)?;
            for (r, e) in records.iter_mut().zip(errs) {
                r.approx_error = Some(e);
            }
            if let Some(p) = &csv {
                write_records(p, &records)?;
            }
        }
    }
    if config.output.dump_matrices {
        if let (Some(dir), Some(disc)) = (&config.output.dir, &result.last) {
            let sys = assemble_system(disc, &data)?;
            dump_matrix(&sys.a, &Path::new(dir).join(format!("{}-A.bin", config.name)))?;
            dump_matrix(&sys.c, &Path::new(dir).join(format!("{}-C.bin", config.name)))?;
        }
    }
    Ok(RunOutput { records, steps: result.steps, csv, error: result.error })
}

/// One row of a `γ̄` sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub gamma_bar: f64,
    pub converged: bool,
    pub eta_total: Option<f64>,
    pub eta_c: Option<f64>,
    pub eta_w: Option<f64>,
    pub eta_k: Option<f64>,
    pub newton_iters: Option<usize>,
    pub merit: Option<f64>,
}

/// Solve on the initial mesh of `config` for every `γ̄`; solver failures are
/// recorded, not propagated.
pub fn sweep_gamma(config: &RunConfig, values: &[f64]) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let data = config.problem();
    let opts = loop_options(config);
    let d = &config.discretization;
    let base = Discretization::new(config.initial_mesh()?, config.material, d.gamma_bar, d.z_extra, d.quadrature_tol)?;
    values
        .iter()
        .map(|&g| {
            let disc = base.with_gamma(g)?;
            let attempt = assemble_system(&disc, &data).and_then(|sys| solve(&sys, opts.newton)).and_then(|st| {
                let rep = compute_indicators(&disc, &data, &st, opts.estimator)?;
                Ok((st, rep))
            });
            Ok(match attempt {
                Ok((st, rep)) => {
                    let c = rep.contributions();
                    SweepRecord {
                        gamma_bar: g,
                        converged: true,
                        eta_total: Some(rep.total()),
                        eta_c: Some(c.contact.sqrt()),
                        eta_w: Some(c.w_approx.sqrt()),
                        eta_k: Some(c.k_approx.sqrt()),
                        newton_iters: Some(st.iterations),
                        merit: Some(st.merit),
                    }
                }
                Err(e) => {
                    log::warn!("gamma_bar {g}: {e}");
                    SweepRecord {
                        gamma_bar: g,
                        converged: false,
                        eta_total: None,
                        eta_c: None,
                        eta_w: None,
                        eta_k: None,
                        newton_iters: None,
                        merit: None,
                    }
                }
            })
        })
        .collect()
}

pub fn write_sweep(path: &Path, rows: &[SweepRecord]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "# frictionbem sweep v1")?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
