//! Singular and near-singular quadrature for element pairs and for point
//! evaluation of boundary potentials.
//!
//! A kernel is integrated as a list of [`Term`]s: reference coordinates on
//! the test and trial element, a scalar weight (measure included) and a 2x2
//! matrix. Summing `w * f_i(tx) * g_j(ty) * m` over the terms gives the local
//! Galerkin block for arbitrary shape functions `f_i`, `g_j`.
//!
//! * identical elements: the kernel restricted to a straight line is
//!   `c log|d| I + B + C / d` with `d = s_y - s_x`; the log part uses the
//!   log-weighted Gauss rule after the substitution `z = |s_x - s_y|`, the
//!   Cauchy part is antisymmetrised, which leaves a polynomial integrand.
//! * elements sharing a vertex: Duffy transform from the vertex, `log ρ`
//!   split off and integrated with the log-weighted rule.
//! * all other pairs: tensor Gauss-Legendre with recursive subdivision until
//!   each piece is separated by at least its own length, with the order
//!   chosen from the Bernstein-ellipse bound for the requested tolerance.

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Mat2};
use crate::mesh::{BoundaryMesh, Element, Point};
use crate::quadrature::{gl, glog};

#[derive(Clone, Copy, Debug)]
pub struct Term {
    pub tx: f64,
    pub ty: f64,
    pub w: f64,
    pub m: Mat2,
}

/// Straight segment with its frame.
#[derive(Clone, Copy, Debug)]
struct Seg {
    a: Point,
    b: Point,
    h: f64,
    t: Point,
    n: Point,
}

impl Seg {
    fn of(e: &Element) -> Self {
        Seg { a: e.a, b: e.b, h: e.h(), t: e.tangent(), n: e.normal() }
    }
    fn at(&self, t: f64) -> Point {
        self.a + (self.b - self.a) * (0.5 * (t + 1.0))
    }
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    let s = ((p - a).dot(&d) / l2).clamp(0.0, 1.0);
    (p - (a + d * s)).norm()
}

fn segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Gauss order for a smooth integrand whose nearest singularity is `dist`
/// away from a piece of length `len`, plus room for degree-`p` shapes.
fn far_order(dist: f64, len: f64, p: usize, tol: f64) -> usize {
    let r = 2.0 * dist / len;
    let rho = r + (r * r + 1.0).sqrt();
    let n = ((1.0 / tol).ln() / (2.0 * rho.ln())).ceil() as usize + p / 2 + 1;
    n.clamp(2, 40)
}

/// Quadrature effort for the singular rules.
fn singular_order(px: usize, py: usize, tol: f64) -> (usize, usize) {
    let extra = if tol < 1e-11 { 8 } else { 0 };
    (px + py + 4 + extra / 2, 20 + extra)
}

const MAX_DEPTH: usize = 40;

/// Terms for `∫_X ∫_Y f(x)^T k(x, y) g(y) ds_y ds_x`.
pub fn pair_terms(
    mesh: &BoundaryMesh,
    ex: usize,
    ey: usize,
    kernel: &dyn Kernel,
    px: usize,
    py: usize,
    tol: f64,
    out: &mut Vec<Term>,
) {
    out.clear();
    let els = mesh.elements();
    let (sx, sy) = (Seg::of(&els[ex]), Seg::of(&els[ey]));
    if ex == ey {
        identical(sx, kernel, px, py, tol, out);
    } else if mesh.next(ex) == ey {
        adjacent(sx, sy, true, kernel, px, py, tol, out);
    } else if mesh.next(ey) == ex {
        adjacent(sx, sy, false, kernel, px, py, tol, out);
    } else {
        disjoint(sx, (-1.0, 1.0), sy, (-1.0, 1.0), kernel, px, py, tol, 0, out);
    }
}

/// `B` and `C` of the line restriction `k = c log|d| I + B + C/d` around `x`
/// along direction `dir` (`d` measured along `dir`).
fn line_split(kernel: &dyn Kernel, x: Point, nx: Point, ny: Point, dir: Point, delta: f64) -> (Mat2, Mat2) {
    let c = kernel.log_coeff();
    let lg = Mat2::identity() * (c * delta.ln());
    let rp = kernel.eval(x, x + dir * delta, nx, ny) - lg;
    let rm = kernel.eval(x, x - dir * delta, nx, ny) - lg;
    ((rp + rm) * 0.5, (rp - rm) * (0.5 * delta))
}

fn identical(s: Seg, kernel: &dyn Kernel, px: usize, py: usize, tol: f64, out: &mut Vec<Term>) {
    let h = s.h;
    let c = kernel.log_coeff();
    let (bm, cm) = line_split(kernel, 0.5 * (s.a + s.b), s.n, s.n, s.t, 0.5 * h);
    let (n, _) = singular_order(px, py, tol);
    let g = gl(n);
    let to_t = |sv: f64| 2.0 * sv / h - 1.0;
    // constant part, plus c log h from the log split
    let cst = bm + Mat2::identity() * (c * h.ln());
    for (t1, w1) in g.iter() {
        for (t2, w2) in g.iter() {
            out.push(Term { tx: t1, ty: t2, w: w1 * w2 * 0.25 * h * h, m: cst });
        }
    }
    // z = |s_x - s_y| = h ζ, a = (h - z) α
    let has_log = c != 0.0;
    let has_cauchy = cm.abs().max() > 0.0;
    if has_log {
        let lr = glog(n);
        let id = Mat2::identity() * c;
        for (zeta, wz) in lr.iter() {
            for (al, wa) in g.iter() {
                let alpha = 0.5 * (al + 1.0);
                let z = h * zeta;
                let a = (h - z) * alpha;
                let w = -wz * 0.5 * wa * h * h * (1.0 - zeta);
                out.push(Term { tx: to_t(a), ty: to_t(a + z), w, m: id });
                out.push(Term { tx: to_t(a + z), ty: to_t(a), w, m: id });
            }
        }
    }
    if has_cauchy {
        for (ze, wz) in g.iter() {
            let zeta = 0.5 * (ze + 1.0);
            for (al, wa) in g.iter() {
                let alpha = 0.5 * (al + 1.0);
                let z = h * zeta;
                let a = (h - z) * alpha;
                let w = 0.25 * wz * wa * h * (1.0 - zeta) / zeta;
                out.push(Term { tx: to_t(a), ty: to_t(a + z), w, m: cm });
                out.push(Term { tx: to_t(a + z), ty: to_t(a), w: -w, m: cm });
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adjacent(
    sx: Seg,
    sy: Seg,
    x_before_y: bool,
    kernel: &dyn Kernel,
    px: usize,
    py: usize,
    tol: f64,
    out: &mut Vec<Term>,
) {
    // distance-from-vertex parametrisations
    let (p0, dx, dy) = if x_before_y { (sx.b, -sx.t, sy.t) } else { (sx.a, sx.t, -sy.t) };
    let tx_of = |u: f64| if x_before_y { 1.0 - 2.0 * u } else { -1.0 + 2.0 * u };
    let ty_of = |u: f64| if x_before_y { -1.0 + 2.0 * u } else { 1.0 - 2.0 * u };
    let c = kernel.log_coeff();
    let (nr, nw) = singular_order(px, py, tol);
    let (gr, gw, lr) = (gl(nr), gl(nw), glog(nr));
    let jac = sx.h * sy.h;
    for tri in 0..2 {
        for (wq, ww) in gw.iter() {
            let w = 0.5 * (wq + 1.0);
            let ww = 0.5 * ww;
            let (ux, uy) = if tri == 0 { (1.0, w) } else { (w, 1.0) };
            let mut emit = |rho: f64, weight: f64, m: Mat2| {
                out.push(Term { tx: tx_of(rho * ux), ty: ty_of(rho * uy), w: weight, m });
            };
            for (rq, wr) in gr.iter() {
                let rho = 0.5 * (rq + 1.0);
                let x = p0 + dx * (sx.h * rho * ux);
                let y = p0 + dy * (sy.h * rho * uy);
                let m = kernel.eval(x, y, sx.n, sy.n) - Mat2::identity() * (c * rho.ln());
                emit(rho, 0.5 * wr * ww * jac * rho, m);
            }
            if c != 0.0 {
                for (rho, wl) in lr.iter() {
                    emit(rho, -wl * ww * jac * rho, Mat2::identity() * c);
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn disjoint(
    sx: Seg,
    ix: (f64, f64),
    sy: Seg,
    iy: (f64, f64),
    kernel: &dyn Kernel,
    px: usize,
    py: usize,
    tol: f64,
    depth: usize,
    out: &mut Vec<Term>,
) {
    let (xa, xb) = (sx.at(ix.0), sx.at(ix.1));
    let (ya, yb) = (sy.at(iy.0), sy.at(iy.1));
    let lx = 0.5 * sx.h * (ix.1 - ix.0);
    let ly = 0.5 * sy.h * (iy.1 - iy.0);
    let dist = segment_distance(xa, xb, ya, yb);
    if dist < lx.max(ly) && depth < MAX_DEPTH {
        let split_x = lx >= 0.5 * ly;
        let split_y = ly >= 0.5 * lx;
        let xs: Vec<(f64, f64)> = if split_x {
            let m = 0.5 * (ix.0 + ix.1);
            vec![(ix.0, m), (m, ix.1)]
        } else {
            vec![ix]
        };
        let ys: Vec<(f64, f64)> = if split_y {
            let m = 0.5 * (iy.0 + iy.1);
            vec![(iy.0, m), (m, iy.1)]
        } else {
            vec![iy]
        };
        for &a in &xs {
            for &b in &ys {
                disjoint(sx, a, sy, b, kernel, px, py, tol, depth + 1, out);
            }
        }
        return;
    }
    let (gx, gy) = (gl(far_order(dist, lx, px, tol)), gl(far_order(dist, ly, py, tol)));
    let (hx, hy) = (0.5 * (ix.1 - ix.0), 0.5 * (iy.1 - iy.0));
    for (qx, wx) in gx.iter() {
        let tx = ix.0 + hx * (qx + 1.0);
        let x = sx.at(tx);
        for (qy, wy) in gy.iter() {
            let ty = iy.0 + hy * (qy + 1.0);
            let y = sy.at(ty);
            let w = wx * wy * hx * hy * 0.25 * sx.h * sy.h;
            out.push(Term { tx, ty, w, m: kernel.eval(x, y, sx.n, sy.n) });
        }
    }
}

/// Accumulate the local block `(2 nx) x (2 ny)` (row-major, row index
/// `2 i + ci`) from terms and shape function evaluators.
pub fn accumulate_block(
    terms: &[Term],
    fx: &dyn Fn(f64, &mut [f64]),
    nx: usize,
    fy: &dyn Fn(f64, &mut [f64]),
    ny: usize,
    block: &mut Vec<f64>,
) {
    block.clear();
    block.resize(4 * nx * ny, 0.0);
    let mut vx = vec![0.0; nx];
    let mut vy = vec![0.0; ny];
    let mut last = (f64::NAN, f64::NAN);
    let cols = 2 * ny;
    for term in terms {
        if term.tx != last.0 {
            fx(term.tx, &mut vx);
        }
        if term.ty != last.1 {
            fy(term.ty, &mut vy);
        }
        last = (term.tx, term.ty);
        let m = &term.m;
        for i in 0..nx {
            let a = term.w * vx[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..ny {
                let s = a * vy[j];
                let r0 = 2 * i * cols + 2 * j;
                block[r0] += s * m[(0, 0)];
                block[r0 + 1] += s * m[(0, 1)];
                block[r0 + cols] += s * m[(1, 0)];
                block[r0 + cols + 1] += s * m[(1, 1)];
            }
        }
    }
}

/// Evaluation point on (or off) the boundary.
#[derive(Clone, Copy, Debug)]
pub struct Target {
    pub point: Point,
    /// Normal at the target, used by kernels depending on `n_x`.
    pub normal: Point,
}

/// Terms `(ty, w, m)` for `∫_{e_y} k(x, y) g(y) ds_y`.
pub fn point_terms(
    mesh: &BoundaryMesh,
    x: Target,
    ey: usize,
    kernel: &dyn Kernel,
    py: usize,
    tol: f64,
    out: &mut Vec<(f64, f64, Mat2)>,
) -> Result<()> {
    out.clear();
    let s = Seg::of(&mesh.elements()[ey]);
    let d = point_segment_distance(x.point, s.a, s.b);
    if d <= 1e-13 * s.h {
        on_segment(s, x, kernel, py, out)
    } else {
        near_point(s, (-1.0, 1.0), x, kernel, py, tol, 0, out);
        Ok(())
    }
}

fn on_segment(s: Seg, x: Target, kernel: &dyn Kernel, py: usize, out: &mut Vec<(f64, f64, Mat2)>) -> Result<()> {
    let sx = (x.point - s.a).dot(&s.t).clamp(0.0, s.h);
    let t_on = 2.0 * sx / s.h - 1.0;
    let (lm, lp) = (sx, s.h - sx);
    let c = kernel.log_coeff();
    let delta = 0.25 * lm.max(lp);
    let interior = lm > 1e-14 * s.h && lp > 1e-14 * s.h;
    let (bm, cm) = if interior {
        line_split(kernel, x.point, x.normal, s.n, s.t, delta.min(lm).min(lp))
    } else {
        // one-sided: k = c log d + B + C/d along the ray into the element
        let dir = if lp > lm { s.t } else { -s.t };
        let lg = |r: f64| Mat2::identity() * (c * r.ln());
        let r1 = kernel.eval(x.point, x.point + dir * delta, x.normal, s.n) - lg(delta);
        let r2 = kernel.eval(x.point, x.point + dir * (0.5 * delta), x.normal, s.n) - lg(0.5 * delta);
        let cc = (r2 - r1) * delta;
        if cc.abs().max() > 1e-10 * (r1.abs().max() + c.abs() + f64::MIN_POSITIVE) {
            return Err(Error::CornerEvaluation);
        }
        (r1, Mat2::zeros())
    };
    let n = py + 10;
    let (g, lr) = (gl(n), glog(n));
    let tt = |sv: f64| 2.0 * sv / s.h - 1.0;
    for (len, sign) in [(lm, -1.0), (lp, 1.0)] {
        if len <= 1e-14 * s.h {
            continue;
        }
        for (q, w) in g.iter() {
            let sig = 0.5 * (q + 1.0) * len;
            let wq = 0.5 * w * len;
            let ty = tt(sx + sign * sig);
            let dd = sign * sig;
            if interior {
                out.push((ty, wq / dd, cm));
                out.push((t_on, -wq / dd, cm));
            }
            out.push((ty, wq, bm + Mat2::identity() * (c * len.ln())));
        }
        if c != 0.0 {
            for (z, wl) in lr.iter() {
                out.push((tt(sx + sign * z * len), -wl * len, Mat2::identity() * c));
            }
        }
    }
    if interior {
        out.push((t_on, (lp / lm).ln(), cm));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn near_point(
    s: Seg,
    iy: (f64, f64),
    x: Target,
    kernel: &dyn Kernel,
    py: usize,
    tol: f64,
    depth: usize,
    out: &mut Vec<(f64, f64, Mat2)>,
) {
    let (ya, yb) = (s.at(iy.0), s.at(iy.1));
    let len = 0.5 * s.h * (iy.1 - iy.0);
    let dist = point_segment_distance(x.point, ya, yb);
    if dist < len && depth < MAX_DEPTH {
        let m = 0.5 * (iy.0 + iy.1);
        near_point(s, (iy.0, m), x, kernel, py, tol, depth + 1, out);
        near_point(s, (m, iy.1), x, kernel, py, tol, depth + 1, out);
        return;
    }
    let g = gl(far_order(dist, len, py, tol));
    let hy = 0.5 * (iy.1 - iy.0);
    for (q, w) in g.iter() {
        let ty = iy.0 + hy * (q + 1.0);
        let y = s.at(ty);
        out.push((ty, w * hy * 0.5 * s.h, kernel.eval(x.point, y, x.normal, s.n)));
    }
}
