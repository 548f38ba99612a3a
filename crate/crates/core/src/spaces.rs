//! Discrete trace, density, multiplier and stabilization spaces.
//!
//! Every space is a vector-valued space with two components per scalar basis
//! function; the global vector dof of scalar function `s` and component `c` is
//! `2 * s + c`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::legendre::{h1_shape, lagrange, legendre_all};
use crate::mesh::{BoundaryMesh, Part, Point};
use crate::quadrature::gl;

/// Meaning of the two vector components of a space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Cartesian,
    /// Component 0 along the outward normal, component 1 along the tangent.
    NormalTangent,
}

/// Common interface of the element-based spaces.
pub trait ScalarBasis {
    fn fingerprint(&self) -> u64;
    fn n_scalar(&self) -> usize;
    fn dim(&self) -> usize {
        2 * self.n_scalar()
    }
    /// Elements carrying basis functions.
    fn support(&self) -> &[usize];
    /// Global scalar ids of the local shape functions on element `e`
    /// (`None` for eliminated functions).
    fn local_ids(&self, e: usize) -> &[Option<usize>];
    /// Polynomial degree on element `e`.
    fn degree(&self, e: usize) -> usize;
    /// Local shape function values at reference point `t`.
    fn values(&self, e: usize, t: f64, out: &mut [f64]);
    fn frame(&self) -> Frame {
        Frame::Cartesian
    }
}

fn component_direction(frame: Frame, c: usize, normal: Point, tangent: Point) -> Point {
    match (frame, c) {
        (Frame::Cartesian, 0) => Point::new(1.0, 0.0),
        (Frame::Cartesian, _) => Point::new(0.0, 1.0),
        (Frame::NormalTangent, 0) => normal,
        (Frame::NormalTangent, _) => tangent,
    }
}

/// Evaluate a member of `space` with coefficient vector `coeffs` at
/// reference point `t` of element `e` (Cartesian components).
pub fn evaluate<S: ScalarBasis + ?Sized>(
    space: &S,
    mesh: &BoundaryMesh,
    coeffs: &[f64],
    e: usize,
    t: f64,
) -> Point {
    let ids = space.local_ids(e);
    if ids.is_empty() {
        return Point::zeros();
    }
    let mut vals = vec![0.0; ids.len()];
    space.values(e, t, &mut vals);
    let el = &mesh.elements()[e];
    let mut out = Point::zeros();
    for (k, id) in ids.iter().enumerate() {
        if let Some(s) = id {
            for c in 0..2 {
                let d = component_direction(space.frame(), c, el.normal(), el.tangent());
                out += d * (vals[k] * coeffs[2 * s + c]);
            }
        }
    }
    out
}

/// Continuous piecewise polynomials vanishing on the Dirichlet part
/// (hierarchical vertex + integrated Legendre basis).
#[derive(Clone, Debug)]
pub struct PrimalSpace {
    fingerprint: u64,
    degrees: Vec<usize>,
    h: Vec<f64>,
    local: Vec<Vec<Option<usize>>>,
    support: Vec<usize>,
    n_scalar: usize,
    n_vertex: usize,
}

impl PrimalSpace {
    /// Trace space with Dirichlet dofs removed.
    pub fn new(mesh: &BoundaryMesh) -> Self {
        Self::build(mesh, true)
    }

    /// Trace space on the whole boundary, ignoring the Dirichlet part.
    pub fn unconstrained(mesh: &BoundaryMesh) -> Self {
        Self::build(mesh, false)
    }

    fn build(mesh: &BoundaryMesh, remove_dirichlet: bool) -> Self {
        let n = mesh.len();
        let els = mesh.elements();
        let is_d = |i: usize| remove_dirichlet && els[i].part == Part::Dirichlet;
        let mut vertex_id = vec![None; n];
        let mut next = 0;
        for (i, v) in vertex_id.iter_mut().enumerate() {
            if !is_d(i) && !is_d(mesh.prev(i)) {
                *v = Some(next);
                next += 1;
            }
        }
        let n_vertex = next;
        let mut local = Vec::with_capacity(n);
        for (i, e) in els.iter().enumerate() {
            let mut ids = vec![vertex_id[i], vertex_id[mesh.next(i)]];
            for _ in 2..=e.degree {
                if is_d(i) {
                    ids.push(None);
                } else {
                    ids.push(Some(next));
                    next += 1;
                }
            }
            local.push(ids);
        }
        PrimalSpace {
            fingerprint: mesh.fingerprint(),
            degrees: els.iter().map(|e| e.degree).collect(),
            h: els.iter().map(|e| e.h()).collect(),
            local,
            support: (0..n).collect(),
            n_scalar: next,
            n_vertex,
        }
    }

    pub fn n_vertex(&self) -> usize {
        self.n_vertex
    }

    /// Arc-length derivatives of the local shape functions.
    pub fn derivatives(&self, e: usize, t: f64, out: &mut [f64]) {
        let p = self.degrees[e];
        let mut v = vec![0.0; p + 1];
        h1_shape(p, t, &mut v, out);
        let s = 2.0 / self.h[e];
        out.iter_mut().take(p + 1).for_each(|d| *d *= s);
    }

    /// Coefficients of the interpolant of `f` (exact for vector fields that
    /// are affine on each element).
    pub fn interpolate_affine(&self, mesh: &BoundaryMesh, f: impl Fn(Point) -> Point) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for (i, e) in mesh.elements().iter().enumerate() {
            if let Some(s) = self.local[i][0] {
                let v = f(e.a);
                c[2 * s] = v.x;
                c[2 * s + 1] = v.y;
            }
        }
        c
    }

    /// Arc-length derivative of a member at reference point `t` of `e`.
    pub fn evaluate_derivative(&self, coeffs: &[f64], e: usize, t: f64) -> Point {
        let ids = &self.local[e];
        let mut d = vec![0.0; ids.len()];
        self.derivatives(e, t, &mut d);
        let mut out = Point::zeros();
        for (k, id) in ids.iter().enumerate() {
            if let Some(s) = id {
                out.x += d[k] * coeffs[2 * s];
                out.y += d[k] * coeffs[2 * s + 1];
            }
        }
        out
    }
}

impl ScalarBasis for PrimalSpace {
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    fn n_scalar(&self) -> usize {
        self.n_scalar
    }
    fn support(&self) -> &[usize] {
        &self.support
    }
    fn local_ids(&self, e: usize) -> &[Option<usize>] {
        &self.local[e]
    }
    fn degree(&self, e: usize) -> usize {
        self.degrees[e]
    }
    fn values(&self, e: usize, t: f64, out: &mut [f64]) {
        let p = self.degrees[e];
        let mut d = vec![0.0; p + 1];
        h1_shape(p, t, out, &mut d);
    }
}

/// Discontinuous Legendre polynomials `P_0..P_{deg}` on a subset of
/// elements. Used for the density space (`deg = p_T - 1`, all elements) and
/// for the stabilization projection space (`deg = p_T + extra`, contact
/// elements).
#[derive(Clone, Debug)]
pub struct LegendreSpace {
    fingerprint: u64,
    degrees: Vec<usize>,
    local: Vec<Vec<Option<usize>>>,
    support: Vec<usize>,
    n_scalar: usize,
}

impl LegendreSpace {
    fn build(mesh: &BoundaryMesh, elems: Vec<usize>, degree_of: impl Fn(usize) -> usize) -> Self {
        let n = mesh.len();
        let mut degrees = vec![0; n];
        let mut local = vec![Vec::new(); n];
        let mut next = 0;
        for &e in &elems {
            let d = degree_of(mesh.elements()[e].degree);
            degrees[e] = d;
            local[e] = (0..=d).map(|k| Some(next + k)).collect();
            next += d + 1;
        }
        LegendreSpace { fingerprint: mesh.fingerprint(), degrees, local, support: elems, n_scalar: next }
    }
}

impl ScalarBasis for LegendreSpace {
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    fn n_scalar(&self) -> usize {
        self.n_scalar
    }
    fn support(&self) -> &[usize] {
        &self.support
    }
    fn local_ids(&self, e: usize) -> &[Option<usize>] {
        &self.local[e]
    }
    fn degree(&self, e: usize) -> usize {
        self.degrees[e]
    }
    fn values(&self, e: usize, t: f64, out: &mut [f64]) {
        legendre_all(self.degrees[e], t, out);
    }
}

/// Density space: discontinuous, degree `p_T - 1`, whole boundary.
pub fn dual_space(mesh: &BoundaryMesh) -> LegendreSpace {
    LegendreSpace::build(mesh, (0..mesh.len()).collect(), |p| p - 1)
}

/// Stabilization projection space on the contact elements with degree
/// `p_T + extra`.
pub fn projection_space(mesh: &BoundaryMesh, extra: usize) -> LegendreSpace {
    LegendreSpace::build(mesh, mesh.contact_elements(), |p| p + extra)
}

/// Constraint point of the multiplier space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintNode {
    pub element: usize,
    pub t: f64,
    pub point: Point,
    pub normal: Point,
    pub tangent: Point,
    /// Gauss weight times the element Jacobian.
    pub weight: f64,
}

/// Nodal multiplier space on the contact elements: Lagrange basis of degree
/// `p_T` at the `p_T + 1` Gauss-Legendre points, normal/tangent components.
#[derive(Clone, Debug)]
pub struct MultiplierSpace {
    fingerprint: u64,
    degrees: Vec<usize>,
    local: Vec<Vec<Option<usize>>>,
    support: Vec<usize>,
    nodes: Vec<ConstraintNode>,
}

impl MultiplierSpace {
    pub fn new(mesh: &BoundaryMesh) -> Self {
        let n = mesh.len();
        let mut degrees = vec![0; n];
        let mut local = vec![Vec::new(); n];
        let mut nodes = Vec::new();
        let support = mesh.contact_elements();
        for &e in &support {
            let el = &mesh.elements()[e];
            let p = el.degree;
            degrees[e] = p;
            let rule = gl(p + 1);
            for (t, w) in rule.iter() {
                local[e].push(Some(nodes.len()));
                nodes.push(ConstraintNode {
                    element: e,
                    t,
                    point: el.point(t),
                    normal: el.normal(),
                    tangent: el.tangent(),
                    weight: w * el.jacobian(),
                });
            }
        }
        MultiplierSpace { fingerprint: mesh.fingerprint(), degrees, local, support, nodes }
    }

    pub fn nodes(&self) -> &[ConstraintNode] {
        &self.nodes
    }
}

impl ScalarBasis for MultiplierSpace {
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    fn n_scalar(&self) -> usize {
        self.nodes.len()
    }
    fn support(&self) -> &[usize] {
        &self.support
    }
    fn local_ids(&self, e: usize) -> &[Option<usize>] {
        &self.local[e]
    }
    fn degree(&self, e: usize) -> usize {
        self.degrees[e]
    }
    fn values(&self, e: usize, t: f64, out: &mut [f64]) {
        lagrange(&gl(self.degrees[e] + 1).nodes, t, out);
    }
    fn frame(&self) -> Frame {
        Frame::NormalTangent
    }
}

fn check_same_mesh(mesh: &BoundaryMesh, spaces: &[u64]) -> Result<()> {
    let fp = mesh.fingerprint();
    if spaces.iter().any(|&s| s != fp) {
        return Err(Error::Mismatch("space was built on a different mesh".into()));
    }
    Ok(())
}

/// Galerkin mass matrix `∫ w ξ_i · ζ_j ds` with `ξ_i` from `a` (rows) and
/// `ζ_j` from `b` (columns), integrated over the common support.
pub fn assemble_mass<A, B>(
    mesh: &BoundaryMesh,
    a: &A,
    b: &B,
    weight: impl Fn(usize, Point) -> f64,
) -> Result<Mat<f64>>
where
    A: ScalarBasis + ?Sized,
    B: ScalarBasis + ?Sized,
{
    check_same_mesh(mesh, &[a.fingerprint(), b.fingerprint()])?;
    let mut m = Mat::<f64>::zeros(a.dim(), b.dim());
    let in_b: Vec<bool> = {
        let mut v = vec![false; mesh.len()];
        b.support().iter().for_each(|&e| v[e] = true);
        v
    };
    for &e in a.support() {
        if !in_b[e] {
            continue;
        }
        let (ia, ib) = (a.local_ids(e), b.local_ids(e));
        if ia.is_empty() || ib.is_empty() {
            continue;
        }
        let el = &mesh.elements()[e];
        let (n, t) = (el.normal(), el.tangent());
        let dirs = |f: Frame| [component_direction(f, 0, n, t), component_direction(f, 1, n, t)];
        let (da, db) = (dirs(a.frame()), dirs(b.frame()));
        let mut cdot = [[0.0; 2]; 2];
        for ca in 0..2 {
            for cb in 0..2 {
                cdot[ca][cb] = da[ca].dot(&db[cb]);
            }
        }
        let rule = gl(a.degree(e) + b.degree(e) + 2);
        let mut va = vec![0.0; ia.len()];
        let mut vb = vec![0.0; ib.len()];
        for (q, wq) in rule.iter() {
            a.values(e, q, &mut va);
            b.values(e, q, &mut vb);
            let w = wq * el.jacobian() * weight(e, el.point(q));
            for (i, si) in ia.iter().enumerate() {
                let Some(si) = si else { continue };
                for (j, sj) in ib.iter().enumerate() {
                    let Some(sj) = sj else { continue };
                    let s = w * va[i] * vb[j];
                    for ca in 0..2 {
                        for cb in 0..2 {
                            if cdot[ca][cb] != 0.0 {
                                m[(2 * si + ca, 2 * sj + cb)] += s * cdot[ca][cb];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// All discrete spaces of one mesh.
#[derive(Clone, Debug)]
pub struct Spaces {
    pub primal: PrimalSpace,
    pub dual: LegendreSpace,
    pub multiplier: MultiplierSpace,
    pub projection: LegendreSpace,
}

impl Spaces {
    pub fn new(mesh: &BoundaryMesh, projection_extra_degree: usize) -> Self {
        Spaces {
            primal: PrimalSpace::new(mesh),
            dual: dual_space(mesh),
            multiplier: MultiplierSpace::new(mesh),
            projection: projection_space(mesh, projection_extra_degree),
        }
    }
}
