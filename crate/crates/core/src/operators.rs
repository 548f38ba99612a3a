//! Galerkin matrices of `V`, `K`, `K'` and `W` and pointwise potentials.

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::integration::{accumulate_block, pair_terms, point_terms, Target, Term};
use crate::kernels::{
    AdjointDoubleLayer, DoubleLayer, HypersingularPointwise, HypersingularWeak, Kernel, Material,
    SingleLayer,
};
use crate::legendre::{h1_shape, legendre_all, legendre_with_derivative};
use crate::mesh::{BoundaryMesh, Point};
use crate::spaces::{assemble_mass, LegendreSpace, PrimalSpace, ScalarBasis};

/// Default per-entry quadrature tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Local shape functions entering one side of a Galerkin pairing.
pub trait LocalEval: Sync {
    fn fingerprint(&self) -> u64;
    fn dim(&self) -> usize;
    fn support(&self) -> &[usize];
    fn ids(&self, e: usize) -> &[Option<usize>];
    fn degree(&self, e: usize) -> usize;
    fn eval(&self, e: usize, t: f64, out: &mut [f64]);
}

/// Plain shape function values of a space.
pub struct Values<'a, S: ScalarBasis + ?Sized>(pub &'a S);

impl<S: ScalarBasis + Sync + ?Sized> LocalEval for Values<'_, S> {
    fn fingerprint(&self) -> u64 {
        self.0.fingerprint()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn support(&self) -> &[usize] {
        self.0.support()
    }
    fn ids(&self, e: usize) -> &[Option<usize>] {
        self.0.local_ids(e)
    }
    fn degree(&self, e: usize) -> usize {
        self.0.degree(e)
    }
    fn eval(&self, e: usize, t: f64, out: &mut [f64]) {
        self.0.values(e, t, out)
    }
}

/// Arc-length derivatives of the primal shape functions.
pub struct PrimalDerivatives<'a>(pub &'a PrimalSpace);

impl LocalEval for PrimalDerivatives<'_> {
    fn fingerprint(&self) -> u64 {
        self.0.fingerprint()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn support(&self) -> &[usize] {
        self.0.support()
    }
    fn ids(&self, e: usize) -> &[Option<usize>] {
        self.0.local_ids(e)
    }
    fn degree(&self, e: usize) -> usize {
        self.0.degree(e).saturating_sub(1)
    }
    fn eval(&self, e: usize, t: f64, out: &mut [f64]) {
        self.0.derivatives(e, t, out)
    }
}

/// Arc-length derivatives of a discontinuous Legendre space.
pub struct LegendreDerivatives<'a> {
    pub space: &'a LegendreSpace,
    pub h: Vec<f64>,
}

impl<'a> LegendreDerivatives<'a> {
    pub fn new(space: &'a LegendreSpace, mesh: &BoundaryMesh) -> Self {
        LegendreDerivatives { space, h: mesh.elements().iter().map(|e| e.h()).collect() }
    }
}

impl LocalEval for LegendreDerivatives<'_> {
    fn fingerprint(&self) -> u64 {
        self.space.fingerprint()
    }
    fn dim(&self) -> usize {
        self.space.dim()
    }
    fn support(&self) -> &[usize] {
        self.space.support()
    }
    fn ids(&self, e: usize) -> &[Option<usize>] {
        self.space.local_ids(e)
    }
    fn degree(&self, e: usize) -> usize {
        self.space.degree(e).saturating_sub(1)
    }
    fn eval(&self, e: usize, t: f64, out: &mut [f64]) {
        let s = 2.0 / self.h[e];
        for (k, o) in out.iter_mut().enumerate().take(self.space.degree(e) + 1) {
            *o = legendre_with_derivative(k, t).1 * s;
        }
    }
}

fn scatter(
    m: &mut Mat<f64>,
    block: &[f64],
    ix: &[Option<usize>],
    iy: &[Option<usize>],
    transpose: bool,
) {
    let cols = 2 * iy.len();
    for (i, si) in ix.iter().enumerate() {
        let Some(si) = si else { continue };
        for (j, sj) in iy.iter().enumerate() {
            let Some(sj) = sj else { continue };
            for ci in 0..2 {
                for cj in 0..2 {
                    let v = block[(2 * i + ci) * cols + 2 * j + cj];
                    if transpose {
                        m[(2 * sj + cj, 2 * si + ci)] += v;
                    } else {
                        m[(2 * si + ci, 2 * sj + cj)] += v;
                    }
                }
            }
        }
    }
}

/// `M_ij = ∫∫ f_i(x)^T k(x, y) g_j(y)` with `f` from `test` (rows) and `g`
/// from `trial` (columns).
pub fn assemble_pairing(
    mesh: &BoundaryMesh,
    test: &dyn LocalEval,
    trial: &dyn LocalEval,
    kernel: &dyn Kernel,
    tol: f64,
) -> Result<Mat<f64>> {
    let fp = mesh.fingerprint();
    if test.fingerprint() != fp || trial.fingerprint() != fp {
        return Err(Error::Mismatch("space was built on a different mesh".into()));
    }
    let same = std::ptr::eq(
        test as *const dyn LocalEval as *const u8,
        trial as *const dyn LocalEval as *const u8,
    );
    let symmetric = same && kernel.symmetric();
    let mut m = Mat::<f64>::zeros(test.dim(), trial.dim());
    let mut terms: Vec<Term> = Vec::new();
    let mut block = Vec::new();
    for &ex in test.support() {
        let ix = test.ids(ex);
        if ix.iter().all(Option::is_none) {
            continue;
        }
        let nx = ix.len();
        for &ey in trial.support() {
            if symmetric && ey < ex {
                continue;
            }
            let iy = trial.ids(ey);
            if iy.iter().all(Option::is_none) {
                continue;
            }
            let ny = iy.len();
            pair_terms(mesh, ex, ey, kernel, test.degree(ex), trial.degree(ey), tol, &mut terms);
            accumulate_block(
                &terms,
                &|t, o| test.eval(ex, t, o),
                nx,
                &|t, o| trial.eval(ey, t, o),
                ny,
                &mut block,
            );
            scatter(&mut m, &block, ix, iy, false);
            if symmetric && ey != ex {
                scatter(&mut m, &block, ix, iy, true);
            }
        }
    }
    if symmetric {
        symmetrize(&mut m);
    }
    Ok(m)
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `<V φ_j, φ_i>` on the density space.
pub fn assemble_v(mesh: &BoundaryMesh, dual: &LegendreSpace, material: &Material, tol: f64) -> Result<Mat<f64>> {
    let k = SingleLayer(material.constants());
    let t = Values(dual);
    assemble_pairing(mesh, &t, &t, &k, tol)
}

/// `<(K + 1/2) u_j, ψ_i>`: rows density space, columns trace space.
pub fn assemble_k(
    mesh: &BoundaryMesh,
    dual: &LegendreSpace,
    primal: &PrimalSpace,
    material: &Material,
    tol: f64,
) -> Result<Mat<f64>> {
    let k = DoubleLayer(material.constants());
    let mut m = assemble_pairing(mesh, &Values(dual), &Values(primal), &k, tol)?;
    let mass = assemble_mass(mesh, dual, primal, |_, _| 0.5)?;
    m += &mass;
    Ok(m)
}

/// `<(K + 1/2)' φ_j, v_i>` computed directly from the adjoint kernel: rows
/// trace space, columns density space.
pub fn assemble_k_adjoint(
    mesh: &BoundaryMesh,
    primal: &PrimalSpace,
    dual: &LegendreSpace,
    material: &Material,
    tol: f64,
) -> Result<Mat<f64>> {
    let k = AdjointDoubleLayer(material.constants());
    let mut m = assemble_pairing(mesh, &Values(primal), &Values(dual), &k, tol)?;
    let mass = assemble_mass(mesh, primal, dual, |_, _| 0.5)?;
    m += &mass;
    Ok(m)
}

/// `<W u_j, u_i>` via integration by parts on arc-length derivatives.
pub fn assemble_w(mesh: &BoundaryMesh, primal: &PrimalSpace, material: &Material, tol: f64) -> Result<Mat<f64>> {
    let k = HypersingularWeak(material.constants());
    let d = PrimalDerivatives(primal);
    assemble_pairing(mesh, &d, &d, &k, tol)
}

/// Galerkin matrices of the four operators on one mesh.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub v: Mat<f64>,
    /// `<(K + 1/2) u_j, ψ_i>`.
    pub k: Mat<f64>,
    pub w: Mat<f64>,
    pub tol: f64,
}

impl OperatorSet {
    pub fn assemble(
        mesh: &BoundaryMesh,
        primal: &PrimalSpace,
        dual: &LegendreSpace,
        material: &Material,
        tol: f64,
    ) -> Result<Self> {
        Ok(OperatorSet {
            v: assemble_v(mesh, dual, material, tol)?,
            k: assemble_k(mesh, dual, primal, material, tol)?,
            w: assemble_w(mesh, primal, material, tol)?,
            tol,
        })
    }
}

/// Which shape information of a field to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    H1,
    H1Derivative,
    Legendre,
}

/// A discrete vector field with per-element local coefficients, for fast
/// repeated pointwise evaluation.
#[derive(Clone, Debug)]
pub struct ElementField {
    shape: Shape,
    degrees: Vec<usize>,
    h: Vec<f64>,
    coeffs: Vec<Vec<Point>>,
}

const MAX_LOCAL: usize = 64;

impl ElementField {
    fn gather<S: ScalarBasis + ?Sized>(space: &S, mesh: &BoundaryMesh, c: &[f64], shape: Shape) -> Self {
        let coeffs = (0..mesh.len())
            .map(|e| {
                space
                    .local_ids(e)
                    .iter()
                    .map(|id| id.map_or(Point::zeros(), |s| Point::new(c[2 * s], c[2 * s + 1])))
                    .collect()
            })
            .collect();
        ElementField {
            shape,
            degrees: mesh.elements().iter().map(|e| e.degree).collect(),
            h: mesh.elements().iter().map(|e| e.h()).collect(),
            coeffs,
        }
    }

    pub fn trace(space: &PrimalSpace, mesh: &BoundaryMesh, c: &[f64]) -> Self {
        Self::gather(space, mesh, c, Shape::H1)
    }

    pub fn trace_derivative(space: &PrimalSpace, mesh: &BoundaryMesh, c: &[f64]) -> Self {
        Self::gather(space, mesh, c, Shape::H1Derivative)
    }

    pub fn density(space: &LegendreSpace, mesh: &BoundaryMesh, c: &[f64]) -> Self {
        let mut f = Self::gather(space, mesh, c, Shape::Legendre);
        for e in 0..mesh.len() {
            f.degrees[e] = f.coeffs[e].len().saturating_sub(1);
        }
        f
    }

    pub fn eval(&self, e: usize, t: f64) -> Point {
        let c = &self.coeffs[e];
        if c.is_empty() {
            return Point::zeros();
        }
        let mut v = [0.0; MAX_LOCAL];
        let mut d = [0.0; MAX_LOCAL];
        let n = c.len();
        match self.shape {
            Shape::H1 => h1_shape(self.degrees[e], t, &mut v, &mut d),
            Shape::H1Derivative => {
                h1_shape(self.degrees[e], t, &mut d, &mut v);
                let s = 2.0 / self.h[e];
                v.iter_mut().take(n).for_each(|x| *x *= s);
            }
            Shape::Legendre => legendre_all(self.degrees[e], t, &mut v),
        }
        c.iter().zip(v.iter()).fold(Point::zeros(), |acc, (ck, vk)| acc + ck * *vk)
    }

    fn degree(&self, e: usize) -> usize {
        self.degrees[e]
    }
}

/// `∫_Γ k(x, y) f(y) ds_y` at the target.
pub fn apply_at(
    mesh: &BoundaryMesh,
    field: &ElementField,
    kernel: &dyn Kernel,
    x: Target,
    tol: f64,
) -> Result<Point> {
    let mut terms = Vec::new();
    let mut acc = Point::zeros();
    for ey in 0..mesh.len() {
        if field.coeffs[ey].iter().all(|c| c.x == 0.0 && c.y == 0.0) {
            continue;
        }
        point_terms(mesh, x, ey, kernel, field.degree(ey), tol, &mut terms)?;
        for &(ty, w, m) in &terms {
            acc += m * field.eval(ey, ty) * w;
        }
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    /// `V φ` of a density.
    SingleLayer,
    /// `K u` of a trace (without the `1/2` jump term).
    DoubleLayer,
}

/// Evaluate `V φ` or `K u` at reference point `t` of element `e`.
pub fn evaluate_potential(
    kind: PotentialKind,
    mesh: &BoundaryMesh,
    field: &ElementField,
    material: &Material,
    e: usize,
    t: f64,
    tol: f64,
) -> Result<Point> {
    let el = mesh.element(e)?;
    if t.abs() >= 1.0 - 1e-14 {
        return Err(Error::CornerEvaluation);
    }
    let x = Target { point: el.point(t), normal: el.normal() };
    let k = material.constants();
    match kind {
        PotentialKind::SingleLayer => apply_at(mesh, field, &SingleLayer(k), x, tol),
        PotentialKind::DoubleLayer => apply_at(mesh, field, &DoubleLayer(k), x, tol),
    }
}

/// `W u (x)` from the field of arc-length derivatives `u'`.
pub fn hypersingular_at(
    mesh: &BoundaryMesh,
    derivative: &ElementField,
    material: &Material,
    e: usize,
    t: f64,
    tol: f64,
) -> Result<Point> {
    let el = mesh.element(e)?;
    let x = Target { point: el.point(t), normal: el.normal() };
    apply_at(mesh, derivative, &HypersingularPointwise(material.constants()), x, tol)
}

/// `K' φ (x)` without the `1/2` term.
pub fn adjoint_double_layer_at(
    mesh: &BoundaryMesh,
    density: &ElementField,
    material: &Material,
    e: usize,
    t: f64,
    tol: f64,
) -> Result<Point> {
    let el = mesh.element(e)?;
    let x = Target { point: el.point(t), normal: el.normal() };
    apply_at(mesh, density, &AdjointDoubleLayer(material.constants()), x, tol)
}

const DUMP_MAGIC: &[u8; 8] = b"FBEMMAT1";

/// Write a dense matrix as: 8-byte magic `FBEMMAT1`, rows and columns as
/// little-endian `u64`, then the entries in row-major order as little-endian
/// `f64`.
pub fn dump_matrix(m: &Mat<f64>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(DUMP_MAGIC)?;
    f.write_all(&(m.nrows() as u64).to_le_bytes())?;
    f.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            f.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<Mat<f64>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 24 || &buf[..8] != DUMP_MAGIC {
        return Err(Error::InvalidArgument("not a matrix dump".into()));
    }
    let word = |k: usize| u64::from_le_bytes(buf[k..k + 8].try_into().unwrap());
    let (r, c) = (word(8) as usize, word(16) as usize);
    if buf.len() != 24 + 8 * r * c {
        return Err(Error::InvalidArgument("truncated matrix dump".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| {
        let k = 24 + 8 * (i * c + j);
        f64::from_le_bytes(buf[k..k + 8].try_into().unwrap())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, BoundaryGeometry, Part, Side};
    use crate::spaces::dual_space;

    fn neumann_square(n: usize, p: usize) -> BoundaryMesh {
        let g = BoundaryGeometry::square(1.0, [
            Side::uniform(Part::Neumann),
            Side::uniform(Part::Neumann),
            Side::uniform(Part::Neumann),
            Side::uniform(Part::Neumann),
        ])
        .unwrap();
        build_mesh(&g, n, p).unwrap()
    }

    #[test]
    fn rigid_motions_small() {
        let mesh = neumann_square(2, 2);
        let mat = Material::new(500.0, 0.33).unwrap();
        let x = PrimalSpace::unconstrained(&mesh);
        let y = dual_space(&mesh);
        let k = assemble_k(&mesh, &y, &x, &mat, 1e-10).unwrap();
        let w = assemble_w(&mesh, &x, &mat, 1e-10).unwrap();
        let rigid: [fn(Point) -> Point; 3] =
            [|_| Point::new(1.0, 0.0), |_| Point::new(0.0, 1.0), |p| Point::new(p.y, -p.x)];
        for r in rigid {
            let c = x.interpolate_affine(&mesh, r);
            let cv = faer::col::from_slice::<f64>(&c);
            let kr = &k * cv;
            let wr = &w * cv;
            let kmax = (0..kr.nrows()).map(|i| kr[i].abs()).fold(0.0, f64::max);
            let wmax = (0..wr.nrows()).map(|i| wr[i].abs()).fold(0.0, f64::max);
            assert!(kmax < 1e-9, "K rigid {kmax}");
            assert!(wmax < 1e-8 * 500.0, "W rigid {wmax}");
        }
    }

    #[test]
    fn galerkin_calderon_identity_for_affine_fields() {
        let mat = Material::new(500.0, 0.33).unwrap();
        let a = crate::kernels::Mat2::new(0.3, -0.2, 0.5, 0.1);
        for p in [1, 2] {
            let mesh = neumann_square(3, p);
            let x = PrimalSpace::unconstrained(&mesh);
            let y = dual_space(&mesh);
            let v = assemble_v(&mesh, &y, &mat, 1e-12).unwrap();
            let k = assemble_k(&mesh, &y, &x, &mat, 1e-12).unwrap();
            let u = x.interpolate_affine(&mesh, |q| a * q);
            let mut phi = vec![0.0; y.dim()];
            for e in 0..mesh.len() {
                let t = mat.traction_of_affine(&a, mesh.elements()[e].normal());
                let s = y.local_ids(e)[0].unwrap();
                phi[2 * s] = t.x;
                phi[2 * s + 1] = t.y;
            }
            let lhs = &v * faer::col::from_slice::<f64>(&phi);
            let rhs = &k * faer::col::from_slice::<f64>(&u);
            let scale = (0..rhs.nrows()).map(|i| rhs[i].abs()).fold(0.0, f64::max);
            for i in 0..rhs.nrows() {
                assert!((lhs[i] - rhs[i]).abs() < 1e-9 * scale, "p={p} {i}: {} {}", lhs[i], rhs[i]);
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let m = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64 + 0.5);
        let dir = std::env::temp_dir().join(format!("fbem-dump-{}", std::process::id()));
        dump_matrix(&m, &dir).unwrap();
        let l = load_matrix(&dir).unwrap();
        assert_eq!(l, m);
        std::fs::remove_file(&dir).ok();
    }
}
