//! Material constants and the kernels of the 2D Navier-Lamé boundary
//! integral operators.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Point;

pub type Mat2 = Matrix2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Young's modulus.
    pub e: f64,
    /// Poisson ratio.
    pub nu: f64,
}

impl Material {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) || !(nu > 0.0 && nu < 0.5) {
            return Err(Error::InvalidArgument(format!("invalid material E={e}, nu={nu}")));
        }
        Ok(Material { e, nu })
    }

    /// `λ = Eν / (1 - ν²)`.
    pub fn lambda(&self) -> f64 {
        self.e * self.nu / (1.0 - self.nu * self.nu)
    }

    /// `μ = E / (1 + ν)`.
    pub fn mu(&self) -> f64 {
        self.e / (1.0 + self.nu)
    }

    pub fn constants(&self) -> KernelConstants {
        let (l, m) = (self.lambda(), self.mu());
        let d = l + 2.0 * m;
        KernelConstants {
            a: (l + 3.0 * m) / (4.0 * PI * m * d),
            b: (l + m) / (4.0 * PI * m * d),
            c_c: m / (2.0 * PI * d),
            c_k: (l + m) / (2.0 * PI * d),
            c_w: m * (l + m) / (PI * d),
        }
    }

    /// Traction `σ(u) n` of the affine field `u(x) = A x + c` (Hooke's law
    /// with the constants above).
    pub fn traction_of_affine(&self, a: &Mat2, n: Point) -> Point {
        let eps = 0.5 * (a + a.transpose());
        let sigma = Mat2::identity() * (self.lambda() * eps.trace()) + eps * (2.0 * self.mu());
        sigma * n
    }
}

/// Scalar prefactors shared by the kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConstants {
    /// Coefficient of `-log|x-y| I` in the fundamental solution.
    pub a: f64,
    /// Coefficient of the rank-one term of the fundamental solution.
    pub b: f64,
    pub c_c: f64,
    pub c_k: f64,
    /// Prefactor of the hypersingular kernel in integrated-by-parts form.
    pub c_w: f64,
}

fn outer(u: Point, v: Point) -> Mat2 {
    u * v.transpose()
}

/// Fundamental solution `G(x, y)`.
pub fn fundamental_solution(x: Point, y: Point, material: &Material) -> Result<Mat2> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::InvalidArgument("fundamental solution is singular at x = y".into()));
    }
    let k = material.constants();
    Ok(single_layer_kernel(&k, d, r))
}

fn single_layer_kernel(k: &KernelConstants, d: Point, r: f64) -> Mat2 {
    let rh = d / r;
    Mat2::identity() * (-k.a * r.ln()) + outer(rh, rh) * k.b
}

/// A matrix kernel `k(x, y)` given the unit normals at both points.
///
/// `log_coeff` is the coefficient `c` such that `k - c log|x-y| I` is
/// bounded or Cauchy-type along straight pieces.
pub trait Kernel: Sync {
    fn log_coeff(&self) -> f64;
    fn eval(&self, x: Point, y: Point, nx: Point, ny: Point) -> Mat2;
    /// `k(x, y) = k(y, x)^T` for all arguments.
    fn symmetric(&self) -> bool {
        false
    }
}

/// Kernel of `V`.
pub struct SingleLayer(pub KernelConstants);

impl Kernel for SingleLayer {
    fn log_coeff(&self) -> f64 {
        -self.0.a
    }
    fn eval(&self, x: Point, y: Point, _nx: Point, _ny: Point) -> Mat2 {
        let d = x - y;
        single_layer_kernel(&self.0, d, d.norm())
    }
    fn symmetric(&self) -> bool {
        true
    }
}

fn double_layer(k: &KernelConstants, x: Point, y: Point, ny: Point) -> Mat2 {
    let d = y - x;
    let r = d.norm();
    let rh = d / r;
    let rn = rh.dot(&ny);
    -(Mat2::identity() * (rn * k.c_c) + outer(rh, rh) * (2.0 * k.c_k * rn)
        - (outer(rh, ny) - outer(ny, rh)) * k.c_c)
        / r
}

/// Kernel of `K`: `(K u)(x) = ∫ k(x, y) u(y) ds_y`.
pub struct DoubleLayer(pub KernelConstants);

impl Kernel for DoubleLayer {
    fn log_coeff(&self) -> f64 {
        0.0
    }
    fn eval(&self, x: Point, y: Point, _nx: Point, ny: Point) -> Mat2 {
        double_layer(&self.0, x, y, ny)
    }
}

/// Kernel of the adjoint `K'`.
pub struct AdjointDoubleLayer(pub KernelConstants);

impl Kernel for AdjointDoubleLayer {
    fn log_coeff(&self) -> f64 {
        0.0
    }
    fn eval(&self, x: Point, y: Point, nx: Point, _ny: Point) -> Mat2 {
        double_layer(&self.0, y, x, nx).transpose()
    }
}

/// Weakly singular kernel of `W` acting on arc-length derivatives:
/// `<W u, v> = ∫∫ v'(x)^T Q(x, y) u'(y)`.
pub struct HypersingularWeak(pub KernelConstants);

impl Kernel for HypersingularWeak {
    fn log_coeff(&self) -> f64 {
        -self.0.c_w
    }
    fn eval(&self, x: Point, y: Point, _nx: Point, _ny: Point) -> Mat2 {
        let d = x - y;
        let r = d.norm();
        let rh = d / r;
        (Mat2::identity() * (-r.ln()) + outer(rh, rh)) * self.0.c_w
    }
    fn symmetric(&self) -> bool {
        true
    }
}

/// Cauchy-singular kernel for pointwise `W`:
/// `(W u)(x) = ∫ D(x, y) u'(y) ds_y` (principal value).
pub struct HypersingularPointwise(pub KernelConstants);

impl Kernel for HypersingularPointwise {
    fn log_coeff(&self) -> f64 {
        0.0
    }
    fn eval(&self, x: Point, y: Point, nx: Point, _ny: Point) -> Mat2 {
        let tx = Point::new(-nx.y, nx.x);
        let d = x - y;
        let r = d.norm();
        let rh = d / r;
        let rt = rh.dot(&tx);
        -(Mat2::identity() * (-rt) + outer(tx, rh) + outer(rh, tx) - outer(rh, rh) * (2.0 * rt))
            * (self.0.c_w / r)
    }
}
