//! Data of a contact problem: material, gap, friction law, Neumann loads
//! and point pins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::kernels::Material;
use crate::mesh::{BoundaryMesh, Part, Point};
use crate::quadrature::gl;
use crate::spaces::{MultiplierSpace, PrimalSpace, ScalarBasis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Friction {
    /// Given slip threshold `F(x) > 0`.
    Tresca { threshold: Expr },
    /// Coulomb coefficient `F(x) ≥ 0`; the threshold is `F λ_n`.
    Coulomb { coefficient: Expr },
}

/// Traction `f = (fx, fy)` applied on the side parameter range
/// `[from, to]` of polygon side `side` (0 at its first corner, 1 at the
/// next one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TractionLoad {
    pub side: usize,
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
    pub fx: Expr,
    pub fy: Expr,
}

impl TractionLoad {
    fn range(&self) -> (f64, f64) {
        (self.from.unwrap_or(0.0), self.to.unwrap_or(1.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemData {
    pub material: Material,
    pub gap: Expr,
    pub friction: Friction,
    pub loads: Vec<TractionLoad>,
    pub pins: Vec<Point>,
}

impl ProblemData {
    pub fn is_coulomb(&self) -> bool {
        matches!(self.friction, Friction::Coulomb { .. })
    }

    /// Check the data against a mesh: loads on existing sides, `g ≥ 0` and
    /// admissible friction values at the constraint points.
    pub fn validate(&self, mesh: &BoundaryMesh) -> Result<()> {
        let nsides = mesh.geometry().num_sides();
        for l in &self.loads {
            let (a, b) = l.range();
            if l.side >= nsides || !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                return Err(Error::Config(format!("invalid traction range on side {}", l.side)));
            }
        }
        for node in MultiplierSpace::new(mesh).nodes() {
            let g = self.gap.eval(node.point);
            if !(g >= 0.0) {
                return Err(Error::Config(format!("gap {g} < 0 at {:?}", node.point)));
            }
            match &self.friction {
                Friction::Tresca { threshold } => {
                    let f = threshold.eval(node.point);
                    if !(f > 0.0) {
                        return Err(Error::Config(format!("Tresca threshold {f} <= 0 at {:?}", node.point)));
                    }
                }
                Friction::Coulomb { coefficient } => {
                    let f = coefficient.eval(node.point);
                    if !(f >= 0.0) {
                        return Err(Error::Config(format!("Coulomb coefficient {f} < 0 at {:?}", node.point)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Traction at `x` on side `side` with side parameter `s`.
    pub fn traction(&self, side: usize, s: f64, x: Point) -> Point {
        self.loads
            .iter()
            .filter(|l| l.side == side)
            .filter(|l| {
                let (a, b) = l.range();
                s >= a && s <= b
            })
            .fold(Point::zeros(), |acc, l| acc + Point::new(l.fx.eval(x), l.fy.eval(x)))
    }

    /// Load vector `<f, v>` over the Neumann elements. Traction ranges are
    /// clipped exactly, so loads may start inside an element.
    pub fn load_vector(&self, mesh: &BoundaryMesh, primal: &PrimalSpace) -> Vec<f64> {
        let mut out = vec![0.0; primal.dim()];
        let mut vals = vec![0.0; 64];
        for (e, el) in mesh.elements().iter().enumerate() {
            if el.part != Part::Neumann {
                continue;
            }
            let (sa, sb) = mesh.geometry().side_endpoints(el.side);
            let len2 = (sb - sa).norm_squared();
            let frac = |x: Point| (x - sa).dot(&(sb - sa)) / len2;
            let (f0, f1) = (frac(el.a), frac(el.b));
            let ids = primal.local_ids(e);
            let rule = gl(el.degree + 12);
            for l in self.loads.iter().filter(|l| l.side == el.side) {
                let (a, b) = l.range();
                let lo = f0.max(a);
                let hi = f1.min(b);
                if hi <= lo {
                    continue;
                }
                let (t0, t1) = (-1.0 + 2.0 * (lo - f0) / (f1 - f0), -1.0 + 2.0 * (hi - f0) / (f1 - f0));
                for (q, w) in rule.iter() {
                    let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * q;
                    let x = el.point(t);
                    let f = Point::new(l.fx.eval(x), l.fy.eval(x));
                    let jw = w * 0.5 * (t1 - t0) * el.jacobian();
                    primal.values(e, t, &mut vals);
                    for (k, id) in ids.iter().enumerate() {
                        if let Some(s) = id {
                            out[2 * s] += jw * vals[k] * f.x;
                            out[2 * s + 1] += jw * vals[k] * f.y;
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, BoundaryGeometry, Side};

    fn mesh(n: usize) -> BoundaryMesh {
        let g = BoundaryGeometry::square(1.0, [
            Side::uniform(Part::Contact),
            Side::uniform(Part::Neumann),
            Side::uniform(Part::Neumann),
            Side::uniform(Part::Neumann),
        ])
        .unwrap();
        build_mesh(&g, n, 2).unwrap()
    }

    fn data(loads: Vec<TractionLoad>) -> ProblemData {
        ProblemData {
            material: Material::new(5.0, 0.45).unwrap(),
            gap: Expr::constant(0.0),
            friction: Friction::Coulomb { coefficient: Expr::constant(0.3) },
            loads,
            pins: vec![],
        }
    }

    #[test]
    fn partial_load_resultant() {
        // constant vertical load on the last 3/10 of the top side, split inside an element
        let d = data(vec![TractionLoad {
            side: 2,
            from: Some(0.7),
            to: None,
            fx: Expr::constant(0.0),
            fy: Expr::parse("-2").unwrap(),
        }]);
        let m = mesh(4);
        let x = PrimalSpace::new(&m);
        let f = d.load_vector(&m, &x);
        // sum of the y entries paired with the constant (0, 1) field
        let one = x.interpolate_affine(&m, |_| Point::new(0.0, 1.0));
        let r: f64 = f.iter().zip(&one).map(|(a, b)| a * b).sum();
        assert!((r + 0.6).abs() < 1e-13, "{r}");
        // moment about the origin: x1 ranges over [-1/2, -1/5]
        let rot = x.interpolate_affine(&m, |p| Point::new(-p.y, p.x));
        let mo: f64 = f.iter().zip(&rot).map(|(a, b)| a * b).sum();
        let exact = -2.0 * 0.5 * (0.2f64.powi(2) - 0.25);
        assert!((mo - exact).abs() < 1e-13, "{mo} {exact}");
    }

    #[test]
    fn validation() {
        let m = mesh(2);
        let mut d = data(vec![]);
        assert!(d.validate(&m).is_ok());
        d.gap = Expr::parse("x1").unwrap();
        assert!(d.validate(&m).is_err());
        d.gap = Expr::constant(0.0);
        d.friction = Friction::Tresca { threshold: Expr::constant(0.0) };
        assert!(d.validate(&m).is_err());
    }
}
