//! TOML run configuration and the built-in benchmarks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::kernels::Material;
use crate::mesh::{build_mesh, BoundaryGeometry, BoundaryMesh, Point, Side};
use crate::problem::{Friction, ProblemData, TractionLoad};
use crate::solver::NewtonOptions;

const TRESCA2D: &str = include_str!("../../../benchmarks/tresca2d.toml");
const COULOMB2D: &str = include_str!("../../../benchmarks/coulomb2d.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub corners: Vec<[f64; 2]>,
    pub sides: Vec<Side>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub gap: Expr,
    pub friction: Friction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Uniform,
    HAdaptive,
    HpAdaptive,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "h-adaptive" => Ok(Mode::HAdaptive),
            "hp-adaptive" => Ok(Mode::HpAdaptive),
            _ => Err(Error::Config(format!("unknown mode '{s}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Uniform => "uniform",
            Mode::HAdaptive => "h-adaptive",
            Mode::HpAdaptive => "hp-adaptive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSpec {
    pub elements_per_side: usize,
    pub degree: usize,
    pub gamma_bar: f64,
    /// Degree of the stabilization projection space above `p_T`.
    pub z_extra: usize,
    pub quadrature_tol: f64,
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        DiscretizationSpec { elements_per_side: 4, degree: 1, gamma_bar: 1e-3, z_extra: 0, quadrature_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptivitySpec {
    pub mode: Mode,
    pub theta: f64,
    pub delta: f64,
    pub max_steps: usize,
    /// Stop before solving a mesh with more unknowns than this.
    pub max_dof: usize,
    /// Divide the squared Neumann and Calderón residual indicators by 100.
    pub scaled_weighting: bool,
}

impl Default for AdaptivitySpec {
    fn default() -> Self {
        AdaptivitySpec {
            mode: Mode::Uniform,
            theta: 0.3,
            delta: 0.5,
            max_steps: 6,
            max_dof: 4000,
            scaled_weighting: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub r: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = NewtonOptions::default();
        SolverSpec { r: d.r, tol: d.tol, max_iter: d.max_iter }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
    /// Compute the approximate error against the last solution of the run.
    pub approx_error: bool,
    /// Write the system matrices of every step as binary dumps.
    pub dump_matrices: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub pins: Vec<[f64; 2]>,
    pub geometry: GeometrySpec,
    pub material: Material,
    pub contact: ContactSpec,
    #[serde(default)]
    pub loads: Vec<TractionLoad>,
    #[serde(default)]
    pub discretization: DiscretizationSpec,
    #[serde(default)]
    pub adaptivity: AdaptivitySpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Built-in benchmark by name (`tresca2d`, `coulomb2d`).
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "tresca2d" => TRESCA2D,
            "coulomb2d" => COULOMB2D,
            _ => return None,
        };
        Some(RunConfig::from_toml(text).expect("built-in benchmark parses"))
    }

    /// A built-in name or a path to a TOML file.
    pub fn load(spec: &str) -> Result<Self> {
        if let Some(c) = RunConfig::builtin(spec) {
            return Ok(c);
        }
        let text = std::fs::read_to_string(Path::new(spec))?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        Material::new(self.material.e, self.material.nu).map_err(|e| Error::Config(e.to_string()))?;
        self.geometry()?;
        let a = &self.adaptivity;
        if !(a.theta > 0.0 && a.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", a.theta)));
        }
        if !(a.delta > 0.0 && a.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", a.delta)));
        }
        let d = &self.discretization;
        if d.degree == 0 || d.elements_per_side == 0 {
            return Err(Error::Config("degree and elements_per_side must be positive".into()));
        }
        if !(d.gamma_bar >= 0.0) || !(d.quadrature_tol > 0.0) {
            return Err(Error::Config("gamma_bar must be >= 0 and quadrature_tol > 0".into()));
        }
        if !(self.solver.r > 0.0) || !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::Config("invalid solver options".into()));
        }
        let data = self.problem();
        data.validate(&self.initial_mesh()?)?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<BoundaryGeometry> {
        let corners = self.geometry.corners.iter().map(|c| Point::new(c[0], c[1])).collect();
        BoundaryGeometry::new(corners, self.geometry.sides.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn initial_mesh(&self) -> Result<BoundaryMesh> {
        let d = &self.discretization;
        build_mesh(&self.geometry()?, d.elements_per_side, d.degree)
    }

    pub fn problem(&self) -> ProblemData {
        ProblemData {
            material: self.material,
            gap: self.contact.gap.clone(),
            friction: self.contact.friction.clone(),
            loads: self.loads.clone(),
            pins: self.pins.iter().map(|p| Point::new(p[0], p[1])).collect(),
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions { r: self.solver.r, tol: self.solver.tol, max_iter: self.solver.max_iter }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Part;

    #[test]
    fn builtin_tresca_data() {
        let c = RunConfig::builtin("tresca2d").unwrap();
        assert_eq!(c.material, Material { e: 500.0, nu: 0.33 });
        let p = c.problem();
        let x = Point::new(0.3, -0.5);
        assert!((p.gap.eval(x) - (1.0 - (1.0f64 - 0.01 * 0.09).sqrt())).abs() < 1e-16);
        match &p.friction {
            Friction::Tresca { threshold } => assert!((threshold.eval(x) - (0.211 + 0.412 * 0.3)).abs() < 1e-15),
            _ => panic!("expected Tresca"),
        }
        // left side load, top side load on [-1/2, -1/4]
        let left = p.traction(3, 0.5, Point::new(-0.5, 0.1));
        assert!((left.x + (0.4 * -0.6)).abs() < 1e-15 && left.y == 0.0);
        let top = p.traction(2, 0.9, Point::new(-0.4, 0.5));
        assert!((top.y - 20.0 * (-0.1) * 0.15).abs() < 1e-14 && top.x == 0.0);
        assert_eq!(p.traction(2, 0.5, Point::new(0.0, 0.5)), Point::zeros());
        let mesh = c.initial_mesh().unwrap();
        assert_eq!(mesh.len(), 16);
        let dir: Vec<_> = mesh.part_elements(Part::Dirichlet);
        assert_eq!(dir.len(), 1);
        let e = &mesh.elements()[dir[0]];
        assert!((e.a - Point::new(0.5, 0.5)).norm() < 1e-15 && (e.b - Point::new(0.25, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn builtin_coulomb_data() {
        let c = RunConfig::builtin("coulomb2d").unwrap();
        assert_eq!(c.material, Material { e: 5.0, nu: 0.45 });
        assert_eq!(c.pins, vec![[0.0, -0.5]]);
        let p = c.problem();
        let r = p.traction(1, 0.3, Point::new(0.5, -0.2));
        let l = p.traction(3, 0.7, Point::new(-0.5, -0.2));
        let fx = -10.0 * 0.3 * 0.7 * (-10.0 * 0.2f64 * 0.2).exp();
        assert!((r.x - fx).abs() < 1e-14 && (l.x + fx).abs() < 1e-14);
        assert!((r.y - 7.0 / 8.0 * 0.21).abs() < 1e-15 && r.y == l.y);
        let t = p.traction(2, 0.25, Point::new(0.25, 0.5));
        assert!((t.y + 12.5 * 0.0625 * 0.5625).abs() < 1e-15);
        assert!(matches!(p.friction, Friction::Coulomb { .. }));
    }

    #[test]
    fn rejects_bad_parameters() {
        let text = include_str!("../../../benchmarks/tresca2d.toml");
        let bad = text.replace("theta = 0.3", "theta = 1.5");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = text.replace("nu = 0.33", "nu = 0.7");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = text.replace("[material]", "[material]\nfoo = 1");
        assert!(RunConfig::from_toml(&bad).is_err());
    }
}
