//! Polygonal boundary geometry, boundary meshes and h/p refinement.

use std::collections::BTreeSet;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Maximal ratio of the lengths of two neighbouring elements.
pub const MAX_NEIGHBOUR_RATIO: f64 = 4.0;
/// Maximal degree jump between neighbouring elements.
pub const MAX_DEGREE_JUMP: usize = 1;

const BREAK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Dirichlet,
    Neumann,
    Contact,
}

/// Labelling of one polygon side. `breaks` are interior side parameters in
/// `(0, 1)` (strictly increasing); `labels[k]` applies between consecutive
/// breaks, so `labels.len() == breaks.len() + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Side {
    #[serde(default)]
    pub breaks: Vec<f64>,
    pub labels: Vec<Part>,
}

impl Side {
    pub fn uniform(part: Part) -> Self {
        Side { breaks: Vec::new(), labels: vec![part] }
    }

    fn label_at(&self, param: f64) -> Part {
        let k = self.breaks.iter().take_while(|&&b| b <= param).count();
        self.labels[k]
    }
}

/// Closed, simple, counterclockwise polygon with a Dirichlet / Neumann /
/// contact labelling of its sides.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGeometry {
    corners: Vec<Point>,
    sides: Vec<Side>,
}

impl BoundaryGeometry {
    pub fn new(corners: Vec<Point>, sides: Vec<Side>) -> Result<Self> {
        let g = BoundaryGeometry { corners, sides };
        g.validate()?;
        Ok(g)
    }

    /// Axis-aligned square `[-l/2, l/2]^2` with sides in the order bottom,
    /// right, top, left.
    pub fn square(l: f64, sides: [Side; 4]) -> Result<Self> {
        let c = 0.5 * l;
        let corners = vec![
            Point::new(-c, -c),
            Point::new(c, -c),
            Point::new(c, c),
            Point::new(-c, c),
        ];
        Self::new(corners, sides.to_vec())
    }

    pub fn corners(&self) -> &[Point] {
        &self.corners
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn num_sides(&self) -> usize {
        self.corners.len()
    }

    pub fn side_endpoints(&self, i: usize) -> (Point, Point) {
        let n = self.corners.len();
        (self.corners[i], self.corners[(i + 1) % n])
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.num_sides())
            .map(|i| {
                let (a, b) = self.side_endpoints(i);
                (b - a).norm()
            })
            .sum()
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.corners {
            for b in &self.corners {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.corners.len();
        0.5 * (0..n)
            .map(|i| {
                let a = self.corners[i];
                let b = self.corners[(i + 1) % n];
                a.x * b.y - a.y * b.x
            })
            .sum::<f64>()
    }

    fn validate(&self) -> Result<()> {
        let n = self.corners.len();
        if n < 3 {
            return Err(Error::InvalidGeometry("polygon needs at least 3 corners".into()));
        }
        if self.sides.len() != n {
            return Err(Error::InvalidGeometry(format!(
                "{} corners but {} side labellings",
                n,
                self.sides.len()
            )));
        }
        for (i, s) in self.sides.iter().enumerate() {
            if s.labels.len() != s.breaks.len() + 1 {
                return Err(Error::InvalidGeometry(format!("side {i}: labels/breaks mismatch")));
            }
            let mut prev = 0.0;
            for &b in &s.breaks {
                if b <= prev + BREAK_TOL || b >= 1.0 - BREAK_TOL {
                    return Err(Error::InvalidGeometry(format!("side {i}: bad break {b}")));
                }
                prev = b;
            }
            let (a, b) = self.side_endpoints(i);
            if (b - a).norm() <= 0.0 {
                return Err(Error::InvalidGeometry(format!("side {i} has zero length")));
            }
        }
        if self.signed_area() <= 0.0 {
            return Err(Error::InvalidGeometry("polygon must be counterclockwise".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = self.side_endpoints(i);
                let (c, d) = self.side_endpoints(j);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::InvalidGeometry(format!(
                        "polygon is not simple: sides {i} and {j} intersect"
                    )));
                }
            }
        }
        // Closures of the Dirichlet and contact parts must be disjoint: walk
        // the cyclic sequence of labelled spans and reject any D/C contact.
        let spans: Vec<Part> = self.sides.iter().flat_map(|s| s.labels.iter().copied()).collect();
        let m = spans.len();
        let has_dirichlet = spans.contains(&Part::Dirichlet);
        let has_contact = spans.contains(&Part::Contact);
        if has_dirichlet && has_contact {
            for k in 0..m {
                let (x, y) = (spans[k], spans[(k + 1) % m]);
                if (x == Part::Dirichlet && y == Part::Contact)
                    || (x == Part::Contact && y == Part::Dirichlet)
                {
                    return Err(Error::InvalidGeometry(
                        "Dirichlet and contact parts touch".into(),
                    ));
                }
            }
        }
        // cap(Gamma) < 1 is guaranteed by diam < 2.
        if self.diameter() >= 2.0 {
            return Err(Error::InvalidGeometry(format!(
                "diameter {} >= 2; rescale so that the logarithmic capacity is below 1",
                self.diameter()
            )));
        }
        Ok(())
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        cross(q - p, r - p).abs() < 1e-14
            && r.x >= p.x.min(q.x) - 1e-14
            && r.x <= p.x.max(q.x) + 1e-14
            && r.y >= p.y.min(q.y) - 1e-14
            && r.y <= p.y.max(q.y) + 1e-14
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

/// A straight boundary element.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub a: Point,
    pub b: Point,
    /// Polygon side containing the element.
    pub side: usize,
    pub part: Part,
    /// Bisection depth relative to the initial mesh.
    pub level: u32,
    pub degree: usize,
    /// Arc-length coordinates of the endpoints, measured from corner 0.
    pub s0: f64,
    pub s1: f64,
}

impl Element {
    pub fn h(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn tangent(&self) -> Point {
        (self.b - self.a) / self.h()
    }

    /// Outward normal: the tangent rotated clockwise by 90 degrees.
    pub fn normal(&self) -> Point {
        let t = self.tangent();
        Point::new(t.y, -t.x)
    }

    pub fn point(&self, t: f64) -> Point {
        self.a + (self.b - self.a) * (0.5 * (t + 1.0))
    }

    pub fn jacobian(&self) -> f64 {
        0.5 * self.h()
    }

    pub fn midpoint(&self) -> Point {
        0.5 * (self.a + self.b)
    }

    fn bisect(&self) -> (Element, Element) {
        let m = self.midpoint();
        let sm = 0.5 * (self.s0 + self.s1);
        let left = Element { b: m, s1: sm, level: self.level + 1, ..self.clone() };
        let right = Element { a: m, s0: sm, level: self.level + 1, ..self.clone() };
        (left, right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementMap {
    pub point: Point,
    pub tangent: Point,
    pub normal: Point,
    pub jacobian: f64,
}

/// Mesh of a polygonal boundary; elements are stored in counterclockwise
/// order, so element `i` starts at mesh vertex `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMesh {
    geometry: BoundaryGeometry,
    elements: Vec<Element>,
}

impl BoundaryMesh {
    pub fn geometry(&self) -> &BoundaryGeometry {
        &self.geometry
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, i: usize) -> Result<&Element> {
        self.elements.get(i).ok_or(Error::OutOfRange { index: i, len: self.elements.len() })
    }

    pub fn next(&self, i: usize) -> usize {
        (i + 1) % self.elements.len()
    }

    pub fn prev(&self, i: usize) -> usize {
        (i + self.elements.len() - 1) % self.elements.len()
    }

    pub fn contact_elements(&self) -> Vec<usize> {
        self.part_elements(Part::Contact)
    }

    pub fn part_elements(&self, part: Part) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.elements[i].part == part).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.elements.iter().map(Element::h).sum()
    }

    /// Hash of element endpoints and degrees; spaces built on different
    /// meshes never share a fingerprint in practice.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for e in &self.elements {
            e.a.x.to_bits().hash(&mut h);
            e.a.y.to_bits().hash(&mut h);
            e.degree.hash(&mut h);
            e.part.hash(&mut h);
        }
        h.finish()
    }

    pub fn with_uniform_degree(&self, p: usize) -> BoundaryMesh {
        let mut m = self.clone();
        m.elements.iter_mut().for_each(|e| e.degree = p);
        m
    }

    pub fn element_map(&self, id: usize, t: f64) -> Result<ElementMap> {
        let e = self.element(id)?;
        Ok(ElementMap { point: e.point(t), tangent: e.tangent(), normal: e.normal(), jacobian: e.jacobian() })
    }

    /// True if the vertex shared by elements `i-1` and `i` is a polygon corner
    /// with a genuine change of direction.
    pub fn vertex_is_corner(&self, i: usize) -> bool {
        let e0 = &self.elements[self.prev(i)];
        let e1 = &self.elements[i];
        e0.side != e1.side && cross(e0.tangent(), e1.tangent()).abs() > 1e-12
    }

    /// Element containing the arc coordinate `s` (half-open `[s0, s1)`).
    pub fn locate(&self, s: f64) -> usize {
        let per = self.geometry.perimeter();
        let s = s.rem_euclid(per);
        match self
            .elements
            .binary_search_by(|e| if e.s1 <= s { std::cmp::Ordering::Less } else if e.s0 > s { std::cmp::Ordering::Greater } else { std::cmp::Ordering::Equal })
        {
            Ok(i) => i,
            Err(i) => i.min(self.elements.len() - 1),
        }
    }

    /// Apply h- and p-refinement marks followed by the closure pass.
    pub fn refine(&self, h_marks: &BTreeSet<usize>, p_marks: &BTreeSet<usize>) -> Result<BoundaryMesh> {
        if let Some(&i) = h_marks.intersection(p_marks).next() {
            return Err(Error::InvalidArgument(format!("element {i} marked for both h and p")));
        }
        for &i in h_marks.iter().chain(p_marks.iter()) {
            self.element(i)?;
        }
        let mut elements = Vec::with_capacity(self.len() + h_marks.len());
        for (i, e) in self.elements.iter().enumerate() {
            if h_marks.contains(&i) {
                let (l, r) = e.bisect();
                elements.push(l);
                elements.push(r);
            } else if p_marks.contains(&i) {
                elements.push(Element { degree: e.degree + 1, ..e.clone() });
            } else {
                elements.push(e.clone());
            }
        }
        let mut m = BoundaryMesh { geometry: self.geometry.clone(), elements };
        m.close();
        Ok(m)
    }

    /// Restore local quasi-uniformity: bisect elements more than
    /// `MAX_NEIGHBOUR_RATIO` times longer than a neighbour, and raise degrees
    /// that lag a neighbour by more than `MAX_DEGREE_JUMP`.
    fn close(&mut self) {
        loop {
            let n = self.elements.len();
            let mut bisect = vec![false; n];
            let mut changed = false;
            for i in 0..n {
                let j = (i + 1) % n;
                let (hi, hj) = (self.elements[i].h(), self.elements[j].h());
                if hi > MAX_NEIGHBOUR_RATIO * hj * (1.0 + 1e-9) {
                    bisect[i] = true;
                }
                if hj > MAX_NEIGHBOUR_RATIO * hi * (1.0 + 1e-9) {
                    bisect[j] = true;
                }
            }
            for i in 0..n {
                let j = (i + 1) % n;
                let (pi, pj) = (self.elements[i].degree, self.elements[j].degree);
                if pi > pj + MAX_DEGREE_JUMP {
                    self.elements[j].degree = pi - MAX_DEGREE_JUMP;
                    changed = true;
                } else if pj > pi + MAX_DEGREE_JUMP {
                    self.elements[i].degree = pj - MAX_DEGREE_JUMP;
                    changed = true;
                }
            }
            if bisect.iter().any(|&b| b) {
                changed = true;
                let mut out = Vec::with_capacity(n + 8);
                for (e, b) in self.elements.iter().zip(bisect) {
                    if b {
                        let (l, r) = e.bisect();
                        out.push(l);
                        out.push(r);
                    } else {
                        out.push(e.clone());
                    }
                }
                self.elements = out;
            }
            if !changed {
                break;
            }
        }
    }
}

/// Uniform initial mesh: every side split into `elements_per_side` equal
/// elements, with extra breakpoints wherever the side's labelling changes.
pub fn build_mesh(
    geometry: &BoundaryGeometry,
    elements_per_side: usize,
    degree: usize,
) -> Result<BoundaryMesh> {
    if elements_per_side == 0 {
        return Err(Error::InvalidArgument("need at least one element per side".into()));
    }
    if degree == 0 {
        return Err(Error::InvalidArgument("polynomial degree must be >= 1".into()));
    }
    let mut elements = Vec::new();
    let mut s_base = 0.0;
    for (k, side) in geometry.sides.iter().enumerate() {
        let (a, b) = geometry.side_endpoints(k);
        let len = (b - a).norm();
        let mut params: Vec<f64> =
            (0..=elements_per_side).map(|i| i as f64 / elements_per_side as f64).collect();
        for &br in &side.breaks {
            if params.iter().all(|&q| (q - br).abs() > BREAK_TOL) {
                params.push(br);
            }
        }
        params.sort_by(f64::total_cmp);
        for w in params.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let pa = a + (b - a) * t0;
            let pb = if t1 == 1.0 { b } else { a + (b - a) * t1 };
            elements.push(Element {
                a: pa,
                b: pb,
                side: k,
                part: side.label_at(0.5 * (t0 + t1)),
                level: 0,
                degree,
                s0: s_base + t0 * len,
                s1: s_base + t1 * len,
            });
        }
        s_base += len;
    }
    let mut m = BoundaryMesh { geometry: geometry.clone(), elements };
    m.close();
    Ok(m)
}
