//! Legendre polynomials, the integrated-Legendre shape functions, nodal
//! Lagrange bases and Legendre expansions of sampled data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `P_n(x)` by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> f64 {
    legendre_with_derivative(n, x).0
}

/// `(P_n(x), P_n'(x))`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// All `P_0..=P_n` at `x`.
pub fn legendre_all(n: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n >= 1 {
        out[1] = x;
    }
    for k in 1..n {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}

/// Hierarchical H1 shape functions of degree `p` on `[-1, 1]`: two vertex
/// functions followed by `p - 1` integrated Legendre bubbles.
///
/// Writes values and reference derivatives into `val` and `der` (length `p+1`).
pub fn h1_shape(p: usize, t: f64, val: &mut [f64], der: &mut [f64]) {
    val[0] = 0.5 * (1.0 - t);
    val[1] = 0.5 * (1.0 + t);
    der[0] = -0.5;
    der[1] = 0.5;
    if p < 2 {
        return;
    }
    let mut leg = vec![0.0; p + 1];
    legendre_all(p, t, &mut leg);
    for k in 2..=p {
        let kf = k as f64;
        val[k] = (leg[k] - leg[k - 2]) / (2.0 * (2.0 * kf - 1.0)).sqrt();
        der[k] = leg[k - 1] * ((2.0 * kf - 1.0) / 2.0).sqrt();
    }
}

/// Lagrange basis through `nodes`, evaluated at `t`.
pub fn lagrange(nodes: &[f64], t: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(nodes.len()) {
        let mut v = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                v *= (t - xj) / (nodes[i] - xj);
            }
        }
        *o = v;
    }
}

/// Derivative of the Lagrange basis through `nodes` at `t`.
pub fn lagrange_derivative(nodes: &[f64], t: f64, out: &mut [f64]) {
    let n = nodes.len();
    for i in 0..n {
        let mut s = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut prod = 1.0 / (nodes[i] - nodes[k]);
            for j in 0..n {
                if j != i && j != k {
                    prod *= (t - nodes[j]) / (nodes[i] - nodes[j]);
                }
            }
            s += prod;
        }
        out[i] = s;
    }
}

/// Legendre coefficients `a_0..=a_p` of the degree-`p` least-squares fit to
/// `values` sampled at `nodes` (exact interpolation when `nodes.len() == p+1`).
pub fn legendre_coefficients(nodes: &[f64], values: &[f64], p: usize) -> Result<Vec<f64>> {
    if nodes.len() != values.len() {
        return Err(Error::InvalidArgument("node/value length mismatch".into()));
    }
    if nodes.len() < p + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples for degree {p}, got {}",
            p + 1,
            nodes.len()
        )));
    }
    let m = nodes.len();
    let mut a = DMatrix::<f64>::zeros(m, p + 1);
    let mut row = vec![0.0; p + 1];
    for (i, &x) in nodes.iter().enumerate() {
        legendre_all(p, x, &mut row);
        for k in 0..=p {
            a[(i, k)] = row[k];
        }
    }
    let b = DVector::from_column_slice(values);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidArgument(format!("Legendre fit failed: {e}")))?;
    Ok(sol.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_legendre, gauss_lobatto};

    #[test]
    fn legendre_values() {
        assert!((legendre(2, 0.5) - (-0.125)).abs() < 1e-15);
        assert!((legendre(3, 0.3) - 0.5 * (5.0 * 0.027 - 0.9)).abs() < 1e-15);
        let (_, d) = legendre_with_derivative(3, 0.3);
        assert!((d - 0.5 * (15.0 * 0.09 - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn bubbles_vanish_at_endpoints() {
        let p = 6;
        let mut v = vec![0.0; p + 1];
        let mut d = vec![0.0; p + 1];
        for t in [-1.0, 1.0] {
            h1_shape(p, t, &mut v, &mut d);
            for k in 2..=p {
                assert!(v[k].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bubble_derivative_matches_difference() {
        let p = 5;
        let mut v1 = vec![0.0; p + 1];
        let mut v2 = vec![0.0; p + 1];
        let mut d = vec![0.0; p + 1];
        let mut dd = vec![0.0; p + 1];
        let (t, h) = (0.37, 1e-6);
        h1_shape(p, t + h, &mut v1, &mut dd);
        h1_shape(p, t - h, &mut v2, &mut dd);
        h1_shape(p, t, &mut vec![0.0; p + 1], &mut d);
        for k in 0..=p {
            assert!(((v1[k] - v2[k]) / (2.0 * h) - d[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn lagrange_is_nodal() {
        let r = gauss_legendre(4).unwrap();
        let mut out = vec![0.0; 4];
        for (i, &x) in r.nodes.iter().enumerate() {
            lagrange(&r.nodes, x, &mut out);
            for (j, &o) in out.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((o - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn coefficient_examples() {
        let r = gauss_lobatto(5).unwrap();
        let c = legendre_coefficients(&r.nodes, &[1.0; 5], 4).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && c[1..].iter().all(|x| x.abs() < 1e-14));
        let v: Vec<f64> = r.nodes.iter().map(|&t| t).collect();
        let c = legendre_coefficients(&r.nodes, &v, 4).unwrap();
        assert!((c[1] - 1.0).abs() < 1e-14 && c[0].abs() < 1e-14 && c[2..].iter().all(|x| x.abs() < 1e-14));
        let v: Vec<f64> = r.nodes.iter().map(|&t| t * t).collect();
        let c = legendre_coefficients(&r.nodes, &v, 4).unwrap();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((c[2] - 2.0 / 3.0).abs() < 1e-14);
        assert!(c[1].abs() < 1e-14 && c[3].abs() < 1e-14 && c[4].abs() < 1e-14);
    }

    #[test]
    fn coefficient_needs_samples() {
        assert!(legendre_coefficients(&[0.0, 1.0], &[1.0, 2.0], 2).is_err());
    }
}
