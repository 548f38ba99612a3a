//! One-dimensional quadrature rules on the reference interval.
//!
//! Gauss-Legendre and Gauss-Lobatto rules live on `[-1, 1]`. The logarithmic
//! rule integrates `-ln(x) f(x)` on `[0, 1]` and is used to split off the
//! log-singular part of the boundary integral kernels.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::legendre::{legendre, legendre_with_derivative};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    GaussLegendre,
    GaussLobatto,
    /// Weight `-ln(x)` on `[0, 1]`.
    GaussLog,
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integrate `f` over the rule's natural interval.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre rule with `n` points, exact for polynomials of degree `2n-1`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gauss-Legendre rule needs n >= 1".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { kind: RuleKind::GaussLegendre, nodes, weights })
}

/// Gauss-Lobatto rule with `n >= 2` points including both endpoints.
pub fn gauss_lobatto(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidArgument("Gauss-Lobatto rule needs n >= 2".into()));
    }
    let deg = n - 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[n - 1] = 1.0;
    // Interior nodes are the roots of P'_{n-1}; Newton on P'_{n-1} using the
    // Legendre ODE for the second derivative.
    for i in 1..n - 1 {
        let mut x = -(std::f64::consts::PI * i as f64 / deg as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(deg, x);
            let d2p = (2.0 * x * dp - (deg * (deg + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
    }
    let c = 2.0 / (deg * (deg + 1)) as f64;
    let weights = nodes
        .iter()
        .map(|&x| {
            let p = legendre(deg, x);
            c / (p * p)
        })
        .collect();
    Ok(QuadratureRule { kind: RuleKind::GaussLobatto, nodes, weights })
}

/// Gauss rule for the weight `-ln(x)` on `[0, 1]`.
///
/// Built with the modified Chebyshev algorithm from shifted-Legendre modified
/// moments, then Golub-Welsch.
pub fn gauss_log(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("log-weighted rule needs n >= 1".into()));
    }
    let nm = 2 * n;
    // Monic shifted Legendre recurrence on [0,1]: a_k = 1/2, b_k = k^2 / (4 (4k^2 - 1)).
    let a = vec![0.5; nm];
    let b: Vec<f64> = (0..nm)
        .map(|k| {
            let k = k as f64;
            if k == 0.0 {
                0.0
            } else {
                k * k / (4.0 * (4.0 * k * k - 1.0))
            }
        })
        .collect();
    // Modified moments of -ln(x) against the monic shifted Legendre polynomials.
    let mut mom = vec![0.0; nm];
    mom[0] = 1.0;
    let mut lead = 1.0f64; // (k!)^2 / (2k)!
    for (k, m) in mom.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        lead *= kf * kf / ((2.0 * kf - 1.0) * 2.0 * kf);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *m = sign / (kf * (kf + 1.0)) * lead;
    }

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut sig_prev = vec![0.0; nm + 1];
    let mut sig: Vec<f64> = mom.clone();
    sig.push(0.0);
    alpha[0] = a[0] + mom[1] / mom[0];
    beta[0] = mom[0];
    for k in 1..n {
        let mut sig_new = vec![0.0; nm + 1];
        for l in k..(nm - k) {
            let lower = if l >= 1 { sig[l - 1] } else { 0.0 };
            sig_new[l] = sig[l + 1] - (alpha[k - 1] - a[l]) * sig[l] - beta[k - 1] * sig_prev[l]
                + b[l] * lower;
        }
        alpha[k] = a[k] + sig_new[k + 1] / sig_new[k] - sig[k] / sig[k - 1];
        beta[k] = sig_new[k] / sig[k - 1];
        sig_prev = sig;
        sig = sig_new;
    }

    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = alpha[i];
        if i + 1 < n {
            let off = beta[i + 1].sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], beta[0] * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(QuadratureRule {
        kind: RuleKind::GaussLog,
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

const CACHE_MAX: usize = 64;

fn cached(
    cache: &'static OnceLock<Vec<QuadratureRule>>,
    build: fn(usize) -> Result<QuadratureRule>,
    start: usize,
    n: usize,
) -> &'static QuadratureRule {
    let rules = cache.get_or_init(|| {
        (0..=CACHE_MAX)
            .map(|k| build(k.max(start)).expect("valid rule size"))
            .collect()
    });
    &rules[n.clamp(start, CACHE_MAX)]
}

/// Shared Gauss-Legendre rule; `n` is clamped to `1..=64`.
pub fn gl(n: usize) -> &'static QuadratureRule {
    static CACHE: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    cached(&CACHE, gauss_legendre, 1, n)
}

/// Shared log-weighted rule; `n` is clamped to `1..=64`.
pub fn glog(n: usize) -> &'static QuadratureRule {
    static CACHE: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    cached(&CACHE, gauss_log, 1, n)
}
