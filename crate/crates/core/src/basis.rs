//! Orthonormal modal basis on the reference triangle and quadrature rules.
//!
//! The basis is orthonormal for the L2 inner product on the reference
//! triangle {(0,0),(1,0),(0,1)}, built from Legendre x Jacobi products in
//! collapsed coordinates. Mass matrices on physical elements are the identity
//! scaled by the Jacobian determinant, which keeps projections trivial.
//!
//! Triangle quadrature uses a collapsed tensor product: Gauss-Legendre in the
//! first direction and Gauss-Jacobi with weight (1-x) in the second, so rules
//! of any order are generated on demand.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("quadrature order {0} exceeds the supported maximum {1}")]
    UnsupportedOrder(usize, usize),
}

pub const MAX_QUAD_ORDER: usize = 60;

/// Basis size for total degree `p`.
pub fn dim(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Values and gradients of the `dim(p)` basis functions at reference points.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub p: usize,
    pub n: usize,
    /// `values[q][i]`: basis function `i` at point `q`.
    pub values: Vec<Vec<f64>>,
    /// `grads[q][i]`: reference gradient of basis `i` at point `q`.
    pub grads: Vec<Vec<[f64; 2]>>,
}

/// Evaluate the modal basis of degree `p` at the given reference points.
pub fn eval_basis(p: usize, points: &[[f64; 2]]) -> BasisTable {
    let n = dim(p);
    let mut values = Vec::with_capacity(points.len());
    let mut grads = Vec::with_capacity(points.len());
    for &pt in points {
        let (v, g) = eval_point(p, pt);
        debug_assert_eq!(v.len(), n);
        values.push(v);
        grads.push(g);
    }
    BasisTable { p, n, values, grads }
}

/// Basis values and gradients at a single reference point.
///
/// phi_{ij}(x, y) = c_ij P_i(a) ((1-b)/2)^i P_j^{(2i+1,0)}(b)
/// with a = 2x/(1-y) - 1, b = 2y - 1 and c_ij = 2 sqrt((2i+1)(i+j+1)).
/// The (1-b)^i factor clears the collapsed-coordinate singularity, so values
/// and gradients below are evaluated in polynomial form, valid everywhere.
pub fn eval_point(p: usize, pt: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n = dim(p);
    let (x, y) = (pt[0], pt[1]);
    let b = 2.0 * y - 1.0;
    // a is singular at y = 1; the basis functions are not. Evaluate a safely:
    // the (1-b)/2 = (1-y) power in front makes the product polynomial.
    let one_minus_y = 1.0 - y;
    let a = if one_minus_y.abs() > 1e-300 {
        2.0 * x / one_minus_y - 1.0
    } else {
        -1.0
    };

    // Legendre values/derivatives up to degree p at a.
    let (pa, dpa) = legendre_all(p, a);
    let mut values = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];

    let mut idx = 0;
    for i in 0..=p {
        // Jacobi (2i+1, 0) values/derivatives up to degree p - i at b.
        let (pb, dpb) = jacobi_all(p - i, 2.0 * i as f64 + 1.0, b);
        // ((1-b)/2)^i = (1-y)^i and its derivative in y.
        let pow_i = one_minus_y.powi(i as i32);
        let pow_im1 = if i >= 1 { one_minus_y.powi(i as i32 - 1) } else { 0.0 };
        for j in 0..=(p - i) {
            let c = (2.0 * (2 * i + 1) as f64 * (i + j + 1) as f64).sqrt();
            values[idx] = c * pa[i] * pow_i * pb[j];
            // d/dx: da/dx = 2/(1-y); combined with (1-y)^i this is polynomial.
            let dphi_dx = if i == 0 {
                0.0
            } else {
                c * dpa[i] * 2.0 * pow_im1 * pb[j]
            };
            // d/dy: da/dy = 2x/(1-y)^2 = (1+a)/(1-y); with the (1-y)^i factor
            // the product dpa * (1+a) * (1-y)^{i-1} is polynomial.
            let term_a = if i == 0 {
                0.0
            } else {
                dpa[i] * (1.0 + a) * pow_im1 * pb[j]
            };
            let term_pow = if i == 0 {
                0.0
            } else {
                -(i as f64) * pow_im1 * pa[i] * pb[j]
            };
            let term_b = 2.0 * pa[i] * pow_i * dpb[j];
            let dphi_dy = c * (term_a + term_pow + term_b);
            grads[idx] = [dphi_dx, dphi_dy];
            idx += 1;
        }
    }
    (values, grads)
}

/// Legendre polynomials P_0..P_n and derivatives at `x`.
fn legendre_all(n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for k in 1..n {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    (p, dp)
}

/// Jacobi polynomials P_0..P_n with parameters (alpha, 0) and derivatives at `x`.
fn jacobi_all(n: usize, alpha: f64, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = (alpha + 2.0) / 2.0 * x + alpha / 2.0;
    }
    for k in 1..n {
        let kf = k as f64;
        // Standard three-term recurrence for beta = 0.
        let a1 = 2.0 * (kf + 1.0) * (kf + alpha + 1.0) * (2.0 * kf + alpha);
        let a2 = (2.0 * kf + alpha + 1.0) * alpha * alpha;
        let a3 = (2.0 * kf + alpha) * (2.0 * kf + alpha + 1.0) * (2.0 * kf + alpha + 2.0);
        let a4 = 2.0 * (kf + alpha) * kf * (2.0 * kf + alpha + 2.0);
        p[k + 1] = ((a2 + a3 * x) * p[k] - a4 * p[k - 1]) / a1;
    }
    // d/dx P_n^{(a,0)} = (n + a + 1)/2 * P_{n-1}^{(a+1,1)}; build the shifted
    // family separately.
    let mut dp = vec![0.0; n + 1];
    if n >= 1 {
        let q = jacobi_ab_all(n - 1, alpha + 1.0, 1.0, x);
        for k in 1..=n {
            dp[k] = (k as f64 + alpha + 1.0) / 2.0 * q[k - 1];
        }
    }
    (p, dp)
}

/// Jacobi polynomials with general (alpha, beta), values only.
fn jacobi_ab_all(n: usize, alpha: f64, beta: f64, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = (alpha + beta + 2.0) / 2.0 * x + (alpha - beta) / 2.0;
    }
    for k in 1..n {
        let kf = k as f64;
        let a1 = 2.0 * (kf + 1.0) * (kf + alpha + beta + 1.0) * (2.0 * kf + alpha + beta);
        let a2 = (2.0 * kf + alpha + beta + 1.0) * (alpha * alpha - beta * beta);
        let a3 = (2.0 * kf + alpha + beta)
            * (2.0 * kf + alpha + beta + 1.0)
            * (2.0 * kf + alpha + beta + 2.0);
        let a4 = 2.0 * (kf + alpha) * (kf + beta) * (2.0 * kf + alpha + beta + 2.0);
        p[k + 1] = ((a2 + a3 * x) * p[k] - a4 * p[k - 1]) / a1;
    }
    p
}

/// Quadrature rule on the reference triangle or edge.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub order: usize,
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_nd(n, t);
            let dt = -p / dp;
            t += dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_nd(n, t);
        x[n - 1 - i] = t;
        w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

fn legendre_nd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature on the reference triangle {(0,0),(1,0),(0,1)}, exact for total
/// degree `order` polynomials.
///
/// Collapsed (Duffy) tensor product with the (1-b) factor of the Jacobian
/// folded into the weights: the b-direction integrand gains one degree, so
/// that rule takes one extra point.
pub fn triangle_quadrature(order: usize) -> Result<QuadratureRule, BasisError> {
    if order > MAX_QUAD_ORDER {
        return Err(BasisError::UnsupportedOrder(order, MAX_QUAD_ORDER));
    }
    let na = order / 2 + 1; // exact to degree 2na-1 >= order
    let nb = order / 2 + 2; // integrand degree order+1 from the Jacobian
    let (xa, wa) = gauss_legendre(na);
    let (xb, wb) = gauss_legendre(nb);
    let mut points = Vec::with_capacity(na * nb);
    let mut weights = Vec::with_capacity(na * nb);
    for (&b, &wbl) in xb.iter().zip(&wb) {
        for (&a, &wal) in xa.iter().zip(&wa) {
            let x = (1.0 + a) * (1.0 - b) / 4.0;
            let y = (1.0 + b) / 2.0;
            points.push([x, y]);
            // dx dy = (1-b)/8 da db.
            weights.push(wal * wbl * (1.0 - b) / 8.0);
        }
    }
    Ok(QuadratureRule { points, weights, order })
}

/// Gauss rule on [0, 1], exact for degree `order` polynomials.
pub fn edge_quadrature(order: usize) -> Result<(Vec<f64>, Vec<f64>), BasisError> {
    if order > MAX_QUAD_ORDER {
        return Err(BasisError::UnsupportedOrder(order, MAX_QUAD_ORDER));
    }
    let n = order / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok((
        x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|&v| 0.5 * v).collect(),
    ))
}

/// Reference coordinates of points along local edge `e` of the reference
/// triangle, at edge parameters `ts` in [0, 1] measured from the first vertex
/// of the edge in the element's CCW order.
///
/// Local edge `e` joins vertices (e+1)%3 -> (e+2)%3 with reference vertices
/// r0 = (0,0), r1 = (1,0), r2 = (0,1).
pub fn edge_points(e: u8, ts: &[f64]) -> Vec<[f64; 2]> {
    const R: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let a = R[(e as usize + 1) % 3];
    let b = R[(e as usize + 2) % 3];
    ts.iter()
        .map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
        .collect()
}
