//! Numerical kernels: paired-coordinate complex arithmetic, 2D reflections and
//! Poincare-ball operations.
//!
//! Complex vectors are stored interleaved `(re, im, re, im, ...)`. Every
//! differentiable kernel has a matching `*_vjp` that accumulates the
//! vector-Jacobian product of an upstream gradient into caller buffers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this norm exp_0 switches to its Taylor series.
pub const SMALL_NORM: f64 = 1e-10;
/// Relative margin kept from the ball boundary when projecting.
pub const BALL_MARGIN: f64 = 1e-5;
/// Largest `artanh` argument used by [`ball_distance`].
pub const ARTANH_CLAMP: f64 = 1.0 - 1e-15;

/// Prefactor of the curved distance `K(c) * artanh(sqrt(c) * |(-p) + q|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistancePrefactor {
    /// `K = 2 / c`.
    #[default]
    TwoOverC,
    /// `K = 2 / sqrt(c)`, the usual Poincare-ball metric.
    TwoOverSqrtC,
}

impl DistancePrefactor {
    pub fn value(self, c: f64) -> f64 {
        match self {
            DistancePrefactor::TwoOverC => 2.0 / c,
            DistancePrefactor::TwoOverSqrtC => 2.0 / c.sqrt(),
        }
    }

    pub fn derivative(self, c: f64) -> f64 {
        match self {
            DistancePrefactor::TwoOverC => -2.0 / (c * c),
            DistancePrefactor::TwoOverSqrtC => -1.0 / (c * c.sqrt()),
        }
    }
}

/// A point of the Poincare ball of curvature `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    pub data: Vec<f64>,
    pub c: f64,
}

impl BallPoint {
    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_inside(&self) -> bool {
        self.c.sqrt() * self.norm() < 1.0
    }

    pub fn neg(&self) -> BallPoint {
        BallPoint { data: self.data.iter().map(|x| -x).collect(), c: self.c }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

fn check_pairs(len: usize, angles: usize) -> Result<()> {
    if !len.is_multiple_of(2) {
        return Err(Error::OddDimension(len));
    }
    if angles != len / 2 {
        return Err(Error::DimensionMismatch { expected: len / 2, found: angles });
    }
    Ok(())
}

/// Rotates each pair `(h[2k], h[2k+1])` by `theta[k]`.
pub fn complex_rotate(h: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    check_pairs(h.len(), theta.len())?;
    let mut out = vec![0.0; h.len()];
    rotate_into(h, theta, &mut out);
    Ok(out)
}

pub(crate) fn rotate_into(h: &[f64], theta: &[f64], out: &mut [f64]) {
    for (k, &t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        let (a, b) = (h[2 * k], h[2 * k + 1]);
        out[2 * k] = a * c - b * s;
        out[2 * k + 1] = a * s + b * c;
    }
}

/// Backward of [`complex_rotate`]; `q` is the forward output.
pub fn rotate_vjp(theta: &[f64], q: &[f64], g: &[f64], g_h: &mut [f64], g_theta: &mut [f64]) {
    for (k, &t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        let (g0, g1) = (g[2 * k], g[2 * k + 1]);
        g_h[2 * k] += g0 * c + g1 * s;
        g_h[2 * k + 1] += -g0 * s + g1 * c;
        g_theta[k] += -g0 * q[2 * k + 1] + g1 * q[2 * k];
    }
}

/// Pairwise complex product `(ac - bd, ad + bc)`.
pub fn complex_product(h: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    if h.len() != r.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), found: r.len() });
    }
    if !h.len().is_multiple_of(2) {
        return Err(Error::OddDimension(h.len()));
    }
    let mut out = vec![0.0; h.len()];
    product_into(h, r, &mut out);
    Ok(out)
}

pub(crate) fn product_into(h: &[f64], r: &[f64], out: &mut [f64]) {
    for k in 0..h.len() / 2 {
        let (a, b) = (h[2 * k], h[2 * k + 1]);
        let (c, d) = (r[2 * k], r[2 * k + 1]);
        out[2 * k] = a * c - b * d;
        out[2 * k + 1] = a * d + b * c;
    }
}

pub fn product_vjp(h: &[f64], r: &[f64], g: &[f64], g_h: &mut [f64], g_r: &mut [f64]) {
    for k in 0..h.len() / 2 {
        let (a, b) = (h[2 * k], h[2 * k + 1]);
        let (c, d) = (r[2 * k], r[2 * k + 1]);
        let (g0, g1) = (g[2 * k], g[2 * k + 1]);
        g_h[2 * k] += g0 * c + g1 * d;
        g_h[2 * k + 1] += -g0 * d + g1 * c;
        g_r[2 * k] += g0 * a + g1 * b;
        g_r[2 * k + 1] += -g0 * b + g1 * a;
    }
}

/// Applies `[[cos t, sin t], [sin t, -cos t]]` to each pair.
pub fn reflect2d(h: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    check_pairs(h.len(), theta.len())?;
    let mut out = vec![0.0; h.len()];
    reflect_into(h, theta, &mut out);
    Ok(out)
}

pub(crate) fn reflect_into(h: &[f64], theta: &[f64], out: &mut [f64]) {
    for (k, &t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        let (a, b) = (h[2 * k], h[2 * k + 1]);
        out[2 * k] = a * c + b * s;
        out[2 * k + 1] = a * s - b * c;
    }
}

/// Backward of [`reflect2d`]; `q` is the forward output.
pub fn reflect_vjp(theta: &[f64], q: &[f64], g: &[f64], g_h: &mut [f64], g_theta: &mut [f64]) {
    for (k, &t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        let (g0, g1) = (g[2 * k], g[2 * k + 1]);
        g_h[2 * k] += g0 * c + g1 * s;
        g_h[2 * k + 1] += g0 * s - g1 * c;
        g_theta[k] += -g0 * q[2 * k + 1] + g1 * q[2 * k];
    }
}

/// `tanh(u)/u` and `(d/du (tanh(u)/u)) / u`, with series for small `u`.
fn tanh_ratio(u: f64) -> (f64, f64) {
    if u < 1e-4 {
        let u2 = u * u;
        (1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0, -2.0 / 3.0 + 8.0 * u2 / 15.0)
    } else {
        let t = u.tanh();
        let sech2 = 1.0 - t * t;
        (t / u, (u * sech2 - t) / (u * u * u))
    }
}

/// Exponential map at the origin, `tanh(sqrt(c)|v|) v / (sqrt(c)|v|)`.
pub fn exp_map_zero(v: &[f64], c: f64) -> BallPoint {
    let mut data = vec![0.0; v.len()];
    exp0_into(v, c, &mut data);
    BallPoint { data, c }
}

pub(crate) fn exp0_into(v: &[f64], c: f64, out: &mut [f64]) {
    let n = norm(v);
    if n < SMALL_NORM {
        out.copy_from_slice(v);
        return;
    }
    let (phi, _) = tanh_ratio(c.sqrt() * n);
    for (o, x) in out.iter_mut().zip(v) {
        *o = phi * x;
    }
}

/// Backward of exp_0. Returns the gradient with respect to `c`.
pub fn exp0_vjp(v: &[f64], c: f64, g: &[f64], g_v: &mut [f64]) -> f64 {
    let n2 = norm_sq(v);
    let n = n2.sqrt();
    if n < SMALL_NORM {
        for (gv, gi) in g_v.iter_mut().zip(g) {
            *gv += gi;
        }
        return 0.0;
    }
    let (phi, psi) = tanh_ratio(c.sqrt() * n);
    let vg = dot(v, g);
    for ((gv, gi), x) in g_v.iter_mut().zip(g).zip(v) {
        *gv += phi * gi + c * psi * vg * x;
    }
    vg * psi * n2 / 2.0
}

fn mobius_coeffs(p: &[f64], q: &[f64], c: f64) -> (f64, f64, f64, f64, f64, f64) {
    let pq = dot(p, q);
    let pp = norm_sq(p);
    let qq = norm_sq(q);
    let a = 1.0 + 2.0 * c * pq + c * qq;
    let b = 1.0 - c * pp;
    let den = 1.0 + 2.0 * c * pq + c * c * pp * qq;
    (pq, pp, qq, a, b, den)
}

pub(crate) fn mobius_into(p: &[f64], q: &[f64], c: f64, out: &mut [f64]) {
    let (_, _, _, a, b, den) = mobius_coeffs(p, q, c);
    for ((o, x), y) in out.iter_mut().zip(p).zip(q) {
        *o = (a * x + b * y) / den;
    }
}

/// Backward of Mobius addition. Returns the gradient with respect to `c`.
pub fn mobius_vjp(p: &[f64], q: &[f64], c: f64, g: &[f64], g_p: &mut [f64], g_q: &mut [f64]) -> f64 {
    let (pq, pp, qq, a, b, den) = mobius_coeffs(p, q, c);
    // N = a p + b q, out = N / den
    let gn_dot_p = dot(g, p) / den;
    let gn_dot_q = dot(g, q) / den;
    let g_dot_n = a * dot(g, p) + b * dot(g, q);
    let g_den = -g_dot_n / (den * den);
    let g_a = gn_dot_p;
    let g_b = gn_dot_q;
    let d = p.len();
    for i in 0..d {
        let gn = g[i] / den;
        g_p[i] += a * gn
            + g_a * 2.0 * c * q[i]
            - g_b * 2.0 * c * p[i]
            + g_den * (2.0 * c * q[i] + 2.0 * c * c * qq * p[i]);
        g_q[i] += b * gn
            + g_a * (2.0 * c * p[i] + 2.0 * c * q[i])
            + g_den * (2.0 * c * p[i] + 2.0 * c * c * pp * q[i]);
    }
    g_a * (2.0 * pq + qq) - g_b * pp + g_den * (2.0 * pq + 2.0 * c * pp * qq)
}

/// Mobius addition on the ball.
pub fn mobius_add(p: &BallPoint, q: &BallPoint) -> Result<BallPoint> {
    if p.c != q.c {
        return Err(Error::CurvatureMismatch(p.c, q.c));
    }
    if p.data.len() != q.data.len() {
        return Err(Error::DimensionMismatch { expected: p.data.len(), found: q.data.len() });
    }
    let mut data = vec![0.0; p.data.len()];
    mobius_into(&p.data, &q.data, p.c, &mut data);
    Ok(BallPoint { data, c: p.c })
}

/// Distance value plus whether the `artanh` argument had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvedDistance {
    pub value: f64,
    pub clamped: bool,
}

/// Curved distance between raw coordinates; `scratch` must have the input length.
pub(crate) fn distance_raw(
    x: &[f64],
    y: &[f64],
    c: f64,
    prefactor: DistancePrefactor,
    scratch: &mut [f64],
) -> CurvedDistance {
    let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
    mobius_into(&neg_x, y, c, scratch);
    let z = c.sqrt() * norm(scratch);
    let clamped = z >= ARTANH_CLAMP;
    let z = z.min(ARTANH_CLAMP);
    CurvedDistance { value: prefactor.value(c) * z.atanh(), clamped }
}

/// Backward of the curved distance with upstream scalar `g`. Returns the
/// gradient with respect to `c`.
pub fn distance_vjp(
    x: &[f64],
    y: &[f64],
    c: f64,
    prefactor: DistancePrefactor,
    g: f64,
    g_x: &mut [f64],
    g_y: &mut [f64],
) -> f64 {
    let d = x.len();
    let neg_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let mut m = vec![0.0; d];
    mobius_into(&neg_x, y, c, &mut m);
    let mn = norm(&m);
    let sc = c.sqrt();
    let z = sc * mn;
    let k = prefactor.value(c);
    let mut g_c = g * prefactor.derivative(c) * z.min(ARTANH_CLAMP).atanh();
    if z >= ARTANH_CLAMP || mn == 0.0 {
        return g_c;
    }
    let g_z = g * k / (1.0 - z * z);
    g_c += g_z * mn / (2.0 * sc);
    let g_m: Vec<f64> = m.iter().map(|v| g_z * sc * v / mn).collect();
    let mut g_negx = vec![0.0; d];
    g_c += mobius_vjp(&neg_x, y, c, &g_m, &mut g_negx, g_y);
    for (gx, gn) in g_x.iter_mut().zip(&g_negx) {
        *gx -= gn;
    }
    g_c
}

/// `d^c(p, q) = K(c) artanh(sqrt(c) |(-p) + q|)`, clamping the argument below 1.
pub fn ball_distance(p: &BallPoint, q: &BallPoint, prefactor: DistancePrefactor) -> Result<CurvedDistance> {
    if p.c != q.c {
        return Err(Error::CurvatureMismatch(p.c, q.c));
    }
    if p.data.len() != q.data.len() {
        return Err(Error::DimensionMismatch { expected: p.data.len(), found: q.data.len() });
    }
    let mut scratch = vec![0.0; p.data.len()];
    Ok(distance_raw(&p.data, &q.data, p.c, prefactor, &mut scratch))
}

/// Rescales `v` to norm `(1 - margin)/sqrt(c)` when `sqrt(c)|v| >= 1`.
pub fn project_to_ball(v: &[f64], c: f64) -> BallPoint {
    let mut data = v.to_vec();
    project_in_place(&mut data, c);
    BallPoint { data, c }
}

/// Returns whether the projection was active.
pub(crate) fn project_in_place(v: &mut [f64], c: f64) -> bool {
    let n = norm(v);
    let sc = c.sqrt();
    if sc * n < 1.0 {
        return false;
    }
    let s = (1.0 - BALL_MARGIN) / (sc * n);
    v.iter_mut().for_each(|x| *x *= s);
    true
}

/// Backward of an active projection; `v` is the pre-projection input.
/// Returns the gradient with respect to `c`.
pub fn project_vjp(v: &[f64], c: f64, g: &[f64], g_v: &mut [f64]) -> f64 {
    let n2 = norm_sq(v);
    let n = n2.sqrt();
    let sc = c.sqrt();
    if sc * n < 1.0 {
        for (gv, gi) in g_v.iter_mut().zip(g) {
            *gv += gi;
        }
        return 0.0;
    }
    let s = (1.0 - BALL_MARGIN) / (sc * n);
    let vg = dot(v, g);
    for ((gv, gi), x) in g_v.iter_mut().zip(g).zip(v) {
        *gv += s * gi - s * vg * x / n2;
    }
    -0.5 * s * vg / c
}
