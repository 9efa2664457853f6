//! Spherical space curves, their Frenet frames and the cone they generate.
//!
//! A [`Curve`] wraps a parametrised map into the unit sphere together with its
//! parameter interval. Derivatives come from closed forms when the map has
//! them and from 5-point central differences otherwise.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub type Vec3 = Vector3<f64>;

/// Finite-difference step for derivatives and frame differentiation.
pub const FD_STEP: f64 = 1e-5;
/// Below this |det(g, g', g'')| a curve counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;
/// Number of nodes in the arclength and flat-curve tables.
pub const TABLE_NODES: usize = 2048;

const DOMAIN_SLACK: f64 = 1e-12;

/// A parametrised map R -> R^3. Implementations may supply closed-form
/// derivatives; otherwise finite differences are used.
pub trait CurveMap: Send + Sync + fmt::Debug {
    fn point(&self, t: f64) -> Vec3;
    fn velocity(&self, _t: f64) -> Option<Vec3> {
        None
    }
    fn acceleration(&self, _t: f64) -> Option<Vec3> {
        None
    }
}

#[derive(Clone)]
pub struct Curve {
    map: Arc<dyn CurveMap>,
    lo: f64,
    hi: f64,
    arclength: bool,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve")
            .field("map", &self.map)
            .field("domain", &(self.lo, self.hi))
            .field("arclength", &self.arclength)
            .finish()
    }
}

/// Orthonormal frame e1 = g, e2 = g'/|g'|, e3 = e1 x e2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
}

impl Frame {
    /// Coordinates of `x` in the basis (e1, e2, e3).
    pub fn coords(&self, x: &Vec3) -> [f64; 3] {
        [x.dot(&self.e1), x.dot(&self.e2), x.dot(&self.e3)]
    }

    pub fn from_coords(&self, c: [f64; 3]) -> Vec3 {
        self.e1 * c[0] + self.e2 * c[1] + self.e3 * c[2]
    }

    /// Projection onto e1^perp in the (e2, e3) basis.
    pub fn project(&self, x: &Vec3) -> [f64; 2] {
        [x.dot(&self.e2), x.dot(&self.e3)]
    }

    pub fn axes(&self) -> [Vec3; 3] {
        [self.e1, self.e2, self.e3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegeneracyReport {
    pub min_abs_det: f64,
    pub argmin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianReport {
    /// Max relative deviation of the finite-difference Jacobian from
    /// |eta1| * |det(g x g', g', g'')|.
    pub max_rel_error: f64,
    /// Max deviation of |det(g x g', g', g'')| from 1.
    pub max_normalization_error: f64,
}

/// Curve description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
#[derive(Default)]
pub enum CurveSpec {
    #[default]
    Model,
    Table {
        thetas: Vec<f64>,
        points: Vec<[f64; 3]>,
    },
}


impl CurveSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug)]
struct ModelMap;

impl CurveMap for ModelMap {
    fn point(&self, t: f64) -> Vec3 {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Vec3::new(t.cos() * r, t.sin() * r, r)
    }
    fn velocity(&self, t: f64) -> Option<Vec3> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Some(Vec3::new(-t.sin() * r, t.cos() * r, 0.0))
    }
    fn acceleration(&self, t: f64) -> Option<Vec3> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Some(Vec3::new(-t.cos() * r, -t.sin() * r, 0.0))
    }
}

struct FnMap<F>(F);

impl<F> fmt::Debug for FnMap<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnMap")
    }
}

impl<F: Fn(f64) -> Vec3 + Send + Sync> CurveMap for FnMap<F> {
    fn point(&self, t: f64) -> Vec3 {
        (self.0)(t)
    }
}

/// Natural cubic spline through (x_i, y_i), extrapolated linearly outside.
#[derive(Debug, Clone)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: &[f64], y: &[f64]) -> Spline {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second-derivative system.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (rhs - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Spline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.slope_at_node(0) * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.slope_at_node(n - 1) * (t - self.x[n - 1]);
        }
        let i = interval_index(&self.x, t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn slope_at_node(&self, i: usize) -> f64 {
        let n = self.x.len();
        if i == 0 {
            let h = self.x[1] - self.x[0];
            (self.y[1] - self.y[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0
        } else {
            let h = self.x[n - 1] - self.x[n - 2];
            (self.y[n - 1] - self.y[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0
        }
    }
}

/// Index i with x[i] <= t < x[i+1], clamped to valid intervals.
fn interval_index(x: &[f64], t: f64) -> usize {
    let n = x.len();
    match x.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    }
}

#[derive(Debug)]
struct TableMap {
    sx: Spline,
    sy: Spline,
    sz: Spline,
}

impl CurveMap for TableMap {
    fn point(&self, t: f64) -> Vec3 {
        let p = Vec3::new(self.sx.eval(t), self.sy.eval(t), self.sz.eval(t));
        let n = p.norm();
        if n > 0.0 {
            p / n
        } else {
            p
        }
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson).
#[derive(Debug, Clone)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Pchip {
        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
        let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for i in 1..n - 1 {
                if del[i - 1] * del[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
                }
            }
            d[0] = pchip_end(h[0], h[1], del[0], del[1]);
            d[n - 1] = pchip_end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Pchip { x, y, d }
    }

    fn eval(&self, t: f64) -> f64 {
        let i = interval_index(&self.x, t);
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

fn pchip_end(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Cumulative trapezoid integral of `f` sampled at `t`.
fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(t.len());
    s.push(0.0);
    for i in 1..t.len() {
        let prev = s[i - 1];
        s.push(prev + 0.5 * (f[i] + f[i - 1]) * (t[i] - t[i - 1]));
    }
    s
}

#[derive(Debug)]
struct ArclengthMap {
    inner: Curve,
    inverse: Pchip,
}

impl ArclengthMap {
    fn param(&self, s: f64) -> f64 {
        self.inverse.eval(s)
    }
}

impl CurveMap for ArclengthMap {
    fn point(&self, s: f64) -> Vec3 {
        self.inner.p0(self.param(s))
    }
    fn velocity(&self, s: f64) -> Option<Vec3> {
        let v = self.inner.p1(self.param(s));
        Some(v / v.norm())
    }
    fn acceleration(&self, s: f64) -> Option<Vec3> {
        let t = self.param(s);
        let v = self.inner.p1(t);
        let a = self.inner.p2(t);
        let speed = v.norm();
        let e = v / speed;
        Some((a - e * e.dot(&a)) / (speed * speed))
    }
}

#[derive(Debug)]
struct FlatMap {
    inner: Curve,
    inverse: Pchip,
}

impl CurveMap for FlatMap {
    fn point(&self, s: f64) -> Vec3 {
        let t = self.inverse.eval(s);
        match self.inner.frame_raw(t) {
            Some(f) => f.e3,
            None => Vec3::zeros(),
        }
    }
}

#[derive(Debug)]
struct RotatedMap {
    inner: Curve,
    rot: Matrix3<f64>,
}

impl CurveMap for RotatedMap {
    fn point(&self, t: f64) -> Vec3 {
        self.rot * self.inner.p0(t)
    }
    fn velocity(&self, t: f64) -> Option<Vec3> {
        Some(self.rot * self.inner.p1(t))
    }
    fn acceleration(&self, t: f64) -> Option<Vec3> {
        Some(self.rot * self.inner.p2(t))
    }
}

fn fd1(f: impl Fn(f64) -> Vec3, t: f64, h: f64) -> Vec3 {
    (f(t - 2.0 * h) - f(t - h) * 8.0 + f(t + h) * 8.0 - f(t + 2.0 * h)) / (12.0 * h)
}

fn fd2(f: impl Fn(f64) -> Vec3, t: f64, h: f64) -> Vec3 {
    (-f(t - 2.0 * h) + f(t - h) * 16.0 - f(t) * 30.0 + f(t + h) * 16.0 - f(t + 2.0 * h))
        / (12.0 * h * h)
}

impl Curve {
    /// g(t) = (cos t, sin t, 1) / sqrt 2 on [0, 1].
    pub fn model() -> Curve {
        Curve {
            map: Arc::new(ModelMap),
            lo: 0.0,
            hi: 1.0,
            arclength: false,
        }
    }

    /// Curve from an arbitrary map without closed-form derivatives.
    pub fn from_fn<F>(f: F, lo: f64, hi: f64) -> Result<Curve>
    where
        F: Fn(f64) -> Vec3 + Send + Sync + 'static,
    {
        Curve::from_map(Arc::new(FnMap(f)), lo, hi)
    }

    pub fn from_map(map: Arc<dyn CurveMap>, lo: f64, hi: f64) -> Result<Curve> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(param(format!("invalid domain [{lo}, {hi}]")));
        }
        Ok(Curve {
            map,
            lo,
            hi,
            arclength: false,
        })
    }

    /// Spline through tabulated points, renormalised onto the unit sphere.
    pub fn from_table(thetas: &[f64], points: &[[f64; 3]]) -> Result<Curve> {
        if thetas.len() != points.len() {
            return Err(param("thetas and points differ in length"));
        }
        if thetas.len() < 4 {
            return Err(param("table curve needs at least 4 nodes"));
        }
        if thetas.iter().any(|t| !t.is_finite())
            || points.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(param("table contains non-finite values"));
        }
        if thetas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(param("thetas must be strictly increasing"));
        }
        if points.iter().any(|p| Vec3::from(*p).norm() < 1e-12) {
            return Err(param("table point at the origin"));
        }
        let col = |k: usize| -> Vec<f64> {
            points
                .iter()
                .map(|p| p[k] / Vec3::from(*p).norm())
                .collect()
        };
        let map = TableMap {
            sx: Spline::new(thetas, &col(0)),
            sy: Spline::new(thetas, &col(1)),
            sz: Spline::new(thetas, &col(2)),
        };
        Curve::from_map(Arc::new(map), thetas[0], thetas[thetas.len() - 1])
    }

    pub fn from_spec(spec: &CurveSpec) -> Result<Curve> {
        match spec {
            CurveSpec::Model => Ok(Curve::model()),
            CurveSpec::Table { thetas, points } => Curve::from_table(thetas, points),
        }
    }

    /// The same curve rotated rigidly by `rot` (assumed orthogonal).
    pub fn rotated(&self, rot: Matrix3<f64>) -> Curve {
        Curve {
            map: Arc::new(RotatedMap {
                inner: self.clone(),
                rot,
            }),
            lo: self.lo,
            hi: self.hi,
            arclength: self.arclength,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_arclength(&self) -> bool {
        self.arclength
    }

    fn check(&self, t: f64) -> Result<()> {
        if t.is_finite() && t >= self.lo - DOMAIN_SLACK && t <= self.hi + DOMAIN_SLACK {
            Ok(())
        } else {
            Err(Error::Domain {
                value: t,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    pub(crate) fn p0(&self, t: f64) -> Vec3 {
        self.map.point(t)
    }

    pub(crate) fn p1(&self, t: f64) -> Vec3 {
        match self.map.velocity(t) {
            Some(v) => v,
            None => fd1(|u| self.map.point(u), t, FD_STEP),
        }
    }

    pub(crate) fn p2(&self, t: f64) -> Vec3 {
        if let Some(a) = self.map.acceleration(t) {
            return a;
        }
        if self.map.velocity(t).is_some() {
            fd1(|u| self.map.velocity(u).unwrap_or_default(), t, FD_STEP)
        } else {
            fd2(|u| self.map.point(u), t, FD_STEP)
        }
    }

    pub fn point(&self, t: f64) -> Result<Vec3> {
        self.check(t)?;
        Ok(self.p0(t))
    }

    pub fn velocity(&self, t: f64) -> Result<Vec3> {
        self.check(t)?;
        Ok(self.p1(t))
    }

    pub fn acceleration(&self, t: f64) -> Result<Vec3> {
        self.check(t)?;
        Ok(self.p2(t))
    }

    /// det(g, g', g'') at t.
    pub fn det(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.det_raw(t))
    }

    fn det_raw(&self, t: f64) -> f64 {
        Matrix3::from_columns(&[self.p0(t), self.p1(t), self.p2(t)]).determinant()
    }

    pub(crate) fn frame_raw(&self, t: f64) -> Option<Frame> {
        let p = self.p0(t);
        let pn = p.norm();
        if pn < 1e-12 {
            return None;
        }
        let e1 = p / pn;
        let v = self.p1(t);
        let v = v - e1 * e1.dot(&v);
        let vn = v.norm();
        if vn < 1e-12 {
            return None;
        }
        let e2 = v / vn;
        Some(Frame {
            e1,
            e2,
            e3: e1.cross(&e2),
        })
    }

    /// Frenet frame at t.
    pub fn frame(&self, t: f64) -> Result<Frame> {
        self.check(t)?;
        self.frame_raw(t).ok_or(Error::DegenerateDerivative(t))
    }

    /// Minimum |det(g, g', g'')| over `n_samples` uniform parameters.
    pub fn check_nondegenerate(&self, n_samples: usize) -> NondegeneracyReport {
        let n = n_samples.max(2);
        let mut best = (f64::INFINITY, self.lo);
        for i in 0..n {
            let t = self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64;
            let d = self.det_raw(t).abs();
            if d < best.0 {
                best = (d, t);
            }
        }
        NondegeneracyReport {
            min_abs_det: best.0,
            argmin: best.1,
            ok: best.0 >= DEGENERACY_THRESHOLD,
        }
    }

    /// Largest ||g(t)| - 1| over a uniform grid.
    pub fn max_sphere_deviation(&self, n_samples: usize) -> f64 {
        let n = n_samples.max(2);
        (0..n)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64;
                (self.p0(t).norm() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    fn curvature_raw(&self, t: f64) -> Option<f64> {
        let fp = self.frame_raw(t + FD_STEP)?;
        let fm = self.frame_raw(t - FD_STEP)?;
        let f = self.frame_raw(t)?;
        let de2 = (fp.e2 - fm.e2) / (2.0 * FD_STEP);
        Some(de2.dot(&f.e3))
    }

    /// <e2'(t), e3(t)> with e2' from a central difference.
    pub fn curvature(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        if t - FD_STEP < self.lo || t + FD_STEP > self.hi {
            return Err(Error::Domain {
                value: t,
                lo: self.lo + FD_STEP,
                hi: self.hi - FD_STEP,
            });
        }
        self.curvature_raw(t).ok_or(Error::DegenerateDerivative(t))
    }

    fn nodes(&self) -> Vec<f64> {
        (0..TABLE_NODES)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (TABLE_NODES - 1) as f64)
            .collect()
    }

    /// Unit-speed reparametrisation on [0, L].
    pub fn reparametrize_arclength(&self) -> Result<Curve> {
        let t = self.nodes();
        let speed: Vec<f64> = t.iter().map(|&u| self.p1(u).norm()).collect();
        if let Some((i, _)) = speed.iter().enumerate().find(|(_, v)| !(**v > 1e-12)) {
            return Err(Error::DegenerateDerivative(t[i]));
        }
        let s = cumulative_trapezoid(&t, &speed);
        let len = s[s.len() - 1];
        Ok(Curve {
            map: Arc::new(ArclengthMap {
                inner: self.clone(),
                inverse: Pchip::new(s, t),
            }),
            lo: 0.0,
            hi: len,
            arclength: true,
        })
    }

    /// t -> e3(t), reparametrised by s(t) = integral of |curvature|.
    pub fn flat_curve(&self) -> Result<Curve> {
        let t = self.nodes();
        let mut kappa = Vec::with_capacity(t.len());
        for &u in &t {
            kappa.push(self.curvature_raw(u).ok_or(Error::DegenerateDerivative(u))?);
        }
        let sign = kappa[0].signum();
        if let Some((i, k)) = kappa
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.abs() > 1e-9) || k.signum() != sign)
        {
            return Err(Error::DegenerateCurve { det: *k, at: t[i] });
        }
        let abs: Vec<f64> = kappa.iter().map(|k| k.abs()).collect();
        let s = cumulative_trapezoid(&t, &abs);
        let len = s[s.len() - 1];
        Ok(Curve {
            map: Arc::new(FlatMap {
                inner: self.clone(),
                inverse: Pchip::new(s, t),
            }),
            lo: 0.0,
            hi: len,
            arclength: true,
        })
    }

    /// pi_t(x) in the basis (e2(t), e3(t)).
    pub fn project(&self, t: f64, x: &Vec3) -> Result<[f64; 2]> {
        Ok(self.frame(t)?.project(x))
    }

    /// Compares the finite-difference Jacobian of
    /// (eta1, eta2, t) -> eta1 g'(t) + eta2 (g x g')(t) with |eta1| |det(g x g', g', g'')|.
    pub fn jacobian_identity_check(&self, samples: usize, seed: u64) -> Result<JacobianReport> {
        if !self.arclength {
            return Err(Error::Precondition(
                "jacobian check needs an arclength curve".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = 4.0 * FD_STEP;
        let mut report = JacobianReport {
            max_rel_error: 0.0,
            max_normalization_error: 0.0,
        };
        for _ in 0..samples {
            let t = rng.gen_range(self.lo + margin..self.hi - margin);
            let e1: f64 = rng.gen_range(0.1..1.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let e2: f64 = rng.gen_range(-1.0..1.0);
            let (jd, predicted, norm) = self.jacobian_at(e1, e2, t);
            report.max_rel_error = report.max_rel_error.max((jd - predicted).abs() / predicted);
            report.max_normalization_error = report.max_normalization_error.max((norm - 1.0).abs());
        }
        Ok(report)
    }

    /// (|finite-difference Jacobian|, |eta1| |det(g x g', g', g'')|, |det(g x g', g', g'')|).
    pub fn jacobian_at(&self, eta1: f64, eta2: f64, t: f64) -> (f64, f64, f64) {
        let xi = |u: f64| {
            let g = self.p0(u);
            let v = self.p1(u);
            v * eta1 + g.cross(&v) * eta2
        };
        let g = self.p0(t);
        let v = self.p1(t);
        let a = self.p2(t);
        let n = g.cross(&v);
        let dt = (xi(t + FD_STEP) - xi(t - FD_STEP)) / (2.0 * FD_STEP);
        let jd = Matrix3::from_columns(&[v, n, dt]).determinant().abs();
        let norm = Matrix3::from_columns(&[n, v, a]).determinant().abs();
        (jd, eta1.abs() * norm, norm)
    }
}

/// The cone {r e3(t)} generated by a curve, with radii in [r_min, 1].
#[derive(Debug, Clone)]
pub struct ConeModel {
    pub curve: Curve,
    pub r_min: f64,
}

impl ConeModel {
    pub fn new(curve: Curve, r_min: f64) -> Result<ConeModel> {
        if !(r_min > 0.0 && r_min <= 1.0) {
            return Err(param(format!("r_min = {r_min} outside (0, 1]")));
        }
        Ok(ConeModel { curve, r_min })
    }

    pub fn point(&self, r: f64, t: f64) -> Result<Vec3> {
        if !(r >= self.r_min && r <= 1.0) {
            return Err(param(format!("radius {r} outside [{}, 1]", self.r_min)));
        }
        Ok(self.curve.frame(t)?.e3 * r)
    }
}

/// Distance from `x` to the surface {r e3(t) : t in domain, r real}.
pub fn distance_to_cone(curve: &Curve, x: &Vec3) -> f64 {
    let (lo, hi) = curve.domain();
    let dist2 = |t: f64| -> f64 {
        match curve.frame_raw(t) {
            Some(f) => {
                let r = x.dot(&f.e3);
                (x - f.e3 * r).norm_squared()
            }
            None => f64::INFINITY,
        }
    };
    let n = 512;
    let mut best = (f64::INFINITY, lo);
    for i in 0..n {
        let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let d = dist2(t);
        if d < best.0 {
            best = (d, t);
        }
    }
    let step = (hi - lo) / (n - 1) as f64;
    let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if dist2(c) < dist2(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.min(dist2(0.5 * (a + b))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn model_values_at_zero() {
        let c = Curve::model();
        let p = c.point(0.0).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2), epsilon = 1e-12);
        let f = c.frame(0.0).unwrap();
        assert_abs_diff_eq!(f.e2, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.e3, Vec3::new(-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2), epsilon = 1e-12);
        assert_abs_diff_eq!(c.det(0.0).unwrap(), 0.5 * FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(!c.is_arclength());
    }

    #[test]
    fn model_frame_at_quarter_turn() {
        let c = Curve::from_map(Arc::new(ModelMap), 0.0, 2.0).unwrap();
        let f = c.frame(std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(f.e2, Vec3::new(-1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let c = Curve::model();
        assert!(matches!(c.point(1.5), Err(Error::Domain { .. })));
        assert!(matches!(c.frame(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(c.curvature(0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn zero_velocity_is_degenerate() {
        let c = Curve::from_fn(|_| Vec3::new(0.0, 0.0, 1.0), 0.0, 1.0).unwrap();
        assert!(matches!(c.frame(0.5), Err(Error::DegenerateDerivative(_))));
    }

    #[test]
    fn nondegeneracy_reports() {
        let r = Curve::model().check_nondegenerate(1000);
        assert_abs_diff_eq!(r.min_abs_det, 0.5 * FRAC_1_SQRT_2, epsilon = 1e-9);
        assert!(r.ok);
        let circle = Curve::from_fn(|t| Vec3::new(t.cos(), t.sin(), 0.0), 0.0, 1.0).unwrap();
        let r = circle.check_nondegenerate(100);
        assert!(r.min_abs_det < 1e-6);
        assert!(!r.ok);
    }

    #[test]
    fn model_curvature() {
        let c = Curve::model();
        for t in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(c.curvature(t).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-4);
        }
        assert!((c.curvature(0.01).unwrap() - c.curvature(0.5).unwrap()).abs() <= 1e-4);
    }

    #[test]
    fn arclength_of_model() {
        let c = Curve::model().reparametrize_arclength().unwrap();
        assert!(c.is_arclength());
        assert_abs_diff_eq!(c.domain().1, FRAC_1_SQRT_2, epsilon = 1e-6);
        for i in 1..20 {
            let s = c.domain().1 * i as f64 / 20.0;
            assert_abs_diff_eq!(c.velocity(s).unwrap().norm(), 1.0, epsilon = 1e-6);
            let g = c.point(s).unwrap();
            let a = c.acceleration(s).unwrap();
            assert_abs_diff_eq!(g.dot(&a), -1.0, epsilon = 1e-3);
            assert_abs_diff_eq!(c.curvature(s).unwrap(), 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn arclength_is_idempotent() {
        let c = Curve::model().reparametrize_arclength().unwrap();
        let d = c.reparametrize_arclength().unwrap();
        assert_abs_diff_eq!(c.domain().1, d.domain().1, epsilon = 1e-8);
        for i in 0..=50 {
            let s = c.domain().1 * i as f64 / 50.0;
            assert_abs_diff_eq!(c.point(s).unwrap(), d.point(s).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn flat_curve_of_model() {
        let c = Curve::model();
        let f = c.flat_curve().unwrap();
        let (lo, hi) = f.domain();
        assert_abs_diff_eq!(hi, FRAC_1_SQRT_2, epsilon = 1e-6);
        for i in 0..=40 {
            let s = lo + (hi - lo) * i as f64 / 40.0;
            assert_abs_diff_eq!(f.point(s).unwrap().norm(), 1.0, epsilon = 1e-9);
        }
        for i in 1..20 {
            let s = hi * i as f64 / 20.0;
            // e3 as a function of s, against -e2 of the original curve at t(s).
            let de3 = (f.p0(s + FD_STEP) - f.p0(s - FD_STEP)) / (2.0 * FD_STEP);
            let t = s * std::f64::consts::SQRT_2;
            let e2 = c.frame(t).unwrap().e2;
            assert!((de3 + e2).norm() < 1e-3, "s={s}");
        }
        assert!(f.check_nondegenerate(200).min_abs_det > 0.1);
    }

    #[test]
    fn projection_examples() {
        let c = Curve::model();
        for t in [0.0, 0.3, 1.0] {
            let f = c.frame(t).unwrap();
            let p = c.project(t, &f.e1).unwrap();
            assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
            let q = c.project(t, &f.e2).unwrap();
            assert_abs_diff_eq!(q[0], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(q[1], 0.0, epsilon = 1e-12);
        }
        let p = c.project(0.0, &Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_examples() {
        let c = Curve::model().reparametrize_arclength().unwrap();
        let (jd, _, _) = c.jacobian_at(0.0, 0.4, 0.3);
        assert!(jd < 1e-9);
        let (j1, _, _) = c.jacobian_at(0.3, 0.4, 0.3);
        let (j2, _, _) = c.jacobian_at(0.6, 0.4, 0.3);
        assert_abs_diff_eq!(j2 / j1, 2.0, epsilon = 2e-3);
        let r = c.jacobian_identity_check(100, 1).unwrap();
        assert!(r.max_rel_error <= 1e-3, "{r:?}");
        assert!(r.max_normalization_error <= 1e-3, "{r:?}");
        assert!(matches!(
            Curve::model().jacobian_identity_check(10, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn table_curve_reproduces_model() {
        let m = Curve::model();
        let thetas: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let pts: Vec<[f64; 3]> = thetas
            .iter()
            .map(|&t| {
                let p = m.point(t).unwrap();
                [p.x, p.y, p.z]
            })
            .collect();
        let c = Curve::from_table(&thetas, &pts).unwrap();
        assert!(c.max_sphere_deviation(500) < 1e-9);
        for t in [0.1, 0.37, 0.8] {
            assert!((c.point(t).unwrap() - m.point(t).unwrap()).norm() < 1e-6);
            assert!((c.det(t).unwrap() - m.det(t).unwrap()).abs() < 1e-3);
        }
    }

    #[test]
    fn table_validation() {
        assert!(Curve::from_table(&[0.0, 1.0], &[[1.0, 0.0, 0.0]; 2]).is_err());
        assert!(Curve::from_table(&[0.0, 0.5, 0.5, 1.0], &[[1.0, 0.0, 0.0]; 4]).is_err());
        assert!(Curve::from_table(&[0.0, 0.3, 0.6, 1.0], &[[0.0, 0.0, 0.0]; 4]).is_err());
    }

    #[test]
    fn cone_distance_model() {
        let c = Curve::model();
        let e3 = c.frame(0.5).unwrap().e3;
        assert!(distance_to_cone(&c, &(e3 * 3.0)) < 1e-9);
        let e1 = c.frame(0.5).unwrap().e1;
        let d = distance_to_cone(&c, &(e3 * 3.0 + e1 * 0.01));
        assert_abs_diff_eq!(d, 0.01, epsilon = 1e-4);
        let cone = ConeModel::new(c, 0.25).unwrap();
        assert!(cone.point(0.1, 0.5).is_err());
        assert_abs_diff_eq!(cone.point(0.5, 0.5).unwrap().norm(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(CurveSpec::from_json(r#"{"kind":"model"}"#).unwrap(), CurveSpec::Model);
        let t = CurveSpec::from_json(r#"{"kind":"table","thetas":[0,1],"points":[[1,0,0],[0,1,0]]}"#)
            .unwrap();
        assert!(matches!(t, CurveSpec::Table { .. }));
        assert!(CurveSpec::from_json(r#"{"kind":"spiral"}"#).is_err());
    }
}
