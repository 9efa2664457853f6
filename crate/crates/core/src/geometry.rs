//! Oriented boxes ("planks") built in the moving frame of a curve: tubes,
//! dual slabs and their high/low/lambda parts, the middle-case families and
//! the cone planks, plus intersection and overlap utilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{distance_to_cone, Curve, Frame, Vec3};
use crate::error::{param, Error, Result};

/// Closed box {c + sum u_i h_i a_i : |u_i| <= 1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plank {
    pub center: Vec3,
    pub axes: [Vec3; 3],
    pub half: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlankRepr {
    center: [f64; 3],
    axes: [[f64; 3]; 3],
    half_lengths: [f64; 3],
}

impl Plank {
    pub fn new(center: Vec3, axes: [Vec3; 3], half: [f64; 3]) -> Result<Plank> {
        if half.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(param("half lengths must be positive and finite"));
        }
        if center.iter().chain(axes.iter().flat_map(|a| a.iter())).any(|v| !v.is_finite()) {
            return Err(param("non-finite plank data"));
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (axes[i].dot(&axes[j]) - want).abs() > 1e-9 {
                    return Err(param("plank axes are not orthonormal"));
                }
            }
        }
        Ok(Plank { center, axes, half })
    }

    /// Box {sum x_i e_i : lo_i <= x_i <= hi_i} in frame coordinates.
    pub fn from_ranges(frame: &Frame, ranges: [(f64, f64); 3]) -> Plank {
        let axes = frame.axes();
        let mut center = Vec3::zeros();
        let mut half = [0.0; 3];
        for i in 0..3 {
            let (lo, hi) = ranges[i];
            center += axes[i] * (0.5 * (lo + hi));
            half[i] = 0.5 * (hi - lo);
        }
        Plank { center, axes, half }
    }

    /// Axis-aligned cube with the given centre and half side.
    pub fn cube(center: Vec3, half_side: f64) -> Plank {
        Plank {
            center,
            axes: [Vec3::x(), Vec3::y(), Vec3::z()],
            half: [half_side; 3],
        }
    }

    pub fn local(&self, x: &Vec3) -> [f64; 3] {
        let d = x - self.center;
        [d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2])]
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        let l = self.local(x);
        (0..3).all(|i| l[i].abs() <= self.half[i])
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half[0] * self.half[1] * self.half[2]
    }

    pub fn vertices(&self) -> [Vec3; 8] {
        let mut v = [Vec3::zeros(); 8];
        for (m, out) in v.iter_mut().enumerate() {
            let mut p = self.center;
            for i in 0..3 {
                let sgn = if (m >> i) & 1 == 1 { 1.0 } else { -1.0 };
                p += self.axes[i] * (sgn * self.half[i]);
            }
            *out = p;
        }
        v
    }

    /// Uniform point of the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let mut p = self.center;
        for i in 0..3 {
            p += self.axes[i] * (rng.gen_range(-1.0..=1.0) * self.half[i]);
        }
        p
    }

    fn radius_along(&self, l: &Vec3) -> f64 {
        (0..3).map(|i| self.half[i] * self.axes[i].dot(l).abs()).sum()
    }

    /// Exact separating-axis test for closed boxes.
    pub fn intersects(&self, other: &Plank) -> bool {
        let d = other.center - self.center;
        let mut axes: Vec<Vec3> = Vec::with_capacity(15);
        axes.extend_from_slice(&self.axes);
        axes.extend_from_slice(&other.axes);
        for a in &self.axes {
            for b in &other.axes {
                let c = a.cross(b);
                let n = c.norm();
                if n > 1e-9 {
                    axes.push(c / n);
                }
            }
        }
        axes.iter().all(|l| {
            let gap = d.dot(l).abs();
            gap <= self.radius_along(l) + other.radius_along(l) + 1e-12 * (1.0 + gap)
        })
    }

    /// True when all eight vertices of `other` lie in `self`.
    pub fn contains_plank(&self, other: &Plank) -> bool {
        other.vertices().iter().all(|v| {
            let l = self.local(v);
            (0..3).all(|i| l[i].abs() <= self.half[i] * (1.0 + 1e-12) + 1e-15)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.repr()).unwrap_or_default()
    }

    fn repr(&self) -> PlankRepr {
        PlankRepr {
            center: [self.center.x, self.center.y, self.center.z],
            axes: self.axes.map(|a| [a.x, a.y, a.z]),
            half_lengths: self.half,
        }
    }

    pub fn from_json(json: &str) -> Result<Plank> {
        let r: PlankRepr = serde_json::from_str(json)?;
        Plank::new(
            Vec3::from(r.center),
            r.axes.map(Vec3::from),
            r.half_lengths,
        )
    }

    pub fn list_to_json(planks: &[Plank]) -> String {
        serde_json::to_string(&planks.iter().map(Plank::repr).collect::<Vec<_>>()).unwrap_or_default()
    }

    pub fn list_from_json(json: &str) -> Result<Vec<Plank>> {
        let r: Vec<PlankRepr> = serde_json::from_str(json)?;
        r.into_iter()
            .map(|p| Plank::new(Vec3::from(p.center), p.axes.map(Vec3::from), p.half_lengths))
            .collect()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(param(format!("delta = {delta} outside (0, 1)")))
    }
}

/// delta x delta x 1 tube along g(t) whose projection is the square at `base`.
pub fn tube(curve: &Curve, t: f64, base: [f64; 2], delta: f64) -> Result<Plank> {
    check_delta(delta)?;
    let f = curve.frame(t)?;
    Ok(tube_in_frame(&f, base, delta, 1.0))
}

/// Tube of cross-section `width` and length `length` in a given frame.
pub fn tube_in_frame(f: &Frame, base: [f64; 2], width: f64, length: f64) -> Plank {
    Plank {
        center: f.e2 * base[0] + f.e3 * base[1],
        axes: f.axes(),
        half: [0.5 * length, 0.5 * width, 0.5 * width],
    }
}

/// {|x1| <= delta, |x2| <= 1, |x3| <= 1} in the frame at t.
pub fn dual_slab(curve: &Curve, t: f64, delta: f64) -> Result<Plank> {
    check_delta(delta)?;
    let f = curve.frame(t)?;
    Ok(Plank::from_ranges(&f, [(-delta, delta), (-1.0, 1.0), (-1.0, 1.0)]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartKind {
    High,
    Low,
    Lambda(f64),
    SqrtDelta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabPart {
    pub kind: PartKind,
    pub plank: Plank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabDecomposition {
    pub theta: f64,
    pub delta: f64,
    pub k: f64,
    pub lambdas: Vec<f64>,
    pub parts: Vec<SlabPart>,
}

/// Dyadic lambda in (sqrt delta, 1/K], largest first.
pub fn dyadic_lambdas(delta: f64, k: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let sq = delta.sqrt();
    let mut lam = (-(k.log2().ceil())).exp2();
    // largest dyadic <= 1/K
    while lam > 1.0 / k * (1.0 + 1e-12) {
        lam *= 0.5;
    }
    while lam > sq * (1.0 + 1e-12) {
        out.push(lam);
        lam *= 0.5;
    }
    out
}

/// High, low, lambda and sqrt(delta) parts of the dual slab at t.
///
/// The lowest lambda box starts at max(lambda/2, sqrt delta) in |x2| so that
/// the parts tile the slab when sqrt(delta) is not dyadic.
pub fn slab_parts(curve: &Curve, t: f64, delta: f64, k: f64) -> Result<SlabDecomposition> {
    check_delta(delta)?;
    if !(k >= 4.0) {
        return Err(param(format!("K = {k} must be >= 4")));
    }
    let kinv = 1.0 / k;
    let sq = delta.sqrt();
    if kinv < sq {
        return Err(param(format!(
            "1/K = {kinv} below sqrt(delta) = {sq}: no lambda range"
        )));
    }
    let f = curve.frame(t)?;
    let d = (-delta, delta);
    let mut parts = Vec::new();
    let mut push = |kind, r2: (f64, f64), r3: (f64, f64)| {
        parts.push(SlabPart {
            kind,
            plank: Plank::from_ranges(&f, [d, r2, r3]),
        });
    };
    push(PartKind::High, (kinv, 1.0), (-1.0, 1.0));
    push(PartKind::High, (-1.0, -kinv), (-1.0, 1.0));
    push(PartKind::Low, (-kinv, kinv), (-kinv, kinv));
    let lambdas = dyadic_lambdas(delta, k);
    for &lam in &lambdas {
        let lo = (0.5 * lam).max(sq);
        for r2 in [(lo, lam), (-lam, -lo)] {
            for r3 in [(kinv, 1.0), (-1.0, -kinv)] {
                push(PartKind::Lambda(lam), r2, r3);
            }
        }
    }
    for r3 in [(kinv, 1.0), (-1.0, -kinv)] {
        push(PartKind::SqrtDelta, (-sq, sq), r3);
    }
    Ok(SlabDecomposition {
        theta: t,
        delta,
        k,
        lambdas,
        parts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiddleConstants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for MiddleConstants {
    fn default() -> Self {
        MiddleConstants { c1: 64.0, c2: 8.0 }
    }
}

/// Separation factor C in |t - t'| >= C delta / lambda for disjoint Q planks.
pub const DISJOINTNESS_CONSTANT: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MiddlePlanks {
    pub q: Vec<(f64, Plank)>,
    pub r: Vec<(f64, Plank)>,
    pub s: Vec<(f64, Plank)>,
}

fn check_middle(delta: f64, lambda: f64, k: f64, c: &MiddleConstants) -> Result<()> {
    check_delta(delta)?;
    if !(delta.sqrt() < lambda && lambda <= 1.0 / k * (1.0 + 1e-12)) {
        return Err(param(format!(
            "need sqrt(delta) < lambda <= 1/K, got delta={delta}, lambda={lambda}, K={k}"
        )));
    }
    if !(c.c1 > c.c2 && c.c2 >= 1.0) {
        return Err(param("need C1 > C2 >= 1"));
    }
    Ok(())
}

/// {|x1| <= delta, lambda/2 <= x2 <= lambda, 1/K <= x3 <= 1} at t.
pub fn q_plank(curve: &Curve, t: f64, delta: f64, lambda: f64, k: f64) -> Result<Plank> {
    let f = curve.frame(t)?;
    Ok(Plank::from_ranges(
        &f,
        [(-delta, delta), (0.5 * lambda, lambda), (1.0 / k, 1.0)],
    ))
}

/// {|x1| <= C1 lambda^2, |x2| <= C1 lambda, 1/(C1 K) <= x3 <= C1} at t.
pub fn r_plank(curve: &Curve, t: f64, lambda: f64, k: f64, c1: f64) -> Result<Plank> {
    let f = curve.frame(t)?;
    Ok(Plank::from_ranges(
        &f,
        [
            (-c1 * lambda * lambda, c1 * lambda * lambda),
            (-c1 * lambda, c1 * lambda),
            (1.0 / (c1 * k), c1),
        ],
    ))
}

/// {|x1| <= delta, |x2| <= C2 lambda, 1/(C2 K) <= x3 <= C2} at t.
pub fn s_plank(curve: &Curve, t: f64, delta: f64, lambda: f64, k: f64, c2: f64) -> Result<Plank> {
    let f = curve.frame(t)?;
    Ok(Plank::from_ranges(
        &f,
        [(-delta, delta), (-c2 * lambda, c2 * lambda), (1.0 / (c2 * k), c2)],
    ))
}

/// Points of step*Z inside the curve's domain.
pub fn lattice(curve: &Curve, step: f64) -> Vec<f64> {
    let (lo, hi) = curve.domain();
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

/// Q planks on delta Z, R planks on lambda Z and S planks on (delta/lambda) Z.
pub fn middle_planks(
    curve: &Curve,
    delta: f64,
    lambda: f64,
    k: f64,
    consts: MiddleConstants,
) -> Result<MiddlePlanks> {
    check_middle(delta, lambda, k, &consts)?;
    let q = lattice(curve, delta)
        .into_iter()
        .map(|t| q_plank(curve, t.clamp(curve.domain().0, curve.domain().1), delta, lambda, k).map(|p| (t, p)))
        .collect::<Result<_>>()?;
    let r = lattice(curve, lambda)
        .into_iter()
        .map(|t| r_plank(curve, t, lambda, k, consts.c1).map(|p| (t, p)))
        .collect::<Result<_>>()?;
    let s = lattice(curve, delta / lambda)
        .into_iter()
        .map(|t| s_plank(curve, t, delta, lambda, k, consts.c2).map(|p| (t, p)))
        .collect::<Result<_>>()?;
    Ok(MiddlePlanks { q, r, s })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePlank {
    pub theta: f64,
    /// +1 or -1: the sign of the e3 coordinate.
    pub sign: i8,
    pub plank: Plank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeDecomposition {
    pub j: u32,
    pub k: u32,
    pub c_gamma: f64,
    pub planks: Vec<ConePlank>,
}

/// Default geometry constant for cone planks on the model curve.
pub const DEFAULT_C_GAMMA: f64 = 4.0;

/// Plank at t in the basis (e3, e2, e1) = (g x g', g', g):
/// |l1| in [2^{j-1}, 2^{j+1}], |l2| <= 2^{j-k/2} / C, |l3| in [2^{j-k-1}, 2^{j-k+1}],
/// sign l1 = sign = -sign l3. For k = j the e1 range is |l3| <= 2.
pub fn cone_plank(curve: &Curve, t: f64, j: u32, k: u32, sign: i8, c_gamma: f64) -> Result<Plank> {
    let f = curve.frame(t)?;
    let jf = j as f64;
    let kf = k as f64;
    let sg = if sign >= 0 { 1.0 } else { -1.0 };
    let (a, b) = ((jf - 1.0).exp2(), (jf + 1.0).exp2());
    let r1 = if sg > 0.0 { (a, b) } else { (-b, -a) };
    let w2 = (jf - kf / 2.0).exp2() / c_gamma;
    let r3 = if k == j {
        (-2.0, 2.0)
    } else {
        let (c, d) = ((jf - kf - 1.0).exp2(), (jf - kf + 1.0).exp2());
        if sg > 0.0 {
            (-d, -c)
        } else {
            (c, d)
        }
    };
    // frame order (e1, e2, e3) carries (l3, l2, l1)
    Ok(Plank::from_ranges(&f, [r3, (-w2, w2), r1]))
}

pub fn cone_planks(curve: &Curve, j: u32, k: u32, c_gamma: f64) -> Result<ConeDecomposition> {
    if k > j {
        return Err(param(format!("k = {k} exceeds j = {j}")));
    }
    if !curve.is_arclength() {
        return Err(Error::Precondition("cone planks need an arclength curve".into()));
    }
    if !(c_gamma > 0.0 && c_gamma.is_finite()) {
        return Err(param("C_gamma must be positive"));
    }
    let step = (-(k as f64) / 2.0).exp2();
    let (lo, hi) = curve.domain();
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut planks = Vec::with_capacity(2 * (n + 1));
    for i in 0..=n {
        let t = lo + i as f64 * step;
        for sign in [1i8, -1] {
            planks.push(ConePlank {
                theta: t,
                sign,
                plank: cone_plank(curve, t, j, k, sign, c_gamma)?,
            });
        }
    }
    Ok(ConeDecomposition {
        j,
        k,
        c_gamma,
        planks,
    })
}

impl ConeDecomposition {
    /// (min, max) distance from plank vertices to the cone.
    pub fn corner_distance_range(&self, curve: &Curve) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for p in &self.planks {
            for v in p.plank.vertices() {
                let d = distance_to_cone(curve, &v);
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo, hi)
    }

    pub fn distance_invariant_holds(&self, curve: &Curve) -> bool {
        let scale = (self.j as f64 - self.k as f64).exp2();
        let (lo, hi) = self.corner_distance_range(curve);
        lo >= scale / 4.0 && hi <= scale * 4.0
    }
}

/// Smallest C_gamma in [1, 1024] for which all plank corners lie at distance
/// within [2^{j-k-2}, 2^{j-k+2}] from the cone: doubling, then bisection.
pub fn calibrate_c_gamma(curve: &Curve, j: u32, k: u32) -> Result<f64> {
    if k >= j {
        return Err(param("calibration needs k < j"));
    }
    let ok = |c: f64| -> Result<bool> { Ok(cone_planks(curve, j, k, c)?.distance_invariant_holds(curve)) };
    let mut hi = 1.0;
    while !ok(hi)? {
        hi *= 2.0;
        if hi > 1024.0 {
            return Err(Error::Precondition("no C_gamma up to 1024 satisfies the distance invariant".into()));
        }
    }
    if hi == 1.0 {
        return Ok(1.0);
    }
    let mut lo = hi / 2.0;
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaReport {
    /// Samples with at least one parameter t in the domain solving <xi, g(t)> = 0.
    pub checked: usize,
    pub skipped: usize,
    /// Extremes of |eta2| / 2^j and |eta1| / 2^{j-k/2} over all roots.
    pub eta2_range: (f64, f64),
    pub eta1_range: (f64, f64),
    pub all_in_range: bool,
}

/// Roots of t -> <x, g(t)> on the domain (scan plus bisection).
pub fn normal_roots(curve: &Curve, x: &Vec3) -> Vec<f64> {
    let (lo, hi) = curve.domain();
    let n = 2048;
    let f = |t: f64| x.dot(&curve.p0(t));
    let mut roots = Vec::new();
    let mut t0 = lo;
    let mut f0 = f(t0);
    if f0 == 0.0 {
        roots.push(t0);
    }
    for i in 1..=n {
        let t1 = lo + (hi - lo) * i as f64 / n as f64;
        let f1 = f(t1);
        if f1 == 0.0 {
            roots.push(t1);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (t0, t1, f0);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm * fa <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        t0 = t1;
        f0 = f1;
    }
    roots
}

/// Samples points of random cone planks and writes each as
/// eta1 g'(t) + eta2 (g x g')(t) with <xi, g(t)> = 0; checks
/// |eta2| in [2^{j-2}, 2^{j+2}] and |eta1| in [2^{j-k/2-3}, 2^{j-k/2+3}].
pub fn eta_magnitudes(dec: &ConeDecomposition, curve: &Curve, samples: usize, seed: u64) -> EtaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s2 = (dec.j as f64).exp2();
    let s1 = (dec.j as f64 - dec.k as f64 / 2.0).exp2();
    let mut rep = EtaReport {
        checked: 0,
        skipped: 0,
        eta2_range: (f64::INFINITY, 0.0),
        eta1_range: (f64::INFINITY, 0.0),
        all_in_range: true,
    };
    for _ in 0..samples {
        let p = &dec.planks[rng.gen_range(0..dec.planks.len())].plank;
        let xi = p.sample(&mut rng);
        let roots = normal_roots(curve, &xi);
        if roots.is_empty() {
            rep.skipped += 1;
            continue;
        }
        rep.checked += 1;
        for t in roots {
            let Some(f) = curve.frame_raw(t) else { continue };
            let speed = curve.p1(t).norm();
            let e1 = (xi.dot(&f.e2) / speed).abs() / s1;
            let e2 = (xi.dot(&f.e3) / speed).abs() / s2;
            rep.eta1_range = (rep.eta1_range.0.min(e1), rep.eta1_range.1.max(e1));
            rep.eta2_range = (rep.eta2_range.0.min(e2), rep.eta2_range.1.max(e2));
            if !(0.25..=4.0).contains(&e2) || !(0.125..=8.0).contains(&e1) {
                rep.all_in_range = false;
            }
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapProfile {
    pub max_overlap: usize,
    /// histogram[m] = number of samples covered by exactly m planks.
    pub histogram: Vec<u64>,
}

/// Monte-Carlo multiplicity of a plank family. Samples are drawn from the
/// planks themselves (plank chosen with probability proportional to volume,
/// then a uniform point), so thin families are sampled efficiently.
pub fn overlap_profile(planks: &[Plank], samples: usize, seed: u64) -> OverlapProfile {
    let mut hist = vec![0u64; planks.len() + 1];
    if planks.is_empty() {
        return OverlapProfile {
            max_overlap: 0,
            histogram: hist,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cum = Vec::with_capacity(planks.len());
    let mut total = 0.0;
    for p in planks {
        total += p.volume();
        cum.push(total);
    }
    let mut max = 0;
    for _ in 0..samples {
        let u = rng.gen::<f64>() * total;
        let i = cum.partition_point(|&c| c < u).min(planks.len() - 1);
        let x = planks[i].sample(&mut rng);
        let m = planks.iter().filter(|p| p.contains(&x)).count().max(1);
        hist[m] += 1;
        max = max.max(m);
    }
    OverlapProfile {
        max_overlap: max,
        histogram: hist,
    }
}
