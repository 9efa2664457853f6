//! Tube–cell incidences: multiplicity maps, heavy cells, the s-dimensional
//! tube condition, covering and projected-mass experiments, and the planar
//! projection warm-up.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, Frame, Vec3};
use crate::error::{param, Error, Result};
use crate::fractal::DyadicMeasure;
use crate::geometry::{lattice, tube_in_frame, Plank};

pub type Cell3 = [i64; 3];

/// Tubes sharing the direction g(theta).
#[derive(Debug, Clone)]
pub struct TubeFamily {
    pub theta: f64,
    pub delta: f64,
    pub s: f64,
    pub bases: Vec<[f64; 2]>,
    pub tubes: Vec<Plank>,
    pub condition_constant: f64,
}

/// Constant allowed in the s-dimensional tube condition.
pub const FAMILY_CONSTANT: f64 = 8.0;

impl TubeFamily {
    pub fn new(curve: &Curve, theta: f64, bases: Vec<[f64; 2]>, delta: f64, s: f64) -> Result<TubeFamily> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(param(format!("delta = {delta} outside (0, 1)")));
        }
        let frame = curve.frame(theta)?;
        let tubes = bases.iter().map(|b| tube_in_frame(&frame, *b, delta, 1.0)).collect();
        let condition_constant = condition_constant(&bases, delta, s);
        Ok(TubeFamily {
            theta,
            delta,
            s,
            bases,
            tubes,
            condition_constant,
        })
    }

    pub fn len(&self) -> usize {
        self.tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }

    /// Constant at most 8 and at most 8 delta^-s tubes.
    pub fn passes(&self) -> bool {
        self.condition_constant <= FAMILY_CONSTANT
            && self.len() as f64 <= FAMILY_CONSTANT * self.delta.powf(-self.s)
    }
}

fn dist_to_square(p: [f64; 2], c: [f64; 2], half: f64) -> f64 {
    let dx = ((p[0] - c[0]).abs() - half).max(0.0);
    let dy = ((p[1] - c[1]).abs() - half).max(0.0);
    dx.hypot(dy)
}

/// max over dyadic r in [delta, 1] and discs of radius r centred on the
/// centres of the side-r dyadic squares of #{tubes meeting the disc} / (r/delta)^s.
/// Tubes share a direction, so meeting a ball is decided in the base plane.
pub fn condition_constant(bases: &[[f64; 2]], delta: f64, s: f64) -> f64 {
    let mut best = 0.0f64;
    let mut l = 0u32;
    loop {
        let r = (-(l as f64)).exp2();
        if r < delta * (1.0 - 1e-12) {
            break;
        }
        let mut counts: HashMap<(i64, i64), u32> = HashMap::new();
        let reach = r + delta;
        for b in bases {
            let i0 = ((b[0] - reach) / r - 0.5).floor() as i64;
            let i1 = ((b[0] + reach) / r - 0.5).ceil() as i64;
            let j0 = ((b[1] - reach) / r - 0.5).floor() as i64;
            let j1 = ((b[1] + reach) / r - 0.5).ceil() as i64;
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let c = [(i as f64 + 0.5) * r, (j as f64 + 0.5) * r];
                    if dist_to_square(c, *b, 0.5 * delta) <= r {
                        *counts.entry((i, j)).or_insert(0) += 1;
                    }
                }
            }
        }
        let norm = (r / delta).powf(s);
        if let Some(m) = counts.values().max() {
            best = best.max(*m as f64 / norm);
        }
        l += 1;
    }
    best
}

/// Counts per side-delta cell of [-1,1]^3 (cells indexed by floor(x/delta)).
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplicity {
    pub delta: f64,
    pub counts: BTreeMap<Cell3, u32>,
}

fn cell_range(delta: f64) -> (i64, i64) {
    ((-1.0 / delta).floor() as i64, (1.0 / delta).ceil() as i64 - 1)
}

fn cell_cube(c: &Cell3, delta: f64) -> Plank {
    Plank::cube(
        Vec3::new(
            (c[0] as f64 + 0.5) * delta,
            (c[1] as f64 + 0.5) * delta,
            (c[2] as f64 + 0.5) * delta,
        ),
        0.5 * delta,
    )
}

/// Cells of [-1,1]^3 meeting one plank. The plank is cut into slabs of cell
/// layers along the world axis closest to its long axis; in each slab the
/// candidate rectangle comes from the axis segment crossing it, widened by
/// the cross-section, and candidates are kept when the exact box test passes.
pub fn rasterize(p: &Plank, delta: f64) -> Vec<Cell3> {
    let (lo, hi) = cell_range(delta);
    let long = (0..3).max_by(|&a, &b| p.half[a].total_cmp(&p.half[b])).unwrap_or(0);
    let a = p.axes[long];
    let d = (0..3).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
    let (o1, o2) = ((d + 1) % 3, (d + 2) % 3);
    // cross-section radius along each world axis
    let w: [f64; 3] = std::array::from_fn(|k| {
        (0..3).filter(|&i| i != long).map(|i| p.half[i] * p.axes[i][k].abs()).sum()
    });
    let hl = p.half[long];
    let (zmin, zmax) = (p.center[d] - hl * a[d].abs() - w[d], p.center[d] + hl * a[d].abs() + w[d]);
    let k0 = ((zmin / delta).floor() as i64).max(lo);
    let k1 = ((zmax / delta).floor() as i64).min(hi);
    let mut out = Vec::new();
    for kd in k0..=k1 {
        let (z0, z1) = (kd as f64 * delta - w[d], (kd + 1) as f64 * delta + w[d]);
        // axis parameters whose d-coordinate lies in [z0, z1]
        let (t0, t1) = {
            let ta = (z0 - p.center[d]) / a[d];
            let tb = (z1 - p.center[d]) / a[d];
            (ta.min(tb).max(-hl), ta.max(tb).min(hl))
        };
        if t0 > t1 {
            continue;
        }
        let range = |k: usize| {
            let (u, v) = (p.center[k] + a[k] * t0, p.center[k] + a[k] * t1);
            let (m0, m1) = (u.min(v) - w[k], u.max(v) + w[k]);
            (((m0 / delta).floor() as i64).max(lo), ((m1 / delta).floor() as i64).min(hi))
        };
        let (r1, r2) = (range(o1), range(o2));
        for i1 in r1.0..=r1.1 {
            for i2 in r2.0..=r2.1 {
                let mut c = [0i64; 3];
                c[d] = kd;
                c[o1] = i1;
                c[o2] = i2;
                if p.intersects(&cell_cube(&c, delta)) {
                    out.push(c);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Number of planks meeting each cell; parallel over planks, merged in order.
pub fn multiplicity_map(tubes: &[Plank], delta: f64) -> Multiplicity {
    let per: Vec<Vec<Cell3>> = tubes.par_iter().map(|t| rasterize(t, delta)).collect();
    let mut counts = BTreeMap::new();
    for cells in per {
        for c in cells {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    Multiplicity { delta, counts }
}

pub fn family_multiplicity(families: &[TubeFamily], delta: f64) -> Multiplicity {
    let tubes: Vec<Plank> = families.iter().flat_map(|f| f.tubes.iter().copied()).collect();
    multiplicity_map(&tubes, delta)
}

/// All cells x all planks scan.
pub fn brute_force_multiplicity(tubes: &[Plank], delta: f64) -> Multiplicity {
    let (lo, hi) = cell_range(delta);
    let mut counts = BTreeMap::new();
    for i in lo..=hi {
        for j in lo..=hi {
            for k in lo..=hi {
                let c = [i, j, k];
                let cube = cell_cube(&c, delta);
                let n = tubes.iter().filter(|t| t.intersects(&cube)).count() as u32;
                if n > 0 {
                    counts.insert(c, n);
                }
            }
        }
    }
    Multiplicity { delta, counts }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeavySet {
    pub threshold: f64,
    pub cells: Vec<Cell3>,
}

impl HeavySet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Heavy cells that also belong to `cells`.
    pub fn restricted_to(&self, cells: &[Cell3]) -> HeavySet {
        let keep: HashSet<&Cell3> = cells.iter().collect();
        HeavySet {
            threshold: self.threshold,
            cells: self.cells.iter().filter(|c| keep.contains(c)).copied().collect(),
        }
    }

    pub fn recheck(&self, mult: &Multiplicity) -> bool {
        self.cells
            .iter()
            .all(|c| mult.counts.get(c).is_some_and(|&n| n as f64 >= self.threshold))
    }
}

pub fn heavy_cells(mult: &Multiplicity, threshold: f64) -> HeavySet {
    HeavySet {
        threshold,
        cells: mult
            .counts
            .iter()
            .filter(|(_, &n)| n as f64 >= threshold)
            .map(|(c, _)| *c)
            .collect(),
    }
}

/// #Theta / (ln 1/delta)^power; the default power is 2.
pub fn heavy_threshold(n_theta: usize, delta: f64, power: f64) -> f64 {
    n_theta as f64 / (1.0 / delta).ln().powf(power)
}

/// #Theta #H delta^{1+s}.
pub fn incidence_ratio(n_theta: usize, n_heavy: usize, delta: f64, s: f64) -> f64 {
    n_theta as f64 * n_heavy as f64 * delta.powf(1.0 + s)
}

/// One tube through the origin for every direction of the delta-net.
pub fn bush_configuration(curve: &Curve, delta: f64, s: f64) -> Result<Vec<TubeFamily>> {
    lattice(curve, delta)
        .into_iter()
        .map(|t| TubeFamily::new(curve, t, vec![[0.0, 0.0]], delta, s))
        .collect()
}

/// For each direction, the tubes over the delta-squares of the (e2, e3)
/// plane that contain a projected point.
pub fn covering_families(
    curve: &Curve,
    points: &[[f64; 3]],
    thetas: &[f64],
    delta: f64,
    s: f64,
) -> Result<Vec<TubeFamily>> {
    thetas
        .iter()
        .map(|&t| {
            let frame = curve.frame(t)?;
            let bases: Vec<[f64; 2]> = shadow(&frame, points.iter().map(|p| Vec3::from(*p)), delta, delta)
                .into_iter()
                .map(|(i, j)| [(i as f64 + 0.5) * delta, (j as f64 + 0.5) * delta])
                .collect();
            TubeFamily::new(curve, t, bases, delta, s)
        })
        .collect()
}

/// Occupied cells of the projected points on a w2 x w3 grid in (e2, e3).
fn shadow(frame: &Frame, points: impl Iterator<Item = Vec3>, w2: f64, w3: f64) -> Vec<(i64, i64)> {
    let mut set: Vec<(i64, i64)> = points
        .map(|x| {
            let p = frame.project(&x);
            ((p[0] / w2).floor() as i64, (p[1] / w3).floor() as i64)
        })
        .collect();
    set.sort_unstable();
    set.dedup();
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub directions: usize,
    pub w_size: usize,
    pub bound: f64,
    pub ratio: f64,
}

/// Cover supp(mu) so that every support cell meets ceil(delta^{eps-1}) tubes:
/// that many evenly spread directions of the delta-net, each contributing the
/// tubes over the cells of its shadow.
pub fn tube_covering_experiment(mu: &DyadicMeasure<3>, curve: &Curve, eps: f64) -> Result<CoveringReport> {
    if mu.weights.is_empty() {
        return Err(Error::Empty("tube covering needs a nonempty measure"));
    }
    let delta = mu.delta();
    let need = delta.powf(eps - 1.0);
    let m = (need - 1e-9).ceil().max(1.0) as usize;
    let net = lattice(curve, delta);
    if m > net.len() {
        return Err(param(format!(
            "multiplicity {m} exceeds the {} available directions",
            net.len()
        )));
    }
    let centres: Vec<Vec3> = mu.weights.keys().map(|c| Vec3::from(mu.center(c))).collect();
    let chosen: Vec<f64> = (0..m).map(|i| net[i * net.len() / m]).collect();
    let sizes: Vec<usize> = chosen
        .par_iter()
        .map(|&t| curve.frame(t).map(|f| shadow(&f, centres.iter().copied(), delta, delta).len()))
        .collect::<Result<_>>()?;
    let w_size: usize = sizes.iter().sum();
    let alpha = mu.alpha;
    let bound = mu.total_mass() / mu.c_alpha(alpha) * delta.powf(-(1.0 + alpha.min(2.0)));
    Ok(CoveringReport {
        directions: m,
        w_size,
        bound,
        ratio: w_size as f64 / bound,
    })
}

/// Disjoint cells of the projection plane used by the projected-mass sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CellShape {
    /// delta-squares, at most mu(R^3) delta^{-alpha1} per direction, directions on a delta-net.
    Ball { alpha1: f64 },
    /// sqrt(delta) x delta rectangles (long side along e2), at most
    /// mu(R^3) delta^{-(alpha_star+1)/2} per direction, directions on a sqrt(delta)-net.
    Rect { alpha_star: f64 },
}

impl CellShape {
    fn widths(&self, delta: f64) -> (f64, f64) {
        match self {
            CellShape::Ball { .. } => (delta, delta),
            CellShape::Rect { .. } => (delta.sqrt(), delta),
        }
    }

    pub fn cap(&self, mass: f64, delta: f64) -> usize {
        let e = match self {
            CellShape::Ball { alpha1 } => *alpha1,
            CellShape::Rect { alpha_star } => 0.5 * (alpha_star + 1.0),
        };
        (mass * delta.powf(-e) + 1e-9).floor() as usize
    }

    pub fn net_step(&self, delta: f64) -> f64 {
        match self {
            CellShape::Ball { .. } => delta,
            CellShape::Rect { .. } => delta.sqrt(),
        }
    }
}

fn projected_masses(
    mu: &DyadicMeasure<3>,
    frame: &Frame,
    w2: f64,
    w3: f64,
) -> HashMap<(i64, i64), f64> {
    let mut out = HashMap::new();
    for (c, w) in &mu.weights {
        let p = frame.project(&Vec3::from(mu.center(c)));
        *out.entry(((p[0] / w2).floor() as i64, (p[1] / w3).floor() as i64)).or_insert(0.0) += w;
    }
    out
}

/// step * sum over directions of (pi_theta# mu)(union of the cells), where
/// step = delta for balls and sqrt(delta) for rectangles.
pub fn projection_mass_sum(
    mu: &DyadicMeasure<3>,
    curve: &Curve,
    families: &[(f64, Vec<(i64, i64)>)],
    shape: CellShape,
) -> Result<f64> {
    let delta = mu.delta();
    let cap = shape.cap(mu.total_mass(), delta);
    let (w2, w3) = shape.widths(delta);
    let mut total = 0.0;
    for (t, cells) in families {
        if cells.len() > cap {
            return Err(Error::Precondition(format!(
                "{} cells at theta = {t} exceed the cap {cap}",
                cells.len()
            )));
        }
        let mut uniq = cells.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != cells.len() {
            return Err(Error::Precondition(format!("repeated cell at theta = {t}")));
        }
        let frame = curve.frame(*t)?;
        let masses = projected_masses(mu, &frame, w2, w3);
        total += uniq.iter().filter_map(|c| masses.get(c)).sum::<f64>();
    }
    Ok(shape.net_step(delta) * total)
}

/// A direction with its chosen projection-plane cells.
pub type Family = (f64, Vec<(i64, i64)>);

/// Heaviest cells (ties broken by index) up to the cap, for every direction
/// of the net matching the shape.
pub fn greedy_families(mu: &DyadicMeasure<3>, curve: &Curve, shape: CellShape) -> Result<Vec<Family>> {
    let delta = mu.delta();
    let cap = shape.cap(mu.total_mass(), delta);
    let (w2, w3) = shape.widths(delta);
    lattice(curve, shape.net_step(delta))
        .par_iter()
        .map(|&t| {
            let frame = curve.frame(t)?;
            let mut cells: Vec<((i64, i64), f64)> = projected_masses(mu, &frame, w2, w3).into_iter().collect();
            cells.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            cells.truncate(cap);
            Ok((t, cells.into_iter().map(|(c, _)| c).collect()))
        })
        .collect()
}

/// Uniform cells of the square [-1/2, 1/2]^2 x {z}, Frostman-normalised for alpha = 2.
pub fn plane_piece_measure(level: u32, z: f64) -> Result<DyadicMeasure<3>> {
    let n = 1i64 << level;
    let zi = (z * n as f64).floor() as i64;
    let cells: Vec<Cell3> = (-n / 2..n / 2)
        .flat_map(|i| (-n / 2..n / 2).map(move |j| [i, j, zi]))
        .collect();
    crate::fractal::frostman_measure(&cells, level, 2.0)
}

/// Cells along the x-axis segment [-1/2, 1/2], normalised for alpha = 1.
pub fn segment_measure(level: u32) -> Result<DyadicMeasure<3>> {
    let n = 1i64 << level;
    let cells: Vec<Cell3> = (-n / 2..n / 2).map(|i| [i, 0, 0]).collect();
    crate::fractal::frostman_measure(&cells, level, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarstrandReport {
    pub a_meas: f64,
    pub s_min: f64,
    pub gap: f64,
    /// Fraction of directions satisfying the condition at each grid value.
    pub pass_fraction: Vec<(f64, f64)>,
}

/// Constant in the planar projection condition |p(A) cap I_r|_delta <= C (r/delta)^s.
pub const MARSTRAND_CONSTANT: f64 = 1.0;

/// Largest (over dyadic r) value of log(max count in a dyadic r-interval) / log(r/delta),
/// i.e. the least s for which the condition holds with constant 1 for this direction.
fn projection_exponent(bins: &[i64], level: u32) -> f64 {
    let mut worst = 0.0f64;
    for up in 1..=level + 1 {
        let mut counts: HashMap<i64, u32> = HashMap::new();
        for b in bins {
            *counts.entry(b >> up).or_insert(0) += 1;
        }
        let m = counts.values().copied().max().unwrap_or(0) as f64;
        if m > 1.0 {
            worst = worst.max(m.ln() / (up as f64 * std::f64::consts::LN_2));
        }
    }
    worst
}

/// Planar projections p_theta(x) = <x, (cos theta, sin theta)> of delta-cells
/// of A, theta in delta Z cap [0, pi]. A direction satisfies the condition
/// at s when every dyadic interval of length r (delta <= r <= 2) contains at
/// most (r/delta)^s occupied delta-bins.
pub fn marstrand_2d_experiment(cells: &[[i64; 2]], level: u32, s_grid: &[f64]) -> Result<MarstrandReport> {
    if cells.is_empty() {
        return Err(Error::Empty("marstrand experiment needs a nonempty set"));
    }
    if s_grid.is_empty() {
        return Err(param("empty s grid"));
    }
    let delta = (-(level as f64)).exp2();
    let mut uniq = cells.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let a_meas = (uniq.len() as f64).ln() / (1.0 / delta).ln();
    let n_dir = (std::f64::consts::PI / delta).floor() as usize + 1;
    let exps: Vec<f64> = (0..n_dir)
        .into_par_iter()
        .map(|i| {
            let th = i as f64 * delta;
            let (c, s) = (th.cos(), th.sin());
            let mut bins: Vec<i64> = uniq
                .iter()
                .map(|p| {
                    let x = (p[0] as f64 + 0.5) * delta;
                    let y = (p[1] as f64 + 0.5) * delta;
                    ((x * c + y * s) / delta).floor() as i64
                })
                .collect();
            bins.sort_unstable();
            bins.dedup();
            projection_exponent(&bins, level)
        })
        .collect();
    let mut grid = s_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let pass_fraction: Vec<(f64, f64)> = grid
        .iter()
        .map(|&s| {
            let ok = exps.iter().filter(|&&e| e <= s + 1e-12).count();
            (s, ok as f64 / n_dir as f64)
        })
        .collect();
    let s_min = pass_fraction
        .iter()
        .find(|(_, f)| *f >= 0.5)
        .map(|(s, _)| *s)
        .unwrap_or(grid[grid.len() - 1]);
    Ok(MarstrandReport {
        a_meas,
        s_min,
        gap: s_min - a_meas,
        pass_fraction,
    })
}

/// Cells of the disc of radius 1 (centres inside).
pub fn disk_cells(level: u32) -> Vec<[i64; 2]> {
    let n = 1i64 << level;
    let d = 1.0 / n as f64;
    let mut out = Vec::new();
    for i in -n..n {
        for j in -n..n {
            let x = (i as f64 + 0.5) * d;
            let y = (j as f64 + 0.5) * d;
            if x * x + y * y <= 1.0 {
                out.push([i, j]);
            }
        }
    }
    out
}
