//! Random Cantor-type test sets and uniform Frostman measures on their cells.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, Vec3};
use crate::dyadic::{dyadic_level, DyadicCube, MAX_LEVEL};
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CantorVariant {
    /// Each node keeps a random subset of its 2^D children.
    RandomSubset,
    /// Product of 1-D random Cantor sets, filling x first, then y, then z.
    AxisAligned,
}

/// Points in [0,1]^3, one per surviving cell at resolution delta.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub alpha: f64,
    pub delta: f64,
    pub seed: u64,
    pub generator: String,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>, alpha: f64, delta: f64, generator: &str) -> Self {
        PointCloud {
            points,
            alpha,
            delta,
            seed: 0,
            generator: generator.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Occupied cells at the cloud's resolution.
    pub fn cells(&self) -> Result<Vec<[i64; 3]>> {
        let level = dyadic_level(self.delta)?;
        let mut c: Vec<[i64; 3]> = self
            .points
            .iter()
            .map(|p| crate::dyadic::cell_of(p, level))
            .collect();
        c.sort_unstable();
        c.dedup();
        Ok(c)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 48 + 8);
        out.push_str("x,y,z\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p[0], p[1], p[2]));
        }
        out
    }

    /// Parses "x,y,z" CSV (header optional).
    pub fn from_csv(text: &str, delta: f64) -> Result<PointCloud> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.replace(' ', "") == "x,y,z") {
                continue;
            }
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 fields, got {}",
                    i + 1,
                    vals.len()
                )));
            }
            let mut p = [0.0; 3];
            for (k, v) in vals.iter().enumerate() {
                p[k] = v.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: field {}: {e}", i + 1, k + 1))
                })?;
                if !p[k].is_finite() {
                    return Err(Error::Parse(format!("line {}: non-finite value", i + 1)));
                }
            }
            points.push(p);
        }
        Ok(PointCloud::new(points, f64::NAN, delta, "csv"))
    }
}

/// Level-`level` cells of a random Cantor set in [0,1)^D with expected
/// branching 2^alpha per level.
pub fn cantor_cells<const D: usize>(
    alpha: f64,
    level: u32,
    variant: CantorVariant,
    rng: &mut ChaCha8Rng,
) -> Vec<[i64; D]> {
    if variant == CantorVariant::AxisAligned {
        return product_cells(alpha, level, rng);
    }
    let n_children = 1usize << D;
    let target = alpha.exp2();
    let base = target.floor();
    let frac = target - base;
    let mut nodes: Vec<[i64; D]> = vec![[0; D]];
    let mut all: Vec<usize> = (0..n_children).collect();
    for _ in 0..level {
        let mut next = Vec::with_capacity((nodes.len() as f64 * target).ceil() as usize + 8);
        for node in &nodes {
            let b = (base as usize + usize::from(rng.gen::<f64>() < frac)).clamp(1, n_children);
            let (chosen, _) = all.partial_shuffle(rng, b);
            let mut chosen = chosen.to_vec();
            chosen.sort_unstable();
            for mask in chosen {
                next.push(child(node, mask));
            }
        }
        nodes = next;
    }
    nodes.sort_unstable();
    nodes
}

/// Product of independent 1-D Cantor sets; axis i carries exponent
/// clamp(alpha - i, 0, 1).
fn product_cells<const D: usize>(alpha: f64, level: u32, rng: &mut ChaCha8Rng) -> Vec<[i64; D]> {
    let factors: Vec<Vec<[i64; 1]>> = (0..D)
        .map(|i| {
            let f = (alpha - i as f64).clamp(0.0, 1.0);
            cantor_cells::<1>(f, level, CantorVariant::RandomSubset, rng)
        })
        .collect();
    let mut out: Vec<[i64; D]> = vec![[0; D]];
    for (i, f) in factors.iter().enumerate() {
        out = out
            .iter()
            .flat_map(|p| {
                f.iter().map(move |c| {
                    let mut q = *p;
                    q[i] = c[0];
                    q
                })
            })
            .collect();
    }
    out.sort_unstable();
    out
}

fn child<const D: usize>(node: &[i64; D], mask: usize) -> [i64; D] {
    let mut c = *node;
    for (i, v) in c.iter_mut().enumerate() {
        *v = 2 * *v + ((mask >> i) & 1) as i64;
    }
    c
}

/// Random Cantor cloud of nominal dimension `alpha` at resolution `delta`.
pub fn cantor_cloud(alpha: f64, delta: f64, seed: u64, variant: CantorVariant) -> Result<PointCloud> {
    if !(alpha > 0.0 && alpha <= 3.0) {
        return Err(param(format!("alpha = {alpha} outside (0, 3]")));
    }
    let level = dyadic_level(delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = cantor_cells::<3>(alpha, level, variant, &mut rng);
    let points = cells
        .iter()
        .map(|c| DyadicCube::new(level, *c).center())
        .collect();
    Ok(PointCloud {
        points,
        alpha,
        delta,
        seed,
        generator: format!("cantor/{variant:?}"),
    })
}

/// Nonnegative weights on level-`level` cubes.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicMeasure<const D: usize> {
    pub level: u32,
    pub alpha: f64,
    pub weights: BTreeMap<[i64; D], f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr {
    delta: f64,
    alpha: f64,
    cells: Vec<WeightRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightRepr {
    coords: Vec<i64>,
    weight: f64,
}

impl<const D: usize> DyadicMeasure<D> {
    pub fn new(level: u32, alpha: f64, weights: BTreeMap<[i64; D], f64>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(param(format!("level {level} exceeds {MAX_LEVEL}")));
        }
        if weights.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(param("weights must be finite and nonnegative"));
        }
        Ok(DyadicMeasure {
            level,
            alpha,
            weights,
        })
    }

    pub fn delta(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.values().sum()
    }

    /// max over dyadic cubes Q at levels 0..=level of mu(Q) / side(Q)^alpha.
    pub fn c_alpha(&self, alpha: f64) -> f64 {
        let mut best = 0.0f64;
        let mut level_mass: HashMap<[i64; D], f64> =
            self.weights.iter().map(|(c, w)| (*c, *w)).collect();
        for l in (0..=self.level).rev() {
            let r = (-(l as f64)).exp2();
            let scale = r.powf(alpha);
            for m in level_mass.values() {
                best = best.max(m / scale);
            }
            if l > 0 {
                let mut up: HashMap<[i64; D], f64> = HashMap::with_capacity(level_mass.len() / 2 + 1);
                for (c, m) in &level_mass {
                    let mut p = *c;
                    for v in p.iter_mut() {
                        *v >>= 1;
                    }
                    *up.entry(p).or_insert(0.0) += m;
                }
                level_mass = up;
            }
        }
        best
    }

    pub fn scaled(&self, c: f64) -> Self {
        DyadicMeasure {
            level: self.level,
            alpha: self.alpha,
            weights: self.weights.iter().map(|(k, w)| (*k, w * c)).collect(),
        }
    }

    pub fn center(&self, c: &[i64; D]) -> [f64; D] {
        DyadicCube::new(self.level, *c).center()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MeasureRepr {
            delta: self.delta(),
            alpha: self.alpha,
            cells: self
                .weights
                .iter()
                .map(|(c, w)| WeightRepr {
                    coords: c.to_vec(),
                    weight: *w,
                })
                .collect(),
        })
        .unwrap_or_default()
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let r: MeasureRepr = serde_json::from_str(json)?;
        let level = dyadic_level(r.delta)?;
        let mut weights = BTreeMap::new();
        for c in r.cells {
            let coords: [i64; D] = c
                .coords
                .try_into()
                .map_err(|_| Error::Parse(format!("coords must have {D} entries")))?;
            *weights.entry(coords).or_insert(0.0) += c.weight;
        }
        DyadicMeasure::new(level, r.alpha, weights)
    }
}

/// Uniform measure on the occupied cells, scaled so that c_alpha = 1.
/// `n` points uniform in the ball of radius `radius` about the origin (rejection sampling).
pub fn ball_cloud(n: usize, radius: f64, seed: u64) -> Result<PointCloud> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(param(format!("radius = {radius} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let p: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
            points.push([p[0] * radius, p[1] * radius, p[2] * radius]);
        }
    }
    Ok(PointCloud {
        points,
        alpha: 3.0,
        delta: f64::NAN,
        seed,
        generator: "ball".to_string(),
    })
}

pub fn frostman_measure<const D: usize>(cells: &[[i64; D]], level: u32, alpha: f64) -> Result<DyadicMeasure<D>> {
    if cells.is_empty() {
        return Err(Error::Empty("frostman_measure needs a nonempty cloud"));
    }
    let unit: BTreeMap<[i64; D], f64> = cells.iter().map(|c| (*c, 1.0)).collect();
    let m = DyadicMeasure::new(level, alpha, unit)?;
    let c = m.c_alpha(alpha);
    Ok(m.scaled(1.0 / c))
}

pub fn frostman_from_cloud(cloud: &PointCloud, alpha: f64) -> Result<DyadicMeasure<3>> {
    let level = dyadic_level(cloud.delta)?;
    frostman_measure(&cloud.cells()?, level, alpha)
}

/// Projects each cube centre along g(t) and deposits its mass on the
/// level-`out_level` square of the (e2, e3) plane containing it.
pub fn pushforward(mu: &DyadicMeasure<3>, curve: &Curve, t: f64, out_level: u32) -> Result<DyadicMeasure<2>> {
    if out_level > mu.level {
        return Err(param(format!(
            "output level {out_level} finer than measure level {}",
            mu.level
        )));
    }
    let frame = curve.frame(t)?;
    let mut out: BTreeMap<[i64; 2], f64> = BTreeMap::new();
    for (c, w) in &mu.weights {
        let x = Vec3::from(mu.center(c));
        let p = frame.project(&x);
        *out.entry(crate::dyadic::cell_of(&p, out_level)).or_insert(0.0) += w;
    }
    DyadicMeasure::new(out_level, mu.alpha, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn full_grid_for_alpha_three() {
        let c = cantor_cloud(3.0, 1.0 / 16.0, 1, CantorVariant::RandomSubset).unwrap();
        assert_eq!(c.len(), 4096);
        let mu = frostman_from_cloud(&c, 3.0).unwrap();
        assert_abs_diff_eq!(mu.total_mass(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu.c_alpha(3.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn axis_aligned_line() {
        let c = cantor_cloud(1.0, 1.0 / 256.0, 3, CantorVariant::AxisAligned).unwrap();
        assert!((128..=512).contains(&c.len()), "{}", c.len());
        // every point shares y and z cells with the others at the finest scale
        let ys: std::collections::BTreeSet<i64> =
            c.cells().unwrap().iter().map(|p| p[1]).collect();
        assert_eq!(ys.len(), 1);
    }

    #[test]
    fn clouds_are_reproducible() {
        let a = cantor_cloud(1.5, 1.0 / 64.0, 9, CantorVariant::RandomSubset).unwrap();
        let b = cantor_cloud(1.5, 1.0 / 64.0, 9, CantorVariant::RandomSubset).unwrap();
        assert_eq!(a, b);
        let c = cantor_cloud(1.5, 1.0 / 64.0, 10, CantorVariant::RandomSubset).unwrap();
        assert_ne!(a.points, c.points);
        assert!(cantor_cloud(3.5, 0.5, 1, CantorVariant::RandomSubset).is_err());
        assert!(cantor_cloud(1.0, 0.3, 1, CantorVariant::RandomSubset).is_err());
    }

    #[test]
    fn frostman_examples() {
        let delta = 1.0 / 64.0;
        let one = frostman_measure(&[[5i64, 9, 13]], 6, 1.0).unwrap();
        assert_abs_diff_eq!(one.total_mass(), delta, epsilon = 1e-15);
        let c = cantor_cloud(1.5, 1.0 / 256.0, 4, CantorVariant::RandomSubset).unwrap();
        let mu = frostman_from_cloud(&c, 1.5).unwrap();
        assert_eq!(mu.c_alpha(1.5), 1.0);
        assert!(mu.total_mass() <= 1.0 + 1e-12);
    }

    #[test]
    fn point_mass_c_alpha() {
        let mut w = BTreeMap::new();
        w.insert([0i64, 0, 0], 0.3);
        let mu = DyadicMeasure::new(4, 2.0, w).unwrap();
        assert_abs_diff_eq!(mu.c_alpha(2.0), 0.3 * 256.0, epsilon = 1e-12);
    }

    #[test]
    fn pushforward_conserves_mass_and_scales() {
        let c = cantor_cloud(2.0, 1.0 / 32.0, 2, CantorVariant::RandomSubset).unwrap();
        let mu = frostman_from_cloud(&c, 2.0).unwrap();
        let curve = Curve::model();
        let p = pushforward(&mu, &curve, 0.4, 3).unwrap();
        assert_abs_diff_eq!(p.total_mass(), mu.total_mass(), epsilon = 1e-12 * mu.total_mass());
        let p2 = pushforward(&mu.scaled(3.0), &curve, 0.4, 3).unwrap();
        for (k, v) in &p.weights {
            assert_eq!(p2.weights[k], v * 3.0);
        }
        assert!(pushforward(&mu, &curve, 0.4, 6).is_err());
    }

    #[test]
    fn pushforward_of_fibre_is_atom() {
        // cells along the line R g(t) through the origin
        let curve = Curve::model();
        let t = 0.5;
        let g = curve.point(t).unwrap();
        let level = 7;
        let mut w = BTreeMap::new();
        for i in 0..100 {
            let x = g * (i as f64 / 100.0);
            w.insert(crate::dyadic::cell_of(&[x.x, x.y, x.z], level), 1.0);
        }
        let mu = DyadicMeasure::new(level, 1.0, w).unwrap();
        let p = pushforward(&mu, &curve, t, 3).unwrap();
        assert!(p.weights.len() <= 4, "{}", p.weights.len());
    }

    #[test]
    fn measure_json() {
        let mut w = BTreeMap::new();
        w.insert([1i64, -2, 3], 0.25);
        w.insert([0, 0, 0], 0.5);
        let mu = DyadicMeasure::new(3, 1.5, w).unwrap();
        let back = DyadicMeasure::<3>::from_json(&mu.to_json()).unwrap();
        assert_eq!(back, mu);
        assert!(DyadicMeasure::<3>::from_json(r#"{"delta":0.3,"alpha":1,"cells":[]}"#).is_err());
        assert!(DyadicMeasure::<3>::from_json(
            r#"{"delta":0.5,"alpha":1,"cells":[{"coords":[0,0,0],"weight":-1}]}"#
        )
        .is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = cantor_cloud(1.0, 1.0 / 8.0, 5, CantorVariant::RandomSubset).unwrap();
        let back = PointCloud::from_csv(&c.to_csv(), c.delta).unwrap();
        assert_eq!(back.points, c.points);
        assert!(PointCloud::from_csv("x,y,z\n1,2\n", 0.5).is_err());
        assert!(PointCloud::from_csv("1,2,nan\n", 0.5).is_err());
    }
}
