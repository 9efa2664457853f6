//! Half-open dyadic cubes, covers satisfying an s-dimensional counting
//! condition, and (delta, s)-sets.
//!
//! A cube at level k with integer coords c is the product of
//! [c_i 2^-k, (c_i + 1) 2^-k), so same-level cubes are disjoint.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube<const D: usize> {
    pub level: u32,
    pub coords: [i64; D],
}

#[derive(Serialize, Deserialize)]
struct CubeRepr {
    level: u32,
    coords: Vec<i64>,
}

impl<const D: usize> Serialize for DyadicCube<D> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CubeRepr {
            level: self.level,
            coords: self.coords.to_vec(),
        }
        .serialize(s)
    }
}

impl<'de, const D: usize> Deserialize<'de> for DyadicCube<D> {
    fn deserialize<De: serde::Deserializer<'de>>(d: De) -> std::result::Result<Self, De::Error> {
        let r = CubeRepr::deserialize(d)?;
        let coords: [i64; D] = r.coords.try_into().map_err(|v: Vec<i64>| {
            serde::de::Error::custom(format!("expected {D} coords, got {}", v.len()))
        })?;
        if r.level > MAX_LEVEL {
            return Err(serde::de::Error::custom(format!(
                "level {} exceeds {MAX_LEVEL}",
                r.level
            )));
        }
        Ok(DyadicCube {
            level: r.level,
            coords,
        })
    }
}

/// Deepest level accepted from external input.
pub const MAX_LEVEL: u32 = 40;

/// Worst-ratio threshold for a (delta, s)-certificate.
pub const CERTIFICATE_THRESHOLD: f64 = 8.0;

/// Ball-count cap enforced while extracting a (delta, s)-set.
pub const EXTRACTION_CAP: f64 = 4.0;

impl<const D: usize> DyadicCube<D> {
    pub fn new(level: u32, coords: [i64; D]) -> Self {
        DyadicCube { level, coords }
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Ancestor at level `l <= self.level`.
    pub fn ancestor(&self, l: u32) -> Self {
        let shift = self.level - l;
        let mut c = self.coords;
        for v in c.iter_mut() {
            *v >>= shift;
        }
        DyadicCube {
            level: l,
            coords: c,
        }
    }

    pub fn contains(&self, other: &Self) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }

    pub fn children(&self) -> impl Iterator<Item = Self> + '_ {
        (0..1usize << D).map(move |mask| {
            let mut c = self.coords;
            for (i, v) in c.iter_mut().enumerate() {
                *v = 2 * *v + ((mask >> i) & 1) as i64;
            }
            DyadicCube {
                level: self.level + 1,
                coords: c,
            }
        })
    }

    pub fn center(&self) -> [f64; D] {
        let r = self.side();
        let mut p = [0.0; D];
        for i in 0..D {
            p[i] = (self.coords[i] as f64 + 0.5) * r;
        }
        p
    }

    pub fn containing(level: u32, x: &[f64; D]) -> Self {
        DyadicCube {
            level,
            coords: cell_of(x, level),
        }
    }

    pub fn contains_point(&self, x: &[f64; D]) -> bool {
        cell_of(x, self.level) == self.coords
    }
}

/// Level k with delta = 2^-k; errors for non-dyadic or out-of-range delta.
pub fn dyadic_level(delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(param(format!("delta = {delta} outside (0, 1]")));
    }
    let k = -delta.log2();
    let r = k.round();
    if (k - r).abs() > 1e-9 || r > MAX_LEVEL as f64 {
        return Err(param(format!("delta = {delta} is not a supported power of two")));
    }
    Ok(r as u32)
}

pub fn cell_of<const D: usize>(x: &[f64; D], level: u32) -> [i64; D] {
    let scale = (level as f64).exp2();
    let mut c = [0i64; D];
    for i in 0..D {
        c[i] = (x[i] * scale).floor() as i64;
    }
    c
}

/// Largest integer count allowed by 2^{(k-l) s}.
fn allowed(diff: u32, s: f64) -> u64 {
    ((diff as f64 * s).exp2() + 1e-9).floor() as u64
}

/// All offsets in {-1, 0, 1}^D.
fn neighbor_offsets<const D: usize>() -> Vec<[i64; D]> {
    let n = 3usize.pow(D as u32);
    (0..n)
        .map(|mut idx| {
            let mut o = [0i64; D];
            for v in o.iter_mut() {
                *v = (idx % 3) as i64 - 1;
                idx /= 3;
            }
            o
        })
        .collect()
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy delta-net size: points are visited in input order and kept when at
/// distance >= delta from every kept point. The result lies between
/// |X|_delta / 2 and |X|_delta, the usual net ambiguity.
pub fn separated_count<const D: usize>(points: &[[f64; D]], delta: f64) -> usize {
    if points.is_empty() || !(delta > 0.0) {
        return 0;
    }
    let mut grid: HashMap<[i64; D], Vec<[f64; D]>> = HashMap::new();
    let offsets = neighbor_offsets::<D>();
    let d2 = delta * delta;
    let mut kept = 0;
    for p in points {
        let mut key = [0i64; D];
        for i in 0..D {
            key[i] = (p[i] / delta).floor() as i64;
        }
        let close = offsets.iter().any(|o| {
            let mut k = key;
            for i in 0..D {
                k[i] = k[i].saturating_add(o[i]);
            }
            grid.get(&k)
                .is_some_and(|v| v.iter().any(|q| dist2(p, q) < d2))
        });
        if !close {
            grid.entry(key).or_default().push(*p);
            kept += 1;
        }
    }
    kept
}

/// min over k <= k_max of sum over occupied level-k cubes of (2^-k)^t.
pub fn hausdorff_content_upper<const D: usize>(points: &[[f64; D]], t: f64, k_max: u32) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for k in 0..=k_max {
        let occ: HashSet<[i64; D]> = points.iter().map(|p| cell_of(p, k)).collect();
        let v = occ.len() as f64 * (-(k as f64) * t).exp2();
        best = best.min(v);
    }
    best
}

/// A finite family of dyadic cubes with the exponent used for its budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicCover<const D: usize> {
    cells: BTreeSet<DyadicCube<D>>,
    pub s: f64,
}

impl<const D: usize> DyadicCover<D> {
    /// Rejects covers where one cell contains another.
    pub fn new(cells: impl IntoIterator<Item = DyadicCube<D>>, s: f64) -> Result<Self> {
        let cells: BTreeSet<_> = cells.into_iter().collect();
        if !(s.is_finite() && s >= 0.0) {
            return Err(param(format!("exponent s = {s} must be finite and >= 0")));
        }
        if let Some(c) = cells.iter().find(|c| c.level > MAX_LEVEL) {
            return Err(param(format!("level {} exceeds {MAX_LEVEL}", c.level)));
        }
        let set: HashSet<_> = cells.iter().copied().collect();
        for c in &cells {
            for l in 0..c.level {
                if set.contains(&c.ancestor(l)) {
                    return Err(Error::Precondition(format!(
                        "cell {:?} is contained in another cover cell",
                        c
                    )));
                }
            }
        }
        Ok(DyadicCover { cells, s })
    }

    pub fn cells(&self) -> &BTreeSet<DyadicCube<D>> {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Sum over cells of side^s.
    pub fn budget(&self) -> f64 {
        self.cells.iter().map(|c| c.side().powf(self.s)).sum()
    }

    pub fn covers_point(&self, x: &[f64; D]) -> bool {
        let finest = self.cells.iter().map(|c| c.level).max().unwrap_or(0);
        let leaf = DyadicCube::containing(finest, x);
        (0..=finest).any(|l| self.cells.contains(&leaf.ancestor(l)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.cells.iter().collect::<Vec<_>>()).unwrap_or_default()
    }

    pub fn from_json(json: &str, s: f64) -> Result<Self> {
        let cells: Vec<DyadicCube<D>> = serde_json::from_str(json)?;
        DyadicCover::new(cells, s)
    }

    /// First violation of the s-dimensional condition in (level, coords) order:
    /// (ancestor D, level k, count) with count > 2^{(k - level(D)) s}.
    pub fn first_violation(&self) -> Option<(DyadicCube<D>, u32, u64)> {
        let mut counts: BTreeMap<(DyadicCube<D>, u32), u64> = BTreeMap::new();
        for c in &self.cells {
            for l in 0..c.level {
                *counts.entry((c.ancestor(l), c.level)).or_insert(0) += 1;
            }
        }
        counts
            .into_iter()
            .filter(|((d, k), n)| *n > allowed(k - d.level, self.s))
            .min_by_key(|((d, _), _)| (d.level, d.coords))
            .map(|((d, k), n)| (d, k, n))
    }

    pub fn satisfies_condition(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Exchange step: while some dyadic cube D holds more than
    /// 2^{(k - level(D)) s} cover cells of a level k, replace every cover
    /// cell inside D by D. Violations are processed coarsest level first,
    /// then by coordinates. Each exchange removes at least two cells and
    /// adds one, so the loop terminates.
    pub fn regularize(&self) -> DyadicCover<D> {
        let mut eng = Exchange::new(self.s);
        for c in &self.cells {
            eng.add(*c);
        }
        while let Some(&(l, coords, _)) = eng.violators.iter().next() {
            let d = DyadicCube::new(l, coords);
            for c in eng.descendants(&d) {
                eng.remove(c);
            }
            eng.add(d);
        }
        DyadicCover {
            cells: eng.cover,
            s: self.s,
        }
    }
}

struct Exchange<const D: usize> {
    s: f64,
    cover: BTreeSet<DyadicCube<D>>,
    subtree: HashMap<DyadicCube<D>, u64>,
    counts: HashMap<(DyadicCube<D>, u32), u64>,
    violators: BTreeSet<(u32, [i64; D], u32)>,
}

impl<const D: usize> Exchange<D> {
    fn new(s: f64) -> Self {
        Exchange {
            s,
            cover: BTreeSet::new(),
            subtree: HashMap::new(),
            counts: HashMap::new(),
            violators: BTreeSet::new(),
        }
    }

    fn add(&mut self, c: DyadicCube<D>) {
        if !self.cover.insert(c) {
            return;
        }
        for l in 0..=c.level {
            let a = c.ancestor(l);
            *self.subtree.entry(a).or_insert(0) += 1;
            if l < c.level {
                let n = self.counts.entry((a, c.level)).or_insert(0);
                *n += 1;
                if *n > allowed(c.level - l, self.s) {
                    self.violators.insert((l, a.coords, c.level));
                }
            }
        }
    }

    fn remove(&mut self, c: DyadicCube<D>) {
        if !self.cover.remove(&c) {
            return;
        }
        for l in 0..=c.level {
            let a = c.ancestor(l);
            if let Some(n) = self.subtree.get_mut(&a) {
                *n -= 1;
                if *n == 0 {
                    self.subtree.remove(&a);
                }
            }
            if l < c.level {
                let key = (a, c.level);
                if let Some(n) = self.counts.get_mut(&key) {
                    *n -= 1;
                    let left = *n;
                    if left == 0 {
                        self.counts.remove(&key);
                    }
                    if left <= allowed(c.level - l, self.s) {
                        self.violators.remove(&(l, a.coords, c.level));
                    }
                }
            }
        }
    }

    fn descendants(&self, d: &DyadicCube<D>) -> Vec<DyadicCube<D>> {
        let mut out = Vec::new();
        let mut stack = vec![*d];
        while let Some(n) = stack.pop() {
            if self.cover.contains(&n) {
                out.push(n);
            }
            for ch in n.children() {
                if self.subtree.contains_key(&ch) {
                    stack.push(ch);
                }
            }
        }
        out
    }
}

/// A delta-separated point set with its (delta, s) certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub delta: f64,
    pub s: f64,
    pub worst_ratio: f64,
}

#[derive(Serialize, Deserialize)]
struct DeltaSetRepr {
    delta: f64,
    s: f64,
    worst_ratio: f64,
    points: Vec<Vec<f64>>,
}

impl<const D: usize> DeltaSet<D> {
    /// Builds a set and computes its certificate.
    pub fn new(points: Vec<[f64; D]>, delta: f64, s: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(param(format!("delta = {delta} outside (0, 1]")));
        }
        if !(s.is_finite() && s >= 0.0) {
            return Err(param(format!("exponent s = {s} must be finite and >= 0")));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(param("non-finite point"));
        }
        let cert = verify_delta_s(&points, delta, s);
        Ok(DeltaSet {
            points,
            delta,
            s,
            worst_ratio: cert.worst_ratio,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DeltaSetRepr {
            delta: self.delta,
            s: self.s,
            worst_ratio: self.worst_ratio,
            points: self.points.iter().map(|p| p.to_vec()).collect(),
        })
        .unwrap_or_default()
    }

    /// Parses and re-certifies; the stored worst_ratio is recomputed.
    pub fn from_json(json: &str) -> Result<Self> {
        let r: DeltaSetRepr = serde_json::from_str(json)?;
        let mut pts = Vec::with_capacity(r.points.len());
        for p in r.points {
            let a: [f64; D] = p
                .try_into()
                .map_err(|_| Error::Parse(format!("points must have {D} coordinates")))?;
            pts.push(a);
        }
        if r.delta > 0.0 && r.delta < 2f64.powi(-(MAX_LEVEL as i32)) {
            return Err(param("delta below the finest supported level"));
        }
        DeltaSet::new(pts, r.delta, r.s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCertificate<const D: usize> {
    pub ok: bool,
    pub worst_ratio: f64,
    /// Ball attaining the worst ratio: centred on this cube, radius its circumradius.
    pub witness: Option<DyadicCube<D>>,
}

fn finest_level(delta: f64) -> u32 {
    (1.0 / delta).log2().floor().max(0.0) as u32
}

/// Ball counts for every dyadic ball scale r = 2^-m in [delta, 1]: each ball
/// is centred at a level-m cube centre with radius the cube's circumradius.
fn ball_counts<const D: usize>(points: &[[f64; D]], m_max: u32) -> HashMap<DyadicCube<D>, u64> {
    let offsets = neighbor_offsets::<D>();
    let mut counts = HashMap::new();
    for p in points {
        for m in 0..=m_max {
            for cube in balls_containing(p, m, &offsets) {
                *counts.entry(cube).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn balls_containing<'a, const D: usize>(
    p: &'a [f64; D],
    m: u32,
    offsets: &'a [[i64; D]],
) -> impl Iterator<Item = DyadicCube<D>> + 'a {
    let base = cell_of(p, m);
    let r = (-(m as f64)).exp2();
    let rad2 = 0.25 * r * r * D as f64 * (1.0 + 1e-12);
    offsets.iter().filter_map(move |o| {
        let mut c = base;
        for i in 0..D {
            c[i] = c[i].saturating_add(o[i]);
        }
        let cube = DyadicCube::new(m, c);
        (dist2(p, &cube.center()) <= rad2).then_some(cube)
    })
}

/// Checks |P cap B_r| <= 8 (r / delta)^s over all dyadic balls.
pub fn verify_delta_s<const D: usize>(points: &[[f64; D]], delta: f64, s: f64) -> DeltaCertificate<D> {
    let m_max = finest_level(delta);
    let counts = ball_counts(points, m_max);
    let mut worst = 0.0;
    let mut witness = None;
    let mut keys: Vec<_> = counts.into_iter().collect();
    keys.sort_unstable_by_key(|(c, _)| (c.level, c.coords));
    for (cube, n) in keys {
        let ratio = n as f64 / (cube.side() / delta).powf(s);
        if ratio > worst {
            worst = ratio;
            witness = Some(cube);
        }
    }
    DeltaCertificate {
        ok: worst <= CERTIFICATE_THRESHOLD,
        worst_ratio: worst,
        witness,
    }
}

/// Selects cell centres forming a (delta, s)-set from occupied cells at `level`.
///
/// A quota tree first spreads ceil(delta^-s) points over the dyadic
/// ancestors, filling children evenly up to min(cell count, ceil(2^{(level-l)s})).
/// Candidates are then admitted greedily, in tree order, only while every
/// dyadic ball keeps at most 4 (r / delta)^s points.
pub fn extract_delta_s_set<const D: usize>(cells: &[[i64; D]], level: u32, s: f64) -> Result<DeltaSet<D>> {
    if cells.is_empty() {
        return Err(Error::Empty("extract_delta_s_set needs occupied cells"));
    }
    if level > MAX_LEVEL {
        return Err(param(format!("level {level} exceeds {MAX_LEVEL}")));
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(param(format!("exponent s = {s} must be finite and >= 0")));
    }
    let delta = (-(level as f64)).exp2();
    let leaves: BTreeSet<[i64; D]> = cells.iter().copied().collect();

    // Cell counts for every ancestor.
    let mut count: HashMap<DyadicCube<D>, u64> = HashMap::new();
    let mut children: BTreeMap<DyadicCube<D>, Vec<DyadicCube<D>>> = BTreeMap::new();
    let mut roots: BTreeSet<DyadicCube<D>> = BTreeSet::new();
    for c in &leaves {
        let leaf = DyadicCube::new(level, *c);
        for l in 0..=level {
            let a = leaf.ancestor(l);
            let n = count.entry(a).or_insert(0);
            *n += 1;
            if *n == 1 {
                if l == 0 {
                    roots.insert(a);
                } else {
                    children.entry(a.ancestor(l - 1)).or_default().push(a);
                }
            }
        }
    }
    let cap = |l: u32| -> u64 { ((level - l) as f64 * s).exp2().sub_eps_ceil() };
    let root_quota = (leaves.len() as u64).min(cap(0));

    let mut candidates = Vec::new();
    let mut stack: Vec<(DyadicCube<D>, u64)> = Vec::new();
    let roots: Vec<_> = roots.into_iter().collect();
    for (node, q) in water_fill(&roots, root_quota, &count, cap(0)).into_iter().rev() {
        stack.push((node, q));
    }
    while let Some((node, q)) = stack.pop() {
        if q == 0 {
            continue;
        }
        if node.level == level {
            candidates.push(node);
            continue;
        }
        let kids = children.get(&node).map(|v| v.as_slice()).unwrap_or(&[]);
        let mut kids = kids.to_vec();
        kids.sort_unstable();
        for (k, qk) in water_fill(&kids, q, &count, cap(node.level + 1)).into_iter().rev() {
            stack.push((k, qk));
        }
    }

    let offsets = neighbor_offsets::<D>();
    let mut balls: HashMap<DyadicCube<D>, u64> = HashMap::new();
    let mut points = Vec::new();
    for cand in candidates {
        let p = cand.center();
        let hits: Vec<DyadicCube<D>> = (0..=level)
            .flat_map(|m| balls_containing(&p, m, &offsets).collect::<Vec<_>>())
            .collect();
        let fits = hits.iter().all(|b| {
            let n = balls.get(b).copied().unwrap_or(0) + 1;
            n as f64 <= EXTRACTION_CAP * ((level - b.level) as f64 * s).exp2() * (1.0 + 1e-12)
        });
        if fits {
            for b in hits {
                *balls.entry(b).or_insert(0) += 1;
            }
            points.push(p);
        }
    }
    DeltaSet::new(points, delta, s)
}

trait CeilEps {
    fn sub_eps_ceil(self) -> u64;
}

impl CeilEps for f64 {
    fn sub_eps_ceil(self) -> u64 {
        (self - 1e-9).ceil().max(0.0) as u64
    }
}

/// Splits `quota` among `nodes` as evenly as possible, each capped at
/// min(cells below it, cap). Smallest caps are served first.
fn water_fill<const D: usize>(
    nodes: &[DyadicCube<D>],
    quota: u64,
    count: &HashMap<DyadicCube<D>, u64>,
    cap: u64,
) -> Vec<(DyadicCube<D>, u64)> {
    let mut order: Vec<(u64, DyadicCube<D>)> = nodes
        .iter()
        .map(|n| (count.get(n).copied().unwrap_or(0).min(cap), *n))
        .collect();
    order.sort_unstable();
    let mut remaining = quota;
    let mut out = Vec::with_capacity(order.len());
    let total = order.len() as u64;
    for (i, (c, n)) in order.into_iter().enumerate() {
        let left = total - i as u64;
        let share = remaining.div_ceil(left).min(c);
        remaining -= share;
        out.push((n, share));
    }
    out.sort_unstable_by_key(|(n, _)| *n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cube1(level: u32, c: i64) -> DyadicCube<1> {
        DyadicCube::new(level, [c])
    }

    #[test]
    fn cube_basics() {
        let c = DyadicCube::new(3, [5i64, -2]);
        assert_eq!(c.ancestor(1), DyadicCube::new(1, [1, -1]));
        assert!(c.ancestor(0).contains(&c));
        assert_eq!(c.children().count(), 4);
        assert!(c.children().all(|ch| c.contains(&ch)));
        assert!(c.contains_point(&c.center()));
        // half-open: the right face belongs to the neighbour
        let edge = [6.0 / 8.0, -1.0 / 8.0];
        assert!(!c.contains_point(&edge));
    }

    #[test]
    fn separated_count_examples() {
        let d = 0.1;
        assert_eq!(separated_count(&[[0.0], [d / 2.0], [d]], d), 2);
        let grid: Vec<[f64; 1]> = (0..50).map(|j| [j as f64 * 0.25]).collect();
        assert_eq!(separated_count(&grid, 0.25), 50);
        assert_eq!(separated_count::<2>(&[], 0.1), 0);
    }

    #[test]
    fn content_examples() {
        let p = [[0.3, 0.7]];
        assert!(hausdorff_content_upper(&p, 1.5, 6) <= 2f64.powf(-6.0 * 1.5) + 1e-15);
        let line: Vec<[f64; 1]> = (0..256).map(|i| [(i as f64 + 0.5) / 256.0]).collect();
        assert_abs_diff_eq!(hausdorff_content_upper(&line, 1.0, 8), 1.0, epsilon = 1e-12);
        let square: Vec<[f64; 2]> = (0..32 * 32)
            .map(|i| [((i % 32) as f64 + 0.5) / 32.0, ((i / 32) as f64 + 0.5) / 32.0])
            .collect();
        assert_abs_diff_eq!(hausdorff_content_upper(&square, 2.0, 5), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn middle_thirds_content() {
        let mut pts = vec![0.0f64];
        let mut len = 1.0;
        for _ in 0..8 {
            len /= 3.0;
            pts = pts.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
        }
        let pts: Vec<[f64; 1]> = pts.iter().map(|&a| [a + len / 2.0]).collect();
        let t = 2f64.ln() / 3f64.ln();
        let v = hausdorff_content_upper(&pts, t, 10);
        assert!((0.3..=3.0).contains(&v), "{v}");
    }

    #[test]
    fn regularize_keeps_good_cover() {
        let cover = DyadicCover::new((0..16).map(|i| cube1(4, i)), 1.0).unwrap();
        assert!(cover.satisfies_condition());
        assert_eq!(cover.regularize(), cover);
    }

    #[test]
    fn regularize_half_dimensional_line() {
        // three level-2 intervals inside [0, 1) exceed 2^{2 * 0.5} = 2
        let cover = DyadicCover::new([cube1(2, 0), cube1(2, 1), cube1(2, 3)], 0.5).unwrap();
        let out = cover.regularize();
        assert_eq!(out.cells().iter().copied().collect::<Vec<_>>(), vec![cube1(0, 0)]);
        assert_abs_diff_eq!(cover.budget(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.budget(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn regularize_squares() {
        let cells = (0..4).map(|i| DyadicCube::new(2, [i % 2, i / 2]));
        let cover = DyadicCover::new(cells, 0.5).unwrap();
        assert_abs_diff_eq!(cover.budget(), 2.0, epsilon = 1e-12);
        let out = cover.regularize();
        assert_eq!(out.len(), 1);
        assert_eq!(*out.cells().iter().next().unwrap(), DyadicCube::new(0, [0, 0]));
        assert_abs_diff_eq!(out.budget(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nested_cover_rejected() {
        assert!(DyadicCover::new([cube1(1, 0), cube1(3, 1)], 1.0).is_err());
    }

    #[test]
    fn cover_json_round_trip() {
        let cover = DyadicCover::new([DyadicCube::new(2, [1i64, 3]), DyadicCube::new(4, [0, 0])], 1.0)
            .unwrap();
        let json = cover.to_json();
        assert_eq!(DyadicCover::<2>::from_json(&json, 1.0).unwrap(), cover);
        assert!(DyadicCover::<2>::from_json(r#"[{"level":1,"coords":[0]}]"#, 1.0).is_err());
    }

    #[test]
    fn full_grid_extraction() {
        let cells: Vec<[i64; 1]> = (0..256).map(|i| [i]).collect();
        let ds = extract_delta_s_set(&cells, 8, 1.0).unwrap();
        assert_eq!(ds.len(), 256);
        assert!(ds.worst_ratio <= 4.0);
        let ds = extract_delta_s_set(&cells, 8, 0.5).unwrap();
        assert!((4..=64).contains(&ds.len()), "{}", ds.len());
        assert!(ds.worst_ratio <= 4.0);
        let one = extract_delta_s_set(&[[7i64]], 8, 0.5).unwrap();
        assert_eq!(one.points, vec![[7.5 / 256.0]]);
        assert!(extract_delta_s_set::<2>(&[], 4, 1.0).is_err());
    }

    #[test]
    fn certificate_examples() {
        let grid: Vec<[f64; 2]> = (0..16 * 16)
            .map(|i| [((i % 16) as f64 + 0.5) / 16.0, ((i / 16) as f64 + 0.5) / 16.0])
            .collect();
        assert!(verify_delta_s(&grid, 1.0 / 16.0, 2.0).ok);
        let line: Vec<[f64; 1]> = (0..256).map(|i| [(i as f64 + 0.5) / 256.0]).collect();
        let c = verify_delta_s(&line, 1.0 / 256.0, 0.5);
        assert!(!c.ok);
        assert_eq!(c.witness, Some(DyadicCube::new(0, [0])));
    }

    #[test]
    fn delta_set_json() {
        let ds = DeltaSet::new(vec![[0.1, 0.2], [0.6, 0.9]], 0.125, 1.0).unwrap();
        let back = DeltaSet::<2>::from_json(&ds.to_json()).unwrap();
        assert_eq!(back, ds);
        assert!(DeltaSet::<2>::from_json(r#"{"delta":0.1,"s":1,"worst_ratio":0,"points":[[1]]}"#).is_err());
    }

    #[test]
    fn extreme_coordinates_do_not_overflow() {
        let pts = [[1e300, -1e300], [0.0, 0.0]];
        let c = verify_delta_s(&pts, 2f64.powi(-40), 1.0);
        assert!(c.worst_ratio.is_finite());
        assert_eq!(separated_count(&pts, 1e-300), 2);
    }
}
