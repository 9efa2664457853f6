//! Box-counting dimension, per-direction projection profiles, exceptional
//! sets and the projected-area stability proxy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{param, Error, Result};
use crate::fractal::PointCloud;

/// Members of E_s must have slope below `s - DIM_TOLERANCE`.
pub const DIM_TOLERANCE: f64 = 0.15;
/// Default lower bound on m_{delta/2} / m_delta.
pub const POSITIVITY_RATIO: f64 = 0.6;

/// Largest bitmap (in cells) used for 2-D counting before falling back to sorting.
const BITMAP_LIMIT: i64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Dyadic side lengths r = 2^-l, coarsest first.
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Inclusive index range into `scales` used by the fit.
    pub fit_range: (usize, usize),
    /// Single cell at every scale; slope forced to 0.
    pub degenerate: bool,
}

/// Least-squares slope of log2 N against level. Drops the first and last
/// scale when at least four are given.
pub fn fit_counts(levels: &[u32], counts: &[u64]) -> Result<ScalingFit> {
    if levels.len() < 3 {
        return Err(param(format!("need at least 3 scales, got {}", levels.len())));
    }
    if levels.len() != counts.len() {
        return Err(param("levels and counts differ in length"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param("levels must be strictly increasing"));
    }
    if counts.contains(&0) {
        return Err(Error::Empty("box counts"));
    }
    let scales: Vec<f64> = levels.iter().map(|&l| (-(l as f64)).exp2()).collect();
    let fit_range = if levels.len() >= 4 {
        (1, levels.len() - 2)
    } else {
        (0, levels.len() - 1)
    };
    if counts.iter().all(|&c| c == 1) {
        return Ok(ScalingFit {
            scales,
            counts: counts.to_vec(),
            slope: 0.0,
            intercept: 0.0,
            r2: 0.0,
            fit_range,
            degenerate: true,
        });
    }
    let xs: Vec<f64> = levels[fit_range.0..=fit_range.1].iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = counts[fit_range.0..=fit_range.1]
        .iter()
        .map(|&c| (c as f64).log2())
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(ScalingFit {
        scales,
        counts: counts.to_vec(),
        slope,
        intercept,
        r2,
        fit_range,
        degenerate: false,
    })
}

/// Number of occupied level-l dyadic cells for each l in `levels` (ascending).
pub fn box_counts<const D: usize>(points: &[[f64; D]], levels: &[u32]) -> Vec<u64> {
    let Some(&finest) = levels.last() else {
        return Vec::new();
    };
    let mut cells: Vec<[i64; D]> = points.iter().map(|p| crate::dyadic::cell_of(p, finest)).collect();
    cells.sort_unstable();
    cells.dedup();
    let mut out = vec![0u64; levels.len()];
    for (i, &l) in levels.iter().enumerate().rev() {
        let k = finest - l;
        if k > 0 {
            let mut c: Vec<[i64; D]> = cells
                .iter()
                .map(|c| {
                    let mut q = *c;
                    for v in q.iter_mut() {
                        *v >>= k;
                    }
                    q
                })
                .collect();
            c.sort_unstable();
            c.dedup();
            out[i] = c.len() as u64;
        } else {
            out[i] = cells.len() as u64;
        }
    }
    out
}

/// 2-D box counts through a bitmap at the finest level, pooled upward.
pub fn box_counts_2d(points: &[[f64; 2]], levels: &[u32]) -> Vec<u64> {
    let (Some(&coarse), Some(&finest)) = (levels.first(), levels.last()) else {
        return Vec::new();
    };
    if points.is_empty() {
        return vec![0; levels.len()];
    }
    let scale = (finest as f64).exp2();
    let cells: Vec<(i64, i64)> = points
        .iter()
        .map(|p| ((p[0] * scale).floor() as i64, (p[1] * scale).floor() as i64))
        .collect();
    let shift = finest - coarse;
    let align = |v: i64| (v >> shift) << shift;
    let x0 = align(cells.iter().map(|c| c.0).min().unwrap());
    let y0 = align(cells.iter().map(|c| c.1).min().unwrap());
    let x1 = cells.iter().map(|c| c.0).max().unwrap();
    let y1 = cells.iter().map(|c| c.1).max().unwrap();
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    if w.saturating_mul(h) > BITMAP_LIMIT {
        return box_counts(points, levels);
    }
    let (mut w, mut h) = (w as usize, h as usize);
    let mut grid = vec![false; w * h];
    for c in &cells {
        grid[(c.1 - y0) as usize * w + (c.0 - x0) as usize] = true;
    }
    let mut out = vec![0u64; levels.len()];
    let mut level = finest;
    for (i, &l) in levels.iter().enumerate().rev() {
        while level > l {
            let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
            let mut next = vec![false; nw * nh];
            for y in 0..h {
                for x in 0..w {
                    if grid[y * w + x] {
                        next[(y / 2) * nw + x / 2] = true;
                    }
                }
            }
            grid = next;
            w = nw;
            h = nh;
            level -= 1;
        }
        out[i] = grid.iter().filter(|&&b| b).count() as u64;
    }
    out
}

/// Box-counting fit of `points` over the dyadic levels `lo..=hi`.
pub fn dim_fit<const D: usize>(points: &[[f64; D]], levels: std::ops::RangeInclusive<u32>) -> Result<ScalingFit> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    let levels: Vec<u32> = levels.collect();
    if levels.len() < 3 {
        return Err(param(format!("need at least 3 scales, got {}", levels.len())));
    }
    let counts = if D == 2 {
        let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
        box_counts_2d(&pts, &levels)
    } else {
        box_counts(points, &levels)
    };
    fit_counts(&levels, &counts)
}

/// Evenly spaced parameters `lo, lo + spacing, ...` inside the curve's domain.
pub fn theta_grid(curve: &Curve, spacing: f64) -> Result<Vec<f64>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(param(format!("theta spacing = {spacing} must be positive")));
    }
    let (lo, hi) = curve.domain();
    let n = ((hi - lo) / spacing + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * spacing).collect())
}

/// pi_theta(A) in the (e2, e3) basis.
pub fn project_cloud(points: &[[f64; 3]], curve: &Curve, theta: f64) -> Result<Vec<[f64; 2]>> {
    let f = curve.frame(theta)?;
    Ok(points
        .iter()
        .map(|p| {
            let v = crate::curve::Vec3::new(p[0], p[1], p[2]);
            f.project(&v)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalProfile {
    pub thetas: Vec<f64>,
    pub theta_spacing: f64,
    /// Parameter domain the thetas live in.
    pub domain: (f64, f64),
    pub fits: Vec<ScalingFit>,
}

impl ExceptionalProfile {
    pub fn slopes(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.slope).collect()
    }

    pub fn median_slope(&self) -> f64 {
        let mut s = self.slopes();
        if s.is_empty() {
            return f64::NAN;
        }
        s.sort_by(f64::total_cmp);
        let m = s.len() / 2;
        if s.len() % 2 == 1 {
            s[m]
        } else {
            0.5 * (s[m - 1] + s[m])
        }
    }

    /// Grid indices with slope < s - tolerance.
    pub fn exceptional_indices(&self, s: f64, tolerance: f64) -> Vec<usize> {
        self.fits
            .iter()
            .enumerate()
            .filter(|(_, f)| f.slope < s - tolerance)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn exceptional_set(&self, s: f64, tolerance: f64) -> Vec<f64> {
        self.exceptional_indices(s, tolerance)
            .into_iter()
            .map(|i| self.thetas[i])
            .collect()
    }
}

/// Fits dim pi_theta(A) on a theta grid of the given spacing.
pub fn projection_profile(
    cloud: &PointCloud,
    curve: &Curve,
    theta_spacing: f64,
    levels: std::ops::RangeInclusive<u32>,
) -> Result<ExceptionalProfile> {
    if cloud.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    let finest = (-(*levels.end() as f64)).exp2();
    if theta_spacing > finest * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "theta spacing {theta_spacing} exceeds the finest scale {finest}"
        )));
    }
    let lv: Vec<u32> = levels.clone().collect();
    if lv.len() < 3 {
        return Err(param(format!("need at least 3 scales, got {}", lv.len())));
    }
    let thetas = theta_grid(curve, theta_spacing)?;
    let fits = thetas
        .par_iter()
        .map(|&t| {
            let proj = project_cloud(&cloud.points, curve, t)?;
            fit_counts(&lv, &box_counts_2d(&proj, &lv))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExceptionalProfile {
        thetas,
        theta_spacing,
        domain: curve.domain(),
        fits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalEstimate {
    pub s: f64,
    pub alpha_hat: f64,
    pub tolerance: f64,
    pub members: Vec<f64>,
    pub e_dim: f64,
    pub e_fit: Option<ScalingFit>,
    /// max(1 + s - alpha_hat, 0)
    pub bound: f64,
}

/// Box-counting slope of E_s inside the parameter interval, at dyadic scales
/// from 1/8 down to the theta spacing.
pub fn exceptional_dim_estimate(
    profile: &ExceptionalProfile,
    s: f64,
    alpha_hat: f64,
    tolerance: f64,
) -> Result<ExceptionalEstimate> {
    let bound = (1.0 + s - alpha_hat).max(0.0);
    let members = profile.exceptional_set(s, tolerance);
    let mut est = ExceptionalEstimate {
        s,
        alpha_hat,
        tolerance,
        members,
        e_dim: 0.0,
        e_fit: None,
        bound,
    };
    if est.members.is_empty() {
        return Ok(est);
    }
    let (lo, hi) = profile.domain;
    let len = hi - lo;
    let fine = (len / profile.theta_spacing).log2().round().max(0.0) as u32;
    if fine < 5 {
        return Err(param(format!(
            "theta spacing {} too coarse for scales [spacing, 1/8]",
            profile.theta_spacing
        )));
    }
    // normalised to [0, 1]; cell centres avoid floor ties at grid points
    let pts: Vec<[f64; 1]> = est
        .members
        .iter()
        .map(|t| [((t - lo) / len + 0.5 * (-(fine as f64)).exp2()).min(1.0 - 1e-12)])
        .collect();
    let fit = dim_fit(&pts, 3..=fine)?;
    est.e_dim = fit.slope;
    est.e_fit = Some(fit);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityRow {
    pub theta: f64,
    /// m_delta(theta) = #cells * delta^2, one per level.
    pub m: Vec<f64>,
    /// m_{delta/2} / m_delta between consecutive levels.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

/// Measure-stability proxy for positive projected area. Not a test of H^2 > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub levels: Vec<u32>,
    pub threshold: f64,
    pub rows: Vec<PositivityRow>,
    pub pass_fraction: f64,
}

pub fn area_positivity_proxy(
    cloud: &PointCloud,
    alpha_hat: f64,
    curve: &Curve,
    thetas: &[f64],
    levels: &[u32],
    threshold: f64,
) -> Result<PositivityReport> {
    if !(alpha_hat > 2.0) {
        return Err(Error::Precondition(format!(
            "alpha_hat = {alpha_hat} <= 2: area proxy is meaningless"
        )));
    }
    if cloud.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(param("need at least 2 strictly increasing levels"));
    }
    if thetas.is_empty() {
        return Err(Error::Empty("theta list"));
    }
    let rows = thetas
        .par_iter()
        .map(|&t| {
            let proj = project_cloud(&cloud.points, curve, t)?;
            let counts = box_counts_2d(&proj, levels);
            let m: Vec<f64> = counts
                .iter()
                .zip(levels)
                .map(|(&c, &l)| c as f64 * (-2.0 * l as f64).exp2())
                .collect();
            let ratios: Vec<f64> = m.windows(2).map(|w| w[1] / w[0]).collect();
            let pass = ratios.iter().all(|&r| r >= threshold);
            Ok(PositivityRow {
                theta: t,
                m,
                ratios,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass_fraction = rows.iter().filter(|r| r.pass).count() as f64 / rows.len() as f64;
    Ok(PositivityReport {
        levels: levels.to_vec(),
        threshold,
        rows,
        pass_fraction,
    })
}

/// Points of the closed segment a -> b sampled at spacing `step`.
pub fn segment_points(a: [f64; 3], b: [f64; 3], step: f64) -> Vec<[f64; 3]> {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let n = (len / step).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            let u = i as f64 / n as f64;
            [a[0] + u * d[0], a[1] + u * d[1], a[2] + u * d[2]]
        })
        .collect()
}
