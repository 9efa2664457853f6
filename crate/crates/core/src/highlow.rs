//! Grid fields built from tube bumps, their frequency-side high/low/lambda
//! split, energy checks and the L^6 decoupling ratio.
//!
//! Units follow the rescaled setting: tubes are 1 x 1 x delta^-1, the grid
//! covers [-L/2, L/2)^3 with L = n h, and frequencies are in cycles per unit
//! (lattice spacing 1/L). Every mask is a function of the frequency only, so
//! the spatial origin convention never matters.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, Frame, Vec3};
use crate::dyadic::extract_delta_s_set;
use crate::error::{param, Error, Result};
use crate::fft::Fft3;
use crate::fractal::{cantor_cells, CantorVariant};
use crate::geometry::{dyadic_lambdas, lattice};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex samples on the periodic cubic lattice, with an optional
/// frequency twin (unnormalised DFT).
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub n: usize,
    pub h: f64,
    pub values: Vec<Complex64>,
    fourier: Option<Vec<Complex64>>,
}

fn check_grid(n: usize, h: f64) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return Err(param(format!("grid size {n} must be a power of two >= 4")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(param(format!("spacing h = {h} must be positive")));
    }
    Ok(())
}

impl GridFunction {
    pub fn zeros(n: usize, h: f64) -> Result<GridFunction> {
        check_grid(n, h)?;
        Ok(GridFunction {
            n,
            h,
            values: vec![ZERO; n * n * n],
            fourier: None,
        })
    }

    pub fn from_values(n: usize, h: f64, values: Vec<Complex64>) -> Result<GridFunction> {
        check_grid(n, h)?;
        if values.len() != n * n * n {
            return Err(param("value count does not match n^3"));
        }
        Ok(GridFunction {
            n,
            h,
            values,
            fourier: None,
        })
    }

    /// Inverse transform of a DFT array; keeps the array as the frequency twin.
    pub fn from_spectrum(n: usize, h: f64, spectrum: Vec<Complex64>) -> Result<GridFunction> {
        check_grid(n, h)?;
        if spectrum.len() != n * n * n {
            return Err(param("spectrum size does not match n^3"));
        }
        let mut values = spectrum.clone();
        Fft3::new(n).inverse(&mut values);
        Ok(GridFunction {
            n,
            h,
            values,
            fourier: Some(spectrum),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn side(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn position(&self, idx: usize) -> Vec3 {
        position(self.n, self.h, idx)
    }

    pub fn fourier(&mut self) -> &[Complex64] {
        if self.fourier.is_none() {
            let mut f = self.values.clone();
            Fft3::new(self.n).forward(&mut f);
            self.fourier = Some(f);
        }
        self.fourier.as_deref().unwrap_or(&[])
    }

    /// (sum |v|^p h^3)^(1/p) over `region` (all cells by default); p in {1, 2, 6, inf}.
    pub fn lp_norm(&self, p: f64, region: Option<&[usize]>) -> Result<f64> {
        if !(p == 1.0 || p == 2.0 || p == 6.0 || p == f64::INFINITY) {
            return Err(param(format!("unsupported exponent p = {p}")));
        }
        let vals: Box<dyn Iterator<Item = f64> + '_> = match region {
            Some(r) => Box::new(r.iter().map(|&i| self.values[i].norm())),
            None => Box::new(self.values.iter().map(|v| v.norm())),
        };
        if p.is_infinite() {
            return Ok(vals.fold(0.0, f64::max));
        }
        let dv = self.h.powi(3);
        let s: f64 = vals.map(|a| a.powf(p)).sum::<f64>() * dv;
        Ok(s.powf(1.0 / p))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Little-endian interleaved complex64 samples.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            out.extend_from_slice(&(v.re as f32).to_le_bytes());
            out.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        out
    }
}

/// int |F|^2 for a DFT array: sum |c|^2 h^6 / L^3 (equals sum |v|^2 h^3).
pub fn spectral_energy(n: usize, h: f64, spectrum: &[Complex64]) -> f64 {
    let l = n as f64 * h;
    spectrum.iter().map(|c| c.norm_sqr()).sum::<f64>() * h.powi(6) / l.powi(3)
}

fn position(n: usize, h: f64, idx: usize) -> Vec3 {
    let x = idx % n;
    let y = (idx / n) % n;
    let z = idx / (n * n);
    let c = |i: usize| (i as f64 - (n / 2) as f64) * h;
    Vec3::new(c(x), c(y), c(z))
}

fn signed(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Frequency (cycles per unit) of a DFT index.
pub fn frequency(n: usize, h: f64, idx: usize) -> Vec3 {
    let l = n as f64 * h;
    Vec3::new(
        signed(idx % n, n) / l,
        signed((idx / n) % n, n) / l,
        signed(idx / (n * n), n) / l,
    )
}

/// 1 for x <= c, cos^2 ramp to 0 at c + w, 0 beyond.
pub fn taper_inside(x: f64, c: f64, w: f64) -> f64 {
    if x <= c {
        1.0
    } else if x >= c + w {
        0.0
    } else {
        let t = (x - c) / w;
        (0.5 * std::f64::consts::PI * t).cos().powi(2)
    }
}

/// 0 for x <= c - w/2, sin^2 ramp, 1 for x >= c + w/2.
pub fn smooth_step(x: f64, c: f64, w: f64) -> f64 {
    if x <= c - 0.5 * w {
        0.0
    } else if x >= c + 0.5 * w {
        1.0
    } else {
        let t = (x - c + 0.5 * w) / w;
        (0.5 * std::f64::consts::PI * t).sin().powi(2)
    }
}

/// Tapered indicator of an origin-centred frequency box in a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyMask {
    pub axes: [Vec3; 3],
    pub half: [f64; 3],
    pub margin: f64,
}

impl FrequencyMask {
    /// P_theta = {|x1| <= delta, |x2| <= 1, |x3| <= 1}.
    pub fn slab(frame: &Frame, delta: f64, margin: f64) -> FrequencyMask {
        FrequencyMask {
            axes: frame.axes(),
            half: [delta, 1.0, 1.0],
            margin,
        }
    }

    pub fn value(&self, xi: &Vec3) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            let c = xi.dot(&self.axes[i]).abs();
            v *= taper_inside(c, self.half[i], self.margin);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }
}

/// Separable raised-cosine bump: flat on the core, cosine taper outside.
/// `end_taper` is a fraction of the tube length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub cross_taper: f64,
    pub end_taper: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile {
            cross_taper: 0.5,
            end_taper: 0.25,
        }
    }
}

fn tukey(u: f64, core: f64, taper: f64) -> f64 {
    let a = u.abs();
    if a <= core {
        1.0
    } else if a >= core + taper {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (a - core) / taper).cos())
    }
}

/// Tube bases of one direction, in rescaled units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledFamily {
    pub theta: f64,
    pub bases: Vec<[f64; 2]>,
}

/// One family per direction of the delta-net. Bases of each family come
/// from an independent random Cantor set of dimension s at level log2(1/delta),
/// thinned by extract_delta_s_set, scaled to [-1/(2 delta), 1/(2 delta)]^2 and
/// clipped to the disc of radius 1/(2 delta).
pub fn generate_families(curve: &Curve, delta: f64, s: f64, seed: u64) -> Result<Vec<RescaledFamily>> {
    let level = crate::dyadic::dyadic_level(delta)?;
    let inv = 1.0 / delta;
    lattice(curve, delta)
        .into_iter()
        .enumerate()
        .map(|(i, theta)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
            let cells = cantor_cells::<2>(s, level, CantorVariant::RandomSubset, &mut rng);
            let set = extract_delta_s_set(&cells, level, s)?;
            let bases = set
                .points
                .iter()
                .map(|p| [(p[0] - 0.5) * inv, (p[1] - 0.5) * inv])
                .filter(|b| b[0].hypot(b[1]) <= 0.5 * inv)
                .collect();
            Ok(RescaledFamily { theta, bases })
        })
        .collect()
}

/// Masked spectrum of one direction: entries where the P_theta mask is positive.
#[derive(Debug, Clone)]
pub struct SparseSpectrum {
    pub theta: f64,
    pub frame: Frame,
    pub idx: Vec<u32>,
    pub val: Vec<Complex64>,
}

impl SparseSpectrum {
    pub fn energy(&self, n: usize, h: f64) -> f64 {
        let l = n as f64 * h;
        self.val.iter().map(|c| c.norm_sqr()).sum::<f64>() * h.powi(6) / l.powi(3)
    }

    pub fn dense(&self, n: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; n * n * n];
        for (i, v) in self.idx.iter().zip(&self.val) {
            out[*i as usize] = *v;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub n: usize,
    pub h: f64,
    pub delta: f64,
    pub margin: f64,
    pub families: Vec<RescaledFamily>,
    pub spectra: Vec<SparseSpectrum>,
}

impl Synthesis {
    pub fn n_theta(&self) -> usize {
        self.families.len()
    }

    pub fn total_spectrum(&self) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.n * self.n * self.n];
        for s in &self.spectra {
            for (i, v) in s.idx.iter().zip(&s.val) {
                out[*i as usize] += v;
            }
        }
        out
    }

    /// f = sum over directions.
    pub fn field(&self) -> Result<GridFunction> {
        GridFunction::from_spectrum(self.n, self.h, self.total_spectrum())
    }

    pub fn theta_field(&self, i: usize) -> Result<GridFunction> {
        let s = self.spectra.get(i).ok_or_else(|| param("direction index out of range"))?;
        GridFunction::from_spectrum(self.n, self.h, s.dense(self.n))
    }

    pub fn theta_energies(&self) -> Vec<f64> {
        self.spectra.iter().map(|s| s.energy(self.n, self.h)).collect()
    }

    /// Indices of grid points inside the cores of the tubes of direction i.
    pub fn core_points(&self, i: usize) -> Vec<usize> {
        let fam = &self.families[i];
        let frame = &self.spectra[i].frame;
        let n = self.n;
        let half_len = 0.5 / self.delta;
        let mut out = Vec::new();
        for b in &fam.bases {
            raster_tube(n, self.h, frame, *b, 0.5, half_len, |idx, u| {
                if u[0].abs() <= half_len && u[1].abs() <= 0.5 && u[2].abs() <= 0.5 {
                    out.push(idx);
                }
            });
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Visits grid points within the box |u1| <= half_len, |u2|,|u3| <= half_w
/// around a tube (frame coordinates u relative to the tube centre). Cuts the
/// box into layers along the world axis closest to e1.
fn raster_tube<F: FnMut(usize, [f64; 3])>(n: usize, h: f64, f: &Frame, base: [f64; 2], half_w: f64, half_len: f64, mut visit: F) {
    let centre = f.e2 * base[0] + f.e3 * base[1];
    let a = f.e1;
    let d = (0..3).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
    let (o1, o2) = ((d + 1) % 3, (d + 2) % 3);
    let w: [f64; 3] = std::array::from_fn(|k| half_w * (f.e2[k].abs() + f.e3[k].abs()));
    let half = (n / 2) as f64;
    let to_idx = |x: f64| x / h + half;
    let clamp = |v: f64| v.max(0.0).min((n - 1) as f64);
    let zlo = centre[d] - half_len * a[d].abs() - w[d];
    let zhi = centre[d] + half_len * a[d].abs() + w[d];
    let (k0, k1) = (clamp(to_idx(zlo).ceil()) as usize, clamp(to_idx(zhi).floor()) as usize);
    for kd in k0..=k1 {
        let zc = (kd as f64 - half) * h;
        let ta = (zc - w[d] - centre[d]) / a[d];
        let tb = (zc + w[d] - centre[d]) / a[d];
        let (t0, t1) = (ta.min(tb).max(-half_len), ta.max(tb).min(half_len));
        if t0 > t1 {
            continue;
        }
        let range = |k: usize| {
            let (u, v) = (centre[k] + a[k] * t0, centre[k] + a[k] * t1);
            let (m0, m1) = (u.min(v) - w[k], u.max(v) + w[k]);
            (clamp(to_idx(m0).ceil()) as usize, clamp(to_idx(m1).floor()) as usize)
        };
        let (r1, r2) = (range(o1), range(o2));
        for i1 in r1.0..=r1.1 {
            for i2 in r2.0..=r2.1 {
                let mut c = [0usize; 3];
                c[d] = kd;
                c[o1] = i1;
                c[o2] = i2;
                let idx = (c[2] * n + c[1]) * n + c[0];
                let x = Vec3::new((c[0] as f64 - half) * h, (c[1] as f64 - half) * h, (c[2] as f64 - half) * h) - centre;
                let u = [x.dot(&f.e1), x.dot(&f.e2), x.dot(&f.e3)];
                if u[0].abs() <= half_len && u[1].abs() <= half_w && u[2].abs() <= half_w {
                    visit(idx, u);
                }
            }
        }
    }
}

/// f_theta = (sum of tube bumps) with its DFT multiplied by the P_theta mask
/// (taper `margin_cells` frequency cells wide). Needs n h >= 2/delta and
/// 1/delta <= n/4 (h <= 1/4 when n h = 2/delta... any h with both bounds).
pub fn synthesize_field(
    curve: &Curve,
    families: &[RescaledFamily],
    delta: f64,
    n: usize,
    h: f64,
    bump: BumpProfile,
    margin_cells: f64,
) -> Result<Synthesis> {
    check_grid(n, h)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param(format!("delta = {delta} outside (0, 1)")));
    }
    let l = n as f64 * h;
    if l < 2.0 / delta * (1.0 - 1e-12) || 1.0 / delta > n as f64 / 4.0 {
        return Err(param(format!(
            "grid n = {n}, h = {h} too small for delta = {delta} (need n h >= 2/delta and 1/delta <= n/4)"
        )));
    }
    let margin = margin_cells / l;
    let fft = Fft3::new(n);
    let spectra: Vec<SparseSpectrum> = families
        .par_iter()
        .map(|fam| {
            let frame = curve.frame(fam.theta)?;
            let mut data = vec![ZERO; n * n * n];
            let half_len = 0.5 / delta;
            let end = bump.end_taper / delta;
            for b in &fam.bases {
                raster_tube(
                    n,
                    h,
                    &frame,
                    *b,
                    0.5 + bump.cross_taper,
                    half_len + end,
                    |idx, u| {
                        data[idx].re += tukey(u[0], half_len, end)
                            * tukey(u[1], 0.5, bump.cross_taper)
                            * tukey(u[2], 0.5, bump.cross_taper);
                    },
                );
            }
            fft.forward(&mut data);
            let mask = FrequencyMask::slab(&frame, delta, margin);
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for (i, c) in data.iter().enumerate() {
                let m = mask.value(&frequency(n, h, i));
                if m > 0.0 {
                    idx.push(i as u32);
                    val.push(c * m);
                }
            }
            Ok(SparseSpectrum {
                theta: fam.theta,
                frame,
                idx,
                val,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Synthesis {
        n,
        h,
        delta,
        margin,
        families: families.to_vec(),
        spectra,
    })
}

/// Parts of the split, spatial side.
#[derive(Debug, Clone)]
pub struct Split {
    pub k: f64,
    pub lambdas: Vec<f64>,
    pub low: GridFunction,
    pub high: GridFunction,
    pub sqrt_delta: GridFunction,
    pub lambda_parts: Vec<(f64, GridFunction)>,
    /// max over frequency points of #{theta : the high mask of theta is positive there}.
    pub high_overlap: u32,
    /// Nonzero DFT entries found outside the dilated region of their part.
    pub support_violations: usize,
    pub theta_energy: f64,
    pub high_energy: f64,
}

impl Split {
    pub fn parts(&self) -> impl Iterator<Item = &GridFunction> {
        [&self.low, &self.high, &self.sqrt_delta]
            .into_iter()
            .chain(self.lambda_parts.iter().map(|(_, g)| g))
    }

    /// sup |f - sum of parts| / sup |f|.
    pub fn reconstruction_error(&self, f: &GridFunction) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..f.len() {
            let mut r = f.values[i];
            for p in self.parts() {
                r -= p.values[i];
            }
            worst = worst.max(r.norm());
        }
        let m = f.max_abs();
        if m > 0.0 {
            worst / m
        } else {
            worst
        }
    }

    /// int |f_high|^2 / (K^2 sum_theta int |f_theta|^2).
    pub fn high_l2_ratio(&self) -> Result<f64> {
        if self.theta_energy <= 0.0 {
            return Err(Error::Precondition("zero total energy".into()));
        }
        Ok(self.high_energy / (self.k * self.k * self.theta_energy))
    }

    /// int |f_high|^2 <= (max overlap) sum_theta int |f_theta|^2.
    pub fn energy_identity_holds(&self) -> bool {
        self.high_energy <= self.high_overlap as f64 * self.theta_energy * (1.0 + 1e-9)
    }
}

struct PartWeights {
    high: f64,
    low: f64,
    sqrt_delta: f64,
    bands: Vec<f64>,
}

/// Partition-of-unity weights from the frame coordinates (x2, x3).
fn part_weights(x2: f64, x3: f64, kinv: f64, lows: &[f64], tops: &[f64], w: f64) -> PartWeights {
    let (a2, a3) = (x2.abs(), x3.abs());
    let a = smooth_step(a2, kinv, w);
    let b = smooth_step(a3, kinv, w);
    let bands: Vec<f64> = lows
        .iter()
        .zip(tops)
        .map(|(&lo, &top)| b * (smooth_step(a2, lo, w) - smooth_step(a2, top, w)))
        .collect();
    let last = lows.last().copied().unwrap_or(kinv);
    PartWeights {
        high: a,
        low: (1.0 - a) * (1.0 - b),
        sqrt_delta: b * (1.0 - smooth_step(a2, last, w)),
        bands,
    }
}

/// Geometric check that a frequency point may carry a given part for some theta.
fn admissible(syn: &Synthesis, xi: &Vec3, part: usize, kinv: f64, lows: &[f64], tops: &[f64], w: f64) -> bool {
    syn.spectra.iter().any(|s| {
        let mask = FrequencyMask::slab(&s.frame, syn.delta, syn.margin);
        if mask.value(xi) <= 0.0 {
            return false;
        }
        let pw = part_weights(xi.dot(&s.frame.e2), xi.dot(&s.frame.e3), kinv, lows, tops, w);
        let v = match part {
            0 => pw.low,
            1 => pw.high,
            2 => pw.sqrt_delta,
            j => pw.bands[j - 3],
        };
        v != 0.0
    })
}

/// High part {|x2| >= 1/K}, low part {|x2|, |x3| <= 1/K}, lambda parts
/// {lambda/2 <= |x2| <= lambda, |x3| >= 1/K} for dyadic lambda in (sqrt delta, 1/K]
/// and the sqrt(delta) part {|x2| <= sqrt delta, |x3| >= 1/K}, each as smooth
/// steps two frequency cells wide centred on the nominal boundaries. When
/// 1/K < sqrt(delta) the lambda range is empty and the sqrt(delta) part
/// covers |x2| <= 1/K.
pub fn highlow_split(syn: &Synthesis, k: f64) -> Result<Split> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(param(format!("K = {k} must be >= 1")));
    }
    let n = syn.n;
    let l = n as f64 * syn.h;
    let w = 2.0 / l;
    let kinv = 1.0 / k;
    if kinv < w * (1.0 - 1e-12) {
        return Err(param(format!("1/K = {kinv} is below two frequency cells ({w})")));
    }
    let sq = syn.delta.sqrt();
    let lambdas = if kinv >= sq { dyadic_lambdas(syn.delta, k) } else { Vec::new() };
    let mut tops = Vec::new();
    let mut lows = Vec::new();
    let mut top = kinv;
    for &lam in &lambdas {
        let lo = (0.5 * lam).max(sq);
        tops.push(top);
        lows.push(lo);
        top = lo;
    }
    let size = n * n * n;
    let n_parts = 3 + lambdas.len();
    let mut dense: Vec<Vec<Complex64>> = (0..n_parts).map(|_| vec![ZERO; size]).collect();
    let mut overlap: Vec<u16> = vec![0; size];
    for s in &syn.spectra {
        for (&i, &v) in s.idx.iter().zip(&s.val) {
            let xi = frequency(n, syn.h, i as usize);
            let pw = part_weights(xi.dot(&s.frame.e2), xi.dot(&s.frame.e3), kinv, &lows, &tops, w);
            let i = i as usize;
            dense[0][i] += v * pw.low;
            dense[1][i] += v * pw.high;
            dense[2][i] += v * pw.sqrt_delta;
            for (j, b) in pw.bands.iter().enumerate() {
                dense[3 + j][i] += v * *b;
            }
            if pw.high > 0.0 {
                overlap[i] += 1;
            }
        }
    }
    let high_overlap = overlap.iter().copied().max().unwrap_or(0) as u32;
    drop(overlap);
    let mut support_violations = 0;
    for (p, arr) in dense.iter().enumerate() {
        let bad: usize = arr
            .par_iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .filter(|(i, _)| !admissible(syn, &frequency(n, syn.h, *i), p, kinv, &lows, &tops, w))
            .count();
        support_violations += bad;
    }
    let theta_energy: f64 = syn.theta_energies().iter().sum();
    let high_energy = spectral_energy(n, syn.h, &dense[1]);
    let mut fields = dense
        .into_iter()
        .map(|d| GridFunction::from_spectrum(n, syn.h, d).map(|mut g| {
            g.fourier = None;
            g
        }))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let low = fields.next().ok_or(Error::Empty("missing part"))?;
    let high = fields.next().ok_or(Error::Empty("missing part"))?;
    let sqrt_delta = fields.next().ok_or(Error::Empty("missing part"))?;
    let lambda_parts = lambdas.iter().copied().zip(fields).collect();
    Ok(Split {
        k,
        lambdas,
        low,
        high,
        sqrt_delta,
        lambda_parts,
        high_overlap,
        support_violations,
        theta_energy,
        high_energy,
    })
}

/// 8 K^{s-2} #Theta.
pub fn low_bound(k: f64, s: f64, n_theta: usize) -> f64 {
    8.0 * k.powf(s - 2.0) * n_theta as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub ratio: f64,
    pub sqrt_count_bound: f64,
    pub nonzero_planks: usize,
    pub norm6: f64,
}

/// ||f||_6 / (sum_sigma ||f_sigma||_6^2)^(1/2) where f_sigma keeps the DFT
/// entries listed in plank sigma. Planks must be disjoint and cover the support.
pub fn decoupling_ratio(n: usize, h: f64, spectrum: &[Complex64], planks: &[Vec<usize>]) -> Result<DecouplingReport> {
    check_grid(n, h)?;
    let size = n * n * n;
    if spectrum.len() != size {
        return Err(param("spectrum size does not match n^3"));
    }
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (p, set) in planks.iter().enumerate() {
        for &i in set {
            if i >= size {
                return Err(param("plank index out of range"));
            }
            if owner.insert(i, p).is_some() {
                return Err(Error::Precondition("planks overlap".into()));
            }
        }
    }
    let outside = spectrum
        .iter()
        .enumerate()
        .filter(|(i, c)| **c != ZERO && !owner.contains_key(i))
        .count();
    if outside > 0 {
        return Err(Error::Precondition(format!(
            "{outside} frequency entries lie outside the planks"
        )));
    }
    let fft = Fft3::new(n);
    let norm6 = |spec: Vec<Complex64>| -> f64 {
        let mut v = spec;
        fft.inverse(&mut v);
        let dv = h.powi(3);
        (v.iter().map(|c| c.norm_sqr().powi(3)).sum::<f64>() * dv).powf(1.0 / 6.0)
    };
    let total = norm6(spectrum.to_vec());
    let mut sum_sq = 0.0;
    let mut nonzero = 0;
    for set in planks {
        if set.iter().all(|&i| spectrum[i] == ZERO) {
            continue;
        }
        nonzero += 1;
        let mut part = vec![ZERO; size];
        for &i in set {
            part[i] = spectrum[i];
        }
        let m = norm6(part);
        sum_sq += m * m;
    }
    if sum_sq <= 0.0 {
        return Err(Error::Precondition("zero function".into()));
    }
    Ok(DecouplingReport {
        ratio: total / sum_sq.sqrt(),
        sqrt_count_bound: (nonzero as f64).sqrt(),
        nonzero_planks: nonzero,
        norm6: total,
    })
}

/// Lattice points of the grid's frequency cube within distance 1/r of the
/// cone {rho e3(t) : r_min <= rho <= 1}, split into `sectors` equal t-intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSectors {
    pub n: usize,
    pub h: f64,
    pub r: f64,
    pub planks: Vec<Vec<usize>>,
}

pub fn cone_sectors(curve: &Curve, n: usize, h: f64, r: f64, r_min: f64, sectors: usize) -> Result<ConeSectors> {
    check_grid(n, h)?;
    if !(r > 0.0) || sectors == 0 || !(r_min > 0.0 && r_min <= 1.0) {
        return Err(param("need r > 0, sectors >= 1 and r_min in (0, 1]"));
    }
    let (lo, hi) = curve.domain();
    let samples = 4096;
    let table: Vec<(f64, Vec3)> = (0..=samples)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / samples as f64;
            curve.frame(t).map(|f| (t, f.e3))
        })
        .collect::<Result<_>>()?;
    // bucket unit directions by a coarse 3-D grid
    let cell = 0.05;
    let key = |u: &Vec3| {
        (
            (u.x / cell).floor() as i64,
            (u.y / cell).floor() as i64,
            (u.z / cell).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, (_, e)) in table.iter().enumerate() {
        buckets.entry(key(e)).or_default().push(i);
    }
    let thick = 1.0 / r;
    let size = n * n * n;
    let hits: Vec<Option<(usize, usize)>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let xi = frequency(n, h, i);
            let m = xi.norm();
            if m < r_min - thick || m > 1.0 + thick || m == 0.0 {
                return None;
            }
            let u = xi / m;
            // angular reach: thickness / radius plus one bucket
            let reach = ((thick / m.max(r_min)) / cell).ceil() as i64 + 1;
            let (kx, ky, kz) = key(&u);
            let mut best: Option<(f64, usize)> = None;
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        if let Some(list) = buckets.get(&(kx + dx, ky + dy, kz + dz)) {
                            for &j in list {
                                let e = &table[j].1;
                                let rho = xi.dot(e).clamp(r_min, 1.0);
                                let d = (xi - e * rho).norm();
                                if best.map_or(true, |(b, _)| d < b) {
                                    best = Some((d, j));
                                }
                            }
                        }
                    }
                }
            }
            let (d, j) = best?;
            if d > thick {
                return None;
            }
            let t = table[j].0;
            let sec = (((t - lo) / (hi - lo)) * sectors as f64).floor() as usize;
            Some((i, sec.min(sectors - 1)))
        })
        .collect();
    let mut planks = vec![Vec::new(); sectors];
    for (i, s) in hits.into_iter().flatten() {
        planks[s].push(i);
    }
    Ok(ConeSectors { n, h, r, planks })
}

/// Unit-modulus random phases on the listed planks.
pub fn random_phase_spectrum(n: usize, planks: &[Vec<usize>], seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![ZERO; n * n * n];
    for set in planks {
        for &i in set {
            let ph: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            out[i] = Complex64::new(ph.cos(), ph.sin());
        }
    }
    out
}
