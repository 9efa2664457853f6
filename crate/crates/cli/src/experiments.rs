//! One function per experiment; each turns a parameter combination into
//! CSV rows, summary metrics and threshold checks.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use projlab_core::curve::Curve;
use projlab_core::dimension::{
    area_positivity_proxy, dim_fit, exceptional_dim_estimate, projection_profile, segment_points, theta_grid,
};
use projlab_core::dyadic::dyadic_level;
use projlab_core::fractal::{ball_cloud, cantor_cells, cantor_cloud, frostman_from_cloud, PointCloud};
use projlab_core::highlow::{
    cone_sectors, decoupling_ratio, generate_families, highlow_split, low_bound, random_phase_spectrum,
    synthesize_field, BumpProfile, GridFunction, Synthesis,
};
use projlab_core::incidence::{
    bush_configuration, family_multiplicity, heavy_cells, heavy_threshold, incidence_ratio, marstrand_2d_experiment,
    tube_covering_experiment,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Combo, Construction, Experiment, ExperimentConfig, Param};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// "<=" or ">="
    pub op: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn le(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.to_string(),
            value,
            op: "<=",
            threshold,
            pass: value <= threshold,
        }
    }

    fn ge(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.to_string(),
            value,
            op: ">=",
            threshold,
            pass: value >= threshold,
        }
    }
}

/// A raw field to dump: little-endian complex64 values on an n^3 grid of step h.
#[derive(Debug, Clone)]
pub struct FieldDump {
    pub n: usize,
    pub h: f64,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ComboResult {
    pub combo: Combo,
    pub rows: Vec<Vec<String>>,
    pub metrics: Map<String, Value>,
    pub checks: Vec<Check>,
    pub field: Option<FieldDump>,
}

impl ComboResult {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// CSV header for an experiment, parameter columns first.
pub fn header(exp: Experiment) -> Vec<&'static str> {
    let mut h: Vec<&'static str> = exp.params().iter().map(|p| p.key()).collect();
    h.extend_from_slice(match exp {
        Experiment::Exceptional => &["theta", "slope", "r2", "in_Es"][..],
        Experiment::Positivity => &["theta", "level", "m", "ratio", "pass"][..],
        Experiment::Incidence => &["n_theta", "n_tubes", "n_heavy", "threshold", "ratio", "pass"][..],
        Experiment::Covering => &["directions", "w_size", "bound", "ratio"][..],
        Experiment::Highlow => &[
            "n_theta",
            "max_flow",
            "bound",
            "l2_ratio",
            "l6_ratio",
            "reconstruction_error",
            "support_violations",
            "high_overlap",
            "energy_ok",
        ][..],
        Experiment::Decoupling => &["seed", "sectors", "nonzero_planks", "ratio", "sqrt_count_bound"][..],
        Experiment::Marstrand2d => &["a_meas", "s_min", "gap", "pass_fraction"][..],
    });
    h
}

/// One-line description of the CSV columns, for --list-experiments.
pub fn describe(exp: Experiment) -> &'static str {
    match exp {
        Experiment::Exceptional => {
            "per-theta box-count slope of the projected cloud; in_Es marks slope < s - tolerance; \
             summary has alpha_hat, E_dim and bound = max(1 + s - alpha_hat, 0)"
        }
        Experiment::Positivity => {
            "m_delta(theta) = #cells * delta^2 per level and the ratio to the previous level \
             (measure-stability proxy, not a proof of positive area)"
        }
        Experiment::Incidence => "bush configuration: heavy cells and #H #Theta delta^(1+s)",
        Experiment::Covering => "tube cover of a Frostman measure: |W| against the lower-bound expression",
        Experiment::Highlow => "high/low split of a synthesized tube field: sup of f_low against 8 K^(s-2) #Theta",
        Experiment::Decoupling => "random-phase L^6 decoupling ratio over cone sectors, one row per seed",
        Experiment::Marstrand2d => "measured dimension of a planar random Cantor set against the smallest passing s",
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn params_cols(c: &Combo) -> Vec<String> {
    c.values.iter().map(|(_, v)| f(*v)).collect()
}

/// Shared state across the combinations of one run.
#[derive(Default)]
pub struct RunCache {
    synth: Mutex<HashMap<(u64, u64), Arc<Synthesis>>>,
}

pub fn run_combo(cfg: &ExperimentConfig, curve: &Curve, combo: &Combo, dump: bool, cache: &RunCache) -> Result<ComboResult> {
    let r = match cfg.experiment {
        Experiment::Exceptional => exceptional(cfg, curve, combo),
        Experiment::Positivity => positivity(cfg, curve, combo),
        Experiment::Incidence => incidence(cfg, curve, combo),
        Experiment::Covering => covering(cfg, curve, combo),
        Experiment::Highlow => highlow(cfg, curve, combo, dump, cache),
        Experiment::Decoupling => decoupling(cfg, curve, combo, dump),
        Experiment::Marstrand2d => marstrand(cfg, combo),
    };
    r.with_context(|| {
        let p: Vec<String> = combo.values.iter().map(|(p, v)| format!("{}={v}", p.key())).collect();
        format!("{} [{}]", cfg.experiment, p.join(", "))
    })
}

fn result(combo: &Combo, rows: Vec<Vec<String>>, metrics: Value, checks: Vec<Check>) -> ComboResult {
    let Value::Object(metrics) = metrics else {
        unreachable!("metrics are built as objects")
    };
    ComboResult {
        combo: combo.clone(),
        rows,
        metrics,
        checks,
        field: None,
    }
}

fn segments_cloud(curve: &Curve, count: usize, delta: f64) -> Result<PointCloud> {
    let thetas = theta_grid(curve, delta)?;
    let stride = (thetas.len() / count).max(1);
    let mut pts = Vec::new();
    for (i, t) in thetas.iter().step_by(stride).take(count).enumerate() {
        let g = curve.point(*t)?;
        // bases spread over a small grid so the segments stay apart
        let a = [0.1 + 0.05 * (i % 16) as f64, 0.2 + 0.05 * (i / 16 % 16) as f64, 0.05 * (i % 4) as f64];
        let b = [a[0] + 0.5 * g.x, a[1] + 0.5 * g.y, a[2] + 0.5 * g.z];
        pts.extend(segment_points(a, b, delta / 4.0));
    }
    Ok(PointCloud::new(pts, 1.0, delta, "segments"))
}

fn exceptional(cfg: &ExperimentConfig, curve: &Curve, c: &Combo) -> Result<ComboResult> {
    let (delta, alpha, s) = (c.get(Param::Delta), c.get(Param::Alpha), c.get(Param::S));
    let level = dyadic_level(delta)?;
    let coarse = cfg.options.coarse_level.unwrap_or(2);
    anyhow::ensure!(level >= coarse + 2, "need at least 3 scales between coarse_level and delta");
    let (cloud, supplied) = match cfg.options.construction {
        Construction::Segments => (segments_cloud(curve, cfg.options.segments, delta)?, true),
        _ => (cantor_cloud(alpha, delta, cfg.seed, cfg.options.variant)?, false),
    };
    let measured = dim_fit(&cloud.points, coarse..=level)?.slope;
    // segments have known dimension; Cantor clouds use the measured slope
    let alpha_hat = if supplied { alpha } else { measured };
    let spacing = cfg.options.theta_spacing.unwrap_or(delta);
    let prof = projection_profile(&cloud, curve, spacing, coarse..=level)?;
    let tol = cfg.thresholds.slope_tolerance;
    let est = exceptional_dim_estimate(&prof, s, alpha_hat, tol)?;
    let members = prof.exceptional_indices(s, tol);
    let rows = prof
        .thetas
        .iter()
        .zip(&prof.fits)
        .enumerate()
        .map(|(i, (t, fit))| {
            let mut r = params_cols(c);
            r.extend([f(*t), f(fit.slope), f(fit.r2), u8::from(members.contains(&i)).to_string()]);
            r
        })
        .collect();
    let median = prof.median_slope();
    let checks = vec![Check::le("E_dim", est.e_dim, est.bound + cfg.thresholds.e_dim_slack)];
    let metrics = json!({
        "alpha_hat": alpha_hat,
        "measured_slope": measured,
        "s": s,
        "E_dim": est.e_dim,
        "bound": est.bound,
        "members": est.members.len(),
        "n_theta": prof.thetas.len(),
        "n_points": cloud.len(),
        "median_slope": median,
        "predicted_slope": alpha_hat.min(2.0),
        "pass": checks.iter().all(|c| c.pass),
    });
    Ok(result(c, rows, metrics, checks))
}

fn positivity(cfg: &ExperimentConfig, curve: &Curve, c: &Combo) -> Result<ComboResult> {
    let (delta, alpha) = (c.get(Param::Delta), c.get(Param::Alpha));
    let level = dyadic_level(delta)?;
    let coarse = cfg.options.coarse_level.unwrap_or(4);
    anyhow::ensure!(level > coarse, "delta must be finer than coarse_level");
    let (cloud, alpha_hat) = match cfg.options.construction {
        Construction::Ball => (ball_cloud(cfg.options.ball_points, 1.0, cfg.seed)?, 3.0),
        _ => {
            let cl = cantor_cloud(alpha, delta, cfg.seed, cfg.options.variant)?;
            let a = dim_fit(&cl.points, 2.min(coarse)..=level)?.slope;
            (cl, a)
        }
    };
    let thetas = theta_grid(curve, cfg.options.theta_spacing.unwrap_or(1.0 / 64.0))?;
    let levels: Vec<u32> = (coarse..=level).collect();
    let rep = area_positivity_proxy(&cloud, alpha_hat, curve, &thetas, &levels, cfg.thresholds.positivity_ratio)?;
    let mut rows = Vec::new();
    for row in &rep.rows {
        for (i, l) in levels.iter().enumerate() {
            let mut r = params_cols(c);
            let ratio = if i == 0 { String::new() } else { f(row.ratios[i - 1]) };
            r.extend([f(row.theta), l.to_string(), f(row.m[i]), ratio, u8::from(row.pass).to_string()]);
            rows.push(r);
        }
    }
    let min_m = rep.rows.iter().flat_map(|r| r.m.iter().copied()).fold(f64::INFINITY, f64::min);
    let max_m = rep.rows.iter().flat_map(|r| r.m.iter().copied()).fold(0.0, f64::max);
    let checks = vec![Check::ge("pass_fraction", rep.pass_fraction, cfg.thresholds.min_pass_fraction)];
    let metrics = json!({
        "proxy": "measure stability of m_delta(theta); a stand-in for positive projected area",
        "alpha_hat": alpha_hat,
        "n_points": cloud.len(),
        "n_theta": thetas.len(),
        "pass_fraction": rep.pass_fraction,
        "min_m": min_m,
        "max_m": max_m,
    });
    Ok(result(c, rows, metrics, checks))
}

fn incidence(cfg: &ExperimentConfig, curve: &Curve, c: &Combo) -> Result<ComboResult> {
    let (delta, s) = (c.get(Param::Delta), c.get(Param::S));
    let fams = bush_configuration(curve, delta, s)?;
    let n_theta = fams.len();
    let n_tubes: usize = fams.iter().map(|f| f.len()).sum();
    let mult = family_multiplicity(&fams, delta);
    let thr = heavy_threshold(n_theta, delta, cfg.thresholds.heavy_power);
    let heavy = heavy_cells(&mult, thr);
    let ratio = incidence_ratio(n_theta, heavy.len(), delta, s);
    let check = Check::le("ratio", ratio, cfg.thresholds.incidence_cap);
    let mut row = params_cols(c);
    row.extend([
        n_theta.to_string(),
        n_tubes.to_string(),
        heavy.len().to_string(),
        f(thr),
        f(ratio),
        u8::from(check.pass).to_string(),
    ]);
    let metrics = json!({
        "configuration": "bush",
        "n_theta": n_theta,
        "n_tubes": n_tubes,
        "n_heavy": heavy.len(),
        "threshold": thr,
        "ratio": ratio,
    });
    Ok(result(c, vec![row], metrics, vec![check]))
}

fn covering(cfg: &ExperimentConfig, curve: &Curve, c: &Combo) -> Result<ComboResult> {
    let (delta, alpha, eps) = (c.get(Param::Delta), c.get(Param::Alpha), c.get(Param::Eps));
    let cloud = cantor_cloud(alpha, delta, cfg.seed, cfg.options.variant)?;
    let mu = frostman_from_cloud(&cloud, alpha)?;
    let rep = tube_covering_experiment(&mu, curve, eps)?;
    let mut row = params_cols(c);
    row.extend([
        rep.directions.to_string(),
        rep.w_size.to_string(),
        f(rep.bound),
        f(rep.ratio),
    ]);
    let checks = vec![Check::ge("ratio", rep.ratio, cfg.thresholds.covering_min_ratio)];
    let metrics = json!({
        "exploratory": true,
        "directions": rep.directions,
        "w_size": rep.w_size,
        "bound": rep.bound,
        "ratio": rep.ratio,
    });
    Ok(result(c, vec![row], metrics, checks))
}

fn synthesis(cfg: &ExperimentConfig, curve: &Curve, delta: f64, s: f64, cache: &RunCache) -> Result<Arc<Synthesis>> {
    let key = (delta.to_bits(), s.to_bits());
    if let Some(v) = cache.synth.lock().expect("cache lock").get(&key) {
        return Ok(v.clone());
    }
    let fams = generate_families(curve, delta, s, cfg.seed)?;
    let n = (8.0 / delta).round() as usize;
    let syn = Arc::new(synthesize_field(curve, &fams, delta, n, 0.25, BumpProfile::default(), 2.0)?);
    cache.synth.lock().expect("cache lock").insert(key, syn.clone());
    Ok(syn)
}

fn highlow(cfg: &ExperimentConfig, curve: &Curve, c: &Combo, dump: bool, cache: &RunCache) -> Result<ComboResult> {
    let (delta, k, s) = (c.get(Param::Delta), c.get(Param::K), c.get(Param::S));
    let syn = synthesis(cfg, curve, delta, s, cache)?;
    let field = syn.field()?;
    let split = highlow_split(&syn, k)?;
    let max_low = split.low.max_abs();
    let bound = low_bound(k, s, syn.n_theta()) * cfg.thresholds.low_constant / 8.0;
    let recon = split.reconstruction_error(&field);
    let l2 = split.high_l2_ratio()?;
    let f6 = field.lp_norm(6.0, None)?;
    let l6 = if f6 > 0.0 { split.high.lp_norm(6.0, None)? / f6 } else { 0.0 };
    let energy_ok = split.energy_identity_holds();
    let mut row = params_cols(c);
    row.extend([
        syn.n_theta().to_string(),
        f(max_low),
        f(bound),
        f(l2),
        f(l6),
        f(recon),
        split.support_violations.to_string(),
        split.high_overlap.to_string(),
        u8::from(energy_ok).to_string(),
    ]);
    let checks = vec![
        Check::le("max_flow", max_low, bound),
        Check::le("reconstruction_error", recon, cfg.thresholds.reconstruction_tol),
        Check::le("support_violations", split.support_violations as f64, 0.0),
        Check::le(
            "high_energy",
            split.high_energy,
            split.high_overlap as f64 * split.theta_energy * (1.0 + 1e-9),
        ),
    ];
    let metrics = json!({
        "n": syn.n,
        "h": syn.h,
        "n_theta": syn.n_theta(),
        "lambdas": split.lambdas,
        "max_flow": max_low,
        "bound": bound,
        "l2_ratio": l2,
        "l6_ratio": l6,
        "reconstruction_error": recon,
        "support_violations": split.support_violations,
        "high_overlap": split.high_overlap,
        "high_energy": split.high_energy,
        "theta_energy": split.theta_energy,
    });
    let mut r = result(c, vec![row], metrics, checks);
    if dump {
        r.field = Some(FieldDump {
            n: field.n,
            h: field.h,
            bytes: field.to_le_bytes(),
        });
    }
    Ok(r)
}

fn decoupling(cfg: &ExperimentConfig, curve: &Curve, c: &Combo, dump: bool) -> Result<ComboResult> {
    let big_r = c.get(Param::R);
    let o = &cfg.options;
    let arc = if curve.is_arclength() {
        curve.clone()
    } else {
        curve.reparametrize_arclength()?
    };
    let sectors = (2.0 * big_r.sqrt()).round().max(1.0) as usize;
    let cs = cone_sectors(&arc, o.grid_n, o.grid_h, big_r, o.r_min, sectors)?;
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    let mut nonzero = 0;
    for i in 0..o.n_seeds {
        let seed = cfg.seed.wrapping_add(i as u64);
        let spec = random_phase_spectrum(o.grid_n, &cs.planks, seed);
        let rep = decoupling_ratio(o.grid_n, o.grid_h, &spec, &cs.planks)?;
        nonzero = rep.nonzero_planks;
        let mut r = params_cols(c);
        r.extend([
            seed.to_string(),
            sectors.to_string(),
            rep.nonzero_planks.to_string(),
            f(rep.ratio),
            f(rep.sqrt_count_bound),
        ]);
        rows.push(r);
        ratios.push(rep.ratio);
    }
    let median = median(&ratios);
    let checks = vec![Check::le(
        "median_ratio",
        median,
        cfg.thresholds.decoupling_factor * (nonzero as f64).sqrt(),
    )];
    let metrics = json!({
        "sectors": sectors,
        "nonzero_planks": nonzero,
        "plank_sizes": cs.planks.iter().map(|p| p.len()).collect::<Vec<_>>(),
        "median_ratio": median,
        "min_ratio": ratios.iter().copied().fold(f64::INFINITY, f64::min),
        "max_ratio": ratios.iter().copied().fold(0.0, f64::max),
    });
    let mut res = result(c, rows, metrics, checks);
    if dump {
        let spec = random_phase_spectrum(o.grid_n, &cs.planks, cfg.seed);
        let g = GridFunction::from_spectrum(o.grid_n, o.grid_h, spec)?;
        res.field = Some(FieldDump {
            n: g.n,
            h: g.h,
            bytes: g.to_le_bytes(),
        });
    }
    Ok(res)
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn marstrand(cfg: &ExperimentConfig, c: &Combo) -> Result<ComboResult> {
    let (delta, a) = (c.get(Param::Delta), c.get(Param::A));
    let level = dyadic_level(delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cells = cantor_cells::<2>(a, level, cfg.options.variant, &mut rng);
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
    let rep = marstrand_2d_experiment(&cells, level, &grid)?;
    let mut row = params_cols(c);
    let frac_at_min = rep
        .pass_fraction
        .iter()
        .find(|(s, _)| *s == rep.s_min)
        .map_or(f64::NAN, |(_, p)| *p);
    row.extend([f(rep.a_meas), f(rep.s_min), f(rep.gap), f(frac_at_min)]);
    let checks = vec![Check::ge("gap", rep.gap, cfg.thresholds.gap_min)];
    let metrics = json!({
        "n_cells": cells.len(),
        "n_directions": lattice_len(delta),
        "a_meas": rep.a_meas,
        "s_min": rep.s_min,
        "gap": rep.gap,
        "pass_fraction": rep.pass_fraction,
    });
    Ok(result(c, vec![row], metrics, checks))
}

fn lattice_len(delta: f64) -> usize {
    (std::f64::consts::PI / delta).floor() as usize + 1
}
