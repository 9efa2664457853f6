//! Experiment configuration: JSON in, validated parameter grid out.

use std::fmt;

use projlab_core::curve::CurveSpec;
use projlab_core::fractal::CantorVariant;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exceptional,
    Positivity,
    Incidence,
    Covering,
    Highlow,
    Decoupling,
    Marstrand2d,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Exceptional,
        Experiment::Positivity,
        Experiment::Incidence,
        Experiment::Covering,
        Experiment::Highlow,
        Experiment::Decoupling,
        Experiment::Marstrand2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exceptional => "exceptional",
            Experiment::Positivity => "positivity",
            Experiment::Incidence => "incidence",
            Experiment::Covering => "covering",
            Experiment::Highlow => "highlow",
            Experiment::Decoupling => "decoupling",
            Experiment::Marstrand2d => "marstrand2d",
        }
    }

    /// Swept parameters, in enumeration order (outermost first).
    pub fn params(self) -> &'static [Param] {
        use Param::*;
        match self {
            Experiment::Exceptional => &[Delta, Alpha, S],
            Experiment::Positivity => &[Delta, Alpha],
            Experiment::Incidence => &[Delta, S],
            Experiment::Covering => &[Delta, Alpha, Eps],
            Experiment::Highlow => &[Delta, K, S],
            Experiment::Decoupling => &[R],
            Experiment::Marstrand2d => &[Delta, A],
        }
    }

    /// Parameters that default when absent.
    pub fn default_value(self, p: Param) -> Option<f64> {
        match (self, p) {
            (Experiment::Positivity, Param::Alpha) => Some(2.5),
            _ => None,
        }
    }

    /// Finest and coarsest admissible dyadic level for delta (or R).
    pub fn level_range(self) -> (u32, u32) {
        match self {
            Experiment::Exceptional => (5, 12),
            Experiment::Positivity => (5, 10),
            Experiment::Incidence => (2, 10),
            Experiment::Covering => (2, 8),
            // spectral experiments: grid side 8/delta stays <= 512
            Experiment::Highlow => (2, 6),
            Experiment::Decoupling => (2, 8),
            Experiment::Marstrand2d => (2, 14),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "t")]
    T,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "eps")]
    Eps,
    #[serde(rename = "a")]
    A,
    #[serde(rename = "R")]
    R,
}

impl Param {
    pub fn key(self) -> &'static str {
        match self {
            Param::Delta => "delta",
            Param::Alpha => "alpha",
            Param::S => "s",
            Param::T => "t",
            Param::K => "K",
            Param::Eps => "eps",
            Param::A => "a",
            Param::R => "R",
        }
    }

    fn dyadic(self) -> bool {
        matches!(self, Param::Delta | Param::K | Param::R)
    }
}

/// A number, or a string "2^-k" / "2^k".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Scalar(pub f64);

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Scalar(v)),
            Raw::Str(s) => parse_power(&s)
                .map(Scalar)
                .ok_or_else(|| serde::de::Error::custom(format!("cannot read {s:?} as a number or 2^k"))),
        }
    }
}

fn parse_power(s: &str) -> Option<f64> {
    let e = s.trim().strip_prefix("2^")?;
    let e = e.trim_start_matches('(').trim_end_matches(')');
    let k: i32 = e.parse().ok()?;
    (k.abs() <= 60).then(|| 2f64.powi(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(Scalar),
    Many(Vec<Scalar>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v.0],
            OneOrMany::Many(v) => v.iter().map(|x| x.0).collect(),
        }
    }
}

/// Pass/fail thresholds; defaults match the acceptance targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// exceptional: E_dim <= bound + slack
    pub e_dim_slack: f64,
    /// exceptional: members have slope < s - tolerance
    pub slope_tolerance: f64,
    /// positivity: m_{delta/2} / m_delta lower bound
    pub positivity_ratio: f64,
    /// positivity: fraction of theta that must pass
    pub min_pass_fraction: f64,
    /// incidence: ratio cap
    pub incidence_cap: f64,
    /// incidence: heavy threshold #Theta / (ln 1/delta)^power
    pub heavy_power: f64,
    /// covering: exploratory lower bound on |W| / bound
    pub covering_min_ratio: f64,
    /// highlow: ||f_low||_inf <= c K^{s-2} #Theta
    pub low_constant: f64,
    /// highlow: sup-norm reconstruction tolerance
    pub reconstruction_tol: f64,
    /// decoupling: median ratio <= factor sqrt(#planks)
    pub decoupling_factor: f64,
    /// marstrand2d: s_min - a_meas lower bound
    pub gap_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            e_dim_slack: 0.2,
            slope_tolerance: projlab_core::dimension::DIM_TOLERANCE,
            positivity_ratio: projlab_core::dimension::POSITIVITY_RATIO,
            min_pass_fraction: 0.9,
            incidence_cap: 16.0,
            heavy_power: 2.0,
            covering_min_ratio: 0.0,
            low_constant: 8.0,
            reconstruction_tol: 1e-8,
            decoupling_factor: 0.5,
            gap_min: -0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Random Cantor cloud with the configured alpha.
    Cantor,
    /// Unit segments along gamma at `segments` evenly spaced grid directions.
    Segments,
    /// Uniform points in the unit ball.
    Ball,
}

/// Experiment-specific knobs; all optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub construction: Construction,
    pub variant: CantorVariant,
    /// exceptional: defaults to delta; positivity: defaults to 1/64
    pub theta_spacing: Option<f64>,
    /// coarsest level of box-count fits
    pub coarse_level: Option<u32>,
    pub segments: usize,
    pub ball_points: usize,
    /// decoupling: random-phase seeds per R
    pub n_seeds: usize,
    pub grid_n: usize,
    pub grid_h: f64,
    pub r_min: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            construction: Construction::Cantor,
            variant: CantorVariant::RandomSubset,
            theta_spacing: None,
            coarse_level: None,
            segments: 16,
            ball_points: 4_000_000,
            n_seeds: 20,
            grid_n: 128,
            grid_h: 56.0 / 128.0,
            r_min: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    #[serde(default)]
    curve: CurveSpec,
    delta: Option<OneOrMany>,
    alpha: Option<OneOrMany>,
    s: Option<OneOrMany>,
    t: Option<OneOrMany>,
    #[serde(rename = "K")]
    k: Option<OneOrMany>,
    eps: Option<OneOrMany>,
    a: Option<OneOrMany>,
    #[serde(rename = "R")]
    r: Option<OneOrMany>,
    #[serde(default)]
    seed: u64,
    threads: Option<usize>,
    output: Option<String>,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default)]
    options: Options,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub curve: CurveSpec,
    /// Value lists in `experiment.params()` order.
    pub grid: Vec<(Param, Vec<f64>)>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<String>,
    pub thresholds: Thresholds,
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.msg),
            None => write!(f, "config: {}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of the first occurrence of `"key"` followed by a colon.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.lines()
        .position(|l| {
            l.find(&pat)
                .is_some_and(|i| l[i + pat.len()..].trim_start().starts_with(':'))
        })
        .map(|i| i + 1)
}

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Combo {
    pub index: usize,
    pub values: Vec<(Param, f64)>,
}

impl Combo {
    pub fn get(&self, p: Param) -> f64 {
        self.values
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
            let full = e.to_string();
            // serde_json appends " at line L column C"; the line goes in front instead
            let msg = match full.rfind(" at line ") {
                Some(i) => format!("{} (column {})", &full[..i], e.column()),
                None => full,
            };
            ConfigError {
                line: (e.line() > 0).then_some(e.line()),
                msg,
            }
        })?;
        let err = |key: &str, msg: String| ConfigError {
            line: line_of_key(text, key),
            msg,
        };
        let exp = raw.experiment;
        let supplied: [(Param, &Option<OneOrMany>); 8] = [
            (Param::Delta, &raw.delta),
            (Param::Alpha, &raw.alpha),
            (Param::S, &raw.s),
            (Param::T, &raw.t),
            (Param::K, &raw.k),
            (Param::Eps, &raw.eps),
            (Param::A, &raw.a),
            (Param::R, &raw.r),
        ];
        for (p, v) in &supplied {
            if v.is_some() && !exp.params().contains(p) {
                return Err(err(
                    p.key(),
                    format!("parameter '{}' is not used by experiment '{exp}'", p.key()),
                ));
            }
        }
        let (lo, hi) = exp.level_range();
        let mut grid = Vec::new();
        for &p in exp.params() {
            let given = supplied.iter().find(|(q, _)| *q == p).and_then(|(_, v)| v.as_ref());
            let values = match (given, exp.default_value(p)) {
                (Some(v), _) => v.values(),
                (None, Some(d)) => vec![d],
                (None, None) => {
                    return Err(err(
                        "experiment",
                        format!("experiment '{exp}' needs parameter '{}'", p.key()),
                    ))
                }
            };
            for &v in &values {
                check_value(exp, p, v, lo, hi).map_err(|m| err(p.key(), m))?;
            }
            grid.push((p, values));
        }
        if raw.threads == Some(0) {
            return Err(err("threads", "threads must be >= 1".into()));
        }
        let t = &raw.thresholds;
        for (name, v) in [
            ("e_dim_slack", t.e_dim_slack),
            ("slope_tolerance", t.slope_tolerance),
            ("positivity_ratio", t.positivity_ratio),
            ("min_pass_fraction", t.min_pass_fraction),
            ("incidence_cap", t.incidence_cap),
            ("heavy_power", t.heavy_power),
            ("covering_min_ratio", t.covering_min_ratio),
            ("low_constant", t.low_constant),
            ("reconstruction_tol", t.reconstruction_tol),
            ("decoupling_factor", t.decoupling_factor),
            ("gap_min", t.gap_min),
        ] {
            if !v.is_finite() {
                return Err(err(name, format!("threshold {name} must be finite")));
            }
        }
        let o = &raw.options;
        if let Some(ts) = o.theta_spacing {
            if !(ts > 0.0 && ts <= 0.5) {
                return Err(err("theta_spacing", format!("theta_spacing = {ts} outside (0, 1/2]")));
            }
        }
        if o.coarse_level.is_some_and(|c| c > 8) {
            return Err(err("coarse_level", "coarse_level must be <= 8".into()));
        }
        if !(1..=4096).contains(&o.segments) {
            return Err(err("segments", "segments must be in 1..=4096".into()));
        }
        if !(1..=50_000_000).contains(&o.ball_points) {
            return Err(err("ball_points", "ball_points must be in 1..=5e7".into()));
        }
        if !(1..=1000).contains(&o.n_seeds) {
            return Err(err("n_seeds", "n_seeds must be in 1..=1000".into()));
        }
        if !(8..=256).contains(&o.grid_n) || !(o.grid_h > 0.0 && o.grid_h.is_finite()) {
            return Err(err("grid_n", "need grid_n in 8..=256 and grid_h > 0".into()));
        }
        if !(o.r_min > 0.0 && o.r_min <= 1.0) {
            return Err(err("r_min", "r_min must lie in (0, 1]".into()));
        }
        let allowed = match exp {
            Experiment::Exceptional => &[Construction::Cantor, Construction::Segments][..],
            Experiment::Positivity => &[Construction::Cantor, Construction::Ball][..],
            _ => &[Construction::Cantor][..],
        };
        if !allowed.contains(&o.construction) {
            return Err(err(
                "construction",
                format!("construction {:?} not available for '{exp}'", o.construction),
            ));
        }
        Ok(ExperimentConfig {
            experiment: exp,
            curve: raw.curve,
            grid,
            seed: raw.seed,
            threads: raw.threads,
            output: raw.output,
            thresholds: raw.thresholds,
            options: raw.options,
        })
    }

    /// Cartesian product of the value lists, first parameter outermost.
    pub fn combos(&self) -> Vec<Combo> {
        let mut out: Vec<Vec<(Param, f64)>> = vec![Vec::new()];
        for (p, vals) in &self.grid {
            out = out
                .iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push((*p, v));
                        c
                    })
                })
                .collect();
        }
        out.into_iter()
            .enumerate()
            .map(|(index, values)| Combo { index, values })
            .collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}

fn check_value(exp: Experiment, p: Param, v: f64, lo: u32, hi: u32) -> Result<(), String> {
    if !v.is_finite() {
        return Err(format!("{} = {v} is not finite", p.key()));
    }
    if p.dyadic() {
        let level = if p == Param::Delta { -v.log2() } else { v.log2() };
        if v.is_nan() || v <= 0.0 || (level - level.round()).abs() > 1e-9 {
            return Err(format!("{} = {v} is not a power of two", p.key()));
        }
        let level = level.round();
        let (lo, hi) = if p == Param::K { (0, 8) } else { (lo, hi) };
        if level < lo as f64 || level > hi as f64 {
            let range = if p == Param::Delta {
                format!("2^-{hi}..2^-{lo}")
            } else {
                format!("2^{lo}..2^{hi}")
            };
            return Err(format!("{} = {v} outside the feasible range {range} for '{exp}'", p.key()));
        }
        return Ok(());
    }
    let ok = match p {
        Param::Alpha => v > 0.0 && v <= 3.0,
        Param::S => (0.0..=3.0).contains(&v),
        Param::Eps => v > 0.0 && v < 1.0,
        Param::A => (0.0..=2.0).contains(&v),
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{} = {v} outside its domain", p.key()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_or_list_and_powers() {
        let c = ExperimentConfig::parse(r#"{"experiment":"marstrand2d","delta":["2^-5", 0.0625],"a":1,"seed":7}"#).unwrap();
        assert_eq!(c.grid[0].1, vec![1.0 / 32.0, 1.0 / 16.0]);
        assert_eq!(c.combos().len(), 2);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn errors_carry_lines() {
        let e = ExperimentConfig::parse("{\n \"experiment\": \"incidence\",\n \"delta\": 0.3,\n \"s\": 1\n}").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = ExperimentConfig::parse("{\n \"experiment\": \"incidence\",\n \"delta\": 0.25,\n \"s\": 1,,\n}").unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = ExperimentConfig::parse("{\"experiment\": \"highlow\", \"delta\": 0.25}").unwrap_err();
        assert!(e.msg.contains("'K'"));
        let e = ExperimentConfig::parse("{\"experiment\": \"decoupling\", \"R\": 64, \"bogus\": 1}").unwrap_err();
        assert!(e.msg.contains("bogus"));
    }

    #[test]
    fn sweep_order_and_empty_lists() {
        let c = ExperimentConfig::parse(r#"{"experiment":"highlow","delta":[0.0625,0.03125],"K":[8,16],"s":1}"#).unwrap();
        let v: Vec<(f64, f64)> = c.combos().iter().map(|c| (c.get(Param::Delta), c.get(Param::K))).collect();
        assert_eq!(v, vec![(0.0625, 8.0), (0.0625, 16.0), (0.03125, 8.0), (0.03125, 16.0)]);
        let c = ExperimentConfig::parse(r#"{"experiment":"incidence","delta":[],"s":1}"#).unwrap();
        assert!(c.combos().is_empty());
    }

    #[test]
    fn spectral_cap() {
        assert!(ExperimentConfig::parse(r#"{"experiment":"highlow","delta":"2^-7","K":8,"s":1}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"experiment":"highlow","delta":"2^-6","K":8,"s":1}"#).is_ok());
    }
}
