//! Run configuration: a flat `key = value` format with `[section]` headers,
//! chosen for diff-ability and zero-dependency parsing. Unknown keys are
//! rejected; defaults are applied and echoed back out so a run directory
//! always records its effective configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::interp::InterpScheme;
use crate::scenario::ScenarioSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// K = 0: deterministic dynamics.
    None,
    /// Divergence-free trigonometric basis from the lowest modes.
    Fourier {
        k: usize,
        decay: f64,
        /// Optional explicit amplitude override, length K.
        amplitudes: Option<Vec<f64>>,
    },
    /// A single constant field (its amplitude is the vector length).
    Constant { vector: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Master seed: Wiener paths, member streams and the basis derive from
    /// it through the documented splitting rule.
    pub seed: u64,
    /// Wiener path refinement: the path grid is `dt_flow / refine`.
    pub refine: usize,
}

impl NoiseSpec {
    pub fn k(&self) -> usize {
        match &self.kind {
            NoiseKind::None => 0,
            NoiseKind::Fourier { k, .. } => *k,
            NoiseKind::Constant { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub resolution: usize,
    pub dt_flow: f64,
    pub window_length: f64,
    pub horizon: f64,
    pub picard_tol: f64,
    pub max_iter: usize,
    pub guard_threshold: f64,
    pub holder_l: usize,
    pub holder_alpha: f64,
    pub ensemble: usize,
    /// Explicit per-member seeds (defaults to `seed + i`).
    pub member_seeds: Option<Vec<u64>>,
    pub snapshot_stride: usize,
    pub output_dir: PathBuf,
    pub interp: InterpScheme,
    /// Growth-rate threshold for flagging the ∇A tracker (heuristic).
    pub grad_a_flag_rate: f64,
    pub scenario: ScenarioSpec,
    pub noise: NoiseSpec,
}

impl RunConfig {
    /// Window length in flow steps (nearest, at least one).
    pub fn window_steps(&self) -> usize {
        ((self.window_length / self.dt_flow).round() as usize).max(1)
    }

    /// Horizon in flow steps (nearest, at least one window).
    pub fn horizon_steps(&self) -> usize {
        ((self.horizon / self.dt_flow).round() as usize).max(self.window_steps())
    }

    pub fn member_seed(&self, member: usize) -> u64 {
        match &self.member_seeds {
            Some(seeds) => seeds[member],
            None => self.noise.seed.wrapping_add(member as u64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 || !self.resolution.is_power_of_two() {
            return Err(Error::Config(format!(
                "run.resolution must be a power of two >= 8, got {}",
                self.resolution
            )));
        }
        if !(self.dt_flow > 0.0) {
            return Err(Error::Config(format!(
                "run.dt_flow must be positive, got {}",
                self.dt_flow
            )));
        }
        if !(0.0 < self.holder_alpha && self.holder_alpha < 1.0) {
            return Err(Error::Config(format!(
                "run.holder_alpha must lie in (0,1), got {}",
                self.holder_alpha
            )));
        }
        if self.holder_l + 1 > crate::holder::DEFAULT_MAX_DERIVATIVE_ORDER {
            return Err(Error::Config(format!(
                "run.holder_l must be at most {}, got {}",
                crate::holder::DEFAULT_MAX_DERIVATIVE_ORDER - 1,
                self.holder_l
            )));
        }
        if !(self.window_length > 0.0 && self.horizon >= self.window_length) {
            return Err(Error::Config(format!(
                "need run.horizon >= run.window_length > 0, got horizon {} and window {}",
                self.horizon, self.window_length
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config("run.picard_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("run.max_iter must be at least 1".into()));
        }
        if self.ensemble == 0 {
            return Err(Error::Config("run.ensemble must be at least 1".into()));
        }
        if self.noise.refine == 0 {
            return Err(Error::Config("noise.refine must be at least 1".into()));
        }
        if let Some(seeds) = &self.member_seeds {
            if seeds.len() != self.ensemble {
                return Err(Error::Config(format!(
                    "run.member_seeds lists {} seeds for {} members",
                    seeds.len(),
                    self.ensemble
                )));
            }
        }
        // Duplicate member seeds would silently duplicate realizations.
        let mut seen = std::collections::BTreeSet::new();
        for m in 0..self.ensemble {
            if !seen.insert(self.member_seed(m)) {
                return Err(Error::Config(format!(
                    "duplicate member seed {} (members must be independent realizations)",
                    self.member_seed(m)
                )));
            }
        }
        if let NoiseKind::Fourier { k, amplitudes, .. } = &self.noise.kind {
            if let Some(a) = amplitudes {
                if a.len() != *k {
                    return Err(Error::Config(format!(
                        "noise.amplitudes lists {} values for k = {k}",
                        a.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Effective configuration, in the same format `parse_config` accepts.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str("[run]\n");
        out.push_str(&format!("resolution = {}\n", self.resolution));
        out.push_str(&format!("dt_flow = {}\n", self.dt_flow));
        out.push_str(&format!("window_length = {}\n", self.window_length));
        out.push_str(&format!("horizon = {}\n", self.horizon));
        out.push_str(&format!("picard_tol = {}\n", self.picard_tol));
        out.push_str(&format!("max_iter = {}\n", self.max_iter));
        out.push_str(&format!("guard_threshold = {}\n", self.guard_threshold));
        out.push_str(&format!("holder_l = {}\n", self.holder_l));
        out.push_str(&format!("holder_alpha = {}\n", self.holder_alpha));
        out.push_str(&format!("ensemble = {}\n", self.ensemble));
        if let Some(seeds) = &self.member_seeds {
            let list: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!("member_seeds = {}\n", list.join(",")));
        }
        out.push_str(&format!("snapshot_stride = {}\n", self.snapshot_stride));
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        out.push_str(&format!(
            "interp = {}\n",
            match self.interp {
                InterpScheme::Tricubic => "tricubic",
                InterpScheme::Spectral => "spectral",
            }
        ));
        out.push_str(&format!("grad_a_flag_rate = {}\n", self.grad_a_flag_rate));
        out.push('\n');
        out.push_str("[scenario]\n");
        match &self.scenario {
            ScenarioSpec::Abc { a, b, c } => {
                out.push_str("name = abc\n");
                out.push_str(&format!("amp_a = {a}\namp_b = {b}\namp_c = {c}\n"));
            }
            ScenarioSpec::TaylorGreen { amplitude } => {
                out.push_str("name = taylor-green\n");
                out.push_str(&format!("amplitude = {amplitude}\n"));
            }
            ScenarioSpec::Shear { amplitude } => {
                out.push_str("name = shear\n");
                out.push_str(&format!("amplitude = {amplitude}\n"));
            }
            ScenarioSpec::RandomBandLimited {
                kmax,
                slope,
                seed,
                amplitude,
            } => {
                out.push_str("name = random\n");
                out.push_str(&format!(
                    "kmax = {kmax}\nslope = {slope}\nseed = {seed}\namplitude = {amplitude}\n"
                ));
            }
        }
        out.push('\n');
        out.push_str("[noise]\n");
        match &self.noise.kind {
            NoiseKind::None => out.push_str("kind = none\n"),
            NoiseKind::Fourier { k, decay, amplitudes } => {
                out.push_str("kind = fourier\n");
                out.push_str(&format!("k = {k}\ndecay = {decay}\n"));
                if let Some(a) = amplitudes {
                    let list: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                    out.push_str(&format!("amplitudes = {}\n", list.join(",")));
                }
            }
            NoiseKind::Constant { vector } => {
                out.push_str("kind = constant\n");
                out.push_str(&format!(
                    "vector = {},{},{}\n",
                    vector[0], vector[1], vector[2]
                ));
            }
        }
        out.push_str(&format!("seed = {}\n", self.noise.seed));
        out.push_str(&format!("refine = {}\n", self.noise.refine));
        out
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Config(format!(
                    "line {}: malformed section header '{raw}'",
                    lineno + 1
                )));
            }
            current = line[1..line.len() - 1].trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            )));
        };
        if current.is_empty() {
            return Err(Error::Config(format!(
                "line {}: key outside any [section]",
                lineno + 1
            )));
        }
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        let section = sections.entry(current.clone()).or_default();
        if section.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key '{key}' in section [{current}]",
                lineno + 1
            )));
        }
    }
    Ok(sections)
}

struct Section {
    name: String,
    entries: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl Section {
    fn new(name: &str, entries: Option<BTreeMap<String, String>>) -> Self {
        Self {
            name: name.to_string(),
            entries: entries.unwrap_or_default(),
            used: Default::default(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!(
                    "{}.{key}: cannot parse '{v}' as {}",
                    self.name,
                    std::any::type_name::<T>()
                ))
            }),
        }
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("missing required key {}.{key}", self.name)))
    }

    fn finish(self) -> Result<()> {
        for key in self.entries.keys() {
            if !self.used.contains(key) {
                return Err(Error::Config(format!(
                    "unknown key '{key}' in section [{}]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn parse_list<T: std::str::FromStr>(section: &str, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{section}.{key}: bad list entry '{s}'")))
        })
        .collect()
}

/// Parse and validate a configuration; all defaults applied.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut sections = parse_sections(text)?;
    let known = ["run", "scenario", "noise"];
    for name in sections.keys() {
        if !known.contains(&name.as_str()) {
            return Err(Error::Config(format!("unknown section [{name}]")));
        }
    }

    let mut run = Section::new("run", sections.remove("run"));
    let resolution = run.parse("resolution", 32usize)?;
    let dt_flow = run.parse("dt_flow", 1.0 / 512.0)?;
    let window_length = run.parse("window_length", 0.05)?;
    let horizon = run.parse("horizon", window_length)?;
    let picard_tol = run.parse("picard_tol", 1e-6)?;
    let max_iter = run.parse("max_iter", 25usize)?;
    let guard_threshold = run.parse("guard_threshold", 1.0)?;
    let holder_l = run.parse("holder_l", 1usize)?;
    let holder_alpha = run.parse("holder_alpha", 0.5)?;
    let ensemble = run.parse("ensemble", 1usize)?;
    let member_seeds = match run.raw("member_seeds") {
        Some(v) => Some(parse_list("run", "member_seeds", &v)?),
        None => None,
    };
    let snapshot_stride = run.parse("snapshot_stride", 0usize)?;
    let output_dir = PathBuf::from(run.parse("output_dir", "out".to_string())?);
    let interp = match run.parse("interp", "tricubic".to_string())?.as_str() {
        "tricubic" => InterpScheme::Tricubic,
        "spectral" => InterpScheme::Spectral,
        other => {
            return Err(Error::Config(format!(
                "run.interp must be 'tricubic' or 'spectral', got '{other}'"
            )))
        }
    };
    let grad_a_flag_rate = run.parse("grad_a_flag_rate", 25.0)?;
    run.finish()?;

    let mut sc = Section::new("scenario", sections.remove("scenario"));
    let scenario = match sc.require("name")?.as_str() {
        "abc" => ScenarioSpec::Abc {
            a: sc.parse("amp_a", 1.0)?,
            b: sc.parse("amp_b", 1.0)?,
            c: sc.parse("amp_c", 1.0)?,
        },
        "taylor-green" => ScenarioSpec::TaylorGreen {
            amplitude: sc.parse("amplitude", 1.0)?,
        },
        "shear" => ScenarioSpec::Shear {
            amplitude: sc.parse("amplitude", 1.0)?,
        },
        "random" => ScenarioSpec::RandomBandLimited {
            kmax: sc.parse("kmax", 3usize)?,
            slope: sc.parse("slope", 1.5)?,
            seed: sc.parse("seed", 1u64)?,
            amplitude: sc.parse("amplitude", 1.0)?,
        },
        other => {
            return Err(Error::Config(format!(
                "scenario.name '{other}' is not one of abc, taylor-green, shear, random"
            )))
        }
    };
    sc.finish()?;

    let mut no = Section::new("noise", sections.remove("noise"));
    let kind = match no.parse("kind", "none".to_string())?.as_str() {
        "none" => NoiseKind::None,
        "fourier" => NoiseKind::Fourier {
            k: no.parse("k", 6usize)?,
            decay: no.parse("decay", 2.0)?,
            amplitudes: match no.raw("amplitudes") {
                Some(v) => Some(parse_list("noise", "amplitudes", &v)?),
                None => None,
            },
        },
        "constant" => {
            let v = no.require("vector")?;
            let parts: Vec<f64> = parse_list("noise", "vector", &v)?;
            if parts.len() != 3 {
                return Err(Error::Config(
                    "noise.vector needs exactly three components".into(),
                ));
            }
            NoiseKind::Constant {
                vector: [parts[0], parts[1], parts[2]],
            }
        }
        other => {
            return Err(Error::Config(format!(
                "noise.kind '{other}' is not one of none, fourier, constant"
            )))
        }
    };
    let seed = no.parse("seed", 0u64)?;
    let refine = no.parse("refine", 1usize)?;
    no.finish()?;

    let cfg = RunConfig {
        resolution,
        dt_flow,
        window_length,
        horizon,
        picard_tol,
        max_iter,
        guard_threshold,
        holder_l,
        holder_alpha,
        ensemble,
        member_seeds,
        snapshot_stride,
        output_dir,
        interp,
        grad_a_flag_rate,
        scenario,
        noise: NoiseSpec { kind, seed, refine },
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg = parse_config("[scenario]\nname = abc\n").unwrap();
        assert_eq!(cfg.resolution, 32);
        assert!((cfg.dt_flow - 1.0 / 512.0).abs() < 1e-18);
        assert!((cfg.window_length - 0.05).abs() < 1e-15);
        assert!((cfg.holder_alpha - 0.5).abs() < 1e-15);
        assert_eq!(cfg.holder_l, 1);
        assert_eq!(cfg.ensemble, 1);
        assert_eq!(cfg.noise.kind, NoiseKind::None);
        assert_eq!(cfg.window_steps(), 26); // round(0.05 * 512)
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        let err = parse_config("[scenario]\nname = abc\n[run]\nholder_alpha = 1.2\n").unwrap_err();
        assert!(err.to_string().contains("holder_alpha"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = parse_config("[scenario]\nname = abc\n[run]\nviscosity = 0.01\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("viscosity") && msg.contains("[run]"), "{msg}");
    }

    #[test]
    fn duplicate_keys_and_bad_sections_are_rejected() {
        assert!(parse_config("[run]\nresolution = 32\nresolution = 64\n").is_err());
        assert!(parse_config("[physics]\ngravity = 9.8\n").is_err());
        assert!(parse_config("resolution = 32\n").is_err());
    }

    #[test]
    fn duplicate_member_seeds_are_rejected() {
        let err = parse_config(
            "[scenario]\nname = abc\n[run]\nensemble = 2\nmember_seeds = 7,7\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate member seed"), "{err}");
        // Default seed+i never collides.
        let ok = parse_config("[scenario]\nname = abc\n[run]\nensemble = 4\n").unwrap();
        assert_eq!(ok.member_seed(0), ok.noise.seed);
        assert_eq!(ok.member_seed(3), ok.noise.seed + 3);
    }

    #[test]
    fn echo_round_trips() {
        let text = "\n[run]\nresolution = 16\nhorizon = 0.1\nensemble = 2\n\
                    [scenario]\nname = taylor-green\namplitude = 0.8\n\
                    [noise]\nkind = constant\nvector = 0,0,0.5\nseed = 9\n";
        let cfg = parse_config(text).unwrap();
        let echoed = parse_config(&cfg.echo()).unwrap();
        assert_eq!(cfg, echoed);
    }

    #[test]
    fn constant_noise_needs_three_components() {
        let err = parse_config(
            "[scenario]\nname = abc\n[noise]\nkind = constant\nvector = 1,2\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("three components"), "{err}");
    }

    #[test]
    fn resolution_must_be_power_of_two() {
        let err = parse_config("[scenario]\nname = abc\n[run]\nresolution = 20\n").unwrap_err();
        assert!(err.to_string().contains("power of two"), "{err}");
    }
}
