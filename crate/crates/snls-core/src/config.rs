//! Flat `key = value` run configuration with dotted namespaces.
//!
//! Every experiment in the repository is driven by one of these documents.
//! Parsing fills defaults, records which keys were defaulted, and rejects
//! unknown or duplicate keys with line-precise diagnostics. Serialization
//! emits keys in sorted order so a parse -> serialize -> parse round trip
//! is the identity on the configured values.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::error::Error;
use crate::grid::Grid;
use crate::integrator::SimParams;
use crate::noise::NoiseSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: `{key}`: cannot parse `{value}` as {want}")]
    BadValue { line: usize, key: String, value: String, want: &'static str },
    #[error("`{key}`{place}: {reason}")]
    Invalid { key: String, place: String, reason: String },
    #[error("missing required key `{key}`")]
    Missing { key: &'static str },
}

/// Whether a key was given in the document or filled from the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Explicit,
    Defaulted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Experiment {
    Simulate,
    Ensemble,
    Groundstate,
    BlowupScan,
    Threshold,
    RescaleCheck,
    ExpMoment,
    ContDep,
    DampingSweep,
}

pub const EXPERIMENT_NAMES: [(&str, Experiment); 9] = [
    ("simulate", Experiment::Simulate),
    ("ensemble", Experiment::Ensemble),
    ("groundstate", Experiment::Groundstate),
    ("blowup-scan", Experiment::BlowupScan),
    ("threshold", Experiment::Threshold),
    ("rescale-check", Experiment::RescaleCheck),
    ("exp-moment", Experiment::ExpMoment),
    ("cont-dep", Experiment::ContDep),
    ("damping-sweep", Experiment::DampingSweep),
];

impl Experiment {
    pub fn as_str(self) -> &'static str {
        EXPERIMENT_NAMES
            .iter()
            .find(|(_, e)| *e == self)
            .map(|(name, _)| *name)
            .unwrap()
    }
}

impl FromStr for Experiment {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        EXPERIMENT_NAMES
            .iter()
            .find(|(name, _)| *name == s)
            .map(|(_, e)| *e)
            .ok_or(())
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Zero,
    Gaussian,
    Groundstate,
}

impl InitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InitKind::Zero => "zero",
            InitKind::Gaussian => "gaussian",
            InitKind::Groundstate => "groundstate",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseConfig {
    pub modes: usize,
    pub gamma: f64,
    pub decay: f64,
    pub space_independent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitConfig {
    pub kind: InitKind,
    pub scale: f64,
    pub width: f64,
    pub chirp: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanConfig {
    pub damping: Vec<f64>,
    pub sigma: Vec<f64>,
    pub fq: Vec<f64>,
    pub tmax: f64,
}

/// A fully validated run configuration with defaults filled in.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: Option<String>,
    pub grid: GridConfig,
    pub sim: SimParams,
    pub noise: NoiseConfig,
    pub init: InitConfig,
    /// Trajectory count for ensemble-style experiments.
    pub trajectories: usize,
    /// Exponential-moment rate; `None` derives the proof's lower bound.
    pub alpha: Option<f64>,
    /// Ground-state multiples tried by the threshold experiment.
    pub threshold_scales: Vec<f64>,
    /// Perturbation sizes tried by the continuous-dependence experiment.
    pub contdep_epsilons: Vec<f64>,
    /// Damping rates swept by the damping-sweep experiment.
    pub damping_values: Vec<f64>,
    pub scan: ScanConfig,
    /// Step sizes, coarsest first, tried by the rescale-check experiment.
    pub rescale_dts: Vec<f64>,
    pub provenance: BTreeMap<String, Provenance>,
}

impl PartialEq for RunConfig {
    /// Compares configured values; provenance is bookkeeping, not content.
    fn eq(&self, other: &Self) -> bool {
        self.to_text() == other.to_text()
    }
}

const KEYS: [&str; 33] = [
    "experiment",
    "seed",
    "output_dir",
    "grid.dim",
    "grid.half_width",
    "grid.points",
    "sim.sigma",
    "sim.lambda",
    "sim.damping",
    "sim.dt",
    "sim.horizon",
    "sim.log_every",
    "sim.blowup_factor",
    "sim.boundary_tol",
    "sim.dealias",
    "noise.modes",
    "noise.gamma",
    "noise.decay",
    "noise.space_independent",
    "init.kind",
    "init.scale",
    "init.width",
    "init.chirp",
    "ensemble.trajectories",
    "expmoment.alpha",
    "threshold.scales",
    "contdep.epsilons",
    "damping.values",
    "scan.damping",
    "scan.sigma",
    "scan.fq",
    "scan.tmax",
    "rescale.dts",
];

struct RawDoc {
    entries: BTreeMap<String, (usize, String)>,
    provenance: BTreeMap<String, Provenance>,
    lines: BTreeMap<String, usize>,
}

impl RawDoc {
    fn read(text: &str) -> Result<RawDoc, ConfigError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some(eq) = stripped.find('=') else {
                return Err(ConfigError::Syntax { line, text: stripped.to_string() });
            };
            let key = stripped[..eq].trim();
            let value = stripped[eq + 1..].trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if let Some((first, _)) = entries.get(key) {
                return Err(ConfigError::Duplicate { line, key: key.to_string(), first: *first });
            }
            entries.insert(key.to_string(), (line, value.to_string()));
        }
        Ok(RawDoc { entries, provenance: BTreeMap::new(), lines: BTreeMap::new() })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        let found = self.entries.remove(key);
        let tag = if found.is_some() { Provenance::Explicit } else { Provenance::Defaulted };
        self.provenance.insert(key.to_string(), tag);
        if let Some((line, _)) = &found {
            self.lines.insert(key.to_string(), *line);
        }
        found
    }

    fn parse_with<T>(
        &mut self,
        key: &'static str,
        default: T,
        want: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => parse(&value).ok_or(ConfigError::BadValue {
                line,
                key: key.to_string(),
                value,
                want,
            }),
        }
    }

    fn f64(&mut self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        self.parse_with(key, default, "a number", |v| v.parse().ok())
    }

    fn usize(&mut self, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        self.parse_with(key, default, "a nonnegative integer", |v| v.parse().ok())
    }

    fn u64(&mut self, key: &'static str, default: u64) -> Result<u64, ConfigError> {
        self.parse_with(key, default, "a nonnegative integer", |v| v.parse().ok())
    }

    fn bool(&mut self, key: &'static str, default: bool) -> Result<bool, ConfigError> {
        self.parse_with(key, default, "true or false", |v| v.parse().ok())
    }

    fn list(&mut self, key: &'static str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        self.parse_with(key, default.to_vec(), "a comma-separated list of numbers", |v| {
            v.split(',').map(|part| part.trim().parse().ok()).collect()
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut doc = RawDoc::read(text)?;

        let experiment = match doc.take("experiment") {
            None => return Err(ConfigError::Missing { key: "experiment" }),
            Some((line, value)) => {
                Experiment::from_str(&value).map_err(|_| ConfigError::BadValue {
                    line,
                    key: "experiment".to_string(),
                    value,
                    want: "one of simulate, ensemble, groundstate, blowup-scan, threshold, \
                           rescale-check, exp-moment, cont-dep, damping-sweep",
                })?
            }
        };
        let seed = doc.u64("seed", 1)?;
        let output_dir = doc.take("output_dir").map(|(_, v)| v);
        let grid = GridConfig {
            dim: doc.usize("grid.dim", 1)?,
            half_width: doc.f64("grid.half_width", 10.0)?,
            points: doc.usize("grid.points", 256)?,
        };
        let defaults = SimParams::default();
        let sim = SimParams {
            sigma: doc.f64("sim.sigma", defaults.sigma)?,
            lambda: doc.f64("sim.lambda", defaults.lambda)?,
            damping: doc.f64("sim.damping", defaults.damping)?,
            dt: doc.f64("sim.dt", defaults.dt)?,
            horizon: doc.f64("sim.horizon", defaults.horizon)?,
            log_every: doc.usize("sim.log_every", defaults.log_every)?,
            blowup_factor: doc.f64("sim.blowup_factor", defaults.blowup_factor)?,
            boundary_tol: doc.f64("sim.boundary_tol", defaults.boundary_tol)?,
            dealias: doc.bool("sim.dealias", defaults.dealias)?,
        };
        let noise = NoiseConfig {
            modes: doc.usize("noise.modes", 0)?,
            gamma: doc.f64("noise.gamma", 0.0)?,
            decay: doc.f64("noise.decay", 1.0)?,
            space_independent: doc.bool("noise.space_independent", false)?,
        };
        let init = InitConfig {
            kind: doc.parse_with(
                "init.kind",
                InitKind::Gaussian,
                "one of zero, gaussian, groundstate",
                |v| match v {
                    "zero" => Some(InitKind::Zero),
                    "gaussian" => Some(InitKind::Gaussian),
                    "groundstate" => Some(InitKind::Groundstate),
                    _ => None,
                },
            )?,
            scale: doc.f64("init.scale", 1.0)?,
            width: doc.f64("init.width", 1.0)?,
            chirp: doc.f64("init.chirp", 0.0)?,
        };
        let trajectories = doc.usize("ensemble.trajectories", 8)?;
        let alpha = doc.parse_with(
            "expmoment.alpha",
            None,
            "`auto` or a number",
            |v| {
                if v == "auto" {
                    Some(None)
                } else {
                    v.parse().ok().map(Some)
                }
            },
        )?;
        let threshold_scales = doc.list("threshold.scales", &[0.9, 1.2])?;
        let contdep_epsilons = doc.list("contdep.epsilons", &[1e-2, 1e-3])?;
        let damping_values = doc.list("damping.values", &[0.0, 1.0, 4.0, 16.0, 64.0])?;
        let scan = ScanConfig {
            damping: doc.list("scan.damping", &[0.0, 0.5, 1.0, 2.0])?,
            sigma: doc.list("scan.sigma", &[3.0])?,
            fq: doc.list("scan.fq", &[0.0, 0.5, 1.0])?,
            tmax: doc.f64("scan.tmax", 1e3)?,
        };
        let rescale_dts = doc.list("rescale.dts", &[4e-4, 2e-4, 1e-4])?;

        let config = RunConfig {
            experiment,
            seed,
            output_dir,
            grid,
            sim,
            noise,
            init,
            trajectories,
            alpha,
            threshold_scales,
            contdep_epsilons,
            damping_values,
            scan,
            rescale_dts,
            provenance: doc.provenance,
        };
        config.validate(&doc.lines)?;
        Ok(config)
    }

    fn validate(&self, lines: &BTreeMap<String, usize>) -> Result<(), ConfigError> {
        let place = |key: &str| match lines.get(key) {
            Some(line) => format!(" (line {line})"),
            None => String::new(),
        };
        let remap = |err: Error| match err {
            Error::InvalidParam { name, reason } => ConfigError::Invalid {
                place: place(name),
                key: name.to_string(),
                reason,
            },
            other => ConfigError::Invalid {
                key: "config".to_string(),
                place: String::new(),
                reason: other.to_string(),
            },
        };
        let invalid = |key: &str, reason: String| ConfigError::Invalid {
            place: place(key),
            key: key.to_string(),
            reason,
        };

        let grid =
            Grid::new(self.grid.dim, self.grid.half_width, self.grid.points).map_err(remap)?;
        self.sim.validate().map_err(remap)?;
        NoiseSpec::build(
            &grid,
            self.noise.modes,
            self.noise.gamma,
            self.noise.decay,
            self.noise.space_independent,
        )
        .map_err(remap)?;

        if self.trajectories == 0 {
            return Err(invalid("ensemble.trajectories", "must be at least 1".to_string()));
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(invalid("expmoment.alpha", format!("{a} (must be finite)")));
            }
        }
        match self.init.kind {
            InitKind::Zero => {}
            InitKind::Gaussian => {
                if !self.init.scale.is_finite() {
                    return Err(invalid("init.scale", "must be finite".to_string()));
                }
                if !(self.init.width.is_finite() && self.init.width > 0.0) {
                    return Err(invalid(
                        "init.width",
                        format!("{} (must be positive)", self.init.width),
                    ));
                }
                if !self.init.chirp.is_finite() {
                    return Err(invalid("init.chirp", "must be finite".to_string()));
                }
            }
            InitKind::Groundstate => {
                if !(self.init.scale.is_finite() && self.init.scale > 0.0) {
                    return Err(invalid(
                        "init.scale",
                        format!("{} (must be positive)", self.init.scale),
                    ));
                }
            }
        }

        let positive_list = |key: &str, values: &[f64]| -> Result<(), ConfigError> {
            if values.is_empty() {
                return Err(invalid(key, "must not be empty".to_string()));
            }
            for v in values {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(invalid(key, format!("{v} (every entry must be positive)")));
                }
            }
            Ok(())
        };
        let nonnegative_list = |key: &str, values: &[f64]| -> Result<(), ConfigError> {
            if values.is_empty() {
                return Err(invalid(key, "must not be empty".to_string()));
            }
            for v in values {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(invalid(key, format!("{v} (every entry must be >= 0)")));
                }
            }
            Ok(())
        };

        positive_list("threshold.scales", &self.threshold_scales)?;
        positive_list("contdep.epsilons", &self.contdep_epsilons)?;
        nonnegative_list("damping.values", &self.damping_values)?;
        nonnegative_list("scan.damping", &self.scan.damping)?;
        positive_list("scan.sigma", &self.scan.sigma)?;
        for s in &self.scan.sigma {
            if s * self.grid.dim as f64 <= 2.0 {
                return Err(invalid(
                    "scan.sigma",
                    format!("{s} (the certificate needs sigma * dim > 2)"),
                ));
            }
        }
        nonnegative_list("scan.fq", &self.scan.fq)?;
        if !(self.scan.tmax.is_finite() && self.scan.tmax > 0.0) {
            return Err(invalid("scan.tmax", format!("{} (must be positive)", self.scan.tmax)));
        }
        positive_list("rescale.dts", &self.rescale_dts)?;
        if self.rescale_dts.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid(
                "rescale.dts",
                "must be strictly decreasing, coarsest step first".to_string(),
            ));
        }
        Ok(())
    }

    /// Non-fatal observations about the configured regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let critical = 2.0 / self.grid.dim as f64;
        if self.sim.sigma < critical {
            out.push(format!(
                "sim.sigma = {} is below 2/d = {critical}; the mass-critical and \
                 supercritical statements assume sigma >= 2/d",
                self.sim.sigma
            ));
        }
        out
    }

    /// Canonical flat text, keys sorted, suitable for re-parsing.
    pub fn to_text(&self) -> String {
        let mut pairs: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.to_string()),
            ("seed", self.seed.to_string()),
            ("grid.dim", self.grid.dim.to_string()),
            ("grid.half_width", self.grid.half_width.to_string()),
            ("grid.points", self.grid.points.to_string()),
            ("sim.sigma", self.sim.sigma.to_string()),
            ("sim.lambda", self.sim.lambda.to_string()),
            ("sim.damping", self.sim.damping.to_string()),
            ("sim.dt", self.sim.dt.to_string()),
            ("sim.horizon", self.sim.horizon.to_string()),
            ("sim.log_every", self.sim.log_every.to_string()),
            ("sim.blowup_factor", self.sim.blowup_factor.to_string()),
            ("sim.boundary_tol", self.sim.boundary_tol.to_string()),
            ("sim.dealias", self.sim.dealias.to_string()),
            ("noise.modes", self.noise.modes.to_string()),
            ("noise.gamma", self.noise.gamma.to_string()),
            ("noise.decay", self.noise.decay.to_string()),
            ("noise.space_independent", self.noise.space_independent.to_string()),
            ("init.kind", self.init.kind.as_str().to_string()),
            ("init.scale", self.init.scale.to_string()),
            ("init.width", self.init.width.to_string()),
            ("init.chirp", self.init.chirp.to_string()),
            ("ensemble.trajectories", self.trajectories.to_string()),
            (
                "expmoment.alpha",
                self.alpha.map_or_else(|| "auto".to_string(), |a| a.to_string()),
            ),
            ("threshold.scales", join(&self.threshold_scales)),
            ("contdep.epsilons", join(&self.contdep_epsilons)),
            ("damping.values", join(&self.damping_values)),
            ("scan.damping", join(&self.scan.damping)),
            ("scan.sigma", join(&self.scan.sigma)),
            ("scan.fq", join(&self.scan.fq)),
            ("scan.tmax", self.scan.tmax.to_string()),
            ("rescale.dts", join(&self.rescale_dts)),
        ];
        if let Some(dir) = &self.output_dir {
            pairs.push(("output_dir", dir.clone()));
        }
        pairs.sort_by_key(|(k, _)| *k);
        let mut out = String::new();
        for (key, value) in pairs {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    pub fn build_grid(&self) -> crate::Result<Arc<Grid>> {
        Grid::new(self.grid.dim, self.grid.half_width, self.grid.points)
    }

    pub fn build_noise(&self, grid: &Arc<Grid>) -> crate::Result<Arc<NoiseSpec>> {
        if self.noise.modes == 0 {
            Ok(NoiseSpec::off(grid))
        } else {
            NoiseSpec::build(
                grid,
                self.noise.modes,
                self.noise.gamma,
                self.noise.decay,
                self.noise.space_independent,
            )
        }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> RunConfig {
        RunConfig::parse("experiment = simulate\n").unwrap()
    }

    #[test]
    fn defaults_fill_in_and_record_their_provenance() {
        let c = minimal();
        assert_eq!(c.provenance["experiment"], Provenance::Explicit);
        assert_eq!(c.provenance["sim.dt"], Provenance::Defaulted);
        assert_eq!(c.sim.dt, 1e-3);
        assert_eq!(c.seed, 1);
        assert_eq!(c.grid.points, 256);
        assert!(c.alpha.is_none());
        assert!(c.output_dir.is_none());
    }

    #[test]
    fn round_trip_is_the_identity() {
        let text = "\
            experiment = ensemble\n\
            seed = 42\n\
            output_dir = out/run7\n\
            grid.half_width = 12.5\n\
            sim.sigma = 3\n\
            sim.dt = 0.0005\n\
            noise.modes = 4\n\
            noise.gamma = 0.125\n\
            init.kind = groundstate\n\
            init.scale = 1.3\n\
            ensemble.trajectories = 20\n\
            expmoment.alpha = 0.25\n\
            threshold.scales = 0.9, 1.2, 1.5\n";
        let once = RunConfig::parse(text).unwrap();
        let twice = RunConfig::parse(&once.to_text()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.to_text(), twice.to_text());
        assert_eq!(twice.seed, 42);
        assert_eq!(twice.output_dir.as_deref(), Some("out/run7"));
        assert_eq!(twice.threshold_scales, vec![0.9, 1.2, 1.5]);
        assert_eq!(twice.alpha, Some(0.25));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\n# a full-line comment\nexperiment = simulate # trailing note\n\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.experiment, Experiment::Simulate);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        let text = "experiment = simulate\nsim.sgma = 2\n";
        match RunConfig::parse(text) {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "sim.sgma");
            }
            other => panic!("expected an unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let text = "experiment = simulate\nsim.dt = 1e-3\nsim.dt = 2e-3\n";
        match RunConfig::parse(text) {
            Err(ConfigError::Duplicate { line, first, key }) => {
                assert_eq!((line, first), (3, 2));
                assert_eq!(key, "sim.dt");
            }
            other => panic!("expected a duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn type_errors_name_the_key_and_line() {
        let text = "experiment = simulate\nsim.dt = fast\n";
        match RunConfig::parse(text) {
            Err(ConfigError::BadValue { line, key, value, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "sim.dt");
                assert_eq!(value, "fast");
            }
            other => panic!("expected a bad-value error, got {other:?}"),
        }
    }

    #[test]
    fn missing_experiment_is_an_error() {
        match RunConfig::parse("seed = 3\n") {
            Err(ConfigError::Missing { key }) => assert_eq!(key, "experiment"),
            other => panic!("expected a missing-key error, got {other:?}"),
        }
    }

    #[test]
    fn range_violations_cite_the_line() {
        let text = "experiment = simulate\nsim.dt = -1\n";
        match RunConfig::parse(text) {
            Err(ConfigError::Invalid { key, place, .. }) => {
                assert_eq!(key, "sim.dt");
                assert_eq!(place, " (line 2)");
            }
            other => panic!("expected a range error, got {other:?}"),
        }
        let text = "experiment = simulate\nrescale.dts = 1e-4, 2e-4\n";
        assert!(
            matches!(RunConfig::parse(text), Err(ConfigError::Invalid { key, .. }) if key == "rescale.dts"),
            "refinement steps must come coarsest first"
        );
    }

    #[test]
    fn subcritical_sigma_draws_a_warning() {
        let c = RunConfig::parse("experiment = simulate\nsim.sigma = 1.5\n").unwrap();
        let w = c.warnings();
        assert_eq!(w.len(), 1, "expected exactly one regime warning, got {w:?}");
        assert!(w[0].contains("2/d"), "warning should name the admissible range: {}", w[0]);
        assert!(minimal().warnings().is_empty(), "sigma = 2 in d = 1 is admissible");
    }

    #[test]
    fn every_experiment_name_parses() {
        for (name, want) in EXPERIMENT_NAMES {
            let c = RunConfig::parse(&format!("experiment = {name}\n")).unwrap();
            assert_eq!(c.experiment, want);
            assert_eq!(want.as_str(), name);
        }
        assert!(matches!(
            RunConfig::parse("experiment = Simulate\n"),
            Err(ConfigError::BadValue { key, .. }) if key == "experiment"
        ));
    }

    #[test]
    fn noise_off_builder_matches_zero_modes() {
        let c = minimal();
        let grid = c.build_grid().unwrap();
        let noise = c.build_noise(&grid).unwrap();
        assert!(noise.is_off());
    }
}
