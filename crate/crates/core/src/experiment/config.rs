use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LearningConfig, Mode, Rates, Schedule};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Classify,
    Simulate,
    Basin,
    Lockin,
    LqNash,
    Bounds,
}

/// Initial-state second moment for the LQ benchmark.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma0Choice {
    #[default]
    Identity,
    Calibrated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParams {
    pub id: String,
    /// Particle-game horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// LQ initial-state second moment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Sigma0Choice>,
}

/// Explicit coordinates or a named anchor (`lq-nash`, `decoupled`,
/// `torus-nash-1`, `torus-nash-2`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointRef {
    Coords(Vec<f64>),
    Anchor(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningParams {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedules: Option<Vec<Schedule>>,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

fn default_stop_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    10_000
}

fn rates_from(rates: &Option<Vec<f64>>, schedules: &Option<Vec<Schedule>>) -> Result<Option<Rates>> {
    match (rates, schedules) {
        (Some(_), Some(_)) => Err(Error::Config("give either `rates` or `schedules`, not both".into())),
        (Some(r), None) => Ok(Some(Rates::Constant(r.clone()))),
        (None, Some(s)) => Ok(Some(Rates::Schedule(s.clone()))),
        (None, None) => Ok(None),
    }
}

impl LearningParams {
    pub fn to_config(&self, scenario: Option<&Scenario>) -> Result<LearningConfig> {
        let own = rates_from(&self.rates, &self.schedules)?;
        let over = match scenario {
            Some(s) => rates_from(&s.rates, &s.schedules)?,
            None => None,
        };
        let rates = over
            .or(own)
            .ok_or_else(|| Error::Config("learning needs `rates` or `schedules`".into()))?;
        Ok(LearningConfig {
            mode: self.mode,
            rates,
            stop_tol: self.stop_tol,
            max_iters: self.max_iters,
            target: None,
            stride: self.stride,
        })
    }
}

/// Named override of the learning rates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedules: Option<Vec<Schedule>>,
}

/// Gaussian noise with per-player standard deviations.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub sigma: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    pub points: Vec<PointRef>,
    #[serde(default = "yes")]
    pub newton: bool,
    #[serde(default = "default_critical_tol")]
    pub tol: f64,
    /// Grid size per axis for zero-line masks; two-player scalar games only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_lines: Option<usize>,
}

fn yes() -> bool {
    true
}

fn default_critical_tol() -> f64 {
    crate::equilibrium::DEFAULT_CRITICAL_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingParams {
    #[serde(default)]
    pub fast_player: usize,
    pub inner_rate: f64,
    pub inner_iters: usize,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    /// Iterations at which the seed-averaged error is reported.
    pub report_at: Vec<usize>,
}

fn default_inner_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub x0: PointRef,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    /// Independent noise seeds per scenario (stochastic mode).
    #[serde(default = "one")]
    pub seeds: usize,
    /// Reference points; final distances to the nearest are reported.
    #[serde(default)]
    pub reference: Vec<PointRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking: Option<TrackingParams>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisParams {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinParams {
    pub axes: Vec<AxisParams>,
    pub equilibria: Vec<PointRef>,
    /// Newton-refine the equilibria before matching.
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default = "default_match_radius")]
    pub match_radius: f64,
    pub scenarios: Vec<Scenario>,
    /// Points whose cell labels are listed in the summary.
    #[serde(default)]
    pub highlight: Vec<Vec<f64>>,
}

fn default_match_radius() -> f64 {
    crate::basin::DEFAULT_MATCH_RADIUS
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockinParams {
    pub x_star: PointRef,
    #[serde(default = "yes")]
    pub refine: bool,
    pub eps: f64,
    pub radius: f64,
    pub trials: usize,
    pub burn_in: Vec<usize>,
    /// Noise scales, applied to every player.
    pub sigmas: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqNashParams {
    #[serde(default = "default_riccati_tol")]
    pub tol: f64,
    #[serde(default = "default_riccati_iters")]
    pub max_iters: usize,
}

impl Default for LqNashParams {
    fn default() -> Self {
        LqNashParams {
            tol: default_riccati_tol(),
            max_iters: default_riccati_iters(),
        }
    }
}

fn default_riccati_tol() -> f64 {
    1e-13
}

fn default_riccati_iters() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsParams {
    pub center: PointRef,
    /// Radius of the ball for the spectral constants; defaults to the
    /// largest start distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Radius of a second, small ball on which the constants are reported.
    #[serde(default = "default_local_radius")]
    pub local_radius: f64,
    pub eps: Vec<f64>,
    #[serde(default = "one")]
    pub trials: usize,
    /// Entrywise uniform perturbation of the starts (LQ: rejection-sampled
    /// for stability).
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// Step size; defaults to `√α/β` from the measured constants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Iteration cap as a multiple of the largest bound.
    #[serde(default = "default_cap_factor")]
    pub cap_factor: f64,
    /// Thinning of the written distance curve.
    #[serde(default = "default_curve_stride")]
    pub curve_stride: usize,
}

fn default_samples() -> usize {
    crate::equilibrium::DEFAULT_SPECTRAL_SAMPLES
}

fn default_local_radius() -> f64 {
    1e-3
}

fn default_perturbation() -> f64 {
    0.01
}

fn default_cap_factor() -> f64 {
    1.5
}

fn default_curve_stride() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: Kind,
    pub game: GameParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning: Option<LearningParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin: Option<BasinParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lockin: Option<LockinParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lq_nash: Option<LqNashParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsParams>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.kind == Kind::LqNash && cfg.lq_nash.is_none() {
            cfg.lq_nash = Some(LqNashParams::default());
        }
        cfg.check_sections()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn check_sections(&self) -> Result<()> {
        let missing = |s: &str| Err(Error::Config(format!("kind `{:?}` needs a [{s}] section", self.kind)));
        match self.kind {
            Kind::Classify if self.classify.is_none() => missing("classify"),
            Kind::Simulate if self.simulate.is_none() => missing("simulate"),
            Kind::Simulate | Kind::Basin | Kind::Lockin if self.learning.is_none() => missing("learning"),
            Kind::Basin if self.basin.is_none() => missing("basin"),
            Kind::Lockin if self.lockin.is_none() => missing("lockin"),
            Kind::Bounds if self.bounds.is_none() => missing("bounds"),
            _ => Ok(()),
        }
    }
}
