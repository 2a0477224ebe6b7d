use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use hysteretic_relay::oscillator::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs. Missing keys take the defaults printed by `print-config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for the random parts of a run; overridden by `--seed`.
    pub seed: u64,
    pub system: SystemConfig,
    pub simulate: SimulateConfig,
    pub surface: SurfaceConfig,
    pub bifmap: BifmapConfig,
    pub unfold: UnfoldConfig,
    pub family: FamilyConfig,
    pub sweep: SweepConfig,
    pub polygon: PolygonConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub zeta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryKind {
    /// A piece of the colliding symmetric orbit at `(tau, alpha)`.
    Collision,
    /// Constant history `point` with relay output `relay`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub tau: f64,
    /// For a collision history this is the hint for the colliding `α` at `system.epsilon`.
    pub alpha: f64,
    pub history: HistoryKind,
    /// Start time along the colliding orbit.
    pub phase: f64,
    pub point: [f64; 2],
    pub relay: i8,
    /// Half-width of a seeded uniform offset added to a constant history.
    pub perturbation: f64,
    pub duration: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub n_alpha: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BifmapConfig {
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnfoldConfig {
    /// Bracket in `τ` searched for the NSC point.
    pub tau_min: f64,
    pub tau_max: f64,
    pub alpha_hint: f64,
    /// `τ` range of the exported Neimark–Sacker and collision curves.
    pub curve_tau_min: f64,
    pub curve_tau_max: f64,
    pub curve_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    /// `nsc.json` written by `unfold`; when absent the NSC point is searched with the `unfold` settings.
    pub nsc_file: Option<PathBuf>,
    pub modes: usize,
    pub delta_tau: f64,
    pub max_points: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub newton_tol: f64,
    /// Error estimate at which the branch is declared broken up.
    pub max_error: f64,
    /// Every `curve_every`-th member is sampled into `curves/`.
    pub curve_every: usize,
    pub curve_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub tau: f64,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub steps: usize,
    pub warm_start: bool,
    pub n_transient: usize,
    pub n_total: usize,
    /// Samples per step kept in `samples.csv`.
    pub keep: usize,
    /// Compute the colliding family to locate ICC and label regions (b) and (c).
    pub family_landmarks: bool,
    pub alpha_hint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolygonConfig {
    pub tau: f64,
    pub alpha: f64,
    pub n_transient: usize,
    pub n_total: usize,
    /// Offset of the first iterate from the collision point.
    pub offset: [f64; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            system: SystemConfig::default(),
            simulate: SimulateConfig::default(),
            surface: SurfaceConfig::default(),
            bifmap: BifmapConfig::default(),
            unfold: UnfoldConfig::default(),
            family: FamilyConfig::default(),
            sweep: SweepConfig::default(),
            polygon: PolygonConfig::default(),
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { zeta: -0.1, epsilon: 0.1 }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            tau: 4.2,
            alpha: -0.44,
            history: HistoryKind::Collision,
            phase: 0.5,
            point: [0.2, 0.0],
            relay: 1,
            perturbation: 0.0,
            duration: 16.8,
            samples: 1600,
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self { tau_min: PI + 0.01, tau_max: 2.0 * PI - 0.01, n_tau: 200, alpha_min: -PI / 2.0 + 0.01, alpha_max: PI / 2.0 - 0.01, n_alpha: 200 }
    }
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { grid: Grid::default() }
    }
}

impl Default for BifmapConfig {
    fn default() -> Self {
        Self { grid: Grid { tau_min: PI + 0.05, tau_max: 2.0 * PI - 0.05, n_tau: 200, alpha_min: -1.5, alpha_max: 1.5, n_alpha: 200 } }
    }
}

impl Default for UnfoldConfig {
    fn default() -> Self {
        Self { tau_min: 4.0, tau_max: 4.3, alpha_hint: -0.5, curve_tau_min: 3.9, curve_tau_max: 4.8, curve_points: 91 }
    }
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            nsc_file: None,
            modes: 32,
            delta_tau: 1e-3,
            max_points: 400,
            initial_step: 2e-3,
            min_step: 1e-6,
            max_step: 2e-2,
            newton_tol: 1e-12,
            max_error: 1e-2,
            curve_every: 8,
            curve_samples: 256,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tau: 4.2,
            alpha_start: -0.52,
            alpha_end: -0.40,
            steps: 241,
            warm_start: true,
            n_transient: 40,
            n_total: 400,
            keep: 360,
            family_landmarks: false,
            alpha_hint: -0.47,
        }
    }
}

impl Default for PolygonConfig {
    fn default() -> Self {
        Self { tau: 4.25, alpha: -0.44, n_transient: 400, n_total: 1400, offset: [1e-3, 0.0] }
    }
}

impl Grid {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            tau_min: self.tau_min,
            tau_max: self.tau_max,
            n_tau: self.n_tau,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            n_alpha: self.n_alpha,
        }
    }

    fn check(&self, name: &str) -> Result<(), CliError> {
        range(&format!("{name}.tau"), self.tau_min, self.tau_max)?;
        range(&format!("{name}.alpha"), self.alpha_min, self.alpha_max)?;
        at_least(&format!("{name}.n_tau"), self.n_tau, 2)?;
        at_least(&format!("{name}.n_alpha"), self.n_alpha, 2)
    }
}

fn range(name: &str, lo: f64, hi: f64) -> Result<(), CliError> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name}: empty range [{lo}, {hi}]")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", origin.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("system.epsilon", self.system.epsilon)?;
        if !self.system.zeta.is_finite() {
            return Err(CliError::Config("system.zeta must be finite".into()));
        }
        let s = &self.simulate;
        positive("simulate.tau", s.tau)?;
        positive("simulate.duration", s.duration)?;
        at_least("simulate.samples", s.samples, 1)?;
        if s.relay != 1 && s.relay != -1 {
            return Err(CliError::Config(format!("simulate.relay must be 1 or -1, got {}", s.relay)));
        }
        if !(s.perturbation >= 0.0) {
            return Err(CliError::Config(format!("simulate.perturbation must be non-negative, got {}", s.perturbation)));
        }
        self.surface.grid.check("surface.grid")?;
        self.bifmap.grid.check("bifmap.grid")?;
        let u = &self.unfold;
        range("unfold.tau", u.tau_min, u.tau_max)?;
        range("unfold.curve_tau", u.curve_tau_min, u.curve_tau_max)?;
        at_least("unfold.curve_points", u.curve_points, 2)?;
        let f = &self.family;
        at_least("family.modes", f.modes, 2)?;
        at_least("family.max_points", f.max_points, 1)?;
        at_least("family.curve_every", f.curve_every, 1)?;
        at_least("family.curve_samples", f.curve_samples, 2)?;
        for (name, v) in [
            ("family.delta_tau", f.delta_tau),
            ("family.initial_step", f.initial_step),
            ("family.min_step", f.min_step),
            ("family.max_step", f.max_step),
            ("family.newton_tol", f.newton_tol),
            ("family.max_error", f.max_error),
        ] {
            positive(name, v)?;
        }
        if !(f.min_step <= f.initial_step && f.initial_step <= f.max_step) {
            return Err(CliError::Config("family steps must satisfy min_step <= initial_step <= max_step".into()));
        }
        let w = &self.sweep;
        positive("sweep.tau", w.tau)?;
        at_least("sweep.steps", w.steps, 1)?;
        if w.steps > 1 && w.alpha_start == w.alpha_end {
            return Err(CliError::Config("sweep: empty α range".into()));
        }
        if w.n_transient >= w.n_total {
            return Err(CliError::Config(format!("sweep: n_transient {} must be below n_total {}", w.n_transient, w.n_total)));
        }
        let p = &self.polygon;
        positive("polygon.tau", p.tau)?;
        if p.n_transient >= p.n_total {
            return Err(CliError::Config(format!("polygon: n_transient {} must be below n_total {}", p.n_transient, p.n_total)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml(), Path::new("defaults")).unwrap(), c);
    }

    #[test]
    fn partial_files_keep_defaults() {
        let c = RunConfig::parse("[sweep]\nsteps = 5\n", Path::new("x")).unwrap();
        assert_eq!(c.sweep.steps, 5);
        assert_eq!(c.sweep.tau, 4.2);
        assert_eq!(c.system, SystemConfig::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let err = RunConfig::parse("[system]\nzeta = -0.1\nepsilonn = 0.1\n", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("epsilonn"), "{err}");
        assert!(RunConfig::parse("[system]\nepsilon = -1.0\n", Path::new("x")).is_err());
        assert!(RunConfig::parse("[surface.grid]\ntau_min = 5.0\ntau_max = 4.0\n", Path::new("x")).is_err());
    }
}
