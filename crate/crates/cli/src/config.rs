//! Study configuration, loaded from JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfrom_core::fom::FomConfig;
use sfrom_core::fv::FluxMode;
use sfrom_core::linalg::SolverOptions;
use sfrom_core::pod::Truncation;
use sfrom_core::StructuredGrid;

use crate::io::fnv1a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// Single parameter; the reduced model reproduces its own training run.
    TimeReconstruction,
    ReSweep,
    GammaSweep,
    /// Arbitrary (Re, γ) pairs for training and testing.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub re: f64,
    pub gamma: f64,
}

impl fmt::Display for Parameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Re={}, gamma={}", self.re, self.gamma)
    }
}

/// A bare number is the swept parameter; a pair fixes both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParameterSpec {
    Value(f64),
    Pair(Parameters),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationSpec {
    Threshold(f64),
    Count(usize),
    FullRank,
}

impl From<TruncationSpec> for Truncation {
    fn from(t: TruncationSpec) -> Self {
        match t {
            TruncationSpec::Threshold(v) => Truncation::Threshold(v),
            TruncationSpec::Count(n) => Truncation::Count(n),
            TruncationSpec::FullRank => Truncation::FullRank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxModeSpec {
    Linear,
    Corner,
}

impl From<FluxModeSpec> for FluxMode {
    fn from(m: FluxModeSpec) -> Self {
        match m {
            FluxModeSpec::Linear => FluxMode::Linear,
            FluxModeSpec::Corner => FluxMode::Corner,
        }
    }
}

/// Full-order setup shared by every run of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FomTemplate {
    /// Cells per direction on the 2π × 2π box.
    pub grid: usize,
    pub re: f64,
    pub gamma: f64,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub flux_mode: FluxModeSpec,
    pub solver_tolerance: f64,
}

impl Default for FomTemplate {
    fn default() -> Self {
        Self {
            grid: 128,
            re: 800.0,
            gamma: 0.0,
            dt: 0.01,
            t0: 0.0,
            t_end: 10.0,
            snapshot_stride: 8,
            flux_mode: FluxModeSpec::Linear,
            solver_tolerance: sfrom_core::linalg::DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub fom: FomTemplate,
    pub training: Vec<ParameterSpec>,
    pub test: Vec<ParameterSpec>,
    pub truncation_omega: TruncationSpec,
    pub truncation_psi: TruncationSpec,
    /// Score every test against a full-order reference.
    pub compare: bool,
    pub output: PathBuf,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            kind: StudyKind::TimeReconstruction,
            fom: FomTemplate::default(),
            training: Vec::new(),
            test: Vec::new(),
            truncation_omega: TruncationSpec::Threshold(1e-5),
            truncation_psi: TruncationSpec::Threshold(1e-5),
            compare: true,
            output: PathBuf::from("sfrom-out"),
        }
    }
}

/// Where a test parameter sits relative to the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Identical to a training parameter.
    Reconstruction,
    Interpolatory,
    Extrapolatory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub parameters: Parameters,
    pub regime: Regime,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Re sweep at a fixed forcing, training on four Re values over (0, 10].
    pub fn re_sweep(grid: usize) -> Self {
        Self {
            kind: StudyKind::ReSweep,
            fom: FomTemplate {
                grid,
                gamma: 0.09,
                ..FomTemplate::default()
            },
            training: [200.0, 400.0, 600.0, 800.0].map(ParameterSpec::Value).to_vec(),
            test: [100.0, 500.0, 1000.0].map(ParameterSpec::Value).to_vec(),
            ..Self::default()
        }
    }

    /// Forcing sweep at Re = 800, training on four γ values over (0, 10].
    pub fn gamma_sweep(grid: usize) -> Self {
        Self {
            kind: StudyKind::GammaSweep,
            fom: FomTemplate {
                grid,
                ..FomTemplate::default()
            },
            training: [0.06, 0.07, 0.08, 0.09].map(ParameterSpec::Value).to_vec(),
            test: [0.05, 0.075, 0.1].map(ParameterSpec::Value).to_vec(),
            ..Self::default()
        }
    }

    pub fn time_reconstruction(grid: usize) -> Self {
        Self {
            fom: FomTemplate {
                grid,
                ..FomTemplate::default()
            },
            ..Self::default()
        }
    }

    fn base(&self) -> Parameters {
        Parameters {
            re: self.fom.re,
            gamma: self.fom.gamma,
        }
    }

    fn resolve(&self, spec: &ParameterSpec) -> Result<Parameters, String> {
        let base = self.base();
        match (*spec, self.kind) {
            (ParameterSpec::Pair(p), _) => Ok(p),
            (ParameterSpec::Value(re), StudyKind::ReSweep) => Ok(Parameters { re, ..base }),
            (ParameterSpec::Value(gamma), StudyKind::GammaSweep) => Ok(Parameters { gamma, ..base }),
            (ParameterSpec::Value(v), kind) => Err(format!(
                "bare value {v} is ambiguous for a {kind:?} study; give {{\"re\": .., \"gamma\": ..}}"
            )),
        }
    }

    pub fn training_parameters(&self) -> Result<Vec<Parameters>, String> {
        if self.kind == StudyKind::TimeReconstruction && self.training.is_empty() {
            return Ok(vec![self.base()]);
        }
        if self.training.is_empty() {
            return Err("training list is empty".into());
        }
        let list = self
            .training
            .iter()
            .map(|s| self.resolve(s))
            .collect::<Result<Vec<_>, _>>()?;
        for p in &list {
            check_parameters(p)?;
        }
        Ok(list)
    }

    /// Test parameters tagged against the training range. Defaults to the training set.
    pub fn test_cases(&self) -> Result<Vec<TestCase>, String> {
        let training = self.training_parameters()?;
        let tests = if self.test.is_empty() {
            training.clone()
        } else {
            self.test
                .iter()
                .map(|s| self.resolve(s))
                .collect::<Result<Vec<_>, _>>()?
        };
        let range = |f: fn(&Parameters) -> f64| {
            let lo = training.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = training.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let (re_lo, re_hi) = range(|p| p.re);
        let (g_lo, g_hi) = range(|p| p.gamma);
        tests
            .into_iter()
            .map(|p| {
                check_parameters(&p)?;
                let regime = if training.contains(&p) {
                    Regime::Reconstruction
                } else if (re_lo..=re_hi).contains(&p.re) && (g_lo..=g_hi).contains(&p.gamma) {
                    Regime::Interpolatory
                } else {
                    Regime::Extrapolatory
                };
                Ok(TestCase { parameters: p, regime })
            })
            .collect()
    }

    pub fn grid(&self) -> Result<StructuredGrid, String> {
        StructuredGrid::periodic_box(self.fom.grid).map_err(|e| e.to_string())
    }

    pub fn fom_config(&self, p: &Parameters) -> Result<FomConfig, String> {
        let t = &self.fom;
        let solver = SolverOptions::with_tolerance(t.solver_tolerance);
        let cfg = FomConfig {
            grid: self.grid()?,
            re: p.re,
            gamma: p.gamma,
            dt: t.dt,
            t0: t.t0,
            t_end: t.t_end,
            flux_mode: t.flux_mode.into(),
            transport_solver: solver,
            poisson_solver: solver,
            snapshot_stride: t.snapshot_stride,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let training = self.training_parameters()?;
        self.test_cases()?;
        for p in &training {
            self.fom_config(p)?;
        }
        for t in [self.truncation_omega, self.truncation_psi] {
            match t {
                TruncationSpec::Threshold(v) if !(v > 0.0 && v < 1.0) => {
                    return Err(format!("threshold must lie in (0, 1), got {v}"))
                }
                TruncationSpec::Count(0) => return Err("mode count must be positive".into()),
                _ => {}
            }
        }
        Ok(())
    }

    /// Hash of everything the offline artifacts depend on.
    pub fn offline_fingerprint(&self) -> u64 {
        #[derive(Serialize)]
        struct Offline<'a> {
            fom: &'a FomTemplate,
            training: Vec<Parameters>,
            truncation_omega: TruncationSpec,
            truncation_psi: TruncationSpec,
        }
        let key = Offline {
            fom: &self.fom,
            training: self.training_parameters().unwrap_or_default(),
            truncation_omega: self.truncation_omega,
            truncation_psi: self.truncation_psi,
        };
        let text = serde_json::to_string(&key).expect("serializable");
        // never 0, which means "unchecked" in artifact headers
        fnv1a(text.as_bytes()).max(1)
    }
}

fn check_parameters(p: &Parameters) -> Result<(), String> {
    if !(p.re > 0.0 && p.re.is_finite()) || !p.gamma.is_finite() {
        return Err(format!("invalid parameters ({p})"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg =
            StudyConfig::from_json(r#"{"kind": "re-sweep", "training": [200, 800], "fom": {"gamma": 0.09}}"#).unwrap();
        assert_eq!(cfg.fom.grid, 128);
        assert_eq!(cfg.fom.dt, 0.01);
        let training = cfg.training_parameters().unwrap();
        assert_eq!(training[1], Parameters { re: 800.0, gamma: 0.09 });
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(StudyConfig::from_json(r#"{"kind": "re-sweep", "trainng": [1]}"#).is_err());
    }

    #[test]
    fn regimes_follow_training_range() {
        let cases = StudyConfig::re_sweep(64).test_cases().unwrap();
        let regimes: Vec<Regime> = cases.iter().map(|c| c.regime).collect();
        assert_eq!(
            regimes,
            vec![Regime::Extrapolatory, Regime::Interpolatory, Regime::Extrapolatory]
        );
        let g = StudyConfig::gamma_sweep(64).test_cases().unwrap();
        assert_eq!(g[1].regime, Regime::Interpolatory);
        assert_eq!(
            g[1].parameters,
            Parameters {
                re: 800.0,
                gamma: 0.075
            }
        );
    }

    #[test]
    fn time_reconstruction_tests_its_training_point() {
        let cases = StudyConfig::time_reconstruction(32).test_cases().unwrap();
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].regime, Regime::Reconstruction);
    }

    #[test]
    fn sweeps_need_training_values() {
        let cfg = StudyConfig {
            training: vec![],
            ..StudyConfig::re_sweep(32)
        };
        assert!(cfg.validate().is_err());
        let custom = StudyConfig {
            kind: StudyKind::Custom,
            training: vec![ParameterSpec::Value(3.0)],
            ..StudyConfig::default()
        };
        assert!(custom.training_parameters().is_err());
    }

    #[test]
    fn fingerprint_tracks_offline_inputs_only() {
        let a = StudyConfig::re_sweep(64);
        let mut b = a.clone();
        b.test = vec![ParameterSpec::Value(300.0)];
        b.output = "elsewhere".into();
        assert_eq!(a.offline_fingerprint(), b.offline_fingerprint());
        b.fom.grid = 128;
        assert_ne!(a.offline_fingerprint(), b.offline_fingerprint());
    }
}
