//! Run configuration: defaults, file loading (TOML or JSON), flag overrides,
//! validation, and the canonical hash that names run directories.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Grid spacing in the disk chart.
    pub h: f64,
    /// Word-length budget for reducing ghost nodes into the octagon.
    pub word_budget: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            h: 0.02,
            word_budget: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    /// Word-length truncation of the Poincaré series.
    pub depth: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { depth: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping_floor: f64,
    pub gmres_tol: f64,
    pub gmres_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 50,
            damping_floor: 1e-4,
            gmres_tol: 1e-12,
            gmres_max: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    /// Complex coefficients (re, im pairs) on the three even theta series.
    pub coefficients: [f64; 6],
    /// Optional JSON file holding six numbers; overrides `coefficients`.
    pub file: Option<String>,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            coefficients: [0.45, -0.2, 0.3, 0.15, -0.35, 0.1],
            file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Strictly ascending amplitude multipliers applied to unit-sup rays.
    pub schedule: Vec<f64>,
    /// Number of rays (first is the configured seed direction, the rest are
    /// drawn from the run's RNG).
    pub rays: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            schedule: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            rays: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsConfig {
    /// Coarsest spacing of the refinement study; each level halves it.
    pub h: f64,
    pub levels: usize,
    pub patch_radius: f64,
    pub amplitude: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        MmsConfig {
            h: 0.04,
            levels: 3,
            patch_radius: 0.5,
            amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundtripConfig {
    pub random_directions: usize,
    /// Sup-norm each tested direction is normalized to.
    pub sup: f64,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        RoundtripConfig {
            random_directions: 10,
            sup: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub series: SeriesConfig,
    pub solver: SolverConfig,
    pub seed: SeedConfig,
    pub scan: ScanConfig,
    pub mms: MmsConfig,
    pub roundtrip: RoundtripConfig,
    /// Injectivity-radius override for the diameter bound.
    pub inj_override: Option<f64>,
    pub rng_seed: u64,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridConfig::default(),
            series: SeriesConfig::default(),
            solver: SolverConfig::default(),
            seed: SeedConfig::default(),
            scan: ScanConfig::default(),
            mms: MmsConfig::default(),
            roundtrip: RoundtripConfig::default(),
            inj_override: None,
            rng_seed: 7,
            out_dir: "runs".into(),
        }
    }
}

/// Flag-level overrides applied after the file is read.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub h: Option<f64>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Reads a config file (TOML unless the extension is .json), applies flag
    /// overrides, validates, and returns the resolved config.
    pub fn resolve(path: Option<&Path>, out: Option<&Path>, ov: Overrides) -> Result<RunConfig> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config file {}", p.display()))?;
                if p.extension().is_some_and(|e| e == "json") {
                    serde_json::from_str(&text)
                        .with_context(|| format!("invalid JSON config {}", p.display()))?
                } else {
                    toml::from_str(&text)
                        .with_context(|| format!("invalid TOML config {}", p.display()))?
                }
            }
            None => RunConfig::default(),
        };
        if let Some(h) = ov.h {
            cfg.grid.h = h;
        }
        if let Some(d) = ov.depth {
            cfg.series.depth = d;
        }
        if let Some(t) = ov.tol {
            cfg.solver.tol = t;
        }
        if let Some(s) = ov.seed {
            cfg.rng_seed = s;
        }
        if let Some(o) = out {
            cfg.out_dir = o.display().to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid.h > 0.0) {
            bail!("grid.h must be positive, got {}", self.grid.h);
        }
        if !(self.solver.tol > 0.0) {
            bail!("solver.tol must be positive, got {}", self.solver.tol);
        }
        if self.mms.levels == 0 {
            bail!("mms.levels must be at least 1");
        }
        if self.scan.schedule.is_empty() {
            bail!("scan.schedule must not be empty");
        }
        if !self.scan.schedule.windows(2).all(|w| w[0] < w[1]) {
            bail!("scan.schedule must be strictly ascending");
        }
        if self.scan.rays == 0 {
            bail!("scan.rays must be at least 1");
        }
        if let Some(inj) = self.inj_override {
            if !(inj > 0.0) {
                bail!("inj_override must be positive, got {inj}");
            }
        }
        Ok(())
    }

    /// Hash of the canonical serialization (fixed field order, shortest
    /// round-trip floats); identical configs hash identically byte for byte.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The TT coefficients, reading `seed.file` if present.
    pub fn coefficients(&self) -> Result<[f64; 6]> {
        match &self.seed.file {
            None => Ok(self.seed.coefficients),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read coefficient file {path}"))?;
                let v: Vec<f64> = serde_json::from_str(&text)
                    .with_context(|| format!("coefficient file {path} must be a JSON array"))?;
                v.try_into()
                    .map_err(|v: Vec<f64>| anyhow::anyhow!("expected 6 coefficients, got {}", v.len()))
            }
        }
    }

    pub fn newton_options(&self) -> hma_core::NewtonOptions {
        hma_core::NewtonOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            damping_floor: self.solver.damping_floor,
            gmres_tol: self.solver.gmres_tol,
            gmres_max: self.solver.gmres_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_hash_stably() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn toml_sections_round_trip() {
        let text = "rng_seed = 11\n[grid]\nh = 0.018\n[solver]\ntol = 1e-9\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.grid.h, 0.018);
        assert_eq!(cfg.solver.tol, 1e-9);
        assert_eq!(cfg.rng_seed, 11);
        assert_eq!(cfg.series.depth, 5);
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn descending_schedule_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.scan.schedule = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
    }
}
