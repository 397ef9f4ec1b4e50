use std::path::Path;

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

/// Effective run parameters. Flags override the config file, which
/// overrides the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    pub window_size: usize,
    pub min_inliers: usize,
    pub acceptance_ratio: f64,
    pub submap_count: usize,
    pub submap_overlap: f64,
    pub registration_stride: usize,
    pub planar: bool,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 5.0,
            window_size: 75,
            min_inliers: 20,
            acceptance_ratio: 0.9,
            submap_count: 1,
            submap_overlap: 0.5,
            registration_stride: 5,
            planar: false,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// TOML file with any subset of the run parameters.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Consistency threshold in meters.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Number of recent tracks registered against the reference.
    #[arg(long, global = true)]
    pub window_size: Option<usize>,
    #[arg(long, global = true)]
    pub min_inliers: Option<usize>,
    #[arg(long, global = true)]
    pub acceptance_ratio: Option<f64>,
    /// Number of reference submaps.
    #[arg(long, global = true)]
    pub submaps: Option<usize>,
    /// Submap overlap fraction in [0, 1).
    #[arg(long, global = true)]
    pub overlap: Option<f64>,
    /// New tracks between registration rounds.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Evaluate positions in the reference map plane.
    #[arg(long, global = true)]
    pub planar: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl RunFlags {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_toml(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($flag:ident => $field:ident) => {
                if let Some(v) = self.$flag {
                    cfg.$field = v;
                }
            };
        }
        apply!(epsilon => epsilon);
        apply!(window_size => window_size);
        apply!(min_inliers => min_inliers);
        apply!(acceptance_ratio => acceptance_ratio);
        apply!(submaps => submap_count);
        apply!(overlap => submap_overlap);
        apply!(stride => registration_stride);
        apply!(seed => rng_seed);
        if self.planar {
            cfg.planar = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.epsilon > 0.0, "epsilon must be positive");
        anyhow::ensure!(self.min_inliers >= 3, "min_inliers must be at least 3");
        anyhow::ensure!(
            self.acceptance_ratio > 0.0 && self.acceptance_ratio <= 1.0,
            "acceptance_ratio must be in (0, 1]"
        );
        anyhow::ensure!(self.submap_count >= 1, "submap count must be at least 1");
        anyhow::ensure!(
            (0.0..1.0).contains(&self.submap_overlap),
            "overlap must be in [0, 1)"
        );
        anyhow::ensure!(self.registration_stride >= 1, "stride must be at least 1");
        anyhow::ensure!(self.window_size >= 1, "window size must be at least 1");
        Ok(())
    }
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
