//! Run configuration: a JSON file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use diskreeb_core::maximizer::{MaximizerParams, Variant};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Every field is optional so that a file and the flags can be merged;
/// [`RunConfig::overlay`] lets the flags win.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// calpic, sysgra, or identity (systolic and orbit only).
    #[arg(long)]
    pub variant: Option<String>,
    /// Number of sectors.
    #[arg(long)]
    pub n: Option<usize>,
    /// Cutoff width of the global rotation.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Cutoff width of each rotor.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Target packing density.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Packing seed; required whenever a packing is built.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest period probed by the orbit census.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Grid resolution (meaning depends on the command).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// A construction file written by `construct`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// genfun: rotation, identity or perturbed.
    #[arg(long)]
    pub map: Option<String>,
    /// genfun: rotation amount of the rotation map.
    #[arg(long)]
    pub beta: Option<f64>,
    /// orbit: start point, x coordinate.
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// orbit: start point, y coordinate.
    #[arg(long, allow_negative_numbers = true)]
    pub y0: Option<f64>,
    /// orbit: flow duration.
    #[arg(long)]
    pub t_total: Option<f64>,
    /// orbit: interior samples per leg of the CSV trace.
    #[arg(long)]
    pub per_leg: Option<usize>,
}

macro_rules! overlay_fields {
    ($base:expr, $top:expr, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

/// What the disk map of a run is.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Identity,
    Construction(MaximizerParams),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `top` replace those of `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        overlay_fields!(self, top, variant, n, delta, eps, rho, seed, kmax, grid, out, input, map, beta, x0, y0, t_total, per_leg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn variant_name(&self) -> &str {
        self.variant.as_deref().unwrap_or("calpic")
    }

    pub fn target(&self) -> Result<Target, Failure> {
        if self.variant_name() == "identity" {
            return Ok(Target::Identity);
        }
        Ok(Target::Construction(self.params()?))
    }

    /// Construction parameters with defaults `n = 16` (calpic) or `32`
    /// (sysgra), `delta = 0.02`, `eps = 0.1`, `rho = 0.7`.
    pub fn params(&self) -> Result<MaximizerParams, Failure> {
        let variant: Variant = self.variant_name().parse().map_err(|e| Failure::config(format!("{e}")))?;
        let seed = self.seed.ok_or_else(|| Failure::config("a packing seed is required (--seed)"))?;
        let n = self.n.unwrap_or(match variant {
            Variant::Calpic => 16,
            Variant::Sysgra => 32,
        });
        let mut p = MaximizerParams::new(variant, n, self.eps.unwrap_or(0.1), self.rho.unwrap_or(0.7), seed);
        if let Some(d) = self.delta {
            p.delta = d;
        }
        p.validate().map_err(Failure::from)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: RunConfig = serde_json::from_str(r#"{"variant":"sysgra","n":32,"seed":3}"#).unwrap();
        let flags = RunConfig { n: Some(24), ..RunConfig::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.n, Some(24));
        assert_eq!(merged.seed, Some(3));
        assert_eq!(merged.params().unwrap().variant, Variant::Sysgra);
    }

    #[test]
    fn missing_seed_and_unknown_fields_are_config_errors() {
        assert_eq!(RunConfig::default().params().unwrap_err().code, 2);
        assert!(serde_json::from_str::<RunConfig>(r#"{"colour":1}"#).is_err());
        let bad = RunConfig { variant: Some("spiral".into()), seed: Some(1), ..RunConfig::default() };
        assert_eq!(bad.target().unwrap_err().code, 2);
    }
}
