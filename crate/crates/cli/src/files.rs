//! JSON and CSV artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use diskreeb_core::calabi::CalabiValue;
use diskreeb_core::maximizer::{build_with_packing, DiskPacking, MaximizerConstruction, MaximizerParams};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// What `construct` writes: parameters, the packing, and derived scalars.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructionFile {
    pub params: MaximizerParams,
    pub rotor_strength: f64,
    pub packing: DiskPacking,
    pub cal: CalabiValue,
    pub cal_plus: f64,
    pub cal_minus: f64,
    pub cal_plus_closed: f64,
    pub cal_minus_closed: f64,
    pub action_integral: f64,
    /// `pi^2/n - c (1-eps)^2 rho pi`.
    pub cal_bound: f64,
    /// `-pi^2 + pi^2 (1 + 2 (1-eps)^2 rho) / n`, reported for comparison.
    pub cal_bound_literal: f64,
    pub sup_distance: f64,
    pub sup_distance_bound: f64,
    /// Relative tolerance of the two-route Calabi agreement.
    pub cal_tolerance: f64,
}

impl ConstructionFile {
    pub fn new(cx: &MaximizerConstruction, sup_distance: f64) -> Self {
        Self {
            params: cx.params.clone(),
            rotor_strength: cx.c,
            packing: (*cx.packing).clone(),
            cal: cx.cal,
            cal_plus: cx.cal_plus,
            cal_minus: cx.cal_minus,
            cal_plus_closed: cx.cal_plus_closed,
            cal_minus_closed: cx.cal_minus_closed,
            action_integral: cx.action_integral,
            cal_bound: cx.cal_bound(),
            cal_bound_literal: cx.cal_bound_literal(),
            sup_distance,
            sup_distance_bound: 4.0 * std::f64::consts::PI / cx.params.n as f64,
            cal_tolerance: 1e-4,
        }
    }

    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("missing input {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("invalid construction file {}: {e}", path.display())))
    }

    /// Rebuilds the map from the stored parameters and packing.
    pub fn rebuild(&self) -> Result<MaximizerConstruction, Failure> {
        self.packing.validate()?;
        Ok(build_with_packing(&self.params, Arc::new(self.packing.clone()))?)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::numeric(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, Failure> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::numeric(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Failure::numeric(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_csv<R: Serialize>(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<PathBuf, Failure> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let io = |e: csv::Error| Failure::numeric(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::numeric(e.to_string()))?;
    Ok(path)
}

/// Packing layout as `(x, y, r)` CSV text.
pub fn packing_csv(cx: &MaximizerConstruction) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::numeric(e.to_string());
    w.write_record(["x", "y", "r"]).map_err(err)?;
    for row in cx.packing_rows() {
        w.serialize(row).map_err(err)?;
    }
    w.into_inner().map_err(|e| Failure::numeric(e.to_string()))
}
