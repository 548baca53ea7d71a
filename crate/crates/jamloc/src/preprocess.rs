//! Feature preprocessing: complex CIRs to normalized 3x100 tensors and
//! standard scaling of the diagnostic features.
//!
//! The diagnostic scaler is fitted on source training rows only; the CIR
//! scaler is fitted jointly on source and target. `fit_scope` records which,
//! and is checked when a scaler is loaded from disk.

use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dataset::CirSample;
use crate::error::{JamlocError, Result};

pub const PROCESSED_CHANNELS: usize = 3;
pub const PROCESSED_TAPS: usize = 100;
pub const SCALER_SCHEMA_VERSION: u32 = 1;

const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    SourceTrainOnly,
    SourcePlusTarget,
}

/// Per-feature mean / standard deviation pairs with fit-scope metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalerParams {
    pub schema_version: u32,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub fit_scope: FitScope,
}

impl ScalerParams {
    pub fn len(&self) -> usize {
        self.means.len()
    }
    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    /// Load a scaler sidecar, verifying schema version and expected fit scope.
    pub fn load(path: &Path, expected_scope: FitScope) -> Result<Self> {
        let p: ScalerParams = serde_json::from_reader(std::fs::File::open(path)?)?;
        if p.schema_version != SCALER_SCHEMA_VERSION {
            return Err(JamlocError::Format(format!(
                "unsupported scaler schema version {}",
                p.schema_version
            )));
        }
        if p.fit_scope != expected_scope {
            return Err(JamlocError::Format(format!(
                "scaler fit scope mismatch: expected {expected_scope:?}, found {:?}",
                p.fit_scope
            )));
        }
        if p.means.len() != p.stds.len() {
            return Err(JamlocError::Format("means/stds length mismatch".into()));
        }
        Ok(p)
    }
}

/// Convert a complex CIR (>= 100 taps) into the raw 3x100 tensor with channel
/// order (magnitude, sin phase, cos phase). Taps beyond 100 are discarded.
/// The zero tap uses the (sin 0, cos 1) convention since arg(0) is undefined.
pub fn cir_to_channels(cir: &[(f64, f64)]) -> Result<Array2<f64>> {
    if cir.len() < PROCESSED_TAPS {
        return Err(JamlocError::Invalid(format!(
            "CIR has {} taps, need at least {PROCESSED_TAPS}",
            cir.len()
        )));
    }
    let mut out = Array2::<f64>::zeros((PROCESSED_CHANNELS, PROCESSED_TAPS));
    for (t, &(re, im)) in cir.iter().take(PROCESSED_TAPS).enumerate() {
        let mag = (re * re + im * im).sqrt();
        out[[0, t]] = mag;
        if mag == 0.0 {
            out[[1, t]] = 0.0;
            out[[2, t]] = 1.0;
        } else {
            out[[1, t]] = im / mag;
            out[[2, t]] = re / mag;
        }
    }
    Ok(out)
}

/// Fit a standard scaler: column means and population (1/N) standard
/// deviations, floored at 1e-8.
pub fn fit_scaler(matrix: ArrayView2<'_, f64>, scope: FitScope) -> Result<ScalerParams> {
    let (n, d) = matrix.dim();
    if n < 2 {
        return Err(JamlocError::Invalid(format!(
            "scaler needs at least 2 rows, got {n}"
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(JamlocError::Invalid("non-finite entries in scaler fit".into()));
    }
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    for col in matrix.axis_iter(Axis(1)) {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        means.push(mean);
        stds.push(var.sqrt().max(STD_FLOOR));
    }
    Ok(ScalerParams {
        schema_version: SCALER_SCHEMA_VERSION,
        means,
        stds,
        fit_scope: scope,
    })
}

/// Columnwise `(x - mean) / std`. Params are never refitted here.
pub fn apply_scaler(p: &ScalerParams, matrix: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, d) = matrix.dim();
    if d != p.len() {
        return Err(JamlocError::Invalid(format!(
            "scaler has {} columns, data has {d}",
            p.len()
        )));
    }
    let mut out = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            out[[i, j]] = (matrix[[i, j]] - p.means[j]) / p.stds[j];
        }
    }
    Ok(out)
}

/// Inverse of `apply_scaler` for non-degenerate columns.
pub fn invert_scaler(p: &ScalerParams, matrix: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, d) = matrix.dim();
    if d != p.len() {
        return Err(JamlocError::Invalid("dimension mismatch".into()));
    }
    let mut out = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            out[[i, j]] = matrix[[i, j]] * p.stds[j] + p.means[j];
        }
    }
    Ok(out)
}

/// Stack the raw 3x100 channel tensors of `samples` into an `[N, 300]` matrix
/// (row-major channel x tap flattening) for scaler fitting.
pub fn cir_feature_matrix(samples: &[&CirSample]) -> Result<Array2<f64>> {
    let d = PROCESSED_CHANNELS * PROCESSED_TAPS;
    let mut m = Array2::<f64>::zeros((samples.len(), d));
    for (i, s) in samples.iter().enumerate() {
        let ch = cir_to_channels(&s.cir)?;
        let flat = ch.into_shape_with_order(d).unwrap();
        m.row_mut(i).assign(&flat);
    }
    Ok(m)
}

/// Diagnostics of `samples` as an `[N, 11]` matrix.
pub fn diagnostics_matrix(samples: &[&CirSample]) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((samples.len(), crate::dataset::NUM_DIAGNOSTICS));
    for (i, s) in samples.iter().enumerate() {
        for (j, &v) in s.diagnostics.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    m
}

/// Scaler-normalized `[B, 3, 100]` batch for the autoencoder pipeline.
pub fn processed_batch(samples: &[&CirSample], scaler: &ScalerParams) -> Result<Array3<f64>> {
    let flat = cir_feature_matrix(samples)?;
    let scaled = apply_scaler(scaler, flat.view())?;
    let n = samples.len();
    Ok(scaled
        .into_shape_with_order((n, PROCESSED_CHANNELS, PROCESSED_TAPS))
        .unwrap())
}
