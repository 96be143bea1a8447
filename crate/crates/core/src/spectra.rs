//! Gap-ratio statistics of modular spectra.
//!
//! For sorted levels `ξ` with spacings `δ_n = ξ_{n+1} − ξ_n`, the ratio
//! `r_n = min(δ_n, δ_{n+1}) / max(δ_n, δ_{n+1})` needs no unfolding.
//! Consecutive levels with `|ξ_{i+1} − ξ_i| ≤ tol · max(|ξ_i|, |ξ_{i+1}|, 1)`
//! are chained into one cluster represented by its lowest member.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{uniform_edges, Histogram};
use crate::operators::{modular_hamiltonian, DensityMatrix, DEFAULT_MODULAR_FLOOR};

pub const DEFAULT_MERGE_TOL: f64 = 1e-6;
pub const RATIO_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Poisson,
    Goe,
    Gue,
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reference::Poisson => "poisson",
            Reference::Goe => "goe",
            Reference::Gue => "gue",
        })
    }
}

impl FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Reference::Poisson),
            "goe" => Ok(Reference::Goe),
            "gue" => Ok(Reference::Gue),
            other => Err(Error::InvalidArgument(format!("unknown reference {other:?}"))),
        }
    }
}

/// Density of `r ∈ [0, 1]`. Poisson is `2/(1+r)²`; GOE and GUE use the 3×3
/// Wigner-like surmise `Z_β⁻¹ (r + r²)^β / (1 + r + r²)^{1+3β/2}`, folded onto `[0, 1]`.
pub fn reference_density(kind: Reference, r: f64) -> f64 {
    if !(0.0..=1.0).contains(&r) {
        return 0.0;
    }
    match kind {
        Reference::Poisson => 2.0 / (1.0 + r).powi(2),
        Reference::Goe => 2.0 * (27.0 / 8.0) * (r + r * r) / (1.0 + r + r * r).powf(2.5),
        Reference::Gue => {
            2.0 * (81.0 * 3f64.sqrt() / (4.0 * std::f64::consts::PI)) * (r + r * r).powi(2) / (1.0 + r + r * r).powi(4)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRatioStats {
    pub ratios: Vec<f64>,
    pub mean_r: f64,
    pub histogram: Histogram,
    pub excluded_levels: usize,
    pub merged_levels: usize,
}

impl GapRatioStats {
    fn from_ratios(ratios: Vec<f64>, excluded_levels: usize, merged_levels: usize) -> Result<Self> {
        let mean_r = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let histogram = Histogram::from_samples(&ratios, uniform_edges(0.0, 1.0, RATIO_BINS))?;
        Ok(Self {
            ratios,
            mean_r,
            histogram,
            excluded_levels,
            merged_levels,
        })
    }

    /// Pools ratios of several spectra into one set of statistics.
    pub fn pool<'a>(parts: impl IntoIterator<Item = &'a GapRatioStats>) -> Result<Self> {
        let (mut ratios, mut excluded, mut merged) = (Vec::new(), 0, 0);
        for p in parts {
            ratios.extend_from_slice(&p.ratios);
            excluded += p.excluded_levels;
            merged += p.merged_levels;
        }
        if ratios.is_empty() {
            return Err(Error::TooFewLevels { found: 0 });
        }
        Self::from_ratios(ratios, excluded, merged)
    }

    /// `∫ |f − g|` between the ratio histogram and a reference density.
    pub fn l1_distance(&self, kind: Reference) -> f64 {
        self.histogram.l1_to_density(|r| reference_density(kind, r))
    }
}

/// Sorted levels with near-degenerate runs collapsed; returns `(levels, removed count)`.
pub fn merge_levels(levels: &[f64], tol: f64) -> (Vec<f64>, usize) {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut prev: Option<f64> = None;
    for &x in &sorted {
        match prev {
            Some(p) if (x - p).abs() <= tol * p.abs().max(x.abs()).max(1.0) => {}
            _ => out.push(x),
        }
        prev = Some(x);
    }
    let removed = sorted.len() - out.len();
    (out, removed)
}

pub fn gap_ratios(levels: &[f64], merge_rel_tol: f64) -> Result<GapRatioStats> {
    gap_ratios_with_excluded(levels, merge_rel_tol, 0)
}

fn gap_ratios_with_excluded(levels: &[f64], tol: f64, excluded: usize) -> Result<GapRatioStats> {
    if levels.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("levels must be finite".into()));
    }
    let (merged, removed) = merge_levels(levels, tol);
    if merged.len() < 4 {
        return Err(Error::TooFewLevels { found: merged.len() });
    }
    let spacings: Vec<f64> = merged.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios = spacings
        .windows(2)
        .map(|w| w[0].min(w[1]) / w[0].max(w[1]))
        .collect();
    GapRatioStats::from_ratios(ratios, excluded, removed)
}

/// Gap ratios of `−log ρ` on the eigenvalues above the default floor.
pub fn modular_gap_ratios(rho: &DensityMatrix, merge_rel_tol: f64) -> Result<GapRatioStats> {
    let k = modular_hamiltonian(rho, DEFAULT_MODULAR_FLOOR)?;
    gap_ratios_with_excluded(&k.levels, merge_rel_tol, k.excluded)
}
