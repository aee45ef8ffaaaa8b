//! Square sector grid over the base map and seeded per-sector heights.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::AreaId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub sector_id: String,
    pub row: u32,
    pub col: u32,
    pub assigned_area_id: AreaId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorGrid {
    pub extent_m: u32,
    pub sector_size_m: u32,
    pub rows: u32,
    pub cols: u32,
    pub sectors: Vec<Sector>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("extent and sector size must be positive")]
    NonPositive,
    #[error("extent {extent_m} m is not a whole number of {sector_size_m} m sectors ({ratio} per side, remainder {remainder_m} m)")]
    NonIntegerRatio {
        extent_m: u32,
        sector_size_m: u32,
        ratio: f64,
        remainder_m: u32,
    },
    #[error("sector assignments do not cover the grid: missing {missing:?}, extra {extra:?}")]
    Coverage {
        missing: Vec<(u32, u32)>,
        extra: Vec<(u32, u32)>,
    },
}

pub fn sector_id(row: u32, col: u32) -> String {
    format!("r{row}c{col}")
}

pub fn build_sector_grid(
    extent_m: u32,
    sector_size_m: u32,
    assignments: &BTreeMap<(u32, u32), AreaId>,
) -> Result<SectorGrid, GridError> {
    if extent_m == 0 || sector_size_m == 0 {
        return Err(GridError::NonPositive);
    }
    let remainder_m = extent_m % sector_size_m;
    if remainder_m != 0 {
        return Err(GridError::NonIntegerRatio {
            extent_m,
            sector_size_m,
            ratio: extent_m as f64 / sector_size_m as f64,
            remainder_m,
        });
    }
    let n = extent_m / sector_size_m;
    let mut missing = Vec::new();
    let mut sectors = Vec::with_capacity((n * n) as usize);
    for row in 0..n {
        for col in 0..n {
            match assignments.get(&(row, col)) {
                Some(area) => sectors.push(Sector {
                    sector_id: sector_id(row, col),
                    row,
                    col,
                    assigned_area_id: area.clone(),
                }),
                None => missing.push((row, col)),
            }
        }
    }
    let extra: Vec<_> = assignments.keys().filter(|(r, c)| *r >= n || *c >= n).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(GridError::Coverage { missing, extra });
    }
    Ok(SectorGrid { extent_m, sector_size_m, rows: n, cols: n, sectors })
}

/// Inclusive height interval for one zone, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightRange {
    pub min_m: f64,
    pub max_m: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeightError {
    #[error("no height limits for zone `{0}`")]
    MissingZone(AreaId),
    #[error("invalid height limits for zone `{zone}`: [{min_m}, {max_m}]")]
    InvalidRange { zone: AreaId, min_m: f64, max_m: f64 },
}

/// Deterministic per-sector generator keyed by `(seed, sector_id)`.
fn sector_rng(seed: u64, sector_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(sector_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Draws each sector's height uniformly from its zone's limits. Heights depend
/// only on `(seed, sector_id, limits)`, never on sector order.
pub fn assign_heights(
    grid: &SectorGrid,
    zone_limits: &BTreeMap<AreaId, HeightRange>,
    seed: u64,
) -> Result<BTreeMap<String, f64>, HeightError> {
    let zones: BTreeSet<&AreaId> = grid.sectors.iter().map(|s| &s.assigned_area_id).collect();
    for zone in zones {
        let range = zone_limits.get(zone).ok_or_else(|| HeightError::MissingZone(zone.clone()))?;
        if !(range.min_m > 0.0 && range.min_m <= range.max_m) {
            return Err(HeightError::InvalidRange {
                zone: zone.clone(),
                min_m: range.min_m,
                max_m: range.max_m,
            });
        }
    }
    Ok(grid
        .sectors
        .iter()
        .map(|s| {
            let range = zone_limits[&s.assigned_area_id];
            let h = if range.min_m == range.max_m {
                range.min_m
            } else {
                sector_rng(seed, &s.sector_id).random_range(range.min_m..=range.max_m)
            };
            (s.sector_id.clone(), h)
        })
        .collect())
}
