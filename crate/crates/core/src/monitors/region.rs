use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometrySample;

use super::same_grid;

/// The negative-curvature region of one snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSlice {
    /// Nodes with `H < -c`, ascending.
    pub omega_minus: Vec<usize>,
    /// Nodes outside the region with a neighbour inside it.
    pub gamma: Vec<usize>,
}

impl RegionSlice {
    pub fn is_empty(&self) -> bool {
        self.omega_minus.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.omega_minus.binary_search(&j).is_ok()
    }
}

pub fn region_negative_h(sample: &GeometrySample, c: f64) -> Result<RegionSlice> {
    if !(c > 0.0) {
        return Err(Error::Input(format!("region threshold c must be positive (got {c})")));
    }
    let inside: Vec<bool> = sample.mean.iter().map(|&h| h < -c).collect();
    let n = inside.len();
    let omega_minus = (0..n).filter(|&j| inside[j]).collect();
    let gamma = (0..n)
        .filter(|&j| {
            !inside[j] && ((j > 0 && inside[j - 1]) || (j + 1 < n && inside[j + 1]))
        })
        .collect();
    Ok(RegionSlice { omega_minus, gamma })
}

/// Region slices of a whole trajectory with per-node entry and exit events.
///
/// Membership changes are only classified between snapshots on the same grid; the
/// first snapshot after a regrid starts a fresh record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionTrack {
    pub c: f64,
    pub slices: Vec<RegionSlice>,
    /// `(snapshot, node)` pairs that joined the region at that snapshot.
    pub entries: Vec<(usize, usize)>,
    pub exits: Vec<(usize, usize)>,
    /// Snapshots whose predecessor lies on a different grid.
    pub restarts: Vec<usize>,
}

pub fn region_track(samples: &[GeometrySample], c: f64) -> Result<RegionTrack> {
    let slices = samples
        .iter()
        .map(|s| region_negative_h(s, c))
        .collect::<Result<Vec<_>>>()?;
    let mut track = RegionTrack { c, slices, entries: vec![], exits: vec![], restarts: vec![] };
    for m in 1..samples.len() {
        if !same_grid(&samples[m - 1], &samples[m]) {
            track.restarts.push(m);
            continue;
        }
        let (prev, cur) = (&track.slices[m - 1], &track.slices[m]);
        for &j in &cur.omega_minus {
            if !prev.contains(j) {
                track.entries.push((m, j));
            }
        }
        for &j in &prev.omega_minus {
            if !cur.contains(j) {
                track.exits.push((m, j));
            }
        }
    }
    Ok(track)
}
