//! Splits a reference map into overlapping submaps.
//!
//! The map's bounding box is cut into `k` equal cells along its longest axis.
//! Each cell is widened by `overlap_fraction` of its width, half on each side,
//! and an object belongs to every cell whose closed interval contains it.

use crate::error::{Error, Result};
use crate::types::{ObjectMap, SubmapSet};

pub fn partition_submaps(map: &ObjectMap, k: usize, overlap_fraction: f64) -> Result<SubmapSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("submap count must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidArgument(format!(
            "overlap fraction {overlap_fraction} outside [0, 1)"
        )));
    }
    if map.is_empty() {
        return Err(Error::InvalidArgument("cannot partition an empty map".into()));
    }
    if k == 1 {
        return Ok(SubmapSet {
            submaps: vec![map.clone()],
            overlap_fraction,
            source_map_id: map.frame_id().to_string(),
        });
    }

    let axis = longest_axis(map);
    let coords: Vec<f64> = map.objects().iter().map(|o| o.centroid[axis]).collect();
    let lo = coords.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / k as f64;
    let pad = 0.5 * overlap_fraction * width;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, &x) in coords.iter().enumerate() {
        // The home cell guarantees coverage even when rounding pushes `x`
        // just outside every computed interval.
        let home = if width > 0.0 {
            (((x - lo) / width).floor() as usize).min(k - 1)
        } else {
            0
        };
        for (cell, list) in members.iter_mut().enumerate() {
            let start = lo + cell as f64 * width - pad;
            let end = lo + (cell + 1) as f64 * width + pad;
            if cell == home || (start..=end).contains(&x) {
                list.push(idx);
            }
        }
    }

    let submaps = members
        .iter()
        .enumerate()
        .map(|(cell, idx)| map.subset(format!("{}/submap{cell}", map.frame_id()), idx))
        .collect();
    Ok(SubmapSet {
        submaps,
        overlap_fraction,
        source_map_id: map.frame_id().to_string(),
    })
}

/// Axis with the largest bounding-box extent; ties go to the lower axis.
fn longest_axis(map: &ObjectMap) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for axis in 0..3 {
        let (lo, hi) = map
            .objects()
            .iter()
            .map(|o| o.centroid[axis])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if hi - lo > best.1 {
            best = (axis, hi - lo);
        }
    }
    best.0
}
