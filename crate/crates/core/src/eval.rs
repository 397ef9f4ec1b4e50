//! Evaluation metrics and run reports.

use serde::Serialize;

use crate::mapper::{tracks_as_map, TrackedObject};
use crate::tracker::SequenceOutcome;
use crate::types::{ObjectMap, RigidTransform, TimedPose};

/// Maximum timestamp gap when pairing estimates with ground truth (s).
pub const DEFAULT_TIME_TOLERANCE: f64 = 0.05;

/// Euclidean position error in meters. In planar mode the out-of-plane
/// component is discarded first (the reference plane is `z = 0`).
pub fn position_error(est: &TimedPose, gt: &TimedPose, planar: bool) -> f64 {
    let mut diff = gt.position - est.position;
    if planar {
        diff.z = 0.0;
    }
    diff.norm()
}

/// `(180/π)·acos(|⟨q_gt, q_est⟩|)` in degrees, in `[0, 90]`.
pub fn orientation_error(est: &TimedPose, gt: &TimedPose) -> f64 {
    let dot = est.orientation.coords.dot(&gt.orientation.coords).abs().min(1.0);
    dot.acos().to_degrees()
}

/// Percentage of vehicle objects with no same-class reference object within
/// `epsilon` once the vehicle map is moved by `gt_alignment`.
pub fn outlier_ratio(
    veh_map: &ObjectMap,
    ref_map: &ObjectMap,
    gt_alignment: &RigidTransform,
    epsilon: f64,
) -> f64 {
    assert!(epsilon > 0.0, "epsilon must be positive");
    if veh_map.is_empty() {
        return 0.0;
    }
    let outliers = veh_map
        .objects()
        .iter()
        .filter(|v| {
            let p = gt_alignment.apply(&v.centroid);
            !ref_map
                .objects()
                .iter()
                .any(|r| r.class_label == v.class_label && (r.centroid - p).norm() < epsilon)
        })
        .count();
    100.0 * outliers as f64 / veh_map.len() as f64
}

/// Pairs every estimate with the nearest ground-truth pose in time; estimates
/// with no ground truth within `tolerance` are dropped.
pub fn associate_by_time<'a>(
    est: &'a [TimedPose],
    gt: &'a [TimedPose],
    tolerance: f64,
) -> Vec<(&'a TimedPose, &'a TimedPose)> {
    est.iter()
        .filter_map(|e| {
            let i = gt.partition_point(|g| g.timestamp < e.timestamp);
            let candidates = [i.checked_sub(1), Some(i)];
            candidates
                .into_iter()
                .flatten()
                .filter_map(|j| gt.get(j))
                .map(|g| (g, (g.timestamp - e.timestamp).abs()))
                .filter(|&(_, dt)| dt <= tolerance)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(g, _)| (e, g))
        })
        .collect()
}

/// Arc length of the trajectory up to time `until` (linear interpolation
/// inside the last segment).
pub fn arc_length_until(traj: &[TimedPose], until: f64) -> f64 {
    let mut length = 0.0;
    for w in traj.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.timestamp <= until {
            length += (b.position - a.position).norm();
        } else {
            if until > a.timestamp {
                let f = (until - a.timestamp) / (b.timestamp - a.timestamp);
                length += f * (b.position - a.position).norm();
            }
            break;
        }
    }
    length
}

pub fn arc_length(traj: &[TimedPose]) -> f64 {
    traj.windows(2)
        .map(|w| (w[1].position - w[0].position).norm())
        .sum()
}

/// Reference-from-odometry alignment implied by the first ground-truth pose
/// and the first odometry pose (odometry drift is zero at the start).
pub fn alignment_from_first_poses(gt: &[TimedPose], odometry: &[TimedPose]) -> Option<RigidTransform> {
    let g = gt.first()?;
    let o = odometry.first()?;
    Some(g.as_transform().compose(&o.as_transform().inverse()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSample {
    pub t: f64,
    pub e_p: f64,
    pub e_o: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_position_error_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_orientation_error_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_to_localize_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_to_localize_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_length_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objects_to_localize: Option<usize>,
    pub objects_in_reference: usize,
    pub objects_seen: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outlier_percent: Option<f64>,
    #[serde(skip)]
    pub series: Vec<ErrorSample>,
}

impl RunReport {
    /// `t,e_p,e_o` rows with a header line.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,e_p,e_o\n");
        for s in &self.series {
            out.push_str(&format!("{},{},{}\n", s.t, s.e_p, s.e_o));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub epsilon: f64,
    pub planar: bool,
    pub time_tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            epsilon: 5.0,
            planar: false,
            time_tolerance: DEFAULT_TIME_TOLERANCE,
        }
    }
}

/// Per-timestep errors of `est` against `gt` for estimates at or after
/// `since`.
pub fn error_series(est: &[TimedPose], gt: &[TimedPose], since: f64, config: &EvalConfig) -> Vec<ErrorSample> {
    associate_by_time(est, gt, config.time_tolerance)
        .into_iter()
        .filter(|(e, _)| e.timestamp >= since)
        .map(|(e, g)| ErrorSample {
            t: e.timestamp,
            e_p: position_error(e, g, config.planar),
            e_o: orientation_error(e, g),
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fill_errors(report: &mut RunReport, series: Vec<ErrorSample>) {
    report.avg_position_error_m = mean(series.iter().map(|s| s.e_p));
    report.avg_orientation_error_deg = mean(series.iter().map(|s| s.e_o));
    report.series = series;
}

/// Summarizes a completed localization run.
///
/// Without ground truth only the localization time and the object counts are
/// reported. The outlier percentage needs `gt_alignment`, the
/// reference-from-odometry transform.
pub fn summarize(
    outcome: &SequenceOutcome,
    reference: &ObjectMap,
    ground_truth: Option<&[TimedPose]>,
    gt_alignment: Option<&RigidTransform>,
    config: &EvalConfig,
) -> RunReport {
    let localized_at = outcome.state.localized_at;
    let start = outcome.first_timestamp();
    let mut report = RunReport {
        objects_in_reference: reference.len(),
        objects_seen: outcome.tracks.len(),
        time_to_localize_s: localized_at.zip(start).map(|(l, s)| l - s),
        objects_to_localize: localized_at.map(|l| tracks_created_by(&outcome.tracks, l)),
        ..Default::default()
    };
    if let Some(gt) = ground_truth {
        report.trajectory_length_m = Some(arc_length(gt));
        report.distance_to_localize_m = localized_at.map(|l| arc_length_until(gt, l));
        if let Some(l) = localized_at {
            fill_errors(&mut report, error_series(&outcome.trajectory, gt, l, config));
        }
    }
    if let Some(alignment) = gt_alignment {
        report.outlier_percent = Some(outlier_ratio(
            &tracks_as_map(&outcome.tracks),
            reference,
            alignment,
            config.epsilon,
        ));
    }
    report
}

fn tracks_created_by(tracks: &[TrackedObject], t: f64) -> usize {
    tracks.iter().filter(|tr| tr.first_seen <= t).count()
}

/// Compares an estimated trajectory with ground truth when no run state is
/// available: localization is taken to start at the first estimate.
pub fn evaluate_trajectories(est: &[TimedPose], gt: &[TimedPose], config: &EvalConfig) -> RunReport {
    let mut report = RunReport {
        trajectory_length_m: Some(arc_length(gt)),
        ..Default::default()
    };
    if let (Some(first_est), Some(first_gt)) = (est.first(), gt.first()) {
        let l = first_est.timestamp;
        report.time_to_localize_s = Some(l - first_gt.timestamp);
        report.distance_to_localize_m = Some(arc_length_until(gt, l));
        fill_errors(&mut report, error_series(est, gt, l, config));
    }
    report
}
