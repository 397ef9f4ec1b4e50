//! Continuous localization: periodic registration over submaps, the
//! acceptance rule, and mapping odometry poses into the reference frame.

use log::info;
use rayon::prelude::*;

use crate::mapper::{FrameInput, MapperConfig, ObjectMapper, TrackedObject};
use crate::maxclique::CliqueOptions;
use crate::registration::{register, RegistrationParams, RegistrationResult};
use crate::types::{RigidTransform, SubmapSet, TimedPose};

/// Tracker memory. `active_transform` is set exactly when a registration has
/// been accepted, and `best_inlier_count` never decreases.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalizationState {
    pub best_inlier_count: usize,
    pub active_transform: Option<RigidTransform>,
    pub localized_at: Option<f64>,
    pub accepted_history: Vec<RegistrationResult>,
}

/// Whether `inliers >= ratio * best`, evaluated with a small relative
/// tolerance so that e.g. 27 against 0.9 * 30 is not lost to rounding.
pub fn passes_ratio(inliers: usize, best: usize, ratio: f64) -> bool {
    let threshold = ratio * best as f64;
    inliers as f64 >= threshold - 1e-9 * threshold.max(1.0)
}

impl LocalizationState {
    pub fn is_localized(&self) -> bool {
        self.active_transform.is_some()
    }

    /// Applies the acceptance rule to one registration outcome observed at
    /// `timestamp`. Returns whether it was accepted.
    pub fn consider(
        &mut self,
        result: Option<RegistrationResult>,
        acceptance_ratio: f64,
        timestamp: f64,
    ) -> bool {
        assert!(
            acceptance_ratio > 0.0 && acceptance_ratio <= 1.0,
            "acceptance ratio must be in (0, 1]"
        );
        let Some(result) = result else {
            return false;
        };
        if !passes_ratio(result.inlier_count, self.best_inlier_count, acceptance_ratio) {
            return false;
        }
        self.best_inlier_count = self.best_inlier_count.max(result.inlier_count);
        self.active_transform = Some(result.transform);
        self.localized_at.get_or_insert(timestamp);
        self.accepted_history.push(result);
        true
    }

    /// The odometry pose expressed in the reference frame, once localized.
    pub fn localize_pose(&self, odom_pose: &TimedPose) -> Option<TimedPose> {
        self.active_transform.map(|t| odom_pose.transformed(&t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub epsilon: f64,
    pub window_size: usize,
    pub min_inliers: usize,
    pub acceptance_ratio: f64,
    /// New tracks between registration rounds.
    pub registration_stride: usize,
    pub mapper: MapperConfig,
    pub clique: CliqueOptions,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            epsilon: 5.0,
            window_size: 75,
            min_inliers: 20,
            acceptance_ratio: 0.9,
            registration_stride: 5,
            mapper: MapperConfig::default(),
            clique: CliqueOptions::default(),
        }
    }
}

/// One registration round.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationAttempt {
    pub timestamp: f64,
    pub window_size: usize,
    /// `(submap_index, inlier_count)` of the strongest result, if any.
    pub best: Option<(usize, usize)>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutcome {
    /// Reference-frame poses for every frame from the first acceptance on.
    pub trajectory: Vec<TimedPose>,
    /// Odometry poses of every frame.
    pub odometry: Vec<TimedPose>,
    pub state: LocalizationState,
    pub tracks: Vec<TrackedObject>,
    pub attempts: Vec<RegistrationAttempt>,
}

impl SequenceOutcome {
    pub fn first_timestamp(&self) -> Option<f64> {
        self.odometry.first().map(|p| p.timestamp)
    }
}

/// Strongest result: most inliers, ties to the lower submap index.
fn strongest(results: Vec<Option<RegistrationResult>>) -> Option<RegistrationResult> {
    results
        .into_iter()
        .flatten()
        .reduce(|best, r| if r.inlier_count > best.inlier_count { r } else { best })
}

/// Registers `window` against every submap (in parallel) and returns the
/// per-submap results in submap order.
pub fn register_submaps(
    submaps: &SubmapSet,
    window: &crate::types::ObjectMap,
    params: &RegistrationParams,
) -> Vec<Option<RegistrationResult>> {
    submaps
        .submaps
        .par_iter()
        .enumerate()
        .map(|(i, submap)| {
            register(submap, window, params).map(|mut r| {
                r.submap_index = i;
                r
            })
        })
        .collect()
}

/// Runs the full pipeline over a time-ordered frame sequence.
pub fn run_sequence(
    frames: &[FrameInput],
    submaps: &SubmapSet,
    config: &TrackerConfig,
) -> SequenceOutcome {
    assert!(config.registration_stride >= 1, "registration stride must be positive");
    let params = RegistrationParams {
        epsilon: config.epsilon,
        min_inliers: config.min_inliers,
        clique: config.clique,
    };
    let mut mapper = ObjectMapper::new(config.mapper);
    let mut state = LocalizationState::default();
    let mut trajectory = Vec::new();
    let mut odometry = Vec::with_capacity(frames.len());
    let mut attempts = Vec::new();
    let mut pending = 0;

    for frame in frames {
        odometry.push(frame.pose);
        pending += mapper.process(frame);
        if pending >= config.registration_stride {
            pending = 0;
            let window = mapper.window(config.window_size);
            if window.len() >= config.min_inliers {
                let best = strongest(register_submaps(submaps, &window, &params));
                let summary = best.as_ref().map(|r| (r.submap_index, r.inlier_count));
                let accepted = state.consider(best, config.acceptance_ratio, frame.timestamp);
                if accepted {
                    info!(
                        "t = {}: accepted registration with {} inliers (submap {})",
                        frame.timestamp,
                        summary.map_or(0, |s| s.1),
                        summary.map_or(0, |s| s.0)
                    );
                }
                attempts.push(RegistrationAttempt {
                    timestamp: frame.timestamp,
                    window_size: window.len(),
                    best: summary,
                    accepted,
                });
            }
        }
        if let Some(pose) = state.localize_pose(&frame.pose) {
            trajectory.push(pose);
        }
    }

    SequenceOutcome {
        trajectory,
        odometry,
        state,
        tracks: mapper.tracks().to_vec(),
        attempts,
    }
}
