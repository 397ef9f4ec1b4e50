//! Builds the vehicle object map from per-frame landmarks and detections.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::types::{ObjectMap, Point3, SemanticObject, TimedPose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Unit viewing ray (camera frame, z forward) through pixel `(u, v)`.
    pub fn ray(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy, 1.0).normalize()
    }

    /// Pixel of a camera-frame point, or `None` behind the camera.
    pub fn project(&self, p: &Point3) -> Option<Vector2<f64>> {
        (p.z > 0.0).then(|| {
            Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
        })
    }
}

/// Axis-aligned pixel box with positive width and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    min: Vector2<f64>,
    max: Vector2<f64>,
}

impl BoundingBox {
    pub fn new(min: Vector2<f64>, max: Vector2<f64>) -> Result<Self> {
        if !(max.x > min.x && max.y > min.y) {
            return Err(Error::InvalidArgument(format!(
                "bounding box ({}, {})-({}, {}) has no area",
                min.x, min.y, max.x, max.y
            )));
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> Vector2<f64> {
        self.min
    }

    pub fn max(&self) -> Vector2<f64> {
        self.max
    }

    pub fn center(&self) -> Vector2<f64> {
        (self.min + self.max) / 2.0
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

/// A reconstructed landmark: odometry-frame position and its pixel in this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub position: Point3,
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class_label: u32,
}

/// Everything observed at one timestamp. `pose` is the camera pose in the
/// odometry frame (camera z axis forward).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub timestamp: f64,
    pub pose: TimedPose,
    pub camera: CameraIntrinsics,
    pub landmarks: Vec<Landmark>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedObject {
    pub track_id: u64,
    pub class_label: u32,
    /// Odometry frame.
    pub centroid: Point3,
    pub observation_count: u32,
    pub first_seen: f64,
    pub last_seen: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapperConfig {
    /// Landmarks required inside a box before a centroid is estimated.
    pub min_landmarks: usize,
    /// Association gate between a new centroid and an existing track (m).
    pub gate_radius: f64,
    /// Observations a track needs before it enters the window.
    pub min_observations: u32,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            min_landmarks: 3,
            gate_radius: 2.5,
            min_observations: 2,
        }
    }
}

/// Centroid (odometry frame) for one detection: the point along the ray
/// through the box center at the mean camera distance of the landmarks whose
/// pixels fall inside the box.
pub fn estimate_centroid(
    frame: &FrameInput,
    detection_index: usize,
    min_landmarks: usize,
) -> Option<Point3> {
    let bbox = &frame.detections[detection_index].bbox;
    let center = frame.pose.position;
    let (sum, count) = frame
        .landmarks
        .iter()
        .filter(|lm| bbox.contains(&lm.pixel))
        .fold((0.0, 0usize), |(s, c), lm| (s + (lm.position - center).norm(), c + 1));
    if count == 0 || count < min_landmarks {
        return None;
    }
    let range = sum / count as f64;
    let ray = frame.camera.ray(&bbox.center());
    Some(center + frame.pose.orientation * (ray * range))
}

/// Fuses the frame's detections into `tracks`; returns how many tracks were
/// created.
///
/// Each centroid joins the nearest same-class track within the gate radius
/// that has not already been updated by this frame, updating its running
/// mean. Otherwise it starts a new track.
pub fn update_tracks(
    tracks: &mut Vec<TrackedObject>,
    frame: &FrameInput,
    config: &MapperConfig,
) -> usize {
    let before = tracks.len();
    let mut touched = vec![false; tracks.len()];
    for det_idx in 0..frame.detections.len() {
        let Some(centroid) = estimate_centroid(frame, det_idx, config.min_landmarks) else {
            continue;
        };
        let class_label = frame.detections[det_idx].class_label;
        let nearest = tracks
            .iter()
            .enumerate()
            .filter(|(i, t)| !touched[*i] && t.class_label == class_label)
            .map(|(i, t)| (i, (t.centroid - centroid).norm()))
            .filter(|&(_, d)| d <= config.gate_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((i, _)) => {
                let t = &mut tracks[i];
                t.observation_count += 1;
                t.centroid += (centroid - t.centroid) / f64::from(t.observation_count);
                t.last_seen = frame.timestamp;
                touched[i] = true;
            }
            None => {
                tracks.push(TrackedObject {
                    track_id: tracks.len() as u64,
                    class_label,
                    centroid,
                    observation_count: 1,
                    first_seen: frame.timestamp,
                    last_seen: frame.timestamp,
                });
                touched.push(true);
            }
        }
    }
    tracks.len() - before
}

/// The `window_size` most recently seen tracks with at least
/// `min_observations` observations (ties on `last_seen` keep the lower track
/// id), as an object map ordered by track id.
pub fn current_window(
    tracks: &[TrackedObject],
    window_size: usize,
    min_observations: u32,
) -> ObjectMap {
    let mut eligible: Vec<&TrackedObject> = tracks
        .iter()
        .filter(|t| t.observation_count >= min_observations)
        .collect();
    eligible.sort_by(|a, b| {
        b.last_seen
            .total_cmp(&a.last_seen)
            .then(a.track_id.cmp(&b.track_id))
    });
    eligible.truncate(window_size);
    eligible.sort_by_key(|t| t.track_id);
    let objects = eligible
        .iter()
        .map(|t| SemanticObject::new(t.track_id, t.class_label, t.centroid))
        .collect();
    ObjectMap::new("vehicle", objects).expect("track ids are unique and centroids finite")
}

/// Every track as an object map, regardless of observation count.
pub fn tracks_as_map(tracks: &[TrackedObject]) -> ObjectMap {
    let objects = tracks
        .iter()
        .map(|t| SemanticObject::new(t.track_id, t.class_label, t.centroid))
        .collect();
    ObjectMap::new("vehicle", objects).expect("track ids are unique and centroids finite")
}

/// Stateful wrapper feeding frames in timestamp order.
#[derive(Debug, Clone, Default)]
pub struct ObjectMapper {
    config: MapperConfig,
    tracks: Vec<TrackedObject>,
    detections_processed: usize,
}

impl ObjectMapper {
    pub fn new(config: MapperConfig) -> Self {
        Self {
            config,
            tracks: Vec::new(),
            detections_processed: 0,
        }
    }

    /// Returns the number of tracks created by this frame.
    pub fn process(&mut self, frame: &FrameInput) -> usize {
        self.detections_processed += frame.detections.len();
        update_tracks(&mut self.tracks, frame, &self.config)
    }

    pub fn tracks(&self) -> &[TrackedObject] {
        &self.tracks
    }

    pub fn detections_processed(&self) -> usize {
        self.detections_processed
    }

    pub fn window(&self, window_size: usize) -> ObjectMap {
        current_window(&self.tracks, window_size, self.config.min_observations)
    }

    pub fn config(&self) -> &MapperConfig {
        &self.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    const CAM: CameraIntrinsics = CameraIntrinsics {
        fx: 500.0,
        fy: 500.0,
        cx: 320.0,
        cy: 240.0,
    };

    fn bbox(u0: f64, v0: f64, u1: f64, v1: f64) -> BoundingBox {
        BoundingBox::new(Vector2::new(u0, v0), Vector2::new(u1, v1)).unwrap()
    }

    fn identity_pose(t: f64) -> TimedPose {
        TimedPose::new(t, Point3::zeros(), UnitQuaternion::identity())
    }

    /// A frame observing each world point (camera frame = odometry frame when
    /// `pose` is the identity) with one landmark on the point itself and a
    /// pair straddling it along the viewing ray.
    fn frame_seeing(t: f64, pose: TimedPose, objects: &[(Point3, u32)]) -> FrameInput {
        let to_cam = pose.as_transform().inverse();
        let mut landmarks = Vec::new();
        let mut detections = Vec::new();
        for &(world, class_label) in objects {
            let cam = to_cam.apply(&world);
            let px = CAM.project(&cam).unwrap();
            let dir = cam.normalize();
            for offset in [0.0, -0.5, 0.5] {
                let lm_cam = cam + dir * offset;
                landmarks.push(Landmark {
                    position: pose.as_transform().apply(&lm_cam),
                    pixel: CAM.project(&lm_cam).unwrap(),
                });
            }
            detections.push(Detection {
                bbox: bbox(px.x - 10.0, px.y - 10.0, px.x + 10.0, px.y + 10.0),
                class_label,
            });
        }
        FrameInput {
            timestamp: t,
            pose,
            camera: CAM,
            landmarks,
            detections,
        }
    }

    #[test]
    fn single_landmark_collapse() {
        let target = Point3::new(0.0, 0.0, 10.0);
        let frame = FrameInput {
            timestamp: 0.0,
            pose: identity_pose(0.0),
            camera: CAM,
            landmarks: vec![Landmark {
                position: target,
                pixel: Vector2::new(320.0, 240.0),
            }],
            detections: vec![Detection {
                bbox: bbox(300.0, 220.0, 340.0, 260.0),
                class_label: 0,
            }],
        };
        let c = estimate_centroid(&frame, 0, 1).unwrap();
        assert!((c - target).norm() < 1e-9);
        assert!(estimate_centroid(&frame, 0, 3).is_none());
    }

    #[test]
    fn mean_distance_along_axis() {
        let frame = FrameInput {
            timestamp: 0.0,
            pose: identity_pose(0.0),
            camera: CAM,
            landmarks: vec![
                Landmark {
                    position: Point3::new(0.0, 0.0, 8.0),
                    pixel: Vector2::new(325.0, 240.0),
                },
                Landmark {
                    position: Point3::new(0.0, 0.0, 12.0),
                    pixel: Vector2::new(318.0, 236.0),
                },
                // Outside the box: ignored.
                Landmark {
                    position: Point3::new(0.0, 0.0, 100.0),
                    pixel: Vector2::new(10.0, 10.0),
                },
            ],
            detections: vec![Detection {
                bbox: bbox(300.0, 220.0, 340.0, 260.0),
                class_label: 0,
            }],
        };
        let c = estimate_centroid(&frame, 0, 2).unwrap();
        assert!((c - Point3::new(0.0, 0.0, 10.0)).norm() < 1e-12);
    }

    #[test]
    fn empty_box_gives_none() {
        let frame = FrameInput {
            timestamp: 0.0,
            pose: identity_pose(0.0),
            camera: CAM,
            landmarks: vec![],
            detections: vec![Detection {
                bbox: bbox(0.0, 0.0, 1.0, 1.0),
                class_label: 0,
            }],
        };
        assert!(estimate_centroid(&frame, 0, 1).is_none());
        assert!(estimate_centroid(&frame, 0, 0).is_none());
    }

    #[test]
    fn centroid_uses_pose() {
        let pose = TimedPose::new(
            0.0,
            Point3::new(5.0, -3.0, 1.0),
            UnitQuaternion::from_euler_angles(0.1, 0.4, -0.7),
        );
        let world = Point3::new(9.0, 4.0, 12.0);
        let frame = frame_seeing(0.0, pose, &[(world, 0)]);
        let c = estimate_centroid(&frame, 0, 3).unwrap();
        assert!((c - world).norm() < 1e-9);
    }

    #[test]
    fn repeated_observation_fuses() {
        let obj = [(Point3::new(1.0, 0.5, 15.0), 0)];
        let mut tracks = Vec::new();
        let cfg = MapperConfig::default();
        assert_eq!(update_tracks(&mut tracks, &frame_seeing(0.0, identity_pose(0.0), &obj), &cfg), 1);
        let moved = TimedPose::new(1.0, Point3::new(0.0, 0.0, 2.0), UnitQuaternion::identity());
        assert_eq!(update_tracks(&mut tracks, &frame_seeing(1.0, moved, &obj), &cfg), 0);
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].observation_count, 2);
        assert_eq!(tracks[0].last_seen, 1.0);
        assert_eq!(tracks[0].first_seen, 0.0);
        assert!((tracks[0].centroid - obj[0].0).norm() < 1e-9);
    }

    #[test]
    fn running_mean_of_observations() {
        let mut tracks = vec![TrackedObject {
            track_id: 0,
            class_label: 0,
            centroid: Point3::new(0.0, 0.0, 10.0),
            observation_count: 1,
            first_seen: 0.0,
            last_seen: 0.0,
        }];
        let frame = frame_seeing(1.0, identity_pose(1.0), &[(Point3::new(0.0, 1.0, 10.0), 0)]);
        update_tracks(&mut tracks, &frame, &MapperConfig::default());
        assert!((tracks[0].centroid - Point3::new(0.0, 0.5, 10.0)).norm() < 1e-9);
    }

    #[test]
    fn separated_objects_make_two_tracks() {
        let objs = [(Point3::new(-5.0, 0.0, 20.0), 0), (Point3::new(5.0, 0.0, 20.0), 0)];
        let mut tracks = Vec::new();
        update_tracks(&mut tracks, &frame_seeing(0.0, identity_pose(0.0), &objs), &MapperConfig::default());
        assert_eq!(tracks.len(), 2);
    }

    #[test]
    fn class_gates_matching() {
        let mut tracks = Vec::new();
        let cfg = MapperConfig::default();
        let p = Point3::new(0.0, 0.0, 10.0);
        update_tracks(&mut tracks, &frame_seeing(0.0, identity_pose(0.0), &[(p, 0)]), &cfg);
        update_tracks(&mut tracks, &frame_seeing(1.0, identity_pose(1.0), &[(p, 1)]), &cfg);
        assert_eq!(tracks.len(), 2);
    }

    #[test]
    fn drift_duplicates_tracks() {
        // The odometry believes the camera moved 3 m sideways while it did not:
        // the re-observed object lands 3 m from its track, outside the gate.
        let world = Point3::new(0.0, 0.0, 12.0);
        let cfg = MapperConfig::default();
        let mut tracks = Vec::new();
        update_tracks(&mut tracks, &frame_seeing(0.0, identity_pose(0.0), &[(world, 0)]), &cfg);
        let true_pose = identity_pose(1.0);
        let mut frame = frame_seeing(1.0, true_pose, &[(world, 0)]);
        let drift = Vector3::new(3.0, 0.0, 0.0);
        frame.pose.position += drift;
        for lm in &mut frame.landmarks {
            lm.position += drift;
        }
        update_tracks(&mut tracks, &frame, &cfg);
        assert_eq!(tracks.len(), 2);
        assert!((tracks[1].centroid - (world + drift)).norm() < 1e-9);

        // Drift inside the gate still fuses.
        let mut tracks2 = vec![tracks[0]];
        let mut frame = frame_seeing(2.0, identity_pose(2.0), &[(world, 0)]);
        let small = Vector3::new(1.0, 0.0, 0.0);
        frame.pose.position += small;
        for lm in &mut frame.landmarks {
            lm.position += small;
        }
        update_tracks(&mut tracks2, &frame, &cfg);
        assert_eq!(tracks2.len(), 1);
    }

    fn track(id: u64, last_seen: f64, count: u32) -> TrackedObject {
        TrackedObject {
            track_id: id,
            class_label: 0,
            centroid: Point3::new(id as f64, 0.0, 0.0),
            observation_count: count,
            first_seen: 0.0,
            last_seen,
        }
    }

    #[test]
    fn window_keeps_most_recent() {
        let tracks: Vec<_> = (0..80).map(|i| track(i, i as f64, 2)).collect();
        let w = current_window(&tracks, 75, 2);
        assert_eq!(w.len(), 75);
        assert_eq!(w.ids().collect::<Vec<_>>(), (5..80).collect::<Vec<_>>());
    }

    #[test]
    fn underfull_window() {
        let tracks: Vec<_> = (0..10).map(|i| track(i, i as f64, 3)).collect();
        assert_eq!(current_window(&tracks, 75, 2).len(), 10);
    }

    #[test]
    fn window_tie_prefers_lower_id() {
        let tracks = vec![track(0, 5.0, 2), track(1, 3.0, 2), track(2, 3.0, 2)];
        let w = current_window(&tracks, 2, 2);
        assert_eq!(w.ids().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn single_observation_tracks_wait() {
        let tracks = vec![track(0, 1.0, 1), track(1, 0.5, 2)];
        assert_eq!(current_window(&tracks, 75, 2).ids().collect::<Vec<_>>(), vec![1]);
        assert_eq!(current_window(&tracks, 75, 1).len(), 2);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(BoundingBox::new(Vector2::new(1.0, 1.0), Vector2::new(1.0, 2.0)).is_err());
        assert!(BoundingBox::new(Vector2::new(1.0, 1.0), Vector2::new(2.0, 0.5)).is_err());
    }
}
