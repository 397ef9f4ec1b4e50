//! Seeded synthetic scenarios with known ground truth.
//!
//! A reference map is scattered over a square area. A camera drives along a
//! waypoint polyline and observes the objects within range. A configured
//! fraction of the observed objects is substituted by positions with no
//! same-class reference object within `epsilon`. The rest are perceived at
//! their true position plus Gaussian centroid noise. Landmarks are generated
//! in symmetric pairs along rays inside each bounding box, so with zero noise
//! the centroid estimator recovers the perceived position exactly. Odometry
//! drift is a planar random walk whose step scale grows with distance traveled.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::{BoundingBox, CameraIntrinsics, Detection, FrameInput, Landmark};
use crate::types::{ObjectMap, Point3, RigidTransform, SemanticObject, TimedPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Placement {
    /// Uniform with a minimum pairwise separation.
    Uniform,
    /// Row-major square lattice (repetitive layouts / perceptual aliasing).
    Grid { spacing: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_ref_objects: usize,
    /// Side of the square area, meters; the area spans `[0, area]²`.
    pub area: f64,
    pub n_classes: u32,
    pub placement: Placement,
    /// Consistency threshold the scenario is built around (m).
    pub epsilon: f64,
    /// Defaults to `2ε/3`.
    pub min_separation: Option<f64>,
    pub outlier_fraction: f64,
    pub centroid_noise_sigma: f64,
    /// Odometry random-walk scale, meters per meter traveled.
    pub drift_rate: f64,
    /// Planar waypoints in the reference frame. Empty: a loop inset by 10%.
    pub trajectory: Vec<[f64; 2]>,
    pub speed: f64,
    pub frame_rate: f64,
    pub detection_range: f64,
    pub camera_height: f64,
    /// `[fx, fy, cx, cy]`; the image spans `[0, 2cx] × [0, 2cy]`.
    pub camera: [f64; 4],
    /// Physical half-extent of an object, sets its box size (m).
    pub object_radius: f64,
    /// Landmarks per detection (rounded up to an even count).
    pub landmarks_per_object: usize,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_ref_objects: 500,
            area: 1000.0,
            n_classes: 1,
            placement: Placement::Uniform,
            epsilon: 5.0,
            min_separation: None,
            outlier_fraction: 0.0,
            centroid_noise_sigma: 0.0,
            drift_rate: 0.0,
            trajectory: Vec::new(),
            speed: 10.0,
            frame_rate: 5.0,
            detection_range: 30.0,
            camera_height: 1.5,
            camera: [500.0, 500.0, 640.0, 240.0],
            object_radius: 1.0,
            landmarks_per_object: 4,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub reference: ObjectMap,
    pub frames: Vec<FrameInput>,
    /// Camera poses in the reference frame.
    pub ground_truth: Vec<TimedPose>,
    /// Maps the odometry frame into the reference frame.
    pub gt_alignment: RigidTransform,
    /// Objects as the vehicle perceives them, in the odometry frame without
    /// drift, ordered by first detection. Ids follow the reference ids.
    pub perceived: ObjectMap,
    /// Ids of `perceived` objects that have no reference counterpart.
    pub outlier_ids: Vec<u64>,
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must be in [0, 1]");
        }
        if self.area <= 0.0 || self.epsilon <= 0.0 || self.detection_range <= 0.0 {
            return bad("area, epsilon and detection_range must be positive");
        }
        if self.speed <= 0.0 || self.frame_rate <= 0.0 {
            return bad("speed and frame_rate must be positive");
        }
        if self.centroid_noise_sigma < 0.0 || self.drift_rate < 0.0 {
            return bad("noise and drift must be non-negative");
        }
        if self.n_classes == 0 {
            return bad("n_classes must be at least 1");
        }
        if self.camera[0] <= 0.0 || self.camera[1] <= 0.0 {
            return bad("focal lengths must be positive");
        }
        if self.trajectory.len() == 1 {
            return bad("trajectory needs at least two waypoints");
        }
        Ok(())
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation.unwrap_or(2.0 * self.epsilon / 3.0)
    }

    fn intrinsics(&self) -> CameraIntrinsics {
        let [fx, fy, cx, cy] = self.camera;
        CameraIntrinsics { fx, fy, cx, cy }
    }

    fn waypoints(&self) -> Vec<Vector2<f64>> {
        if !self.trajectory.is_empty() {
            return self.trajectory.iter().map(|w| Vector2::new(w[0], w[1])).collect();
        }
        let (lo, hi) = (0.1 * self.area, 0.9 * self.area);
        vec![
            Vector2::new(lo, lo),
            Vector2::new(hi, lo),
            Vector2::new(hi, hi),
            Vector2::new(lo, hi),
            Vector2::new(lo, lo),
        ]
    }
}

/// Spatial hash for minimum-separation queries.
struct Buckets {
    cell: f64,
    map: HashMap<(i64, i64), Vec<Vector2<f64>>>,
}

impl Buckets {
    fn new(cell: f64) -> Self {
        Self {
            cell: cell.max(1e-9),
            map: HashMap::new(),
        }
    }

    fn key(&self, p: &Vector2<f64>) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Vector2<f64>) {
        let k = self.key(&p);
        self.map.entry(k).or_default().push(p);
    }

    /// Whether any stored point lies strictly closer than `radius` (<= cell).
    fn any_within(&self, p: &Vector2<f64>, radius: f64) -> bool {
        let (kx, ky) = self.key(p);
        (kx - 1..=kx + 1).any(|x| {
            (ky - 1..=ky + 1).any(|y| {
                self.map
                    .get(&(x, y))
                    .is_some_and(|pts| pts.iter().any(|q| (q - p).norm() < radius))
            })
        })
    }
}

fn place_reference(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vector2<f64>>> {
    let n = config.n_ref_objects;
    match config.placement {
        Placement::Grid { spacing } => {
            if spacing <= 0.0 {
                return Err(Error::InvalidArgument("grid spacing must be positive".into()));
            }
            let per_row = (config.area / spacing).floor() as usize + 1;
            if per_row * per_row < n {
                return Err(Error::Infeasible(format!(
                    "{n} objects do not fit a {spacing} m grid over {} m",
                    config.area
                )));
            }
            Ok((0..n)
                .map(|i| Vector2::new((i % per_row) as f64 * spacing, (i / per_row) as f64 * spacing))
                .collect())
        }
        Placement::Uniform => {
            let sep = config.min_separation();
            // Random sequential packing jams near a covered fraction of ~0.55.
            let covered = n as f64 * PI * (sep / 2.0).powi(2) / config.area.powi(2);
            if covered > 0.5 {
                return Err(Error::Infeasible(format!(
                    "{n} objects with {sep} m separation cover {:.0}% of the area",
                    100.0 * covered
                )));
            }
            let mut buckets = Buckets::new(sep);
            let mut out = Vec::with_capacity(n);
            let max_attempts = 1000 * n.max(1);
            let mut attempts = 0;
            while out.len() < n {
                attempts += 1;
                if attempts > max_attempts {
                    return Err(Error::Infeasible(format!(
                        "placed only {} of {n} objects with {sep} m separation",
                        out.len()
                    )));
                }
                let p = Vector2::new(rng.random_range(0.0..config.area), rng.random_range(0.0..config.area));
                if sep > 0.0 && buckets.any_within(&p, sep) {
                    continue;
                }
                buckets.insert(p);
                out.push(p);
            }
            Ok(out)
        }
    }
}

/// Camera poses along the waypoint polyline at constant speed. The camera
/// looks along the direction of travel (z forward, x right, y down).
fn sample_trajectory(config: &ScenarioConfig) -> Vec<TimedPose> {
    let waypoints = config.waypoints();
    let step = config.speed / config.frame_rate;
    let mut poses = Vec::new();
    let mut travelled = 0.0;
    let mut next_sample = 0.0;
    for w in waypoints.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        if len == 0.0 {
            continue;
        }
        let heading = seg.y.atan2(seg.x);
        let orientation = camera_orientation(heading);
        while next_sample <= travelled + len {
            let s = next_sample - travelled;
            let p = w[0] + seg * (s / len);
            let i = poses.len();
            poses.push(TimedPose::new(
                i as f64 / config.frame_rate,
                Point3::new(p.x, p.y, config.camera_height),
                orientation,
            ));
            next_sample = (i + 1) as f64 * step;
        }
        travelled += len;
    }
    poses
}

fn camera_orientation(heading: f64) -> UnitQuaternion<f64> {
    let (s, c) = heading.sin_cos();
    let forward = Vector3::new(c, s, 0.0);
    let right = Vector3::new(s, -c, 0.0);
    let down = Vector3::new(0.0, 0.0, -1.0);
    let m = Matrix3::from_columns(&[right, down, forward]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Box of an object at camera-frame position `c`, if fully inside the image
/// and within range.
fn visible_box(config: &ScenarioConfig, cam: &CameraIntrinsics, c: &Point3) -> Option<BoundingBox> {
    if c.z < 1.0 || c.norm() > config.detection_range {
        return None;
    }
    let px = cam.project(c)?;
    let half = Vector2::new(cam.fx, cam.fy) * (config.object_radius / c.z);
    let (lo, hi) = (px - half, px + half);
    let inside = lo.x >= 0.0 && lo.y >= 0.0 && hi.x <= 2.0 * cam.cx && hi.y <= 2.0 * cam.cy;
    if !inside {
        return None;
    }
    BoundingBox::new(lo, hi).ok()
}

struct Sighting {
    index: usize,
    cam: Point3,
    bbox: BoundingBox,
}

/// Detections at one pose after occlusion: a box overlapping a nearer kept
/// box is dropped.
fn sightings(
    config: &ScenarioConfig,
    cam: &CameraIntrinsics,
    pose: &TimedPose,
    objects: &[Point3],
) -> Vec<Sighting> {
    let to_cam = pose.as_transform().inverse();
    let range2 = config.detection_range.powi(2);
    let mut candidates: Vec<Sighting> = objects
        .iter()
        .enumerate()
        .filter(|(_, p)| (*p - pose.position).norm_squared() <= range2)
        .filter_map(|(index, p)| {
            let c = to_cam.apply(p);
            visible_box(config, cam, &c).map(|bbox| Sighting { index, cam: c, bbox })
        })
        .collect();
    candidates.sort_by(|a, b| a.cam.norm().total_cmp(&b.cam.norm()).then(a.index.cmp(&b.index)));
    let mut kept: Vec<Sighting> = Vec::new();
    for s in candidates {
        if kept.iter().all(|k| !k.bbox.intersects(&s.bbox)) {
            kept.push(s);
        }
    }
    kept.sort_by_key(|s| s.index);
    kept
}

pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let cam = config.intrinsics();

    let planar = place_reference(config, &mut rng)?;
    let classes: Vec<u32> = (0..planar.len()).map(|_| rng.random_range(0..config.n_classes)).collect();
    let truth: Vec<Point3> = planar.iter().map(|p| Point3::new(p.x, p.y, 0.0)).collect();
    let reference = ObjectMap::new(
        "reference",
        truth
            .iter()
            .zip(&classes)
            .enumerate()
            .map(|(i, (p, &c))| SemanticObject::new(i as u64, c, *p))
            .collect(),
    )?;

    let ground_truth = sample_trajectory(config);
    if ground_truth.is_empty() {
        return Err(Error::InvalidArgument("trajectory has zero length".into()));
    }

    // Which reference objects the camera would detect at least twice.
    let mut counts = vec![0usize; truth.len()];
    for pose in &ground_truth {
        for s in sightings(config, &cam, pose, &truth) {
            counts[s.index] += 1;
        }
    }
    let observed: Vec<usize> = (0..truth.len()).filter(|&i| counts[i] >= 2).collect();

    // Perceived positions: substitutes for outliers, noisy truth otherwise.
    let noise = Normal::new(0.0, config.centroid_noise_sigma.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut perceived_world = truth.clone();
    let mut shuffled = observed.clone();
    shuffled.shuffle(&mut rng);
    let n_outliers = (config.outlier_fraction * observed.len() as f64).round() as usize;
    let outlier_set: HashSet<usize> = shuffled[..n_outliers].iter().copied().collect();

    let sep = config.min_separation();
    let mut occupied = Buckets::new(sep.max(config.epsilon));
    for &i in &observed {
        if !outlier_set.contains(&i) {
            occupied.insert(planar[i]);
        }
    }
    let mut by_class: HashMap<u32, Buckets> = HashMap::new();
    for (i, p) in planar.iter().enumerate() {
        by_class
            .entry(classes[i])
            .or_insert_with(|| Buckets::new(config.epsilon))
            .insert(*p);
    }
    let mut outlier_ids = Vec::new();
    let mut sorted_outliers: Vec<usize> = outlier_set.iter().copied().collect();
    sorted_outliers.sort_unstable();
    // Substitutes go to a random spot in view of a random frame. Placing them
    // near their originals would correlate the offsets and hand spurious
    // near-truth alignments a consistent set.
    let lateral = 0.8 * cam.cx / cam.fx;
    let range = config.detection_range;
    for &i in &sorted_outliers {
        let mut placed = None;
        for _ in 0..1000 {
            let pose = &ground_truth[rng.random_range(0..ground_truth.len())];
            let forward = pose.orientation * Vector3::z();
            let forward = Vector2::new(forward.x, forward.y).normalize();
            let right = Vector2::new(forward.y, -forward.x);
            let depth = rng.random_range(0.3 * range..0.8 * range);
            let side = rng.random_range(-lateral..=lateral) * depth;
            let p = pose.position.xy() + forward * depth + right * side;
            let clear_of_reference = !by_class[&classes[i]].any_within(&p, config.epsilon);
            if clear_of_reference && !occupied.any_within(&p, sep) {
                placed = Some(p);
                break;
            }
        }
        let p = placed.ok_or_else(|| {
            Error::Infeasible(format!("no free position for outlier substitute of object {i}"))
        })?;
        occupied.insert(p);
        perceived_world[i] = Point3::new(p.x, p.y, 0.0);
        outlier_ids.push(i as u64);
    }
    for &i in &observed {
        if !outlier_set.contains(&i) && config.centroid_noise_sigma > 0.0 {
            perceived_world[i] += Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        }
    }
    let visible: Vec<Point3> = observed.iter().map(|&i| perceived_world[i]).collect();

    // Odometry frame: the first camera pose.
    let gt_alignment = ground_truth[0].as_transform();
    let to_odom = gt_alignment.inverse();
    let drift_noise = Normal::new(0.0, 1.0).unwrap();

    let mut frames = Vec::with_capacity(ground_truth.len());
    let mut drift = Vector3::zeros();
    let mut first_seen: Vec<Option<usize>> = vec![None; visible.len()];
    let half_pairs = config.landmarks_per_object.div_ceil(2).max(1);
    for (k, gt_pose) in ground_truth.iter().enumerate() {
        if k > 0 && config.drift_rate > 0.0 {
            let step = (gt_pose.position - ground_truth[k - 1].position).norm();
            let scale = config.drift_rate * step;
            drift += Vector3::new(
                drift_noise.sample(&mut rng) * scale,
                drift_noise.sample(&mut rng) * scale,
                0.0,
            );
        }
        let true_odom = gt_pose.transformed(&to_odom);
        let odom_pose = TimedPose::new(true_odom.timestamp, true_odom.position + drift, true_odom.orientation);
        let odom_tf = odom_pose.as_transform();

        let mut landmarks = Vec::new();
        let mut detections = Vec::new();
        for s in sightings(config, &cam, gt_pose, &visible) {
            first_seen[s.index].get_or_insert(k);
            let range = s.cam.norm();
            let (lo, hi) = (s.bbox.min(), s.bbox.max());
            let inner = (hi - lo) * 0.4;
            let center = s.bbox.center();
            for _ in 0..half_pairs {
                let px = Vector2::new(
                    center.x + rng.random_range(-inner.x..=inner.x),
                    center.y + rng.random_range(-inner.y..=inner.y),
                );
                let ray = cam.ray(&px);
                let spread = rng.random_range(0.0..config.object_radius);
                for d in [range - spread, range + spread] {
                    landmarks.push(Landmark {
                        position: odom_tf.apply(&(ray * d)),
                        pixel: px,
                    });
                }
            }
            detections.push(Detection {
                bbox: s.bbox,
                class_label: classes[observed[s.index]],
            });
        }
        frames.push(FrameInput {
            timestamp: gt_pose.timestamp,
            pose: odom_pose,
            camera: cam,
            landmarks,
            detections,
        });
    }

    let mut order: Vec<usize> = (0..visible.len()).filter(|&j| first_seen[j].is_some()).collect();
    order.sort_by_key(|&j| (first_seen[j], j));
    let perceived = ObjectMap::new(
        "perceived",
        order
            .iter()
            .map(|&j| {
                let i = observed[j];
                SemanticObject::new(i as u64, classes[i], to_odom.apply(&perceived_world[i]))
            })
            .collect(),
    )?;
    let detected: HashSet<u64> = perceived.ids().collect();
    outlier_ids.retain(|id| detected.contains(id));

    Ok(Scenario {
        reference,
        frames,
        ground_truth,
        gt_alignment,
        perceived,
        outlier_ids,
    })
}

/// Replaces `count` randomly chosen objects of `window` (odometry frame) by
/// substitutes with no same-class reference object within `epsilon` under
/// `gt_alignment`. Substitutes are uniform over the window's footprint in the
/// reference frame and keep `min_separation` from the other window objects.
/// Returns the new window and the replaced ids.
pub fn inject_outliers<R: Rng>(
    window: &ObjectMap,
    reference: &ObjectMap,
    gt_alignment: &RigidTransform,
    count: usize,
    epsilon: f64,
    min_separation: f64,
    rng: &mut R,
) -> Result<(ObjectMap, Vec<u64>)> {
    if count > window.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot replace {count} of {} objects",
            window.len()
        )));
    }
    let world: Vec<Point3> = window.objects().iter().map(|o| gt_alignment.apply(&o.centroid)).collect();
    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for p in &world {
        lo = lo.inf(&p.xy());
        hi = hi.sup(&p.xy());
    }
    let mut by_class: HashMap<u32, Buckets> = HashMap::new();
    for o in reference.objects() {
        by_class
            .entry(o.class_label)
            .or_insert_with(|| Buckets::new(epsilon))
            .insert(o.centroid.xy());
    }
    let mut picks: Vec<usize> = (0..window.len()).collect();
    picks.shuffle(rng);
    picks.truncate(count);
    picks.sort_unstable();
    let chosen: HashSet<usize> = picks.iter().copied().collect();

    let mut occupied = Buckets::new(min_separation);
    for (i, p) in world.iter().enumerate() {
        if !chosen.contains(&i) {
            occupied.insert(p.xy());
        }
    }
    let to_odom = gt_alignment.inverse();
    let mut objects = window.objects().to_vec();
    for &i in &picks {
        let class = objects[i].class_label;
        let z = world[i].z;
        let mut placed = None;
        for _ in 0..10_000 {
            let p = Vector2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
            let clear = by_class.get(&class).is_none_or(|b| !b.any_within(&p, epsilon));
            if clear && !occupied.any_within(&p, min_separation) {
                placed = Some(p);
                break;
            }
        }
        let p = placed.ok_or_else(|| Error::Infeasible(format!("no free position for outlier {}", objects[i].id)))?;
        occupied.insert(p);
        objects[i].centroid = to_odom.apply(&Point3::new(p.x, p.y, z));
    }
    let ids = picks.iter().map(|&i| objects[i].id).collect();
    Ok((ObjectMap::new(window.frame_id(), objects)?, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::outlier_ratio;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            n_ref_objects: 120,
            area: 300.0,
            trajectory: vec![[20.0, 20.0], [280.0, 20.0], [280.0, 280.0], [20.0, 280.0]],
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = ScenarioConfig { outlier_fraction: 0.3, centroid_noise_sigma: 0.2, drift_rate: 0.01, ..small() };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = ScenarioConfig { rng_seed: 1, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().reference, generate(&other).unwrap().reference);
    }

    #[test]
    fn separation_respected() {
        let s = generate(&small()).unwrap();
        let pts: Vec<_> = s.reference.objects().iter().map(|o| o.centroid).collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                assert!((pts[i] - pts[j]).norm() >= 10.0 / 3.0);
            }
        }
    }

    #[test]
    fn infeasible_density() {
        let cfg = ScenarioConfig { n_ref_objects: 100_000, area: 100.0, ..Default::default() };
        assert!(matches!(generate(&cfg), Err(Error::Infeasible(_))));
        let grid = ScenarioConfig {
            n_ref_objects: 200,
            area: 100.0,
            placement: Placement::Grid { spacing: 10.0 },
            ..Default::default()
        };
        assert!(matches!(generate(&grid), Err(Error::Infeasible(_))));
    }

    #[test]
    fn grid_mode_places_lattice() {
        let cfg = ScenarioConfig {
            n_ref_objects: 25,
            area: 200.0,
            placement: Placement::Grid { spacing: 10.0 },
            ..Default::default()
        };
        let s = generate(&cfg).unwrap();
        assert_eq!(s.reference.get(21).centroid, Point3::new(0.0, 10.0, 0.0));
    }

    #[test]
    fn clean_scenario_is_consistent() {
        let s = generate(&small()).unwrap();
        assert!(!s.perceived.is_empty());
        assert!(s.outlier_ids.is_empty());
        assert!(s.reference.is_planar());
        // Perceived objects land on their reference counterparts.
        for o in s.perceived.objects() {
            let world = s.gt_alignment.apply(&o.centroid);
            assert!((world - s.reference.get(o.id as usize).centroid).norm() < 1e-9);
        }
        // Odometry equals the aligned ground truth.
        for (f, g) in s.frames.iter().zip(&s.ground_truth) {
            let p = f.pose.transformed(&s.gt_alignment);
            assert!((p.position - g.position).norm() < 1e-9);
        }
    }

    #[test]
    fn outliers_are_clear_of_reference() {
        let cfg = ScenarioConfig { outlier_fraction: 0.5, ..small() };
        let s = generate(&cfg).unwrap();
        assert!(!s.outlier_ids.is_empty());
        let outliers: HashSet<u64> = s.outlier_ids.iter().copied().collect();
        for o in s.perceived.objects() {
            let world = s.gt_alignment.apply(&o.centroid);
            let nearest = s
                .reference
                .objects()
                .iter()
                .map(|r| (r.centroid - world).norm())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(nearest > cfg.epsilon, outliers.contains(&o.id), "object {}", o.id);
        }
        let pct = outlier_ratio(&s.perceived, &s.reference, &s.gt_alignment, cfg.epsilon);
        assert!((pct / 100.0 - s.outlier_ids.len() as f64 / s.perceived.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn injected_outliers_are_exact() {
        let s = generate(&small()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = s.perceived.len();
        let (window, ids) = inject_outliers(&s.perceived, &s.reference, &s.gt_alignment, n / 2, 5.0, 10.0 / 3.0, &mut rng).unwrap();
        assert_eq!(ids.len(), n / 2);
        assert_eq!(window.len(), n);
        let pct = outlier_ratio(&window, &s.reference, &s.gt_alignment, 5.0);
        assert!((pct - 100.0 * (n / 2) as f64 / n as f64).abs() < 1e-9);
        assert!(inject_outliers(&s.perceived, &s.reference, &s.gt_alignment, n + 1, 5.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn frames_use_odometry_frame() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.frames[0].pose.position, Point3::zeros());
        assert!(s.frames.iter().any(|f| !f.detections.is_empty()));
        assert!(s.frames.iter().all(|f| f.landmarks.len() >= 2 * f.detections.len()));
    }
}
