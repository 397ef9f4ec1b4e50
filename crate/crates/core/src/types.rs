//! Shared data model: semantic objects, object maps, rigid transforms and poses.

use std::collections::HashSet;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// A detected object instance reduced to a centroid and an integer class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticObject {
    pub id: u64,
    pub centroid: Point3,
    pub class_label: u32,
}

impl SemanticObject {
    pub fn new(id: u64, class_label: u32, centroid: Point3) -> Self {
        Self {
            id,
            centroid,
            class_label,
        }
    }
}

/// An ordered collection of objects expressed in one frame.
///
/// Object ids are unique and every centroid is finite. `planar` is inferred:
/// it is set when every centroid has a third component of exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMap {
    objects: Vec<SemanticObject>,
    frame_id: String,
    planar: bool,
}

impl ObjectMap {
    pub fn new(frame_id: impl Into<String>, objects: Vec<SemanticObject>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(objects.len());
        for obj in &objects {
            if !obj.centroid.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite(obj.id));
            }
            if !seen.insert(obj.id) {
                return Err(Error::DuplicateId(obj.id));
            }
        }
        let planar = objects.iter().all(|o| o.centroid.z == 0.0);
        Ok(Self {
            objects,
            frame_id: frame_id.into(),
            planar,
        })
    }

    pub fn empty(frame_id: impl Into<String>) -> Self {
        Self {
            objects: Vec::new(),
            frame_id: frame_id.into(),
            planar: true,
        }
    }

    pub fn objects(&self) -> &[SemanticObject] {
        &self.objects
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn is_planar(&self) -> bool {
        self.planar
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, index: usize) -> &SemanticObject {
        &self.objects[index]
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.objects.iter().map(|o| o.id)
    }

    /// Maps every centroid through `transform`, keeping ids and classes.
    pub fn transformed(&self, transform: &RigidTransform) -> ObjectMap {
        let objects: Vec<SemanticObject> = self
            .objects
            .iter()
            .map(|o| SemanticObject {
                centroid: transform.apply(&o.centroid),
                ..*o
            })
            .collect();
        let planar = objects.iter().all(|o| o.centroid.z == 0.0);
        ObjectMap {
            objects,
            frame_id: self.frame_id.clone(),
            planar,
        }
    }

    pub(crate) fn subset(&self, frame_id: String, indices: &[usize]) -> ObjectMap {
        ObjectMap {
            objects: indices.iter().map(|&i| self.objects[i]).collect(),
            frame_id,
            planar: self.planar,
        }
    }
}

/// Applies `transform` to every centroid of `map`.
pub fn apply_transform(map: &ObjectMap, transform: &RigidTransform) -> ObjectMap {
    map.transformed(transform)
}

const ORTHONORMAL_TOL: f64 = 1e-9;

/// A proper rigid motion `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > ORTHONORMAL_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max deviation {:e})",
                gram.amax()
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: &Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *rotation.matrix(),
            translation,
        }
    }

    pub fn from_quaternion(rotation: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self::from_rotation(&rotation.to_rotation_matrix(), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, point: &Point3) -> Point3 {
        self.rotation * point + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }

    /// Geodesic angle (radians) between the two rotations.
    pub fn rotation_error(&self, other: &RigidTransform) -> f64 {
        let relative = self.rotation.transpose() * other.rotation;
        let cos = ((relative.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        cos.acos()
    }

    pub fn translation_error(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

const QUATERNION_INPUT_TOL: f64 = 1e-6;

/// A timestamped pose; the orientation is a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub timestamp: f64,
    pub position: Point3,
    pub orientation: UnitQuaternion<f64>,
}

impl TimedPose {
    pub fn new(timestamp: f64, position: Point3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            timestamp,
            position,
            orientation,
        }
    }

    /// Builds a pose from a `(w, x, y, z)` quaternion. The input norm must be
    /// within 1e-6 of one. Inputs already unit to rounding level are kept
    /// bit-for-bit so that written poses read back identically; others are
    /// renormalized.
    pub fn from_wxyz(timestamp: f64, position: Point3, wxyz: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_INPUT_TOL {
            return Err(Error::InvalidArgument(format!(
                "quaternion norm {norm} is not 1"
            )));
        }
        let orientation = if (norm - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self::new(timestamp, position, orientation))
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// The pose as a transform from the body frame to the parent frame.
    pub fn as_transform(&self) -> RigidTransform {
        RigidTransform::from_quaternion(&self.orientation, self.position)
    }

    /// Left-multiplies the pose by `transform`.
    pub fn transformed(&self, transform: &RigidTransform) -> TimedPose {
        TimedPose {
            timestamp: self.timestamp,
            position: transform.apply(&self.position),
            orientation: transform.quaternion() * self.orientation,
        }
    }
}

/// A set of overlapping submaps covering a source map.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmapSet {
    pub submaps: Vec<ObjectMap>,
    pub overlap_fraction: f64,
    pub source_map_id: String,
}

impl SubmapSet {
    /// Wraps a whole map as a single submap.
    pub fn single(map: &ObjectMap) -> Self {
        Self {
            submaps: vec![map.clone()],
            overlap_fraction: 0.0,
            source_map_id: map.frame_id().to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.submaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.submaps.is_empty()
    }
}
