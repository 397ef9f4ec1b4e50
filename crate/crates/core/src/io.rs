//! Line-oriented text formats: object maps, trajectories and frame inputs.
//!
//! All formats are whitespace-separated, one record per line. Blank lines and
//! lines starting with `#` are ignored. Floats are written with Rust's
//! shortest round-trip representation, so writing then parsing is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mapper::{BoundingBox, CameraIntrinsics, Detection, FrameInput, Landmark};
use crate::types::{ObjectMap, Point3, SemanticObject, TimedPose};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Yields `(1-based line number, fields)` for every record line.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

fn field<T: FromStr>(fields: &[&str], index: usize, line: usize, name: &str) -> Result<T> {
    let raw = fields
        .get(index)
        .ok_or_else(|| Error::parse(line, format!("missing field `{name}`")))?;
    raw.parse()
        .map_err(|_| Error::parse(line, format!("invalid {name} `{raw}`")))
}

fn finite(fields: &[&str], index: usize, line: usize, name: &str) -> Result<f64> {
    let v: f64 = field(fields, index, line, name)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, format!("non-finite {name}")))
    }
}

fn expect_len(fields: &[&str], n: usize, line: usize, what: &str) -> Result<()> {
    if fields.len() != n {
        return Err(Error::parse(
            line,
            format!("{what} record needs {n} fields, found {}", fields.len()),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Object maps: `<id> <class> <x> <y> <z>`

pub fn parse_object_map(text: &str, frame_id: &str) -> Result<ObjectMap> {
    let mut objects = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (line, f) in records(text) {
        expect_len(&f, 5, line, "object")?;
        let id: u64 = field(&f, 0, line, "id")?;
        let class_label: u32 = field(&f, 1, line, "class")?;
        let centroid = Point3::new(
            finite(&f, 2, line, "x")?,
            finite(&f, 3, line, "y")?,
            finite(&f, 4, line, "z")?,
        );
        if !ids.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        objects.push(SemanticObject::new(id, class_label, centroid));
    }
    ObjectMap::new(frame_id, objects)
}

/// Reads an object map; the frame id is the file stem.
pub fn load_object_map(path: impl AsRef<Path>) -> Result<ObjectMap> {
    let path = path.as_ref();
    let frame_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_object_map(&read(path)?, &frame_id)
}

pub fn format_object_map(map: &ObjectMap) -> String {
    let mut out = String::new();
    for o in map.objects() {
        let c = o.centroid;
        writeln!(out, "{} {} {} {} {}", o.id, o.class_label, c.x, c.y, c.z).unwrap();
    }
    out
}

pub fn save_object_map(path: impl AsRef<Path>, map: &ObjectMap) -> Result<()> {
    write_file(path.as_ref(), &format_object_map(map))
}

// ---------------------------------------------------------------------------
// Trajectories: `<t> <tx> <ty> <tz> <qw> <qx> <qy> <qz>`

fn parse_pose(f: &[&str], offset: usize, line: usize) -> Result<TimedPose> {
    let t = finite(f, offset, line, "timestamp")?;
    let p = Point3::new(
        finite(f, offset + 1, line, "tx")?,
        finite(f, offset + 2, line, "ty")?,
        finite(f, offset + 3, line, "tz")?,
    );
    let q = [
        finite(f, offset + 4, line, "qw")?,
        finite(f, offset + 5, line, "qx")?,
        finite(f, offset + 6, line, "qy")?,
        finite(f, offset + 7, line, "qz")?,
    ];
    TimedPose::from_wxyz(t, p, q).map_err(|e| Error::parse(line, e.to_string()))
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TimedPose>> {
    let mut poses: Vec<TimedPose> = Vec::new();
    for (line, f) in records(text) {
        expect_len(&f, 8, line, "pose")?;
        let pose = parse_pose(&f, 0, line)?;
        if let Some(prev) = poses.last() {
            if pose.timestamp < prev.timestamp {
                return Err(Error::parse(line, "timestamps must be non-decreasing"));
            }
        }
        poses.push(pose);
    }
    Ok(poses)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<TimedPose>> {
    parse_trajectory(&read(path.as_ref())?)
}

fn pose_fields(p: &TimedPose) -> String {
    let [w, x, y, z] = p.wxyz();
    format!(
        "{} {} {} {} {} {} {} {}",
        p.timestamp, p.position.x, p.position.y, p.position.z, w, x, y, z
    )
}

pub fn format_trajectory(poses: &[TimedPose]) -> String {
    let mut out = String::new();
    for p in poses {
        out.push_str(&pose_fields(p));
        out.push('\n');
    }
    out
}

pub fn save_trajectory(path: impl AsRef<Path>, poses: &[TimedPose]) -> Result<()> {
    write_file(path.as_ref(), &format_trajectory(poses))
}

// ---------------------------------------------------------------------------
// Frame inputs:
//   POSE t tx ty tz qw qx qy qz
//   CAM fx fy cx cy
//   LM t x y z u v
//   DET t umin vmin umax vmax class
//
// `CAM` sets the intrinsics for every following frame. Records are grouped by
// timestamp in ascending order, and every group starts with its `POSE`.

pub fn parse_frames(text: &str) -> Result<Vec<FrameInput>> {
    let mut frames: Vec<FrameInput> = Vec::new();
    let mut camera: Option<CameraIntrinsics> = None;

    let current = |frames: &mut Vec<FrameInput>, t: f64, line: usize| -> Result<usize> {
        match frames.last() {
            Some(f) if f.timestamp == t => Ok(frames.len() - 1),
            _ => Err(Error::parse(
                line,
                format!("record at t = {t} does not follow a POSE with that timestamp"),
            )),
        }
    };

    for (line, f) in records(text) {
        match f[0] {
            "CAM" => {
                expect_len(&f, 5, line, "CAM")?;
                let cam = CameraIntrinsics {
                    fx: finite(&f, 1, line, "fx")?,
                    fy: finite(&f, 2, line, "fy")?,
                    cx: finite(&f, 3, line, "cx")?,
                    cy: finite(&f, 4, line, "cy")?,
                };
                if cam.fx <= 0.0 || cam.fy <= 0.0 {
                    return Err(Error::parse(line, "focal lengths must be positive"));
                }
                camera = Some(cam);
            }
            "POSE" => {
                expect_len(&f, 9, line, "POSE")?;
                let pose = parse_pose(&f, 1, line)?;
                if let Some(prev) = frames.last() {
                    if pose.timestamp <= prev.timestamp {
                        return Err(Error::parse(line, "frame timestamps must be increasing"));
                    }
                }
                let camera = camera
                    .ok_or_else(|| Error::parse(line, "POSE before any CAM record"))?;
                frames.push(FrameInput {
                    timestamp: pose.timestamp,
                    pose,
                    camera,
                    landmarks: Vec::new(),
                    detections: Vec::new(),
                });
            }
            "LM" => {
                expect_len(&f, 7, line, "LM")?;
                let t = finite(&f, 1, line, "timestamp")?;
                let idx = current(&mut frames, t, line)?;
                frames[idx].landmarks.push(Landmark {
                    position: Point3::new(
                        finite(&f, 2, line, "x")?,
                        finite(&f, 3, line, "y")?,
                        finite(&f, 4, line, "z")?,
                    ),
                    pixel: Vector2::new(finite(&f, 5, line, "u")?, finite(&f, 6, line, "v")?),
                });
            }
            "DET" => {
                expect_len(&f, 7, line, "DET")?;
                let t = finite(&f, 1, line, "timestamp")?;
                let idx = current(&mut frames, t, line)?;
                let bbox = BoundingBox::new(
                    Vector2::new(finite(&f, 2, line, "umin")?, finite(&f, 3, line, "vmin")?),
                    Vector2::new(finite(&f, 4, line, "umax")?, finite(&f, 5, line, "vmax")?),
                )
                .map_err(|e| Error::parse(line, e.to_string()))?;
                let class_label: u32 = field(&f, 6, line, "class")?;
                frames[idx].detections.push(Detection { bbox, class_label });
            }
            other => {
                return Err(Error::parse(line, format!("unknown record type `{other}`")));
            }
        }
    }
    Ok(frames)
}

pub fn load_frames(path: impl AsRef<Path>) -> Result<Vec<FrameInput>> {
    parse_frames(&read(path.as_ref())?)
}

pub fn format_frames(frames: &[FrameInput]) -> String {
    let mut out = String::new();
    let mut camera: Option<CameraIntrinsics> = None;
    for frame in frames {
        if camera != Some(frame.camera) {
            let c = frame.camera;
            writeln!(out, "CAM {} {} {} {}", c.fx, c.fy, c.cx, c.cy).unwrap();
            camera = Some(c);
        }
        writeln!(out, "POSE {}", pose_fields(&frame.pose)).unwrap();
        let t = frame.timestamp;
        for lm in &frame.landmarks {
            let p = lm.position;
            writeln!(out, "LM {t} {} {} {} {} {}", p.x, p.y, p.z, lm.pixel.x, lm.pixel.y).unwrap();
        }
        for det in &frame.detections {
            let (lo, hi) = (det.bbox.min(), det.bbox.max());
            writeln!(out, "DET {t} {} {} {} {} {}", lo.x, lo.y, hi.x, hi.y, det.class_label)
                .unwrap();
        }
    }
    out
}

pub fn save_frames(path: impl AsRef<Path>, frames: &[FrameInput]) -> Result<()> {
    write_file(path.as_ref(), &format_frames(frames))
}
