//! Registration of a vehicle object window against a reference submap.

use std::time::Instant;

use log::{debug, warn};
use nalgebra::{Matrix3, Vector3};

use crate::association::{
    build_consistency_graph, generate_associations, pairwise_distance_error, Association,
};
use crate::graph::Graph;
use crate::error::{Error, Result};
use crate::maxclique::{max_clique_colored, CliqueOptions};
use crate::types::{ObjectMap, Point3, RigidTransform};

/// Relative singular-value threshold below which the cross-covariance is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-9;

/// Least-squares rigid transform mapping `veh_points` onto `ref_points`
/// (SVD of the centered cross-covariance, with a determinant correction that
/// keeps the result a proper rotation).
pub fn fit_rigid(ref_points: &[Point3], veh_points: &[Point3]) -> Result<RigidTransform> {
    if ref_points.len() != veh_points.len() {
        return Err(Error::InvalidArgument(format!(
            "point lists differ in length ({} vs {})",
            ref_points.len(),
            veh_points.len()
        )));
    }
    if ref_points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 correspondences, got {}",
            ref_points.len()
        )));
    }
    let n = ref_points.len() as f64;
    let ref_mean = ref_points.iter().sum::<Vector3<f64>>() / n;
    let veh_mean = veh_points.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    for (p, q) in ref_points.iter().zip(veh_points) {
        cov += (q - veh_mean) * (p - ref_mean).transpose();
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();

    let scale = ref_points
        .iter()
        .chain(veh_points)
        .map(|p| p.norm())
        .fold(1.0, f64::max);
    if s[0] <= f64::EPSILON * scale * scale || s[1] <= RANK_TOL * s[0] {
        return Err(Error::DegenerateGeometry(
            "correspondences are collinear or coincident".into(),
        ));
    }

    let u = Matrix3::from_columns(&[u.column(idx[0]), u.column(idx[1]), u.column(idx[2])]);
    let v = v_t.transpose();
    let v = Matrix3::from_columns(&[v.column(idx[0]), v.column(idx[1]), v.column(idx[2])]);
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let translation = ref_mean - rotation * veh_mean;
    RigidTransform::new(rotation, translation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationParams {
    /// Consistency threshold in meters.
    pub epsilon: f64,
    pub min_inliers: usize,
    pub clique: CliqueOptions,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            epsilon: 5.0,
            min_inliers: 20,
            clique: CliqueOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps vehicle-frame points into the reference frame.
    pub transform: RigidTransform,
    /// `(ref_id, veh_id)` object id pairs, in association order.
    pub inliers: Vec<(u64, u64)>,
    pub inlier_count: usize,
    pub rms_residual: f64,
    pub submap_index: usize,
    pub association_count: usize,
    pub edge_count: usize,
    /// False if the clique search hit its node budget.
    pub optimal: bool,
}

/// Associates, builds the consistency graph, finds its maximum clique and fits
/// a rigid transform to the clique. Returns `None` when no clique reaches
/// `min_inliers` or when the clique geometry is degenerate.
/// Maximum cliques are often not unique: a vehicle object may pair with its
/// true partner or with an unobserved same-class neighbor less than epsilon
/// away, and both choices are consistent with the rest. Among such
/// equal-size alternatives, swap single members while the total pairwise
/// distance error strictly drops. Costs depend only on distances, so the
/// choice is invariant to rigid motions of either map.
fn settle_ties(
    graph: &Graph,
    associations: &[Association],
    mut members: Vec<usize>,
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
) -> Vec<usize> {
    let cost = |node: usize, others: &[usize]| -> f64 {
        others
            .iter()
            .map(|&o| pairwise_distance_error(&associations[node], &associations[o], ref_map, veh_map))
            .sum()
    };
    // Each accepted swap strictly lowers the total error, so this terminates;
    // the round cap only bounds pathological float behavior.
    for _ in 0..members.len() * 4 {
        let mut improved = false;
        for k in 0..members.len() {
            let current = members[k];
            let others: Vec<usize> = members.iter().copied().filter(|&m| m != current).collect();
            let Some(&anchor) = others.iter().min_by_key(|&&o| (graph.degree(o), o)) else {
                break;
            };
            let mut best = (cost(current, &others), current);
            for &c in graph.neighbors(anchor) {
                let c = c as usize;
                if c == current || members.contains(&c) || !others.iter().all(|&o| graph.has_edge(c, o)) {
                    continue;
                }
                let cand = cost(c, &others);
                if cand < best.0 - 1e-9 * best.0.max(1.0) {
                    best = (cand, c);
                }
            }
            if best.1 != current {
                members[k] = best.1;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    members.sort_unstable();
    members
}

pub fn register(
    ref_submap: &ObjectMap,
    veh_window: &ObjectMap,
    params: &RegistrationParams,
) -> Option<RegistrationResult> {
    assert!(params.epsilon > 0.0, "epsilon must be positive");
    assert!(params.min_inliers >= 3, "min_inliers must be at least 3");

    let started = Instant::now();
    let associations = generate_associations(ref_submap, veh_window);
    let graph = build_consistency_graph(&associations, ref_submap, veh_window, params.epsilon);
    debug!(
        "registering {} vs {}: {} associations, {} edges ({:.3} s)",
        ref_submap.frame_id(),
        veh_window.frame_id(),
        graph.node_count(),
        graph.edge_count(),
        started.elapsed().as_secs_f64()
    );
    // Associations sharing a vehicle object are never adjacent, so the
    // vehicle index is a proper coloring.
    let by_vehicle: Vec<u32> = associations.iter().map(|a| a.veh_index as u32).collect();
    let clique = max_clique_colored(graph.graph(), params.min_inliers, &params.clique, &by_vehicle)?;
    debug!(
        "clique of {} after {} nodes ({:.3} s)",
        clique.size,
        clique.nodes_explored,
        clique.wall_time
    );
    let members = settle_ties(graph.graph(), &associations, clique.members, ref_submap, veh_window);

    let matched: Vec<_> = members.iter().map(|&i| associations[i]).collect();
    let ref_points: Vec<Point3> = matched
        .iter()
        .map(|a| ref_submap.get(a.ref_index).centroid)
        .collect();
    let veh_points: Vec<Point3> = matched
        .iter()
        .map(|a| veh_window.get(a.veh_index).centroid)
        .collect();

    let transform = match fit_rigid(&ref_points, &veh_points) {
        Ok(t) => t,
        Err(e) => {
            warn!(
                "discarding {}-object clique against {}: {e}",
                matched.len(),
                ref_submap.frame_id()
            );
            return None;
        }
    };

    let sq_sum: f64 = ref_points
        .iter()
        .zip(&veh_points)
        .map(|(p, q)| (p - transform.apply(q)).norm_squared())
        .sum();
    let rms_residual = (sq_sum / matched.len() as f64).sqrt();

    Some(RegistrationResult {
        transform,
        inliers: matched
            .iter()
            .map(|a| (ref_submap.get(a.ref_index).id, veh_window.get(a.veh_index).id))
            .collect(),
        inlier_count: matched.len(),
        rms_residual,
        submap_index: 0,
        association_count: associations.len(),
        edge_count: graph.edge_count(),
        optimal: clique.optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SemanticObject;
    use nalgebra::{Rotation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let rot = UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(-3.0..3.0));
        RigidTransform::from_quaternion(
            &rot,
            Vector3::new(
                rng.random_range(-100.0..100.0),
                rng.random_range(-100.0..100.0),
                rng.random_range(-10.0..10.0),
            ),
        )
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-side..side),
                    rng.random_range(-side..side),
                    rng.random_range(-side..side) * 0.2,
                )
            })
            .collect()
    }

    fn map_from(points: &[Point3], first_id: u64) -> ObjectMap {
        ObjectMap::new(
            "m",
            points
                .iter()
                .enumerate()
                .map(|(i, p)| SemanticObject::new(first_id + i as u64, 0, *p))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 8, 20.0);
        let t = fit_rigid(&pts, &pts).unwrap();
        assert!((t.rotation() - Matrix3::identity()).amax() < 1e-12);
        assert!(t.translation().amax() < 1e-12);
    }

    #[test]
    fn recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let truth = random_transform(&mut rng);
            let veh = random_points(&mut rng, 10, 30.0);
            let refp: Vec<Point3> = veh.iter().map(|q| truth.apply(q)).collect();
            let t = fit_rigid(&refp, &veh).unwrap();
            assert!((t.rotation() - truth.rotation()).amax() < 1e-9);
            assert!((t.translation() - truth.translation()).amax() < 1e-9);
        }
    }

    #[test]
    fn coplanar_points_fit() {
        let rot = Rotation3::from_euler_angles(0.0, 0.0, 1.2);
        let truth = RigidTransform::from_rotation(&rot, Vector3::new(4.0, -2.0, 0.0));
        let veh = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(0.0, 7.0, 0.0),
            Point3::new(3.0, 3.0, 0.0),
        ];
        let refp: Vec<Point3> = veh.iter().map(|q| truth.apply(q)).collect();
        let t = fit_rigid(&refp, &veh).unwrap();
        assert!((t.rotation() - truth.rotation()).amax() < 1e-12);
        assert!(t.rotation().determinant() > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let line = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(2.0, 2.0, 2.0),
        ];
        assert!(matches!(fit_rigid(&line, &line), Err(Error::DegenerateGeometry(_))));
        let same = vec![Point3::new(1.0, 2.0, 3.0); 4];
        assert!(matches!(fit_rigid(&same, &same), Err(Error::DegenerateGeometry(_))));
        assert!(matches!(
            fit_rigid(&line[..2], &line[..2]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(fit_rigid(&line, &line[..2]).is_err());
    }

    #[test]
    fn registers_transformed_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let refp = random_points(&mut rng, 30, 60.0);
        let truth = random_transform(&mut rng);
        let veh: Vec<Point3> = refp.iter().map(|p| truth.inverse().apply(p)).collect();
        let params = RegistrationParams::default();
        let r = register(&map_from(&refp, 0), &map_from(&veh, 100), &params).unwrap();
        assert_eq!(r.inlier_count, 30);
        assert!(r.inliers.iter().all(|&(a, b)| b == a + 100));
        assert!((r.transform.rotation() - truth.rotation()).amax() < 1e-6);
        assert!((r.transform.translation() - truth.translation()).amax() < 1e-6);
        assert!(r.rms_residual < 1e-9);
    }

    #[test]
    fn too_few_consistent_objects() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let refp = random_points(&mut rng, 10, 60.0);
        let params = RegistrationParams::default();
        assert!(register(&map_from(&refp, 0), &map_from(&refp, 0), &params).is_none());
        let relaxed = RegistrationParams {
            min_inliers: 10,
            ..params
        };
        assert!(register(&map_from(&refp, 0), &map_from(&refp, 0), &relaxed).is_some());
    }

    #[test]
    fn unobserved_neighbor_does_not_steal_a_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = random_transform(&mut rng);
        let veh = random_points(&mut rng, 12, 60.0);
        let mut refp: Vec<Point3> = veh.iter().map(|q| truth.apply(q)).collect();
        // An extra reference object 3.5 m from the partner of vehicle object
        // 5, listed first so the lexicographic clique would pick it.
        refp.insert(0, refp[5] + Vector3::new(3.5, 0.0, 0.0));
        let reference = map_from(&refp, 0);
        let params = RegistrationParams { min_inliers: 5, ..Default::default() };
        let r = register(&reference, &map_from(&veh, 100), &params).unwrap();
        assert_eq!(r.inlier_count, 12);
        assert!(r.inliers.contains(&(6, 105)));
        assert!(r.rms_residual < 1e-9);
    }

    #[test]
    fn collinear_clique_is_rejected() {
        let pts: Vec<Point3> = (0..6).map(|i| Point3::new(i as f64 * 20.0, 0.0, 0.0)).collect();
        let params = RegistrationParams {
            min_inliers: 3,
            ..Default::default()
        };
        assert!(register(&map_from(&pts, 0), &map_from(&pts, 0), &params).is_none());
    }

    #[test]
    fn noisy_residual_is_order_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let params = RegistrationParams {
            min_inliers: 10,
            ..Default::default()
        };
        for _ in 0..10 {
            let refp = random_points(&mut rng, 15, 80.0);
            let truth = random_transform(&mut rng);
            let veh: Vec<Point3> = refp
                .iter()
                .map(|p| {
                    truth.inverse().apply(p)
                        + Vector3::from_fn(|_, _| noise.sample(&mut rng))
                })
                .collect();
            let r = register(&map_from(&refp, 0), &map_from(&veh, 0), &params).unwrap();
            assert!(r.rms_residual < 0.5);
        }
    }
}
