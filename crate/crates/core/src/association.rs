//! All-to-all class-constrained association and the pairwise geometric
//! consistency graph built over the associations.

use rayon::prelude::*;

use crate::graph::Graph;
use crate::types::ObjectMap;

/// A candidate correspondence between a reference object and a vehicle object
/// of the same class. Both fields index into their map's object list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Association {
    pub ref_index: usize,
    pub veh_index: usize,
}

impl Association {
    pub fn new(ref_index: usize, veh_index: usize) -> Self {
        Self {
            ref_index,
            veh_index,
        }
    }

    pub fn shares_endpoint(&self, other: &Association) -> bool {
        self.ref_index == other.ref_index || self.veh_index == other.veh_index
    }
}

/// Every same-class (reference, vehicle) pair, ordered by `(ref_index, veh_index)`.
pub fn generate_associations(ref_map: &ObjectMap, veh_map: &ObjectMap) -> Vec<Association> {
    let mut out = Vec::new();
    for (r, ro) in ref_map.objects().iter().enumerate() {
        for (v, vo) in veh_map.objects().iter().enumerate() {
            if ro.class_label == vo.class_label {
                out.push(Association::new(r, v));
            }
        }
    }
    out
}

/// `| ‖p_i − p_j‖ − ‖q_i − q_j‖ |` for associations `a = (p_i, q_i)`, `b = (p_j, q_j)`.
pub fn pairwise_distance_error(
    a: &Association,
    b: &Association,
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
) -> f64 {
    let ref_dist = (ref_map.get(a.ref_index).centroid - ref_map.get(b.ref_index).centroid).norm();
    let veh_dist = (veh_map.get(a.veh_index).centroid - veh_map.get(b.veh_index).centroid).norm();
    (ref_dist - veh_dist).abs()
}

/// Associations as nodes; an edge joins two associations whose endpoint
/// distances agree to within `epsilon` (strictly) and that share neither
/// endpoint, so every clique is a partial one-to-one matching.
#[derive(Debug, Clone)]
pub struct ConsistencyGraph {
    nodes: Vec<Association>,
    graph: Graph,
    epsilon: f64,
}

impl ConsistencyGraph {
    pub fn nodes(&self) -> &[Association] {
        &self.nodes
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.graph.has_edge(i, j)
    }
}

/// Builds the consistency graph.
///
/// Rather than testing all node pairs, reference pair distances are sorted
/// once and every vehicle pair looks up the reference pairs whose distance
/// falls inside its `epsilon` band. The work is proportional to the number of
/// vehicle pairs times `log` of the reference pairs plus the number of edges.
pub fn build_consistency_graph(
    associations: &[Association],
    ref_map: &ObjectMap,
    veh_map: &ObjectMap,
    epsilon: f64,
) -> ConsistencyGraph {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let n_ref = ref_map.len();
    let n_veh = veh_map.len();

    const NONE: u32 = u32::MAX;
    let mut node_of = vec![NONE; n_ref * n_veh];
    for (i, a) in associations.iter().enumerate() {
        node_of[a.ref_index * n_veh + a.veh_index] = i as u32;
    }

    let ref_pts: Vec<_> = ref_map.objects().iter().map(|o| o.centroid).collect();
    let veh_pts: Vec<_> = veh_map.objects().iter().map(|o| o.centroid).collect();

    let mut ref_pairs: Vec<(f64, u32, u32)> = Vec::with_capacity(n_ref * n_ref.saturating_sub(1) / 2);
    for r1 in 0..n_ref {
        for r2 in r1 + 1..n_ref {
            ref_pairs.push(((ref_pts[r1] - ref_pts[r2]).norm(), r1 as u32, r2 as u32));
        }
    }
    ref_pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let veh_pairs: Vec<(usize, usize)> = (0..n_veh)
        .flat_map(|v1| (v1 + 1..n_veh).map(move |v2| (v1, v2)))
        .collect();

    let edges: Vec<(u32, u32)> = veh_pairs
        .par_iter()
        .flat_map_iter(|&(v1, v2)| {
            let veh_dist = (veh_pts[v1] - veh_pts[v2]).norm();
            // Widen the search window slightly; the exact predicate below decides.
            let slack = 1e-9 * (1.0 + veh_dist + epsilon);
            let lo = ref_pairs.partition_point(|p| p.0 <= veh_dist - epsilon - slack);
            let hi = ref_pairs.partition_point(|p| p.0 < veh_dist + epsilon + slack);
            let node_of = &node_of;
            ref_pairs[lo..hi]
                .iter()
                .filter(move |p| (p.0 - veh_dist).abs() < epsilon)
                .flat_map(move |&(_, r1, r2)| {
                    let (r1, r2) = (r1 as usize, r2 as usize);
                    let straight = (node_of[r1 * n_veh + v1], node_of[r2 * n_veh + v2]);
                    let crossed = (node_of[r2 * n_veh + v1], node_of[r1 * n_veh + v2]);
                    [straight, crossed]
                        .into_iter()
                        .filter(|&(a, b)| a != NONE && b != NONE)
                })
        })
        .collect();

    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); associations.len()];
    for &(a, b) in &edges {
        adjacency[a as usize].push(b);
        adjacency[b as usize].push(a);
    }
    ConsistencyGraph {
        nodes: associations.to_vec(),
        graph: Graph::from_adjacency(adjacency),
        epsilon,
    }
}
