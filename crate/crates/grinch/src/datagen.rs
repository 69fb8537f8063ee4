//! Dataset generators and arrival-order schedulers.
//!
//! The synthetic generator produces binary vectors in disjoint per-cluster
//! windows, so cross-cluster cosine similarity is exactly zero while
//! within-cluster pairs may or may not overlap. The planted-graph generator
//! builds latent graphs with chosen component shapes for oracle-linkage
//! tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::GroundTruth;
use crate::linkage::GraphOracle;
use crate::tree::{DataPoint, PointId};

#[derive(Debug, Error, PartialEq)]
pub enum DatagenError {
    #[error("arrival order {0:?} requires ground-truth labels")]
    MissingGroundTruth(OrderScheme),
}

/// Parameters of the windowed-binary synthetic dataset. Dimension is
/// `clusters * window`; points of cluster k set bits only inside the k-th
/// window, each independently with probability `bit_probability`.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    pub window: usize,
    pub bit_probability: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            clusters: 100,
            per_cluster: 25,
            window: 100,
            bit_probability: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn dim(&self) -> usize {
        self.clusters * self.window
    }

    /// A small configuration with the same structure, handy for tests.
    pub fn desk(clusters: usize, seed: u64) -> Self {
        SyntheticSpec {
            clusters,
            per_cluster: 25,
            window: 100,
            bit_probability: 0.1,
            seed,
        }
    }
}

/// Generate the synthetic dataset. All-zero draws are redrawn so every
/// vector has at least one set bit. Points are emitted cluster-major with
/// sequential ids and labels equal to the cluster index.
pub fn gen_synthetic(spec: &SyntheticSpec) -> (Vec<DataPoint>, GroundTruth) {
    assert!(spec.bit_probability > 0.0 && spec.bit_probability <= 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim();
    let mut points = Vec::with_capacity(spec.clusters * spec.per_cluster);
    for k in 0..spec.clusters {
        let window_start = k * spec.window;
        for i in 0..spec.per_cluster {
            let id = (k * spec.per_cluster + i) as PointId;
            let mut vector = vec![0.0; d];
            loop {
                let mut any = false;
                for b in 0..spec.window {
                    let on = rng.gen::<f64>() < spec.bit_probability;
                    vector[window_start + b] = if on { 1.0 } else { 0.0 };
                    any |= on;
                }
                if any {
                    break;
                }
            }
            points.push(DataPoint::labeled(id, vector, k as u64));
        }
    }
    let gt = GroundTruth::from_points(&points).expect("generated points are labeled");
    (points, gt)
}

/// Shape of one planted component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ComponentShape {
    /// Every pair of vertices shares an edge.
    Clique,
    /// Consecutive vertices form a path.
    Chain,
    /// Uniform random recursive tree: each vertex attaches to a random
    /// earlier vertex, guaranteeing connectivity.
    RandomTree,
    /// Random spanning tree plus each remaining pair independently with
    /// this probability.
    RandomEdges(f64),
}

/// Component sizes and shapes for a planted latent graph.
#[derive(Clone, Debug)]
pub struct PlantedGraphSpec {
    pub components: Vec<(usize, ComponentShape)>,
    pub seed: u64,
}

/// Build a latent graph whose connected components are exactly the planted
/// components. Vertices are numbered consecutively across components.
pub fn gen_planted_graph(spec: &PlantedGraphSpec) -> GraphOracle {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut base = 0u32;
    for &(size, shape) in &spec.components {
        assert!(size >= 1, "component sizes must be at least 1");
        let verts: Vec<u32> = (base..base + size as u32).collect();
        match shape {
            ComponentShape::Clique => {
                for i in 0..verts.len() {
                    for j in (i + 1)..verts.len() {
                        edges.push((verts[i], verts[j]));
                    }
                }
            }
            ComponentShape::Chain => {
                for w in verts.windows(2) {
                    edges.push((w[0], w[1]));
                }
            }
            ComponentShape::RandomTree => {
                for i in 1..verts.len() {
                    let j = rng.gen_range(0..i);
                    edges.push((verts[j], verts[i]));
                }
            }
            ComponentShape::RandomEdges(p) => {
                for i in 1..verts.len() {
                    let j = rng.gen_range(0..i);
                    edges.push((verts[j], verts[i]));
                }
                for i in 0..verts.len() {
                    for j in (i + 1)..verts.len() {
                        if rng.gen::<f64>() < p {
                            edges.push((verts[i], verts[j]));
                        }
                    }
                }
            }
        }
        base += size as u32;
    }
    GraphOracle::from_edges(base as usize, edges)
}

/// One placeholder data point per graph vertex, labeled by its component.
/// Oracle runs never read the vectors; a fixed one-dimensional zero keeps
/// the tree machinery total.
pub fn oracle_points(g: &GraphOracle) -> Vec<DataPoint> {
    (0..g.num_vertices() as PointId)
        .map(|v| DataPoint::labeled(v, vec![0.0], g.component_of(v) as u64))
        .collect()
}

/// Ground truth induced by a latent graph's components.
pub fn oracle_ground_truth(g: &GraphOracle) -> GroundTruth {
    GroundTruth::new(
        (0..g.num_vertices() as PointId)
            .map(|v| (v, g.component_of(v) as u64))
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderScheme {
    AsGiven,
    Random,
    RoundRobin,
    Sorted,
}

/// Arrival-order scheduler; always emits a permutation of the input.
#[derive(Clone, Copy, Debug)]
pub struct ArrivalOrder {
    pub scheme: OrderScheme,
    pub seed: u64,
}

/// Permute points according to the arrival order. Round-robin interleaves
/// clusters in a random cluster order (position i takes the next point of
/// cluster i mod K); sorted emits whole clusters in a random cluster order.
/// Both need ground truth.
pub fn order_points(
    points: &[DataPoint],
    gt: Option<&GroundTruth>,
    order: ArrivalOrder,
) -> Result<Vec<DataPoint>, DatagenError> {
    match order.scheme {
        OrderScheme::AsGiven => Ok(points.to_vec()),
        OrderScheme::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(order.seed);
            let mut out = points.to_vec();
            out.shuffle(&mut rng);
            Ok(out)
        }
        OrderScheme::RoundRobin | OrderScheme::Sorted => {
            let gt = gt.ok_or(DatagenError::MissingGroundTruth(order.scheme))?;
            let mut rng = ChaCha8Rng::seed_from_u64(order.seed);
            // queues per cluster, in randomized cluster order
            let mut labels: Vec<u64> = {
                let mut l: Vec<u64> = points
                    .iter()
                    .map(|p| gt.cluster_of(p.id).expect("labeled point"))
                    .collect();
                l.sort_unstable();
                l.dedup();
                l
            };
            labels.shuffle(&mut rng);
            let position: std::collections::HashMap<u64, usize> = labels
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, i))
                .collect();
            let mut queues: Vec<std::collections::VecDeque<DataPoint>> =
                vec![std::collections::VecDeque::new(); labels.len()];
            for p in points {
                let label = gt.cluster_of(p.id).expect("labeled point");
                queues[position[&label]].push_back(p.clone());
            }
            let mut out = Vec::with_capacity(points.len());
            match order.scheme {
                OrderScheme::Sorted => {
                    for q in &mut queues {
                        out.extend(q.drain(..));
                    }
                }
                OrderScheme::RoundRobin => {
                    let num_queues = queues.len();
                    let mut remaining = points.len();
                    let mut k = 0;
                    while remaining > 0 {
                        if let Some(p) = queues[k % num_queues].pop_front() {
                            out.push(p);
                            remaining -= 1;
                        }
                        k += 1;
                    }
                }
                _ => unreachable!(),
            }
            Ok(out)
        }
    }
}

/// Scale every vector to unit length in place; zero vectors are left as-is.
pub fn normalize_unit(points: &mut [DataPoint]) {
    for p in points {
        let norm: f64 = p.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut p.vector {
                *x /= norm;
            }
        }
    }
}
