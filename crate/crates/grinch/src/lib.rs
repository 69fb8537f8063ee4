//! Incremental, non-greedy hierarchical clustering with pluggable linkage
//! functions.
//!
//! The core algorithm builds a binary cluster tree one point at a time and
//! keeps it well-formed with two rearrangement passes: local *rotations*
//! that swap a new leaf with its aunt, and global *grafts* that steal a
//! subtree from one region of the tree and merge it next to a similar but
//! distant subtree, followed by a *restructure* repair pass. When the
//! linkage function separates a latent graph (every connected set pair
//! outscores every disconnected one), the construction provably recovers
//! the graph's connected components regardless of arrival order.
//!
//! The crate also ships the relevant baselines (online insertion,
//! rotate-only insertion, best-first agglomeration, mini-batch
//! agglomeration), an exact k-NN scan and a navigable-small-world
//! approximate index over tree leaves, dendrogram-purity and pairwise-F1
//! evaluation, dataset generators, and TSV/GRVC file formats.
//!
//! ```
//! use grinch::{
//!     build, dendrogram_purity_exact, gen_planted_graph, oracle_ground_truth,
//!     oracle_points, Algorithm, ComponentShape, Linkage, PlantedGraphSpec, RunConfig,
//! };
//!
//! let graph = gen_planted_graph(&PlantedGraphSpec {
//!     components: vec![(6, ComponentShape::Chain), (5, ComponentShape::Clique)],
//!     seed: 7,
//! });
//! let points = oracle_points(&graph);
//! let linkage = Linkage::Oracle(graph.clone());
//! let (tree, _metrics) =
//!     build(&points, Algorithm::Grinch, &linkage, &RunConfig::default()).unwrap();
//! let purity = dendrogram_purity_exact(&tree, &oracle_ground_truth(&graph)).unwrap();
//! assert_eq!(purity, 1.0);
//! ```

pub mod algorithms;
pub mod datagen;
pub mod eval;
pub mod io;
pub mod linkage;
pub mod nn;
pub mod tree;
pub mod vector;

pub use algorithms::{
    build, graft, hac_build, mb_hac, restruct, rotate_loop, Algorithm, BuildError, GraftOutcome,
    IncrementalBuilder, NnMode, PuritySample, RotateTrigger, RunConfig, RunMetrics,
};
pub use datagen::{
    gen_planted_graph, gen_synthetic, normalize_unit, oracle_ground_truth, oracle_points,
    order_points, ArrivalOrder, ComponentShape, OrderScheme, PlantedGraphSpec, SyntheticSpec,
};
pub use eval::{
    completeness_holds, dendrogram_purity_exact, dendrogram_purity_sampled, flatten_by_threshold,
    pairwise_prf, strong_connectivity_holds, strongly_connected_nodes, EvalError, FlatClustering,
    GroundTruth, PrfScores,
};
pub use io::{load_vectors, save_vectors, DatasetError, VectorFormat};
pub use linkage::{average_linkage, centroid_cosine, GraphOracle, Linkage};
pub use nn::{exact_knn, exact_knn_from_node, NswIndex};
pub use tree::{Aggregate, ClusterTree, DataPoint, NodeHandle, PointId, TreeError};
