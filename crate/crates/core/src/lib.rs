//! Knowledge-graph embeddings with relations drawn from the dihedral group.
//!
//! Every relation is a block-diagonal matrix whose `L` blocks are 2×2
//! orthogonal representations of elements of `D_K`. Entities are dense
//! vectors of width `2L` and triples are scored with the bilinear form
//! `hᵀ R t`, evaluated block by block.
//!
//! The crate is organised as follows:
//!
//! - [`group`]: exact symbolic algebra of `D_K` and block-diagonal relations.
//! - [`param`]: trainable parametrizations (Gumbel-softmax and binary STE).
//! - [`model`]: entity table, scoring and score gradients.
//! - [`trainer`]: negative sampling, loss, AdaGrad and the training loop.
//! - [`dataset`]: triple stores, TSV IO, filter indexes and the FAMILY generator.
//! - [`eval`]: filtered MRR / HITS@N.
//! - [`analysis`]: inversion / composition products and component histograms.
//! - [`checkpoint`]: binary checkpoint format and hard-relation export.

pub mod analysis;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod group;
pub mod mat2;
pub mod model;
pub mod optim;
pub mod param;
pub mod real;
pub mod trainer;

pub use error::{Error, Result};
pub use group::{BlockDiagonalRelation, DihedralElement, DihedralGroup, Kind, Symmetry};
pub use model::{EntityTable, Model};
pub use param::{Mode, RelationParams};
pub use real::Real;
