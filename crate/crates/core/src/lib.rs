//! Theme-aware outfit compatibility.
//!
//! Items are projected by a shared linear map into an embedding space. Each
//! unordered category pair owns a gate vector that selects the subspace in
//! which that pair's squared distance is measured. Outfit scores aggregate the
//! pairwise distances either uniformly or with per-theme attention weights.
//!
//! The crate is `no_std` (with `alloc`); file formats, configuration and the
//! command line live in the `themefit` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attention;
pub mod backbone;
pub mod corpus;
pub mod error;
pub mod gradcheck;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod recommend;
pub mod rng;
pub mod sampler;
pub mod subspace;
pub mod synth;

pub use attention::{ThemeAttention, ThemeSelection};
pub use backbone::{Embedding, Projection};
pub use corpus::{Category, CategoryId, CategoryPair, Corpus, Item, ItemId, Outfit, Split, Theme, ThemeId};
pub use error::{Error, Result};
pub use model::{ModelBundle, OutfitScorer, ScoreMode};
pub use optim::TrainConfig;
pub use subspace::MaskTable;
