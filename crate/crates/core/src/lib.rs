//! Vandal early-warning pipeline: edit-log ingestion, behavioral features
//! (WVB, WTPM and the merged VEWS set), classifiers, evaluation protocols and
//! a calibrated synthetic corpus generator.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod models;
pub mod pairfeat;
pub mod simgen;
pub mod timefmt;
pub mod wtpm;
pub mod wvb;

pub use crate::corpus::{load_corpus, Corpus, EditRecord, HopBucket, HopGraph, Label, UserLabel};
pub use crate::error::{Error, Result};
pub use crate::eval::{Dataset, EvalConfig, EvalReport, FeatureMode, Protocol};
pub use crate::models::{ModelConfig, ModelKind, TrainedModel};
pub use crate::pairfeat::{build_user_log, corpus_logs, PairFeatures, TimeBucket, UserLog};
pub use crate::simgen::{default_params, generate, GeneratorParams};
pub use crate::wtpm::{AutoencoderConfig, AutoencoderModel, StateId, TransitionMatrix};
pub use crate::wvb::{WvbVector, WvbVectorWR};
