//! Seeded simulation models for collaborative mobile edge computing.
//!
//! Three independent studies share this crate:
//!
//! * video caching and transcoding across base-station servers
//!   ([`workload`], [`edge_cache`], [`transcode`], [`strategies`],
//!   [`cache_sim`]),
//! * makespan of offloaded task batches ([`orchestration`]),
//! * two-layer uplink interference cancellation ([`interference`]).
//!
//! Models are generic over a [`Scalar`] (`f32` or `f64`). The aliases at the
//! crate root pin the common `f64` instantiation.

pub mod cache_sim;
pub mod edge_cache;
pub mod error;
pub mod interference;
pub mod orchestration;
pub mod scalar;
pub mod seed;
pub mod strategies;
pub mod transcode;
pub mod workload;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use strategies::{ServiceSource, StrategyKind};
pub use transcode::{TranscodeCost, TranscodeSite};

pub type VideoCatalog = workload::VideoCatalog<f64>;
pub type PopularityProfile = workload::PopularityProfile<f64>;
pub type Request = workload::Request<f64>;
pub type RequestTrace = workload::RequestTrace<f64>;
pub type CacheState = edge_cache::CacheState<f64>;
pub type Processor = transcode::Processor<f64>;
pub type ServiceDecision = strategies::ServiceDecision<f64>;
pub type Metrics = cache_sim::Metrics<f64>;
pub type CacheScenario = cache_sim::CacheScenario<f64>;
pub type SimOptions = cache_sim::SimOptions<f64>;
pub type TaskBatch = orchestration::TaskBatch<f64>;
pub type ResourceNode = orchestration::ResourceNode<f64>;
pub type ExecutionReport = orchestration::ExecutionReport<f64>;
pub type Inventory = orchestration::Inventory<f64>;
pub type CellLayout = interference::CellLayout<f64>;
pub type MobileStation = interference::MobileStation<f64>;
pub type ChannelModel = interference::ChannelModel<f64>;
pub type LayerAssignment = interference::LayerAssignment<f64>;

/// Single-precision instantiations.
pub mod f32 {
    use crate::{cache_sim, interference, orchestration, workload};

    pub type VideoCatalog = workload::VideoCatalog<f32>;
    pub type CacheScenario = cache_sim::CacheScenario<f32>;
    pub type TaskBatch = orchestration::TaskBatch<f32>;
    pub type Inventory = orchestration::Inventory<f32>;
    pub type CellLayout = interference::CellLayout<f32>;
    pub type ChannelModel = interference::ChannelModel<f32>;
}
