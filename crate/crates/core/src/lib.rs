pub mod corpus;
pub mod csource;
pub mod process;
pub mod store;
pub mod buildmatrix;
pub mod elfdwarf;
pub mod dbgtrace;
pub mod conjectures;
pub mod dwarfscope;
pub mod triage;
pub mod reducer;
pub mod metrics;

pub type MetricsRecord64 = metrics::MetricsRecord<f64>;
pub type MetricsRecord32 = metrics::MetricsRecord<f32>;
pub type Aggregate64 = metrics::Aggregate<f64>;
pub mod campaign;
