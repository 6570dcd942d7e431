pub mod analysis;
pub mod bench;
pub mod mds;
pub mod metrics;
pub mod soup;
pub mod store;
pub mod viz;
