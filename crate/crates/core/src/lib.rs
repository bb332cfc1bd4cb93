pub mod bench;
pub mod channel;
pub mod cli;
pub mod codec;
pub mod linalg;
pub mod lp;
pub mod matgen;
pub mod pipeline;
pub mod rproj;
pub mod seeds;
