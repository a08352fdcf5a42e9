pub mod detection;
pub mod error;
pub mod experiment;
pub mod noise;
pub mod optics;
pub mod optimality;
pub mod parallel;
pub mod protocols;
pub mod recovery;
pub mod search;
pub mod stats;
