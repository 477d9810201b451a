pub mod cli;
pub mod controller;
pub mod data;
pub mod evaluation;
pub mod feateng;
pub mod gbdt;
pub mod ingest;
pub mod merge;
pub mod pipeline;
pub mod preprocess;
pub mod tuner;
