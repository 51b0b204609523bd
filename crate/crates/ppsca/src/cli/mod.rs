//! stub
pub mod config;
pub mod corpus;
