//! HTTP service and persistence for the tutor.

pub mod api;
pub mod config;
pub mod store;
