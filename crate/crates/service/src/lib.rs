//! Knowledge-base store, HTTP API and command-line front end.

pub mod api;
pub mod cli;
pub mod http;
pub mod store;

pub use api::{Api, PddlUris, Response};
pub use store::{DocumentKind, Store, StoreError};
