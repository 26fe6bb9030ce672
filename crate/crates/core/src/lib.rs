//! Catalog-grounded interior design generation.
//!
//! A [`model::DesignRequest`] (room type, style, dimensions, openings,
//! furniture categories) flows through five stages:
//!
//! 1. [`retrieval`] picks catalog products per category by embedding similarity
//!    from a [`catalog::CatalogIndex`] built by [`catalog::build_catalog`].
//! 2. [`layout`] places footprints in the room and renders a top-down control image.
//! 3. [`promptgen`] turns the request and selection into a deterministic prompt.
//! 4. [`generation`] calls an image backend (deterministic stub or HTTP sidecar).
//! 5. [`evaluation`] classifies the result and scores room-type and style agreement.
//!
//! [`service`] runs the stages as durable jobs behind a REST API.

pub mod catalog;
pub mod digest;
pub mod evaluation;
pub mod fixtures;
pub mod generation;
pub mod layout;
pub mod model;
pub mod promptgen;
pub mod retrieval;
pub mod service;
