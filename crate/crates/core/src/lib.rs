//! Entity-oriented search over a web archive, built on a web search provider
//! and capture-date lookups against the archive.
//!
//! The crate is split along the request path:
//!
//! - [`entity_index`] answers typeahead prefixes over Wikipedia entities,
//!   ranked by page views aggregated across redirects.
//! - [`entity_graph`] holds the Wikipedia link graph, scores entity pairs with
//!   the link-based relatedness distance and maps titles across languages.
//! - [`search_gateway`] fetches ranked web results from a pluggable provider
//!   and pairs every result with its capture span in the archive.
//! - [`result_cache`] keeps every retrieved result set as an append-only,
//!   timestamped snapshot and decides which queries are due for refresh.
//! - [`analytics`] computes archive coverage by popularity bucket, temporal
//!   result overlap and relevance-label distributions.

pub mod analytics;
pub mod clock;
pub mod entity_graph;
pub mod entity_index;
pub mod result_cache;
pub mod search_gateway;
pub mod tsv;

pub use clock::{Clock, FixedClock, SystemClock};
