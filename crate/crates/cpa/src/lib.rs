//! Country-level interdomain routing analysis.
//!
//! This crate infers, end to end, how international Internet traffic flows
//! at the granularity of countries:
//!
//! 1. [`rib`] parses BGP routing-table dumps, splits them by vantage point,
//!    and extracts the AS-level topology.
//! 2. [`rel`] labels topology edges with business relationships
//!    (customer-provider, peer-peer, sibling) and provides valley-free
//!    legality checks.
//! 3. [`propagate`] simulates BGP route propagation per destination prefix,
//!    primed with known paths, yielding each AS's ordered candidate paths.
//! 4. [`geo`] resolves IPs and prefixes to (country, AS) through a
//!    longest-prefix-match registry database with a pluggable fallback
//!    lookup client.
//! 5. [`trace`] annotates traceroutes with AS and country segments, learns
//!    ingress/frequency tables from them, and predicts a country path for
//!    any AS path in time linear in the path length.
//! 6. [`centrality`] turns country paths into Country Centrality (CC) and
//!    Strong Country Centrality (SCC) rankings with prefix-size weighting.
//! 7. [`pipeline`] wires the stages into an end-to-end CLI-driven run with
//!    sharded parallelism, stage caching, and deterministic reports.
//! 8. [`synth`] generates small synthetic internets and brute-force oracles
//!    used to verify the pipeline at desk scale.
//!
//! The `book/` directory of the repository walks through the concepts with
//! runnable snippets; those snippets are compiled as doc-tests via the
//! hidden [`book`] module.

pub mod centrality;
pub mod geo;
pub mod net;
pub mod pipeline;
pub mod propagate;
pub mod rel;
pub mod rib;
pub mod synth;
pub mod trace;

mod book;

pub use net::{parse_prefix, Asn, AsPath, CountryCode, CountryPath, Ipv4Addr, Prefix, Traceroute};
