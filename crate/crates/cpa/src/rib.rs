//! RIB-style route dump ingestion: parsing, train/test splitting by
//! observation point, and AS-level topology extraction.
//!
//! The canonical input is a plain TSV, one route per line:
//!
//! ```text
//! observer_asn<TAB>prefix<TAB>space-separated-AS-path
//! ```
//!
//! `#` lines are comments. MRT decoding is a separate concern: convert MRT
//! dumps to this format with whatever tooling produced them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::net::{Asn, AsPath, Prefix};

#[derive(Debug, Error)]
pub enum RibError {
    #[error("I/O error reading RIB stream: {0}")]
    Io(#[from] std::io::Error),
    #[error("RIB stream produced no usable routes")]
    EmptyCorpus,
    #[error("train/test split needs at least 2 observer ASes, found {0}")]
    TooFewObservers(usize),
    #[error("split ratio must be in (0, 1), got {0}")]
    BadRatio(f64),
}

/// One route as seen from a vantage point: the AS hosting the collector,
/// the destination prefix, and the AS path toward its origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RibRoute {
    pub observer: Asn,
    pub prefix: Prefix,
    pub path: AsPath,
}

/// A parsed set of routes, indexed by prefix and by observer AS.
/// Per-prefix route lists preserve input order.
#[derive(Debug, Clone, Default)]
pub struct RibCorpus {
    routes: Vec<RibRoute>,
    by_prefix: HashMap<Prefix, Vec<usize>>,
    by_observer: HashMap<Asn, Vec<usize>>,
}

impl RibCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, route: RibRoute) {
        let idx = self.routes.len();
        self.by_prefix.entry(route.prefix).or_default().push(idx);
        self.by_observer.entry(route.observer).or_default().push(idx);
        self.routes.push(route);
    }

    pub fn routes(&self) -> &[RibRoute] {
        &self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Routes for one prefix, in input order.
    pub fn routes_for_prefix(&self, prefix: Prefix) -> impl Iterator<Item = &RibRoute> {
        self.by_prefix
            .get(&prefix)
            .into_iter()
            .flatten()
            .map(move |&i| &self.routes[i])
    }

    pub fn routes_for_observer(&self, observer: Asn) -> impl Iterator<Item = &RibRoute> {
        self.by_observer
            .get(&observer)
            .into_iter()
            .flatten()
            .map(move |&i| &self.routes[i])
    }

    /// All prefixes with at least one route, sorted.
    pub fn prefixes(&self) -> Vec<Prefix> {
        let mut v: Vec<Prefix> = self.by_prefix.keys().copied().collect();
        v.sort();
        v
    }

    pub fn observers(&self) -> Vec<Asn> {
        let mut v: Vec<Asn> = self.by_observer.keys().copied().collect();
        v.sort();
        v
    }

    pub fn prefix_count(&self) -> usize {
        self.by_prefix.len()
    }

    /// Merges another corpus into this one. Merging is associative and
    /// order-insensitive at the corpus level (indexes are rebuilt from the
    /// concatenated route list).
    pub fn merge(&mut self, other: RibCorpus) {
        for r in other.routes {
            self.push(r);
        }
    }

    /// True if any route's path contains `asn` — used by the validation
    /// harness to drop test traceroutes whose source AS was primed.
    pub fn contains_asn(&self, asn: Asn) -> bool {
        self.routes.iter().any(|r| r.path.contains(asn))
    }
}

/// One rejected input line: line number (1-based) and reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

/// Side channel of a parse run: rejected lines plus counts of routes that
/// were well-formed but dropped by policy.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub rejects: Vec<Reject>,
    /// Routes dropped because the path contained an AS-set (`{...}`) or
    /// confederation segment. These are rare and ambiguous for edge
    /// extraction, so they are dropped whole rather than expanded.
    pub as_set_routes_dropped: usize,
    pub lines_total: usize,
    pub routes_kept: usize,
}

impl ParseReport {
    /// Renders the rejects as CSV lines `line,reason`.
    pub fn rejects_csv(&self) -> String {
        let mut out = String::from("line,reason\n");
        for r in &self.rejects {
            out.push_str(&format!("{},{}\n", r.line, r.reason.replace(',', ";")));
        }
        out
    }
}

/// Parses the canonical RIB TSV. Malformed lines go to the rejects report
/// and parsing continues; an entirely empty result is an error.
///
/// Consecutive duplicate ASNs in a path (prepending) are collapsed. Paths
/// that still repeat an AS after collapsing are loops and are rejected.
pub fn parse_rib<R: BufRead>(reader: R) -> Result<(RibCorpus, ParseReport), RibError> {
    let mut corpus = RibCorpus::new();
    let mut report = ParseReport::default();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        report.lines_total += 1;

        match parse_rib_line(trimmed) {
            Ok(Some(route)) => {
                report.routes_kept += 1;
                corpus.push(route);
            }
            Ok(None) => report.as_set_routes_dropped += 1,
            Err(reason) => report.rejects.push(Reject { line: lineno, reason }),
        }
    }

    if corpus.is_empty() {
        return Err(RibError::EmptyCorpus);
    }
    Ok((corpus, report))
}

fn parse_rib_line(line: &str) -> Result<Option<RibRoute>, String> {
    let mut fields = line.split('\t');
    let observer = fields.next().ok_or("missing observer field")?;
    let prefix = fields.next().ok_or("missing prefix field")?;
    let path = fields.next().ok_or("missing path field")?;

    let observer: Asn = observer
        .trim()
        .parse()
        .map_err(|e| format!("observer: {e}"))?;
    let prefix: Prefix = prefix.trim().parse().map_err(|e| format!("prefix: {e}"))?;

    let mut hops: Vec<Asn> = Vec::new();
    for tok in path.split_whitespace() {
        if tok.starts_with('{') || tok.starts_with('(') {
            // AS-set / confederation segment: drop the whole route.
            return Ok(None);
        }
        let asn: Asn = tok.parse().map_err(|e| format!("path token `{tok}`: {e}"))?;
        if hops.last() == Some(&asn) {
            continue; // prepend collapse
        }
        hops.push(asn);
    }
    if hops.is_empty() {
        return Err("empty AS path".to_string());
    }
    let path = AsPath::new(hops);
    if !path.is_loop_free() {
        return Err("AS path loops".to_string());
    }
    Ok(Some(RibRoute { observer, prefix, path }))
}

/// Splits a corpus into (training, testing) by observer AS: all routes from
/// one observer AS land on the same side. Observers are visited in a
/// seed-shuffled order and greedily assigned to the training side until it
/// holds its share of the total route count.
pub fn split_train_test(
    corpus: &RibCorpus,
    ratio: f64,
    seed: u64,
) -> Result<(RibCorpus, RibCorpus), RibError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(RibError::BadRatio(ratio));
    }
    let observers = corpus.observers();
    if observers.len() < 2 {
        return Err(RibError::TooFewObservers(observers.len()));
    }

    let mut order = observers.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let total: usize = corpus.len();
    let target = (total as f64 * ratio).round() as usize;

    let mut train_side: BTreeSet<Asn> = BTreeSet::new();
    let mut train_count = 0usize;
    for obs in &order {
        let n = corpus.routes_for_observer(*obs).count();
        if train_count < target {
            train_side.insert(*obs);
            train_count += n;
        }
    }
    // Both sides must be nonempty.
    if train_side.len() == observers.len() {
        let last = *order.last().unwrap();
        train_side.remove(&last);
    }
    if train_side.is_empty() {
        train_side.insert(order[0]);
    }

    let mut train = RibCorpus::new();
    let mut test = RibCorpus::new();
    for r in corpus.routes() {
        if train_side.contains(&r.observer) {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    Ok((train, test))
}

/// The unlabeled AS graph: vertices and undirected edges, each edge keeping
/// one witness (observer, prefix, position) for audit.
#[derive(Debug, Clone, Default)]
pub struct TopologySkeleton {
    vertices: BTreeSet<Asn>,
    edges: BTreeMap<(Asn, Asn), EdgeWitness>,
}

/// Where an edge was first seen: which route and at which hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeWitness {
    pub observer: Asn,
    pub prefix: Prefix,
    pub hop_index: usize,
}

/// Normalizes an undirected edge key.
pub fn edge_key(a: Asn, b: Asn) -> (Asn, Asn) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TopologySkeleton {
    pub fn vertices(&self) -> &BTreeSet<Asn> {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Asn, Asn)> + '_ {
        self.edges.keys().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: Asn, b: Asn) -> bool {
        self.edges.contains_key(&edge_key(a, b))
    }

    pub fn witness(&self, a: Asn, b: Asn) -> Option<&EdgeWitness> {
        self.edges.get(&edge_key(a, b))
    }

    pub fn add_vertex(&mut self, asn: Asn) {
        self.vertices.insert(asn);
    }

    pub fn add_edge(&mut self, a: Asn, b: Asn, witness: EdgeWitness) {
        if a == b {
            return;
        }
        self.vertices.insert(a);
        self.vertices.insert(b);
        self.edges.entry(edge_key(a, b)).or_insert(witness);
    }

    pub fn is_subset_of(&self, other: &TopologySkeleton) -> bool {
        self.vertices.is_subset(&other.vertices)
            && self.edges.keys().all(|k| other.edges.contains_key(k))
    }
}

/// Extracts the AS graph from every path in the corpus: vertices are all
/// ASNs seen, edges are all adjacent pairs.
pub fn extract_topology(corpus: &RibCorpus) -> TopologySkeleton {
    let mut skel = TopologySkeleton::default();
    for route in corpus.routes() {
        let hops = route.path.hops();
        for (i, asn) in hops.iter().enumerate() {
            skel.add_vertex(*asn);
            if i + 1 < hops.len() {
                skel.add_edge(
                    *asn,
                    hops[i + 1],
                    EdgeWitness {
                        observer: route.observer,
                        prefix: route.prefix,
                        hop_index: i,
                    },
                );
            }
        }
    }
    skel
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn asn(v: u32) -> Asn {
        Asn::new(v).unwrap()
    }

    fn corpus_from(text: &str) -> (RibCorpus, ParseReport) {
        parse_rib(Cursor::new(text)).unwrap()
    }

    #[test]
    fn parses_simple_route() {
        let (corpus, report) = corpus_from("65001\t10.0.0.0/8\t65001 65002 65003\n");
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.rejects.len(), 0);
        let r = &corpus.routes()[0];
        assert_eq!(r.observer, asn(65001));
        assert_eq!(r.prefix, "10.0.0.0/8".parse().unwrap());
        assert_eq!(r.path.hops(), &[asn(65001), asn(65002), asn(65003)]);
    }

    #[test]
    fn collapses_prepends() {
        let (corpus, _) = corpus_from("65001\t10.0.0.0/8\t65001 65002 65002 65003\n");
        assert_eq!(
            corpus.routes()[0].path.hops(),
            &[asn(65001), asn(65002), asn(65003)]
        );
    }

    #[test]
    fn drops_as_set_routes_with_count() {
        let text = "65001\t10.0.0.0/8\t65001 {65002,65003}\n65001\t10.0.0.0/8\t65001 65002\n";
        let (corpus, report) = corpus_from(text);
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.as_set_routes_dropped, 1);
    }

    #[test]
    fn rejects_malformed_lines_and_continues() {
        let text = "not a route\n65001\t10.0.0.0/8\t65001 65002\n65001\tbad/8\t65001\n";
        let (corpus, report) = corpus_from(text);
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.rejects.len(), 2);
        assert_eq!(report.rejects[0].line, 1);
        assert_eq!(report.rejects[1].line, 3);
        assert!(report.rejects_csv().starts_with("line,reason\n"));
    }

    #[test]
    fn rejects_looped_paths() {
        let text = "65001\t10.0.0.0/8\t65001 65002 65001\n65009\t10.0.0.0/8\t65009 65002\n";
        let (corpus, report) = corpus_from(text);
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.rejects.len(), 1);
        assert!(report.rejects[0].reason.contains("loop"));
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# header\n\n65001\t10.0.0.0/8\t65001 65002\n";
        let (corpus, report) = corpus_from(text);
        assert_eq!(corpus.len(), 1);
        assert_eq!(report.lines_total, 1);
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(matches!(
            parse_rib(Cursor::new("# nothing\n")),
            Err(RibError::EmptyCorpus)
        ));
    }

    #[test]
    fn split_keeps_observers_together() {
        let mut text = String::new();
        for obs in 1..=4u32 {
            for p in 0..3u32 {
                text.push_str(&format!("{obs}\t10.{p}.0.0/16\t{obs} 500 600\n"));
            }
        }
        let (corpus, _) = corpus_from(&text);
        let (train, test) = split_train_test(&corpus, 0.5, 7).unwrap();
        let train_obs: BTreeSet<Asn> = train.routes().iter().map(|r| r.observer).collect();
        let test_obs: BTreeSet<Asn> = test.routes().iter().map(|r| r.observer).collect();
        assert!(train_obs.is_disjoint(&test_obs));
        assert_eq!(train.len() + test.len(), corpus.len());
    }

    #[test]
    fn split_two_observers_forced_partition() {
        let text = "1\t10.0.0.0/8\t1 9\n2\t10.0.0.0/8\t2 9\n";
        let (corpus, _) = corpus_from(text);
        let (train, test) = split_train_test(&corpus, 0.5, 0).unwrap();
        assert_eq!(train.observers().len(), 1);
        assert_eq!(test.observers().len(), 1);
    }

    #[test]
    fn split_is_deterministic() {
        let mut text = String::new();
        for obs in 1..=10u32 {
            for p in 0..5u32 {
                text.push_str(&format!("{obs}\t10.{obs}.{p}.0/24\t{obs} 500\n"));
            }
        }
        let (corpus, _) = corpus_from(&text);
        let (a1, b1) = split_train_test(&corpus, 0.5, 42).unwrap();
        let (a2, b2) = split_train_test(&corpus, 0.5, 42).unwrap();
        assert_eq!(a1.routes(), a2.routes());
        assert_eq!(b1.routes(), b2.routes());
    }

    // Oracle: with 10 equal-weight observers and ratio 0.5, greedy bin-fill
    // puts exactly 5 observers on each side regardless of visit order.
    #[test]
    fn split_equal_observers_balances() {
        let mut text = String::new();
        for obs in 1..=10u32 {
            for p in 0..4u32 {
                text.push_str(&format!("{obs}\t10.{obs}.{p}.0/24\t{obs} 500\n"));
            }
        }
        let (corpus, _) = corpus_from(&text);
        for seed in 0..20 {
            let (train, test) = split_train_test(&corpus, 0.5, seed).unwrap();
            assert_eq!(train.observers().len(), 5, "seed {seed}");
            assert_eq!(test.observers().len(), 5, "seed {seed}");
        }
    }

    #[test]
    fn split_rejects_single_observer() {
        let (corpus, _) = corpus_from("1\t10.0.0.0/8\t1 9\n");
        assert!(matches!(
            split_train_test(&corpus, 0.5, 0),
            Err(RibError::TooFewObservers(1))
        ));
    }

    #[test]
    fn topology_from_single_route() {
        let (corpus, _) = corpus_from("1\t10.0.0.0/8\t1 2 3\n");
        let skel = extract_topology(&corpus);
        assert_eq!(skel.vertex_count(), 3);
        assert_eq!(skel.edge_count(), 2);
        assert!(skel.has_edge(asn(1), asn(2)));
        assert!(skel.has_edge(asn(2), asn(3)));
        assert!(!skel.has_edge(asn(1), asn(3)));
    }

    #[test]
    fn topology_edges_are_undirected() {
        let text = "1\t10.0.0.0/8\t1 2\n2\t10.0.0.0/8\t2 1\n";
        let (corpus, _) = corpus_from(text);
        let skel = extract_topology(&corpus);
        assert_eq!(skel.edge_count(), 1);
        assert!(skel.witness(asn(2), asn(1)).is_some());
    }

    #[test]
    fn train_topology_subset_of_total() {
        let mut text = String::new();
        for obs in 1..=6u32 {
            text.push_str(&format!("{obs}\t10.0.0.0/8\t{obs} {} 900\n", obs + 100));
        }
        let (corpus, _) = corpus_from(&text);
        let (train, _) = split_train_test(&corpus, 0.5, 3).unwrap();
        let part = extract_topology(&train);
        let full = extract_topology(&corpus);
        assert!(part.is_subset_of(&full));
    }
}
