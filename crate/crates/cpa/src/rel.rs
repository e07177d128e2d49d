//! Business relationships between ASes and the valley-free export policy.
//!
//! Edges carry one of three labels: customer-provider, peer-peer, or
//! sibling-sibling (two AS numbers, one network). Labels are inferred from
//! the RIB paths with a degree-based voting pass, and can be overridden
//! from an external CSV. The [`is_valley_free`] / [`may_export`] pair
//! encodes the policy the propagation simulator enforces.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use thiserror::Error;

use crate::net::{Asn, AsPath};
use crate::rib::{edge_key, RibCorpus, TopologySkeleton};

#[derive(Debug, Error)]
pub enum RelError {
    #[error("edge {0}-{1} is not in the topology")]
    UnknownEdge(Asn, Asn),
    #[error("I/O error reading overrides: {0}")]
    Io(#[from] std::io::Error),
    #[error("override line {line}: {reason}")]
    BadOverride { line: usize, reason: String },
}

/// How one endpoint of an edge sees the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relationship {
    /// The neighbor is my provider (I am its customer).
    CustomerOf,
    /// The neighbor is my customer (I am its provider).
    ProviderOf,
    Peer,
    Sibling,
}

impl Relationship {
    pub fn reverse(self) -> Relationship {
        match self {
            Relationship::CustomerOf => Relationship::ProviderOf,
            Relationship::ProviderOf => Relationship::CustomerOf,
            Relationship::Peer => Relationship::Peer,
            Relationship::Sibling => Relationship::Sibling,
        }
    }
}

/// Symmetric label stored once per undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLabel {
    /// `provider` is the provider side of the edge.
    CustomerProvider { provider: Asn },
    Peer,
    Sibling,
}

/// Tuning knobs for the inference pass.
#[derive(Debug, Clone, Copy)]
pub struct InferenceParams {
    /// Sibling vote threshold: an edge voted in both directions is a
    /// sibling when both counts exceed `l`, or both are small (≤ `l`).
    pub l: u32,
    /// Peer degree-ratio bound: an edge adjacent to a path's top provider
    /// is a peer when max(deg)/min(deg) ≤ `r` and the edge never appears
    /// in a transit position.
    pub r: f64,
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams { l: 1, r: 60.0 }
    }
}

/// The labeled topology: skeleton plus exactly one label per edge, with an
/// adjacency index for the propagation simulator.
#[derive(Debug, Clone)]
pub struct Topology {
    skeleton: TopologySkeleton,
    labels: BTreeMap<(Asn, Asn), EdgeLabel>,
    adjacency: HashMap<Asn, Vec<Asn>>,
    /// Lowest ASN of each sibling group, for ASes that have siblings.
    sibling_rep: HashMap<Asn, Asn>,
    /// Edges that had no directional votes and fell back to the degree
    /// default. Kept for reporting.
    low_confidence: Vec<(Asn, Asn)>,
}

impl Topology {
    /// Builds a topology from explicit labels. Every skeleton edge must be
    /// covered; extra labeled edges are added to the skeleton.
    pub fn from_labels(
        mut skeleton: TopologySkeleton,
        labels: impl IntoIterator<Item = ((Asn, Asn), EdgeLabel)>,
    ) -> Topology {
        let mut map = BTreeMap::new();
        for ((a, b), label) in labels {
            skeleton.add_edge(
                a,
                b,
                crate::rib::EdgeWitness {
                    observer: a,
                    prefix: "0.0.0.0/0".parse().unwrap(),
                    hop_index: 0,
                },
            );
            map.insert(edge_key(a, b), label);
        }
        let adjacency = build_adjacency(&skeleton);
        Topology {
            skeleton,
            labels: map,
            adjacency,
            low_confidence: Vec::new(),
        }
    }

    pub fn skeleton(&self) -> &TopologySkeleton {
        &self.skeleton
    }

    pub fn label(&self, a: Asn, b: Asn) -> Option<EdgeLabel> {
        self.labels.get(&edge_key(a, b)).copied()
    }

    /// How `from` sees `to` across their shared edge.
    pub fn relationship(&self, from: Asn, to: Asn) -> Option<Relationship> {
        match self.label(from, to)? {
            EdgeLabel::Peer => Some(Relationship::Peer),
            EdgeLabel::Sibling => Some(Relationship::Sibling),
            EdgeLabel::CustomerProvider { provider } => {
                if provider == to {
                    Some(Relationship::CustomerOf)
                } else {
                    Some(Relationship::ProviderOf)
                }
            }
        }
    }

    /// Neighbors of `asn` in ascending ASN order.
    pub fn neighbors(&self, asn: Asn) -> &[Asn] {
        self.adjacency.get(&asn).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn vertices(&self) -> impl Iterator<Item = Asn> + '_ {
        self.skeleton.vertices().iter().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.skeleton.vertex_count()
    }

    pub fn low_confidence_edges(&self) -> &[(Asn, Asn)] {
        &self.low_confidence
    }

    /// Counts per label kind: (customer-provider, peer, sibling).
    pub fn label_counts(&self) -> (usize, usize, usize) {
        let mut cp = 0;
        let mut peer = 0;
        let mut sib = 0;
        for label in self.labels.values() {
            match label {
                EdgeLabel::CustomerProvider { .. } => cp += 1,
                EdgeLabel::Peer => peer += 1,
                EdgeLabel::Sibling => sib += 1,
            }
        }
        (cp, peer, sib)
    }

    /// Applies override labels (see [`parse_overrides`]); unseen edges are
    /// added to the topology.
    pub fn apply_overrides(&mut self, overrides: &[((Asn, Asn), EdgeLabel)]) {
        for ((a, b), label) in overrides {
            self.skeleton.add_edge(
                *a,
                *b,
                crate::rib::EdgeWitness {
                    observer: *a,
                    prefix: "0.0.0.0/0".parse().unwrap(),
                    hop_index: 0,
                },
            );
            self.labels.insert(edge_key(*a, *b), *label);
        }
        self.adjacency = build_adjacency(&self.skeleton);
    }
}

fn build_adjacency(skeleton: &TopologySkeleton) -> HashMap<Asn, Vec<Asn>> {
    let mut adjacency: HashMap<Asn, Vec<Asn>> = HashMap::new();
    for (a, b) in skeleton.edges() {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    for list in adjacency.values_mut() {
        list.sort();
        list.dedup();
    }
    adjacency
}

/// Labels every edge of the skeleton from the corpus paths.
///
/// For each path the highest-degree AS (leftmost on ties) is taken as the
/// top provider; edges left of it vote customer→provider, edges right of it
/// provider→customer. Edges with votes in both comparable directions become
/// siblings. Edges adjacent to a top provider that never appear in a
/// transit position and whose endpoint degrees are within a factor of
/// `params.r` become peers. Tallies commute, so labeling is independent of
/// route order.
pub fn infer_relationships(
    skeleton: &TopologySkeleton,
    corpus: &RibCorpus,
    params: InferenceParams,
) -> Topology {
    let degree: HashMap<Asn, usize> = {
        let mut d: HashMap<Asn, usize> = HashMap::new();
        for (a, b) in skeleton.edges() {
            *d.entry(a).or_default() += 1;
            *d.entry(b).or_default() += 1;
        }
        d
    };

    // Directional votes: (customer, provider) -> count.
    let mut votes: HashMap<(Asn, Asn), u32> = HashMap::new();
    // Edges that survived as the peerable edge next to a top provider.
    let mut peer_candidate: std::collections::HashSet<(Asn, Asn)> = Default::default();
    // Edges with transit evidence: seen away from a top provider, or the
    // losing side of the adjacent-edge tiebreak. Such edges cannot peer.
    let mut not_peering: std::collections::HashSet<(Asn, Asn)> = Default::default();

    for route in corpus.routes() {
        let hops = route.path.hops();
        if hops.len() < 2 {
            continue;
        }
        let top = hops
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| {
                let da = degree.get(*a).copied().unwrap_or(0);
                let db = degree.get(*b).copied().unwrap_or(0);
                da.cmp(&db).then(j.cmp(i)) // leftmost wins ties
            })
            .map(|(i, _)| i)
            .unwrap();

        for i in 0..hops.len() - 1 {
            let (u, v) = (hops[i], hops[i + 1]);
            if i < top {
                *votes.entry((u, v)).or_default() += 1; // uphill: v provides u
            } else {
                *votes.entry((v, u)).or_default() += 1; // downhill: u provides v
            }
            let key = edge_key(u, v);
            if i + 1 == top || i == top {
                peer_candidate.insert(key);
            } else {
                not_peering.insert(key);
            }
        }
        // At most one edge next to the top provider can be a peer link.
        // When both exist, the side whose outer endpoint has the smaller
        // degree is ruled out.
        if top > 0 && top + 1 < hops.len() {
            let left_outer = degree.get(&hops[top - 1]).copied().unwrap_or(0);
            let right_outer = degree.get(&hops[top + 1]).copied().unwrap_or(0);
            if left_outer > right_outer {
                not_peering.insert(edge_key(hops[top], hops[top + 1]));
            } else {
                not_peering.insert(edge_key(hops[top - 1], hops[top]));
            }
        }
    }

    let mut labels: BTreeMap<(Asn, Asn), EdgeLabel> = BTreeMap::new();
    let mut low_confidence = Vec::new();

    for (a, b) in skeleton.edges() {
        let key = edge_key(a, b);
        let x = votes.get(&(a, b)).copied().unwrap_or(0); // b provides a
        let y = votes.get(&(b, a)).copied().unwrap_or(0); // a provides b

        let label = if x > 0 && y > 0 && ((x > params.l && y > params.l) || (x <= params.l && y <= params.l))
        {
            EdgeLabel::Sibling
        } else if x == 0 && y == 0 {
            // No directional evidence; orient toward the higher-degree end.
            let da = degree.get(&a).copied().unwrap_or(0);
            let db = degree.get(&b).copied().unwrap_or(0);
            low_confidence.push(key);
            EdgeLabel::CustomerProvider { provider: if da >= db { a } else { b } }
        } else {
            let provider = if x >= y { b } else { a };
            EdgeLabel::CustomerProvider { provider }
        };
        labels.insert(key, label);
    }

    // Peer pass: only edges that sat next to a top provider and never
    // showed transit evidence qualify.
    for key in &peer_candidate {
        if not_peering.contains(key) {
            continue;
        }
        if matches!(labels.get(key), Some(EdgeLabel::Sibling)) {
            continue;
        }
        let (a, b) = *key;
        let da = degree.get(&a).copied().unwrap_or(0).max(1) as f64;
        let db = degree.get(&b).copied().unwrap_or(0).max(1) as f64;
        let ratio = if da >= db { da / db } else { db / da };
        if ratio <= params.r {
            labels.insert(*key, EdgeLabel::Peer);
        }
    }

    let adjacency = build_adjacency(skeleton);
    Topology {
        skeleton: skeleton.clone(),
        labels,
        adjacency,
        low_confidence,
    }
}

/// Classification of one step along a path, source side toward origin side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Up,    // customer → provider
    Down,  // provider → customer
    Peer,
    Sibling,
}

fn classify_step(topo: &Topology, from: Asn, to: Asn) -> Result<Step, RelError> {
    match topo.relationship(from, to) {
        Some(Relationship::CustomerOf) => Ok(Step::Up),
        Some(Relationship::ProviderOf) => Ok(Step::Down),
        Some(Relationship::Peer) => Ok(Step::Peer),
        Some(Relationship::Sibling) => Ok(Step::Sibling),
        None => Err(RelError::UnknownEdge(from, to)),
    }
}

/// True iff the path (read from the source toward the origin) is zero or
/// more customer→provider steps, at most one peer step, then zero or more
/// provider→customer steps. Sibling steps are transparent and legal
/// anywhere. Errors if a step uses an edge the topology does not know.
pub fn is_valley_free(path: &AsPath, topo: &Topology) -> Result<bool, RelError> {
    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
    enum Phase {
        Climb,
        Crossed,
        Descend,
    }
    let mut phase = Phase::Climb;
    let hops = path.hops();
    for i in 0..hops.len().saturating_sub(1) {
        match classify_step(topo, hops[i], hops[i + 1])? {
            Step::Sibling => {}
            Step::Up => {
                if phase != Phase::Climb {
                    return Ok(false);
                }
            }
            Step::Peer => {
                if phase != Phase::Climb {
                    return Ok(false);
                }
                phase = Phase::Crossed;
            }
            Step::Down => {
                phase = Phase::Descend;
            }
        }
    }
    Ok(true)
}

/// Export policy for one propagation step: an AS holding a route learned
/// via `learned_via` may offer it to a neighbor related as `neighbor`.
///
/// Customers and siblings receive everything; routes learned from a
/// customer or sibling may go anywhere. Routes learned from a provider or
/// peer stop at providers and peers.
pub fn may_export(learned_via: Relationship, neighbor: Relationship) -> bool {
    if matches!(neighbor, Relationship::ProviderOf | Relationship::Sibling) {
        return true;
    }
    matches!(learned_via, Relationship::ProviderOf | Relationship::Sibling)
}

/// The relationship class that governs exporting `path` from its first AS:
/// the first non-sibling step, or `Sibling` when the path never leaves the
/// sibling group (including single-AS origin paths, which export anywhere).
pub fn effective_learned_via(path: &AsPath, topo: &Topology) -> Result<Relationship, RelError> {
    let hops = path.hops();
    for i in 0..hops.len().saturating_sub(1) {
        match classify_step(topo, hops[i], hops[i + 1])? {
            Step::Sibling => continue,
            Step::Up => return Ok(Relationship::CustomerOf),
            Step::Down => return Ok(Relationship::ProviderOf),
            Step::Peer => return Ok(Relationship::Peer),
        }
    }
    Ok(Relationship::Sibling)
}

/// Parses the relationship override CSV: `asn1,asn2,label` where label is
/// one of `p2c` (asn1 provides asn2), `c2p`, `peer`, `sibling`.
pub fn parse_overrides<R: BufRead>(reader: R) -> Result<Vec<((Asn, Asn), EdgeLabel)>, RelError> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(RelError::BadOverride {
                line: lineno,
                reason: "expected asn1,asn2,label".to_string(),
            });
        }
        let a: Asn = parts[0].parse().map_err(|e| RelError::BadOverride {
            line: lineno,
            reason: format!("{e}"),
        })?;
        let b: Asn = parts[1].parse().map_err(|e| RelError::BadOverride {
            line: lineno,
            reason: format!("{e}"),
        })?;
        let label = match parts[2] {
            "p2c" => EdgeLabel::CustomerProvider { provider: a },
            "c2p" => EdgeLabel::CustomerProvider { provider: b },
            "peer" => EdgeLabel::Peer,
            "sibling" => EdgeLabel::Sibling,
            other => {
                return Err(RelError::BadOverride {
                    line: lineno,
                    reason: format!("unknown label `{other}`"),
                })
            }
        };
        out.push(((a, b), label));
    }
    Ok(out)
}

/// Renders edge labels in the override CSV format, sorted.
pub fn labels_csv(topo: &Topology) -> String {
    let mut out = String::from("# asn1,asn2,label\n");
    for (a, b) in topo.skeleton().edges() {
        let label = match topo.label(a, b) {
            Some(EdgeLabel::CustomerProvider { provider }) => {
                if provider == a {
                    "p2c"
                } else {
                    "c2p"
                }
            }
            Some(EdgeLabel::Peer) => "peer",
            Some(EdgeLabel::Sibling) => "sibling",
            None => continue,
        };
        out.push_str(&format!("{a},{b},{label}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rib::parse_rib;
    use std::io::Cursor;

    fn asn(v: u32) -> Asn {
        Asn::new(v).unwrap()
    }

    fn path(hops: &[u32]) -> AsPath {
        AsPath::new(hops.iter().map(|&v| asn(v)).collect())
    }

    /// hub 10 providing leaves 1..=4.
    fn star_topology() -> Topology {
        let mut text = String::new();
        // every route crosses the hub's interior
        text.push_str("1\t10.0.0.0/8\t1 10 2\n");
        text.push_str("2\t10.0.0.0/8\t2 10 3\n");
        text.push_str("3\t10.0.0.0/8\t3 10 4\n");
        text.push_str("4\t10.0.0.0/8\t4 10 1\n");
        let (corpus, _) = parse_rib(Cursor::new(text)).unwrap();
        let skel = crate::rib::extract_topology(&corpus);
        infer_relationships(&skel, &corpus, InferenceParams::default())
    }

    #[test]
    fn star_labels_all_leaves_as_customers() {
        let topo = star_topology();
        for leaf in [1u32, 2, 3, 4] {
            assert_eq!(
                topo.relationship(asn(leaf), asn(10)),
                Some(Relationship::CustomerOf),
                "leaf {leaf}"
            );
        }
        let (cp, _, sib) = topo.label_counts();
        assert_eq!(cp, 4);
        assert_eq!(sib, 0);
    }

    #[test]
    fn bidirectional_votes_make_sibling() {
        // Two 3-hop routes traverse edge 1-2 in opposite uphill directions:
        // top provider is AS 9 (degree 3) in both paths.
        let text = "7\t10.0.0.0/8\t7 1 2 9\n8\t10.0.0.0/8\t8 2 1 9\n\
                    1\t10.0.0.0/8\t1 9 5\n";
        let (corpus, _) = parse_rib(Cursor::new(text)).unwrap();
        let skel = crate::rib::extract_topology(&corpus);
        let topo = infer_relationships(&skel, &corpus, InferenceParams::default());
        assert_eq!(topo.label(asn(1), asn(2)), Some(EdgeLabel::Sibling));
    }

    #[test]
    fn relationship_views_are_consistent() {
        let topo = star_topology();
        assert_eq!(
            topo.relationship(asn(10), asn(1)),
            Some(Relationship::ProviderOf)
        );
        assert_eq!(topo.relationship(asn(1), asn(3)), None);
    }

    fn line_topology() -> Topology {
        // 1 is 2's customer, 2 is 3's customer; 4 peers with 3; 5 customer of 4.
        let skel = TopologySkeleton::default();
        Topology::from_labels(
            skel,
            vec![
                ((asn(1), asn(2)), EdgeLabel::CustomerProvider { provider: asn(2) }),
                ((asn(2), asn(3)), EdgeLabel::CustomerProvider { provider: asn(3) }),
                ((asn(3), asn(4)), EdgeLabel::Peer),
                ((asn(4), asn(5)), EdgeLabel::CustomerProvider { provider: asn(4) }),
                ((asn(2), asn(6)), EdgeLabel::Sibling),
            ],
        )
    }

    #[test]
    fn valley_free_pure_uphill() {
        let topo = line_topology();
        assert!(is_valley_free(&path(&[1, 2, 3]), &topo).unwrap());
    }

    #[test]
    fn valley_free_up_peer_down() {
        let topo = line_topology();
        assert!(is_valley_free(&path(&[1, 2, 3, 4, 5]), &topo).unwrap());
    }

    #[test]
    fn two_peer_steps_rejected() {
        let mut topo = line_topology();
        topo.apply_overrides(&[((asn(5), asn(7)), EdgeLabel::Peer)]);
        // 3-4 peer then 5-7 peer with a down step between: still illegal
        assert!(!is_valley_free(&path(&[3, 4, 5, 7]), &topo).unwrap());
        // and peer directly after peer
        topo.apply_overrides(&[((asn(4), asn(8)), EdgeLabel::Peer)]);
        assert!(!is_valley_free(&path(&[3, 4, 8]), &topo).unwrap());
    }

    #[test]
    fn valley_rejected() {
        // down into a customer, then back up: classic valley
        let mut topo = line_topology();
        topo.apply_overrides(&[((asn(1), asn(9)), EdgeLabel::CustomerProvider { provider: asn(9) })]);
        assert!(!is_valley_free(&path(&[2, 1, 9]), &topo).unwrap());
    }

    #[test]
    fn sibling_steps_are_transparent() {
        let topo = line_topology();
        // 1 up to 2, sibling hop to 6 anywhere is fine
        assert!(is_valley_free(&path(&[1, 2, 6]), &topo).unwrap());
    }

    #[test]
    fn unknown_edge_is_error() {
        let topo = line_topology();
        match is_valley_free(&path(&[1, 5]), &topo) {
            Err(RelError::UnknownEdge(a, b)) => {
                assert_eq!((a, b), (asn(1), asn(5)));
            }
            other => panic!("expected unknown edge, got {other:?}"),
        }
    }

    #[test]
    fn export_rules() {
        use Relationship::*;
        // learned from provider, neighbor is provider → no transit
        assert!(!may_export(CustomerOf, CustomerOf));
        // learned from customer, neighbor is peer → yes
        assert!(may_export(ProviderOf, Peer));
        // any route to a customer → yes
        assert!(may_export(CustomerOf, ProviderOf));
        assert!(may_export(Peer, ProviderOf));
        // peers don't re-export peer routes
        assert!(!may_export(Peer, Peer));
        // siblings receive everything
        assert!(may_export(Peer, Sibling));
    }

    #[test]
    fn effective_learned_via_skips_siblings() {
        let topo = line_topology();
        // 2—6 sibling, then 6 has no further hops: sibling-only path
        assert_eq!(
            effective_learned_via(&path(&[2, 6]), &topo).unwrap(),
            Relationship::Sibling
        );
        // 1 learned [1,2,3] via its provider 2 → first step Up → CustomerOf
        assert_eq!(
            effective_learned_via(&path(&[1, 2, 3]), &topo).unwrap(),
            Relationship::CustomerOf
        );
        // origin path
        assert_eq!(
            effective_learned_via(&path(&[1]), &topo).unwrap(),
            Relationship::Sibling
        );
    }

    #[test]
    fn overrides_parse_and_apply() {
        let csv = "# comment\n1,2,p2c\n3,4,peer\n5,6,sibling\n";
        let ov = parse_overrides(Cursor::new(csv)).unwrap();
        assert_eq!(ov.len(), 3);
        let mut topo = line_topology();
        topo.apply_overrides(&ov);
        assert_eq!(
            topo.relationship(asn(2), asn(1)),
            Some(Relationship::CustomerOf),
            "override flipped 1-2 so 1 now provides 2"
        );
        assert_eq!(topo.label(asn(3), asn(4)), Some(EdgeLabel::Peer));
        assert_eq!(topo.label(asn(5), asn(6)), Some(EdgeLabel::Sibling));
    }

    #[test]
    fn bad_override_reports_line() {
        let csv = "1,2,p2c\nbogus\n";
        match parse_overrides(Cursor::new(csv)) {
            Err(RelError::BadOverride { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected BadOverride, got {other:?}"),
        }
    }
}
