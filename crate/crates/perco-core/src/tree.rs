//! Vertices, edges, and parameters of the oriented tree.
//!
//! Vertices are finite sequences of labels in `1..=d`; the root is the
//! empty sequence, written `o`. Edges point away from the root: a short
//! edge descends one level, a long edge descends exactly `k` levels.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use smallvec::SmallVec;

/// Inline capacity for label sequences; deeper vertices spill to the heap.
type Labels = SmallVec<[u8; 32]>;

/// Errors for parameter validation and malformed tree operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelError {
    /// Branching degree outside `2..=255` (labels are stored as bytes).
    InvalidDegree(u32),
    /// Long-edge range `k` must be at least 1.
    InvalidRange(u32),
    /// A probability parameter is NaN or outside `[0, 1]`.
    InvalidProbability(&'static str),
    /// `d^k` does not fit the enumeration limits of this crate.
    FanoutOverflow { d: u32, k: u32 },
    /// A vertex label is 0 or exceeds the branching degree.
    BadLabel(u8),
    /// Edge suffix length does not match its kind (1 for short, `k` for long).
    BadSuffixLength { kind: EdgeKind, len: usize, k: u32 },
    /// The target vertex is not a descendant of the base vertex.
    NotInProgeny,
    /// A long edge was required.
    NotALongEdge,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidDegree(d) => write!(f, "branching degree {d} not in 2..=255"),
            ModelError::InvalidRange(k) => write!(f, "long-edge range {k} must be >= 1"),
            ModelError::InvalidProbability(name) => {
                write!(f, "probability {name} is NaN or not in [0, 1]")
            }
            ModelError::FanoutOverflow { d, k } => {
                write!(f, "long-edge fanout {d}^{k} exceeds enumeration limits")
            }
            ModelError::BadLabel(a) => write!(f, "label {a} out of range"),
            ModelError::BadSuffixLength { kind, len, k } => {
                write!(f, "{kind:?} edge with suffix length {len} (k = {k})")
            }
            ModelError::NotInProgeny => write!(f, "vertex is not in the progeny of the base"),
            ModelError::NotALongEdge => write!(f, "operation requires a long edge"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Model parameters: branching degree `d`, long-edge range `k`, and the
/// open probabilities `p` (short) and `q` (long).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub d: u32,
    pub k: u32,
    pub p: f64,
    pub q: f64,
}

impl ModelParams {
    pub fn new(d: u32, k: u32, p: f64, q: f64) -> Result<Self, ModelError> {
        if !(2..=255).contains(&d) {
            return Err(ModelError::InvalidDegree(d));
        }
        if k < 1 {
            return Err(ModelError::InvalidRange(k));
        }
        // Long fanout d^k is enumerated when revealing exit batches; cap it
        // so those loops stay addressable.
        match (d as u128).checked_pow(k) {
            Some(f) if f <= 1 << 32 => {}
            _ => return Err(ModelError::FanoutOverflow { d, k }),
        }
        for (name, value) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::InvalidProbability(name));
            }
        }
        Ok(ModelParams { d, k, p, q })
    }

    /// Number of long edges out of one vertex, `d^k`.
    pub fn long_fanout(&self) -> u64 {
        (self.d as u64).pow(self.k)
    }

    /// Same tree, different open probabilities.
    pub fn with_probs(&self, p: f64, q: f64) -> Result<Self, ModelError> {
        ModelParams::new(self.d, self.k, p, q)
    }
}

/// A vertex of the tree: a sequence of 1-based labels, each in `1..=d`.
/// The root is the empty sequence.
///
/// The derived ordering is total: first by depth, then lexicographically
/// by labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Vertex {
    labels: Labels,
}

impl Vertex {
    /// The root `o`.
    pub fn root() -> Self {
        Vertex { labels: Labels::new() }
    }

    pub fn from_labels(labels: &[u8]) -> Result<Self, ModelError> {
        if let Some(&bad) = labels.iter().find(|&&a| a == 0) {
            return Err(ModelError::BadLabel(bad));
        }
        Ok(Vertex { labels: Labels::from_slice(labels) })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Depth in the tree, i.e. the number of labels.
    pub fn depth(&self) -> usize {
        self.labels.len()
    }

    pub fn is_root(&self) -> bool {
        self.labels.is_empty()
    }

    /// Concatenation `self · other`.
    pub fn concat(&self, other: &Vertex) -> Vertex {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Vertex { labels }
    }

    /// The child `self · (a)`.
    pub fn child(&self, a: u8) -> Vertex {
        let mut labels = self.labels.clone();
        labels.push(a);
        Vertex { labels }
    }

    /// Descendant `self · suffix`.
    pub fn descend(&self, suffix: &[u8]) -> Vertex {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(suffix);
        Vertex { labels }
    }

    /// The first `n` labels as a vertex.
    pub fn prefix(&self, n: usize) -> Option<Vertex> {
        (n <= self.depth()).then(|| Vertex { labels: Labels::from_slice(&self.labels[..n]) })
    }

    pub fn parent(&self) -> Option<Vertex> {
        match self.depth() {
            0 => None,
            n => self.prefix(n - 1),
        }
    }

    /// True when `other` lies in the progeny of `self` (including equality).
    pub fn is_ancestor_of(&self, other: &Vertex) -> bool {
        other.labels.len() >= self.labels.len() && other.labels.starts_with(&self.labels)
    }

    /// Distance down from `self` to `other` when `other` is in the
    /// progeny of `self`; `None` otherwise. `ancestry(u, u) == Some(0)`.
    pub fn ancestry(&self, other: &Vertex) -> Option<usize> {
        self.is_ancestor_of(other).then(|| other.depth() - self.depth())
    }

    /// Strips `self` off the front of `other`: returns `v` with
    /// `other == self · v`. Errors when `other` is not in `prog(self)`.
    pub fn shift(&self, other: &Vertex) -> Result<Vertex, ModelError> {
        if !self.is_ancestor_of(other) {
            return Err(ModelError::NotInProgeny);
        }
        Ok(Vertex { labels: Labels::from_slice(&other.labels[self.depth()..]) })
    }
}

impl Ord for Vertex {
    fn cmp(&self, other: &Self) -> Ordering {
        // Depth first, then labels: "shortlex".
        self.depth()
            .cmp(&other.depth())
            .then_with(|| self.labels.cmp(&other.labels))
    }
}

impl PartialOrd for Vertex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Vertex {
    /// Canonical text form: `o` for the root, dot-joined labels otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            return write!(f, "o");
        }
        for (i, a) in self.labels.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Whether an edge descends one level or `k` levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Short,
    Long,
}

/// A directed edge, identified by its tail vertex and descent suffix.
///
/// For `k = 1` a short and a long edge share endpoints but remain
/// distinct sample points; the kind tag keeps them apart.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    kind: EdgeKind,
    tail: Vertex,
    suffix: Labels,
}

impl EdgeRef {
    /// Short edge `<tail, tail · (a)>`.
    pub fn short(tail: Vertex, a: u8) -> Result<Self, ModelError> {
        if a == 0 {
            return Err(ModelError::BadLabel(a));
        }
        Ok(EdgeRef { kind: EdgeKind::Short, tail, suffix: Labels::from_slice(&[a]) })
    }

    /// Long edge `<tail, tail · suffix>` with `|suffix| = k`.
    pub fn long(tail: Vertex, suffix: &[u8], k: u32) -> Result<Self, ModelError> {
        if suffix.len() != k as usize {
            return Err(ModelError::BadSuffixLength { kind: EdgeKind::Long, len: suffix.len(), k });
        }
        if let Some(&bad) = suffix.iter().find(|&&a| a == 0) {
            return Err(ModelError::BadLabel(bad));
        }
        Ok(EdgeRef { kind: EdgeKind::Long, tail, suffix: Labels::from_slice(suffix) })
    }

    pub fn kind(&self) -> EdgeKind {
        self.kind
    }

    pub fn tail(&self) -> &Vertex {
        &self.tail
    }

    pub fn suffix(&self) -> &[u8] {
        &self.suffix
    }

    pub fn head(&self) -> Vertex {
        self.tail.descend(&self.suffix)
    }

    /// Depth of the head, where the edge is revealed during exploration.
    pub fn head_depth(&self) -> usize {
        self.tail.depth() + self.suffix.len()
    }

    /// The trace of a long edge: the chain of `k` short edges joining its
    /// endpoints. Rejects short edges.
    pub fn trace(&self) -> Result<Vec<EdgeRef>, ModelError> {
        if self.kind != EdgeKind::Long {
            return Err(ModelError::NotALongEdge);
        }
        let mut chain = Vec::with_capacity(self.suffix.len());
        let mut at = self.tail.clone();
        for &a in self.suffix.iter() {
            chain.push(EdgeRef::short(at.clone(), a).expect("labels already validated"));
            at = at.child(a);
        }
        Ok(chain)
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}>", self.tail, self.head())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn v(labels: &[u8]) -> Vertex {
        Vertex::from_labels(labels).unwrap()
    }

    #[test]
    fn concat_definition_unrolled() {
        assert_eq!(v(&[1]).concat(&v(&[2, 1])), v(&[1, 2, 1]));
        assert_eq!(v(&[3]).concat(&Vertex::root()), v(&[3]));
        assert_eq!(Vertex::root().concat(&v(&[2])), v(&[2]));
    }

    #[test]
    fn ancestry_examples() {
        assert_eq!(v(&[1]).ancestry(&v(&[1, 2, 1])), Some(2));
        assert_eq!(Vertex::root().ancestry(&v(&[2, 2, 1, 1])), Some(4));
        assert_eq!(v(&[2]).ancestry(&v(&[1, 2])), None);
        assert_eq!(v(&[1, 2]).ancestry(&v(&[1, 2])), Some(0));
    }

    #[test]
    fn shift_examples() {
        assert_eq!(v(&[1]).shift(&v(&[1, 2])).unwrap(), v(&[2]));
        assert_eq!(Vertex::root().shift(&v(&[1, 2])).unwrap(), v(&[1, 2]));
        assert_eq!(v(&[2]).shift(&v(&[1, 2])), Err(ModelError::NotInProgeny));
    }

    #[test]
    fn trace_unrolls_long_edges() {
        let e = EdgeRef::long(Vertex::root(), &[1, 2], 2).unwrap();
        let chain = e.trace().unwrap();
        assert_eq!(
            chain,
            vec![
                EdgeRef::short(Vertex::root(), 1).unwrap(),
                EdgeRef::short(v(&[1]), 2).unwrap(),
            ]
        );

        // k = 1: same endpoints as the parallel short edge, distinct kind.
        let e = EdgeRef::long(v(&[2]), &[1], 1).unwrap();
        let chain = e.trace().unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(chain[0].head(), e.head());
        assert_ne!(chain[0].kind(), e.kind());

        let e = EdgeRef::long(v(&[2]), &[1, 1, 2], 3).unwrap();
        let chain = e.trace().unwrap();
        assert_eq!(chain.len(), 3);
        assert_eq!(chain[0].tail(), e.tail());
        assert_eq!(chain[2].head(), v(&[2, 1, 1, 2]));
        for pair in chain.windows(2) {
            assert_eq!(pair[0].head(), *pair[1].tail());
        }

        let s = EdgeRef::short(Vertex::root(), 1).unwrap();
        assert_eq!(s.trace(), Err(ModelError::NotALongEdge));
    }

    #[test]
    fn trace_endpoints_are_all_prefixes() {
        let e = EdgeRef::long(v(&[2, 1]), &[1, 2, 2], 3).unwrap();
        let chain = e.trace().unwrap();
        let mut endpoints = vec![e.tail().clone()];
        endpoints.extend(chain.iter().map(|s| s.head()));
        let expected: Vec<Vertex> =
            (0..=3).map(|j| e.tail().descend(&e.suffix()[..j])).collect();
        assert_eq!(endpoints, expected);
    }

    #[test]
    fn canonical_text_form() {
        assert_eq!(format!("{}", Vertex::root()), "o");
        assert_eq!(format!("{}", v(&[1, 2, 1])), "1.2.1");
        assert_eq!(format!("{}", EdgeRef::short(v(&[1]), 2).unwrap()), "<1, 1.2>");
    }

    #[test]
    fn ordering_is_total_shortlex() {
        let mut vs = vec![v(&[2]), v(&[1, 1]), Vertex::root(), v(&[1]), v(&[2, 1])];
        vs.sort();
        assert_eq!(vs, vec![Vertex::root(), v(&[1]), v(&[2]), v(&[1, 1]), v(&[2, 1])]);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(2, 2, 0.5, 0.1).is_ok());
        assert_eq!(ModelParams::new(1, 2, 0.5, 0.1), Err(ModelError::InvalidDegree(1)));
        assert_eq!(ModelParams::new(2, 0, 0.5, 0.1), Err(ModelError::InvalidRange(0)));
        assert_eq!(
            ModelParams::new(2, 2, 1.5, 0.1),
            Err(ModelError::InvalidProbability("p"))
        );
        assert_eq!(
            ModelParams::new(2, 2, 0.5, f64::NAN),
            Err(ModelError::InvalidProbability("q"))
        );
        assert!(matches!(
            ModelParams::new(255, 33, 0.5, 0.1),
            Err(ModelError::FanoutOverflow { .. })
        ));
        assert_eq!(ModelParams::new(2, 3, 0.0, 0.0).unwrap().long_fanout(), 8);
    }

    fn arb_vertex() -> impl Strategy<Value = Vertex> {
        proptest::collection::vec(1u8..=4, 0..12).prop_map(|ls| v(&ls))
    }

    proptest! {
        #[test]
        fn concat_associative_with_identity(a in arb_vertex(), b in arb_vertex(), c in arb_vertex()) {
            prop_assert_eq!(a.concat(&b).concat(&c), a.concat(&b.concat(&c)));
            prop_assert_eq!(a.concat(&Vertex::root()), a.clone());
            prop_assert_eq!(Vertex::root().concat(&a), a);
        }

        #[test]
        fn ancestry_of_concat_is_suffix_length(u in arb_vertex(), w in arb_vertex()) {
            prop_assert_eq!(u.ancestry(&u.concat(&w)), Some(w.depth()));
        }

        #[test]
        fn shift_round_trips(u in arb_vertex(), w in arb_vertex()) {
            prop_assert_eq!(u.shift(&u.concat(&w)).unwrap(), w);
        }
    }
}
