//! Fixed-width node sets backed by a `u32` bitmask.
//!
//! Parent sets, descendant sets and DAG rows are all subsets of at most 32
//! node indices, so a machine word gives O(1) set algebra and cheap hashing.

use std::fmt;

/// Maximum number of variables supported by the bitmask representation.
pub const MAX_NODES: usize = 32;

/// A set of node indices in `0..32`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet(u32);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    /// Set containing all of `0..d`.
    pub fn full(d: usize) -> Self {
        debug_assert!(d <= MAX_NODES);
        if d == MAX_NODES {
            NodeSet(u32::MAX)
        } else {
            NodeSet((1u32 << d) - 1)
        }
    }

    pub fn from_bits(bits: u32) -> Self {
        NodeSet(bits)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut s = NodeSet::EMPTY;
        for &i in indices {
            s.insert(i);
        }
        s
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        debug_assert!(i < MAX_NODES);
        self.0 & (1 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < MAX_NODES);
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < MAX_NODES);
        self.0 &= !(1 << i);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn intersect(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn minus(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// All subsets of `self` with at most `k` elements, in ascending bitmask
    /// order. The order is part of the sampler's determinism contract.
    pub fn subsets_up_to(self, k: usize) -> Vec<NodeSet> {
        let positions: Vec<usize> = self.iter().collect();
        let mut out = vec![NodeSet::EMPTY];
        let mut current = Vec::new();
        fn rec(
            positions: &[usize],
            start: usize,
            remaining: usize,
            current: &mut Vec<usize>,
            out: &mut Vec<NodeSet>,
        ) {
            if remaining == 0 {
                return;
            }
            for i in start..positions.len() {
                current.push(positions[i]);
                out.push(NodeSet::from_indices(current));
                rec(positions, i + 1, remaining - 1, current, out);
                current.pop();
            }
        }
        rec(&positions, 0, k, &mut current, &mut out);
        out.sort_unstable();
        out
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
