//! The node pool shared by every construction, query dispatch, and the
//! cell-probe and space instrumentation.
//!
//! Structures are trees of nodes stored in one level-ordered pool; children
//! are pool indices. An absent child (`None`) is the shared empty structure
//! and answers `-inf` without being visited.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::beame_fich::{MedianSplit, ReductionNode};
use crate::btree::PackedBTree;
use crate::pred::Pred;
use crate::strategy::SpaceAmp;
use crate::tabulation::{FullTable, PrefixSplit};
use crate::veb::VebNode;

/// Bits charged for one child reference.
pub const REF_BITS: u64 = 32;

/// Bits charged for a stored answer: the key plus a `-inf` flag.
#[inline]
pub fn answer_bits(key_bits: u32) -> u64 {
    key_bits as u64 + 1
}

/// Aligned cells of `word_bits` bits needed to hold an item of `bits` bits.
#[inline]
pub fn cells(bits: u64, word_bits: u32) -> u32 {
    bits.div_ceil(word_bits as u64).max(1) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

pub type Child = Option<NodeId>;

/// Model cost of one query.
///
/// `probes` counts aligned `w`-bit cells read. `depth` counts recursive
/// descents into child structures, so a query answered at the root has
/// depth 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    pub probes: u32,
    pub depth: u32,
}

impl QueryStats {
    #[inline]
    pub fn read(&mut self, cells: u32) {
        self.probes += cells;
    }
}

/// Anything that answers predecessor queries with instrumentation.
pub trait Searcher {
    fn search(&self, x: u64) -> (Pred, QueryStats);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf,
    FullTable,
    PrefixSplit,
    Veb,
    BTree,
    SpaceAmp,
    Reduction,
    Split,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Leaf => "leaf",
            NodeKind::FullTable => "full-table",
            NodeKind::PrefixSplit => "prefix-split",
            NodeKind::Veb => "veb",
            NodeKind::BTree => "packed-btree",
            NodeKind::SpaceAmp => "space-amp",
            NodeKind::Reduction => "reduction",
            NodeKind::Split => "median-split",
        }
    }
}

/// A structure holding exactly one key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub key_bits: u32,
    pub key: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Leaf(Leaf),
    FullTable(FullTable),
    PrefixSplit(PrefixSplit),
    Veb(VebNode),
    BTree(PackedBTree),
    SpaceAmp(SpaceAmp),
    Reduction(Box<ReductionNode>),
    Split(MedianSplit),
}

/// Behaviour every node kind provides.
pub(crate) trait NodeOps {
    fn query(&self, ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred;

    /// Bits of the tables this node owns, excluding its children.
    fn own_bits(&self, word_bits: u32) -> u64;

    fn for_each_child(&self, _f: &mut dyn FnMut(NodeId)) {}

    fn remap_children(&mut self, _f: &mut dyn FnMut(NodeId) -> NodeId) {}
}

impl NodeOps for Leaf {
    fn query(&self, _ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        stats.read(1);
        if x >= self.key {
            Pred::Key(self.key)
        } else {
            Pred::NegInf
        }
    }

    fn own_bits(&self, _word_bits: u32) -> u64 {
        self.key_bits as u64
    }
}

macro_rules! dispatch {
    ($node:expr, $n:ident => $body:expr) => {
        match $node {
            Node::Leaf($n) => $body,
            Node::FullTable($n) => $body,
            Node::PrefixSplit($n) => $body,
            Node::Veb($n) => $body,
            Node::BTree($n) => $body,
            Node::SpaceAmp($n) => $body,
            Node::Reduction($n) => $body,
            Node::Split($n) => $body,
        }
    };
}

impl Node {
    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Leaf(_) => NodeKind::Leaf,
            Node::FullTable(_) => NodeKind::FullTable,
            Node::PrefixSplit(_) => NodeKind::PrefixSplit,
            Node::Veb(_) => NodeKind::Veb,
            Node::BTree(_) => NodeKind::BTree,
            Node::SpaceAmp(_) => NodeKind::SpaceAmp,
            Node::Reduction(_) => NodeKind::Reduction,
            Node::Split(_) => NodeKind::Split,
        }
    }

    pub fn own_bits(&self, word_bits: u32) -> u64 {
        dispatch!(self, n => n.own_bits(word_bits))
    }

    pub fn children(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        dispatch!(self, n => n.for_each_child(&mut |c| out.push(c)));
        out
    }

    fn remap(&mut self, f: &mut dyn FnMut(NodeId) -> NodeId) {
        dispatch!(self, n => n.remap_children(f))
    }

    fn query(&self, ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        dispatch!(self, n => n.query(ctx, x, stats))
    }
}

/// Read-only view used while answering a query.
pub struct QueryCtx<'a> {
    pub nodes: &'a [Node],
    pub word_bits: u32,
}

impl QueryCtx<'_> {
    #[inline]
    pub fn run(&self, id: NodeId, x: u64, stats: &mut QueryStats) -> Pred {
        self.nodes[id.0 as usize].query(self, x, stats)
    }

    /// Recurses into a child, counting one level of depth. Empty children
    /// answer `-inf` immediately.
    #[inline]
    pub fn descend(&self, child: Child, x: u64, stats: &mut QueryStats) -> Pred {
        match child {
            None => Pred::NegInf,
            Some(id) => {
                stats.depth += 1;
                self.run(id, x, stats)
            }
        }
    }

    #[inline]
    pub fn cells(&self, bits: u64) -> u32 {
        cells(bits, self.word_bits)
    }
}

/// Node pool under construction. Tracks the bits of every node pushed.
#[derive(Debug, Default)]
pub struct Arena {
    nodes: Vec<Node>,
    word_bits: u32,
    bits: u64,
}

impl Arena {
    pub fn new(word_bits: u32) -> Self {
        Arena {
            nodes: Vec::new(),
            word_bits,
            bits: 0,
        }
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    pub fn push(&mut self, node: Node) -> NodeId {
        self.bits += node.own_bits(self.word_bits);
        self.nodes.push(node);
        NodeId(self.nodes.len() as u32 - 1)
    }

    pub fn get(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Running total of bits pushed so far.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Level-orders the pool from `root` and seals it.
    pub fn finish(self, root: Child, key_bits: u32) -> PredStructure {
        let word_bits = self.word_bits;
        let bits = self.bits;
        let mut old: Vec<Option<Node>> = self.nodes.into_iter().map(Some).collect();
        let mut order = Vec::with_capacity(old.len());
        let mut new_index = vec![u32::MAX; old.len()];
        if let Some(r) = root {
            let mut queue = VecDeque::from([r]);
            new_index[r.0 as usize] = 0;
            while let Some(id) = queue.pop_front() {
                order.push(id);
                for c in old[id.0 as usize].as_ref().expect("node visited twice").children() {
                    assert_eq!(new_index[c.0 as usize], u32::MAX, "node pool is not a tree");
                    new_index[c.0 as usize] = (order.len() + queue.len()) as u32;
                    queue.push_back(c);
                }
            }
        }
        let mut nodes = Vec::with_capacity(order.len());
        for id in order {
            let mut node = old[id.0 as usize].take().expect("node visited twice");
            node.remap(&mut |c| NodeId(new_index[c.0 as usize]));
            nodes.push(node);
        }
        PredStructure {
            nodes,
            root: root.map(|_| NodeId(0)),
            key_bits,
            word_bits,
            bits_used: bits,
        }
    }
}

/// A sealed, immutable predecessor structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredStructure {
    pub(crate) nodes: Vec<Node>,
    pub(crate) root: Child,
    pub(crate) key_bits: u32,
    pub(crate) word_bits: u32,
    /// Total accumulated while building.
    pub(crate) bits_used: u64,
}

impl PredStructure {
    pub fn empty(key_bits: u32, word_bits: u32) -> Self {
        Arena::new(word_bits).finish(None, key_bits)
    }

    pub fn query(&self, x: u64) -> (Pred, QueryStats) {
        let mut stats = QueryStats::default();
        let ans = match self.root {
            None => Pred::NegInf,
            Some(r) => self.ctx().run(r, x, &mut stats),
        };
        (ans, stats)
    }

    fn ctx(&self) -> QueryCtx<'_> {
        QueryCtx {
            nodes: &self.nodes,
            word_bits: self.word_bits,
        }
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits
    }

    pub fn root(&self) -> Child {
        self.root
    }

    pub fn root_node(&self) -> Option<&Node> {
        self.root.map(|r| &self.nodes[r.0 as usize])
    }

    pub fn root_kind(&self) -> Option<NodeKind> {
        self.root_node().map(Node::kind)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    /// Mutable access for fault-injection tests.
    #[doc(hidden)]
    pub fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    /// Bits reported by the build.
    pub fn bits_used(&self) -> u64 {
        self.bits_used
    }

    /// Independent bottom-up recount over the nodes reachable from the root.
    pub fn recount_bits(&self) -> u64 {
        fn walk(s: &PredStructure, id: NodeId) -> u64 {
            let node = s.node(id);
            node.own_bits(s.word_bits) + node.children().into_iter().map(|c| walk(s, c)).sum::<u64>()
        }
        self.root.map_or(0, |r| walk(self, r))
    }

    /// Per-kind node counts and bits.
    pub fn audit(&self) -> Vec<(NodeKind, usize, u64)> {
        let mut rows: Vec<(NodeKind, usize, u64)> = Vec::new();
        for n in &self.nodes {
            let k = n.kind();
            let b = n.own_bits(self.word_bits);
            match rows.iter_mut().find(|r| r.0 == k) {
                Some(r) => {
                    r.1 += 1;
                    r.2 += b;
                }
                None => rows.push((k, 1, b)),
            }
        }
        rows
    }
}

impl Searcher for PredStructure {
    fn search(&self, x: u64) -> (Pred, QueryStats) {
        self.query(x)
    }
}

/// Builds a single-key or empty structure where a subproblem degenerates.
pub(crate) fn trivial(arena: &mut Arena, keys: &[u64], key_bits: u32) -> Option<Child> {
    match keys {
        [] => Some(None),
        [k] => Some(Some(arena.push(Node::Leaf(Leaf { key_bits, key: *k })))),
        _ => None,
    }
}
