//! Schema-governed memory trees.
//!
//! A [`MemoryTree`] is an immutable value. Nodes are held behind [`Arc`] so a
//! new version branch shares every untouched node with the tree it was derived
//! from; mutation always produces a fresh tree (see [`version`]).

mod document;
mod schema;
pub mod version;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use document::{load_memory, parse_document, to_document, to_document_value, DocumentError};
pub use schema::{validate_schema, Rule, Schema, SchemaError, Violation};
pub use version::{
    insert_version, resolve_version, Edit, MutationError, MutationSpec, NewNode, NodeRef,
    LATEST_VERSION, SUMMARY_ATTRIBUTE,
};

/// Opaque node identifier, unique within one tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub node_type: String,
    /// Attribute values in stored order.
    pub attributes: IndexMap<String, String>,
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("unknown node id `{0}`")]
    UnknownNode(NodeId),
    #[error("node id `{0}` appears more than once")]
    DuplicateId(NodeId),
    #[error("node `{0}` is not reachable from the root")]
    Unreachable(NodeId),
}

/// Rendered subtree plus its whitespace-token count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubtreeSerialization {
    pub text: String,
    pub token_count: usize,
}

impl SubtreeSerialization {
    pub fn new(text: String) -> Self {
        let token_count = count_tokens(&text);
        SubtreeSerialization { text, token_count }
    }
}

/// Number of maximal non-whitespace runs in `text`.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Rooted tree of typed nodes.
///
/// Besides the node map, the tree keeps a pre-order index (position and
/// subtree size per node, plus parent links) rebuilt whenever a tree value is
/// constructed. Descendant sets are contiguous ranges of that order.
#[derive(Debug, Clone)]
pub struct MemoryTree {
    schema: Arc<Schema>,
    root: NodeId,
    nodes: HashMap<NodeId, Arc<Node>>,
    revision: u64,
    preorder: Vec<NodeId>,
    position: HashMap<NodeId, usize>,
    subtree_len: Vec<usize>,
    depth: Vec<usize>,
    parent: HashMap<NodeId, NodeId>,
}

/// Equality is structural: schema, root and node contents. The revision
/// counter is not part of the document and is ignored.
impl PartialEq for MemoryTree {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.root == other.root
            && self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .all(|(id, n)| other.nodes.get(id).is_some_and(|m| **m == **n))
    }
}

impl MemoryTree {
    /// Builds a tree from a node map, checking only the tree shape (one
    /// parent per node, every node reachable, no dangling child ids).
    /// Schema conformance is checked separately by [`validate_schema`].
    pub fn from_parts(
        schema: Arc<Schema>,
        root: NodeId,
        nodes: HashMap<NodeId, Arc<Node>>,
        revision: u64,
    ) -> Result<Self, TreeError> {
        if !nodes.contains_key(&root) {
            return Err(TreeError::UnknownNode(root));
        }
        let mut preorder = Vec::with_capacity(nodes.len());
        let mut position = HashMap::with_capacity(nodes.len());
        let mut subtree_len = Vec::with_capacity(nodes.len());
        let mut depth = Vec::with_capacity(nodes.len());
        let mut parent = HashMap::with_capacity(nodes.len());

        // Iterative pre-order; the `usize::MAX` marker closes a subtree.
        let mut stack: Vec<(NodeId, usize)> = vec![(root.clone(), 0)];
        let mut open: Vec<usize> = Vec::new();
        while let Some((id, d)) = stack.pop() {
            if d == usize::MAX {
                let pos = open.pop().expect("balanced");
                subtree_len[pos] = preorder.len() - pos - 1;
                continue;
            }
            if position.contains_key(&id) {
                return Err(TreeError::DuplicateId(id));
            }
            let node = nodes.get(&id).ok_or_else(|| TreeError::UnknownNode(id.clone()))?;
            let pos = preorder.len();
            position.insert(id.clone(), pos);
            preorder.push(id.clone());
            subtree_len.push(0);
            depth.push(d);
            open.push(pos);
            stack.push((id.clone(), usize::MAX));
            for child in node.children.iter().rev() {
                if parent.insert(child.clone(), id.clone()).is_some() || *child == root {
                    return Err(TreeError::DuplicateId(child.clone()));
                }
                stack.push((child.clone(), d + 1));
            }
        }
        if preorder.len() != nodes.len() {
            let stray = nodes
                .keys()
                .filter(|k| !position.contains_key(*k))
                .min()
                .cloned()
                .expect("some node unreached");
            return Err(TreeError::Unreachable(stray));
        }
        Ok(MemoryTree {
            schema,
            root,
            nodes,
            revision,
            preorder,
            position,
            subtree_len,
            depth,
            parent,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub(crate) fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn root_id(&self) -> &NodeId {
        &self.root
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &NodeId) -> Result<&Node, TreeError> {
        self.nodes
            .get(id)
            .map(|n| n.as_ref())
            .ok_or_else(|| TreeError::UnknownNode(id.clone()))
    }

    pub(crate) fn nodes_map(&self) -> &HashMap<NodeId, Arc<Node>> {
        &self.nodes
    }

    pub fn children(&self, id: &NodeId) -> Result<&[NodeId], TreeError> {
        Ok(&self.node(id)?.children)
    }

    /// Proper descendants of `id` in document order.
    pub fn descendants(&self, id: &NodeId) -> Result<&[NodeId], TreeError> {
        let pos = self.position(id)?;
        Ok(&self.preorder[pos + 1..pos + 1 + self.subtree_len[pos]])
    }

    /// Every node id, pre-order, children visited in stored order.
    pub fn document_order(&self) -> &[NodeId] {
        &self.preorder
    }

    /// Index of `id` in [`document_order`](Self::document_order).
    pub fn position(&self, id: &NodeId) -> Result<usize, TreeError> {
        self.position
            .get(id)
            .copied()
            .ok_or_else(|| TreeError::UnknownNode(id.clone()))
    }

    pub fn parent(&self, id: &NodeId) -> Option<&NodeId> {
        self.parent.get(id)
    }

    /// Distance from the root; the root has depth 0.
    pub fn depth(&self, id: &NodeId) -> Result<usize, TreeError> {
        Ok(self.depth[self.position(id)?])
    }

    /// Ids from the root down to `id`, inclusive.
    pub fn path(&self, id: &NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.position(id)?;
        let mut path = vec![id.clone()];
        let mut cur = id;
        while let Some(p) = self.parent.get(cur) {
            path.push(p.clone());
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// True when `ancestor` is `id` or lies on its root path.
    pub fn is_ancestor_or_self(&self, ancestor: &NodeId, id: &NodeId) -> bool {
        match (self.position.get(ancestor), self.position.get(id)) {
            (Some(&a), Some(&n)) => a <= n && n <= a + self.subtree_len[a],
            _ => false,
        }
    }

    /// Canonical text of a node: its type followed by its attribute values in
    /// stored order, single-space separated.
    pub fn node_text(&self, id: &NodeId) -> Result<String, TreeError> {
        Ok(render_node_text(self.node(id)?))
    }

    /// Indented rendering of the subtree at `id`, one line per node.
    pub fn serialize_subtree(&self, id: &NodeId) -> Result<SubtreeSerialization, TreeError> {
        let pos = self.position(id)?;
        let base = self.depth[pos];
        let mut text = String::new();
        for i in pos..=pos + self.subtree_len[pos] {
            let node = &self.nodes[&self.preorder[i]];
            for _ in base..self.depth[i] {
                text.push_str("  ");
            }
            text.push_str(&render_node_text(node));
            text.push('\n');
        }
        Ok(SubtreeSerialization::new(text))
    }
}

fn render_node_text(node: &Node) -> String {
    let mut text = node.node_type.clone();
    for value in node.attributes.values() {
        let value = value.trim();
        if !value.is_empty() {
            text.push(' ');
            text.push_str(value);
        }
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = include_str!("../../../../fixtures/acl_trip.json");

    fn fixture() -> MemoryTree {
        load_memory(FIXTURE).unwrap()
    }

    fn ids(list: &[NodeId]) -> Vec<&str> {
        list.iter().map(|i| i.as_str()).collect()
    }

    fn small(children: &[(&str, &[&str])]) -> MemoryTree {
        let schema = Arc::new(
            Schema::new(vec!["T".into()], IndexMap::new(), IndexMap::new()).unwrap(),
        );
        let mut nodes = HashMap::new();
        for (id, kids) in children {
            nodes.insert(
                NodeId::from(*id),
                Arc::new(Node {
                    id: NodeId::from(*id),
                    node_type: "T".into(),
                    attributes: IndexMap::new(),
                    children: kids.iter().map(|k| NodeId::from(*k)).collect(),
                }),
            );
        }
        MemoryTree::from_parts(schema, "root".into(), nodes, 0).unwrap()
    }

    #[test]
    fn children_of_root_are_versions() {
        let t = fixture();
        assert_eq!(ids(t.children(t.root_id()).unwrap()), ["v1"]);
        assert!(t.children(&"poi-2-1".into()).unwrap().is_empty());
        assert_eq!(
            t.children(&"nope".into()).unwrap_err(),
            TreeError::UnknownNode("nope".into())
        );
    }

    #[test]
    fn descendants_follow_document_order() {
        let t = fixture();
        let all = t.descendants(t.root_id()).unwrap();
        assert_eq!(all, &t.document_order()[1..]);
        assert_eq!(
            ids(t.descendants(&"day-2".into()).unwrap()),
            ["poi-2-1", "poi-2-2", "poi-2-3"]
        );
        assert!(t.descendants(&"poi-3-3".into()).unwrap().is_empty());
    }

    #[test]
    fn document_order_is_preorder() {
        let chain = small(&[("root", &["a"]), ("a", &["b"]), ("b", &[])]);
        assert_eq!(ids(chain.document_order()), ["root", "a", "b"]);
        let branchy = small(&[("root", &["a", "b"]), ("a", &["c"]), ("b", &[]), ("c", &[])]);
        assert_eq!(ids(branchy.document_order()), ["root", "a", "c", "b"]);

        let t = fixture();
        assert_eq!(
            ids(&t.document_order()[..7]),
            ["itinerary", "v1", "day-1", "poi-1-1", "poi-1-2", "poi-1-3", "day-2"]
        );
    }

    #[test]
    fn rejects_shared_child_and_unreachable_nodes() {
        let schema = Arc::new(
            Schema::new(vec!["T".into()], IndexMap::new(), IndexMap::new()).unwrap(),
        );
        let mk = |id: &str, kids: &[&str]| {
            (
                NodeId::from(id),
                Arc::new(Node {
                    id: id.into(),
                    node_type: "T".into(),
                    attributes: IndexMap::new(),
                    children: kids.iter().map(|k| NodeId::from(*k)).collect(),
                }),
            )
        };
        let shared: HashMap<_, _> =
            [mk("root", &["a", "b"]), mk("a", &["c"]), mk("b", &["c"]), mk("c", &[])].into();
        assert!(matches!(
            MemoryTree::from_parts(schema.clone(), "root".into(), shared, 0),
            Err(TreeError::DuplicateId(_))
        ));
        let stray: HashMap<_, _> = [mk("root", &[]), mk("x", &[])].into();
        assert_eq!(
            MemoryTree::from_parts(schema.clone(), "root".into(), stray, 0).unwrap_err(),
            TreeError::Unreachable("x".into())
        );
        let cyclic: HashMap<_, _> = [mk("root", &["a"]), mk("a", &["root"])].into();
        assert!(MemoryTree::from_parts(schema, "root".into(), cyclic, 0).is_err());
    }

    #[test]
    fn node_text_uses_stored_attribute_order() {
        let t = fixture();
        assert_eq!(
            t.node_text(&"poi-1-3".into()).unwrap(),
            "POI conference welcome reception 18:00"
        );
        let bare = small(&[("root", &[])]);
        assert_eq!(bare.node_text(&"root".into()).unwrap(), "T");
    }

    #[test]
    fn serialize_subtree_renders_indented_lines() {
        let t = fixture();
        let leaf = t.serialize_subtree(&"poi-2-1".into()).unwrap();
        assert_eq!(leaf.text, "POI conference opening keynote 09:00\n");
        assert_eq!(leaf.token_count, 5);

        let day = t.serialize_subtree(&"day-2".into()).unwrap();
        assert_eq!(day.text.lines().count(), 4);
        assert!(day.text.lines().skip(1).all(|l| l.starts_with("  POI")));
        assert_eq!(day.token_count, count_tokens(&day.text));

        assert_eq!(
            t.serialize_subtree(t.root_id()).unwrap(),
            t.serialize_subtree(t.root_id()).unwrap()
        );
    }

    #[test]
    fn path_runs_from_root() {
        let t = fixture();
        assert_eq!(
            ids(&t.path(&"poi-2-2".into()).unwrap()),
            ["itinerary", "v1", "day-2", "poi-2-2"]
        );
        assert!(t.is_ancestor_or_self(&"day-2".into(), &"poi-2-2".into()));
        assert!(!t.is_ancestor_or_self(&"day-1".into(), &"poi-2-2".into()));
    }

    #[test]
    fn token_count_counts_whitespace_runs() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("  a\tb \n\n c "), 3);
    }
}
