//! Copy-on-write version branches.
//!
//! A mutation never touches existing nodes. It deep-copies one Version-level
//! subtree (a direct child of the root) under fresh ids, applies the edit to
//! the copy, tags the copy with a `summary` attribute and appends it as the
//! root's last child.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{validate_schema, MemoryTree, Node, NodeId, Violation};

/// Attribute on a Version node holding the edit summary.
pub const SUMMARY_ATTRIBUTE: &str = "summary";

/// Keyword for "the root's last child" in [`MutationSpec::source`].
pub const LATEST_VERSION: &str = "latest";

/// A node inside the source version, by id or by a type-indexed path
/// relative to the version node such as `Day[2]/POI[1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeRef {
    Id(NodeId),
    Path { path: String },
}

/// Subtree to insert. Ids are optional; missing ids are allocated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<NodeId>,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default)]
    pub attributes: IndexMap<String, String>,
    #[serde(default)]
    pub children: Vec<NewNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Edit {
    Insert {
        parent: NodeRef,
        node: NewNode,
        /// Index among the parent's children; appended when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<usize>,
    },
    Delete {
        targets: Vec<NodeRef>,
    },
    Noop,
}

/// Mutation file contents: which version to branch from plus the edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationSpec {
    /// Id of a Version-level node, or `"latest"`.
    pub source: String,
    #[serde(flatten)]
    pub edit: Edit,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("`{0}` is not a version (a direct child of the root)")]
    UnknownSourceVersion(String),
    #[error("node `{0}` is not inside the source version")]
    OutsideSourceVersion(NodeId),
    #[error("cannot resolve path `{path}`: {reason}")]
    BadPath { path: String, reason: String },
    #[error("node id `{0}` is already in use")]
    DuplicateId(NodeId),
    #[error("schema violation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Schema(Vec<Violation>),
}

impl MutationSpec {
    /// Applies this spec to `tree`, producing a new tree with one more
    /// version branch.
    pub fn apply(&self, tree: &MemoryTree, summary: &str) -> Result<MemoryTree, MutationError> {
        let source = resolve_version(tree, &self.source)?;
        insert_version(tree, &source, &self.edit, summary)
    }
}

/// Resolves a version reference (`"latest"` or a version id).
pub fn resolve_version(tree: &MemoryTree, reference: &str) -> Result<NodeId, MutationError> {
    let versions = tree.children(tree.root_id()).expect("root exists");
    let id = NodeId::from(reference);
    if versions.contains(&id) {
        return Ok(id);
    }
    if reference == LATEST_VERSION {
        if let Some(last) = versions.last() {
            return Ok(last.clone());
        }
    }
    Err(MutationError::UnknownSourceVersion(reference.to_string()))
}

/// Branches `source` into a new version with `edit` applied.
pub fn insert_version(
    tree: &MemoryTree,
    source: &NodeId,
    edit: &Edit,
    summary: &str,
) -> Result<MemoryTree, MutationError> {
    let root = tree.root_id();
    if tree.parent(source) != Some(root) {
        return Err(MutationError::UnknownSourceVersion(source.to_string()));
    }

    let mut deleted = HashSet::new();
    let mut insert: Option<(NodeId, &NewNode, Option<usize>)> = None;
    match edit {
        Edit::Noop => {}
        Edit::Delete { targets } => {
            for t in targets {
                let id = resolve_ref(tree, source, t)?;
                if &id == source {
                    return Err(MutationError::OutsideSourceVersion(id));
                }
                deleted.insert(id);
            }
        }
        Edit::Insert {
            parent,
            node,
            position,
        } => {
            insert = Some((resolve_ref(tree, source, parent)?, node, *position));
        }
    }

    let mut ids = IdAllocator::new(tree);
    if let Some((_, node, _)) = &insert {
        ids.reserve_explicit(node)?;
    }
    let version_id = ids.version_id(tree.children(root).expect("root").len() + 1);

    let mut fresh: HashMap<NodeId, Arc<Node>> = HashMap::new();
    let mut copier = Copier {
        tree,
        deleted: &deleted,
        insert,
        ids: &mut ids,
        out: &mut fresh,
    };
    copier.copy(source, Some(version_id.clone()), Some(summary));

    let mut nodes = tree.nodes_map().clone();
    let mut new_root = tree.node(root).expect("root").clone();
    new_root.children.push(version_id.clone());
    nodes.insert(root.clone(), Arc::new(new_root));
    nodes.extend(fresh);

    let next = MemoryTree::from_parts(
        tree.schema_arc().clone(),
        root.clone(),
        nodes,
        tree.revision() + 1,
    )
    .expect("copy preserves tree shape");
    let violations: Vec<_> = validate_schema(&next)
        .into_iter()
        .filter(|v| next.is_ancestor_or_self(&version_id, &v.node))
        .collect();
    if !violations.is_empty() {
        return Err(MutationError::Schema(violations));
    }
    Ok(next)
}

fn resolve_ref(tree: &MemoryTree, version: &NodeId, r: &NodeRef) -> Result<NodeId, MutationError> {
    match r {
        NodeRef::Id(id) => {
            if tree.is_ancestor_or_self(version, id) {
                Ok(id.clone())
            } else {
                Err(MutationError::OutsideSourceVersion(id.clone()))
            }
        }
        NodeRef::Path { path } => resolve_path(tree, version, path),
    }
}

fn resolve_path(tree: &MemoryTree, version: &NodeId, path: &str) -> Result<NodeId, MutationError> {
    let bad = |reason: String| MutationError::BadPath {
        path: path.to_string(),
        reason,
    };
    let mut cur = version.clone();
    for seg in path.split('/').map(str::trim).filter(|s| !s.is_empty() && *s != ".") {
        let (ty, index) = match seg.split_once('[') {
            Some((ty, rest)) => {
                let n = rest
                    .strip_suffix(']')
                    .and_then(|n| n.trim().parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| bad(format!("bad index in `{seg}`")))?;
                (ty.trim(), n)
            }
            None => (seg, 1),
        };
        let next = tree
            .children(&cur)
            .expect("resolved ids exist")
            .iter()
            .filter(|c| tree.node(c).is_ok_and(|n| n.node_type == ty))
            .nth(index - 1)
            .cloned()
            .ok_or_else(|| bad(format!("no {ty}[{index}] under `{cur}`")))?;
        cur = next;
    }
    Ok(cur)
}

/// Deterministic id allocation: a function of the tree contents only, so
/// replaying the same mutations on the same document yields the same ids.
struct IdAllocator {
    taken: HashSet<NodeId>,
    next: u64,
}

impl IdAllocator {
    fn new(tree: &MemoryTree) -> Self {
        let taken: HashSet<NodeId> = tree.nodes_map().keys().cloned().collect();
        let next = taken
            .iter()
            .filter_map(|id| id.as_str().strip_prefix('n')?.parse::<u64>().ok())
            .max()
            .map_or(1, |m| m + 1);
        IdAllocator { taken, next }
    }

    fn reserve_explicit(&mut self, node: &NewNode) -> Result<(), MutationError> {
        if let Some(id) = &node.id {
            if !self.taken.insert(id.clone()) {
                return Err(MutationError::DuplicateId(id.clone()));
            }
        }
        node.children.iter().try_for_each(|c| self.reserve_explicit(c))
    }

    fn version_id(&mut self, mut k: usize) -> NodeId {
        loop {
            let id = NodeId::new(format!("v{k}"));
            if self.taken.insert(id.clone()) {
                return id;
            }
            k += 1;
        }
    }

    fn fresh(&mut self) -> NodeId {
        loop {
            let id = NodeId::new(format!("n{}", self.next));
            self.next += 1;
            if self.taken.insert(id.clone()) {
                return id;
            }
        }
    }
}

struct Copier<'a> {
    tree: &'a MemoryTree,
    deleted: &'a HashSet<NodeId>,
    insert: Option<(NodeId, &'a NewNode, Option<usize>)>,
    ids: &'a mut IdAllocator,
    out: &'a mut HashMap<NodeId, Arc<Node>>,
}

impl Copier<'_> {
    fn copy(&mut self, old: &NodeId, id: Option<NodeId>, summary: Option<&str>) -> NodeId {
        let src = self.tree.node(old).expect("copied ids exist");
        let id = id.unwrap_or_else(|| self.ids.fresh());
        let mut attributes = src.attributes.clone();
        if let Some(summary) = summary {
            attributes.insert(SUMMARY_ATTRIBUTE.to_string(), summary.to_string());
        }
        let mut children = Vec::with_capacity(src.children.len() + 1);
        for child in &src.children {
            if !self.deleted.contains(child) {
                children.push(self.copy(child, None, None));
            }
        }
        if let Some((parent, node, position)) = self.insert.clone() {
            if &parent == old {
                let new_id = self.place(node);
                let at = position.unwrap_or(children.len()).min(children.len());
                children.insert(at, new_id);
            }
        }
        self.out.insert(
            id.clone(),
            Arc::new(Node {
                id: id.clone(),
                node_type: src.node_type.clone(),
                attributes,
                children,
            }),
        );
        id
    }

    fn place(&mut self, node: &NewNode) -> NodeId {
        let id = node.id.clone().unwrap_or_else(|| self.ids.fresh());
        let children = node.children.iter().map(|c| self.place(c)).collect();
        self.out.insert(
            id.clone(),
            Arc::new(Node {
                id: id.clone(),
                node_type: node.node_type.clone(),
                attributes: node.attributes.clone(),
                children,
            }),
        );
        id
    }
}
