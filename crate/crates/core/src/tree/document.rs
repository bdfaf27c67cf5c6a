//! JSON memory documents.
//!
//! ```json
//! {"schema": {"nodeTypes": [...], "allowedChildren": {...}, "allowedAttributes": {...}},
//!  "root": {"id": "...", "type": "...", "attributes": {...}, "children": [...]}}
//! ```
//!
//! Attribute key order in the file is the stored order.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{validate_schema, MemoryTree, Node, NodeId, Schema, TreeError, Violation};

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("malformed memory document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("schema violation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Schema(Vec<Violation>),
}

#[derive(Serialize, Deserialize)]
struct DocumentFile {
    schema: Schema,
    root: NodeDoc,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: NodeId,
    #[serde(rename = "type")]
    node_type: String,
    #[serde(default)]
    attributes: IndexMap<String, String>,
    #[serde(default)]
    children: Vec<NodeDoc>,
}

/// Parses a memory document and checks it against its schema.
pub fn load_memory(document: &str) -> Result<MemoryTree, DocumentError> {
    let tree = parse_document(document)?;
    let violations = validate_schema(&tree);
    if violations.is_empty() {
        Ok(tree)
    } else {
        Err(DocumentError::Schema(violations))
    }
}

/// Parses a memory document checking only tree shape, not the schema.
pub fn parse_document(document: &str) -> Result<MemoryTree, DocumentError> {
    let file: DocumentFile = serde_json::from_str(document)?;
    let mut nodes = HashMap::new();
    let root = file.root.id.clone();
    let mut stack = vec![file.root];
    while let Some(doc) = stack.pop() {
        let children = doc.children.iter().map(|c| c.id.clone()).collect();
        let node = Node {
            id: doc.id.clone(),
            node_type: doc.node_type,
            attributes: doc.attributes,
            children,
        };
        if nodes.insert(doc.id.clone(), Arc::new(node)).is_some() {
            return Err(TreeError::DuplicateId(doc.id).into());
        }
        stack.extend(doc.children);
    }
    Ok(MemoryTree::from_parts(
        Arc::new(file.schema),
        root,
        nodes,
        0,
    )?)
}

fn node_doc(tree: &MemoryTree, id: &NodeId) -> NodeDoc {
    let node = tree.node(id).expect("id from tree");
    NodeDoc {
        id: node.id.clone(),
        node_type: node.node_type.clone(),
        attributes: node.attributes.clone(),
        children: node.children.iter().map(|c| node_doc(tree, c)).collect(),
    }
}

fn document_file(tree: &MemoryTree) -> DocumentFile {
    DocumentFile {
        schema: tree.schema().clone(),
        root: node_doc(tree, tree.root_id()),
    }
}

/// Renders `tree` as a pretty-printed memory document.
pub fn to_document(tree: &MemoryTree) -> String {
    let mut out = serde_json::to_string_pretty(&document_file(tree)).expect("serializable");
    out.push('\n');
    out
}

pub fn to_document_value(tree: &MemoryTree) -> serde_json::Value {
    serde_json::to_value(document_file(tree)).expect("serializable")
}
