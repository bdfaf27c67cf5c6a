use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use super::{MemoryTree, NodeId};

/// Node types, permitted parent/child pairs and permitted attribute names
/// for one family of memory trees. The first node type is the root type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct Schema {
    node_types: Vec<String>,
    allowed_children: IndexMap<String, IndexSet<String>>,
    allowed_attributes: IndexMap<String, IndexSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("schema declares no node types")]
    Empty,
    #[error("node type `{0}` is declared twice")]
    DuplicateType(String),
    #[error("`{referenced}` is referenced in {field} but is not a declared node type")]
    UndeclaredType { field: &'static str, referenced: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SchemaDoc {
    node_types: Vec<String>,
    #[serde(default)]
    allowed_children: IndexMap<String, Vec<String>>,
    #[serde(default)]
    allowed_attributes: IndexMap<String, Vec<String>>,
}

impl TryFrom<SchemaDoc> for Schema {
    type Error = SchemaError;

    fn try_from(doc: SchemaDoc) -> Result<Self, Self::Error> {
        let collect = |m: IndexMap<String, Vec<String>>| {
            m.into_iter()
                .map(|(k, v)| (k, v.into_iter().collect::<IndexSet<_>>()))
                .collect::<IndexMap<_, _>>()
        };
        Schema::new(
            doc.node_types,
            collect(doc.allowed_children),
            collect(doc.allowed_attributes),
        )
    }
}

impl From<Schema> for SchemaDoc {
    fn from(s: Schema) -> Self {
        let flatten = |m: IndexMap<String, IndexSet<String>>| {
            m.into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect()
        };
        SchemaDoc {
            node_types: s.node_types,
            allowed_children: flatten(s.allowed_children),
            allowed_attributes: flatten(s.allowed_attributes),
        }
    }
}

impl Schema {
    pub fn new(
        node_types: Vec<String>,
        allowed_children: IndexMap<String, IndexSet<String>>,
        allowed_attributes: IndexMap<String, IndexSet<String>>,
    ) -> Result<Self, SchemaError> {
        if node_types.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut seen = IndexSet::new();
        for t in &node_types {
            if !seen.insert(t.as_str()) {
                return Err(SchemaError::DuplicateType(t.clone()));
            }
        }
        for (parent, kids) in &allowed_children {
            for t in std::iter::once(parent).chain(kids) {
                if !seen.contains(t.as_str()) {
                    return Err(SchemaError::UndeclaredType {
                        field: "allowedChildren",
                        referenced: t.clone(),
                    });
                }
            }
        }
        for ty in allowed_attributes.keys() {
            if !seen.contains(ty.as_str()) {
                return Err(SchemaError::UndeclaredType {
                    field: "allowedAttributes",
                    referenced: ty.clone(),
                });
            }
        }
        Ok(Schema {
            node_types,
            allowed_children,
            allowed_attributes,
        })
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn root_type(&self) -> &str {
        &self.node_types[0]
    }

    pub fn has_type(&self, ty: &str) -> bool {
        self.node_types.iter().any(|t| t == ty)
    }

    pub fn allows_child(&self, parent: &str, child: &str) -> bool {
        self.allowed_children
            .get(parent)
            .is_some_and(|kids| kids.contains(child))
    }

    pub fn allows_attribute(&self, ty: &str, attr: &str) -> bool {
        self.allowed_attributes
            .get(ty)
            .is_some_and(|attrs| attrs.contains(attr))
    }
}

/// The rule a node breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "camelCase")]
pub enum Rule {
    UnknownType { node_type: String },
    RootType { expected: String, found: String },
    AttributeNotAllowed { node_type: String, attribute: String },
    ChildNotAllowed { parent_type: String, child_type: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: NodeId,
    #[serde(flatten)]
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            Rule::UnknownType { node_type } => {
                write!(f, "node `{}`: unknown node type `{node_type}`", self.node)
            }
            Rule::RootType { expected, found } => write!(
                f,
                "node `{}`: root must have type `{expected}`, found `{found}`",
                self.node
            ),
            Rule::AttributeNotAllowed {
                node_type,
                attribute,
            } => write!(
                f,
                "node `{}`: attribute `{attribute}` is not allowed on `{node_type}`",
                self.node
            ),
            Rule::ChildNotAllowed {
                parent_type,
                child_type,
            } => write!(
                f,
                "node `{}`: `{child_type}` may not be a child of `{parent_type}`",
                self.node
            ),
        }
    }
}

/// Checks every node of `tree` against its schema, in document order.
/// An empty result means the tree is valid.
pub fn validate_schema(tree: &MemoryTree) -> Vec<Violation> {
    let schema = tree.schema();
    let mut out = Vec::new();
    let root = tree.node(tree.root_id()).expect("root exists");
    if root.node_type != schema.root_type() {
        out.push(Violation {
            node: root.id.clone(),
            rule: Rule::RootType {
                expected: schema.root_type().to_string(),
                found: root.node_type.clone(),
            },
        });
    }
    for id in tree.document_order() {
        let node = tree.node(id).expect("ordered ids exist");
        out.extend(node_violations(schema, node, tree));
    }
    out
}

fn node_violations<'a>(
    schema: &'a Schema,
    node: &'a super::Node,
    tree: &'a MemoryTree,
) -> impl Iterator<Item = Violation> + 'a {
    let ty = node.node_type.as_str();
    let unknown = (!schema.has_type(ty)).then(|| Violation {
        node: node.id.clone(),
        rule: Rule::UnknownType {
            node_type: ty.to_string(),
        },
    });
    let attrs = node
        .attributes
        .keys()
        .filter(move |a| schema.has_type(ty) && !schema.allows_attribute(ty, a))
        .map(move |a| Violation {
            node: node.id.clone(),
            rule: Rule::AttributeNotAllowed {
                node_type: ty.to_string(),
                attribute: a.clone(),
            },
        });
    let kids = node.children.iter().filter_map(move |cid| {
        let child = tree.node(cid).ok()?;
        (schema.has_type(ty)
            && schema.has_type(&child.node_type)
            && !schema.allows_child(ty, &child.node_type))
        .then(|| Violation {
            node: child.id.clone(),
            rule: Rule::ChildNotAllowed {
                parent_type: ty.to_string(),
                child_type: child.node_type.clone(),
            },
        })
    });
    unknown.into_iter().chain(attrs).chain(kids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> IndexSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_undeclared_child_type() {
        let mut kids = IndexMap::new();
        kids.insert("A".to_string(), set(&["B"]));
        let err = Schema::new(vec!["A".into()], kids, IndexMap::new()).unwrap_err();
        assert_eq!(
            err,
            SchemaError::UndeclaredType {
                field: "allowedChildren",
                referenced: "B".into()
            }
        );
    }

    #[test]
    fn rejects_empty_schema() {
        assert_eq!(
            Schema::new(vec![], IndexMap::new(), IndexMap::new()).unwrap_err(),
            SchemaError::Empty
        );
    }

    #[test]
    fn first_type_is_root() {
        let s = Schema::new(
            vec!["Root".into(), "Leaf".into()],
            IndexMap::new(),
            IndexMap::new(),
        )
        .unwrap();
        assert_eq!(s.root_type(), "Root");
        assert!(!s.allows_child("Root", "Leaf"));
    }
}
