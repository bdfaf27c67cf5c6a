//! Flat retrieval over per-node text items, ignoring the tree structure.

use serde::Serialize;

use crate::scorer::{Scorer, ScorerError};
use crate::tree::{MemoryTree, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FlatItem {
    pub node_id: NodeId,
    /// What gets scored: the node's own text, no ancestor context.
    pub text: String,
    /// Ancestor texts joined by `/`, for display only.
    pub path_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FlatHit {
    pub node_id: NodeId,
    pub score: f64,
    pub text: String,
}

/// One item per node, in document order.
pub fn flatten(tree: &MemoryTree) -> Vec<FlatItem> {
    tree.document_order()
        .iter()
        .map(|id| {
            let path = tree.path(id).expect("id from document order");
            let ancestors: Vec<String> = path[..path.len() - 1]
                .iter()
                .map(|a| tree.node_text(a).expect("ancestor exists"))
                .collect();
            FlatItem {
                node_id: id.clone(),
                text: tree.node_text(id).expect("id from document order"),
                path_text: ancestors.join("/"),
            }
        })
        .collect()
}

/// Top `k` items by score against `request`; ties keep document order.
pub fn flat_retrieve(
    items: &[FlatItem],
    request: &str,
    k: usize,
    scorer: &dyn Scorer,
) -> Result<Vec<FlatHit>, ScorerError> {
    let mut hits = items
        .iter()
        .map(|item| {
            Ok(FlatHit {
                node_id: item.node_id.clone(),
                score: scorer.score(&item.text, request)?.value(),
                text: item.text.clone(),
            })
        })
        .collect::<Result<Vec<_>, ScorerError>>()?;
    hits.sort_by(|a, b| b.score.total_cmp(&a.score));
    hits.truncate(k);
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::LexicalScorer;
    use crate::tree::load_memory;

    fn acl() -> MemoryTree {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/acl_trip.json");
        load_memory(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn one_item_per_node_in_document_order() {
        let tree = acl();
        let items = flatten(&tree);
        assert_eq!(items.len(), tree.len());
        let ids: Vec<_> = items.iter().map(|i| i.node_id.clone()).collect();
        assert_eq!(ids, tree.document_order());
        assert_eq!(items[0].path_text, "");
        let poi = items.iter().find(|i| i.node_id.as_str() == "poi-2-2").unwrap();
        assert_eq!(poi.text, "POI conference poster session 13:30");
        assert!(poi.path_text.starts_with("Itinerary ACL 2026 trip San Diego/Version initial plan/Day 2"));
    }

    #[test]
    fn identical_texts_lose_their_context() {
        let tree = load_memory(
            r#"{"schema": {"nodeTypes": ["T", "D", "P"],
                "allowedChildren": {"T": ["D"], "D": ["P"], "P": []},
                "allowedAttributes": {"T": [], "D": ["n"], "P": ["title"]}},
               "root": {"id": "t", "type": "T", "attributes": {}, "children": [
                 {"id": "d1", "type": "D", "attributes": {"n": "1"}, "children": [
                   {"id": "p1", "type": "P", "attributes": {"title": "hike"}, "children": []}]},
                 {"id": "d2", "type": "D", "attributes": {"n": "2"}, "children": [
                   {"id": "p2", "type": "P", "attributes": {"title": "hike"}, "children": []}]}]}}"#,
        )
        .unwrap();
        let items = flatten(&tree);
        assert_eq!(items[2].text, items[4].text);
        assert_ne!(items[2].path_text, items[4].path_text);
    }

    #[test]
    fn no_overlap_returns_document_order_prefix() {
        let tree = acl();
        let items = flatten(&tree);
        let hits = flat_retrieve(&items, "zebra", 3, &LexicalScorer).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.node_id.clone()).collect();
        assert_eq!(ids, &tree.document_order()[..3]);
        assert!(hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn k_beyond_item_count_returns_everything() {
        let tree = acl();
        let items = flatten(&tree);
        assert_eq!(flat_retrieve(&items, "conference", 100, &LexicalScorer).unwrap().len(), items.len());
    }

    #[test]
    fn prefix_consistent() {
        let tree = acl();
        let items = flatten(&tree);
        let all = flat_retrieve(&items, "conference poster day", items.len(), &LexicalScorer).unwrap();
        for k in 1..items.len() {
            assert_eq!(flat_retrieve(&items, "conference poster day", k, &LexicalScorer).unwrap(), all[..k]);
        }
        assert_eq!(all[0].node_id.as_str(), "poi-2-2");
    }
}
