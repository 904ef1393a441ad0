//! Reassemble a selected path set into a multiway-split decision tree whose
//! leaves are the clusters, assign cluster labels, and render the tree as
//! text or DOT.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureScale, LabelVector, UNASSIGNED};
use crate::discretize::Interval;
use crate::graph::{Condition, Path};

/// One leaf: the conjunction of conditions of its originating path.
#[derive(Debug, Clone)]
pub struct LeafRule {
    pub cluster_id: usize,
    pub conditions: Vec<Condition>,
    pub n_covered: usize,
}

/// Tree structure: internal nodes branch on one feature; an edge carries
/// either an interval condition or `None` for "any value" where the leaf's
/// path skips that feature.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        cluster: usize,
        n: usize,
    },
    Node {
        feature: usize,
        edges: Vec<EdgeChild>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeChild {
    /// `None` is the "any value" edge.
    pub edge: Option<Interval>,
    pub child: TreeNode,
}

#[derive(Debug, Clone)]
pub struct MultiwayTree {
    pub root: TreeNode,
    pub leaves: Vec<LeafRule>,
    pub depth: usize,
}

/// Build the trie over the layer-ordered condition sequences of the selected
/// paths. Leaves are numbered by path order. Features that no path in a
/// subtree conditions on are compressed out of that subtree.
pub fn reconstruct(selected: &[Path], n_features: usize) -> MultiwayTree {
    let leaves: Vec<LeafRule> = selected
        .iter()
        .enumerate()
        .map(|(id, path)| LeafRule {
            cluster_id: id,
            conditions: path.conditions.clone(),
            n_covered: path.n_covered,
        })
        .collect();
    let depth = leaves.iter().map(|l| l.conditions.len()).max().unwrap_or(0);

    fn condition_on(leaf: &LeafRule, feature: usize) -> Option<Interval> {
        leaf.conditions
            .iter()
            .find(|c| c.feature == feature)
            .map(|c| c.interval)
    }

    fn build(group: &[usize], leaves: &[LeafRule], from_feature: usize, n_features: usize) -> TreeNode {
        // next feature some path in this group conditions on
        let feature = (from_feature..n_features)
            .find(|&f| group.iter().any(|&id| condition_on(&leaves[id], f).is_some()));
        let Some(feature) = feature else {
            debug_assert_eq!(group.len(), 1, "disjoint paths cannot share a full condition set");
            let leaf = &leaves[group[0]];
            return TreeNode::Leaf {
                cluster: leaf.cluster_id,
                n: leaf.n_covered,
            };
        };

        // partition the group by its edge at this feature; intervals ordered
        // by bounds, the "any" edge last
        let mut interval_groups: Vec<(Interval, Vec<usize>)> = Vec::new();
        let mut any_group: Vec<usize> = Vec::new();
        for &id in group {
            match condition_on(&leaves[id], feature) {
                Some(interval) => {
                    match interval_groups.iter_mut().find(|(iv, _)| *iv == interval) {
                        Some((_, ids)) => ids.push(id),
                        None => interval_groups.push((interval, vec![id])),
                    }
                }
                None => any_group.push(id),
            }
        }
        interval_groups.sort_by(|(a, _), (b, _)| {
            a.lower
                .partial_cmp(&b.lower)
                .unwrap()
                .then(a.upper.partial_cmp(&b.upper).unwrap())
        });

        let mut edges: Vec<EdgeChild> = interval_groups
            .into_iter()
            .map(|(interval, ids)| EdgeChild {
                edge: Some(interval),
                child: build(&ids, leaves, feature + 1, n_features),
            })
            .collect();
        if !any_group.is_empty() {
            edges.push(EdgeChild {
                edge: None,
                child: build(&any_group, leaves, feature + 1, n_features),
            });
        }
        TreeNode::Node { feature, edges }
    }

    let group: Vec<usize> = (0..leaves.len()).collect();
    let root = if group.is_empty() {
        TreeNode::Node {
            feature: 0,
            edges: Vec::new(),
        }
    } else {
        build(&group, &leaves, 0, n_features)
    };
    MultiwayTree { root, leaves, depth }
}

/// Label each point with the unique leaf whose conditions it satisfies, or
/// the reserved unassigned id when no leaf covers it (possible when the
/// coverage requirement is below 1).
pub fn assign(tree: &MultiwayTree, dataset: &Dataset) -> LabelVector {
    let labels = (0..dataset.n_points())
        .map(|i| {
            let row = dataset.row(i);
            tree.leaves
                .iter()
                .find(|leaf| leaf.conditions.iter().all(|c| c.matches(row)))
                .map_or(UNASSIGNED, |leaf| leaf.cluster_id as i64)
        })
        .collect();
    LabelVector::new(labels)
}

fn display_bound(x: f64, feature: usize, scales: Option<&[FeatureScale]>) -> String {
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    if x == f64::INFINITY {
        return "+inf".into();
    }
    let v = match scales {
        Some(s) => s[feature].denormalize(x),
        None => x,
    };
    format!("{v}")
}

fn display_interval(iv: &Interval, feature: usize, scales: Option<&[FeatureScale]>) -> String {
    let open = if iv.lower == f64::NEG_INFINITY { "(" } else { "[" };
    format!(
        "{open}{}, {})",
        display_bound(iv.lower, feature, scales),
        display_bound(iv.upper, feature, scales)
    )
}

/// Indented rule listing. Interval bounds are mapped back to the original
/// units when the per-column scales are available.
pub fn render_text(
    tree: &MultiwayTree,
    feature_names: &[String],
    scales: Option<&[FeatureScale]>,
) -> String {
    fn walk(
        node: &TreeNode,
        names: &[String],
        scales: Option<&[FeatureScale]>,
        indent: usize,
        out: &mut String,
    ) {
        if let TreeNode::Node { feature, edges } = node {
            for ec in edges {
                let label = match &ec.edge {
                    Some(iv) => format!("{} in {}", names[*feature], display_interval(iv, *feature, scales)),
                    None => format!("{}: any", names[*feature]),
                };
                let pad = "  ".repeat(indent);
                match &ec.child {
                    TreeNode::Leaf { cluster, n } => {
                        out.push_str(&format!("{pad}{label} -> cluster {cluster} ({n} points)\n"));
                    }
                    child => {
                        out.push_str(&format!("{pad}{label}\n"));
                        walk(child, names, scales, indent + 1, out);
                    }
                }
            }
        }
    }
    let mut out = format!(
        "{} clusters, depth {}\n",
        tree.leaves.len(),
        tree.depth
    );
    match &tree.root {
        TreeNode::Leaf { cluster, n } => {
            out.push_str(&format!("cluster {cluster} ({n} points)\n"));
        }
        node => walk(node, feature_names, scales, 0, &mut out),
    }
    out
}

/// DOT graph with condition nodes labeled "feature: [a, b)" and leaves
/// labeled "cluster k\nn=...".
pub fn render_dot(
    tree: &MultiwayTree,
    feature_names: &[String],
    scales: Option<&[FeatureScale]>,
) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box];\n  n0 [label=\"root\"];\n");
    let mut next_id = 1usize;

    fn walk(
        node: &TreeNode,
        parent: usize,
        names: &[String],
        scales: Option<&[FeatureScale]>,
        next_id: &mut usize,
        out: &mut String,
    ) {
        match node {
            TreeNode::Leaf { cluster, n } => {
                let id = *next_id;
                *next_id += 1;
                out.push_str(&format!("  n{id} [label=\"cluster {cluster}\\nn={n}\"];\n"));
                out.push_str(&format!("  n{parent} -> n{id};\n"));
            }
            TreeNode::Node { feature, edges } => {
                for ec in edges {
                    let id = *next_id;
                    *next_id += 1;
                    let label = match &ec.edge {
                        Some(iv) => {
                            format!("{}: {}", names[*feature], display_interval(iv, *feature, scales))
                        }
                        None => format!("{}: any", names[*feature]),
                    };
                    out.push_str(&format!("  n{id} [label=\"{label}\"];\n"));
                    out.push_str(&format!("  n{parent} -> n{id};\n"));
                    walk(&ec.child, id, names, scales, next_id, out);
                }
            }
        }
    }

    walk(&tree.root, 0, feature_names, scales, &mut next_id, &mut out);
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Path;
    use crate::mask::CoverageMask;

    fn path(conds: &[(usize, f64, f64)], covered: &[usize], n: usize) -> Path {
        let mut mask = CoverageMask::empty(n);
        for &i in covered {
            mask.set(i);
        }
        Path {
            conditions: conds
                .iter()
                .map(|&(feature, lo, hi)| Condition {
                    feature,
                    interval: Interval::new(lo, hi),
                })
                .collect(),
            n_covered: mask.count(),
            coverage: mask,
            cost: 0.0,
        }
    }

    const INF: f64 = f64::INFINITY;
    const NEG: f64 = f64::NEG_INFINITY;

    #[test]
    fn three_bins_of_one_feature_make_depth_one_tree() {
        let selected = vec![
            path(&[(0, NEG, 0.3)], &[0], 3),
            path(&[(0, 0.3, 0.7)], &[1], 3),
            path(&[(0, 0.7, INF)], &[2], 3),
        ];
        let tree = reconstruct(&selected, 2);
        assert_eq!(tree.depth, 1);
        assert_eq!(tree.leaves.len(), 3);
        match &tree.root {
            TreeNode::Node { feature, edges } => {
                assert_eq!(*feature, 0);
                assert_eq!(edges.len(), 3);
                for (i, ec) in edges.iter().enumerate() {
                    assert!(matches!(ec.child, TreeNode::Leaf { cluster, .. } if cluster == i));
                }
            }
            other => panic!("expected internal root, got {other:?}"),
        }
    }

    #[test]
    fn single_path_single_condition() {
        let selected = vec![path(&[(1, 0.5, INF)], &[0, 1], 4)];
        let tree = reconstruct(&selected, 3);
        assert_eq!(tree.depth, 1);
        let ds = Dataset::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[
                vec![0.0, 0.9, 0.0],
                vec![0.0, 0.6, 0.0],
                vec![0.0, 0.1, 0.0],
                vec![0.0, 0.2, 0.0],
            ],
        );
        let labels = assign(&tree, &ds);
        // the implicit remainder stays unassigned
        assert_eq!(labels.labels, vec![0, 0, UNASSIGNED, UNASSIGNED]);
    }

    #[test]
    fn disjoint_features_use_any_edges() {
        let selected = vec![
            path(&[(0, NEG, 0.5)], &[0], 2),
            path(&[(1, NEG, 0.5)], &[1], 2),
        ];
        let tree = reconstruct(&selected, 2);
        assert_eq!(tree.depth, 1);
        match &tree.root {
            TreeNode::Node { feature, edges } => {
                assert_eq!(*feature, 0);
                assert_eq!(edges.len(), 2);
                assert!(edges[0].edge.is_some());
                assert!(edges[1].edge.is_none(), "second edge must be the any edge");
                match &edges[1].child {
                    TreeNode::Node { feature, edges } => {
                        assert_eq!(*feature, 1);
                        assert_eq!(edges.len(), 1);
                    }
                    other => panic!("expected inner node under any edge, got {other:?}"),
                }
            }
            other => panic!("expected internal root, got {other:?}"),
        }
    }

    #[test]
    fn assign_reproduces_coverage_masks() {
        let rows = vec![
            vec![0.1, 0.9],
            vec![0.2, 0.8],
            vec![0.9, 0.2],
            vec![0.8, 0.6],
        ];
        let ds = Dataset::from_rows(vec!["a".into(), "b".into()], &rows);
        let selected = vec![
            path(&[(0, NEG, 0.5)], &[0, 1], 4),
            path(&[(0, 0.5, INF), (1, NEG, 0.5)], &[2], 4),
            path(&[(0, 0.5, INF), (1, 0.5, INF)], &[3], 4),
        ];
        let tree = reconstruct(&selected, 2);
        assert_eq!(tree.depth, 2);
        let labels = assign(&tree, &ds);
        for (id, p) in selected.iter().enumerate() {
            for i in 0..4 {
                assert_eq!(p.coverage.contains(i), labels.labels[i] == id as i64);
            }
        }
    }

    #[test]
    fn depth_equals_max_condition_count() {
        let selected = vec![
            path(&[(0, NEG, 0.5)], &[0], 2),
            path(&[(0, 0.5, INF), (1, NEG, 0.5), (2, NEG, 0.5)], &[1], 2),
        ];
        assert_eq!(reconstruct(&selected, 3).depth, 3);
    }

    #[test]
    fn text_render_lists_one_rule_per_leaf() {
        let selected = vec![
            path(&[(0, NEG, 0.3)], &[0], 3),
            path(&[(0, 0.3, 0.7)], &[1], 3),
            path(&[(0, 0.7, INF)], &[2], 3),
        ];
        let tree = reconstruct(&selected, 1);
        let text = render_text(&tree, &["area".into()], None);
        let rule_lines: Vec<&str> = text.lines().filter(|l| l.contains("-> cluster")).collect();
        assert_eq!(rule_lines.len(), 3);
        assert!(rule_lines[0].contains("area in (-inf, 0.3) -> cluster 0 (1 points)"));
    }

    #[test]
    fn text_render_denormalizes_bounds() {
        let selected = vec![path(&[(0, 0.5, INF)], &[0], 1)];
        let tree = reconstruct(&selected, 1);
        let scales = vec![FeatureScale { min: 10.0, max: 30.0 }];
        let text = render_text(&tree, &["width".into()], Some(&scales));
        assert!(text.contains("[20, +inf)"), "got: {text}");
    }

    #[test]
    fn dot_render_is_structurally_valid() {
        let selected = vec![
            path(&[(0, NEG, 0.5)], &[0], 2),
            path(&[(1, NEG, 0.5)], &[1], 2),
        ];
        let tree = reconstruct(&selected, 2);
        let dot = render_dot(&tree, &["a".into(), "b".into()], None);
        assert!(dot.starts_with("digraph tree {"));
        assert!(dot.trim_end().ends_with('}'));
        assert_eq!(dot.matches('{').count(), dot.matches('}').count());
        // every edge references a declared node
        let declared: Vec<String> = dot
            .lines()
            .filter(|l| l.contains("[label="))
            .map(|l| l.trim().split_whitespace().next().unwrap().to_string())
            .collect();
        for line in dot.lines().filter(|l| l.contains("->")) {
            let parts: Vec<&str> = line.trim().trim_end_matches(';').split("->").collect();
            assert_eq!(parts.len(), 2);
            for part in parts {
                assert!(declared.contains(&part.trim().to_string()), "undeclared node in {line}");
            }
        }
        assert!(dot.contains("cluster 0\\nn=1"));
    }

    #[test]
    fn tree_json_round_trip() {
        let selected = vec![
            path(&[(0, NEG, 0.5), (1, 0.5, INF)], &[0], 2),
            path(&[(0, 0.5, INF)], &[1], 2),
        ];
        let tree = reconstruct(&selected, 2);
        let json = serde_json::to_string(&tree.root).unwrap();
        let back: TreeNode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree.root);
    }
}
