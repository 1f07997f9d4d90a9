//! The fairness-aware Hoeffding tree for stationary streams.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::criteria::{ClassDist, ConfigError, CriterionConfig};
use crate::fairness::GroupCounts;
use crate::split::{attempt_split, LeafStats, SplitTest};
use crate::stream::{Instance, Schema};

/// First line of every tree dump.
pub const DUMP_MAGIC: &str = "fairstream-tree";
pub const DUMP_VERSION: u32 = 1;
/// Column header of a tree dump.
pub const DUMP_HEADER: &str = "path\tnode\ttest\tclass_dist\tgroup_counts";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("instance {arrival_index} does not conform to the schema")]
    SchemaMismatch { arrival_index: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub positive_probability: f64,
}

impl Prediction {
    /// Laplace-smoothed (α = 1) prediction from a class distribution; ties
    /// go to the negative label.
    pub fn from_dist(dist: &ClassDist, schema: &Schema) -> Self {
        let pos = schema.class.positive;
        let p = (dist.counts[pos] + 1.0) / (dist.total() + 2.0);
        let label = if p > 0.5 { pos } else { schema.class.negative() };
        Prediction {
            label,
            positive_probability: p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Complexity {
    pub node_count: usize,
    pub leaf_count: usize,
    pub depth: usize,
}

/// Anything that can be evaluated prequentially.
pub trait Learner {
    fn schema(&self) -> &Schema;
    fn predict(&self, instance: &Instance) -> Prediction;
    fn train(&mut self, instance: &Instance) -> Result<(), ModelError>;
    fn complexity(&self) -> Complexity;
    /// Stored statistic cells across the whole model.
    fn counter_cells(&self) -> usize;
    /// Live fairness weight, for learners that adapt it.
    fn gamma(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(LeafStats),
    Internal {
        test: SplitTest,
        children: Vec<Node>,
        class_dist_at_split: ClassDist,
        groups_at_split: GroupCounts,
    },
}

impl Node {
    fn complexity(&self) -> Complexity {
        match self {
            Node::Leaf(_) => Complexity {
                node_count: 1,
                leaf_count: 1,
                depth: 0,
            },
            Node::Internal { children, .. } => {
                let mut c = Complexity {
                    node_count: 1,
                    ..Default::default()
                };
                for child in children {
                    let sub = child.complexity();
                    c.node_count += sub.node_count;
                    c.leaf_count += sub.leaf_count;
                    c.depth = c.depth.max(sub.depth + 1);
                }
                c
            }
        }
    }

    fn counter_cells(&self) -> usize {
        match self {
            Node::Leaf(stats) => stats.counter_cells(),
            Node::Internal { children, .. } => children.iter().map(Node::counter_cells).sum(),
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a LeafStats>) {
        match self {
            Node::Leaf(stats) => out.push(stats),
            Node::Internal { children, .. } => children.iter().for_each(|c| c.leaves(out)),
        }
    }
}

pub(crate) fn split_leaf(stats: &LeafStats, test: SplitTest, schema: &Schema) -> Node {
    let children = (0..test.branches()).map(|_| Node::Leaf(LeafStats::new(schema))).collect();
    Node::Internal {
        test,
        children,
        class_dist_at_split: stats.class_dist,
        groups_at_split: stats.groups,
    }
}

pub(crate) fn format_dist(d: &ClassDist) -> String {
    format!("{};{}", d.counts[0], d.counts[1])
}

pub(crate) fn format_groups(g: &GroupCounts) -> String {
    format!(
        "{};{};{};{}",
        g.deprived_pos, g.deprived_neg, g.favored_pos, g.favored_neg
    )
}

/// FAHT (criterion FIG), or a vanilla Hoeffding tree with criterion IG.
#[derive(Debug, Clone)]
pub struct FahtModel {
    root: Node,
    config: CriterionConfig,
    schema: Arc<Schema>,
    seen: u64,
}

impl FahtModel {
    pub fn new(schema: Arc<Schema>, config: CriterionConfig) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(FahtModel {
            root: Node::Leaf(LeafStats::new(&schema)),
            config,
            schema,
            seen: 0,
        })
    }

    pub fn config(&self) -> &CriterionConfig {
        &self.config
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Statistics of every leaf, left to right.
    pub fn leaves(&self) -> Vec<&LeafStats> {
        let mut out = Vec::new();
        self.root.leaves(&mut out);
        out
    }

    /// Versioned tab-separated dump, one node per line in depth-first order.
    pub fn dump(&self) -> String {
        let mut out = format!("{DUMP_MAGIC}\t{DUMP_VERSION}\t{}\n{DUMP_HEADER}\n", self.config.kind.name());
        dump_node(&self.root, "r", &self.schema, &mut out);
        out
    }
}

fn dump_node(node: &Node, path: &str, schema: &Schema, out: &mut String) {
    match node {
        Node::Leaf(stats) => {
            let _ = writeln!(
                out,
                "{path}\tleaf\t-\t{}\t{}",
                format_dist(&stats.class_dist),
                format_groups(&stats.groups)
            );
        }
        Node::Internal {
            test,
            children,
            class_dist_at_split,
            groups_at_split,
        } => {
            let _ = writeln!(
                out,
                "{path}\tsplit\t{}\t{}\t{}",
                test.describe(schema),
                format_dist(class_dist_at_split),
                format_groups(groups_at_split)
            );
            for (i, child) in children.iter().enumerate() {
                dump_node(child, &format!("{path}/{i}"), schema, out);
            }
        }
    }
}

impl Learner for FahtModel {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn predict(&self, instance: &Instance) -> Prediction {
        let mut node = &self.root;
        let mut fallback: Option<&ClassDist> = None;
        loop {
            match node {
                Node::Leaf(stats) => {
                    let dist = match fallback {
                        Some(parent) if stats.class_dist.total() == 0.0 => parent,
                        _ => &stats.class_dist,
                    };
                    return Prediction::from_dist(dist, &self.schema);
                }
                Node::Internal {
                    test,
                    children,
                    class_dist_at_split,
                    ..
                } => {
                    fallback = Some(class_dist_at_split);
                    node = &children[test.route(instance)];
                }
            }
        }
    }

    fn train(&mut self, instance: &Instance) -> Result<(), ModelError> {
        if !self.schema.conforms(instance) {
            return Err(ModelError::SchemaMismatch {
                arrival_index: instance.arrival_index,
            });
        }
        self.seen += 1;
        let mut node = &mut self.root;
        while let Node::Internal { test, children, .. } = node {
            node = &mut children[test.route(instance)];
        }
        let Node::Leaf(stats) = node else { unreachable!() };
        stats.update(&self.schema, instance);
        if let Some(test) = attempt_split(stats, &self.schema, &self.config, self.config.gamma) {
            *node = split_leaf(stats, test, &self.schema);
        }
        Ok(())
    }

    fn complexity(&self) -> Complexity {
        self.root.complexity()
    }

    fn counter_cells(&self) -> usize {
        self.root.counter_cells()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::CriterionKind;
    use crate::stream::{AttributeSpec, Value};

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    AttributeSpec::nominal("a", &["x", "y"]),
                    AttributeSpec::nominal("b", &["p", "q", "r"]),
                    AttributeSpec::nominal("s", &["f", "m"]).excluded(),
                ],
                "class",
                ["rejected", "granted"],
                "granted",
                3,
                "s",
                "f",
            )
            .unwrap(),
        )
    }

    fn inst(a: u32, b: u32, s: u32, label: usize) -> Instance {
        Instance::new(vec![Value::Nominal(a), Value::Nominal(b), Value::Nominal(s)], label)
    }

    #[test]
    fn fresh_model_is_a_single_leaf_predicting_negative() {
        let m = FahtModel::new(schema(), CriterionConfig::default()).unwrap();
        assert_eq!(
            m.complexity(),
            Complexity {
                node_count: 1,
                leaf_count: 1,
                depth: 0
            }
        );
        let p = m.predict(&inst(0, 0, 0, 0));
        assert_eq!(p.label, 0);
        assert_eq!(p.positive_probability, 0.5);
    }

    #[test]
    fn invalid_delta_is_rejected() {
        let cfg = CriterionConfig {
            delta: 1.5,
            ..Default::default()
        };
        assert!(matches!(FahtModel::new(schema(), cfg), Err(ModelError::Config(_))));
    }

    #[test]
    fn laplace_smoothing_of_a_leaf() {
        let p = Prediction::from_dist(&ClassDist::new(1.0, 9.0), &schema());
        assert_eq!(p.label, 1);
        assert!((p.positive_probability - 10.0 / 12.0).abs() < 1e-15);
        let tie = Prediction::from_dist(&ClassDist::new(3.0, 3.0), &schema());
        assert_eq!(tie.label, 0);
    }

    #[test]
    fn pure_stream_never_splits() {
        let mut m = FahtModel::new(schema(), CriterionConfig::default()).unwrap();
        for i in 0..5000u32 {
            m.train(&inst(i % 2, i % 3, i % 2, 1)).unwrap();
        }
        assert_eq!(m.complexity().node_count, 1);
    }

    #[test]
    fn deterministic_concept_splits_once_then_routes_missing_to_heaviest_child() {
        let mut m = FahtModel::new(schema(), CriterionConfig::with_kind(CriterionKind::InfoGain)).unwrap();
        for i in 0..10_000u32 {
            // a = y three times as often as x
            let a = u32::from(i % 4 != 0);
            m.train(&inst(a, i % 3, (i / 7) % 2, a as usize)).unwrap();
        }
        let c = m.complexity();
        assert_eq!((c.node_count, c.leaf_count, c.depth), (3, 2, 1));
        match m.root() {
            Node::Internal { test, .. } => assert_eq!(test.attribute, 0),
            Node::Leaf(_) => panic!("no split"),
        }
        let mut missing = inst(0, 0, 0, 0);
        missing.values[0] = Value::Missing;
        assert_eq!(m.predict(&missing), m.predict(&inst(1, 0, 0, 0)));
        assert_eq!(m.predict(&inst(0, 2, 0, 0)).label, 0);
        assert_eq!(m.predict(&inst(1, 2, 0, 0)).label, 1);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let mut m = FahtModel::new(schema(), CriterionConfig::default()).unwrap();
        let bad = Instance::new(vec![Value::Nominal(5), Value::Nominal(0), Value::Nominal(0)], 0);
        assert!(matches!(m.train(&bad), Err(ModelError::SchemaMismatch { .. })));
    }

    #[test]
    fn dump_lists_every_node() {
        let mut m = FahtModel::new(schema(), CriterionConfig::with_kind(CriterionKind::InfoGain)).unwrap();
        for i in 0..2000u32 {
            m.train(&inst(i % 2, 0, 0, (i % 2) as usize)).unwrap();
        }
        let dump = m.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines[0], "fairstream-tree\t1\tig");
        assert_eq!(lines[1], DUMP_HEADER);
        assert_eq!(lines.len() - 2, m.complexity().node_count);
        assert!(lines[2].starts_with("r\tsplit\ta={x:0|y:1}\t"));
        assert!(lines[3].starts_with("r/0\tleaf\t-\t"));
    }
}
