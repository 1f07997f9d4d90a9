//! 2CFAHT: an AFIG tree whose internal nodes watch their own accuracy and
//! fairness, grow alternate subtrees on deterioration, and swap them in when
//! they do better.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::criteria::{ClassDist, ConfigError, CriterionConfig, CriterionKind};
use crate::fairness::GroupCounts;
use crate::split::{attempt_split, LeafStats, SplitTest};
use crate::stream::{Instance, Schema};
use crate::tree::{format_dist, format_groups, Complexity, Learner, ModelError, Prediction, DUMP_HEADER, DUMP_MAGIC, DUMP_VERSION};

pub const DEFAULT_WINDOW: usize = 1000;
pub const DEFAULT_DRIFT_DELTA: f64 = 1e-5;
/// Upper bound on the probation of an alternate, in routed instances.
pub const PROBATION_CAP: u64 = 2000;

/// Relative change (current − baseline) / baseline; 0 when the baseline is 0.
pub fn deterioration(baseline: f64, current: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (current - baseline) / baseline
    }
}

/// Adjusts γ from the accuracy change `b` and fairness change `c`: shrink it
/// when accuracy suffers more, grow it when fairness suffers more.
pub fn adapt_gamma(gamma: f64, b: f64, c: f64) -> f64 {
    // (a, +1 grow | −1 shrink)
    let (a, direction) = if b < 0.0 && c >= 0.0 {
        (b.abs(), -1.0)
    } else if c < 0.0 && b >= 0.0 {
        (c.abs(), 1.0)
    } else if b < c && c < 0.0 {
        ((b - c) / c, -1.0)
    } else if c < b && b < 0.0 {
        ((c - b) / b, 1.0)
    } else {
        return gamma.max(0.0);
    };
    let a = a.min(1.0);
    ((1.0 + direction * a) * gamma).max(0.0)
}

/// Accuracy and |Disc| of predictions over some span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub n: u64,
    pub accuracy: f64,
    pub abs_disc: f64,
}

impl Rates {
    fn from_counts(n: u64, correct: u64, groups: &GroupCounts) -> Self {
        Rates {
            n,
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            abs_disc: groups.discrimination().abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    correct: bool,
    deprived: Option<bool>,
    predicted_positive: bool,
}

/// Lifetime and sliding-window accuracy/fairness of the predictions routed
/// through one node.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMonitor {
    window: Option<usize>,
    margin: f64,
    buffer: VecDeque<Outcome>,
    n: u64,
    correct: u64,
    groups: GroupCounts,
    window_correct: u64,
    window_groups: GroupCounts,
}

/// ε_drift = sqrt(ln(1/δ) / 2W).
pub fn drift_margin(window: usize, delta: f64) -> f64 {
    ((1.0 / delta).ln() / (2.0 * window as f64)).sqrt()
}

impl DriftMonitor {
    /// `window = None` disables detection.
    pub fn new(window: Option<usize>, delta: f64) -> Self {
        DriftMonitor {
            window,
            margin: window.map_or(f64::INFINITY, |w| drift_margin(w, delta)),
            buffer: VecDeque::with_capacity(window.unwrap_or(0)),
            n: 0,
            correct: 0,
            groups: GroupCounts::default(),
            window_correct: 0,
            window_groups: GroupCounts::default(),
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Records one routed prediction; returns true when the window is full
    /// and its accuracy or |Disc| is worse than the lifetime baseline by more
    /// than the margin.
    pub fn record(&mut self, correct: bool, deprived: Option<bool>, predicted_positive: bool) -> bool {
        self.n += 1;
        self.correct += u64::from(correct);
        if let Some(d) = deprived {
            self.groups.update(d, predicted_positive);
        }
        let Some(w) = self.window else { return false };
        let outcome = Outcome {
            correct,
            deprived,
            predicted_positive,
        };
        if self.buffer.len() == w {
            if let Some(old) = self.buffer.pop_front() {
                self.window_correct -= u64::from(old.correct);
                if let Some(d) = old.deprived {
                    *self.window_groups.cell_mut(d, old.predicted_positive) -= 1.0;
                }
            }
        }
        self.buffer.push_back(outcome);
        self.window_correct += u64::from(correct);
        if let Some(d) = deprived {
            self.window_groups.update(d, predicted_positive);
        }
        self.drift_detected()
    }

    pub fn drift_detected(&self) -> bool {
        let Some(w) = self.window else { return false };
        if self.buffer.len() < w {
            return false;
        }
        let base = self.baseline();
        let win = self.window_rates();
        win.accuracy < base.accuracy - self.margin || win.abs_disc > base.abs_disc + self.margin
    }

    pub fn baseline(&self) -> Rates {
        Rates::from_counts(self.n, self.correct, &self.groups)
    }

    pub fn window_rates(&self) -> Rates {
        Rates::from_counts(self.buffer.len() as u64, self.window_correct, &self.window_groups)
    }

    /// Window rates recounted from the ring buffer.
    pub fn recount_window(&self) -> Rates {
        let mut groups = GroupCounts::default();
        let mut correct = 0;
        for o in &self.buffer {
            correct += u64::from(o.correct);
            if let Some(d) = o.deprived {
                groups.update(d, o.predicted_positive);
            }
        }
        Rates::from_counts(self.buffer.len() as u64, correct, &groups)
    }

    /// Accuracy change `b` and fairness change `c` of the window relative to
    /// the baseline, fairness measured as 1 − |Disc|.
    pub fn deterioration(&self) -> (f64, f64) {
        let base = self.baseline();
        let win = self.window_rates();
        (
            deterioration(base.accuracy, win.accuracy),
            deterioration(1.0 - base.abs_disc, 1.0 - win.abs_disc),
        )
    }

    pub fn reset(&mut self) {
        *self = DriftMonitor {
            window: self.window,
            margin: self.margin,
            buffer: VecDeque::with_capacity(self.window.unwrap_or(0)),
            n: 0,
            correct: 0,
            groups: GroupCounts::default(),
            window_correct: 0,
            window_groups: GroupCounts::default(),
        };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfahtConfig {
    /// Must use the AFIG criterion; `criterion.gamma` is the initial γ.
    pub criterion: CriterionConfig,
    /// Monitor window W; `None` disables drift handling.
    pub window: Option<usize>,
    pub drift_delta: f64,
}

impl Default for CfahtConfig {
    fn default() -> Self {
        CfahtConfig {
            criterion: CriterionConfig::with_kind(CriterionKind::Afig),
            window: Some(DEFAULT_WINDOW),
            drift_delta: DEFAULT_DRIFT_DELTA,
        }
    }
}

impl CfahtConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.criterion.validate()?;
        if self.criterion.kind != CriterionKind::Afig {
            return Err(ConfigError::Invalid("the adaptive tree requires the afig criterion".into()));
        }
        if self.window == Some(0) {
            return Err(ConfigError::Invalid("monitor window must be at least 1".into()));
        }
        if !(self.drift_delta > 0.0 && self.drift_delta < 1.0) {
            return Err(ConfigError::Delta(self.drift_delta));
        }
        Ok(())
    }

    /// min(2000, 2W) routed instances.
    pub fn probation(&self) -> u64 {
        self.window.map_or(PROBATION_CAP, |w| PROBATION_CAP.min(2 * w as u64))
    }

    fn replacement_margin(&self) -> f64 {
        let n = self.window.unwrap_or(self.probation() as usize);
        drift_margin(n, self.drift_delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Leaf,
    Internal {
        test: SplitTest,
        children: Vec<AdaptiveNode>,
        class_dist_at_split: ClassDist,
        groups_at_split: GroupCounts,
        monitor: DriftMonitor,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Alternate {
    root: AdaptiveNode,
    gamma: f64,
    routed: u64,
    main_correct: u64,
    alt_correct: u64,
    main_groups: GroupCounts,
    alt_groups: GroupCounts,
}

impl Alternate {
    fn new(schema: &Schema, gamma: f64) -> Self {
        Alternate {
            root: AdaptiveNode::leaf(schema),
            gamma,
            routed: 0,
            main_correct: 0,
            alt_correct: 0,
            main_groups: GroupCounts::default(),
            alt_groups: GroupCounts::default(),
        }
    }

    /// Strictly better on one metric over probation and not worse than
    /// `margin` on the other.
    fn should_replace(&self, margin: f64) -> bool {
        let main = Rates::from_counts(self.routed, self.main_correct, &self.main_groups);
        let alt = Rates::from_counts(self.routed, self.alt_correct, &self.alt_groups);
        (alt.accuracy > main.accuracy && alt.abs_disc <= main.abs_disc + margin)
            || (alt.abs_disc < main.abs_disc && alt.accuracy >= main.accuracy - margin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveNode {
    stats: LeafStats,
    body: Body,
    alt: Option<Box<Alternate>>,
}

impl AdaptiveNode {
    fn leaf(schema: &Schema) -> Self {
        AdaptiveNode {
            stats: LeafStats::new(schema),
            body: Body::Leaf,
            alt: None,
        }
    }

    fn predict(&self, instance: &Instance, schema: &Schema) -> Prediction {
        let mut node = self;
        let mut fallback: Option<&ClassDist> = None;
        loop {
            match &node.body {
                Body::Leaf => {
                    let dist = match fallback {
                        Some(parent) if node.stats.class_dist.total() == 0.0 => parent,
                        _ => &node.stats.class_dist,
                    };
                    return Prediction::from_dist(dist, schema);
                }
                Body::Internal {
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

    fn complexity(&self) -> Complexity {
        match &self.body {
            Body::Leaf => Complexity {
                node_count: 1,
                leaf_count: 1,
                depth: 0,
            },
            Body::Internal { children, .. } => {
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

    /// Nodes of this subtree including every alternate hanging off it.
    fn total_nodes(&self) -> usize {
        let own = self.alt.as_ref().map_or(0, |a| a.root.total_nodes());
        own + match &self.body {
            Body::Leaf => 1,
            Body::Internal { children, .. } => 1 + children.iter().map(AdaptiveNode::total_nodes).sum::<usize>(),
        }
    }

    fn counter_cells(&self) -> usize {
        let own = self.stats.counter_cells() + self.alt.as_ref().map_or(0, |a| a.root.counter_cells());
        own + match &self.body {
            Body::Leaf => 0,
            Body::Internal { children, .. } => children.iter().map(AdaptiveNode::counter_cells).sum(),
        }
    }

    fn alternates(&self) -> usize {
        usize::from(self.alt.is_some())
            + match &self.body {
                Body::Leaf => 0,
                Body::Internal { children, .. } => children.iter().map(AdaptiveNode::alternates).sum(),
            }
    }

    fn routed_count(&self) -> u64 {
        self.stats.seen()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptAction {
    AlternateCreated,
    Replaced,
    Pruned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptEvent {
    /// Instances trained when the event happened.
    pub instance_index: u64,
    pub action: AdaptAction,
    /// Depth of the anchor node in the main tree.
    pub depth: usize,
    pub gamma: f64,
}

struct Context<'a> {
    schema: &'a Schema,
    config: &'a CfahtConfig,
    probation: u64,
    margin: f64,
}

struct Live {
    gamma: f64,
    seen: u64,
    gamma_log: Vec<(u64, f64)>,
    events: Vec<AdaptEvent>,
}

/// `alt_gamma` is `Some` inside an alternate subtree, which grows with the
/// γ it was created with and never spawns alternates of its own.
fn train_node(
    node: &mut AdaptiveNode,
    instance: &Instance,
    prediction: Prediction,
    alt_gamma: Option<f64>,
    depth: usize,
    ctx: &Context,
    live: &mut Live,
) {
    let schema = ctx.schema;
    node.stats.update(schema, instance);
    let deprived = schema.is_deprived(instance);
    let correct = prediction.label == instance.label;
    let predicted_positive = schema.is_positive(prediction.label);
    let mut flagged = false;
    if let Body::Internal { monitor, .. } = &mut node.body {
        flagged = monitor.record(correct, deprived, predicted_positive);
    }

    if let Some(alt) = node.alt.as_mut() {
        let alt_prediction = alt.root.predict(instance, schema);
        alt.routed += 1;
        alt.main_correct += u64::from(correct);
        alt.alt_correct += u64::from(alt_prediction.label == instance.label);
        if let Some(d) = deprived {
            alt.main_groups.update(d, predicted_positive);
            alt.alt_groups.update(d, schema.is_positive(alt_prediction.label));
        }
        let gamma = alt.gamma;
        train_node(&mut alt.root, instance, alt_prediction, Some(gamma), depth, ctx, live);
        if alt.routed >= ctx.probation {
            let alt = node.alt.take().expect("alternate present");
            if alt.should_replace(ctx.margin) {
                *node = alt.root;
                live.events.push(AdaptEvent {
                    instance_index: live.seen,
                    action: AdaptAction::Replaced,
                    depth,
                    gamma: alt.gamma,
                });
                return;
            }
            if let Body::Internal { monitor, .. } = &mut node.body {
                monitor.reset();
            }
            live.events.push(AdaptEvent {
                instance_index: live.seen,
                action: AdaptAction::Pruned,
                depth,
                gamma: alt.gamma,
            });
        }
    } else if flagged && alt_gamma.is_none() {
        if let Body::Internal { monitor, .. } = &node.body {
            let (b, c) = monitor.deterioration();
            let gamma = adapt_gamma(live.gamma, b, c);
            live.gamma = gamma;
            live.gamma_log.push((live.seen, gamma));
            node.alt = Some(Box::new(Alternate::new(schema, gamma)));
            live.events.push(AdaptEvent {
                instance_index: live.seen,
                action: AdaptAction::AlternateCreated,
                depth,
                gamma,
            });
        }
    }

    match &mut node.body {
        Body::Leaf => {
            let gamma = alt_gamma.unwrap_or(live.gamma);
            if let Some(test) = attempt_split(&mut node.stats, schema, &ctx.config.criterion, gamma) {
                let children = (0..test.branches()).map(|_| AdaptiveNode::leaf(schema)).collect();
                node.body = Body::Internal {
                    test,
                    children,
                    class_dist_at_split: node.stats.class_dist,
                    groups_at_split: node.stats.groups,
                    monitor: DriftMonitor::new(ctx.config.window, ctx.config.drift_delta),
                };
            }
        }
        Body::Internal { test, children, .. } => {
            let child = &mut children[test.route(instance)];
            train_node(child, instance, prediction, alt_gamma, depth + 1, ctx, live);
        }
    }
}

#[derive(Debug, Clone)]
pub struct CfahtModel {
    root: AdaptiveNode,
    config: CfahtConfig,
    schema: Arc<Schema>,
    gamma: f64,
    seen: u64,
    gamma_log: Vec<(u64, f64)>,
    events: Vec<AdaptEvent>,
}

impl CfahtModel {
    pub fn new(schema: Arc<Schema>, config: CfahtConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let gamma = config.criterion.gamma;
        Ok(CfahtModel {
            root: AdaptiveNode::leaf(&schema),
            config,
            schema,
            gamma,
            seen: 0,
            gamma_log: vec![(0, gamma)],
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &CfahtConfig {
        &self.config
    }

    /// Live γ used for new splits in the main tree.
    pub fn effective_gamma(&self) -> f64 {
        self.gamma
    }

    /// (instance_index, γ) at start and after every change.
    pub fn gamma_log(&self) -> &[(u64, f64)] {
        &self.gamma_log
    }

    pub fn gamma_log_csv(&self) -> String {
        let mut out = String::from("instance_index,gamma\n");
        for (i, g) in &self.gamma_log {
            let _ = writeln!(out, "{i},{g}");
        }
        out
    }

    pub fn events(&self) -> &[AdaptEvent] {
        &self.events
    }

    pub fn count_events(&self, action: AdaptAction) -> usize {
        self.events.iter().filter(|e| e.action == action).count()
    }

    /// Nodes in the main tree and all alternates.
    pub fn total_nodes(&self) -> usize {
        self.root.total_nodes()
    }

    /// Alternates currently on probation.
    pub fn active_alternates(&self) -> usize {
        self.root.alternates()
    }

    /// Instances routed through the root since it was created.
    pub fn root_routed(&self) -> u64 {
        self.root.routed_count()
    }

    /// Monitor of the root while it is an internal node.
    pub fn root_monitor(&self) -> Option<&DriftMonitor> {
        match &self.root.body {
            Body::Internal { monitor, .. } => Some(monitor),
            Body::Leaf => None,
        }
    }

    /// Tree dump with two extra columns: the node's monitor
    /// (`n;accuracy;|disc|;window_n;window_accuracy;window_|disc|`) and its
    /// alternate (`gamma;routed`). Alternate subtrees follow their anchor
    /// under the path suffix `~alt`.
    pub fn dump(&self) -> String {
        let mut out = format!("{DUMP_MAGIC}\t{DUMP_VERSION}\tcfaht\n{DUMP_HEADER}\tmonitor\talternate\n");
        dump_node(&self.root, "r", &self.schema, &mut out);
        out
    }
}

fn dump_node(node: &AdaptiveNode, path: &str, schema: &Schema, out: &mut String) {
    let alt = node
        .alt
        .as_ref()
        .map_or_else(|| "-".to_string(), |a| format!("{};{}", a.gamma, a.routed));
    match &node.body {
        Body::Leaf => {
            let _ = writeln!(
                out,
                "{path}\tleaf\t-\t{}\t{}\t-\t{alt}",
                format_dist(&node.stats.class_dist),
                format_groups(&node.stats.groups)
            );
        }
        Body::Internal {
            test,
            class_dist_at_split,
            groups_at_split,
            monitor,
            ..
        } => {
            let b = monitor.baseline();
            let w = monitor.window_rates();
            let _ = writeln!(
                out,
                "{path}\tsplit\t{}\t{}\t{}\t{};{};{};{};{};{}\t{alt}",
                test.describe(schema),
                format_dist(class_dist_at_split),
                format_groups(groups_at_split),
                b.n,
                b.accuracy,
                b.abs_disc,
                w.n,
                w.accuracy,
                w.abs_disc
            );
        }
    }
    if let Some(a) = &node.alt {
        dump_node(&a.root, &format!("{path}~alt"), schema, out);
    }
    if let Body::Internal { children, .. } = &node.body {
        for (i, child) in children.iter().enumerate() {
            dump_node(child, &format!("{path}/{i}"), schema, out);
        }
    }
}

impl Learner for CfahtModel {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn predict(&self, instance: &Instance) -> Prediction {
        self.root.predict(instance, &self.schema)
    }

    fn train(&mut self, instance: &Instance) -> Result<(), ModelError> {
        if !self.schema.conforms(instance) {
            return Err(ModelError::SchemaMismatch {
                arrival_index: instance.arrival_index,
            });
        }
        let prediction = self.predict(instance);
        self.seen += 1;
        let ctx = Context {
            schema: &self.schema,
            config: &self.config,
            probation: self.config.probation(),
            margin: self.config.replacement_margin(),
        };
        let mut live = Live {
            gamma: self.gamma,
            seen: self.seen,
            gamma_log: std::mem::take(&mut self.gamma_log),
            events: std::mem::take(&mut self.events),
        };
        train_node(&mut self.root, instance, prediction, None, 0, &ctx, &mut live);
        self.gamma = live.gamma;
        self.gamma_log = live.gamma_log;
        self.events = live.events;
        Ok(())
    }

    fn complexity(&self) -> Complexity {
        self.root.complexity()
    }

    fn counter_cells(&self) -> usize {
        self.root.counter_cells()
    }

    fn gamma(&self) -> Option<f64> {
        Some(self.gamma)
    }
}
