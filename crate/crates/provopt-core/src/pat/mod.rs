//! Equivalence-preserving plan rewrites guarded by inferred properties.
//!
//! Every rule is applied one match at a time: a candidate replacement is
//! substituted into the graph and kept only if the graph still builds and
//! its root schema is unchanged. Properties are recomputed after each
//! successful application.

mod factor;
mod merge;
mod moves;
mod prov;
mod reorder;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::algebra::{NodeId, NodeRef, QueryGraph};
use crate::cbo::{CboError, ChoiceHook};
use crate::properties::BaseKeys;

pub use factor::factor_expr;
pub use merge::merge_projections_unguarded;
pub use moves::sink_selection;
pub use reorder::reorder_joins;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatError {
    #[error(transparent)]
    Choice(#[from] CboError),
    #[error("unknown rule `{0}`")]
    UnknownRule(alloc::string::String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    FactorAttributes,
    MergeProjections,
    MergeSelections,
    SelectionMoveAround,
    PullUpProvenance,
    ProjectToIcols,
    RemoveWindow,
    RemoveDupElimByKey,
    RemoveDupElimBySet,
    RemoveRedundantProjection,
}

impl Rule {
    /// Pipeline order.
    pub const ALL: [Rule; 10] = [
        Rule::FactorAttributes,
        Rule::MergeProjections,
        Rule::MergeSelections,
        Rule::SelectionMoveAround,
        Rule::PullUpProvenance,
        Rule::ProjectToIcols,
        Rule::RemoveWindow,
        Rule::RemoveDupElimByKey,
        Rule::RemoveDupElimBySet,
        Rule::RemoveRedundantProjection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::FactorAttributes => "factor",
            Rule::MergeProjections => "merge-proj",
            Rule::MergeSelections => "merge-sel",
            Rule::SelectionMoveAround => "move-sel",
            Rule::PullUpProvenance => "pullup-prov",
            Rule::ProjectToIcols => "proj-icols",
            Rule::RemoveWindow => "remove-window",
            Rule::RemoveDupElimByKey => "dupelim-key",
            Rule::RemoveDupElimBySet => "dupelim-set",
            Rule::RemoveRedundantProjection => "remove-proj",
        }
    }

    pub fn parse(s: &str) -> Result<Rule, PatError> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| PatError::UnknownRule(s.into()))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatConfig {
    pub rules: BTreeSet<Rule>,
    /// Upper bound on pipeline rounds; stops early once a round changes nothing.
    pub rounds: usize,
    /// A merge is refused when an inner expression larger than one node is
    /// referenced more often than this by the outer projection.
    pub merge_max_refs: usize,
    /// A merge is refused when the merged size exceeds this multiple of the
    /// two projections' sizes...
    pub merge_size_factor: usize,
    /// ...unless it stays within this absolute size.
    pub merge_size_cap: usize,
    /// Ask the choice hook whether to remove each removable duplicate
    /// elimination (0 removes, 1 keeps).
    pub dupelim_choice: bool,
}

impl Default for PatConfig {
    fn default() -> Self {
        PatConfig {
            rules: Rule::ALL.into_iter().collect(),
            rounds: 2,
            merge_max_refs: 1,
            merge_size_factor: 4,
            merge_size_cap: 0,
            dupelim_choice: false,
        }
    }
}

impl PatConfig {
    pub fn none() -> Self {
        PatConfig {
            rules: BTreeSet::new(),
            ..PatConfig::default()
        }
    }

    pub fn only(rules: &[Rule]) -> Self {
        PatConfig {
            rules: rules.iter().copied().collect(),
            ..PatConfig::default()
        }
    }
}

/// Graph after one rule changed it.
#[derive(Debug, Clone)]
pub struct PatStep {
    pub round: usize,
    pub rule: Rule,
    pub graph: QueryGraph,
}

pub(crate) struct Ctx<'a> {
    pub config: &'a PatConfig,
    pub base_keys: &'a BaseKeys,
    pub hook: &'a mut dyn ChoiceHook,
}

/// Parent count per node.
pub(crate) fn fan_out(graph: &QueryGraph) -> BTreeMap<NodeId, usize> {
    graph
        .parents()
        .into_iter()
        .map(|(k, v)| (k, v.len()))
        .collect()
}

/// Replace `target` by `replacement` if the result is a valid plan with the
/// same output schema.
pub(crate) fn try_substitute(
    graph: &QueryGraph,
    target: NodeId,
    replacement: NodeRef,
) -> Option<QueryGraph> {
    let g = graph.substitute(target, replacement).ok()?;
    (g.schema() == graph.schema()).then_some(g)
}

/// Upper bound on single applications per rule, as a guard against rules
/// that fail to converge.
const MAX_STEPS: usize = 10_000;

fn run_rule(rule: Rule, graph: QueryGraph, ctx: &mut Ctx<'_>) -> Result<QueryGraph, PatError> {
    let mut g = graph;
    for _ in 0..MAX_STEPS {
        let next = match rule {
            Rule::FactorAttributes => merge::factor_step(&g),
            Rule::MergeProjections => merge::merge_projections_step(&g, ctx.config),
            Rule::MergeSelections => merge::merge_selections_step(&g),
            Rule::SelectionMoveAround => {
                // One sweep places every derivable selection.
                let m = moves::selection_move_around(&g);
                return Ok(if m.structurally_eq(&g) { g } else { m });
            }
            Rule::PullUpProvenance => prov::pull_up_step(&g),
            Rule::ProjectToIcols => prov::project_to_icols_step(&g),
            Rule::RemoveWindow => prov::remove_window_step(&g),
            Rule::RemoveDupElimByKey => prov::remove_dupelim_by_key_step(&g, ctx.base_keys),
            Rule::RemoveDupElimBySet => prov::remove_dupelim_by_set_step(&g, ctx)?,
            Rule::RemoveRedundantProjection => merge::remove_redundant_step(&g),
        };
        match next {
            Some(n) => g = n,
            None => return Ok(g),
        }
    }
    Ok(g)
}

/// Apply a single rule until it no longer matches.
pub fn apply_rule(
    rule: Rule,
    graph: &QueryGraph,
    config: &PatConfig,
    base_keys: &BaseKeys,
    hook: &mut dyn ChoiceHook,
) -> Result<QueryGraph, PatError> {
    let mut ctx = Ctx {
        config,
        base_keys,
        hook,
    };
    run_rule(rule, graph.clone(), &mut ctx)
}

/// Run the enabled rules in pipeline order for up to `config.rounds`
/// rounds. With `trace`, every graph a rule changed is recorded.
pub fn apply_pats(
    graph: &QueryGraph,
    config: &PatConfig,
    base_keys: &BaseKeys,
    hook: &mut dyn ChoiceHook,
    mut trace: Option<&mut Vec<PatStep>>,
) -> Result<QueryGraph, PatError> {
    let mut ctx = Ctx {
        config,
        base_keys,
        hook,
    };
    let mut g = graph.clone();
    for round in 0..config.rounds {
        let before = g.clone();
        for rule in Rule::ALL {
            if !config.rules.contains(&rule) {
                continue;
            }
            let next = run_rule(rule, g.clone(), &mut ctx)?;
            if !next.structurally_eq(&g) {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(PatStep {
                        round,
                        rule,
                        graph: next.clone(),
                    });
                }
            }
            g = next;
        }
        if g.structurally_eq(&before) {
            break;
        }
    }
    Ok(g)
}
