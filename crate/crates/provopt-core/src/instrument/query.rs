use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::InstrumentError;
use crate::algebra::{
    attr, lit, Expr, Frame, Node, NodeRef, Operator, ProjItem, QueryGraph, Value,
};
use crate::cbo::ChoiceHook;
use crate::executor::prov_attr_name;

/// How the provenance of an aggregation is attached to its result rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggMethod {
    /// Group-by turned into a whole-partition window over the instrumented input.
    Window,
    /// Aggregation result joined back to the instrumented input on the group-by.
    Join,
}

impl AggMethod {
    pub fn from_choice(choice: usize) -> AggMethod {
        if choice == 0 {
            AggMethod::Window
        } else {
            AggMethod::Join
        }
    }

    pub fn choice(self) -> usize {
        match self {
            AggMethod::Window => 0,
            AggMethod::Join => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggPolicy {
    Fixed(AggMethod),
    /// Ask the choice hook at every aggregation.
    Choose,
}

/// Rewrite `graph` so that its result carries the relational encoding of
/// its provenance: the original columns followed by one copy of every base
/// attribute per relation access, named by [`prov_attr_name`].
pub fn instrument_query(
    graph: &QueryGraph,
    policy: AggPolicy,
    hook: &mut dyn ChoiceHook,
) -> Result<QueryGraph, InstrumentError> {
    let mut ins = Instrumenter {
        policy,
        hook,
        occurrences: BTreeMap::new(),
    };
    let (root, _) = ins.visit(graph.root())?;
    Ok(QueryGraph::new(root))
}

struct Instrumenter<'a> {
    policy: AggPolicy,
    hook: &'a mut dyn ChoiceHook,
    occurrences: BTreeMap<String, usize>,
}

type Instrumented = (NodeRef, Vec<String>);

impl Instrumenter<'_> {
    fn visit(&mut self, node: &NodeRef) -> Result<Instrumented, InstrumentError> {
        match node.op() {
            Operator::Relation { name, schema } => {
                let occ = self.occurrences.entry(name.clone()).or_insert(0);
                let prov: Vec<String> = schema
                    .iter()
                    .map(|a| prov_attr_name(name, *occ, a))
                    .collect();
                *occ += 1;
                let items = schema
                    .iter()
                    .map(|a| ProjItem::keep(a.clone()))
                    .chain(
                        schema
                            .iter()
                            .zip(&prov)
                            .map(|(a, p)| ProjItem::new(attr(a.clone()), p.clone())),
                    )
                    .collect();
                Ok((Node::project(items, node.clone())?, prov))
            }
            Operator::Select(cond) => {
                let (child, prov) = self.visit(node.input(0))?;
                Ok((Node::select(cond.clone(), child)?, prov))
            }
            Operator::Project(items) => {
                let (child, prov) = self.visit(node.input(0))?;
                if let Some(it) = items.iter().find(|it| prov.contains(&it.name)) {
                    return Err(InstrumentError::SchemaCollision(it.name.clone()));
                }
                let items = items
                    .iter()
                    .cloned()
                    .chain(prov.iter().map(|p| ProjItem::keep(p.clone())))
                    .collect();
                Ok((Node::project(items, child)?, prov))
            }
            Operator::Join(on) => {
                let (l, lp) = self.visit(node.input(0))?;
                let (r, rp) = self.visit(node.input(1))?;
                let prov = concat(lp, rp);
                Ok((reorder(node, Node::join(on.clone(), l, r)?, &prov)?, prov))
            }
            Operator::Cross => {
                let (l, lp) = self.visit(node.input(0))?;
                let (r, rp) = self.visit(node.input(1))?;
                let prov = concat(lp, rp);
                Ok((reorder(node, Node::cross(l, r)?, &prov)?, prov))
            }
            Operator::Union => {
                let (l, lp) = self.visit(node.input(0))?;
                let (r, rp) = self.visit(node.input(1))?;
                let width = node.schema().len();
                let pad =
                    |n: &NodeRef, own: &[String], left: bool| -> Result<NodeRef, InstrumentError> {
                        let items = n.schema().names()[..width]
                            .iter()
                            .map(|a| ProjItem::keep(a.clone()))
                            .chain(lp.iter().map(|p| slot(p, left, own)))
                            .chain(rp.iter().map(|p| slot(p, !left, own)))
                            .collect();
                        Ok(Node::project(items, n.clone())?)
                    };
                let l = pad(&l, &lp, true)?;
                let r = pad(&r, &rp, false)?;
                Ok((Node::union(l, r)?, concat(lp, rp)))
            }
            Operator::DupElim => self.visit(node.input(0)),
            Operator::Agg { group_by, aggs } => {
                let (child, prov) = self.visit(node.input(0))?;
                let method = match self.policy {
                    AggPolicy::Fixed(m) => m,
                    AggPolicy::Choose => AggMethod::from_choice(self.hook.make_choice(2)?),
                };
                let out = match method {
                    AggMethod::Join => agg_join(node, group_by, child, &prov)?,
                    AggMethod::Window => agg_window(node, group_by, aggs, child, &prov)?,
                };
                Ok((out, prov))
            }
            Operator::Intersect | Operator::Diff | Operator::Window { .. } => {
                Err(InstrumentError::Unsupported(node.op().kind()))
            }
        }
    }
}

fn concat(mut a: Vec<String>, b: Vec<String>) -> Vec<String> {
    a.extend(b);
    a
}

/// Original columns of `node` first, then the provenance columns.
fn reorder(node: &NodeRef, combined: NodeRef, prov: &[String]) -> Result<NodeRef, InstrumentError> {
    let names: Vec<&String> = node.schema().iter().chain(prov).collect();
    Ok(Node::project_attrs(&names, combined)?)
}

/// Null-padding item for the union side that does not own `name`.
fn slot(name: &String, owned_side: bool, own: &[String]) -> ProjItem {
    if owned_side && own.contains(name) {
        ProjItem::keep(name.clone())
    } else {
        ProjItem::new(lit(Value::Null), name.clone())
    }
}

/// `base`, or `base_1`, `base_2`, ... avoiding `taken`.
fn fresh(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.into();
    }
    (1..)
        .map(|k| format!("{base}_{k}"))
        .find(|c| !taken.contains(c))
        .unwrap()
}

fn taken_names(nodes: &[&NodeRef]) -> BTreeSet<String> {
    nodes
        .iter()
        .flat_map(|n| n.schema().iter().cloned())
        .collect()
}

fn final_projection(
    group_by: &[String],
    outs: &[(String, String)],
    prov: &[String],
    input: NodeRef,
) -> Result<NodeRef, InstrumentError> {
    let items = group_by
        .iter()
        .map(|g| ProjItem::keep(g.clone()))
        .chain(
            outs.iter()
                .map(|(from, to)| ProjItem::new(attr(from.clone()), to.clone())),
        )
        .chain(prov.iter().map(|p| ProjItem::keep(p.clone())))
        .collect();
    Ok(Node::project(items, input)?)
}

/// `Π_{G, outs, P}(γ(R) ⋈_{G=G'} Π_{G→G', P}(R+))`, or a cross product with
/// the single aggregate row when there is no group-by.
fn agg_join(
    agg: &NodeRef,
    group_by: &[String],
    child: NodeRef,
    prov: &[String],
) -> Result<NodeRef, InstrumentError> {
    if group_by.is_empty() {
        let right = Node::project_attrs(prov, child)?;
        return Ok(Node::cross(agg.clone(), right)?);
    }
    let mut taken = taken_names(&[agg, &child]);
    let mut renamed = Vec::with_capacity(group_by.len());
    for g in group_by {
        let n = fresh(&format!("{g}_prov_g"), &taken);
        taken.insert(n.clone());
        renamed.push(n);
    }
    let items = group_by
        .iter()
        .zip(&renamed)
        .map(|(g, r)| ProjItem::new(attr(g.clone()), r.clone()))
        .chain(prov.iter().map(|p| ProjItem::keep(p.clone())))
        .collect();
    let right = Node::project(items, child)?;
    let on = group_by.iter().cloned().zip(renamed).collect();
    let joined = Node::join(on, agg.clone(), right)?;
    let outs: Vec<(String, String)> = agg.schema().names()[group_by.len()..]
        .iter()
        .map(|o| (o.clone(), o.clone()))
        .collect();
    final_projection(group_by, &outs, prov, joined)
}

/// True when evaluating the instrumented `node` yields every original row
/// with its original multiplicity (nothing below collapses duplicates).
fn preserves_multiplicity(node: &NodeRef) -> bool {
    !matches!(node.op(), Operator::Agg { .. } | Operator::DupElim)
        && node.inputs().iter().all(preserves_multiplicity)
}

fn agg_window(
    agg: &NodeRef,
    group_by: &[String],
    aggs: &[crate::algebra::AggCall],
    child: NodeRef,
    prov: &[String],
) -> Result<NodeRef, InstrumentError> {
    let original = agg.input(0);
    let mut taken = taken_names(&[agg, &child]);
    let mut outs = Vec::with_capacity(aggs.len());
    if preserves_multiplicity(original) {
        let mut cur = child;
        for call in aggs {
            let tmp = fresh(&call.out, &taken);
            taken.insert(tmp.clone());
            let c = crate::algebra::AggCall::new(call.func, call.arg.clone(), tmp.clone());
            cur = Node::window(c, group_by.to_vec(), Vec::new(), Frame::Whole, cur)?;
            outs.push((tmp, call.out.clone()));
        }
        return final_projection(group_by, &outs, prov, cur);
    }
    // The instrumented input has one row per witness, not per original row,
    // so aggregate over the original rows carried alongside it: a flagged
    // union where only original rows feed the window arguments.
    let flag = fresh("prov_is_orig", &taken);
    taken.insert(flag.clone());
    let orig_items = original
        .schema()
        .iter()
        .map(|a| ProjItem::keep(a.clone()))
        .chain(core::iter::once(ProjItem::new(lit(true), flag.clone())))
        .chain(
            prov.iter()
                .map(|p| ProjItem::new(lit(Value::Null), p.clone())),
        )
        .collect();
    let orig = Node::project(orig_items, original.clone())?;
    let prov_items = original
        .schema()
        .iter()
        .map(|a| ProjItem::keep(a.clone()))
        .chain(core::iter::once(ProjItem::new(lit(false), flag.clone())))
        .chain(prov.iter().map(|p| ProjItem::keep(p.clone())))
        .collect();
    let provs = Node::project(prov_items, child)?;
    let both = Node::union(orig, provs)?;
    let mut arg_items: Vec<ProjItem> = both
        .schema()
        .iter()
        .map(|a| ProjItem::keep(a.clone()))
        .collect();
    let mut args = Vec::with_capacity(aggs.len());
    for call in aggs {
        let a = fresh(&format!("{}_orig", call.arg), &taken);
        taken.insert(a.clone());
        arg_items.push(ProjItem::new(
            Expr::if_then_else(attr(flag.clone()), attr(call.arg.clone()), lit(Value::Null)),
            a.clone(),
        ));
        args.push(a);
    }
    let mut cur = Node::project(arg_items, both)?;
    for (call, a) in aggs.iter().zip(args) {
        let tmp = fresh(&call.out, &taken);
        taken.insert(tmp.clone());
        let c = crate::algebra::AggCall::new(call.func, a, tmp.clone());
        cur = Node::window(c, group_by.to_vec(), Vec::new(), Frame::Whole, cur)?;
        outs.push((tmp, call.out.clone()));
    }
    let only_prov = Node::select(Expr::not(attr(flag)), cur)?;
    final_projection(group_by, &outs, prov, only_prov)
}
