use super::PatError;
use crate::algebra::{Node, Operator, QueryGraph};
use crate::cbo::ChoiceHook;

/// Choice point per join (bottom-up): 0 keeps the input order, 1 swaps the
/// inputs under a projection restoring the column order.
pub fn reorder_joins(
    graph: &QueryGraph,
    hook: &mut dyn ChoiceHook,
) -> Result<QueryGraph, PatError> {
    graph.transform_up(|n, inputs| {
        let Operator::Join(on) = n.op() else {
            return Ok(Node::rebuild(n, inputs).expect("rebuild with unchanged schemas"));
        };
        if hook.make_choice(2)? == 0 {
            return Ok(Node::rebuild(n, inputs).expect("rebuild with unchanged schemas"));
        }
        let swapped_on = on.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        let [l, r]: [_; 2] = inputs.try_into().expect("join has two inputs");
        let swapped = Node::join(swapped_on, r, l).expect("swapped join is valid");
        Ok(Node::project_attrs(n.schema().names(), swapped).expect("same attributes"))
    })
}
