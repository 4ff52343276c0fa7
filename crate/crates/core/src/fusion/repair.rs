use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::ConstraintSet;

/// Forces every must-link component onto one label and gives cannot-linked
/// components distinct labels.
///
/// Components are visited largest first. Each keeps its most frequent label
/// unless a cannot-linked component already took it, then falls back to its
/// next most frequent label, then to the smallest free label in the budget,
/// and only then opens a new label. Returns the number of relabelled pixels
/// and the label count of the result.
pub(super) fn repair(labels: &mut [u32], budget: u32, cons: &ConstraintSet) -> (usize, u32) {
    let comps = cons.components();
    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by_key(|&c| (core::cmp::Reverse(comps[c].len()), c));

    let mut next_label = budget;
    let mut assigned: Vec<Option<u32>> = vec![None; comps.len()];
    let mut changed = 0;
    for &ci in &order {
        let comp = &comps[ci];
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for &p in comp {
            match counts.iter_mut().find(|(l, _)| *l == labels[p]) {
                Some(e) => e.1 += 1,
                None => counts.push((labels[p], 1)),
            }
        }
        counts.sort_by_key(|&(l, n)| (core::cmp::Reverse(n), l));
        let taken: Vec<u32> = cons.cannot_link_neighbors(ci).iter().filter_map(|&b| assigned[b]).collect();
        let label = counts
            .iter()
            .map(|&(l, _)| l)
            .find(|l| !taken.contains(l))
            .or_else(|| (0..budget).find(|l| !taken.contains(l)))
            .unwrap_or_else(|| {
                next_label += 1;
                next_label - 1
            });
        assigned[ci] = Some(label);
        for &p in comp {
            if labels[p] != label {
                labels[p] = label;
                changed += 1;
            }
        }
    }
    let used = labels.iter().copied().max().map_or(budget, |m| budget.max(m + 1));
    (changed, used)
}
