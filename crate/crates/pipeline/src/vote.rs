use std::collections::BTreeMap;

/// Most frequent answer among the non-abstaining votes; ties go to the
/// lowest index. `None` when every vote abstained.
pub fn majority_vote(votes: &[Option<usize>]) -> Option<usize> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in votes.iter().flatten() {
        *counts.entry(*v).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == best).map(|(a, _)| a)
}
