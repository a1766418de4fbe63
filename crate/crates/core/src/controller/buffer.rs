use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::mask::ClassSet;

/// Outcome of one buffer update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChangeDecision {
    None,
    Enter { classes: ClassSet },
    Leave { classes: ClassSet },
    Both { enter: ClassSet, leave: ClassSet },
}

impl ChangeDecision {
    pub fn is_change(&self) -> bool {
        !matches!(self, ChangeDecision::None)
    }

    pub fn added(&self) -> ClassSet {
        match self {
            ChangeDecision::Enter { classes } => classes.clone(),
            ChangeDecision::Both { enter, .. } => enter.clone(),
            _ => ClassSet::new(),
        }
    }

    pub fn removed(&self) -> ClassSet {
        match self {
            ChangeDecision::Leave { classes } => classes.clone(),
            ChangeDecision::Both { leave, .. } => leave.clone(),
            _ => ClassSet::new(),
        }
    }

    fn from_sets(enter: ClassSet, leave: ClassSet) -> Self {
        match (enter.is_empty(), leave.is_empty()) {
            (true, true) => ChangeDecision::None,
            (false, true) => ChangeDecision::Enter { classes: enter },
            (true, false) => ChangeDecision::Leave { classes: leave },
            (false, false) => ChangeDecision::Both { enter, leave },
        }
    }
}

/// Ring buffer of the last `capacity` overseer class sets plus the class set
/// currently prompted into the segmenter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferState {
    capacity: usize,
    entries: VecDeque<ClassSet>,
    tracked: ClassSet,
    handle_leave: bool,
}

impl BufferState {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize, tracked: ClassSet) -> Self {
        assert!(capacity >= 1, "buffer capacity must be at least 1");
        Self { capacity, entries: VecDeque::with_capacity(capacity), tracked, handle_leave: true }
    }

    /// When disabled, only entering classes trigger a change.
    pub fn with_leave_handling(mut self, on: bool) -> Self {
        self.handle_leave = on;
        self
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = &ClassSet> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn tracked(&self) -> &ClassSet {
        &self.tracked
    }

    /// Pushes `c_t`, evicting the oldest entry when full, and reports classes
    /// present in every entry but untracked (enter) or tracked but absent
    /// from every entry (leave). Nothing is reported until the buffer is full.
    pub fn update_and_check(&mut self, c_t: ClassSet) -> ChangeDecision {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(c_t);
        if !self.is_full() {
            return ChangeDecision::None;
        }
        let mut iter = self.entries.iter();
        let first = iter.next().expect("full buffer").clone();
        let (common, any) = iter.fold((first.clone(), first), |(common, any), e| {
            (common.intersection(e).copied().collect(), any.union(e).copied().collect::<ClassSet>())
        });
        let enter: ClassSet = common.difference(&self.tracked).copied().collect();
        let leave: ClassSet =
            if self.handle_leave { self.tracked.difference(&any).copied().collect() } else { ClassSet::new() };
        ChangeDecision::from_sets(enter, leave)
    }

    /// State after a re-prompt: `tracked` replaced and the buffer restarted
    /// from the re-prompt frame's class set.
    pub fn reset(&mut self, tracked: ClassSet, seed_entry: ClassSet) {
        self.tracked = tracked;
        self.entries.clear();
        self.entries.push_back(seed_entry);
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn set(c: &[u8]) -> ClassSet {
        c.iter().copied().collect()
    }

    /// Direct evaluation over the explicit window, independent of the ring buffer.
    fn oracle(window: &[ClassSet], tracked: &ClassSet, cap: usize) -> (ClassSet, ClassSet) {
        if window.len() < cap {
            return (ClassSet::new(), ClassSet::new());
        }
        let w = &window[window.len() - cap..];
        let enter = (0u8..=255).filter(|c| w.iter().all(|e| e.contains(c)) && !tracked.contains(c)).collect();
        let leave = tracked.iter().copied().filter(|c| w.iter().all(|e| !e.contains(c))).collect();
        (enter, leave)
    }

    #[test]
    fn persistent_new_class_enters() {
        let mut b = BufferState::new(4, set(&[1]));
        for _ in 0..3 {
            assert_eq!(b.update_and_check(set(&[1, 2])), ChangeDecision::None);
        }
        assert_eq!(b.update_and_check(set(&[1, 2])), ChangeDecision::Enter { classes: set(&[2]) });
    }

    #[test]
    fn class_in_three_of_four_entries_is_ignored() {
        let mut b = BufferState::new(4, set(&[1]));
        for c in [set(&[1, 2]), set(&[1, 2]), set(&[1]), set(&[1, 2])] {
            assert_eq!(b.update_and_check(c), ChangeDecision::None);
        }
    }

    #[test]
    fn tracked_class_absent_everywhere_leaves() {
        let mut b = BufferState::new(4, set(&[1, 2]));
        let mut last = ChangeDecision::None;
        for _ in 0..4 {
            last = b.update_and_check(set(&[1]));
        }
        assert_eq!(last, ChangeDecision::Leave { classes: set(&[2]) });
        let mut b = BufferState::new(4, set(&[1, 2])).with_leave_handling(false);
        for _ in 0..4 {
            last = b.update_and_check(set(&[1]));
        }
        assert_eq!(last, ChangeDecision::None);
    }

    #[test]
    fn both_directions_at_once() {
        let mut b = BufferState::new(2, set(&[1]));
        b.update_and_check(set(&[3]));
        let d = b.update_and_check(set(&[3]));
        assert_eq!(d, ChangeDecision::Both { enter: set(&[3]), leave: set(&[1]) });
        assert_eq!((d.added(), d.removed()), (set(&[3]), set(&[1])));
    }

    #[test]
    fn reset_restarts_the_window() {
        let mut b = BufferState::new(4, set(&[1]));
        for _ in 0..4 {
            b.update_and_check(set(&[1, 2]));
        }
        b.reset(set(&[1, 2]), set(&[1, 2]));
        assert_eq!(b.len(), 1);
        assert_eq!(b.tracked(), &set(&[1, 2]));
        for _ in 0..3 {
            assert_eq!(b.update_and_check(set(&[1, 2])), ChangeDecision::None);
        }
    }

    proptest! {
        #[test]
        fn ring_buffer_agrees_with_window_oracle(
            cap in 1usize..6,
            tracked in proptest::collection::btree_set(0u8..5, 0..4),
            seq in proptest::collection::vec(proptest::collection::btree_set(0u8..5, 0..5), 1..20),
        ) {
            let mut b = BufferState::new(cap, tracked.clone());
            for i in 0..seq.len() {
                let d = b.update_and_check(seq[i].clone());
                prop_assert!(b.len() <= cap);
                let (enter, leave) = oracle(&seq[..=i], &tracked, cap);
                prop_assert_eq!(d.added(), enter);
                prop_assert_eq!(d.removed(), leave);
            }
        }
    }
}
