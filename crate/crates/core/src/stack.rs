//! The Open Stack: a capacity-bounded double-ended priority queue of search
//! paths.
//!
//! Entries are kept in an interval heap. Node `k` owns slots `2k` (low end of
//! its interval) and `2k + 1` (high end), and every node's interval contains
//! the intervals of its children, so the best entry sits in slot 0 and the
//! worst in slot 1. A position map from handle to slot gives exact
//! removal by handle, which the decoder needs for path merging and which keeps
//! the live count exact for capacity enforcement.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum StackError {
    #[error("the open stack is empty")]
    Empty,
    #[error("handle {0} is not live in the open stack")]
    StaleHandle(u32),
}

/// Opaque identifier of the path an entry refers to, assigned by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Handle(pub u32);

/// Ordering key: ascending metric, then descending level, then ascending
/// tiebreak. An insertion sequence number makes the order total.
#[derive(Debug, Clone, Copy)]
pub struct PriorityKey {
    pub metric: f64,
    pub level: u32,
    pub tiebreak: u64,
    seq: u64,
}

impl PriorityKey {
    pub fn new(metric: f64, level: u32, tiebreak: u64) -> Self {
        Self { metric, level, tiebreak, seq: 0 }
    }

    /// Insertion sequence number, set by the stack on push.
    pub fn seq(&self) -> u64 {
        self.seq
    }
}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.metric
            .total_cmp(&other.metric)
            .then_with(|| other.level.cmp(&self.level))
            .then_with(|| self.tiebreak.cmp(&other.tiebreak))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for PriorityKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PriorityKey {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackEntry {
    pub key: PriorityKey,
    pub handle: Handle,
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Default)]
pub struct OpenStack {
    heap: Vec<StackEntry>,
    pos: Vec<u32>,
    capacity: Option<usize>,
    peak: usize,
    seq: u64,
}

#[inline]
fn parent_low(i: usize) -> usize {
    debug_assert!(i >= 2);
    ((i / 2 - 1) / 2) * 2
}

impl OpenStack {
    pub fn new() -> Self {
        Self::default()
    }

    /// A stack that evicts its worst entry whenever it would exceed `capacity`.
    pub fn with_capacity_limit(capacity: usize) -> Self {
        assert!(capacity >= 1, "open stack capacity must be positive");
        Self { capacity: Some(capacity), ..Self::default() }
    }

    pub fn set_capacity_limit(&mut self, capacity: Option<usize>) {
        assert!(capacity != Some(0), "open stack capacity must be positive");
        self.capacity = capacity;
    }

    pub fn capacity_limit(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Largest live size observed since construction or the last [`OpenStack::clear`].
    pub fn peak_size(&self) -> usize {
        self.peak
    }

    pub fn contains(&self, handle: Handle) -> bool {
        self.pos.get(handle.0 as usize).is_some_and(|&p| p != NIL)
    }

    pub fn peek_best(&self) -> Option<&StackEntry> {
        self.heap.first()
    }

    pub fn peek_worst(&self) -> Option<&StackEntry> {
        self.heap.get(1).or(self.heap.first())
    }

    /// Empties the stack and resets the peak, keeping allocations.
    pub fn clear(&mut self) {
        for e in &self.heap {
            self.pos[e.handle.0 as usize] = NIL;
        }
        self.heap.clear();
        self.peak = 0;
        self.seq = 0;
    }

    /// Inserts an entry; on overflow the worst live entry (possibly this one)
    /// is evicted and returned.
    pub fn push(&mut self, key: PriorityKey, handle: Handle) -> Option<StackEntry> {
        debug_assert!(!key.metric.is_nan());
        assert!(handle.0 != NIL, "handle value reserved");
        let h = handle.0 as usize;
        if h >= self.pos.len() {
            self.pos.resize((h + 1).max(2 * self.pos.len()), NIL);
        }
        assert!(self.pos[h] == NIL, "handle {h} pushed twice");

        let key = PriorityKey { seq: self.seq, ..key };
        self.seq += 1;
        let i = self.heap.len();
        self.heap.push(StackEntry { key, handle });
        self.pos[h] = i as u32;
        self.sift_in(i);

        let evicted = match self.capacity {
            Some(cap) if self.heap.len() > cap => self.pop_worst(),
            _ => None,
        };
        self.peak = self.peak.max(self.heap.len());
        evicted
    }

    pub fn pop_best(&mut self) -> Result<StackEntry, StackError> {
        if self.heap.is_empty() {
            return Err(StackError::Empty);
        }
        Ok(self.take_low_root())
    }

    pub fn pop_worst(&mut self) -> Option<StackEntry> {
        match self.heap.len() {
            0 => None,
            1 => Some(self.take_last()),
            _ => Some(self.take_high_root()),
        }
    }

    /// Removes the live entry for `handle`.
    pub fn remove(&mut self, handle: Handle) -> Result<StackEntry, StackError> {
        if !self.contains(handle) {
            return Err(StackError::StaleHandle(handle.0));
        }
        let mut i = self.pos[handle.0 as usize] as usize;
        // Float the entry to the root as if its key were -inf (low slot) or
        // +inf (high slot), then remove it from there.
        if i.is_multiple_of(2) {
            while i >= 2 {
                let p = parent_low(i);
                self.swap(i, p);
                i = p;
            }
            Ok(self.take_low_root())
        } else {
            while i >= 2 {
                let p = parent_low(i) + 1;
                self.swap(i, p);
                i = p;
            }
            Ok(self.take_high_root())
        }
    }

    /// Live entries in heap order (not sorted).
    pub fn iter(&self) -> impl Iterator<Item = &StackEntry> {
        self.heap.iter()
    }

    #[inline]
    fn less(&self, a: usize, b: usize) -> bool {
        self.heap[a].key < self.heap[b].key
    }

    #[inline]
    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a].handle.0 as usize] = a as u32;
        self.pos[self.heap[b].handle.0 as usize] = b as u32;
    }

    fn take_last(&mut self) -> StackEntry {
        let e = self.heap.pop().expect("nonempty");
        self.pos[e.handle.0 as usize] = NIL;
        e
    }

    fn take_low_root(&mut self) -> StackEntry {
        let last = self.heap.len() - 1;
        self.swap(0, last);
        let e = self.take_last();
        if !self.heap.is_empty() {
            self.sift_down_low(0);
        }
        e
    }

    fn take_high_root(&mut self) -> StackEntry {
        let last = self.heap.len() - 1;
        self.swap(1, last);
        let e = self.take_last();
        if self.heap.len() > 1 {
            self.sift_down_high(1);
        }
        e
    }

    /// Restores order after appending slot `i`.
    fn sift_in(&mut self, i: usize) {
        if i % 2 == 1 {
            if self.less(i, i - 1) {
                self.swap(i, i - 1);
                self.bubble_up_low(i - 1);
            } else {
                self.bubble_up_high(i);
            }
            return;
        }
        if i < 2 {
            return;
        }
        let p = parent_low(i);
        if self.less(i, p) {
            self.swap(i, p);
            self.bubble_up_low(p);
        } else if self.less(p + 1, i) {
            self.swap(i, p + 1);
            self.bubble_up_high(p + 1);
        }
    }

    fn bubble_up_low(&mut self, mut i: usize) {
        while i >= 2 {
            let p = parent_low(i);
            if !self.less(i, p) {
                break;
            }
            self.swap(i, p);
            i = p;
        }
    }

    fn bubble_up_high(&mut self, mut i: usize) {
        while i >= 2 {
            let p = parent_low(i) + 1;
            if !self.less(p, i) {
                break;
            }
            self.swap(i, p);
            i = p;
        }
    }

    fn sift_down_low(&mut self, mut i: usize) {
        let len = self.heap.len();
        loop {
            if i + 1 < len && self.less(i + 1, i) {
                self.swap(i, i + 1);
            }
            let first = 2 * i + 2;
            if first >= len {
                break;
            }
            let second = first + 2;
            let c = if second < len && self.less(second, first) { second } else { first };
            if !self.less(c, i) {
                break;
            }
            self.swap(i, c);
            i = c;
        }
    }

    fn sift_down_high(&mut self, mut i: usize) {
        let len = self.heap.len();
        loop {
            if self.less(i, i - 1) {
                self.swap(i, i - 1);
            }
            let first = 2 * (i - 1) + 2;
            if first >= len {
                break;
            }
            let high = |c: usize| if c + 1 < len { c + 1 } else { c };
            let mut c = high(first);
            let second = first + 2;
            if second < len && self.less(c, high(second)) {
                c = high(second);
            }
            if !self.less(i, c) {
                break;
            }
            self.swap(i, c);
            if c % 2 == 0 {
                // single-entry leaf
                break;
            }
            i = c;
        }
    }

    #[cfg(test)]
    fn check_invariants(&self) {
        let len = self.heap.len();
        for i in 0..len {
            assert_eq!(self.pos[self.heap[i].handle.0 as usize] as usize, i);
            if i % 2 == 0 && i + 1 < len {
                assert!(!self.less(i + 1, i), "node order at {i}");
            }
            if i >= 2 {
                let p = parent_low(i);
                assert!(!self.less(i, p), "low bound at {i}");
                assert!(!self.less(p + 1, i), "high bound at {i}");
            }
        }
    }
}
