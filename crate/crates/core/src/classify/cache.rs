//! Least-recently-used cache of kernel matrix rows.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

pub(crate) struct RowCache {
    capacity: usize,
    clock: u64,
    rows: HashMap<usize, (Arc<[f64]>, u64)>,
    by_use: BTreeMap<u64, usize>,
    pub(crate) hits: u64,
    pub(crate) misses: u64,
}

impl RowCache {
    /// Holds at least two rows whatever the budget, since every SMO step
    /// touches two.
    pub(crate) fn with_budget(bytes: usize, row_len: usize) -> Self {
        let per_row = (row_len * std::mem::size_of::<f64>()).max(1);
        Self::with_rows((bytes / per_row).max(2))
    }

    pub(crate) fn with_rows(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(2),
            clock: 0,
            rows: HashMap::new(),
            by_use: BTreeMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub(crate) fn get_or_insert_with(
        &mut self,
        key: usize,
        fill: impl FnOnce() -> Vec<f64>,
    ) -> Arc<[f64]> {
        self.clock += 1;
        if let Some((row, stamp)) = self.rows.get_mut(&key) {
            self.by_use.remove(stamp);
            *stamp = self.clock;
            self.by_use.insert(self.clock, key);
            self.hits += 1;
            return Arc::clone(row);
        }
        self.misses += 1;
        if self.rows.len() >= self.capacity {
            if let Some((_, oldest)) = self.by_use.pop_first() {
                self.rows.remove(&oldest);
            }
        }
        let row: Arc<[f64]> = fill().into();
        self.rows.insert(key, (Arc::clone(&row), self.clock));
        self.by_use.insert(self.clock, key);
        row
    }

    #[cfg(test)]
    fn contains(&self, key: usize) -> bool {
        self.rows.contains_key(&key)
    }
}
