use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Least-recently-used cache of full kernel rows under a byte budget.
/// At least one row is always retained regardless of budget.
#[derive(Debug)]
pub struct KernelCache {
    rows: HashMap<usize, (Arc<[f64]>, u64)>,
    by_age: BTreeMap<u64, usize>,
    tick: u64,
    max_rows: usize,
    hits: u64,
    misses: u64,
}

impl KernelCache {
    pub fn new(budget_bytes: usize, row_len: usize) -> Self {
        let row_bytes = (row_len * std::mem::size_of::<f64>()).max(1);
        KernelCache {
            rows: HashMap::new(),
            by_age: BTreeMap::new(),
            tick: 0,
            max_rows: (budget_bytes / row_bytes).max(1),
            hits: 0,
            misses: 0,
        }
    }

    pub fn peek(&self, i: usize) -> Option<&Arc<[f64]>> {
        self.rows.get(&i).map(|(r, _)| r)
    }

    pub fn get_or_insert_with(&mut self, i: usize, compute: impl FnOnce() -> Vec<f64>) -> Arc<[f64]> {
        self.tick += 1;
        let tick = self.tick;
        if let Some((row, age)) = self.rows.get_mut(&i) {
            self.hits += 1;
            self.by_age.remove(age);
            *age = tick;
            self.by_age.insert(tick, i);
            return Arc::clone(row);
        }
        self.misses += 1;
        if self.rows.len() >= self.max_rows {
            if let Some((_, victim)) = self.by_age.pop_first() {
                self.rows.remove(&victim);
            }
        }
        let row: Arc<[f64]> = compute().into();
        self.rows.insert(i, (Arc::clone(&row), tick));
        self.by_age.insert(tick, i);
        row
    }

    pub fn stats(&self) -> (u64, u64) {
        (self.hits, self.misses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_least_recent() {
        let mut c = KernelCache::new(2 * 3 * 8, 3);
        c.get_or_insert_with(0, || vec![0.0; 3]);
        c.get_or_insert_with(1, || vec![1.0; 3]);
        c.get_or_insert_with(0, || unreachable!());
        c.get_or_insert_with(2, || vec![2.0; 3]);
        assert!(c.peek(0).is_some());
        assert!(c.peek(1).is_none());
        assert!(c.peek(2).is_some());
        assert_eq!(c.stats(), (1, 3));
    }

    #[test]
    fn tiny_budget_keeps_one_row() {
        let mut c = KernelCache::new(0, 100);
        c.get_or_insert_with(5, || vec![0.0; 100]);
        assert!(c.peek(5).is_some());
        c.get_or_insert_with(6, || vec![0.0; 100]);
        assert!(c.peek(5).is_none());
    }
}
