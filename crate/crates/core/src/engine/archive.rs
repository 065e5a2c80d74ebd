use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry<S, F> {
    pub solution: S,
    pub fitness: F,
    #[serde(skip)]
    seq: u64,
}

/// Capacity-bounded elitist set of unique solutions, stored worst → best
/// (descending fitness, since lower is better).
#[derive(Debug, Clone, PartialEq)]
pub struct Archive<S, F> {
    capacity: usize,
    entries: Vec<Entry<S, F>>,
    next_seq: u64,
}

impl<S: Clone + PartialEq, F: Scalar> Archive<S, F> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "archive capacity must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
            next_seq: 0,
        }
    }

    /// Archive holding `entries` (any order), truncated to capacity.
    pub fn from_entries(capacity: usize, entries: impl IntoIterator<Item = (S, F)>) -> Self {
        let mut a = Self::new(capacity);
        a.update(entries);
        a
    }

    /// Merges candidates and keeps the `capacity` best. Solutions already
    /// present (or repeated within the batch) are ignored. Among equal
    /// fitness the earlier-inserted entry ranks higher. Returns how many
    /// candidates survived into the archive.
    pub fn update(&mut self, candidates: impl IntoIterator<Item = (S, F)>) -> usize {
        let first_new = self.next_seq;
        for (solution, fitness) in candidates {
            if self.entries.iter().any(|e| e.solution == solution) {
                continue;
            }
            self.entries.push(Entry {
                solution,
                fitness,
                seq: self.next_seq,
            });
            self.next_seq += 1;
        }
        // best first, earlier insertion wins ties
        self.entries.sort_by(|a, b| {
            a.fitness
                .partial_cmp(&b.fitness)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.seq.cmp(&b.seq))
        });
        self.entries.truncate(self.capacity);
        self.entries.reverse();
        self.entries.iter().filter(|e| e.seq >= first_new).count()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in worst → best order.
    pub fn entries(&self) -> &[Entry<S, F>] {
        &self.entries
    }

    pub fn best(&self) -> Option<&Entry<S, F>> {
        self.entries.last()
    }

    pub fn worst(&self) -> Option<&Entry<S, F>> {
        self.entries.first()
    }

    pub fn fitnesses(&self) -> Vec<F> {
        self.entries.iter().map(|e| e.fitness).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn archive(values: &[(u32, f64)], cap: usize) -> Archive<u32, f64> {
        Archive::from_entries(cap, values.iter().copied())
    }

    #[test]
    fn elitist_replacement() {
        let mut a = archive(&[(1, 5.0), (2, 3.0), (3, 1.0)], 3);
        assert_eq!(a.fitnesses(), vec![5.0, 3.0, 1.0]);
        assert_eq!(a.update([(4, 0.5)]), 1);
        assert_eq!(a.fitnesses(), vec![3.0, 1.0, 0.5]);
        assert_eq!(a.best().unwrap().solution, 4);
    }

    #[test]
    fn worse_than_worst_is_dropped() {
        let mut a = archive(&[(1, 5.0), (2, 3.0), (3, 1.0)], 3);
        let before = a.clone();
        assert_eq!(a.update([(9, 7.0)]), 0);
        assert_eq!(a.entries(), before.entries());
    }

    #[test]
    fn duplicates_are_ignored() {
        let mut a = archive(&[(1, 5.0), (2, 3.0)], 3);
        let before = a.clone();
        assert_eq!(a.update([(2, 3.0)]), 0);
        assert_eq!(a.entries(), before.entries());
        assert_eq!(a.update([(7, 1.0), (7, 1.0)]), 1);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn ties_keep_earlier_entry() {
        let mut a = archive(&[(1, 2.0), (2, 1.0)], 2);
        a.update([(3, 1.0)]);
        let sols: Vec<u32> = a.entries().iter().map(|e| e.solution).collect();
        assert_eq!(sols, vec![3, 2]);
        a.update([(4, 2.0)]);
        assert_eq!(a.entries().iter().map(|e| e.solution).collect::<Vec<_>>(), vec![3, 2]);
    }
}
