use std::collections::VecDeque;

/// Bounded FIFO of past tasks; the oldest entry is evicted on overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBuffer<T> {
    capacity: usize,
    entries: VecDeque<T>,
}

impl<T> TaskBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "task buffer capacity must be at least 1");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    /// Unbounded buffer.
    pub fn unbounded() -> Self {
        Self {
            capacity: usize::MAX,
            entries: VecDeque::new(),
        }
    }

    /// Append `task`, returning the evicted entry if the buffer was full.
    pub fn push(&mut self, task: T) -> Option<T> {
        self.entries.push_back(task);
        if self.entries.len() > self.capacity {
            self.entries.pop_front()
        } else {
            None
        }
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

    pub fn get(&self, i: usize) -> Option<&T> {
        self.entries.get(i)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter()
    }
}
