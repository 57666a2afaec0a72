use std::collections::VecDeque;

/// Bounded first-in-first-out line of sorted droplet ids.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageLine {
    capacity: usize,
    contents: VecDeque<u64>,
    evicted: u64,
}

impl StorageLine {
    pub const DEFAULT_CAPACITY: usize = 30;

    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            contents: VecDeque::with_capacity(capacity),
            evicted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    /// Total number of ids pushed out the far end so far.
    pub fn evicted_count(&self) -> u64 {
        self.evicted
    }

    /// Oldest first.
    pub fn contents(&self) -> impl Iterator<Item = u64> + '_ {
        self.contents.iter().copied()
    }

    /// Appends `id`; when the line is full the oldest id is evicted and returned.
    pub fn store(&mut self, id: u64) -> Option<u64> {
        if self.capacity == 0 {
            self.evicted += 1;
            return Some(id);
        }
        let out = if self.contents.len() == self.capacity {
            self.evicted += 1;
            self.contents.pop_front()
        } else {
            None
        };
        self.contents.push_back(id);
        out
    }

    /// Releases the oldest droplet.
    pub fn pop(&mut self) -> Option<u64> {
        self.contents.pop_front()
    }
}

impl Default for StorageLine {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}
