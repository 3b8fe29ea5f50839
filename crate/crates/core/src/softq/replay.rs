//! Fixed-capacity ring of transitions with uniform minibatch sampling.

use rand::seq::index;
use rand::Rng;

/// One transition. Only local features are stored; the mean-field context
/// is looked up by `tag` when the minibatch is assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub local: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_local: Vec<f64>,
    pub tag: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Experience>,
    /// Slot the next push overwrites once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity), head: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Experience] {
        &self.items
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.head] = e;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn clear(&mut self) {
        self.items.clear();
        self.head = 0;
    }

    /// Indices of a minibatch drawn uniformly without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        index::sample(rng, self.items.len(), batch.min(self.items.len())).into_vec()
    }

    pub(crate) fn restore(capacity: usize, items: Vec<Experience>, head: usize) -> Self {
        Self { capacity, items, head }
    }
}
