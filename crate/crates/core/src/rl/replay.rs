//! Proportional prioritized replay over a sum tree.

use rand::Rng;

use crate::error::{Error, Result};

/// Binary sum tree over `capacity` leaves. Internal nodes are recomputed from
/// their children on every update, so the root never accumulates drift.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "sum tree capacity must be positive");
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity - 1],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[0]
    }

    pub fn leaf(&self, index: usize) -> f64 {
        self.nodes[index + self.capacity - 1]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let mut node = index + self.capacity - 1;
        self.nodes[node] = value;
        while node > 0 {
            node = (node - 1) / 2;
            let left = 2 * node + 1;
            let right = left + 1;
            self.nodes[node] = self.nodes[left] + self.nodes.get(right).copied().unwrap_or(0.0);
        }
    }

    /// Leaf whose cumulative range contains `mass` (clamped into `[0, total)`).
    pub fn find(&self, mass: f64) -> usize {
        let mut mass = mass.clamp(0.0, self.total());
        let mut node = 0;
        while node < self.capacity - 1 {
            let left = 2 * node + 1;
            let right = left + 1;
            if mass < self.nodes[left] || self.nodes.get(right).is_none_or(|r| *r <= 0.0) {
                node = left;
            } else {
                mass -= self.nodes[left];
                node = right;
            }
        }
        node - (self.capacity - 1)
    }
}

/// A sampled mini-batch: slot indices, normalised importance weights and items.
#[derive(Debug)]
pub struct SampledBatch<'a, T> {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub items: Vec<&'a T>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    tree: SumTree,
    items: Vec<Option<T>>,
    next: usize,
    len: usize,
    alpha: f64,
    max_priority: f64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        Self {
            tree: SumTree::new(capacity),
            items: (0..capacity).map(|_| None).collect(),
            next: 0,
            len: 0,
            alpha,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.tree.capacity()
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn items(&self) -> impl Iterator<Item = &T> {
        self.items.iter().flatten()
    }

    /// Insert with the largest priority seen so far, evicting the oldest item at capacity.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.next;
        self.items[slot] = Some(item);
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        self.next = (self.next + 1) % self.capacity();
        self.len = (self.len + 1).min(self.capacity());
        slot
    }

    /// Raw priority `p > 0` for a slot; the tree stores `p^alpha`.
    pub fn update_priority(&mut self, slot: usize, priority: f64) -> Result<()> {
        if slot >= self.capacity() || self.items[slot].is_none() {
            return Err(Error::InvalidArgument(format!("slot {slot} is empty")));
        }
        if !(priority > 0.0) || !priority.is_finite() {
            return Err(Error::InvalidArgument(format!("priority must be positive, got {priority}")));
        }
        self.max_priority = self.max_priority.max(priority);
        self.tree.set(slot, priority.powf(self.alpha));
        Ok(())
    }

    pub fn priority(&self, slot: usize) -> f64 {
        self.tree.leaf(slot).powf(1.0 / self.alpha)
    }

    /// Stratified proportional sampling of `k` slots with importance weights
    /// `(N P(i))^-beta / max_j (N P(j))^-beta`.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, beta: f64, rng: &mut R) -> Result<SampledBatch<'_, T>> {
        if self.is_empty() {
            return Err(Error::InvalidState("cannot sample from an empty replay buffer".into()));
        }
        let total = self.tree.total();
        let segment = total / k as f64;
        let mut indices = Vec::with_capacity(k);
        for s in 0..k {
            let mass = (s as f64 + rng.random::<f64>()) * segment;
            let mut slot = self.tree.find(mass);
            if self.items[slot].is_none() {
                slot = (0..self.capacity())
                    .rev()
                    .find(|i| self.items[*i].is_some() && self.tree.leaf(*i) > 0.0)
                    .unwrap_or(0);
            }
            indices.push(slot);
        }
        let n = self.len as f64;
        let raw: Vec<f64> = indices
            .iter()
            .map(|i| (n * self.tree.leaf(*i) / total).powf(-beta))
            .collect();
        let max = raw.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        Ok(SampledBatch {
            weights: raw.iter().map(|w| w / max).collect(),
            items: indices.iter().map(|i| self.items[*i].as_ref().expect("sampled slot")).collect(),
            indices,
        })
    }
}
