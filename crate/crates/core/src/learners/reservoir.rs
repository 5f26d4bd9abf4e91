use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fixed-capacity uniform sample of everything offered so far
/// (reservoir sampling, Algorithm R).
#[derive(Debug, Clone)]
pub struct ReservoirBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    seen: u64,
}

impl<T: Clone> ReservoirBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        ReservoirBuffer {
            capacity,
            items: Vec::with_capacity(capacity),
            seen: 0,
        }
    }

    pub fn offer(&mut self, item: T, rng: &mut ChaCha8Rng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
            return;
        }
        let j = rng.gen_range(0..self.seen);
        if j < self.capacity as u64 {
            self.items[j as usize] = item;
        }
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// `count` items drawn uniformly: without replacement when the buffer
    /// holds enough, otherwise with replacement. Empty buffer yields nothing.
    pub fn sample(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
        if self.items.is_empty() || count == 0 {
            return Vec::new();
        }
        if self.items.len() >= count {
            rand::seq::index::sample(rng, self.items.len(), count)
                .into_iter()
                .map(|i| self.items[i].clone())
                .collect()
        } else {
            (0..count)
                .map(|_| self.items[rng.gen_range(0..self.items.len() as u64) as usize].clone())
                .collect()
        }
    }
}
