//! Ordered multiset of past observations with O(log n) insertion and rank
//! queries, plus an optional fixed-size sliding window with FIFO eviction.
//!
//! The backing structure is an order-statistic treap stored in an index
//! arena: nodes are keyed by value, carry a multiplicity count for ties, and
//! each subtree tracks its total multiplicity so `count_lt` / `count_le`
//! resolve in one root-to-leaf descent. Removed slots are recycled through a
//! free list, so windowed stores keep their memory bounded by the window.

use std::collections::VecDeque;

use crate::{Error, Result};

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    value: f64,
    priority: u64,
    count: usize,
    size: usize,
    left: u32,
    right: u32,
}

/// Ordered multiset answering "how many stored values are below x" queries.
#[derive(Debug, Clone)]
pub struct RankStore {
    nodes: Vec<Node>,
    free: Vec<u32>,
    root: u32,
    len: usize,
    window: Option<usize>,
    arrivals: VecDeque<f64>,
    prng: u64,
}

impl Default for RankStore {
    fn default() -> Self {
        Self::new()
    }
}

impl RankStore {
    /// Unbounded store.
    pub fn new() -> Self {
        RankStore {
            nodes: Vec::new(),
            free: Vec::new(),
            root: NIL,
            len: 0,
            window: None,
            arrivals: VecDeque::new(),
            prng: 0x853c_49e6_748f_ea9b,
        }
    }

    /// Store limited to the `window` most recent insertions.
    pub fn with_window(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter {
                name: "window",
                value: 0.0,
            });
        }
        let mut s = Self::new();
        s.window = Some(window);
        s.arrivals.reserve(window);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    /// Inserts one observation, evicting the oldest first when the window is
    /// full.
    pub fn insert(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        if let Some(w) = self.window {
            if self.len == w {
                let old = self.arrivals.pop_front().expect("window > 0");
                self.root = self.remove_at(self.root, old);
                self.len -= 1;
            }
            self.arrivals.push_back(x);
        }
        self.root = self.insert_at(self.root, x);
        self.len += 1;
        Ok(())
    }

    /// Number of stored values strictly below `x`.
    pub fn count_lt(&self, x: f64) -> Result<usize> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        let mut acc = 0;
        let mut idx = self.root;
        while idx != NIL {
            let n = &self.nodes[idx as usize];
            if x <= n.value {
                idx = n.left;
            } else {
                acc += self.subtree_size(n.left) + n.count;
                idx = n.right;
            }
        }
        Ok(acc)
    }

    /// Number of stored values less than or equal to `x`.
    pub fn count_le(&self, x: f64) -> Result<usize> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        let mut acc = 0;
        let mut idx = self.root;
        while idx != NIL {
            let n = &self.nodes[idx as usize];
            if x < n.value {
                idx = n.left;
            } else {
                acc += self.subtree_size(n.left) + n.count;
                idx = n.right;
            }
        }
        Ok(acc)
    }

    /// Multiplicity of `x` among the stored values.
    pub fn count_eq(&self, x: f64) -> Result<usize> {
        Ok(self.count_le(x)? - self.count_lt(x)?)
    }

    // ---- treap internals ----

    #[inline]
    fn subtree_size(&self, idx: u32) -> usize {
        if idx == NIL {
            0
        } else {
            self.nodes[idx as usize].size
        }
    }

    #[inline]
    fn pull(&mut self, idx: u32) {
        let i = idx as usize;
        let s = self.nodes[i].count
            + self.subtree_size(self.nodes[i].left)
            + self.subtree_size(self.nodes[i].right);
        self.nodes[i].size = s;
    }

    fn next_priority(&mut self) -> u64 {
        // splitmix64
        self.prng = self.prng.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.prng;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    fn alloc(&mut self, value: f64) -> u32 {
        let priority = self.next_priority();
        let node = Node {
            value,
            priority,
            count: 1,
            size: 1,
            left: NIL,
            right: NIL,
        };
        if let Some(idx) = self.free.pop() {
            self.nodes[idx as usize] = node;
            idx
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    fn rotate_right(&mut self, idx: u32) -> u32 {
        let l = self.nodes[idx as usize].left;
        self.nodes[idx as usize].left = self.nodes[l as usize].right;
        self.nodes[l as usize].right = idx;
        self.pull(idx);
        self.pull(l);
        l
    }

    fn rotate_left(&mut self, idx: u32) -> u32 {
        let r = self.nodes[idx as usize].right;
        self.nodes[idx as usize].right = self.nodes[r as usize].left;
        self.nodes[r as usize].left = idx;
        self.pull(idx);
        self.pull(r);
        r
    }

    fn insert_at(&mut self, idx: u32, value: f64) -> u32 {
        if idx == NIL {
            return self.alloc(value);
        }
        let i = idx as usize;
        if value == self.nodes[i].value {
            self.nodes[i].count += 1;
            self.nodes[i].size += 1;
            return idx;
        }
        if value < self.nodes[i].value {
            let child = self.insert_at(self.nodes[i].left, value);
            self.nodes[i].left = child;
            if self.nodes[child as usize].priority > self.nodes[i].priority {
                return self.rotate_right(idx);
            }
        } else {
            let child = self.insert_at(self.nodes[i].right, value);
            self.nodes[i].right = child;
            if self.nodes[child as usize].priority > self.nodes[i].priority {
                return self.rotate_left(idx);
            }
        }
        self.pull(idx);
        idx
    }

    // Removes one multiplicity of `value`; the caller guarantees presence
    // (eviction only replays values previously inserted).
    fn remove_at(&mut self, idx: u32, value: f64) -> u32 {
        debug_assert!(idx != NIL, "evicted value must be present");
        let i = idx as usize;
        if value == self.nodes[i].value {
            if self.nodes[i].count > 1 {
                self.nodes[i].count -= 1;
                self.nodes[i].size -= 1;
                return idx;
            }
            let (l, r) = (self.nodes[i].left, self.nodes[i].right);
            if l == NIL && r == NIL {
                self.free.push(idx);
                return NIL;
            }
            // Rotate the higher-priority child up, then delete one level down.
            let higher_right = l == NIL
                || (r != NIL
                    && self.nodes[r as usize].priority > self.nodes[l as usize].priority);
            if higher_right {
                let top = self.rotate_left(idx);
                let child = self.remove_at(self.nodes[top as usize].left, value);
                self.nodes[top as usize].left = child;
                self.pull(top);
                top
            } else {
                let top = self.rotate_right(idx);
                let child = self.remove_at(self.nodes[top as usize].right, value);
                self.nodes[top as usize].right = child;
                self.pull(top);
                top
            }
        } else if value < self.nodes[i].value {
            let child = self.remove_at(self.nodes[i].left, value);
            self.nodes[i].left = child;
            self.pull(idx);
            idx
        } else {
            let child = self.remove_at(self.nodes[i].right, value);
            self.nodes[i].right = child;
            self.pull(idx);
            idx
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Brute-force reference: a plain vector with linear scans.
    struct Naive {
        window: Option<usize>,
        values: VecDeque<f64>,
    }

    impl Naive {
        fn new(window: Option<usize>) -> Self {
            Naive {
                window,
                values: VecDeque::new(),
            }
        }
        fn insert(&mut self, x: f64) {
            if let Some(w) = self.window {
                if self.values.len() == w {
                    self.values.pop_front();
                }
            }
            self.values.push_back(x);
        }
        fn count_lt(&self, x: f64) -> usize {
            self.values.iter().filter(|&&v| v < x).count()
        }
        fn count_le(&self, x: f64) -> usize {
            self.values.iter().filter(|&&v| v <= x).count()
        }
    }

    #[test]
    fn basic_inserts_and_counts() {
        let mut s = RankStore::new();
        s.insert(4.6).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.count_le(5.1).unwrap(), 1);
        s.insert(5.1).unwrap();
        assert_eq!(s.count_le(3.9).unwrap(), 0);
        assert_eq!(RankStore::new().count_le(123.0).unwrap(), 0);
    }

    #[test]
    fn tie_counts() {
        let mut s = RankStore::new();
        for v in [4.0, 4.0, 5.0] {
            s.insert(v).unwrap();
        }
        assert_eq!(s.count_eq(4.0).unwrap(), 2);
        assert_eq!(s.count_lt(5.0).unwrap(), 2);
        assert_eq!(s.count_lt(4.0).unwrap(), 0);
        assert_eq!(RankStore::new().count_lt(0.0).unwrap(), 0);
    }

    #[test]
    fn fifo_eviction() {
        let mut s = RankStore::with_window(2).unwrap();
        s.insert(4.6).unwrap();
        s.insert(5.1).unwrap();
        s.insert(3.9).unwrap();
        assert_eq!(s.len(), 2);
        // 4.6 evicted: remaining {5.1, 3.9}
        assert_eq!(s.count_eq(4.6).unwrap(), 0);
        assert_eq!(s.count_eq(5.1).unwrap(), 1);
        assert_eq!(s.count_eq(3.9).unwrap(), 1);
    }

    #[test]
    fn walkthrough_stream_size() {
        let mut s = RankStore::new();
        for v in [4.6, 5.1, 3.9, 4.4, 4.8, 6.6, 5.3, 8.3, 4.7, 5.0] {
            s.insert(v).unwrap();
        }
        assert_eq!(s.len(), 10);
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = RankStore::new();
        assert!(s.insert(f64::NAN).is_err());
        assert!(s.insert(f64::INFINITY).is_err());
        assert!(s.count_lt(f64::NAN).is_err());
        assert!(RankStore::with_window(0).is_err());
    }

    #[test]
    fn count_le_of_max_is_size() {
        let mut s = RankStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            s.insert(rng.gen_range(-10.0..10.0)).unwrap();
        }
        assert_eq!(s.count_le(f64::MAX).unwrap(), s.len());
        let x = 0.37;
        assert_eq!(
            s.count_le(x).unwrap(),
            s.count_lt(x).unwrap() + s.count_eq(x).unwrap()
        );
    }

    fn exercise_against_naive(window: Option<usize>, seed: u64, ops: usize) {
        let mut store = match window {
            Some(w) => RankStore::with_window(w).unwrap(),
            None => RankStore::new(),
        };
        let mut naive = Naive::new(window);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for op in 0..ops {
            // Coarse values force plenty of ties.
            let x = (rng.gen_range(-50i32..50) as f64) * 0.5;
            if rng.gen_bool(0.6) {
                store.insert(x).unwrap();
                naive.insert(x);
            } else {
                assert_eq!(
                    store.count_lt(x).unwrap(),
                    naive.count_lt(x),
                    "count_lt({x}) mismatch at op {op}"
                );
                assert_eq!(
                    store.count_le(x).unwrap(),
                    naive.count_le(x),
                    "count_le({x}) mismatch at op {op}"
                );
            }
            assert_eq!(store.len(), naive.values.len());
        }
    }

    #[test]
    fn matches_naive_oracle_unwindowed() {
        exercise_against_naive(None, 101, 10_000);
    }

    #[test]
    fn matches_naive_oracle_windowed() {
        exercise_against_naive(Some(64), 102, 10_000);
        exercise_against_naive(Some(1), 103, 2_000);
    }

    #[test]
    fn windowed_memory_stays_bounded() {
        let w = 128;
        let mut s = RankStore::with_window(w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20_000 {
            s.insert(rng.gen::<f64>()).unwrap();
        }
        assert_eq!(s.len(), w);
        // arena never grows past the live window (plus the slot in flight)
        assert!(s.nodes.len() <= w + 1, "arena holds {} nodes", s.nodes.len());
        assert!(s.arrivals.len() == w);
    }

    #[test]
    fn amortized_cost_scales_logarithmically() {
        use std::time::Instant;

        fn run(n: usize) -> f64 {
            let mut s = RankStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            let data: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let t0 = Instant::now();
            let mut acc = 0usize;
            for &x in &data {
                acc += s.count_lt(x).unwrap();
                s.insert(x).unwrap();
            }
            std::hint::black_box(acc);
            t0.elapsed().as_secs_f64()
        }

        run(20_000); // warm-up
        let small = run(100_000);
        let large = run(1_000_000);
        assert!(
            large <= 20.0 * small,
            "10x more ops took {:.1}x longer",
            large / small
        );
    }
}
