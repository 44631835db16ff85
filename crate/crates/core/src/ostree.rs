//! Order-statistics set over `0..n` backed by a Fenwick tree.
//!
//! Supports select-by-rank and remove in O(log n), which is what the
//! unfolding map builder needs for its shrinking position list.

#[derive(Clone, Debug)]
pub struct PositionSet {
    tree: Vec<u32>,
    len: usize,
    top_bit: usize,
}

impl PositionSet {
    /// A set holding every position in `0..n`.
    pub fn full(n: usize) -> Self {
        let mut tree = vec![0u32; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        PositionSet { tree, len: n, top_bit }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The `rank`-th smallest remaining position (0-based).
    pub fn select(&self, rank: usize) -> usize {
        assert!(rank < self.len, "rank {rank} out of range for {} elements", self.len);
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut remaining = rank as u32;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= remaining {
                pos = next;
                remaining -= self.tree[next];
            }
            step >>= 1;
        }
        // pos is the count of leading slots whose prefix sum is <= rank
        pos
    }

    /// Removes a position known to be present.
    pub fn remove(&mut self, position: usize) {
        let n = self.tree.len() - 1;
        let mut i = position + 1;
        while i <= n {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
        self.len -= 1;
    }

    /// Selects and removes in one call.
    pub fn take(&mut self, rank: usize) -> usize {
        let p = self.select(rank);
        self.remove(p);
        p
    }
}
