//! Longest common extension queries via suffix array, LCP array and a
//! sparse-table range minimum.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Lce {
    len: usize,
    rank: Vec<usize>,
    /// `table[k][i]` = min of `lcp[i .. i + 2^k]`
    table: Vec<Vec<usize>>,
}

/// Prefix doubling with counting sorts, O(n log n).
fn suffix_array(s: &[u32]) -> Vec<usize> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let mut letters = s.to_vec();
    letters.sort_unstable();
    letters.dedup();
    let mut rank: Vec<usize> = s
        .iter()
        .map(|c| letters.binary_search(c).expect("letter"))
        .collect();
    let mut classes = letters.len();
    let mut sa: Vec<usize> = (0..n).collect();
    sa.sort_unstable_by_key(|&i| rank[i]);
    let mut tmp = vec![0usize; n];
    let mut second = Vec::with_capacity(n);
    let mut count = Vec::new();
    let mut k = 1;
    while classes < n {
        // order by the rank of i + k; suffixes shorter than k come first
        second.clear();
        second.extend(n.saturating_sub(k)..n);
        second.extend(sa.iter().filter(|&&p| p >= k).map(|&p| p - k));
        // stable counting sort by the rank of i
        count.clear();
        count.resize(classes + 1, 0);
        for &i in &second {
            count[rank[i] + 1] += 1;
        }
        for c in 1..=classes {
            count[c] += count[c - 1];
        }
        for &i in &second {
            sa[count[rank[i]]] = i;
            count[rank[i]] += 1;
        }
        let key = |i: usize, rank: &[usize]| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        tmp[sa[0]] = 0;
        classes = 1;
        for w in 1..n {
            if key(sa[w - 1], &rank) != key(sa[w], &rank) {
                classes += 1;
            }
            tmp[sa[w]] = classes - 1;
        }
        std::mem::swap(&mut rank, &mut tmp);
        k *= 2;
    }
    sa
}

impl Lce {
    pub fn new(u: &[u32]) -> Lce {
        let n = u.len();
        let sa = suffix_array(u);
        let mut rank = vec![0usize; n];
        for (i, &p) in sa.iter().enumerate() {
            rank[p] = i;
        }
        // Kasai: lcp[i] = lcp of suffixes sa[i] and sa[i+1]
        let mut lcp = vec![0usize; n.saturating_sub(1)];
        let mut h = 0usize;
        for p in 0..n {
            if rank[p] + 1 < n {
                let q = sa[rank[p] + 1];
                while p + h < n && q + h < n && u[p + h] == u[q + h] {
                    h += 1;
                }
                lcp[rank[p]] = h;
                h = h.saturating_sub(1);
            } else {
                h = 0;
            }
        }
        let mut table = vec![lcp];
        let mut width = 1;
        while 2 * width <= table[0].len() {
            let prev = table.last().expect("level");
            let next: Vec<usize> = (0..prev.len() - width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            table.push(next);
            width *= 2;
        }
        Lce { len: n, rank, table }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Length of the longest common prefix of the suffixes starting at the
    /// 1-based positions `i` and `j`.
    pub fn query(&self, i: usize, j: usize) -> Result<usize> {
        if i == 0 || j == 0 || i > self.len || j > self.len {
            return Err(Error::invalid(format!(
                "lce position out of range: ({i},{j}) for length {}",
                self.len
            )));
        }
        if i == j {
            return Ok(self.len - i + 1);
        }
        let (a, b) = {
            let (ra, rb) = (self.rank[i - 1], self.rank[j - 1]);
            (ra.min(rb), ra.max(rb))
        };
        // min over lcp[a .. b)
        let span = b - a;
        let k = usize::BITS as usize - 1 - span.leading_zeros() as usize;
        Ok(self.table[k][a].min(self.table[k][b - (1 << k)]))
    }
}
