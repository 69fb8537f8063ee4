//! Accumulated feature vectors for tree nodes.
//!
//! Node aggregates hold the elementwise sum of the vectors at their
//! descendant leaves. Leaf vectors are often very sparse (the synthetic
//! generator sets ~1% of bits), so sums are kept as sorted index/value
//! pairs until they grow past a fraction of the dimension, at which point
//! they switch to a dense buffer. All arithmetic visits indices in
//! ascending order, so repeated runs accumulate in the same order and
//! produce bit-identical results.

/// Sum of a set of `dim`-dimensional vectors, stored sparse or dense.
#[derive(Clone, Debug)]
pub enum SumVec {
    /// Sorted `(index, value)` pairs; no stored zeros.
    Sparse { dim: usize, entries: Vec<(u32, f64)> },
    /// Plain buffer of length `dim`.
    Dense(Vec<f64>),
}

/// Entry count above which a sparse sum is converted to dense storage.
fn spill_threshold(dim: usize) -> usize {
    (dim / 4).max(32)
}

impl SumVec {
    pub fn zeros(dim: usize) -> Self {
        SumVec::Sparse {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries: Vec<(u32, f64)> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .collect();
        if entries.len() > spill_threshold(values.len()) {
            SumVec::Dense(values.to_vec())
        } else {
            SumVec::Sparse {
                dim: values.len(),
                entries,
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SumVec::Sparse { dim, .. } => *dim,
            SumVec::Dense(v) => v.len(),
        }
    }

    /// Number of explicitly stored nonzero entries.
    pub fn nnz(&self) -> usize {
        match self {
            SumVec::Sparse { entries, .. } => entries.len(),
            SumVec::Dense(v) => v.iter().filter(|x| **x != 0.0).count(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        match self {
            SumVec::Sparse { entries, .. } => entries
                .binary_search_by_key(&(index as u32), |e| e.0)
                .map(|pos| entries[pos].1)
                .unwrap_or(0.0),
            SumVec::Dense(v) => v[index],
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            SumVec::Sparse { dim, entries } => {
                let mut out = vec![0.0; *dim];
                for &(i, v) in entries {
                    out[i as usize] = v;
                }
                out
            }
            SumVec::Dense(v) => v.clone(),
        }
    }

    /// Nonzero entries in ascending index order.
    pub fn nonzero_entries(&self) -> Vec<(u32, f64)> {
        match self {
            SumVec::Sparse { entries, .. } => entries.clone(),
            SumVec::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, x)| (i as u32, *x))
                .collect(),
        }
    }

    pub fn dot(&self, other: &SumVec) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        match (self, other) {
            (SumVec::Dense(a), SumVec::Dense(b)) => {
                a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
            }
            (SumVec::Dense(d), SumVec::Sparse { entries, .. })
            | (SumVec::Sparse { entries, .. }, SumVec::Dense(d)) => entries
                .iter()
                .map(|&(i, v)| v * d[i as usize])
                .sum(),
            (SumVec::Sparse { entries: a, .. }, SumVec::Sparse { entries: b, .. }) => {
                sparse_dot(a, b)
            }
        }
    }

    pub fn norm(&self) -> f64 {
        let sq: f64 = match self {
            SumVec::Sparse { entries, .. } => entries.iter().map(|&(_, v)| v * v).sum(),
            SumVec::Dense(v) => v.iter().map(|x| x * x).sum(),
        };
        sq.sqrt()
    }

    pub fn add_assign(&mut self, other: &SumVec) {
        self.merge(other, 1.0);
    }

    pub fn sub_assign(&mut self, other: &SumVec) {
        self.merge(other, -1.0);
    }

    fn merge(&mut self, other: &SumVec, sign: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        match self {
            SumVec::Dense(dst) => match other {
                SumVec::Dense(src) => {
                    for (d, s) in dst.iter_mut().zip(src.iter()) {
                        *d += sign * s;
                    }
                }
                SumVec::Sparse { entries, .. } => {
                    for &(i, v) in entries {
                        dst[i as usize] += sign * v;
                    }
                }
            },
            SumVec::Sparse { dim, entries } => {
                let dim = *dim;
                let merged = match other {
                    SumVec::Sparse {
                        entries: other_entries,
                        ..
                    } => merge_sorted(entries, other_entries, sign),
                    SumVec::Dense(src) => {
                        // Treat the dense side as a full entry list.
                        let other_entries: Vec<(u32, f64)> = src
                            .iter()
                            .enumerate()
                            .filter(|(_, v)| **v != 0.0)
                            .map(|(i, v)| (i as u32, *v))
                            .collect();
                        merge_sorted(entries, &other_entries, sign)
                    }
                };
                if merged.len() > spill_threshold(dim) {
                    let mut dense = vec![0.0; dim];
                    for &(i, v) in &merged {
                        dense[i as usize] = v;
                    }
                    *self = SumVec::Dense(dense);
                } else {
                    *entries = merged;
                }
            }
        }
    }
}

fn merge_sorted(a: &[(u32, f64)], b: &[(u32, f64)], sign: f64) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push((b[j].0, sign * b[j].1));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let v = a[i].1 + sign * b[j].1;
                if v != 0.0 {
                    out.push((a[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend(b[j..].iter().map(|&(k, v)| (k, sign * v)));
    out
}

fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.len() * 8 < large.len() {
        // Skewed sizes: binary-search the large side, narrowing as we go.
        let mut acc = 0.0;
        let mut lo = 0;
        for &(i, v) in small {
            match large[lo..].binary_search_by_key(&i, |e| e.0) {
                Ok(pos) => {
                    acc += v * large[lo + pos].1;
                    lo += pos + 1;
                }
                Err(pos) => lo += pos,
            }
            if lo >= large.len() {
                break;
            }
        }
        acc
    } else {
        let mut acc = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < small.len() && j < large.len() {
            match small[i].0.cmp(&large[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += small[i].1 * large[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}
