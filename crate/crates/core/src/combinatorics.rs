//! Small counting helpers and a lexicographic k-subset walker.

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Falling factorial `n (n-1) ... (n-m+1)` as a float.
pub fn falling_factorial(n: f64, m: usize) -> f64 {
    (0..m).map(|i| n - i as f64).product()
}

pub fn factorial(m: usize) -> f64 {
    (1..=m).map(|i| i as f64).product()
}

/// Visit every `size`-subset of `pool` in lexicographic order of positions.
/// The callback returns `false` to stop early.
pub fn for_each_combination<F>(pool: &[u32], size: usize, mut visit: F)
where
    F: FnMut(&[u32]) -> bool,
{
    let n = pool.len();
    if size > n {
        return;
    }
    if size == 0 {
        visit(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    let mut buf: Vec<u32> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        if !visit(&buf) {
            return;
        }
        // advance the rightmost index that still has room
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - size + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        buf[i] = pool[idx[i]];
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
            buf[j] = pool[idx[j]];
        }
    }
}

/// All `size`-subsets of `pool`, materialized.
pub fn combinations(pool: &[u32], size: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for_each_combination(pool, size, |c| {
        out.push(c.to_vec());
        true
    });
    out
}

/// Number of families of `s` distinct `m`-subsets of `[n]` whose union has at
/// most `max_union` vertices.
///
/// Inclusion-exclusion over the exact union size `u`: the families of
/// `m`-subsets of a fixed `u`-set covering all of it number
/// `sum_j (-1)^(u-j) C(u,j) C(C(j,m), s)`.
pub fn bounded_union_families(n: usize, m: usize, s: usize, max_union: usize) -> u128 {
    let mut total: i128 = 0;
    for u in m..=max_union.min(n) {
        let mut exact: i128 = 0;
        for j in 0..=u {
            let inner = binomial(binomial(j as u64, m as u64) as u64, s as u64);
            let term = (binomial(u as u64, j as u64) as i128).saturating_mul(inner as i128);
            if (u - j) % 2 == 0 {
                exact = exact.saturating_add(term);
            } else {
                exact = exact.saturating_sub(term);
            }
        }
        total = total.saturating_add((binomial(n as u64, u as u64) as i128).saturating_mul(exact));
    }
    total.max(0) as u128
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
    }

    #[test]
    fn walker_counts_and_order() {
        let pool = [1, 2, 3, 4, 5];
        let all = combinations(&pool, 3);
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![1, 2, 3]);
        assert_eq!(all[9], vec![3, 4, 5]);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
        assert_eq!(combinations(&pool, 0), vec![Vec::<u32>::new()]);
        assert!(combinations(&pool, 6).is_empty());
    }

    #[test]
    fn bounded_union_matches_enumeration() {
        // brute force: all s-subsets of the 2-subsets of [7], filter by union
        let verts: Vec<u32> = (1..=7).collect();
        let pairs = combinations(&verts, 2);
        for s in 1..=3 {
            for bound in 2..=7 {
                let mut count = 0u128;
                let ids: Vec<u32> = (0..pairs.len() as u32).collect();
                for_each_combination(&ids, s, |fam| {
                    let mut u: Vec<u32> = fam
                        .iter()
                        .flat_map(|&i| pairs[i as usize].clone())
                        .collect();
                    u.sort();
                    u.dedup();
                    if u.len() <= bound {
                        count += 1;
                    }
                    true
                });
                assert_eq!(
                    bounded_union_families(7, 2, s, bound),
                    count,
                    "s={s} bound={bound}"
                );
            }
        }
    }
}
