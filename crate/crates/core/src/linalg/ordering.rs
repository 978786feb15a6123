use crate::error::{invalid, Result};

/// Fill-reducing permutation of a square pattern. `perm[k]` is the original
/// index eliminated at step `k`; the pattern is symmetrized internally.
pub fn amd_order(n: usize, ptr: &[usize], idx: &[usize]) -> Result<Vec<usize>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let (perm, _inv, _info) = amd::order(n, ptr, idx, &amd::Control::default())
        .map_err(|s| invalid(format!("ordering rejected the matrix pattern: {s:?}")))?;
    Ok(perm)
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_is_valid() {
        // arrow matrix: dense first row/column
        let n = 6;
        let mut ptr = vec![0];
        let mut idx = Vec::new();
        for r in 0..n {
            if r == 0 {
                idx.extend(0..n);
            } else {
                idx.extend([0, r]);
            }
            ptr.push(idx.len());
        }
        let p = amd_order(n, &ptr, &idx).unwrap();
        let mut s = p.clone();
        s.sort_unstable();
        assert_eq!(s, (0..n).collect::<Vec<_>>());
        // the hub is eliminated last
        assert_eq!(p[n - 1], 0);
        let inv = inverse_permutation(&p);
        assert!((0..n).all(|k| inv[p[k]] == k));
    }
}
