//! Rank of small binary matrices whose rows are packed into `u64` words.

/// Rank over GF(2) of the given rows (at most 64 columns).
pub fn rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::with_capacity(rows.len());
    for &row in rows {
        let mut r = row;
        for &b in &basis {
            // basis is kept with distinct leading bits, sorted descending
            r = r.min(r ^ b);
        }
        if r != 0 {
            basis.push(r);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// Row vector of the parity constraint `x_i + x_j` (0-based nodes).
pub fn edge_row(i: usize, j: usize) -> u64 {
    (1u64 << i) ^ (1u64 << j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_rows() {
        assert_eq!(rank(&[0b001, 0b010, 0b100]), 3);
    }

    #[test]
    fn triangle_is_rank_two() {
        let rows = [edge_row(0, 1), edge_row(1, 2), edge_row(0, 2)];
        assert_eq!(rank(&rows), 2);
    }

    #[test]
    fn duplicate_and_zero_rows() {
        assert_eq!(rank(&[0b11, 0b11, 0]), 1);
        assert_eq!(rank(&[]), 0);
    }

    #[test]
    fn path_edges_are_independent() {
        let rows = [edge_row(0, 1), edge_row(1, 3), edge_row(3, 7)];
        assert_eq!(rank(&rows), 3);
    }
}
