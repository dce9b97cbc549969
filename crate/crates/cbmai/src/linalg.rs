//! Minimal dense linear algebra for the small square systems that basis
//! enumeration produces. Systems are at most `MAX_SQUARE` wide, so solves
//! run on stack buffers with partial-pivoting Gaussian elimination.

/// Largest square system `solve_square` accepts (constraint count + 1).
pub const MAX_SQUARE: usize = 8;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row slices; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Writes the square submatrix formed by `cols` into `out` (row-major,
    /// `cols.len()` wide). `out` must hold `rows * cols.len()` entries.
    #[inline]
    pub fn gather_columns(&self, cols: &[usize], out: &mut [f64]) {
        let m = cols.len();
        for r in 0..self.rows {
            let base = r * self.cols;
            for (j, &c) in cols.iter().enumerate() {
                out[r * m + j] = self.data[base + c];
            }
        }
    }

    /// As `gather_columns` but transposed, for solving `A_I^T x = y`.
    #[inline]
    pub fn gather_columns_transposed(&self, cols: &[usize], out: &mut [f64]) {
        let m = self.rows;
        for (j, &c) in cols.iter().enumerate() {
            for r in 0..m {
                out[j * m + r] = self.data[r * self.cols + c];
            }
        }
    }

    /// `y = A x` for a full-width `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Solves the `m`-by-`m` system `a x = b` in place by Gaussian elimination
/// with partial pivoting. `a` is row-major and is destroyed; on success `b`
/// holds the solution. Returns the determinant (0.0 signals an exactly
/// unusable pivot; callers compare against their own singularity tolerance).
#[inline]
pub fn solve_square(a: &mut [f64], b: &mut [f64], m: usize) -> f64 {
    debug_assert!(m <= MAX_SQUARE);
    debug_assert!(a.len() >= m * m && b.len() >= m);
    let mut det = 1.0;
    for col in 0..m {
        let mut pivot_row = col;
        let mut pivot_abs = a[col * m + col].abs();
        for r in col + 1..m {
            let cand = a[r * m + col].abs();
            if cand > pivot_abs {
                pivot_abs = cand;
                pivot_row = r;
            }
        }
        if pivot_abs == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for c in col..m {
                a.swap(pivot_row * m + c, col * m + c);
            }
            b.swap(pivot_row, col);
            det = -det;
        }
        let pivot = a[col * m + col];
        det *= pivot;
        for r in col + 1..m {
            let factor = a[r * m + col] / pivot;
            if factor != 0.0 {
                for c in col + 1..m {
                    a[r * m + c] -= factor * a[col * m + c];
                }
                b[r] -= factor * b[col];
            }
            a[r * m + col] = 0.0;
        }
    }
    for col in (0..m).rev() {
        let mut acc = b[col];
        for c in col + 1..m {
            acc -= a[col * m + c] * b[c];
        }
        b[col] = acc / a[col * m + col];
    }
    det
}

/// Visits every size-`k` subset of `0..n` in lexicographic order. The
/// callback sees the subset as a sorted slice and may stop the walk early
/// by returning `false`.
pub fn for_each_combination<F>(n: usize, k: usize, mut f: F)
where
    F: FnMut(&[usize]) -> bool,
{
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx) {
            return;
        }
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_square_2x2() {
        // 2 p1 = 1, p1 + p2 = 1
        let mut a = [2.0, 0.0, 1.0, 1.0];
        let mut b = [1.0, 1.0];
        let det = solve_square(&mut a, &mut b, 2);
        assert!((det - 2.0).abs() < 1e-12);
        assert!((b[0] - 0.5).abs() < 1e-12);
        assert!((b[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solve_square_pivoting() {
        // leading zero forces a row swap
        let mut a = [0.0, 1.0, 1.0, 0.0];
        let mut b = [3.0, 5.0];
        let det = solve_square(&mut a, &mut b, 2);
        assert!((det - -1.0).abs() < 1e-12);
        assert!((b[0] - 5.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_square_singular() {
        let mut a = [1.0, 2.0, 2.0, 4.0];
        let mut b = [1.0, 2.0];
        assert_eq!(solve_square(&mut a, &mut b, 2), 0.0);
    }

    #[test]
    fn combinations_order_and_count() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| {
            seen.push(c.to_vec());
            true
        });
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn combinations_edge_cases() {
        let mut count = 0;
        for_each_combination(3, 3, |_| {
            count += 1;
            true
        });
        assert_eq!(count, 1);
        for_each_combination(2, 3, |_| {
            panic!("k > n yields nothing");
        });
        let mut early = 0;
        for_each_combination(5, 2, |_| {
            early += 1;
            early < 3
        });
        assert_eq!(early, 3);
    }

    #[test]
    fn gather_columns_matches_direct_indexing() {
        let m = DenseMat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let mut out = [0.0; 4];
        m.gather_columns(&[0, 2], &mut out);
        assert_eq!(out, [1.0, 3.0, 4.0, 6.0]);
        let mut t = [0.0; 4];
        m.gather_columns_transposed(&[0, 2], &mut t);
        assert_eq!(t, [1.0, 4.0, 3.0, 6.0]);
    }
}
