//! Maximum-weight rectangular assignment (stations to RUs).
//!
//! Every RU carries at most one station and every station gets at most one
//! RU. The solver pads the matrix to square with zero weights and runs the
//! O(n^3) shortest augmenting path form of the Hungarian method.

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix of finite weights, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "weight matrix",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("weights must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension {
                what: "weight matrix row",
                expected: cols,
                actual: r.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Copy with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|w| w * c).collect(),
        }
    }
}

/// A partial matching and its total weight.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub value: f64,
}

impl Assignment {
    fn from_pairs(w: &WeightMatrix, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let value = pairs.iter().map(|&(r, c)| w.get(r, c)).sum();
        Self { pairs, value }
    }

    /// Column assigned to `row`, if any.
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    /// True when no row and no column appears twice.
    pub fn is_matching(&self) -> bool {
        let mut rows: Vec<usize> = self.pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        rows.sort_unstable();
        cols.sort_unstable();
        rows.windows(2).all(|w| w[0] != w[1]) && cols.windows(2).all(|w| w[0] != w[1])
    }
}

/// Exact maximum-weight assignment.
///
/// With `allow_skip`, any partial matching is admissible and non-positive
/// pairs are never selected. Without it, the matching must saturate the
/// smaller side of the matrix. Ties resolve deterministically: rows are
/// inserted in index order and the lowest column wins equal reduced costs.
pub fn solve_max_assignment(w: &WeightMatrix, allow_skip: bool) -> Assignment {
    if w.rows == 0 || w.cols == 0 {
        return Assignment::default();
    }
    let dim = w.rows.max(w.cols);
    let mut cost = vec![0.0; dim * dim];
    for r in 0..w.rows {
        for c in 0..w.cols {
            let x = w.get(r, c);
            cost[r * dim + c] = -(if allow_skip { x.max(0.0) } else { x });
        }
    }
    let col_of_row = hungarian_min(&cost, dim);
    let pairs = col_of_row
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < w.rows && c < w.cols && (!allow_skip || w.get(r, c) > 0.0))
        .collect();
    Assignment::from_pairs(w, pairs)
}

/// Minimum-cost perfect matching on a square `dim x dim` matrix. Returns the
/// column matched to each row.
fn hungarian_min(cost: &[f64], dim: usize) -> Vec<usize> {
    // 1-based potentials; index 0 is the virtual root column.
    let mut u = vec![0.0; dim + 1];
    let mut v = vec![0.0; dim + 1];
    let mut row_of_col = vec![0usize; dim + 1];
    let mut way = vec![0usize; dim + 1];
    let mut min_slack = vec![f64::INFINITY; dim + 1];
    let mut used = vec![false; dim + 1];

    for row in 1..=dim {
        row_of_col[0] = row;
        let mut col0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[col0] = true;
            let r0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=dim {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r0 - 1) * dim + (col - 1)] - u[r0] - v[col];
                if reduced < min_slack[col] {
                    min_slack[col] = reduced;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=dim {
                if used[col] {
                    u[row_of_col[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        // Augment along the alternating path back to the root.
        loop {
            let prev = way[col0];
            row_of_col[col0] = row_of_col[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; dim];
    for col in 1..=dim {
        col_of_row[row_of_col[col] - 1] = col - 1;
    }
    col_of_row
}

/// Exhaustive optimum over every admissible matching. Test oracle; refuses
/// instances whose smaller side exceeds 8.
pub fn brute_force_assignment(w: &WeightMatrix, allow_skip: bool) -> Result<Assignment> {
    let small = w.rows.min(w.cols);
    if small > 8 {
        return Err(Error::TooLarge(small));
    }
    if small == 0 {
        return Ok(Assignment::default());
    }
    // Enumerate over the smaller side.
    let transposed = w.rows > w.cols;
    let (outer, inner) = if transposed { (w.cols, w.rows) } else { (w.rows, w.cols) };
    let weight = |o: usize, i: usize| if transposed { w.get(i, o) } else { w.get(o, i) };

    struct Search<'a> {
        outer: usize,
        inner: usize,
        allow_skip: bool,
        weight: &'a dyn Fn(usize, usize) -> f64,
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Option<(f64, Vec<(usize, usize)>)>,
    }

    impl Search<'_> {
        fn go(&mut self, o: usize, acc: f64) {
            if o == self.outer {
                if self.best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    self.best = Some((acc, self.current.clone()));
                }
                return;
            }
            for i in 0..self.inner {
                if self.used[i] {
                    continue;
                }
                self.used[i] = true;
                self.current.push((o, i));
                let x = (self.weight)(o, i);
                self.go(o + 1, acc + x);
                self.current.pop();
                self.used[i] = false;
            }
            if self.allow_skip {
                self.go(o + 1, acc);
            }
        }
    }

    let mut search = Search {
        outer,
        inner,
        allow_skip,
        weight: &weight,
        used: vec![false; inner],
        current: Vec::with_capacity(outer),
        best: None,
    };
    search.go(0, 0.0);
    let (_, best) = search.best.expect("at least one admissible matching");
    let pairs = best
        .into_iter()
        .map(|(o, i)| if transposed { (i, o) } else { (o, i) })
        .collect();
    Ok(Assignment::from_pairs(w, pairs))
}
