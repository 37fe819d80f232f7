//! Direct nested quadrature of the p-body multiplier.
//!
//! `N(x_0) = h^{3p} Σ_{x_1,…,x_p} V(x_0, x_1, …, x_p) Π_l g(x_l)` with `V`
//! evaluated from its defining pair structure. Cost is `M^{3(p+1)}` summand
//! evaluations; the caller enforces the budget.

use rayon::prelude::*;

use crate::potentials::{Family, TwoBodyPotential};
use crate::spectral::Grid;

/// Unscaled multiplier (no `μ λ` factor).
pub(crate) fn multiplier(family: Family, omega: &TwoBodyPotential, p: u32, g: &[f64]) -> Vec<f64> {
    let grid = omega.grid();
    let n = grid.len();
    let scale = grid.cell_volume().powi(p as i32);
    (0..n)
        .into_par_iter()
        .map(|x0| {
            let mut state = State::new(grid, omega, family, p as usize);
            state.push(x0, 1.0);
            scale * state.descend(g)
        })
        .collect()
}

struct State<'a> {
    grid: &'a Grid,
    omega: &'a [f64],
    family: Family,
    p: usize,
    positions: Vec<usize>,
    // rows[i][y] = ω(x_i - y)
    rows: Vec<Vec<f64>>,
    // product of g over the fixed positions x_1..x_{len-1}
    weights: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(grid: &'a Grid, omega: &'a TwoBodyPotential, family: Family, p: usize) -> Self {
        State {
            grid,
            omega: omega.values(),
            family,
            p,
            positions: Vec::with_capacity(p),
            rows: Vec::with_capacity(p),
            weights: Vec::with_capacity(p),
        }
    }

    fn push(&mut self, x: usize, weight: f64) {
        let row = (0..self.grid.len())
            .map(|y| self.omega[self.grid.difference_index(x, y)])
            .collect();
        self.positions.push(x);
        self.rows.push(row);
        self.weights.push(weight);
    }

    fn pop(&mut self) {
        self.positions.pop();
        self.rows.pop();
        self.weights.pop();
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        self.rows[i][self.positions[j]]
    }

    /// Sum over the remaining free positions.
    fn descend(&mut self, g: &[f64]) -> f64 {
        let fixed = self.positions.len();
        if fixed == self.p {
            return self.innermost(g);
        }
        let mut total = 0.0;
        for x in 0..self.grid.len() {
            if g[x] == 0.0 {
                continue;
            }
            let w = self.weights[fixed - 1] * g[x];
            self.push(x, w);
            total += self.descend(g);
            self.pop();
        }
        total
    }

    /// Sum over the last position `y = x_p` with `x_0, …, x_{p-1}` fixed.
    fn innermost(&self, g: &[f64]) -> f64 {
        let k = self.positions.len();
        let weight = self.weights[k - 1];
        match self.family {
            Family::V2 => {
                let mut fixed_pairs = 1.0;
                for i in 0..k {
                    for j in (i + 1)..k {
                        fixed_pairs *= self.pair(i, j);
                    }
                }
                if fixed_pairs == 0.0 {
                    return 0.0;
                }
                let mut s = 0.0;
                for (y, &gy) in g.iter().enumerate() {
                    let mut prod = gy;
                    for row in &self.rows {
                        prod *= row[y];
                    }
                    s += prod;
                }
                weight * fixed_pairs * s
            }
            Family::V1 => {
                // vertex i < p: Π_{j<p, j≠i} ω(x_i - x_j) · ω(x_i - y);
                // vertex p: Π_{j<p} ω(y - x_j)
                let stars: Vec<f64> = (0..k)
                    .map(|i| {
                        (0..k)
                            .filter(|&j| j != i)
                            .map(|j| self.pair(i, j))
                            .product()
                    })
                    .collect();
                let mut s = 0.0;
                for (y, &gy) in g.iter().enumerate() {
                    let mut prod = 1.0;
                    let mut side = 0.0;
                    for (row, star) in self.rows.iter().zip(&stars) {
                        prod *= row[y];
                        side += star * row[y];
                    }
                    s += gy * (prod + side);
                }
                weight * s / (k + 1) as f64
            }
            Family::LocalDelta => unreachable!("local interactions are evaluated pointwise"),
        }
    }
}
