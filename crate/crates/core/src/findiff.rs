//! Finite-difference gradients and ghost-cell boundary extrapolation.
//!
//! All coefficients come from small moment (Vandermonde) systems solved at
//! construction time, so every order and every one-sided offset shares one
//! code path.

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};

/// Furthest a stencil row may sit from its evaluation point, in cells.
/// Covers extrapolation to the outermost ghost of the widest reconstruction.
const MAX_REACH: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Periodic,
    Dirichlet(f64),
    /// Zero normal derivative at the wall.
    FreeFlow,
}

/// Boundary conditions at the two ends of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPair {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
}

impl BoundaryPair {
    pub fn new(left: BoundaryKind, right: BoundaryKind) -> Result<Self> {
        let pair = BoundaryPair { left, right };
        pair.validate()?;
        Ok(pair)
    }

    pub const fn periodic() -> Self {
        BoundaryPair {
            left: BoundaryKind::Periodic,
            right: BoundaryKind::Periodic,
        }
    }

    pub const fn free_flow() -> Self {
        BoundaryPair {
            left: BoundaryKind::FreeFlow,
            right: BoundaryKind::FreeFlow,
        }
    }

    pub const fn dirichlet(left: f64, right: f64) -> Self {
        BoundaryPair {
            left: BoundaryKind::Dirichlet(left),
            right: BoundaryKind::Dirichlet(right),
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.left == BoundaryKind::Periodic
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.left == BoundaryKind::Periodic;
        let r = self.right == BoundaryKind::Periodic;
        if l != r {
            return Err(Error::InvalidBoundary(
                "periodic must be set on both sides or neither".into(),
            ));
        }
        Ok(())
    }
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// First-derivative weights at 0 on nodes `offsets`, exact for
/// polynomials of degree `< offsets.len()`: `L_k'(0)` of the Lagrange basis.
fn derivative_weights(offsets: &[f64]) -> Vec<f64> {
    let n = offsets.len();
    (0..n)
        .map(|k| {
            let tk = offsets[k];
            let denom: f64 = (0..n).filter(|&l| l != k).map(|l| tk - offsets[l]).product();
            let numer: f64 = (0..n)
                .filter(|&l| l != k)
                .map(|l| {
                    (0..n)
                        .filter(|&q| q != k && q != l)
                        .map(|q| -offsets[q])
                        .product::<f64>()
                })
                .sum();
            numer / denom
        })
        .collect()
}

/// Gradient stencils of even order `2p` on `2p + 1` consecutive nodes.
#[derive(Debug, Clone)]
pub struct StencilTable {
    order: usize,
    /// `rows[s - min_shift]`: weights on nodes `s ..= s + 2p` relative to the
    /// evaluation point, for `s` in `min_shift ..= MAX_REACH`.
    rows: Vec<Vec<f64>>,
    min_shift: i64,
}

impl StencilTable {
    pub fn new(order: usize) -> Result<Self> {
        if !matches!(order, 2 | 4 | 6) {
            return Err(Error::UnsupportedOrder {
                order,
                reason: "gradient order must be 2, 4 or 6",
            });
        }
        let width = order as i64;
        let min_shift = -width - MAX_REACH;
        let rows = (min_shift..=MAX_REACH)
            .map(|s| {
                let nodes: Vec<f64> = (0..=width).map(|k| (s + k) as f64).collect();
                derivative_weights(&nodes)
            })
            .collect();
        Ok(StencilTable { order, rows, min_shift })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Half width `p` of the centred stencil.
    pub fn radius(&self) -> usize {
        self.order / 2
    }

    /// Weights on nodes `shift ..= shift + order` (unit spacing).
    pub fn row(&self, shift: i64) -> &[f64] {
        &self.rows[(shift - self.min_shift) as usize]
    }

    pub fn centered(&self) -> &[f64] {
        self.row(-(self.radius() as i64))
    }

    /// Derivative at every storage point of `line` (spacing `h`).
    ///
    /// Periodic lines use the centred row on the interior and wrap the
    /// result into the ghosts. Otherwise only the interior and the first
    /// ghost on each side count as data; points whose centred stencil
    /// would leave that range use the nearest one-sided row.
    pub fn apply_line(&self, line: &[f64], h: f64, ghost: usize, periodic: bool, out: &mut [f64]) {
        let n = line.len();
        let m = n - 2 * ghost;
        let p = self.radius();
        let width = self.order + 1;
        let inv_h = 1.0 / h;
        let row = self.centered();
        // Centred rows are antisymmetric; differencing symmetric pairs first
        // keeps the round-off at eps |u'| instead of eps |u| / h.
        let centred = |i: usize| -> f64 { (1..=p).map(|k| row[p + k] * (line[i + k] - line[i - k])).sum() };
        if periodic {
            for i in ghost..ghost + m {
                out[i] = centred(i) * inv_h;
            }
            for i in 0..ghost {
                out[i] = out[i + m];
                out[ghost + m + i] = out[ghost + i];
            }
            return;
        }
        let lo = ghost.saturating_sub(1);
        let hi = (ghost + m + 1).min(n);
        for (i, o) in out.iter_mut().enumerate() {
            let start = (i as i64 - p as i64).clamp(lo as i64, (hi - width) as i64) as usize;
            if start + p == i {
                *o = centred(i) * inv_h;
                continue;
            }
            let row = self.row(start as i64 - i as i64);
            let s: f64 = row.iter().zip(&line[start..start + width]).map(|(c, v)| c * v).sum();
            *o = s * inv_h;
        }
    }
}

/// Gradient of a field along `axis` (0 = x, 1 = y), evaluated at every
/// storage point. Ghost cells of 2D fields outside the interior rows or
/// columns are left at zero.
pub fn gradient(values: &Field, order: usize, axis: usize, bc: &[BoundaryPair]) -> Result<Field> {
    if !values.ghosts_filled() {
        return Err(Error::GhostsNotFilled);
    }
    let table = StencilTable::new(order)?;
    let mut out = Field::zeros(*values.grid());
    let mut line = Vec::new();
    let mut res = Vec::new();
    let raw = values.values();
    match values.grid() {
        Grid::One(g) => {
            check_ghosts(g.ghost, table.radius())?;
            table.apply_line(raw, g.h, g.ghost, bc[0].is_periodic(), out.raw_mut());
        }
        Grid::Two(g) => {
            check_ghosts(g.ghost(), table.radius())?;
            let axis_grid = if axis == 0 { g.x } else { g.y };
            let dst = out.raw_mut();
            for_each_line(g, axis, |indices| {
                line.clear();
                line.extend(indices.clone().map(|i| raw[i]));
                res.resize(line.len(), 0.0);
                table.apply_line(&line, axis_grid.h, g.ghost(), bc[axis].is_periodic(), &mut res);
                for (i, v) in indices.zip(&res) {
                    dst[i] = *v;
                }
            });
        }
    }
    out.set_ghosts_filled(true);
    Ok(out)
}

fn check_ghosts(ghost: usize, p: usize) -> Result<()> {
    if ghost < p.max(1) {
        return Err(Error::InvalidGrid(format!(
            "gradient needs at least {} ghost cells, grid has {ghost}",
            p.max(1)
        )));
    }
    Ok(())
}

/// Calls `f` with the storage indices of every interior line along `axis`.
pub(crate) fn for_each_line(g: &crate::mesh::Grid2D, axis: usize, mut f: impl FnMut(StridedRange)) {
    let stride = g.stride();
    if axis == 0 {
        for iy in g.y.interior() {
            f(StridedRange {
                next: iy * stride,
                step: 1,
                remaining: g.x.len(),
            });
        }
    } else {
        for ix in g.x.interior() {
            f(StridedRange {
                next: ix,
                step: stride,
                remaining: g.y.len(),
            });
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StridedRange {
    next: usize,
    step: usize,
    remaining: usize,
}

impl Iterator for StridedRange {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        let i = self.next;
        self.next += self.step;
        self.remaining -= 1;
        Some(i)
    }
}

/// Linear weights of the ghost-point extrapolation at one physical wall.
///
/// The polynomial of degree `2p` interpolates the `2p` interior values
/// nearest the wall and satisfies the boundary constraint there; ghost `k`
/// (1 = adjacent to the wall) gets `Σ_j w[k][j] u_j + w_bc[k] · value`.
#[derive(Debug, Clone)]
struct WallExtrapolation {
    interior: Vec<Vec<f64>>,
    constraint: Vec<f64>,
}

impl WallExtrapolation {
    fn new(degree: usize, ghosts: usize, free_flow: bool) -> Self {
        let n = degree + 1;
        // Distances from the wall in units of h, positive into the domain.
        let mut a: Vec<Vec<f64>> = (1..=degree)
            .map(|j| {
                let s = j as f64 - 0.5;
                (0..n).map(|i| s.powi(i as i32)).collect()
            })
            .collect();
        let mut constraint_row = vec![0.0; n];
        if free_flow {
            constraint_row[1] = 1.0;
        } else {
            constraint_row[0] = 1.0;
        }
        a.push(constraint_row);
        // Ghost value = e_g · c with c = A⁻¹ rhs, so the weights are A⁻ᵀ e_g.
        let at: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[j][i]).collect()).collect();
        let mut interior = Vec::with_capacity(ghosts);
        let mut constraint = Vec::with_capacity(ghosts);
        for k in 1..=ghosts {
            let s = -(k as f64 - 0.5);
            let e: Vec<f64> = (0..n).map(|i| s.powi(i as i32)).collect();
            let w = solve_dense(at.clone(), e);
            interior.push(w[..degree].to_vec());
            constraint.push(w[degree]);
        }
        WallExtrapolation { interior, constraint }
    }
}

/// Ghost filling for one grid, reusable across steps.
#[derive(Debug, Clone)]
pub struct GhostFiller {
    degree: usize,
    dirichlet: WallExtrapolation,
    free_flow: WallExtrapolation,
}

impl GhostFiller {
    /// `degree` is the fit degree `2p`; `ghosts` the number of ghost cells
    /// per side to fill.
    pub fn new(degree: usize, ghosts: usize) -> Result<Self> {
        if !(1..=8).contains(&degree) {
            return Err(Error::UnsupportedOrder {
                order: degree,
                reason: "boundary fit degree must be between 1 and 8",
            });
        }
        Ok(GhostFiller {
            degree,
            dirichlet: WallExtrapolation::new(degree, ghosts, false),
            free_flow: WallExtrapolation::new(degree, ghosts, true),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Fills the ghosts of one storage line with `m` interior cells.
    pub fn fill_line(&self, line: &mut [f64], ghost: usize, bc: &BoundaryPair) {
        let n = line.len();
        let m = n - 2 * ghost;
        if bc.is_periodic() {
            for i in 0..ghost {
                line[i] = line[i + m];
                line[ghost + m + i] = line[ghost + i];
            }
            return;
        }
        self.fill_wall(line, ghost, m, bc.left, false);
        self.fill_wall(line, ghost, m, bc.right, true);
    }

    fn fill_wall(&self, line: &mut [f64], ghost: usize, m: usize, kind: BoundaryKind, right: bool) {
        let (ext, value) = match kind {
            BoundaryKind::Dirichlet(v) => (&self.dirichlet, v),
            BoundaryKind::FreeFlow => (&self.free_flow, 0.0),
            BoundaryKind::Periodic => unreachable!("validated pair"),
        };
        for k in 1..=ghost {
            let w = &ext.interior[k - 1];
            let mut s = ext.constraint[k - 1] * value;
            for (j, wj) in w.iter().enumerate() {
                let idx = if right { ghost + m - 1 - j } else { ghost + j };
                s += wj * line[idx];
            }
            let g = if right { ghost + m - 1 + k } else { ghost - k };
            line[g] = s;
        }
    }

    /// Fills every ghost layer of `field` along each axis.
    pub fn fill(&self, field: &mut Field, bc: &[BoundaryPair]) -> Result<()> {
        let grid = *field.grid();
        if bc.len() != grid.dim() {
            return Err(Error::InvalidBoundary(format!(
                "{} boundary pairs for a {}D grid",
                bc.len(),
                grid.dim()
            )));
        }
        for pair in bc {
            pair.validate()?;
        }
        for (axis, g) in grid.axes().iter().enumerate() {
            let needed = if bc[axis].is_periodic() { g.ghost } else { self.degree };
            if g.m < needed {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {} cells, boundary fill needs at least {needed}",
                    g.m
                )));
            }
        }
        let ghost = grid.ghost();
        match grid {
            Grid::One(_) => self.fill_line(field.raw_mut(), ghost, &bc[0]),
            Grid::Two(g) => {
                let raw = field.raw_mut();
                let mut line = Vec::new();
                for axis in 0..2 {
                    for_each_line(&g, axis, |indices| {
                        line.clear();
                        line.extend(indices.clone().map(|i| raw[i]));
                        self.fill_line(&mut line, ghost, &bc[axis]);
                        for (i, v) in indices.zip(&line) {
                            raw[i] = *v;
                        }
                    });
                }
            }
        }
        field.set_ghosts_filled(true);
        Ok(())
    }
}

/// Extrapolates `field` into its ghost cells: periodic wrap, or a degree
/// `fit_degree` polynomial through the nearest interior values that meets
/// the wall condition.
pub fn fill_ghosts(field: &mut Field, bc: &[BoundaryPair], fit_degree: usize) -> Result<()> {
    GhostFiller::new(fit_degree, field.grid().ghost())?.fill(field, bc)
}
