//! Uniform cell-centred grids with ghost layers.
//!
//! Interior cells are numbered `j = 1..=m` with centres `x_j = a - h/2 + j h`.
//! Storage is offset by the ghost width: interior cell `j` lives at storage
//! index `ghost + j - 1`. Two-dimensional fields are stored row-major over
//! `(y, x)`, i.e. `index = iy * (mx + 2 ghost) + ix`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub m: usize,
    pub h: f64,
    pub ghost: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, m: usize, ghost: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("cell count must be at least 1".into()));
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "interval [{a}, {b}] is empty or not finite"
            )));
        }
        Ok(Grid1D {
            a,
            b,
            m,
            h: (b - a) / m as f64,
            ghost,
        })
    }

    /// Same axis, different ghost width.
    pub fn with_ghost(&self, ghost: usize) -> Self {
        Grid1D { ghost, ..*self }
    }

    /// Centre of interior cell `j` (1-based).
    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        self.a - 0.5 * self.h + j as f64 * self.h
    }

    /// Centre of the cell at storage index `i`; ghost cells get the
    /// extrapolated positions.
    #[inline]
    pub fn storage_center(&self, i: usize) -> f64 {
        self.a + (i as f64 - self.ghost as f64 + 0.5) * self.h
    }

    /// Storage length including both ghost layers.
    #[inline]
    pub fn len(&self) -> usize {
        self.m + 2 * self.ghost
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn centers(&self) -> Vec<f64> {
        (1..=self.m).map(|j| self.center(j)).collect()
    }

    /// Range of storage indices holding interior cells.
    #[inline]
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.ghost..self.ghost + self.m
    }

    pub(crate) fn same_axis(&self, other: &Grid1D) -> bool {
        self.a == other.a && self.b == other.b && self.m == other.m
    }
}

/// Validating constructor mirroring [`Grid1D::new`].
pub fn make_grid(a: f64, b: f64, m: usize, ghost: usize) -> Result<Grid1D> {
    Grid1D::new(a, b, m, ghost)
}

/// Tensor product of two axes sharing one ghost width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Result<Self> {
        if x.ghost != y.ghost {
            return Err(Error::InvalidGrid(
                "both axes of a 2D grid must share the ghost width".into(),
            ));
        }
        Ok(Grid2D { x, y })
    }

    #[inline]
    pub fn ghost(&self) -> usize {
        self.x.ghost
    }

    /// Storage row stride (cells per row including ghosts).
    #[inline]
    pub fn stride(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.stride() + ix
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    One(Grid1D),
    Two(Grid2D),
}

impl Grid {
    pub fn dim(&self) -> usize {
        match self {
            Grid::One(_) => 1,
            Grid::Two(_) => 2,
        }
    }

    pub fn ghost(&self) -> usize {
        match self {
            Grid::One(g) => g.ghost,
            Grid::Two(g) => g.ghost(),
        }
    }

    pub fn storage_len(&self) -> usize {
        match self {
            Grid::One(g) => g.len(),
            Grid::Two(g) => g.x.len() * g.y.len(),
        }
    }

    pub fn interior_count(&self) -> usize {
        match self {
            Grid::One(g) => g.m,
            Grid::Two(g) => g.x.m * g.y.m,
        }
    }

    /// Cell volume `h` in 1D, `hx hy` in 2D.
    pub fn cell_volume(&self) -> f64 {
        match self {
            Grid::One(g) => g.h,
            Grid::Two(g) => g.x.h * g.y.h,
        }
    }

    pub fn axes(&self) -> Vec<Grid1D> {
        match self {
            Grid::One(g) => vec![*g],
            Grid::Two(g) => vec![g.x, g.y],
        }
    }

    /// Storage indices of every interior cell, in storage order.
    pub fn interior_indices(&self) -> Vec<usize> {
        match self {
            Grid::One(g) => g.interior().collect(),
            Grid::Two(g) => {
                let mut out = Vec::with_capacity(g.x.m * g.y.m);
                for iy in g.y.interior() {
                    for ix in g.x.interior() {
                        out.push(g.index(ix, iy));
                    }
                }
                out
            }
        }
    }

    /// Coordinates of the cell at a storage index.
    pub fn coords(&self, i: usize) -> Vec<f64> {
        match self {
            Grid::One(g) => vec![g.storage_center(i)],
            Grid::Two(g) => {
                let s = g.stride();
                vec![g.x.storage_center(i % s), g.y.storage_center(i / s)]
            }
        }
    }

    /// 1-based interior cell indices of a storage index (for diagnostics).
    pub fn cell_label(&self, i: usize) -> Vec<usize> {
        match self {
            Grid::One(g) => vec![i + 1 - g.ghost],
            Grid::Two(g) => {
                let s = g.stride();
                vec![i % s + 1 - g.ghost(), i / s + 1 - g.ghost()]
            }
        }
    }

    pub(crate) fn same_cells(&self, other: &Grid) -> bool {
        match (self, other) {
            (Grid::One(a), Grid::One(b)) => a.same_axis(b),
            (Grid::Two(a), Grid::Two(b)) => a.x.same_axis(&b.x) && a.y.same_axis(&b.y),
            _ => false,
        }
    }
}

impl From<Grid1D> for Grid {
    fn from(g: Grid1D) -> Self {
        Grid::One(g)
    }
}

impl From<Grid2D> for Grid {
    fn from(g: Grid2D) -> Self {
        Grid::Two(g)
    }
}

/// Point values of one unknown over a grid, ghosts included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    ghosts_filled: bool,
}

impl Field {
    pub fn zeros(grid: impl Into<Grid>) -> Self {
        let grid = grid.into();
        Field {
            values: vec![0.0; grid.storage_len()],
            grid,
            ghosts_filled: false,
        }
    }

    /// Samples `f` at every interior centre. Ghosts are left unfilled.
    pub fn sample(grid: impl Into<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut field = Field::zeros(grid);
        for i in field.grid.interior_indices() {
            field.values[i] = f(&field.grid.coords(i));
        }
        field
    }

    /// Builds a 1D field from interior values only.
    pub fn from_interior(grid: Grid1D, interior: &[f64]) -> Result<Self> {
        if interior.len() != grid.m {
            return Err(Error::InvalidGrid(format!(
                "expected {} interior values, got {}",
                grid.m,
                interior.len()
            )));
        }
        let mut field = Field::zeros(grid);
        field.values[grid.interior()].copy_from_slice(interior);
        Ok(field)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_1d(&self) -> Option<&Grid1D> {
        match &self.grid {
            Grid::One(g) => Some(g),
            Grid::Two(_) => None,
        }
    }

    /// Raw storage including ghosts.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable raw storage. Marks the ghost layer stale.
    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.ghosts_filled = false;
        &mut self.values
    }

    /// Interior of a 1D field, or of one interior row of a 2D field
    /// (`row` is 0-based over interior rows).
    pub fn interior_row(&self, row: usize) -> &[f64] {
        match &self.grid {
            Grid::One(g) => &self.values[g.interior()],
            Grid::Two(g) => {
                let start = g.index(g.ghost(), g.ghost() + row);
                &self.values[start..start + g.x.m]
            }
        }
    }

    /// Interior values in storage order (copied for 2D).
    pub fn interior(&self) -> Vec<f64> {
        self.grid
            .interior_indices()
            .into_iter()
            .map(|i| self.values[i])
            .collect()
    }

    /// Value of interior cell `j` (1-based) of a 1D field.
    pub fn at(&self, j: usize) -> f64 {
        match &self.grid {
            Grid::One(g) => self.values[g.ghost + j - 1],
            Grid::Two(_) => panic!("Field::at is for 1D fields"),
        }
    }

    #[inline]
    pub fn ghosts_filled(&self) -> bool {
        self.ghosts_filled
    }

    pub(crate) fn set_ghosts_filled(&mut self, filled: bool) {
        self.ghosts_filled = filled;
    }

    pub(crate) fn raw_mut(&mut self) -> &mut Vec<f64> {
        &mut self.values
    }

    /// `h Σ u_j` (or `hx hy Σ u_ij`) over the interior.
    pub fn integral(&self) -> f64 {
        let sum: f64 = self.grid.interior_indices().into_iter().map(|i| self.values[i]).sum();
        sum * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.grid
            .interior_indices()
            .into_iter()
            .fold(0.0, |acc, i| acc.max(self.values[i].abs()))
    }
}

/// Samples a fine 1D field at the centres that coincide with `coarse`.
///
/// The fine cell count must be `3^k` times the coarse one, `k >= 1`; then
/// coarse centre `j` is fine centre `r j - (r - 1)/2` with `r = 3^k`.
pub fn restrict_to_coarse(fine: &Field, coarse: &Grid1D) -> Result<Field> {
    let fg = fine
        .grid_1d()
        .ok_or_else(|| Error::InvalidGrid("restriction is defined for 1D fields".into()))?;
    if fg.a != coarse.a || fg.b != coarse.b {
        return Err(Error::GridMismatch);
    }
    let ratio = power_of_three_ratio(fg.m, coarse.m).ok_or(Error::NotNested {
        fine: fg.m,
        coarse: coarse.m,
    })?;
    let mut out = Field::zeros(*coarse);
    let half = (ratio - 1) / 2;
    for j in 1..=coarse.m {
        out.values[coarse.ghost + j - 1] = fine.at(ratio * j - half);
    }
    Ok(out)
}

fn power_of_three_ratio(fine: usize, coarse: usize) -> Option<usize> {
    if coarse == 0 || !fine.is_multiple_of(coarse) {
        return None;
    }
    let ratio = fine / coarse;
    let mut r = ratio;
    if r < 3 {
        return None;
    }
    while r.is_multiple_of(3) {
        r /= 3;
    }
    (r == 1).then_some(ratio)
}
