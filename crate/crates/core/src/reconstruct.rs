//! Non-oscillatory boundary-extrapolated data at cell interfaces.
//!
//! Point values `u_j` are treated as cell averages of the flux primitive,
//! in the usual finite-difference ENO/WENO fashion, so that the interface
//! values produce a flux difference of the full reconstruction order.
//!
//! For interface `k` (between interior cells `k` and `k+1`, `k = 0..=m`)
//! the "minus" value comes from the cell on its left and the "plus" value
//! from the cell on its right.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Field;

/// Regulariser in the WENO nonlinear weights.
pub const WENO_EPSILON: f64 = 1e-6;

pub const WENO3_LINEAR_WEIGHTS: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];
pub const WENO5_LINEAR_WEIGHTS: [f64; 3] = [0.1, 0.6, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconstructionKind {
    /// Piecewise constant: `u⁻_{j+1/2} = u_j`, `u⁺_{j+1/2} = u_{j+1}`.
    Constant,
    /// ENO of the given order, 2..=6.
    Eno(usize),
    /// WENO of order 3 or 5.
    Weno(usize),
}

impl ReconstructionKind {
    pub fn eno(order: usize) -> Result<Self> {
        let kind = ReconstructionKind::Eno(order);
        kind.validate()?;
        Ok(kind)
    }

    pub fn weno(order: usize) -> Result<Self> {
        let kind = ReconstructionKind::Weno(order);
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ReconstructionKind::Constant => Ok(()),
            ReconstructionKind::Eno(r) if (2..=6).contains(&r) => Ok(()),
            ReconstructionKind::Eno(r) => Err(Error::UnsupportedOrder {
                order: r,
                reason: "order out of range 2..6",
            }),
            ReconstructionKind::Weno(3 | 5) => Ok(()),
            ReconstructionKind::Weno(r) => Err(Error::UnsupportedOrder {
                order: r,
                reason: "WENO order must be 3 or 5",
            }),
        }
    }

    /// Formal order of accuracy.
    pub fn order(&self) -> usize {
        match *self {
            ReconstructionKind::Constant => 1,
            ReconstructionKind::Eno(r) | ReconstructionKind::Weno(r) => r,
        }
    }

    /// How far a stencil may reach from its cell: `order - 1` for ENO,
    /// `(order + 1) / 2` for WENO.
    pub fn stencil_radius(&self) -> usize {
        match *self {
            ReconstructionKind::Constant => 0,
            ReconstructionKind::Eno(r) => r - 1,
            ReconstructionKind::Weno(r) => r.div_ceil(2),
        }
    }

    /// Ghost cells per side needed to reconstruct at every interface,
    /// including the two boundary interfaces.
    pub fn ghost_width(&self) -> usize {
        match *self {
            ReconstructionKind::Constant => 1,
            ReconstructionKind::Eno(r) => r,
            ReconstructionKind::Weno(r) => r.div_ceil(2),
        }
    }
}

impl fmt::Display for ReconstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReconstructionKind::Constant => write!(f, "constant"),
            ReconstructionKind::Eno(r) => write!(f, "eno{r}"),
            ReconstructionKind::Weno(r) => write!(f, "weno{r}"),
        }
    }
}

impl FromStr for ReconstructionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parse_order = |digits: &str| {
            digits
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("unknown reconstruction `{s}`")))
        };
        if lower == "constant" || lower == "pc" {
            Ok(ReconstructionKind::Constant)
        } else if let Some(d) = lower.strip_prefix("weno") {
            ReconstructionKind::weno(parse_order(d)?)
        } else if let Some(d) = lower.strip_prefix("eno") {
            ReconstructionKind::eno(parse_order(d)?)
        } else {
            Err(Error::InvalidParameter(format!(
                "unknown reconstruction `{s}` (expected constant, eno2..eno6, weno3 or weno5)"
            )))
        }
    }
}

/// Boundary-extrapolated values at the `m + 1` interfaces of a 1D field.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeValues {
    /// `u⁻_{k+1/2}`: reconstruction from the cell left of the interface.
    pub left: Vec<f64>,
    /// `u⁺_{k+1/2}`: reconstruction from the cell right of the interface.
    pub right: Vec<f64>,
}

/// Reconstructs both one-sided values at every interface of a 1D field.
pub fn reconstruct_edges(values: &Field, kind: ReconstructionKind) -> Result<EdgeValues> {
    let grid = values
        .grid_1d()
        .ok_or_else(|| Error::InvalidGrid("reconstruct_edges expects a 1D field".into()))?;
    if !values.ghosts_filled() {
        return Err(Error::GhostsNotFilled);
    }
    if grid.ghost < kind.ghost_width() {
        return Err(Error::InvalidGrid(format!(
            "{kind} needs {} ghost cells, grid has {}",
            kind.ghost_width(),
            grid.ghost
        )));
    }
    let mut rec = Reconstructor::new(kind)?;
    let mut left = vec![0.0; grid.m + 1];
    let mut right = vec![0.0; grid.m + 1];
    rec.minus_edges(values.values(), grid.ghost, &mut left);
    rec.plus_edges(values.values(), grid.ghost, &mut right);
    Ok(EdgeValues { left, right })
}

/// Nonlinear WENO weights `ω_k ∝ d_k / (ε + β_k)^2`, normalised to sum 1.
pub fn weno_weights(smoothness: &[f64], linear_weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; smoothness.len()];
    weno_weights_into(smoothness, linear_weights, &mut out);
    out
}

#[inline]
fn weno_weights_into(smoothness: &[f64], linear_weights: &[f64], out: &mut [f64]) {
    let mut total = 0.0;
    for ((w, &beta), &d) in out.iter_mut().zip(smoothness).zip(linear_weights) {
        let e = WENO_EPSILON + beta;
        *w = d / (e * e);
        total += *w;
    }
    for w in out.iter_mut() {
        *w /= total;
    }
}

/// ENO reconstruction coefficients: value at the right edge `x_{i+1/2}` of
/// cell `i` from the `k` cells `i - r ..= i - r + k - 1`, for `r = -1..k`.
///
/// Shift `r = -1` gives the right edge of the cell just left of the stencil,
/// which is how left-edge values of a cell are obtained.
fn eno_coefficients(k: usize, r: i64) -> Vec<f64> {
    let k_i = k as i64;
    (0..k_i)
        .map(|j| {
            let mut sum = 0.0;
            for m in (j + 1)..=k_i {
                let mut num = 0.0;
                for l in (0..=k_i).filter(|&l| l != m) {
                    let prod: f64 = (0..=k_i)
                        .filter(|&q| q != m && q != l)
                        .map(|q| (r - q + 1) as f64)
                        .product();
                    num += prod;
                }
                let den: f64 = (0..=k_i).filter(|&l| l != m).map(|l| (m - l) as f64).product();
                sum += num / den;
            }
            sum
        })
        .collect()
}

/// Reusable reconstruction kernel for one [`ReconstructionKind`].
///
/// Works on raw lines of storage (`m` interior cells plus `ghost` cells on
/// each side) so the solver can feed it rows and columns of 2D fields.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    kind: ReconstructionKind,
    /// `coeffs[r + 1]` for shifts `r = -1..order`.
    coeffs: Vec<Vec<f64>>,
    /// `diffs[l][i]`: l-th undivided difference over cells `i..=i+l`.
    diffs: Vec<Vec<f64>>,
}

impl Reconstructor {
    pub fn new(kind: ReconstructionKind) -> Result<Self> {
        kind.validate()?;
        let coeffs = match kind {
            ReconstructionKind::Eno(k) => (-1..k as i64).map(|r| eno_coefficients(k, r)).collect(),
            _ => Vec::new(),
        };
        let levels = match kind {
            ReconstructionKind::Eno(k) => k,
            _ => 0,
        };
        Ok(Reconstructor {
            kind,
            coeffs,
            diffs: vec![Vec::new(); levels],
        })
    }

    pub fn kind(&self) -> ReconstructionKind {
        self.kind
    }

    /// Right-edge values of cells `ghost - 1 ..= ghost + m - 1`, i.e. the
    /// minus values at interfaces `k = 0..=m`. `out.len()` must be `m + 1`.
    pub fn minus_edges(&mut self, line: &[f64], ghost: usize, out: &mut [f64]) {
        let first = ghost - 1;
        self.edges(line, first, out, Side::Right);
    }

    /// Left-edge values of cells `ghost ..= ghost + m`, i.e. the plus values
    /// at interfaces `k = 0..=m`. `out.len()` must be `m + 1`.
    pub fn plus_edges(&mut self, line: &[f64], ghost: usize, out: &mut [f64]) {
        self.edges(line, ghost, out, Side::Left);
    }

    /// Leftmost cell of the ENO stencil chosen for every cell of `line`
    /// whose full candidate range fits. Cells too close to the ends keep
    /// their own index. Only meaningful for ENO kinds.
    pub fn eno_stencil_starts(&mut self, line: &[f64]) -> Vec<usize> {
        let k = match self.kind {
            ReconstructionKind::Eno(k) => k,
            _ => return (0..line.len()).collect(),
        };
        self.fill_differences(line);
        (0..line.len())
            .map(|c| {
                if c + 1 >= k && c + k <= line.len() {
                    self.select(c, k)
                } else {
                    c
                }
            })
            .collect()
    }

    fn edges(&mut self, line: &[f64], first: usize, out: &mut [f64], side: Side) {
        match self.kind {
            ReconstructionKind::Constant => {
                out.copy_from_slice(&line[first..first + out.len()]);
            }
            ReconstructionKind::Eno(k) => {
                self.fill_differences(line);
                for (n, o) in out.iter_mut().enumerate() {
                    let cell = first + n;
                    let start = self.select(cell, k);
                    let shift = (cell - start) as i64 - if side == Side::Left { 1 } else { 0 };
                    let row = &self.coeffs[(shift + 1) as usize];
                    *o = row.iter().zip(&line[start..start + k]).map(|(c, v)| c * v).sum();
                }
            }
            ReconstructionKind::Weno(3) => {
                for (n, o) in out.iter_mut().enumerate() {
                    let c = first + n;
                    let s = [line[c - 1], line[c], line[c + 1]];
                    *o = match side {
                        Side::Right => weno3_edge(s),
                        Side::Left => weno3_edge([s[2], s[1], s[0]]),
                    };
                }
            }
            ReconstructionKind::Weno(_) => {
                for (n, o) in out.iter_mut().enumerate() {
                    let c = first + n;
                    let s = [line[c - 2], line[c - 1], line[c], line[c + 1], line[c + 2]];
                    *o = match side {
                        Side::Right => weno5_edge(s),
                        Side::Left => weno5_edge([s[4], s[3], s[2], s[1], s[0]]),
                    };
                }
            }
        }
    }

    fn fill_differences(&mut self, line: &[f64]) {
        let n = line.len();
        for level in 1..self.diffs.len() {
            let (lower, upper) = self.diffs.split_at_mut(level);
            let d = &mut upper[0];
            d.clear();
            if level == 1 {
                d.extend(line.windows(2).map(|w| w[1] - w[0]));
            } else {
                let prev = &lower[level - 1];
                d.extend(prev.windows(2).map(|w| w[1] - w[0]));
            }
            debug_assert_eq!(d.len(), n - level);
        }
    }

    /// Grows a stencil from `cell` one point at a time toward the side with
    /// the smaller undivided difference. Ties go left.
    #[inline]
    fn select(&self, cell: usize, k: usize) -> usize {
        let mut start = cell;
        for level in 1..k {
            let d = &self.diffs[level];
            let left = d[start - 1].abs();
            let right = d[start].abs();
            if left <= right {
                start -= 1;
            }
        }
        start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// WENO3 value at the right edge of the middle cell of `v`.
#[inline]
fn weno3_edge(v: [f64; 3]) -> f64 {
    let q0 = -0.5 * v[0] + 1.5 * v[1];
    let q1 = 0.5 * v[1] + 0.5 * v[2];
    let b0 = (v[1] - v[0]) * (v[1] - v[0]);
    let b1 = (v[2] - v[1]) * (v[2] - v[1]);
    let mut w = [0.0; 2];
    weno_weights_into(&[b0, b1], &WENO3_LINEAR_WEIGHTS, &mut w);
    w[0] * q0 + w[1] * q1
}

/// Jiang–Shu smoothness indicators of the three WENO5 sub-stencils.
pub fn weno5_smoothness(v: [f64; 5]) -> [f64; 3] {
    let t = 13.0 / 12.0;
    let sq = |x: f64| x * x;
    [
        t * sq(v[0] - 2.0 * v[1] + v[2]) + 0.25 * sq(v[0] - 4.0 * v[1] + 3.0 * v[2]),
        t * sq(v[1] - 2.0 * v[2] + v[3]) + 0.25 * sq(v[1] - v[3]),
        t * sq(v[2] - 2.0 * v[3] + v[4]) + 0.25 * sq(3.0 * v[2] - 4.0 * v[3] + v[4]),
    ]
}

/// WENO5 value at the right edge of the middle cell of `v`.
#[inline]
fn weno5_edge(v: [f64; 5]) -> f64 {
    let q0 = (2.0 * v[0] - 7.0 * v[1] + 11.0 * v[2]) / 6.0;
    let q1 = (-v[1] + 5.0 * v[2] + 2.0 * v[3]) / 6.0;
    let q2 = (2.0 * v[2] + 5.0 * v[3] - v[4]) / 6.0;
    let mut w = [0.0; 3];
    weno_weights_into(&weno5_smoothness(v), &WENO5_LINEAR_WEIGHTS, &mut w);
    w[0] * q0 + w[1] * q1 + w[2] * q2
}
