//! The relaxed IMEX scheme.
//!
//! In the zero-relaxation-time limit each explicit Runge–Kutta stage is a
//! relaxation step `v = -D A(u) grad u` followed by a transport step of the
//! linear system `u_t + div v = g`, `v_t + φ² grad u = 0`. The transport
//! step is upwinded in the characteristic variables
//! `U = (v + φu) / 2φ` (speed `+φ`) and `V = (φu - v) / 2φ` (speed `-φ`),
//! whose interface values come from ENO/WENO reconstruction. Only `u` is
//! advanced; `v` is recomputed from it at every stage.

use std::fmt;

use crate::error::{Error, Result};
use crate::findiff::{for_each_line, BoundaryPair, GhostFiller, StencilTable};
use crate::mesh::{Field, Grid, Grid1D, Grid2D};
use crate::models::{Problem, Release};
use crate::reconstruct::{ReconstructionKind, Reconstructor};

/// Explicit Runge–Kutta tableau driving the transport steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    name: &'static str,
    order: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Tableau {
    pub fn forward_euler() -> Self {
        Tableau {
            name: "RK1",
            order: 1,
            a: vec![vec![]],
            b: vec![1.0],
        }
    }

    /// Heun's second-order method.
    pub fn heun() -> Self {
        Tableau {
            name: "RK2",
            order: 2,
            a: vec![vec![], vec![1.0]],
            b: vec![0.5, 0.5],
        }
    }

    /// Three-stage strong-stability-preserving method of Shu and Osher.
    pub fn ssp_rk3() -> Self {
        Tableau {
            name: "RK3",
            order: 3,
            a: vec![vec![], vec![1.0], vec![0.25, 0.25]],
            b: vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        }
    }

    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Self::forward_euler()),
            2 => Ok(Self::heun()),
            3 => Ok(Self::ssp_rk3()),
            _ => Err(Error::UnsupportedOrder {
                order,
                reason: "Runge-Kutta order must be 1, 2 or 3",
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `ã_{ik}` for `k < i` (0-based).
    pub fn a(&self, i: usize, k: usize) -> f64 {
        self.a[i][k]
    }

    pub fn b(&self, i: usize) -> f64 {
        self.b[i]
    }

    /// Abscissa `c_i = Σ_k ã_{ik}`.
    pub fn c(&self, i: usize) -> f64 {
        self.a[i].iter().sum()
    }
}

/// How the relaxation speed `φ` is picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiPolicy {
    Fixed(f64),
    /// `φ = κ sqrt(D max A / Δt)` with `Δt` the parabolic step limit.
    Auto {
        kappa: f64,
    },
}

impl Default for PhiPolicy {
    fn default() -> Self {
        PhiPolicy::Auto { kappa: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub reconstruction: ReconstructionKind,
    pub tableau: Tableau,
    /// `C` in `Δt <= C h² / (D max A)`.
    pub cfl_parabolic: f64,
    pub phi_policy: PhiPolicy,
    /// Order `2p` of the gradient in the relaxation step.
    pub gradient_order: usize,
}

pub const DEFAULT_CFL: f64 = 0.25;

/// Bound on `φ Δt Σ 1/h` for the upwind part of the transport step.
pub const HYPERBOLIC_CFL: f64 = 0.5;

impl SchemeConfig {
    /// Pairs a reconstruction with the RK method of the given order and a
    /// gradient of order twice that.
    pub fn new(reconstruction: ReconstructionKind, rk_order: usize) -> Result<Self> {
        let cfg = SchemeConfig {
            reconstruction,
            tableau: Tableau::from_order(rk_order)?,
            cfl_parabolic: DEFAULT_CFL,
            phi_policy: PhiPolicy::default(),
            gradient_order: 2 * rk_order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_phi(mut self, policy: PhiPolicy) -> Self {
        self.phi_policy = policy;
        self
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl_parabolic = cfl;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.reconstruction.validate()?;
        StencilTable::new(self.gradient_order)?;
        if self.gradient_order < 2 * self.tableau.order() {
            return Err(Error::InvalidParameter(format!(
                "gradient order {} is below twice the Runge-Kutta order {}",
                self.gradient_order,
                self.tableau.order()
            )));
        }
        if !(self.cfl_parabolic > 0.0 && self.cfl_parabolic.is_finite()) {
            return Err(Error::InvalidParameter("cfl must be positive".into()));
        }
        match self.phi_policy {
            PhiPolicy::Fixed(phi) if !(phi > 0.0 && phi.is_finite()) => {
                Err(Error::InvalidParameter("fixed phi must be positive".into()))
            }
            PhiPolicy::Auto { kappa } if !(kappa >= 1.0 && kappa.is_finite()) => {
                Err(Error::InvalidParameter("auto phi safety factor must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Ghost cells per side shared by every operator of a run.
    pub fn ghost_width(&self) -> usize {
        self.reconstruction.ghost_width().max(self.gradient_order / 2)
    }
}

impl fmt::Display for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}+{}",
            self.reconstruction.to_string().to_uppercase(),
            self.tableau.name()
        )
    }
}

/// Solution `u` (one field per unknown) and the relaxation fluxes `v`
/// (one field per axis for every diffusing unknown, empty otherwise).
#[derive(Debug, Clone)]
pub struct RelaxState {
    pub fields: Vec<Field>,
    pub fluxes: Vec<Vec<Field>>,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub names: Vec<String>,
    pub fields: Vec<Field>,
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.names.iter().position(|n| n == name).map(|i| &self.fields[i])
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }
}

/// Builds the grid of a problem with `cells` cells per axis.
pub fn problem_grid(problem: &Problem, cells: usize, ghost: usize) -> Result<Grid> {
    let axes: Vec<Grid1D> = problem
        .domain
        .iter()
        .map(|&(a, b)| Grid1D::new(a, b, cells, ghost))
        .collect::<Result<_>>()?;
    match axes.as_slice() {
        [x] => Ok(Grid::One(*x)),
        [x, y] => Ok(Grid::Two(Grid2D::new(*x, *y)?)),
        _ => Err(Error::InvalidParameter(format!(
            "{}D problems are not supported",
            axes.len()
        ))),
    }
}

fn check_same_grid(a: &Field, b: &Field) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `v = -D A(u) ∂u/∂x_axis` at every storage point, one field per axis,
/// for unknown `unknown` of `problem`. Ghosts of `state` must be filled.
pub fn relaxation_step(state: &[Field], unknown: usize, problem: &Problem, order: usize) -> Result<Vec<Field>> {
    let grid = *state[0].grid();
    for f in state {
        check_same_grid(&state[0], f)?;
        if !f.ghosts_filled() {
            return Err(Error::GhostsNotFilled);
        }
    }
    let spec = problem
        .unknowns
        .get(unknown)
        .ok_or_else(|| Error::InvalidParameter(format!("no unknown {unknown}")))?;
    let coef = diffusion_coefficients(state, spec.coefficient, spec.diffusivity.as_deref());
    (0..grid.dim())
        .map(|axis| {
            let mut v = crate::findiff::gradient(&state[unknown], order, axis, &problem.bc)?;
            for (vi, ci) in v.raw_mut().iter_mut().zip(&coef) {
                *vi *= -ci;
            }
            Ok(v)
        })
        .collect()
}

type DiffusivityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// `D A(state)` at every storage point.
fn diffusion_coefficients(state: &[Field], d: f64, a: Option<&DiffusivityFn>) -> Vec<f64> {
    let n = state[0].values().len();
    let Some(a) = a else {
        return vec![0.0; n];
    };
    let mut s = vec![0.0; state.len()];
    (0..n)
        .map(|i| {
            for (k, f) in state.iter().enumerate() {
                s[k] = f.values()[i];
            }
            d * a(&s)
        })
        .collect()
}

/// Characteristic variables `U = (v + φu)/2φ`, `V = (φu - v)/2φ`.
pub fn characteristic_split(u: &Field, v: &Field, phi: f64) -> Result<(Field, Field)> {
    if !(phi > 0.0) {
        return Err(Error::InvalidParameter(format!("phi must be positive, got {phi}")));
    }
    check_same_grid(u, v)?;
    let inv = 0.5 / phi;
    let mut big_u = u.clone();
    let mut big_v = u.clone();
    for i in 0..u.values().len() {
        let (ui, vi) = (u.values()[i], v.values()[i]);
        big_u.raw_mut()[i] = (vi + phi * ui) * inv;
        big_v.raw_mut()[i] = (phi * ui - vi) * inv;
    }
    let filled = u.ghosts_filled() && v.ghosts_filled();
    big_u.set_ghosts_filled(filled);
    big_v.set_ghosts_filled(filled);
    Ok((big_u, big_v))
}

/// `du/dt` at interior cells of a 1D field from upwinded characteristic
/// fluxes `F = φ U⁻ - φ V⁺` plus the reaction values `g_vals`.
pub fn transport_rhs(
    big_u: &Field,
    big_v: &Field,
    phi: f64,
    kind: ReconstructionKind,
    g_vals: &Field,
) -> Result<Field> {
    check_same_grid(big_u, big_v)?;
    check_same_grid(big_u, g_vals)?;
    let grid = *big_u
        .grid_1d()
        .ok_or_else(|| Error::InvalidGrid("transport_rhs expects 1D fields".into()))?;
    let minus = crate::reconstruct::reconstruct_edges(big_u, kind)?.left;
    let plus = crate::reconstruct::reconstruct_edges(big_v, kind)?.right;
    let mut out = Field::zeros(grid);
    let s = phi / grid.h;
    for j in 0..grid.m {
        let i = grid.ghost + j;
        out.raw_mut()[i] = -s * ((minus[j + 1] - minus[j]) - (plus[j + 1] - plus[j])) + g_vals.values()[i];
    }
    Ok(out)
}

/// Picks the relaxation speed. `Auto` returns `κ sqrt(D max A(u0) / Δt)`,
/// maximised over the diffusing unknowns.
pub fn choose_phi(u0: &[Field], problem: &Problem, dt: f64, policy: PhiPolicy) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    match policy {
        PhiPolicy::Fixed(phi) => Ok(phi),
        PhiPolicy::Auto { kappa } => {
            let da = max_diffusivity(u0, problem);
            if !(da > 0.0) {
                return Err(Error::InvalidParameter(
                    "automatic phi needs a non-zero diffusivity somewhere; use a fixed phi".into(),
                ));
            }
            Ok(kappa * (da / dt).sqrt())
        }
    }
}

/// `max_k D_k max_j A_k(u_j)` over interior cells.
pub fn max_diffusivity(fields: &[Field], problem: &Problem) -> f64 {
    let idx = fields[0].grid().interior_indices();
    let mut s = vec![0.0; fields.len()];
    let mut best: f64 = 0.0;
    for spec in &problem.unknowns {
        let Some(a) = &spec.diffusivity else { continue };
        if spec.coefficient == 0.0 {
            continue;
        }
        for &i in &idx {
            for (k, f) in fields.iter().enumerate() {
                s[k] = f.values()[i];
            }
            best = best.max(spec.coefficient * a(&s));
        }
    }
    best
}

/// Upwinded transport of one storage line; shared by 1D and both axes of 2D.
#[derive(Debug, Clone)]
struct LineKernel {
    stencils: StencilTable,
    rec: Reconstructor,
    grad: Vec<f64>,
    big_u: Vec<f64>,
    big_v: Vec<f64>,
    minus: Vec<f64>,
    plus: Vec<f64>,
}

impl LineKernel {
    fn new(cfg: &SchemeConfig) -> Result<Self> {
        Ok(LineKernel {
            stencils: StencilTable::new(cfg.gradient_order)?,
            rec: Reconstructor::new(cfg.reconstruction)?,
            grad: Vec::new(),
            big_u: Vec::new(),
            big_v: Vec::new(),
            minus: Vec::new(),
            plus: Vec::new(),
        })
    }

    /// Adds `-(F_{j+1/2} - F_{j-1/2}) / h` to `out` (interior cells only).
    #[allow(clippy::too_many_arguments)]
    fn transport(&mut self, u: &[f64], coef: &[f64], h: f64, ghost: usize, periodic: bool, phi: f64, out: &mut [f64]) {
        let n = u.len();
        let m = n - 2 * ghost;
        self.grad.resize(n, 0.0);
        self.big_u.resize(n, 0.0);
        self.big_v.resize(n, 0.0);
        self.minus.resize(m + 1, 0.0);
        self.plus.resize(m + 1, 0.0);
        self.stencils.apply_line(u, h, ghost, periodic, &mut self.grad);
        let inv = 0.5 / phi;
        for i in 0..n {
            let v = -coef[i] * self.grad[i];
            self.big_u[i] = (v + phi * u[i]) * inv;
            self.big_v[i] = (phi * u[i] - v) * inv;
        }
        self.rec.minus_edges(&self.big_u, ghost, &mut self.minus);
        self.rec.plus_edges(&self.big_v, ghost, &mut self.plus);
        let s = phi / h;
        for (j, o) in out.iter_mut().enumerate().take(m) {
            *o -= s * ((self.minus[j + 1] - self.minus[j]) - (self.plus[j + 1] - self.plus[j]));
        }
    }

    /// Adds `γ ∂(c ∂p)` to `out` with central differences.
    #[allow(clippy::too_many_arguments)]
    fn advection(
        &mut self,
        carrier: &[f64],
        potential: &[f64],
        h: f64,
        ghost: usize,
        periodic: bool,
        gamma: f64,
        out: &mut [f64],
    ) {
        let n = carrier.len();
        let m = n - 2 * ghost;
        self.grad.resize(n, 0.0);
        self.big_u.resize(n, 0.0);
        self.stencils.apply_line(potential, h, ghost, periodic, &mut self.grad);
        for i in 0..n {
            self.big_u[i] = carrier[i] * self.grad[i];
        }
        self.stencils
            .apply_line(&self.big_u, h, ghost, periodic, &mut self.grad);
        for j in 0..m {
            out[j] += gamma * self.grad[ghost + j];
        }
    }
}

/// Step-size limits at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLimits {
    /// `C / (D max A Σ 1/h²)`, infinite without diffusion.
    pub parabolic: f64,
    /// `0.5 / max |g'|`, infinite without reaction.
    pub reaction: f64,
    /// `max D A` used for `φ`.
    pub max_diffusivity: f64,
}

/// Advances a [`Problem`] on one grid with one [`SchemeConfig`].
pub struct Solver {
    problem: Problem,
    grid: Grid,
    cfg: SchemeConfig,
    ghosts: GhostFiller,
    kernel: LineKernel,
    interior: Vec<usize>,
    stage: Vec<Field>,
    base: Vec<Vec<f64>>,
    slopes: Vec<Vec<Vec<f64>>>,
    coef: Vec<f64>,
    line_u: Vec<f64>,
    line_c: Vec<f64>,
    line_p: Vec<f64>,
    line_out: Vec<f64>,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver")
            .field("problem", &self.problem.name)
            .field("grid", &self.grid)
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl Solver {
    /// `cells` cells along every axis of the problem domain.
    pub fn new(problem: Problem, cells: usize, cfg: SchemeConfig) -> Result<Self> {
        problem.validate()?;
        cfg.validate()?;
        let ghost = cfg.ghost_width();
        let grid = problem_grid(&problem, cells, ghost)?;
        Self::on_grid(problem, grid, cfg)
    }

    /// Uses an existing grid; its ghost width must cover the scheme.
    pub fn on_grid(problem: Problem, grid: Grid, cfg: SchemeConfig) -> Result<Self> {
        problem.validate()?;
        cfg.validate()?;
        if grid.dim() != problem.dim() {
            return Err(Error::InvalidGrid("grid and problem dimensions differ".into()));
        }
        if grid.ghost() < cfg.ghost_width() {
            return Err(Error::InvalidGrid(format!(
                "{cfg} needs {} ghost cells, grid has {}",
                cfg.ghost_width(),
                grid.ghost()
            )));
        }
        for (axis, g) in grid.axes().iter().enumerate() {
            let mut needed = Self::min_cells(&problem, &cfg, axis);
            if problem.bc[axis].is_periodic() {
                needed = needed.max(grid.ghost());
            }
            if g.m < needed {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs at least {needed} cells for {cfg}, has {}",
                    g.m
                )));
            }
        }
        let nf = problem.unknown_count();
        let len = grid.storage_len();
        Ok(Solver {
            ghosts: GhostFiller::new(cfg.gradient_order, grid.ghost())?,
            kernel: LineKernel::new(&cfg)?,
            interior: grid.interior_indices(),
            stage: vec![Field::zeros(grid); nf],
            base: vec![vec![0.0; len]; nf],
            slopes: vec![vec![vec![0.0; len]; nf]; cfg.tableau.stages()],
            coef: vec![0.0; len],
            line_u: Vec::new(),
            line_c: Vec::new(),
            line_p: Vec::new(),
            line_out: Vec::new(),
            problem,
            grid,
            cfg,
        })
    }

    /// Fewest cells `axis` may have: a periodic axis must cover its ghost
    /// layer, a walled one the one-sided gradient stencil.
    pub fn min_cells(problem: &Problem, cfg: &SchemeConfig, axis: usize) -> usize {
        if problem.bc[axis].is_periodic() {
            cfg.ghost_width()
        } else {
            cfg.gradient_order + 1
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn boundary(&self) -> &[BoundaryPair] {
        &self.problem.bc
    }

    /// Initial data sampled at cell centres, with fluxes relaxed.
    pub fn initial_state(&mut self) -> Result<RelaxState> {
        let nf = self.problem.unknown_count();
        let mut fields = vec![Field::zeros(self.grid); nf];
        let mut out = vec![0.0; nf];
        for &i in &self.interior {
            let x = self.grid.coords(i);
            (self.problem.initial)(&x, &mut out);
            for (k, f) in fields.iter_mut().enumerate() {
                f.raw_mut()[i] = out[k];
            }
        }
        let mut state = RelaxState {
            fields,
            fluxes: Vec::new(),
            t: 0.0,
        };
        self.relax(&mut state)?;
        Ok(state)
    }

    /// Fills ghosts of every unknown.
    pub fn fill_ghosts(&self, fields: &mut [Field]) -> Result<()> {
        for f in fields {
            self.ghosts.fill(f, &self.problem.bc)?;
        }
        Ok(())
    }

    /// Recomputes `v` from the current `u` (the relaxation step).
    pub fn relax(&mut self, state: &mut RelaxState) -> Result<()> {
        self.fill_ghosts(&mut state.fields)?;
        let mut fluxes = Vec::with_capacity(state.fields.len());
        for k in 0..state.fields.len() {
            let diffuses = self.problem.unknowns[k].diffusivity.is_some();
            fluxes.push(if diffuses {
                relaxation_step(&state.fields, k, &self.problem, self.cfg.gradient_order)?
            } else {
                Vec::new()
            });
        }
        state.fluxes = fluxes;
        Ok(())
    }

    /// `du/dt` of every unknown at interior cells (other entries zero).
    /// Fills the ghosts of `fields` as a side effect.
    pub fn rhs(&mut self, fields: &mut [Field], phi: f64, out: &mut [Vec<f64>]) -> Result<()> {
        self.fill_ghosts(fields)?;
        let nf = fields.len();
        for o in out.iter_mut() {
            o.fill(0.0);
        }
        if let Some(g) = &self.problem.reaction {
            let mut s = vec![0.0; nf];
            let mut r = vec![0.0; nf];
            for &i in &self.interior {
                for (k, f) in fields.iter().enumerate() {
                    s[k] = f.values()[i];
                }
                g(&s, &mut r);
                for (k, o) in out.iter_mut().enumerate() {
                    o[i] = r[k];
                }
            }
        }
        let mut s = vec![0.0; nf];
        for k in 0..nf {
            let spec = &self.problem.unknowns[k];
            let Some(a) = &spec.diffusivity else { continue };
            if spec.coefficient == 0.0 {
                continue;
            }
            let d = spec.coefficient;
            for (i, c) in self.coef.iter_mut().enumerate() {
                for (l, f) in fields.iter().enumerate() {
                    s[l] = f.values()[i];
                }
                *c = d * a(&s);
            }
            // Upwinding a field with no diffusion anywhere would only add
            // numerical viscosity.
            if self.coef.iter().all(|&c| c == 0.0) {
                continue;
            }
            let u = fields[k].values();
            let dst = &mut out[k];
            match self.grid {
                Grid::One(g) => {
                    let ghost = g.ghost;
                    self.kernel.transport(
                        u,
                        &self.coef,
                        g.h,
                        ghost,
                        self.problem.bc[0].is_periodic(),
                        phi,
                        &mut dst[ghost..ghost + g.m],
                    );
                }
                Grid::Two(g) => {
                    for axis in 0..2 {
                        let h = if axis == 0 { g.x.h } else { g.y.h };
                        let periodic = self.problem.bc[axis].is_periodic();
                        let ghost = g.ghost();
                        let (kernel, coef) = (&mut self.kernel, &self.coef);
                        let (lu, lc, lo) = (&mut self.line_u, &mut self.line_c, &mut self.line_out);
                        for_each_line(&g, axis, |idx| {
                            lu.clear();
                            lc.clear();
                            lu.extend(idx.clone().map(|i| u[i]));
                            lc.extend(idx.clone().map(|i| coef[i]));
                            let m = lu.len() - 2 * ghost;
                            lo.clear();
                            lo.resize(m, 0.0);
                            kernel.transport(lu, lc, h, ghost, periodic, phi, lo);
                            for (i, v) in idx.skip(ghost).take(m).zip(lo.iter()) {
                                dst[i] += v;
                            }
                        });
                    }
                }
            }
        }
        if let Some(adv) = self.problem.advection {
            if adv.gamma != 0.0 {
                self.add_advection(fields, adv.carrier, adv.potential, adv.gamma, out);
            }
        }
        Ok(())
    }

    fn add_advection(&mut self, fields: &[Field], carrier: usize, potential: usize, gamma: f64, out: &mut [Vec<f64>]) {
        let c = fields[carrier].values();
        let p = fields[potential].values();
        let dst = &mut out[carrier];
        match self.grid {
            Grid::One(g) => {
                let ghost = g.ghost;
                self.kernel.advection(
                    c,
                    p,
                    g.h,
                    ghost,
                    self.problem.bc[0].is_periodic(),
                    gamma,
                    &mut dst[ghost..ghost + g.m],
                );
            }
            Grid::Two(g) => {
                for axis in 0..2 {
                    let h = if axis == 0 { g.x.h } else { g.y.h };
                    let periodic = self.problem.bc[axis].is_periodic();
                    let ghost = g.ghost();
                    let kernel = &mut self.kernel;
                    let (lu, lp, lo) = (&mut self.line_u, &mut self.line_p, &mut self.line_out);
                    for_each_line(&g, axis, |idx| {
                        lu.clear();
                        lp.clear();
                        lu.extend(idx.clone().map(|i| c[i]));
                        lp.extend(idx.clone().map(|i| p[i]));
                        let m = lu.len() - 2 * ghost;
                        lo.clear();
                        lo.resize(m, 0.0);
                        kernel.advection(lu, lp, h, ghost, periodic, gamma, lo);
                        for (i, v) in idx.skip(ghost).take(m).zip(lo.iter()) {
                            dst[i] += v;
                        }
                    });
                }
            }
        }
    }

    /// One time step of size `dt` with relaxation speed `phi`.
    pub fn step(&mut self, state: &mut RelaxState, dt: f64, phi: f64) -> Result<()> {
        let nf = state.fields.len();
        let stages = self.cfg.tableau.stages();
        for (b, f) in self.base.iter_mut().zip(&state.fields) {
            b.copy_from_slice(f.values());
        }
        let mut stage = std::mem::take(&mut self.stage);
        let mut slopes = std::mem::take(&mut self.slopes);
        let result = (|| {
            for i in 0..stages {
                for k in 0..nf {
                    let dst = stage[k].raw_mut();
                    dst.copy_from_slice(&self.base[k]);
                    for (l, slope) in slopes.iter().enumerate().take(i) {
                        let w = dt * self.cfg.tableau.a(i, l);
                        if w != 0.0 {
                            for &j in &self.interior {
                                dst[j] += w * slope[k][j];
                            }
                        }
                    }
                    stage[k].set_ghosts_filled(false);
                }
                self.rhs(&mut stage, phi, &mut slopes[i])?;
            }
            Ok::<(), Error>(())
        })();
        self.stage = stage;
        if let Err(e) = result {
            self.slopes = slopes;
            return Err(e);
        }
        for k in 0..nf {
            let dst = state.fields[k].raw_mut();
            for (i, slope) in slopes.iter().enumerate() {
                let w = dt * self.cfg.tableau.b(i);
                for &j in &self.interior {
                    dst[j] += w * slope[k][j];
                }
            }
            state.fields[k].set_ghosts_filled(false);
        }
        self.slopes = slopes;
        state.t += dt;
        self.check_finite(state)?;
        self.relax(state)
    }

    fn check_finite(&self, state: &RelaxState) -> Result<()> {
        for (k, f) in state.fields.iter().enumerate() {
            for &i in &self.interior {
                if !f.values()[i].is_finite() {
                    return Err(Error::NonFinite {
                        field: k,
                        cell: self.grid.cell_label(i),
                        t: state.t,
                    });
                }
            }
        }
        Ok(())
    }

    /// Parabolic and reaction step limits at the given state.
    pub fn limits(&self, fields: &[Field]) -> StepLimits {
        let da = max_diffusivity(fields, &self.problem);
        let inv_h2: f64 = self.grid.axes().iter().map(|g| 1.0 / (g.h * g.h)).sum();
        let parabolic = if da > 0.0 {
            self.cfg.cfl_parabolic / (da * inv_h2)
        } else {
            f64::INFINITY
        };
        let rate = self.reaction_rate_bound(fields);
        let reaction = if rate > 0.0 { 0.5 / rate } else { f64::INFINITY };
        StepLimits {
            parabolic,
            reaction,
            max_diffusivity: da,
        }
    }

    /// Finite-difference estimate of `max |g'|` over the current data.
    ///
    /// Scalar problems sample `g` across `[min u, max u]`; systems use
    /// row sums of a finite-difference Jacobian at up to 64 cells.
    fn reaction_rate_bound(&self, fields: &[Field]) -> f64 {
        let Some(g) = &self.problem.reaction else { return 0.0 };
        let nf = fields.len();
        let (mut lo, mut hi) = (vec![f64::INFINITY; nf], vec![f64::NEG_INFINITY; nf]);
        for &i in &self.interior {
            for k in 0..nf {
                let v = fields[k].values()[i];
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        if nf == 1 {
            const SAMPLES: usize = 32;
            let (mut a, mut b) = (lo[0], hi[0]);
            let scale = a.abs().max(b.abs()).max(1.0);
            if b - a < 1e-12 * scale {
                a -= 1e-6 * scale;
                b += 1e-6 * scale;
            }
            let mut prev = [0.0];
            let mut cur = [0.0];
            g(&[a], &mut prev);
            let step = (b - a) / SAMPLES as f64;
            let mut best: f64 = 0.0;
            for s in 1..=SAMPLES {
                let x = if s == SAMPLES { b } else { a + s as f64 * step };
                g(&[x], &mut cur);
                best = best.max(((cur[0] - prev[0]) / step).abs());
                prev = cur;
            }
            return best;
        }
        let delta: Vec<f64> = (0..nf).map(|k| ((hi[k] - lo[k]) / 32.0).max(1e-8)).collect();
        let stride = (self.interior.len() / 64).max(1);
        let mut s = vec![0.0; nf];
        let (mut r0, mut r1) = (vec![0.0; nf], vec![0.0; nf]);
        let mut best: f64 = 0.0;
        for &i in self.interior.iter().step_by(stride) {
            for k in 0..nf {
                s[k] = fields[k].values()[i];
            }
            g(&s, &mut r0);
            let mut rows = vec![0.0; nf];
            for l in 0..nf {
                let keep = s[l];
                s[l] += delta[l];
                g(&s, &mut r1);
                s[l] = keep;
                for k in 0..nf {
                    rows[k] += ((r1[k] - r0[k]) / delta[l]).abs();
                }
            }
            best = rows.iter().fold(best, |acc, &r| acc.max(r));
        }
        best
    }

    /// Chooses `(Δt, φ)` for the next step, capped at `max_dt`.
    /// `previous_phi` is reused by `Auto` when nothing diffuses.
    pub fn plan_step(&self, fields: &[Field], max_dt: f64, previous_phi: Option<f64>) -> Result<(f64, f64)> {
        let lim = self.limits(fields);
        let phi = match self.cfg.phi_policy {
            PhiPolicy::Fixed(phi) => phi,
            PhiPolicy::Auto { .. } if lim.max_diffusivity > 0.0 => {
                choose_phi(fields, &self.problem, lim.parabolic, self.cfg.phi_policy)?
            }
            PhiPolicy::Auto { .. } => previous_phi.ok_or_else(|| {
                Error::InvalidParameter("automatic phi needs a non-zero diffusivity somewhere; use a fixed phi".into())
            })?,
        };
        let inv_h: f64 = self.grid.axes().iter().map(|g| 1.0 / g.h).sum();
        let hyperbolic = HYPERBOLIC_CFL / (phi * inv_h);
        let dt = lim.parabolic.min(lim.reaction).min(hyperbolic).min(max_dt);
        Ok((dt, phi))
    }
}

/// A running simulation: solver, state and the pending releases.
#[derive(Debug)]
pub struct Simulation {
    solver: Solver,
    state: RelaxState,
    releases: Vec<Release>,
    phi: Option<f64>,
    steps: usize,
    /// Rounding lost when adding steps to `state.t`; the integrated time
    /// is `state.t + clock_carry`.
    clock_carry: f64,
}

impl Simulation {
    pub fn new(problem: Problem, cells: usize, cfg: SchemeConfig) -> Result<Self> {
        Self::from_solver(Solver::new(problem, cells, cfg)?)
    }

    pub fn from_solver(mut solver: Solver) -> Result<Self> {
        let state = solver.initial_state()?;
        let mut releases = solver.problem.releases.clone();
        releases.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut sim = Simulation {
            solver,
            state,
            releases,
            phi: None,
            steps: 0,
            clock_carry: 0.0,
        };
        if let PhiPolicy::Auto { .. } = sim.solver.cfg.phi_policy {
            if max_diffusivity(&sim.state.fields, &sim.solver.problem) == 0.0
                && sim.solver.problem.unknowns.iter().any(|u| u.diffusivity.is_some())
            {
                return Err(Error::InvalidParameter(
                    "initial data has zero diffusivity everywhere; automatic phi needs a fixed phi instead".into(),
                ));
            }
        }
        sim.apply_due_releases()?;
        Ok(sim)
    }

    pub fn state(&self) -> &RelaxState {
        &self.state
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `φ` of the most recent step.
    pub fn phi(&self) -> Option<f64> {
        self.phi
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.state.t,
            names: self.solver.problem.names(),
            fields: self.state.fields.clone(),
        }
    }

    fn apply_due_releases(&mut self) -> Result<()> {
        let t = self.state.t;
        let tol = 1e-12 * t.abs().max(1.0);
        let grid = self.solver.grid;
        let due: Vec<Release> = self.releases.iter().filter(|r| r.time <= t + tol).cloned().collect();
        if due.is_empty() {
            return Ok(());
        }
        self.releases.retain(|r| r.time > t + tol);
        for r in due {
            let f = &mut self.state.fields[r.unknown];
            for i in grid.interior_indices() {
                f.raw_mut()[i] += (r.profile)(&grid.coords(i));
            }
            f.set_ghosts_filled(false);
        }
        self.solver.relax(&mut self.state)
    }

    /// One step of at most `max_dt`; returns the step taken.
    pub fn step(&mut self, max_dt: f64) -> Result<f64> {
        let (dt, phi) = self.solver.plan_step(&self.state.fields, max_dt, self.phi)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time step collapsed to {dt} at t = {}",
                self.state.t
            )));
        }
        let t0 = self.state.t;
        self.solver.step(&mut self.state, dt, phi)?;
        self.clock_carry += two_sum_error(t0, dt, self.state.t);
        self.phi = Some(phi);
        self.steps += 1;
        Ok(dt)
    }

    /// Sets the clock to a time the integration has reached exactly.
    fn set_clock(&mut self, t: f64) {
        self.state.t = t;
        self.clock_carry = 0.0;
    }

    /// Advances to exactly `t_target`, stopping at every release time.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        loop {
            self.apply_due_releases()?;
            let t = self.state.t;
            let stop = self.releases.first().map_or(t_target, |r| r.time.min(t_target));
            // Over many steps the rounded clock drifts from the sum of the
            // steps taken; clip against the compensated time.
            let remaining = (stop - t) - self.clock_carry;
            if remaining <= 4.0 * f64::EPSILON * stop.abs() {
                if stop >= t_target {
                    self.set_clock(t_target.max(t));
                    self.apply_due_releases()?;
                    return Ok(());
                }
                self.set_clock(stop);
                continue;
            }
            let taken = self.step(remaining)?;
            if taken >= remaining {
                self.set_clock(stop);
            }
        }
    }
}

/// Rounding error of `sum = fl(a + b)`: `a + b = sum + error` exactly.
fn two_sum_error(a: f64, b: f64, sum: f64) -> f64 {
    let b_virtual = sum - a;
    let a_virtual = sum - b_virtual;
    (a - a_virtual) + (b - b_virtual)
}

/// Integrates to `t_end`, returning snapshots at the requested times
/// (those beyond `t_end` are dropped; none requested means `t_end` only).
pub fn run(
    problem: Problem,
    cells: usize,
    cfg: SchemeConfig,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<Vec<Snapshot>> {
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    let mut times: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&t| t >= 0.0 && t <= t_end)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.is_empty() {
        times.push(t_end);
    }
    let mut sim = Simulation::new(problem, cells, cfg)?;
    let mut out = Vec::with_capacity(times.len());
    for t in times {
        sim.advance_to(t)?;
        out.push(sim.snapshot());
    }
    Ok(out)
}
