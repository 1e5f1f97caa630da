//! Error norms, convergence studies and solution diagnostics.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{restrict_to_coarse, Field, Grid};
use crate::models::Problem;
use crate::reconstruct::ReconstructionKind;
use crate::relax::{PhiPolicy, SchemeConfig, Simulation, Solver, Tableau};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    /// `h Σ |e|`.
    L1,
    /// `sqrt(h Σ e²)`, the discrete analogue of the L2 norm.
    L2,
    /// `h sqrt(Σ e²)`. Scales like `sqrt(h)` times `L2`, so its observed
    /// rates are half an order higher on 1D refinement.
    DiscreteL2,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::L1, Norm::L2, Norm::DiscreteL2];
}

/// Error between two fields over interior cells; `h` is the cell volume
/// (`h_x h_y` in 2D).
pub fn error_norm(numeric: &Field, reference: &Field, which: Norm) -> Result<f64> {
    if !numeric.grid().same_cells(reference.grid()) {
        return Err(Error::GridMismatch);
    }
    let w = numeric.grid().cell_volume();
    let (a, b) = (numeric.interior(), reference.interior());
    let diffs = a.iter().zip(&b).map(|(x, y)| x - y);
    Ok(match which {
        Norm::L1 => w * diffs.map(f64::abs).sum::<f64>(),
        Norm::L2 => (w * diffs.map(|e| e * e).sum::<f64>()).sqrt(),
        Norm::DiscreteL2 => w * diffs.map(|e| e * e).sum::<f64>().sqrt(),
    })
}

/// Observed order between successive errors on grids refined by `ratio`.
pub fn rate(coarse_error: f64, fine_error: f64, ratio: f64) -> f64 {
    (coarse_error / fine_error).ln() / ratio.ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// The problem's exact solution sampled at cell centres.
    Exact,
    /// A run on `m_ref` cells, restricted to each coarse grid.
    FineGrid(usize),
}

/// Errors of one run in every norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub m: usize,
    pub error_l1: f64,
    pub error_l2: f64,
    pub error_dl2: f64,
    pub steps: usize,
    pub wall_time: f64,
}

impl Measurement {
    pub fn error(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L1 => self.error_l1,
            Norm::L2 => self.error_l2,
            Norm::DiscreteL2 => self.error_dl2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub m: usize,
    pub error_l1: f64,
    pub error_l2: f64,
    pub error_dl2: f64,
    pub rate_l1: Option<f64>,
    pub rate_l2: Option<f64>,
    pub rate_dl2: Option<f64>,
    pub steps: usize,
    pub wall_time: f64,
}

impl ReportRow {
    pub fn error(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L1 => self.error_l1,
            Norm::L2 => self.error_l2,
            Norm::DiscreteL2 => self.error_dl2,
        }
    }

    pub fn rate(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::L1 => self.rate_l1,
            Norm::L2 => self.rate_l2,
            Norm::DiscreteL2 => self.rate_dl2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub label: String,
    pub refinement: f64,
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    /// Builds rows, with rates between consecutive grids.
    pub fn from_errors(label: impl Into<String>, refinement: f64, errors: &[Measurement]) -> Self {
        let rows = errors
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let prev = k.checked_sub(1).map(|p| errors[p]);
                let r = |norm| prev.map(|p: Measurement| rate(p.error(norm), e.error(norm), refinement));
                ReportRow {
                    m: e.m,
                    error_l1: e.error_l1,
                    error_l2: e.error_l2,
                    error_dl2: e.error_dl2,
                    rate_l1: r(Norm::L1),
                    rate_l2: r(Norm::L2),
                    rate_dl2: r(Norm::DiscreteL2),
                    steps: e.steps,
                    wall_time: e.wall_time,
                }
            })
            .collect();
        RunReport {
            label: label.into(),
            refinement,
            rows,
        }
    }

    pub fn rates(&self, norm: Norm) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate(norm)).collect()
    }

    /// Rate between the two finest grids.
    pub fn finest_rate(&self, norm: Norm) -> Option<f64> {
        self.rates(norm).last().copied()
    }

    pub fn mean_rate(&self, norm: Norm) -> Option<f64> {
        let r = self.rates(norm);
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }

    pub fn error(&self, m: usize, norm: Norm) -> Option<f64> {
        self.rows.iter().find(|r| r.m == m).map(|r| r.error(norm))
    }
}

/// Constant integer factor between consecutive study grids.
pub fn refinement_factor(m_list: &[usize]) -> Result<usize> {
    if m_list.len() < 2 {
        return Err(Error::InvalidParameter("a study needs at least two grids".into()));
    }
    let r = m_list[1] / m_list[0];
    let ok = r >= 2 && m_list.windows(2).all(|w| w[1] == r * w[0]);
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "grid sizes {m_list:?} must grow by a constant integer factor"
        )));
    }
    Ok(r)
}

struct Outcome {
    field: Field,
    steps: usize,
    seconds: f64,
}

fn run_to(problem: &Problem, cfg: &SchemeConfig, m: usize, t_end: f64) -> Result<Outcome> {
    let start = Instant::now();
    let mut sim = Simulation::new(problem.clone(), m, cfg.clone())?;
    sim.advance_to(t_end)?;
    Ok(Outcome {
        field: sim.state().fields[0].clone(),
        steps: sim.steps(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Checks that `m_ref = 3^k coarse` with `k >= 1`.
pub fn check_nested(m_ref: usize, coarse: usize) -> Result<()> {
    let mut q = m_ref / coarse.max(1);
    while q > 1 && q.is_multiple_of(3) {
        q /= 3;
    }
    if coarse == 0 || !m_ref.is_multiple_of(coarse) || m_ref == coarse || q != 1 {
        return Err(Error::NotNested { fine: m_ref, coarse });
    }
    Ok(())
}

/// Runs `problem` on every grid in `m_list` (in parallel) and measures the
/// first unknown at `t_end` against `reference`.
pub fn convergence_study(
    problem: &Problem,
    cfg: &SchemeConfig,
    m_list: &[usize],
    t_end: f64,
    reference: Reference,
) -> Result<RunReport> {
    let r = refinement_factor(m_list)?;
    let fine = match reference {
        Reference::Exact => {
            if problem.exact.is_none() {
                return Err(Error::InvalidParameter(format!(
                    "problem {} has no exact solution",
                    problem.name
                )));
            }
            None
        }
        Reference::FineGrid(m_ref) => {
            check_nested(m_ref, *m_list.last().unwrap())?;
            Some(m_ref)
        }
    };
    let jobs: Vec<usize> = m_list.iter().copied().chain(fine).collect();
    let outcomes: Vec<Result<Outcome>> = jobs
        .par_iter()
        .map(|&m| run_to(problem, cfg, m, t_end).map_err(|e| Error::Study { m, source: Box::new(e) }))
        .collect();
    let mut outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let reference_field = fine.map(|_| outcomes.pop().unwrap().field);
    let mut errors = Vec::with_capacity(m_list.len());
    for (m, out) in m_list.iter().zip(&outcomes) {
        let exact = match &reference_field {
            Some(f) => {
                let coarse = out
                    .field
                    .grid_1d()
                    .ok_or_else(|| Error::InvalidGrid("fine-grid references are supported in 1D only".into()))?;
                restrict_to_coarse(f, coarse)?
            }
            None => {
                let u = problem.exact.as_ref().unwrap();
                Field::sample(*out.field.grid(), |x| u(t_end, x))
            }
        };
        errors.push(Measurement {
            m: *m,
            error_l1: error_norm(&out.field, &exact, Norm::L1)?,
            error_l2: error_norm(&out.field, &exact, Norm::L2)?,
            error_dl2: error_norm(&out.field, &exact, Norm::DiscreteL2)?,
            steps: out.steps,
            wall_time: out.seconds,
        });
    }
    let label = format!("{} {}", problem.name, cfg);
    Ok(RunReport::from_errors(label, r as f64, &errors))
}

/// Runs the first-order relaxed scheme (piecewise-constant reconstruction,
/// forward Euler) next to a direct explicit discretisation of
/// `u_t = D (A(u) u_x)_x + g(u)` with the same steps, and returns the
/// largest pointwise difference after `steps` steps.
///
/// The direct scheme uses arithmetic-mean interface diffusivities. Both
/// reduce to forward Euler on `g` when `A ≡ 0`.
pub fn oracle_compare(problem: &Problem, m: usize, steps: usize) -> Result<f64> {
    if problem.dim() != 1 || problem.unknown_count() != 1 {
        return Err(Error::InvalidParameter("the oracle handles scalar 1D problems".into()));
    }
    let cfg = SchemeConfig {
        reconstruction: ReconstructionKind::Constant,
        tableau: Tableau::forward_euler(),
        cfl_parabolic: crate::relax::DEFAULT_CFL,
        phi_policy: PhiPolicy::Fixed(1.0),
        gradient_order: 2,
    };
    let mut solver = Solver::new(problem.clone(), m, cfg)?;
    let mut state = solver.initial_state()?;
    let mut direct = state.fields[0].clone();
    let g1 = *solver.grid().axes().first().unwrap();
    let (ghost, h) = (g1.ghost, g1.h);
    let spec = &problem.unknowns[0];
    let a = |u: f64| spec.diffusivity.as_ref().map_or(0.0, |a| spec.coefficient * a(&[u]));
    let mut r = [0.0];
    for _ in 0..steps {
        let lim = solver.limits(&state.fields);
        let dt = lim.parabolic.min(lim.reaction).min(1e-3);
        // The relaxed flux needs φ large enough to stay monotone.
        let phi = (lim.max_diffusivity / dt).sqrt().max(1.0);
        let dt = dt.min(0.5 * h / phi);
        solver.step(&mut state, dt, phi)?;

        solver.fill_ghosts(std::slice::from_mut(&mut direct))?;
        let u = direct.values().to_vec();
        let next = direct.values_mut();
        for i in ghost..ghost + g1.m {
            let ar = 0.5 * (a(u[i]) + a(u[i + 1]));
            let al = 0.5 * (a(u[i - 1]) + a(u[i]));
            let mut rhs = (ar * (u[i + 1] - u[i]) - al * (u[i] - u[i - 1])) / (h * h);
            if let Some(g) = &problem.reaction {
                g(&[u[i]], &mut r);
                rhs += r[0];
            }
            next[i] = u[i] + dt * rhs;
        }
    }
    let (x, y) = (state.fields[0].interior(), direct.interior());
    Ok(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
}

/// Coordinate of the right edge of the support: the right face of the last
/// cell whose value exceeds `threshold`, or `None` if there is none.
pub fn support_edge(field: &Field, threshold: f64) -> Option<f64> {
    let g = field.grid_1d()?;
    (1..=g.m)
        .rev()
        .find(|&j| field.at(j) > threshold)
        .map(|j| g.center(j) + 0.5 * g.h)
}

/// `Σ |u_{j+1} - u_j|` over interior neighbours of a 1D field.
pub fn total_variation(field: &Field) -> f64 {
    field.interior().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// 1-based indices of interior cells that are strict local maxima above
/// `floor`.
pub fn local_maxima(field: &Field, floor: f64) -> Vec<usize> {
    let v = field.interior();
    (0..v.len())
        .filter(|&j| v[j] > floor && (j == 0 || v[j] > v[j - 1]) && (j + 1 == v.len() || v[j] > v[j + 1]))
        .map(|j| j + 1)
        .collect()
}

/// Relative strength of the second angular mode of a 2D density about
/// the origin: `|∫ u e^{2iθ}| / ∫ u`. Zero for radial data.
pub fn asymmetry(field: &Field) -> Result<f64> {
    let Grid::Two(_) = field.grid() else {
        return Err(Error::InvalidGrid("asymmetry is defined for 2D fields".into()));
    };
    let grid = *field.grid();
    let (mut re, mut im, mut total) = (0.0, 0.0, 0.0);
    for i in grid.interior_indices() {
        let u = field.values()[i].max(0.0);
        let x = grid.coords(i);
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 > 0.0 {
            // cos 2θ and sin 2θ without trigonometry.
            re += u * (x[0] * x[0] - x[1] * x[1]) / r2;
            im += u * 2.0 * x[0] * x[1] / r2;
        }
        total += u;
    }
    Ok(if total > 0.0 {
        (re * re + im * im).sqrt() / total
    } else {
        0.0
    })
}
