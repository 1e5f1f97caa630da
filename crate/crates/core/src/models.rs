//! Problem definitions: `u_t = D div(A(u) grad u) + g(u)` and its
//! reaction-coupled systems, plus the catalogue of test problems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::findiff::BoundaryPair;

/// Diffusivity of one unknown as a function of all unknowns at a point.
pub type Diffusivity = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Reaction rates of all unknowns: `(state, out)`.
pub type Reaction = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Initial values of all unknowns at a point: `(x, out)`.
pub type InitialData = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Exact solution of the first unknown: `(t, x)`.
pub type ExactSolution = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// A spatial profile.
pub type Profile = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Unknown {
    pub name: String,
    /// Coefficient `D` in front of the diffusion operator.
    pub coefficient: f64,
    /// `A(·)`; `None` means the unknown does not diffuse.
    pub diffusivity: Option<Diffusivity>,
}

impl fmt::Debug for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Unknown")
            .field("name", &self.name)
            .field("coefficient", &self.coefficient)
            .field("diffuses", &self.diffusivity.is_some())
            .finish()
    }
}

/// `γ div(carrier · grad potential)` added to the carrier's equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtraAdvection {
    pub gamma: f64,
    pub carrier: usize,
    pub potential: usize,
}

/// Adds `profile` to one unknown when the simulation reaches `time`.
#[derive(Clone)]
pub struct Release {
    pub time: f64,
    pub unknown: usize,
    pub profile: Profile,
}

impl fmt::Debug for Release {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Release")
            .field("time", &self.time)
            .field("unknown", &self.unknown)
            .finish()
    }
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    /// `[a, b]` per axis; its length is the space dimension.
    pub domain: Vec<(f64, f64)>,
    pub unknowns: Vec<Unknown>,
    pub reaction: Option<Reaction>,
    pub advection: Option<ExtraAdvection>,
    pub initial: InitialData,
    pub bc: Vec<BoundaryPair>,
    pub exact: Option<ExactSolution>,
    pub releases: Vec<Release>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("unknowns", &self.unknowns)
            .field("has_reaction", &self.reaction.is_some())
            .field("advection", &self.advection)
            .field("bc", &self.bc)
            .field("has_exact", &self.exact.is_some())
            .field("releases", &self.releases)
            .finish()
    }
}

impl Problem {
    /// A scalar problem `u_t = D div(A(u) grad u) + g(u)`.
    pub fn scalar(
        name: impl Into<String>,
        domain: Vec<(f64, f64)>,
        bc: Vec<BoundaryPair>,
        coefficient: f64,
        diffusivity: Option<Diffusivity>,
        reaction: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        initial: Profile,
    ) -> Self {
        Problem {
            name: name.into(),
            domain,
            unknowns: vec![Unknown {
                name: "u".into(),
                coefficient,
                diffusivity,
            }],
            reaction: reaction.map(|g| -> Reaction { Arc::new(move |s, out| out[0] = g(s[0])) }),
            advection: None,
            initial: Arc::new(move |x, out| out[0] = initial(x)),
            bc,
            exact: None,
            releases: Vec::new(),
        }
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.unknowns.iter().map(|u| u.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim()) {
            return Err(Error::InvalidParameter(format!(
                "only 1D and 2D problems are supported, got {}D",
                self.dim()
            )));
        }
        if self.bc.len() != self.dim() {
            return Err(Error::InvalidBoundary(format!(
                "{} boundary pairs for a {}D problem",
                self.bc.len(),
                self.dim()
            )));
        }
        for pair in &self.bc {
            pair.validate()?;
        }
        if self.unknowns.is_empty() {
            return Err(Error::InvalidParameter("problem has no unknowns".into()));
        }
        for u in &self.unknowns {
            if !(u.coefficient >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "diffusion coefficient of `{}` must be non-negative",
                    u.name
                )));
            }
        }
        if let Some(adv) = self.advection {
            let n = self.unknowns.len();
            if adv.carrier >= n || adv.potential >= n {
                return Err(Error::InvalidParameter("advection refers to a missing unknown".into()));
            }
        }
        if let Some(g) = &self.reaction {
            let zero = vec![0.0; self.unknowns.len()];
            let mut out = zero.clone();
            g(&zero, &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "reaction is not finite at the zero state".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Heat equation `u_t = u_xx` on [0, 1], periodic, `u0 = sin 2πx`.
pub fn heat_problem() -> Problem {
    Problem::scalar(
        "heat",
        vec![(0.0, 1.0)],
        vec![BoundaryPair::periodic()],
        1.0,
        Some(Arc::new(|_| 1.0)),
        None,
        Arc::new(|x| (2.0 * PI * x[0]).sin()),
    )
    .with_exact(Arc::new(heat_exact))
}

pub fn heat_exact(t: f64, x: &[f64]) -> f64 {
    (-4.0 * PI * PI * t).exp() * (2.0 * PI * x[0]).sin()
}

/// Exponents of `u_t = u^p (1 - u^q) + (u^m u_x)_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherExponents {
    pub p: f64,
    pub q: f64,
    pub m: f64,
}

impl FisherExponents {
    /// The case `p = 1`, `q = m = α` that admits an explicit travelling wave.
    pub fn travelling(alpha: f64) -> Self {
        FisherExponents {
            p: 1.0,
            q: alpha,
            m: alpha,
        }
    }

    /// `α` when the exponents admit the explicit travelling wave.
    pub fn wave_alpha(&self) -> Option<f64> {
        (self.p == 1.0 && self.q == self.m && self.m > 0.0).then_some(self.m)
    }
}

/// Generalised Fisher–Kolmogoroff equation on [-5, 5] with free-flow
/// walls. The initial datum is the travelling wave at `t = 0` when the
/// exponents admit one, a smoothed step otherwise.
pub fn genfk_problem(exp: FisherExponents) -> Result<Problem> {
    if !(exp.m > 0.0) || !(exp.q > 0.0) || !(exp.p > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Fisher exponents must be positive, got p={} q={} m={}",
            exp.p, exp.q, exp.m
        )));
    }
    let FisherExponents { p, q, m } = exp;
    let alpha = exp.wave_alpha();
    let initial: Profile = match alpha {
        Some(a) => Arc::new(move |x| genfk_exact(0.0, x[0], a)),
        None => Arc::new(|x| 0.5 * (1.0 - (4.0 * x[0]).tanh())),
    };
    let mut problem = Problem::scalar(
        "genfk",
        vec![(-5.0, 5.0)],
        vec![BoundaryPair::free_flow()],
        1.0,
        Some(Arc::new(move |s| s[0].max(0.0).powf(m))),
        Some(Arc::new(move |u| {
            let up = u.max(0.0);
            up.powf(p) * (1.0 - up.powf(q))
        })),
        initial,
    );
    if let Some(a) = alpha {
        problem.exact = Some(Arc::new(move |t, x| genfk_exact(t, x[0], a)));
    }
    Ok(problem)
}

/// Speed `1/√(1+α)` of the explicit travelling wave.
pub fn genfk_speed(alpha: f64) -> f64 {
    1.0 / (1.0 + alpha).sqrt()
}

/// `[(1 - exp(α (x - c t) / √(1+α)))^{1/α}]_+`.
pub fn genfk_exact(t: f64, x: f64, alpha: f64) -> f64 {
    let c = genfk_speed(alpha);
    let base = 1.0 - (alpha * (x - c * t) / (1.0 + alpha).sqrt()).exp();
    if base <= 0.0 {
        0.0
    } else {
        base.powf(1.0 / alpha)
    }
}

/// Parameters of `u_t = Δ(u^m) - c u^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionParameters {
    pub m: f64,
    pub p: f64,
    pub c: f64,
    /// Ellipticity of the initial bump (0 = radially symmetric).
    pub perturbation: f64,
    /// Peak value of the initial bump.
    pub height: f64,
}

impl Default for ExtinctionParameters {
    fn default() -> Self {
        ExtinctionParameters {
            m: 2.0,
            p: 0.5,
            c: 1.0,
            perturbation: 0.2,
            height: 0.25,
        }
    }
}

/// Porous medium with strong absorption on [-2, 2]^2, written in
/// nonconservative form `A(u) = m u^{m-1}`, `g(u) = -c u^p` (zero for
/// `u <= 0`). The initial bump `H max(0, 1 - r^2 (1 + δ cos 2θ))` is radially
/// symmetric up to the small elliptic perturbation `δ`.
pub fn extinction_problem(par: ExtinctionParameters) -> Result<Problem> {
    let ExtinctionParameters {
        m,
        p,
        c,
        perturbation,
        height,
    } = par;
    if !(m > 1.0) || !(p > 0.0 && p < 1.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "extinction needs m > 1, 0 < p < 1, c > 0 (got m={m}, p={p}, c={c})"
        )));
    }
    if !(perturbation.abs() < 1.0) {
        return Err(Error::InvalidParameter("perturbation must lie in (-1, 1)".into()));
    }
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bump height must be positive, got {height}"
        )));
    }
    Ok(Problem::scalar(
        "extinction",
        vec![(-2.0, 2.0), (-2.0, 2.0)],
        vec![BoundaryPair::dirichlet(0.0, 0.0), BoundaryPair::dirichlet(0.0, 0.0)],
        1.0,
        Some(Arc::new(move |s| m * s[0].max(0.0).powf(m - 1.0))),
        Some(Arc::new(move |u| if u > 0.0 { -c * u.powf(p) } else { 0.0 })),
        Arc::new(move |x| height * extinction_initial(x[0], x[1], perturbation)),
    ))
}

/// The unit-height bump `max(0, 1 - r^2 - δ (x^2 - y^2))`.
pub fn extinction_initial(x: f64, y: f64, perturbation: f64) -> f64 {
    let r2 = x * x + y * y;
    // r^2 cos 2θ = x^2 - y^2
    (1.0 - r2 - perturbation * (x * x - y * y)).max(0.0)
}

/// `χ(x) = 1` for `x > 0`, else 0.
#[inline]
pub fn chi(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrogParameters {
    pub mu: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Density scale in `D(u) = u / u0`.
    pub u0: f64,
    /// Total density at which settling stops.
    pub capacity: f64,
}

impl Default for FrogParameters {
    fn default() -> Self {
        FrogParameters {
            mu: 1.0,
            gamma: 0.0,
            alpha: 0.01,
            beta: 10.0,
            u0: 0.25,
            capacity: 0.25,
        }
    }
}

impl FrogParameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.mu, self.alpha, self.beta, self.u0, self.capacity];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frog parameters must be positive (gamma non-negative): {self:?}"
            )));
        }
        Ok(())
    }

    /// Density-dependent dispersal `D(u) = u / u0`.
    pub fn dispersal(&self, total: f64) -> f64 {
        total.max(0.0) / self.u0
    }

    /// Settling rate; the pheromone argument is accepted but unused.
    pub fn settling(&self, total: f64, _pheromone: f64) -> f64 {
        chi(1.0 - total / self.capacity)
    }
}

/// Index of each unknown in the frog system.
pub mod frog {
    pub const U_MOVING: usize = 0;
    pub const U_SETTLED: usize = 1;
    pub const PHEROMONE: usize = 2;
    pub const V_MOVING: usize = 3;
    pub const V_SETTLED: usize = 4;
    pub const NAMES: [&str; 5] = ["u_m", "u_s", "c_u", "v_m", "v_s"];
}

/// `u_m(0, x) = 2.5 exp(-100 x^2)`.
pub fn frog_release_profile(x: &[f64]) -> f64 {
    2.5 * (-100.0 * x[0] * x[0]).exp()
}

/// Dispersal and settling of two frog populations on [-4, 4] with
/// free-flow walls. The second population is released at
/// `second_release_time` with `release_profile`.
pub fn frog_problem(params: FrogParameters, second_release_time: f64, release_profile: Profile) -> Result<Problem> {
    use frog::*;
    params.validate()?;
    if !(second_release_time >= 0.0) {
        return Err(Error::InvalidParameter("release time must be non-negative".into()));
    }
    let p = params;
    let unknowns = vec![
        Unknown {
            name: NAMES[U_MOVING].into(),
            coefficient: p.mu,
            diffusivity: Some(Arc::new(move |s| p.dispersal(s[U_MOVING] + s[U_SETTLED]))),
        },
        Unknown {
            name: NAMES[U_SETTLED].into(),
            coefficient: 0.0,
            diffusivity: None,
        },
        Unknown {
            name: NAMES[PHEROMONE].into(),
            coefficient: p.alpha,
            diffusivity: Some(Arc::new(|_| 1.0)),
        },
        Unknown {
            name: NAMES[V_MOVING].into(),
            coefficient: p.mu,
            diffusivity: Some(Arc::new(move |s| p.dispersal(s[V_MOVING] + s[V_SETTLED]))),
        },
        Unknown {
            name: NAMES[V_SETTLED].into(),
            coefficient: 0.0,
            diffusivity: None,
        },
    ];
    let reaction: Reaction = Arc::new(move |s, out| frog_reaction(&p, s, out));
    Ok(Problem {
        name: "frog".into(),
        domain: vec![(-4.0, 4.0)],
        unknowns,
        reaction: Some(reaction),
        advection: (p.gamma != 0.0).then_some(ExtraAdvection {
            gamma: p.gamma,
            carrier: V_MOVING,
            potential: PHEROMONE,
        }),
        initial: Arc::new(|x, out| {
            out.fill(0.0);
            out[U_MOVING] = frog_release_profile(x);
        }),
        bc: vec![BoundaryPair::free_flow()],
        exact: None,
        releases: vec![Release {
            time: second_release_time,
            unknown: V_MOVING,
            profile: release_profile,
        }],
    })
}

/// Settling transfers, pheromone production and decay.
pub fn frog_reaction(p: &FrogParameters, s: &[f64], out: &mut [f64]) {
    use frog::*;
    let u_rate = p.settling(s[U_MOVING] + s[U_SETTLED], s[PHEROMONE]) * s[U_MOVING];
    let v_rate = p.settling(s[U_SETTLED] + s[V_MOVING] + s[V_SETTLED], s[PHEROMONE]) * s[V_MOVING];
    out[U_MOVING] = -u_rate;
    out[U_SETTLED] = u_rate;
    out[PHEROMONE] = p.beta * (s[U_MOVING] + s[U_SETTLED] - s[PHEROMONE]);
    out[V_MOVING] = -v_rate;
    out[V_SETTLED] = v_rate;
}
