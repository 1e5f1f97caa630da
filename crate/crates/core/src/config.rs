//! Run descriptions: a TOML file naming the problem, grid, scheme and
//! outputs of a run, a convergence study or an oracle comparison.
//!
//! ```toml
//! problem = "genfk"
//! m = 300
//! reconstruction = "eno3"
//! rk = 2
//! t_end = 5.0
//! phi = 1.0
//! snapshots = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
//!
//! [genfk]
//! alpha = 2.0
//! ```

use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::harness::{check_nested, refinement_factor, Reference};
use crate::models::{
    extinction_problem, frog_problem, frog_release_profile, genfk_problem, heat_problem, ExtinctionParameters,
    FisherExponents, FrogParameters, Problem,
};
use crate::reconstruct::ReconstructionKind;
use crate::relax::{PhiPolicy, SchemeConfig, Solver, Tableau, DEFAULT_CFL};

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Heat,
    Genfk(FisherExponents),
    Extinction(ExtinctionParameters),
    Frog { params: FrogParameters, release_time: f64 },
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Heat => "heat",
            ProblemConfig::Genfk(_) => "genfk",
            ProblemConfig::Extinction(_) => "extinction",
            ProblemConfig::Frog { .. } => "frog",
        }
    }

    fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "heat" => ProblemConfig::Heat,
            "genfk" => ProblemConfig::Genfk(FisherExponents::travelling(2.0)),
            "extinction" => ProblemConfig::Extinction(ExtinctionParameters::default()),
            "frog" => ProblemConfig::Frog {
                params: FrogParameters::default(),
                release_time: 5.0,
            },
            _ => return None,
        })
    }
}

/// One `reconstruction + RK order` pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeChoice {
    pub reconstruction: ReconstructionKind,
    pub rk: usize,
}

impl SchemeChoice {
    /// Parses `eno3+rk2` (case-insensitive).
    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let (rec, rk) = lower
            .split_once('+')
            .ok_or_else(|| Error::InvalidParameter(format!("scheme `{s}` is not of the form eno3+rk2")))?;
        let rk = rk
            .trim()
            .strip_prefix("rk")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::InvalidParameter(format!("scheme `{s}` has no rk<order> part")))?;
        Tableau::from_order(rk)?;
        Ok(SchemeChoice {
            reconstruction: rec.parse()?,
            rk,
        })
    }
}

impl std::fmt::Display for SchemeChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}+rk{}", self.reconstruction, self.rk)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub m: Vec<usize>,
    pub reference: Reference,
    /// Schemes to compare; empty means the top-level scheme only.
    pub schemes: Vec<SchemeChoice>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// Cells per axis.
    pub m: usize,
    /// Overrides the problem's default domain (every axis in 2D).
    pub domain: Option<(f64, f64)>,
    pub scheme: SchemeChoice,
    pub cfl: f64,
    pub phi: PhiPolicy,
    /// `None` means twice the RK order.
    pub gradient_order: Option<usize>,
    pub t_end: f64,
    /// Output times; empty means `t_end` only.
    pub snapshots: Vec<f64>,
    pub out: Option<PathBuf>,
    pub study: Option<StudyConfig>,
    pub oracle: Option<OracleConfig>,
}

impl RunConfig {
    /// The scheme described by the top-level keys.
    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        self.scheme_config_for(self.scheme)
    }

    /// `choice` with the run's CFL, `φ` policy and gradient order.
    pub fn scheme_config_for(&self, choice: SchemeChoice) -> Result<SchemeConfig> {
        let cfg = SchemeConfig {
            reconstruction: choice.reconstruction,
            tableau: Tableau::from_order(choice.rk)?,
            cfl_parabolic: self.cfl,
            phi_policy: self.phi,
            gradient_order: self.gradient_order.unwrap_or(2 * choice.rk),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let mut problem = match self.problem {
            ProblemConfig::Heat => heat_problem(),
            ProblemConfig::Genfk(exp) => genfk_problem(exp)?,
            ProblemConfig::Extinction(par) => extinction_problem(par)?,
            ProblemConfig::Frog { params, release_time } => {
                frog_problem(params, release_time, Arc::new(frog_release_profile))?
            }
        };
        if let Some(d) = self.domain {
            problem.domain.iter_mut().for_each(|axis| *axis = d);
        }
        Ok(problem)
    }

    /// Every scheme the config asks for: the study list, or the top-level
    /// scheme.
    pub fn schemes(&self) -> Vec<SchemeChoice> {
        match &self.study {
            Some(s) if !s.schemes.is_empty() => s.schemes.clone(),
            _ => vec![self.scheme],
        }
    }

    /// Writes the config back as TOML that parses to an equal config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem = {}", quote(self.problem.name()));
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "reconstruction = {}", quote(&self.scheme.reconstruction.to_string()));
        let _ = writeln!(s, "rk = {}", self.scheme.rk);
        let _ = writeln!(s, "t_end = {}", float(self.t_end));
        let _ = writeln!(s, "cfl = {}", float(self.cfl));
        match self.phi {
            PhiPolicy::Fixed(phi) => {
                let _ = writeln!(s, "phi = {}", float(phi));
            }
            PhiPolicy::Auto { kappa } => {
                let _ = writeln!(s, "phi = \"auto\"\nkappa = {}", float(kappa));
            }
        }
        if let Some(p) = self.gradient_order {
            let _ = writeln!(s, "gradient_order = {p}");
        }
        let _ = writeln!(s, "snapshots = {}", float_list(&self.snapshots));
        if let Some((a, b)) = self.domain {
            let _ = writeln!(s, "domain = {}", float_list(&[a, b]));
        }
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", quote(&out.to_string_lossy()));
        }
        match self.problem {
            ProblemConfig::Heat => {}
            ProblemConfig::Genfk(e) => {
                let _ = write!(
                    s,
                    "\n[genfk]\np = {}\nq = {}\nm = {}\n",
                    float(e.p),
                    float(e.q),
                    float(e.m)
                );
            }
            ProblemConfig::Extinction(e) => {
                let _ = write!(
                    s,
                    "\n[extinction]\nm = {}\np = {}\nc = {}\nperturbation = {}\nheight = {}\n",
                    float(e.m),
                    float(e.p),
                    float(e.c),
                    float(e.perturbation),
                    float(e.height)
                );
            }
            ProblemConfig::Frog {
                params: f,
                release_time,
            } => {
                let _ = write!(
                    s,
                    "\n[frog]\nmu = {}\ngamma = {}\nalpha = {}\nbeta = {}\nu0 = {}\ncapacity = {}\nrelease_time = {}\n",
                    float(f.mu),
                    float(f.gamma),
                    float(f.alpha),
                    float(f.beta),
                    float(f.u0),
                    float(f.capacity),
                    float(release_time)
                );
            }
        }
        if let Some(st) = &self.study {
            let m: Vec<String> = st.m.iter().map(|m| m.to_string()).collect();
            let _ = write!(s, "\n[study]\nm = [{}]\n", m.join(", "));
            match st.reference {
                Reference::Exact => s.push_str("reference = \"exact\"\n"),
                Reference::FineGrid(m_ref) => {
                    let _ = writeln!(s, "reference = \"fine\"\nm_ref = {m_ref}");
                }
            }
            if !st.schemes.is_empty() {
                let names: Vec<String> = st.schemes.iter().map(|c| quote(&c.to_string())).collect();
                let _ = writeln!(s, "schemes = [{}]", names.join(", "));
            }
        }
        if let Some(o) = &self.oracle {
            let _ = write!(s, "\n[oracle]\nsteps = {}\n", o.steps);
        }
        s
    }
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

/// Shortest representation that reads back to the same `f64`.
fn float(x: f64) -> String {
    format!("{x:?}")
}

fn float_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|&x| float(x)).collect();
    format!("[{}]", items.join(", "))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Spanned<String>,
    m: Spanned<i64>,
    reconstruction: Spanned<String>,
    rk: Spanned<i64>,
    t_end: Spanned<f64>,
    cfl: Option<Spanned<f64>>,
    phi: Option<Spanned<RawPhi>>,
    kappa: Option<Spanned<f64>>,
    gradient_order: Option<Spanned<i64>>,
    snapshots: Option<Spanned<Vec<f64>>>,
    domain: Option<Spanned<Vec<f64>>>,
    out: Option<String>,
    genfk: Option<Spanned<RawGenfk>>,
    extinction: Option<Spanned<RawExtinction>>,
    frog: Option<Spanned<RawFrog>>,
    study: Option<Spanned<RawStudy>>,
    oracle: Option<Spanned<RawOracle>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPhi {
    Fixed(f64),
    Named(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenfk {
    alpha: Option<f64>,
    p: Option<f64>,
    q: Option<f64>,
    m: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExtinction {
    m: Option<f64>,
    p: Option<f64>,
    c: Option<f64>,
    perturbation: Option<f64>,
    height: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrog {
    mu: Option<f64>,
    gamma: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    u0: Option<f64>,
    capacity: Option<f64>,
    release_time: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    m: Spanned<Vec<i64>>,
    reference: Option<Spanned<String>>,
    m_ref: Option<Spanned<i64>>,
    schemes: Option<Spanned<Vec<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    steps: Option<Spanned<i64>>,
}

/// Maps byte offsets of the source text to line numbers.
struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn error(&self, span: &Range<usize>, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line(span),
            message: message.into(),
        }
    }

    /// Attaches the line of `span` to a library error.
    fn wrap<T>(&self, span: &Range<usize>, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Config { .. } => e,
            other => self.error(span, other.to_string()),
        })
    }

    fn count(&self, v: &Spanned<i64>, key: &str, min: usize) -> Result<usize> {
        match usize::try_from(*v.get_ref()) {
            Ok(n) if n >= min => Ok(n),
            _ => Err(self.error(
                &v.span(),
                format!("`{key}` must be an integer >= {min}, got {}", v.get_ref()),
            )),
        }
    }
}

/// Parses and validates a run description.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let src = Source { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map_or(1, |s| src.line(&s)),
        message: e.message().trim().to_owned(),
    })?;

    let name_span = raw.problem.span();
    let mut problem = ProblemConfig::default_for(raw.problem.get_ref()).ok_or_else(|| {
        src.error(
            &name_span,
            format!(
                "unknown problem `{}` (expected heat, genfk, extinction or frog)",
                raw.problem.get_ref()
            ),
        )
    })?;
    let problem_name = problem.name();
    let foreign = |section: &str, span: Range<usize>| {
        Err(src.error(&span, format!("[{section}] does not apply to problem `{problem_name}`")))
    };
    if let Some(sec) = &raw.genfk {
        let ProblemConfig::Genfk(exp) = &mut problem else {
            return foreign("genfk", sec.span());
        };
        let g = sec.get_ref();
        if let Some(alpha) = g.alpha {
            if g.p.is_some() || g.q.is_some() || g.m.is_some() {
                return Err(src.error(&sec.span(), "give either `alpha` or the exponents `p`, `q`, `m`"));
            }
            *exp = FisherExponents::travelling(alpha);
        } else {
            *exp = FisherExponents {
                p: g.p.unwrap_or(exp.p),
                q: g.q.unwrap_or(exp.q),
                m: g.m.unwrap_or(exp.m),
            };
        }
    }
    if let Some(sec) = &raw.extinction {
        let ProblemConfig::Extinction(par) = &mut problem else {
            return foreign("extinction", sec.span());
        };
        let e = sec.get_ref();
        *par = ExtinctionParameters {
            m: e.m.unwrap_or(par.m),
            p: e.p.unwrap_or(par.p),
            c: e.c.unwrap_or(par.c),
            perturbation: e.perturbation.unwrap_or(par.perturbation),
            height: e.height.unwrap_or(par.height),
        };
    }
    if let Some(sec) = &raw.frog {
        let ProblemConfig::Frog { params, release_time } = &mut problem else {
            return foreign("frog", sec.span());
        };
        let f = sec.get_ref();
        *params = FrogParameters {
            mu: f.mu.unwrap_or(params.mu),
            gamma: f.gamma.unwrap_or(params.gamma),
            alpha: f.alpha.unwrap_or(params.alpha),
            beta: f.beta.unwrap_or(params.beta),
            u0: f.u0.unwrap_or(params.u0),
            capacity: f.capacity.unwrap_or(params.capacity),
        };
        *release_time = f.release_time.unwrap_or(*release_time);
    }

    let m = src.count(&raw.m, "m", 1)?;
    let reconstruction = src.wrap(&raw.reconstruction.span(), raw.reconstruction.get_ref().parse())?;
    let rk = src.count(&raw.rk, "rk", 1)?;
    src.wrap(&raw.rk.span(), Tableau::from_order(rk))?;
    let t_end = *raw.t_end.get_ref();
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(src.error(
            &raw.t_end.span(),
            format!("`t_end` must be finite and >= 0, got {t_end}"),
        ));
    }
    let cfl = match &raw.cfl {
        Some(c) if !(*c.get_ref() > 0.0 && c.get_ref().is_finite()) => {
            return Err(src.error(&c.span(), "`cfl` must be positive"));
        }
        Some(c) => *c.get_ref(),
        None => DEFAULT_CFL,
    };
    let phi = match raw.phi.as_ref().map(|p| (p.get_ref(), p.span())) {
        Some((RawPhi::Fixed(value), span)) => {
            if let Some(k) = &raw.kappa {
                return Err(src.error(&k.span(), "`kappa` only applies when phi = \"auto\""));
            }
            if !(*value > 0.0 && value.is_finite()) {
                return Err(src.error(&span, "`phi` must be positive"));
            }
            PhiPolicy::Fixed(*value)
        }
        Some((RawPhi::Named(name), span)) if name != "auto" => {
            return Err(src.error(&span, format!("`phi` must be \"auto\" or a number, got `{name}`")));
        }
        _ => match &raw.kappa {
            Some(k) if !(*k.get_ref() >= 1.0 && k.get_ref().is_finite()) => {
                return Err(src.error(&k.span(), "`kappa` must be >= 1"));
            }
            Some(k) => PhiPolicy::Auto { kappa: *k.get_ref() },
            None => PhiPolicy::default(),
        },
    };
    let gradient_order = match &raw.gradient_order {
        Some(g) => Some(src.count(g, "gradient_order", 2)?),
        None => None,
    };
    let snapshots = match &raw.snapshots {
        Some(s) => {
            let times = s.get_ref().clone();
            if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= t_end)) {
                return Err(src.error(
                    &s.span(),
                    format!("snapshot time {t} lies outside [0, t_end = {t_end}]"),
                ));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(src.error(&s.span(), "snapshot times must be strictly increasing"));
            }
            times
        }
        None => Vec::new(),
    };
    let domain = match &raw.domain {
        Some(d) => match d.get_ref().as_slice() {
            &[a, b] if a.is_finite() && b.is_finite() && a < b => Some((a, b)),
            _ => return Err(src.error(&d.span(), "`domain` must be [a, b] with a < b")),
        },
        None => None,
    };

    let study = match &raw.study {
        Some(sec) => {
            let st = sec.get_ref();
            let m_list =
                st.m.get_ref()
                    .iter()
                    .map(|&v| usize::try_from(v).ok().filter(|&v| v > 0))
                    .collect::<Option<Vec<usize>>>()
                    .ok_or_else(|| src.error(&st.m.span(), "study grid sizes must be positive"))?;
            src.wrap(&st.m.span(), refinement_factor(&m_list))?;
            let reference = match st.reference.as_ref().map(|r| (r.get_ref().as_str(), r.span())) {
                None | Some(("exact", _)) => {
                    if let Some(r) = &st.m_ref {
                        return Err(src.error(&r.span(), "`m_ref` needs reference = \"fine\""));
                    }
                    Reference::Exact
                }
                Some(("fine", span)) => {
                    let r = st
                        .m_ref
                        .as_ref()
                        .ok_or_else(|| src.error(&span, "reference = \"fine\" needs `m_ref`"))?;
                    let m_ref = src.count(r, "m_ref", 1)?;
                    src.wrap(&r.span(), check_nested(m_ref, *m_list.last().unwrap()))?;
                    Reference::FineGrid(m_ref)
                }
                Some((other, span)) => {
                    return Err(src.error(
                        &span,
                        format!("`reference` must be \"exact\" or \"fine\", got `{other}`"),
                    ));
                }
            };
            let schemes = match &st.schemes {
                Some(list) => list
                    .get_ref()
                    .iter()
                    .map(|s| src.wrap(&list.span(), SchemeChoice::parse(s)))
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            Some(StudyConfig {
                m: m_list,
                reference,
                schemes,
            })
        }
        None => None,
    };
    let oracle = match &raw.oracle {
        Some(sec) => Some(OracleConfig {
            steps: match &sec.get_ref().steps {
                Some(s) => src.count(s, "steps", 1)?,
                None => 1,
            },
        }),
        None => None,
    };

    let cfg = RunConfig {
        problem,
        m,
        domain,
        scheme: SchemeChoice { reconstruction, rk },
        cfl,
        phi,
        gradient_order,
        t_end,
        snapshots,
        out: raw.out.map(PathBuf::from),
        study,
        oracle,
    };

    // Cross-checks against the problem and the schemes it will run.
    let problem_span = raw
        .genfk
        .as_ref()
        .map(|s| s.span())
        .or(raw.extinction.as_ref().map(|s| s.span()))
        .or(raw.frog.as_ref().map(|s| s.span()))
        .unwrap_or(name_span);
    let built = src.wrap(&problem_span, cfg.build_problem().and_then(|p| p.validate().map(|_| p)))?;
    let scheme_span = raw.gradient_order.as_ref().map_or(raw.rk.span(), |g| g.span());
    for choice in cfg.schemes() {
        let scheme = src.wrap(&scheme_span, cfg.scheme_config_for(choice))?;
        let needed = (0..built.dim())
            .map(|axis| Solver::min_cells(&built, &scheme, axis))
            .max()
            .unwrap_or(1);
        let smallest = cfg.study.as_ref().map_or(m, |s| s.m[0]).min(m);
        if smallest < needed {
            return Err(src.error(
                &raw.m.span(),
                format!(
                    "{needed} cells per axis are needed for {choice} on `{}`, got {smallest}",
                    built.name
                ),
            ));
        }
    }
    Ok(cfg)
}

/// Reads and parses a config file; I/O failures name the file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        Error::Config { line, message } => Error::Config {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}
