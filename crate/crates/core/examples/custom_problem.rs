//! A problem built from scratch: the porous-medium equation u_t = (u u_x)_x
//! started from a Barenblatt profile, advanced step by step and compared
//! with the self-similar solution.
//!
//! cargo run --release --example custom_problem

use std::sync::Arc;

use relaxrd::harness::{error_norm, Norm};
use relaxrd::{BoundaryPair, Field, PhiPolicy, Problem, ReconstructionKind, SchemeConfig, Simulation};

/// Barenblatt solution of u_t = (u u_x)_x = (u^2 / 2)_xx.
fn barenblatt(t: f64, x: f64) -> f64 {
    let s = t.powf(-1.0 / 3.0);
    (s * (1.0 - x * x * s * s / 6.0)).max(0.0)
}

fn main() -> relaxrd::Result<()> {
    let t0 = 1.0;
    let problem = Problem::scalar(
        "barenblatt",
        vec![(-8.0, 8.0)],
        vec![BoundaryPair::free_flow()],
        1.0,
        Some(Arc::new(|s| s[0].max(0.0))),
        None,
        Arc::new(move |x| barenblatt(t0, x[0])),
    );
    let cfg = SchemeConfig::new(ReconstructionKind::Eno(3), 2)?.with_phi(PhiPolicy::Fixed(1.0));
    for m in [80, 160, 320] {
        let mut sim = Simulation::new(problem.clone(), m, cfg.clone())?;
        let mut last = 0.0;
        while sim.time() < 2.0 - 1e-12 {
            last = sim.step(2.0 - sim.time())?;
        }
        let u = &sim.state().fields[0];
        let exact = Field::sample(*u.grid(), |x| barenblatt(t0 + sim.time(), x[0]));
        println!(
            "m = {m:>3}: {:>5} steps (last dt {last:.2e}), L1 error {:.3e}, mass {:.12}",
            sim.steps(),
            error_norm(u, &exact, Norm::L1)?,
            u.integral()
        );
    }
    Ok(())
}
