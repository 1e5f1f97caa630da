//! Finite-time extinction in u_t = lap(u^2) - sqrt(u) on [-2, 2]^2.
//! The mass decreases, the support shrinks and the elliptic shape of the
//! initial bump survives until the solution is gone.
//!
//! cargo run --release --example porous_extinction

use relaxrd::harness::asymmetry;
use relaxrd::models::{extinction_problem, ExtinctionParameters};
use relaxrd::{ReconstructionKind, SchemeConfig, Simulation};

fn main() -> relaxrd::Result<()> {
    let problem = extinction_problem(ExtinctionParameters::default())?;
    let cfg = SchemeConfig::new(ReconstructionKind::Eno(3), 2)?;
    let mut sim = Simulation::new(problem, 64, cfg)?;
    let cell = sim.solver().grid().cell_volume();

    println!(
        "{:>5}  {:>10}  {:>10}  {:>8}  {:>9}",
        "t", "mass", "max u", "support", "asymmetry"
    );
    let mut t = 0.0;
    loop {
        let u = &sim.state().fields[0];
        let values = u.interior();
        let peak = values.iter().copied().fold(0.0, f64::max);
        let support = values.iter().filter(|&&v| v > 1e-6).count() as f64 * cell;
        println!(
            "{t:>5.2}  {:>10.4e}  {:>10.4e}  {support:>8.4}  {:>9.4}",
            u.integral(),
            peak,
            asymmetry(u)?
        );
        if peak < 1e-6 {
            break;
        }
        t += 0.05;
        sim.advance_to(t)?;
    }
    println!("extinct by t = {t:.2} after {} steps", sim.steps());
    Ok(())
}
