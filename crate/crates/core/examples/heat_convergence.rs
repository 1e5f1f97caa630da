//! Grid refinement on the heat equation: errors and observed orders for a
//! few reconstruction/RK pairings against the exact decaying sine.
//!
//! cargo run --release --example heat_convergence

use relaxrd::config::SchemeChoice;
use relaxrd::harness::{convergence_study, Norm, Reference};
use relaxrd::models::heat_problem;
use relaxrd::{PhiPolicy, SchemeConfig};

fn main() -> relaxrd::Result<()> {
    let heat = heat_problem();
    let grids = [12, 36, 108, 324];
    for name in ["eno2+rk1", "eno3+rk2", "weno5+rk3"] {
        let choice = SchemeChoice::parse(name)?;
        // A frozen phi lets the upwind viscosity phi*h/2 vanish with h.
        let cfg = SchemeConfig::new(choice.reconstruction, choice.rk)?.with_phi(PhiPolicy::Fixed(24.0));
        let report = convergence_study(&heat, &cfg, &grids, 0.01, Reference::Exact)?;
        println!("{cfg}");
        println!("  {:>5}  {:>11}  {:>6}  {:>6}", "m", "L1", "rate", "steps");
        for row in &report.rows {
            let rate = row.rate(Norm::L1).map_or("".into(), |r| format!("{r:.3}"));
            println!("  {:>5}  {:>11.4e}  {:>6}  {:>6}", row.m, row.error_l1, rate, row.steps);
        }
    }
    Ok(())
}
