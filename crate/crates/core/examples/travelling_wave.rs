//! The sharp-fronted travelling wave of u_t = u(1 - u^a) + (u^a u_x)_x.
//! Prints the numerical front against the exact one, x = c t, once per
//! unit of time.
//!
//! cargo run --release --example travelling_wave [alpha]

use relaxrd::harness::{error_norm, support_edge, Norm};
use relaxrd::models::{genfk_exact, genfk_problem, genfk_speed, FisherExponents};
use relaxrd::{run, Field, PhiPolicy, ReconstructionKind, SchemeConfig};

fn main() -> relaxrd::Result<()> {
    let alpha: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let problem = genfk_problem(FisherExponents::travelling(alpha))?;
    let cfg = SchemeConfig::new(ReconstructionKind::Eno(3), 2)?.with_phi(PhiPolicy::Fixed(1.0));
    let m = 300;
    let h = 10.0 / m as f64;
    let c = genfk_speed(alpha);
    let snaps = run(problem, m, cfg, 5.0, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0])?;

    println!("alpha = {alpha}, c = {c:.6}, h = {h}");
    println!(
        "{:>4}  {:>9}  {:>9}  {:>9}  {:>10}",
        "t", "exact", "u > 1e-2", "u > 1e-6", "L1 error"
    );
    for s in &snaps {
        let u = &s.fields[0];
        let exact = Field::sample(*u.grid(), |x| genfk_exact(s.t, x[0], alpha));
        let edge = |level| support_edge(u, level).unwrap_or(f64::NAN);
        println!(
            "{:>4}  {:>9.4}  {:>9.4}  {:>9.4}  {:>10.3e}",
            s.t,
            c * s.t,
            edge(1e-2),
            edge(1e-6),
            error_norm(u, &exact, Norm::L1)?
        );
    }
    Ok(())
}
