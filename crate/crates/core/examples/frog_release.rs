//! Two frog populations released at the same spot, the second after the
//! first has settled. The late batch is pushed out past the settled one.
//!
//! cargo run --release --example frog_release

use std::sync::Arc;

use relaxrd::harness::local_maxima;
use relaxrd::models::{frog, frog_problem, frog_release_profile, FrogParameters};
use relaxrd::{run, ReconstructionKind, SchemeConfig};

fn main() -> relaxrd::Result<()> {
    let problem = frog_problem(FrogParameters::default(), 5.0, Arc::new(frog_release_profile))?;
    let cfg = SchemeConfig::new(ReconstructionKind::Eno(3), 2)?;
    let m = 200;
    let snaps = run(problem, m, cfg, 20.0, &[0.5, 5.0, 5.5, 10.0, 15.0, 20.0])?;

    println!(
        "{:>5}  {:>9}  {:>9}  {:>9}  {:>9}  {:>12}",
        "t", "u_m", "u_s", "v_m", "v_s", "v_s peaks"
    );
    for s in &snaps {
        let mass = |k: usize| s.fields[k].integral();
        let g = s.grid().axes()[0];
        let peaks: Vec<String> = local_maxima(&s.fields[frog::V_SETTLED], 1e-3)
            .into_iter()
            .map(|j| format!("{:+.2}", g.center(j)))
            .collect();
        println!(
            "{:>5}  {:>9.5}  {:>9.5}  {:>9.5}  {:>9.5}  {}",
            s.t,
            mass(frog::U_MOVING),
            mass(frog::U_SETTLED),
            mass(frog::V_MOVING),
            mass(frog::V_SETTLED),
            peaks.join(" ")
        );
    }
    Ok(())
}
