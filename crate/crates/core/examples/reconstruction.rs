//! Interface values of ENO and WENO reconstructions next to a jump stay
//! inside the data range (WENO up to round-off), and on smooth data the
//! flux differences converge at the formal order.
//!
//! cargo run --example reconstruction

use relaxrd::findiff::fill_ghosts;
use relaxrd::reconstruct::reconstruct_edges;
use relaxrd::{make_grid, BoundaryPair, Field, ReconstructionKind};

fn main() -> relaxrd::Result<()> {
    let kinds = [
        ReconstructionKind::Constant,
        ReconstructionKind::Eno(3),
        ReconstructionKind::Eno(6),
        ReconstructionKind::Weno(5),
    ];
    let grid = make_grid(0.0, 1.0, 20, 6)?;
    let mut step = Field::sample(grid, |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
    fill_ghosts(&mut step, &[BoundaryPair::free_flow()], 2)?;

    println!("{:>8}  {:>12}  {:>12}", "kind", "min edge", "max edge");
    for kind in kinds {
        let e = reconstruct_edges(&step, kind)?;
        let all = e.left.iter().chain(&e.right);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        println!("{kind:>8}  {lo:>12.3e}  {hi:>12.6}");
    }

    // Smooth data: interface values are those of a primitive whose cell
    // averages are the samples, so (u-_{j+1/2} - u-_{j-1/2}) / h ~ u'(x_j).
    // Where an ENO stencil switches between neighbours that difference
    // loses one order, so the error is measured in L1.
    println!("\nsin(2 pi x), L1 error of the interface differences");
    let tau = 2.0 * std::f64::consts::PI;
    for kind in &kinds[1..] {
        let errors: Vec<f64> = [40, 80]
            .iter()
            .map(|&m| {
                let g = make_grid(0.0, 1.0, m, 6).unwrap();
                let mut f = Field::sample(g, |x| (tau * x[0]).sin());
                fill_ghosts(&mut f, &[BoundaryPair::periodic()], 2).unwrap();
                let e = reconstruct_edges(&f, *kind).unwrap();
                (1..=m)
                    .map(|j| ((e.left[j] - e.left[j - 1]) / g.h - tau * (tau * g.center(j)).cos()).abs() * g.h)
                    .sum::<f64>()
            })
            .collect();
        println!(
            "{kind:>8}  m=40 {:.3e}  m=80 {:.3e}  order {:.2}",
            errors[0],
            errors[1],
            (errors[0] / errors[1]).log2()
        );
    }
    Ok(())
}
