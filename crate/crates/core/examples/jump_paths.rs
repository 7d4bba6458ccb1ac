//! Simulates tamed paths driven by compensated pure-jump noise.
//!
//! The event stream (times and marks) is generated once per path,
//! independent of any grid; each step folds in the events that fall inside
//! its window and subtracts the compensator drift, so between events the
//! path drifts and at events it jumps.
//!
//! Run: cargo run --example jump_paths

use nsdde::driver::gen_jumps_indexed;
use nsdde::model::{build_grid, parse_rational, sample_segment, History};
use nsdde::problems::make_jump_cubic_neutral;
use nsdde::scheme::simulate_jump;

fn main() {
    let system = make_jump_cubic_neutral(0.25, 2.0, 0.5).unwrap();
    let history = History::constant(vec![1.0]);
    let grid = build_grid(
        parse_rational("1").unwrap(),
        parse_rational("1/4").unwrap(),
        parse_rational("1/32").unwrap(),
    )
    .unwrap();
    let seg = sample_segment(&grid, &history).unwrap();

    println!("jump-driven neutral system, intensity {}:", system.total_intensity);
    let mut total_events = 0usize;
    for j in 0..5u64 {
        let jr = gen_jumps_indexed(&grid, system.total_intensity, &system.mark_sampler, 42, j)
            .unwrap();
        let rec = simulate_jump(&system, &seg, &grid, &jr).unwrap();
        total_events += jr.events().len();
        println!(
            "  path {j}: {} events, terminal {:+.6}, sup |x| {:.6}",
            jr.events().len(),
            rec.terminal()[0],
            rec.sup_norm()
        );
    }
    println!("mean events per path {:.1} (expected {})", total_events as f64 / 5.0, 2.0);

    // The same realization drives any grid: refining the grid re-parcels
    // the identical events into smaller windows.
    let jr = gen_jumps_indexed(&grid, system.total_intensity, &system.mark_sampler, 42, 0).unwrap();
    let fine_grid = build_grid(
        parse_rational("1").unwrap(),
        parse_rational("1/4").unwrap(),
        parse_rational("1/256").unwrap(),
    )
    .unwrap();
    let fine_seg = sample_segment(&fine_grid, &history).unwrap();
    let coarse = simulate_jump(&system, &seg, &grid, &jr).unwrap();
    let fine = simulate_jump(&system, &fine_seg, &fine_grid, &jr).unwrap();
    println!(
        "\nshared realization, two grids: terminal {:.6} (h=1/32) vs {:.6} (h=1/256)",
        coarse.terminal()[0],
        fine.terminal()[0]
    );
}
