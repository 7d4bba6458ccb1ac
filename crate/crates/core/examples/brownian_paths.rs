//! Simulates tamed paths of the cubic neutral system under Brownian noise.
//!
//! The grid is built from exact rational T, tau, h, so the delay offset is
//! an exact number of steps. Each path is reproducible from (base_seed,
//! path index) alone.
//!
//! Run: cargo run --example brownian_paths

use nsdde::driver::gen_brownian_indexed;
use nsdde::model::{build_grid, parse_rational, sample_segment, History};
use nsdde::problems::make_cubic_neutral;
use nsdde::scheme::simulate_bm;

fn main() {
    let system = make_cubic_neutral(0.25).unwrap();
    let history = History::constant(vec![1.0]);
    let grid = build_grid(
        parse_rational("1").unwrap(),
        parse_rational("1/4").unwrap(),
        parse_rational("1/32").unwrap(),
    )
    .unwrap();
    let seg = sample_segment(&grid, &history).unwrap();

    // One path in full: grid index, time, state.
    let drv = gen_brownian_indexed(&grid, system.dim_noise, 42, 0);
    let rec = simulate_bm(&system, &seg, &drv).unwrap();
    println!("path 0 on h = {} (history at negative indices):", grid.step_f64());
    for (n, x) in rec.entries() {
        if n % 4 == 0 || n < 0 {
            println!("  n = {n:>3}  t = {:>7.4}  x = {:+.6}", n as f64 * grid.step_f64(), x[0]);
        }
    }

    // Terminal statistics over a batch of independent paths.
    let n_paths = 1000;
    let mut terminals = Vec::with_capacity(n_paths);
    for j in 0..n_paths as u64 {
        let drv = gen_brownian_indexed(&grid, system.dim_noise, 42, j);
        let rec = simulate_bm(&system, &seg, &drv).unwrap();
        terminals.push(rec.terminal()[0]);
    }
    let mean = terminals.iter().sum::<f64>() / n_paths as f64;
    let var = terminals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n_paths - 1) as f64;
    println!("\n{n_paths} paths: terminal mean {mean:.4}, std {:.4}", var.sqrt());
}
