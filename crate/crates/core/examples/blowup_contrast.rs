//! Contrasts the raw-drift scheme with the tamed one on identical noise.
//!
//! With a cubic drift and a large starting history, the fixed-step raw
//! recursion overshoots and diverges in a handful of steps; the tamed
//! recursion on the same increments caps each drift contribution at
//! h^(1-alpha) and stays finite.
//!
//! Run: cargo run --example blowup_contrast

use nsdde::driver::gen_brownian_indexed;
use nsdde::model::{build_grid, parse_rational, sample_segment, History};
use nsdde::problems::make_cubic_neutral;
use nsdde::scheme::{simulate_bm, simulate_untamed};

fn main() {
    let system = make_cubic_neutral(0.25).unwrap();
    let history = History::constant(vec![10.0]);
    let grid = build_grid(
        parse_rational("1").unwrap(),
        parse_rational("1/4").unwrap(),
        parse_rational("1/4").unwrap(),
    )
    .unwrap();
    let seg = sample_segment(&grid, &history).unwrap();
    let threshold = 1e10;

    // One path in detail: the raw recursion's states until it crosses.
    let drv = gen_brownian_indexed(&grid, system.dim_noise, 42, 0);
    let raw = simulate_untamed(&system, &seg, &drv, threshold).unwrap();
    println!("raw drift, path 0 (threshold {threshold:.0e}):");
    for (n, x) in raw.entries() {
        if n >= 0 {
            println!("  n = {n}  x = {:+.6e}", x[0]);
        }
    }
    match raw.exploded_from() {
        Some(step) => println!("  crossed at step {step}"),
        None => println!("  stayed below the threshold"),
    }

    let tamed = simulate_bm(&system, &seg, &drv).unwrap();
    println!("tamed drift, same increments:");
    for (n, x) in tamed.entries() {
        if n >= 0 {
            println!("  n = {n}  x = {:+.6}", x[0]);
        }
    }

    // Batch statistics on shared noise.
    let n_paths = 200;
    let mut raw_exploded = 0usize;
    for j in 0..n_paths as u64 {
        let drv = gen_brownian_indexed(&grid, system.dim_noise, 42, j);
        if simulate_untamed(&system, &seg, &drv, threshold).unwrap().exploded_from().is_some() {
            raw_exploded += 1;
        }
        simulate_bm(&system, &seg, &drv).expect("tamed path stays finite");
    }
    println!("\n{n_paths} paths: raw exploded on {raw_exploded}, tamed on 0");
}
