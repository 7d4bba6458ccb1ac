//! Coupled self-refinement study on the superlinear neutral system.
//!
//! No closed form exists, so the reference is the same scheme at a much
//! finer step driven by the same Brownian path: each coarse grid's
//! increments are exact block sums of the reference increments, and errors
//! are compared at shared grid times only.
//!
//! Run: cargo run --example neutral_self_rate

use nsdde::analysis::{strong_error_bm, SweepSpec};
use nsdde::model::{parse_rational, History};
use nsdde::problems::make_cubic_neutral;

fn main() {
    let system = make_cubic_neutral(0.25).unwrap();
    let history = History::constant(vec![1.0]);
    let sweep = SweepSpec {
        horizon: parse_rational("1").unwrap(),
        delay: parse_rational("1/4").unwrap(),
        h_list: ["1/16", "1/32", "1/64", "1/128"]
            .iter()
            .map(|s| parse_rational(s).unwrap())
            .collect(),
        p: 2.0,
        n_paths: 2000,
        base_seed: 42,
    };
    let h_ref = parse_rational("1/2048").unwrap();
    let report = strong_error_bm(&system, &history, &sweep, h_ref).unwrap();
    print!("{}", report.to_csv());
    let fit = report.fit.unwrap();
    println!(
        "\nfitted order of E[sup^2] in h against the 1/2048 reference: slope {:.4}, r^2 {:.4}",
        fit.slope, fit.r_squared
    );
}
