//! Strong convergence against a closed-form solution.
//!
//! Geometric Brownian motion has an exact solution driven by the same
//! increments the scheme sees, so the error E[sup_n |Y_h - X|^2] is measured
//! against the truth with no reference-discretization bias. The fitted
//! log-log slope sits near 1 (order 1/2 per power of the error).
//!
//! Run: cargo run --example gbm_exact_rate

use nsdde::analysis::{strong_error_bm_exact, SweepSpec};
use nsdde::model::parse_rational;
use nsdde::problems::make_gbm;

fn main() {
    let problem = make_gbm(0.05, 0.2, 1.0).unwrap();
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
    let report =
        strong_error_bm_exact(&problem.system, &problem.history, &problem.exact_path, &sweep)
            .unwrap();
    print!("{}", report.to_csv());
    let fit = report.fit.unwrap();
    println!(
        "\nfitted order of E[sup^2] in h: slope {:.4}, r^2 {:.4}",
        fit.slope, fit.r_squared
    );
}
