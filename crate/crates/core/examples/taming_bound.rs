//! Shows the drift-taming cap in action on a superlinear drift.
//!
//! The tamed drift b_h = b / (1 + h^alpha |b|) satisfies
//! |b_h| <= min(h^-alpha, |b|) exactly, so one step's drift contribution
//! |b_h| h is capped at h^(1-alpha) no matter how large the state gets.
//!
//! Run: cargo run --example taming_bound

use std::sync::Arc;

use nsdde::model::norm;
use nsdde::problems::make_cubic_neutral;
use nsdde::taming::tame;

fn main() {
    let system = make_cubic_neutral(0.25).unwrap();
    let alpha = system.alpha;

    println!("cubic drift at growing states, alpha = {alpha}");
    println!("{:>10} {:>8} {:>14} {:>14} {:>12}", "x", "h", "|b(x,y)|", "|b_h(x,y)|", "h^-alpha");
    for &h in &[0.25, 0.0625, 0.015625] {
        let tamed = tame(Arc::clone(&system.drift), h, alpha).unwrap();
        let cap = tamed.cap();
        for &x in &[1.0, 10.0, 100.0, 1000.0] {
            let y = [0.5];
            let raw = norm(&(system.drift)(&[x], &y));
            let capped = norm(&tamed.eval(&[x], &y));
            assert!(capped <= cap && capped <= raw);
            println!("{x:>10} {h:>8} {raw:>14.4e} {capped:>14.4e} {cap:>12.4e}");
        }
    }
    println!("\nevery tamed magnitude is <= min(h^-alpha, raw magnitude)");
}
