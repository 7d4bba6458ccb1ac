//! Explicit recursion driven by Brownian increments.
//!
//! One step advances the difference variable `Y - D(Y_delayed)`:
//!
//! ```text
//! Y(n+1) = D(Y(n+1-Mbar)) + Y(n) - D(Y(n-Mbar))
//!          + b_h(Y(n), Y(n-Mbar)) h + sigma(Y(n), Y(n-Mbar)) dB(n)
//! ```
//!
//! where `b_h` is the tamed drift for the grid step `h` and the recursion
//! runs for `n = 0, ..., M-1` after seeding `Y(n) = xi(n h)` for
//! `n = -Mbar, ..., 0`. The delayed argument of the neutral term on the left
//! is `Y(n+1-Mbar)`, which is always at least `Mbar` steps behind the value
//! being produced, so the recursion stays explicit.
//!
//! [`simulate_bm`] and [`step_bm`] share one update routine, so recomputing a
//! single transition from a stored path reproduces the stored value bit for
//! bit. [`simulate_untamed`] runs the same recursion with the raw drift and
//! an explosion threshold; it records the crossing instead of failing, which
//! is what the taming comparison experiments need.

use crate::driver::BrownianPathIncrements;
use crate::error::{Error, Result};
use crate::model::{norm, DiffusionSystem, InitialSegment, PathRecord};
use crate::taming::tame;

/// Computes the right-hand side of the recursion for one step.
///
/// Returns the raw next state without any finiteness check; callers decide
/// whether a non-finite or oversized value is an error or an explosion event.
fn advance(
    sys: &DiffusionSystem,
    drift_eval: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    y_n: &[f64],
    y_n_delay: &[f64],
    y_np1_delay: &[f64],
    h: f64,
    db: &[f64],
) -> Vec<f64> {
    let d_new = (sys.neutral)(y_np1_delay);
    let d_old = (sys.neutral)(y_n_delay);
    let b = drift_eval(y_n, y_n_delay);
    let sig = (sys.diffusion)(y_n, y_n_delay);
    let d = sys.dim_state;
    let m = sys.dim_noise;
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mut noise = 0.0;
        for j in 0..m {
            noise += sig[i * m + j] * db[j];
        }
        out.push(d_new[i] + y_n[i] - d_old[i] + b[i] * h + noise);
    }
    out
}

fn check_dims(sys: &DiffusionSystem, states: &[&[f64]], db: &[f64]) -> Result<()> {
    for s in states {
        if s.len() != sys.dim_state {
            return Err(Error::GridMismatch(format!(
                "state has dimension {}, system expects {}",
                s.len(),
                sys.dim_state
            )));
        }
    }
    if db.len() != sys.dim_noise {
        return Err(Error::GridMismatch(format!(
            "increment has dimension {}, system expects {}",
            db.len(),
            sys.dim_noise
        )));
    }
    Ok(())
}

/// Applies one tamed step from the three states it depends on.
///
/// `y_n` and `y_n_delay` feed the drift, diffusion, and outgoing neutral
/// term; `y_np1_delay` feeds the incoming neutral term. The drift is tamed
/// for this `h` and the system's taming exponent.
pub fn step_bm(
    sys: &DiffusionSystem,
    y_n: &[f64],
    y_n_delay: &[f64],
    y_np1_delay: &[f64],
    h: f64,
    db: &[f64],
) -> Result<Vec<f64>> {
    check_dims(sys, &[y_n, y_n_delay, y_np1_delay], db)?;
    let tamed = tame(sys.drift.clone(), h, sys.alpha)?;
    let out = advance(sys, &|x, y| tamed.eval(x, y), y_n, y_n_delay, y_np1_delay, h, db);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFiniteState { step: None })
    }
}

/// Runs the recursion over the whole grid of `drv`.
///
/// With `explosion_threshold = None` a non-finite state aborts with an error
/// carrying the offending grid index. With a threshold, the first step whose
/// result is non-finite or exceeds the threshold in norm ends the path early
/// and the crossing index is recorded on the returned record.
fn run(
    sys: &DiffusionSystem,
    drift_eval: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    seg: &InitialSegment,
    drv: &BrownianPathIncrements,
    explosion_threshold: Option<f64>,
) -> Result<PathRecord> {
    if seg.dim() != sys.dim_state {
        return Err(Error::GridMismatch(format!(
            "segment dimension {} does not match system dimension {}",
            seg.dim(),
            sys.dim_state
        )));
    }
    if drv.dim_noise() != sys.dim_noise {
        return Err(Error::GridMismatch(format!(
            "driver has {} noise components, system expects {}",
            drv.dim_noise(),
            sys.dim_noise
        )));
    }
    let grid = drv.grid().clone();
    if seg.delay_steps() != grid.delay_steps() {
        return Err(Error::GridMismatch(format!(
            "segment covers {} delay steps, grid has {}",
            seg.delay_steps(),
            grid.delay_steps()
        )));
    }
    let d = sys.dim_state;
    let mbar = grid.delay_steps();
    let steps = grid.steps();
    let h = grid.step_f64();
    let mut values = Vec::with_capacity((mbar + steps + 1) * d);
    values.extend_from_slice(seg.raw());
    for n in 0..steps {
        // Row r of `values` holds grid index r - Mbar, so grid index q sits
        // at row q + Mbar. The delayed rows n and n + 1 are always filled
        // because Mbar >= 1.
        let next = {
            let y_n = &values[(n + mbar) * d..(n + mbar + 1) * d];
            let y_n_delay = &values[n * d..(n + 1) * d];
            let y_np1_delay = &values[(n + 1) * d..(n + 2) * d];
            advance(sys, drift_eval, y_n, y_n_delay, y_np1_delay, h, drv.increment(n))
        };
        let finite = next.iter().all(|v| v.is_finite());
        match explosion_threshold {
            None => {
                if !finite {
                    return Err(Error::NonFiniteState { step: Some(n + 1) });
                }
                values.extend_from_slice(&next);
            }
            Some(threshold) => {
                values.extend_from_slice(&next);
                if !finite || norm(&next) > threshold {
                    return Ok(PathRecord::from_parts(grid, d, values, Some(n + 1)));
                }
            }
        }
    }
    Ok(PathRecord::from_parts(grid, d, values, None))
}

/// Simulates one tamed path over the grid of `drv`.
///
/// The drift is tamed once with the grid's step size; each step then matches
/// [`step_bm`] exactly, so any stored transition can be recomputed bit for
/// bit from the record.
pub fn simulate_bm(
    sys: &DiffusionSystem,
    seg: &InitialSegment,
    drv: &BrownianPathIncrements,
) -> Result<PathRecord> {
    let tamed = tame(sys.drift.clone(), drv.grid().step_f64(), sys.alpha)?;
    run(sys, &|x, y| tamed.eval(x, y), seg, drv, None)
}

/// Simulates one path with the raw, untamed drift and an explosion guard.
///
/// The recursion is identical to [`simulate_bm`] except that the drift is
/// used as given. Superlinear drifts blow up under this scheme for fixed
/// step sizes, so instead of failing, the path is cut at the first step
/// whose result is non-finite or leaves the ball of radius
/// `explosion_threshold`, and the crossing index is recorded.
pub fn simulate_untamed(
    sys: &DiffusionSystem,
    seg: &InitialSegment,
    drv: &BrownianPathIncrements,
    explosion_threshold: f64,
) -> Result<PathRecord> {
    if !explosion_threshold.is_finite() || explosion_threshold <= 0.0 {
        return Err(Error::NonPositiveValue(format!(
            "explosion threshold must be positive and finite, got {explosion_threshold}"
        )));
    }
    run(sys, &|x, y| (sys.drift)(x, y), seg, drv, Some(explosion_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::gen_brownian;
    use crate::model::{build_grid, parse_rational, sample_segment, History};
    use std::sync::Arc;

    fn cubic_neutral_system(kappa: f64, alpha: f64) -> DiffusionSystem {
        DiffusionSystem {
            dim_state: 1,
            dim_noise: 1,
            neutral: Arc::new(move |y| vec![kappa * y[0]]),
            drift: Arc::new(|x, y| vec![y[0] - x[0] * x[0] * x[0]]),
            diffusion: Arc::new(|x, _y| vec![0.2 * x[0]]),
            kappa,
            growth_k: 2.0,
            lip_l: 2.0,
            poly_l: 4.0,
            alpha,
        }
    }

    fn grid(horizon: &str, delay: &str, step: &str) -> crate::model::GridSpec {
        build_grid(
            parse_rational(horizon).unwrap(),
            parse_rational(delay).unwrap(),
            parse_rational(step).unwrap(),
        )
        .unwrap()
    }

    fn zero_system() -> DiffusionSystem {
        DiffusionSystem {
            dim_state: 2,
            dim_noise: 1,
            neutral: Arc::new(|y| vec![0.0 * y[0], 0.0 * y[1]]),
            drift: Arc::new(|_x, _y| vec![0.0, 0.0]),
            diffusion: Arc::new(|_x, _y| vec![0.0, 0.0]),
            kappa: 0.0,
            growth_k: 0.0,
            lip_l: 0.0,
            poly_l: 0.0,
            alpha: 0.5,
        }
    }

    #[test]
    fn zero_coefficients_give_identity_step() {
        let sys = zero_system();
        let out = step_bm(&sys, &[1.25, -3.0], &[9.0, 9.0], &[7.0, 7.0], 0.25, &[0.4]).unwrap();
        assert_eq!(out, vec![1.25, -3.0]);
    }

    #[test]
    fn zero_coefficients_give_constant_path() {
        let sys = zero_system();
        let g = grid("1", "1/4", "1/8");
        let drv = gen_brownian(&g, 1, 13);
        let history = History::new(1.0, |t| vec![t + 2.0, t * t - 1.0]);
        let seg = sample_segment(&g, &history).unwrap();
        let rec = simulate_bm(&sys, &seg, &drv).unwrap();
        let start = rec.value(0).to_vec();
        for n in 1..=g.steps() as i64 {
            assert_eq!(rec.value(n), start.as_slice());
        }
    }

    #[test]
    fn step_matches_hand_computation() {
        let sys = cubic_neutral_system(0.25, 0.5);
        let out = step_bm(&sys, &[1.0], &[0.5], &[0.8], 0.25, &[0.1]).unwrap();
        // D(0.8) + 1 - D(0.5) + tamed(-0.5) * 0.25 + 0.2 * 0.1
        //   = 0.2 + 1 - 0.125 - 0.4 * 0.25 + 0.02 = 0.995
        assert!((out[0] - 0.995).abs() < 1e-14, "got {}", out[0]);
    }

    #[test]
    fn step_without_neutral_term() {
        let mut sys = cubic_neutral_system(0.25, 0.5);
        sys.neutral = Arc::new(|y| vec![0.0 * y[0]]);
        sys.kappa = 0.0;
        let out = step_bm(&sys, &[1.0], &[0.5], &[0.8], 0.25, &[0.1]).unwrap();
        // 1 - 0.4 * 0.25 + 0.02 = 0.92
        assert!((out[0] - 0.92).abs() < 1e-14, "got {}", out[0]);
    }

    #[test]
    fn simulate_first_step_matches_hand_computation() {
        let sys = cubic_neutral_system(0.25, 0.5);
        let g = grid("1/2", "1/4", "1/4");
        let drv = BrownianPathIncrements::from_increments(g, 1, vec![0.1, -0.05]).unwrap();
        let seg = InitialSegment::from_rows(vec![vec![0.5], vec![1.0]], 0.0).unwrap();
        let rec = simulate_bm(&sys, &seg, &drv).unwrap();
        // Y(1) = D(Y(0)) + Y(0) - D(Y(-1)) + tamed(-0.5) * h + 0.2 * 0.1
        //      = 0.25 + 1 - 0.125 - 0.1 + 0.02 = 1.045
        assert!((rec.value(1)[0] - 1.045).abs() < 1e-14);
        assert_eq!(rec.exploded_from(), None);
        assert_eq!(rec.last_index(), 2);
    }

    #[test]
    fn stored_transitions_recompute_bit_for_bit() {
        let sys = cubic_neutral_system(0.4, 0.5);
        let g = grid("2", "1/4", "1/32");
        let drv = gen_brownian(&g, 1, 0xA11CE);
        let history = History::new(1.0, |t: f64| vec![(1.0 + t).cos()]);
        let seg = sample_segment(&g, &history).unwrap();
        let rec = simulate_bm(&sys, &seg, &drv).unwrap();
        let h = g.step_f64();
        let mbar = g.delay_steps() as i64;
        for n in [0i64, 1, 7, 20, 33, 62] {
            let recomputed = step_bm(
                &sys,
                rec.value(n),
                rec.value(n - mbar),
                rec.value(n + 1 - mbar),
                h,
                drv.increment(n as usize),
            )
            .unwrap();
            assert_eq!(recomputed, rec.value(n + 1), "transition at n={n}");
        }
    }

    #[test]
    fn neutral_term_telescopes_along_the_path() {
        let sys = cubic_neutral_system(0.3, 0.5);
        let g = grid("1", "1/8", "1/16");
        let drv = gen_brownian(&g, 1, 99);
        let history = History::constant(vec![1.5]);
        let seg = sample_segment(&g, &history).unwrap();
        let rec = simulate_bm(&sys, &seg, &drv).unwrap();
        let h = g.step_f64();
        let tamed = tame(sys.drift.clone(), h, sys.alpha).unwrap();
        let mbar = g.delay_steps() as i64;
        for n in 0..g.steps() as i64 {
            let y_n = rec.value(n);
            let y_np1 = rec.value(n + 1);
            let d_old = (sys.neutral)(rec.value(n - mbar));
            let d_new = (sys.neutral)(rec.value(n + 1 - mbar));
            let lhs = (y_np1[0] - d_new[0]) - (y_n[0] - d_old[0]);
            let rhs = tamed.eval(y_n, rec.value(n - mbar))[0] * h
                + 0.2 * y_n[0] * drv.increment(n as usize)[0];
            assert!((lhs - rhs).abs() < 1e-12, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn tamed_drift_step_never_exceeds_grid_bound() {
        let sys = cubic_neutral_system(0.2, 0.5);
        let g = grid("1", "1/4", "1/64");
        let drv = gen_brownian(&g, 1, 7);
        let history = History::constant(vec![20.0]);
        let seg = sample_segment(&g, &history).unwrap();
        let rec = simulate_bm(&sys, &seg, &drv).unwrap();
        let h = g.step_f64();
        let bound = h.powf(1.0 - sys.alpha) * (1.0 + 1e-12);
        let tamed = tame(sys.drift.clone(), h, sys.alpha).unwrap();
        let mbar = g.delay_steps() as i64;
        for n in 0..g.steps() as i64 {
            let step = norm(&tamed.eval(rec.value(n), rec.value(n - mbar))) * h;
            assert!(step <= bound, "n={n}: drift step {step} exceeds {bound}");
        }
    }

    #[test]
    fn zero_neutral_term_reduces_to_plain_euler() {
        // With D = 0 the recursion must coincide bit for bit with the
        // textbook tamed Euler update, because the zero neutral evaluations
        // add and subtract exact zeros.
        let sys = DiffusionSystem {
            dim_state: 1,
            dim_noise: 1,
            neutral: Arc::new(|y| vec![0.0 * y[0]]),
            drift: Arc::new(|x, _y| vec![-x[0] * x[0] * x[0]]),
            diffusion: Arc::new(|x, _y| vec![0.5 * x[0]]),
            kappa: 0.0,
            growth_k: 1.0,
            lip_l: 1.0,
            poly_l: 3.0,
            alpha: 0.5,
        };
        let g = grid("1", "1/4", "1/8");
        let drv = gen_brownian(&g, 1, 2024);
        let seg = sample_segment(&g, &History::constant(vec![2.0])).unwrap();
        let rec = simulate_bm(&sys, &seg, &drv).unwrap();
        let h = g.step_f64();
        let tamed = tame(sys.drift.clone(), h, sys.alpha).unwrap();
        let mut y = 2.0f64;
        for n in 0..g.steps() {
            y = y + tamed.eval(&[y], &[y])[0] * h + 0.5 * y * drv.increment(n)[0];
            assert_eq!(y, rec.value(n as i64 + 1)[0], "n={n}");
        }
    }

    #[test]
    fn untamed_cubic_explodes_where_tamed_survives() {
        let sys = cubic_neutral_system(0.25, 0.5);
        let g = grid("2", "1/4", "1/4");
        let drv = gen_brownian(&g, 1, 31);
        let seg = sample_segment(&g, &History::constant(vec![10.0])).unwrap();
        let wild = simulate_untamed(&sys, &seg, &drv, 1e10).unwrap();
        assert!(wild.exploded_from().is_some(), "raw drift should blow up from 10");
        let tamed = simulate_bm(&sys, &seg, &drv).unwrap();
        assert_eq!(tamed.exploded_from(), None);
        assert!(tamed.sup_norm().is_finite());
        // The record stops right at the crossing step.
        let cross = wild.exploded_from().unwrap();
        assert_eq!(wild.last_index(), cross as i64);
        assert!(norm(wild.value(cross as i64)) > 1e10 || !wild.value(cross as i64)[0].is_finite());
        for n in 0..cross as i64 {
            assert!(norm(wild.value(n)) <= 1e10);
        }
    }

    #[test]
    fn non_finite_coefficient_reports_failing_index() {
        let mut sys = cubic_neutral_system(0.25, 0.5);
        sys.drift = Arc::new(|_x, _y| vec![f64::NAN]);
        let g = grid("1/2", "1/4", "1/4");
        let drv = gen_brownian(&g, 1, 5);
        let seg = sample_segment(&g, &History::constant(vec![1.0])).unwrap();
        match simulate_bm(&sys, &seg, &drv) {
            Err(Error::NonFiniteState { step: Some(1) }) => {}
            other => panic!("expected non-finite failure at step 1, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let sys = cubic_neutral_system(0.25, 0.5);
        assert!(step_bm(&sys, &[1.0, 2.0], &[0.5], &[0.8], 0.25, &[0.1]).is_err());
        assert!(step_bm(&sys, &[1.0], &[0.5], &[0.8], 0.25, &[0.1, 0.2]).is_err());
        let g = grid("1", "1/4", "1/8");
        let drv = gen_brownian(&g, 1, 1);
        let short = grid("1", "1/8", "1/8");
        let seg = sample_segment(&short, &History::constant(vec![1.0])).unwrap();
        match simulate_bm(&sys, &seg, &drv) {
            Err(Error::GridMismatch(_)) => {}
            other => panic!("expected grid mismatch, got {other:?}"),
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let sys = cubic_neutral_system(0.35, 0.4);
        let g = grid("1", "1/4", "1/16");
        let drv = gen_brownian(&g, 1, 42);
        let seg = sample_segment(&g, &History::new(1.0, |t| vec![t.sin() + 1.0])).unwrap();
        let a = simulate_bm(&sys, &seg, &drv).unwrap();
        let b = simulate_bm(&sys, &seg, &drv).unwrap();
        for n in 0..=g.steps() as i64 {
            assert_eq!(a.value(n), b.value(n));
        }
    }
}
