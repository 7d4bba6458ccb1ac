//! Explicit recursion driven by compensated marked Poisson noise.
//!
//! One step advances the difference variable `Z - G(Z_delayed)`:
//!
//! ```text
//! Z(n+1) = G(Z(n+1-Mbar)) + Z(n) - G(Z(n-Mbar)) + f_h(Z(n), Z(n-Mbar)) h
//!          + sum_i g(Z(n), Z(n-Mbar), u_i) - h Gc(Z(n), Z(n-Mbar))
//! ```
//!
//! where the sum runs over the events with time in `(nh, (n+1)h]` and `Gc` is
//! the closed-form compensator integral of `g` against the intensity measure.
//! The state arguments of `g` are the pre-step values, i.e. the discrete left
//! limits of the path at the event times. The compensator is exact, not a
//! quadrature, so the compensated increment introduces no extra bias into
//! convergence-order measurements.
//!
//! As in the Brownian module, [`simulate_jump`] and [`step_jump`] share one
//! update routine; recomputing a stored transition from the path values and
//! the step's marks reproduces the stored value bit for bit.

use crate::driver::{events_in_step, JumpRealization};
use crate::error::{Error, Result};
use crate::model::{GridSpec, InitialSegment, JumpSystem, PathRecord};
use crate::taming::tame;

/// Computes the right-hand side of the recursion for one step, folding the
/// marks in the order given.
fn advance<'a, I>(
    sys: &JumpSystem,
    drift_eval: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
    z_n: &[f64],
    z_n_delay: &[f64],
    z_np1_delay: &[f64],
    h: f64,
    marks: I,
) -> Vec<f64>
where
    I: Iterator<Item = &'a [f64]>,
{
    let g_new = (sys.neutral)(z_np1_delay);
    let g_old = (sys.neutral)(z_n_delay);
    let f = drift_eval(z_n, z_n_delay);
    let comp = (sys.compensator)(z_n, z_n_delay);
    let d = sys.dim_state;
    let mut jump_total = vec![0.0; d];
    for mark in marks {
        let jump = (sys.jump)(z_n, z_n_delay, mark);
        for i in 0..d {
            jump_total[i] += jump[i];
        }
    }
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        out.push(g_new[i] + z_n[i] - g_old[i] + f[i] * h + jump_total[i] - h * comp[i]);
    }
    out
}

fn check_dims(sys: &JumpSystem, states: &[&[f64]], marks: &[Vec<f64>]) -> Result<()> {
    for s in states {
        if s.len() != sys.dim_state {
            return Err(Error::GridMismatch(format!(
                "state has dimension {}, system expects {}",
                s.len(),
                sys.dim_state
            )));
        }
    }
    for mark in marks {
        if mark.len() != sys.dim_mark {
            return Err(Error::GridMismatch(format!(
                "mark has dimension {}, system expects {}",
                mark.len(),
                sys.dim_mark
            )));
        }
    }
    Ok(())
}

/// Applies one tamed step given the marks of the events that fall in it.
///
/// `z_n` and `z_n_delay` feed the drift, the jump coefficient, the
/// compensator, and the outgoing neutral term; `z_np1_delay` feeds the
/// incoming neutral term. The drift is tamed for this `h` and the system's
/// taming exponent.
pub fn step_jump(
    sys: &JumpSystem,
    z_n: &[f64],
    z_n_delay: &[f64],
    z_np1_delay: &[f64],
    h: f64,
    step_marks: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_dims(sys, &[z_n, z_n_delay, z_np1_delay], step_marks)?;
    let tamed = tame(sys.drift.clone(), h, sys.alpha)?;
    let out = advance(
        sys,
        &|x, y| tamed.eval(x, y),
        z_n,
        z_n_delay,
        z_np1_delay,
        h,
        step_marks.iter().map(|m| m.as_slice()),
    );
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFiniteState { step: None })
    }
}

/// Simulates one tamed path on `grid`, consuming the events of `jr`.
///
/// Each step folds in the events with time in `(nh, (n+1)h]`; the windows
/// partition `(0, T]`, so every event acts exactly once. The realization is
/// grid-free, so the same `jr` can drive every step size of a refinement
/// study.
pub fn simulate_jump(
    sys: &JumpSystem,
    seg: &InitialSegment,
    grid: &GridSpec,
    jr: &JumpRealization,
) -> Result<PathRecord> {
    if seg.dim() != sys.dim_state {
        return Err(Error::GridMismatch(format!(
            "segment dimension {} does not match system dimension {}",
            seg.dim(),
            sys.dim_state
        )));
    }
    if seg.delay_steps() != grid.delay_steps() {
        return Err(Error::GridMismatch(format!(
            "segment covers {} delay steps, grid has {}",
            seg.delay_steps(),
            grid.delay_steps()
        )));
    }
    if jr.horizon() != grid.horizon() {
        return Err(Error::GridMismatch(format!(
            "realization horizon {} does not match grid horizon {}",
            jr.horizon(),
            grid.horizon()
        )));
    }
    if !jr.events().is_empty() && jr.dim_mark() != sys.dim_mark {
        return Err(Error::GridMismatch(format!(
            "realization marks have dimension {}, system expects {}",
            jr.dim_mark(),
            sys.dim_mark
        )));
    }
    let d = sys.dim_state;
    let mbar = grid.delay_steps();
    let steps = grid.steps();
    let h = grid.step_f64();
    let tamed = tame(sys.drift.clone(), h, sys.alpha)?;
    let mut values = Vec::with_capacity((mbar + steps + 1) * d);
    values.extend_from_slice(seg.raw());
    for n in 0..steps {
        let window = events_in_step(jr, n, h);
        let next = {
            let z_n = &values[(n + mbar) * d..(n + mbar + 1) * d];
            let z_n_delay = &values[n * d..(n + 1) * d];
            let z_np1_delay = &values[(n + 1) * d..(n + 2) * d];
            advance(
                sys,
                &|x, y| tamed.eval(x, y),
                z_n,
                z_n_delay,
                z_np1_delay,
                h,
                window.iter().map(|e| e.mark.as_slice()),
            )
        };
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { step: Some(n + 1) });
        }
        values.extend_from_slice(&next);
    }
    Ok(PathRecord::from_parts(grid.clone(), d, values, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{gen_jumps, gen_jumps_indexed, JumpEvent};
    use crate::model::{
        build_grid, norm, parse_rational, sample_segment, History, MarkSampler, Rational,
    };
    use rand::RngCore;
    use std::sync::Arc;

    fn example_system(alpha: f64) -> JumpSystem {
        // Intensity 2 with unit marks, so the compensator is 2x.
        JumpSystem {
            dim_state: 1,
            dim_mark: 1,
            neutral: Arc::new(|y| vec![0.2 * y[0]]),
            drift: Arc::new(|x, _y| vec![-x[0]]),
            jump: Arc::new(|x, _y, u| vec![x[0] * u[0]]),
            compensator: Arc::new(|x, _y| vec![2.0 * x[0]]),
            total_intensity: 2.0,
            mark_sampler: unit_mark_sampler(),
            kappa: 0.2,
            growth_k1: 4.0,
            lip_l: 4.0,
            poly_l: 1.0,
            alpha,
        }
    }

    fn additive_system(mean_mark_mass: f64) -> JumpSystem {
        // f = 0, G = 0, state-independent g(x, y, u) = u, so the path is the
        // compensated event sum started at the segment value.
        JumpSystem {
            dim_state: 1,
            dim_mark: 1,
            neutral: Arc::new(|y| vec![0.0 * y[0]]),
            drift: Arc::new(|_x, _y| vec![0.0]),
            jump: Arc::new(|_x, _y, u| vec![u[0]]),
            compensator: Arc::new(move |_x, _y| vec![mean_mark_mass]),
            total_intensity: 2.0,
            mark_sampler: uniform_mark_sampler(),
            kappa: 0.2,
            growth_k1: 2.0,
            lip_l: 1.0,
            poly_l: 1.0,
            alpha: 0.25,
        }
    }

    fn unit_mark_sampler() -> MarkSampler {
        Arc::new(|_rng: &mut dyn RngCore| vec![1.0])
    }

    fn uniform_mark_sampler() -> MarkSampler {
        Arc::new(|rng: &mut dyn RngCore| {
            let mut buf = [0u8; 8];
            rng.fill_bytes(&mut buf);
            vec![(u64::from_le_bytes(buf) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)]
        })
    }

    fn grid(horizon: &str, delay: &str, step: &str) -> GridSpec {
        build_grid(
            parse_rational(horizon).unwrap(),
            parse_rational(delay).unwrap(),
            parse_rational(step).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_activity_gives_identity_step() {
        let mut sys = additive_system(0.0);
        sys.jump = Arc::new(|_x, _y, _u| vec![0.0]);
        let out = step_jump(&sys, &[2.5], &[1.0], &[3.0], 0.125, &[]).unwrap();
        assert_eq!(out, vec![2.5]);
    }

    #[test]
    fn step_matches_hand_computation() {
        let sys = example_system(0.5);
        let marks = vec![vec![1.0]];
        let out = step_jump(&sys, &[1.0], &[0.5], &[0.8], 0.0625, &marks).unwrap();
        // G(0.8) + 1 - G(0.5) + tamed(-1) * h + 1*1 - h * 2
        //   = 0.16 + 1 - 0.1 - 0.8 * 0.0625 + 1 - 0.125 = 1.885
        assert!((out[0] - 1.885).abs() < 1e-14, "got {}", out[0]);
    }

    #[test]
    fn compensator_only_step_matches_hand_computation() {
        let sys = example_system(0.5);
        let out = step_jump(&sys, &[1.0], &[0.5], &[0.8], 0.0625, &[]).unwrap();
        // 0.16 + 1 - 0.1 - 0.05 - 0.125 = 0.885
        assert!((out[0] - 0.885).abs() < 1e-14, "got {}", out[0]);
    }

    #[test]
    fn simulate_first_step_matches_hand_computation() {
        // Mbar = 2, so the first step sees z(0) = 1, z(-2) = 0.5, z(-1) = 0.8,
        // the argument triple of the single-step example.
        let sys = example_system(0.5);
        let g = grid("3/16", "1/8", "1/16");
        let seg = InitialSegment::from_rows(vec![vec![0.5], vec![0.8], vec![1.0]], 0.0).unwrap();
        let jr = JumpRealization::from_events(
            Rational::new(3, 16),
            1,
            vec![JumpEvent { time: 0.05, mark: vec![1.0] }],
        )
        .unwrap();
        let rec = simulate_jump(&sys, &seg, &g, &jr).unwrap();
        assert!((rec.value(1)[0] - 1.885).abs() < 1e-14, "got {}", rec.value(1)[0]);
        assert_eq!(rec.last_index(), 3);
        assert_eq!(rec.exploded_from(), None);
    }

    #[test]
    fn zero_coefficients_give_constant_path() {
        let mut sys = additive_system(0.0);
        sys.jump = Arc::new(|_x, _y, _u| vec![0.0]);
        let g = grid("1", "1/4", "1/8");
        let seg = sample_segment(&g, &History::new(1.0, |t| vec![t + 3.0])).unwrap();
        let jr = gen_jumps(&g, 2.0, &unit_mark_sampler(), 7).unwrap();
        assert!(!jr.events().is_empty());
        let rec = simulate_jump(&sys, &seg, &g, &jr).unwrap();
        for n in 1..=g.steps() as i64 {
            assert_eq!(rec.value(n), rec.value(0));
        }
    }

    #[test]
    fn stored_transitions_recompute_bit_for_bit() {
        let sys = example_system(0.4);
        let g = grid("2", "1/4", "1/32");
        let seg = sample_segment(&g, &History::new(1.0, |t| vec![(t + 1.0).cos()])).unwrap();
        let jr = gen_jumps(&g, 5.0, &uniform_mark_sampler(), 0xFEED).unwrap();
        let rec = simulate_jump(&sys, &seg, &g, &jr).unwrap();
        let h = g.step_f64();
        let mbar = g.delay_steps() as i64;
        for n in [0i64, 3, 15, 40, 63] {
            let marks: Vec<Vec<f64>> = events_in_step(&jr, n as usize, h)
                .iter()
                .map(|e| e.mark.clone())
                .collect();
            let recomputed = step_jump(
                &sys,
                rec.value(n),
                rec.value(n - mbar),
                rec.value(n + 1 - mbar),
                h,
                &marks,
            )
            .unwrap();
            assert_eq!(recomputed, rec.value(n + 1), "transition at n={n}");
        }
    }

    #[test]
    fn neutral_term_telescopes_along_the_path() {
        let sys = example_system(0.5);
        let g = grid("1", "1/8", "1/16");
        let seg = sample_segment(&g, &History::constant(vec![1.5])).unwrap();
        let jr = gen_jumps(&g, 3.0, &uniform_mark_sampler(), 12).unwrap();
        let rec = simulate_jump(&sys, &seg, &g, &jr).unwrap();
        let h = g.step_f64();
        let tamed = tame(sys.drift.clone(), h, sys.alpha).unwrap();
        let mbar = g.delay_steps() as i64;
        for n in 0..g.steps() as i64 {
            let z_n = rec.value(n);
            let z_nd = rec.value(n - mbar);
            let lhs = (rec.value(n + 1)[0] - (sys.neutral)(rec.value(n + 1 - mbar))[0])
                - (z_n[0] - (sys.neutral)(z_nd)[0]);
            let mut rhs = tamed.eval(z_n, z_nd)[0] * h - h * (sys.compensator)(z_n, z_nd)[0];
            for e in events_in_step(&jr, n as usize, h) {
                rhs += (sys.jump)(z_n, z_nd, &e.mark)[0];
            }
            assert!((lhs - rhs).abs() < 1e-12, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn compensated_sum_is_centered_at_ten_thousand_paths() {
        // f = 0, G = 0, g = u with uniform marks on [0, 1) at intensity 2:
        // z(T) - z(0) is a compensated compound Poisson sum, so its mean is 0
        // and its per-path variance is lambda * T * E[u^2] = 2/3.
        let sys = additive_system(1.0);
        let g = grid("1", "1/4", "1/8");
        let seg = sample_segment(&g, &History::constant(vec![0.0])).unwrap();
        let n_paths = 10_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for j in 0..n_paths {
            let jr = gen_jumps_indexed(&g, 2.0, &sys.mark_sampler, 314, j as u64).unwrap();
            let z = simulate_jump(&sys, &seg, &g, &jr).unwrap().terminal()[0];
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n_paths as f64;
        let var = (sum_sq / n_paths as f64 - mean * mean).max(0.0);
        let se = (var / n_paths as f64).sqrt();
        assert!(
            mean.abs() <= 4.0 * se,
            "compensated mean {mean} exceeds 4 standard errors ({se})"
        );
    }

    #[test]
    fn stepwise_jump_contribution_matches_single_pass() {
        let sys = additive_system(1.0);
        let g = grid("1", "1/4", "1/16");
        let seg = sample_segment(&g, &History::constant(vec![0.5])).unwrap();
        let jr = gen_jumps(&g, 30.0, &uniform_mark_sampler(), 555).unwrap();
        let rec = simulate_jump(&sys, &seg, &g, &jr).unwrap();
        // Telescoping with G = 0 and f = 0 leaves the jump sum minus the
        // accumulated compensator.
        let stepwise = rec.terminal()[0] - rec.value(0)[0];
        let h = g.step_f64();
        let compensated = g.steps() as f64 * h * 1.0;
        let single_pass: f64 = jr.events().iter().map(|e| e.mark[0]).sum();
        let scale = 1.0 + single_pass.abs();
        assert!(
            (stepwise + compensated - single_pass).abs() <= 1e-12 * scale,
            "stepwise {stepwise} + compensated {compensated} vs single pass {single_pass}"
        );
    }

    #[test]
    fn tamed_drift_step_never_exceeds_grid_bound() {
        let mut sys = example_system(0.5);
        sys.drift = Arc::new(|x, y| vec![y[0] - x[0] * x[0] * x[0]]);
        let g = grid("1", "1/4", "1/64");
        let seg = sample_segment(&g, &History::constant(vec![15.0])).unwrap();
        let jr = gen_jumps(&g, 2.0, &unit_mark_sampler(), 4).unwrap();
        let rec = simulate_jump(&sys, &seg, &g, &jr).unwrap();
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
    fn simulation_is_deterministic() {
        let sys = example_system(0.3);
        let g = grid("1", "1/4", "1/16");
        let seg = sample_segment(&g, &History::new(1.0, |t| vec![t.sin() + 1.0])).unwrap();
        let jr = gen_jumps(&g, 4.0, &uniform_mark_sampler(), 77).unwrap();
        let a = simulate_jump(&sys, &seg, &g, &jr).unwrap();
        let b = simulate_jump(&sys, &seg, &g, &jr).unwrap();
        for n in 0..=g.steps() as i64 {
            assert_eq!(a.value(n), b.value(n));
        }
    }

    #[test]
    fn mismatches_are_rejected() {
        let sys = example_system(0.5);
        let g = grid("1", "1/4", "1/8");
        let seg = sample_segment(&g, &History::constant(vec![1.0])).unwrap();
        let other = grid("2", "1/4", "1/8");
        let jr = gen_jumps(&other, 2.0, &unit_mark_sampler(), 5).unwrap();
        match simulate_jump(&sys, &seg, &g, &jr) {
            Err(Error::GridMismatch(_)) => {}
            other => panic!("expected horizon mismatch, got {other:?}"),
        }
        let wide_sampler: MarkSampler = Arc::new(|_rng| vec![1.0, 2.0]);
        let jr = gen_jumps(&g, 2.0, &wide_sampler, 5).unwrap();
        if !jr.events().is_empty() {
            assert!(simulate_jump(&sys, &seg, &g, &jr).is_err());
        }
        assert!(step_jump(&sys, &[1.0], &[1.0], &[1.0], 0.125, &[vec![1.0, 2.0]]).is_err());
        assert!(step_jump(&sys, &[1.0, 2.0], &[1.0], &[1.0], 0.125, &[]).is_err());
    }

    #[test]
    fn non_finite_coefficient_reports_failing_index() {
        let mut sys = example_system(0.5);
        sys.drift = Arc::new(|_x, _y| vec![f64::NAN]);
        let g = grid("1/2", "1/4", "1/4");
        let seg = sample_segment(&g, &History::constant(vec![1.0])).unwrap();
        let jr = gen_jumps(&g, 1.0, &unit_mark_sampler(), 2).unwrap();
        match simulate_jump(&sys, &seg, &g, &jr) {
            Err(Error::NonFiniteState { step: Some(1) }) => {}
            other => panic!("expected non-finite failure at step 1, got {other:?}"),
        }
    }
}
