//! Noise drivers: Brownian increments on a grid and grid-free jump streams.
//!
//! Two reproducibility rules shape this module:
//!
//! * every realization is a pure function of `(base_seed, path_index)`, so a
//!   Monte Carlo sweep produces the same paths no matter how work is scheduled;
//! * refinement couples resolutions through the same underlying noise. Coarse
//!   Brownian increments are exact block sums of fine ones, and a jump
//!   realization stores event times and marks independently of any grid, so
//!   the same realization drives every step size.
//!
//! Realizations can be dumped to a binary container and replayed; the round
//! trip is bit-exact.

use std::io::{self, Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{build_grid, rational_to_f64, GridSpec, MarkSampler, Rational};

const DUMP_MAGIC: &[u8; 4] = b"NSDD";
const DUMP_VERSION: u16 = 1;
const KIND_BROWNIAN: u8 = 1;
const KIND_JUMP: u8 = 2;

const DOMAIN_BROWNIAN: u64 = 1;
const DOMAIN_JUMP: u64 = 2;

/// Deterministic generator for one `(base_seed, stream, domain)` triple.
///
/// The three words fill disjoint bytes of the 256-bit seed, so distinct
/// streams and domains never collide.
fn derive_rng(base_seed: u64, stream: u64, domain: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&stream.to_le_bytes());
    seed[16..24].copy_from_slice(&domain.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

// ---------------------------------------------------------------------------
// Brownian increments
// ---------------------------------------------------------------------------

/// Increments of an `m`-dimensional Brownian motion on a grid.
///
/// Row `n` holds `B((n+1)h) - B(nh)`, i.i.d. `N(0, h I_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPathIncrements {
    grid: GridSpec,
    dim_noise: usize,
    increments: Vec<f64>,
}

impl BrownianPathIncrements {
    /// Wraps explicitly given increments, row-major with `M` rows of
    /// `dim_noise` entries. This is the replay path for increments produced
    /// outside [`gen_brownian`].
    pub fn from_increments(grid: GridSpec, dim_noise: usize, increments: Vec<f64>) -> Result<Self> {
        if dim_noise == 0 {
            return Err(Error::InvalidRange("noise dimension must be positive".into()));
        }
        let expected = grid.steps() * dim_noise;
        if increments.len() != expected {
            return Err(Error::GridMismatch(format!(
                "expected {} increment entries ({} steps x {} components), got {}",
                expected,
                grid.steps(),
                dim_noise,
                increments.len()
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: None });
        }
        Ok(Self { grid, dim_noise, increments })
    }

    /// Grid the increments live on.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Noise dimension `m`.
    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    /// Increment over `(nh, (n+1)h]`.
    ///
    /// # Panics
    ///
    /// Panics if `n >= M`.
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.dim_noise..(n + 1) * self.dim_noise]
    }

    /// Writes the realization to a binary container; see [`BrownianPathIncrements::read_from`].
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&[KIND_BROWNIAN])?;
        write_rational(w, self.grid.horizon())?;
        write_rational(w, self.grid.delay())?;
        write_rational(w, self.grid.step())?;
        w.write_all(&(self.dim_noise as u64).to_le_bytes())?;
        w.write_all(&(self.increments.len() as u64).to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a realization written by [`BrownianPathIncrements::write_to`].
    ///
    /// # Errors
    ///
    /// [`Error::Io`] on truncated input, [`Error::InvalidRange`] on a corrupt
    /// header, and any grid reconstruction error.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_header(r, KIND_BROWNIAN)?;
        let horizon = read_rational(r)?;
        let delay = read_rational(r)?;
        let step = read_rational(r)?;
        let grid = build_grid(horizon, delay, step)?;
        let dim_noise = read_u64(r)? as usize;
        let len = read_u64(r)? as usize;
        if dim_noise == 0 || len != grid.steps() * dim_noise {
            return Err(Error::InvalidRange("brownian dump length disagrees with its grid".into()));
        }
        let mut increments = Vec::with_capacity(len);
        for _ in 0..len {
            increments.push(f64::from_bits(read_u64(r)?));
        }
        Ok(BrownianPathIncrements { grid, dim_noise, increments })
    }
}

/// Generates Brownian increments on `grid` from a single seed.
pub fn gen_brownian(grid: &GridSpec, dim_noise: usize, seed: u64) -> BrownianPathIncrements {
    gen_brownian_indexed(grid, dim_noise, seed, 0)
}

/// Generates the increments of path `path_index` in the stream family rooted
/// at `base_seed`. Distinct indices give independent paths; the result does
/// not depend on evaluation order across paths.
pub fn gen_brownian_indexed(
    grid: &GridSpec,
    dim_noise: usize,
    base_seed: u64,
    path_index: u64,
) -> BrownianPathIncrements {
    assert!(dim_noise > 0, "noise dimension must be positive");
    let mut rng = derive_rng(base_seed, path_index, DOMAIN_BROWNIAN);
    let sqrt_h = grid.step_f64().sqrt();
    let len = grid.steps() * dim_noise;
    let mut increments = Vec::with_capacity(len);
    for _ in 0..len {
        let z: f64 = StandardNormal.sample(&mut rng);
        increments.push(z * sqrt_h);
    }
    BrownianPathIncrements { grid: grid.clone(), dim_noise, increments }
}

/// Sums `len` increment rows starting at `start`, pairwise. Pairwise grouping
/// makes dyadic refinements compose bit-exactly:
/// `coarsen(coarsen(x, 2), 2)` equals `coarsen(x, 4)`.
fn block_sum(data: &[f64], dim: usize, component: usize, start: usize, len: usize) -> f64 {
    if len == 1 {
        data[start * dim + component]
    } else {
        let half = len / 2;
        block_sum(data, dim, component, start, half)
            + block_sum(data, dim, component, start + half, len - half)
    }
}

/// Aggregates fine increments onto the grid with step `factor * h`.
///
/// Coarse increment `n` is the block sum of fine increments
/// `factor * n, ..., factor * n + factor - 1`, which is exactly
/// `B((n+1)H) - B(nH)` for the coarse step `H`.
///
/// # Errors
///
/// [`Error::NotDivisible`] if `factor` is zero or does not divide both the
/// step count and the delay step count, plus any error from rebuilding the
/// coarse grid (for example a coarse step reaching 1).
pub fn coarsen(fine: &BrownianPathIncrements, factor: usize) -> Result<BrownianPathIncrements> {
    if factor == 0 {
        return Err(Error::NotDivisible("refinement factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(fine.clone());
    }
    let grid = fine.grid();
    if grid.steps() % factor != 0 || grid.delay_steps() % factor != 0 {
        return Err(Error::NotDivisible(format!(
            "factor {factor} does not divide M={} and Mbar={}",
            grid.steps(),
            grid.delay_steps()
        )));
    }
    let coarse_step = grid.step() * Rational::from_integer(factor as i64);
    let coarse_grid = build_grid(grid.horizon(), grid.delay(), coarse_step)?;
    let m = fine.dim_noise;
    let mut increments = Vec::with_capacity(coarse_grid.steps() * m);
    for n in 0..coarse_grid.steps() {
        for j in 0..m {
            increments.push(block_sum(&fine.increments, m, j, n * factor, factor));
        }
    }
    Ok(BrownianPathIncrements { grid: coarse_grid, dim_noise: m, increments })
}

// ---------------------------------------------------------------------------
// Jump realizations
// ---------------------------------------------------------------------------

/// One marked event of a jump stream.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpEvent {
    /// Event time in `(0, T]`.
    pub time: f64,
    /// Mark drawn from the normalized mark law.
    pub mark: Vec<f64>,
}

/// A full realization of a finite-activity marked event stream on `(0, T]`.
///
/// Realizations are grid-free: only the horizon is stored, so the same
/// realization drives the recursion at every commensurate step size.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpRealization {
    horizon: Rational,
    dim_mark: usize,
    events: Vec<JumpEvent>,
}

impl JumpRealization {
    /// Wraps an explicitly given event stream, the replay path for events
    /// produced outside [`gen_jumps`].
    ///
    /// # Errors
    ///
    /// [`Error::InvalidRange`] unless the horizon is positive, every event
    /// time lies in `(0, horizon]` in non-decreasing order, and every mark is
    /// finite with `dim_mark` entries.
    pub fn from_events(horizon: Rational, dim_mark: usize, events: Vec<JumpEvent>) -> Result<Self> {
        if horizon <= Rational::from_integer(0) {
            return Err(Error::InvalidRange("horizon must be positive".into()));
        }
        if dim_mark == 0 {
            return Err(Error::InvalidRange("mark dimension must be positive".into()));
        }
        let horizon_f = rational_to_f64(horizon);
        let mut prev = 0.0;
        for (i, event) in events.iter().enumerate() {
            if !(event.time > 0.0 && event.time <= horizon_f) {
                return Err(Error::InvalidRange(format!(
                    "event {i} at time {} outside (0, {horizon_f}]",
                    event.time
                )));
            }
            if event.time < prev {
                return Err(Error::InvalidRange(format!("event {i} breaks time order")));
            }
            prev = event.time;
            if event.mark.len() != dim_mark || event.mark.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRange(format!("event {i} has an invalid mark")));
            }
        }
        Ok(Self { horizon, dim_mark, events })
    }

    /// Horizon `T` the events were drawn on.
    pub fn horizon(&self) -> Rational {
        self.horizon
    }

    /// Horizon as a float.
    pub fn horizon_f64(&self) -> f64 {
        rational_to_f64(self.horizon)
    }

    /// Dimension of one mark.
    pub fn dim_mark(&self) -> usize {
        self.dim_mark
    }

    /// All events in increasing time order.
    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    /// Writes the realization to a binary container; see [`JumpRealization::read_from`].
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&[KIND_JUMP])?;
        write_rational(w, self.horizon)?;
        w.write_all(&(self.dim_mark as u64).to_le_bytes())?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        for event in &self.events {
            w.write_all(&event.time.to_bits().to_le_bytes())?;
            for v in &event.mark {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a realization written by [`JumpRealization::write_to`].
    ///
    /// # Errors
    ///
    /// [`Error::Io`] on truncated input, [`Error::InvalidRange`] on a corrupt
    /// header.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        read_header(r, KIND_JUMP)?;
        let horizon = read_rational(r)?;
        let dim_mark = read_u64(r)? as usize;
        if dim_mark == 0 {
            return Err(Error::InvalidRange("jump dump has zero mark dimension".into()));
        }
        let count = read_u64(r)? as usize;
        let mut events = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let time = f64::from_bits(read_u64(r)?);
            let mut mark = Vec::with_capacity(dim_mark);
            for _ in 0..dim_mark {
                mark.push(f64::from_bits(read_u64(r)?));
            }
            events.push(JumpEvent { time, mark });
        }
        Ok(JumpRealization { horizon, dim_mark, events })
    }
}

/// Draws a jump realization on `grid`'s horizon from a single seed.
///
/// # Errors
///
/// See [`gen_jumps_indexed`].
pub fn gen_jumps(
    grid: &GridSpec,
    total_intensity: f64,
    mark_sampler: &MarkSampler,
    seed: u64,
) -> Result<JumpRealization> {
    gen_jumps_indexed(grid, total_intensity, mark_sampler, seed, 0)
}

/// Draws the jump realization of path `path_index` in the stream family
/// rooted at `base_seed`.
///
/// The event count is Poisson with mean `total_intensity * T`, event times
/// are i.i.d. uniform on `(0, T]` sorted increasingly, and marks are i.i.d.
/// draws from `mark_sampler`.
///
/// # Errors
///
/// [`Error::InvalidRange`] if `total_intensity` is negative or non-finite, or
/// if the sampler returns an empty or inconsistent mark.
pub fn gen_jumps_indexed(
    grid: &GridSpec,
    total_intensity: f64,
    mark_sampler: &MarkSampler,
    base_seed: u64,
    path_index: u64,
) -> Result<JumpRealization> {
    if !(total_intensity >= 0.0 && total_intensity.is_finite()) {
        return Err(Error::InvalidRange(format!(
            "total intensity {total_intensity} must be finite and non-negative"
        )));
    }
    let mut rng = derive_rng(base_seed, path_index, DOMAIN_JUMP);
    let horizon = grid.horizon();
    let t = rational_to_f64(horizon);
    let mean_count = total_intensity * t;
    let count = if mean_count == 0.0 {
        0
    } else {
        let poisson = Poisson::new(mean_count)
            .map_err(|e| Error::InvalidRange(format!("poisson mean {mean_count}: {e}")))?;
        poisson.sample(&mut rng) as usize
    };
    let mut times = Vec::with_capacity(count);
    for _ in 0..count {
        // t * (1 - u) with u in [0, 1) lands in (0, T]
        let u: f64 = uniform_unit(&mut rng);
        times.push(t * (1.0 - u));
    }
    let mut dim_mark = 1;
    let mut events = Vec::with_capacity(count);
    for time in times {
        let mark = (mark_sampler)(&mut rng);
        if mark.is_empty() || !mark.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRange("mark sampler returned an empty or non-finite mark".into()));
        }
        if events.is_empty() {
            dim_mark = mark.len();
        } else if mark.len() != dim_mark {
            return Err(Error::InvalidRange("mark sampler returned inconsistent dimensions".into()));
        }
        events.push(JumpEvent { time, mark });
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(JumpRealization { horizon, dim_mark, events })
}

fn uniform_unit(rng: &mut ChaCha8Rng) -> f64 {
    // 53 random bits scaled to [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Events with time in the window `(n * step, (n + 1) * step]`.
///
/// Windows with the same bounds expression partition `(0, T]`: the upper bound
/// of window `n` is the same float as the lower bound of window `n + 1`, so
/// each event lands in exactly one window. A window whose upper bound reaches
/// the horizon absorbs everything to the right, which keeps the partition
/// exact when `(M * step)` rounds below `T`.
pub fn events_in_step<'a>(jr: &'a JumpRealization, n: usize, step: f64) -> &'a [JumpEvent] {
    let lo = n as f64 * step;
    let hi = (n + 1) as f64 * step;
    let start = jr.events.partition_point(|e| e.time <= lo);
    let end = if hi >= jr.horizon_f64() {
        jr.events.len()
    } else {
        jr.events.partition_point(|e| e.time <= hi)
    };
    &jr.events[start..end]
}

// ---------------------------------------------------------------------------
// Dump plumbing
// ---------------------------------------------------------------------------

fn write_rational<W: Write>(w: &mut W, r: Rational) -> io::Result<()> {
    w.write_all(&r.numer().to_le_bytes())?;
    w.write_all(&r.denom().to_le_bytes())
}

fn read_rational<R: Read>(r: &mut R) -> Result<Rational> {
    let numer = read_i64(r)?;
    let denom = read_i64(r)?;
    if denom == 0 {
        return Err(Error::InvalidRange("zero denominator in dump".into()));
    }
    Ok(Rational::new(numer, denom))
}

fn read_header<R: Read>(r: &mut R, expected_kind: u8) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::InvalidRange("not a driver dump (bad magic)".into()));
    }
    let mut version = [0u8; 2];
    r.read_exact(&mut version)?;
    if u16::from_le_bytes(version) != DUMP_VERSION {
        return Err(Error::InvalidRange("unsupported dump version".into()));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    if kind[0] != expected_kind {
        return Err(Error::InvalidRange("dump holds a different driver kind".into()));
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(i64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rational;
    use std::sync::Arc;

    fn grid(t: (i64, i64), tau: (i64, i64), h: (i64, i64)) -> GridSpec {
        build_grid(
            Rational::new(t.0, t.1),
            Rational::new(tau.0, tau.1),
            Rational::new(h.0, h.1),
        )
        .unwrap()
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

    #[test]
    fn brownian_is_deterministic_per_seed_and_index() {
        let g = grid((1, 1), (1, 4), (1, 8));
        let a = gen_brownian_indexed(&g, 2, 42, 7);
        let b = gen_brownian_indexed(&g, 2, 42, 7);
        assert_eq!(a, b);
        let c = gen_brownian_indexed(&g, 2, 42, 8);
        assert_ne!(a, c);
        let d = gen_brownian_indexed(&g, 2, 43, 7);
        assert_ne!(a, d);
        assert_eq!(gen_brownian(&g, 2, 42), gen_brownian_indexed(&g, 2, 42, 0));
    }

    #[test]
    fn brownian_increment_moments_match_clt_bounds() {
        let g = grid((2, 100), (1, 100), (1, 100));
        let h = 0.01;
        let n_paths = 100_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for j in 0..n_paths {
            let drv = gen_brownian_indexed(&g, 1, 7, j as u64);
            let v = drv.increment(0)[0];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n_paths as f64;
        let var = sum_sq / n_paths as f64 - mean * mean;
        let mean_tol = 4.0 * (h / n_paths as f64).sqrt();
        assert!(mean.abs() <= mean_tol, "mean {mean} exceeds {mean_tol}");
        assert!((var - h).abs() <= 0.05 * h, "variance {var} not within 5% of {h}");
    }

    #[test]
    fn coarsen_pairs_blocks() {
        let g = grid((1, 2), (1, 4), (1, 8));
        let mut fine = gen_brownian(&g, 1, 1);
        fine.increments = vec![0.1, -0.2, 0.3, 0.05];
        let coarse = coarsen(&fine, 2).unwrap();
        assert_eq!(coarse.grid().steps(), 2);
        assert_eq!(coarse.increments, vec![0.1 + (-0.2), 0.3 + 0.05]);
        assert!((coarse.increments[0] - (-0.1)).abs() < 1e-15);
        assert!((coarse.increments[1] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn coarsen_identity_and_composition() {
        let g = grid((1, 1), (1, 4), (1, 32));
        let fine = gen_brownian(&g, 3, 99);
        assert_eq!(coarsen(&fine, 1).unwrap(), fine);
        let two_then_two = coarsen(&coarsen(&fine, 2).unwrap(), 2).unwrap();
        let four = coarsen(&fine, 4).unwrap();
        assert_eq!(two_then_two, four);
        let two_then_four = coarsen(&coarsen(&fine, 2).unwrap(), 4).unwrap();
        let eight = coarsen(&fine, 8).unwrap();
        assert_eq!(two_then_four, eight);
    }

    #[test]
    fn coarsen_rejects_non_divisors() {
        let g = grid((1, 1), (1, 4), (1, 8));
        let fine = gen_brownian(&g, 1, 5);
        // M = 8, Mbar = 2: factor 3 divides neither, factor 4 breaks Mbar
        assert_eq!(coarsen(&fine, 3).unwrap_err().id(), "NotDivisible");
        assert_eq!(coarsen(&fine, 4).unwrap_err().id(), "NotDivisible");
        assert_eq!(coarsen(&fine, 0).unwrap_err().id(), "NotDivisible");
    }

    #[test]
    fn coarse_increments_are_block_sums_bit_for_bit() {
        let g = grid((1, 1), (1, 4), (1, 64));
        let fine = gen_brownian(&g, 2, 123);
        let k = 4;
        let coarse = coarsen(&fine, k).unwrap();
        for n in 0..coarse.grid().steps() {
            for j in 0..2 {
                let expected = block_sum(&fine.increments, 2, j, n * k, k);
                assert_eq!(coarse.increment(n)[j].to_bits(), expected.to_bits());
            }
        }
    }

    #[test]
    fn jump_counts_match_poisson_mean() {
        let g = grid((1, 1), (1, 4), (1, 4));
        let sampler = unit_mark_sampler();
        let n_paths = 100_000usize;
        let mut total = 0usize;
        for j in 0..n_paths {
            let jr = gen_jumps_indexed(&g, 2.0, &sampler, 11, j as u64).unwrap();
            total += jr.events().len();
        }
        let mean = total as f64 / n_paths as f64;
        let tol = 4.0 * (2.0f64 / n_paths as f64).sqrt();
        assert!((mean - 2.0).abs() <= tol, "mean count {mean} not within {tol} of 2");
    }

    #[test]
    fn jump_times_are_sorted_in_range_and_deterministic() {
        let g = grid((1, 1), (1, 4), (1, 4));
        let sampler = uniform_mark_sampler();
        let a = gen_jumps_indexed(&g, 50.0, &sampler, 3, 17).unwrap();
        let b = gen_jumps_indexed(&g, 50.0, &sampler, 3, 17).unwrap();
        assert_eq!(a, b);
        for w in a.events().windows(2) {
            assert!(w[0].time <= w[1].time);
        }
        for e in a.events() {
            assert!(e.time > 0.0 && e.time <= 1.0);
            assert!(e.mark[0] >= 0.0 && e.mark[0] < 1.0);
        }
    }

    #[test]
    fn zero_intensity_gives_empty_realization() {
        let g = grid((1, 1), (1, 4), (1, 4));
        let jr = gen_jumps(&g, 0.0, &unit_mark_sampler(), 1).unwrap();
        assert!(jr.events().is_empty());
        assert!(gen_jumps(&g, -1.0, &unit_mark_sampler(), 1).is_err());
    }

    #[test]
    fn events_in_step_window_example() {
        let jr = JumpRealization {
            horizon: Rational::new(1, 1),
            dim_mark: 1,
            events: vec![
                JumpEvent { time: 0.1, mark: vec![1.0] },
                JumpEvent { time: 0.3, mark: vec![2.0] },
            ],
        };
        let window = events_in_step(&jr, 0, 0.25);
        assert_eq!(window.len(), 1);
        assert_eq!(window[0].time, 0.1);
    }

    #[test]
    fn windows_partition_all_events() {
        let g = grid((1, 1), (1, 4), (1, 8));
        let sampler = uniform_mark_sampler();
        let jr = gen_jumps(&g, 40.0, &sampler, 21).unwrap();
        for &steps in &[8usize, 16, 5, 10] {
            let step = 1.0 / steps as f64;
            let mut seen = 0usize;
            let mut collected = Vec::new();
            for n in 0..steps {
                let window = events_in_step(&jr, n, step);
                seen += window.len();
                collected.extend(window.iter().map(|e| e.time));
            }
            assert_eq!(seen, jr.events().len(), "partition lost events at {steps} steps");
            let all: Vec<f64> = jr.events().iter().map(|e| e.time).collect();
            assert_eq!(collected, all, "partition reordered events at {steps} steps");
        }
    }

    #[test]
    fn boundary_event_lands_in_left_window() {
        // a window's upper endpoint belongs to the window
        let jr = JumpRealization {
            horizon: Rational::new(1, 1),
            dim_mark: 1,
            events: vec![JumpEvent { time: 0.25, mark: vec![1.0] }],
        };
        assert_eq!(events_in_step(&jr, 0, 0.25).len(), 1);
        assert_eq!(events_in_step(&jr, 1, 0.25).len(), 0);
    }

    #[test]
    fn brownian_dump_round_trips_bit_exactly() {
        let g = grid((1, 1), (1, 4), (1, 16));
        let drv = gen_brownian(&g, 2, 77);
        let mut buf = Vec::new();
        drv.write_to(&mut buf).unwrap();
        let back = BrownianPathIncrements::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.grid(), drv.grid());
        assert_eq!(back.dim_noise(), drv.dim_noise());
        let bits: Vec<u64> = drv.increments.iter().map(|v| v.to_bits()).collect();
        let back_bits: Vec<u64> = back.increments.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, back_bits);
    }

    #[test]
    fn jump_dump_round_trips_bit_exactly() {
        let g = grid((1, 1), (1, 4), (1, 4));
        let jr = gen_jumps(&g, 10.0, &uniform_mark_sampler(), 5).unwrap();
        let mut buf = Vec::new();
        jr.write_to(&mut buf).unwrap();
        let back = JumpRealization::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.horizon(), jr.horizon());
        assert_eq!(back.dim_mark(), jr.dim_mark());
        assert_eq!(back.events().len(), jr.events().len());
        for (a, b) in jr.events().iter().zip(back.events()) {
            assert_eq!(a.time.to_bits(), b.time.to_bits());
            let am: Vec<u64> = a.mark.iter().map(|v| v.to_bits()).collect();
            let bm: Vec<u64> = b.mark.iter().map(|v| v.to_bits()).collect();
            assert_eq!(am, bm);
        }
    }

    #[test]
    fn dump_rejects_wrong_kind_and_garbage() {
        let g = grid((1, 1), (1, 4), (1, 4));
        let jr = gen_jumps(&g, 2.0, &unit_mark_sampler(), 5).unwrap();
        let mut buf = Vec::new();
        jr.write_to(&mut buf).unwrap();
        assert!(BrownianPathIncrements::read_from(&mut buf.as_slice()).is_err());
        let garbage = b"not a dump at all";
        assert!(JumpRealization::read_from(&mut garbage.as_slice()).is_err());
    }
}
