//! Core state types: grids, initial segments, coefficient systems, path records.
//!
//! The simulated equations evolve a state vector on a uniform grid over `[0, T]`
//! with a constant lag `tau`. Both `T` and `tau` must be integer multiples of the
//! step `h`, so grid construction works on exact rationals and fails loudly when
//! the requested step is not commensurate. Floating point enters only for state
//! values, never for grid bookkeeping.
//!
//! Conventions used by every consumer of these types:
//!
//! * grid indices `n` run from `-Mbar` (time `-tau`) to `M` (time `T`), where
//!   `M = T/h` and `Mbar = tau/h`;
//! * coefficient maps are plain function objects on `&[f64]` slices returning
//!   freshly allocated vectors;
//! * a diffusion matrix is returned row-major with shape
//!   `dim_state x dim_noise`.

use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, ToPrimitive};
use rand::RngCore;

use crate::error::{Error, Result};

/// Exact rational scalar used for grid bookkeeping.
pub type Rational = num_rational::Rational64;

/// Parses a rational from `"a/b"`, decimal (`"0.25"`), or integer (`"3"`) form.
///
/// # Errors
///
/// Returns [`Error::InvalidRange`] on malformed input or a zero denominator.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidRange(format!("cannot parse '{s}' as a rational"));
    if s.is_empty() {
        return Err(bad());
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return Err(bad());
    }
    let value = if let Some((num, den)) = body.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| bad())?;
        let d: i64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(Error::InvalidRange(format!("zero denominator in '{s}'")));
        }
        Rational::new(n, d)
    } else if let Some((int_part, frac_part)) = body.split_once('.') {
        if !frac_part.chars().all(|c| c.is_ascii_digit()) || frac_part.is_empty() {
            return Err(bad());
        }
        if frac_part.len() > 18 {
            return Err(Error::InvalidRange(format!("too many decimal digits in '{s}'")));
        }
        let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac: i64 = frac_part.parse().map_err(|_| bad())?;
        let scale: i64 = 10i64
            .checked_pow(frac_part.len() as u32)
            .ok_or_else(bad)?;
        let numer = whole.checked_mul(scale).and_then(|w| w.checked_add(frac)).ok_or_else(bad)?;
        Rational::new(numer, scale)
    } else {
        let n: i64 = body.parse().map_err(|_| bad())?;
        Rational::from_integer(n)
    };
    Ok(if negative { -value } else { value })
}

/// Converts a rational to the nearest 64-bit float.
pub fn rational_to_f64(r: Rational) -> f64 {
    r.to_f64().expect("i64 ratio converts to f64")
}

/// Euclidean norm of a state vector.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Inner product of two state vectors of equal length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Uniform grid over `[0, T]` with a commensurate delay.
///
/// Invariants, established by [`build_grid`] and preserved by construction:
/// `h * M = T` and `h * Mbar = tau` hold exactly in rational arithmetic,
/// `0 < h < 1`, `Mbar >= 1`, and `M > Mbar`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    horizon: Rational,
    delay: Rational,
    step: Rational,
    steps: usize,
    delay_steps: usize,
}

impl GridSpec {
    /// Time horizon `T`.
    pub fn horizon(&self) -> Rational {
        self.horizon
    }

    /// Constant lag `tau`.
    pub fn delay(&self) -> Rational {
        self.delay
    }

    /// Step size `h` as an exact rational.
    pub fn step(&self) -> Rational {
        self.step
    }

    /// Step size `h` as a float, for state arithmetic.
    pub fn step_f64(&self) -> f64 {
        rational_to_f64(self.step)
    }

    /// Number of steps `M = T/h`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of steps spanning the delay, `Mbar = tau/h`.
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Grid time `n * h` as a float; valid for `n` in `[-Mbar, M]`.
    pub fn time_f64(&self, n: i64) -> f64 {
        rational_to_f64(self.step * Rational::from_integer(n))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid(T={}, tau={}, h={}, M={}, Mbar={})",
            self.horizon, self.delay, self.step, self.steps, self.delay_steps
        )
    }
}

/// Builds the uniform grid for horizon `T`, delay `tau`, and step `h`.
///
/// # Errors
///
/// * [`Error::InvalidRange`] unless `0 < h < 1`, `0 < tau < T`.
/// * [`Error::NotCommensurate`] unless `T/h` and `tau/h` are integers.
pub fn build_grid(horizon: Rational, delay: Rational, step: Rational) -> Result<GridSpec> {
    if !step.is_positive() || step >= Rational::from_integer(1) {
        return Err(Error::InvalidRange(format!("step h={step} must satisfy 0 < h < 1")));
    }
    if !horizon.is_positive() || !delay.is_positive() {
        return Err(Error::InvalidRange(format!(
            "horizon T={horizon} and delay tau={delay} must be positive"
        )));
    }
    if delay >= horizon {
        return Err(Error::InvalidRange(format!(
            "delay tau={delay} must be smaller than horizon T={horizon}"
        )));
    }
    let steps_ratio = horizon / step;
    if !steps_ratio.is_integer() {
        return Err(Error::NotCommensurate(format!("T/h = {steps_ratio} is not an integer")));
    }
    let delay_ratio = delay / step;
    if !delay_ratio.is_integer() {
        return Err(Error::NotCommensurate(format!("tau/h = {delay_ratio} is not an integer")));
    }
    let steps = steps_ratio.to_integer();
    let delay_steps = delay_ratio.to_integer();
    if steps > 1 << 40 {
        return Err(Error::InvalidRange(format!("M = {steps} is unreasonably large")));
    }
    Ok(GridSpec {
        horizon,
        delay,
        step,
        steps: steps as usize,
        delay_steps: delay_steps as usize,
    })
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// Continuous initial history `xi` on `[-tau, 0]`, with its Holder constant.
///
/// The function object must return the same dimension for every argument.
/// A constant history has Holder constant zero.
#[derive(Clone)]
pub struct History {
    f: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    holder_constant: f64,
}

impl History {
    /// Wraps a function of time; `holder_constant` bounds its Holder modulus.
    pub fn new(holder_constant: f64, f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        History { f: Arc::new(f), holder_constant }
    }

    /// Constant history at `level`.
    pub fn constant(level: Vec<f64>) -> Self {
        History { f: Arc::new(move |_| level.clone()), holder_constant: 0.0 }
    }

    /// Evaluates the history at time `t <= 0`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        (self.f)(t)
    }

    /// Declared Holder constant.
    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }
}

/// Initial history sampled on the grid: values at `n = -Mbar, ..., 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialSegment {
    dim: usize,
    delay_steps: usize,
    values: Vec<f64>,
    holder_constant: f64,
}

impl InitialSegment {
    /// Builds a segment from `Mbar + 1` rows of equal dimension.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidRange`] if the rows are empty, ragged, or non-finite,
    /// or if the Holder constant is negative or non-finite.
    pub fn from_rows(rows: Vec<Vec<f64>>, holder_constant: f64) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidRange("initial segment must be non-empty".into()));
        }
        if !(holder_constant >= 0.0 && holder_constant.is_finite()) {
            return Err(Error::InvalidRange(format!(
                "holder constant {holder_constant} must be finite and non-negative"
            )));
        }
        let dim = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::InvalidRange("initial segment rows have mixed dimensions".into()));
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidRange("initial segment contains a non-finite value".into()));
            }
            values.extend_from_slice(row);
        }
        Ok(InitialSegment { dim, delay_steps: rows.len() - 1, values, holder_constant })
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of lag steps covered, `Mbar`.
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Declared Holder constant of the underlying history.
    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }

    /// Value at grid index `n` in `[-Mbar, 0]`.
    ///
    /// # Panics
    ///
    /// Panics if `n` is outside `[-Mbar, 0]`.
    pub fn entry(&self, n: i64) -> &[f64] {
        let i = (n + self.delay_steps as i64) as usize;
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.values
    }
}

/// Samples a continuous history on the grid: `values[n] = xi(n * h)`.
///
/// Sampling is deterministic, so repeated calls with the same grid agree.
///
/// # Errors
///
/// [`Error::InvalidRange`] if the history returns ragged or non-finite values.
pub fn sample_segment(grid: &GridSpec, history: &History) -> Result<InitialSegment> {
    let mbar = grid.delay_steps() as i64;
    let rows: Vec<Vec<f64>> = (-mbar..=0).map(|n| history.eval(grid.time_f64(n))).collect();
    InitialSegment::from_rows(rows, history.holder_constant())
}

// ---------------------------------------------------------------------------
// Coefficient systems
// ---------------------------------------------------------------------------

/// Map from one state vector, e.g. the neutral term `D` or `G`.
pub type StateMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Map from `(current, delayed)` state pair, e.g. drift and diffusion.
pub type PairMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Map from `(current, delayed, mark)`, the jump coefficient `g`.
pub type JumpMap = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Draws one i.i.d. mark from the normalized mark law.
pub type MarkSampler = Arc<dyn Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync>;

/// Diffusion-driven system
/// `d[X(t) - D(X(t - tau))] = b(X(t), X(t - tau)) dt + sigma(X(t), X(t - tau)) dB(t)`.
///
/// The declared constants are trusted by the integrators and checked only by
/// the assumption auditor: `growth_k` bounds `<x - D(y), b> ∨ |sigma|^2` by
/// `growth_k * (1 + |x|^2 + |y|^2)`, `lip_l` and `poly_l` bound the monotone
/// and polynomial-Lipschitz moduli of `(b, sigma)`, `kappa` is the neutral
/// contraction factor, and `alpha` is the taming exponent.
pub struct DiffusionSystem {
    /// State dimension of `X`.
    pub dim_state: usize,
    /// Dimension of the driving Brownian motion.
    pub dim_noise: usize,
    /// Neutral term `D`; must vanish at the origin.
    pub neutral: StateMap,
    /// Drift `b(x, y)`.
    pub drift: PairMap,
    /// Diffusion `sigma(x, y)`, row-major `dim_state x dim_noise`.
    pub diffusion: PairMap,
    /// Neutral contraction factor, in `(0, 1)`.
    pub kappa: f64,
    /// Growth constant for the one-sided linear-growth bound.
    pub growth_k: f64,
    /// Monotonicity and polynomial-Lipschitz constant.
    pub lip_l: f64,
    /// Polynomial degree in the Lipschitz modulus of the drift.
    pub poly_l: f64,
    /// Taming exponent, in `(0, 1/2]`.
    pub alpha: f64,
}

impl DiffusionSystem {
    /// Validates structural invariants and returns the system.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidRange`] if `kappa` is outside `(0, 1)`, `alpha` is
    /// outside `(0, 1/2]`, a declared constant is negative or non-finite, a
    /// coefficient returns the wrong dimension at the origin, or `D(0) != 0`.
    pub fn validated(self) -> Result<Self> {
        if self.dim_state == 0 || self.dim_noise == 0 {
            return Err(Error::InvalidRange("dimensions must be positive".into()));
        }
        check_unit_open(self.kappa, "kappa")?;
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidRange(format!("alpha {} must lie in (0, 1/2]", self.alpha)));
        }
        check_constant(self.growth_k, "growth_k")?;
        check_constant(self.lip_l, "lip_l")?;
        check_constant(self.poly_l, "poly_l")?;
        let zero = vec![0.0; self.dim_state];
        let d0 = (self.neutral)(&zero);
        if d0.len() != self.dim_state {
            return Err(Error::InvalidRange("neutral term returns wrong dimension".into()));
        }
        if d0.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidRange("neutral term must vanish at the origin".into()));
        }
        if (self.drift)(&zero, &zero).len() != self.dim_state {
            return Err(Error::InvalidRange("drift returns wrong dimension".into()));
        }
        if (self.diffusion)(&zero, &zero).len() != self.dim_state * self.dim_noise {
            return Err(Error::InvalidRange("diffusion must return dim_state x dim_noise entries".into()));
        }
        Ok(self)
    }
}

/// Jump-driven system
/// `d[X(t) - G(X(t - tau))] = f(X(t), X(t - tau)) dt + dJ(t)` where `J` is the
/// compensated sum of `g(X(t-), X((t - tau)-), u)` over marked events.
///
/// `compensator(x, y)` must equal the mark-law integral of `g(x, y, .)` scaled
/// by the total intensity; it is supplied in closed form and subtracted once
/// per step. `growth_k1` plays the role `growth_k` plays for diffusions, with
/// the drift part bounding `2 <x - G(y), f>`.
pub struct JumpSystem {
    /// State dimension of `X`.
    pub dim_state: usize,
    /// Dimension of one mark.
    pub dim_mark: usize,
    /// Neutral term `G`; must vanish at the origin.
    pub neutral: StateMap,
    /// Drift `f(x, y)`.
    pub drift: PairMap,
    /// Jump coefficient `g(x, y, u)`.
    pub jump: JumpMap,
    /// Closed-form compensator `Gc(x, y) = integral of g(x, y, u) over the intensity measure`.
    pub compensator: PairMap,
    /// Total intensity `lambda(U)` of the event stream.
    pub total_intensity: f64,
    /// Sampler for one i.i.d. mark under the normalized mark law.
    pub mark_sampler: MarkSampler,
    /// Neutral contraction factor, in `(0, 1)`.
    pub kappa: f64,
    /// Growth constant for the one-sided bounds on `f` and the `g` moment integral.
    pub growth_k1: f64,
    /// Monotonicity and polynomial-Lipschitz constant.
    pub lip_l: f64,
    /// Polynomial degree in the Lipschitz modulus of the drift.
    pub poly_l: f64,
    /// Taming exponent; must satisfy `alpha * p < 1` for the working moment
    /// order `p`, which is enforced where `p` is configured.
    pub alpha: f64,
}

impl JumpSystem {
    /// Validates structural invariants and returns the system.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidRange`] on the same conditions as
    /// [`DiffusionSystem::validated`], with `alpha` required in `(0, 1)` and
    /// `total_intensity` required non-negative and finite.
    pub fn validated(self) -> Result<Self> {
        if self.dim_state == 0 || self.dim_mark == 0 {
            return Err(Error::InvalidRange("dimensions must be positive".into()));
        }
        check_unit_open(self.kappa, "kappa")?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidRange(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.total_intensity >= 0.0 && self.total_intensity.is_finite()) {
            return Err(Error::InvalidRange(format!(
                "total intensity {} must be finite and non-negative",
                self.total_intensity
            )));
        }
        check_constant(self.growth_k1, "growth_k1")?;
        check_constant(self.lip_l, "lip_l")?;
        check_constant(self.poly_l, "poly_l")?;
        let zero = vec![0.0; self.dim_state];
        let g0 = (self.neutral)(&zero);
        if g0.len() != self.dim_state {
            return Err(Error::InvalidRange("neutral term returns wrong dimension".into()));
        }
        if g0.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidRange("neutral term must vanish at the origin".into()));
        }
        if (self.drift)(&zero, &zero).len() != self.dim_state {
            return Err(Error::InvalidRange("drift returns wrong dimension".into()));
        }
        if (self.compensator)(&zero, &zero).len() != self.dim_state {
            return Err(Error::InvalidRange("compensator returns wrong dimension".into()));
        }
        let mark = vec![0.0; self.dim_mark];
        if (self.jump)(&zero, &zero, &mark).len() != self.dim_state {
            return Err(Error::InvalidRange("jump coefficient returns wrong dimension".into()));
        }
        Ok(self)
    }
}

fn check_unit_open(value: f64, name: &str) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRange(format!("{name} {value} must lie in (0, 1)")))
    }
}

fn check_constant(value: f64, name: &str) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRange(format!("{name} {value} must be finite and non-negative")))
    }
}

// ---------------------------------------------------------------------------
// Path records
// ---------------------------------------------------------------------------

/// One simulated path on a grid, indexed `n = -Mbar, ..., M`.
///
/// A record flagged exploded is truncated at the flagged step: it stores
/// values up to and including the threshold-crossing entry, which is the only
/// entry allowed to be non-finite. Complete records always hold `Mbar + M + 1`
/// entries, all finite.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    grid: GridSpec,
    dim: usize,
    values: Vec<f64>,
    exploded_from: Option<usize>,
}

impl PathRecord {
    pub(crate) fn from_parts(
        grid: GridSpec,
        dim: usize,
        values: Vec<f64>,
        exploded_from: Option<usize>,
    ) -> Self {
        debug_assert_eq!(values.len() % dim, 0);
        let rows = values.len() / dim;
        match exploded_from {
            None => debug_assert_eq!(rows, grid.delay_steps() + grid.steps() + 1),
            Some(e) => debug_assert_eq!(rows, grid.delay_steps() + e + 1),
        }
        PathRecord { grid, dim, values, exploded_from }
    }

    /// Grid the path lives on.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Step index at which the path crossed the explosion threshold, if any.
    pub fn exploded_from(&self) -> Option<usize> {
        self.exploded_from
    }

    /// Largest stored grid index: `M` for complete records, the crossing step
    /// for exploded ones.
    pub fn last_index(&self) -> i64 {
        (self.values.len() / self.dim) as i64 - self.grid.delay_steps() as i64 - 1
    }

    /// Value at grid index `n` in `[-Mbar, last_index]`.
    ///
    /// # Panics
    ///
    /// Panics if `n` is outside the stored range.
    pub fn value(&self, n: i64) -> &[f64] {
        let i = (n + self.grid.delay_steps() as i64) as usize;
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Terminal value, at index [`PathRecord::last_index`].
    pub fn terminal(&self) -> &[f64] {
        self.value(self.last_index())
    }

    /// Maximum Euclidean norm over stored indices `n = 0, ..., last_index`.
    pub fn sup_norm(&self) -> f64 {
        let mut sup: f64 = 0.0;
        for n in 0..=self.last_index() {
            sup = sup.max(norm(self.value(n)));
        }
        sup
    }

    /// Iterates `(n, value)` over all stored indices, starting at `-Mbar`.
    pub fn entries(&self) -> impl Iterator<Item = (i64, &[f64])> {
        let mbar = self.grid.delay_steps() as i64;
        self.values.chunks_exact(self.dim).enumerate().map(move |(i, row)| (i as i64 - mbar, row))
    }
}
