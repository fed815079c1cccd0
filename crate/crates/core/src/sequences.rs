//! Diffusion-encoding waveforms.
//!
//! A [`TemporalProfile`] is a piecewise waveform `f(t)` on `[0, T]` built
//! from constant, linear, sine and cosine pieces. Its running integral
//! `F(t)` and the b-value factor `∫₀ᵀ F(t)² dt` are computed with exact
//! per-piece antiderivatives.

use std::f64::consts::PI;

use thiserror::Error;

/// Gyromagnetic ratio of the water proton in rad·µs⁻¹·T⁻¹.
pub const GAMMA: f64 = 2.67513e2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time {t} µs is outside the profile range [0, {end}] µs")]
    OutOfRange { t: f64, end: f64 },
    #[error("the profile has no diffusion encoding (zero b-factor) but b = {0} was requested")]
    NoEncoding(f64),
}

/// Shape of one piece of a waveform. Trigonometric pieces use absolute time:
/// `amplitude · cos(omega · t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    Constant(f64),
    /// Linear ramp from `from` at the segment start to `to` at its end.
    Linear {
        from: f64,
        to: f64,
    },
    Cosine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    Sine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

/// A waveform piece on `(start, end]` (the first piece includes `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub shape: Waveform,
}

impl Segment {
    fn value(&self, t: f64) -> f64 {
        match self.shape {
            Waveform::Constant(c) => c,
            Waveform::Linear { from, to } => from + (to - from) * (t - self.start) / (self.end - self.start),
            Waveform::Cosine { amplitude, omega, phase } => amplitude * (omega * t + phase).cos(),
            Waveform::Sine { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
        }
    }

    /// `∫_start^t f(s) ds`
    fn integral_to(&self, t: f64) -> f64 {
        let u = t - self.start;
        match self.shape {
            Waveform::Constant(c) => c * u,
            Waveform::Linear { from, to } => from * u + (to - from) * u * u / (2.0 * (self.end - self.start)),
            Waveform::Cosine { amplitude, omega, phase } => {
                amplitude / omega * ((omega * t + phase).sin() - (omega * self.start + phase).sin())
            }
            Waveform::Sine { amplitude, omega, phase } => {
                -amplitude / omega * ((omega * t + phase).cos() - (omega * self.start + phase).cos())
            }
        }
    }

    /// `∫_start^end (F0 + ∫_start^t f)² dt`
    fn integral_of_square(&self, f0: f64) -> f64 {
        let (s, e) = (self.start, self.end);
        let len = e - s;
        match self.shape {
            Waveform::Constant(c) => poly_square_integral(&[f0, c, 0.0], len),
            Waveform::Linear { from, to } => poly_square_integral(&[f0, from, (to - from) / (2.0 * len)], len),
            Waveform::Cosine { amplitude, omega, phase } => {
                // F = C + A sin(ωt + φ)
                let a = amplitude / omega;
                let c = f0 - a * (omega * s + phase).sin();
                let (ts, te) = (omega * s + phase, omega * e + phase);
                c * c * len - 2.0 * c * a * (te.cos() - ts.cos()) / omega
                    + a * a * (len / 2.0 - ((2.0 * te).sin() - (2.0 * ts).sin()) / (4.0 * omega))
            }
            Waveform::Sine { amplitude, omega, phase } => {
                // F = C − A cos(ωt + φ)
                let a = amplitude / omega;
                let c = f0 + a * (omega * s + phase).cos();
                let (ts, te) = (omega * s + phase, omega * e + phase);
                c * c * len - 2.0 * c * a * (te.sin() - ts.sin()) / omega
                    + a * a * (len / 2.0 + ((2.0 * te).sin() - (2.0 * ts).sin()) / (4.0 * omega))
            }
        }
    }
}

/// `∫₀ᴸ (p₀ + p₁u + p₂u²)² du`
fn poly_square_integral(p: &[f64; 3], len: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let k = (i + j + 1) as i32;
            sum += p[i] * p[j] * len.powi(k) / k as f64;
        }
    }
    sum
}

/// One-sided limit selector for waveform evaluation at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Limit from earlier times.
    Before,
    /// Limit from later times.
    After,
}

/// Piecewise gradient waveform `f(t)` on `[0, T]`, `T` being the echo time.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalProfile {
    name: String,
    segments: Vec<Segment>,
    /// `F` at the start of each segment.
    f_start: Vec<f64>,
}

impl TemporalProfile {
    /// Builds a profile from contiguous segments covering `[0, T]`.
    pub fn from_segments(name: impl Into<String>, segments: Vec<Segment>) -> Result<Self, SequenceError> {
        if segments.is_empty() {
            return Err(SequenceError::InvalidArgument("profile has no segments".into()));
        }
        if segments[0].start != 0.0 {
            return Err(SequenceError::InvalidArgument("profile must start at t = 0".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.end > s.start) || !s.end.is_finite() {
                return Err(SequenceError::InvalidArgument(format!(
                    "segment {i} has non-positive duration [{}, {}]",
                    s.start, s.end
                )));
            }
            if i > 0 && s.start != segments[i - 1].end {
                return Err(SequenceError::InvalidArgument(format!(
                    "segment {i} starts at {} but the previous one ends at {}",
                    s.start,
                    segments[i - 1].end
                )));
            }
            let bounded = match s.shape {
                Waveform::Constant(c) => c.is_finite(),
                Waveform::Linear { from, to } => from.is_finite() && to.is_finite(),
                Waveform::Cosine { amplitude, omega, phase } | Waveform::Sine { amplitude, omega, phase } => {
                    amplitude.is_finite() && omega.is_finite() && omega != 0.0 && phase.is_finite()
                }
            };
            if !bounded {
                return Err(SequenceError::InvalidArgument(format!("segment {i} is not bounded")));
            }
        }
        let mut f_start = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for s in &segments {
            f_start.push(acc);
            acc += s.integral_to(s.end);
        }
        Ok(Self { name: name.into(), segments, f_start })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Echo time `T` in µs.
    pub fn echo_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Segment boundaries, including 0 and `T`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().map(|s| s.start).collect();
        v.push(self.echo_time());
        v
    }

    fn check_range(&self, t: f64) -> Result<(), SequenceError> {
        let end = self.echo_time();
        if !(0.0..=end).contains(&t) {
            return Err(SequenceError::OutOfRange { t, end });
        }
        Ok(())
    }

    /// Index of the segment owning `t` under the `(start, end]` convention.
    fn owner(&self, t: f64) -> usize {
        let i = self.segments.partition_point(|s| s.end < t);
        i.min(self.segments.len() - 1)
    }

    /// `f(t)`. Pieces are closed on the right, the first piece also on the
    /// left.
    pub fn f(&self, t: f64) -> Result<f64, SequenceError> {
        self.check_range(t)?;
        Ok(self.segments[self.owner(t)].value(t))
    }

    /// One-sided limit of `f` at `t`.
    pub fn f_limit(&self, t: f64, side: Side) -> Result<f64, SequenceError> {
        self.check_range(t)?;
        let i = match side {
            Side::Before => self.owner(t),
            Side::After => {
                let i = self.segments.partition_point(|s| s.end <= t);
                i.min(self.segments.len() - 1)
            }
        };
        Ok(self.segments[i].value(t))
    }

    /// `F(t) = ∫₀ᵗ f(s) ds` in µs.
    #[allow(non_snake_case)]
    pub fn F(&self, t: f64) -> Result<f64, SequenceError> {
        self.check_range(t)?;
        let i = self.owner(t);
        Ok(self.f_start[i] + self.segments[i].integral_to(t))
    }

    /// Value of `F(T)`; zero for refocused sequences.
    pub fn final_integral(&self) -> f64 {
        let last = self.segments.len() - 1;
        self.f_start[last] + self.segments[last].integral_to(self.segments[last].end)
    }

    /// True when `|F(T)|` is negligible against the RMS value of `F`.
    pub fn is_refocused(&self) -> bool {
        let rms = (self.b_factor() / self.echo_time()).sqrt();
        self.final_integral().abs() <= 1e-9 * rms.max(f64::MIN_POSITIVE) || self.b_factor() == 0.0
    }

    /// `∫₀ᵀ F(t)² dt` in µs³, by exact per-segment integration.
    pub fn b_factor(&self) -> f64 {
        self.segments.iter().zip(&self.f_start).map(|(s, &f0)| s.integral_of_square(f0)).sum()
    }

    /// Same quantity by adaptive Simpson quadrature on each segment.
    pub fn b_factor_quadrature(&self, rel_tol: f64) -> f64 {
        self.segments
            .iter()
            .zip(&self.f_start)
            .map(|(s, &f0)| {
                let g = |t: f64| {
                    let v = f0 + s.integral_to(t);
                    v * v
                };
                let scale = (f0.abs() + (s.end - s.start)).powi(2) * (s.end - s.start);
                adaptive_simpson(&g, s.start, s.end, rel_tol * scale.max(1.0), 48)
            })
            .sum()
    }

    /// `b = γ² g² ∫F²` (µs/µm² = s/mm²) for a gradient amplitude in T/µm.
    pub fn b_from_g(&self, g: f64) -> f64 {
        GAMMA * GAMMA * g * g * self.b_factor()
    }

    /// Positive gradient amplitude (T/µm) giving the requested b-value.
    pub fn g_from_b(&self, b: f64) -> Result<f64, SequenceError> {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(SequenceError::InvalidArgument(format!("b-value must be non-negative, got {b}")));
        }
        if b == 0.0 {
            return Ok(0.0);
        }
        let bf = self.b_factor();
        if !(bf > 0.0) {
            return Err(SequenceError::NoEncoding(b));
        }
        Ok((b / bf).sqrt() / GAMMA)
    }

    /// Single pulsed-gradient spin echo: `+1` on `[0, δ]`, `-1` on `(Δ, Δ+δ]`.
    pub fn pgse(delta: f64, big_delta: f64) -> Result<Self, SequenceError> {
        check_pulse(delta, big_delta)?;
        Self::from_segments("pgse", pgse_block(0.0, delta, big_delta))
    }

    /// Two identical PGSE blocks played back to back.
    pub fn double_pgse(delta: f64, big_delta: f64) -> Result<Self, SequenceError> {
        check_pulse(delta, big_delta)?;
        let mut segs = pgse_block(0.0, delta, big_delta);
        segs.extend(pgse_block(delta + big_delta, delta, big_delta));
        Self::from_segments("double_pgse", segs)
    }

    /// Cosine OGSE with `n` periods per lobe; the second lobe is the negated
    /// first lobe delayed by `τ = (δ+Δ)/2`.
    pub fn cos_ogse(delta: f64, big_delta: f64, n: u32) -> Result<Self, SequenceError> {
        Self::ogse("cos_ogse", delta, big_delta, n, true)
    }

    /// Sine OGSE, same timing as [`TemporalProfile::cos_ogse`].
    pub fn sin_ogse(delta: f64, big_delta: f64, n: u32) -> Result<Self, SequenceError> {
        Self::ogse("sin_ogse", delta, big_delta, n, false)
    }

    fn ogse(name: &str, delta: f64, big_delta: f64, n: u32, cosine: bool) -> Result<Self, SequenceError> {
        check_pulse(delta, big_delta)?;
        if n == 0 {
            return Err(SequenceError::InvalidArgument("OGSE needs at least one period".into()));
        }
        let omega = 2.0 * n as f64 * PI / delta;
        let tau = (delta + big_delta) / 2.0;
        let total = delta + big_delta;
        let lobe = |amplitude: f64, shift: f64| {
            let phase = -omega * shift;
            if cosine {
                Waveform::Cosine { amplitude, omega, phase }
            } else {
                Waveform::Sine { amplitude, omega, phase }
            }
        };
        let mut segs = vec![Segment { start: 0.0, end: delta, shape: lobe(1.0, 0.0) }];
        if tau > delta {
            segs.push(Segment { start: delta, end: tau, shape: Waveform::Constant(0.0) });
        }
        segs.push(Segment { start: tau, end: tau + delta, shape: lobe(-1.0, tau) });
        if total > tau + delta {
            segs.push(Segment { start: tau + delta, end: total, shape: Waveform::Constant(0.0) });
        }
        Self::from_segments(name, segs)
    }

    /// PGSE with linear ramps of duration `ramp` at both ends of each pulse.
    pub fn trapezoidal_pgse(delta: f64, big_delta: f64, ramp: f64) -> Result<Self, SequenceError> {
        check_pulse(delta, big_delta)?;
        check_ramp(delta, ramp)?;
        Self::from_segments("trap_pgse", trapezoid_block(0.0, delta, big_delta, ramp))
    }

    /// Two identical trapezoidal PGSE blocks played back to back.
    pub fn double_trapezoidal_pgse(delta: f64, big_delta: f64, ramp: f64) -> Result<Self, SequenceError> {
        check_pulse(delta, big_delta)?;
        check_ramp(delta, ramp)?;
        let mut segs = trapezoid_block(0.0, delta, big_delta, ramp);
        segs.extend(trapezoid_block(delta + big_delta, delta, big_delta, ramp));
        Self::from_segments("double_trap_pgse", segs)
    }
}

fn check_pulse(delta: f64, big_delta: f64) -> Result<(), SequenceError> {
    if !(delta > 0.0) || !(big_delta >= delta) || !big_delta.is_finite() {
        return Err(SequenceError::InvalidArgument(format!(
            "pulse timing requires 0 < δ ≤ Δ, got δ = {delta}, Δ = {big_delta}"
        )));
    }
    Ok(())
}

fn check_ramp(delta: f64, ramp: f64) -> Result<(), SequenceError> {
    if !(ramp > 0.0 && ramp < delta / 2.0) {
        return Err(SequenceError::InvalidArgument(format!("ramp time must satisfy 0 < ramp < δ/2, got {ramp}")));
    }
    Ok(())
}

fn pgse_block(t0: f64, delta: f64, big_delta: f64) -> Vec<Segment> {
    let mut segs = vec![Segment { start: t0, end: t0 + delta, shape: Waveform::Constant(1.0) }];
    if big_delta > delta {
        segs.push(Segment { start: t0 + delta, end: t0 + big_delta, shape: Waveform::Constant(0.0) });
    }
    segs.push(Segment { start: t0 + big_delta, end: t0 + big_delta + delta, shape: Waveform::Constant(-1.0) });
    segs
}

fn trapezoid_block(t0: f64, delta: f64, big_delta: f64, ramp: f64) -> Vec<Segment> {
    let lobe = |start: f64, sign: f64| {
        [
            Segment { start, end: start + ramp, shape: Waveform::Linear { from: 0.0, to: sign } },
            Segment { start: start + ramp, end: start + delta - ramp, shape: Waveform::Constant(sign) },
            Segment {
                start: start + delta - ramp,
                end: start + delta,
                shape: Waveform::Linear { from: sign, to: 0.0 },
            },
        ]
    };
    let mut segs = lobe(t0, 1.0).to_vec();
    if big_delta > delta {
        segs.push(Segment { start: t0 + delta, end: t0 + big_delta, shape: Waveform::Constant(0.0) });
    }
    segs.extend(lobe(t0 + big_delta, -1.0));
    segs
}

/// Adaptive Simpson rule on 64 equal panels, so that oscillating
/// integrands cannot fool the first error estimate.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let (pa, pb) = (a + k as f64 * h, if k + 1 == PANELS { b } else { a + (k + 1) as f64 * h });
            let m = 0.5 * (pa + pb);
            let (fa, fm, fb) = (f(pa), f(m), f(pb));
            let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, pa, pb, fa, fm, fb, whole, tol / PANELS as f64, depth)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Gradient direction, amplitude and (optionally) the b-value it realises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSpec {
    direction: [f64; 3],
    /// Amplitude in T/µm.
    pub g: f64,
    /// b-value in s/mm² (µs/µm²), when the amplitude was derived from one.
    pub b: Option<f64>,
}

impl GradientSpec {
    /// Gradient of amplitude `g` (T/µm) along `direction` (normalized here).
    pub fn from_g(direction: [f64; 3], g: f64) -> Result<Self, SequenceError> {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(SequenceError::InvalidArgument(format!("gradient amplitude must be non-negative, got {g}")));
        }
        Ok(Self { direction: unit(direction)?, g, b: None })
    }

    /// Gradient realising the b-value `b` (s/mm²) with `profile`.
    pub fn from_b(profile: &TemporalProfile, direction: [f64; 3], b: f64) -> Result<Self, SequenceError> {
        let g = profile.g_from_b(b)?;
        Ok(Self { direction: unit(direction)?, g, b: Some(b) })
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    /// Gradient vector `g·q` in T/µm.
    pub fn vector(&self) -> [f64; 3] {
        self.direction.map(|x| x * self.g)
    }

    /// The b-value, computed from the amplitude when not given.
    pub fn b_value(&self, profile: &TemporalProfile) -> f64 {
        self.b.unwrap_or_else(|| profile.b_from_g(self.g))
    }
}

fn unit(d: [f64; 3]) -> Result<[f64; 3], SequenceError> {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(SequenceError::InvalidArgument("gradient direction must be non-zero".into()));
    }
    Ok(d.map(|x| x / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pgse_values() {
        let p = TemporalProfile::pgse(10600.0, 43100.0).unwrap();
        assert_eq!(p.f(5000.0).unwrap(), 1.0);
        assert_eq!(p.f(45000.0).unwrap(), -1.0);
        assert_eq!(p.f(40000.0).unwrap(), 0.0);
        assert_eq!(p.f(10600.0).unwrap(), 1.0);
        assert_eq!(p.f(53700.0).unwrap(), -1.0);
        assert_eq!(p.f((10600.0 + 43100.0) / 2.0).unwrap(), 0.0);
        assert_eq!(p.f(43100.0).unwrap(), 0.0);
        assert_eq!(p.f(0.0).unwrap(), 1.0);
        assert!(p.f(53700.1).is_err());
        assert!(p.f(-1.0).is_err());
    }

    #[test]
    fn one_sided_limits() {
        let p = TemporalProfile::pgse(10.0, 30.0).unwrap();
        assert_eq!(p.f_limit(10.0, Side::Before).unwrap(), 1.0);
        assert_eq!(p.f_limit(10.0, Side::After).unwrap(), 0.0);
        assert_eq!(p.f_limit(30.0, Side::Before).unwrap(), 0.0);
        assert_eq!(p.f_limit(30.0, Side::After).unwrap(), -1.0);
        assert_eq!(p.f_limit(40.0, Side::After).unwrap(), -1.0);
        assert_eq!(p.f_limit(0.0, Side::After).unwrap(), 1.0);
    }

    #[test]
    fn pgse_integral() {
        let (d, dd) = (10600.0, 43100.0);
        let p = TemporalProfile::pgse(d, dd).unwrap();
        assert_relative_eq!(p.F(d).unwrap(), d);
        assert_relative_eq!(p.F(30000.0).unwrap(), d);
        assert!(p.F(d + dd).unwrap().abs() < 1e-9);
        assert!(p.is_refocused());
    }

    #[test]
    fn pgse_b_factor_closed_form() {
        let (d, dd) = (10600.0, 43100.0);
        let p = TemporalProfile::pgse(d, dd).unwrap();
        assert_relative_eq!(p.b_factor(), d * d * (dd - d / 3.0), max_relative = 1e-12);
    }

    #[test]
    fn cos_ogse_values() {
        let p = TemporalProfile::cos_ogse(10000.0, 10000.0, 2).unwrap();
        assert_relative_eq!(p.f(0.0).unwrap(), 1.0);
        assert_relative_eq!(p.f(10000.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(p.F(10000.0).unwrap().abs() < 1e-9);
        // second lobe is the negated first lobe delayed by τ = δ
        assert_relative_eq!(p.f(12500.0).unwrap(), -p.f(2500.0).unwrap(), epsilon = 1e-12);
        assert_eq!(p.echo_time(), 20000.0);
    }

    #[test]
    fn ogse_with_gap() {
        let p = TemporalProfile::sin_ogse(10000.0, 20000.0, 1).unwrap();
        assert_eq!(p.echo_time(), 30000.0);
        // τ = 15000: zero gap on (δ, τ], negated lobe on (τ, τ+δ], trailing zero
        assert_eq!(p.f(12000.0).unwrap(), 0.0);
        assert_relative_eq!(p.f(17500.0).unwrap(), -1.0, epsilon = 1e-12);
        assert_eq!(p.f(27000.0).unwrap(), 0.0);
        assert!(p.final_integral().abs() < 1e-9);
    }

    #[test]
    fn trapezoid_shape() {
        let p = TemporalProfile::trapezoidal_pgse(10000.0, 20000.0, 1000.0).unwrap();
        assert_relative_eq!(p.f(500.0).unwrap(), 0.5);
        assert_eq!(p.f(5000.0).unwrap(), 1.0);
        assert_relative_eq!(p.f(9500.0).unwrap(), 0.5);
        assert_relative_eq!(p.f(20500.0).unwrap(), -0.5);
        assert_relative_eq!(p.F(10000.0).unwrap(), 9000.0, max_relative = 1e-14);
        assert!(p.final_integral().abs() < 1e-9);
        assert!(TemporalProfile::trapezoidal_pgse(10000.0, 20000.0, 5000.0).is_err());
    }

    #[test]
    fn invalid_timing() {
        assert!(TemporalProfile::pgse(0.0, 10.0).is_err());
        assert!(TemporalProfile::pgse(20.0, 10.0).is_err());
        assert!(TemporalProfile::cos_ogse(10.0, 10.0, 0).is_err());
    }

    #[test]
    fn b_and_g_conversion() {
        let p = TemporalProfile::pgse(10600.0, 43100.0).unwrap();
        assert_eq!(p.b_from_g(0.0), 0.0);
        let g = p.g_from_b(4000.0).unwrap();
        assert_relative_eq!(p.b_from_g(g), 4000.0, max_relative = 1e-12);
        assert!(p.g_from_b(-1.0).is_err());
    }

    #[test]
    fn no_encoding() {
        let flat = TemporalProfile::from_segments(
            "flat",
            vec![Segment { start: 0.0, end: 10.0, shape: Waveform::Constant(0.0) }],
        )
        .unwrap();
        assert_eq!(flat.g_from_b(0.0).unwrap(), 0.0);
        assert!(matches!(flat.g_from_b(10.0), Err(SequenceError::NoEncoding(_))));
    }

    #[test]
    fn rejects_gaps() {
        let r = TemporalProfile::from_segments(
            "gap",
            vec![
                Segment { start: 0.0, end: 1.0, shape: Waveform::Constant(1.0) },
                Segment { start: 2.0, end: 3.0, shape: Waveform::Constant(-1.0) },
            ],
        );
        assert!(r.is_err());
    }

    #[test]
    fn gradient_direction_normalized() {
        let g = GradientSpec::from_g([1.0, 1.0, 0.0], 2.0).unwrap();
        let q = g.direction();
        assert_relative_eq!(q[0] * q[0] + q[1] * q[1] + q[2] * q[2], 1.0, max_relative = 1e-15);
        assert!(GradientSpec::from_g([0.0; 3], 1.0).is_err());
    }
}
