//! Pulse-sequence schedules: ordered adiabatic cone segments separated by
//! ideal swap pulses.
//!
//! A segment is the trajectory traced by `s·n(t)` on the Bloch sphere while
//! the control field sweeps the cone of polar angle `theta` through `l`
//! azimuthal turns (`l` may be a half-integer, negative for clockwise).
//! All quantities are in B₀ units: B₀ = 1 and time is measured in 1/B₀.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule has no segments")]
    Empty,
    #[error("segment {index}: winding number must be non-zero")]
    ZeroWinding { index: usize },
    #[error("segment {index}: polar angle {theta} outside [0, pi]")]
    AngleOutOfRange { index: usize, theta: f64 },
    #[error("segment {index}: eigenvalue label must alternate across swap pulses")]
    NonAlternatingSign { index: usize },
    #[error("first segment must start on the s = -1 branch")]
    WrongInitialBranch,
    #[error("rotation rate omega_B/B0 must be finite and positive, got {0}")]
    InvalidRate(f64),
    #[error("winding denominator must be positive, got {0}")]
    InvalidDenominator(i64),
    #[error("winding number must be a non-zero integer, got {0}")]
    InvalidFidWinding(i64),
    #[error("angle {0} must lie strictly inside (0, pi)")]
    AngleNotInterior(f64),
    #[error("adiabaticity kappa must exceed 1, got {0}")]
    InvalidKappa(f64),
    #[error("no companion angle: balance needs cos(theta_c) = {cos_theta_c}, outside [-1, 1]")]
    NoCompanionAngle { cos_theta_c: f64 },
    #[error("unknown scheme '{0}'")]
    UnknownScheme(String),
}

/// Eigenvalue label of the tracked branch in a segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn as_i64(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// One adiabatic segment C_l^{θ,s}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentSpec {
    pub theta: f64,
    pub winding: Rational64,
    pub sign: Sign,
}

impl SegmentSpec {
    pub fn new(theta: f64, winding: Rational64, sign: Sign) -> Self {
        Self {
            theta,
            winding,
            sign,
        }
    }

    pub fn winding_f64(&self) -> f64 {
        *self.winding.numer() as f64 / *self.winding.denom() as f64
    }

    /// +1 for anticlockwise, −1 for clockwise rotation about ẑ.
    pub fn direction(&self) -> f64 {
        if self.winding > Rational64::from_integer(0) {
            1.0
        } else {
            -1.0
        }
    }

    /// Signed rotation rate ω_rf = sign(l)·ω_B.
    pub fn omega_rf(&self, omega_b: f64) -> f64 {
        self.direction() * omega_b
    }

    pub fn duration(&self, omega_b: f64) -> f64 {
        TAU * self.winding_f64().abs() / omega_b
    }
}

/// Base sequence that Scheme 1 modifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme1Base {
    SpinEcho,
    Cpmg,
}

/// The built-in sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Fid { m: i64 },
    SpinEcho,
    Cpmg,
    Scheme1(Scheme1Base),
    Scheme2,
}

impl Scheme {
    /// FID(m=2), CPMG, Scheme 1 on CPMG, Scheme 2: the four sequences
    /// compared in the θ and β sweeps.
    pub const SWEEP_SET: [Scheme; 4] = [
        Scheme::Fid { m: 2 },
        Scheme::Cpmg,
        Scheme::Scheme1(Scheme1Base::Cpmg),
        Scheme::Scheme2,
    ];

    pub fn build(&self, theta: f64, kappa: f64) -> Result<Schedule, ScheduleError> {
        match *self {
            Scheme::Fid { m } => Schedule::fid(theta, m, kappa),
            Scheme::SpinEcho => Schedule::spin_echo(theta, kappa),
            Scheme::Cpmg => Schedule::cpmg(theta, kappa),
            Scheme::Scheme1(base) => Schedule::scheme1(theta, kappa, base),
            Scheme::Scheme2 => Schedule::scheme2(theta, kappa),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Fid { m } if *m == 2 => write!(f, "fid"),
            Scheme::Fid { m } => write!(f, "fid:{m}"),
            Scheme::SpinEcho => write!(f, "se"),
            Scheme::Cpmg => write!(f, "cpmg"),
            Scheme::Scheme1(Scheme1Base::SpinEcho) => write!(f, "scheme1-se"),
            Scheme::Scheme1(Scheme1Base::Cpmg) => write!(f, "scheme1-cpmg"),
            Scheme::Scheme2 => write!(f, "scheme2"),
        }
    }
}

impl FromStr for Scheme {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(m) = lower.strip_prefix("fid:") {
            let m: i64 = m
                .parse()
                .map_err(|_| ScheduleError::UnknownScheme(s.to_string()))?;
            if m == 0 {
                return Err(ScheduleError::InvalidFidWinding(m));
            }
            return Ok(Scheme::Fid { m });
        }
        match lower.as_str() {
            "fid" => Ok(Scheme::Fid { m: 2 }),
            "se" | "spin-echo" => Ok(Scheme::SpinEcho),
            "cpmg" => Ok(Scheme::Cpmg),
            "scheme1" | "scheme1-cpmg" => Ok(Scheme::Scheme1(Scheme1Base::Cpmg)),
            "scheme1-se" => Ok(Scheme::Scheme1(Scheme1Base::SpinEcho)),
            "scheme2" => Ok(Scheme::Scheme2),
            _ => Err(ScheduleError::UnknownScheme(s.to_string())),
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered segments with a common rotation rate ω_B (in units of B₀).
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    segments: Vec<SegmentSpec>,
    omega_b: f64,
    phi0: f64,
    final_pulse: bool,
}

fn half(n: i64) -> Rational64 {
    Rational64::new(n, 2)
}

fn whole(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn check_interior(theta: f64) -> Result<(), ScheduleError> {
    if theta.is_finite() && theta > 0.0 && theta < PI {
        Ok(())
    } else {
        Err(ScheduleError::AngleNotInterior(theta))
    }
}

fn rate_from_kappa(kappa: f64) -> Result<f64, ScheduleError> {
    if !kappa.is_finite() || kappa <= 1.0 {
        return Err(ScheduleError::InvalidKappa(kappa));
    }
    Ok(1.0 / kappa)
}

impl Schedule {
    /// Validates the segment list and appends the closing pulse iff the
    /// number of internal swaps is odd.
    pub fn new(segments: Vec<SegmentSpec>, omega_b: f64) -> Result<Self, ScheduleError> {
        let final_pulse = segments.len().is_multiple_of(2);
        Self::from_parts(segments, omega_b, 0.0, final_pulse)
    }

    pub fn from_parts(
        segments: Vec<SegmentSpec>,
        omega_b: f64,
        phi0: f64,
        final_pulse: bool,
    ) -> Result<Self, ScheduleError> {
        if !omega_b.is_finite() || omega_b <= 0.0 {
            return Err(ScheduleError::InvalidRate(omega_b));
        }
        let first = segments.first().ok_or(ScheduleError::Empty)?;
        if first.sign != Sign::Minus {
            return Err(ScheduleError::WrongInitialBranch);
        }
        for (index, seg) in segments.iter().enumerate() {
            if *seg.winding.numer() == 0 {
                return Err(ScheduleError::ZeroWinding { index });
            }
            if !(0.0..=PI).contains(&seg.theta) {
                return Err(ScheduleError::AngleOutOfRange {
                    index,
                    theta: seg.theta,
                });
            }
            if index > 0 && seg.sign != segments[index - 1].sign.flip() {
                return Err(ScheduleError::NonAlternatingSign { index });
            }
        }
        Ok(Self {
            segments,
            omega_b,
            phi0,
            final_pulse,
        })
    }

    /// Free induction decay: one segment C_{+m}^{θ,−1}, no pulses.
    pub fn fid(theta: f64, m: i64, kappa: f64) -> Result<Self, ScheduleError> {
        if m == 0 {
            return Err(ScheduleError::InvalidFidWinding(m));
        }
        let omega_b = rate_from_kappa(kappa)?;
        Self::new(
            vec![SegmentSpec::new(theta, whole(m), Sign::Minus)],
            omega_b,
        )
    }

    /// Spin echo C_{+1}^{θ,−1} C_{−1}^{θ,+1}.
    pub fn spin_echo(theta: f64, kappa: f64) -> Result<Self, ScheduleError> {
        check_interior(theta)?;
        Self::new(
            vec![
                SegmentSpec::new(theta, whole(1), Sign::Minus),
                SegmentSpec::new(theta, whole(-1), Sign::Plus),
            ],
            rate_from_kappa(kappa)?,
        )
    }

    /// CPMG C_{+1/2}^{θ,−1} C_{−1}^{θ,+1} C_{+1/2}^{θ,−1}.
    pub fn cpmg(theta: f64, kappa: f64) -> Result<Self, ScheduleError> {
        check_interior(theta)?;
        Self::new(
            vec![
                SegmentSpec::new(theta, half(1), Sign::Minus),
                SegmentSpec::new(theta, whole(-1), Sign::Plus),
                SegmentSpec::new(theta, half(1), Sign::Minus),
            ],
            rate_from_kappa(kappa)?,
        )
    }

    /// SE or CPMG with the clockwise segment moved to the companion cone θ_c
    /// that balances the linear noise coefficients.
    pub fn scheme1(theta_a: f64, kappa: f64, base: Scheme1Base) -> Result<Self, ScheduleError> {
        let theta_c = solve_theta_c_exact(theta_a, kappa)?;
        let omega_b = rate_from_kappa(kappa)?;
        let segments = match base {
            Scheme1Base::SpinEcho => vec![
                SegmentSpec::new(theta_a, whole(1), Sign::Minus),
                SegmentSpec::new(theta_c, whole(-1), Sign::Plus),
            ],
            Scheme1Base::Cpmg => vec![
                SegmentSpec::new(theta_a, half(1), Sign::Minus),
                SegmentSpec::new(theta_c, whole(-1), Sign::Plus),
                SegmentSpec::new(theta_a, half(1), Sign::Minus),
            ],
        };
        Self::new(segments, omega_b)
    }

    /// Four half-turn segments on the cones θ_a and π − θ_a.
    pub fn scheme2(theta_a: f64, kappa: f64) -> Result<Self, ScheduleError> {
        check_interior(theta_a)?;
        let mirrored = PI - theta_a;
        Self::new(
            vec![
                SegmentSpec::new(theta_a, half(1), Sign::Minus),
                SegmentSpec::new(theta_a, half(-1), Sign::Plus),
                SegmentSpec::new(mirrored, half(-1), Sign::Minus),
                SegmentSpec::new(mirrored, half(1), Sign::Plus),
            ],
            rate_from_kappa(kappa)?,
        )
    }

    pub fn segments(&self) -> &[SegmentSpec] {
        &self.segments
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b
    }

    /// Adiabaticity κ = B₀/ω_B.
    pub fn kappa(&self) -> f64 {
        1.0 / self.omega_b
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn final_pulse(&self) -> bool {
        self.final_pulse
    }

    pub fn internal_swaps(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn durations(&self) -> Vec<f64> {
        self.segments
            .iter()
            .map(|s| s.duration(self.omega_b))
            .collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.durations().iter().sum()
    }

    /// Total winding Σ|l_k| as an exact rational.
    pub fn total_turns(&self) -> Rational64 {
        self.segments.iter().map(|s| s.winding.abs()).sum()
    }

    /// Azimuth at the start of segment `k` (k = len gives the final azimuth).
    pub fn phi_before(&self, k: usize) -> f64 {
        self.phi0
            + self.segments[..k]
                .iter()
                .map(|s| TAU * s.winding_f64())
                .sum::<f64>()
    }

    pub fn final_phi(&self) -> f64 {
        self.phi_before(self.segments.len())
    }

    /// Net azimuthal turns Σ l_k; an integer means the loop closes.
    pub fn net_turns(&self) -> Rational64 {
        self.segments.iter().map(|s| s.winding).sum()
    }

    /// Locates time `t` in the schedule, returning the segment index and
    /// the time elapsed inside it. `None` outside `[0, T]`.
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if !(0.0..=self.total_duration()).contains(&t) {
            return None;
        }
        let mut start = 0.0;
        let last = self.segments.len() - 1;
        for (k, seg) in self.segments.iter().enumerate() {
            let end = start + seg.duration(self.omega_b);
            if t < end || k == last {
                return Some((k, (t - start).min(end - start)));
            }
            start = end;
        }
        None
    }

    /// Σ_k s_k·|l_k|: proportional to the net dynamic phase, which
    /// refocuses exactly when this vanishes.
    pub fn dynamic_phase_weight(&self) -> Rational64 {
        self.segments
            .iter()
            .map(|s| s.winding.abs() * s.sign.as_i64())
            .sum()
    }

    /// Adiabatic geometric phase difference γ₋₁ − γ₊₁ between the branches
    /// that start with eigenvalue −1 and +1.
    ///
    /// In segment k the −1 branch carries eigenvalue s_k and picks up
    /// πl_k(1 + s_k cosθ_k); the other branch picks up πl_k(1 − s_k cosθ_k).
    pub fn expected_phase_difference(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| TAU * s.winding_f64() * s.sign.value() * s.theta.cos())
            .sum()
    }

    /// Piecewise-constant weights c_k multiplying K₃(t) in the random phase
    /// φ = −Σ_k c_k ∫_k K₃ dt, with c_k = s_k(cosθ_k − sign(l_k) sin²θ_k/κ).
    pub fn linear_coefficients(&self) -> Vec<Coefficient> {
        let kappa = self.kappa();
        self.segments
            .iter()
            .map(|s| {
                let sin2 = s.theta.sin().powi(2);
                Coefficient {
                    weight: s.sign.value() * (s.theta.cos() - s.direction() * sin2 / kappa),
                    duration: s.duration(self.omega_b),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&ScheduleFile::from(self))
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleJsonError> {
        let file: ScheduleFile = serde_json::from_str(text)?;
        Ok(Schedule::try_from(file)?)
    }
}

/// A weight held constant for `duration`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficient {
    pub weight: f64,
    pub duration: f64,
}

/// Σ_k c_k·duration_k: the response of the phase to a static field offset.
pub fn dc_sum(coefficients: &[Coefficient]) -> f64 {
    coefficients.iter().map(|c| c.weight * c.duration).sum()
}

/// Exact companion angle for Scheme 1.
///
/// Solves cosθ_c + sin²θ_c/κ = cosθ_a − sin²θ_a/κ. With c = cosθ_c this is
/// c² − κc + (κ·rhs − 1) = 0; the root inside [−1, 1] is the smaller one,
/// evaluated in the cancellation-free form 2q / (κ + sqrt(κ² − 4q)).
pub fn solve_theta_c_exact(theta_a: f64, kappa: f64) -> Result<f64, ScheduleError> {
    check_interior(theta_a)?;
    if !(kappa > 1.0) {
        return Err(ScheduleError::InvalidKappa(kappa));
    }
    let target = theta_a.cos() - theta_a.sin().powi(2) / kappa;
    let q = kappa * target - 1.0;
    let disc = kappa * kappa - 4.0 * q;
    let c = 2.0 * q / (kappa + disc.sqrt());
    if !(-1.0..=1.0).contains(&c) {
        return Err(ScheduleError::NoCompanionAngle { cos_theta_c: c });
    }
    Ok(c.acos())
}

/// Closed-form adiabatic approximation of the companion angle, accurate to
/// O((ω_B/B₀)³).
pub fn solve_theta_c_approx(theta_a: f64, kappa: f64) -> Result<f64, ScheduleError> {
    check_interior(theta_a)?;
    if !(kappa > 1.0) {
        return Err(ScheduleError::InvalidKappa(kappa));
    }
    let x = 1.0 / kappa;
    let ca = theta_a.cos();
    let norm = 1.0 + x * x;
    let numerator = ca - 2.0 * x + x * x * ca / norm;
    let denominator = 1.0 + (x * x - 2.0 * x * ca) / norm;
    let c = numerator / denominator;
    if !(-1.0..=1.0).contains(&c) {
        return Err(ScheduleError::NoCompanionAngle { cos_theta_c: c });
    }
    Ok(c.acos())
}

#[derive(Debug, Error)]
pub enum ScheduleJsonError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// On-disk schedule layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(rename = "omega_B_over_B0")]
    pub omega_b_over_b0: f64,
    pub segments: Vec<SegmentFile>,
    pub final_pulse: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub phi0: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub theta: f64,
    pub l_num: i64,
    pub l_den: i64,
    pub s: i8,
}

impl From<&Schedule> for ScheduleFile {
    fn from(schedule: &Schedule) -> Self {
        Self {
            omega_b_over_b0: schedule.omega_b,
            segments: schedule
                .segments
                .iter()
                .map(|s| SegmentFile {
                    theta: s.theta,
                    l_num: *s.winding.numer(),
                    l_den: *s.winding.denom(),
                    s: s.sign.as_i64() as i8,
                })
                .collect(),
            final_pulse: schedule.final_pulse,
            phi0: schedule.phi0,
        }
    }
}

impl TryFrom<ScheduleFile> for Schedule {
    type Error = ScheduleError;

    fn try_from(file: ScheduleFile) -> Result<Self, Self::Error> {
        let mut segments = Vec::with_capacity(file.segments.len());
        for (index, seg) in file.segments.into_iter().enumerate() {
            if seg.l_den <= 0 {
                return Err(ScheduleError::InvalidDenominator(seg.l_den));
            }
            let sign = match seg.s {
                1 => Sign::Plus,
                -1 => Sign::Minus,
                _ => return Err(ScheduleError::NonAlternatingSign { index }),
            };
            segments.push(SegmentSpec::new(
                seg.theta,
                Rational64::new(seg.l_num, seg.l_den),
                sign,
            ));
        }
        Schedule::from_parts(segments, file.omega_b_over_b0, file.phi0, file.final_pulse)
    }
}
