//! Exact step-wise unitary evolution of a driven qubit.
//!
//! The Hamiltonian is H = B_T(t)·σ/2 with B_T = B₀n(t) plus the noise
//! field (K₃ẑ or the co-rotating radial K_r). Noise is held constant over
//! each grid step and ideal swap pulses act instantaneously at segment
//! boundaries.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::NoiseRealization;
use crate::schedule::{Schedule, Sign};

pub type Operator = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, PartialEq)]
pub enum PropagatorError {
    #[error("time {t} outside schedule of duration {total}")]
    TimeOutOfRange { t: f64, total: f64 },
    #[error("noise path has {got} samples but the grid has {expected} steps")]
    NoiseLength { expected: usize, got: usize },
    #[error("noise path step {got} differs from grid step {expected}")]
    NoiseStep { expected: f64, got: f64 },
    #[error("segment {index} lasts {steps} grid steps, not an integer count")]
    IncommensurateSegment { index: usize, steps: f64 },
    #[error("step divisor must be at least 1")]
    InvalidDivisor,
    #[error("initial state is not normalized (norm {0})")]
    NotNormalized(f64),
}

pub fn pauli_x() -> Operator {
    Operator::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Operator {
    Operator::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Operator {
    Operator::new(ONE, ZERO, ZERO, -ONE)
}

/// v·σ for a real 3-vector.
pub fn sigma_dot(v: &Vector3<f64>) -> Operator {
    Operator::new(
        Complex64::new(v.z, 0.0),
        Complex64::new(v.x, -v.y),
        Complex64::new(v.x, v.y),
        Complex64::new(-v.z, 0.0),
    )
}

/// Polar and azimuthal angles of a field direction. The azimuth is kept
/// unreduced so that eigenstate phases follow the schedule continuously.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let norm = v.norm();
        Self {
            theta: (v.z / norm).clamp(-1.0, 1.0).acos(),
            phi: v.y.atan2(v.x),
        }
    }

    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }
}

/// Normalized two-component state (c₀, c₁) in the σ_z basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState(Vector2<Complex64>);

impl QubitState {
    pub fn new(c0: Complex64, c1: Complex64) -> Self {
        let state = Self(Vector2::new(c0, c1));
        let norm = state.norm();
        Self(state.0 / Complex64::new(norm, 0.0))
    }

    pub fn from_raw(amplitudes: Vector2<Complex64>) -> Self {
        Self(amplitudes)
    }

    pub fn amplitudes(&self) -> &Vector2<Complex64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        (self.0[0].norm_sqr() + self.0[1].norm_sqr()).sqrt()
    }

    pub fn apply(&self, op: &Operator) -> Self {
        Self(op * self.0)
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &QubitState) -> Complex64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    pub fn density_matrix(&self) -> Operator {
        self.0 * self.0.adjoint()
    }

    pub fn bloch_vector(&self) -> Vector3<f64> {
        let (a, b) = (self.0[0], self.0[1]);
        let cross = a.conj() * b;
        Vector3::new(2.0 * cross.re, 2.0 * cross.im, a.norm_sqr() - b.norm_sqr())
    }
}

/// Eigenstate of n·σ with eigenvalue `sign`, in the gauge
/// |ψ₊⟩ = (e^{−iφ}cos(θ/2), sin(θ/2)), |ψ₋⟩ = (e^{−iφ}sin(θ/2), −cos(θ/2)).
pub fn eigenstate(sign: Sign, dir: Direction) -> QubitState {
    let (s, c) = (0.5 * dir.theta).sin_cos();
    let phase = Complex64::from_polar(1.0, -dir.phi);
    match sign {
        Sign::Plus => QubitState(Vector2::new(phase * c, Complex64::new(s, 0.0))),
        Sign::Minus => QubitState(Vector2::new(phase * s, Complex64::new(-c, 0.0))),
    }
}

/// Equal superposition of the two eigenstates of n₀·σ.
pub fn initial_superposition(dir: Direction) -> QubitState {
    let plus = eigenstate(Sign::Plus, dir).0;
    let minus = eigenstate(Sign::Minus, dir).0;
    QubitState((plus + minus) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
}

/// ρ₋₁,₁ = ⟨ψ₋₁|ρ|ψ₊₁⟩ in the eigenbasis of `dir`.
pub fn readout_coherence(rho: &Operator, dir: Direction) -> Complex64 {
    let minus = eigenstate(Sign::Minus, dir).0;
    let plus = eigenstate(Sign::Plus, dir).0;
    (minus.adjoint() * rho * plus)[(0, 0)]
}

pub fn readout_state(state: &QubitState, dir: Direction) -> Complex64 {
    let a_minus = eigenstate(Sign::Minus, dir).inner(state);
    let a_plus = eigenstate(Sign::Plus, dir).inner(state);
    a_minus * a_plus.conj()
}

/// Which component of the noise field the scalar noise path drives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseAxis {
    /// K₃ along ẑ.
    #[default]
    Longitudinal,
    /// K_r along (cosφ, sinφ, 0), co-rotating with the drive.
    Transverse,
}

impl std::str::FromStr for NoiseAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "longitudinal" | "z" => Ok(NoiseAxis::Longitudinal),
            "transverse" | "radial" => Ok(NoiseAxis::Transverse),
            other => Err(format!("unknown noise axis '{other}'")),
        }
    }
}

impl std::fmt::Display for NoiseAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseAxis::Longitudinal => write!(f, "longitudinal"),
            NoiseAxis::Transverse => write!(f, "transverse"),
        }
    }
}

/// Total field B_T in angular-frequency units (B₀ = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample(pub Vector3<f64>);

impl FieldSample {
    pub fn magnitude(&self) -> f64 {
        self.0.norm()
    }
}

fn noise_vector(noise: f64, phi: f64, axis: NoiseAxis) -> Vector3<f64> {
    match axis {
        NoiseAxis::Longitudinal => Vector3::new(0.0, 0.0, noise),
        NoiseAxis::Transverse => Vector3::new(noise * phi.cos(), noise * phi.sin(), 0.0),
    }
}

pub fn field_at(
    schedule: &Schedule,
    t: f64,
    noise: f64,
    axis: NoiseAxis,
) -> Result<FieldSample, PropagatorError> {
    let (k, local) = schedule.locate(t).ok_or(PropagatorError::TimeOutOfRange {
        t,
        total: schedule.total_duration(),
    })?;
    let seg = &schedule.segments()[k];
    let phi = schedule.phi_before(k) + seg.omega_rf(schedule.omega_b()) * local;
    let control = Direction::new(seg.theta, phi).unit_vector();
    Ok(FieldSample(control + noise_vector(noise, phi, axis)))
}

/// exp(−i B·σ dt/2) = cos(|B|dt/2)·I − i sin(|B|dt/2)·B̂·σ.
///
/// A zero field yields the identity.
pub fn step_unitary(field: &FieldSample, dt: f64) -> Operator {
    let b = field.magnitude();
    if b == 0.0 {
        return Operator::identity();
    }
    let (s, c) = (0.5 * b * dt).sin_cos();
    let n = field.0 / b;
    let mis = Complex64::new(0.0, -s);
    Operator::new(
        Complex64::new(c, 0.0) + mis * n.z,
        mis * Complex64::new(n.x, -n.y),
        mis * Complex64::new(n.x, n.y),
        Complex64::new(c, 0.0) - mis * n.z,
    )
}

/// exp(−iασ_z/2)
fn rotation_z(angle: f64) -> Operator {
    let half = Complex64::from_polar(1.0, -0.5 * angle);
    Operator::new(half, ZERO, ZERO, half.conj())
}

/// Ideal swap pulse m·σ with m = (ẑ × n)/|ẑ × n|, or σ_x when n ∥ ẑ.
///
/// m ⟂ n, so the pulse anticommutes with n·σ and exchanges its
/// eigenstates; in the eigenstate gauge used here it maps
/// |ψ₊⟩ → −i|ψ₋⟩ and |ψ₋⟩ → i|ψ₊⟩ for any θ ∈ (0, π).
pub fn swap_pulse(n: &Vector3<f64>) -> Operator {
    let m = Vector3::z().cross(n);
    let norm = m.norm();
    if norm < 1e-12 {
        return pauli_x();
    }
    sigma_dot(&(m / norm))
}

/// Rotation that carries unit vector `from` onto `to` about their common
/// normal.
pub fn reorientation(from: &Vector3<f64>, to: &Vector3<f64>) -> Operator {
    let axis = from.cross(to);
    let s = axis.norm();
    if s < 1e-15 {
        return Operator::identity();
    }
    let angle = s.atan2(from.dot(to));
    let (sh, ch) = (0.5 * angle).sin_cos();
    Operator::identity() * Complex64::new(ch, 0.0)
        - sigma_dot(&(axis / s)) * Complex64::new(0.0, sh)
}

/// Pulse at a segment boundary: the field is reoriented from `from` to
/// `to` and the eigenstates are swapped about `to`. Equals
/// `swap_pulse(to)` when the two directions coincide.
pub fn boundary_pulse(from: &Vector3<f64>, to: &Vector3<f64>) -> Operator {
    swap_pulse(to) * reorientation(from, to)
}

/// Uniform step grid with dt = (2π/B₀)/divisor.
#[derive(Clone, Debug, PartialEq)]
pub struct StepGrid {
    dt: f64,
    steps_per_segment: Vec<usize>,
}

impl StepGrid {
    pub const DEFAULT_DIVISOR: u32 = 10;

    pub fn new(schedule: &Schedule, divisor: u32) -> Result<Self, PropagatorError> {
        if divisor == 0 {
            return Err(PropagatorError::InvalidDivisor);
        }
        let dt = TAU / divisor as f64;
        let mut steps_per_segment = Vec::with_capacity(schedule.segments().len());
        for (index, seg) in schedule.segments().iter().enumerate() {
            // duration/dt = |l|·κ·divisor
            let exact = seg.winding_f64().abs() * schedule.kappa() * divisor as f64;
            let rounded = exact.round();
            if (exact - rounded).abs() > 1e-9 * exact.max(1.0) || rounded < 1.0 {
                return Err(PropagatorError::IncommensurateSegment {
                    index,
                    steps: exact,
                });
            }
            steps_per_segment.push(rounded as usize);
        }
        Ok(Self {
            dt,
            steps_per_segment,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_per_segment(&self) -> &[usize] {
        &self.steps_per_segment
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_segment.iter().sum()
    }
}

/// How a single grid step is propagated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Exact for a field rotating uniformly about ẑ with the noise held
    /// fixed in the co-rotating frame: U = R_z(ω dt)·exp(−i(B − ωẑ)·σ dt/2).
    #[default]
    CoRotating,
    /// Lab-frame exponential of the field sampled at the step midpoint.
    Midpoint,
}

impl std::str::FromStr for Integrator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "co-rotating" | "corotating" => Ok(Integrator::CoRotating),
            "midpoint" => Ok(Integrator::Midpoint),
            other => Err(format!("unknown integrator '{other}'")),
        }
    }
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Integrator::CoRotating => write!(f, "co-rotating"),
            Integrator::Midpoint => write!(f, "midpoint"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvolveOptions {
    pub axis: NoiseAxis,
    pub integrator: Integrator,
}

/// Final state plus the number of steps where the effective field vanished.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evolved {
    pub state: QubitState,
    pub degenerate_steps: usize,
}

pub fn evolve(
    schedule: &Schedule,
    noise: &NoiseRealization,
    grid: &StepGrid,
    initial: QubitState,
    options: EvolveOptions,
) -> Result<Evolved, PropagatorError> {
    evolve_observed(schedule, noise, grid, initial, options, |_, _, _| {})
}

/// Like [`evolve`], calling `observer(step, t, state)` after every grid step
/// and pulse (pulses reuse the step index of the boundary).
pub fn evolve_observed<F>(
    schedule: &Schedule,
    noise: &NoiseRealization,
    grid: &StepGrid,
    initial: QubitState,
    options: EvolveOptions,
    mut observer: F,
) -> Result<Evolved, PropagatorError>
where
    F: FnMut(usize, f64, &QubitState),
{
    if noise.len() != grid.total_steps() {
        return Err(PropagatorError::NoiseLength {
            expected: grid.total_steps(),
            got: noise.len(),
        });
    }
    if (noise.dt() - grid.dt()).abs() > 1e-12 * grid.dt() {
        return Err(PropagatorError::NoiseStep {
            expected: grid.dt(),
            got: noise.dt(),
        });
    }
    let norm = initial.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(PropagatorError::NotNormalized(norm));
    }

    let dt = grid.dt();
    let omega_b = schedule.omega_b();
    let segments = schedule.segments();
    let values = noise.values();
    let mut psi = *initial.amplitudes();
    let mut degenerate_steps = 0;
    let mut step = 0;
    let mut t = 0.0;

    for (k, seg) in segments.iter().enumerate() {
        let omega = seg.omega_rf(omega_b);
        let phi_start = schedule.phi_before(k);
        let drift = rotation_z(omega * dt);
        let (st, ct) = seg.theta.sin_cos();
        for j in 0..grid.steps_per_segment()[k] {
            let noise_value = values[step];
            let u = match options.integrator {
                Integrator::CoRotating => {
                    let phi = phi_start + omega * dt * j as f64;
                    let (sp, cp) = phi.sin_cos();
                    let field = Vector3::new(st * cp, st * sp, ct - omega)
                        + noise_vector(noise_value, phi, options.axis);
                    let field = FieldSample(field);
                    if field.magnitude() == 0.0 {
                        degenerate_steps += 1;
                    }
                    drift * step_unitary(&field, dt)
                }
                Integrator::Midpoint => {
                    let phi = phi_start + omega * dt * (j as f64 + 0.5);
                    let (sp, cp) = phi.sin_cos();
                    let field = FieldSample(
                        Vector3::new(st * cp, st * sp, ct)
                            + noise_vector(noise_value, phi, options.axis),
                    );
                    if field.magnitude() == 0.0 {
                        degenerate_steps += 1;
                    }
                    step_unitary(&field, dt)
                }
            };
            psi = u * psi;
            step += 1;
            t += dt;
            observer(step, t, &QubitState(psi));
        }

        let phi_end = schedule.phi_before(k + 1);
        let here = Direction::new(seg.theta, phi_end).unit_vector();
        let pulse = match segments.get(k + 1) {
            Some(next) => Some(boundary_pulse(
                &here,
                &Direction::new(next.theta, phi_end).unit_vector(),
            )),
            None if schedule.final_pulse() => Some(swap_pulse(&here)),
            None => None,
        };
        if let Some(p) = pulse {
            psi = p * psi;
            observer(step, t, &QubitState(psi));
        }
    }

    if degenerate_steps > 0 {
        log::warn!("{degenerate_steps} steps had a vanishing effective field; identity used");
    }
    Ok(Evolved {
        state: QubitState(psi),
        degenerate_steps,
    })
}

pub fn initial_direction(schedule: &Schedule) -> Direction {
    Direction::new(schedule.segments()[0].theta, schedule.phi0())
}

/// Field direction at the end of the schedule; the readout basis.
pub fn final_direction(schedule: &Schedule) -> Direction {
    let last = schedule.segments().last().expect("schedule is never empty");
    Direction::new(last.theta, schedule.final_phi())
}

/// Phase that the pulses alone add to γ₋₁ − γ₊₁, reduced to (−π, π].
///
/// Each pulse maps |ψ_s(n)⟩ to e^{iξ}|ψ_{−s}(n′)⟩; the offset is the sum of
/// ξ on the branch that starts at −1 minus the sum on the other branch.
pub fn pulse_phase_offset(schedule: &Schedule) -> f64 {
    let segments = schedule.segments();
    let mut offset = 0.0;
    for (k, seg) in segments.iter().enumerate() {
        let phi = schedule.phi_before(k + 1);
        let from = Direction::new(seg.theta, phi);
        let (to, pulse) = match segments.get(k + 1) {
            Some(next) => {
                let to = Direction::new(next.theta, phi);
                (to, boundary_pulse(&from.unit_vector(), &to.unit_vector()))
            }
            None if schedule.final_pulse() => (from, swap_pulse(&from.unit_vector())),
            None => break,
        };
        let s = seg.sign;
        let tracked = eigenstate(s.flip(), to).inner(&eigenstate(s, from).apply(&pulse));
        let other = eigenstate(s, to).inner(&eigenstate(s.flip(), from).apply(&pulse));
        offset += tracked.arg() - other.arg();
    }
    wrap_phase(offset)
}

/// Reduces an angle to (−π, π].
pub fn wrap_phase(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// max |(U†U − I)_ij|
pub fn unitarity_defect(u: &Operator) -> f64 {
    (u.adjoint() * u - Operator::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Readout coherence of a run driven by `noise`, starting from the equal
/// superposition at the initial field direction.
pub fn run_coherence(
    schedule: &Schedule,
    noise: &NoiseRealization,
    grid: &StepGrid,
    options: EvolveOptions,
) -> Result<Complex64, PropagatorError> {
    let init = initial_superposition(initial_direction(schedule));
    let out = evolve(schedule, noise, grid, init, options)?;
    Ok(readout_state(&out.state, final_direction(schedule)))
}

pub fn noiseless_coherence(
    schedule: &Schedule,
    grid: &StepGrid,
    options: EvolveOptions,
) -> Result<Complex64, PropagatorError> {
    let zeros = NoiseRealization::zeros(grid.dt(), grid.total_steps());
    run_coherence(schedule, &zeros, grid, options)
}

/// Writes `step,t,bx,by,bz` rows of the Bloch vector along a run.
pub fn write_trace_csv<W: std::io::Write>(
    schedule: &Schedule,
    noise: &NoiseRealization,
    grid: &StepGrid,
    options: EvolveOptions,
    out: W,
) -> Result<(), TraceError> {
    let init = initial_superposition(initial_direction(schedule));
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["step", "t", "bx", "by", "bz"])?;
    let mut rows = vec![(0usize, 0.0, init.bloch_vector())];
    evolve_observed(schedule, noise, grid, init, options, |step, t, psi| {
        rows.push((step, t, psi.bloch_vector()));
    })?;
    for (step, t, b) in rows {
        writer.write_record(&[
            step.to_string(),
            t.to_string(),
            b.x.to_string(),
            b.y.to_string(),
            b.z.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
