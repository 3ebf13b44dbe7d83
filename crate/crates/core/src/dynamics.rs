//! Time integration of the follow-the-leader particle system.
//!
//! Each of the `n` followers moves at the velocity of its local forward
//! density, `dx_i/dt = v(ell / (x_{i+1} - x_i))`, while the leader moves at
//! the free-flow speed `v_max`. The integrator is an explicit fourth-order
//! Runge-Kutta scheme with an adaptive step bounded by a CFL-like gap
//! condition; the leader is advanced by its exact linear law to remove one
//! error source.
//!
//! The discrete maximum principle (particle gaps never drop below the
//! minimal initial gap, hence local densities never exceed their initial
//! sup-norm) is enforced as a runtime assertion: a violation beyond
//! tolerance aborts the run, since it indicates integrator error rather
//! than model behaviour.

use crate::atomiser::ParticleConfiguration;
use crate::error::{FtlError, Result};
use crate::velocity::VelocityModel;

/// Particle positions at one instant, with the per-interval mass.
#[derive(Debug, Clone)]
pub struct ParticleState {
    t: f64,
    positions: Vec<f64>,
    ell: f64,
}

impl ParticleState {
    pub fn new(t: f64, positions: Vec<f64>, ell: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(FtlError::InvalidInput(
                "a particle state needs at least two particles".into(),
            ));
        }
        if !(ell > 0.0) || !ell.is_finite() || !t.is_finite() {
            return Err(FtlError::InvalidInput(format!(
                "invalid state scalars: t = {t}, ell = {ell}"
            )));
        }
        let state = Self { t, positions, ell };
        state.check_ordering()?;
        Ok(state)
    }

    /// State at `t = 0` for an atomised configuration.
    pub fn initial(config: &ParticleConfiguration) -> Self {
        Self {
            t: 0.0,
            positions: config.positions().to_vec(),
            ell: config.ell(),
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of particle intervals (one less than the particle count).
    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Local density `R_i = ell / (x_{i+1} - x_i)`.
    pub fn density(&self, i: usize) -> f64 {
        self.ell / (self.positions[i + 1] - self.positions[i])
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.density(i)).collect()
    }

    pub fn min_gap(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_density(&self) -> f64 {
        self.ell / self.min_gap()
    }

    fn check_ordering(&self) -> Result<()> {
        if self
            .positions
            .windows(2)
            .any(|w| !(w[0] < w[1]) || !w[1].is_finite())
        {
            return Err(FtlError::StateCorruption(format!(
                "positions not strictly increasing at t = {}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Right-hand side of the particle system: `v(R_i)` for followers, exactly
/// `v_max` for the leader.
pub fn rhs(state: &ParticleState, model: &VelocityModel) -> Result<Vec<f64>> {
    state.check_ordering()?;
    let mut out = rhs_raw(&state.positions, state.ell, model)?;
    if let Some(last) = out.last_mut() {
        *last = model.v_max();
    }
    Ok(out)
}

fn rhs_raw(positions: &[f64], ell: f64, model: &VelocityModel) -> Result<Vec<f64>> {
    let n = positions.len() - 1;
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let gap = positions[i + 1] - positions[i];
        if !(gap > 0.0) {
            return Err(FtlError::StateCorruption(format!(
                "non-positive gap {gap} at interval {i}"
            )));
        }
        out.push(model.v(ell / gap)?);
    }
    out.push(model.v_max());
    Ok(out)
}

/// One explicit RK4 step of the coupled system.
///
/// The leader is advanced linearly (all its stage slopes equal `v_max`).
/// Fails if any stage or the final result loses strict ordering; the caller
/// treats that as a step rejection.
pub fn step(state: &ParticleState, model: &VelocityModel, dt: f64) -> Result<ParticleState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FtlError::InvalidInput(format!("step needs dt > 0, got {dt}")));
    }
    let x = &state.positions;
    let m = x.len();
    let ell = state.ell;

    let k1 = rhs_raw(x, ell, model)?;
    let mut stage = vec![0.0; m];
    for i in 0..m {
        stage[i] = x[i] + 0.5 * dt * k1[i];
    }
    let k2 = rhs_raw(&stage, ell, model)?;
    for i in 0..m {
        stage[i] = x[i] + 0.5 * dt * k2[i];
    }
    let k3 = rhs_raw(&stage, ell, model)?;
    for i in 0..m {
        stage[i] = x[i] + dt * k3[i];
    }
    let k4 = rhs_raw(&stage, ell, model)?;

    let mut next = vec![0.0; m];
    for i in 0..m - 1 {
        next[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    // Exact linear law for the leader.
    next[m - 1] = x[m - 1] + dt * model.v_max();

    ParticleState::new(state.t + dt, next, ell)
}

/// Integrator parameters.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Final time; zero yields a trajectory holding only the initial state.
    pub t_end: f64,
    /// Hard cap on the step size.
    pub dt_max: f64,
    /// Fraction of the gap-crossing time allowed per step, in `(0, 1]`.
    pub cfl: f64,
    /// Store every `sample_stride`-th accepted state (plus the final one).
    pub sample_stride: usize,
    /// Relative tolerance for the maximum-principle floor.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt_max: 0.05,
            cfl: 0.2,
            sample_stride: 100,
            tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(FtlError::InvalidConfig(format!(
                "t_end must be finite and non-negative, got {}",
                self.t_end
            )));
        }
        if !(self.dt_max > 0.0) {
            return Err(FtlError::InvalidConfig(format!(
                "dt_max must be positive, got {}",
                self.dt_max
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(FtlError::InvalidConfig(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if self.sample_stride == 0 {
            return Err(FtlError::InvalidConfig("sample_stride must be >= 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(FtlError::InvalidConfig(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Stored samples of one integration run plus the run-wide extremes used by
/// the maximum-principle diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Vec<ParticleState>,
    dt_history: Vec<f64>,
    /// Minimal initial gap; the maximum-principle floor refers to it.
    delta_min: f64,
    /// Sup-norm of the discrete initial density (`ell / delta_min`).
    rho_bar_discrete: f64,
    /// Smallest gap seen over every accepted step, stored or not.
    min_gap_over_run: f64,
    /// Largest local density seen over every accepted step.
    max_density_over_run: f64,
}

impl Trajectory {
    pub fn states(&self) -> &[ParticleState] {
        &self.states
    }

    pub fn dt_history(&self) -> &[f64] {
        &self.dt_history
    }

    pub fn delta_min(&self) -> f64 {
        self.delta_min
    }

    pub fn rho_bar_discrete(&self) -> f64 {
        self.rho_bar_discrete
    }

    pub fn min_gap_over_run(&self) -> f64 {
        self.min_gap_over_run
    }

    pub fn max_density_over_run(&self) -> f64 {
        self.max_density_over_run
    }

    pub fn initial_state(&self) -> &ParticleState {
        &self.states[0]
    }

    pub fn final_state(&self) -> &ParticleState {
        self.states.last().unwrap()
    }

    /// Stored state closest to `t` within an absolute slack of
    /// `1e-9 * max(1, t)`, if any.
    pub fn state_at(&self, t: f64) -> Option<&ParticleState> {
        let slack = 1e-9 * t.abs().max(1.0);
        self.states
            .iter()
            .min_by(|a, b| {
                (a.t() - t)
                    .abs()
                    .partial_cmp(&(b.t() - t).abs())
                    .unwrap()
            })
            .filter(|s| (s.t() - t).abs() <= slack)
    }

    /// Write one `t,i,x_i` row per particle per stored state.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,i,x_i")?;
        for s in &self.states {
            for (i, x) in s.positions().iter().enumerate() {
                writeln!(w, "{},{},{}", s.t(), i, x)?;
            }
        }
        Ok(())
    }
}

/// Advance a configuration to `t_end`, storing every `sample_stride`-th
/// accepted state plus the final one.
pub fn integrate(
    config: &ParticleConfiguration,
    model: &VelocityModel,
    solver: &SolverConfig,
) -> Result<Trajectory> {
    integrate_inner(config, model, solver, &[])
}

/// Advance a configuration to `t_end`, hitting each requested time exactly
/// and storing exactly those states (plus the initial and final ones).
pub fn integrate_with_schedule(
    config: &ParticleConfiguration,
    model: &VelocityModel,
    solver: &SolverConfig,
    times: &[f64],
) -> Result<Trajectory> {
    if times.iter().any(|&t| !(0.0..=solver.t_end).contains(&t)) {
        return Err(FtlError::InvalidConfig(
            "schedule times must lie within [0, t_end]".into(),
        ));
    }
    let mut sched: Vec<f64> = times.to_vec();
    sched.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sched.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * solver.t_end.max(1.0));
    integrate_inner(config, model, solver, &sched)
}

fn integrate_inner(
    config: &ParticleConfiguration,
    model: &VelocityModel,
    solver: &SolverConfig,
    schedule: &[f64],
) -> Result<Trajectory> {
    solver.validate()?;
    let delta_min = config.min_gap();
    let ell = config.ell();
    let rho_bar_discrete = ell / delta_min;
    let floor = delta_min * (1.0 - solver.tolerance);
    // Global speed spread for the CFL-like cap. The model's rho_bar comes
    // from the datum sup-norm, which dominates every local density.
    let spread = model.v_max() - model.v(model.rho_bar().max(rho_bar_discrete))?;

    let mut state = ParticleState::new(0.0, config.positions().to_vec(), ell)?;
    let scheduled_mode = !schedule.is_empty();
    let mut states = vec![state.clone()];
    let mut dt_history = Vec::new();
    let mut min_gap_over_run = state.min_gap();
    let mut accepted: usize = 0;
    let mut sched_idx = schedule.iter().position(|&t| t > 0.0).unwrap_or(schedule.len());

    let time_slack = 1e-12 * solver.t_end.max(1.0);
    while state.t < solver.t_end - time_slack {
        let cap = solver
            .dt_max
            .min(if spread > 0.0 {
                solver.cfl * state.min_gap() / spread
            } else {
                solver.dt_max
            });
        // Clip to the next event: a schedule entry or the final time.
        let next_event = if sched_idx < schedule.len() {
            schedule[sched_idx].min(solver.t_end)
        } else {
            solver.t_end
        };
        let remaining = next_event - state.t;
        let (mut dt, snap_to_event) = if remaining <= cap * (1.0 + 1e-9) {
            (remaining, true)
        } else {
            (cap, false)
        };

        let mut halvings = 0u32;
        let next = loop {
            match step(&state, model, dt) {
                Ok(candidate) if candidate.min_gap() >= floor => break candidate,
                _ => {
                    halvings += 1;
                    if halvings > 60 {
                        return Err(FtlError::Stiffness {
                            t: state.t,
                            halvings,
                        });
                    }
                    dt *= 0.5;
                }
            }
        };
        let snapped = snap_to_event && halvings == 0;

        state = next;
        if snapped {
            // Assign the event time exactly; the step already landed within
            // round-off of it.
            state.t = next_event;
        }
        // Exact leader law from the absolute time, killing accumulation.
        let last = state.positions.len() - 1;
        state.positions[last] = config.positions()[last] + state.t * model.v_max();

        accepted += 1;
        dt_history.push(dt);
        let gap = state.min_gap();
        min_gap_over_run = min_gap_over_run.min(gap);
        if gap < floor {
            return Err(FtlError::MaximumPrinciple {
                t: state.t,
                min_gap: gap,
                floor,
            });
        }

        if scheduled_mode {
            if snapped {
                while sched_idx < schedule.len() && schedule[sched_idx] <= state.t + time_slack {
                    sched_idx += 1;
                }
                states.push(state.clone());
            }
        } else if accepted % solver.sample_stride == 0 {
            states.push(state.clone());
        }
    }

    if (states.last().unwrap().t - state.t).abs() > time_slack {
        states.push(state.clone());
    }

    let max_density_over_run = ell / min_gap_over_run;
    Ok(Trajectory {
        states,
        dt_history,
        delta_min,
        rho_bar_discrete,
        min_gap_over_run,
        max_density_over_run,
    })
}

/// Merged sampling schedule: `uniform_samples + 1` equally spaced times on
/// `[0, t_end]` together with the dyadic times `t_end * 2^-k` used by the
/// near-zero continuity diagnostics.
pub fn build_schedule(t_end: f64, uniform_samples: usize, dyadic_depth: usize) -> Vec<f64> {
    let mut times = Vec::new();
    if t_end <= 0.0 {
        return vec![0.0];
    }
    for j in 0..=uniform_samples.max(1) {
        times.push(t_end * j as f64 / uniform_samples.max(1) as f64);
    }
    for k in 1..=dyadic_depth {
        times.push(t_end * 0.5f64.powi(k as i32));
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end);
    times
}

/// Dyadic subset of a schedule: `t_end * 2^-k` for `k = 1..=depth`.
pub fn dyadic_times(t_end: f64, depth: usize) -> Vec<f64> {
    (1..=depth).map(|k| t_end * 0.5f64.powi(k as i32)).collect()
}
