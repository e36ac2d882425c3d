//! Time-dependent M(t)/E_k/1 queue.
//!
//! The engine advances an (N+1)-state distribution of the number in system
//! one mean service time per epoch. Between epochs arrivals are Poisson at
//! the rate of the sub-period holding the epoch start; the arrival count
//! over one Erlang-k service is negative binomial. Waits between epochs are
//! linearly interpolated.
//!
//! [`ck_oracle`] integrates the full (kN+1)-phase forward equations and is
//! the reference the engine is tested against.
//!
//! Units: rates are per sub-period (`dt` minutes), times and waits are in
//! minutes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    /// Erlang order of service.
    pub k: u32,
    /// Service rate per sub-period.
    pub mu: f64,
    /// Largest number in system kept by the state vector.
    pub n: usize,
}

impl QueueParams {
    pub fn new(k: u32, mu: f64, n: usize) -> Result<Self> {
        let p = QueueParams { k, mu, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Param("Erlang order k must be >= 1".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Param(format!("service rate {} must be positive", self.mu)));
        }
        if self.n < 1 {
            return Err(Error::Param("queue capacity N must be >= 1".into()));
        }
        Ok(())
    }
}

/// Piecewise-constant demand: `rates[j]` expected operations during
/// sub-period j, which spans `[t0 + j*dt, t0 + (j+1)*dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub rates: Vec<f64>,
    pub dt: f64,
    pub t0: f64,
}

impl DemandProfile {
    pub fn new(rates: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Param(format!("sub-period length {dt} must be positive")));
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::Param(format!("demand rate {r} must be finite and non-negative")));
        }
        Ok(DemandProfile { rates, dt, t0 })
    }

    pub fn zeros(m: usize, dt: f64, t0: f64) -> Self {
        DemandProfile { rates: vec![0.0; m], dt, t0 }
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.rates.len() as f64 * self.dt
    }

    pub fn index(&self, t: f64) -> Result<usize> {
        index(t, self.t0, self.dt, self.rates.len())
    }

    /// Sub-period of `t`, with times past the horizon mapped to the last one
    /// and earlier times to the first.
    pub fn index_clamped(&self, t: f64) -> usize {
        let j = ((t - self.t0) / self.dt).floor();
        if j < 0.0 { 0 } else { (j as usize).min(self.rates.len().saturating_sub(1)) }
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Sub-period holding `t`; half-open, so a boundary belongs to the later
/// period. `t` equal to the horizon end maps to the last period.
pub fn index(t: f64, t0: f64, dt: f64, m: usize) -> Result<usize> {
    let end = t0 + m as f64 * dt;
    if !(t >= t0 && t <= end) || m == 0 {
        return Err(Error::Range(format!("time {t} outside horizon [{t0}, {end}]")));
    }
    Ok((((t - t0) / dt).floor() as usize).min(m - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub t: f64,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitSample {
    pub t: f64,
    pub w: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaitCurve {
    pub samples: Vec<WaitSample>,
}

impl WaitCurve {
    /// Linear interpolation between samples, flat beyond either end.
    pub fn at(&self, t: f64) -> WaitSample {
        interpolate(&self.samples, t)
    }

    pub fn wait_at(&self, t: f64) -> f64 {
        self.at(t).w
    }
}

pub(crate) fn interpolate(s: &[WaitSample], t: f64) -> WaitSample {
    match s.len() {
        0 => WaitSample { t, w: 0.0, l: 0.0 },
        _ if t <= s[0].t => WaitSample { t, ..s[0] },
        n if t >= s[n - 1].t => WaitSample { t, ..s[n - 1] },
        _ => {
            let i = s.partition_point(|x| x.t <= t) - 1;
            let (a, b) = (s[i], s[i + 1]);
            let f = (t - a.t) / (b.t - a.t);
            WaitSample { t, w: a.w + f * (b.w - a.w), l: a.l + f * (b.l - a.l) }
        }
    }
}

/// Empty system.
pub fn init_state(n: usize, t0: f64) -> QueueState {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    QueueState { t: t0, p }
}

/// Distribution of Poisson arrivals during one Erlang-k service, with `rho`
/// the expected arrivals per mean service time. Truncated once the tail
/// drops below 1e-16 or at `n`.
pub fn arrival_weights(rho: f64, k: u32, n: usize) -> Result<Vec<f64>> {
    if rho <= 0.0 {
        return Ok(vec![1.0]);
    }
    let q = rho / (rho + k as f64);
    let a0 = (1.0 - q).powi(k as i32);
    if !(a0 > 0.0) {
        return Err(Error::TruncationOverflow { rho, n });
    }
    let mut w = Vec::with_capacity(32);
    let (mut a, mut cum) = (a0, 0.0);
    for r in 0..=n {
        w.push(a);
        cum += a;
        if 1.0 - cum < 1e-16 {
            break;
        }
        a *= q * (r as f64 + k as f64) / (r as f64 + 1.0);
    }
    Ok(w)
}

/// One epoch of the embedded chain.
///
/// p'_j = p_0 α(j) + Σ_{i=1}^{j+1} p_i α(j-i+1), with mass beyond N folded
/// into N, then renormalised. Only states up to the highest occupied one are
/// visited.
fn step_probs(p: &[f64], alpha: &[f64]) -> Vec<f64> {
    let n = p.len() - 1;
    let hi = p.iter().rposition(|&x| x > 0.0).unwrap_or(0);
    // tail[m] = Σ_{r >= m} α(r)
    let mut tail = vec![0.0; alpha.len() + 1];
    for r in (0..alpha.len()).rev() {
        tail[r] = tail[r + 1] + alpha[r];
    }
    let mut out = vec![0.0; n + 1];
    for i in 0..hi.max(1) {
        // one service completes: states 0 and 1 both leave an empty system
        let s = if i == 0 { p[0] + p[1] } else { p[i + 1] };
        if s == 0.0 {
            continue;
        }
        for (r, &a) in alpha.iter().enumerate().take(n - i) {
            out[i + r] += s * a;
        }
        if n - i < alpha.len() {
            out[n] += s * tail[n - i];
        }
    }
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}

/// Mean service time in minutes.
pub fn epoch_length(params: &QueueParams, dt: f64) -> f64 {
    dt / params.mu
}

/// Advance one epoch using the demand rate of the sub-period holding
/// `state.t`.
pub fn step_epoch(state: &QueueState, params: &QueueParams, demand: &DemandProfile) -> Result<QueueState> {
    if state.t >= demand.t_end() {
        return Err(Error::Range(format!("epoch {} at or past horizon end {}", state.t, demand.t_end())));
    }
    let lam = demand.rates[demand.index(state.t)?];
    let alpha = arrival_weights(lam / params.mu, params.k, params.n)?;
    Ok(QueueState { t: state.t + epoch_length(params, demand.dt), p: step_probs(&state.p, &alpha) })
}

/// L = Σ (j-1) p_j: expected number waiting.
pub fn expected_queue_length(state: &QueueState) -> f64 {
    state.p.iter().enumerate().skip(1).map(|(j, p)| (j - 1) as f64 * p).sum()
}

/// L / μ in minutes, with μ per `dt` minutes.
pub fn queueing_delay(l: f64, mu: f64, dt: f64) -> f64 {
    l * dt / mu
}

/// Expected wait of an arrival: the queue ahead plus the residual service
/// of the aircraft being served.
pub fn expected_wait(state: &QueueState, params: &QueueParams, dt: f64) -> f64 {
    let k = params.k as f64;
    let l = expected_queue_length(state);
    let busy = (1.0 - state.p[0]).max(0.0);
    queueing_delay(l, params.mu, dt) + busy * (k + 1.0) / (2.0 * k) * dt / params.mu
}

/// Engine state at an epoch boundary, resumable across sub-periods.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u64,
    pub p: Vec<f64>,
    /// Sample of the epoch before `epoch` (same epoch at the start).
    pub prev: WaitSample,
}

/// Epoch stepper for one node, used to run a horizon sub-period by
/// sub-period.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub params: QueueParams,
    pub dt: f64,
    pub t0: f64,
    tau: f64,
}

#[derive(Debug, Clone)]
pub struct Advance {
    pub samples: Vec<WaitSample>,
    pub end: Checkpoint,
    pub max_terminal: f64,
}

impl Stepper {
    /// Rejects μ below one service per sub-period: an epoch would then span
    /// several sub-periods and skip the demand of all but the first.
    pub fn new(params: QueueParams, dt: f64, t0: f64) -> Result<Self> {
        params.validate()?;
        if params.mu < 1.0 {
            return Err(Error::Param(format!("service rate {} per sub-period is below one", params.mu)));
        }
        Ok(Stepper { params, dt, t0, tau: epoch_length(&params, dt) })
    }

    pub fn epoch_time(&self, l: u64) -> f64 {
        self.t0 + l as f64 * self.tau
    }

    fn sample(&self, l: u64, p: &[f64]) -> WaitSample {
        let st = QueueState { t: self.epoch_time(l), p: p.to_vec() };
        WaitSample { t: st.t, w: expected_wait(&st, &self.params, self.dt), l: expected_queue_length(&st) }
    }

    pub fn initial(&self) -> Checkpoint {
        let p = init_state(self.params.n, self.t0).p;
        let prev = self.sample(0, &p);
        Checkpoint { epoch: 0, p, prev }
    }

    /// Step every epoch starting before `until` with arrival rate `lambda`
    /// per sub-period. The samples bracket `[start, until)`.
    pub fn advance(&self, cp: &Checkpoint, until: f64, lambda: f64) -> Result<Advance> {
        let mut samples = Vec::new();
        let first = self.sample(cp.epoch, &cp.p);
        if cp.prev.t < first.t {
            samples.push(cp.prev);
        }
        samples.push(first);
        let mut l = cp.epoch;
        let mut p = cp.p.clone();
        let mut prev = cp.prev;
        let mut max_terminal = p[self.params.n];
        if self.epoch_time(l) < until {
            let alpha = arrival_weights(lambda / self.params.mu, self.params.k, self.params.n)?;
            while self.epoch_time(l) < until {
                prev = *samples.last().unwrap();
                p = step_probs(&p, &alpha);
                l += 1;
                max_terminal = max_terminal.max(p[self.params.n]);
                samples.push(self.sample(l, &p));
            }
        }
        Ok(Advance { samples, end: Checkpoint { epoch: l, p, prev }, max_terminal })
    }
}

#[derive(Debug, Clone)]
pub struct ProfileRun {
    pub curve: WaitCurve,
    /// Largest p_N seen over the run.
    pub max_terminal: f64,
}

impl ProfileRun {
    pub fn truncation_warning(&self, bound: f64) -> bool {
        self.max_terminal > bound
    }
}

/// Default bound on terminal-state mass before a truncation warning.
pub const TERMINAL_BOUND: f64 = 1e-6;

/// Run the engine from empty over the whole horizon.
pub fn run_profile(params: &QueueParams, demand: &DemandProfile) -> Result<ProfileRun> {
    let st = Stepper::new(*params, demand.dt, demand.t0)?;
    let mut cp = st.initial();
    let mut samples: Vec<WaitSample> = vec![cp.prev];
    let mut max_terminal: f64 = 0.0;
    for (h, &lam) in demand.rates.iter().enumerate() {
        let adv = st.advance(&cp, demand.t0 + (h + 1) as f64 * demand.dt, lam)?;
        for s in adv.samples {
            if s.t > samples.last().unwrap().t {
                samples.push(s);
            }
        }
        max_terminal = max_terminal.max(adv.max_terminal);
        cp = adv.end;
    }
    Ok(ProfileRun { curve: WaitCurve { samples }, max_terminal })
}

#[derive(Debug, Clone)]
pub struct CkResult {
    pub curve: WaitCurve,
    /// Distribution of the number in system at the horizon end.
    pub customers: Vec<f64>,
}

/// Reference solution: RK4 on the forward equations of M(t)/E_k/1/N over
/// kN+1 phase states. The wait is the expected remaining work found by an
/// arrival. `step` is the requested integration step in minutes; it is
/// shortened to divide each sub-period evenly.
pub fn ck_oracle(params: &QueueParams, demand: &DemandProfile, step: f64) -> Result<CkResult> {
    params.validate()?;
    let k = params.k as usize;
    let size = k * params.n + 1;
    let kmu = params.k as f64 * params.mu / demand.dt;
    let per = (demand.dt / step).ceil().max(1.0) as usize;
    let h = demand.dt / per as f64;
    let lam_max = demand.rates.iter().copied().fold(0.0, f64::max) / demand.dt;
    if h * (lam_max + kmu) > 2.5 {
        return Err(Error::Integration(format!("step {h} too large for rates {lam_max}+{kmu}")));
    }
    let mut p = vec![0.0; size];
    p[0] = 1.0;
    let read = |p: &[f64], t: f64| {
        let mut w = 0.0;
        let mut l = 0.0;
        for (m, &x) in p.iter().enumerate() {
            w += m as f64 * x;
            let n = m.div_ceil(k);
            if n > 1 {
                l += (n - 1) as f64 * x;
            }
        }
        WaitSample { t, w: w / kmu, l }
    };
    let deriv = |p: &[f64], lam: f64, out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for m in 0..size {
            let x = p[m];
            if x == 0.0 {
                continue;
            }
            if m + k < size {
                out[m] -= lam * x;
                out[m + k] += lam * x;
            }
            if m >= 1 {
                out[m] -= kmu * x;
                out[m - 1] += kmu * x;
            }
        }
    };
    let mut samples = vec![read(&p, demand.t0)];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; size], vec![0.0; size], vec![0.0; size], vec![0.0; size], vec![0.0; size]);
    for (j, &rate) in demand.rates.iter().enumerate() {
        let lam = rate / demand.dt;
        for s in 0..per {
            deriv(&p, lam, &mut k1);
            for i in 0..size {
                tmp[i] = p[i] + 0.5 * h * k1[i];
            }
            deriv(&tmp, lam, &mut k2);
            for i in 0..size {
                tmp[i] = p[i] + 0.5 * h * k2[i];
            }
            deriv(&tmp, lam, &mut k3);
            for i in 0..size {
                tmp[i] = p[i] + h * k3[i];
            }
            deriv(&tmp, lam, &mut k4);
            for i in 0..size {
                p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let t = demand.t0 + j as f64 * demand.dt + (s + 1) as f64 * h;
            samples.push(read(&p, t));
        }
    }
    let mut customers = vec![0.0; params.n + 1];
    for (m, &x) in p.iter().enumerate() {
        customers[m.div_ceil(k)] += x;
    }
    Ok(CkResult { curve: WaitCurve { samples }, customers })
}
