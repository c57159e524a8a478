use crate::error::{Error, Result};
use crate::point_process::{HawkesModel, ProcessState};

/// Opinion dynamics driven by opinion-posting events:
///
/// ```text
/// dx_i = (b_i - x_i) dt + beta dw_i + sum_j A_ij x_j(t-) dN_j(t)
/// ```
///
/// `influence[i * M + j]` is the weight with which a post by `j` moves `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionModel {
    baseline: Vec<f64>,
    beta: f64,
    influence: Vec<f64>,
    columns: Vec<Vec<(usize, f64)>>,
}

impl OpinionModel {
    pub fn new(baseline: Vec<f64>, beta: f64, influence: Vec<f64>) -> Result<Self> {
        let m = baseline.len();
        if m == 0 {
            return Err(Error::invalid("opinion model needs at least one user"));
        }
        if influence.len() != m * m {
            return Err(Error::invalid(format!(
                "influence matrix has {} entries, expected {}",
                influence.len(),
                m * m
            )));
        }
        if baseline.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("baseline opinions must be finite"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!("diffusion beta = {beta} must be >= 0")));
        }
        if influence.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("influence weights must be finite and >= 0"));
        }
        let mut columns = vec![Vec::new(); m];
        for i in 0..m {
            for (j, col) in columns.iter_mut().enumerate() {
                let a = influence[i * m + j];
                if a > 0.0 {
                    col.push((i, a));
                }
            }
        }
        Ok(Self {
            baseline,
            beta,
            influence,
            columns,
        })
    }

    pub fn users(&self) -> usize {
        self.baseline.len()
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn influence(&self, i: usize, j: usize) -> f64 {
        self.influence[i * self.users() + j]
    }

    pub(crate) fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }
}

/// Rank of one broadcaster's latest post in each follower's feed:
///
/// ```text
/// dx_j = dN_o^j(t) - (x_j(t) - 1) dN_b(t)
/// ```
///
/// Competitor posts push the broadcaster down one place; the broadcaster's
/// own post puts it back on top. Process dimensions `0..F` are the
/// competitor streams of the `F` feeds (self-exciting, shared decay) and
/// dimension `F` is the broadcaster (Poisson).
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastModel {
    broadcaster_rate: f64,
    competitor_mu: Vec<f64>,
    competitor_alpha: Vec<f64>,
    omega: f64,
    initial_rank: f64,
}

impl BroadcastModel {
    pub fn new(broadcaster_rate: f64, competitor_mu: Vec<f64>, competitor_alpha: Vec<f64>, omega: f64) -> Result<Self> {
        if competitor_mu.is_empty() {
            return Err(Error::invalid("broadcast model needs at least one follower"));
        }
        if competitor_alpha.len() != competitor_mu.len() {
            return Err(Error::invalid("one competitor excitation per follower feed"));
        }
        if !(broadcaster_rate.is_finite() && broadcaster_rate >= 0.0) {
            return Err(Error::invalid(format!(
                "broadcaster rate {broadcaster_rate} must be >= 0"
            )));
        }
        if competitor_mu
            .iter()
            .chain(&competitor_alpha)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::invalid("competitor rates must be finite and >= 0"));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::invalid(format!("competitor decay {omega} must be > 0")));
        }
        Ok(Self {
            broadcaster_rate,
            competitor_mu,
            competitor_alpha,
            omega,
            initial_rank: 1.0,
        })
    }

    /// `F` feeds sharing one competitor model.
    pub fn uniform(followers: usize, broadcaster_rate: f64, mu: f64, alpha: f64, omega: f64) -> Result<Self> {
        Self::new(broadcaster_rate, vec![mu; followers], vec![alpha; followers], omega)
    }

    pub fn with_initial_rank(mut self, rank: f64) -> Result<Self> {
        if !(rank >= 1.0 && rank.fract() == 0.0 && rank.is_finite()) {
            return Err(Error::invalid(format!("initial rank {rank} must be an integer >= 1")));
        }
        self.initial_rank = rank;
        Ok(self)
    }

    pub fn followers(&self) -> usize {
        self.competitor_mu.len()
    }

    pub fn broadcaster_rate(&self) -> f64 {
        self.broadcaster_rate
    }

    pub fn broadcaster_dim(&self) -> usize {
        self.followers()
    }

    pub fn competitor_mu(&self) -> &[f64] {
        &self.competitor_mu
    }

    pub fn competitor_alpha(&self) -> &[f64] {
        &self.competitor_alpha
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn initial_rank(&self) -> f64 {
        self.initial_rank
    }

    /// The joint `(F + 1)`-dimensional event process.
    pub fn process(&self) -> Result<HawkesModel> {
        let f = self.followers();
        let d = f + 1;
        let mut mu = self.competitor_mu.clone();
        mu.push(self.broadcaster_rate);
        let mut alpha = vec![0.0; d * d];
        for (j, a) in self.competitor_alpha.iter().enumerate() {
            alpha[j * d + j] = *a;
        }
        HawkesModel::new(mu, alpha, self.omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Opinion(OpinionModel),
    Broadcast(BroadcastModel),
    /// `x_i = N_i(t)`: the state counts events, with no drift or noise.
    Counting,
}

/// Dynamics paired with the point process that drives them.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    dynamics: Dynamics,
    process: HawkesModel,
    controllable: Vec<bool>,
}

impl System {
    pub fn opinion(model: OpinionModel, process: HawkesModel) -> Result<Self> {
        if model.users() != process.dims() {
            return Err(Error::invalid(format!(
                "opinion model has {} users, point process has {} dimensions",
                model.users(),
                process.dims()
            )));
        }
        let controllable = vec![true; process.dims()];
        Ok(Self {
            dynamics: Dynamics::Opinion(model),
            process,
            controllable,
        })
    }

    pub fn broadcast(model: BroadcastModel) -> Result<Self> {
        let process = model.process()?;
        let mut controllable = vec![false; process.dims()];
        controllable[model.broadcaster_dim()] = true;
        Ok(Self {
            dynamics: Dynamics::Broadcast(model),
            process,
            controllable,
        })
    }

    pub fn counting(process: HawkesModel) -> Self {
        let controllable = vec![true; process.dims()];
        Self {
            dynamics: Dynamics::Counting,
            process,
            controllable,
        }
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn process(&self) -> &HawkesModel {
        &self.process
    }

    /// Event dimensions whose intensity the controller may change.
    pub fn controllable(&self) -> &[bool] {
        &self.controllable
    }

    pub fn state_dims(&self) -> usize {
        match &self.dynamics {
            Dynamics::Opinion(m) => m.users(),
            Dynamics::Broadcast(m) => m.followers(),
            Dynamics::Counting => self.process.dims(),
        }
    }

    pub fn has_noise(&self) -> bool {
        matches!(&self.dynamics, Dynamics::Opinion(m) if m.beta() > 0.0)
    }

    /// Default starting state at `time`: the given opinion level for every
    /// user, the initial rank for broadcast, zero counts.
    pub fn initial_state(&self, level: f64, time: f64) -> StartState {
        let x = match &self.dynamics {
            Dynamics::Opinion(m) => vec![level; m.users()],
            Dynamics::Broadcast(m) => vec![m.initial_rank(); m.followers()],
            Dynamics::Counting => vec![0.0; self.process.dims()],
        };
        StartState {
            x,
            process: ProcessState::quiet(&self.process, time),
        }
    }

    /// Jump applied at an event of process dimension `dim`, using the
    /// pre-jump state.
    #[inline]
    pub(crate) fn apply_jump(&self, x: &mut [f64], dim: usize) {
        match &self.dynamics {
            Dynamics::Opinion(m) => {
                let source = x[dim];
                for &(i, a) in m.column(dim) {
                    x[i] += a * source;
                }
            }
            Dynamics::Broadcast(m) => {
                if dim == m.broadcaster_dim() {
                    x.fill(1.0);
                } else {
                    x[dim] += 1.0;
                }
            }
            Dynamics::Counting => x[dim] += 1.0,
        }
    }

    /// One Euler-Maruyama substep of length `h` with standard normal draws
    /// `z`; writes the Wiener increments into `dw`.
    #[inline]
    pub(crate) fn euler_step(&self, x: &mut [f64], h: f64, z: &[f64], dw: &mut [f64]) {
        if let Dynamics::Opinion(m) = &self.dynamics {
            let sh = h.sqrt();
            let beta = m.beta();
            if beta > 0.0 {
                for (((xi, &b), &zi), w) in x.iter_mut().zip(m.baseline()).zip(z).zip(dw.iter_mut()) {
                    *w = sh * zi;
                    *xi += (b - *xi) * h + beta * *w;
                }
            } else {
                for (xi, &b) in x.iter_mut().zip(m.baseline()) {
                    *xi += (b - *xi) * h;
                }
            }
        }
    }
}

/// Where a simulation starts: the state vector and the point-process
/// history summary at the start time.
#[derive(Debug, Clone, PartialEq)]
pub struct StartState {
    pub x: Vec<f64>,
    pub process: ProcessState,
}

impl StartState {
    pub fn time(&self) -> f64 {
        self.process.time()
    }
}
