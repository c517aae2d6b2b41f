//! Causal PINN training loop.
//!
//! Every iteration evaluates the residual jets on the current collocation
//! set, forms per-slice losses and their causal weights (treated as
//! constants), and takes one Adam step on
//! `lambda_ic * L_ic + lambda_res * (1/N_t) sum_i w_i L_i`.
//! The epsilon schedule is walked in equal-length stages and the collocation
//! set is redrawn at a fixed interval according to the sampler kind.
//!
//! Slices that hold no training points get their loss from a fixed probe set
//! (an LHS draw per slice made once per run). Probe losses feed the weights
//! and the resampling ratios but are never differentiated.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::causal::{causal_weights, SubdomainPartition};
use crate::diffnet::jet::{convert_params, JetWorkspace};
use crate::diffnet::{
    adam_step, init_params, AdamState, Channels, DerivativeLabel, MlpArchitecture, Objective, ParameterVector,
    Precision, Real,
};
use crate::embed::{PeriodicEmbedding, SpatialEncoding};
use crate::pde::{LossBreakdown, PdeProblem, PointJet, ResidualTerms};
use crate::refsolver::{periodic_grid, snapshot_times, ReferenceSolution};
use crate::sampler::{
    adaptive_ratio, allocate_counts, causal_ratio, lhs_sample, sample_with_counts, uniform_set, CollocationSet, Rect,
    SamplerKind,
};
use crate::{Error, Result};

/// Everything that defines one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub problem: PdeProblem,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Fourier harmonics `m` of the spatial embedding.
    pub harmonics: usize,
    pub n_r: usize,
    pub n_t: usize,
    pub epsilon_schedule: Vec<f64>,
    pub total_iterations: usize,
    pub resample_interval: usize,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub log_interval: usize,
    /// Equispaced initial-condition points on `[x_lo, x_hi)`.
    pub n_ic: usize,
    pub probes_per_slice: usize,
    pub learning_rate: f64,
    pub precision: Precision,
    pub eval_nx: usize,
    pub eval_nt: usize,
}

pub const DEFAULT_EPSILON_SCHEDULE: [f64; 5] = [1e-2, 1e-1, 1.0, 1e1, 1e2];

impl TrainConfig {
    /// Defaults for `problem`: 4x128 network, `m = 10`, 1000 points in 20
    /// slices, 10^5 iterations.
    pub fn new(problem: PdeProblem) -> Self {
        Self {
            problem,
            hidden_layers: 4,
            hidden_width: 128,
            harmonics: 10,
            n_r: 1000,
            n_t: 20,
            epsilon_schedule: DEFAULT_EPSILON_SCHEDULE.to_vec(),
            total_iterations: 100_000,
            resample_interval: 1000,
            sampler: SamplerKind::AdaptiveCausal,
            seed: 0,
            log_interval: 100,
            n_ic: 256,
            probes_per_slice: 64,
            learning_rate: 1e-3,
            precision: Precision::F64,
            eval_nx: 256,
            eval_nt: 101,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.hidden_layers == 0 || self.hidden_width == 0 || self.harmonics == 0 {
            return bad("network needs at least one hidden layer and one harmonic");
        }
        if self.n_r == 0 || self.n_t == 0 || self.n_ic == 0 || self.probes_per_slice == 0 {
            return bad("N_r, N_t, n_ic and probes_per_slice must be positive");
        }
        if self.epsilon_schedule.is_empty() || self.epsilon_schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("epsilon schedule must be a non-empty list of positive values");
        }
        if self.total_iterations % self.epsilon_schedule.len() != 0 {
            return bad("total_iterations must be divisible by the epsilon schedule length");
        }
        if self.log_interval == 0 || self.resample_interval == 0 {
            return bad("log and resample intervals must be positive");
        }
        let stage = self.stage_length();
        if stage > 0 && stage % self.resample_interval != 0 {
            return bad("resample_interval must divide the per-stage iteration count");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }

    pub fn stage_length(&self) -> usize {
        self.total_iterations / self.epsilon_schedule.len().max(1)
    }

    /// Epsilon in force at `iteration`.
    pub fn epsilon_at(&self, iteration: usize) -> f64 {
        let stage = iteration / self.stage_length().max(1);
        self.epsilon_schedule[stage.min(self.epsilon_schedule.len() - 1)]
    }

    pub fn model(&self) -> Result<PinnModel> {
        PinnModel::new(&self.problem, self.hidden_layers, self.hidden_width, self.harmonics)
    }
}

/// Network shape and input encoding for one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnModel {
    pub arch: MlpArchitecture,
    pub encoding: SpatialEncoding,
}

impl PinnModel {
    pub fn new(problem: &PdeProblem, hidden_layers: usize, hidden_width: usize, harmonics: usize) -> Result<Self> {
        let encoding = SpatialEncoding::Periodic(PeriodicEmbedding::new(harmonics, problem.period())?);
        let arch = MlpArchitecture::uniform(
            encoding.network_input_width(),
            hidden_layers,
            hidden_width,
            problem.output_width(),
        )?;
        Ok(Self { arch, encoding })
    }

    /// `u` at each `(t, x)`.
    pub fn predict(&self, params: &ParameterVector, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        params.check(&self.arch)?;
        let mut ws = JetWorkspace::<f64>::new();
        ws.evaluate(&self.arch, params.as_slice(), &self.encoding, points, Channels::VALUE);
        Ok((0..points.len()).map(|p| ws.get(0, p, 0)).collect())
    }
}

/// Wall-clock source and progress hook. The core crate has no clock of its own.
pub trait TrainMonitor {
    /// Seconds since some fixed origin.
    fn now(&mut self) -> f64 {
        0.0
    }

    fn on_record(&mut self, _record: &TrainRecord) {}
}

/// A monitor that reports zero time and ignores progress.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoMonitor;

impl TrainMonitor for NoMonitor {}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub epsilon: f64,
    pub breakdown: LossBreakdown,
    pub weights: Vec<f64>,
    pub collocation_fingerprint: u64,
    pub wall_clock: f64,
}

/// One redraw of the collocation set (iteration 0 is the initial draw).
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleEvent {
    pub iteration: usize,
    pub epsilon: f64,
    /// Probe-set slice losses the ratios were computed from (empty for
    /// draws that do not look at losses).
    pub slice_losses: Vec<f64>,
    pub weights: Vec<f64>,
    pub ratios: Option<Vec<f64>>,
    pub degenerate: bool,
    pub counts: Vec<usize>,
    pub time_centroid: f64,
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
    pub resample_events: Vec<ResampleEvent>,
    /// Loss at the final parameters.
    pub final_breakdown: Option<LossBreakdown>,
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub initial_params: ParameterVector,
    pub params: ParameterVector,
    pub history: TrainHistory,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for purpose `tag` and occurrence `index` of a run.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ tag) ^ index)
}

const TAG_INIT: u64 = 1;
const TAG_COLLOCATION: u64 = 2;
const TAG_PROBES: u64 = 3;

/// Probe points per slice, drawn once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    slices: Vec<Vec<(f64, f64)>>,
}

impl ProbeSet {
    pub fn new(partition: &SubdomainPartition, x_bounds: (f64, f64), per_slice: usize, seed: u64) -> Result<Self> {
        let slices = (0..partition.len())
            .map(|i| {
                let rect = Rect::new(partition.interval(i), x_bounds)?;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_PROBES, 0));
                rng.set_stream(i as u64);
                Ok(lhs_sample(per_slice, &rect, &mut rng))
            })
            .collect::<Result<_>>()?;
        Ok(Self { slices })
    }

    pub fn slice(&self, i: usize) -> &[(f64, f64)] {
        &self.slices[i]
    }
}

/// Where the loss of an empty slice comes from.
#[derive(Debug, Clone, Copy)]
pub enum ProbeMode<'a> {
    /// Evaluate probes for every slice.
    All,
    /// Evaluate probes only for empty slices that precede a populated one,
    /// the only ones that influence the gradient through the weights.
    Needed,
    /// Use fixed per-slice `[mean r1^2, mean r2^2]` values.
    Frozen(&'a [[f64; 2]]),
}

#[derive(Debug, Clone, Copy)]
pub enum WeightMode<'a> {
    Causal(f64),
    Frozen(&'a [f64]),
}

/// Loss evaluation result of one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub breakdown: LossBreakdown,
    pub weights: Vec<f64>,
    /// `[mean r1^2, mean r2^2]` per slice (probe values for empty slices).
    pub slice_stats: Vec<[f64; 2]>,
    pub probed: Vec<bool>,
}

struct JetLayout {
    u: (usize, usize),
    u_t: Option<(usize, usize)>,
    u_x: Option<(usize, usize)>,
    u_xx: Option<(usize, usize)>,
    u_xxx: Option<(usize, usize)>,
    mu: Option<(usize, usize)>,
    mu_xx: Option<(usize, usize)>,
}

impl JetLayout {
    fn new(problem: &PdeProblem) -> Self {
        let req = problem.required_derivatives();
        let ch = problem.channels();
        let loc = |l: DerivativeLabel| req.contains(l).then(|| l.location(ch));
        Self {
            u: DerivativeLabel::U.location(ch),
            u_t: loc(DerivativeLabel::Ut),
            u_x: loc(DerivativeLabel::Ux),
            u_xx: loc(DerivativeLabel::Uxx),
            u_xxx: loc(DerivativeLabel::Uxxx),
            mu: loc(DerivativeLabel::Mu),
            mu_xx: loc(DerivativeLabel::MuXx),
        }
    }

    fn read<R: Real>(&self, ws: &JetWorkspace<R>, p: usize) -> PointJet {
        let get = |l: Option<(usize, usize)>| l.map_or(0.0, |(o, c)| ws.get(c, p, o));
        PointJet {
            u: get(Some(self.u)),
            u_t: get(self.u_t),
            u_x: get(self.u_x),
            u_xx: get(self.u_xx),
            u_xxx: get(self.u_xxx),
            mu: get(self.mu),
            mu_xx: get(self.mu_xx),
        }
    }

    fn scatter(&self, g: &mut [f64], batch: usize, width: usize, p: usize, adj: &PointJet) {
        let mut put = |l: Option<(usize, usize)>, v: f64| {
            if let Some((o, c)) = l {
                g[(c * batch + p) * width + o] += v;
            }
        };
        put(Some(self.u), adj.u);
        put(self.u_t, adj.u_t);
        put(self.u_x, adj.u_x);
        put(self.u_xx, adj.u_xx);
        put(self.u_xxx, adj.u_xxx);
        put(self.mu, adj.mu);
        put(self.mu_xx, adj.mu_xx);
    }
}

/// Loss and gradient machinery for one problem and model, generic over the
/// kernel precision.
pub(crate) struct LossEngine<R> {
    problem: PdeProblem,
    model: PinnModel,
    channels: Channels,
    layout: JetLayout,
    /// Per-point weights of `r1^2` and `r2^2` in a slice loss.
    mix: [f64; 2],
    ic_points: Vec<(f64, f64)>,
    ic_targets: Vec<f64>,
    col: JetWorkspace<R>,
    probe: JetWorkspace<R>,
    ic: JetWorkspace<R>,
    residuals: Vec<[f64; 2]>,
    g: Vec<f64>,
}

impl<R: Real> LossEngine<R> {
    pub(crate) fn new(problem: &PdeProblem, model: &PinnModel, n_ic: usize) -> Self {
        let xs = periodic_grid(problem.x_lo, problem.x_hi, n_ic);
        let mix = if problem.residual_arity() == 2 {
            [problem.weights.res1, problem.weights.res2]
        } else {
            [1.0, 0.0]
        };
        Self {
            problem: problem.clone(),
            model: model.clone(),
            channels: problem.channels(),
            layout: JetLayout::new(problem),
            mix,
            ic_targets: xs.iter().map(|&x| problem.initial.eval(x)).collect(),
            ic_points: xs.into_iter().map(|x| (0.0, x)).collect(),
            col: JetWorkspace::new(),
            probe: JetWorkspace::new(),
            ic: JetWorkspace::new(),
            residuals: Vec::new(),
            g: Vec::new(),
        }
    }

    /// `[mean r1^2, mean r2^2]` over the probes of each listed slice.
    pub(crate) fn probe_stats(&mut self, params: &[R], probes: &ProbeSet, slices: &[usize]) -> Vec<[f64; 2]> {
        if slices.is_empty() {
            return Vec::new();
        }
        let mut points = Vec::new();
        for &i in slices {
            points.extend_from_slice(probes.slice(i));
        }
        self.probe.evaluate(&self.model.arch, params, &self.model.encoding, &points, self.channels);
        let kind = self.problem.kind;
        let mut out = Vec::with_capacity(slices.len());
        let mut p = 0;
        for &i in slices {
            let n = probes.slice(i).len();
            let mut acc = [0.0; 2];
            for q in p..p + n {
                let r = kind.residuals(&self.layout.read(&self.probe, q));
                acc[0] += r[0] * r[0];
                acc[1] += r[1] * r[1];
            }
            out.push([acc[0] / n as f64, acc[1] / n as f64]);
            p += n;
        }
        out
    }

    /// Loss at `params` on `set`; adds the gradient into `grad` when given.
    pub(crate) fn evaluate(
        &mut self,
        params: &[R],
        set: &CollocationSet,
        partition: &SubdomainPartition,
        probes: &ProbeSet,
        probe_mode: ProbeMode<'_>,
        weight_mode: WeightMode<'_>,
        grad: Option<&mut [f64]>,
    ) -> Result<LossEvaluation> {
        let n_t = partition.len();
        let arch = &self.model.arch.clone();
        let kind = self.problem.kind;
        let lw = self.problem.weights;

        self.col.evaluate(arch, params, &self.model.encoding, &set.points, self.channels);
        self.residuals.clear();
        let mut sums = vec![[0.0f64; 2]; n_t];
        let mut counts = vec![0usize; n_t];
        for (p, &s) in set.slice_index.iter().enumerate() {
            let r = kind.residuals(&self.layout.read(&self.col, p));
            sums[s][0] += r[0] * r[0];
            sums[s][1] += r[1] * r[1];
            counts[s] += 1;
            self.residuals.push(r);
        }

        let last_populated = counts.iter().rposition(|&c| c > 0);
        let probe_slices: Vec<usize> = match probe_mode {
            ProbeMode::All => (0..n_t).filter(|&i| counts[i] == 0).collect(),
            ProbeMode::Needed => (0..last_populated.unwrap_or(0)).filter(|&i| counts[i] == 0).collect(),
            ProbeMode::Frozen(_) => Vec::new(),
        };
        let probe_values = self.probe_stats(params, probes, &probe_slices);
        let mut stats = vec![[0.0f64; 2]; n_t];
        let mut probed = vec![false; n_t];
        for i in 0..n_t {
            if counts[i] > 0 {
                stats[i] = [sums[i][0] / counts[i] as f64, sums[i][1] / counts[i] as f64];
            } else if let ProbeMode::Frozen(frozen) = probe_mode {
                stats[i] = frozen[i];
                probed[i] = true;
            }
        }
        for (&i, v) in probe_slices.iter().zip(&probe_values) {
            stats[i] = *v;
            probed[i] = true;
        }
        // In `Needed` mode trailing empty slices stay at zero; nothing after
        // them carries a gradient.
        let losses: Vec<f64> = stats.iter().map(|s| self.mix[0] * s[0] + self.mix[1] * s[1]).collect();
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("slice losses"));
        }
        let weights = match weight_mode {
            WeightMode::Causal(eps) => causal_weights(&losses, eps)?.weights,
            WeightMode::Frozen(w) => {
                if w.len() != n_t {
                    return Err(Error::DimensionMismatch {
                        context: "frozen weights",
                        expected: n_t,
                        found: w.len(),
                    });
                }
                w.to_vec()
            }
        };

        let inv_nt = 1.0 / n_t as f64;
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for i in 0..n_t {
            l1 += weights[i] * stats[i][0];
            l2 += weights[i] * stats[i][1];
        }
        l1 *= inv_nt;
        l2 *= inv_nt;

        self.ic.evaluate(arch, params, &self.model.encoding, &self.ic_points, Channels::VALUE);
        let n_ic = self.ic_points.len();
        let mut l_ic = 0.0;
        for (p, g) in self.ic_targets.iter().enumerate() {
            let d = self.ic.get(0, p, 0) - g;
            l_ic += d * d;
        }
        l_ic /= n_ic as f64;

        let terms = if self.problem.residual_arity() == 2 {
            ResidualTerms::Split { l_res1: l1, l_res2: l2 }
        } else {
            ResidualTerms::Single(l1)
        };
        let breakdown = self.problem.total_loss(l_ic, terms, losses);

        if let Some(grad) = grad {
            let batch = set.points.len();
            let width = arch.output_width();
            self.g.clear();
            self.g.resize(self.channels.count() * batch * width, 0.0);
            for (p, &s) in set.slice_index.iter().enumerate() {
                if weights[s] < R::NEGLIGIBLE {
                    continue;
                }
                let coef = 2.0 * lw.res * weights[s] * inv_nt / counts[s] as f64;
                let r = self.residuals[p];
                let seed = [coef * self.mix[0] * r[0], coef * self.mix[1] * r[1]];
                let jet = self.layout.read(&self.col, p);
                let adj = kind.residual_adjoint(&jet, seed);
                self.layout.scatter(&mut self.g, batch, width, p, &adj);
            }
            self.col.backward(arch, params, &self.g, grad);

            self.g.clear();
            self.g.resize(n_ic * width, 0.0);
            let c = 2.0 * lw.ic / n_ic as f64;
            for (p, g) in self.ic_targets.iter().enumerate() {
                self.g[p * width] = c * (self.ic.get(0, p, 0) - g);
            }
            self.ic.backward(arch, params, &self.g, grad);
        }

        Ok(LossEvaluation {
            breakdown,
            weights,
            slice_stats: stats,
            probed,
        })
    }
}

/// The training loss as an [`Objective`] with the collocation set, probe
/// values and (optionally) weights held fixed. Used for gradient checks.
pub struct PinnObjective {
    engine: RefCell<LossEngine<f64>>,
    set: CollocationSet,
    partition: SubdomainPartition,
    probes: ProbeSet,
    frozen_probes: Vec<[f64; 2]>,
    weights: Option<Vec<f64>>,
    epsilon: f64,
    param_count: usize,
}

impl PinnObjective {
    /// Builds the objective for `config`'s problem on `set`. Probe values for
    /// empty slices are computed at `params` and then held fixed. With
    /// `freeze_weights`, the causal weights at `params` are held fixed too.
    pub fn new(
        config: &TrainConfig,
        set: CollocationSet,
        params: &ParameterVector,
        epsilon: f64,
        freeze_weights: bool,
    ) -> Result<Self> {
        config.validate()?;
        let model = config.model()?;
        params.check(&model.arch)?;
        let partition = SubdomainPartition::new(config.problem.horizon, config.n_t)?;
        set.validate(&partition, (config.problem.x_lo, config.problem.x_hi))?;
        let probes = ProbeSet::new(&partition, (config.problem.x_lo, config.problem.x_hi), config.probes_per_slice, config.seed)?;
        let mut engine = LossEngine::<f64>::new(&config.problem, &model, config.n_ic);
        let all: Vec<usize> = (0..config.n_t).collect();
        let frozen_probes = engine.probe_stats(params.as_slice(), &probes, &all);
        let mut obj = Self {
            param_count: model.arch.param_count(),
            engine: RefCell::new(engine),
            set,
            partition,
            probes,
            frozen_probes,
            weights: None,
            epsilon,
        };
        if freeze_weights {
            obj.weights = Some(obj.evaluation(params.as_slice())?.weights);
        }
        Ok(obj)
    }

    pub fn evaluation(&self, params: &[f64]) -> Result<LossEvaluation> {
        self.run(params, None)
    }

    fn run(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<LossEvaluation> {
        let weights = match &self.weights {
            Some(w) => WeightMode::Frozen(w),
            None => WeightMode::Causal(self.epsilon),
        };
        self.engine.borrow_mut().evaluate(
            params,
            &self.set,
            &self.partition,
            &self.probes,
            ProbeMode::Frozen(&self.frozen_probes),
            weights,
            grad,
        )
    }
}

impl Objective for PinnObjective {
    fn param_count(&self) -> usize {
        self.param_count
    }

    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        Ok(self.run(params, grad)?.breakdown.total)
    }
}

/// Trains with a silent monitor.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_monitor(config, &mut NoMonitor)
}

pub fn train_with_monitor(config: &TrainConfig, monitor: &mut dyn TrainMonitor) -> Result<TrainOutcome> {
    config.validate()?;
    match config.precision {
        Precision::F64 => run_training::<f64>(config, monitor),
        Precision::F32 => run_training::<f32>(config, monitor),
    }
}

fn run_training<R: Real>(config: &TrainConfig, monitor: &mut dyn TrainMonitor) -> Result<TrainOutcome> {
    let started = monitor.now();
    let problem = &config.problem;
    let model = config.model()?;
    let x_bounds = (problem.x_lo, problem.x_hi);
    let partition = SubdomainPartition::new(problem.horizon, config.n_t)?;
    let probes = ProbeSet::new(&partition, x_bounds, config.probes_per_slice, config.seed)?;
    let mut engine = LossEngine::<R>::new(problem, &model, config.n_ic);

    let initial_params = init_params(&model.arch, derive_seed(config.seed, TAG_INIT, 0));
    let mut params = initial_params.clone().into_vec();
    let mut params_r: Vec<R> = convert_params(&params);
    let mut adam = AdamState::with_learning_rate(params.len(), config.learning_rate);
    let mut grad = vec![0.0; params.len()];

    let mut set = uniform_set(config.n_r, &partition, x_bounds, derive_seed(config.seed, TAG_COLLOCATION, 0))?;
    let mut history = TrainHistory::default();
    history.resample_events.push(ResampleEvent {
        iteration: 0,
        epsilon: config.epsilon_schedule[0],
        slice_losses: Vec::new(),
        weights: Vec::new(),
        ratios: None,
        degenerate: false,
        counts: set.counts.clone(),
        time_centroid: set.time_centroid(),
        fingerprint: set.fingerprint(),
    });

    let all_slices: Vec<usize> = (0..config.n_t).collect();
    for n in 0..config.total_iterations {
        let eps = config.epsilon_at(n);
        if config.sampler.resamples_at(n, config.resample_interval) {
            let seed = derive_seed(config.seed, TAG_COLLOCATION, n as u64);
            let event = match config.sampler {
                SamplerKind::Dynamic => {
                    set = uniform_set(config.n_r, &partition, x_bounds, seed)?;
                    ResampleEvent {
                        iteration: n,
                        epsilon: eps,
                        slice_losses: Vec::new(),
                        weights: Vec::new(),
                        ratios: None,
                        degenerate: false,
                        counts: set.counts.clone(),
                        time_centroid: set.time_centroid(),
                        fingerprint: set.fingerprint(),
                    }
                }
                kind => {
                    let stats = engine.probe_stats(&params_r, &probes, &all_slices);
                    let losses: Vec<f64> = stats.iter().map(|s| engine.mix[0] * s[0] + engine.mix[1] * s[1]).collect();
                    if losses.iter().any(|l| !l.is_finite()) {
                        return Err(Error::Diverged {
                            iteration: n,
                            detail: "non-finite probe loss at resampling".into(),
                        });
                    }
                    let weights = causal_weights(&losses, eps)?.weights;
                    let outcome = if kind == SamplerKind::Adaptive {
                        adaptive_ratio(&losses)?
                    } else {
                        causal_ratio(&losses, &weights)?
                    };
                    let counts = allocate_counts(config.n_r, &outcome.ratios)?;
                    set = sample_with_counts(&counts, &partition, x_bounds, seed)?;
                    ResampleEvent {
                        iteration: n,
                        epsilon: eps,
                        slice_losses: losses,
                        weights,
                        ratios: Some(outcome.ratios),
                        degenerate: outcome.degenerate,
                        counts,
                        time_centroid: set.time_centroid(),
                        fingerprint: set.fingerprint(),
                    }
                }
            };
            history.resample_events.push(event);
        }

        let logging = n % config.log_interval == 0;
        let mode = if logging { ProbeMode::All } else { ProbeMode::Needed };
        grad.fill(0.0);
        let eval = engine.evaluate(&params_r, &set, &partition, &probes, mode, WeightMode::Causal(eps), Some(&mut grad));
        let eval = match eval {
            Ok(e) if e.breakdown.total.is_finite() => e,
            Ok(e) => return Err(diverged(n, &e.breakdown)),
            Err(Error::NonFinite(what)) => {
                return Err(Error::Diverged {
                    iteration: n,
                    detail: format!("non-finite {what}"),
                })
            }
            Err(e) => return Err(e),
        };
        if logging {
            let record = TrainRecord {
                iteration: n,
                epsilon: eps,
                breakdown: eval.breakdown,
                weights: eval.weights,
                collocation_fingerprint: set.fingerprint(),
                wall_clock: monitor.now() - started,
            };
            monitor.on_record(&record);
            history.records.push(record);
        }
        adam_step(&mut adam, &mut params, &grad).map_err(|e| Error::Diverged {
            iteration: n,
            detail: format!("{e}"),
        })?;
        for (dst, &src) in params_r.iter_mut().zip(&params) {
            *dst = R::from_f64(src);
        }
    }

    let last_eps = config.epsilon_at(config.total_iterations.saturating_sub(1));
    let final_eval = engine.evaluate(&params_r, &set, &partition, &probes, ProbeMode::All, WeightMode::Causal(last_eps), None)?;
    history.final_breakdown = Some(final_eval.breakdown);
    history.wall_clock = monitor.now() - started;
    Ok(TrainOutcome {
        initial_params,
        params: ParameterVector::from_vec(params)?,
        history,
    })
}

fn diverged(iteration: usize, b: &LossBreakdown) -> Error {
    Error::Diverged {
        iteration,
        detail: format!("non-finite loss (l_ic = {}, l_res = {})", b.l_ic, b.l_res),
    }
}

/// `||pred - reference||_2 / ||reference||_2`.
pub fn relative_l2(prediction: &[f64], reference: &[f64]) -> Result<f64> {
    if prediction.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            context: "relative L2 grids",
            expected: reference.len(),
            found: prediction.len(),
        });
    }
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if den == 0.0 {
        return Err(Error::InvalidArgument("reference has zero norm".into()));
    }
    let num: f64 = prediction.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum();
    Ok(crate::math::sqrt(num / den))
}

/// Reference sampled on an `eval_nx x eval_nt` grid, using every
/// `n_x / eval_nx`-th spatial point and snapshots as stored.
fn evaluation_grid(reference: &ReferenceSolution, eval_nx: usize) -> Result<(Vec<(f64, f64)>, Vec<f64>)> {
    if eval_nx == 0 || reference.n_x() % eval_nx != 0 {
        return Err(Error::InvalidArgument(format!(
            "reference N_x = {} is not a multiple of the evaluation N_x = {eval_nx}",
            reference.n_x()
        )));
    }
    let stride = reference.n_x() / eval_nx;
    let mut points = Vec::with_capacity(eval_nx * reference.n_snap());
    let mut values = Vec::with_capacity(points.capacity());
    for (s, &t) in reference.t.iter().enumerate() {
        for j in (0..reference.n_x()).step_by(stride) {
            points.push((t, reference.x[j]));
            values.push(reference.value(s, j));
        }
    }
    Ok((points, values))
}

/// Relative L2 error of the network `u` against `reference`.
pub fn evaluate_against_reference(
    model: &PinnModel,
    params: &ParameterVector,
    reference: &ReferenceSolution,
    eval_nx: usize,
) -> Result<f64> {
    let (points, values) = evaluation_grid(reference, eval_nx)?;
    relative_l2(&model.predict(params, &points)?, &values)
}

/// Closed-form solution on the evaluation grid, when the problem has one.
pub fn analytic_reference(problem: &PdeProblem, n_x: usize, n_snap: usize) -> Option<ReferenceSolution> {
    let x = periodic_grid(problem.x_lo, problem.x_hi, n_x);
    let t = snapshot_times(problem.horizon, n_snap);
    let mut values = Vec::with_capacity(n_x * n_snap);
    for &t in &t {
        for &x in &x {
            values.push(problem.analytic_solution(t, x)?);
        }
    }
    ReferenceSolution::from_parts(&problem.name, problem.x_lo, problem.x_hi, n_x, t, values).ok()
}

/// Name used for a sampler kind in logs and CSV files.
pub fn method_name(kind: SamplerKind) -> String {
    String::from(kind.as_str())
}
