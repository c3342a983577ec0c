//! Slot-by-slot resource control with virtual queues.
//!
//! Each slot the controller picks transmit power, source/destination clock
//! rates and the bottleneck weight `beta` from finite grids, minimizing
//!
//! ```text
//!   V * energy + q_acc * (nmse - eps_nmse) + q_delay * (delay - d_max)
//! ```
//!
//! where the backlogs `q_acc`, `q_delay` accumulate past constraint
//! violations. Mean-rate stable backlogs imply the long-run averages meet
//! the targets without knowing the fading statistics.
//!
//! Physical models: Shannon rate over the slot bandwidth, payload
//! proportional to the encoder's representation complexity, cubic
//! clock-rate CPU power. Encoder designs are optimized once per grid
//! `beta` on the nominal statistics; per-slot link noise enters through a
//! re-optimized decoder in closed form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::ib::{complexity, optimize_encoder, GaussianJointModel, OptimizerConfig};

/// Controller state at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotState {
    pub t: u64,
    /// Channel power gain seen in the previous slot.
    pub h: f64,
    /// Accuracy virtual-queue backlog (>= 0).
    pub q_acc: f64,
    /// Delay virtual-queue backlog (>= 0).
    pub q_delay: f64,
}

impl SlotState {
    pub fn initial() -> Self {
        SlotState {
            t: 0,
            h: 1.0,
            q_acc: 0.0,
            q_delay: 0.0,
        }
    }
}

/// One grid point of the per-slot decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    /// Transmit power (W).
    pub p: f64,
    /// Source clock rate (cycles/s).
    pub f_src: f64,
    /// Destination clock rate (cycles/s).
    pub f_dst: f64,
    /// Bottleneck trade-off weight (from the configured grid).
    pub beta: f64,
}

/// Per-slot cost of a decision under the current gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotMetrics {
    /// Energy spent in the slot (J).
    pub energy: f64,
    /// Transmission plus processing delay (s); `inf` when a positive
    /// payload meets zero rate.
    pub delay: f64,
    /// Normalized mean squared error of the slot's estimate.
    pub nmse: f64,
}

/// Scenario parameters. Defaults: 1 MHz bandwidth, thermal-density noise
/// 4e-21 W/Hz, kappa 1e-28 J s^2, powers up to 1 W, clocks in
/// [0.1, 2] GHz.
#[derive(Debug, Clone)]
pub struct AdaptConfig {
    /// Energy weight in the per-slot objective.
    pub v: f64,
    /// Average NMSE target.
    pub eps_nmse: f64,
    /// Average delay target (s).
    pub d_max: f64,
    /// Link bandwidth (Hz).
    pub bandwidth: f64,
    /// Noise spectral density (W/Hz).
    pub n0: f64,
    /// CPU energy coefficient (J s^2).
    pub kappa: f64,
    /// Source/destination processing load (cycles per slot payload).
    pub cyc_src: f64,
    pub cyc_dst: f64,
    /// Payload bits per nat of encoder complexity.
    pub bits_per_nat: f64,
    /// Slot length (s).
    pub slot_duration: f64,
    /// Finite candidate grids.
    pub p_grid: Vec<f64>,
    pub f_src_grid: Vec<f64>,
    pub f_dst_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        let f_grid = vec![0.1e9, 0.2e9, 0.4e9, 0.8e9, 1.4e9, 2.0e9];
        AdaptConfig {
            v: 100.0,
            eps_nmse: 0.15,
            d_max: 0.025,
            bandwidth: 1.0e6,
            n0: 4.0e-21,
            kappa: 1.0e-28,
            cyc_src: 1.0e7,
            cyc_dst: 1.0e7,
            bits_per_nat: 6.0e4,
            slot_duration: 0.02,
            p_grid: vec![0.0, 1e-8, 1e-6, 1e-4, 1e-2, 0.1, 0.3, 1.0],
            f_src_grid: f_grid.clone(),
            f_dst_grid: f_grid,
            beta_grid: vec![0.0, 1.0, 2.0, 4.0, 8.0],
        }
    }
}

impl AdaptConfig {
    fn validate(&self) -> Result<()> {
        let positives = [
            ("v", self.v),
            ("eps_nmse", self.eps_nmse),
            ("d_max", self.d_max),
            ("bandwidth", self.bandwidth),
            ("n0", self.n0),
            ("kappa", self.kappa),
            ("cyc_src", self.cyc_src),
            ("cyc_dst", self.cyc_dst),
            ("bits_per_nat", self.bits_per_nat),
            ("slot_duration", self.slot_duration),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        for (name, grid) in [
            ("p_grid", &self.p_grid),
            ("f_src_grid", &self.f_src_grid),
            ("f_dst_grid", &self.f_dst_grid),
            ("beta_grid", &self.beta_grid),
        ] {
            if grid.is_empty() {
                return Err(Error::invalid(format!("{name} must be non-empty")));
            }
        }
        if self.p_grid.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid("powers must be nonnegative"));
        }
        if self
            .f_src_grid
            .iter()
            .chain(&self.f_dst_grid)
            .any(|&f| !(f > 0.0))
        {
            return Err(Error::invalid("clock rates must be positive"));
        }
        if self.beta_grid.iter().any(|&b| b < 0.0) {
            return Err(Error::invalid("betas must be nonnegative"));
        }
        Ok(())
    }
}

/// Block-fading gain process.
#[derive(Debug, Clone, Copy)]
pub enum FadingProcess {
    /// Constant gain every slot.
    Constant(f64),
    /// I.i.d. exponential power gains (Rayleigh amplitude fading).
    RayleighIid { mean_gain: f64 },
}

impl FadingProcess {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            FadingProcess::Constant(h) => *h,
            FadingProcess::RayleighIid { mean_gain } => {
                let exp = Exp::new(1.0 / mean_gain).expect("positive rate");
                exp.sample(rng).max(1e-30)
            }
        }
    }
}

/// Encoder design cached for one grid beta: payload size plus the spectral
/// data needed to evaluate the decoder-optimal error at any link-noise
/// level in O(d).
#[derive(Debug, Clone)]
struct BetaDesign {
    beta: f64,
    bits: f64,
    /// Eigenvalues of `A Sigma_x A' + Sigma_xi`.
    eig: Vec<f64>,
    /// Squared row norms of `U' A Sigma_xy` in the eigenbasis.
    weights: Vec<f64>,
}

impl BetaDesign {
    /// MSE of the optimal linear decoder when the link adds white noise of
    /// variance `sigma2`: `tr(Sigma_y) - sum_i w_i / (lambda_i + sigma2)`.
    fn mse(&self, sigma2: f64, trace_y: f64) -> f64 {
        if !sigma2.is_finite() {
            return trace_y;
        }
        let recovered: f64 = self
            .eig
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| w / (l + sigma2))
            .sum();
        (trace_y - recovered).max(0.0)
    }
}

/// Grid controller with precomputed per-beta encoder designs.
#[derive(Debug, Clone)]
pub struct Controller {
    config: AdaptConfig,
    designs: Vec<BetaDesign>,
    trace_y: f64,
}

/// Normalized scalar regression statistics used by the default scenario.
pub fn normalized_scalar_model() -> GaussianJointModel {
    GaussianJointModel::scalar(1.0, 1.0, 1.0, 1.0, 0.0).expect("valid scalar model")
}

impl Controller {
    /// Optimizes one encoder per grid beta on the nominal statistics and
    /// caches what the per-slot evaluation needs.
    pub fn new(model: &GaussianJointModel, config: AdaptConfig) -> Result<Self> {
        config.validate()?;
        let opt = OptimizerConfig::default();
        let mut designs = Vec::with_capacity(config.beta_grid.len());
        for &beta in &config.beta_grid {
            let sol = optimize_encoder(model, beta, model.d(), &opt)?;
            let a = &sol.design.a;
            let nats = complexity(a, model)?;
            let g = a * model.sigma_x() * a.transpose() + model.sigma_xi();
            let eigen = g.symmetric_eigen();
            let c = eigen.eigenvectors.transpose() * (a * model.sigma_xy());
            let weights: Vec<f64> = (0..c.nrows())
                .map(|i| c.row(i).iter().map(|v| v * v).sum())
                .collect();
            designs.push(BetaDesign {
                beta,
                bits: config.bits_per_nat * nats,
                eig: eigen.eigenvalues.iter().cloned().collect(),
                weights,
            });
        }
        Ok(Controller {
            config,
            designs,
            trace_y: model.sigma_y().trace(),
        })
    }

    pub fn config(&self) -> &AdaptConfig {
        &self.config
    }

    fn design_for(&self, beta: f64) -> Result<&BetaDesign> {
        self.designs
            .iter()
            .find(|d| d.beta == beta)
            .ok_or_else(|| Error::invalid(format!("beta {beta} is not on the configured grid")))
    }

    fn rate(&self, p: f64, h: f64) -> f64 {
        let noise = self.config.n0 * self.config.bandwidth;
        self.config.bandwidth * (1.0 + p * h / noise).log2()
    }

    fn link_noise_var(&self, p: f64, h: f64) -> f64 {
        if p * h > 0.0 {
            self.config.n0 * self.config.bandwidth / (p * h)
        } else {
            f64::INFINITY
        }
    }

    /// Energy, delay and NMSE of a decision under gain `h`. Zero rate with a
    /// positive payload yields an infinite-delay sentinel; such a decision
    /// is evaluable but can never win the per-slot minimization.
    pub fn slot_metrics(&self, decision: &ControlDecision, h: f64) -> Result<SlotMetrics> {
        let design = self.design_for(decision.beta)?;
        let cfg = &self.config;
        let sigma2 = self.link_noise_var(decision.p, h);
        let nmse = design.mse(sigma2, self.trace_y) / self.trace_y;

        let tx_delay = if design.bits == 0.0 {
            0.0
        } else {
            let r = self.rate(decision.p, h);
            if r > 0.0 {
                design.bits / r
            } else {
                f64::INFINITY
            }
        };
        let processing = cfg.cyc_src / decision.f_src + cfg.cyc_dst / decision.f_dst;
        let delay = tx_delay + processing;

        let tx_energy = if tx_delay.is_finite() {
            decision.p * tx_delay
        } else {
            0.0
        };
        let cpu_energy = cfg.kappa
            * (decision.f_src.powi(3) + decision.f_dst.powi(3))
            * cfg.slot_duration;
        Ok(SlotMetrics {
            energy: tx_energy + cpu_energy,
            delay,
            nmse,
        })
    }

    fn weighted_objective(&self, state: &SlotState, m: &SlotMetrics) -> f64 {
        if !m.delay.is_finite() {
            return f64::INFINITY;
        }
        self.config.v * m.energy
            + state.q_acc * (m.nmse - self.config.eps_nmse)
            + state.q_delay * (m.delay - self.config.d_max)
    }

    /// Exhaustive minimization of the weighted objective over the grid
    /// product. Ties go to lower energy, then to the earlier point in
    /// `(p, f_src, f_dst, beta)` lexicographic grid order.
    pub fn choose_control(&self, state: &SlotState, h: f64) -> (ControlDecision, SlotMetrics) {
        let cfg = &self.config;
        let mut best: Option<(f64, f64, ControlDecision, SlotMetrics)> = None;

        for &p in &cfg.p_grid {
            // Everything beta-dependent is also (p, h)-dependent only.
            let sigma2 = self.link_noise_var(p, h);
            let rate = self.rate(p, h);
            let per_beta: Vec<(f64, f64, f64)> = self
                .designs
                .iter()
                .map(|d| {
                    let nmse = d.mse(sigma2, self.trace_y) / self.trace_y;
                    let tx_delay = if d.bits == 0.0 {
                        0.0
                    } else if rate > 0.0 {
                        d.bits / rate
                    } else {
                        f64::INFINITY
                    };
                    let tx_energy = if tx_delay.is_finite() { p * tx_delay } else { 0.0 };
                    (nmse, tx_delay, tx_energy)
                })
                .collect();

            for &f_src in &cfg.f_src_grid {
                let src_delay = cfg.cyc_src / f_src;
                for &f_dst in &cfg.f_dst_grid {
                    let processing = src_delay + cfg.cyc_dst / f_dst;
                    let cpu_energy =
                        cfg.kappa * (f_src.powi(3) + f_dst.powi(3)) * cfg.slot_duration;
                    for (bi, &(nmse, tx_delay, tx_energy)) in per_beta.iter().enumerate() {
                        let metrics = SlotMetrics {
                            energy: tx_energy + cpu_energy,
                            delay: tx_delay + processing,
                            nmse,
                        };
                        let obj = self.weighted_objective(state, &metrics);
                        let better = match &best {
                            None => true,
                            Some((bo, be, _, _)) => {
                                obj < *bo || (obj == *bo && metrics.energy < *be)
                            }
                        };
                        if better {
                            let decision = ControlDecision {
                                p,
                                f_src,
                                f_dst,
                                beta: cfg.beta_grid[bi],
                            };
                            best = Some((obj, metrics.energy, decision, metrics));
                        }
                    }
                }
            }
        }
        let (_, _, decision, metrics) = best.expect("grids are non-empty");
        (decision, metrics)
    }

    /// Runs the controller for `t_slots` slots of i.i.d. block fading.
    pub fn simulate(&self, t_slots: usize, fading: &FadingProcess, seed: u64) -> SimTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = SlotState::initial();
        let mut records = Vec::with_capacity(t_slots);
        let mut sums = (0.0, 0.0, 0.0); // energy, delay, nmse

        for _ in 0..t_slots {
            let h = fading.sample(&mut rng);
            let (decision, metrics) = self.choose_control(&state, h);
            state = update_queues(&state, &metrics, &self.config);
            state.h = h;
            sums.0 += metrics.energy;
            sums.1 += metrics.delay;
            sums.2 += metrics.nmse;
            records.push(SlotRecord {
                t: state.t - 1,
                h,
                decision,
                metrics,
                q_acc: state.q_acc,
                q_delay: state.q_delay,
            });
        }

        let n = t_slots.max(1) as f64;
        let feasibility_warning =
            state.q_acc / n > 0.1 || state.q_delay / n > 0.1;
        SimTrace {
            avg_energy: sums.0 / n,
            avg_power: sums.0 / n / self.config.slot_duration,
            avg_delay: sums.1 / n,
            avg_nmse: sums.2 / n,
            final_state: state,
            feasibility_warning,
            records,
        }
    }
}

/// Accumulates this slot's constraint violations into the backlogs:
/// `q <- max(0, q + violation)`.
pub fn update_queues(state: &SlotState, metrics: &SlotMetrics, config: &AdaptConfig) -> SlotState {
    SlotState {
        t: state.t + 1,
        h: state.h,
        q_acc: (state.q_acc + metrics.nmse - config.eps_nmse).max(0.0),
        q_delay: (state.q_delay + metrics.delay - config.d_max).max(0.0),
    }
}

/// Everything observed in one simulated slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotRecord {
    pub t: u64,
    pub h: f64,
    pub decision: ControlDecision,
    pub metrics: SlotMetrics,
    pub q_acc: f64,
    pub q_delay: f64,
}

/// Full simulation output with running averages.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub avg_energy: f64,
    pub avg_power: f64,
    pub avg_delay: f64,
    pub avg_nmse: f64,
    pub final_state: SlotState,
    pub feasibility_warning: bool,
    pub records: Vec<SlotRecord>,
}
