//! Numerical minimization of the bottleneck objective over the encoder.
//!
//! The objective is nonconvex in `A`, so the optimizer runs gradient descent
//! with backtracking line search from several random restarts and keeps the
//! best. The decoder is always the closed-form optimum for the current
//! encoder. For the normalized scalar case (`Y = X`, unit source and encoder
//! noise, noiseless link) the stationary point is `a^2 = max(0, 2 beta - 1)`;
//! tests pin the optimizer against that solution and a fine grid search.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ib::{complexity, mse, reduced_gradient, reduced_objective, EncoderDesign, GaussianJointModel};

/// How the descent direction is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Closed-form gradient of the reduced objective.
    #[default]
    Analytic,
    /// Central finite differences; slower fallback, useful for
    /// cross-checking.
    CentralDifference,
}

/// Optimizer settings. The defaults match the documented design: 8 restarts
/// drawn standard-normal scaled by `1/sqrt(n)`, at most 5000 iterations per
/// restart, gradient-norm tolerance `1e-8`.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub gradient: GradientMode,
    /// Extra initial point, e.g. the previous frontier solution.
    pub warm_start: Option<DMatrix<f64>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 8,
            max_iters: 5000,
            grad_tol: 1e-8,
            seed: 0,
            gradient: GradientMode::Analytic,
            warm_start: None,
        }
    }
}

/// Result of one encoder optimization.
#[derive(Debug, Clone)]
pub struct EncoderSolution {
    pub design: EncoderDesign,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// One frontier entry: achieved complexity/error at a trade-off weight.
#[derive(Debug, Clone, Copy)]
pub struct FrontierPoint {
    pub beta: f64,
    pub complexity_nats: f64,
    pub mse: f64,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const FD_STEP: f64 = 1e-6;

fn gradient_at(
    a: &DMatrix<f64>,
    beta: f64,
    model: &GaussianJointModel,
    mode: GradientMode,
) -> Result<DMatrix<f64>> {
    match mode {
        GradientMode::Analytic => reduced_gradient(a, beta, model),
        GradientMode::CentralDifference => {
            let mut grad = DMatrix::zeros(a.nrows(), a.ncols());
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    let mut ap = a.clone();
                    let mut am = a.clone();
                    ap[(i, j)] += FD_STEP;
                    am[(i, j)] -= FD_STEP;
                    let (fp, _) = reduced_objective(&ap, beta, model)?;
                    let (fm, _) = reduced_objective(&am, beta, model)?;
                    grad[(i, j)] = (fp - fm) / (2.0 * FD_STEP);
                }
            }
            Ok(grad)
        }
    }
}

struct DescentOutcome {
    a: DMatrix<f64>,
    objective: f64,
    converged: bool,
    iterations: usize,
}

/// Gradient descent with Armijo backtracking from a single initial point.
fn descend(
    init: DMatrix<f64>,
    beta: f64,
    model: &GaussianJointModel,
    config: &OptimizerConfig,
) -> Result<DescentOutcome> {
    let mut a = init;
    let (mut f, _) = reduced_objective(&a, beta, model)?;
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        iterations += 1;
        let grad = gradient_at(&a, beta, model, config.gradient)?;
        let gnorm2 = grad.norm_squared();
        if gnorm2.sqrt() <= config.grad_tol {
            converged = true;
            break;
        }
        // Backtracking line search on f(a - t g).
        let mut t = (step * 2.0).min(1e6_f64);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &a - &grad * t;
            match reduced_objective(&candidate, beta, model) {
                Ok((fc, _)) if fc <= f - ARMIJO_C * t * gnorm2 => {
                    a = candidate;
                    f = fc;
                    step = t;
                    accepted = true;
                    break;
                }
                _ => t *= BACKTRACK_SHRINK,
            }
        }
        if !accepted {
            // No productive step at any tried scale: stationary for our
            // purposes.
            converged = gnorm2.sqrt() <= config.grad_tol.max(1e-6);
            break;
        }
    }
    Ok(DescentOutcome {
        a,
        objective: f,
        converged,
        iterations,
    })
}

/// Minimizes `complexity(A) + beta * mse(Y, M*(A) (A X + xi + eta))` over
/// `A`, returning the best design across restarts. `beta = 0` is solved
/// exactly by the zero encoder.
pub fn optimize_encoder(
    model: &GaussianJointModel,
    beta: f64,
    d: usize,
    config: &OptimizerConfig,
) -> Result<EncoderSolution> {
    if d == 0 {
        return Err(Error::invalid("latent dimension d must be positive"));
    }
    if d != model.d() {
        return Err(Error::invalid(format!(
            "d = {d} does not match the model's noise dimension {}",
            model.d()
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid("beta must be finite and nonnegative"));
    }
    let n = model.n();

    if beta == 0.0 {
        // Complexity-only minimization: the zero encoder is exactly optimal.
        let a = DMatrix::zeros(d, n);
        let m = DMatrix::zeros(model.m(), d);
        return Ok(EncoderSolution {
            design: EncoderDesign { a, m, beta },
            objective: 0.0,
            converged: true,
            iterations: 0,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 1.0 / (n as f64).sqrt();
    let mut inits: Vec<DMatrix<f64>> = Vec::new();
    if let Some(ws) = &config.warm_start {
        if ws.nrows() == d && ws.ncols() == n {
            inits.push(ws.clone());
        }
    }
    // Always consider the boundary solution A = 0 (optimal for small beta).
    inits.push(DMatrix::zeros(d, n));
    while inits.len() < config.restarts.max(1) + 1 {
        let init = DMatrix::from_fn(d, n, |_, _| {
            let g: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            g * scale
        });
        inits.push(init);
    }

    let mut best: Option<DescentOutcome> = None;
    for init in inits {
        let outcome = descend(init, beta, model, config)?;
        let better = match &best {
            None => true,
            Some(b) => outcome.objective < b.objective,
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart ran");
    let (_, m) = reduced_objective(&best.a, beta, model)?;
    Ok(EncoderSolution {
        design: EncoderDesign {
            a: best.a,
            m,
            beta,
        },
        objective: best.objective,
        converged: best.converged,
        iterations: best.iterations,
    })
}

/// Sweeps ascending trade-off weights, warm-starting each point from the
/// previous solution, and reports the achieved (complexity, mse) frontier.
pub fn ib_frontier(
    model: &GaussianJointModel,
    betas: &[f64],
    d: usize,
    config: &OptimizerConfig,
) -> Result<(Vec<FrontierPoint>, Vec<EncoderSolution>)> {
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("betas must be ascending"));
    }
    if betas.iter().any(|&b| b < 0.0) {
        return Err(Error::invalid("betas must be nonnegative"));
    }
    let mut points = Vec::with_capacity(betas.len());
    let mut solutions = Vec::with_capacity(betas.len());
    let mut warm: Option<DMatrix<f64>> = None;
    for (i, &beta) in betas.iter().enumerate() {
        let cfg = OptimizerConfig {
            warm_start: warm.clone(),
            seed: config.seed.wrapping_add(i as u64),
            ..config.clone()
        };
        let sol = optimize_encoder(model, beta, d, &cfg)?;
        let c = complexity(&sol.design.a, model)?;
        let e = mse(&sol.design, model)?;
        points.push(FrontierPoint {
            beta,
            complexity_nats: c,
            mse: e,
            converged: sol.converged,
        });
        warm = Some(sol.design.a.clone());
        solutions.push(sol);
    }
    Ok((points, solutions))
}
