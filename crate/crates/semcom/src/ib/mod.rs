//! Linear-Gaussian bottleneck encoder design.
//!
//! A source `X` is compressed by a linear encoder `T = A X + xi`, sent over
//! an additive-noise link (`T + eta`), and linearly decoded as
//! `Yhat = M (T + eta)`. The design objective trades representation
//! complexity `I(X; T)` against the estimation error of a target `Y`:
//!
//! ```text
//!   J(A, M) = I(X; T) + beta * MSE(Y, Yhat)
//! ```
//!
//! Everything here is closed-form given second-order statistics; the
//! nonconvex minimization over `A` lives in [`optimize`].

mod optimize;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use optimize::{ib_frontier, optimize_encoder, EncoderSolution, FrontierPoint, GradientMode, OptimizerConfig};

/// Relative tolerance for symmetry / positive-semidefiniteness validation.
const PSD_TOL: f64 = 1e-9;

/// Second-order statistics of the source `X`, target `Y`, encoder noise `xi`
/// and link noise `eta`.
#[derive(Debug, Clone)]
pub struct GaussianJointModel {
    sigma_x: DMatrix<f64>,
    sigma_xy: DMatrix<f64>,
    sigma_y: DMatrix<f64>,
    sigma_xi: DMatrix<f64>,
    sigma_eta: DMatrix<f64>,
}

fn check_symmetric_psd(m: &DMatrix<f64>, name: &str, strict: bool) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!("{name} must be square")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > PSD_TOL * scale {
        return Err(Error::invalid(format!("{name} must be symmetric")));
    }
    if strict {
        if m.clone().cholesky().is_none() {
            return Err(Error::invalid(format!(
                "{name} must be strictly positive definite"
            )));
        }
    } else {
        let min_eig = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 * scale {
            return Err(Error::invalid(format!(
                "{name} must be positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
    }
    Ok(())
}

impl GaussianJointModel {
    pub fn new(
        sigma_x: DMatrix<f64>,
        sigma_xy: DMatrix<f64>,
        sigma_y: DMatrix<f64>,
        sigma_xi: DMatrix<f64>,
        sigma_eta: DMatrix<f64>,
    ) -> Result<Self> {
        let n = sigma_x.nrows();
        let m = sigma_y.nrows();
        let d = sigma_xi.nrows();
        check_symmetric_psd(&sigma_x, "sigma_x", false)?;
        check_symmetric_psd(&sigma_y, "sigma_y", false)?;
        check_symmetric_psd(&sigma_xi, "sigma_xi", true)?;
        check_symmetric_psd(&sigma_eta, "sigma_eta", false)?;
        if sigma_xy.nrows() != n || sigma_xy.ncols() != m {
            return Err(Error::invalid("sigma_xy must be n x m"));
        }
        if sigma_eta.nrows() != d {
            return Err(Error::invalid("sigma_eta must match sigma_xi dimensions"));
        }
        // The joint covariance of (X, Y) must itself be PSD.
        let mut joint = DMatrix::<f64>::zeros(n + m, n + m);
        joint.view_mut((0, 0), (n, n)).copy_from(&sigma_x);
        joint.view_mut((0, n), (n, m)).copy_from(&sigma_xy);
        joint
            .view_mut((n, 0), (m, n))
            .copy_from(&sigma_xy.transpose());
        joint.view_mut((n, n), (m, m)).copy_from(&sigma_y);
        check_symmetric_psd(&joint, "joint covariance of (X, Y)", false)?;

        Ok(GaussianJointModel {
            sigma_x,
            sigma_xy,
            sigma_y,
            sigma_xi,
            sigma_eta,
        })
    }

    /// One-dimensional model, handy for analytic checks.
    pub fn scalar(sx: f64, sxy: f64, sy: f64, sxi: f64, seta: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, sx),
            DMatrix::from_element(1, 1, sxy),
            DMatrix::from_element(1, 1, sy),
            DMatrix::from_element(1, 1, sxi),
            DMatrix::from_element(1, 1, seta),
        )
    }

    /// Same statistics with the link-noise covariance replaced.
    pub fn with_sigma_eta(&self, sigma_eta: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.sigma_x.clone(),
            self.sigma_xy.clone(),
            self.sigma_y.clone(),
            self.sigma_xi.clone(),
            sigma_eta,
        )
    }

    pub fn n(&self) -> usize {
        self.sigma_x.nrows()
    }

    pub fn m(&self) -> usize {
        self.sigma_y.nrows()
    }

    pub fn d(&self) -> usize {
        self.sigma_xi.nrows()
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    pub fn sigma_xy(&self) -> &DMatrix<f64> {
        &self.sigma_xy
    }

    pub fn sigma_y(&self) -> &DMatrix<f64> {
        &self.sigma_y
    }

    pub fn sigma_xi(&self) -> &DMatrix<f64> {
        &self.sigma_xi
    }

    pub fn sigma_eta(&self) -> &DMatrix<f64> {
        &self.sigma_eta
    }

    fn check_encoder_dims(&self, a: &DMatrix<f64>) -> Result<()> {
        if a.nrows() != self.d() || a.ncols() != self.n() {
            return Err(Error::invalid(format!(
                "encoder must be {}x{}, got {}x{}",
                self.d(),
                self.n(),
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(())
    }
}

/// Encoder matrix, decoder matrix and the trade-off weight they were
/// designed for.
#[derive(Debug, Clone)]
pub struct EncoderDesign {
    pub a: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub beta: f64,
}

impl EncoderDesign {
    pub fn new(a: DMatrix<f64>, m: DMatrix<f64>, beta: f64, model: &GaussianJointModel) -> Result<Self> {
        model.check_encoder_dims(&a)?;
        if m.nrows() != model.m() || m.ncols() != model.d() {
            return Err(Error::invalid("decoder must be m x d"));
        }
        if !(beta >= 0.0) {
            return Err(Error::invalid("beta must be nonnegative"));
        }
        Ok(EncoderDesign { a, m, beta })
    }
}

fn ln_det_cholesky(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numeric(format!("{what} is not positive definite")))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Representation complexity `I(X; T)` in nats:
/// `1/2 [ ln det(A Sigma_x A' + Sigma_xi) - ln det Sigma_xi ]`.
pub fn complexity(a: &DMatrix<f64>, model: &GaussianJointModel) -> Result<f64> {
    model.check_encoder_dims(a)?;
    let s = a * model.sigma_x() * a.transpose() + model.sigma_xi();
    let val = 0.5 * (ln_det_cholesky(&s, "encoded covariance")? - ln_det_cholesky(model.sigma_xi(), "sigma_xi")?);
    // PSD ordering guarantees nonnegativity; clamp roundoff.
    Ok(val.max(0.0))
}

/// Covariance of the received vector `A X + xi + eta`.
fn received_covariance(a: &DMatrix<f64>, model: &GaussianJointModel) -> DMatrix<f64> {
    a * model.sigma_x() * a.transpose() + model.sigma_xi() + model.sigma_eta()
}

/// Linear MMSE decoder for the received vector:
/// `M* = Sigma_xy' A' (A Sigma_x A' + Sigma_xi + Sigma_eta)^-1`.
pub fn mmse_decoder(a: &DMatrix<f64>, model: &GaussianJointModel) -> Result<DMatrix<f64>> {
    model.check_encoder_dims(a)?;
    let g = received_covariance(a, model);
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::numeric("received-signal covariance is singular"))?;
    // Solve G Z = A Sigma_xy, then M = Z'.
    let rhs = a * model.sigma_xy();
    Ok(chol.solve(&rhs).transpose())
}

/// Exact mean squared error of the linear estimate:
/// `tr(Sigma_y) - 2 tr(M A Sigma_xy) + tr(M G M')` with
/// `G = A Sigma_x A' + Sigma_xi + Sigma_eta`.
pub fn mse(design: &EncoderDesign, model: &GaussianJointModel) -> Result<f64> {
    model.check_encoder_dims(&design.a)?;
    if design.m.nrows() != model.m() || design.m.ncols() != model.d() {
        return Err(Error::invalid("decoder must be m x d"));
    }
    let g = received_covariance(&design.a, model);
    let cross = (&design.m * &design.a * model.sigma_xy()).trace();
    let quad = (&design.m * g * design.m.transpose()).trace();
    Ok(model.sigma_y().trace() - 2.0 * cross + quad)
}

/// The design objective `complexity(A) + beta * mse(A, M)`.
pub fn objective(design: &EncoderDesign, model: &GaussianJointModel) -> Result<f64> {
    Ok(complexity(&design.a, model)? + design.beta * mse(design, model)?)
}

/// Objective of `A` with the decoder set to its optimum, plus that decoder.
/// This is the reduced function the optimizer minimizes.
pub fn reduced_objective(
    a: &DMatrix<f64>,
    beta: f64,
    model: &GaussianJointModel,
) -> Result<(f64, DMatrix<f64>)> {
    let m = mmse_decoder(a, model)?;
    let design = EncoderDesign {
        a: a.clone(),
        m: m.clone(),
        beta,
    };
    Ok((objective(&design, model)?, m))
}

/// Analytic gradient of the reduced objective with respect to `A`. With the
/// decoder at its optimum the total derivative equals the partial one, so
///
/// ```text
///   grad = S^-1 A Sigma_x + 2 beta (M' M A Sigma_x - M' Sigma_xy')
/// ```
///
/// with `S = A Sigma_x A' + Sigma_xi` and `M = M*(A)`.
pub fn reduced_gradient(
    a: &DMatrix<f64>,
    beta: f64,
    model: &GaussianJointModel,
) -> Result<DMatrix<f64>> {
    let m = mmse_decoder(a, model)?;
    let s = a * model.sigma_x() * a.transpose() + model.sigma_xi();
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::numeric("encoded covariance is singular"))?;
    let s_inv_a = chol.solve(&(a * model.sigma_x()));
    let mt = m.transpose();
    let grad = s_inv_a
        + 2.0 * beta * (&mt * &m * a * model.sigma_x() - &mt * model.sigma_xy().transpose());
    Ok(grad)
}

/// Seeded random regression statistics: `Y = C X + W` with a well-conditioned
/// source covariance, unit-scaled encoder noise and a small link noise. Used
/// by frontier experiments that need a reproducible non-scalar model.
pub fn random_regression_model(dim: usize, seed: u64) -> GaussianJointModel {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rand_mat = |r: usize, cscale: f64| {
        DMatrix::from_fn(r, r, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * cscale)
    };
    let g = rand_mat(dim, 1.0);
    let sigma_x = &g * g.transpose() + DMatrix::identity(dim, dim) * 0.2;
    let c = rand_mat(dim, 1.0);
    let gw = rand_mat(dim, 0.3);
    let sigma_w = &gw * gw.transpose() + DMatrix::identity(dim, dim) * 0.1;
    let sigma_xy = &sigma_x * c.transpose();
    let sigma_y = &c * &sigma_x * c.transpose() + sigma_w;
    GaussianJointModel::new(
        sigma_x,
        sigma_xy,
        sigma_y,
        DMatrix::identity(dim, dim) * 0.4,
        DMatrix::identity(dim, dim) * 0.15,
    )
    .expect("construction yields a valid joint model")
}

/// Reads a whitespace-separated matrix from a text file; `#` starts a
/// comment. All rows must have the same number of entries.
pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(&path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in body.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::invalid(format!(
                    "{}:{}: invalid number `{tok}`",
                    path.as_ref().display(),
                    lineno + 1
                ))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::invalid(format!(
                    "{}:{}: ragged row ({} entries, expected {})",
                    path.as_ref().display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!(
            "{}: empty matrix file",
            path.as_ref().display()
        )));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_model() -> GaussianJointModel {
        // Y = X, unit source and encoder noise, noiseless link.
        GaussianJointModel::scalar(1.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    fn random_model(n: usize, m: usize, d: usize, seed: u64) -> GaussianJointModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_mat = |r: usize, c: usize| {
            DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
        };
        // Build a jointly valid (X, Y): Y = C X + W with W independent.
        let gx = rand_mat(n, n);
        let sigma_x = &gx * gx.transpose() + DMatrix::identity(n, n) * 0.1;
        let c = rand_mat(m, n);
        let gw = rand_mat(m, m);
        let sigma_w = &gw * gw.transpose() + DMatrix::identity(m, m) * 0.05;
        let sigma_xy = &sigma_x * c.transpose();
        let sigma_y = &c * &sigma_x * c.transpose() + sigma_w;
        GaussianJointModel::new(
            sigma_x,
            sigma_xy,
            sigma_y,
            DMatrix::identity(d, d) * 0.5,
            DMatrix::identity(d, d) * 0.2,
        )
        .unwrap()
    }

    #[test]
    fn zero_encoder_has_zero_complexity() {
        let model = random_model(3, 2, 2, 1);
        let a = DMatrix::zeros(2, 3);
        assert_eq!(complexity(&a, &model).unwrap(), 0.0);
    }

    #[test]
    fn scalar_complexity_closed_form() {
        // a = sqrt(3), Sigma_x = Sigma_xi = 1: 0.5 ln(1 + 3) = ln 2.
        let model = scalar_model();
        let a = DMatrix::from_element(1, 1, 3f64.sqrt());
        let got = complexity(&a, &model).unwrap();
        assert!((got - 2f64.ln()).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn complexity_invariant_under_orthogonal_mixing() {
        let model = random_model(3, 2, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        // sigma_xi = 0.5 I, so I(X;T) only sees A through A Sigma_x A'.
        let raw = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let q = raw.qr().q();
        let c0 = complexity(&a, &model).unwrap();
        let c1 = complexity(&(&q * &a), &model).unwrap();
        assert!((c0 - c1).abs() < 1e-9, "{c0} vs {c1}");
    }

    #[test]
    fn zero_encoder_gives_zero_decoder() {
        let model = random_model(2, 2, 2, 4);
        let m = mmse_decoder(&DMatrix::zeros(2, 2), &model).unwrap();
        assert!(m.amax() < 1e-14);
    }

    #[test]
    fn scalar_decoder_closed_form() {
        // a = 1: M* = a / (a^2 + 1) = 1/2.
        let model = scalar_model();
        let m = mmse_decoder(&DMatrix::from_element(1, 1, 1.0), &model).unwrap();
        assert!((m[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mmse_decoder_beats_random_perturbations() {
        let model = random_model(3, 2, 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = DMatrix::from_fn(2, 3, |_, _| rng.random::<f64>() - 0.5);
        let m_star = mmse_decoder(&a, &model).unwrap();
        let base = mse(
            &EncoderDesign {
                a: a.clone(),
                m: m_star.clone(),
                beta: 1.0,
            },
            &model,
        )
        .unwrap();
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.random::<f64>() * 4.0 - 3.0);
            let perturbed = &m_star
                + DMatrix::from_fn(2, 2, |_, _| (rng.random::<f64>() - 0.5) * scale);
            let other = mse(
                &EncoderDesign {
                    a: a.clone(),
                    m: perturbed,
                    beta: 1.0,
                },
                &model,
            )
            .unwrap();
            assert!(
                other >= base - 1e-12,
                "perturbed decoder beat the closed form: {other} < {base}"
            );
        }
    }

    #[test]
    fn mse_of_zero_design_is_target_variance() {
        let model = random_model(3, 2, 2, 7);
        let design = EncoderDesign {
            a: DMatrix::zeros(2, 3),
            m: DMatrix::zeros(2, 2),
            beta: 1.0,
        };
        let got = mse(&design, &model).unwrap();
        assert!((got - model.sigma_y().trace()).abs() < 1e-12);
    }

    #[test]
    fn scalar_mse_closed_form() {
        // a = sqrt(3), M = M*: MSE = 1 / (1 + a^2) = 0.25.
        let model = scalar_model();
        let a = DMatrix::from_element(1, 1, 3f64.sqrt());
        let m = mmse_decoder(&a, &model).unwrap();
        let design = EncoderDesign { a, m, beta: 2.0 };
        let got = mse(&design, &model).unwrap();
        assert!((got - 0.25).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn monte_carlo_mse_matches_closed_form() {
        let model = random_model(2, 1, 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5);
        let m = mmse_decoder(&a, &model).unwrap();
        let design = EncoderDesign {
            a: a.clone(),
            m: m.clone(),
            beta: 1.0,
        };
        let exact = mse(&design, &model).unwrap();

        let n = 1_000_000usize;
        let (xs, ys) = crate::data::synth_gaussian(&model, n, 10);
        let xi_chol = model.sigma_xi().clone().cholesky().unwrap();
        let eta_l = {
            // sigma_eta = 0.2 I here; direct sqrt.
            model.sigma_eta().map(|v| v.sqrt())
        };
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let normal = rand_distr::StandardNormal;
        for r in 0..n {
            let x = DVector::from_fn(2, |i, _| xs[(r, i)]);
            let y = DVector::from_fn(1, |i, _| ys[(r, i)]);
            let mut xi = DVector::from_fn(2, |_, _| rand_distr::Distribution::sample(&normal, &mut rng));
            xi = xi_chol.l() * xi;
            let eta = DVector::from_fn(2, |i, _| {
                let e: f64 = rand_distr::Distribution::sample(&normal, &mut rng);
                eta_l[(i, i)] * e
            });
            let received = &a * x + xi + eta;
            let err = y - &m * received;
            let e2 = err.norm_squared();
            sum += e2;
            sumsq += e2 * e2;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let stderr = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * stderr,
            "MC {mean} vs exact {exact} (3 sigma = {:.3e})",
            3.0 * stderr
        );
    }

    #[test]
    fn objective_is_complexity_plus_beta_mse() {
        let model = random_model(3, 2, 2, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let beta = rng.random::<f64>() * 4.0;
            let a = DMatrix::from_fn(2, 3, |_, _| rng.random::<f64>() - 0.5);
            let m = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5);
            let design = EncoderDesign { a: a.clone(), m, beta };
            let o = objective(&design, &model).unwrap();
            let parts =
                complexity(&a, &model).unwrap() + beta * mse(&design, &model).unwrap();
            assert!((o - parts).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_design_zero_beta_objective_is_zero() {
        let model = scalar_model();
        let design = EncoderDesign {
            a: DMatrix::zeros(1, 1),
            m: DMatrix::zeros(1, 1),
            beta: 0.0,
        };
        assert_eq!(objective(&design, &model).unwrap(), 0.0);
    }

    #[test]
    fn scalar_objective_at_stationary_point() {
        // beta = 2, a = sqrt(3), M = M*: ln 2 + 2 * 0.25.
        let model = scalar_model();
        let a = DMatrix::from_element(1, 1, 3f64.sqrt());
        let m = mmse_decoder(&a, &model).unwrap();
        let design = EncoderDesign { a, m, beta: 2.0 };
        let got = objective(&design, &model).unwrap();
        assert!((got - (2f64.ln() + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn objective_invariant_under_orthogonal_reparameterization() {
        // sigma_xi and sigma_eta are scalar multiples of I in random_model.
        let model = random_model(3, 2, 3, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let m = mmse_decoder(&a, &model).unwrap();
        let q = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5)
            .qr()
            .q();
        let design = EncoderDesign {
            a: a.clone(),
            m: m.clone(),
            beta: 1.7,
        };
        let rotated = EncoderDesign {
            a: &q * &a,
            m: &m * q.transpose(),
            beta: 1.7,
        };
        let o0 = objective(&design, &model).unwrap();
        let o1 = objective(&rotated, &model).unwrap();
        assert!((o0 - o1).abs() < 1e-9, "{o0} vs {o1}");
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let model = random_model(3, 2, 2, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let beta = 1.3;
        let a = DMatrix::from_fn(2, 3, |_, _| rng.random::<f64>() - 0.5);
        let grad = reduced_gradient(&a, beta, &model).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[(i, j)] += h;
                am[(i, j)] -= h;
                let (fp, _) = reduced_objective(&ap, beta, &model).unwrap();
                let (fm, _) = reduced_objective(&am, beta, &model).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let rel = (grad[(i, j)] - fd).abs() / fd.abs().max(1e-6);
                assert!(
                    rel < 1e-4,
                    "gradient[{i},{j}]: analytic {} vs fd {fd}",
                    grad[(i, j)]
                );
            }
        }
    }

    #[test]
    fn complexity_zero_iff_zero_encoder() {
        let model = random_model(2, 1, 2, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..50 {
            let a = DMatrix::from_fn(2, 2, |_, _| (rng.random::<f64>() - 0.5) * 0.1);
            let c = complexity(&a, &model).unwrap();
            if a.amax() > 1e-8 {
                assert!(c > 0.0, "nonzero encoder must have positive complexity");
            }
        }
    }

    #[test]
    fn matrix_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        fs::write(&path, "# covariance\n1.0 0.5\n0.5 2.0 # trailing\n").unwrap();
        let m = read_matrix_file(&path).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]));
        fs::write(&path, "1 2\n3\n").unwrap();
        assert!(read_matrix_file(&path).is_err());
    }

    #[test]
    fn degenerate_sigma_xi_rejected_at_construction() {
        let err = GaussianJointModel::scalar(1.0, 1.0, 1.0, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
