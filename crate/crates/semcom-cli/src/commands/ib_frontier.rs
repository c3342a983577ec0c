//! `ib-frontier`: optimizes the linear bottleneck encoder across ascending
//! trade-off weights and writes `beta,complexity_nats,mse` rows.

use semcom::ib::{
    ib_frontier, random_regression_model, read_matrix_file, GaussianJointModel, OptimizerConfig,
};

use crate::config::ConfigError;
use crate::{CliResult, Ctx};

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let mut sect = ctx.raw.section("ib-frontier");
    let model_spec = sect.get_str("model").unwrap_or("builtin:scalar").to_string();
    let betas = sect
        .get_f64_list("betas")?
        .unwrap_or_else(|| vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]);
    let restarts = sect.get_usize("restarts")?;
    let max_iters = sect.get_usize("max_iters")?;
    let grad_tol = sect.get_f64("grad_tol")?;

    let model: GaussianJointModel = match model_spec.as_str() {
        "builtin:scalar" => GaussianJointModel::scalar(1.0, 1.0, 1.0, 1.0, 0.0)?,
        "builtin:random3" => random_regression_model(3, ctx.seed),
        "files" => {
            let need = |r: Option<&str>, key: &str| {
                r.map(str::to_string).ok_or_else(|| {
                    ConfigError(format!("model = files requires the `{key}` path"))
                })
            };
            let sx = need(sect.get_str("sigma_x"), "sigma_x")?;
            let sxy = need(sect.get_str("sigma_xy"), "sigma_xy")?;
            let sy = need(sect.get_str("sigma_y"), "sigma_y")?;
            let sxi = need(sect.get_str("sigma_xi"), "sigma_xi")?;
            let seta = need(sect.get_str("sigma_eta"), "sigma_eta")?;
            GaussianJointModel::new(
                read_matrix_file(sx)?,
                read_matrix_file(sxy)?,
                read_matrix_file(sy)?,
                read_matrix_file(sxi)?,
                read_matrix_file(seta)?,
            )?
        }
        other => {
            return Err(ConfigError(format!(
                "unknown model `{other}` (builtin:scalar, builtin:random3 or files)"
            ))
            .into())
        }
    };
    let d = sect.get_usize("d")?.unwrap_or_else(|| model.d());
    sect.finish()?;

    let mut opt = OptimizerConfig {
        seed: ctx.seed,
        ..OptimizerConfig::default()
    };
    if let Some(r) = restarts {
        opt.restarts = r;
    }
    if let Some(m) = max_iters {
        opt.max_iters = m;
    }
    if let Some(g) = grad_tol {
        opt.grad_tol = g;
    }

    let (points, _) = ib_frontier(&model, &betas, d, &opt)?;
    let rows: Vec<String> = points
        .iter()
        .map(|p| format!("{},{},{}", p.beta, p.complexity_nats, p.mse))
        .collect();
    let path = ctx.write_csv("ib_frontier.csv", "beta,complexity_nats,mse", &rows)?;
    println!("frontier written to {}", path.display());

    let unconverged: Vec<String> = points
        .iter()
        .filter(|p| !p.converged)
        .map(|p| p.beta.to_string())
        .collect();
    ctx.write_run_meta(
        "ib-frontier",
        &[
            ("model".into(), model_spec),
            ("betas".into(), format!("{betas:?}")),
            ("d".into(), d.to_string()),
            (
                "unconverged_betas".into(),
                if unconverged.is_empty() {
                    "none".into()
                } else {
                    unconverged.join(",")
                },
            ),
        ],
    )
}
