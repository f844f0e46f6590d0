//! One function per subcommand. Each returns the files to write and a report.

use std::fmt::Write as _;

use ddhit::experiment::{
    compare_engines, run_clt_experiment, run_mdp_experiment, run_replicas, Engine, ReplicaBatch,
};
use ddhit::fluid::{solve_fluid, tau_estimates, tau_of_r};
use ddhit::oracle::{exact_survival, TruncatedChain};
use ddhit::rates::{path_rate_i, variational_minimum, PathQuadrature, RateProfile, DEFAULT_EXTREMAL_KNOTS};
use ddhit::stats::dkw_epsilon;

use crate::config::FileConfig;
use crate::output::{num, Csv, Outputs};
use crate::{core, CliError};

pub fn fluid(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let model = cfg.model.build().map_err(core)?;
    let r = cfg.experiment.r;
    let path = solve_fluid(&model, r, cfg.fluid.tol).map_err(core)?;
    // The solver steps past r; the output stops at the crossing.
    let tau = path.event_time(r).unwrap_or_else(|| path.horizon());
    let rows: Vec<(f64, f64)> = if cfg.fluid.points > 0 {
        let m = cfg.fluid.points.max(2);
        (0..m)
            .map(|k| {
                let t = tau * k as f64 / (m - 1) as f64;
                (t, path.value(t))
            })
            .collect()
    } else {
        let mut nodes: Vec<(f64, f64)> = path.samples(None).into_iter().filter(|&(t, _)| t < tau).collect();
        nodes.push((tau, path.value(tau)));
        nodes
    };
    let mut csv = Csv::new("fluid.csv", &["t", "x"]);
    for &(t, x) in &rows {
        csv.row(&[num(t), num(x)]);
    }
    Ok(Outputs {
        report: format!(
            "fluid path from x = {} to r = {r}: {} rows, tau_r {}\n",
            model.start(),
            rows.len(),
            num(tau)
        ),
        files: vec![csv],
    })
}

pub fn tau(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let model = cfg.model.build().map_err(core)?;
    let est = tau_estimates(&model, cfg.experiment.r, cfg.fluid.tol).map_err(core)?;
    Ok(Outputs {
        report: format!(
            "tau_r {:.6}\nquadrature {}\nevent {}\nagree {}\n",
            est.quadrature,
            num(est.quadrature),
            num(est.event),
            est.agree()
        ),
        files: Vec::new(),
    })
}

pub fn rate(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let model = cfg.model.build().map_err(core)?;
    let r = cfg.experiment.r;
    let profile = RateProfile::new(&model, r, cfg.fluid.tol).map_err(core)?;
    let sigma2 = profile.clt_variance(r).map_err(core)?;
    let mut csv = Csv::new("rate.csv", &["t", "rate"]);
    for &t in &cfg.experiment.t_grid {
        csv.row(&[num(t), num(profile.mdp_rate(r, t).map_err(core)?)]);
    }
    Ok(Outputs {
        report: format!(
            "tau_r {}\nsigma2 {}\n{}",
            num(tau_of_r(&model, r, cfg.fluid.tol).map_err(core)?),
            num(sigma2),
            csv.text()
        ),
        files: vec![csv],
    })
}

pub fn check(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let model = cfg.model.build().map_err(core)?;
    let c = &cfg.check;
    let r = cfg.experiment.r;
    let profile = RateProfile::new(&model, r, cfg.fluid.tol).map_err(core)?;
    let mut csv = Csv::new(
        "check.csv",
        &["check", "param", "a", "value", "reference", "relerr", "pass"],
    );
    let mut failures = Vec::new();
    let x = model.start();
    for k in 1..=c.levels {
        let level = x + (r - x) * k as f64 / c.levels as f64;
        let id = profile.check_eq37_identity(level).map_err(core)?;
        let pass = id.relerr <= c.identity_tol;
        if !pass {
            failures.push(format!("identity at r = {level}"));
        }
        csv.row(&[
            "identity".into(),
            num(level),
            String::new(),
            num(id.lhs),
            num(id.rhs),
            num(id.relerr),
            pass.to_string(),
        ]);
    }
    for k in 0..c.paths {
        let t_end = profile.horizon() * (k + 1) as f64 / (c.paths + 1) as f64;
        let a = if k % 2 == 0 { 1.0 } else { -1.0 } * (0.25 + 0.5 * k as f64);
        let vm = variational_minimum(&profile, t_end, a, DEFAULT_EXTREMAL_KNOTS).map_err(core)?;
        let i = path_rate_i(&profile, &vm.path, t_end, PathQuadrature::default())
            .map_err(core)?
            .value;
        let relerr = ((i - vm.value) / vm.value).abs();
        let pass = relerr <= c.variational_tol;
        if !pass {
            failures.push(format!("variational at T = {t_end}, a = {a}"));
        }
        csv.row(&[
            "variational".into(),
            num(t_end),
            num(a),
            num(i),
            num(vm.value),
            num(relerr),
            pass.to_string(),
        ]);
    }
    if !failures.is_empty() {
        return Err(CliError::CheckFailed(failures.join("; ")));
    }
    Ok(Outputs {
        report: format!("{} identity and {} variational checks passed\n", c.levels, c.paths),
        files: vec![csv],
    })
}

fn replica_csv(name: &str, batch: &ReplicaBatch) -> Csv {
    let mut csv = Csv::new(name, &["replica", "hit", "tau", "events", "censor_reason"]);
    for (i, s) in batch.samples.iter().enumerate() {
        csv.row(&[
            i.to_string(),
            u8::from(s.hit).to_string(),
            num(s.tau),
            s.events.to_string(),
            s.censor_reason.as_str().to_string(),
        ]);
    }
    csv
}

fn replica_report(batch: &ReplicaBatch) -> String {
    let hits: Vec<f64> = batch.samples.iter().filter(|s| s.hit).map(|s| s.tau).collect();
    let mean = hits.iter().sum::<f64>() / hits.len().max(1) as f64;
    format!(
        "{} replicas, {} hits, mean hitting time {}, tau_r {}\n",
        batch.samples.len(),
        hits.len(),
        num(mean),
        num(batch.tau_r)
    )
}

pub fn simulate(cfg: &FileConfig, engine: Engine) -> Result<Outputs, CliError> {
    let ecfg = cfg.experiment_config();
    let model = ecfg.model.build().map_err(core)?;
    let batch = run_replicas(&ecfg, &model, engine).map_err(core)?;
    let name = match engine {
        Engine::Ssa => "simulate.csv",
        Engine::Diffusion => "diffusion.csv",
    };
    Ok(Outputs {
        report: replica_report(&batch),
        files: vec![replica_csv(name, &batch)],
    })
}

pub fn oracle(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let o = &cfg.oracle;
    let model = cfg.model.build().map_err(core)?;
    let r = cfg.experiment.r;
    let chain = TruncatedChain::new(&model, o.n, r, o.absorb_zero).map_err(core)?;
    let t_end = match o.t_end {
        Some(t) => t,
        None => 4.0 * tau_of_r(&model, r, cfg.fluid.tol).map_err(core)?,
    };
    if o.points < 2 || !(t_end > 0.0) {
        return Err(CliError::Config("oracle grid needs points >= 2 and t_end > 0".into()));
    }
    let grid: Vec<f64> = (0..o.points)
        .map(|k| t_end * k as f64 / (o.points - 1) as f64)
        .collect();
    let start = (model.start() * o.n as f64).round() as i64;
    let exact = exact_survival(&chain, start, &grid).map_err(core)?;

    let mut ecfg = cfg.experiment_config();
    ecfg.n = o.n;
    ecfg.replicas = o.replicas;
    let batch = run_replicas(&ecfg, &model, Engine::Ssa).map_err(core)?;
    let m = batch.samples.len() as f64;
    let band = dkw_epsilon(o.replicas, o.dkw_alpha);

    let mut csv = Csv::new("oracle.csv", &["t", "exact", "empirical", "band"]);
    let mut gap: f64 = 0.0;
    for (&t, &p) in grid.iter().zip(&exact) {
        let emp = batch.samples.iter().filter(|s| !s.hit || s.tau > t).count() as f64 / m;
        gap = gap.max((emp - p).abs());
        csv.row(&[num(t), num(p), num(emp), num(band)]);
    }
    let mut report = String::new();
    let _ = writeln!(
        report,
        "n = {}, {} replicas: largest survival gap {} against DKW band {} (within band: {})",
        o.n,
        o.replicas,
        num(gap),
        num(band),
        gap <= band
    );
    Ok(Outputs {
        report,
        files: vec![csv],
    })
}

pub fn mdp(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let curve = run_mdp_experiment(&cfg.experiment_config()).map_err(core)?;
    let mut main = Csv::new(
        "mdp.csv",
        &[
            "t",
            "upper_count",
            "lower_count",
            "upper_est",
            "lower_est",
            "band_lo",
            "band_hi",
            "rate",
        ],
    );
    let mut bands = Csv::new(
        "mdp_bands.csv",
        &[
            "t",
            "upper_count",
            "lower_count",
            "upper_est",
            "lower_est",
            "upper_band_lo",
            "upper_band_hi",
            "lower_band_lo",
            "lower_band_hi",
            "rate",
        ],
    );
    for row in &curve.rows {
        main.row(&[
            num(row.t),
            row.upper_count.to_string(),
            row.lower_count.to_string(),
            num(row.upper_est),
            num(row.lower_est),
            num(row.upper_band.0),
            num(row.upper_band.1),
            num(row.rate),
        ]);
        bands.row(&[
            num(row.t),
            row.upper_count.to_string(),
            row.lower_count.to_string(),
            num(row.upper_est),
            num(row.lower_est),
            num(row.upper_band.0),
            num(row.upper_band.1),
            num(row.lower_band.0),
            num(row.lower_band.1),
            num(row.rate),
        ]);
    }
    Ok(Outputs {
        report: format!(
            "{} engine, n = {}, a_n = {}, m = {}, tau_r = {}, censored fraction {}\n",
            curve.engine.as_str(),
            curve.n,
            num(curve.a_n),
            curve.m,
            num(curve.tau_r),
            num(curve.censored_fraction)
        ),
        files: vec![main, bands],
    })
}

pub fn clt(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let s = run_clt_experiment(&cfg.experiment_config()).map_err(core)?;
    let mut csv = Csv::new(
        "clt.csv",
        &[
            "tau_r",
            "m",
            "hits",
            "sample_mean",
            "standard_error",
            "sample_var_scaled",
            "predicted_var",
            "anderson_darling",
        ],
    );
    csv.row(&[
        num(s.tau_r),
        s.m.to_string(),
        s.hits.to_string(),
        num(s.sample_mean),
        num(s.standard_error),
        num(s.sample_var_scaled),
        num(s.predicted_var),
        num(s.anderson_darling),
    ]);
    Ok(Outputs {
        report: format!(
            "mean {} (tau_r {}, se {})\nscaled variance {} (predicted {})\nanderson_darling {}\n",
            num(s.sample_mean),
            num(s.tau_r),
            num(s.standard_error),
            num(s.sample_var_scaled),
            num(s.predicted_var),
            num(s.anderson_darling)
        ),
        files: vec![csv],
    })
}

pub fn compare(cfg: &FileConfig) -> Result<Outputs, CliError> {
    let cmp = compare_engines(&cfg.experiment_config()).map_err(core)?;
    let mut csv = Csv::new(
        "compare.csv",
        &[
            "t",
            "ssa_upper_count",
            "ssa_upper_est",
            "ssa_band_lo",
            "ssa_band_hi",
            "diffusion_upper_count",
            "diffusion_upper_est",
            "diffusion_band_lo",
            "diffusion_band_hi",
            "rate",
            "comparable",
            "overlap",
        ],
    );
    for row in &cmp.rows {
        csv.row(&[
            num(row.t),
            row.ssa.upper_count.to_string(),
            num(row.ssa.upper_est),
            num(row.ssa.upper_band.0),
            num(row.ssa.upper_band.1),
            row.diffusion.upper_count.to_string(),
            num(row.diffusion.upper_est),
            num(row.diffusion.upper_band.0),
            num(row.diffusion.upper_band.1),
            num(row.ssa.rate),
            row.comparable.to_string(),
            row.bands_overlap.to_string(),
        ]);
    }
    Ok(Outputs {
        report: format!(
            "{} comparable grid points, engines consistent: {}\n",
            cmp.rows.iter().filter(|r| r.comparable).count(),
            cmp.consistent()
        ),
        files: vec![csv],
    })
}
