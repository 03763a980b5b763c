//! Execution of a resolved [`ExperimentSpec`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use dslt::chaos::clt_experiment_with_paths;
use dslt::estimator::McOptions;
use dslt::fbm_sim::{sample_paths, write_paths, write_paths_csv, ModelConfig};
use dslt::gaussian_moments::{sample_lemma_bounds, sample_region_bounds, RegionCase};
use dslt::regularity::{holder_fit, increment_samples};
use dslt::second_moment::{existence_regime, second_moment_quadrature, QuadResult};

use crate::error::CliError;
use crate::output::{csv_document, csv_preamble, emit, json_document, sibling};
use crate::spec::{ExperimentSpec, Format, SubcommandKind};

pub fn run(spec: &ExperimentSpec) -> Result<(), CliError> {
    match spec.subcommand {
        SubcommandKind::Simulate => simulate(spec),
        SubcommandKind::Estimate => estimate(spec),
        SubcommandKind::SecondMoment => second_moment(spec),
        SubcommandKind::Clt => clt(spec),
        SubcommandKind::Holder => holder(spec),
        SubcommandKind::BoundsCheck => bounds_check(spec),
    }
}

fn cfg(spec: &ExperimentSpec) -> &ModelConfig {
    spec.cfg.as_ref().expect("resolved specs carry a model for this subcommand")
}

fn out_path(spec: &ExperimentSpec) -> Option<&Path> {
    spec.output.as_deref().map(Path::new)
}

/// A warning (not an error) when the L² limit is not known to exist.
fn regime_warnings(cfg: &ModelConfig) -> Vec<String> {
    let v = existence_regime(cfg.hurst, &cfg.k, cfg.dim);
    let mut w = Vec::new();
    if !v.l2_exists {
        w.push(format!(
            "H = {} is outside the L2 existence regime H < {:.6} for k = {:?}, d = {}; results need not converge as eps -> 0",
            cfg.hurst, v.l2_threshold, cfg.k, cfg.dim
        ));
    }
    for msg in &w {
        eprintln!("warning: {msg}");
    }
    w
}

fn simulate(spec: &ExperimentSpec) -> Result<(), CliError> {
    let cfg = cfg(spec);
    let (n_paths, n_steps) = (spec.n_paths.unwrap(), spec.n_steps.unwrap());
    let batch = sample_paths(cfg, n_steps, n_paths, spec.seed)?;
    match spec.format {
        Format::Csv => {
            let mut body = csv_preamble(spec, &[])?.into_bytes();
            write_paths_csv(&batch, &mut body)?;
            emit(out_path(spec), &body)
        }
        Format::Json => {
            let len = (n_steps + 1) * cfg.dim;
            let paths: Vec<&[f64]> = batch.values.chunks(len).collect();
            let result = json!({
                "n_paths": n_paths,
                "n_steps": n_steps,
                "dim": cfg.dim,
                "dt": batch.dt,
                "layout": "node-major, dim values per node",
                "paths": paths,
            });
            emit(out_path(spec), &json_document(spec, &[], result)?)
        }
        Format::Bin => {
            let path = out_path(spec).expect("checked when resolving");
            let mut body = Vec::new();
            write_paths(&batch, &mut body)?;
            emit(Some(path), &body)?;
            let manifest = json!({ "file": path.display().to_string(), "bytes": body.len() });
            emit(Some(&sibling(path, "json")), &json_document(spec, &[], manifest)?)
        }
    }
}

fn estimate(spec: &ExperimentSpec) -> Result<(), CliError> {
    let cfg = cfg(spec);
    let warnings = regime_warnings(cfg);
    let n_steps = spec.n_steps.unwrap();
    let opts = McOptions { antithetic: spec.antithetic.unwrap(), coarse: n_steps % 2 == 0 && n_steps >= 4 };
    let y = spec.y.as_deref().unwrap();
    let vals = dslt::estimator::path_values(cfg, y, spec.n_paths.unwrap(), n_steps, spec.seed, opts)?;
    let moment = dslt::estimator::moment_from_values(&vals, spec.order.unwrap(), spec.seed, opts.antithetic)?;
    match spec.format {
        Format::Csv => {
            let rows = vals.iter().map(|v| format!("{},{},{}", v.path_id, v.value, v.mirror));
            emit(out_path(spec), &csv_document(spec, &warnings, "path_id,value,mirror", rows)?)
        }
        _ => emit(out_path(spec), &json_document(spec, &warnings, &moment)?),
    }
}

/// Region entries carry the `r ↔ r'` factor 2, so they add up to the total.
fn doubled(r: &QuadResult) -> serde_json::Value {
    json!({ "value": 2.0 * r.value, "error": 2.0 * r.abs_error_estimate, "n_evals": r.n_evals })
}

fn second_moment(spec: &ExperimentSpec) -> Result<(), CliError> {
    let cfg = cfg(spec);
    let warnings = regime_warnings(cfg);
    let sm = second_moment_quadrature(cfg, spec.eta.unwrap(), spec.rel_tol.unwrap())?;
    match spec.format {
        Format::Csv => {
            let rows = RegionCase::ALL
                .iter()
                .map(|&c| {
                    let r = sm.region(c);
                    format!("{},{},{},{}", c.name(), 2.0 * r.value, 2.0 * r.abs_error_estimate, r.n_evals)
                })
                .chain(std::iter::once(format!(
                    "total,{},{},{}",
                    sm.total.value, sm.total.abs_error_estimate, sm.total.n_evals
                )))
                .collect::<Vec<_>>();
            emit(out_path(spec), &csv_document(spec, &warnings, "region,value,error,n_evals", rows)?)
        }
        _ => {
            let per_region: BTreeMap<&str, serde_json::Value> =
                RegionCase::ALL.iter().map(|&c| (c.name(), doubled(sm.region(c)))).collect();
            let result = json!({
                "value": sm.total.value,
                "error": sm.total.abs_error_estimate,
                "per_region": per_region,
                "n_evals": sm.total.n_evals,
                "regime": sm.regime,
            });
            emit(out_path(spec), &json_document(spec, &warnings, result)?)
        }
    }
}

fn clt(spec: &ExperimentSpec) -> Result<(), CliError> {
    let cfg = cfg(spec);
    let ladder = spec.eps_ladder.as_deref().unwrap();
    let (report, values) = clt_experiment_with_paths(
        cfg.t,
        ladder,
        spec.n_paths.unwrap(),
        spec.n_steps.unwrap(),
        spec.seed,
        spec.rel_tol.unwrap(),
    )?;
    let rows = values.iter().map(|v| format!("{},{},{},{}", v.path_id, v.epsilon, v.value, v.mirror));
    let per_path = csv_document(spec, &[], "path_id,epsilon,value,mirror", rows)?;
    match spec.format {
        Format::Csv => {
            let rows = report.samples.iter().zip(&report.variance_ratios).zip(&report.first_chaos_ratios).map(
                |((s, q), c)| {
                    format!(
                        "{},{},{},{},{},{},{},{},{}",
                        s.epsilon,
                        q,
                        c,
                        s.mc_variance,
                        s.mc_variance_se,
                        s.discretization_tol,
                        s.skewness,
                        s.kurtosis_excess,
                        s.ks_statistic
                    )
                },
            );
            let header = "epsilon,quad_variance,first_chaos,mc_variance,mc_variance_se,discretization_tol,skewness,kurtosis_excess,ks_statistic";
            emit(out_path(spec), &csv_document(spec, &[], header, rows)?)?;
        }
        _ => emit(out_path(spec), &json_document(spec, &[], &report)?)?,
    }
    if let Some(p) = spec.paths_csv.as_deref() {
        emit(Some(Path::new(p)), &per_path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct HolderResult {
    #[serde(flatten)]
    fit: dslt::regularity::HolderFit,
    intercept: f64,
    epsilon: f64,
    note: &'static str,
}

fn holder(spec: &ExperimentSpec) -> Result<(), CliError> {
    let cfg = cfg(spec);
    let warnings = regime_warnings(cfg);
    let variable = spec.variable.unwrap();
    let samples = increment_samples(
        cfg,
        variable,
        spec.lags.as_deref().unwrap(),
        spec.n_paths.unwrap(),
        spec.n_steps.unwrap(),
        spec.seed,
    )?;
    let fit = holder_fit(&samples, spec.order.unwrap())?;
    let n = fit.moment_order as f64;
    let xs: Vec<f64> = fit.lags.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = fit.moments.iter().map(|m| m.ln()).collect();
    let intercept = dslt::stats::mean(&ys) - n * fit.slope * dslt::stats::mean(&xs);
    let result = HolderResult { fit, intercept, epsilon: cfg.epsilon, note: "exponent of the mollified functional at finite eps" };
    match spec.format {
        Format::Csv => {
            let mut doc = csv_preamble(spec, &warnings)?;
            doc.push_str(&format!(
                "# fit: slope = {}, r_squared = {}, intercept = {intercept}\nlag,moment,fitted_moment,log_residual\n",
                result.fit.slope, result.fit.r_squared
            ));
            for ((x, y), (l, m)) in xs.iter().zip(&ys).zip(result.fit.lags.iter().zip(&result.fit.moments)) {
                let fitted = intercept + n * result.fit.slope * x;
                doc.push_str(&format!("{l},{m},{},{}\n", fitted.exp(), y - fitted));
            }
            emit(out_path(spec), doc.as_bytes())
        }
        _ => emit(out_path(spec), &json_document(spec, &warnings, &result)?),
    }
}

fn bounds_check(spec: &ExperimentSpec) -> Result<(), CliError> {
    let (t, n, max_m) = (spec.t.unwrap(), spec.n_draws.unwrap(), spec.max_m.unwrap());
    let lemma = sample_lemma_bounds(n, max_m, spec.seed)?;
    let mut regions = Vec::new();
    for &h in spec.hurst_list.as_deref().unwrap() {
        for case in RegionCase::ALL {
            regions.push((case, h, sample_region_bounds(case, h, t, n, spec.seed)?));
        }
    }
    match spec.format {
        Format::Json => {
            let fold = |rs: &mut dyn Iterator<Item = f64>| {
                rs.fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| (lo.min(r), hi.max(r)))
            };
            let region_summary: Vec<_> = regions
                .iter()
                .map(|(case, h, s)| {
                    let (lo, hi) = fold(&mut s.iter().map(|x| x.ratio));
                    json!({ "case": case.name(), "H": h, "n": s.len(), "min_ratio": lo, "max_ratio": hi })
                })
                .collect();
            let lemma_summary: Vec<_> = (0..=max_m)
                .map(|m| {
                    let (lo, hi) = fold(&mut lemma.iter().filter(|s| s.m == m).map(|s| s.ratio));
                    json!({ "m": m, "n": lemma.iter().filter(|s| s.m == m).count(), "min_ratio": lo, "max_ratio": hi })
                })
                .collect();
            let result = json!({ "regions": region_summary, "pair_integral": lemma_summary });
            emit(out_path(spec), &json_document(spec, &[], result)?)
        }
        _ => {
            let rows = regions
                .iter()
                .flat_map(|(case, h, s)| {
                    s.iter().map(move |x| {
                        let g = x.gaps;
                        format!("{},{h},{};{};{},{},{},{}", case.name(), g.a, g.b, g.c, x.exact, x.bound, x.ratio)
                    })
                })
                .chain(lemma.iter().map(|x| {
                    format!("pair-m{},,{};{};{},{},{},{}", x.m, x.lambda, x.rho, x.mu, x.exact, x.bound, x.ratio)
                }))
                .collect::<Vec<_>>();
            emit(out_path(spec), &csv_document(spec, &[], "case,H,point,exact,bound,ratio", rows)?)
        }
    }
}
