//! Subcommand implementations. Each one resolves its inputs from the
//! configuration, runs the corresponding core workflow, and writes artifacts
//! with an embedded config echo.

use std::path::PathBuf;

use coevo_core::abm::{simulate as abm_simulate, PopulationState};
use coevo_core::analysis::{detect_limit_cycle, equilibria, CycleOptions, CycleReport};
use coevo_core::control::{compare_policies, ControlPolicy, PolicyKind, PolicyTarget};
use coevo_core::meanfield::{integrate_node, integrate_planar, NodeProbabilities, Tolerances};
use coevo_core::model::{validate_assumptions, BehaviorVector};

use crate::config::Config;
use crate::output::{csv_body, fmt_float, header_lines, write_text};
use crate::{pool, svg, CliError};

fn out_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    Ok(PathBuf::from(cfg.string("out.dir")?))
}

fn tolerances(cfg: &Config) -> Result<Tolerances<f64>, CliError> {
    Tolerances::new(cfg.f64("tol.rel")?, cfg.f64("tol.abs")?)
        .map_err(|e| CliError::config(e.to_string()))
}

fn time_grid(cfg: &Config, horizon: f64) -> Result<Vec<f64>, CliError> {
    let points = cfg.usize("grid.points")?;
    if points < 2 {
        return Err(CliError::config(
            "config key `grid.points`: need at least 2",
        ));
    }
    Ok((0..points)
        .map(|k| horizon * k as f64 / (points - 1) as f64)
        .collect())
}

fn cycle_options(cfg: &Config) -> Result<CycleOptions<f64>, CliError> {
    let floor = cfg.f64("cycle.interior_floor")?;
    Ok(CycleOptions {
        section_x: cfg.f64_opt("cycle.section_x")?,
        crossing_tol: cfg.f64("cycle.tolerance")?,
        max_crossings: cfg.usize("cycle.max_crossings")?,
        horizon: cfg.f64("cycle.horizon")?,
        interior_floor: if floor == 0.0 { None } else { Some(floor) },
        tol: tolerances(cfg)?,
    })
}

fn warn_if_assumptions_violated(cfg: &Config) -> Result<(), CliError> {
    let report = validate_assumptions(&cfg.params()?);
    if !report.both_hold() {
        for msg in &report.messages {
            eprintln!("warning: {msg} (stability results do not apply)");
        }
    }
    Ok(())
}

pub fn simulate(cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    warn_if_assumptions_violated(cfg)?;
    let params = cfg.params()?;
    let horizon = cfg.f64("horizon")?;
    let grid = time_grid(cfg, horizon)?;
    let dir = out_dir(cfg)?;
    let tol = tolerances(cfg)?;

    match cfg.string("layer")? {
        "planar" => {
            let traj = integrate_planar(&params, &cfg.planar_init()?, horizon, tol)?;
            let mut rows = Vec::with_capacity(grid.len());
            for &t in &grid {
                let st = traj.planar_at(t)?;
                rows.push(vec![t, st.x(), st.eps()]);
            }
            let body = csv_body(&["t".into(), "x".into(), "epsilon".into()], &rows);
            Ok(vec![write_text(
                &dir,
                "trajectory.csv",
                "simulate",
                cfg,
                &body,
            )?])
        }
        "node-mf" => {
            let g = cfg.graph()?;
            let n = g.len();
            let init = NodeProbabilities::uniform(n, cfg.f64("init.x")?)
                .map_err(|e| CliError::config(format!("config key `init.x`: {e}")))?;
            let traj = integrate_node(&g, &params, &init, cfg.f64("init.epsilon")?, horizon, tol)?;
            let mut columns = vec!["t".to_string(), "x".to_string(), "epsilon".to_string()];
            let with_marginals = n <= 50;
            if with_marginals {
                columns.extend((0..n).map(|i| format!("p1_{i}")));
            }
            let mut rows = Vec::with_capacity(grid.len());
            for &t in &grid {
                let y = traj.sample(t)?;
                let mean = y[..n].iter().sum::<f64>() / n as f64;
                let mut row = vec![t, mean, y[n]];
                if with_marginals {
                    row.extend_from_slice(&y[..n]);
                }
                rows.push(row);
            }
            let body = csv_body(&columns, &rows);
            Ok(vec![write_text(
                &dir,
                "trajectory.csv",
                "simulate",
                cfg,
                &body,
            )?])
        }
        "abm" => {
            let g = cfg.graph()?;
            let n = g.len();
            let behavior = initial_behavior(cfg, n)?;
            let eps0 = cfg.f64("init.epsilon")?;
            let seed = cfg.u64("seed")?;
            let replicas = cfg.usize("replicas")?.max(1);

            let runs = pool::run_indexed(replicas, pool::thread_count(), |r| {
                let init = PopulationState::new(0.0, behavior.clone(), eps0)?;
                let traj = abm_simulate(&g, &params, &init, horizon, seed + r as u64)?;
                let mut rows = Vec::with_capacity(grid.len());
                for &t in &grid {
                    rows.push(vec![
                        t,
                        traj.fraction_responsible_at(t)?,
                        traj.impact_at(t)?,
                    ]);
                }
                Ok::<_, coevo_core::CoreError>(rows)
            });

            let columns = ["t".to_string(), "xbar1".to_string(), "epsilon".to_string()];
            let mut paths = Vec::new();
            for (r, rows) in runs.into_iter().enumerate() {
                let rows = rows.map_err(|e| {
                    CliError::runtime(format!("replica {r} (seed {}): {e}", seed + r as u64))
                })?;
                let name = if replicas == 1 {
                    "trajectory.csv".to_string()
                } else {
                    format!("trajectory_r{r:03}.csv")
                };
                paths.push(write_text(
                    &dir,
                    &name,
                    "simulate",
                    cfg,
                    &csv_body(&columns, &rows),
                )?);
            }
            Ok(paths)
        }
        other => Err(CliError::config(format!(
            "config key `layer`: `{other}` is not one of planar|node-mf|abm"
        ))),
    }
}

fn initial_behavior(cfg: &Config, n: usize) -> Result<BehaviorVector, CliError> {
    if let Some(bits) = cfg.raw("init.bits") {
        let parsed: Result<Vec<u8>, ()> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(()),
            })
            .collect();
        let parsed = parsed
            .map_err(|_| CliError::config("config key `init.bits`: must be a string of 0/1"))?;
        if parsed.len() != n {
            return Err(CliError::config(format!(
                "config key `init.bits`: length {} does not match graph.n = {n}",
                parsed.len()
            )));
        }
        return Ok(BehaviorVector::new(parsed).expect("bits are binary"));
    }
    // Deterministic prefix assignment from the fraction.
    let x = cfg.f64("init.x")?;
    if !(0.0..=1.0).contains(&x) {
        return Err(CliError::config("config key `init.x`: must be in [0, 1]"));
    }
    let ones = (x * n as f64).round() as usize;
    let mut bits = vec![0u8; n];
    bits.iter_mut().take(ones.min(n)).for_each(|b| *b = 1);
    Ok(BehaviorVector::new(bits).expect("bits are binary"))
}

pub fn equilibria_cmd(cfg: &Config) -> Result<PathBuf, CliError> {
    let reports = equilibria(&cfg.params()?)?;
    let mut body = String::new();
    for (k, r) in reports.iter().enumerate() {
        body.push_str(&format!(
            "equilibrium {}: x = {}, epsilon = {}\n",
            k + 1,
            fmt_float(r.location.x()),
            fmt_float(r.location.eps())
        ));
        body.push_str(&format!(
            "  eigenvalues: {} {} i, {} {} i\n",
            fmt_float(r.eigenvalues.0.re),
            fmt_signed_imag(r.eigenvalues.0.im),
            fmt_float(r.eigenvalues.1.re),
            fmt_signed_imag(r.eigenvalues.1.im),
        ));
        body.push_str(&format!("  class: {}\n", r.class));
    }
    write_text(&out_dir(cfg)?, "equilibria.txt", "equilibria", cfg, &body)
}

fn fmt_signed_imag(im: f64) -> String {
    if im < 0.0 {
        format!("- {}", fmt_float(-im))
    } else {
        format!("+ {}", fmt_float(im))
    }
}

fn cycle_report_body(report: &CycleReport<f64>) -> String {
    let mut body = String::new();
    body.push_str(&format!("converged = {}\n", report.converged));
    body.push_str(&format!("crossings = {}\n", report.crossings.len()));
    match report.period {
        Some(p) => body.push_str(&format!("period = {}\n", fmt_float(p))),
        None => body.push_str("period = nan\n"),
    }
    if let Some(&(_, eps)) = report.crossings.last() {
        body.push_str(&format!("section_eps = {}\n", fmt_float(eps)));
    }
    body.push_str(&format!(
        "peak_eps = {} at t = {}\n",
        fmt_float(report.peak_eps_transient.1),
        fmt_float(report.peak_eps_transient.0)
    ));
    if let Some(amp) = &report.amplitude {
        body.push_str(&format!(
            "x_range = [{}, {}]\n",
            fmt_float(amp.x_min),
            fmt_float(amp.x_max)
        ));
        body.push_str(&format!(
            "eps_range = [{}, {}]\n",
            fmt_float(amp.eps_min),
            fmt_float(amp.eps_max)
        ));
    }
    body.push_str("crossing_table: t,eps\n");
    for (t, eps) in &report.crossings {
        body.push_str(&format!("{},{}\n", fmt_float(*t), fmt_float(*eps)));
    }
    body
}

pub fn cycle_cmd(cfg: &Config) -> Result<PathBuf, CliError> {
    let report = detect_limit_cycle(&cfg.params()?, &cfg.planar_init()?, &cycle_options(cfg)?)?;
    write_text(
        &out_dir(cfg)?,
        "cycle.txt",
        "cycle",
        cfg,
        &cycle_report_body(&report),
    )
}

fn parse_policies(cfg: &Config) -> Result<Vec<ControlPolicy<f64>>, CliError> {
    let mut policies = Vec::new();
    for idx in 1.. {
        let prefix = format!("policy.{idx}.");
        let kind_key = format!("{prefix}kind");
        let Some(kind) = cfg.raw(&kind_key) else {
            break;
        };
        let target = match cfg.raw(&format!("{prefix}target")).unwrap_or("alpha") {
            "alpha" => PolicyTarget::Alpha,
            "sigma" => PolicyTarget::Sigma,
            other => {
                return Err(CliError::config(format!(
                    "config key `{prefix}target`: `{other}` is not alpha|sigma"
                )))
            }
        };
        let base = cfg.f64(&format!("{prefix}base"))?;
        let gain = cfg.f64_opt(&format!("{prefix}gain"))?.unwrap_or(0.0);
        let kind = match kind {
            "constant" => PolicyKind::Constant,
            "linear" => PolicyKind::Linear,
            "power" => PolicyKind::Power {
                exponent: cfg.f64(&format!("{prefix}exponent"))?,
            },
            other => {
                return Err(CliError::config(format!(
                    "config key `{kind_key}`: `{other}` is not constant|linear|power"
                )))
            }
        };
        policies.push(
            ControlPolicy::new(target, kind, base, gain)
                .map_err(|e| CliError::config(format!("policy {idx}: {e}")))?,
        );
    }
    if policies.is_empty() {
        return Err(CliError::config(
            "config key `policy.1.kind`: missing (define at least one policy)",
        ));
    }
    Ok(policies)
}

pub fn control_cmd(cfg: &Config) -> Result<PathBuf, CliError> {
    let policies = parse_policies(cfg)?;
    let comparison = compare_policies(
        &cfg.params()?,
        &cfg.planar_init()?,
        &policies,
        &cycle_options(cfg)?,
    )?;
    let mut body = String::new();
    for (k, outcome) in comparison.outcomes.iter().enumerate() {
        let p = &outcome.policy;
        let kind = match p.kind() {
            PolicyKind::Constant => "constant".to_string(),
            PolicyKind::Linear => "linear".to_string(),
            PolicyKind::Power { exponent } => format!("power(exponent={exponent})"),
        };
        let target = match p.target() {
            PolicyTarget::Alpha => "alpha",
            PolicyTarget::Sigma => "sigma",
        };
        body.push_str(&format!(
            "policy {}: target={target} kind={kind} base={} gain={}\n",
            k + 1,
            p.base(),
            p.gain()
        ));
        body.push_str(&format!(
            "  peak_eps = {} at t = {}\n",
            fmt_float(outcome.report.peak_eps_transient.1),
            fmt_float(outcome.report.peak_eps_transient.0)
        ));
        body.push_str(&format!("  converged = {}\n", outcome.report.converged));
        match outcome.report.period {
            Some(period) => body.push_str(&format!("  period = {}\n", fmt_float(period))),
            None => body.push_str("  period = nan\n"),
        }
        if let Some(amp) = &outcome.report.amplitude {
            body.push_str(&format!(
                "  eps_range = [{}, {}]\n",
                fmt_float(amp.eps_min),
                fmt_float(amp.eps_max)
            ));
        }
        body.push_str(&format!(
            "  assumptions_violated_transiently = {}\n",
            outcome.a2_violated_transiently
        ));
    }
    write_text(&out_dir(cfg)?, "control.txt", "control", cfg, &body)
}

fn parse_sweep_values(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    if let Some(rest) = raw.strip_prefix("lin:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::config(format!(
                "config key `{key}`: expected lin:lo:hi:count"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::config(format!("config key `{key}`: bad lower bound")))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::config(format!("config key `{key}`: bad upper bound")))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| CliError::config(format!("config key `{key}`: bad count")))?;
        if count < 2 {
            return Err(CliError::config(format!("config key `{key}`: count >= 2")));
        }
        Ok((0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect())
    } else {
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    CliError::config(format!("config key `{key}`: `{s}` is not a number"))
                })
            })
            .collect()
    }
}

fn check_sweep_key(key: &str) -> Result<(), CliError> {
    let numeric =
        key.starts_with("model.") || key.starts_with("init.") || key.starts_with("cycle.");
    if numeric && key != "init.bits" {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "config key `sweep.param`: `{key}` is not a sweepable numeric key (model.*, init.*, cycle.*)"
        )))
    }
}

pub fn sweep_cmd(cfg: &Config) -> Result<PathBuf, CliError> {
    let param1 = cfg.string("sweep.param")?.to_string();
    check_sweep_key(&param1)?;
    let values1 = parse_sweep_values("sweep.values", cfg.string("sweep.values")?)?;
    let second = match cfg.raw("sweep.param2") {
        Some(p) => {
            check_sweep_key(p)?;
            Some((
                p.to_string(),
                parse_sweep_values("sweep.values2", cfg.string("sweep.values2")?)?,
            ))
        }
        None => None,
    };

    let mut cells: Vec<Vec<(String, f64)>> = Vec::new();
    match &second {
        None => {
            for &v in &values1 {
                cells.push(vec![(param1.clone(), v)]);
            }
        }
        Some((param2, values2)) => {
            for &v1 in &values1 {
                for &v2 in values2 {
                    cells.push(vec![(param1.clone(), v1), (param2.clone(), v2)]);
                }
            }
        }
    }

    let results = pool::run_indexed(cells.len(), pool::thread_count(), |k| {
        let overrides: Vec<(String, String)> = cells[k]
            .iter()
            .map(|(key, v)| (key.clone(), format!("{v:.17e}")))
            .collect();
        let cell_cfg = cfg.with_overrides(&overrides);
        let run = || -> Result<CycleReport<f64>, CliError> {
            let report = detect_limit_cycle(
                &cell_cfg.params()?,
                &cell_cfg.planar_init()?,
                &cycle_options(&cell_cfg)?,
            )?;
            Ok(report)
        };
        run()
    });

    let mut columns: Vec<String> = cells[0].iter().map(|(key, _)| key.clone()).collect();
    columns.extend(
        [
            "converged",
            "period",
            "section_eps",
            "peak_t",
            "peak_eps",
            "x_min",
            "x_max",
            "eps_min",
            "eps_max",
            "error",
        ]
        .map(String::from),
    );

    let mut body = String::new();
    body.push_str(&columns.join(","));
    body.push('\n');
    for (cell, result) in cells.iter().zip(results) {
        let mut fields: Vec<String> = cell.iter().map(|(_, v)| fmt_float(*v)).collect();
        match result {
            Ok(report) => {
                fields.push(if report.converged {
                    "1".into()
                } else {
                    "0".into()
                });
                fields.push(report.period.map(fmt_float).unwrap_or("nan".into()));
                fields.push(
                    report
                        .crossings
                        .last()
                        .map(|&(_, e)| fmt_float(e))
                        .unwrap_or("nan".into()),
                );
                fields.push(fmt_float(report.peak_eps_transient.0));
                fields.push(fmt_float(report.peak_eps_transient.1));
                match &report.amplitude {
                    Some(a) => {
                        fields.push(fmt_float(a.x_min));
                        fields.push(fmt_float(a.x_max));
                        fields.push(fmt_float(a.eps_min));
                        fields.push(fmt_float(a.eps_max));
                    }
                    None => fields.extend((0..4).map(|_| "nan".to_string())),
                }
                fields.push(String::new());
            }
            Err(e) => {
                fields.extend((0..9).map(|_| "nan".to_string()));
                fields.push(e.to_string().replace(',', ";"));
            }
        }
        body.push_str(&fields.join(","));
        body.push('\n');
    }
    write_text(&out_dir(cfg)?, "sweep.csv", "sweep", cfg, &body)
}

pub fn plot_cmd(cfg: &Config) -> Result<PathBuf, CliError> {
    let input = cfg.string("plot.input")?;
    let text = std::fs::read_to_string(input).map_err(|e| {
        CliError::config(format!("config key `plot.input`: cannot read {input}: {e}"))
    })?;

    let mut header: Option<Vec<String>> = None;
    let mut data: Vec<Vec<f64>> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row =
            row.map_err(|_| CliError::runtime(format!("{input}: non-numeric data row `{line}`")))?;
        data.push(row);
    }
    let header = header.ok_or_else(|| CliError::runtime(format!("{input}: no header row")))?;
    if data.is_empty() {
        return Err(CliError::runtime(format!("{input}: no data rows")));
    }

    let column = |name: &str| -> Option<usize> { header.iter().position(|h| h == name) };
    let series_svg = match cfg.string("plot.kind")? {
        "line" => {
            let series: Vec<svg::Series> = (1..header.len())
                .map(|c| svg::Series {
                    label: &header[c],
                    points: data.iter().map(|row| (row[0], row[c])).collect(),
                })
                .collect();
            svg::render(&series, &header[0], "value", &header_lines("plot", cfg))
        }
        "phase" => {
            let xc = column("x")
                .or_else(|| column("xbar1"))
                .ok_or_else(|| CliError::runtime(format!("{input}: no x/xbar1 column")))?;
            let ec = column("epsilon")
                .ok_or_else(|| CliError::runtime(format!("{input}: no epsilon column")))?;
            let series = [svg::Series {
                label: "trajectory",
                points: data.iter().map(|row| (row[xc], row[ec])).collect(),
            }];
            svg::render(&series, &header[xc], "epsilon", &header_lines("plot", cfg))
        }
        other => {
            return Err(CliError::config(format!(
                "config key `plot.kind`: `{other}` is not line|phase"
            )))
        }
    };

    let dir = out_dir(cfg)?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join("plot.svg");
    std::fs::write(&path, series_svg)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
