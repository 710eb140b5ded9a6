//! One function per subcommand.

use condqed::conditional::{g2_free, simulate_capture_release, sweep_steps, TimeGrid};
use condqed::correlator::{histogram, normalize, stop_click_rate};
use condqed::model::derived_rates;
use condqed::oracle::{g2_of_tau, steady_density};
use condqed::steady_state::solve_amplitudes;
use condqed::trajectory::{self, Detector};
use condqed::SystemParams;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, Output, Report, Table};

fn params_report(report: &mut Report, p: &SystemParams) {
    report.add("g_mhz", p.g);
    report.add("n_atoms", p.n_atoms);
    report.add("kappa_mhz", p.kappa);
    report.add("gamma_prime_mhz", p.gamma_prime);
    report.add("epsilon_mhz", p.epsilon);
}

pub fn steady(cfg: &RunConfig, _out: &Output) -> Result<Report, CliError> {
    let p = cfg.system_params()?;
    let sol = solve_amplitudes(&p)?;
    let rates = derived_rates(&p)?;
    let s = sol.summary();
    let mut r = Report::default();
    params_report(&mut r, &p);
    r.add("lambda", s.lambda);
    r.add("zeta0", s.zeta0);
    r.add("theta0", s.theta0);
    r.add("g2_zero", s.g2_zero);
    r.add("c1", rates.c1);
    r.add("n0", rates.n0);
    // the drive calibration refers to the single-atom coupling
    let n0_physical = cfg.system.gamma.powi(2) / (3.0 * cfg.system.g.powi(2));
    r.add("n0_physical", n0_physical);
    r.add("n_over_n0_physical", s.lambda * s.lambda / n0_physical);
    r.add("vacuum_rabi_mhz", rates.vacuum_rabi);
    Ok(r)
}

fn series_rows(tau: &[f64], columns: &[&[f64]]) -> Vec<Vec<Cell>> {
    tau.iter()
        .enumerate()
        .map(|(i, &t)| std::iter::once(Cell::Num(t)).chain(columns.iter().map(|c| Cell::Num(c[i]))).collect())
        .collect()
}

pub fn g2(cfg: &RunConfig, out: &Output) -> Result<Report, CliError> {
    let p = cfg.system_params()?;
    let series = g2_free(&p, cfg.grid()?)?;
    let path = out.table(&Table {
        name: "g2_free",
        columns: vec!["tau_ns", "g2"],
        rows: series_rows(&series.tau_ns, &[&series.values]),
    })?;
    let mut r = Report::default();
    r.add("points", series.len() as u64);
    r.add("g2_zero", series.values[0]);
    r.add("file", path.display().to_string().as_str());
    Ok(r)
}

pub fn capture(cfg: &RunConfig, out: &Output) -> Result<Report, CliError> {
    let p = cfg.system_params()?;
    let (pulse, solution) = cfg.pulse(&p)?;
    let grid = cfg.grid()?;
    let fb = simulate_capture_release(&p, &pulse, grid)?;
    let free = g2_free(&p, grid)?;
    let path = out.table(&Table {
        name: "capture",
        columns: vec!["tau_ns", "g2_feedback", "g2_free"],
        rows: series_rows(&fb.tau_ns, &[&fb.values, &free.values]),
    })?;
    out.document(
        "capture_solution",
        &json!({ "config": out.config, "capture": solution, "pulse": pulse }),
    )?;
    let mut r = Report::default();
    if let Some(c) = solution {
        r.add("t_capture_ns", c.t_capture_ns);
        r.add("zeta_at_t", c.zeta_at_t);
        r.add("capture_step", c.intensity_step);
        r.add("lambda_prime", c.lambda_prime);
    }
    r.add("pulse_start_ns", pulse.start_ns);
    r.add("pulse_step", pulse.intensity_step);
    r.add("file", path.display().to_string().as_str());
    Ok(r)
}

pub fn sweep(cfg: &RunConfig, out: &Output) -> Result<Report, CliError> {
    let p = cfg.system_params()?;
    let steps = &cfg.sweep.steps;
    // the capture search only runs when there is something to sweep
    let table = if steps.is_empty() {
        None
    } else {
        let (template, _) = cfg.pulse(&p)?;
        Some(sweep_steps(&p, &template, steps)?)
    };
    let rows = table
        .as_ref()
        .map(|t| {
            t.rows
                .iter()
                .map(|r| vec![r.intensity_step.into(), r.tau_star_ns.into(), r.response.into()])
                .collect()
        })
        .unwrap_or_default();
    let duplicates = table.as_ref().map_or(0, |t| t.duplicates_removed);
    if duplicates > 0 {
        eprintln!("warning: {duplicates} duplicate step(s) removed");
    }
    let path = out.table(&Table {
        name: "sweep",
        columns: vec!["intensity_step", "tau_star_ns", "response"],
        rows,
    })?;
    let mut r = Report::default();
    r.add("rows", table.as_ref().map_or(0, |t| t.rows.len() as u64));
    r.add("duplicates_removed", duplicates as u64);
    r.add("file", path.display().to_string().as_str());
    Ok(r)
}

pub fn mc(cfg: &RunConfig, out: &Output) -> Result<Report, CliError> {
    let p = cfg.system_params()?;
    // the pulse (and its capture search) is only needed with feedback
    let pulse = if cfg.mc.feedback { Some(cfg.pulse(&p)?.0) } else { None };
    let tcfg = match &pulse {
        Some(pulse) => cfg.trajectory_config(pulse)?,
        None => cfg.trajectory_config(&condqed::FeedbackPulse::trapezoid(0.0, 0.0))?,
    };
    let spec = cfg.histogram_spec()?;
    let factor = cfg.rebin_factor()?;
    let run = trajectory::run(&p, &tcfg)?;

    let clicks: Vec<Vec<Cell>> = run
        .clicks
        .iter()
        .map(|c| {
            let det = match c.detector {
                Detector::Start => "start",
                Detector::Stop => "stop",
            };
            vec![c.trajectory_id.into(), det.into(), c.time_ns.into()]
        })
        .collect();
    out.table(&Table {
        name: "clicks",
        columns: vec!["trajectory_id", "detector", "time_ns"],
        rows: clicks,
    })?;

    let h = histogram(&run.clicks, &spec)?;
    out.table(&Table {
        name: "histogram",
        columns: vec!["tau_start_ns", "tau_end_ns", "counts"],
        rows: (0..h.counts.len())
            .map(|i| vec![h.bin_start(i).into(), (h.bin_start(i) + h.bin_width_ns).into(), h.counts[i].into()])
            .collect(),
    })?;

    let coarse = h.rebin(factor)?;
    let rate = stop_click_rate(&run.clicks, run.stats.recorded_ns);
    let mut r = Report::default();
    r.add("trajectories", run.stats.n_trajectories);
    r.add("recorded_ns", run.stats.recorded_ns);
    r.add("cavity_jumps", run.stats.cavity_jumps);
    r.add("atomic_jumps", run.stats.atomic_jumps);
    r.add("start_clicks", run.stats.start_clicks);
    r.add("stop_clicks", run.stats.stop_clicks);
    r.add("pulses", run.stats.pulses);
    r.add("histogram_starts", h.n_starts);
    r.add("stop_rate_per_ns", rate);
    if coarse.n_starts > 0 {
        let g2 = normalize(&coarse, cfg.normalize_mode(rate))?;
        let err = g2.stderr.clone().unwrap_or_default();
        let path = out.table(&Table {
            name: "g2_mc",
            columns: vec!["tau_ns", "g2", "stderr"],
            rows: series_rows(&g2.tau_ns, &[&g2.values, &err]),
        })?;
        r.add("file", path.display().to_string().as_str());
    } else {
        eprintln!("warning: no start clicks inside the window; g2_mc.csv not written");
    }
    Ok(r)
}

pub fn oracle(cfg: &RunConfig, out: &Output) -> Result<Report, CliError> {
    let p = cfg.system_params()?;
    let o = &cfg.oracle;
    let grid = TimeGrid::new(o.tau_max_ns, o.dt_ns)?;
    let model = g2_free(&p, grid)?;
    let exact = g2_of_tau(&p, o.cutoff, &model.tau_ns)?;
    let diff: Vec<f64> = exact.values.iter().zip(&model.values).map(|(a, b)| (a - b).abs()).collect();
    let max_dev = diff.iter().cloned().fold(0.0, f64::max);
    let path = out.table(&Table {
        name: "oracle",
        columns: vec!["tau_ns", "g2_oracle", "g2_model", "abs_diff"],
        rows: series_rows(&model.tau_ns, &[&exact.values, &model.values, &diff]),
    })?;
    let rho = steady_density(&p, o.cutoff)?;
    let mut r = Report::default();
    r.add("cutoff", o.cutoff as u64);
    r.add("lambda", derived_rates(&p)?.lambda);
    r.add("mean_photons", rho.mean_photons());
    r.add("mean_excited", rho.mean_excited());
    r.add("max_abs_deviation", max_dev);
    r.add("file", path.display().to_string().as_str());
    Ok(r)
}
