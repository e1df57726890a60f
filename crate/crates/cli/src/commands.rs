//! One function per subcommand. Each builds its tables, then hands them to
//! [`emit_csv`] or [`emit_json`] which decide between stdout and `--out`.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use supermarket::convergence::{
    default_delta, fit_decay, potential_series, potential_series_adaptive, DecayFit, WeightSequence,
};
use supermarket::distributions::{parse_distribution, ServiceDistribution};
use supermarket::fixedpoint::{theta as theta_value, FixedPointFamily, ThetaMode};
use supermarket::meanfield::{integrate_meanfield, InitialState, MeanFieldConfig, System};
use supermarket::metrics::{expected_sojourn, sojourn_upper_bound};
use supermarket::numerics::OdeSettings;
use supermarket::phasetype::{
    fixed_point_ph, method3_recursion_check, stationary_residuals, Method, PhFixedPoint, PhRepresentation,
};
use supermarket::simulator::{compare_fixed_points, run, SimConfig, SimResult};

use crate::error::CliError;
use crate::output::{num, print_json, print_stdout, Artifacts, Csv};
use crate::{
    ConvergenceArgs, FixedPointArgs, InitialKind, OdeArgs, PhArgs, SimulateArgs, SojournArgs, SystemKind,
    TablesArgs, ThetaArgs, WeightKind,
};

/// Tail threshold that sets the default truncation level.
const DEFAULT_TRUNCATION_EPS: f64 = 1e-12;

fn dist(spec: &str) -> Result<ServiceDistribution, CliError> {
    Ok(parse_distribution(spec)?)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::validation(format!("--{name} must be finite and positive, got {v}")))
    }
}

fn family(lambda: f64, d: u32, dist: ServiceDistribution, mode: ThetaMode, theta: Option<f64>) -> Result<FixedPointFamily, CliError> {
    Ok(match theta {
        Some(t) => FixedPointFamily::with_theta(lambda, d, dist, t)?,
        None => FixedPointFamily::with_mode(lambda, d, dist, mode)?,
    })
}

/// CSV to stdout, or `<command>.csv` plus manifest and a JSON summary.
fn emit_csv<P: Serialize>(command: &str, params: &P, out: Option<&Path>, seed: Option<u64>, csv: &Csv) -> Result<(), CliError> {
    match out {
        None => {
            print_stdout(&csv.render())
        }
        Some(dir) => {
            let mut art = Artifacts::new(dir)?;
            let file = art.write(&format!("{command}.csv"), &csv.render())?;
            let manifest = art.finish(command, params, seed)?;
            print_json(&json!({
                "command": command,
                "rows": csv.len(),
                "outputs": [file.display().to_string()],
                "manifest": manifest.display().to_string(),
            }))
        }
    }
}

/// JSON to stdout, or `<command>.json` plus manifest and a JSON summary.
fn emit_json<P: Serialize, T: Serialize>(command: &str, params: &P, out: Option<&Path>, seed: Option<u64>, value: &T) -> Result<(), CliError> {
    match out {
        None => print_json(value),
        Some(dir) => {
            let mut art = Artifacts::new(dir)?;
            let file = art.write_json(&format!("{command}.json"), value)?;
            let manifest = art.finish(command, params, seed)?;
            print_json(&json!({
                "command": command,
                "outputs": [file.display().to_string()],
                "manifest": manifest.display().to_string(),
            }))
        }
    }
}

pub fn theta(a: &ThetaArgs) -> Result<(), CliError> {
    let g = dist(&a.dist)?;
    let value = theta_value(&g, a.d, a.mode)?;
    let report = json!({
        "dist": g.to_string(),
        "d": a.d,
        "mu": g.rate(),
        "mode": value.mode.to_string(),
        "theta": value.theta,
        "theta_tilde": value.theta_tilde,
        "power_law_unit_mean_claim": value.power_law_unit_mean_claim,
    });
    emit_json("theta", a, a.out.out.as_deref(), None, &report)
}

pub fn fixed_point(a: &FixedPointArgs) -> Result<(), CliError> {
    if a.kmax == 0 {
        return Err(CliError::validation("--kmax must be at least 1"));
    }
    let fp = family(a.lambda, a.d, dist(&a.dist)?, a.mode, a.theta)?;
    let mut csv = Csv::new(&["k", "u_k", "log10_u_k", "upper_bound"]);
    for k in 1..=a.kmax {
        csv.push(vec![k.to_string(), num(fp.tail(k)), num(fp.log10_tail(k)), num(fp.upper_bound(k))]);
    }
    emit_csv("fixed-point", a, a.out.out.as_deref(), None, &csv)
}

pub fn sojourn(a: &SojournArgs) -> Result<(), CliError> {
    let g = dist(&a.dist)?;
    if let Some(lambda) = a.lambda {
        let fp = family(lambda, a.d, g, a.mode, a.theta)?;
        let report = expected_sojourn(&fp)?;
        let bound = sojourn_upper_bound(&fp)?;
        let value = json!({ "family": fp, "sojourn": report, "upper_bound": bound });
        return emit_json("sojourn", a, a.out.out.as_deref(), None, &value);
    }
    let sweep = a.lambda_sweep.expect("clap requires one of --lambda, --lambda-sweep");
    let mut csv = Csv::new(&["lambda", "e_td"]);
    for lambda in sweep.points() {
        let fp = family(lambda, a.d, g.clone(), a.mode, a.theta)?;
        csv.push(vec![num(lambda), num(expected_sojourn(&fp)?.e_td)]);
    }
    emit_csv("sojourn", a, a.out.out.as_deref(), None, &csv)
}

pub fn ph(a: &PhArgs) -> Result<(), CliError> {
    let rep = PhRepresentation::from_file(&a.alpha)?;
    let method = Method::try_from(a.method)?;
    let fp = fixed_point_ph(&rep, a.lambda, a.d, method, a.kmax)?;
    let residuals = stationary_residuals(&rep, &fp);
    let recursion = (method == Method::InitialVector).then(|| method3_recursion_check(&rep, &fp));
    let value = json!({
        "representation": { "alpha": rep.alpha(), "mean": rep.mean(), "order": rep.order() },
        "fixed_point": fp,
        "residuals": residuals,
        "recursion_check": recursion,
    });
    emit_json("ph", a, a.out.out.as_deref(), None, &value)
}

/// Flattened `[1, π_1, …, π_K]`, zero-padded past the family's own truncation.
fn flatten_ph(fp: &PhFixedPoint, k_max: usize) -> Vec<f64> {
    let mut state = vec![1.0];
    for k in 1..=k_max {
        state.extend(fp.level(k));
    }
    state
}

pub fn ode(a: &OdeArgs) -> Result<(), CliError> {
    positive("t-end", a.t_end)?;
    positive("step", a.step)?;
    if a.output_every == 0 {
        return Err(CliError::validation("--output-every must be at least 1"));
    }
    let g = dist(&a.dist)?;
    // The classical tail (θ = 1) sets the default depth for both systems.
    let classical = FixedPointFamily::with_theta(a.lambda, a.d, g.clone(), 1.0)?;
    let k_max = a.kmax.unwrap_or_else(|| classical.truncation_level(DEFAULT_TRUNCATION_EPS));
    if k_max == 0 {
        return Err(CliError::validation("--kmax must be at least 1"));
    }
    let (system, initial) = match a.system {
        SystemKind::Exp => {
            if g.family() != "exponential" {
                return Err(CliError::validation(format!("--system exp needs exponential service, got {g}")));
            }
            let system = System::Exponential { lambda: a.lambda, mu: g.rate(), d: a.d };
            let initial = match a.initial {
                InitialKind::Empty => InitialState::Empty,
                InitialKind::FixedPoint => InitialState::Given(classical.tails(k_max)),
            };
            (system, initial)
        }
        SystemKind::Ph => {
            let rep = g
                .to_phase_type()
                .ok_or_else(|| CliError::validation(format!("{g} has no phase-type form")))?;
            let initial = match a.initial {
                InitialKind::Empty => InitialState::Empty,
                InitialKind::FixedPoint => {
                    let fp = fixed_point_ph(&rep, a.lambda, a.d, Method::Stationary, Some(k_max))?;
                    InitialState::Given(flatten_ph(&fp, k_max))
                }
            };
            (System::PhaseType { lambda: a.lambda, rep, d: a.d }, initial)
        }
    };
    let phases = system.phases();
    let config = MeanFieldConfig {
        system,
        initial,
        k_max,
        settings: OdeSettings::new(a.t_end, a.step).with_output_every(a.output_every),
    };
    let traj = integrate_meanfield(&config)?;
    let mut header = vec!["t".to_string(), "k".to_string(), "u_k".to_string()];
    if a.system == SystemKind::Ph {
        header.extend((1..=phases).map(|j| format!("phase_{j}")));
    }
    let mut csv = Csv::with_header(header);
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let masses = config.system.level_masses(state);
        for (k, mass) in masses.iter().enumerate() {
            let mut row = vec![num(*t), k.to_string(), num(*mass)];
            if a.system == SystemKind::Ph {
                if k == 0 {
                    row.extend(std::iter::repeat_n(String::new(), phases));
                } else {
                    let lo = 1 + (k - 1) * phases;
                    row.extend(state[lo..lo + phases].iter().map(|v| num(*v)));
                }
            }
            csv.push(row);
        }
    }
    emit_csv("ode", a, a.out.out.as_deref(), None, &csv)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    result: &'a SimResult,
    ranking: Vec<supermarket::simulator::CandidateDistance>,
}

/// Fixed points the simulated tails are compared against, each of length `levels`.
fn candidates(a: &SimulateArgs, g: &ServiceDistribution, levels: usize) -> Vec<(String, Vec<f64>)> {
    let k_max = levels.saturating_sub(1);
    let d = a.d as u32;
    let mut out = Vec::new();
    if let Ok(fp) = FixedPointFamily::new(a.lambda, d, g.clone()) {
        out.push(("generic".to_string(), fp.tails(k_max)));
    }
    if let Ok(fp) = FixedPointFamily::with_theta(a.lambda, d, g.clone(), 1.0) {
        out.push(("classical".to_string(), fp.tails(k_max)));
    }
    if let Some(rep) = g.to_phase_type() {
        for method in Method::ALL {
            if let Ok(fp) = fixed_point_ph(&rep, a.lambda, d, method, Some(k_max)) {
                let mut tails = vec![1.0];
                tails.extend((1..=k_max).map(|k| fp.level(k).iter().sum::<f64>()));
                out.push((format!("ph-method-{}", method.number()), tails));
            }
        }
    }
    out
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let g = dist(&a.dist)?;
    let mut config = SimConfig::new(a.n, a.lambda, a.d, g.clone(), a.seed)
        .with_replications(a.reps)
        .with_choice_mode(a.choice_mode);
    if let Some(h) = a.horizon {
        config = config.with_horizon(h);
    }
    if let Some(w) = a.warmup {
        config = config.with_warmup(w);
    }
    let mut result = run(&config)?;
    let cands = candidates(a, &g, result.tails.len());
    if let Some(m) = &a.model {
        if !cands.iter().any(|(name, _)| name == m) {
            let known: Vec<&str> = cands.iter().map(|(name, _)| name.as_str()).collect();
            return Err(CliError::validation(format!("--model '{m}' is not available here; choose from {}", known.join(", "))));
        }
    }
    let ranking = compare_fixed_points(&result, &cands);
    if a.summary_only {
        result.replications.clear();
    }
    let report = SimulateReport { result: &result, ranking };
    let Some(dir) = a.out.out.as_deref() else {
        return print_json(&report);
    };
    // An explicit --model wins; otherwise the closest candidate is exported.
    let model_name = a.model.clone().or_else(|| report.ranking.first().map(|c| c.name.clone()));
    let model = model_name.as_ref().and_then(|m| cands.iter().find(|(name, _)| name == m));
    let mut csv = Csv::new(&["k", "u_k_sim", "ci", "u_k_model"]);
    for t in &result.tails {
        let model_value = model.map_or(String::new(), |(_, c)| num(c.get(t.k).copied().unwrap_or(0.0)));
        csv.push(vec![t.k.to_string(), num(t.value.estimate), num(t.value.ci_half_width), model_value]);
    }
    let mut art = Artifacts::new(dir)?;
    let json_file = art.write_json("simulate.json", &report)?;
    let csv_file = art.write("simulate.csv", &csv.render())?;
    let manifest = art.finish("simulate", a, Some(a.seed))?;
    print_json(&json!({
        "command": "simulate",
        "closest": report.ranking.first().map(|c| c.name.clone()),
        "model": model_name,
        "outputs": [json_file.display().to_string(), csv_file.display().to_string()],
        "manifest": manifest.display().to_string(),
    }))
}

pub fn convergence(a: &ConvergenceArgs) -> Result<(), CliError> {
    positive("t-end", a.t_end)?;
    positive("step", a.step)?;
    if a.output_every == 0 {
        return Err(CliError::validation("--output-every must be at least 1"));
    }
    // The exponential ODE settles on the classical tail, so that is the target.
    let g = ServiceDistribution::exponential(a.mu)?;
    let fp = FixedPointFamily::with_theta(a.lambda, a.d, g, 1.0)?;
    let k_max = a.kmax.unwrap_or_else(|| fp.truncation_level(DEFAULT_TRUNCATION_EPS));
    if k_max == 0 {
        return Err(CliError::validation("--kmax must be at least 1"));
    }
    let target = fp.tails(k_max);
    let config = MeanFieldConfig {
        system: System::Exponential { lambda: a.lambda, mu: a.mu, d: a.d },
        initial: InitialState::Empty,
        k_max,
        settings: OdeSettings::new(a.t_end, a.step).with_output_every(a.output_every),
    };
    let traj = integrate_meanfield(&config)?;
    let delta = a.delta.unwrap_or_else(|| default_delta(a.lambda));
    let series = match a.weights {
        WeightKind::Constant => potential_series(&traj, &target, &WeightSequence::constant(k_max))?,
        WeightKind::Adaptive => potential_series_adaptive(&traj, &target, a.lambda, a.mu, a.d, delta)?,
    };
    let fit: DecayFit = fit_decay(&series, (a.window.lo, a.window.hi))?;
    let summary = json!({
        "k_max": k_max,
        "weights": a.weights,
        "delta_weights": delta,
        "window": a.window,
        "fit": fit,
    });
    let mut csv = Csv::new(&["t", "phi", "log_phi"]);
    for (t, phi) in &series {
        csv.push(vec![num(*t), num(*phi), num(phi.ln())]);
    }
    let Some(dir) = a.out.out.as_deref() else {
        eprintln!("{summary}");
        return print_stdout(&csv.render());
    };
    let mut art = Artifacts::new(dir)?;
    let csv_file = art.write("convergence.csv", &csv.render())?;
    let fit_file = art.write_json("convergence_fit.json", &summary)?;
    let manifest = art.finish("convergence", a, None)?;
    print_json(&json!({
        "command": "convergence",
        "fit": fit,
        "outputs": [csv_file.display().to_string(), fit_file.display().to_string()],
        "manifest": manifest.display().to_string(),
    }))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn tables(a: &TablesArgs) -> Result<(), CliError> {
    let mut csv;
    let mut worst = 0.0f64;
    match a.which {
        2 => {
            // Weibull, scale 5 per the table's parameterisation, d = 2.
            const PRINTED: [f64; 8] = [1.3e-3, 5.3e-2, 0.27, 0.63, 1.05, 1.47, 1.86, 2.19];
            csv = Csv::new(&["tau", "printed", "closed_form", "rel_error", "generic"]);
            for (i, p) in PRINTED.iter().enumerate() {
                let tau = 0.2 + 0.1 * i as f64;
                let g = ServiceDistribution::weibull(tau, 5.0)?;
                let closed = theta_value(&g, 2, ThetaMode::ClosedForm)?.theta;
                let generic = theta_value(&g, 2, ThetaMode::Generic)?.theta;
                worst = worst.max(rel(closed, *p));
                csv.push(vec![format!("{tau:.1}"), num(*p), num(closed), num(rel(closed, *p)), num(generic)]);
            }
        }
        1 => {
            // Erlang(m, 1); columns read as (d, m).
            const PRINTED: [((u32, u32), f64); 7] = [
                ((2, 2), 0.52),
                ((2, 5), 0.19),
                ((2, 10), 9.15e-2),
                ((5, 2), 4.13e-2),
                ((10, 2), 9.48e-4),
                ((5, 5), 1.11e-3),
                ((10, 10), 6.51e-10),
            ];
            csv = Csv::new(&["d", "m", "printed", "table_convention", "rel_error", "generic"]);
            for ((d, m), p) in PRINTED {
                let g = ServiceDistribution::erlang(m, 1.0)?;
                let table = theta_value(&g, d, ThetaMode::PaperTable)?.theta;
                let generic = theta_value(&g, d, ThetaMode::Generic)?.theta;
                worst = worst.max(rel(table, p));
                csv.push(vec![d.to_string(), m.to_string(), num(p), num(table), num(rel(table, p)), num(generic)]);
            }
        }
        3 => {
            const PRINTED: [((u32, f64), f64); 4] =
                [((2, 2.0), 2.24e-2), ((4, 2.0), 2.01e-4), ((2, 4.0), 3.44e-5), ((4, 4.0), 1.18e-13)];
            csv = Csv::new(&["d", "alpha", "printed", "computed", "rel_error"]);
            for ((d, alpha), p) in PRINTED {
                let g = ServiceDistribution::almost_exponential(alpha)?;
                let v = theta_value(&g, d, ThetaMode::Generic)?.theta;
                worst = worst.max(rel(v, p));
                csv.push(vec![d.to_string(), alpha.to_string(), num(p), num(v), num(rel(v, p))]);
            }
        }
        other => return Err(CliError::validation(format!("--which must be 1, 2 or 3, got {other}"))),
    }
    match a.out.out.as_deref() {
        None => {
            print_stdout(&csv.render())
        }
        Some(dir) => {
            let name = format!("table{}", a.which);
            let mut art = Artifacts::new(dir)?;
            let file = art.write(&format!("{name}.csv"), &csv.render())?;
            let manifest = art.finish("tables", a, None)?;
            print_json(&json!({
                "command": "tables",
                "which": a.which,
                "rows": csv.len(),
                "max_rel_error": worst,
                "outputs": [file.display().to_string()],
                "manifest": manifest.display().to_string(),
            }))
        }
    }
}
