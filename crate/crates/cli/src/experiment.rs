//! One runner per experiment kind. Each writes CSVs, SVG charts and a
//! manifest into the output directory.

use std::fmt::Write;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use realitygame_core::analytics::{
    fit_power_law, predict_all, subjective_heads_distribution, PowerLawFit,
};
use realitygame_core::engine::{self, EnsembleStats, RunConfig};
use realitygame_core::rational::{equilibrium_stability, RationalContext};
use realitygame_core::RealityMap;

use crate::output::{
    self, fmt_f64, fmt_opt, OutputDir, RunManifest, RunStatus, BIAS, DOMINANCE, FITS,
    INEFFICIENCY, RATIONAL_CURVE, RATIONAL_OPTIMA, SUBJECTIVE, WEALTH,
};
use crate::spec::{ExperimentKind, ExperimentSpec};
use crate::svg::{render_svg, Axes, Series};
use crate::CliError;

/// Most points drawn per polyline; longer series are thinned evenly.
const MAX_PLOT_POINTS: usize = 1000;
/// Grid resolution of rational log-return curves.
const CURVE_POINTS: usize = 999;
/// Players drawn in wealth charts of large populations.
const MAX_WEALTH_LINES: usize = 30;

/// What an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: String,
    pub fits: Vec<FitRow>,
    pub runs: Vec<RunStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub map: RealityMap,
    pub fit: PowerLawFit,
    pub predicted: Option<f64>,
}

/// The six maps compared in the exponent table, in column order.
pub fn table1_maps() -> Vec<RealityMap> {
    vec![
        RealityMap::Arctan { alpha: 2.0 },
        RealityMap::Arctan { alpha: 1.5 },
        RealityMap::Arctan { alpha: 0.75 },
        RealityMap::Arctan { alpha: 0.5 },
        RealityMap::Constant(0.5),
        RealityMap::SelfDefeating,
    ]
}

/// Runs `spec` on the current rayon pool and writes everything to `out`.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<ExperimentOutput, CliError> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut dir = OutputDir::create(out)?;
    let result = match spec.kind {
        ExperimentKind::BiasDynamics => bias_dynamics(spec, &mut dir)?,
        ExperimentKind::WealthDynamics => wealth_dynamics(spec, &mut dir)?,
        ExperimentKind::SubjectiveDistribution => subjective_distribution(spec, &mut dir)?,
        ExperimentKind::RationalCurve => rational_curve(spec, &mut dir)?,
        ExperimentKind::Inefficiency => inefficiency(spec, &mut dir)?,
        ExperimentKind::Table1 => table1(spec, &mut dir)?,
    };
    let seeds = match spec.kind {
        ExperimentKind::SubjectiveDistribution | ExperimentKind::RationalCurve => Vec::new(),
        _ => spec.run_seeds(),
    };
    dir.manifest(RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        spec: spec.resolved(),
        master_seed: spec.seed,
        seeds,
        schemas: Default::default(),
        outputs: Vec::new(),
        runs: result.runs.clone(),
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })?;
    Ok(result)
}

fn base_config(spec: &ExperimentSpec, map: &RealityMap) -> RunConfig {
    let mut config = RunConfig::new(map.clone(), spec.population.clone(), spec.horizon, spec.seed);
    config.record.snapshot_stride = spec.snapshot_stride;
    config.record.epsilon_player = spec.epsilon_player;
    config.record.wealth_snapshots = false;
    config
}

fn thin<T: Copy>(xs: &[T]) -> impl Iterator<Item = (usize, T)> + '_ {
    let stride = xs.len().div_ceil(MAX_PLOT_POINTS).max(1);
    xs.iter()
        .copied()
        .enumerate()
        .filter(move |(k, _)| k % stride == 0 || k + 1 == xs.len())
}

fn bias_dynamics(spec: &ExperimentSpec, dir: &mut OutputDir) -> Result<ExperimentOutput, CliError> {
    let config = base_config(spec, &spec.map);
    let label = spec.map.to_string();
    let results = engine::run_many(&config, &spec.run_seeds());
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut runs = Vec::new();
    let mut terminal = Vec::new();
    for result in results {
        let traj = match result {
            Ok(traj) => {
                runs.push(RunStatus::ok(&label, traj.seed));
                traj
            }
            Err(aborted) => {
                runs.push(RunStatus::aborted(
                    &label,
                    aborted.partial.seed,
                    aborted.step,
                    aborted.error.to_string(),
                ));
                aborted.partial
            }
        };
        for (k, (&p, &q)) in traj.bets.iter().zip(&traj.biases).enumerate() {
            rows.push(vec![(k + 1).to_string(), traj.seed.to_string(), fmt_f64(p), fmt_f64(q)]);
        }
        series.push(Series::new(
            format!("seed {}", traj.seed),
            thin(&traj.biases).map(|(k, q)| ((k + 1) as f64, q)).collect(),
        ));
        terminal.push(traj.terminal_bias(&spec.map));
    }
    dir.csv("bias.csv", BIAS, rows)?;
    let svg = render_svg(
        &series,
        &Axes {
            title: format!("Bias of the coin, {label}"),
            x_label: "t".into(),
            y_label: "q".into(),
            y_range: Some((0.0, 1.0)),
            ..Axes::default()
        },
    )?;
    dir.text("bias.svg", &svg)?;
    let mut summary = format!("{} runs of {label}, T = {}\nterminal q:", runs.len(), spec.horizon);
    for q in terminal {
        let _ = write!(summary, " {q:.4}");
    }
    Ok(ExperimentOutput {
        summary,
        fits: Vec::new(),
        runs,
    })
}

fn wealth_dynamics(spec: &ExperimentSpec, dir: &mut OutputDir) -> Result<ExperimentOutput, CliError> {
    let mut config = base_config(spec, &spec.map);
    config.record.wealth_snapshots = true;
    config.record.epsilon_player = false;
    let label = spec.map.to_string();
    let strategies = spec.population.strategies();
    let mut rows = Vec::new();
    let mut dominance = Vec::new();
    let mut runs = Vec::new();
    let mut chart = None;
    for result in engine::run_many(&config, &spec.run_seeds()) {
        let traj = match result {
            Ok(traj) => {
                runs.push(RunStatus::ok(&label, traj.seed));
                traj
            }
            Err(aborted) => {
                runs.push(RunStatus::aborted(
                    &label,
                    aborted.partial.seed,
                    aborted.step,
                    aborted.error.to_string(),
                ));
                aborted.partial
            }
        };
        for snap in &traj.snapshots {
            for (i, (&s, &w)) in strategies.iter().zip(&snap.wealths).enumerate() {
                rows.push(vec![
                    snap.t.to_string(),
                    traj.seed.to_string(),
                    i.to_string(),
                    fmt_f64(s),
                    fmt_f64(w),
                ]);
            }
        }
        let (dominant, wealth) = traj.final_population.dominant();
        dominance.push(vec![
            traj.seed.to_string(),
            traj.heads().to_string(),
            dominant.to_string(),
            fmt_f64(strategies[dominant]),
            fmt_f64(wealth),
        ]);
        if chart.is_none() {
            chart = Some(traj);
        }
    }
    dir.csv("wealth.csv", WEALTH, rows)?;
    dir.csv("dominance.csv", DOMINANCE, dominance.clone())?;
    if let Some(traj) = chart {
        let final_w = traj.final_population.wealths();
        let mut players: Vec<usize> = (0..final_w.len()).collect();
        if players.len() > MAX_WEALTH_LINES {
            players.sort_by(|&a, &b| final_w[b].total_cmp(&final_w[a]).then(a.cmp(&b)));
            players.truncate(10);
            players.sort_unstable();
        }
        let series: Vec<Series> = players
            .iter()
            .map(|&i| {
                Series::new(
                    format!("s = {}", fmt_f64(strategies[i])),
                    traj.snapshots.iter().map(|s| (s.t as f64, s.wealths[i])).collect(),
                )
            })
            .collect();
        let svg = render_svg(
            &series,
            &Axes {
                title: format!("Wealth by strategy, {label}, seed {}", traj.seed),
                x_label: "t".into(),
                y_label: "wealth".into(),
                y_range: Some((0.0, 1.0)),
                ..Axes::default()
            },
        )?;
        dir.text("wealth.svg", &svg)?;
    }
    let mut summary = format!("{} runs of {label}, T = {}\ndominant strategy per run:", runs.len(), spec.horizon);
    for row in &dominance {
        let _ = write!(summary, " {}", row[3]);
    }
    Ok(ExperimentOutput {
        summary,
        fits: Vec::new(),
        runs,
    })
}

fn subjective_distribution(spec: &ExperimentSpec, dir: &mut OutputDir) -> Result<ExperimentOutput, CliError> {
    let t = spec.horizon as u64;
    let dist = subjective_heads_distribution(&spec.population, t);
    let rows = dist
        .probabilities
        .iter()
        .enumerate()
        .map(|(m, p)| vec![m.to_string(), fmt_f64(*p)]);
    dir.csv("subjective.csv", SUBJECTIVE, rows)?;
    let tf = t.max(1) as f64;
    let series = [Series::new(
        format!("t = {t}"),
        dist.probabilities
            .iter()
            .enumerate()
            .map(|(m, p)| (m as f64 / tf, *p))
            .collect(),
    )];
    let svg = render_svg(
        &series,
        &Axes {
            title: format!("Heads-count distribution after {t} tosses"),
            x_label: "m / t".into(),
            y_label: "P(m)".into(),
            ..Axes::default()
        },
    )?;
    dir.text("subjective.svg", &svg)?;
    let peaks: Vec<String> = dist.peaks().iter().map(|m| m.to_string()).collect();
    Ok(ExperimentOutput {
        summary: format!("t = {t}, {} peaks at m = {}", peaks.len(), peaks.join(" ")),
        fits: Vec::new(),
        runs: Vec::new(),
    })
}

fn rational_curve(spec: &ExperimentSpec, dir: &mut OutputDir) -> Result<ExperimentOutput, CliError> {
    let map = &spec.map;
    let bet = spec.population.total_bet();
    let at_fixed_point = map.evaluate(bet).is_ok_and(|q| (q - bet).abs() < 1e-12);
    let mut rows = Vec::new();
    let mut optima = Vec::new();
    let mut series = Vec::new();
    let mut summary = format!("rational player vs opponents betting p = {}, {map}", fmt_f64(bet));
    for &w in &spec.rational_wealth {
        let ctx = RationalContext::new(&spec.population, w, map)?;
        let curve = ctx.curve(CURVE_POINTS);
        for (&s, &r) in curve.strategies.iter().zip(&curve.log_returns) {
            rows.push(vec![fmt_f64(w), fmt_f64(s), fmt_f64(r)]);
        }
        let stable = if at_fixed_point {
            equilibrium_stability(map, w, bet).ok().map(|b| b.to_string())
        } else {
            None
        };
        for &s in &curve.optimum.maximizers {
            optima.push(vec![
                fmt_f64(w),
                fmt_f64(s),
                fmt_f64(curve.optimum.log_return),
                stable.clone().unwrap_or_default(),
            ]);
        }
        let best: Vec<String> = curve.optimum.maximizers.iter().map(|s| format!("{s:.4}")).collect();
        let _ = write!(
            summary,
            "\nw = {w}: s* = {}, r* = {:.3e}",
            best.join(" / "),
            curve.optimum.log_return
        );
        series.push(Series::new(
            format!("w = {w}"),
            curve
                .strategies
                .iter()
                .zip(&curve.log_returns)
                .map(|(&s, &r)| (s, r))
                .collect(),
        ));
    }
    dir.csv("rational_curve.csv", RATIONAL_CURVE, rows)?;
    dir.csv("rational_optima.csv", RATIONAL_OPTIMA, optima)?;
    let svg = render_svg(
        &series,
        &Axes {
            title: format!("Expected log-return of a rational player, {map}"),
            x_label: "s".into(),
            y_label: "r(s)".into(),
            ..Axes::default()
        },
    )?;
    dir.text("rational_curve.svg", &svg)?;
    Ok(ExperimentOutput {
        summary,
        fits: Vec::new(),
        runs: Vec::new(),
    })
}

fn ensemble_statuses(label: &str, stats: &EnsembleStats) -> Vec<RunStatus> {
    let mut runs: Vec<RunStatus> = stats
        .summaries
        .iter()
        .map(|s| RunStatus::ok(label, s.seed))
        .chain(
            stats
                .excluded
                .iter()
                .map(|e| RunStatus::aborted(label, e.seed, e.step, e.reason.clone())),
        )
        .collect();
    runs.sort_by_key(|r| r.seed);
    runs
}

struct InefficiencyResult {
    stats: EnsembleStats,
    fit: FitRow,
}

fn run_inefficiency(spec: &ExperimentSpec, map: &RealityMap) -> Result<InefficiencyResult, CliError> {
    let config = base_config(spec, map);
    let stats = engine::ensemble(&config, &spec.run_seeds())?;
    let mean = &stats
        .log_return
        .as_ref()
        .expect("inefficiency runs record the epsilon player")
        .mean;
    let fit = fit_power_law(mean, spec.fit_window())?;
    let predicted = predict_all(map).first().map(|p| p.gamma);
    Ok(InefficiencyResult {
        stats,
        fit: FitRow {
            map: map.clone(),
            fit,
            predicted,
        },
    })
}

fn inefficiency_rows(stats: &EnsembleStats) -> Vec<Vec<String>> {
    let r = stats.log_return.as_ref().expect("epsilon player recorded");
    let n = stats.run_count().to_string();
    r.mean
        .iter()
        .zip(&r.variance)
        .enumerate()
        .map(|(k, (m, v))| vec![(k + 1).to_string(), fmt_f64(*m), fmt_f64(*v), n.clone()])
        .collect()
}

fn fit_rows(fits: &[FitRow]) -> Vec<Vec<String>> {
    fits.iter()
        .map(|f| {
            vec![
                f.map.label().to_string(),
                fmt_opt(f.map.alpha()),
                fmt_f64(f.fit.gamma),
                fmt_f64(f.fit.stderr),
                fmt_f64(f.fit.r2),
                fmt_opt(f.predicted),
            ]
        })
        .collect()
}

fn inefficiency_series(label: &str, stats: &EnsembleStats) -> Series {
    let mean = &stats.log_return.as_ref().expect("epsilon player recorded").mean;
    let positive: Vec<(f64, f64)> = mean
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .map(|(k, r)| ((k + 1) as f64, *r))
        .collect();
    let stride = positive.len().div_ceil(MAX_PLOT_POINTS).max(1);
    Series::new(
        label,
        positive
            .iter()
            .enumerate()
            .filter(|(k, _)| k % stride == 0)
            .map(|(_, p)| *p)
            .collect(),
    )
}

fn describe_fit(f: &FitRow) -> String {
    format!(
        "{}: gamma_hat = {:.3} +- {:.3} (R2 {:.3}, window [{}, {}]), predicted {}",
        f.map,
        f.fit.gamma,
        f.fit.stderr,
        f.fit.r2,
        f.fit.window.0,
        f.fit.window.1,
        f.predicted.map_or("n/a".to_string(), |g| format!("{g:.3}"))
    )
}

fn inefficiency(spec: &ExperimentSpec, dir: &mut OutputDir) -> Result<ExperimentOutput, CliError> {
    let label = spec.map.to_string();
    let result = run_inefficiency(spec, &spec.map)?;
    dir.csv("inefficiency.csv", INEFFICIENCY, inefficiency_rows(&result.stats))?;
    let fits = vec![result.fit];
    dir.csv("fits.csv", FITS, fit_rows(&fits))?;
    let f = &fits[0].fit;
    let (lo, hi) = f.window;
    let fitted = Series::new(
        "fit",
        [lo, hi]
            .iter()
            .map(|&t| (t as f64, (f.intercept - f.gamma * (t as f64).ln()).exp()))
            .collect(),
    );
    let svg = render_svg(
        &[inefficiency_series(&label, &result.stats), fitted],
        &Axes {
            title: format!("Inefficiency, {label}"),
            x_label: "t".into(),
            y_label: "mean r".into(),
            x_log: true,
            y_log: true,
            y_range: None,
        },
    )?;
    dir.text("inefficiency.svg", &svg)?;
    Ok(ExperimentOutput {
        summary: format!(
            "{} runs, N = {}, T = {}\n{}",
            result.stats.run_count(),
            spec.population.len(),
            spec.horizon,
            describe_fit(&fits[0])
        ),
        runs: ensemble_statuses(&label, &result.stats),
        fits,
    })
}

/// File-name tag for a map, e.g. `arctan-1.5`.
pub fn map_tag(map: &RealityMap) -> String {
    match map {
        RealityMap::Arctan { alpha } => format!("arctan-{alpha}"),
        RealityMap::Constant(c) => format!("constant-{c}"),
        other => other.label().to_string(),
    }
}

/// Two-row comparison of fitted and predicted exponents, one column per map.
pub fn format_table(fits: &[FitRow]) -> String {
    let header = |m: &RealityMap| match m {
        RealityMap::Arctan { alpha } => format!("alpha={alpha}"),
        RealityMap::Constant(_) => "q(p)=const".to_string(),
        RealityMap::SelfDefeating => "q(p)=1-p".to_string(),
        other => other.to_string(),
    };
    let mut out = format!("{:<14}", "reality map");
    for f in fits {
        let _ = write!(out, "{:>12}", header(&f.map));
    }
    out.push('\n');
    let _ = write!(out, "{:<14}", "observed");
    for f in fits {
        let _ = write!(out, "{:>12.2}", f.fit.gamma);
    }
    out.push('\n');
    let _ = write!(out, "{:<14}", "predicted");
    for f in fits {
        match f.predicted {
            Some(g) => {
                let _ = write!(out, "{g:>12.2}");
            }
            None => {
                let _ = write!(out, "{:>12}", "n/a");
            }
        }
    }
    out.push('\n');
    out
}

fn table1(spec: &ExperimentSpec, dir: &mut OutputDir) -> Result<ExperimentOutput, CliError> {
    let mut fits = Vec::new();
    let mut runs = Vec::new();
    let mut series = Vec::new();
    for map in table1_maps() {
        let result = run_inefficiency(spec, &map)?;
        let tag = map_tag(&map);
        dir.csv(
            &format!("inefficiency_{tag}.csv"),
            INEFFICIENCY,
            inefficiency_rows(&result.stats),
        )?;
        runs.extend(ensemble_statuses(&map.to_string(), &result.stats));
        series.push(inefficiency_series(&map.to_string(), &result.stats));
        fits.push(result.fit);
    }
    dir.csv("fits.csv", FITS, fit_rows(&fits))?;
    let table = format_table(&fits);
    dir.text("table1.txt", &table)?;
    let svg = render_svg(
        &series,
        &Axes {
            title: "Inefficiency by reality map".into(),
            x_label: "t".into(),
            y_label: "mean r".into(),
            x_log: true,
            y_log: true,
            y_range: None,
        },
    )?;
    dir.text("inefficiency.svg", &svg)?;
    let details: Vec<String> = fits.iter().map(describe_fit).collect();
    Ok(ExperimentOutput {
        summary: format!("{table}\n{}", details.join("\n")),
        fits,
        runs,
    })
}

/// The CSV schemas every experiment kind writes, for documentation and tests.
pub fn schemas_for(kind: ExperimentKind) -> Vec<output::Schema> {
    match kind {
        ExperimentKind::BiasDynamics => vec![BIAS],
        ExperimentKind::WealthDynamics => vec![WEALTH, DOMINANCE],
        ExperimentKind::SubjectiveDistribution => vec![SUBJECTIVE],
        ExperimentKind::RationalCurve => vec![RATIONAL_CURVE, RATIONAL_OPTIMA],
        ExperimentKind::Inefficiency | ExperimentKind::Table1 => vec![INEFFICIENCY, FITS],
    }
}
