//! Built-in studies at desk scale: each regenerates the data grid and a
//! gnuplot script for one named figure of the accompanying write-up.
//!
//! * fig3 — theory vs. simulation, mean AoI over mean service times 1..12
//!   for geometric and uniform services at k = 4 and k = 8.
//! * fig4 — mean AoI versus k for geometric means {2, 6, 10}, plus the
//!   optimal k and freezing gain over a fine mean grid.
//! * fig5 — mean AoI versus service-time variance (triangular, mean 13)
//!   for several k, with the zero-wait baseline.
//! * fig6 — optimal k and gain versus variance (triangular, mean 13).
//! * fig7 — freezing-gain surface over non-identical geometric means.
//! * fig8 — freezing-gain surface over non-identical triangular means at
//!   variance 0.5.
//!
//! The grids are reduced relative to the original studies so a figure
//! finishes in minutes on a laptop; the README lists each grid.

use std::fmt::Write as _;
use std::path::Path;

use crate::amc::{BaseSystem, PriorityPolicy};
use crate::cli::descriptor_hash;
use crate::error::{Error, Result};
use crate::metrics;
use crate::optimizer::{self, DistFamily};
use crate::output::{self, OutputMeta, PlotSeries};
use crate::rmc::build_complete_amc;
use crate::sim;

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("output error: {e}"))
}

pub fn run(figure: &str, out: &Path, slots: Option<u64>, seed: u64) -> Result<()> {
    let slots = slots.unwrap_or(1_000_000);
    let dir = out.join(figure);
    std::fs::create_dir_all(&dir).map_err(io_err)?;
    let meta = OutputMeta::new(
        &descriptor_hash(&format!("reproduce:{figure}:slots={slots}:seed={seed}")),
        Some(seed),
    );
    match figure {
        "fig3" => fig3(&dir, &meta, slots, seed),
        "fig4" => fig4(&dir, &meta, slots, seed),
        "fig5" => fig5(&dir, &meta, slots, seed),
        "fig6" => fig6(&dir, &meta, slots, seed),
        "fig7" => fig7(&dir, &meta, slots, seed),
        "fig8" => fig8(&dir, &meta, slots, seed),
        other => Err(Error::InvalidParameter(format!(
            "unknown figure {other:?}; expected one of fig3..fig8"
        ))),
    }?;
    println!("wrote {figure} data and plot script to {}", dir.display());
    Ok(())
}

fn family_base(family: DistFamily, mean: f64, priority: PriorityPolicy) -> Result<BaseSystem> {
    let dph = family.build(mean)?;
    Ok(BaseSystem { dph1: dph.clone(), dph2: dph, priority })
}

/// Theory vs. simulation for identical servers.
fn fig3(dir: &Path, meta: &OutputMeta, slots: u64, seed: u64) -> Result<()> {
    let means: Vec<f64> = (1..=12).map(|m| m as f64).collect();
    let mut series = Vec::new();
    for family in [DistFamily::Geometric, DistFamily::Uniform] {
        for k in [4usize, 8] {
            let mut theory_rows = Vec::new();
            let mut sim_rows = Vec::new();
            for &mean in &means {
                let base = family_base(family, mean, PriorityPolicy::S1Priority)?;
                let model = build_complete_amc(&base.with_k(k))?;
                theory_rows.push(vec![mean, metrics::aoi_mean(&model)?]);
                let run = sim::simulate(&base.with_k(k), slots, seed ^ (k as u64))?;
                sim_rows.push(vec![mean, run.aoi_mean.value, run.aoi_mean.std_err]);
            }
            let name = family.name();
            let theory_file = format!("fig3_{name}_k{k}_theory.dat");
            let sim_file = format!("fig3_{name}_k{k}_sim.dat");
            output::write_dat(&dir.join(&theory_file), meta, "mean aoi", theory_rows)
                .map_err(io_err)?;
            output::write_dat(&dir.join(&sim_file), meta, "mean aoi stderr", sim_rows)
                .map_err(io_err)?;
            series.push(PlotSeries {
                data_file: theory_file,
                title: format!("{name} k={k} (T)"),
                style: "with lines".into(),
            });
            series.push(PlotSeries {
                data_file: sim_file,
                title: format!("{name} k={k} (S)"),
                style: "with points pt 7 ps 0.7".into(),
            });
        }
    }
    output::write_gnuplot_script(
        dir,
        meta,
        "fig3",
        "mean service time (slots)",
        "average AoI (slots)",
        &series,
    )
    .map_err(io_err)?;
    Ok(())
}

/// AoI-versus-k curves and the optimum panel.
fn fig4(dir: &Path, meta: &OutputMeta, slots: u64, seed: u64) -> Result<()> {
    let mut curve_series = Vec::new();
    for mean in [2.0, 6.0, 10.0] {
        let base = family_base(DistFamily::Geometric, mean, PriorityPolicy::S1Priority)?;
        let scan = optimizer::find_optimal_k(&base, 12)?;
        let rows = scan
            .curve
            .iter()
            .map(|p| vec![p.k as f64, p.aoi_mean])
            .collect::<Vec<_>>();
        let file = format!("fig4a_geometric_mean{mean}.dat");
        output::write_dat(&dir.join(&file), meta, "k aoi", rows).map_err(io_err)?;
        curve_series.push(PlotSeries {
            data_file: file,
            title: format!("geometric E[T]={mean}"),
            style: "with linespoints".into(),
        });
    }
    output::write_gnuplot_script(
        dir,
        meta,
        "fig4a",
        "freezing parameter k",
        "average AoI (slots)",
        &curve_series,
    )
    .map_err(io_err)?;

    let mut panel_series = Vec::new();
    for family in [DistFamily::Geometric, DistFamily::Uniform] {
        let mut kstar_rows = Vec::new();
        let mut gain_rows = Vec::new();
        let mut mean = 1.0;
        let mut index = 0u64;
        while mean <= 12.0 + 1e-9 {
            let base = family_base(family, mean, PriorityPolicy::S1Priority)?;
            let record = optimizer::freezing_gain(
                &base,
                optimizer::default_k_max(&base),
                slots,
                seed ^ (0x40 + index),
            )?;
            kstar_rows.push(vec![mean, record.k_star as f64]);
            gain_rows.push(vec![mean, record.gain_percent]);
            mean += 0.5;
            index += 1;
        }
        let name = family.name();
        let kstar_file = format!("fig4c_{name}_kstar.dat");
        let gain_file = format!("fig4c_{name}_gain.dat");
        output::write_dat(&dir.join(&kstar_file), meta, "mean k_star", kstar_rows)
            .map_err(io_err)?;
        output::write_dat(&dir.join(&gain_file), meta, "mean gain_percent", gain_rows)
            .map_err(io_err)?;
        panel_series.push(PlotSeries {
            data_file: kstar_file,
            title: format!("{name} k*"),
            style: "with steps".into(),
        });
        panel_series.push(PlotSeries {
            data_file: gain_file,
            title: format!("{name} gain %"),
            style: "with linespoints".into(),
        });
    }
    output::write_gnuplot_script(
        dir,
        meta,
        "fig4c",
        "mean service time (slots)",
        "optimal k / gain (%)",
        &panel_series,
    )
    .map_err(io_err)?;
    Ok(())
}

const FIG56_MEAN: f64 = 13.0;
const FIG56_VARIANCES: [f64; 8] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0];

/// AoI versus variance for triangular services.
fn fig5(dir: &Path, meta: &OutputMeta, slots: u64, seed: u64) -> Result<()> {
    let mut series = Vec::new();
    for k in [4usize, 6, 8, 10] {
        let mut rows = Vec::new();
        for &variance in &FIG56_VARIANCES {
            let base = family_base(
                DistFamily::Triangular { variance },
                FIG56_MEAN,
                PriorityPolicy::S1Priority,
            )?;
            let model = build_complete_amc(&base.with_k(k))?;
            rows.push(vec![variance, metrics::aoi_mean(&model)?]);
        }
        let file = format!("fig5_k{k}.dat");
        output::write_dat(&dir.join(&file), meta, "variance aoi", rows).map_err(io_err)?;
        series.push(PlotSeries {
            data_file: file,
            title: format!("k={k}"),
            style: "with linespoints".into(),
        });
    }
    let mut zw_rows = Vec::new();
    for (idx, &variance) in FIG56_VARIANCES.iter().enumerate() {
        let base = family_base(
            DistFamily::Triangular { variance },
            FIG56_MEAN,
            PriorityPolicy::S1Priority,
        )?;
        let run = sim::simulate(&base.with_k(0), slots, seed ^ idx as u64)?;
        zw_rows.push(vec![variance, run.aoi_mean.value, run.aoi_mean.std_err]);
    }
    output::write_dat(&dir.join("fig5_k0_sim.dat"), meta, "variance aoi stderr", zw_rows)
        .map_err(io_err)?;
    series.push(PlotSeries {
        data_file: "fig5_k0_sim.dat".into(),
        title: "k=0 (S)".into(),
        style: "with points pt 5".into(),
    });
    output::write_gnuplot_script(
        dir,
        meta,
        "fig5",
        "service-time variance (slots^2)",
        "average AoI (slots)",
        &series,
    )
    .map_err(io_err)?;
    Ok(())
}

/// Optimal k and gain versus variance for triangular services.
fn fig6(dir: &Path, meta: &OutputMeta, slots: u64, seed: u64) -> Result<()> {
    let sweep = optimizer::sweep_variance(
        FIG56_MEAN,
        PriorityPolicy::S1Priority,
        &FIG56_VARIANCES,
        Some(14),
        slots,
        seed,
    )?;
    let kstar_rows = sweep
        .points
        .iter()
        .map(|p| vec![p.variance1, p.gain.k_star as f64])
        .collect::<Vec<_>>();
    let gain_rows = sweep
        .points
        .iter()
        .map(|p| vec![p.variance1, p.gain.gain_percent])
        .collect::<Vec<_>>();
    output::write_dat(&dir.join("fig6_kstar.dat"), meta, "variance k_star", kstar_rows)
        .map_err(io_err)?;
    output::write_dat(&dir.join("fig6_gain.dat"), meta, "variance gain_percent", gain_rows)
        .map_err(io_err)?;
    output::write_json(&dir.join("fig6_sweep.json"), meta, &sweep).map_err(io_err)?;
    output::write_gnuplot_script(
        dir,
        meta,
        "fig6",
        "service-time variance (slots^2)",
        "optimal k / gain (%)",
        &[
            PlotSeries {
                data_file: "fig6_kstar.dat".into(),
                title: "k*".into(),
                style: "with steps".into(),
            },
            PlotSeries {
                data_file: "fig6_gain.dat".into(),
                title: "gain %".into(),
                style: "with linespoints".into(),
            },
        ],
    )
    .map_err(io_err)?;
    Ok(())
}

fn write_surface(
    dir: &Path,
    meta: &OutputMeta,
    name: &str,
    sweep: &optimizer::SweepResult,
) -> Result<()> {
    // gnuplot grid format: blocks of constant mean1 separated by blank lines.
    let mut text = String::new();
    let _ = writeln!(text, "# columns: mean1 mean2 gain_percent");
    let mut last_mean1 = f64::NAN;
    for point in &sweep.points {
        if point.mean1 != last_mean1 && !last_mean1.is_nan() {
            text.push('\n');
        }
        let _ = writeln!(text, "{} {} {}", point.mean1, point.mean2, point.gain.gain_percent);
        last_mean1 = point.mean1;
    }
    std::fs::write(dir.join(format!("{name}_surface.dat")), text).map_err(io_err)?;

    let mut script = String::new();
    let _ = writeln!(script, "set terminal pngcairo size 960,720");
    let _ = writeln!(script, "set output '{name}.png'");
    let _ = writeln!(script, "set xlabel 'E[T1] (slots)'");
    let _ = writeln!(script, "set ylabel 'E[T2] (slots)'");
    let _ = writeln!(script, "set zlabel 'gain (%)'");
    let _ = writeln!(script, "set hidden3d");
    let _ = writeln!(script, "set dgrid3d");
    let _ = writeln!(script, "splot '{name}_surface.dat' using 1:2:3 with lines title 'gain %'");
    std::fs::write(dir.join(format!("{name}.gp")), script).map_err(io_err)?;
    output::write_json(&dir.join(format!("{name}_sweep.json")), meta, sweep).map_err(io_err)?;
    Ok(())
}

/// Gain surface for non-identical geometric servers.
fn fig7(dir: &Path, meta: &OutputMeta, slots: u64, seed: u64) -> Result<()> {
    let means: Vec<f64> = (2..=12).map(|m| m as f64).collect();
    let sweep = optimizer::sweep_nonidentical(
        DistFamily::Geometric,
        PriorityPolicy::S1Priority,
        &means,
        &means,
        None,
        slots,
        seed,
    )?;
    write_surface(dir, meta, "fig7", &sweep)
}

/// Gain surface for non-identical triangular servers at variance 0.5.
fn fig8(dir: &Path, meta: &OutputMeta, slots: u64, seed: u64) -> Result<()> {
    let means: Vec<f64> = (6..=12).map(|m| m as f64).collect();
    let sweep = optimizer::sweep_nonidentical(
        DistFamily::Triangular { variance: 0.5 },
        PriorityPolicy::S1Priority,
        &means,
        &means,
        Some(14),
        slots,
        seed,
    )?;
    write_surface(dir, meta, "fig8", &sweep)
}

/// Plot emission for the generic `sweep` command.
pub fn emit_sweep_plot(
    dir: &Path,
    meta: &OutputMeta,
    sweep: &optimizer::SweepResult,
) -> std::io::Result<()> {
    if sweep.kind == "nonidentical" {
        return write_surface(dir, meta, "sweep", sweep)
            .map_err(|e| std::io::Error::other(e.to_string()));
    }
    let axis_of = |p: &optimizer::SweepPoint| {
        if sweep.kind == "variance" {
            p.variance1
        } else {
            p.mean1
        }
    };
    let gain_rows = sweep
        .points
        .iter()
        .map(|p| vec![axis_of(p), p.gain.gain_percent])
        .collect::<Vec<_>>();
    let kstar_rows = sweep
        .points
        .iter()
        .map(|p| vec![axis_of(p), p.gain.k_star as f64])
        .collect::<Vec<_>>();
    output::write_dat(&dir.join("sweep_gain.dat"), meta, "axis gain_percent", gain_rows)?;
    output::write_dat(&dir.join("sweep_kstar.dat"), meta, "axis k_star", kstar_rows)?;
    let xlabel = if sweep.kind == "variance" {
        "service-time variance (slots^2)"
    } else {
        "mean service time (slots)"
    };
    output::write_gnuplot_script(
        dir,
        meta,
        "sweep",
        xlabel,
        "optimal k / gain (%)",
        &[
            PlotSeries {
                data_file: "sweep_kstar.dat".into(),
                title: "k*".into(),
                style: "with steps".into(),
            },
            PlotSeries {
                data_file: "sweep_gain.dat".into(),
                title: "gain %".into(),
                style: "with linespoints".into(),
            },
        ],
    )?;
    Ok(())
}
