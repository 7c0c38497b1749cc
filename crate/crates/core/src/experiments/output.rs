//! CSV and SVG writers for experiment results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::PolicyKind;
use super::runner::{EpisodeResult, ExperimentReport, SummaryRow, TrainingReport};
use crate::error::Result;

pub const SUMMARY_HEADER: [&str; 5] = ["policy", "sigma1", "trans_rmse_m", "orient_rmse_deg", "mean_utility"];

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.policy.to_string(),
            format!("{:.2}", r.sigma1),
            format!("{:.6}", r.trans_rmse_m),
            format!("{:.6}", r.orient_rmse_deg),
            format!("{:.6}", r.mean_utility),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line per evaluation episode.
pub fn write_episodes(path: &Path, episodes: &[EpisodeResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy",
        "sigma1",
        "episode",
        "seed",
        "trans_rmse_m",
        "orient_rmse_deg",
        "mean_utility",
        "wait_fraction",
        "assist_fraction",
        "successful_assists",
        "failed_assists",
    ])?;
    for e in episodes {
        w.write_record([
            e.policy.to_string(),
            format!("{:.2}", e.sigma1),
            e.episode.to_string(),
            e.seed.to_string(),
            format!("{:.6}", e.trans_rmse_m),
            format!("{:.6}", e.orient_rmse_deg),
            format!("{:.6}", e.mean_utility),
            format!("{:.4}", e.wait_fraction),
            format!("{:.4}", e.assist_fraction),
            e.successful_assists.to_string(),
            e.failed_assists.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-tick log of every episode in `episodes`, which should share one
/// policy and `sigma1`. Includes a per-agent RMSE breakdown row per episode.
pub fn write_ticks(path: &Path, episodes: &[&EpisodeResult], agents: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["episode".to_string(), "tick".to_string()];
    for prefix in ["loss", "orient_deg", "reward", "target", "status"] {
        header.extend((1..=agents).map(|i| format!("{prefix}_{i}")));
    }
    header.push("utility".into());
    w.write_record(&header)?;
    for e in episodes {
        for t in &e.ticks {
            let mut rec = vec![e.episode.to_string(), t.tick.to_string()];
            rec.extend(t.losses.iter().map(|v| format!("{v:.6}")));
            rec.extend(t.orientation_errors_deg.iter().map(|v| format!("{v:.6}")));
            match &t.rewards {
                Some(r) => rec.extend(r.iter().map(|v| format!("{v:.6}"))),
                None => rec.extend(std::iter::repeat_n(String::new(), agents)),
            }
            rec.extend(t.targets.iter().map(usize::to_string));
            rec.extend(t.outcomes.iter().map(|o| o.as_str().to_string()));
            rec.push(format!("{:.6}", t.utility));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    let breakdown = path.with_file_name("agent_rmse.csv");
    let mut w = csv::Writer::from_path(breakdown)?;
    let mut header = vec!["episode".to_string()];
    header.extend((1..=agents).map(|i| format!("trans_rmse_m_{i}")));
    w.write_record(&header)?;
    for e in episodes {
        let mut rec = vec![e.episode.to_string()];
        rec.extend(e.agent_trans_rmse_m.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_training(path: &Path, training: &TrainingReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "mean_td_loss", "trans_rmse_m"])?;
    for (e, (l, r)) in training.episode_losses.iter().zip(&training.episode_trans_rmse).enumerate() {
        w.write_record([e.to_string(), format!("{l:.6}"), format!("{r:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd"];

fn colour(p: PolicyKind) -> &'static str {
    PALETTE[PolicyKind::ALL.iter().position(|k| *k == p).unwrap_or(0)]
}

/// Line plot of the mean (over episodes and agents) loss per tick, one line per policy.
pub fn loss_curves_svg(report: &ExperimentReport, sigma1: f64) -> String {
    let (w, h, pad) = (640.0, 360.0, 48.0);
    let mut series: Vec<(PolicyKind, Vec<f64>)> = Vec::new();
    let mut policies: Vec<PolicyKind> = report.summary.iter().map(|r| r.policy).collect();
    policies.dedup();
    for p in policies {
        let eps: Vec<&EpisodeResult> = report.episodes.iter().filter(|e| e.policy == p && e.sigma1 == sigma1).collect();
        let Some(len) = eps.iter().map(|e| e.ticks.len()).min() else { continue };
        let curve = (0..len)
            .map(|t| {
                let s: f64 = eps.iter().map(|e| e.ticks[t].losses.iter().sum::<f64>() / e.ticks[t].losses.len() as f64).sum();
                s / eps.len() as f64
            })
            .collect();
        series.push((p, curve));
    }
    let ymax = series.iter().flat_map(|(_, c)| c.iter().copied()).fold(1e-9, f64::max);
    let xmax = series.iter().map(|(_, c)| c.len()).max().unwrap_or(1).max(2) as f64 - 1.0;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{pad}" y="20">mean localization loss (m), sigma1 = {sigma1:.2}</text>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(svg, r#"<text x="4" y="{}">{ymax:.3}</text>"#, pad + 4.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}">tick {}</text>"#, w - pad - 40.0, h - pad + 16.0, xmax as usize + 1);
    for (k, (p, curve)) in series.iter().enumerate() {
        let pts: Vec<String> = curve
            .iter()
            .enumerate()
            .map(|(t, v)| {
                let x = pad + (w - 2.0 * pad) * t as f64 / xmax;
                let y = h - pad - (h - 2.0 * pad) * v / ymax;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{}"/>"#, pts.join(" "), colour(*p));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" fill="{}">{p}</text>"#, w - pad - 60.0, pad + 16.0 * (k as f64 + 1.0), colour(*p));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Grouped bar chart of transition RMSE per sigma1 and policy.
pub fn rmse_bars_svg(rows: &[SummaryRow]) -> String {
    let (w, h, pad) = (640.0, 360.0, 48.0);
    let mut sigmas: Vec<f64> = Vec::new();
    let mut policies: Vec<PolicyKind> = Vec::new();
    for r in rows {
        if !sigmas.contains(&r.sigma1) {
            sigmas.push(r.sigma1);
        }
        if !policies.contains(&r.policy) {
            policies.push(r.policy);
        }
    }
    let ymax = rows.iter().map(|r| r.trans_rmse_m).fold(1e-9, f64::max);
    let group_w = (w - 2.0 * pad) / sigmas.len().max(1) as f64;
    let bar_w = 0.8 * group_w / policies.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{pad}" y="20">transition RMSE (m), max {ymax:.4}</text>"#);
    for (g, s) in sigmas.iter().enumerate() {
        let x0 = pad + g as f64 * group_w + 0.1 * group_w;
        let _ = writeln!(svg, r#"<text x="{x0:.1}" y="{}">sigma1 = {s:.2}</text>"#, h - pad + 16.0);
        for (k, p) in policies.iter().enumerate() {
            if let Some(r) = rows.iter().find(|r| r.sigma1 == *s && r.policy == *p) {
                let bh = (h - 2.0 * pad) * r.trans_rmse_m / ymax;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{bh:.1}" fill="{}"><title>{p} {:.4}</title></rect>"#,
                    x0 + k as f64 * bar_w,
                    h - pad - bh,
                    bar_w * 0.9,
                    colour(*p),
                    r.trans_rmse_m
                );
            }
        }
    }
    for (k, p) in policies.iter().enumerate() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" fill="{}">{p}</text>"#, w - pad - 60.0, pad + 16.0 * k as f64, colour(*p));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write `summary.csv`, `episodes.csv`, per-run `ticks.csv`, training curves
/// and optional plots under `dir`. Returns the summary path.
pub fn write_report(dir: &Path, report: &ExperimentReport, agents: usize, plots: bool) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("summary.csv");
    write_summary(&summary, &report.summary)?;
    write_episodes(&dir.join("episodes.csv"), &report.episodes)?;
    for row in &report.summary {
        let run = dir.join("runs").join(format!("{}_sigma{:.2}", row.policy, row.sigma1));
        fs::create_dir_all(&run)?;
        let eps: Vec<&EpisodeResult> = report
            .episodes
            .iter()
            .filter(|e| e.policy == row.policy && e.sigma1 == row.sigma1)
            .collect();
        write_ticks(&run.join("ticks.csv"), &eps, agents)?;
    }
    if let Some(training) = &report.training {
        write_training(&dir.join("training.csv"), training)?;
    }
    if plots {
        fs::write(dir.join("rmse.svg"), rmse_bars_svg(&report.summary))?;
        let mut sigmas: Vec<f64> = report.summary.iter().map(|r| r.sigma1).collect();
        sigmas.dedup();
        for s in sigmas {
            fs::write(dir.join(format!("loss_sigma{s:.2}.svg")), loss_curves_svg(report, s))?;
        }
    }
    Ok(summary)
}
