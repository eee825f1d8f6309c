//! `figure1`: per-user and sum rates of the scalar BPSK MAC.
//!
//! Emits the closed-form decode-first/decode-second curves, the successive
//! covariance term, the two-parallel-channels reference, and exact Monte
//! Carlo counterparts (joint, decode-first and decode-second rates from the
//! sampled model). Optionally renders the rate curves to a small SVG.

use crate::grid;
use anyhow::{Context, Result};
use mac_immse::closed_form::total_bpsk;
use mac_immse::information::info_report;
use mac_immse::model::{bpsk_scalar_mac, McConfig};
use mac_immse::NATS_TO_BITS;
use rayon::prelude::*;
use std::path::Path;

struct FigRow {
    snr: f64,
    i1p_bits: f64,
    i2p_bits: f64,
    sum_bits: f64,
    parallel_bits: f64,
    mmse1p: f64,
    mmse2_cond: f64,
    psi_succ: f64,
    total_mmse: f64,
    mc_joint_bits: f64,
    mc_joint_stderr_bits: f64,
    mc_i1nc_bits: f64,
    mc_i2cond_bits: f64,
}

const HEADERS: [&str; 14] = [
    "snr_linear",
    "snr_db",
    "i1p_bits",
    "i2p_bits",
    "sum_bits",
    "parallel_sum_bits",
    "mmse1p_dimensionless",
    "mmse2_cond_dimensionless",
    "psi_successive_dimensionless",
    "total_mmse_dimensionless",
    "mc_joint_bits",
    "mc_joint_stderr_bits",
    "mc_i1nc_bits",
    "mc_i2cond_bits",
];

pub fn run(
    out: &Path,
    svg: Option<&Path>,
    grid_spec: &str,
    samples: usize,
    seed: u64,
) -> Result<i32> {
    let grid = grid::parse(grid_spec)?;
    let mc = McConfig {
        seed,
        samples,
        batch: 4096,
    };
    let rows: Result<Vec<FigRow>> = grid
        .par_iter()
        .map(|&snr| -> Result<FigRow> {
            let cf = total_bpsk(snr)?;
            let model = bpsk_scalar_mac(snr)?;
            let mcr = info_report(&model, &mc, false)?;
            Ok(FigRow {
                snr,
                i1p_bits: cf.info1_scaled * NATS_TO_BITS,
                i2p_bits: cf.info2_cond * NATS_TO_BITS,
                sum_bits: cf.total_info * NATS_TO_BITS,
                parallel_bits: cf.parallel_info * NATS_TO_BITS,
                mmse1p: cf.mmse1_scaled,
                mmse2_cond: cf.mmse2_cond,
                psi_succ: cf.psi_successive,
                total_mmse: cf.total_mmse,
                mc_joint_bits: mcr.joint.bits,
                mc_joint_stderr_bits: mcr.joint.stderr * NATS_TO_BITS,
                mc_i1nc_bits: mcr.i1_nc.bits,
                mc_i2cond_bits: mcr.i2_cond.bits,
            })
        })
        .collect();
    let rows = rows?;

    let mut w =
        csv::Writer::from_path(out).with_context(|| format!("cannot write {}", out.display()))?;
    w.write_record(HEADERS)?;
    for r in &rows {
        w.write_record(
            [
                r.snr,
                grid::db(r.snr),
                r.i1p_bits,
                r.i2p_bits,
                r.sum_bits,
                r.parallel_bits,
                r.mmse1p,
                r.mmse2_cond,
                r.psi_succ,
                r.total_mmse,
                r.mc_joint_bits,
                r.mc_joint_stderr_bits,
                r.mc_i1nc_bits,
                r.mc_i2cond_bits,
            ]
            .iter()
            .map(|x| format!("{x}")),
        )?;
    }
    w.flush()?;

    if let Some(svg_path) = svg {
        let plot = render_svg(&rows);
        std::fs::write(svg_path, plot)
            .with_context(|| format!("cannot write {}", svg_path.display()))?;
    }
    Ok(0)
}

/// Minimal self-contained SVG line plot: rates (bits) against snr in dB.
fn render_svg(rows: &[FigRow]) -> String {
    let (w, h, ml, mb) = (640.0, 420.0, 60.0, 50.0);
    let x_of = |db: f64, lo: f64, hi: f64| ml + (db - lo) / (hi - lo) * (w - ml - 20.0);
    let lo = grid::db(rows[0].snr);
    let hi = grid::db(rows[rows.len() - 1].snr);
    let ymax = 2.2;
    let y_of = |bits: f64| (h - mb) - bits / ymax * (h - mb - 20.0);

    type Series = fn(&FigRow) -> f64;
    let series: [(&str, &str, Series); 4] = [
        ("#1f77b4", "decode-first rate", |r| r.i1p_bits),
        ("#ff7f0e", "decode-second rate", |r| r.i2p_bits),
        ("#2ca02c", "sum rate", |r| r.sum_bits),
        ("#d62728", "parallel reference", |r| r.parallel_bits),
    ];
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<g stroke=\"#444\" stroke-width=\"1\">\
         <line x1=\"{ml}\" y1=\"20\" x2=\"{ml}\" y2=\"{y0}\"/><line x1=\"{ml}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\"/></g>\n",
        y0 = h - mb,
        x1 = w - 20.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">snr (dB)</text>\n",
        (ml + w - 20.0) / 2.0,
        h - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">rate (bits)</text>\n",
        (h - mb) / 2.0,
        (h - mb) / 2.0
    ));
    for (k, (color, label, f)) in series.iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x_of(grid::db(r.snr), lo, hi), y_of(f(r))))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{label}</text>\n",
            ml + 10.0,
            34.0 + 14.0 * k as f64
        ));
    }
    s.push_str("</svg>\n");
    s
}
