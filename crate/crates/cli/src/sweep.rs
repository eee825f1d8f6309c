//! `sweep`: evaluate quantity groups over an SNR grid, one row per point.
//!
//! Column headers carry units (`_nats`, `_bits`, `_db`, `_dimensionless`).
//! Output is deterministic for a fixed model file and seed: grid points are
//! evaluated in parallel but written in grid order with shortest-round-trip
//! float formatting.

use crate::{grid, Format, Quantity};
use anyhow::{bail, Context, Result};
use mac_immse::config::parse_model_file;
use mac_immse::information::{info_report, InfoReport};
use mac_immse::lowsnr;
use mac_immse::mmse::{mmse_total, MmseReport};
use mac_immse::model::McConfig;
use rayon::prelude::*;
use std::path::Path;

struct Row {
    snr: f64,
    info: Option<InfoReport>,
    mmse: Option<MmseReport>,
    taylor: Option<(f64, f64)>, // (info_taylor, mmse_taylor)
}

pub fn run(
    model_path: &Path,
    grid_spec: &str,
    samples: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    format: Format,
    quantities: &[Quantity],
) -> Result<i32> {
    let parsed = parse_model_file(model_path).context("loading model file")?;
    let grid = grid::parse(grid_spec)?;
    if quantities.is_empty() {
        bail!("no quantities requested");
    }
    let mut mc = parsed.mc;
    if let Some(s) = samples {
        mc = McConfig { samples: s, ..mc };
    }
    if let Some(s) = seed {
        mc = McConfig { seed: s, ..mc };
    }
    mc.validate().context("monte carlo settings")?;

    let want = |q: Quantity| quantities.contains(&q);
    // the truncation-error column pairs the series against the exact
    // estimate, so the taylor group pulls the info estimators in
    let with_info = want(Quantity::Info) || want(Quantity::Taylor);
    let rows: Result<Vec<Row>> = grid
        .par_iter()
        .map(|&snr| -> Result<Row> {
            let model = parsed.model.with_snr(snr)?;
            let info = with_info
                .then(|| info_report(&model, &mc, false))
                .transpose()?;
            let mmse = want(Quantity::Mmse)
                .then(|| mmse_total(&model, &mc))
                .transpose()?;
            let taylor = want(Quantity::Taylor).then(|| {
                (
                    lowsnr::info_expansion(&model, snr).four_term,
                    lowsnr::mmse_expansion(&model, snr),
                )
            });
            Ok(Row {
                snr,
                info,
                mmse,
                taylor,
            })
        })
        .collect();
    let rows = rows?;

    match format {
        Format::Csv => write_csv(out, &rows)?,
        Format::Json => write_json(out, &rows)?,
    }
    Ok(0)
}

fn headers(rows: &[Row]) -> Vec<String> {
    let mut h = vec!["snr_linear".to_string(), "snr_db".to_string()];
    let r = &rows[0];
    if r.info.is_some() {
        for name in ["joint", "i1_nc", "i2_nc", "i1_cond", "i2_cond"] {
            h.push(format!("{name}_nats"));
            h.push(format!("{name}_bits"));
            h.push(format!("{name}_stderr_nats"));
        }
    }
    if r.mmse.is_some() {
        h.extend(
            [
                "mmse1_dimensionless",
                "mmse2_dimensionless",
                "total_mmse_dimensionless",
                "total_mmse_stderr_dimensionless",
                "psi_re_dimensionless",
                "psi_im_dimensionless",
                "cross_correction_dimensionless",
            ]
            .map(String::from),
        );
    }
    if r.taylor.is_some() {
        h.extend(
            [
                "info_taylor_nats",
                "mmse_taylor_dimensionless",
                "info_taylor_abs_err_nats",
            ]
            .map(String::from),
        );
    }
    h
}

fn values(row: &Row) -> Vec<f64> {
    let mut v = vec![row.snr, grid::db(row.snr)];
    if let Some(info) = &row.info {
        for e in [
            info.joint,
            info.i1_nc,
            info.i2_nc,
            info.i1_cond,
            info.i2_cond,
        ] {
            v.push(e.nats);
            v.push(e.bits);
            v.push(e.stderr);
        }
    }
    if let Some(m) = &row.mmse {
        v.extend([
            m.mmse1,
            m.mmse2,
            m.total,
            m.stderr,
            m.psi.re,
            m.psi.im,
            m.cross_correction,
        ]);
    }
    if let Some((it, mt)) = row.taylor {
        let abs_err = row
            .info
            .as_ref()
            .map(|i| (i.joint.nats - it).abs())
            .unwrap_or(f64::NAN);
        v.extend([it, mt, abs_err]);
    }
    v
}

fn write_csv(out: &Path, rows: &[Row]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(out).with_context(|| format!("cannot write {}", out.display()))?;
    w.write_record(headers(rows))?;
    for row in rows {
        w.write_record(values(row).iter().map(|x| format!("{x}")))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(out: &Path, rows: &[Row]) -> Result<()> {
    let names = headers(rows);
    let arr: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            for (name, value) in names.iter().zip(values(row)) {
                obj.insert(name.clone(), serde_json::json!(value));
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    std::fs::write(out, serde_json::to_string_pretty(&arr)?)
        .with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}
