//! `verify`: run residual checks and write a JSON report.
//!
//! Checks are pass/fail against their tolerances (scaled by `--tol-scale`);
//! diagnostics are reported values that never affect the exit code. The
//! report is written even when checks fail; the exit code is 1 if any check
//! failed, 0 otherwise.

use crate::VerifyWhich;
use anyhow::{Context, Result};
use mac_immse::closed_form;
use mac_immse::gradients::{
    verify_conditional_identity, verify_gradient, verify_snr_identity, GradientTarget, User,
};
use mac_immse::lowsnr;
use mac_immse::model::{bpsk_scalar_mac, MacModel, McConfig};
use mac_immse::oracle;
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct Entry {
    name: String,
    kind: &'static str, // "check" | "diagnostic"
    passed: Option<bool>,
    value: f64,
    tolerance: Option<f64>,
    note: Option<String>,
}

impl Entry {
    fn check(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            kind: "check",
            passed: Some(value.abs() <= tol),
            value,
            tolerance: Some(tol),
            note: None,
        }
    }

    fn diagnostic(name: impl Into<String>, value: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: "diagnostic",
            passed: None,
            value,
            tolerance: None,
            note: Some(note.into()),
        }
    }
}

#[derive(Serialize)]
struct Report {
    model: String,
    snr: f64,
    samples: usize,
    seed: u64,
    tol_scale: f64,
    entries: Vec<Entry>,
    /// Full serialized reports backing the identity checks (auditable).
    details: serde_json::Map<String, serde_json::Value>,
    passed: bool,
}

pub fn run(
    which: VerifyWhich,
    model_path: Option<&Path>,
    samples: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
    tol_scale: f64,
    corrupt_gradient: bool,
) -> Result<i32> {
    let (model, mut mc, model_name) = match model_path {
        Some(p) => {
            let parsed = mac_immse::config::parse_model_file(p).context("loading model file")?;
            (parsed.model, parsed.mc, p.display().to_string())
        }
        None => (
            bpsk_scalar_mac(1.0)?,
            McConfig::default(),
            "builtin scalar BPSK MAC, snr 1".to_string(),
        ),
    };
    if let Some(s) = samples {
        mc.samples = s;
    }
    if let Some(s) = seed {
        mc.seed = s;
    }
    mc.validate()?;

    let mut entries = Vec::new();
    let mut details = serde_json::Map::new();
    if matches!(which, VerifyWhich::Identity | VerifyWhich::All) {
        identity_checks(&model, &mc, tol_scale, &mut entries, &mut details)?;
    }
    if matches!(which, VerifyWhich::Gradients | VerifyWhich::All) {
        gradient_checks(
            &model,
            &mc,
            tol_scale,
            corrupt_gradient,
            &mut entries,
            &mut details,
        )?;
    }
    if matches!(which, VerifyWhich::Lowsnr | VerifyWhich::All) {
        lowsnr_checks(&model, &mut entries)?;
    }
    if matches!(which, VerifyWhich::ClosedForms | VerifyWhich::All) {
        closed_form_checks(tol_scale, &mut entries)?;
    }

    let passed = entries.iter().all(|e| e.passed != Some(false));
    let report = Report {
        model: model_name,
        snr: model.snr(),
        samples: mc.samples,
        seed: mc.seed,
        tol_scale,
        entries,
        details,
        passed,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match out {
        Some(p) => {
            std::fs::write(p, &json).with_context(|| format!("cannot write {}", p.display()))?
        }
        None => println!("{json}"),
    }
    for e in &report.entries {
        let status = match e.passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        eprintln!(
            "[{status}] {}: {:+.6e}{}",
            e.name,
            e.value,
            e.tolerance
                .map(|t| format!(" (tol {t:.3e})"))
                .unwrap_or_default()
        );
    }
    Ok(if report.passed { 0 } else { 1 })
}

fn identity_checks(
    model: &MacModel,
    mc: &McConfig,
    tol_scale: f64,
    entries: &mut Vec<Entry>,
    details: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    let delta = 1e-3 * model.snr().max(1.0);
    let r = verify_snr_identity(model, mc, delta)?;
    let tol = tol_scale * (5.0 * r.stderr).max(5e-3);
    entries.push(Entry::check(
        "snr_identity_stated (dI/dsnr - mmse_total - Re psi)",
        r.residual,
        tol,
    ));
    entries.push(Entry::check(
        "snr_identity_cross_corrected (dI/dsnr - mmse_total + 2 Re Tr{A1 C12 A2^H})",
        r.residual_with_cross,
        tol,
    ));
    entries.push(Entry::diagnostic(
        "psi_imaginary_part",
        r.psi.im,
        "difference-form covariance is purely imaginary; its real part is 0",
    ));
    if r.delta_flag {
        entries.push(Entry::diagnostic(
            "fd_step_flag",
            r.d_info_fd - r.d_info_fd_half,
            "derivative estimates at delta and delta/2 disagree; reduce delta",
        ));
    }
    details.insert("snr_identity".into(), serde_json::to_value(&r)?);

    // conditional / non-conditional branches: the decode-second derivative
    // equals the cancelled-channel mmse (asserted); the remaining candidate
    // right-hand sides are reported, not asserted
    let c = verify_conditional_identity(model, mc, delta)?;
    let cond_tol = tol_scale * (5.0 * c.cond_user2.stderr).max(5e-3);
    for cand in &c.cond_user2.candidates {
        match cand.name.as_str() {
            "mmse2_conditional" => entries.push(Entry::check(
                "conditional_identity (d i2_cond/dsnr - cancelled-channel mmse2)",
                cand.residual,
                cond_tol,
            )),
            _ => entries.push(Entry::diagnostic(
                format!("d_i2_cond_minus_{}", cand.name),
                cand.residual,
                "candidate right-hand side, reported only",
            )),
        }
    }
    for cand in &c.nc_user1.candidates {
        entries.push(Entry::diagnostic(
            format!("d_i1_nc_minus_{}", cand.name),
            cand.residual,
            "scaling factor of the decode-first branch left open; reported only",
        ));
    }
    entries.push(Entry::check(
        "differentiated_chain_rule (d joint - d i1_nc - d i2_cond)",
        c.chain_residual,
        tol_scale * (3.0 * c.chain_stderr).max(1e-9),
    ));
    details.insert("conditional_identity".into(), serde_json::to_value(&c)?);
    Ok(())
}

fn gradient_checks(
    model: &MacModel,
    mc: &McConfig,
    tol_scale: f64,
    corrupt: bool,
    entries: &mut Vec<Entry>,
    details: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    let mut reports = Vec::new();
    for target in [
        GradientTarget::JointWrtChannel(User::U1),
        GradientTarget::JointWrtPrecoder(User::U2),
        GradientTarget::NcWrtOtherPrecoder(User::U1),
        GradientTarget::CondWrtPrecoder(User::U2),
    ] {
        let mut r = verify_gradient(model, target, mc, 1e-4)?;
        if corrupt {
            // negative-control hook: shift one analytic entry off the truth
            r.grad[(0, 0)] += mac_immse::C64::new(0.1, 0.0);
            let (max_abs, max_rel) = mac_immse::gradients::deviation_stats(
                &r.grad,
                r.fd_grad.as_ref().expect("fd grad present"),
            );
            r.max_abs_dev = Some(max_abs);
            r.max_rel_dev = Some(max_rel);
        }
        let passed = r.fd_check_passes(tol_scale).unwrap_or(false);
        entries.push(Entry {
            name: format!("gradient_fd_match {:?}", target),
            kind: "check",
            passed: Some(passed),
            value: r.max_rel_dev.unwrap_or(f64::NAN),
            tolerance: Some(tol_scale * 0.02),
            note: None,
        });
        reports.push(r);
    }
    details.insert("gradients".into(), serde_json::to_value(&reports)?);
    // scaled-gradient identity on the assembled expressions
    for user in [User::U1, User::U2] {
        let res = mac_immse::gradients::scaled_gradient_residual(model, user, mc)?;
        entries.push(Entry::check(
            format!("scaled_gradient_identity {user:?}"),
            res,
            tol_scale * 1e-12,
        ));
    }
    Ok(())
}

fn lowsnr_checks(model: &MacModel, entries: &mut Vec<Entry>) -> Result<()> {
    let e = lowsnr::info_expansion(model, 0.05);
    entries.push(Entry::check(
        "lowsnr_six_vs_four_term_cancellation",
        e.six_term - e.four_term,
        1e-13 * e.four_term.abs().max(1.0),
    ));
    let p = lowsnr::psi_expansion(model, 0.05);
    entries.push(Entry::check(
        "lowsnr_psi_first_order_cancellation",
        p.difference,
        1e-13 * p.term_12.abs().max(1.0),
    ));
    // scalar models: exact-vs-truncation cross-check at snr 1e-2
    if model.n_r() == 1 && model.c1.dim() == 1 && model.c2.dim() == 1 {
        let m = model.with_snr(1e-2)?;
        let exact = oracle::scalar_reference(&m, 60)?.joint_info;
        let taylor = lowsnr::info_expansion(&m, 1e-2).four_term;
        entries.push(Entry::check(
            "lowsnr_truncation_rel_error_at_1e-2",
            (exact - taylor) / exact,
            0.01,
        ));
    }
    Ok(())
}

fn closed_form_checks(tol_scale: f64, entries: &mut Vec<Entry>) -> Result<()> {
    let h = 1e-4;
    for snr in [0.25, 1.0, 4.0] {
        let d = closed_form::central_difference(closed_form::guo_bpsk_info, snr, h)?;
        entries.push(Entry::check(
            format!("closed_form_single_user_pairing snr {snr}"),
            d - closed_form::guo_bpsk_mmse(snr)?,
            tol_scale * 1e-6,
        ));
        let d = closed_form::central_difference(closed_form::info2_cond, snr, h)?;
        entries.push(Entry::check(
            format!("closed_form_decode_second_pairing snr {snr}"),
            d - closed_form::mmse2_cond(snr)?,
            tol_scale * 1e-6,
        ));
        let d = closed_form::central_difference(closed_form::info1_scaled, snr, h)?;
        entries.push(Entry::diagnostic(
            format!("closed_form_decode_first_pairing_residual snr {snr}"),
            d - closed_form::mmse1_scaled(snr)?,
            "known structural gap: d info1_scaled/dsnr = (mmse1_scaled - 1/2)/4, \
             not mmse1_scaled; reported, not asserted",
        ));
    }
    let t = closed_form::total_bpsk(100.0)?;
    entries.push(Entry::check(
        "closed_form_saturation_i1p_bits_minus_half",
        t.info1_scaled * mac_immse::NATS_TO_BITS - 0.5,
        tol_scale * 0.01,
    ));
    entries.push(Entry::check(
        "closed_form_saturation_sum_bits_minus_1p5",
        t.total_info * mac_immse::NATS_TO_BITS - 1.5,
        tol_scale * 0.02,
    ));
    entries.push(Entry::check(
        "closed_form_psi_successive_low_snr",
        closed_form::psi_bpsk_successive(0.01)?.value,
        10.0 * 0.01 * 0.01,
    ));
    Ok(())
}
