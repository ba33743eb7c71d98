//! Exponential integrability of `Θ`-plurisubharmonic functions, the
//! Cheng-Yau type gradient bound and the `W^{1,2}` bound on `log(-v)`.

use crate::calculus::{accurate_sum, ddc, min_eigenvalue, InverseMetric};
use crate::error::{Error, Result};
use crate::grid::{HermitianField, ScalarField};

use super::pointwise::min_at;
use super::record::*;

/// `β₀` is the largest grid value whose family supremum of `I(β)` stays
/// below this multiple of the volume.
pub const HORMANDER_VOLUME_FACTOR: f64 = 10.0;

/// Slack for `Θ + dd^c u >= 0` and `Δ v >= -φ`.
pub const HYPOTHESIS_TOL: f64 = 1e-10;

/// Slack for the pointwise identity `Δ log(-v) = Δv/v - |∇ log(-v)|^2`.
pub const IDENTITY_TOL: f64 = 1e-8;

/// `(β₀, C)` from a hörmander record.
pub fn hormander_constants(record: &CheckRecord) -> Option<(f64, f64)> {
    Some((record.value("beta0")?, record.value("C_horm")?))
}

fn beta_key(beta: f64) -> String {
    format!("I_sup[beta={beta}]")
}

/// Picks `β₀` from a table of family suprema `sup_u I(β)`.
pub fn hormander_from_parts(
    beta_grid: &[f64],
    sup_values: &[f64],
    vol: f64,
    hypothesis_held: bool,
) -> CheckRecord {
    let limit = HORMANDER_VOLUME_FACTOR * vol;
    let mut best: Option<usize> = None;
    for (i, (&b, &v)) in beta_grid.iter().zip(sup_values).enumerate() {
        if v < limit && best.is_none_or(|j| b > beta_grid[j]) {
            best = Some(i);
        }
    }
    let mut r = match best {
        Some(i) => CheckRecord::new(HORMANDER, hypothesis_held, limit - sup_values[i], None, 0.0)
            .with("beta0", beta_grid[i])
            .with("C_horm", sup_values[i]),
        None => {
            // report the smallest β so the size of the violation is visible
            let (neg, i) = min_at(&sup_values.iter().map(|v| -v).collect::<Vec<_>>());
            let m = if sup_values.is_empty() {
                f64::NAN
            } else {
                limit + neg
            };
            CheckRecord::new(HORMANDER, hypothesis_held, m, Some(i), 0.0)
                .with_note("no grid beta keeps the family bounded")
        }
    };
    if best.is_none() && r.status == CheckStatus::Pass {
        r.status = CheckStatus::Fail;
    }
    r = r.with("volume", vol);
    for (&b, &v) in beta_grid.iter().zip(sup_values) {
        r = r.with(&beta_key(b), v);
    }
    r
}

/// `I(β) = ∫ e^{-β (u - max u)} dVol_ω`.
pub fn exp_integral(u: &ScalarField, omega: &HermitianField, beta: f64) -> Result<f64> {
    u.grid().check_same(omega.grid())?;
    let m = u.max();
    let det = omega.det();
    Ok(accurate_sum(
        u.values()
            .iter()
            .zip(det.values())
            .map(|(v, d)| (-beta * (v - m)).exp() * d),
    ) * u.grid().cell_volume())
}

/// Whether `Θ + dd^c u >= 0` up to [`HYPOTHESIS_TOL`]; also returns the
/// smallest eigenvalue.
pub fn theta_psh(u: &ScalarField, theta: &HermitianField) -> Result<(bool, f64)> {
    let m = min_eigenvalue(&theta.add(&ddc(u)?)?);
    Ok((m >= -HYPOTHESIS_TOL, m))
}

/// Family-uniform exponential integrability over `family`.
pub fn check_hormander(
    family: &[ScalarField],
    theta: &HermitianField,
    omega: &HermitianField,
    beta_grid: &[f64],
) -> Result<CheckRecord> {
    if family.is_empty() || beta_grid.is_empty() {
        return Err(Error::InvalidArgument("empty family or beta grid".into()));
    }
    if beta_grid.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidArgument(
            "beta values must be positive".into(),
        ));
    }
    let mut hyp = true;
    let mut worst_eig = f64::INFINITY;
    let mut sup = vec![f64::NEG_INFINITY; beta_grid.len()];
    for u in family {
        let (ok, m) = theta_psh(u, theta)?;
        hyp &= ok;
        worst_eig = worst_eig.min(m);
        for (s, &b) in sup.iter_mut().zip(beta_grid) {
            *s = s.max(exp_integral(u, omega, b)?);
        }
    }
    let vol = accurate_sum(omega.det().values().iter().copied()) * omega.grid().cell_volume();
    Ok(hormander_from_parts(beta_grid, &sup, vol, hyp)
        .with("family_size", family.len() as f64)
        .with("min_eig_theta_ddc_u", worst_eig))
}

/// `∫ |∇ log(-v)|^2 <= (1 / min(-v)) ∫ φ`, plus the pointwise identity
/// defect measured against `identity_tol`.
pub fn cheng_yau_from_parts(
    grad_int: f64,
    phi_int: f64,
    min_neg_v: f64,
    identity_defect: f64,
    identity_tol: f64,
    hypothesis_held: bool,
    tol: &Tolerance,
) -> CheckRecord {
    let rhs = phi_int / min_neg_v;
    CheckRecord::new(
        CHENG_YAU,
        hypothesis_held,
        rhs - grad_int,
        None,
        tol.effective(rhs.max(grad_int)),
    )
    .with("gradient_integral", grad_int)
    .with("phi_integral", phi_int)
    .with("min_neg_v", min_neg_v)
    .with("rhs", rhs)
    .with("identity_defect", identity_defect)
    .require(
        identity_defect <= identity_tol,
        "pointwise identity violated",
    )
}

/// Requires `v < 0`, `φ >= 0` and `Δ_g v >= -φ`; integrals are against `dVol_g`.
pub fn check_cheng_yau(
    v: &ScalarField,
    phi: &ScalarField,
    g: &HermitianField,
    tol: &Tolerance,
) -> Result<CheckRecord> {
    v.grid().check_same(phi.grid())?;
    if v.values().iter().any(|&x| !(x < 0.0)) {
        return Ok(CheckRecord::degenerate(
            CHENG_YAU,
            false,
            "v is not negative",
        ));
    }
    let inv = InverseMetric::new(g)?;
    let lap_v = inv.laplacian(v)?;
    let scale = lap_v.sup_norm().max(phi.sup_norm()).max(1.0);
    let hyp = phi.values().iter().all(|&x| x >= -HYPOTHESIS_TOL)
        && lap_v
            .values()
            .iter()
            .zip(phi.values())
            .all(|(l, f)| l + f >= -HYPOTHESIS_TOL * scale);
    let log_neg = v.map(|x| (-x).ln());
    let grad = inv.grad_norm_sq(&log_neg)?;
    let lap_log = inv.laplacian(&log_neg)?;
    let mut defect = 0f64;
    let mut id_scale = 1f64;
    for p in 0..v.len() {
        let rhs = lap_v.values()[p] / v.values()[p] - grad.values()[p];
        defect = defect.max((lap_log.values()[p] - rhs).abs());
        id_scale = id_scale.max(rhs.abs());
    }
    let cell = v.grid().cell_volume();
    let det = inv.det();
    let grad_int = accurate_sum(grad.values().iter().zip(det).map(|(a, d)| a * d)) * cell;
    let phi_int = accurate_sum(phi.values().iter().zip(det).map(|(a, d)| a * d)) * cell;
    let min_neg_v = -v.max();
    Ok(cheng_yau_from_parts(
        grad_int,
        phi_int,
        min_neg_v,
        defect,
        IDENTITY_TOL * id_scale,
        hyp,
        tol,
    ))
}

/// Smallest integer `N >= 1` with `N β >= 2`.
pub fn minimal_power(beta: f64) -> u32 {
    let mut n = (2.0 / beta).ceil().max(1.0) as u32;
    while n > 1 && (n - 1) as f64 * beta >= 2.0 {
        n -= 1;
    }
    while (n as f64) * beta < 2.0 {
        n += 1;
    }
    n
}

/// `((N!)^β e^β C)^{2/(Nβ)} Vol^{1 - 2/(Nβ)}`, bounding `∫ |log(-v)|^2`.
pub fn l2_bound(beta: f64, c_horm: f64, vol: f64) -> f64 {
    let n = minimal_power(beta);
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    let q = 2.0 / (n as f64 * beta);
    (q * (beta * ln_fact + beta + c_horm.ln()) + (1.0 - q) * vol.ln()).exp()
}

/// `∫ |log(-v)|^2 + ∫ |∇ log(-v)|^2 <= C_L2 + C_grad`.
pub fn log_compactness_from_parts(
    l2_int: f64,
    grad_int: f64,
    c_l2: f64,
    c_grad: f64,
    hypothesis_held: bool,
    tol: &Tolerance,
) -> CheckRecord {
    let c = c_l2 + c_grad;
    CheckRecord::new(
        LOG_COMPACTNESS,
        hypothesis_held,
        c - (l2_int + grad_int),
        None,
        tol.effective(c),
    )
    .with("l2_integral", l2_int)
    .with("gradient_integral", grad_int)
    .with("C_L2", c_l2)
    .with("C_grad", c_grad)
    .with("C", c)
    .with("l2_margin", c_l2 - l2_int)
    .with("gradient_margin", c_grad - grad_int)
}

/// `v = u - max u - 1`. `beta` and `c_horm` come from [`check_hormander`]
/// run on a family containing `u`. The gradient constant is
/// `∫ (tr_ω Θ)_+ dVol_ω`, which equals `∫ tr_ω Θ` when the trace is nonnegative.
pub fn check_log_compactness(
    u: &ScalarField,
    theta: &HermitianField,
    omega: &HermitianField,
    beta: f64,
    c_horm: f64,
    tol: &Tolerance,
) -> Result<CheckRecord> {
    let (psh, _) = theta_psh(u, theta)?;
    let i_beta = exp_integral(u, omega, beta)?;
    let hyp = psh && c_horm >= i_beta * (1.0 - 1e-12);
    let inv = InverseMetric::new(omega)?;
    let m = u.max();
    let log_neg = u.map(|x| (m + 1.0 - x).ln());
    let grad = inv.grad_norm_sq(&log_neg)?;
    let tr_theta = inv.trace_of(theta)?;
    let cell = u.grid().cell_volume();
    let det = inv.det();
    let integral =
        |f: &dyn Fn(usize) -> f64| accurate_sum((0..u.len()).map(|p| f(p) * det[p])) * cell;
    let l2 = integral(&|p| log_neg.values()[p].powi(2));
    let gi = integral(&|p| grad.values()[p]);
    let ct = integral(&|p| tr_theta.values()[p].max(0.0));
    let ct_signed = integral(&|p| tr_theta.values()[p]);
    let vol = integral(&|_| 1.0);
    Ok(
        log_compactness_from_parts(l2, gi, l2_bound(beta, c_horm, vol), ct, hyp, tol)
            .with("beta", beta)
            .with("N", minimal_power(beta) as f64)
            .with("C_horm", c_horm)
            .with("integral_tr_theta", ct_signed),
    )
}
