//! The eleven experiments. Each runner resolves its keys, validates them
//! against the target module's preconditions, runs the library routine, and
//! packs rows, fits, and pass/fail checks into a [`Report`].

use gp_lab::counterexample::{forcing_threshold, ratio_experiment, BumpZeta};
use gp_lab::density::{
    collision, duhamel_residual, factorized_with_threshold, rescale_density, to_text,
    CollisionSign, DuhamelVariant, FourierDensityMatrix, Lattice, RescaleDirection,
};
use gp_lab::error::{LabError, Result};
use gp_lab::expsum::{divisor_count, l4_plancherel, lp_time_norm, required_samples, ExpSumSpec};
use gp_lab::fit::fit_line;
use gp_lab::multiplier::{
    dyadic_bound_report, endpoint_slice_sum, multiplier_sum, CountRecord, MultiplierQuery,
    Representation,
};
use gp_lab::nls::{self, SpectralField};
use gp_lab::torus::q_form;
use gp_lab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::Config;
use crate::report::{cell, Check, Report};

const PI: f64 = std::f64::consts::PI;

/// Entries of a checkpointed order-1 density matrix below this modulus are
/// pruned; keeps trajectory checkpoints to the dynamically relevant support.
const CHECKPOINT_THRESHOLD: f64 = 1e-10;

/// Configure the rayon pool from the `threads` key and return the count that
/// actually applies (0 keeps the library default).
pub fn init_threads(cfg: &Config) -> Result<usize> {
    let t = cfg.get_usize("threads")?;
    if t > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| LabError::InvalidArgument(format!("config key 'threads': {e}")))?;
    }
    Ok(rayon::current_num_threads())
}

pub fn run(cfg: &mut Config) -> Result<Report> {
    match cfg.experiment() {
        "expsum-l4" => expsum_l4(cfg),
        "expsum-lp" => expsum_lp(cfg),
        "divisor" => divisor(cfg),
        "multiplier-scan" => multiplier_scan(cfg),
        "dyadic-count" => dyadic_count(cfg),
        "endpoint-slice" => endpoint_slice(cfg),
        "nls-converge" => nls_converge(cfg),
        "hierarchy-residual" => hierarchy_residual(cfg),
        "rescale-check" => rescale_check(cfg),
        "extremizer-sweep" => extremizer_sweep(cfg),
        "bump-verify" => bump_verify(cfg),
        other => unreachable!("resolve() admitted unknown experiment {other}"),
    }
}

/// Dyadic sweep n_min, 2 n_min, … ≤ n_max; at least two points so the slope
/// regression is defined.
fn dyadic_sweep(cfg: &Config) -> Result<Vec<u64>> {
    let n_min = cfg.get_u64("n_min")?;
    let n_max = cfg.get_u64("n_max")?;
    if n_min < 1 || n_max < 2 * n_min {
        return Err(LabError::InvalidArgument(format!(
            "config keys 'n_min'/'n_max': need 1 <= n_min and n_max >= 2 n_min for a slope, got {n_min}/{n_max}"
        )));
    }
    let mut ns = Vec::new();
    let mut n = n_min;
    while n <= n_max {
        ns.push(n);
        n *= 2;
    }
    Ok(ns)
}

fn expsum_l4(cfg: &mut Config) -> Result<Report> {
    let b = cfg.get_i64("b")?;
    let ns = dyadic_sweep(cfg)?;
    let mut rep = Report::new(cfg.spec, &["n", "samples", "quadrature", "oracle", "rel_err"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut worst = 0.0f64;
    for &n in &ns {
        // The exact count first: it carries the resolution guard (N <= 4096).
        let oracle = l4_plancherel(b, n)?;
        let spec = ExpSumSpec::new(b, n, 1.0, (0.0, 2.0 * PI))?;
        let samples = required_samples(&spec, 4.0)?;
        let quad = lp_time_norm(&spec, 4.0, samples)?;
        let rel = (quad - oracle).abs() / oracle;
        worst = worst.max(rel);
        rep.push_row(vec![n.to_string(), samples.to_string(), cell(quad), cell(oracle), cell(rel)]);
        xs.push((n as f64).ln());
        ys.push(quad.ln());
    }
    let fit = fit_line(&xs, &ys);
    rep.fits.push(("ln_quadrature_vs_ln_n", fit));
    rep.checks.push(Check::le("oracle_rel_err", worst, 1e-6));
    rep.checks.push(Check::le("slope", fit.slope, 2.2));
    Ok(rep)
}

fn expsum_lp(cfg: &mut Config) -> Result<Report> {
    let p = cfg.get_f64("p")?;
    if !(p >= 2.0) || !p.is_finite() {
        return Err(LabError::InvalidArgument(format!(
            "config key 'p': need 2 <= p < inf for the growth threshold, got {p}"
        )));
    }
    let b = cfg.get_i64("b")?;
    let ns = dyadic_sweep(cfg)?;
    let mut rep = Report::new(cfg.spec, &["n", "samples", "integral"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &n in &ns {
        let spec = ExpSumSpec::new(b, n, 1.0, (0.0, 2.0 * PI))?;
        let samples = required_samples(&spec, p)?;
        let integral = lp_time_norm(&spec, p, samples)?;
        rep.push_row(vec![n.to_string(), samples.to_string(), cell(integral)]);
        xs.push((n as f64).ln());
        ys.push(integral.ln());
    }
    let fit = fit_line(&xs, &ys);
    rep.fits.push(("ln_integral_vs_ln_n", fit));
    rep.checks.push(Check::le("slope", fit.slope, p - 2.0 + 0.2));
    Ok(rep)
}

fn divisor(cfg: &mut Config) -> Result<Report> {
    let b = cfg.get_i64("b")?;
    let n = cfg.get_u64("n")?;
    if n < 1 {
        return Err(LabError::InvalidArgument("config key 'n': must be >= 1".into()));
    }
    let mut rep = Report::new(cfg.spec, &["l", "count"]);
    let mut max_offdiag = 0u64;
    if let Some(raw) = cfg.raw("l") {
        let l: i64 = raw.parse().map_err(|_| {
            LabError::InvalidArgument(format!("config key 'l': cannot parse '{raw}' as an integer"))
        })?;
        if n > 4096 {
            return Err(LabError::Resolution(format!(
                "divisor: N = {n} exceeds the exact-count range (max 4096)"
            )));
        }
        let count = divisor_count(l, b, n);
        if l != 0 {
            max_offdiag = count;
        }
        rep.push_row(vec![l.to_string(), count.to_string()]);
    } else {
        if n > 512 {
            return Err(LabError::Resolution(format!(
                "divisor scan: N = {n} enumerates N^2 level sets; max 512 (give 'l' to count one level)"
            )));
        }
        let mut counts: std::collections::BTreeMap<i128, u64> = std::collections::BTreeMap::new();
        let (b, n) = (b as i128, n as i128);
        for m1 in b..b + n {
            for m2 in b..b + n {
                *counts.entry(m1 * m1 - m2 * m2).or_insert(0) += 1;
            }
        }
        for (l, count) in &counts {
            if *l != 0 {
                max_offdiag = max_offdiag.max(*count);
            }
            rep.push_row(vec![l.to_string(), count.to_string()]);
        }
    }
    // Far-offset regime: each level away from the diagonal is hit at most once.
    if (b as i128).unsigned_abs() >= 10 * (n as u128) * (n as u128) + 1 {
        rep.checks.push(Check::le("far_offset_unique", max_offdiag as f64, 1.0));
    } else {
        cfg.notices.push(format!(
            "notice: far-offset uniqueness check skipped (|b| < 10 N^2 + 1 = {})",
            10 * (n as u128) * (n as u128) + 1
        ));
    }
    Ok(rep)
}

/// `p` defaults to `scale` times the first unit vector, recorded in the echo.
fn resolve_p(cfg: &mut Config, d: usize, scale: i64) -> Result<Vec<i64>> {
    if cfg.raw("p").is_none() {
        let mut v = vec![0i64; d];
        v[0] = scale;
        let text: Vec<String> = v.iter().map(|c| c.to_string()).collect();
        cfg.resolve_key("p", text.join(","));
    }
    let p = cfg.get_i64_list("p")?;
    if p.len() != d {
        return Err(LabError::InvalidArgument(format!(
            "config key 'p': {} entries but d = {d}",
            p.len()
        )));
    }
    Ok(p)
}

fn multiplier_scan(cfg: &mut Config) -> Result<Report> {
    let form = cfg.form()?;
    let d = form.dim();
    let tau = cfg.get_f64("tau")?;
    let p = resolve_p(cfg, d, 1)?;
    let alpha = cfg.get_f64("alpha")?;
    let mut r_max = cfg.get_i64("truncation")?;
    if r_max < 0 {
        return Err(LabError::InvalidArgument(format!(
            "config key 'truncation': must be >= 0 (0 = dimension default), got {r_max}"
        )));
    }
    if r_max == 0 {
        // Interactive default: the inner scan makes the sum O(R^(2d-1)), so
        // the library's bulk radius default_truncation(d) runs for minutes.
        r_max = if d <= 2 { 128 } else { 32 };
        cfg.resolve_key("truncation", r_max.to_string());
    }
    let mut radii = vec![(r_max / 4).max(1), (r_max / 2).max(1), r_max];
    radii.dedup();
    let mut rep = Report::new(cfg.spec, &["representation", "truncation", "value"]);
    let mut last = [0.0f64; 2];
    for (i, repr) in [Representation::Original, Representation::Polarized].iter().enumerate() {
        for &r in &radii {
            let q = MultiplierQuery::new(tau, p.clone(), alpha, form.clone(), r, *repr)?;
            let value = multiplier_sum(&q);
            rep.push_row(vec![repr.as_str().to_string(), r.to_string(), cell(value)]);
            last[i] = value;
        }
    }
    // No pass/fail here: the scan is exploratory; the gap between the two
    // representations at full truncation is reported for the record.
    rep.extra.insert("representation_gap_at_max".into(), json!((last[0] - last[1]).abs()));
    Ok(rep)
}

fn max_ratio(records: &[CountRecord]) -> f64 {
    records
        .iter()
        .filter(|r| r.count > 0)
        .map(|r| r.ratio)
        .fold(0.0, f64::max)
}

fn dyadic_count(cfg: &mut Config) -> Result<Report> {
    let form = cfg.form()?;
    let d = form.dim();
    let p = resolve_p(cfg, d, 12)?;
    let cap = cfg.get_u32("cap")?;
    let cap_lo = cfg.get_u32("cap_lo")?;
    if !(1..=8).contains(&cap) || cap_lo < 1 || cap_lo > cap {
        return Err(LabError::InvalidArgument(format!(
            "config keys 'cap'/'cap_lo': need 1 <= cap_lo <= cap <= 8, got {cap_lo}/{cap}"
        )));
    }
    let epsilon = cfg.get_f64("epsilon")?;
    if !(epsilon >= 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "config key 'epsilon': must be >= 0, got {epsilon}"
        )));
    }
    let tau = match cfg.raw("tau") {
        Some(_) => cfg.get_f64("tau")?,
        None => {
            let t = q_form(&form, &p)? - 2.0 * form.theta_sq()[0] + 0.4;
            cfg.resolve_key("tau", format!("{t}"));
            t
        }
    };
    let lo = dyadic_bound_report(tau, &p, &form, cap_lo, epsilon)?;
    let hi = dyadic_bound_report(tau, &p, &form, cap, epsilon)?;
    let mut rep = Report::new(cfg.spec, &["j1", "j2", "j3", "count", "bound", "ratio"]);
    for r in &hi {
        rep.push_row(vec![
            r.j.j1.to_string(),
            r.j.j2.to_string(),
            r.j.j3.to_string(),
            r.count.to_string(),
            cell(r.bound),
            cell(r.ratio),
        ]);
    }
    let (m_lo, m_hi) = (max_ratio(&lo), max_ratio(&hi));
    let growth = m_hi / m_lo;
    rep.checks.push(Check {
        name: "ratio_growth",
        value: growth,
        threshold: format!("<= 2 (cap {cap_lo} -> {cap}, nonempty)"),
        pass: m_lo > 0.0 && growth <= 2.0,
    });
    rep.extra.insert("max_ratio_lo".into(), json!(m_lo));
    rep.extra.insert("max_ratio_hi".into(), json!(m_hi));
    Ok(rep)
}

fn endpoint_slice(cfg: &mut Config) -> Result<Report> {
    let form = cfg.form()?;
    let d = form.dim();
    if d != 2 && d != 3 {
        return Err(LabError::InvalidArgument(format!(
            "endpoint-slice is defined for d in {{2, 3}}, got d = {d}"
        )));
    }
    let k_lo = cfg.get_u32("kappa_log2_min")?;
    let k_hi = match cfg.raw("kappa_log2_max") {
        Some(_) => cfg.get_u32("kappa_log2_max")?,
        None => {
            let k = if d == 2 { 14 } else { 9 };
            cfg.resolve_key("kappa_log2_max", k.to_string());
            k
        }
    };
    if k_lo < 1 || k_hi < k_lo + 1 {
        return Err(LabError::InvalidArgument(format!(
            "config keys 'kappa_log2_min'/'kappa_log2_max': need 1 <= min < max for a regression, got {k_lo}/{k_hi}"
        )));
    }
    let k_cap = if d == 2 { 14 } else { 10 };
    if k_hi > k_cap {
        return Err(LabError::Resolution(format!(
            "endpoint-slice: kappa_log2_max = {k_hi} exceeds the supported range (max {k_cap} in {d}D)"
        )));
    }
    let m_key = cfg.get_i64("m")?;
    if m_key < 0 {
        return Err(LabError::InvalidArgument(format!(
            "config key 'm': must be >= 0 (0 = kappa^2 per row), got {m_key}"
        )));
    }
    let mut rep = Report::new(cfg.spec, &["kappa", "m", "value", "ln_kappa"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for e in k_lo..=k_hi {
        let kappa = 1i64 << e;
        let m = if m_key == 0 { kappa * kappa } else { m_key };
        let value = endpoint_slice_sum(kappa, &form, m, d)?;
        let lnk = (kappa as f64).ln();
        rep.push_row(vec![kappa.to_string(), m.to_string(), cell(value), cell(lnk)]);
        xs.push(lnk);
        ys.push(value);
    }
    let fit = fit_line(&xs, &ys);
    rep.fits.push(("value_vs_ln_kappa", fit));
    rep.checks.push(Check::positive("slope", fit.slope));
    rep.checks.push(Check::ge("fit_quality", fit.r_squared, 0.99));
    Ok(rep)
}

/// `modes` syntax: `xi_1,..,xi_d:re,im` triples joined by ';'.
fn parse_modes(cfg: &Config, d: usize) -> Result<Vec<(Vec<i64>, Complex64)>> {
    let raw = cfg.raw("modes").ok_or_else(|| {
        LabError::InvalidArgument("config key 'modes' is required".into())
    })?;
    let bad = |part: &str, why: &str| {
        LabError::InvalidArgument(format!("config key 'modes': entry '{part}' {why}"))
    };
    let mut out = Vec::new();
    for part in raw.split(';') {
        let Some((freq, amp)) = part.split_once(':') else {
            return Err(bad(part, "is missing the ':' between frequency and amplitude"));
        };
        let key: Vec<i64> = freq
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad(part, "has a non-integer frequency")))
            .collect::<Result<_>>()?;
        if key.len() != d {
            return Err(bad(part, &format!("has {} frequency entries but d = {d}", key.len())));
        }
        let comps: Vec<f64> = amp
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad(part, "has a non-real amplitude")))
            .collect::<Result<_>>()?;
        let [re, im] = comps[..] else {
            return Err(bad(part, "needs an amplitude of the form re,im"));
        };
        out.push((key, Complex64::new(re, im)));
    }
    Ok(out)
}

fn nls_converge(cfg: &mut Config) -> Result<Report> {
    let form = cfg.form()?;
    let d = form.dim();
    let grid = cfg.get_usize("grid")?;
    let b0 = cfg.get_f64("b0")?;
    let t_end = cfg.get_f64("t")?;
    let dt = cfg.get_f64("dt")?;
    let levels = cfg.get_usize("levels")?;
    let stride = cfg.get_usize("stride")?;
    if !(3..=10).contains(&levels) {
        return Err(LabError::InvalidArgument(format!(
            "config key 'levels': need 3..=10 for an observed order, got {levels}"
        )));
    }
    let modes = parse_modes(cfg, d)?;
    let field = SpectralField::from_modes(&form, grid, b0, &modes)?;
    let mut rep = Report::new(
        cfg.spec,
        &["level", "dt", "steps", "mass_drift", "energy_drift", "alias_max", "self_err"],
    );
    let mut terminals: Vec<SpectralField> = Vec::new();
    let mut level_rows: Vec<(f64, u64, f64, f64, f64)> = Vec::new();
    let mut mass_worst = 0.0f64;
    for i in 0..levels {
        let dt_i = dt / (1u64 << i) as f64;
        let traj = nls::evolve(&field, t_end, dt_i, stride)?;
        let m0 = nls::mass(&traj[0].1);
        let e0 = nls::energy(&traj[0].1);
        let mut m_drift = 0.0f64;
        let mut e_drift = 0.0f64;
        let mut alias = 0.0f64;
        for (_, state) in &traj {
            m_drift = m_drift.max((nls::mass(state) - m0).abs());
            e_drift = e_drift.max((nls::energy(state) - e0).abs());
            alias = alias.max(nls::alias_fraction(state));
        }
        mass_worst = mass_worst.max(m_drift);
        let steps = (t_end / dt_i).round() as u64;
        if i == levels - 1 {
            // Checkpoint the finest trajectory as order-1 density matrices
            // and keep its conserved-quantity series in the summary.
            let cutoff = (grid / 2) as i64;
            let (mut ts, mut ms, mut es, mut als) = (vec![], vec![], vec![], vec![]);
            for (idx, (tt, state)) in traj.iter().enumerate() {
                let gamma = factorized_with_threshold(
                    &state.modes(),
                    1,
                    d,
                    cutoff,
                    Lattice::Classical,
                    CHECKPOINT_THRESHOLD,
                )?;
                rep.checkpoints
                    .push((format!("state{idx:03}.txt"), to_text(&gamma, &form)?));
                ts.push(*tt);
                ms.push(nls::mass(state));
                es.push(nls::energy(state));
                als.push(nls::alias_fraction(state));
            }
            rep.extra.insert(
                "series".into(),
                json!({ "t": ts, "mass": ms, "energy": es, "alias": als }),
            );
        }
        terminals.push(traj.into_iter().last().expect("evolve records the end").1);
        level_rows.push((dt_i, steps, m_drift, e_drift, alias));
    }
    let mut self_errs = Vec::new();
    for i in 0..levels - 1 {
        self_errs.push(terminals[i].l2_distance(&terminals[i + 1])?);
    }
    for (i, (dt_i, steps, m_drift, e_drift, alias)) in level_rows.iter().enumerate() {
        let self_err = self_errs.get(i).map(|e| cell(*e)).unwrap_or_default();
        rep.push_row(vec![
            i.to_string(),
            cell(*dt_i),
            steps.to_string(),
            cell(*m_drift),
            cell(*e_drift),
            cell(*alias),
            self_err,
        ]);
    }
    let orders: Vec<f64> =
        self_errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = *orders.last().expect("levels >= 3");
    rep.extra.insert("orders".into(), json!(orders));
    rep.extra
        .insert("dt_levels".into(), json!(level_rows.iter().map(|r| r.0).collect::<Vec<_>>()));
    rep.checks.push(Check::in_range("order", order, 1.8, 2.2));
    rep.checks.push(Check::le("mass_drift", mass_worst, 1e-10));
    Ok(rep)
}

fn hierarchy_residual(cfg: &mut Config) -> Result<Report> {
    let form = cfg.form()?;
    let d = form.dim();
    let grid = cfg.get_usize("grid")?;
    let b0 = cfg.get_f64("b0")?;
    let t_end = cfg.get_f64("t")?;
    let dt = cfg.get_f64("dt")?;
    let k_max = cfg.get_usize("k_max")?;
    let stride = cfg.get_usize("stride")?;
    let alpha = cfg.get_f64("alpha")?;
    let xi = cfg.get_f64("xi")?;
    if k_max < 2 {
        return Err(LabError::InvalidArgument(format!(
            "config key 'k_max': the residual couples entry k to k+1, need >= 2, got {k_max}"
        )));
    }
    let modes = parse_modes(cfg, d)?;
    let traj_at = |b0v: f64, dtv: f64| -> Result<Vec<(f64, gp_lab::density::HierarchySequence)>> {
        let f = SpectralField::from_modes(&form, grid, b0v, &modes)?;
        nls::factorized_trajectory(&f, t_end, dtv, k_max, stride)
    };
    let coarse = traj_at(b0, dt)?;
    let fine = traj_at(b0, dt / 2.0)?;
    let r_coarse = duhamel_residual(&coarse, b0, &form, alpha, xi, DuhamelVariant::Retarded)?;
    let r_fine = duhamel_residual(&fine, b0, &form, alpha, xi, DuhamelVariant::Retarded)?;
    let r_verbatim = duhamel_residual(&coarse, b0, &form, alpha, xi, DuhamelVariant::Verbatim)?;
    let linear = traj_at(0.0, dt)?;
    let l_retarded = duhamel_residual(&linear, 0.0, &form, alpha, xi, DuhamelVariant::Retarded)?;
    let l_verbatim = duhamel_residual(&linear, 0.0, &form, alpha, xi, DuhamelVariant::Verbatim)?;
    let mut rep = Report::new(cfg.spec, &["b0", "dt", "variant", "residual"]);
    for (b, t, v, r) in [
        (b0, dt, "retarded", r_coarse),
        (b0, dt / 2.0, "retarded", r_fine),
        (b0, dt, "verbatim", r_verbatim),
        (0.0, dt, "retarded", l_retarded),
        (0.0, dt, "verbatim", l_verbatim),
    ] {
        rep.push_row(vec![cell(b), cell(t), v.to_string(), cell(r)]);
    }
    for (idx, (_, seq)) in coarse.iter().enumerate() {
        rep.checkpoints
            .push((format!("state{idx:03}.txt"), to_text(&seq.entries[0], &form)?));
    }
    let order = (r_coarse / r_fine).log2();
    rep.extra.insert("verbatim_minus_retarded".into(), json!(r_verbatim - r_coarse));
    rep.checks.push(Check::in_range("order", order, 1.8, 2.2));
    rep.checks.push(Check::le("linear_retarded", l_retarded, 1e-10));
    rep.checks.push(Check::le("linear_verbatim", l_verbatim, 1e-10));
    Ok(rep)
}

/// Random sparse Hermitian order-2 matrix with entries in the cutoff box.
fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, cutoff: i64, pairs: usize) -> Result<FourierDensityMatrix> {
    let mut entries = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let key: Vec<i64> = (0..4 * d).map(|_| rng.gen_range(-cutoff..=cutoff)).collect();
        let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        entries.push((key, amp));
    }
    let g = FourierDensityMatrix::from_entries(2, d, cutoff, Lattice::Classical, entries)?;
    Ok(g.add_scaled(&g.adjoint(), Complex64::new(1.0, 0.0))?.scale(Complex64::new(0.5, 0.0)))
}

fn rescale_check(cfg: &mut Config) -> Result<Report> {
    let form = cfg.form()?;
    let d = form.dim();
    let matrices = cfg.get_usize("matrices")?;
    let cutoff = cfg.get_i64("cutoff")?;
    let pairs = cfg.get_usize("pairs")?;
    if matrices < 1 || cutoff < 1 || pairs < 1 {
        return Err(LabError::InvalidArgument(
            "config keys 'matrices'/'cutoff'/'pairs': all must be >= 1".into(),
        ));
    }
    let seed = cfg.get_u64("seed")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda: f64 = form.thetas().iter().product::<f64>().powi(-2);
    let mut rep = Report::new(cfg.spec, &["index", "commute_residual", "roundtrip_residual"]);
    let (mut worst_c, mut worst_r) = (0.0f64, 0.0f64);
    for i in 0..matrices {
        let g = random_hermitian(&mut rng, d, cutoff, pairs)?;
        let stretched = rescale_density(&g, &form, RescaleDirection::ToGeneral)?;
        let lhs = collision(&stretched, 1, CollisionSign::Full)?;
        let rhs = rescale_density(&collision(&g, 1, CollisionSign::Full)?, &form, RescaleDirection::ToGeneral)?
            .scale(Complex64::new(lambda, 0.0));
        let commute = lhs.max_abs_diff(&rhs);
        let back = rescale_density(&stretched, &form, RescaleDirection::ToClassical)?;
        let roundtrip = back.max_abs_diff(&g);
        worst_c = worst_c.max(commute);
        worst_r = worst_r.max(roundtrip);
        rep.push_row(vec![i.to_string(), cell(commute), cell(roundtrip)]);
    }
    rep.checks.push(Check::le("max_commute", worst_c, 1e-12));
    rep.checks.push(Check::le("max_roundtrip", worst_r, 1e-12));
    Ok(rep)
}

fn extremizer_sweep(cfg: &mut Config) -> Result<Report> {
    let form = cfg.form()?;
    let d = form.dim();
    if d != 2 && d != 3 {
        return Err(LabError::InvalidArgument(format!(
            "extremizer-sweep is defined for d in {{2, 3}}, got d = {d}"
        )));
    }
    let alpha = match cfg.raw("alpha") {
        Some(_) => cfg.get_f64("alpha")?,
        None => {
            let a = if d == 2 { 0.5 } else { 1.0 };
            cfg.resolve_key("alpha", format!("{a}"));
            a
        }
    };
    let delta = cfg.get_f64("delta")?;
    let delta_max = BumpZeta::delta_max();
    if !(delta > 0.0) || delta > delta_max {
        return Err(LabError::InvalidArgument(format!(
            "config key 'delta': need 0 < delta <= {delta_max}, got {delta}"
        )));
    }
    let delta_alt = match cfg.raw("delta_alt") {
        Some(_) => cfg.get_f64("delta_alt")?,
        None => {
            let a = delta / 2.0;
            cfg.resolve_key("delta_alt", format!("{a}"));
            a
        }
    };
    if delta_alt < 0.0 || delta_alt > delta_max {
        return Err(LabError::InvalidArgument(format!(
            "config key 'delta_alt': need 0 <= delta_alt <= {delta_max} (0 disables), got {delta_alt}"
        )));
    }
    let k_lo = cfg.get_u32("kappa_log2_min")?;
    let k_hi = match cfg.raw("kappa_log2_max") {
        Some(_) => cfg.get_u32("kappa_log2_max")?,
        None => {
            let k = if d == 2 { 12 } else { 9 };
            cfg.resolve_key("kappa_log2_max", k.to_string());
            k
        }
    };
    if k_hi < k_lo + 1 {
        return Err(LabError::InvalidArgument(format!(
            "config keys 'kappa_log2_min'/'kappa_log2_max': need min < max for a regression, got {k_lo}/{k_hi}"
        )));
    }
    let k_cap = if d == 2 { 13 } else { 10 };
    if k_hi > k_cap {
        return Err(LabError::Resolution(format!(
            "extremizer-sweep: kappa_log2_max = {k_hi} exceeds the supported range (max {k_cap} in {d}D)"
        )));
    }
    // The family only forces past 2 / theta_1^2; name the value in the error.
    let threshold = forcing_threshold(&form);
    if (1i64 << k_lo) as f64 <= threshold {
        return Err(LabError::InvalidArgument(format!(
            "config key 'kappa_log2_min': kappa = {} is at or below the forcing threshold 2/theta_1^2 = {threshold}",
            1i64 << k_lo
        )));
    }
    let kappas: Vec<i64> = (k_lo..=k_hi).map(|e| 1i64 << e).collect();
    let mut rep = Report::new(
        cfg.spec,
        &["delta", "kappa", "ratio", "ratio_sq", "b_plus_part", "b_minus_part", "ln_kappa"],
    );
    let push_sweep = |rep: &mut Report, dl: f64| -> Result<gp_lab::counterexample::RatioReport> {
        let sweep = ratio_experiment(&kappas, alpha, dl, &form, d)?;
        for row in &sweep.rows {
            rep.push_row(vec![
                cell(dl),
                row.kappa.to_string(),
                cell(row.ratio),
                cell(row.ratio_sq),
                cell(row.b_plus_part),
                cell(row.b_minus_part),
                cell(row.ln_kappa),
            ]);
        }
        Ok(sweep)
    };
    let main = push_sweep(&mut rep, delta)?;
    rep.fits.push(("ratio_sq_vs_ln_kappa", main.fit));
    let spread = {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for row in &main.rows {
            lo = lo.min(row.b_minus_part);
            hi = hi.max(row.b_minus_part);
        }
        hi / lo - 1.0
    };
    rep.checks.push(Check::positive("slope", main.fit.slope));
    rep.checks.push(Check::ge("fit_quality", main.fit.r_squared, 0.95));
    rep.checks.push(Check {
        name: "bminus_flat",
        value: spread,
        threshold: "< 1e-1".into(),
        pass: spread < 0.1,
    });
    if delta_alt > 0.0 {
        let alt = push_sweep(&mut rep, delta_alt)?;
        rep.fits.push(("ratio_sq_vs_ln_kappa_alt", alt.fit));
        rep.checks.push(Check::positive("alt_slope", alt.fit.slope));
    }
    Ok(rep)
}

fn bump_verify(cfg: &mut Config) -> Result<Report> {
    let delta = cfg.get_f64("delta")?;
    let zeta = BumpZeta::new(delta)?;
    let mut max_outside = 0.0f64;
    for t in [delta + 1e-12, 1.5 * delta, 2.0 * delta, 10.0] {
        max_outside = max_outside.max(zeta.eval(t).abs()).max(zeta.eval(-t).abs());
    }
    let mut min_inside = f64::INFINITY;
    for t in [0.0, 0.5 * delta, 0.9 * delta] {
        min_inside = min_inside.min(zeta.eval(t)).min(zeta.eval(-t));
    }
    let mut min_wide = f64::INFINITY;
    for i in 0..=2000 {
        let xi = -50.0 + 100.0 * i as f64 / 2000.0;
        min_wide = min_wide.min(zeta.hat(xi));
    }
    let mut min_core = f64::INFINITY;
    for i in 0..=200 {
        let xi = -1.0 + 2.0 * i as f64 / 200.0;
        min_core = min_core.min(zeta.hat(xi));
    }
    let mut rep = Report::new(cfg.spec, &["property", "value"]);
    for (name, value) in [
        ("support_max_outside", max_outside),
        ("interior_min", min_inside),
        ("hat_min_wide", min_wide),
        ("hat_min_core", min_core),
    ] {
        rep.push_row(vec![name.to_string(), cell(value)]);
    }
    rep.checks.push(Check {
        name: "support_exact",
        value: max_outside,
        threshold: "== 0 (and interior > 0)".into(),
        pass: max_outside == 0.0 && min_inside > 0.0,
    });
    rep.checks.push(Check::ge("hat_nonnegative", min_wide, -1e-9));
    rep.checks.push(Check::ge("hat_core", min_core, 1.0));
    Ok(rep)
}
