//! The collision multiplier: truncated double sums in the original and
//! polarized variables, dyadic level-set counts against their two-exponent
//! bounds, endpoint slice sums, and a Fourier-side upper estimate for the
//! level-set cardinalities.

use crate::counterexample::BumpZeta;
use crate::error::{LabError, Result};
use crate::torus::{norm_sq, q_bilinear, q_form, shell_index, shell_member, DyadicIndex, QuadraticForm};
use num_complex::Complex64;
use rayon::prelude::*;

/// Membership tolerance for the window χ_{[0,1]}; with irrational θ² the
/// boundary is never hit exactly, so a small closed margin is safe.
const WINDOW_TOL: f64 = 1e-9;

fn in_window(w: f64) -> bool {
    (-WINDOW_TOL..=1.0 + WINDOW_TOL).contains(&w)
}

/// ⟨x⟩² = 1 + |x|², exact integer norm before the float conversion.
fn bracket_sq(x: &[i64]) -> f64 {
    1.0 + norm_sq(x) as f64
}

/// Which algebraic form of the double sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Original,
    Polarized,
}

impl Representation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Representation::Original => "original",
            Representation::Polarized => "polarized",
        }
    }
}

/// Default sup-norm truncation for the double sum.
pub fn default_truncation(d: usize) -> i64 {
    if d <= 2 {
        1 << 10
    } else {
        1 << 7
    }
}

#[derive(Debug, Clone)]
pub struct MultiplierQuery {
    pub tau: f64,
    pub p: Vec<i64>,
    pub alpha: f64,
    pub form: QuadraticForm,
    pub truncation: i64,
    pub representation: Representation,
}

impl MultiplierQuery {
    pub fn new(
        tau: f64,
        p: Vec<i64>,
        alpha: f64,
        form: QuadraticForm,
        truncation: i64,
        representation: Representation,
    ) -> Result<Self> {
        if p.len() != form.dim() {
            return Err(LabError::DimensionMismatch {
                form_d: form.dim(),
                arg_d: p.len(),
            });
        }
        if truncation < 1 {
            return Err(LabError::InvalidArgument(format!(
                "truncation must be ≥ 1, got {truncation}"
            )));
        }
        if !(alpha > 0.0) || !tau.is_finite() {
            return Err(LabError::InvalidArgument(
                "need alpha > 0 and finite tau".into(),
            ));
        }
        Ok(Self {
            tau,
            p,
            alpha,
            form,
            truncation,
            representation,
        })
    }
}

/// Integer candidates u ∈ [lo, hi] where a·u² + b·u + c may lie in
/// [wlo, whi] (a ≥ 0). Root intervals are widened before rounding, so this
/// emits a slight superset — callers must re-check the exact window per
/// point — but never emits the same u twice.
fn scan_quadratic(
    a: f64,
    b: f64,
    c: f64,
    wlo: f64,
    whi: f64,
    lo: i64,
    hi: i64,
    f: &mut impl FnMut(i64),
) {
    if lo > hi {
        return;
    }
    let guard = 1e-6 * (1.0 + wlo.abs() + whi.abs());
    let (wlo, whi) = (wlo - guard, whi + guard);
    let mut ranges = [(0.0f64, -1.0f64); 2];
    if a == 0.0 {
        if b == 0.0 {
            if c >= wlo && c <= whi {
                ranges[0] = (lo as f64, hi as f64);
            }
        } else {
            let (u1, u2) = ((wlo - c) / b, (whi - c) / b);
            ranges[0] = (u1.min(u2), u1.max(u2));
        }
    } else {
        let disc_outer = b * b - 4.0 * a * (c - whi);
        if disc_outer >= 0.0 {
            let s = disc_outer.sqrt();
            let (u1, u2) = ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a));
            let disc_inner = b * b - 4.0 * a * (c - wlo);
            if disc_inner >= 0.0 {
                let si = disc_inner.sqrt();
                let (v1, v2) = ((-b - si) / (2.0 * a), (-b + si) / (2.0 * a));
                ranges[0] = (u1, v1);
                ranges[1] = (v2, u2);
            } else {
                ranges[0] = (u1, u2);
            }
        }
    }
    let mut next_free = lo;
    for &(rlo, rhi) in &ranges {
        if rhi < rlo {
            continue;
        }
        let start = ((rlo.floor() - 1.0).max(next_free as f64)) as i64;
        let end = ((rhi.ceil() + 1.0).min(hi as f64)) as i64;
        for u in start..=end {
            f(u);
        }
        if end >= start {
            next_free = end + 1;
        }
    }
}

/// Odometer over per-axis inclusive ranges, holding out the pivot axis for
/// the caller to fill. With `pivot = None` every axis is visited.
fn for_each_box(
    ranges: &[(i64, i64)],
    pivot: Option<usize>,
    buf: &mut Vec<i64>,
    f: &mut impl FnMut(&mut Vec<i64>),
) {
    let axes: Vec<usize> = (0..ranges.len())
        .filter(|&a| Some(a) != pivot)
        .collect();
    for &a in &axes {
        if ranges[a].0 > ranges[a].1 {
            return;
        }
        buf[a] = ranges[a].0;
    }
    if let Some(a) = pivot {
        if ranges[a].0 > ranges[a].1 {
            return;
        }
    }
    loop {
        f(buf);
        let mut i = axes.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            let a = axes[i];
            buf[a] += 1;
            if buf[a] <= ranges[a].1 {
                break;
            }
            buf[a] = ranges[a].0;
            if i == 0 {
                return;
            }
        }
    }
}

/// The pivot axis for the linear window solve: the one with the largest
/// |θ_a²·m_a|, giving the shortest candidate interval. Requires m ≠ 0.
fn pivot_axis(form: &QuadraticForm, m: &[i64]) -> usize {
    let ts = form.theta_sq();
    let mut best = 0;
    let mut best_val = -1.0;
    for (a, &ma) in m.iter().enumerate() {
        let v = ts[a] * (ma.abs() as f64);
        if v > best_val {
            best_val = v;
            best = a;
        }
    }
    best
}

fn window_original(tau: f64, form: &QuadraticForm, p: &[i64], m: &[i64], n: &[i64]) -> f64 {
    let ts = form.theta_sq();
    let mut w = tau;
    for a in 0..p.len() {
        let pnm = (p[a] - n[a] - m[a]) as f64;
        w += ts[a] * (pnm * pnm + (n[a] as f64) * (n[a] as f64) - (m[a] as f64) * (m[a] as f64));
    }
    w
}

/// For fixed m, call f(n) for every n in the box satisfying the polarized
/// window shift − 2Q(n, m) ∈ [0, 1]; pivot-solved, exact re-check inside.
fn polarized_scan(
    form: &QuadraticForm,
    shift: f64,
    m: &[i64],
    ranges_n: &[(i64, i64)],
    nbuf: &mut Vec<i64>,
    f: &mut impl FnMut(&[i64], f64),
) {
    let d = m.len();
    let ts = form.theta_sq();
    let a = pivot_axis(form, m);
    let coef = 2.0 * ts[a] * m[a] as f64;
    let (plo, phi) = ranges_n[a];
    for_each_box(ranges_n, Some(a), nbuf, &mut |nbuf| {
        let mut s = 0.0;
        for i in 0..d {
            if i != a {
                s += 2.0 * ts[i] * (nbuf[i] as f64) * (m[i] as f64);
            }
        }
        // window = shift − s − coef·u ∈ [0,1] ⟺ coef·u + (s − shift) ∈ [−1, 0]
        let mut candidates = Vec::new();
        scan_quadratic(0.0, coef, s - shift, -1.0, 0.0, plo, phi, &mut |u| {
            candidates.push(u)
        });
        for u in candidates {
            nbuf[a] = u;
            let w = shift - 2.0 * q_bilinear(form, nbuf, m).expect("dims checked");
            if in_window(w) {
                f(nbuf, w);
            }
        }
    });
}

/// Truncated double sum in the selected representation. The original form
/// includes the m = 0 and n = 0 terms; the polarized form skips them.
pub fn multiplier_sum(q: &MultiplierQuery) -> f64 {
    let d = q.form.dim();
    let r = q.truncation;
    let ts = q.form.theta_sq().to_vec();
    let shift = q.tau + q_form(&q.form, &q.p).expect("validated");
    let prefactor = bracket_sq(&q.p).powf(q.alpha);
    let width = (2 * r + 1) as usize;
    let total: usize = width.pow(d as u32);
    let block = 1024usize;
    let nblocks = total.div_ceil(block);
    let ranges_n: Vec<(i64, i64)> = vec![(-r, r); d];
    let partials: Vec<f64> = (0..nblocks)
        .into_par_iter()
        .map(|bi| {
            let mut acc = 0.0;
            let mut m = vec![0i64; d];
            let mut nbuf = vec![0i64; d];
            let mut pnm = vec![0i64; d];
            for idx in bi * block..((bi + 1) * block).min(total) {
                let mut rem = idx;
                for a in (0..d).rev() {
                    m[a] = (rem % width) as i64 - r;
                    rem /= width;
                }
                match q.representation {
                    Representation::Polarized => {
                        if m.iter().all(|&x| x == 0) {
                            continue;
                        }
                        let mp_b = {
                            let diff: Vec<i64> =
                                (0..d).map(|a| m[a] - q.p[a]).collect();
                            bracket_sq(&diff)
                        };
                        polarized_scan(
                            &q.form,
                            shift,
                            &m,
                            &ranges_n,
                            &mut nbuf,
                            &mut |n, _w| {
                                if n.iter().all(|&x| x == 0) {
                                    return;
                                }
                                for a in 0..d {
                                    pnm[a] = q.p[a] - n[a] - m[a];
                                }
                                let np: Vec<i64> =
                                    (0..d).map(|a| n[a] - q.p[a]).collect();
                                acc += 1.0
                                    / (mp_b.powf(q.alpha)
                                        * bracket_sq(&np).powf(q.alpha)
                                        * bracket_sq(&pnm).powf(q.alpha));
                            },
                        );
                    }
                    Representation::Original => {
                        // window is quadratic in the last axis of n
                        let qm = q_form(&q.form, &m).expect("validated");
                        let m_b = bracket_sq(&m).powf(q.alpha);
                        let last = d - 1;
                        let g = (q.p[last] - m[last]) as f64;
                        let a_coef = 2.0 * ts[last];
                        let b_coef = -2.0 * ts[last] * g;
                        for_each_box(&ranges_n, Some(last), &mut nbuf, &mut |nbuf| {
                            let mut crest = q.tau - qm + ts[last] * g * g;
                            for a in 0..last {
                                let pa = (q.p[a] - nbuf[a] - m[a]) as f64;
                                crest += ts[a]
                                    * (pa * pa + (nbuf[a] as f64) * (nbuf[a] as f64));
                            }
                            let mut candidates = Vec::new();
                            scan_quadratic(
                                a_coef, b_coef, crest, 0.0, 1.0, -r, r,
                                &mut |u| candidates.push(u),
                            );
                            for u in candidates {
                                nbuf[last] = u;
                                let w = window_original(q.tau, &q.form, &q.p, &m, nbuf);
                                if !in_window(w) {
                                    continue;
                                }
                                for a in 0..d {
                                    pnm[a] = q.p[a] - nbuf[a] - m[a];
                                }
                                acc += 1.0
                                    / (bracket_sq(&pnm).powf(q.alpha)
                                        * bracket_sq(nbuf).powf(q.alpha)
                                        * m_b);
                            }
                        });
                    }
                }
            }
            acc
        })
        .collect();
    prefactor * partials.iter().sum::<f64>()
}

/// The dyadic level set: pairs (m, n), both nonzero, in their three shells
/// with the window satisfied, enumerated inside [−R, R]^d per variable.
#[derive(Debug, Clone)]
pub struct EnumeratedSet {
    pub pairs: Vec<(Vec<i64>, Vec<i64>)>,
    /// true when a shell box stuck out of the [−R, R] search region, so the
    /// enumeration may be incomplete
    pub clipped: bool,
}

pub fn enumerate_e(
    tau: f64,
    p: &[i64],
    j: DyadicIndex,
    form: &QuadraticForm,
    r: i64,
) -> Result<EnumeratedSet> {
    let d = form.dim();
    if p.len() != d {
        return Err(LabError::DimensionMismatch {
            form_d: d,
            arg_d: p.len(),
        });
    }
    if r < 1 {
        return Err(LabError::InvalidArgument("need R ≥ 1".into()));
    }
    let shift = tau + q_form(form, p)?;
    // Euclidean |x| < 2^j confines each coordinate to [−(2^j − 1), 2^j − 1]
    let w1 = (1i64 << j.j1) - 1;
    let w2 = (1i64 << j.j2) - 1;
    let mut clipped = false;
    let mut clamp = |center: i64, w: i64| -> (i64, i64) {
        if center - w < -r || center + w > r {
            clipped = true;
        }
        ((center - w).max(-r), (center + w).min(r))
    };
    let ranges_m: Vec<(i64, i64)> = p.iter().map(|&pa| clamp(pa, w1)).collect();
    let ranges_n: Vec<(i64, i64)> = p.iter().map(|&pa| clamp(pa, w2)).collect();
    let mut pairs = Vec::new();
    let mut m = vec![0i64; d];
    let mut nbuf = vec![0i64; d];
    let mut diff = vec![0i64; d];
    for_each_box(&ranges_m, None, &mut m, &mut |m| {
        if m.iter().all(|&x| x == 0) {
            return;
        }
        for a in 0..d {
            diff[a] = m[a] - p[a];
        }
        if !shell_member(&diff, j.j1) {
            return;
        }
        let mut found: Vec<Vec<i64>> = Vec::new();
        polarized_scan(form, shift, m, &ranges_n, &mut nbuf, &mut |n, _w| {
            if n.iter().all(|&x| x == 0) {
                return;
            }
            let np: Vec<i64> = (0..d).map(|a| n[a] - p[a]).collect();
            if !shell_member(&np, j.j2) {
                return;
            }
            let pnm: Vec<i64> = (0..d).map(|a| p[a] - n[a] - m[a]).collect();
            if !shell_member(&pnm, j.j3) {
                return;
            }
            found.push(n.to_vec());
        });
        for n in found {
            pairs.push((m.clone(), n));
        }
    });
    Ok(EnumeratedSet { pairs, clipped })
}

/// One dyadic triple with its observed count and the two-exponent bound.
#[derive(Debug, Clone)]
pub struct CountRecord {
    pub j: DyadicIndex,
    pub count: u64,
    pub bound: f64,
    pub ratio: f64,
}

/// Tally the level sets for every dyadic triple with j_max ≤ j_max_cap, in a
/// single pass over the bounding box, and compare each count against
/// 2^{c·(j_min + j_med)} with c = (d−1) + ε.
pub fn dyadic_bound_report(
    tau: f64,
    p: &[i64],
    form: &QuadraticForm,
    j_max_cap: u32,
    epsilon: f64,
) -> Result<Vec<CountRecord>> {
    let d = form.dim();
    if p.len() != d {
        return Err(LabError::DimensionMismatch {
            form_d: d,
            arg_d: p.len(),
        });
    }
    let shift = tau + q_form(form, p)?;
    let side = (j_max_cap + 1) as usize;
    let ncells = side * side * side;
    let w = (1i64 << j_max_cap) - 1;
    let ranges: Vec<(i64, i64)> = p.iter().map(|&pa| (pa - w, pa + w)).collect();
    let width = (2 * w + 1) as usize;
    let total: usize = width.pow(d as u32);
    let block = 1024usize;
    let nblocks = total.div_ceil(block);
    let tallies: Vec<Vec<u64>> = (0..nblocks)
        .into_par_iter()
        .map(|bi| {
            let mut tally = vec![0u64; ncells];
            let mut m = vec![0i64; d];
            let mut nbuf = vec![0i64; d];
            let mut diff = vec![0i64; d];
            for idx in bi * block..((bi + 1) * block).min(total) {
                let mut rem = idx;
                for a in (0..d).rev() {
                    m[a] = ranges[a].0 + (rem % width) as i64;
                    rem /= width;
                }
                if m.iter().all(|&x| x == 0) {
                    continue;
                }
                for a in 0..d {
                    diff[a] = m[a] - p[a];
                }
                let j1 = shell_index(&diff);
                if j1 > j_max_cap {
                    continue;
                }
                polarized_scan(form, shift, &m, &ranges, &mut nbuf, &mut |n, _w| {
                    if n.iter().all(|&x| x == 0) {
                        return;
                    }
                    let np: Vec<i64> = (0..d).map(|a| n[a] - p[a]).collect();
                    let j2 = shell_index(&np);
                    if j2 > j_max_cap {
                        return;
                    }
                    let pnm: Vec<i64> = (0..d).map(|a| p[a] - n[a] - m[a]).collect();
                    let j3 = shell_index(&pnm);
                    if j3 > j_max_cap {
                        return;
                    }
                    tally[(j1 as usize * side + j2 as usize) * side + j3 as usize] += 1;
                });
            }
            tally
        })
        .collect();
    let mut counts = vec![0u64; ncells];
    for t in &tallies {
        for (c, &v) in counts.iter_mut().zip(t.iter()) {
            *c += v;
        }
    }
    let c_exp = (d as f64 - 1.0) + epsilon;
    let mut records = Vec::with_capacity(ncells);
    for j1 in 0..=j_max_cap {
        for j2 in 0..=j_max_cap {
            for j3 in 0..=j_max_cap {
                let j = DyadicIndex::new(j1, j2, j3);
                let count = counts[(j1 as usize * side + j2 as usize) * side + j3 as usize];
                let bound = 2f64.powf(c_exp * (j.j_min() + j.j_med()) as f64);
                records.push(CountRecord {
                    j,
                    count,
                    bound,
                    ratio: count as f64 / bound,
                });
            }
        }
    }
    Ok(records)
}

/// Σ_{|y| ≤ M} 1/(a + y²), via the closed full-lattice value
/// (π/√a)·coth(π√a) minus the tail: 32 explicit terms, then an
/// Euler–Maclaurin expansion whose truncation error is below 1e−15
/// relative once the expansion point clears M + 33.
fn trunc_inv_quad_sum(a: f64, m: i64) -> f64 {
    let sa = a.sqrt();
    let full = std::f64::consts::PI / sa / (std::f64::consts::PI * sa).tanh();
    let mut tail = 0.0;
    for y in m + 1..m + 33 {
        tail += 1.0 / (a + (y as f64) * (y as f64));
    }
    let y0 = (m + 33) as f64;
    let q = a + y0 * y0;
    let integral = (std::f64::consts::FRAC_PI_2 - (y0 / sa).atan()) / sa;
    let f0 = 1.0 / q;
    let f1 = -2.0 * y0 / (q * q);
    let f3 = 24.0 * y0 / (q * q * q) - 48.0 * y0 * y0 * y0 / (q * q * q * q);
    tail += integral + 0.5 * f0 - f1 / 12.0 + f3 / 720.0;
    full - 2.0 * tail
}

/// The endpoint slice: the n = p, m₁ = 0 sub-sum at α = (d−1)/2,
/// Σ_{m⊥ ∈ [−M,M]^{d−1}} κ^{d−1} / ((1+κ²+|m⊥|²)(1+|m⊥|²))^{(d−1)/2},
/// summed directly in 2D and via analytic row sums in 3D.
pub fn endpoint_slice_sum(kappa: i64, form: &QuadraticForm, m: i64, d: usize) -> Result<f64> {
    if d != form.dim() {
        return Err(LabError::DimensionMismatch {
            form_d: form.dim(),
            arg_d: d,
        });
    }
    let threshold = 2.0 / form.theta_sq()[0];
    if kappa < 2 || (kappa as f64) <= threshold {
        return Err(LabError::InvalidArgument(format!(
            "kappa = {kappa} does not force m₁ = 0; need kappa ≥ 2 and kappa > {threshold}"
        )));
    }
    if m < kappa {
        return Err(LabError::InvalidArgument(format!(
            "transverse cutoff M = {m} must be ≥ kappa = {kappa}"
        )));
    }
    let k2 = (kappa as f64) * (kappa as f64);
    match d {
        2 => {
            let term = |x: i64| {
                let s = (x * x) as f64;
                kappa as f64 / ((1.0 + k2 + s).sqrt() * (1.0 + s).sqrt())
            };
            let mut acc = term(0);
            for x in 1..=m {
                acc += 2.0 * term(x);
            }
            Ok(acc)
        }
        3 => {
            // κ²/((1+κ²+s)(1+s)) = 1/(1+s) − 1/(1+κ²+s) exactly, so each
            // x-row reduces to a difference of closed 1D lattice sums
            let row = |x: i64| {
                let x2 = (x * x) as f64;
                trunc_inv_quad_sum(1.0 + x2, m) - trunc_inv_quad_sum(1.0 + k2 + x2, m)
            };
            let mut acc = row(0);
            for x in 1..=m {
                acc += 2.0 * row(x);
            }
            Ok(acc)
        }
        _ => Err(LabError::InvalidArgument(format!(
            "endpoint slice implemented for d = 2, 3 only, got {d}"
        ))),
    }
}

/// Upper estimate for #E via the Fourier side: each level-set member
/// contributes ζ̂(τ + Q(p) − (Q(η′) − Q(η))/2) ≥ 1 under the substitution
/// η = n − m, η′ = n + m, and ζ̂ ≥ 0 lets the sum run over the enclosing
/// per-axis boxes. Evaluated as a time integral of ζ against factorized 1D
/// quadratic exponential sums.
pub fn phase_count_fourier_bound(
    tau: f64,
    p: &[i64],
    j: DyadicIndex,
    form: &QuadraticForm,
    bump: &BumpZeta,
) -> Result<f64> {
    let d = form.dim();
    if p.len() != d {
        return Err(LabError::DimensionMismatch {
            form_d: d,
            arg_d: p.len(),
        });
    }
    let shift = tau + q_form(form, p)?;
    let r1 = 1i64 << (j.j1.max(j.j2) + 1);
    let r2 = 1i64 << (j.j2.max(j.j3) + 2);
    let r3 = 1i64 << (j.j1.max(j.j3) + 2);
    let r4 = 1i64 << j.j3;
    let r5 = 1i64 << (j.j1.max(j.j2) + 1);
    let mut eta = Vec::with_capacity(d);
    let mut etap = Vec::with_capacity(d);
    for a in 0..d {
        let pa = p[a];
        let lo = (-r1).max(pa - r2).max(-pa - r3);
        let hi = r1.min(pa + r2).min(-pa + r3);
        if lo > hi {
            return Ok(0.0);
        }
        eta.push((lo, hi));
        let lo = (pa - r4).max(2 * pa - r5);
        let hi = (pa + r4).min(2 * pa + r5);
        if lo > hi {
            return Ok(0.0);
        }
        etap.push((lo, hi));
    }
    let ts = form.theta_sq();
    let extreme = |(lo, hi): (i64, i64)| -> f64 {
        let v = lo.abs().max(hi.abs()) as f64;
        v * v
    };
    let mut band = shift.abs();
    for a in 0..d {
        band += 0.5 * ts[a] * (extreme(eta[a]) + extreme(etap[a]));
    }
    let delta = bump.delta();
    // 32 samples per period of the fastest phase keeps the trapezoid rule
    // in its rapidly convergent regime for this smooth compact integrand
    let samples = (((32.0 * band * delta / std::f64::consts::PI).ceil() as u64) + 1).max(65);
    if samples > 1 << 26 {
        return Err(LabError::Resolution(format!(
            "phase-count quadrature needs {samples} samples; box or shift too large"
        )));
    }
    let h = 2.0 * delta / (samples - 1) as f64;
    let line_sum = |range: (i64, i64), rate: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in range.0..=range.1 {
            let phase = rate * (v as f64) * (v as f64);
            let (s, c) = phase.sin_cos();
            acc += Complex64::new(c, s);
        }
        acc
    };
    let total: Complex64 = (0..samples)
        .into_par_iter()
        .map(|i| {
            let t = -delta + h * i as f64;
            let z = bump.eval(t);
            if z == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let mut prod = Complex64::new(z, 0.0);
            let (s, c) = (-shift * t).sin_cos();
            prod *= Complex64::new(c, s);
            for a in 0..d {
                prod *= line_sum(etap[a], 0.5 * t * ts[a]);
                prod *= line_sum(eta[a], -0.5 * t * ts[a]);
            }
            prod
        })
        .reduce(|| Complex64::new(0.0, 0.0), |x, y| x + y);
    Ok((total * h).re)
}
