//! Sharpness constructions: the transverse weight sequence, the endpoint
//! extremizer of order 2, compactly supported bumps with controlled
//! transforms, and the √(ln κ) ratio sweep over the extremizer family.

use crate::density::{
    hk_alpha_norm, required_time_samples_signed, spacetime_norm_signed, CollisionSign,
    FourierDensityMatrix, Lattice,
};
use crate::error::{LabError, Result};
use crate::fit::{fit_line, LineFit};
use crate::torus::QuadraticForm;
use num_complex::Complex64;

/// Smallest κ for which the endpoint window forces m₁ = 0: any m₁ ≠ 0 puts
/// θ₁²κ·m₁ outside [−2, 1] exactly when κ > 2/θ₁².
pub fn forcing_threshold(form: &QuadraticForm) -> f64 {
    2.0 / form.theta_sq()[0]
}

/// Parameters of the endpoint extremizer: frequency κ along the first axis,
/// transverse sup-norm cutoff M on the remaining d−1 axes.
#[derive(Debug, Clone)]
pub struct ExtremizerSpec {
    pub kappa: i64,
    pub m: i64,
    pub form: QuadraticForm,
}

impl ExtremizerSpec {
    pub fn new(kappa: i64, m: i64, form: QuadraticForm) -> Result<Self> {
        if form.dim() < 2 {
            return Err(LabError::InvalidArgument(
                "extremizer needs dimension ≥ 2".into(),
            ));
        }
        let threshold = forcing_threshold(&form);
        if (kappa as f64) <= threshold {
            return Err(LabError::InvalidArgument(format!(
                "kappa = {kappa} does not force m₁ = 0; need kappa > {threshold}"
            )));
        }
        if m < kappa {
            return Err(LabError::InvalidArgument(format!(
                "transverse cutoff M = {m} must be ≥ kappa = {kappa}"
            )));
        }
        Ok(Self { kappa, m, form })
    }

    fn d(&self) -> usize {
        self.form.dim()
    }
}

/// Default transverse cutoff: κ² captures the full logarithmic mass, capped
/// so the (2M+1)^{d−1}-point support stays within memory budgets.
pub fn default_transverse_cutoff(kappa: i64, d: usize) -> i64 {
    let cap = if d <= 2 { 1 << 19 } else { 1 << 9 };
    kappa.saturating_mul(kappa).min(cap).max(kappa)
}

/// Visit m⊥ ∈ [−M, M]^{d−1} in lexicographic order.
fn for_each_transverse(m: i64, d: usize, mut f: impl FnMut(&[i64])) {
    let n = d - 1;
    let mut pt = vec![-m; n];
    loop {
        f(&pt);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            pt[i] += 1;
            if pt[i] <= m {
                break;
            }
            pt[i] = -m;
            if i == 0 {
                return;
            }
        }
    }
}

fn weight_c(kappa: i64, m_perp: &[i64]) -> f64 {
    let d_minus_1 = m_perp.len() as f64;
    let k2 = (kappa * kappa) as f64;
    let m2: f64 = m_perp.iter().map(|&x| (x * x) as f64).sum();
    let quarter = d_minus_1 / 4.0;
    (kappa as f64).powf(d_minus_1 / 2.0)
        / ((1.0 + k2 + m2).powf(quarter) * (1.0 + m2).powf(quarter))
}

/// The Cauchy–Schwarz extremizing weights c_{m⊥} over m⊥ ∈ [−M, M]^{d−1},
/// lexicographic order. ‖c‖₂² is exactly the endpoint slice sum.
pub fn dual_sequence(spec: &ExtremizerSpec) -> Vec<f64> {
    let mut out = Vec::new();
    for_each_transverse(spec.m, spec.d(), |m_perp| {
        out.push(weight_c(spec.kappa, m_perp));
    });
    out
}

/// The order-2 endpoint extremizer: amplitude
/// c_{m⊥} / (⟨(κ,−m⊥)⟩^{(d−1)/2}·⟨(0,−m⊥)⟩^{(d−1)/2}) at the frequency pair
/// ((κ,−m⊥), 0; 0, (0,−m⊥)), zero elsewhere. The weights are arranged so
/// that ‖S^{(2,(d−1)/2)}γ‖² = Σ c² with the brackets cancelling exactly.
pub fn extremizer_gamma(spec: &ExtremizerSpec) -> Result<FourierDensityMatrix> {
    let d = spec.d();
    let alpha = (d as f64 - 1.0) / 2.0;
    let cutoff = spec.kappa.max(spec.m);
    let mut entries = Vec::new();
    for_each_transverse(spec.m, d, |m_perp| {
        let mut key = Vec::with_capacity(4 * d);
        // ξ₁ = (κ, −m⊥)
        key.push(spec.kappa);
        key.extend(m_perp.iter().map(|&x| -x));
        // ξ₂ = 0
        key.extend(std::iter::repeat(0).take(d));
        // ξ′₁ = 0
        key.extend(std::iter::repeat(0).take(d));
        // ξ′₂ = (0, −m⊥)
        key.push(0);
        key.extend(m_perp.iter().map(|&x| -x));
        let m2: f64 = m_perp.iter().map(|&x| (x * x) as f64).sum();
        let k2 = (spec.kappa * spec.kappa) as f64;
        let bracket_xi1 = (1.0 + k2 + m2).sqrt();
        let bracket_xip2 = (1.0 + m2).sqrt();
        let amp = weight_c(spec.kappa, m_perp)
            / (bracket_xi1.powf(alpha) * bracket_xip2.powf(alpha));
        entries.push((key, Complex64::new(amp, 0.0)));
    });
    FourierDensityMatrix::from_entries(2, d, cutoff, Lattice::Classical, entries)
}

// --- bump functions ---------------------------------------------------------

/// Mollifier half-width for the smoothed cutoff.
const MOLLIFIER_W: f64 = 0.1;
/// Half-width of the smoothed characteristic function: 2π + w.
const PHI2_HALF_SUPPORT: f64 = 2.0 * std::f64::consts::PI + MOLLIFIER_W;
/// Autocorrelation support half-width L = 2(2π + w).
const PHI3_HALF_SUPPORT: f64 = 2.0 * PHI2_HALF_SUPPORT;

const N_RHO: usize = 32_768; // mollifier CDF / transform grid
const N_PHI2: usize = 16_384; // autocorrelation quadrature grid

fn mollifier_core(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// sin(2πx)/x, the transform of the half-height characteristic function,
/// with the removable singularity handled by series.
fn phi1_hat(x: f64) -> f64 {
    let a = 2.0 * std::f64::consts::PI * x;
    if a.abs() < 1e-6 {
        2.0 * std::f64::consts::PI * (1.0 - a * a / 6.0 + a.powi(4) / 120.0)
    } else {
        a.sin() / x
    }
}

/// Compactly supported bump ζ with supp ζ ⊆ [−δ, δ], ζ̂ ≥ 0 everywhere, and
/// ζ̂ ≥ 1 on [−1, 1]: a smoothed half-height cutoff φ₂, its autocorrelation
/// φ₃ (so φ̂₃ = |φ̂₂|² is structurally nonnegative), rescaled by m = 1/L.
/// The transform is evaluated as the closed product ρ̂·φ̂₁ squared; the time
/// profile by grid quadrature of the autocorrelation integral.
pub struct BumpZeta {
    delta: f64,
    scale: f64, // m·δ with m = 1/L
    ig: f64,    // mass of the unnormalized mollifier core
    cdf: Vec<f64>,
    phi2_grid: Vec<f64>,
    l1_distance: f64,
}

impl BumpZeta {
    /// Largest admissible δ: C·L, where C is the last point with
    /// φ̂₁ ≥ 2 on [0, C] (bisection of sin(2πξ)/ξ = 2).
    pub fn delta_max() -> f64 {
        let f = |x: f64| phi1_hat(x) - 2.0;
        let (mut lo, mut hi) = (0.25, 0.5);
        debug_assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) * PHI3_HALF_SUPPORT
    }

    pub fn new(delta: f64) -> Result<Self> {
        let max = Self::delta_max();
        if !(delta > 0.0 && delta <= max) {
            return Err(LabError::InvalidArgument(format!(
                "bump width delta = {delta} outside (0, {max:.6}]: the transform \
                 would not dominate 1 on [−1, 1]"
            )));
        }
        let w = MOLLIFIER_W;
        let h = 2.0 * w / N_RHO as f64;
        // mass of the core; trapezoid is superalgebraically accurate here
        // (all derivatives vanish at ±1)
        let mut ig = 0.0;
        for i in 0..=N_RHO {
            let u = -1.0 + 2.0 * i as f64 / N_RHO as f64;
            ig += mollifier_core(u);
        }
        ig *= 2.0 / N_RHO as f64;
        // cumulative mollifier mass on [−w, w]
        let mut cdf = Vec::with_capacity(N_RHO + 1);
        cdf.push(0.0);
        let rho = |x: f64| mollifier_core(x / w) / (w * ig);
        let mut acc = 0.0;
        let mut prev = rho(-w);
        for i in 1..=N_RHO {
            let x = -w + h * i as f64;
            let cur = rho(x);
            acc += 0.5 * h * (prev + cur);
            cdf.push(acc);
            prev = cur;
        }
        let mut out = Self {
            delta,
            scale: delta / PHI3_HALF_SUPPORT,
            ig,
            cdf,
            phi2_grid: Vec::new(),
            l1_distance: 0.0,
        };
        // smoothed cutoff sampled on the autocorrelation grid, and its L¹
        // distance from the sharp one (the perturbation budget is 1)
        let a = PHI2_HALF_SUPPORT;
        let h2 = 2.0 * a / N_PHI2 as f64;
        let mut l1 = 0.0;
        let mut grid = Vec::with_capacity(N_PHI2 + 1);
        for i in 0..=N_PHI2 {
            let v = -a + h2 * i as f64;
            let p2 = out.phi2(v);
            let p1 = if v.abs() <= 2.0 * std::f64::consts::PI {
                0.5
            } else {
                0.0
            };
            let wgt = if i == 0 || i == N_PHI2 { 0.5 } else { 1.0 };
            l1 += wgt * h2 * (p2 - p1).abs();
            grid.push(p2);
        }
        out.phi2_grid = grid;
        out.l1_distance = l1;
        Ok(out)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// ‖φ₂ − φ₁‖_{L¹}, which must stay ≤ 1 for the transform bound.
    pub fn l1_distance(&self) -> f64 {
        self.l1_distance
    }

    fn rho(&self, x: f64) -> f64 {
        mollifier_core(x / MOLLIFIER_W) / (MOLLIFIER_W * self.ig)
    }

    /// Mollifier CDF: grid value plus a midpoint correction inside the cell.
    fn rho_cdf(&self, x: f64) -> f64 {
        let w = MOLLIFIER_W;
        if x <= -w {
            return 0.0;
        }
        if x >= w {
            return 1.0;
        }
        let h = 2.0 * w / N_RHO as f64;
        let idx = (((x + w) / h) as usize).min(N_RHO - 1);
        let x0 = -w + h * idx as f64;
        let dx = x - x0;
        self.cdf[idx] + dx * self.rho(x0 + 0.5 * dx)
    }

    /// Smoothed half-height cutoff: ρ_w ∗ (1/2)χ_{[−2π,2π]}.
    fn phi2(&self, x: f64) -> f64 {
        let p = 2.0 * std::f64::consts::PI;
        0.5 * (self.rho_cdf(x + p) - self.rho_cdf(x - p))
    }

    /// Autocorrelation ∫ φ₂(v)·φ₂(y−v) dv by trapezoid on the stored grid;
    /// the integrand vanishes to all orders at the endpoints.
    fn phi3(&self, y: f64) -> f64 {
        if y.abs() >= PHI3_HALF_SUPPORT {
            return 0.0;
        }
        let a = PHI2_HALF_SUPPORT;
        let h2 = 2.0 * a / N_PHI2 as f64;
        let mut acc = 0.0;
        for (i, &p) in self.phi2_grid.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let v = -a + h2 * i as f64;
            acc += p * self.phi2(y - v);
        }
        acc * h2
    }

    /// ζ(t): exactly zero outside [−δ, δ].
    pub fn eval(&self, t: f64) -> f64 {
        if t.abs() >= self.delta {
            return 0.0;
        }
        self.phi3(t / self.scale) / self.scale
    }

    /// ρ̂(x) by trapezoid, resolved against the oscillation of cos(xu).
    fn rho_hat(&self, x: f64) -> f64 {
        let w = MOLLIFIER_W;
        let min_nodes = (8.0 * x.abs() * w / std::f64::consts::PI) as usize;
        let n = min_nodes.max(2048).next_power_of_two();
        let h = 2.0 * w / n as f64;
        let mut acc = 0.0;
        for i in 1..n {
            let u = -w + h * i as f64;
            acc += self.rho(u) * (x * u).cos();
        }
        acc * h
    }

    /// ζ̂(ξ) = |φ̂₂(mδ·ξ)|² — nonnegative by construction.
    pub fn hat(&self, xi: f64) -> f64 {
        let y = self.scale * xi;
        let v = self.rho_hat(y) * phi1_hat(y);
        v * v
    }
}

/// Gaussian comparison bump ψ(t) = e·e^{−t²}: ≥ 1 on [0,1], with the
/// closed-form transform e√π·e^{−ξ²/4}, even and decreasing away from 0.
pub struct BumpPsi;

pub fn bump_psi() -> BumpPsi {
    BumpPsi
}

impl BumpPsi {
    pub fn eval(&self, t: f64) -> f64 {
        std::f64::consts::E * (-t * t).exp()
    }

    pub fn hat(&self, xi: f64) -> f64 {
        std::f64::consts::E * std::f64::consts::PI.sqrt() * (-xi * xi / 4.0).exp()
    }
}

// --- ratio experiment ---------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RatioRow {
    pub kappa: i64,
    pub ratio: f64,
    pub ratio_sq: f64,
    pub b_plus_part: f64,
    pub b_minus_part: f64,
    pub ln_kappa: f64,
}

#[derive(Debug, Clone)]
pub struct RatioReport {
    pub alpha: f64,
    pub delta: f64,
    pub rows: Vec<RatioRow>,
    /// regression of ratio² against ln κ
    pub fit: LineFit,
}

/// Sweep the extremizer family: for each κ, the ratio of the collision
/// spacetime norm over [0, δ] to the data norm, with the two halves of the
/// collision operator measured separately. ratio² is regressed against ln κ.
pub fn ratio_experiment(
    kappa_list: &[i64],
    alpha: f64,
    delta: f64,
    form: &QuadraticForm,
    d: usize,
) -> Result<RatioReport> {
    if d != form.dim() {
        return Err(LabError::DimensionMismatch {
            form_d: form.dim(),
            arg_d: d,
        });
    }
    if kappa_list.is_empty() {
        return Err(LabError::InvalidArgument("empty kappa list".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "window length delta must be positive, got {delta}"
        )));
    }
    let mut rows = Vec::with_capacity(kappa_list.len());
    for &kappa in kappa_list {
        let spec = ExtremizerSpec::new(kappa, default_transverse_cutoff(kappa, d), form.clone())?;
        let gamma = extremizer_gamma(&spec)?;
        let data_norm = hk_alpha_norm(&gamma, alpha);
        let part = |sign: CollisionSign| -> Result<f64> {
            let samples = required_time_samples_signed(&gamma, 1, form, delta, sign)?;
            Ok(spacetime_norm_signed(&gamma, 1, alpha, form, delta, samples, sign)? / data_norm)
        };
        let ratio = part(CollisionSign::Full)?;
        let b_plus_part = part(CollisionSign::Plus)?;
        let b_minus_part = part(CollisionSign::Minus)?;
        rows.push(RatioRow {
            kappa,
            ratio,
            ratio_sq: ratio * ratio,
            b_plus_part,
            b_minus_part,
            ln_kappa: (kappa as f64).ln(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.ln_kappa).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio_sq).collect();
    let fit = if rows.len() >= 2 {
        fit_line(&xs, &ys)
    } else {
        LineFit {
            slope: 0.0,
            intercept: ys[0],
            r_squared: 1.0,
        }
    };
    Ok(RatioReport {
        alpha,
        delta,
        rows,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::symmetry_check;

    fn form2() -> QuadraticForm {
        QuadraticForm::new(&[1.0, std::f64::consts::SQRT_2]).unwrap()
    }

    #[test]
    fn spec_validation() {
        let form = form2();
        assert!((forcing_threshold(&form) - 2.0).abs() < 1e-15);
        assert!(ExtremizerSpec::new(2, 16, form.clone()).is_err()); // κ = threshold
        assert!(ExtremizerSpec::new(16, 8, form.clone()).is_err()); // M < κ
        assert!(ExtremizerSpec::new(16, 16, form).is_ok());
        // the error names the threshold value
        let msg = format!(
            "{}",
            ExtremizerSpec::new(1, 4, QuadraticForm::classical(2)).unwrap_err()
        );
        assert!(msg.contains('2'), "{msg}");
    }

    #[test]
    fn dual_sequence_center_term_and_positivity() {
        let spec = ExtremizerSpec::new(16, 20, form2()).unwrap();
        let c = dual_sequence(&spec);
        assert_eq!(c.len(), 41);
        assert!(c.iter().all(|&x| x > 0.0));
        let center = c[20]; // m₂ = 0
        let expect = 4.0 / (1.0 + 256.0f64).powf(0.25);
        assert!((center - expect).abs() < 1e-14, "{center} vs {expect}");
    }

    #[test]
    fn transverse_weight_norm_grows_like_ln_kappa() {
        let form = form2();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for e in 4..=9 {
            let kappa = 1i64 << e;
            let spec =
                ExtremizerSpec::new(kappa, kappa * kappa, form.clone()).unwrap();
            let c = dual_sequence(&spec);
            let sum_sq: f64 = c.iter().map(|x| x * x).sum();
            xs.push((kappa as f64).ln());
            ys.push(sum_sq);
        }
        let fit = fit_line(&xs, &ys);
        println!("transverse ‖c‖² vs ln κ: slope {:.4} R² {:.6}", fit.slope, fit.r_squared);
        assert!(fit.slope > 0.0);
        assert!(fit.r_squared >= 0.99);
    }

    #[test]
    fn extremizer_support_and_exact_norm_identity() {
        let form = form2();
        for (kappa, m) in [(16i64, 64i64), (64, 256)] {
            let spec = ExtremizerSpec::new(kappa, m, form.clone()).unwrap();
            let gamma = extremizer_gamma(&spec).unwrap();
            assert_eq!(gamma.support_len(), (2 * m + 1) as usize);
            let c = dual_sequence(&spec);
            let sum_sq: f64 = c.iter().map(|x| x * x).sum();
            let norm_sq = hk_alpha_norm(&gamma, 0.5).powi(2);
            assert!(
                (norm_sq - sum_sq).abs() < 1e-12 * sum_sq,
                "κ={kappa}: {norm_sq} vs {sum_sq}"
            );
            // the construction is deliberately not slot-symmetric
            assert!(!symmetry_check(&gamma));
        }
    }

    #[test]
    fn extremizer_norm_identity_3d() {
        let form = QuadraticForm::new(&[1.0, std::f64::consts::SQRT_2, 3.0f64.sqrt()]).unwrap();
        let spec = ExtremizerSpec::new(16, 24, form).unwrap();
        let gamma = extremizer_gamma(&spec).unwrap();
        assert_eq!(gamma.support_len(), 49 * 49);
        let sum_sq: f64 = dual_sequence(&spec).iter().map(|x| x * x).sum();
        let norm_sq = hk_alpha_norm(&gamma, 1.0).powi(2);
        assert!((norm_sq - sum_sq).abs() < 1e-12 * sum_sq);
    }

    #[test]
    fn forcing_window_excludes_nonzero_m1() {
        // θ₁²·κ·m₁ must leave [−2, 1] for every m₁ ≠ 0 once κ clears the
        // threshold — the arithmetic behind the slice restriction
        let form = form2();
        let t1 = form.theta_sq()[0];
        for kappa in [3i64, 16, 4096] {
            assert!(kappa as f64 > forcing_threshold(&form));
            for m1 in [-3i64, -1, 1, 7] {
                let v = t1 * kappa as f64 * m1 as f64;
                assert!(!(-2.0..=1.0).contains(&v), "κ={kappa}, m₁={m1}: {v}");
            }
        }
    }

    #[test]
    fn zeta_support_and_transform_properties() {
        let delta = 0.05;
        let zeta = BumpZeta::new(delta).unwrap();
        assert!(zeta.l1_distance() <= 1.0, "{}", zeta.l1_distance());
        // support: identically zero outside [−δ, δ], positive at the center
        assert_eq!(zeta.eval(delta + 1e-12), 0.0);
        assert_eq!(zeta.eval(-delta - 1e-12), 0.0);
        assert_eq!(zeta.eval(2.0 * delta), 0.0);
        assert!(zeta.eval(0.0) > 0.0);
        // ζ̂ ≥ 1 on [−1, 1]
        for i in 0..=100 {
            let xi = -1.0 + 0.02 * i as f64;
            assert!(zeta.hat(xi) >= 1.0, "ζ̂({xi}) = {}", zeta.hat(xi));
        }
        // ζ̂ ≥ 0 on a coarse wide grid (structural, still sampled)
        for i in 0..10_000 {
            let xi = -50.0 + 0.01 * i as f64;
            assert!(zeta.hat(xi) >= 0.0);
        }
        // oversized δ is rejected, the message naming the threshold
        let max = BumpZeta::delta_max();
        assert!((4.0..5.0).contains(&max), "{max}");
        assert!(BumpZeta::new(max + 0.01).is_err());
        assert!(BumpZeta::new(max - 0.01).is_ok());
    }

    #[test]
    fn zeta_time_and_frequency_routes_agree() {
        // ∫ ζ(t) cos(ξt) dt (time-domain autocorrelation route) must match
        // the closed transform product |φ̂₂|² route
        let delta = 0.8;
        let zeta = BumpZeta::new(delta).unwrap();
        let n = 4096;
        let h = 2.0 * delta / n as f64;
        for xi in [0.0, 0.5, 1.0, 3.7] {
            let mut acc = 0.0;
            for i in 0..=n {
                let t = -delta + h * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * zeta.eval(t) * (xi * t).cos();
            }
            acc *= h;
            let closed = zeta.hat(xi);
            assert!(
                (acc - closed).abs() < 1e-6 * closed.max(1.0),
                "ξ={xi}: quadrature {acc} vs closed {closed}"
            );
        }
    }

    #[test]
    fn psi_properties() {
        let psi = bump_psi();
        assert!(psi.eval(0.5) >= 1.0);
        assert!(psi.eval(0.0) >= 1.0 && psi.eval(1.0) >= 1.0 - 1e-15);
        // transform: even, decreasing on (0,∞), and ψ̂(0) matches quadrature
        assert_eq!(psi.hat(0.7), psi.hat(-0.7));
        assert!(psi.hat(0.5) > psi.hat(1.0));
        let mut acc = 0.0;
        let n = 400_000;
        let h = 20.0 / n as f64;
        for i in 0..=n {
            let t = -10.0 + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * psi.eval(t);
        }
        acc *= h;
        assert!((acc - psi.hat(0.0)).abs() < 1e-12 * psi.hat(0.0));
    }

    #[test]
    fn ratio_experiment_small_sweep() {
        let form = form2();
        let report = ratio_experiment(&[16, 32, 64], 0.5, 0.05, &form, 2).unwrap();
        assert_eq!(report.rows.len(), 3);
        let sqrt_delta = 0.05f64.sqrt();
        for row in &report.rows {
            assert!(row.ratio > 0.0);
            // the minus half maps the extremizer isometrically: its part is
            // exactly √δ for every κ
            assert!(
                (row.b_minus_part - sqrt_delta).abs() < 1e-9 * sqrt_delta,
                "κ={}: {}",
                row.kappa,
                row.b_minus_part
            );
            assert!(row.b_plus_part > row.b_minus_part);
        }
        println!(
            "ratio² vs ln κ: slope {:.4} R² {:.6}",
            report.fit.slope, report.fit.r_squared
        );
        assert!(report.fit.slope > 0.0);
        assert!(ratio_experiment(&[], 0.5, 0.05, &form, 2).is_err());
        assert!(ratio_experiment(&[16], 0.5, 0.05, &form, 3).is_err());
    }
}
