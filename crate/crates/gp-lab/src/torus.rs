//! Quadratic dispersion forms on rectangular tori, lattice geometry, dyadic
//! shells, and the frequency rescaling between the stretched torus and the
//! classical one.
//!
//! A torus with side ratios θ = (θ_1,…,θ_d) carries the Laplacian symbol
//! −Q(ξ) with Q(ξ,η) = Σ_j θ_j² ξ^j η^j. Everything downstream (collision
//! multipliers, exponential sums, the NLS stepper) evaluates Q through this
//! module so the θ² products are computed exactly one way.

use crate::error::{LabError, Result};

/// Torus parameters θ = (θ_1,…,θ_d) with the induced quadratic form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    theta: Vec<f64>,
    /// θ_j², precomputed; the only constants that ever enter phase arithmetic.
    theta_sq: Vec<f64>,
}

impl QuadraticForm {
    pub fn new(theta: &[f64]) -> Result<Self> {
        if theta.is_empty() {
            return Err(LabError::InvalidArgument(
                "quadratic form needs at least one theta component".into(),
            ));
        }
        for &t in theta {
            if !(t.is_finite() && t > 0.0) {
                return Err(LabError::InvalidArgument(format!(
                    "theta components must be positive and finite, got {t}"
                )));
            }
        }
        Ok(Self {
            theta: theta.to_vec(),
            theta_sq: theta.iter().map(|t| t * t).collect(),
        })
    }

    /// The classical square torus: θ = (1,…,1).
    pub fn classical(d: usize) -> Self {
        Self::new(&vec![1.0; d]).expect("d ≥ 1")
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_sq(&self) -> &[f64] {
        &self.theta_sq
    }

    /// Q(ξ,η) without the dimension check; callers validate once up front.
    #[inline]
    pub(crate) fn q2_unchecked(&self, xi: &[i64], eta: &[i64]) -> f64 {
        debug_assert_eq!(xi.len(), self.theta_sq.len());
        debug_assert_eq!(eta.len(), self.theta_sq.len());
        let mut acc = 0.0;
        for j in 0..self.theta_sq.len() {
            // ξ^j·η^j first: the integer product is exact (and symmetric) in
            // f64 for all coordinate ranges the laboratory uses.
            acc += self.theta_sq[j] * ((xi[j] as f64) * (eta[j] as f64));
        }
        acc
    }

    /// Q(ξ) = Q(ξ,ξ) without the dimension check.
    #[inline]
    pub(crate) fn q_unchecked(&self, xi: &[i64]) -> f64 {
        debug_assert_eq!(xi.len(), self.theta_sq.len());
        let mut acc = 0.0;
        for (&t2, &x) in self.theta_sq.iter().zip(xi) {
            let xf = x as f64;
            acc += t2 * xf * xf;
        }
        acc
    }

    fn check_dim(&self, pt: &[i64]) -> Result<()> {
        if pt.len() != self.theta.len() {
            return Err(LabError::DimensionMismatch {
                form_d: self.theta.len(),
                arg_d: pt.len(),
            });
        }
        Ok(())
    }
}

/// Q(ξ,η) = Σ_j θ_j² ξ^j η^j.
pub fn q_bilinear(form: &QuadraticForm, xi: &[i64], eta: &[i64]) -> Result<f64> {
    form.check_dim(xi)?;
    form.check_dim(eta)?;
    Ok(form.q2_unchecked(xi, eta))
}

/// Q(ξ) = Q(ξ,ξ) ≥ 0.
pub fn q_form(form: &QuadraticForm, xi: &[i64]) -> Result<f64> {
    form.check_dim(xi)?;
    Ok(form.q_unchecked(xi))
}

/// Squared Euclidean length |ξ|² as an exact integer.
#[inline]
pub fn norm_sq(xi: &[i64]) -> i128 {
    xi.iter().map(|&x| (x as i128) * (x as i128)).sum()
}

/// Japanese bracket ⟨ξ⟩ = √(1+|ξ|²). Euclidean — independent of θ.
#[inline]
pub fn jp_bracket(xi: &[i64]) -> f64 {
    (1.0 + norm_sq(xi) as f64).sqrt()
}

/// Membership in the dyadic shell |x| ∼ 2^j, meaning 2^{j−1} ≤ |x| < 2^j for
/// j ≥ 1 and |x| < 1 for j = 0. Exact: compares |x|² against powers of four
/// in integer arithmetic.
pub fn shell_member(xi: &[i64], j: u32) -> bool {
    let n2 = norm_sq(xi);
    if j == 0 {
        return n2 == 0;
    }
    debug_assert!(j <= 62, "shell exponent out of the representable range");
    let lo = 1i128 << (2 * (j - 1)); // 4^{j−1}
    let hi = 1i128 << (2 * j); // 4^j
    lo <= n2 && n2 < hi
}

/// The unique shell exponent j with `shell_member(xi, j)`.
pub fn shell_index(xi: &[i64]) -> u32 {
    let n2 = norm_sq(xi);
    if n2 == 0 {
        return 0;
    }
    // j ≥ 1 with 4^{j−1} ≤ n2 < 4^j, i.e. j = ⌊log₄ n2⌋ + 1.
    let bits = 128 - n2.leading_zeros(); // ⌊log₂ n2⌋ + 1
    (bits - 1) / 2 + 1
}

/// A triple of shell exponents with its order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicIndex {
    pub j1: u32,
    pub j2: u32,
    pub j3: u32,
}

impl DyadicIndex {
    pub fn new(j1: u32, j2: u32, j3: u32) -> Self {
        Self { j1, j2, j3 }
    }

    fn sorted(&self) -> [u32; 3] {
        let mut s = [self.j1, self.j2, self.j3];
        s.sort_unstable();
        s
    }

    pub fn j_min(&self) -> u32 {
        self.sorted()[0]
    }

    pub fn j_med(&self) -> u32 {
        self.sorted()[1]
    }

    pub fn j_max(&self) -> u32 {
        self.sorted()[2]
    }
}

/// Map a frequency on the stretched lattice θ·Z^d to its integer index:
/// componentwise division by θ_j, rejecting components that are not integer
/// multiples of θ_j within 1e−9 relative tolerance.
pub fn rescale_freq(form: &QuadraticForm, xi_general: &[f64]) -> Result<Vec<i64>> {
    if xi_general.len() != form.dim() {
        return Err(LabError::DimensionMismatch {
            form_d: form.dim(),
            arg_d: xi_general.len(),
        });
    }
    let mut out = Vec::with_capacity(xi_general.len());
    for (j, (&x, &t)) in xi_general.iter().zip(form.thetas()).enumerate() {
        let k = (x / t).round();
        let err = (x - k * t).abs();
        if err > 1e-9 * x.abs().max(1.0) {
            return Err(LabError::OffLattice(
                xi_general.to_vec(),
                j,
                err / x.abs().max(1.0),
            ));
        }
        out.push(k as i64);
    }
    Ok(out)
}

/// Inverse of [`rescale_freq`]: integer index to stretched frequency θ_j·ξ_j.
pub fn rescale_freq_inverse(form: &QuadraticForm, xi: &[i64]) -> Result<Vec<f64>> {
    form.check_dim(xi)?;
    Ok(xi
        .iter()
        .zip(form.thetas())
        .map(|(&k, &t)| k as f64 * t)
        .collect())
}

/// Which norm a ball is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Euclidean,
    Sup,
}

/// All lattice points in the closed ball of the given radius about `center`,
/// in lexicographic coordinate order. Iterates the bounding box and filters,
/// so consumers can re-create and partition the stream deterministically.
pub fn enumerate_ball(
    center: &[i64],
    radius: f64,
    norm: Norm,
) -> impl Iterator<Item = Vec<i64>> + '_ {
    assert!(radius >= 0.0, "enumerate_ball: negative radius");
    let r = radius.floor() as i64;
    let d = center.len();
    let r2 = radius * radius;
    let mut cursor: Option<Vec<i64>> = Some(center.iter().map(|c| c - r).collect());
    std::iter::from_fn(move || {
        while let Some(point) = cursor.as_mut() {
            let candidate = point.clone();
            // Advance the odometer (last coordinate fastest) for next time.
            let mut idx = d;
            loop {
                if idx == 0 {
                    cursor = None;
                    break;
                }
                idx -= 1;
                if point[idx] < center[idx] + r {
                    point[idx] += 1;
                    for (k, coord) in point.iter_mut().enumerate().skip(idx + 1) {
                        *coord = center[k] - r;
                    }
                    break;
                }
            }
            let inside = match norm {
                Norm::Sup => true, // the bounding box *is* the sup ball
                Norm::Euclidean => {
                    let dist2: i128 = candidate
                        .iter()
                        .zip(center)
                        .map(|(&x, &c)| {
                            let dxy = (x - c) as i128;
                            dxy * dxy
                        })
                        .sum();
                    (dist2 as f64) <= r2
                }
            };
            if inside {
                return Some(candidate);
            }
        }
        None
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn bilinear_axis_examples() {
        let id = QuadraticForm::classical(2);
        assert_eq!(q_bilinear(&id, &[1, 0], &[1, 0]).unwrap(), 1.0);
        assert_eq!(q_bilinear(&id, &[1, 0], &[0, 1]).unwrap(), 0.0);
        let f = QuadraticForm::new(&[1.0, SQRT2]).unwrap();
        let v = q_bilinear(&f, &[1, 1], &[1, 1]).unwrap();
        assert!((v - 3.0).abs() < 1e-12, "1·1 + 2·1 = 3, got {v}");
    }

    #[test]
    fn q_form_examples() {
        let id = QuadraticForm::classical(2);
        assert_eq!(q_form(&id, &[0, 0]).unwrap(), 0.0);
        let f = QuadraticForm::new(&[2.0, 3.0]).unwrap();
        assert_eq!(q_form(&f, &[1, 1]).unwrap(), 13.0);
        let g = QuadraticForm::new(&[1.0, SQRT2, 3f64.sqrt()]).unwrap();
        assert!((q_form(&g, &[1, 1, 1]).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = QuadraticForm::classical(2);
        assert!(matches!(
            q_form(&f, &[1, 2, 3]),
            Err(LabError::DimensionMismatch { form_d: 2, arg_d: 3 })
        ));
        assert!(q_bilinear(&f, &[1, 2], &[1]).is_err());
    }

    #[test]
    fn bracket_values() {
        assert_eq!(jp_bracket(&[0, 0]), 1.0);
        assert!((jp_bracket(&[3, 4]) - 26f64.sqrt()).abs() < 1e-15);
        assert!((jp_bracket(&[0, 0, 1]) - SQRT2).abs() < 1e-15);
    }

    #[test]
    fn shell_examples() {
        assert!(shell_member(&[0, 0], 0));
        assert!(shell_member(&[1, 0], 1));
        assert!(shell_member(&[4, 0], 3)); // 4 ∈ [4, 8)
        assert!(!shell_member(&[4, 0], 2));
    }

    #[test]
    fn shells_partition_up_to_two_to_the_ten() {
        // Exactly one j in [0,12] per point, and it agrees with shell_index.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let check = |pt: &[i64]| {
            let members: Vec<u32> = (0..=12).filter(|&j| shell_member(pt, j)).collect();
            assert_eq!(members.len(), 1, "point {pt:?} in shells {members:?}");
            assert_eq!(members[0], shell_index(pt));
        };
        for x in -1024i64..=1024 {
            check(&[x]);
        }
        for _ in 0..20_000 {
            let pt = [rng.gen_range(-724i64..=724), rng.gen_range(-724i64..=724)];
            if norm_sq(&pt) <= 1 << 20 {
                check(&pt);
            }
        }
        for _ in 0..20_000 {
            let pt = [
                rng.gen_range(-591i64..=591),
                rng.gen_range(-591i64..=591),
                rng.gen_range(-591i64..=591),
            ];
            if norm_sq(&pt) <= 1 << 20 {
                check(&pt);
            }
        }
        check(&[1024, 0]); // |x| = 2^10 exactly, shell 11
        assert_eq!(shell_index(&[1024, 0]), 11);
    }

    #[test]
    fn bilinearity_within_ulp_scaled_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let forms = [
            QuadraticForm::classical(2),
            QuadraticForm::new(&[1.0, SQRT2]).unwrap(),
            QuadraticForm::new(&[2.0, 3.0]).unwrap(),
            QuadraticForm::new(&[1.0, SQRT2, 3f64.sqrt()]).unwrap(),
        ];
        for form in &forms {
            let d = form.dim();
            for _ in 0..2_000 {
                let xi: Vec<i64> = (0..d).map(|_| rng.gen_range(-(1 << 20)..=1 << 20)).collect();
                let eta: Vec<i64> = (0..d).map(|_| rng.gen_range(-(1 << 20)..=1 << 20)).collect();
                let sum: Vec<i64> = xi.iter().zip(&eta).map(|(a, b)| a + b).collect();
                let lhs = form.q_unchecked(&sum);
                let qx = form.q_unchecked(&xi);
                let qe = form.q_unchecked(&eta);
                let cross = form.q2_unchecked(&xi, &eta);
                let rhs = qx + 2.0 * cross + qe;
                let scale = lhs.abs() + qx.abs() + 2.0 * cross.abs() + qe.abs();
                assert!(
                    (lhs - rhs).abs() <= 8.0 * f64::EPSILON * scale.max(1.0),
                    "bilinearity violated: {lhs} vs {rhs} (form {:?})",
                    form.thetas()
                );
                // symmetry is exact: same products in the same order
                assert_eq!(cross, form.q2_unchecked(&eta, &xi));
            }
        }
    }

    #[test]
    fn polarization_identity() {
        // 2Q(n,m) = (Q(n+m) − Q(n−m))/2, relative tolerance 1e−12.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let form = QuadraticForm::new(&[1.0, SQRT2]).unwrap();
        for _ in 0..5_000 {
            let n = [rng.gen_range(-4096i64..=4096), rng.gen_range(-4096i64..=4096)];
            let m = [rng.gen_range(-4096i64..=4096), rng.gen_range(-4096i64..=4096)];
            let npm = [n[0] + m[0], n[1] + m[1]];
            let nmm = [n[0] - m[0], n[1] - m[1]];
            let lhs = 2.0 * form.q2_unchecked(&n, &m);
            let rhs = (form.q_unchecked(&npm) - form.q_unchecked(&nmm)) / 2.0;
            let scale = lhs.abs().max(form.q_unchecked(&npm).abs()).max(1.0);
            assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn rescale_examples_and_roundtrip() {
        let id = QuadraticForm::classical(2);
        assert_eq!(rescale_freq(&id, &[5.0, -2.0]).unwrap(), vec![5, -2]);
        let f = QuadraticForm::new(&[2.0, 3.0]).unwrap();
        assert_eq!(rescale_freq(&f, &[4.0, -9.0]).unwrap(), vec![2, -3]);
        assert!(matches!(
            rescale_freq(&f, &[1.0, 0.0]),
            Err(LabError::OffLattice(_, 0, _))
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = QuadraticForm::new(&[1.0, SQRT2, 3f64.sqrt()]).unwrap();
        for _ in 0..1_000 {
            let k: Vec<i64> = (0..3).map(|_| rng.gen_range(-100_000i64..=100_000)).collect();
            let gen_pt = rescale_freq_inverse(&g, &k).unwrap();
            assert_eq!(rescale_freq(&g, &gen_pt).unwrap(), k);
        }
    }

    #[test]
    fn ball_counts_and_order() {
        let pts: Vec<_> = enumerate_ball(&[0, 0], 0.0, Norm::Euclidean).collect();
        assert_eq!(pts, vec![vec![0, 0]]);

        let eucl: Vec<_> = enumerate_ball(&[0, 0], 1.0, Norm::Euclidean).collect();
        assert_eq!(eucl.len(), 5);
        let sup: Vec<_> = enumerate_ball(&[0, 0], 1.0, Norm::Sup).collect();
        assert_eq!(sup.len(), 9);

        // lexicographic, exactly once each
        let mut sorted = sup.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sup, sorted);

        // off-center ball matches a brute-force filter
        let brute: Vec<Vec<i64>> = (-1..=5)
            .flat_map(|x| (-4..=2).map(move |y| vec![x, y]))
            .filter(|p| {
                let dx = p[0] - 2;
                let dy = p[1] + 1;
                dx * dx + dy * dy <= 9
            })
            .collect();
        let ball: Vec<_> = enumerate_ball(&[2, -1], 3.0, Norm::Euclidean).collect();
        assert_eq!(ball, brute);
    }

    #[test]
    fn dyadic_index_order_statistics() {
        let j = DyadicIndex::new(5, 2, 9);
        assert_eq!((j.j_min(), j.j_med(), j.j_max()), (2, 5, 9));
        let t = DyadicIndex::new(3, 3, 1);
        assert_eq!((t.j_min(), t.j_med(), t.j_max()), (1, 3, 3));
    }

    #[test]
    fn invalid_forms_rejected() {
        assert!(QuadraticForm::new(&[]).is_err());
        assert!(QuadraticForm::new(&[1.0, 0.0]).is_err());
        assert!(QuadraticForm::new(&[1.0, -2.0]).is_err());
        assert!(QuadraticForm::new(&[1.0, f64::INFINITY]).is_err());
    }
}
