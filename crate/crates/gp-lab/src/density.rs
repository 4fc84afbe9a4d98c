//! Fourier-truncated density matrices of order k and the operators of the
//! dispersive hierarchy: the weight S^{(k,α)}, the free propagator U_Q(t),
//! the collision operators B±_{j,k+1}, hierarchy norms, factorization,
//! lattice rescaling, and the Duhamel residual of a sampled trajectory.
//!
//! A matrix is stored sparsely as flat sorted integer keys — the k·d
//! components of ξ⃗ followed by the k·d components of ξ⃗′ — with one complex
//! amplitude each. Every operation returns a new value; iteration order is
//! the sorted key order, which keeps parallel reductions and serialization
//! deterministic.

use crate::error::{LabError, Result};
use crate::torus::{jp_bracket, QuadraticForm};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Which integer lattice the stored indices live on. On `General`, index ξ
/// stands for the physical frequency (θ_1ξ¹,…,θ_dξ^d); on `Classical` it is
/// the frequency itself (θ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lattice {
    Classical,
    General,
}

impl Lattice {
    fn as_str(self) -> &'static str {
        match self {
            Lattice::Classical => "classical",
            Lattice::General => "general",
        }
    }
}

/// Sparse order-k density matrix in Fourier representation.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierDensityMatrix {
    k: usize,
    d: usize,
    cutoff: i64,
    lattice: Lattice,
    /// Flat keys, stride 2·k·d each: ξ⃗ then ξ⃗′, lexicographically sorted.
    keys: Vec<i64>,
    vals: Vec<Complex64>,
}

impl FourierDensityMatrix {
    /// Build from (flattened key, amplitude) pairs. Duplicate keys are
    /// merged by addition; exact zeros are dropped.
    pub fn from_entries(
        k: usize,
        d: usize,
        cutoff: i64,
        lattice: Lattice,
        entries: Vec<(Vec<i64>, Complex64)>,
    ) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(LabError::InvalidArgument(
                "density matrix needs order ≥ 1 and dimension ≥ 1".into(),
            ));
        }
        if cutoff < 1 {
            return Err(LabError::InvalidArgument(format!(
                "cutoff must be ≥ 1, got {cutoff}"
            )));
        }
        let stride = 2 * k * d;
        let mut idx: Vec<usize> = (0..entries.len()).collect();
        for (key, v) in &entries {
            if key.len() != stride {
                return Err(LabError::DimensionMismatch {
                    form_d: stride,
                    arg_d: key.len(),
                });
            }
            if key.iter().any(|c| c.abs() > cutoff) {
                return Err(LabError::InvalidArgument(format!(
                    "frequency component beyond cutoff {cutoff}: {key:?}"
                )));
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(LabError::InvalidArgument(
                    "non-finite amplitude".into(),
                ));
            }
        }
        idx.sort_by(|&a, &b| entries[a].0.cmp(&entries[b].0));
        let mut keys = Vec::with_capacity(entries.len() * stride);
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        for i in idx {
            let (key, v) = &entries[i];
            let merged = !vals.is_empty() && &keys[keys.len() - stride..] == key.as_slice();
            if merged {
                *vals.last_mut().unwrap() += v;
            } else {
                keys.extend_from_slice(key);
                vals.push(*v);
            }
        }
        // drop exact zeros (including cancellations from the merge)
        let mut out = Self {
            k,
            d,
            cutoff,
            lattice,
            keys: Vec::new(),
            vals: Vec::new(),
        };
        for (i, v) in vals.iter().enumerate() {
            if v.re != 0.0 || v.im != 0.0 {
                out.keys.extend_from_slice(&keys[i * stride..(i + 1) * stride]);
                out.vals.push(*v);
            }
        }
        Ok(out)
    }

    /// The empty matrix of the given shape.
    pub fn empty(k: usize, d: usize, cutoff: i64, lattice: Lattice) -> Result<Self> {
        Self::from_entries(k, d, cutoff, lattice, Vec::new())
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn support_len(&self) -> usize {
        self.vals.len()
    }

    fn stride(&self) -> usize {
        2 * self.k * self.d
    }

    /// Amplitude at (ξ⃗; ξ⃗′), zero when unstored.
    pub fn get(&self, xi: &[i64], xi_p: &[i64]) -> Complex64 {
        let half = self.k * self.d;
        if xi.len() != half || xi_p.len() != half {
            return Complex64::new(0.0, 0.0);
        }
        let mut key = Vec::with_capacity(2 * half);
        key.extend_from_slice(xi);
        key.extend_from_slice(xi_p);
        match self.find(&key) {
            Some(i) => self.vals[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    fn find(&self, key: &[i64]) -> Option<usize> {
        let s = self.stride();
        let n = self.vals.len();
        let mut lo = 0usize;
        let mut hi = n;
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.keys[mid * s..(mid + 1) * s].cmp(key) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Entries in sorted key order.
    pub fn iter(&self) -> impl Iterator<Item = (&[i64], Complex64)> + '_ {
        let s = self.stride();
        self.keys.chunks_exact(s).zip(self.vals.iter().copied())
    }

    /// Same support, amplitudes mapped by `f(key, value)`.
    fn map_values(&self, mut f: impl FnMut(&[i64], Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        let s = self.stride();
        for i in 0..out.vals.len() {
            out.vals[i] = f(&self.keys[i * s..(i + 1) * s], self.vals[i]);
        }
        out
    }

    /// self + c·other on the merged support.
    pub fn add_scaled(&self, other: &Self, c: Complex64) -> Result<Self> {
        if self.k != other.k || self.d != other.d || self.lattice != other.lattice {
            return Err(LabError::InvalidArgument(
                "add_scaled: mismatched shapes or lattices".into(),
            ));
        }
        let cutoff = self.cutoff.max(other.cutoff);
        let mut entries: Vec<(Vec<i64>, Complex64)> =
            Vec::with_capacity(self.vals.len() + other.vals.len());
        for (key, v) in self.iter() {
            entries.push((key.to_vec(), v));
        }
        for (key, v) in other.iter() {
            entries.push((key.to_vec(), c * v));
        }
        Self::from_entries(self.k, self.d, cutoff, self.lattice, entries)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map_values(|_, v| c * v)
    }

    /// Hermitian adjoint: ξ⃗ ↔ ξ⃗′ with conjugated amplitudes.
    pub fn adjoint(&self) -> Self {
        let half = self.k * self.d;
        let entries = self
            .iter()
            .map(|(key, v)| {
                let mut swapped = Vec::with_capacity(2 * half);
                swapped.extend_from_slice(&key[half..]);
                swapped.extend_from_slice(&key[..half]);
                (swapped, v.conj())
            })
            .collect();
        Self::from_entries(self.k, self.d, self.cutoff, self.lattice, entries)
            .expect("adjoint preserves validity")
    }

    /// Largest |amplitude difference| against another matrix over the union
    /// of supports. Shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (key, v) in self.iter() {
            let half = self.k * self.d;
            m = m.max((v - other.get(&key[..half], &key[half..])).norm());
        }
        for (key, v) in other.iter() {
            let half = other.k * other.d;
            m = m.max((v - self.get(&key[..half], &key[half..])).norm());
        }
        m
    }
}

// --- S^{(k,α)}, norms ------------------------------------------------------

/// Product weight Π_j ⟨ξ_j⟩^α · Π_j ⟨ξ′_j⟩^α of a flattened key.
fn s_weight(key: &[i64], d: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    let mut w = 1.0;
    for slot in key.chunks_exact(d) {
        w *= jp_bracket(slot).powf(alpha);
    }
    w
}

/// S^{(k,α)}: multiply each amplitude by Π⟨ξ_j⟩^α Π⟨ξ′_j⟩^α.
pub fn apply_s(gamma: &FourierDensityMatrix, alpha: f64) -> FourierDensityMatrix {
    let d = gamma.d;
    gamma.map_values(|key, v| v * s_weight(key, d, alpha))
}

/// Weighted ℓ² coefficient norm ‖S^{(k,α)}γ‖ (transform normalization
/// constant fixed to 1).
pub fn hk_alpha_norm(gamma: &FourierDensityMatrix, alpha: f64) -> f64 {
    let d = gamma.d;
    gamma
        .iter()
        .map(|(key, v)| {
            let w = s_weight(key, d, alpha);
            let a = v.norm() * w;
            a * a
        })
        .sum::<f64>()
        .sqrt()
}

/// Truncated hierarchy with shared dimension and form.
#[derive(Debug, Clone)]
pub struct HierarchySequence {
    pub form: QuadraticForm,
    /// entries[i] must have order i+1.
    pub entries: Vec<FourierDensityMatrix>,
}

impl HierarchySequence {
    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.entries.iter().enumerate() {
            if g.order() != i + 1 {
                return Err(LabError::InvalidArgument(format!(
                    "hierarchy entry {i} has order {}, expected {}",
                    g.order(),
                    i + 1
                )));
            }
            if g.dim() != self.form.dim() {
                return Err(LabError::DimensionMismatch {
                    form_d: self.form.dim(),
                    arg_d: g.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Σ_k ξ^k · hk_alpha_norm(entry k, α).
pub fn h_alpha_xi_norm(seq: &HierarchySequence, alpha: f64, xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "h_alpha_xi_norm: ξ must be positive, got {xi}"
        )));
    }
    seq.validate()?;
    Ok(seq
        .entries
        .iter()
        .enumerate()
        .map(|(i, g)| xi.powi(i as i32 + 1) * hk_alpha_norm(g, alpha))
        .sum())
}

// --- free evolution --------------------------------------------------------

/// Q(ξ⃗) − Q(ξ⃗′) for a flattened key: the free-evolution phase rate.
fn phase_rate(key: &[i64], form: &QuadraticForm, k: usize, d: usize) -> f64 {
    let mut q = 0.0;
    for (slot_idx, slot) in key.chunks_exact(d).enumerate() {
        let sign = if slot_idx < k { 1.0 } else { -1.0 };
        q += sign * form.q_unchecked(slot);
    }
    q
}

/// U_Q(t): multiply the (ξ⃗; ξ⃗′) amplitude by e^{−it(Q(ξ⃗)−Q(ξ⃗′))} with
/// Q(ξ⃗) = Σ_j Q(ξ_j). Unitary per coefficient.
pub fn free_evolve(
    gamma: &FourierDensityMatrix,
    t: f64,
    form: &QuadraticForm,
) -> Result<FourierDensityMatrix> {
    if form.dim() != gamma.d {
        return Err(LabError::DimensionMismatch {
            form_d: form.dim(),
            arg_d: gamma.d,
        });
    }
    let (k, d) = (gamma.k, gamma.d);
    Ok(gamma.map_values(|key, v| {
        let (s, c) = (-t * phase_rate(key, form, k, d)).sin_cos();
        v * Complex64::new(c, s)
    }))
}

// --- factorization ----------------------------------------------------------

/// |φ⟩⟨φ|^{⊗k}: coeffs(ξ⃗; ξ⃗′) = Π φ̂(ξ_j) · Π conj φ̂(ξ′_j) for a
/// single-particle coefficient list φ.
pub fn factorized(
    phi: &[(Vec<i64>, Complex64)],
    k: usize,
    d: usize,
    cutoff: i64,
    lattice: Lattice,
) -> Result<FourierDensityMatrix> {
    factorized_with_threshold(phi, k, d, cutoff, lattice, 0.0)
}

/// [`factorized`] with entries below `threshold` in modulus pruned during
/// enumeration. Partial products are abandoned as soon as no completion can
/// reach the threshold, so the cost is proportional to the surviving
/// support, not to (#modes)^{2k}.
pub fn factorized_with_threshold(
    phi: &[(Vec<i64>, Complex64)],
    k: usize,
    d: usize,
    cutoff: i64,
    lattice: Lattice,
    threshold: f64,
) -> Result<FourierDensityMatrix> {
    if k == 0 {
        return Err(LabError::InvalidArgument("factorized: k ≥ 1".into()));
    }
    if !(threshold >= 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "factorized threshold must be ≥ 0, got {threshold}"
        )));
    }
    for (key, _) in phi {
        if key.len() != d {
            return Err(LabError::DimensionMismatch {
                form_d: d,
                arg_d: key.len(),
            });
        }
    }
    const CAP: usize = 1 << 23;
    if threshold == 0.0 {
        let total = (phi.len() as f64).powi(2 * k as i32);
        if total > CAP as f64 {
            return Err(LabError::Resolution(format!(
                "factorized support would hold {total:.3e} entries"
            )));
        }
    }
    // descending modulus (ties by key) so a failing branch ends the slot loop
    let mut modes: Vec<(&[i64], Complex64, f64)> = phi
        .iter()
        .map(|(key, v)| (key.as_slice(), *v, v.norm()))
        .collect();
    modes.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(b.0)));
    let max_amp = modes.first().map(|m| m.2).unwrap_or(0.0);
    // head[r] = max_amp^r: the best any r remaining slots can contribute
    let head: Vec<f64> = (0..=2 * k).map(|r| max_amp.powi(r as i32)).collect();
    let slots = 2 * k;
    let mut entries: Vec<(Vec<i64>, Complex64)> = Vec::new();
    let mut key = vec![0i64; slots * d];
    fn descend(
        depth: usize,
        prod: Complex64,
        prod_abs: f64,
        modes: &[(&[i64], Complex64, f64)],
        head: &[f64],
        slots: usize,
        k: usize,
        d: usize,
        threshold: f64,
        cap: usize,
        key: &mut Vec<i64>,
        entries: &mut Vec<(Vec<i64>, Complex64)>,
    ) -> Result<()> {
        if depth == slots {
            entries.push((key.clone(), prod));
            if entries.len() > cap {
                return Err(LabError::Resolution(format!(
                    "factorized support exceeds {cap} entries at threshold {threshold:.3e}"
                )));
            }
            return Ok(());
        }
        let conj = depth >= k;
        for (mode, amp, amp_abs) in modes {
            let next_abs = prod_abs * amp_abs;
            if next_abs * head[slots - depth - 1] < threshold {
                break;
            }
            key[depth * d..(depth + 1) * d].copy_from_slice(mode);
            let next = if conj { prod * amp.conj() } else { prod * amp };
            descend(
                depth + 1, next, next_abs, modes, head, slots, k, d, threshold, cap, key,
                entries,
            )?;
        }
        Ok(())
    }
    descend(
        0,
        Complex64::new(1.0, 0.0),
        1.0,
        &modes,
        &head,
        slots,
        k,
        d,
        threshold,
        CAP,
        &mut key,
        &mut entries,
    )?;
    FourierDensityMatrix::from_entries(k, d, cutoff, lattice, entries)
}

// --- collision operators -----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionSign {
    Plus,
    Minus,
    Full,
}

/// Swap particle slot 1 ↔ slot j (1-based) in both ξ⃗ and ξ⃗′ of a flattened
/// key of the given order.
fn transpose_key(key: &[i64], j: usize, order: usize, d: usize) -> Vec<i64> {
    let mut out = key.to_vec();
    if j > 1 {
        for half in 0..2 {
            let base = half * order * d;
            for c in 0..d {
                out.swap(base + c, base + (j - 1) * d + c);
            }
        }
    }
    out
}

/// Where one input entry of an order-(k+1) matrix lands under B±_{1,k+1}.
/// Returns the flattened order-k output key.
///
/// Plus: input (a_1,…,a_{k+1}; a′_1,…,a′_{k+1}) contributes at
///   ξ_1 = a_1 + a_{k+1} − a′_{k+1}, ξ_i = a_i, ξ′_i = a′_i,
/// the inversion of γ̂(ξ_1−η+η′, ξ_2,…,ξ_k, η; ξ′_1,…,ξ′_k, η′) with
/// η = a_{k+1}, η′ = a′_{k+1}. Minus is the primed mirror.
fn collision_target(key: &[i64], k: usize, d: usize, plus: bool) -> Vec<i64> {
    let kp1 = k + 1;
    let (xi, xip) = key.split_at(kp1 * d);
    let eta = &xi[k * d..];
    let eta_p = &xip[k * d..];
    let mut out = Vec::with_capacity(2 * k * d);
    out.extend_from_slice(&xi[..k * d]);
    out.extend_from_slice(&xip[..k * d]);
    if plus {
        for c in 0..d {
            out[c] += eta[c] - eta_p[c];
        }
    } else {
        for c in 0..d {
            out[k * d + c] += eta_p[c] - eta[c];
        }
    }
    out
}

/// Collision operator B_{j,k+1} mapping an order-(k+1) matrix to order k.
/// `Plus`/`Minus` select one half; `Full` is their difference. General j is
/// realized by conjugating with the slot-1 ↔ slot-j transposition.
pub fn collision(
    gamma: &FourierDensityMatrix,
    j: usize,
    sign: CollisionSign,
) -> Result<FourierDensityMatrix> {
    if gamma.order() < 2 {
        return Err(LabError::InvalidArgument(
            "collision needs a matrix of order ≥ 2".into(),
        ));
    }
    let k = gamma.order() - 1;
    let d = gamma.dim();
    if j < 1 || j > k {
        return Err(LabError::InvalidArgument(format!(
            "collision slot j = {j} outside 1..={k}"
        )));
    }
    // Contact terms can push |ξ_1| up to three times the input cutoff.
    let out_cutoff = gamma.cutoff.saturating_mul(3);
    let mut entries: Vec<(Vec<i64>, Complex64)> = Vec::with_capacity(2 * gamma.support_len());
    for (key, v) in gamma.iter() {
        let key_t = transpose_key(key, j, k + 1, d);
        if matches!(sign, CollisionSign::Plus | CollisionSign::Full) {
            let out = transpose_key(&collision_target(&key_t, k, d, true), j, k, d);
            entries.push((out, v));
        }
        if matches!(sign, CollisionSign::Minus | CollisionSign::Full) {
            let out = transpose_key(&collision_target(&key_t, k, d, false), j, k, d);
            let amp = if sign == CollisionSign::Full { -v } else { v };
            entries.push((out, amp));
        }
    }
    FourierDensityMatrix::from_entries(k, d, out_cutoff, gamma.lattice, entries)
}

// --- rescaling ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescaleDirection {
    ToGeneral,
    ToClassical,
}

/// Rescale between the classical torus and the stretched one. Integer
/// indices are carried over unchanged — on the general lattice index ξ
/// *means* frequency θ∘ξ — and the amplitude picks up (θ_1⋯θ_d)^{∓2k}.
pub fn rescale_density(
    gamma: &FourierDensityMatrix,
    form: &QuadraticForm,
    direction: RescaleDirection,
) -> Result<FourierDensityMatrix> {
    if form.dim() != gamma.dim() {
        return Err(LabError::DimensionMismatch {
            form_d: form.dim(),
            arg_d: gamma.dim(),
        });
    }
    let prod: f64 = form.thetas().iter().product();
    let factor = match direction {
        RescaleDirection::ToGeneral => {
            if gamma.lattice != Lattice::Classical {
                return Err(LabError::InvalidArgument(
                    "to_general expects a classical-lattice matrix".into(),
                ));
            }
            prod.powi(-2 * gamma.k as i32)
        }
        RescaleDirection::ToClassical => {
            if gamma.lattice != Lattice::General {
                return Err(LabError::InvalidArgument(
                    "to_classical expects a general-lattice matrix".into(),
                ));
            }
            prod.powi(2 * gamma.k as i32)
        }
    };
    let mut out = gamma.map_values(|_, v| v * factor);
    out.lattice = match direction {
        RescaleDirection::ToGeneral => Lattice::General,
        RescaleDirection::ToClassical => Lattice::Classical,
    };
    Ok(out)
}

// --- permutation symmetry ------------------------------------------------------

fn permute_key(key: &[i64], perm: &[usize], order: usize, d: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(key.len());
    for half in 0..2 {
        let base = half * order * d;
        for &p in perm {
            out.extend_from_slice(&key[base + p * d..base + (p + 1) * d]);
        }
    }
    out
}

/// True iff the matrix is invariant under every simultaneous slot
/// permutation of ξ⃗ and ξ⃗′ (all k! checked for k ≤ 5; 100 seeded random
/// permutations beyond).
pub fn symmetry_check(gamma: &FourierDensityMatrix) -> bool {
    let k = gamma.order();
    let d = gamma.dim();
    if k == 1 {
        return true;
    }
    let tol = 1e-12
        * gamma
            .vals
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
    let invariant_under = |perm: &[usize]| -> bool {
        gamma.iter().all(|(key, v)| {
            let pk = permute_key(key, perm, k, d);
            let half = k * d;
            (gamma.get(&pk[..half], &pk[half..]) - v).norm() <= tol
        })
    };
    if k <= 5 {
        let mut perm: Vec<usize> = (0..k).collect();
        // Heap's algorithm, iterative
        let mut c = vec![0usize; k];
        if !invariant_under(&perm) {
            return false;
        }
        let mut i = 0;
        while i < k {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                if !invariant_under(&perm) {
                    return false;
                }
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        true
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE);
        let mut perm: Vec<usize> = (0..k).collect();
        (0..100).all(|_| {
            perm.shuffle(&mut rng);
            invariant_under(&perm)
        })
    }
}

// --- spacetime norm --------------------------------------------------------------

/// Precomputed structure of t ↦ ‖S^{(k,α)} B_{j,k+1} U(t) γ₀‖²: every input
/// entry contributes one rotating term to one output coefficient, so the
/// integrand's bandwidth is the largest within-group spread of rotation
/// rates — not the raw phase magnitude. Diagonal-heavy data (all rates equal
/// in a group) needs only a handful of samples regardless of cutoff.
struct CollisionPlan {
    /// per group: S^α weight of the output key and the rotating terms
    groups: Vec<(f64, Vec<(Complex64, f64)>)>,
    bandwidth: f64,
}

fn collision_plan(
    gamma0: &FourierDensityMatrix,
    j: usize,
    alpha: f64,
    form: &QuadraticForm,
    sign: CollisionSign,
) -> Result<CollisionPlan> {
    if gamma0.order() < 2 {
        return Err(LabError::InvalidArgument(
            "spacetime_norm needs a matrix of order ≥ 2".into(),
        ));
    }
    let k = gamma0.order() - 1;
    let d = gamma0.dim();
    if j < 1 || j > k {
        return Err(LabError::InvalidArgument(format!(
            "collision slot j = {j} outside 1..={k}"
        )));
    }
    if form.dim() != d {
        return Err(LabError::DimensionMismatch {
            form_d: form.dim(),
            arg_d: d,
        });
    }
    // (output key, input value, rotation rate)
    let mut terms: Vec<(Vec<i64>, Complex64, f64)> = Vec::with_capacity(2 * gamma0.support_len());
    for (key, v) in gamma0.iter() {
        let rate = -phase_rate(key, form, k + 1, d);
        let key_t = transpose_key(key, j, k + 1, d);
        if matches!(sign, CollisionSign::Plus | CollisionSign::Full) {
            let plus = transpose_key(&collision_target(&key_t, k, d, true), j, k, d);
            terms.push((plus, v, rate));
        }
        if matches!(sign, CollisionSign::Minus | CollisionSign::Full) {
            let minus = transpose_key(&collision_target(&key_t, k, d, false), j, k, d);
            let amp = if sign == CollisionSign::Full { -v } else { v };
            terms.push((minus, amp, rate));
        }
    }
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    let mut groups: Vec<(f64, Vec<(Complex64, f64)>)> = Vec::new();
    let mut bandwidth: f64 = 0.0;
    let mut i = 0;
    while i < terms.len() {
        let mut jj = i + 1;
        while jj < terms.len() && terms[jj].0 == terms[i].0 {
            jj += 1;
        }
        let w = s_weight(&terms[i].0, d, alpha);
        let members: Vec<(Complex64, f64)> =
            terms[i..jj].iter().map(|t| (t.1, t.2)).collect();
        let lo = members.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
        bandwidth = bandwidth.max(hi - lo);
        groups.push((w, members));
        i = jj;
    }
    Ok(CollisionPlan { groups, bandwidth })
}

impl CollisionPlan {
    /// ‖S^{(k,α)} B U(t) γ₀‖² at one time.
    fn integrand(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (w, members) in &self.groups {
            let mut sum = Complex64::new(0.0, 0.0);
            for &(v, rate) in members {
                let (s, c) = (rate * t).sin_cos();
                sum += v * Complex64::new(c, s);
            }
            let a = w * sum.norm();
            acc += a * a;
        }
        acc
    }
}

/// Minimal admissible trapezoid count for [`spacetime_norm`]: 16 samples per
/// oscillation of the fastest interference beat, floor 9. The integrand
/// t ↦ ‖S B U(t)γ₀‖² carries only the *differences* of rotation rates inside
/// each output coefficient, so this is the exact bandwidth, not the raw
/// max-phase bound, and diagonal or uniform-phase data needs no refinement
/// as the cutoff grows.
pub fn required_time_samples(
    gamma0: &FourierDensityMatrix,
    j: usize,
    form: &QuadraticForm,
    t_end: f64,
) -> Result<u64> {
    required_time_samples_signed(gamma0, j, form, t_end, CollisionSign::Full)
}

/// [`required_time_samples`] for one half of the collision operator.
pub fn required_time_samples_signed(
    gamma0: &FourierDensityMatrix,
    j: usize,
    form: &QuadraticForm,
    t_end: f64,
    sign: CollisionSign,
) -> Result<u64> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "spacetime window must have T > 0, got {t_end}"
        )));
    }
    let plan = collision_plan(gamma0, j, 0.0, form, sign)?;
    let nyq = (16.0 * plan.bandwidth * t_end / (2.0 * std::f64::consts::PI)).ceil() + 1.0;
    Ok((nyq as u64).max(9))
}

/// ‖S^{(k,α)} B_{j,k+1} U_Q(t) γ₀‖_{L²([0,T])} — trapezoid in t of the
/// squared collision norm, square-rooted. Errors when `time_samples` falls
/// below [`required_time_samples`].
pub fn spacetime_norm(
    gamma0: &FourierDensityMatrix,
    j: usize,
    alpha: f64,
    form: &QuadraticForm,
    t_end: f64,
    time_samples: u64,
) -> Result<f64> {
    spacetime_norm_signed(gamma0, j, alpha, form, t_end, time_samples, CollisionSign::Full)
}

/// [`spacetime_norm`] for one half of the collision operator (the full
/// operator is the default; the halves feed the sharpness experiments).
pub fn spacetime_norm_signed(
    gamma0: &FourierDensityMatrix,
    j: usize,
    alpha: f64,
    form: &QuadraticForm,
    t_end: f64,
    time_samples: u64,
    sign: CollisionSign,
) -> Result<f64> {
    let floor = required_time_samples_signed(gamma0, j, form, t_end, sign)?;
    if time_samples < floor {
        return Err(LabError::Resolution(format!(
            "spacetime_norm undersampled: {time_samples} < required {floor}"
        )));
    }
    let plan = collision_plan(gamma0, j, alpha, form, sign)?;
    let h = t_end / time_samples as f64;
    const CHUNK: u64 = 64;
    let n_chunks = (time_samples + 1).div_ceil(CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = ((ci + 1) * CHUNK).min(time_samples + 1);
            let mut acc = 0.0;
            for i in lo..hi {
                let w = if i == 0 || i == time_samples { 0.5 } else { 1.0 };
                acc += w * plan.integrand(h * i as f64);
            }
            acc
        })
        .collect();
    Ok((h * partials.iter().sum::<f64>()).sqrt())
}

// --- Duhamel residual -------------------------------------------------------------

/// Which propagator sits inside the Duhamel integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuhamelVariant {
    /// U(t) — the hierarchy's mild form exactly as displayed: the propagator
    /// does not see the integration variable.
    Verbatim,
    /// U(t−s) — the standard mild form; the free part of the flow cancels
    /// exactly and the b₀=0 residual vanishes.
    Retarded,
}

/// Max over k < K_max and sample times of ξ^k·‖residual of entry k‖_{H^α}
/// where the residual is γ^{(k)}(t) − U(t)γ₀^{(k)} + i·b₀·∫₀ᵗ U·B^{(k+1)}γ^{(k+1)}(s) ds
/// with B^{(k+1)} = Σ_j B_{j,k+1}, the integral by trapezoid on the given
/// samples.
pub fn duhamel_residual(
    trajectory: &[(f64, HierarchySequence)],
    b0: f64,
    form: &QuadraticForm,
    alpha: f64,
    xi: f64,
    variant: DuhamelVariant,
) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(LabError::InvalidArgument("empty trajectory".into()));
    }
    if trajectory[0].0 != 0.0 {
        return Err(LabError::InvalidArgument(
            "trajectory must start at t = 0".into(),
        ));
    }
    if trajectory.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(LabError::InvalidArgument(
            "trajectory times must be strictly ascending".into(),
        ));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(LabError::InvalidArgument(format!(
            "duhamel_residual: ξ must be positive, got {xi}"
        )));
    }
    let k_max = trajectory[0].1.entries.len();
    if k_max < 2 {
        return Err(LabError::InvalidArgument(
            "duhamel_residual needs K_max ≥ 2".into(),
        ));
    }
    for (_, seq) in trajectory {
        seq.validate()?;
        if seq.entries.len() != k_max {
            return Err(LabError::InvalidArgument(
                "trajectory entries disagree on K_max".into(),
            ));
        }
    }
    let initial = &trajectory[0].1;
    let mut worst: f64 = 0.0;
    for k in 1..k_max {
        // full collision term of the order-(k+1) entry: Σ_j B_{j,k+1}
        let b_full = |seq: &HierarchySequence| -> Result<FourierDensityMatrix> {
            let gkp1 = &seq.entries[k]; // order k+1
            let mut acc = collision(gkp1, 1, CollisionSign::Full)?;
            for j in 2..=k {
                let term = collision(gkp1, j, CollisionSign::Full)?;
                acc = acc.add_scaled(&term, Complex64::new(1.0, 0.0))?;
            }
            Ok(acc)
        };
        // integrand at a sample: Bγ(s) (verbatim) or U(−s)Bγ(s) (retarded)
        let integrand = |t: f64, seq: &HierarchySequence| -> Result<FourierDensityMatrix> {
            let b = b_full(seq)?;
            match variant {
                DuhamelVariant::Verbatim => Ok(b),
                DuhamelVariant::Retarded => free_evolve(&b, -t, form),
            }
        };
        let mut prev = integrand(0.0, initial)?;
        let mut running = prev.scale(Complex64::new(0.0, 0.0));
        let mut prev_t = 0.0;
        for (t, seq) in trajectory.iter() {
            if *t > 0.0 {
                let cur = integrand(*t, seq)?;
                let h = t - prev_t;
                running = running
                    .add_scaled(&prev, Complex64::from(0.5 * h))?
                    .add_scaled(&cur, Complex64::from(0.5 * h))?;
                prev = cur;
                prev_t = *t;
            }
            // residual at this sample
            let free_part = free_evolve(&initial.entries[k - 1], *t, form)?;
            let duhamel = free_evolve(&running, *t, form)?;
            let residual = seq.entries[k - 1]
                .add_scaled(&free_part, Complex64::from(-1.0))?
                .add_scaled(&duhamel, Complex64::new(0.0, b0))?;
            let norm = xi.powi(k as i32) * hk_alpha_norm(&residual, alpha);
            worst = worst.max(norm);
        }
    }
    Ok(worst)
}

// --- serialization -----------------------------------------------------------------

/// Text form: one header line
/// `density d=<d> k=<k> cutoff=<c> lattice=<classical|general> theta=<t_1,…,t_d>`
/// then one line per coefficient, `ξ⃗ ; ξ⃗′ ; re ; im`, integers
/// space-separated, in sorted key order. The float fields print in Rust's
/// shortest-roundtrip form, so read ∘ write is bit-exact.
pub fn to_text(gamma: &FourierDensityMatrix, form: &QuadraticForm) -> Result<String> {
    if form.dim() != gamma.dim() {
        return Err(LabError::DimensionMismatch {
            form_d: form.dim(),
            arg_d: gamma.dim(),
        });
    }
    let mut out = String::new();
    let thetas: Vec<String> = form.thetas().iter().map(|t| format!("{t}")).collect();
    writeln!(
        out,
        "density d={} k={} cutoff={} lattice={} theta={}",
        gamma.dim(),
        gamma.order(),
        gamma.cutoff(),
        gamma.lattice().as_str(),
        thetas.join(",")
    )
    .expect("string write");
    let half = gamma.order() * gamma.dim();
    for (key, v) in gamma.iter() {
        let xi: Vec<String> = key[..half].iter().map(|c| c.to_string()).collect();
        let xip: Vec<String> = key[half..].iter().map(|c| c.to_string()).collect();
        writeln!(out, "{} ; {} ; {} ; {}", xi.join(" "), xip.join(" "), v.re, v.im)
            .expect("string write");
    }
    Ok(out)
}

/// Inverse of [`to_text`].
pub fn from_text(text: &str) -> Result<(FourierDensityMatrix, QuadraticForm)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| LabError::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let parse_err = |line: usize, message: &str| LabError::Parse {
        line,
        message: message.into(),
    };
    let mut d = None;
    let mut k = None;
    let mut cutoff = None;
    let mut lattice = None;
    let mut theta: Option<Vec<f64>> = None;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("density") {
        return Err(parse_err(1, "header must start with 'density'"));
    }
    for field in fields {
        let (name, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, "header fields are name=value"))?;
        match name {
            "d" => d = Some(value.parse::<usize>().map_err(|e| parse_err(1, &e.to_string()))?),
            "k" => k = Some(value.parse::<usize>().map_err(|e| parse_err(1, &e.to_string()))?),
            "cutoff" => {
                cutoff = Some(value.parse::<i64>().map_err(|e| parse_err(1, &e.to_string()))?)
            }
            "lattice" => {
                lattice = Some(match value {
                    "classical" => Lattice::Classical,
                    "general" => Lattice::General,
                    other => return Err(parse_err(1, &format!("unknown lattice '{other}'"))),
                })
            }
            "theta" => {
                let mut v = Vec::new();
                for part in value.split(',') {
                    v.push(part.parse::<f64>().map_err(|e| parse_err(1, &e.to_string()))?);
                }
                theta = Some(v);
            }
            other => return Err(parse_err(1, &format!("unknown header field '{other}'"))),
        }
    }
    let d = d.ok_or_else(|| parse_err(1, "missing d"))?;
    let k = k.ok_or_else(|| parse_err(1, "missing k"))?;
    let cutoff = cutoff.ok_or_else(|| parse_err(1, "missing cutoff"))?;
    let lattice = lattice.ok_or_else(|| parse_err(1, "missing lattice"))?;
    let theta = theta.ok_or_else(|| parse_err(1, "missing theta"))?;
    let form = QuadraticForm::new(&theta)?;
    if form.dim() != d {
        return Err(parse_err(1, "theta length disagrees with d"));
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let parts: Vec<&str> = line.split(';').collect();
        if parts.len() != 4 {
            return Err(parse_err(lineno, "expected 'ξ⃗ ; ξ⃗′ ; re ; im'"));
        }
        let mut key = Vec::with_capacity(2 * k * d);
        for part in &parts[..2] {
            for tok in part.split_whitespace() {
                key.push(
                    tok.parse::<i64>()
                        .map_err(|e| parse_err(lineno, &e.to_string()))?,
                );
            }
        }
        if key.len() != 2 * k * d {
            return Err(parse_err(
                lineno,
                &format!("expected {} frequency components, got {}", 2 * k * d, key.len()),
            ));
        }
        let re: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|e: std::num::ParseFloatError| parse_err(lineno, &e.to_string()))?;
        let im: f64 = parts[3]
            .trim()
            .parse()
            .map_err(|e: std::num::ParseFloatError| parse_err(lineno, &e.to_string()))?;
        entries.push((key, Complex64::new(re, im)));
    }
    let gamma = FourierDensityMatrix::from_entries(k, d, cutoff, lattice, entries)?;
    Ok((gamma, form))
}
