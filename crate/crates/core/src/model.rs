//! Signals, supports, weights and the support-accuracy bookkeeping shared by
//! the solver, the guarantee calculators and the experiment harness.

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::rng;

/// A real signal of length `N >= 1` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVector(Vec<f64>);

impl SignalVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("signal must have length >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("signal entry {i} is not finite")));
        }
        Ok(SignalVector(values))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    /// Indices of the nonzero entries.
    pub fn support(&self) -> SupportSet {
        SupportSet {
            indices: (0..self.len()).filter(|&i| self.0[i] != 0.0).collect(),
            ambient_dim: self.len(),
        }
    }

    /// `‖x_S‖₁` for an index set `S`.
    pub fn l1_norm_on(&self, set: &SupportSet) -> f64 {
        set.iter().map(|i| self.0[i].abs()).sum()
    }
}

impl AsRef<[f64]> for SignalVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A sorted, duplicate-free index set over `[0, ambient_dim)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl SupportSet {
    /// Builds a set from indices in any order. Duplicates and out-of-range
    /// indices are rejected.
    pub fn new(mut indices: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::domain(format!("duplicate index {}", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= ambient_dim {
                return Err(Error::domain(format!(
                    "index {last} out of range for dimension {ambient_dim}"
                )));
            }
        }
        Ok(SupportSet {
            indices,
            ambient_dim,
        })
    }

    pub fn empty(ambient_dim: usize) -> Self {
        SupportSet {
            indices: Vec::new(),
            ambient_dim,
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        SupportSet {
            indices: (0..ambient_dim).collect(),
            ambient_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.ambient_dim];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    pub fn complement(&self) -> SupportSet {
        let m = self.mask();
        SupportSet {
            indices: (0..self.ambient_dim).filter(|&i| !m[i]).collect(),
            ambient_dim: self.ambient_dim,
        }
    }

    pub fn intersection(&self, other: &SupportSet) -> SupportSet {
        SupportSet {
            indices: self
                .indices
                .iter()
                .copied()
                .filter(|&i| other.contains(i))
                .collect(),
            ambient_dim: self.ambient_dim,
        }
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let mut indices: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        indices.sort_unstable();
        indices.dedup();
        SupportSet {
            indices,
            ambient_dim: self.ambient_dim.max(other.ambient_dim),
        }
    }
}

/// A support estimate `T̃` together with the reference support `T0` it is
/// graded against.
///
/// Cardinalities produced by [`gen_support_estimate`] are rounded to the
/// nearest integer: `|T̃| = round(ρk)` and `|T̃ ∩ T0| = round(α|T̃|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    pub estimate: SupportSet,
    pub reference: SupportSet,
}

impl SupportEstimate {
    pub fn new(estimate: SupportSet, reference: SupportSet) -> Result<Self> {
        check_len(
            "support estimate ambient dimension",
            reference.ambient_dim(),
            estimate.ambient_dim(),
        )?;
        Ok(SupportEstimate {
            estimate,
            reference,
        })
    }

    /// `α = |T̃ ∩ T0| / |T̃|`, zero for an empty estimate.
    pub fn alpha(&self) -> f64 {
        if self.estimate.is_empty() {
            return 0.0;
        }
        self.estimate.intersection(&self.reference).len() as f64 / self.estimate.len() as f64
    }

    /// `ρ = |T̃| / |T0|`.
    pub fn rho(&self) -> Result<f64> {
        if self.reference.is_empty() {
            return Err(Error::domain("rho is undefined for an empty reference support"));
        }
        Ok(self.estimate.len() as f64 / self.reference.len() as f64)
    }
}

/// Returns `(α, ρ)` for a support estimate.
pub fn support_accuracy(est: &SupportEstimate) -> Result<(f64, f64)> {
    Ok((est.alpha(), est.rho()?))
}

/// Per-coordinate weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::domain(format!(
                "weight {i} = {} outside [0, 1]",
                weights[i]
            )));
        }
        Ok(WeightVector(weights))
    }

    pub fn ones(len: usize) -> Self {
        WeightVector(vec![1.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self, z: &[f64]) -> Result<f64> {
        weighted_l1_norm(z, self)
    }
}

/// `‖z‖_{1,w} = Σ w_i |z_i|`.
pub fn weighted_l1_norm(z: &[f64], w: &WeightVector) -> Result<f64> {
    check_len("weighted l1 norm", w.len(), z.len())?;
    Ok(weighted_l1_unchecked(z, w.as_slice()))
}

pub(crate) fn weighted_l1_unchecked(z: &[f64], w: &[f64]) -> f64 {
    z.iter().zip(w).map(|(zi, wi)| wi * zi.abs()).sum()
}

/// Weight `ω` on the support estimate and `1` everywhere else.
pub fn build_weights(estimate: &SupportSet, omega: f64, n: usize) -> Result<WeightVector> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::domain(format!("omega = {omega} outside [0, 1]")));
    }
    if let Some(&last) = estimate.indices().last() {
        if last >= n {
            return Err(Error::domain(format!(
                "support index {last} out of range for dimension {n}"
            )));
        }
    }
    let mut w = vec![1.0; n];
    for i in estimate.iter() {
        w[i] = omega;
    }
    Ok(WeightVector(w))
}

/// Best `k`-term approximation: keeps the `k` largest-magnitude entries.
///
/// Ties are broken toward the lower index. The returned support lists the kept
/// entries that are nonzero.
pub fn best_k_term(x: &[f64], k: usize) -> Result<(SignalVector, SupportSet)> {
    let n = x.len();
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds signal length {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps lower indices first among equal magnitudes
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
    let mut kept = vec![0.0; n];
    let mut support = Vec::with_capacity(k);
    for &i in &order[..k] {
        kept[i] = x[i];
        if x[i] != 0.0 {
            support.push(i);
        }
    }
    Ok((SignalVector::new(kept)?, SupportSet::new(support, n)?))
}

/// `k`-sparse signal on a uniformly random support with i.i.d. standard
/// normal nonzeros.
pub fn gen_sparse_signal(n: usize, k: usize, seed: u64) -> Result<SignalVector> {
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds N = {n}")));
    }
    let mut rng = rng::seeded(seed);
    let mut x = vec![0.0; n];
    for i in index::sample(&mut rng, n, k) {
        // a standard normal draw of exactly zero is not a concern in practice,
        // but the support size is a hard contract
        let mut v: f64 = rng.sample(StandardNormal);
        while v == 0.0 {
            v = rng.sample(StandardNormal);
        }
        x[i] = v;
    }
    SignalVector::new(x)
}

/// Compressible signal whose `j`-th largest magnitude is `j^{-p}`, with random
/// signs and positions.
pub fn gen_compressible_signal(n: usize, p: f64, seed: u64) -> Result<SignalVector> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("decay power p = {p} must exceed 1")));
    }
    let mut rng = rng::seeded(seed);
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let mut x = vec![0.0; n];
    for (j, &pos) in positions.iter().enumerate() {
        let mag = ((j + 1) as f64).powf(-p);
        x[pos] = if rng.random::<bool>() { mag } else { -mag };
    }
    SignalVector::new(x)
}

/// Draws a support estimate of size `round(ρk)` with `round(α·|T̃|)` indices
/// taken uniformly from `T0` and the rest uniformly from its complement.
pub fn gen_support_estimate(
    reference: &SupportSet,
    rho: f64,
    alpha: f64,
    seed: u64,
) -> Result<SupportEstimate> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho = {rho} must be finite and >= 0")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    let k = reference.len();
    let n = reference.ambient_dim();
    let total = (rho * k as f64).round() as usize;
    let inside = (alpha * total as f64).round() as usize;
    let outside = total - inside;
    let complement = reference.complement();
    if inside > k {
        return Err(Error::domain(format!(
            "need {inside} indices from a reference support of size {k}"
        )));
    }
    if outside > complement.len() {
        return Err(Error::domain(format!(
            "need {outside} indices outside the reference support, only {} available",
            complement.len()
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, k, inside)
        .into_iter()
        .map(|i| reference.indices()[i])
        .collect();
    picked.extend(
        index::sample(&mut rng, complement.len(), outside)
            .into_iter()
            .map(|i| complement.indices()[i]),
    );
    SupportEstimate::new(SupportSet::new(picked, n)?, reference.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ix: &[usize], n: usize) -> SupportSet {
        SupportSet::new(ix.to_vec(), n).unwrap()
    }

    #[test]
    fn weighted_norm_examples() {
        let ones = WeightVector::ones(2);
        assert_eq!(weighted_l1_norm(&[2.0, -4.0], &ones).unwrap(), 6.0);
        let w = WeightVector::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(weighted_l1_norm(&[2.0, -4.0], &w).unwrap(), 4.0);
        let w = WeightVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(weighted_l1_norm(&[5.0, 5.0], &w).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_length_mismatch() {
        let err = weighted_l1_norm(&[1.0], &WeightVector::ones(2)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn weights_reject_out_of_range() {
        assert!(WeightVector::new(vec![1.2]).is_err());
        assert!(build_weights(&SupportSet::empty(2), -0.1, 2).is_err());
        assert!(build_weights(&SupportSet::empty(2), 1.1, 2).is_err());
    }

    #[test]
    fn best_k_term_examples() {
        let (xk, s) = best_k_term(&[3.0, -1.0, 2.0], 2).unwrap();
        assert_eq!(xk.as_slice(), &[3.0, 0.0, 2.0]);
        assert_eq!(s.indices(), &[0, 2]);

        let (xk, s) = best_k_term(&[3.0, -1.0, 2.0], 0).unwrap();
        assert_eq!(xk.as_slice(), &[0.0, 0.0, 0.0]);
        assert!(s.is_empty());

        assert!(best_k_term(&[1.0], 2).is_err());
    }

    #[test]
    fn best_k_term_tie_goes_to_lower_index() {
        let x = [0.5, -2.0, 2.0, 1.0];
        let (xk, s) = best_k_term(&x, 1).unwrap();
        assert_eq!(s.indices(), &[1]);
        let tail = |kept: usize| -> f64 {
            x.iter().enumerate().filter(|(i, _)| *i != kept).map(|(_, v)| v.abs()).sum()
        };
        let err: f64 = x.iter().zip(xk.as_slice()).map(|(a, b)| (a - b).abs()).sum();
        assert_eq!(err, tail(1));
        assert_eq!(err, tail(2));
    }

    #[test]
    fn support_accuracy_examples() {
        let n = 8;
        let cases = [
            (vec![1, 2, 3, 4], vec![3, 4, 5, 6], 0.5, 1.0),
            (vec![1, 2], vec![1, 2], 1.0, 1.0),
            (vec![1, 2, 3, 4], vec![5, 6], 0.0, 0.5),
        ];
        for (t0, est, a, r) in cases {
            let e = SupportEstimate::new(set(&est, n), set(&t0, n)).unwrap();
            assert_eq!(support_accuracy(&e).unwrap(), (a, r));
        }
        let e = SupportEstimate::new(set(&[1], n), SupportSet::empty(n)).unwrap();
        assert!(support_accuracy(&e).is_err());
        let e = SupportEstimate::new(SupportSet::empty(n), set(&[1], n)).unwrap();
        assert_eq!(e.alpha(), 0.0);
    }

    #[test]
    fn build_weights_examples() {
        assert_eq!(build_weights(&set(&[0], 3), 0.0, 3).unwrap().as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(build_weights(&SupportSet::empty(2), 0.3, 2).unwrap().as_slice(), &[1.0, 1.0]);
        assert_eq!(
            build_weights(&set(&[0, 1, 2], 3), 1.0, 3).unwrap().as_slice(),
            &[1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn support_set_rejects_bad_indices() {
        assert!(SupportSet::new(vec![1, 1], 3).is_err());
        assert!(SupportSet::new(vec![3], 3).is_err());
        assert_eq!(SupportSet::new(vec![2, 0], 3).unwrap().indices(), &[0, 2]);
    }

    #[test]
    fn sparse_generator() {
        let x = gen_sparse_signal(500, 40, 11).unwrap();
        assert_eq!(x.support().len(), 40);
        assert_eq!(x, gen_sparse_signal(500, 40, 11).unwrap());
        assert_ne!(x, gen_sparse_signal(500, 40, 12).unwrap());
        assert_eq!(gen_sparse_signal(10, 0, 3).unwrap().l1_norm(), 0.0);
        assert!(gen_sparse_signal(3, 4, 0).is_err());
    }

    #[test]
    fn compressible_generator() {
        let x = gen_compressible_signal(4, 2.0, 5).unwrap();
        let mut mags: Vec<f64> = x.as_slice().iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(mags, vec![1.0, 0.25, 1.0 / 9.0, 1.0 / 16.0]);
        assert_eq!(x, gen_compressible_signal(4, 2.0, 5).unwrap());
        assert!(gen_compressible_signal(4, 1.0, 5).is_err());
    }

    #[test]
    fn compressible_tail_matches_direct_sum() {
        let x = gen_compressible_signal(500, 1.1, 9).unwrap();
        let (xk, _) = best_k_term(x.as_slice(), 40).unwrap();
        let tail: f64 = x.as_slice().iter().zip(xk.as_slice()).map(|(a, b)| (a - b).abs()).sum();
        let oracle: f64 = (41..=500).map(|j| (j as f64).powf(-1.1)).sum();
        assert!((tail - oracle).abs() < 1e-12);
    }

    #[test]
    fn support_estimate_generator() {
        let x = gen_sparse_signal(500, 40, 1).unwrap();
        let t0 = x.support();
        let e = gen_support_estimate(&t0, 1.0, 1.0, 4).unwrap();
        assert_eq!(e.estimate, t0);
        let e = gen_support_estimate(&t0, 1.0, 0.0, 4).unwrap();
        assert_eq!(e.estimate.len(), 40);
        assert_eq!(e.estimate.intersection(&t0).len(), 0);
        let e = gen_support_estimate(&t0, 1.0, 0.7, 4).unwrap();
        assert_eq!(e.estimate.intersection(&t0).len(), 28);
        assert!(gen_support_estimate(&t0, 2.0, 0.7, 4).is_err());
    }

    proptest! {
        #[test]
        fn best_k_term_is_optimal_among_coordinate_truncations(
            x in prop::collection::vec(-5.0f64..5.0, 1..9),
            kseed in 0usize..100,
        ) {
            let n = x.len();
            let k = kseed % (n + 1);
            let (xk, _) = best_k_term(&x, k).unwrap();
            let err: f64 = x.iter().zip(xk.as_slice()).map(|(a, b)| (a - b).abs()).sum();
            // all subsets of size k
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != k { continue; }
                let alt: f64 = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| x[i].abs()).sum();
                prop_assert!(err <= alt + 1e-12);
            }
        }

        #[test]
        fn unit_weights_give_plain_l1(z in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let w = WeightVector::ones(z.len());
            let l1: f64 = z.iter().map(|v| v.abs()).sum();
            prop_assert_eq!(weighted_l1_norm(&z, &w).unwrap(), l1);
        }

        #[test]
        fn weights_scale_norm_on_estimate(
            vals in prop::collection::vec(-10.0f64..10.0, 1..20),
            omega in 0.0f64..=1.0,
        ) {
            let n = vals.len() + 5;
            let est = SupportSet::new((0..vals.len()).collect(), n).unwrap();
            let mut z = vec![0.0; n];
            z[..vals.len()].copy_from_slice(&vals);
            let w = build_weights(&est, omega, n).unwrap();
            let l1: f64 = vals.iter().map(|v| v.abs()).sum();
            prop_assert!((weighted_l1_norm(&z, &w).unwrap() - omega * l1).abs() <= 1e-12 * (1.0 + l1));
        }

        #[test]
        fn generated_estimate_has_requested_accuracy(
            k in 1usize..60,
            rho in 0.1f64..1.0,
            alpha in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let n = 200;
            let x = gen_sparse_signal(n, k, seed).unwrap();
            let t0 = x.support();
            let e = gen_support_estimate(&t0, rho, alpha, seed ^ 1).unwrap();
            let (a, r) = support_accuracy(&e).unwrap();
            prop_assert!((r - rho).abs() <= 0.5 / k as f64 + 1e-12);
            if !e.estimate.is_empty() {
                prop_assert!((a - alpha).abs() <= 0.5 / e.estimate.len() as f64 + 1e-12);
            }
        }
    }
}
