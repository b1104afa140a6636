//! Seeded random streams and the truncated normal distribution.
//!
//! Every random quantity in a simulation is drawn from its own
//! [`RngStream`], addressed by `(master_seed, label, indices)`. A draw for
//! round 17, client 3 therefore never depends on how many numbers other
//! parts of the simulation consumed before it, which is what lets two
//! strategy runs see exactly the same environment.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Width of the final bracket when inverting the standard normal CDF.
pub const QUANTILE_TOLERANCE: f64 = 1e-10;

/// A deterministic random stream keyed by a master seed, a purpose label
/// and a list of indices.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    label: String,
    indices: Vec<u64>,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, label: &str, indices: &[u64]) -> Self {
        let key = derive_key(master_seed, label, indices);
        Self {
            master_seed,
            label: label.to_owned(),
            indices: indices.to_vec(),
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    /// Uniform draw on the open interval (0, 1), 53 bits of resolution.
    pub fn uniform_open01(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_key(master_seed: u64, label: &str, indices: &[u64]) -> [u8; 32] {
    // FNV-1a over the label, then splitmix absorption of every word.
    let mut label_hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        label_hash ^= u64::from(*b);
        label_hash = label_hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut state = master_seed;
    let absorb = |word: u64, state: &mut u64| {
        *state ^= word;
        splitmix64(state);
    };
    absorb(label_hash, &mut state);
    absorb(indices.len() as u64, &mut state);
    for &i in indices {
        absorb(i, &mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Standard normal CDF, `(1 + erf(x / sqrt 2)) / 2`.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("std_normal_cdf of non-finite {x}")));
    }
    Ok(phi(x))
}

#[inline]
fn phi(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// Parameters of a normal distribution with mean `mu` and scale `sigma`
/// restricted to `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormalParams {
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncNormalParams {
    pub fn new(mu: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self> {
        let p = Self {
            mu,
            sigma,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }

    /// Support `[mu - sigma, mu + sigma]`.
    pub fn symmetric(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, mu - sigma, mu + sigma)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.mu, self.sigma, self.lower, self.upper]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Domain(format!("non-finite parameters {self:?}")));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.lower <= self.mu && self.mu <= self.upper) {
            return Err(Error::Domain(format!(
                "need lower <= mu <= upper, got {} <= {} <= {}",
                self.lower, self.mu, self.upper
            )));
        }
        Ok(())
    }

    fn standardized_bounds(&self) -> (f64, f64) {
        (
            (self.lower - self.mu) / self.sigma,
            (self.upper - self.mu) / self.sigma,
        )
    }

    /// `(Phi(alpha), Phi(beta))`, rejecting supports that carry no mass.
    fn mass_bounds(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let (za, zb) = self.standardized_bounds();
        let (pa, pb) = (phi(za), phi(zb));
        if pb <= pa {
            return Err(Error::Domain(format!(
                "truncation interval [{}, {}] carries no probability mass",
                self.lower, self.upper
            )));
        }
        Ok((pa, pb))
    }
}

/// CDF of the truncated normal on its support.
pub fn trunc_normal_cdf(x: f64, p: &TruncNormalParams) -> Result<f64> {
    let (pa, pb) = p.mass_bounds()?;
    if !(p.lower <= x && x <= p.upper) {
        return Err(Error::Domain(format!(
            "x = {x} outside support [{}, {}]",
            p.lower, p.upper
        )));
    }
    let z = (x - p.mu) / p.sigma;
    Ok(((phi(z) - pa) / (pb - pa)).clamp(0.0, 1.0))
}

/// Inverse CDF: the point of the support whose CDF equals `u`.
///
/// The standard normal CDF is inverted by bisection on the standardized
/// support, stopping once the bracket is narrower than
/// [`QUANTILE_TOLERANCE`].
pub fn trunc_normal_quantile(u: f64, p: &TruncNormalParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("quantile level {u} outside [0, 1]")));
    }
    let (pa, pb) = p.mass_bounds()?;
    let target = pa + u * (pb - pa);
    let (mut lo, mut hi) = p.standardized_bounds();
    while hi - lo > QUANTILE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok((p.mu + p.sigma * z).clamp(p.lower, p.upper))
}

/// One inverse-transform draw from the truncated normal.
pub fn sample_trunc_normal(rng: &mut RngStream, p: &TruncNormalParams) -> Result<f64> {
    let u = rng.uniform_open01();
    trunc_normal_quantile(u, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Trapezoid integral of the standard normal density over `[lo, hi]`.
    fn normal_mass(lo: f64, hi: f64, steps: usize) -> f64 {
        let h = (hi - lo) / steps as f64;
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = 0.5 * (pdf(lo) + pdf(hi));
        for i in 1..steps {
            acc += pdf(lo + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
    }

    #[test]
    fn cdf_symmetry_identity() {
        let x = 0.7;
        let lhs = std_normal_cdf(x).unwrap();
        let rhs = 1.0 - std_normal_cdf(-x).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn cdf_at_one_matches_quadrature() {
        // Phi(1) = 0.5 + mass over [0, 1].
        let oracle = 0.5 + normal_mass(0.0, 1.0, 200_000);
        assert_abs_diff_eq!(oracle, 0.841_344_746_068_543, epsilon = 1e-10);
        assert_abs_diff_eq!(std_normal_cdf(1.0).unwrap(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(matches!(std_normal_cdf(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(std_normal_cdf(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn trunc_cdf_endpoints_and_centre() {
        let p = TruncNormalParams::symmetric(3.0, 2.0).unwrap();
        assert_eq!(trunc_normal_cdf(1.0, &p).unwrap(), 0.0);
        assert_eq!(trunc_normal_cdf(5.0, &p).unwrap(), 1.0);
        assert_abs_diff_eq!(trunc_normal_cdf(3.0, &p).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn trunc_cdf_half_sigma_matches_quadrature() {
        let (mu, sigma) = (50.0, 10.0);
        let p = TruncNormalParams::symmetric(mu, sigma).unwrap();
        // Normalized density mass over [a, mu + sigma/2] in standardized units.
        let oracle = normal_mass(-1.0, 0.5, 200_000) / normal_mass(-1.0, 1.0, 200_000);
        assert_abs_diff_eq!(oracle, 0.780_453_213, epsilon = 1e-8);
        let got = trunc_normal_cdf(mu + sigma / 2.0, &p).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-9);
    }

    #[test]
    fn trunc_cdf_domain_errors() {
        let p = TruncNormalParams::symmetric(0.0, 1.0).unwrap();
        assert!(trunc_normal_cdf(1.5, &p).is_err());
        assert!(trunc_normal_cdf(-1.0000001, &p).is_err());
        // Support far in the upper tail has zero mass in double precision.
        let far = TruncNormalParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(trunc_normal_cdf(0.0, &far), Err(Error::Domain(_))));
    }

    #[test]
    fn params_validation() {
        assert!(TruncNormalParams::new(1.0, 0.0, 0.0, 2.0).is_err());
        assert!(TruncNormalParams::new(1.0, -1.0, 0.0, 2.0).is_err());
        assert!(TruncNormalParams::new(3.0, 1.0, 0.0, 2.0).is_err());
        assert!(TruncNormalParams::new(f64::NAN, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn streams_are_addressable() {
        let mut a = RngStream::new(7, "theta", &[3, 4]);
        let mut b = RngStream::new(7, "theta", &[3, 4]);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);

        let mut c = RngStream::new(7, "gamma", &[3, 4]);
        let mut d = RngStream::new(7, "theta", &[4, 3]);
        let mut e = RngStream::new(8, "theta", &[3, 4]);
        assert_ne!(xs[0], c.next_u64());
        assert_ne!(xs[0], d.next_u64());
        assert_ne!(xs[0], e.next_u64());
    }

    #[test]
    fn uniform_is_open_interval() {
        let mut s = RngStream::new(1, "u", &[]);
        for _ in 0..10_000 {
            let u = s.uniform_open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = TruncNormalParams::symmetric(50.0, 10.0).unwrap();
        let mut a = RngStream::new(99, "x", &[1]);
        let mut b = RngStream::new(99, "x", &[1]);
        for _ in 0..100 {
            let x = sample_trunc_normal(&mut a, &p).unwrap();
            let y = sample_trunc_normal(&mut b, &p).unwrap();
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn quantile_endpoints() {
        let p = TruncNormalParams::symmetric(5.0, 2.0).unwrap();
        assert_abs_diff_eq!(trunc_normal_quantile(0.0, &p).unwrap(), 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(trunc_normal_quantile(1.0, &p).unwrap(), 7.0, epsilon = 1e-9);
        assert_abs_diff_eq!(trunc_normal_quantile(0.5, &p).unwrap(), 5.0, epsilon = 1e-9);
        assert!(trunc_normal_quantile(1.5, &p).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phi_is_monotone_and_symmetric(x in -8.0f64..8.0, dx in 0.0f64..1.0) {
                let a = std_normal_cdf(x).unwrap();
                let b = std_normal_cdf(x + dx).unwrap();
                prop_assert!(b >= a);
                prop_assert!((a + std_normal_cdf(-x).unwrap() - 1.0).abs() <= 1e-12);
            }

            #[test]
            fn trunc_cdf_monotone(mu in -100.0f64..100.0, sigma in 0.01f64..50.0,
                                  s in 0.0f64..1.0, ds in 0.0f64..1.0) {
                let p = TruncNormalParams::symmetric(mu, sigma).unwrap();
                let x0 = p.lower + s * (p.upper - p.lower);
                let x1 = (x0 + ds * (p.upper - x0)).min(p.upper);
                let f0 = trunc_normal_cdf(x0, &p).unwrap();
                let f1 = trunc_normal_cdf(x1, &p).unwrap();
                prop_assert!(f1 >= f0);
                prop_assert!((0.0..=1.0).contains(&f0));
            }

            #[test]
            fn quantile_round_trip(mu in 0.1f64..100.0, frac in 0.05f64..1.0,
                                   u in 0.0f64..=1.0) {
                let sigma = mu * frac;
                let p = TruncNormalParams::symmetric(mu, sigma).unwrap();
                let x = trunc_normal_quantile(u, &p).unwrap();
                prop_assert!(x >= p.lower && x <= p.upper);
                let back = trunc_normal_cdf(x, &p).unwrap();
                prop_assert!((back - u).abs() <= 1e-6, "u={} back={}", u, back);
            }

            #[test]
            fn samples_stay_in_support(seed in any::<u64>(), mu in 0.1f64..1e6, frac in 0.01f64..0.999) {
                let p = TruncNormalParams::symmetric(mu, mu * frac).unwrap();
                let mut rng = RngStream::new(seed, "prop", &[0]);
                for _ in 0..20 {
                    let x = sample_trunc_normal(&mut rng, &p).unwrap();
                    prop_assert!(x >= p.lower && x <= p.upper);
                }
            }
        }
    }
}
