//! The i.i.d. potential: tail law `P(ξ > r) = exp(−e^{F(r)})`, exact
//! inverse-CDF sampling with per-site counter streams, the scale `â_L` and the
//! density.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeDomain, Site};
use crate::rng::{coords_key, Stream};

/// Shape of `F(r) = r/ρ + g(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailKind {
    /// `g ≡ 0`: the doubly-exponential law.
    Exact,
    /// `g(r) = c·log(1 + |r|)`; differentiable except at `r = 0`.
    Log1pAbs { c: f64 },
    /// `g(r) = (c/2)·log(1 + r²)`.
    Log1pSq { c: f64 },
    /// `g(r) = c·atan(r)`.
    Atan { c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub rho: f64,
    #[serde(flatten)]
    pub kind: TailKind,
}

/// Tail probability together with an underflow marker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailProb {
    pub value: f64,
    pub underflow: bool,
}

impl TailSpec {
    pub fn exact(rho: f64) -> Result<Self> {
        Self::new(rho, TailKind::Exact)
    }

    pub fn new(rho: f64, kind: TailKind) -> Result<Self> {
        let spec = TailSpec { rho, kind };
        spec.validate()?;
        Ok(spec)
    }

    /// Rejects `ρ ≤ 0` and perturbations strong enough to make `F` non-monotone.
    pub fn validate(&self) -> Result<()> {
        let rho = self.rho;
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be in (0, inf), got {rho}")));
        }
        let ok = match self.kind {
            TailKind::Exact => true,
            TailKind::Log1pAbs { c } => c.is_finite() && c.abs() < 1.0 / rho,
            TailKind::Log1pSq { c } => c.is_finite() && c.abs() < 2.0 / rho,
            TailKind::Atan { c } => c.is_finite() && c > -1.0 / rho,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{:?} makes F non-increasing for rho={rho}", self.kind)))
        }
    }

    /// `F(r)`.
    pub fn f(&self, r: f64) -> f64 {
        r / self.rho + self.g(r)
    }

    fn g(&self, r: f64) -> f64 {
        match self.kind {
            TailKind::Exact => 0.0,
            TailKind::Log1pAbs { c } => c * r.abs().ln_1p(),
            TailKind::Log1pSq { c } => 0.5 * c * (r * r).ln_1p(),
            TailKind::Atan { c } => c * r.atan(),
        }
    }

    /// `F′(r)`; at the kink of `Log1pAbs` the right derivative is returned.
    pub fn f_prime(&self, r: f64) -> f64 {
        let gp = match self.kind {
            TailKind::Exact => 0.0,
            TailKind::Log1pAbs { c } => {
                let sign = if r < 0.0 { -1.0 } else { 1.0 };
                c * sign / (1.0 + r.abs())
            }
            TailKind::Log1pSq { c } => c * r / (1.0 + r * r),
            TailKind::Atan { c } => c / (1.0 + r * r),
        };
        1.0 / self.rho + gp
    }

    /// Solves `F(r) = y`.
    pub fn f_inverse(&self, y: f64) -> f64 {
        if let TailKind::Exact = self.kind {
            return self.rho * y;
        }
        let mut lo = self.rho * y - 1.0;
        let mut hi = self.rho * y + 1.0;
        let mut step = 1.0;
        while self.f(lo) > y {
            step *= 2.0;
            lo -= step;
        }
        step = 1.0;
        while self.f(hi) < y {
            step *= 2.0;
            hi += step;
        }
        // safeguarded Newton inside a shrinking bracket
        let mut r = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fr = self.f(r) - y;
            if fr == 0.0 {
                return r;
            }
            if fr > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let newton = r - fr / self.f_prime(r);
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - r).abs() <= 1e-14 * (1.0 + r.abs()) || hi - lo <= 1e-13 * (1.0 + r.abs()) {
                return next;
            }
            r = next;
        }
        r
    }

    /// `log P(ξ > r) = −e^{F(r)}`.
    pub fn log_tail_prob(&self, r: f64) -> f64 {
        -self.f(r).exp()
    }

    /// `P(ξ > r)`.
    pub fn tail_prob(&self, r: f64) -> f64 {
        self.tail_prob_checked(r).value
    }

    pub fn tail_prob_checked(&self, r: f64) -> TailProb {
        let value = (-self.f(r).exp()).exp();
        TailProb { value, underflow: value == 0.0 }
    }

    /// `P(ξ ≤ r)`, accurate in the upper tail.
    pub fn cdf(&self, r: f64) -> f64 {
        -(-self.f(r).exp()).exp_m1()
    }

    /// `f(r) = F′(r)·e^{F(r)}·exp(−e^{F(r)})`.
    pub fn density(&self, r: f64) -> f64 {
        let t = self.f(r);
        let e = t.exp();
        if e.is_infinite() {
            return 0.0;
        }
        self.f_prime(r) * (t - e).exp()
    }

    /// The unique `â` with `P(ξ > â) = L^{−d}`.
    pub fn hat_a(&self, l: f64, d: usize) -> Result<f64> {
        if !(l >= 2.0) {
            return Err(Error::InvalidParameter(format!("hat_a needs L >= 2, got {l}")));
        }
        let target = (d as f64 * l.ln()).ln();
        match self.kind {
            TailKind::Exact => Ok(self.rho * target),
            _ => Ok(self.bisect_f(target)),
        }
    }

    /// Plain bisection on `F(r) = y` down to a 1e-12 bracket.
    fn bisect_f(&self, y: f64) -> f64 {
        let guess = self.f_inverse(y);
        let mut lo = guess - 1.0;
        let mut hi = guess + 1.0;
        while self.f(lo) > y {
            lo -= 2.0 * (hi - lo);
        }
        while self.f(hi) < y {
            hi += 2.0 * (hi - lo);
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.f(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Inverse-CDF transform of a uniform `u ∈ (0,1)`; `None` on the endpoints.
    pub fn from_uniform(&self, u: f64) -> Option<f64> {
        if !(u > 0.0 && u < 1.0) {
            return None;
        }
        Some(self.f_inverse((-u.ln()).ln()))
    }

    /// One draw from the stream, resampling on a boundary uniform.
    pub fn draw(&self, stream: &mut Stream) -> f64 {
        loop {
            if let Some(x) = self.from_uniform(stream.open01()) {
                return x;
            }
        }
    }
}

/// A realised potential on a domain, values in lexicographic site order.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    domain: LatticeDomain,
    values: Vec<f64>,
    pub spec: TailSpec,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
pub struct FieldRecord {
    pub seed: u64,
    pub spec: TailSpec,
    pub values: Vec<f64>,
}

impl PotentialField {
    pub fn new(domain: LatticeDomain, values: Vec<f64>, spec: TailSpec, seed: u64) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::FieldMismatch(format!(
                "{} values for {} sites",
                values.len(),
                domain.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::FieldMismatch("non-finite value".into()));
        }
        Ok(PotentialField { domain, values, spec, seed })
    }

    /// Explicit values with a placeholder `ρ = 1` law, for deterministic instances.
    pub fn from_values(domain: LatticeDomain, values: Vec<f64>) -> Result<Self> {
        Self::new(domain, values, TailSpec { rho: 1.0, kind: TailKind::Exact }, 0)
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn value_at(&self, s: &Site) -> Option<f64> {
        self.domain.index_of(s).map(|i| self.values[i])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn shifted(&self, c: f64) -> PotentialField {
        let values = self.values.iter().map(|v| v + c).collect();
        PotentialField { values, ..self.clone() }
    }

    /// Restriction to a sub-domain.
    pub fn restrict(&self, sub: &LatticeDomain) -> Result<PotentialField> {
        let values = sub
            .sites()
            .iter()
            .map(|s| self.value_at(s).ok_or(Error::NotSubset("restriction domain")))
            .collect::<Result<Vec<_>>>()?;
        Ok(PotentialField { domain: sub.clone(), values, spec: self.spec, seed: self.seed })
    }

    pub fn record(&self) -> FieldRecord {
        FieldRecord { seed: self.seed, spec: self.spec, values: self.values.clone() }
    }

    pub fn from_record(domain: LatticeDomain, rec: FieldRecord) -> Result<Self> {
        rec.spec.validate()?;
        Self::new(domain, rec.values, rec.spec, rec.seed)
    }
}

/// Value at a single site under `(spec, seed)`.
pub fn sample_site(spec: &TailSpec, seed: u64, site: &Site) -> f64 {
    let mut stream = Stream::from_key(coords_key(seed, site.coords()));
    spec.draw(&mut stream)
}

/// I.i.d. field on `domain`. Each site owns a stream keyed by `(seed, coords)`,
/// so the result does not depend on iteration order or on the thread pool.
pub fn sample(domain: &LatticeDomain, spec: &TailSpec, seed: u64) -> Result<PotentialField> {
    spec.validate()?;
    let values: Vec<f64> = if domain.len() >= 4096 {
        domain.sites().par_iter().map(|s| sample_site(spec, seed, s)).collect()
    } else {
        domain.sites().iter().map(|s| sample_site(spec, seed, s)).collect()
    };
    PotentialField::new(domain.clone(), values, *spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn forced_uniform_examples() {
        let s1 = TailSpec::exact(1.0).unwrap();
        assert_abs_diff_eq!(s1.from_uniform((-std::f64::consts::E).exp()).unwrap(), 1.0, epsilon = 1e-12);
        let s2 = TailSpec::exact(2.0).unwrap();
        assert_abs_diff_eq!(s2.from_uniform((-1.0f64).exp()).unwrap(), 0.0, epsilon = 1e-12);
        assert!(s1.from_uniform(0.0).is_none());
        assert!(s1.from_uniform(1.0).is_none());
    }

    #[test]
    fn tail_examples() {
        let s1 = TailSpec::exact(1.0).unwrap();
        assert_abs_diff_eq!(s1.tail_prob(0.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s1.tail_prob(1.0), 0.065_988_035_845_312_54, epsilon = 1e-15);
        let s2 = TailSpec::exact(2.0).unwrap();
        assert_abs_diff_eq!(s2.tail_prob(2.0 * 10f64.ln().ln()), 0.1, epsilon = 1e-14);
        let big = s1.tail_prob_checked(1000.0);
        assert_eq!(big.value, 0.0);
        assert!(big.underflow);
    }

    #[test]
    fn hat_a_examples() {
        let s1 = TailSpec::exact(1.0).unwrap();
        assert_abs_diff_eq!(s1.hat_a(10f64.exp(), 1).unwrap(), 10f64.ln(), epsilon = 1e-12);
        let s2 = TailSpec::exact(2.0).unwrap();
        assert_abs_diff_eq!(s2.hat_a(5f64.exp(), 2).unwrap(), 2.0 * 10f64.ln(), epsilon = 1e-12);
        let p = TailSpec::new(1.0, TailKind::Log1pAbs { c: 0.1 }).unwrap();
        let a = p.hat_a(1e4, 1).unwrap();
        assert_abs_diff_eq!(p.tail_prob(a) * 1e4, 1.0, epsilon = 1e-9);
        assert!(s1.hat_a(1.5, 1).is_err());
    }

    #[test]
    fn density_value_at_zero() {
        let s1 = TailSpec::exact(1.0).unwrap();
        assert_abs_diff_eq!(s1.density(0.0), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(TailSpec::exact(0.0).is_err());
        assert!(TailSpec::exact(f64::NAN).is_err());
        assert!(TailSpec::new(1.0, TailKind::Log1pAbs { c: 1.5 }).is_err());
        assert!(TailSpec::new(2.0, TailKind::Atan { c: -0.6 }).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let s = TailSpec::new(1.5, TailKind::Log1pSq { c: 0.2 }).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"rho":1.5,"kind":"log1p_sq","c":0.2}"#);
        assert_eq!(serde_json::from_str::<TailSpec>(&j).unwrap(), s);
    }

    #[test]
    fn field_restriction_matches_direct_sample() {
        let spec = TailSpec::exact(1.0).unwrap();
        let big = sample(&LatticeDomain::interval(0, 50), &spec, 9).unwrap();
        let sub = LatticeDomain::interval(10, 20);
        assert_eq!(big.restrict(&sub).unwrap(), sample(&sub, &spec, 9).unwrap());
    }
}
