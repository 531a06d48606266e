//! Phi-divergences for finite measures.
//!
//! A divergence is built from a convex generator `phi: (0, inf) -> R` with a
//! finite right limit at 0 (possibly +inf for generators like `-log x`). The
//! scalar kernel extends `(v, w) -> w * phi(v / w)` to the boundary of the
//! quadrant by limits:
//!
//! ```text
//! f(v, w) = w * phi(v / w)          for w > 0,
//! f(v, 0) = v * lim phi(x) / x      for v > 0 (limit taken as x -> inf),
//! f(0, 0) = 0.
//! ```
//!
//! The divergence of `s` relative to `t` is the sum of `f(s_i, t_i)`. Each
//! built-in bundle also carries the strong-convexity constant `kappa(w)`,
//! the largest constant with `phi'' >= kappa(w)` on `(0, 1/w)`.

use std::fmt;
use std::ops::Add;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::measures::MeasureVector;

/// A real number extended with `+inf`.
///
/// Negative infinity is never constructed: the kernel above produces only
/// `+inf` on the inputs this crate evaluates. The `(0, 0)` kernel case is
/// hard-coded to zero and never computed as `0 * inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(*v),
            ExtendedReal::Infinite => None,
        }
    }

    /// Wraps a computed value, saturating floating-point overflow to `+inf`.
    fn from_computed(v: f64) -> Self {
        if v.is_finite() {
            ExtendedReal::Finite(v)
        } else {
            ExtendedReal::Infinite
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::from_computed(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A phi-divergence bundle: the generator, its first two derivatives, the
/// boundary limits needed by the extended kernel, and (when available) the
/// strong-convexity constant `kappa(w)`.
pub struct Divergence {
    name: String,
    phi: ScalarFn,
    phi_prime: ScalarFn,
    phi_second: ScalarFn,
    phi_at_zero: ExtendedReal,
    slope_at_infinity: ExtendedReal,
    phi_prime_limit_at_zero: f64,
    kappa: Option<ScalarFn>,
    alpha: Option<f64>,
}

impl fmt::Debug for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Divergence")
            .field("name", &self.name)
            .field("phi_at_zero", &self.phi_at_zero)
            .field("slope_at_infinity", &self.slope_at_infinity)
            .field("phi_prime_limit_at_zero", &self.phi_prime_limit_at_zero)
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl Divergence {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: &str,
        phi: ScalarFn,
        phi_prime: ScalarFn,
        phi_second: ScalarFn,
        phi_at_zero: ExtendedReal,
        slope_at_infinity: ExtendedReal,
        phi_prime_limit_at_zero: f64,
        kappa: Option<ScalarFn>,
        alpha: Option<f64>,
    ) -> Self {
        Self {
            name: name.to_owned(),
            phi,
            phi_prime,
            phi_second,
            phi_at_zero,
            slope_at_infinity,
            phi_prime_limit_at_zero,
            kappa,
            alpha,
        }
    }

    /// `phi(x) = x log x`, `kappa(w) = w`.
    pub fn kullback_leibler() -> Self {
        Self::assemble(
            "kullback_leibler",
            Box::new(|x| x * x.ln()),
            Box::new(|x| x.ln() + 1.0),
            Box::new(|x| 1.0 / x),
            ExtendedReal::Finite(0.0),
            ExtendedReal::Infinite,
            f64::NEG_INFINITY,
            Some(Box::new(|w| w)),
            None,
        )
    }

    /// `phi(x) = (x - 1)^2`, `kappa(w) = 2`.
    pub fn pearson_chi2() -> Self {
        Self::assemble(
            "pearson_chi2",
            Box::new(|x| (x - 1.0) * (x - 1.0)),
            Box::new(|x| 2.0 * (x - 1.0)),
            Box::new(|_| 2.0),
            ExtendedReal::Finite(1.0),
            ExtendedReal::Infinite,
            -2.0,
            Some(Box::new(|_| 2.0)),
            None,
        )
    }

    /// `phi(x) = 2 (1 - sqrt(x))`, `kappa(w) = w^(3/2) / 2`.
    pub fn squared_hellinger() -> Self {
        Self::assemble(
            "squared_hellinger",
            Box::new(|x| 2.0 * (1.0 - x.sqrt())),
            Box::new(|x| -1.0 / x.sqrt()),
            Box::new(|x| 0.5 * x.powf(-1.5)),
            ExtendedReal::Finite(2.0),
            ExtendedReal::Finite(0.0),
            f64::NEG_INFINITY,
            Some(Box::new(|w: f64| 0.5 * w.powf(1.5))),
            None,
        )
    }

    /// `phi(x) = -log x`, `kappa(w) = w^2`.
    pub fn reverse_relative_entropy() -> Self {
        Self::assemble(
            "reverse_relative_entropy",
            Box::new(|x| -x.ln()),
            Box::new(|x| -1.0 / x),
            Box::new(|x| 1.0 / (x * x)),
            ExtendedReal::Infinite,
            ExtendedReal::Finite(0.0),
            f64::NEG_INFINITY,
            Some(Box::new(|w| w * w)),
            None,
        )
    }

    /// `phi(x) = (x - 1)^2 / (x + 1)`, `kappa(w) = 8 (1/w + 1)^-3`.
    pub fn vincze_le_cam() -> Self {
        Self::assemble(
            "vincze_le_cam",
            Box::new(|x| (x - 1.0) * (x - 1.0) / (x + 1.0)),
            Box::new(|x| (x - 1.0) * (x + 3.0) / ((x + 1.0) * (x + 1.0))),
            Box::new(|x| 8.0 / ((x + 1.0) * (x + 1.0) * (x + 1.0))),
            ExtendedReal::Finite(1.0),
            ExtendedReal::Finite(1.0),
            -3.0,
            Some(Box::new(|w: f64| 8.0 * (1.0 / w + 1.0).powi(-3))),
            None,
        )
    }

    /// `phi(x) = (x + 1) log(2 / (x + 1)) + x log x`, `kappa(w) = w^2 / (w + 1)`.
    pub fn jensen_shannon() -> Self {
        Self::assemble(
            "jensen_shannon",
            Box::new(|x| (x + 1.0) * (2.0 / (x + 1.0)).ln() + x * x.ln()),
            Box::new(|x| (2.0 * x / (x + 1.0)).ln()),
            Box::new(|x| 1.0 / (x * (x + 1.0))),
            ExtendedReal::Finite(std::f64::consts::LN_2),
            ExtendedReal::Finite(std::f64::consts::LN_2),
            f64::NEG_INFINITY,
            Some(Box::new(|w| w * w / (w + 1.0))),
            None,
        )
    }

    /// `phi(x) = 1/x - 1`, `kappa(w) = 2 w^3`.
    pub fn neyman_chi2() -> Self {
        Self::assemble(
            "neyman_chi2",
            Box::new(|x| 1.0 / x - 1.0),
            Box::new(|x| -1.0 / (x * x)),
            Box::new(|x| 2.0 / (x * x * x)),
            ExtendedReal::Infinite,
            ExtendedReal::Finite(0.0),
            f64::NEG_INFINITY,
            Some(Box::new(|w| 2.0 * w * w * w)),
            None,
        )
    }

    /// `phi(x) = 4 (1 - x^((1+alpha)/2)) / (1 - alpha^2)` for `alpha < 3`,
    /// `alpha != -1, 1`; `kappa(w) = w^((3-alpha)/2)`.
    pub fn alpha_divergence(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha >= 3.0 || alpha == 1.0 || alpha == -1.0 {
            return Err(Error::InvalidAlpha(alpha));
        }
        let scale = 4.0 / (1.0 - alpha * alpha);
        let p = (1.0 + alpha) / 2.0;
        // phi' = 2 x^((alpha-1)/2) / (alpha - 1), phi'' = x^((alpha-3)/2)
        let phi_at_zero = if alpha > -1.0 {
            ExtendedReal::Finite(scale)
        } else {
            ExtendedReal::Infinite
        };
        let (slope, prime_zero) = if alpha < 1.0 {
            (ExtendedReal::Finite(0.0), f64::NEG_INFINITY)
        } else {
            (ExtendedReal::Infinite, 0.0)
        };
        Ok(Self::assemble(
            "alpha_divergence",
            Box::new(move |x: f64| scale * (1.0 - x.powf(p))),
            Box::new(move |x: f64| 2.0 * x.powf((alpha - 1.0) / 2.0) / (alpha - 1.0)),
            Box::new(move |x: f64| x.powf((alpha - 3.0) / 2.0)),
            phi_at_zero,
            slope,
            prime_zero,
            Some(Box::new(move |w: f64| w.powf((3.0 - alpha) / 2.0))),
            Some(alpha),
        ))
    }

    /// A user-supplied divergence bundle. No strong-convexity constant is
    /// attached unless one is provided via [`Divergence::with_kappa`].
    pub fn custom(
        name: &str,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_second: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_at_zero: f64,
        slope_at_infinity: ExtendedReal,
        phi_prime_limit_at_zero: f64,
    ) -> Result<Self> {
        if !phi_at_zero.is_finite() {
            return Err(Error::InvalidArgument(
                "custom divergences require a finite right limit of phi at 0".into(),
            ));
        }
        Ok(Self::assemble(
            name,
            Box::new(phi),
            Box::new(phi_prime),
            Box::new(phi_second),
            ExtendedReal::Finite(phi_at_zero),
            slope_at_infinity,
            phi_prime_limit_at_zero,
            None,
            None,
        ))
    }

    pub fn with_kappa(mut self, kappa: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.kappa = Some(Box::new(kappa));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn phi(&self, x: f64) -> f64 {
        (self.phi)(x)
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        (self.phi_prime)(x)
    }

    pub fn phi_second(&self, x: f64) -> f64 {
        (self.phi_second)(x)
    }

    /// Right limit of `phi` at zero.
    pub fn phi_at_zero(&self) -> ExtendedReal {
        self.phi_at_zero
    }

    /// `lim_{x -> inf} phi(x) / x`.
    pub fn slope_at_infinity(&self) -> ExtendedReal {
        self.slope_at_infinity
    }

    /// `lim_{x -> 0+} phi'(x)`; `f64::NEG_INFINITY` when the slope diverges.
    pub fn phi_prime_limit_at_zero(&self) -> f64 {
        self.phi_prime_limit_at_zero
    }

    /// Strong-convexity constant of `phi` on `(0, 1/w)`, when known.
    pub fn kappa(&self, w: f64) -> Option<f64> {
        self.kappa.as_ref().map(|k| k(w))
    }

    pub fn has_kappa(&self) -> bool {
        self.kappa.is_some()
    }

    /// Extended-real kernel `f(v, w)`.
    pub fn f_eval(&self, v: f64, w: f64) -> Result<ExtendedReal> {
        if v.is_nan() || w.is_nan() || v < 0.0 || w < 0.0 {
            return Err(Error::NegativeKernelInput { v, w });
        }
        Ok(if w > 0.0 {
            if v == 0.0 {
                match self.phi_at_zero {
                    ExtendedReal::Finite(p0) => ExtendedReal::from_computed(w * p0),
                    ExtendedReal::Infinite => ExtendedReal::Infinite,
                }
            } else {
                ExtendedReal::from_computed(w * self.phi(v / w))
            }
        } else if v > 0.0 {
            match self.slope_at_infinity {
                ExtendedReal::Finite(slope) => ExtendedReal::from_computed(v * slope),
                ExtendedReal::Infinite => ExtendedReal::Infinite,
            }
        } else {
            // v = w = 0: zero by definition, never a 0 * inf product.
            ExtendedReal::Finite(0.0)
        })
    }

    /// Divergence of `s` relative to `t`: the sum of the kernel over
    /// components. Finite whenever `supp(s)` is contained in `supp(t)`.
    pub fn divergence_eval(&self, s: &MeasureVector, t: &MeasureVector) -> Result<ExtendedReal> {
        if s.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                actual: t.len(),
            });
        }
        let mut total = ExtendedReal::Finite(0.0);
        for i in 0..s.len() {
            total = total + self.f_eval(s.get(i), t.get(i))?;
            if !total.is_finite() {
                return Ok(ExtendedReal::Infinite);
            }
        }
        Ok(total)
    }

    /// Gradient of `s -> D(s | t)` at interior points: component `i` is
    /// `phi'(s_i / t_i)`.
    pub fn gradient_first(&self, s: &DVector<f64>, t: &DVector<f64>) -> Result<DVector<f64>> {
        check_interior_pair(s, t)?;
        Ok(DVector::from_fn(s.len(), |i, _| self.phi_prime(s[i] / t[i])))
    }

    /// Diagonal of the Hessian of `s -> D(s | t)` at interior points:
    /// component `i` is `phi''(s_i / t_i) / t_i`.
    pub fn hessian_first_diag(&self, s: &DVector<f64>, t: &DVector<f64>) -> Result<DVector<f64>> {
        check_interior_pair(s, t)?;
        Ok(DVector::from_fn(s.len(), |i, _| {
            self.phi_second(s[i] / t[i]) / t[i]
        }))
    }
}

fn check_interior_pair(s: &DVector<f64>, t: &DVector<f64>) -> Result<()> {
    if s.len() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            actual: t.len(),
        });
    }
    for (i, &v) in s.iter().enumerate() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::BoundaryInput {
                what: "first argument",
                index: i,
                value: v,
            });
        }
    }
    for (i, &v) in t.iter().enumerate() {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::BoundaryInput {
                what: "second argument",
                index: i,
                value: v,
            });
        }
    }
    Ok(())
}

/// Looks up a built-in divergence by name. `alpha` must be supplied exactly
/// for `alpha_divergence`.
pub fn builtin_divergence(name: &str, alpha: Option<f64>) -> Result<Divergence> {
    if name != "alpha_divergence" && alpha.is_some() {
        return Err(Error::InvalidArgument(format!(
            "divergence `{name}` takes no alpha parameter"
        )));
    }
    match name {
        "kullback_leibler" => Ok(Divergence::kullback_leibler()),
        "pearson_chi2" => Ok(Divergence::pearson_chi2()),
        "squared_hellinger" => Ok(Divergence::squared_hellinger()),
        "reverse_relative_entropy" => Ok(Divergence::reverse_relative_entropy()),
        "vincze_le_cam" => Ok(Divergence::vincze_le_cam()),
        "jensen_shannon" => Ok(Divergence::jensen_shannon()),
        "neyman_chi2" => Ok(Divergence::neyman_chi2()),
        "alpha_divergence" => match alpha {
            Some(a) => Divergence::alpha_divergence(a),
            None => Err(Error::InvalidArgument(
                "alpha_divergence requires an alpha parameter".into(),
            )),
        },
        other => Err(Error::UnknownDivergence(other.to_owned())),
    }
}

/// All built-in divergences, instantiating the alpha family at `alpha = 0.5`.
/// Test and diagnostic helper.
pub fn builtin_suite() -> Vec<Divergence> {
    vec![
        Divergence::kullback_leibler(),
        Divergence::pearson_chi2(),
        Divergence::squared_hellinger(),
        Divergence::reverse_relative_entropy(),
        Divergence::vincze_le_cam(),
        Divergence::jensen_shannon(),
        Divergence::neyman_chi2(),
        Divergence::alpha_divergence(0.5).expect("0.5 is a valid alpha"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use approx::assert_relative_eq;

    #[test]
    fn table_kappa_values() {
        let kl = Divergence::kullback_leibler();
        assert_eq!(kl.kappa(0.3), Some(0.3));
        let pearson = Divergence::pearson_chi2();
        assert_eq!(pearson.kappa(0.1), Some(2.0));
        assert_eq!(pearson.kappa(7.0), Some(2.0));
        let neyman = Divergence::neyman_chi2();
        assert_relative_eq!(neyman.kappa(0.5).unwrap(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn unknown_name_and_alpha_validation() {
        assert!(matches!(
            builtin_divergence("nope", None),
            Err(Error::UnknownDivergence(_))
        ));
        assert!(matches!(
            builtin_divergence("alpha_divergence", Some(1.0)),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(matches!(
            builtin_divergence("alpha_divergence", Some(-1.0)),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(matches!(
            builtin_divergence("alpha_divergence", Some(3.0)),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(builtin_divergence("alpha_divergence", None).is_err());
        assert!(builtin_divergence("kullback_leibler", Some(0.5)).is_err());
        assert!(builtin_divergence("alpha_divergence", Some(2.5)).is_ok());
    }

    #[test]
    fn builtin_phi_is_zero_at_one() {
        for div in builtin_suite() {
            assert!(
                div.phi(1.0).abs() < 1e-15,
                "{} has phi(1) = {}",
                div.name(),
                div.phi(1.0)
            );
        }
    }

    #[test]
    fn quartic_custom_has_no_kappa() {
        let quartic = Divergence::custom(
            "quartic",
            |x| (x - 1.0).powi(4),
            |x| 4.0 * (x - 1.0).powi(3),
            |x| 12.0 * (x - 1.0) * (x - 1.0),
            1.0,
            ExtendedReal::Infinite,
            -4.0,
        )
        .unwrap();
        assert!(!quartic.has_kappa());
        assert_eq!(quartic.phi_second(1.0), 0.0);
    }

    #[test]
    fn custom_xlogx_matches_builtin_kl() {
        let custom = Divergence::custom(
            "xlogx",
            |x| x * x.ln(),
            |x| x.ln() + 1.0,
            |x| 1.0 / x,
            0.0,
            ExtendedReal::Infinite,
            f64::NEG_INFINITY,
        )
        .unwrap();
        let kl = Divergence::kullback_leibler();
        let mut rng = SplitMix64::new(11);
        for _ in 0..200 {
            let v = rng.next_f64();
            let w = rng.next_f64_open();
            let a = custom.f_eval(v, w).unwrap();
            let b = kl.f_eval(v, w).unwrap();
            match (a, b) {
                (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => {
                    assert!((x - y).abs() <= 1e-15 * (1.0 + x.abs()))
                }
                _ => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn custom_square_matches_builtin_pearson() {
        let custom = Divergence::custom(
            "square",
            |x| (x - 1.0) * (x - 1.0),
            |x| 2.0 * (x - 1.0),
            |_| 2.0,
            1.0,
            ExtendedReal::Infinite,
            -2.0,
        )
        .unwrap();
        let pearson = Divergence::pearson_chi2();
        let mut rng = SplitMix64::new(3);
        for _ in 0..100 {
            let s = MeasureVector::new(vec![rng.next_f64_open(), rng.next_f64_open()]).unwrap();
            let t = MeasureVector::new(vec![rng.next_f64_open(), rng.next_f64_open()]).unwrap();
            let a = custom.divergence_eval(&s, &t).unwrap().finite().unwrap();
            let b = pearson.divergence_eval(&s, &t).unwrap().finite().unwrap();
            assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn kernel_boundary_cases() {
        for div in builtin_suite() {
            assert_eq!(
                div.f_eval(0.0, 0.0).unwrap(),
                ExtendedReal::Finite(0.0),
                "{}",
                div.name()
            );
        }
        let kl = Divergence::kullback_leibler();
        let v = kl.f_eval(0.2, 0.4).unwrap().finite().unwrap();
        assert_relative_eq!(v, 0.4 * 0.5 * 0.5f64.ln(), max_relative = 1e-14);
        assert_eq!(kl.f_eval(0.3, 0.0).unwrap(), ExtendedReal::Infinite);
        assert!(matches!(
            kl.f_eval(-0.1, 0.2),
            Err(Error::NegativeKernelInput { .. })
        ));
        assert!(kl.f_eval(0.1, f64::NAN).is_err());
    }

    #[test]
    fn divergence_eval_examples() {
        let kl = Divergence::kullback_leibler();
        let p = MeasureVector::new(vec![0.3, 0.45, 0.25]).unwrap();
        let d = kl.divergence_eval(&p, &p).unwrap().finite().unwrap();
        assert!(d.abs() <= 1e-15);

        let pearson = Divergence::pearson_chi2();
        let s = MeasureVector::new(vec![0.5, 0.5]).unwrap();
        let t = MeasureVector::new(vec![0.25, 0.75]).unwrap();
        let d = pearson.divergence_eval(&s, &t).unwrap().finite().unwrap();
        assert_relative_eq!(d, 1.0 / 3.0, max_relative = 1e-12);

        let short = MeasureVector::new(vec![0.5]).unwrap();
        assert!(matches!(
            pearson.divergence_eval(&short, &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rescaling_identity_two_dim() {
        // D(s | t) = M * D(s/M | t/M) for s, t in [0, M]^m.
        let m_scale = 4.0;
        let mut rng = SplitMix64::new(77);
        for div in builtin_suite() {
            for _ in 0..200 {
                let s = vec![rng.next_f64_open(), rng.next_f64_open()];
                let t = vec![rng.next_f64_open(), rng.next_f64_open()];
                let sm = MeasureVector::new(s.iter().map(|v| v / m_scale).collect()).unwrap();
                let tm = MeasureVector::new(t.iter().map(|v| v / m_scale).collect()).unwrap();
                let s = MeasureVector::new(s).unwrap();
                let t = MeasureVector::new(t).unwrap();
                let d = div.divergence_eval(&s, &t).unwrap().finite().unwrap();
                let dm = div.divergence_eval(&sm, &tm).unwrap().finite().unwrap();
                assert!(
                    (d - m_scale * dm).abs() <= 1e-12 * (1.0 + d.abs()),
                    "{}: {} vs {}",
                    div.name(),
                    d,
                    m_scale * dm
                );
            }
        }
    }

    #[test]
    fn gradient_examples_and_boundary() {
        let kl = Divergence::kullback_leibler();
        let s = DVector::from_vec(vec![0.2, 0.5, 0.3]);
        let g = kl.gradient_first(&s, &s).unwrap();
        for i in 0..3 {
            assert_relative_eq!(g[i], 1.0, max_relative = 1e-15);
        }

        let pearson = Divergence::pearson_chi2();
        let s = DVector::from_vec(vec![0.3, 0.7]);
        let t = DVector::from_vec(vec![0.5, 0.5]);
        let g = pearson.gradient_first(&s, &t).unwrap();
        assert_relative_eq!(g[0], -0.8, max_relative = 1e-14);
        assert_relative_eq!(g[1], 0.8, max_relative = 1e-14);

        let on_edge = DVector::from_vec(vec![0.0, 0.7]);
        assert!(matches!(
            pearson.gradient_first(&on_edge, &t),
            Err(Error::BoundaryInput { .. })
        ));
        let at_one = DVector::from_vec(vec![1.0, 0.7]);
        assert!(pearson.gradient_first(&s, &at_one).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(5);
        let h = 1e-7;
        for div in builtin_suite() {
            for _ in 0..100 {
                let s: Vec<f64> = (0..3).map(|_| 0.05 + 0.9 * rng.next_f64()).collect();
                let t: Vec<f64> = (0..3).map(|_| 0.05 + 0.9 * rng.next_f64()).collect();
                let sv = DVector::from_vec(s.clone());
                let tv = DVector::from_vec(t.clone());
                let g = div.gradient_first(&sv, &tv).unwrap();
                for i in 0..3 {
                    let mut up = s.clone();
                    let mut dn = s.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let fu = div
                        .divergence_eval(
                            &MeasureVector::new(up).unwrap(),
                            &MeasureVector::new(t.clone()).unwrap(),
                        )
                        .unwrap()
                        .finite()
                        .unwrap();
                    let fd = div
                        .divergence_eval(
                            &MeasureVector::new(dn).unwrap(),
                            &MeasureVector::new(t.clone()).unwrap(),
                        )
                        .unwrap()
                        .finite()
                        .unwrap();
                    let fd_grad = (fu - fd) / (2.0 * h);
                    assert!(
                        (g[i] - fd_grad).abs() <= 1e-6 * (1.0 + g[i].abs()),
                        "{}: analytic {} vs fd {}",
                        div.name(),
                        g[i],
                        fd_grad
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_diag_examples_and_fd() {
        let kl = Divergence::kullback_leibler();
        let s = DVector::from_vec(vec![0.5, 0.5]);
        let h = kl.hessian_first_diag(&s, &s).unwrap();
        assert_relative_eq!(h[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(h[1], 2.0, max_relative = 1e-14);

        let pearson = Divergence::pearson_chi2();
        let t = DVector::from_vec(vec![0.25, 0.8]);
        let hp = pearson.hessian_first_diag(&s, &t).unwrap();
        assert_relative_eq!(hp[0], 8.0, max_relative = 1e-14);
        assert_relative_eq!(hp[1], 2.5, max_relative = 1e-14);

        // Central differences of the gradient.
        let mut rng = SplitMix64::new(8);
        let step = 1e-6;
        for div in builtin_suite() {
            for _ in 0..50 {
                let s: Vec<f64> = (0..2).map(|_| 0.1 + 0.8 * rng.next_f64()).collect();
                let t: Vec<f64> = (0..2).map(|_| 0.1 + 0.8 * rng.next_f64()).collect();
                let sv = DVector::from_vec(s.clone());
                let tv = DVector::from_vec(t.clone());
                let diag = div.hessian_first_diag(&sv, &tv).unwrap();
                for i in 0..2 {
                    let mut up = sv.clone();
                    let mut dn = sv.clone();
                    up[i] += step;
                    dn[i] -= step;
                    let gu = div.gradient_first(&up, &tv).unwrap()[i];
                    let gd = div.gradient_first(&dn, &tv).unwrap()[i];
                    let fd = (gu - gd) / (2.0 * step);
                    assert!(
                        (diag[i] - fd).abs() <= 1e-5 * (1.0 + diag[i].abs()),
                        "{}: {} vs {}",
                        div.name(),
                        diag[i],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn nonnegative_on_probability_vectors() {
        let mut rng = SplitMix64::new(21);
        for div in builtin_suite() {
            for _ in 0..100 {
                let raw: Vec<f64> = (0..4).map(|_| rng.next_f64_open()).collect();
                let sum: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|v| v / sum).collect();
                let raw2: Vec<f64> = (0..4).map(|_| rng.next_f64_open()).collect();
                let sum2: f64 = raw2.iter().sum();
                let q: Vec<f64> = raw2.iter().map(|v| v / sum2).collect();
                let p = MeasureVector::new(p).unwrap();
                let q = MeasureVector::new(q).unwrap();
                let d = div.divergence_eval(&p, &q).unwrap();
                if let ExtendedReal::Finite(v) = d {
                    assert!(v >= -1e-12, "{}: {}", div.name(), v);
                }
            }
        }
    }

    #[test]
    fn strong_convexity_margin_in_first_argument() {
        // D(a s + (1-a) s' | t) <= a D(s|t) + (1-a) D(s'|t)
        //                          - kappa/2 a (1-a) |s - s'|^2,
        // with kappa = min_i kappa(t_i) / t_i.
        let mut rng = SplitMix64::new(33);
        for div in builtin_suite() {
            for _ in 0..100 {
                let t: Vec<f64> = (0..3).map(|_| 0.05 + 0.9 * rng.next_f64()).collect();
                let s: Vec<f64> = (0..3).map(|_| 0.02 + 0.96 * rng.next_f64()).collect();
                let s2: Vec<f64> = (0..3).map(|_| 0.02 + 0.96 * rng.next_f64()).collect();
                let a = rng.next_f64();
                let mix: Vec<f64> = s
                    .iter()
                    .zip(&s2)
                    .map(|(x, y)| a * x + (1.0 - a) * y)
                    .collect();
                let dist2: f64 = s.iter().zip(&s2).map(|(x, y)| (x - y) * (x - y)).sum();
                let kappa = t
                    .iter()
                    .map(|&w| div.kappa(w).unwrap() / w)
                    .fold(f64::INFINITY, f64::min);
                let tv = MeasureVector::new(t.clone()).unwrap();
                let d_mix = div
                    .divergence_eval(&MeasureVector::new(mix).unwrap(), &tv)
                    .unwrap()
                    .finite()
                    .unwrap();
                let d_s = div
                    .divergence_eval(&MeasureVector::new(s.clone()).unwrap(), &tv)
                    .unwrap()
                    .finite()
                    .unwrap();
                let d_s2 = div
                    .divergence_eval(&MeasureVector::new(s2.clone()).unwrap(), &tv)
                    .unwrap()
                    .finite()
                    .unwrap();
                let bound = a * d_s + (1.0 - a) * d_s2 - 0.5 * kappa * a * (1.0 - a) * dist2;
                assert!(
                    d_mix <= bound + 1e-12 * (1.0 + bound.abs()),
                    "{}: {} vs {}",
                    div.name(),
                    d_mix,
                    bound
                );
            }
        }
    }

    #[test]
    fn extended_real_arithmetic() {
        let a = ExtendedReal::Finite(1.5);
        let b = ExtendedReal::Infinite;
        assert_eq!(a + a, ExtendedReal::Finite(3.0));
        assert_eq!(a + b, ExtendedReal::Infinite);
        assert_eq!(format!("{b}"), "inf");
        assert_eq!(ExtendedReal::from_computed(f64::INFINITY), b);
    }

    #[test]
    fn slopes_and_zero_limits_match_numeric_limits() {
        // Numeric check of the derived closed forms: phi(x)/x at large x and
        // phi, phi' near 0. The divergent limits grow as slowly as log x, so
        // the thresholds are modest.
        for div in builtin_suite() {
            let big = 1e16;
            match div.slope_at_infinity() {
                ExtendedReal::Finite(s) => {
                    let approx_slope = div.phi(big) / big;
                    assert!(
                        (approx_slope - s).abs() < 1e-3 * (1.0 + s.abs()),
                        "{}: slope {} vs {}",
                        div.name(),
                        approx_slope,
                        s
                    );
                }
                ExtendedReal::Infinite => {
                    assert!(div.phi(big) / big > 10.0, "{}", div.name());
                }
            }
            let tiny = 1e-300;
            match div.phi_at_zero() {
                ExtendedReal::Finite(p0) => {
                    assert!(
                        (div.phi(tiny) - p0).abs() < 1e-8 * (1.0 + p0.abs()),
                        "{}: phi(0+) {} vs {}",
                        div.name(),
                        div.phi(tiny),
                        p0
                    );
                }
                ExtendedReal::Infinite => assert!(div.phi(tiny) > 100.0, "{}", div.name()),
            }
            let p = div.phi_prime_limit_at_zero();
            if p == f64::NEG_INFINITY {
                assert!(div.phi_prime(tiny) < -100.0, "{}", div.name());
            } else {
                assert!(
                    (div.phi_prime(tiny) - p).abs() < 1e-8 * (1.0 + p.abs()),
                    "{}: phi'(0+) {} vs {}",
                    div.name(),
                    div.phi_prime(tiny),
                    p
                );
            }
        }
    }
}
