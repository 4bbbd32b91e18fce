//! Jones/Stokes polarization calculus for the encoder output.
//!
//! Jones vectors are stored in the diagonal basis, `D = (H+V)/√2` and
//! `A = (H−V)/√2`, because the modulator applies its phase between the two
//! PBS ports which map onto D and A. Handedness is fixed so that phase `+π/2`
//! gives `L` (Stokes `s3 = +1`) and `−π/2` gives `R`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolarizationError {
    #[error("phase must be finite, got {0}")]
    NonFinitePhase(f64),
    #[error("Jones vector is not normalized (|a_d|^2 + |a_a|^2 = {0})")]
    NotNormalized(f64),
    #[error("mixture is empty")]
    EmptyMixture,
    #[error("mixture weights invalid: {0}")]
    BadWeights(String),
    #[error("projection error {0} is outside (0, 1)")]
    ErrorOutOfRange(f64),
    #[error("PER is +inf: projection error is zero")]
    PerInfinite,
    #[error("PER is -inf: projection error is one")]
    PerNegativeInfinite,
    #[error("PER must be finite, got {0}")]
    NonFinitePer(f64),
    #[error("IQBER undefined for counts {0:?}: denominator after dark subtraction is {1}")]
    IqberDenominator(CountRecord, i64),
}

/// A pure polarization state as amplitudes on the D/A basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesVector {
    pub a_d: Complex64,
    pub a_a: Complex64,
}

impl JonesVector {
    /// Builds a normalized vector; fails unless `|a_d|² + |a_a|² = 1`.
    pub fn new(a_d: Complex64, a_a: Complex64) -> Result<Self, PolarizationError> {
        let j = JonesVector { a_d, a_a };
        j.check_normalized()?;
        Ok(j)
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(a_d: Complex64, a_a: Complex64) -> Result<Self, PolarizationError> {
        let n = (a_d.norm_sqr() + a_a.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(PolarizationError::NotNormalized(n * n));
        }
        Ok(JonesVector {
            a_d: a_d / n,
            a_a: a_a / n,
        })
    }

    /// Builds a vector from horizontal/vertical amplitudes.
    pub fn from_hv(h: Complex64, v: Complex64) -> Result<Self, PolarizationError> {
        Self::normalized((h + v) * FRAC_1_SQRT_2, (h - v) * FRAC_1_SQRT_2)
    }

    pub fn h() -> Self {
        jones_unchecked(0.0)
    }

    pub fn v() -> Self {
        jones_unchecked(PI)
    }

    pub fn l() -> Self {
        jones_unchecked(FRAC_PI_2)
    }

    pub fn r() -> Self {
        jones_unchecked(-FRAC_PI_2)
    }

    pub fn d() -> Self {
        JonesVector {
            a_d: Complex64::new(1.0, 0.0),
            a_a: Complex64::new(0.0, 0.0),
        }
    }

    pub fn a() -> Self {
        JonesVector {
            a_d: Complex64::new(0.0, 0.0),
            a_a: Complex64::new(1.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a_d.norm_sqr() + self.a_a.norm_sqr()
    }

    fn check_normalized(&self) -> Result<(), PolarizationError> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL || !n.is_finite() {
            return Err(PolarizationError::NotNormalized(n));
        }
        Ok(())
    }

    /// Amplitudes on the H/V basis.
    pub fn hv(&self) -> (Complex64, Complex64) {
        (
            (self.a_d + self.a_a) * FRAC_1_SQRT_2,
            (self.a_d - self.a_a) * FRAC_1_SQRT_2,
        )
    }

    /// The orthogonal state `(−a_a*, a_d*)`.
    pub fn orthogonal(&self) -> Self {
        JonesVector {
            a_d: -self.a_a.conj(),
            a_a: self.a_d.conj(),
        }
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.a_d.conj() * other.a_d + self.a_a.conj() * other.a_a
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &JonesVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let g = Complex64::from_polar(1.0, theta);
        JonesVector {
            a_d: self.a_d * g,
            a_a: self.a_a * g,
        }
    }
}

fn jones_unchecked(phi: f64) -> JonesVector {
    JonesVector {
        a_d: Complex64::new(FRAC_1_SQRT_2, 0.0),
        a_a: Complex64::from_polar(FRAC_1_SQRT_2, phi),
    }
}

/// Output of the Sagnac encoder for a relative phase `phi` between the D and
/// A components: `(|D⟩ + e^{iφ}|A⟩)/√2`.
pub fn jones_from_phase(phi: f64) -> Result<JonesVector, PolarizationError> {
    if !phi.is_finite() {
        return Err(PolarizationError::NonFinitePhase(phi));
    }
    Ok(jones_unchecked(phi))
}

/// Normalized Stokes components: `s1` separates H/V, `s2` D/A, `s3` L/R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub fn norm(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }
}

pub fn stokes_from_jones(j: &JonesVector) -> Result<StokesVector, PolarizationError> {
    j.check_normalized()?;
    let (h, v) = j.hv();
    let cross = h * v.conj();
    Ok(StokesVector {
        s1: h.norm_sqr() - v.norm_sqr(),
        s2: 2.0 * cross.re,
        s3: 2.0 * cross.im,
    })
}

/// Discrete ensemble of pure states with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedState {
    members: Vec<(JonesVector, f64)>,
}

impl MixedState {
    pub fn new(members: Vec<(JonesVector, f64)>) -> Result<Self, PolarizationError> {
        if members.is_empty() {
            return Err(PolarizationError::EmptyMixture);
        }
        let mut sum = 0.0;
        for (j, w) in &members {
            j.check_normalized()?;
            if !(w.is_finite() && *w >= 0.0) {
                return Err(PolarizationError::BadWeights(format!(
                    "weight {w} is negative or non-finite"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(PolarizationError::BadWeights(format!(
                "weights sum to {sum}"
            )));
        }
        Ok(MixedState { members })
    }

    pub fn pure(j: JonesVector) -> Self {
        MixedState {
            members: vec![(j, 1.0)],
        }
    }

    pub fn members(&self) -> &[(JonesVector, f64)] {
        &self.members
    }

    /// Mixes in a fully depolarized component of weight `p`.
    ///
    /// The unpolarized state is represented as an equal mixture of any
    /// orthogonal pair; the pair `(reference, reference⊥)` is used so the
    /// ensemble stays a list of pure states.
    pub fn depolarize(&self, p: f64, reference: &JonesVector) -> Result<Self, PolarizationError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(PolarizationError::BadWeights(format!(
                "depolarizing weight {p} not in [0, 1]"
            )));
        }
        let mut members: Vec<_> = self
            .members
            .iter()
            .map(|(j, w)| (*j, w * (1.0 - p)))
            .collect();
        if p > 0.0 {
            members.push((*reference, 0.5 * p));
            members.push((reference.orthogonal(), 0.5 * p));
        }
        Ok(MixedState { members })
    }

    /// Weighted Stokes vector (degree of polarization ≤ 1).
    pub fn stokes(&self) -> StokesVector {
        let mut out = StokesVector {
            s1: 0.0,
            s2: 0.0,
            s3: 0.0,
        };
        for (j, w) in &self.members {
            let s = stokes_from_jones(j).expect("members are normalized");
            out.s1 += w * s.s1;
            out.s2 += w * s.s2;
            out.s3 += w * s.s3;
        }
        out
    }
}

/// Probability of detecting the state in the channel orthogonal to `target`.
pub fn projection_error(
    state: &MixedState,
    target: &JonesVector,
) -> Result<f64, PolarizationError> {
    target.check_normalized()?;
    if state.members.is_empty() {
        return Err(PolarizationError::EmptyMixture);
    }
    let perp = target.orthogonal();
    let e: f64 = state.members.iter().map(|(j, w)| w * perp.overlap(j)).sum();
    Ok(e.clamp(0.0, 1.0))
}

/// Polarization extinction ratio `10·log10((1−e)/e)` in dB.
pub fn per_from_error(e: f64) -> Result<f64, PolarizationError> {
    if e.is_nan() {
        return Err(PolarizationError::ErrorOutOfRange(e));
    }
    if e <= 0.0 {
        return Err(PolarizationError::PerInfinite);
    }
    if e >= 1.0 {
        return Err(PolarizationError::PerNegativeInfinite);
    }
    Ok(10.0 * ((1.0 - e) / e).log10())
}

/// Inverse of [`per_from_error`].
pub fn error_from_per(per_db: f64) -> Result<f64, PolarizationError> {
    if !per_db.is_finite() {
        return Err(PolarizationError::NonFinitePer(per_db));
    }
    Ok(1.0 / (1.0 + 10f64.powf(per_db / 10.0)))
}

/// Raw counts behind one intrinsic-QBER measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub c_a: u64,
    pub d_a: u64,
    pub c_b_perp: u64,
    pub d_b_perp: u64,
}

/// Dark-count-corrected QBER: `(C⊥ − D⊥) / (C⊥ − D⊥ + C_A − D_A)`.
pub fn iqber(counts: &CountRecord) -> Result<f64, PolarizationError> {
    let signal = counts.c_a as i64 - counts.d_a as i64;
    let wrong = counts.c_b_perp as i64 - counts.d_b_perp as i64;
    let denom = wrong + signal;
    if denom <= 0 {
        return Err(PolarizationError::IqberDenominator(*counts, denom));
    }
    Ok(wrong as f64 / denom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_stokes(s: StokesVector, e: (f64, f64, f64)) {
        assert_abs_diff_eq!(s.s1, e.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.s2, e.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s.s3, e.2, epsilon = 1e-12);
    }

    #[test]
    fn phase_states_match_bb84_table() {
        assert_abs_diff_eq!(
            JonesVector::h().overlap(&jones_from_phase(0.0).unwrap()),
            1.0,
            epsilon = 1e-15
        );
        let (h, v) = jones_from_phase(PI).unwrap().hv();
        assert_abs_diff_eq!(h.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-15);
        assert_stokes(
            stokes_from_jones(&jones_from_phase(FRAC_PI_2).unwrap()).unwrap(),
            (0.0, 0.0, 1.0),
        );
        assert_stokes(
            stokes_from_jones(&jones_from_phase(-FRAC_PI_2).unwrap()).unwrap(),
            (0.0, 0.0, -1.0),
        );
    }

    #[test]
    fn stokes_basis_states() {
        assert_stokes(
            stokes_from_jones(&JonesVector::h()).unwrap(),
            (1.0, 0.0, 0.0),
        );
        assert_stokes(
            stokes_from_jones(&JonesVector::v()).unwrap(),
            (-1.0, 0.0, 0.0),
        );
        assert_stokes(
            stokes_from_jones(&JonesVector::d()).unwrap(),
            (0.0, 1.0, 0.0),
        );
        assert_stokes(
            stokes_from_jones(&JonesVector::a()).unwrap(),
            (0.0, -1.0, 0.0),
        );
        assert_stokes(
            stokes_from_jones(&JonesVector::l()).unwrap(),
            (0.0, 0.0, 1.0),
        );
    }

    #[test]
    fn non_finite_phase_rejected() {
        assert!(matches!(
            jones_from_phase(f64::NAN),
            Err(PolarizationError::NonFinitePhase(_))
        ));
        assert!(jones_from_phase(f64::INFINITY).is_err());
    }

    #[test]
    fn unnormalized_stokes_rejected() {
        let j = JonesVector {
            a_d: Complex64::new(1.0, 0.0),
            a_a: Complex64::new(1.0, 0.0),
        };
        assert!(matches!(
            stokes_from_jones(&j),
            Err(PolarizationError::NotNormalized(_))
        ));
    }

    #[test]
    fn projection_error_examples() {
        let h = JonesVector::h();
        assert_abs_diff_eq!(
            projection_error(&MixedState::pure(h), &h).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            projection_error(&MixedState::pure(JonesVector::v()), &h).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let mix = MixedState::new(vec![(h, 0.5), (JonesVector::v(), 0.5)]).unwrap();
        assert_abs_diff_eq!(projection_error(&mix, &h).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn empty_mixture_rejected() {
        assert_eq!(
            MixedState::new(vec![]).unwrap_err(),
            PolarizationError::EmptyMixture
        );
    }

    #[test]
    fn per_examples() {
        assert_abs_diff_eq!(per_from_error(0.5).unwrap(), 0.0, epsilon = 1e-15);
        let e = error_from_per(18.24).unwrap();
        assert!((0.014..=0.016).contains(&e), "e = {e}");
        // 10^3 = 1000 exactly, so e = 1/1001
        assert_abs_diff_eq!(error_from_per(30.0).unwrap(), 1.0 / 1001.0, epsilon = 1e-15);
        assert_eq!(per_from_error(0.0), Err(PolarizationError::PerInfinite));
        assert_eq!(
            per_from_error(1.0),
            Err(PolarizationError::PerNegativeInfinite)
        );
        assert!(per_from_error(-0.1).is_err());
    }

    #[test]
    fn iqber_examples() {
        let r = CountRecord {
            c_a: 990,
            d_a: 0,
            c_b_perp: 10,
            d_b_perp: 0,
        };
        assert_abs_diff_eq!(iqber(&r).unwrap(), 0.01, epsilon = 1e-15);
        let r = CountRecord {
            c_a: 1000,
            d_a: 100,
            c_b_perp: 109,
            d_b_perp: 100,
        };
        assert_abs_diff_eq!(iqber(&r).unwrap(), 9.0 / 909.0, epsilon = 1e-15);
    }

    #[test]
    fn iqber_bad_denominator_carries_counts() {
        let r = CountRecord {
            c_a: 10,
            d_a: 50,
            c_b_perp: 5,
            d_b_perp: 5,
        };
        match iqber(&r) {
            Err(PolarizationError::IqberDenominator(c, d)) => {
                assert_eq!(c, r);
                assert_eq!(d, -40);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn iqber_tolerates_dark_excess_in_one_channel() {
        // Orthogonal channel below its dark level: negative numerator is
        // reported as-is rather than clamped.
        let r = CountRecord {
            c_a: 1000,
            d_a: 10,
            c_b_perp: 3,
            d_b_perp: 5,
        };
        assert!(iqber(&r).unwrap() < 0.0);
    }

    #[test]
    fn bases_are_mutually_unbiased() {
        let (h, v, l, r) = (
            JonesVector::h(),
            JonesVector::v(),
            JonesVector::l(),
            JonesVector::r(),
        );
        assert_abs_diff_eq!(h.overlap(&v), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.overlap(&r), 0.0, epsilon = 1e-12);
        for a in [h, v] {
            for b in [l, r] {
                assert_abs_diff_eq!(a.overlap(&b), 0.5, epsilon = 1e-12);
            }
        }
    }

    fn arb_jones() -> impl Strategy<Value = JonesVector> {
        (0.0..PI, -PI..PI, -PI..PI).prop_map(|(theta, p1, p2)| JonesVector {
            a_d: Complex64::from_polar((theta / 2.0).cos(), p1),
            a_a: Complex64::from_polar((theta / 2.0).sin(), p2),
        })
    }

    proptest! {
        #[test]
        fn jones_from_phase_is_normalized(phi in -1e3f64..1e3) {
            let j = jones_from_phase(phi).unwrap();
            prop_assert!((j.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((stokes_from_jones(&j).unwrap().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn per_round_trip(e in 1e-6f64..0.5) {
            let back = error_from_per(per_from_error(e).unwrap()).unwrap();
            prop_assert!((back - e).abs() < 1e-10);
        }

        #[test]
        fn complementary_projections(
            states in prop::collection::vec((arb_jones(), 0.01f64..1.0), 1..6),
            target in arb_jones(),
        ) {
            let total: f64 = states.iter().map(|s| s.1).sum();
            let mix = MixedState::new(states.into_iter().map(|(j, w)| (j, w / total)).collect()).unwrap();
            let a = projection_error(&mix, &target).unwrap();
            let b = projection_error(&mix, &target.orthogonal()).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn global_phase_invariance(j in arb_jones(), t in arb_jones(), theta in -10.0f64..10.0) {
            let g = j.with_global_phase(theta);
            let (s, sg) = (stokes_from_jones(&j).unwrap(), stokes_from_jones(&g).unwrap());
            prop_assert!((s.s1 - sg.s1).abs() < 1e-12);
            prop_assert!((s.s2 - sg.s2).abs() < 1e-12);
            prop_assert!((s.s3 - sg.s3).abs() < 1e-12);
            let e = projection_error(&MixedState::pure(j), &t).unwrap();
            let eg = projection_error(&MixedState::pure(g), &t).unwrap();
            prop_assert!((e - eg).abs() < 1e-12);
        }
    }
}
