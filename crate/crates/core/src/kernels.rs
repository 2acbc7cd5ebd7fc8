//! Radial interaction laws, the anisotropy weight and their potentials.
//!
//! Sign convention: a kernel value multiplies the unit vector pointing from
//! the observer toward the source. Negative values repel, positive attract.

use crate::scalar::Real;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionKernel<T> {
    /// Repulsive inside `r_rep`, attractive on `(r_rep, r_att]`, zero beyond.
    AttractRepel { strength: T, r_rep: T, r_att: T },
    /// Repulsive inside `r_rep`, zero beyond.
    RepelOnly { strength: T, r_rep: T },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("kernel strength must be finite and >= 0, got {0}")]
    Strength(f64),
    #[error("repulsion radius must be finite and > 0, got {0}")]
    RepulsionRadius(f64),
    #[error("attraction radius {r_att} must exceed repulsion radius {r_rep}")]
    RadiusOrder { r_rep: f64, r_att: f64 },
    #[error("anisotropy sigma must lie in [0, 1], got {0}")]
    Sigma(f64),
}

fn f64_of<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

impl<T: Real> InteractionKernel<T> {
    pub fn attract_repel(strength: T, r_rep: T, r_att: T) -> Result<Self, KernelError> {
        check_strength(strength)?;
        check_radius(r_rep)?;
        if !(r_att.is_finite() && r_att > r_rep) {
            return Err(KernelError::RadiusOrder { r_rep: f64_of(r_rep), r_att: f64_of(r_att) });
        }
        Ok(InteractionKernel::AttractRepel { strength, r_rep, r_att })
    }

    pub fn repel_only(strength: T, r_rep: T) -> Result<Self, KernelError> {
        check_strength(strength)?;
        check_radius(r_rep)?;
        Ok(InteractionKernel::RepelOnly { strength, r_rep })
    }

    pub fn strength(&self) -> T {
        match *self {
            InteractionKernel::AttractRepel { strength, .. } | InteractionKernel::RepelOnly { strength, .. } => strength,
        }
    }

    pub fn r_rep(&self) -> T {
        match *self {
            InteractionKernel::AttractRepel { r_rep, .. } | InteractionKernel::RepelOnly { r_rep, .. } => r_rep,
        }
    }

    /// Radius beyond which the kernel (and its potential) vanish.
    pub fn support(&self) -> T {
        match *self {
            InteractionKernel::AttractRepel { r_att, .. } => r_att,
            InteractionKernel::RepelOnly { r_rep, .. } => r_rep,
        }
    }

    /// Kernel value at distance `s > 0`.
    #[inline]
    pub fn eval(&self, s: T) -> T {
        debug_assert!(s > T::zero(), "kernel evaluated at non-positive distance");
        match *self {
            InteractionKernel::RepelOnly { strength, r_rep } => {
                if s <= r_rep {
                    strength * (T::one() - r_rep / s)
                } else {
                    T::zero()
                }
            }
            InteractionKernel::AttractRepel { strength, r_rep, r_att } => {
                if s <= r_rep {
                    strength * (T::one() - r_rep / s)
                } else if s <= r_att {
                    -strength / (r_rep * (r_att - r_rep)) * (s - r_rep) * (s - r_att)
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Radial potential `W` with `W' = -f`, normalized to vanish outside the
    /// support and continuous everywhere on `(0, inf)`.
    pub fn potential(&self, s: T) -> T {
        assert!(s > T::zero(), "potential evaluated at non-positive distance");
        match *self {
            InteractionKernel::RepelOnly { strength, r_rep } => {
                if s >= r_rep {
                    T::zero()
                } else {
                    repulsive_branch(strength, r_rep, s)
                }
            }
            InteractionKernel::AttractRepel { strength, r_rep, r_att } => {
                let gap = r_att - r_rep;
                let c = strength / (r_rep * gap);
                if s >= r_att {
                    T::zero()
                } else if s > r_rep {
                    // integral of c (u - r_rep)(u - r_att) from r_att to s
                    let t = s - r_att;
                    c * (t * t * t / T::lit(3.0) + gap * t * t / T::two())
                } else {
                    let at_r_rep = strength * gap * gap / (T::lit(6.0) * r_rep);
                    repulsive_branch(strength, r_rep, s) + at_r_rep
                }
            }
        }
    }
}

/// `-F * ((s - R) - R ln(s / R))`, zero at `s = R`.
#[inline]
fn repulsive_branch<T: Real>(strength: T, r_rep: T, s: T) -> T {
    -strength * ((s - r_rep) - r_rep * (s / r_rep).ln())
}

fn check_strength<T: Real>(f: T) -> Result<(), KernelError> {
    if f.is_finite() && f >= T::zero() {
        Ok(())
    } else {
        Err(KernelError::Strength(f64_of(f)))
    }
}

fn check_radius<T: Real>(r: T) -> Result<(), KernelError> {
    if r.is_finite() && r > T::zero() {
        Ok(())
    } else {
        Err(KernelError::RepulsionRadius(f64_of(r)))
    }
}

/// Perception weight `g = sigma + (1 - sigma)(1 + cos theta)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anisotropy<T> {
    sigma: T,
}

impl<T: Real> Anisotropy<T> {
    pub fn new(sigma: T) -> Result<Self, KernelError> {
        if sigma >= T::zero() && sigma <= T::one() {
            Ok(Anisotropy { sigma })
        } else {
            Err(KernelError::Sigma(f64_of(sigma)))
        }
    }

    pub fn isotropic() -> Self {
        Anisotropy { sigma: T::one() }
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn is_isotropic(&self) -> bool {
        self.sigma == T::one()
    }

    #[inline]
    pub fn eval(&self, cos_theta: T) -> T {
        let c = cos_theta.max(-T::one()).min(T::one());
        self.sigma + (T::one() - self.sigma) * (T::one() + c) * T::half()
    }

    /// Weight seen by an observer at `x` moving along `v_des` for a source at
    /// `y`. A zero desired velocity means no preferred direction: weight 1.
    #[inline]
    pub fn weight(&self, x: Vec2<T>, y: Vec2<T>, v_des: Vec2<T>) -> T {
        if self.is_isotropic() {
            return T::one();
        }
        match cos_angle(x, y, v_des) {
            Some(c) => self.eval(c),
            None => T::one(),
        }
    }
}

/// Cosine of the angle between `y - x` and `v_des`; `None` when `v_des`
/// vanishes.
///
/// Panics if `x == y`.
#[inline]
pub fn cos_angle<T: Real>(x: Vec2<T>, y: Vec2<T>, v_des: Vec2<T>) -> Option<T> {
    let d = y - x;
    let dn = d.norm();
    assert!(dn > T::zero(), "cos_angle with coincident points");
    let vn = v_des.norm();
    if vn == T::zero() {
        return None;
    }
    let c = d.dot(v_des) / (dn * vn);
    Some(c.max(-T::one()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn kernel_examples() {
        let r = InteractionKernel::<f64>::repel_only(0.03, 4.0).unwrap();
        assert_eq!(r.eval(4.0), 0.0);
        assert!(close(r.eval(2.0), -0.03, 1e-15));
        assert_eq!(r.eval(7.0), 0.0);

        let ar = InteractionKernel::<f64>::attract_repel(0.03, 1.5, 3.0).unwrap();
        assert!(close(ar.eval(2.25), 0.0075, 1e-14));
        assert_eq!(ar.eval(5.0), 0.0);
        assert!(ar.eval(1.0) < 0.0);
    }

    #[test]
    fn kernel_validation() {
        assert!(InteractionKernel::attract_repel(0.03, 3.0, 3.0).is_err());
        assert!(InteractionKernel::attract_repel(0.03, 3.0, 1.5).is_err());
        assert!(InteractionKernel::repel_only(-1.0, 4.0).is_err());
        assert!(InteractionKernel::repel_only(1.0, 0.0).is_err());
        assert!(Anisotropy::new(1.2).is_err());
        assert!(Anisotropy::new(-0.1).is_err());
    }

    #[test]
    fn ar_kernel_smooth_at_r_rep() {
        let ar = InteractionKernel::<f64>::attract_repel(0.03, 1.5, 3.0).unwrap();
        let eps = 1e-7;
        let left = (ar.eval(1.5) - ar.eval(1.5 - eps)) / eps;
        let right = (ar.eval(1.5 + eps) - ar.eval(1.5)) / eps;
        assert!((left - right).abs() < 1e-6, "{left} vs {right}");
        assert!(ar.eval(1.5).abs() < 1e-15);
    }

    #[test]
    fn anisotropy_examples() {
        for s in [0.0, 0.3, 0.5, 1.0] {
            let a = Anisotropy::new(s).unwrap();
            assert_eq!(a.eval(1.0), 1.0);
            assert!(close(a.eval(-1.0), s, 1e-15));
        }
        assert_eq!(Anisotropy::new(0.5).unwrap().eval(0.0), 0.75);
        // overshoot is clamped
        assert_eq!(Anisotropy::new(0.5).unwrap().eval(1.0 + 1e-12), 1.0);
    }

    #[test]
    fn cosine_cases() {
        let x = Vec2::new(1.0, 1.0);
        let v = Vec2::new(1.34, 0.0);
        assert_eq!(cos_angle(x, Vec2::new(3.0, 1.0), v), Some(1.0));
        assert_eq!(cos_angle(x, Vec2::new(1.0, 4.0), v), Some(0.0));
        assert_eq!(cos_angle(x, Vec2::new(-2.0, 1.0), v), Some(-1.0));
        assert_eq!(cos_angle(x, Vec2::new(-2.0, 1.0), Vec2::zero()), None);
        let a = Anisotropy::new(0.2).unwrap();
        assert_eq!(a.weight(x, Vec2::new(-2.0, 1.0), Vec2::zero()), 1.0);
    }

    #[test]
    #[should_panic]
    fn cosine_rejects_coincident_points() {
        let p = Vec2::new(1.0, 1.0);
        cos_angle(p, p, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn potential_normalization_and_limits() {
        let r = InteractionKernel::<f64>::repel_only(0.03, 4.0).unwrap();
        assert_eq!(r.potential(4.0), 0.0);
        assert_eq!(r.potential(9.0), 0.0);
        // repulsive potential is increasing toward R_r, so it diverges to -inf at 0
        assert!(r.potential(1e-8) < r.potential(1e-4));
        assert!(r.potential(1e-300) < -20.0);

        let ar = InteractionKernel::<f64>::attract_repel(0.03, 1.5, 3.0).unwrap();
        assert_eq!(ar.potential(3.0), 0.0);
        let eps = 1e-9;
        for b in [1.5, 3.0] {
            assert!((ar.potential(b - eps) - ar.potential(b + eps)).abs() < 1e-9);
        }
    }

    #[test]
    fn potential_derivative_matches_kernel() {
        let eps = 1e-5;
        for k in [
            InteractionKernel::<f64>::repel_only(0.03, 4.0).unwrap(),
            InteractionKernel::attract_repel(0.03, 1.5, 3.0).unwrap(),
            InteractionKernel::attract_repel(1.0, 4.0, 6.0).unwrap(),
        ] {
            let s = 2.0;
            let fd = (k.potential(s + eps) - k.potential(s - eps)) / (2.0 * eps);
            assert!((fd + k.eval(s)).abs() < 1e-9, "{k:?}: {fd} vs {}", -k.eval(s));
        }
    }
}
