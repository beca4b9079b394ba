use crate::model::{distance, Action, BoxBounds, Vector};

/// The agent's action set `𝒜`.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    /// Continuous box.
    Box(BoxBounds),
    /// Finite set of actions; the prior must always pick one of them.
    Finite(Vec<Action>),
}

/// `𝒜_h(D_h) = {a : Γ_{h,h} ‖a − center‖ ≤ D_h}` intersected with the action set.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSet {
    pub center: Action,
    /// `D_h`.
    pub allowed: f64,
    /// `Γ_{h,h}`.
    pub weight: f64,
}

impl SafeSet {
    pub fn new(center: Action, allowed: f64, weight: f64) -> Self {
        SafeSet {
            center,
            allowed,
            weight,
        }
    }

    /// `D_h / Γ_{h,h}`.
    pub fn radius(&self) -> f64 {
        if self.weight > 0.0 {
            self.allowed / self.weight
        } else {
            f64::INFINITY
        }
    }

    pub fn admits(&self, a: &[f64]) -> bool {
        self.weight * distance(a, &self.center) <= self.allowed
    }

    /// Euclidean projection of `proposed` onto the safe set within `actions`.
    pub fn project(&self, proposed: &[f64], actions: &ActionSet) -> Action {
        let a = match actions {
            ActionSet::Box(bounds) => self.project_box(proposed, bounds),
            ActionSet::Finite(points) => self.project_finite(proposed, points),
        };
        debug_assert!(self.admits(&a));
        a
    }

    fn project_box(&self, proposed: &[f64], bounds: &BoxBounds) -> Action {
        let c = &self.center;
        debug_assert!(bounds.contains(c), "prior action {c:?} outside the action box");
        if self.admits(proposed) && bounds.contains(proposed) {
            return Vector::from_slice(proposed);
        }
        let r = self.radius();
        let v: Vector = proposed.iter().zip(c.iter()).map(|(p, c)| p - c).collect();
        let n = v.norm();
        if n == 0.0 || r <= 0.0 {
            return c.clone();
        }
        let along = |t: f64| -> Action {
            let raw: Vector = c.iter().zip(v.iter()).map(|(c, v)| c + t * v).collect();
            bounds.clip(&raw)
        };
        // Minimizer over box ∩ ball is clip(c + t v) for the largest t ∈ [0, 1]
        // keeping it inside the ball; the clipped distance is monotone in t.
        let t0 = if n <= r { 1.0 } else { r / n };
        let mut a = along(t0);
        if t0 < 1.0 && !bounds.contains(&c.iter().zip(v.iter()).map(|(c, v)| c + t0 * v).collect::<Vector>()) {
            if distance(&along(1.0), c) <= r {
                a = along(1.0);
            } else {
                let (mut lo, mut hi) = (t0, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if distance(&along(mid), c) <= r {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                a = along(lo);
            }
        }
        self.pull_inside(a)
    }

    /// Rounding can leave `Γ ‖a − c‖` an ulp above `D`; shrink toward the center until admitted.
    fn pull_inside(&self, mut a: Action) -> Action {
        let c = &self.center;
        // The step doubles so it outgrows the ulp of the center.
        let mut step = 4.0 * f64::EPSILON;
        for _ in 0..64 {
            if self.admits(&a) {
                return a;
            }
            for (x, c) in a.iter_mut().zip(c.iter()) {
                *x = c + (*x - c) * (1.0 - step);
            }
            step = (2.0 * step).min(1.0);
        }
        c.clone()
    }

    fn project_finite(&self, proposed: &[f64], points: &[Action]) -> Action {
        let mut best: Option<(f64, f64, &Action)> = None;
        for p in points {
            if !self.admits(p) {
                continue;
            }
            let to_target = distance(p, proposed);
            let to_center = distance(p, &self.center);
            let better = match best {
                None => true,
                Some((bt, bc, _)) => to_target < bt || (to_target == bt && to_center < bc),
            };
            if better {
                best = Some((to_target, to_center, p));
            }
        }
        best.map_or_else(|| self.center.clone(), |(_, _, p)| p.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_box(lo: f64, hi: f64) -> ActionSet {
        ActionSet::Box(BoxBounds::interval(lo, hi).unwrap())
    }

    #[test]
    fn interval_safe_set() {
        let s = SafeSet::new(Vector::scalar(3.0), 2.0, 2.0);
        assert_eq!(s.radius(), 1.0);
        assert!(s.admits(&[2.0]) && s.admits(&[4.0]));
        assert!(!s.admits(&[4.0001]));
    }

    #[test]
    fn zero_budget_is_the_prior() {
        let s = SafeSet::new(Vector::scalar(3.0), 0.0, 2.0);
        assert_eq!(s.project(&[9.0], &scalar_box(0.0, 10.0)).as_slice(), &[3.0]);
    }

    #[test]
    fn boundary_projection() {
        let s = SafeSet::new(Vector::scalar(3.0), 1.0, 1.0);
        assert_eq!(s.project(&[5.0], &scalar_box(0.0, 10.0)).as_slice(), &[4.0]);
        assert_eq!(s.project(&[3.5], &scalar_box(0.0, 10.0)).as_slice(), &[3.5]);
    }

    #[test]
    fn planar_projection_scales_radially() {
        let bounds =
            ActionSet::Box(BoxBounds::new(Vector::from(vec![-10.0, -10.0]), Vector::from(vec![10.0, 10.0])).unwrap());
        let s = SafeSet::new(Vector::from(vec![0.0, 0.0]), 2.5, 1.0);
        let a = s.project(&[3.0, 4.0], &bounds);
        assert!((a[0] - 1.5).abs() < 1e-12 && (a[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn box_face_lets_the_projection_slide() {
        // Center on the lower face; target below and to the right.
        let bounds =
            ActionSet::Box(BoxBounds::new(Vector::from(vec![0.0, 0.0]), Vector::from(vec![10.0, 10.0])).unwrap());
        let s = SafeSet::new(Vector::from(vec![1.0, 0.0]), 1.0, 1.0);
        let a = s.project(&[5.0, -3.0], &bounds);
        assert!((a[0] - 2.0).abs() < 1e-9, "{a:?}");
        assert!(a[1].abs() < 1e-12);
    }

    #[test]
    fn finite_projection_picks_nearest_admitted() {
        let pts: Vec<Action> = [0.0, 1.0, 2.0, 3.0].iter().map(|&x| Vector::scalar(x)).collect();
        let s = SafeSet::new(Vector::scalar(1.0), 1.0, 1.0);
        assert_eq!(s.project(&[3.0], &ActionSet::Finite(pts.clone())).as_slice(), &[2.0]);
        // Tie between 0 and 2 when targeting 1: the center itself wins.
        assert_eq!(s.project(&[1.0], &ActionSet::Finite(pts.clone())).as_slice(), &[1.0]);
        let tight = SafeSet::new(Vector::scalar(1.0), 0.5, 1.0);
        assert_eq!(tight.project(&[3.0], &ActionSet::Finite(pts)).as_slice(), &[1.0]);
    }

    #[test]
    fn boundary_rounding_far_from_origin() {
        let s = SafeSet::new(Vector::scalar(5.501872448519105), 1.131386670228989, 4.197641805900368);
        let a = s.project(&[0.0], &scalar_box(0.0, 5.84506580338989));
        assert!(s.admits(&a));
        assert!((a[0] - (5.501872448519105 - s.radius())).abs() < 1e-12);
    }

    #[test]
    fn admitted_proposal_is_returned_exactly() {
        let s = SafeSet::new(Vector::scalar(-1.9164933722121371), 9.09, 0.01);
        let p = -0.7374274943818845;
        assert_eq!(s.project(&[p], &scalar_box(-1.9164933722121371, 1.6)).as_slice(), &[p]);
    }
}
