//! Artificial potential field planner.
//!
//! The total potential is the sum of a quadratic attraction toward the goal
//! and a repulsion from every obstacle closer than the radius of influence
//! `d0`:
//!
//! ```text
//! U   = Ua + Ur
//! Ua  = xi * |p - goal|^2
//! Ur  = sum_i 1/2 * eta * (1/rho_i - 1/d0)^2   if rho_i <= d0, else 0
//! ```
//!
//! Velocity setpoints follow the negative gradient (first-order gradient flow)
//! and are recomputed from scratch on every control tick.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AgentId, AgentState, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApfParams<T> {
    /// Attraction scale.
    pub xi: T,
    /// Repulsion scale.
    pub eta: T,
    /// Radius of influence, meters.
    pub d0: T,
    /// Setpoint velocity per unit gradient, m/s.
    pub step_gain: T,
    /// Setpoint speed clamp, m/s.
    pub v_max: T,
    /// Distance floor used inside the repulsive term, meters.
    pub rho_min: T,
}

impl<T: Real> Default for ApfParams<T> {
    fn default() -> Self {
        Self {
            xi: T::lit(1.0),
            eta: T::lit(0.1),
            d0: T::lit(0.25),
            step_gain: T::lit(30.0),
            v_max: T::lit(2.0),
            rho_min: T::lit(1e-3),
        }
    }
}

impl<T: Real> ApfParams<T> {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("apf.xi > 0", self.xi),
            ("apf.eta > 0", self.eta),
            ("apf.d0 > 0", self.d0),
            ("apf.step_gain > 0", self.step_gain),
            ("apf.v_max > 0", self.v_max),
            ("apf.rho_min > 0", self.rho_min),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                bad.push(name.to_string());
            }
        }
        if self.rho_min >= self.d0 {
            bad.push("apf.rho_min < apf.d0".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(bad))
        }
    }
}

/// Another agent treated as a point obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle<T> {
    pub id: AgentId,
    pub position: Vec3<T>,
}

impl<T: Real> From<&AgentState<T>> for Obstacle<T> {
    fn from(s: &AgentState<T>) -> Self {
        Obstacle {
            id: s.id,
            position: s.position,
        }
    }
}

/// Obstacles in ascending id order so floating point sums are order independent.
fn sorted<T: Real>(obstacles: &[Obstacle<T>]) -> Vec<&Obstacle<T>> {
    let mut v: Vec<_> = obstacles.iter().collect();
    v.sort_by_key(|o| o.id);
    v
}

pub fn attraction_potential<T: Real>(p: Vec3<T>, goal: Vec3<T>, params: &ApfParams<T>) -> T {
    params.xi * (p - goal).norm_squared()
}

fn repulsion_term<T: Real>(p: Vec3<T>, obstacle: Vec3<T>, params: &ApfParams<T>) -> T {
    let d = (p - obstacle).norm();
    if d > params.d0 {
        return T::zero();
    }
    let rho = d.max(params.rho_min);
    let k = rho.recip() - params.d0.recip();
    T::lit(0.5) * params.eta * k * k
}

fn repulsion_gradient_term<T: Real>(p: Vec3<T>, obstacle: Vec3<T>, params: &ApfParams<T>) -> Vec3<T> {
    let delta = p - obstacle;
    let d = delta.norm();
    if d > params.d0 || d == T::zero() {
        // exactly coincident points have no defined push direction
        return Vec3::zero();
    }
    let rho = d.max(params.rho_min);
    let k = rho.recip() - params.d0.recip();
    // dU/drho = -eta * k / rho^2 and drho/dp = delta / d
    delta * (-(params.eta * k) / (rho * rho * d))
}

pub fn repulsive_potential<T: Real>(p: Vec3<T>, obstacles: &[Obstacle<T>], params: &ApfParams<T>) -> T {
    sorted(obstacles)
        .into_iter()
        .fold(T::zero(), |acc, o| acc + repulsion_term(p, o.position, params))
}

pub fn total_potential<T: Real>(
    p: Vec3<T>,
    goal: Vec3<T>,
    obstacles: &[Obstacle<T>],
    params: &ApfParams<T>,
) -> T {
    attraction_potential(p, goal, params) + repulsive_potential(p, obstacles, params)
}

/// Analytic gradient of [`total_potential`] with respect to `p`.
pub fn potential_gradient<T: Real>(
    p: Vec3<T>,
    goal: Vec3<T>,
    obstacles: &[Obstacle<T>],
    params: &ApfParams<T>,
) -> Vec3<T> {
    let attraction = (p - goal) * (T::lit(2.0) * params.xi);
    sorted(obstacles)
        .into_iter()
        .fold(attraction, |acc, o| acc + repulsion_gradient_term(p, o.position, params))
}

/// Velocity setpoint for one agent: `clamp(-step_gain * grad U, v_max)`.
///
/// The agent itself is skipped if it appears in `obstacles`.
pub fn plan_step<T: Real>(
    state: &AgentState<T>,
    goal: Vec3<T>,
    obstacles: &[Obstacle<T>],
    params: &ApfParams<T>,
) -> Vec3<T> {
    let others: Vec<Obstacle<T>> = obstacles.iter().filter(|o| o.id != state.id).copied().collect();
    let grad = potential_gradient(state.position, goal, &others, params);
    (-grad * params.step_gain).clamp_norm(params.v_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(xi: f64, eta: f64, d0: f64) -> ApfParams<f64> {
        ApfParams {
            xi,
            eta,
            d0,
            ..ApfParams::default()
        }
    }

    fn obs(id: u32, x: f64, y: f64, z: f64) -> Obstacle<f64> {
        Obstacle {
            id: AgentId(id),
            position: Vec3::new(x, y, z),
        }
    }

    #[test]
    fn attraction_examples() {
        let o = Vec3::zero();
        assert_eq!(attraction_potential(Vec3::new(1.0, 0.0, 0.0), o, &params(1.0, 1.0, 1.0)), 1.0);
        assert_eq!(attraction_potential(o, o, &params(2.0, 1.0, 1.0)), 0.0);
        assert_eq!(attraction_potential(Vec3::new(1.0, 1.0, 1.0), o, &params(2.0, 1.0, 1.0)), 6.0);
    }

    #[test]
    fn repulsion_examples() {
        let p = params(1.0, 1.0, 1.0);
        let o = Vec3::zero();
        assert_eq!(repulsive_potential(o, &[obs(1, 2.0, 0.0, 0.0)], &p), 0.0);
        assert_eq!(repulsive_potential(o, &[obs(1, 1.0, 0.0, 0.0)], &p), 0.0);
        assert!((repulsive_potential(o, &[obs(1, 0.5, 0.0, 0.0)], &p) - 0.5).abs() < 1e-15);
        assert!(repulsive_potential::<f64>(o, &[], &p) == 0.0);
    }

    #[test]
    fn repulsion_saturates_at_coincidence() {
        let p = params(1.0, 1.0, 1.0);
        let u = repulsive_potential(Vec3::zero(), &[obs(1, 0.0, 0.0, 0.0)], &p);
        assert!(u.is_finite() && u > 0.0);
        let g = potential_gradient(Vec3::zero(), Vec3::zero(), &[obs(1, 0.0, 0.0, 0.0)], &p);
        assert!(g.is_finite());
        // inside rho_min the magnitude is capped but direction is kept
        let g = potential_gradient(Vec3::new(1e-6, 0.0, 0.0), Vec3::new(1e-6, 0.0, 0.0), &[obs(1, 0.0, 0.0, 0.0)], &p);
        assert!(g.x < 0.0 && g.is_finite());
    }

    #[test]
    fn total_examples() {
        let p = params(1.0, 1.0, 1.0);
        let o = Vec3::zero();
        assert_eq!(total_potential::<f64>(o, o, &[], &p), 0.0);
        let q = Vec3::new(0.3, -0.2, 0.9);
        assert_eq!(total_potential::<f64>(q, o, &[], &p), attraction_potential(q, o, &p));
        let u = total_potential(Vec3::new(0.5, 0.0, 0.0), o, &[obs(1, 1.0, 0.0, 0.0)], &p);
        assert!((u - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let p = params(1.0, 1.0, 1.0);
        let o = Vec3::zero();
        assert_eq!(potential_gradient::<f64>(o, o, &[], &p), Vec3::zero());
        assert_eq!(potential_gradient::<f64>(Vec3::new(1.0, 0.0, 0.0), o, &[], &p), Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn plan_step_examples() {
        let p = ApfParams::<f64>::default();
        let goal = Vec3::new(0.0, 0.0, 1.0);
        let s = AgentState::new(AgentId(0), goal);
        assert_eq!(plan_step(&s, goal, &[], &p), Vec3::zero());

        let far = AgentState::new(AgentId(0), Vec3::new(50.0, -20.0, 3.0));
        let v = plan_step(&far, goal, &[], &p);
        assert!((v.norm() - p.v_max).abs() < 1e-12);

        // two agents inside d0 sharing a goal push apart along their separation
        let a = AgentState::new(AgentId(0), Vec3::new(-0.05, 0.0, 1.0));
        let b = AgentState::new(AgentId(1), Vec3::new(0.05, 0.0, 1.0));
        let all = [Obstacle::from(&a), Obstacle::from(&b)];
        let va = plan_step(&a, goal, &all, &p);
        let vb = plan_step(&b, goal, &all, &p);
        let axis = b.position - a.position;
        assert!((vb - va).dot(axis) > 0.0);
        assert!(va.x < 0.0 && vb.x > 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let p = ApfParams::<f32>::default();
        let s = AgentState::new(AgentId(0), Vec3::new(1.0f32, 0.0, 0.0));
        let v = plan_step(&s, Vec3::zero(), &[], &p);
        assert!(v.x < 0.0 && v.norm() <= p.v_max + 1e-6);
    }
}
