//! Delta formation: fixed per-agent slots in the pad frame.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{horizontal_distance, AgentId, AgentState, Pose2D, Vec3};
use crate::scalar::Real;

/// One slot of the formation, offset in the pad frame (x forward, y left).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slot<T> {
    pub id: AgentId,
    pub offset: [T; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSpec<T> {
    /// Agent that carries the camera; its slot sits at the pad origin.
    pub leader: AgentId,
    pub slots: Vec<Slot<T>>,
}

impl<T: Real> FormationSpec<T> {
    /// Leader at the pad center, followers `spacing` meters to its left and right.
    pub fn delta(leader: AgentId, left: AgentId, right: AgentId, spacing: T) -> Self {
        Self {
            leader,
            slots: vec![
                Slot { id: leader, offset: [T::zero(), T::zero()] },
                Slot { id: left, offset: [T::zero(), spacing] },
                Slot { id: right, offset: [T::zero(), -spacing] },
            ],
        }
    }

    pub fn offset_of(&self, id: AgentId) -> Option<[T; 2]> {
        self.slots.iter().find(|s| s.id == id).map(|s| s.offset)
    }

    pub fn ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.slots.iter().map(|s| s.id)
    }

    /// Checks slot ids and offsets are distinct, the leader slot is the origin
    /// and slots are further apart than two collision radii.
    pub fn validate(&self, collision_radius: T) -> Result<()> {
        let mut bad = Vec::new();
        match self.offset_of(self.leader) {
            None => bad.push(format!("formation has no slot for leader {}", self.leader)),
            Some(o) if o != [T::zero(), T::zero()] => {
                bad.push("leader slot must be at the pad origin".to_string())
            }
            _ => {}
        }
        for (i, a) in self.slots.iter().enumerate() {
            if !(a.offset[0].is_finite() && a.offset[1].is_finite()) {
                bad.push(format!("slot {} offset not finite", a.id));
            }
            for b in &self.slots[i + 1..] {
                if a.id == b.id {
                    bad.push(format!("duplicate slot id {}", a.id));
                }
                let d = (a.offset[0] - b.offset[0]).hypot(a.offset[1] - b.offset[1]);
                if !(d > T::lit(2.0) * collision_radius) {
                    bad.push(format!(
                        "slots {} and {} are {} m apart, need > 2*collision_radius = {}",
                        a.id,
                        b.id,
                        d,
                        T::lit(2.0) * collision_radius
                    ));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidFormation(bad.join("; ")))
        }
    }
}

impl Default for FormationSpec<f64> {
    fn default() -> Self {
        FormationSpec::delta(AgentId(0), AgentId(1), AgentId(2), 0.30)
    }
}

/// World-frame target for every slot: offsets rotated by the pad yaw,
/// translated to the pad position, at absolute height `altitude`.
pub fn slot_targets<T: Real>(
    pad_pose: &Pose2D<T>,
    spec: &FormationSpec<T>,
    altitude: T,
) -> BTreeMap<AgentId, Vec3<T>> {
    spec.slots
        .iter()
        .map(|s| {
            let [x, y] = pad_pose.transform_point(s.offset);
            (s.id, Vec3::new(x, y, altitude))
        })
        .collect()
}

/// Largest horizontal distance between an agent and its target.
pub fn formation_error<T: Real>(
    states: &[AgentState<T>],
    targets: &BTreeMap<AgentId, Vec3<T>>,
) -> Result<T> {
    states.iter().try_fold(T::zero(), |worst, s| {
        let t = targets.get(&s.id).ok_or(Error::MissingTarget(s.id))?;
        Ok(worst.max(horizontal_distance(s.position, *t)))
    })
}
