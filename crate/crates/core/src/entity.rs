use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2D, Vec2, Velocity2D};

/// Identifier unique within one episode. The robot is always id 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl EntityId {
    pub const ROBOT: EntityId = EntityId(0);
}

impl core::fmt::Display for EntityId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Robot,
    Human,
    Plant,
    Table,
    Laptop,
}

impl EntityKind {
    pub fn is_object(self) -> bool {
        matches!(
            self,
            EntityKind::Plant | EntityKind::Table | EntityKind::Laptop
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Robot => "robot",
            EntityKind::Human => "human",
            EntityKind::Plant => "plant",
            EntityKind::Table => "table",
            EntityKind::Laptop => "laptop",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub pose: Pose2D,
    pub velocity: Velocity2D,
    pub radius: f64,
}

impl Entity {
    pub fn new(id: EntityId, kind: EntityKind, pose: Pose2D, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Entity {
            id,
            kind,
            pose,
            velocity: Velocity2D::ZERO,
            radius,
        }
    }

    #[inline]
    pub fn position(&self) -> Vec2 {
        self.pose.position()
    }
}
