use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{point_in_polygon, Vec2, Wall};

/// Room outline, centred on the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomShape {
    Square {
        side: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
    },
    /// Outer rectangle with a rectangular notch removed from its top-right corner.
    LShaped {
        width: f64,
        height: f64,
        notch_width: f64,
        notch_height: f64,
    },
    WithCorridors {
        base: Box<RoomShape>,
        corridors: Vec<Wall>,
    },
}

impl RoomShape {
    /// Outline polygon, counter-clockwise.
    pub fn polygon(&self) -> Vec<Vec2> {
        match self {
            RoomShape::Square { side } => rect(*side, *side),
            RoomShape::Rectangle { width, height } => rect(*width, *height),
            RoomShape::LShaped {
                width,
                height,
                notch_width,
                notch_height,
            } => {
                let (hw, hh) = (width / 2.0, height / 2.0);
                alloc::vec![
                    Vec2::new(-hw, -hh),
                    Vec2::new(hw, -hh),
                    Vec2::new(hw, hh - notch_height),
                    Vec2::new(hw - notch_width, hh - notch_height),
                    Vec2::new(hw - notch_width, hh),
                    Vec2::new(-hw, hh),
                ]
            }
            RoomShape::WithCorridors { base, .. } => base.polygon(),
        }
    }

    /// Boundary walls followed by any interior corridor walls.
    pub fn walls(&self, thickness: f64) -> Vec<Wall> {
        let poly = self.polygon();
        let mut walls: Vec<Wall> = (0..poly.len())
            .map(|i| Wall {
                a: poly[i],
                b: poly[(i + 1) % poly.len()],
                thickness,
            })
            .collect();
        if let RoomShape::WithCorridors { corridors, .. } = self {
            walls.extend(corridors.iter().copied());
        }
        walls
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let poly = self.polygon();
        let mut lo = poly[0];
        let mut hi = poly[0];
        for p in &poly[1..] {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(p, &self.polygon())
    }
}

fn rect(w: f64, h: f64) -> Vec<Vec2> {
    let (hw, hh) = (w / 2.0, h / 2.0);
    alloc::vec![
        Vec2::new(-hw, -hh),
        Vec2::new(hw, -hh),
        Vec2::new(hw, hh),
        Vec2::new(-hw, hh)
    ]
}
