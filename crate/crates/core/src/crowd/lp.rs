// Incremental 2D linear programs over half-planes, following the structure of
// the RVO2 library's linearProgram1/2/3 (Apache-2.0, UNC Chapel Hill).

use alloc::vec::Vec;

use crate::geometry::Vec2;

const EPSILON: f64 = 1e-9;

/// A directed line; the feasible half-plane lies to the left of `direction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub point: Vec2,
    /// Unit direction.
    pub direction: Vec2,
}

impl Line {
    /// Signed violation of `v`; positive when `v` is outside the half-plane.
    #[inline]
    pub fn violation(&self, v: Vec2) -> f64 {
        self.direction.det(self.point - v)
    }

    #[inline]
    pub fn contains(&self, v: Vec2) -> bool {
        self.violation(v) <= 0.0
    }
}

/// Velocity closest to `preferred` inside the disc of radius `max_speed` and
/// all half-planes. The first `hard_lines` lines are never relaxed; when the
/// soft constraints cannot all hold, the result minimises the largest
/// violation among them.
pub fn solve(lines: &[Line], hard_lines: usize, max_speed: f64, preferred: Vec2) -> Vec2 {
    let mut result = Vec2::ZERO;
    let failed = program2(lines, max_speed, preferred, false, &mut result);
    if failed < lines.len() {
        program3(lines, hard_lines, failed, max_speed, &mut result);
    }
    result
}

/// Optimises along line `line_no` subject to lines `0..line_no` and the disc.
fn program1(
    lines: &[Line],
    line_no: usize,
    radius: f64,
    opt: Vec2,
    direct: bool,
    result: &mut Vec2,
) -> bool {
    let line = lines[line_no];
    let dot = line.point.dot(line.direction);
    let disc = dot * dot + radius * radius - line.point.length_squared();
    if disc < 0.0 {
        return false;
    }
    let sqrt_disc = libm::sqrt(disc);
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &lines[..line_no] {
        let denom = line.direction.det(other.direction);
        let numer = other.direction.det(line.point - other.point);
        if denom.abs() <= EPSILON {
            // Parallel lines.
            if numer < 0.0 {
                return false;
            }
            continue;
        }
        let t = numer / denom;
        if denom >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    *result = if direct {
        if opt.dot(line.direction) > 0.0 {
            line.point + line.direction * t_right
        } else {
            line.point + line.direction * t_left
        }
    } else {
        let t = line.direction.dot(opt - line.point);
        line.point + line.direction * t.clamp(t_left, t_right)
    };
    true
}

/// Returns the index of the first line that could not be satisfied, or
/// `lines.len()` on success.
fn program2(lines: &[Line], radius: f64, opt: Vec2, direct: bool, result: &mut Vec2) -> usize {
    *result = if direct {
        opt * radius
    } else if opt.length_squared() > radius * radius {
        opt.normalize_or_zero() * radius
    } else {
        opt
    };
    for i in 0..lines.len() {
        if lines[i].violation(*result) > 0.0 {
            let previous = *result;
            if !program1(lines, i, radius, opt, direct, result) {
                *result = previous;
                return i;
            }
        }
    }
    lines.len()
}

fn program3(lines: &[Line], hard_lines: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    let mut projected: Vec<Line> = Vec::with_capacity(lines.len());
    for i in begin..lines.len() {
        if lines[i].violation(*result) <= distance {
            continue;
        }
        projected.clear();
        projected.extend_from_slice(&lines[..hard_lines]);
        for j in hard_lines..i {
            let det = lines[i].direction.det(lines[j].direction);
            let point = if det.abs() <= EPSILON {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    // Same direction: j adds nothing beyond i.
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction
                        * (lines[j].direction.det(lines[i].point - lines[j].point) / det)
            };
            let direction = (lines[j].direction - lines[i].direction).normalize_or_zero();
            projected.push(Line { point, direction });
        }
        let previous = *result;
        let opt = lines[i].direction.perp();
        if program2(&projected, radius, opt, true, result) < projected.len() {
            // Should not happen in theory; keep the previous answer.
            *result = previous;
        }
        distance = lines[i].violation(*result);
    }
}
