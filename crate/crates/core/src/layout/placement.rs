//! Greedy wall-first furniture placement.
//!
//! Items go largest-first. Each is anchored against the free wall segment
//! (wall minus openings and their clearance) with the most remaining length,
//! packed along the wall in counter-clockwise order starting from the north
//! wall. Items that fit on no wall are dropped onto a 0.5 m interior grid,
//! scanned row by row. Anything still homeless is reported as unplaceable.

use serde::{Deserialize, Serialize};

use super::footprint::{Footprint, FootprintTable};
use crate::model::{normalize_label, DesignRequest, FurnitureSelection, OpeningKind, Wall, Warning};

/// Gap kept between furniture and any opening along the wall.
pub const OPENING_CLEARANCE_M: f64 = 0.1;
/// Interior fallback grid pitch.
pub const INTERIOR_GRID_M: f64 = 0.5;

const EPS: f64 = 1e-9;

/// One furniture footprint on the floor plan. Coordinates are meters from the
/// north-west corner, `x` eastward and `y` southward; `w_m`/`d_m` are the
/// extents along `x` and `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub asset_id: String,
    pub category: String,
    pub x_m: f64,
    pub y_m: f64,
    pub w_m: f64,
    pub d_m: f64,
    pub wall_anchor: Option<Wall>,
}

impl Placement {
    pub fn rect(&self) -> Rect {
        Rect { x: self.x_m, y: self.y_m, w: self.w_m, h: self.d_m }
    }
}

/// Axis-aligned rectangle in room meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix > 0.0 && iy > 0.0 {
            ix * iy
        } else {
            0.0
        }
    }

    pub fn inside_room(&self, width_m: f64, depth_m: f64) -> bool {
        self.x >= -EPS && self.y >= -EPS && self.x + self.w <= width_m + EPS && self.y + self.h <= depth_m + EPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnplaceableItem {
    pub asset_id: String,
    pub category: String,
    pub footprint: Footprint,
    pub reason: String,
}

/// Result of placement: what was placed, what could not be, and warnings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlacementReport {
    pub placements: Vec<Placement>,
    pub unplaceable: Vec<UnplaceableItem>,
    pub warnings: Vec<Warning>,
}

/// Rectangle hugging `wall`, starting `along_m` from the wall's start corner.
fn wall_rect(wall: Wall, along_m: f64, fp: Footprint, room_w: f64, room_d: f64) -> Rect {
    let (w, d) = (fp.width_m, fp.depth_m);
    match wall {
        Wall::North => Rect { x: along_m, y: 0.0, w, h: d },
        Wall::East => Rect { x: room_w - d, y: along_m, w: d, h: w },
        Wall::South => Rect { x: room_w - along_m - w, y: room_d - d, w, h: d },
        Wall::West => Rect { x: 0.0, y: room_d - along_m - w, w: d, h: w },
    }
}

/// Where a rectangle ends when projected onto `wall`'s running direction.
fn far_end_along(wall: Wall, r: &Rect, room_w: f64, room_d: f64) -> f64 {
    match wall {
        Wall::North => r.x + r.w,
        Wall::East => r.y + r.h,
        Wall::South => room_w - r.x,
        Wall::West => room_d - r.y,
    }
}

/// Keep-out area in front of each opening: the opening span widened by the
/// clearance on both sides; doors keep their swing depth clear, windows
/// only the clearance strip.
pub fn opening_keep_out(request: &DesignRequest) -> Vec<Rect> {
    let (rw, rd) = (request.room_width_m, request.room_depth_m);
    request
        .openings
        .iter()
        .map(|o| {
            let len = request.wall_length_m(o.wall);
            let start = (o.offset_m - OPENING_CLEARANCE_M).max(0.0);
            let end = (o.offset_m + o.width_m + OPENING_CLEARANCE_M).min(len);
            let perpendicular = match o.wall {
                Wall::North | Wall::South => rd,
                Wall::East | Wall::West => rw,
            };
            let depth = match o.kind {
                OpeningKind::Door => o.width_m,
                OpeningKind::Window => OPENING_CLEARANCE_M,
            }
            .min(perpendicular);
            wall_rect(o.wall, start, Footprint::new(end - start, depth), rw, rd)
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Segment {
    wall: Wall,
    end: f64,
    cursor: f64,
}

fn free_segments(request: &DesignRequest) -> Vec<Segment> {
    let mut out = Vec::new();
    for wall in Wall::CCW {
        let len = request.wall_length_m(wall);
        let mut blocked: Vec<(f64, f64)> = request
            .openings
            .iter()
            .filter(|o| o.wall == wall)
            .map(|o| {
                ((o.offset_m - OPENING_CLEARANCE_M).max(0.0), (o.offset_m + o.width_m + OPENING_CLEARANCE_M).min(len))
            })
            .collect();
        blocked.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut start = 0.0;
        for (b0, b1) in blocked {
            if b0 > start + EPS {
                out.push(Segment { wall, end: b0, cursor: start });
            }
            start = f64::max(start, b1);
        }
        if len > start + EPS {
            out.push(Segment { wall, end: len, cursor: start });
        }
    }
    out
}

struct Item {
    asset_id: String,
    category: String,
    footprint: Footprint,
}

/// Lay out every picked asset for the request.
pub fn place_furniture(
    request: &DesignRequest,
    selection: &FurnitureSelection,
    footprints: &FootprintTable,
) -> PlacementReport {
    let (rw, rd) = (request.room_width_m, request.room_depth_m);
    let mut report = PlacementReport::default();

    let mut items = Vec::new();
    for (category, picks) in &selection.picks {
        let (footprint, warning) = footprints.default_footprint(category);
        report.warnings.extend(warning);
        for pick in picks {
            items.push(Item { asset_id: pick.asset_id.clone(), category: normalize_label(category), footprint });
        }
    }
    items.sort_by(|a, b| {
        b.footprint
            .area()
            .total_cmp(&a.footprint.area())
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.asset_id.cmp(&b.asset_id))
    });

    let keep_out = opening_keep_out(request);
    let mut segments = free_segments(request);
    let mut taken: Vec<Rect> = Vec::new();

    let fits = |r: &Rect, taken: &[Rect]| {
        r.w > 0.0
            && r.h > 0.0
            && r.inside_room(rw, rd)
            && taken.iter().chain(keep_out.iter()).all(|t| t.intersection_area(r) <= EPS)
    };

    for item in items {
        let fp = item.footprint;
        // (segment index, along position, rect) of the best wall slot.
        let mut best: Option<(usize, f64, Rect)> = None;
        for (si, seg) in segments.iter().enumerate() {
            if seg.end - seg.cursor < fp.width_m - EPS {
                continue;
            }
            let mut starts: Vec<f64> = std::iter::once(seg.cursor)
                .chain(taken.iter().chain(keep_out.iter()).map(|r| far_end_along(seg.wall, r, rw, rd)))
                .filter(|s| *s >= seg.cursor - EPS && *s + fp.width_m <= seg.end + EPS)
                .collect();
            starts.sort_by(f64::total_cmp);
            let slot = starts.into_iter().find_map(|s| {
                let r = wall_rect(seg.wall, s, fp, rw, rd);
                fits(&r, &taken).then_some((s, r))
            });
            if let Some((s, r)) = slot {
                let remaining = seg.end - seg.cursor;
                let better = match &best {
                    None => true,
                    Some((bi, _, _)) => remaining > segments[*bi].end - segments[*bi].cursor + EPS,
                };
                if better {
                    best = Some((si, s, r));
                }
            }
        }
        if let Some((si, s, r)) = best {
            segments[si].cursor = s + fp.width_m;
            taken.push(r);
            report.placements.push(Placement {
                asset_id: item.asset_id,
                category: item.category,
                x_m: r.x,
                y_m: r.y,
                w_m: r.w,
                d_m: r.h,
                wall_anchor: Some(segments[si].wall),
            });
            continue;
        }

        let interior = interior_slot(fp, rw, rd, |r| fits(r, &taken));
        match interior {
            Some(r) => {
                taken.push(r);
                report.placements.push(Placement {
                    asset_id: item.asset_id,
                    category: item.category,
                    x_m: r.x,
                    y_m: r.y,
                    w_m: r.w,
                    d_m: r.h,
                    wall_anchor: None,
                });
            }
            None => {
                let reason = if fp.width_m > rw + EPS || fp.depth_m > rd + EPS {
                    "footprint larger than the room".to_string()
                } else {
                    "no free wall segment or interior grid cell".to_string()
                };
                report.warnings.push(Warning::new("unplaceable", &item.asset_id, reason.clone()));
                report.unplaceable.push(UnplaceableItem {
                    asset_id: item.asset_id,
                    category: item.category,
                    footprint: fp,
                    reason,
                });
            }
        }
    }
    report
}

fn interior_slot(fp: Footprint, rw: f64, rd: f64, fits: impl Fn(&Rect) -> bool) -> Option<Rect> {
    let mut j = 0u32;
    loop {
        let y = f64::from(j) * INTERIOR_GRID_M;
        if y + fp.depth_m > rd + EPS {
            return None;
        }
        let mut i = 0u32;
        loop {
            let x = f64::from(i) * INTERIOR_GRID_M;
            if x + fp.width_m > rw + EPS {
                break;
            }
            let r = Rect { x, y, w: fp.width_m, h: fp.depth_m };
            if fits(&r) {
                return Some(r);
            }
            i += 1;
        }
        j += 1;
    }
}

/// Check placements against the room: containment, pairwise disjointness and
/// opening clearance.
pub fn check_placements(request: &DesignRequest, placements: &[Placement]) -> Result<(), String> {
    let keep_out = opening_keep_out(request);
    for (i, p) in placements.iter().enumerate() {
        let r = p.rect();
        if !(r.w > 0.0 && r.h > 0.0) {
            return Err(format!("{} has a degenerate footprint", p.asset_id));
        }
        if !r.inside_room(request.room_width_m, request.room_depth_m) {
            return Err(format!("{} extends outside the room", p.asset_id));
        }
        if let Some(q) = placements[..i].iter().find(|q| q.rect().intersection_area(&r) > EPS) {
            return Err(format!("{} overlaps {}", p.asset_id, q.asset_id));
        }
        if keep_out.iter().any(|k| k.intersection_area(&r) > EPS) {
            return Err(format!("{} blocks an opening", p.asset_id));
        }
    }
    Ok(())
}
