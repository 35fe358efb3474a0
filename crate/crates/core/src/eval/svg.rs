use alloc::string::String;
use core::fmt::Write as _;

use super::Trajectory;
use crate::gridworld::{Episode, OccupancyGrid, CELL_SIZE_M};

const PX: f64 = 12.0;

/// Draws the map, goal instances, the start marker, the visited positions as
/// a polyline and a cross at every collision.
pub fn render_trajectory_svg(grid: &OccupancyGrid, episode: &Episode, traj: &Trajectory) -> String {
    let (w, h) = (grid.width(), grid.height());
    let scale = PX / CELL_SIZE_M;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w as f64 * PX,
        h as f64 * PX,
        w as f64 * PX,
        h as f64 * PX
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for y in 0..h {
        for x in 0..w {
            if grid.is_occupied(crate::gridworld::Cell::new(x as i32, y as i32)) {
                let _ = writeln!(
                    s,
                    r##"<rect x="{}" y="{}" width="{PX}" height="{PX}" fill="#444444"/>"##,
                    x as f64 * PX,
                    y as f64 * PX
                );
            }
        }
    }
    for c in grid.goals(episode.goal) {
        let _ = writeln!(
            s,
            r##"<rect class="goal" x="{}" y="{}" width="{PX}" height="{PX}" fill="#e0a000"/>"##,
            c.x as f64 * PX,
            c.y as f64 * PX
        );
    }
    let start = &episode.start;
    let _ = writeln!(
        s,
        r##"<circle class="start" cx="{:.2}" cy="{:.2}" r="{:.1}" fill="#20a040"/>"##,
        start.x_m * scale,
        start.y_m * scale,
        PX * 0.4
    );
    if traj.poses.len() > 1 {
        s.push_str(r##"<polyline class="path" fill="none" stroke="#2060d0" stroke-width="2" points=""##);
        for (i, p) in traj.poses.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.2},{:.2}", p.x_m * scale, p.y_m * scale);
        }
        s.push_str("\"/>\n");
    }
    let r = PX * 0.3;
    for (p, _) in traj.poses.iter().zip(&traj.collided).filter(|(_, c)| **c) {
        let (cx, cy) = (p.x_m * scale, p.y_m * scale);
        let _ = writeln!(
            s,
            r##"<path class="collision" d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="#d02020" stroke-width="2"/>"##,
            cx - r,
            cy - r,
            cx + r,
            cy + r,
            cx - r,
            cy + r,
            cx + r,
            cy - r
        );
    }
    s.push_str("</svg>\n");
    s
}
