//! SVG figures of scenes, cone potentials and witnesses.
//!
//! The viewBox is the scene window; world `y` points up, so every layer sits
//! in a group flipped about the window's horizontal midline.

use std::fmt::Write as _;

use crate::certify::{NonDcWitness, PsiField, WitnessSide};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::sets::{PlacedSSet, RealizedSet, Scene};

/// Grid resolution of the level-set sampler along the longer window side.
pub const LEVEL_GRID: usize = 160;
pub const LEVEL_COUNT: usize = 9;

/// Optional overlays.
#[derive(Clone, Copy, Debug, Default)]
pub struct Layers<'a> {
    /// Cone potentials and `Ψ` level sets, in the frame of the placed (s)-set.
    pub psi: Option<(&'a PsiField, &'a PlacedSSet)>,
    pub witnesses: Option<&'a NonDcWitness>,
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn stroke(&self) -> f64 {
        self.w.max(self.h) / 400.0
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn place(s: &PlacedSSet, p: [f64; 2]) -> [f64; 2] {
    let (c, sn) = (s.rotation.cos().to_f64_lossy(), s.rotation.sin().to_f64_lossy());
    let o = s.offset.to_f64();
    [c * p[0] - sn * p[1] + o[0], sn * p[0] + c * p[1] + o[1]]
}

fn unplace(s: &PlacedSSet, p: [f64; 2]) -> [f64; 2] {
    let (c, sn) = (s.rotation.cos().to_f64_lossy(), s.rotation.sin().to_f64_lossy());
    let o = s.offset.to_f64();
    let (x, y) = (p[0] - o[0], p[1] - o[1]);
    [c * x + sn * y, -sn * x + c * y]
}

fn line(out: &mut String, a: [f64; 2], b: [f64; 2]) {
    let _ = write!(out, "M{} {}L{} {}", num(a[0]), num(a[1]), num(b[0]), num(b[1]));
}

fn fills(out: &mut String, m: &RealizedSet, f: &Frame) {
    if m.fill_signatures.is_empty() {
        return;
    }
    let arr = &m.arrangement;
    for sig in &m.fill_signatures {
        let mut d = String::new();
        if sig.is_empty() {
            let _ = write!(d, "M{} {}h{}v{}h{}Z", num(f.x0), num(f.y0), num(f.w), num(f.h), num(-f.w));
        }
        for (c, cyc) in arr.cycles.iter().enumerate() {
            let h0 = cyc.half_edges[0];
            if arr.cycle_of(h0) != c || &arr.side_signature(h0) != sig {
                continue;
            }
            for (k, &h) in cyc.half_edges.iter().enumerate() {
                let [x, y] = arr.vertices[arr.origin(h)].to_f64();
                let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { "L" }, num(x), num(y));
            }
            d.push('Z');
        }
        let _ = writeln!(out, r##"    <path d="{d}" fill="#c8d7ea" fill-rule="evenodd" stroke="none"/>"##);
    }
}

fn skeleton(out: &mut String, m: &RealizedSet, f: &Frame) {
    let arr = &m.arrangement;
    let mut d = String::new();
    for e in &arr.edges {
        line(&mut d, arr.vertices[e.a].to_f64(), arr.vertices[e.b].to_f64());
    }
    if !d.is_empty() {
        let _ = writeln!(out, r##"    <path d="{d}" fill="none" stroke="#1b2a41" stroke-width="{}"/>"##, num(1.5 * f.stroke()));
    }
    for p in &m.points {
        let [x, y] = p.to_f64();
        let _ = writeln!(out, r##"    <circle cx="{}" cy="{}" r="{}" fill="#1b2a41"/>"##, num(x), num(y), num(2.0 * f.stroke()));
    }
}

fn cones(out: &mut String, psi: &PsiField, placed: &PlacedSSet, f: &Frame) {
    let len = 2.0 * psi.grid.step.to_f64_lossy();
    let mut d = String::new();
    for pot in &psi.potentials {
        let v = pot.vertex.to_f64();
        for r in &pot.rays {
            let [rx, ry] = r.to_f64();
            let n = rx.hypot(ry);
            let tip = [v[0] + len * rx / n, v[1] + len * ry / n];
            line(&mut d, place(placed, v), place(placed, tip));
        }
    }
    if !d.is_empty() {
        let _ = writeln!(out, r##"    <path d="{d}" fill="none" stroke="#d1495b" stroke-width="{}" opacity="0.7"/>"##, num(f.stroke()));
    }
}

/// Marching squares over `values` on an `nx × ny` vertex grid.
fn contour(values: &[f64], nx: usize, ny: usize, level: f64, at: impl Fn(f64, f64) -> [f64; 2]) -> Vec<([f64; 2], [f64; 2])> {
    let v = |i: usize, j: usize| values[j * nx + i];
    let mut segs = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            if c.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let corners = [(i as f64, j as f64), (i as f64 + 1.0, j as f64), (i as f64 + 1.0, j as f64 + 1.0), (i as f64, j as f64 + 1.0)];
            let cross = |k: usize| {
                let (a, b) = (k, (k + 1) % 4);
                let t = (level - c[a]) / (c[b] - c[a]);
                let (xa, ya) = corners[a];
                let (xb, yb) = corners[b];
                at(xa + t * (xb - xa), ya + t * (yb - ya))
            };
            let above: Vec<bool> = c.iter().map(|&x| x >= level).collect();
            let edges: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            match edges.len() {
                2 => segs.push((cross(edges[0]), cross(edges[1]))),
                4 => {
                    // saddle: resolve by the cell average
                    let centre_above = c.iter().sum::<f64>() / 4.0 >= level;
                    if centre_above == above[0] {
                        segs.push((cross(0), cross(3)));
                        segs.push((cross(1), cross(2)));
                    } else {
                        segs.push((cross(0), cross(1)));
                        segs.push((cross(2), cross(3)));
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

fn level_sets(out: &mut String, psi: &PsiField, placed: &PlacedSSet, f: &Frame) {
    let (nx, ny) = if f.w >= f.h {
        (LEVEL_GRID, ((LEVEL_GRID as f64 * f.h / f.w).ceil() as usize).max(2))
    } else {
        (((LEVEL_GRID as f64 * f.w / f.h).ceil() as usize).max(2), LEVEL_GRID)
    };
    let world = |i: f64, j: f64| [f.x0 + f.w * i / (nx - 1) as f64, f.y0 + f.h * j / (ny - 1) as f64];
    let values: Vec<f64> =
        (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| psi.eval(unplace(placed, world(i as f64, j as f64)))).collect();
    let (lo, hi) = values.iter().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return;
    }
    for k in 1..=LEVEL_COUNT {
        let level = lo + (hi - lo) * k as f64 / (LEVEL_COUNT + 1) as f64;
        let mut d = String::new();
        for (a, b) in contour(&values, nx, ny, level, world) {
            line(&mut d, a, b);
        }
        if !d.is_empty() {
            let _ = writeln!(
                out,
                r##"    <path d="{d}" fill="none" stroke="#00798c" stroke-width="{}" opacity="0.6" data-level="{}"/>"##,
                num(0.6 * f.stroke()),
                num(level)
            );
        }
    }
}

fn witness_cones(out: &mut String, w: &NonDcWitness, f: &Frame) {
    let u3 = 3.0 * w.u.to_f64_lossy();
    for wit in &w.witnesses {
        let [px, py] = wit.point.to_f64();
        let s = match wit.side {
            WitnessSide::Forward => 1.0,
            WitnessSide::Backward => -1.0,
        };
        let len = wit.rho.to_f64_lossy();
        let _ = writeln!(
            out,
            r##"    <path d="M{} {}L{} {}L{} {}Z" fill="#edae49" fill-opacity="0.35" stroke="#edae49" stroke-width="{}"/>"##,
            num(px),
            num(py),
            num(px + s * len),
            num(py + u3 * len),
            num(px + s * len),
            num(py - u3 * len),
            num(0.6 * f.stroke())
        );
    }
    let z = w.z.to_f64();
    let o = w.orientation as f64;
    let mut d = String::new();
    for (k, (t, g)) in w.spine.vertices().enumerate() {
        let p = [z[0] + o * t.to_f64_lossy(), z[1] + g.to_f64_lossy()];
        let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { "L" }, num(p[0]), num(p[1]));
    }
    let _ = writeln!(out, r##"    <path d="{d}" fill="none" stroke="#66a182" stroke-width="{}" stroke-dasharray="{}"/>"##, num(f.stroke()), num(3.0 * f.stroke()));
}

/// SVG of a scene with optional overlays.
pub fn render_svg(scene: &Scene, layers: Layers<'_>) -> Result<String> {
    let m = scene.set.realize()?;
    let w = &scene.window;
    let f = Frame {
        x0: w.xmin.to_f64_lossy(),
        y0: w.ymin.to_f64_lossy(),
        w: (w.xmax.clone() - w.xmin.clone()).to_f64_lossy(),
        h: (w.ymax.clone() - w.ymin.clone()).to_f64_lossy(),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        num(f.x0),
        num(-(f.y0 + f.h)),
        num(f.w),
        num(f.h),
        (800.0 * f.h / f.w).round() as i64
    );
    let _ = writeln!(out, r#"  <g transform="scale(1,-1)">"#);
    let _ = writeln!(out, r##"    <rect x="{}" y="{}" width="{}" height="{}" fill="#ffffff"/>"##, num(f.x0), num(f.y0), num(f.w), num(f.h));
    fills(&mut out, &m, &f);
    if let Some((psi, placed)) = layers.psi {
        level_sets(&mut out, psi, placed, &f);
    }
    skeleton(&mut out, &m, &f);
    if let Some((psi, placed)) = layers.psi {
        cones(&mut out, psi, placed, &f);
    }
    if let Some(wit) = layers.witnesses {
        witness_cones(&mut out, wit, &f);
    }
    for d in &scene.declared_accumulations {
        let [x, y] = d.point.to_f64();
        let _ = writeln!(
            out,
            r##"    <circle cx="{}" cy="{}" r="{}" fill="none" stroke="#d1495b" stroke-width="{}"/>"##,
            num(x),
            num(y),
            num(5.0 * f.stroke()),
            num(f.stroke())
        );
    }
    out.push_str("  </g>\n</svg>\n");
    Ok(out)
}

/// Ψ-free figure of a bare scene.
pub fn render_scene(scene: &Scene) -> Result<String> {
    render_svg(scene, Layers::default())
}
