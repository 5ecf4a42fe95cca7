//! Trajectory accuracy and multi-session consistency metrics, with CSV and
//! SVG output for plotting.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::se2::{angular_distance, Pose2};

/// Root-mean-square position error between index-aligned trajectories.
/// With `align`, the estimate is first moved by the rigid transform that
/// best fits it onto the reference in the least-squares sense.
pub fn ate(estimate: &[Pose2], reference: &[Pose2], align: bool) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::LengthMismatch(estimate.len(), reference.len()));
    }
    if estimate.is_empty() {
        return Ok(0.0);
    }
    let moved: Vec<(f64, f64)> = if align {
        let t = rigid_alignment(estimate, reference);
        estimate.iter().map(|p| t.transform_point(p.x, p.y)).collect()
    } else {
        estimate.iter().map(|p| (p.x, p.y)).collect()
    };
    let sse: f64 = moved
        .iter()
        .zip(reference)
        .map(|((x, y), r)| (x - r.x).powi(2) + (y - r.y).powi(2))
        .sum();
    Ok((sse / estimate.len() as f64).sqrt())
}

/// Rigid transform `T` minimising Σ |T·p_i − q_i|² over estimate positions
/// `p` and reference positions `q`. In 2D the optimal rotation has a closed
/// form from the cross-covariance of the centred point sets.
pub fn rigid_alignment(estimate: &[Pose2], reference: &[Pose2]) -> Pose2 {
    let n = estimate.len() as f64;
    let (mut px, mut py, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0);
    for (p, q) in estimate.iter().zip(reference) {
        px += p.x;
        py += p.y;
        qx += q.x;
        qy += q.y;
    }
    let (px, py, qx, qy) = (px / n, py / n, qx / n, qy / n);
    let (mut dot, mut cross) = (0.0, 0.0);
    for (p, q) in estimate.iter().zip(reference) {
        let (ax, ay) = (p.x - px, p.y - py);
        let (bx, by) = (q.x - qx, q.y - qy);
        dot += ax * bx + ay * by;
        cross += ax * by - ay * bx;
    }
    let phi = cross.atan2(dot);
    let (s, c) = phi.sin_cos();
    Pose2::new(qx - (c * px - s * py), qy - (s * px + c * py), phi)
}

/// Estimates of each waypoint across sessions: `waypoints[w][s]`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WaypointEstimates {
    pub waypoints: Vec<Vec<Pose2>>,
}

impl WaypointEstimates {
    pub fn new(waypoints: Vec<Vec<Pose2>>) -> Result<Self> {
        if let Some(w) = waypoints.iter().position(|e| e.is_empty()) {
            return Err(Error::InvalidParameter(format!("waypoint {w} has no estimates")));
        }
        Ok(WaypointEstimates { waypoints })
    }

    /// Transposes per-session waypoint lists into per-waypoint lists.
    pub fn from_sessions(sessions: &[Vec<Pose2>]) -> Result<Self> {
        let count = sessions.first().map_or(0, Vec::len);
        if let Some(s) = sessions.iter().find(|s| s.len() != count) {
            return Err(Error::LengthMismatch(s.len(), count));
        }
        Self::new((0..count).map(|w| sessions.iter().map(|s| s[w]).collect()).collect())
    }
}

/// One deviation value, tagged with its waypoint and session.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviation {
    pub waypoint: usize,
    pub session: usize,
    pub value: f64,
}

pub fn position_consistency(w: &WaypointEstimates) -> Vec<Deviation> {
    let mut out = Vec::new();
    for (wi, est) in w.waypoints.iter().enumerate() {
        let n = est.len() as f64;
        let cx = est.iter().map(|p| p.x).sum::<f64>() / n;
        let cy = est.iter().map(|p| p.y).sum::<f64>() / n;
        out.extend(est.iter().enumerate().map(|(s, p)| Deviation {
            waypoint: wi,
            session: s,
            value: (p.x - cx).hypot(p.y - cy),
        }));
    }
    out
}

/// Below this resultant length the circular mean is not defined.
pub const MIN_RESULTANT: f64 = 1e-9;

pub fn circular_mean(angles: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0.0);
    for a in angles {
        s += a.sin();
        c += a.cos();
        n += 1.0;
    }
    if n == 0.0 || (s / n).hypot(c / n) < MIN_RESULTANT {
        return None;
    }
    Some(s.atan2(c))
}

pub fn orientation_consistency(w: &WaypointEstimates) -> Result<Vec<Deviation>> {
    let mut out = Vec::new();
    for (wi, est) in w.waypoints.iter().enumerate() {
        let mean = circular_mean(est.iter().map(Pose2::theta)).ok_or(Error::DegenerateOrientation(wi))?;
        out.extend(est.iter().enumerate().map(|(s, p)| Deviation {
            waypoint: wi,
            session: s,
            value: angular_distance(p.theta(), mean),
        }));
    }
    Ok(out)
}

/// Empirical CDF: one `(value, fraction ≤ value)` point per distinct value.
pub fn cdf_points(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

pub fn max_value(d: &[Deviation]) -> f64 {
    d.iter().map(|d| d.value).fold(0.0, f64::max)
}

pub fn median_value(d: &[Deviation]) -> f64 {
    let mut v: Vec<f64> = d.iter().map(|d| d.value).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("value,fraction\n");
    for (v, f) in points {
        let _ = writeln!(s, "{v},{f}");
    }
    s
}

pub fn deviations_csv(d: &[Deviation]) -> String {
    let mut s = String::from("waypoint,session,deviation\n");
    for x in d {
        let _ = writeln!(s, "{},{},{}", x.waypoint, x.session, x.value);
    }
    s
}

/// A named polyline for [`svg_plot`].
pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// A minimal standalone SVG with step-free polylines, axes and a legend.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    x0 = x0.min(0.0);
    y0 = y0.min(0.0);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {} L{} {} M{m} {} L{m} {m}" stroke="black" fill="none"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.3}</text>"#,
            sx(fx),
            h - m + 18.0,
            fx
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            m - 6.0,
            sy(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser.points.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            pts.join(" ")
        );
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#,
            w - m - 130.0,
            ly - 4.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, w - m - 112.0, escape(ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
