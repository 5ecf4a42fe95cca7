//! Trajectory error and waypoint consistency on small hand-made inputs, with
//! CSV and SVG output.
//!
//! Usage: `cargo run --example metrics_report [out_dir]`

use std::path::PathBuf;

use pomloc::metrics::{self, Series, WaypointEstimates};
use pomloc::{io, Pose2};

fn main() -> pomloc::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example_out/metrics_report".into())
        .into();

    let truth: Vec<Pose2> = (0..20).map(|i| Pose2::new(i as f64, 0.1 * i as f64, 0.1)).collect();
    // The same path rotated and shifted, plus a slowly growing drift.
    let offset = Pose2::new(1.0, -2.0, 0.3);
    let estimate: Vec<Pose2> = truth
        .iter()
        .enumerate()
        .map(|(i, p)| offset.compose(&Pose2::new(p.x, p.y + 0.01 * i as f64, p.theta())))
        .collect();
    println!(
        "ATE {:.3} m, after rigid alignment {:.3} m",
        metrics::ate(&estimate, &truth, false)?,
        metrics::ate(&estimate, &truth, true)?
    );

    // Three sessions estimating the same four waypoints.
    let sessions = vec![
        vec![
            Pose2::new(0.0, 0.0, 0.0),
            Pose2::new(10.0, 0.0, 1.5),
            Pose2::new(10.0, 10.0, 3.1),
            Pose2::new(0.0, 10.0, -1.6),
        ],
        vec![
            Pose2::new(0.2, 0.0, 0.05),
            Pose2::new(10.1, 0.3, 1.6),
            Pose2::new(9.6, 10.2, -3.1),
            Pose2::new(0.0, 9.9, -1.5),
        ],
        vec![
            Pose2::new(-0.1, 0.1, -0.05),
            Pose2::new(9.8, -0.2, 1.4),
            Pose2::new(10.3, 9.9, 3.0),
            Pose2::new(0.4, 10.3, -1.7),
        ],
    ];
    let w = WaypointEstimates::from_sessions(&sessions)?;
    let position = metrics::position_consistency(&w);
    let orientation = metrics::orientation_consistency(&w)?;
    println!(
        "position deviation: max {:.3} m, median {:.3} m",
        metrics::max_value(&position),
        metrics::median_value(&position)
    );
    println!(
        "orientation deviation: max {:.3} rad, median {:.3} rad",
        metrics::max_value(&orientation),
        metrics::median_value(&orientation)
    );

    let values: Vec<f64> = position.iter().map(|d| d.value).collect();
    let cdf = metrics::cdf_points(&values);
    io::write_text(&out.join("position_deviations.csv"), &metrics::deviations_csv(&position))?;
    io::write_text(&out.join("position_cdf.csv"), &metrics::cdf_csv(&cdf))?;
    let svg = metrics::svg_plot(
        "waypoint consistency",
        "deviation from centroid (m)",
        "fraction of estimates",
        &[Series {
            name: "position",
            points: &cdf,
        }],
    );
    io::write_text(&out.join("position_cdf.svg"), &svg)?;
    println!("wrote CSV and SVG to {}", out.display());
    Ok(())
}
