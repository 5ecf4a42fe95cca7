//! The multi-session study over the parking lot: every session sees a new
//! parking configuration, and the spread of waypoint estimates is compared
//! between dead reckoning and localization against the bootstrapped map.
//!
//! Usage: `cargo run --release --example consistency_study [sessions] [out_dir]`

use std::path::PathBuf;
use std::time::Instant;

use pomloc::experiments::{run_consistency_study, ConsistencyConfig};
use pomloc::io;
use pomloc::metrics::{self, Series};

fn main() -> pomloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let sessions = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let out: PathBuf = args.next().unwrap_or_else(|| "target/example_out/consistency_study".into()).into();
    let cfg = ConsistencyConfig {
        sessions,
        ..ConsistencyConfig::default()
    };

    let start = Instant::now();
    let r = run_consistency_study(&cfg)?;
    println!(
        "map samples {}, {} sessions, {} waypoints",
        r.map_samples, cfg.sessions, cfg.waypoints
    );
    for (k, (odo, pom)) in r.ate.iter().enumerate() {
        println!("  session {k}: ATE odometry {odo:.3} m, POM {pom:.3} m");
    }
    let rows = [
        ("odometry position (m)", &r.odometry_position),
        ("POM position (m)", &r.pom_position),
        ("odometry orientation (rad)", &r.odometry_orientation),
        ("POM orientation (rad)", &r.pom_orientation),
    ];
    for (name, d) in rows {
        println!(
            "{name:>28}: max {:.3}, median {:.3}",
            metrics::max_value(d),
            metrics::median_value(d)
        );
    }

    let cdf = |d: &[metrics::Deviation]| metrics::cdf_points(&d.iter().map(|x| x.value).collect::<Vec<_>>());
    let (odo, pom) = (cdf(&r.odometry_position), cdf(&r.pom_position));
    let svg = metrics::svg_plot(
        "waypoint position consistency",
        "deviation from centroid (m)",
        "fraction of estimates",
        &[
            Series {
                name: "odometry",
                points: &odo,
            },
            Series { name: "POM", points: &pom },
        ],
    );
    io::write_text(&out.join("position_cdf.svg"), &svg)?;
    io::write_text(&out.join("pom_position_deviations.csv"), &metrics::deviations_csv(&r.pom_position))?;
    io::write_text(
        &out.join("odometry_position_deviations.csv"),
        &metrics::deviations_csv(&r.odometry_position),
    )?;
    println!("wrote plots to {} ({:.0} s)", out.display(), start.elapsed().as_secs_f64());
    Ok(())
}
