//! Queries a hand-made object map: near samples, between them, far away,
//! and with a subsampled active set.

use pomloc::{MapParams, ObjectMap, PomSample, Pose2};

fn main() -> pomloc::Result<()> {
    // Two parked cars facing +y, and free space between them.
    let samples = vec![
        PomSample::new(Pose2::new(0.0, 0.0, 1.57), 2.0),
        PomSample::new(Pose2::new(2.5, 0.0, 1.57), 2.0),
        PomSample::new(Pose2::new(1.25, 0.0, 1.57), -3.0),
        PomSample::new(Pose2::new(1.25, 2.0, 0.0), -3.0),
    ];
    let map = ObjectMap::with_samples("car", MapParams::default(), samples)?;
    println!("prior likelihood {:.3}", map.params().prior_likelihood);

    println!("\n    x      p(car, facing +y)   p(car, facing +x)");
    for i in 0..=10 {
        let x = -1.0 + 0.45 * i as f64;
        let up = map.evaluate(&Pose2::new(x, 0.0, 1.57))?;
        let side = map.evaluate(&Pose2::new(x, 0.0, 0.0))?;
        println!("{x:6.2}   {up:17.3}   {side:17.3}");
    }

    let far = Pose2::new(200.0, -50.0, 0.3);
    println!("\nfar from every sample: {:.6}", map.evaluate(&far)?);

    // The same map queried through a random half of its in-radius samples.
    let half = map.with_params(MapParams {
        sample_fraction: 0.5,
        ..map.params().clone()
    })?;
    let q = Pose2::new(0.1, 0.1, 1.5);
    let (active, used) = half.active_subset(&q);
    println!(
        "\nat {q}: full {:.3}, half-sampled {:.3} from {} sample(s), variance {:.3} vs {:.3}",
        map.evaluate(&q)?,
        half.evaluate(&q)?,
        active.len(),
        half.kde_variance(&active, &q, used),
        map.kde_variance(&map.active_subset(&q).0, &q, 1.0),
    );

    // A local model solves the GP once and is then cheap to query nearby.
    let local = map.local(&Pose2::new(1.25, 0.0, 1.57))?;
    let (p, grad) = local.evaluate_with_gradient(&Pose2::new(0.5, 0.0, 1.57));
    println!("\nlocal model at x = 0.5: p {p:.3}, dp/dx {:.3}", grad[0]);
    Ok(())
}
