// Temporary debug harness; deleted before finishing.

use fibersample::mle::{ips_solve, IpsConfig};
use fibersample::model::SufficientStatistics;
use fibersample::presets::preset;
use fibersample::sampler::TableSampler;

#[test]
#[ignore]
fn debug_no3way_draw() {
    let p = preset("no3way-2x3x3", 1).unwrap();
    let sampler = TableSampler::new(&p.model, p.b.clone(), p.default_estimator.clone()).unwrap();
    let mut retried = 0u64;
    for i in 0..5000u64 {
        match sampler.draw_stream(42, i) {
            Ok(d) => {
                retried += (d.retries > 0) as u64;
            }
            Err(e) => {
                println!("draw {i}: ERROR {e}");
                break;
            }
        }
    }
    println!("paths with retries: {retried}");
    // Solve at the top state and a few hand-walked states.
    let res = ips_solve(&p.model, &p.b, p.n, &p.ips).unwrap();
    println!(
        "top state: converged={} iters={} mu[0..3]={:?}",
        res.converged,
        res.iterations,
        &res.mu_hat[..3]
    );
    // After picking cell 0 (= u111).
    let mut beta = p.b.values().to_vec();
    for (b, &a) in beta.iter_mut().zip(p.model.matrix().column(0).iter()) {
        *b -= a;
    }
    let res = ips_solve(
        &p.model,
        &SufficientStatistics::new(beta.clone()),
        p.n - 1,
        &p.ips,
    )
    .unwrap();
    println!(
        "after one pick: converged={} iters={} sum={}",
        res.converged,
        res.iterations,
        res.mu_hat.iter().sum::<f64>()
    );
    // Walk a full path, printing iteration counts.
    let mut beta = p.b.values().to_vec();
    for t in 0..p.n {
        let remaining = p.n - t;
        let res = ips_solve(
            &p.model,
            &SufficientStatistics::new(beta.clone()),
            remaining,
            &IpsConfig {
                epsilon: 0.005,
                max_iterations: 5000,
            },
        )
        .unwrap();
        println!(
            "t={t} remaining={remaining} converged={} iters={}",
            res.converged, res.iterations
        );
        // Greedy pick: the largest component.
        let j = res
            .mu_hat
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        for (b, &a) in beta.iter_mut().zip(p.model.matrix().column(j).iter()) {
            *b -= a;
        }
    }
}
