// Temporary calibration harness; deleted before finishing.

use std::time::Instant;

use fibersample::analysis::{chi_square, EmpiricalDistribution};
use fibersample::fiber::{enumerate_fiber, table_weight, z_value, FiberLimits};
use fibersample::presets::preset;
use fibersample::sampler::TableSampler;
use num::ToPrimitive;

#[test]
#[ignore]
fn no3way_exact_distribution() {
    let p = preset("no3way-2x3x3", 1).unwrap();
    let t0 = Instant::now();
    let fiber = enumerate_fiber(p.model.matrix(), &p.b, FiberLimits::default()).unwrap();
    let z = z_value(&p.model, &p.b, FiberLimits::default()).unwrap();
    println!("fiber size {} z {} in {:?}", fiber.len(), z.value, t0.elapsed());
    let mut atoms: std::collections::BTreeMap<i64, f64> = Default::default();
    for el in &fiber.elements {
        let w = table_weight(&p.model, el) / &z.value;
        let cs = chi_square(el.counts(), &p.expected).unwrap();
        *atoms.entry(cs.round() as i64).or_default() += w.to_f64().unwrap();
    }
    println!("distribution {atoms:?}");
    for s in [2u64, 5] {
        let p = preset("no3way-2x3x3", s).unwrap();
        let t0 = Instant::now();
        let fiber = enumerate_fiber(p.model.matrix(), &p.b, FiberLimits::default()).unwrap();
        println!("s={s} fiber {} in {:?}", fiber.len(), t0.elapsed());
    }
}

#[test]
#[ignore]
fn ips_draw_speed() {
    let p = preset("no3way-2x3x3", 1).unwrap();
    let sampler = TableSampler::new(&p.model, p.b.clone(), p.default_estimator.clone()).unwrap();
    let t0 = Instant::now();
    let count = 2000usize;
    let mut iters = Vec::new();
    for i in 0..count {
        let d = sampler.draw_stream(42, i as u64).unwrap();
        iters.extend(d.ips_iterations.iter().copied());
    }
    let dt = t0.elapsed();
    let max = iters.iter().max().unwrap();
    let mean = iters.iter().map(|&v| v as f64).sum::<f64>() / iters.len() as f64;
    println!("{count} draws in {dt:?} ({:?}/draw), ips mean {mean:.1} max {max}", dt / count as u32);

    let t1 = Instant::now();
    let more = 20_000usize;
    for i in 0..more {
        sampler.draw_stream(43, i as u64).unwrap();
    }
    println!("{more} more draws in {:?} (cache warmed)", t1.elapsed());

    // Empirical distribution check at small scale.
    let values: Vec<f64> = (0..20_000)
        .map(|i| {
            let d = sampler.draw_stream(44, i as u64).unwrap();
            chi_square(d.table.counts(), &p.expected).unwrap()
        })
        .collect();
    let dist = EmpiricalDistribution::from_values(&values).unwrap();
    println!("support {:?}", dist.support());
    println!("masses {:?}", dist.masses());

    for s in [2u64, 5] {
        let p = preset("no3way-2x3x3", s).unwrap();
        let sampler = TableSampler::new(&p.model, p.b.clone(), p.default_estimator.clone()).unwrap();
        let t0 = Instant::now();
        let count = 300usize;
        for i in 0..count {
            sampler.draw_stream(42, i as u64).unwrap();
        }
        println!("s={s}: {count} draws in {:?} ({:?}/draw)", t0.elapsed(), t0.elapsed() / count as u32);
    }
}

#[test]
#[ignore]
fn two_way_direct_speed() {
    let p = preset("indep-4x5", 1).unwrap();
    let sampler = TableSampler::new(&p.model, p.b.clone(), p.default_estimator.clone()).unwrap();
    let t0 = Instant::now();
    let count = 200_000usize;
    for i in 0..count {
        sampler.draw_stream(42, i as u64).unwrap();
    }
    println!("{count} rational draws in {:?}", t0.elapsed());

    let p = preset("nonindep-4x5", 1).unwrap();
    let sampler = TableSampler::new(&p.model, p.b.clone(), p.default_estimator.clone()).unwrap();
    let t0 = Instant::now();
    let count = 5_000usize;
    for i in 0..count {
        sampler.draw_stream(42, i as u64).unwrap();
    }
    println!("{count} nonindep ips draws in {:?}", t0.elapsed());
}
