use criterion::{black_box, criterion_group, criterion_main, Criterion};
use num_complex::Complex64 as C64;

use bidisc::carleson::{disc_cap_volume, volume_preimage, CarlesonBox, Window, MIN_SAMPLES};
use bidisc::levelset::{detect_lines, trace_level_set, Orientation};
use bidisc::rif::{amy, kappa, kappa_iterate};

fn evaluation(c: &mut Criterion) {
    let f = kappa_iterate(3).unwrap();
    let (z1, z2) = (C64::new(0.3, -0.4), C64::new(-0.5, 0.2));
    c.bench_function("kappa_iterate_3_value", |b| {
        b.iter(|| f.value(black_box(z1), black_box(z2)))
    });
}

fn level_sets(c: &mut Criterion) {
    let a = amy();
    c.bench_function("trace_amy_4096", |b| {
        b.iter(|| trace_level_set(&a, black_box(C64::new(0.0, 1.0)), 4096).unwrap())
    });
    c.bench_function("detect_lines_amy", |b| b.iter(|| detect_lines(&a, 4096)));
    c.bench_function("find_singularities_kappa_iterate_2", |b| {
        let f = kappa_iterate(2).unwrap();
        b.iter(|| f.find_singularities(256))
    });
}

fn volumes(c: &mut Criterion) {
    c.bench_function("disc_cap_volume", |b| {
        b.iter(|| disc_cap_volume(black_box(0.01), black_box(-0.5)))
    });
    let k = kappa();
    let phi = |x: C64, y: C64| [k.value(x, y), y];
    let one = C64::new(1.0, 0.0);
    let bx = CarlesonBox::new([-one, one], [1.0 / 64.0, 2.0]).unwrap();
    let windows = [Window::line(one, Orientation::Vertical, 4.0 / 64.0)];
    c.bench_function("volume_preimage_1e4", |b| {
        b.iter(|| volume_preimage(&phi, &bx, 0.0, MIN_SAMPLES, 42, &windows).unwrap())
    });
}

criterion_group!(benches, evaluation, level_sets, volumes);
criterion_main!(benches);
