use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use tfdeform::covariance::sample_covariance_of_columns;
use tfdeform::estimators::{subgrid_search, SubgridLayout};
use tfdeform::gabor::{dgt, GaborFrame};
use tfdeform::wavelet::{cwt, design_wavelet, ScaleGrid};
use tfdeform_bench::band_noise;

fn transforms(c: &mut Criterion) {
    let x = band_noise(8192, 1);
    let frame = GaborFrame::gaussian(8192, 32, 2, 32.0).unwrap();
    c.bench_function("dgt 8192, a 32, 4096 channels", |b| b.iter(|| dgt(&x, &frame).unwrap()));

    let x = band_noise(16384, 2);
    let wavelet = design_wavelet(70, 1.0).unwrap();
    let grid = ScaleGrid::voices(70, 64, 0, 560).unwrap();
    c.bench_function("cwt 16384, 560 rows", |b| b.iter(|| cwt(&x, &wavelet, &grid).unwrap()));
}

fn search(c: &mut Criterion) {
    // the per-iteration search of the warping estimator at its defaults
    let x = band_noise(16384, 3);
    let wavelet = design_wavelet(70, 1.0).unwrap();
    let stride = 9;
    let fine = cwt(&x, &wavelet, &ScaleGrid::voices(70, 64, 0, 560).unwrap()).unwrap();
    let layout = SubgridLayout {
        rows: 560,
        periodic: false,
        start: 70,
        len: 414,
        stride,
        direction: 1,
        shifts: (-70..=70).collect(),
    };
    let q = 2f64.powf(stride as f64 / 70.0);
    let lattice = ScaleGrid::new(q, 64, 0, layout.lattice_len()).unwrap();
    let coarse = cwt(&band_noise(16384, 4), &wavelet, &lattice).unwrap();
    let reference = sample_covariance_of_columns(&coarse.coeffs);
    c.bench_function("subgrid search, 141 shifts, 256 frames", |b| {
        b.iter_batched(
            || reference.clone(),
            |r| subgrid_search(&layout, &fine.coeffs, &r).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = transforms, search
}
criterion_main!(kernels);
