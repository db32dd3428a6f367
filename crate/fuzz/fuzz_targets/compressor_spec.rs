//! Compressor specs: Display round trip, and compression of arbitrary finite
//! vectors stays finite, contracts pointwise for deterministic kinds and
//! maps zero to zero.
#![no_main]
use hedzoc::compressors::{params_for, CompressorKind};
use libfuzzer_sys::fuzz_target;
use nalgebra::DVector;

fuzz_target!(|data: &[u8]| {
    let Some((&p, rest)) = data.split_first() else { return };
    let split = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
    let Ok(text) = std::str::from_utf8(&rest[..split]) else { return };
    let Ok(kind) = text.parse::<CompressorKind>() else { return };
    assert_eq!(kind.to_string().parse::<CompressorKind>().unwrap(), kind);

    let p = 1 + p as usize % 64;
    let Ok(spec) = params_for(kind, p) else { return };
    assert!(spec.r > 0.0 && spec.delta > 0.0 && spec.delta <= 1.0);
    let bytes = rest.get(split + 1..).unwrap_or(&[]);
    let x = DVector::from_iterator(
        p,
        (0..p).map(|i| bytes.get(i).map_or(0.0, |&b| (b as f64 - 128.0) / 7.0)),
    );
    let mut rng = hedzoc::rng::seeded(p as u64);
    let y = spec.compress(&x, &mut rng);
    assert_eq!(y.len(), p);
    assert!(y.iter().all(|v| v.is_finite()));
    if !spec.is_stochastic() {
        let err = (&y / spec.r - &x).norm_squared();
        assert!(err <= (1.0 - spec.delta) * x.norm_squared() * (1.0 + 1e-12) + 1e-12, "{kind} contraction");
    }
    let zero = spec.compress(&DVector::zeros(p), &mut rng);
    assert!(zero.iter().all(|&v| v == 0.0));
});
