#![no_main]

use libfuzzer_sys::fuzz_target;
use qtraj::noise::{ColoredChannelSpec, Kernel, NoiseBank};
use qtraj::rng::stream;
use qtraj::C64;

/// Layout: one byte of point count, then per point three f64 (time, re, im),
/// then an optional window f64.
fn decode(data: &[u8]) -> Option<ColoredChannelSpec> {
    let (&n, rest) = data.split_first()?;
    let n = (n as usize % 64).max(1);
    let mut nums = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        times.push(nums.next()?);
        values.push(C64::new(nums.next()?, nums.next()?));
    }
    let window = nums.next();
    Some(ColoredChannelSpec {
        b: C64::new(0.0, 0.0),
        kernel: Kernel::Tabulated { times, values, window },
    })
}

fuzz_target!(|data: &[u8]| {
    let Some(spec) = decode(data) else { return };
    if spec.validate().is_err() {
        return;
    }
    for mu in [-3.0, 0.0, 0.7, 25.0] {
        let _ = spec.kernel_transform(mu);
    }
    let _ = spec.kernel_at(0.5);
    let Ok(mut bank) = NoiseBank::new(std::slice::from_ref(&spec), 0.05, Some(C64::new(0.5, -1.0))) else {
        return;
    };
    let mut aux = vec![stream(1, 0, "fuzz-aux")];
    for k in 0..64 {
        let db = [if k % 2 == 0 { 0.1 } else { -0.1 }];
        let _ = bank.step(&db, &mut aux);
    }
});
