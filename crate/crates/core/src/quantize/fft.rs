use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, inverse: bool) -> Plan {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap();
    let (planner, plans) = &mut *guard;
    plans.entry((n, inverse)).or_insert_with(|| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) }).clone()
}

/// Unnormalized `d`-dimensional DFT over an `n^d` array (axis 0 slowest).
/// Forward uses `e^{-ikx}`, inverse `e^{+ikx}`.
pub fn fft_nd(data: &mut [C64], n: usize, d: usize, inverse: bool) {
    debug_assert_eq!(data.len(), n.pow(d as u32));
    let p = plan(n, inverse);
    if d == 1 {
        p.process(data);
        return;
    }
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + off + i * stride];
                }
                p.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + off + i * stride] = *v;
                }
            }
        }
    }
}
