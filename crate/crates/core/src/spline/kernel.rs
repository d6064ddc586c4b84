/// Free parameter of the cubic convolution kernel. `-0.5` gives third-order
/// accuracy and reproduces quadratics.
pub const KEYS_A: f64 = -0.5;

/// Keys' cubic convolution kernel.
#[inline]
pub fn keys_kernel(s: f64) -> f64 {
    let a = KEYS_A;
    let s = s.abs();
    if s < 1.0 {
        ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0
    } else if s < 2.0 {
        ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a
    } else {
        0.0
    }
}

/// Interpolation weights for control points `0..k` at normalized time
/// `t ∈ [0, 1]`. Ghost points beyond either end are quadratic
/// extrapolations (`p₋₁ = 3p₀ − 3p₁ + p₂`, mirrored at the far end; linear
/// when `k = 2`) and their weights are folded into the real control points.
pub(crate) fn control_weights(t: f64, k: usize) -> Vec<f64> {
    debug_assert!(k >= 2);
    let s = t * (k - 1) as f64;
    let base = (s.floor() as isize).min(k as isize - 2);
    let mut w = vec![0.0; k];
    for idx in base - 1..=base + 2 {
        let kw = keys_kernel(s - idx as f64);
        if kw == 0.0 {
            continue;
        }
        if idx >= 0 && (idx as usize) < k {
            w[idx as usize] += kw;
        } else if idx < 0 {
            fold_ghost(&mut w, kw, |i| i);
        } else {
            fold_ghost(&mut w, kw, |i| k - 1 - i);
        }
    }
    w
}

fn fold_ghost(w: &mut [f64], kw: f64, at: impl Fn(usize) -> usize) {
    if w.len() >= 3 {
        w[at(0)] += 3.0 * kw;
        w[at(1)] -= 3.0 * kw;
        w[at(2)] += kw;
    } else {
        w[at(0)] += 2.0 * kw;
        w[at(1)] -= kw;
    }
}
