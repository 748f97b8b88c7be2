//! Classical fixed-step fourth-order Runge–Kutta for small autonomous systems.

use crate::scalar::Scalar;

#[inline]
fn axpy<T: Scalar, const D: usize>(x: &[T; D], h: T, k: &[T; D]) -> [T; D] {
    let mut out = *x;
    for i in 0..D {
        out[i] = x[i] + h * k[i];
    }
    out
}

/// One RK4 step of `dx/dt = f(x)` with step `h` (negative `h` integrates backward).
pub fn rk4_step<T: Scalar, const D: usize, F>(f: &F, x: &[T; D], h: T) -> [T; D]
where
    F: Fn(&[T; D]) -> [T; D],
{
    let half = T::lit(0.5) * h;
    let k1 = f(x);
    let k2 = f(&axpy(x, half, &k1));
    let k3 = f(&axpy(x, half, &k2));
    let k4 = f(&axpy(x, h, &k3));
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *x;
    for i in 0..D {
        out[i] = x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
    out
}

/// Number of equal substeps of size at most `dt` covering `span`.
pub fn substeps<T: Scalar>(span: T, dt: T) -> usize {
    let raw = (span.abs() / dt).to_f64_lossy();
    // tolerate spans that are an exact multiple of dt up to rounding
    ((raw - 1e-9).ceil().max(1.0)) as usize
}

/// Integrates from `t0` to `t1` with substeps no larger than `dt`, returning the end state.
pub fn integrate_to<T: Scalar, const D: usize, F>(f: &F, x0: [T; D], t0: T, t1: T, dt: T) -> [T; D]
where
    F: Fn(&[T; D]) -> [T; D],
{
    if t1 == t0 {
        return x0;
    }
    let n = substeps(t1 - t0, dt);
    let h = (t1 - t0) / T::from_usize(n).unwrap();
    (0..n).fold(x0, |x, _| rk4_step(f, &x, h))
}
