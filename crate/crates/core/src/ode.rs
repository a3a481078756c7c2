//! Dormand–Prince 5(4) stepping with error control.

use crate::Point3;
// float methods for no_std; redundant when std is linked through dev-dependencies
#[allow(unused_imports)]
use num_traits::Float;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One trial step: the fifth-order solution and the embedded error estimate.
pub fn dp45_trial(f: &impl Fn(&Point3) -> Point3, y: &Point3, h: f64) -> (Point3, Point3) {
    let k1 = f(y);
    let k2 = f(&(y + k1 * (h * A21)));
    let k3 = f(&(y + (k1 * A31 + k2 * A32) * h));
    let k4 = f(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
    let k5 = f(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
    let k6 = f(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
    let y5 = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
    let k7 = f(&y5);
    let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
    let _ = (C2, C3, C4, C5);
    (y5, err)
}

/// Error-controlled stepping parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl StepControl {
    /// Scaled error norm; `≤ 1` means accept.
    pub fn error_ratio(&self, y: &Point3, y_new: &Point3, err: &Point3) -> f64 {
        let mut acc: f64 = 0.0;
        for i in 0..3 {
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            acc = acc.max((err[i] / sc).abs());
        }
        acc
    }

    /// Next step size from an error ratio (standard safety factor, clamped growth).
    pub fn next_h(&self, h: f64, ratio: f64) -> f64 {
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        (h.abs() * factor).clamp(self.h_min, self.h_max) * h.signum()
    }
}

/// One adaptive step: returns `(h_used, y_new, h_next)`, or `None` on underflow.
pub fn adaptive_step(
    f: &impl Fn(&Point3) -> Point3,
    y: &Point3,
    h: f64,
    ctl: &StepControl,
) -> Option<(f64, Point3, f64)> {
    let mut h = h;
    loop {
        let (y5, err) = dp45_trial(f, y, h);
        let ratio = ctl.error_ratio(y, &y5, &err);
        if ratio.is_finite() && ratio <= 1.0 {
            return Some((h, y5, ctl.next_h(h, ratio)));
        }
        if h.abs() <= ctl.h_min {
            return None;
        }
        let shrink = if ratio.is_finite() {
            (0.9 * ratio.powf(-0.25)).clamp(0.1, 0.5)
        } else {
            0.1
        };
        h = (h.abs() * shrink).max(ctl.h_min) * h.signum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_keeps_radius() {
        let f = |p: &Point3| Point3::new(-p[1], p[0], 0.0);
        let ctl = StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-8,
            h_max: 0.5,
        };
        let mut y = Point3::new(1.0, 0.0, 0.0);
        let mut t = 0.0;
        let mut h = 0.01;
        while t < core::f64::consts::TAU {
            let rem = core::f64::consts::TAU - t;
            let (used, yn, next) = adaptive_step(&f, &y, h.min(rem), &ctl).unwrap();
            t += used;
            y = yn;
            h = next;
        }
        assert!((y - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-8);
    }
}
