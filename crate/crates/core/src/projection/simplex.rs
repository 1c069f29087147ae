//! Euclidean projection onto `{ w >= 0, lower <= sum(w) <= upper }`.

use crate::error::{Error, Result};

/// Nonnegative orthant intersected with a slab on the coordinate sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CappedSimplex {
    dim: usize,
    lower: f64,
    upper: f64,
}

impl CappedSimplex {
    pub fn new(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidOption(
                "capped simplex needs dimension >= 1".into(),
            ));
        }
        if !(lower >= 0.0 && lower <= upper && upper.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "capped simplex needs 0 <= lower <= upper < inf, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { dim, lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Membership up to `tol` on the sum and on each coordinate.
    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        let sum: f64 = w.iter().sum();
        w.len() == self.dim
            && w.iter().all(|&a| a >= -tol)
            && sum >= self.lower - tol
            && sum <= self.upper + tol
    }

    /// Largest violation of the set's constraints by `w`.
    pub fn violation(&self, w: &[f64]) -> f64 {
        let sum: f64 = w.iter().sum();
        let neg = w.iter().fold(0.0f64, |m, &a| m.max(-a));
        neg.max(self.lower - sum).max(sum - self.upper).max(0.0)
    }
}

/// Sum of `max(v - lambda, 0)`.
fn shifted_sum(v: &[f64], lambda: f64) -> f64 {
    v.iter().map(|&a| (a - lambda).max(0.0)).sum()
}

pub fn project(v: &[f64], set: &CappedSimplex) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    project_into(v, set, &mut out);
    out
}

/// Projects `v` onto `set`, writing the result into `out`.
///
/// The minimizer has the form `max(v - lambda, 0)` for a scalar multiplier
/// `lambda`; `lambda = 0` when the clamped point already has an admissible
/// sum, otherwise it is the unique value putting the sum on the violated
/// bound (negative when the lower bound is active). The multiplier is
/// bracketed by bisection and then solved exactly on the detected support.
pub fn project_into(v: &[f64], set: &CappedSimplex, out: &mut [f64]) {
    debug_assert_eq!(v.len(), set.dim);
    debug_assert_eq!(out.len(), set.dim);
    let (lower, upper) = (set.lower, set.upper);

    if v.len() == 1 {
        out[0] = v[0].clamp(lower.max(0.0), upper);
        return;
    }

    let clamped_sum = shifted_sum(v, 0.0);
    let goal = if clamped_sum > upper {
        upper
    } else if clamped_sum < lower {
        lower
    } else {
        for (o, &a) in out.iter_mut().zip(v) {
            *o = a.max(0.0);
        }
        return;
    };

    let (vmin, vmax) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
            (lo.min(a), hi.max(a))
        });
    // shifted_sum(lo) >= n (upper + 1) > goal and shifted_sum(hi) = 0 <= goal
    let mut lo = vmin - (upper + 1.0);
    let mut hi = vmax + lower + 1.0;
    let mut sum_lo = shifted_sum(v, lo);
    let mut sum_hi = 0.0;
    for _ in 0..200 {
        if sum_lo - sum_hi <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = shifted_sum(v, mid);
        if s > goal {
            lo = mid;
            sum_lo = s;
        } else {
            hi = mid;
            sum_hi = s;
        }
    }

    let mut lambda = 0.5 * (lo + hi);
    // Exact multiplier on the support {i : v_i > lambda}.
    let (count, total) = v
        .iter()
        .filter(|&&a| a > lambda)
        .fold((0usize, 0.0), |(n, s), &a| (n + 1, s + a));
    if count > 0 {
        let exact = (total - goal) / count as f64;
        let consistent = v
            .iter()
            .all(|&a| if a > lambda { a >= exact } else { a <= exact });
        if consistent {
            lambda = exact;
        }
    }
    for (o, &a) in out.iter_mut().zip(v) {
        *o = (a - lambda).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(n: usize, l: f64, u: f64) -> CappedSimplex {
        CappedSimplex::new(n, l, u).unwrap()
    }

    /// Fine-grid search over the 2-d feasible set, step 0.001.
    fn grid_projection_2d(v: [f64; 2], l: f64, u: f64) -> [f64; 2] {
        let step = 1e-3;
        let n = (u / step).round() as i64;
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let w = [i as f64 * step, j as f64 * step];
                let s = w[0] + w[1];
                if s < l - 1e-12 || s > u + 1e-12 {
                    continue;
                }
                let d = (w[0] - v[0]).powi(2) + (w[1] - v[1]).powi(2);
                if d < best.0 {
                    best = (d, w);
                }
            }
        }
        best.1
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn already_feasible() {
        assert_eq!(project(&[1.0, 1.0], &set(2, 0.0, 4.0)), vec![1.0, 1.0]);
    }

    #[test]
    fn symmetric_split() {
        assert_close(&project(&[3.0, 3.0], &set(2, 0.0, 4.0)), &[2.0, 2.0], 1e-12);
    }

    #[test]
    fn upper_active_with_clamping() {
        let oracle = grid_projection_2d([5.0, 1.0], 0.0, 4.0);
        assert_close(&oracle, &[4.0, 0.0], 1e-9);
        assert_close(&project(&[5.0, 1.0], &set(2, 0.0, 4.0)), &oracle, 1e-3);
        assert_close(&project(&[5.0, 1.0], &set(2, 0.0, 4.0)), &[4.0, 0.0], 1e-12);
    }

    #[test]
    fn lower_active_negative_multiplier() {
        let oracle = grid_projection_2d([0.5, 0.5], 2.0, 4.0);
        assert_close(&oracle, &[1.0, 1.0], 1e-9);
        assert_close(&project(&[0.5, 0.5], &set(2, 2.0, 4.0)), &[1.0, 1.0], 1e-12);
    }

    #[test]
    fn one_dimensional_clamp() {
        assert_eq!(project(&[-3.0], &set(1, 0.5, 2.0)), vec![0.5]);
        assert_eq!(project(&[7.0], &set(1, 0.5, 2.0)), vec![2.0]);
        assert_eq!(project(&[1.25], &set(1, 0.5, 2.0)), vec![1.25]);
    }

    #[test]
    fn zero_cap_gives_zero() {
        assert_eq!(project(&[3.0, -1.0, 2.0], &set(3, 0.0, 0.0)), vec![0.0; 3]);
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(CappedSimplex::new(0, 0.0, 1.0).is_err());
        assert!(CappedSimplex::new(2, 2.0, 1.0).is_err());
        assert!(CappedSimplex::new(2, -1.0, 1.0).is_err());
    }

    fn case() -> impl Strategy<Value = (Vec<f64>, CappedSimplex)> {
        (1usize..8).prop_flat_map(|n| {
            (
                proptest::collection::vec(-5.0..5.0f64, n),
                0.0..4.0f64,
                0.0..4.0f64,
            )
                .prop_map(move |(v, a, b)| (v, set(n, a.min(b), a.max(b))))
        })
    }

    proptest! {
        #[test]
        fn idempotent((v, s) in case()) {
            let p = project(&v, &s);
            let pp = project(&p, &s);
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn feasible((v, s) in case()) {
            let p = project(&v, &s);
            let sum: f64 = p.iter().sum();
            prop_assert!(p.iter().all(|&a| a >= 0.0));
            prop_assert!(sum >= s.lower() - 1e-9 && sum <= s.upper() + 1e-9);
        }

        #[test]
        fn nonexpansive((u, s) in case(), shift in proptest::collection::vec(-3.0..3.0f64, 8)) {
            let v: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let pu = project(&u, &s);
            let pv = project(&v, &s);
            let dp: f64 = pu.iter().zip(&pv).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let d: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dp <= d + 1e-10);
        }

        #[test]
        fn variational_inequality((v, s) in case(), probe in proptest::collection::vec(0.0..2.0f64, 8)) {
            // <v - P(v), w - P(v)> <= 0 for every feasible w
            let p = project(&v, &s);
            let w = project(&probe[..v.len()], &s);
            let ip: f64 = v.iter().zip(&p).zip(&w).map(|((a, b), c)| (a - b) * (c - b)).sum();
            prop_assert!(ip <= 1e-9);
        }
    }
}
