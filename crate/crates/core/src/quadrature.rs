//! Adaptive Simpson quadrature with dense output.
//!
//! Leaves narrower than a fixed fraction of the panel are accepted without
//! an error test, so integrands with jump discontinuities (piecewise
//! constant guidance schedules) terminate with an error proportional to the
//! jump times that width.

use crate::{Error, Result};

/// Default evaluation budget.
pub const MAX_EVALUATIONS: usize = 1_000_000;

const MIN_RELATIVE_WIDTH: f64 = 1e-13;
const MAX_DEPTH: usize = 60;

#[derive(Debug, Clone, Copy)]
struct Leaf {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    before: f64,
}

impl Leaf {
    fn integral(&self) -> f64 {
        (self.b - self.a) / 6.0 * (self.fa + 4.0 * self.fm + self.fb)
    }

    /// Integral of the interpolating quadratic from `a` to `x`.
    fn partial(&self, x: f64) -> f64 {
        let h = self.b - self.a;
        let s = ((x - self.a) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let l0 = 2.0 * (s3 / 3.0 - 0.75 * s2 + 0.5 * s);
        let l1 = -4.0 * (s3 / 3.0 - 0.5 * s2);
        let l2 = 2.0 * (s3 / 3.0 - 0.25 * s2);
        h * (l0 * self.fa + l1 * self.fm + l2 * self.fb)
    }
}

/// Running integral `x -> int_a^x f` of a scalar integrand.
#[derive(Debug, Clone)]
pub struct DenseIntegral {
    leaves: Vec<Leaf>,
    total: f64,
    evaluations: usize,
}

impl DenseIntegral {
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn lower(&self) -> f64 {
        self.leaves[0].a
    }

    pub fn upper(&self) -> f64 {
        self.leaves[self.leaves.len() - 1].b
    }

    /// `int_a^x f`, with `x` clamped to the integration range.
    pub fn cumulative(&self, x: f64) -> f64 {
        let k = self.leaves.partition_point(|l| l.b < x).min(self.leaves.len() - 1);
        let leaf = &self.leaves[k];
        leaf.before + leaf.partial(x)
    }
}

fn check_range(a: f64, b: f64, tol: f64, panels: usize) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidInterval(format!("quadrature range [{a}, {b}]")));
    }
    if !(tol > 0.0) || panels == 0 {
        return Err(Error::InvalidConfig("quadrature needs tol > 0 and at least one panel".into()));
    }
    Ok(())
}

/// Adaptive Simpson integral of scalar `f` over `[a, b]` that also keeps the
/// accepted leaves for [`DenseIntegral::cumulative`].
pub fn integrate_dense<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    panels: usize,
    max_evals: usize,
) -> Result<DenseIntegral> {
    check_range(a, b, tol, panels)?;
    let mut evals = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evals += 1;
        if evals > max_evals {
            return Err(Error::QuadratureNonConvergence(max_evals));
        }
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite(format!("integrand at {x}")))
        }
    };
    let width = (b - a) / panels as f64;
    let min_width = (b - a) * MIN_RELATIVE_WIDTH;
    let mut leaves = Vec::new();
    let mut fa = eval(a)?;
    for k in 0..panels {
        let lo = a + width * k as f64;
        let hi = if k + 1 == panels { b } else { a + width * (k + 1) as f64 };
        let fm = eval(0.5 * (lo + hi))?;
        let fb = eval(hi)?;
        // Depth-first, left to right, so leaves come out ordered.
        let mut stack = vec![(lo, hi, fa, fm, fb, tol * (hi - lo) / (b - a), 0usize)];
        while let Some((x0, x1, f0, fmid, f1, t, depth)) = stack.pop() {
            let m = 0.5 * (x0 + x1);
            let fl = eval(0.5 * (x0 + m))?;
            let fr = eval(0.5 * (m + x1))?;
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fmid + f1);
            let left = (m - x0) / 6.0 * (f0 + 4.0 * fl + fmid);
            let right = (x1 - m) / 6.0 * (fmid + 4.0 * fr + f1);
            if (left + right - whole).abs() <= 15.0 * t || x1 - x0 <= min_width || depth >= MAX_DEPTH {
                leaves.push(Leaf { a: x0, b: m, fa: f0, fm: fl, fb: fmid, before: 0.0 });
                leaves.push(Leaf { a: m, b: x1, fa: fmid, fm: fr, fb: f1, before: 0.0 });
            } else {
                stack.push((m, x1, fmid, fr, f1, 0.5 * t, depth + 1));
                stack.push((x0, m, f0, fl, fmid, 0.5 * t, depth + 1));
            }
        }
        fa = fb;
    }
    let mut acc = 0.0;
    for leaf in &mut leaves {
        leaf.before = acc;
        acc += leaf.integral();
    }
    Ok(DenseIntegral { leaves, total: acc, evaluations: evals })
}

/// Adaptive Simpson integral of a vector-valued `f` over `[a, b]`.
///
/// `f(x, out)` writes `n` components; the error test uses the largest
/// component.
pub fn integrate_vec<F: Fn(f64, &mut [f64])>(
    f: F,
    n: usize,
    a: f64,
    b: f64,
    tol: f64,
    panels: usize,
    max_evals: usize,
) -> Result<Vec<f64>> {
    check_range(a, b, tol, panels)?;
    let mut evals = 0usize;
    let mut eval = |x: f64| -> Result<Vec<f64>> {
        evals += 1;
        if evals > max_evals {
            return Err(Error::QuadratureNonConvergence(max_evals));
        }
        let mut y = vec![0.0; n];
        f(x, &mut y);
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(Error::NonFinite(format!("integrand at {x}")))
        }
    };
    let simpson = |h: f64, a: &[f64], m: &[f64], b: &[f64]| -> Vec<f64> {
        (0..a.len()).map(|i| h / 6.0 * (a[i] + 4.0 * m[i] + b[i])).collect()
    };
    let width = (b - a) / panels as f64;
    let min_width = (b - a) * MIN_RELATIVE_WIDTH;
    let mut total = vec![0.0; n];
    let mut fa = eval(a)?;
    for k in 0..panels {
        let lo = a + width * k as f64;
        let hi = if k + 1 == panels { b } else { a + width * (k + 1) as f64 };
        let fm = eval(0.5 * (lo + hi))?;
        let fb = eval(hi)?;
        let mut stack = vec![(lo, hi, fa.clone(), fm, fb.clone(), tol * (hi - lo) / (b - a), 0usize)];
        while let Some((x0, x1, f0, fmid, f1, t, depth)) = stack.pop() {
            let m = 0.5 * (x0 + x1);
            let fl = eval(0.5 * (x0 + m))?;
            let fr = eval(0.5 * (m + x1))?;
            let whole = simpson(x1 - x0, &f0, &fmid, &f1);
            let left = simpson(m - x0, &f0, &fl, &fmid);
            let right = simpson(x1 - m, &fmid, &fr, &f1);
            let err = (0..n)
                .map(|i| (left[i] + right[i] - whole[i]).abs())
                .fold(0.0, f64::max);
            if err <= 15.0 * t || x1 - x0 <= min_width || depth >= MAX_DEPTH {
                for i in 0..n {
                    total[i] += left[i] + right[i];
                }
            } else {
                stack.push((m, x1, fmid.clone(), fr, f1, 0.5 * t, depth + 1));
                stack.push((x0, m, f0, fl, fmid, 0.5 * t, depth + 1));
            }
        }
        fa = fb;
    }
    Ok(total)
}
