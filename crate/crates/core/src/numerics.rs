//! Small numerical utilities shared by the constitutive laws and the CFL budgets.

/// Sup of `f` over `[a, b]`: dense scan followed by golden-section refinement
/// of the best bracket down to a width of `1e-12`.
///
/// Returns `(argmax, max)`.
pub fn maximize(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    const SAMPLES: usize = 4096;
    if b <= a {
        return (a, f(a));
    }
    let h = (b - a) / SAMPLES as f64;
    let mut best = (a, f(a));
    let mut best_i = 0;
    for i in 1..=SAMPLES {
        let x = if i == SAMPLES { b } else { a + i as f64 * h };
        let y = f(x);
        if y > best.1 {
            best = (x, y);
            best_i = i;
        }
    }
    let mut lo = a + best_i.saturating_sub(1) as f64 * h;
    let mut hi = (a + (best_i + 1) as f64 * h).min(b);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    for (x, y) in [(x1, f1), (x2, f2)] {
        if y > best.1 {
            best = (x, y);
        }
    }
    best
}

/// Tabulated primitive `P(x) = ∫_lo^x g(s) ds` of a smooth integrand `g`.
///
/// Node values come from per-cell composite Simpson sums refined until two
/// successive Richardson levels agree to `1e-13` relative. Between nodes the
/// primitive is evaluated by cubic Hermite interpolation with the exact
/// slopes `g(x_i)`, so both the primitive and its derivative stay accurate.
/// `P = 0` below `lo`; above `hi` it is continued linearly.
#[derive(Debug, Clone)]
pub struct PrimitiveTable {
    lo: f64,
    hi: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PrimitiveTable {
    pub fn build(integrand: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> Self {
        assert!(nodes >= 2 && hi > lo, "degenerate primitive table");
        let step = (hi - lo) / (nodes - 1) as f64;
        let node = |i: usize| if i == nodes - 1 { hi } else { lo + i as f64 * step };
        let mut values = Vec::with_capacity(nodes);
        let mut slopes = Vec::with_capacity(nodes);
        let mut acc = 0.0;
        values.push(0.0);
        slopes.push(integrand(lo));
        for i in 1..nodes {
            acc += simpson_refined(&integrand, node(i - 1), node(i));
            values.push(acc);
            slopes.push(integrand(node(i)));
        }
        Self {
            lo,
            hi,
            step,
            values,
            slopes,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        let n = self.values.len();
        if x >= self.hi {
            return self.values[n - 1] + self.slopes[n - 1] * (x - self.hi);
        }
        let t = (x - self.lo) / self.step;
        let i = (t as usize).min(n - 2);
        let s = t - i as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[i]
            + h10 * self.step * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * self.step * self.slopes[i + 1]
    }

    /// `P(hi)`.
    pub fn total(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

fn simpson_refined(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mut panels = 2;
    let mut coarse = simpson(f, a, b, panels);
    loop {
        panels *= 2;
        let fine = simpson(f, a, b, panels);
        let gap = fine - coarse;
        if gap.abs() <= 1e-13 * fine.abs() || panels >= 1 << 12 {
            return fine + gap / 15.0;
        }
        coarse = fine;
    }
}
