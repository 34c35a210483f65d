//! Gauss–Legendre quadrature, fixed and adaptive.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Integrate `f` over `[a, b]` with a single `n`-point rule.
pub fn integrate_fixed<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    apply(&f, a, b, &x, &w)
}

fn apply<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, x: &[f64], w: &[f64]) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    x.iter().zip(w).map(|(&xi, &wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, x: &[f64], w: &[f64]) -> Panel {
    let mid = 0.5 * (lo + hi);
    let whole = apply(f, lo, hi, x, w);
    let value = apply(f, lo, mid, x, w) + apply(f, mid, hi, x, w);
    Panel {
        lo,
        hi,
        value,
        error: (value - whole).abs(),
    }
}

/// Globally adaptive Gauss–Legendre. Each panel's error is estimated by
/// comparing the 20-point rule with the sum over its halves; the panel with
/// the largest error is split until the summed error drops below `tol` (or
/// below roundoff level relative to the integral).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_PANELS: usize = 20_000;
    if a == b {
        return 0.0;
    }
    let (x, w) = rule20();
    let mut heap = std::collections::BinaryHeap::new();
    let first = panel(&f, a, b, x, w);
    let mut error = first.error;
    let mut scale = first.value.abs();
    heap.push(first);
    for _ in 0..MAX_PANELS {
        if error <= tol.max(64.0 * f64::EPSILON * scale) {
            break;
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo.min(worst.hi) || mid >= worst.hi.max(worst.lo) {
            error -= worst.error;
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        let left = panel(&f, worst.lo, mid, x, w);
        let right = panel(&f, mid, worst.hi, x, w);
        error += left.error + right.error - worst.error;
        scale += left.value.abs() + right.value.abs() - worst.value.abs();
        heap.push(left);
        heap.push(right);
    }
    heap.iter().map(|p| p.value).sum()
}
