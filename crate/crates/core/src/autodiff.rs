//! Tape-based reverse-mode differentiation over scalars.
//!
//! Values are recorded in evaluation order; `backward` walks the tape once
//! in reverse. N-ary `sum` and `dot` keep the tape short for the wide
//! selector mixtures used by the NAND-array trainer.

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    /// Derivative `c`; any additive constant is folded into the value.
    Affine(Var, f64),
    Exp(Var),
    Ln(Var),
    Relu(Var),
    Abs(Var),
    Powf(Var, f64),
    Clamp(Var, f64, f64),
    Sum(Vec<Var>),
    Dot(Vec<(Var, Var)>),
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    vals: Vec<f64>,
    ops: Vec<Op>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn val(&self, v: Var) -> f64 {
        self.vals[v.0]
    }

    fn push(&mut self, val: f64, op: Op) -> Var {
        self.vals.push(val);
        self.ops.push(op);
        Var(self.vals.len() - 1)
    }

    /// Independent input (parameter or constant).
    pub fn var(&mut self, x: f64) -> Var {
        self.push(x, Op::Leaf)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) + self.val(b), Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) - self.val(b), Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) * self.val(b), Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.push(self.val(a) / self.val(b), Op::Div(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.push(-self.val(a), Op::Neg(a))
    }

    /// `a * c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.push(self.val(a) * c, Op::Affine(a, c))
    }

    /// `c - a`.
    pub fn rsub_const(&mut self, c: f64, a: Var) -> Var {
        let n = self.neg(a);
        self.add_const(n, c)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.push(self.val(a) + c, Op::Affine(a, 1.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.push(self.val(a).exp(), Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.push(self.val(a).ln(), Op::Ln(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.push(self.val(a).max(0.0), Op::Relu(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.push(self.val(a).abs(), Op::Abs(a))
    }

    pub fn powf(&mut self, a: Var, e: f64) -> Var {
        self.push(self.val(a).powf(e), Op::Powf(a, e))
    }

    /// Clamp to `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.push(self.val(a).clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.val(x)).sum();
        self.push(v, Op::Sum(xs.to_vec()))
    }

    pub fn mean(&mut self, xs: &[Var]) -> Var {
        let s = self.sum(xs);
        self.scale(s, 1.0 / xs.len().max(1) as f64)
    }

    pub fn dot(&mut self, xs: &[Var], ys: &[Var]) -> Var {
        assert_eq!(xs.len(), ys.len(), "dot of unequal lengths");
        let pairs: Vec<(Var, Var)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        let v = pairs.iter().map(|&(a, b)| self.val(a) * self.val(b)).sum();
        self.push(v, Op::Dot(pairs))
    }

    /// Numerically stable `softmax(xs / tau)`.
    pub fn softmax(&mut self, xs: &[Var], tau: f64) -> Vec<Var> {
        let m = xs.iter().map(|&x| self.val(x)).fold(f64::NEG_INFINITY, f64::max);
        let es: Vec<Var> = xs
            .iter()
            .map(|&x| {
                let z = self.scale(x, 1.0 / tau);
                let z = self.add_const(z, -m / tau);
                self.exp(z)
            })
            .collect();
        let s = self.sum(&es);
        es.into_iter().map(|e| self.div(e, s)).collect()
    }

    /// Adjoints of every tape entry with respect to `out`.
    pub fn backward(&self, out: Var) -> Vec<f64> {
        let mut g = vec![0.0; self.vals.len()];
        g[out.0] = 1.0;
        for i in (0..=out.0).rev() {
            let gi = g[i];
            if gi == 0.0 {
                continue;
            }
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    g[a.0] += gi;
                    g[b.0] += gi;
                }
                Op::Sub(a, b) => {
                    g[a.0] += gi;
                    g[b.0] -= gi;
                }
                Op::Mul(a, b) => {
                    g[a.0] += gi * self.vals[b.0];
                    g[b.0] += gi * self.vals[a.0];
                }
                Op::Div(a, b) => {
                    let bv = self.vals[b.0];
                    g[a.0] += gi / bv;
                    g[b.0] -= gi * self.vals[a.0] / (bv * bv);
                }
                Op::Neg(a) => g[a.0] -= gi,
                Op::Affine(a, c) => g[a.0] += gi * c,
                Op::Exp(a) => g[a.0] += gi * self.vals[i],
                Op::Ln(a) => g[a.0] += gi / self.vals[a.0],
                Op::Relu(a) => {
                    if self.vals[a.0] > 0.0 {
                        g[a.0] += gi;
                    }
                }
                Op::Abs(a) => {
                    let x = self.vals[a.0];
                    if x != 0.0 {
                        g[a.0] += gi * x.signum();
                    }
                }
                Op::Powf(a, e) => {
                    let x = self.vals[a.0];
                    if *e != 0.0 {
                        g[a.0] += gi * e * x.powf(e - 1.0);
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.vals[a.0];
                    if x >= *lo && x <= *hi {
                        g[a.0] += gi;
                    }
                }
                Op::Sum(xs) => {
                    for x in xs {
                        g[x.0] += gi;
                    }
                }
                Op::Dot(pairs) => {
                    for &(a, b) in pairs {
                        g[a.0] += gi * self.vals[b.0];
                        g[b.0] += gi * self.vals[a.0];
                    }
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn elementary_derivatives() {
        type Build = fn(&mut Tape, Var) -> Var;
        let cases: Vec<(Build, fn(f64) -> f64, f64)> = vec![
            (|t, x| t.exp(x), f64::exp, 0.3),
            (|t, x| t.ln(x), f64::ln, 1.7),
            (|t, x| t.powf(x, 2.5), |x| x.powf(2.5), 1.2),
            (|t, x| t.abs(x), f64::abs, -0.4),
            (|t, x| t.relu(x), |x| x.max(0.0), 0.8),
            (
                |t, x| {
                    let y = t.mul(x, x);
                    let z = t.add_const(y, 3.0);
                    t.div(x, z)
                },
                |x| x / (x * x + 3.0),
                0.9,
            ),
            (|t, x| t.rsub_const(1.0, x), |x| 1.0 - x, 0.25),
        ];
        for (build, f, x0) in cases {
            let mut t = Tape::new();
            let x = t.var(x0);
            let y = build(&mut t, x);
            assert!((t.val(y) - f(x0)).abs() < 1e-12);
            let g = t.backward(y);
            assert!((g[x.index()] - fd(f, x0)).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_sums_to_one_and_differentiates() {
        let mut t = Tape::new();
        let xs: Vec<Var> = [0.1, -2.0, 3.0].iter().map(|&v| t.var(v)).collect();
        let p = t.softmax(&xs, 0.7);
        let total: f64 = p.iter().map(|&v| t.val(v)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let g = t.backward(p[0]);
        let f = |a: f64| {
            let e = [(a / 0.7).exp(), (-2.0f64 / 0.7).exp(), (3.0f64 / 0.7).exp()];
            e[0] / e.iter().sum::<f64>()
        };
        assert!((g[xs[0].index()] - fd(f, 0.1)).abs() < 1e-6);
    }

    #[test]
    fn dot_and_sum() {
        let mut t = Tape::new();
        let a = t.var(2.0);
        let b = t.var(3.0);
        let d = t.dot(&[a, b], &[b, a]);
        let s = t.sum(&[d, a]);
        assert_eq!(t.val(s), 14.0);
        let g = t.backward(s);
        assert_eq!(g[a.index()], 2.0 * 3.0 + 1.0);
        assert_eq!(g[b.index()], 2.0 * 2.0);
    }
}
