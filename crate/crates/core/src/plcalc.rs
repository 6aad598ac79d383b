//! Exact calculus of piecewise-linear functions on a closed interval.
//!
//! Every function here is a DCR function: a continuous piecewise-linear `f`
//! on `[x_0, x_m]` has bounded convexity equal to the total variation of its
//! slope sequence. The module provides that convexity, a canonical split
//! `f = p - q` into convex parts with a minimal control function, the lattice
//! operations, composition with increasing bijections, the mixing control for
//! finitely many envelopes, and the sequence-to-function construction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, precondition, Error, Result};
use crate::scalar::{cmp, max_of, Scalar};

/// Which one-sided derivative to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Continuous piecewise-linear function given by its breakpoints.
///
/// Between consecutive breakpoints the function is affine. A single
/// breakpoint denotes a constant on a one-point domain.
#[derive(Clone, PartialEq)]
pub struct PiecewiseLinear<S> {
    xs: Vec<S>,
    ys: Vec<S>,
}

impl<S: Scalar> fmt::Debug for PiecewiseLinear<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PL[")?;
        for (i, (x, y)) in self.xs.iter().zip(&self.ys).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({x}, {y})")?;
        }
        write!(f, "]")
    }
}

impl<S: Scalar> PiecewiseLinear<S> {
    pub fn new(xs: Vec<S>, ys: Vec<S>) -> Result<Self> {
        if xs.is_empty() {
            return invalid("a piecewise-linear function needs at least one breakpoint");
        }
        if xs.len() != ys.len() {
            return invalid(format!("{} breakpoints but {} values", xs.len(), ys.len()));
        }
        if let Some(i) = xs.windows(2).position(|w| w[0] >= w[1]) {
            return invalid(format!("breakpoints not strictly increasing at index {}", i + 1));
        }
        if !S::EXACT && xs.iter().chain(&ys).any(|v| !v.to_f64_lossy().is_finite()) {
            return invalid("non-finite breakpoint or value");
        }
        Ok(Self { xs, ys })
    }

    pub fn from_points<I: IntoIterator<Item = (S, S)>>(points: I) -> Result<Self> {
        let (xs, ys) = points.into_iter().unzip();
        Self::new(xs, ys)
    }

    /// `x ↦ slope·x + intercept` on `[a, b]`.
    pub fn affine(a: S, b: S, slope: S, intercept: S) -> Result<Self> {
        let ya = slope.clone() * a.clone() + intercept.clone();
        let yb = slope * b.clone() + intercept;
        if a == b {
            return Self::new(vec![a], vec![ya]);
        }
        Self::new(vec![a, b], vec![ya, yb])
    }

    pub fn constant(a: S, b: S, c: S) -> Result<Self> {
        Self::affine(a, b, S::zero(), c)
    }

    pub fn point(x: S, y: S) -> Self {
        Self { xs: vec![x], ys: vec![y] }
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.xs
    }

    pub fn values(&self) -> &[S] {
        &self.ys
    }

    pub fn vertices(&self) -> impl Iterator<Item = (&S, &S)> {
        self.xs.iter().zip(&self.ys)
    }

    pub fn start(&self) -> &S {
        &self.xs[0]
    }

    pub fn end(&self) -> &S {
        self.xs.last().expect("nonempty")
    }

    pub fn num_pieces(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn is_point(&self) -> bool {
        self.xs.len() == 1
    }

    pub fn contains(&self, x: &S) -> bool {
        x >= self.start() && x <= self.end()
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        self.start() == other.start() && self.end() == other.end()
    }

    /// Index `i` of the piece `[x_i, x_{i+1}]` containing `x`; the last piece for `x = x_m`.
    fn piece_index(&self, x: &S) -> usize {
        let n = self.xs.len();
        if n == 1 {
            return 0;
        }
        let pos = self.xs.partition_point(|b| b <= x);
        pos.saturating_sub(1).min(n - 2)
    }

    pub fn eval(&self, x: &S) -> Result<S> {
        if !self.contains(x) {
            return domain(format!(
                "{} outside [{}, {}]",
                x.repr(),
                self.start().repr(),
                self.end().repr()
            ));
        }
        Ok(self.eval_in(x))
    }

    /// Evaluation for arguments already known to lie in the domain.
    pub(crate) fn eval_in(&self, x: &S) -> S {
        if self.is_point() {
            return self.ys[0].clone();
        }
        let i = self.piece_index(x);
        let (x0, x1) = (&self.xs[i], &self.xs[i + 1]);
        let (y0, y1) = (&self.ys[i], &self.ys[i + 1]);
        if x == x0 {
            return y0.clone();
        }
        if x == x1 {
            return y1.clone();
        }
        y0.clone() + (y1.clone() - y0.clone()) * (x.clone() - x0.clone()) / (x1.clone() - x0.clone())
    }

    /// Evaluation with constant extension outside the domain.
    pub fn eval_extended(&self, x: &S) -> S {
        if x <= self.start() {
            self.ys[0].clone()
        } else if x >= self.end() {
            self.ys.last().expect("nonempty").clone()
        } else {
            self.eval_in(x)
        }
    }

    pub fn slope(&self, i: usize) -> S {
        (self.ys[i + 1].clone() - self.ys[i].clone()) / (self.xs[i + 1].clone() - self.xs[i].clone())
    }

    pub fn slopes(&self) -> Vec<S> {
        (0..self.num_pieces()).map(|i| self.slope(i)).collect()
    }

    /// Slope jumps `s_i - s_{i-1}` at the interior breakpoints `x_1 … x_{m-1}`.
    pub fn jumps(&self) -> Vec<S> {
        self.slopes().windows(2).map(|w| w[1].clone() - w[0].clone()).collect()
    }

    pub fn lipschitz(&self) -> S {
        self.slopes().into_iter().map(|s| s.abs()).fold(S::zero(), max_of)
    }

    pub fn is_convex(&self) -> bool {
        self.slopes().windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.slopes().iter().all(|s| s.is_positive())
    }

    /// Exact one-sided slope at `x`.
    pub fn one_sided_slope(&self, x: &S, side: Side) -> Result<S> {
        if !self.contains(x) {
            return domain(format!("{} outside the domain", x.repr()));
        }
        match side {
            Side::Right if x >= self.end() => domain("right slope requested at the right end of the domain"),
            Side::Left if x <= self.start() => domain("left slope requested at the left end of the domain"),
            Side::Right => Ok(self.slope(self.xs.partition_point(|b| b <= x) - 1)),
            Side::Left => Ok(self.slope(self.xs.partition_point(|b| b < x) - 1)),
        }
    }

    /// Insert the given abscissae (those inside the domain) as breakpoints.
    pub fn refine<'a, I: IntoIterator<Item = &'a S>>(&self, points: I) -> Self {
        let mut xs: Vec<S> = self.xs.clone();
        xs.extend(points.into_iter().filter(|p| self.contains(p)).cloned());
        xs.sort_by(cmp);
        xs.dedup();
        let ys = xs.iter().map(|x| self.eval_in(x)).collect();
        Self { xs, ys }
    }

    /// Drop interior breakpoints where the slope does not change.
    pub fn simplify(&self) -> Self {
        if self.xs.len() <= 2 {
            return self.clone();
        }
        let slopes = self.slopes();
        let mut xs = vec![self.xs[0].clone()];
        let mut ys = vec![self.ys[0].clone()];
        for i in 1..self.xs.len() - 1 {
            if slopes[i] != slopes[i - 1] {
                xs.push(self.xs[i].clone());
                ys.push(self.ys[i].clone());
            }
        }
        xs.push(self.end().clone());
        ys.push(self.ys.last().expect("nonempty").clone());
        Self { xs, ys }
    }

    pub fn restrict(&self, a: &S, b: &S) -> Result<Self> {
        if a > b {
            return domain(format!("empty interval [{}, {}]", a.repr(), b.repr()));
        }
        if !self.contains(a) || !self.contains(b) {
            return domain(format!(
                "[{}, {}] not inside [{}, {}]",
                a.repr(),
                b.repr(),
                self.start().repr(),
                self.end().repr()
            ));
        }
        if a == b {
            return Ok(Self::point(a.clone(), self.eval_in(a)));
        }
        let mut xs = vec![a.clone()];
        xs.extend(self.xs.iter().filter(|x| *x > a && *x < b).cloned());
        xs.push(b.clone());
        let ys = xs.iter().map(|x| self.eval_in(x)).collect();
        Ok(Self { xs, ys })
    }

    /// Extend by constants to `[a, b] ⊇ domain`.
    pub fn extend_constant(&self, a: &S, b: &S) -> Result<Self> {
        if a > self.start() || b < self.end() {
            return domain("extension interval must contain the domain");
        }
        let mut xs = Vec::with_capacity(self.xs.len() + 2);
        let mut ys = Vec::with_capacity(self.xs.len() + 2);
        if a < self.start() {
            xs.push(a.clone());
            ys.push(self.ys[0].clone());
        }
        xs.extend(self.xs.iter().cloned());
        ys.extend(self.ys.iter().cloned());
        if b > self.end() {
            xs.push(b.clone());
            ys.push(self.ys.last().expect("nonempty").clone());
        }
        Ok(Self { xs, ys })
    }

    /// Apply `x ↦ ax + b` to the abscissae (a > 0) and `y ↦ cy + d` to the values.
    pub fn affine_reparam(&self, a: &S, b: &S, c: &S, d: &S) -> Result<Self> {
        if !a.is_positive() {
            return precondition("abscissa scaling must be positive");
        }
        let xs = self.xs.iter().map(|x| a.clone() * x.clone() + b.clone()).collect();
        let ys = self.ys.iter().map(|y| c.clone() * y.clone() + d.clone()).collect();
        Self::new(xs, ys)
    }

    /// Partition convexity `K(f, D)` for a partition `D` of a subinterval of the domain.
    pub fn partition_convexity(&self, partition: &[S]) -> Result<S> {
        if partition.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("partition must be strictly increasing");
        }
        let values = partition.iter().map(|x| self.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(partition_convexity_of_samples(partition, &values))
    }

    pub fn map_scalar<T: Scalar>(&self) -> PiecewiseLinear<T> {
        PiecewiseLinear {
            xs: self.xs.iter().map(T::convert).collect(),
            ys: self.ys.iter().map(T::convert).collect(),
        }
    }

    pub fn add(&self, g: &Self) -> Result<Self> {
        combine(CombineOp::Add, self, Operand::Function(g))
    }

    pub fn sub(&self, g: &Self) -> Result<Self> {
        combine(CombineOp::Sub, self, Operand::Function(g))
    }

    pub fn scale(&self, c: &S) -> Self {
        Self { xs: self.xs.clone(), ys: self.ys.iter().map(|y| y.clone() * c.clone()).collect() }
    }

    pub fn abs(&self) -> Self {
        combine(CombineOp::Abs, self, Operand::None).expect("abs is total")
    }

    pub fn max(&self, g: &Self) -> Result<Self> {
        combine(CombineOp::Max, self, Operand::Function(g))
    }

    pub fn min(&self, g: &Self) -> Result<Self> {
        combine(CombineOp::Min, self, Operand::Function(g))
    }
}

/// `K(f, D)` from sampled values: the summed absolute changes of consecutive
/// difference quotients.
pub fn partition_convexity_of_samples<S: Scalar>(xs: &[S], ys: &[S]) -> S {
    let quotients: Vec<S> = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[1].clone() - y[0].clone()) / (x[1].clone() - x[0].clone()))
        .collect();
    quotients
        .windows(2)
        .fold(S::zero(), |acc, w| acc + (w[1].clone() - w[0].clone()).abs())
}

/// Convexity `K_a^b f`: the supremum of `K(f, D)` over partitions of `[a, b]`.
///
/// For piecewise-linear data the supremum is attained by the breakpoint
/// partition, so the value is the total absolute slope jump inside `[a, b]`.
pub fn convexity<S: Scalar>(f: &PiecewiseLinear<S>, a: &S, b: &S) -> Result<S> {
    let r = f.restrict(a, b)?;
    Ok(r.jumps().into_iter().fold(S::zero(), |acc, j| acc + j.abs()))
}

/// Decomposition `f = p - q` with convex `p`, `q`, and the matching control.
#[derive(Clone, Debug, PartialEq)]
pub struct DcSplit<S: Scalar> {
    pub p: PiecewiseLinear<S>,
    pub q: PiecewiseLinear<S>,
    pub control: PiecewiseLinear<S>,
}

fn integrate_slopes<S: Scalar>(xs: &[S], y0: S, slopes: &[S]) -> PiecewiseLinear<S> {
    let mut ys = Vec::with_capacity(xs.len());
    ys.push(y0);
    for (i, s) in slopes.iter().enumerate() {
        let prev = ys[i].clone();
        ys.push(prev + s.clone() * (xs[i + 1].clone() - xs[i].clone()));
    }
    PiecewiseLinear { xs: xs.to_vec(), ys }
}

/// Split `f` into convex parts gathering its positive and negative slope jumps.
///
/// `p(x_0) = f(x_0)` with the initial slope of `f`; `q(x_0) = 0` with initial
/// slope 0. The control `p + q - (affine part)` has jumps `|jump_f|`, starts at
/// 0 with slope 0, and is the smallest convex function with `control ± f`
/// convex up to affine terms.
pub fn dc_split<S: Scalar>(f: &PiecewiseLinear<S>) -> DcSplit<S> {
    let slopes = f.slopes();
    if slopes.is_empty() {
        let zero = PiecewiseLinear::point(f.xs[0].clone(), S::zero());
        return DcSplit { p: f.clone(), q: zero.clone(), control: zero };
    }
    let jumps = f.jumps();
    let mut p_slopes = vec![slopes[0].clone()];
    let mut q_slopes = vec![S::zero()];
    let mut c_slopes = vec![S::zero()];
    for j in &jumps {
        let pos = max_of(j.clone(), S::zero());
        let neg = max_of(-j.clone(), S::zero());
        let (lp, lq, lc) = (p_slopes.last().unwrap().clone(), q_slopes.last().unwrap().clone(), c_slopes.last().unwrap().clone());
        p_slopes.push(lp + pos);
        q_slopes.push(lq + neg);
        c_slopes.push(lc + j.abs());
    }
    DcSplit {
        p: integrate_slopes(&f.xs, f.ys[0].clone(), &p_slopes),
        q: integrate_slopes(&f.xs, S::zero(), &q_slopes),
        control: integrate_slopes(&f.xs, S::zero(), &c_slopes),
    }
}

/// Whether `phi` is convex and both `phi + f`, `phi - f` are convex.
pub fn is_control<S: Scalar>(phi: &PiecewiseLinear<S>, f: &PiecewiseLinear<S>) -> Result<bool> {
    Ok(phi.is_convex() && phi.add(f)?.is_convex() && phi.sub(f)?.is_convex())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineOp {
    Add,
    Sub,
    Scale,
    Abs,
    Max,
    Min,
}

/// Second argument of [`combine`].
#[derive(Clone, Debug)]
pub enum Operand<'a, S: Scalar> {
    Function(&'a PiecewiseLinear<S>),
    Scalar(S),
    None,
}

fn merged_breakpoints<S: Scalar>(f: &PiecewiseLinear<S>, g: &PiecewiseLinear<S>) -> Vec<S> {
    let mut xs: Vec<S> = f.xs.iter().chain(&g.xs).cloned().collect();
    xs.sort_by(cmp);
    xs.dedup();
    xs
}

/// Insert the exact zero crossings of `d` (values on `xs`) between sign changes.
fn with_crossings<S: Scalar>(xs: &[S], d: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        out.push(xs[i].clone());
        if i + 1 < xs.len() {
            let (d0, d1) = (&d[i], &d[i + 1]);
            if (d0.is_positive() && d1.is_negative()) || (d0.is_negative() && d1.is_positive()) {
                let t = d0.clone() / (d0.clone() - d1.clone());
                out.push(xs[i].clone() + t * (xs[i + 1].clone() - xs[i].clone()));
            }
        }
    }
    out
}

/// Exact pointwise combination of piecewise-linear functions.
pub fn combine<S: Scalar>(op: CombineOp, f: &PiecewiseLinear<S>, g: Operand<'_, S>) -> Result<PiecewiseLinear<S>> {
    match (op, g) {
        (CombineOp::Abs, _) => {
            let xs = with_crossings(&f.xs, &f.ys);
            let ys = xs.iter().map(|x| f.eval_in(x).abs()).collect();
            Ok(PiecewiseLinear { xs, ys })
        }
        (CombineOp::Scale, Operand::Scalar(c)) => Ok(f.scale(&c)),
        (CombineOp::Add, Operand::Scalar(c)) => {
            Ok(PiecewiseLinear { xs: f.xs.clone(), ys: f.ys.iter().map(|y| y.clone() + c.clone()).collect() })
        }
        (CombineOp::Sub, Operand::Scalar(c)) => {
            Ok(PiecewiseLinear { xs: f.xs.clone(), ys: f.ys.iter().map(|y| y.clone() - c.clone()).collect() })
        }
        (CombineOp::Max | CombineOp::Min, Operand::Scalar(c)) => {
            let g = PiecewiseLinear::constant(f.start().clone(), f.end().clone(), c)?;
            combine(op, f, Operand::Function(&g))
        }
        (_, Operand::Function(g)) => {
            if !f.same_domain(g) {
                return domain(format!(
                    "domains differ: [{}, {}] vs [{}, {}]",
                    f.start().repr(),
                    f.end().repr(),
                    g.start().repr(),
                    g.end().repr()
                ));
            }
            let xs = merged_breakpoints(f, g);
            match op {
                CombineOp::Add | CombineOp::Sub => {
                    let ys = xs
                        .iter()
                        .map(|x| {
                            let (a, b) = (f.eval_in(x), g.eval_in(x));
                            if op == CombineOp::Add {
                                a + b
                            } else {
                                a - b
                            }
                        })
                        .collect();
                    Ok(PiecewiseLinear { xs, ys })
                }
                CombineOp::Max | CombineOp::Min => {
                    let d: Vec<S> = xs.iter().map(|x| f.eval_in(x) - g.eval_in(x)).collect();
                    let xs = with_crossings(&xs, &d);
                    let ys = xs
                        .iter()
                        .map(|x| {
                            let (a, b) = (f.eval_in(x), g.eval_in(x));
                            match (op == CombineOp::Max, a >= b) {
                                (true, true) | (false, false) => a,
                                _ => b,
                            }
                        })
                        .collect();
                    Ok(PiecewiseLinear { xs, ys })
                }
                CombineOp::Scale => precondition("scale takes a scalar operand"),
                CombineOp::Abs => unreachable!(),
            }
        }
        (op, _) => precondition(format!("{op:?} needs a second operand")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComposeMode {
    Compose,
    Invert,
}

fn require_increasing<S: Scalar>(phi: &PiecewiseLinear<S>) -> Result<()> {
    if let Some(i) = phi.slopes().iter().position(|s| !s.is_positive()) {
        return precondition(format!("map is not strictly increasing on piece {i}"));
    }
    Ok(())
}

/// Inverse of a strictly increasing piecewise-linear bijection.
pub fn invert<S: Scalar>(phi: &PiecewiseLinear<S>) -> Result<PiecewiseLinear<S>> {
    require_increasing(phi)?;
    Ok(PiecewiseLinear { xs: phi.ys.clone(), ys: phi.xs.clone() })
}

/// `f ∘ φ` for a strictly increasing `φ` whose range lies in the domain of `f`.
pub fn compose<S: Scalar>(f: &PiecewiseLinear<S>, phi: &PiecewiseLinear<S>) -> Result<PiecewiseLinear<S>> {
    let inv = invert(phi)?;
    let (lo, hi) = (&phi.ys[0], phi.ys.last().expect("nonempty"));
    if !f.contains(lo) || !f.contains(hi) {
        return domain("range of the inner map is not inside the domain of the outer function");
    }
    let mut xs = phi.xs.clone();
    xs.extend(f.xs.iter().filter(|y| *y > lo && *y < hi).map(|y| inv.eval_in(y)));
    xs.sort_by(cmp);
    xs.dedup();
    let ys = xs.iter().map(|x| f.eval_in(&phi.eval_in(x))).collect();
    Ok(PiecewiseLinear { xs, ys })
}

/// Dispatch for [`compose`] and [`invert`]; `f` is ignored when inverting.
pub fn compose_invert<S: Scalar>(
    mode: ComposeMode,
    f: &PiecewiseLinear<S>,
    phi: &PiecewiseLinear<S>,
) -> Result<PiecewiseLinear<S>> {
    match mode {
        ComposeMode::Compose => compose(f, phi),
        ComposeMode::Invert => invert(phi),
    }
}

/// Control function for every continuous selection of the given envelopes.
///
/// With `c_i` the minimal control of `F_i`, returns
/// `φ = Σ_{i,j} (c_i + c_j + ½|F_i − F_j|)`.
pub fn mix_control<S: Scalar>(envelopes: &[PiecewiseLinear<S>]) -> Result<PiecewiseLinear<S>> {
    let Some(first) = envelopes.first() else {
        return precondition("mix_control needs at least one envelope");
    };
    if let Some(bad) = envelopes.iter().position(|e| !e.same_domain(first)) {
        return domain(format!("envelope {bad} has a different domain"));
    }
    let controls: Vec<_> = envelopes.iter().map(|e| dc_split(e).control).collect();
    let half = S::half();
    let mut phi = PiecewiseLinear::constant(first.start().clone(), first.end().clone(), S::zero())?;
    for i in 0..envelopes.len() {
        for j in 0..envelopes.len() {
            let h = controls[i].add(&controls[j])?.add(&envelopes[i].sub(&envelopes[j])?.abs().scale(&half))?;
            phi = phi.add(&h)?;
        }
    }
    Ok(phi.simplify())
}

/// Difference-quotient control inequality at `z` with steps `h`, `k`.
///
/// Returns whether `|Δ_k f(z) − Δ_{−h} f(z)| ≤ Δ_k φ(z) − Δ_{−h} φ(z)`.
pub fn control_gap_check<S: Scalar>(
    f: &PiecewiseLinear<S>,
    phi: &PiecewiseLinear<S>,
    z: &S,
    h: &S,
    k: &S,
) -> Result<bool> {
    if !h.is_positive() || !k.is_positive() {
        return precondition("steps h and k must be positive");
    }
    let left = z.clone() - h.clone();
    let right = z.clone() + k.clone();
    let second = |g: &PiecewiseLinear<S>| -> Result<S> {
        let gz = g.eval(z)?;
        let fwd = (g.eval(&right)? - gz.clone()) / k.clone();
        let bwd = (gz - g.eval(&left)?) / h.clone();
        Ok(fwd - bwd)
    };
    Ok(second(f)?.abs() <= second(phi)?)
}

/// Result of [`sequence_to_function`].
#[derive(Clone, Debug)]
pub struct SequenceFunction<S: Scalar> {
    /// Breakpoints `0, a_{N+1}, …, a_1`.
    pub function: PiecewiseLinear<S>,
    /// Left slopes `f'_-(a_n)` for `n = 1..N`.
    pub slopes: Vec<S>,
    /// Variation of `f'_-` over `(a_{N+1}, a_1)`.
    pub derivative_variation: S,
    /// `Σ_{n ≤ N} |f'_-(a_n)|`.
    pub slope_sum: S,
    /// `Σ_{n ≤ N} (|A_n| / (⅔ a_n) + |A_{n+1}| / (2 a_{n+1}))`.
    pub bound: S,
    /// `a_n − a_{n+1} ≥ ⅔ a_n ≥ 2 a_{n+1}` for every `n ≤ N`.
    pub spacing_inequalities_hold: bool,
    /// Always true: at finite `N` the infinite tail is replaced by one affine
    /// piece to `(0, 0)`, so the DCR property of the limit is only witnessed
    /// by the bounded partial sums.
    pub truncated: bool,
}

impl<S: Scalar> SequenceFunction<S> {
    pub fn variation_within_bound(&self) -> bool {
        self.derivative_variation <= self.bound
    }
}

/// Piecewise-linear function through `(a_n, A_n)`, `n = 1..N+1`, closed by `f(0) = 0`.
///
/// Requires `0 < a_{n+1} ≤ a_n / 3` for `n ≤ N`. Both slices are indexed from
/// zero (`a[0]` is `a_1`) and must hold at least `N + 1` entries.
pub fn sequence_to_function<S: Scalar>(a: &[S], values: &[S], n: usize) -> Result<SequenceFunction<S>> {
    if n == 0 {
        return precondition("N must be at least 1");
    }
    if a.len() < n + 1 || values.len() < n + 1 {
        return precondition(format!("need {} terms of each sequence", n + 1));
    }
    let three = S::from_int(3);
    for i in 0..=n {
        if !a[i].is_positive() {
            return precondition(format!("a_{} is not positive", i + 1));
        }
    }
    for i in 0..n {
        if a[i + 1].clone() * three.clone() > a[i] {
            return precondition(format!("ratio condition a_{{n+1}} <= a_n/3 fails at n = {}", i + 1));
        }
    }
    let mut xs = vec![S::zero()];
    let mut ys = vec![S::zero()];
    for i in (0..=n).rev() {
        xs.push(a[i].clone());
        ys.push(values[i].clone());
    }
    let function = PiecewiseLinear::new(xs, ys)?;
    let slopes: Vec<S> = (0..n)
        .map(|i| (values[i].clone() - values[i + 1].clone()) / (a[i].clone() - a[i + 1].clone()))
        .collect();
    let derivative_variation =
        slopes.windows(2).fold(S::zero(), |acc, w| acc + (w[0].clone() - w[1].clone()).abs());
    let slope_sum = slopes.iter().fold(S::zero(), |acc, s| acc + s.abs());
    let two_thirds = S::frac(2, 3);
    let two = S::from_int(2);
    let bound = (0..n).fold(S::zero(), |acc, i| {
        acc + values[i].abs() / (two_thirds.clone() * a[i].clone())
            + values[i + 1].abs() / (two.clone() * a[i + 1].clone())
    });
    let spacing_inequalities_hold = (0..n).all(|i| {
        let gap = a[i].clone() - a[i + 1].clone();
        let mid = two_thirds.clone() * a[i].clone();
        gap >= mid && mid >= two.clone() * a[i + 1].clone()
    });
    Ok(SequenceFunction {
        function,
        slopes,
        derivative_variation,
        slope_sum,
        bound,
        spacing_inequalities_hold,
        truncated: true,
    })
}

#[derive(Serialize, Deserialize)]
struct RawPl {
    breakpoints: Vec<String>,
    values: Vec<String>,
}

impl<S: Scalar> Serialize for PiecewiseLinear<S> {
    fn serialize<Ser: serde::Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        RawPl { breakpoints: self.xs.iter().map(S::repr).collect(), values: self.ys.iter().map(S::repr).collect() }
            .serialize(serializer)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for PiecewiseLinear<S> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPl::deserialize(deserializer)?;
        let parse = |v: &[String]| -> std::result::Result<Vec<S>, D::Error> {
            v.iter()
                .map(|s| S::parse_repr(s).ok_or_else(|| serde::de::Error::custom(format!("bad number {s:?}"))))
                .collect()
        };
        PiecewiseLinear::new(parse(&raw.breakpoints)?, parse(&raw.values)?)
            .map_err(|e: Error| serde::de::Error::custom(e.to_string()))
    }
}
