//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Neg, Sub};

use twofloat::TwoFloat;

/// Minimal scalar interface so the reference loss runs in f64 or
/// double-double arithmetic.
pub trait Scalar:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn of(v: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Double-double scalar. Addition and multiplication come from `twofloat`;
/// its division, `exp` and `ln` are only good to about f64 precision, so
/// those are done here.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Dd(pub TwoFloat);

impl Dd {
    pub fn hi(self) -> f64 {
        self.0.hi()
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        Dd(self.0 + rhs.0)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        Dd(self.0 - rhs.0)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        Dd(self.0 * rhs.0)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd(-self.0)
    }
}

impl Div for Dd {
    type Output = Dd;
    /// Long division: two f64 quotient digits plus a residual correction.
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi() / rhs.hi();
        let r = self - rhs * Dd::of(q1);
        let q2 = r.hi() / rhs.hi();
        let r = r - rhs * Dd::of(q2);
        let q3 = r.hi() / rhs.hi();
        Dd(TwoFloat::new_add(q1, q2) + TwoFloat::from(q3))
    }
}

/// ln 2 split into a double-double pair.
const LN2_HI: f64 = std::f64::consts::LN_2;
const LN2_LO: f64 = 2.319_046_813_846_299_6e-17;

pub fn dd_exp(x: Dd) -> Dd {
    let k = (x.hi() / LN2_HI).round();
    let ln2 = Dd(TwoFloat::new_add(LN2_HI, LN2_LO));
    // Reduce to |r| <= ln2/2, then by 2^-10 so the series converges fast.
    let r = (x - ln2 * Dd::of(k)) * Dd::of(1.0 / 1024.0);
    let mut term = Dd::of(1.0);
    let mut sum = Dd::of(1.0);
    for j in 1..=12 {
        term = term * r / Dd::of(j as f64);
        sum = sum + term;
    }
    for _ in 0..10 {
        sum = sum * sum;
    }
    sum * Dd::of(2f64.powi(k as i32))
}

/// Newton steps on `dd_exp`.
pub fn dd_ln(x: Dd) -> Dd {
    let mut y = Dd::of(x.hi().ln());
    for _ in 0..2 {
        y = y + x * dd_exp(-y) - Dd::of(1.0);
    }
    y
}

pub fn dd_sqrt(x: Dd) -> Dd {
    let y = Dd::of(x.hi().sqrt());
    // One Newton step doubles the precision.
    y + (x - y * y) / (Dd::of(2.0) * y)
}

impl Scalar for Dd {
    fn of(v: f64) -> Self {
        Dd(TwoFloat::from(v))
    }
    fn exp(self) -> Self {
        dd_exp(self)
    }
    fn ln(self) -> Self {
        dd_ln(self)
    }
    fn sqrt(self) -> Self {
        dd_sqrt(self)
    }
    fn to_f64(self) -> f64 {
        self.0.hi() + self.0.lo()
    }
}

/// Dense network description: layer widths plus whether the last layer is
/// a softmax (otherwise linear). Hidden layers use leaky ReLU, slope 0.01.
#[derive(Clone, Debug)]
pub struct RefMlp {
    pub dims: Vec<usize>,
}

impl RefMlp {
    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Weights are stored row-major (out x in) followed by the bias, layer
    /// after layer. Returns pre-softmax outputs.
    pub fn forward<T: Scalar>(&self, params: &[T], input: &[T]) -> Vec<T> {
        let mut offset = 0;
        let mut a = input.to_vec();
        let layers = self.dims.len() - 1;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let bias = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut z = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let mut acc = bias[o];
                for i in 0..fan_in {
                    acc = acc + weights[o * fan_in + i] * a[i];
                }
                z.push(acc);
            }
            if l + 1 < layers {
                for v in z.iter_mut() {
                    if *v < T::of(0.0) {
                        *v = *v * T::of(0.01);
                    }
                }
            }
            a = z;
        }
        a
    }
}

/// Reference channel autoencoder loss.
pub struct RefCae {
    pub k: u32,
    pub n: usize,
    pub encoder: RefMlp,
    pub decoder: RefMlp,
    pub per_example: bool,
}

/// One pilot: zero-based message and the interleaved noise reals.
pub struct RefSample {
    pub message: usize,
    pub noise: Vec<f64>,
}

impl RefCae {
    pub fn new(k: u32, n: usize, hidden: usize, per_example: bool) -> Self {
        let m = 1usize << k;
        Self {
            k,
            n,
            encoder: RefMlp {
                dims: vec![m, hidden, hidden, 2 * n],
            },
            decoder: RefMlp {
                dims: vec![2 * n, hidden, hidden, hidden, m],
            },
            per_example,
        }
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Mean softmax cross-entropy of the decoded pilots.
    pub fn loss<T: Scalar>(&self, params: &[T], samples: &[RefSample], h: &[f64]) -> T {
        let m = 1usize << self.k;
        let split = self.encoder.param_count();
        let (enc, dec) = params.split_at(split);
        let raw: Vec<Vec<T>> = samples
            .iter()
            .map(|s| {
                let mut onehot = vec![T::of(0.0); m];
                onehot[s.message] = T::of(1.0);
                self.encoder.forward(enc, &onehot)
            })
            .collect();
        let energy = |x: &[T]| x.iter().fold(T::of(0.0), |acc, &v| acc + v * v);
        let floor = |p: T| if p < T::of(1e-12) { T::of(1e-12) } else { p };
        let batch_power = floor(
            raw.iter().fold(T::of(0.0), |acc, x| acc + energy(x)) / T::of((samples.len() * self.n) as f64),
        );
        let mut total = T::of(0.0);
        for (s, x) in samples.iter().zip(&raw) {
            let p = if self.per_example {
                floor(energy(x) / T::of(self.n as f64))
            } else {
                batch_power
            };
            let scale = T::of(1.0) / p.sqrt();
            let mut y = Vec::with_capacity(2 * self.n);
            for u in 0..self.n {
                let (xr, xi) = (x[2 * u] * scale, x[2 * u + 1] * scale);
                let (hr, hi) = (T::of(h[2 * u]), T::of(h[2 * u + 1]));
                y.push(hr * xr - hi * xi + T::of(s.noise[2 * u]));
                y.push(hr * xi + hi * xr + T::of(s.noise[2 * u + 1]));
            }
            let logits = self.decoder.forward(dec, &y);
            let mut max = logits[0];
            for &v in &logits {
                if v > max {
                    max = v;
                }
            }
            let sum = logits.iter().fold(T::of(0.0), |acc, &v| acc + (v - max).exp());
            total = total + (sum.ln() + max - logits[s.message]);
        }
        total / T::of(samples.len() as f64)
    }

    /// Central difference of the double-double loss along coordinate `i`.
    ///
    /// The step is shrunk until two successive estimates agree, so a leaky
    /// ReLU kink inside the stencil does not corrupt the result. The final
    /// value is Richardson-extrapolated.
    pub fn fd_coordinate(&self, params: &[f64], samples: &[RefSample], h: &[f64], i: usize) -> f64 {
        let base: Vec<Dd> = params.iter().map(|&v| Dd::of(v)).collect();
        let diff = |step: f64| -> Dd {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[i] = plus[i] + Dd::of(step);
            minus[i] = minus[i] - Dd::of(step);
            (self.loss(&plus, samples, h) - self.loss(&minus, samples, h)) / Dd::of(2.0 * step)
        };
        let mut step = 1e-6;
        let mut coarse = diff(step);
        for _ in 0..8 {
            let fine = diff(step / 2.0);
            let gap = (fine - coarse).to_f64().abs();
            if gap <= 1e-12 + 1e-8 * fine.to_f64().abs() {
                return ((Dd::of(4.0) * fine - coarse) / Dd::of(3.0)).to_f64();
            }
            step /= 8.0;
            coarse = diff(step);
        }
        coarse.to_f64()
    }
}

/// Standard normal upper tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `trials` fair coin flips.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    use statrs::distribution::{Binomial, DiscreteCDF};
    if wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, trials as u64).expect("valid binomial");
    1.0 - b.cdf(wins as u64 - 1)
}

