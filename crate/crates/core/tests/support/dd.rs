//! Double-double arithmetic and an independent forward pass built on it.
//!
//! Finite differences of an f64 loss bottom out near 1 ulp / 2ε ≈ 1e-11, which
//! is larger than 1e-4 of the smallest gradients a toy network produces. Here
//! the loss is evaluated to ~32 significant digits from the same f64 weights,
//! so the central difference is limited by truncation (O(ε²)) only.

use std::ops::{Add, Div, Mul, Neg, Sub};

use gessure_core::nn::{Activation, Layer, Network, TimeSeriesTensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    pub fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn scale(self, s: f64) -> Dd {
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub fn gt(self, o: Dd) -> bool {
        self.hi > o.hi || (self.hi == o.hi && self.lo > o.lo)
    }

    pub fn relu(self) -> Dd {
        if self.gt(Dd::ZERO) {
            self
        } else {
            Dd::ZERO
        }
    }

    pub fn exp(self) -> Dd {
        let k = (self.hi / std::f64::consts::LN_2).round();
        // r in [-ln2/2, ln2/2], then scaled down by 2^10
        let r = (self - Dd::LN2 * Dd::new(k)).scale(1.0 / 1024.0);
        let mut term = r;
        let mut s = r;
        for n in 2..=14 {
            term = term * r / Dd::new(n as f64);
            s = s + term;
        }
        // (1 + s)^(2^10), tracked as s' = 2s + s²
        for _ in 0..10 {
            s = s.scale(2.0) + s * s;
        }
        (s + Dd::ONE).scale(2f64.powi(k as i32))
    }

    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "ln of non-positive value");
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn sigmoid(self) -> Dd {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        quick_two_sum(q1, q2) + Dd::new(q3)
    }
}

/// One parameter entry shifted by an exact double-double amount.
#[derive(Debug, Clone, Copy)]
pub struct Shift {
    pub tensor: usize,
    pub entry: usize,
    pub delta: f64,
}

fn lift(values: &[f64], tensor: usize, shift: Option<Shift>) -> Vec<Dd> {
    let mut out: Vec<Dd> = values.iter().map(|&v| Dd::new(v)).collect();
    if let Some(s) = shift.filter(|s| s.tensor == tensor) {
        out[s.entry] = out[s.entry] + Dd::new(s.delta);
    }
    out
}

/// Cross-entropy of `net` on `input`, evaluated in double-double with dropout
/// as identity. Rows are `Vec<Vec<Dd>>` indexed `[t][channel]`.
pub fn dd_loss(net: &Network, input: &TimeSeriesTensor, label: usize, shift: Option<Shift>) -> Dd {
    let mut x: Vec<Vec<Dd>> = (0..input.steps())
        .map(|t| input.row(t).iter().map(|&v| Dd::new(v)).collect())
        .collect();
    let mut tensor = 0;
    for layer in net.layers() {
        match layer {
            Layer::Conv1D { params, activation } => {
                let kernel = lift(&params.kernel, tensor, shift);
                let bias = lift(&params.bias, tensor + 1, shift);
                tensor += 2;
                let (cin, cout, pad) = (params.in_channels, params.out_channels, params.width / 2);
                let steps = x.len() as isize;
                x = (0..steps)
                    .map(|t| {
                        (0..cout)
                            .map(|o| {
                                let mut acc = bias[o];
                                for k in 0..params.width {
                                    let src = t + k as isize - pad as isize;
                                    if src < 0 || src >= steps {
                                        continue;
                                    }
                                    for c in 0..cin {
                                        acc = acc + x[src as usize][c] * kernel[(k * cin + c) * cout + o];
                                    }
                                }
                                match activation {
                                    Activation::Relu => acc.relu(),
                                    Activation::Identity => acc,
                                }
                            })
                            .collect()
                    })
                    .collect();
            }
            Layer::MaxPool1D { pool } => {
                x = x
                    .chunks_exact(*pool)
                    .map(|win| {
                        (0..win[0].len())
                            .map(|c| {
                                win.iter()
                                    .map(|row| row[c])
                                    .fold(win[0][c], |m, v| if v.gt(m) { v } else { m })
                            })
                            .collect()
                    })
                    .collect();
            }
            Layer::Dropout { .. } | Layer::TimeDistributed => {}
            Layer::Lstm { params } => {
                let w = lift(&params.weights, tensor, shift);
                let b = lift(&params.bias, tensor + 1, shift);
                tensor += 2;
                let (d, h) = (params.input_dim, params.hidden);
                let mut hs = vec![Dd::ZERO; h];
                let mut cs = vec![Dd::ZERO; h];
                for row in &x {
                    let concat: Vec<Dd> = row.iter().chain(&hs).copied().collect();
                    let z: Vec<Dd> = (0..4 * h)
                        .map(|r| {
                            concat
                                .iter()
                                .zip(&w[r * (d + h)..(r + 1) * (d + h)])
                                .fold(b[r], |acc, (&a, &wv)| acc + a * wv)
                        })
                        .collect();
                    for j in 0..h {
                        let i = z[j].sigmoid();
                        let f = z[h + j].sigmoid();
                        let g = z[2 * h + j].relu();
                        let o = z[3 * h + j].sigmoid();
                        cs[j] = f * cs[j] + i * g;
                        hs[j] = o * cs[j].relu();
                    }
                }
                x = vec![hs];
            }
            Layer::Dense { params } => {
                let w = lift(&params.weights, tensor, shift);
                let b = lift(&params.bias, tensor + 1, shift);
                let hvec = &x[0];
                let logits: Vec<Dd> = (0..params.classes)
                    .map(|l| {
                        hvec.iter()
                            .enumerate()
                            .fold(b[l], |acc, (i, &hv)| acc + hv * w[i * params.classes + l])
                    })
                    .collect();
                let m = logits.iter().copied().fold(logits[0], |m, v| if v.gt(m) { v } else { m });
                let sum = logits.iter().fold(Dd::ZERO, |acc, &z| acc + (z - m).exp());
                return sum.ln() - (logits[label] - m);
            }
        }
    }
    panic!("network has no dense head");
}

/// Central differences `(L(θ+ε) − L(θ−ε)) / 2ε` with the loss in double-double.
pub fn dd_numeric_gradients(
    net: &Network,
    input: &TimeSeriesTensor,
    label: usize,
    eps: f64,
) -> Vec<Vec<f64>> {
    net.tensors()
        .iter()
        .enumerate()
        .map(|(tensor, values)| {
            (0..values.len())
                .map(|entry| {
                    let at = |delta| dd_loss(net, input, label, Some(Shift { tensor, entry, delta }));
                    ((at(eps) - at(-eps)) / Dd::new(2.0 * eps)).to_f64()
                })
                .collect()
        })
        .collect()
}
