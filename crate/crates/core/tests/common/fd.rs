//! Central finite-difference checks in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kss_core::losses::{
    adversarial_loss_from_probs, adversarial_loss_saturating, cycle_l1_loss,
    domain_classification_loss, feature_reconstruction_loss, gradient_penalty, similarity_kernel,
    wasserstein_pair, Role,
};
use kss_core::models::{contrastive_loss, Critic, Generator, LabelLayout, ModelConfig, Siamese};
use kss_core::nn::{Activation, Tape, Tensor, Var};
use kss_core::Result;

pub const FIRST_ORDER_TOL: f64 = 1e-4;
pub const SECOND_ORDER_TOL: f64 = 1e-3;
const H: f64 = 1e-5;
const SAMPLE: usize = 24;

pub type Graph = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>>;

pub struct Case {
    pub name: String,
    pub inputs: Vec<Tensor<f64>>,
    pub f: Graph,
    pub tol: f64,
}

pub struct Outcome {
    pub name: String,
    pub err: f64,
    pub tol: f64,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.err <= self.tol
    }
}

/// `Σ w ⊙ v` with weights fixed by `seed` and the shape of `v`.
pub fn project(tape: &mut Tape<f64>, v: Var, seed: u64) -> Result<Var> {
    let shape = tape.shape(v).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(Tensor::from_fn(&shape, |_| rng.gen_range(-1.0..1.0)));
    let p = tape.mul(v, w)?;
    tape.sum(p)
}

fn evaluate(f: &Graph, inputs: &[Tensor<f64>]) -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let y = f(&mut tape, &vars)?;
    let l = project(&mut tape, y, 1)?;
    tape.item(l)
}

/// Largest per-input relative error `‖a − n‖ / max(‖a‖, ‖n‖)` over sampled coordinates.
pub fn relative_error(f: &Graph, inputs: &[Tensor<f64>]) -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let y = f(&mut tape, &vars)?;
    let l = project(&mut tape, y, 1)?;
    let grads = tape.backward(l, &vars)?;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (i, g) in grads.iter().enumerate() {
        let n = inputs[i].numel();
        let coords: Vec<usize> = if n <= SAMPLE {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, SAMPLE).into_vec()
        };
        let (mut diff, mut an, mut nn) = (0.0, 0.0, 0.0);
        for j in coords {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += H;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= H;
            let num = (evaluate(f, &plus)? - evaluate(f, &minus)?) / (2.0 * H);
            let a = g.data()[j];
            diff += (a - num) * (a - num);
            an += a * a;
            nn += num * num;
        }
        let scale = an.sqrt().max(nn.sqrt());
        if scale > 1e-12 {
            worst = worst.max(diff.sqrt() / scale);
        }
    }
    Ok(worst)
}

pub fn run(cases: Vec<Case>) -> Result<Vec<Outcome>> {
    cases
        .into_iter()
        .map(|c| {
            Ok(Outcome {
                err: relative_error(&c.f, &c.inputs)?,
                name: c.name,
                tol: c.tol,
            })
        })
        .collect()
}

/// `x ↦ Σ_i proj(∂f/∂x_i)`, a function whose gradient is a second derivative of `f`.
pub fn second_order(f: Graph) -> Graph {
    Box::new(move |t, v| {
        let y = f(t, v)?;
        let l = project(t, y, 21)?;
        let gs = t.grad(l, v)?;
        let mut acc: Option<Var> = None;
        for (i, g) in gs.into_iter().enumerate() {
            let p = project(t, g, 31 + i as u64)?;
            acc = Some(match acc {
                None => p,
                Some(a) => t.add(a, p)?,
            });
        }
        Ok(acc.expect("at least one input"))
    })
}

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| self.0.gen_range(lo..hi))
    }

    /// Magnitudes in `[lo, hi]` with random signs; keeps samples off kinks at zero.
    pub fn signed(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| {
            let m = self.0.gen_range(lo..hi);
            if self.0.gen::<bool>() {
                m
            } else {
                -m
            }
        })
    }

    pub fn one_hot(&mut self, n: usize, blocks: &[usize]) -> Tensor<f64> {
        let l: usize = blocks.iter().sum();
        let mut t = Tensor::zeros(&[n, l]);
        for r in 0..n {
            let mut off = 0;
            for &b in blocks {
                let k = self.0.gen_range(0..b);
                t.data_mut()[r * l + off + k] = 1.0;
                off += b;
            }
        }
        t
    }
}

fn case(name: &str, inputs: Vec<Tensor<f64>>, f: Graph) -> Case {
    Case {
        name: name.into(),
        inputs,
        f,
        tol: FIRST_ORDER_TOL,
    }
}

fn case2(name: &str, inputs: Vec<Tensor<f64>>, f: Graph) -> Case {
    Case {
        name: format!("{name} (second order)"),
        inputs,
        f: second_order(f),
        tol: SECOND_ORDER_TOL,
    }
}

/// Every primitive and composite layer op of the tape.
pub fn op_cases() -> Vec<Case> {
    let mut g = Gen::new(7);
    let mut v: Vec<Case> = Vec::new();
    v.push(case(
        "add (broadcast)",
        vec![g.uniform(&[2, 3], -1., 1.), g.uniform(&[1, 3], -1., 1.)],
        Box::new(|t, x| t.add(x[0], x[1])),
    ));
    v.push(case(
        "sub (broadcast)",
        vec![g.uniform(&[2, 3], -1., 1.), g.uniform(&[2, 1], -1., 1.)],
        Box::new(|t, x| t.sub(x[0], x[1])),
    ));
    v.push(case(
        "mul (broadcast)",
        vec![
            g.uniform(&[2, 3, 2], -1., 1.),
            g.uniform(&[1, 3, 1], -1., 1.),
        ],
        Box::new(|t, x| t.mul(x[0], x[1])),
    ));
    v.push(case(
        "div",
        vec![g.uniform(&[2, 3], -1., 1.), g.uniform(&[2, 3], 0.5, 1.5)],
        Box::new(|t, x| t.div(x[0], x[1])),
    ));
    v.push(case(
        "scale",
        vec![g.uniform(&[4], -1., 1.)],
        Box::new(|t, x| Ok(t.scale(x[0], -2.5))),
    ));
    v.push(case(
        "neg",
        vec![g.uniform(&[4], -1., 1.)],
        Box::new(|t, x| Ok(t.neg(x[0]))),
    ));
    v.push(case(
        "offset",
        vec![g.uniform(&[4], -1., 1.)],
        Box::new(|t, x| Ok(t.offset(x[0], 0.7))),
    ));
    v.push(case(
        "powf",
        vec![g.uniform(&[5], 0.3, 2.0)],
        Box::new(|t, x| Ok(t.powf(x[0], 1.7))),
    ));
    v.push(case(
        "powf sqrt",
        vec![g.uniform(&[5], 0.3, 2.0)],
        Box::new(|t, x| Ok(t.powf(x[0], 0.5))),
    ));
    v.push(case(
        "square",
        vec![g.uniform(&[5], -1., 1.)],
        Box::new(|t, x| t.square(x[0])),
    ));
    v.push(case(
        "exp",
        vec![g.uniform(&[5], -1., 1.)],
        Box::new(|t, x| Ok(t.exp(x[0]))),
    ));
    v.push(case(
        "log",
        vec![g.uniform(&[5], 0.2, 3.0)],
        Box::new(|t, x| Ok(t.log(x[0]))),
    ));
    v.push(case(
        "tanh",
        vec![g.uniform(&[5], -2., 2.)],
        Box::new(|t, x| Ok(t.tanh(x[0]))),
    ));
    v.push(case(
        "sigmoid",
        vec![g.uniform(&[5], -3., 3.)],
        Box::new(|t, x| Ok(t.sigmoid(x[0]))),
    ));
    v.push(case(
        "abs",
        vec![g.signed(&[6], 0.1, 1.)],
        Box::new(|t, x| Ok(t.abs(x[0]))),
    ));
    v.push(case(
        "relu",
        vec![g.signed(&[6], 0.1, 1.)],
        Box::new(|t, x| Ok(t.relu(x[0]))),
    ));
    v.push(case(
        "leaky_relu",
        vec![g.signed(&[6], 0.1, 1.)],
        Box::new(|t, x| Ok(t.leaky_relu(x[0], 0.01))),
    ));
    v.push(case(
        "clamp_min",
        vec![g.signed(&[6], 0.1, 1.)],
        Box::new(|t, x| Ok(t.clamp_min(x[0], 0.0))),
    ));
    v.push(case(
        "sum_to",
        vec![g.uniform(&[2, 3, 4], -1., 1.)],
        Box::new(|t, x| t.sum_to(x[0], &[1, 3, 1])),
    ));
    v.push(case(
        "broadcast_to",
        vec![g.uniform(&[1, 3, 1], -1., 1.)],
        Box::new(|t, x| t.broadcast_to(x[0], &[2, 3, 4])),
    ));
    v.push(case(
        "sum",
        vec![g.uniform(&[3, 4], -1., 1.)],
        Box::new(|t, x| t.sum(x[0])),
    ));
    v.push(case(
        "mean",
        vec![g.uniform(&[3, 4], -1., 1.)],
        Box::new(|t, x| t.mean(x[0])),
    ));
    v.push(case(
        "reshape",
        vec![g.uniform(&[3, 4], -1., 1.)],
        Box::new(|t, x| t.reshape(x[0], &[2, 6])),
    ));
    v.push(case(
        "matmul",
        vec![g.uniform(&[3, 4], -1., 1.), g.uniform(&[4, 2], -1., 1.)],
        Box::new(|t, x| t.matmul(x[0], x[1])),
    ));
    v.push(case(
        "transpose",
        vec![g.uniform(&[3, 4], -1., 1.)],
        Box::new(|t, x| t.transpose(x[0])),
    ));
    v.push(case(
        "conv2d s1 p1",
        vec![
            g.uniform(&[2, 3, 5, 5], -1., 1.),
            g.uniform(&[4, 3, 3, 3], -1., 1.),
        ],
        Box::new(|t, x| t.conv2d(x[0], x[1], 1, 1)),
    ));
    v.push(case(
        "conv2d s2 p1",
        vec![
            g.uniform(&[1, 2, 6, 6], -1., 1.),
            g.uniform(&[3, 2, 4, 4], -1., 1.),
        ],
        Box::new(|t, x| t.conv2d(x[0], x[1], 2, 1)),
    ));
    v.push(case(
        "conv2d s2 p0 odd",
        vec![
            g.uniform(&[1, 2, 7, 7], -1., 1.),
            g.uniform(&[2, 2, 3, 3], -1., 1.),
        ],
        Box::new(|t, x| t.conv2d(x[0], x[1], 2, 0)),
    ));
    v.push(case(
        "conv_transpose s2 p1",
        vec![
            g.uniform(&[1, 3, 3, 3], -1., 1.),
            g.uniform(&[3, 2, 4, 4], -1., 1.),
        ],
        Box::new(|t, x| t.conv_transpose(x[0], x[1], 2, 1)),
    ));
    v.push(case(
        "conv_transpose_to",
        vec![
            g.uniform(&[1, 2, 3, 3], -1., 1.),
            g.uniform(&[2, 2, 3, 3], -1., 1.),
        ],
        Box::new(|t, x| t.conv_transpose_to(x[0], x[1], 2, 0, Some((8, 8)))),
    ));
    v.push(case(
        "conv_weight_grad",
        vec![
            g.uniform(&[2, 2, 5, 5], -1., 1.),
            g.uniform(&[2, 3, 3, 3], -1., 1.),
        ],
        Box::new(|t, x| t.conv_weight_grad(x[0], x[1], (3, 3), 2, 1)),
    ));
    v.push(case(
        "narrow",
        vec![g.uniform(&[2, 5, 3], -1., 1.)],
        Box::new(|t, x| t.narrow(x[0], 1, 1, 3)),
    ));
    v.push(case(
        "embed",
        vec![g.uniform(&[2, 2, 3], -1., 1.)],
        Box::new(|t, x| t.embed(x[0], 1, 2, 5)),
    ));
    v.push(case(
        "concat",
        vec![
            g.uniform(&[2, 2, 3], -1., 1.),
            g.uniform(&[2, 1, 3], -1., 1.),
        ],
        Box::new(|t, x| t.concat(&[x[0], x[1]], 1)),
    ));
    v.push(case(
        "activation tanh",
        vec![g.uniform(&[5], -2., 2.)],
        Box::new(|t, x| t.activation(x[0], Activation::Tanh)),
    ));
    v.push(case(
        "instance_norm",
        vec![
            g.uniform(&[2, 3, 3, 4], -1., 1.),
            g.uniform(&[3], 0.5, 1.5),
            g.uniform(&[3], -0.5, 0.5),
        ],
        Box::new(|t, x| t.instance_norm(x[0], x[1], x[2], 1e-5)),
    ));
    v.push(case(
        "l2_normalize",
        vec![g.uniform(&[3, 5], -1., 1.)],
        Box::new(|t, x| t.l2_normalize(x[0], 1e-12)),
    ));

    v.push(case2(
        "matmul",
        vec![g.uniform(&[3, 4], -1., 1.), g.uniform(&[4, 2], -1., 1.)],
        Box::new(|t, x| {
            let y = t.matmul(x[0], x[1])?;
            Ok(t.tanh(y))
        }),
    ));
    v.push(case2(
        "conv2d",
        vec![
            g.uniform(&[1, 2, 6, 6], -1., 1.),
            g.uniform(&[3, 2, 4, 4], -0.5, 0.5),
        ],
        Box::new(|t, x| {
            let y = t.conv2d(x[0], x[1], 2, 1)?;
            t.square(y)
        }),
    ));
    v.push(case2(
        "conv_transpose",
        vec![
            g.uniform(&[1, 3, 3, 3], -1., 1.),
            g.uniform(&[3, 2, 4, 4], -0.5, 0.5),
        ],
        Box::new(|t, x| {
            let y = t.conv_transpose(x[0], x[1], 2, 1)?;
            Ok(t.tanh(y))
        }),
    ));
    v.push(case2(
        "conv_weight_grad",
        vec![
            g.uniform(&[1, 2, 5, 5], -1., 1.),
            g.uniform(&[1, 2, 3, 3], -1., 1.),
        ],
        Box::new(|t, x| {
            let y = t.conv_weight_grad(x[0], x[1], (3, 3), 2, 1)?;
            t.square(y)
        }),
    ));
    v.push(case2(
        "sigmoid",
        vec![g.uniform(&[5], -3., 3.)],
        Box::new(|t, x| Ok(t.sigmoid(x[0]))),
    ));
    v.push(case2(
        "exp/log",
        vec![g.uniform(&[5], 0.3, 2.)],
        Box::new(|t, x| {
            let l = t.log(x[0]);
            let s = t.square(l)?;
            Ok(t.exp(s))
        }),
    ));
    v.push(case2(
        "leaky_relu",
        vec![g.signed(&[6], 0.1, 1.)],
        Box::new(|t, x| {
            let y = t.leaky_relu(x[0], 0.2);
            t.square(y)
        }),
    ));
    v.push(case2(
        "powf",
        vec![g.uniform(&[5], 0.3, 2.0)],
        Box::new(|t, x| Ok(t.powf(x[0], 0.5))),
    ));
    v.push(case2(
        "div",
        vec![g.uniform(&[4], -1., 1.), g.uniform(&[4], 0.5, 1.5)],
        Box::new(|t, x| t.div(x[0], x[1])),
    ));
    v.push(case2(
        "instance_norm",
        vec![
            g.uniform(&[1, 2, 3, 3], -1., 1.),
            g.uniform(&[2], 0.5, 1.5),
            g.uniform(&[2], -0.5, 0.5),
        ],
        Box::new(|t, x| {
            let y = t.instance_norm(x[0], x[1], x[2], 1e-5)?;
            Ok(t.tanh(y))
        }),
    ));
    v.push(case2(
        "l2_normalize",
        vec![g.uniform(&[2, 4], -1., 1.)],
        Box::new(|t, x| t.l2_normalize(x[0], 1e-12)),
    ));
    v.push(case2(
        "concat/narrow",
        vec![g.uniform(&[2, 2], -1., 1.), g.uniform(&[2, 3], -1., 1.)],
        Box::new(|t, x| {
            let c = t.concat(&[x[0], x[1]], 1)?;
            let n = t.narrow(c, 1, 1, 3)?;
            t.square(n)
        }),
    ));
    v
}

/// Every loss term.
pub fn loss_cases() -> Vec<Case> {
    let mut g = Gen::new(8);
    let blocks = [3usize, 2];
    let target = g.one_hot(3, &blocks);
    let mut v: Vec<Case> = Vec::new();
    v.push(case(
        "similarity_kernel",
        vec![g.uniform(&[3, 4], -1., 1.), g.uniform(&[3, 4], -1., 1.)],
        Box::new(|t, x| similarity_kernel(t, x[0], x[1])),
    ));
    v.push(case(
        "similarity_kernel (vector)",
        vec![g.uniform(&[4], -1., 1.), g.uniform(&[4], -1., 1.)],
        Box::new(|t, x| similarity_kernel(t, x[0], x[1])),
    ));
    v.push(case(
        "feature_reconstruction_loss",
        vec![g.uniform(&[3, 4], -1., 1.), g.uniform(&[3, 4], -1., 1.)],
        Box::new(|t, x| feature_reconstruction_loss(t, x[0], x[1])),
    ));
    let base = g.uniform(&[2, 3, 2, 2], -1., 1.);
    let off = g.signed(&[2, 3, 2, 2], 0.1, 0.5);
    let shifted = Tensor::from_fn(base.shape(), |i| base.data()[i] + off.data()[i]);
    v.push(case(
        "cycle_l1_loss",
        vec![base, shifted],
        Box::new(|t, x| cycle_l1_loss(t, x[0], x[1])),
    ));
    v.push(case(
        "adversarial_loss_from_probs",
        vec![g.uniform(&[4], 0.1, 0.9), g.uniform(&[4], 0.1, 0.9)],
        Box::new(|t, x| adversarial_loss_from_probs(t, x[0], x[1])),
    ));
    v.push(case(
        "adversarial_loss_saturating",
        vec![g.uniform(&[4], -2., 2.), g.uniform(&[4], -2., 2.)],
        Box::new(|t, x| adversarial_loss_saturating(t, x[0], x[1])),
    ));
    v.push(case(
        "wasserstein_pair critic",
        vec![g.uniform(&[4], -2., 2.), g.uniform(&[4], -2., 2.)],
        Box::new(|t, x| wasserstein_pair(t, x[0], x[1], Role::Critic)),
    ));
    v.push(case(
        "wasserstein_pair generator",
        vec![g.uniform(&[4], -2., 2.), g.uniform(&[4], -2., 2.)],
        Box::new(|t, x| wasserstein_pair(t, x[0], x[1], Role::Generator)),
    ));
    v.push(case(
        "domain_classification_loss",
        vec![g.uniform(&[3, 5], -2., 2.)],
        Box::new(move |t, x| domain_classification_loss(t, x[0], &target, &blocks)),
    ));
    // separations kept away from the margin, where the hinge has a kink
    let a = g.uniform(&[4, 3], -0.3, 0.3);
    let b = Tensor::from_fn(&[4, 3], |i| {
        a.data()[i] + [0.05, 0.1, 0.9, 1.2][i / 3] * if i % 2 == 0 { 1.0 } else { -1.0 }
    });
    v.push(case(
        "contrastive_loss",
        vec![a, b],
        Box::new(|t, x| contrastive_loss(t, x[0], x[1], &[true, false, true, false], 3.0)),
    ));
    let penalty_critic: Graph = Box::new(|t, x| {
        // D(x) = a·Σ tanh(x) + b·Σ x², parameters a and b shaped 1×1
        let eps = [0.3, 0.8];
        let real = t.constant(Tensor::from_fn(&[2, 1, 2, 2], |i| (i as f64 * 0.37).sin()));
        let fake = t.constant(Tensor::from_fn(&[2, 1, 2, 2], |i| (i as f64 * 0.91).cos()));
        let (a, b) = (x[0], x[1]);
        gradient_penalty(
            t,
            move |t: &mut Tape<f64>, xh: Var| {
                let th = t.tanh(xh);
                let sq = t.square(xh)?;
                let s1 = t.sum_to(th, &[2, 1, 1, 1])?;
                let s2 = t.sum_to(sq, &[2, 1, 1, 1])?;
                let s1 = t.reshape(s1, &[2, 1])?;
                let s2 = t.reshape(s2, &[2, 1])?;
                let p1 = t.matmul(s1, a)?;
                let p2 = t.matmul(s2, b)?;
                t.add(p1, p2)
            },
            real,
            fake,
            &eps,
        )
    });
    v.push(Case {
        name: "gradient_penalty (second order)".into(),
        inputs: vec![
            Tensor::new(vec![1, 1], vec![0.7]).unwrap(),
            Tensor::new(vec![1, 1], vec![0.4]).unwrap(),
        ],
        f: penalty_critic,
        tol: SECOND_ORDER_TOL,
    });
    v
}

pub fn small_config(image_size: usize) -> ModelConfig {
    ModelConfig {
        image_size,
        image_channels: 3,
        labels: LabelLayout::new(2, 3, 2),
        noise_channels: 2,
        embed_dim: 6,
        generator_widths: [4, 6],
        critic_widths: [3, 4, 4, 5],
        siamese_widths: [3, 4, 4],
        leaky_slope: 0.01,
    }
}

fn tensors64(ts: &[Tensor]) -> Vec<Tensor<f64>> {
    ts.iter().map(|t| t.cast::<f64>()).collect()
}

/// Generator 8×8, critic 16×16 (including its gradient penalty) and Siamese 8×8.
pub fn composite_cases() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = Gen::new(9);
    let mut v = Vec::new();

    let cfg8 = small_config(8);
    let gen = Generator::new(&cfg8);
    let gp = tensors64(gen.init_params(&mut rng).tensors());
    let np = gp.len();
    let label = g.one_hot(2, &[2, 3, 2]);
    let noise = g.uniform(&[2, 2], 0., 1.);
    let mut inputs = gp;
    inputs.push(g.uniform(&[2, 3, 8, 8], -1., 1.));
    v.push(case(
        "generator 8x8",
        inputs,
        Box::new(move |t, x| {
            let c = t.constant(label.clone());
            let z = t.constant(noise.clone());
            gen.forward(t, &x[..np], x[np], c, z, false)
        }),
    ));

    let cfg16 = small_config(16);
    let critic = Critic::new(&cfg16);
    let dp = tensors64(critic.init_params(&mut rng).tensors());
    let nd = dp.len();
    let mut inputs = dp.clone();
    inputs.push(g.uniform(&[2, 3, 16, 16], -1., 1.));
    let c1 = critic.clone();
    v.push(case(
        "critic 16x16",
        inputs,
        Box::new(move |t, x| {
            let out = c1.forward(t, &x[..nd], x[nd], false)?;
            let a = project(t, out.adv, 11)?;
            let c = project(t, out.cls, 12)?;
            t.add(a, c)
        }),
    ));

    let real = g.uniform(&[2, 3, 16, 16], -1., 1.);
    let fake = g.uniform(&[2, 3, 16, 16], -1., 1.);
    v.push(Case {
        name: "critic 16x16 gradient penalty (second order)".into(),
        inputs: dp,
        f: Box::new(move |t, x| {
            let xr = t.constant(real.clone());
            let xf = t.constant(fake.clone());
            let params = x.to_vec();
            let c = critic.clone();
            gradient_penalty(
                t,
                move |t: &mut Tape<f64>, xh: Var| c.score(t, &params, xh, false),
                xr,
                xf,
                &[0.25, 0.6],
            )
        }),
        tol: SECOND_ORDER_TOL,
    });

    let siamese = Siamese::new(&cfg8);
    let sp = tensors64(siamese.init_params(&mut rng).tensors());
    let ns = sp.len();
    let mut inputs = sp;
    inputs.push(g.uniform(&[2, 3, 8, 8], -1., 1.));
    v.push(case(
        "siamese 8x8",
        inputs,
        Box::new(move |t, x| siamese.embed(t, &x[..ns], x[ns], false)),
    ));
    v
}

/// The backward of the binary16 cast rounds the incoming gradient; compared exactly.
pub fn cast_f16_is_straight_through() -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Tensor::new(vec![3], vec![0.1, 1.0 / 3.0, 2049.0]).unwrap());
    let y = tape.cast_f16(x);
    let w = tape.constant(Tensor::new(vec![3], vec![0.3, 1e-9, 7.0]).unwrap());
    let p = tape.mul(y, w)?;
    let l = tape.sum(p)?;
    let g = tape.backward(l, &[x])?;
    let want: Vec<f64> = [0.3f64, 1e-9, 7.0]
        .iter()
        .map(|&v| kss_core::precision::quantize_f16(v as f32) as f64)
        .collect();
    Ok(g[0]
        .data()
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

pub fn all_cases() -> Vec<Case> {
    let mut v = op_cases();
    v.extend(loss_cases());
    v.extend(composite_cases());
    v
}
