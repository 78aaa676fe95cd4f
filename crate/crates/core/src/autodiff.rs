//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its output value and the ids of its
//! inputs. Node ids are assigned in evaluation order, so walking the tape
//! backwards is a reverse topological order and each node is visited once.

use crate::error::{Error, Result};
use crate::tensor::{self, Activation, Tensor, Transpose};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Activation(Var, Activation),
    LogSigmoid(Var),
    Neg(Var),
    Add(Var, Var),
    Scale(Var, f64),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the tape's parameter leaves.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`. Parameters the loss does not depend on get zeros.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Input that gradients do not flow into.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf whose gradient `backward` reports.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let out = tensor::add_row_bias(self.value(x), self.value(bias))?;
        let rg = self.needs(x) || self.needs(bias);
        Ok(self.push(out, Op::AddBias(x, bias), rg))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        if kind == Activation::Linear {
            return x;
        }
        let out = tensor::activation(self.value(x), kind);
        let rg = self.needs(x);
        self.push(out, Op::Activation(x, kind), rg)
    }

    /// Elementwise `log σ(x)`, evaluated stably.
    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(tensor::log_sigmoid);
        let rg = self.needs(x);
        self.push(out, Op::LogSigmoid(x), rg)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| -v);
        let rg = self.needs(x);
        self.push(out, Op::Neg(x), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::dim("add", va.shape(), vb.shape()));
        }
        let out = va.zip_map(vb, |x, y| x + y);
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).map(|v| v * factor);
        let rg = self.needs(x);
        self.push(out, Op::Scale(x, factor), rg)
    }

    /// Mean over all entries, as a scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).mean());
        let rg = self.needs(x);
        self.push(out, Op::Mean(x), rg)
    }

    /// Consumes the tape and returns d`loss`/d`param` for every parameter leaf.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let loss_shape = self.value(loss).shape().to_vec();
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {loss_shape:?}"
            )));
        }
        let nodes = self.nodes;
        let mut adj: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            if !nodes[id].requires_grad {
                continue;
            }
            let Some(g) = adj[id].take() else { continue };
            match nodes[id].op {
                Op::Leaf => {
                    adj[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    if nodes[a.0].requires_grad {
                        // dA = dC · Bᵀ
                        let mut da = Tensor::zeros(&[m, k]);
                        tensor::gemm(
                            Transpose::No,
                            Transpose::Yes,
                            m,
                            n,
                            k,
                            g.data(),
                            vb.data(),
                            da.data_mut(),
                            0.0,
                        );
                        accumulate(&mut adj, a, da);
                    }
                    if nodes[b.0].requires_grad {
                        // dB = Aᵀ · dC
                        let mut db = Tensor::zeros(&[k, n]);
                        tensor::gemm(
                            Transpose::Yes,
                            Transpose::No,
                            k,
                            m,
                            n,
                            va.data(),
                            g.data(),
                            db.data_mut(),
                            0.0,
                        );
                        accumulate(&mut adj, b, db);
                    }
                }
                Op::AddBias(x, bias) => {
                    if nodes[bias.0].requires_grad {
                        let n = nodes[bias.0].value.len();
                        let mut db = vec![0.0; n];
                        for row in g.data().chunks_exact(n) {
                            for (acc, v) in db.iter_mut().zip(row) {
                                *acc += v;
                            }
                        }
                        let shape = nodes[bias.0].value.shape().to_vec();
                        accumulate(&mut adj, bias, Tensor::new(shape, db)?);
                    }
                    if nodes[x.0].requires_grad {
                        accumulate(&mut adj, x, g);
                    }
                }
                Op::Activation(x, kind) => {
                    let input = &nodes[x.0].value;
                    let output = &nodes[id].value;
                    let mut dx = g;
                    for ((d, &xi), &yi) in dx.data_mut().iter_mut().zip(input.data()).zip(output.data()) {
                        *d *= kind.derivative(xi, yi);
                    }
                    accumulate(&mut adj, x, dx);
                }
                Op::LogSigmoid(x) => {
                    // d/dx log σ(x) = σ(−x)
                    let dx = g.zip_map(&nodes[x.0].value, |gi, xi| gi * tensor::sigmoid(-xi));
                    accumulate(&mut adj, x, dx);
                }
                Op::Neg(x) => accumulate(&mut adj, x, g.map(|v| -v)),
                Op::Add(a, b) => {
                    if nodes[a.0].requires_grad {
                        accumulate(&mut adj, a, g.clone());
                    }
                    if nodes[b.0].requires_grad {
                        accumulate(&mut adj, b, g);
                    }
                }
                Op::Scale(x, factor) => accumulate(&mut adj, x, g.map(|v| v * factor)),
                Op::Mean(x) => {
                    let n = nodes[x.0].value.len();
                    let fill = g.data()[0] / n as f64;
                    accumulate(&mut adj, x, Tensor::full(nodes[x.0].value.shape(), fill));
                }
            }
        }

        let grads = nodes
            .iter()
            .zip(adj)
            .map(|(node, g)| match (&node.op, node.requires_grad) {
                (Op::Leaf, true) => Some(g.unwrap_or_else(|| Tensor::zeros(node.value.shape()))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grad_at(x0: f64, kind: Activation) -> f64 {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(x0));
        let y = tape.activation(x, kind);
        let loss = tape.mean(y);
        tape.backward(loss).unwrap().get(x).unwrap().data()[0]
    }

    #[test]
    fn tanh_derivative_at_zero() {
        assert_eq!(grad_at(0.0, Activation::Tanh), 1.0);
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        assert_eq!(grad_at(0.0, Activation::Sigmoid), 0.25);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn unused_param_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(2.0));
        let unused = tape.param(Tensor::zeros(&[3]));
        let loss = tape.scale(x, 3.0);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[3.0]);
        assert_eq!(grads.get(unused).unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn constants_have_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(2.0));
        let x = tape.param(Tensor::scalar(1.0));
        let y = tape.add(c, x).unwrap();
        let grads = tape.backward(y).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(x).unwrap().data(), &[1.0]);
    }

    #[test]
    fn reused_node_accumulates() {
        // loss = mean(x + x) → dx = 2/n
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[4]));
        let y = tape.add(x, x).unwrap();
        let loss = tape.mean(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.5; 4]);
    }

    // Composite expression: mean(log σ(act(X·W + b)·V)) − mean(act(X·W + b)).
    fn composite(x: &Tensor, w: &Tensor, b: &Tensor, v: &Tensor, kind: Activation) -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let wv = tape.param(w.clone());
        let bv = tape.param(b.clone());
        let vv = tape.param(v.clone());
        let h = tape.matmul(xv, wv).unwrap();
        let h = tape.add_bias(h, bv).unwrap();
        let h = tape.activation(h, kind);
        let o = tape.matmul(h, vv).unwrap();
        let ls = tape.log_sigmoid(o);
        let a = tape.mean(ls);
        let hm = tape.mean(h);
        let hm = tape.neg(hm);
        let loss = tape.add(a, hm).unwrap();
        let loss = tape.scale(loss, 1.5);
        let value = tape.value(loss).data()[0];
        let grads = tape.backward(loss).unwrap();
        (value, [wv, bv, vv].iter().map(|&p| grads.get(p).unwrap().clone()).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn composite_gradients_match_central_differences(
            xs in prop::collection::vec(-1.5f64..1.5, 6),
            ws in prop::collection::vec(-1.5f64..1.5, 12),
            bs in prop::collection::vec(-0.5f64..0.5, 4),
            vs in prop::collection::vec(-1.5f64..1.5, 4),
            kind in prop::sample::select(vec![Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Linear]),
        ) {
            let x = Tensor::matrix(2, 3, xs).unwrap();
            let mut params = vec![
                Tensor::matrix(3, 4, ws).unwrap(),
                Tensor::new(vec![4], bs).unwrap(),
                Tensor::matrix(4, 1, vs).unwrap(),
            ];
            let (_, grads) = composite(&x, &params[0], &params[1], &params[2], kind);
            let h = 1e-5;
            for p in 0..params.len() {
                for i in 0..params[p].len() {
                    let orig = params[p].data()[i];
                    params[p].data_mut()[i] = orig + h;
                    let (fp, _) = composite(&x, &params[0], &params[1], &params[2], kind);
                    params[p].data_mut()[i] = orig - h;
                    let (fm, _) = composite(&x, &params[0], &params[1], &params[2], kind);
                    params[p].data_mut()[i] = orig;
                    let fd = (fp - fm) / (2.0 * h);
                    let ad = grads[p].data()[i];
                    // ReLU kinks within h of the evaluation point make the
                    // central difference meaningless there.
                    if kind == Activation::Relu {
                        let pre = tensor::add_row_bias(&tensor::matmul(&x, &params[0]).unwrap(), &params[1]).unwrap();
                        if pre.data().iter().any(|v| v.abs() < 1e-3) {
                            return Ok(());
                        }
                    }
                    let rel = (ad - fd).abs() / fd.abs().max(ad.abs()).max(1e-3);
                    prop_assert!(rel <= 1e-5, "param {p}[{i}]: autodiff {ad} vs fd {fd}");
                }
            }
        }
    }
}
