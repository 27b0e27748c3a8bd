//! Reverse-mode automatic differentiation over a per-example tape.
//!
//! A [`Graph`] borrows the parameter store immutably while the forward pass is
//! recorded. Weight matrices are never copied onto the tape: ops such as
//! [`Graph::matvec`] refer to parameters by id and accumulate their gradients
//! into a separate [`Grads`] buffer during [`Graph::backward`].

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{log_sum_exp, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Row { table: ParamId, row: usize },
    ParamVec(ParamId),
    MatVec { w: ParamId, x: NodeId },
    AddParam { x: NodeId, b: ParamId },
    MulParam { x: NodeId, p: ParamId },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sum(Vec<NodeId>),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    Dot(NodeId, NodeId),
    Softmax(NodeId),
    WeightedSum { weights: NodeId, items: Vec<NodeId> },
    CrossEntropy { logits: NodeId, gold: usize, probs: Vec<f64> },
    Mask { x: NodeId, mask: Rc<Vec<f64>> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    dropout_rng: Option<ChaCha8Rng>,
}

impl<'p> Graph<'p> {
    /// Evaluation graph: dropout is the identity.
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            dropout_rng: None,
        }
    }

    /// Training graph: dropout masks are drawn from `rng`.
    pub fn training(store: &'p ParamStore, rng: ChaCha8Rng) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            dropout_rng: Some(rng),
        }
    }

    pub fn is_training(&self) -> bool {
        self.dropout_rng.is_some()
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Recovers the dropout generator so a caller can keep drawing from the
    /// same stream after the graph is dropped.
    pub fn into_rng(self) -> Option<ChaCha8Rng> {
        self.dropout_rng
    }

    pub fn rng(&mut self) -> Option<&mut ChaCha8Rng> {
        self.dropout_rng.as_mut()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id.0].value;
        debug_assert_eq!(v.len(), 1);
        v[0]
    }

    pub fn dim(&self, id: NodeId) -> usize {
        self.nodes[id.0].value.len()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.push(vec![0.0; len], Op::Input)
    }

    /// Forward value of `x` with no gradient path back through it.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].value.clone();
        self.input(v)
    }

    /// One row of an embedding table.
    pub fn row(&mut self, table: ParamId, row: usize) -> NodeId {
        let v = self.store.value(table).row(row).to_vec();
        self.push(v, Op::Row { table, row })
    }

    /// A whole parameter as a flat vector.
    pub fn param(&mut self, p: ParamId) -> NodeId {
        let v = self.store.value(p).data().to_vec();
        self.push(v, Op::ParamVec(p))
    }

    pub fn matvec(&mut self, w: ParamId, x: NodeId) -> NodeId {
        let wt = self.store.value(w);
        let (rows, cols) = (wt.rows(), wt.cols());
        let xv = &self.nodes[x.0].value;
        assert_eq!(cols, xv.len(), "matvec: {} has {} columns, input has {}", self.store.get(w).name, cols, xv.len());
        let wd = wt.data();
        let out = (0..rows)
            .map(|r| {
                let row = &wd[r * cols..(r + 1) * cols];
                row.iter().zip(xv).map(|(a, b)| a * b).sum()
            })
            .collect();
        self.push(out, Op::MatVec { w, x })
    }

    pub fn add_param(&mut self, x: NodeId, b: ParamId) -> NodeId {
        let bv = self.store.value(b).data();
        let xv = &self.nodes[x.0].value;
        assert_eq!(bv.len(), xv.len(), "add_param: length mismatch");
        let out = xv.iter().zip(bv).map(|(a, b)| a + b).collect();
        self.push(out, Op::AddParam { x, b })
    }

    pub fn mul_param(&mut self, x: NodeId, p: ParamId) -> NodeId {
        let pv = self.store.value(p).data();
        let xv = &self.nodes[x.0].value;
        assert_eq!(pv.len(), xv.len(), "mul_param: length mismatch");
        let out = xv.iter().zip(pv).map(|(a, b)| a * b).collect();
        self.push(out, Op::MulParam { x, p })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "add: length mismatch");
        let out = av.iter().zip(bv).map(|(x, y)| x + y).collect();
        self.push(out, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "mul: length mismatch");
        let out = av.iter().zip(bv).map(|(x, y)| x * y).collect();
        self.push(out, Op::Mul(a, b))
    }

    /// Elementwise sum of equally sized nodes. An empty list yields zeros of `len`.
    pub fn sum(&mut self, items: &[NodeId], len: usize) -> NodeId {
        let mut out = vec![0.0; len];
        for it in items {
            let v = &self.nodes[it.0].value;
            assert_eq!(v.len(), len, "sum: length mismatch");
            out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        }
        self.push(out, Op::Sum(items.to_vec()))
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let out = self.nodes[x.0].value.iter().map(|v| v * k).collect();
        self.push(out, Op::Scale(x, k))
    }

    /// Arithmetic mean of scalar (or equally sized) nodes.
    pub fn mean(&mut self, items: &[NodeId]) -> NodeId {
        assert!(!items.is_empty(), "mean of nothing");
        let len = self.dim(items[0]);
        let s = self.sum(items, len);
        self.scale(s, 1.0 / items.len() as f64)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x.0].value.iter().map(|&v| sigmoid(v)).collect();
        self.push(out, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(out, Op::Tanh(x))
    }

    pub fn concat(&mut self, items: &[NodeId]) -> NodeId {
        let mut out = Vec::new();
        for it in items {
            out.extend_from_slice(&self.nodes[it.0].value);
        }
        self.push(out, Op::Concat(items.to_vec()))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let out = self.nodes[x.0].value[start..start + len].to_vec();
        self.push(out, Op::Slice { x, start })
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "dot: length mismatch");
        let out = av.iter().zip(bv).map(|(x, y)| x * y).sum();
        self.push(vec![out], Op::Dot(a, b))
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let out = softmax(&self.nodes[x.0].value);
        self.push(out, Op::Softmax(x))
    }

    /// `sum_i weights[i] * items[i]`.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> NodeId {
        let w = &self.nodes[weights.0].value;
        assert_eq!(w.len(), items.len(), "weighted_sum: {} weights for {} items", w.len(), items.len());
        let len = self.nodes[items[0].0].value.len();
        let mut out = vec![0.0; len];
        for (k, it) in items.iter().enumerate() {
            let v = &self.nodes[it.0].value;
            out.iter_mut().zip(v).for_each(|(o, x)| *o += w[k] * x);
        }
        self.push(out, Op::WeightedSum { weights, items: items.to_vec() })
    }

    /// Negative log-probability of `gold` under `softmax(logits)`.
    pub fn cross_entropy(&mut self, logits: NodeId, gold: usize) -> NodeId {
        let lv = &self.nodes[logits.0].value;
        assert!(gold < lv.len(), "cross_entropy: gold {} out of {}", gold, lv.len());
        let loss = log_sum_exp(lv) - lv[gold];
        let probs = softmax(lv);
        self.push(vec![loss], Op::CrossEntropy { logits, gold, probs })
    }

    /// Inverted dropout. Identity in evaluation graphs or when `p == 0`.
    pub fn dropout(&mut self, x: NodeId, p: f64) -> NodeId {
        if p <= 0.0 {
            return x;
        }
        let Some(rng) = self.dropout_rng.as_mut() else {
            return x;
        };
        let keep = 1.0 - p;
        let n = self.nodes[x.0].value.len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let out = self.nodes[x.0]
            .value
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        self.push(out, Op::Mask { x, mask: Rc::new(mask) })
    }

    /// Backpropagates from a scalar node and returns parameter gradients.
    pub fn backward(&self, root: NodeId) -> Grads {
        self.backward_with_nodes(root).0
    }

    /// Like [`Graph::backward`] but also returns the gradient reaching every
    /// node (`None` where nothing flowed).
    pub fn backward_with_nodes(&self, root: NodeId) -> (Grads, Vec<Option<Vec<f64>>>) {
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward root must be scalar");
        let mut grads = Grads::new(self.store.len());
        let mut ng: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        ng[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(g) = ng[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Row { table, row } => {
                    let t = self.store.value(*table);
                    let cols = t.cols();
                    let slot = grads.slot(*table, t.len());
                    for (d, gv) in slot[row * cols..(row + 1) * cols].iter_mut().zip(&g) {
                        *d += gv;
                    }
                }
                Op::ParamVec(p) => {
                    let slot = grads.slot(*p, g.len());
                    slot.iter_mut().zip(&g).for_each(|(d, gv)| *d += gv);
                }
                Op::MatVec { w, x } => {
                    let wt = self.store.value(*w);
                    let (rows, cols) = (wt.rows(), wt.cols());
                    let xv = &self.nodes[x.0].value;
                    let slot = grads.slot(*w, rows * cols);
                    for r in 0..rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            for (d, xj) in slot[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                                *d += gr * xj;
                            }
                        }
                    }
                    let wd = wt.data();
                    let mut gx = vec![0.0; cols];
                    for r in 0..rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            for (d, wv) in gx.iter_mut().zip(&wd[r * cols..(r + 1) * cols]) {
                                *d += gr * wv;
                            }
                        }
                    }
                    accumulate(&mut ng, *x, &gx);
                }
                Op::AddParam { x, b } => {
                    let slot = grads.slot(*b, g.len());
                    slot.iter_mut().zip(&g).for_each(|(d, gv)| *d += gv);
                    accumulate(&mut ng, *x, &g);
                }
                Op::MulParam { x, p } => {
                    let pv = self.store.value(*p).data();
                    let xv = &self.nodes[x.0].value;
                    let slot = grads.slot(*p, g.len());
                    for k in 0..g.len() {
                        slot[k] += g[k] * xv[k];
                    }
                    let gx: Vec<f64> = g.iter().zip(pv).map(|(a, b)| a * b).collect();
                    accumulate(&mut ng, *x, &gx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut ng, *a, &g);
                    accumulate(&mut ng, *b, &g);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    accumulate(&mut ng, *a, &ga);
                    accumulate(&mut ng, *b, &gb);
                }
                Op::Sum(items) => {
                    for it in items {
                        accumulate(&mut ng, *it, &g);
                    }
                }
                Op::Scale(x, k) => {
                    let gx: Vec<f64> = g.iter().map(|v| v * k).collect();
                    accumulate(&mut ng, *x, &gx);
                }
                Op::Sigmoid(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(gv, s)| gv * s * (1.0 - s))
                        .collect();
                    accumulate(&mut ng, *x, &gx);
                }
                Op::Tanh(x) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(&node.value)
                        .map(|(gv, t)| gv * (1.0 - t * t))
                        .collect();
                    accumulate(&mut ng, *x, &gx);
                }
                Op::Concat(items) => {
                    let mut off = 0;
                    for it in items {
                        let n = self.nodes[it.0].value.len();
                        accumulate(&mut ng, *it, &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.nodes[x.0].value.len();
                    let mut gx = vec![0.0; n];
                    gx[*start..start + g.len()].copy_from_slice(&g);
                    accumulate(&mut ng, *x, &gx);
                }
                Op::Dot(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let ga: Vec<f64> = bv.iter().map(|v| v * g[0]).collect();
                    let gb: Vec<f64> = av.iter().map(|v| v * g[0]).collect();
                    accumulate(&mut ng, *a, &ga);
                    accumulate(&mut ng, *b, &gb);
                }
                Op::Softmax(x) => {
                    let p = &node.value;
                    let inner: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                    let gx: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi * (gi - inner)).collect();
                    accumulate(&mut ng, *x, &gx);
                }
                Op::WeightedSum { weights, items } => {
                    let w = &self.nodes[weights.0].value;
                    let mut gw = vec![0.0; items.len()];
                    for (k, it) in items.iter().enumerate() {
                        let v = &self.nodes[it.0].value;
                        gw[k] = g.iter().zip(v).map(|(a, b)| a * b).sum();
                        let gi: Vec<f64> = g.iter().map(|a| a * w[k]).collect();
                        accumulate(&mut ng, *it, &gi);
                    }
                    accumulate(&mut ng, *weights, &gw);
                }
                Op::CrossEntropy { logits, gold, probs } => {
                    let mut gx: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                    gx[*gold] -= g[0];
                    accumulate(&mut ng, *logits, &gx);
                }
                Op::Mask { x, mask } => {
                    let gx: Vec<f64> = g.iter().zip(mask.iter()).map(|(a, b)| a * b).collect();
                    accumulate(&mut ng, *x, &gx);
                }
            }
            ng[i] = Some(g);
        }
        (grads, ng)
    }
}

fn accumulate(ng: &mut [Option<Vec<f64>>], id: NodeId, g: &[f64]) {
    match &mut ng[id.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Parameter;
    use crate::nn::tensor::Tensor;
    use rand::SeedableRng;

    fn store_with(values: &[(&str, Tensor)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, t) in values {
            s.add(Parameter::new(*n, t.clone()));
        }
        s
    }

    #[test]
    fn matvec_backward_matches_hand_computation() {
        let w = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let store = store_with(&[("w", w)]);
        let mut g = Graph::new(&store);
        let x = g.input(vec![1.0, 0.5, -1.0]);
        let y = g.matvec(ParamId(0), x);
        assert_eq!(g.value(y), &[-1.0, 0.5]);
        let ones = g.input(vec![1.0, 1.0]);
        let loss = g.dot(y, ones);
        let (grads, nodes) = g.backward_with_nodes(loss);
        assert_eq!(grads.get(ParamId(0)).unwrap(), &[1.0, 0.5, -1.0, 1.0, 0.5, -1.0]);
        assert_eq!(nodes[x.0].as_ref().unwrap(), &vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let store = store_with(&[("e", Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap())]);
        let mut g = Graph::new(&store);
        let r = g.row(ParamId(0), 1);
        let d = g.detach(r);
        let loss = g.dot(d, d);
        let grads = g.backward(loss);
        assert!(grads.is_zero(ParamId(0)));
        assert_eq!(g.value(d), g.value(r));
    }

    #[test]
    fn dropout_zero_and_eval_are_identity() {
        let store = ParamStore::new();
        let mut g = Graph::training(&store, ChaCha8Rng::seed_from_u64(1));
        let x = g.input(vec![1.0, 2.0]);
        assert_eq!(g.dropout(x, 0.0), x);
        let mut e = Graph::new(&store);
        let y = e.input(vec![1.0, 2.0]);
        assert_eq!(e.dropout(y, 0.5), y);
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let store = ParamStore::new();
        let mut g = Graph::training(&store, ChaCha8Rng::seed_from_u64(7));
        let x = g.input(vec![0.8; 10_000]);
        let y = g.dropout(x, 0.4);
        let mean: f64 = g.value(y).iter().sum::<f64>() / 10_000.0;
        assert!((mean - 0.8).abs() / 0.8 < 0.02, "mean {}", mean);
    }

    #[test]
    fn shared_node_gradients_accumulate() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(vec![3.0]);
        let y = g.mul(x, x);
        let (_, nodes) = g.backward_with_nodes(y);
        assert_eq!(nodes[x.0].as_ref().unwrap(), &vec![6.0]);
    }
}
