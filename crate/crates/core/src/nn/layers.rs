use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `y = W x + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input_size: usize,
    pub output_size: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        output_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let w = store.add_glorot(format!("{name}.w"), output_size, input_size, rng);
        let b = store.add_constant(format!("{name}.b"), output_size, 0.0);
        Linear {
            w,
            b,
            input_size,
            output_size,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let wx = g.matvec(self.w, x);
        g.add_param(wx, self.b)
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
    pub rows: usize,
}

impl Embedding {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        rows: usize,
        dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let table = store.add_glorot(name, rows, dim, rng);
        Embedding { table, dim, rows }
    }

    pub fn lookup(&self, g: &mut Graph, row: usize) -> NodeId {
        g.row(self.table, row)
    }
}

/// LSTM cell, optionally with peephole connections from the cell state to the
/// input, forget and output gates. Gate order in the stacked weights is
/// input, forget, candidate, output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub peepholes: Option<[ParamId; 3]>,
    pub input_size: usize,
    pub hidden_size: usize,
}

impl LstmCell {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        peephole: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let h = hidden_size;
        let w_ih = store.add_glorot(format!("{name}.w_ih"), 4 * h, input_size, rng);
        let w_hh = store.add_glorot(format!("{name}.w_hh"), 4 * h, h, rng);
        let bias = store.add_constant(format!("{name}.bias"), 4 * h, 0.0);
        // forget gate starts open
        store.get_mut(bias).value.data_mut()[h..2 * h]
            .iter_mut()
            .for_each(|v| *v = 1.0);
        let peepholes = peephole.then(|| {
            [
                store.add_constant(format!("{name}.peep_i"), h, 0.0),
                store.add_constant(format!("{name}.peep_f"), h, 0.0),
                store.add_constant(format!("{name}.peep_o"), h, 0.0),
            ]
        });
        LstmCell {
            w_ih,
            w_hh,
            bias,
            peepholes,
            input_size,
            hidden_size,
        }
    }

    pub fn step(&self, g: &mut Graph, x: NodeId, h_prev: NodeId, c_prev: NodeId) -> (NodeId, NodeId) {
        let hs = self.hidden_size;
        let wx = g.matvec(self.w_ih, x);
        let uh = g.matvec(self.w_hh, h_prev);
        let z = g.add(wx, uh);
        let z = g.add_param(z, self.bias);

        let mut zi = g.slice(z, 0, hs);
        let mut zf = g.slice(z, hs, hs);
        let zg = g.slice(z, 2 * hs, hs);
        let mut zo = g.slice(z, 3 * hs, hs);

        if let Some([pi, pf, _]) = self.peepholes {
            let ci = g.mul_param(c_prev, pi);
            zi = g.add(zi, ci);
            let cf = g.mul_param(c_prev, pf);
            zf = g.add(zf, cf);
        }
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let cand = g.tanh(zg);
        let keep = g.mul(f, c_prev);
        let write = g.mul(i, cand);
        let c = g.add(keep, write);
        if let Some([_, _, po]) = self.peepholes {
            let co = g.mul_param(c, po);
            zo = g.add(zo, co);
        }
        let o = g.sigmoid(zo);
        let tc = g.tanh(c);
        let h = g.mul(o, tc);
        (h, c)
    }

    pub fn check_shapes(&self, x: usize, h: usize, c: usize) -> Result<()> {
        if x != self.input_size {
            return Err(Error::shape(
                "lstm_step",
                format!("input has {} entries, cell expects input_size {}", x, self.input_size),
            ));
        }
        if h != self.hidden_size {
            return Err(Error::shape(
                "lstm_step",
                format!("h_prev has {} entries, cell expects hidden_size {}", h, self.hidden_size),
            ));
        }
        if c != self.hidden_size {
            return Err(Error::shape(
                "lstm_step",
                format!("c_prev has {} entries, cell expects hidden_size {}", c, self.hidden_size),
            ));
        }
        Ok(())
    }
}

/// Runs one LSTM step on plain tensors.
pub fn lstm_step(
    cell: &LstmCell,
    store: &ParamStore,
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
) -> Result<(Tensor, Tensor)> {
    cell.check_shapes(x.len(), h_prev.len(), c_prev.len())?;
    let mut g = Graph::new(store);
    let xn = g.input(x.data().to_vec());
    let hn = g.input(h_prev.data().to_vec());
    let cn = g.input(c_prev.data().to_vec());
    let (h, c) = cell.step(&mut g, xn, hn, cn);
    Ok((
        Tensor::vector(g.value(h).to_vec()),
        Tensor::vector(g.value(c).to_vec()),
    ))
}

/// Final `(h, c)` of one direction of one layer.
#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

/// Stack of unidirectional LSTM layers.
#[derive(Debug, Clone)]
pub struct StackedLstm {
    pub layers: Vec<LstmCell>,
}

impl StackedLstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        n_layers: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                let inp = if l == 0 { input_size } else { hidden_size };
                LstmCell::new(store, &format!("{name}.l{l}"), inp, hidden_size, false, rng)
            })
            .collect();
        StackedLstm { layers }
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size
    }

    pub fn zero_state(&self, g: &mut Graph) -> Vec<LstmState> {
        self.layers
            .iter()
            .map(|l| LstmState {
                h: g.zeros(l.hidden_size),
                c: g.zeros(l.hidden_size),
            })
            .collect()
    }

    /// One time step through all layers; dropout is applied to the input of
    /// every layer (non-recurrent connections only).
    pub fn step(&self, g: &mut Graph, x: NodeId, state: &[LstmState], dropout: f64) -> Vec<LstmState> {
        let mut input = x;
        let mut next = Vec::with_capacity(self.layers.len());
        for (cell, st) in self.layers.iter().zip(state) {
            let inp = g.dropout(input, dropout);
            let (h, c) = cell.step(g, inp, st.h, st.c);
            next.push(LstmState { h, c });
            input = h;
        }
        next
    }

    /// Runs the whole sequence from a zero state and returns the final state.
    pub fn run(&self, g: &mut Graph, inputs: &[NodeId], dropout: f64) -> Vec<LstmState> {
        let mut state = self.zero_state(g);
        for &x in inputs {
            state = self.step(g, x, &state, dropout);
        }
        state
    }
}

/// Output of a stacked bidirectional LSTM.
#[derive(Debug, Clone)]
pub struct BiLstmOutput {
    /// Top-layer `[forward; backward]` hidden state at every position.
    pub outputs: Vec<NodeId>,
    /// Per layer: final forward state (after the last position) and final
    /// backward state (after the first position).
    pub finals: Vec<(LstmState, LstmState)>,
}

#[derive(Debug, Clone)]
pub struct BiLstm {
    pub layers: Vec<(LstmCell, LstmCell)>,
}

impl BiLstm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_size: usize,
        hidden_size: usize,
        n_layers: usize,
        peephole: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                let inp = if l == 0 { input_size } else { 2 * hidden_size };
                let fwd = LstmCell::new(store, &format!("{name}.l{l}.fwd"), inp, hidden_size, peephole, rng);
                let bwd = LstmCell::new(store, &format!("{name}.l{l}.bwd"), inp, hidden_size, peephole, rng);
                (fwd, bwd)
            })
            .collect();
        BiLstm { layers }
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].0.hidden_size
    }

    pub fn output_size(&self) -> usize {
        2 * self.hidden_size()
    }

    /// Dropout is applied to every layer's inputs and to the top outputs.
    pub fn forward(&self, g: &mut Graph, inputs: &[NodeId], dropout: f64) -> Result<BiLstmOutput> {
        if inputs.is_empty() {
            return Err(Error::Invalid("bidirectional LSTM over an empty sequence".into()));
        }
        let n = inputs.len();
        let mut current: Vec<NodeId> = inputs.to_vec();
        let mut finals = Vec::with_capacity(self.layers.len());
        for (fwd, bwd) in &self.layers {
            let dropped: Vec<NodeId> = current.iter().map(|&x| g.dropout(x, dropout)).collect();
            let hs = fwd.hidden_size;

            let mut fh = g.zeros(hs);
            let mut fc = g.zeros(hs);
            let mut forward_h = Vec::with_capacity(n);
            for &x in &dropped {
                let (h, c) = fwd.step(g, x, fh, fc);
                fh = h;
                fc = c;
                forward_h.push(h);
            }
            let mut bh = g.zeros(hs);
            let mut bc = g.zeros(hs);
            let mut backward_h = vec![bh; n];
            for t in (0..n).rev() {
                let (h, c) = bwd.step(g, dropped[t], bh, bc);
                bh = h;
                bc = c;
                backward_h[t] = h;
            }
            finals.push((LstmState { h: fh, c: fc }, LstmState { h: bh, c: bc }));
            current = forward_h
                .iter()
                .zip(&backward_h)
                .map(|(&f, &b)| g.concat(&[f, b]))
                .collect();
        }
        let outputs = current.iter().map(|&x| g.dropout(x, dropout)).collect();
        Ok(BiLstmOutput { outputs, finals })
    }
}

/// Bidirectional forward pass over plain tensors (evaluation mode).
pub fn bilstm_forward(bilstm: &BiLstm, store: &ParamStore, inputs: &[Tensor]) -> Result<Vec<Tensor>> {
    if inputs.is_empty() {
        return Err(Error::Invalid("bidirectional LSTM over an empty sequence".into()));
    }
    let want = bilstm.layers[0].0.input_size;
    if let Some((pos, t)) = inputs.iter().enumerate().find(|(_, t)| t.len() != want) {
        return Err(Error::shape(
            "bilstm_forward",
            format!("input {} has {} entries, expected {}", pos, t.len(), want),
        ));
    }
    let mut g = Graph::new(store);
    let nodes: Vec<NodeId> = inputs.iter().map(|t| g.input(t.data().to_vec())).collect();
    let out = bilstm.forward(&mut g, &nodes, 0.0)?;
    Ok(out
        .outputs
        .iter()
        .map(|&n| Tensor::vector(g.value(n).to_vec()))
        .collect())
}
