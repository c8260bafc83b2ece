//! Minimal reverse-mode automatic differentiation over `f64` matrices.
//!
//! Every value on the tape is a dense 2-D array; vectors are 1 x d rows and
//! scalars 1 x 1. Third-order tensors are stored flattened: the triaffine
//! weight tensor as `(d*d) x (d+1)` and triple score tensors as `(n^3) x 1`
//! with index `(i*n + k)*n + j`. Parameters are named leaves; gradients are
//! collected by name after [`Tape::backward`].

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    /// A . B
    MatMul(NodeId, NodeId),
    /// A . B^T
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// Matrix plus a 1 x d bias row broadcast over rows.
    AddBias(NodeId, NodeId),
    /// Column-wise concatenation [A | B].
    ConcatCols(NodeId, NodeId),
    Relu(NodeId),
    /// Elementwise product with a constant mask (dropout).
    MaskScale(NodeId, Array2<f64>),
    /// Row lookup into a table (embedding gather).
    GatherRows(NodeId, Vec<usize>),
    /// Same data, new shape, logical row-major order preserved.
    Reshape(NodeId),
    /// Four equal-shaped r x 1 columns stacked into r x 4.
    Stack4(NodeId, NodeId, NodeId, NodeId),
    /// Row-wise softmax.
    SoftmaxRows(NodeId),
    /// Mean negative log probability of the gold column per row, with the
    /// probability clamped at `CLAMP` before the log. Output 1 x 1.
    NllRows(NodeId, Vec<usize>),
    /// Sum of all entries. Output 1 x 1.
    Sum(NodeId),
    /// Single column extracted as r x 1.
    Col(NodeId, usize),
    /// Trilinear scoring of all (i, k, j) token triples; see [`Tape::triaffine`].
    Triaffine {
        u: NodeId,
        h3: NodeId,
        h4: NodeId,
        h5: NodeId,
    },
    /// Pairwise scores reweighted through triple weights; see [`Tape::bridge`].
    Bridge { pair: NodeId, weights: NodeId },
}

struct Node {
    op: Op,
    value: Array2<f64>,
    name: Option<String>,
}

/// Probability floor applied inside [`Tape::nll_rows`] before the log.
pub const CLAMP: f64 = 1e-12;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: Array2<f64>, name: Option<String>) -> NodeId {
        self.nodes.push(Node { op, value, name });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    /// Unnamed constant input.
    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Leaf, value, None)
    }

    /// Named parameter leaf; its gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, name: &str, value: Array2<f64>) -> NodeId {
        self.push(Op::Leaf, value, Some(name.to_string()))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).dot(self.value(b));
        self.push(Op::MatMul(a, b), value, None)
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(Op::MatMulNT(a, b), value, None)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), value, None)
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let value = self.value(a) + &self.value(bias).row(0);
        self.push(Op::AddBias(a, bias), value, None)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let left = self.value(a);
        let right = self.value(b);
        assert_eq!(left.nrows(), right.nrows(), "concat_cols row mismatch");
        let value =
            ndarray::concatenate(Axis(1), &[left.view(), right.view()]).expect("same row count");
        self.push(Op::ConcatCols(a, b), value, None)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(Op::Relu(a), value, None)
    }

    pub fn mask_scale(&mut self, a: NodeId, mask: Array2<f64>) -> NodeId {
        assert_eq!(self.value(a).dim(), mask.dim(), "mask shape mismatch");
        let value = self.value(a) * &mask;
        self.push(Op::MaskScale(a, mask), value, None)
    }

    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let t = self.value(table);
        let mut value = Array2::zeros((ids.len(), t.ncols()));
        for (row, &id) in ids.iter().enumerate() {
            value.row_mut(row).assign(&t.row(id));
        }
        self.push(Op::GatherRows(table, ids.to_vec()), value, None)
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.len(), rows * cols, "reshape size mismatch");
        let value = Array2::from_shape_vec((rows, cols), v.iter().copied().collect())
            .expect("checked size");
        self.push(Op::Reshape(a), value, None)
    }

    pub fn stack4(&mut self, cols: [NodeId; 4]) -> NodeId {
        let rows = self.value(cols[0]).nrows();
        for &c in &cols {
            assert_eq!(self.value(c).dim(), (rows, 1), "stack4 expects r x 1 columns");
        }
        let mut value = Array2::zeros((rows, 4));
        for (j, &c) in cols.iter().enumerate() {
            value.column_mut(j).assign(&self.value(c).column(0));
        }
        self.push(Op::Stack4(cols[0], cols[1], cols[2], cols[3]), value, None)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut value = v.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(Op::SoftmaxRows(a), value, None)
    }

    /// Mean over rows of `-ln(max(p[row, gold[row]], CLAMP))`.
    pub fn nll_rows(&mut self, probs: NodeId, gold: Vec<usize>) -> NodeId {
        let p = self.value(probs);
        assert_eq!(p.nrows(), gold.len(), "one gold label per row");
        let mut total = 0.0;
        for (row, &g) in gold.iter().enumerate() {
            total -= p[[row, g]].max(CLAMP).ln();
        }
        let value = Array2::from_elem((1, 1), total / gold.len() as f64);
        self.push(Op::NllRows(probs, gold), value, None)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(Op::Sum(a), value, None)
    }

    pub fn col(&mut self, a: NodeId, j: usize) -> NodeId {
        let value = self.value(a).column(j).to_owned().insert_axis(Axis(1));
        self.push(Op::Col(a, j), value, None)
    }

    /// Scores every token triple `(i, k, j)`:
    ///
    /// `out[(i*n + k)*n + j] = sum_{a,b,c} u[a*d + b, c] * h4[k,a] * h5[j,b] * aug[i,c]`
    ///
    /// where `aug[i] = [h3[i], 1]`. `u` is `(d*d) x (d+1)`, `h3`/`h4`/`h5`
    /// are `n x d`, and the output is `(n^3) x 1`.
    pub fn triaffine(&mut self, u: NodeId, h3: NodeId, h4: NodeId, h5: NodeId) -> NodeId {
        let value = triaffine_forward(self.value(u), self.value(h3), self.value(h4), self.value(h5));
        self.push(Op::Triaffine { u, h3, h4, h5 }, value, None)
    }

    /// Bridged pair scores:
    ///
    /// `out[i,j] = pair[i,j] + sum_k (pair[i,k] + pair[k,j]) * w[i,k,j]`
    ///
    /// with `pair` an `n x n` matrix and `weights` an `(n^3) x 1` tensor in
    /// the triaffine layout.
    pub fn bridge(&mut self, pair: NodeId, weights: NodeId) -> NodeId {
        let value = bridge_forward(self.value(pair), self.value(weights));
        self.push(Op::Bridge { pair, weights }, value, None)
    }

    /// Reverse pass from a 1 x 1 loss node. Returns gradients for every
    /// named parameter leaf that participates in the graph.
    pub fn backward(&self, loss: NodeId) -> BTreeMap<String, Array2<f64>> {
        assert_eq!(self.value(loss).dim(), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulNT(a, b) => {
                    let da = g.dot(self.value(*b));
                    let db = g.t().dot(self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddBias(a, bias) => {
                    let db = g
                        .sum_axis(Axis(0))
                        .insert_axis(Axis(0));
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *bias, db);
                }
                Op::ConcatCols(a, b) => {
                    let left_cols = self.value(*a).ncols();
                    let da = g.slice(ndarray::s![.., ..left_cols]).to_owned();
                    let db = g.slice(ndarray::s![.., left_cols..]).to_owned();
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Relu(a) => {
                    let mut da = g;
                    da.zip_mut_with(self.value(*a), |gv, &x| {
                        if x <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::MaskScale(a, mask) => {
                    accumulate(&mut grads, *a, &g * mask);
                }
                Op::GatherRows(table, ids) => {
                    let t = self.value(*table);
                    let mut dt = Array2::zeros(t.dim());
                    for (row, &id) in ids.iter().enumerate() {
                        let mut slot = dt.row_mut(id);
                        slot += &g.row(row);
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::Reshape(a) => {
                    let shape = self.value(*a).dim();
                    let da = Array2::from_shape_vec(shape, g.iter().copied().collect())
                        .expect("same element count");
                    accumulate(&mut grads, *a, da);
                }
                Op::Stack4(a, b, c, d) => {
                    for (j, src) in [*a, *b, *c, *d].into_iter().enumerate() {
                        let col = g
                            .column(j)
                            .to_owned()
                            .insert_axis(Axis(1));
                        accumulate(&mut grads, src, col);
                    }
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[idx].value;
                    let mut da = Array2::zeros(y.dim());
                    for row in 0..y.nrows() {
                        let yr = y.row(row);
                        let gr = g.row(row);
                        let dot: f64 = yr.iter().zip(gr.iter()).map(|(y, g)| y * g).sum();
                        for col in 0..y.ncols() {
                            da[[row, col]] = yr[col] * (gr[col] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::NllRows(probs, gold) => {
                    let p = self.value(*probs);
                    let scale = g[[0, 0]] / gold.len() as f64;
                    let mut dp = Array2::zeros(p.dim());
                    for (row, &gl) in gold.iter().enumerate() {
                        let pv = p[[row, gl]];
                        if pv > CLAMP {
                            dp[[row, gl]] = -scale / pv;
                        }
                    }
                    accumulate(&mut grads, *probs, dp);
                }
                Op::Sum(a) => {
                    let da = Array2::from_elem(self.value(*a).dim(), g[[0, 0]]);
                    accumulate(&mut grads, *a, da);
                }
                Op::Col(a, j) => {
                    let mut da = Array2::zeros(self.value(*a).dim());
                    da.column_mut(*j).assign(&g.column(0));
                    accumulate(&mut grads, *a, da);
                }
                Op::Triaffine { u, h3, h4, h5 } => {
                    let (du, dh3, dh4, dh5) = triaffine_backward(
                        self.value(*u),
                        self.value(*h3),
                        self.value(*h4),
                        self.value(*h5),
                        &g,
                    );
                    accumulate(&mut grads, *u, du);
                    accumulate(&mut grads, *h3, dh3);
                    accumulate(&mut grads, *h4, dh4);
                    accumulate(&mut grads, *h5, dh5);
                }
                Op::Bridge { pair, weights } => {
                    let (dpair, dweights) =
                        bridge_backward(self.value(*pair), self.value(*weights), &g);
                    accumulate(&mut grads, *pair, dpair);
                    accumulate(&mut grads, *weights, dweights);
                }
            }
        }

        let mut named = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Some(name) = &node.name {
                let grad = grads[idx]
                    .take()
                    .unwrap_or_else(|| Array2::zeros(node.value.dim()));
                named.insert(name.clone(), grad);
            }
        }
        named
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], id: NodeId, delta: Array2<f64>) {
    match &mut grads[id.0] {
        Some(g) => *g += &delta,
        slot @ None => *slot = Some(delta),
    }
}

fn augmented(h3: &Array2<f64>) -> Array2<f64> {
    let n = h3.nrows();
    let d = h3.ncols();
    let mut aug = Array2::ones((n, d + 1));
    aug.slice_mut(ndarray::s![.., ..d]).assign(h3);
    aug
}

fn triaffine_forward(
    u: &Array2<f64>,
    h3: &Array2<f64>,
    h4: &Array2<f64>,
    h5: &Array2<f64>,
) -> Array2<f64> {
    let n = h3.nrows();
    let d = h3.ncols();
    assert_eq!(u.dim(), (d * d, d + 1), "triaffine tensor shape");
    assert_eq!(h4.dim(), (n, d));
    assert_eq!(h5.dim(), (n, d));
    let aug = augmented(h3);
    // v : (d*d) x n, column i = flattened d x d slice for token i
    let v = u.dot(&aug.t());
    let mut out = Array2::zeros((n * n * n, 1));
    for i in 0..n {
        let vi = Array2::from_shape_vec((d, d), v.column(i).to_vec()).expect("d*d column");
        let scores = h4.dot(&vi).dot(&h5.t()); // n x n over (k, j)
        for k in 0..n {
            for j in 0..n {
                out[[(i * n + k) * n + j, 0]] = scores[[k, j]];
            }
        }
    }
    out
}

fn triaffine_backward(
    u: &Array2<f64>,
    h3: &Array2<f64>,
    h4: &Array2<f64>,
    h5: &Array2<f64>,
    g: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let n = h3.nrows();
    let d = h3.ncols();
    let aug = augmented(h3);
    let v = u.dot(&aug.t());

    let mut dv = Array2::zeros((d * d, n));
    let mut dh4 = Array2::zeros((n, d));
    let mut dh5 = Array2::zeros((n, d));
    for i in 0..n {
        let vi = Array2::from_shape_vec((d, d), v.column(i).to_vec()).expect("d*d column");
        let mut gi = Array2::zeros((n, n));
        for k in 0..n {
            for j in 0..n {
                gi[[k, j]] = g[[(i * n + k) * n + j, 0]];
            }
        }
        dh4 += &gi.dot(h5).dot(&vi.t());
        dh5 += &gi.t().dot(h4).dot(&vi);
        let dvi = h4.t().dot(&gi).dot(h5);
        for a in 0..d {
            for b in 0..d {
                dv[[a * d + b, i]] = dvi[[a, b]];
            }
        }
    }
    let du = dv.dot(&aug);
    let daug = dv.t().dot(u); // n x (d+1)
    let dh3 = daug.slice(ndarray::s![.., ..d]).to_owned();
    (du, dh3, dh4, dh5)
}

fn bridge_forward(pair: &Array2<f64>, weights: &Array2<f64>) -> Array2<f64> {
    let n = pair.nrows();
    assert_eq!(pair.dim(), (n, n));
    assert_eq!(weights.dim(), (n * n * n, 1), "bridge weights shape");
    let mut out = pair.clone();
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += (pair[[i, k]] + pair[[k, j]]) * weights[[(i * n + k) * n + j, 0]];
            }
            out[[i, j]] += acc;
        }
    }
    out
}

fn bridge_backward(
    pair: &Array2<f64>,
    weights: &Array2<f64>,
    g: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let n = pair.nrows();
    let mut dpair = g.clone();
    let mut dweights = Array2::zeros((n * n * n, 1));
    for i in 0..n {
        for j in 0..n {
            let gij = g[[i, j]];
            for k in 0..n {
                let w = weights[[(i * n + k) * n + j, 0]];
                dpair[[i, k]] += gij * w;
                dpair[[k, j]] += gij * w;
                dweights[[(i * n + k) * n + j, 0]] = gij * (pair[[i, k]] + pair[[k, j]]);
            }
        }
    }
    (dpair, dweights)
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Leaves = BTreeMap<String, Array2<f64>>;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    fn max_rel_err(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
        analytic
            .iter()
            .zip(numeric.iter())
            .map(|(&a, &f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    /// Checks analytic gradients of `build` for every leaf against central
    /// finite differences.
    fn assert_gradients(build: impl Fn(&mut Tape, &Leaves) -> NodeId, leaves: &Leaves, tol: f64) {
        let mut tape = Tape::new();
        let loss = build(&mut tape, leaves);
        let grads = tape.backward(loss);
        let step = 1e-5;
        for name in leaves.keys() {
            let base = &leaves[name];
            let mut numeric = Array2::zeros(base.dim());
            for r in 0..base.nrows() {
                for c in 0..base.ncols() {
                    let eval = |delta: f64| -> f64 {
                        let mut shifted = leaves.clone();
                        shifted.get_mut(name).unwrap()[[r, c]] += delta;
                        let mut t = Tape::new();
                        let l = build(&mut t, &shifted);
                        t.value(l)[[0, 0]]
                    };
                    numeric[[r, c]] = (eval(step) - eval(-step)) / (2.0 * step);
                }
            }
            let analytic = &grads[name];
            let err = max_rel_err(analytic, &numeric);
            assert!(
                err <= tol,
                "gradient mismatch for {name}: max rel err {err:.3e}\nanalytic: {analytic:?}\nnumeric: {numeric:?}"
            );
        }
    }

    #[test]
    fn dense_chain_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (n, d) = (3, 3);
        let mut leaves = Leaves::new();
        leaves.insert("table".into(), random_matrix(&mut rng, 5, d));
        leaves.insert("w".into(), random_matrix(&mut rng, 2 * d, d));
        leaves.insert("bias".into(), random_matrix(&mut rng, 1, d));
        leaves.insert("bil".into(), random_matrix(&mut rng, d, d));
        let mask = random_matrix(&mut rng, n, d).mapv(|x| if x > 0.0 { 2.0 } else { 0.0 });
        let ids = vec![0usize, 2, 4];
        let gold: Vec<usize> = (0..n * n).map(|r| r % 4).collect();

        assert_gradients(
            move |tape, leaves| {
                let table = tape.param("table", leaves["table"].clone());
                let w = tape.param("w", leaves["w"].clone());
                let bias = tape.param("bias", leaves["bias"].clone());
                let bil = tape.param("bil", leaves["bil"].clone());

                let gathered = tape.gather_rows(table, &ids);
                let doubled = tape.concat_cols(gathered, gathered);
                let projected = tape.matmul(doubled, w);
                let biased = tape.add_bias(projected, bias);
                let activated = tape.relu(biased);
                let masked = tape.mask_scale(activated, mask.clone());
                let pair = tape.matmul_nt(masked, masked);
                let bilinear = tape.matmul(masked, bil);
                let pair2 = tape.matmul_nt(bilinear, masked);
                let summed = tape.add(pair, pair2);
                let cells = tape.reshape(summed, n * n, 1);
                let doubled_cells = tape.concat_cols(cells, cells);
                let c0 = tape.col(doubled_cells, 0);
                let c1 = tape.col(doubled_cells, 1);
                let stacked = tape.stack4([c0, c1, c0, c1]);
                let probs = tape.softmax_rows(stacked);
                tape.nll_rows(probs, gold.clone())
            },
            &leaves,
            1e-6,
        );
    }

    #[test]
    fn triaffine_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, d) = (2, 3);
        let mut leaves = Leaves::new();
        leaves.insert("u".into(), random_matrix(&mut rng, d * d, d + 1));
        leaves.insert("h3".into(), random_matrix(&mut rng, n, d));
        leaves.insert("h4".into(), random_matrix(&mut rng, n, d));
        leaves.insert("h5".into(), random_matrix(&mut rng, n, d));
        let weight_mask = random_matrix(&mut rng, n * n * n, 1);

        assert_gradients(
            move |tape, leaves| {
                let u = tape.param("u", leaves["u"].clone());
                let h3 = tape.param("h3", leaves["h3"].clone());
                let h4 = tape.param("h4", leaves["h4"].clone());
                let h5 = tape.param("h5", leaves["h5"].clone());
                let triples = tape.triaffine(u, h3, h4, h5);
                let weighted = tape.mask_scale(triples, weight_mask.clone());
                tape.sum(weighted)
            },
            &leaves,
            1e-6,
        );
    }

    #[test]
    fn triaffine_forward_matches_explicit_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, d) = (2, 2);
        let u = random_matrix(&mut rng, d * d, d + 1);
        let h3 = random_matrix(&mut rng, n, d);
        let h4 = random_matrix(&mut rng, n, d);
        let h5 = random_matrix(&mut rng, n, d);
        let out = triaffine_forward(&u, &h3, &h4, &h5);
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let mut expected = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            for c in 0..=d {
                                let aug = if c == d { 1.0 } else { h3[[i, c]] };
                                expected += u[[a * d + b, c]] * h4[[k, a]] * h5[[j, b]] * aug;
                            }
                        }
                    }
                    let got = out[[(i * n + k) * n + j, 0]];
                    assert!(
                        (expected - got).abs() < 1e-12,
                        "triple ({i},{k},{j}): {expected} vs {got}"
                    );
                }
            }
        }
    }

    #[test]
    fn bridge_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 3;
        let mut leaves = Leaves::new();
        leaves.insert("pair".into(), random_matrix(&mut rng, n, n));
        leaves.insert("weights".into(), random_matrix(&mut rng, n * n * n, 1));
        let mask = random_matrix(&mut rng, n, n);

        assert_gradients(
            move |tape, leaves| {
                let pair = tape.param("pair", leaves["pair"].clone());
                let weights = tape.param("weights", leaves["weights"].clone());
                let bridged = tape.bridge(pair, weights);
                let weighted = tape.mask_scale(bridged, mask.clone());
                tape.sum(weighted)
            },
            &leaves,
            1e-6,
        );
    }

    #[test]
    fn bridge_forward_matches_explicit_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 3;
        let pair = random_matrix(&mut rng, n, n);
        let weights = random_matrix(&mut rng, n * n * n, 1);
        let out = bridge_forward(&pair, &weights);
        for i in 0..n {
            for j in 0..n {
                let mut expected = pair[[i, j]];
                for k in 0..n {
                    expected += (pair[[i, k]] + pair[[k, j]]) * weights[[(i * n + k) * n + j, 0]];
                }
                assert!((expected - out[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut tape = Tape::new();
        let a = tape.leaf(random_matrix(&mut rng, 6, 4));
        let soft = tape.softmax_rows(a);
        for row in tape.value(soft).rows() {
            let sum: f64 = row.sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let used = tape.param("used", Array2::from_elem((1, 1), 2.0));
        let _unused = tape.param("unused", Array2::from_elem((2, 2), 1.0));
        let loss = tape.sum(used);
        let grads = tape.backward(loss);
        assert_eq!(grads["used"][[0, 0]], 1.0);
        assert_eq!(grads["unused"], Array2::zeros((2, 2)));
    }

    #[test]
    fn clamped_probability_has_zero_gradient() {
        let mut tape = Tape::new();
        let probs = tape.param("p", ndarray::arr2(&[[0.0, 1.0]]));
        let loss = tape.nll_rows(probs, vec![0]);
        assert!(tape.value(loss)[[0, 0]].is_finite());
        let grads = tape.backward(loss);
        assert_eq!(grads["p"][[0, 0]], 0.0);
    }
}
