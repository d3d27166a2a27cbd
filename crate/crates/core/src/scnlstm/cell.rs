use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};

use super::ScnLstmParams;
use crate::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Image-dependent terms of a batch that stay fixed over time: the attribute
/// projections `W*b D_p`, `U*b D_p` of every gate and the image injection `z`.
#[derive(Debug, Clone)]
pub struct Conditioning {
    /// Per gate, batch x factor.
    pub attr_w: [Array2<f64>; 4],
    pub attr_u: [Array2<f64>; 4],
    /// batch x hidden.
    pub z: Array2<f64>,
}

impl Conditioning {
    /// Rows of `attrs` and `features` are images.
    pub fn new(
        params: &ScnLstmParams,
        attrs: &Array2<f64>,
        features: &Array2<f64>,
    ) -> Result<Self> {
        let c = &params.config;
        if features.ncols() != c.feature_dim || features.nrows() != attrs.nrows() {
            return Err(Error::dims(
                "image features",
                features.shape(),
                &[attrs.nrows(), c.feature_dim],
            ));
        }
        let z = features.dot(&params.cv.t());
        Self::with_injection(params, attrs, z)
    }

    /// Uses `z` as given instead of projecting image features.
    pub fn with_injection(
        params: &ScnLstmParams,
        attrs: &Array2<f64>,
        z: Array2<f64>,
    ) -> Result<Self> {
        let c = &params.config;
        if attrs.ncols() != c.n_attrs {
            return Err(Error::dims(
                "attribute vector",
                attrs.shape(),
                &[attrs.nrows(), c.n_attrs],
            ));
        }
        if z.shape() != [attrs.nrows(), c.hidden_dim] {
            return Err(Error::dims(
                "image injection",
                z.shape(),
                &[attrs.nrows(), c.hidden_dim],
            ));
        }
        let attr_w = [0, 1, 2, 3].map(|g| attrs.dot(&params.gates[g].wb.t()));
        let attr_u = [0, 1, 2, 3].map(|g| attrs.dot(&params.gates[g].ub.t()));
        Ok(Self { attr_w, attr_u, z })
    }

    pub fn rows(&self) -> usize {
        self.z.nrows()
    }
}

/// Hidden and cell state, one row per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
}

impl CellState {
    pub fn zeros(rows: usize, hidden: usize) -> Self {
        Self {
            h: Array2::zeros((rows, hidden)),
            c: Array2::zeros((rows, hidden)),
        }
    }
}

pub(crate) struct StepCache {
    emb: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    xc: [Array2<f64>; 4],
    xt: [Array2<f64>; 4],
    hc: [Array2<f64>; 4],
    ht: [Array2<f64>; 4],
    /// Activated gates in `i, f, o, c~` order.
    act: [Array2<f64>; 4],
    tanh_c: Array2<f64>,
}

/// Gradients of the conditioning terms, folded into parameter gradients once
/// a whole sequence has been processed.
pub(crate) struct ConditioningGrads {
    attr_w: [Array2<f64>; 4],
    attr_u: [Array2<f64>; 4],
    z: Array2<f64>,
}

impl ConditioningGrads {
    pub(crate) fn zeros(cond: &Conditioning) -> Self {
        Self {
            attr_w: cond.attr_w.clone().map(|a| Array2::zeros(a.raw_dim())),
            attr_u: cond.attr_u.clone().map(|a| Array2::zeros(a.raw_dim())),
            z: Array2::zeros(cond.z.raw_dim()),
        }
    }

    /// Adds `dW*b`, `dU*b` and `dC_v` into `grads`.
    pub(crate) fn accumulate(
        &self,
        attrs: &Array2<f64>,
        features: Option<&Array2<f64>>,
        grads: &mut ScnLstmParams,
    ) {
        for g in 0..4 {
            grads.gates[g].wb += &self.attr_w[g].t().dot(attrs);
            grads.gates[g].ub += &self.attr_u[g].t().dot(attrs);
        }
        if let Some(features) = features {
            grads.cv += &self.z.t().dot(features);
        }
    }
}

/// One cell step for a batch. `inject` adds the image term `z`.
pub(crate) fn cell_forward(
    params: &ScnLstmParams,
    cond: &Conditioning,
    emb: Array2<f64>,
    state: &CellState,
    inject: bool,
) -> (CellState, StepCache) {
    let mut xc = Vec::with_capacity(4);
    let mut xt = Vec::with_capacity(4);
    let mut hc = Vec::with_capacity(4);
    let mut ht = Vec::with_capacity(4);
    let mut act = Vec::with_capacity(4);
    for (g, gate) in params.gates.iter().enumerate() {
        let x_proj = emb.dot(&gate.wc.t());
        let x_mod = &cond.attr_w[g] * &x_proj;
        let h_proj = state.h.dot(&gate.uc.t());
        let h_mod = &cond.attr_u[g] * &h_proj;
        let mut pre = x_mod.dot(&gate.wa.t()) + h_mod.dot(&gate.ua.t()) + &gate.bias;
        if inject {
            pre += &cond.z;
        }
        if g == 3 {
            pre.mapv_inplace(f64::tanh);
        } else {
            pre.mapv_inplace(sigmoid);
        }
        xc.push(x_proj);
        xt.push(x_mod);
        hc.push(h_proj);
        ht.push(h_mod);
        act.push(pre);
    }
    let c = &act[0] * &act[3] + &act[1] * &state.c;
    let tanh_c = c.mapv(f64::tanh);
    let h = &act[2] * &tanh_c;
    let four = |v: Vec<Array2<f64>>| -> [Array2<f64>; 4] { v.try_into().expect("four gates") };
    let cache = StepCache {
        emb,
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        xc: four(xc),
        xt: four(xt),
        hc: four(hc),
        ht: four(ht),
        act: four(act),
        tanh_c,
    };
    (CellState { h, c }, cache)
}

/// Backward through one step. Accumulates parameter gradients into `grads`
/// and conditioning gradients into `cond_grads`; returns the gradients of the
/// embedded input, `h_prev` and `c_prev`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cell_backward(
    params: &ScnLstmParams,
    cond: &Conditioning,
    cache: &StepCache,
    dh: &Array2<f64>,
    dc_next: &Array2<f64>,
    inject: bool,
    grads: &mut ScnLstmParams,
    cond_grads: &mut ConditioningGrads,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let [i, f, o, g] = &cache.act;
    let d_o = dh * &cache.tanh_c;
    let mut dc = dh * o;
    Zip::from(&mut dc)
        .and(&cache.tanh_c)
        .and(dc_next)
        .for_each(|d, &t, &next| *d = *d * (1.0 - t * t) + next);
    let di = &dc * g;
    let dg = &dc * i;
    let df = &dc * &cache.c_prev;
    let dc_prev = &dc * f;

    let sig_grad = |d: Array2<f64>, s: &Array2<f64>| {
        let mut out = d;
        Zip::from(&mut out)
            .and(s)
            .for_each(|d, &s| *d *= s * (1.0 - s));
        out
    };
    let mut dtanh = dg;
    Zip::from(&mut dtanh)
        .and(g)
        .for_each(|d, &t| *d *= 1.0 - t * t);
    let dpre = [sig_grad(di, i), sig_grad(df, f), sig_grad(d_o, o), dtanh];

    let mut d_emb = Array2::zeros(cache.emb.raw_dim());
    let mut dh_prev = Array2::zeros(cache.h_prev.raw_dim());
    for (k, gate) in params.gates.iter().enumerate() {
        let dp = &dpre[k];
        let gg = &mut grads.gates[k];
        gg.bias += &dp.sum_axis(Axis(0));
        gg.wa += &dp.t().dot(&cache.xt[k]);
        gg.ua += &dp.t().dot(&cache.ht[k]);

        let dxt = dp.dot(&gate.wa);
        cond_grads.attr_w[k] += &(&dxt * &cache.xc[k]);
        let dxc = dxt * &cond.attr_w[k];
        gg.wc += &dxc.t().dot(&cache.emb);
        d_emb += &dxc.dot(&gate.wc);

        let dht = dp.dot(&gate.ua);
        cond_grads.attr_u[k] += &(&dht * &cache.hc[k]);
        let dhc = dht * &cond.attr_u[k];
        gg.uc += &dhc.t().dot(&cache.h_prev);
        dh_prev += &dhc.dot(&gate.uc);

        if inject {
            cond_grads.z += dp;
        }
    }
    (d_emb, dh_prev, dc_prev)
}

/// A single cell step for one sequence with an explicit injection term `z`
/// (zero except at the first step). Returns `(h, c)`.
pub fn scn_cell_step(
    x_prev: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    attrs: &[f64],
    z: &[f64],
    params: &ScnLstmParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cfg = &params.config;
    let row = |v: &[f64]| ArrayView1::from(v).insert_axis(Axis(0)).to_owned();
    if x_prev.len() != cfg.embed_dim {
        return Err(Error::dims(
            "embedded input",
            &[x_prev.len()],
            &[cfg.embed_dim],
        ));
    }
    if h_prev.len() != cfg.hidden_dim || c_prev.len() != cfg.hidden_dim {
        return Err(Error::dims(
            "cell state",
            &[h_prev.len(), c_prev.len()],
            &[cfg.hidden_dim; 2],
        ));
    }
    let cond = Conditioning::with_injection(params, &row(attrs), row(z))?;
    let state = CellState {
        h: row(h_prev),
        c: row(c_prev),
    };
    let (next, _) = cell_forward(params, &cond, row(x_prev), &state, true);
    Ok((next.h.row(0).to_vec(), next.c.row(0).to_vec()))
}

/// Embedding rows of `tokens`.
pub(crate) fn embed_tokens(params: &ScnLstmParams, tokens: &[usize]) -> Array2<f64> {
    params.embed.select(Axis(0), tokens)
}

pub(crate) fn row_vector(v: &Array1<f64>) -> Array2<f64> {
    v.view().insert_axis(Axis(0)).to_owned()
}
