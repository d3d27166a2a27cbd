//! Attribute-conditioned caption decoder with factorized LSTM gates.
//!
//! For each gate `* in {i, f, o, c}` the input and recurrent weights are
//! factorized through an attribute-modulated bottleneck:
//!
//! ```text
//! x~*  = (W*b D_p) . (W*c x_{t-1})
//! h~*  = (U*b D_p) . (U*c h_{t-1})
//! pre* = W*a x~* + U*a h~* + z + b*          z = C_v f(I) at t = 1, else 0
//! i, f, o = sigmoid(pre)    c~ = tanh(pre_c)
//! c_t = i . c~ + f . c_{t-1}                 h_t = o . tanh(c_t)
//! ```
//!
//! where `.` is the elementwise product. Words are predicted from `h_t` with a
//! softmax layer, and captions are decoded with beam search.

mod beam;
mod cell;
mod train;

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::corpus::tokenize_min;
use crate::nncore::{slice_mut, xavier_init, Parameters, Rng, TensorRef};
use crate::{Error, Result, FEATURE_DIM};

pub use beam::{
    beam_search, ensemble_beam_search, search, BeamHypothesis, BeamOutcome, EnsembleModel,
    ImageDecoder, StepModel,
};
pub use cell::{scn_cell_step, CellState, Conditioning};
pub use train::{
    captioner_train, loss_and_grads, mean_token_nll, sequence_log_likelihood, step_distributions,
    CaptionDataset, CaptionTrainConfig, CaptionTrainOutcome,
};

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
const SPECIAL: [&str; 3] = ["<bos>", "<eos>", "<unk>"];

/// Surface-form caption tokenizer: lowercase ASCII alphanumeric runs, single
/// letters included so generated captions keep their articles.
pub fn caption_tokens(text: &str) -> Vec<String> {
    tokenize_min(text, 1)
}

/// Word list of the decoder. Ids 0, 1, 2 are BOS, EOS and UNK.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl CaptionVocab {
    /// Keeps tokens seen at least `min_count` times, most frequent first, ties
    /// in lexicographic order.
    pub fn build<'a>(captions: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for caption in captions {
            for token in caption_tokens(caption) {
                *counts.entry(token).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count.max(1) && !SPECIAL.contains(&w.as_str()))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_words(kept.into_iter().map(|(w, _)| w).collect())
            .expect("counted words are unique")
    }

    /// Vocabulary from its non-special words, in id order starting at 3.
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let all: Vec<String> = SPECIAL.iter().map(|s| s.to_string()).chain(words).collect();
        let mut index = HashMap::with_capacity(all.len());
        for (i, w) in all.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::parse_at(
                    "caption vocabulary",
                    i,
                    format!("duplicate word {w:?}"),
                ));
            }
        }
        Ok(Self { words: all, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Words after the three special tokens.
    pub fn content_words(&self) -> &[String] {
        &self.words[SPECIAL.len()..]
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    /// Tokenizes and wraps in BOS/EOS; unknown words map to UNK.
    pub fn encode(&self, caption: &str) -> CaptionSequence {
        let tokens = std::iter::once(BOS)
            .chain(caption_tokens(caption).iter().map(|t| self.id(t)))
            .chain(std::iter::once(EOS))
            .collect();
        CaptionSequence { tokens }
    }

    /// Space-joined words between BOS and EOS.
    pub fn decode(&self, seq: &CaptionSequence) -> String {
        seq.words()
            .iter()
            .map(|&id| self.word(id).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Token ids `x_0 .. x_T` with `x_0 = BOS` and `x_T = EOS`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CaptionSequence {
    tokens: Vec<usize>,
}

impl CaptionSequence {
    pub fn new(tokens: Vec<usize>) -> Result<Self> {
        let valid = tokens.len() >= 2
            && tokens[0] == BOS
            && tokens[tokens.len() - 1] == EOS
            && tokens[1..tokens.len() - 1]
                .iter()
                .all(|&t| t != BOS && t != EOS);
        if valid {
            Ok(Self { tokens })
        } else {
            Err(Error::Param(format!(
                "caption must be BOS .. EOS without interior markers: {tokens:?}"
            )))
        }
    }

    /// Wraps content tokens in BOS/EOS.
    pub fn from_words(words: &[usize]) -> Result<Self> {
        let mut tokens = Vec::with_capacity(words.len() + 2);
        tokens.push(BOS);
        tokens.extend_from_slice(words);
        tokens.push(EOS);
        Self::new(tokens)
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    /// Content tokens between BOS and EOS.
    pub fn words(&self) -> &[usize] {
        &self.tokens[1..self.tokens.len() - 1]
    }

    /// Number of predicted tokens, `T`.
    pub fn len(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScnConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub factor_dim: usize,
    /// `N_w`.
    pub n_attrs: usize,
    pub feature_dim: usize,
}

impl ScnConfig {
    pub fn new(vocab_size: usize, n_attrs: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 300,
            hidden_dim: 512,
            factor_dim: 512,
            n_attrs,
            feature_dim: FEATURE_DIM,
        }
    }
}

pub(crate) const GATE_NAMES: [&str; 4] = ["i", "f", "o", "c"];

/// Factorized weights of one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// hidden x factor
    pub wa: Array2<f64>,
    /// factor x N_w
    pub wb: Array2<f64>,
    /// factor x embed
    pub wc: Array2<f64>,
    /// hidden x factor
    pub ua: Array2<f64>,
    /// factor x N_w
    pub ub: Array2<f64>,
    /// factor x hidden
    pub uc: Array2<f64>,
    pub bias: Array1<f64>,
}

impl GateParams {
    fn init(c: &ScnConfig, rng: &mut Rng) -> Self {
        let (h, f) = (c.hidden_dim, c.factor_dim);
        Self {
            wa: xavier_init(h, f, rng),
            wb: xavier_init(f, c.n_attrs, rng),
            wc: xavier_init(f, c.embed_dim, rng),
            ua: xavier_init(h, f, rng),
            ub: xavier_init(f, c.n_attrs, rng),
            uc: xavier_init(f, h, rng),
            bias: Array1::zeros(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScnLstmParams {
    pub config: ScnConfig,
    pub vocab: CaptionVocab,
    /// vocab x embed
    pub embed: Array2<f64>,
    /// Gates in `i, f, o, c` order.
    pub gates: [GateParams; 4],
    /// hidden x feature: `z = C_v f(I)`.
    pub cv: Array2<f64>,
    /// vocab x hidden
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

impl ScnLstmParams {
    /// Xavier-initialized matrices and zero biases.
    pub fn init(config: ScnConfig, vocab: CaptionVocab, rng: &mut Rng) -> Result<Self> {
        if vocab.len() != config.vocab_size {
            return Err(Error::dims(
                "caption vocabulary",
                &[vocab.len()],
                &[config.vocab_size],
            ));
        }
        let embed = xavier_init(config.vocab_size, config.embed_dim, rng);
        let gates = [0, 1, 2, 3].map(|_| GateParams::init(&config, rng));
        let cv = xavier_init(config.hidden_dim, config.feature_dim, rng);
        let out_w = xavier_init(config.vocab_size, config.hidden_dim, rng);
        let out_b = Array1::zeros(config.vocab_size);
        Ok(Self {
            config,
            vocab,
            embed,
            gates,
            cv,
            out_w,
            out_b,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.fill(0.0);
        out
    }

    /// Overwrites embedding rows of words present in `vectors`; returns how
    /// many rows were replaced.
    pub fn load_embeddings(&mut self, vectors: &HashMap<String, Vec<f64>>) -> Result<usize> {
        let mut replaced = 0;
        for (id, word) in self.vocab.words.iter().enumerate() {
            if let Some(v) = vectors.get(word) {
                if v.len() != self.config.embed_dim {
                    return Err(Error::dims(
                        "pretrained embedding",
                        &[v.len()],
                        &[self.config.embed_dim],
                    ));
                }
                self.embed.row_mut(id).assign(&ndarray::ArrayView1::from(v));
                replaced += 1;
            }
        }
        Ok(replaced)
    }

    /// Checks every tensor against `config`.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        let (v, e, h, f, n) = (
            c.vocab_size,
            c.embed_dim,
            c.hidden_dim,
            c.factor_dim,
            c.n_attrs,
        );
        let mut expect = vec![("embed", self.embed.shape().to_vec(), vec![v, e])];
        for g in &self.gates {
            expect.push(("wa", g.wa.shape().to_vec(), vec![h, f]));
            expect.push(("wb", g.wb.shape().to_vec(), vec![f, n]));
            expect.push(("wc", g.wc.shape().to_vec(), vec![f, e]));
            expect.push(("ua", g.ua.shape().to_vec(), vec![h, f]));
            expect.push(("ub", g.ub.shape().to_vec(), vec![f, n]));
            expect.push(("uc", g.uc.shape().to_vec(), vec![f, h]));
            expect.push(("bias", g.bias.shape().to_vec(), vec![h]));
        }
        expect.push(("cv", self.cv.shape().to_vec(), vec![h, c.feature_dim]));
        expect.push(("out.w", self.out_w.shape().to_vec(), vec![v, h]));
        expect.push(("out.b", self.out_b.shape().to_vec(), vec![v]));
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::dims(name, &got, &want));
            }
        }
        if self.vocab.len() != v {
            return Err(Error::dims("caption vocabulary", &[self.vocab.len()], &[v]));
        }
        Ok(())
    }
}

impl Parameters for ScnLstmParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = vec![TensorRef::of("embed", &self.embed)];
        for (name, g) in GATE_NAMES.iter().zip(&self.gates) {
            out.push(TensorRef::of(format!("gate_{name}.wa"), &g.wa));
            out.push(TensorRef::of(format!("gate_{name}.wb"), &g.wb));
            out.push(TensorRef::of(format!("gate_{name}.wc"), &g.wc));
            out.push(TensorRef::of(format!("gate_{name}.ua"), &g.ua));
            out.push(TensorRef::of(format!("gate_{name}.ub"), &g.ub));
            out.push(TensorRef::of(format!("gate_{name}.uc"), &g.uc));
            out.push(TensorRef::of(format!("gate_{name}.bias"), &g.bias));
        }
        out.push(TensorRef::of("cv", &self.cv));
        out.push(TensorRef::of("out.w", &self.out_w));
        out.push(TensorRef::of("out.b", &self.out_b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![slice_mut(&mut self.embed)];
        for g in &mut self.gates {
            out.push(slice_mut(&mut g.wa));
            out.push(slice_mut(&mut g.wb));
            out.push(slice_mut(&mut g.wc));
            out.push(slice_mut(&mut g.ua));
            out.push(slice_mut(&mut g.ub));
            out.push(slice_mut(&mut g.uc));
            out.push(slice_mut(&mut g.bias));
        }
        out.push(slice_mut(&mut self.cv));
        out.push(slice_mut(&mut self.out_w));
        out.push(slice_mut(&mut self.out_b));
        out
    }
}
