use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::corpus::{EmbeddingMatrix, TokenId, BOS, EOS, PAD};
use crate::error::{Error, Result};
use crate::numerics::kernels::{add_acc, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::{
    apply_mask, softmax, softmax_cross_entropy_slice, DropoutSource, ParamId, ParameterSet, Tensor, TensorList,
};
use crate::recurrent::{
    glorot, CellKind, CellParams, CellState, EncoderParams, EncoderStates, EncoderTrace, StepCache,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bridge {
    pub w: ParamId,
    pub b: ParamId,
}

/// Additive attention: `e_j = vᵀ tanh(W_enc s_j + W_dec s_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionParams {
    pub w_enc: ParamId,
    pub w_dec: ParamId,
    pub v: ParamId,
}

/// Parameter handles and wiring for one encoder-decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub config: ModelConfig,
    pub src_embedding: ParamId,
    pub tgt_embedding: ParamId,
    pub encoder: EncoderParams,
    /// One `encoder_width -> hidden` projection per decoder layer.
    pub bridges: Vec<Bridge>,
    pub decoder: Vec<CellParams>,
    pub attention: Option<AttentionParams>,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

/// One decoder step as seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStep {
    /// Per-layer decoder states after the step; the top layer's `h` is s^d_i.
    pub states: Vec<CellState>,
    pub context: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone)]
struct StepTrace {
    input_id: TokenId,
    input_masks: Vec<Option<Vec<f64>>>,
    caches: Vec<StepCache>,
    top_h: Vec<f64>,
    /// `tanh(keys_j + query)` per source position.
    attn_tanh: Vec<Vec<f64>>,
    weights: Vec<f64>,
    context: Vec<f64>,
    pre: Vec<f64>,
    pre_mask: Option<Vec<f64>>,
    dlogits: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ExampleTrace {
    enc: EncoderStates,
    enc_trace: EncoderTrace,
    init_h: Vec<Vec<f64>>,
    steps: Vec<StepTrace>,
}

impl Architecture {
    pub fn register(params: &mut ParameterSet, config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (v, d, h) = (config.vocab_size, config.embed_dim, config.hidden);
        let ew = config.encoder_width();
        let src_embedding = params.add(
            "embedding.source",
            EmbeddingMatrix::random(v, d, rng.gen()).into_tensor(),
        )?;
        let tgt_embedding = params.add(
            "embedding.target",
            EmbeddingMatrix::random(v, d, rng.gen()).into_tensor(),
        )?;
        let encoder = EncoderParams::register(
            params,
            "encoder",
            config.cell,
            d,
            h,
            config.layers,
            config.bidirectional,
            &mut rng,
        )?;
        let mut bridges = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            bridges.push(Bridge {
                w: params.add(format!("bridge.l{l}.w"), glorot(&mut rng, ew, h, ew + h))?,
                b: params.add(format!("bridge.l{l}.b"), Tensor::zeros(&[h]))?,
            });
        }
        let mut decoder = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let in_dim = if l == 0 { d } else { h };
            decoder.push(CellParams::register(
                params,
                &format!("decoder.l{l}"),
                config.cell,
                in_dim,
                h,
                &mut rng,
            )?);
        }
        let attention = if config.attention {
            Some(AttentionParams {
                w_enc: params.add("attention.w_enc", glorot(&mut rng, ew, h, ew + h))?,
                w_dec: params.add("attention.w_dec", glorot(&mut rng, h, h, 2 * h))?,
                v: params.add("attention.v", Tensor::vector(glorot(&mut rng, 1, h, 1 + h).into_data()))?,
            })
        } else {
            None
        };
        let pw = config.projection_width();
        let out_w = params.add("output.w", glorot(&mut rng, pw, v, pw + v))?;
        let out_b = params.add("output.b", Tensor::zeros(&[v]))?;
        Ok(Self {
            config: config.clone(),
            src_embedding,
            tgt_embedding,
            encoder,
            bridges,
            decoder,
            attention,
            out_w,
            out_b,
        })
    }

    fn check_ids(&self, ids: &[TokenId], what: &str) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.config.vocab_size) {
            Some(bad) => Err(Error::invalid(format!(
                "{what} id {bad} outside vocabulary of {}",
                self.config.vocab_size
            ))),
            None => Ok(()),
        }
    }

    /// `tanh(bridge_l(summary_l))` for every decoder layer; LSTM memory
    /// cells start at zero.
    pub fn init_decoder(&self, v: &TensorList, enc: &EncoderStates) -> Result<Vec<CellState>> {
        if enc.layer_summaries.len() != self.decoder.len() {
            return Err(Error::Config(format!(
                "encoder has {} layers but decoder has {}",
                enc.layer_summaries.len(),
                self.decoder.len()
            )));
        }
        let h = self.config.hidden;
        let mut states = Vec::with_capacity(self.decoder.len());
        for (bridge, summary) in self.bridges.iter().zip(&enc.layer_summaries) {
            if summary.len() != self.config.encoder_width() {
                return Err(Error::Shape(format!(
                    "encoder summary has width {}, expected {}",
                    summary.len(),
                    self.config.encoder_width()
                )));
            }
            let mut a = v[bridge.b].data().to_vec();
            matvec_acc(summary, v[bridge.w].data(), &mut a);
            a.iter_mut().for_each(|x| *x = x.tanh());
            let mut state = CellState::zeros(self.config.cell, h);
            if let Some(c) = state.c.as_mut() {
                c.copy_from_slice(&a);
            }
            state.h = a;
            states.push(state);
        }
        Ok(states)
    }

    /// `W_enc s_j` for every encoder state; empty without attention.
    fn attention_keys(&self, v: &TensorList, enc: &EncoderStates) -> Vec<Vec<f64>> {
        let Some(att) = &self.attention else {
            return Vec::new();
        };
        let a = self.config.hidden;
        enc.states
            .iter()
            .map(|s| {
                let mut k = vec![0.0; a];
                matvec_acc(s, v[att.w_enc].data(), &mut k);
                k
            })
            .collect()
    }

    /// Returns `(context, weights, tanh terms)` for decoder state `s_d`.
    fn attend(
        &self,
        v: &TensorList,
        s_d: &[f64],
        enc: &EncoderStates,
        keys: &[Vec<f64>],
    ) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let att = self.attention.as_ref().expect("attention enabled");
        let a = self.config.hidden;
        let mut query = vec![0.0; a];
        matvec_acc(s_d, v[att.w_dec].data(), &mut query);
        let vv = v[att.v].data();
        let mut tanh_terms = Vec::with_capacity(keys.len());
        let scores: Vec<f64> = keys
            .iter()
            .map(|k| {
                let t: Vec<f64> = k.iter().zip(&query).map(|(x, y)| (x + y).tanh()).collect();
                let e = t.iter().zip(vv).map(|(x, y)| x * y).sum();
                tanh_terms.push(t);
                e
            })
            .collect();
        let weights = softmax(&scores);
        let mut context = vec![0.0; self.config.encoder_width()];
        for (w, s) in weights.iter().zip(&enc.states) {
            for (c, x) in context.iter_mut().zip(s) {
                *c += w * x;
            }
        }
        (context, weights, tanh_terms)
    }

    fn step(
        &self,
        v: &TensorList,
        y_prev: TokenId,
        states: &[CellState],
        enc: &EncoderStates,
        keys: &[Vec<f64>],
        dropout: &mut DropoutSource,
    ) -> Result<(Vec<CellState>, Vec<f64>, StepTrace)> {
        self.check_ids(&[y_prev], "decoder input")?;
        if states.len() != self.decoder.len() {
            return Err(Error::Config("decoder state count does not match layers".into()));
        }
        let d = self.config.embed_dim;
        let table = v[self.tgt_embedding].data();
        let mut x = table[y_prev * d..(y_prev + 1) * d].to_vec();
        let mut new_states = Vec::with_capacity(states.len());
        let mut input_masks = Vec::with_capacity(states.len());
        let mut caches = Vec::with_capacity(states.len());
        for (cell, state) in self.decoder.iter().zip(states) {
            input_masks.push(dropout.apply(&mut x));
            let (next, cache) = cell.bind(v).step_cached(&x, state);
            x = next.h.clone();
            new_states.push(next);
            caches.push(cache);
        }
        let top_h = x;
        let (context, weights, attn_tanh) = if self.attention.is_some() {
            self.attend(v, &top_h, enc, keys)
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        let mut pre = top_h.clone();
        pre.extend_from_slice(&context);
        let pre_mask = dropout.apply(&mut pre);
        let mut logits = v[self.out_b].data().to_vec();
        matvec_acc(&pre, v[self.out_w].data(), &mut logits);
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidModel("non-finite logits".into()));
        }
        let trace = StepTrace {
            input_id: y_prev,
            input_masks,
            caches,
            top_h,
            attn_tanh,
            weights,
            context,
            pre,
            pre_mask,
            dlogits: Vec::new(),
        };
        Ok((new_states, logits, trace))
    }

    /// Teacher-forced pass: inputs `BOS y_1 .. y_n`, outputs `y_1 .. y_n EOS`.
    /// Returns the mean cross-entropy over the `n + 1` positions.
    fn forward_example(
        &self,
        v: &TensorList,
        source: &[TokenId],
        target: &[TokenId],
        dropout: &mut DropoutSource,
    ) -> Result<(f64, ExampleTrace)> {
        self.check_ids(source, "source")?;
        self.check_ids(target, "target")?;
        let (enc, enc_trace) = self.encoder.forward(v, self.src_embedding, source, dropout)?;
        let mut states = self.init_decoder(v, &enc)?;
        let init_h = states.iter().map(|s| s.h.clone()).collect();
        let keys = self.attention_keys(v, &enc);
        let mut steps = Vec::with_capacity(target.len() + 1);
        let mut total = 0.0;
        let mut prev = BOS;
        for &gold in target.iter().chain(std::iter::once(&EOS)) {
            let (next, logits, mut trace) = self.step(v, prev, &states, &enc, &keys, dropout)?;
            let (loss, grad) = softmax_cross_entropy_slice(&logits, gold)?;
            total += loss;
            trace.dlogits = grad;
            steps.push(trace);
            states = next;
            prev = gold;
        }
        let mean = total / steps.len() as f64;
        Ok((
            mean,
            ExampleTrace {
                enc,
                enc_trace,
                init_h,
                steps,
            },
        ))
    }

    /// Mean teacher-forced cross-entropy of one pair under `values`.
    pub fn example_loss(
        &self,
        values: &TensorList,
        source: &[TokenId],
        target: &[TokenId],
        dropout: &mut DropoutSource,
    ) -> Result<f64> {
        Ok(self.forward_example(values, source, target, dropout)?.0)
    }

    /// Accumulates `scale * d(sum of per-position losses)` into `g`.
    fn backward_example(&self, v: &TensorList, g: &mut TensorList, trace: &ExampleTrace, scale: f64) {
        let hs = self.config.hidden;
        let ew = self.config.encoder_width();
        let pw = self.config.projection_width();
        let m = trace.enc.len();
        let n_steps = trace.steps.len();

        let mut d_top = vec![vec![0.0; hs]; n_steps];
        let mut d_states = if self.attention.is_some() {
            vec![vec![0.0; ew]; m]
        } else {
            Vec::new()
        };
        let mut d_keys = vec![vec![0.0; hs]; if self.attention.is_some() { m } else { 0 }];

        for (i, st) in trace.steps.iter().enumerate() {
            let dl: Vec<f64> = st.dlogits.iter().map(|x| x * scale).collect();
            outer_acc(&st.pre, &dl, g[self.out_w].data_mut());
            add_acc(g[self.out_b].data_mut(), &dl);
            let mut dpre = vec![0.0; pw];
            matvec_t_acc(v[self.out_w].data(), &dl, &mut dpre);
            apply_mask(&mut dpre, st.pre_mask.as_ref());
            add_acc(&mut d_top[i], &dpre[..hs]);

            if let Some(att) = &self.attention {
                let dc = &dpre[hs..];
                let dw: Vec<f64> = trace
                    .enc
                    .states
                    .iter()
                    .map(|s| s.iter().zip(dc).map(|(a, b)| a * b).sum())
                    .collect();
                let mix: f64 = st.weights.iter().zip(&dw).map(|(a, b)| a * b).sum();
                let vv = v[att.v].data();
                let mut dq = vec![0.0; hs];
                for j in 0..m {
                    let wj = st.weights[j];
                    for (ds, c) in d_states[j].iter_mut().zip(dc) {
                        *ds += wj * c;
                    }
                    let de = wj * (dw[j] - mix);
                    if de == 0.0 {
                        continue;
                    }
                    let t = &st.attn_tanh[j];
                    let gv = g[att.v].data_mut();
                    for k in 0..hs {
                        gv[k] += de * t[k];
                        let da = de * vv[k] * (1.0 - t[k] * t[k]);
                        d_keys[j][k] += da;
                        dq[k] += da;
                    }
                }
                outer_acc(&st.top_h, &dq, g[att.w_dec].data_mut());
                matvec_t_acc(v[att.w_dec].data(), &dq, &mut d_top[i]);
            }
        }
        if let Some(att) = &self.attention {
            for j in 0..m {
                outer_acc(&trace.enc.states[j], &d_keys[j], g[att.w_enc].data_mut());
                matvec_t_acc(v[att.w_enc].data(), &d_keys[j], &mut d_states[j]);
            }
        }

        // Decoder BPTT, top layer first.
        let mut d_out = d_top;
        let mut d_init = vec![Vec::new(); self.decoder.len()];
        for (l, params) in self.decoder.iter().enumerate().rev() {
            let cell = params.bind(v);
            let mut dh_carry = vec![0.0; hs];
            let mut dc_carry = vec![0.0; hs];
            let mut d_in = vec![Vec::new(); n_steps];
            for i in (0..n_steps).rev() {
                let dh: Vec<f64> = d_out[i].iter().zip(&dh_carry).map(|(a, b)| a + b).collect();
                let sg = cell.backward(g, &trace.steps[i].caches[l], &dh, &dc_carry);
                let mut dx = sg.dx;
                apply_mask(&mut dx, trace.steps[i].input_masks[l].as_ref());
                d_in[i] = dx;
                dh_carry = sg.dh_prev;
                if !sg.dc_prev.is_empty() {
                    dc_carry = sg.dc_prev;
                }
            }
            // LSTM memory cells start from the same bridge output as h.
            if self.config.cell == CellKind::Lstm {
                add_acc(&mut dh_carry, &dc_carry);
            }
            d_init[l] = dh_carry;
            d_out = d_in;
        }
        let d = self.config.embed_dim;
        {
            let table = g[self.tgt_embedding].data_mut();
            for (st, dx) in trace.steps.iter().zip(&d_out) {
                add_acc(&mut table[st.input_id * d..(st.input_id + 1) * d], dx);
            }
        }

        let mut d_summaries = Vec::with_capacity(self.bridges.len());
        for ((bridge, h0), (dh0, summary)) in self
            .bridges
            .iter()
            .zip(&trace.init_h)
            .zip(d_init.iter().zip(&trace.enc.layer_summaries))
        {
            let da: Vec<f64> = dh0.iter().zip(h0).map(|(d, h)| d * (1.0 - h * h)).collect();
            outer_acc(summary, &da, g[bridge.w].data_mut());
            add_acc(g[bridge.b].data_mut(), &da);
            let mut ds = vec![0.0; ew];
            matvec_t_acc(v[bridge.w].data(), &da, &mut ds);
            d_summaries.push(ds);
        }
        self.encoder
            .backward(v, g, self.src_embedding, &trace.enc_trace, &d_states, &d_summaries);
    }
}

/// Encoder-decoder with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    arch: Architecture,
    params: ParameterSet,
}

fn strip_padding(source: &[TokenId]) -> &[TokenId] {
    let end = source.iter().rposition(|&id| id != PAD).map_or(0, |p| p + 1);
    &source[..end]
}

impl Seq2SeqModel {
    /// Fresh model with seeded initialization: U(-0.1, 0.1) embeddings,
    /// Glorot-uniform weights, zero biases (LSTM forget gates at 1).
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut params = ParameterSet::new();
        let arch = Architecture::register(&mut params, &config, seed)?;
        Ok(Self { arch, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.arch.config
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    /// Copies pretrained rows into both embedding tables.
    pub fn set_embeddings(&mut self, embeddings: &EmbeddingMatrix) -> Result<()> {
        let t = embeddings.as_tensor().clone();
        self.params.set_value(self.arch.src_embedding, t.clone())?;
        self.params.set_value(self.arch.tgt_embedding, t)
    }

    pub fn encode(&self, source: &[TokenId]) -> Result<EncoderStates> {
        self.arch.check_ids(source, "source")?;
        crate::recurrent::encode_bidirectional(
            source,
            &self.arch.encoder,
            self.params.values(),
            self.arch.src_embedding,
        )
    }

    pub fn init_decoder(&self, enc: &EncoderStates) -> Result<Vec<CellState>> {
        self.arch.init_decoder(self.params.values(), enc)
    }

    /// Attention context and weights for decoder state `s_d`.
    pub fn attention_context(&self, s_d: &[f64], enc: &EncoderStates) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.arch.attention.is_none() {
            return Err(Error::Config("model has no attention".into()));
        }
        if enc.is_empty() {
            return Err(Error::invalid("attention over an empty encoding"));
        }
        if s_d.len() != self.config().hidden {
            return Err(Error::Shape("decoder state width mismatch".into()));
        }
        let v = self.params.values();
        let keys = self.arch.attention_keys(v, enc);
        let (c, w, _) = self.arch.attend(v, s_d, enc, &keys);
        Ok((c, w))
    }

    /// Feeds `y_prev` through the decoder and predicts the next token.
    pub fn decode_step(
        &self,
        y_prev: TokenId,
        states: &[CellState],
        enc: &EncoderStates,
        dropout: &mut DropoutSource,
    ) -> Result<DecoderStep> {
        let v = self.params.values();
        let keys = self.arch.attention_keys(v, enc);
        let (states, logits, trace) = self.arch.step(v, y_prev, states, enc, &keys, dropout)?;
        let attention = self.arch.attention.is_some();
        Ok(DecoderStep {
            states,
            context: attention.then_some(trace.context),
            weights: attention.then_some(trace.weights),
            logits,
        })
    }

    /// Mean teacher-forced cross-entropy with dropout disabled.
    pub fn sequence_loss(&self, source: &[TokenId], target: &[TokenId]) -> Result<f64> {
        self.loss_with(source, target, &mut DropoutSource::inactive())
    }

    pub fn loss_with(&self, source: &[TokenId], target: &[TokenId], dropout: &mut DropoutSource) -> Result<f64> {
        self.arch.example_loss(self.params.values(), source, target, dropout)
    }

    /// Forward and backward for one pair; adds `scale * ∇(mean loss)` to the
    /// parameter gradients and returns the mean loss.
    pub fn accumulate_gradients(
        &mut self,
        source: &[TokenId],
        target: &[TokenId],
        scale: f64,
        dropout: &mut DropoutSource,
    ) -> Result<f64> {
        let (values, grads) = self.params.split_mut();
        let (loss, trace) = self.arch.forward_example(values, source, target, dropout)?;
        let per_position = scale / trace.steps.len() as f64;
        self.arch.backward_example(values, grads, &trace, per_position);
        Ok(loss)
    }

    /// Greedy decoding: arg-max token per step (lowest id on ties), stopping
    /// at EOS or `max_decode_len`. Trailing padding in `source` is ignored
    /// and EOS is not part of the output.
    pub fn greedy_decode(&self, source: &[TokenId]) -> Result<Vec<TokenId>> {
        let source = strip_padding(source);
        if source.is_empty() {
            return Err(Error::invalid("cannot decode an empty source"));
        }
        let v = self.params.values();
        let enc = self.encode(source)?;
        let keys = self.arch.attention_keys(v, &enc);
        let mut states = self.arch.init_decoder(v, &enc)?;
        let mut out = Vec::new();
        let mut prev = BOS;
        let mut dropout = DropoutSource::inactive();
        while out.len() < self.config().max_decode_len {
            let (next, logits, _) = self.arch.step(v, prev, &states, &enc, &keys, &mut dropout)?;
            let best = argmax(&logits);
            if best == EOS {
                break;
            }
            out.push(best);
            prev = best;
            states = next;
        }
        Ok(out)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
