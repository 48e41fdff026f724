use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{TokenId, Vocabulary, BOS, EOS, PAD};
use crate::error::Error;
use crate::numerics::{softmax_cross_entropy_slice, AdamConfig, AdamState, DropoutSource};
use crate::recurrent::{CellKind, EncoderStates};

fn small_config(cell: CellKind, layers: usize, attention: bool) -> ModelConfig {
    ModelConfig {
        cell,
        layers,
        attention,
        bidirectional: true,
        hidden: 8,
        embed_dim: 6,
        vocab_size: 20,
        dropout: 0.0,
        max_decode_len: 10,
    }
}

fn random_ids(rng: &mut ChaCha8Rng, n: usize) -> Vec<TokenId> {
    (0..n).map(|_| rng.gen_range(4..20)).collect()
}

fn tok(v: &Vocabulary, text: &str) -> Vec<TokenId> {
    v.encode(&text.split_whitespace().collect::<Vec<_>>())
}

#[test]
fn gradient_check_all_variants() {
    for variant in Variant::all() {
        let report = model_gradient_check(variant, CheckOptions::default()).unwrap();
        assert!(report.checked > 1000, "{variant}: {} coordinates", report.checked);
        assert!(
            report.max_rel_error < GRADCHECK_TOLERANCE,
            "{variant}: {} at {:?}",
            report.max_rel_error,
            report.worst
        );
    }
}

#[test]
fn gradient_check_with_fixed_dropout_mask() {
    for variant in ["lstm-l2-att", "gru-l2-noatt"] {
        let options = CheckOptions {
            dropout: 0.3,
            ..CheckOptions::default()
        };
        let report = model_gradient_check(variant.parse().unwrap(), options).unwrap();
        assert!(report.max_rel_error < GRADCHECK_TOLERANCE, "{variant}: {report:?}");
    }
}

#[test]
fn gradient_check_unidirectional_encoder() {
    let options = CheckOptions {
        bidirectional: false,
        ..CheckOptions::default()
    };
    for variant in ["lstm-l1-noatt", "gru-l2-att"] {
        let report = model_gradient_check(variant.parse().unwrap(), options).unwrap();
        assert!(report.max_rel_error < GRADCHECK_TOLERANCE, "{variant}: {report:?}");
    }
}

#[test]
fn gradient_check_detects_corruption() {
    let options = CheckOptions {
        corrupt: true,
        ..CheckOptions::default()
    };
    let report = model_gradient_check("gru-l1-noatt".parse().unwrap(), options).unwrap();
    assert!(report.max_rel_error >= GRADCHECK_TOLERANCE);
    assert_eq!(report.worst.as_ref().map(|w| w.0.as_str()), Some("output.w"));
}

#[test]
fn zero_summary_gives_zero_decoder_state() {
    let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 2, false), 1).unwrap();
    let enc = EncoderStates {
        states: vec![vec![0.0; 16]],
        layer_summaries: vec![vec![0.0; 16]; 2],
    };
    let init = model.init_decoder(&enc).unwrap();
    assert_eq!(init.len(), 2);
    for s in init {
        assert_eq!(s.h, vec![0.0; 8]);
        assert_eq!(s.c, Some(vec![0.0; 8]));
    }
}

#[test]
fn decoder_init_matches_manual_bridge() {
    let mut model = Seq2SeqModel::new(small_config(CellKind::Gru, 2, false), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bridges = model.architecture().bridges.clone();
    for b in &bridges {
        for x in model.params_mut().value_mut(b.b).data_mut() {
            *x = rng.gen_range(-0.5..0.5);
        }
    }
    let enc = model.encode(&[4, 5, 6]).unwrap();
    let init = model.init_decoder(&enc).unwrap();
    for (l, b) in bridges.iter().enumerate() {
        let w = model.params().value(b.w).data();
        let bias = model.params().value(b.b).data();
        let summary = &enc.layer_summaries[l];
        assert_eq!(summary.len(), 16);
        for k in 0..8 {
            let mut a = bias[k];
            for (i, s) in summary.iter().enumerate() {
                a += s * w[i * 8 + k];
            }
            assert!((init[l].h[k] - a.tanh()).abs() < 1e-12);
        }
        assert_eq!(init[l].c, None);
    }
}

#[test]
fn lstm_decoder_memory_starts_at_bridge_output() {
    let mut model = Seq2SeqModel::new(small_config(CellKind::Lstm, 2, true), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for b in model.architecture().bridges.clone() {
        for x in model.params_mut().value_mut(b.b).data_mut() {
            *x = rng.gen_range(-0.5..0.5);
        }
    }
    let enc = model.encode(&[4, 5, 6]).unwrap();
    for s in model.init_decoder(&enc).unwrap() {
        assert!(s.h.iter().any(|x| *x != 0.0));
        assert_eq!(s.c.as_ref(), Some(&s.h));
    }
}

#[test]
fn init_decoder_rejects_layer_mismatch() {
    let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 2, false), 1).unwrap();
    let enc = EncoderStates {
        states: vec![vec![0.0; 16]],
        layer_summaries: vec![vec![0.0; 16]],
    };
    assert!(matches!(model.init_decoder(&enc), Err(Error::Config(_))));
}

#[test]
fn attention_singleton_and_uniform() {
    let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 1, true), 2).unwrap();
    let s_d: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 - 0.3).collect();
    let one = EncoderStates {
        states: vec![(0..16).map(|i| i as f64 / 16.0).collect()],
        layer_summaries: vec![vec![0.0; 16]],
    };
    let (c, w) = model.attention_context(&s_d, &one).unwrap();
    assert_eq!(w, vec![1.0]);
    assert_eq!(c, one.states[0]);

    let same = EncoderStates {
        states: vec![one.states[0].clone(); 5],
        layer_summaries: vec![vec![0.0; 16]],
    };
    let (_, w) = model.attention_context(&s_d, &same).unwrap();
    for x in w {
        assert!((x - 0.2).abs() < 1e-15);
    }
}

#[test]
fn attention_matches_score_oracle() {
    let model = Seq2SeqModel::new(small_config(CellKind::Gru, 1, true), 9).unwrap();
    let att = model.architecture().attention.unwrap();
    let w_enc = model.params().value(att.w_enc).data();
    let w_dec = model.params().value(att.w_dec).data();
    let v = model.params().value(att.v).data();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let enc = EncoderStates {
        states: (0..4)
            .map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
        layer_summaries: vec![vec![0.0; 16]],
    };
    let s_d: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let scores: Vec<f64> = enc
        .states
        .iter()
        .map(|s| {
            (0..8)
                .map(|k| {
                    let key: f64 = (0..16).map(|i| s[i] * w_enc[i * 8 + k]).sum();
                    let query: f64 = (0..8).map(|i| s_d[i] * w_dec[i * 8 + k]).sum();
                    v[k] * (key + query).tanh()
                })
                .sum()
        })
        .collect();
    let z: f64 = scores.iter().map(|e| e.exp()).sum();
    let expected: Vec<f64> = scores.iter().map(|e| e.exp() / z).collect();

    let (c, w) = model.attention_context(&s_d, &enc).unwrap();
    for (a, b) in w.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
        assert!(*a >= 0.0);
    }
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for (k, got) in c.iter().enumerate() {
        let ck: f64 = (0..4).map(|j| expected[j] * enc.states[j][k]).sum();
        assert!((got - ck).abs() < 1e-12);
    }
}

#[test]
fn attention_weights_are_a_distribution_every_step() {
    let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 2, true), 4).unwrap();
    let enc = model.encode(&[5, 6, 7, 8, 9, 10]).unwrap();
    let mut states = model.init_decoder(&enc).unwrap();
    let mut prev = BOS;
    for _ in 0..6 {
        let step = model
            .decode_step(prev, &states, &enc, &mut DropoutSource::inactive())
            .unwrap();
        let w = step.weights.unwrap();
        assert_eq!(w.len(), 6);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(w.iter().all(|x| *x >= 0.0));
        assert_eq!(step.context.unwrap().len(), 16);
        assert_eq!(step.logits.len(), 20);
        prev = crate::seq2seq::argmax(&step.logits);
        states = step.states;
    }
}

#[test]
fn attention_requires_enabled_model() {
    let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 1, false), 1).unwrap();
    let enc = model.encode(&[4]).unwrap();
    assert!(model.attention_context(&[0.0; 8], &enc).is_err());
}

#[test]
fn decode_step_rejects_unknown_id() {
    let model = Seq2SeqModel::new(small_config(CellKind::Gru, 1, false), 1).unwrap();
    let enc = model.encode(&[4, 5]).unwrap();
    let states = model.init_decoder(&enc).unwrap();
    let err = model
        .decode_step(20, &states, &enc, &mut DropoutSource::inactive())
        .unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
    assert!(model.sequence_loss(&[4, 99], &[5]).is_err());
}

#[test]
fn non_attention_logits_ignore_non_final_states() {
    for cell in [CellKind::Lstm, CellKind::Gru] {
        let model = Seq2SeqModel::new(small_config(cell, 2, false), 8).unwrap();
        let enc = model.encode(&[4, 9, 13, 7]).unwrap();
        let states = model.init_decoder(&enc).unwrap();
        let base = model
            .decode_step(BOS, &states, &enc, &mut DropoutSource::inactive())
            .unwrap();
        let mut perturbed = enc.clone();
        for x in &mut perturbed.states[1] {
            *x += 0.5;
        }
        let after = model
            .decode_step(BOS, &states, &perturbed, &mut DropoutSource::inactive())
            .unwrap();
        assert_eq!(base.logits, after.logits);
        assert!(base.context.is_none() && base.weights.is_none());

        let att = Seq2SeqModel::new(small_config(cell, 2, true), 8).unwrap();
        let enc = att.encode(&[4, 9, 13, 7]).unwrap();
        let states = att.init_decoder(&enc).unwrap();
        let base = att
            .decode_step(BOS, &states, &enc, &mut DropoutSource::inactive())
            .unwrap();
        let mut perturbed = enc.clone();
        for x in &mut perturbed.states[1] {
            *x += 0.5;
        }
        let after = att
            .decode_step(BOS, &states, &perturbed, &mut DropoutSource::inactive())
            .unwrap();
        assert_ne!(base.logits, after.logits);
    }
}

#[test]
fn teacher_forced_loss_is_mean_of_step_losses() {
    for attention in [false, true] {
        let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 2, attention), 12).unwrap();
        let source = [6, 7, 8];
        let target = [9, 10];
        let enc = model.encode(&source).unwrap();
        let mut states = model.init_decoder(&enc).unwrap();
        let mut prev = BOS;
        let mut terms = Vec::new();
        for gold in [9, 10, EOS] {
            let step = model
                .decode_step(prev, &states, &enc, &mut DropoutSource::inactive())
                .unwrap();
            terms.push(softmax_cross_entropy_slice(&step.logits, gold).unwrap().0);
            states = step.states;
            prev = gold;
        }
        let expected = terms.iter().sum::<f64>() / 3.0;
        let loss = model.sequence_loss(&source, &target).unwrap();
        assert!((loss - expected).abs() < 1e-12);
    }
}

#[test]
fn untrained_loss_is_near_uniform() {
    let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 2, false), 21).unwrap();
    let loss = model.sequence_loss(&[5, 6, 7], &[8, 9, 10]).unwrap();
    assert!((loss - 20f64.ln()).abs() < 0.25, "loss {loss}");
}

#[test]
fn batch_loss_equals_mean_of_single_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs: Vec<(Vec<TokenId>, Vec<TokenId>)> = (0..5)
        .map(|i| (random_ids(&mut rng, 1 + i), random_ids(&mut rng, 5 - i)))
        .collect();
    for attention in [false, true] {
        let mut model = Seq2SeqModel::new(small_config(CellKind::Gru, 2, attention), 6).unwrap();
        let singles: Vec<f64> = pairs.iter().map(|(s, t)| model.sequence_loss(s, t).unwrap()).collect();
        let batch = Batch::pack(&pairs).unwrap();
        assert_eq!(batch.padded_source(0).len(), 5);
        assert_eq!(batch.padded_source(0)[1..], [PAD; 4]);
        for (i, (s, t)) in pairs.iter().enumerate() {
            assert_eq!(batch.example(i), (s.as_slice(), t.as_slice()));
        }
        let mut adam = AdamState::new(model.params(), AdamConfig::default());
        let loss = train_batch(
            &mut model,
            &batch,
            &mut adam,
            StepOptions {
                seed: 0,
                clip_norm: None,
            },
        )
        .unwrap();
        let mean = singles.iter().sum::<f64>() / singles.len() as f64;
        assert!((loss - mean).abs() < 1e-6);
    }
}

#[test]
fn padding_does_not_change_decoding() {
    for attention in [false, true] {
        let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 2, attention), 13).unwrap();
        let src = [4, 8, 15, 16];
        let padded = [4, 8, 15, 16, PAD, PAD, PAD];
        assert_eq!(
            model.greedy_decode(&src).unwrap(),
            model.greedy_decode(&padded).unwrap()
        );
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut model = Seq2SeqModel::new(small_config(CellKind::Lstm, 1, true), 3).unwrap();
    let before = model.params().values().clone();
    let batch = Batch::pack(&[(vec![4, 5], vec![6])]).unwrap();
    let mut adam = AdamState::new(model.params(), AdamConfig::with_lr(0.0));
    let loss = train_batch(
        &mut model,
        &batch,
        &mut adam,
        StepOptions {
            seed: 0,
            clip_norm: Some(1.0),
        },
    )
    .unwrap();
    assert!(loss.is_finite());
    assert_eq!(model.params().values(), &before);
}

#[test]
fn empty_inputs_are_rejected() {
    let model = Seq2SeqModel::new(small_config(CellKind::Gru, 1, false), 3).unwrap();
    assert!(matches!(model.greedy_decode(&[]), Err(Error::InvalidArgument(_))));
    assert!(matches!(
        model.greedy_decode(&[PAD, PAD]),
        Err(Error::InvalidArgument(_))
    ));
    assert!(Batch::pack::<Vec<TokenId>, Vec<TokenId>>(&[]).is_err());
}

fn overfit(cell: CellKind, attention: bool) -> (Seq2SeqModel, f64) {
    let mut config = small_config(cell, 2, attention);
    config.hidden = 16;
    let mut model = Seq2SeqModel::new(config, 17).unwrap();
    let batch = Batch::pack(&[(vec![4, 5, 6, 7], vec![9, 11, 13, 15, 17])]).unwrap();
    let mut adam = AdamState::new(model.params(), AdamConfig::with_lr(0.01));
    let options = StepOptions {
        seed: 1,
        clip_norm: None,
    };
    for _ in 0..200 {
        train_batch(&mut model, &batch, &mut adam, options).unwrap();
    }
    let loss = model.sequence_loss(&[4, 5, 6, 7], &[9, 11, 13, 15, 17]).unwrap();
    (model, loss)
}

#[test]
fn overfits_one_pair() {
    for (cell, attention) in [(CellKind::Lstm, false), (CellKind::Gru, true)] {
        let (model, loss) = overfit(cell, attention);
        assert!(loss < 0.1, "{cell} attention={attention}: loss {loss}");
        assert_eq!(model.greedy_decode(&[4, 5, 6, 7]).unwrap(), vec![9, 11, 13, 15, 17]);
    }
}

#[test]
fn decode_stops_at_eos_or_length() {
    let mut model = Seq2SeqModel::new(small_config(CellKind::Lstm, 1, false), 1).unwrap();
    let (w, b) = (model.architecture().out_w, model.architecture().out_b);
    model.params_mut().value_mut(w).fill(0.0);
    model.params_mut().value_mut(b).data_mut()[EOS] = 1.0;
    assert!(model.greedy_decode(&[4, 5]).unwrap().is_empty());

    let mut config = small_config(CellKind::Lstm, 1, false);
    config.max_decode_len = 5;
    let mut model = Seq2SeqModel::new(config, 1).unwrap();
    model.params_mut().value_mut(w).fill(0.0);
    model.params_mut().value_mut(b).data_mut()[7] = 1.0;
    assert_eq!(model.greedy_decode(&[4, 5]).unwrap(), vec![7; 5]);
}

#[test]
fn argmax_prefers_lowest_index() {
    assert_eq!(argmax(&[0.1, 0.7, 0.7, 0.2]), 1);
    assert_eq!(argmax(&[1.0; 3]), 0);
}

#[test]
fn greedy_decode_is_deterministic() {
    let model = Seq2SeqModel::new(small_config(CellKind::Gru, 2, true), 31).unwrap();
    let a = model.greedy_decode(&[4, 7, 9]).unwrap();
    assert_eq!(a, model.greedy_decode(&[4, 7, 9]).unwrap());
    assert!(a.len() <= 10);
}

#[test]
fn best_epoch_tie_rule() {
    assert_eq!(select_best_epoch(&[2.0, 3.1, 3.1, 2.8]), Some(2));
    assert_eq!(select_best_epoch(&[0.5]), Some(1));
    assert_eq!(select_best_epoch(&[]), None);
}

fn toy_data() -> (Vocabulary, Vec<TrainExample>, Vec<DevExample>) {
    let vocab = Vocabulary::from_tokens("a b c d e f g h".split(' ').map(String::from)).unwrap();
    let lines = [
        ("a b c d", "c d e f"),
        ("c d e f", "e f g h"),
        ("e f g h", "g h a b"),
        ("g h a b", "a b c d"),
    ];
    let train = lines
        .iter()
        .map(|(s, t)| TrainExample {
            source: tok(&vocab, s),
            target: tok(&vocab, t),
        })
        .collect();
    let dev = lines
        .iter()
        .map(|(s, t)| DevExample {
            source: tok(&vocab, s),
            reference: t.split(' ').map(String::from).collect(),
        })
        .collect();
    (vocab, train, dev)
}

#[test]
fn train_loop_restores_best_epoch() {
    let (vocab, train, dev) = toy_data();
    let mut config = small_config(CellKind::Lstm, 1, true);
    config.vocab_size = vocab.len();
    let schedule = Schedule {
        epochs: 40,
        batch_size: 2,
        lr: 0.02,
        seed: 3,
        clip_norm: Some(5.0),
    };
    let run = || {
        let mut model = Seq2SeqModel::new(config.clone(), 5).unwrap();
        let mut bests = Vec::new();
        let mut saved = None;
        let outcome = train_loop(&mut model, &train, &dev, &vocab, schedule, |event| {
            if let TrainEvent::NewBest(m, rec) = event {
                bests.push(rec.epoch);
                saved = Some(m.params().values().clone());
            }
            Ok(())
        })
        .unwrap();
        (model, outcome, bests, saved.unwrap())
    };
    let (model, outcome, bests, saved) = run();
    assert_eq!(outcome.history.len(), 40);
    let bleus: Vec<f64> = outcome.history.iter().map(|r| r.dev_bleu).collect();
    assert_eq!(Some(outcome.best_epoch), select_best_epoch(&bleus));
    assert_eq!(bests.last(), Some(&outcome.best_epoch));
    assert_eq!(model.params().values(), &saved);
    assert_eq!(dev_bleu(&model, &vocab, &dev).unwrap(), outcome.best_dev_bleu);
    assert_eq!(outcome.best_dev_bleu, 1.0);

    let (model2, outcome2, _, _) = run();
    assert_eq!(outcome, outcome2);
    assert_eq!(model, model2);
}

#[test]
fn single_epoch_is_best() {
    let (vocab, train, dev) = toy_data();
    let mut config = small_config(CellKind::Gru, 1, false);
    config.vocab_size = vocab.len();
    let mut model = Seq2SeqModel::new(config, 5).unwrap();
    let schedule = Schedule {
        epochs: 1,
        ..Schedule::default()
    };
    let outcome = train_loop(&mut model, &train, &dev, &vocab, schedule, |_| Ok(())).unwrap();
    assert_eq!(outcome.best_epoch, 1);
    assert_eq!(outcome.history.len(), 1);
}

#[test]
fn checkpoint_round_trip() {
    let model = Seq2SeqModel::new(small_config(CellKind::Gru, 2, true), 8).unwrap();
    let meta = BTreeMap::from([("epoch".to_string(), "3".to_string())]);
    let bytes = checkpoint_bytes(&model, "abc123", &meta);
    assert_eq!(&bytes[..8], MAGIC);
    let back = parse_checkpoint(&bytes).unwrap();
    assert_eq!(back.model, model);
    assert_eq!(back.vocab_hash, "abc123");
    assert_eq!(back.metadata, meta);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.evp");
    save_checkpoint(&path, &model, "h", &BTreeMap::new()).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap().model, model);
}

#[test]
fn checkpoint_rejects_corruption() {
    let model = Seq2SeqModel::new(small_config(CellKind::Lstm, 1, false), 8).unwrap();
    let bytes = checkpoint_bytes(&model, "h", &BTreeMap::new());
    let is_integrity = |b: &[u8]| matches!(parse_checkpoint(b), Err(Error::Integrity(_)));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(is_integrity(&bad_magic));
    assert!(is_integrity(&bytes[..bytes.len() - 8]));
    let mut extra = bytes.clone();
    extra.extend_from_slice(&[0; 8]);
    assert!(is_integrity(&extra));
    assert!(is_integrity(&bytes[..12]));

    let text = String::from_utf8_lossy(&bytes).into_owned();
    let header_start = 16;
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header = &text[header_start..header_start + header_len];
    for (from, to) in [
        ("output.b\t20", "output.b\t21"),
        ("output.w", "output.x"),
        ("hidden=8", "hidden=9"),
    ] {
        assert!(header.contains(from), "{from}");
        let edited = header.replacen(from, to, 1);
        let mut b = bytes[..8].to_vec();
        b.extend_from_slice(&(edited.len() as u64).to_le_bytes());
        b.extend_from_slice(edited.as_bytes());
        b.extend_from_slice(&bytes[16 + header_len..]);
        assert!(is_integrity(&b), "{from} -> {to}");
    }

    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(is_integrity(&nan));
}
