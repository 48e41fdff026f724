use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::args::{EvaluateArgs, GradcheckArgs, PredictArgs, SplitArgs, SplitMode, SynthArgs, TrainArgs};
use super::config::RunConfig;
use super::synth::SyntheticSpec;
use crate::corpus::{load_embeddings, split_descript, split_random, tokenize, Fractions, PairCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{bleu_by_length_bucket, bleu_corpus, paraphrase_accuracy, MetricsReport, ParaphraseInventory};
use crate::seq2seq::{
    checkpoint_bytes, load_checkpoint, model_gradient_check, train_loop, CheckOptions, DevExample, EpochRecord,
    Seq2SeqModel, TrainEvent, TrainExample, Variant, GRADCHECK_TOLERANCE,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.evp";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const HISTORY_FILE: &str = "history.tsv";
pub const CONFIG_FILE: &str = "config.txt";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Writes to a temporary sibling and renames, so readers never see a
/// partially written file.
fn replace_file(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write_file(&tmp, contents)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn split(args: &SplitArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = PairCorpus::read(&args.input)?;
    let (train, dev, test) = match args.mode {
        SplitMode::Descript => split_descript(&corpus),
        SplitMode::Random => {
            let fractions = Fractions::new(args.train_frac, args.dev_frac, args.test_frac)?;
            split_random(&corpus, fractions, args.seed)?
        }
    };
    let dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => args.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    create_dir(&dir)?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    let mut summary = String::new();
    for (part, data) in [("train", &train), ("dev", &dev), ("test", &test)] {
        write_file(&dir.join(format!("{stem}.{part}.tsv")), data.to_text())?;
        summary.push_str(&format!("{part}={}\n", data.len()));
    }
    write_file(&dir.join(format!("{stem}.counts.txt")), &summary)?;
    out.write_all(summary.as_bytes()).map_err(stdout_err)
}

/// Defaults, then the config file, then explicit flags.
pub fn resolve_run_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v.into();
            }
        };
    }
    set!(args.train, c.train);
    set!(args.dev, c.dev);
    set!(args.test, c.test);
    set!(args.out, c.output);
    set!(args.embeddings, c.embeddings);
    set!(args.cell, c.model.cell);
    set!(args.layers, c.model.layers);
    set!(args.attention, c.model.attention);
    set!(args.bidirectional, c.model.bidirectional);
    set!(args.hidden, c.model.hidden);
    set!(args.embed_dim, c.model.embed_dim);
    set!(args.dropout, c.model.dropout);
    set!(args.max_decode_len, c.model.max_decode_len);
    set!(args.batch, c.batch_size);
    set!(args.lr, c.lr);
    set!(args.epochs, c.epochs);
    set!(args.seed, c.seed);
    set!(args.vocab_size, c.vocab_size);
    if args.clip_norm.is_some() {
        c.clip_norm = args.clip_norm;
    }
    c.validate()?;
    Ok(c)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::invalid(format!("missing {what} (flag or config key)")))
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub best_dev_bleu: f64,
    pub history: Vec<EpochRecord>,
    pub vocab_size: usize,
}

fn history_line(r: &EpochRecord) -> String {
    format!("{}\t{:?}\t{:?}\n", r.epoch, r.train_loss, r.dev_bleu)
}

pub const HISTORY_HEADER: &str = "epoch\ttrain_loss\tdev_bleu\n";

/// Trains from a resolved configuration, writing checkpoint, vocabulary,
/// history and config into the output directory.
pub fn train_with_config(config: &RunConfig, progress: Option<&mut dyn Write>) -> Result<TrainSummary> {
    config.validate()?;
    let out_dir = required(&config.output, "output directory")?;
    let train_corpus = PairCorpus::read(required(&config.train, "training corpus")?)?;
    let dev_corpus = PairCorpus::read(required(&config.dev, "development corpus")?)?;
    if train_corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    create_dir(out_dir)?;
    write_file(&out_dir.join(CONFIG_FILE), config.to_text())?;

    let vocab = Vocabulary::build(&train_corpus, config.vocab_size)?;
    vocab.write(&out_dir.join(VOCAB_FILE))?;
    let mut model_config = config.model.clone();
    model_config.vocab_size = vocab.len();
    let mut model = Seq2SeqModel::new(model_config.clone(), config.seed)?;
    if let Some(path) = &config.embeddings {
        let table = load_embeddings(path, &vocab, model_config.embed_dim, config.seed)?;
        model.set_embeddings(&table)?;
    }

    let train: Vec<TrainExample> = train_corpus
        .pairs
        .iter()
        .map(|p| TrainExample {
            source: vocab.encode(&p.source),
            target: vocab.encode(&p.target),
        })
        .collect();
    let dev: Vec<DevExample> = dev_corpus
        .pairs
        .iter()
        .map(|p| DevExample {
            source: vocab.encode(&p.source),
            reference: p.target.clone(),
        })
        .collect();

    let history_path = out_dir.join(HISTORY_FILE);
    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    let hash = vocab.content_hash();
    let mut history_text = String::from(HISTORY_HEADER);
    write_file(&history_path, &history_text)?;
    let mut progress = progress;
    let outcome = train_loop(&mut model, &train, &dev, &vocab, config.schedule(), |event| {
        match event {
            TrainEvent::Epoch(r) => {
                history_text.push_str(&history_line(r));
                write_file(&history_path, &history_text)?;
                if let Some(w) = progress.as_mut() {
                    writeln!(
                        w,
                        "epoch {} loss {:.6} dev_bleu {:.6}",
                        r.epoch, r.train_loss, r.dev_bleu
                    )
                    .map_err(stdout_err)?;
                }
            }
            TrainEvent::NewBest(m, r) => {
                let meta = BTreeMap::from([
                    ("epoch".to_string(), r.epoch.to_string()),
                    ("dev_bleu".to_string(), format!("{:?}", r.dev_bleu)),
                    ("seed".to_string(), config.seed.to_string()),
                ]);
                let bytes = checkpoint_bytes(m, &hash, &meta);
                replace_file(&checkpoint_path, &bytes)?;
            }
        }
        Ok(())
    })?;
    Ok(TrainSummary {
        best_epoch: outcome.best_epoch,
        best_dev_bleu: outcome.best_dev_bleu,
        history: outcome.history,
        vocab_size: vocab.len(),
    })
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let config = resolve_run_config(args)?;
    let mut stderr = std::io::stderr();
    let progress: Option<&mut dyn Write> = if args.quiet { None } else { Some(&mut stderr) };
    let summary = train_with_config(&config, progress)?;
    writeln!(
        out,
        "best_epoch={}\nbest_dev_bleu={:?}\nvocab_size={}",
        summary.best_epoch, summary.best_dev_bleu, summary.vocab_size
    )
    .map_err(stdout_err)
}

/// Source side of an input line: the part before the first TAB, if any.
fn source_of(line: &str) -> &str {
    line.split('\t').next().unwrap_or("")
}

/// Decodes each source sentence; blank sources give blank predictions.
pub fn predict_lines(model: &Seq2SeqModel, vocab: &Vocabulary, lines: &[&str], workers: usize) -> Result<Vec<String>> {
    let decode = |line: &&str| -> Result<String> {
        let tokens = tokenize(source_of(line));
        if tokens.is_empty() {
            return Ok(String::new());
        }
        Ok(vocab.decode(&model.greedy_decode(&vocab.encode(&tokens))?).join(" "))
    };
    let workers = workers.max(1);
    if workers == 1 || lines.len() < 2 {
        return lines.iter().map(decode).collect();
    }
    let chunk = lines.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = lines
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(decode).collect::<Result<Vec<_>>>()))
            .collect();
        let mut all = Vec::with_capacity(lines.len());
        for h in handles {
            all.extend(h.join().expect("decoder thread panicked")?);
        }
        Ok(all)
    })
}

/// Loads a checkpoint and verifies it was trained with `vocab`.
pub fn load_model(checkpoint: &Path, vocab_path: &Path) -> Result<(Seq2SeqModel, Vocabulary)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let vocab = Vocabulary::read(vocab_path)?;
    if vocab.content_hash() != ckpt.vocab_hash {
        return Err(Error::Integrity(format!(
            "vocabulary {} does not match the checkpoint's vocabulary",
            vocab_path.display()
        )));
    }
    if vocab.len() != ckpt.model.config().vocab_size {
        return Err(Error::Integrity("vocabulary size does not match the checkpoint".into()));
    }
    Ok((ckpt.model, vocab))
}

pub fn predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let (model, vocab) = load_model(&args.checkpoint, &args.vocab)?;
    let text = read_file(&args.input)?;
    let lines: Vec<&str> = text.lines().collect();
    let predictions = predict_lines(&model, &vocab, &lines, args.workers)?;
    let body: String = predictions.iter().map(|p| format!("{p}\n")).collect();
    match &args.output {
        Some(path) => write_file(path, body),
        None => out.write_all(body.as_bytes()).map_err(stdout_err),
    }
}

fn token_lines(text: &str) -> Vec<Vec<String>> {
    text.lines().map(tokenize).collect()
}

/// Evaluation inputs already aligned line by line.
pub struct EvalInputs {
    pub sources: Vec<Vec<String>>,
    pub references: Vec<Vec<String>>,
    pub predictions: Vec<Vec<String>>,
}

pub fn metrics(inputs: &EvalInputs, inventory: Option<&ParaphraseInventory>) -> Result<MetricsReport> {
    let n = inputs.predictions.len();
    if inputs.sources.len() != n || inputs.references.len() != n {
        return Err(Error::invalid(format!(
            "misaligned files: {} predictions, {} references, {} sources",
            n,
            inputs.references.len(),
            inputs.sources.len()
        )));
    }
    let bleu = bleu_corpus(&inputs.predictions, &inputs.references)?;
    let buckets = bleu_by_length_bucket(&inputs.sources, &inputs.predictions, &inputs.references)?;
    let accuracy = match inventory {
        Some(inv) => {
            let join = |v: &Vec<Vec<String>>| v.iter().map(|t| t.join(" ")).collect::<Vec<_>>();
            Some(paraphrase_accuracy(
                &join(&inputs.sources),
                &join(&inputs.references),
                &join(&inputs.predictions),
                inv,
            )?)
        }
        None => None,
    };
    Ok(MetricsReport {
        pairs: n,
        bleu,
        buckets,
        accuracy,
    })
}

pub fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let predictions = token_lines(&read_file(&args.predictions)?);
    let (sources, references) = match (&args.pairs, &args.references, &args.sources) {
        (Some(p), _, _) => {
            let corpus = PairCorpus::read(p)?;
            corpus.pairs.into_iter().map(|p| (p.source, p.target)).unzip()
        }
        (None, Some(r), Some(s)) => (token_lines(&read_file(s)?), token_lines(&read_file(r)?)),
        _ => return Err(Error::invalid("give --pairs, or both --references and --sources")),
    };
    let inventory = args.inventory.as_deref().map(ParaphraseInventory::read).transpose()?;
    let inputs = EvalInputs {
        sources,
        references,
        predictions,
    };
    let report = metrics(&inputs, inventory.as_ref())?;
    if let Some(acc) = &report.accuracy {
        let path = args.near_miss.clone().unwrap_or_else(|| {
            let mut p = args.predictions.clone().into_os_string();
            p.push(".nearmiss.tsv");
            PathBuf::from(p)
        });
        write_file(&path, acc.near_miss_text())?;
    }
    let text = report.to_text();
    match &args.output {
        Some(path) => write_file(path, text),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

pub fn gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let variants = match &args.variant {
        Some(v) => vec![v.parse::<Variant>()?],
        None => Variant::all(),
    };
    let options = CheckOptions {
        seed: args.seed,
        dropout: args.dropout,
        corrupt: args.corrupt_gradient,
        ..CheckOptions::default()
    };
    let mut failed = Vec::new();
    for variant in variants {
        let report = model_gradient_check(variant, options)?;
        let pass = report.max_rel_error < GRADCHECK_TOLERANCE;
        writeln!(
            out,
            "{variant}\tmax_rel_error={:.3e}\tchecked={}\t{}",
            report.max_rel_error,
            report.checked,
            if pass { "PASS" } else { "FAIL" }
        )
        .map_err(stdout_err)?;
        if !pass {
            failed.push(variant.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::CheckFailed(format!(
            "gradient check failed for {}",
            failed.join(", ")
        )))
    }
}

pub const SYNTH_CORPUS_FILE: &str = "corpus.tsv";
pub const SYNTH_INVENTORY_FILE: &str = "inventory.tsv";
pub const SYNTH_SUCCESSORS_FILE: &str = "successors.tsv";

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SyntheticSpec {
        num_scenarios: args.scenarios,
        events_per_scenario: args.events,
        paraphrases_per_event: args.paraphrases,
        vocab_pool: args.objects,
        branching: args.branching,
        seed: args.seed,
    };
    let corpus = spec.generate()?;
    create_dir(&args.out)?;
    write_file(&args.out.join(SYNTH_CORPUS_FILE), corpus.pairs.to_text())?;
    write_file(&args.out.join(SYNTH_INVENTORY_FILE), corpus.inventory.to_text())?;
    write_file(&args.out.join(SYNTH_SUCCESSORS_FILE), corpus.successors_text())?;
    writeln!(
        out,
        "pairs={}\nsets={}\ntokens={}",
        corpus.pairs.len(),
        corpus.inventory.num_sets(),
        corpus.token_count()
    )
    .map_err(stdout_err)
}
