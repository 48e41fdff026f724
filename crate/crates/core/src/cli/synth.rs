//! Synthetic script corpora with known successor functions.
//!
//! Every scenario has `events_per_scenario` events. Event `e` is described
//! by a verb and an object; its paraphrases are fixed sentence templates
//! ("styles") filled with those two words. A pair maps paraphrase `k` of an
//! event to paraphrase `k` of its successor. With `branching = 2` each
//! source starts with one of two cue words, and each cue selects a
//! different successor.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{PairCorpus, SentencePair};
use crate::error::{Error, Result};
use crate::eval::ParaphraseInventory;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
pub const CUES: [&str; 2] = ["morning", "evening"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub num_scenarios: usize,
    pub events_per_scenario: usize,
    pub paraphrases_per_event: usize,
    /// Number of distinct object words, assigned to events round-robin.
    pub vocab_pool: usize,
    /// Successors per event (1 or 2).
    pub branching: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_scenarios: 5,
            events_per_scenario: 10,
            paraphrases_per_event: 3,
            vocab_pool: 50,
            branching: 1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub pairs: PairCorpus,
    pub inventory: ParaphraseInventory,
    /// `successors[s][b][e]`: successor of event `e` in scenario `s` under cue `b`.
    pub successors: Vec<Vec<Vec<usize>>>,
    /// `paraphrases[s][e][k]`: surface text of paraphrase `k` of event `e`.
    pub paraphrases: Vec<Vec<Vec<String>>>,
}

fn template(style: usize, verb: &str, object: &str) -> String {
    match style {
        0 => format!("{verb} the {object} now"),
        1 => format!("{verb} the {object} carefully"),
        2 => format!("{verb} the {object} slowly"),
        3 => format!("{verb} the {object} again"),
        4 => format!("then {verb} the {object}"),
        5 => format!("please {verb} your {object}"),
        k => format!("{verb} the {object} step{k}"),
    }
}

/// Two-syllable pseudo-words in seeded order.
fn word_list(rng: &mut ChaCha8Rng) -> Vec<String> {
    let syllables: Vec<String> = CONSONANTS
        .iter()
        .flat_map(|&c| VOWELS.iter().map(move |&v| format!("{}{}", c as char, v as char)))
        .collect();
    let mut words: Vec<String> = syllables
        .iter()
        .flat_map(|a| syllables.iter().map(move |b| format!("{a}{b}")))
        .collect();
    words.shuffle(rng);
    words
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_scenarios == 0 || self.paraphrases_per_event == 0 || self.vocab_pool == 0 {
            return Err(Error::invalid(
                "scenario, paraphrase and object counts must be positive",
            ));
        }
        if !(1..=2).contains(&self.branching) {
            return Err(Error::invalid("branching must be 1 or 2"));
        }
        if self.events_per_scenario < 1 + self.branching {
            return Err(Error::invalid("need more events than successors per event"));
        }
        let words = CONSONANTS.len().pow(2) * VOWELS.len().pow(2);
        if self.num_scenarios * self.events_per_scenario + self.vocab_pool > words {
            return Err(Error::invalid("spec needs more distinct words than the generator has"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticCorpus> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut words = word_list(&mut rng).into_iter();
        let objects: Vec<String> = words.by_ref().take(self.vocab_pool).collect();
        let (ns, ne, np) = (self.num_scenarios, self.events_per_scenario, self.paraphrases_per_event);

        let mut paraphrases = Vec::with_capacity(ns);
        let mut successors = Vec::with_capacity(ns);
        let mut inventory = ParaphraseInventory::new();
        for s in 0..ns {
            let mut events = Vec::with_capacity(ne);
            for e in 0..ne {
                let verb = words.next().expect("validated word budget");
                let object = &objects[(s * ne + e) % objects.len()];
                let texts: Vec<String> = (0..np).map(|k| template(k, &verb, object)).collect();
                for t in &texts {
                    inventory.add(&format!("scenario{s}"), &format!("event{e}"), t)?;
                }
                events.push(texts);
            }
            paraphrases.push(events);
            // A random cycle through all events; cue b jumps b + 1 places along it.
            let mut cycle: Vec<usize> = (0..ne).collect();
            cycle.shuffle(&mut rng);
            let mut succ = vec![vec![0; ne]; self.branching];
            for (b, table) in succ.iter_mut().enumerate() {
                for i in 0..ne {
                    table[cycle[i]] = cycle[(i + b + 1) % ne];
                }
            }
            successors.push(succ);
        }

        // Pairs of one event stay together; events are shuffled globally.
        let mut blocks: Vec<(usize, usize)> = (0..ns).flat_map(|s| (0..ne).map(move |e| (s, e))).collect();
        blocks.shuffle(&mut rng);
        let mut pairs = Vec::with_capacity(ns * ne * np * self.branching);
        for (s, e) in blocks {
            for b in 0..self.branching {
                let next = successors[s][b][e];
                for (text, target) in paraphrases[s][e].iter().zip(&paraphrases[s][next]) {
                    let source = if self.branching == 1 {
                        text.clone()
                    } else {
                        format!("{} {text}", CUES[b])
                    };
                    pairs.push(SentencePair::from_text(&source, target)?);
                }
            }
        }
        Ok(SyntheticCorpus {
            pairs: PairCorpus::new("synthetic", pairs),
            inventory,
            successors,
            paraphrases,
        })
    }
}

impl SyntheticCorpus {
    /// `scenario<TAB>cue<TAB>event<TAB>successor` lines.
    pub fn successors_text(&self) -> String {
        let mut out = String::new();
        for (s, tables) in self.successors.iter().enumerate() {
            for (b, table) in tables.iter().enumerate() {
                for (e, next) in table.iter().enumerate() {
                    out.push_str(&format!("scenario{s}\t{b}\tevent{e}\tevent{next}\n"));
                }
            }
        }
        out
    }

    /// Distinct surface tokens in the corpus.
    pub fn token_count(&self) -> usize {
        let mut seen = HashSet::new();
        for p in &self.pairs.pairs {
            seen.extend(p.source.iter().chain(&p.target));
        }
        seen.len()
    }
}
