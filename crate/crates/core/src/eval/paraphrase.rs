use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{tokenize, PairCorpus};
use crate::error::{Error, Result};

/// A gold set of sentences that all describe the same event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParaphraseSet {
    pub scenario: String,
    pub id: String,
    pub members: Vec<Vec<String>>,
}

impl ParaphraseSet {
    pub fn contains(&self, tokens: &[String]) -> bool {
        self.members.iter().any(|m| m.as_slice() == tokens)
    }
}

/// Gold paraphrase sets grouped by scenario. Sets of one scenario are disjoint.
#[derive(Debug, Clone, Default)]
pub struct ParaphraseInventory {
    sets: Vec<ParaphraseSet>,
    by_key: HashMap<(String, String), usize>,
    by_member: HashMap<Vec<String>, Vec<usize>>,
}

impl PartialEq for ParaphraseInventory {
    fn eq(&self, other: &Self) -> bool {
        self.sets == other.sets
    }
}

impl ParaphraseInventory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a normalized sentence to a set, creating the set on first use.
    /// Fails if the sentence already belongs to another set of the scenario.
    pub fn add(&mut self, scenario: &str, set_id: &str, sentence: &str) -> Result<()> {
        let tokens = tokenize(sentence);
        if tokens.is_empty() {
            return Err(Error::invalid("empty paraphrase sentence"));
        }
        let key = (scenario.to_owned(), set_id.to_owned());
        let idx = match self.by_key.get(&key) {
            Some(&i) => i,
            None => {
                self.sets.push(ParaphraseSet {
                    scenario: scenario.to_owned(),
                    id: set_id.to_owned(),
                    members: Vec::new(),
                });
                self.by_key.insert(key, self.sets.len() - 1);
                self.sets.len() - 1
            }
        };
        let owners = self.by_member.entry(tokens.clone()).or_default();
        if owners.contains(&idx) {
            return Ok(());
        }
        if let Some(&other) = owners.iter().find(|&&o| self.sets[o].scenario == scenario) {
            return Err(Error::Integrity(format!(
                "sentence {:?} is in sets {:?} and {:?} of scenario {:?}",
                tokens.join(" "),
                self.sets[other].id,
                set_id,
                scenario
            )));
        }
        owners.push(idx);
        self.sets[idx].members.push(tokens);
        Ok(())
    }

    /// Parses `scenario<TAB>set_id<TAB>sentence` lines; blank lines are skipped.
    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let mut inv = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            if fields.len() != 3 || fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::format(
                    origin,
                    i + 1,
                    "expected scenario<TAB>set_id<TAB>sentence",
                ));
            }
            inv.add(fields[0], fields[1], fields[2]).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::format(origin, i + 1, m),
                Error::Integrity(m) => Error::Integrity(format!("{origin}:{}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(inv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for set in &self.sets {
            for m in &set.members {
                out.push_str(&format!("{}\t{}\t{}\n", set.scenario, set.id, m.join(" ")));
            }
        }
        out
    }

    pub fn sets(&self) -> &[ParaphraseSet] {
        &self.sets
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    /// Number of sets per scenario.
    pub fn scenario_sizes(&self) -> BTreeMap<&str, usize> {
        let mut sizes = BTreeMap::new();
        for s in &self.sets {
            *sizes.entry(s.scenario.as_str()).or_insert(0) += 1;
        }
        sizes
    }

    /// The unique set containing `tokens`, if any. Membership in sets of two
    /// different scenarios is an integrity error.
    pub fn set_of(&self, tokens: &[String]) -> Result<Option<&ParaphraseSet>> {
        match self.by_member.get(tokens).map(Vec::as_slice) {
            None | Some([]) => Ok(None),
            Some([one]) => Ok(Some(&self.sets[*one])),
            Some(many) => Err(Error::Integrity(format!(
                "sentence {:?} belongs to {} gold sets",
                tokens.join(" "),
                many.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearMiss {
    pub source: String,
    pub target: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub evaluated_pairs: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub near_misses: Vec<NearMiss>,
}

impl AccuracyReport {
    /// Near misses as `source<TAB>target<TAB>predicted` lines.
    pub fn near_miss_text(&self) -> String {
        self.near_misses
            .iter()
            .map(|n| format!("{}\t{}\t{}\n", n.source, n.target, n.predicted))
            .collect()
    }
}

/// Fraction of predictions token-identical to some member of the target's
/// gold set. Pairs whose target is in no set are not evaluated.
pub fn paraphrase_accuracy<S: AsRef<str>>(
    sources: &[S],
    targets: &[S],
    predictions: &[S],
    inventory: &ParaphraseInventory,
) -> Result<AccuracyReport> {
    if sources.len() != targets.len() || targets.len() != predictions.len() {
        return Err(Error::invalid(format!(
            "misaligned inputs: {} sources, {} targets, {} predictions",
            sources.len(),
            targets.len(),
            predictions.len()
        )));
    }
    let mut evaluated_pairs = 0;
    let mut correct = 0;
    let mut near_misses = Vec::new();
    for ((src, tgt), pred) in sources.iter().zip(targets).zip(predictions) {
        let target = tokenize(tgt.as_ref());
        let Some(set) = inventory.set_of(&target)? else {
            continue;
        };
        evaluated_pairs += 1;
        let predicted = tokenize(pred.as_ref());
        if set.contains(&predicted) {
            correct += 1;
        } else {
            near_misses.push(NearMiss {
                source: tokenize(src.as_ref()).join(" "),
                target: target.join(" "),
                predicted: predicted.join(" "),
            });
        }
    }
    let accuracy = if evaluated_pairs == 0 {
        0.0
    } else {
        correct as f64 / evaluated_pairs as f64
    };
    Ok(AccuracyReport {
        evaluated_pairs,
        correct,
        accuracy,
        near_misses,
    })
}

/// Pairs whose target is a member of some gold set, in input order.
/// Repeated targets are kept.
pub fn select_gold_subset(pairs: &PairCorpus, inventory: &ParaphraseInventory) -> PairCorpus {
    PairCorpus {
        name: pairs.name.clone(),
        pairs: pairs
            .pairs
            .iter()
            .filter(|p| inventory.by_member.contains_key(&p.target))
            .cloned()
            .collect(),
    }
}
