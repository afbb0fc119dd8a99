//! Synthetic QA corpora, tokenizer/vocabulary, batching, mixup and a toy
//! ranked-retrieval task.
//!
//! Two corpus kinds stand in for real training text. `General` pairs are
//! definition questions over a fixed list of protein-biology concepts.
//! `HyperSpecific` pairs ask about the role or mechanism of seeded synthetic
//! proteins listed in a [`FactTable`]; each answer restates one fact.
//!
//! Item `i` of a corpus draws from `rng(mix_seed(seed, i))`, so any pair can
//! be regenerated on its own.

mod batch;
mod retrieval;
mod text;

pub use batch::{batches, mixup, sample_mixup_lambda, MIXUP_ALPHA};
pub use retrieval::{generate_retrieval_task, RetrievalQuery};
pub use text::{
    decode, encode, encode_prompt, normalize, tokenize, Encoded, Vocabulary, BOS, EOS, PAD, SEP,
    UNK,
};

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, mix_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    General,
    HyperSpecific,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::General => "general",
            Kind::HyperSpecific => "hyper_specific",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Kind::General),
            "specific" | "hyper_specific" => Ok(Kind::HyperSpecific),
            _ => Err(Error::Usage(format!(
                "unknown corpus kind {s:?} (expected general or specific)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    pub kind: Kind,
    pub entity_id: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub role: String,
    pub mechanism: String,
}

/// Seeded synthetic proteins with one role and one mechanism each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactTable {
    entries: Vec<Entity>,
}

const SYLLABLES: [&str; 16] = [
    "ka", "vo", "rin", "tel", "mor", "zu", "pex", "lan", "dri", "sol", "nek", "tra", "bi", "quo",
    "fen", "gal",
];

const ROLES: [&str; 12] = [
    "controls cell cycle arrest after dna damage",
    "guards the membrane against oxidative stress",
    "drives cholesterol uptake in liver cells",
    "limits inflammation in the gut lining",
    "sustains insulin release from beta cells",
    "directs axon growth in the developing brain",
    "protects telomeres during cell division",
    "promotes repair of damaged muscle fibers",
    "regulates iron storage in red blood cells",
    "blocks viral entry at the cell surface",
    "tunes the circadian clock in neurons",
    "triggers apoptosis in infected cells",
];

const MECHANISMS: [&str; 12] = [
    "binds dna and activates repair genes",
    "phosphorylates target kinases at serine sites",
    "cleaves misfolded proteins in the proteasome",
    "opens a chloride channel in the membrane",
    "recruits ubiquitin ligases to its partners",
    "stabilizes microtubules during mitosis",
    "transports zinc ions across the membrane",
    "represses transcription by methylating histones",
    "dimerizes and blocks receptor signaling",
    "hydrolyzes atp to pump calcium out of cells",
    "acetylates histones near stress promoters",
    "sequesters cytochrome c inside mitochondria",
];

const TABLE_STREAM: u64 = u64::MAX;

impl FactTable {
    /// `n` entities with unique names; deterministic per `(n, seed)`.
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Data("fact table needs at least one entity".into()));
        }
        let mut r = rng::rng(mix_seed(seed, TABLE_STREAM));
        let mut entries: Vec<Entity> = Vec::with_capacity(n);
        while entries.len() < n {
            let parts = 2 + rng::below(&mut r, 2);
            let mut name: String = (0..parts)
                .map(|_| *rng::choose(&mut r, &SYLLABLES))
                .collect();
            name.push_str(&(1 + rng::below(&mut r, 9)).to_string());
            if entries.iter().any(|e| e.name == name) {
                continue;
            }
            entries.push(Entity {
                name,
                role: rng::choose(&mut r, &ROLES).to_string(),
                mechanism: rng::choose(&mut r, &MECHANISMS).to_string(),
            });
        }
        Ok(FactTable { entries })
    }

    pub fn entries(&self) -> &[Entity] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> Option<&Entity> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fact {
    Role,
    Mechanism,
}

/// Question templates for hyper-specific pairs; `{}` is the entity name.
pub const SPECIFIC_TEMPLATES: [(&str, Fact); 6] = [
    (
        "What is the mechanism of action for the protein {}?",
        Fact::Mechanism,
    ),
    ("How does the protein {} work?", Fact::Mechanism),
    ("By what mechanism does {} act?", Fact::Mechanism),
    ("What is the role of the protein {}?", Fact::Role),
    ("What does {} do in the cell?", Fact::Role),
    ("Which function does the protein {} have?", Fact::Role),
];

pub const GENERAL_TEMPLATES: [&str; 3] = [
    "What is the {}?",
    "Define the {}.",
    "Can you explain the {}?",
];

pub const CONCEPTS: [(&str, &str); 20] = [
    (
        "primary structure of a protein",
        "the linear sequence of amino acids",
    ),
    (
        "secondary structure of a protein",
        "local folding into helices and sheets",
    ),
    (
        "tertiary structure of a protein",
        "the full three dimensional fold of one chain",
    ),
    (
        "quaternary structure of a protein",
        "the assembly of several folded chains",
    ),
    (
        "active site of an enzyme",
        "the pocket where substrates bind and react",
    ),
    ("peptide bond", "the amide link between two amino acids"),
    ("denaturation of a protein", "the loss of its folded shape"),
    (
        "function of a chaperone",
        "helping other proteins fold correctly",
    ),
    (
        "role of ribosomes",
        "translating messenger rna into protein",
    ),
    (
        "purpose of a signal peptide",
        "targeting a new protein for secretion",
    ),
    (
        "allosteric site",
        "a binding site away from the active site",
    ),
    (
        "isoelectric point",
        "the ph at which a protein has no net charge",
    ),
    (
        "hydrophobic effect",
        "the clustering of nonpolar groups away from water",
    ),
    (
        "disulfide bond",
        "a covalent link between two cysteine residues",
    ),
    ("protein domain", "a compact unit that folds on its own"),
    (
        "post translational modification",
        "a chemical change made after synthesis",
    ),
    (
        "purpose of protein degradation",
        "removing damaged or unneeded proteins",
    ),
    ("alpha helix", "a right handed coil held by hydrogen bonds"),
    (
        "beta sheet",
        "strands joined side by side by hydrogen bonds",
    ),
    ("membrane protein", "a protein embedded in a lipid bilayer"),
];

/// Entities in a hyper-specific corpus of `size` pairs: about six pairs each.
pub fn entity_count(size: usize) -> usize {
    size.div_ceil(6).max(1)
}

fn fill(template: &str, value: &str) -> String {
    template.replacen("{}", value, 1)
}

/// Answer text for a hyper-specific pair.
pub fn specific_answer(entity: &Entity, fact: Fact) -> String {
    let text = match fact {
        Fact::Role => &entity.role,
        Fact::Mechanism => &entity.mechanism,
    };
    format!("{} {}.", entity.name, text)
}

pub fn generate_corpus(kind: Kind, size: usize, seed: u64) -> Result<Vec<QAPair>> {
    if size == 0 {
        return Err(Error::Data("corpus size must be at least 1".into()));
    }
    match kind {
        Kind::General => Ok((0..size)
            .map(|i| {
                let mut r = rng::rng(mix_seed(seed, i as u64));
                let (concept, definition) = CONCEPTS[i % CONCEPTS.len()];
                let template = rng::choose(&mut r, &GENERAL_TEMPLATES);
                QAPair {
                    question: fill(template, concept),
                    answer: format!("the {concept} is {definition}."),
                    kind,
                    entity_id: None,
                }
            })
            .collect()),
        Kind::HyperSpecific => {
            let table = FactTable::generate(entity_count(size), seed)?;
            Ok((0..size)
                .map(|i| {
                    let mut r = rng::rng(mix_seed(seed, i as u64));
                    let id = i % table.len();
                    let entity = &table.entries[id];
                    let (template, fact) = *rng::choose(&mut r, &SPECIFIC_TEMPLATES);
                    QAPair {
                        question: fill(template, &entity.name),
                        answer: specific_answer(entity, fact),
                        kind,
                        entity_id: Some(id),
                    }
                })
                .collect())
        }
    }
}

/// Writes one JSON object per line (`question`, `answer`, `kind`,
/// `entity_id`), `\n`-terminated.
pub fn write_jsonl(path: &Path, pairs: &[QAPair]) -> Result<()> {
    let mut out = Vec::new();
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<QAPair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: QAPair = serde_json::from_str(line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if (pair.kind == Kind::HyperSpecific) != pair.entity_id.is_some() {
            return Err(Error::Data(format!(
                "{}:{}: entity_id must be set exactly for hyper_specific pairs",
                path.display(),
                i + 1
            )));
        }
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(Error::Data(format!("{} holds no QA pairs", path.display())));
    }
    Ok(pairs)
}

/// 90/10 split of `0..n`: `(train, eval)` index lists, each ascending.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Data(format!(
            "need at least 2 pairs to split, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::rng(seed), &mut perm);
    let n_eval = (n / 10).max(1);
    let mut eval = perm[..n_eval].to_vec();
    let mut train = perm[n_eval..].to_vec();
    eval.sort_unstable();
    train.sort_unstable();
    Ok((train, eval))
}
