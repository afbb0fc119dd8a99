use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SEP: usize = 4;

const RESERVED: [&str; 5] = ["<pad>", "<unk>", "<bos>", "<eos>", "<sep>"];

/// Lowercased runs of alphanumerics; every other non-space character is a
/// token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Tokens joined by single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Reserved ids 0..5, then every token of `texts` by descending count,
    /// ties broken lexicographically.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, _)| !RESERVED.contains(&t.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t))
            .collect::<Vec<_>>();
        Vocabulary::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn ids(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}

/// `BOS question SEP answer EOS`, right-padded with PAD to `max_len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<usize>,
    /// Non-pad length.
    pub len: usize,
    pub question: Range<usize>,
    /// Answer tokens, excluding EOS (which sits at `answer.end`).
    pub answer: Range<usize>,
}

impl Encoded {
    pub fn tokens(&self) -> &[usize] {
        &self.ids[..self.len]
    }

    pub fn sep(&self) -> usize {
        self.question.end
    }
}

fn check_max_len(max_len: usize) -> Result<()> {
    if max_len < 3 {
        return Err(Error::Data(format!(
            "max_len must be at least 3, got {max_len}"
        )));
    }
    Ok(())
}

/// Frames a pair. When it does not fit, the question keeps up to
/// `max_len - 3` tokens and the answer is cut to what remains; EOS is always
/// the last non-pad token.
pub fn encode(question: &str, answer: &str, vocab: &Vocabulary, max_len: usize) -> Result<Encoded> {
    check_max_len(max_len)?;
    let mut q = vocab.ids(question);
    let mut a = vocab.ids(answer);
    q.truncate(max_len - 3);
    a.truncate(max_len - 3 - q.len());
    let mut ids = Vec::with_capacity(max_len);
    ids.push(BOS);
    ids.extend(&q);
    ids.push(SEP);
    ids.extend(&a);
    ids.push(EOS);
    let len = ids.len();
    ids.resize(max_len, PAD);
    let sep = 1 + q.len();
    Ok(Encoded {
        ids,
        len,
        question: 1..sep,
        answer: sep + 1..sep + 1 + a.len(),
    })
}

/// `BOS question SEP`, unpadded, with the same question truncation as
/// [`encode`].
pub fn encode_prompt(question: &str, vocab: &Vocabulary, max_len: usize) -> Result<Vec<usize>> {
    check_max_len(max_len)?;
    let mut q = vocab.ids(question);
    q.truncate(max_len - 3);
    let mut ids = Vec::with_capacity(q.len() + 2);
    ids.push(BOS);
    ids.extend(q);
    ids.push(SEP);
    Ok(ids)
}

/// Space-joined text of the non-reserved ids.
pub fn decode(ids: &[usize], vocab: &Vocabulary) -> String {
    ids.iter()
        .filter(|&&id| id >= RESERVED.len())
        .filter_map(|&id| vocab.token(id))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::build(["What is p53?", "p53 binds DNA.", "what binds"])
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(
            tokenize("What is  P53's role?"),
            ["what", "is", "p53", "'", "s", "role", "?"]
        );
        assert!(tokenize("   ").is_empty());
        assert_eq!(normalize("A  b.C"), "a b . c");
    }

    #[test]
    fn vocabulary_order() {
        let v = vocab();
        assert_eq!(&v.tokens()[..5], &RESERVED.map(String::from));
        // counts: binds 2, p53 2, what 2, ? 1, . 1, dna 1, is 1
        assert_eq!(
            &v.tokens()[5..],
            &["binds", "p53", "what", ".", "?", "dna", "is"]
        );
        assert_eq!(v, vocab());
        assert_eq!(v.id("zebra"), UNK);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    }

    #[test]
    fn encode_frames_and_pads() {
        let v = vocab();
        let e = encode("What is p53?", "p53 binds DNA.", &v, 16).unwrap();
        assert_eq!(e.ids.len(), 16);
        assert_eq!(e.len, 11);
        assert_eq!(e.ids[0], BOS);
        assert_eq!(e.ids[e.sep()], SEP);
        assert_eq!(e.ids[e.answer.end], EOS);
        assert!(e.ids[e.len..].iter().all(|&t| t == PAD));
        assert_eq!(
            decode(&e.ids[e.answer.clone()], &v),
            normalize("p53 binds DNA.")
        );
        assert_eq!(
            decode(&e.ids[e.question.clone()], &v),
            normalize("What is p53?")
        );
        assert_eq!(
            encode_prompt("What is p53?", &v, 16).unwrap(),
            e.ids[..=e.sep()]
        );
        assert_eq!(v.ids("unknown")[0], 1);
    }

    /// Question of 3 words, answer of 3, max_len 7: BOS q q q SEP a EOS.
    #[test]
    fn truncation_keeps_eos() {
        let v = vocab();
        let e = encode("what is p53", "p53 binds dna", &v, 7).unwrap();
        assert_eq!(e.len, 7);
        assert_eq!(e.question, 1..4);
        assert_eq!(e.answer, 5..6);
        assert_eq!(
            e.ids,
            vec![
                BOS,
                v.id("what"),
                v.id("is"),
                v.id("p53"),
                SEP,
                v.id("p53"),
                EOS
            ]
        );

        let tight = encode("what is p53 binds", "dna", &v, 5).unwrap();
        assert_eq!(tight.ids, vec![BOS, v.id("what"), v.id("is"), SEP, EOS]);
        assert!(tight.answer.is_empty());
        assert!(encode("a", "b", &v, 2).is_err());
    }
}
