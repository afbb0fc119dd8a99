use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RelevanceList;
use crate::rng::{self, mix_seed};

/// One query: the documents judged relevant and a full ranking of the
/// collection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub relevant: Vec<usize>,
    pub ranking: Vec<usize>,
}

impl RetrievalQuery {
    pub fn new(relevant: Vec<usize>, ranking: Vec<usize>) -> Result<Self> {
        if relevant.is_empty() {
            return Err(Error::NoRelevantDocuments);
        }
        let mut seen = ranking.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != ranking.len() {
            return Err(Error::Data("ranking lists a document twice".into()));
        }
        Ok(RetrievalQuery { relevant, ranking })
    }

    /// Binary grades of the ranking.
    pub fn relevance_list(&self) -> Result<RelevanceList> {
        let grades = self
            .ranking
            .iter()
            .map(|d| u32::from(self.relevant.contains(d)))
            .collect();
        RelevanceList::new(grades, self.relevant.len())
    }
}

/// Each query picks 1..=n_docs/2 relevant documents and ranks the collection
/// by a noisy score (relevance plus uniform noise on [0, 1.5)), so rankings
/// are good but imperfect.
pub fn generate_retrieval_task(
    n_queries: usize,
    n_docs: usize,
    seed: u64,
) -> Result<Vec<RetrievalQuery>> {
    if n_docs < 2 {
        return Err(Error::Data(format!(
            "need at least 2 documents, got {n_docs}"
        )));
    }
    if n_queries == 0 {
        return Err(Error::Data("need at least 1 query".into()));
    }
    (0..n_queries)
        .map(|q| {
            let mut r = rng::rng(mix_seed(seed, q as u64));
            let n_rel = 1 + rng::below(&mut r, n_docs / 2);
            let mut docs: Vec<usize> = (0..n_docs).collect();
            rng::shuffle(&mut r, &mut docs);
            let mut relevant = docs[..n_rel].to_vec();
            relevant.sort_unstable();
            let mut scored: Vec<(f64, usize)> = (0..n_docs)
                .map(|d| {
                    let base = if relevant.binary_search(&d).is_ok() {
                        1.0
                    } else {
                        0.0
                    };
                    (base + rng::uniform(&mut r, 0.0, 1.5), d)
                })
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            RetrievalQuery::new(relevant, scored.into_iter().map(|(_, d)| d).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::map_paper;

    #[test]
    fn task_invariants() {
        let task = generate_retrieval_task(50, 12, 8).unwrap();
        assert_eq!(task, generate_retrieval_task(50, 12, 8).unwrap());
        for q in &task {
            let list = q.relevance_list().unwrap();
            let hits = list.grades().iter().filter(|&&g| g > 0).count();
            assert!(list.n_rel() >= hits && list.n_rel() >= 1);
            assert_eq!(q.ranking.len(), 12);
        }
        assert!(generate_retrieval_task(1, 1, 0).is_err());
    }

    #[test]
    fn all_relevant_map_is_harmonic_mean() {
        for n in 1..=12 {
            let q = RetrievalQuery::new((0..n).collect(), (0..n).rev().collect()).unwrap();
            let harmonic: f64 = (1..=n).map(|k| 1.0 / k as f64).sum::<f64>() / n as f64;
            let mut brute = 0.0;
            for k in 1..=n {
                brute += 1.0 / k as f64;
            }
            brute /= n as f64;
            let map = map_paper(&q.relevance_list().unwrap()).unwrap();
            assert!((map - harmonic).abs() < 1e-15 && (map - brute).abs() < 1e-15);
        }
    }
}
