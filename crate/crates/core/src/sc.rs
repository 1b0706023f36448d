//! Self-consistency aggregation: pool the diagnoses of several sampled
//! completions, cluster near-duplicate names by embedding similarity, rank
//! clusters by votes and position, and rebuild a single top-5 answer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::backend::Scorer;
use crate::case::Domain;
use crate::correctness::cosine;
use crate::error::{Error, Result};
use crate::parser::{ParsedOutput, Prediction, MEDICAL_DIAGNOSES};

pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisVote {
    pub name: String,
    pub sample_index: usize,
    /// 1-based rank inside its sample.
    pub rank_in_sample: usize,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// First member is the seed and the representative name.
    pub member_names: Vec<String>,
    pub centroid: Vec<f64>,
    pub vote_count: usize,
    pub avg_position: f64,
    pub composite_score: f64,
    pub representative_name: String,
    pub selected_reasoning: String,
    pub votes: Vec<DiagnosisVote>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScConfig {
    pub threshold: f64,
    pub output_size: usize,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_CLUSTER_THRESHOLD,
            output_size: MEDICAL_DIAGNOSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScResult {
    pub output: ParsedOutput,
    pub clusters: Vec<Cluster>,
    pub samples_used: usize,
}

/// Votes from every format-valid sample, keyed by sample position.
pub fn collect_votes(samples: &[ParsedOutput]) -> Vec<DiagnosisVote> {
    samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.format_valid)
        .flat_map(|(i, s)| {
            s.predictions.iter().map(move |p| DiagnosisVote {
                name: p.label.trim().to_string(),
                sample_index: i,
                rank_in_sample: p.rank,
                reasoning: p.reasoning.clone(),
            })
        })
        .collect()
}

/// Unique names ordered by the number of distinct samples naming them
/// (descending), ties broken lexicographically.
fn ordered_names(votes: &[DiagnosisVote]) -> Vec<String> {
    let mut samples: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for v in votes {
        samples.entry(&v.name).or_default().insert(v.sample_index);
    }
    let mut names: Vec<(&str, usize)> = samples.into_iter().map(|(n, s)| (n, s.len())).collect();
    names.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    names.into_iter().map(|(n, _)| n.to_string()).collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Greedy clustering with precomputed embeddings (one per unique name).
pub fn cluster_with_embeddings(
    votes: &[DiagnosisVote],
    embeddings: &BTreeMap<String, Vec<f64>>,
    threshold: f64,
) -> Result<Vec<Cluster>> {
    if votes.is_empty() {
        return Err(Error::invalid("no votes to cluster"));
    }
    let mut clusters: Vec<(Vec<String>, Vec<f64>, Vec<f64>)> = Vec::new();
    for name in ordered_names(votes) {
        let e = embeddings
            .get(&name)
            .ok_or_else(|| Error::invalid(format!("missing embedding for {name:?}")))?;
        match clusters.iter_mut().find(|(_, c, _)| cosine(c, e) >= threshold) {
            Some((members, centroid, sum)) => {
                members.push(name);
                sum.iter_mut().zip(e).for_each(|(s, x)| *s += x);
                *centroid = normalized(sum.clone());
            }
            None => clusters.push((vec![name], normalized(e.clone()), e.clone())),
        }
    }
    Ok(clusters
        .into_iter()
        .map(|(members, centroid, _)| {
            let member_votes: Vec<DiagnosisVote> = votes
                .iter()
                .filter(|v| members.contains(&v.name))
                .cloned()
                .collect();
            with_stats(members, centroid, member_votes)
        })
        .collect())
}

fn with_stats(members: Vec<String>, centroid: Vec<f64>, votes: Vec<DiagnosisVote>) -> Cluster {
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for v in &votes {
        let r = best.entry(v.sample_index).or_insert(v.rank_in_sample);
        *r = (*r).min(v.rank_in_sample);
    }
    let vote_count = best.len();
    let avg_position = best.values().sum::<usize>() as f64 / vote_count as f64;
    Cluster {
        representative_name: members[0].clone(),
        member_names: members,
        centroid,
        vote_count,
        avg_position,
        composite_score: composite_score(vote_count, avg_position),
        selected_reasoning: select_reasoning(&votes),
        votes,
    }
}

pub fn composite_score(vote_count: usize, avg_position: f64) -> f64 {
    vote_count as f64 * 100.0 - avg_position
}

/// Clusters unique names using embeddings fetched from the backend.
pub fn cluster_names(votes: &[DiagnosisVote], scorer: &Scorer, threshold: f64) -> Result<Vec<Cluster>> {
    let names = ordered_names(votes);
    let vectors = scorer.embed_batch(&names)?;
    let embeddings = names.into_iter().zip(vectors).collect();
    cluster_with_embeddings(votes, &embeddings, threshold)
}

/// Descending composite score, ties by representative name.
pub fn rank_clusters(mut clusters: Vec<Cluster>) -> Vec<Cluster> {
    clusters.sort_by(|a, b| {
        b.composite_score
            .total_cmp(&a.composite_score)
            .then_with(|| a.representative_name.cmp(&b.representative_name))
    });
    clusters
}

/// Longest reasoning (in characters) among votes ranked 1 or 2, or among
/// all votes when none is; ties go to the lowest sample index.
pub fn select_reasoning(votes: &[DiagnosisVote]) -> String {
    let pick = |pool: Vec<&DiagnosisVote>| {
        pool.into_iter()
            .min_by(|a, b| {
                b.reasoning
                    .chars()
                    .count()
                    .cmp(&a.reasoning.chars().count())
                    .then(a.sample_index.cmp(&b.sample_index))
                    .then(a.rank_in_sample.cmp(&b.rank_in_sample))
            })
            .map(|v| v.reasoning.clone())
    };
    pick(votes.iter().filter(|v| v.rank_in_sample <= 2).collect())
        .or_else(|| pick(votes.iter().collect()))
        .unwrap_or_default()
}

fn finish(clusters: Vec<Cluster>, samples_used: usize, cfg: &ScConfig) -> ScResult {
    let ranked = rank_clusters(clusters);
    let predictions: Vec<Prediction> = ranked
        .iter()
        .take(cfg.output_size)
        .enumerate()
        .map(|(i, c)| Prediction {
            label: c.representative_name.clone(),
            reasoning: c.selected_reasoning.clone(),
            rank: i + 1,
        })
        .collect();
    let mut diagnostics = Vec::new();
    if predictions.len() < cfg.output_size {
        diagnostics.push(format!(
            "only {} clusters, fewer than {}",
            predictions.len(),
            cfg.output_size
        ));
    }
    let output = ParsedOutput {
        domain: Domain::Medical,
        format_valid: predictions.len() == cfg.output_size,
        raw_length: 0,
        predictions,
        diagnostics,
    };
    ScResult {
        output: ParsedOutput {
            raw_length: output.to_canonical_json().to_string().chars().count(),
            ..output
        },
        clusters: ranked,
        samples_used,
    }
}

fn empty(samples: usize) -> ScResult {
    ScResult {
        output: ParsedOutput {
            domain: Domain::Medical,
            predictions: Vec::new(),
            format_valid: false,
            raw_length: 0,
            diagnostics: vec![format!("all {samples} samples are format-invalid")],
        },
        clusters: Vec::new(),
        samples_used: 0,
    }
}

pub fn aggregate(samples: &[ParsedOutput], scorer: &Scorer, cfg: &ScConfig) -> Result<ScResult> {
    if samples.is_empty() {
        return Err(Error::invalid("self-consistency needs at least one sample"));
    }
    let votes = collect_votes(samples);
    if votes.is_empty() {
        return Ok(empty(samples.len()));
    }
    let used = samples.iter().filter(|s| s.format_valid).count();
    Ok(finish(cluster_names(&votes, scorer, cfg.threshold)?, used, cfg))
}

/// Same as [`aggregate`] with caller-supplied name embeddings.
pub fn aggregate_with_embeddings(
    samples: &[ParsedOutput],
    embeddings: &BTreeMap<String, Vec<f64>>,
    cfg: &ScConfig,
) -> Result<ScResult> {
    if samples.is_empty() {
        return Err(Error::invalid("self-consistency needs at least one sample"));
    }
    let votes = collect_votes(samples);
    if votes.is_empty() {
        return Ok(empty(samples.len()));
    }
    let used = samples.iter().filter(|s| s.format_valid).count();
    Ok(finish(cluster_with_embeddings(&votes, embeddings, cfg.threshold)?, used, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vote(name: &str, sample: usize, rank: usize, reasoning: &str) -> DiagnosisVote {
        DiagnosisVote {
            name: name.into(),
            sample_index: sample,
            rank_in_sample: rank,
            reasoning: reasoning.into(),
        }
    }

    fn emb(pairs: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
        pairs.iter().map(|(n, v)| (n.to_string(), normalized(v.to_vec()))).collect()
    }

    #[test]
    fn greedy_uses_running_centroid() {
        // A-B and A-C are 0.9, B-C about 0.65; C against the A+B centroid
        // is about 0.795, so C seeds its own cluster.
        let votes = vec![
            vote("A", 0, 1, ""),
            vote("A", 1, 1, ""),
            vote("A", 2, 1, ""),
            vote("B", 0, 2, ""),
            vote("B", 1, 2, ""),
            vote("C", 0, 3, ""),
        ];
        let e = emb(&[
            ("A", &[1.0, 0.0, 0.0]),
            ("B", &[0.9, 0.435_889_894_354_067_4, 0.0]),
            ("C", &[0.9, -0.367_1, 0.235_0]),
        ]);
        let ab = cosine(&e["A"], &e["B"]);
        let ac = cosine(&e["A"], &e["C"]);
        assert!((ab - 0.9).abs() < 1e-6 && (ac - 0.9).abs() < 1e-3);
        let cl = cluster_with_embeddings(&votes, &e, 0.85).unwrap();
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].member_names, vec!["A", "B"]);
        assert_eq!(cl[1].member_names, vec!["C"]);
        let centroid_sim = cosine(&cl[0].centroid, &e["C"]);
        assert!(centroid_sim < 0.85 && centroid_sim > 0.79, "{centroid_sim}");
    }

    #[test]
    fn identical_and_distant_names() {
        let votes = vec![vote("x", 0, 1, ""), vote("y", 0, 2, "")];
        let same = emb(&[("x", &[1.0, 0.0]), ("y", &[1.0, 0.0])]);
        assert_eq!(cluster_with_embeddings(&votes, &same, 0.85).unwrap().len(), 1);
        let far = emb(&[("x", &[1.0, 0.0]), ("y", &[0.2, 0.979_795_897_113_271_2])]);
        assert_eq!(cluster_with_embeddings(&votes, &far, 0.85).unwrap().len(), 2);
    }

    #[test]
    fn scores_and_dominance() {
        assert_eq!(composite_score(7, 2.5), 697.5);
        assert_eq!(composite_score(1, 1.0), 99.0);
        assert_eq!(composite_score(2, 5.0), 195.0);
    }

    #[test]
    fn duplicate_name_in_sample_counts_once() {
        let votes = vec![vote("x", 0, 1, "a"), vote("x", 0, 4, "b"), vote("x", 1, 3, "c")];
        let e = emb(&[("x", &[1.0])]);
        let cl = cluster_with_embeddings(&votes, &e, 0.85).unwrap();
        assert_eq!(cl[0].vote_count, 2);
        assert_eq!(cl[0].avg_position, 2.0);
    }

    #[test]
    fn reasoning_selection() {
        let v = [vote("x", 0, 1, "short"), vote("x", 1, 3, "a much longer reasoning")];
        assert_eq!(select_reasoning(&v), "short");
        let v = [vote("x", 0, 4, "ab"), vote("x", 1, 5, "abcd"), vote("x", 2, 4, "abc")];
        assert_eq!(select_reasoning(&v), "abcd");
        let v = [vote("x", 3, 2, "same"), vote("x", 1, 1, "tied")];
        assert_eq!(select_reasoning(&v), "tied");
        assert_eq!(select_reasoning(&[vote("x", 0, 5, "only")]), "only");
    }

    #[test]
    fn rank_ties_are_lexicographic() {
        let e = emb(&[("b", &[1.0, 0.0]), ("a", &[0.0, 1.0])]);
        let votes = vec![vote("b", 0, 1, ""), vote("a", 1, 1, "")];
        let ranked = rank_clusters(cluster_with_embeddings(&votes, &e, 0.85).unwrap());
        assert_eq!(ranked[0].representative_name, "a");
    }

    #[test]
    fn invalid_samples_are_skipped() {
        let bad = ParsedOutput {
            domain: Domain::Medical,
            predictions: vec![Prediction { label: "x".into(), reasoning: "r".into(), rank: 1 }],
            format_valid: false,
            raw_length: 1,
            diagnostics: vec![],
        };
        let r = aggregate_with_embeddings(&[bad], &BTreeMap::new(), &ScConfig::default()).unwrap();
        assert!(r.output.predictions.is_empty());
        assert!(!r.output.format_valid);
        assert_eq!(r.output.diagnostics.len(), 1);
    }
}
