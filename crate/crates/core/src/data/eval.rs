//! Chunk F1 over BIO spans and per-token F1 for one target label.

use super::DataError;
use std::collections::{BTreeMap, BTreeSet};

/// Gold/predicted/correct counts; precision, recall, and F1 derive from
/// these with the degenerate cases pinned to 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl PrCounts {
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            self.correct as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            0.0
        } else {
            self.correct as f64 / self.gold as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChunkScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: PrCounts,
    pub per_type: BTreeMap<String, PrCounts>,
}

impl ChunkScore {
    fn from_counts(counts: PrCounts, per_type: BTreeMap<String, PrCounts>) -> Self {
        ChunkScore {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            counts,
            per_type,
        }
    }
}

/// Maximal BIO spans as (type, start, end-exclusive) triples. An `I-X`
/// with no open chunk of type X starts a new chunk (lenient repair);
/// labels that are neither `O` nor `B-`/`I-` prefixed close any open
/// chunk and start none.
pub fn bio_chunks(labels: &[String]) -> Vec<(String, usize, usize)> {
    let mut chunks = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, label) in labels.iter().enumerate() {
        let (kind, ty) = match label.split_once('-') {
            Some(("B", ty)) => ('B', ty),
            Some(("I", ty)) => ('I', ty),
            _ => ('O', ""),
        };
        match kind {
            'B' => {
                if let Some((t, s)) = open.take() {
                    chunks.push((t, s, i));
                }
                open = Some((ty.to_string(), i));
            }
            'I' => match &open {
                Some((t, _)) if t == ty => {}
                _ => {
                    // orphan continuation: treat as a chunk start
                    if let Some((t, s)) = open.take() {
                        chunks.push((t, s, i));
                    }
                    open = Some((ty.to_string(), i));
                }
            },
            _ => {
                if let Some((t, s)) = open.take() {
                    chunks.push((t, s, i));
                }
            }
        }
    }
    if let Some((t, s)) = open {
        chunks.push((t, s, labels.len()));
    }
    chunks
}

/// Chunk precision/recall/F1: a predicted chunk is correct iff its type
/// and both boundaries match a gold chunk exactly.
pub fn chunk_f1(gold: &[String], predicted: &[String]) -> Result<ChunkScore, DataError> {
    if gold.len() != predicted.len() {
        return Err(DataError::Misaligned(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let gold_chunks = bio_chunks(gold);
    let pred_chunks = bio_chunks(predicted);
    let gold_set: BTreeSet<_> = gold_chunks.iter().cloned().collect();

    let mut total = PrCounts {
        gold: gold_chunks.len(),
        predicted: pred_chunks.len(),
        correct: 0,
    };
    let mut per_type: BTreeMap<String, PrCounts> = BTreeMap::new();
    for (ty, _, _) in &gold_chunks {
        per_type.entry(ty.clone()).or_default().gold += 1;
    }
    for chunk in &pred_chunks {
        let entry = per_type.entry(chunk.0.clone()).or_default();
        entry.predicted += 1;
        if gold_set.contains(chunk) {
            entry.correct += 1;
            total.correct += 1;
        }
    }
    Ok(ChunkScore::from_counts(total, per_type))
}

/// Per-token binary precision/recall/F1 for one target label.
pub fn token_f1(
    gold: &[String],
    predicted: &[String],
    target: &str,
) -> Result<ChunkScore, DataError> {
    if gold.len() != predicted.len() {
        return Err(DataError::Misaligned(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let mut counts = PrCounts::default();
    for (g, p) in gold.iter().zip(predicted) {
        let g_hit = g == target;
        let p_hit = p == target;
        if g_hit {
            counts.gold += 1;
        }
        if p_hit {
            counts.predicted += 1;
        }
        if g_hit && p_hit {
            counts.correct += 1;
        }
    }
    let mut per_type = BTreeMap::new();
    per_type.insert(target.to_string(), counts);
    Ok(ChunkScore::from_counts(counts, per_type))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gold = labels(&["B-PER", "I-PER", "O", "B-LOC"]);
        let score = chunk_f1(&gold, &gold).unwrap();
        assert_eq!(score.f1, 1.0);
        assert_eq!(score.precision, 1.0);
        assert_eq!(score.recall, 1.0);
    }

    #[test]
    fn zero_predicted_chunks_score_zero() {
        let gold = labels(&["B-PER", "O"]);
        let pred = labels(&["O", "O"]);
        let score = chunk_f1(&gold, &pred).unwrap();
        assert_eq!(score.precision, 0.0);
        assert_eq!(score.recall, 0.0);
        assert_eq!(score.f1, 0.0);
    }

    #[test]
    fn partial_match_scores_two_thirds() {
        let gold = labels(&["B-PER", "I-PER", "O", "B-LOC"]);
        let pred = labels(&["B-PER", "I-PER", "O", "O"]);
        let score = chunk_f1(&gold, &pred).unwrap();
        assert_eq!(score.precision, 1.0);
        assert_eq!(score.recall, 0.5);
        assert!((score.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(score.per_type["PER"].correct, 1);
        assert_eq!(score.per_type["LOC"].gold, 1);
        assert_eq!(score.per_type["LOC"].predicted, 0);
    }

    #[test]
    fn boundary_mismatch_is_incorrect() {
        let gold = labels(&["B-X", "I-X", "O"]);
        let pred = labels(&["B-X", "O", "O"]);
        let score = chunk_f1(&gold, &pred).unwrap();
        assert_eq!(score.counts.correct, 0);
    }

    #[test]
    fn orphan_continuation_repairs_to_chunk_start() {
        // I-X with no open chunk acts as B-X
        let chunks = bio_chunks(&labels(&["O", "I-X", "I-X", "O"]));
        assert_eq!(chunks, vec![("X".to_string(), 1, 3)]);
        // type switch inside a chunk starts a new one
        let chunks = bio_chunks(&labels(&["B-X", "I-Y"]));
        assert_eq!(
            chunks,
            vec![("X".to_string(), 0, 1), ("Y".to_string(), 1, 2)]
        );
    }

    #[test]
    fn swapping_gold_and_pred_swaps_precision_and_recall() {
        let gold = labels(&["B-A", "I-A", "O", "B-B", "O", "B-A"]);
        let pred = labels(&["B-A", "O", "O", "B-B", "I-B", "O"]);
        let forward = chunk_f1(&gold, &pred).unwrap();
        let backward = chunk_f1(&pred, &gold).unwrap();
        assert!((forward.precision - backward.recall).abs() < 1e-15);
        assert!((forward.recall - backward.precision).abs() < 1e-15);
        assert!((forward.f1 - backward.f1).abs() < 1e-15);
    }

    #[test]
    fn appending_correct_o_instances_never_changes_f1() {
        let mut gold = labels(&["B-A", "I-A", "O", "B-B"]);
        let mut pred = labels(&["B-A", "O", "O", "B-B"]);
        let before = chunk_f1(&gold, &pred).unwrap();
        gold.extend(labels(&["O", "O", "O"]));
        pred.extend(labels(&["O", "O", "O"]));
        let after = chunk_f1(&gold, &pred).unwrap();
        assert_eq!(before.counts, after.counts);
        assert_eq!(before.f1, after.f1);
    }

    #[test]
    fn misaligned_lengths_error() {
        let gold = labels(&["O", "O"]);
        let pred = labels(&["O"]);
        assert!(matches!(
            chunk_f1(&gold, &pred).unwrap_err(),
            DataError::Misaligned(_)
        ));
        assert!(token_f1(&gold, &pred, "O").is_err());
    }

    #[test]
    fn token_f1_all_correct() {
        let gold = labels(&["SPK", "O", "SPK"]);
        let score = token_f1(&gold, &gold, "SPK").unwrap();
        assert_eq!(score.f1, 1.0);
    }

    #[test]
    fn token_f1_never_predicting_target_is_zero() {
        let gold = labels(&["SPK", "O"]);
        let pred = labels(&["O", "O"]);
        let score = token_f1(&gold, &pred, "SPK").unwrap();
        assert_eq!(score.f1, 0.0);
    }

    #[test]
    fn token_f1_hand_count() {
        // gold mask 1100, predicted mask 1010
        let gold = labels(&["T", "T", "O", "O"]);
        let pred = labels(&["T", "O", "T", "O"]);
        let score = token_f1(&gold, &pred, "T").unwrap();
        assert_eq!(score.precision, 0.5);
        assert_eq!(score.recall, 0.5);
        assert_eq!(score.f1, 0.5);
    }
}
