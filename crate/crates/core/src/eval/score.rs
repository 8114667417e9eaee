//! Answer scoring and tag extraction.

use std::collections::BTreeSet;

use crate::graph::{GraphNode, PropertyGraph};

use super::EvalError;

/// Longest common prefix of `predicted` and `truth`, divided by `truth.len()`.
/// Tags compare case-insensitively.
pub fn score_sequence<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], truth: &[T]) -> Result<f64, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let prefix = predicted
        .iter()
        .zip(truth)
        .take_while(|(p, t)| p.as_ref().eq_ignore_ascii_case(t.as_ref()))
        .count();
    Ok(prefix as f64 / truth.len() as f64)
}

/// |predicted ∩ truth| / |truth|, case-insensitive.
pub fn score_recall<S: AsRef<str>, T: AsRef<str>>(
    predicted: impl IntoIterator<Item = S>,
    truth: impl IntoIterator<Item = T>,
) -> Result<f64, EvalError> {
    let truth: BTreeSet<String> = truth.into_iter().map(|t| t.as_ref().to_ascii_uppercase()).collect();
    if truth.is_empty() {
        return Err(EvalError::EmptyTruth);
    }
    let predicted: BTreeSet<String> = predicted
        .into_iter()
        .map(|p| p.as_ref().to_ascii_uppercase())
        .collect();
    Ok(predicted.intersection(&truth).count() as f64 / truth.len() as f64)
}

/// Nodes carrying `label`, sorted by tag (untagged nodes by id, after tagged ones).
pub fn list_nodes_by_label<'a>(graph: &'a PropertyGraph, label: &str) -> Vec<&'a GraphNode> {
    let mut nodes: Vec<&GraphNode> = graph.nodes.values().filter(|n| n.has_label(label)).collect();
    nodes.sort_by(|a, b| {
        (a.tag().is_none(), a.display_tag(), &a.id).cmp(&(b.tag().is_none(), b.display_tag(), &b.id))
    });
    nodes
}

/// Tag names of nodes carrying `label`.
pub fn tags_with_label(graph: &PropertyGraph, label: &str) -> BTreeSet<String> {
    graph
        .with_label(label)
        .filter_map(|n| n.tag())
        .map(str::to_string)
        .collect()
}

/// All distinct tag names in the graph.
pub fn tag_vocabulary(graph: &PropertyGraph) -> Vec<String> {
    let set: BTreeSet<&str> = graph.nodes.values().filter_map(|n| n.tag()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Tags from `vocabulary` mentioned in `text`, in order of first mention.
///
/// Matching is exact and case-insensitive. A match must not be glued to
/// neighbouring alphanumerics, so `47126-C1` does not match inside
/// `47126-C10` and `4712.01` does not match inside `PI4712.01`. When two
/// tags match at the same position the longer one wins.
pub fn extract_tags<S: AsRef<str>>(text: &str, vocabulary: &[S]) -> Vec<String> {
    let hay = text.to_ascii_lowercase();
    let bytes = hay.as_bytes();
    let mut hits: Vec<(usize, usize, &str)> = Vec::new();
    for tag in vocabulary {
        let tag = tag.as_ref();
        if tag.is_empty() {
            continue;
        }
        let needle = tag.to_ascii_lowercase();
        hits.extend(
            hay.match_indices(&needle)
                .map(|(i, _)| i)
                .filter(|&i| bounded(bytes, i, i + needle.len()))
                .map(|i| (i, needle.len(), tag)),
        );
    }
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out: Vec<String> = Vec::new();
    let mut covered_until = 0;
    for (start, len, tag) in hits {
        if start < covered_until {
            continue;
        }
        covered_until = start + len;
        if !out.iter().any(|t| t == tag) {
            out.push(tag.to_string());
        }
    }
    out
}

fn bounded(bytes: &[u8], start: usize, end: usize) -> bool {
    let glued = |i: usize| bytes.get(i).is_some_and(|b| b.is_ascii_alphanumeric());
    let joiner = |b: u8| matches!(b, b'-' | b'.' | b'_' | b'/');
    let before_ok = start == 0
        || (!glued(start - 1) && !(joiner(bytes[start - 1]) && start >= 2 && glued(start - 2)));
    let after_ok = end >= bytes.len()
        || (!glued(end) && !(joiner(bytes[end]) && glued(end + 1)));
    before_ok && after_ok
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_identities() {
        let truth = ["A", "B", "C", "D"];
        assert_eq!(score_sequence(&truth, &truth).unwrap(), 1.0);
        assert_eq!(score_sequence(&["X", "B", "C", "D"], &truth).unwrap(), 0.0);
        assert_eq!(score_sequence(&["a", "b", "x"], &truth).unwrap(), 0.5);
        assert_eq!(score_sequence::<&str, &str>(&[], &truth).unwrap(), 0.0);
        assert!(score_sequence::<&str, &str>(&["A"], &[]).is_err());
    }

    #[test]
    fn recall() {
        assert_eq!(score_recall(["a", "b"], ["A", "B"]).unwrap(), 1.0);
        assert_eq!(score_recall(Vec::<&str>::new(), ["A"]).unwrap(), 0.0);
        assert_eq!(score_recall(["A", "Z"], ["A", "B", "C", "D"]).unwrap(), 0.25);
    }

    #[test]
    fn extraction_respects_boundaries() {
        let vocab = ["47126-C1", "47126-C10", "4712.01", "PI4712.01", "P4712", "SV 104.01", "104.01"];
        let text = "First 47126-C10, then pi4712.01 and P4712. Also SV 104.01, 47126-C1 and 104.01.";
        assert_eq!(
            extract_tags(text, &vocab),
            ["47126-C10", "PI4712.01", "P4712", "SV 104.01", "47126-C1", "104.01"]
        );
    }

    #[test]
    fn extraction_orders_by_first_mention() {
        let vocab = ["T4750", "P4711", "H1007"];
        let text = "Feed is pumped by P4711 through H1007 into T4750; P4711 again.";
        assert_eq!(extract_tags(text, &vocab), ["P4711", "H1007", "T4750"]);
        assert!(extract_tags("nothing here", &vocab).is_empty());
    }
}
