use std::collections::HashMap;

fn trigrams(s: &str) -> HashMap<String, usize> {
    let chars: Vec<char> = s.to_lowercase().chars().collect();
    let mut counts = HashMap::new();
    if chars.is_empty() {
        return counts;
    }
    if chars.len() < 3 {
        counts.insert(chars.iter().collect(), 1);
        return counts;
    }
    for w in chars.windows(3) {
        *counts.entry(w.iter().collect()).or_insert(0) += 1;
    }
    counts
}

/// Cosine similarity of lowercase character-trigram count vectors. Strings
/// shorter than three characters count as a single gram; an empty string
/// has similarity 0 with everything.
pub fn span_similarity_reference(a: &str, b: &str) -> f64 {
    let (ta, tb) = (trigrams(a), trigrams(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let dot: usize = ta
        .iter()
        .filter_map(|(g, &x)| tb.get(g).map(|&y| x * y))
        .sum();
    let norm = |t: &HashMap<String, usize>| (t.values().map(|&x| (x * x) as f64).sum::<f64>()).sqrt();
    (dot as f64 / (norm(&ta) * norm(&tb))).clamp(-1.0, 1.0)
}
