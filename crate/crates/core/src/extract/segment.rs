//! Rule-based sentence segmentation with code-point spans.

use crate::text::SpanOffset;

/// Tokens that end in a period without ending a sentence (compared
/// lowercased, period included).
const ABBREVIATIONS: &[&str] = &[
    "ca.", "vs.", "dr.", "prof.", "nr.", "bzw.", "z.b.", "d.h.", "u.a.", "e.g.", "i.e.", "li.", "re.", "bds.",
    "st.", "evtl.", "ggf.", "v.a.", "mind.", "max.", "min.", "approx.", "fig.", "abb.", "vgl.", "sog.", "inkl.",
];

fn ends_with_abbreviation(chars: &[char], dot: usize) -> bool {
    let start = chars[..dot].iter().rposition(|c| c.is_whitespace()).map_or(0, |p| p + 1);
    let word: String = chars[start..=dot].iter().flat_map(|c| c.to_lowercase()).collect();
    let word = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    ABBREVIATIONS.contains(&word)
}

/// Sentence spans: a sentence ends at `.`, `!` or `?` followed by whitespace
/// or end of text, unless the period closes a known abbreviation. Spans are
/// trimmed of surrounding whitespace; empty sentences are dropped.
pub fn split_sentences(text: &str) -> Vec<SpanOffset> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let push = |b: usize, e: usize, out: &mut Vec<SpanOffset>| {
        let mut b = b;
        let mut e = e;
        while b < e && chars[b].is_whitespace() {
            b += 1;
        }
        while e > b && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if b < e {
            out.push(SpanOffset::new(b, e));
        }
    };
    for i in 0..chars.len() {
        let c = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_boundary = chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if !at_boundary || (c == '.' && ends_with_abbreviation(&chars, i)) {
            continue;
        }
        push(start, i + 1, &mut out);
        start = i + 1;
    }
    push(start, chars.len(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::slice_cp;
    use proptest::prelude::*;

    fn texts(t: &str) -> Vec<&str> {
        split_sentences(t).into_iter().map(|s| slice_cp(t, s).unwrap()).collect()
    }

    #[test]
    fn terminators() {
        assert_eq!(texts("A b. C d! E f? G"), vec!["A b.", "C d!", "E f?", "G"]);
        assert_eq!(texts("Größe 1.5 cm. Next."), vec!["Größe 1.5 cm.", "Next."]);
        assert!(texts("").is_empty());
        assert!(texts("   \n ").is_empty());
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(texts("Herdbefund ca. 5 mm, z.B. links. Ende."), vec!["Herdbefund ca. 5 mm, z.B. links.", "Ende."]);
    }

    #[test]
    fn two_anchor_sentences_do_not_overlap() {
        let t = "No suspicious focal findings on the right side. Focal findings on the left side.";
        let s = split_sentences(t);
        assert_eq!(s, vec![SpanOffset::new(0, 47), SpanOffset::new(48, 80)]);
    }

    proptest! {
        #[test]
        fn spans_are_ordered_trimmed_and_disjoint(t in "[a-zA-Z .!?\n𝕏]{0,80}") {
            let spans = split_sentences(&t);
            let chars: Vec<char> = t.chars().collect();
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].begin);
            }
            for s in &spans {
                prop_assert!(s.is_valid_for(chars.len()));
                prop_assert!(!chars[s.begin].is_whitespace() && !chars[s.end - 1].is_whitespace());
            }
        }
    }
}
