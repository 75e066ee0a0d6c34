//! Whitespace tokenization with byte spans, and sentence splitting.

const EDGE_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '{', '}', '"', '\''];

// Tokens ending in one of these (lowercased, dot included) do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "al.", "fig.", "figs.", "vs.", "approx.", "ca.", "cf.", "dr.", "no.", "resp.",
    "ref.", "refs.", "suppl.", "eq.", "min.", "max.", "mg.", "spp.", "sp.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
    /// Punctuation was stripped before the token.
    pub lead_punct: bool,
    /// Punctuation was stripped after the token.
    pub trail_punct: bool,
}

/// Maximal non-whitespace runs with surrounding punctuation stripped.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (idx, ch) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                push_token(text, s, idx, &mut out);
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    out
}

fn push_token<'a>(text: &'a str, start: usize, end: usize, out: &mut Vec<Token<'a>>) {
    let raw = &text[start..end];
    let trimmed_front = raw.trim_start_matches(EDGE_PUNCT);
    let lead = raw.len() - trimmed_front.len();
    let core = trimmed_front.trim_end_matches(EDGE_PUNCT);
    if core.is_empty() {
        return;
    }
    let s = start + lead;
    out.push(Token {
        text: core,
        start: s,
        end: s + core.len(),
        lead_punct: lead > 0,
        trail_punct: core.len() < trimmed_front.len(),
    });
}

/// Byte ranges of sentences. A sentence ends at `.`, `?` or `!` followed by
/// whitespace and an uppercase letter, unless the word is a known
/// abbreviation or a single-letter initial.
pub fn sentences(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut begin = 0;
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    for (i, &(pos, ch)) in bytes.iter().enumerate() {
        if !matches!(ch, '.' | '?' | '!') {
            continue;
        }
        let mut j = i + 1;
        let mut saw_space = false;
        while j < bytes.len() && bytes[j].1.is_whitespace() {
            saw_space = true;
            j += 1;
        }
        if !saw_space || j >= bytes.len() || !bytes[j].1.is_uppercase() {
            continue;
        }
        if ch == '.' && is_abbreviation(&text[begin..pos + 1]) {
            continue;
        }
        let end = pos + ch.len_utf8();
        if text[begin..end].trim().is_empty() {
            continue;
        }
        out.push(trim_span(text, begin, end));
        begin = bytes[j].0;
    }
    if !text[begin..].trim().is_empty() {
        out.push(trim_span(text, begin, text.len()));
    }
    out
}

fn is_abbreviation(prefix: &str) -> bool {
    let last = prefix.split_whitespace().last().unwrap_or("").to_lowercase();
    let last = last.trim_start_matches(['(', '[', '"']);
    if ABBREVIATIONS.contains(&last) {
        return true;
    }
    let mut chars = last.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

fn trim_span(text: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    (start + lead, end - trail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_strip_edge_punctuation() {
        let toks = tokenize("Afatinib (BIBW2992) inhibits EGFR.");
        let texts: Vec<_> = toks.iter().map(|t| t.text).collect();
        assert_eq!(texts, ["Afatinib", "BIBW2992", "inhibits", "EGFR"]);
        assert!(toks[1].lead_punct && toks[1].trail_punct);
        assert!(toks[3].trail_punct);
        assert_eq!(&"Afatinib (BIBW2992) inhibits EGFR."[toks[3].start..toks[3].end], "EGFR");
    }

    #[test]
    fn internal_punctuation_is_kept() {
        let texts: Vec<_> = tokenize("CDK4/6 and PI3K-AKT-mTOR, e.g.").iter().map(|t| t.text).collect();
        assert_eq!(texts, ["CDK4/6", "and", "PI3K-AKT-mTOR", "e.g"]);
    }

    #[test]
    fn sentences_split_on_terminal_punctuation_before_capitals() {
        let text = "Afatinib inhibits EGFR. KRAS was measured, e.g. In vitro. Is it? Yes! done";
        let spans: Vec<_> = sentences(text).into_iter().map(|(s, e)| &text[s..e]).collect();
        assert_eq!(
            spans,
            ["Afatinib inhibits EGFR.", "KRAS was measured, e.g. In vitro.", "Is it?", "Yes! done"]
        );
    }

    #[test]
    fn abbreviations_and_initials_do_not_split() {
        let text = "Smith et al. Reported this. Data from J. Doe vs. Controls.";
        let spans: Vec<_> = sentences(text).into_iter().map(|(s, e)| &text[s..e]).collect();
        assert_eq!(spans, ["Smith et al. Reported this.", "Data from J. Doe vs. Controls."]);
        assert!(sentences("   ").is_empty());
    }
}
