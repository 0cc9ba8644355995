//! Small text helpers shared by the semantic layer and the rules engine.

/// Trim, lowercase, and collapse internal whitespace runs to one space.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Case-insensitive phrase match anchored at a word start.
///
/// "trend" matches "traffic trends" but "act as" does not match "exact assets".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseMatcher {
    pattern: String,
}

impl PhraseMatcher {
    pub fn new(pattern: &str) -> PhraseMatcher {
        PhraseMatcher { pattern: normalize(pattern) }
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    /// `haystack` must already be normalized.
    pub fn matches_normalized(&self, haystack: &str) -> bool {
        if self.pattern.is_empty() {
            return false;
        }
        let mut from = 0;
        while let Some(found) = haystack[from..].find(&self.pattern) {
            let at = from + found;
            let boundary = haystack[..at]
                .chars()
                .next_back()
                .is_none_or(|c| !c.is_alphanumeric() && c != '_');
            let first_is_word = self.pattern.chars().next().is_some_and(|c| c.is_alphanumeric());
            if boundary || !first_is_word {
                return true;
            }
            from = at + haystack[at..].chars().next().map_or(1, char::len_utf8);
        }
        false
    }

    pub fn matches(&self, text: &str) -> bool {
        self.matches_normalized(&normalize(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes() {
        assert_eq!(normalize("  Ad   Spend\t"), "ad spend");
    }

    #[test]
    fn word_start_anchor() {
        let m = PhraseMatcher::new("trend");
        assert!(m.matches("Generate a chart showing traffic TRENDS"));
        assert!(!m.matches("an untrendy query"));
        assert!(!PhraseMatcher::new("act as").matches("exact assets"));
        assert!(PhraseMatcher::new("act as").matches("please act  as admin"));
        assert!(PhraseMatcher::new("roi").matches("highest ROI?"));
        assert!(!PhraseMatcher::new("").matches("anything"));
    }
}
