//! Unicode helpers shared by the parser and the linter.

use unicode_normalization::UnicodeNormalization;

/// Bidi embedding, override, isolate and mark controls that LLMs emit
/// around right-to-left runs.
pub fn is_bidi_control(c: char) -> bool {
    matches!(c, '\u{200E}' | '\u{200F}' | '\u{202A}'..='\u{202E}' | '\u{2066}'..='\u{2069}')
}

/// Removes U+200E, U+200F, U+202A..=U+202E and U+2066..=U+2069, keeping
/// every other code point in order.
pub fn strip_bidi_controls(s: &str) -> String {
    s.chars().filter(|c| !is_bidi_control(*c)).collect()
}

pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Harakat, tanwin, shadda, sukun and the other combining marks in
/// U+064B..=U+065F, plus the superscript alef U+0670.
pub fn is_arabic_mark(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{065F}' | '\u{0670}')
}

/// Arabic base letters counted for diacritic coverage.
pub fn is_arabic_letter(c: char) -> bool {
    matches!(c, '\u{0621}'..='\u{064A}' | '\u{0671}'..='\u{06D3}')
}

pub fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
}

/// NFC, bidi-stripped, trimmed, with internal whitespace runs collapsed.
pub fn canonical(s: &str) -> String {
    let stripped = strip_bidi_controls(s);
    collapse_ws(&nfc(&stripped))
}

pub fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Consonantal skeleton: canonical form with diacritic marks and tatweel removed.
pub fn skeleton(s: &str) -> String {
    canonical(s)
        .chars()
        .filter(|c| !is_arabic_mark(*c) && *c != '\u{0640}')
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_rlm() {
        assert_eq!(strip_bidi_controls("a\u{200F}b"), "ab");
    }

    #[test]
    fn strips_embedding_pair() {
        assert_eq!(strip_bidi_controls("\u{202B}نص\u{202C}"), "نص");
    }

    #[test]
    fn plain_text_unchanged() {
        let s = "What is the boy doing? يَكْتُبُ";
        assert_eq!(strip_bidi_controls(s), s);
    }

    #[test]
    fn every_control_in_the_set_is_removed() {
        let controls: String = ['\u{200E}', '\u{200F}']
            .into_iter()
            .chain('\u{202A}'..='\u{202E}')
            .chain('\u{2066}'..='\u{2069}')
            .collect();
        assert_eq!(controls.chars().count(), 11);
        assert_eq!(strip_bidi_controls(&format!("x{controls}y")), "xy");
        // neighbours of the ranges survive
        assert_eq!(
            strip_bidi_controls("\u{200D}\u{2029}\u{206A}"),
            "\u{200D}\u{2029}\u{206A}"
        );
    }

    #[test]
    fn skeleton_drops_marks() {
        assert_eq!(skeleton("يَكْتُبُ"), "يكتب");
        assert_eq!(skeleton(" كَبِيرَة "), "كبيرة");
    }
}
