//! Porter stemming algorithm (the original 1980 five-step definition).
//!
//! Words are classified into consonant/vowel sequences; `m` counts the VC
//! pairs in the pattern `[C](VC)^m[V]`. Each step finds the longest matching
//! suffix among its rules and applies it only if the rule's condition holds
//! on the remaining stem; whether or not it fires, no other rule in that
//! step is tried. Words of length <= 2 are left untouched.

/// Stem a lowercase token. Tokens containing non-ASCII-alphabetic bytes are
/// returned unchanged.
pub fn porter_stem(token: &str) -> String {
    if token.len() <= 2 || !token.bytes().all(|b| b.is_ascii_lowercase()) {
        return token.to_string();
    }
    let mut w = token.as_bytes().to_vec();
    step_1a(&mut w);
    step_1b(&mut w);
    step_1c(&mut w);
    step_2(&mut w);
    step_3(&mut w);
    step_4(&mut w);
    step_5a(&mut w);
    step_5b(&mut w);
    String::from_utf8(w).expect("ascii")
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        // y is a vowel exactly when preceded by a consonant
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// The measure m in `[C](VC)^m[V]`.
fn measure(w: &[u8]) -> usize {
    let n = w.len();
    let mut m = 0;
    let mut i = 0;
    while i < n && is_consonant(w, i) {
        i += 1;
    }
    loop {
        while i < n && !is_consonant(w, i) {
            i += 1;
        }
        if i == n {
            return m;
        }
        m += 1;
        while i < n && is_consonant(w, i) {
            i += 1;
        }
        if i == n {
            return m;
        }
    }
}

fn contains_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

/// *d — stem ends with a double consonant.
fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// *o — stem ends consonant-vowel-consonant where the final consonant is
/// not w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    if n < 3 {
        return false;
    }
    is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn ends_with(w: &[u8], suffix: &str) -> bool {
    w.len() >= suffix.len() && &w[w.len() - suffix.len()..] == suffix.as_bytes()
}

fn replace_suffix(w: &mut Vec<u8>, suffix: &str, replacement: &str) {
    let keep = w.len() - suffix.len();
    w.truncate(keep);
    w.extend_from_slice(replacement.as_bytes());
}

fn step_1a(w: &mut Vec<u8>) {
    if ends_with(w, "sses") {
        replace_suffix(w, "sses", "ss");
    } else if ends_with(w, "ies") {
        replace_suffix(w, "ies", "i");
    } else if ends_with(w, "ss") {
        // unchanged
    } else if ends_with(w, "s") {
        replace_suffix(w, "s", "");
    }
}

fn step_1b(w: &mut Vec<u8>) {
    if ends_with(w, "eed") {
        if measure(&w[..w.len() - 3]) > 0 {
            replace_suffix(w, "eed", "ee");
        }
        return;
    }
    let removed = if ends_with(w, "ed") && contains_vowel(&w[..w.len() - 2]) {
        replace_suffix(w, "ed", "");
        true
    } else if ends_with(w, "ing") && contains_vowel(&w[..w.len() - 3]) {
        replace_suffix(w, "ing", "");
        true
    } else {
        false
    };
    if !removed {
        return;
    }
    if ends_with(w, "at") {
        replace_suffix(w, "at", "ate");
    } else if ends_with(w, "bl") {
        replace_suffix(w, "bl", "ble");
    } else if ends_with(w, "iz") {
        replace_suffix(w, "iz", "ize");
    } else if ends_double_consonant(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
        w.pop();
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step_1c(w: &mut [u8]) {
    if ends_with(w, "y") && contains_vowel(&w[..w.len() - 1]) {
        let n = w.len();
        w[n - 1] = b'i';
    }
}

/// (suffix, replacement) pairs tried in order; lists are arranged so a linear
/// scan finds the longest matching suffix first.
const STEP_2_RULES: &[(&str, &str)] = &[
    ("ational", "ate"),
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("izer", "ize"),
    ("abli", "able"),
    ("alli", "al"),
    ("entli", "ent"),
    ("eli", "e"),
    ("ousli", "ous"),
    ("ization", "ize"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("aliti", "al"),
    ("iviti", "ive"),
    ("biliti", "ble"),
];

const STEP_3_RULES: &[(&str, &str)] = &[
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
];

fn apply_measure_gt0(w: &mut Vec<u8>, rules: &[(&str, &str)]) {
    for &(suffix, replacement) in rules {
        if ends_with(w, suffix) {
            if measure(&w[..w.len() - suffix.len()]) > 0 {
                replace_suffix(w, suffix, replacement);
            }
            return;
        }
    }
}

fn step_2(w: &mut Vec<u8>) {
    apply_measure_gt0(w, STEP_2_RULES);
}

fn step_3(w: &mut Vec<u8>) {
    apply_measure_gt0(w, STEP_3_RULES);
}

const STEP_4_SUFFIXES: &[&str] = &[
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou",
    "ism", "ate", "iti", "ous", "ive", "ize",
];

fn step_4(w: &mut Vec<u8>) {
    for &suffix in STEP_4_SUFFIXES {
        if ends_with(w, suffix) {
            let stem = &w[..w.len() - suffix.len()];
            let condition = measure(stem) > 1
                && (suffix != "ion" || stem.last().is_some_and(|&c| c == b's' || c == b't'));
            if condition {
                replace_suffix(w, suffix, "");
            }
            return;
        }
    }
}

fn step_5a(w: &mut Vec<u8>) {
    if !ends_with(w, "e") {
        return;
    }
    let stem = &w[..w.len() - 1];
    let m = measure(stem);
    if m > 1 || (m == 1 && !ends_cvc(stem)) {
        w.pop();
    }
}

fn step_5b(w: &mut Vec<u8>) {
    if ends_with(w, "l") && ends_double_consonant(w) && measure(w) > 1 {
        w.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_tokens_untouched() {
        assert_eq!(porter_stem("as"), "as");
        assert_eq!(porter_stem("be"), "be");
        assert_eq!(porter_stem("i"), "i");
    }

    #[test]
    fn non_ascii_passthrough() {
        assert_eq!(porter_stem("naïve"), "naïve");
    }

    #[test]
    fn plural_step() {
        assert_eq!(porter_stem("caresses"), "caress");
        assert_eq!(porter_stem("ponies"), "poni");
        assert_eq!(porter_stem("ties"), "ti");
        assert_eq!(porter_stem("cats"), "cat");
    }

    #[test]
    fn measure_counts_vc_pairs() {
        assert_eq!(measure(b"tr"), 0);
        assert_eq!(measure(b"ee"), 0);
        assert_eq!(measure(b"tree"), 0);
        assert_eq!(measure(b"y"), 0);
        assert_eq!(measure(b"by"), 0);
        assert_eq!(measure(b"trouble"), 1);
        assert_eq!(measure(b"oats"), 1);
        assert_eq!(measure(b"trees"), 1);
        assert_eq!(measure(b"ivy"), 1);
        assert_eq!(measure(b"troubles"), 2);
        assert_eq!(measure(b"private"), 2);
        assert_eq!(measure(b"oaten"), 2);
        assert_eq!(measure(b"orrery"), 2);
    }

    #[test]
    fn y_classification() {
        // y after a consonant is a vowel, otherwise a consonant
        assert!(is_consonant(b"yes", 0));
        assert!(!is_consonant(b"dy", 1));
        assert!(is_consonant(b"boy", 2));
    }
}
