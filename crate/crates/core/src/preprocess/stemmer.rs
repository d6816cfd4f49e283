//! Snowball English ("Porter2") stemmer.
//!
//! Follows the published Snowball English algorithm: exceptional forms,
//! prelude (`y` → `Y` marking), R1/R2 regions, steps 1a–5 and the postlude.
//! Input is expected in lowercase.

const EXCEPTIONS: &[(&str, &str)] = &[
    ("skis", "ski"),
    ("skies", "sky"),
    ("dying", "die"),
    ("lying", "lie"),
    ("tying", "tie"),
    ("idly", "idl"),
    ("gently", "gentl"),
    ("ugly", "ugli"),
    ("early", "earli"),
    ("only", "onli"),
    ("singly", "singl"),
    ("sky", "sky"),
    ("news", "news"),
    ("howe", "howe"),
    ("atlas", "atlas"),
    ("cosmos", "cosmos"),
    ("bias", "bias"),
    ("andes", "andes"),
];

/// Words left untouched when they are all that remains after step 1a.
const POST_1A_INVARIANTS: &[&str] = &[
    "inning", "outing", "canning", "herring", "earring", "proceed", "exceed", "succeed",
];

/// Prefixes that fix the end of R1 regardless of the usual vowel rule.
const R1_PREFIXES: &[&str] = &[
    "arsen", "commun", "emerg", "gener", "inter", "later", "organ", "past", "univers",
];

const DOUBLES: &[&str] = &["bb", "dd", "ff", "gg", "mm", "nn", "pp", "rr", "tt"];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn is_valid_li(c: char) -> bool {
    matches!(c, 'c' | 'd' | 'e' | 'g' | 'h' | 'k' | 'm' | 'n' | 'r' | 't')
}

struct Word {
    chars: Vec<char>,
    p1: usize,
    p2: usize,
}

impl Word {
    fn len(&self) -> usize {
        self.chars.len()
    }

    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.len() && self.chars[self.len() - n..].iter().copied().eq(suffix.chars())
    }

    /// Longest suffix from `candidates` that the word ends with.
    fn longest_suffix<'a>(&self, candidates: &[&'a str]) -> Option<&'a str> {
        candidates
            .iter()
            .filter(|s| self.ends_with(s))
            .max_by_key(|s| s.len())
            .copied()
    }

    /// Start index of a suffix of `n` chars.
    fn start_of(&self, suffix: &str) -> usize {
        self.len() - suffix.chars().count()
    }

    fn replace_suffix(&mut self, suffix: &str, with: &str) {
        let start = self.start_of(suffix);
        self.chars.truncate(start);
        self.chars.extend(with.chars());
    }

    fn in_r1(&self, suffix: &str) -> bool {
        self.start_of(suffix) >= self.p1
    }

    fn in_r2(&self, suffix: &str) -> bool {
        self.start_of(suffix) >= self.p2
    }

    fn has_vowel(&self, end: usize) -> bool {
        self.chars[..end].iter().any(|&c| is_vowel(c))
    }

    /// Short syllable ending exactly at `end`: non-vowel, vowel, non-vowel
    /// other than `w`, `x`, `Y`; or a vowel at the word start followed by a
    /// non-vowel.
    fn short_syllable_at(&self, end: usize) -> bool {
        let c = &self.chars;
        if end >= 3 {
            let (a, b, d) = (c[end - 3], c[end - 2], c[end - 1]);
            if !is_vowel(a) && is_vowel(b) && !is_vowel(d) && !matches!(d, 'w' | 'x' | 'Y') {
                return true;
            }
        }
        end == 2 && is_vowel(c[0]) && !is_vowel(c[1])
    }
}

/// Stems one lowercase word.
pub fn stem(word: &str) -> String {
    if let Some((_, out)) = EXCEPTIONS.iter().find(|(w, _)| *w == word) {
        return (*out).to_string();
    }
    if word.chars().count() < 3 {
        return word.to_string();
    }

    let mut chars: Vec<char> = word.chars().collect();
    if chars.first() == Some(&'\'') {
        chars.remove(0);
    }
    let mut y_found = false;
    if chars.first() == Some(&'y') {
        chars[0] = 'Y';
        y_found = true;
    }
    for i in 1..chars.len() {
        if chars[i] == 'y' && is_vowel(chars[i - 1]) {
            chars[i] = 'Y';
            y_found = true;
        }
    }

    let (p1, p2) = mark_regions(&chars);
    let mut w = Word { chars, p1, p2 };

    step_1a(&mut w);
    let whole: String = w.chars.iter().collect();
    if !POST_1A_INVARIANTS.contains(&whole.as_str()) {
        step_1b(&mut w);
        step_1c(&mut w);
        step_2(&mut w);
        step_3(&mut w);
        step_4(&mut w);
        step_5(&mut w);
    }

    let out: String = w.chars.into_iter().collect();
    if y_found {
        out.replace('Y', "y")
    } else {
        out
    }
}

/// End of the first vowel-then-non-vowel run starting at `from`.
fn region_after(chars: &[char], from: usize) -> usize {
    let n = chars.len();
    let mut i = from;
    while i < n && !is_vowel(chars[i]) {
        i += 1;
    }
    while i < n && is_vowel(chars[i]) {
        i += 1;
    }
    if i >= n {
        return n;
    }
    i + 1
}

fn mark_regions(chars: &[char]) -> (usize, usize) {
    let n = chars.len();
    let prefixed = R1_PREFIXES.iter().find(|p| {
        let pc: Vec<char> = p.chars().collect();
        chars.starts_with(&pc)
    });
    let p1 = match prefixed {
        Some(p) => p.len(),
        None => region_after(chars, 0),
    };
    if p1 >= n {
        return (n, n);
    }
    (p1, region_after(chars, p1))
}

fn step_1a(w: &mut Word) {
    if let Some(s) = w.longest_suffix(&["'s'", "'s", "'"]) {
        w.replace_suffix(s, "");
    }
    let Some(s) = w.longest_suffix(&["sses", "ied", "ies", "us", "ss", "s"]) else {
        return;
    };
    match s {
        "sses" => w.replace_suffix(s, "ss"),
        "ied" | "ies" => {
            let with = if w.start_of(s) > 1 { "i" } else { "ie" };
            w.replace_suffix(s, with);
        }
        "s" => {
            // a vowel somewhere before the letter preceding the s
            let start = w.start_of(s);
            if start >= 2 && w.has_vowel(start - 1) {
                w.replace_suffix(s, "");
            }
        }
        _ => {}
    }
}

fn step_1b(w: &mut Word) {
    let Some(s) = w.longest_suffix(&["eedly", "ingly", "edly", "eed", "ing", "ed"]) else {
        return;
    };
    if s == "eed" || s == "eedly" {
        if w.in_r1(s) {
            w.replace_suffix(s, "ee");
        }
        return;
    }
    if !w.has_vowel(w.start_of(s)) {
        return;
    }
    w.replace_suffix(s, "");
    if w.longest_suffix(&["at", "bl", "iz"]).is_some() {
        w.chars.push('e');
    } else if w.longest_suffix(DOUBLES).is_some() {
        w.chars.pop();
    } else if w.p1 == w.len() && w.short_syllable_at(w.len()) {
        w.chars.push('e');
    }
}

fn step_1c(w: &mut Word) {
    let n = w.len();
    if n >= 3 && matches!(w.chars[n - 1], 'y' | 'Y') && !is_vowel(w.chars[n - 2]) {
        w.chars[n - 1] = 'i';
    }
}

const STEP_2: &[(&str, &str)] = &[
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("abli", "able"),
    ("entli", "ent"),
    ("izer", "ize"),
    ("ization", "ize"),
    ("ational", "ate"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("aliti", "al"),
    ("alli", "al"),
    ("fulness", "ful"),
    ("ousli", "ous"),
    ("ousness", "ous"),
    ("iveness", "ive"),
    ("iviti", "ive"),
    ("biliti", "ble"),
    ("bli", "ble"),
    ("ogi", "og"),
    ("fulli", "ful"),
    ("lessli", "less"),
    ("li", ""),
];

fn step_2(w: &mut Word) {
    let suffixes: Vec<&str> = STEP_2.iter().map(|(s, _)| *s).collect();
    let Some(s) = w.longest_suffix(&suffixes) else { return };
    if !w.in_r1(s) {
        return;
    }
    let start = w.start_of(s);
    match s {
        "ogi" => {
            if start >= 1 && w.chars[start - 1] == 'l' {
                w.replace_suffix(s, "og");
            }
        }
        "li" => {
            if start >= 1 && is_valid_li(w.chars[start - 1]) {
                w.replace_suffix(s, "");
            }
        }
        _ => {
            let with = STEP_2.iter().find(|(k, _)| *k == s).map(|(_, v)| *v).unwrap();
            w.replace_suffix(s, with);
        }
    }
}

fn step_3(w: &mut Word) {
    const SUFFIXES: &[&str] = &[
        "ational", "tional", "alize", "icate", "iciti", "ative", "ical", "ness", "ful",
    ];
    let Some(s) = w.longest_suffix(SUFFIXES) else { return };
    if !w.in_r1(s) {
        return;
    }
    match s {
        "tional" => w.replace_suffix(s, "tion"),
        "ational" => w.replace_suffix(s, "ate"),
        "alize" => w.replace_suffix(s, "al"),
        "icate" | "iciti" | "ical" => w.replace_suffix(s, "ic"),
        "ful" | "ness" => w.replace_suffix(s, ""),
        "ative" => {
            if w.in_r2(s) {
                w.replace_suffix(s, "");
            }
        }
        _ => unreachable!(),
    }
}

fn step_4(w: &mut Word) {
    const SUFFIXES: &[&str] = &[
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ism",
        "ate", "iti", "ous", "ive", "ize", "ion",
    ];
    let Some(s) = w.longest_suffix(SUFFIXES) else { return };
    if !w.in_r2(s) {
        return;
    }
    if s == "ion" {
        let start = w.start_of(s);
        if start >= 1 && matches!(w.chars[start - 1], 's' | 't') {
            w.replace_suffix(s, "");
        }
    } else {
        w.replace_suffix(s, "");
    }
}

fn step_5(w: &mut Word) {
    if w.ends_with("e") {
        let start = w.len() - 1;
        if w.in_r2("e") || (w.in_r1("e") && !w.short_syllable_at(start)) {
            w.chars.pop();
        }
    } else if w.ends_with("l") && w.in_r2("l") && w.len() >= 2 && w.chars[w.len() - 2] == 'l' {
        w.chars.pop();
    }
}
