//! Rule-based sentence splitting for per-sentence grounding.
//!
//! A boundary is a `.`, `?` or `!` (plus any closing quotes/brackets and
//! repeated terminators) followed by whitespace and then an uppercase
//! letter, an opening quote/bracket or a digit. A `.` ending one of
//! [`ABBREVIATIONS`] is never a boundary. Fragments with fewer than
//! [`MIN_SENTENCE_CHARS`] non-space characters are merged into the
//! preceding sentence (or the following one when there is none).

pub const ABBREVIATIONS: &[&str] = &[
    "v.", "vs.", "No.", "Nos.", "Dr.", "Mr.", "Mrs.", "Ms.", "U.S.", "U.S.C.", "e.g.", "i.e.",
    "etc.", "Inc.", "Co.", "Corp.", "Ltd.", "St.", "Jr.", "Sr.", "Art.", "Sec.", "cf.", "al.",
    "Fed.", "App.", "Cir.", "Supp.", "Ct.", "Cal.",
];

pub const MIN_SENTENCE_CHARS: usize = 3;

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn ends_with_abbreviation(chars: &[char], dot: usize) -> bool {
    let mut start = dot;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let word: String = chars[start..=dot]
        .iter()
        .skip_while(|c| is_opener(**c))
        .collect();
    ABBREVIATIONS.contains(&word.as_str())
}

fn non_space_len(s: &str) -> usize {
    s.chars().filter(|c| !c.is_whitespace()).count()
}

pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut raw: Vec<String> = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < n {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < n && (is_terminator(chars[j]) || is_closer(chars[j])) {
            j += 1;
        }
        let mut k = j;
        while k < n && chars[k].is_whitespace() {
            k += 1;
        }
        let boundary = k > j
            && k < n
            && (chars[k].is_uppercase() || is_opener(chars[k]) || chars[k].is_ascii_digit())
            && !(chars[i] == '.' && j == i + 1 && ends_with_abbreviation(&chars, i));
        if boundary {
            raw.push(chars[start..j].iter().collect());
            start = k;
            i = k;
        } else {
            i = j;
        }
    }
    if start < n {
        raw.push(chars[start..].iter().collect());
    }

    let mut out: Vec<String> = Vec::new();
    let mut pending: Option<String> = None;
    for s in raw {
        let s = s.trim().to_string();
        if s.is_empty() {
            continue;
        }
        let s = match pending.take() {
            Some(p) => format!("{p} {s}"),
            None => s,
        };
        if non_space_len(&s) >= MIN_SENTENCE_CHARS {
            out.push(s);
        } else if let Some(last) = out.last_mut() {
            last.push(' ');
            last.push_str(&s);
        } else {
            pending = Some(s);
        }
    }
    if let Some(p) = pending {
        out.push(p);
    }
    out
}
