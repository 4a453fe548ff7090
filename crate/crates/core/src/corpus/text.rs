//! The text cleaning steps applied to every comment, in application order:
//! in-word whitespace removal, emoji buffering, whitespace normalization and
//! token truncation.

pub const DEFAULT_MAX_TOKENS: usize = 200;

/// Minimum number of consecutive one-character tokens treated as a
/// letter-spaced word. Pairs such as "na ja" stay untouched.
const MIN_SPACED_RUN: usize = 3;

const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x1F300, 0x1F5FF),
    (0x1F600, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
    (0x2600, 0x26FF),
    (0x2700, 0x27BF),
];

const VARIATION_SELECTOR_16: char = '\u{FE0F}';
const ZERO_WIDTH_JOINER: char = '\u{200D}';

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

fn is_skin_tone(c: char) -> bool {
    ('\u{1F3FB}'..='\u{1F3FF}').contains(&c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SegmentKind {
    Space,
    Emoji,
    Word,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    kind: SegmentKind,
    start: usize,
    end: usize,
    chars: usize,
}

/// Splits text into maximal whitespace runs, emoji clusters and the word
/// pieces between them. An emoji cluster is a base emoji followed by any
/// variation selectors, skin tones or joiner + emoji pairs.
fn segments(text: &str) -> Vec<Segment> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = i;
        let c = chars[i].1;
        let kind = if c.is_whitespace() {
            while i < chars.len() && chars[i].1.is_whitespace() {
                i += 1;
            }
            SegmentKind::Space
        } else if is_emoji(c) {
            i += 1;
            loop {
                match chars.get(i).map(|&(_, c)| c) {
                    Some(c) if c == VARIATION_SELECTOR_16 || is_skin_tone(c) => i += 1,
                    Some(ZERO_WIDTH_JOINER)
                        if chars.get(i + 1).is_some_and(|&(_, n)| is_emoji(n)) =>
                    {
                        i += 2
                    }
                    _ => break,
                }
            }
            SegmentKind::Emoji
        } else {
            while i < chars.len() && !chars[i].1.is_whitespace() && !is_emoji(chars[i].1) {
                i += 1;
            }
            SegmentKind::Word
        };
        out.push(Segment {
            kind,
            start: chars[start].0,
            end: end_of(i),
            chars: i - start,
        });
    }
    out
}

/// Joins letter-spaced words: every maximal run of at least three
/// one-character words separated by single whitespace runs is concatenated.
///
/// Emoji clusters end a run, so "A K T U E L L !" becomes "AKTUELL!" while
/// "a ☕ b" is left alone. Whitespace elsewhere is preserved as is.
pub fn remove_inword_whitespace(text: &str) -> String {
    let segs = segments(text);
    // Whitespace segments (by index) that sit inside a run and get dropped.
    let mut drop = vec![false; segs.len()];
    let single = |s: &Segment| s.kind == SegmentKind::Word && s.chars == 1;

    let mut i = 0;
    while i < segs.len() {
        if !single(&segs[i]) {
            i += 1;
            continue;
        }
        let mut members = vec![i];
        let mut j = i;
        while j + 2 < segs.len() && segs[j + 1].kind == SegmentKind::Space && single(&segs[j + 2])
        {
            j += 2;
            members.push(j);
        }
        if members.len() >= MIN_SPACED_RUN {
            for w in members.windows(2) {
                drop[w[0] + 1] = true;
            }
        }
        i = j + 1;
    }

    let mut out = String::with_capacity(text.len());
    for (seg, &skip) in segs.iter().zip(&drop) {
        if !skip {
            out.push_str(&text[seg.start..seg.end]);
        }
    }
    out
}

/// Surrounds every emoji cluster with whitespace so it forms its own token.
/// A space is only inserted where the neighbour is not already whitespace,
/// so adjacent emoji end up separated by exactly one space.
pub fn buffer_emojis(text: &str) -> String {
    let segs = segments(text);
    let mut out = String::with_capacity(text.len() + 8);
    for (k, seg) in segs.iter().enumerate() {
        let piece = &text[seg.start..seg.end];
        if seg.kind == SegmentKind::Emoji {
            if k > 0 && segs[k - 1].kind != SegmentKind::Space {
                out.push(' ');
            }
            out.push_str(piece);
            if segs.get(k + 1).is_some_and(|n| n.kind == SegmentKind::Word) {
                out.push(' ');
            }
        } else {
            out.push_str(piece);
        }
    }
    out
}

/// Trims the text and collapses every internal whitespace run (any Unicode
/// `White_Space` character) to a single space.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Keeps the first `max_tokens` whitespace tokens. Text within the limit is
/// returned unchanged.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    assert!(max_tokens >= 1, "max_tokens must be at least 1");
    let mut seen = 0;
    let mut in_token = false;
    let mut cut = text.len();
    for (b, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_token && seen == max_tokens {
                cut = b;
            }
            in_token = false;
        } else if !in_token {
            in_token = true;
            seen += 1;
            if seen > max_tokens {
                return text[..cut].to_owned();
            }
        }
    }
    text.to_owned()
}

/// The full cleaning chain. Idempotent.
pub fn preprocess(text: &str, max_tokens: usize) -> String {
    let joined = remove_inword_whitespace(text);
    let buffered = buffer_emojis(&joined);
    let normalized = normalize_whitespace(&buffered);
    truncate_tokens(&normalized, max_tokens)
}
