//! Tolerant report parser.
//!
//! Models wrap their JSON in prose and Markdown fences, use the
//! bracket-wrapped key list from the response template, drop or double
//! commas, stop mid-string, invent keys, forget keys and emit scores outside
//! `[0, 1]`. Each repair is recorded as a [`RepairNote`].

use std::collections::BTreeSet;
use std::fmt;

use super::{is_placeholder, AnalysisReport, RepairKind, RepairNote};

const TEXT_KEYS: [&str; 7] = [
    "purpose", "sources", "sinks", "flows", "anomalies", "analysis", "conclusion",
];
const SCORE_KEYS: [&str; 4] = ["confidence", "obfuscated", "malware", "securityRisk"];
const KEY_COUNT: usize = TEXT_KEYS.len() + SCORE_KEYS.len();

/// Truncated output is only recovered when this many keys survived.
pub const MIN_KEYS_FOR_TRUNCATION: usize = 8;

const MAX_DEPTH: usize = 64;
const MAX_OPENER_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    NoRecognizableKey,
    Truncated { keys: usize },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty output"),
            ParseErrorKind::NoRecognizableKey => f.write_str("no report key recognized"),
            ParseErrorKind::Truncated { keys } => write!(
                f,
                "truncated output with only {keys} of {KEY_COUNT} keys (need {MIN_KEYS_FOR_TRUNCATION})"
            ),
        }
    }
}

/// Unrecoverable model output; carries the raw text for audit.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse report: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Loose {
    Str(String),
    Num(f64, String),
    Raw(String),
    Bool(bool),
    Null,
    Arr(Vec<Loose>),
    Obj(Vec<(String, Loose)>),
}

impl Loose {
    fn into_text(self) -> Option<String> {
        Some(match self {
            Loose::Str(s) | Loose::Raw(s) => s,
            Loose::Num(_, raw) => raw,
            Loose::Bool(b) => b.to_string(),
            Loose::Null => return None,
            Loose::Arr(items) => items
                .into_iter()
                .filter_map(Loose::into_text)
                .collect::<Vec<_>>()
                .join(", "),
            Loose::Obj(members) => members
                .into_iter()
                .map(|(k, v)| format!("{k}: {}", v.into_text().unwrap_or_default()))
                .collect::<Vec<_>>()
                .join("; "),
        })
    }

    fn as_score(&self) -> Option<f64> {
        let value = match self {
            Loose::Num(v, _) => *v,
            Loose::Str(s) | Loose::Raw(s) => s.trim().parse::<f64>().ok()?,
            _ => return None,
        };
        (!value.is_nan()).then_some(value)
    }

    fn describe(&self) -> String {
        match self {
            Loose::Str(s) | Loose::Raw(s) => format!("{s:?}"),
            Loose::Num(_, raw) => raw.clone(),
            Loose::Bool(b) => b.to_string(),
            Loose::Null => "null".into(),
            Loose::Arr(_) => "array".into(),
            Loose::Obj(_) => "object".into(),
        }
    }
}

/// Parses raw model output into a report.
///
/// Repairs are applied in this order: surrounding text, Markdown fences,
/// array unwrapping, comma fixes, truncation recovery, dropped extra keys,
/// defaulted missing keys, score clamping and placeholder detection.
pub fn parse_report(raw: &str) -> Result<AnalysisReport, ParseError> {
    let fail = |kind| ParseError {
        kind,
        raw: raw.to_string(),
    };
    if raw.trim().is_empty() {
        return Err(fail(ParseErrorKind::Empty));
    }

    let mut outer_notes = Vec::new();
    let body = strip_fence(raw, &mut outer_notes);
    let chars: Vec<char> = body.chars().collect();

    let openers = chars
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, '{' | '['))
        .map(|(i, _)| i)
        .take(MAX_OPENER_ATTEMPTS);

    let mut best_err = ParseErrorKind::NoRecognizableKey;
    for start in openers {
        let mut notes = outer_notes.clone();
        if chars[..start].iter().any(|c| !c.is_whitespace()) {
            notes.push(RepairNote::new(
                RepairKind::StrippedPrefix,
                format!("{start} chars of leading text"),
            ));
        }
        let mut cur = Cursor {
            chars: &chars,
            pos: start,
            notes: &mut notes,
            truncated: false,
        };
        let Some(members) = cur.top_level() else {
            continue;
        };
        if !cur.truncated {
            let rest = cur.chars.len() - cur.pos;
            if cur.chars[cur.pos..].iter().any(|c| !c.is_whitespace()) {
                cur.notes.push(RepairNote::new(
                    RepairKind::StrippedPrefix,
                    format!("{rest} chars of trailing text"),
                ));
            }
        }
        let truncated = cur.truncated;
        match build_report(members, truncated, notes) {
            Ok(report) => return Ok(report),
            Err(kind @ ParseErrorKind::Truncated { .. }) => best_err = kind,
            Err(_) => {}
        }
    }
    Err(fail(best_err))
}

/// Removes a Markdown fence that opens before the JSON does.
fn strip_fence<'a>(raw: &'a str, notes: &mut Vec<RepairNote>) -> &'a str {
    let Some(fence) = raw.find("```") else {
        return raw;
    };
    if raw.find(['{', '[']).is_some_and(|open| open < fence) {
        return raw;
    }
    let after = &raw[fence + 3..];
    // skip the info string (`json`, `JSON`, ...)
    let tag_len = after
        .find(|c: char| !c.is_ascii_alphanumeric() && c != '_' && c != '-')
        .unwrap_or(after.len());
    let rest = &after[tag_len..];
    let (inner, tail) = match rest.rfind("```") {
        Some(end) => (&rest[..end], &rest[end + 3..]),
        None => (rest, ""),
    };
    if !raw[..fence].trim().is_empty() || !tail.trim().is_empty() {
        notes.push(RepairNote::new(
            RepairKind::StrippedPrefix,
            "text outside the code fence",
        ));
    }
    notes.push(RepairNote::new(RepairKind::StrippedFence, "markdown code fence"));
    inner
}

struct Cursor<'a> {
    chars: &'a [char],
    pos: usize,
    notes: &'a mut Vec<RepairNote>,
    truncated: bool,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, pos: usize) -> Option<char> {
        self.chars.get(pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn note(&mut self, kind: RepairKind, detail: impl Into<String>) {
        self.notes.push(RepairNote::new(kind, detail));
    }

    fn top_level(&mut self) -> Option<Vec<(String, Loose)>> {
        match self.peek()? {
            '{' => {
                self.pos += 1;
                Some(self.members(0))
            }
            '[' => {
                self.pos += 1;
                self.skip_ws();
                if self.looks_like_member() {
                    self.note(RepairKind::UnwrappedArray, "bracket-wrapped key list");
                    return Some(self.members(0));
                }
                let items = self.array_items(0);
                let count = items.len();
                let first = items.into_iter().find_map(|v| match v {
                    Loose::Obj(m) => Some(m),
                    _ => None,
                })?;
                self.note(
                    RepairKind::UnwrappedArray,
                    format!("array of {count} element(s), first object used"),
                );
                Some(first)
            }
            _ => None,
        }
    }

    /// Is the cursor at `"key":` or `key:`?
    fn looks_like_member(&self) -> bool {
        let mut p = self.pos;
        match self.peek_at(p) {
            Some(q @ ('"' | '\'')) => {
                p += 1;
                while let Some(c) = self.peek_at(p) {
                    if c == '\\' {
                        p += 2;
                        continue;
                    }
                    p += 1;
                    if c == q {
                        break;
                    }
                }
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                while self.peek_at(p).is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    p += 1;
                }
            }
            _ => return false,
        }
        while self.peek_at(p).is_some_and(char::is_whitespace) {
            p += 1;
        }
        self.peek_at(p) == Some(':')
    }

    fn members(&mut self, depth: usize) -> Vec<(String, Loose)> {
        let mut out = Vec::new();
        let mut after_comma = false;
        let mut need_sep = false;
        loop {
            self.skip_ws();
            let Some(c) = self.peek() else {
                self.truncated = true;
                break;
            };
            match c {
                '}' | ']' => {
                    self.pos += 1;
                    if after_comma {
                        self.note(RepairKind::TrailingComma, "comma before closing bracket");
                    }
                    break;
                }
                ',' => {
                    self.pos += 1;
                    after_comma = true;
                    need_sep = false;
                    continue;
                }
                _ => {}
            }
            let key = match c {
                '"' | '\'' => self.string(c),
                c if c.is_alphabetic() || c == '_' => self.word(|c| c.is_alphanumeric() || c == '_'),
                _ => {
                    // stray character between members
                    self.pos += 1;
                    continue;
                }
            };
            if need_sep {
                self.note(RepairKind::InsertedComma, format!("missing comma before `{key}`"));
            }
            if self.truncated {
                break;
            }
            self.skip_ws();
            match self.peek() {
                Some(':') => self.pos += 1,
                None => {
                    self.truncated = true;
                    break;
                }
                Some(_) => {}
            }
            self.skip_ws();
            if self.peek().is_none() {
                self.truncated = true;
                break;
            }
            let value = self.value(depth + 1);
            out.push((key, value));
            after_comma = false;
            need_sep = true;
            if self.truncated {
                break;
            }
        }
        out
    }

    fn array_items(&mut self, depth: usize) -> Vec<Loose> {
        let mut out = Vec::new();
        let mut after_comma = false;
        let mut need_sep = false;
        loop {
            self.skip_ws();
            let Some(c) = self.peek() else {
                self.truncated = true;
                break;
            };
            match c {
                ']' | '}' => {
                    self.pos += 1;
                    if after_comma {
                        self.note(RepairKind::TrailingComma, "comma before closing bracket");
                    }
                    break;
                }
                ',' => {
                    self.pos += 1;
                    after_comma = true;
                    need_sep = false;
                    continue;
                }
                _ => {}
            }
            if need_sep {
                self.note(RepairKind::InsertedComma, "missing comma between array items");
            }
            let before = self.pos;
            let v = self.value(depth + 1);
            if self.pos == before {
                self.pos += 1;
            }
            out.push(v);
            after_comma = false;
            need_sep = true;
            if self.truncated {
                break;
            }
        }
        out
    }

    fn value(&mut self, depth: usize) -> Loose {
        let Some(c) = self.peek() else {
            self.truncated = true;
            return Loose::Null;
        };
        if depth > MAX_DEPTH {
            return Loose::Raw(self.word(|c| !matches!(c, ',' | '}' | ']' | '\n')));
        }
        match c {
            '"' | '\'' => Loose::Str(self.string(c)),
            '{' => {
                self.pos += 1;
                Loose::Obj(self.members(depth))
            }
            '[' => {
                self.pos += 1;
                Loose::Arr(self.array_items(depth))
            }
            c if c.is_ascii_digit() || matches!(c, '-' | '+' | '.') => self.number(),
            _ => {
                let word = self.word(|c| !matches!(c, ',' | '}' | ']' | '\n'));
                match word.trim() {
                    "true" => Loose::Bool(true),
                    "false" => Loose::Bool(false),
                    "null" => Loose::Null,
                    w => Loose::Raw(w.to_string()),
                }
            }
        }
    }

    fn number(&mut self) -> Loose {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'))
        {
            self.pos += 1;
        }
        let token: String = self.chars[start..self.pos].iter().collect();
        let at_delim = self
            .peek()
            .is_none_or(|c| c.is_whitespace() || matches!(c, ',' | '}' | ']'));
        if at_delim {
            if let Ok(v) = token.parse::<f64>() {
                return Loose::Num(v, token);
            }
        }
        let tail = self.word(|c| !matches!(c, ',' | '}' | ']' | '\n'));
        Loose::Raw(format!("{token}{tail}").trim().to_string())
    }

    fn word(&mut self, keep: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.peek().is_some_and(&keep) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    /// Reads a quoted string starting at the opening quote. An unescaped
    /// quote only closes the string when what follows looks like JSON
    /// structure; otherwise it is kept as text.
    fn string(&mut self, quote: char) -> String {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                self.truncated = true;
                return out;
            };
            self.pos += 1;
            match c {
                '\\' => {
                    let Some(e) = self.peek() else {
                        self.truncated = true;
                        return out;
                    };
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'b' => out.push('\u{8}'),
                        'f' => out.push('\u{c}'),
                        'u' => out.push(self.unicode_escape()),
                        other => out.push(other),
                    }
                }
                c if c == quote => {
                    if self.closes_string() {
                        return out;
                    }
                    out.push(c);
                }
                c => out.push(c),
            }
        }
    }

    fn closes_string(&self) -> bool {
        let mut p = self.pos;
        let mut newline = false;
        while let Some(c) = self.peek_at(p) {
            if !c.is_whitespace() {
                break;
            }
            newline |= c == '\n';
            p += 1;
        }
        match self.peek_at(p) {
            None | Some(':' | '}' | ']') => true,
            Some(',') => {
                p += 1;
                while self.peek_at(p).is_some_and(char::is_whitespace) {
                    p += 1;
                }
                newline
                    || matches!(self.peek_at(p), None | Some('"' | '\'' | '}' | ']' | '{'))
                    || self.peek_at(p).is_some_and(|c| c.is_alphabetic())
                        && self.ident_then_colon(p)
            }
            Some(q @ ('"' | '\'')) => newline || self.quoted_key_at(p, q),
            Some(_) => newline,
        }
    }

    /// Is there a `"key":` starting at `p`?
    fn quoted_key_at(&self, mut p: usize, quote: char) -> bool {
        p += 1;
        while let Some(c) = self.peek_at(p) {
            p += 1;
            if c == quote {
                break;
            }
            if !(c.is_alphanumeric() || c == '_') {
                return false;
            }
        }
        while self.peek_at(p).is_some_and(char::is_whitespace) {
            p += 1;
        }
        self.peek_at(p) == Some(':')
    }

    fn ident_then_colon(&self, mut p: usize) -> bool {
        while self.peek_at(p).is_some_and(|c| c.is_alphanumeric() || c == '_') {
            p += 1;
        }
        while self.peek_at(p).is_some_and(char::is_whitespace) {
            p += 1;
        }
        self.peek_at(p) == Some(':')
    }

    fn hex4(&mut self) -> Option<u32> {
        let digits: String = self.chars.get(self.pos..self.pos + 4)?.iter().collect();
        let v = u32::from_str_radix(&digits, 16).ok()?;
        self.pos += 4;
        Some(v)
    }

    fn unicode_escape(&mut self) -> char {
        let Some(hi) = self.hex4() else {
            return '\u{fffd}';
        };
        if (0xD800..0xDC00).contains(&hi)
            && self.peek() == Some('\\')
            && self.peek_at(self.pos + 1) == Some('u')
        {
            let save = self.pos;
            self.pos += 2;
            match self.hex4() {
                Some(lo) if (0xDC00..0xE000).contains(&lo) => {
                    let cp = 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00);
                    return char::from_u32(cp).unwrap_or('\u{fffd}');
                }
                _ => self.pos = save,
            }
        }
        char::from_u32(hi).unwrap_or('\u{fffd}')
    }
}

fn canonical_key(key: &str) -> Option<&'static str> {
    let norm: String = key
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    Some(match norm.as_str() {
        "purpose" => "purpose",
        "sources" | "source" => "sources",
        "sinks" | "sink" => "sinks",
        "flows" | "flow" => "flows",
        "anomalies" | "anomaly" => "anomalies",
        "analysis" => "analysis",
        "conclusion" | "conclusions" => "conclusion",
        "confidence" => "confidence",
        "obfuscated" | "obfuscation" => "obfuscated",
        "malware" => "malware",
        "securityrisk" => "securityRisk",
        _ => return None,
    })
}

fn build_report(
    members: Vec<(String, Loose)>,
    truncated: bool,
    mut notes: Vec<RepairNote>,
) -> Result<AnalysisReport, ParseErrorKind> {
    let recognized: BTreeSet<&str> = members.iter().filter_map(|(k, _)| canonical_key(k)).collect();
    if recognized.is_empty() {
        return Err(ParseErrorKind::NoRecognizableKey);
    }
    if truncated {
        if recognized.len() < MIN_KEYS_FOR_TRUNCATION {
            return Err(ParseErrorKind::Truncated {
                keys: recognized.len(),
            });
        }
        notes.push(RepairNote::new(
            RepairKind::TruncationRecovered,
            format!("closed truncated output with {} keys present", recognized.len()),
        ));
    }

    let mut report = AnalysisReport::default();
    let mut filled: BTreeSet<&str> = BTreeSet::new();
    let mut unusable: Vec<(&str, String)> = Vec::new();
    for (key, value) in members {
        let Some(canon) = canonical_key(&key) else {
            notes.push(RepairNote::new(RepairKind::ExtraKeyDropped, key));
            continue;
        };
        if let Some(slot) = report.text_field_mut(canon) {
            if let Some(text) = value.into_text() {
                *slot = text;
                filled.insert(canon);
            }
        } else if let Some(slot) = report.score_mut(canon) {
            match value.as_score() {
                Some(v) => {
                    *slot = v;
                    filled.insert(canon);
                }
                None => unusable.push((canon, value.describe())),
            }
        }
    }

    for key in TEXT_KEYS.iter().chain(SCORE_KEYS.iter()) {
        if filled.contains(key) {
            continue;
        }
        let detail = match unusable.iter().find(|(k, _)| k == key) {
            Some((_, v)) => format!("{key}: unusable value {v}"),
            None => key.to_string(),
        };
        notes.push(RepairNote::new(RepairKind::MissingKeyDefaulted, detail));
    }

    for key in SCORE_KEYS {
        let slot = report.score_mut(key).expect("score key");
        let clamped = if slot.is_nan() { 0.0 } else { slot.clamp(0.0, 1.0) };
        if clamped != *slot {
            notes.push(RepairNote::new(
                RepairKind::ScoreClamped,
                format!("{key}: {} -> {clamped}", *slot),
            ));
        }
        // normalizes -0.0 as well
        *slot = clamped + 0.0;
    }

    for key in TEXT_KEYS {
        let value = report.text_field_mut(key).expect("text key");
        if is_placeholder(key, value) {
            notes.push(RepairNote::new(RepairKind::PlaceholderText, key));
        }
    }

    report.violations = notes;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLEAN: &str = r#"{"purpose":"Sends host data away","sources":"hostname","sinks":"curl","flows":"hostname -> header","anomalies":"base64","analysis":"Collects, encodes, sends.","conclusion":"Data exfiltration script.","confidence":0.9,"obfuscated":0.2,"malware":1,"securityRisk":1}"#;

    fn kinds(r: &AnalysisReport) -> Vec<RepairKind> {
        r.violations.iter().map(|v| v.kind).collect()
    }

    #[test]
    fn clean_object() {
        let r = parse_report(CLEAN).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(r.malware, 1.0);
        assert_eq!(r.security_risk, 1.0);
        assert_eq!(r.conclusion, "Data exfiltration script.");
    }

    #[test]
    fn fenced() {
        let r = parse_report(&format!("```json\n{CLEAN}\n```")).unwrap();
        assert_eq!(kinds(&r), vec![RepairKind::StrippedFence]);
    }

    #[test]
    fn placeholder_echo() {
        let raw = CLEAN.replace("Sends host data away", "Purpose of this source code");
        let r = parse_report(&raw).unwrap();
        assert_eq!(kinds(&r), vec![RepairKind::PlaceholderText]);
        assert_eq!(r.violations[0].detail, "purpose");
    }

    #[test]
    fn template_shape() {
        let raw = "[\n\"purpose\":\"Reads config\",\n\"sources\":\"fs\",\n\"sinks\":\"none\",\n\"flows\":\"none\",\"anomalies\":\"none\",\n\"analysis\":\"Benign.\",\n\"conclusion\":\"Benign.\",\n\"confidence\": 0.8,\n\"obfuscated\": 0,\n\"malware\": 0,\n\"securityRisk\": 0.1\n]";
        let r = parse_report(raw).unwrap();
        assert_eq!(kinds(&r), vec![RepairKind::UnwrappedArray]);
        assert_eq!(r.security_risk, 0.1);
    }

    #[test]
    fn single_element_array() {
        let r = parse_report(&format!("[{CLEAN}]")).unwrap();
        assert_eq!(kinds(&r), vec![RepairKind::UnwrappedArray]);
    }

    #[test]
    fn comma_repairs() {
        let raw = CLEAN.replace(",\"sources\"", "\n\"sources\"").replace("\"securityRisk\":1}", "\"securityRisk\":1,}");
        let r = parse_report(&raw).unwrap();
        assert_eq!(kinds(&r), vec![RepairKind::InsertedComma, RepairKind::TrailingComma]);
        assert_eq!(r.sources, "hostname");
    }

    #[test]
    fn truncation() {
        let cut = &CLEAN[..CLEAN.find("\"malware\"").unwrap() + 9];
        // confidence and obfuscated survive: 9 keys
        let r = parse_report(cut).unwrap();
        assert!(r.has_violation(RepairKind::TruncationRecovered));
        assert_eq!(
            r.violations
                .iter()
                .filter(|v| v.kind == RepairKind::MissingKeyDefaulted)
                .count(),
            2
        );
        let short = &CLEAN[..CLEAN.find("\"analysis\"").unwrap() + 20];
        let err = parse_report(short).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Truncated { keys: 6 }));
        assert_eq!(err.raw, short);
    }

    #[test]
    fn unquoted_inner_quotes_survive() {
        let raw = CLEAN.replace("Collects, encodes, sends.", "Calls \"eval\" on input");
        let r = parse_report(&raw).unwrap();
        assert_eq!(r.analysis, "Calls \"eval\" on input");
        assert!(r.violations.is_empty());
    }

    #[test]
    fn prose_around() {
        let r = parse_report(&format!("Here is the report [final]:\n{CLEAN}\nHope it helps!")).unwrap();
        assert_eq!(kinds(&r), vec![RepairKind::StrippedPrefix, RepairKind::StrippedPrefix]);
    }

    #[test]
    fn unrecoverable() {
        assert_eq!(parse_report("").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(
            parse_report("I cannot analyze this file.").unwrap_err().kind,
            ParseErrorKind::NoRecognizableKey
        );
        assert_eq!(
            parse_report("{\"foo\": 1}").unwrap_err().kind,
            ParseErrorKind::NoRecognizableKey
        );
    }

    #[test]
    fn non_numeric_score_defaults() {
        let raw = CLEAN.replace("\"malware\":1", "\"malware\":0-1");
        let r = parse_report(&raw).unwrap();
        assert_eq!(r.malware, 0.0);
        assert_eq!(kinds(&r), vec![RepairKind::MissingKeyDefaulted]);
        assert!(r.violations[0].detail.contains("0-1"));
    }

    #[test]
    fn surrogate_pairs() {
        let raw = CLEAN.replace("hostname\"", "host \\ud83d\\ude00\"");
        let r = parse_report(&raw).unwrap();
        assert_eq!(r.sources, "host 😀");
    }

    #[test]
    fn deep_nesting_does_not_overflow() {
        let raw = format!("{{\"malware\": {}", "[".repeat(100_000));
        let _ = parse_report(&raw);
    }
}
