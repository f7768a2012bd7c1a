//! Placeholder substitution for structural README content.
//!
//! Code, tables, images, mail links, hyperlinks, list items and numbers are
//! replaced by fixed uppercase tokens so a classifier sees that such content
//! is present without seeing its value.
//!
//! Passes run in a fixed order and each one only touches text that earlier
//! passes left alone: code, tables, images, mail links, hyperlinks, ordered
//! lists, unordered lists, numbers. While the passes run, every replaced span
//! is held as a single private-use sentinel character, which is what keeps
//! later passes (and a second application) from rewriting it.

use std::sync::LazyLock;

use indexmap::IndexMap;
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::parser::Section;

/// Content categories in pass order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Code,
    Table,
    Image,
    Mailto,
    Hyperlink,
    OrderedList,
    UnorderedList,
    Number,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Code,
        Category::Table,
        Category::Image,
        Category::Mailto,
        Category::Hyperlink,
        Category::OrderedList,
        Category::UnorderedList,
        Category::Number,
    ];

    /// Key used in the `counts` map.
    pub fn key(self) -> &'static str {
        match self {
            Category::Code => "code",
            Category::Table => "table",
            Category::Image => "image",
            Category::Mailto => "mailto",
            Category::Hyperlink => "hyperlink",
            Category::OrderedList => "ordered_list",
            Category::UnorderedList => "unordered_list",
            Category::Number => "number",
        }
    }

    /// Token written into the abstracted text.
    pub fn placeholder(self) -> &'static str {
        match self {
            Category::Code => "CODE",
            Category::Table => "TABLE",
            Category::Image => "IMAGE",
            Category::Mailto => "MAILTO",
            Category::Hyperlink => "ANCHOR",
            Category::OrderedList => "OL",
            Category::UnorderedList => "UL",
            Category::Number => "NUMBER",
        }
    }

    fn sentinel(self) -> char {
        char::from_u32(SENTINEL_BASE + self as u32).unwrap()
    }

    fn from_sentinel(c: char) -> Option<Category> {
        let offset = (c as u32).checked_sub(SENTINEL_BASE)?;
        Category::ALL.get(offset as usize).copied()
    }
}

/// All eight placeholder tokens.
pub const PLACEHOLDERS: [&str; 8] = ["CODE", "ANCHOR", "TABLE", "IMAGE", "OL", "UL", "MAILTO", "NUMBER"];

pub fn is_placeholder(token: &str) -> bool {
    PLACEHOLDERS.contains(&token)
}

const SENTINEL_BASE: u32 = 0xE000;

fn is_sentinel(c: char) -> bool {
    Category::from_sentinel(c).is_some()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListMode {
    /// Replace each item marker and keep the item text.
    #[default]
    Marker,
    /// Replace a whole list block with one placeholder.
    Block,
}

impl std::str::FromStr for ListMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "marker" => Ok(ListMode::Marker),
            "block" => Ok(ListMode::Block),
            other => Err(format!("unknown list mode {other:?} (expected marker or block)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionConfig {
    #[serde(default)]
    pub list_mode: ListMode,
}

/// Occurrences replaced per category, keyed by [`Category::key`] in pass order.
pub type Counts = IndexMap<String, usize>;

fn empty_counts() -> Counts {
    Category::ALL.iter().map(|c| (c.key().to_string(), 0)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractedSection {
    pub doc_id: String,
    pub ordinal: usize,
    pub heading: String,
    pub text: String,
    pub counts: Counts,
}

/// Abstract a parsed section. The heading and body are abstracted together
/// as `heading\nbody`.
pub fn abstract_content(section: &Section, config: &AbstractionConfig) -> AbstractedSection {
    let joined = if section.heading.is_empty() {
        section.body.clone()
    } else if section.body.is_empty() {
        section.heading.clone()
    } else {
        format!("{}\n{}", section.heading, section.body)
    };
    let (text, counts) = abstract_text(&joined, config);
    AbstractedSection {
        doc_id: section.doc_id.clone(),
        ordinal: section.ordinal,
        heading: section.heading.clone(),
        text,
        counts,
    }
}

/// Abstract a free-standing piece of markdown. Idempotent.
pub fn abstract_text(input: &str, config: &AbstractionConfig) -> (String, Counts) {
    let mut work = Work {
        text: input
            .chars()
            .map(|c| if is_sentinel(c) { '\u{FFFD}' } else { c })
            .collect(),
        counts: empty_counts(),
    };
    work.code();
    work.tables();
    work.images();
    work.mailto();
    work.hyperlinks();
    match config.list_mode {
        ListMode::Marker => {
            work.list_markers(&ORDERED_ITEM, Category::OrderedList);
            work.list_markers(&UNORDERED_ITEM, Category::UnorderedList);
        }
        ListMode::Block => {
            work.list_blocks(Category::OrderedList);
            work.list_blocks(Category::UnorderedList);
        }
    }
    work.numbers();
    (render(&work.text), work.counts)
}

/// Expands sentinels and collapses horizontal whitespace on every line.
/// A placeholder is spaced off only from letters, digits and other
/// placeholders, so no list marker or number is formed by the padding.
fn render(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let joins = |c: Option<&char>| c.is_some_and(|&c| c.is_alphanumeric() || is_sentinel(c));
    let mut expanded = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        match Category::from_sentinel(c) {
            Some(cat) => {
                if i > 0 && joins(chars.get(i - 1)) {
                    expanded.push(' ');
                }
                expanded.push_str(cat.placeholder());
                if joins(chars.get(i + 1)) {
                    expanded.push(' ');
                }
            }
            None => expanded.push(c),
        }
    }
    expanded
        .split('\n')
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

static TABLE_DELIMITER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\|?\s*:?-+:?\s*(\|\s*:?-+:?\s*)*\|?\s*$").unwrap());
static HTML_TABLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<table\b.*?</table\s*>").unwrap());
static MD_IMAGE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"!\[[^\]\n]*\]\([^)\n]*\)").unwrap());
static HTML_IMAGE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<img\b[^>]*>").unwrap());
static MD_MAILTO_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[([^\]\n]*)\]\(\s*mailto:[^)\s]*\s*\)").unwrap());
static HTML_MAILTO_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?is)<a\s[^>]*href\s*=\s*["']?mailto:[^>]*>(.*?)</a\s*>"#).unwrap());
static MAILTO_URI: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)<?mailto:[^\s<>()"'\x{E000}-\x{E007}]+>?"#).unwrap());
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}").unwrap());
static MD_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"\[([^\]\n]*)\]\(\s*[^)\s\x{E000}-\x{E007}]+(\s+"[^"\n]*")?\s*\)"#).unwrap());
static HTML_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<a\s[^>]*>(.*?)</a\s*>").unwrap());
static AUTOLINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<(https?|ftp)://[^\s<>]+>").unwrap());
static RAW_URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)\b(https?://|ftp://|www\.)[^\s<>()\[\]"'`\x{E000}-\x{E007}]+"#).unwrap());
static ORDERED_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\s*)\d{1,9}[.)](\s+|$)").unwrap());
static UNORDERED_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\s*)[-*+](\s+|$)").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(\.\d+)*").unwrap());

struct Work {
    text: String,
    counts: Counts,
}

impl Work {
    fn bump(&mut self, cat: Category) {
        *self.counts.get_mut(cat.key()).unwrap() += 1;
    }

    /// Replacement for a consumed span: the category sentinel followed by
    /// any sentinels the span already contained, so earlier placeholders
    /// are never lost.
    fn replacement(&mut self, cat: Category, span: &str) -> String {
        self.bump(cat);
        std::iter::once(cat.sentinel())
            .chain(span.chars().filter(|&c| is_sentinel(c)))
            .collect()
    }

    fn replace_regex(&mut self, re: &Regex, cat: Category) {
        self.replace_regex_with(re, cat, |_| String::new());
    }

    /// Replaces every match with `keep(caps)` followed by the sentinel.
    fn replace_regex_with(&mut self, re: &Regex, cat: Category, keep: impl Fn(&Captures) -> String) {
        let mut n = 0;
        let text = std::mem::take(&mut self.text);
        let out = re.replace_all(&text, |caps: &Captures| {
            n += 1;
            let whole = caps.get(0).unwrap().as_str();
            let kept = keep(caps);
            let mut s = kept.clone();
            s.push(' ');
            s.push(cat.sentinel());
            s.extend(whole.chars().filter(|&c| is_sentinel(c) && !kept.contains(c)));
            s
        });
        self.text = out.into_owned();
        for _ in 0..n {
            self.bump(cat);
        }
    }

    fn lines(&self) -> Vec<String> {
        self.text.split('\n').map(str::to_string).collect()
    }

    fn code(&mut self) {
        self.fenced_code();
        self.indented_code();
        self.inline_code();
    }

    fn fenced_code(&mut self) {
        let lines = self.lines();
        let mut out = Vec::with_capacity(lines.len());
        let mut i = 0;
        while i < lines.len() {
            let Some((marker, len)) = fence_marker(&lines[i]) else {
                out.push(lines[i].clone());
                i += 1;
                continue;
            };
            let mut end = lines.len() - 1;
            for (j, line) in lines.iter().enumerate().skip(i + 1) {
                if fence_close(line, marker, len) {
                    end = j;
                    break;
                }
            }
            let span = lines[i..=end].join("\n");
            out.push(self.replacement(Category::Code, &span));
            i = end + 1;
        }
        self.text = out.join("\n");
    }

    /// Runs of lines indented by four or more spaces (or a tab), starting
    /// after a blank line, that are not list items.
    fn indented_code(&mut self) {
        let lines = self.lines();
        let mut out: Vec<String> = Vec::with_capacity(lines.len());
        let mut i = 0;
        while i < lines.len() {
            let after_blank = i == 0 || lines[i - 1].trim().is_empty();
            if !(after_blank && is_indented_code(&lines[i])) {
                out.push(lines[i].clone());
                i += 1;
                continue;
            }
            let mut end = i;
            let mut j = i + 1;
            while j < lines.len() && (is_code_continuation(&lines[j]) || lines[j].trim().is_empty()) {
                if !lines[j].trim().is_empty() {
                    end = j;
                }
                j += 1;
            }
            let span = lines[i..=end].join("\n");
            out.push(self.replacement(Category::Code, &span));
            i = end + 1;
        }
        self.text = out.join("\n");
    }

    fn inline_code(&mut self) {
        let text = std::mem::take(&mut self.text);
        let mut out = String::with_capacity(text.len());
        let mut rest = text.as_str();
        while let Some(start) = rest.find('`') {
            let run = rest[start..].bytes().take_while(|&b| b == b'`').count();
            let after = &rest[start + run..];
            match find_backtick_run(after, run) {
                Some(close) => {
                    out.push_str(&rest[..start]);
                    let span = &rest[start..start + run + close + run];
                    out.push(' ');
                    out.push_str(&self.replacement(Category::Code, span));
                    out.push(' ');
                    rest = &after[close + run..];
                }
                None => {
                    out.push_str(&rest[..start + run]);
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        self.text = out;
    }

    fn tables(&mut self) {
        let lines = self.lines();
        let mut out = Vec::with_capacity(lines.len());
        let mut i = 0;
        while i < lines.len() {
            let header = &lines[i];
            let is_table = header.contains('|')
                && lines
                    .get(i + 1)
                    .is_some_and(|d| d.contains('|') && d.contains('-') && TABLE_DELIMITER.is_match(d));
            if !is_table {
                out.push(header.clone());
                i += 1;
                continue;
            }
            let mut end = i + 1;
            while end + 1 < lines.len() && lines[end + 1].contains('|') && !lines[end + 1].trim().is_empty() {
                end += 1;
            }
            let span = lines[i..=end].join("\n");
            out.push(self.replacement(Category::Table, &span));
            i = end + 1;
        }
        self.text = out.join("\n");
        self.replace_regex(&HTML_TABLE, Category::Table);
    }

    fn images(&mut self) {
        self.replace_regex(&MD_IMAGE, Category::Image);
        self.replace_regex(&HTML_IMAGE, Category::Image);
    }

    fn mailto(&mut self) {
        self.replace_regex_with(&MD_MAILTO_LINK, Category::Mailto, |c| c[1].to_string());
        self.replace_regex_with(&HTML_MAILTO_LINK, Category::Mailto, |c| c[1].to_string());
        self.replace_regex(&MAILTO_URI, Category::Mailto);
        self.replace_regex(&EMAIL, Category::Mailto);
    }

    fn hyperlinks(&mut self) {
        self.replace_regex_with(&MD_LINK, Category::Hyperlink, |c| c[1].to_string());
        self.replace_regex_with(&HTML_LINK, Category::Hyperlink, |c| c[1].to_string());
        self.replace_regex(&AUTOLINK, Category::Hyperlink);
        // Trailing sentence punctuation is not part of a raw URL.
        let text = std::mem::take(&mut self.text);
        let mut n = 0;
        let out = RAW_URL.replace_all(&text, |caps: &Captures| {
            let url = caps.get(0).unwrap().as_str();
            let trimmed = url.trim_end_matches(['.', ',', ';', ':', '!', '?']);
            n += 1;
            format!(" {} {}", Category::Hyperlink.sentinel(), &url[trimmed.len()..])
        });
        self.text = out.into_owned();
        for _ in 0..n {
            self.bump(Category::Hyperlink);
        }
    }

    fn list_markers(&mut self, re: &Regex, cat: Category) {
        let lines = self.lines();
        let mut out = Vec::with_capacity(lines.len());
        for line in lines {
            match re.find(&line) {
                Some(m) if !is_thematic_break(&line) => {
                    self.bump(cat);
                    out.push(format!("{} {}", cat.sentinel(), &line[m.end()..]));
                }
                _ => out.push(line),
            }
        }
        self.text = out.join("\n");
    }

    /// A list block starts at an item of the given kind and continues over
    /// further items of either kind and indented continuation lines.
    fn list_blocks(&mut self, cat: Category) {
        let starts = if cat == Category::OrderedList {
            &*ORDERED_ITEM
        } else {
            &*UNORDERED_ITEM
        };
        let is_item = |l: &str| (ORDERED_ITEM.is_match(l) || UNORDERED_ITEM.is_match(l)) && !is_thematic_break(l);
        let lines = self.lines();
        let mut out = Vec::with_capacity(lines.len());
        let mut i = 0;
        while i < lines.len() {
            if !(starts.is_match(&lines[i]) && !is_thematic_break(&lines[i])) {
                out.push(lines[i].clone());
                i += 1;
                continue;
            }
            let mut end = i;
            while end + 1 < lines.len() {
                let next = &lines[end + 1];
                let continuation = next.starts_with([' ', '\t']) && !next.trim().is_empty();
                if is_item(next) || continuation {
                    end += 1;
                } else {
                    break;
                }
            }
            let span = lines[i..=end].join("\n");
            out.push(self.replacement(cat, &span));
            i = end + 1;
        }
        self.text = out.join("\n");
    }

    /// Standalone digit groups (integers, decimals, dotted versions) that
    /// are not glued to a letter, digit or underscore.
    fn numbers(&mut self) {
        let text = std::mem::take(&mut self.text);
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for m in NUMBER.find_iter(&text) {
            let before = text[..m.start()].chars().next_back();
            let after = text[m.end()..].chars().next();
            let glued = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
            if glued(before) || glued(after) {
                continue;
            }
            out.push_str(&text[last..m.start()]);
            out.push(Category::Number.sentinel());
            last = m.end();
            self.bump(Category::Number);
        }
        out.push_str(&text[last..]);
        self.text = out;
    }
}

fn fence_marker(line: &str) -> Option<(u8, usize)> {
    let spaces = line.bytes().take_while(|&b| b == b' ').count();
    if spaces > 3 {
        return None;
    }
    let rest = &line[spaces..];
    let marker = *rest.as_bytes().first()?;
    if marker != b'`' && marker != b'~' {
        return None;
    }
    let len = rest.bytes().take_while(|&b| b == marker).count();
    if len < 3 || (marker == b'`' && rest[len..].contains('`')) {
        return None;
    }
    Some((marker, len))
}

fn fence_close(line: &str, marker: u8, len: usize) -> bool {
    let rest = line.trim_start_matches(' ');
    let run = rest.bytes().take_while(|&b| b == marker).count();
    line.len() - rest.len() <= 3 && run >= len && rest[run..].trim().is_empty()
}

fn is_indented_code(line: &str) -> bool {
    code_indent(line) && !line.trim().is_empty() && {
        let t = line.trim_start();
        !(ORDERED_ITEM.is_match(t) || UNORDERED_ITEM.is_match(t))
    }
}

fn is_code_continuation(line: &str) -> bool {
    code_indent(line) && !line.trim().is_empty()
}

fn code_indent(line: &str) -> bool {
    line.starts_with('\t') || line.starts_with("    ")
}

fn is_thematic_break(line: &str) -> bool {
    let compact: String = line.chars().filter(|c| !c.is_whitespace()).collect();
    compact.len() >= 3
        && (compact.bytes().all(|b| b == b'-')
            || compact.bytes().all(|b| b == b'*')
            || compact.bytes().all(|b| b == b'_'))
}

/// Offset of the next run of exactly `len` backticks.
fn find_backtick_run(text: &str, len: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'`' {
            let run = bytes[i..].iter().take_while(|&&b| b == b'`').count();
            if run == len {
                return Some(i);
            }
            i += run;
        } else {
            i += 1;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(text: &str) -> (String, Counts) {
        abstract_text(text, &AbstractionConfig::default())
    }

    fn count(c: &Counts, key: &str) -> usize {
        c[key]
    }

    #[test]
    fn inline_code() {
        let (t, c) = abs("install via `npm i`");
        assert_eq!(t, "install via CODE");
        assert_eq!(count(&c, "code"), 1);
        assert_eq!(c.values().sum::<usize>(), 1);
    }

    #[test]
    fn plain_text_unchanged() {
        let (t, c) = abs("plain words only");
        assert_eq!(t, "plain words only");
        assert!(c.values().all(|&v| v == 0));
        assert_eq!(c.len(), 8);
    }

    #[test]
    fn raw_url_and_number() {
        let (t, c) = abs("see https://ex.am/pl, version 2");
        assert_eq!(t, "see ANCHOR , version NUMBER");
        assert_eq!(count(&c, "hyperlink"), 1);
        assert_eq!(count(&c, "number"), 1);
    }

    #[test]
    fn bare_email() {
        let (t, c) = abs("contact me@host.com");
        assert_eq!(t, "contact MAILTO");
        assert_eq!(count(&c, "mailto"), 1);
        assert_eq!(count(&c, "hyperlink"), 0);
    }

    #[test]
    fn fenced_block_swallows_urls_and_numbers() {
        let (t, c) = abs("Run:\n```sh\ncurl https://x.io/1.2 | sh\n```\nthen 3 steps");
        assert_eq!(t, "Run:\nCODE\nthen NUMBER steps");
        assert_eq!(count(&c, "code"), 1);
        assert_eq!(count(&c, "hyperlink"), 0);
        assert_eq!(count(&c, "number"), 1);
    }

    #[test]
    fn indented_code_block() {
        let (t, c) = abs("Example:\n\n    let x = 1;\n    let y = 2;\n\nDone");
        assert_eq!(t, "Example:\n\nCODE\n\nDone");
        assert_eq!(count(&c, "code"), 1);
    }

    #[test]
    fn markdown_table() {
        let (t, c) = abs("Options:\n| flag | meaning |\n|------|---------|\n| -v | `verbose` |\nend");
        assert_eq!(t, "Options:\nTABLE CODE\nend");
        assert_eq!(count(&c, "table"), 1);
        assert_eq!(count(&c, "code"), 1);
    }

    #[test]
    fn html_table_and_image() {
        let (t, c) = abs("<table><tr><td>a</td></tr></table>\n<img src=\"logo.png\" width=100>");
        assert_eq!(t, "TABLE\nIMAGE");
        assert_eq!(count(&c, "table"), 1);
        assert_eq!(count(&c, "image"), 1);
        assert_eq!(count(&c, "number"), 0);
    }

    #[test]
    fn badge_link_keeps_image_placeholder() {
        let (t, c) = abs("[![build](https://ci/badge.svg)](https://ci/job)");
        assert_eq!(t, "IMAGE ANCHOR");
        assert_eq!(count(&c, "image"), 1);
        assert_eq!(count(&c, "hyperlink"), 1);
    }

    #[test]
    fn markdown_link_keeps_text() {
        let (t, _) = abs("read the [docs](https://docs.rs/x \"Docs\") first");
        assert_eq!(t, "read the docs ANCHOR first");
        let (t, c) = abs("mail [the team](mailto:team@x.org) or <https://x.org>");
        assert_eq!(t, "mail the team MAILTO or ANCHOR");
        assert_eq!(count(&c, "mailto"), 1);
        assert_eq!(count(&c, "hyperlink"), 1);
    }

    #[test]
    fn html_anchor() {
        let (t, c) = abs(r#"see <a href="https://x.org">the site</a>."#);
        assert_eq!(t, "see the site ANCHOR.");
        assert_eq!(count(&c, "hyperlink"), 1);
    }

    #[test]
    fn list_marker_mode() {
        let (t, c) = abs("Steps:\n1. clone\n2) build\n- run\n  * nested\n---");
        assert_eq!(t, "Steps:\nOL clone\nOL build\nUL run\nUL nested\n---");
        assert_eq!(count(&c, "ordered_list"), 2);
        assert_eq!(count(&c, "unordered_list"), 2);
        assert_eq!(count(&c, "number"), 0);
    }

    #[test]
    fn list_block_mode() {
        let cfg = AbstractionConfig {
            list_mode: ListMode::Block,
        };
        let (t, c) = abstract_text("Steps:\n1. clone `repo`\n2. build\n   with care\n\n- a\n- b\nend", &cfg);
        assert_eq!(t, "Steps:\nOL CODE\n\nUL\nend");
        assert_eq!(count(&c, "ordered_list"), 1);
        assert_eq!(count(&c, "unordered_list"), 1);
        assert_eq!(count(&c, "code"), 1);
    }

    #[test]
    fn numbers_standalone_only() {
        let (t, c) = abs("utf8 and x86 use 1.2.3 or 0.5, not v2 but (42)%");
        assert_eq!(t, "utf8 and x86 use NUMBER or NUMBER, not v2 but (NUMBER)%");
        assert_eq!(count(&c, "number"), 3);
    }

    #[test]
    fn idempotent_on_examples() {
        for text in [
            "install via `npm i`",
            "see https://ex.am/pl, version 2",
            "Steps:\n1. clone\n- run\n\n    code\n| a | b |\n|---|---|\n",
            "[![b](i.png)](l) me@x.io <img src=a> 3.4",
        ] {
            for mode in [ListMode::Marker, ListMode::Block] {
                let cfg = AbstractionConfig { list_mode: mode };
                let (once, _) = abstract_text(text, &cfg);
                let (twice, counts) = abstract_text(&once, &cfg);
                assert_eq!(once, twice, "{text:?}");
                assert!(counts.values().all(|&v| v == 0));
            }
        }
    }

    #[test]
    fn sentinel_characters_in_input_are_neutralised() {
        let (t, c) = abs("odd \u{E000} char");
        assert_eq!(t, "odd \u{FFFD} char");
        assert_eq!(count(&c, "code"), 0);
    }

    #[test]
    fn section_heading_is_abstracted_with_body() {
        let sec = Section {
            doc_id: "d".into(),
            ordinal: 3,
            level: 2,
            heading: "Version 2".into(),
            body: "`x`".into(),
        };
        let a = abstract_content(&sec, &AbstractionConfig::default());
        assert_eq!(a.text, "Version NUMBER\nCODE");
        assert_eq!(a.heading, "Version 2");
        assert_eq!(a.ordinal, 3);
    }
}
