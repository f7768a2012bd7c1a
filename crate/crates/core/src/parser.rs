//! Heading-based section extraction for README markdown.
//!
//! A section runs from one heading to the next heading of any level; there
//! is no nesting. Recognized headings are ATX (`#` to `######`), setext
//! (a line underlined with `===` or `---`) and single-line HTML `<h1>` to
//! `<h6>` elements. Lines inside fenced code blocks are never headings.
//! Text before the first heading is kept as a synthetic level-0 preamble.

use serde::{Deserialize, Serialize};

/// A markdown source document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadmeDocument {
    pub doc_id: String,
    pub raw_text: String,
}

impl ReadmeDocument {
    pub fn new(doc_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            raw_text: raw_text.into(),
        }
    }
}

/// One heading-delimited fragment of a document.
///
/// `level` is 0 for the preamble (text ahead of the first heading) and 1-6
/// for real headings. The preamble is the only section with an empty heading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub doc_id: String,
    pub ordinal: usize,
    pub level: u8,
    pub heading: String,
    pub body: String,
}

/// A recognized heading: its level, its text, and any text sharing the
/// heading's line that belongs to the following body.
#[derive(Debug, PartialEq)]
struct Heading<'a> {
    level: u8,
    text: String,
    trailing: Option<&'a str>,
}

#[derive(Debug, Clone, Copy)]
struct Fence {
    marker: u8,
    len: usize,
}

/// Strips up to three leading spaces, which CommonMark allows in front of
/// block markers. Returns `None` when the line is indented further.
fn block_indent(line: &str) -> Option<&str> {
    let spaces = line.bytes().take_while(|&b| b == b' ').count();
    if spaces > 3 || line[spaces..].starts_with('\t') {
        None
    } else {
        Some(&line[spaces..])
    }
}

fn fence_open(line: &str) -> Option<Fence> {
    let rest = block_indent(line)?;
    let marker = *rest.as_bytes().first()?;
    if marker != b'`' && marker != b'~' {
        return None;
    }
    let len = rest.bytes().take_while(|&b| b == marker).count();
    if len < 3 {
        return None;
    }
    // A backtick fence's info string may not contain backticks; otherwise
    // the line is an inline code span.
    if marker == b'`' && rest[len..].contains('`') {
        return None;
    }
    Some(Fence { marker, len })
}

fn fence_closes(line: &str, fence: Fence) -> bool {
    let Some(rest) = block_indent(line) else {
        return false;
    };
    let len = rest.bytes().take_while(|&b| b == fence.marker).count();
    len >= fence.len && rest[len..].trim().is_empty()
}

fn atx_heading(line: &str) -> Option<Heading<'_>> {
    let rest = block_indent(line)?;
    let hashes = rest.bytes().take_while(|&b| b == b'#').count();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    let after = &rest[hashes..];
    if !(after.is_empty() || after.starts_with(' ') || after.starts_with('\t')) {
        return None;
    }
    let mut text = after.trim();
    // Optional closing sequence: trailing #s preceded by whitespace, or the
    // whole content being #s.
    let stripped = text.trim_end_matches('#');
    if stripped.len() != text.len() && (stripped.is_empty() || stripped.ends_with([' ', '\t'])) {
        text = stripped.trim_end();
    }
    if text.is_empty() {
        return None;
    }
    Some(Heading {
        level: hashes as u8,
        text: text.to_string(),
        trailing: None,
    })
}

/// Matches `<hN ...>inner</hN>` on one line (case-insensitive tag names).
fn html_heading(line: &str) -> Option<Heading<'_>> {
    let rest = line.trim_start();
    let bytes = rest.as_bytes();
    if bytes.len() < 4 || bytes[0] != b'<' || !bytes[1].eq_ignore_ascii_case(&b'h') {
        return None;
    }
    let level = bytes[2];
    if !(b'1'..=b'6').contains(&level) {
        return None;
    }
    if bytes[3] != b'>' && !bytes[3].is_ascii_whitespace() {
        return None;
    }
    let open_end = rest.find('>')?;
    let close_tag = format!("</h{}", level as char);
    let lower = rest.to_ascii_lowercase();
    let close_start = open_end + lower[open_end..].find(&close_tag)?;
    let close_end = close_start + rest[close_start..].find('>')? + 1;
    let inner = rest[open_end + 1..close_start].trim();
    if inner.is_empty() {
        return None;
    }
    let trailing = rest[close_end..].trim();
    Some(Heading {
        level: level - b'0',
        text: inner.to_string(),
        trailing: (!trailing.is_empty()).then_some(trailing),
    })
}

/// A setext underline: only `=` or only `-` (at least three), optionally
/// indented by up to three spaces and followed by whitespace.
fn setext_underline(line: &str) -> Option<u8> {
    let rest = block_indent(line)?.trim_end();
    let first = *rest.as_bytes().first()?;
    let level = match first {
        b'=' => 1,
        b'-' => 2,
        _ => return None,
    };
    (rest.len() >= 3 && rest.bytes().all(|b| b == first)).then_some(level)
}

/// Whether a line can serve as setext heading text.
fn setext_candidate(line: &str) -> bool {
    if line.trim().is_empty() || block_indent(line).is_none() {
        return false;
    }
    atx_heading(line).is_none()
        && html_heading(line).is_none()
        && fence_open(line).is_none()
        && setext_underline(line).is_none()
}

struct Builder {
    doc_id: String,
    sections: Vec<Section>,
    heading: Option<(u8, String)>,
    body: Vec<String>,
}

impl Builder {
    fn flush(&mut self) {
        let body = join_trimmed(&self.body);
        self.body.clear();
        match self.heading.take() {
            Some((level, heading)) => self.push(level, heading, body),
            None if !body.is_empty() => self.push(0, String::new(), body),
            None => {}
        }
    }

    fn push(&mut self, level: u8, heading: String, body: String) {
        self.sections.push(Section {
            doc_id: self.doc_id.clone(),
            ordinal: self.sections.len(),
            level,
            heading,
            body,
        });
    }

    fn start(&mut self, heading: Heading<'_>) {
        self.flush();
        self.heading = Some((heading.level, heading.text));
        if let Some(trailing) = heading.trailing {
            self.body.push(trailing.to_string());
        }
    }
}

/// Joins body lines, dropping blank lines at either end.
fn join_trimmed(lines: &[String]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty());
    let end = lines.iter().rposition(|l| !l.trim().is_empty());
    match (start, end) {
        (Some(s), Some(e)) => lines[s..=e].join("\n"),
        _ => String::new(),
    }
}

/// Split a document into its ordered list of sections.
///
/// Total on every input string. An unterminated fence runs to the end of the
/// document. A document without headings yields exactly one level-0 section.
pub fn parse_sections(doc: &ReadmeDocument) -> Vec<Section> {
    let lines: Vec<&str> = doc.raw_text.lines().collect();
    let mut builder = Builder {
        doc_id: doc.doc_id.clone(),
        sections: Vec::new(),
        heading: None,
        body: Vec::new(),
    };
    let mut fence: Option<Fence> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(open) = fence {
            if fence_closes(line, open) {
                fence = None;
            }
            builder.body.push(line.to_string());
            i += 1;
            continue;
        }
        if let Some(open) = fence_open(line) {
            fence = Some(open);
            builder.body.push(line.to_string());
            i += 1;
            continue;
        }
        if let Some(h) = atx_heading(line).or_else(|| html_heading(line)) {
            builder.start(h);
            i += 1;
            continue;
        }
        if setext_candidate(line) {
            if let Some(level) = lines.get(i + 1).and_then(|next| setext_underline(next)) {
                builder.start(Heading {
                    level,
                    text: line.trim().to_string(),
                    trailing: None,
                });
                i += 2;
                continue;
            }
        }
        builder.body.push(line.to_string());
        i += 1;
    }
    builder.flush();
    if builder.sections.is_empty() {
        builder.push(0, String::new(), String::new());
    }
    builder.sections
}
