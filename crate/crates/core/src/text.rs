//! Tokenization, stop-word removal, lemmatization and id encoding.
//!
//! The order is tokenize, then drop stop words, then lemmatize. Placeholder
//! tokens produced by [`crate::abstraction`] pass through all three steps
//! untouched and keep their uppercase spelling.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::LazyLock;

use crate::abstraction::{is_placeholder, PLACEHOLDERS};
use crate::{Error, Result};

const STOPWORDS_DATA: &str = include_str!("../data/stopwords_en.txt");
const LEMMA_DATA: &str = include_str!("../data/lemma_exceptions.txt");

fn data_lines(data: &str) -> impl Iterator<Item = &str> {
    data.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

static STOPWORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| data_lines(STOPWORDS_DATA).collect());

static LEMMA_EXCEPTIONS: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    data_lines(LEMMA_DATA)
        .filter_map(|l| {
            let mut parts = l.split_whitespace();
            Some((parts.next()?, parts.next()?))
        })
        .collect()
});

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(token)
}

/// Split into alphanumeric runs, lowercase, drop stop words, lemmatize.
pub fn tokenize_normalize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter_map(|raw| {
            if is_placeholder(raw) {
                return Some(raw.to_string());
            }
            let lower = raw.to_lowercase();
            if is_stopword(&lower) {
                return None;
            }
            Some(lemmatize(&lower))
        })
        .collect()
}

fn is_vowel_at(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' => true,
        b'u' => i == 0 || w[i - 1] != b'q',
        b'y' => i > 0 && !is_vowel_at(w, i - 1),
        _ => false,
    }
}

fn has_vowel(stem: &str) -> bool {
    let w = stem.as_bytes();
    (0..w.len()).any(|i| is_vowel_at(w, i))
}

/// Final double consonant other than l, s or z (`runn`, `stopp`).
fn undoubled(stem: &str) -> Option<&str> {
    let w = stem.as_bytes();
    let n = w.len();
    (n >= 3 && w[n - 1] == w[n - 2] && !is_vowel_at(w, n - 1) && !matches!(w[n - 1], b'l' | b's' | b'z'))
        .then(|| &stem[..n - 1])
}

/// One vowel group followed by a single final consonant that is not w, x
/// or y (`mak`, `bas`, `tim`): the stem lost a silent e.
fn short_cvc(stem: &str) -> bool {
    let w = stem.as_bytes();
    let n = w.len();
    if n < 3 || is_vowel_at(w, n - 1) || matches!(w[n - 1], b'w' | b'x' | b'y') || !is_vowel_at(w, n - 2) {
        return false;
    }
    // exactly one vowel, preceded only by consonants
    (0..n - 2).all(|i| !is_vowel_at(w, i))
}

/// Stem endings after which a verb suffix removed a silent e.
fn wants_e(stem: &str) -> bool {
    let w = stem.as_bytes();
    let n = w.len();
    if n < 3 {
        return false;
    }
    let prev_consonant = !is_vowel_at(w, n - 3);
    stem.ends_with('v')
        || stem.ends_with("iz")
        || stem.ends_with("yz")
        || stem.ends_with("uc")
        || (prev_consonant && (stem.ends_with("at") || stem.ends_with("ur") || stem.ends_with("ir")))
        || (!is_vowel_at(w, n - 2) && w[n - 1] == b'l' && !matches!(w[n - 2], b'l' | b'r' | b'w'))
        || (w[n - 1] == b's' && matches!(w[n - 2], b'r' | b'n' | b'p' | b'l'))
}

/// Undo consonant doubling, or restore a silent e, after a verb suffix.
fn restore_verb_stem(stem: &str) -> String {
    if let Some(s) = undoubled(stem) {
        s.to_string()
    } else if wants_e(stem) || short_cvc(stem) {
        format!("{stem}e")
    } else {
        stem.to_string()
    }
}

/// Comparative/superlative stems only lose their suffix when the spelling
/// marks them as such: a doubled consonant (`bigger`) or a lost silent e
/// (`safer`). Plain `-er` nouns like `server` are left alone.
fn restore_adjective_stem(word: &str, stem: &str) -> String {
    if let Some(s) = undoubled(stem) {
        s.to_string()
    } else if short_cvc(stem) {
        format!("{stem}e")
    } else {
        word.to_string()
    }
}

/// Reduce a lowercase word to its base form with suffix rules backed by
/// the exception lexicon. Non-alphabetic and short words are returned as is.
pub fn lemmatize(word: &str) -> String {
    if let Some(lemma) = LEMMA_EXCEPTIONS.get(word) {
        return (*lemma).to_string();
    }
    if word.len() <= 3 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 2 && has_vowel(stem) {
            return restore_verb_stem(stem);
        }
        return word.to_string();
    }
    if word.ends_with("eed") {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ied") {
        if word.len() > 4 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 2 && has_vowel(stem) {
            return restore_verb_stem(stem);
        }
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("est") {
        return restore_adjective_stem(word, stem);
    }
    if let Some(stem) = word.strip_suffix("er") {
        return restore_adjective_stem(word, stem);
    }
    if let Some(stem) = word.strip_suffix("sses") {
        return format!("{stem}ss");
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if word.len() > 4 {
            return format!("{stem}y");
        }
    }
    for suffix in ["xes", "zes", "ches", "shes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return word.to_string();
    }
    match word.strip_suffix('s') {
        Some(stem) => stem.to_string(),
        None => word.to_string(),
    }
}

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SPECIAL_TOKENS: [&str; 3] = ["[PAD]", "[UNK]", "[CLS]"];
/// Specials plus placeholders, always present.
pub const RESERVED: usize = SPECIAL_TOKENS.len() + PLACEHOLDERS.len();

/// Word-level vocabulary. Ids 0-2 are PAD, UNK and CLS; ids 3-10 are the
/// eight placeholders; corpus tokens follow by descending frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    pub min_freq: usize,
    pub max_size: usize,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_freq: usize, max_size: usize) -> Result<Self> {
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_id.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Input(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self {
            token_to_id,
            id_to_token: tokens,
            min_freq,
            max_size,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// CRC-32 over the serialized form; checkpoints record it.
    pub fn fingerprint(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for t in &self.id_to_token {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize()
    }

    /// One token per line; the line number is the id.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.id_to_token {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let tokens = r
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::Input(format!("reading vocabulary: {e}")))?;
        if tokens.len() < RESERVED
            || tokens[..3] != SPECIAL_TOKENS
            || tokens[3..RESERVED].iter().map(String::as_str).ne(PLACEHOLDERS)
        {
            return Err(Error::Input(
                "vocabulary does not start with the reserved tokens".into(),
            ));
        }
        let n = tokens.len();
        Self::from_tokens(tokens, 1, n)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Build a vocabulary from token sequences. Tokens seen at least `min_freq`
/// times are ranked by (frequency desc, token asc) and the list is cut at
/// `max_size` entries including the reserved ones.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_freq: usize, max_size: usize) -> Result<Vocabulary> {
    if min_freq < 1 {
        return Err(Error::Config("min_freq must be at least 1".into()));
    }
    if max_size < RESERVED {
        return Err(Error::Config(format!(
            "max_size {max_size} is below the {RESERVED} reserved tokens"
        )));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for tok in corpus.iter().flatten() {
        *freq.entry(tok.as_ref()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(t, n)| n >= min_freq && !is_placeholder(t) && !SPECIAL_TOKENS.contains(&t))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens: Vec<String> = SPECIAL_TOKENS
        .iter()
        .chain(PLACEHOLDERS.iter())
        .copied()
        .chain(ranked.into_iter().map(|(t, _)| t))
        .take(max_size)
        .map(str::to_string)
        .collect();
    Vocabulary::from_tokens(tokens, min_freq, max_size)
}

/// A fixed-length id sequence ready for the encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub true_len: usize,
}

/// Prepend CLS, map unknown tokens to UNK, truncate to `max_len` and pad.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> Result<TokenSequence> {
    if max_len < 2 {
        return Err(Error::Config(format!("max_len must be at least 2, got {max_len}")));
    }
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS);
    ids.extend(
        tokens
            .iter()
            .take(max_len - 1)
            .map(|t| vocab.id(t.as_ref()).unwrap_or(UNK)),
    );
    let true_len = ids.len();
    ids.resize(max_len, PAD);
    let mut attention_mask = vec![1u8; true_len];
    attention_mask.resize(max_len, 0);
    Ok(TokenSequence {
        ids,
        attention_mask,
        true_len,
    })
}

/// Inverse of [`encode`]: the tokens after CLS, up to the padding.
pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Vec<String> {
    seq.ids[1..seq.true_len]
        .iter()
        .map(|&id| vocab.token(id).unwrap_or(SPECIAL_TOKENS[UNK as usize]).to_string())
        .collect()
}
