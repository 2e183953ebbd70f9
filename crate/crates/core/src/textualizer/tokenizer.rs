use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signal::Label;

use super::prompt::{template_words, PromptDocument, TemplateId};

/// Maximum sequence length, special tokens included.
pub const TOKEN_BUDGET: usize = 512;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

/// A token id with the byte range of text it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenPiece {
    pub id: u32,
    pub start: usize,
    pub end: usize,
}

/// A tokenizer the pipeline can train and predict with.
pub trait TokenizerAsset {
    /// Identifies the vocabulary and splitting rules; stored in model bundles.
    fn contract_id(&self) -> &str;
    fn vocab_size(&self) -> usize;
    fn cls_id(&self) -> u32;
    fn sep_id(&self) -> u32;
    fn pad_id(&self) -> u32;
    /// Whether [`Self::encode`] reports character offsets.
    fn supports_offsets(&self) -> bool {
        true
    }
    /// Tokens of `text` without special tokens.
    fn encode(&self, text: &str) -> Result<Vec<TokenPiece>>;
    fn token_text(&self, id: u32) -> Option<&str>;
}

/// Uncased WordPiece tokenizer whose vocabulary keeps `d.ddd` numerals whole.
#[derive(Debug, Clone, PartialEq)]
pub struct WordPieceTokenizer {
    vocab: Vec<String>,
    index: BTreeMap<String, u32>,
    contract_id: String,
    max_chars_per_word: usize,
}

impl WordPieceTokenizer {
    /// Builds a tokenizer from vocabulary lines (one token per line, id = line number).
    pub fn from_vocab<I, S>(lines: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vec::new();
        let mut index = BTreeMap::new();
        for line in lines {
            let tok = line.as_ref().trim_end_matches(['\r', '\n']);
            if tok.is_empty() {
                continue;
            }
            if index.insert(tok.to_string(), vocab.len() as u32).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary entry `{tok}`")));
            }
            vocab.push(tok.to_string());
        }
        for special in [PAD, UNK, CLS, SEP] {
            if !index.contains_key(special) {
                return Err(Error::Config(format!("vocabulary lacks {special}")));
            }
        }
        let mut hasher = Sha256::new();
        for tok in &vocab {
            hasher.update(tok.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            vocab,
            index,
            contract_id: format!("wordpiece-uncased-{hex}"),
            max_chars_per_word: 100,
        })
    }

    /// Reference vocabulary: special tokens, ASCII punctuation, the template
    /// words, every numeral `0.000..=1.000`, and single-character pieces.
    pub fn reference() -> Self {
        let mut lines: Vec<String> = [PAD, UNK, CLS, SEP, MASK].iter().map(|s| s.to_string()).collect();
        let push = |s: String, lines: &mut Vec<String>| {
            if !lines.contains(&s) {
                lines.push(s);
            }
        };
        for b in 33u8..127 {
            let c = b as char;
            if c.is_ascii_punctuation() {
                push(c.to_string(), &mut lines);
            }
        }
        for c in ('0'..='9').chain('a'..='z') {
            push(c.to_string(), &mut lines);
        }
        for c in ('0'..='9').chain('a'..='z') {
            push(format!("##{c}"), &mut lines);
        }
        let mut words: Vec<String> = template_words()
            .into_iter()
            .flat_map(|w| {
                pre_tokenize(&w)
                    .into_iter()
                    .map(|(s, e)| w[s..e].to_ascii_lowercase())
                    .collect::<Vec<_>>()
            })
            .filter(|w| w.len() > 1)
            .collect();
        words.sort();
        words.dedup();
        for w in words {
            push(w, &mut lines);
        }
        for k in 0..=1000u32 {
            push(format!("{}.{:03}", k / 1000, k % 1000), &mut lines);
        }
        Self::from_vocab(lines).expect("reference vocabulary is well formed")
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn special(&self, tok: &str) -> u32 {
        self.index[tok]
    }

    fn word_piece(&self, word: &str, offset: usize, out: &mut Vec<TokenPiece>) {
        let unk = TokenPiece {
            id: self.special(UNK),
            start: offset,
            end: offset + word.len(),
        };
        if word.chars().count() > self.max_chars_per_word {
            out.push(unk);
            return;
        }
        let lower = word.to_lowercase();
        if lower.len() != word.len() {
            // offsets would drift; treat as a single unknown word
            out.push(self.index.get(&lower).map_or(unk, |id| TokenPiece { id: *id, ..unk }));
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < lower.len() {
            let mut end = lower.len();
            let mut found = None;
            while end > start {
                if lower.is_char_boundary(end) {
                    let candidate = if start == 0 {
                        String::from(&lower[start..end])
                    } else {
                        format!("##{}", &lower[start..end])
                    };
                    if let Some(id) = self.index.get(&candidate) {
                        found = Some(*id);
                        break;
                    }
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    pieces.push(TokenPiece {
                        id,
                        start: offset + start,
                        end: offset + end,
                    });
                    start = end;
                }
                None => {
                    out.push(unk);
                    return;
                }
            }
        }
        out.extend(pieces);
    }
}

/// Splits text into word chunks: decimal numerals, alphanumeric runs and
/// single punctuation characters. Returns byte ranges.
fn pre_tokenize(text: &str) -> Vec<(usize, usize)> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| bytes.get(i).map_or(text.len(), |(b, _)| *b);
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let (start, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].1.is_ascii_digit() {
                j += 1;
            }
            if j + 1 < bytes.len() && bytes[j].1 == '.' && bytes[j + 1].1.is_ascii_digit() {
                j += 1;
                while j < bytes.len() && bytes[j].1.is_ascii_digit() {
                    j += 1;
                }
            }
            chunks.push((start, end_of(j)));
            i = j;
        } else if c.is_alphanumeric() {
            let mut j = i;
            while j < bytes.len() && bytes[j].1.is_alphanumeric() {
                j += 1;
            }
            chunks.push((start, end_of(j)));
            i = j;
        } else {
            chunks.push((start, end_of(i + 1)));
            i += 1;
        }
    }
    chunks
}

impl TokenizerAsset for WordPieceTokenizer {
    fn contract_id(&self) -> &str {
        &self.contract_id
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn cls_id(&self) -> u32 {
        self.special(CLS)
    }

    fn sep_id(&self) -> u32 {
        self.special(SEP)
    }

    fn pad_id(&self) -> u32 {
        self.special(PAD)
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenPiece>> {
        let mut out = Vec::with_capacity(text.len() / 4);
        for (s, e) in pre_tokenize(text) {
            self.word_piece(&text[s..e], s, &mut out);
        }
        Ok(out)
    }

    fn token_text(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }
}

/// Token ids of one prompt, framed by `[CLS]` and `[SEP]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedSample {
    pub token_ids: Vec<u32>,
    /// Byte range of text per token; special and padding tokens get empty ranges.
    pub token_offsets: Vec<(usize, usize)>,
    pub attention_mask: Vec<bool>,
    pub label: Option<Label>,
    pub scenario_id: String,
    pub template_id: TemplateId,
    pub contract_id: String,
}

impl TokenizedSample {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Number of unpadded tokens.
    pub fn active_len(&self) -> usize {
        self.attention_mask.iter().filter(|m| **m).count()
    }

    /// Appends padding up to `len` tokens.
    pub fn pad_to(&mut self, len: usize, pad_id: u32) -> Result<()> {
        if self.len() > len {
            return Err(Error::TokenBudget {
                tokens: self.len(),
                budget: len,
            });
        }
        let tail = self.token_offsets.last().map_or(0, |o| o.1);
        while self.len() < len {
            self.token_ids.push(pad_id);
            self.token_offsets.push((tail, tail));
            self.attention_mask.push(false);
        }
        Ok(())
    }
}

/// Tokenizes a prompt, rejecting it when it exceeds `budget` tokens.
pub fn tokenize<T: TokenizerAsset + ?Sized>(
    doc: &PromptDocument,
    asset: &T,
    budget: usize,
) -> Result<TokenizedSample> {
    if !asset.supports_offsets() {
        return Err(Error::Capability(format!(
            "tokenizer {} does not report character offsets",
            asset.contract_id()
        )));
    }
    let pieces = asset.encode(&doc.text)?;
    let total = pieces.len() + 2;
    if total > budget {
        return Err(Error::TokenBudget {
            tokens: total,
            budget,
        });
    }
    let mut ids = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(total);
    ids.push(asset.cls_id());
    offsets.push((0, 0));
    for p in &pieces {
        ids.push(p.id);
        offsets.push((p.start, p.end));
    }
    ids.push(asset.sep_id());
    offsets.push((doc.text.len(), doc.text.len()));
    Ok(TokenizedSample {
        attention_mask: alloc::vec![true; ids.len()],
        token_ids: ids,
        token_offsets: offsets,
        label: doc.label,
        scenario_id: doc.scenario_id.clone(),
        template_id: doc.template_id,
        contract_id: asset.contract_id().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{MeasurementWindow, Source, CHANNELS, WINDOW_LEN};
    use crate::textualizer::{normalize, render_prompt, PromptTemplate};

    struct NoOffsets;

    impl TokenizerAsset for NoOffsets {
        fn contract_id(&self) -> &str {
            "no-offsets"
        }
        fn vocab_size(&self) -> usize {
            4
        }
        fn cls_id(&self) -> u32 {
            2
        }
        fn sep_id(&self) -> u32 {
            3
        }
        fn pad_id(&self) -> u32 {
            0
        }
        fn supports_offsets(&self) -> bool {
            false
        }
        fn encode(&self, _: &str) -> Result<Vec<TokenPiece>> {
            Ok(Vec::new())
        }
        fn token_text(&self, _: u32) -> Option<&str> {
            None
        }
    }

    fn sample_doc(id: TemplateId) -> PromptDocument {
        let rows = (0..WINDOW_LEN)
            .map(|t| core::array::from_fn(|c| libm::sin((t * 7 + c * 13) as f64)))
            .collect();
        let w = MeasurementWindow::new(rows, Label::Fault, "d", 16, Source::Simulated).unwrap();
        render_prompt(&normalize(&w), &PromptTemplate::for_id(id)).unwrap()
    }

    #[test]
    fn empty_document_has_only_specials() {
        let tok = WordPieceTokenizer::reference();
        let s = tokenize(&PromptDocument::empty(TemplateId::Baseline), &tok, TOKEN_BUDGET).unwrap();
        assert_eq!(s.token_ids, alloc::vec![tok.cls_id(), tok.sep_id()]);
    }

    #[test]
    fn numerals_stay_whole_and_words_split() {
        let tok = WordPieceTokenizer::reference();
        let text = "Relay's [0.125, 1.000]";
        let pieces = tok.encode(text).unwrap();
        let texts: Vec<&str> = pieces.iter().map(|p| tok.token_text(p.id).unwrap()).collect();
        assert_eq!(texts, ["relay", "'", "s", "[", "0.125", ",", "1.000", "]"]);
        assert_eq!(&text[pieces[4].start..pieces[4].end], "0.125");
    }

    #[test]
    fn unknown_words_fall_back_to_pieces() {
        let tok = WordPieceTokenizer::reference();
        let pieces = tok.encode("zq").unwrap();
        let texts: Vec<&str> = pieces.iter().map(|p| tok.token_text(p.id).unwrap()).collect();
        assert_eq!(texts, ["z", "##q"]);
        let unk = tok.encode("\u{e9}").unwrap();
        assert_eq!(unk[0].id, tok.id_of(UNK).unwrap());
    }

    #[test]
    fn every_template_fits_the_budget() {
        let tok = WordPieceTokenizer::reference();
        for id in TemplateId::ALL {
            let s = tokenize(&sample_doc(id), &tok, TOKEN_BUDGET).unwrap();
            assert!(s.len() <= TOKEN_BUDGET, "{id}: {}", s.len());
            assert!(!s.token_ids.contains(&tok.id_of(UNK).unwrap()));
        }
        let s = tokenize(&sample_doc(TemplateId::Baseline), &tok, TOKEN_BUDGET).unwrap();
        assert_eq!(s.len(), 488);
    }

    #[test]
    fn over_budget_is_rejected() {
        let tok = WordPieceTokenizer::reference();
        assert!(matches!(
            tokenize(&sample_doc(TemplateId::Baseline), &tok, 100),
            Err(Error::TokenBudget { tokens: 488, budget: 100 })
        ));
    }

    #[test]
    fn offsets_monotone_and_padding() {
        let tok = WordPieceTokenizer::reference();
        let mut s = tokenize(&sample_doc(TemplateId::V2Structure), &tok, TOKEN_BUDGET).unwrap();
        s.pad_to(TOKEN_BUDGET, tok.pad_id()).unwrap();
        assert_eq!(s.len(), TOKEN_BUDGET);
        assert_eq!(s.active_len(), 488);
        for w in s.token_offsets.windows(2) {
            assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
    }

    #[test]
    fn missing_offsets_is_a_capability_error() {
        assert!(matches!(
            tokenize(&sample_doc(TemplateId::Baseline), &NoOffsets, TOKEN_BUDGET),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn vocabulary_round_trips_through_lines() {
        let tok = WordPieceTokenizer::reference();
        let again = WordPieceTokenizer::from_vocab(tok.vocab().iter()).unwrap();
        assert_eq!(tok.contract_id(), again.contract_id());
        assert!(WordPieceTokenizer::from_vocab(["a", "b"]).is_err());
        let _ = CHANNELS;
    }
}
