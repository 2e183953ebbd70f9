use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::prompt::PromptDocument;
use super::tokenizer::TokenizedSample;

/// For every token, the `(time_index, channel_index)` cell it encodes.
pub type CellAlignment = Vec<Option<(usize, usize)>>;

/// Maps tokens onto measurement cells by character overlap.
///
/// A token maps to a cell iff its span overlaps exactly one value span;
/// headers, punctuation, special and padding tokens map to `None`.
pub fn align_tokens_to_cells(sample: &TokenizedSample, doc: &PromptDocument) -> Result<CellAlignment> {
    if sample.token_offsets.len() != sample.token_ids.len() {
        return Err(Error::Internal(format!(
            "{} offsets for {} tokens",
            sample.token_offsets.len(),
            sample.token_ids.len()
        )));
    }
    let spans = &doc.value_spans;
    for pair in spans.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::Internal("value spans overlap or are unordered".into()));
        }
    }
    if let Some(last) = spans.last() {
        if last.end > doc.text.len() {
            return Err(Error::Internal("value span past end of text".into()));
        }
    }
    let mut out = Vec::with_capacity(sample.len());
    for (i, &(start, end)) in sample.token_offsets.iter().enumerate() {
        if !sample.attention_mask.get(i).copied().unwrap_or(false) || start >= end {
            out.push(None);
            continue;
        }
        // first span whose end lies past the token start
        let first = spans.partition_point(|s| s.end <= start);
        let mut hit = None;
        let mut count = 0;
        for s in spans[first..].iter().take_while(|s| s.start < end) {
            count += 1;
            hit = Some((s.time_index, s.channel_index));
        }
        out.push(if count == 1 { hit } else { None });
    }
    Ok(out)
}
