//! Turns measurement windows into text prompts and token sequences.
//!
//! Values are min-max normalized jointly over all 192 entries of a window,
//! rounded half away from zero to three decimals and written as fixed-width
//! `d.ddd` numerals.

mod align;
mod prompt;
mod tokenizer;

pub use align::{align_tokens_to_cells, CellAlignment};
pub use prompt::{parse_numerals, render_prompt, PromptDocument, PromptTemplate, TemplateId, ValueSpan};
pub use tokenizer::{
    tokenize, TokenPiece, TokenizedSample, TokenizerAsset, WordPieceTokenizer, TOKEN_BUDGET,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{out_of_range, Result};
use crate::signal::{MeasurementWindow, CHANNELS};

/// Normalize, render and tokenize one window.
pub fn textualize<T: TokenizerAsset + ?Sized>(
    window: &MeasurementWindow,
    template: &PromptTemplate,
    tokenizer: &T,
) -> Result<(PromptDocument, TokenizedSample)> {
    let doc = render_prompt(&normalize(window), template)?;
    let sample = tokenize(&doc, tokenizer, TOKEN_BUDGET)?;
    Ok((doc, sample))
}

/// Joint min-max scaling of all six channels to `[0, 1]`.
///
/// A constant window maps to all zeros.
pub fn normalize(window: &MeasurementWindow) -> MeasurementWindow {
    let flat = window.flat();
    let (min, max) = flat
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let range = max - min;
    let values: Vec<[f64; CHANNELS]> = window
        .values()
        .iter()
        .map(|row| {
            core::array::from_fn(|c| if range > 0.0 { (row[c] - min) / range } else { 0.0 })
        })
        .collect();
    window
        .with_values(values)
        .expect("normalization preserves window shape")
}

/// Formats a normalized value as `d.ddd`, rounding half away from zero.
///
/// Rounding works on the shortest decimal representation of `v`, so a value
/// written as `0.1235` rounds up even though its binary form is slightly below.
pub fn format_value(v: f64) -> Result<String> {
    if !(0.0..=1.0).contains(&v) {
        return Err(out_of_range("normalized value", format!("{v} not in [0, 1]")));
    }
    let repr = format!("{v}");
    let (int_part, frac_part) = match repr.split_once('.') {
        Some((i, f)) => (i, f),
        None => (repr.as_str(), ""),
    };
    let mut digits: u32 = int_part.parse::<u32>().unwrap_or(0) * 1000;
    let frac = frac_part.as_bytes();
    for k in 0..3 {
        let d = frac.get(k).map_or(0, |b| (b - b'0') as u32);
        digits += d * 10u32.pow(2 - k as u32);
    }
    if frac.get(3).is_some_and(|b| *b >= b'5') {
        digits += 1;
    }
    Ok(format!("{}.{:03}", digits / 1000, digits % 1000))
}
