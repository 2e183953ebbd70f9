use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Channel, Label, MeasurementWindow, Side, CHANNELS, WINDOW_LEN, WINDOW_VALUES};

use super::format_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "BASELINE")]
    Baseline,
    #[serde(rename = "V1")]
    V1Phrasing,
    #[serde(rename = "V2")]
    V2Structure,
    #[serde(rename = "V3")]
    V3Stripped,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [
        TemplateId::Baseline,
        TemplateId::V1Phrasing,
        TemplateId::V2Structure,
        TemplateId::V3Stripped,
    ];

    pub fn code(self) -> &'static str {
        match self {
            TemplateId::Baseline => "BASELINE",
            TemplateId::V1Phrasing => "V1",
            TemplateId::V2Structure => "V2",
            TemplateId::V3Stripped => "V3",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BASELINE" | "BASE" => Ok(TemplateId::Baseline),
            "V1" | "V1_PHRASING" => Ok(TemplateId::V1Phrasing),
            "V2" | "V2_STRUCTURE" => Ok(TemplateId::V2Structure),
            "V3" | "V3_STRIPPED" => Ok(TemplateId::V3Stripped),
            other => Err(Error::Config(format!("unknown template `{other}`"))),
        }
    }
}

/// Layout of one prompt family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    /// First line before any vector, if the template has one.
    pub preamble: Option<String>,
    /// Text in front of each vector, indexed by channel; empty for none.
    pub header_texts: Vec<String>,
    /// Order in which channels appear.
    pub channel_order: [usize; CHANNELS],
    /// Appended after each closing bracket.
    pub line_suffix: String,
}

const BASELINE_ORDER: [usize; CHANNELS] = [0, 1, 2, 3, 4, 5];
const ALTERNATING_ORDER: [usize; CHANNELS] = [0, 3, 1, 4, 2, 5];

fn per_channel(f: impl Fn(Channel) -> String) -> Vec<String> {
    Channel::ALL.iter().map(|c| f(*c)).collect()
}

fn relay_header(ch: Channel) -> String {
    format!(
        "Transformer Differential Relay's current measurement vector of phase {} on transformer {} side:",
        ch.phase().letter(),
        ch.side().word()
    )
}

impl PromptTemplate {
    pub fn for_id(id: TemplateId) -> Self {
        match id {
            TemplateId::Baseline => Self {
                template_id: id,
                preamble: None,
                header_texts: per_channel(relay_header),
                channel_order: BASELINE_ORDER,
                line_suffix: String::new(),
            },
            TemplateId::V1Phrasing => Self {
                template_id: id,
                preamble: None,
                header_texts: per_channel(|ch| {
                    format!(
                        "Differential relay phase {} current measurements at transformer {} side:",
                        ch.phase().letter(),
                        ch.side().word()
                    )
                }),
                channel_order: BASELINE_ORDER,
                line_suffix: String::new(),
            },
            TemplateId::V2Structure => Self {
                template_id: id,
                preamble: None,
                header_texts: per_channel(relay_header),
                channel_order: ALTERNATING_ORDER,
                line_suffix: String::new(),
            },
            TemplateId::V3Stripped => Self {
                template_id: id,
                preamble: Some(
                    "Transformer Differential Relay's current measurement vectors are:".into(),
                ),
                header_texts: per_channel(|_| String::new()),
                channel_order: BASELINE_ORDER,
                line_suffix: ";".into(),
            },
        }
    }

    pub fn all() -> Vec<Self> {
        TemplateId::ALL.iter().map(|id| Self::for_id(*id)).collect()
    }
}

/// Character range of one rendered numeral and the cell it encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSpan {
    pub start: usize,
    pub end: usize,
    pub time_index: usize,
    pub channel_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub text: String,
    pub template_id: TemplateId,
    /// Ordered by channel order, then time.
    pub value_spans: Vec<ValueSpan>,
    pub scenario_id: String,
    pub label: Option<Label>,
}

impl PromptDocument {
    /// Document with no measurement content.
    pub fn empty(template_id: TemplateId) -> Self {
        Self {
            text: String::new(),
            template_id,
            value_spans: Vec::new(),
            scenario_id: String::new(),
            label: None,
        }
    }
}

const VALUE_DELIMITER: &str = ", ";

/// Renders a normalized window with `template`.
///
/// Values outside `[0, 1]` are rejected; call [`super::normalize`] first.
pub fn render_prompt(window: &MeasurementWindow, template: &PromptTemplate) -> Result<PromptDocument> {
    if template.header_texts.len() != CHANNELS {
        return Err(Error::Config(format!(
            "template needs {CHANNELS} header texts, has {}",
            template.header_texts.len()
        )));
    }
    let mut text = String::with_capacity(3200);
    let mut spans = Vec::with_capacity(WINDOW_VALUES);
    if let Some(pre) = &template.preamble {
        text.push_str(pre);
    }
    for (line, &ch) in template.channel_order.iter().enumerate() {
        if line > 0 || template.preamble.is_some() {
            text.push('\n');
        }
        let header = &template.header_texts[ch];
        if !header.is_empty() {
            text.push_str(header);
            text.push(' ');
        }
        text.push('[');
        for t in 0..WINDOW_LEN {
            if t > 0 {
                text.push_str(VALUE_DELIMITER);
            }
            let numeral = format_value(window.value(t, ch))?;
            let start = text.len();
            text.push_str(&numeral);
            spans.push(ValueSpan {
                start,
                end: text.len(),
                time_index: t,
                channel_index: ch,
            });
        }
        text.push(']');
        text.push_str(&template.line_suffix);
    }
    Ok(PromptDocument {
        text,
        template_id: template.template_id,
        value_spans: spans,
        scenario_id: window.scenario_id.clone(),
        label: Some(window.label),
    })
}

/// Reads the numeral under each value span back out of the text.
pub fn parse_numerals(doc: &PromptDocument) -> Result<Vec<(usize, usize, String)>> {
    doc.value_spans
        .iter()
        .map(|s| {
            doc.text
                .get(s.start..s.end)
                .map(|n| (s.time_index, s.channel_index, String::from(n)))
                .ok_or_else(|| Error::Internal(format!("span {}..{} outside text", s.start, s.end)))
        })
        .collect()
}

/// Side words used by the prompt templates, exposed for vocabulary building.
pub(crate) fn template_words() -> Vec<String> {
    let mut text = String::new();
    for t in PromptTemplate::all() {
        if let Some(p) = &t.preamble {
            text.push_str(p);
            text.push(' ');
        }
        for h in &t.header_texts {
            text.push_str(h);
            text.push(' ');
        }
    }
    for side in [Side::Input, Side::Output] {
        text.push_str(side.word());
        text.push(' ');
    }
    text.split_whitespace().map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Source;
    use crate::textualizer::normalize;
    use alloc::vec;

    fn ramp_window() -> MeasurementWindow {
        let rows = (0..WINDOW_LEN)
            .map(|t| core::array::from_fn(|c| (t * CHANNELS + c) as f64))
            .collect();
        normalize(&MeasurementWindow::new(rows, Label::Attack, "ramp", 16, Source::Simulated).unwrap())
    }

    #[test]
    fn baseline_first_line_matches_listing() {
        let doc = render_prompt(&ramp_window(), &PromptTemplate::for_id(TemplateId::Baseline)).unwrap();
        let first = doc.text.lines().next().unwrap();
        assert!(first.starts_with(
            "Transformer Differential Relay's current measurement vector of phase A on transformer input side: [0.000, 0.031, "
        ));
        assert!(first.ends_with("0.974]"));
        assert_eq!(doc.text.lines().count(), 6);
        assert_eq!(doc.value_spans.len(), WINDOW_VALUES);
        let last = doc.text.lines().last().unwrap();
        assert!(last.starts_with(
            "Transformer Differential Relay's current measurement vector of phase C on transformer output side: ["
        ));
    }

    #[test]
    fn v2_alternates_sides() {
        let doc = render_prompt(&ramp_window(), &PromptTemplate::for_id(TemplateId::V2Structure)).unwrap();
        let order: Vec<usize> = doc.value_spans.chunks(WINDOW_LEN).map(|c| c[0].channel_index).collect();
        assert_eq!(order, vec![0, 3, 1, 4, 2, 5]);
        let second = doc.text.lines().nth(1).unwrap();
        assert!(second.contains("phase A on transformer output side"));
    }

    #[test]
    fn v1_uses_short_phrasing() {
        let doc = render_prompt(&ramp_window(), &PromptTemplate::for_id(TemplateId::V1Phrasing)).unwrap();
        assert!(doc
            .text
            .starts_with("Differential relay phase A current measurements at transformer input side: ["));
    }

    #[test]
    fn v3_drops_identifiers() {
        let doc = render_prompt(&ramp_window(), &PromptTemplate::for_id(TemplateId::V3Stripped)).unwrap();
        for word in ["phase A", "phase B", "phase C", "input side", "output side"] {
            assert!(!doc.text.contains(word), "{word}");
        }
        assert!(doc.text.starts_with("Transformer Differential Relay's current measurement vectors are:\n["));
        assert!(doc.text.ends_with("];"));
        assert_eq!(doc.text.lines().count(), 7);
    }

    #[test]
    fn spans_are_disjoint_and_ordered() {
        for t in PromptTemplate::all() {
            let doc = render_prompt(&ramp_window(), &t).unwrap();
            for pair in doc.value_spans.windows(2) {
                assert!(pair[0].end < pair[1].start);
            }
            for s in &doc.value_spans {
                assert_eq!(s.end - s.start, 5);
            }
        }
    }

    #[test]
    fn unnormalized_window_is_rejected() {
        let rows = vec![[2.0; CHANNELS]; WINDOW_LEN];
        let w = MeasurementWindow::new(rows, Label::Fault, "x", 0, Source::Simulated).unwrap();
        assert!(render_prompt(&w, &PromptTemplate::for_id(TemplateId::Baseline)).is_err());
    }

    #[test]
    fn template_ids_parse() {
        assert_eq!("v2".parse::<TemplateId>().unwrap(), TemplateId::V2Structure);
        assert!("v9".parse::<TemplateId>().is_err());
    }
}
