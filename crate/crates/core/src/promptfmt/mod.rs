//! The prompt template and the action-probability sentence grammar.
//!
//! A distribution is written as
//! `Stop with probability 0.03, move forward with probability 0.44, ...,
//! and look down with probability 0.01`, with two-decimal values that sum to
//! exactly 1.00.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::gridworld::{Action, ActionDistribution, GoalCategory, Observation, DEPTH_ANGLES_DEG, PATCH_RADIUS};

/// Accepted deviation of the parsed values' sum from 1.
pub const SUM_TOLERANCE: f64 = 0.05;

pub const GOAL_SLOT: &str = "<GoalHere>";
pub const IMAGE_SLOT: &str = "<ImageHere>";
pub const HISTORY_SLOT: &str = "<HistoryHere>";
pub const ACTION_PROB_SLOT: &str = "<ActionProbHere>";
pub const SLOTS: [&str; 4] = [GOAL_SLOT, IMAGE_SLOT, HISTORY_SLOT, ACTION_PROB_SLOT];

const TEMPLATES: &str = include_str!("templates.txt");

/// The shipped prompt variants; index 0 is the canonical wording.
pub fn templates() -> Vec<&'static str> {
    TEMPLATES.split("\n---\n").map(str::trim).collect()
}

pub fn template_count() -> usize {
    templates().len()
}

/// Two-decimal values by largest-remainder rounding, in hundredths. Ties go
/// to the lower action index.
pub fn round_hundredths(d: &ActionDistribution) -> [u32; 6] {
    let mut cents = [0u32; 6];
    let mut rem = [0.0; 6];
    for (i, &p) in d.probs().iter().enumerate() {
        let scaled = p * 100.0;
        let fl = libm::floor(scaled + 1e-9);
        cents[i] = fl as u32;
        rem[i] = scaled - fl;
    }
    let total: u32 = cents.iter().sum();
    let mut order: Vec<usize> = (0..6).collect();
    if total < 100 {
        // stable sort keeps index order among equal remainders
        order.sort_by(|&a, &b| rem[b].total_cmp(&rem[a]));
        for &i in order.iter().cycle().take((100 - total) as usize) {
            cents[i] += 1;
        }
    } else {
        let mut excess = total - 100;
        order.sort_by(|&a, &b| rem[a].total_cmp(&rem[b]));
        for &i in order.iter().cycle() {
            if excess == 0 {
                break;
            }
            if cents[i] > 0 {
                cents[i] -= 1;
                excess -= 1;
            }
        }
    }
    cents
}

pub fn serialize_distribution(d: &ActionDistribution) -> String {
    let cents = round_hundredths(d);
    let mut out = String::new();
    for (i, a) in Action::ALL.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if i == Action::COUNT - 1 {
            out.push_str("and ");
        }
        let _ = write!(out, "{} with probability {}.{:02}", a.phrase(), cents[i] / 100, cents[i] % 100);
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("missing clause: {0}")]
    MissingClause(&'static str),
    #[error("duplicate clause: {0}")]
    DuplicateClause(&'static str),
    #[error("invalid number for {clause}: {token:?}")]
    InvalidNumber { clause: &'static str, token: String },
    #[error("probabilities sum to {0}, outside 1 +/- 0.05")]
    SumOutOfRange(f64),
    #[error("unexpected token {token:?} at word {position}")]
    UnexpectedToken { token: String, position: usize },
}

fn parse_number(token: &str) -> Option<f64> {
    let body = token.strip_prefix(['-', '+']).unwrap_or(token);
    let valid = !body.is_empty()
        && body.chars().all(|c| c.is_ascii_digit() || c == '.')
        && body.chars().filter(|&c| c == '.').count() <= 1
        && body.chars().any(|c| c.is_ascii_digit());
    if valid {
        token.parse().ok()
    } else {
        None
    }
}

/// Parses the six clauses in any order. Matching ignores case, commas, extra
/// whitespace, an optional "and" before a clause and a trailing period.
/// Values are clamped at zero and renormalized.
pub fn parse_distribution(text: &str) -> Result<ActionDistribution, ParseError> {
    let lower = text.trim().to_lowercase().replace(',', " ");
    let body = lower.trim_end().strip_suffix('.').unwrap_or(&lower);
    let tokens: Vec<&str> = body.split_whitespace().collect();
    let mut values: [Option<f64>; 6] = [None; 6];
    let mut i = 0;
    let unexpected = |i: usize| ParseError::UnexpectedToken {
        token: tokens.get(i).map_or_else(|| "end of text".to_string(), |t| t.to_string()),
        position: i,
    };
    while i < tokens.len() {
        if tokens[i] == "and" {
            i += 1;
            continue;
        }
        let action = Action::ALL.into_iter().find(|a| {
            let words: Vec<&str> = a.phrase().split(' ').collect();
            tokens.len() >= i + words.len()
                && words
                    .iter()
                    .zip(&tokens[i..])
                    .all(|(w, t)| w.eq_ignore_ascii_case(t))
        });
        let Some(action) = action else {
            return Err(unexpected(i));
        };
        i += action.phrase().split(' ').count();
        for word in ["with", "probability"] {
            if tokens.get(i) != Some(&word) {
                return Err(unexpected(i));
            }
            i += 1;
        }
        let token = tokens.get(i).ok_or_else(|| unexpected(i))?;
        let v = parse_number(token).ok_or_else(|| ParseError::InvalidNumber {
            clause: action.phrase(),
            token: token.to_string(),
        })?;
        i += 1;
        let slot = &mut values[action.index()];
        if slot.is_some() {
            return Err(ParseError::DuplicateClause(action.phrase()));
        }
        *slot = Some(v.max(0.0));
    }
    let mut p = [0.0; 6];
    for (a, v) in Action::ALL.iter().zip(values) {
        p[a.index()] = v.ok_or(ParseError::MissingClause(a.phrase()))?;
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(ParseError::SumOutOfRange(sum));
    }
    ActionDistribution::normalized(p).map_err(|_| ParseError::SumOutOfRange(sum))
}

/// Eleven rows of the occupancy patch ('#' occupied, '.' free, '@' the
/// agent) followed by a pose line.
pub fn render_patch_text(obs: &Observation) -> String {
    let side = 2 * PATCH_RADIUS as usize + 1;
    let mut out = String::with_capacity(side * (side + 1) + 48);
    for row in 0..side {
        for col in 0..side {
            let c = if row == side / 2 && col == side / 2 {
                '@'
            } else if obs.patch[row * side + col] != 0 {
                '#'
            } else {
                '.'
            };
            out.push(c);
        }
        out.push('\n');
    }
    let _ = write!(
        out,
        "gps=({:.2},{:.2}) compass={:.2}rad",
        obs.gps[0], obs.gps[1], obs.compass
    );
    out
}

/// One line describing the goal sighting and the depth rays.
pub fn render_view_text(obs: &Observation) -> String {
    let mut out = match obs.sighting {
        Some(s) => format!(
            "goal visible at {:.2}m, bearing {:.0}deg",
            s.distance_m,
            s.bearing_rad.to_degrees()
        ),
        None => String::from("goal not visible"),
    };
    out.push_str("; depth");
    for (a, d) in DEPTH_ANGLES_DEG.iter().zip(&obs.depth) {
        let _ = write!(out, " {a}deg={d:.2}m");
    }
    out
}

/// Plain-text summary of the episode so far, used for the history slot.
pub fn history_summary(t: usize, obs: &Observation) -> String {
    format!(
        "step {t}, last action: {}, last move collided: {}",
        obs.prev_action.map_or("none", Action::phrase),
        if obs.collided_last { "yes" } else { "no" }
    )
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("template variant {index} out of range (have {count})")]
pub struct VariantError {
    pub index: usize,
    pub count: usize,
}

pub fn render_prompt(
    goal: GoalCategory,
    obs: &Observation,
    history: &str,
    p_sota: &ActionDistribution,
    variant: usize,
) -> Result<String, VariantError> {
    let all = templates();
    let template = all.get(variant).ok_or(VariantError {
        index: variant,
        count: all.len(),
    })?;
    let image = format!("\n{}\n{}\n", render_patch_text(obs), render_view_text(obs));
    Ok(template
        .replace(GOAL_SLOT, goal.label())
        .replace(IMAGE_SLOT, &image)
        .replace(HISTORY_SLOT, history)
        .replace(ACTION_PROB_SLOT, &serialize_distribution(p_sota)))
}

/// The text between `<tag>` and `</tag>`, if present.
pub fn extract_tag<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let end = start + text[start..].find(&close)?;
    Some(&text[start..end])
}
