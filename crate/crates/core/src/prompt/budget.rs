//! Token accounting and history truncation.

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::gateway::{ChatMessage, Role};

/// How message text is converted into a token estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenCounter {
    /// ceil(characters / 4).
    #[default]
    QuarterChars,
    /// ceil(words * 4 / 3).
    Words,
}

impl TokenCounter {
    pub fn count(&self, text: &str) -> usize {
        match self {
            TokenCounter::QuarterChars => text.chars().count().div_ceil(4),
            TokenCounter::Words => (text.split_whitespace().count() * 4).div_ceil(3),
        }
    }

    pub fn count_messages(&self, messages: &[ChatMessage]) -> usize {
        messages.iter().map(|m| self.count(&m.content)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TokenBudget {
    pub context_limit: u32,
    pub reserved_for_reply: u32,
}

impl TokenBudget {
    pub const DEFAULT_RESERVED: u32 = 1024;

    pub fn new(context_limit: u32, reserved_for_reply: u32) -> Result<Self, PromptError> {
        if context_limit == 0 || reserved_for_reply == 0 || reserved_for_reply >= context_limit {
            return Err(PromptError::InvalidBudget {
                context_limit,
                reserved_for_reply,
            });
        }
        Ok(Self {
            context_limit,
            reserved_for_reply,
        })
    }

    /// Budget with the default reply reservation.
    pub fn with_limit(context_limit: u32) -> Result<Self, PromptError> {
        Self::new(context_limit, Self::DEFAULT_RESERVED)
    }

    /// Tokens available to the prompt.
    pub fn available(&self) -> usize {
        (self.context_limit - self.reserved_for_reply) as usize
    }
}

/// [`enforce_budget_with`] using the default counter.
pub fn enforce_budget(
    history: &[ChatMessage],
    budget: &TokenBudget,
) -> Result<Vec<ChatMessage>, PromptError> {
    enforce_budget_with(history, budget, TokenCounter::default())
}

/// Drops the oldest user/assistant exchanges until the history fits the
/// budget. The system message, the most recent assistant message and the
/// newest user message are never dropped; retained messages keep their order.
pub fn enforce_budget_with(
    history: &[ChatMessage],
    budget: &TokenBudget,
    counter: TokenCounter,
) -> Result<Vec<ChatMessage>, PromptError> {
    if history.first().map(|m| m.role) != Some(Role::System)
        || history[1..].iter().any(|m| m.role == Role::System)
    {
        return Err(PromptError::MissingSystemMessage);
    }
    let available = budget.available();
    let sizes: Vec<usize> = history.iter().map(|m| counter.count(&m.content)).collect();
    let mut total: usize = sizes.iter().sum();
    if total <= available {
        return Ok(history.to_vec());
    }

    let last_of = |role| history.iter().rposition(|m| m.role == role);
    let pinned = [Some(0), last_of(Role::Assistant), last_of(Role::User)];
    let is_pinned = |i: usize| pinned.contains(&Some(i));

    let mandatory: usize = (0..history.len()).filter(|&i| is_pinned(i)).map(|i| sizes[i]).sum();
    if mandatory > available {
        return Err(PromptError::PromptTooLarge {
            required: mandatory,
            available,
        });
    }

    // Exchanges: a user message and the assistant reply that follows it, or a
    // lone message when the pattern is broken.
    let mut keep = vec![true; history.len()];
    let mut i = 1;
    while i < history.len() && total > available {
        let pair = history[i].role == Role::User
            && history.get(i + 1).is_some_and(|m| m.role == Role::Assistant);
        let unit = if pair { i..i + 2 } else { i..i + 1 };
        for j in unit.clone() {
            if !is_pinned(j) {
                keep[j] = false;
                total -= sizes[j];
            }
        }
        i = unit.end;
    }
    Ok(history
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(m, _)| m.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(role: Role, chars: usize) -> ChatMessage {
        ChatMessage {
            role,
            content: "x".repeat(chars),
        }
    }

    /// Independent oracle: ceil(chars / 4) via integer arithmetic.
    fn tokens(chars: usize) -> usize {
        (chars + 3) / 4
    }

    #[test]
    fn counter_rounds_up() {
        assert_eq!(TokenCounter::QuarterChars.count(""), 0);
        assert_eq!(TokenCounter::QuarterChars.count("abc"), 1);
        assert_eq!(TokenCounter::QuarterChars.count("abcd"), 1);
        assert_eq!(TokenCounter::QuarterChars.count("abcde"), 2);
        assert_eq!(TokenCounter::QuarterChars.count("ééééé"), 2);
        assert_eq!(TokenCounter::Words.count("a b c"), 4);
    }

    #[test]
    fn under_budget_is_unchanged() {
        let h = vec![msg(Role::System, 40), msg(Role::User, 40)];
        let b = TokenBudget::with_limit(4096).unwrap();
        assert_eq!(enforce_budget(&h, &b).unwrap(), h);
    }

    #[test]
    fn six_exchanges_over_4096() {
        // system 400 chars, six 2000/2000-char exchanges, newest user 2000.
        let mut h = vec![msg(Role::System, 400)];
        for _ in 0..6 {
            h.push(msg(Role::User, 2000));
            h.push(msg(Role::Assistant, 2000));
        }
        h.push(msg(Role::User, 2000));
        let b = TokenBudget::with_limit(4096).unwrap();
        let available = 4096 - 1024;

        // Oracle: smallest number of oldest exchanges to drop so the rest fits.
        let total = |dropped: usize| {
            tokens(400) + (6 - dropped) * (tokens(2000) * 2) + tokens(2000)
        };
        let dropped = (0..=6).find(|&k| total(k) <= available).unwrap();
        assert_eq!(dropped, 4);

        let out = enforce_budget(&h, &b).unwrap();
        assert_eq!(out.len(), 1 + 2 * (6 - dropped) + 1);
        assert_eq!(out[0].role, Role::System);
        assert_eq!(TokenCounter::default().count_messages(&out), total(dropped));
        assert!(TokenCounter::default().count_messages(&out) <= available);
    }

    #[test]
    fn oversized_system_message() {
        let h = vec![msg(Role::System, 4 * 3073), msg(Role::User, 4)];
        let b = TokenBudget::with_limit(4096).unwrap();
        assert_eq!(
            enforce_budget(&h, &b),
            Err(PromptError::PromptTooLarge {
                required: 3074,
                available: 3072
            })
        );
    }

    #[test]
    fn latest_assistant_survives_even_when_oldest() {
        let h = vec![
            msg(Role::System, 40),
            msg(Role::User, 4000),
            msg(Role::Assistant, 400),
            msg(Role::User, 40),
        ];
        let b = TokenBudget::new(1000, 100).unwrap();
        let out = enforce_budget(&h, &b).unwrap();
        let roles: Vec<_> = out.iter().map(|m| m.role).collect();
        assert_eq!(roles, vec![Role::System, Role::Assistant, Role::User]);
    }

    #[test]
    fn requires_leading_system() {
        let b = TokenBudget::with_limit(4096).unwrap();
        assert_eq!(
            enforce_budget(&[msg(Role::User, 4)], &b),
            Err(PromptError::MissingSystemMessage)
        );
        assert_eq!(
            enforce_budget(&[msg(Role::System, 4), msg(Role::System, 4)], &b),
            Err(PromptError::MissingSystemMessage)
        );
    }

    #[test]
    fn budget_validation() {
        assert!(TokenBudget::new(1024, 1024).is_err());
        assert!(TokenBudget::new(0, 1).is_err());
        assert_eq!(TokenBudget::with_limit(8192).unwrap().available(), 7168);
    }
}
