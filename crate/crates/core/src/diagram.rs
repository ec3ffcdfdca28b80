//! Powers of `H = I + H_1 + … + H_N` as ordered interaction words.
//!
//! Expanding `(I + ΣH_a)^k` and absorbing identities (`I² = I`,
//! `I H_a = H_a I = H_a`) leaves every ordered word `H_{a1}·…·H_{aℓ}` with
//! `ℓ ≤ k`, and the `k`-fold products that collapse onto a length-`ℓ` word
//! number exactly `C(k, ℓ)` (choose where the non-identity factors sit).

use std::fmt;

use crate::error::{check_capacity, Error, Result};
use crate::fock::{MixedState, OperatorExpr};
use crate::scalar::Scalar;
use crate::update::UpdateOperator;

/// Largest power [`expand_power`] accepts.
pub const MAX_POWER: u32 = 12;

/// An ordered product of pieces with its multiplicity. Labels are
/// zero-based piece positions and render one-based as `H_1, H_2, …`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InteractionWord {
    pub pieces: Vec<usize>,
    pub coefficient: u64,
}

impl InteractionWord {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

impl fmt::Display for InteractionWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} × ", self.coefficient)?;
        if self.pieces.is_empty() {
            return f.write_str("I");
        }
        let labels: Vec<String> = self.pieces.iter().map(|a| format!("H_{}", a + 1)).collect();
        f.write_str(&labels.join("·"))
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// All words of `(I + H_1 + … + H_N)^k`, ordered by length then
/// lexicographically.
pub fn expand_power(pieces: usize, k: u32) -> Result<Vec<InteractionWord>> {
    if k > MAX_POWER {
        return Err(Error::Capacity { what: "diagram power".into(), size: k as u128, limit: MAX_POWER as u128 });
    }
    let lengths = if pieces == 0 { 0 } else { k as usize };
    let count = (0..=lengths as u32).fold(0u128, |acc, l| acc.saturating_add((pieces as u128).saturating_pow(l)));
    check_capacity("interaction words", count)?;
    let mut words = vec![InteractionWord { pieces: Vec::new(), coefficient: 1 }];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for len in 1..=lengths {
        layer = layer
            .iter()
            .flat_map(|w| {
                (0..pieces).map(move |a| {
                    let mut next = w.clone();
                    next.push(a);
                    next
                })
            })
            .collect();
        let coefficient = binomial(k as u64, len as u64);
        words.extend(layer.iter().map(|w| InteractionWord { pieces: w.clone(), coefficient }));
    }
    Ok(words)
}

/// Applies the word's pieces right to left and scales by its coefficient.
pub fn evaluate_word<T: Scalar>(
    word: &InteractionWord,
    h: &UpdateOperator<T>,
    state: &MixedState<T>,
) -> Result<MixedState<T>> {
    let mut out = state.clone();
    for &a in word.pieces.iter().rev() {
        let piece = h.pieces().get(a).ok_or_else(|| {
            Error::Config(format!("word refers to H_{} but the operator has {} pieces", a + 1, h.pieces().len()))
        })?;
        out = piece.apply(&out)?;
    }
    Ok(out.scale(&T::from_count(word.coefficient)))
}

/// `Σ_w coeff(w) · w |state⟩`.
pub fn evaluate_words<T: Scalar>(
    words: &[InteractionWord],
    h: &UpdateOperator<T>,
    state: &MixedState<T>,
) -> Result<MixedState<T>> {
    words.iter().try_fold(MixedState::zero(state.layout().clone()), |acc, w| Ok(acc.add(&evaluate_word(w, h, state)?)))
}

/// `(I + H)^k` as one normal-ordered expression.
pub fn power_expr<T: Scalar>(h: &UpdateOperator<T>, k: u32) -> OperatorExpr<T> {
    (OperatorExpr::identity() + h.expr().clone()).pow(k)
}

/// Whether the word expansion of `(I + H)^k` acting on `state` agrees with
/// applying the expanded operator directly.
pub fn verify_expansion<T: Scalar>(h: &UpdateOperator<T>, state: &MixedState<T>, k: u32) -> Result<bool> {
    let words = expand_power(h.pieces().len(), k)?;
    let by_words = evaluate_words(&words, h, state)?;
    let direct = state.apply_expr(&power_expr(h, k))?;
    Ok(by_words.sub(&direct).is_zero())
}

/// One line per word, e.g. `2 × H_1` or `1 × H_2·H_1`.
pub fn render_words(words: &[InteractionWord]) -> String {
    words.iter().map(|w| format!("{w}\n")).collect()
}
