//! Sentence-position schemes: maps from a sentence's ordinal within its
//! document to a row index of the position-embedding table.
//!
//! Three schemes are supported
//!
//! * **absolute** — the 1-based ordinal itself;
//! * **normalized** — the ordinal rescaled onto a corpus-wide reference
//!   length, so positions align across documents of different sizes;
//! * **k-quantile** — the index of the contiguous k-way chunk of the
//!   document that contains the sentence.
//!
//! Row 0 of the embedding table is never produced by any scheme; it is kept
//! for padding contexts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of quantiles when none is given.
pub const DEFAULT_QUANTILES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum PositionError {
    #[error("sentence ordinal must be >= 1, got {0}")]
    OrdinalZero(usize),
    #[error("sentence ordinal {p} exceeds document length {doc_len}")]
    OrdinalPastEnd { p: usize, doc_len: usize },
    #[error("reference length must be >= 1, got {0}")]
    BadRefLen(usize),
    #[error("quantile count must be >= 2, got {0}")]
    BadQuantiles(usize),
    #[error("document length must be >= 1, got {0}")]
    BadDocLen(usize),
    #[error("unknown position scheme `{0}` (expected absolute | normalized:<ref_len> | kquantile:<k>)")]
    ParseScheme(String),
}

/// A fully resolved position scheme, as stored in checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PositionScheme {
    Absolute,
    Normalized { ref_len: usize },
    KQuantile { k: usize },
}

impl PositionScheme {
    pub fn validate(&self) -> Result<(), PositionError> {
        match *self {
            PositionScheme::Absolute => Ok(()),
            PositionScheme::Normalized { ref_len } if ref_len >= 1 => Ok(()),
            PositionScheme::Normalized { ref_len } => Err(PositionError::BadRefLen(ref_len)),
            PositionScheme::KQuantile { k } if k >= 2 => Ok(()),
            PositionScheme::KQuantile { k } => Err(PositionError::BadQuantiles(k)),
        }
    }
}

impl fmt::Display for PositionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositionScheme::Absolute => write!(f, "absolute"),
            PositionScheme::Normalized { ref_len } => write!(f, "normalized:{ref_len}"),
            PositionScheme::KQuantile { k } => write!(f, "kquantile:{k}"),
        }
    }
}

impl FromStr for PositionScheme {
    type Err = PositionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let scheme = SchemeSpec::from_str(s)?;
        match scheme {
            SchemeSpec::Absolute => Ok(PositionScheme::Absolute),
            SchemeSpec::Normalized(Some(r)) => Ok(PositionScheme::Normalized { ref_len: r }),
            SchemeSpec::KQuantile(k) => Ok(PositionScheme::KQuantile {
                k: k.unwrap_or(DEFAULT_QUANTILES),
            }),
            SchemeSpec::Normalized(None) => Err(PositionError::ParseScheme(format!(
                "{s} (normalized needs a reference length here)"
            ))),
        }
    }
}

/// A scheme as written on the command line, before the corpus-dependent
/// reference length is known. `resolve` produces a [`PositionScheme`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeSpec {
    Absolute,
    Normalized(Option<usize>),
    KQuantile(Option<usize>),
}

impl SchemeSpec {
    /// Fills unset fields: the reference length from the training corpus
    /// (its maximum sentence position) and the default quantile count.
    pub fn resolve(self, corpus_max_position: usize) -> Result<PositionScheme, PositionError> {
        let scheme = match self {
            SchemeSpec::Absolute => PositionScheme::Absolute,
            SchemeSpec::Normalized(ref_len) => PositionScheme::Normalized {
                ref_len: ref_len.unwrap_or(corpus_max_position),
            },
            SchemeSpec::KQuantile(k) => PositionScheme::KQuantile {
                k: k.unwrap_or(DEFAULT_QUANTILES),
            },
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

impl FromStr for SchemeSpec {
    type Err = PositionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(2, ':');
        let head = parts.next().unwrap_or_default();
        let arg = parts.next();
        let parse_arg = |arg: Option<&str>| -> Result<Option<usize>, PositionError> {
            arg.map(|a| a.parse::<usize>().map_err(|_| PositionError::ParseScheme(s.into())))
                .transpose()
        };
        match head {
            "absolute" if arg.is_none() => Ok(SchemeSpec::Absolute),
            "normalized" => Ok(SchemeSpec::Normalized(parse_arg(arg)?)),
            "kquantile" => Ok(SchemeSpec::KQuantile(parse_arg(arg)?)),
            _ => Err(PositionError::ParseScheme(s.into())),
        }
    }
}

/// The 1-based ordinal itself. Clamping to the embedding table is applied
/// by [`position_index`].
pub fn absolute_position(p: usize) -> Result<usize, PositionError> {
    if p < 1 {
        return Err(PositionError::OrdinalZero(p));
    }
    Ok(p)
}

/// Rescales ordinal `p` of a document of `doc_len` sentences onto a
/// reference length, with exact integer arithmetic:
/// `floor(p * ref_len / doc_len)`.
pub fn normalized_position(p: usize, doc_len: usize, ref_len: usize) -> Result<usize, PositionError> {
    if p < 1 {
        return Err(PositionError::OrdinalZero(p));
    }
    if doc_len < 1 {
        return Err(PositionError::BadDocLen(doc_len));
    }
    if p > doc_len {
        return Err(PositionError::OrdinalPastEnd { p, doc_len });
    }
    if ref_len < 1 {
        return Err(PositionError::BadRefLen(ref_len));
    }
    Ok((p as u64 * ref_len as u64 / doc_len as u64) as usize)
}

/// Quantile id of ordinal `p` when the document is cut into `k` contiguous
/// chunks: `ceil(p * k / doc_len)`, in `1..=k`. Chunk sizes differ by at
/// most one when `doc_len >= k`.
pub fn kquantile_position(p: usize, doc_len: usize, k: usize) -> Result<usize, PositionError> {
    if p < 1 {
        return Err(PositionError::OrdinalZero(p));
    }
    if doc_len < 1 {
        return Err(PositionError::BadDocLen(doc_len));
    }
    if p > doc_len {
        return Err(PositionError::OrdinalPastEnd { p, doc_len });
    }
    if k < 2 {
        return Err(PositionError::BadQuantiles(k));
    }
    let num = p as u64 * k as u64;
    Ok(num.div_ceil(doc_len as u64) as usize)
}

/// Dispatches to the scheme and clamps the result to the embedding table:
/// `min(value, max_positions - 1)`. Document counts can exceed the table,
/// so every scheme output is clamped rather than rejected.
pub fn position_index(
    scheme: &PositionScheme,
    p: usize,
    doc_len: usize,
    max_positions: usize,
) -> Result<usize, PositionError> {
    let raw = match *scheme {
        PositionScheme::Absolute => {
            if doc_len < 1 {
                return Err(PositionError::BadDocLen(doc_len));
            }
            if p > doc_len {
                return Err(PositionError::OrdinalPastEnd { p, doc_len });
            }
            absolute_position(p)?
        }
        PositionScheme::Normalized { ref_len } => normalized_position(p, doc_len, ref_len)?,
        PositionScheme::KQuantile { k } => kquantile_position(p, doc_len, k)?,
    };
    Ok(raw.min(max_positions.saturating_sub(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absolute_is_the_ordinal() {
        assert_eq!(absolute_position(1).unwrap(), 1);
        assert_eq!(absolute_position(2).unwrap(), 2);
        assert_eq!(absolute_position(385).unwrap(), 385);
        assert_eq!(absolute_position(0), Err(PositionError::OrdinalZero(0)));
    }

    #[test]
    fn normalized_worked_example() {
        // Sentence 25 of a 50-sentence document scaled onto a 100-sentence
        // reference lands exactly on 50.
        assert_eq!(normalized_position(25, 50, 100).unwrap(), 50);
    }

    #[test]
    fn normalized_is_identity_when_ref_equals_doc_len() {
        for doc_len in [1usize, 2, 7, 50, 385] {
            for p in 1..=doc_len {
                assert_eq!(normalized_position(p, doc_len, doc_len).unwrap(), p);
            }
        }
    }

    #[test]
    fn normalized_uses_floor() {
        // floor(7 * 100 / 30) = floor(23.33) = 23
        assert_eq!(normalized_position(7, 30, 100).unwrap(), 23);
    }

    #[test]
    fn normalized_rejects_bad_inputs() {
        assert!(normalized_position(0, 10, 100).is_err());
        assert!(normalized_position(11, 10, 100).is_err());
        assert!(normalized_position(3, 10, 0).is_err());
        assert!(normalized_position(3, 0, 100).is_err());
    }

    #[test]
    fn kquantile_endpoints() {
        assert_eq!(kquantile_position(1, 100, 4).unwrap(), 1);
        assert_eq!(kquantile_position(100, 100, 4).unwrap(), 4);
        assert_eq!(kquantile_position(50, 100, 4).unwrap(), 2);
        assert!(kquantile_position(5, 10, 1).is_err());
        assert!(kquantile_position(0, 10, 4).is_err());
        assert!(kquantile_position(11, 10, 4).is_err());
    }

    /// Independent route: cut 1..=doc_len at boundaries floor(q*L/k) and
    /// assign by scanning the chunks.
    fn brute_force_quantile(p: usize, doc_len: usize, k: usize) -> usize {
        let bound = |q: usize| q * doc_len / k; // integer floor
        (1..=k)
            .find(|&q| p > bound(q - 1) && p <= bound(q))
            .expect("every ordinal falls in some chunk")
    }

    #[test]
    fn kquantile_matches_brute_force_partition() {
        for doc_len in 1..=200 {
            for k in [2usize, 4, 8] {
                for p in 1..=doc_len {
                    assert_eq!(
                        kquantile_position(p, doc_len, k).unwrap(),
                        brute_force_quantile(p, doc_len, k),
                        "p={p} doc_len={doc_len} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn kquantile_chunks_are_balanced() {
        for doc_len in [8usize, 9, 20, 21, 100, 117] {
            for k in [2usize, 4, 8] {
                if doc_len < k {
                    continue;
                }
                let mut counts = vec![0usize; k + 1];
                for p in 1..=doc_len {
                    counts[kquantile_position(p, doc_len, k).unwrap()] += 1;
                }
                let sizes: Vec<usize> = counts[1..].to_vec();
                let min = sizes.iter().min().unwrap();
                let max = sizes.iter().max().unwrap();
                assert!(max - min <= 1, "doc_len={doc_len} k={k} sizes={sizes:?}");
            }
        }
    }

    #[test]
    fn position_index_clamps_to_table() {
        let idx = position_index(&PositionScheme::Absolute, 600, 700, 512).unwrap();
        assert_eq!(idx, 511);
        let idx = position_index(&PositionScheme::Normalized { ref_len: 100 }, 40, 40, 512).unwrap();
        assert_eq!(idx, 100);
    }

    #[test]
    fn kquantile_index_stays_in_range() {
        let scheme = PositionScheme::KQuantile { k: 8 };
        for doc_len in [1usize, 5, 8, 33, 400] {
            for p in 1..=doc_len {
                let idx = position_index(&scheme, p, doc_len, 512).unwrap();
                assert!((1..=8).contains(&idx), "p={p} L={doc_len} idx={idx}");
            }
        }
    }

    #[test]
    fn scheme_strings_round_trip() {
        for s in ["absolute", "normalized:348", "kquantile:8"] {
            let scheme: PositionScheme = s.parse().unwrap();
            assert_eq!(scheme.to_string(), s);
        }
        assert!("nonsense".parse::<PositionScheme>().is_err());
        assert!("absolute:3".parse::<PositionScheme>().is_err());
        assert!("kquantile:x".parse::<PositionScheme>().is_err());
    }

    #[test]
    fn scheme_spec_resolution() {
        let spec: SchemeSpec = "normalized".parse().unwrap();
        assert_eq!(
            spec.resolve(385).unwrap(),
            PositionScheme::Normalized { ref_len: 385 }
        );
        let spec: SchemeSpec = "kquantile".parse().unwrap();
        assert_eq!(spec.resolve(100).unwrap(), PositionScheme::KQuantile { k: 8 });
        let spec: SchemeSpec = "normalized:64".parse().unwrap();
        assert_eq!(
            spec.resolve(385).unwrap(),
            PositionScheme::Normalized { ref_len: 64 }
        );
    }
}
