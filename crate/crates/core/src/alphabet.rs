use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symbol is an index into the alphabet, `0..size`.
pub type Symbol = u8;

/// A finite alphabet `{0, .., size-1}` with `2 <= size <= 256`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(u16);

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet(2);

    pub fn new(size: usize) -> Result<Self> {
        if !(2..=256).contains(&size) {
            return Err(Error::invalid(format!("alphabet size must be in 2..=256, got {size}")));
        }
        Ok(Alphabet(size as u16))
    }

    pub fn size(self) -> usize {
        self.0 as usize
    }

    /// `M = log₂ |X|`, the per-symbol bit budget.
    pub fn bits(self) -> f64 {
        (self.size() as f64).log2()
    }

    /// `|X|^n`, or `None` if it does not fit in a `u128`.
    pub fn strings(self, n: usize) -> Option<u128> {
        (self.size() as u128).checked_pow(n.try_into().ok()?)
    }

    pub fn check(self, x: &[Symbol]) -> Result<()> {
        match x.iter().find(|&&a| a as usize >= self.size()) {
            Some(&a) => Err(Error::SymbolOutOfRange { symbol: a as usize, size: self.size() }),
            None => Ok(()),
        }
    }

    /// Lexicographic rank of `x` among all strings of length `x.len()`.
    pub fn index_of(self, x: &[Symbol]) -> usize {
        x.iter().fold(0usize, |acc, &a| acc * self.size() + a as usize)
    }

    /// Inverse of [`Alphabet::index_of`] for strings of length `n`.
    pub fn string_at(self, mut index: usize, n: usize) -> Vec<Symbol> {
        let mut out = vec![0; n];
        for slot in out.iter_mut().rev() {
            *slot = (index % self.size()) as Symbol;
            index /= self.size();
        }
        out
    }

    /// Renders a string compactly: digits for alphabets up to 10, else comma separated.
    pub fn render(self, x: &[Symbol]) -> String {
        if self.size() <= 10 {
            x.iter().map(|a| char::from(b'0' + a)).collect()
        } else {
            x.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
        }
    }

    /// Parses the output of [`Alphabet::render`].
    pub fn parse(self, s: &str) -> Result<Vec<Symbol>> {
        let symbols: Vec<usize> = if self.size() <= 10 {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as usize)
                        .ok_or_else(|| Error::invalid(format!("bad symbol {c:?} in {s:?}")))
                })
                .collect::<Result<_>>()?
        } else if s.is_empty() {
            Vec::new()
        } else {
            s.split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| Error::invalid(format!("bad symbol {t:?} in {s:?}"))))
                .collect::<Result<_>>()?
        };
        let out: Vec<Symbol> = symbols
            .iter()
            .map(|&a| {
                if a < self.size() {
                    Ok(a as Symbol)
                } else {
                    Err(Error::SymbolOutOfRange { symbol: a, size: self.size() })
                }
            })
            .collect::<Result<_>>()?;
        Ok(out)
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;

    fn try_from(size: usize) -> Result<Self> {
        Alphabet::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.size()
    }
}
