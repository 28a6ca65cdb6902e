//! Line-oriented text form: one term per line, `k r m n  <coefficient>`.

use super::{AlgebraError, Coefficient, ModeMonomial, OperatorPolynomial, Rational};

pub trait TextCoefficient: Coefficient {
    fn to_text(&self) -> String;
    fn from_text(text: &str) -> Result<Self, AlgebraError>;
}

impl TextCoefficient for Rational {
    fn to_text(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
    fn from_text(text: &str) -> Result<Self, AlgebraError> {
        super::parse_rational(text)
    }
}

impl TextCoefficient for f64 {
    fn to_text(&self) -> String {
        // shortest representation that round-trips
        format!("{self:e}")
    }
    fn from_text(text: &str) -> Result<Self, AlgebraError> {
        text.trim()
            .parse()
            .map_err(|_| AlgebraError::Parse(format!("bad real coefficient {text:?}")))
    }
}

impl<C: TextCoefficient> OperatorPolynomial<C> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (m, c) in self {
            out.push_str(&format!("{} {} {} {}  {}\n", m.k, m.r, m.m, m.n, c.to_text()));
        }
        out
    }

    /// Parses the text form; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self, AlgebraError> {
        let mut poly = Self::zero();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(AlgebraError::Parse(format!("line {}: expected 5 fields", lineno + 1)));
            }
            let mut exps = [0u32; 4];
            for (slot, f) in exps.iter_mut().zip(&fields[..4]) {
                *slot = f
                    .parse()
                    .map_err(|_| AlgebraError::Parse(format!("line {}: bad exponent {f:?}", lineno + 1)))?;
            }
            let mono = ModeMonomial::new(exps[0], exps[1], exps[2], exps[3]);
            poly.add_term(mono, C::from_text(fields[4])?);
        }
        Ok(poly)
    }
}
