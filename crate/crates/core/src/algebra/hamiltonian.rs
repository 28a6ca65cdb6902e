use super::coefficient::rational_to_f64;
use super::{AlgebraError, ModeMonomial, OperatorPolynomial, Rational};

/// Physical parameters of one run.
///
/// Frequencies and the anisotropy are exact rationals so that resonance
/// conditions `ω = 0` are decided exactly; the coupling is a plain float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParameters {
    /// a-mode frequency
    pub w: Rational,
    /// b-mode frequency
    pub v: Rational,
    /// coupling of the classical cubic potential
    pub lambda: f64,
    /// anisotropy of the `q₂³` term
    pub n_aniso: Rational,
}

impl FlowParameters {
    pub fn new(w: Rational, v: Rational, lambda: f64, n_aniso: Rational) -> Result<Self, AlgebraError> {
        if w <= Rational::from_integer(0) || v <= Rational::from_integer(0) {
            return Err(AlgebraError::InvalidParameter(format!(
                "frequencies must be positive, got w={w}, v={v}"
            )));
        }
        if !lambda.is_finite() {
            return Err(AlgebraError::InvalidParameter(format!("coupling must be finite, got {lambda}")));
        }
        Ok(FlowParameters { w, v, lambda, n_aniso })
    }

    /// Builds parameters from decimal strings such as `"1.3"` or `"13/10"`.
    pub fn parse(w: &str, v: &str, lambda: f64, n_aniso: &str) -> Result<Self, AlgebraError> {
        Self::new(parse_rational(w)?, parse_rational(v)?, lambda, parse_rational(n_aniso)?)
    }

    /// Incommensurate set of the reference tables: w=1.3, v=0.7, λ=−0.1, n=0.1.
    pub fn incommensurate_reference() -> Self {
        FlowParameters {
            w: Rational::new(13, 10),
            v: Rational::new(7, 10),
            lambda: -0.1,
            n_aniso: Rational::new(1, 10),
        }
    }

    /// Commensurate set: w=v=1, λ=−0.1, n=0.1.
    pub fn commensurate_reference() -> Self {
        FlowParameters {
            w: Rational::from_integer(1),
            v: Rational::from_integer(1),
            lambda: -0.1,
            n_aniso: Rational::new(1, 10),
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        FlowParameters { lambda, ..self }
    }

    pub fn w_f64(&self) -> f64 {
        rational_to_f64(self.w)
    }

    pub fn v_f64(&self) -> f64 {
        rational_to_f64(self.v)
    }

    /// Operator coupling `g` multiplying `(b†+b)(a†+a)²`.
    ///
    /// With `q_i = (a_i + a_i†)/√(2ω_i)` the term `λ q₂ q₁²` becomes
    /// `λ / (2w √(2v)) · (b†+b)(a†+a)²`.
    pub fn coupling(&self) -> f64 {
        coupling_for(self.lambda, self.w_f64(), self.v_f64())
    }

    /// Relative weight of `(b†+b)³` against `(b†+b)(a†+a)²` inside the
    /// interaction, `n · w / v`.
    pub fn cubic_ratio(&self) -> Rational {
        self.n_aniso * self.w / self.v
    }

    /// Zero-point energy `(w + v) / 2`.
    pub fn zero_point(&self) -> Rational {
        (self.w + self.v) / Rational::from_integer(2)
    }

    /// Unperturbed energy `w (n1 + ½) + v (n2 + ½)`.
    pub fn free_energy(&self, n1: u32, n2: u32) -> f64 {
        self.w_f64() * (n1 as f64 + 0.5) + self.v_f64() * (n2 as f64 + 0.5)
    }

    /// Classical potential `½ w q₁² + ½ v q₂² + λ q₂ (q₁² + n q₂²)`.
    pub fn potential(&self, q1: f64, q2: f64) -> f64 {
        let n = rational_to_f64(self.n_aniso);
        0.5 * self.w_f64() * q1 * q1 + 0.5 * self.v_f64() * q2 * q2 + self.lambda * q2 * (q1 * q1 + n * q2 * q2)
    }
}

pub fn coupling_for(lambda: f64, w: f64, v: f64) -> f64 {
    lambda / (2.0 * w * (2.0 * v).sqrt())
}

/// Parses `"p/q"`, integers, or plain decimals (`"-0.125"`) exactly.
pub fn parse_rational(text: &str) -> Result<Rational, AlgebraError> {
    let s = text.trim();
    let bad = || AlgebraError::InvalidParameter(format!("not an exact rational: {text:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) || frac_part.len() > 15 {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i64 = digits.parse().map_err(|_| bad())?;
    let denom = 10i64.pow(frac_part.len() as u32);
    let r = Rational::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// The Hénon–Heiles operator split into its exact pieces.
///
/// `H = free + zero_point + coupling · interaction`, where `interaction` is
/// `(b†+b)((a†+a)² + n_eff (b†+b)²)` in normal order with exact coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct HenonHeiles {
    pub params: FlowParameters,
    /// `w a†a + v b†b`
    pub free: OperatorPolynomial<Rational>,
    /// `(w + v)/2`, or zero when the zero-point shift was not requested
    pub zero_point: Rational,
    pub interaction: OperatorPolynomial<Rational>,
    pub coupling: f64,
}

impl HenonHeiles {
    /// Full operator with numeric coefficients.
    pub fn total(&self) -> OperatorPolynomial<f64> {
        let mut h = self.free.to_f64();
        h.add_term(ModeMonomial::IDENTITY, rational_to_f64(self.zero_point));
        h.add_assign(&self.interaction.to_f64().map(|c| c * self.coupling));
        h
    }
}

pub fn build_henon_heiles(params: FlowParameters, include_zero_point: bool) -> HenonHeiles {
    let free: OperatorPolynomial<Rational> = [
        (ModeMonomial::number(1, 0), params.w),
        (ModeMonomial::number(0, 1), params.v),
    ]
    .into_iter()
    .collect();

    let one = Rational::from_integer(1);
    let qa = OperatorPolynomial::from_pairs(&[((1, 0, 0, 0), 1), ((0, 1, 0, 0), 1)]);
    let qb = OperatorPolynomial::from_pairs(&[((0, 0, 1, 0), 1), ((0, 0, 0, 1), 1)]);
    let qa2 = qa.mul(&qa).expect("small word");
    let qb2 = qb.mul(&qb).expect("small word");
    let inner = qa2.plus(&qb2.scale(params.cubic_ratio()));
    let interaction = qb.mul(&inner).expect("small word");
    debug_assert!(interaction.is_hermitian());

    HenonHeiles {
        params,
        free,
        zero_point: if include_zero_point { params.zero_point() } else { one - one },
        interaction,
        coupling: params.coupling(),
    }
}
