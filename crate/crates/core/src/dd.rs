//! Double-double arithmetic.
//!
//! Used wherever an integer multiple of a real has to be reduced mod 1 or
//! floored: rotation powers `x + kθ mod 1`, linear iterates `[γn + ℓ]` and the
//! suspension flow. A value is the unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi) / 2`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

// Dekker split; avoids relying on a hardware fma so results are identical on
// every target, wasm included.
#[inline]
fn split(a: f64) -> (f64, f64) {
    const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, err)
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    /// Exact for |k| < 2^53 up to the final renormalisation.
    pub fn mul_i64(self, k: i64) -> Self {
        self.mul_f64(k as f64)
    }

    pub fn add_f64(self, b: f64) -> Self {
        let (s, e) = two_sum(self.hi, b);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        DoubleDouble { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self - DoubleDouble::from_f64(b).mul_f64(q1);
        let q2 = r.hi / b;
        let r = r - DoubleDouble::from_f64(b).mul_f64(q2);
        let q3 = r.hi / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo }.add_f64(q3)
    }

    pub fn recip(self) -> Self {
        let q1 = 1.0 / self.hi;
        let r = DoubleDouble::ONE - self.mul_f64(q1);
        let q2 = r.hi / self.hi;
        let r = r - self.mul_f64(q2);
        let q3 = r.hi / self.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo }.add_f64(q3)
    }

    /// Largest integer not exceeding the value.
    pub fn floor(self) -> Self {
        let fh = self.hi.floor();
        if fh != self.hi {
            // |lo| is below half an ulp of hi, which cannot cross an integer.
            return DoubleDouble { hi: fh, lo: 0.0 };
        }
        let fl = self.lo.floor();
        let (hi, lo) = quick_two_sum(fh, fl);
        DoubleDouble { hi, lo }
    }

    pub fn floor_i64(self) -> i64 {
        let f = self.floor();
        f.hi as i64 + f.lo as i64
    }

    /// Fractional part in `[0, 1)` as a double-double.
    pub fn frac(self) -> Self {
        self - self.floor()
    }

    /// Fractional part rounded to binary64, wrapped into `[0, 1)`.
    pub fn frac_f64(self) -> f64 {
        let v = self.frac().to_f64();
        if v >= 1.0 {
            0.0
        } else {
            v
        }
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, b: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        DoubleDouble { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, b: DoubleDouble) -> DoubleDouble {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, b: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble::from_f64(x)
    }
}

/// Irrational constants to roughly 32 significant digits.
pub mod consts {
    use super::DoubleDouble;

    pub const SQRT2: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::SQRT_2,
        lo: -9.667293313452913e-17,
    };
    pub const SQRT3: DoubleDouble = DoubleDouble {
        hi: 1.7320508075688772,
        lo: 1.0035084221806903e-16,
    };
    pub const GOLDEN: DoubleDouble = DoubleDouble {
        hi: 1.618033988749895,
        lo: -5.432115203682506e-17,
    };
    pub const E: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::E,
        lo: 1.4456468917292502e-16,
    };
    pub const PI: DoubleDouble = DoubleDouble {
        hi: std::f64::consts::PI,
        lo: 1.2246467991473532e-16,
    };

    /// Resolves a symbolic constant name as used in configuration files.
    pub fn named(name: &str) -> Option<DoubleDouble> {
        match name {
            "sqrt2" => Some(SQRT2),
            "sqrt3" => Some(SQRT3),
            "golden" | "phi" => Some(GOLDEN),
            "e" => Some(E),
            "pi" => Some(PI),
            _ => None,
        }
    }

    /// Evaluates a constant expression such as `frac(sqrt2)`, `1/golden` or
    /// `0.3`: numbers, the names accepted by [`named`], `frac(..)`,
    /// parentheses and `+ - * /`. Decimal literals are read as exact ratios
    /// before rounding, so `0.3` carries more than binary64 precision.
    pub fn evaluate(text: &str) -> Result<DoubleDouble, String> {
        let mut p = ConstParser {
            s: text.as_bytes(),
            i: 0,
        };
        let v = p.sum()?;
        p.skip_ws();
        if p.i != p.s.len() {
            return Err(format!("unexpected `{}` in constant `{text}`", &text[p.i..]));
        }
        if !v.is_finite() {
            return Err(format!("constant `{text}` is not finite"));
        }
        Ok(v)
    }

    struct ConstParser<'a> {
        s: &'a [u8],
        i: usize,
    }

    impl ConstParser<'_> {
        fn skip_ws(&mut self) {
            while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
                self.i += 1;
            }
        }

        fn eat(&mut self, c: u8) -> bool {
            self.skip_ws();
            if self.s.get(self.i) == Some(&c) {
                self.i += 1;
                true
            } else {
                false
            }
        }

        fn sum(&mut self) -> Result<DoubleDouble, String> {
            let mut v = self.product()?;
            loop {
                if self.eat(b'+') {
                    v = v + self.product()?;
                } else if self.eat(b'-') {
                    v = v - self.product()?;
                } else {
                    return Ok(v);
                }
            }
        }

        fn product(&mut self) -> Result<DoubleDouble, String> {
            let mut v = self.unary()?;
            loop {
                if self.eat(b'*') {
                    v = v * self.unary()?;
                } else if self.eat(b'/') {
                    let d = self.unary()?;
                    if d.hi == 0.0 {
                        return Err("division by zero in constant".into());
                    }
                    v = v * d.recip();
                } else {
                    return Ok(v);
                }
            }
        }

        fn unary(&mut self) -> Result<DoubleDouble, String> {
            if self.eat(b'-') {
                return Ok(-self.unary()?);
            }
            self.atom()
        }

        fn atom(&mut self) -> Result<DoubleDouble, String> {
            self.skip_ws();
            if self.eat(b'(') {
                let v = self.sum()?;
                return if self.eat(b')') { Ok(v) } else { Err("missing `)` in constant".into()) };
            }
            let start = self.i;
            let Some(&c) = self.s.get(self.i) else {
                return Err("constant ends unexpectedly".into());
            };
            if c.is_ascii_digit() || c == b'.' {
                while self.i < self.s.len()
                    && (self.s[self.i].is_ascii_digit() || matches!(self.s[self.i], b'.' | b'e' | b'E'))
                {
                    if matches!(self.s[self.i], b'e' | b'E')
                        && matches!(self.s.get(self.i + 1), Some(b'+' | b'-'))
                    {
                        self.i += 1;
                    }
                    self.i += 1;
                }
                let lit = std::str::from_utf8(&self.s[start..self.i]).unwrap_or("");
                return decimal(lit);
            }
            while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
                self.i += 1;
            }
            let name = std::str::from_utf8(&self.s[start..self.i]).unwrap_or("");
            if name == "frac" {
                if !self.eat(b'(') {
                    return Err("expected `(` after frac".into());
                }
                let v = self.sum()?;
                if !self.eat(b')') {
                    return Err("missing `)` in constant".into());
                }
                return Ok(v.frac());
            }
            named(name).ok_or_else(|| format!("unknown constant `{name}`"))
        }
    }

    fn decimal(lit: &str) -> Result<DoubleDouble, String> {
        let bad = || format!("malformed number `{lit}`");
        let (mantissa, exp) = match lit.find(['e', 'E']) {
            Some(k) => (&lit[..k], lit[k + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (lit, 0),
        };
        let (whole, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        let digits = format!("{whole}{frac}");
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = exp - frac.len() as i32;
        match digits.trim_start_matches('0').len() {
            0 => Ok(DoubleDouble::ZERO),
            n if n <= 15 && scale.abs() <= 22 => {
                let m = DoubleDouble::from_f64(digits.parse::<u64>().map_err(|_| bad())? as f64);
                let p = DoubleDouble::from_f64(10f64.powi(scale.abs()));
                Ok(if scale >= 0 { m * p } else { m * p.recip() })
            }
            _ => lit.parse::<f64>().map(DoubleDouble::from_f64).map_err(|_| bad()),
        }
    }
}
