//! Random typed test inputs and the canonical output form.

mod harness;

pub use harness::{emit_harness, emit_multi_harness, emit_shell, literal, HarnessError, HarnessSource};

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signature::{Signature, TypeTag};

/// Runtime mirror of [`TypeTag`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    /// Language-invariant rendering, identical to what every harness prints.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Float(x) => out.push_str(&format_g6(*x)),
            Value::Str(s) => out.push_str(s),
            Value::List(xs) => {
                out.push('[');
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    x.write_canonical(out);
                }
                out.push(']');
            }
        }
    }

    pub fn matches(&self, tag: &TypeTag) -> bool {
        match (self, tag) {
            (Value::Int(_), TypeTag::Int)
            | (Value::Float(_), TypeTag::Float)
            | (Value::Bool(_), TypeTag::Bool)
            | (Value::Str(_), TypeTag::Str) => true,
            (Value::List(xs), TypeTag::List(inner)) => xs.iter().all(|x| x.matches(inner)),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// C's `%.6g` with `-0` folded to `0` and `nan`/`inf` spelled in lowercase.
pub fn format_g6(x: f64) -> String {
    const PRECISION: i32 = 6;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = strip_fraction_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (PRECISION - 1 - exp) as usize, x);
        strip_fraction_zeros(&fixed).to_string()
    }
}

fn strip_fraction_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestInput {
    pub args: Vec<Value>,
}

/// Sampling ranges; every range is inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenRanges {
    pub int_range: (i64, i64),
    pub float_range: (f64, f64),
    pub str_len: (usize, usize),
    pub list_len: (usize, usize),
    pub n_inputs: usize,
    pub seed: u64,
}

impl Default for GenRanges {
    fn default() -> Self {
        GenRanges {
            int_range: (-100, 100),
            float_range: (-100.0, 100.0),
            str_len: (0, 12),
            list_len: (0, 8),
            n_inputs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid generator ranges: {0}")]
pub struct RangeError(pub String);

impl GenRanges {
    pub fn validate(&self) -> Result<(), RangeError> {
        let bad = |what: &str| Err(RangeError(what.to_string()));
        if self.int_range.0 > self.int_range.1 {
            return bad("int_range lo > hi");
        }
        let (flo, fhi) = self.float_range;
        if !(flo.is_finite() && fhi.is_finite()) || flo > fhi {
            return bad("float_range must be finite with lo <= hi");
        }
        if self.str_len.0 > self.str_len.1 {
            return bad("str_len lo > hi");
        }
        if self.list_len.0 > self.list_len.1 {
            return bad("list_len lo > hi");
        }
        if self.n_inputs == 0 {
            return bad("n_inputs must be at least 1");
        }
        Ok(())
    }
}

pub const STRING_CHARSET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789 ";

fn sample(tag: &TypeTag, cfg: &GenRanges, rng: &mut ChaCha8Rng) -> Value {
    match tag {
        TypeTag::Int => Value::Int(rng.gen_range(cfg.int_range.0..=cfg.int_range.1)),
        TypeTag::Float => {
            let (lo, hi) = cfg.float_range;
            Value::Float(if lo == hi { lo } else { rng.gen_range(lo..=hi) })
        }
        TypeTag::Bool => Value::Bool(rng.gen()),
        TypeTag::Str => {
            let len = rng.gen_range(cfg.str_len.0..=cfg.str_len.1);
            let s = (0..len).map(|_| *STRING_CHARSET.choose(rng).expect("non-empty charset") as char).collect();
            Value::Str(s)
        }
        TypeTag::List(inner) => {
            let len = rng.gen_range(cfg.list_len.0..=cfg.list_len.1);
            Value::List((0..len).map(|_| sample(inner, cfg, rng)).collect())
        }
    }
}

/// Draws `cfg.n_inputs` argument tuples; the output depends only on `(sig, cfg)`.
pub fn gen_inputs(sig: &Signature, cfg: &GenRanges) -> Vec<TestInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_inputs)
        .map(|_| TestInput { args: sig.params.iter().map(|p| sample(&p.tag, cfg, &mut rng)).collect() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::Param;
    use std::collections::BTreeSet;

    fn sig_of(tags: &[TypeTag]) -> Signature {
        Signature {
            function_name: "f".into(),
            params: tags
                .iter()
                .enumerate()
                .map(|(i, t)| Param { name: format!("p{i}"), tag: t.clone(), native: String::new() })
                .collect(),
            return_present: true,
            owner: None,
        }
    }

    #[test]
    fn g6_matches_c_printf() {
        // Expected strings were produced with Python's `'%.6g' % x`.
        let cases = [
            (0.30000000000000004, "0.3"),
            (1e20, "1e+20"),
            (-0.0, "0"),
            (123456.5, "123456"),
            (999999.5, "1e+06"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (100.0, "100"),
            (-2.5e-7, "-2.5e-07"),
            (1e-5, "1e-05"),
            (5e-324, "4.94066e-324"),
            (1.7976931348623157e308, "1.79769e+308"),
            (2.5, "2.5"),
            (1.0000005, "1"),
            (123.4565, "123.457"),
            (77.77777777, "77.7778"),
            (f64::INFINITY, "inf"),
            (f64::NEG_INFINITY, "-inf"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g6(x), want, "{x:?}");
        }
    }

    #[test]
    fn canonical_lists_and_scalars() {
        let v = Value::List(vec![
            Value::Int(-3),
            Value::List(vec![Value::Bool(true), Value::Str("a b".into())]),
            Value::Float(0.1 + 0.2),
            Value::List(vec![]),
        ]);
        assert_eq!(v.canonical(), "[-3, [true, a b], 0.3, []]");
    }

    #[test]
    fn bool_inputs_stay_in_domain() {
        let cfg = GenRanges { n_inputs: 4, seed: 99, ..Default::default() };
        let inputs = gen_inputs(&sig_of(&[TypeTag::Bool]), &cfg);
        assert_eq!(inputs.len(), 4);
        assert!(inputs.iter().all(|i| matches!(i.args[..], [Value::Bool(_)])));
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let sig = sig_of(&[TypeTag::Int, TypeTag::list(TypeTag::Str), TypeTag::Float]);
        let cfg = GenRanges { seed: 7, ..Default::default() };
        assert_eq!(gen_inputs(&sig, &cfg), gen_inputs(&sig, &cfg));
        let other = GenRanges { seed: 8, ..cfg.clone() };
        assert_ne!(gen_inputs(&sig, &cfg), gen_inputs(&sig, &other));
    }

    #[test]
    fn list_lengths_cover_full_support() {
        let cfg = GenRanges { n_inputs: 1000, seed: 3, ..Default::default() };
        let inputs = gen_inputs(&sig_of(&[TypeTag::list(TypeTag::Int)]), &cfg);
        let lens: BTreeSet<usize> = inputs
            .iter()
            .map(|i| match &i.args[0] {
                Value::List(xs) => xs.len(),
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        assert_eq!(lens, (0..=8).collect());
    }

    #[test]
    fn range_validation() {
        assert!(GenRanges::default().validate().is_ok());
        let bad = GenRanges { int_range: (5, 1), ..Default::default() };
        assert!(bad.validate().is_err());
        let zero = GenRanges { n_inputs: 0, ..Default::default() };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn values_round_trip_through_json() {
        let input = TestInput {
            args: vec![Value::Int(3), Value::Float(3.0), Value::Bool(false), Value::List(vec![Value::Str("x".into())])],
        };
        let text = serde_json::to_string(&input).unwrap();
        assert_eq!(text, r#"[3,3.0,false,["x"]]"#);
        assert_eq!(serde_json::from_str::<TestInput>(&text).unwrap(), input);
    }

    proptest::proptest! {
        #[test]
        fn generated_values_match_signature(seed in 0u64..10_000, n in 1usize..20) {
            let sig = sig_of(&[
                TypeTag::Int,
                TypeTag::list(TypeTag::list(TypeTag::Float)),
                TypeTag::Str,
                TypeTag::Bool,
            ]);
            let cfg = GenRanges { seed, n_inputs: n, ..Default::default() };
            let inputs = gen_inputs(&sig, &cfg);
            proptest::prop_assert_eq!(inputs.len(), n);
            for input in inputs {
                proptest::prop_assert_eq!(input.args.len(), 4);
                for (v, p) in input.args.iter().zip(&sig.params) {
                    proptest::prop_assert!(v.matches(&p.tag));
                }
            }
        }
    }
}
