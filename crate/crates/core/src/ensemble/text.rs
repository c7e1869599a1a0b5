//! Line-oriented ensemble file format.
//!
//! ```text
//! met-ensemble v1
//! edge_types 4
//! rate 0.5
//! var b=punctured d=0,3,3,0 L=0.271307
//! var b=channel   d=2,0,0,0 L=0.526258
//! chk d=3,1,0,0 R=0.029215
//! ```
//!
//! `#` starts a comment. The order of `var`/`chk` lines is the class order.

use std::fmt::Write as _;

use super::{ChannelAssignment, CheckClass, EdgeVector, Ensemble, VariableClass};
use crate::error::{Error, Result};

pub const HEADER: &str = "met-ensemble v1";

/// Splits `text` into `(line_number, content)` pairs with comments and blank
/// lines removed.
pub(crate) fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        (!content.is_empty()).then_some((k + 1, content))
    })
}

pub(crate) fn parse_degrees(line: usize, s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::parse(line, format!("bad degree '{t}'")))
        })
        .collect()
}

pub(crate) fn parse_f64(line: usize, what: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what} '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what} must be finite")));
    }
    Ok(v)
}

pub(crate) fn parse_channel(line: usize, s: &str) -> Result<ChannelAssignment> {
    match s {
        "punctured" | "1,0" => Ok(ChannelAssignment::Punctured),
        "channel" | "transmitted" | "0,1" => Ok(ChannelAssignment::Transmitted),
        _ => Err(Error::parse(line, format!("unknown channel assignment '{s}'"))),
    }
}

/// Splits `key=value` tokens.
pub(crate) fn key_values(line: usize, tokens: &[&str]) -> Result<Vec<(String, String)>> {
    tokens
        .iter()
        .map(|t| {
            t.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse(line, format!("expected key=value, got '{t}'")))
        })
        .collect()
}

pub(crate) fn lookup<'a>(line: usize, kv: &'a [(String, String)], key: &str) -> Result<&'a str> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::parse(line, format!("missing '{key}='")))
}

pub fn parse_ensemble(text: &str) -> Result<Ensemble> {
    let mut lines = meaningful_lines(text);
    let (first, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty ensemble file"))?;
    if header != HEADER {
        return Err(Error::parse(first, format!("expected header '{HEADER}'")));
    }

    let mut edge_types: Option<usize> = None;
    let mut rate: Option<f64> = None;
    let mut vars: Vec<VariableClass> = Vec::new();
    let mut chks: Vec<CheckClass> = Vec::new();

    for (ln, content) in lines {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "edge_types" => {
                if tokens.len() != 2 {
                    return Err(Error::parse(ln, "expected 'edge_types <n>'"));
                }
                let n: usize = tokens[1]
                    .parse()
                    .map_err(|_| Error::parse(ln, "bad edge_types"))?;
                if n == 0 {
                    return Err(Error::parse(ln, "edge_types must be positive"));
                }
                edge_types = Some(n);
            }
            "rate" => {
                if tokens.len() != 2 {
                    return Err(Error::parse(ln, "expected 'rate <r>'"));
                }
                rate = Some(parse_f64(ln, "rate", tokens[1])?);
            }
            "var" | "chk" => {
                let me = edge_types
                    .ok_or_else(|| Error::parse(ln, "class line before 'edge_types'"))?;
                let kv = key_values(ln, &tokens[1..])?;
                let d = parse_degrees(ln, lookup(ln, &kv, "d")?)?;
                if d.len() != me {
                    return Err(Error::parse(
                        ln,
                        format!("d has {} entries, edge_types is {me}", d.len()),
                    ));
                }
                if d.iter().all(|&v| v == 0) {
                    return Err(Error::parse(ln, "class has total degree 0"));
                }
                let d = EdgeVector::new(d);
                if tokens[0] == "var" {
                    let b = parse_channel(ln, lookup(ln, &kv, "b")?)?;
                    let c = parse_f64(ln, "coefficient", lookup(ln, &kv, "L")?)?;
                    if c < 0.0 {
                        return Err(Error::parse(ln, "negative coefficient"));
                    }
                    if vars.iter().any(|v| v.channel == b && v.degrees == d) {
                        return Err(Error::parse(ln, format!("duplicate variable class {b} {d}")));
                    }
                    vars.push(VariableClass::new(b, d, c));
                } else {
                    let c = parse_f64(ln, "coefficient", lookup(ln, &kv, "R")?)?;
                    if c < 0.0 {
                        return Err(Error::parse(ln, "negative coefficient"));
                    }
                    if chks.iter().any(|k| k.degrees == d) {
                        return Err(Error::parse(ln, format!("duplicate check class {d}")));
                    }
                    chks.push(CheckClass::new(d, c));
                }
            }
            other => return Err(Error::parse(ln, format!("unknown directive '{other}'"))),
        }
    }

    let me = edge_types.ok_or_else(|| Error::parse(first, "missing 'edge_types'"))?;
    let rate = rate.ok_or_else(|| Error::parse(first, "missing 'rate'"))?;
    Ensemble::new(me, vars, chks, rate).map_err(|e| Error::parse(0, e.to_string()))
}

/// Serializes with shortest round-trip float formatting; zero-coefficient
/// classes are dropped.
pub fn serialize_ensemble(ens: &Ensemble) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "edge_types {}", ens.edge_types());
    let _ = writeln!(out, "rate {}", ens.design_rate());
    let join = |d: &EdgeVector| {
        d.as_slice()
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    for v in ens.var_classes().iter().filter(|v| v.coeff != 0.0) {
        let b = match v.channel {
            ChannelAssignment::Punctured => "punctured",
            ChannelAssignment::Transmitted => "channel",
        };
        let _ = writeln!(out, "var b={b} d={} L={}", join(&v.degrees), v.coeff);
    }
    for c in ens.chk_classes().iter().filter(|c| c.coeff != 0.0) {
        let _ = writeln!(out, "chk d={} R={}", join(&c.degrees), c.coeff);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIG1: &str = "\
met-ensemble v1
# rate-1/2 DVB example
edge_types 2
rate 0.5
var b=channel d=3,0 L=0.3
var b=channel d=8,0 L=0.2
var b=channel d=0,2 L=0.5
chk d=5,2 R=0.5
";

    #[test]
    fn parses_fig1() {
        let e = parse_ensemble(FIG1).unwrap();
        assert_eq!(e.var_classes().len(), 3);
        assert_eq!(e.chk_classes().len(), 1);
        assert_eq!(e.edge_types(), 2);
        assert!(e.validate(1e-9).is_ok());
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(parse_ensemble(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_ensemble("# only\n\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = FIG1.replace("d=8,0 L=0.2", "d=8,0,1 L=0.2");
        match parse_ensemble(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        let dup = format!("{FIG1}chk d=5,2 R=0.1\n");
        match parse_ensemble(&dup) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 9);
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let garbage = FIG1.replace("L=0.5", "L=abc");
        assert!(matches!(
            parse_ensemble(&garbage),
            Err(Error::Parse { line: 7, .. })
        ));
    }

    #[test]
    fn zero_coefficients_dropped() {
        let e = Ensemble::new(
            1,
            vec![
                VariableClass::transmitted([3], 1.0),
                VariableClass::transmitted([4], 0.0),
            ],
            vec![CheckClass::new([6], 0.5)],
            0.5,
        )
        .unwrap();
        let back = parse_ensemble(&serialize_ensemble(&e)).unwrap();
        assert_eq!(back.var_classes().len(), 1);
    }

    fn arb_ensemble() -> impl Strategy<Value = Ensemble> {
        (1usize..5).prop_flat_map(|me| {
            let var = (
                any::<bool>(),
                proptest::collection::vec(0u32..30, me),
                1e-9f64..2.0,
            );
            let chk = (proptest::collection::vec(0u32..30, me), 1e-9f64..2.0);
            (
                Just(me),
                proptest::collection::vec(var, 1..6),
                proptest::collection::vec(chk, 0..6),
                -1.0f64..1.0,
            )
                .prop_filter_map("unique non-empty classes", |(me, vs, cs, rate)| {
                    let vars = vs
                        .into_iter()
                        .map(|(p, mut d, c)| {
                            d[0] += 1;
                            let b = if p {
                                ChannelAssignment::Punctured
                            } else {
                                ChannelAssignment::Transmitted
                            };
                            VariableClass::new(b, d, c)
                        })
                        .collect();
                    let chks = cs
                        .into_iter()
                        .map(|(mut d, c)| {
                            d[0] += 1;
                            CheckClass::new(d, c)
                        })
                        .collect();
                    Ensemble::new(me, vars, chks, rate).ok()
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(e in arb_ensemble()) {
            let text = serialize_ensemble(&e);
            let back = parse_ensemble(&text).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
