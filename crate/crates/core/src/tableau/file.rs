//! Text coefficient files.
//!
//! One scheme per TOML document. Every coefficient is a decimal string so the
//! printed digits survive untouched until parsed to binary64:
//!
//! ```toml
//! name = "BWRRK33"
//! format = "2N"            # or "butcher"
//! stages = 3
//! order = 3
//! A = ["0", "-0.637694471842202", "-1.306647717737108"]
//! B = ["0.457379997569388", "0.925296410920922", "0.393813594675071"]
//! C = ["0", "0.457379997569388", "0.792620002430607"]
//! ```
//!
//! Butcher files carry `a` (row `i` holds the `i - 1` entries left of the
//! diagonal, so the first row is `[]`), `b` and `c` instead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Scheme, Tableau, TableauError, TwoNScheme};

#[derive(Debug, Error)]
pub enum SchemeFileError {
    #[error("malformed coefficient file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("could not serialize scheme: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("field {field}: {value:?} is not a decimal number")]
    Number { field: &'static str, value: String },
    #[error("unknown format {0:?}, expected \"2N\" or \"butcher\"")]
    Format(String),
    #[error("{format} scheme is missing field {field}")]
    MissingField {
        format: &'static str,
        field: &'static str,
    },
    #[error("declared {declared} stages but coefficients have {actual}")]
    StageCount { declared: usize, actual: usize },
    #[error(transparent)]
    Scheme(#[from] TableauError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeRecord {
    name: String,
    format: String,
    stages: usize,
    order: u32,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    big_a: Option<Vec<String>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    big_b: Option<Vec<String>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    big_c: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<String>>,
}

fn parse_number(field: &'static str, s: &str) -> Result<f64, SchemeFileError> {
    let t = s.trim();
    let ok = !t.is_empty()
        && t
            .chars()
            .all(|ch| ch.is_ascii_digit() || matches!(ch, '+' | '-' | '.' | 'e' | 'E'));
    match t.parse::<f64>() {
        Ok(x) if ok && x.is_finite() => Ok(x),
        _ => Err(SchemeFileError::Number {
            field,
            value: s.to_string(),
        }),
    }
}

fn parse_list(field: &'static str, v: &[String]) -> Result<Vec<f64>, SchemeFileError> {
    v.iter().map(|s| parse_number(field, s)).collect()
}

fn format_number(x: f64) -> String {
    // Debug formatting is the shortest string that parses back to the same bits.
    format!("{x:?}")
}

fn format_list(v: &[f64]) -> Vec<String> {
    v.iter().copied().map(format_number).collect()
}

/// Parses one coefficient file.
pub fn parse_scheme(text: &str) -> Result<Scheme, SchemeFileError> {
    let rec: SchemeRecord = toml::from_str(text)?;
    let scheme = match rec.format.as_str() {
        "2N" => {
            let get = |v: Option<Vec<String>>, field| {
                v.ok_or(SchemeFileError::MissingField { format: "2N", field })
            };
            let a = parse_list("A", &get(rec.big_a, "A")?)?;
            let b = parse_list("B", &get(rec.big_b, "B")?)?;
            let c = parse_list("C", &get(rec.big_c, "C")?)?;
            Scheme::TwoN(TwoNScheme::new(rec.name, a, b, c, rec.order)?)
        }
        "butcher" => {
            let missing = |field| SchemeFileError::MissingField {
                format: "butcher",
                field,
            };
            let a = rec
                .a
                .ok_or(missing("a"))?
                .iter()
                .map(|row| parse_list("a", row))
                .collect::<Result<Vec<_>, _>>()?;
            let b = parse_list("b", &rec.b.ok_or(missing("b"))?)?;
            let c = parse_list("c", &rec.c.ok_or(missing("c"))?)?;
            Scheme::Butcher(Tableau::with_nodes(rec.name, a, b, c, rec.order)?)
        }
        other => return Err(SchemeFileError::Format(other.to_string())),
    };
    if scheme.stages() != rec.stages {
        return Err(SchemeFileError::StageCount {
            declared: rec.stages,
            actual: scheme.stages(),
        });
    }
    Ok(scheme)
}

/// Writes a scheme in the coefficient-file format.
pub fn serialize_scheme(scheme: &Scheme) -> Result<String, SchemeFileError> {
    let rec = match scheme {
        Scheme::TwoN(s) => SchemeRecord {
            name: s.name().to_string(),
            format: "2N".into(),
            stages: s.stages(),
            order: s.declared_order(),
            big_a: Some(format_list(s.a())),
            big_b: Some(format_list(s.b())),
            big_c: Some(format_list(s.c())),
            a: None,
            b: None,
            c: None,
        },
        Scheme::Butcher(t) => SchemeRecord {
            name: t.name().to_string(),
            format: "butcher".into(),
            stages: t.stages(),
            order: t.declared_order(),
            big_a: None,
            big_b: None,
            big_c: None,
            a: Some(
                t.a_rows()
                    .iter()
                    .enumerate()
                    .map(|(i, row)| format_list(&row[..i]))
                    .collect(),
            ),
            b: Some(format_list(t.b())),
            c: Some(format_list(t.c())),
        },
    };
    Ok(toml::to_string(&rec)?)
}
