use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

/// Numeric tolerance for output comparison: values match when
/// `|a - b| <= max(abs, rel * |b|)` with `b` the expected value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-6, abs: 1e-9 }
    }
}

/// The first point where actual and expected output disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diff {
    /// Index path such as `[1][0]`; empty at the top level.
    pub path: String,
    pub detail: String,
}

impl fmt::Display for Diff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.detail)
        } else {
            write!(f, "at {}: {}", self.path, self.detail)
        }
    }
}

/// Normalized view of one output value. Booleans are numbers (APL has no
/// separate boolean type) and strings are character vectors.
enum View<'a> {
    Null,
    Number(&'a Json),
    Text(&'a str),
    List(&'a [Json]),
    Object(&'a Json),
}

fn view(v: &Json) -> View<'_> {
    match v {
        Json::Null => View::Null,
        Json::Bool(_) | Json::Number(_) => View::Number(v),
        Json::String(s) => View::Text(s),
        Json::Array(items) => View::List(items),
        Json::Object(_) => View::Object(v),
    }
}

fn number(v: &Json) -> f64 {
    match v {
        Json::Bool(b) => f64::from(u8::from(*b)),
        Json::Number(n) => n.as_f64().unwrap_or(f64::NAN),
        _ => f64::NAN,
    }
}

fn exact_int(v: &Json) -> Option<i128> {
    match v {
        Json::Bool(b) => Some(i128::from(*b)),
        Json::Number(n) => n.as_i64().map(i128::from).or_else(|| n.as_u64().map(i128::from)),
        _ => None,
    }
}

fn numbers_match(a: &Json, b: &Json, tol: Tolerance) -> bool {
    if let (Some(x), Some(y)) = (exact_int(a), exact_int(b)) {
        if x == y {
            return true;
        }
    }
    let (x, y) = (number(a), number(b));
    (x - y).abs() <= tol.abs.max(tol.rel * y.abs())
}

fn describe(v: &Json) -> String {
    let s = v.to_string();
    if s.chars().count() > 60 {
        format!("{}...", s.chars().take(57).collect::<String>())
    } else {
        s
    }
}

/// Structural comparison of harness output against expected output.
pub fn compare_output(actual: &Json, expected: &Json, tol: Tolerance) -> Result<(), Diff> {
    let mut path = String::new();
    walk(actual, expected, tol, &mut path)
}

fn walk(actual: &Json, expected: &Json, tol: Tolerance, path: &mut String) -> Result<(), Diff> {
    let fail = |path: &str, detail: String| Diff {
        path: path.to_string(),
        detail,
    };
    match (view(actual), view(expected)) {
        (View::Null, View::Null) => Ok(()),
        (View::Number(a), View::Number(b)) => {
            if numbers_match(a, b, tol) {
                Ok(())
            } else {
                Err(fail(path, format!("expected {}, got {}", describe(b), describe(a))))
            }
        }
        (View::Text(a), View::Text(b)) => {
            if a == b {
                Ok(())
            } else {
                Err(fail(path, format!("expected {}, got {}", describe(expected), describe(actual))))
            }
        }
        (View::Text(s), View::List(items)) => text_vs_list(s, items, false, path),
        (View::List(items), View::Text(s)) => text_vs_list(s, items, true, path),
        (View::List(a), View::List(b)) => {
            if a.is_empty() && b.is_empty() {
                return Ok(());
            }
            if a.len() != b.len() {
                return Err(fail(path, format!("expected length {}, got {}", b.len(), a.len())));
            }
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                let mark = path.len();
                path.push_str(&format!("[{i}]"));
                walk(x, y, tol, path)?;
                path.truncate(mark);
            }
            Ok(())
        }
        (View::Object(a), View::Object(b)) if a == b => Ok(()),
        _ => Err(fail(path, format!("expected {}, got {}", describe(expected), describe(actual)))),
    }
}

/// A string equals a list of one-character strings with the same characters.
fn text_vs_list(s: &str, items: &[Json], text_is_expected: bool, path: &str) -> Result<(), Diff> {
    let chars: Vec<char> = s.chars().collect();
    let (exp_len, act_len) = if text_is_expected {
        (chars.len(), items.len())
    } else {
        (items.len(), chars.len())
    };
    if exp_len != act_len {
        return Err(Diff {
            path: path.to_string(),
            detail: format!("expected length {exp_len}, got {act_len}"),
        });
    }
    for (i, (c, item)) in chars.iter().zip(items).enumerate() {
        let ok = matches!(item, Json::String(t) if t.chars().eq(std::iter::once(*c)));
        if !ok {
            let (e, a) = if text_is_expected {
                (Json::String(c.to_string()), item.clone())
            } else {
                (item.clone(), Json::String(c.to_string()))
            };
            return Err(Diff {
                path: format!("{path}[{i}]"),
                detail: format!("expected {}, got {}", describe(&e), describe(&a)),
            });
        }
    }
    Ok(())
}
