use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use serde_json::Value as Json;

use super::error::EvalError;

/// One array item.
#[derive(Debug, Clone)]
pub enum Scalar {
    Int(i64),
    Real(f64),
    Char(char),
    /// An enclosed simple array (one level of nesting only).
    Boxed(Arc<AplValue>),
}

impl Scalar {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Scalar::Int(_) | Scalar::Real(_))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// Integer value of an integral number.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Scalar::Int(i) => Some(*i),
            Scalar::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.as_int() {
            Some(0) => Some(false),
            Some(1) => Some(true),
            _ => None,
        }
    }

    fn kind(&self) -> ValueKind {
        match self {
            Scalar::Int(_) | Scalar::Real(_) => ValueKind::Numeric,
            Scalar::Char(_) => ValueKind::Character,
            Scalar::Boxed(_) => ValueKind::Nested,
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Scalar::Int(i) => Json::from(*i),
            Scalar::Real(r) => serde_json::Number::from_f64(*r).map_or(Json::Null, Json::Number),
            Scalar::Char(c) => Json::String(c.to_string()),
            Scalar::Boxed(v) => v.to_json(),
        }
    }
}

/// Exact equality; integers and reals compare by numeric value.
impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Char(a), Scalar::Char(b)) => a == b,
            (Scalar::Boxed(a), Scalar::Boxed(b)) => a == b,
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => {
                    if let (Scalar::Int(i), Scalar::Int(j)) = (a, b) {
                        i == j
                    } else {
                        x == y
                    }
                }
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Numeric,
    Character,
    Nested,
}

/// A rectangular array: shape plus row-major elements.
///
/// Simple arrays are all-numeric or all-character; mixing the two is
/// rejected. Nested arrays hold boxes of simple arrays, possibly alongside
/// simple scalars. Empty arrays remember their prototype kind.
#[derive(Debug, Clone)]
pub struct AplValue {
    shape: Vec<usize>,
    elements: Vec<Scalar>,
    kind: ValueKind,
}

impl PartialEq for AplValue {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.elements == other.elements
    }
}

impl AplValue {
    pub fn new(shape: Vec<usize>, elements: Vec<Scalar>) -> Result<Self, EvalError> {
        Self::with_prototype(shape, elements, ValueKind::Numeric)
    }

    /// Like [`AplValue::new`]; `prototype` is the kind used when empty.
    pub fn with_prototype(
        shape: Vec<usize>,
        elements: Vec<Scalar>,
        prototype: ValueKind,
    ) -> Result<Self, EvalError> {
        let n: usize = shape.iter().product();
        if n != elements.len() {
            return Err(EvalError::Internal(format!(
                "shape {shape:?} needs {n} elements, got {}",
                elements.len()
            )));
        }
        let mut kind = if elements.is_empty() { prototype } else { elements[0].kind() };
        let mut saw_num = false;
        let mut saw_char = false;
        for e in &elements {
            match e {
                Scalar::Int(_) | Scalar::Real(_) => saw_num = true,
                Scalar::Char(_) => saw_char = true,
                Scalar::Boxed(inner) => {
                    if inner.kind == ValueKind::Nested {
                        return Err(EvalError::Unsupported("nesting deeper than one level".into()));
                    }
                    kind = ValueKind::Nested;
                }
            }
        }
        if kind != ValueKind::Nested && saw_num && saw_char {
            return Err(EvalError::Unsupported("mixed numeric and character array".into()));
        }
        Ok(Self {
            shape,
            elements,
            kind,
        })
    }

    pub fn scalar(s: Scalar) -> Self {
        let kind = s.kind();
        Self {
            shape: Vec::new(),
            elements: vec![s],
            kind,
        }
    }

    pub fn int(i: i64) -> Self {
        Self::scalar(Scalar::Int(i))
    }

    pub fn real(r: f64) -> Self {
        Self::scalar(Scalar::Real(r))
    }

    pub fn chr(c: char) -> Self {
        Self::scalar(Scalar::Char(c))
    }

    pub fn int_vector(items: impl IntoIterator<Item = i64>) -> Self {
        let elements: Vec<Scalar> = items.into_iter().map(Scalar::Int).collect();
        Self {
            shape: vec![elements.len()],
            elements,
            kind: ValueKind::Numeric,
        }
    }

    pub fn char_vector(text: &str) -> Self {
        let elements: Vec<Scalar> = text.chars().map(Scalar::Char).collect();
        Self {
            shape: vec![elements.len()],
            elements,
            kind: ValueKind::Character,
        }
    }

    pub fn empty_numeric() -> Self {
        Self::int_vector([])
    }

    /// Reshapes an integer list to `shape` (product must match).
    pub fn int_array(shape: Vec<usize>, items: impl IntoIterator<Item = i64>) -> Result<Self, EvalError> {
        Self::new(shape, items.into_iter().map(Scalar::Int).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn elements(&self) -> &[Scalar] {
        &self.elements
    }

    pub fn into_elements(self) -> Vec<Scalar> {
        self.elements
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn is_simple(&self) -> bool {
        self.kind != ValueKind::Nested
    }

    /// The fill element for this array's prototype.
    pub fn fill(&self) -> Scalar {
        match self.elements.first() {
            Some(Scalar::Char(_)) => Scalar::Char(' '),
            Some(Scalar::Boxed(b)) => Scalar::Boxed(Arc::new(b.as_prototype())),
            Some(_) => Scalar::Int(0),
            None if self.kind == ValueKind::Character => Scalar::Char(' '),
            None => Scalar::Int(0),
        }
    }

    fn as_prototype(&self) -> AplValue {
        let fill = self.fill();
        AplValue {
            shape: self.shape.clone(),
            elements: vec![fill; self.elements.len()],
            kind: self.kind,
        }
    }

    /// Removes one level of boxing from a scalar; other values are returned as is.
    pub fn disclose_scalar(self) -> AplValue {
        if self.is_scalar() {
            if let Scalar::Boxed(inner) = &self.elements[0] {
                return (**inner).clone();
            }
        }
        self
    }

    /// Canonical output JSON: scalars bare, rank-1 flat lists, higher ranks
    /// nested row-major, characters as one-character strings.
    pub fn to_json(&self) -> Json {
        if self.is_scalar() {
            return self.elements[0].to_json();
        }
        fn build(shape: &[usize], items: &[Scalar]) -> Json {
            match shape {
                [] => items[0].to_json(),
                [_] => Json::Array(items.iter().map(Scalar::to_json).collect()),
                [n, rest @ ..] => {
                    let stride: usize = rest.iter().product();
                    Json::Array(
                        (0..*n)
                            .map(|i| build(rest, &items[i * stride..(i + 1) * stride]))
                            .collect(),
                    )
                }
            }
        }
        build(&self.shape, &self.elements)
    }
}

impl From<Scalar> for AplValue {
    fn from(s: Scalar) -> Self {
        AplValue::scalar(s)
    }
}

impl fmt::Display for AplValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants() {
        let m = AplValue::int_array(vec![2, 3], 1..=6).unwrap();
        assert_eq!(m.rank(), 2);
        assert_eq!(m.len(), 6);
        assert!(AplValue::int_array(vec![2, 2], 1..=3).is_err());
        assert!(AplValue::int(3).is_scalar());
        assert_eq!(AplValue::empty_numeric().shape(), &[0]);
    }

    #[test]
    fn mixed_arrays_rejected() {
        let r = AplValue::new(vec![2], vec![Scalar::Int(1), Scalar::Char('a')]);
        assert!(matches!(r, Err(EvalError::Unsupported(_))));
        let inner = Arc::new(AplValue::int_vector([1, 2]));
        let nested = AplValue::new(vec![2], vec![Scalar::Boxed(inner.clone()), Scalar::Int(3)]).unwrap();
        assert_eq!(nested.kind(), ValueKind::Nested);
        let deep = AplValue::new(vec![1], vec![Scalar::Boxed(Arc::new(nested))]);
        assert!(matches!(deep, Err(EvalError::Unsupported(_))));
    }

    #[test]
    fn canonical_json() {
        let m = AplValue::int_array(vec![2, 2], [1, 2, 3, 4]).unwrap();
        assert_eq!(m.to_json(), serde_json::json!([[1, 2], [3, 4]]));
        assert_eq!(AplValue::int(210).to_json(), serde_json::json!(210));
        assert_eq!(AplValue::char_vector("ACE").to_json(), serde_json::json!(["A", "C", "E"]));
        assert_eq!(AplValue::empty_numeric().to_json(), serde_json::json!([]));
        assert_eq!(AplValue::real(4.25).to_json(), serde_json::json!(4.25));
    }

    #[test]
    fn numeric_equality_crosses_int_and_real() {
        assert_eq!(Scalar::Int(2), Scalar::Real(2.0));
        assert_ne!(Scalar::Int(2), Scalar::Char('2'));
    }
}
