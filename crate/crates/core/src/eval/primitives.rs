//! Primitive functions of the supported subset. Index origin is 1.

use std::sync::Arc;

use super::error::{EvalError, Operands};
use super::value::{AplValue, Scalar, ValueKind};

pub(crate) const SCALAR_DYADIC: &str = "+-×÷⌈⌊=≠<≤≥>∨∧";

fn operands(left: Option<&AplValue>, right: &AplValue) -> Operands {
    Operands {
        left: left.map(|l| l.shape().to_vec()),
        right: right.shape().to_vec(),
    }
}

fn domain(prim: char, left: Option<&AplValue>, right: &AplValue, detail: &str) -> EvalError {
    EvalError::Domain {
        primitive: prim.to_string(),
        operands: operands(left, right),
        detail: Some(detail.to_string()),
    }
}

fn scalar_domain(prim: char, detail: &str) -> EvalError {
    EvalError::Domain {
        primitive: prim.to_string(),
        operands: Operands {
            left: Some(Vec::new()),
            right: Vec::new(),
        },
        detail: Some(detail.to_string()),
    }
}

fn num(x: f64) -> Scalar {
    Scalar::Real(x)
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Applies a scalar dyadic primitive to two simple scalars.
pub(crate) fn scalar_dyadic(prim: char, a: &Scalar, b: &Scalar) -> Result<Scalar, EvalError> {
    match prim {
        '=' => return Ok(Scalar::Int((a == b) as i64)),
        '≠' => return Ok(Scalar::Int((a != b) as i64)),
        _ => {}
    }
    let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
        return Err(scalar_domain(prim, "non-numeric argument"));
    };
    let ints = match (a, b) {
        (Scalar::Int(i), Scalar::Int(j)) => Some((*i, *j)),
        _ => None,
    };
    Ok(match prim {
        '+' => match ints.and_then(|(i, j)| i.checked_add(j)) {
            Some(k) => Scalar::Int(k),
            None => num(x + y),
        },
        '-' => match ints.and_then(|(i, j)| i.checked_sub(j)) {
            Some(k) => Scalar::Int(k),
            None => num(x - y),
        },
        '×' => match ints.and_then(|(i, j)| i.checked_mul(j)) {
            Some(k) => Scalar::Int(k),
            None => num(x * y),
        },
        '÷' => {
            if y == 0.0 {
                if x == 0.0 {
                    Scalar::Int(1)
                } else {
                    return Err(scalar_domain(prim, "division by zero"));
                }
            } else {
                num(x / y)
            }
        }
        '<' => Scalar::Int((x < y) as i64),
        '≤' => Scalar::Int((x <= y) as i64),
        '≥' => Scalar::Int((x >= y) as i64),
        '>' => Scalar::Int((x > y) as i64),
        '⌈' => {
            if x >= y {
                a.clone()
            } else {
                b.clone()
            }
        }
        '⌊' => {
            if x <= y {
                a.clone()
            } else {
                b.clone()
            }
        }
        '∨' | '∧' => {
            let (Some(i), Some(j)) = (a.as_int(), b.as_int()) else {
                return Err(scalar_domain(prim, "non-integer argument"));
            };
            if prim == '∨' {
                Scalar::Int(gcd(i, j))
            } else if i == 0 || j == 0 {
                Scalar::Int(0)
            } else {
                let g = gcd(i, j);
                match (i / g).checked_mul(j) {
                    Some(l) => Scalar::Int(l.abs() * (i.signum() * j.signum())),
                    None => return Err(scalar_domain(prim, "overflow")),
                }
            }
        }
        _ => return Err(EvalError::Internal(format!("{prim} is not a scalar dyadic"))),
    })
}

fn scalar_pervade(prim: char, a: &Scalar, b: &Scalar) -> Result<Scalar, EvalError> {
    match (a, b) {
        (Scalar::Boxed(x), Scalar::Boxed(y)) => {
            Ok(boxed(dyadic_scalar_fn(prim, x, y)?))
        }
        (Scalar::Boxed(x), s) => Ok(boxed(dyadic_scalar_fn(prim, x, &AplValue::scalar(s.clone()))?)),
        (s, Scalar::Boxed(y)) => Ok(boxed(dyadic_scalar_fn(prim, &AplValue::scalar(s.clone()), y)?)),
        _ => scalar_dyadic(prim, a, b),
    }
}

fn boxed(v: AplValue) -> Scalar {
    if v.is_scalar() {
        v.into_elements().pop().expect("scalar has one element")
    } else {
        Scalar::Boxed(Arc::new(v))
    }
}

/// Elementwise application with scalar (and singleton) extension.
pub(crate) fn dyadic_scalar_fn(prim: char, left: &AplValue, right: &AplValue) -> Result<AplValue, EvalError> {
    let (shape, pairs): (Vec<usize>, Vec<(&Scalar, &Scalar)>) = if left.shape() == right.shape() {
        (
            left.shape().to_vec(),
            left.elements().iter().zip(right.elements()).collect(),
        )
    } else if left.len() == 1 && (left.is_scalar() || !right.is_scalar()) && left.rank() <= right.rank() {
        let l = &left.elements()[0];
        (right.shape().to_vec(), right.elements().iter().map(|r| (l, r)).collect())
    } else if right.len() == 1 && right.rank() <= left.rank() {
        let r = &right.elements()[0];
        (left.shape().to_vec(), left.elements().iter().map(|l| (l, r)).collect())
    } else if left.rank() != right.rank() {
        return Err(EvalError::Rank {
            primitive: prim.to_string(),
            operands: operands(Some(left), right),
        });
    } else {
        return Err(EvalError::Length {
            primitive: prim.to_string(),
            operands: operands(Some(left), right),
        });
    };
    let elements = pairs
        .into_iter()
        .map(|(a, b)| {
            scalar_pervade(prim, a, b).map_err(|e| match e {
                EvalError::Domain { detail, .. } => EvalError::Domain {
                    primitive: prim.to_string(),
                    operands: operands(Some(left), right),
                    detail,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    AplValue::new(shape, elements)
}

/// Monadic scalar functions: + (identity) - × ÷ ⌈ ⌊.
pub(crate) fn monadic_scalar_fn(prim: char, right: &AplValue) -> Result<AplValue, EvalError> {
    let f = |s: &Scalar| -> Result<Scalar, EvalError> {
        if let Scalar::Boxed(inner) = s {
            return Ok(boxed(monadic_scalar_fn(prim, inner)?));
        }
        if prim == '+' && s.is_numeric() {
            return Ok(s.clone());
        }
        let x = s.as_f64().ok_or_else(|| domain(prim, None, right, "non-numeric argument"))?;
        Ok(match prim {
            '-' => match s {
                Scalar::Int(i) => i.checked_neg().map_or(num(-x), Scalar::Int),
                _ => num(-x),
            },
            '×' => Scalar::Int(if x > 0.0 { 1 } else if x < 0.0 { -1 } else { 0 }),
            '÷' => {
                if x == 0.0 {
                    return Err(domain(prim, None, right, "division by zero"));
                }
                num(1.0 / x)
            }
            '⌈' | '⌊' => {
                let v = if prim == '⌈' { x.ceil() } else { x.floor() };
                match s {
                    Scalar::Int(_) => s.clone(),
                    _ if v.abs() < 9.0e15 => Scalar::Int(v as i64),
                    _ => num(v),
                }
            }
            _ => return Err(EvalError::Internal(format!("{prim} is not a monadic scalar function"))),
        })
    };
    let elements = right.elements().iter().map(f).collect::<Result<Vec<_>, _>>()?;
    AplValue::with_prototype(right.shape().to_vec(), elements, right.kind())
}

/// Non-negative integer from a singleton numeric array.
fn singleton_index(prim: char, left: Option<&AplValue>, v: &AplValue) -> Result<i64, EvalError> {
    if v.len() != 1 || v.rank() > 1 {
        return Err(if v.rank() > 1 {
            EvalError::Rank {
                primitive: prim.to_string(),
                operands: operands(left, v),
            }
        } else {
            EvalError::Length {
                primitive: prim.to_string(),
                operands: operands(left, v),
            }
        });
    }
    v.elements()[0]
        .as_int()
        .ok_or_else(|| domain(prim, left, v, "expected an integer"))
}

pub(crate) fn iota(right: &AplValue) -> Result<AplValue, EvalError> {
    if right.rank() == 1 && right.len() != 1 {
        return Err(EvalError::Unsupported("⍳ with a vector argument".into()));
    }
    let n = singleton_index('⍳', None, right)?;
    if n < 0 {
        return Err(domain('⍳', None, right, "negative argument"));
    }
    Ok(AplValue::int_vector(1..=n))
}

pub(crate) fn shape_of(right: &AplValue) -> AplValue {
    AplValue::int_vector(right.shape().iter().map(|&d| d as i64))
}

pub(crate) fn tally(right: &AplValue) -> AplValue {
    AplValue::int(right.shape().first().map_or(1, |&d| d as i64))
}

pub(crate) fn reshape(left: &AplValue, right: &AplValue) -> Result<AplValue, EvalError> {
    if left.rank() > 1 {
        return Err(EvalError::Rank {
            primitive: "⍴".into(),
            operands: operands(Some(left), right),
        });
    }
    let shape = left
        .elements()
        .iter()
        .map(|s| match s.as_int() {
            Some(d) if d >= 0 => Ok(d as usize),
            _ => Err(domain('⍴', Some(left), right, "shape must be non-negative integers")),
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let n: usize = shape.iter().product();
    let elements: Vec<Scalar> = if right.is_empty() {
        vec![right.fill(); n]
    } else {
        right.elements().iter().cycle().take(n).cloned().collect()
    };
    AplValue::with_prototype(shape, elements, right.kind())
}

/// Reverses the axes.
pub(crate) fn transpose(right: &AplValue) -> Result<AplValue, EvalError> {
    let shape = right.shape();
    let rank = shape.len();
    if rank < 2 {
        return Ok(right.clone());
    }
    let new_shape: Vec<usize> = shape.iter().rev().copied().collect();
    let mut strides = vec![1usize; rank];
    for k in (0..rank - 1).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let n = right.len();
    let mut elements = Vec::with_capacity(n);
    let mut index = vec![0usize; rank];
    for _ in 0..n {
        // index is over new_shape; source index is index reversed
        let src: usize = index.iter().rev().zip(&strides).map(|(i, s)| i * s).sum();
        elements.push(right.elements()[src].clone());
        for k in (0..rank).rev() {
            index[k] += 1;
            if index[k] < new_shape[k] {
                break;
            }
            index[k] = 0;
        }
    }
    AplValue::with_prototype(new_shape, elements, right.kind())
}

/// `y ∊ x`: boolean array shaped like `y`.
pub(crate) fn member(left: &AplValue, right: &AplValue) -> Result<AplValue, EvalError> {
    let elements = left
        .elements()
        .iter()
        .map(|e| Scalar::Int(right.elements().contains(e) as i64))
        .collect();
    AplValue::new(left.shape().to_vec(), elements)
}

/// Monadic `,`: the elements as a vector, boxes kept.
pub(crate) fn ravel(right: &AplValue) -> Result<AplValue, EvalError> {
    AplValue::with_prototype(vec![right.len()], right.elements().to_vec(), right.kind())
}

/// Dyadic `,` along the last axis, for arguments of rank at most 2. A
/// scalar is extended to a column; a vector joins a matrix as one column.
pub(crate) fn catenate(left: &AplValue, right: &AplValue) -> Result<AplValue, EvalError> {
    let rank = left.rank().max(right.rank());
    if rank > 2 {
        return Err(EvalError::Unsupported("catenate above rank 2".into()));
    }
    let prototype = if left.is_empty() { right.kind() } else { left.kind() };
    if rank <= 1 {
        let elements: Vec<Scalar> = left.elements().iter().chain(right.elements()).cloned().collect();
        return AplValue::with_prototype(vec![elements.len()], elements, prototype);
    }
    let rows = if left.rank() == 2 { left.shape()[0] } else { right.shape()[0] };
    // columns contributed by each side, plus a per-row element accessor
    let side = |v: &AplValue| -> Result<(usize, Vec<Vec<Scalar>>), EvalError> {
        match v.rank() {
            0 => Ok((1, vec![vec![v.elements()[0].clone()]; rows])),
            1 if v.len() == rows => Ok((1, v.elements().iter().map(|e| vec![e.clone()]).collect())),
            2 if v.shape()[0] == rows => {
                let cols = v.shape()[1];
                Ok((cols, v.elements().chunks(cols.max(1)).map(<[Scalar]>::to_vec).take(rows).collect::<Vec<_>>()))
            }
            _ => Err(EvalError::Length {
                primitive: ",".into(),
                operands: operands(Some(left), right),
            }),
        }
    };
    let (lc, lrows) = side(left)?;
    let (rc, rrows) = side(right)?;
    let mut elements = Vec::with_capacity(rows * (lc + rc));
    for r in 0..rows {
        if lc > 0 {
            elements.extend(lrows[r].iter().cloned());
        }
        if rc > 0 {
            elements.extend(rrows[r].iter().cloned());
        }
    }
    AplValue::with_prototype(vec![rows, lc + rc], elements, prototype)
}

/// Monadic ∊: ravel, with boxes opened one level.
pub(crate) fn enlist(right: &AplValue) -> Result<AplValue, EvalError> {
    let mut out = Vec::new();
    for e in right.elements() {
        match e {
            Scalar::Boxed(inner) => out.extend(inner.elements().iter().cloned()),
            s => out.push(s.clone()),
        }
    }
    let kind = if right.kind() == ValueKind::Nested {
        ValueKind::Numeric
    } else {
        right.kind()
    };
    AplValue::with_prototype(vec![out.len()], out, kind)
}

pub(crate) fn enclose(right: &AplValue) -> Result<AplValue, EvalError> {
    if right.is_scalar() && right.is_simple() {
        return Ok(right.clone());
    }
    if !right.is_simple() {
        return Err(EvalError::Unsupported("enclosing a nested array".into()));
    }
    AplValue::new(Vec::new(), vec![Scalar::Boxed(Arc::new(right.clone()))])
}

/// Monadic ⊃: first item, disclosed.
pub(crate) fn first(right: &AplValue) -> AplValue {
    match right.elements().first() {
        Some(Scalar::Boxed(inner)) => (**inner).clone(),
        Some(s) => AplValue::scalar(s.clone()),
        None => AplValue::scalar(right.fill()),
    }
}

/// Dyadic ⊃ with a scalar left argument: 1-origin pick from a vector.
pub(crate) fn pick(left: &AplValue, right: &AplValue) -> Result<AplValue, EvalError> {
    if left.len() != 1 {
        return Err(EvalError::Unsupported("⊃ with a multi-element left argument".into()));
    }
    let right_val = right.clone().disclose_scalar();
    if right_val.rank() != 1 {
        return Err(EvalError::Rank {
            primitive: "⊃".into(),
            operands: operands(Some(left), &right_val),
        });
    }
    let i = singleton_index('⊃', Some(left), left)?;
    if i < 1 || i as usize > right_val.len() {
        return Err(EvalError::Index {
            primitive: "⊃".into(),
            operands: operands(Some(left), &right_val),
        });
    }
    Ok(match &right_val.elements()[(i - 1) as usize] {
        Scalar::Boxed(inner) => (**inner).clone(),
        s => AplValue::scalar(s.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Axis {
    Last,
    First,
}

impl Axis {
    pub fn index(self, rank: usize) -> usize {
        match self {
            Axis::Last => rank - 1,
            Axis::First => 0,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Axis::Last => '/',
            Axis::First => '⌿',
        }
    }
}

/// Splits `v` along `axis` into (outer, len, inner) strides.
pub(crate) fn axis_layout(v: &AplValue, axis: usize) -> (usize, usize, usize) {
    let shape = v.shape();
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// `mask / v` (replicate) along an axis; a singleton mask extends.
pub(crate) fn replicate(left: &AplValue, right: &AplValue, axis: Axis) -> Result<AplValue, EvalError> {
    let glyph = axis.glyph();
    if left.rank() > 1 {
        return Err(EvalError::Rank {
            primitive: glyph.to_string(),
            operands: operands(Some(left), right),
        });
    }
    let right = if right.is_scalar() {
        reshape(&AplValue::int(1), right)?
    } else {
        right.clone()
    };
    let ax = axis.index(right.rank());
    let (outer, len, inner) = axis_layout(&right, ax);
    let counts: Vec<usize> = left
        .elements()
        .iter()
        .map(|s| match s.as_int() {
            Some(c) if c >= 0 => Ok(c as usize),
            _ => Err(domain(glyph, Some(left), &right, "counts must be non-negative integers")),
        })
        .collect::<Result<_, _>>()?;
    let counts = if counts.len() == 1 {
        vec![counts[0]; len]
    } else if counts.len() == len {
        counts
    } else {
        return Err(EvalError::Length {
            primitive: glyph.to_string(),
            operands: operands(Some(left), &right),
        });
    };
    let new_len: usize = counts.iter().sum();
    let mut elements = Vec::with_capacity(outer * new_len * inner);
    for o in 0..outer {
        for (k, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                let base = (o * len + k) * inner;
                elements.extend_from_slice(&right.elements()[base..base + inner]);
            }
        }
    }
    let mut shape = right.shape().to_vec();
    shape[ax] = new_len;
    AplValue::with_prototype(shape, elements, right.kind())
}

/// Identity element for reducing an empty axis.
pub(crate) fn reduction_identity(prim: char) -> Option<Scalar> {
    match prim {
        '+' | '-' | '∨' | '≠' | '<' | '>' => Some(Scalar::Int(0)),
        '×' | '÷' | '∧' | '=' | '≤' | '≥' => Some(Scalar::Int(1)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[i64]) -> AplValue {
        AplValue::int_vector(xs.iter().copied())
    }

    #[test]
    fn scalar_extension() {
        let r = dyadic_scalar_fn('+', &AplValue::int(1), &v(&[1, 2, 3])).unwrap();
        assert_eq!(r, v(&[2, 3, 4]));
        let r = dyadic_scalar_fn('×', &v(&[1, 2, 3]), &v(&[4])).unwrap();
        assert_eq!(r, v(&[4, 8, 12]));
        assert!(matches!(
            dyadic_scalar_fn('+', &v(&[1, 2]), &v(&[1, 2, 3])),
            Err(EvalError::Length { .. })
        ));
        let m = AplValue::int_array(vec![2, 2], [1, 2, 3, 4]).unwrap();
        assert!(matches!(
            dyadic_scalar_fn('+', &v(&[1, 2]), &m),
            Err(EvalError::Rank { .. })
        ));
    }

    #[test]
    fn catenation() {
        assert_eq!(catenate(&v(&[1, 2]), &v(&[3])).unwrap(), v(&[1, 2, 3]));
        assert_eq!(catenate(&AplValue::empty_numeric(), &AplValue::int(4)).unwrap(), v(&[4]));
        let m = AplValue::int_array(vec![2, 2], [1, 2, 3, 4]).unwrap();
        let r = catenate(&m, &AplValue::int(0)).unwrap();
        assert_eq!(r, AplValue::int_array(vec![2, 3], [1, 2, 0, 3, 4, 0]).unwrap());
        let r = catenate(&v(&[9, 8]), &m).unwrap();
        assert_eq!(r, AplValue::int_array(vec![2, 3], [9, 1, 2, 8, 3, 4]).unwrap());
        assert!(matches!(catenate(&v(&[1, 2, 3]), &m), Err(EvalError::Length { .. })));
        assert_eq!(ravel(&m).unwrap(), v(&[1, 2, 3, 4]));
    }

    #[test]
    fn division() {
        let r = dyadic_scalar_fn('÷', &AplValue::int(17), &AplValue::int(4)).unwrap();
        assert_eq!(r, AplValue::real(4.25));
        assert_eq!(
            dyadic_scalar_fn('÷', &AplValue::int(0), &AplValue::int(0)).unwrap(),
            AplValue::int(1)
        );
        assert!(matches!(
            dyadic_scalar_fn('÷', &AplValue::int(1), &AplValue::int(0)),
            Err(EvalError::Domain { .. })
        ));
    }

    #[test]
    fn overflow_promotes_to_real() {
        let r = dyadic_scalar_fn('×', &AplValue::int(i64::MAX), &AplValue::int(2)).unwrap();
        assert!(matches!(r.elements()[0], Scalar::Real(_)));
    }

    #[test]
    fn or_and_on_booleans_and_integers() {
        assert_eq!(dyadic_scalar_fn('∨', &v(&[0, 0, 1, 1]), &v(&[0, 1, 0, 1])).unwrap(), v(&[0, 1, 1, 1]));
        assert_eq!(dyadic_scalar_fn('∧', &v(&[0, 0, 1, 1]), &v(&[0, 1, 0, 1])).unwrap(), v(&[0, 0, 0, 1]));
        assert_eq!(dyadic_scalar_fn('∨', &AplValue::int(4), &AplValue::int(6)).unwrap(), AplValue::int(2));
        assert_eq!(dyadic_scalar_fn('∧', &AplValue::int(4), &AplValue::int(6)).unwrap(), AplValue::int(12));
    }

    #[test]
    fn characters_only_compare() {
        let a = AplValue::char_vector("ab");
        assert_eq!(dyadic_scalar_fn('=', &a, &AplValue::chr('b')).unwrap(), v(&[0, 1]));
        assert!(matches!(dyadic_scalar_fn('+', &a, &AplValue::int(1)), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn transpose_matrix() {
        let m = reshape(&v(&[2, 3]), &v(&[1, 2, 3, 4, 5, 6])).unwrap();
        let t = transpose(&m).unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t, AplValue::int_array(vec![3, 2], [1, 4, 2, 5, 3, 6]).unwrap());
        let cube = reshape(&v(&[2, 3, 4]), &iota(&AplValue::int(24)).unwrap()).unwrap();
        assert_eq!(transpose(&cube).unwrap().shape(), &[4, 3, 2]);
        assert_eq!(transpose(&transpose(&cube).unwrap()).unwrap(), cube);
    }

    #[test]
    fn reshape_cycles_and_fills() {
        assert_eq!(reshape(&v(&[5]), &v(&[1, 2])).unwrap(), v(&[1, 2, 1, 2, 1]));
        assert_eq!(reshape(&v(&[3]), &v(&[])).unwrap(), v(&[0, 0, 0]));
        assert!(matches!(reshape(&v(&[-1]), &v(&[1])), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn iota_cases() {
        assert_eq!(iota(&AplValue::int(0)).unwrap().shape(), &[0]);
        assert_eq!(iota(&AplValue::int(3)).unwrap(), v(&[1, 2, 3]));
        assert!(matches!(iota(&AplValue::int(-1)), Err(EvalError::Domain { .. })));
        assert!(iota(&v(&[2, 3])).unwrap_err().is_unsupported());
    }

    #[test]
    fn membership_shape() {
        let m = AplValue::int_array(vec![2, 2], [3, 4, 1, 2]).unwrap();
        let r = member(&m, &v(&[1, 2, 3])).unwrap();
        assert_eq!(r, AplValue::int_array(vec![2, 2], [1, 0, 1, 1]).unwrap());
    }

    #[test]
    fn replicate_compress() {
        assert_eq!(replicate(&v(&[1, 0, 2]), &v(&[7, 8, 9]), Axis::Last).unwrap(), v(&[7, 9, 9]));
        let m = AplValue::int_array(vec![2, 2], [1, 2, 3, 4]).unwrap();
        let r = replicate(&v(&[0, 1]), &m, Axis::First).unwrap();
        assert_eq!(r, AplValue::int_array(vec![1, 2], [3, 4]).unwrap());
        assert!(matches!(replicate(&v(&[1, 0]), &v(&[1, 2, 3]), Axis::Last), Err(EvalError::Length { .. })));
    }

    #[test]
    fn pick_is_one_origin() {
        let s = AplValue::char_vector("ABCDE");
        assert_eq!(pick(&AplValue::int(1), &s).unwrap(), AplValue::chr('A'));
        assert!(matches!(pick(&AplValue::int(0), &s), Err(EvalError::Index { .. })));
        assert!(matches!(pick(&AplValue::int(6), &s), Err(EvalError::Index { .. })));
    }
}
