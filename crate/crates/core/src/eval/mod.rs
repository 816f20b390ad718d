//! A 1-origin APL subset interpreter, used as a local oracle for dataset
//! arguments and reference functions.
//!
//! Supported: monadic ⍳ ⍴ ⍉ ∊ ≢ ⊂ ⊃, dyadic ⍴ ∊ ⊃ ⍳, the scalar functions
//! `+ - × ÷ ⌈ ⌊ = ≠ < ≤ ≥ > ∨ ∧`, the operators `/ ⌿ ¨`, dfns, assignment
//! (including modified assignment) and tradfns with `:For`, `:If`,
//! `:While`, `:Leave`, `:Continue` and `:Return`. Anything else fails with
//! [`EvalError::Unsupported`].

mod error;
mod interp;
mod parse;
mod primitives;
mod value;

use std::collections::HashMap;
use std::sync::Arc;

pub use error::{CaseError, EvalError, Operands};
pub use value::{AplValue, Scalar, ValueKind};

use crate::dataset::IoCase;
use crate::header::{parse_definition_line, DefinitionKind};
use interp::{Binding, Frame, Function};

/// Global bindings. The index origin is always 1.
#[derive(Debug, Clone, Default)]
pub struct Env {
    bindings: HashMap<String, Binding>,
}

impl Env {
    pub const INDEX_ORIGIN: i64 = 1;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn index_origin(&self) -> i64 {
        Self::INDEX_ORIGIN
    }

    pub fn set_value(&mut self, name: &str, value: AplValue) {
        self.bindings.insert(name.to_string(), Binding::Value(value));
    }

    pub fn value(&self, name: &str) -> Option<&AplValue> {
        match self.bindings.get(name) {
            Some(Binding::Value(v)) => Some(v),
            _ => None,
        }
    }

    pub fn has_function(&self, name: &str) -> bool {
        matches!(self.bindings.get(name), Some(Binding::Function(_)))
    }

    pub fn function_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .bindings
            .iter()
            .filter(|(_, b)| matches!(b, Binding::Function(_)))
            .map(|(n, _)| n.clone())
            .collect();
        names.sort();
        names
    }

    /// Loads a source file: tradfns (opened by `∇` or by the first code
    /// line), dfn assignments, and top-level statements, which run in
    /// order. Returns the names of the functions defined.
    pub fn define(&mut self, source: &str) -> Result<Vec<String>, EvalError> {
        let lines: Vec<&str> = source.lines().collect();
        let mut defined = Vec::new();
        let mut first_code = true;
        let mut i = 0;
        while i < lines.len() {
            let t = lines[i].trim();
            if t.is_empty() || t.starts_with('⍝') || t == "∇" {
                i += 1;
                continue;
            }
            let opened = t.starts_with('∇');
            let stripped = t.trim_start_matches('∇').trim();
            let def = parse_definition_line(stripped).ok();
            let is_first = std::mem::replace(&mut first_code, false);

            if def.as_ref().is_some_and(|d| d.kind == DefinitionKind::Dfn) {
                let start = i;
                let mut depth = 0i64;
                loop {
                    depth += brace_balance(lines[i]);
                    i += 1;
                    if depth <= 0 || i == lines.len() {
                        break;
                    }
                }
                let text = lines[start..i].join("\n");
                self.run_statements(text.trim().trim_start_matches('∇'))?;
                let name = def.expect("checked").name;
                if self.has_function(&name) {
                    defined.push(name);
                }
                continue;
            }

            if def.as_ref().is_some_and(|d| d.kind == DefinitionKind::Tradfn) && (opened || is_first) {
                let start = i;
                i += 1;
                while i < lines.len() {
                    let l = lines[i].trim();
                    if opened && l.starts_with('∇') {
                        break;
                    }
                    if l.ends_with('∇') {
                        i += 1;
                        break;
                    }
                    i += 1;
                }
                let tradfn = interp::parse_tradfn(&lines[start..i].join("\n"))?;
                let name = tradfn.def.name.clone();
                self.bindings
                    .insert(name.clone(), Binding::Function(Function::Tradfn(Arc::new(tradfn))));
                defined.push(name);
                if opened && lines.get(i).is_some_and(|l| l.trim() == "∇") {
                    i += 1;
                }
                continue;
            }

            self.run_statements(t)?;
            i += 1;
        }
        Ok(defined)
    }

    fn run_statements(&mut self, source: &str) -> Result<Option<AplValue>, EvalError> {
        self.with_root(None, None, |frame| {
            let mut last = None;
            for stmt in parse::parse_program(source)? {
                match stmt {
                    parse::Stmt::Expr(items) => last = interp::exec_statement(&items, frame)?,
                    parse::Stmt::Control(parts) => {
                        return Err(EvalError::Syntax(format!("{} outside a function", parts[0].0)))
                    }
                }
            }
            Ok(last)
        })
    }

    fn with_root<R>(
        &mut self,
        alpha: Option<AplValue>,
        omega: Option<AplValue>,
        f: impl FnOnce(&mut Frame) -> Result<R, EvalError>,
    ) -> Result<R, EvalError> {
        let mut frame = Frame::root(std::mem::take(&mut self.bindings), alpha, omega);
        let result = f(&mut frame);
        self.bindings = frame.vars;
        result
    }

    /// Applies the named function; `left` must be given for dyadic calls.
    pub fn call(&self, name: &str, left: Option<AplValue>, right: AplValue) -> Result<AplValue, EvalError> {
        let Some(Binding::Function(f)) = self.bindings.get(name) else {
            return Err(EvalError::Value(format!("{name} is not a defined function")));
        };
        let f = f.clone();
        let mut scratch = self.clone();
        scratch.with_root(None, None, |frame| interp::apply(&f, left, right, frame))
    }
}

fn brace_balance(line: &str) -> i64 {
    crate::lexer::lex(line)
        .code_tokens()
        .map(|t| i64::from(t.is_glyph('{')) - i64::from(t.is_glyph('}')))
        .sum()
}

/// Evaluates `expr` (statements separated by `⋄` or newlines) and returns
/// the value of the last one. Assignments persist in `env`.
pub fn eval_expr(
    expr: &str,
    env: &mut Env,
    alpha: Option<AplValue>,
    omega: Option<AplValue>,
) -> Result<AplValue, EvalError> {
    let stmts = parse::parse_program(expr)?;
    if stmts.is_empty() {
        return Err(EvalError::Syntax("empty expression".into()));
    }
    env.with_root(alpha, omega, |frame| {
        let mut last = None;
        for stmt in &stmts {
            match stmt {
                parse::Stmt::Expr(items) => last = interp::exec_statement(items, frame)?,
                parse::Stmt::Control(parts) => {
                    return Err(EvalError::Syntax(format!("{} outside a function", parts[0].0)))
                }
            }
        }
        last.ok_or_else(|| EvalError::Value("expression has no value".into()))
    })
}

/// Runs a tradfn given as its source lines (header line first).
pub fn eval_tradfn(
    defn: &str,
    env: &Env,
    left: Option<AplValue>,
    right: AplValue,
) -> Result<AplValue, EvalError> {
    let tradfn = interp::parse_tradfn(defn)?;
    let name = tradfn.def.name.clone();
    let mut scratch = env.clone();
    scratch
        .bindings
        .insert(name.clone(), Binding::Function(Function::Tradfn(Arc::new(tradfn))));
    scratch.call(&name, left, right)
}

/// Evaluates one io case against a function source. `index` is 1-based and
/// is carried by any error.
pub fn run_io_case(source: &str, io: &IoCase, index: usize) -> Result<AplValue, CaseError> {
    let tag = |part: &'static str| move |source: EvalError| CaseError { index, part, source };
    let mut env = Env::new();
    let defined = env.define(source).map_err(tag("definition"))?;
    let name = if env.has_function(&io.method_name) {
        io.method_name.clone()
    } else if let [only] = defined.as_slice() {
        only.clone()
    } else {
        return Err(tag("method_name")(EvalError::Value(format!(
            "{} is not defined by the source",
            io.method_name
        ))));
    };
    let right = eval_expr(&io.apl_right_arg, &mut env.clone(), None, None).map_err(tag("AplRightArg"))?;
    let left = match &io.apl_left_arg {
        Some(expr) => Some(eval_expr(expr, &mut env.clone(), None, None).map_err(tag("AplLeftArg"))?),
        None => None,
    };
    env.call(&name, left, right).map_err(tag("call"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(expr: &str) -> Result<AplValue, EvalError> {
        eval_expr(expr, &mut Env::new(), None, None)
    }

    fn json(expr: &str) -> serde_json::Value {
        eval(expr).unwrap_or_else(|e| panic!("{expr}: {e}")).to_json()
    }

    const OR_FN: &str = "r←or v\nr←0\n:For e :In v\n    r∨←e\n    :If r=1 ⋄ :Leave ⋄ :EndIf\n:EndFor";

    #[test]
    fn worked_examples() {
        let t = eval("⍉ 2 3 ⍴ ⍳6").unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.to_json(), serde_json::json!([[1, 4], [2, 5], [3, 6]]));
        assert_eq!(json("×/ 3 7 2 5"), serde_json::json!(210));
        assert_eq!(json("⌈/ 3 7 2 5"), serde_json::json!(7));
        assert_eq!(json("{⍴⍴⍵} 2 3 4 ⍴ ⍳24"), serde_json::json!([3]));
        let ace = eval("1 3 5 {⍺⊃¨⊂⍵} 'ABCDE'").unwrap();
        assert_eq!(ace, AplValue::char_vector("ACE"));
        let empty = eval("⍳0").unwrap();
        assert_eq!(empty.shape(), &[0]);
        assert_eq!(empty.kind(), ValueKind::Numeric);
    }

    #[test]
    fn mean_matches_scalar_loop() {
        let xs = [3i64, 7, 2, 5];
        let mut sum = 0.0;
        let mut count = 0.0;
        for x in xs {
            sum += x as f64;
            count += 1.0;
        }
        let mut env = Env::new();
        env.set_value("X", AplValue::int_vector(xs));
        let v = eval_expr("(+⌿X)÷≢X", &mut env, None, None).unwrap();
        assert_eq!(v.elements()[0].as_f64(), Some(sum / count));
    }

    #[test]
    fn or_tradfn() {
        let env = Env::new();
        let run = |v: Vec<i64>| eval_tradfn(OR_FN, &env, None, AplValue::int_vector(v)).unwrap();
        let brute = |v: &[i64]| i64::from(v.contains(&1));
        for v in [vec![0, 0, 1, 0], vec![0, 0, 0], vec![]] {
            let expected = brute(&v);
            assert_eq!(run(v), AplValue::int(expected));
        }
    }

    #[test]
    fn right_to_left_without_precedence() {
        assert_eq!(json("2×3+4"), serde_json::json!(14));
        assert_eq!(json("(2×3)+4"), serde_json::json!(10));
        assert_eq!(json("10-2-3"), serde_json::json!(11));
    }

    #[test]
    fn assignment_and_dfns() {
        let mut env = Env::new();
        assert_eq!(eval_expr("a←1 2 3 ⋄ a+1", &mut env, None, None).unwrap(), AplValue::int_vector([2, 3, 4]));
        assert_eq!(env.value("a"), Some(&AplValue::int_vector([1, 2, 3])));
        eval_expr("sq←{⍵×⍵}", &mut env, None, None).unwrap_err();
        assert!(env.has_function("sq"));
        assert_eq!(eval_expr("sq a", &mut env, None, None).unwrap(), AplValue::int_vector([1, 4, 9]));
        assert_eq!(eval_expr("+/sq¨a", &mut env, None, None).unwrap(), AplValue::int(14));
        assert_eq!(json("{⍺←10 ⋄ ⍺+⍵} 1"), serde_json::json!(11));
        assert_eq!(json("2 {⍺←10 ⋄ ⍺+⍵} 1"), serde_json::json!(3));
        assert_eq!(json("{t←⍵+1 ⋄ t×2} 3"), serde_json::json!(8));
        assert_eq!(json("{⍵} 'a'"), serde_json::json!("a"));
        assert_eq!(eval_expr("", &mut env, None, Some(AplValue::int(1))).unwrap_err(), EvalError::Syntax("empty expression".into()));
        assert_eq!(eval_expr("⍵+1", &mut env, None, Some(AplValue::int(1))).unwrap(), AplValue::int(2));
    }

    #[test]
    fn membership_replicate_and_index_of() {
        assert_eq!(json("1 5 3 ∊ 3 4 5"), serde_json::json!([0, 1, 1]));
        assert_eq!(json("y←1 5 3 ⋄ (y∊3 4 5)/y"), serde_json::json!([5, 3]));
        assert_eq!(json("'abc' ⍳ 'cz'"), serde_json::json!([3, 4]));
        assert_eq!(json("∊ (1 2)(3 4)"), serde_json::json!([1, 2, 3, 4]));
        assert_eq!(json("+/ 2 3 ⍴ ⍳6"), serde_json::json!([6, 15]));
        assert_eq!(json("+⌿ 2 3 ⍴ ⍳6"), serde_json::json!([5, 7, 9]));
        assert_eq!(json("≢ 2 3 ⍴ ⍳6"), serde_json::json!(2));
        assert_eq!(json("⊃ (1 2)(3 4)"), serde_json::json!([1, 2]));
    }

    #[test]
    fn empty_reductions() {
        assert_eq!(json("+/⍬"), serde_json::json!(0));
        assert_eq!(json("×/⍬"), serde_json::json!(1));
        assert!(matches!(eval("⌈/⍬"), Err(EvalError::Domain { .. })));
        assert!(matches!(eval("⌊/⍳0"), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn typed_errors() {
        match eval("1 2 + 1 2 3") {
            Err(EvalError::Length { primitive, operands }) => {
                assert_eq!(primitive, "+");
                assert_eq!(operands.left, Some(vec![2]));
                assert_eq!(operands.right, vec![3]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(eval("(2 2⍴1) + 1 2"), Err(EvalError::Rank { .. })));
        assert!(matches!(eval("1÷0"), Err(EvalError::Domain { .. })));
        assert!(matches!(eval("4 ⊃ 1 2 3"), Err(EvalError::Index { .. })));
        assert!(matches!(eval("undefinedName"), Err(EvalError::Value(_))));
        assert!(eval("1 2 ⌽ 3").unwrap_err().is_unsupported());
        assert!(eval("+\\ 1 2").unwrap_err().is_unsupported());
        assert!(eval("⊂⊂1 2").unwrap_err().is_unsupported());
        assert!(eval("=1").unwrap_err().is_unsupported());
    }

    #[test]
    fn tradfn_control_flow() {
        let src = "r←y count x\nr←0\n:For e :In x\n  :If e=y\n    r+←1\n  :ElseIf e=0\n    :Continue\n  :Else\n    r←r\n  :EndIf\n:EndFor";
        let v = eval_tradfn(src, &Env::new(), Some(AplValue::int(2)), AplValue::int_vector([2, 0, 2, 3])).unwrap();
        assert_eq!(v, AplValue::int(2));
        let w = "r←f n\nr←0\n:While n>0\nr+←n ⋄ n←n-1\n:EndWhile";
        assert_eq!(eval_tradfn(w, &Env::new(), None, AplValue::int(4)).unwrap(), AplValue::int(10));
        let bad = "r←f x\n:Select x\n:EndSelect";
        assert!(eval_tradfn(bad, &Env::new(), None, AplValue::int(1)).unwrap_err().is_unsupported());
        let unset = "r←f x\ny←x";
        assert!(matches!(eval_tradfn(unset, &Env::new(), None, AplValue::int(1)), Err(EvalError::Value(_))));
        let open = "r←f x\n:If x\nr←1";
        assert!(matches!(eval_tradfn(open, &Env::new(), None, AplValue::int(1)), Err(EvalError::Syntax(_))));
        let nonbool = "r←f x\n:If x\nr←1\n:EndIf";
        assert!(matches!(eval_tradfn(nonbool, &Env::new(), None, AplValue::int(2)), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn define_sources() {
        let mut env = Env::new();
        let names = env
            .define("⍝ helpers\n∇ r←Double x\n r←2×x\n∇\nHalf←{\n  ⍵÷2\n}\nK←Double 3")
            .unwrap();
        assert_eq!(names, vec!["Double".to_string(), "Half".to_string()]);
        assert_eq!(env.value("K"), Some(&AplValue::int(6)));
        assert_eq!(env.call("Half", None, AplValue::int(3)).unwrap(), AplValue::real(1.5));
        let mut plain = Env::new();
        assert_eq!(plain.define(OR_FN).unwrap(), vec!["or".to_string()]);
    }

    #[test]
    fn io_cases() {
        let src = "r←y xIsectr x\n⍝ ⍺: INT[,] ⍵: INT[,] → INT[]\nr←(y∊x)/y←∊y";
        let io: IoCase = serde_json::from_value(serde_json::json!({
            "method_name": "xIsectr",
            "AplLeftArg": "2 2 ⍴ 3 5 1 3",
            "AplRightArg": "2 2 ⍴ 1 2 3 4",
            "CSharpArg": "",
            "Output": []
        }))
        .unwrap();
        assert_eq!(run_io_case(src, &io, 1).unwrap().to_json(), serde_json::json!([3, 1, 3]));
        let mut broken = io.clone();
        broken.apl_right_arg = "2 2 ⍴".into();
        let err = run_io_case(src, &broken, 2).unwrap_err();
        assert_eq!((err.index, err.part), (2, "AplRightArg"));
        let mut renamed = io.clone();
        renamed.method_name = "other".into();
        assert_eq!(run_io_case(src, &renamed, 3).unwrap().len(), 3);
    }

    fn matrix() -> impl Strategy<Value = AplValue> {
        (0usize..=6, 0usize..=6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-50i64..50, r * c)
                .prop_map(move |items| AplValue::int_array(vec![r, c], items).unwrap())
        })
    }

    fn digits() -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::vec(0i64..=9, 0..=8)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn transpose_involution(m in matrix()) {
            let mut env = Env::new();
            env.set_value("A", m.clone());
            prop_assert_eq!(eval_expr("⍉⍉A", &mut env, None, None).unwrap(), m);
        }

        #[test]
        fn reshape_contract(shape in proptest::collection::vec(0i64..5, 0..4), v in proptest::collection::vec(-9i64..9, 1..10)) {
            let mut env = Env::new();
            env.set_value("S", AplValue::int_vector(shape.clone()));
            env.set_value("V", AplValue::int_vector(v));
            let got = eval_expr("⍴ S ⍴ V", &mut env, None, None).unwrap();
            prop_assert_eq!(got, AplValue::int_vector(shape));
        }

        #[test]
        fn reduction_of_singleton(x in -100i64..100, f in proptest::sample::select(vec!['+', '×', '⌈', '⌊', '∨', '∧'])) {
            let mut env = Env::new();
            env.set_value("V", AplValue::int_vector([x]));
            let got = eval_expr(&format!("{f}/V"), &mut env, None, None).unwrap();
            prop_assert_eq!(got, AplValue::int(x));
        }

        #[test]
        fn membership_shape_law(y in matrix(), x in digits()) {
            let mut env = Env::new();
            env.set_value("Y", y.clone());
            env.set_value("X", AplValue::int_vector(x));
            let got = eval_expr("Y∊X", &mut env, None, None).unwrap();
            prop_assert_eq!(got.shape(), y.shape());
            prop_assert!(got.elements().iter().all(|e| e.as_bool().is_some()));
        }

        #[test]
        fn oracle_equivalence(v in digits(), w in digits()) {
            let mut env = Env::new();
            env.set_value("V", AplValue::int_vector(v.clone()));
            env.set_value("W", AplValue::int_vector(w.clone()));
            let mut run = |e: &str| eval_expr(e, &mut env, None, None);

            let mut product = 1i64;
            let mut sum = 0i64;
            for &x in &v {
                product *= x;
                sum += x;
            }
            prop_assert_eq!(run("×/V").unwrap(), AplValue::int(product));
            prop_assert_eq!(run("+⌿V").unwrap(), AplValue::int(sum));
            prop_assert_eq!(run("≢V").unwrap(), AplValue::int(v.len() as i64));

            let mut max = None;
            for &x in &v {
                if max.is_none_or(|m| x > m) {
                    max = Some(x);
                }
            }
            match max {
                Some(m) => prop_assert_eq!(run("⌈/V").unwrap(), AplValue::int(m)),
                None => {
                    let domain = matches!(run("⌈/V"), Err(EvalError::Domain { .. }));
                    prop_assert!(domain);
                }
            }

            let mut member = Vec::new();
            for &x in &v {
                let mut found = 0;
                for &y in &w {
                    if x == y {
                        found = 1;
                    }
                }
                member.push(found);
            }
            prop_assert_eq!(run("V∊W").unwrap(), AplValue::int_vector(member));
        }
    }
}
