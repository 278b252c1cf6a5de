//! The model language: a line-insensitive, statement-oriented text format.
//!
//! Every statement has a canonical single-line form (its `Display`), which is what the
//! event log stores; parsing that form yields an equal statement.

mod ast;
mod lexer;
mod parser;

pub use ast::{BindGuard, Statement, StatementKind, TableSpec};
pub use parser::{descriptor_map, parse_formula, parse_program, parse_statement, parse_term, Located};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct DslError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(src: &str) {
        let s = parse_statement(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        let printed = s.to_string();
        let again = parse_statement(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
        assert_eq!(s, again, "{printed}");
        assert_eq!(printed, again.to_string());
    }

    #[test]
    fn statements_round_trip() {
        for src in [
            "repository hr",
            "critical Vacancy, Establishment",
            "concept Vacancy { title: text key; dept: ref Dept; grade: int; open: bool; kind: enum Kind { full, part } }",
            r#"individual Vacancy { title = "dev\n1" }"#,
            r#"state Vacancy["dev"] cause "open" { dept = Dept["IT"]; grade = -3 }"#,
            "predicate urgent",
            r#"constant Boss = Employee["ivanov"]"#,
            r#"fact reports(Employee["a"], Boss)"#,
            r#"retract reports(Employee["a"], Boss)"#,
            r#"meta IT level 1 over Employee as e where e.dept = "IT" { access = "managers"; display = "table" }"#,
            "meta Big level 2 over level 1 as m where m.size >= 2",
            "meta Any level 1 over Employee where (exists y in Employee: reports(x, y)) or not x in IT",
            "view v over Vacancy as x where x.open = true { select title, dept as d, photo media; layout desktop { rows 20; media on } layout mobile { order title; rows 5; media off } mode periodic 3; audience corporate }",
            "view c over Establishment { select count as establishments, distinct country as countries; mode manual }",
            r#"scenario s when p = corporate and x.a != 1 do assert-frame(seen, User["u"], true), transition-state(Vacancy["dev"], "close", open = false), render-view("v"), deny("no")"#,
            "coordinate s { higraph, mmedia }",
            "generalized z over (s) { higraph: 7, mmedia: 4 }",
            r#"generalized w over (s, p) { (higraph, corporate): "a", (mmedia, corporate): "b" }"#,
            "generalized q over () { 2 }",
            "cost model m { r over () { 0 }; z over (s) { higraph: 1, mmedia: 2 }; stage 10 q over () { 3 }; }",
            r#"profile user "ivanov" { s = higraph; p = corporate }"#,
            r#"role for "ivanov" = web-designer"#,
            "grant ordinary read data hr",
            "revoke manager write data *",
            "bind on login when role manager and p = corporate run welcome",
            "bind on timer run nightly",
            r#"functional f over (s, p) users "a", "b""#,
            "tick",
            "refresh v",
        ] {
            round_trip(src);
        }
    }

    #[test]
    fn greater_than_swaps_operands() {
        let f = parse_formula("x.a > 3").unwrap();
        assert_eq!(f.to_string(), "3 < x.a");
        let g = parse_formula("M(x)").unwrap();
        assert_eq!(g.to_string(), "x in M");
    }

    #[test]
    fn precedence_and_quantifier_scope() {
        let f = parse_formula("a = 1 or b = 2 and c = 3").unwrap();
        assert_eq!(f.to_string(), "(a = 1 or (b = 2 and c = 3))");
        let g = parse_formula("exists y in D: y.a = 1 and y.b = 2").unwrap();
        assert_eq!(g.to_string(), "(exists y in D: (y.a = 1 and y.b = 2))");
        let h = parse_formula("not a = 1 and b = 2").unwrap();
        assert_eq!(h.to_string(), "(not a = 1 and b = 2)");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_program("repository hr\nconcept X { a: float }").unwrap_err();
        assert_eq!((e.line, e.col), (2, 16));
        let e = parse_program("frobnicate").unwrap_err();
        assert_eq!((e.line, e.col), (1, 1));
        assert!(parse_statement("tick tock").is_err());
    }

    #[test]
    fn programs_record_statement_positions() {
        let p = parse_program("repository hr;\n\n  predicate p\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!((p[1].line, p[1].col), (3, 3));
    }
}
