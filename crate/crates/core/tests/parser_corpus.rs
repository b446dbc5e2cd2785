use charfred_core::expr::{check_periodicity, parse};
use proptest::prelude::*;

const CORPUS: [&str; 50] = [
    "0",
    "1",
    "-1",
    "3.25",
    "1e-3",
    "2.5E+2",
    "x",
    "y",
    "t",
    "pi",
    "x + y",
    "x - y - t",
    "x - (y - t)",
    "x*y*t",
    "x/y/t",
    "x/(y/t)",
    "x*(y + t)",
    "(x + y)*(x - y)",
    "-x",
    "-(-x)",
    "--x",
    "-x^2",
    "(-x)^2",
    "x^2^3",
    "(x^2)^3",
    "x^-1",
    "2^-x^2",
    "-2*x",
    "2*-x",
    "x - -y",
    "sin(x)",
    "cos(2*pi*y)",
    "exp(-t)",
    "sin(x)^2 + cos(x)^2",
    "exp(sin(2*pi*(y - t)))",
    "sin(2*pi*y)*cos(2*pi*t)",
    "1/(1 + x^2)",
    "(1 - x)*cos(2*pi*(y + 2*t))",
    "x*(1 - x/2)*sin(2*pi*(y + t))",
    "0.5 + 0.25*x",
    "-3*x/10",
    "2*pi/3",
    "(x + y)/(t + 2)",
    "x^0.5",
    "exp(x)*cos(2*pi*t)",
    "1 + x*sin(2*pi*y)",
    "  x   *   y  ",
    "((((x))))",
    "sin(cos(exp(x)))",
    "-sin(x)^2 - -cos(y)^3",
];

#[test]
fn corpus_round_trips() {
    for src in CORPUS {
        let e = parse(src).unwrap_or_else(|err| panic!("{src}: {err}"));
        let printed = e.to_string();
        let again = parse(&printed).unwrap_or_else(|err| panic!("{src} printed as {printed}: {err}"));
        assert_eq!(e, again, "{src} printed as {printed}");
        assert_eq!(again.to_string(), printed);
    }
}

#[test]
fn printed_form_evaluates_identically() {
    for src in CORPUS {
        let e = parse(src).unwrap();
        let again = parse(&e.to_string()).unwrap();
        let (x, y, t) = (0.37, 0.81, 0.29);
        let (a, b) = (e.eval(x, y, t), again.eval(x, y, t));
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a.to_bits(), b.to_bits(), "{src}"),
            (Err(_), Err(_)) => {}
            other => panic!("{src}: {other:?}"),
        }
    }
}

proptest! {
    #[test]
    fn periodicity_is_monotone_in_tolerance(
        shift in -1e-6f64..1e-6,
        tol1 in 1e-12f64..1e-3,
        extra in 0.0f64..1e-3,
    ) {
        // nearly periodic in y: the period is off by `shift`
        let e = parse(&format!("sin(2*pi*y/{})", 1.0 + shift)).unwrap();
        if check_periodicity(&e, 1.0, 1.0, 16, tol1).unwrap() {
            prop_assert!(check_periodicity(&e, 1.0, 1.0, 16, tol1 + extra).unwrap());
        }
    }
}
