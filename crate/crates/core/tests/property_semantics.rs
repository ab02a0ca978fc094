//! Semantic invariants of bounded property evaluation, checked against an
//! independent reference: a bottom-up position-labeling evaluator that
//! computes, for every subformula, the set of positions where it holds.

use proptest::prelude::*;
use smc_core::model::{CmpOp, State};
use smc_core::property::{evaluate, BoundProperty, PropertyAst, Trace};

/// Reference evaluator: labels every position, clamping windows at the
/// trace end. Labels are only meaningful at positions whose full horizon
/// window fits inside the trace, which is all callers compare.
fn labels(prop: &BoundProperty, states: &[State]) -> Vec<bool> {
    let n = states.len();
    match prop {
        PropertyAst::True => vec![true; n],
        PropertyAst::False => vec![false; n],
        PropertyAst::Atom { var, op, value } => {
            states.iter().map(|s| op.apply(s.values[*var], *value)).collect()
        }
        PropertyAst::Not(a) => labels(a, states).into_iter().map(|b| !b).collect(),
        PropertyAst::And(a, b) => labels(a, states)
            .into_iter()
            .zip(labels(b, states))
            .map(|(x, y)| x && y)
            .collect(),
        PropertyAst::Or(a, b) => labels(a, states)
            .into_iter()
            .zip(labels(b, states))
            .map(|(x, y)| x || y)
            .collect(),
        PropertyAst::Next(a) => {
            let la = labels(a, states);
            (0..n).map(|i| i + 1 < n && la[i + 1]).collect()
        }
        PropertyAst::Finally { bound, inner } => {
            let li = labels(inner, states);
            (0..n).map(|i| (i..=(i + bound).min(n - 1)).any(|j| li[j])).collect()
        }
        PropertyAst::Globally { bound, inner } => {
            let li = labels(inner, states);
            (0..n).map(|i| (i..=(i + bound).min(n - 1)).all(|j| li[j])).collect()
        }
        PropertyAst::Until { bound, lhs, rhs } => {
            let ll = labels(lhs, states);
            let lr = labels(rhs, states);
            (0..n)
                .map(|i| {
                    (i..=(i + bound).min(n - 1))
                        .any(|j| lr[j] && (i..j).all(|l| ll[l]))
                })
                .collect()
        }
    }
}

const WIDTH: usize = 2;
const DOMAIN: i64 = 3;

fn arb_formula() -> impl Strategy<Value = BoundProperty> {
    let atom = (0..WIDTH, 0..=DOMAIN, 0..6usize).prop_map(|(var, value, op)| {
        let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge][op];
        PropertyAst::Atom { var, op, value }
    });
    let leaf = prop_oneof![4 => atom, 1 => Just(PropertyAst::True), 1 => Just(PropertyAst::False)];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| PropertyAst::Not(Box::new(a))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| PropertyAst::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| PropertyAst::Or(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| PropertyAst::Next(Box::new(a))),
            (0..3usize, inner.clone())
                .prop_map(|(bound, a)| PropertyAst::Finally { bound, inner: Box::new(a) }),
            (0..3usize, inner.clone())
                .prop_map(|(bound, a)| PropertyAst::Globally { bound, inner: Box::new(a) }),
            (0..3usize, inner.clone(), inner).prop_map(|(bound, a, b)| PropertyAst::Until {
                bound,
                lhs: Box::new(a),
                rhs: Box::new(b)
            }),
        ]
    })
}

fn arb_trace(min_len: usize) -> impl Strategy<Value = Trace> {
    prop::collection::vec(
        prop::collection::vec(0..=DOMAIN, WIDTH..=WIDTH),
        min_len..min_len + 8,
    )
    .prop_map(|rows| Trace { states: rows.into_iter().map(|values| State { values }).collect() })
}

proptest! {
    #[test]
    fn agrees_with_position_labeling_reference(
        (prop, trace) in arb_formula().prop_flat_map(|p| {
            let h = p.horizon();
            (Just(p), arb_trace(h + 1))
        })
    ) {
        let reference = labels(&prop, &trace.states);
        let h = prop.horizon();
        for pos in 0..trace.len() - h {
            prop_assert_eq!(evaluate(&prop, &trace, pos).unwrap(), reference[pos]);
        }
    }

    #[test]
    fn truncation_to_the_horizon_window_preserves_verdicts(
        (prop, trace) in arb_formula().prop_flat_map(|p| {
            let h = p.horizon();
            (Just(p), arb_trace(h + 1))
        })
    ) {
        let h = prop.horizon();
        let full = evaluate(&prop, &trace, 0).unwrap();
        let cut = Trace { states: trace.states[..h + 1].to_vec() };
        prop_assert_eq!(evaluate(&prop, &cut, 0).unwrap(), full);
    }

    #[test]
    fn de_morgan_duality_of_bounded_operators(
        (inner, bound, trace) in (arb_formula(), 0..4usize).prop_flat_map(|(p, b)| {
            let h = p.horizon() + b;
            (Just(p), Just(b), arb_trace(h + 1))
        })
    ) {
        let not_finally = PropertyAst::Not(Box::new(PropertyAst::Finally {
            bound,
            inner: Box::new(inner.clone()),
        }));
        let globally_not = PropertyAst::Globally {
            bound,
            inner: Box::new(PropertyAst::Not(Box::new(inner))),
        };
        prop_assert_eq!(
            evaluate(&not_finally, &trace, 0).unwrap(),
            evaluate(&globally_not, &trace, 0).unwrap()
        );
    }

    #[test]
    fn negation_flips_every_verdict(
        (prop, trace) in arb_formula().prop_flat_map(|p| {
            let h = p.horizon();
            (Just(p), arb_trace(h + 1))
        })
    ) {
        prop_assert_eq!(
            evaluate(&prop.negated(), &trace, 0).unwrap(),
            !evaluate(&prop, &trace, 0).unwrap()
        );
    }
}
