mod support;

use proptest::prelude::*;

use reliefplan_core::binding::bind_assets;
use reliefplan_core::fixtures::{self, ReferencePlan};
use reliefplan_core::model::Severity;
use reliefplan_core::validator::{gate, validate};
use reliefplan_core::{
    ExportFormat, ValidationPolicy, build_board, diff_boards, export_board, parse_plan, parse_plan_set,
    serialize_plan, serialize_plan_set,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parse_inverts_serialize(plan in support::plan()) {
        let text = serialize_plan(&plan);
        let (parsed, diagnostics) = parse_plan(&text);
        prop_assert!(diagnostics.iter().all(|d| !d.is_error()), "{:?}\n{}", diagnostics, text);
        prop_assert_eq!(parsed.without_provenance(), plan.without_provenance());
    }

    #[test]
    fn plan_sets_round_trip(a in support::plan(), b in support::plan(), c in support::plan()) {
        let plans: Vec<_> = [a, b, c]
            .into_iter()
            .enumerate()
            .map(|(i, mut p)| { p.ordinal = i as u8 + 1; p })
            .collect();
        let parsed = parse_plan_set(&serialize_plan_set(&plans), 3).unwrap();
        prop_assert!(!parsed.has_errors());
        let got: Vec<_> = parsed.plans.iter().map(|p| p.without_provenance()).collect();
        prop_assert_eq!(got, plans);
    }

    #[test]
    fn gate_is_monotone_in_tolerance(
        column in prop::sample::select(ReferencePlan::ALL.to_vec()),
        require_fas in any::<bool>(),
    ) {
        let scenario = fixtures::earthquake_scenario();
        let (plan, _) = bind_assets(&fixtures::reference_plan(column), &scenario);
        let policy = ValidationPolicy { require_fas, ..ValidationPolicy::default() };
        let issues = validate(&plan, &scenario, &policy);
        let levels = [Severity::Info, Severity::Warning, Severity::Error];
        let accepted: Vec<bool> = levels.iter().map(|&s| gate(&issues, s).is_accept()).collect();
        prop_assert!(accepted.windows(2).all(|w| !w[0] || w[1]), "{:?}", accepted);
        prop_assert!(accepted[2]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn budget_contract(history in support::history(), budget in support::budget()) {
        support::check_budget(&history, &budget).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn session_machine_is_safe(ops in prop::collection::vec(support::op(), 1..12)) {
        let engine = support::fixture_engine();
        let mut session = engine.new_session(reliefplan_core::SessionId::new("prop"));
        for op in &ops {
            session = support::step(&engine, &session, op).map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn board_marks_match_bindings(column in prop::sample::select(ReferencePlan::ALL.to_vec())) {
        let scenario = fixtures::earthquake_scenario();
        let (plan, _) = bind_assets(&fixtures::reference_plan(column), &scenario);
        let board = build_board(&plan, &scenario).unwrap();
        let refs: usize = plan.tasks().map(|(_, t)| t.asset_refs.len()).sum();
        prop_assert_eq!(board.mark_count(), refs);
        prop_assert_eq!(board.rows.len(), scenario.assets.len());
        for row in &board.rows {
            for cell in &row.cells {
                prop_assert!(plan.task(cell.task_index).is_some());
            }
        }
        let grid = export_board(&board, ExportFormat::GridText);
        prop_assert_eq!(grid.matches('X').count(), refs);
        prop_assert!(diff_boards(&board, &board).unwrap().is_empty());
    }
}
