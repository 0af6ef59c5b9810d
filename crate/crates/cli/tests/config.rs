use sigbudget::model::ModelPrimitives;
use sigbudget_cli::config::{Grids, Tolerances};
use sigbudget_cli::{parse_config, Budget, ConfigError};

const QUAD: &str = include_str!("fixtures/quad.toml");

#[test]
fn minimal_document_gets_defaults() {
    let c = parse_config(QUAD).unwrap();
    assert_eq!(c.budget, Budget::Single(2.0));
    assert_eq!(c.primitives(2.0), ModelPrimitives::quadratic_benchmark(2.0));
    assert_eq!(c.grids, Grids::default());
    assert_eq!(c.tolerances, Tolerances::default());
    assert_eq!(c.grids.types, 2001);
    assert_eq!((c.grids.messages, c.grids.ic_types), (201, 201));
    assert_eq!(c.tolerances.ic, 1e-4);
    assert_eq!(c.tolerances.ode_rtol, 1e-9);
    assert_eq!(c.seed, 0);
    assert_eq!(c.output_dir.to_str(), Some("out"));
}

#[test]
fn negative_alpha_is_a_schema_error() {
    let doc = QUAD.replace("alpha = 1", "alpha = -1");
    match parse_config(&doc).unwrap_err() {
        ConfigError::Schema { field, line, .. } => {
            assert_eq!(field, "alpha");
            assert_eq!(line, Some(1));
        }
        e => panic!("expected schema error, got {e:?}"),
    }
}

#[test]
fn sweep_list_gives_one_job_per_budget() {
    let doc = QUAD.replace("budget = 2", "budget = [0.9, 1.5, 2, 5, 10]");
    let c = parse_config(&doc).unwrap();
    assert!(c.is_sweep());
    assert_eq!(c.budgets(), vec![0.9, 1.5, 2.0, 5.0, 10.0]);
}

#[test]
fn unknown_family() {
    let doc = QUAD.replace("family = \"quadratic\"", "family = \"cubic\"");
    match parse_config(&doc).unwrap_err() {
        ConfigError::UnknownFamily { slot, name, line, .. } => {
            assert_eq!((slot.as_str(), name.as_str()), ("noncog", "cubic"));
            assert_eq!(line, Some(14));
        }
        e => panic!("expected unknown family, got {e:?}"),
    }
}

#[test]
fn malformed_document_reports_line() {
    let doc = QUAD.replace("k = 1", "k = ");
    match parse_config(&doc).unwrap_err() {
        ConfigError::Schema { line, .. } => assert_eq!(line, Some(15)),
        e => panic!("{e:?}"),
    }
}

#[test]
fn missing_required_field() {
    let doc = QUAD.replace("alpha = 1\n", "");
    match parse_config(&doc).unwrap_err() {
        ConfigError::Schema { field, .. } => assert_eq!(field, "alpha"),
        e => panic!("{e:?}"),
    }
}

#[test]
fn unknown_top_level_key() {
    let doc = format!("betta = 3\n{QUAD}");
    assert!(matches!(parse_config(&doc), Err(ConfigError::Schema { .. })));
}

#[test]
fn round_trip_is_identical() {
    let docs = [
        QUAD.to_string(),
        include_str!("fixtures/sweep.toml").to_string(),
        format!("{QUAD}\n[grids]\ntypes = 101\n\n[tolerances]\nic = 1e-5\n")
            .replace("family = \"uniform\"", "family = \"truncated_exponential\"\nrate = -0.5")
            .replace("alpha = 1", "alpha = 0.25\nseed = 7\noutput_dir = \"elsewhere\""),
    ];
    for doc in docs {
        let first = parse_config(&doc).unwrap();
        let text = first.to_toml();
        let second = parse_config(&text).unwrap();
        assert_eq!(first, second, "{text}");
        assert_eq!(text, second.to_toml());
    }
}
