import pytest

from config import DEFAULT_SEED, MINIMALITY_TRIALS, SOLVER_TOLERANCE
from exceptions import ParseError, ValidationError
from model_config import build_model, load_config, parse_config


def test_defaults(write_config):
    config = load_config(write_config("""
        domain: {kind: torus, bounds: [0, 1, 0, 1]}
        grid: {nx: 16, ny: 16}
    """))
    assert (config.kind, config.nx, config.ny) == ("torus", 16, 16)
    assert (config.lam, config.tau, config.mu) == ("1", "0", "1")
    assert config.seed == DEFAULT_SEED
    assert config.solver.tolerance == SOLVER_TOLERANCE
    assert config.minimality.trials == MINIMALITY_TRIALS
    assert config.output is None


def test_full_config(write_config, tmp_path):
    config = load_config(write_config(f"""
        domain:
          kind: disk
          radius: 2
        grid: {{nx: 33, ny: 33}}
        fields:
          lambda: 1
          tau: "0.5*x"
          mu: "1 + 0.1*y^2"
        quadrature: {{nodes: 65}}
        solver: {{tolerance: 1e-9, max_iterations: 50}}
        minimality: {{trials: 4, modes: 3, amplitude: 0.05}}
        dirichlet: {{boundary: "x*y", H: 0.25}}
        output: {{path: {tmp_path / "u.csv"}}}
        seed: 42
    """))
    assert config.radius == 2.0
    assert config.tau == "0.5*x"
    assert config.quadrature_nodes == 65
    assert config.solver.max_iterations == 50
    assert config.minimality.amplitude == 0.05
    assert config.dirichlet.H == 0.25
    assert config.output == str(tmp_path / "u.csv")
    assert config.seed == 42
    model = build_model(config)
    assert model.z_source == "radial_eta"
    assert model.quadrature_nodes == 65


def test_torus_model_has_no_connection(write_config):
    config = load_config(write_config("""
        domain: {kind: torus, bounds: [0, 1, 0, 1]}
        grid: {nx: 8, ny: 8}
        fields: {tau: "sin(2*pi*x)"}
    """))
    assert not build_model(config).has_connection


def test_non_positive_mu(write_config):
    with pytest.raises(ValidationError, match="mu must be positive"):
        load_config(write_config("""
            domain: {kind: disk, radius: 1}
            grid: {nx: 9, ny: 9}
            fields: {mu: "0"}
        """))


@pytest.mark.parametrize("text, key", [
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: 9, ny: 9}\ncolour: red\n", "colour"),
    ("domain: {kind: disk, radius: 1, centre: 0}\ngrid: {nx: 9, ny: 9}\n", "domain.centre"),
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: 9, ny: 9}\nsolver: {tol: 1}\n", "solver.tol"),
])
def test_unknown_keys(text, key):
    with pytest.raises(ValidationError) as excinfo:
        parse_config(text)
    assert excinfo.value.key == key


@pytest.mark.parametrize("text, key", [
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: nine, ny: 9}\n", "grid.nx"),
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: 9.5, ny: 9}\n", "grid.nx"),
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: 9, ny: 9}\nseed: -1\n", "seed"),
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: 9, ny: 9}\nsolver: {tolerance: .nan}\n", "solver.tolerance"),
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: 9, ny: 9}\nsolver: {tolerance: true}\n", "solver.tolerance"),
    ("grid: {nx: 9, ny: 9}\n", "domain.kind"),
    ("domain: {kind: disk, radius: 1}\ngrid: {nx: 9}\n", "grid.ny"),
    ("domain: {kind: torus, bounds: [0, 1]}\ngrid: {nx: 9, ny: 9}\n", "domain.bounds"),
])
def test_invalid_values(text, key):
    with pytest.raises(ValidationError) as excinfo:
        parse_config(text)
    assert excinfo.value.key == key


def test_bad_expression_reports_position():
    with pytest.raises(ParseError) as excinfo:
        parse_config("domain: {kind: disk, radius: 1}\ngrid: {nx: 9, ny: 9}\nfields: {tau: '1 + '}\n")
    assert excinfo.value.position == 4


def test_yaml_syntax_error_has_line():
    with pytest.raises(ParseError) as excinfo:
        parse_config("a: b: c\n")
    assert excinfo.value.line == 1


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        load_config(str(tmp_path / "absent.yaml"))


def test_overrides(write_config, tmp_path):
    config = load_config(write_config("""
        domain: {kind: torus, bounds: [0, 1, 0, 1]}
        grid: {nx: 8, ny: 8}
        seed: 3
    """))
    changed = config.with_overrides(seed=9, tolerance=1e-6, output=str(tmp_path / "out.csv"))
    assert changed.seed == 9
    assert changed.solver.tolerance == 1e-6
    assert changed.output.endswith("out.csv")
    assert config.seed == 3
    assert config.with_overrides() == config


def test_output_directory_must_exist(tmp_path):
    with pytest.raises(ValidationError) as excinfo:
        parse_config(f"domain: {{kind: disk, radius: 1}}\ngrid: {{nx: 9, ny: 9}}\n"
                     f"output: {{path: {tmp_path / 'missing' / 'u.csv'}}}\n")
    assert excinfo.value.key == "output"


def test_summary(write_config):
    config = load_config(write_config("""
        domain: {kind: disk, radius: 1.5}
        grid: {nx: 9, ny: 11}
        fields: {tau: 1}
    """))
    summary = config.summary()
    assert summary["grid"] == {"nx": 9, "ny": 11}
    assert summary["fields"]["tau"] == "1"
    assert summary["domain"]["bounds"] is None
