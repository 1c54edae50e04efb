"""Tests for the command-line interface"""

import json
from unittest.mock import Mock

import pytest

from shadowrec import __version__
from shadowrec.batch import TrialOutcome
from shadowrec.cli import (
    EXIT_CONFIG,
    EXIT_FAILURE,
    EXIT_INTERRUPTED,
    EXIT_OK,
    CLIError,
    create_parser,
    main,
    parse_grid,
    read_queries,
)


@pytest.fixture
def queries_file(temp_dir):
    def write(text, name="queries.csv"):
        path = temp_dir / name
        path.write_text(text, encoding="utf-8")
        return path
    return write


@pytest.fixture
def interval_set(write_json_file):
    return write_json_file({"perturbation": {"kind": "interval", "lo": 1, "hi": 2}}, name="interval.json")


@pytest.mark.unit
class TestParser:
    """Test cases for argument parsing"""

    def test_version(self, capsys):
        """--version prints the version and exits"""
        with pytest.raises(SystemExit) as exc_info:
            main(['--version'])
        assert exc_info.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_subcommand_required(self):
        """A bare invocation is a usage error"""
        with pytest.raises(SystemExit) as exc_info:
            main([])
        assert exc_info.value.code == 2

    def test_verify_defaults(self):
        """verify runs 100 trials on 4 workers by default"""
        args = create_parser().parse_args(['verify', '--config', 'run.json'])
        assert args.trials == 100
        assert args.workers == 4
        assert args.out is None
        assert not args.verbose

    def test_audit_negative_grid(self):
        """Negative grid bounds are passed with ="""
        args = create_parser().parse_args(['audit', '--r', '1', '--grid=-10:10:0.1', '--horizon', '50'])
        assert args.grid == '-10:10:0.1'
        assert args.bound_factor == 100.0


@pytest.mark.unit
class TestParseGrid:
    """Test cases for grid parsing"""

    def test_valid(self):
        assert parse_grid('-10:10:0.1') == (-10.0, 10.0, 0.1)

    @pytest.mark.parametrize("text", ['1:2', '1:0:0.1', '0:1:0', 'a:b:c'])
    def test_invalid(self, text):
        """Malformed grids are CLI errors"""
        with pytest.raises(CLIError):
            parse_grid(text)


@pytest.mark.unit
class TestReadQueries:
    """Test cases for query files"""

    def test_comments_and_blank_rows(self, queries_file):
        """Comments and blank rows keep their row numbers out of the result"""
        path = queries_file("# header\n0.5,0.5\n\n1, -1\n")
        queries = read_queries(path, 2)

        assert [row for row, _ in queries] == [2, 4]
        assert queries[1][1].tolist() == [1.0, -1.0]

    def test_wrong_width(self, queries_file):
        """Rows must match the set's dimension"""
        with pytest.raises(CLIError, match="Queries row 1"):
            read_queries(queries_file("1,2,3\n"), 2)

    def test_not_a_number(self, queries_file):
        with pytest.raises(CLIError, match="Queries row 2"):
            read_queries(queries_file("1\nx\n"), 1)

    def test_missing_file(self, temp_dir):
        with pytest.raises(CLIError, match="Queries file not found"):
            read_queries(temp_dir / "absent.csv", 1)


@pytest.mark.unit
class TestShadowCommand:
    """Test cases for the shadow command"""

    def test_success(self, write_json_file, run_config_data, temp_dir, capsys):
        """A valid run writes both files and exits 0"""
        config_path = write_json_file(run_config_data)
        out_dir = temp_dir / "out"

        assert main(['shadow', '--config', str(config_path), '--out', str(out_dir)]) == EXIT_OK

        summary = json.loads((out_dir / "summary.json").read_text(encoding="utf-8"))
        assert summary["verdict"] == "all_contained"
        assert summary["stability_constant"] == 1.0
        assert summary["config"]["horizon"] == 60
        assert len((out_dir / "shadow.csv").read_text(encoding="utf-8").splitlines()) == 62
        assert "✓ Summary saved to" in capsys.readouterr().err

    def test_custom_output_names(self, write_json_file, run_config_data, temp_dir):
        """output.csv and output.summary rename the files"""
        run_config_data["output"] = {"csv": "table.csv", "summary": "meta.json"}
        config_path = write_json_file(run_config_data)

        main(['shadow', '--config', str(config_path), '--out', str(temp_dir)])

        assert (temp_dir / "table.csv").exists()
        assert (temp_dir / "meta.json").exists()

    def test_deterministic(self, write_json_file, run_config_data, temp_dir):
        """The same seed gives byte-identical tables"""
        run_config_data["sampler"] = {"kind": "uniform"}
        run_config_data["seed"] = 7
        config_path = write_json_file(run_config_data)

        main(['shadow', '--config', str(config_path), '--out', str(temp_dir / "a")])
        main(['shadow', '--config', str(config_path), '--out', str(temp_dir / "b")])

        first = (temp_dir / "a" / "shadow.csv").read_bytes()
        assert first == (temp_dir / "b" / "shadow.csv").read_bytes()

    def test_containment_failure(self, write_json_file, run_config_data, temp_dir, mocker, capsys):
        """A failed verdict exits 1"""
        mocker.patch('shadowrec.cli.Report.verdict', new_callable=mocker.PropertyMock, return_value=False)
        config_path = write_json_file(run_config_data)

        assert main(['shadow', '--config', str(config_path), '--out', str(temp_dir)]) == EXIT_FAILURE
        assert "guaranteed containments fail" in capsys.readouterr().err

    def test_critical_law(self, write_json_file, run_config_data, temp_dir, capsys):
        """|a| = 1 exits 2 and points to the audit"""
        run_config_data["coefficients"] = {"kind": "constant", "value": 1}
        config_path = write_json_file(run_config_data)

        assert main(['shadow', '--config', str(config_path), '--out', str(temp_dir)]) == EXIT_CONFIG
        assert "shadowrec audit" in capsys.readouterr().err

    def test_unknown_field(self, write_json_file, run_config_data, temp_dir, capsys):
        """Configuration errors name the field"""
        run_config_data["qq"] = 1
        config_path = write_json_file(run_config_data)

        assert main(['shadow', '--config', str(config_path), '--out', str(temp_dir)]) == EXIT_CONFIG
        assert "field 'qq'" in capsys.readouterr().err

    def test_missing_config(self, temp_dir, capsys):
        assert main(['shadow', '--config', str(temp_dir / "absent.json"), '--out', str(temp_dir)]) == EXIT_CONFIG
        assert "File not found" in capsys.readouterr().err


@pytest.mark.unit
class TestVerifyCommand:
    """Test cases for the verify command"""

    @pytest.fixture
    def all_pass(self, mocker):
        def fake_verify(instance, family, tol):
            return TrialOutcome(trial=instance.trial, variant="constant_expanding", checks={'containment': True})
        return mocker.patch('shadowrec.batch.verify_instance', side_effect=fake_verify)

    def test_summary_lines(self, write_json_file, run_config_data, all_pass, capsys):
        """Statistics are printed on stdout"""
        config_path = write_json_file(run_config_data)

        assert main(['verify', '--config', str(config_path), '--trials', '3', '--workers', '2']) == EXIT_OK

        out = capsys.readouterr().out
        assert "Regime: expanding" in out
        assert "Trials: 3" in out
        assert "Passed: 3" in out
        assert "Failed: 0" in out
        assert all_pass.call_count == 3

    def test_writes_results(self, write_json_file, run_config_data, all_pass, temp_dir):
        """--out writes verify.json"""
        config_path = write_json_file(run_config_data)

        main(['verify', '--config', str(config_path), '--trials', '2', '--out', str(temp_dir)])

        data = json.loads((temp_dir / "verify.json").read_text(encoding="utf-8"))
        assert data["regime"] == "expanding"
        assert data["statistics"]["passed"] == 2
        assert set(data["results"]) == {"0", "1"}

    def test_failed_trials(self, write_json_file, run_config_data, mocker, capsys):
        """Any failed trial exits 1"""
        mocker.patch(
            'shadowrec.batch.verify_instance',
            side_effect=lambda instance, family, tol: TrialOutcome(trial=instance.trial, checks={'containment': False})
        )
        config_path = write_json_file(run_config_data)

        assert main(['verify', '--config', str(config_path), '--trials', '2']) == EXIT_FAILURE
        assert "2 of 2 trials failed" in capsys.readouterr().err

    def test_real_contracting_trials(self, write_json_file, capsys):
        """Real trials run end to end"""
        config_path = write_json_file({
            "coefficients": {"kind": "constant", "value": 0.5},
            "perturbation": {"kind": "interval", "lo": -1, "hi": 1},
            "horizon": 40,
        })

        code = main(['verify', '--config', str(config_path), '--trials', '3'])

        out = capsys.readouterr().out
        assert "Regime: contracting" in out
        assert "Trials: 3" in out
        assert code == (EXIT_OK if "Failed: 0" in out else EXIT_FAILURE)

    @pytest.mark.parametrize("extra", [['--trials', '0'], ['--workers', '0']])
    def test_invalid_counts(self, write_json_file, run_config_data, extra):
        """Trial and worker counts are at least 1"""
        config_path = write_json_file(run_config_data)
        assert main(['verify', '--config', str(config_path)] + extra) == EXIT_CONFIG

    def test_critical_law(self, write_json_file, run_config_data, capsys):
        run_config_data["coefficients"] = {"kind": "constant", "value": -1}
        config_path = write_json_file(run_config_data)

        assert main(['verify', '--config', str(config_path)]) == EXIT_CONFIG
        assert "shadowrec audit" in capsys.readouterr().err


@pytest.mark.unit
class TestAuditCommand:
    """Test cases for the audit command"""

    def test_stdout(self, capsys):
        """Without --out the table goes to stdout"""
        assert main(['audit', '--r', '1.5', '--grid', '0:4:0.5', '--horizon', '50']) == EXIT_OK

        captured = capsys.readouterr()
        lines = captured.out.splitlines()
        assert len(lines) == 11
        assert lines[-1].startswith("candidate,2,")
        assert "Bounded shadow y_0 = 2" in captured.err

    def test_unit_coefficient(self, temp_dir, capsys):
        """r = 1 over [-10, 10] stays at least 990 away"""
        code = main(['audit', '--r', '1', '--grid=-10:10:0.1', '--horizon', '1000', '--out', str(temp_dir)])

        assert code == EXIT_OK
        summary = json.loads((temp_dir / "audit.json").read_text(encoding="utf-8"))
        assert summary["min_sup"] == 990.0
        assert summary["grid_points"] == 201
        assert len((temp_dir / "audit.csv").read_text(encoding="utf-8").splitlines()) == 202
        assert "no exact orbit stays within bounded distance" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ['--r', '1.5', '--grid', '1:0:0.1', '--horizon', '10'],
        ['--r', '2', '--grid', '0:1:0.5', '--horizon', '10'],
        ['--r', '1.5', '--grid', '0:1:0.5', '--horizon', '1001'],
        ['--r', '1.5', '--grid', '0:1:0.5', '--horizon', '10', '--bound-factor', '0'],
    ])
    def test_invalid_arguments(self, argv, capsys):
        """Bad grids, r and horizons exit 2"""
        assert main(['audit'] + argv) == EXIT_CONFIG
        assert "Error:" in capsys.readouterr().err


@pytest.mark.unit
class TestHullCommand:
    """Test cases for the hull command"""

    def test_interval(self, interval_set, queries_file, capsys):
        """[1, 2] has hull [-2, 2]"""
        queries = queries_file("1.5\n")

        assert main(['hull', '--set', str(interval_set), '--queries', str(queries)]) == EXIT_OK
        assert capsys.readouterr().out.splitlines() == ["row,v_1,contained,gauge", "1,1.5,true,0.75"]

    def test_polytope(self, write_json_file, queries_file, temp_dir):
        """The cross-polytope excludes (0.8, 0.8)"""
        set_path = write_json_file(
            {"dimension": 2, "perturbation": {"kind": "polytope", "vertices": [[1, 0], [0, 1]]}},
            name="cross.json"
        )
        queries = queries_file("# x,y\n0.25,0.25\n0.8,0.8\n")

        main(['hull', '--set', str(set_path), '--queries', str(queries), '--out', str(temp_dir)])

        lines = (temp_dir / "hull.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3
        assert lines[1].split(",")[0] == "2"
        assert lines[1].split(",")[3] == "true"
        assert lines[2].split(",")[3] == "false"

    def test_empty_queries(self, interval_set, queries_file, capsys):
        """No queries gives the header only"""
        main(['hull', '--set', str(interval_set), '--queries', str(queries_file(""))])
        assert capsys.readouterr().out.splitlines() == ["row,v_1,contained,gauge"]

    def test_bad_row(self, interval_set, queries_file, capsys):
        """Malformed rows exit 2 with their row number"""
        queries = queries_file("0.5\n1,2\n")

        assert main(['hull', '--set', str(interval_set), '--queries', str(queries)]) == EXIT_CONFIG
        assert "row 2" in capsys.readouterr().err

    def test_negative_tolerance(self, interval_set, queries_file):
        queries = queries_file("0.5\n")
        assert main(['hull', '--set', str(interval_set), '--queries', str(queries), '--tol', '-1']) == EXIT_CONFIG


@pytest.mark.unit
class TestErrorHandling:
    """Test cases for exit codes of unexpected outcomes"""

    def test_keyboard_interrupt(self, mocker, capsys):
        """Ctrl-C exits 130"""
        mocker.patch.dict('shadowrec.cli.HANDLERS', {'audit': Mock(side_effect=KeyboardInterrupt)})

        assert main(['audit', '--r', '1', '--grid', '0:1:1', '--horizon', '5']) == EXIT_INTERRUPTED
        assert "Interrupted by user" in capsys.readouterr().err

    def test_unexpected_error(self, mocker, capsys):
        """Other exceptions exit 1"""
        mocker.patch.dict('shadowrec.cli.HANDLERS', {'audit': Mock(side_effect=RuntimeError("kaboom"))})

        assert main(['audit', '--r', '1', '--grid', '0:1:1', '--horizon', '5']) == EXIT_FAILURE
        assert "kaboom" in capsys.readouterr().err
