import json

import pytest

from atlstar import cli


MODEL = """
agents: a b
atoms: p goal
states: s0 s1
initial: s0
final: s1
actions a: go stay
actions b: go stay
label s1: p goal
trans s0 (go,go) -> s1
trans s0 (go,stay) -> s0
trans s0 (stay,go) -> s0
trans s0 (stay,stay) -> s0
trans s1 (go,go) -> s1
trans s1 (go,stay) -> s1
trans s1 (stay,go) -> s1
trans s1 (stay,stay) -> s1
"""


@pytest.fixture
def model_file(tmp_path):
    f = tmp_path / "model.cgs"
    f.write_text(MODEL)
    return str(f)


def test_check_holds(model_file, capsys):
    rc = cli.main(["check", model_file, "<<a,b>> F goal"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_HOLDS
    assert "holds" in out


def test_check_not_holds(model_file, capsys):
    # under infinite semantics agent a cannot force goal alone, since b
    # may answer stay forever (finite semantics would be vacuously safe:
    # the play can avoid final states entirely)
    rc = cli.main(["check", model_file, "<<a>> F goal",
                   "--semantics", "infinite"])
    assert rc == cli.EXIT_NOT_HOLDS
    assert "does not hold" in capsys.readouterr().out


def test_check_json(model_file, capsys):
    rc = cli.main(["check", model_file, "<<a,b>> F goal", "--json"])
    assert rc == cli.EXIT_HOLDS
    data = json.loads(capsys.readouterr().out)
    assert data["holds"] is True
    assert data["state_names"] == ["s0", "s1"]


def test_parse_error_is_usage(model_file, capsys):
    rc = cli.main(["check", model_file, "<<a>> F ("])
    assert rc == cli.EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_missing_model_is_usage(tmp_path, capsys):
    rc = cli.main(["check", str(tmp_path / "nope.cgs"), "<<a>> F goal"])
    assert rc == cli.EXIT_USAGE


def test_bad_subcommand_is_usage(capsys):
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE


def test_config_defaults_and_flag_override(model_file, tmp_path, capsys):
    cfg = tmp_path / "atlstar.cfg"
    cfg.write_text("# defaults\nsemantics=infinite\nengine=explicit\n")
    rc = cli.main(["check", model_file, "<<a,b>> F goal", "--config",
                   str(cfg), "--json"])
    data = json.loads(capsys.readouterr().out)
    assert rc == cli.EXIT_HOLDS
    assert data["semantics"] == "infinite"
    assert data["engine"] == "explicit"
    # a flag wins over the config value
    rc = cli.main(["check", model_file, "<<a,b>> F goal", "--config",
                   str(cfg), "--semantics", "finite", "--json"])
    data = json.loads(capsys.readouterr().out)
    assert data["semantics"] == "finite"


def test_bad_config_line(model_file, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this is not a pair\n")
    rc = cli.main(["check", model_file, "<<a,b>> F goal", "--config",
                   str(cfg)])
    assert rc == cli.EXIT_USAGE


def test_gen_round_trip(tmp_path, capsys):
    out = tmp_path / "counter.cgs"
    rc = cli.main(["gen", "counter", "--param", "cap=1", "--param",
                   "steps=1", "-o", str(out)])
    assert rc == 0
    rc = cli.main(["check", str(out), "<<a1,a2>> F counter_max"])
    assert rc == cli.EXIT_HOLDS


def test_gen_to_stdout(capsys):
    rc = cli.main(["gen", "counter", "--param", "cap=1", "--param",
                   "steps=1"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("agents: a1 a2")


def test_gen_bad_param(capsys):
    assert cli.main(["gen", "counter", "--param", "nope"]) == \
        cli.EXIT_USAGE
    assert cli.main(["gen", "counter", "--param", "bogus=1"]) == \
        cli.EXIT_USAGE


def test_suite_command(tmp_path, capsys):
    suite = tmp_path / "suite.txt"
    suite.write_text(
        'generator=counter params cap=1;steps=1 '
        'formula="<<a1,a2>> F counter_max"\n')
    csv_path = tmp_path / "r.csv"
    rc = cli.main(["suite", str(suite), "--csv", str(csv_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "holds" in out
    assert csv_path.exists()


def test_suite_with_error_row(tmp_path, capsys):
    suite = tmp_path / "suite.txt"
    suite.write_text('generator=bogus formula="<<a>> F p"\n')
    rc = cli.main(["suite", str(suite)])
    assert rc == cli.EXIT_USAGE


def test_solve_game(tmp_path, capsys):
    game = tmp_path / "game.gm"
    # self-loop with even priority: player 0 wins everywhere
    game.write_text("parity 1;\n0 0 0 1;\n1 1 1 0;\n")
    rc = cli.main(["solve-game", str(game)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "W0: 0 1" in out
    assert "W1:" in out


def test_solve_game_malformed(tmp_path, capsys):
    game = tmp_path / "game.gm"
    game.write_text("parity 0;\n0 0;\n")
    rc = cli.main(["solve-game", str(game)])
    assert rc == cli.EXIT_USAGE
