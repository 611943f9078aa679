import pytest

from sbgnp.cli import main, matched_generations, parse_config_text, resolve_config, UsageError
from sbgnp.evolution import EvolutionConfig, Variant


def _cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_search_space_output(capsys):
    assert main(["search-space"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["log10 = 67.1030", "situation-based log10 = 67.5801 (NA=3)"]


def test_search_space_exact_and_errors(capsys):
    assert main(["search-space", "--exact", "--ps", "1", "--nj", "1", "--np", "1", "--nb", "2",
                 "--na", "2"]) == 0
    out = capsys.readouterr().out
    assert "log10 = 0.9542\n" in out
    assert "\nsize = 9\nsituation-based size = 18\n" in out
    assert main(["search-space", "--ps", "0"]) == 2
    assert main(["search-space", "--exact", "--nb", "5/4"]) == 2


def test_validate_map(tmp_path, capsys):
    assert main(["validate-map", _cfg(tmp_path, ">T.\n..H\n", "ok.map")]) == 0
    assert capsys.readouterr().out.strip() == "3x2, agents=1, tiles=1, holes=1"
    assert main(["validate-map", _cfg(tmp_path, ">T.\n...\n", "bad.map")]) == 1
    assert "no holes" in capsys.readouterr().err
    assert main(["validate-map", str(tmp_path / "missing.map")]) == 1


def test_config_parsing():
    values = parse_config_text("# comment\nmap = env_a  # trailing\n\nruns=3\n")
    assert values == {"map": "env_a", "runs": "3"}
    with pytest.raises(UsageError, match="line 1"):
        parse_config_text("map env_a")
    with pytest.raises(UsageError, match="unknown key: colour"):
        resolve_config({"map": "env_a", "colour": "red"})
    with pytest.raises(UsageError, match="missing key: map"):
        resolve_config({})
    with pytest.raises(UsageError, match="bad value for runs"):
        resolve_config({"map": "env_a", "runs": "many"})
    with pytest.raises(UsageError, match="variant"):
        resolve_config({"map": "env_a", "variant": "gp"})
    cfg = resolve_config({"map": "env_a", "w3": "2.5"})
    assert cfg["map"].endswith("env_a.map") and cfg["w3"] == 2.5 and cfg["group_count"] is None


def test_map_relative_to_config_dir(tmp_path, capsys):
    (tmp_path / "tiny.map").write_text(">TH\n")
    cfg = _cfg(tmp_path, "map = tiny.map\nruns = 1\ngenerations = 1\ngroup_count = 4\n"
                         f"out_dir = {tmp_path / 'res'}\n")
    assert main(["run", "--config", cfg, "--variant", "gnp"]) == 0
    assert "variant=gnp groups=4 generations=1 n=1 mean=179.0" in capsys.readouterr().out
    assert (tmp_path / "res" / "runs.csv").exists()


def test_run_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", _cfg(tmp_path, "runs = 2\n")]) == 2
    assert "missing key: map" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert main(["run", "--set", "map=" + str(tmp_path / "nope.map")]) == 1
    assert main(["run", "--set", "map=env_a", "--set", "elite_count=50",
                 "--set", "group_count=10"]) == 2
    assert main(["run", "--set", "map=env_a", "--set", "num_agents=2"]) == 2
    assert main([]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--variant", "nope"])
    assert exc.value.code == 2


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    args = ["run", "--set", "map=env_b", "--set", "runs=2", "--set", "generations=3",
            "--set", "group_count=6", "--seed", "9", "--out", str(out)]
    assert main(args) == 0
    assert (out / "runs.csv").read_text().splitlines()[0] == "run,seed,final_best,success"
    assert [l.split(",")[1] for l in (out / "runs.csv").read_text().splitlines()[1:]] == ["9", "10"]
    assert (out / "curve.csv").read_text().startswith("evaluations,mean_best,run0,run1\n6,")
    best = (out / "best_group.txt").read_text()
    assert best.count("# member") == 3
    assert "\n0 0 - 0 | " in best


def test_compare_and_curve(tmp_path, capsys):
    out = tmp_path / "cmp"
    args = ["compare", "--set", "map=env_b", "--set", "runs=2", "--set", "generations=2",
            "--set", "population_size=12", "--out", str(out)]
    assert main(args) == 0
    printed = capsys.readouterr().out
    # 12 shared groups x 2 generations = 24 evaluations; 4 per-agent groups need 6
    assert "SB-GNP: groups=4 generations=6" in printed
    rows = (out / "compare.csv").read_text().splitlines()
    assert rows[0] == "algorithm,rank,mean,std,successes,p_value_vs_proposed"
    assert sorted(int(r.split(",")[1]) for r in rows[1:]) == [1, 2, 3, 4]
    assert [r.split(",")[0] for r in rows[1:]] == ["GNP", "GNP_simplified", "SB-GNP", "Proposed"]
    first = (out / "compare.csv").read_bytes()
    assert main(args) == 0
    assert (out / "compare.csv").read_bytes() == first

    merged = tmp_path / "merged"
    assert main(["curve", str(out / "gnp"), str(out / "proposed" / "curve.csv"),
                 "--out", str(merged)]) == 0
    header = (merged / "curve.csv").read_text().splitlines()[0]
    assert header == "evaluations,mean_best,gnp/run0,gnp/run1,proposed/run0,proposed/run1"
    assert main(["curve", str(tmp_path / "nothing")]) == 1


def test_matched_generations():
    gnp = EvolutionConfig(Variant.GNP, generations=150)
    assert matched_generations(gnp, EvolutionConfig(Variant.PROPOSED)) == 455
    assert matched_generations(gnp, gnp) == 150


def test_kernel_info(capsys):
    assert main(["--kernel-info"]) == 0
    assert capsys.readouterr().out.startswith("kernel: ")
