import itertools
import math
from fractions import Fraction

import pytest

from bmlearn.cli import main, parse_class_text
from bmlearn.classes import ThresholdClass
from bmlearn.errors import InputError
from bmlearn.oracle import parse_verdict, verdict_problems


@pytest.fixture(autouse=True)
def one_worker(monkeypatch):
    monkeypatch.setenv("BML_WORKERS", "1")


def class_file(tmp_path, text, name="c.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_class_file_format():
    spec = parse_class_text("# comment\nkind = equal-piece\nn = 16  # grid\np = 1/4\n")
    assert (spec.kind, spec.n, spec.p, spec.seed_class) == ("equal-piece", 16, Fraction(1, 4), 0)
    for bad in ("kind = threshold", "kind threshold\nn = 3", "kind = circle\nn = 3",
                "kind = threshold\nn = 3\nn = 4", "kind = equal-piece\nn = 8",
                "kind = threshold\nn = x", "kind = threshold\nn = 3\ncolour = red"):
        with pytest.raises(InputError):
            parse_class_text(bad)


def test_learn_exit_codes(tmp_path, capsys):
    th = class_file(tmp_path, "kind = threshold\nn = 64\n")
    ok = ("learn", "--class", th, "--learner", "threshold", "--epsilon", "1/10", "--trials", "20")
    assert run(capsys, *ok)[0] == 0
    # an impossible acceptance distance misses the threshold
    assert run(capsys, *ok, "--accept-distance", "0", "--min-success", "1")[0] == 1
    assert run(capsys, *ok[:-1], "0")[0] == 2
    assert run(capsys, *ok, "--epsilon", "2")[0] == 2
    assert run(capsys, *ok, "--noise", "1/2")[0] == 2
    assert run(capsys, "learn", "--class", str(tmp_path / "missing.txt"), "--learner", "threshold",
               "--epsilon", "1/10")[0] == 2
    bad = class_file(tmp_path, "kind = threshold\nn = -3\n", "bad.txt")
    assert run(capsys, "learn", "--class", bad, "--learner", "threshold", "--epsilon", "1/10")[0] == 2
    assert run(capsys, "learn", "--class", th, "--learner", "general", "--epsilon", "1/10")[0] == 2
    assert run(capsys, "learn", "--class", th, "--learner", "decision-list",
               "--epsilon", "1/10")[0] == 2
    assert run(capsys, "learn", "--class", th)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2


def test_csv_layout_and_determinism(tmp_path, capsys):
    th = class_file(tmp_path, "kind = threshold\nn = 256\n")
    argv = ("learn", "--class", th, "--learner", "threshold", "--epsilon", "1/20",
            "--trials", "12", "--seed", "5")
    code, first, err = run(capsys, *argv)
    assert code == 0 and "success rate" in err and "median samples" in err
    _, second, _ = run(capsys, *argv)
    assert first == second
    lines = first.splitlines()
    assert lines[0] == "trial,seed,samples,bits_semantic,bits_physical,distance_num,distance_den,success,ms"
    assert len(lines) == 13
    row = lines[1].split(",")
    assert row[0] == "0" and row[1] == "5" and row[-1] == ""
    out = tmp_path / "o.csv"
    run(capsys, *argv, "--out", str(out))
    assert out.read_text(encoding="utf-8") == first


def test_parallel_workers_give_the_same_csv(tmp_path, capsys, monkeypatch):
    th = class_file(tmp_path, "kind = threshold\nn = 128\n")
    argv = ("learn", "--class", th, "--learner", "threshold", "--epsilon", "1/10", "--trials", "8")
    _, serial, _ = run(capsys, *argv)
    monkeypatch.setenv("BML_WORKERS", "3")
    _, parallel, _ = run(capsys, *argv)
    assert serial == parallel


def test_noise_inflates_auto_k(tmp_path, capsys):
    th = class_file(tmp_path, "kind = threshold\nn = 16\n")
    argv = ("learn", "--class", th, "--learner", "general", "--epsilon", "1/4", "--alpha", "3/10",
            "--trials", "2")
    _, _, err = run(capsys, *argv)
    assert "k=2533 (auto)" in err
    _, _, err = run(capsys, *argv, "--noise", "1/10")
    assert f"k={math.ceil(2533 * 1.5625)} (auto 2533, noise-inflated by 1.5625)" in err


def test_check_separability_verified(tmp_path, capsys):
    th = class_file(tmp_path, "kind = threshold\nn = 6\n")
    log = tmp_path / "w.log"
    code, out, _ = run(capsys, "check-separability", "--class", th, "--alpha", "0.3",
                       "--epsilon", "0.3", "--log", str(log))
    assert code == 0 and out.strip() == "verified"
    c = ThresholdClass(6)
    lines = log.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2**7 - 1 + 1
    for line in lines[:-1]:
        assert not verdict_problems(c, parse_verdict(line), Fraction(3, 10), Fraction(3, 10))


def test_check_separability_log_is_consistent_above_one_third(tmp_path, capsys):
    th = class_file(tmp_path, "kind = threshold\nn = 6\n")
    code, out, _ = run(capsys, "check-separability", "--class", th, "--alpha", "0.34",
                       "--epsilon", "0.05")
    c = ThresholdClass(6)
    lines = out.splitlines()
    for line in lines[:-1]:
        assert not verdict_problems(c, parse_verdict(line), Fraction(34, 100), Fraction(1, 20))
    assert code == (1 if lines[-1].startswith("counterexample") else 0)


def test_check_separability_sampled_decision_lists(tmp_path, capsys):
    dl = class_file(tmp_path, "kind = decision-list\nn = 3\n")
    alpha = Fraction(1, 200 * 3**4)
    code, out, _ = run(capsys, "check-separability", "--class", dl, "--alpha", str(alpha),
                       "--epsilon", "1/10", "--mode", "sampled", "--budget", "20", "--seed", "1")
    assert code == 0
    assert "evidence, not proof" in out.splitlines()[-1]


def test_check_separability_caps(tmp_path, capsys):
    big = class_file(tmp_path, "kind = threshold\nn = 30\n")
    assert run(capsys, "check-separability", "--class", big, "--alpha", "0.3",
               "--epsilon", "0.1")[0] == 2
    assert run(capsys, "check-separability", "--class", big, "--alpha", "0",
               "--epsilon", "0.1", "--mode", "sampled")[0] == 2


def test_class_info(tmp_path, capsys):
    code, out, _ = run(capsys, "class-info", "--class", class_file(tmp_path, "kind = threshold\nn = 8\n"))
    assert code == 0 and "|H| = 9" in out and "|X| = 8" in out
    _, out, _ = run(capsys, "class-info", "--class",
                    class_file(tmp_path, "kind = decision-list\nn = 3\n", "dl.txt"))
    assert "|H| = 384" in out
    assert f"bound n log2 n + 2n = {3 * math.log2(3) + 6:.4f}" in out
    _, out, _ = run(capsys, "class-info", "--class",
                    class_file(tmp_path, "kind = equal-piece\nn = 8\np = 1/2\n", "ep.txt"))
    assert f"|H| = {count_pieces(8, Fraction(1, 2))}" in out
    assert run(capsys, "class-info", "--class", class_file(tmp_path, "n = 3\n", "x.txt"))[0] == 2


def count_pieces(n, p):
    """Count start sets by brute force over subsets of the grid."""
    total = 0
    grid = [Fraction(s, n) for s in range(n)]
    for r in range(n + 1):
        for starts in itertools.combinations(grid, r):
            if all(a + p < b for a, b in zip(starts, starts[1:])) and (not starts or starts[-1] + p < 1):
                total += 1
    return total


def test_independent_piece_counter_agrees_beyond_the_cli_example():
    from bmlearn.classes import EqualPieceClass

    for n, p in [(8, Fraction(1, 2)), (10, Fraction(1, 4)), (12, Fraction(1, 6)), (9, Fraction(1, 3))]:
        assert EqualPieceClass(n, p).count == count_pieces(n, p)
