import shutil
from fractions import Fraction
from pathlib import Path

import pytest

from dejean_growth.pipeline import EXIT_OK, companion_paths
from dejean_growth.verify import verify_certificate


def copy_run(run, dest: Path):
    files = companion_paths(run.files["certificate"])
    out = companion_paths(dest / "cert.txt")
    for key in ("certificate", "graph", "omega", "counts"):
        shutil.copy(files[key], out[key])
    return out


def check(files, counts=True):
    return verify_certificate(files["certificate"], files["graph"], files["omega"],
                              files["counts"] if counts else None)


def rewrite(path, tag, index, fn):
    lines = Path(path).read_text().splitlines()
    for n, line in enumerate(lines):
        parts = line.split()
        if parts[0] == tag and (index is None or parts[1] == str(index)):
            lines[n] = fn(parts)
            break
    else:
        raise KeyError(tag)
    Path(path).write_text("\n".join(lines) + "\n")


def test_fresh_certificate_accepted(k8_run, tmp_path):
    assert k8_run.exit_code == EXIT_OK, k8_run.message
    files = copy_run(k8_run, tmp_path)
    assert check(files).ok
    assert check(files, counts=False).ok


def test_alpha_bump_rejected(k8_run, tmp_path):
    files = copy_run(k8_run, tmp_path)
    bump = lambda p: f"ALPHA {Fraction(p[1]) + Fraction(1, 10 ** 6)}"
    rewrite(files["certificate"], "ALPHA", None, bump)
    rep = check(files)
    assert not rep.ok


@pytest.mark.parametrize("which", ["first", "middle", "last"])
def test_rho_lowered_rejected(k8_run, tmp_path, which):
    files = copy_run(k8_run, tmp_path)
    rhos = [ln.split() for ln in Path(files["certificate"]).read_text().splitlines()
            if ln.startswith("RHO ")]
    pick = {"first": rhos[0], "middle": rhos[len(rhos) // 2], "last": rhos[-1]}[which]
    lower = lambda p: f"RHO {p[1]} {Fraction(p[2]) - Fraction(1, 2 ** 64)}"
    rewrite(files["certificate"], "RHO", pick[1], lower)
    rep = check(files)
    assert not rep.ok and rep.first_failure == "cascade recurrence"


def test_omega_edit_rejected(k8_run, tmp_path):
    files = copy_run(k8_run, tmp_path)
    lines = files["omega"].read_text().splitlines()
    j, kind, d, l, val = lines[5].split()
    num, den = val.split("/")
    lines[5] = f"{j} {kind} {d} {l} {int(num) - 1}/{den}"
    files["omega"].write_text("\n".join(lines) + "\n")
    rep = check(files)
    assert not rep.ok and rep.first_failure == "omega hash"


def test_base_edit_rejected(k8_run, tmp_path):
    files = copy_run(k8_run, tmp_path)
    rewrite(files["certificate"], "BASE", 55, lambda p: f"BASE 55 {Fraction(p[2]) * 2}")
    assert not check(files).ok
