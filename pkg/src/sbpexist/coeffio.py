"""Reading and writing closure coefficient files.

Two plain-text files describe an operator at h = 1.  ``P_s_t_r.txt`` holds
rows ``i v`` with the boundary norm weight of node ``i``; ``D_s_t_r.txt``
holds rows ``i j v`` for the nonzero entries of the top-left ``r x (r+s)``
block of the derivative.  The bottom closure follows by symmetry.  Values are
decimals with 17 significant digits, or exact ``p/q`` tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .construct import AssembledOperator, Representation, assemble_from_corner
from .existence import SbpParameters
from .ratlinalg import format_rational

_NAME = re.compile(r"^[PD]_(\d+)_(\d+)_(\d+)\.txt$")


def format_value(v, exact: bool) -> str:
    if exact:
        return format_rational(Fraction(v))
    return format(float(v), ".17g")


def file_names(params: SbpParameters) -> tuple[str, str]:
    tag = f"{params.s}_{params.t}_{params.r}"
    return f"P_{tag}.txt", f"D_{tag}.txt"


def params_from_name(path: str | Path) -> SbpParameters:
    m = _NAME.match(Path(path).name)
    if not m:
        raise ValueError(f"cannot read (s, t, r) from file name {Path(path).name!r}")
    return SbpParameters(*map(int, m.groups()))


def render_P(weights: Sequence, exact: bool = False) -> str:
    return "".join(f"{i} {format_value(v, exact)}\n" for i, v in enumerate(weights))


def render_D(corner: Sequence[Sequence], exact: bool = False) -> str:
    lines = []
    for i, row in enumerate(corner):
        for j, v in enumerate(row):
            if v != 0:
                lines.append(f"{i} {j} {format_value(v, exact)}\n")
    return "".join(lines)


@dataclass(frozen=True)
class CoefficientFileSet:
    p_file: Path
    d_file: Path
    params: SbpParameters


def write_files(
    params: SbpParameters,
    weights: Sequence,
    corner: Sequence[Sequence],
    out_dir: str | Path = ".",
    exact: bool = False,
) -> CoefficientFileSet:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p_name, d_name = file_names(params)
    p_path, d_path = out_dir / p_name, out_dir / d_name
    p_path.write_text(render_P(weights, exact))
    d_path.write_text(render_D(corner, exact))
    return CoefficientFileSet(p_path, d_path, params)


def _rows(path: Path, width: int) -> list[list[str]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(parts)}")
        out.append(parts)
    return out


def read_files(
    p_file: str | Path, d_file: str | Path, params: SbpParameters | None = None
) -> tuple[SbpParameters, list[Fraction], list[list[Fraction]]]:
    """Parse both files; values come back as exact Fractions (decimal tokens
    are read as the decimal they spell)."""
    if params is None:
        params = params_from_name(p_file)
    r, s = params.r, params.s
    weights: list[Fraction | None] = [None] * r
    for i, v in _rows(Path(p_file), 2):
        i = int(i)
        if not 0 <= i < r:
            raise ValueError(f"norm index {i} outside 0..{r - 1}")
        weights[i] = Fraction(v)
    if any(w is None for w in weights):
        raise ValueError("norm file does not list every boundary weight")
    corner = [[Fraction(0)] * (r + s) for _ in range(r)]
    for i, j, v in _rows(Path(d_file), 3):
        i, j = int(i), int(j)
        if not (0 <= i < r and 0 <= j < r + s):
            raise ValueError(f"derivative entry ({i}, {j}) outside the {r}x{r + s} block")
        corner[i][j] = Fraction(v)
    return params, weights, corner


def load_operator(
    p_file: str | Path,
    d_file: str | Path,
    n: int | None = None,
    h=None,
    mode: Representation | str = Representation.EXACT,
    params: SbpParameters | None = None,
) -> AssembledOperator:
    params, weights, corner = read_files(p_file, d_file, params)
    return assemble_from_corner(params, weights, corner, n=n, h=h, mode=mode)
