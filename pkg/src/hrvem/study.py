"""Convergence studies: configuration, per-family tables, summary and plots.

A configuration file holds ``key = value`` lines.  Blank lines and ``#``
comments are ignored, lists use brackets, strings may be bare or quoted::

    test = a
    families = [QuadS, TriS, PolyU, ConcQuadS]
    k = 1
    levels = [4, 8, 16, 32]
    seed = 0
    out_dir = results/test_a_k1
    tol = 1e-10
    exact_threshold = 1e-10
    timing = false
    expect_min_rate = 1.8
    expect_exact = [E_sigma_div]
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import EXACT, LevelResult, fit_rate, make_test, run_level
from .mesh import MeshFamily, generate_mesh

log = logging.getLogger(__name__)

NORMS = ("E_sigma", "E_sigma_div", "E_u")
CSV_COLUMNS = ("n", "h_bar_e", "E_sigma", "E_sigma_div", "E_u", "N_dofs", "seconds", "error")
# scale used to decide whether an error norm is at machine precision
_NORM_SCALE = {"E_sigma": "sigma_norm", "E_sigma_div": "f_norm", "E_u": None}


class ConfigError(ValueError):
    """Invalid study configuration."""


@dataclass(frozen=True)
class StudyConfig:
    test: str
    families: tuple[str, ...]
    k: int
    levels: tuple[int, ...]
    seed: int = 0
    out_dir: Path = Path("results")
    tol: float = 1e-10
    exact_threshold: float = 1e-10
    timing: bool = False
    expect_min_rate: float | None = None
    expect_exact: tuple[str, ...] = ()

    def __post_init__(self):
        if self.test not in ("a", "b", "c"):
            raise ConfigError(f"test must be one of a, b, c (got {self.test!r})")
        if not self.families:
            raise ConfigError("families must not be empty")
        valid = {f.value for f in MeshFamily}
        bad = [f for f in self.families if f not in valid]
        if bad:
            raise ConfigError(f"unknown families {bad}; choose from {sorted(valid)}")
        if len(set(self.families)) != len(self.families):
            raise ConfigError("families must not repeat")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"k must be an integer >= 1 (got {self.k!r})")
        if not self.levels:
            raise ConfigError("levels must not be empty")
        if any(isinstance(n, bool) or not isinstance(n, int) or n < 2 for n in self.levels):
            raise ConfigError(f"levels must be integers >= 2 (got {list(self.levels)})")
        if len(set(self.levels)) != len(self.levels):
            raise ConfigError("levels must not repeat")
        if not (self.tol > 0 and self.exact_threshold > 0):
            raise ConfigError("tolerances must be positive")
        bad = [x for x in self.expect_exact if x not in NORMS]
        if bad:
            raise ConfigError(f"unknown norms in expect_exact: {bad}")


def _scalar(text: str):
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def _value(text: str):
    t = text.strip()
    if t.startswith("["):
        if not t.endswith("]"):
            raise ConfigError(f"unterminated list: {t}")
        body = t[1:-1].strip()
        return [] if not body else [_scalar(x) for x in body.split(",")]
    return _scalar(t)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of Python values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _value(val)
    return out


_KEYS = {"test", "families", "k", "levels", "seed", "out_dir", "tol", "exact_threshold",
         "timing", "expect_min_rate", "expect_exact"}


def _as_tuple(v):
    return tuple(v) if isinstance(v, list) else (v,)


def config_from_dict(d: dict, base: Path | None = None) -> StudyConfig:
    unknown = set(d) - _KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    missing = {"test", "families", "k", "levels"} - set(d)
    if missing:
        raise ConfigError(f"missing keys {sorted(missing)}")
    kw = dict(d)
    kw["test"] = str(kw["test"])
    kw["families"] = tuple(str(f) for f in _as_tuple(kw["families"]))
    kw["levels"] = _as_tuple(kw["levels"])
    kw["expect_exact"] = tuple(str(x) for x in _as_tuple(kw.get("expect_exact", [])))
    if "out_dir" in kw:
        p = Path(str(kw["out_dir"]))
        kw["out_dir"] = p if p.is_absolute() or base is None else base / p
    for key in ("tol", "exact_threshold", "expect_min_rate"):
        if key in kw and (isinstance(kw[key], bool) or not isinstance(kw[key], (int, float))):
            raise ConfigError(f"{key} must be a number")
    if "seed" in kw and (isinstance(kw["seed"], bool) or not isinstance(kw["seed"], int)):
        raise ConfigError("seed must be an integer")
    if "timing" in kw and not isinstance(kw["timing"], bool):
        raise ConfigError("timing must be true or false")
    return StudyConfig(**kw)


def load_config(path) -> StudyConfig:
    """Read a configuration file; relative ``out_dir`` resolves against its folder."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return config_from_dict(parse_config_text(text), base=path.parent)


# ----------------------------------------------------------------------
# running


@dataclass
class FamilyResult:
    family: str
    levels: list[LevelResult] = field(default_factory=list)
    error: str | None = None
    failed_n: int | None = None

    def rates(self, threshold: float) -> dict:
        return {norm: norm_rate(self.levels, norm, threshold) for norm in NORMS}


def is_exact(level: LevelResult, norm: str, threshold: float) -> bool:
    scale_attr = _NORM_SCALE[norm]
    scale = getattr(level, scale_attr) if scale_attr else 0.0
    scale = 0.0 if not math.isfinite(scale) else scale
    return getattr(level, norm) <= threshold * (1.0 + scale)


def norm_rate(levels: list[LevelResult], norm: str, threshold: float):
    """Fitted slope of one norm, or EXACT when every level is at machine precision."""
    if len(levels) < 2:
        return math.nan
    if all(is_exact(r, norm, threshold) for r in levels):
        return EXACT
    kept = [(r.h_bar_e, getattr(r, norm)) for r in levels if not is_exact(r, norm, threshold)]
    if len(kept) < 2:
        return math.nan
    return fit_rate(kept, threshold=0.0)


@dataclass
class StudyReport:
    config: StudyConfig
    families: list[FamilyResult]
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def run_family(config: StudyConfig, family: str) -> FamilyResult:
    sol = make_test(config.test)
    out = FamilyResult(family)
    for n in sorted(config.levels):
        try:
            mesh = generate_mesh(family, n, seed=config.seed)
            out.levels.append(run_level(mesh, sol, config.k, n, tol=config.tol))
        except Exception as exc:  # recorded in the table, family aborted
            log.error("%s n=%d failed: %s", family, n, exc)
            out.error, out.failed_n = f"{type(exc).__name__}: {exc}", n
            break
        log.info("%s n=%d done", family, n)
    return out


def check_expectations(config: StudyConfig, results: list[FamilyResult]) -> list[str]:
    failures = []
    for fr in results:
        if fr.error:
            failures.append(f"{fr.family}: aborted at n={fr.failed_n} ({fr.error})")
        rates = fr.rates(config.exact_threshold)
        for norm in config.expect_exact:
            if rates[norm] != EXACT:
                failures.append(f"{fr.family}: {norm} expected exact, rate {_fmt_rate(rates[norm])}")
        if config.expect_min_rate is not None:
            for norm, r in rates.items():
                if r == EXACT:
                    continue
                if not (r >= config.expect_min_rate):
                    failures.append(f"{fr.family}: {norm} rate {_fmt_rate(r)} below {config.expect_min_rate}")
    return failures


def run_study(config: StudyConfig) -> StudyReport:
    """Run every family and write tables, summary and plots to ``config.out_dir``."""
    results = [run_family(config, fam) for fam in config.families]
    report = StudyReport(config, results, check_expectations(config, results))
    write_outputs(report)
    return report


# ----------------------------------------------------------------------
# output


def _g(x: float) -> str:
    return "%.17g" % x


def _fmt_rate(r) -> str:
    return r if r == EXACT else ("nan" if math.isnan(r) else f"{r:.3f}")


def family_csv(fr: FamilyResult, timing: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for r in fr.levels:
        w.writerow([r.n, _g(r.h_bar_e), _g(r.E_sigma), _g(r.E_sigma_div), _g(r.E_u),
                    r.n_dofs, _g(r.seconds) if timing else "", ""])
    if fr.error:
        w.writerow([fr.failed_n, "", "", "", "", "", "", fr.error])
    return buf.getvalue()


def read_family_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_markdown(report: StudyReport) -> str:
    c = report.config
    lines = [f"# Convergence study: test {c.test}, k = {c.k}", "",
             f"Levels: {', '.join(map(str, sorted(c.levels)))}; mesh seed {c.seed}; "
             f"exactness threshold {c.exact_threshold:g} (relative).", "",
             "| family | " + " | ".join(f"rate {n}" for n in NORMS) + " | status |",
             "|---" * (len(NORMS) + 2) + "|"]
    for fr in report.families:
        rates = fr.rates(c.exact_threshold)
        status = f"aborted at n={fr.failed_n}" if fr.error else "ok"
        lines.append(f"| {fr.family} | " + " | ".join(_fmt_rate(rates[n]) for n in NORMS)
                     + f" | {status} |")
    lines.append("")
    if c.expect_min_rate is not None or c.expect_exact:
        lines.append("## Expectations")
        lines.append("")
        if report.failures:
            lines.extend(f"- FAIL {f}" for f in report.failures)
        else:
            lines.append("- all expectations met")
        lines.append("")
    return "\n".join(lines)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
_MARKERS = ("circle", "square", "diamond", "triangle")


def _marker(kind: str, x: float, y: float, color: str) -> str:
    s = 4.0
    if kind == "circle":
        return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{s:.1f}" fill="{color}"/>'
    if kind == "square":
        return f'<rect x="{x - s:.2f}" y="{y - s:.2f}" width="{2 * s:.1f}" height="{2 * s:.1f}" fill="{color}"/>'
    if kind == "diamond":
        pts = f"{x:.2f},{y - s:.2f} {x + s:.2f},{y:.2f} {x:.2f},{y + s:.2f} {x - s:.2f},{y:.2f}"
    else:
        pts = f"{x:.2f},{y - s:.2f} {x + s:.2f},{y + s:.2f} {x - s:.2f},{y + s:.2f}"
    return f'<polygon points="{pts}" fill="{color}"/>'


def svg_plot(series: dict[str, list[tuple[float, float]]], title: str, slope: int) -> str:
    """Self-contained log-log plot of error against mean edge length.

    Each point is stored in ``data-h``/``data-e`` attributes with the exact
    values it was drawn from.
    """
    W, H, L, R, T, B = 560, 420, 80, 150, 40, 60
    pts = [(h, e) for s in series.values() for h, e in s if h > 0 and e > 0]
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">\n<rect width="{W}" height="{H}" fill="white"/>\n'
            f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
            f'font-size="14">{title}</text>\n')
    if not pts:
        return head + '<text x="40" y="200" font-family="sans-serif">no data</text>\n</svg>\n'
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    x0, x1 = math.floor(lx.min() - 0.05), math.ceil(lx.max() + 0.05)
    y0, y1 = math.floor(ly.min()), math.ceil(ly.max())
    if y1 == y0:
        y1 += 1

    def X(h):
        return L + (math.log10(h) - x0) / (x1 - x0) * (W - L - R)

    def Y(e):
        return T + (y1 - math.log10(e)) / (y1 - y0) * (H - T - B)

    out = [head, f'<rect x="{L}" y="{T}" width="{W - L - R}" height="{H - T - B}" '
                 'fill="none" stroke="black"/>\n']
    for d in range(x0, x1 + 1):
        out.append(f'<text x="{X(10.0 ** d):.2f}" y="{H - B + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">1e{d}</text>\n')
    ystep = max(1, (y1 - y0) // 8)
    for d in range(y0, y1 + 1, ystep):
        out.append(f'<line x1="{L}" y1="{Y(10.0 ** d):.2f}" x2="{W - R}" y2="{Y(10.0 ** d):.2f}" '
                   'stroke="#dddddd"/>\n')
        out.append(f'<text x="{L - 6}" y="{Y(10.0 ** d) + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">1e{d}</text>\n')
    out.append(f'<text x="{(L + W - R) / 2:.1f}" y="{H - 15}" text-anchor="middle" '
               'font-family="sans-serif" font-size="12">mean edge length</text>\n')
    for i, (name, s) in enumerate(series.items()):
        color, mark = _COLORS[i % len(_COLORS)], _MARKERS[i % len(_MARKERS)]
        good = [(h, e) for h, e in s if h > 0 and e > 0]
        if len(good) > 1:
            path = " ".join(f"{X(h):.2f},{Y(e):.2f}" for h, e in good)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>\n')
        for h, e in good:
            out.append(f'<g class="point" data-family="{name}" data-h="{_g(h)}" data-e="{_g(e)}">'
                       f'{_marker(mark, X(h), Y(e), color)}</g>\n')
        ly_ = T + 16 * i + 10
        out.append(f'{_marker(mark, W - R + 16, ly_, color)}<text x="{W - R + 26}" y="{ly_ + 4}" '
                   f'font-family="sans-serif" font-size="11">{name}</text>\n')
    # reference triangle of the expected slope in the empty lower-right corner
    span = max(lx.max() - lx.min(), 0.4)
    hx2 = 10.0 ** lx.max()
    hx = hx2 / 10.0 ** (0.3 * span)
    ey = 10.0 ** max(ly.min(), y0 + 0.05 * (y1 - y0))
    ey2 = ey * (hx2 / hx) ** slope
    if Y(ey2) < T:
        shift = 10.0 ** (math.log10(ey2) - y1)
        ey, ey2 = ey / shift, ey2 / shift
    out.append(f'<polygon class="slope" points="{X(hx):.2f},{Y(ey):.2f} {X(hx2):.2f},{Y(ey):.2f} '
               f'{X(hx2):.2f},{Y(ey2):.2f}" fill="none" stroke="black"/>\n')
    out.append(f'<text x="{X(hx2) + 5:.2f}" y="{(Y(ey) + Y(ey2)) / 2:.2f}" font-family="sans-serif" '
               f'font-size="11">{slope}</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def write_outputs(report: StudyReport) -> list[Path]:
    c = report.config
    out_dir = Path(c.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"test{c.test}_k{c.k}"
    written = []
    for fr in report.families:
        p = out_dir / f"{stem}_{fr.family}.csv"
        p.write_bytes(family_csv(fr, c.timing).encode())
        written.append(p)
    p = out_dir / f"{stem}_summary.md"
    p.write_text(summary_markdown(report))
    written.append(p)
    for norm in NORMS:
        series = {fr.family: [(r.h_bar_e, getattr(r, norm)) for r in fr.levels]
                  for fr in report.families}
        p = out_dir / f"{stem}_{norm}.svg"
        p.write_text(svg_plot(series, f"test {c.test}, k = {c.k}: {norm}", c.k + 1))
        written.append(p)
    return written


def with_overrides(config: StudyConfig, **kw) -> StudyConfig:
    """Copy of ``config`` with the non-None keyword values replaced."""
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(config, **kw) if kw else config
