"""Command-line harness for the convergence and stability studies.

Example:
    oldroyd-study --study spatial --example 1 --element p2p0 \
        --levels 8,16,32 --k-rule h2 --T 1 --mu 1 --gamma 0.1 --delta 0.1 \
        --out table.csv

A plain key=value config file can seed any flag (--config study.cfg);
explicit flags override file entries.
"""

import argparse
import sys
from pathlib import Path

from .study import (
    LongtimeResult,
    StudyConfig,
    StudyError,
    run_study,
    write_csv,
)


def _parse_levels(text):
    return tuple(int(v) for v in str(text).split(",") if v != "")


def _parse_one_float(v):
    if "/" in v:
        num, den = v.split("/", 1)
        return float(num) / float(den)
    return float(v)


def _parse_floats(text):
    return tuple(_parse_one_float(v) for v in str(text).split(",") if v != "")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="oldroyd-study",
        description="Convergence and stability studies for the memory-damped "
                    "flow solver (unit square, MINI or P2-P0 elements).",
    )
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--study", choices=["spatial", "temporal", "longtime", "stability"])
    p.add_argument("--example", type=int, choices=[1, 2])
    p.add_argument("--element", choices=["p2p0", "mini"])
    p.add_argument("--levels", help="comma list of mesh subdivisions, e.g. 8,16,32")
    p.add_argument("--k-rule", dest="k_rule",
                   help="h2 | sqrt | list=k1,k2,... (explicit time steps)")
    p.add_argument("--T", help="final time; comma list for the longtime study")
    p.add_argument("--mu", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--picard-tol", dest="picard_tol", type=float)
    p.add_argument("--picard-max", dest="picard_max", type=int)
    return p


def _read_config_file(path):
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise StudyError(f"bad config line (want key=value): {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


_DEFAULTS = dict(
    study=None, example=1, element="p2p0", levels="8,16,32", k_rule="h2",
    T="1", mu=1.0, gamma=0.1, delta=0.1, out=None,
    picard_tol=1e-10, picard_max=50,
)


def _merge(args) -> dict:
    merged = dict(_DEFAULTS)
    if args.config:
        merged.update(_read_config_file(args.config))
    for key in merged:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            merged[key] = cli_val
    return merged


def config_from_args(args) -> StudyConfig:
    m = _merge(args)
    if not m["study"]:
        raise StudyError("--study is required (spatial|temporal|longtime|stability)")
    k_rule = str(m["k_rule"])
    k_list = ()
    if k_rule.startswith(("list=", "sqrt=")):
        k_list = _parse_floats(k_rule.split("=", 1)[1])
        k_rule = "list"
    elif k_rule == "sqrt":
        raise StudyError(
            "the sqrt rule needs explicit steps: --k-rule sqrt=1/4,1/16,..."
        )
    elif k_rule != "h2":
        raise StudyError(f"unknown k rule {k_rule!r} (h2 | sqrt=... | list=...)")
    cfg = StudyConfig(
        study=str(m["study"]),
        example=int(m["example"]),
        element=str(m["element"]),
        levels=_parse_levels(m["levels"]),
        k_rule=k_rule,
        k_list=k_list,
        T=_parse_floats(m["T"]),
        mu=float(m["mu"]),
        gamma=float(m["gamma"]),
        delta=float(m["delta"]),
        out=m["out"],
        picard_tol=float(m["picard_tol"]),
        picard_max=int(m["picard_max"]),
    )
    return cfg


def _emit(cfg: StudyConfig, result, out: str | None) -> None:
    if out is None:
        return
    if isinstance(result, LongtimeResult):
        stem = Path(out)
        for T, table in result.tables:
            label = f"{T:g}".replace(".", "p")
            write_csv(table, stem.with_name(f"{stem.stem}_T{label}{stem.suffix}"))
    else:
        write_csv(result, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        result = run_study(cfg)
        _emit(cfg, result, cfg.out)
    except Exception as exc:
        print(f"oldroyd-study: error: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, LongtimeResult):
        flag = "stable" if result.rates_stable else "UNSTABLE"
        print(f"longtime study complete; rates across horizons: {flag}")
    else:
        print(f"{cfg.study} study complete"
              + (f"; wrote {cfg.out}" if cfg.out else ""))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
