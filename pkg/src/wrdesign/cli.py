"""Command-line entry point.

    wrdesign {winprob,power,samplesize,grid,simulate} --config run.yaml [options]

Exit status is 0 on success, 2 when the configuration is invalid and 3 when
the computation is numerically infeasible (for example WR = 1 in a sample
size request).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass, field

from . import __version__
from .config import FORMATS, ConfigError, RunConfig, ScenarioFactory, load_config, parse_seed
from .design import (
    STRATIFIED_VARIANCE_NOTE,
    DesignError,
    DesignSpec,
    Stratum,
    correlation_grid,
    power_at_n,
    required_sample_size,
    stratified_combine,
    stratified_power,
    stratified_sample_size,
)
from .quadrature import ATOL, RTOL
from .simulate import SimConfig, empirical_summary
from .winprob import INNER_ATOL, INNER_RTOL, WinLossTieTable, compute_table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


@dataclass
class Report:
    """A table plus metadata lines, rendered as csv, md or txt."""

    header: list[str]
    rows: list[list[str]]
    meta: list[str] = field(default_factory=list)

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            buf = io.StringIO()
            for line in self.meta:
                buf.write(f"# {line}\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.header)
            w.writerows(self.rows)
            return buf.getvalue()
        if fmt == "md":
            lines = [f"<!-- {m} -->" for m in self.meta]
            lines.append("| " + " | ".join(self.header) + " |")
            lines.append("|" + "|".join("---:" for _ in self.header) + "|")
            lines += ["| " + " | ".join(r) + " |" for r in self.rows]
            return "\n".join(lines) + "\n"
        widths = [max(len(h), *(len(r[i]) for r in self.rows)) if self.rows else len(h)
                  for i, h in enumerate(self.header)]
        lines = list(self.meta)
        lines.append("  ".join(h.rjust(w) for h, w in zip(self.header, widths)))
        lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in self.rows]
        return "\n".join(lines) + "\n"


def f4(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.4f}"


def fint(x) -> str:
    return "" if x is None else str(int(x))


def _spec(cfg: RunConfig, power=None, n=None) -> DesignSpec:
    d = cfg.design
    if power is None and n is None:
        power, n = d.power, d.n
    return DesignSpec(d.allocation, d.alpha, power, n, d.rounding)


def _tolerance_line() -> str:
    return (f"quadrature rtol={RTOL:g} atol={ATOL:g}, inner rtol={INNER_RTOL:g} atol={INNER_ATOL:g}; "
            f"{STRATIFIED_VARIANCE_NOTE}")


def _strata(cfg: RunConfig) -> list[tuple[Stratum, WinLossTieTable]]:
    out = []
    for st in cfg.design.strata:
        tab = compute_table(st.scenario.build())
        out.append((Stratum(st.weight, st.size, tab), tab))
    return out


def cmd_winprob(cfg: RunConfig, args) -> Report:
    tab = compute_table(cfg.scenario.build())
    header = ["wr", "p_tie", "net_benefit", "win_odds", "win_total", "loss_total"]
    row = [f4(tab.win_ratio), f4(tab.tie), f4(tab.net_benefit), f4(tab.win_odds),
           f4(tab.total_win), f4(tab.total_loss)]
    for k in range(tab.K):
        header += [f"win_{k + 1}", f"loss_{k + 1}"]
        row += [f4(tab.win[k]), f4(tab.loss[k])]
    meta = [f"endpoints: {', '.join(e.name or f'endpoint {i + 1}' for i, e in enumerate(cfg.scenario.endpoints))}",
            "win_k / loss_k: probability the treated / control member wins the pair at endpoint k"]
    return Report(header, [row], meta)


def _stratified_report(cfg: RunConfig, total_row: list[str], per: list[list[str]]) -> Report:
    header = ["stratum", "weight", "size", "wr", "p_tie", "n", "power"]
    return Report(header, per + [total_row], [STRATIFIED_VARIANCE_NOTE])


def cmd_power(cfg: RunConfig, args) -> Report:
    d = cfg.design
    if cfg.design.strata:
        spec = _spec(cfg, power=None, n=max(2, int(sum(s.size for s in d.strata))))
        strata = _strata(cfg)
        st = [s for s, _ in strata]
        wr, p_tie = stratified_combine(st)
        pw = stratified_power(st, spec)
        per = [[str(i + 1), f4(s.weight), f"{s.size:g}", f4(t.win_ratio), f4(t.tie), fint(round(s.size)), ""]
               for i, (s, t) in enumerate(strata)]
        return _stratified_report(cfg, ["all", "", f"{sum(s.size for s in st):g}", f4(wr), f4(p_tie),
                                        fint(round(sum(s.size for s in st))), f4(pw)], per)
    if d.n is None:
        raise ConfigError("design.n", "the power command needs a total sample size")
    tab = compute_table(cfg.scenario.build())
    spec = _spec(cfg)
    pw = power_at_n(tab.win_ratio, tab.tie, d.n, spec)
    return Report(["wr", "p_tie", "n", "power"], [[f4(tab.win_ratio), f4(tab.tie), fint(d.n), f4(pw)]])


def cmd_samplesize(cfg: RunConfig, args) -> Report:
    d = cfg.design
    if d.power is None:
        raise ConfigError("design.power", "the samplesize command needs a target power")
    spec = _spec(cfg)
    if d.strata:
        strata = _strata(cfg)
        res = stratified_sample_size([s for s, _ in strata], spec)
        per = [[str(i + 1), f4(s.weight), f"{s.size:g}", f4(t.win_ratio), f4(t.tie), fint(n), ""]
               for i, ((s, t), n) in enumerate(zip(strata, res.strata_n))]
        return _stratified_report(cfg, ["all", "", "", f4(res.win_ratio), f4(res.p_tie), fint(res.n),
                                        f4(d.power)], per)
    tab = compute_table(cfg.scenario.build())
    res = required_sample_size(tab.win_ratio, tab.tie, spec)
    return Report(["wr", "p_tie", "power", "n"], [[f4(tab.win_ratio), f4(tab.tie), f4(d.power), fint(res.n)]])


def cmd_grid(cfg: RunConfig, args) -> Report:
    if cfg.sweep is None:
        raise ConfigError("sweep", "the grid command needs a sweep block")
    sw = cfg.sweep
    s_values = sw.s or (cfg.scenario.censoring.study_length,)
    spec = _spec(cfg)
    powers = None if cfg.design.n is not None else (sw.power or (cfg.design.power,))
    rows = correlation_grid(ScenarioFactory(cfg.scenario), sw.tau, s_values, spec, powers, workers=args.threads)
    order = {p: i for i, p in enumerate(powers or (None,))}
    rows.sort(key=lambda r: (s_values.index(r.s), sw.tau.index(r.tau), order[r.power_target]))
    if powers is None:
        header = ["tau", "s", "wr", "p_tie", "n", "power", "rcr"]
        body = [[f"{r.tau:g}", f"{r.s:g}", f4(r.win_ratio), f4(r.p_tie), fint(cfg.design.n), f4(r.power), f4(r.rcr)]
                for r in rows]
    else:
        header = ["tau", "s", "power", "wr", "p_tie", "n", "rcr"]
        body = [[f"{r.tau:g}", f"{r.s:g}", f"{r.power_target:g}", f4(r.win_ratio), f4(r.p_tie), fint(r.n),
                 f4(r.rcr)] for r in rows]
    meta = [_tolerance_line(), "rcr: relative change per 0.1 increase in tau, against the previous tau at the same s"]
    return Report(header, body, meta)


def cmd_simulate(cfg: RunConfig, args) -> Report:
    sim = cfg.sim
    if sim is None:
        raise ConfigError("sim", "the simulate command needs a sim block")
    scn = cfg.scenario.build()
    sc = SimConfig(sim.replicates, sim.n, sim.seed, None, cfg.design.alpha, cfg.design.allocation)
    summ = empirical_summary(scn, sc, workers=args.threads)
    tab = compute_table(scn)
    pw = power_at_n(tab.win_ratio, tab.tie, sim.n, _spec(cfg, power=None, n=sim.n))
    header = ["quantity", "formula", "simulation", "mc_se"]
    rows = [
        ["wr_mean", f4(tab.win_ratio), f4(summ.mean_wr), f4(summ.mean_wr_se)],
        ["wr_pooled", f4(tab.win_ratio), f4(summ.pooled_wr), f4(summ.pooled_wr_se)],
        ["p_tie", f4(tab.tie), f4(summ.p_tie), f4(summ.p_tie_se)],
        ["power", f4(pw), f4(summ.power), f4(summ.power_se)],
    ]
    for k in range(tab.K):
        rows.append([f"win_{k + 1}", f4(tab.win[k]), f4(summ.win[k]), f4(summ.win_se[k])])
        rows.append([f"loss_{k + 1}", f4(tab.loss[k]), f4(summ.loss[k]), f4(summ.loss_se[k])])
    meta = [f"seed={sim.seed} replicates={sim.replicates} n={sim.n} excluded={summ.excluded}",
            f"test: {summ.test}",
            f"semi_competing={cfg.scenario.semi_competing} (formula column ignores it)"]
    return Report(header, rows, meta)


COMMANDS = {
    "winprob": (cmd_winprob, "win/loss/tie probabilities and WR, NB, WO"),
    "power": (cmd_power, "power at the design's total N"),
    "samplesize": (cmd_samplesize, "total N for the design's target power"),
    "grid": (cmd_grid, "N (or power) over the sweep's tau x s grid"),
    "simulate": (cmd_simulate, "Monte Carlo summary beside the formula values"),
}


def _seed_arg(text: str) -> int:
    try:
        return parse_seed(int(text), "--seed")
    except (ValueError, ConfigError):
        raise argparse.ArgumentTypeError("expected an unsigned 64-bit integer") from None


def _threads_arg(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run file")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=FORMATS, help="output format (default: output.format, else txt)")
    common.add_argument("--threads", type=_threads_arg, default=os.cpu_count() or 1,
                        help="worker processes for grids and simulations (default: all cores)")
    common.add_argument("--seed", type=_seed_arg, help="override sim.seed")
    common.add_argument("--dump-config", action="store_true", help="print the normalised config and exit")
    p = argparse.ArgumentParser(prog="wrdesign", description="Win-ratio design calculations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return p


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = args.out or cfg.output.path
        if args.dump_config:
            _write(cfg.dump(), out)
            return EXIT_OK
        report = COMMANDS[args.command][0](cfg, args)
        _write(report.render(args.format or cfg.output.format), out)
    except ConfigError as exc:
        print(f"wrdesign: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DesignError, ArithmeticError) as exc:
        print(f"wrdesign: cannot compute: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"wrdesign: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
