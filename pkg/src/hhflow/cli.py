"""Command-line front end: ``hhflow {potential,spectrum,sweep,dynamics}``.

Parameters come from an optional config file (``key = value`` lines in
``[sections]``) overridden by ``--set section.key=value``. Every command
writes CSV with a header row and 12 significant digits.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Failures print
one ``error: <kind>: <message>`` line on stderr.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import sys
from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import root

from .algebra import FlowParameters, as_fraction
from .cutoff import NonConvergenceError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
COMMANDS = ("potential", "spectrum", "sweep", "dynamics")
SWEEP_METHODS = ("baseline", "iterative", "cutoff")
CONVENTIONS = ("physical", "symmetric")


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    return f"{x:.12g}"


# ---------------------------------------------------------------------------
# Configuration


def _pair_list(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(";"):
        item = item.strip()
        if item:
            a, b = item.split(",")
            out.append((int(a), int(b)))
    return out


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


@dataclass
class RunConfig:
    """All run parameters; field names are ``section_key`` of the config file."""

    physics_w: str = "1.3"
    physics_v: str = "0.7"
    physics_lambda: float = -0.1
    physics_n_aniso: float = 0.1
    physics_convention: str = "physical"
    spectrum_method: str = "iter-8"
    spectrum_count: int = 12
    spectrum_baseline: bool = True
    baseline_n1: int = 30
    baseline_n2: int = 30
    sweep_method: str = "baseline"
    sweep_lambda_min: float = -0.5
    sweep_lambda_max: float = -0.1
    sweep_count: int = 256
    sweep_levels: int = 29
    sweep_e_min: float = 0.7
    sweep_order: int = 0
    potential_q1_min: float = -8.0
    potential_q1_max: float = 8.0
    potential_q2_min: float = -6.0
    potential_q2_max: float = 10.0
    potential_points: int = 81
    potential_saddles: bool = False
    dynamics_order: int = 6
    dynamics_energy_order: int = 10
    dynamics_window: int = 32
    dynamics_initial: str = "1,0"
    dynamics_finals: str = "1,0;1,1;1,2;3,0;3,1;1,3"
    dynamics_lambdas: str = "-0.1,-0.15,-0.2,-0.25"
    dynamics_t_max: float = 1000.0
    dynamics_t_count: int = 1001
    dynamics_oracle: bool = True

    @property
    def params(self) -> FlowParameters:
        return FlowParameters.make(as_fraction(self.physics_w), as_fraction(self.physics_v),
                                   self.physics_lambda, self.physics_n_aniso)

    def validate(self) -> "RunConfig":
        try:
            self.params
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"physics: {exc}") from exc
        if self.physics_convention not in CONVENTIONS:
            raise ConfigError(f"physics.convention must be one of {CONVENTIONS}")
        from .spectrum import _parse_method
        try:
            _parse_method(self.spectrum_method)
        except ValueError as exc:
            raise ConfigError(f"spectrum.method: {exc}") from exc
        if self.spectrum_count < 1:
            raise ConfigError("spectrum.count must be >= 1")
        if self.baseline_n1 < 1 or self.baseline_n2 < 1 or self.baseline_n1 * self.baseline_n2 > 4096:
            raise ConfigError("baseline.n1 * baseline.n2 must lie in [1, 4096]")
        if self.sweep_method not in SWEEP_METHODS:
            raise ConfigError(f"sweep.method must be one of {SWEEP_METHODS}")
        if self.sweep_count < 1 or self.sweep_levels < 1:
            raise ConfigError("sweep.count and sweep.levels must be >= 1")
        if self.potential_points < 2:
            raise ConfigError("potential.points must be >= 2")
        if self.dynamics_order < 1 or self.dynamics_energy_order < self.dynamics_order:
            raise ConfigError("need 1 <= dynamics.order <= dynamics.energy_order")
        if self.dynamics_t_count < 1 or self.dynamics_t_max < 0:
            raise ConfigError("dynamics time grid is empty")
        try:
            self.initial_state
            self.final_states
            self.lambda_family
        except ValueError as exc:
            raise ConfigError(f"dynamics: {exc}") from exc
        return self

    @property
    def initial_state(self) -> tuple[int, int]:
        pairs = _pair_list(self.dynamics_initial)
        if len(pairs) != 1:
            raise ValueError("initial must be a single 'n1,n2' pair")
        return pairs[0]

    @property
    def final_states(self) -> list[tuple[int, int]]:
        return _pair_list(self.dynamics_finals)

    @property
    def lambda_family(self) -> list[float]:
        return _float_list(self.dynamics_lambdas)


def _convert(kind, text: str):
    if kind is bool:
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is str:
        return text.strip()
    return kind(text.strip())


_TYPES = {"str": str, "float": float, "int": int, "bool": bool}


def _field_map() -> dict:
    return {f.name: _TYPES[f.type] for f in fields(RunConfig)}


def set_value(config: RunConfig, section: str, key: str, value: str) -> None:
    name = f"{section}_{key}"
    types = _field_map()
    if name not in types:
        raise ConfigError(f"unknown setting {section}.{key}")
    try:
        setattr(config, name, _convert(types[name], value))
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from exc
    config = RunConfig()
    for section in parser.sections():
        for key, value in parser.items(section):
            set_value(config, section, key, value)
    return config


def serialize_config(config: RunConfig) -> str:
    sections: dict = {}
    for f in fields(RunConfig):
        section, key = f.name.split("_", 1)
        value = getattr(config, f.name)
        sections.setdefault(section, []).append(f"{key} = {repr(value) if isinstance(value, float) else value}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())


# ---------------------------------------------------------------------------
# Commands


def potential(params: FlowParameters, q1, q2):
    """``w q1²/2 + v q2²/2 + lam q2 (q1² + n q2²)``."""
    w, v = float(params.w), float(params.v)
    return 0.5 * w * q1 ** 2 + 0.5 * v * q2 ** 2 + params.lam * q2 * (q1 ** 2 + params.n_aniso * q2 ** 2)


def _potential_gradient(params, x):
    q1, q2 = x
    w, v, lam, n = float(params.w), float(params.v), params.lam, params.n_aniso
    return [w * q1 + 2 * lam * q1 * q2, v * q2 + lam * (q1 ** 2 + 3 * n * q2 ** 2)]


def _potential_hessian(params, x):
    q1, q2 = x
    w, v, lam, n = float(params.w), float(params.v), params.lam, params.n_aniso
    return np.array([[w + 2 * lam * q2, 2 * lam * q1], [2 * lam * q1, v + 6 * lam * n * q2]])


def potential_saddles(params: FlowParameters) -> list[tuple[float, float, float]]:
    """Saddle points ``(q1, q2, V)`` found from a grid of Newton starts, lowest first."""
    if params.lam == 0:
        return []
    scale = max(float(params.w), float(params.v)) / abs(params.lam)
    found = []
    for s1 in np.linspace(-scale, scale, 9):
        for s2 in np.linspace(-scale, scale, 9):
            sol = root(lambda x: _potential_gradient(params, x), [s1, s2],
                       jac=lambda x: _potential_hessian(params, x), tol=1e-14)
            if not sol.success:
                continue
            q = sol.x
            if np.max(np.abs(_potential_gradient(params, q))) > 1e-9:
                continue
            eig = np.linalg.eigvalsh(_potential_hessian(params, q))
            if eig[0] < 0 < eig[1] and not any(np.hypot(q[0] - a, q[1] - b) < 1e-6 for a, b, _ in found):
                found.append((float(q[0]), float(q[1]), float(potential(params, q[0], q[1]))))
    return sorted(found, key=lambda s: (s[2], s[0]))


def cmd_potential(config: RunConfig) -> str:
    p = config.params
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    if config.potential_saddles:
        out.writerow(["q1", "q2", "V"])
        for q1, q2, v in potential_saddles(p):
            out.writerow([_fmt(q1 + 0.0), _fmt(q2), _fmt(v)])
        return buf.getvalue()
    n = config.potential_points
    q1s = np.linspace(config.potential_q1_min, config.potential_q1_max, n)
    q2s = np.linspace(config.potential_q2_min, config.potential_q2_max, n)
    out.writerow(["q1", "q2", "V"])
    for q1 in q1s:
        for q2 in q2s:
            out.writerow([_fmt(q1), _fmt(q2), _fmt(potential(p, q1, q2))])
    return buf.getvalue()


def cmd_spectrum(config: RunConfig) -> str:
    from .spectrum import spectrum_csv, spectrum_table
    entries = spectrum_table(config.params, config.spectrum_method, config.spectrum_count,
                             baseline=True if config.spectrum_baseline else None,
                             convention=config.physics_convention,
                             basis=(config.baseline_n1, config.baseline_n2))
    return spectrum_csv(entries)


def _sweep_grid(config: RunConfig) -> np.ndarray:
    if config.sweep_count == 1:
        return np.array([config.sweep_lambda_max])
    return np.linspace(config.sweep_lambda_min, config.sweep_lambda_max, config.sweep_count)


def cmd_sweep(config: RunConfig) -> str:
    p, conv = config.params, config.physics_convention
    grid = _sweep_grid(config)
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["lambda", "level", "n1", "n2", "E", "status"])
    if config.sweep_method == "baseline":
        from .baseline import diagonalize
        for lam in grid:
            spec = diagonalize(p.with_lambda(lam), config.baseline_n1, config.baseline_n2, conv)
            sel = np.nonzero(spec.eigenvalues > config.sweep_e_min)[0][:config.sweep_levels]
            for level, i in enumerate(sel):
                lab = spec.labels[i]
                n1, n2 = ("", "") if lab == "mixed" else lab
                out.writerow([_fmt(lam), level, n1, n2, _fmt(spec.eigenvalues[i]), "mixed" if lab == "mixed" else "ok"])
        return buf.getvalue()
    from .spectrum import _candidate_states, eigenvalue_from_normal_form
    # levels are followed by their quantum numbers, chosen at the reference coupling
    states = sorted(_candidate_states(p, config.sweep_levels),
                    key=lambda s: float(p.w) * s[0] + float(p.v) * s[1])[:config.sweep_levels]
    if config.sweep_method == "iterative":
        from .iterative import iterate_flow
        result = iterate_flow(p, config.sweep_order or 8, conv)
        for lam in grid:
            diag = result.diagonal_form(lam)
            for level, s in enumerate(states):
                out.writerow([_fmt(lam), level, s[0], s[1], _fmt(eigenvalue_from_normal_form(diag, *s)), "ok"])
        return buf.getvalue()
    from .cutoff import derive_flow_odes, initial_state, integrate_flow
    system = derive_flow_odes(config.sweep_order or 3, p)
    for lam in grid:
        try:
            state = integrate_flow(system, initial_state(system, p.with_lambda(lam), conv))
        except NonConvergenceError as exc:
            log.info("cut-off flow failed at lambda=%g: %s", lam, exc)
            for level, s in enumerate(states):
                out.writerow([_fmt(lam), level, s[0], s[1], "", "diverged"])
            continue
        for level, s in enumerate(states):
            out.writerow([_fmt(lam), level, s[0], s[1], _fmt(state.energy(*s)), "ok"])
    return buf.getvalue()


def cmd_dynamics(config: RunConfig) -> str:
    from .dynamics import build_frame, completeness_residual, transition_amplitude
    p, conv = config.params, config.physics_convention
    frame = build_frame(p, config.dynamics_order, config.dynamics_energy_order, config.dynamics_window, conv)
    times = np.linspace(0.0, config.dynamics_t_max, config.dynamics_t_count)
    init = config.initial_state
    alpha = frame.state(*init)
    finals = config.final_states
    betas = {f: frame.state(*f) for f in finals}
    rows = []

    def oracle(lam):
        if not config.dynamics_oracle:
            return None
        from .baseline import diagonalize, propagate_grid
        spec = diagonalize(p.with_lambda(lam), config.baseline_n1, config.baseline_n2, conv)
        return spec, propagate_grid(spec.fock_vector(*init), times, spec)

    def emit(kind, lam, final, amp, ref):
        for i, t in enumerate(times):
            rows.append([kind, _fmt(lam), f"{init[0]},{init[1]}", final, _fmt(t), _fmt(amp[i].real),
                         _fmt(amp[i].imag), _fmt(abs(amp[i]) ** 2),
                         "" if ref is None else _fmt(abs(ref[i]) ** 2)])

    lam0 = p.lam
    nf0 = frame.normal_form(lam0)
    ref0 = oracle(lam0)
    for f in finals:
        amp = transition_amplitude(alpha, betas[f], nf0, lam=lam0)(times)
        ref = None if ref0 is None else ref0[1][:, ref0[0].fock_index(*f)]
        emit("amplitude", lam0, f"{f[0]},{f[1]}", amp, ref)
    resid = completeness_residual(alpha, list(betas.values()), times, nf0, lam=lam0)
    # the residual is real: value in the re column, no squared modulus
    rows.extend(["residual", _fmt(lam0), f"{init[0]},{init[1]}", "all", _fmt(t), _fmt(r), "", "", ""]
                for t, r in zip(times, resid))
    for lam in config.lambda_family:
        amp = transition_amplitude(alpha, alpha, frame.normal_form(lam), lam=lam)(times)
        r = oracle(lam)
        ref = None if r is None else r[1][:, r[0].fock_index(*init)]
        emit("family", lam, f"{init[0]},{init[1]}", amp, ref)
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["kind", "lambda", "initial", "final", "t", "re", "im", "abs2", "oracle_abs2"])
    out.writerows(rows)
    return buf.getvalue()


HANDLERS = {"potential": cmd_potential, "spectrum": cmd_spectrum, "sweep": cmd_sweep, "dynamics": cmd_dynamics}


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hhflow", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("-c", "--config", help="config file (key = value lines in [sections])")
    ap.add_argument("-s", "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one setting; repeatable")
    ap.add_argument("-o", "--output", help="CSV destination (default stdout)")
    ap.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                config = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}") from exc
    else:
        config = RunConfig()
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not SECTION.KEY=VALUE")
        name, value = item.split("=", 1)
        section, key = name.strip().split(".", 1)
        set_value(config, section, key, value)
    return config.validate()


def _fail(code: int, kind: str, exc: BaseException) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error: {kind}: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, args.set)
    except ConfigError as exc:
        return _fail(EXIT_INVALID, "config", exc)
    if args.dump_config:
        sys.stdout.write(serialize_config(config))
        return EXIT_OK
    try:
        text = HANDLERS[args.command](config)
    except (NonConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    except ValueError as exc:
        return _fail(EXIT_INVALID, "invalid", exc)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
