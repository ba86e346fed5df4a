"""RunReport: everything a run decided, in a JSON-round-trippable form."""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import DataError
from .grid import max_entropy

REPORT_VERSION = 1


@dataclass
class RunReport:
    config: dict
    n: int
    d: int
    g: int
    m: int
    h_baseline: float
    h_threshold: float
    h_max: float
    termination: str
    trajectory: list  # {k, pi_t, H, fwa}
    probes: list
    kl_trace: list  # [iteration, KL]
    timings: dict
    seeds: dict
    exemplars: list
    version: int = REPORT_VERSION
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise DataError("report must be a JSON object")
        names = set(cls.__dataclass_fields__)
        missing = sorted(names - set(doc) - {"extra"})
        if missing:
            raise DataError(f"report is missing {', '.join(missing)}")
        unknown = sorted(set(doc) - names)
        if unknown:
            raise DataError(f"report has unknown fields {', '.join(unknown)}")
        rep = cls(**doc)
        if rep.version != REPORT_VERSION:
            raise DataError(f"unsupported report version {rep.version!r}")
        if not isinstance(rep.trajectory, list) or not all(
            isinstance(t, dict) and {"k", "pi_t", "H"} <= set(t) for t in rep.trajectory
        ):
            raise DataError("report trajectory must be a list of {k, pi_t, H} records")
        if not isinstance(rep.timings, dict) or not isinstance(rep.config, dict):
            raise DataError("report timings and config must be objects")
        return rep

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise DataError(f"cannot read report {path}: {exc}") from exc
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise DataError(f"report {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def comparable(self):
        """The report minus wall-clock timings, for regression comparison."""
        doc = self.to_dict()
        doc.pop("timings")
        return doc


def _finite(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x} in report")
    return x


def build_report(result, config, dataset):
    """Assemble a :class:`RunReport` from a controller result and its flat config."""
    traj = [
        {"k": k, "pi_t": _finite(ev.pi_t), "H": _finite(ev.entropy), "fwa": ev.bandwidths.summary()}
        for k, ev in enumerate(result.state.history)
    ]
    return RunReport(
        config=dict(config),
        n=int(dataset.n),
        d=int(dataset.d),
        g=int(result.g),
        m=int(result.m),
        h_baseline=_finite(result.state.h_baseline),
        h_threshold=_finite(result.state.h_threshold),
        h_max=max_entropy(result.g),
        termination=result.termination,
        trajectory=traj,
        probes=[{"pi_t": _finite(p["pi_t"]), "H": _finite(p["H"])} for p in result.probes],
        kl_trace=[[int(it), _finite(kl)] for it, kl in result.final.embedding.kl_trace],
        timings={k: float(v) for k, v in result.timings.items()},
        seeds={k.split(".")[0]: config[k] for k in ("fwa.seed", "embed.seed", "sampler.seed")} | {"master": config["seed"]},
        exemplars=[int(i) for i in result.exemplars.indices],
    )


def format_summary(rep):
    lines = [
        f"N={rep.n} D={rep.d} grid={rep.g}x{rep.g} exemplars={rep.m}",
        f"H_b={rep.h_baseline:.6f}  H_0={rep.h_threshold:.6f}  H_max={rep.h_max:.6f}",
        f"termination: {rep.termination}",
        "",
        f"{'k':>3}  {'pi_t':>10}  {'H':>10}",
    ]
    for t in rep.trajectory:
        lines.append(f"{t['k']:>3}  {t['pi_t']:>10.4f}  {t['H']:>10.6f}")
    lines += ["", "stage timings (s):"]
    for name, sec in rep.timings.items():
        lines.append(f"  {name:<10} {float(sec):9.3f}")
    return "\n".join(lines)
