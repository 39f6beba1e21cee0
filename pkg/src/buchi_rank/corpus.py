"""Shipped benchmark programs and formula-shape templates."""
from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Dict, List, Optional

from .ir import ConfigError, TransitionSystem, conj
from .parser import load_program, parse_pred

CORPUS_DIR = os.path.join(os.path.dirname(__file__), "corpus")
DEFAULT_BOUNDS = (-8, 7)
GOLDEN = "figure1"


@dataclass(frozen=True)
class SpecTemplate:
    name: str
    formula: str
    pre: str

    def bind(self, ts: TransitionSystem):
        """Instantiate for ``ts``: returns ``(formula text, ts with the precondition conjoined)``."""
        if not ts.variables:
            raise ConfigError("formula templates need at least one program variable")
        x = sorted(ts.variables)[0]
        formula = self.formula.replace("{x}", x)
        pre = " && ".join(self.pre.replace("{each}", v).replace("{x}", x) for v in ts.variables) \
            if "{each}" in self.pre else self.pre.replace("{x}", x)
        theta = conj(ts.init_cond, parse_pred(pre, ts.variables))
        return formula, replace(ts, init_cond=theta)


def load_spec_templates(path: Optional[str] = None) -> List[SpecTemplate]:
    path = path or os.path.join(CORPUS_DIR, "table1.spec")
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(" | ")]
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 'name | formula | precondition'")
            out.append(SpecTemplate(*parts))
    return out


def program_paths(include_golden: bool = False) -> Dict[str, str]:
    out = {}
    for fn in sorted(os.listdir(CORPUS_DIR)):
        if fn.endswith(".prog"):
            name = fn[:-5]
            if name == GOLDEN and not include_golden:
                continue
            out[name] = os.path.join(CORPUS_DIR, fn)
    return out


def load(name: str) -> TransitionSystem:
    return load_program(os.path.join(CORPUS_DIR, f"{name}.prog"))
