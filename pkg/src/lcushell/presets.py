"""Shipped nucleus presets, experimental energies and built-in Hamiltonian fixtures."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .meanfield import NucleusSpec
from .pauli import PauliSum


@dataclass(frozen=True)
class Preset:
    symbol: str
    Z: int
    A: int
    n_proton_orbits: int
    n_neutron_orbits: int
    U0: float
    paper_qubits: int
    E_exp: float
    E_paper: float

    @property
    def N(self) -> int:
        return self.A - self.Z

    def nucleus(self) -> NucleusSpec:
        return NucleusSpec.build(self.Z, self.A, self.n_proton_orbits, self.n_neutron_orbits, name=self.symbol)


@dataclass(frozen=True)
class ExperimentalRecord:
    symbol: str
    Z: int
    A: int
    E_exp: float

    @property
    def N(self) -> int:
        return self.A - self.Z


def _data_text(name: str) -> str:
    return resources.files("lcushell").joinpath("data", name).read_text(encoding="utf-8")


def _rows(text: str) -> list[str]:
    return [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]


@lru_cache(maxsize=None)
def load_presets() -> dict[str, Preset]:
    reader = csv.DictReader(io.StringIO("\n".join(_rows(_data_text("presets.csv")))))
    out = {}
    for row in reader:
        p = Preset(
            symbol=row["symbol"],
            Z=int(row["Z"]),
            A=int(row["A"]),
            n_proton_orbits=int(row["n_proton_orbits"]),
            n_neutron_orbits=int(row["n_neutron_orbits"]),
            U0=float(row["U0"]),
            paper_qubits=int(row["paper_qubits"]),
            E_exp=float(row["E_exp"]),
            E_paper=float(row["E_paper"]),
        )
        out[p.symbol] = p
    return out


def get_preset(name: str) -> Preset:
    presets = load_presets()
    key = {k.lower(): k for k in presets}.get(name.strip().lower())
    if key is None:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(presets)}")
    return presets[key]


def parse_experimental(text: str) -> list[ExperimentalRecord]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'symbol Z A E_exp', got {line!r}")
        out.append(ExperimentalRecord(parts[0], int(parts[1]), int(parts[2]), float(parts[3])))
    return out


def load_experimental(path=None) -> list[ExperimentalRecord]:
    if path is None:
        return parse_experimental(_data_text("experimental.txt"))
    with open(path, encoding="utf-8") as fh:
        return parse_experimental(fh.read())


@lru_cache(maxsize=None)
def load_ustar_reference() -> dict[str, tuple[float, float, float, float]]:
    """Published (E_exp, U*, band low, band high) per fitting nucleus."""
    reader = csv.DictReader(io.StringIO("\n".join(_rows(_data_text("ustar_reference.csv")))))
    return {
        r["symbol"]: (float(r["E_exp"]), float(r["U_star"]), float(r["band_low"]), float(r["band_high"]))
        for r in reader
    }


_BUILTINS = {
    # two-orbit deuteron: 5.906709 I + 0.218291 Z0 - 6.125 Z1 - 2.143304 (X0 X1 + Y0 Y1)
    "deuteron-n2": "5.906709 II\n0.218291 ZI\n-6.125 IZ\n-2.143304 XX\n-2.143304 YY\n",
}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def load_builtin(name: str) -> PauliSum:
    if name not in _BUILTINS:
        raise KeyError(f"unknown builtin Hamiltonian {name!r}; available: {', '.join(builtin_names())}")
    return PauliSum.from_text(_BUILTINS[name])
