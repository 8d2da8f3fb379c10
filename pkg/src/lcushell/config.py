"""Run configuration: INI text with sections, validated before anything is computed.

Example::

    [nucleus]
    preset = 4He

    [solver]
    gamma = 0.040103
    max_iter = 200

    [output]
    trace = 4He_trace.csv
    summary = 4He_summary.json

Unknown sections or keys are rejected, and every error names the offending line.
"""

from __future__ import annotations

import configparser
import re
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class ConfigError(ValueError):
    """A configuration problem, with the line it was found on when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class NucleusSection(_Section):
    preset: str | None = None
    Z: int | None = Field(None, ge=0)
    A: int | None = Field(None, ge=1)
    proton_orbits: int | None = Field(None, ge=2)
    neutron_orbits: int | None = Field(None, ge=2)

    @model_validator(mode="after")
    def _identity(self):
        if self.preset is None and (self.Z is None or self.A is None):
            raise ValueError("give either 'preset' or both 'Z' and 'A'")
        if self.preset is None and self.proton_orbits is None:
            raise ValueError("'proton_orbits' is required without a preset")
        return self


class HamiltonianSection(_Section):
    builtin: str | None = None
    file: str | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.builtin is None) == (self.file is None):
            raise ValueError("give exactly one of 'builtin' or 'file'")
        return self


class FieldSection(_Section):
    # "preset" (table value), "formula" (fitted depth formula) or a depth in MeV
    U0: str = "preset"
    G: float = 0.25
    coulomb: bool = True

    @field_validator("U0")
    @classmethod
    def _u0(cls, v: str) -> str:
        v = v.strip()
        if v in ("preset", "formula"):
            return v
        try:
            depth = float(v)
        except ValueError:
            raise ValueError("U0 must be 'preset', 'formula' or a number in MeV") from None
        if depth > 0:
            raise ValueError("U0 must be <= 0 (attractive)")
        return v


class SolverSection(_Section):
    # "auto", "tuned" or a number
    gamma: str = "tuned"
    q: float | None = None
    Q: float | None = None
    mode: Literal["direct", "circuit"] = "direct"
    representation: Literal["auto", "sector", "full"] = "auto"
    max_iter: int = Field(1000, ge=0)
    tol_keV: float = Field(0.1, gt=0)
    patience: int = Field(3, ge=1)
    project: bool | None = None

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, v: str) -> str:
        v = v.strip()
        if v in ("auto", "tuned"):
            return v
        try:
            g = float(v)
        except ValueError:
            raise ValueError("gamma must be 'auto', 'tuned' or a number") from None
        if g == 0 or g != g or abs(g) == float("inf"):
            raise ValueError("gamma must be finite and non-zero")
        return v


class NoiseSection(_Section):
    kind: Literal["none", "gaussian", "uniform"] = "none"
    scale: float | None = Field(None, gt=0)
    targets: Literal["hamiltonian", "state", "both"] = "both"


class InitialSection(_Section):
    # "hf" or explicit bits: one combined string or "proton neutron"
    reference: str = "hf"
    # "auto" (default admixture), "none", or ";"-separated "bits[:weight]" items
    admixtures: str = "auto"
    weight: float = 0.01
    strict: bool = True


class OutputSection(_Section):
    trace: str | None = None
    summary: str | None = None
    pauli: str | None = None
    oracle: bool = True


class RunSection(_Section):
    seed: int = Field(0, ge=0, lt=2**64)
    name: str | None = None


class FitSection(_Section):
    nuclei: str = "3H,3He,6Li,12C,14N"
    tol: float = Field(1e-3, gt=0)
    min_norm: bool = False
    report: str | None = None


class BatchSection(_Section):
    presets: str = "all"
    outdir: str = "traces"
    jobs: int = Field(1, ge=1)


class RunConfig(_Section):
    run: RunSection = RunSection()
    nucleus: NucleusSection | None = None
    hamiltonian: HamiltonianSection | None = None
    field: FieldSection = FieldSection()
    solver: SolverSection = SolverSection()
    noise: NoiseSection = NoiseSection()
    initial: InitialSection = InitialSection()
    output: OutputSection = OutputSection()
    fit: FitSection | None = None
    batch: BatchSection | None = None
    source: str | None = Field(None, exclude=True)

    @model_validator(mode="after")
    def _target(self):
        if self.nucleus is not None and self.hamiltonian is not None:
            raise ValueError("sections [nucleus] and [hamiltonian] are mutually exclusive")
        return self

    @property
    def base_dir(self) -> Path:
        return Path(self.source).resolve().parent if self.source else Path.cwd()

    def resolve(self, path: str | None) -> Path | None:
        """Input files are looked up next to the config; outputs are relative to the cwd."""
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_map(text: str) -> dict[tuple[str, ...], int]:
    """Line numbers of every section header and key, keyed like pydantic error locations."""
    lines: dict[tuple[str, ...], int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.lstrip().startswith(("#", ";")) or not line.strip():
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section,), lineno)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[0].isspace():
            lines.setdefault((section, m.group(1).strip()), lineno)
    return lines


def parse_config(text: str, source: str | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (Z, A, U0)
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = getattr(exc, "message", str(exc)).splitlines()[0]
        raise ConfigError(msg, source, line) from None
    lines = _line_map(text)
    data = {name: dict(parser.items(name)) for name in parser.sections()}
    try:
        cfg = RunConfig.model_validate({**data, "source": source})
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(str(x) for x in err["loc"])
        line = None
        for k in range(len(loc), 0, -1):
            if loc[:k] in lines:
                line = lines[loc[:k]]
                break
        label = ".".join(loc) if loc else "config"
        raise ConfigError(f"{label}: {err['msg']}", source, line) from None
    return cfg


def load_config(path) -> RunConfig:
    path = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    return parse_config(text, source=path)
