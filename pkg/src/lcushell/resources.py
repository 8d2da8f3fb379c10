"""Qubit and gate accounting for one LCU iteration, and the classical comparison table."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

from .pauli import PauliSum, build_iteration_operator
from .statevec import ancilla_count

CSV_COLUMNS = ("nucleus", "work_qubits", "M", "m", "total_qubits", "gates_per_iteration", "bound_M", "subspace_dim")


def controlled_pauli_cost(m: int) -> int:
    """Basic gates for an m-controlled Pauli, 32(m-1)+4; taken as 1 for an uncontrolled one."""
    if m < 0:
        raise ValueError("control count must be >= 0")
    return 1 if m == 0 else 32 * (m - 1) + 4


def term_count_bound(n_orbits: int) -> int:
    """12 N^2 (2N-1)^2 + 4 N (2N-1) with N the larger orbit count."""
    return 12 * n_orbits**2 * (2 * n_orbits - 1) ** 2 + 4 * n_orbits * (2 * n_orbits - 1)


@dataclass(frozen=True)
class ResourceReport:
    nucleus: str
    work_qubits: int
    M: int
    m: int
    total_qubits: int
    gates_per_iteration: int
    bound_M: int | None
    subspace_dim: int | None
    hamiltonian_terms: int
    # preparing sum_k beta_k |k> is not decomposed into gates (no count is given for it)
    state_preparation: str = "unaccounted"

    def __post_init__(self) -> None:
        if self.m != ancilla_count(self.M):
            raise ValueError("ancilla count must equal ceil(log2 M)")
        if self.total_qubits != self.work_qubits + self.m:
            raise ValueError("total qubits must equal work + ancilla qubits")

    def as_row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in CSV_COLUMNS}


def estimate_resources(h: PauliSum, nucleus=None, gamma: float = 0.01, name: str | None = None) -> ResourceReport:
    """Resource report for T = I - 2 gamma H built from the simplified Hamiltonian.

    Without a nucleus (a bare fixture Hamiltonian) the bound and subspace size are None.

    For a Hamiltonian without identity term, T has one term more than H; any gamma
    that keeps 1 - 2 gamma alpha_I non-zero gives the same count.
    """
    if len(h) == 0:
        raise ValueError("empty PauliSum: nothing to account for")
    t_op = build_iteration_operator(h, gamma)
    M = len(t_op)
    m = ancilla_count(M)
    bound = dim = None
    label = name or ""
    if nucleus is not None:
        cat = nucleus.catalog
        bound = term_count_bound(max(cat.n_proton_orbits, cat.n_neutron_orbits))
        dim = math.comb(cat.n_proton_orbits, nucleus.Z) * math.comb(cat.n_neutron_orbits, nucleus.N)
        label = label or nucleus.name or f"Z{nucleus.Z}A{nucleus.A}"
    return ResourceReport(
        nucleus=label,
        work_qubits=h.n_qubits,
        M=M,
        m=m,
        total_qubits=h.n_qubits + m,
        gates_per_iteration=M * controlled_pauli_cost(m) + m,
        bound_M=bound,
        subspace_dim=dim,
        hamiltonian_terms=len(h),
    )


@dataclass(frozen=True)
class ComplexityRow:
    report: ResourceReport
    classical_proxy: int  # 2^(3 N), the dense-diagonalization cost scale
    full_dimension: int  # 2^(work qubits)

    @property
    def gate_ratio(self) -> float:
        return self.report.gates_per_iteration / self.full_dimension


def complexity_table(entries) -> list[ComplexityRow]:
    """``entries``: iterable of ``(PauliSum, nucleus)`` or ``(PauliSum, nucleus, name)``."""
    rows = []
    for entry in entries:
        h, nucleus, *rest = entry
        rep = estimate_resources(h, nucleus, name=rest[0] if rest else None)
        n_max = max(nucleus.catalog.n_proton_orbits, nucleus.catalog.n_neutron_orbits)
        rows.append(ComplexityRow(rep, 2 ** (3 * n_max), 2**rep.work_qubits))
    return rows


def resources_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.as_row())
    return buf.getvalue()


def complexity_csv(rows: list[ComplexityRow]) -> str:
    buf = io.StringIO()
    fields = CSV_COLUMNS + ("classical_proxy", "full_dimension")
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({**row.report.as_row(), "classical_proxy": row.classical_proxy, "full_dimension": row.full_dimension})
    return buf.getvalue()
