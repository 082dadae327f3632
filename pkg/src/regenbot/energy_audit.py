"""Energy ledgers, comparison tables and Sankey export.

Tabulated energies are consumption-positive: a joint that returns energy
to the capacitor shows a negative entry. Everything upstream (actuator,
trajopt, sim) is regeneration-positive; :func:`_tabulate` is the only
place the sign flips.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_uniform_grid
from .actuator import ActuatorBank, capacitor_side_power, regen_power
from .exceptions import AuditInconsistencyError, InputDomainError
from .robot_model import DAMPING_SLICE, check_theta, mechanical_energy

#: Balance residual allowed for simulated traces, as a fraction of gross flows.
BALANCE_RTOL = 0.01


def _tabulate(regen_positive):
    """Regeneration-positive energy -> table convention (consumption-positive)."""
    return -np.asarray(regen_positive, dtype=float)


@dataclass
class EnergyLedger:
    """Energy accounting for one trajectory segment [J].

    Attributes
    ----------
    motor_side, capacitor_side : ndarray, shape (3,)
        Per-joint energies, consumption-positive.
    delta_E_m : float
        Change of kinetic plus potential energy.
    sigma_m, sigma_e : float
        Mechanical (viscous) and winding losses, both >= 0.
    sigma_d : float
        Driver conversion losses (zero for an ideal driver).
    delta_E_s : float
        Change of energy stored in the capacitor.
    """

    motor_side: np.ndarray
    capacitor_side: np.ndarray
    delta_E_m: float
    sigma_m: float
    sigma_e: float
    delta_E_s: float
    sigma_d: float = 0.0
    source: str = "theoretical"
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def total(self):
        return float(np.sum(self.motor_side))

    @property
    def capacitor_total(self):
        return float(np.sum(self.capacitor_side))

    @property
    def residual(self):
        return self.delta_E_m + self.sigma_m + self.sigma_e + self.sigma_d + self.delta_E_s

    @property
    def gross(self):
        return abs(self.delta_E_m) + self.sigma_m + self.sigma_e + self.sigma_d + abs(self.delta_E_s)

    @property
    def regen_fraction(self):
        """Share of released mechanical energy that ends up stored (nan if none released)."""
        if self.delta_E_m >= 0:
            return float("nan")
        return self.delta_E_s / -self.delta_E_m

    def check(self, rtol=BALANCE_RTOL):
        """Raise :class:`AuditInconsistencyError` if the balance does not close."""
        if self.sigma_m < -1e-9 or self.sigma_e < -1e-9 or self.sigma_d < -1e-9:
            raise AuditInconsistencyError("negative loss term in ledger")
        if abs(self.residual) > rtol * self.gross + 1e-9:
            raise AuditInconsistencyError(
                f"energy balance residual {self.residual:.6g} J exceeds {rtol:g} of the "
                f"gross flow {self.gross:.6g} J")
        return self

    def __add__(self, other):
        return EnergyLedger(
            self.motor_side + other.motor_side, self.capacitor_side + other.capacitor_side,
            self.delta_E_m + other.delta_E_m, self.sigma_m + other.sigma_m,
            self.sigma_e + other.sigma_e, self.delta_E_s + other.delta_E_s,
            self.sigma_d + other.sigma_d, self.source, self.label or other.label)

    def to_dict(self):
        d = asdict(self)
        d["motor_side"] = self.motor_side.tolist()
        d["capacitor_side"] = self.capacitor_side.tolist()
        d.update(total=self.total, capacitor_total=self.capacitor_total,
                 residual=self.residual, gross=self.gross,
                 regen_fraction=None if np.isnan(self.regen_fraction) else self.regen_fraction)
        return d


def _audit_theoretical(sol, theta, bank, label):
    t = check_uniform_grid(sol.t)
    q, qd, tau = (np.asarray(a, dtype=float) for a in (sol.q, sol.qd, sol.tau))
    if t.size < 2:
        raise InputDomainError("trace must contain at least two samples")
    p = regen_power(tau, qd, bank)
    p_cap = capacitor_side_power(p, bank.efficiency)
    regen = np.trapezoid(p, t, axis=0)
    regen_cap = np.trapezoid(p_cap, t, axis=0)
    b_mech = theta[DAMPING_SLICE] - bank.a * bank.k
    ak = bank.a * bank.k
    E = mechanical_energy(q[[0, -1]], qd[[0, -1]], theta)
    return EnergyLedger(
        motor_side=_tabulate(regen), capacitor_side=_tabulate(regen_cap),
        delta_E_m=float(E[1] - E[0]),
        sigma_m=float(np.trapezoid(np.sum(b_mech * qd**2, axis=1), t)),
        # winding loss R i^2 with i = (a qd - R tau / a) / R
        sigma_e=float(np.trapezoid(np.sum((ak * qd - tau) ** 2 / ak, axis=1), t)),
        delta_E_s=float(regen_cap.sum()),
        sigma_d=float((regen - regen_cap).sum()),
        source="theoretical", label=label)


def _audit_simulated(trace, method, label):
    theta, bank = trace.theta, trace.bank
    E = mechanical_energy(trace.q[[0, -1]], trace.qdot[[0, -1]], theta)
    v0, v1 = trace.v_cap[0], trace.v_cap[-1]
    dEs = 0.5 * trace.capacitance * (v1**2 - v0**2)
    if method == "integrated" and trace.cum_regen is not None:
        regen = trace.cum_regen[-1] - trace.cum_regen[0]
        regen_cap = trace.cum_cap[-1] - trace.cum_cap[0]
        sigma_m = trace.cum_mech_loss[-1] - trace.cum_mech_loss[0]
        sigma_e = trace.cum_joule[-1] - trace.cum_joule[0]
    else:
        t = check_uniform_grid(trace.t)
        b_mech = theta[DAMPING_SLICE] - bank.a * bank.k
        p = -np.asarray(trace.p_motor)
        regen = np.trapezoid(p, t, axis=0)
        regen_cap = np.trapezoid(capacitor_side_power(p, bank.efficiency), t, axis=0)
        sigma_m = np.trapezoid(np.sum(b_mech * trace.qdot**2, axis=1), t)
        i_m = (bank.a * trace.qdot - trace.r * trace.v_cap[:, None]) / bank.R
        sigma_e = np.trapezoid(np.sum(bank.R * i_m**2, axis=1), t)
    return EnergyLedger(
        motor_side=_tabulate(regen), capacitor_side=_tabulate(regen_cap),
        delta_E_m=float(E[1] - E[0]), sigma_m=float(sigma_m), sigma_e=float(sigma_e),
        delta_E_s=float(dEs), sigma_d=float(np.sum(regen - regen_cap)),
        source="simulated", label=label,
        meta={"stored_by_integration": float(np.sum(regen_cap)), "method": method})


def audit(source, theta=None, bank=None, label="", check=None, method="integrated",
          rtol=BALANCE_RTOL):
    """Build an :class:`EnergyLedger` for a simulated trace or an optimizer solution.

    Parameters
    ----------
    source : SimTrace or CollocationSolution
        Anything with ``t, q, qd, tau`` is treated as a theoretical
        trajectory (powers from the regeneration formula); a ``SimTrace``
        uses the simulated currents and capacitor voltage.
    theta, bank
        Model and drives for theoretical inputs (a trace carries its own).
    check : bool, optional
        Enforce balance closure; defaults to True for simulated traces.
        Theoretical ledgers close only to the collocation accuracy.
    method : {"integrated", "trapezoid"}
        For traces: use the running integrals carried by the integrator
        (exact to RK4 accuracy) or the trapezoid rule on recorded samples.

    Raises
    ------
    AuditInconsistencyError
        If ``check`` and the balance residual exceeds ``rtol`` of gross flows.
    """
    if method not in ("integrated", "trapezoid"):
        raise InputDomainError("method must be 'integrated' or 'trapezoid'")
    if hasattr(source, "v_cap"):
        if len(source.t) < 2:
            raise InputDomainError("trace must contain at least two samples")
        ledger = _audit_simulated(source, method, label)
        check = True if check is None else check
    else:
        theta = check_theta(theta)
        bank = ActuatorBank.default(theta) if bank is None else bank
        ledger = _audit_theoretical(source, theta, bank, label)
        check = False if check is None else check
    if check:
        ledger.check(rtol)
    return ledger


def cycle_savings(ledgers):
    """Regenerated over consumed energy across segments (motor side)."""
    totals = np.array([lg.total for lg in ledgers])
    consumed = totals[totals > 0].sum()
    regenerated = -totals[totals < 0].sum()
    return float(regenerated / consumed) if consumed > 0 else float("nan")


def _fmt(x):
    return f"{x:.6g}"


def report_tables(ledgers, labels=None, cycle=False, capacitor=False):
    """Per-joint comparison table.

    Parameters
    ----------
    ledgers : list of EnergyLedger
    labels : list of str, optional
        Column headings (default: each ledger's ``label``).
    cycle : bool
        Treat the columns as the segments of one cycle and report savings.
    capacitor : bool
        Tabulate capacitor-side instead of motor-side energies.

    Returns
    -------
    text : str
        Aligned table; regeneration entries carry an ``R`` marker and the
        column with the lowest total is flagged ``best``.
    data : dict
        The same numbers at full precision.
    """
    if not ledgers:
        raise InputDomainError("no ledgers to tabulate")
    labels = [lg.label or f"#{i + 1}" for i, lg in enumerate(ledgers)] if labels is None else labels
    if len(labels) != len(ledgers):
        raise InputDomainError("one label per ledger required")
    cols = [lg.capacitor_side if capacitor else lg.motor_side for lg in ledgers]
    totals = [float(np.sum(c)) for c in cols]
    best = int(np.argmin(totals))

    rows = [[f"Joint {j + 1}"] + [c[j] for c in cols] for j in range(3)]
    rows.append(["Total"] + totals)

    def cell(x):
        return _fmt(x) + (" R" if x < 0 else "  ")

    width = max(12, *(len(lb) + 2 for lb in labels))
    head = f"{'Energy [J]':<10}" + "".join(f"{lb:>{width}}" for lb in labels)
    lines = [head, "-" * len(head)]
    for row in rows:
        lines.append(f"{row[0]:<10}" + "".join(f"{cell(x):>{width}}" for x in row[1:]))
    if len(ledgers) > 1:
        marks = ["best" if i == best else "" for i in range(len(ledgers))]
        lines.append(f"{'':<10}" + "".join(f"{m:>{width}}" for m in marks))
    data = {
        "side": "capacitor" if capacitor else "motor",
        "columns": labels,
        "per_joint": [list(map(float, c)) for c in cols],
        "totals": totals,
        "best": labels[best],
    }
    if cycle:
        s = cycle_savings(ledgers)
        data["savings"] = s
        lines.append(f"Savings (regenerated / consumed): {100 * s:.3g} %")
    lines.append("R = regeneration (energy returned to the capacitor)")
    return "\n".join(lines), data


def sankey(ledger):
    """Energy-flow graph for a ledger.

    Flows are signed joules along fixed edges: the mechanical system
    releases ``-delta_E_m`` into the drive ``source`` node, which splits
    into mechanical losses, electrical losses (winding plus driver) and
    the capacitor. A negative capacitor edge means the capacitor supplied
    energy.
    """
    nodes = ["source", "mechanical", "mech-losses", "elec-losses", "capacitor"]
    links = [
        {"source": "mechanical", "target": "source", "value": -ledger.delta_E_m},
        {"source": "source", "target": "mech-losses", "value": ledger.sigma_m},
        {"source": "source", "target": "elec-losses", "value": ledger.sigma_e + ledger.sigma_d},
        {"source": "source", "target": "capacitor", "value": ledger.delta_E_s},
    ]
    return {"nodes": nodes, "links": links, "residual": ledger.residual,
            "electrical_breakdown": {"winding": ledger.sigma_e, "driver": ledger.sigma_d}}


def dumps(obj):
    """JSON text at full precision."""
    return json.dumps(obj, indent=2)
