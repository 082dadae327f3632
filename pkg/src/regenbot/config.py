"""Scenario configuration: JSON sections with compiled-in defaults.

An empty file (or ``{}``) is a valid scenario reproducing the default
A->B setup. Unknown keys are rejected so typos do not pass silently.
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actuator import (ActuatorBank, CAPACITANCE_DEFAULT, ELECTRICAL_DAMPING_FRACTION,
                       K_DEFAULT, V_CAP_NOMINAL, CapacitorState)
from .exceptions import InputDomainError
from .robot_model import DAMPING_SLICE, POSE_A, POSE_B, THETA_DEFAULT, check_theta
from .sim import ControllerGains
from .trajopt import BoundaryConditions, CollocationProblem

DEFAULTS = {
    "model": {"theta": THETA_DEFAULT.tolist()},
    "actuators": {
        "k": K_DEFAULT.tolist(),
        "a": None,
        "electrical_fraction": ELECTRICAL_DAMPING_FRACTION.tolist(),
        "efficiency": 1.0,
        "capacitance": CAPACITANCE_DEFAULT,
        "v0": V_CAP_NOMINAL,
    },
    "problem": {
        "q_start": POSE_A.tolist(),
        "q_end": POSE_B.tolist(),
        "qd_start": [0.0, 0.0, 0.0],
        "qd_end": [0.0, 0.0, 0.0],
        "horizon": 2.0,
        "N": 100,
        "v_cap_assumed": V_CAP_NOMINAL,
        "tau_lower": None,
        "tau_upper": None,
        "defects": "backward_euler",
        "quadrature": "trapezoid",
        "starts": 8,
        "seed": 0,
        "tol": 1e-6,
        "kkt_tol": 1e-5,
        "inner": "newton",
    },
    "controller": {
        "K": [40.0, 80.0, 40.0],
        "Lambda": [10.0, 10.0, 10.0],
        "rho": None,
        "epsilon": 10.0,
    },
    "sim": {"step": 1e-3, "theta_perturbation": 0.0, "seed": 0, "v_min": 0.1},
    "output": {"directory": "regenbot-out", "formats": ["csv", "json"]},
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise InputDomainError(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise InputDomainError(f"config section '{where}' must be an object")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


@dataclass
class Scenario:
    """A fully-populated configuration tree plus builders for run objects."""

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __post_init__(self):
        self.data = _merge(DEFAULTS, self.data)
        self.validate()

    # ---------------------------------------------------------------- io
    @classmethod
    def from_dict(cls, d):
        return cls(d or {})

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        text = path.read_text().strip()
        try:
            d = json.loads(text) if text else {}
        except json.JSONDecodeError as exc:
            raise InputDomainError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise InputDomainError(f"{path}: top level must be an object")
        return cls(d)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def dumps(self):
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def override(self, dotted, value):
        """Set ``section.key`` to ``value`` (parsed as JSON when possible)."""
        if isinstance(value, str):
            try:
                value = json.loads(value)
            except json.JSONDecodeError:
                pass
        section, _, key = dotted.partition(".")
        if not key:
            raise InputDomainError(f"override '{dotted}' must look like section.key")
        self.data = _merge(self.data, {section: {key: value}})
        self.validate()
        return self

    def __getitem__(self, section):
        return self.data[section]

    # ---------------------------------------------------------------- builders
    def validate(self):
        """Build every derived object once so bad values fail early."""
        self.theta()
        self.bank()
        self.problem()
        self.gains()
        self.capacitor()
        s = self.data["sim"]
        if not s["step"] or s["step"] <= 0:
            raise InputDomainError("sim.step must be positive")
        if s["theta_perturbation"] < 0:
            raise InputDomainError("sim.theta_perturbation must be >= 0")

    def theta(self):
        return check_theta(self.data["model"]["theta"])

    def bank(self):
        act = self.data["actuators"]
        theta = self.theta()
        k = np.asarray(act["k"], dtype=float)
        if act["a"] is None:
            a = np.asarray(act["electrical_fraction"], float) * theta[DAMPING_SLICE] / k
        else:
            a = np.asarray(act["a"], dtype=float)
        return ActuatorBank.default(theta, a=a, k=k, efficiency=act["efficiency"])

    def capacitor(self):
        act = self.data["actuators"]
        return CapacitorState(v=act["v0"], c=act["capacitance"])

    def problem(self, direction="AtoB"):
        p = self.data["problem"]
        bc = BoundaryConditions(q_start=p["q_start"], qd_start=p["qd_start"], q_end=p["q_end"],
                                qd_end=p["qd_end"])
        if direction == "BtoA":
            bc = bc.reversed()
        elif direction != "AtoB":
            raise InputDomainError(f"unknown direction {direction!r}")
        bank = self.bank()
        lower, upper = bank.torque_bounds(p["v_cap_assumed"])
        if p["tau_lower"] is not None:
            lower = np.broadcast_to(np.asarray(p["tau_lower"], float), (3,))
        if p["tau_upper"] is not None:
            upper = np.broadcast_to(np.asarray(p["tau_upper"], float), (3,))
        return CollocationProblem(
            N=int(p["N"]), horizon=float(p["horizon"]), boundary=bc, theta=self.theta(),
            bank=bank, v_cap=p["v_cap_assumed"], tau_lower=lower, tau_upper=upper,
            defects=p["defects"], quadrature=p["quadrature"])

    def solve_options(self):
        p = self.data["problem"]
        return {"starts": int(p["starts"]), "seed": int(p["seed"]), "tol": float(p["tol"]),
                "kkt_tol": float(p["kkt_tol"]), "inner": p["inner"]}

    def gains(self):
        c = self.data["controller"]
        return ControllerGains(K=c["K"], Lambda=c["Lambda"], rho=c["rho"],
                               epsilon=c["epsilon"], theta0=self.theta())

    def plant_theta(self):
        """Plant parameters: nominal, or scaled entry-wise by ``1 + U(-p, p)``."""
        s = self.data["sim"]
        theta = self.theta()
        p = float(s["theta_perturbation"])
        if p == 0:
            return theta
        rng = np.random.default_rng(int(s["seed"]))
        return check_theta(theta * (1.0 + rng.uniform(-p, p, theta.size)))
