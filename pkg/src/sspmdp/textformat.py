"""Line-oriented MDP text format and a JSON equivalent.

::

    # comment
    states 2
    actions 1
    goal 1
    start 0
    t 0 0 1 1.0      # t s a s' prob
    c 0 0 1 1.0      # c s a s' cost  (omitted => 0, legal only from a goal)
    t 1 0 1 1.0
"""

from __future__ import annotations

import json
import math

import numpy as np

from .mdp import SspMdp, validate


class MdpFormatError(ValueError):
    """Syntax or invariant error in an MDP file; messages carry line numbers."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def _int(tok: str, what: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise MdpFormatError([f"line {lineno}: {what} {tok!r} is not an integer"]) from None


def _float(tok: str, what: str, lineno: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise MdpFormatError([f"line {lineno}: {what} {tok!r} is not a number"]) from None
    if not math.isfinite(value):
        raise MdpFormatError([f"line {lineno}: {what} {tok!r} is not finite"])
    return value


def parse_mdp(text: str, check: bool = True) -> SspMdp:
    """Parse the text format.

    With ``check`` (default) the result is run through :func:`validate` and
    any violation raises :class:`MdpFormatError`, citing the line of the
    first ``t`` entry of the offending row where there is one.
    """
    num_states = num_actions = None
    goals: list[int] = []
    start = None
    t_lines: dict = {}
    c_lines: dict = {}
    row_line: dict = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        if head in ("states", "actions"):
            if len(args) != 1:
                raise MdpFormatError([f"line {lineno}: '{head}' takes one integer"])
            value = _int(args[0], head, lineno)
            if value < 1:
                raise MdpFormatError([f"line {lineno}: {head} must be positive"])
            if head == "states":
                num_states = value
            else:
                num_actions = value
        elif head == "goal":
            goals.extend(_int(g, "goal", lineno) for g in args)
        elif head == "start":
            if len(args) != 1:
                raise MdpFormatError([f"line {lineno}: 'start' takes one integer"])
            start = _int(args[0], "start", lineno)
        elif head in ("t", "c"):
            if len(args) != 4:
                raise MdpFormatError([f"line {lineno}: '{head}' expects s a s' value"])
            if num_states is None or num_actions is None:
                raise MdpFormatError([f"line {lineno}: 'states' and 'actions' must come first"])
            s, a, s2 = (_int(x, "index", lineno) for x in args[:3])
            if not (0 <= s < num_states and 0 <= s2 < num_states):
                raise MdpFormatError([f"line {lineno}: state index out of range"])
            if not 0 <= a < num_actions:
                raise MdpFormatError([f"line {lineno}: action index out of range"])
            key = (s, a, s2)
            if head == "t":
                p = _float(args[3], "probability", lineno)
                if not 0 <= p <= 1:
                    raise MdpFormatError([f"probability {args[3]} out of range at line {lineno}"])
                if key in t_lines:
                    raise MdpFormatError([f"line {lineno}: duplicate transition {key} "
                                          f"(first at line {t_lines[key][0]})"])
                t_lines[key] = (lineno, p)
                row_line.setdefault((s, a), lineno)
            else:
                cost = _float(args[3], "cost", lineno)
                if cost < 0:
                    raise MdpFormatError([f"cost {args[3]} is negative at line {lineno}"])
                if key in c_lines:
                    raise MdpFormatError([f"line {lineno}: duplicate cost {key} "
                                          f"(first at line {c_lines[key][0]})"])
                c_lines[key] = (lineno, cost)
        else:
            raise MdpFormatError([f"line {lineno}: unknown directive {head!r}"])

    if num_states is None or num_actions is None:
        raise MdpFormatError(["missing 'states' or 'actions' header"])
    for key, (lineno, _) in c_lines.items():
        if key not in t_lines:
            raise MdpFormatError([f"line {lineno}: cost given for undefined transition {key}"])

    t = np.zeros((num_states, num_actions, num_states))
    c = np.zeros_like(t)
    for (s, a, s2), (_, p) in t_lines.items():
        t[s, a, s2] = p
    for (s, a, s2), (_, cost) in c_lines.items():
        c[s, a, s2] = cost
    try:
        mdp = SspMdp(t, c, frozenset(goals), start)
    except ValueError as exc:
        raise MdpFormatError([str(exc)]) from None

    if check:
        problems = validate(mdp)
        if problems:
            msgs = []
            for v in problems:
                where = v.where
                lineno = None
                if len(where) == 3:
                    lineno = (t_lines.get(where) or c_lines.get(where) or (None,))[0]
                if lineno is None and len(where) >= 2:
                    lineno = row_line.get(where[:2])
                msgs.append(f"{v.message} (line {lineno})" if lineno else v.message)
            raise MdpFormatError(msgs)
    return mdp


def _num(x: float) -> str:
    return repr(float(x))


def write_mdp(mdp: SspMdp) -> str:
    """Serialize losslessly; costs are omitted only where they are zero."""
    lines = [f"states {mdp.num_states}", f"actions {mdp.num_actions}"]
    if mdp.goals:
        lines.append("goal " + " ".join(str(g) for g in sorted(mdp.goals)))
    if mdp.start is not None:
        lines.append(f"start {mdp.start}")
    t, c = mdp.transitions, mdp.costs
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            for s2 in np.flatnonzero(t[s, a] > 0):
                lines.append(f"t {s} {a} {s2} {_num(t[s, a, s2])}")
                if c[s, a, s2] != 0:
                    lines.append(f"c {s} {a} {s2} {_num(c[s, a, s2])}")
    return "\n".join(lines) + "\n"


def mdp_to_json(mdp: SspMdp) -> str:
    t, c = mdp.transitions, mdp.costs
    entries = [[int(s), int(a), int(s2), float(t[s, a, s2]), float(c[s, a, s2])]
               for s, a, s2 in zip(*np.nonzero(t > 0))]
    doc = {"states": mdp.num_states, "actions": mdp.num_actions,
           "goals": sorted(mdp.goals), "start": mdp.start, "transitions": entries}
    return json.dumps(doc, indent=1) + "\n"


def mdp_from_json(text: str, check: bool = True) -> SspMdp:
    doc = json.loads(text)
    mdp = SspMdp.from_entries(doc["states"], doc["actions"],
                              [tuple(e) for e in doc["transitions"]],
                              doc.get("goals", ()), doc.get("start"))
    if check:
        problems = validate(mdp)
        if problems:
            raise MdpFormatError([v.message for v in problems])
    return mdp
