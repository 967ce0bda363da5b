"""Runtime for waypoint scripts: vehicle effects plus an auditable log.

The simulator calls into a ScriptRuntime at lifecycle points; handlers
execute their statements immediately and mutate a small effects state
(color, passengers, horn, lights). Driving control is limited to pause
requests, which the runtime returns to the caller; the last
pauseDriving/resumeDriving call inside one handler wins.

Runtime faults (bad color, negative flash count, non-positive pause)
abort the rest of that handler only, are logged as R-code diagnostics,
and never stop the simulation.
"""

import re
from dataclasses import dataclass, field

from .dsl import Diagnostic, Repeat
from .errors import RuntimeFault

NAMED_COLORS = ("red", "yellow", "blue", "green", "white", "black")
_HEX_COLOR = re.compile(r"^#[0-9a-fA-F]{6}$")

DEFAULT_COLOR = "white"


@dataclass
class VehicleEffects:
    color: str = DEFAULT_COLOR
    passengers: int = 0
    horn_beeps: int = 0
    light_flashes: int = 0


@dataclass(frozen=True)
class EffectRecord:
    t: int
    event: str  # "start" | "step" | "end" | waypoint name
    function: str
    args: tuple
    passengers: int  # state after the call
    color: str


class _HandlerAbort(Exception):
    pass


def validate_color(value):
    if value in NAMED_COLORS or _HEX_COLOR.match(value):
        return
    raise RuntimeFault("R301", f"invalid color {value!r}")


class ScriptRuntime:
    """Executes one program's handlers over one episode."""

    def __init__(self, program):
        self.program = program
        self.effects = VehicleEffects()
        self.log = []
        self.diagnostics = []
        self._handlers = {}
        for item in program.items:
            self._handlers[(item.kind, item.waypoint)] = item

    # -- dispatch points, each returns an optional pause request --

    def on_start(self, t, state):
        return self._dispatch(("start", None), "start", t, state)

    def on_step(self, t, state):
        return self._dispatch(("step", None), "step", t, state)

    def on_end(self, t, state):
        return self._dispatch(("end", None), "end", t, state)

    def waypoint(self, name, t, state):
        return self._dispatch(("waypoint", name), name, t, state)

    # -- execution --

    def _dispatch(self, key, event_label, t, state):
        handler = self._handlers.get(key)
        if handler is None:
            return None
        self._pending = None
        try:
            self._exec_stmts(handler.body, event_label, t)
        except _HandlerAbort:
            pass
        return self._pending

    def _exec_stmts(self, stmts, event_label, t):
        for stmt in stmts:
            if isinstance(stmt, Repeat):
                for _ in range(max(0, stmt.count)):
                    self._exec_stmts(stmt.body, event_label, t)
                continue
            try:
                self._apply(stmt.name, stmt.args, event_label, t)
            except RuntimeFault as fault:
                self.diagnostics.append(
                    Diagnostic("error", stmt.line, stmt.column, fault.code, str(fault))
                )
                raise _HandlerAbort() from fault

    def _apply(self, name, args, event_label, t):
        fx = self.effects
        if name == "setColor":
            validate_color(args[0])
            fx.color = args[0]
        elif name == "beepHorn":
            fx.horn_beeps += 1
        elif name == "flashLights":
            if args[0] < 0:
                raise RuntimeFault("R302", f"flash count must be >= 0, got {args[0]}")
            fx.light_flashes += args[0]
        elif name == "loadPassenger":
            fx.passengers += 1
        elif name == "unloadAllPassengers":
            fx.passengers = 0
        elif name == "pauseDriving":
            if args[0] <= 0:
                raise RuntimeFault("R303", f"pause duration must be positive, got {args[0]}")
            self._pending = ("pause", float(args[0]))
        elif name == "resumeDriving":
            self._pending = ("resume",)
        else:
            raise RuntimeFault("R301", f"unknown function {name!r}")  # unreachable after check
        self.log.append(
            EffectRecord(
                t=t, event=event_label, function=name, args=tuple(args),
                passengers=fx.passengers, color=fx.color,
            )
        )


# === serialization for stored episodes ===


def effects_to_dict(runtime):
    return {
        "final": {
            "color": runtime.effects.color,
            "passengers": runtime.effects.passengers,
            "hornBeeps": runtime.effects.horn_beeps,
            "lightFlashes": runtime.effects.light_flashes,
        },
        "log": [
            {
                "t": r.t,
                "event": r.event,
                "function": r.function,
                "args": list(r.args),
                "passengers": r.passengers,
                "color": r.color,
            }
            for r in runtime.log
        ],
        "diagnostics": [
            {
                "severity": d.severity,
                "line": d.line,
                "column": d.column,
                "code": d.code,
                "message": d.message,
            }
            for d in runtime.diagnostics
        ],
    }


@dataclass
class EffectReport:
    """Deserialized effects sidecar, shaped like a finished runtime."""

    effects: VehicleEffects
    log: list
    diagnostics: list


def effects_from_dict(d):
    fx = VehicleEffects(
        color=d["final"]["color"],
        passengers=int(d["final"]["passengers"]),
        horn_beeps=int(d["final"]["hornBeeps"]),
        light_flashes=int(d["final"]["lightFlashes"]),
    )
    log = [
        EffectRecord(
            t=int(r["t"]),
            event=r["event"],
            function=r["function"],
            args=tuple(r["args"]),
            passengers=int(r["passengers"]),
            color=r["color"],
        )
        for r in d.get("log", [])
    ]
    diags = [
        Diagnostic(x["severity"], int(x["line"]), int(x["column"]), x["code"], x["message"])
        for x in d.get("diagnostics", [])
    ]
    return EffectReport(effects=fx, log=log, diagnostics=diags)
