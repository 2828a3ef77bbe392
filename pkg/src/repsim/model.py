"""Core problem model: instances, replication schedules, validity checks, exact costs.

A problem instance consists of n servers with per-time-unit storage cost rates
(sorted ascending), a uniform object transfer cost, an initial copy location,
and a sequence of timestamped read requests. A schedule records which servers
hold object copies over which intervals and which transfers were performed.
Feasibility requires at least one live copy at every instant and every request
to be served from a copy at its server (possibly created by a transfer at that
exact time). Instances and schedules are immutable after construction.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

TOL = 1e-9

KIND_REGULAR = "regular"
KIND_RESIDENT_SPECIAL = "resident_special"
KIND_RELOCATED_SPECIAL = "relocated_special"
KIND_OFFLINE = "offline"
COPY_KINDS = (KIND_REGULAR, KIND_RESIDENT_SPECIAL, KIND_RELOCATED_SPECIAL, KIND_OFFLINE)
SPECIAL_KINDS = (KIND_RESIDENT_SPECIAL, KIND_RELOCATED_SPECIAL)

PURPOSE_SERVE = "serve_request"
PURPOSE_CREATE = "create_copy"
PURPOSE_RELOCATE = "relocate"


class InstanceFormatError(ValueError):
    """Malformed instance data; carries best-effort file/line context."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        ctx = path or ""
        if line is not None:
            ctx += f":line {line}"
        super().__init__(f"{ctx}: {message}" if ctx else message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class Server:
    """A storage server; index is 1-based, rate is cost per time unit."""

    index: int
    rate: float


@dataclass(frozen=True)
class Request:
    """A read request; index 0 is reserved for the synthetic initial request."""

    index: int
    time: float
    server: int

    @property
    def is_dummy(self) -> bool:
        return self.index == 0


@dataclass(frozen=True)
class Instance:
    """An immutable problem instance.

    The synthetic request r0 (time 0, at the initial server) is materialized
    through ``dummy`` / ``all_requests`` and never receives allocated cost.
    """

    servers: tuple[Server, ...]
    transfer_cost: float
    initial_server: int
    requests: tuple[Request, ...]

    def __post_init__(self) -> None:
        if not self.servers:
            raise InstanceFormatError("instance needs at least one server")
        for k, srv in enumerate(self.servers, start=1):
            if srv.index != k:
                raise InstanceFormatError(f"server indices must be 1..n in order, got {srv.index} at position {k}")
            if srv.rate <= 0:
                raise InstanceFormatError(f"storage rate of server {k} must be strictly positive, got {srv.rate}")
        rates = [s.rate for s in self.servers]
        for k in range(1, len(rates)):
            if rates[k] < rates[k - 1]:
                raise InstanceFormatError(
                    f"rates must be ascending: rates[{k + 1}]={rates[k]} < rates[{k}]={rates[k - 1]}"
                )
        if self.transfer_cost <= 0:
            raise InstanceFormatError(f"transfer cost must be strictly positive, got {self.transfer_cost}")
        if not 1 <= self.initial_server <= len(self.servers):
            raise InstanceFormatError(f"initial server {self.initial_server} out of range 1..{len(self.servers)}")
        prev = 0.0
        for k, req in enumerate(self.requests, start=1):
            if req.index != k:
                raise InstanceFormatError(f"request indices must be 1..m in order, got {req.index} at position {k}")
            if not 1 <= req.server <= len(self.servers):
                raise InstanceFormatError(f"request {k} server {req.server} out of range 1..{len(self.servers)}")
            if req.time <= 0:
                raise InstanceFormatError(f"request {k} time {req.time} must be > 0 (time 0 is reserved)")
            if req.time <= prev:
                raise InstanceFormatError(
                    f"request times must strictly increase: request {k} at t={req.time} follows t={prev}"
                )
            prev = req.time

    @classmethod
    def build(
        cls,
        rates: "list[float] | tuple[float, ...]",
        transfer_cost: float,
        initial_server: int,
        requests: "list[tuple[float, int]] | tuple[tuple[float, int], ...]" = (),
    ) -> "Instance":
        servers = tuple(Server(i + 1, float(r)) for i, r in enumerate(rates))
        reqs = tuple(Request(j + 1, float(t), int(s)) for j, (t, s) in enumerate(requests))
        return cls(servers, float(transfer_cost), int(initial_server), reqs)

    @property
    def n(self) -> int:
        return len(self.servers)

    @property
    def m(self) -> int:
        return len(self.requests)

    def rate(self, server: int) -> float:
        return self.servers[server - 1].rate

    @property
    def dummy(self) -> Request:
        return Request(0, 0.0, self.initial_server)

    @property
    def all_requests(self) -> tuple[Request, ...]:
        return (self.dummy,) + self.requests

    @property
    def horizon(self) -> float:
        """Time of the final request; 0 when there are no real requests."""
        return self.requests[-1].time if self.requests else 0.0


def max_min_rate_ratio(instance: Instance) -> float:
    """Ratio of the largest to the smallest storage rate; 1.0 when all equal."""
    return instance.servers[-1].rate / instance.servers[0].rate


def competitive_bound(instance: Instance) -> float:
    """Worst-case guarantee of the threshold policy: max(2, min(ratio, 3))."""
    return max(2.0, min(max_min_rate_ratio(instance), 3.0))


@dataclass(frozen=True)
class CopyInterval:
    """A copy held at ``server`` over [start, end], with its copy kind.

    ``excluded`` marks the two copies the threshold policy keeps past the
    final request purely to preserve the object; they carry no horizon cost.
    """

    server: int
    start: float
    end: float
    kind: str = KIND_REGULAR
    excluded: bool = False

    def __post_init__(self) -> None:
        if self.end < self.start - TOL:
            raise ValueError(f"interval end {self.end} precedes start {self.start}")
        if self.kind not in COPY_KINDS:
            raise ValueError(f"unknown copy kind {self.kind!r}")


@dataclass(frozen=True)
class Transfer:
    time: float
    src: int
    dst: int
    purpose: str = PURPOSE_SERVE

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError("transfer source and destination must differ")


@dataclass(frozen=True)
class ReplicationSchedule:
    """Full record of one run: copy intervals plus transfers."""

    instance: Instance
    copies: tuple[CopyInterval, ...]
    transfers: tuple[Transfer, ...]

    @property
    def horizon(self) -> float:
        return self.instance.horizon


@dataclass(frozen=True)
class Violation:
    time: float
    description: str


def _holding_spans(schedule: ReplicationSchedule, server: int) -> list[tuple[float, float]]:
    """Maximal contiguous holding spans at one server (kind splits merged)."""
    ivals = sorted(
        ((c.start, c.end) for c in schedule.copies if c.server == server),
        key=lambda p: p,
    )
    spans: list[tuple[float, float]] = []
    for start, end in ivals:
        if spans and start <= spans[-1][1] + TOL:
            spans[-1] = (spans[-1][0], max(spans[-1][1], end))
        else:
            spans.append((start, end))
    return spans


def validate_schedule(schedule: ReplicationSchedule) -> list[Violation]:
    """Check feasibility; returns every violation found (empty means valid).

    Checks the three schedule invariants: at least one copy at every time in
    [0, horizon], every request served by a local copy at its time, and every
    copy creation sourced by a transfer into that server at its start time
    (the initial copy at the initial server being the one exception).
    """
    inst = schedule.instance
    out: list[Violation] = []

    horizon = inst.horizon
    covered = 0.0
    for start, end in sorted((max(c.start, 0.0), c.end) for c in schedule.copies):
        if start > covered + TOL:
            gap_end = min(start, horizon)
            if gap_end > covered + TOL:
                out.append(Violation(covered, f"coverage gap ({covered:g}, {gap_end:g}): no copy alive"))
            covered = start
        covered = max(covered, end)
        if covered >= horizon - TOL:
            break
    if covered < horizon - TOL:
        out.append(Violation(covered, f"coverage gap ({covered:g}, {horizon:g}): no copy alive"))

    spans_by_server = {s.index: _holding_spans(schedule, s.index) for s in inst.servers}
    for req in inst.all_requests:
        spans = spans_by_server[req.server]
        if not any(a - TOL <= req.time <= b + TOL for a, b in spans):
            out.append(
                Violation(req.time, f"request {req.index} at t={req.time:g} unserved: server {req.server} holds no copy")
            )

    transfers_in: dict[int, list[float]] = {}
    for tr in schedule.transfers:
        transfers_in.setdefault(tr.dst, []).append(tr.time)
    for server, spans in spans_by_server.items():
        for start, _end in spans:
            if start <= TOL and server == inst.initial_server:
                continue
            times = transfers_in.get(server, [])
            if not any(abs(t - start) <= TOL for t in times):
                out.append(
                    Violation(start, f"unsourced copy: server {server} copy starting at t={start:g} has no inbound transfer")
                )
    return out


@dataclass(frozen=True)
class CostBreakdown:
    storage: float
    transfer: float
    total: float
    per_server_storage: dict[int, float]
    transfer_count: int


def compute_cost(schedule: ReplicationSchedule, horizon: float | None = None) -> CostBreakdown:
    """Exact cost of a schedule up to ``horizon``.

    Storage accrues only over [0, horizon] (intervals clipped); every transfer
    at time <= horizon costs the uniform transfer cost. Defaults to the time
    of the final request.
    """
    inst = schedule.instance
    if horizon is None:
        horizon = inst.horizon
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    per_server = {s.index: 0.0 for s in inst.servers}
    for c in schedule.copies:
        lo = max(c.start, 0.0)
        hi = min(c.end, horizon)
        if hi > lo:
            per_server[c.server] += inst.rate(c.server) * (hi - lo)
    storage = sum(per_server.values())
    count = sum(1 for t in schedule.transfers if t.time <= horizon + TOL)
    transfer = inst.transfer_cost * count
    return CostBreakdown(storage, transfer, storage + transfer, per_server, count)


# ---------------------------------------------------------------------------
# Instance file format (JSON)

def dumps_instance(instance: Instance) -> str:
    """Serialize to the toolkit's JSON instance format, one request per line."""
    lines = ["{"]
    lines.append(f'  "lambda": {instance.transfer_cost!r},')
    lines.append(f'  "initial_server": {instance.initial_server},')
    lines.append(f'  "rates": {json.dumps([s.rate for s in instance.servers])},')
    if instance.requests:
        lines.append('  "requests": [')
        body = [f'    {{"t": {r.time!r}, "s": {r.server}}}' for r in instance.requests]
        lines.append(",\n".join(body))
        lines.append("  ]")
    else:
        lines.append('  "requests": []')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dump_instance(instance: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_instance(instance))


def _request_line(text: str, k: int) -> int | None:
    """Best-effort line number of the k-th (0-based) request object in raw JSON."""
    matches = list(re.finditer(r'\{[^{}]*"t"', text))
    if k < len(matches):
        return text.count("\n", 0, matches[k].start()) + 1
    return None


def loads_instance(text: str, path: str | None = None) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError("top-level value must be an object", path=path)
    for key in ("lambda", "initial_server", "rates", "requests"):
        if key not in doc:
            raise InstanceFormatError(f"missing key {key!r}", path=path)
    rates = doc["rates"]
    if not isinstance(rates, list) or not rates:
        raise InstanceFormatError("'rates' must be a nonempty array", path=path)
    for k in range(1, len(rates)):
        if rates[k] < rates[k - 1]:
            raise InstanceFormatError(
                f"'rates' must be ascending: rates[{k + 1}]={rates[k]} < rates[{k}]={rates[k - 1]}", path=path
            )
    reqs = doc["requests"]
    if not isinstance(reqs, list):
        raise InstanceFormatError("'requests' must be an array", path=path)
    pairs: list[tuple[float, int]] = []
    prev = 0.0
    for k, entry in enumerate(reqs):
        line = _request_line(text, k)
        if not isinstance(entry, dict) or "t" not in entry or "s" not in entry:
            raise InstanceFormatError(f"requests[{k}] must be an object with keys 't' and 's'", path=path, line=line)
        t, s = float(entry["t"]), int(entry["s"])
        if t <= 0:
            raise InstanceFormatError(f"requests[{k}] time {t} must be > 0 (time 0 is reserved)", path=path, line=line)
        if t <= prev:
            raise InstanceFormatError(
                f"requests[{k}] time {t} does not strictly increase past {prev} (tied or out-of-order timestamps are rejected)",
                path=path,
                line=line,
            )
        prev = t
        pairs.append((t, s))
    try:
        return Instance.build(rates, float(doc["lambda"]), int(doc["initial_server"]), pairs)
    except InstanceFormatError:
        raise
    except ValueError as exc:
        raise InstanceFormatError(str(exc), path=path) from exc


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return loads_instance(text, path=path)
