"""A small incremental CDCL SAT solver and CNF/DIMACS plumbing.

Literals use the DIMACS convention externally (variable ``v`` is ``v`` or
``-v``, variables start at 1). Internally literal ``2*v`` is positive and
``2*v + 1`` negative, so negation is ``lit ^ 1``.

The solver does two-watched-literal propagation, first-UIP clause learning
with local minimization, phase saving, Luby restarts and learnt-clause
reduction. Branching is either first-unassigned (default) or VSIDS. It is
incremental: clauses may be added between calls, calls may pass assumption
literals, and ``push``/``pop`` scope clauses behind selector variables.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class SatError(Exception):
    pass


class BudgetExceeded(SatError):
    """The conflict budget or deadline ran out before a verdict."""


class ModelCheckError(SatError):
    pass


@dataclass
class Cnf:
    num_vars: int = 0
    clauses: list = field(default_factory=list)

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def add(self, clause: Iterable[int]) -> None:
        c = tuple(clause)
        for lit in c:
            if lit == 0:
                raise SatError("literal 0 is not allowed")
            self.num_vars = max(self.num_vars, abs(lit))
        self.clauses.append(c)

    add_clause = add

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        """``assignment[v]`` is the value of variable v (index 0 unused)."""
        return all(any(assignment[abs(l)] == (l > 0) for l in c) for c in self.clauses)


def export_dimacs(f: Cnf) -> str:
    lines = [f"p cnf {f.num_vars} {len(f.clauses)}"]
    lines.extend(" ".join(str(l) for l in c) + " 0" if c else "0" for c in f.clauses)
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> Cnf:
    f = Cnf()
    declared = None
    pending: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line[0] in "c%":
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise SatError(f"bad header {line!r}")
            declared = (int(parts[2]), int(parts[3]))
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                f.add(pending)
                pending = []
            else:
                pending.append(lit)
    if pending:
        f.add(pending)
    if declared is not None:
        f.num_vars = max(f.num_vars, declared[0])
        if declared[1] != len(f.clauses):
            raise SatError(f"header says {declared[1]} clauses, found {len(f.clauses)}")
    return f


def _luby(i: int) -> int:
    # i >= 1
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


class Solver:
    """Incremental CDCL solver.

    ``solve`` returns True (model available via ``model``/``value``) or
    False, and raises ``BudgetExceeded`` when out of conflicts or time.
    """

    restart_unit = 100

    def __init__(self, heuristic: str = "first"):
        if heuristic not in ("first", "vsids"):
            raise ValueError(f"unknown heuristic {heuristic!r}")
        self.heuristic = heuristic
        self.nvars = 0
        self.val = [0, 0]  # per internal literal: 1 true, -1 false, 0 free
        self.level = [0]
        self.reason: list = [None]
        self.phase = [False]
        self.activity = [0.0]
        self.seen = [False]
        self.watches: list[list] = [[], []]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.ok = True
        self.original: list[tuple[int, ...]] = []
        self.learnts: list[list] = []
        self.max_learnts = 4000
        self.var_inc = 1.0
        self.heap: list = []
        self.next_first = 1
        self.selectors: list[int] = []
        self.model: list[bool] = []
        self.stats = {"conflicts": 0, "decisions": 0, "propagations": 0, "solves": 0, "restarts": 0}

    # -- variables and clauses -------------------------------------------

    def new_var(self) -> int:
        self.nvars += 1
        self.val.extend((0, 0))
        self.level.append(0)
        self.reason.append(None)
        self.phase.append(False)
        self.activity.append(0.0)
        self.seen.append(False)
        self.watches.extend(([], []))
        if self.heuristic == "vsids":
            heapq.heappush(self.heap, (0.0, self.nvars))
        return self.nvars

    def _ensure(self, v: int) -> None:
        while self.nvars < v:
            self.new_var()

    @property
    def num_vars(self) -> int:
        return self.nvars

    def add_clause(self, lits: Iterable[int]) -> bool:
        """Add a clause permanently (or to the current push scope).

        Returns False once the formula is known unsatisfiable at level 0.
        """
        clause = tuple(lits)
        if self.selectors:
            clause = clause + (-self.selectors[-1],)
        return self._add(clause)

    def _add(self, clause: tuple[int, ...]) -> bool:
        for l in clause:
            if l == 0:
                raise SatError("literal 0 is not allowed")
            self._ensure(abs(l))
        self.original.append(clause)
        if not self.ok:
            return False
        if self.trail_lim:
            self._cancel_until(0)
        val = self.val
        lits = []
        for l in dict.fromkeys(clause):
            p = 2 * l if l > 0 else -2 * l + 1
            if val[p] == 1 or p ^ 1 in lits:
                return True  # satisfied at level 0 or tautology
            if val[p] == 0:
                lits.append(p)
        if not lits:
            self.ok = False
            return False
        if len(lits) == 1:
            self._enqueue(lits[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self.watches[lits[0]].append(lits)
        self.watches[lits[1]].append(lits)
        return True

    def push(self) -> int:
        """Open a clause scope; clauses added until ``pop`` are retractable."""
        sel = self.new_var()
        self.selectors.append(sel)
        return sel

    def pop(self) -> None:
        sel = self.selectors.pop()
        saved = self.selectors
        self.selectors = []
        self._add((-sel,))
        self.selectors = saved

    # -- core ------------------------------------------------------------

    def _enqueue(self, p: int, reason) -> None:
        v = p >> 1
        self.val[p] = 1
        self.val[p ^ 1] = -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(p)

    def _propagate(self):
        val = self.val
        watches = self.watches
        trail = self.trail
        level = self.level
        reason = self.reason
        lvl = len(self.trail_lim)
        qhead = self.qhead
        props = 0
        conflict = None
        while qhead < len(trail):
            fl = trail[qhead] ^ 1
            qhead += 1
            props += 1
            ws = watches[fl]
            n = len(ws)
            i = j = 0
            while i < n:
                c = ws[i]
                i += 1
                first = c[0]
                if first == fl:
                    first = c[1]
                    c[0] = first
                    c[1] = fl
                if val[first] == 1:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    l = c[k]
                    if val[l] != -1:
                        c[1] = l
                        c[k] = fl
                        watches[l].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if val[first] == -1:
                        conflict = c
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        break
                    v = first >> 1
                    val[first] = 1
                    val[first ^ 1] = -1
                    level[v] = lvl
                    reason[v] = c
                    trail.append(first)
            del ws[j:]
            if conflict is not None:
                break
        self.qhead = qhead
        self.stats["propagations"] += props
        return conflict

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        val = self.val
        phase = self.phase
        vsids = self.heuristic == "vsids"
        act = self.activity
        lowest = self.next_first
        for p in self.trail[start:]:
            v = p >> 1
            val[p] = 0
            val[p ^ 1] = 0
            phase[v] = not (p & 1)
            self.reason[v] = None
            if vsids:
                heapq.heappush(self.heap, (-act[v], v))
            elif v < lowest:
                lowest = v
        self.next_first = lowest
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _bump(self, v: int) -> None:
        act = self.activity
        act[v] += self.var_inc
        if act[v] > 1e100:
            for i in range(1, self.nvars + 1):
                act[i] *= 1e-100
            self.var_inc *= 1e-100
            self.heap = [(-act[u], u) for u in range(1, self.nvars + 1) if self.val[2 * u] == 0]
            heapq.heapify(self.heap)
        elif self.val[2 * v] == 0:
            heapq.heappush(self.heap, (-act[v], v))

    def _analyze(self, confl):
        seen = self.seen
        level = self.level
        reason = self.reason
        trail = self.trail
        cur = len(self.trail_lim)
        vsids = self.heuristic == "vsids"
        learnt = [0]
        counter = 0
        p = None
        idx = len(trail) - 1
        marked = []
        while True:
            for q in confl:
                if p is not None and q == p:
                    continue
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = True
                    marked.append(v)
                    if vsids:
                        self._bump(v)
                    if level[v] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            confl = reason[p >> 1]
            seen[p >> 1] = False
            counter -= 1
            if counter == 0:
                break
        learnt[0] = p ^ 1

        # drop literals implied by the rest of the clause (local minimization)
        kept = [learnt[0]]
        for q in learnt[1:]:
            r = reason[q >> 1]
            if r is None:
                kept.append(q)
                continue
            for x in r:
                u = x >> 1
                if u != q >> 1 and not seen[u] and level[u] > 0:
                    kept.append(q)
                    break
        for v in marked:
            seen[v] = False

        if len(kept) == 1:
            back = 0
        else:
            best = 1
            for k in range(2, len(kept)):
                if level[kept[k] >> 1] > level[kept[best] >> 1]:
                    best = k
            kept[1], kept[best] = kept[best], kept[1]
            back = level[kept[1] >> 1]
        if vsids:
            self.var_inc *= 1.05
        return kept, back

    def _pick_branch(self) -> int:
        val = self.val
        if self.heuristic == "vsids":
            heap = self.heap
            act = self.activity
            while heap:
                a, v = heapq.heappop(heap)
                if val[2 * v] == 0 and -a == act[v]:
                    return v
            for v in range(1, self.nvars + 1):
                if val[2 * v] == 0:
                    return v
            return 0
        v = self.next_first
        n = self.nvars
        while v <= n and val[2 * v] != 0:
            v += 1
        self.next_first = v
        return v if v <= n else 0

    def _reduce_db(self) -> None:
        locked = set()
        for p in self.trail:
            r = self.reason[p >> 1]
            if r is not None:
                locked.add(id(r))
        self.learnts.sort(key=len)
        keep_n = len(self.learnts) // 2
        keep = self.learnts[:keep_n]
        drop = []
        for c in self.learnts[keep_n:]:
            if id(c) in locked or len(c) <= 2:
                keep.append(c)
            else:
                drop.append(c)
        if not drop:
            self.max_learnts = int(self.max_learnts * 1.5)
            return
        dropped = {id(c) for c in drop}
        touched = set()
        for c in drop:
            touched.add(c[0])
            touched.add(c[1])
        for lit in touched:
            self.watches[lit] = [c for c in self.watches[lit] if id(c) not in dropped]
        self.learnts = keep
        self.max_learnts = int(self.max_learnts * 1.1)

    def solve(
        self,
        assumptions: Sequence[int] = (),
        conflict_budget: int | None = None,
        deadline: float | None = None,
    ) -> bool:
        self.stats["solves"] += 1
        self.model = []
        if not self.ok:
            return False
        for l in assumptions:
            self._ensure(abs(l))
        assume = [2 * s for s in self.selectors]
        assume += [2 * l if l > 0 else -2 * l + 1 for l in assumptions]
        self._cancel_until(0)
        if self._propagate() is not None:
            self.ok = False
            return False

        conflicts = 0
        restart_no = 1
        restart_at = _luby(restart_no) * self.restart_unit
        since_restart = 0
        val = self.val
        try:
            while True:
                confl = self._propagate()
                if confl is not None:
                    conflicts += 1
                    since_restart += 1
                    self.stats["conflicts"] += 1
                    if not self.trail_lim:
                        self.ok = False
                        return False
                    learnt, back = self._analyze(confl)
                    self._cancel_until(back)
                    if len(learnt) == 1:
                        self._enqueue(learnt[0], None)
                    else:
                        self.watches[learnt[0]].append(learnt)
                        self.watches[learnt[1]].append(learnt)
                        self.learnts.append(learnt)
                        self._enqueue(learnt[0], learnt)
                    if conflict_budget is not None and conflicts >= conflict_budget:
                        raise BudgetExceeded(f"conflict budget {conflict_budget} exhausted")
                    if deadline is not None and conflicts % 64 == 0 and time.monotonic() > deadline:
                        raise BudgetExceeded("deadline passed")
                    continue

                if since_restart >= restart_at:
                    since_restart = 0
                    restart_no += 1
                    restart_at = _luby(restart_no) * self.restart_unit
                    self.stats["restarts"] += 1
                    self._cancel_until(0)
                    continue
                if len(self.learnts) - len(self.trail) >= self.max_learnts:
                    self._reduce_db()

                dl = len(self.trail_lim)
                if dl < len(assume):
                    p = assume[dl]
                    if val[p] == 1:
                        self.trail_lim.append(len(self.trail))
                        continue
                    if val[p] == -1:
                        return False
                else:
                    v = self._pick_branch()
                    if v == 0:
                        self.model = [False] + [val[2 * u] == 1 for u in range(1, self.nvars + 1)]
                        self._check_model()
                        return True
                    self.stats["decisions"] += 1
                    p = 2 * v if self.phase[v] else 2 * v + 1
                self.trail_lim.append(len(self.trail))
                self._enqueue(p, None)
        finally:
            self._cancel_until(0)

    def _check_model(self) -> None:
        m = self.model
        for c in self.original:
            if not any(m[l] if l > 0 else not m[-l] for l in c):
                raise ModelCheckError(f"model violates clause {c}")

    def value(self, lit: int) -> bool:
        v = self.model[abs(lit)]
        return v if lit > 0 else not v


def sat_solve(
    f: Cnf,
    conflict_budget: int | None = 1_000_000,
    heuristic: str = "first",
) -> list[bool] | None:
    """Satisfying assignment (index = variable, index 0 unused) or None if UNSAT.

    Raises ``BudgetExceeded`` when the conflict budget runs out.
    """
    s = Solver(heuristic)
    s._ensure(f.num_vars)
    for c in f.clauses:
        if not s.add_clause(c):
            return None
    if not s.solve(conflict_budget=conflict_budget):
        return None
    model = s.model[: f.num_vars + 1]
    if not f.satisfied_by(model):
        raise ModelCheckError("model does not satisfy the formula")
    return model
