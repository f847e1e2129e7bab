"""Problem documents: JSON text in, resolved :class:`ProblemSpec` out.

Complex numbers are ``[re, im]`` pairs (a bare real number is also
accepted); matrices are row-major lists of rows of such entries.

Example document::

    {
      "family": "version1",
      "params": {"a": 1, "b": 1},
      "state": [[[0.5, 0], [0.2, 0]], [[0.2, 0], [0.5, 0]]],
      "postselect": [[1, 0], [1, 0]],
      "solver": "inverse_square",
      "grid": {"g0": 0.01, "ratio": 0.5, "count": 8}
    }

``family`` may instead be ``{"table": [{"g": ..., "operators": [M, ...]}, ...]}``
for fixed per-g operator tables.  ``solver`` is ``pinv``, ``minvar``,
``custom`` (with an ``alpha`` table of ``{"g": ..., "alpha": [...]}``) or the
label of a closed-form solution of the builtin family (e.g. ``inverse_square``).
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .contextual import Observable, default_grid
from .errors import ContextualValuesError
from .families import BUILTINS, get_entry
from .measurement import tabulated_family
from .operators import projector_from_vector, validate_density

SOLVERS = ("pinv", "minvar", "custom")


class SpecError(ContextualValuesError, ValueError):
    """Invalid problem document; ``problems`` lists one message per bad field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(eq=False)
class ProblemSpec:
    family: str
    params: dict
    table: Optional[dict]
    observable: np.ndarray
    state: np.ndarray
    postselect: np.ndarray
    solver: str
    alpha_table: Optional[dict]
    grid: tuple
    entry: object = field(default=None, repr=False)

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return serialize_problem(self) == serialize_problem(other)

    @property
    def fam(self):
        return self.entry.family if self.entry is not None else tabulated_family(self.table)

    @property
    def rho(self):
        return validate_density(self.state)

    @property
    def post(self):
        return projector_from_vector(self.postselect)

    @property
    def obs(self):
        return Observable(self.observable)

    def solver_selector(self):
        """``"pinv"``/``"minvar"`` or a callable ``g -> alpha``."""
        if self.solver in ("pinv", "minvar"):
            return self.solver
        if self.solver == "custom":
            keys = np.array(sorted(self.alpha_table))

            def alpha(g):
                k = keys[int(np.argmin(np.abs(keys - g)))]
                return np.asarray(self.alpha_table[k], dtype=float)

            return alpha
        return self.entry.closed_form_solutions[self.solver]


def _complex(x, where):
    if isinstance(x, bool):
        raise ValueError(f"{where}: malformed complex entry {x!r}")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        return complex(x[0], x[1])
    raise ValueError(f"{where}: malformed complex entry {x!r}; expected [re, im]")


def parse_vector(doc, where):
    if not isinstance(doc, list) or not doc:
        raise ValueError(f"{where}: expected a non-empty list of [re, im] entries")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(doc)])


def parse_matrix(doc, where):
    if not isinstance(doc, list) or not doc or not all(isinstance(r, list) for r in doc):
        raise ValueError(f"{where}: expected a list of rows")
    n = len(doc)
    if any(len(r) != n for r in doc):
        raise ValueError(f"{where}: matrix must be square ({n} rows)")
    return np.array(
        [[_complex(x, f"{where}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(doc)]
    )


def _pair(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def dump_vector(v):
    return [_pair(z) for z in v]


def dump_matrix(m):
    return [[_pair(z) for z in row] for row in np.asarray(m)]


def _parse_grid(doc):
    if isinstance(doc, dict):
        unknown = set(doc) - {"g0", "ratio", "count"}
        if unknown:
            raise ValueError(f"grid: unknown keys {sorted(unknown)}")
        g0 = float(doc.get("g0", 1e-2))
        ratio = float(doc.get("ratio", 0.5))
        count = doc.get("count", 8)
        if not isinstance(count, int) or count < 1 or not 0 < ratio < 1:
            raise ValueError("grid: need integer count >= 1 and 0 < ratio < 1")
        return tuple(default_grid(g0, ratio, count))
    if isinstance(doc, list) and doc and all(
        isinstance(g, (int, float)) and not isinstance(g, bool) for g in doc
    ):
        return tuple(float(g) for g in doc)
    raise ValueError("grid: expected a list of numbers or {g0, ratio, count}")


def parse_problem(document):
    """Resolve a problem document (JSON text or already-decoded dict).

    Raises :class:`SpecError` listing every invalid field.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError([f"document: invalid JSON ({exc})"]) from None
    if not isinstance(document, dict):
        raise SpecError(["document: expected a JSON object"])
    problems = []
    known = {"family", "params", "observable", "state", "postselect", "solver", "alpha", "grid"}
    for key in sorted(set(document) - known):
        problems.append(f"{key}: unknown field")

    # family
    entry, table, name, params = None, None, None, dict(document.get("params") or {})
    fam_doc = document.get("family")
    if isinstance(fam_doc, str):
        name = fam_doc
        if name not in BUILTINS:
            problems.append(f"family: unknown builtin {name!r} (choose from {sorted(BUILTINS)})")
        else:
            try:
                entry = get_entry(name, **params)
                params = dict(entry.params)
            except (TypeError, ValueError) as exc:
                problems.append(f"params: {exc}")
    elif isinstance(fam_doc, dict) and isinstance(fam_doc.get("table"), list):
        name = "table"
        try:
            table = {}
            for i, row in enumerate(fam_doc["table"]):
                ops = [parse_matrix(m, f"family.table[{i}].operators[{k}]") for k, m in enumerate(row["operators"])]
                table[float(row["g"])] = ops
            tabulated_family(table)
        except (KeyError, TypeError) as exc:
            problems.append(f"family.table: missing or malformed entry ({exc})")
            table = None
        except ValueError as exc:
            problems.append(f"family.table: {exc}")
            table = None
    else:
        problems.append("family: expected a builtin name or {\"table\": [...]}")
    dim = None
    if entry is not None:
        dim = entry.family.dim
    elif table:
        dim = next(iter(table.values()))[0].shape[0]

    # observable
    observable = None
    if "observable" in document:
        try:
            observable = Observable(parse_matrix(document["observable"], "observable")).matrix
            if dim is not None and observable.shape[0] != dim:
                problems.append(f"observable: dimension {observable.shape[0]} does not match family dimension {dim}")
        except ValueError as exc:
            problems.append(str(exc) if str(exc).startswith("observable") else f"observable: {exc}")
    elif entry is not None:
        observable = entry.observable.matrix
    elif table is not None:
        problems.append("observable: required for tabulated families")

    # state
    state = None
    if "state" in document:
        try:
            m = parse_matrix(document["state"], "state")
            state = validate_density(m).matrix
            if dim is not None and state.shape[0] != dim:
                problems.append(f"state: dimension {state.shape[0]} does not match family dimension {dim}")
        except ValueError as exc:
            msg = str(exc)
            problems.append(msg if msg.startswith("state") else f"state: {msg}")
    elif dim is not None:
        state = np.eye(dim, dtype=complex) / dim

    # postselection
    post = None
    if "postselect" in document:
        try:
            post = parse_vector(document["postselect"], "postselect")
            projector_from_vector(post)
            if dim is not None and post.shape[0] != dim:
                problems.append(f"postselect: dimension {post.shape[0]} does not match family dimension {dim}")
        except ValueError as exc:
            msg = str(exc)
            problems.append(msg if msg.startswith("postselect") else f"postselect: {msg}")
    elif dim is not None:
        post = np.ones(dim, dtype=complex) / np.sqrt(dim)

    # grid
    grid = None
    try:
        if "grid" in document:
            grid = _parse_grid(document["grid"])
        elif table is not None:
            grid = tuple(sorted(table, reverse=True))
        else:
            grid = tuple(default_grid())
    except ValueError as exc:
        problems.append(str(exc))
    fam = entry.family if entry is not None else (tabulated_family(table) if table else None)
    if grid is not None and fam is not None:
        bad = [g for g in grid if not 0 < g <= fam.g_max]
        if bad:
            problems.append(f"grid: values {bad} outside (0, {fam.g_max}]")

    # solver
    solver = document.get("solver", "pinv")
    alpha_table = None
    closed = sorted(entry.closed_form_solutions) if entry is not None else []
    if not isinstance(solver, str) or (solver not in SOLVERS and solver not in closed):
        problems.append(f"solver: {solver!r} is not one of {list(SOLVERS) + closed}")
    elif solver == "custom":
        try:
            alpha_table = {
                float(row["g"]): tuple(float(a) for a in row["alpha"]) for row in document["alpha"]
            }
            if grid is not None:
                missing = [g for g in grid if not any(abs(g - k) <= 1e-12 * g for k in alpha_table)]
                if missing:
                    problems.append(f"alpha: no contextual values for g in {missing}")
            if fam is not None and any(len(a) != fam.n_outcomes for a in alpha_table.values()):
                problems.append(f"alpha: every entry needs {fam.n_outcomes} values")
        except (KeyError, TypeError, ValueError):
            problems.append("alpha: custom solver needs a table [{\"g\": ..., \"alpha\": [...]}, ...]")

    if problems:
        raise SpecError(problems)
    return ProblemSpec(
        family=name,
        params=params,
        table=table,
        observable=observable,
        state=state,
        postselect=post,
        solver=solver,
        alpha_table=alpha_table,
        grid=grid,
        entry=entry,
    )


def serialize_problem(spec: ProblemSpec):
    """Document (a dict) that :func:`parse_problem` maps back to ``spec``."""
    doc = {
        "observable": dump_matrix(spec.observable),
        "state": dump_matrix(spec.state),
        "postselect": dump_vector(spec.postselect),
        "solver": spec.solver,
        "grid": [float(g) for g in spec.grid],
    }
    if spec.table is not None:
        doc["family"] = {
            "table": [
                {"g": float(g), "operators": [dump_matrix(m) for m in ops]}
                for g, ops in sorted(spec.table.items())
            ]
        }
    else:
        doc["family"] = spec.family
        doc["params"] = {k: v for k, v in spec.params.items()}
    if spec.alpha_table is not None:
        doc["alpha"] = [{"g": float(g), "alpha": list(a)} for g, a in sorted(spec.alpha_table.items())]
    return doc
