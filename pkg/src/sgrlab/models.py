"""Model types: projection matrices, environment sets, environmental chains.

A model is a finite set of nonnegative stage-projection matrices (one per
environmental state) together with a switching process over those states,
either IID draws from a fixed distribution or a finite Markov chain.  The
population evolves by ``z(t+1) = A[e(t+1)] @ z(t)`` where ``e`` is the
environment path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import ValidationError

PROB_TOL = 1e-12  # tolerance for probability normalization checks


def as_projection_matrix(matrix, name: str = "matrix") -> np.ndarray:
    """Validate and return a square nonnegative float matrix (read-only)."""
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValidationError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(a < 0):
        raise ValidationError(f"{name} has negative entries")
    a.setflags(write=False)
    return a


def incidence_pattern(matrix: np.ndarray) -> np.ndarray:
    """Boolean support pattern of a matrix (True where nonzero)."""
    return np.asarray(matrix) != 0


@dataclass
class EnvironmentSet:
    """Ordered finite collection of same-sized projection matrices.

    The perturbation-style bounds require all matrices to share one incidence
    pattern (zeros in the same positions); by default that is enforced here.
    Pass ``allow_mixed_patterns=True`` to represent a set without a common
    pattern -- pattern-free bounds still apply to it, the rest are reported
    as not applicable.
    """

    matrices: np.ndarray  # (r, n, n)
    labels: tuple[str, ...] | None = None
    allow_mixed_patterns: bool = False

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim == 2:
            mats = mats[None, :, :]
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValidationError(
                f"environment matrices must be (r, n, n), got shape {mats.shape}"
            )
        if mats.shape[0] < 1:
            raise ValidationError("environment set must contain at least one matrix")
        for k in range(mats.shape[0]):
            as_projection_matrix(mats[k], name=f"environment {k}")
        mats.setflags(write=False)
        self.matrices = mats
        if self.labels is not None:
            self.labels = tuple(str(x) for x in self.labels)
            if len(self.labels) != mats.shape[0]:
                raise ValidationError(
                    f"got {len(self.labels)} labels for {mats.shape[0]} environments"
                )
        pattern = incidence_pattern(mats[0])
        self._common_pattern = all(
            np.array_equal(incidence_pattern(m), pattern) for m in mats[1:]
        )
        if not self._common_pattern and not self.allow_mixed_patterns:
            raise ValidationError(
                "environments do not share a common incidence pattern; "
                "pass allow_mixed_patterns=True to build the set anyway "
                "(perturbation bounds will be unavailable)"
            )

    @classmethod
    def from_matrices(cls, matrices, labels=None, allow_mixed_patterns=False):
        return cls(np.array(matrices, dtype=float), labels, allow_mixed_patterns)

    @property
    def r(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def has_common_pattern(self) -> bool:
        return self._common_pattern

    @property
    def pattern(self) -> np.ndarray:
        """Common incidence pattern; raises when the set has none."""
        if not self._common_pattern:
            raise ValidationError("environment set has no common incidence pattern")
        return incidence_pattern(self.matrices[0])


@dataclass
class EnvironmentChain:
    """Switching process over environment indices.

    kind="iid":    environments drawn independently from ``pi`` each step.
    kind="markov": one-step transitions given by the row-stochastic ``P``;
                   the chain must be irreducible and aperiodic so that a
                   unique stationary distribution exists.
    """

    kind: str
    pi: np.ndarray | None = None
    P: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("iid", "markov"):
            raise ValidationError(f"chain kind must be 'iid' or 'markov', got {self.kind!r}")
        if self.kind == "iid":
            if self.pi is None:
                raise ValidationError("iid chain requires a probability vector")
            pi = np.array(self.pi, dtype=float)
            if pi.ndim != 1 or pi.size < 1:
                raise ValidationError("iid probability vector must be 1-dimensional")
            if np.any(pi < 0) or not np.all(np.isfinite(pi)):
                raise ValidationError("iid probabilities must be finite and >= 0")
            if abs(pi.sum() - 1.0) > PROB_TOL:
                raise ValidationError(
                    f"iid probabilities must sum to 1 (got {pi.sum()!r})"
                )
            pi.setflags(write=False)
            self.pi = pi
            self.P = None
        else:
            if self.P is None:
                raise ValidationError("markov chain requires a transition matrix")
            P = np.array(self.P, dtype=float)
            if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
                raise ValidationError("transition matrix must be square")
            if np.any(P < 0) or not np.all(np.isfinite(P)):
                raise ValidationError("transition probabilities must be finite and >= 0")
            rows = P.sum(axis=1)
            if np.any(np.abs(rows - 1.0) > PROB_TOL):
                bad = int(np.argmax(np.abs(rows - 1.0)))
                raise ValidationError(
                    f"row {bad} of the transition matrix sums to {rows[bad]!r}, not 1"
                )
            g = nx.DiGraph(((i, j) for i in range(P.shape[0]) for j in range(P.shape[0]) if P[i, j] > 0))
            g.add_nodes_from(range(P.shape[0]))
            if not nx.is_strongly_connected(g):
                raise ValidationError("markov chain is reducible (not irreducible)")
            if not nx.is_aperiodic(g):
                raise ValidationError("markov chain is periodic (not aperiodic)")
            P.setflags(write=False)
            self.P = P
            self.pi = None

    @classmethod
    def iid(cls, pi) -> "EnvironmentChain":
        return cls("iid", pi=np.array(pi, dtype=float))

    @classmethod
    def markov(cls, P) -> "EnvironmentChain":
        return cls("markov", P=np.array(P, dtype=float))

    @property
    def r(self) -> int:
        return self.pi.size if self.kind == "iid" else self.P.shape[0]

    def transition_rows(self) -> np.ndarray:
        """One-step transition matrix; for IID every row equals ``pi``."""
        if self.kind == "markov":
            return self.P
        return np.tile(self.pi, (self.r, 1))


@dataclass
class ModelSpec:
    """A complete model: environment set, switching chain, optional z0.

    The long-run growth rate does not depend on the initial population, so
    ``z0`` defaults to the uniform vector 1/n when left unset.
    """

    envs: EnvironmentSet
    chain: EnvironmentChain
    z0: np.ndarray | None = None

    def __post_init__(self):
        if self.chain.r != self.envs.r:
            raise ValidationError(
                f"chain has {self.chain.r} states but the set has {self.envs.r} environments"
            )
        if self.z0 is not None:
            z0 = np.array(self.z0, dtype=float)
            if z0.shape != (self.envs.n,):
                raise ValidationError(
                    f"z0 must have length {self.envs.n}, got shape {z0.shape}"
                )
            if np.any(z0 < 0) or not np.all(np.isfinite(z0)):
                raise ValidationError("z0 must be finite and nonnegative")
            if not np.any(z0 > 0):
                raise ValidationError("z0 must have at least one positive entry")
            z0.setflags(write=False)
            self.z0 = z0

    @property
    def n(self) -> int:
        return self.envs.n

    @property
    def r(self) -> int:
        return self.envs.r

    @property
    def initial_population(self) -> np.ndarray:
        if self.z0 is not None:
            return self.z0
        return np.full(self.n, 1.0 / self.n)


@dataclass
class Leslie2Params:
    """Per-environment vital rates of the two-age-class Leslie model.

    Each environment matrix is ``[[f, F], [s, 0]]`` with ``f`` the juvenile
    fertility, ``F`` the adult fertility and ``s`` the juvenile survival
    probability.  All rates strictly positive (and s <= 1) keeps any finite
    set of such matrices ergodic.
    """

    f: np.ndarray
    F: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.array(self.f, dtype=float))
        F = np.atleast_1d(np.array(self.F, dtype=float))
        s = np.atleast_1d(np.array(self.s, dtype=float))
        if not (f.shape == F.shape == s.shape) or f.ndim != 1:
            raise ValidationError("f, F, s must be 1-d arrays of equal length")
        if f.size < 1:
            raise ValidationError("need at least one environment")
        for name, v in (("f", f), ("F", F)):
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise ValidationError(f"{name} must be finite and > 0")
        if np.any(s <= 0) or np.any(s > 1) or not np.all(np.isfinite(s)):
            raise ValidationError("s must lie in (0, 1]")
        for v in (f, F, s):
            v.setflags(write=False)
        self.f, self.F, self.s = f, F, s

    @property
    def r(self) -> int:
        return self.f.size

    def environment_set(self, labels=None) -> EnvironmentSet:
        mats = np.zeros((self.r, 2, 2))
        mats[:, 0, 0] = self.f
        mats[:, 0, 1] = self.F
        mats[:, 1, 0] = self.s
        return EnvironmentSet(mats, labels=labels)

    @classmethod
    def from_environment_set(cls, envs: EnvironmentSet) -> "Leslie2Params":
        p = leslie2_params(envs)
        if p is None:
            raise ValidationError(
                "environment set does not have the [[f, F], [s, 0]] structure "
                "with positive rates"
            )
        return p


def leslie2_params(envs: EnvironmentSet) -> Leslie2Params | None:
    """Extract two-age-class Leslie rates, or None if the set is not of that form."""
    m = envs.matrices
    if envs.n != 2:
        return None
    if np.any(m[:, 1, 1] != 0):
        return None
    f, F, s = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0]
    if np.any(f <= 0) or np.any(F <= 0) or np.any(s <= 0) or np.any(s > 1):
        return None
    return Leslie2Params(f.copy(), F.copy(), s.copy())


# ---------------------------------------------------------------------------
# model files

def model_from_dict(doc: dict) -> ModelSpec:
    """Build a model from its JSON document form.

    Either ``environments`` (list of ``{"label": ..., "matrix": [[...]]}``)
    or the two-age-class shorthand ``leslie2`` (list of ``{"f","F","s"}``)
    must be present, together with ``chain``.
    """
    if not isinstance(doc, dict):
        raise ValidationError("model document must be a JSON object")
    if ("environments" in doc) == ("leslie2" in doc):
        raise ValidationError("model must define exactly one of 'environments' or 'leslie2'")

    if "leslie2" in doc:
        entries = doc["leslie2"]
        if not isinstance(entries, list) or not entries:
            raise ValidationError("'leslie2' must be a non-empty list of {f, F, s} objects")
        try:
            params = Leslie2Params(
                np.array([e["f"] for e in entries], dtype=float),
                np.array([e["F"] for e in entries], dtype=float),
                np.array([e["s"] for e in entries], dtype=float),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed 'leslie2' entry: {exc}") from exc
        envs = params.environment_set()
    else:
        entries = doc["environments"]
        if not isinstance(entries, list) or not entries:
            raise ValidationError("'environments' must be a non-empty list")
        mats, labels, have_labels = [], [], False
        for k, e in enumerate(entries):
            if not isinstance(e, dict) or "matrix" not in e:
                raise ValidationError(f"environment {k} must be an object with a 'matrix'")
            mats.append(as_projection_matrix(e["matrix"], name=f"environment {k}"))
            labels.append(e.get("label", str(k)))
            have_labels = have_labels or "label" in e
        shapes = {m.shape for m in mats}
        if len(shapes) != 1:
            raise ValidationError(f"environments have mixed shapes: {sorted(shapes)}")
        envs = EnvironmentSet(
            np.stack(mats),
            labels=tuple(labels) if have_labels else None,
            allow_mixed_patterns=bool(doc.get("allow_mixed_patterns", False)),
        )

    if "n" in doc and int(doc["n"]) != envs.n:
        raise ValidationError(f"declared n={doc['n']} but matrices are {envs.n}x{envs.n}")

    chain_doc = doc.get("chain")
    if not isinstance(chain_doc, dict) or "type" not in chain_doc:
        raise ValidationError("model must define 'chain' with a 'type'")
    if chain_doc["type"] == "iid":
        chain = EnvironmentChain.iid(chain_doc.get("pi"))
    elif chain_doc["type"] == "markov":
        chain = EnvironmentChain.markov(chain_doc.get("P"))
    else:
        raise ValidationError(f"unknown chain type {chain_doc['type']!r}")

    return ModelSpec(envs, chain, z0=doc.get("z0"))


def model_to_dict(model: ModelSpec) -> dict:
    """Inverse of `model_from_dict` (always emits the matrix form)."""
    envs = [
        {
            **({"label": model.envs.labels[k]} if model.envs.labels else {}),
            "matrix": model.envs.matrices[k].tolist(),
        }
        for k in range(model.r)
    ]
    doc = {"n": model.n, "environments": envs}
    if model.chain.kind == "iid":
        doc["chain"] = {"type": "iid", "pi": model.chain.pi.tolist()}
    else:
        doc["chain"] = {"type": "markov", "P": model.chain.P.tolist()}
    if model.z0 is not None:
        doc["z0"] = model.z0.tolist()
    return doc


def load_model(path) -> ModelSpec:
    """Read a model from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
