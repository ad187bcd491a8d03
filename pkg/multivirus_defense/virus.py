"""
Virus set, competition structure and infection-rate table.

Infection sets are bitmasks over the virus indices: virus ``v`` is bit
``1 << v`` and the empty set is ``0``. A set is *realizable* when it holds no
two mutually competing viruses; only realizable sets can ever occur on a host.
"""

import tomllib
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import AlreadyInfected, ConfigError, InvalidProbability, TooManyViruses
from .utils import locate_key, reject_unknown_keys

MAX_VIRUSES = 16

InfectionSet = int


def bits(S: InfectionSet) -> Iterator[int]:
    """Virus indices contained in ``S``, ascending."""
    v = 0
    while S:
        if S & 1:
            yield v
        S >>= 1
        v += 1


def submasks(mask: int) -> Iterator[int]:
    """All subsets of ``mask`` (including 0 and ``mask``), ascending."""
    members = list(bits(mask))
    for k in range(1 << len(members)):
        yield sum(1 << members[b] for b in range(len(members)) if k >> b & 1)


@dataclass(frozen=True)
class VirusModel:
    """
    Immutable description of the competing/coexisting virus population.

    Attributes:
        names: Virus names, index ``v`` is bit ``1 << v``
        mu: Packet rate of each virus (events per unit time, > 0)
        compete: Competition bitmask ``C_v`` of each virus (symmetric)
        p_default: Set-independent infection probability ``p^v`` per virus
        overrides: Explicit ``p^{S,v}`` entries keyed by ``(S, v)``
        lam: ``(2^m, m)`` table with ``lam[S, v] = p^{S,v} mu^v`` for ``v`` not
             in ``S`` (zero where ``v`` is in ``S``)
    """

    names: Tuple[str, ...]
    mu: np.ndarray = field(compare=False)
    compete: Tuple[int, ...]
    p_default: np.ndarray = field(compare=False)
    overrides: Mapping[Tuple[int, int], float] = field(default_factory=dict)
    lam: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = len(self.names)
        if m == 0:
            raise ValueError("a virus model needs at least one virus")
        if m > MAX_VIRUSES:
            raise TooManyViruses(f"{m} viruses exceed the limit of {MAX_VIRUSES}")
        mu = np.asarray(self.mu, dtype=float)
        p_default = np.asarray(self.p_default, dtype=float)
        if mu.shape != (m,) or p_default.shape != (m,) or len(self.compete) != m:
            raise ValueError("mu, p_default and compete need one entry per virus")
        if np.any(mu <= 0):
            raise ValueError("packet rates mu must be positive")
        if np.any((p_default < 0) | (p_default > 1)):
            raise InvalidProbability("infection probabilities must lie in [0, 1]")
        for v, cv in enumerate(self.compete):
            if cv >> v & 1:
                raise ValueError(f"virus {self.names[v]} cannot compete with itself")
            for w in bits(cv):
                if not self.compete[w] >> v & 1:
                    raise ValueError("competition must be symmetric")

        lam = np.zeros((1 << m, m))
        for v in range(m):
            lam[:, v] = p_default[v] * mu[v]
        for (S, v), p in self.overrides.items():
            if not 0.0 <= p <= 1.0:
                raise InvalidProbability(f"p^{{{S},{v}}} = {p} outside [0, 1]")
            if S >> v & 1:
                raise ValueError(f"override for virus {v} on a set containing it")
            lam[S, v] = p * mu[v]
        for v in range(m):
            lam[[S for S in range(1 << m) if S >> v & 1], v] = 0.0

        mu.setflags(write=False)
        p_default.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "p_default", p_default)
        object.__setattr__(self, "lam", lam)

    @property
    def m(self) -> int:
        return len(self.names)

    def is_realizable(self, S: InfectionSet) -> bool:
        return all(not (S & self.compete[v]) for v in bits(S))

    def realizable_sets(self) -> List[InfectionSet]:
        """
        All nonempty realizable sets in ascending bitmask order.

        Examples:
            >>> coexisting([1.0, 2.0]).realizable_sets()
            [1, 2, 3]
            >>> competing([1.0, 2.0]).realizable_sets()
            [1, 2]
        """
        return [S for S in range(1, 1 << self.m) if self.is_realizable(S)]

    def infect_target(self, S: InfectionSet, v: int) -> InfectionSet:
        """
        Set reached when a host holding ``S`` is infected by virus ``v``.

        Raises:
            AlreadyInfected: If ``v`` is already in ``S``
        """
        if S >> v & 1:
            raise AlreadyInfected(f"virus {self.names[v]} already in set {S:#b}")
        return (S & ~self.compete[v]) | (1 << v)

    def predecessors(self, S: InfectionSet) -> List[Tuple[InfectionSet, int]]:
        """
        Every ``(T, v)`` such that infecting a host holding ``T`` with ``v``
        yields ``S``; ``T`` is realizable or empty and listed once per ``v``.
        """
        result = []
        for v in bits(S):
            base = S & ~(1 << v)
            for R in submasks(self.compete[v]):
                T = base | R
                if T == 0 or self.is_realizable(T):
                    result.append((T, v))
        return result

    def p(self, S: InfectionSet, v: int) -> float:
        return float(self.lam[S, v] / self.mu[v])

    def _table(self) -> Tuple[np.ndarray, np.ndarray]:
        """Rates and probabilities over realizable-or-empty ``S`` with ``v`` not in ``S``."""
        sets = [0] + self.realizable_sets()
        lams, ps = [], []
        for S in sets:
            for v in range(self.m):
                if not S >> v & 1:
                    lams.append(self.lam[S, v])
                    ps.append(self.lam[S, v] / self.mu[v])
        return np.array(lams), np.array(ps)

    @property
    def lam_hat(self) -> float:
        """Sum of the clean-host infection rates over all viruses."""
        return float(self.lam[0].sum())

    @property
    def lam_max(self) -> float:
        """
        Largest infection rate ``lam[S, v]`` a host can face.

        Taken over the clean set and every realizable ``S`` that lacks ``v``.

        Returns:
            float: The maximum rate; the rate bounds use it
        """
        return float(self._table()[0].max())

    @property
    def lam_min(self) -> float:
        """Smallest infection rate over the same ``(S, v)`` pairs as :attr:`lam_max`."""
        return float(self._table()[0].min())

    @property
    def p_max(self) -> float:
        """
        Largest infection probability ``p(S, v) = lam[S, v] / mu^v``.

        Returns:
            float: ``p_bar``, the constant in the final filter-value bound
        """
        return float(self._table()[1].max())

    @property
    def p_min(self) -> float:
        """Smallest infection probability over the pairs of :attr:`p_max`."""
        return float(self._table()[1].min())

    @property
    def mu_min(self) -> float:
        """Slowest packet rate."""
        return float(self.mu.min())

    def lam_max_v(self, v: int) -> float:
        """
        Largest rate at which virus ``v`` infects a host that does not hold it.

        Args:
            v: Virus index

        Returns:
            float: ``max lam[S, v]`` over the clean set and realizable ``S`` without ``v``
        """
        sets = [S for S in [0] + self.realizable_sets() if not S >> v & 1]
        return float(self.lam[sets, v].max())

    def p_max_v(self, v: int) -> float:
        """:meth:`lam_max_v` divided by the packet rate of ``v``."""
        return self.lam_max_v(v) / float(self.mu[v])

    def p_min_v(self, v: int) -> float:
        """
        Smallest infection probability of virus ``v``.

        Args:
            v: Virus index

        Returns:
            float: ``min lam[S, v] / mu^v`` over the sets considered by :meth:`lam_max_v`
        """
        sets = [S for S in [0] + self.realizable_sets() if not S >> v & 1]
        return float(self.lam[sets, v].min() / self.mu[v])

    def membership(self) -> np.ndarray:
        """0-1 matrix ``H`` with ``H[k, v] = 1`` iff virus ``v`` is in realizable set ``k``."""
        sets = self.realizable_sets()
        return np.array([[S >> v & 1 for v in range(self.m)] for S in sets], dtype=float)

    def scaled(self, factor: float) -> "VirusModel":
        """Same model with every packet rate multiplied by ``factor``."""
        return VirusModel(
            names=self.names,
            mu=self.mu * factor,
            compete=self.compete,
            p_default=self.p_default,
            overrides=dict(self.overrides),
        )


def _default_names(m: int) -> Tuple[str, ...]:
    return tuple(f"v{v + 1}" for v in range(m))


def from_rates(
    lambdas: Sequence[float],
    mu: Optional[Sequence[float]] = None,
    competing: bool = False,
    names: Optional[Sequence[str]] = None,
) -> VirusModel:
    """
    Model with set-independent rates ``lambda^{S,v} = lambdas[v]``.

    Args:
        lambdas: Infection rate per virus
        mu: Packet rate per virus; defaults to ``lambdas`` (every packet infects)
        competing: Every pair of viruses competes when True, none otherwise
        names: Optional virus names
    """
    lambdas = np.asarray(lambdas, dtype=float)
    m = len(lambdas)
    mu_arr = lambdas.copy() if mu is None else np.asarray(mu, dtype=float)
    full = (1 << m) - 1
    compete = tuple((full & ~(1 << v)) if competing else 0 for v in range(m))
    return VirusModel(
        names=tuple(names) if names is not None else _default_names(m),
        mu=mu_arr,
        compete=compete,
        p_default=lambdas / mu_arr,
    )


def coexisting(lambdas: Sequence[float], mu: Optional[Sequence[float]] = None) -> VirusModel:
    return from_rates(lambdas, mu, competing=False)


def competing(lambdas: Sequence[float], mu: Optional[Sequence[float]] = None) -> VirusModel:
    return from_rates(lambdas, mu, competing=True)


def with_competition(
    lambdas: Sequence[float], pairs: Sequence[Tuple[int, int]], mu: Optional[Sequence[float]] = None
) -> VirusModel:
    """Set-independent rates with an explicit list of competing index pairs."""
    base = from_rates(lambdas, mu)
    compete = list(base.compete)
    for a, b in pairs:
        compete[a] |= 1 << b
        compete[b] |= 1 << a
    return VirusModel(
        names=base.names, mu=base.mu, compete=tuple(compete), p_default=base.p_default
    )


_MODEL_KEYS = {"competition", "virus", "override"}
_VIRUS_KEYS = {"name", "mu", "p"}
_OVERRIDE_KEYS = {"set", "virus", "p"}


def parse_model(text: str) -> VirusModel:
    """
    Parse the TOML virus-model format.

    The format holds a ``competition`` list of name pairs (or the string
    ``"all"``), one ``[[virus]]`` table per virus with ``name``, ``mu`` and
    ``p``, and optional ``[[override]]`` tables with ``set``, ``virus``, ``p``.

    Raises:
        ConfigError: On unknown keys, unknown virus names or invalid values
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}") from e
    reject_unknown_keys(data, _MODEL_KEYS, text)

    viruses = data.get("virus", [])
    if not viruses:
        raise ConfigError("at least one [[virus]] table is required", field="virus")
    for k, entry in enumerate(viruses):
        reject_unknown_keys(entry, _VIRUS_KEYS, text, prefix=f"virus[{k}]")
        for key in ("name", "mu", "p"):
            if key not in entry:
                raise ConfigError("missing key", field=f"virus[{k}].{key}")
    names = [str(entry["name"]) for entry in viruses]
    index: Dict[str, int] = {name: v for v, name in enumerate(names)}

    def lookup(name: str, where: str) -> int:
        if name not in index:
            raise ConfigError(
                f"unknown virus '{name}'", field=where, line=locate_key(text, name)
            )
        return index[name]

    competition = data.get("competition", [])
    if competition == "all":
        pairs = list(combinations(range(len(names)), 2))
    else:
        pairs = [(lookup(a, "competition"), lookup(b, "competition")) for a, b in competition]
    compete = [0] * len(names)
    for a, b in pairs:
        compete[a] |= 1 << b
        compete[b] |= 1 << a

    overrides: Dict[Tuple[int, int], float] = {}
    for k, entry in enumerate(data.get("override", [])):
        reject_unknown_keys(entry, _OVERRIDE_KEYS, text, prefix=f"override[{k}]")
        S = sum(1 << lookup(name, f"override[{k}].set") for name in entry["set"])
        overrides[(S, lookup(entry["virus"], f"override[{k}].virus"))] = float(entry["p"])

    try:
        return VirusModel(
            names=tuple(names),
            mu=np.array([float(e["mu"]) for e in viruses]),
            compete=tuple(compete),
            p_default=np.array([float(e["p"]) for e in viruses]),
            overrides=overrides,
        )
    except ValueError as e:
        raise ConfigError(str(e), field="virus") from e


def load_model(path: Union[str, Path]) -> VirusModel:
    return parse_model(Path(path).read_text())


def dump_model(model: VirusModel) -> str:
    """Serialize a model to the TOML format read by :func:`parse_model`."""
    pairs = [
        (model.names[a], model.names[b])
        for a in range(model.m)
        for b in range(a + 1, model.m)
        if model.compete[a] >> b & 1
    ]
    lines = [
        "competition = ["
        + ", ".join(f'["{a}", "{b}"]' for a, b in pairs)
        + "]",
        "",
    ]
    for v, name in enumerate(model.names):
        lines += [
            "[[virus]]",
            f'name = "{name}"',
            f"mu = {float(model.mu[v])!r}",
            f"p = {float(model.p_default[v])!r}",
            "",
        ]
    for (S, v), p in sorted(model.overrides.items()):
        members = ", ".join(f'"{model.names[w]}"' for w in bits(S))
        lines += [
            "[[override]]",
            f"set = [{members}]",
            f'virus = "{model.names[v]}"',
            f"p = {float(p)!r}",
            "",
        ]
    return "\n".join(lines)
