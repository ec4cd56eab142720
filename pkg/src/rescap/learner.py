"""Learning the satisfiable-degradation set from oracle queries.

Two learners share the oracle budget semantics:

* a baseline that finds boundary points (axis maxima, then ray extensions of
  averaged feasible pairs) and classifies by dominance against them,
* an active learner that trains a random forest and repeatedly queries the
  point of maximum predictive entropy, balancing classes after every answer
  with the monotonicity-safe derivation rules d/2 (feasible parent) and
  d + (1-d)/2 (infeasible parent).

Evaluation utilities (oracle-labeled test sets, classification reports,
Monte-Carlo volume) live here too since every experiment combines them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forest import ForestHyperparams, ForestModel, fit_forest, predict_proba
from .line import LineConfig
from .oracle import BudgetExhausted, OracleBudget, check_feasibility, maximize_direction, extend_ray
from .util import derive_seed, dump_csv, dump_json, load_csv, load_json

SOURCE_ORACLE = "oracle_query"
SOURCE_AXIS = "axis_seed"
SOURCE_BALANCED = "balanced_derived"
SOURCE_PROPAGATED = "propagated"
SOURCES = (SOURCE_ORACLE, SOURCE_AXIS, SOURCE_BALANCED, SOURCE_PROPAGATED)

# seed-derivation stream ids (learner namespace)
_S_STARTS = 1
_S_QUERY = 2
_S_FALLBACK = 3
_S_TRAIN = 4
_S_BASELINE = 5
_S_TEST = 6
_S_VOLUME = 7

_DUP_TOL = 1e-6
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class LabeledSample:
    d: np.ndarray
    label: int            # 1 feasible, 0 infeasible
    source: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if self.source not in SOURCES:
            raise ValueError(f"unknown sample source {self.source!r}")


class SampleSet:
    """Ordered collection of labeled degradation points.

    Append-only; `check_consistency` verifies that no point labeled
    infeasible sits componentwise below a point labeled feasible (which
    monotonicity forbids) and caches the verdict until the next append.
    """

    def __init__(self, n_features: int):
        self.n_features = n_features
        self._samples: list[LabeledSample] = []
        self._verified = False

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)

    def __getitem__(self, i):
        return self._samples[i]

    def append(self, sample: LabeledSample) -> None:
        if sample.d.shape != (self.n_features,):
            raise ValueError("sample dimension mismatch")
        self._samples.append(sample)
        self._verified = False

    def add(self, d, label: int, source: str) -> LabeledSample:
        sample = LabeledSample(np.asarray(d, dtype=np.float64).copy(), label, source)
        self.append(sample)
        return sample

    def points(self) -> np.ndarray:
        if not self._samples:
            return np.zeros((0, self.n_features))
        return np.array([s.d for s in self._samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self._samples], dtype=np.int64)

    def class_counts(self) -> tuple[int, int]:
        labels = self.labels()
        return int(np.sum(labels == 0)), int(np.sum(labels == 1))

    def contains_near(self, d, tol: float = _DUP_TOL) -> bool:
        pts = self.points()
        if not len(pts):
            return False
        return bool(np.any(np.max(np.abs(pts - np.asarray(d)), axis=1) <= tol))

    def check_consistency(self) -> None:
        if self._verified:
            return
        pts, labels = self.points(), self.labels()
        feas = pts[labels == 1]
        infeas = pts[labels == 0]
        if len(feas) and len(infeas):
            dominated = np.all(infeas[:, None, :] <= feas[None, :, :] + 1e-12, axis=2)
            if np.any(dominated):
                a, b = np.argwhere(dominated)[0]
                raise ValueError(
                    f"monotonicity conflict: infeasible point {infeas[a]} lies "
                    f"below feasible point {feas[b]}")
        self._verified = True


def samples_to_csv(samples: SampleSet, path) -> None:
    header = [f"d_{i + 1}" for i in range(samples.n_features)] + ["label", "source"]
    rows = [list(s.d) + [s.label, s.source] for s in samples]
    dump_csv(path, header, rows)


def samples_from_csv(path) -> SampleSet:
    header, rows = load_csv(path)
    if len(header) < 3 or header[-2:] != ["label", "source"]:
        raise ValueError("sample CSV needs d_1..d_n, label, source columns")
    n = len(header) - 2
    out = SampleSet(n)
    for row in rows:
        out.add(np.array([float(v) for v in row[:n]]), int(row[n]), row[n + 1])
    return out


def balance_samples(sample: LabeledSample) -> list[LabeledSample]:
    """Derive the class-balancing counterpart of one labeled point.

    A feasible parent spawns d/2 (feasible by monotonicity); an infeasible
    parent spawns d + (1-d)/2 (infeasible likewise). Fixed points (the origin
    when feasible, the all-ones corner when infeasible) derive nothing.
    """
    if sample.label == 1:
        derived = sample.d / 2.0
    else:
        derived = sample.d + (1.0 - sample.d) / 2.0
    if np.array_equal(derived, sample.d):
        return []
    return [LabeledSample(derived, sample.label, SOURCE_BALANCED)]


def dominance_label(d, known: SampleSet) -> int | None:
    """Label a point by monotone dominance against known samples, if possible.

    Feasible when below some known-feasible point, infeasible when above some
    known-infeasible point, None when neither rule applies. `known` must be
    monotonicity-consistent.
    """
    known.check_consistency()
    d = np.asarray(d, dtype=np.float64)
    pts, labels = known.points(), known.labels()
    feas = pts[labels == 1]
    if len(feas) and np.any(np.all(d <= feas + 1e-12, axis=1)):
        return 1
    infeas = pts[labels == 0]
    if len(infeas) and np.any(np.all(d >= infeas - 1e-12, axis=1)):
        return 0
    return None


@dataclass
class BaselineModel:
    """Boundary points plus the dominance rule with infeasible as default."""
    boundary: np.ndarray           # (n_points, n_features), all satisfiable
    samples: SampleSet

    def classify(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if not len(self.boundary):
            return np.zeros(len(x), dtype=np.int64)
        dominated = np.all(x[:, None, :] <= self.boundary[None, :, :] + 1e-12, axis=2)
        return np.any(dominated, axis=1).astype(np.int64)


def baseline_to_json(model: BaselineModel, path) -> None:
    dump_json({
        "kind": "boundary_dominance",
        "n_features": int(model.boundary.shape[1]) if model.boundary.size
                      else model.samples.n_features,
        "boundary": [list(row) for row in model.boundary],
    }, path)


def baseline_from_json(path) -> BaselineModel:
    doc = load_json(path)
    try:
        if doc["kind"] != "boundary_dominance":
            raise ValueError(f"not a boundary model: kind={doc['kind']!r}")
        n = int(doc["n_features"])
        rows = [np.asarray(r, dtype=np.float64) for r in doc["boundary"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad boundary model document: {exc}") from exc
    samples = SampleSet(n)
    for row in rows:
        if row.shape != (n,):
            raise ValueError("boundary point dimension mismatch")
        samples.add(row, 1, SOURCE_ORACLE)
    boundary = np.array(rows) if rows else np.zeros((0, n))
    return BaselineModel(boundary, samples)


def baseline_build(line: LineConfig, budget: OracleBudget, seed: int = 0) -> BaselineModel:
    """Boundary-point learner: axis maxima, then rays through averaged pairs.

    Every boundary solve is charged, so the model holds exactly budget-many
    points when the budget is fresh; exhaustion mid-build keeps the partial
    set. The returned classifier labels a point feasible only when it is
    dominated by some boundary point.
    """
    rng = np.random.default_rng(derive_seed(seed, _S_BASELINE))
    points: list[np.ndarray] = []
    samples = SampleSet(line.n_machines)
    try:
        for axis in range(line.n_machines):
            point = maximize_direction(line, axis, budget, charge_boundary=True)
            points.append(point)
            samples.add(point, 1, SOURCE_AXIS)
        while True:
            if len(points) >= 2:
                a, b = rng.choice(len(points), size=2, replace=False)
            else:
                a = b = 0
            u = (points[a] + points[b]) / 2.0
            if not np.any(u > 0):
                u = np.ones(line.n_machines)
            point = extend_ray(line, u, budget, charge_boundary=True)
            points.append(point)
            samples.add(point, 1, SOURCE_ORACLE)
    except BudgetExhausted:
        pass
    boundary = np.array(points) if points else np.zeros((0, line.n_machines))
    return BaselineModel(boundary, samples)


def train_forest(samples: SampleSet, hp: ForestHyperparams | None = None,
                 seed: int = 0, n_threads: int = 1) -> ForestModel:
    """Fit the forest on a sample set; both classes must be present."""
    if hp is None:
        hp = ForestHyperparams()
    samples.check_consistency()
    return fit_forest(samples.points(), samples.labels(), hp, seed, n_threads)


def binary_entropy(p) -> np.ndarray | float:
    """Shannon entropy of a Bernoulli(p) in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    q = p[inner]
    out[inner] = -(q * np.log(q) + (1.0 - q) * np.log(1.0 - q))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EntropyQuery:
    point: np.ndarray
    entropy: float
    degenerate: bool      # the search never saw positive entropy


def entropy_argmax(model: ForestModel, restarts: int = 64, seed: int = 0,
                   step_init: float = 0.25, step_min: float = 1e-3) -> EntropyQuery:
    """Maximize predictive entropy over the unit cube.

    Multi-start coordinate pattern search run in lockstep over all restarts:
    each sweep tries +/- step moves along every coordinate (batch-evaluating
    the model), restarts that fail to improve halve their step, and a restart
    freezes once its step drops below `step_min`. Exact ties between restarts
    resolve to the earliest restart index.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    p = model.n_features
    rng = np.random.default_rng(derive_seed(seed, _S_STARTS))
    pts = rng.uniform(size=(restarts, p))
    ent = binary_entropy(predict_proba(model, pts))
    step = np.full(restarts, step_init)

    for _ in range(1000):
        live = step >= step_min
        if not np.any(live):
            break
        improved = np.zeros(restarts, dtype=bool)
        for c in range(p):
            for sign in (1.0, -1.0):
                cand = pts.copy()
                cand[:, c] = np.clip(cand[:, c] + sign * step, 0.0, 1.0)
                h = binary_entropy(predict_proba(model, cand))
                better = live & (h > ent + 1e-12)
                pts[better] = cand[better]
                ent[better] = h[better]
                improved |= better
        step[live & ~improved] *= 0.5

    best = int(np.argmax(ent))
    return EntropyQuery(pts[best].copy(), float(ent[best]), bool(ent[best] <= 1e-12))


def _seed_samples(line: LineConfig, budget: OracleBudget) -> SampleSet:
    """Initial labeled set: axis boundary points, derived mates, the origin.

    Axis boundary points are satisfiable; when an axis binds strictly inside
    the cube, the infeasible-side derivation b + (1-b)/2 dominates a point
    just past the axis maximum and is therefore provably infeasible. Axes
    that never bind derive the feasible point b/2 instead. None of this
    charges the budget: boundary solves seed the learner, they do not answer
    queries.
    """
    samples = SampleSet(line.n_machines)
    for axis in range(line.n_machines):
        b = maximize_direction(line, axis, budget)
        if not samples.contains_near(b):
            samples.add(b, 1, SOURCE_AXIS)
        if b[axis] < 1.0 - 1e-9:
            derived = b + (1.0 - b) / 2.0
            label = 0
        else:
            derived = b / 2.0
            label = 1
        if not samples.contains_near(derived):
            samples.add(derived, label, SOURCE_PROPAGATED if label == 0 else SOURCE_BALANCED)
    origin = np.zeros(line.n_machines)
    if not samples.contains_near(origin):
        samples.add(origin, 1, SOURCE_PROPAGATED)
    return samples


def active_learn(line: LineConfig, budget: OracleBudget, retrain_every: int = 1,
                 seed: int = 0, hp: ForestHyperparams | None = None,
                 restarts: int = 64, n_threads: int = 1) -> tuple[ForestModel, SampleSet]:
    """Entropy-guided oracle exploration of the degradation cube.

    Seeds with axis boundary points (free), then loops: pick the maximum-
    entropy point of the current model (falling back to seeded uniform draws
    while the model is degenerate, would repeat a known point, or both
    classes have not appeared yet), query the oracle (charged), derive the
    balancing sample, retrain every `retrain_every` answers. Runs until the
    budget is exhausted and returns the final model with the full set.
    """
    if retrain_every < 1:
        raise ValueError("retrain_every must be >= 1")
    if budget.max_calls < line.n_machines + 1:
        raise ValueError("budget must exceed the machine count (seeding plus "
                         "at least one query)")
    train_seed = derive_seed(seed, _S_TRAIN)
    fallback_rng = np.random.default_rng(derive_seed(seed, _S_FALLBACK))
    samples = _seed_samples(line, budget)
    model: ForestModel | None = None
    queries = 0
    pending = 0

    def both_classes() -> bool:
        n0, n1 = samples.class_counts()
        return n0 > 0 and n1 > 0

    def fresh_uniform() -> np.ndarray:
        for _ in range(1000):
            q = fallback_rng.uniform(size=line.n_machines)
            if not samples.contains_near(q):
                return q
        raise RuntimeError("could not draw a fresh query point")

    if both_classes():
        model = train_forest(samples, hp, train_seed, n_threads)

    while True:
        if model is None:
            q = fresh_uniform()
        else:
            found = entropy_argmax(model, restarts, derive_seed(seed, _S_QUERY, queries))
            q = found.point
            if found.degenerate or samples.contains_near(q):
                q = fresh_uniform()
        try:
            label = check_feasibility(line, q, budget)
        except BudgetExhausted:
            break
        queries += 1
        pending += 1
        parent = samples.add(q, 1 if label.feasible else 0, SOURCE_ORACLE)
        for derived in balance_samples(parent):
            if not samples.contains_near(derived.d):
                samples.append(derived)
        if both_classes() and (model is None or pending >= retrain_every):
            model = train_forest(samples, hp, train_seed, n_threads)
            pending = 0

    if not both_classes():
        raise ValueError("all oracle answers fell in one class; the capacity "
                         "has no learnable boundary at this budget")
    if model is None or pending > 0:
        model = train_forest(samples, hp, train_seed, n_threads)
    return model, samples


def generate_test_set(line: LineConfig, n: int, seed: int = 0,
                      balanced: bool = False) -> SampleSet:
    """Uniform oracle-labeled points; `balanced` rejection-samples to n/2 each.

    Labeling uses unmetered oracle calls (test sets measure learners, they do
    not spend their budgets). Raises when one class fails to fill within
    1000 * n draws.
    """
    if n < 2:
        raise ValueError("need at least two test points")
    if balanced and n % 2:
        raise ValueError("balanced test sets need an even size")
    rng = np.random.default_rng(derive_seed(seed, _S_TEST))
    samples = SampleSet(line.n_machines)
    want = {0: n // 2 if balanced else n, 1: n // 2 if balanced else n}
    have = {0: 0, 1: 0}
    draws = 0
    while len(samples) < n:
        if draws >= 1000 * n:
            raise RuntimeError(
                f"one class is too rare: {draws} draws produced "
                f"{have[0]} infeasible / {have[1]} feasible points")
        d = rng.uniform(size=line.n_machines)
        draws += 1
        label = 1 if check_feasibility(line, d).feasible else 0
        if balanced and have[label] >= want[label]:
            continue
        have[label] += 1
        samples.add(d, label, SOURCE_ORACLE)
    return samples


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict[int, ClassMetrics]
    accuracy: float
    macro: ClassMetrics
    weighted: ClassMetrics

    def to_dict(self) -> dict:
        def row(m: ClassMetrics) -> dict:
            return {"precision": m.precision, "recall": m.recall,
                    "f1": m.f1, "support": m.support}
        return {
            "infeasible": row(self.per_class[0]),
            "feasible": row(self.per_class[1]),
            "accuracy": self.accuracy,
            "macro_avg": row(self.macro),
            "weighted_avg": row(self.weighted),
        }


def classification_report(predict, test: SampleSet) -> ClassificationReport:
    """Precision/recall/F1 per class plus accuracy, macro and weighted rows.

    `predict` maps a (n, n_features) array to 0/1 labels. Undefined ratios
    (no predicted or no true members of a class) count as 0.
    """
    if not len(test):
        raise ValueError("empty test set")
    y_true = test.labels()
    y_pred = np.asarray(predict(test.points()), dtype=np.int64)
    if y_pred.shape != y_true.shape:
        raise ValueError("predictor returned wrong shape")

    def safe(num, den):
        return num / den if den else 0.0

    per_class = {}
    for cls in (0, 1):
        tp = int(np.sum((y_pred == cls) & (y_true == cls)))
        fp = int(np.sum((y_pred == cls) & (y_true != cls)))
        fn = int(np.sum((y_pred != cls) & (y_true == cls)))
        precision = safe(tp, tp + fp)
        recall = safe(tp, tp + fn)
        f1 = safe(2 * precision * recall, precision + recall)
        per_class[cls] = ClassMetrics(precision, recall, f1, tp + fn)

    accuracy = float(np.mean(y_pred == y_true))
    total = len(y_true)

    def combine(weights) -> ClassMetrics:
        return ClassMetrics(
            sum(w * per_class[c].precision for c, w in weights.items()),
            sum(w * per_class[c].recall for c, w in weights.items()),
            sum(w * per_class[c].f1 for c, w in weights.items()),
            total)

    macro = combine({0: 0.5, 1: 0.5})
    weighted = combine({c: per_class[c].support / total for c in (0, 1)})
    return ClassificationReport(per_class, accuracy, macro, weighted)


def forest_classifier(model: ForestModel, threshold: float = 0.5):
    """Thresholded probability as a hard 0/1 batch classifier."""
    def predict(x):
        return (np.atleast_1d(predict_proba(model, x)) >= threshold).astype(np.int64)
    return predict


def oracle_classifier(line: LineConfig):
    """The exact oracle as a (slow, unmetered) batch classifier."""
    def predict(x):
        x = np.atleast_2d(x)
        return np.array([1 if check_feasibility(line, d).feasible else 0
                         for d in x], dtype=np.int64)
    return predict


@dataclass(frozen=True)
class VolumeEstimate:
    mean: float
    half_width_95: float
    n_samples: int
    seed: int


def estimate_volume(predicate, n_dims: int, n: int, seed: int = 0) -> VolumeEstimate:
    """Monte-Carlo fraction of the unit cube where `predicate` holds.

    `predicate` maps a (n, n_dims) array to 0/1 (membership in the
    satisfiable set: the oracle itself or a thresholded model). The 95%
    half-width is the normal approximation to the binomial proportion.
    """
    if n < 100:
        raise ValueError("volume estimates need at least 100 samples")
    rng = np.random.default_rng(derive_seed(seed, _S_VOLUME))
    draws = rng.uniform(size=(n, n_dims))
    hits = np.asarray(predicate(draws), dtype=np.float64)
    if hits.shape != (n,):
        raise ValueError("predicate returned wrong shape")
    mean = float(np.mean(hits))
    half = _Z95 * np.sqrt(mean * (1.0 - mean) / n)
    return VolumeEstimate(mean, float(half), n, seed)
