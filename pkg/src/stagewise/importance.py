"""Per-feature importance scoring and per-stage aggregation.

Three interchangeable criteria rank the columns of a pooled-activation
matrix:

* ``pls``: partial least squares fitted by NIPALS, scored with the
  variable-importance-in-projection statistic (supervised).
* ``inf_fs``: features as vertices of a weighted graph built from dispersion
  and rank correlation; the score of a feature is the total weight of all
  paths through it, summed in closed form via the matrix geometric series
  (unsupervised).
* ``il_fs``: a supervised surrogate of the same path-energy idea. Features
  are quantized into equal-frequency tokens, each column's relevance is the
  Fisher discriminant of its tokens against the class labels, and the graph
  couples columns by the geometric mean of their relevances. This is a
  documented surrogate, not a reimplementation of the original
  latent-factor method.

A stage's score is the arithmetic mean of its columns' scores, with the
per-feature scores always computed jointly over the full matrix so stages
share one scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DegenerateModelError,
    ScoringError,
    ZeroVarianceResponseError,
)

PLS = "pls"
INF_FS = "inf_fs"
IL_FS = "il_fs"
CRITERIA = (PLS, INF_FS, IL_FS)

# Scoring subsamples large inputs; the criteria are stable under sample count.
SAMPLE_CAP = 3000

_EPS = 1e-12


@dataclass(frozen=True)
class StageSlice:
    stage_index: int
    start: int
    stop: int


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Pooled stage activations: N samples by D features plus class labels.

    ``stage_slices`` assigns every column to exactly one stage; slices are
    contiguous and cover the full column range, so the layout depends only on
    stage widths, never on stage depth.
    """

    data: np.ndarray
    labels: np.ndarray
    stage_slices: tuple[StageSlice, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        labels = np.asarray(self.labels)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        if data.ndim != 2:
            raise ScoringError(f"feature matrix must be 2-D, got shape {data.shape}")
        n, d = data.shape
        if n < 2 or d < 1:
            raise ScoringError(f"need N >= 2 and D >= 1, got N={n}, D={d}")
        if labels.shape != (n,):
            raise ScoringError(
                f"labels shape {labels.shape} does not match N={n} samples"
            )
        if not self.stage_slices:
            raise ScoringError("stage_slices must not be empty")
        cursor = 0
        for s in self.stage_slices:
            if s.start != cursor or s.stop <= s.start:
                raise ScoringError(
                    f"stage {s.stage_index}: slice [{s.start}, {s.stop}) is not "
                    f"contiguous from column {cursor}"
                )
            cursor = s.stop
        if cursor != d:
            raise ScoringError(
                f"stage slices cover {cursor} columns, matrix has {d}"
            )

    @property
    def num_stages(self) -> int:
        return len(self.stage_slices)

    def stage_columns(self, stage_index: int) -> np.ndarray:
        for s in self.stage_slices:
            if s.stage_index == stage_index:
                return self.data[:, s.start : s.stop]
        raise ScoringError(f"no slice for stage {stage_index}")


@dataclass(frozen=True)
class StageScores:
    alpha: tuple[float, ...]
    criterion: str

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ScoringError(f"unknown criterion {self.criterion!r}")
        if not all(np.isfinite(self.alpha)):
            raise ScoringError(f"stage scores must be finite, got {self.alpha}")


@dataclass(frozen=True)
class PlsParams:
    n_components: int = 2


@dataclass(frozen=True)
class InfFsParams:
    alpha_mix: float = 0.5
    beta: float = 0.9


@dataclass(frozen=True)
class IlFsParams:
    tokens: int = 4
    beta: float = 0.9


ScorerParams = Union[PlsParams, InfFsParams, IlFsParams]

_DEFAULT_PARAMS = {PLS: PlsParams, INF_FS: InfFsParams, IL_FS: IlFsParams}


def default_params(criterion: str) -> ScorerParams:
    try:
        return _DEFAULT_PARAMS[criterion]()
    except KeyError:
        raise ScoringError(f"unknown criterion {criterion!r}") from None


@dataclass(eq=False)
class PlsModel:
    """NIPALS decomposition for a single response.

    Columns of ``weights`` are unit-norm; score vectors are pairwise
    orthogonal up to floating-point error.
    """

    weights: np.ndarray  # (D, c)
    scores: np.ndarray  # (N, c)
    loadings: np.ndarray  # (D, c)
    coefs: np.ndarray  # (c,) regression scalar per component
    x_mean: np.ndarray
    y_mean: float

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    def fitted_response(self) -> np.ndarray:
        """Reconstruction of the (uncentered) response from the fitted components."""
        return self.scores @ self.coefs + self.y_mean


def pls_fit(x: np.ndarray, y: np.ndarray, n_components: int) -> PlsModel:
    """Fit PLS by NIPALS on one response vector.

    Per component: weight w = X'y normalized, score t = Xw, loading
    p = X't/(t't), coefficient b = y't/(t't), then deflate X by t p' and y
    by b t. Iteration stops early if the residual carries no signal.
    """
    x = np.array(x, dtype=np.float64)
    y = np.array(y, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ScoringError(
            f"incompatible shapes: x {x.shape}, y {y.shape}"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ScoringError("pls_fit requires finite inputs")
    n, d = x.shape
    if not 1 <= n_components <= min(n - 1, d):
        raise ScoringError(
            f"n_components must be in [1, min(N-1, D)] = [1, {min(n - 1, d)}], "
            f"got {n_components}"
        )
    x_mean = x.mean(axis=0)
    y_mean = float(y.mean())
    x -= x_mean
    y = y - y_mean
    y_scale = float(np.linalg.norm(y))
    if y_scale <= _EPS * max(1.0, abs(y_mean)):
        raise ZeroVarianceResponseError("response has zero variance")

    weights, scores, loadings, coefs = [], [], [], []
    for _ in range(n_components):
        w = x.T @ y
        w_norm = np.linalg.norm(w)
        if w_norm <= _EPS * y_scale:
            break  # residual response is orthogonal to the remaining columns
        w /= w_norm
        t = x @ w
        tt = float(t @ t)
        if tt <= _EPS:
            break
        p = x.T @ t / tt
        b = float(y @ t) / tt
        x -= np.outer(t, p)
        y = y - b * t
        weights.append(w)
        scores.append(t)
        loadings.append(p)
        coefs.append(b)
    if not weights:
        raise DegenerateModelError("no component could be extracted")
    return PlsModel(
        weights=np.column_stack(weights),
        scores=np.column_stack(scores),
        loadings=np.column_stack(loadings),
        coefs=np.array(coefs),
        x_mean=x_mean,
        y_mean=y_mean,
    )


def vip_scores(model: PlsModel) -> np.ndarray:
    """Variable importance in projection for every feature.

    VIP_j = sqrt(D * sum_k SS_k w_jk^2 / sum_k SS_k) with
    SS_k = b_k^2 (t_k' t_k), so sum_j VIP_j^2 = D exactly.
    """
    ss = model.coefs**2 * np.einsum("nk,nk->k", model.scores, model.scores)
    total = ss.sum()
    if not total > 0:
        raise DegenerateModelError("all components explain zero response variance")
    d = model.weights.shape[0]
    return np.sqrt(d * (model.weights**2 @ ss) / total)


def class_indicator_response(labels: np.ndarray) -> np.ndarray:
    """Single centered response for multi-class labels.

    Uses the first (lowest) class's indicator column, centered. Raises on
    single-class input, where no separation exists.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ZeroVarianceResponseError(
            f"need at least 2 classes, got {classes.size}"
        )
    y = (labels == classes[0]).astype(np.float64)
    return y - y.mean()


def _spearman_matrix(x: np.ndarray) -> np.ndarray:
    """Spearman rank correlation between all column pairs.

    Pairs involving a constant column get correlation 0 (no measurable
    association); the diagonal is 1 by convention.
    """
    ranks = rankdata(x, axis=0)
    ranks -= ranks.mean(axis=0)
    norms = np.sqrt(np.einsum("nd,nd->d", ranks, ranks))
    ok = norms > _EPS
    safe = np.where(ok, norms, 1.0)
    ranks /= safe
    rho = ranks.T @ ranks
    rho[~ok, :] = 0.0
    rho[:, ~ok] = 0.0
    np.fill_diagonal(rho, 1.0)
    return np.clip(rho, -1.0, 1.0)


def _path_energy(adjacency: np.ndarray, beta: float) -> np.ndarray:
    """Row sums of (I - rA)^-1 - I with r = beta / spectral_radius(A).

    This is the sum over all path lengths l >= 1 of the damped walk weights
    (rA)^l, evaluated in closed form.
    """
    dim = adjacency.shape[0]
    radius = float(np.max(np.abs(np.linalg.eigvalsh(adjacency))))
    if radius <= _EPS:
        return np.zeros(dim)
    r = beta / radius
    ones = np.ones(dim)
    resolvent_rows = np.linalg.solve(np.eye(dim) - r * adjacency, ones)
    # The series has nonnegative terms; clamp float error on degenerate graphs.
    return np.maximum(resolvent_rows - ones, 0.0)


def inffs_scores(
    x: np.ndarray, alpha_mix: float = 0.5, beta: float = 0.9
) -> np.ndarray:
    """Unsupervised graph ranking from dispersion and rank correlation.

    Edge weight: alpha_mix * max(sigma_i, sigma_j) + (1 - alpha_mix) *
    (1 - |spearman_ij|), with per-column standard deviations rescaled to
    [0, 1]. Features scoring high sit on many heavy paths.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ScoringError(f"need a 2-D matrix with D >= 2 columns, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ScoringError("inffs_scores requires finite inputs")
    if not 0.0 <= alpha_mix <= 1.0:
        raise ScoringError(f"alpha_mix must be in [0, 1], got {alpha_mix}")
    if not 0.0 < beta < 1.0:
        raise ScoringError(f"beta must be in (0, 1), got {beta}")
    sigma = x.std(axis=0)
    smax = sigma.max()
    sigma = sigma / smax if smax > _EPS else np.zeros_like(sigma)
    rho = _spearman_matrix(x)
    adjacency = alpha_mix * np.maximum.outer(sigma, sigma) + (1.0 - alpha_mix) * (
        1.0 - np.abs(rho)
    )
    return _path_energy(adjacency, beta)


def _equal_frequency_tokens(column: np.ndarray, tokens: int) -> np.ndarray:
    # inverted_cdf picks order statistics, so bin edges are unchanged when
    # every sample is duplicated (linear interpolation is not).
    edges = np.quantile(
        column, np.linspace(0, 1, tokens + 1)[1:-1], method="inverted_cdf"
    )
    return np.searchsorted(edges, column, side="right")


def _fisher_relevance(tokens: np.ndarray, labels: np.ndarray) -> float:
    """Between-class over within-class variance of the token values."""
    n = tokens.shape[0]
    grand_mean = tokens.mean()
    between = 0.0
    within = 0.0
    for cls in np.unique(labels):
        group = tokens[labels == cls]
        weight = group.size / n
        between += weight * (group.mean() - grand_mean) ** 2
        within += weight * group.var()
    return between / (within + _EPS)


def ilfs_scores(
    x: np.ndarray, labels: np.ndarray, tokens: int = 4, beta: float = 0.9
) -> np.ndarray:
    """Supervised path-energy ranking on token-quantized features.

    Each column is quantized into equal-frequency tokens; its relevance is
    the Fisher discriminant of tokens against labels. The graph couples
    columns i, j with sqrt(r_i * r_j), rescaled to [0, 1], and scores are the
    same geometric-series path energy as the unsupervised criterion.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ScoringError(f"need a 2-D matrix with D >= 2 columns, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ScoringError("ilfs_scores requires finite inputs")
    if labels.shape != (x.shape[0],):
        raise ScoringError(
            f"labels shape {labels.shape} does not match {x.shape[0]} samples"
        )
    if np.unique(labels).size < 2:
        raise ZeroVarianceResponseError("need at least 2 classes")
    if tokens < 2:
        raise ScoringError(f"token count must be >= 2, got {tokens}")
    if not 0.0 < beta < 1.0:
        raise ScoringError(f"beta must be in (0, 1), got {beta}")
    relevance = np.array(
        [
            _fisher_relevance(_equal_frequency_tokens(x[:, j], tokens), labels)
            for j in range(x.shape[1])
        ]
    )
    adjacency = np.sqrt(np.outer(relevance, relevance))
    peak = adjacency.max()
    if peak > _EPS:
        adjacency = adjacency / peak
    return _path_energy(adjacency, beta)


def _subsample(
    data: np.ndarray, labels: np.ndarray, cap: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    n = data.shape[0]
    if n <= cap:
        return data, labels
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n, size=cap, replace=False))
    return data[keep], labels[keep]


def per_feature_scores(
    f: FeatureMatrix,
    criterion: str,
    params: ScorerParams | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Score every column of the full matrix jointly, on one shared scale."""
    if params is None:
        params = default_params(criterion)
    data, labels = _subsample(f.data, f.labels, SAMPLE_CAP, seed)
    if criterion == PLS:
        if not isinstance(params, PlsParams):
            raise ScoringError(f"criterion {criterion} expects PlsParams")
        response = class_indicator_response(labels)
        model = pls_fit(data, response, params.n_components)
        return vip_scores(model)
    if criterion == INF_FS:
        if not isinstance(params, InfFsParams):
            raise ScoringError(f"criterion {criterion} expects InfFsParams")
        return inffs_scores(data, params.alpha_mix, params.beta)
    if criterion == IL_FS:
        if not isinstance(params, IlFsParams):
            raise ScoringError(f"criterion {criterion} expects IlFsParams")
        return ilfs_scores(data, labels, params.tokens, params.beta)
    raise ScoringError(f"unknown criterion {criterion!r}")


def stage_scores(
    f: FeatureMatrix,
    criterion: str,
    params: ScorerParams | None = None,
    seed: int = 0,
) -> StageScores:
    """Per-stage importance: mean per-feature score within each stage slice."""
    scores = per_feature_scores(f, criterion, params, seed)
    alpha = tuple(
        float(scores[s.start : s.stop].mean()) for s in f.stage_slices
    )
    return StageScores(alpha=alpha, criterion=criterion)
