"""Dense complex linear algebra for small multipartite systems.

Operators are plain ``numpy`` complex arrays. Subsystem bookkeeping is done
with :class:`SubsystemShape`, which pairs factor dimensions with labels so
that partial traces and reorderings are addressed by name (``"A1"``,
``"B2"``, ...) rather than by axis position.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

NORM_TOL = 1e-12
STRUCT_TOL = 1e-9
HERMITIAN_TOL = 1e-10
BASIS_TOL = 1e-10


@dataclass(frozen=True)
class SubsystemShape:
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(str(label) for label in self.labels)
        if len(dims) != len(labels):
            raise ValueError(f"{len(dims)} dims but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        if any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def select(self, labels: Iterable[str]) -> "SubsystemShape":
        labels = tuple(labels)
        return SubsystemShape(tuple(self.dim(label) for label in labels), labels)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """``v = sum_j coefficients[j] * left[:, j] (x) right[:, j]``."""

    coefficients: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.sum(self.coefficients > BASIS_TOL))

    def reconstruct(self) -> np.ndarray:
        return np.einsum("j,aj,bj->ab", self.coefficients, self.left, self.right).reshape(-1)


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def unit_vector(v, tol: float = NORM_TOL) -> np.ndarray:
    arr = np.asarray(v, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    norm2 = float(np.vdot(arr, arr).real)
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"vector is not normalized (squared norm {norm2!r})")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def kron(*ms) -> np.ndarray:
    if not ms:
        raise ValueError("kron needs at least one factor")
    factors = [np.asarray(m, dtype=complex) for m in ms]
    if not all(np.all(np.isfinite(f)) for f in factors):
        raise ValueError("kron factor has non-finite entries")
    return reduce(np.kron, factors)


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def basis_ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its first largest-magnitude entry is real positive."""
    v = np.asarray(v, dtype=complex)
    flat = v.reshape(-1)
    mags = np.abs(flat)
    if mags.max(initial=0.0) == 0.0:
        return v
    # first index within rounding of the maximum, so ties resolve deterministically
    k = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
    return v * (np.conj(flat[k]) / mags[k])


def _check_shape(dim: int, shape: SubsystemShape) -> None:
    if shape.total != dim:
        raise ValueError(f"shape {shape.dims} has total dimension {shape.total}, expected {dim}")


def permute(m: np.ndarray, shape: SubsystemShape, order: Sequence[str]) -> np.ndarray:
    """Reorder the tensor factors of a square operator to the label ``order``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError("permute needs a square operator")
    _check_shape(m.shape[0], shape)
    order = tuple(order)
    if sorted(order) != sorted(shape.labels):
        raise ValueError(f"order {order} is not a permutation of {shape.labels}")
    n = len(shape.dims)
    axes = [shape.index(label) for label in order]
    t = m.reshape(shape.dims + shape.dims)
    t = t.transpose(axes + [a + n for a in axes])
    return t.reshape(m.shape)


def permute_vector(v: np.ndarray, shape: SubsystemShape, order: Sequence[str]) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    _check_shape(v.size, shape)
    order = tuple(order)
    if sorted(order) != sorted(shape.labels):
        raise ValueError(f"order {order} is not a permutation of {shape.labels}")
    axes = [shape.index(label) for label in order]
    return v.reshape(shape.dims).transpose(axes).reshape(-1)


def partial_trace(m: np.ndarray, shape: SubsystemShape, keep: Iterable[str]) -> np.ndarray:
    """Trace out every subsystem not in ``keep``; kept factors stay in ``shape`` order."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError("partial_trace needs a square operator")
    _check_shape(m.shape[0], shape)
    keep = set(keep)
    for label in keep:
        shape.index(label)
    n = len(shape.dims)
    rows = list(range(n))
    cols = [i + n if shape.labels[i] in keep else i for i in range(n)]
    out = [i for i in range(n) if shape.labels[i] in keep]
    out = out + [i + n for i in out]
    t = np.einsum(m.reshape(shape.dims + shape.dims), rows + cols, out)
    d = int(np.prod([shape.dims[i] for i in range(n) if shape.labels[i] in keep], dtype=np.int64))
    return t.reshape(d, d)


def reduced_state(v: np.ndarray, shape: SubsystemShape, keep: Iterable[str]) -> np.ndarray:
    """Reduced density operator of a pure state without forming the full projector."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    _check_shape(v.size, shape)
    keep = tuple(label for label in shape.labels if label in set(keep))
    rest = tuple(label for label in shape.labels if label not in keep)
    t = permute_vector(v, shape, keep + rest)
    d = int(np.prod([shape.dim(label) for label in keep], dtype=np.int64))
    t = t.reshape(d, -1)
    return t @ dagger(t)


def is_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(h - dagger(h)), initial=0.0) <= tol)


def eig_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching eigenvector columns.

    Each eigenvector is phase-fixed (largest entry real positive) so the
    output is deterministic for a given input.
    """
    h = as_matrix(h)
    if h.shape[0] != h.shape[1] or not is_hermitian(h, tol):
        raise ValueError("eig_hermitian needs a Hermitian matrix")
    vals, vecs = np.linalg.eigh((h + dagger(h)) / 2)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    vecs = np.column_stack([fix_phase(vecs[:, j]) for j in range(vecs.shape[1])])
    return vals, vecs


def is_psd(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    if not is_hermitian(m, tol):
        return False
    return bool(np.linalg.eigvalsh((m + dagger(m)) / 2).min() >= -tol)


def check_density(rho, tol: float = HERMITIAN_TOL, name: str = "state") -> np.ndarray:
    rho = as_matrix(rho, name)
    if rho.shape[0] != rho.shape[1]:
        raise ValueError(f"{name} must be square")
    if not is_psd(rho, tol):
        raise ValueError(f"{name} is not positive semidefinite")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"{name} has trace {tr.real!r}, expected 1")
    return rho


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + dagger(m)) / 2)
    # eigenvalues at round-off level are zero; their square roots would not be
    floor = 10 * np.finfo(float).eps * m.shape[0] * max(float(np.abs(vals).max()), 1.0)
    vals = np.where(vals > floor, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ dagger(vecs)


def fidelity(rho, sigma, tol: float = STRUCT_TOL) -> float:
    """Uhlmann fidelity in the squared convention, ``(Tr|sqrt(rho) sqrt(sigma)|)**2``."""
    rho = check_density(rho, tol, "rho")
    sigma = check_density(sigma, tol, "sigma")
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    f = float(np.sum(np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)) ** 2)
    return min(max(f, 0.0), 1.0)


def _orthonormal_from_block(block: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(block columns).

    The subspace projector is applied to computational basis vectors in
    index order and the survivors are Gram-Schmidt orthonormalised.
    """
    dim, k = block.shape
    projector = block @ dagger(block)
    out: list[np.ndarray] = []
    for i in range(dim):
        w = projector[:, i].copy()
        for u in out:
            w -= np.vdot(u, w) * u
        n = np.linalg.norm(w)
        if n > 1e-6:
            out.append(w / n)
        if len(out) == k:
            break
    return np.column_stack(out)


def schmidt_decompose(v, shape: SubsystemShape, left: Iterable[str]) -> SchmidtDecomposition:
    """Schmidt decomposition of ``v`` across the cut ``left | rest``.

    Coefficients are real, nonnegative and descending. Within a block of
    equal nonzero coefficients the left basis is the one closest to the
    computational basis (projected basis vectors, Gram-Schmidt in index
    order). Each right vector has its largest entry real positive; the
    compensating phase sits in the left vector.
    """
    v = unit_vector(v)
    _check_shape(v.size, shape)
    left = tuple(label for label in shape.labels if label in set(left))
    right = tuple(label for label in shape.labels if label not in left)
    if not left or not right:
        raise ValueError("bipartition must leave both sides non-empty")
    dl = int(np.prod([shape.dim(label) for label in left], dtype=np.int64))
    m = permute_vector(v, shape, left + right).reshape(dl, -1)
    x, s, yh = np.linalg.svd(m, full_matrices=False)
    e = x.copy()
    f = yh.T.copy()  # columns are conj(y_j); m = sum_j s_j e_j f_j^T

    r = s.size
    j = 0
    while j < r:
        k = j + 1
        while k < r and abs(s[k] - s[j]) <= BASIS_TOL:
            k += 1
        if s[j] > BASIS_TOL and k - j > 1:
            e[:, j:k] = _orthonormal_from_block(x[:, j:k])
            for c in range(j, k):
                f[:, c] = m.T @ np.conj(e[:, c]) / s[c]
        j = k

    for c in range(r):
        fixed = fix_phase(f[:, c])
        mags = np.abs(f[:, c])
        if mags.max() > 0:
            k = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
            phase = fixed[k] / f[k, c]
            f[:, c] = fixed
            e[:, c] = e[:, c] / phase
    return SchmidtDecomposition(coefficients=s, left=e, right=f)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(unitary_group.rvs(dim, random_state=rng), dtype=complex).reshape(dim, dim)


def random_state_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real
